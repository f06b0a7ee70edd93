// Render the hockey story in all three formats, with and without hints.

use ccinfer::align::AlignedAssertion;
use ccinfer::hint::{render_example, sample_hint, Format, Hint, PartKind, RenderInput};
use ccinfer::kb::{Assertion, Source, Specificity};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn run_example() -> anyhow::Result<()> {
    let sentences: Vec<String> = [
        "The hockey game was tied up.",
        "The red team had the puck.",
        "They sprinted down the ice.",
        "They cracked a shot on goal!",
        "They scored a final goal!",
    ]
    .map(String::from)
    .to_vec();
    let assertion = Assertion {
        id: "atomic2020:0".into(),
        source: Source::Atomic2020,
        subject: "the red team".into(),
        relation: "xEffect".into(),
        relation_text: "has the effect on the subject".into(),
        object: "win the game".into(),
        specificity: Specificity::Specific,
        glucose_dimension: Some(7),
    };
    let general = Assertion {
        id: "atomic2020:1".into(),
        subject: "Some People_A".into(),
        object: "win a game".into(),
        specificity: Specificity::General,
        ..assertion.clone()
    };
    let aligned = AlignedAssertion {
        assertion,
        story_id: "hockey".into(),
        sentence_index: 5,
        story_distance: 0.0,
        sentence_distance: 0.0,
    };
    let input = RenderInput { aligned: &aligned, sentences: &sentences, counterpart: Some(&general) };

    let subject = Hint::from_kinds(&aligned.assertion, &[PartKind::Subject], Format::Paracomet.hint_parts())?;
    for format in Format::ALL {
        let plain = render_example(input, None, format)?;
        let hinted = render_example(input, Some(&subject), format)?;
        println!("[{format}]\n  source: {}\n  hinted: {}\n  target: {}", plain.source_text, hinted.source_text, plain.target_text);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..4 {
        match sample_hint(&aligned.assertion, Format::Joint.hint_parts(), 0.5, &mut rng) {
            Some(h) => println!("sampled hint: {:?}", h.kinds()),
            None => println!("sampled hint: none"),
        }
    }
    Ok(())
}

fn main() -> anyhow::Result<()> {
    run_example()
}
