// Corpus BLEU and ROUGE on a handful of predictions.

use ccinfer::metrics::evaluate;

pub fn run_example() -> anyhow::Result<()> {
    let preds: Vec<String> = ["the red team wins the game", "<object> gets soaked", "happy"].map(String::from).to_vec();
    let refs: Vec<String> = ["the red team wins the game", "gets soaked by the rain", "proud of the grade"].map(String::from).to_vec();
    let report = evaluate(&preds, &refs, None)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn main() -> anyhow::Result<()> {
    run_example()
}
