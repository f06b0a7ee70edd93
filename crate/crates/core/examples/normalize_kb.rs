// Parse small ConceptNet and ATOMIC dumps and rename ATOMIC variables.

use ccinfer::kb::{parse_source, rename_variables, RelationLexicon, Source};

pub fn run_example() -> anyhow::Result<()> {
    let dir = tempfile::tempdir()?;
    let lexicon = RelationLexicon::builtin();

    let conceptnet = dir.path().join("conceptnet.tsv");
    std::fs::write(&conceptnet, "IsA\tdog\tanimal\nUsedFor\tpen\twriting\nnot a row\nAtLocation\tfish\twater\n")?;
    let report = parse_source(&conceptnet, Source::Conceptnet, &lexicon)?;
    println!("conceptnet: {} rows, {} skipped", report.rows, report.skipped);
    for a in &report.assertions {
        println!("  {} | {} | {}", a.subject, a.relation_text, a.object);
    }

    let atomic = dir.path().join("atomic.tsv");
    std::fs::write(&atomic, "PersonX walks PersonX's dog\txEffect\tgets exercise\nPersonY thanks PersonX\txReact\tgrateful\n")?;
    let report = parse_source(&atomic, Source::Atomic2020, &lexicon)?;
    for a in report.assertions.iter().map(rename_variables) {
        println!("  [{:?}] {} | {} | {}", a.specificity, a.subject, a.relation_text, a.object);
    }
    Ok(())
}

fn main() -> anyhow::Result<()> {
    run_example()
}
