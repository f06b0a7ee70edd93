//! Source adapters for the three knowledge-base dumps.
//!
//! - ConceptNet (the 600k training split): `relation \t subject \t object [\t score]`
//! - ATOMIC 2020: `head \t relation \t tail`
//! - GLUCOSE: comma-separated rows with a header; every `{d}_specificNL` and
//!   `{d}_generalNL` column holds `subject >Relation> object` or `escaped`.
//!
//! Malformed rows are counted and skipped. More than half of the rows being
//! malformed is treated as a schema mismatch.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;

use super::{has_variable, Assertion, KbError, RelationLexicon, Source, Specificity};

/// Output of [`parse_source`].
#[derive(Debug, Default)]
pub struct ParseReport {
    pub assertions: Vec<Assertion>,
    /// Data rows seen, excluding blank lines and the GLUCOSE header.
    pub rows: usize,
    pub skipped: usize,
}

enum Row {
    Parsed(Vec<Assertion>),
    Malformed,
}

/// Trims, collapses runs of whitespace and drops angle brackets, which are
/// reserved for structural symbols.
pub fn normalize_text(s: &str) -> String {
    s.split_whitespace()
        .map(|w| w.replace(['<', '>'], ""))
        .filter(|w| !w.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn parse_source(
    path: &Path,
    source: Source,
    lexicon: &RelationLexicon,
) -> Result<ParseReport, KbError> {
    let file = File::open(path).map_err(|e| KbError::io(path, e))?;
    let reader = BufReader::new(file);
    let mut report = ParseReport::default();
    match source {
        Source::Conceptnet | Source::Atomic2020 => {
            for line in reader.lines() {
                let line = line.map_err(|e| KbError::io(path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                let row = report.rows;
                report.rows += 1;
                let parsed = if source == Source::Conceptnet {
                    conceptnet_row(&line, row, lexicon)?
                } else {
                    atomic_row(&line, row, lexicon)?
                };
                absorb(&mut report, parsed);
            }
        }
        Source::Glucose => parse_glucose(reader, path, lexicon, &mut report)?,
    }
    if report.skipped * 2 > report.rows {
        return Err(KbError::SchemaMismatch {
            path: path.display().to_string(),
            kb: source,
            malformed: report.skipped,
            rows: report.rows,
        });
    }
    Ok(report)
}

fn absorb(report: &mut ParseReport, row: Row) {
    match row {
        Row::Parsed(v) => report.assertions.extend(v),
        Row::Malformed => report.skipped += 1,
    }
}

fn conceptnet_row(line: &str, row: usize, lexicon: &RelationLexicon) -> Result<Row, KbError> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() < 3 || fields.len() > 4 {
        return Ok(Row::Malformed);
    }
    let (relation, subject, object) = (
        fields[0].trim(),
        normalize_text(fields[1]),
        normalize_text(fields[2]),
    );
    if relation.is_empty() || subject.is_empty() || object.is_empty() {
        return Ok(Row::Malformed);
    }
    let relation_text = lexicon.text(relation)?.to_string();
    Ok(Row::Parsed(vec![Assertion {
        id: format!("conceptnet:{row}"),
        source: Source::Conceptnet,
        subject,
        relation: relation.to_string(),
        relation_text,
        object,
        specificity: Specificity::Specific,
        glucose_dimension: None,
    }]))
}

fn atomic_row(line: &str, row: usize, lexicon: &RelationLexicon) -> Result<Row, KbError> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 3 {
        return Ok(Row::Malformed);
    }
    let (subject, relation, object) = (
        normalize_text(fields[0]),
        fields[1].trim(),
        normalize_text(fields[2]),
    );
    if relation.is_empty()
        || subject.is_empty()
        || object.is_empty()
        || object.eq_ignore_ascii_case("none")
    {
        return Ok(Row::Malformed);
    }
    let relation_text = lexicon.text(relation)?.to_string();
    let specificity = if has_variable(&subject) || has_variable(&object) {
        Specificity::General
    } else {
        Specificity::Specific
    };
    Ok(Row::Parsed(vec![Assertion {
        id: format!("atomic2020:{row}"),
        source: Source::Atomic2020,
        subject,
        relation: relation.to_string(),
        relation_text,
        object,
        specificity,
        glucose_dimension: None,
    }]))
}

static GLUCOSE_NL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(.*?)\s*>([^>]+)>\s*(.*)$").expect("glucose regex"));

/// Splits a GLUCOSE natural-language field `subject >Relation> object`.
pub fn split_glucose_nl(field: &str) -> Option<(String, String, String)> {
    let caps = GLUCOSE_NL.captures(field.trim())?;
    let subject = normalize_text(&caps[1]);
    let relation = caps[2].trim().to_string();
    let object = normalize_text(&caps[3]);
    if subject.is_empty() || relation.is_empty() || object.is_empty() {
        return None;
    }
    Some((subject, relation, object))
}

fn parse_glucose(
    reader: impl std::io::Read,
    path: &Path,
    lexicon: &RelationLexicon,
    report: &mut ParseReport,
) -> Result<(), KbError> {
    let mut csv = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = match csv.headers() {
        Ok(h) => h.clone(),
        Err(e) if e.is_io_error() => return Err(KbError::io(path, std::io::Error::other(e))),
        Err(_) => return Ok(()),
    };
    if headers.is_empty() {
        return Ok(());
    }
    let column: HashMap<&str, usize> = headers
        .iter()
        .enumerate()
        .map(|(i, h)| (h.trim(), i))
        .collect();
    let mut dims = Vec::new();
    for d in 1..=10u8 {
        let spec = column.get(format!("{d}_specificNL").as_str()).copied();
        let gen = column.get(format!("{d}_generalNL").as_str()).copied();
        if spec.is_some() || gen.is_some() {
            dims.push((d, spec, gen));
        }
    }
    if dims.is_empty() {
        return Err(KbError::SchemaMismatch {
            path: path.display().to_string(),
            kb: Source::Glucose,
            malformed: 0,
            rows: 0,
        });
    }
    for record in csv.records() {
        let row = report.rows;
        report.rows += 1;
        let record = match record {
            Ok(r) if r.len() == headers.len() => r,
            Ok(_) | Err(_) => {
                report.skipped += 1;
                continue;
            }
        };
        let mut out = Vec::new();
        let mut malformed = false;
        for &(d, spec, gen) in &dims {
            for (col, specificity, tag) in [
                (spec, Specificity::Specific, 's'),
                (gen, Specificity::General, 'g'),
            ] {
                let Some(col) = col else { continue };
                let field = record.get(col).unwrap_or("").trim();
                if field.is_empty() || field.eq_ignore_ascii_case("escaped") {
                    continue;
                }
                let Some((subject, relation, object)) = split_glucose_nl(field) else {
                    malformed = true;
                    continue;
                };
                if specificity == Specificity::General
                    && !(has_variable(&subject) || has_variable(&object))
                {
                    malformed = true;
                    continue;
                }
                let relation_text = lexicon.text(&relation)?.to_string();
                out.push(Assertion {
                    id: format!("glucose:{row}:{d}:{tag}"),
                    source: Source::Glucose,
                    subject,
                    relation,
                    relation_text,
                    object,
                    specificity,
                    glucose_dimension: Some(d),
                });
            }
        }
        absorb(
            report,
            if malformed {
                Row::Malformed
            } else {
                Row::Parsed(out)
            },
        );
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn conceptnet_isa_row() {
        let f = write("IsA\tdog\tanimal\n");
        let r = parse_source(f.path(), Source::Conceptnet, &RelationLexicon::builtin()).unwrap();
        let a = &r.assertions[0];
        assert_eq!(
            (
                a.subject.as_str(),
                a.relation.as_str(),
                a.relation_text.as_str()
            ),
            ("dog", "IsA", "is a")
        );
        assert_eq!(a.object, "animal");
        assert_eq!(a.specificity, Specificity::Specific);
        assert_eq!(a.id, "conceptnet:0");
    }

    #[test]
    fn empty_file_yields_nothing() {
        let f = write("");
        for s in Source::ALL {
            let r = parse_source(f.path(), s, &RelationLexicon::builtin()).unwrap();
            assert!(r.assertions.is_empty());
            assert_eq!(r.skipped, 0);
        }
    }

    #[test]
    fn malformed_rows_are_counted() {
        let f = write("IsA\tdog\tanimal\t1.0\nUsedFor\tpen\twriting\nthis row is broken\nAtLocation\tfish\twater\n");
        let r = parse_source(f.path(), Source::Conceptnet, &RelationLexicon::builtin()).unwrap();
        assert_eq!(r.assertions.len(), 3);
        assert_eq!(r.skipped, 1);
        assert_eq!(r.assertions[2].id, "conceptnet:3");
    }

    #[test]
    fn mostly_malformed_is_schema_mismatch() {
        let f = write("a\nb\nIsA\tdog\tanimal\n");
        let err =
            parse_source(f.path(), Source::Conceptnet, &RelationLexicon::builtin()).unwrap_err();
        assert!(matches!(
            err,
            KbError::SchemaMismatch {
                malformed: 2,
                rows: 3,
                ..
            }
        ));
    }

    #[test]
    fn unknown_relation_fails_loudly() {
        let f = write("FlewOver\tdog\tmoon\n");
        let err =
            parse_source(f.path(), Source::Conceptnet, &RelationLexicon::builtin()).unwrap_err();
        assert!(matches!(err, KbError::UnknownRelation(_)));
    }

    #[test]
    fn atomic_specificity_from_variables() {
        let f = write("PersonX walks PersonX's dog\txEffect\tgets exercise\nice cream\tObjectUse\teat on a hot day\nPersonX buys ___\txIntent\tnone\n");
        let r = parse_source(f.path(), Source::Atomic2020, &RelationLexicon::builtin()).unwrap();
        assert_eq!(r.assertions.len(), 2);
        assert_eq!(r.skipped, 1);
        assert_eq!(r.assertions[0].specificity, Specificity::General);
        assert_eq!(r.assertions[1].specificity, Specificity::Specific);
    }

    #[test]
    fn glucose_rows() {
        let csv = "story_id,selected_sentence_index,story,selected_sentence,1_specificNL,1_generalNL,2_specificNL,2_generalNL\n\
s1,4,\"The game was tied. They scored a final goal!\",They scored a final goal!,They scored a final goal >Causes> They feel(s) happy,Some People_A score a goal >Causes> Some People_A feel(s) happy,escaped,escaped\n\
s2,0,story,sent,no separator here,escaped,escaped,escaped\n";
        let f = write(csv);
        let r = parse_source(f.path(), Source::Glucose, &RelationLexicon::builtin()).unwrap();
        assert_eq!(r.rows, 2);
        assert_eq!(r.skipped, 1);
        assert_eq!(r.assertions.len(), 2);
        let s = &r.assertions[0];
        assert_eq!(s.id, "glucose:0:1:s");
        assert_eq!(s.relation, "Causes");
        assert_eq!(s.object, "They feel(s) happy");
        assert_eq!(s.glucose_dimension, Some(1));
        assert_eq!(r.assertions[1].specificity, Specificity::General);
        for a in &r.assertions {
            a.validate().unwrap();
        }
    }

    #[test]
    fn normalization_collapses_space_and_brackets() {
        assert_eq!(normalize_text("  a   <b>  c "), "a b c");
    }
}
