use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{render_example, sample_hint, Format, HintError, RenderInput, TrainingExample};
use crate::align::{AlignedAssertion, Story};
use crate::kb::Source;

/// Output format per knowledge-base source. Unlisted sources render as joint.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormatMap(pub BTreeMap<Source, Format>);

impl FormatMap {
    pub fn uniform(format: Format) -> Self {
        FormatMap(Source::ALL.into_iter().map(|s| (s, format)).collect())
    }

    pub fn get(&self, source: Source) -> Format {
        self.0.get(&source).copied().unwrap_or(Format::Joint)
    }

    /// Parses `source=format` entries, e.g. `atomic2020=paracomet`.
    pub fn parse(entries: &[String]) -> Result<Self, HintError> {
        let mut map = FormatMap::default();
        for e in entries {
            let (s, f) = e
                .split_once('=')
                .ok_or_else(|| HintError::UnknownFormat(e.clone()))?;
            let source = s
                .parse::<Source>()
                .map_err(|_| HintError::UnknownFormat(e.clone()))?;
            map.0.insert(source, f.parse()?);
        }
        Ok(map)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub counts: BTreeMap<Source, usize>,
    pub hinted_fraction: f64,
    pub seed: u64,
    pub formats: BTreeMap<Source, Format>,
    /// GLUCOSE-format assertions dropped for lack of a counterpart.
    pub skipped: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub examples: Vec<TrainingExample>,
    pub manifest: Manifest,
}

/// Rng for hint resampling in a given epoch: one ChaCha stream per epoch.
pub fn epoch_rng(seed: u64, epoch: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch + 1);
    rng
}

fn pair_key(id: &str) -> Option<&str> {
    id.strip_suffix(":s").or_else(|| id.strip_suffix(":g"))
}

/// Renders every aligned assertion, samples hints with probability `p_hint`
/// and shuffles. GLUCOSE-format assertions are rendered once per
/// specific/general pair, with a seeded coin choosing which half leads.
pub fn build_dataset(
    aligned: &[AlignedAssertion],
    stories: &[Story],
    formats: &FormatMap,
    p_hint: f64,
    seed: u64,
) -> Result<Dataset, HintError> {
    let by_story: HashMap<&str, &Story> =
        stories.iter().map(|s| (s.story_id.as_str(), s)).collect();
    let mut pairs: HashMap<&str, Vec<&AlignedAssertion>> = HashMap::new();
    for al in aligned {
        if formats.get(al.assertion.source) == Format::Glucose {
            if let Some(k) = pair_key(&al.assertion.id) {
                pairs.entry(k).or_default().push(al);
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut examples = Vec::with_capacity(aligned.len());
    let mut skipped = 0;
    for al in aligned {
        let format = formats.get(al.assertion.source);
        let (lead, counterpart) = if format == Format::Glucose {
            let members = pair_key(&al.assertion.id)
                .and_then(|k| pairs.get(k))
                .map(Vec::as_slice)
                .unwrap_or(&[]);
            match members {
                [a, b] if std::ptr::eq(*a, al) => {
                    if rng.random_bool(0.5) {
                        (*b, Some(&a.assertion))
                    } else {
                        (*a, Some(&b.assertion))
                    }
                }
                [_, _] => continue,
                _ => {
                    skipped += 1;
                    continue;
                }
            }
        } else {
            (al, None)
        };
        let story = by_story
            .get(lead.story_id.as_str())
            .ok_or_else(|| HintError::MissingStory(lead.story_id.clone()))?;
        let hint = sample_hint(&lead.assertion, format.hint_parts(), p_hint, &mut rng);
        let input = RenderInput {
            aligned: lead,
            sentences: &story.sentences,
            counterpart,
        };
        examples.push(render_example(input, hint.as_ref(), format)?);
    }
    examples.shuffle(&mut rng);

    let mut counts = BTreeMap::new();
    for ex in &examples {
        *counts.entry(ex.provenance.assertion.source).or_insert(0) += 1;
    }
    let hinted = examples.iter().filter(|e| e.hinted).count();
    let manifest = Manifest {
        counts,
        hinted_fraction: if examples.is_empty() {
            0.0
        } else {
            hinted as f64 / examples.len() as f64
        },
        seed,
        formats: Source::ALL
            .into_iter()
            .map(|s| (s, formats.get(s)))
            .collect(),
        skipped,
    };
    Ok(Dataset { examples, manifest })
}

/// Re-renders each example with a fresh hint draw for `epoch`.
pub fn resample_hints(
    examples: &[TrainingExample],
    p_hint: f64,
    seed: u64,
    epoch: u64,
) -> Result<Vec<TrainingExample>, HintError> {
    let mut rng = epoch_rng(seed, epoch);
    examples
        .iter()
        .map(|ex| {
            let hint = sample_hint(
                &ex.provenance.assertion,
                ex.format.hint_parts(),
                p_hint,
                &mut rng,
            );
            render_example(ex.input(), hint.as_ref(), ex.format)
        })
        .collect()
}

/// `data.jsonl` → `data.manifest.json`.
pub fn manifest_path(path: &Path) -> PathBuf {
    path.with_extension("manifest.json")
}

pub fn write_dataset(path: &Path, dataset: &Dataset) -> Result<(), HintError> {
    let file = File::create(path).map_err(|e| HintError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for ex in &dataset.examples {
        writeln!(
            w,
            "{}",
            serde_json::to_string(ex).expect("example serializes")
        )
        .map_err(|e| HintError::io(path, e))?;
    }
    w.flush().map_err(|e| HintError::io(path, e))?;
    let mpath = manifest_path(path);
    let json = serde_json::to_string_pretty(&dataset.manifest).expect("manifest serializes");
    std::fs::write(&mpath, json + "\n").map_err(|e| HintError::io(&mpath, e))
}

pub fn read_dataset(path: &Path) -> Result<Vec<TrainingExample>, HintError> {
    let file = File::open(path).map_err(|e| HintError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| HintError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| HintError::Json {
            path: path.display().to_string(),
            line: i + 1,
            source: e,
        })?);
    }
    Ok(out)
}
