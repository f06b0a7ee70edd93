//! The `ccinfer` subcommand driver. Exit codes: 0 success, 1 validation
//! error, 2 I/O error.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::adversarial::{
    build_records, gradient_suite, score_assertion, strip_symbols, GanConfig, GanError, GanTrainer,
};
use crate::align::{
    align_corpus, read_aligned, read_stories, sentence_id, write_aligned, AlignError,
    AlignedAssertion, BuiltinEmbedder, EmbeddingMatrix, IndexMode, PrecomputedSentences,
    SentenceEmbedder, Story,
};
use crate::bridge::{logits_of, scale_sweep, BridgeError, SWEEP_SCALES};
use crate::hint::{
    build_dataset, read_dataset, render_source, resample_hints, write_dataset, FormatMap,
    HintError, TrainingExample,
};
use crate::kb::{
    fill_specificity, parse_source, read_assertions, rename_variables, write_assertions, Assertion,
    KbError, RelationLexicon, RuleFiller, Source, Specificity,
};
use crate::metrics::{disc_accuracy, evaluate, LabeledAssertion, MetricsError};
use crate::neural::{
    Checkpoint, Discriminator, Generator, GradcheckConfig, ModelConfig, NeuralError, Tensor,
    Vocabulary,
};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Kb(#[from] KbError),
    #[error(transparent)]
    Align(#[from] AlignError),
    #[error(transparent)]
    Hint(#[from] HintError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Bridge(#[from] BridgeError),
    #[error(transparent)]
    Gan(#[from] GanError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Invalid(String),
}

impl CliError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    fn is_io(&self) -> bool {
        match self {
            CliError::Io { .. } => true,
            CliError::Kb(e) => matches!(e, KbError::Io { .. }),
            CliError::Align(e) => matches!(e, AlignError::Io { .. }),
            CliError::Hint(e) => matches!(e, HintError::Io { .. }),
            CliError::Neural(e) => matches!(e, NeuralError::Io { .. }),
            CliError::Gan(GanError::Neural(e)) => matches!(e, NeuralError::Io { .. }),
            CliError::Gan(GanError::Hint(e)) => matches!(e, HintError::Io { .. }),
            _ => false,
        }
    }

    pub fn exit_code(&self) -> i32 {
        if self.is_io() {
            2
        } else {
            1
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "ccinfer",
    version,
    about = "Contextual commonsense inference pipeline"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a knowledge-base dump into canonical JSON-lines assertions.
    Normalize(NormalizeArgs),
    /// Embed assertions or stories with the builtin hashed embedder (EMB1 output).
    Embed(EmbedArgs),
    /// Align each assertion to its nearest story and sentence.
    Align(AlignArgs),
    /// Render hint-augmented training examples.
    Hint(HintArgs),
    /// Train the generator and discriminator.
    Train(TrainArgs),
    /// Generate assertions for rendered sources.
    Generate(GenerateArgs),
    /// Score one assertion against a story with the discriminator.
    Score(ScoreArgs),
    /// BLEU/ROUGE and discriminator accuracy on a dataset.
    Eval(EvalArgs),
    /// Finite-difference gradient checks on the micro model.
    Gradcheck(GradcheckArgs),
    /// Bridge round-trip accuracy over a range of softmax scales.
    BridgeSweep(BridgeSweepArgs),
}

#[derive(Debug, Args)]
pub struct NormalizeArgs {
    /// Which dump format the input is.
    #[arg(long)]
    pub source: Source,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Relation lexicon JSON; defaults to the bundled one.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// Keep ATOMIC PersonX/Y/Z variables instead of renaming them.
    #[arg(long)]
    pub keep_variables: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum EmbedKind {
    Assertions,
    Stories,
    /// One row per story sentence, with ids `story#k`.
    Sentences,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[arg(long, value_enum)]
    pub kind: EmbedKind,
    /// Assertion or story JSON lines.
    #[arg(long)]
    pub input: PathBuf,
    /// EMB1 output; the id sidecar is written next to it.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 256)]
    pub dim: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct AlignArgs {
    #[arg(long)]
    pub assertions: PathBuf,
    #[arg(long)]
    pub stories: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Precomputed assertion embeddings (EMB1); builtin embedder otherwise.
    #[arg(long)]
    pub assertion_emb: Option<PathBuf>,
    /// Precomputed story embeddings (EMB1).
    #[arg(long)]
    pub story_emb: Option<PathBuf>,
    /// Precomputed sentence embeddings (EMB1, ids `story#k`).
    #[arg(long)]
    pub sentence_emb: Option<PathBuf>,
    #[arg(long, default_value_t = 256)]
    pub dim: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Partitioned story index with this many clusters.
    #[arg(long)]
    pub clusters: Option<usize>,
    #[arg(long, default_value_t = 3)]
    pub probe: usize,
    /// Add a filled-in specific copy of each general ATOMIC assertion.
    #[arg(long)]
    pub fill_specific: bool,
}

#[derive(Debug, Args)]
pub struct HintArgs {
    #[arg(long)]
    pub aligned: PathBuf,
    #[arg(long)]
    pub stories: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// `source=format` entries; unlisted sources render as joint.
    #[arg(long = "format")]
    pub formats: Vec<String>,
    #[arg(long, default_value_t = 0.5)]
    pub p_hint: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModelSize {
    Toy,
    Micro,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Directory for `vocab.json`, `epoch-N.ckp` and `metrics.jsonl`.
    #[arg(long)]
    pub out: PathBuf,
    /// JSON training config; flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Learning rate for both models.
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub no_adversarial: bool,
    #[arg(long)]
    pub no_confounder: bool,
    #[arg(long, value_enum, default_value_t = ModelSize::Toy)]
    pub model: ModelSize,
    #[arg(long, default_value_t = 2)]
    pub min_freq: usize,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub vocab: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// A rendered source text.
    #[arg(long, conflicts_with = "data")]
    pub source: Option<String>,
    /// Training-example JSON lines; sources are re-rendered without their hints.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Appended verbatim as ` hint: <HINT>`, e.g. `(<|subj|> the red team)`.
    #[arg(long)]
    pub hint: Option<String>,
    #[arg(long, default_value_t = 1)]
    pub beam: usize,
    #[arg(long, default_value_t = 24)]
    pub max_steps: usize,
    /// JSON-lines output; stdout otherwise.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub story: String,
    #[arg(long)]
    pub sentence: String,
    #[arg(long)]
    pub assertion: String,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub data: PathBuf,
    /// Gold-labeled assertions for discriminator accuracy.
    #[arg(long)]
    pub labeled: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub beam: usize,
    #[arg(long, default_value_t = 24)]
    pub max_steps: usize,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Coordinates probed per tensor; all when omitted.
    #[arg(long)]
    pub per_tensor: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BridgeSweepArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Decode these examples and sweep over their softmaxes.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 24)]
    pub max_steps: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `argv` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Normalize(a) => normalize(a),
        Command::Embed(a) => embed(a),
        Command::Align(a) => align(a),
        Command::Hint(a) => hint(a),
        Command::Train(a) => train(a),
        Command::Generate(a) => generate(a),
        Command::Score(a) => score(a),
        Command::Eval(a) => eval(a),
        Command::Gradcheck(a) => gradcheck(a),
        Command::BridgeSweep(a) => bridge_sweep(a),
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let json = serde_json::to_string_pretty(value).expect("report serializes");
    std::fs::write(path, json + "\n").map_err(|e| CliError::io(path, e))
}

fn emit_json(out: Option<&Path>, value: &impl Serialize) -> Result<(), CliError> {
    match out {
        Some(p) => write_json(p, value),
        None => {
            println!(
                "{}",
                serde_json::to_string_pretty(value).expect("report serializes")
            );
            Ok(())
        }
    }
}

fn normalize(a: NormalizeArgs) -> Result<(), CliError> {
    let lexicon = match &a.lexicon {
        Some(p) => RelationLexicon::from_path(p)?,
        None => RelationLexicon::builtin(),
    };
    let report = parse_source(&a.input, a.source, &lexicon)?;
    let out: Vec<Assertion> = if a.keep_variables {
        report.assertions
    } else {
        report.assertions.iter().map(rename_variables).collect()
    };
    write_assertions(&a.out, &out)?;
    eprintln!(
        "{} rows, {} skipped, {} assertions",
        report.rows,
        report.skipped,
        out.len()
    );
    Ok(())
}

fn embed(a: EmbedArgs) -> Result<(), CliError> {
    let embedder = BuiltinEmbedder::new(a.dim, a.seed)?;
    let matrix = match a.kind {
        EmbedKind::Assertions => embedder.embed_assertions(&read_assertions(&a.input)?)?,
        EmbedKind::Stories => embedder.embed_stories(&read_stories(&a.input)?)?,
        EmbedKind::Sentences => {
            let stories = read_stories(&a.input)?;
            let mut ids = Vec::new();
            let mut texts = Vec::new();
            for s in &stories {
                for (k, t) in s.sentences.iter().enumerate() {
                    ids.push(sentence_id(&s.story_id, k + 1));
                    texts.push(t.clone());
                }
            }
            embedder.embed_texts(ids, &texts)?
        }
    };
    matrix.write_emb1(&a.out)?;
    Ok(())
}

fn align(a: AlignArgs) -> Result<(), CliError> {
    let assertions = read_assertions(&a.assertions)?;
    let stories = read_stories(&a.stories)?;
    let builtin = BuiltinEmbedder::new(a.dim, a.seed)?;
    let a_emb = match &a.assertion_emb {
        Some(p) => EmbeddingMatrix::read_emb1(p)?,
        None => builtin.embed_assertions(&assertions)?,
    };
    let s_emb = match &a.story_emb {
        Some(p) => EmbeddingMatrix::read_emb1(p)?,
        None => builtin.embed_stories(&stories)?,
    };
    let precomputed = a
        .sentence_emb
        .as_deref()
        .map(EmbeddingMatrix::read_emb1)
        .transpose()?
        .map(PrecomputedSentences);
    let sentences: &dyn SentenceEmbedder = match &precomputed {
        Some(p) => p,
        None => &builtin,
    };
    let mode = match a.clusters {
        Some(k) => IndexMode::Partitioned {
            k_clusters: k,
            n_probe: a.probe,
            seed: a.seed,
        },
        None => IndexMode::Exact,
    };
    let mut aligned = align_corpus(&assertions, &stories, &a_emb, &s_emb, mode, sentences)?;
    if a.fill_specific {
        aligned = add_specific(aligned, &stories);
    }
    write_aligned(&a.out, &aligned)?;
    Ok(())
}

/// Follows every general ATOMIC assertion with its filled specific copy,
/// aligned to the same sentence. Unfillable assertions are left alone.
fn add_specific(aligned: Vec<AlignedAssertion>, stories: &[Story]) -> Vec<AlignedAssertion> {
    let filler = RuleFiller::lenient();
    let mut out = Vec::with_capacity(aligned.len());
    let mut unfilled = 0;
    for al in aligned {
        let a = &al.assertion;
        let sentence = stories
            .iter()
            .find(|s| s.story_id == al.story_id)
            .and_then(|s| s.sentence(al.sentence_index));
        let filled = match sentence {
            Some(text)
                if a.source == Source::Atomic2020 && a.specificity == Specificity::General =>
            {
                match fill_specificity(a, text, &filler) {
                    Ok(f) => Some(f),
                    Err(_) => {
                        unfilled += 1;
                        None
                    }
                }
            }
            _ => None,
        };
        let extra = filled.map(|f| AlignedAssertion {
            assertion: f,
            ..al.clone()
        });
        out.push(al);
        out.extend(extra);
    }
    if unfilled > 0 {
        eprintln!("{unfilled} general assertions could not be filled");
    }
    out
}

fn hint(a: HintArgs) -> Result<(), CliError> {
    if !(0.0..=1.0).contains(&a.p_hint) {
        return Err(CliError::Invalid(format!(
            "--p-hint {} outside [0, 1]",
            a.p_hint
        )));
    }
    let aligned = read_aligned(&a.aligned)?;
    let stories = read_stories(&a.stories)?;
    let dataset = build_dataset(
        &aligned,
        &stories,
        &FormatMap::parse(&a.formats)?,
        a.p_hint,
        a.seed,
    )?;
    write_dataset(&a.out, &dataset)?;
    Ok(())
}

fn train(a: TrainArgs) -> Result<(), CliError> {
    let mut cfg = match &a.config {
        Some(p) => {
            let raw = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            serde_json::from_str::<GanConfig>(&raw)
                .map_err(|e| CliError::Invalid(format!("{}: {e}", p.display())))?
        }
        None => GanConfig::default(),
    };
    if let Some(x) = a.epochs {
        cfg.epochs = x;
    }
    if let Some(x) = a.batch_size {
        cfg.batch_size = x;
    }
    if let Some(x) = a.lr {
        cfg.lr_g = x;
        cfg.lr_d = x;
    }
    if let Some(x) = a.seed {
        cfg.seed = x;
    }
    cfg.adversarial &= !a.no_adversarial;
    cfg.confounder &= !a.no_confounder;
    cfg.validate()?;

    let examples = read_dataset(&a.data)?;
    if examples.is_empty() {
        return Err(GanError::EmptyDataset.into());
    }
    let mut relations: Vec<String> = examples
        .iter()
        .map(|e| e.provenance.assertion.relation.clone())
        .collect();
    relations.sort();
    relations.dedup();
    let texts = examples
        .iter()
        .flat_map(|e| [e.source_text.as_str(), e.target_text.as_str()]);
    let vocab = Vocabulary::build(texts, a.min_freq, &relations);
    std::fs::create_dir_all(&a.out).map_err(|e| CliError::io(&a.out, e))?;
    vocab.save(&a.out.join("vocab.json"))?;

    let model = match a.model {
        ModelSize::Toy => ModelConfig::toy(vocab.len()),
        ModelSize::Micro => ModelConfig::micro(vocab.len()),
    };
    let mut trainer = GanTrainer::new(cfg.clone(), model)?;
    let log_path = a.out.join("metrics.jsonl");
    let mut log = BufWriter::new(File::create(&log_path).map_err(|e| CliError::io(&log_path, e))?);
    let mut io_error = None;
    for epoch in 0..cfg.epochs as u64 {
        let rendered = resample_hints(&examples, cfg.p_hint, cfg.seed, epoch)?;
        let records = build_records(&rendered, &vocab, model.max_len)?;
        let summary = trainer.run_epoch(&records, epoch, &mut |entry| {
            if let Err(e) = writeln!(
                log,
                "{}",
                serde_json::to_string(entry).expect("log serializes")
            ) {
                io_error.get_or_insert(e);
            }
        })?;
        if let Some(e) = io_error.take() {
            return Err(CliError::io(&log_path, e));
        }
        Checkpoint::from_models(trainer.steps(), &vocab.hash(), &trainer.g, &trainer.d)
            .save(&a.out.join(format!("epoch-{epoch}.ckp")))?;
        eprintln!(
            "epoch {epoch}: ce {:.4} d_loss {} adv {}",
            summary.mean_ce,
            summary
                .mean_d_loss
                .map_or("-".into(), |x| format!("{x:.4}")),
            summary.mean_adv.map_or("-".into(), |x| format!("{x:.4}"))
        );
    }
    log.flush().map_err(|e| CliError::io(&log_path, e))
}

fn load_models(m: &ModelArgs) -> Result<(Vocabulary, Generator, Discriminator), CliError> {
    let vocab = Vocabulary::load(&m.vocab)?;
    let ckp = Checkpoint::load(&m.checkpoint)?;
    if ckp.vocab_hash != vocab.hash() {
        return Err(CliError::Invalid(format!(
            "checkpoint was trained with vocabulary {} but {} has hash {}",
            ckp.vocab_hash,
            m.vocab.display(),
            vocab.hash()
        )));
    }
    if ckp.config.vocab_size != vocab.len() {
        return Err(CliError::Invalid(
            "checkpoint and vocabulary sizes differ".into(),
        ));
    }
    Ok((vocab, ckp.generator()?, ckp.discriminator()?))
}

fn decode_text(
    g: &Generator,
    vocab: &Vocabulary,
    source: &str,
    beam: usize,
    max_steps: usize,
) -> Result<String, CliError> {
    let mut src = vocab.tokenize(source);
    if src.len() > g.cfg.max_len {
        src.drain(..src.len() - g.cfg.max_len);
    }
    let (ids, _) = if beam <= 1 {
        g.greedy(&src, max_steps)?
    } else {
        g.beam(&src, beam, max_steps)?
    };
    Ok(vocab.detokenize(&ids))
}

#[derive(Serialize)]
struct Generated {
    source: String,
    prediction: String,
}

/// Source text without any hint, with `hint` appended verbatim when given.
pub fn source_with_hint(ex: &TrainingExample, hint: Option<&str>) -> Result<String, HintError> {
    render_source(&ex.input(), ex.format, hint)
}

fn generate(a: GenerateArgs) -> Result<(), CliError> {
    let (vocab, g, _) = load_models(&a.model)?;
    let sources: Vec<String> = match (&a.source, &a.data) {
        (Some(s), None) => vec![match &a.hint {
            Some(h) => format!("{s} hint: {h}"),
            None => s.clone(),
        }],
        (None, Some(p)) => read_dataset(p)?
            .iter()
            .map(|ex| source_with_hint(ex, a.hint.as_deref()))
            .collect::<Result<_, _>>()?,
        _ => {
            return Err(CliError::Invalid(
                "give exactly one of --source or --data".into(),
            ))
        }
    };
    let mut lines = Vec::with_capacity(sources.len());
    for source in sources {
        let prediction = decode_text(&g, &vocab, &source, a.beam, a.max_steps)?;
        lines.push(
            serde_json::to_string(&Generated { source, prediction }).expect("output serializes"),
        );
    }
    let text = lines.join("\n") + "\n";
    match &a.out {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::io(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct ScoreReport {
    score: f64,
    label: bool,
}

fn score(a: ScoreArgs) -> Result<(), CliError> {
    if !(a.threshold > 0.0 && a.threshold < 1.0) {
        return Err(CliError::Invalid("--threshold must lie in (0, 1)".into()));
    }
    let (vocab, _, d) = load_models(&a.model)?;
    let (score, label) =
        score_assertion(&d, &vocab, &a.story, &a.sentence, &a.assertion, a.threshold)?;
    emit_json(None, &ScoreReport { score, label })
}

fn read_labeled(path: &Path) -> Result<Vec<LabeledAssertion>, CliError> {
    let raw = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    raw.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|e| CliError::Invalid(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}

fn eval(a: EvalArgs) -> Result<(), CliError> {
    let (vocab, g, d) = load_models(&a.model)?;
    let examples = read_dataset(&a.data)?;
    let mut preds = Vec::with_capacity(examples.len());
    for ex in &examples {
        preds.push(decode_text(
            &g,
            &vocab,
            &ex.source_text,
            a.beam,
            a.max_steps,
        )?);
    }
    let refs: Vec<String> = examples
        .iter()
        .map(|e| strip_symbols(&e.target_text))
        .collect();
    let accuracy = match &a.labeled {
        Some(p) => Some(disc_accuracy(&d, &vocab, &read_labeled(p)?, a.threshold)?),
        None => None,
    };
    write_json(&a.out, &evaluate(&preds, &refs, accuracy)?)
}

#[derive(Serialize)]
struct GradcheckSummary {
    max_rel_error: f64,
    checked: usize,
    reports: Vec<crate::neural::GradcheckReport>,
}

/// Relative-error bar for the gradient suite.
pub const GRADCHECK_TOLERANCE: f64 = 1e-3;

fn gradcheck(a: GradcheckArgs) -> Result<(), CliError> {
    let cfg = GradcheckConfig {
        per_tensor: a.per_tensor,
        seed: a.seed,
        ..GradcheckConfig::default()
    };
    let reports = gradient_suite(a.seed, cfg)?;
    let summary = GradcheckSummary {
        max_rel_error: reports
            .iter()
            .map(|r| r.max_rel_error())
            .fold(0.0, f64::max),
        checked: reports.iter().map(|r| r.checked()).sum(),
        reports,
    };
    for r in &summary.reports {
        eprintln!(
            "{:<24} {:>6} coordinates  max rel error {:.3e}",
            r.label,
            r.checked(),
            r.max_rel_error()
        );
    }
    emit_json(a.out.as_deref(), &summary)?;
    if summary.max_rel_error < GRADCHECK_TOLERANCE {
        Ok(())
    } else {
        Err(CliError::Invalid(format!(
            "max relative error {:.3e} exceeds {GRADCHECK_TOLERANCE}",
            summary.max_rel_error
        )))
    }
}

fn bridge_sweep(a: BridgeSweepArgs) -> Result<(), CliError> {
    let (vocab, g, d) = load_models(&a.model)?;
    let examples = read_dataset(&a.data)?;
    let mut samples = Vec::new();
    for ex in &examples {
        let mut src = vocab.tokenize(&ex.source_text);
        if src.len() > g.cfg.max_len {
            src.drain(..src.len() - g.cfg.max_len);
        }
        samples.extend(logits_of(&g.greedy(&src, a.max_steps)?.1));
    }
    let e: &Tensor = d.params.get("emb");
    emit_json(a.out.as_deref(), &scale_sweep(e, &samples, &SWEEP_SCALES)?)
}
