//! The `sqlalign` command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::corpus::{
    load_corpus, sample_corpus, templatize_corpus, write_corpus, Container, Corpus, CorpusError,
    CorpusKind, FormatSpec, SampleMode, SampleSpec, Templatized,
};
use crate::metrics::{alignment_ratio, batch_align, ovlp_ratio, ScaleMode, DEFAULT_ALPHA};
use crate::ngram::DEFAULT_L_MAX;
use crate::patterns::{count_patterns, deltas_to_csv, diff_pattern_counts, PatternSet};
use crate::report::{fmt_float, to_canonical_json, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "sqlalign",
    version,
    about = "Structural alignment between text-to-SQL corpora",
    long_about = "Derives SQL query templates, builds filtered n-gram distributions and scores \
                  how closely a training corpus matches a target workload.\n\n\
                  Exit codes: 0 success, 1 usage error, 2 data error."
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CMode {
    MaxInBatch,
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InputFormat {
    Json,
    Jsonl,
    Csv,
    Lines,
}

impl From<InputFormat> for Container {
    fn from(f: InputFormat) -> Self {
        match f {
            InputFormat::Json => Container::Json,
            InputFormat::Jsonl => Container::JsonLines,
            InputFormat::Csv => Container::Csv,
            InputFormat::Lines => Container::Lines,
        }
    }
}

#[derive(Debug, Args)]
pub struct GlobalOpts {
    /// Longest n-gram order.
    #[arg(long, global = true, default_value_t = DEFAULT_L_MAX)]
    pub l_max: usize,
    /// Additive smoothing constant for KL divergence.
    #[arg(long, global = true, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    /// Fixed scaling constant for exp(-D/c). Implies --c-mode fixed.
    #[arg(long, global = true)]
    pub c: Option<f64>,
    /// How c is chosen when --c is absent.
    #[arg(long, global = true, value_enum, default_value_t = CMode::MaxInBatch)]
    pub c_mode: CMode,
    /// Random seed for sampling.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Report format.
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Json)]
    pub format: OutputFormat,
    /// Input container [default: from file extension, else jsonl].
    #[arg(long, global = true, value_enum)]
    pub input_format: Option<InputFormat>,
    /// Field holding the SQL text.
    #[arg(long, global = true, default_value = "sql")]
    pub sql_field: String,
    /// Field holding the natural-language question.
    #[arg(long, global = true, default_value = "question")]
    pub question_field: String,
    /// Field holding the database or domain id [default: none].
    #[arg(long, global = true)]
    pub group_field: Option<String>,
    /// Skip malformed rows instead of failing.
    #[arg(long, global = true)]
    pub skip_bad_rows: bool,
    /// Output file [default: stdout].
    #[arg(short, long, global = true)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Derive one template per query.
    Templates {
        corpus: PathBuf,
        /// Also write the parse report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Also write the n-gram distribution (.tsv/.txt as text, else JSON).
        #[arg(long)]
        distribution: Option<PathBuf>,
    },
    /// Score source corpora against a target.
    Align {
        #[arg(long)]
        target: PathBuf,
        #[arg(required = true)]
        sources: Vec<PathBuf>,
    },
    /// Alignment ratio of a training corpus vs. baseline predictions. Needs --c.
    Ar {
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
    },
    /// Seeded sample of a corpus, written in its input format.
    Sample {
        corpus: PathBuf,
        /// Keep ceil(f * n) records.
        #[arg(
            long,
            conflicts_with = "per_group",
            required_unless_present = "per_group"
        )]
        fraction: Option<f64>,
        /// Keep up to k records per group (see --group-field).
        #[arg(long)]
        per_group: Option<usize>,
    },
    /// Diff traceable pattern counts between two corpora.
    Patterns {
        #[arg(long)]
        before: PathBuf,
        #[arg(long)]
        after: PathBuf,
    },
}

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Data(_) => EXIT_DATA,
        }
    }
}

fn data<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Data(e.to_string())
}

type CmdResult = Result<i32, Failure>;

/// Parses `args` and runs the command; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(f) => {
            let (Failure::Usage(msg) | Failure::Data(msg)) = &f;
            eprintln!("error: {msg}");
            f.code()
        }
    }
}

struct Context<'a> {
    opts: &'a GlobalOpts,
    input: FormatSpec,
    scale: ScaleMode,
}

impl Context<'_> {
    fn config(&self) -> RunConfig {
        RunConfig::new(
            self.opts.l_max,
            self.opts.alpha,
            self.scale,
            self.opts.seed,
            &self.input,
        )
    }

    fn load(&self, path: &Path, kind: CorpusKind) -> Result<Corpus, Failure> {
        let corpus = load_corpus(path, &self.input, kind).map_err(|e| match e {
            CorpusError::Io { .. } => data(e),
            other => Failure::Data(format!("{}: {other}", path.display())),
        })?;
        if !corpus.skipped().is_empty() {
            eprintln!(
                "{}: skipped {} malformed row(s)",
                path.display(),
                corpus.skipped().len()
            );
        }
        Ok(corpus)
    }

    fn templatize(&self, corpus: &Corpus) -> Result<Templatized, Failure> {
        templatize_corpus(corpus, self.opts.l_max).map_err(data)
    }

    fn emit(&self, text: &str) -> Result<(), Failure> {
        match &self.opts.output {
            Some(path) => write_file(path, text),
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(text.as_bytes())
                    .and_then(|_| out.flush())
                    .map_err(data)
            }
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn execute(cli: &Cli) -> CmdResult {
    let opts = &cli.global;
    if opts.l_max == 0 {
        return Err(Failure::Usage("--l-max must be at least 1".into()));
    }
    if !(opts.alpha > 0.0 && opts.alpha.is_finite()) {
        return Err(Failure::Usage("--alpha must be positive".into()));
    }
    let scale = match (opts.c, opts.c_mode) {
        (Some(c), _) if !(c > 0.0 && c.is_finite()) => {
            return Err(Failure::Usage("--c must be positive".into()))
        }
        (Some(c), _) => ScaleMode::Fixed(c),
        (None, CMode::Fixed) => return Err(Failure::Usage("--c-mode fixed needs --c".into())),
        (None, CMode::MaxInBatch) => ScaleMode::MaxInBatch,
    };
    let ctx = Context {
        opts,
        input: FormatSpec {
            container: opts.input_format.map(Container::from),
            sql_field: opts.sql_field.clone(),
            question_field: opts.question_field.clone(),
            group_field: opts.group_field.clone(),
            skip_bad_rows: opts.skip_bad_rows,
        },
        scale,
    };
    match &cli.command {
        Command::Templates {
            corpus,
            report,
            distribution,
        } => cmd_templates(&ctx, corpus, report.as_deref(), distribution.as_deref()),
        Command::Align { target, sources } => cmd_align(&ctx, target, sources),
        Command::Ar {
            target,
            train,
            predictions,
        } => cmd_ar(&ctx, target, train, predictions),
        Command::Sample {
            corpus,
            fraction,
            per_group,
        } => cmd_sample(&ctx, corpus, *fraction, *per_group),
        Command::Patterns { before, after } => cmd_patterns(&ctx, before, after),
    }
}

fn cmd_templates(
    ctx: &Context,
    path: &Path,
    report: Option<&Path>,
    distribution: Option<&Path>,
) -> CmdResult {
    let corpus = ctx.load(path, CorpusKind::Train)?;
    let t = ctx.templatize(&corpus)?;
    let pct = 100.0 * t.report.failed as f64 / corpus.len() as f64;
    eprintln!(
        "{}: {} queries, {} parsed, {} failed ({pct:.1}%)",
        corpus.name,
        corpus.len(),
        t.report.parsed,
        t.report.failed
    );
    let text: String = t
        .templates
        .iter()
        .map(|t| t.canonical_text() + "\n")
        .collect();
    ctx.emit(&text)?;
    if let Some(p) = report {
        let doc = json!({
            "command": "templates",
            "config": ctx.config(),
            "corpus": corpus.name,
            "queries": corpus.len(),
            "skipped_rows": corpus.skipped(),
            "parsed": t.report.parsed,
            "failed": t.report.failed,
            "failures": t.report.failures,
            "distinct_templates": t.template_set().len(),
            "ngram_total": t.distribution.total(),
        });
        write_file(p, &to_canonical_json(&doc))?;
    }
    if let Some(p) = distribution {
        let text = match p.extension().and_then(|e| e.to_str()) {
            Some("tsv" | "txt") => t.distribution.to_text(),
            _ => t.distribution.to_json(),
        };
        write_file(p, &text)?;
    }
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct AlignRow {
    target: String,
    source: String,
    d_kl: Option<f64>,
    a_kl: Option<f64>,
    c: Option<f64>,
    ovlp: Option<f64>,
    n_target_queries: usize,
    n_source_queries: usize,
    target_parse_failures: usize,
    source_parse_failures: usize,
    error: Option<String>,
}

fn opt_float(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

fn csv_text<I, R>(header: &[&str], rows: I) -> Result<String, Failure>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(data)?;
    for r in rows {
        w.write_record(r).map_err(data)?;
    }
    String::from_utf8(w.into_inner().map_err(data)?).map_err(data)
}

fn cmd_align(ctx: &Context, target_path: &Path, sources: &[PathBuf]) -> CmdResult {
    let target = ctx.load(target_path, CorpusKind::Target)?;
    let tt = ctx.templatize(&target)?;
    let target_set = tt.template_set();

    let mut rows = Vec::with_capacity(sources.len());
    let mut ok = Vec::new();
    for path in sources {
        let name = path.display().to_string();
        let loaded = load_corpus(path, &ctx.input, CorpusKind::Train)
            .and_then(|c| templatize_corpus(&c, ctx.opts.l_max).map(|t| (c, t)));
        let mut row = AlignRow {
            target: target.name.clone(),
            source: name,
            d_kl: None,
            a_kl: None,
            c: None,
            ovlp: None,
            n_target_queries: target.len(),
            n_source_queries: 0,
            target_parse_failures: tt.report.failed,
            source_parse_failures: 0,
            error: None,
        };
        match loaded {
            Ok((c, t)) => {
                row.n_source_queries = c.len();
                row.source_parse_failures = t.report.failed;
                row.ovlp = Some(ovlp_ratio(&target_set, &t.template_set()).map_err(data)?);
                ok.push((rows.len(), t));
            }
            Err(e) => {
                let e = match e {
                    CorpusError::Empty(name) => CorpusError::EmptyDistribution(name),
                    other => other,
                };
                eprintln!("error: {}: {e}", row.source);
                row.error = Some(e.to_string());
            }
        }
        rows.push(row);
    }

    let mut batch_c = None;
    let mut warnings = Vec::new();
    if !ok.is_empty() {
        let dists: Vec<_> = ok.iter().map(|(_, t)| &t.distribution).collect();
        let batch =
            batch_align(&tt.distribution, &dists, ctx.opts.alpha, ctx.scale).map_err(data)?;
        for ((i, _), score) in ok.iter().zip(&batch.scores) {
            rows[*i].d_kl = Some(score.d_kl);
            rows[*i].a_kl = Some(score.a_kl);
            rows[*i].c = Some(score.c);
        }
        batch_c = Some(batch.c);
        warnings = batch.warnings;
    }

    let text = match ctx.opts.format {
        OutputFormat::Json => to_canonical_json(&json!({
            "command": "align",
            "config": ctx.config(),
            "c": batch_c,
            "rows": rows,
            "warnings": warnings,
        })),
        OutputFormat::Csv => {
            let cfg = ctx.config();
            csv_text(
                &[
                    "target",
                    "source",
                    "d_kl",
                    "a_kl",
                    "c",
                    "ovlp",
                    "n_target_queries",
                    "n_source_queries",
                    "target_parse_failures",
                    "source_parse_failures",
                    "l_max",
                    "alpha",
                    "c_mode",
                    "error",
                ],
                rows.iter().map(|r| {
                    vec![
                        r.target.clone(),
                        r.source.clone(),
                        opt_float(r.d_kl),
                        opt_float(r.a_kl),
                        opt_float(r.c),
                        opt_float(r.ovlp),
                        r.n_target_queries.to_string(),
                        r.n_source_queries.to_string(),
                        r.target_parse_failures.to_string(),
                        r.source_parse_failures.to_string(),
                        cfg.l_max.to_string(),
                        fmt_float(cfg.alpha),
                        cfg.c_mode.to_string(),
                        r.error.clone().unwrap_or_default(),
                    ]
                }),
            )?
        }
    };
    ctx.emit(&text)?;
    Ok(if rows.iter().any(|r| r.error.is_some()) {
        EXIT_DATA
    } else {
        EXIT_OK
    })
}

fn cmd_ar(ctx: &Context, target: &Path, train: &Path, predictions: &Path) -> CmdResult {
    let ScaleMode::Fixed(c) = ctx.scale else {
        return Err(Failure::Usage(
            "ar needs a fixed scaling constant shared by both scores: pass --c".into(),
        ));
    };
    let target = ctx.load(target, CorpusKind::Target)?;
    let train = ctx.load(train, CorpusKind::Train)?;
    let pred = ctx.load(predictions, CorpusKind::Prediction)?;
    let (tt, tr, tp) = (
        ctx.templatize(&target)?,
        ctx.templatize(&train)?,
        ctx.templatize(&pred)?,
    );
    let ratio = alignment_ratio(
        &tt.distribution,
        &tr.distribution,
        &tp.distribution,
        ctx.opts.alpha,
        c,
    )
    .map_err(data)?;
    let note = "heuristic: AR > 1 predicts that fine-tuning on the training corpus helps on the \
                target; it is not a guarantee";
    let text = match ctx.opts.format {
        OutputFormat::Json => to_canonical_json(&json!({
            "command": "ar",
            "config": ctx.config(),
            "target": corpus_summary(&target, &tt),
            "train": corpus_summary(&train, &tr),
            "predictions": corpus_summary(&pred, &tp),
            "train_score": ratio.numerator,
            "predictions_score": ratio.denominator,
            "ar": ratio.ar,
            "sft_recommended": ratio.sft_recommended(),
            "note": note,
        })),
        OutputFormat::Csv => csv_text(
            &[
                "target",
                "train",
                "predictions",
                "d_kl_train",
                "a_kl_train",
                "d_kl_predictions",
                "a_kl_predictions",
                "c",
                "alpha",
                "l_max",
                "ar",
                "sft_recommended",
            ],
            [vec![
                target.name.clone(),
                train.name.clone(),
                pred.name.clone(),
                fmt_float(ratio.numerator.d_kl),
                fmt_float(ratio.numerator.a_kl),
                fmt_float(ratio.denominator.d_kl),
                fmt_float(ratio.denominator.a_kl),
                fmt_float(c),
                fmt_float(ctx.opts.alpha),
                ctx.opts.l_max.to_string(),
                fmt_float(ratio.ar),
                ratio.sft_recommended().to_string(),
            ]],
        )?,
    };
    ctx.emit(&text)?;
    Ok(EXIT_OK)
}

fn corpus_summary(c: &Corpus, t: &Templatized) -> serde_json::Value {
    json!({
        "name": c.name,
        "queries": c.len(),
        "parse_failures": t.report.failed,
        "skipped_rows": c.skipped().len(),
    })
}

fn cmd_sample(
    ctx: &Context,
    path: &Path,
    fraction: Option<f64>,
    per_group: Option<usize>,
) -> CmdResult {
    let mode = match (fraction, per_group) {
        (Some(f), None) => SampleMode::Fraction(f),
        (None, Some(k)) => SampleMode::PerGroup(k),
        _ => {
            return Err(Failure::Usage(
                "give exactly one of --fraction, --per-group".into(),
            ))
        }
    };
    let spec = SampleSpec {
        mode,
        seed: ctx.opts.seed,
    };
    spec.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    if matches!(mode, SampleMode::PerGroup(_)) && ctx.input.group_field.is_none() {
        return Err(Failure::Usage("--per-group needs --group-field".into()));
    }
    let corpus = ctx.load(path, CorpusKind::Target)?;
    let sampled = sample_corpus(&corpus, &spec).map_err(data)?;
    eprintln!(
        "{}: kept {} of {} records (seed {})",
        corpus.name,
        sampled.len(),
        corpus.len(),
        spec.seed
    );
    let container = ctx
        .input
        .container
        .or_else(|| Container::from_extension(path))
        .unwrap_or(Container::JsonLines);
    ctx.emit(&write_corpus(&sampled, container, &ctx.input).map_err(data)?)?;
    Ok(EXIT_OK)
}

fn cmd_patterns(ctx: &Context, before: &Path, after: &Path) -> CmdResult {
    let set = PatternSet::default();
    let before = count_patterns(&ctx.load(before, CorpusKind::Prediction)?, &set);
    let after = count_patterns(&ctx.load(after, CorpusKind::Prediction)?, &set);
    for pc in [&before, &after] {
        if !pc.parse_failures.is_empty() {
            eprintln!(
                "{}: {} of {} queries failed to parse and match no pattern",
                pc.corpus_name,
                pc.parse_failures.len(),
                pc.queries
            );
        }
    }
    let rows = diff_pattern_counts(&before, &after).map_err(data)?;
    let text = match ctx.opts.format {
        OutputFormat::Csv => deltas_to_csv(&rows),
        OutputFormat::Json => to_canonical_json(&json!({
            "command": "patterns",
            "config": ctx.config(),
            "before": {
                "name": before.corpus_name,
                "queries": before.queries,
                "parse_failures": before.parse_failures.len(),
            },
            "after": {
                "name": after.corpus_name,
                "queries": after.queries,
                "parse_failures": after.parse_failures.len(),
            },
            "rows": rows,
        })),
    };
    ctx.emit(&text)?;
    Ok(EXIT_OK)
}
