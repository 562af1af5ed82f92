//! `homosem` command-line tool.
//!
//! ```bash
//! homosem validate --dataset en.json
//! homosem triples --dataset en.json --same-pos --experiment exp1 --out en.exp1.tsv
//! homosem eval --dataset en.json --provider static --vectors cc.en.300.vec \
//!     --parses en.conllu --strategy syn:3 --same-pos
//! homosem layers --dataset en.json --ceif en.bert.ceif --same-pos
//! homosem kappa audit/gl_a.tsv audit/gl_b.tsv audit/en_a.tsv audit/en_b.tsv
//! ```

use std::collections::HashSet;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use homosem::agreement::{pooled_kappa, sample_pairs, AnnotationSheet};
use homosem::conllu::load_parses;
use homosem::context_embed::{load_ceif, ContextualProvider};
use homosem::dataset::{
    dataset_stats, dataset_to_json, export_pairs, import_marked_tsv, load_dataset, pairs_to_tsv,
    validate_dataset, DatasetBundle, DatasetError, FormMatch, LanguageCode,
};
use homosem::eval::{layer_sweep, render_curve, render_report, run_eval, ReportFormat, Strategy};
use homosem::static_embed::{load_vectors, CaseFolding, OovPolicy, SentenceOptions, StaticProvider};
use homosem::triples::{diff_triples, generate_triples_with, load_triples, triples_to_tsv, Experiment, TripleSet};
use homosem::{cohen_kappa, VectorTableF32};

#[derive(Parser, Debug)]
#[command(name = "homosem", version, about = "Evaluate word representations on homonymy and synonymy in context")]
struct Cli {
    /// Worker threads (HOMOSEM_WORKERS takes precedence; default: all cores)
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check a dataset file and list findings
    Validate(DatasetArg),
    /// Per-language counts
    Stats {
        /// One or more dataset files
        #[arg(long = "dataset", required = true)]
        datasets: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate (or load) triples, optionally filtered
    Triples(TriplesArgs),
    /// Labeled sentence pairs
    ExportPairs {
        #[command(flatten)]
        dataset: DatasetArg,
        /// Only pairs whose target forms are identical
        #[arg(long)]
        wic: bool,
        /// Compare forms case-sensitively
        #[arg(long)]
        exact_case: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score triples with one strategy
    Eval(EvalArgs),
    /// Per-layer accuracy curve from contextual states
    Layers(LayersArgs),
    /// Cohen's kappa between annotation sheets given as A1 B1 [A2 B2 ...]
    Kappa {
        #[arg(required = true, num_args = 2..)]
        sheets: Vec<PathBuf>,
    },
    /// Blank annotation sheet over a seeded random sample of pairs
    Sample {
        #[command(flatten)]
        dataset: DatasetArg,
        #[arg(short, default_value_t = 50)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Import a bracket-marked TSV into the dataset format
    Convert {
        #[arg(long)]
        language: String,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct DatasetArg {
    #[arg(long)]
    dataset: PathBuf,
}

#[derive(Args, Debug)]
struct TripleSource {
    #[command(flatten)]
    dataset: DatasetArg,
    /// Read triples from this file instead of generating them
    #[arg(long)]
    triples: Option<PathBuf>,
    /// Compare surface forms case-sensitively when generating
    #[arg(long)]
    exact_case: bool,
    /// Keep only triples whose three targets share a POS tag
    #[arg(long)]
    same_pos: bool,
}

#[derive(Args, Debug)]
struct TriplesArgs {
    #[command(flatten)]
    source: TripleSource,
    #[arg(long)]
    experiment: Option<Experiment>,
    /// Report the set difference between generated triples and this file
    #[arg(long)]
    diff: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProviderKind {
    Static,
    Contextual,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Oov {
    Error,
    Zero,
    Lowercase,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Tsv,
    Json,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Tsv => ReportFormat::Tsv,
            Format::Json => ReportFormat::Json,
        }
    }
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    source: TripleSource,
    #[arg(long, value_enum)]
    provider: ProviderKind,
    /// wv | sent | syn:<k> | cat | add | layer:<n>
    #[arg(long)]
    strategy: String,
    /// Text vector file (static provider)
    #[arg(long)]
    vectors: Option<PathBuf>,
    /// Lowercase vocabulary entries when loading vectors
    #[arg(long)]
    lowercase_vectors: bool,
    #[arg(long, value_enum, default_value = "error")]
    oov: Oov,
    /// One stopword per line, excluded from `sent` averages (static provider)
    #[arg(long)]
    stopwords: Option<PathBuf>,
    /// CoNLL-U parses keyed by sent_id (needed for syn)
    #[arg(long)]
    parses: Option<PathBuf>,
    /// Hidden-state interchange file (contextual provider)
    #[arg(long)]
    ceif: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "tsv")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct LayersArgs {
    #[command(flatten)]
    source: TripleSource,
    #[arg(long)]
    ceif: PathBuf,
    #[arg(long, value_enum, default_value = "tsv")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Bad flag combination detected after argument parsing.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn worker_count(flag: Option<usize>) -> Result<Option<usize>> {
    match std::env::var("HOMOSEM_WORKERS") {
        Ok(v) => {
            let n: usize = v
                .trim()
                .parse()
                .map_err(|_| usage(format!("HOMOSEM_WORKERS={v:?} is not a number")))?;
            Ok(Some(n))
        }
        Err(_) => Ok(flag),
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = worker_count(cli.workers)? {
        if n == 0 {
            return Err(usage("worker count must be positive"));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().context("starting worker pool")?;
    pool.install(|| dispatch(cli.command))
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Validate(d) => validate(&d.dataset),
        Command::Stats { datasets, out } => stats(&datasets, out.as_deref()),
        Command::Triples(a) => triples(a),
        Command::ExportPairs {
            dataset,
            wic,
            exact_case,
            out,
        } => {
            let b = dataset_of(&dataset.dataset)?;
            let pairs = export_pairs(&b, wic, form_match(exact_case));
            let pos = pairs.iter().filter(|p| p.same_sense).count();
            write_out(out.as_deref(), &pairs_to_tsv(&b.language, &pairs))?;
            summary(
                out.as_deref(),
                format!("{}: {} pairs ({pos} same-sense, {} different)", b.language, pairs.len(), pairs.len() - pos),
            );
            Ok(())
        }
        Command::Eval(a) => eval(a),
        Command::Layers(a) => layers(a),
        Command::Kappa { sheets } => kappa(&sheets),
        Command::Sample { dataset, n, seed, out } => {
            let b = dataset_of(&dataset.dataset)?;
            let sheet = sample_pairs(&b, n, seed)?;
            write_out(out.as_deref(), &sheet.to_tsv())?;
            summary(out.as_deref(), format!("{}: sampled {n} pairs with seed {seed}", b.language));
            Ok(())
        }
        Command::Convert { language, input, out } => {
            let lang = LanguageCode::new(language).map_err(usage)?;
            let text = fs::read_to_string(&input).with_context(|| format!("reading {}", input.display()))?;
            let b = import_marked_tsv(lang, &text).with_context(|| format!("importing {}", input.display()))?;
            write_out(out.as_deref(), &dataset_to_json(&b))?;
            let s = dataset_stats(&b);
            summary(
                out.as_deref(),
                format!("{}: {} homonyms, {} senses, {} sentences", s.language, s.homonyms, s.senses, s.sentences),
            );
            Ok(())
        }
    }
}

fn dataset_of(path: &Path) -> Result<DatasetBundle> {
    load_dataset(path).with_context(|| format!("loading {}", path.display()))
}

fn form_match(exact: bool) -> FormMatch {
    if exact {
        FormMatch::Exact
    } else {
        FormMatch::CaseInsensitive
    }
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

/// One-line summary: stdout when the payload went to a file, else stderr.
fn summary(out: Option<&Path>, line: String) {
    match out {
        Some(_) => println!("{line}"),
        None => eprintln!("{line}"),
    }
}

fn validate(path: &Path) -> Result<()> {
    match load_dataset(path) {
        Ok(b) => {
            let report = validate_dataset(&b);
            for w in report.warnings() {
                println!("{w}");
            }
            println!(
                "{}: ok ({} homonyms, {} warning(s))",
                path.display(),
                b.homonyms.len(),
                report.warning_count()
            );
            Ok(())
        }
        Err(DatasetError::Validation { report }) => {
            for f in &report.findings {
                println!("{f}");
            }
            bail!(
                "{}: {} error(s), {} warning(s)",
                path.display(),
                report.error_count(),
                report.warning_count()
            )
        }
        Err(e) => Err(e).with_context(|| format!("loading {}", path.display())),
    }
}

fn stats(paths: &[PathBuf], out: Option<&Path>) -> Result<()> {
    let mut s = String::from("lang\thomonyms\tsenses\tsentences\tcross_pos_sense_pairs\ttriples\tpairs\twic_pairs\n");
    for p in paths {
        let b = dataset_of(p)?;
        let row = dataset_stats(&b);
        let triples = generate_triples_with(&b, FormMatch::default()).len();
        let pairs = export_pairs(&b, false, FormMatch::default()).len();
        let wic = export_pairs(&b, true, FormMatch::default()).len();
        s.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{triples}\t{pairs}\t{wic}\n",
            row.language, row.homonyms, row.senses, row.sentences, row.cross_pos_sense_pairs
        ));
    }
    write_out(out, &s)?;
    summary(out, format!("stats for {} dataset(s)", paths.len()));
    Ok(())
}

fn triple_set(src: &TripleSource, bundle: &DatasetBundle) -> Result<TripleSet> {
    let ts = match &src.triples {
        Some(p) => load_triples(p, bundle).with_context(|| format!("loading {}", p.display()))?,
        None => generate_triples_with(bundle, form_match(src.exact_case)),
    };
    Ok(ts)
}

fn triples(a: TriplesArgs) -> Result<()> {
    if a.diff.is_some() && a.source.triples.is_some() {
        return Err(usage("--diff compares generated triples with a file; drop --triples"));
    }
    let b = dataset_of(&a.source.dataset.dataset)?;
    let mut ts = triple_set(&a.source, &b)?;
    if let Some(path) = &a.diff {
        let other = load_triples(path, &b).with_context(|| format!("loading {}", path.display()))?;
        let d = diff_triples(&ts, &other);
        write_out(a.out.as_deref(), &d.report())?;
        summary(
            a.out.as_deref(),
            format!(
                "{}: {} only generated, {} only in file, {} retagged",
                b.language,
                d.only_left.len(),
                d.only_right.len(),
                d.retagged.len()
            ),
        );
        return Ok(());
    }
    if a.source.same_pos {
        ts = ts.same_pos_only();
    }
    if let Some(e) = a.experiment {
        ts = ts.only(e);
    }
    write_out(a.out.as_deref(), &triples_to_tsv(&ts))?;
    let counts: Vec<String> = ts.counts().iter().map(|(e, n)| format!("{e}={n}")).collect();
    summary(
        a.out.as_deref(),
        format!("{}: {} triples ({})", b.language, ts.len(), counts.join(" ")),
    );
    Ok(())
}

fn parse_strategy(s: &str, provider: ProviderKind) -> Result<Strategy> {
    let strategy: Strategy = s.parse().map_err(usage)?;
    let ok = match provider {
        ProviderKind::Static => strategy.is_static(),
        ProviderKind::Contextual => strategy.is_contextual(),
    };
    if !ok {
        return Err(usage(format!(
            "strategy {strategy} needs the {} provider",
            if strategy.is_static() { "static" } else { "contextual" }
        )));
    }
    Ok(strategy)
}

fn read_stopwords(path: &Path) -> Result<HashSet<String>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text
        .lines()
        .map(|l| l.trim().to_lowercase())
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect())
}

fn eval(a: EvalArgs) -> Result<()> {
    let strategy = parse_strategy(&a.strategy, a.provider)?;
    match a.provider {
        ProviderKind::Static => {
            if a.vectors.is_none() {
                return Err(usage("--provider static requires --vectors"));
            }
            if a.ceif.is_some() {
                return Err(usage("--ceif is only used by --provider contextual"));
            }
            if matches!(strategy, Strategy::Syn(_)) && a.parses.is_none() {
                return Err(usage("strategy syn requires --parses"));
            }
        }
        ProviderKind::Contextual => {
            if a.ceif.is_none() {
                return Err(usage("--provider contextual requires --ceif"));
            }
            if a.vectors.is_some() || a.parses.is_some() || a.stopwords.is_some() {
                return Err(usage("--vectors, --parses and --stopwords are only used by --provider static"));
            }
        }
    }
    let b = dataset_of(&a.source.dataset.dataset)?;
    let ts = triple_set(&a.source, &b)?;
    let report = match a.provider {
        ProviderKind::Static => {
            let vpath = a.vectors.as_ref().expect("checked above");
            let folding = if a.lowercase_vectors {
                CaseFolding::Lower
            } else {
                CaseFolding::None
            };
            let table: VectorTableF32 =
                load_vectors(vpath, folding).with_context(|| format!("loading {}", vpath.display()))?;
            let parses = match &a.parses {
                Some(p) => Some(load_parses(p).with_context(|| format!("loading {}", p.display()))?),
                None => None,
            };
            let mut sent = SentenceOptions::default();
            if let Some(p) = &a.stopwords {
                sent.stopwords = Some(read_stopwords(p)?);
            }
            let policy = match a.oov {
                Oov::Error => OovPolicy::Error,
                Oov::Zero => OovPolicy::Zero,
                Oov::Lowercase => OovPolicy::LowercaseRetry,
            };
            let mut provider = StaticProvider::new(&b, &table)
                .with_policy(policy)
                .with_sentence_options(sent);
            if let Some(p) = &parses {
                provider = provider.with_parses(p);
            }
            let r = run_eval(&ts, &provider, strategy, a.source.same_pos)?;
            if provider.oov_count() > 0 {
                log::warn!("{} token(s) missing from the vector table", provider.oov_count());
            }
            r
        }
        ProviderKind::Contextual => {
            let cpath = a.ceif.as_ref().expect("checked above");
            let records = load_ceif::<f32>(cpath).with_context(|| format!("loading {}", cpath.display()))?;
            let provider = ContextualProvider::new(&b, &records);
            run_eval(&ts, &provider, strategy, a.source.same_pos)?
        }
    };
    write_out(a.out.as_deref(), &render_report(&report, a.format.into()))?;
    let na = |v: Option<f64>| v.map_or("NA".to_string(), |x| format!("{x:.3}"));
    summary(
        a.out.as_deref(),
        format!(
            "{} {} {}: {} triples, macro {} micro {} full {}, {} failure(s)",
            report.language,
            report.provider,
            report.strategy,
            report.full.n,
            na(report.macro_avg),
            na(report.micro),
            na(report.full_accuracy),
            report.failures.len()
        ),
    );
    Ok(())
}

fn layers(a: LayersArgs) -> Result<()> {
    let b = dataset_of(&a.source.dataset.dataset)?;
    let ts = triple_set(&a.source, &b)?;
    let records = load_ceif::<f32>(&a.ceif).with_context(|| format!("loading {}", a.ceif.display()))?;
    let provider = ContextualProvider::new(&b, &records);
    let curve = layer_sweep(&ts, &provider, a.source.same_pos)?;
    write_out(a.out.as_deref(), &render_curve(&curve, a.format.into()))?;
    let best = curve
        .rows
        .iter()
        .filter_map(|r| r.macro_avg.map(|m| (r.layer, m)))
        .fold(None, |acc: Option<(usize, f64)>, x| match acc {
            Some(y) if y.1 >= x.1 => Some(y),
            _ => Some(x),
        });
    let best = best.map_or("NA".to_string(), |(l, m)| format!("layer {l} ({m:.3})"));
    summary(
        a.out.as_deref(),
        format!("{}: {} layers, best macro at {best}", curve.language, curve.rows.len()),
    );
    Ok(())
}

fn kappa(paths: &[PathBuf]) -> Result<()> {
    if !paths.len().is_multiple_of(2) {
        return Err(usage("kappa takes sheets in pairs: A1 B1 [A2 B2 ...]"));
    }
    let sheets: Vec<AnnotationSheet> = paths
        .iter()
        .map(|p| AnnotationSheet::load(p).with_context(|| format!("loading {}", p.display())))
        .collect::<Result<_>>()?;
    let pairs: Vec<(&AnnotationSheet, &AnnotationSheet)> = sheets.chunks(2).map(|c| (&c[0], &c[1])).collect();
    for (a, b) in &pairs {
        let k = cohen_kappa(a, b).with_context(|| format!("{} vs {}", a.annotator_id, b.annotator_id))?;
        println!("{}\t{}\t{}\t{:.4}", a.annotator_id, b.annotator_id, k.n, k.kappa);
    }
    if pairs.len() > 1 {
        let k = pooled_kappa(&pairs)?;
        println!("pooled\t\t{}\t{:.4}", k.n, k.kappa);
    }
    Ok(())
}
