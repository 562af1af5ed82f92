//! Cosine scoring of triples, aggregation, layer sweeps and report output.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::SentenceRef;
use crate::scalar::Scalar;
use crate::static_embed::SynConfig;
use crate::triples::{EvalTriple, Experiment, TripleSet};

/// How a sentence is turned into a vector.
///
/// Grammar: `wv | sent | syn:<k> | cat | add | layer:<n>`. `wv` and `syn`
/// are static-only, `cat`, `add` and `layer` contextual-only, `sent` is
/// served by both provider kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Wv,
    Sent,
    Syn(SynConfig),
    Cat,
    Add,
    Layer(usize),
}

pub const STRATEGY_GRAMMAR: &str = "wv | sent | syn:<k> | cat | add | layer:<n>";

impl Strategy {
    pub fn is_static(&self) -> bool {
        matches!(self, Strategy::Wv | Strategy::Sent | Strategy::Syn(_))
    }

    pub fn is_contextual(&self) -> bool {
        matches!(self, Strategy::Sent | Strategy::Cat | Strategy::Add | Strategy::Layer(_))
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Wv => f.write_str("wv"),
            Strategy::Sent => f.write_str("sent"),
            Strategy::Syn(cfg) => write!(f, "syn:{}", cfg.k()),
            Strategy::Cat => f.write_str("cat"),
            Strategy::Add => f.write_str("add"),
            Strategy::Layer(n) => write!(f, "layer:{n}"),
        }
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("unknown strategy {s:?}; expected {STRATEGY_GRAMMAR}");
        let s = s.trim();
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let num = |a: Option<&str>| a.and_then(|a| a.parse::<usize>().ok()).ok_or_else(bad);
        match (name, arg) {
            ("wv", None) => Ok(Strategy::Wv),
            ("sent", None) => Ok(Strategy::Sent),
            ("cat", None) => Ok(Strategy::Cat),
            ("add", None) => Ok(Strategy::Add),
            ("syn", a) => SynConfig::new(num(a)?)
                .map(Strategy::Syn)
                .map_err(|e| format!("{e}; expected {STRATEGY_GRAMMAR}")),
            ("layer", a) => Ok(Strategy::Layer(num(a)?)),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProviderError {
    #[error("unresolved reference {0}")]
    Unresolved(String),
    #[error("strategy {0} not supported by this provider")]
    Unsupported(String),
    #[error("{0}")]
    Vector(String),
    #[error("{0}")]
    Layers(String),
}

/// Source of sentence vectors for the scorer.
pub trait VectorProvider: Sync {
    type Scalar: Scalar;

    fn describe(&self) -> String;

    fn supports(&self, strategy: &Strategy) -> bool;

    /// Whether `vector` can be attempted for this reference at all.
    fn resolves(&self, r: &SentenceRef, strategy: &Strategy) -> bool;

    fn vector(&self, r: &SentenceRef, strategy: &Strategy) -> Result<Vec<Self::Scalar>, ProviderError>;
}

/// Provider whose vectors come from a layered model.
pub trait LayeredProvider: VectorProvider {
    /// Number of transformer layers, identical across all records.
    fn num_layers(&self) -> Result<usize, ProviderError>;
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScoreError {
    #[error("vector widths differ ({0} vs {1})")]
    WidthMismatch(usize, usize),
    #[error("zero-norm vector")]
    ZeroNorm,
    #[error("empty vector")]
    Empty,
}

/// `dot(u, v) / (|u| |v|)`, accumulated in `f64`.
pub fn cosine<T: Scalar>(u: &[T], v: &[T]) -> Result<f64, ScoreError> {
    if u.len() != v.len() {
        return Err(ScoreError::WidthMismatch(u.len(), v.len()));
    }
    if u.is_empty() {
        return Err(ScoreError::Empty);
    }
    let (mut dot, mut nu, mut nv) = (0.0f64, 0.0f64, 0.0f64);
    for (a, b) in u.iter().zip(v) {
        let (a, b) = (a.to_f64_lossless(), b.to_f64_lossless());
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Err(ScoreError::ZeroNorm);
    }
    Ok(dot / (nu.sqrt() * nv.sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityVerdict {
    pub sim1: f64,
    pub sim2: f64,
    pub sim3: f64,
    pub correct: bool,
}

/// Correct iff `cos(a,b) > cos(a,c)` and `cos(a,b) > cos(b,c)`; ties lose.
pub fn score_triple<T: Scalar>(va: &[T], vb: &[T], vc: &[T]) -> Result<SimilarityVerdict, ScoreError> {
    if va.len() != vb.len() {
        return Err(ScoreError::WidthMismatch(va.len(), vb.len()));
    }
    if va.len() != vc.len() {
        return Err(ScoreError::WidthMismatch(va.len(), vc.len()));
    }
    let sim1 = cosine(va, vb)?;
    let sim2 = cosine(va, vc)?;
    let sim3 = cosine(vb, vc)?;
    Ok(SimilarityVerdict {
        sim1,
        sim2,
        sim3,
        correct: sim1 > sim2 && sim1 > sim3,
    })
}

/// Counts for one group of triples.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub n: usize,
    pub correct: usize,
    /// Triples that could not be scored; included in `n`, never in `correct`.
    pub failures: usize,
}

impl Cell {
    pub fn accuracy(&self) -> Option<f64> {
        (self.n > 0).then(|| self.correct as f64 / self.n as f64)
    }

    fn add(&mut self, correct: bool, failed: bool) {
        self.n += 1;
        self.correct += usize::from(correct);
        self.failures += usize::from(failed);
    }

    pub fn merge(self, o: Cell) -> Cell {
        Cell {
            n: self.n + o.n,
            correct: self.correct + o.correct,
            failures: self.failures + o.failures,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoringFailure {
    pub triple: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub language: String,
    pub provider: String,
    pub strategy: String,
    pub same_pos_only: bool,
    /// Always holds the four scored experiments, possibly with `n = 0`.
    pub per_experiment: BTreeMap<Experiment, Cell>,
    pub full: Cell,
    pub macro_avg: Option<f64>,
    pub micro: Option<f64>,
    pub full_accuracy: Option<f64>,
    pub failures: Vec<ScoringFailure>,
}

impl EvalReport {
    pub fn accuracy(&self, exp: Experiment) -> Option<f64> {
        self.per_experiment.get(&exp).and_then(Cell::accuracy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregates {
    /// `None` when any experiment cell is empty.
    pub macro_avg: Option<f64>,
    pub micro: Option<f64>,
    pub full: Option<f64>,
}

/// Macro (unweighted mean of accuracies) and micro (pooled) over `cells`.
pub fn aggregate_cells(cells: &[Cell]) -> (Option<f64>, Option<f64>) {
    let accs: Option<Vec<f64>> = cells.iter().map(Cell::accuracy).collect();
    let macro_avg = accs
        .filter(|a| !a.is_empty())
        .map(|a| a.iter().sum::<f64>() / a.len() as f64);
    let pooled = cells.iter().fold(Cell::default(), |acc, c| acc.merge(*c));
    (macro_avg, pooled.accuracy())
}

pub fn aggregate(report: &EvalReport) -> Aggregates {
    let cells: Vec<Cell> = Experiment::SCORED
        .iter()
        .map(|e| report.per_experiment.get(e).copied().unwrap_or_default())
        .collect();
    let (macro_avg, micro) = aggregate_cells(&cells);
    Aggregates {
        macro_avg,
        micro,
        full: report.full.accuracy(),
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("strategy {strategy} is not available from provider {provider}")]
    Incompatible { strategy: String, provider: String },
    #[error("{} unresolved reference(s): {}", .0.len(), .0.join(", "))]
    Unresolved(Vec<String>),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn triple_label(t: &EvalTriple) -> String {
    format!("{} [{}, {}, {}]", t.lemma, t.a, t.b, t.c)
}

/// Scores every triple (or only `same_pos` ones) and aggregates.
///
/// All references are checked before any vector is computed. Per-sentence
/// vector failures and degenerate vectors mark their triples incorrect and
/// are listed in `failures`.
pub fn run_eval<P: VectorProvider>(
    ts: &TripleSet,
    provider: &P,
    strategy: Strategy,
    same_pos_only: bool,
) -> Result<EvalReport, EvalError> {
    if !provider.supports(&strategy) {
        return Err(EvalError::Incompatible {
            strategy: strategy.to_string(),
            provider: provider.describe(),
        });
    }
    let triples: Vec<&EvalTriple> = ts
        .triples
        .iter()
        .filter(|t| !same_pos_only || t.same_pos)
        .collect();

    let refs: BTreeSet<&SentenceRef> = triples.iter().flat_map(|t| t.refs()).collect();
    let missing: Vec<String> = refs
        .iter()
        .filter(|r| !provider.resolves(r, &strategy))
        .map(|r| r.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(EvalError::Unresolved(missing));
    }

    let refs: Vec<&SentenceRef> = refs.into_iter().collect();
    let vectors: HashMap<&SentenceRef, Result<Vec<P::Scalar>, ProviderError>> = refs
        .par_iter()
        .map(|r| (*r, provider.vector(r, &strategy)))
        .collect();

    let verdicts: Vec<Result<SimilarityVerdict, String>> = triples
        .par_iter()
        .map(|t| {
            let get = |r: &SentenceRef| match &vectors[r] {
                Ok(v) => Ok(v.as_slice()),
                Err(e) => Err(e.to_string()),
            };
            let (va, vb, vc) = (get(&t.a)?, get(&t.b)?, get(&t.c)?);
            score_triple(va, vb, vc).map_err(|e| e.to_string())
        })
        .collect();

    let mut per_experiment: BTreeMap<Experiment, Cell> =
        Experiment::SCORED.iter().map(|e| (*e, Cell::default())).collect();
    let mut full = Cell::default();
    let mut failures = Vec::new();
    for (t, v) in triples.iter().zip(&verdicts) {
        let (correct, failed) = match v {
            Ok(v) => (v.correct, false),
            Err(reason) => {
                failures.push(ScoringFailure {
                    triple: triple_label(t),
                    reason: reason.clone(),
                });
                (false, true)
            }
        };
        full.add(correct, failed);
        if let Some(cell) = per_experiment.get_mut(&t.experiment) {
            cell.add(correct, failed);
        }
    }
    let mut report = EvalReport {
        language: ts.language.to_string(),
        provider: provider.describe(),
        strategy: strategy.to_string(),
        same_pos_only,
        per_experiment,
        full,
        macro_avg: None,
        micro: None,
        full_accuracy: None,
        failures,
    };
    let agg = aggregate(&report);
    report.macro_avg = agg.macro_avg;
    report.micro = agg.micro;
    report.full_accuracy = agg.full;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRow {
    pub layer: usize,
    pub exp1: Option<f64>,
    pub exp2: Option<f64>,
    pub exp3: Option<f64>,
    pub exp4: Option<f64>,
    pub macro_avg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerCurve {
    pub language: String,
    pub provider: String,
    pub rows: Vec<LayerRow>,
}

/// Runs `layer:<l>` for every transformer layer `l = 1..=L`.
pub fn layer_sweep<P: LayeredProvider>(
    ts: &TripleSet,
    provider: &P,
    same_pos_only: bool,
) -> Result<LayerCurve, EvalError> {
    let layers = provider.num_layers()?;
    let mut rows = Vec::with_capacity(layers);
    for layer in 1..=layers {
        let r = run_eval(ts, provider, Strategy::Layer(layer), same_pos_only)?;
        rows.push(LayerRow {
            layer,
            exp1: r.accuracy(Experiment::Exp1),
            exp2: r.accuracy(Experiment::Exp2),
            exp3: r.accuracy(Experiment::Exp3),
            exp4: r.accuracy(Experiment::Exp4),
            macro_avg: r.macro_avg,
        });
    }
    Ok(LayerCurve {
        language: ts.language.to_string(),
        provider: provider.describe(),
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Tsv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tsv" => Ok(ReportFormat::Tsv),
            "json" | "structured" => Ok(ReportFormat::Json),
            _ => Err(format!("unknown format {s:?}; expected tsv or json")),
        }
    }
}

fn cell3(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.3}"))
}

pub fn report_to_tsv(r: &EvalReport) -> String {
    let exps: Vec<String> = Experiment::SCORED.iter().map(|e| cell3(r.accuracy(*e))).collect();
    format!(
        "exp1\texp2\texp3\texp4\tmacro\tmicro\tfull\n{}\t{}\t{}\t{}\n",
        exps.join("\t"),
        cell3(r.macro_avg),
        cell3(r.micro),
        cell3(r.full_accuracy)
    )
}

pub fn curve_to_tsv(c: &LayerCurve) -> String {
    let mut s = String::from("layer\texp1\texp2\texp3\texp4\tmacro\n");
    for row in &c.rows {
        s.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            row.layer,
            cell3(row.exp1),
            cell3(row.exp2),
            cell3(row.exp3),
            cell3(row.exp4),
            cell3(row.macro_avg)
        ));
    }
    s
}

pub fn render_report(r: &EvalReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Tsv => report_to_tsv(r),
        ReportFormat::Json => serde_json::to_string_pretty(r).expect("report serializes") + "\n",
    }
}

pub fn render_curve(c: &LayerCurve, format: ReportFormat) -> String {
    match format {
        ReportFormat::Tsv => curve_to_tsv(c),
        ReportFormat::Json => serde_json::to_string_pretty(c).expect("curve serializes") + "\n",
    }
}

pub fn emit(text: &str, path: &Path) -> Result<(), EvalError> {
    fs::write(path, text).map_err(|source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    })
}
