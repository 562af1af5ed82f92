//! Evaluation harness for word meaning representations in context.
//!
//! The pipeline loads a homonymy/synonymy dataset, enumerates sentence
//! triples (two same-sense targets and one outlier), obtains vectors from a
//! static or contextualized provider and checks whether the same-sense pair
//! is strictly the closest under cosine similarity.
//!
//! Vector-carrying types are generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the precision used by the command-line tool.

pub mod agreement;
pub mod conllu;
pub mod context_embed;
pub mod dataset;
pub mod eval;
pub mod scalar;
pub mod static_embed;
pub mod triples;

pub use scalar::Scalar;

pub use agreement::{cohen_kappa, pooled_kappa, sample_pairs, AnnotationSheet, Kappa, Label};
pub use context_embed::{CeifRecord, CeifToken, ContextStrategy, ContextualProvider};
pub use dataset::{
    dataset_stats, export_pairs, load_dataset, validate_dataset, write_dataset, DatasetBundle,
    FormMatch, HomonymEntry, LabeledPair, LanguageCode, Role, SenseEntry, SentenceKey,
    SentenceRecord, SentenceRef, StatsRow, TargetSpan,
};
pub use eval::{
    aggregate, aggregate_cells, cosine, layer_sweep, run_eval, score_triple, EvalReport,
    LayerCurve, LayeredProvider, SimilarityVerdict, Strategy, VectorProvider,
};
pub use static_embed::{OovPolicy, StaticProvider, SynConfig, VectorTable};
pub use triples::{
    classify_triple, filter_same_pos, generate_triples, load_triples, write_triples, EvalTriple,
    Experiment, TripleSet,
};

/// Static vector table at the precision of released text vector files.
pub type VectorTableF32 = VectorTable<f32>;
/// Static vector table in double precision.
pub type VectorTableF64 = VectorTable<f64>;
/// Contextual record at the precision transformer exports use.
pub type CeifRecordF32 = CeifRecord<f32>;
/// Contextual record in double precision.
pub type CeifRecordF64 = CeifRecord<f64>;
/// Static provider over single-precision vectors.
pub type StaticProviderF32<'a> = StaticProvider<'a, f32>;
/// Contextual provider over single-precision layer stacks.
pub type ContextualProviderF32<'a> = ContextualProvider<'a, f32>;
