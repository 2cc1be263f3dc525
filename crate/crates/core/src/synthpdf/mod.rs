//! Synthetic ground-truth density generation.
//!
//! Random densities of arbitrary dimension are built from a fixed library of
//! 1D base functions joined by `add`/`multiply`, normalized by numerical
//! integration and sampled exactly by rejection, yielding point sets with
//! known density values for supervised training.

pub mod base;
pub mod dataset;
pub mod expr;
pub mod normalize;
pub mod sample;

pub use base::{sample_base_function, BaseFunctionSpec, BaseKind, Tag, TagFilter, BASE_EPSILON};
pub use dataset::{
    generate_dataset, load_dataset, load_manifest, load_pdf, validation_count, write_dataset,
    Dataset, DatasetManifest, GeneratedSample, GenerationConfig, LoadedDataset,
};
pub use expr::{
    compose_1d, compose_highdim, CombineOp, CompositionRules, CompositionScheme, ExprNode,
    FunctionExpr,
};
pub use normalize::{normalize, Interval, SyntheticPdf, ZMethod};
pub use sample::{
    rejection_sample, rejection_sample_with_stats, AxisScale, RejectionStats, SampleSet,
};
