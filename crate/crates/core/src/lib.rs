//! Gabor surface features for face recognition.
//!
//! Pipeline: optional illumination normalization ([`preprocess`]), a bank of
//! Gabor magnitude pictures ([`gabor`]), per-pixel surface codes
//! ([`codes`]), spatial histograms ([`hist`]), per-region Fisher subspaces
//! with weighted cosine fusion ([`subspace`]), and the orchestration and
//! evaluation layer ([`pipeline`]).

pub mod codes;
pub mod error;
pub mod gabor;
pub mod hist;
pub mod imgio;
pub mod model_file;
pub mod pipeline;
pub mod preprocess;
pub mod subspace;

pub use codes::{CodeMap, DerivativeStack, GsfVariant};
pub use error::{GsfError, Result};
pub use gabor::{GaborBankParams, Gmp};
pub use hist::{HistogramSequence, PartitionConfig};
pub use imgio::{DatasetManifest, RasterImage};
pub use pipeline::{EvalReport, FeatureConfig, PipelineConfig};
pub use preprocess::PreprocessParams;
pub use subspace::{EpfdaModel, FdaParams, ProjectedFace};
