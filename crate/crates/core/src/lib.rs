//! Confidence-gated sequential ensembles.
//!
//! Each member after the first is trained on the samples its predecessor
//! classified with low confidence. At inference time members are consulted
//! in order until one is confident, with a consensus heuristic as fallback.
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`). The aliases
//! below fix the scalar to `f64`, which the command-line tool uses.

pub mod cascade;
pub mod classifiers;
pub mod config;
pub mod datasets;
pub mod ensemble;
pub mod error;
pub mod manifest;
pub mod metrics;
pub mod numerics;
pub mod scalar;

pub use cascade::{
    batch_evaluate, cascade_predict, consensus_last_member, consensus_most_confident, CascadeTrace, Consensus,
    EvaluationRecord, Resolution, RuntimeConfig, Utilization,
};
pub use classifiers::{
    cross_entropy_loss, fit, fit_with_history, init_model, Classifier, ClassifierKind, ClassifierSpec, TrainConfig,
    TrainedModel,
};
pub use datasets::{generate_blobs, load_csv, load_idx, materialize, BlobConfig, CsvSchema, Dataset, Sample, SubsetView};
pub use ensemble::{
    build_ensemble, select_next_subset_nested, select_next_subset_rebased, BuildConfig, BuildReport, SelectionRule,
};
pub use error::{Error, Result};
pub use manifest::{load_manifest, save_manifest, EnsembleManifest};
pub use metrics::{expected_calibration_error, score_histogram, top1_accuracy, CalibrationReport, ScoreHistogram, ScoreKind};
pub use numerics::{
    argmax_class, distance_to_one, distance_to_zero, softmax, uncertainty, LogitVector, Prediction, ProbabilityVector,
    UncertaintyScore,
};
pub use scalar::Scalar;

pub type Logits = LogitVector<f64>;
pub type Probabilities = ProbabilityVector<f64>;
pub type Model = TrainedModel<f64>;
pub type Data = Dataset<f64>;
pub type Ensemble = EnsembleManifest<f64>;
pub type Evaluation = EvaluationRecord<f64>;

pub type ModelF32 = TrainedModel<f32>;
pub type DataF32 = Dataset<f32>;
pub type EnsembleF32 = EnsembleManifest<f32>;
