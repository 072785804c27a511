//! Forecasting of full-ocean-depth sound speed profiles.
//!
//! Historical profiles are resampled onto a depth layer scheme, each
//! layer's time series is min-max normalized and modeled by its own small
//! LSTM, and per-layer predictions are assembled back into a full-depth
//! profile by linear interpolation. Mean-value, polynomial, and
//! feedforward (BP) baselines run on the same layered data for
//! comparison.

pub mod baselines;
pub mod error;
pub mod hierarchy;
pub mod lstm;
pub mod mat;
pub mod normalize;
pub mod profile;
pub mod synth;
pub mod training;

pub use error::{Error, Result};
pub use hierarchy::{
    load_model, predict_multi, predict_next, save_model, train_hierarchical, validate,
    ForecastReport, HierarchicalModel,
};
pub use normalize::{denormalize_rows, denormalize_vector, fit_normalizer, normalize, NormalizationParams};
pub use profile::{
    build_series, interpolate_full_depth, resample_profile, DatasetManifest, DepthSample,
    LayerScheme, LayeredSeries, SchemeKind, SoundSpeedProfile,
};
pub use training::{make_windows, rmse, train_layer, OptimizerKind, TrainConfig};
