//! The hierarchical orchestrator: one trained network per depth layer,
//! single-step and autoregressive forecasts, full-depth assembly, RMSE
//! reporting, and versioned model persistence.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::lstm::{sequence_forward, LstmParams};
use crate::normalize::{fit_normalizer, NormalizationParams};
use crate::profile::{interpolate_full_depth, resample_profile, LayerScheme, LayeredSeries, SoundSpeedProfile};
use crate::training::{rmse, train_layer, TrainConfig, TrainingRun};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Per-layer trained networks plus everything needed to predict and invert.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchicalModel {
    pub scheme: LayerScheme,
    pub layers: Vec<LstmParams>,
    pub normalization: NormalizationParams,
    pub config: TrainConfig,
    pub training_timestamps: Vec<i64>,
}

impl HierarchicalModel {
    pub fn check(&self) -> Result<()> {
        if self.layers.len() != self.scheme.layer_count() {
            return Err(Error::ShapeMismatch(format!(
                "{} layer models for a {}-layer scheme",
                self.layers.len(),
                self.scheme.layer_count()
            )));
        }
        if self.normalization.layer_count() != self.scheme.layer_count() {
            return Err(Error::ShapeMismatch("normalization layer count".into()));
        }
        for p in &self.layers {
            p.check_shapes()?;
        }
        Ok(())
    }
}

/// Model plus per-layer training diagnostics.
#[derive(Debug, Clone)]
pub struct TrainedHierarchy {
    pub model: HierarchicalModel,
    /// Per-layer per-epoch mean loss, indexed [layer][epoch].
    pub loss_histories: Vec<Vec<f64>>,
}

/// Fits the normalizer, normalizes, and trains one network per layer.
/// Layers run in parallel on the current rayon pool; results are identical
/// to sequential execution because each layer derives its own seed.
pub fn train_hierarchical(series: &LayeredSeries, config: &TrainConfig) -> Result<TrainedHierarchy> {
    config.validate(series.time_count())?;
    let normalization = fit_normalizer(series);
    let normalized = crate::normalize::normalize(series, &normalization)?;

    let runs: Vec<Result<TrainingRun>> = (0..series.layer_count())
        .into_par_iter()
        .map(|layer| train_layer(normalized.layer_row(layer), config, layer))
        .collect();

    let mut layers = Vec::with_capacity(runs.len());
    let mut loss_histories = Vec::with_capacity(runs.len());
    for run in runs {
        let run = run?;
        layers.push(run.params);
        loss_histories.push(run.loss_history);
    }

    let model = HierarchicalModel {
        scheme: series.scheme().clone(),
        layers,
        normalization,
        config: config.clone(),
        training_timestamps: series.timestamps().to_vec(),
    };
    Ok(TrainedHierarchy { model, loss_histories })
}

fn check_series_compatible(model: &HierarchicalModel, series: &LayeredSeries) -> Result<()> {
    if series.scheme() != &model.scheme {
        return Err(Error::invalid("series layer scheme does not match the model's scheme"));
    }
    if series.time_count() < model.config.window_length {
        return Err(Error::invalid(format!(
            "series has {} steps but the model needs a window of {}",
            series.time_count(),
            model.config.window_length
        )));
    }
    Ok(())
}

fn normalized_tail(model: &HierarchicalModel, series: &LayeredSeries, layer: usize) -> Vec<f64> {
    let row = series.layer_row(layer);
    let w = model.config.window_length;
    row[row.len() - w..]
        .iter()
        .map(|&v| model.normalization.normalize_value(layer, v))
        .collect()
}

/// One de-normalized next-step prediction per layer.
pub fn predict_next(model: &HierarchicalModel, series: &LayeredSeries) -> Result<Vec<f64>> {
    model.check()?;
    check_series_compatible(model, series)?;
    (0..model.layers.len())
        .map(|layer| {
            let window = normalized_tail(model, series, layer);
            let (pred, _) = sequence_forward(&model.layers[layer], &window)?;
            Ok(model.normalization.denormalize_value(layer, pred))
        })
        .collect()
}

/// Autoregressive multi-step forecast; row per horizon step, column per
/// layer, de-normalized. Each step's normalized prediction is appended to
/// that layer's window for the next step.
pub fn predict_multi(
    model: &HierarchicalModel,
    series: &LayeredSeries,
    horizon: usize,
) -> Result<Vec<Vec<f64>>> {
    if horizon == 0 {
        return Err(Error::invalid("horizon must be >= 1"));
    }
    model.check()?;
    check_series_compatible(model, series)?;
    let layer_count = model.layers.len();
    let w = model.config.window_length;
    let mut out = vec![vec![0.0; layer_count]; horizon];
    for layer in 0..layer_count {
        let mut window = normalized_tail(model, series, layer);
        for step in 0..horizon {
            let (pred, _) = sequence_forward(&model.layers[layer], &window)?;
            out[step][layer] = model.normalization.denormalize_value(layer, pred);
            window.remove(0);
            window.push(pred);
            debug_assert_eq!(window.len(), w);
        }
    }
    Ok(out)
}

/// One row of a per-layer comparison table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerReportRow {
    pub layer: usize,
    pub depth_m: f64,
    pub predicted: f64,
    pub actual: Option<f64>,
    pub rmse: Option<f64>,
}

/// Forecast output with optional error metrics against a truth profile.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForecastReport {
    /// horizon × layers, meters/second.
    pub predicted: Vec<Vec<f64>>,
    /// Assembled full-depth profile per horizon step.
    pub profiles: Vec<SoundSpeedProfile>,
    pub per_layer_rmse: Option<Vec<f64>>,
    pub full_depth_rmse: Option<f64>,
}

impl ForecastReport {
    /// Per-layer table as `layer,depth_m,predicted,actual,rmse` CSV. Uses
    /// the first horizon step, which is the validated one.
    pub fn layer_table_csv(&self, scheme: &LayerScheme, truth: Option<&[f64]>) -> String {
        let mut out = String::from("layer,depth_m,predicted,actual,rmse\n");
        for (i, &depth) in scheme.depths().iter().enumerate() {
            let predicted = self.predicted[0][i];
            let actual = truth.map(|t| format!("{:?}", t[i])).unwrap_or_default();
            let r = self
                .per_layer_rmse
                .as_ref()
                .map(|v| format!("{:?}", v[i]))
                .unwrap_or_default();
            out.push_str(&format!("{},{:?},{:?},{},{}\n", i + 1, depth, predicted, actual, r));
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(format!("report encode: {e}")))
    }
}

/// Default comparison grid: 1-meter spacing across the scheme's depth range.
pub fn default_query_grid(scheme: &LayerScheme) -> Vec<f64> {
    let lo = scheme.depths()[0];
    let hi = *scheme.depths().last().unwrap();
    let n = ((hi - lo).floor() as usize) + 1;
    (0..n).map(|i| lo + i as f64).collect()
}

/// Predicts the next step and scores it against a held-out truth profile:
/// per-layer RMSE on the scheme, full-depth RMSE on the query grid.
pub fn validate(
    model: &HierarchicalModel,
    series: &LayeredSeries,
    truth: &SoundSpeedProfile,
    query_depths: Option<&[f64]>,
) -> Result<ForecastReport> {
    let last = *series.timestamps().last().unwrap();
    if truth.timestamp <= last {
        return Err(Error::invalid(format!(
            "truth timestamp {} is not after the series' last timestamp {last}",
            truth.timestamp
        )));
    }
    let predicted = predict_next(model, series)?;
    let actual = resample_profile(truth, &model.scheme)?;
    // single-step per-layer RMSE reduces to |predicted − actual|
    let per_layer: Vec<f64> =
        predicted.iter().zip(&actual).map(|(p, a)| (p - a).abs()).collect();

    let grid_owned;
    let grid = match query_depths {
        Some(g) => g,
        None => {
            grid_owned = default_query_grid(&model.scheme);
            &grid_owned
        }
    };
    let pred_profile = interpolate_full_depth(&predicted, &model.scheme, grid, truth.timestamp)?;
    let truth_depths = truth.depths();
    let truth_speeds = truth.speeds();
    let truth_curve: Vec<f64> = grid
        .iter()
        .map(|&d| crate::profile::lerp_clamped(&truth_depths, &truth_speeds, d))
        .collect();
    let full_rmse = rmse(&pred_profile.speeds(), &truth_curve)?;

    Ok(ForecastReport {
        predicted: vec![predicted],
        profiles: vec![pred_profile],
        per_layer_rmse: Some(per_layer),
        full_depth_rmse: Some(full_rmse),
    })
}

// ---------------------------------------------------------------------------
// Persistence: versioned JSON container with a payload checksum.
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct ModelContainer {
    format_version: u32,
    /// SHA-256 of the serialized model payload, hex-encoded.
    checksum: String,
    model: serde_json::Value,
}

fn payload_checksum(payload: &str) -> String {
    hex::encode(Sha256::digest(payload.as_bytes()))
}

pub fn save_model(model: &HierarchicalModel, path: &Path) -> Result<()> {
    model.check()?;
    let value = serde_json::to_value(model)
        .map_err(|e| Error::Parse(format!("model encode: {e}")))?;
    // checksum the canonical (key-sorted) form so load can re-derive it
    let payload = serde_json::to_string(&value)
        .map_err(|e| Error::Parse(format!("model encode: {e}")))?;
    let container = ModelContainer {
        format_version: MODEL_FORMAT_VERSION,
        checksum: payload_checksum(&payload),
        model: value,
    };
    let text = serde_json::to_string(&container)
        .map_err(|e| Error::Parse(format!("container encode: {e}")))?;
    fs::write(path, text)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<HierarchicalModel> {
    let text = fs::read_to_string(path)?;
    let container: ModelContainer = serde_json::from_str(&text)
        .map_err(|e| Error::Corrupt(format!("{}: {e}", path.display())))?;
    if container.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found: container.format_version,
            expected: MODEL_FORMAT_VERSION,
        });
    }
    let payload = serde_json::to_string(&container.model)
        .map_err(|e| Error::Corrupt(format!("payload re-encode: {e}")))?;
    if payload_checksum(&payload) != container.checksum {
        return Err(Error::Corrupt("checksum mismatch".into()));
    }
    let model: HierarchicalModel = serde_json::from_value(container.model)
        .map_err(|e| Error::Corrupt(format!("payload decode: {e}")))?;
    model.check()?;
    Ok(model)
}
