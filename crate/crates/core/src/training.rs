//! Windowed dataset construction, RMSE, optimizer, and the per-layer
//! training loop.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lstm::{backward, init_params, sequence_forward, LstmParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub window_length: usize,
    pub optimizer: OptimizerKind,
    pub rng_seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden_size: 128,
            learning_rate: 0.01,
            epochs: 300,
            window_length: 12,
            optimizer: OptimizerKind::Adam,
            rng_seed: 0,
            shuffle: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, series_len: usize) -> Result<()> {
        if self.hidden_size == 0 {
            return Err(Error::invalid("hidden_size must be >= 1"));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be >= 1"));
        }
        if self.window_length == 0 || self.window_length >= series_len {
            return Err(Error::invalid(format!(
                "window_length must satisfy 1 <= w < series length ({} vs {series_len})",
                self.window_length
            )));
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(Error::invalid("learning_rate must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Result of training one depth layer.
#[derive(Debug, Clone)]
pub struct TrainingRun {
    /// Mean squared-error loss per epoch.
    pub loss_history: Vec<f64>,
    pub params: LstmParams,
    pub config: TrainConfig,
}

/// Mixes a global seed and a layer index into an independent stream seed
/// (splitmix64 finalizer), so per-layer results do not depend on the order
/// layers are trained in.
pub fn derive_layer_seed(global: u64, layer: u64) -> u64 {
    let mut x = global ^ layer.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Sliding windows over one layer's row: pair k is
/// (values[k..k+w), values[k+w]); exactly n − w pairs in time order.
pub fn make_windows(layer_row: &[f64], w: usize) -> Result<Vec<(Vec<f64>, f64)>> {
    if w == 0 {
        return Err(Error::invalid("window length must be >= 1"));
    }
    if layer_row.len() <= w {
        return Err(Error::invalid(format!(
            "row of length {} is too short for window length {w}",
            layer_row.len()
        )));
    }
    Ok((0..layer_row.len() - w)
        .map(|k| (layer_row[k..k + w].to_vec(), layer_row[k + w]))
        .collect())
}

/// Root mean square error between two equal-length vectors.
pub fn rmse(predicted: &[f64], actual: &[f64]) -> Result<f64> {
    if predicted.is_empty() || predicted.len() != actual.len() {
        return Err(Error::invalid(format!(
            "rmse needs equal non-empty lengths, got {} and {}",
            predicted.len(),
            actual.len()
        )));
    }
    let sum: f64 = predicted.iter().zip(actual).map(|(p, a)| (p - a) * (p - a)).sum();
    Ok((sum / predicted.len() as f64).sqrt())
}

/// Adam/SGD state over the fixed tensor list exposed by the model.
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, shapes: &[usize]) -> Self {
        let m = shapes.iter().map(|&n| vec![0.0; n]).collect();
        let v = shapes.iter().map(|&n| vec![0.0; n]).collect();
        Optimizer { kind, lr, m, v, t: 0 }
    }

    pub fn for_slices(kind: OptimizerKind, lr: f64, slices: &[&[f64]]) -> Self {
        let shapes: Vec<usize> = slices.iter().map(|s| s.len()).collect();
        Self::new(kind, lr, &shapes)
    }

    /// One update over aligned parameter/gradient tensor lists.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) {
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grads) {
                    for (pv, &gv) in p.iter_mut().zip(*g) {
                        *pv -= self.lr * gv;
                    }
                }
            }
            OptimizerKind::Adam => {
                self.t += 1;
                let bc1 = 1.0 - ADAM_BETA1.powi(self.t as i32);
                let bc2 = 1.0 - ADAM_BETA2.powi(self.t as i32);
                for ((p, g), (m, v)) in
                    params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut()))
                {
                    for k in 0..p.len() {
                        let gv = g[k];
                        m[k] = ADAM_BETA1 * m[k] + (1.0 - ADAM_BETA1) * gv;
                        v[k] = ADAM_BETA2 * v[k] + (1.0 - ADAM_BETA2) * gv * gv;
                        let m_hat = m[k] / bc1;
                        let v_hat = v[k] / bc2;
                        p[k] -= self.lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
                    }
                }
            }
        }
    }
}

/// Trains one depth layer's network on its normalized row. The RNG seed is
/// derived from (config.rng_seed, layer_index) so concurrent per-layer
/// training reproduces sequential results.
pub fn train_layer(layer_row: &[f64], config: &TrainConfig, layer_index: usize) -> Result<TrainingRun> {
    config.validate(layer_row.len())?;
    let windows = make_windows(layer_row, config.window_length)?;
    let seed = derive_layer_seed(config.rng_seed, layer_index as u64);
    let mut params = init_params(config.hidden_size, 1, seed)?;
    let shapes: Vec<usize> = params.param_slices().iter().map(|s| s.len()).collect();
    let mut opt = Optimizer::new(config.optimizer, config.learning_rate, &shapes);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_layer_seed(seed, u64::MAX));

    let mut order: Vec<usize> = (0..windows.len()).collect();
    let mut loss_history = Vec::with_capacity(config.epochs);
    for _epoch in 0..config.epochs {
        if config.shuffle {
            order.shuffle(&mut shuffle_rng);
        }
        let mut epoch_loss = 0.0;
        for &k in &order {
            let (window, target) = &windows[k];
            let (pred, cache) = sequence_forward(&params, window)?;
            let err = pred - target;
            epoch_loss += err * err;
            let grads = backward(&params, &cache, 2.0 * err)?;
            let grad_slices = grads.param_slices();
            let mut param_slices = params.param_slices_mut();
            opt.step(&mut param_slices, &grad_slices);
        }
        loss_history.push(epoch_loss / windows.len() as f64);
    }
    Ok(TrainingRun { loss_history, params, config: config.clone() })
}

/// Writes a loss history as `epoch,mean_loss` CSV text.
pub fn loss_history_csv(history: &[f64]) -> String {
    let mut out = String::from("epoch,mean_loss\n");
    for (i, loss) in history.iter().enumerate() {
        out.push_str(&format!("{},{:?}\n", i + 1, loss));
    }
    out
}
