//! Comparison predictors: per-layer mean value, least-squares polynomial
//! extrapolation, and a one-hidden-layer feedforward (BP) network trained
//! on the same windowed data as the recurrent model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat::{dot, Mat};
use crate::normalize::{fit_normalizer, NormalizationParams};
use crate::profile::LayeredSeries;
use crate::training::{derive_layer_seed, make_windows, Optimizer, TrainConfig};

/// Per layer, the arithmetic mean of the full history.
pub fn mean_baseline(series: &LayeredSeries) -> Vec<f64> {
    (0..series.layer_count())
        .map(|layer| {
            let row = series.layer_row(layer);
            row.iter().sum::<f64>() / row.len() as f64
        })
        .collect()
}

/// Least-squares polynomial per layer, fit on the last `history` values
/// against time indices rescaled to [-1, 1].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolyFit {
    pub degree: usize,
    pub history: usize,
    /// One coefficient vector (constant first) per layer.
    pub coefficients: Vec<Vec<f64>>,
}

/// Maps history index i ∈ [0, h-1] to the fitting abscissa in [-1, 1].
fn poly_x(i: usize, history: usize) -> f64 {
    if history == 1 {
        0.0
    } else {
        2.0 * i as f64 / (history - 1) as f64 - 1.0
    }
}

fn eval_poly(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// Solves the (degree+1)-square normal equations by Gaussian elimination
/// with partial pivoting.
fn solve_normal_equations(xs: &[f64], ys: &[f64], degree: usize) -> Result<Vec<f64>> {
    let n = degree + 1;
    let mut a = vec![vec![0.0; n + 1]; n];
    for (&x, &y) in xs.iter().zip(ys) {
        let mut powers = vec![1.0; 2 * degree + 1];
        for k in 1..powers.len() {
            powers[k] = powers[k - 1] * x;
        }
        for r in 0..n {
            for c in 0..n {
                a[r][c] += powers[r + c];
            }
            a[r][n] += powers[r] * y;
        }
    }
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        if a[pivot][col].abs() < 1e-12 {
            return Err(Error::invalid("polynomial fit is singular"));
        }
        a.swap(col, pivot);
        for r in 0..n {
            if r != col {
                let factor = a[r][col] / a[col][col];
                for c in col..=n {
                    a[r][c] -= factor * a[col][c];
                }
            }
        }
    }
    Ok((0..n).map(|r| a[r][n] / a[r][r]).collect())
}

pub fn fit_poly(series: &LayeredSeries, degree: usize, history: usize) -> Result<PolyFit> {
    if history > series.time_count() {
        return Err(Error::invalid(format!(
            "history {history} exceeds series length {}",
            series.time_count()
        )));
    }
    if degree + 1 > history {
        return Err(Error::invalid(format!(
            "degree {degree} needs at least {} points, history is {history}",
            degree + 1
        )));
    }
    let xs: Vec<f64> = (0..history).map(|i| poly_x(i, history)).collect();
    let start = series.time_count() - history;
    let coefficients = (0..series.layer_count())
        .map(|layer| {
            let ys = &series.layer_row(layer)[start..];
            solve_normal_equations(&xs, ys, degree)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PolyFit { degree, history, coefficients })
}

impl PolyFit {
    /// Evaluates each layer's polynomial one step past the fitted history.
    pub fn predict_next(&self) -> Vec<f64> {
        let x_next = poly_x(self.history, self.history);
        self.coefficients.iter().map(|c| eval_poly(c, x_next)).collect()
    }
}

/// Fit-and-extrapolate in one call.
pub fn poly_baseline(series: &LayeredSeries, degree: usize, history: usize) -> Result<Vec<f64>> {
    Ok(fit_poly(series, degree, history)?.predict_next())
}

/// One-hidden-layer tanh feedforward network mapping a window to a scalar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub w_in: Mat,
    pub b_hidden: Vec<f64>,
    pub w_out: Vec<f64>,
    pub b_out: f64,
}

impl MlpParams {
    pub fn zeros(hidden: usize, window: usize) -> Self {
        MlpParams {
            w_in: Mat::zeros(hidden, window),
            b_hidden: vec![0.0; hidden],
            w_out: vec![0.0; hidden],
            b_out: 0.0,
        }
    }

    fn init(hidden: usize, window: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.0 / (hidden as f64).sqrt();
        let mut draw = move || rng.gen_range(-scale..scale);
        MlpParams {
            w_in: Mat::from_fn(hidden, window, &mut draw),
            b_hidden: vec![0.0; hidden],
            w_out: (0..hidden).map(|_| draw()).collect(),
            b_out: 0.0,
        }
    }

    pub fn forward(&self, window: &[f64]) -> (f64, Vec<f64>) {
        let hidden = self.b_hidden.len();
        let mut a = vec![0.0; hidden];
        self.w_in.matvec_into(window, &mut a);
        for (v, &b) in a.iter_mut().zip(&self.b_hidden) {
            *v = (*v + b).tanh();
        }
        (dot(&self.w_out, &a) + self.b_out, a)
    }

    /// Gradients of `d_pred * prediction` w.r.t. every parameter.
    pub fn backward(&self, window: &[f64], hidden_act: &[f64], d_pred: f64) -> MlpParams {
        let hidden = self.b_hidden.len();
        let mut grads = MlpParams::zeros(hidden, window.len());
        let mut da = vec![0.0; hidden];
        for k in 0..hidden {
            grads.w_out[k] = d_pred * hidden_act[k];
            da[k] = d_pred * self.w_out[k] * (1.0 - hidden_act[k] * hidden_act[k]);
        }
        grads.b_out = d_pred;
        grads.w_in.add_outer(&da, window);
        grads.b_hidden.copy_from_slice(&da);
        grads
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.w_in.data_mut(),
            &mut self.b_hidden,
            &mut self.w_out,
            std::slice::from_mut(&mut self.b_out),
        ]
    }

    pub fn param_slices(&self) -> Vec<&[f64]> {
        vec![self.w_in.data(), &self.b_hidden, &self.w_out, std::slice::from_ref(&self.b_out)]
    }
}

/// The trained BP baseline: per-layer networks plus the normalizer fitted
/// on the training series.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BpBaseline {
    pub normalization: NormalizationParams,
    pub layers: Vec<MlpParams>,
    pub window_length: usize,
}

/// Seed stream tag keeping BP initialization distinct from the LSTM's.
const BP_SEED_TAG: u64 = 0x4250_4250;

/// Trains one feedforward network per layer on the same normalized
/// (window, target) pairs, learning rate, and epochs as the recurrent model.
pub fn bp_baseline_train(series: &LayeredSeries, config: &TrainConfig) -> Result<BpBaseline> {
    config.validate(series.time_count())?;
    let normalization = fit_normalizer(series);
    let normalized = crate::normalize::normalize(series, &normalization)?;
    let mut layers = Vec::with_capacity(series.layer_count());
    for layer in 0..series.layer_count() {
        let windows = make_windows(normalized.layer_row(layer), config.window_length)?;
        let seed = derive_layer_seed(config.rng_seed ^ BP_SEED_TAG, layer as u64);
        let mut params = MlpParams::init(config.hidden_size, config.window_length, seed);
        let shapes: Vec<usize> = params.param_slices().iter().map(|s| s.len()).collect();
        let mut opt = Optimizer::new(config.optimizer, config.learning_rate, &shapes);
        for _ in 0..config.epochs {
            for (window, target) in &windows {
                let (pred, act) = params.forward(window);
                let grads = params.backward(window, &act, 2.0 * (pred - target));
                let grad_slices = grads.param_slices();
                let mut param_slices = params.param_slices_mut();
                opt.step(&mut param_slices, &grad_slices);
            }
        }
        layers.push(params);
    }
    Ok(BpBaseline { normalization, layers, window_length: config.window_length })
}

/// Feeds each layer's last window through its network and de-normalizes.
pub fn bp_baseline_predict(model: &BpBaseline, series: &LayeredSeries) -> Result<Vec<f64>> {
    if model.layers.len() != series.layer_count()
        || model.normalization.layer_count() != series.layer_count()
    {
        return Err(Error::invalid("BP baseline layer count does not match the series"));
    }
    if series.time_count() < model.window_length {
        return Err(Error::invalid("series shorter than the BP window"));
    }
    (0..series.layer_count())
        .map(|layer| {
            let row = series.layer_row(layer);
            let window: Vec<f64> = row[row.len() - model.window_length..]
                .iter()
                .map(|&v| model.normalization.normalize_value(layer, v))
                .collect();
            let (pred, _) = model.layers[layer].forward(&window);
            Ok(model.normalization.denormalize_value(layer, pred))
        })
        .collect()
}
