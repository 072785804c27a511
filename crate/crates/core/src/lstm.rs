//! The per-layer recurrent cell: gate forward pass, fully connected head,
//! backpropagation through time, initialization, and gradient verification.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat::{dot, Mat};

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// All trainable parameters of one depth layer's network: four gates plus
/// the fully connected head that maps the final hidden vector to a scalar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub hidden_size: usize,
    pub input_size: usize,
    pub w_f: Mat,
    pub w_i: Mat,
    pub w_c: Mat,
    pub w_o: Mat,
    pub b_f: Vec<f64>,
    pub b_i: Vec<f64>,
    pub b_c: Vec<f64>,
    pub b_o: Vec<f64>,
    pub w_fc: Vec<f64>,
    pub b_fc: f64,
}

impl LstmParams {
    pub fn zeros(hidden: usize, input: usize) -> Self {
        let z = hidden + input;
        LstmParams {
            hidden_size: hidden,
            input_size: input,
            w_f: Mat::zeros(hidden, z),
            w_i: Mat::zeros(hidden, z),
            w_c: Mat::zeros(hidden, z),
            w_o: Mat::zeros(hidden, z),
            b_f: vec![0.0; hidden],
            b_i: vec![0.0; hidden],
            b_c: vec![0.0; hidden],
            b_o: vec![0.0; hidden],
            w_fc: vec![0.0; hidden],
            b_fc: 0.0,
        }
    }

    pub fn check_shapes(&self) -> Result<()> {
        let (h, z) = (self.hidden_size, self.hidden_size + self.input_size);
        let mats = [&self.w_f, &self.w_i, &self.w_c, &self.w_o];
        if mats.iter().any(|m| m.rows() != h || m.cols() != z) {
            return Err(Error::ShapeMismatch("gate weight matrix shape".into()));
        }
        let biases = [&self.b_f, &self.b_i, &self.b_c, &self.b_o];
        if biases.iter().any(|b| b.len() != h) || self.w_fc.len() != h {
            return Err(Error::ShapeMismatch("gate bias or head length".into()));
        }
        let finite = mats.iter().all(|m| m.is_finite())
            && biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
            && self.w_fc.iter().all(|v| v.is_finite())
            && self.b_fc.is_finite();
        if !finite {
            return Err(Error::NonFinite("parameter entries".into()));
        }
        Ok(())
    }

    /// All parameter tensors as mutable slices, in a fixed order shared
    /// with [`Gradients::slices`]; the optimizer walks this list.
    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.w_f.data_mut(),
            self.w_i.data_mut(),
            self.w_c.data_mut(),
            self.w_o.data_mut(),
            &mut self.b_f,
            &mut self.b_i,
            &mut self.b_c,
            &mut self.b_o,
            &mut self.w_fc,
            std::slice::from_mut(&mut self.b_fc),
        ]
    }

    /// Immutable view in the same order as [`Self::param_slices_mut`].
    pub fn param_slices(&self) -> Vec<&[f64]> {
        vec![
            self.w_f.data(),
            self.w_i.data(),
            self.w_c.data(),
            self.w_o.data(),
            &self.b_f,
            &self.b_i,
            &self.b_c,
            &self.b_o,
            &self.w_fc,
            std::slice::from_ref(&self.b_fc),
        ]
    }

    pub fn param_count(&self) -> usize {
        let z = self.hidden_size + self.input_size;
        4 * self.hidden_size * z + 4 * self.hidden_size + self.hidden_size + 1
    }
}

/// Gradients with the same shapes as [`LstmParams`].
pub type Gradients = LstmParams;

/// Recurrent state: hidden vector and cell state.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        LstmState { h: vec![0.0; hidden], c: vec![0.0; hidden] }
    }
}

/// Everything one time step needs for the backward pass.
#[derive(Debug, Clone)]
pub struct StepRecord {
    /// Concatenated [h_prev, x].
    pub z: Vec<f64>,
    pub f: Vec<f64>,
    pub i: Vec<f64>,
    pub g: Vec<f64>,
    pub o: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub c: Vec<f64>,
}

/// Per-step records from one sequence forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub hidden_size: usize,
    pub input_size: usize,
    pub steps: Vec<StepRecord>,
    pub h_last: Vec<f64>,
}

/// Draws gate and head weights uniformly from [-1/√hidden, 1/√hidden];
/// biases start at zero. Deterministic per seed.
pub fn init_params(hidden: usize, input: usize, rng_seed: u64) -> Result<LstmParams> {
    if hidden == 0 || input == 0 {
        return Err(Error::invalid("hidden and input sizes must be >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let scale = 1.0 / (hidden as f64).sqrt();
    let z = hidden + input;
    let mut draw = move || rng.gen_range(-scale..scale);
    Ok(LstmParams {
        hidden_size: hidden,
        input_size: input,
        w_f: Mat::from_fn(hidden, z, &mut draw),
        w_i: Mat::from_fn(hidden, z, &mut draw),
        w_c: Mat::from_fn(hidden, z, &mut draw),
        w_o: Mat::from_fn(hidden, z, &mut draw),
        b_f: vec![0.0; hidden],
        b_i: vec![0.0; hidden],
        b_c: vec![0.0; hidden],
        b_o: vec![0.0; hidden],
        w_fc: (0..hidden).map(|_| draw()).collect(),
        b_fc: 0.0,
    })
}

/// One gate step:
/// f = σ(W_f z + b_f), i = σ(W_i z + b_i), C̃ = tanh(W_C z + b_C),
/// C = f⊙C_prev + i⊙C̃, o = σ(W_o z + b_o), h = o⊙tanh(C).
pub fn cell_forward(
    params: &LstmParams,
    state: &LstmState,
    x: f64,
) -> Result<(LstmState, StepRecord)> {
    if !x.is_finite() {
        return Err(Error::NonFinite(format!("cell input {x}")));
    }
    let h = params.hidden_size;
    let mut z = Vec::with_capacity(h + params.input_size);
    z.extend_from_slice(&state.h);
    z.push(x);
    if z.len() != h + params.input_size {
        return Err(Error::ShapeMismatch("state length vs params".into()));
    }

    let mut f = vec![0.0; h];
    let mut i = vec![0.0; h];
    let mut g = vec![0.0; h];
    let mut o = vec![0.0; h];
    params.w_f.matvec_into(&z, &mut f);
    params.w_i.matvec_into(&z, &mut i);
    params.w_c.matvec_into(&z, &mut g);
    params.w_o.matvec_into(&z, &mut o);
    for k in 0..h {
        f[k] = sigmoid(f[k] + params.b_f[k]);
        i[k] = sigmoid(i[k] + params.b_i[k]);
        g[k] = (g[k] + params.b_c[k]).tanh();
        o[k] = sigmoid(o[k] + params.b_o[k]);
    }
    let mut c = vec![0.0; h];
    let mut h_new = vec![0.0; h];
    for k in 0..h {
        c[k] = f[k] * state.c[k] + i[k] * g[k];
        h_new[k] = o[k] * c[k].tanh();
    }
    let record =
        StepRecord { z, f, i, g, o, c_prev: state.c.clone(), c: c.clone() };
    Ok((LstmState { h: h_new, c }, record))
}

/// Runs the cell across the window from a zero state and applies the
/// fully connected head to the final hidden vector.
pub fn sequence_forward(params: &LstmParams, window: &[f64]) -> Result<(f64, ForwardCache)> {
    if window.is_empty() {
        return Err(Error::invalid("input window is empty"));
    }
    let mut state = LstmState::zeros(params.hidden_size);
    let mut steps = Vec::with_capacity(window.len());
    for &x in window {
        let (next, record) = cell_forward(params, &state, x)?;
        steps.push(record);
        state = next;
    }
    let prediction = dot(&params.w_fc, &state.h) + params.b_fc;
    let cache = ForwardCache {
        hidden_size: params.hidden_size,
        input_size: params.input_size,
        steps,
        h_last: state.h,
    };
    Ok((prediction, cache))
}

/// Exact BPTT gradients of the prediction scaled by `d_prediction`.
pub fn backward(params: &LstmParams, cache: &ForwardCache, d_prediction: f64) -> Result<Gradients> {
    if cache.hidden_size != params.hidden_size || cache.input_size != params.input_size {
        return Err(Error::ShapeMismatch("cache was built with different sizes".into()));
    }
    let h = params.hidden_size;
    let mut grads = Gradients::zeros(h, params.input_size);

    // head
    for k in 0..h {
        grads.w_fc[k] = d_prediction * cache.h_last[k];
    }
    grads.b_fc = d_prediction;

    let mut dh: Vec<f64> = params.w_fc.iter().map(|&w| d_prediction * w).collect();
    let mut dc = vec![0.0; h];
    let mut da_f = vec![0.0; h];
    let mut da_i = vec![0.0; h];
    let mut da_g = vec![0.0; h];
    let mut da_o = vec![0.0; h];
    let mut dz = vec![0.0; h + params.input_size];

    for step in cache.steps.iter().rev() {
        for k in 0..h {
            let tc = step.c[k].tanh();
            let do_k = dh[k] * tc;
            let dc_k = dc[k] + dh[k] * step.o[k] * (1.0 - tc * tc);
            let df = dc_k * step.c_prev[k];
            let di = dc_k * step.g[k];
            let dg = dc_k * step.i[k];
            dc[k] = dc_k * step.f[k]; // becomes dC_prev
            da_f[k] = df * step.f[k] * (1.0 - step.f[k]);
            da_i[k] = di * step.i[k] * (1.0 - step.i[k]);
            da_g[k] = dg * (1.0 - step.g[k] * step.g[k]);
            da_o[k] = do_k * step.o[k] * (1.0 - step.o[k]);
        }
        grads.w_f.add_outer(&da_f, &step.z);
        grads.w_i.add_outer(&da_i, &step.z);
        grads.w_c.add_outer(&da_g, &step.z);
        grads.w_o.add_outer(&da_o, &step.z);
        for k in 0..h {
            grads.b_f[k] += da_f[k];
            grads.b_i[k] += da_i[k];
            grads.b_c[k] += da_g[k];
            grads.b_o[k] += da_o[k];
        }
        dz.iter_mut().for_each(|v| *v = 0.0);
        params.w_f.add_transpose_matvec(&da_f, &mut dz);
        params.w_i.add_transpose_matvec(&da_i, &mut dz);
        params.w_c.add_transpose_matvec(&da_g, &mut dz);
        params.w_o.add_transpose_matvec(&da_o, &mut dz);
        dh.copy_from_slice(&dz[..h]);
    }
    Ok(grads)
}

/// Loss whose gradient the checker verifies.
#[derive(Debug, Clone, Copy)]
pub enum LossKind {
    /// The raw prediction itself.
    Prediction,
    /// (prediction - target)².
    SquaredError { target: f64 },
}

impl LossKind {
    fn loss(&self, pred: f64) -> f64 {
        match *self {
            LossKind::Prediction => pred,
            LossKind::SquaredError { target } => (pred - target) * (pred - target),
        }
    }

    fn d_pred(&self, pred: f64) -> f64 {
        match *self {
            LossKind::Prediction => 1.0,
            LossKind::SquaredError { target } => 2.0 * (pred - target),
        }
    }
}

/// Central finite-difference check of every parameter's analytic gradient.
/// Returns the worst relative error |g_a − g_n| / max(|g_a|, |g_n|, 1e-12).
pub fn gradient_check(
    params: &LstmParams,
    window: &[f64],
    loss_kind: LossKind,
    epsilon: f64,
) -> Result<f64> {
    gradient_check_with_bias(params, window, loss_kind, epsilon, 0.0)
}

/// [`gradient_check`] with an additive corruption applied to every analytic
/// gradient before comparison. A nonzero bias is a fault-injection hook:
/// the check must then report a large error.
pub fn gradient_check_with_bias(
    params: &LstmParams,
    window: &[f64],
    loss_kind: LossKind,
    epsilon: f64,
    analytic_bias: f64,
) -> Result<f64> {
    if epsilon <= 0.0 {
        return Err(Error::invalid("epsilon must be positive"));
    }
    let (pred, cache) = sequence_forward(params, window)?;
    let analytic = backward(params, &cache, loss_kind.d_pred(pred))?;

    let mut work = params.clone();
    let mut worst: f64 = 0.0;
    let tensor_count = work.param_slices_mut().len();
    for t in 0..tensor_count {
        let len = work.param_slices_mut()[t].len();
        for idx in 0..len {
            let orig = work.param_slices_mut()[t][idx];
            work.param_slices_mut()[t][idx] = orig + epsilon;
            let (p_plus, _) = sequence_forward(&work, window)?;
            work.param_slices_mut()[t][idx] = orig - epsilon;
            let (p_minus, _) = sequence_forward(&work, window)?;
            work.param_slices_mut()[t][idx] = orig;

            let numeric = (loss_kind.loss(p_plus) - loss_kind.loss(p_minus)) / (2.0 * epsilon);
            let ga = analytic.param_slices()[t][idx] + analytic_bias;
            let rel = (ga - numeric).abs() / ga.abs().max(numeric.abs()).max(1e-12);
            // skip entries where both gradients vanish
            if ga.abs().max(numeric.abs()) > 1e-12 && rel > worst {
                worst = rel;
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_deterministic_and_shaped() {
        let a = init_params(128, 1, 42).unwrap();
        let b = init_params(128, 1, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.w_i.rows(), 128);
        assert_eq!(a.w_i.cols(), 129);
        assert!(a.b_f.iter().all(|&v| v == 0.0));
        assert!(init_params(0, 1, 1).is_err());
    }

    #[test]
    fn init_entry_mean_is_near_zero() {
        // 10^5 draws from U(-s, s): mean ~ N(0, s²/3n); assert within 3σ.
        let hidden = 100; // 4 * 100 * 101 weights > 10^4 per params set
        let mut sum = 0.0;
        let mut count = 0usize;
        for seed in 0..3 {
            let p = init_params(hidden, 1, seed).unwrap();
            for m in [&p.w_f, &p.w_i, &p.w_c, &p.w_o] {
                sum += m.data().iter().sum::<f64>();
                count += m.data().len();
            }
        }
        assert!(count > 100_000);
        let s = 1.0 / (hidden as f64).sqrt();
        let sigma_mean = s / (3.0 * count as f64).sqrt();
        assert!((sum / count as f64).abs() < 3.0 * sigma_mean);
    }

    #[test]
    fn zero_params_zero_state_collapse() {
        let p = LstmParams::zeros(4, 1);
        let s = LstmState::zeros(4);
        let (next, rec) = cell_forward(&p, &s, 0.7).unwrap();
        assert!(next.c.iter().all(|&v| v == 0.0));
        assert!(next.h.iter().all(|&v| v == 0.0));
        assert!(rec.f.iter().all(|&v| v == 0.5));
        assert!(rec.o.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn zero_params_nonzero_cell_state() {
        let p = LstmParams::zeros(3, 1);
        let c0 = 0.8;
        let s = LstmState { h: vec![0.0; 3], c: vec![c0; 3] };
        let (next, _) = cell_forward(&p, &s, -0.2).unwrap();
        for k in 0..3 {
            assert!((next.c[k] - 0.5 * c0).abs() < 1e-15);
            assert!((next.h[k] - 0.5 * (0.5 * c0).tanh()).abs() < 1e-15);
        }
    }

    #[test]
    fn cell_rejects_non_finite_input() {
        let p = LstmParams::zeros(2, 1);
        let s = LstmState::zeros(2);
        assert!(cell_forward(&p, &s, f64::NAN).is_err());
    }

    /// Straight-line transcription of the gate formulas with naive loops,
    /// independent of Mat.
    fn reference_cell(p: &LstmParams, h_prev: &[f64], c_prev: &[f64], x: f64) -> (Vec<f64>, Vec<f64>) {
        let h = p.hidden_size;
        let mut z: Vec<f64> = h_prev.to_vec();
        z.push(x);
        let act = |w: &Mat, b: &[f64], r: usize| -> f64 {
            let mut a = b[r];
            for (c, &zv) in z.iter().enumerate() {
                a += w.row(r)[c] * zv;
            }
            a
        };
        let mut c_new = vec![0.0; h];
        let mut h_new = vec![0.0; h];
        for r in 0..h {
            let f = sigmoid(act(&p.w_f, &p.b_f, r));
            let i = sigmoid(act(&p.w_i, &p.b_i, r));
            let g = act(&p.w_c, &p.b_c, r).tanh();
            let o = sigmoid(act(&p.w_o, &p.b_o, r));
            c_new[r] = f * c_prev[r] + i * g;
            h_new[r] = o * c_new[r].tanh();
        }
        (h_new, c_new)
    }

    #[test]
    fn cell_matches_formula_transcription() {
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let p = init_params(6, 1, 99).unwrap();
        let state = LstmState {
            h: (0..6).map(|_| rng.gen::<f64>() - 0.5).collect(),
            c: (0..6).map(|_| rng.gen::<f64>() - 0.5).collect(),
        };
        let x = rng.gen::<f64>();
        let (next, _) = cell_forward(&p, &state, x).unwrap();
        let (h_ref, c_ref) = reference_cell(&p, &state.h, &state.c, x);
        for k in 0..6 {
            assert!((next.h[k] - h_ref[k]).abs() < 1e-12);
            assert!((next.c[k] - c_ref[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn gate_outputs_stay_in_bounds() {
        let p = init_params(8, 1, 5).unwrap();
        let window: Vec<f64> = (0..12).map(|t| (t as f64 * 0.53).sin() * 0.5 + 0.5).collect();
        let (_, cache) = sequence_forward(&p, &window).unwrap();
        for step in &cache.steps {
            assert!(step.f.iter().all(|&v| v > 0.0 && v < 1.0));
            assert!(step.i.iter().all(|&v| v > 0.0 && v < 1.0));
            assert!(step.o.iter().all(|&v| v > 0.0 && v < 1.0));
            assert!(step.g.iter().all(|&v| v > -1.0 && v < 1.0));
        }
        assert!(cache.h_last.iter().all(|&v| v.abs() < 1.0));
    }

    #[test]
    fn sequence_forward_zero_params_gives_bias() {
        let p = LstmParams::zeros(4, 1);
        let (pred, _) = sequence_forward(&p, &[0.3, 0.9, 0.1]).unwrap();
        assert_eq!(pred, 0.0);
        assert!(sequence_forward(&p, &[]).is_err());
    }

    #[test]
    fn sequence_forward_length_one_equals_cell_plus_head() {
        let p = init_params(5, 1, 17).unwrap();
        let (pred, _) = sequence_forward(&p, &[0.42]).unwrap();
        let (state, _) = cell_forward(&p, &LstmState::zeros(5), 0.42).unwrap();
        let manual = dot(&p.w_fc, &state.h) + p.b_fc;
        assert_eq!(pred, manual);
    }

    #[test]
    fn sequence_forward_equals_manual_composition() {
        let p = init_params(7, 1, 23).unwrap();
        let window: Vec<f64> = (0..12).map(|t| ((t * t) as f64 * 0.17).fract()).collect();
        let (pred, _) = sequence_forward(&p, &window).unwrap();
        let mut state = LstmState::zeros(7);
        for &x in &window {
            let (next, _) = cell_forward(&p, &state, x).unwrap();
            state = next;
        }
        let manual = dot(&p.w_fc, &state.h) + p.b_fc;
        assert_eq!(pred, manual);
    }

    #[test]
    fn order_sensitivity() {
        let p = init_params(6, 1, 31).unwrap();
        let fwd = [0.1, 0.9, 0.2, 0.8];
        let rev = [0.8, 0.2, 0.9, 0.1];
        let (a, _) = sequence_forward(&p, &fwd).unwrap();
        let (b, _) = sequence_forward(&p, &rev).unwrap();
        assert!((a - b).abs() > 1e-9);
    }

    #[test]
    fn backward_zero_seed_and_head_bias() {
        let p = init_params(4, 1, 3).unwrap();
        let (_, cache) = sequence_forward(&p, &[0.2, 0.4]).unwrap();
        let g0 = backward(&p, &cache, 0.0).unwrap();
        assert!(g0.w_f.data().iter().all(|&v| v == 0.0));
        assert_eq!(g0.b_fc, 0.0);
        let g1 = backward(&p, &cache, 1.7).unwrap();
        assert_eq!(g1.b_fc, 1.7);
    }

    #[test]
    fn backward_rejects_mismatched_cache() {
        let p4 = init_params(4, 1, 3).unwrap();
        let p5 = init_params(5, 1, 3).unwrap();
        let (_, cache) = sequence_forward(&p4, &[0.2, 0.4]).unwrap();
        assert!(backward(&p5, &cache, 1.0).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        for &hidden in &[2usize, 8] {
            let p = init_params(hidden, 1, 1234 + hidden as u64).unwrap();
            let window: Vec<f64> = (0..5).map(|t| ((t as f64) * 0.71).sin() * 0.4 + 0.5).collect();
            let err =
                gradient_check(&p, &window, LossKind::SquaredError { target: 0.3 }, 1e-5).unwrap();
            assert!(err < 1e-4, "hidden {hidden}: rel err {err}");
        }
    }

    #[test]
    fn gradient_check_zero_params() {
        let p = LstmParams::zeros(3, 1);
        let err = gradient_check(&p, &[0.5, 0.1, 0.9], LossKind::Prediction, 1e-5).unwrap();
        assert!(err < 1e-6, "rel err {err}");
    }
}
