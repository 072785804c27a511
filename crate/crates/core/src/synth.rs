//! Deterministic synthetic generator of seasonal depth-layered profile
//! series, used for desk-scale experiments and the test suite.

use chrono::{Datelike, NaiveDate};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::{
    build_series, DepthSample, LayerScheme, LayeredSeries, SoundSpeedProfile,
};

/// Piecewise-linear anchors of a canonical deep-ocean speed curve:
/// warm fast surface water, a sound channel minimum near 1000 m, and a
/// pressure-driven rise below it.
pub const DEFAULT_BASE_ANCHORS: &[(f64, f64)] = &[
    (0.0, 1520.0),
    (100.0, 1505.0),
    (300.0, 1492.0),
    (600.0, 1484.0),
    (1000.0, 1480.0),
    (1500.0, 1484.0),
    (1975.0, 1490.0),
    (3500.0, 1515.0),
];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthSpec {
    pub scheme: LayerScheme,
    /// Number of time steps (columns).
    pub steps: usize,
    /// (depth, speed) anchors of the base profile, linearly interpolated.
    pub base_anchors: Vec<(f64, f64)>,
    /// Seasonal amplitude at the surface, m/s.
    pub surface_amplitude: f64,
    /// e-folding depth of the seasonal amplitude, meters (f64::INFINITY
    /// keeps the amplitude constant with depth).
    pub amplitude_decay_depth: f64,
    /// Seasonal period in steps.
    pub period: usize,
    /// Linear trend, m/s per step.
    pub trend: f64,
    /// Standard deviation of white measurement noise, m/s.
    pub noise_sigma: f64,
    /// Phase lag per meter of depth, radians (0 by default).
    pub phase_lag_per_meter: f64,
    pub rng_seed: u64,
    /// First month of the series, reported as (year, month).
    pub start_year: i32,
    pub start_month: u32,
}

impl SynthSpec {
    /// Argo-mimicking default: 58 unequal layers denser near the surface,
    /// 60 monthly steps, annual period.
    pub fn argo_mimic() -> Self {
        SynthSpec {
            scheme: argo_mimic_scheme(),
            steps: 60,
            base_anchors: DEFAULT_BASE_ANCHORS.to_vec(),
            surface_amplitude: 5.0,
            amplitude_decay_depth: 300.0,
            period: 12,
            trend: 0.0,
            noise_sigma: 0.0,
            phase_lag_per_meter: 0.0,
            rng_seed: 0,
            start_year: 2017,
            start_month: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.period < 2 {
            return Err(Error::invalid("period must be >= 2 steps"));
        }
        if self.noise_sigma < 0.0 || self.surface_amplitude < 0.0 {
            return Err(Error::invalid("noise sigma and amplitude must be >= 0"));
        }
        if self.steps == 0 {
            return Err(Error::invalid("steps must be >= 1"));
        }
        if self.base_anchors.len() < 2 {
            return Err(Error::invalid("need at least 2 base anchors"));
        }
        if !(1..=12).contains(&self.start_month) {
            return Err(Error::invalid("start month must be 1-12"));
        }
        Ok(())
    }
}

/// 58 depths from the surface to 1975 m, denser where the profile bends.
pub fn argo_mimic_scheme() -> LayerScheme {
    let mut depths = Vec::with_capacity(58);
    let mut d = 0.0;
    while d <= 100.0 {
        depths.push(d);
        d += 10.0; // 0..100: 11 layers
    }
    let mut d = 125.0;
    while d <= 500.0 {
        depths.push(d);
        d += 25.0; // 125..500: 16 layers
    }
    let mut d = 550.0;
    while d <= 1000.0 {
        depths.push(d);
        d += 50.0; // 550..1000: 10 layers
    }
    let mut d = 1075.0;
    while d <= 1975.0 {
        depths.push(d);
        d += 45.0; // 1075..1975: 21 layers
    }
    debug_assert_eq!(depths.len(), 58);
    LayerScheme::unequal_interval(depths).expect("static scheme is valid")
}

/// Epoch seconds of the first second of each month, starting at
/// (start_year, start_month).
pub fn month_start_timestamps(start_year: i32, start_month: u32, count: usize) -> Vec<i64> {
    let mut out = Vec::with_capacity(count);
    let mut date = NaiveDate::from_ymd_opt(start_year, start_month, 1).expect("valid start month");
    for _ in 0..count {
        out.push(date.and_hms_opt(0, 0, 0).unwrap().and_utc().timestamp());
        let (y, m) = if date.month() == 12 { (date.year() + 1, 1) } else { (date.year(), date.month() + 1) };
        date = NaiveDate::from_ymd_opt(y, m, 1).unwrap();
    }
    out
}

fn base_speed(anchors: &[(f64, f64)], depth: f64) -> f64 {
    let xs: Vec<f64> = anchors.iter().map(|a| a.0).collect();
    let ys: Vec<f64> = anchors.iter().map(|a| a.1).collect();
    crate::profile::lerp_clamped(&xs, &ys, depth)
}

/// Noiseless field value at (depth, step).
pub fn clean_value(spec: &SynthSpec, depth: f64, t: usize) -> f64 {
    let amplitude = if spec.amplitude_decay_depth.is_finite() {
        spec.surface_amplitude * (-depth / spec.amplitude_decay_depth).exp()
    } else {
        spec.surface_amplitude
    };
    let phase = spec.phase_lag_per_meter * depth;
    base_speed(&spec.base_anchors, depth)
        + amplitude * (2.0 * std::f64::consts::PI * t as f64 / spec.period as f64 + phase).sin()
        + spec.trend * t as f64
}

/// Generates the profile list and the assembled layered series.
/// Deterministic per seed: noise is drawn in (step, layer) order.
pub fn generate(spec: &SynthSpec) -> Result<(Vec<SoundSpeedProfile>, LayeredSeries)> {
    spec.validate()?;
    let timestamps = month_start_timestamps(spec.start_year, spec.start_month, spec.steps);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let normal = Normal::new(0.0, 1.0).map_err(|e| Error::invalid(e.to_string()))?;

    let mut profiles = Vec::with_capacity(spec.steps);
    for (t, &ts) in timestamps.iter().enumerate() {
        let samples = spec
            .scheme
            .depths()
            .iter()
            .map(|&depth| {
                let noise = if spec.noise_sigma > 0.0 {
                    spec.noise_sigma * normal.sample(&mut rng)
                } else {
                    0.0
                };
                DepthSample::new(depth, clean_value(spec, depth, t) + noise)
            })
            .collect::<Result<Vec<_>>>()?;
        profiles.push(SoundSpeedProfile::new(ts, samples)?);
    }
    let series = build_series(&profiles, &spec.scheme)?;
    Ok((profiles, series))
}
