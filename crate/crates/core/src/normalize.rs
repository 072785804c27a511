//! Per-layer min-max normalization of the layered series and its exact
//! inverse for de-normalizing predictions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::LayeredSeries;

/// Per-layer (min, max) pairs fitted on the training history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    mins: Vec<f64>,
    maxs: Vec<f64>,
}

impl NormalizationParams {
    pub fn new(mins: Vec<f64>, maxs: Vec<f64>) -> Result<Self> {
        if mins.len() != maxs.len() {
            return Err(Error::invalid("min/max vectors must have equal length"));
        }
        for (lo, hi) in mins.iter().zip(&maxs) {
            if !lo.is_finite() || !hi.is_finite() || lo > hi {
                return Err(Error::invalid("each layer needs finite min <= max"));
            }
        }
        Ok(NormalizationParams { mins, maxs })
    }

    pub fn layer_count(&self) -> usize {
        self.mins.len()
    }

    pub fn layer_min(&self, layer: usize) -> f64 {
        self.mins[layer]
    }

    pub fn layer_max(&self, layer: usize) -> f64 {
        self.maxs[layer]
    }

    /// Maps one raw value of `layer` into [0,1]; constant layers map to 0.5.
    pub fn normalize_value(&self, layer: usize, v: f64) -> f64 {
        let (lo, hi) = (self.mins[layer], self.maxs[layer]);
        if hi == lo {
            0.5
        } else {
            (v - lo) / (hi - lo)
        }
    }

    /// Inverse map; constant layers return the constant regardless of input.
    pub fn denormalize_value(&self, layer: usize, v: f64) -> f64 {
        let (lo, hi) = (self.mins[layer], self.maxs[layer]);
        if hi == lo {
            lo
        } else {
            v * (hi - lo) + lo
        }
    }
}

/// Per-layer extrema over each layer's time row.
pub fn fit_normalizer(series: &LayeredSeries) -> NormalizationParams {
    let mut mins = Vec::with_capacity(series.layer_count());
    let mut maxs = Vec::with_capacity(series.layer_count());
    for layer in 0..series.layer_count() {
        let row = series.layer_row(layer);
        mins.push(row.iter().cloned().fold(f64::INFINITY, f64::min));
        maxs.push(row.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    }
    NormalizationParams { mins, maxs }
}

/// Normalizes every cell of the series into [0,1] per layer.
pub fn normalize(series: &LayeredSeries, params: &NormalizationParams) -> Result<LayeredSeries> {
    if params.layer_count() != series.layer_count() {
        return Err(Error::invalid(format!(
            "normalizer has {} layers, series has {}",
            params.layer_count(),
            series.layer_count()
        )));
    }
    let values = (0..series.layer_count())
        .map(|layer| {
            series.layer_row(layer).iter().map(|&v| params.normalize_value(layer, v)).collect()
        })
        .collect();
    LayeredSeries::new(series.scheme().clone(), series.timestamps().to_vec(), values)
}

/// Inverse of [`normalize`] on a (layer-major) matrix of rows.
pub fn denormalize_rows(rows: &[Vec<f64>], params: &NormalizationParams) -> Result<Vec<Vec<f64>>> {
    if rows.len() != params.layer_count() {
        return Err(Error::invalid(format!(
            "got {} rows for a {}-layer normalizer",
            rows.len(),
            params.layer_count()
        )));
    }
    Ok(rows
        .iter()
        .enumerate()
        .map(|(layer, row)| row.iter().map(|&v| params.denormalize_value(layer, v)).collect())
        .collect())
}

/// Inverse of [`normalize`] on one value per layer.
pub fn denormalize_vector(values: &[f64], params: &NormalizationParams) -> Result<Vec<f64>> {
    if values.len() != params.layer_count() {
        return Err(Error::invalid(format!(
            "got {} values for a {}-layer normalizer",
            values.len(),
            params.layer_count()
        )));
    }
    Ok(values.iter().enumerate().map(|(l, &v)| params.denormalize_value(l, v)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{LayerScheme, LayeredSeries};

    fn series(rows: Vec<Vec<f64>>) -> LayeredSeries {
        let n = rows[0].len();
        let depths: Vec<f64> = (0..rows.len()).map(|i| i as f64 * 10.0).collect();
        let scheme = if rows.len() >= 2 {
            LayerScheme::unequal_interval(depths).unwrap()
        } else {
            LayerScheme::unequal_interval(vec![0.0, 10.0]).unwrap()
        };
        let rows = if rows.len() == 1 {
            vec![rows[0].clone(), rows[0].clone()]
        } else {
            rows
        };
        LayeredSeries::new(scheme, (0..n as i64).collect(), rows).unwrap()
    }

    #[test]
    fn fit_takes_row_extrema() {
        let s = series(vec![vec![1500.0, 1510.0], vec![1490.0, 1480.0]]);
        let p = fit_normalizer(&s);
        assert_eq!((p.layer_min(0), p.layer_max(0)), (1500.0, 1510.0));
        assert_eq!((p.layer_min(1), p.layer_max(1)), (1480.0, 1490.0));
    }

    #[test]
    fn fit_degenerate_constant_row() {
        let s = series(vec![vec![1500.0, 1500.0, 1500.0]]);
        let p = fit_normalizer(&s);
        assert_eq!((p.layer_min(0), p.layer_max(0)), (1500.0, 1500.0));
    }

    #[test]
    fn fit_matches_linear_scan_on_random_matrix() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<Vec<f64>> =
            (0..58).map(|_| (0..60).map(|_| 1450.0 + rng.gen::<f64>() * 100.0).collect()).collect();
        let s = series(rows.clone());
        let p = fit_normalizer(&s);
        for (layer, row) in rows.iter().enumerate() {
            let mut lo = row[0];
            let mut hi = row[0];
            for &v in row {
                if v < lo {
                    lo = v;
                }
                if v > hi {
                    hi = v;
                }
            }
            assert_eq!(p.layer_min(layer), lo);
            assert_eq!(p.layer_max(layer), hi);
        }
    }

    #[test]
    fn normalize_endpoints_and_degenerate() {
        let s = series(vec![vec![1500.0, 1510.0], vec![1490.0, 1490.0]]);
        let p = fit_normalizer(&s);
        let n = normalize(&s, &p).unwrap();
        assert_eq!(n.layer_row(0), &[0.0, 1.0]);
        assert_eq!(n.layer_row(1), &[0.5, 0.5]);
    }

    #[test]
    fn normalize_rejects_layer_count_mismatch() {
        let s = series(vec![vec![1500.0, 1510.0], vec![1490.0, 1480.0]]);
        let p = NormalizationParams::new(vec![0.0], vec![1.0]).unwrap();
        assert!(normalize(&s, &p).is_err());
    }

    #[test]
    fn denormalize_midpoint_and_degenerate() {
        let p = NormalizationParams::new(vec![1500.0, 1500.0], vec![1510.0, 1500.0]).unwrap();
        assert_eq!(p.denormalize_value(0, 0.5), 1505.0);
        assert_eq!(p.denormalize_value(1, 0.73), 1500.0);
    }

    #[test]
    fn round_trip_is_identity_within_1e12() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<Vec<f64>> =
            (0..20).map(|_| (0..40).map(|_| 1450.0 + rng.gen::<f64>() * 100.0).collect()).collect();
        let s = series(rows);
        let p = fit_normalizer(&s);
        let n = normalize(&s, &p).unwrap();
        let back = denormalize_rows(n.rows(), &p).unwrap();
        for layer in 0..s.layer_count() {
            for t in 0..s.time_count() {
                assert!((back[layer][t] - s.layer_row(layer)[t]).abs() < 1e-12);
                assert!(n.layer_row(layer)[t] >= 0.0 && n.layer_row(layer)[t] <= 1.0);
            }
        }
    }

    #[test]
    fn denormalize_matches_direct_formula() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let mins: Vec<f64> = (0..10).map(|_| 1400.0 + rng.gen::<f64>() * 50.0).collect();
        let maxs: Vec<f64> = mins.iter().map(|&m| m + rng.gen::<f64>() * 40.0).collect();
        let p = NormalizationParams::new(mins.clone(), maxs.clone()).unwrap();
        let vals: Vec<f64> = (0..10).map(|_| rng.gen::<f64>() * 2.0 - 0.5).collect();
        let out = denormalize_vector(&vals, &p).unwrap();
        for i in 0..10 {
            let expect = vals[i] * (maxs[i] - mins[i]) + mins[i];
            assert!((out[i] - expect).abs() < 1e-12);
        }
    }
}
