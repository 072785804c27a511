//! Property tests for the interpolation, normalization, windowing, and
//! RMSE invariants.

use proptest::prelude::*;

use ssp_forecast::normalize::{denormalize_rows, fit_normalizer, normalize};
use ssp_forecast::profile::{
    interpolate_full_depth, resample_profile, DepthSample, LayerScheme, LayeredSeries,
    SoundSpeedProfile,
};
use ssp_forecast::training::{make_windows, rmse};

fn strictly_increasing(start: f64, deltas: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(deltas.len() + 1);
    let mut x = start;
    out.push(x);
    for &d in deltas {
        x += d;
        out.push(x);
    }
    out
}

fn scheme_strategy() -> impl Strategy<Value = LayerScheme> {
    (prop::collection::vec(0.5f64..50.0, 2..20), 0.0f64..10.0).prop_map(|(deltas, start)| {
        LayerScheme::unequal_interval(strictly_increasing(start, &deltas[..deltas.len() - 1]))
            .unwrap()
    })
}

fn profile_strategy() -> impl Strategy<Value = SoundSpeedProfile> {
    (
        prop::collection::vec((0.5f64..80.0, 1450.0f64..1550.0), 2..25),
        0.0f64..5.0,
    )
        .prop_map(|(pairs, start)| {
            let deltas: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let depths = strictly_increasing(start, &deltas[..deltas.len() - 1]);
            let samples = depths
                .iter()
                .zip(&pairs)
                .map(|(&d, p)| DepthSample::new(d, p.1).unwrap())
                .collect();
            SoundSpeedProfile::new(0, samples).unwrap()
        })
}

proptest! {
    /// Interpolation output stays within [min, max] of the layer values,
    /// and out-of-range queries hit the boundary values exactly.
    #[test]
    fn interpolation_bounded_and_clamped(
        scheme in scheme_strategy(),
        speeds in prop::collection::vec(1450.0f64..1550.0, 20),
    ) {
        let values = &speeds[..scheme.layer_count()];
        prop_assume!(values.len() == scheme.layer_count());
        let lo_depth = scheme.depths()[0];
        let hi_depth = *scheme.depths().last().unwrap();
        let grid = vec![
            (lo_depth - 5.0).max(0.0),
            lo_depth + 0.3 * (hi_depth - lo_depth),
            lo_depth + 0.7 * (hi_depth - lo_depth),
            hi_depth + 10.0,
        ];
        let p = interpolate_full_depth(values, &scheme, &grid, 0).unwrap();
        let vmin = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let vmax = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for s in &p.samples {
            prop_assert!(s.speed >= vmin - 1e-9 && s.speed <= vmax + 1e-9);
        }
        if lo_depth > 5.0 {
            prop_assert_eq!(p.samples[0].speed, values[0]);
        }
        prop_assert_eq!(p.samples.last().unwrap().speed, *values.last().unwrap());
    }

    /// Resampling a profile onto its own sample depths reproduces it, and
    /// re-assembly through interpolation is the identity at those knots.
    #[test]
    fn resample_then_interpolate_round_trip(profile in profile_strategy()) {
        let scheme = LayerScheme::unequal_interval(profile.depths()).unwrap();
        let values = resample_profile(&profile, &scheme).unwrap();
        prop_assert_eq!(&values, &profile.speeds());
        let back = interpolate_full_depth(&values, &scheme, &profile.depths(), 0).unwrap();
        prop_assert_eq!(back.speeds(), profile.speeds());
    }

    /// normalize maps into [0,1] on the fitted series, denormalize inverts
    /// within 1e-12, and each layer's mapping ignores other layers.
    #[test]
    fn normalization_round_trip_and_independence(
        rows in prop::collection::vec(prop::collection::vec(1400.0f64..1600.0, 5..30), 2..10),
        len in 5usize..30,
    ) {
        let rows: Vec<Vec<f64>> = rows.iter().map(|r| {
            r.iter().cycle().take(len).cloned().collect()
        }).collect();
        let depths: Vec<f64> = (0..rows.len()).map(|i| i as f64 * 10.0).collect();
        let scheme = LayerScheme::unequal_interval(depths).unwrap();
        let series = LayeredSeries::new(scheme.clone(), (0..len as i64).collect(), rows.clone()).unwrap();
        let params = fit_normalizer(&series);
        let normalized = normalize(&series, &params).unwrap();
        for layer in 0..series.layer_count() {
            for &v in normalized.layer_row(layer) {
                prop_assert!((-1e-12..=1.0 + 1e-12).contains(&v));
            }
        }
        let back = denormalize_rows(normalized.rows(), &params).unwrap();
        for layer in 0..series.layer_count() {
            for t in 0..len {
                prop_assert!((back[layer][t] - rows[layer][t]).abs() < 1e-12);
            }
        }

        // layer independence: replacing other layers' rows does not change
        // layer 0's normalized values
        let mut other = rows.clone();
        for row in other.iter_mut().skip(1) {
            for v in row.iter_mut() {
                *v += 7.0;
            }
        }
        let series2 = LayeredSeries::new(scheme, (0..len as i64).collect(), other).unwrap();
        let normalized2 = normalize(&series2, &params).unwrap();
        prop_assert_eq!(normalized.layer_row(0), normalized2.layer_row(0));
    }

    /// rmse: symmetric, non-negative, zero iff equal, scale-covariant.
    #[test]
    fn rmse_properties(
        pairs in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 1..40),
        alpha in -5.0f64..5.0,
    ) {
        let p: Vec<f64> = pairs.iter().map(|x| x.0).collect();
        let a: Vec<f64> = pairs.iter().map(|x| x.1).collect();
        let e = rmse(&p, &a).unwrap();
        prop_assert!(e >= 0.0);
        prop_assert_eq!(e, rmse(&a, &p).unwrap());
        prop_assert_eq!(rmse(&p, &p).unwrap(), 0.0);
        let ps: Vec<f64> = p.iter().map(|v| v * alpha).collect();
        let as_: Vec<f64> = a.iter().map(|v| v * alpha).collect();
        prop_assert!((rmse(&ps, &as_).unwrap() - alpha.abs() * e).abs() < 1e-9);
        if e == 0.0 {
            prop_assert_eq!(&p, &a);
        }
    }

    /// Windows and targets reconstruct the original row.
    #[test]
    fn windows_reconstruct(
        row in prop::collection::vec(0.0f64..1.0, 3..40),
        w_frac in 0.01f64..0.99,
    ) {
        let w = ((row.len() as f64 * w_frac) as usize).clamp(1, row.len() - 1);
        let pairs = make_windows(&row, w).unwrap();
        prop_assert_eq!(pairs.len(), row.len() - w);
        let mut rebuilt = pairs[0].0.clone();
        for (_, t) in &pairs {
            rebuilt.push(*t);
        }
        prop_assert_eq!(rebuilt, row);
    }
}
