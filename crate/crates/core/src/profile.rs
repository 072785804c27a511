//! Core domain types: sound speed profiles, depth layer schemes, layered
//! time series, and linear depth resampling/interpolation.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One (depth, speed) measurement point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthSample {
    /// Depth below the surface in meters.
    pub depth: f64,
    /// Sound speed in meters per second.
    pub speed: f64,
}

impl DepthSample {
    pub fn new(depth: f64, speed: f64) -> Result<Self> {
        if !depth.is_finite() || depth < 0.0 {
            return Err(Error::invalid(format!("depth must be finite and >= 0, got {depth}")));
        }
        if !speed.is_finite() || speed <= 0.0 {
            return Err(Error::invalid(format!("speed must be finite and > 0, got {speed}")));
        }
        Ok(DepthSample { depth, speed })
    }
}

/// A timestamped depth→speed curve, either a raw measurement or a prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoundSpeedProfile {
    /// Epoch seconds.
    pub timestamp: i64,
    pub samples: Vec<DepthSample>,
}

impl SoundSpeedProfile {
    pub fn new(timestamp: i64, samples: Vec<DepthSample>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("profile must contain at least one sample"));
        }
        for pair in samples.windows(2) {
            if pair[1].depth <= pair[0].depth {
                return Err(Error::invalid(format!(
                    "profile depths must be strictly increasing ({} then {})",
                    pair[0].depth, pair[1].depth
                )));
            }
        }
        Ok(SoundSpeedProfile { timestamp, samples })
    }

    pub fn depths(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.depth).collect()
    }

    pub fn speeds(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.speed).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    EqualInterval,
    UnequalInterval,
}

/// The ordered depth grid defining the hierarchical layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerScheme {
    depths: Vec<f64>,
    kind: SchemeKind,
}

impl LayerScheme {
    pub fn new(depths: Vec<f64>, kind: SchemeKind) -> Result<Self> {
        if depths.len() < 2 {
            return Err(Error::invalid("layer scheme needs at least 2 depths"));
        }
        for pair in depths.windows(2) {
            if !pair[0].is_finite() || !pair[1].is_finite() || pair[1] <= pair[0] {
                return Err(Error::invalid("scheme depths must be finite and strictly increasing"));
            }
        }
        if kind == SchemeKind::EqualInterval {
            let step = depths[1] - depths[0];
            for pair in depths.windows(2) {
                let d = pair[1] - pair[0];
                if (d - step).abs() > 1e-9 * step.abs().max(1.0) {
                    return Err(Error::invalid(
                        "equal-interval scheme has unequal consecutive depth steps",
                    ));
                }
            }
        }
        Ok(LayerScheme { depths, kind })
    }

    pub fn equal_interval(depths: Vec<f64>) -> Result<Self> {
        Self::new(depths, SchemeKind::EqualInterval)
    }

    pub fn unequal_interval(depths: Vec<f64>) -> Result<Self> {
        Self::new(depths, SchemeKind::UnequalInterval)
    }

    pub fn depths(&self) -> &[f64] {
        &self.depths
    }

    pub fn kind(&self) -> SchemeKind {
        self.kind
    }

    pub fn layer_count(&self) -> usize {
        self.depths.len()
    }
}

/// The layered time series: speeds indexed by (depth layer, time step).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayeredSeries {
    scheme: LayerScheme,
    timestamps: Vec<i64>,
    /// Row per layer, column per time step.
    values: Vec<Vec<f64>>,
}

impl LayeredSeries {
    pub fn new(scheme: LayerScheme, timestamps: Vec<i64>, values: Vec<Vec<f64>>) -> Result<Self> {
        for pair in timestamps.windows(2) {
            if pair[1] <= pair[0] {
                return Err(Error::invalid("timestamps must be strictly increasing"));
            }
        }
        if values.len() != scheme.layer_count() {
            return Err(Error::invalid(format!(
                "value matrix has {} rows but scheme has {} layers",
                values.len(),
                scheme.layer_count()
            )));
        }
        for row in &values {
            if row.len() != timestamps.len() {
                return Err(Error::invalid("matrix row length must equal timestamp count"));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("matrix entries must all be finite"));
            }
        }
        Ok(LayeredSeries { scheme, timestamps, values })
    }

    pub fn scheme(&self) -> &LayerScheme {
        &self.scheme
    }

    pub fn timestamps(&self) -> &[i64] {
        &self.timestamps
    }

    pub fn layer_count(&self) -> usize {
        self.values.len()
    }

    pub fn time_count(&self) -> usize {
        self.timestamps.len()
    }

    pub fn layer_row(&self, layer: usize) -> &[f64] {
        &self.values[layer]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.values
    }
}

/// Linear interpolation with endpoint clamping on a strictly increasing grid.
pub(crate) fn lerp_clamped(xs: &[f64], ys: &[f64], q: f64) -> f64 {
    debug_assert_eq!(xs.len(), ys.len());
    if q <= xs[0] {
        return ys[0];
    }
    if q >= xs[xs.len() - 1] {
        return ys[ys.len() - 1];
    }
    // binary search for the bracketing segment
    let idx = xs.partition_point(|&x| x <= q);
    let (x0, x1) = (xs[idx - 1], xs[idx]);
    let (y0, y1) = (ys[idx - 1], ys[idx]);
    y0 + (y1 - y0) * (q - x0) / (x1 - x0)
}

/// Resamples a profile onto the scheme depths by linear interpolation,
/// clamping depths outside the profile's range to the nearest endpoint value.
pub fn resample_profile(profile: &SoundSpeedProfile, scheme: &LayerScheme) -> Result<Vec<f64>> {
    if profile.samples.is_empty() {
        return Err(Error::invalid("cannot resample an empty profile"));
    }
    let depths = profile.depths();
    let speeds = profile.speeds();
    Ok(scheme.depths().iter().map(|&d| lerp_clamped(&depths, &speeds, d)).collect())
}

/// Stacks resampled profiles into the layered matrix, column per time step.
pub fn build_series(profiles: &[SoundSpeedProfile], scheme: &LayerScheme) -> Result<LayeredSeries> {
    if profiles.len() < 2 {
        return Err(Error::invalid("need at least 2 profiles to build a series"));
    }
    for pair in profiles.windows(2) {
        if pair[1].timestamp <= pair[0].timestamp {
            return Err(Error::invalid("profile timestamps must be strictly increasing"));
        }
    }
    let timestamps: Vec<i64> = profiles.iter().map(|p| p.timestamp).collect();
    let mut values = vec![vec![0.0; profiles.len()]; scheme.layer_count()];
    for (t, profile) in profiles.iter().enumerate() {
        let col = resample_profile(profile, scheme)?;
        for (layer, v) in col.into_iter().enumerate() {
            values[layer][t] = v;
        }
    }
    LayeredSeries::new(scheme.clone(), timestamps, values)
}

/// Assembles layered values into a full-depth profile on the query grid.
pub fn interpolate_full_depth(
    layer_values: &[f64],
    scheme: &LayerScheme,
    query_depths: &[f64],
    timestamp: i64,
) -> Result<SoundSpeedProfile> {
    if layer_values.len() != scheme.layer_count() {
        return Err(Error::invalid(format!(
            "got {} layer values for a {}-layer scheme",
            layer_values.len(),
            scheme.layer_count()
        )));
    }
    if query_depths.is_empty() {
        return Err(Error::invalid("query depth list is empty"));
    }
    for pair in query_depths.windows(2) {
        if pair[1] <= pair[0] {
            return Err(Error::invalid("query depths must be strictly increasing"));
        }
    }
    let samples = query_depths
        .iter()
        .map(|&d| {
            let speed = lerp_clamped(scheme.depths(), layer_values, d);
            DepthSample::new(d.max(0.0), speed)
        })
        .collect::<Result<Vec<_>>>()?;
    SoundSpeedProfile::new(timestamp, samples)
}

// ---------------------------------------------------------------------------
// File formats: profile CSV and dataset manifest JSON.
// ---------------------------------------------------------------------------

/// Dataset manifest: layer scheme plus an ordered list of profile files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub scheme_depths: Vec<f64>,
    pub scheme_kind: SchemeKind,
    pub profiles: Vec<PathBuf>,
}

impl DatasetManifest {
    pub fn scheme(&self) -> Result<LayerScheme> {
        LayerScheme::new(self.scheme_depths.clone(), self.scheme_kind)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Parse(format!("manifest encode: {e}")))?;
        fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Parse(format!("manifest {}: {e}", path.display())))
    }

    /// Loads every listed profile (paths resolved relative to the manifest).
    pub fn load_profiles(&self, manifest_path: &Path) -> Result<Vec<SoundSpeedProfile>> {
        let base = manifest_path.parent().unwrap_or(Path::new("."));
        self.profiles
            .iter()
            .map(|rel| {
                let p = if rel.is_absolute() { rel.clone() } else { base.join(rel) };
                read_profile_csv(&p)
            })
            .collect()
    }
}

/// Writes the profile CSV: a `# timestamp=<epoch>` comment line, a header,
/// then one `depth,speed` row per sample.
pub fn write_profile_csv(profile: &SoundSpeedProfile, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("# timestamp={}\n", profile.timestamp));
    out.push_str("depth_m,speed_mps\n");
    for s in &profile.samples {
        out.push_str(&format!("{:?},{:?}\n", s.depth, s.speed));
    }
    let mut f = fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}

pub fn read_profile_csv(path: &Path) -> Result<SoundSpeedProfile> {
    let text = fs::read_to_string(path)?;
    parse_profile_csv(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn parse_profile_csv(text: &str) -> std::result::Result<SoundSpeedProfile, String> {
    let mut lines = text.lines();
    let first = lines.next().ok_or("empty file")?;
    let ts_str = first
        .strip_prefix("# timestamp=")
        .ok_or("first line must be `# timestamp=<epoch_seconds>`")?;
    let timestamp: i64 = ts_str.trim().parse().map_err(|e| format!("bad timestamp: {e}"))?;
    let header = lines.next().ok_or("missing header line")?;
    if header.trim() != "depth_m,speed_mps" {
        return Err(format!("unexpected header {header:?}"));
    }
    let mut samples = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (d, s) = line.split_once(',').ok_or_else(|| format!("row {}: missing comma", i + 3))?;
        let depth: f64 = d.trim().parse().map_err(|e| format!("row {}: {e}", i + 3))?;
        let speed: f64 = s.trim().parse().map_err(|e| format!("row {}: {e}", i + 3))?;
        samples.push(DepthSample::new(depth, speed).map_err(|e| e.to_string())?);
    }
    SoundSpeedProfile::new(timestamp, samples).map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(ts: i64, pts: &[(f64, f64)]) -> SoundSpeedProfile {
        SoundSpeedProfile::new(
            ts,
            pts.iter().map(|&(d, s)| DepthSample::new(d, s).unwrap()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn resample_linear_midpoint() {
        let p = profile(0, &[(0.0, 1500.0), (10.0, 1510.0)]);
        let scheme = LayerScheme::unequal_interval(vec![0.0, 5.0]).unwrap();
        let v = resample_profile(&p, &scheme).unwrap();
        assert_eq!(v, vec![1500.0, 1505.0]);
    }

    #[test]
    fn resample_clamps_beyond_range() {
        let p = profile(0, &[(0.0, 1500.0), (10.0, 1510.0)]);
        let scheme = LayerScheme::unequal_interval(vec![5.0, 20.0]).unwrap();
        let v = resample_profile(&p, &scheme).unwrap();
        assert_eq!(v[1], 1510.0);
    }

    /// Brute-force segment-search interpolator, kept independent of
    /// `lerp_clamped`'s binary search.
    fn brute_force_interp(xs: &[f64], ys: &[f64], q: f64) -> f64 {
        if q <= xs[0] {
            return ys[0];
        }
        if q >= xs[xs.len() - 1] {
            return ys[ys.len() - 1];
        }
        for i in 0..xs.len() - 1 {
            if q >= xs[i] && q <= xs[i + 1] {
                let t = (q - xs[i]) / (xs[i + 1] - xs[i]);
                return ys[i] + t * (ys[i + 1] - ys[i]);
            }
        }
        unreachable!()
    }

    #[test]
    fn resample_matches_brute_force_on_random_profile() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        // 30-knot piecewise-linear profile
        let mut depth = 0.0;
        let mut pts = Vec::new();
        for _ in 0..30 {
            pts.push((depth, 1480.0 + rng.gen::<f64>() * 60.0));
            depth += 1.0 + rng.gen::<f64>() * 80.0;
        }
        let p = profile(0, &pts);
        let scheme_depths: Vec<f64> = (0..58).map(|i| i as f64 * 34.0).collect();
        let scheme = LayerScheme::unequal_interval(scheme_depths.clone()).unwrap();
        let got = resample_profile(&p, &scheme).unwrap();
        let xs = p.depths();
        let ys = p.speeds();
        for (i, &d) in scheme_depths.iter().enumerate() {
            assert_eq!(got[i], brute_force_interp(&xs, &ys, d), "depth {d}");
        }
    }

    #[test]
    fn build_series_stacks_columns() {
        let p0 = profile(0, &[(0.0, 1500.0), (100.0, 1490.0)]);
        let p1 = profile(100, &[(0.0, 1502.0), (100.0, 1492.0)]);
        let scheme = LayerScheme::unequal_interval(vec![0.0, 50.0, 100.0]).unwrap();
        let s = build_series(&[p0.clone(), p1.clone()], &scheme).unwrap();
        assert_eq!(s.layer_count(), 3);
        assert_eq!(s.time_count(), 2);
        let c0 = resample_profile(&p0, &scheme).unwrap();
        let c1 = resample_profile(&p1, &scheme).unwrap();
        for layer in 0..3 {
            assert_eq!(s.layer_row(layer)[0], c0[layer]);
            assert_eq!(s.layer_row(layer)[1], c1[layer]);
        }
    }

    #[test]
    fn build_series_rejects_single_profile() {
        let p0 = profile(0, &[(0.0, 1500.0), (100.0, 1490.0)]);
        let scheme = LayerScheme::unequal_interval(vec![0.0, 100.0]).unwrap();
        assert!(build_series(&[p0], &scheme).is_err());
    }

    #[test]
    fn build_series_rejects_unsorted_timestamps() {
        let p0 = profile(100, &[(0.0, 1500.0), (100.0, 1490.0)]);
        let p1 = profile(100, &[(0.0, 1502.0), (100.0, 1492.0)]);
        assert!(build_series(
            &[p0, p1],
            &LayerScheme::unequal_interval(vec![0.0, 100.0]).unwrap()
        )
        .is_err());
    }

    #[test]
    fn interpolate_midpoint_and_knot_identity() {
        let scheme = LayerScheme::unequal_interval(vec![0.0, 100.0]).unwrap();
        let p = interpolate_full_depth(&[1500.0, 1520.0], &scheme, &[50.0], 0).unwrap();
        assert_eq!(p.samples[0].speed, 1510.0);

        let p = interpolate_full_depth(&[1500.0, 1520.0], &scheme, &[0.0, 100.0], 0).unwrap();
        assert_eq!(p.speeds(), vec![1500.0, 1520.0]);
    }

    #[test]
    fn interpolate_rejects_length_mismatch() {
        let scheme = LayerScheme::unequal_interval(vec![0.0, 100.0]).unwrap();
        assert!(interpolate_full_depth(&[1500.0], &scheme, &[50.0], 0).is_err());
    }

    #[test]
    fn interpolate_matches_brute_force_on_meter_grid() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let depths: Vec<f64> = (0..20).map(|i| i as f64 * 13.5).collect();
        let scheme = LayerScheme::unequal_interval(depths.clone()).unwrap();
        let values: Vec<f64> = (0..20).map(|_| 1480.0 + rng.gen::<f64>() * 60.0).collect();
        let grid: Vec<f64> = (0..260).map(|i| i as f64).collect();
        let p = interpolate_full_depth(&values, &scheme, &grid, 0).unwrap();
        for (i, &q) in grid.iter().enumerate() {
            let expect = brute_force_interp(&depths, &values, q);
            assert!((p.samples[i].speed - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn profile_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        let p = profile(1609459200, &[(0.0, 1520.25), (1975.0, 1492.125)]);
        write_profile_csv(&p, &path).unwrap();
        let back = read_profile_csv(&path).unwrap();
        assert_eq!(p, back);
    }
}
