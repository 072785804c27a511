//! Command-line pipeline: dataset generation, training, prediction,
//! evaluation, baseline comparison, and gradient checking.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use ssp_forecast::baselines::{bp_baseline_predict, bp_baseline_train, mean_baseline, poly_baseline};
use ssp_forecast::error::Error;
use ssp_forecast::hierarchy::{self, default_query_grid};
use ssp_forecast::lstm::{self, LossKind};
use ssp_forecast::profile::{read_profile_csv, write_profile_csv, DatasetManifest};
use ssp_forecast::synth::{generate, SynthSpec};
use ssp_forecast::training::{derive_layer_seed, loss_history_csv, rmse};
use ssp_forecast::{LayerScheme, OptimizerKind, TrainConfig};

#[derive(Parser)]
#[command(name = "sspf", about = "Layered sound speed profile forecasting", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic seasonal dataset (profile CSVs + manifest).
    Synth(SynthArgs),
    /// Train one model per depth layer and persist the result.
    Train(TrainArgs),
    /// Forecast future layered and full-depth profiles with a saved model.
    Predict(PredictArgs),
    /// Score a next-step forecast against a held-out truth profile.
    Evaluate(EvaluateArgs),
    /// Run all four methods on identical data and report one RMSE each.
    Compare(CompareArgs),
    /// Verify analytic gradients against finite differences.
    Gradcheck(GradcheckArgs),
}

/// Training knobs shared by `train` and `compare`, loadable from a TOML
/// config file; command-line flags override file values.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    hidden_size: Option<usize>,
    learning_rate: Option<f64>,
    epochs: Option<usize>,
    window_length: Option<usize>,
    optimizer: Option<String>,
    seed: Option<u64>,
    shuffle: Option<bool>,
    workers: Option<usize>,
    horizon: Option<usize>,
    poly_degree: Option<usize>,
    poly_history: Option<usize>,
}

#[derive(Args, Debug, Clone)]
struct TrainFlags {
    /// TOML config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    /// adam or sgd.
    #[arg(long)]
    optimizer: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    shuffle: bool,
    /// Cap on concurrent per-layer training workers.
    #[arg(long)]
    workers: Option<usize>,
}

fn parse_optimizer(name: &str) -> Result<OptimizerKind, Error> {
    match name {
        "adam" => Ok(OptimizerKind::Adam),
        "sgd" => Ok(OptimizerKind::Sgd),
        other => Err(Error::invalid(format!("unknown optimizer {other:?} (adam or sgd)"))),
    }
}

struct ResolvedConfig {
    train: TrainConfig,
    workers: Option<usize>,
    horizon: usize,
    poly_degree: usize,
    poly_history: usize,
}

fn resolve_config(flags: &TrainFlags, horizon_flag: Option<usize>) -> Result<ResolvedConfig, Error> {
    let file: FileConfig = match &flags.config {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            toml::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?
        }
        None => FileConfig::default(),
    };
    let defaults = TrainConfig::default();
    let optimizer = match flags.optimizer.as_deref().or(file.optimizer.as_deref()) {
        Some(name) => parse_optimizer(name)?,
        None => defaults.optimizer,
    };
    let train = TrainConfig {
        hidden_size: flags.hidden.or(file.hidden_size).unwrap_or(defaults.hidden_size),
        learning_rate: flags.lr.or(file.learning_rate).unwrap_or(defaults.learning_rate),
        epochs: flags.epochs.or(file.epochs).unwrap_or(defaults.epochs),
        window_length: flags.window.or(file.window_length).unwrap_or(defaults.window_length),
        optimizer,
        rng_seed: flags.seed.or(file.seed).unwrap_or(defaults.rng_seed),
        shuffle: flags.shuffle || file.shuffle.unwrap_or(false),
    };
    Ok(ResolvedConfig {
        train,
        workers: flags.workers.or(file.workers),
        horizon: horizon_flag.or(file.horizon).unwrap_or(1),
        poly_degree: file.poly_degree.unwrap_or(3),
        poly_history: file.poly_history.unwrap_or(24),
    })
}

/// Writes the fully resolved run configuration next to the outputs.
fn echo_config(out_dir: &Path, resolved: &ResolvedConfig) -> Result<(), Error> {
    let optimizer = match resolved.train.optimizer {
        OptimizerKind::Adam => "adam",
        OptimizerKind::Sgd => "sgd",
    };
    let echo = FileConfig {
        hidden_size: Some(resolved.train.hidden_size),
        learning_rate: Some(resolved.train.learning_rate),
        epochs: Some(resolved.train.epochs),
        window_length: Some(resolved.train.window_length),
        optimizer: Some(optimizer.to_string()),
        seed: Some(resolved.train.rng_seed),
        shuffle: Some(resolved.train.shuffle),
        workers: resolved.workers,
        horizon: Some(resolved.horizon),
        poly_degree: Some(resolved.poly_degree),
        poly_history: Some(resolved.poly_history),
    };
    let text = toml::to_string(&echo).map_err(|e| Error::Parse(e.to_string()))?;
    fs::write(out_dir.join("run_config.toml"), text)?;
    Ok(())
}

fn in_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .expect("thread pool")
            .install(f),
        None => f(),
    }
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory for profile CSVs and manifest.json.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 60)]
    steps: usize,
    /// Seasonal amplitude at the surface, m/s.
    #[arg(long, default_value_t = 5.0)]
    amplitude: f64,
    /// e-folding depth of the seasonal amplitude, meters.
    #[arg(long, default_value_t = 300.0)]
    decay: f64,
    #[arg(long, default_value_t = 12)]
    period: usize,
    /// Linear trend, m/s per step.
    #[arg(long, default_value_t = 0.0)]
    trend: f64,
    /// White noise standard deviation, m/s.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Use an equal-interval scheme with this many layers instead of the
    /// default 58-layer unequal scheme.
    #[arg(long)]
    equal_layers: Option<usize>,
    /// Maximum depth for --equal-layers, meters.
    #[arg(long, default_value_t = 1975.0)]
    max_depth: f64,
}

fn cmd_synth(args: &SynthArgs) -> Result<(), Error> {
    let mut spec = SynthSpec::argo_mimic();
    spec.rng_seed = args.seed;
    spec.steps = args.steps;
    spec.surface_amplitude = args.amplitude;
    spec.amplitude_decay_depth = args.decay;
    spec.period = args.period;
    spec.trend = args.trend;
    spec.noise_sigma = args.noise;
    if let Some(n) = args.equal_layers {
        if n < 2 {
            return Err(Error::invalid("--equal-layers must be >= 2"));
        }
        let step = args.max_depth / (n - 1) as f64;
        let depths = (0..n).map(|i| i as f64 * step).collect();
        spec.scheme = LayerScheme::equal_interval(depths)?;
    }

    let (profiles, series) = generate(&spec)?;
    fs::create_dir_all(&args.out)?;
    let mut names = Vec::with_capacity(profiles.len());
    for (i, p) in profiles.iter().enumerate() {
        let name = format!("profile_{i:03}.csv");
        write_profile_csv(p, &args.out.join(&name))?;
        names.push(PathBuf::from(name));
    }
    let manifest = DatasetManifest {
        scheme_depths: spec.scheme.depths().to_vec(),
        scheme_kind: spec.scheme.kind(),
        profiles: names,
    };
    manifest.save(&args.out.join("manifest.json"))?;
    println!(
        "wrote {} profiles ({} layers, period {}, noise {}) to {}",
        profiles.len(),
        series.layer_count(),
        spec.period,
        spec.noise_sigma,
        args.out.display()
    );
    Ok(())
}

fn load_series(manifest_path: &Path) -> Result<ssp_forecast::LayeredSeries, Error> {
    let manifest = DatasetManifest::load(manifest_path)?;
    let scheme = manifest.scheme()?;
    let profiles = manifest.load_profiles(manifest_path)?;
    ssp_forecast::build_series(&profiles, &scheme)
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Where to write the model file (default <out>/model.json).
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    train: TrainFlags,
}

fn cmd_train(args: &TrainArgs) -> Result<(), Error> {
    let resolved = resolve_config(&args.train, None)?;
    let series = load_series(&args.manifest)?;
    fs::create_dir_all(&args.out)?;
    echo_config(&args.out, &resolved)?;

    let trained =
        in_pool(resolved.workers, || hierarchy::train_hierarchical(&series, &resolved.train))?;
    let model_path = args.model.clone().unwrap_or_else(|| args.out.join("model.json"));
    hierarchy::save_model(&trained.model, &model_path)?;

    for (layer, history) in trained.loss_histories.iter().enumerate() {
        let path = args.out.join(format!("loss_layer_{layer:03}.csv"));
        fs::write(path, loss_history_csv(history))?;
        println!(
            "layer {:3} depth {:7.1} m  final mean loss {:.4e}",
            layer + 1,
            trained.model.scheme.depths()[layer],
            history.last().unwrap()
        );
    }
    println!("model written to {}", model_path.display());
    Ok(())
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    horizon: Option<usize>,
}

fn cmd_predict(args: &PredictArgs) -> Result<(), Error> {
    let model = hierarchy::load_model(&args.model)?;
    let series = load_series(&args.manifest)?;
    let horizon = args.horizon.unwrap_or(1);
    let predicted = hierarchy::predict_multi(&model, &series, horizon)?;

    let grid = default_query_grid(&model.scheme);
    let last_ts = *series.timestamps().last().unwrap();
    let cadence = if series.timestamps().len() >= 2 {
        last_ts - series.timestamps()[series.timestamps().len() - 2]
    } else {
        1
    };
    let profiles = predicted
        .iter()
        .enumerate()
        .map(|(step, row)| {
            ssp_forecast::interpolate_full_depth(
                row,
                &model.scheme,
                &grid,
                last_ts + cadence * (step as i64 + 1),
            )
        })
        .collect::<Result<Vec<_>, _>>()?;

    let report = hierarchy::ForecastReport {
        predicted: predicted.clone(),
        profiles,
        per_layer_rmse: None,
        full_depth_rmse: None,
    };
    fs::create_dir_all(&args.out)?;
    let mut csv = String::from("step,layer,depth_m,predicted\n");
    for (step, row) in predicted.iter().enumerate() {
        for (layer, v) in row.iter().enumerate() {
            csv.push_str(&format!(
                "{},{},{:?},{:?}\n",
                step + 1,
                layer + 1,
                model.scheme.depths()[layer],
                v
            ));
        }
    }
    fs::write(args.out.join("forecast.csv"), csv)?;
    fs::write(args.out.join("forecast.json"), report.to_json()?)?;
    println!("forecast: {} steps x {} layers written to {}", horizon, model.scheme.layer_count(), args.out.display());
    Ok(())
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// Held-out truth profile CSV with a timestamp after the series.
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<(), Error> {
    let model = hierarchy::load_model(&args.model)?;
    let series = load_series(&args.manifest)?;
    let truth = read_profile_csv(&args.truth)?;
    let report = hierarchy::validate(&model, &series, &truth, None)?;

    fs::create_dir_all(&args.out)?;
    let actual = ssp_forecast::resample_profile(&truth, &model.scheme)?;
    fs::write(args.out.join("report.csv"), report.layer_table_csv(&model.scheme, Some(&actual)))?;
    fs::write(args.out.join("report.json"), report.to_json()?)?;
    println!("full-depth RMSE: {:.4} m/s", report.full_depth_rmse.unwrap());
    Ok(())
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Polynomial baseline degree.
    #[arg(long)]
    degree: Option<usize>,
    /// Polynomial baseline history length, samples.
    #[arg(long)]
    history: Option<usize>,
    #[command(flatten)]
    train: TrainFlags,
}

fn full_depth_rmse_of(
    layer_values: &[f64],
    scheme: &LayerScheme,
    truth: &ssp_forecast::SoundSpeedProfile,
) -> Result<f64, Error> {
    let grid = default_query_grid(scheme);
    let pred = ssp_forecast::interpolate_full_depth(layer_values, scheme, &grid, truth.timestamp)?;
    let grid_scheme = LayerScheme::unequal_interval(grid)?;
    let truth_curve = ssp_forecast::resample_profile(truth, &grid_scheme)?;
    rmse(&pred.speeds(), &truth_curve)
}

fn cmd_compare(args: &CompareArgs) -> Result<(), Error> {
    let resolved = resolve_config(&args.train, None)?;
    let degree = args.degree.unwrap_or(resolved.poly_degree);
    let history = args.history.unwrap_or(resolved.poly_history).max(2);
    let series = load_series(&args.manifest)?;
    let truth = read_profile_csv(&args.truth)?;
    if truth.timestamp <= *series.timestamps().last().unwrap() {
        return Err(Error::invalid("truth timestamp must be after the series"));
    }
    fs::create_dir_all(&args.out)?;
    echo_config(&args.out, &resolved)?;

    let scheme = series.scheme().clone();
    let mean_pred = mean_baseline(&series);
    let poly_pred = poly_baseline(&series, degree, history.min(series.time_count()))?;
    let bp = bp_baseline_train(&series, &resolved.train)?;
    let bp_pred = bp_baseline_predict(&bp, &series)?;
    let trained =
        in_pool(resolved.workers, || hierarchy::train_hierarchical(&series, &resolved.train))?;
    let lstm_pred = hierarchy::predict_next(&trained.model, &series)?;

    let rows = [
        ("mean", full_depth_rmse_of(&mean_pred, &scheme, &truth)?),
        ("polynomial", full_depth_rmse_of(&poly_pred, &scheme, &truth)?),
        ("bp", full_depth_rmse_of(&bp_pred, &scheme, &truth)?),
        ("lstm", full_depth_rmse_of(&lstm_pred, &scheme, &truth)?),
    ];
    let mut csv = String::from("method,rmse_mps\n");
    for (name, value) in &rows {
        csv.push_str(&format!("{name},{value:?}\n"));
        println!("{name:>10}: {value:.4} m/s");
    }
    fs::write(args.out.join("compare.csv"), csv)?;
    Ok(())
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Finite-difference step.
    #[arg(long, default_value_t = 1e-5)]
    epsilon: f64,
    /// Fault-injection hook used by the test suite: corrupts the analytic
    /// gradient before comparison so the check must fail.
    #[arg(long, hide = true)]
    inject_fault: bool,
}

fn cmd_gradcheck(args: &GradcheckArgs) -> Result<bool, Error> {
    let mut worst: f64 = 0.0;
    for &hidden in &[2usize, 8, 32] {
        for &window_len in &[3usize, 12] {
            let seed = derive_layer_seed(args.seed, (hidden * 100 + window_len) as u64);
            let params = lstm::init_params(hidden, 1, seed)?;
            let window: Vec<f64> =
                (0..window_len).map(|t| 0.5 + 0.4 * (t as f64 * 0.9 + seed as f64 % 7.0).sin()).collect();
            let err = if args.inject_fault {
                lstm::gradient_check_with_bias(
                    &params,
                    &window,
                    LossKind::SquaredError { target: 0.5 },
                    args.epsilon,
                    1e-2,
                )?
            } else {
                lstm::gradient_check(
                    &params,
                    &window,
                    LossKind::SquaredError { target: 0.5 },
                    args.epsilon,
                )?
            };
            println!("hidden {hidden:3} window {window_len:3}: max relative error {err:.3e}");
            worst = worst.max(err);
        }
    }
    let pass = worst < 1e-4;
    println!("gradcheck {}: max relative error {worst:.3e}", if pass { "PASS" } else { "FAIL" });
    Ok(pass)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help/--version exit cleanly; anything else is a usage error
            let usage_error = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage_error { 1 } else { 0 });
        }
    };
    let result: Result<bool, Error> = match &cli.command {
        Command::Synth(a) => cmd_synth(a).map(|_| true),
        Command::Train(a) => cmd_train(a).map(|_| true),
        Command::Predict(a) => cmd_predict(a).map(|_| true),
        Command::Evaluate(a) => cmd_evaluate(a).map(|_| true),
        Command::Compare(a) => cmd_compare(a).map(|_| true),
        Command::Gradcheck(a) => cmd_gradcheck(a),
    };
    match result {
        Ok(true) => ExitCode::from(0),
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
