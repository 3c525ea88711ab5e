//! Thin command-line front end. All logic lives in the library; each
//! subcommand parses arguments, calls one harness entry point, and writes
//! files or JSON to standard output.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use driftfuzz::error::{Error, Result};
use driftfuzz::gbdt::GbdtParams;
use driftfuzz::harness::{
    correlation_to_baseline, detect_with_model, experiment_preset, run_ablation,
    run_distance_benchmark, ConfigId, PipelineConfig,
};
use driftfuzz::io::{read_observations_path, write_observations_path};
use driftfuzz::mdl::{train_masked_distance, DistanceModel, MdlOptions};
use driftfuzz::report::{emit_benchmark, emit_curves, render_benchmark, render_curves, ReportFormat};
use driftfuzz::rng::RandomSource;
use driftfuzz::synth::{
    apply_drift, benchmark_rates, generate, inject_mcar, DistributionSpec, DriftKind, DriftSpec,
    Family,
};

#[derive(Parser)]
#[command(
    name = "driftfuzz",
    version,
    about = "Drift detection for data streams with missing values"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a reference/test window pair as CSV plus a JSON manifest.
    Synth {
        /// Distribution family: uniform | gaussian | exponential | poisson | categorical.
        #[arg(long, default_value = "gaussian")]
        family: String,
        /// Drift family applied to the test window (implies the family).
        #[arg(long)]
        drift: Option<String>,
        /// Drift severity level 0..=10.
        #[arg(long, default_value_t = 0)]
        severity: u8,
        /// Rows per window.
        #[arg(long, default_value_t = 1000)]
        rows: usize,
        /// Dimensions; defaults to the family's benchmark dimensionality.
        #[arg(long)]
        dims: Option<usize>,
        /// Inject the benchmark MCAR pattern (20% on the first half of the
        /// dimensions) into both windows.
        #[arg(long)]
        mcar: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory for ref.csv, test.csv, manifest.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a masked distance model on a CSV window.
    MdlTrain {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        trees: usize,
        #[arg(long, default_value_t = 3)]
        depth: usize,
        #[arg(long, default_value_t = 0.1)]
        learning_rate: f64,
        #[arg(long, default_value_t = 5)]
        min_leaf: usize,
        #[arg(long, default_value_t = 1.0)]
        subsample: f64,
        #[arg(long, default_value_t = 5)]
        n_split: usize,
        #[arg(long, default_value_t = 20_000)]
        max_pairs: usize,
    },
    /// Test a window pair for drift; exits 0 (no drift), 1 (drift), 2 (error).
    Detect {
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        test: PathBuf,
        /// Pipeline configuration JSON.
        #[arg(long)]
        config: PathBuf,
        /// Pretrained distance model JSON (skips training).
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Severity sweep over seeded trials; writes curves and correlations.
    Ablation {
        #[arg(long)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated severity levels.
        #[arg(long, default_value = "0,1,2,3,4,5,6,7,8,9,10")]
        levels: String,
        /// Comma-separated drift kinds.
        #[arg(long, default_value = "gaussian_mean")]
        kinds: String,
        /// Comma-separated strategies; `all` expands to every strategy.
        #[arg(long, default_value = "all")]
        configs: String,
        #[arg(long, default_value_t = 1000)]
        rows: usize,
    },
    /// Distance-estimation benchmark of the imputer pool vs. the model.
    Distbench {
        #[arg(long)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated families; `all` expands to every family.
        #[arg(long, default_value = "all")]
        families: String,
    },
    /// Re-render a curves or benchmark JSON file in another format.
    Report {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        format: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_family(s: &str) -> Result<Family> {
    match s {
        "uniform" => Ok(Family::Uniform),
        "gaussian" => Ok(Family::Gaussian),
        "exponential" => Ok(Family::Exponential),
        "poisson" => Ok(Family::Poisson),
        "categorical" => Ok(Family::Categorical),
        other => Err(Error::InvalidParameter(format!("unknown family `{other}`"))),
    }
}

fn parse_kind(s: &str) -> Result<DriftKind> {
    DriftKind::all()
        .into_iter()
        .find(|k| k.name() == s)
        .ok_or_else(|| Error::InvalidParameter(format!("unknown drift kind `{s}`")))
}

fn parse_config_id(s: &str) -> Result<ConfigId> {
    ConfigId::all()
        .into_iter()
        .find(|c| c.name() == s)
        .ok_or_else(|| Error::InvalidParameter(format!("unknown config `{s}`")))
}

fn parse_list<T>(s: &str, parse: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(parse)
        .collect()
}

#[derive(Serialize)]
struct SynthManifest {
    family: String,
    dims: usize,
    rows: usize,
    seed: u64,
    spec: DistributionSpec,
    drift: Option<DriftSpec>,
    mcar_rates: Option<Vec<f64>>,
}

fn cmd_synth(
    family: String,
    drift: Option<String>,
    severity: u8,
    rows: usize,
    dims: Option<usize>,
    mcar: bool,
    seed: u64,
    out: PathBuf,
) -> Result<()> {
    let (family, drift_spec) = match &drift {
        Some(kind_name) => {
            let kind = parse_kind(kind_name)?;
            (kind.family(), Some(DriftSpec::new(kind, severity)?))
        }
        None => {
            if severity != 0 {
                return Err(Error::InvalidParameter(
                    "--severity needs --drift".into(),
                ));
            }
            (parse_family(&family)?, None)
        }
    };
    let dims = dims.unwrap_or_else(|| family.benchmark_dims());
    let src = RandomSource::new(seed);
    let spec = DistributionSpec::sample(family, dims, &src.child(0))?;
    let drifted = match &drift_spec {
        Some(d) => apply_drift(&spec, d)?,
        None => spec.clone(),
    };
    let mut reference = generate(&spec, rows, &src.child(1))?;
    let mut test = generate(&drifted, rows, &src.child(2))?;
    let rates = mcar.then(|| benchmark_rates(family));
    if let Some(r) = &rates {
        reference = inject_mcar(&reference, r, &src.child(3))?;
        test = inject_mcar(&test, r, &src.child(4))?;
    }

    std::fs::create_dir_all(&out)?;
    write_observations_path(&reference, out.join("ref.csv"))?;
    write_observations_path(&test, out.join("test.csv"))?;
    let manifest = SynthManifest {
        family: family.name().into(),
        dims,
        rows,
        seed,
        spec,
        drift: drift_spec,
        mcar_rates: rates.map(|r| r.rates().to_vec()),
    };
    std::fs::write(
        out.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)? + "\n",
    )?;
    println!("wrote {}", out.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_mdl_train(
    input: PathBuf,
    out: PathBuf,
    seed: u64,
    trees: usize,
    depth: usize,
    learning_rate: f64,
    min_leaf: usize,
    subsample: f64,
    n_split: usize,
    max_pairs: usize,
) -> Result<()> {
    let data = read_observations_path(&input)?;
    let options = MdlOptions {
        n_split,
        max_pairs,
        gbdt: GbdtParams {
            n_trees: trees,
            max_depth: depth,
            learning_rate,
            min_samples_leaf: min_leaf,
            feature_subsample: subsample,
        },
    };
    let model = train_masked_distance(
        &data,
        &driftfuzz::impute::default_pool(),
        &options,
        &RandomSource::new(seed),
    )?;
    std::fs::write(&out, serde_json::to_string(&model)? + "\n")?;
    eprintln!(
        "trained on {} rows, sigma_mask = {:.6}",
        data.n_rows(),
        model.sigma_mask
    );
    Ok(())
}

fn cmd_detect(
    reference: PathBuf,
    test: PathBuf,
    config: PathBuf,
    model: Option<PathBuf>,
) -> Result<bool> {
    let reference = read_observations_path(&reference)?;
    let test = read_observations_path(&test)?;
    let cfg: PipelineConfig = serde_json::from_str(&std::fs::read_to_string(&config)?)?;
    let pretrained: Option<DistanceModel> = match model {
        Some(path) => Some(serde_json::from_str(&std::fs::read_to_string(&path)?)?),
        None => None,
    };
    let verdict = detect_with_model(&reference, &test, &cfg, pretrained.as_ref())?;
    println!("{}", serde_json::to_string_pretty(&verdict)?);
    Ok(verdict.drift)
}

fn cmd_ablation(
    trials: usize,
    seed: u64,
    out: PathBuf,
    levels: String,
    kinds: String,
    configs: String,
    rows: usize,
) -> Result<()> {
    let levels = parse_list(&levels, |s| {
        s.parse::<u8>()
            .map_err(|_| Error::InvalidParameter(format!("bad level `{s}`")))
    })?;
    let kinds = parse_list(&kinds, parse_kind)?;
    let cfgs: Vec<PipelineConfig> = if configs == "all" {
        ConfigId::all().into_iter().map(experiment_preset).collect()
    } else {
        parse_list(&configs, parse_config_id)?
            .into_iter()
            .map(experiment_preset)
            .collect()
    };
    let curves = run_ablation(&levels, trials, &kinds, &cfgs, seed, rows)?;

    std::fs::create_dir_all(&out)?;
    emit_curves(&curves, ReportFormat::Json, &out.join("curves.json"))?;
    emit_curves(&curves, ReportFormat::Csv, &out.join("curves.csv"))?;
    emit_curves(&curves, ReportFormat::Svg, &out.join("curves.svg"))?;
    match correlation_to_baseline(&curves) {
        Ok(correlations) => std::fs::write(
            out.join("correlations.json"),
            serde_json::to_string_pretty(&correlations)? + "\n",
        )?,
        Err(e) => log::warn!("no baseline correlations: {e}"),
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_distbench(trials: usize, seed: u64, out: PathBuf, families: String) -> Result<()> {
    let families: Vec<Family> = if families == "all" {
        vec![
            Family::Uniform,
            Family::Gaussian,
            Family::Exponential,
            Family::Poisson,
            Family::Categorical,
        ]
    } else {
        parse_list(&families, parse_family)?
    };
    let bench = run_distance_benchmark(&families, trials, seed, &MdlOptions::default())?;
    std::fs::create_dir_all(&out)?;
    emit_benchmark(&bench, ReportFormat::Json, &out.join("bench.json"))?;
    emit_benchmark(&bench, ReportFormat::Csv, &out.join("bench.csv"))?;
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_report(input: PathBuf, format: String, out: PathBuf) -> Result<()> {
    let format: ReportFormat = format.parse()?;
    let text = std::fs::read_to_string(&input)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let rendered = if value.is_array() {
        let curves: Vec<driftfuzz::harness::DriftCurve> = serde_json::from_value(value)?;
        render_curves(&curves, format)?
    } else {
        let bench: driftfuzz::harness::DistanceBenchmark = serde_json::from_value(value)?;
        render_benchmark(&bench, format)?
    };
    std::fs::write(&out, rendered)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Synth {
            family,
            drift,
            severity,
            rows,
            dims,
            mcar,
            seed,
            out,
        } => {
            cmd_synth(family, drift, severity, rows, dims, mcar, seed, out)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::MdlTrain {
            input,
            out,
            seed,
            trees,
            depth,
            learning_rate,
            min_leaf,
            subsample,
            n_split,
            max_pairs,
        } => {
            cmd_mdl_train(
                input,
                out,
                seed,
                trees,
                depth,
                learning_rate,
                min_leaf,
                subsample,
                n_split,
                max_pairs,
            )?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Detect {
            reference,
            test,
            config,
            model,
        } => {
            let drift = cmd_detect(reference, test, config, model)?;
            Ok(if drift {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::Ablation {
            trials,
            seed,
            out,
            levels,
            kinds,
            configs,
            rows,
        } => {
            cmd_ablation(trials, seed, out, levels, kinds, configs, rows)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Distbench {
            trials,
            seed,
            out,
            families,
        } => {
            cmd_distbench(trials, seed, out, families)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Report { input, format, out } => {
            cmd_report(input, format, out)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
