//! The end-to-end detector pipeline and the experiment presets.
//!
//! A [`PipelineConfig`] names one detection strategy: plain histograms on
//! complete data, impute-then-histogram, or the distance-model family with
//! crisp or fuzzy weighting. [`detect`] runs a window pair through one
//! strategy; [`run_ablation`] sweeps drift severities over many seeded
//! trials with every strategy seeing bit-identical windows; and
//! [`run_distance_benchmark`] scores the imputers against the distance model
//! on the synthetic benchmark families.
//!
//! Trials are embarrassingly parallel with derived child seeds, so results
//! are reproducible regardless of scheduling. The `DRIFTFUZZ_THREADS`
//! environment variable caps the worker count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

use crate::cluster::{assign_nearest, default_bin_count, kmeans_fit, Partition};
use crate::data::{split_complete_missing, ObservationSet};
use crate::error::{Error, Result};
use crate::fwf::{
    frequency_from_estimates, prepare_window, FrequencyVector, Membership, Weighting,
    WindowEstimates,
};
use crate::gbdt::GbdtParams;
use crate::impute::{default_pool, impute, ImputeMethod};
use crate::mdl::{train_detailed, train_masked_distance, DistanceModel, MdlOptions, TrainReport};
use crate::rng::RandomSource;
use crate::stats::{drift_test, pearson_correlation, DriftVerdict};
use crate::synth::{
    apply_drift, benchmark_rates, generate, inject_mcar, DistributionSpec, DriftKind, DriftSpec,
    Family,
};

/// The detection strategies of the ablation study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfigId {
    /// Crisp histograms on data without missing values.
    Complete,
    /// Impute both windows, then crisp histograms.
    MvImpute,
    /// Distance-model estimates, crisp nearest-bin counting.
    MdlCrisp,
    /// Fuzzy weighting over all bins, Gaussian membership.
    MdlFwfGau,
    /// Fuzzy weighting over all bins, triangular membership.
    MdlFwfTri,
    /// Fuzzy weighting over the Q nearest bins, Gaussian membership.
    MdlFwfGauTopq,
    /// Fuzzy weighting over the Q nearest bins, triangular membership.
    MdlFwfTriTopq,
}

impl ConfigId {
    pub fn name(&self) -> &'static str {
        match self {
            ConfigId::Complete => "complete",
            ConfigId::MvImpute => "mv_impute",
            ConfigId::MdlCrisp => "mdl_crisp",
            ConfigId::MdlFwfGau => "mdl_fwf_gau",
            ConfigId::MdlFwfTri => "mdl_fwf_tri",
            ConfigId::MdlFwfGauTopq => "mdl_fwf_gau_topq",
            ConfigId::MdlFwfTriTopq => "mdl_fwf_tri_topq",
        }
    }

    pub fn all() -> [ConfigId; 7] {
        [
            ConfigId::Complete,
            ConfigId::MvImpute,
            ConfigId::MdlCrisp,
            ConfigId::MdlFwfGau,
            ConfigId::MdlFwfTri,
            ConfigId::MdlFwfGauTopq,
            ConfigId::MdlFwfTriTopq,
        ]
    }

    fn is_mdl_family(&self) -> bool {
        matches!(
            self,
            ConfigId::MdlCrisp
                | ConfigId::MdlFwfGau
                | ConfigId::MdlFwfTri
                | ConfigId::MdlFwfGauTopq
                | ConfigId::MdlFwfTriTopq
        )
    }
}

fn default_q() -> usize {
    3
}
fn default_alpha() -> f64 {
    0.05
}
fn default_imputer() -> ImputeMethod {
    ImputeMethod::iterative(10, 1e-4).expect("valid defaults")
}
fn default_n_split() -> usize {
    5
}
fn default_max_pairs() -> usize {
    20_000
}

/// One detection strategy with its knobs. The JSON representation uses these
/// exact field names (`K` and `Q` capitalized); everything except
/// `config_id` has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub config_id: ConfigId,
    /// Bin count; `None` derives `max(2, m/50)` from the reference window.
    #[serde(rename = "K", default)]
    pub k: Option<usize>,
    /// Top-Q cutoff for the `*_topq` strategies.
    #[serde(rename = "Q", default = "default_q")]
    pub q: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Imputer used by `mv_impute`.
    #[serde(default = "default_imputer")]
    pub imputer: ImputeMethod,
    #[serde(default)]
    pub gbdt: GbdtParams,
    #[serde(default = "default_n_split")]
    pub n_split: usize,
    #[serde(default = "default_max_pairs")]
    pub max_pairs: usize,
    #[serde(default)]
    pub seed: u64,
}

impl PipelineConfig {
    pub fn new(config_id: ConfigId) -> Self {
        PipelineConfig {
            config_id,
            k: None,
            q: default_q(),
            alpha: default_alpha(),
            imputer: default_imputer(),
            gbdt: GbdtParams::default(),
            n_split: default_n_split(),
            max_pairs: default_max_pairs(),
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidParameter(format!(
                "alpha {} outside [0, 1]",
                self.alpha
            )));
        }
        if self.q < 1 {
            return Err(Error::InvalidParameter("Q must be at least 1".into()));
        }
        if let Some(k) = self.k {
            if k < 2 {
                return Err(Error::KTooSmall(k));
            }
            if matches!(
                self.config_id,
                ConfigId::MdlFwfGauTopq | ConfigId::MdlFwfTriTopq
            ) && self.q > k
            {
                return Err(Error::InvalidParameter(format!(
                    "Q = {} exceeds K = {k}",
                    self.q
                )));
            }
        }
        self.gbdt.validate()?;
        Ok(())
    }

    fn mdl_options(&self) -> MdlOptions {
        MdlOptions {
            n_split: self.n_split,
            max_pairs: self.max_pairs,
            gbdt: self.gbdt,
        }
    }
}

/// Experiment-preset configuration: library defaults except for a trimmed
/// distance-model training budget (30 trees, 2500 pairs, 3 folds) that keeps
/// thousand-trial severity sweeps inside a desk-scale time budget.
pub fn experiment_preset(config_id: ConfigId) -> PipelineConfig {
    let mut cfg = PipelineConfig::new(config_id);
    cfg.gbdt.n_trees = 30;
    cfg.n_split = 3;
    cfg.max_pairs = 2_500;
    cfg
}

/// Worker pool honoring the `DRIFTFUZZ_THREADS` cap.
pub fn worker_pool() -> &'static rayon::ThreadPool {
    static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Ok(v) = std::env::var("DRIFTFUZZ_THREADS") {
            if let Ok(n) = v.parse::<usize>() {
                if n >= 1 {
                    builder = builder.num_threads(n);
                }
            }
        }
        builder.build().expect("worker pool")
    })
}

/// Crisp histogram of a fully observed window.
fn crisp_histogram(data: &ObservationSet, partition: &Partition) -> Result<FrequencyVector> {
    let mut counts = vec![0.0f64; partition.k()];
    for i in 0..data.n_rows() {
        let row = data.row(i);
        if !row.is_complete() {
            return Err(Error::MissingValueInDistance);
        }
        counts[assign_nearest(partition, row.values())] += 1.0;
    }
    FrequencyVector::new(counts)
}

fn weighting_for(cfg: &PipelineConfig, k: usize) -> Result<Weighting> {
    Ok(match cfg.config_id {
        ConfigId::MdlCrisp => Weighting::Crisp,
        ConfigId::MdlFwfGau => Weighting::Fuzzy {
            membership: Membership::Gaussian,
            q: k,
        },
        ConfigId::MdlFwfTri => Weighting::Fuzzy {
            membership: Membership::Triangular,
            q: k,
        },
        ConfigId::MdlFwfGauTopq => Weighting::Fuzzy {
            membership: Membership::Gaussian,
            q: cfg.q,
        },
        ConfigId::MdlFwfTriTopq => Weighting::Fuzzy {
            membership: Membership::Triangular,
            q: cfg.q,
        },
        _ => {
            return Err(Error::InvalidParameter(
                "weighting is only defined for the mdl-family strategies".into(),
            ))
        }
    })
}

/// Shared per-window-pair artifacts of the mdl-family strategies: the
/// partition fit on the reference window's complete rows, the distance model
/// trained on the reference window, and both windows' prepared estimates.
struct MdlArtifacts {
    partition: Partition,
    prep_ref: WindowEstimates,
    prep_test: WindowEstimates,
}

fn build_mdl_artifacts(
    reference: &ObservationSet,
    test: &ObservationSet,
    cfg: &PipelineConfig,
    pretrained: Option<&DistanceModel>,
) -> Result<MdlArtifacts> {
    let split = split_complete_missing(reference)?;
    let k = match cfg.k {
        Some(k) => k,
        None => default_bin_count(reference.n_rows())?,
    };
    let seed = RandomSource::new(cfg.seed);
    let partition = kmeans_fit(&split.complete, k, &seed.child(0), 100)?;
    let pool = default_pool();
    let model = match pretrained {
        Some(m) => m.clone(),
        None => train_masked_distance(reference, &pool, &cfg.mdl_options(), &seed.child(1))?,
    };
    let prep_ref = prepare_window(reference, &partition, &model, &pool)?;
    let prep_test = prepare_window(test, &partition, &model, &pool)?;
    Ok(MdlArtifacts {
        partition,
        prep_ref,
        prep_test,
    })
}

impl MdlArtifacts {
    fn verdict(&self, cfg: &PipelineConfig) -> Result<DriftVerdict> {
        let weighting = weighting_for(cfg, self.partition.k())?;
        let freq_ref = frequency_from_estimates(&self.prep_ref, weighting)?;
        let freq_test = frequency_from_estimates(&self.prep_test, weighting)?;
        drift_test(&freq_ref, &freq_test, cfg.alpha)
    }
}

/// Run one window pair through one strategy, optionally with a pretrained
/// distance model. The model and space partition always come from the
/// reference window; nothing from the test window leaks into them.
pub fn detect_with_model(
    reference: &ObservationSet,
    test: &ObservationSet,
    cfg: &PipelineConfig,
    pretrained: Option<&DistanceModel>,
) -> Result<DriftVerdict> {
    let run = || -> Result<DriftVerdict> {
        cfg.validate()?;
        if reference.n_cols() != test.n_cols() {
            return Err(Error::ShapeMismatch(format!(
                "reference has {} columns, test has {}",
                reference.n_cols(),
                test.n_cols()
            )));
        }
        let seed = RandomSource::new(cfg.seed);
        match cfg.config_id {
            ConfigId::Complete => {
                let k = match cfg.k {
                    Some(k) => k,
                    None => default_bin_count(reference.n_rows())?,
                };
                let partition = kmeans_fit(reference, k, &seed.child(0), 100)?;
                let f_ref = crisp_histogram(reference, &partition)?;
                let f_test = crisp_histogram(test, &partition)?;
                drift_test(&f_ref, &f_test, cfg.alpha)
            }
            ConfigId::MvImpute => {
                let ref_filled = impute(reference, &cfg.imputer)?;
                let test_filled = impute(test, &cfg.imputer)?;
                let k = match cfg.k {
                    Some(k) => k,
                    None => default_bin_count(reference.n_rows())?,
                };
                let partition = kmeans_fit(&ref_filled, k, &seed.child(0), 100)?;
                let f_ref = crisp_histogram(&ref_filled, &partition)?;
                let f_test = crisp_histogram(&test_filled, &partition)?;
                drift_test(&f_ref, &f_test, cfg.alpha)
            }
            _ => build_mdl_artifacts(reference, test, cfg, pretrained)?.verdict(cfg),
        }
    };
    run().map_err(|e| e.in_config(cfg.config_id.name()))
}

/// [`detect_with_model`] without a pretrained model.
pub fn detect(
    reference: &ObservationSet,
    test: &ObservationSet,
    cfg: &PipelineConfig,
) -> Result<DriftVerdict> {
    detect_with_model(reference, test, cfg, None)
}

/// Detection-ratio statistics of one severity level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelStats {
    pub severity: u8,
    pub trials: usize,
    pub failures: usize,
    pub detections: usize,
    pub ratio: f64,
    /// Wilson 95% interval over the successful trials.
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Detection ratio per severity level for one strategy on one drift family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftCurve {
    pub config_id: ConfigId,
    pub drift_kind: DriftKind,
    pub window_size: usize,
    pub seed: u64,
    pub levels: Vec<LevelStats>,
}

impl DriftCurve {
    pub fn ratios(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.ratio).collect()
    }
}

fn wilson_interval(successes: f64, n: f64) -> (f64, f64) {
    if n <= 0.0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054f64;
    let z2 = z * z;
    let center = (successes + z2 / 2.0) / (n + z2);
    let half = z * (successes * (n - successes) / n + z2 / 4.0).sqrt() / (n + z2);
    ((center - half).max(0.0), (center + half).min(1.0))
}

const TRIAL_PARAMS: u64 = 0;
const TRIAL_REF_DATA: u64 = 1;
const TRIAL_TEST_DATA: u64 = 2;
const TRIAL_MASK_REF: u64 = 3;
const TRIAL_MASK_TEST: u64 = 4;
const TRIAL_PIPELINE: u64 = 5;

/// Severity sweep. For every (drift kind, level, trial) a fresh population
/// is sampled, a reference window is drawn at severity 0 and a test window
/// at the given level, MCAR missingness is injected once, and every strategy
/// judges the same windows: `complete` sees the pre-mask pair, everything
/// else the masked pair. Per-trial failures are logged and counted without
/// aborting the sweep.
pub fn run_ablation(
    levels: &[u8],
    trials: usize,
    kinds: &[DriftKind],
    cfgs: &[PipelineConfig],
    master_seed: u64,
    window_size: usize,
) -> Result<Vec<DriftCurve>> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be positive".into()));
    }
    if levels.is_empty() || kinds.is_empty() || cfgs.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(bad) = levels.iter().find(|&&l| l > 10) {
        return Err(Error::InvalidParameter(format!(
            "severity {bad} outside 0..=10"
        )));
    }
    for cfg in cfgs {
        cfg.validate()?;
    }

    let master = RandomSource::new(master_seed);
    let jobs: Vec<(usize, usize, usize)> = (0..kinds.len())
        .flat_map(|ki| {
            (0..levels.len()).flat_map(move |li| (0..trials).map(move |t| (ki, li, t)))
        })
        .collect();

    let outcomes: Vec<Vec<Option<bool>>> = worker_pool().install(|| {
        jobs.par_iter()
            .map(|&(ki, li, trial)| {
                run_trial(
                    kinds[ki],
                    levels[li],
                    trial as u64,
                    cfgs,
                    &master.child(ki as u64),
                    window_size,
                )
            })
            .collect()
    });

    let mut curves: Vec<DriftCurve> = Vec::with_capacity(kinds.len() * cfgs.len());
    for &kind in kinds {
        for cfg in cfgs {
            curves.push(DriftCurve {
                config_id: cfg.config_id,
                drift_kind: kind,
                window_size,
                seed: master_seed,
                levels: levels
                    .iter()
                    .map(|&severity| LevelStats {
                        severity,
                        trials,
                        failures: 0,
                        detections: 0,
                        ratio: 0.0,
                        ci_low: 0.0,
                        ci_high: 1.0,
                    })
                    .collect(),
            });
        }
    }
    for (job, outcome) in jobs.iter().zip(&outcomes) {
        let (ki, li, _) = *job;
        for (ci, result) in outcome.iter().enumerate() {
            let stats = &mut curves[ki * cfgs.len() + ci].levels[li];
            match result {
                Some(true) => stats.detections += 1,
                Some(false) => {}
                None => stats.failures += 1,
            }
        }
    }
    for curve in &mut curves {
        for l in &mut curve.levels {
            let successes = l.trials - l.failures;
            l.ratio = if successes > 0 {
                l.detections as f64 / successes as f64
            } else {
                0.0
            };
            let (lo, hi) = wilson_interval(l.detections as f64, successes as f64);
            l.ci_low = lo;
            l.ci_high = hi;
        }
    }
    Ok(curves)
}

/// One seeded trial: bit-identical windows for every strategy. Returns one
/// drift outcome per strategy, `None` where the strategy failed.
fn run_trial(
    kind: DriftKind,
    level: u8,
    trial: u64,
    cfgs: &[PipelineConfig],
    kind_seed: &RandomSource,
    window_size: usize,
) -> Vec<Option<bool>> {
    let trial_src = kind_seed.child(level as u64).child(trial);
    let windows = (|| -> Result<_> {
        let family = kind.family();
        let dims = family.benchmark_dims();
        let spec = DistributionSpec::sample(family, dims, &trial_src.child(TRIAL_PARAMS))?;
        let drift = DriftSpec::new(kind, level)?;
        let drifted = apply_drift(&spec, &drift)?;
        let reference = generate(&spec, window_size, &trial_src.child(TRIAL_REF_DATA))?;
        let test = generate(&drifted, window_size, &trial_src.child(TRIAL_TEST_DATA))?;
        let rates = benchmark_rates(family);
        let masked_ref = inject_mcar(&reference, &rates, &trial_src.child(TRIAL_MASK_REF))?;
        let masked_test = inject_mcar(&test, &rates, &trial_src.child(TRIAL_MASK_TEST))?;
        Ok((reference, test, masked_ref, masked_test))
    })();
    let (reference, test, masked_ref, masked_test) = match windows {
        Ok(w) => w,
        Err(e) => {
            log::warn!("trial generation failed ({kind:?} level {level} trial {trial}): {e}");
            return vec![None; cfgs.len()];
        }
    };

    let pipeline_seed = trial_src.child(TRIAL_PIPELINE).seed();
    // The mdl-family strategies share the partition, model, and estimates
    // when their training knobs agree; determinism of training makes the
    // shared result identical to running each strategy standalone.
    let mut cache: Option<(MdlKey, Result<MdlArtifacts>)> = None;

    cfgs.iter()
        .map(|cfg| {
            let cfg = cfg.clone().with_seed(pipeline_seed);
            let outcome = if cfg.config_id.is_mdl_family() {
                let key = MdlKey {
                    k: cfg.k,
                    gbdt: cfg.gbdt,
                    n_split: cfg.n_split,
                    max_pairs: cfg.max_pairs,
                };
                let rebuild = match &cache {
                    Some((cached_key, _)) => *cached_key != key,
                    None => true,
                };
                if rebuild {
                    cache = Some((
                        key,
                        build_mdl_artifacts(&masked_ref, &masked_test, &cfg, None),
                    ));
                }
                match &cache.as_ref().unwrap().1 {
                    Ok(artifacts) => artifacts
                        .verdict(&cfg)
                        .map_err(|e| e.in_config(cfg.config_id.name())),
                    Err(e) => Err(Error::InvalidParameter(format!(
                        "shared mdl artifacts unavailable: {e}"
                    ))
                    .in_config(cfg.config_id.name())),
                }
            } else {
                let (r, t) = if cfg.config_id == ConfigId::Complete {
                    (&reference, &test)
                } else {
                    (&masked_ref, &masked_test)
                };
                detect(r, t, &cfg)
            };
            match outcome {
                Ok(v) => Some(v.drift),
                Err(e) => {
                    log::warn!(
                        "trial failed ({kind:?} level {level} trial {trial}, {}): {e}",
                        cfg.config_id.name()
                    );
                    None
                }
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct MdlKey {
    k: Option<usize>,
    gbdt: GbdtParams,
    n_split: usize,
    max_pairs: usize,
}

/// Pearson correlation of each strategy's detection-ratio curve against the
/// `complete` baseline of the same drift kind. Constant curves are skipped
/// with a warning.
pub fn correlation_to_baseline(curves: &[DriftCurve]) -> Result<Vec<BaselineCorrelation>> {
    let mut out = Vec::new();
    let kinds: Vec<DriftKind> = {
        let mut seen = Vec::new();
        for c in curves {
            if !seen.contains(&c.drift_kind) {
                seen.push(c.drift_kind);
            }
        }
        seen
    };
    for kind in kinds {
        let baseline = curves
            .iter()
            .find(|c| c.drift_kind == kind && c.config_id == ConfigId::Complete)
            .ok_or_else(|| {
                Error::InvalidParameter(format!("no complete baseline curve for {}", kind.name()))
            })?;
        let base_ratios = baseline.ratios();
        for c in curves
            .iter()
            .filter(|c| c.drift_kind == kind && c.config_id != ConfigId::Complete)
        {
            match pearson_correlation(&c.ratios(), &base_ratios) {
                Ok(r) => out.push(BaselineCorrelation {
                    drift_kind: kind,
                    config_id: c.config_id,
                    correlation: r,
                }),
                Err(Error::ZeroVariance) => {
                    log::warn!(
                        "skipping correlation for {} ({}), constant curve",
                        c.config_id.name(),
                        kind.name()
                    );
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(out)
}

/// Similarity of one strategy's curve to the complete-data baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineCorrelation {
    pub drift_kind: DriftKind,
    pub config_id: ConfigId,
    pub correlation: f64,
}

/// Per-trial distance-estimation errors of one method on one family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchMeasurement {
    pub family: Family,
    pub method: String,
    /// One entry per successful trial.
    pub mae: Vec<f64>,
    pub rmse: Vec<f64>,
    pub failures: usize,
}

impl BenchMeasurement {
    pub fn median_mae(&self) -> Option<f64> {
        median(&self.mae)
    }

    pub fn mean_std_mae(&self) -> Option<(f64, f64)> {
        mean_std(&self.mae)
    }

    pub fn mean_std_rmse(&self) -> Option<(f64, f64)> {
        mean_std(&self.rmse)
    }
}

fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    Some(v[(v.len() - 1) / 2])
}

fn mean_std(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}

/// Distance-estimation benchmark results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceBenchmark {
    pub window_rows: usize,
    pub trials: usize,
    pub seed: u64,
    pub measurements: Vec<BenchMeasurement>,
}

impl DistanceBenchmark {
    pub fn find(&self, family: Family, method: &str) -> Option<&BenchMeasurement> {
        self.measurements
            .iter()
            .find(|m| m.family == family && m.method == method)
    }
}

/// The distance-model label in benchmark tables.
pub const MDL_METHOD: &str = "mdl";

/// Per family and trial: draw the benchmark set, store true pairwise
/// distances, inject MCAR, then score every imputer's pairwise distances
/// against the truth on the pairs touched by missingness, and the distance
/// model by its held-out cross-validation error on those same kinds of
/// pairs.
pub fn run_distance_benchmark(
    families: &[Family],
    trials: usize,
    master_seed: u64,
    mdl_options: &MdlOptions,
) -> Result<DistanceBenchmark> {
    if families.is_empty() {
        return Err(Error::EmptyInput);
    }
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be positive".into()));
    }
    const ROWS: usize = 500;
    let master = RandomSource::new(master_seed);
    let pool = default_pool();
    let method_names: Vec<String> = pool
        .iter()
        .map(|m| format!("impute_{}", m.kind.name()))
        .chain(std::iter::once(MDL_METHOD.to_string()))
        .collect();

    let jobs: Vec<(usize, usize)> = (0..families.len())
        .flat_map(|fi| (0..trials).map(move |t| (fi, t)))
        .collect();

    type TrialErrors = Vec<Option<(f64, f64)>>;
    let results: Vec<TrialErrors> = worker_pool().install(|| {
        jobs.par_iter()
            .map(|&(fi, trial)| {
                bench_trial(
                    families[fi],
                    &master.child(fi as u64).child(trial as u64),
                    &pool,
                    mdl_options,
                    ROWS,
                )
            })
            .collect()
    });

    let mut measurements: Vec<BenchMeasurement> = Vec::new();
    for (fi, &family) in families.iter().enumerate() {
        for (mi, name) in method_names.iter().enumerate() {
            let mut mae = Vec::new();
            let mut rmse = Vec::new();
            let mut failures = 0usize;
            for (job, errors) in jobs.iter().zip(&results) {
                if job.0 != fi {
                    continue;
                }
                match errors[mi] {
                    Some((a, r)) => {
                        mae.push(a);
                        rmse.push(r);
                    }
                    None => failures += 1,
                }
            }
            measurements.push(BenchMeasurement {
                family,
                method: name.clone(),
                mae,
                rmse,
                failures,
            });
        }
    }
    Ok(DistanceBenchmark {
        window_rows: ROWS,
        trials,
        seed: master_seed,
        measurements,
    })
}

/// Per-method (MAE, RMSE) for one benchmark trial; `None` marks a failure.
fn bench_trial(
    family: Family,
    src: &RandomSource,
    pool: &[ImputeMethod],
    mdl_options: &MdlOptions,
    rows: usize,
) -> Vec<Option<(f64, f64)>> {
    let mut out: Vec<Option<(f64, f64)>> = vec![None; pool.len() + 1];
    let prepared = (|| -> Result<_> {
        let spec = DistributionSpec::sample(family, family.benchmark_dims(), &src.child(0))?;
        let data = generate(&spec, rows, &src.child(1))?;
        let masked = inject_mcar(&data, &benchmark_rates(family), &src.child(2))?;
        Ok((data, masked))
    })();
    let (data, masked) = match prepared {
        Ok(p) => p,
        Err(e) => {
            log::warn!("benchmark trial generation failed ({}): {e}", family.name());
            return out;
        }
    };

    // Pairs with at least one masked row are the estimation targets.
    let incomplete: Vec<bool> = (0..rows).map(|i| !masked.row_is_complete(i)).collect();
    let mut eval_pairs: Vec<(usize, usize)> = Vec::new();
    for i in 0..rows {
        for j in i + 1..rows {
            if incomplete[i] || incomplete[j] {
                eval_pairs.push((i, j));
            }
        }
    }
    let truth: Vec<f64> = eval_pairs
        .iter()
        .map(|&(i, j)| crate::data::euclidean_slices(data.row(i).values(), data.row(j).values()))
        .collect();

    for (mi, method) in pool.iter().enumerate() {
        match impute(&masked, method) {
            Ok(filled) => {
                let estimates: Vec<f64> = eval_pairs
                    .iter()
                    .map(|&(i, j)| {
                        crate::data::euclidean_slices(
                            filled.row(i).values(),
                            filled.row(j).values(),
                        )
                    })
                    .collect();
                let mae = crate::stats::mae(&estimates, &truth).ok();
                let rmse = crate::stats::rmse(&estimates, &truth).ok();
                out[mi] = mae.zip(rmse);
            }
            Err(e) => {
                log::warn!(
                    "benchmark imputation failed ({}, {}): {e}",
                    family.name(),
                    method.kind.name()
                );
            }
        }
    }

    match train_detailed(&masked, pool, mdl_options, &src.child(3)) {
        Ok(TrainReport { heldout, .. }) => {
            let (pred, truth): (Vec<f64>, Vec<f64>) = heldout
                .iter()
                .filter(|h| h.either_masked)
                .map(|h| (h.predicted, h.target))
                .unzip();
            if pred.is_empty() {
                log::warn!(
                    "benchmark mdl produced no masked held-out pairs ({})",
                    family.name()
                );
            } else {
                let mae = crate::stats::mae(&pred, &truth).ok();
                let rmse = crate::stats::rmse(&pred, &truth).ok();
                out[pool.len()] = mae.zip(rmse);
            }
        }
        Err(e) => {
            log::warn!("benchmark mdl training failed ({}): {e}", family.name());
        }
    }
    out
}
