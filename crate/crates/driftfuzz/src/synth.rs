//! Synthetic window generation: the benchmark distribution families, the
//! drift families with severity levels 0-10, and MCAR injection.
//!
//! Per-dimension parameters are drawn once when the spec is sampled, so a
//! reference window and a drifted test window built from the same spec share
//! the same underlying population parameters.

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::data::{mask_values, MissingRateVector, ObservationSet};
use crate::error::{Error, Result};
use crate::rng::RandomSource;

/// Distribution family of a synthetic data set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Uniform,
    Gaussian,
    Exponential,
    Poisson,
    Categorical,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Uniform => "uniform",
            Family::Gaussian => "gaussian",
            Family::Exponential => "exponential",
            Family::Poisson => "poisson",
            Family::Categorical => "categorical",
        }
    }

    /// Benchmark dimensionality: 10 for the continuous families, 5 for the
    /// count-valued ones.
    pub fn benchmark_dims(&self) -> usize {
        match self {
            Family::Uniform | Family::Gaussian | Family::Exponential => 10,
            Family::Poisson | Family::Categorical => 5,
        }
    }
}

/// A concrete generating distribution with per-dimension parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DistributionSpec {
    /// Independent U(lo_i, hi_i) per dimension.
    Uniform { lo: Vec<f64>, hi: Vec<f64> },
    /// Independent N(mean_i, std_dev_i) per dimension.
    Gaussian { mean: Vec<f64>, std_dev: Vec<f64> },
    /// Independent exponentials with the given scale (mean) per dimension.
    Exponential { scale: Vec<f64> },
    /// Poisson counts; `shared_weight` in [0, 1] mixes a common latent count
    /// into every dimension while preserving the per-dimension rates.
    Poisson { rate: Vec<f64>, shared_weight: f64 },
    /// Integer levels 0..levels, uniform.
    Categorical { levels: u32, dims: usize },
}

impl DistributionSpec {
    /// Draw a spec's per-dimension parameters from the benchmark ranges:
    /// uniform on [0, 10]; Gaussian mean and deviation from [0, 1); the
    /// exponential scale from (0, 1); integer Poisson rates from {5..9};
    /// categorical integer levels 0..9.
    pub fn sample(family: Family, dims: usize, rng: &RandomSource) -> Result<Self> {
        if dims == 0 {
            return Err(Error::InvalidParameter("dims must be positive".into()));
        }
        let mut gen = rng.rng();
        let positive_unit = |gen: &mut rand_chacha::ChaCha12Rng| loop {
            let v: f64 = gen.random();
            if v > 0.0 {
                return v;
            }
        };
        Ok(match family {
            Family::Uniform => DistributionSpec::Uniform {
                lo: vec![0.0; dims],
                hi: vec![10.0; dims],
            },
            Family::Gaussian => {
                let mean: Vec<f64> = (0..dims).map(|_| gen.random::<f64>()).collect();
                let std_dev: Vec<f64> = (0..dims).map(|_| positive_unit(&mut gen)).collect();
                DistributionSpec::Gaussian { mean, std_dev }
            }
            Family::Exponential => DistributionSpec::Exponential {
                scale: (0..dims).map(|_| positive_unit(&mut gen)).collect(),
            },
            Family::Poisson => DistributionSpec::Poisson {
                rate: (0..dims).map(|_| gen.random_range(5..10) as f64).collect(),
                shared_weight: 0.0,
            },
            Family::Categorical => DistributionSpec::Categorical { levels: 10, dims },
        })
    }

    pub fn family(&self) -> Family {
        match self {
            DistributionSpec::Uniform { .. } => Family::Uniform,
            DistributionSpec::Gaussian { .. } => Family::Gaussian,
            DistributionSpec::Exponential { .. } => Family::Exponential,
            DistributionSpec::Poisson { .. } => Family::Poisson,
            DistributionSpec::Categorical { .. } => Family::Categorical,
        }
    }

    pub fn dims(&self) -> usize {
        match self {
            DistributionSpec::Uniform { lo, .. } => lo.len(),
            DistributionSpec::Gaussian { mean, .. } => mean.len(),
            DistributionSpec::Exponential { scale } => scale.len(),
            DistributionSpec::Poisson { rate, .. } => rate.len(),
            DistributionSpec::Categorical { dims, .. } => *dims,
        }
    }
}

/// The drift families applied to compatible distribution specs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftKind {
    UniformMean,
    GaussianMean,
    GaussianCov,
    PoissonMean,
    PoissonRho,
}

impl DriftKind {
    pub fn name(&self) -> &'static str {
        match self {
            DriftKind::UniformMean => "uniform_mean",
            DriftKind::GaussianMean => "gaussian_mean",
            DriftKind::GaussianCov => "gaussian_cov",
            DriftKind::PoissonMean => "poisson_mean",
            DriftKind::PoissonRho => "poisson_rho",
        }
    }

    /// The family this drift kind shifts.
    pub fn family(&self) -> Family {
        match self {
            DriftKind::UniformMean => Family::Uniform,
            DriftKind::GaussianMean | DriftKind::GaussianCov => Family::Gaussian,
            DriftKind::PoissonMean | DriftKind::PoissonRho => Family::Poisson,
        }
    }

    pub fn all() -> [DriftKind; 5] {
        [
            DriftKind::UniformMean,
            DriftKind::GaussianMean,
            DriftKind::GaussianCov,
            DriftKind::PoissonMean,
            DriftKind::PoissonRho,
        ]
    }
}

/// A drift kind at a severity level; severity 0 leaves the spec untouched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DriftSpec {
    pub kind: DriftKind,
    pub severity: u8,
}

impl DriftSpec {
    pub fn new(kind: DriftKind, severity: u8) -> Result<Self> {
        if severity > 10 {
            return Err(Error::InvalidParameter(format!(
                "severity {severity} outside 0..=10"
            )));
        }
        Ok(DriftSpec { kind, severity })
    }
}

/// Shift a spec by one drift step per severity level:
/// uniform ranges move by 0.05 per level, Gaussian means by 0.05 standard
/// deviations, Gaussian deviations scale by 1 + 0.05 per level, Poisson
/// rates scale by 1 + 0.02 per level, and the Poisson shared-count weight
/// ramps to severity/10.
pub fn apply_drift(spec: &DistributionSpec, drift: &DriftSpec) -> Result<DistributionSpec> {
    let s = drift.severity as f64;
    if drift.severity == 0 {
        return Ok(spec.clone());
    }
    let incompatible = || Error::IncompatibleDrift {
        kind: drift.kind.name().into(),
        family: spec.family().name().into(),
    };
    match (drift.kind, spec) {
        (DriftKind::UniformMean, DistributionSpec::Uniform { lo, hi }) => {
            Ok(DistributionSpec::Uniform {
                lo: lo.iter().map(|v| v + 0.05 * s).collect(),
                hi: hi.iter().map(|v| v + 0.05 * s).collect(),
            })
        }
        (DriftKind::GaussianMean, DistributionSpec::Gaussian { mean, std_dev }) => {
            Ok(DistributionSpec::Gaussian {
                mean: mean
                    .iter()
                    .zip(std_dev)
                    .map(|(m, sd)| m + 0.05 * s * sd)
                    .collect(),
                std_dev: std_dev.clone(),
            })
        }
        (DriftKind::GaussianCov, DistributionSpec::Gaussian { mean, std_dev }) => {
            Ok(DistributionSpec::Gaussian {
                mean: mean.clone(),
                std_dev: std_dev.iter().map(|sd| sd * (1.0 + 0.05 * s)).collect(),
            })
        }
        (DriftKind::PoissonMean, DistributionSpec::Poisson { rate, shared_weight }) => {
            Ok(DistributionSpec::Poisson {
                rate: rate.iter().map(|l| l * (1.0 + 0.02 * s)).collect(),
                shared_weight: *shared_weight,
            })
        }
        (DriftKind::PoissonRho, DistributionSpec::Poisson { rate, .. }) => {
            Ok(DistributionSpec::Poisson {
                rate: rate.clone(),
                shared_weight: s / 10.0,
            })
        }
        _ => Err(incompatible()),
    }
}

/// Draw `m` i.i.d. rows from the spec. Cells are drawn row-major, one value
/// per dimension, so generation is bit-reproducible from the source.
pub fn generate(spec: &DistributionSpec, m: usize, rng: &RandomSource) -> Result<ObservationSet> {
    if m == 0 {
        return Err(Error::InvalidParameter("m must be positive".into()));
    }
    let dims = spec.dims();
    let names = ObservationSet::default_names(dims);
    let mut gen = rng.rng();
    let mut values = Vec::with_capacity(m * dims);
    match spec {
        DistributionSpec::Uniform { lo, hi } => {
            for _ in 0..m {
                for (l, h) in lo.iter().zip(hi) {
                    values.push(gen.random_range(*l..*h));
                }
            }
        }
        DistributionSpec::Gaussian { mean, std_dev } => {
            let dists: Vec<Normal<f64>> = mean
                .iter()
                .zip(std_dev)
                .map(|(m, sd)| Normal::new(*m, *sd).map_err(|e| bad_param(e.to_string())))
                .collect::<Result<_>>()?;
            for _ in 0..m {
                for d in &dists {
                    values.push(d.sample(&mut gen));
                }
            }
        }
        DistributionSpec::Exponential { scale } => {
            let dists: Vec<Exp<f64>> = scale
                .iter()
                .map(|b| Exp::new(1.0 / b).map_err(|e| bad_param(e.to_string())))
                .collect::<Result<_>>()?;
            for _ in 0..m {
                for d in &dists {
                    values.push(d.sample(&mut gen));
                }
            }
        }
        DistributionSpec::Poisson { rate, shared_weight } => {
            let w = *shared_weight;
            if !(0.0..=1.0).contains(&w) {
                return Err(bad_param(format!("shared weight {w} outside [0, 1]")));
            }
            if w == 0.0 {
                let dists: Vec<Poisson<f64>> = rate
                    .iter()
                    .map(|l| Poisson::new(*l).map_err(|e| bad_param(e.to_string())))
                    .collect::<Result<_>>()?;
                for _ in 0..m {
                    for d in &dists {
                        values.push(d.sample(&mut gen));
                    }
                }
            } else {
                // Common-shock construction: X_i = Poisson(rate_i - c) + S
                // with S ~ Poisson(c) shared across dimensions, c = w * min
                // rate. Marginals stay Poisson(rate_i); the shared count
                // induces positive inter-feature correlation.
                let c = w * rate.iter().copied().fold(f64::INFINITY, f64::min);
                let shared = sampler(c)?;
                let own: Vec<Sampler> = rate
                    .iter()
                    .map(|l| sampler(l - c))
                    .collect::<Result<_>>()?;
                for _ in 0..m {
                    let s = shared.draw(&mut gen);
                    for d in &own {
                        values.push(d.draw(&mut gen) + s);
                    }
                }
            }
        }
        DistributionSpec::Categorical { levels, dims } => {
            for _ in 0..m {
                for _ in 0..*dims {
                    values.push(gen.random_range(0..*levels) as f64);
                }
            }
        }
    }
    ObservationSet::complete(values, m, dims, names)
}

fn bad_param(msg: String) -> Error {
    Error::InvalidParameter(msg)
}

/// Poisson sampler that tolerates a zero rate.
enum Sampler {
    Zero,
    Poisson(Poisson<f64>),
}

fn sampler(rate: f64) -> Result<Sampler> {
    if rate <= 0.0 {
        if rate < -1e-12 {
            return Err(bad_param(format!("negative poisson rate {rate}")));
        }
        Ok(Sampler::Zero)
    } else {
        Ok(Sampler::Poisson(
            Poisson::new(rate).map_err(|e| bad_param(e.to_string()))?,
        ))
    }
}

impl Sampler {
    fn draw(&self, gen: &mut rand_chacha::ChaCha12Rng) -> f64 {
        match self {
            Sampler::Zero => 0.0,
            Sampler::Poisson(p) => p.sample(gen),
        }
    }
}

/// Benchmark missing-rate pattern: 20% on the first half of the dimensions
/// (first 3 of 5 for the count families), fully observed elsewhere.
pub fn benchmark_rates(family: Family) -> MissingRateVector {
    let dims = family.benchmark_dims();
    let masked = match family {
        Family::Uniform | Family::Gaussian | Family::Exponential => 5,
        Family::Poisson | Family::Categorical => 3,
    };
    let mut rates = vec![0.2; masked];
    rates.extend(vec![0.0; dims - masked]);
    MissingRateVector::new(rates).expect("rates in range")
}

/// MCAR injection: mask each cell of column i with probability `rates[i]`,
/// independently of every cell value.
pub fn inject_mcar(
    data: &ObservationSet,
    rates: &MissingRateVector,
    rng: &RandomSource,
) -> Result<ObservationSet> {
    mask_values(data, rates, rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_mean_matches_clt_bound() {
        let spec = DistributionSpec::sample(Family::Uniform, 10, &RandomSource::new(1)).unwrap();
        let data = generate(&spec, 10_000, &RandomSource::new(2)).unwrap();
        for j in 0..10 {
            let mean: f64 = data.observed_column(j).sum::<f64>() / 10_000.0;
            assert!((mean - 5.0).abs() < 0.15, "column {j} mean {mean}");
        }
    }

    #[test]
    fn categorical_support() {
        let spec =
            DistributionSpec::sample(Family::Categorical, 5, &RandomSource::new(3)).unwrap();
        let data = generate(&spec, 500, &RandomSource::new(4)).unwrap();
        for i in 0..data.n_rows() {
            for j in 0..5 {
                let v = data.get(i, j).unwrap();
                assert_eq!(v, v.trunc());
                assert!((0.0..10.0).contains(&v));
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        for family in [
            Family::Uniform,
            Family::Gaussian,
            Family::Exponential,
            Family::Poisson,
            Family::Categorical,
        ] {
            let spec = DistributionSpec::sample(family, 4, &RandomSource::new(5)).unwrap();
            let a = generate(&spec, 50, &RandomSource::new(6)).unwrap();
            let b = generate(&spec, 50, &RandomSource::new(6)).unwrap();
            assert_eq!(a, b, "{family:?}");
        }
    }

    #[test]
    fn poisson_rates_in_benchmark_range() {
        let spec = DistributionSpec::sample(Family::Poisson, 5, &RandomSource::new(7)).unwrap();
        if let DistributionSpec::Poisson { rate, .. } = &spec {
            for l in rate {
                assert!((5.0..10.0).contains(l));
                assert_eq!(*l, l.trunc());
            }
        } else {
            panic!("wrong family");
        }
    }

    #[test]
    fn drift_severity_zero_is_identity() {
        for kind in DriftKind::all() {
            let spec =
                DistributionSpec::sample(kind.family(), 6, &RandomSource::new(8)).unwrap();
            let drifted = apply_drift(&spec, &DriftSpec::new(kind, 0).unwrap()).unwrap();
            assert_eq!(drifted, spec);
            let a = generate(&spec, 40, &RandomSource::new(9)).unwrap();
            let b = generate(&drifted, 40, &RandomSource::new(9)).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn gaussian_mean_shift_formula() {
        let spec = DistributionSpec::Gaussian {
            mean: vec![2.0, -1.0],
            std_dev: vec![1.0, 0.5],
        };
        let drifted =
            apply_drift(&spec, &DriftSpec::new(DriftKind::GaussianMean, 10).unwrap()).unwrap();
        if let DistributionSpec::Gaussian { mean, .. } = drifted {
            assert!((mean[0] - 2.5).abs() < 1e-12);
            assert!((mean[1] - (-0.75)).abs() < 1e-12);
        } else {
            panic!("wrong family");
        }
    }

    #[test]
    fn poisson_mean_shift_formula() {
        let spec = DistributionSpec::Poisson {
            rate: vec![10.0],
            shared_weight: 0.0,
        };
        let drifted =
            apply_drift(&spec, &DriftSpec::new(DriftKind::PoissonMean, 5).unwrap()).unwrap();
        if let DistributionSpec::Poisson { rate, .. } = drifted {
            assert!((rate[0] - 11.0).abs() < 1e-12);
        } else {
            panic!("wrong family");
        }
    }

    #[test]
    fn incompatible_drift_rejected() {
        let spec = DistributionSpec::sample(Family::Uniform, 3, &RandomSource::new(10)).unwrap();
        assert!(matches!(
            apply_drift(&spec, &DriftSpec::new(DriftKind::GaussianMean, 3).unwrap()),
            Err(Error::IncompatibleDrift { .. })
        ));
    }

    #[test]
    fn gaussian_mean_kl_is_strictly_increasing() {
        // KL(N(mu_s, sigma) || N(mu_0, sigma)) = sum (mu_s - mu_0)^2 / (2 sigma^2),
        // evaluated analytically from the spec parameters.
        let spec = DistributionSpec::sample(Family::Gaussian, 10, &RandomSource::new(11)).unwrap();
        let (mean0, std0) = match &spec {
            DistributionSpec::Gaussian { mean, std_dev } => (mean.clone(), std_dev.clone()),
            _ => unreachable!(),
        };
        let mut prev = -1.0;
        for s in 0..=10u8 {
            let drifted =
                apply_drift(&spec, &DriftSpec::new(DriftKind::GaussianMean, s).unwrap()).unwrap();
            let mean_s = match &drifted {
                DistributionSpec::Gaussian { mean, .. } => mean.clone(),
                _ => unreachable!(),
            };
            let kl: f64 = mean_s
                .iter()
                .zip(&mean0)
                .zip(&std0)
                .map(|((ms, m0), sd)| (ms - m0) * (ms - m0) / (2.0 * sd * sd))
                .sum();
            assert!(kl > prev, "kl {kl} at severity {s} not above {prev}");
            prev = kl;
        }
    }

    #[test]
    fn poisson_shared_count_preserves_marginal_mean() {
        let spec = DistributionSpec::Poisson {
            rate: vec![5.0, 9.0],
            shared_weight: 0.0,
        };
        let drifted =
            apply_drift(&spec, &DriftSpec::new(DriftKind::PoissonRho, 10).unwrap()).unwrap();
        let data = generate(&drifted, 20_000, &RandomSource::new(12)).unwrap();
        let mean0: f64 = data.observed_column(0).sum::<f64>() / 20_000.0;
        let mean1: f64 = data.observed_column(1).sum::<f64>() / 20_000.0;
        assert!((mean0 - 5.0).abs() < 0.1, "mean0 {mean0}");
        assert!((mean1 - 9.0).abs() < 0.15, "mean1 {mean1}");
        // And it actually correlates the features.
        let a: Vec<f64> = data.observed_column(0).collect();
        let b: Vec<f64> = data.observed_column(1).collect();
        let r = crate::stats::pearson_correlation(&a, &b).unwrap();
        assert!(r > 0.5, "correlation {r}");
    }

    #[test]
    fn benchmark_rates_pattern() {
        let g = benchmark_rates(Family::Gaussian);
        assert_eq!(g.rates(), &[0.2, 0.2, 0.2, 0.2, 0.2, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let p = benchmark_rates(Family::Poisson);
        assert_eq!(p.rates(), &[0.2, 0.2, 0.2, 0.0, 0.0]);
    }

    #[test]
    fn mcar_touches_only_configured_columns() {
        let spec = DistributionSpec::sample(Family::Gaussian, 10, &RandomSource::new(13)).unwrap();
        let data = generate(&spec, 400, &RandomSource::new(14)).unwrap();
        let masked = inject_mcar(&data, &benchmark_rates(Family::Gaussian), &RandomSource::new(15))
            .unwrap();
        for j in 0..5 {
            assert!(masked.missing_in_column(j) > 0, "column {j}");
        }
        for j in 5..10 {
            assert_eq!(masked.missing_in_column(j), 0, "column {j}");
        }
    }

    #[test]
    fn mcar_is_independent_of_cell_values() {
        // 2x2 independence test between the mask indicator and the
        // above-median indicator of the pre-mask values.
        let spec = DistributionSpec::sample(Family::Gaussian, 1, &RandomSource::new(16)).unwrap();
        let data = generate(&spec, 10_000, &RandomSource::new(17)).unwrap();
        let rates = MissingRateVector::new(vec![0.3]).unwrap();
        let masked = inject_mcar(&data, &rates, &RandomSource::new(18)).unwrap();

        let mut values: Vec<f64> = (0..10_000).map(|i| data.get(i, 0).unwrap()).collect();
        values.sort_by(f64::total_cmp);
        let median = values[4_999];

        let mut cells = [[0.0f64; 2]; 2];
        for i in 0..10_000 {
            let above = usize::from(data.get(i, 0).unwrap() > median);
            let missing = usize::from(masked.is_missing(i, 0));
            cells[above][missing] += 1.0;
        }
        let table = crate::stats::ContingencyTable::new(cells[0].to_vec(), cells[1].to_vec())
            .unwrap();
        let chi = crate::stats::chi_square_statistic(&table).unwrap();
        let p = crate::stats::chi_square_sf(chi.statistic, chi.df);
        assert!(p > 0.01, "independence rejected with p = {p}");
    }
}
