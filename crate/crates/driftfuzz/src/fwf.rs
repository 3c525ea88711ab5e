//! Fuzzy-weighted frequency.
//!
//! A histogram over cluster bins where an observation with missing cells is
//! not forced into a single bin: its estimated centroid distances carry the
//! distance model's residual spread, each nearby bin receives a membership
//! degree from a triangular or Gaussian fuzzy number around the estimate,
//! and the degrees of the Q nearest bins are normalized into fractional
//! counts. Fully observed rows have exact distances, so they are counted
//! crisply into their nearest bin.
//!
//! With `Q = 1` the fuzzy path degenerates to crisp assignment by estimated
//! distance.

use serde::{Deserialize, Serialize};

use crate::cluster::{assign_nearest, Partition};
use crate::data::ObservationSet;
use crate::error::{Error, Result};
use crate::impute::{impute, ImputeMethod};
use crate::mdl::{estimate_distances, DistanceModel};
use crate::special::erf;

/// Shape of the fuzzy number wrapped around an estimated distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Membership {
    /// TFN(d - sigma, d, d + sigma); membership is the squared overlap
    /// ratio of congruent triangles.
    Triangular,
    /// GFN(d, sigma); membership is twice the Gaussian tail mass beyond the
    /// midpoint toward the nearest estimate.
    Gaussian,
}

/// Weighting configuration: membership shape, Top-Q cutoff, bin count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FwfConfig {
    pub membership: Membership,
    pub q: usize,
    pub k: usize,
}

impl FwfConfig {
    pub fn new(membership: Membership, q: usize, k: usize) -> Result<Self> {
        if q < 1 || q > k {
            return Err(Error::InvalidParameter(format!(
                "top-q constraint needs 1 <= q <= k, got q = {q}, k = {k}"
            )));
        }
        Ok(FwfConfig { membership, q, k })
    }
}

/// Per-bin (possibly fractional) counts for one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyVector {
    counts: Vec<f64>,
}

impl FrequencyVector {
    pub fn new(counts: Vec<f64>) -> Result<Self> {
        if counts.iter().any(|&c| c < 0.0 || !c.is_finite()) {
            return Err(Error::InvalidParameter(
                "frequencies must be finite and nonnegative".into(),
            ));
        }
        Ok(FrequencyVector { counts })
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }
}

/// Degree of membership of an observation to its z-th closest cluster under
/// the triangular fuzzy distance, given the ascending estimated distances.
/// `z` is a 0-based rank: `z = 0` is the nearest cluster and always yields 1.
/// The degree clamps to 0 once the triangles stop overlapping, i.e. when
/// `d_z >= d_0 + 2 sigma`.
pub fn membership_triangular(d_sorted: &[f64], sigma: f64, z: usize) -> Result<f64> {
    if sigma <= 0.0 {
        return Err(Error::NonPositiveSigma(sigma));
    }
    debug_assert!(is_ascending(d_sorted));
    let overlap = 2.0 * sigma + d_sorted[0] - d_sorted[z];
    if overlap <= 0.0 {
        return Ok(0.0);
    }
    let ratio = overlap / (2.0 * sigma);
    Ok(ratio * ratio)
}

/// Degree of membership under the Gaussian fuzzy distance:
/// `1 + erf((d_0 - d_z) / (2 sqrt(2) sigma))`. Equals 1 at `z = 0` and
/// decays toward 0 as `d_z` grows, without ever reaching it exactly.
pub fn membership_gaussian(d_sorted: &[f64], sigma: f64, z: usize) -> Result<f64> {
    if sigma <= 0.0 {
        return Err(Error::NonPositiveSigma(sigma));
    }
    debug_assert!(is_ascending(d_sorted));
    let arg = (d_sorted[0] - d_sorted[z]) / (2.0 * std::f64::consts::SQRT_2 * sigma);
    Ok(1.0 + erf(arg))
}

fn is_ascending(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[0] <= w[1])
}

/// Normalize memberships over the Q nearest clusters.
///
/// `memberships` and `ranks` are in centroid order; `ranks[z]` is the 0-based
/// closeness rank of centroid `z`. Centroids ranked at or beyond `q` get
/// weight 0; the rest are normalized to sum to 1. If every retained
/// membership is 0 the weight degenerates to a crisp 1 on the nearest
/// centroid.
pub fn topq_weights(memberships: &[f64], ranks: &[usize], q: usize) -> Result<Vec<f64>> {
    let k = memberships.len();
    if ranks.len() != k {
        return Err(Error::LengthMismatch {
            left: ranks.len(),
            right: k,
        });
    }
    if q < 1 || q > k {
        return Err(Error::InvalidParameter(format!(
            "top-q constraint needs 1 <= q <= k, got q = {q}, k = {k}"
        )));
    }
    let retained_sum: f64 = memberships
        .iter()
        .zip(ranks)
        .filter(|(_, &r)| r < q)
        .map(|(&m, _)| m)
        .sum();
    let mut weights = vec![0.0; k];
    if retained_sum > 0.0 {
        for z in 0..k {
            if ranks[z] < q {
                weights[z] = memberships[z] / retained_sum;
            }
        }
    } else {
        let nearest = ranks.iter().position(|&r| r == 0).expect("rank 0 exists");
        weights[nearest] = 1.0;
    }
    Ok(weights)
}

/// Closed form of the triangular weight for the all-overlapping case with
/// `Q = K`: `(c_1 - a_z)^2 / (K c_1^2 - 2 c_1 sum(a_i) + sum(a_i^2))` where
/// `c_1 = d_min + sigma` and `a_i = d_i - sigma`. The compositional path
/// (membership, then normalization) is authoritative; this form exists for
/// the dual-route equivalence check and is only valid when every triangle
/// overlaps the nearest one.
pub fn triangular_weight_closed_form(d_hats: &[f64], sigma: f64, z: usize) -> Result<f64> {
    if sigma <= 0.0 {
        return Err(Error::NonPositiveSigma(sigma));
    }
    let d_min = d_hats.iter().copied().fold(f64::INFINITY, f64::min);
    let c1 = d_min + sigma;
    let k = d_hats.len() as f64;
    let sum_a: f64 = d_hats.iter().map(|d| d - sigma).sum();
    let sum_a2: f64 = d_hats.iter().map(|d| (d - sigma) * (d - sigma)).sum();
    let num = (c1 - (d_hats[z] - sigma)) * (c1 - (d_hats[z] - sigma));
    Ok(num / (k * c1 * c1 - 2.0 * c1 * sum_a + sum_a2))
}

/// Closed form of the Gaussian weight with `Q = K`:
/// `(1 + erf((a_1 - a_z) / (2 sqrt(2) b))) / (K + sum erf((a_1 - a_i) / (2 sqrt(2) b)))`.
/// The compositional path is authoritative; see
/// [`triangular_weight_closed_form`].
pub fn gaussian_weight_closed_form(d_hats: &[f64], sigma: f64, z: usize) -> Result<f64> {
    if sigma <= 0.0 {
        return Err(Error::NonPositiveSigma(sigma));
    }
    let d_min = d_hats.iter().copied().fold(f64::INFINITY, f64::min);
    let scale = 2.0 * std::f64::consts::SQRT_2 * sigma;
    let num = 1.0 + erf((d_min - d_hats[z]) / scale);
    let denom = d_hats.len() as f64
        + d_hats.iter().map(|d| erf((d_min - d) / scale)).sum::<f64>();
    Ok(num / denom)
}

/// How a prepared window turns estimated distances into counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Weighting {
    /// Nearest bin by estimated distance, weight 1.
    Crisp,
    /// Top-Q normalized fuzzy memberships.
    Fuzzy { membership: Membership, q: usize },
}

/// Distance estimates of one window against a partition, ready to be
/// weighted. Preparing a window once lets several weightings (crisp,
/// triangular, Gaussian, different Q) reuse the same model predictions.
#[derive(Debug, Clone)]
pub struct WindowEstimates {
    k: usize,
    /// Nearest-bin index per complete row.
    complete_assignments: Vec<usize>,
    /// Per incomplete row: (estimated distance, spread) per centroid.
    estimates: Vec<Vec<(f64, f64)>>,
}

impl WindowEstimates {
    pub fn n_rows(&self) -> usize {
        self.complete_assignments.len() + self.estimates.len()
    }
}

/// Estimate every row of a window against the partition: complete rows are
/// assigned crisply by exact distance, incomplete rows get model-estimated
/// distances to every centroid. The pool must match the one frozen in the
/// model; the whole window is imputed once per pool method to build the
/// estimation features.
pub fn prepare_window(
    data: &ObservationSet,
    partition: &Partition,
    model: &DistanceModel,
    pool: &[ImputeMethod],
) -> Result<WindowEstimates> {
    if data.n_cols() != partition.dim() {
        return Err(Error::ShapeMismatch(format!(
            "window has {} columns, partition expects {}",
            data.n_cols(),
            partition.dim()
        )));
    }
    if pool != model.layout.pool.as_slice() {
        return Err(Error::ShapeMismatch(
            "imputer pool differs from the pool frozen in the distance model".into(),
        ));
    }
    if data.n_cols() != model.layout.n_columns {
        return Err(Error::ShapeMismatch(format!(
            "window has {} columns, model expects {}",
            data.n_cols(),
            model.layout.n_columns
        )));
    }

    let mut complete_assignments = Vec::new();
    let mut incomplete_rows = Vec::new();
    for i in 0..data.n_rows() {
        if data.row_is_complete(i) {
            complete_assignments.push(assign_nearest(partition, data.row(i).values()));
        } else {
            incomplete_rows.push(i);
        }
    }

    let mut estimates = Vec::with_capacity(incomplete_rows.len());
    if !incomplete_rows.is_empty() {
        let imputed: Vec<ObservationSet> = pool
            .iter()
            .map(|method| impute(data, method))
            .collect::<Result<_>>()?;
        let mut filled = vec![vec![0.0; data.n_cols()]; pool.len()];
        for &i in &incomplete_rows {
            for (buf, set) in filled.iter_mut().zip(&imputed) {
                buf.copy_from_slice(set.row(i).values());
            }
            estimates.push(estimate_distances(model, data.row(i), partition, &filled)?);
        }
    }

    Ok(WindowEstimates {
        k: partition.k(),
        complete_assignments,
        estimates,
    })
}

/// Closeness ranks from per-centroid estimates; ties break to the lower
/// centroid index. Returns (ranks in centroid order, ascending distances).
fn rank_distances(estimates: &[(f64, f64)]) -> (Vec<usize>, Vec<f64>) {
    let k = estimates.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| estimates[a].0.total_cmp(&estimates[b].0).then(a.cmp(&b)));
    let mut ranks = vec![0usize; k];
    let mut sorted = Vec::with_capacity(k);
    for (r, &z) in order.iter().enumerate() {
        ranks[z] = r;
        sorted.push(estimates[z].0);
    }
    (ranks, sorted)
}

/// Weights of one observation over the bins, given its estimates.
pub fn weights_from_estimates(estimates: &[(f64, f64)], weighting: Weighting) -> Result<Vec<f64>> {
    let k = estimates.len();
    let (ranks, sorted) = rank_distances(estimates);
    match weighting {
        Weighting::Crisp => {
            let mut w = vec![0.0; k];
            let nearest = ranks.iter().position(|&r| r == 0).expect("rank 0 exists");
            w[nearest] = 1.0;
            Ok(w)
        }
        Weighting::Fuzzy { membership, q } => {
            let sigma = estimates[0].1;
            let mut memberships = vec![0.0; k];
            for z in 0..k {
                let mu = match membership {
                    Membership::Triangular => membership_triangular(&sorted, sigma, ranks[z])?,
                    Membership::Gaussian => membership_gaussian(&sorted, sigma, ranks[z])?,
                };
                memberships[z] = mu;
            }
            topq_weights(&memberships, &ranks, q)
        }
    }
}

/// Accumulate a frequency vector from prepared estimates.
pub fn frequency_from_estimates(
    prepared: &WindowEstimates,
    weighting: Weighting,
) -> Result<FrequencyVector> {
    if let Weighting::Fuzzy { q, .. } = weighting {
        if q < 1 || q > prepared.k {
            return Err(Error::InvalidParameter(format!(
                "top-q constraint needs 1 <= q <= k, got q = {q}, k = {}",
                prepared.k
            )));
        }
    }
    let mut counts = vec![0.0f64; prepared.k];
    for &z in &prepared.complete_assignments {
        counts[z] += 1.0;
    }
    for est in &prepared.estimates {
        let w = weights_from_estimates(est, weighting)?;
        for (c, wi) in counts.iter_mut().zip(&w) {
            *c += wi;
        }
    }
    let out = FrequencyVector::new(counts)?;
    debug_assert!((out.total() - prepared.n_rows() as f64).abs() < 1e-9);
    Ok(out)
}

/// Fuzzy-weighted frequency of a window: complete rows count crisply into
/// their nearest bin, incomplete rows spread Top-Q normalized fuzzy weights
/// over the bins nearest to their estimated distances.
pub fn fuzzy_frequency(
    data: &ObservationSet,
    partition: &Partition,
    model: &DistanceModel,
    pool: &[ImputeMethod],
    cfg: &FwfConfig,
) -> Result<FrequencyVector> {
    if cfg.k != partition.k() {
        return Err(Error::ShapeMismatch(format!(
            "config expects k = {}, partition has {}",
            cfg.k,
            partition.k()
        )));
    }
    let prepared = prepare_window(data, partition, model, pool)?;
    frequency_from_estimates(
        &prepared,
        Weighting::Fuzzy {
            membership: cfg.membership,
            q: cfg.q,
        },
    )
}

/// Crisp frequency: every row lands in exactly one bin, incomplete rows by
/// their smallest estimated distance.
pub fn crisp_frequency(
    data: &ObservationSet,
    partition: &Partition,
    model: &DistanceModel,
    pool: &[ImputeMethod],
) -> Result<FrequencyVector> {
    let prepared = prepare_window(data, partition, model, pool)?;
    frequency_from_estimates(&prepared, Weighting::Crisp)
}
