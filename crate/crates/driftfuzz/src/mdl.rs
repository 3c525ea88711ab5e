//! Masked distance learning.
//!
//! Complete rows are deliberately re-masked at the data set's own missing
//! rates, every pool imputer fills the masked copy, and pairwise distances of
//! each filled copy become features alongside the raw masked pair. A boosted
//! ensemble then regresses the true pre-mask distance on those features, and
//! its held-out residual spread becomes the fuzziness of every later distance
//! estimate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::Partition;
use crate::data::{
    euclidean_slices, mask_values, missing_rates, split_complete_missing, MissingRateVector,
    ObservationSet, RowView,
};
use crate::error::{Error, Result};
use crate::gbdt::{FeatureMatrix, GbdtModel, GbdtParams};
use crate::impute::{impute, ImputeMethod};
use crate::rng::RandomSource;

/// Fixed feature order fed to the distance learner: the two raw masked
/// observations concatenated, then one imputed distance per pool method in
/// pool order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub n_columns: usize,
    pub pool: Vec<ImputeMethod>,
}

impl FeatureLayout {
    pub fn total_features(&self) -> usize {
        2 * self.n_columns + self.pool.len()
    }
}

/// One training instance: a masked observation pair plus its imputed-distance
/// features and the true pre-mask distance.
#[derive(Debug, Clone, PartialEq)]
pub struct PairFeatureRow {
    /// 2n values, first observation then second; masked cells hold NaN.
    pub raw_values: Vec<f64>,
    pub raw_mask: Vec<bool>,
    /// One distance per pool method, in pool order. Always finite.
    pub imputed_distances: Vec<f64>,
    /// True distance before masking.
    pub target: f64,
    /// Whether the masking left a missing cell in either observation.
    pub either_masked: bool,
}

impl PairFeatureRow {
    fn flat(&self) -> (Vec<f64>, Vec<bool>) {
        let mut values = self.raw_values.clone();
        let mut mask = self.raw_mask.clone();
        values.extend_from_slice(&self.imputed_distances);
        mask.extend(std::iter::repeat(false).take(self.imputed_distances.len()));
        (values, mask)
    }
}

/// A trained distance estimator: the boosted learner, its held-out residual
/// spread, and the imputer pool frozen at training time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceModel {
    pub learner: GbdtModel,
    pub sigma_mask: f64,
    pub layout: FeatureLayout,
}

/// Training options.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MdlOptions {
    /// Cross-validation folds for the residual spread.
    pub n_split: usize,
    /// Uniform subsampling cap on the quadratic pair set.
    pub max_pairs: usize,
    pub gbdt: GbdtParams,
}

impl Default for MdlOptions {
    fn default() -> Self {
        MdlOptions {
            n_split: 5,
            max_pairs: 20_000,
            gbdt: GbdtParams::default(),
        }
    }
}

/// One held-out prediction from cross-validation.
#[derive(Debug, Clone, Copy)]
pub struct HeldoutPrediction {
    pub target: f64,
    pub predicted: f64,
    /// Whether either observation of the pair had a masked cell.
    pub either_masked: bool,
}

/// A trained model together with its cross-validation transcript.
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub model: DistanceModel,
    pub heldout: Vec<HeldoutPrediction>,
    pub n_pairs: usize,
    pub mean_target: f64,
}

/// Residual standard error `sqrt(sum r_i^2 / (m - 2))`.
///
/// The divisor follows the simple-regression convention; the mismatch with a
/// multivariate learner is deliberate and documented.
pub fn sigma_from_residuals(residuals: &[f64], m: usize) -> Result<f64> {
    if m < 3 {
        return Err(Error::TooFewResiduals(m));
    }
    if residuals.len() != m {
        return Err(Error::LengthMismatch {
            left: residuals.len(),
            right: m,
        });
    }
    let ss: f64 = residuals.iter().map(|r| r * r).sum();
    Ok((ss / (m as f64 - 2.0)).sqrt())
}

/// Build the pair training set from a fully observed set.
///
/// True pairwise distances are computed before masking; the set is then
/// masked once at the given rates and imputed once per pool method, and each
/// selected pair yields one [`PairFeatureRow`]. When the full pair count
/// exceeds `max_pairs` the pairs are subsampled uniformly.
pub fn build_pair_training_set(
    complete: &ObservationSet,
    rates: &MissingRateVector,
    pool: &[ImputeMethod],
    rng: &RandomSource,
    max_pairs: usize,
) -> Result<Vec<PairFeatureRow>> {
    let m = complete.n_rows();
    if m < 2 {
        return Err(Error::TooFewRows {
            context: "pair training set",
            got: m,
            need: 2,
        });
    }
    if max_pairs == 0 {
        return Err(Error::InvalidParameter("max_pairs must be positive".into()));
    }
    for i in 0..m {
        if !complete.row_is_complete(i) {
            return Err(Error::MissingValueInDistance);
        }
    }
    if pool.is_empty() {
        return Err(Error::EmptyInput);
    }

    let total_pairs = m * (m - 1) / 2;
    let selected: Vec<(usize, usize)> = if total_pairs <= max_pairs {
        all_pairs(m)
    } else {
        let mut gen = rng.child(0).rng();
        let mut picked: Vec<usize> = rand::seq::index::sample(&mut gen, total_pairs, max_pairs)
            .into_iter()
            .collect();
        picked.sort_unstable();
        picked.into_iter().map(|k| pair_from_index(k, m)).collect()
    };

    let masked = mask_values(complete, rates, &rng.child(1))?;
    let imputed: Vec<ObservationSet> = pool
        .iter()
        .map(|method| impute(&masked, method))
        .collect::<Result<_>>()?;

    let rows = selected
        .into_iter()
        .map(|(i, j)| {
            let target = euclidean_slices(complete.row(i).values(), complete.row(j).values());
            let ri = masked.row(i);
            let rj = masked.row(j);
            let mut raw_values = Vec::with_capacity(2 * complete.n_cols());
            raw_values.extend_from_slice(ri.values());
            raw_values.extend_from_slice(rj.values());
            let mut raw_mask = Vec::with_capacity(2 * complete.n_cols());
            raw_mask.extend_from_slice(ri.mask());
            raw_mask.extend_from_slice(rj.mask());
            let imputed_distances: Vec<f64> = imputed
                .iter()
                .map(|set| euclidean_slices(set.row(i).values(), set.row(j).values()))
                .collect();
            PairFeatureRow {
                raw_values,
                raw_mask,
                imputed_distances,
                target,
                either_masked: !ri.is_complete() || !rj.is_complete(),
            }
        })
        .collect();
    Ok(rows)
}

fn all_pairs(m: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(m * (m - 1) / 2);
    for i in 0..m {
        for j in i + 1..m {
            out.push((i, j));
        }
    }
    out
}

/// Invert the lexicographic pair index: the k-th pair among
/// (0,1), (0,2), ..., (m-2, m-1).
fn pair_from_index(k: usize, m: usize) -> (usize, usize) {
    let mut k = k;
    for i in 0..m {
        let row_pairs = m - 1 - i;
        if k < row_pairs {
            return (i, i + 1 + k);
        }
        k -= row_pairs;
    }
    unreachable!("pair index out of range")
}

/// Contiguous near-equal fold boundaries over `n` shuffled items.
fn fold_bounds(n: usize, folds: usize) -> Vec<(usize, usize)> {
    let base = n / folds;
    let extra = n % folds;
    let mut bounds = Vec::with_capacity(folds);
    let mut start = 0;
    for f in 0..folds {
        let len = base + usize::from(f < extra);
        bounds.push((start, start + len));
        start += len;
    }
    bounds
}

/// Train the distance model end to end and keep the cross-validation
/// transcript. See [`train_masked_distance`] for the plain variant.
pub fn train_detailed(
    data: &ObservationSet,
    pool: &[ImputeMethod],
    options: &MdlOptions,
    rng: &RandomSource,
) -> Result<TrainReport> {
    if options.n_split < 2 {
        return Err(Error::InvalidParameter(
            "cross-validation needs at least 2 folds".into(),
        ));
    }
    let split = split_complete_missing(data)?;
    let rates = missing_rates(data);
    let pairs = build_pair_training_set(
        &split.complete,
        &rates,
        pool,
        &rng.child(0),
        options.max_pairs,
    )?;
    let n_pairs = pairs.len();
    if n_pairs < options.n_split {
        return Err(Error::TooFewRows {
            context: "cross-validation over pairs",
            got: n_pairs,
            need: options.n_split,
        });
    }

    let n_features = 2 * split.complete.n_cols() + pool.len();
    let mut matrix = FeatureMatrix::with_capacity(n_features, n_pairs);
    let mut targets = Vec::with_capacity(n_pairs);
    for p in &pairs {
        let (values, mask) = p.flat();
        matrix.push_row(&values, &mask)?;
        targets.push(p.target);
    }
    let mean_target = targets.iter().sum::<f64>() / n_pairs as f64;

    // Shuffled index order defines the folds.
    let mut order: Vec<usize> = (0..n_pairs).collect();
    {
        use rand::seq::SliceRandom;
        let mut gen = rng.child(1).rng();
        order.shuffle(&mut gen);
    }
    let bounds = fold_bounds(n_pairs, options.n_split);

    let fold_results: Vec<Result<Vec<HeldoutPrediction>>> = bounds
        .par_iter()
        .enumerate()
        .map(|(fold, &(start, end))| {
            let test_idx = &order[start..end];
            let train_idx: Vec<usize> = order[..start]
                .iter()
                .chain(order[end..].iter())
                .copied()
                .collect();
            let mut fold_matrix = FeatureMatrix::with_capacity(n_features, train_idx.len());
            let mut fold_targets = Vec::with_capacity(train_idx.len());
            for &i in &train_idx {
                let (values, mask) = pairs[i].flat();
                fold_matrix.push_row(&values, &mask)?;
                fold_targets.push(pairs[i].target);
            }
            let model = GbdtModel::fit(
                &fold_matrix,
                &fold_targets,
                &options.gbdt,
                &rng.child(2 + fold as u64),
            )?;
            let mut heldout = Vec::with_capacity(test_idx.len());
            for &i in test_idx {
                let (values, mask) = pairs[i].flat();
                heldout.push(HeldoutPrediction {
                    target: pairs[i].target,
                    predicted: model.predict(&values, &mask),
                    either_masked: pairs[i].either_masked,
                });
            }
            Ok(heldout)
        })
        .collect();

    let mut heldout = Vec::with_capacity(n_pairs);
    for r in fold_results {
        heldout.extend(r?);
    }
    let residuals: Vec<f64> = heldout.iter().map(|h| h.target - h.predicted).collect();
    let sigma_raw = sigma_from_residuals(&residuals, residuals.len())?;
    // A zero spread collapses both membership functions downstream.
    let sigma_mask = sigma_raw.max(1e-6 * mean_target.abs().max(f64::MIN_POSITIVE));

    let learner = GbdtModel::fit(&matrix, &targets, &options.gbdt, &rng.child(1_000))?;
    Ok(TrainReport {
        model: DistanceModel {
            learner,
            sigma_mask,
            layout: FeatureLayout {
                n_columns: split.complete.n_cols(),
                pool: pool.to_vec(),
            },
        },
        heldout,
        n_pairs,
        mean_target,
    })
}

/// Train the distance model: k-fold cross-validation over the pair set
/// accumulates held-out residuals for the spread, then the final learner is
/// refit on every pair.
pub fn train_masked_distance(
    data: &ObservationSet,
    pool: &[ImputeMethod],
    options: &MdlOptions,
    rng: &RandomSource,
) -> Result<DistanceModel> {
    Ok(train_detailed(data, pool, options, rng)?.model)
}

/// Estimate the distance from one observation to every centroid.
///
/// The centroid plays the complete "second observation" of a pair;
/// `imputed_x` supplies the pool-filled versions of `x` (one per pool
/// method, in pool order) from which the imputed-distance features are
/// computed. Predictions are clamped at zero from below, and every estimate
/// carries the model's global spread.
pub fn estimate_distances(
    model: &DistanceModel,
    x: RowView<'_>,
    centroids: &Partition,
    imputed_x: &[Vec<f64>],
) -> Result<Vec<(f64, f64)>> {
    let n = model.layout.n_columns;
    if x.len() != n {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: n,
        });
    }
    if centroids.dim() != n {
        return Err(Error::ShapeMismatch(format!(
            "partition dimension {} vs model columns {n}",
            centroids.dim()
        )));
    }
    if imputed_x.len() != model.layout.pool.len() {
        return Err(Error::LengthMismatch {
            left: imputed_x.len(),
            right: model.layout.pool.len(),
        });
    }
    for filled in imputed_x {
        if filled.len() != n {
            return Err(Error::LengthMismatch {
                left: filled.len(),
                right: n,
            });
        }
    }

    let total = model.layout.total_features();
    let mut values = vec![0.0f64; total];
    let mut mask = vec![false; total];
    values[..n].copy_from_slice(x.values());
    mask[..n].copy_from_slice(x.mask());

    let mut out = Vec::with_capacity(centroids.k());
    for c in centroids.centroids() {
        values[n..2 * n].copy_from_slice(c);
        for (k, filled) in imputed_x.iter().enumerate() {
            values[2 * n + k] = euclidean_slices(filled, c);
        }
        let d = model.learner.predict(&values, &mask).max(0.0);
        out.push((d, model.sigma_mask));
    }
    Ok(out)
}
