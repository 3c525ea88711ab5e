//! Missing-aware gradient-boosted regression trees.
//!
//! Squared-error stagewise boosting with exact greedy splits: candidate
//! thresholds are midpoints between consecutive distinct present values, and
//! rows whose split feature is missing follow a per-split default direction
//! chosen during training as the direction with the higher gain. When a node
//! contains missing rows, one extra boundary candidate that routes every
//! present row left and every missing row right is evaluated, so a tree can
//! separate "value absent" from "value present" outright.
//!
//! Only the missingness mask matters at a masked cell; the value stored
//! there is never read.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RandomSource;

/// Dense feature matrix with a missingness mask, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    values: Vec<f64>,
    mask: Vec<bool>,
    rows: usize,
    cols: usize,
}

impl FeatureMatrix {
    pub fn new(cols: usize) -> Self {
        FeatureMatrix {
            values: Vec::new(),
            mask: Vec::new(),
            rows: 0,
            cols,
        }
    }

    pub fn with_capacity(cols: usize, rows: usize) -> Self {
        FeatureMatrix {
            values: Vec::with_capacity(cols * rows),
            mask: Vec::with_capacity(cols * rows),
            rows: 0,
            cols,
        }
    }

    /// Append one row. Masked positions may hold any payload; it is
    /// canonicalized to NaN and never read again.
    pub fn push_row(&mut self, values: &[f64], mask: &[bool]) -> Result<()> {
        if values.len() != self.cols || mask.len() != self.cols {
            return Err(Error::LengthMismatch {
                left: values.len(),
                right: self.cols,
            });
        }
        for (v, &m) in values.iter().zip(mask) {
            if m {
                self.values.push(f64::NAN);
                self.mask.push(true);
            } else {
                if !v.is_finite() {
                    return Err(Error::InvalidParameter(
                        "non-finite feature value in an unmasked cell".into(),
                    ));
                }
                self.values.push(*v);
                self.mask.push(false);
            }
        }
        self.rows += 1;
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        let idx = row * self.cols + col;
        if self.mask[idx] {
            None
        } else {
            Some(self.values[idx])
        }
    }
}

/// Boosting hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbdtParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
    pub feature_subsample: f64,
}

impl Default for GbdtParams {
    fn default() -> Self {
        GbdtParams {
            n_trees: 100,
            max_depth: 3,
            learning_rate: 0.1,
            min_samples_leaf: 5,
            feature_subsample: 1.0,
        }
    }
}

impl GbdtParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 || self.max_depth == 0 || self.min_samples_leaf == 0 {
            return Err(Error::InvalidParameter(
                "gbdt sizes must be positive".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "learning rate {} outside (0, 1]",
                self.learning_rate
            )));
        }
        if !(self.feature_subsample > 0.0 && self.feature_subsample <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "feature subsample {} outside (0, 1]",
                self.feature_subsample
            )));
        }
        Ok(())
    }
}

/// One regression-tree node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node")]
pub enum TreeNode {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        /// Default direction for rows missing this feature.
        missing_left: bool,
        /// Variance reduction achieved by this split (total-gain importance).
        gain: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    fn evaluate(&self, values: &[f64], mask: &[bool]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    missing_left,
                    left,
                    right,
                    ..
                } => {
                    let go_left = if mask[*feature] {
                        *missing_left
                    } else {
                        values[*feature] <= *threshold
                    };
                    node = if go_left { left } else { right };
                }
            }
        }
    }

    fn accumulate_gains(&self, gains: &mut [f64]) {
        if let TreeNode::Split {
            feature,
            gain,
            left,
            right,
            ..
        } = self
        {
            gains[*feature] += *gain;
            left.accumulate_gains(gains);
            right.accumulate_gains(gains);
        }
    }
}

/// A trained boosted ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub trees: Vec<TreeNode>,
    pub learning_rate: f64,
    pub base_prediction: f64,
    pub feature_count: usize,
}

impl GbdtModel {
    /// Stagewise least-squares boosting. Returns a constant model (with a
    /// logged warning, not an error) when every target is identical.
    pub fn fit(
        matrix: &FeatureMatrix,
        targets: &[f64],
        params: &GbdtParams,
        rng: &RandomSource,
    ) -> Result<GbdtModel> {
        params.validate()?;
        let m = matrix.n_rows();
        if m != targets.len() {
            return Err(Error::LengthMismatch {
                left: m,
                right: targets.len(),
            });
        }
        if m < 2 * params.min_samples_leaf {
            return Err(Error::TooFewRows {
                context: "gbdt fit",
                got: m,
                need: 2 * params.min_samples_leaf,
            });
        }
        if targets.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidParameter("non-finite target".into()));
        }

        let base_prediction = targets.iter().sum::<f64>() / m as f64;
        let constant = targets.iter().all(|&t| t == targets[0]);
        if constant {
            log::warn!("gbdt: all targets equal, returning a constant model");
            return Ok(GbdtModel {
                trees: Vec::new(),
                learning_rate: params.learning_rate,
                base_prediction,
                feature_count: matrix.n_cols(),
            });
        }

        let sorted = presort(matrix);
        let mut residuals: Vec<f64> = targets.iter().map(|t| t - base_prediction).collect();
        let mut sumsq: f64 = residuals.iter().map(|r| r * r).sum();
        let mut gen = rng.rng();
        let n_features = matrix.n_cols();
        let subset_size = ((params.feature_subsample * n_features as f64).ceil() as usize)
            .clamp(1, n_features);

        let mut trees = Vec::with_capacity(params.n_trees);
        for _ in 0..params.n_trees {
            let features: Vec<usize> = if subset_size == n_features {
                (0..n_features).collect()
            } else {
                let mut picked: Vec<usize> =
                    sample(&mut gen, n_features, subset_size).into_iter().collect();
                picked.sort_unstable();
                picked
            };
            let (tree, new_sumsq) = grow_tree(
                matrix,
                &sorted,
                &mut residuals,
                &features,
                params,
            );
            assert!(
                new_sumsq <= sumsq * (1.0 + 1e-9) + 1e-9,
                "training error increased while boosting: {sumsq} -> {new_sumsq}"
            );
            sumsq = new_sumsq;
            trees.push(tree);
        }

        Ok(GbdtModel {
            trees,
            learning_rate: params.learning_rate,
            base_prediction,
            feature_count: matrix.n_cols(),
        })
    }

    /// `base + lr * sum of tree outputs`. Deterministic and total: an
    /// all-missing row is routed by the per-split default directions.
    pub fn predict(&self, values: &[f64], mask: &[bool]) -> f64 {
        debug_assert_eq!(values.len(), self.feature_count);
        debug_assert_eq!(mask.len(), self.feature_count);
        let sum: f64 = self.trees.iter().map(|t| t.evaluate(values, mask)).sum();
        self.base_prediction + self.learning_rate * sum
    }

    /// Per-feature total variance-reduction gain, normalized to sum to one;
    /// all zeros for a constant model.
    pub fn feature_importance(&self) -> Vec<f64> {
        let mut gains = vec![0.0; self.feature_count];
        for t in &self.trees {
            t.accumulate_gains(&mut gains);
        }
        let total: f64 = gains.iter().sum();
        if total > 0.0 {
            for g in &mut gains {
                *g /= total;
            }
        }
        gains
    }
}

/// Per-feature row orderings, computed once per fit and shared by all trees.
/// Missing-row statistics are recovered per node as parent minus present.
struct SortedFeatures {
    /// Row indices with the feature present, ascending by value.
    present: Vec<Vec<u32>>,
}

fn presort(matrix: &FeatureMatrix) -> SortedFeatures {
    let mut present = Vec::with_capacity(matrix.n_cols());
    for f in 0..matrix.n_cols() {
        let mut p: Vec<u32> = (0..matrix.n_rows() as u32)
            .filter(|&i| matrix.get(i as usize, f).is_some())
            .collect();
        p.sort_by(|&a, &b| {
            matrix
                .get(a as usize, f)
                .unwrap()
                .total_cmp(&matrix.get(b as usize, f).unwrap())
        });
        present.push(p);
    }
    SortedFeatures { present }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
    missing_left: bool,
}

impl Candidate {
    /// Deterministic preference order: higher gain, then lower feature,
    /// then lower threshold, then missing-left.
    fn better_than(&self, other: &Candidate) -> bool {
        if self.gain != other.gain {
            return self.gain > other.gain;
        }
        if self.feature != other.feature {
            return self.feature < other.feature;
        }
        if self.threshold != other.threshold {
            return self.threshold < other.threshold;
        }
        self.missing_left && !other.missing_left
    }
}

#[derive(Debug, Clone, Copy)]
struct NodeStats {
    count: f64,
    sum: f64,
}

/// Grow one tree level-wise against the current residuals, install the leaf
/// updates in `residuals`, and return the tree plus the new residual sum of
/// squares.
fn grow_tree(
    matrix: &FeatureMatrix,
    sorted: &SortedFeatures,
    residuals: &mut [f64],
    features: &[usize],
    params: &GbdtParams,
) -> (TreeNode, f64) {
    const NO_NODE: u32 = u32::MAX;
    let m = matrix.n_rows();
    let lr = params.learning_rate;
    let min_leaf = params.min_samples_leaf as f64;

    // Arena of nodes under construction; 0 is the root.
    #[derive(Clone)]
    enum Build {
        Open,
        Leaf(f64),
        Split {
            feature: usize,
            threshold: f64,
            missing_left: bool,
            gain: f64,
            left: usize,
            right: usize,
        },
    }
    let mut arena: Vec<Build> = vec![Build::Open];
    // row -> arena index of the open node holding it; NO_NODE once leafed.
    let mut row_node: Vec<u32> = vec![0; m];
    let mut frontier: Vec<usize> = vec![0];
    let mut new_sumsq = 0.0f64;

    let seal_leaf = |arena: &mut Vec<Build>,
                         row_node: &mut Vec<u32>,
                         residuals: &mut [f64],
                         sumsq: &mut f64,
                         node: usize,
                         stats: NodeStats| {
        let value = stats.sum / stats.count;
        arena[node] = Build::Leaf(value);
        for i in 0..m {
            if row_node[i] == node as u32 {
                residuals[i] -= lr * value;
                *sumsq += residuals[i] * residuals[i];
                row_node[i] = NO_NODE;
            }
        }
    };

    for depth in 0..=params.max_depth {
        if frontier.is_empty() {
            break;
        }
        // Stats per frontier node, indexed by frontier position.
        let mut index_of: Vec<Option<usize>> = vec![None; arena.len()];
        for (pos, &n) in frontier.iter().enumerate() {
            index_of[n] = Some(pos);
        }
        let mut stats = vec![
            NodeStats {
                count: 0.0,
                sum: 0.0
            };
            frontier.len()
        ];
        for i in 0..m {
            if row_node[i] != NO_NODE {
                if let Some(pos) = index_of[row_node[i] as usize] {
                    stats[pos].count += 1.0;
                    stats[pos].sum += residuals[i];
                }
            }
        }

        if depth == params.max_depth {
            for (pos, &n) in frontier.iter().enumerate() {
                seal_leaf(&mut arena, &mut row_node, residuals, &mut new_sumsq, n, stats[pos]);
            }
            frontier.clear();
            break;
        }

        // Nodes too small to split become leaves immediately.
        let mut splittable: Vec<usize> = Vec::new();
        for (pos, &n) in frontier.iter().enumerate() {
            if stats[pos].count >= 2.0 * min_leaf {
                splittable.push(pos);
            } else {
                seal_leaf(&mut arena, &mut row_node, residuals, &mut new_sumsq, n, stats[pos]);
            }
        }
        if splittable.is_empty() {
            frontier.clear();
            break;
        }

        let best = best_splits_for_level(
            matrix,
            sorted,
            residuals,
            features,
            &row_node,
            &index_of,
            &stats,
            frontier.len(),
            min_leaf,
        );

        let mut next_frontier: Vec<usize> = Vec::new();
        let mut split_of_node: Vec<Option<(usize, bool, f64, usize, usize)>> =
            vec![None; arena.len()];
        for &pos in &splittable {
            let n = frontier[pos];
            match best[pos] {
                Some(c) if c.gain > 1e-12 => {
                    let left = arena.len();
                    arena.push(Build::Open);
                    let right = arena.len();
                    arena.push(Build::Open);
                    arena[n] = Build::Split {
                        feature: c.feature,
                        threshold: c.threshold,
                        missing_left: c.missing_left,
                        gain: c.gain,
                        left,
                        right,
                    };
                    split_of_node[n] = Some((c.feature, c.missing_left, c.threshold, left, right));
                    next_frontier.push(left);
                    next_frontier.push(right);
                }
                _ => {
                    seal_leaf(&mut arena, &mut row_node, residuals, &mut new_sumsq, n, stats[pos]);
                }
            }
        }

        // Move rows into the children.
        for i in 0..m {
            let n = row_node[i];
            if n == NO_NODE {
                continue;
            }
            if let Some((feature, missing_left, threshold, left, right)) =
                split_of_node[n as usize]
            {
                let go_left = match matrix.get(i, feature) {
                    Some(v) => v <= threshold,
                    None => missing_left,
                };
                row_node[i] = if go_left { left as u32 } else { right as u32 };
            }
        }
        frontier = next_frontier;
    }

    debug_assert!(frontier.is_empty());

    // Freeze the arena into an owned tree.
    fn freeze(arena: &[Build], idx: usize) -> TreeNode {
        match &arena[idx] {
            Build::Leaf(v) => TreeNode::Leaf { value: *v },
            Build::Split {
                feature,
                threshold,
                missing_left,
                gain,
                left,
                right,
            } => TreeNode::Split {
                feature: *feature,
                threshold: *threshold,
                missing_left: *missing_left,
                gain: *gain,
                left: Box::new(freeze(arena, *left)),
                right: Box::new(freeze(arena, *right)),
            },
            Build::Open => unreachable!("open node survived tree growth"),
        }
    }

    (freeze(&arena, 0), new_sumsq)
}

/// For every frontier node, the best candidate split across the feature
/// subset. Two passes per feature: one to total the present rows per node,
/// one to scan split boundaries in sorted order.
#[allow(clippy::too_many_arguments)]
fn best_splits_for_level(
    matrix: &FeatureMatrix,
    sorted: &SortedFeatures,
    residuals: &[f64],
    features: &[usize],
    row_node: &[u32],
    index_of: &[Option<usize>],
    stats: &[NodeStats],
    n_nodes: usize,
    min_leaf: f64,
) -> Vec<Option<Candidate>> {
    use rayon::prelude::*;

    let per_feature: Vec<Vec<Option<Candidate>>> = features
        .par_iter()
        .map(|&f| {
            scan_feature(
                matrix, sorted, residuals, f, row_node, index_of, stats, n_nodes, min_leaf,
            )
        })
        .collect();

    let mut best: Vec<Option<Candidate>> = vec![None; n_nodes];
    for cands in per_feature {
        for (pos, cand) in cands.into_iter().enumerate() {
            if let Some(c) = cand {
                match &best[pos] {
                    Some(b) if !c.better_than(b) => {}
                    _ => best[pos] = Some(c),
                }
            }
        }
    }
    best
}

#[allow(clippy::too_many_arguments)]
fn scan_feature(
    matrix: &FeatureMatrix,
    sorted: &SortedFeatures,
    residuals: &[f64],
    feature: usize,
    row_node: &[u32],
    index_of: &[Option<usize>],
    stats: &[NodeStats],
    n_nodes: usize,
    min_leaf: f64,
) -> Vec<Option<Candidate>> {
    const NO_NODE: u32 = u32::MAX;

    // Pass 1: per-node totals over present rows.
    let mut present = vec![
        NodeStats {
            count: 0.0,
            sum: 0.0
        };
        n_nodes
    ];
    for &r in &sorted.present[feature] {
        let n = row_node[r as usize];
        if n == NO_NODE {
            continue;
        }
        if let Some(pos) = index_of[n as usize] {
            present[pos].count += 1.0;
            present[pos].sum += residuals[r as usize];
        }
    }

    #[derive(Clone, Copy)]
    struct Run {
        count: f64,
        sum: f64,
        prev: f64,
        any: bool,
    }
    let mut runs = vec![
        Run {
            count: 0.0,
            sum: 0.0,
            prev: 0.0,
            any: false
        };
        n_nodes
    ];
    let mut best: Vec<Option<Candidate>> = vec![None; n_nodes];

    // Pass 2: sweep boundaries between consecutive distinct present values.
    for &r in &sorted.present[feature] {
        let n = row_node[r as usize];
        if n == NO_NODE {
            continue;
        }
        let Some(pos) = index_of[n as usize] else {
            continue;
        };
        let value = matrix.get(r as usize, feature).unwrap();
        let run = &mut runs[pos];
        if run.any && value > run.prev {
            let mut threshold = 0.5 * (run.prev + value);
            if !(threshold >= run.prev && threshold < value) {
                threshold = run.prev;
            }
            let parent = stats[pos];
            let miss = NodeStats {
                count: parent.count - present[pos].count,
                sum: parent.sum - present[pos].sum,
            };
            let left_p = NodeStats {
                count: run.count,
                sum: run.sum,
            };
            let right_p = NodeStats {
                count: present[pos].count - run.count,
                sum: present[pos].sum - run.sum,
            };
            let parent_score = parent.sum * parent.sum / parent.count;
            for missing_left in [true, false] {
                let (l, rgt) = if missing_left {
                    (
                        NodeStats {
                            count: left_p.count + miss.count,
                            sum: left_p.sum + miss.sum,
                        },
                        right_p,
                    )
                } else {
                    (
                        left_p,
                        NodeStats {
                            count: right_p.count + miss.count,
                            sum: right_p.sum + miss.sum,
                        },
                    )
                };
                if l.count < min_leaf || rgt.count < min_leaf {
                    continue;
                }
                let gain = l.sum * l.sum / l.count + rgt.sum * rgt.sum / rgt.count - parent_score;
                let cand = Candidate {
                    gain,
                    feature,
                    threshold,
                    missing_left,
                };
                match &best[pos] {
                    Some(b) if !cand.better_than(b) => {}
                    _ => best[pos] = Some(cand),
                }
            }
        }
        run.count += 1.0;
        run.sum += residuals[r as usize];
        run.prev = value;
        run.any = true;
    }

    // Boundary candidate: all present rows left, all missing rows right.
    for pos in 0..n_nodes {
        let parent = stats[pos];
        let miss = NodeStats {
            count: parent.count - present[pos].count,
            sum: parent.sum - present[pos].sum,
        };
        if miss.count < min_leaf || present[pos].count < min_leaf || !runs[pos].any {
            continue;
        }
        let parent_score = parent.sum * parent.sum / parent.count;
        let l = present[pos];
        let gain =
            l.sum * l.sum / l.count + miss.sum * miss.sum / miss.count - parent_score;
        let cand = Candidate {
            gain,
            feature,
            threshold: runs[pos].prev,
            missing_left: false,
        };
        match &best[pos] {
            Some(b) if !cand.better_than(b) => {}
            _ => best[pos] = Some(cand),
        }
    }

    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: &[&[Option<f64>]]) -> FeatureMatrix {
        let cols = rows[0].len();
        let mut m = FeatureMatrix::new(cols);
        for r in rows {
            let values: Vec<f64> = r.iter().map(|v| v.unwrap_or(0.0)).collect();
            let mask: Vec<bool> = r.iter().map(Option::is_none).collect();
            m.push_row(&values, &mask).unwrap();
        }
        m
    }

    fn dense_single_feature(values: &[f64]) -> FeatureMatrix {
        let mut m = FeatureMatrix::new(1);
        for &v in values {
            m.push_row(&[v], &[false]).unwrap();
        }
        m
    }

    #[test]
    fn constant_targets_give_constant_model() {
        let m = dense_single_feature(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0]);
        let targets = vec![7.3; 10];
        let model = GbdtModel::fit(&m, &targets, &GbdtParams::default(), &RandomSource::new(0))
            .unwrap();
        assert!(model.trees.is_empty());
        assert!((model.predict(&[42.0], &[false]) - 7.3).abs() < 1e-12);
        assert_eq!(model.feature_importance(), vec![0.0]);
    }

    #[test]
    fn learns_identity_function() {
        let values: Vec<f64> = (0..16).map(|i| i as f64).collect();
        let m = dense_single_feature(&values);
        let params = GbdtParams {
            n_trees: 50,
            max_depth: 3,
            min_samples_leaf: 1,
            ..GbdtParams::default()
        };
        let model = GbdtModel::fit(&m, &values, &params, &RandomSource::new(1)).unwrap();
        let preds: Vec<f64> = values.iter().map(|&v| model.predict(&[v], &[false])).collect();
        let sq: f64 = preds
            .iter()
            .zip(&values)
            .map(|(p, t)| (p - t) * (p - t))
            .sum::<f64>()
            / 16.0;
        let mean = values.iter().sum::<f64>() / 16.0;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 16.0;
        assert!(sq.sqrt() < 0.05 * var.sqrt(), "rmse {}", sq.sqrt());
        // Interpolation between training points stays near the target.
        let p = model.predict(&[0.5], &[false]);
        assert!((p - 0.5).abs() < 0.6, "predicted {p}");
    }

    #[test]
    fn root_split_matches_exhaustive_oracle() {
        // Brute-force oracle: enumerate every midpoint threshold on 16 rows
        // and compare the best gain with the gain stored in the root split
        // of the first tree.
        let values: Vec<f64> = vec![
            0.1, 0.4, 1.0, 1.7, 2.2, 2.8, 3.1, 3.9, 4.4, 5.0, 5.5, 6.3, 7.0, 8.2, 9.1, 9.8,
        ];
        let targets: Vec<f64> = values.iter().map(|v| (v * 1.3).sin() * 2.0 + v).collect();
        let m = dense_single_feature(&values);
        let params = GbdtParams {
            n_trees: 1,
            max_depth: 1,
            min_samples_leaf: 1,
            learning_rate: 1.0,
            ..GbdtParams::default()
        };
        let model = GbdtModel::fit(&m, &targets, &params, &RandomSource::new(0)).unwrap();

        let mean = targets.iter().sum::<f64>() / targets.len() as f64;
        let residuals: Vec<f64> = targets.iter().map(|t| t - mean).collect();
        let mut sorted_vals = values.clone();
        sorted_vals.sort_by(f64::total_cmp);
        let mut best_gain = f64::NEG_INFINITY;
        for w in sorted_vals.windows(2) {
            if w[1] <= w[0] {
                continue;
            }
            let thr = 0.5 * (w[0] + w[1]);
            let (mut nl, mut sl, mut nr, mut sr) = (0.0, 0.0, 0.0, 0.0);
            for (v, r) in values.iter().zip(&residuals) {
                if *v <= thr {
                    nl += 1.0;
                    sl += r;
                } else {
                    nr += 1.0;
                    sr += r;
                }
            }
            let total: f64 = residuals.iter().sum();
            let gain = sl * sl / nl + sr * sr / nr - total * total / 16.0;
            best_gain = best_gain.max(gain);
        }

        match &model.trees[0] {
            TreeNode::Split { gain, .. } => {
                assert!((gain - best_gain).abs() < 1e-9, "{gain} vs {best_gain}");
            }
            other => panic!("expected root split, got {other:?}"),
        }
    }

    #[test]
    fn missingness_itself_is_learnable() {
        // feature-0 missing => target 10, present => target 0.
        let mut rows: Vec<Vec<Option<f64>>> = Vec::new();
        for i in 0..10 {
            rows.push(vec![Some(i as f64)]);
        }
        for _ in 0..10 {
            rows.push(vec![None]);
        }
        let targets: Vec<f64> = (0..20).map(|i| if i < 10 { 0.0 } else { 10.0 }).collect();
        let refs: Vec<&[Option<f64>]> = rows.iter().map(|r| r.as_slice()).collect();
        let m = matrix(&refs);
        let params = GbdtParams {
            n_trees: 50,
            ..GbdtParams::default()
        };
        let model = GbdtModel::fit(&m, &targets, &params, &RandomSource::new(2)).unwrap();
        let p = model.predict(&[f64::NAN], &[true]);
        assert!((p - 10.0).abs() < 0.5, "predicted {p}");
        let q = model.predict(&[4.0], &[false]);
        assert!(q.abs() < 0.5, "predicted {q}");
    }

    #[test]
    fn all_missing_row_predicts_finite() {
        let rows: Vec<Vec<Option<f64>>> = (0..20)
            .map(|i| {
                vec![
                    if i % 3 == 0 { None } else { Some(i as f64) },
                    Some((i * i) as f64),
                ]
            })
            .collect();
        let targets: Vec<f64> = (0..20).map(|i| i as f64 * 0.5).collect();
        let refs: Vec<&[Option<f64>]> = rows.iter().map(|r| r.as_slice()).collect();
        let m = matrix(&refs);
        let model =
            GbdtModel::fit(&m, &targets, &GbdtParams::default(), &RandomSource::new(3)).unwrap();
        let p = model.predict(&[0.0, 0.0], &[true, true]);
        assert!(p.is_finite());
    }

    #[test]
    fn prediction_ignores_masked_payload() {
        let rows: Vec<Vec<Option<f64>>> = (0..30)
            .map(|i| {
                vec![
                    if i % 4 == 0 { None } else { Some(i as f64) },
                    Some(((i * 7) % 13) as f64),
                ]
            })
            .collect();
        let targets: Vec<f64> = (0..30).map(|i| (i as f64).sqrt() * 3.0).collect();
        let refs: Vec<&[Option<f64>]> = rows.iter().map(|r| r.as_slice()).collect();
        let m = matrix(&refs);
        let model =
            GbdtModel::fit(&m, &targets, &GbdtParams::default(), &RandomSource::new(4)).unwrap();

        use rand::Rng;
        let mut g = RandomSource::new(5).rng();
        for _ in 0..200 {
            let payload_a: f64 = g.random_range(-1e6..1e6);
            let payload_b = f64::from_bits(g.random::<u64>() | 0x7ff8_0000_0000_0000);
            let mask = [true, false];
            let x = g.random_range(0.0..13.0);
            let p1 = model.predict(&[payload_a, x], &mask);
            let p2 = model.predict(&[payload_b, x], &mask);
            assert_eq!(p1.to_bits(), p2.to_bits());
        }
    }

    #[test]
    fn deterministic_fit_with_full_features() {
        use rand::Rng;
        let mut g = RandomSource::new(6).rng();
        let mut m = FeatureMatrix::new(3);
        let mut targets = Vec::new();
        for _ in 0..60 {
            let vals = [
                g.random_range(-2.0..2.0),
                g.random_range(-2.0..2.0),
                g.random_range(-2.0..2.0),
            ];
            let mask = [false, g.random_range(0.0..1.0) < 0.3, false];
            m.push_row(&vals, &mask).unwrap();
            targets.push(vals[0] * 2.0 - vals[2]);
        }
        let a = GbdtModel::fit(&m, &targets, &GbdtParams::default(), &RandomSource::new(7))
            .unwrap();
        let b = GbdtModel::fit(&m, &targets, &GbdtParams::default(), &RandomSource::new(7))
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn importance_concentrates_on_informative_feature() {
        use rand::Rng;
        let mut importances = Vec::new();
        for seed in 0..5u64 {
            let mut g = RandomSource::new(seed).rng();
            let mut m = FeatureMatrix::new(5);
            let mut targets = Vec::new();
            for _ in 0..200 {
                let vals: Vec<f64> = (0..5).map(|_| g.random_range(-1.0..1.0)).collect();
                let mask = [false; 5];
                m.push_row(&vals, &mask).unwrap();
                targets.push(vals[2] * 5.0);
            }
            let model =
                GbdtModel::fit(&m, &targets, &GbdtParams::default(), &RandomSource::new(seed + 50))
                    .unwrap();
            importances.push(model.feature_importance()[2]);
        }
        importances.sort_by(f64::total_cmp);
        assert!(importances[2] > 0.9, "median importance {}", importances[2]);
    }

    #[test]
    fn single_feature_importance_is_one() {
        let values: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let m = dense_single_feature(&values);
        let model =
            GbdtModel::fit(&m, &values, &GbdtParams::default(), &RandomSource::new(8)).unwrap();
        let imp = model.feature_importance();
        assert!((imp[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn model_round_trips_through_json() {
        let values: Vec<f64> = (0..20).map(|i| (i as f64).cos()).collect();
        let m = dense_single_feature(&values);
        let model =
            GbdtModel::fit(&m, &values, &GbdtParams::default(), &RandomSource::new(9)).unwrap();
        let json = serde_json::to_string(&model).unwrap();
        let back: GbdtModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back, model);
        let probe = [0.3];
        assert_eq!(
            model.predict(&probe, &[false]).to_bits(),
            back.predict(&probe, &[false]).to_bits()
        );
    }
}
