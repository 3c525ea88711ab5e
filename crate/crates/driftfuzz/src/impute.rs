//! The imputation pool: zero, mean, median, most-frequent, and iterative
//! (round-robin least squares) fills.
//!
//! These serve two roles: feature builders for distance learning, and the
//! standalone baseline that fills a window before ordinary drift detection.

use serde::{Deserialize, Serialize};

use crate::data::ObservationSet;
use crate::error::{Error, Result};

/// Closed enumeration of fill strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImputeKind {
    Zero,
    Mean,
    Median,
    MostFrequent,
    Iterative,
}

impl ImputeKind {
    pub fn name(&self) -> &'static str {
        match self {
            ImputeKind::Zero => "zero",
            ImputeKind::Mean => "mean",
            ImputeKind::Median => "median",
            ImputeKind::MostFrequent => "most_frequent",
            ImputeKind::Iterative => "iterative",
        }
    }
}

/// An imputation method with its (iterative-only) stopping parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImputeMethod {
    pub kind: ImputeKind,
    /// Maximum round-robin passes of the iterative fill.
    pub iterative_max_rounds: usize,
    /// Stop when no cell moved by more than this between rounds.
    pub iterative_tolerance: f64,
}

impl ImputeMethod {
    pub fn new(kind: ImputeKind) -> Self {
        ImputeMethod {
            kind,
            iterative_max_rounds: 10,
            iterative_tolerance: 1e-4,
        }
    }

    pub fn zero() -> Self {
        Self::new(ImputeKind::Zero)
    }

    pub fn mean() -> Self {
        Self::new(ImputeKind::Mean)
    }

    pub fn median() -> Self {
        Self::new(ImputeKind::Median)
    }

    pub fn most_frequent() -> Self {
        Self::new(ImputeKind::MostFrequent)
    }

    pub fn iterative(max_rounds: usize, tolerance: f64) -> Result<Self> {
        if max_rounds < 1 {
            return Err(Error::InvalidParameter(
                "iterative imputation needs at least one round".into(),
            ));
        }
        if tolerance <= 0.0 {
            return Err(Error::InvalidParameter(
                "iterative tolerance must be positive".into(),
            ));
        }
        Ok(ImputeMethod {
            kind: ImputeKind::Iterative,
            iterative_max_rounds: max_rounds,
            iterative_tolerance: tolerance,
        })
    }
}

/// The default pool, in fixed feature-layout order.
pub fn default_pool() -> Vec<ImputeMethod> {
    vec![
        ImputeMethod::zero(),
        ImputeMethod::mean(),
        ImputeMethod::median(),
        ImputeMethod::most_frequent(),
        ImputeMethod::iterative(10, 1e-4).unwrap(),
    ]
}

/// Fill every missing cell of `data` according to `method`.
///
/// Non-missing cells are never modified. Column statistics are computed from
/// the observed cells only; a column with no observed cell raises
/// [`Error::EmptyColumn`].
pub fn impute(data: &ObservationSet, method: &ImputeMethod) -> Result<ObservationSet> {
    match method.kind {
        ImputeKind::Zero => fill_constant(data, |_| Ok(0.0)),
        ImputeKind::Mean => {
            let means = column_means(data)?;
            fill_constant(data, |j| Ok(means[j]))
        }
        ImputeKind::Median => {
            let meds = column_stat(data, median_lower)?;
            fill_constant(data, |j| Ok(meds[j]))
        }
        ImputeKind::MostFrequent => {
            let modes = column_stat(data, mode_smallest)?;
            fill_constant(data, |j| Ok(modes[j]))
        }
        ImputeKind::Iterative => iterative_fill(data, method),
    }
}

fn fill_constant(
    data: &ObservationSet,
    stat: impl Fn(usize) -> Result<f64>,
) -> Result<ObservationSet> {
    let mut out = data.clone();
    for j in 0..data.n_cols() {
        if data.missing_in_column(j) == 0 {
            continue;
        }
        let v = stat(j)?;
        for i in 0..data.n_rows() {
            if data.is_missing(i, j) {
                out.fill(i, j, v);
            }
        }
    }
    Ok(out)
}

fn column_means(data: &ObservationSet) -> Result<Vec<f64>> {
    (0..data.n_cols())
        .map(|j| {
            let mut sum = 0.0;
            let mut count = 0usize;
            for v in data.observed_column(j) {
                sum += v;
                count += 1;
            }
            if count == 0 {
                Err(Error::EmptyColumn(data.column_names()[j].clone()))
            } else {
                Ok(sum / count as f64)
            }
        })
        .collect()
}

fn column_stat(
    data: &ObservationSet,
    stat: impl Fn(&mut Vec<f64>) -> f64,
) -> Result<Vec<f64>> {
    (0..data.n_cols())
        .map(|j| {
            let mut vals: Vec<f64> = data.observed_column(j).collect();
            if vals.is_empty() {
                Err(Error::EmptyColumn(data.column_names()[j].clone()))
            } else {
                Ok(stat(&mut vals))
            }
        })
        .collect()
}

/// Median with the lower-middle element on even counts.
fn median_lower(vals: &mut Vec<f64>) -> f64 {
    vals.sort_by(f64::total_cmp);
    vals[(vals.len() - 1) / 2]
}

/// Mode; ties go to the smallest value.
fn mode_smallest(vals: &mut Vec<f64>) -> f64 {
    vals.sort_by(f64::total_cmp);
    let mut best = vals[0];
    let mut best_count = 0usize;
    let mut i = 0;
    while i < vals.len() {
        let mut j = i + 1;
        while j < vals.len() && vals[j] == vals[i] {
            j += 1;
        }
        if j - i > best_count {
            best_count = j - i;
            best = vals[i];
        }
        i = j;
    }
    best
}

/// Round-robin least-squares fill: initialize missing cells with column
/// means, then repeatedly regress each incomplete column on all others over
/// the rows where it was observed, overwriting its missing cells with the
/// predictions. Stops when no cell moves more than the tolerance or the
/// round cap is hit. Deterministic; column order matters and is part of the
/// contract.
fn iterative_fill(data: &ObservationSet, method: &ImputeMethod) -> Result<ObservationSet> {
    let means = column_means(data)?;
    let mut out = data.clone();
    let incomplete_cols: Vec<usize> = (0..data.n_cols())
        .filter(|&j| data.missing_in_column(j) > 0)
        .collect();
    for &j in &incomplete_cols {
        for i in 0..data.n_rows() {
            if data.is_missing(i, j) {
                out.fill(i, j, means[j]);
            }
        }
    }
    if incomplete_cols.is_empty() {
        return Ok(out);
    }
    if data.n_cols() == 1 {
        // No regressors; the mean fill stands.
        return Ok(out);
    }

    let n = data.n_cols();
    for _round in 0..method.iterative_max_rounds {
        let mut max_change: f64 = 0.0;
        for &target in &incomplete_cols {
            let observed_rows: Vec<usize> = (0..data.n_rows())
                .filter(|&i| !data.is_missing(i, target))
                .collect();
            let predictors: Vec<usize> = (0..n).filter(|&j| j != target).collect();

            let fit = ols_fit(&out, &observed_rows, &predictors, target);
            match fit {
                Some(beta) => {
                    for i in 0..data.n_rows() {
                        if data.is_missing(i, target) {
                            let mut pred = beta[0];
                            for (k, &p) in predictors.iter().enumerate() {
                                pred += beta[k + 1] * out.get(i, p).unwrap();
                            }
                            let old = out.get(i, target).unwrap();
                            max_change = max_change.max((pred - old).abs());
                            out.fill(i, target, pred);
                        }
                    }
                }
                None => {
                    log::warn!(
                        "iterative imputation: singular system for column `{}`, keeping mean fill",
                        data.column_names()[target]
                    );
                    for i in 0..data.n_rows() {
                        if data.is_missing(i, target) {
                            let old = out.get(i, target).unwrap();
                            max_change = max_change.max((means[target] - old).abs());
                            out.fill(i, target, means[target]);
                        }
                    }
                }
            }
        }
        if max_change < method.iterative_tolerance {
            break;
        }
    }
    Ok(out)
}

/// Ordinary least squares of `target` on `[1, predictors]` over the given
/// rows, solved via the normal equations. Returns `None` when the system is
/// rank-deficient.
fn ols_fit(
    data: &ObservationSet,
    rows: &[usize],
    predictors: &[usize],
    target: usize,
) -> Option<Vec<f64>> {
    let p = predictors.len() + 1;
    if rows.len() < p {
        return None;
    }
    let mut xtx = vec![0.0f64; p * p];
    let mut xty = vec![0.0f64; p];
    let mut x_row = vec![0.0f64; p];
    for &i in rows {
        x_row[0] = 1.0;
        for (k, &j) in predictors.iter().enumerate() {
            x_row[k + 1] = data.get(i, j).unwrap();
        }
        let y = data.get(i, target).unwrap();
        for a in 0..p {
            xty[a] += x_row[a] * y;
            for b in a..p {
                xtx[a * p + b] += x_row[a] * x_row[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            xtx[a * p + b] = xtx[b * p + a];
        }
    }
    solve_symmetric(&mut xtx, &mut xty, p)
}

/// Gaussian elimination with partial pivoting; `None` on a near-singular
/// pivot. Pivot threshold scales with the matrix magnitude.
fn solve_symmetric(a: &mut [f64], b: &mut [f64], n: usize) -> Option<Vec<f64>> {
    let scale = a
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let tol = scale * 1e-10 * n as f64;
    for col in 0..n {
        let mut pivot_row = col;
        let mut pivot_val = a[col * n + col].abs();
        for r in col + 1..n {
            let v = a[r * n + col].abs();
            if v > pivot_val {
                pivot_val = v;
                pivot_row = r;
            }
        }
        if pivot_val <= tol {
            return None;
        }
        if pivot_row != col {
            for c in 0..n {
                a.swap(pivot_row * n + c, col * n + c);
            }
            b.swap(pivot_row, col);
        }
        let pivot = a[col * n + col];
        for r in col + 1..n {
            let factor = a[r * n + col] / pivot;
            if factor == 0.0 {
                continue;
            }
            for c in col..n {
                a[r * n + c] -= factor * a[col * n + c];
            }
            b[r] -= factor * b[col];
        }
    }
    let mut x = vec![0.0f64; n];
    for col in (0..n).rev() {
        let mut acc = b[col];
        for c in col + 1..n {
            acc -= a[col * n + c] * x[c];
        }
        x[col] = acc / a[col * n + col];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ObservationSet;

    fn col(values: &[Option<f64>]) -> ObservationSet {
        let mask: Vec<bool> = values.iter().map(Option::is_none).collect();
        let vals: Vec<f64> = values.iter().map(|v| v.unwrap_or(f64::NAN)).collect();
        ObservationSet::from_parts(vals, mask, values.len(), 1, vec!["c".into()]).unwrap()
    }

    #[test]
    fn mean_fill() {
        let d = col(&[Some(1.0), None, Some(3.0)]);
        let out = impute(&d, &ImputeMethod::mean()).unwrap();
        assert_eq!(out.get(1, 0), Some(2.0));
        assert_eq!(out.get(0, 0), Some(1.0));
    }

    #[test]
    fn median_fill_odd_count() {
        let d = col(&[Some(1.0), None, Some(9.0), Some(2.0)]);
        let out = impute(&d, &ImputeMethod::median()).unwrap();
        assert_eq!(out.get(1, 0), Some(2.0));
    }

    #[test]
    fn median_even_count_takes_lower_middle() {
        let d = col(&[Some(1.0), Some(2.0), Some(3.0), Some(4.0), None]);
        let out = impute(&d, &ImputeMethod::median()).unwrap();
        assert_eq!(out.get(4, 0), Some(2.0));
    }

    #[test]
    fn most_frequent_fill() {
        let d = col(&[Some(1.0), Some(1.0), Some(2.0), None]);
        let out = impute(&d, &ImputeMethod::most_frequent()).unwrap();
        assert_eq!(out.get(3, 0), Some(1.0));
    }

    #[test]
    fn most_frequent_tie_takes_smallest() {
        let d = col(&[Some(5.0), Some(5.0), Some(3.0), Some(3.0), None]);
        let out = impute(&d, &ImputeMethod::most_frequent()).unwrap();
        assert_eq!(out.get(4, 0), Some(3.0));
    }

    #[test]
    fn zero_fill() {
        let d = col(&[Some(4.0), None]);
        let out = impute(&d, &ImputeMethod::zero()).unwrap();
        assert_eq!(out.get(1, 0), Some(0.0));
    }

    #[test]
    fn complete_input_is_identity_for_all_methods() {
        let d = ObservationSet::complete(
            vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
            3,
            2,
            ObservationSet::default_names(2),
        )
        .unwrap();
        for method in default_pool() {
            assert_eq!(impute(&d, &method).unwrap(), d);
        }
    }

    #[test]
    fn empty_column_is_named() {
        let fully = ObservationSet::from_parts(
            vec![f64::NAN, 1.0, f64::NAN, 2.0],
            vec![true, false, true, false],
            2,
            2,
            vec!["left".into(), "right".into()],
        )
        .unwrap();
        match impute(&fully, &ImputeMethod::mean()) {
            Err(Error::EmptyColumn(name)) => assert_eq!(name, "left"),
            other => panic!("expected EmptyColumn, got {other:?}"),
        }
    }

    #[test]
    fn impute_never_touches_observed_cells() {
        use rand::Rng;
        let mut g = crate::rng::RandomSource::new(4).rng();
        let rows = 20;
        let cols = 3;
        let mut values = Vec::new();
        let mut mask = Vec::new();
        for _ in 0..rows * cols {
            values.push(g.random_range(-5.0..5.0));
            mask.push(g.random_range(0.0..1.0) < 0.25);
        }
        // Ensure at least one observed value per column.
        for j in 0..cols {
            mask[j] = false;
        }
        let d = ObservationSet::from_parts(
            values,
            mask,
            rows,
            cols,
            ObservationSet::default_names(cols),
        )
        .unwrap();
        for method in default_pool() {
            let out = impute(&d, &method).unwrap();
            for i in 0..rows {
                for j in 0..cols {
                    if let Some(v) = d.get(i, j) {
                        assert_eq!(out.get(i, j), Some(v));
                    } else {
                        assert!(out.get(i, j).is_some());
                    }
                }
            }
        }
    }

    #[test]
    fn mean_fill_preserves_column_means() {
        let d = col(&[Some(1.0), Some(5.0), None, Some(3.0), None]);
        let out = impute(&d, &ImputeMethod::mean()).unwrap();
        let observed_mean = 3.0;
        let full_mean: f64 = (0..5).map(|i| out.get(i, 0).unwrap()).sum::<f64>() / 5.0;
        assert!((full_mean - observed_mean).abs() < 1e-12);
    }

    #[test]
    fn iterative_recovers_exact_linear_relation() {
        // col1 = 2 * col0 on complete rows; the missing col1 cell sits at
        // col0 = 5, so least squares should predict 10.
        let values = vec![
            1.0, 2.0, //
            2.0, 4.0, //
            3.0, 6.0, //
            4.0, 8.0, //
            5.0, f64::NAN,
        ];
        let mask = vec![
            false, false, false, false, false, false, false, false, false, true,
        ];
        let d =
            ObservationSet::from_parts(values, mask, 5, 2, ObservationSet::default_names(2))
                .unwrap();
        let out = impute(&d, &ImputeMethod::iterative(10, 1e-8).unwrap()).unwrap();
        assert!((out.get(4, 1).unwrap() - 10.0).abs() < 1e-6);
    }

    #[test]
    fn iterative_single_column_falls_back_to_mean() {
        let d = col(&[Some(2.0), Some(4.0), None]);
        let out = impute(&d, &ImputeMethod::iterative(10, 1e-4).unwrap()).unwrap();
        assert_eq!(out.get(2, 0), Some(3.0));
    }

    #[test]
    fn iterative_is_deterministic() {
        use rand::Rng;
        let mut g = crate::rng::RandomSource::new(91).rng();
        let rows = 30;
        let cols = 4;
        let mut values = Vec::new();
        let mut mask = Vec::new();
        for i in 0..rows {
            let base = i as f64;
            for j in 0..cols {
                values.push(base * (j as f64 + 1.0) + g.random_range(-0.1..0.1));
                mask.push(i > 3 && g.random_range(0.0..1.0) < 0.2);
            }
        }
        let d = ObservationSet::from_parts(
            values,
            mask,
            rows,
            cols,
            ObservationSet::default_names(cols),
        )
        .unwrap();
        let m = ImputeMethod::iterative(10, 1e-6).unwrap();
        assert_eq!(impute(&d, &m).unwrap(), impute(&d, &m).unwrap());
    }

    #[test]
    fn singular_regression_falls_back_to_mean() {
        // Constant predictor column makes the design rank-deficient.
        let values = vec![
            1.0, 2.0, //
            1.0, 4.0, //
            1.0, f64::NAN,
        ];
        let mask = vec![false, false, false, false, false, true];
        let d =
            ObservationSet::from_parts(values, mask, 3, 2, ObservationSet::default_names(2))
                .unwrap();
        let out = impute(&d, &ImputeMethod::iterative(5, 1e-6).unwrap()).unwrap();
        assert_eq!(out.get(2, 1), Some(3.0));
    }
}
