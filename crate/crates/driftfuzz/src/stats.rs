//! Pearson chi-square drift test and evaluation metrics.
//!
//! Frequencies may be fractional: the fuzzy weighting upstream produces
//! weighted counts, and they enter the statistic unrounded.

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::fwf::FrequencyVector;
use crate::special::reg_upper_gamma;

/// A 2 x K table of reference-window and test-window bin frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct ContingencyTable {
    reference: Vec<f64>,
    test: Vec<f64>,
}

impl ContingencyTable {
    pub fn new(reference: Vec<f64>, test: Vec<f64>) -> Result<Self> {
        if reference.len() != test.len() {
            return Err(Error::LengthMismatch {
                left: reference.len(),
                right: test.len(),
            });
        }
        if reference.iter().chain(&test).any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "contingency cells must be finite and nonnegative".into(),
            ));
        }
        if reference.iter().sum::<f64>() <= 0.0 || test.iter().sum::<f64>() <= 0.0 {
            return Err(Error::InvalidParameter(
                "each contingency row needs a positive total".into(),
            ));
        }
        Ok(ContingencyTable { reference, test })
    }

    pub fn n_bins(&self) -> usize {
        self.reference.len()
    }

    pub fn reference(&self) -> &[f64] {
        &self.reference
    }

    pub fn test(&self) -> &[f64] {
        &self.test
    }
}

/// Pearson statistic of a 2 x K table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquare {
    pub statistic: f64,
    pub df: u32,
    /// Columns removed because both windows had zero counts there.
    pub dropped_columns: usize,
    /// Smallest expected cell count among the surviving columns.
    pub min_expected: f64,
}

/// Pearson chi-square statistic with expected counts `E_ij = n_i n_j / n`
/// and `df = (rows - 1)(cols - 1)` after dropping zero-total columns.
pub fn chi_square_statistic(table: &ContingencyTable) -> Result<ChiSquare> {
    let keep: Vec<usize> = (0..table.n_bins())
        .filter(|&j| table.reference[j] + table.test[j] > 0.0)
        .collect();
    let dropped = table.n_bins() - keep.len();
    if dropped > 0 {
        log::warn!("chi-square: dropped {dropped} zero-total column(s)");
    }
    if keep.len() < 2 {
        return Err(Error::DegenerateTable);
    }

    let row_ref: f64 = keep.iter().map(|&j| table.reference[j]).sum();
    let row_test: f64 = keep.iter().map(|&j| table.test[j]).sum();
    let grand = row_ref + row_test;

    let mut statistic = 0.0;
    let mut min_expected = f64::INFINITY;
    for &j in &keep {
        let col = table.reference[j] + table.test[j];
        for (row_total, observed) in [(row_ref, table.reference[j]), (row_test, table.test[j])] {
            let expected = row_total * col / grand;
            min_expected = min_expected.min(expected);
            let diff = observed - expected;
            statistic += diff * diff / expected;
        }
    }
    Ok(ChiSquare {
        statistic,
        df: (keep.len() as u32) - 1,
        dropped_columns: dropped,
        min_expected,
    })
}

/// Survival function of the chi-square distribution: `P(X > x)` for `df`
/// degrees of freedom, i.e. the regularized upper incomplete gamma
/// Q(df/2, x/2). Monotone decreasing in `x`.
pub fn chi_square_sf(x: f64, df: u32) -> f64 {
    assert!(x >= 0.0, "chi-square statistic must be nonnegative");
    assert!(df >= 1, "degrees of freedom must be at least 1");
    reg_upper_gamma(df as f64 / 2.0, x / 2.0)
}

/// Outcome of one two-window drift test.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftVerdict {
    pub statistic: f64,
    pub df: u32,
    pub p_value: f64,
    pub alpha: f64,
    pub drift: bool,
    /// Set when any expected cell count is at or below 5, the regime where
    /// the chi-square approximation degrades.
    pub low_expected_warning: bool,
    /// Zero-total columns removed before computing the statistic.
    pub dropped_columns: usize,
}

impl DriftVerdict {
    /// Human-readable warning labels for the wire format.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.low_expected_warning {
            w.push("low_expected_count".to_string());
        }
        if self.dropped_columns > 0 {
            w.push(format!("dropped_zero_columns:{}", self.dropped_columns));
        }
        w
    }
}

// Wire format: {chi2, df, p_value, alpha, drift, warnings[]}.
impl Serialize for DriftVerdict {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("DriftVerdict", 6)?;
        s.serialize_field("chi2", &self.statistic)?;
        s.serialize_field("df", &self.df)?;
        s.serialize_field("p_value", &self.p_value)?;
        s.serialize_field("alpha", &self.alpha)?;
        s.serialize_field("drift", &self.drift)?;
        s.serialize_field("warnings", &self.warnings())?;
        s.end()
    }
}

/// Pearson chi-square two-sample test of two frequency vectors.
pub fn drift_test(
    reference: &FrequencyVector,
    test: &FrequencyVector,
    alpha: f64,
) -> Result<DriftVerdict> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidParameter(format!(
            "alpha {alpha} outside [0, 1]"
        )));
    }
    let table = ContingencyTable::new(reference.counts().to_vec(), test.counts().to_vec())?;
    let chi = chi_square_statistic(&table)?;
    let p_value = chi_square_sf(chi.statistic, chi.df);
    Ok(DriftVerdict {
        statistic: chi.statistic,
        df: chi.df,
        p_value,
        alpha,
        drift: p_value < alpha,
        low_expected_warning: chi.min_expected <= 5.0,
        dropped_columns: chi.dropped_columns,
    })
}

/// Fraction of verdicts that rejected the null: `#drift / count`.
pub fn drift_detection_ratio(verdicts: &[DriftVerdict]) -> Result<f64> {
    if verdicts.is_empty() {
        return Err(Error::EmptyInput);
    }
    let hits = verdicts.iter().filter(|v| v.drift).count();
    Ok(hits as f64 / verdicts.len() as f64)
}

/// Product-moment correlation of two equal-length sequences.
pub fn pearson_correlation(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::TooFewRows {
            context: "pearson correlation",
            got: a.len(),
            need: 2,
        });
    }
    let n = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / n;
    let mean_b = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        let dx = x - mean_a;
        let dy = y - mean_b;
        cov += dx * dy;
        var_a += dx * dx;
        var_b += dy * dy;
    }
    if var_a == 0.0 || var_b == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok(cov / (var_a * var_b).sqrt())
}

/// Mean absolute error.
pub fn mae(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_paired(pred, truth)?;
    let n = pred.len() as f64;
    Ok(pred
        .iter()
        .zip(truth)
        .map(|(p, t)| (p - t).abs())
        .sum::<f64>()
        / n)
}

/// Root mean squared error. Always at least as large as [`mae`].
pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_paired(pred, truth)?;
    let n = pred.len() as f64;
    Ok((pred
        .iter()
        .zip(truth)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / n)
        .sqrt())
}

fn check_paired(pred: &[f64], truth: &[f64]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: truth.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(())
}

/// Sum of absolute differences between two sequences of detection ratios —
/// a robustness-to-missingness score for a detector evaluated with and
/// without missing values.
///
/// Combining the Type-I and Type-II sums of a detector over six data set
/// pairs into a per-comparison mean works like this:
///
/// ```
/// use driftfuzz::stats::tt_diff;
///
/// let type1_complete = [0.41, 0.0, 0.0, 0.0, 0.0, 0.0];
/// let type1_missing = [0.0; 6];
/// let type2_complete = [0.88, 0.0, 0.0, 0.0, 0.0, 0.0];
/// let type2_missing = [0.0; 6];
///
/// let t1 = tt_diff(&type1_missing, &type1_complete).unwrap();
/// let t2 = tt_diff(&type2_missing, &type2_complete).unwrap();
/// assert!((t1 - 0.41).abs() < 1e-12);
/// assert!((t2 - 0.88).abs() < 1e-12);
/// let mean_over_all = (t1 + t2) / 12.0;
/// assert!((mean_over_all - 0.1075).abs() < 1e-12);
/// ```
pub fn tt_diff(ratios_missing: &[f64], ratios_complete: &[f64]) -> Result<f64> {
    if ratios_missing.len() != ratios_complete.len() {
        return Err(Error::LengthMismatch {
            left: ratios_missing.len(),
            right: ratios_complete.len(),
        });
    }
    Ok(ratios_missing
        .iter()
        .zip(ratios_complete)
        .map(|(a, b)| (a - b).abs())
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fwf::FrequencyVector;

    fn table(reference: &[f64], test: &[f64]) -> ContingencyTable {
        ContingencyTable::new(reference.to_vec(), test.to_vec()).unwrap()
    }

    #[test]
    fn chi_square_zero_when_equal() {
        let chi = chi_square_statistic(&table(&[25.0, 25.0], &[25.0, 25.0])).unwrap();
        assert_eq!(chi.statistic, 0.0);
        assert_eq!(chi.df, 1);
    }

    #[test]
    fn chi_square_hand_example() {
        // Totals 30/30 per row and column, n = 60, E = 15 everywhere, so
        // chi2 = 4 * 25 / 15 = 20/3.
        let chi = chi_square_statistic(&table(&[10.0, 20.0], &[20.0, 10.0])).unwrap();
        assert!((chi.statistic - 20.0 / 3.0).abs() < 1e-9);
        assert_eq!(chi.df, 1);
    }

    #[test]
    fn chi_square_drops_zero_columns() {
        let chi = chi_square_statistic(&table(&[10.0, 0.0, 20.0], &[12.0, 0.0, 18.0])).unwrap();
        assert_eq!(chi.df, 1);
        assert_eq!(chi.dropped_columns, 1);
    }

    #[test]
    fn chi_square_degenerate_table() {
        assert!(matches!(
            chi_square_statistic(&table(&[10.0, 0.0], &[12.0, 0.0])),
            Err(Error::DegenerateTable)
        ));
    }

    #[test]
    fn chi_square_row_swap_invariance_and_homogeneity() {
        use rand::Rng;
        let mut g = crate::rng::RandomSource::new(33).rng();
        for _ in 0..200 {
            let k = g.random_range(2..8);
            let a: Vec<f64> = (0..k).map(|_| g.random_range(1.0..100.0)).collect();
            let b: Vec<f64> = (0..k).map(|_| g.random_range(1.0..100.0)).collect();
            let fwd = chi_square_statistic(&table(&a, &b)).unwrap();
            let rev = chi_square_statistic(&table(&b, &a)).unwrap();
            assert!((fwd.statistic - rev.statistic).abs() < 1e-9);

            let c = g.random_range(0.5..4.0);
            let ca: Vec<f64> = a.iter().map(|v| v * c).collect();
            let cb: Vec<f64> = b.iter().map(|v| v * c).collect();
            let scaled = chi_square_statistic(&table(&ca, &cb)).unwrap();
            assert!(
                (scaled.statistic - c * fwd.statistic).abs() < 1e-7 * (1.0 + scaled.statistic)
            );
        }
    }

    #[test]
    fn sf_boundaries() {
        assert_eq!(chi_square_sf(0.0, 1), 1.0);
        assert!(chi_square_sf(1e4, 3) < 1e-100);
    }

    #[test]
    fn sf_matches_normal_tail_for_df1() {
        // chi2_1 = Z^2, so P(X > 3.841) = P(|Z| > 1.95996...) = 0.0500.
        let p = chi_square_sf(3.841, 1);
        assert!((p - 0.05).abs() < 5e-4, "p = {p}");
    }

    #[test]
    fn sf_is_monotone_decreasing() {
        for df in [1u32, 2, 5, 19] {
            let mut prev = 1.0;
            for i in 1..50 {
                let p = chi_square_sf(i as f64 * 0.5, df);
                assert!(p <= prev);
                prev = p;
            }
        }
    }

    #[test]
    fn drift_test_identical_vectors() {
        let f = FrequencyVector::new(vec![50.0, 30.0, 20.0]).unwrap();
        let v = drift_test(&f, &f, 0.05).unwrap();
        assert_eq!(v.statistic, 0.0);
        assert_eq!(v.p_value, 1.0);
        assert!(!v.drift);
    }

    #[test]
    fn drift_test_disjoint_vectors() {
        let a = FrequencyVector::new(vec![100.0, 0.0]).unwrap();
        let b = FrequencyVector::new(vec![0.0, 100.0]).unwrap();
        let v = drift_test(&a, &b, 0.05).unwrap();
        assert!(v.statistic > 199.0);
        assert!(v.p_value < 1e-20);
        assert!(v.drift);
    }

    #[test]
    fn drift_test_low_expected_warning() {
        let a = FrequencyVector::new(vec![4.0, 96.0]).unwrap();
        let b = FrequencyVector::new(vec![4.0, 96.0]).unwrap();
        let v = drift_test(&a, &b, 0.05).unwrap();
        assert!(v.low_expected_warning);
        assert!(v.warnings().iter().any(|w| w == "low_expected_count"));
    }

    #[test]
    fn verdict_json_wire_format() {
        let a = FrequencyVector::new(vec![50.0, 50.0]).unwrap();
        let v = drift_test(&a, &a, 0.05).unwrap();
        let json: serde_json::Value = serde_json::to_value(&v).unwrap();
        for key in ["chi2", "df", "p_value", "alpha", "drift", "warnings"] {
            assert!(json.get(key).is_some(), "missing key {key}");
        }
    }

    #[test]
    fn detection_ratio_cases() {
        let hit = DriftVerdict {
            statistic: 9.0,
            df: 1,
            p_value: 0.001,
            alpha: 0.05,
            drift: true,
            low_expected_warning: false,
            dropped_columns: 0,
        };
        let miss = DriftVerdict {
            drift: false,
            p_value: 0.5,
            ..hit.clone()
        };
        let mut verdicts = vec![miss.clone(); 45];
        verdicts.extend(vec![hit.clone(); 5]);
        assert_eq!(drift_detection_ratio(&verdicts).unwrap(), 0.1);
        assert_eq!(drift_detection_ratio(&[miss]).unwrap(), 0.0);
        assert_eq!(drift_detection_ratio(&[hit]).unwrap(), 1.0);
        assert!(matches!(drift_detection_ratio(&[]), Err(Error::EmptyInput)));
    }

    #[test]
    fn correlation_cases() {
        let a = [1.0, 2.0, 3.5, 7.0];
        assert!((pearson_correlation(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = a.iter().map(|v| -v).collect();
        assert!((pearson_correlation(&a, &neg).unwrap() + 1.0).abs() < 1e-12);
        let x = [1.0, -1.0, 1.0, -1.0];
        let y = [1.0, 1.0, -1.0, -1.0];
        assert_eq!(pearson_correlation(&x, &y).unwrap(), 0.0);
        assert!(matches!(
            pearson_correlation(&[1.0, 1.0], &[2.0, 3.0]),
            Err(Error::ZeroVariance)
        ));
    }

    #[test]
    fn error_metrics() {
        let t = [1.0, 2.0];
        assert_eq!(mae(&t, &t).unwrap(), 0.0);
        assert_eq!(rmse(&t, &t).unwrap(), 0.0);

        let pred = [4.0, -2.0];
        let truth = [1.0, 2.0];
        assert!((mae(&pred, &truth).unwrap() - 3.5).abs() < 1e-12);
        assert!((rmse(&pred, &truth).unwrap() - 12.5f64.sqrt()).abs() < 1e-12);

        let shifted: Vec<f64> = t.iter().map(|v| v + 2.5).collect();
        assert!((mae(&shifted, &t).unwrap() - 2.5).abs() < 1e-12);
        assert!((rmse(&shifted, &t).unwrap() - 2.5).abs() < 1e-12);
    }

    #[test]
    fn rmse_dominates_mae_on_random_inputs() {
        use rand::Rng;
        let mut g = crate::rng::RandomSource::new(8).rng();
        for _ in 0..200 {
            let n = g.random_range(1..20);
            let p: Vec<f64> = (0..n).map(|_| g.random_range(-5.0..5.0)).collect();
            let t: Vec<f64> = (0..n).map(|_| g.random_range(-5.0..5.0)).collect();
            assert!(rmse(&p, &t).unwrap() >= mae(&p, &t).unwrap() - 1e-12);
        }
    }

    #[test]
    fn tt_diff_cases() {
        assert_eq!(tt_diff(&[0.1, 0.2], &[0.1, 0.2]).unwrap(), 0.0);
        let d = tt_diff(&[0.1, 0.2], &[0.0, 0.5]).unwrap();
        assert!((d - 0.4).abs() < 1e-12);
        assert!(matches!(
            tt_diff(&[0.1], &[0.1, 0.2]),
            Err(Error::LengthMismatch { .. })
        ));
    }
}
