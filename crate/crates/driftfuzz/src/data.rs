//! The universal data carrier: a real-valued matrix with an explicit
//! per-cell missingness mask.
//!
//! The mask is authoritative. A cell flagged missing stores a canonical quiet
//! NaN in the value buffer purely so that accidental reads are loud; no
//! operation in this crate reads the payload of a masked cell.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::RandomSource;

/// An m x n matrix of reals with a missingness mask and named columns.
#[derive(Debug, Clone)]
pub struct ObservationSet {
    values: Vec<f64>,
    mask: Vec<bool>,
    rows: usize,
    cols: usize,
    column_names: Vec<String>,
}

// Masked cells hold NaN payloads that must not poison equality: two sets are
// equal when their shapes, names, masks, and observed values agree.
impl PartialEq for ObservationSet {
    fn eq(&self, other: &Self) -> bool {
        self.rows == other.rows
            && self.cols == other.cols
            && self.column_names == other.column_names
            && self.mask == other.mask
            && self
                .values
                .iter()
                .zip(&other.values)
                .zip(&self.mask)
                .all(|((a, b), &m)| m || a == b)
    }
}

impl ObservationSet {
    /// Build a set from row-major values and a parallel mask
    /// (`true` = missing). Masked cells are canonicalized to quiet NaN.
    pub fn from_parts(
        values: Vec<f64>,
        mask: Vec<bool>,
        rows: usize,
        cols: usize,
        column_names: Vec<String>,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidParameter(
                "observation set needs at least one row and one column".into(),
            ));
        }
        if values.len() != rows * cols || mask.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "{} values / {} mask entries for a {}x{} matrix",
                values.len(),
                mask.len(),
                rows,
                cols
            )));
        }
        if column_names.len() != cols {
            return Err(Error::ShapeMismatch(format!(
                "{} column names for {} columns",
                column_names.len(),
                cols
            )));
        }
        for (i, name) in column_names.iter().enumerate() {
            if column_names[..i].contains(name) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate column name `{name}`"
                )));
            }
        }
        let mut values = values;
        for (v, &m) in values.iter_mut().zip(mask.iter()) {
            if m {
                *v = f64::NAN;
            } else if v.is_nan() {
                return Err(Error::InvalidParameter(
                    "NaN value in a cell not flagged missing".into(),
                ));
            }
        }
        Ok(ObservationSet {
            values,
            mask,
            rows,
            cols,
            column_names,
        })
    }

    /// Build a fully observed set from row-major values.
    pub fn complete(values: Vec<f64>, rows: usize, cols: usize, names: Vec<String>) -> Result<Self> {
        let mask = vec![false; values.len()];
        Self::from_parts(values, mask, rows, cols, names)
    }

    /// Generic column names `x0..x{n-1}`.
    pub fn default_names(cols: usize) -> Vec<String> {
        (0..cols).map(|j| format!("x{j}")).collect()
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    /// Value at (row, col); `None` when the cell is missing.
    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        let idx = row * self.cols + col;
        if self.mask[idx] {
            None
        } else {
            Some(self.values[idx])
        }
    }

    pub fn is_missing(&self, row: usize, col: usize) -> bool {
        self.mask[row * self.cols + col]
    }

    /// View of one row.
    pub fn row(&self, row: usize) -> RowView<'_> {
        let start = row * self.cols;
        RowView {
            values: &self.values[start..start + self.cols],
            mask: &self.mask[start..start + self.cols],
        }
    }

    pub fn row_is_complete(&self, row: usize) -> bool {
        let start = row * self.cols;
        !self.mask[start..start + self.cols].iter().any(|&m| m)
    }

    /// Number of missing cells in a column.
    pub fn missing_in_column(&self, col: usize) -> usize {
        (0..self.rows)
            .filter(|&i| self.mask[i * self.cols + col])
            .count()
    }

    /// Iterator over the observed values of one column.
    pub fn observed_column(&self, col: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.rows).filter_map(move |i| self.get(i, col))
    }

    /// Copy the selected rows into a new set. Order follows `indices`.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut values = Vec::with_capacity(indices.len() * self.cols);
        let mut mask = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            let start = i * self.cols;
            values.extend_from_slice(&self.values[start..start + self.cols]);
            mask.extend_from_slice(&self.mask[start..start + self.cols]);
        }
        ObservationSet::from_parts(values, mask, indices.len(), self.cols, self.column_names.clone())
    }

    /// Replace a cell's value and clear its missing flag.
    pub(crate) fn fill(&mut self, row: usize, col: usize, value: f64) {
        let idx = row * self.cols + col;
        self.values[idx] = value;
        self.mask[idx] = false;
    }
}

/// Borrowed view of one observation.
#[derive(Debug, Clone, Copy)]
pub struct RowView<'a> {
    values: &'a [f64],
    mask: &'a [bool],
}

impl<'a> RowView<'a> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, col: usize) -> Option<f64> {
        if self.mask[col] {
            None
        } else {
            Some(self.values[col])
        }
    }

    pub fn is_missing(&self, col: usize) -> bool {
        self.mask[col]
    }

    pub fn is_complete(&self) -> bool {
        !self.mask.iter().any(|&m| m)
    }

    /// The raw value buffer. Masked positions hold canonical NaN; callers
    /// must consult the mask before trusting any entry.
    pub fn values(&self) -> &'a [f64] {
        self.values
    }

    pub fn mask(&self) -> &'a [bool] {
        self.mask
    }

    /// Copy into an owned vector of present values, requiring completeness.
    pub fn to_complete_vec(&self) -> Result<Vec<f64>> {
        if !self.is_complete() {
            return Err(Error::MissingValueInDistance);
        }
        Ok(self.values.to_vec())
    }
}

/// Per-column missing fractions of a source set.
#[derive(Debug, Clone, PartialEq)]
pub struct MissingRateVector {
    rates: Vec<f64>,
}

impl MissingRateVector {
    /// Build from explicit rates, each in [0, 1].
    pub fn new(rates: Vec<f64>) -> Result<Self> {
        if rates.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(Error::InvalidParameter(
                "missing rates must lie in [0, 1]".into(),
            ));
        }
        Ok(MissingRateVector { rates })
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }
}

/// Per-column missing fraction: `rates[i] = (#missing in column i) / m`.
pub fn missing_rates(data: &ObservationSet) -> MissingRateVector {
    let m = data.n_rows() as f64;
    let rates = (0..data.n_cols())
        .map(|j| data.missing_in_column(j) as f64 / m)
        .collect();
    MissingRateVector { rates }
}

/// Result of partitioning a set into complete and incomplete rows.
///
/// Original row indices are retained so the two parts can be re-interleaved.
/// `incomplete` is `None` when every row is complete.
#[derive(Debug, Clone)]
pub struct SplitSet {
    pub complete: ObservationSet,
    pub complete_indices: Vec<usize>,
    pub incomplete: Option<ObservationSet>,
    pub incomplete_indices: Vec<usize>,
}

/// Partition rows by completeness, preserving order within each part.
///
/// Errors with [`Error::NoCompleteRows`] when no row is fully observed.
pub fn split_complete_missing(data: &ObservationSet) -> Result<SplitSet> {
    let mut complete_indices = Vec::new();
    let mut incomplete_indices = Vec::new();
    for i in 0..data.n_rows() {
        if data.row_is_complete(i) {
            complete_indices.push(i);
        } else {
            incomplete_indices.push(i);
        }
    }
    if complete_indices.is_empty() {
        return Err(Error::NoCompleteRows);
    }
    let complete = data.select_rows(&complete_indices)?;
    let incomplete = if incomplete_indices.is_empty() {
        None
    } else {
        Some(data.select_rows(&incomplete_indices)?)
    };
    Ok(SplitSet {
        complete,
        complete_indices,
        incomplete,
        incomplete_indices,
    })
}

/// Euclidean distance between two complete rows of equal length.
pub fn euclidean_distance(x: RowView<'_>, y: RowView<'_>) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if !x.is_complete() || !y.is_complete() {
        return Err(Error::MissingValueInDistance);
    }
    Ok(euclidean_slices(x.values(), y.values()))
}

/// Euclidean distance between two bare slices known to be complete.
pub fn euclidean_slices(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Mask each cell of column `i` independently with probability `rates[i]`.
///
/// Cells are visited in row-major order, one uniform draw per cell, so a
/// fixed [`RandomSource`] reproduces the same pattern bit-for-bit.
pub fn mask_values(
    data: &ObservationSet,
    rates: &MissingRateVector,
    rng: &RandomSource,
) -> Result<ObservationSet> {
    if rates.len() != data.n_cols() {
        return Err(Error::LengthMismatch {
            left: rates.len(),
            right: data.n_cols(),
        });
    }
    let mut gen = rng.rng();
    let rows = data.n_rows();
    let cols = data.n_cols();
    let mut values = Vec::with_capacity(rows * cols);
    let mut mask = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            let u: f64 = gen.random();
            let drop = u < rates.rates()[j];
            let cell_missing = data.is_missing(i, j) || drop;
            mask.push(cell_missing);
            values.push(if cell_missing {
                f64::NAN
            } else {
                data.get(i, j).unwrap()
            });
        }
    }
    ObservationSet::from_parts(values, mask, rows, cols, data.column_names().to_vec())
}
