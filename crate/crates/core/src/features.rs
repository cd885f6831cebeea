//! Column-named, row-major node feature matrix.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Raw range of a column before normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnRange {
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    names: Vec<String>,
    rows: usize,
    /// Row-major, `rows * names.len()` entries.
    values: Vec<f64>,
    ranges: Vec<ColumnRange>,
}

impl FeatureMatrix {
    pub fn new(names: Vec<String>, rows: usize, values: Vec<f64>, ranges: Vec<ColumnRange>) -> Result<Self> {
        if values.len() != rows * names.len() {
            return Err(Error::Shape(format!(
                "{} values for {} rows x {} columns",
                values.len(),
                rows,
                names.len()
            )));
        }
        if ranges.len() != names.len() {
            return Err(Error::Shape(format!("{} ranges for {} columns", ranges.len(), names.len())));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "feature `{}` row {}",
                names[i % names.len()],
                i / names.len()
            )));
        }
        Ok(FeatureMatrix {
            names,
            rows,
            values,
            ranges,
        })
    }

    /// Builds a matrix from whole columns, recording each column's own range.
    pub fn from_columns(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::Shape(format!("{} names for {} columns", names.len(), columns.len())));
        }
        let rows = columns.first().map_or(0, Vec::len);
        if let Some(c) = columns.iter().position(|c| c.len() != rows) {
            return Err(Error::Shape(format!("column `{}` has {} rows, expected {rows}", names[c], columns[c].len())));
        }
        let ranges = columns.iter().map(|c| column_range(c)).collect();
        let mut values = Vec::with_capacity(rows * names.len());
        for r in 0..rows {
            values.extend(columns.iter().map(|c| c[r]));
        }
        Self::new(names, rows, values, ranges)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn ranges(&self) -> &[ColumnRange] {
        &self.ranges
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        let c = self.cols();
        &self.values[r * c..(r + 1) * c]
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols() + c]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Column indices of `names`, failing on the first one absent from this matrix.
    pub fn resolve(&self, names: &[String]) -> Result<Vec<usize>> {
        names
            .iter()
            .map(|n| self.column_index(n).ok_or_else(|| Error::MissingColumn(n.clone())))
            .collect()
    }

    /// Subset of rows, in the given order. Ranges are carried over unchanged.
    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        let mut values = Vec::with_capacity(rows.len() * self.cols());
        for &r in rows {
            values.extend_from_slice(self.row(r));
        }
        FeatureMatrix {
            names: self.names.clone(),
            rows: rows.len(),
            values,
            ranges: self.ranges.clone(),
        }
    }

    /// Reorders columns to `names` (by name).
    pub fn select_columns(&self, names: &[String]) -> Result<FeatureMatrix> {
        let idx = self.resolve(names)?;
        let mut values = Vec::with_capacity(self.rows * idx.len());
        for r in 0..self.rows {
            let row = self.row(r);
            values.extend(idx.iter().map(|&c| row[c]));
        }
        Ok(FeatureMatrix {
            names: names.to_vec(),
            rows: self.rows,
            values,
            ranges: idx.iter().map(|&c| self.ranges[c]).collect(),
        })
    }

    /// Concatenates the columns of two matrices with the same row count.
    pub fn hstack(&self, other: &FeatureMatrix) -> Result<FeatureMatrix> {
        if self.rows != other.rows {
            return Err(Error::Shape(format!("{} rows vs {} rows", self.rows, other.rows)));
        }
        let mut names = self.names.clone();
        names.extend(other.names.iter().cloned());
        let mut values = Vec::with_capacity(self.values.len() + other.values.len());
        for r in 0..self.rows {
            values.extend_from_slice(self.row(r));
            values.extend_from_slice(other.row(r));
        }
        let mut ranges = self.ranges.clone();
        ranges.extend_from_slice(&other.ranges);
        FeatureMatrix::new(names, self.rows, values, ranges)
    }
}

pub(crate) fn column_range(col: &[f64]) -> ColumnRange {
    let min = col.iter().copied().fold(f64::INFINITY, f64::min);
    let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if col.is_empty() {
        ColumnRange { min: 0.0, max: 0.0 }
    } else {
        ColumnRange { min, max }
    }
}

/// Min-max scales `col` into `[0, 1]`; constant columns become all zero.
/// Returns the raw range and whether the column was constant.
pub fn min_max_normalize(col: &mut [f64]) -> (ColumnRange, bool) {
    let range = column_range(col);
    let span = range.max - range.min;
    if span > 0.0 {
        for v in col.iter_mut() {
            *v = (*v - range.min) / span;
        }
        (range, false)
    } else {
        col.iter_mut().for_each(|v| *v = 0.0);
        (range, true)
    }
}
