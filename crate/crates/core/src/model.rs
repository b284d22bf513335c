//! Shared data model: the observed panel, hyperparameters, loss weights,
//! deletion patterns and the weighted quadratic loss.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// An `n x T` panel of real observations with an explicit observation mask.
///
/// Rows are series, columns are time periods. Series and period indices on
/// this type are zero-based; [`SubsamplePattern`] uses one-based pairs.
/// Unobserved cells are stored as `0.0` and never read by any computation.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesDataset {
    values: DMatrix<f64>,
    observed: DMatrix<bool>,
    names: Vec<String>,
}

impl TimeSeriesDataset {
    /// Builds a dataset from values and an observation mask (`true` = observed).
    pub fn new(values: DMatrix<f64>, observed: DMatrix<bool>) -> Result<Self> {
        let ds = Self::from_parts(values, observed)?;
        if ds.observed_count() == 0 {
            return Err(Error::domain("dataset has no observed entries"));
        }
        Ok(ds)
    }

    /// Fully observed dataset.
    pub fn complete(values: DMatrix<f64>) -> Result<Self> {
        let observed = DMatrix::from_element(values.nrows(), values.ncols(), true);
        Self::new(values, observed)
    }

    /// Builds a dataset from per-series rows where `None` marks a missing value.
    pub fn from_rows(rows: &[Vec<Option<f64>>]) -> Result<Self> {
        let n = rows.len();
        let t = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != t) {
            return Err(Error::dim("ragged series rows"));
        }
        let mut values = DMatrix::zeros(n, t);
        let mut observed = DMatrix::from_element(n, t, false);
        for (i, row) in rows.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                if let Some(v) = v {
                    values[(i, c)] = *v;
                    observed[(i, c)] = true;
                }
            }
        }
        Self::new(values, observed)
    }

    /// Same as [`new`](Self::new) but allows a panel with no observed entry.
    /// Datasets derived by deletion may legitimately be empty.
    pub(crate) fn from_parts(mut values: DMatrix<f64>, observed: DMatrix<bool>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::dim("dataset needs n >= 1 and T >= 1"));
        }
        if values.shape() != observed.shape() {
            return Err(Error::dim(format!("values are {:?} but mask is {:?}", values.shape(), observed.shape())));
        }
        for (v, &o) in values.iter_mut().zip(observed.iter()) {
            if !o {
                *v = 0.0;
            } else if !v.is_finite() {
                return Err(Error::domain("observed entries must be finite"));
            }
        }
        let names = (1..=values.nrows()).map(|i| format!("y{i}")).collect();
        Ok(Self { values, observed, names })
    }

    /// Same mask and names with the observed cells transformed by `f(series, value)`.
    pub(crate) fn map_observed(&self, f: impl Fn(usize, f64) -> f64) -> Self {
        let mut values = self.values.clone();
        for t in 0..self.periods() {
            for i in 0..self.n() {
                if self.observed[(i, t)] {
                    values[(i, t)] = f(i, values[(i, t)]);
                }
            }
        }
        Self { values, observed: self.observed.clone(), names: self.names.clone() }
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n() {
            return Err(Error::dim(format!("{} names for {} series", names.len(), self.n())));
        }
        self.names = names;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    /// Number of time periods `T`.
    pub fn periods(&self) -> usize {
        self.values.ncols()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn get(&self, series: usize, period: usize) -> Option<f64> {
        self.observed[(series, period)].then(|| self.values[(series, period)])
    }

    pub fn is_observed(&self, series: usize, period: usize) -> bool {
        self.observed[(series, period)]
    }

    /// Values with unobserved cells zeroed.
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn mask(&self) -> &DMatrix<bool> {
        &self.observed
    }

    pub fn column(&self, period: usize) -> Vec<Option<f64>> {
        (0..self.n()).map(|i| self.get(i, period)).collect()
    }

    pub fn observed_count(&self) -> usize {
        self.observed.iter().filter(|&&o| o).count()
    }

    /// Indices of series with no observed value at all.
    pub fn fully_missing_series(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| (0..self.periods()).all(|c| !self.observed[(i, c)])).collect()
    }

    /// The first `periods` columns.
    pub fn prefix(&self, periods: usize) -> Result<Self> {
        self.window(0, periods)
    }

    /// Columns `start..end` (zero-based, end exclusive).
    pub fn window(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.periods() {
            return Err(Error::Index(format!("window {start}..{end} out of 0..{}", self.periods())));
        }
        Ok(Self {
            values: self.values.columns(start, end - start).into_owned(),
            observed: self.observed.columns(start, end - start).into_owned(),
            names: self.names.clone(),
        })
    }

    /// Selects a subset of series, in the given order.
    pub fn select_series(&self, idx: &[usize]) -> Result<Self> {
        if idx.is_empty() || idx.iter().any(|&i| i >= self.n()) {
            return Err(Error::Index("series selection out of range".into()));
        }
        let t = self.periods();
        let values = DMatrix::from_fn(idx.len(), t, |r, c| self.values[(idx[r], c)]);
        let observed = DMatrix::from_fn(idx.len(), t, |r, c| self.observed[(idx[r], c)]);
        let names = idx.iter().map(|&i| self.names[i].clone()).collect();
        Ok(Self { values, observed, names })
    }
}

/// The hyperparameter vector `(p, lambda, alpha, beta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperparameters {
    pub p: usize,
    pub lambda: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl Hyperparameters {
    pub fn new(p: usize, lambda: f64, alpha: f64, beta: f64) -> Result<Self> {
        let h = Self { p, lambda, alpha, beta };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p < 1 {
            return Err(Error::domain("lag order p must be >= 1"));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::domain("lambda must be finite and >= 0"));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::domain("alpha must lie in [0, 1]"));
        }
        if !(self.beta.is_finite() && self.beta >= 1.0) {
            return Err(Error::domain("beta must be finite and >= 1"));
        }
        Ok(())
    }
}

/// Nonnegative loss weights, one per series.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::domain("weights must be finite and nonnegative"));
        }
        if !w.iter().any(|&v| v > 0.0) {
            return Err(Error::domain("at least one weight must be positive"));
        }
        Ok(Self(w))
    }

    pub fn equal(n: usize) -> Self {
        Self(alloc::vec![1.0 / n as f64; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// A set of `(series, period)` cells to delete artificially.
///
/// Pairs are one-based on the public API (`1 <= i <= n`, `1 <= t <= T`).
/// Internally cells are zero-based, sorted by period then series.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct SubsamplePattern {
    cells: Vec<(usize, usize)>,
}

impl SubsamplePattern {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds a pattern from one-based `(series, period)` pairs.
    /// Duplicates collapse.
    pub fn from_pairs<I: IntoIterator<Item = (usize, usize)>>(pairs: I) -> Result<Self> {
        let mut cells = Vec::new();
        for (i, t) in pairs {
            if i == 0 || t == 0 {
                return Err(Error::Index(format!("pair ({i},{t}) is not one-based")));
            }
            cells.push((i - 1, t - 1));
        }
        Ok(Self::from_zero_based(cells))
    }

    pub(crate) fn from_zero_based(mut cells: Vec<(usize, usize)>) -> Self {
        cells.sort_unstable_by_key(|&(i, t)| (t, i));
        cells.dedup();
        Self { cells }
    }

    /// One-based `(series, period)` pairs.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.cells.iter().map(|&(i, t)| (i + 1, t + 1))
    }

    pub(crate) fn cells(&self) -> &[(usize, usize)] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn union(&self, other: &Self) -> Self {
        let mut cells = self.cells.clone();
        cells.extend_from_slice(&other.cells);
        Self::from_zero_based(cells)
    }

    /// True when some period has all `n` series deleted.
    pub fn has_full_column(&self, n: usize) -> bool {
        let mut run = 0;
        let mut current = usize::MAX;
        for &(_, t) in &self.cells {
            if t != current {
                current = t;
                run = 0;
            }
            run += 1;
            if run == n {
                return true;
            }
        }
        false
    }
}

/// An ordered list of deletion patterns.
pub type SubsampleFamily = Vec<SubsamplePattern>;

/// Returns a copy of `data` with every cell of `pattern` flagged missing.
pub fn apply_pattern(data: &TimeSeriesDataset, pattern: &SubsamplePattern) -> Result<TimeSeriesDataset> {
    let (n, t) = (data.n(), data.periods());
    let mut out = data.clone();
    for &(i, c) in pattern.cells() {
        if i >= n || c >= t {
            return Err(Error::Index(format!("pair ({},{}) outside a {n}x{t} panel", i + 1, c + 1)));
        }
        out.observed[(i, c)] = false;
        out.values[(i, c)] = 0.0;
    }
    Ok(out)
}

/// Weighted squared error over the observed entries of `actual`.
///
/// With `rescale` set, the weights of the observed series are scaled up so
/// that together they carry the total weight of all series.
pub fn loss(actual: &[Option<f64>], predicted: &[f64], w: &WeightVector, rescale: bool) -> Result<f64> {
    if actual.len() != predicted.len() || actual.len() != w.len() {
        return Err(Error::dim(format!(
            "loss on vectors of length {}, {} with {} weights",
            actual.len(),
            predicted.len(),
            w.len()
        )));
    }
    let mut total = 0.0;
    let mut observed_weight = 0.0;
    for ((a, p), wi) in actual.iter().zip(predicted).zip(w.as_slice()) {
        if let Some(a) = a {
            let e = a - p;
            total += wi * e * e;
            observed_weight += wi;
        }
    }
    if rescale && observed_weight > 0.0 {
        let all: f64 = w.as_slice().iter().sum();
        total *= all / observed_weight;
    }
    Ok(total)
}
