//! Sparse bipartite networks, marginal pairs and time series of networks.
//!
//! A [`SparseNetwork`] stores only strictly positive weights in row-major
//! coordinate order (compressed by row). A column-major index can be built on
//! demand with [`SparseNetwork::column_index`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used when reconciling `sum(p)` with `sum(q)`.
pub const DEFAULT_TOTAL_REL_TOL: f64 = 1e-6;

/// Non-negative `rows x cols` matrix with only its positive entries stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NetworkRepr", into = "NetworkRepr")]
pub struct SparseNetwork {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct NetworkRepr {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl From<SparseNetwork> for NetworkRepr {
    fn from(net: SparseNetwork) -> Self {
        NetworkRepr {
            rows: net.rows,
            cols: net.cols,
            entries: net.entries().collect(),
        }
    }
}

impl TryFrom<NetworkRepr> for SparseNetwork {
    type Error = Error;

    fn try_from(repr: NetworkRepr) -> Result<Self> {
        SparseNetwork::from_triplets(repr.rows, repr.cols, repr.entries)
    }
}

/// Column-major view of a [`SparseNetwork`]: for column `j`, the slice
/// `col_ptr[j]..col_ptr[j + 1]` of `row_idx` / `entry` lists the rows and the
/// positions of the matching entries in the row-major storage.
#[derive(Debug, Clone)]
pub struct ColumnIndex {
    pub col_ptr: Vec<usize>,
    pub row_idx: Vec<usize>,
    pub entry: Vec<usize>,
}

impl ColumnIndex {
    pub fn column(&self, j: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        let range = self.col_ptr[j]..self.col_ptr[j + 1];
        self.row_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.entry[range].iter().copied())
    }
}

impl SparseNetwork {
    /// Empty (all-zero) network.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        SparseNetwork {
            rows,
            cols,
            row_ptr: vec![0; rows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds a network from `(row, col, weight)` triplets in any order.
    ///
    /// Zero weights are dropped. Negative or non-finite weights, out-of-range
    /// indices and duplicate coordinates are rejected.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut items: Vec<(usize, usize, f64)> = Vec::new();
        for (i, j, w) in triplets {
            if i >= rows || j >= cols {
                return Err(Error::IndexOutOfRange {
                    row: i,
                    col: j,
                    rows,
                    cols,
                });
            }
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidWeight {
                    row: i,
                    col: j,
                    value: w,
                });
            }
            items.push((i, j, w));
        }
        items.sort_by_key(|&(i, j, _)| (i, j));
        for pair in items.windows(2) {
            if pair[0].0 == pair[1].0 && pair[0].1 == pair[1].1 {
                return Err(Error::DuplicateEntry {
                    row: pair[0].0,
                    col: pair[0].1,
                });
            }
        }
        Ok(Self::from_sorted_unchecked(
            rows,
            cols,
            items.into_iter().filter(|&(_, _, w)| w > 0.0),
        ))
    }

    /// Builds from a dense row-major matrix. Rows must all have equal length.
    pub fn from_dense(dense: &[Vec<f64>]) -> Result<Self> {
        let rows = dense.len();
        let cols = dense.first().map_or(0, Vec::len);
        if let Some(bad) = dense.iter().find(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch {
                expected: format!("{cols} columns"),
                got: format!("{} columns", bad.len()),
            });
        }
        Self::from_triplets(
            rows,
            cols,
            dense
                .iter()
                .enumerate()
                .flat_map(|(i, r)| r.iter().enumerate().map(move |(j, &w)| (i, j, w))),
        )
    }

    /// Triplets must already be sorted row-major, unique, in range and positive.
    pub(crate) fn from_sorted_unchecked(
        rows: usize,
        cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Self {
        let mut row_ptr = vec![0usize; rows + 1];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for (i, j, w) in triplets {
            debug_assert!(i < rows && j < cols && w > 0.0);
            row_ptr[i + 1] += 1;
            col_idx.push(j);
            values.push(w);
        }
        for i in 0..rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseNetwork {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    /// Entry positions belonging to row `i`.
    pub fn row_range(&self, i: usize) -> std::ops::Range<usize> {
        self.row_ptr[i]..self.row_ptr[i + 1]
    }

    /// `(col, weight)` pairs of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_range(i);
        self.col_idx[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }

    /// All `(row, col, weight)` triplets in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |i| self.row(i).map(move |(j, w)| (i, j, w)))
    }

    /// Row index of every stored entry, aligned with [`values`](Self::values).
    pub fn entry_rows(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.nnz());
        for i in 0..self.rows {
            out.extend(std::iter::repeat_n(i, self.row_ptr[i + 1] - self.row_ptr[i]));
        }
        out
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i >= self.rows {
            return 0.0;
        }
        let r = self.row_range(i);
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.get(i, j) > 0.0
    }

    pub fn column_index(&self) -> ColumnIndex {
        let mut col_ptr = vec![0usize; self.cols + 1];
        for &j in &self.col_idx {
            col_ptr[j + 1] += 1;
        }
        for j in 0..self.cols {
            col_ptr[j + 1] += col_ptr[j];
        }
        let mut next = col_ptr.clone();
        let mut row_idx = vec![0usize; self.nnz()];
        let mut entry = vec![0usize; self.nnz()];
        for i in 0..self.rows {
            for k in self.row_range(i) {
                let j = self.col_idx[k];
                row_idx[next[j]] = i;
                entry[next[j]] = k;
                next[j] += 1;
            }
        }
        ColumnIndex {
            col_ptr,
            row_idx,
            entry,
        }
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).map(|(_, w)| w).sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (&j, &w) in self.col_idx.iter().zip(&self.values) {
            out[j] += w;
        }
        out
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Smallest stored weight, if any.
    pub fn min_positive(&self) -> Option<f64> {
        self.values.iter().copied().reduce(f64::min)
    }

    /// Same sparsity structure with new values; non-positive values are dropped.
    pub fn with_values(&self, values: &[f64]) -> SparseNetwork {
        assert_eq!(values.len(), self.nnz(), "value vector length mismatch");
        let rows = self.entry_rows();
        Self::from_sorted_unchecked(
            self.rows,
            self.cols,
            rows.into_iter()
                .zip(self.col_idx.iter().copied())
                .zip(values.iter().copied())
                .filter(|&(_, w)| w > 0.0)
                .map(|((i, j), w)| (i, j, w)),
        )
    }

    pub fn scaled(&self, c: f64) -> SparseNetwork {
        let values: Vec<f64> = self.values.iter().map(|w| w * c).collect();
        self.with_values(&values)
    }

    /// Returns a copy with `weight` added at each listed coordinate.
    pub fn with_added(&self, additions: &[(usize, usize)], weight: f64) -> Result<SparseNetwork> {
        let mut items: Vec<(usize, usize, f64)> = self.entries().collect();
        for &(i, j) in additions {
            if i >= self.rows || j >= self.cols {
                return Err(Error::IndexOutOfRange {
                    row: i,
                    col: j,
                    rows: self.rows,
                    cols: self.cols,
                });
            }
            items.push((i, j, weight));
        }
        items.sort_by_key(|&(i, j, _)| (i, j));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(items.len());
        for (i, j, w) in items {
            match merged.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += w,
                _ => merged.push((i, j, w)),
            }
        }
        SparseNetwork::from_triplets(self.rows, self.cols, merged)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.cols]; self.rows];
        for (i, j, w) in self.entries() {
            out[i][j] = w;
        }
        out
    }

    /// Sum of squared weights.
    pub fn frobenius_sq(&self) -> f64 {
        self.values.iter().map(|w| w * w).sum()
    }
}

/// Target row sums `p` and column sums `q` for one time step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalPair {
    p: Vec<f64>,
    q: Vec<f64>,
    total: f64,
}

impl MarginalPair {
    /// Validates entries and reconciles totals with [`DEFAULT_TOTAL_REL_TOL`].
    pub fn new(p: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        Self::with_tolerance(p, q, DEFAULT_TOTAL_REL_TOL)
    }

    /// Rejects negative or non-finite entries. If `|sum(p) - sum(q)| <=
    /// rel_tol * sum(p)`, `q` is rescaled so the totals agree; otherwise the
    /// mismatch is an error.
    pub fn with_tolerance(p: Vec<f64>, mut q: Vec<f64>, rel_tol: f64) -> Result<Self> {
        check_entries(&p)?;
        check_entries(&q)?;
        let row_total: f64 = p.iter().sum();
        let col_total: f64 = q.iter().sum();
        if row_total <= 0.0 {
            return Err(Error::Empty("marginal total must be positive".into()));
        }
        if (row_total - col_total).abs() > rel_tol * row_total {
            return Err(Error::TotalMismatch {
                row_total,
                col_total,
            });
        }
        if row_total != col_total {
            let s = row_total / col_total;
            q.iter_mut().for_each(|x| *x *= s);
        }
        Ok(MarginalPair {
            p,
            q,
            total: row_total,
        })
    }

    /// No validation; callers guarantee matching totals.
    pub(crate) fn from_parts_unchecked(p: Vec<f64>, q: Vec<f64>) -> Self {
        let total = p.iter().sum();
        MarginalPair { p, q, total }
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn rows(&self) -> usize {
        self.p.len()
    }

    pub fn cols(&self) -> usize {
        self.q.len()
    }

    pub fn check_dims(&self, net: &SparseNetwork) -> Result<()> {
        if net.shape() != (self.p.len(), self.q.len()) {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{}", net.rows(), net.cols()),
                got: format!("marginals of length {} and {}", self.p.len(), self.q.len()),
            });
        }
        Ok(())
    }
}

fn check_entries(v: &[f64]) -> Result<()> {
    match v.iter().position(|x| !x.is_finite() || *x < 0.0) {
        Some(index) => Err(Error::InvalidMarginal {
            index,
            value: v[index],
        }),
        None => Ok(()),
    }
}

/// Row and column sums of `net`.
pub fn marginals(net: &SparseNetwork) -> MarginalPair {
    MarginalPair::from_parts_unchecked(net.row_sums(), net.col_sums())
}

/// Checks dimensions against `net` and reconciles the totals of `(p, q)`.
pub fn validate_pair(
    net: &SparseNetwork,
    p: Vec<f64>,
    q: Vec<f64>,
    rel_tol: f64,
) -> Result<MarginalPair> {
    let marg = MarginalPair::with_tolerance(p, q, rel_tol)?;
    marg.check_dims(net)?;
    Ok(marg)
}

/// Ordered time slices sharing one shape.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSeries {
    labels: Vec<String>,
    slices: Vec<SparseNetwork>,
}

impl NetworkSeries {
    pub fn new(labels: Vec<String>, slices: Vec<SparseNetwork>) -> Result<Self> {
        if labels.len() != slices.len() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} labels", slices.len()),
                got: format!("{} labels", labels.len()),
            });
        }
        if let Some(first) = slices.first() {
            if let Some(bad) = slices.iter().find(|s| s.shape() != first.shape()) {
                return Err(Error::DimensionMismatch {
                    expected: format!("{}x{}", first.rows(), first.cols()),
                    got: format!("{}x{}", bad.rows(), bad.cols()),
                });
            }
        }
        Ok(NetworkSeries { labels, slices })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn slices(&self) -> &[SparseNetwork] {
        &self.slices
    }

    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }
}

/// Entrywise sum of all slices.
pub fn aggregate(series: &NetworkSeries) -> Result<SparseNetwork> {
    aggregate_slices(series.slices())
}

pub fn aggregate_slices(slices: &[SparseNetwork]) -> Result<SparseNetwork> {
    let first = slices
        .first()
        .ok_or_else(|| Error::Empty("cannot aggregate an empty series".into()))?;
    let (rows, cols) = first.shape();
    if let Some(bad) = slices.iter().find(|s| s.shape() != (rows, cols)) {
        return Err(Error::DimensionMismatch {
            expected: format!("{rows}x{cols}"),
            got: format!("{}x{}", bad.rows(), bad.cols()),
        });
    }
    let mut items: Vec<(usize, usize, f64)> = slices.iter().flat_map(|s| s.entries()).collect();
    items.sort_by_key(|&(i, j, _)| (i, j));
    let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(items.len());
    for (i, j, w) in items {
        match merged.last_mut() {
            Some(last) if last.0 == i && last.1 == j => last.2 += w,
            _ => merged.push((i, j, w)),
        }
    }
    Ok(SparseNetwork::from_sorted_unchecked(rows, cols, merged))
}
