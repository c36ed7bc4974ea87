//! Convergence certification for IPF.
//!
//! IPF on `(X, p, q)` converges iff some matrix with marginals `(p, q)`
//! vanishes wherever `X` does. [`check_feasibility`] decides this with a
//! max-flow through source → rows (capacity `p_i`) → columns (unbounded, on the
//! support of `X`) → sink (capacity `q_j`). When the flow falls short,
//! [`find_blocking_set`] walks the residual structure to produce a row set `S`
//! whose marginal mass exceeds that of its column neighbourhood.

use std::collections::VecDeque;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::Dinic;
use crate::network::{MarginalPair, SparseNetwork};

/// Relative tolerance on `max_flow_value` versus `sum(p)`.
pub const FEASIBILITY_REL_TOL: f64 = 1e-9;
/// Relative residual below which Dinic stops augmenting.
const AUGMENT_CUTOFF: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowDiagnostics {
    pub max_flow_value: f64,
    /// Flow on each stored entry of `X`, aligned with its row-major entries.
    pub edge_flows: Vec<f64>,
    pub row_flow: Vec<f64>,
    pub col_flow: Vec<f64>,
    pub feasible: bool,
}

impl FlowDiagnostics {
    /// The certificate matrix: edge flows placed on the support of `x`.
    pub fn flow_matrix(&self, x: &SparseNetwork) -> SparseNetwork {
        x.with_values(&self.edge_flows)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockingDiagnosis {
    pub rows: Vec<usize>,
    pub neighbor_cols: Vec<usize>,
    pub p_sum: f64,
    pub q_sum: f64,
    /// `p_sum - q_sum`, strictly positive.
    pub delta: f64,
}

pub fn check_feasibility(x: &SparseNetwork, marg: &MarginalPair) -> Result<FlowDiagnostics> {
    marg.check_dims(x)?;
    let (m, n) = x.shape();
    let (p, q) = (marg.p(), marg.q());
    let source = 0;
    let sink = m + n + 1;
    let total = marg.total();
    let mut dinic = Dinic::new(m + n + 2, AUGMENT_CUTOFF * total.max(f64::MIN_POSITIVE));
    for (i, &pi) in p.iter().enumerate() {
        if pi > 0.0 {
            dinic.add_edge(source, 1 + i, pi);
        }
    }
    let handles: Vec<(usize, usize)> = x
        .entries()
        .map(|(i, j, _)| dinic.add_edge(1 + i, 1 + m + j, f64::INFINITY))
        .collect();
    for (j, &qj) in q.iter().enumerate() {
        if qj > 0.0 {
            dinic.add_edge(1 + m + j, sink, qj);
        }
    }
    let max_flow_value = dinic.max_flow(source, sink);

    let edge_flows: Vec<f64> = handles.iter().map(|&h| dinic.flow(h)).collect();
    let mut row_flow = vec![0.0; m];
    let mut col_flow = vec![0.0; n];
    for ((i, j, _), &f) in x.entries().zip(&edge_flows) {
        row_flow[i] += f;
        col_flow[j] += f;
    }
    let feasible = (total - max_flow_value).abs() <= FEASIBILITY_REL_TOL * total;
    Ok(FlowDiagnostics {
        max_flow_value,
        edge_flows,
        row_flow,
        col_flow,
        feasible,
    })
}

/// Columns adjacent in `x` to any row of `rows`, sorted.
pub fn neighbor_columns(x: &SparseNetwork, rows: &[usize]) -> Vec<usize> {
    let mut seen = vec![false; x.cols()];
    for &i in rows {
        for (j, _) in x.row(i) {
            seen[j] = true;
        }
    }
    seen.iter()
        .enumerate()
        .filter_map(|(j, &s)| s.then_some(j))
        .collect()
}

fn diagnosis_for(x: &SparseNetwork, marg: &MarginalPair, mut rows: Vec<usize>) -> BlockingDiagnosis {
    rows.sort_unstable();
    let neighbor_cols = neighbor_columns(x, &rows);
    let p_sum: f64 = rows.iter().map(|&i| marg.p()[i]).sum();
    let q_sum: f64 = neighbor_cols.iter().map(|&j| marg.q()[j]).sum();
    BlockingDiagnosis {
        rows,
        neighbor_cols,
        p_sum,
        q_sum,
        delta: p_sum - q_sum,
    }
}

/// Alternating BFS from an under-saturated row.
///
/// Row → column steps follow every edge of `x`; column → row steps follow
/// only edges carrying positive flow. The rows reached form a blocking set.
/// The start row is the one with the largest deficit `p_i - row_flow[i]`
/// (ties: smallest index).
pub fn find_blocking_set(
    x: &SparseNetwork,
    marg: &MarginalPair,
    flow: &FlowDiagnostics,
) -> Result<BlockingDiagnosis> {
    marg.check_dims(x)?;
    if flow.feasible {
        return Err(Error::AlreadyFeasible);
    }
    let p = marg.p();
    let flow_eps = AUGMENT_CUTOFF * marg.total();
    let mut candidates: Vec<(usize, f64)> = p
        .iter()
        .zip(&flow.row_flow)
        .enumerate()
        .map(|(i, (&pi, &fi))| (i, pi - fi))
        .filter(|&(_, deficit)| deficit > flow_eps)
        .collect();
    candidates.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

    let cols = x.column_index();
    for &(start, _) in &candidates {
        let mut row_seen = vec![false; x.rows()];
        let mut col_seen = vec![false; x.cols()];
        let mut queue = VecDeque::from([start]);
        row_seen[start] = true;
        let mut visited = vec![start];
        while let Some(i) = queue.pop_front() {
            for (j, _) in x.row(i) {
                if col_seen[j] {
                    continue;
                }
                col_seen[j] = true;
                for (r, k) in cols.column(j) {
                    if !row_seen[r] && flow.edge_flows[k] > flow_eps {
                        row_seen[r] = true;
                        visited.push(r);
                        queue.push_back(r);
                    }
                }
            }
        }
        let diag = diagnosis_for(x, marg, visited);
        if diag.delta > FEASIBILITY_REL_TOL * marg.total() {
            return Ok(diag);
        }
    }
    Err(Error::NotConverged {
        what: "blocking-set search (flow too imprecise)".into(),
        iterations: candidates.len(),
    })
}

/// True iff `sum_{i in S} p_i > sum_{j in N_X(S)} q_j` by more than the
/// feasibility tolerance, so that rounding in reconciled totals is not a block.
pub fn verify_blocking(x: &SparseNetwork, marg: &MarginalPair, rows: &[usize]) -> Result<bool> {
    marg.check_dims(x)?;
    if let Some(&bad) = rows.iter().find(|&&i| i >= x.rows()) {
        return Err(Error::IndexOutOfRange {
            row: bad,
            col: 0,
            rows: x.rows(),
            cols: x.cols(),
        });
    }
    let mut unique = rows.to_vec();
    unique.sort_unstable();
    unique.dedup();
    Ok(diagnosis_for(x, marg, unique).delta > FEASIBILITY_REL_TOL * marg.total())
}
