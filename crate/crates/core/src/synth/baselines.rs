//! Estimators that ignore part of the available information.

use crate::error::{Error, Result};
use crate::network::{MarginalPair, SparseNetwork};

/// `X̂_ij = p_i q_j / c`, ignoring `X̄` entirely.
pub fn baseline_rank1(marg: &MarginalPair) -> Result<SparseNetwork> {
    let c = marg.total();
    if !(c > 0.0) {
        return Err(Error::Empty("marginal total is zero".into()));
    }
    let (p, q) = (marg.p(), marg.q());
    SparseNetwork::from_triplets(
        p.len(),
        q.len(),
        p.iter().enumerate().flat_map(|(i, &pi)| {
            q.iter()
                .enumerate()
                .filter(move |&(_, &qj)| pi > 0.0 && qj > 0.0)
                .map(move |(j, &qj)| (i, j, pi * qj / c))
        }),
    )
}

fn share(xbar: &SparseNetwork, target: &[f64], by_row: bool) -> Result<SparseNetwork> {
    let (sums, len) = if by_row {
        (xbar.row_sums(), xbar.rows())
    } else {
        (xbar.col_sums(), xbar.cols())
    };
    if target.len() != len {
        return Err(Error::DimensionMismatch {
            expected: format!("{len} marginal values"),
            got: format!("{}", target.len()),
        });
    }
    if let Some(k) = (0..len).find(|&k| target[k] > 0.0 && !(sums[k] > 0.0)) {
        return Err(if by_row {
            Error::StructurallyInfeasible { row: k, target: target[k] }
        } else {
            Error::StructurallyInfeasibleColumn { col: k, target: target[k] }
        });
    }
    let values: Vec<f64> = xbar
        .entries()
        .map(|(i, j, w)| {
            let k = if by_row { i } else { j };
            target[k] * w / sums[k]
        })
        .collect();
    Ok(xbar.with_values(&values))
}

/// Distributes `p_i` within row `i` in proportion to `X̄`.
pub fn baseline_row_share(xbar: &SparseNetwork, p: &[f64]) -> Result<SparseNetwork> {
    share(xbar, p, true)
}

/// Distributes `q_j` within column `j` in proportion to `X̄`.
pub fn baseline_col_share(xbar: &SparseNetwork, q: &[f64]) -> Result<SparseNetwork> {
    share(xbar, q, false)
}

/// `X̄` rescaled to the given total.
pub fn baseline_scale(xbar: &SparseNetwork, total: f64) -> Result<SparseNetwork> {
    let s = xbar.total();
    if !(s > 0.0) {
        return Err(Error::Empty("aggregated network is zero".into()));
    }
    Ok(xbar.scaled(total / s))
}
