//! Iterative proportional fitting with zero-marginal handling and period-2
//! oscillation detection.
//!
//! Odd iterations rescale rows, even iterations rescale columns, starting from
//! unit factors. Rows (columns) with zero target marginal get factor zero
//! before the first sweep, so the iteration is the plain algorithm on the
//! submatrix of rows and columns with positive marginals. After every
//! half-sweep `tau` the scaled matrix `X̂(tau) = diag(d0) X diag(d1)` is
//! compared with its predecessors:
//!
//! * `‖X̂(tau) - X̂(tau-1)‖₁ < ε` stops with [`IpfStatus::Converged`];
//! * `‖X̂(tau) - X̂(tau-2)‖₁ < ε` and `‖X̂(tau-1) - X̂(tau-3)‖₁ < ε` stops with
//!   [`IpfStatus::Oscillating`], exposing the two accumulation points.
//!
//! A slowly converging run also passes the lag-2 test long before the lag-1
//! test, since a full sweep moves the iterates much less than a half sweep.
//! The first time the lag-2 test passes, a max-flow check decides whether the
//! marginals are feasible on the support; oscillation is only declared when
//! they are not. Feasible runs keep iterating.

use std::collections::VecDeque;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::feasibility::check_feasibility;
use crate::network::{MarginalPair, SparseNetwork};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IpfConfig {
    /// Threshold on the ℓ1 distance between successive scaled matrices.
    pub tolerance: f64,
    /// Cap on the number of half-sweeps.
    pub max_iterations: usize,
    /// Record the ℓ1 marginal error after every half-sweep.
    pub record_trace: bool,
}

impl Default for IpfConfig {
    fn default() -> Self {
        IpfConfig {
            tolerance: 1e-8,
            max_iterations: 10_000,
            record_trace: true,
        }
    }
}

impl IpfConfig {
    pub fn with_tolerance(tolerance: f64) -> Self {
        IpfConfig {
            tolerance,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_iterations < 4 {
            return Err(Error::InvalidConfig(
                "max_iterations must be at least 4".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IpfStatus {
    Converged,
    Oscillating,
    MaxIterations,
}

/// The two limit matrices of an oscillating run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccumulationPair {
    /// Iterate produced by a row update; its row sums equal `p`.
    pub row_fitted: SparseNetwork,
    /// Iterate produced by a column update; its column sums equal `q`.
    pub col_fitted: SparseNetwork,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IpfResult {
    pub d0: Vec<f64>,
    pub d1: Vec<f64>,
    pub status: IpfStatus,
    /// Number of half-sweeps performed.
    pub iterations: usize,
    /// ℓ1 marginal error of `X̂(0), X̂(1), ...` when tracing is enabled.
    pub l1_trace: Vec<f64>,
    pub accumulation: Option<AccumulationPair>,
}

impl IpfResult {
    pub fn converged(&self) -> bool {
        self.status == IpfStatus::Converged
    }

    /// The balanced matrix `diag(d0) X diag(d1)`.
    pub fn estimate(&self, x: &SparseNetwork) -> SparseNetwork {
        scaled_matrix(x, &self.d0, &self.d1)
    }
}

/// Runs IPF on `x` towards the marginals `marg`.
///
/// Fails with a structural-infeasibility error when a row (column) with a
/// positive target has no support on the columns (rows) still in play.
pub fn run_ipf(x: &SparseNetwork, marg: &MarginalPair, cfg: &IpfConfig) -> Result<IpfResult> {
    cfg.validate()?;
    marg.check_dims(x)?;
    let (p, q) = (marg.p(), marg.q());
    let cols = x.column_index();
    let entry_rows = x.entry_rows();
    let entry_cols = x.col_indices();
    let weights = x.values();

    let mut d0: Vec<f64> = p.iter().map(|&v| if v > 0.0 { 1.0 } else { 0.0 }).collect();
    let mut d1: Vec<f64> = q.iter().map(|&v| if v > 0.0 { 1.0 } else { 0.0 }).collect();

    let scale = |d0: &[f64], d1: &[f64], out: &mut Vec<f64>| {
        out.clear();
        out.extend(
            weights
                .iter()
                .zip(&entry_rows)
                .zip(entry_cols)
                .map(|((w, &i), &j)| d0[i] * w * d1[j]),
        );
    };

    // history[0] is the newest iterate.
    let mut history: VecDeque<Vec<f64>> = VecDeque::with_capacity(4);
    let mut current = Vec::with_capacity(x.nnz());
    scale(&d0, &d1, &mut current);
    let mut l1_trace = Vec::new();
    if cfg.record_trace {
        l1_trace.push(marginal_error_of_values(&current, &entry_rows, entry_cols, p, q));
    }
    history.push_front(current);
    let mut lag2_prev: Option<f64> = None;
    // Settled by max-flow the first time the lag-2 test passes.
    let mut infeasible: Option<bool> = None;

    for tau in 1..=cfg.max_iterations {
        if tau % 2 == 1 {
            for i in 0..x.rows() {
                if p[i] == 0.0 {
                    d0[i] = 0.0;
                    continue;
                }
                let denom: f64 = x.row(i).map(|(j, w)| w * d1[j]).sum();
                if denom <= 0.0 {
                    return Err(Error::StructurallyInfeasible { row: i, target: p[i] });
                }
                d0[i] = p[i] / denom;
            }
        } else {
            for j in 0..x.cols() {
                if q[j] == 0.0 {
                    d1[j] = 0.0;
                    continue;
                }
                let denom: f64 = cols.column(j).map(|(i, k)| weights[k] * d0[i]).sum();
                if denom <= 0.0 {
                    return Err(Error::StructurallyInfeasibleColumn { col: j, target: q[j] });
                }
                d1[j] = q[j] / denom;
            }
        }

        let mut current = if history.len() == 4 {
            history.pop_back().unwrap()
        } else {
            Vec::with_capacity(x.nnz())
        };
        scale(&d0, &d1, &mut current);
        if cfg.record_trace {
            l1_trace.push(marginal_error_of_values(&current, &entry_rows, entry_cols, p, q));
        }

        let step = l1_distance(&current, &history[0]);
        let lag2 = (history.len() >= 2).then(|| l1_distance(&current, &history[1]));
        let status = if step < cfg.tolerance {
            Some(IpfStatus::Converged)
        } else if matches!((lag2, lag2_prev), (Some(d), Some(prev)) if d < cfg.tolerance && prev < cfg.tolerance) {
            let infeasible = match infeasible {
                Some(b) => b,
                None => *infeasible.insert(!check_feasibility(x, marg)?.feasible),
            };
            infeasible.then_some(IpfStatus::Oscillating)
        } else {
            None
        };
        lag2_prev = lag2;

        if let Some(status) = status {
            let accumulation = (status == IpfStatus::Oscillating).then(|| {
                let newest = x.with_values(&current);
                let previous = x.with_values(&history[0]);
                if tau % 2 == 1 {
                    AccumulationPair {
                        row_fitted: newest,
                        col_fitted: previous,
                    }
                } else {
                    AccumulationPair {
                        row_fitted: previous,
                        col_fitted: newest,
                    }
                }
            });
            return Ok(IpfResult {
                d0,
                d1,
                status,
                iterations: tau,
                l1_trace,
                accumulation,
            });
        }
        history.push_front(current);
    }

    Ok(IpfResult {
        d0,
        d1,
        status: IpfStatus::MaxIterations,
        iterations: cfg.max_iterations,
        l1_trace,
        accumulation: None,
    })
}

fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

fn marginal_error_of_values(
    values: &[f64],
    rows: &[usize],
    cols: &[usize],
    p: &[f64],
    q: &[f64],
) -> f64 {
    let mut r = vec![0.0; p.len()];
    let mut c = vec![0.0; q.len()];
    for ((&v, &i), &j) in values.iter().zip(rows).zip(cols) {
        r[i] += v;
        c[j] += v;
    }
    l1_distance(&r, p) + l1_distance(&c, q)
}

/// Entry `(i, j)` of the result is `d0[i] * x[i][j] * d1[j]`.
pub fn scaled_matrix(x: &SparseNetwork, d0: &[f64], d1: &[f64]) -> SparseNetwork {
    assert_eq!(d0.len(), x.rows(), "d0 length mismatch");
    assert_eq!(d1.len(), x.cols(), "d1 length mismatch");
    let values: Vec<f64> = x
        .entries()
        .map(|(i, j, w)| d0[i] * w * d1[j])
        .collect();
    x.with_values(&values)
}

/// `‖X̂·1 − p‖₁ + ‖X̂ᵀ·1 − q‖₁`.
pub fn l1_marginal_error(xhat: &SparseNetwork, marg: &MarginalPair) -> Result<f64> {
    marg.check_dims(xhat)?;
    Ok(l1_distance(&xhat.row_sums(), marg.p()) + l1_distance(&xhat.col_sums(), marg.q()))
}

/// Divides each factor vector by the mean of its nonzero entries.
pub fn normalize_factors(d0: &[f64], d1: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    Ok((mean_normalize(d0)?, mean_normalize(d1)?))
}

/// Divides by the mean over the positive entries; zeros stay zero.
pub fn mean_normalize(d: &[f64]) -> Result<Vec<f64>> {
    let (sum, count) = d
        .iter()
        .filter(|&&v| v > 0.0)
        .fold((0.0, 0usize), |(s, c), &v| (s + v, c + 1));
    if count == 0 {
        return Err(Error::Empty("factor vector has no positive entries".into()));
    }
    let mean = sum / count as f64;
    Ok(d.iter().map(|v| v / mean).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::marginals;

    fn toy() -> (SparseNetwork, MarginalPair) {
        let x = SparseNetwork::from_dense(&[
            vec![1.0, 0.0, 0.0],
            vec![1.0, 1.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 1.0, 1.0],
        ])
        .unwrap();
        (x, MarginalPair::new(vec![1.0; 4], vec![1.0, 1.0, 2.0]).unwrap())
    }

    #[test]
    fn toy_oscillates() {
        let (x, m) = toy();
        let res = run_ipf(&x, &m, &IpfConfig::default()).unwrap();
        assert_eq!(res.status, IpfStatus::Oscillating);
        let pair = res.accumulation.expect("accumulation pair");
        let rs = pair.row_fitted.row_sums();
        let cs = pair.col_fitted.col_sums();
        assert!(rs.iter().zip(m.p()).all(|(a, b)| (a - b).abs() < 1e-8));
        assert!(cs.iter().zip(m.q()).all(|(a, b)| (a - b).abs() < 1e-8));
    }

    #[test]
    fn already_balanced_converges_immediately() {
        let x = SparseNetwork::from_dense(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let m = marginals(&x);
        let res = run_ipf(&x, &m, &IpfConfig::default()).unwrap();
        assert_eq!(res.status, IpfStatus::Converged);
        assert!(res.iterations <= 2);
        assert!(res.d0.iter().chain(&res.d1).all(|&d| (d - 1.0).abs() < 1e-15));
    }

    #[test]
    fn scaled_matrix_examples() {
        let x = SparseNetwork::from_dense(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(scaled_matrix(&x, &[1.0, 1.0], &[1.0, 1.0]), x);
        let s = scaled_matrix(&x, &[2.0, 1.0], &[1.0, 0.5]);
        assert_eq!(s.to_dense(), vec![vec![2.0, 2.0], vec![3.0, 2.0]]);
        let s = scaled_matrix(&x, &[0.0, 1.0], &[1.0, 1.0]);
        assert_eq!(s.row(0).count(), 0);
    }

    #[test]
    fn l1_error_examples() {
        let x = SparseNetwork::from_dense(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let m = MarginalPair::new(vec![2.0, 1.0], vec![1.0, 2.0]).unwrap();
        assert_eq!(l1_marginal_error(&x, &m).unwrap(), 2.0);
        assert_eq!(l1_marginal_error(&x, &marginals(&x)).unwrap(), 0.0);
        let m = marginals(&x);
        let doubled = x.scaled(2.0);
        assert_eq!(l1_marginal_error(&doubled, &m).unwrap(), m.total() * 2.0);
    }

    #[test]
    fn normalize_examples() {
        let (a, b) = normalize_factors(&[2.0, 2.0], &[4.0, 4.0]).unwrap();
        assert_eq!((a, b), (vec![1.0, 1.0], vec![1.0, 1.0]));
        assert_eq!(mean_normalize(&[1.0, 3.0]).unwrap(), vec![0.5, 1.5]);
        assert_eq!(mean_normalize(&[0.0, 2.0, 4.0]).unwrap(), vec![0.0, 2.0 / 3.0, 4.0 / 3.0]);
        assert!(mean_normalize(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn zero_marginals_get_zero_factors() {
        let x = SparseNetwork::from_dense(&[
            vec![1.0, 1.0, 1.0],
            vec![1.0, 1.0, 0.0],
            vec![1.0, 2.0, 1.0],
        ])
        .unwrap();
        let m = MarginalPair::new(vec![2.0, 0.0, 3.0], vec![1.0, 4.0, 0.0]).unwrap();
        let res = run_ipf(&x, &m, &IpfConfig::default()).unwrap();
        assert_eq!(res.status, IpfStatus::Converged);
        assert_eq!(res.d0[1], 0.0);
        assert_eq!(res.d1[2], 0.0);
        assert!(res.d0[0] > 0.0 && res.d0[2] > 0.0);
    }

    #[test]
    fn structural_infeasibility_detected() {
        // Row 1 only touches column 1, whose marginal is zero.
        let x = SparseNetwork::from_dense(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let m = MarginalPair::new(vec![1.0, 1.0], vec![2.0, 0.0]).unwrap();
        assert!(matches!(
            run_ipf(&x, &m, &IpfConfig::default()),
            Err(Error::StructurallyInfeasible { row: 1, .. })
        ));
    }

    #[test]
    fn config_validation() {
        let x = SparseNetwork::from_dense(&[vec![1.0]]).unwrap();
        let m = marginals(&x);
        let bad = IpfConfig {
            max_iterations: 3,
            ..Default::default()
        };
        assert!(run_ipf(&x, &m, &bad).is_err());
        assert!(run_ipf(&x, &m, &IpfConfig::with_tolerance(0.0)).is_err());
    }
}
