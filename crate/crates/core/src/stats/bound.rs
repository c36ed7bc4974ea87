//! Expected-risk bound of the MLE and the finite-MLE condition, both driven
//! by the Fiedler eigenvalue of a bipartite Laplacian.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::network::SparseNetwork;
use crate::stats::likelihood::{rate_matrix, ScalingParameters};
use crate::stats::spectral::bipartite_laplacian_fiedler;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorBoundReport {
    /// Total rate `Σ e^{u_i} X̄_ij e^{−v_j}`.
    pub kappa: f64,
    pub b: f64,
    /// Fiedler eigenvalue of the Laplacian of `X̄`.
    pub lambda2: f64,
    /// `8 e^{4B} κ / λ₂²`, or `+∞` when the support is disconnected.
    pub bound: f64,
    /// `κ / λ₂²`, the bound without constants.
    pub kappa_over_lambda2_sq: f64,
    /// Largest row or column sum of the rate matrix.
    pub m_max: f64,
    pub disconnected: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FiniteMleCondition {
    pub holds: bool,
    /// Fiedler eigenvalue of the Laplacian of the rate matrix.
    pub lambda2_star: f64,
    /// `8 log(m + n)`.
    pub threshold: f64,
}

/// Relative level below which a Fiedler value counts as zero.
const CONNECTED_REL_TOL: f64 = 1e-12;

fn max_degree(w: &SparseNetwork) -> f64 {
    w.row_sums()
        .into_iter()
        .chain(w.col_sums())
        .fold(0.0, f64::max)
}

fn is_zero_fiedler(lambda2: f64, w: &SparseNetwork) -> bool {
    lambda2 <= CONNECTED_REL_TOL * max_degree(w)
}

pub fn error_bound(xbar: &SparseNetwork, truth: &ScalingParameters, b: f64) -> Result<ErrorBoundReport> {
    if !(b >= 0.0 && b.is_finite()) {
        return Err(Error::InvalidConfig(format!("B must be finite and non-negative, got {b}")));
    }
    let sup = truth
        .u
        .iter()
        .chain(&truth.v)
        .fold(0.0f64, |a, x| a.max(x.abs()));
    if sup > b {
        return Err(Error::InvalidConfig(format!(
            "parameters reach {sup}, above the bound B = {b}"
        )));
    }
    let rates = rate_matrix(xbar, truth)?;
    let kappa = rates.total();
    let lambda2 = bipartite_laplacian_fiedler(xbar).lambda2;
    let disconnected = is_zero_fiedler(lambda2, xbar);
    let (bound, ratio) = if disconnected {
        (f64::INFINITY, f64::INFINITY)
    } else {
        let ratio = kappa / (lambda2 * lambda2);
        (8.0 * (4.0 * b).exp() * ratio, ratio)
    };
    Ok(ErrorBoundReport {
        kappa,
        b,
        lambda2,
        bound,
        kappa_over_lambda2_sq: ratio,
        m_max: max_degree(&rates),
        disconnected,
    })
}

pub fn finite_mle_condition(xbar: &SparseNetwork, truth: &ScalingParameters) -> Result<FiniteMleCondition> {
    let rates = rate_matrix(xbar, truth)?;
    let lambda2_star = bipartite_laplacian_fiedler(&rates).lambda2;
    let threshold = 8.0 * ((xbar.rows() + xbar.cols()) as f64).ln();
    Ok(FiniteMleCondition {
        holds: !is_zero_fiedler(lambda2_star, &rates) && lambda2_star >= threshold,
        lambda2_star,
        threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ones(n: usize) -> SparseNetwork {
        SparseNetwork::from_dense(&vec![vec![1.0; n]; n]).unwrap()
    }

    #[test]
    fn all_ones_bound_is_eight() {
        for n in [3, 10, 25] {
            let r = error_bound(&ones(n), &ScalingParameters::zeros(n, n), 0.0).unwrap();
            assert!((r.kappa - (n * n) as f64).abs() < 1e-9);
            assert!((r.lambda2 - n as f64).abs() < 1e-9);
            assert!((r.bound - 8.0).abs() < 1e-9);
            assert!((r.m_max - n as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn disconnected_bound_is_infinite() {
        let x = SparseNetwork::from_dense(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let r = error_bound(&x, &ScalingParameters::zeros(2, 2), 0.0).unwrap();
        assert!(r.disconnected);
        assert_eq!(r.bound, f64::INFINITY);
    }

    #[test]
    fn bound_requires_b_to_dominate() {
        let mut t = ScalingParameters::zeros(2, 2);
        t.u[0] = 0.5;
        assert!(error_bound(&ones(2), &t, 0.1).is_err());
        assert!(error_bound(&ones(2), &t, 0.5).is_ok());
    }

    #[test]
    fn finite_mle_examples() {
        let c = finite_mle_condition(&ones(100), &ScalingParameters::zeros(100, 100)).unwrap();
        assert!(c.holds);
        assert!((c.lambda2_star - 100.0).abs() < 1e-8);
        let x = SparseNetwork::from_dense(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!(!finite_mle_condition(&x, &ScalingParameters::zeros(2, 2)).unwrap().holds);
        let small = SparseNetwork::from_dense(&[vec![1.0, 0.5], vec![0.2, 1.0]]).unwrap();
        assert!(!finite_mle_condition(&small, &ScalingParameters::zeros(2, 2)).unwrap().holds);
        assert!(finite_mle_condition(&small.scaled(1e6), &ScalingParameters::zeros(2, 2)).unwrap().holds);
    }
}
