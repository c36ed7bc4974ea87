//! Goodness-of-fit: Pearson residuals, dispersion and the stationarity of
//! the scaling factors across time steps.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ipf::IpfResult;
use crate::network::SparseNetwork;
use crate::stats::percentile;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PercentileSummary {
    pub p5: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub p95: f64,
    pub count: usize,
}

impl PercentileSummary {
    pub fn from_values(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("no values to summarise".into()));
        }
        values.sort_by(f64::total_cmp);
        Ok(PercentileSummary {
            p5: percentile(&values, 5.0),
            p25: percentile(&values, 25.0),
            p50: percentile(&values, 50.0),
            p75: percentile(&values, 75.0),
            p95: percentile(&values, 95.0),
            count: values.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitDiagnostics {
    /// `(Y_ij − X̂_ij) / √X̂_ij` over the support of `X̂`.
    pub pearson_residuals: Vec<(usize, usize, f64)>,
    /// `Σ r² / (|D| − m − n)`.
    pub dispersion: f64,
    pub observation_count: usize,
    pub degrees_of_freedom: usize,
}

impl FitDiagnostics {
    pub fn residual_percentiles(&self) -> Result<PercentileSummary> {
        PercentileSummary::from_values(self.pearson_residuals.iter().map(|r| r.2).collect())
    }
}

/// Residuals of observed `y` against the fitted `xhat`. The observation set is
/// the support of `xhat`; `m` and `n` count the fitted row and column
/// parameters.
pub fn fit_diagnostics(y: &SparseNetwork, xhat: &SparseNetwork, m: usize, n: usize) -> Result<FitDiagnostics> {
    if y.shape() != xhat.shape() {
        return Err(Error::DimensionMismatch {
            expected: format!("{:?}", xhat.shape()),
            got: format!("{:?}", y.shape()),
        });
    }
    let observations = xhat.nnz();
    if observations <= m + n {
        return Err(Error::NonPositiveDof {
            observations,
            parameters: m + n,
        });
    }
    let pearson_residuals: Vec<(usize, usize, f64)> = xhat
        .entries()
        .map(|(i, j, e)| (i, j, (y.get(i, j) - e) / e.sqrt()))
        .collect();
    let ss: f64 = pearson_residuals.iter().map(|r| r.2 * r.2).sum();
    let dof = observations - m - n;
    Ok(FitDiagnostics {
        pearson_residuals,
        dispersion: ss / dof as f64,
        observation_count: observations,
        degrees_of_freedom: dof,
    })
}

/// Spread of `Σ_t d0_i(t) d1_j(t)` over the support, relative to its median.
pub fn stationarity_check(results: &[IpfResult], support: &SparseNetwork) -> Result<PercentileSummary> {
    if results.len() < 2 {
        return Err(Error::InvalidConfig("stationarity needs at least two time steps".into()));
    }
    if support.nnz() == 0 {
        return Err(Error::Empty("support has no entries".into()));
    }
    for r in results {
        if r.d0.len() != support.rows() || r.d1.len() != support.cols() {
            return Err(Error::DimensionMismatch {
                expected: format!("factors for a {:?} network", support.shape()),
                got: format!("{} and {}", r.d0.len(), r.d1.len()),
            });
        }
    }
    let sums: Vec<f64> = support
        .entries()
        .map(|(i, j, _)| results.iter().map(|r| r.d0[i] * r.d1[j]).sum())
        .collect();
    let mut sorted = sums.clone();
    sorted.sort_by(f64::total_cmp);
    let median = percentile(&sorted, 50.0);
    if !(median > 0.0) {
        return Err(Error::Empty("median factor product is zero".into()));
    }
    PercentileSummary::from_values(sums.into_iter().map(|s| s / median).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ipf::IpfStatus;

    #[test]
    fn exact_fit_has_zero_residuals() {
        let x = SparseNetwork::from_dense(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let d = fit_diagnostics(&x, &x, 2, 3).unwrap();
        assert!(d.pearson_residuals.iter().all(|r| r.2 == 0.0));
        assert_eq!(d.dispersion, 0.0);
        assert_eq!(d.observation_count, 6);
    }

    #[test]
    fn single_cell() {
        let y = SparseNetwork::from_dense(&[vec![4.0]]).unwrap();
        let xhat = SparseNetwork::from_dense(&[vec![1.0]]).unwrap();
        let d = fit_diagnostics(&y, &xhat, 0, 0).unwrap();
        assert_eq!(d.pearson_residuals[0].2, 3.0);
        assert_eq!(d.dispersion, 9.0);
        assert!(matches!(fit_diagnostics(&y, &xhat, 1, 0), Err(Error::NonPositiveDof { .. })));
    }

    #[test]
    fn identical_steps_are_stationary() {
        let r = IpfResult {
            d0: vec![1.0, 3.0],
            d1: vec![0.5, 2.0],
            status: IpfStatus::Converged,
            iterations: 2,
            l1_trace: vec![],
            accumulation: None,
        };
        let support = SparseNetwork::from_dense(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let s = stationarity_check(&[r.clone(), r.clone(), r], &support).unwrap();
        assert_eq!(s.count, 4);
        assert!(s.p5 > 0.0 && s.p95 > s.p5);
        let flat = IpfResult {
            d0: vec![2.0, 2.0],
            d1: vec![1.0, 1.0],
            status: IpfStatus::Converged,
            iterations: 2,
            l1_trace: vec![],
            accumulation: None,
        };
        let s = stationarity_check(&[flat.clone(), flat], &support).unwrap();
        assert_eq!((s.p5, s.p50, s.p95), (1.0, 1.0, 1.0));
    }
}
