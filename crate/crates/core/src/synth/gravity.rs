//! Doubly constrained gravity model with kernel `f(d) = d^α e^{−βd}`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ipf::{run_ipf, IpfConfig};
use crate::network::{MarginalPair, SparseNetwork};

/// Dense `m × n` distance matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Distances {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl Distances {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: format!("{} distances", rows * cols),
                got: format!("{}", values.len()),
            });
        }
        if let Some(k) = values.iter().position(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(Error::InvalidWeight {
                row: k / cols.max(1),
                col: k % cols.max(1),
                value: values[k],
            });
        }
        Ok(Distances { rows, cols, values })
    }

    /// Euclidean distances between row points and column points.
    pub fn from_points(rows: &[[f64; 2]], cols: &[[f64; 2]]) -> Result<Self> {
        let values = rows
            .iter()
            .flat_map(|a| cols.iter().map(move |b| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()))
            .collect();
        Self::new(rows.len(), cols.len(), values)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Replaces zero distances by half the smallest positive distance.
    pub fn with_zero_substitution(&self) -> Result<Self> {
        let min_pos = self
            .values
            .iter()
            .copied()
            .filter(|&d| d > 0.0)
            .fold(f64::INFINITY, f64::min);
        if !min_pos.is_finite() {
            return Err(Error::Empty("no positive distances".into()));
        }
        let values = self
            .values
            .iter()
            .map(|&d| if d > 0.0 { d } else { min_pos / 2.0 })
            .collect();
        Ok(Distances {
            rows: self.rows,
            cols: self.cols,
            values,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GravityModel {
    pub alpha: f64,
    pub beta: f64,
    /// Log-scale intercept of the fitted kernel; IPF ignores it.
    pub log_scale: f64,
    /// Effective distances, all positive.
    #[serde(skip)]
    pub distances: Distances,
}

impl GravityModel {
    pub fn new(alpha: f64, beta: f64, distances: &Distances) -> Result<Self> {
        Ok(GravityModel {
            alpha,
            beta,
            log_scale: 0.0,
            distances: distances.with_zero_substitution()?,
        })
    }

    pub fn kernel_value(&self, d: f64) -> f64 {
        d.powf(self.alpha) * (-self.beta * d).exp()
    }

    /// The kernel `f(d_ij)` as a network.
    pub fn kernel(&self) -> Result<SparseNetwork> {
        let (m, n) = self.distances.shape();
        SparseNetwork::from_triplets(
            m,
            n,
            (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).filter_map(|(i, j)| {
                let w = self.kernel_value(self.distances.get(i, j));
                (w > 0.0).then_some((i, j, w))
            }),
        )
    }
}

/// Least-squares fit of `log mean(X̄) = c + α log d − β d` over distance bins.
pub fn fit_gravity(xbar: &SparseNetwork, distances: &Distances, bin_width: f64) -> Result<GravityModel> {
    if distances.shape() != xbar.shape() {
        return Err(Error::DimensionMismatch {
            expected: format!("{:?}", xbar.shape()),
            got: format!("{:?}", distances.shape()),
        });
    }
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(Error::InvalidConfig("bin width must be positive".into()));
    }
    let eff = distances.with_zero_substitution()?;
    let (m, n) = xbar.shape();
    let mut bins: std::collections::BTreeMap<u64, (f64, f64, usize)> = Default::default();
    for i in 0..m {
        for j in 0..n {
            let d = eff.get(i, j);
            let e = bins.entry((d / bin_width).floor() as u64).or_default();
            e.0 += xbar.get(i, j);
            e.1 += d;
            e.2 += 1;
        }
    }
    let usable: Vec<(f64, f64)> = bins
        .values()
        .filter(|b| b.0 > 0.0)
        .map(|&(s, ds, c)| (ds / c as f64, (s / c as f64).ln()))
        .collect();
    if usable.len() < 3 {
        return Err(Error::Empty(format!(
            "{} distance bins with positive mean; at least 3 are needed",
            usable.len()
        )));
    }
    let design = DMatrix::from_fn(usable.len(), 3, |r, c| match c {
        0 => 1.0,
        1 => usable[r].0.ln(),
        _ => usable[r].0,
    });
    let rhs = DVector::from_iterator(usable.len(), usable.iter().map(|b| b.1));
    let coef = design
        .svd(true, true)
        .solve(&rhs, 1e-12)
        .map_err(|e| Error::InvalidConfig(format!("gravity least squares failed: {e}")))?;
    Ok(GravityModel {
        alpha: coef[1],
        beta: -coef[2],
        log_scale: coef[0],
        distances: eff,
    })
}

/// Balances the gravity kernel to `marg` with IPF and returns the estimate.
pub fn gravity_infer(gm: &GravityModel, marg: &MarginalPair, cfg: &IpfConfig) -> Result<SparseNetwork> {
    let kernel = gm.kernel()?;
    let res = run_ipf(&kernel, marg, cfg)?;
    if !res.converged() {
        return Err(Error::NotConverged {
            what: "IPF on the gravity kernel".into(),
            iterations: res.iterations,
        });
    }
    Ok(res.estimate(&kernel))
}
