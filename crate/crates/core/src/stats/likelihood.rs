//! Log-likelihood `ℓ(u, v) = Σ p_i u_i − Σ q_j v_j − Σ X̄_ij e^{u_i − v_j}`
//! (up to terms free of the parameters) and its gradient.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::network::{MarginalPair, SparseNetwork};

/// Largest exponent `|u_i − v_j|` accepted before reporting overflow.
pub const EXPONENT_GUARD: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `Σ u + Σ v = 0` over finite coordinates. A pure gauge shift.
    SumZero,
    /// `mean(e^u) = mean(e^{-v}) = 1` over finite coordinates. Rescales the
    /// rates by a constant; used to compare factors across fits.
    MeanOneExp,
    /// Parameters kept exactly as given, e.g. a simulation truth.
    Raw,
}

/// Model parameters. Rows or columns outside the model (zero marginal) carry
/// `u_i = −∞` or `v_j = +∞`, i.e. a zero factor.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingParameters {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub normalization: Normalization,
}

impl ScalingParameters {
    /// Applies `normalization` to raw `(u, v)`.
    pub fn new(u: Vec<f64>, v: Vec<f64>, normalization: Normalization) -> Result<Self> {
        let raw = ScalingParameters {
            u,
            v,
            normalization,
        };
        raw.normalized(normalization)
    }

    pub fn zeros(m: usize, n: usize) -> Self {
        ScalingParameters {
            u: vec![0.0; m],
            v: vec![0.0; n],
            normalization: Normalization::SumZero,
        }
    }

    /// `u = log d0`, `v = −log d1`; zero factors map to infinite parameters.
    pub fn from_factors(d0: &[f64], d1: &[f64], normalization: Normalization) -> Result<Self> {
        Self::new(
            d0.iter().map(|d| d.ln()).collect(),
            d1.iter().map(|d| -d.ln()).collect(),
            normalization,
        )
    }

    pub fn row_factors(&self) -> Vec<f64> {
        self.u.iter().map(|u| u.exp()).collect()
    }

    pub fn col_factors(&self) -> Vec<f64> {
        self.v.iter().map(|v| (-v).exp()).collect()
    }

    pub fn rows(&self) -> usize {
        self.u.len()
    }

    pub fn cols(&self) -> usize {
        self.v.len()
    }

    pub fn normalized(&self, normalization: Normalization) -> Result<Self> {
        let (mut u, mut v) = (self.u.clone(), self.v.clone());
        match normalization {
            Normalization::Raw => {}
            Normalization::SumZero => {
                let (s, k) = u
                    .iter()
                    .chain(&v)
                    .filter(|x| x.is_finite())
                    .fold((0.0, 0usize), |(s, k), x| (s + x, k + 1));
                if k == 0 {
                    return Err(Error::Empty("no finite parameters".into()));
                }
                let c = s / k as f64;
                u.iter_mut().for_each(|x| *x -= c);
                v.iter_mut().for_each(|x| *x -= c);
            }
            Normalization::MeanOneExp => {
                let a = finite_exp_mean(u.iter().copied())?;
                let b = finite_exp_mean(v.iter().map(|x| -x))?;
                u.iter_mut().for_each(|x| *x -= a.ln());
                v.iter_mut().for_each(|x| *x += b.ln());
            }
        }
        Ok(ScalingParameters {
            u,
            v,
            normalization,
        })
    }

    fn check_dims(&self, x: &SparseNetwork) -> Result<()> {
        if self.u.len() != x.rows() || self.v.len() != x.cols() {
            return Err(Error::DimensionMismatch {
                expected: format!("parameters for a {}x{} network", x.rows(), x.cols()),
                got: format!("{} row and {} column parameters", self.u.len(), self.v.len()),
            });
        }
        Ok(())
    }
}

fn finite_exp_mean(xs: impl Iterator<Item = f64>) -> Result<f64> {
    let (s, k) = xs
        .filter(|x| x.is_finite())
        .fold((0.0, 0usize), |(s, k), x| (s + x.exp(), k + 1));
    if k == 0 {
        return Err(Error::Empty("no finite parameters".into()));
    }
    Ok(s / k as f64)
}

/// Per-entry rates `e^{u_i} X̄_ij e^{−v_j}`, aligned with the entries of `x`.
fn rates(x: &SparseNetwork, params: &ScalingParameters) -> Result<Vec<f64>> {
    params.check_dims(x)?;
    x.entries()
        .map(|(i, j, w)| {
            let (u, v) = (params.u[i], params.v[j]);
            if u == f64::NEG_INFINITY || v == f64::INFINITY {
                return Ok(0.0);
            }
            let e = u - v;
            if !(e.abs() <= EXPONENT_GUARD) {
                return Err(Error::Overflow {
                    row: i,
                    col: j,
                    value: e,
                });
            }
            Ok(w * e.exp())
        })
        .collect()
}

pub fn rate_matrix(x: &SparseNetwork, params: &ScalingParameters) -> Result<SparseNetwork> {
    Ok(x.with_values(&rates(x, params)?))
}

pub fn log_likelihood(x: &SparseNetwork, marg: &MarginalPair, params: &ScalingParameters) -> Result<f64> {
    marg.check_dims(x)?;
    let r = rates(x, params)?;
    let pu: f64 = marg
        .p()
        .iter()
        .zip(&params.u)
        .filter(|(p, _)| **p > 0.0)
        .map(|(p, u)| p * u)
        .sum();
    let qv: f64 = marg
        .q()
        .iter()
        .zip(&params.v)
        .filter(|(q, _)| **q > 0.0)
        .map(|(q, v)| q * v)
        .sum();
    Ok(pu - qv - r.iter().sum::<f64>())
}

/// Gradient of `−ℓ`: `∂u_i = Σ_j λ_ij − p_i`, `∂v_j = q_j − Σ_i λ_ij`.
pub fn neg_ll_gradient(
    x: &SparseNetwork,
    marg: &MarginalPair,
    params: &ScalingParameters,
) -> Result<(Vec<f64>, Vec<f64>)> {
    marg.check_dims(x)?;
    let r = rates(x, params)?;
    let mut gu: Vec<f64> = marg.p().iter().map(|p| -p).collect();
    let mut gv: Vec<f64> = marg.q().to_vec();
    for ((i, j, _), l) in x.entries().zip(&r) {
        gu[i] += l;
        gv[j] -= l;
    }
    Ok((gu, gv))
}
