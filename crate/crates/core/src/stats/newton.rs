//! Maximum likelihood for the biproportional Poisson model by damped Newton.
//!
//! The fit is restricted to rows and columns with positive marginals and to
//! the observation set `D = {X̄_ij > 0, p_i > 0, q_j > 0}`. The Hessian of
//! `−ℓ` is the bipartite Laplacian of the rate matrix; its null direction
//! (the gauge) is removed by solving with `H + 11ᵀ/N`.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::feasibility::check_feasibility;
use crate::network::{MarginalPair, SparseNetwork};
use crate::stats::likelihood::{log_likelihood, Normalization, ScalingParameters, EXPONENT_GUARD};

pub const DEFAULT_CI_LEVEL: f64 = 0.95;
const MAX_NEWTON_ITERATIONS: usize = 200;
const MAX_HALVINGS: usize = 60;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GlmFit {
    pub params: ScalingParameters,
    /// Maximised log-likelihood.
    pub loglik: f64,
    pub level: f64,
    pub std_err_u: Vec<f64>,
    pub std_err_v: Vec<f64>,
    pub ci_lower_u: Vec<f64>,
    pub ci_upper_u: Vec<f64>,
    pub ci_lower_v: Vec<f64>,
    pub ci_upper_v: Vec<f64>,
    pub converged: bool,
    pub newton_iterations: usize,
}

struct Problem {
    ma: usize,
    na: usize,
    row_of: Vec<usize>,
    col_of: Vec<usize>,
    /// (active row, active col, X̄) over the observation set.
    obs: Vec<(usize, usize, f64)>,
    p: Vec<f64>,
    q: Vec<f64>,
}

impl Problem {
    fn dim(&self) -> usize {
        self.ma + self.na
    }

    fn connected(&self) -> bool {
        let n = self.dim();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut a: usize) -> usize {
            while parent[a] != a {
                parent[a] = parent[parent[a]];
                a = parent[a];
            }
            a
        }
        let mut components = n;
        for &(a, b, _) in &self.obs {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, self.ma + b));
            if ra != rb {
                parent[ra] = rb;
                components -= 1;
            }
        }
        components == 1
    }

    fn rates(&self, theta: &[f64]) -> Option<Vec<f64>> {
        self.obs
            .iter()
            .map(|&(a, b, x)| {
                let e = theta[a] - theta[self.ma + b];
                (e <= EXPONENT_GUARD).then(|| x * e.exp())
            })
            .collect()
    }

    /// `−ℓ(θ)`; `+∞` when a rate overflows.
    fn objective(&self, theta: &[f64]) -> f64 {
        let Some(r) = self.rates(theta) else {
            return f64::INFINITY;
        };
        let lin: f64 = self.p.iter().zip(theta).map(|(p, u)| p * u).sum::<f64>()
            - self.q.iter().zip(&theta[self.ma..]).map(|(q, v)| q * v).sum::<f64>();
        r.iter().sum::<f64>() - lin
    }

    fn gradient(&self, rates: &[f64]) -> Vec<f64> {
        let mut g: Vec<f64> = self.p.iter().map(|p| -p).chain(self.q.iter().copied()).collect();
        for (&(a, b, _), l) in self.obs.iter().zip(rates) {
            g[a] += l;
            g[self.ma + b] -= l;
        }
        g
    }

    fn regularised_hessian(&self, rates: &[f64]) -> DMatrix<f64> {
        let n = self.dim();
        let mut h = DMatrix::from_element(n, n, 1.0 / n as f64);
        for (&(a, b, _), &l) in self.obs.iter().zip(rates) {
            let c = self.ma + b;
            h[(a, a)] += l;
            h[(c, c)] += l;
            h[(a, c)] -= l;
            h[(c, a)] -= l;
        }
        h
    }
}

fn build_problem(x: &SparseNetwork, marg: &MarginalPair) -> Problem {
    let (p, q) = (marg.p(), marg.q());
    let mut row_has = vec![false; x.rows()];
    let mut col_has = vec![false; x.cols()];
    for (i, j, _) in x.entries() {
        if p[i] > 0.0 && q[j] > 0.0 {
            row_has[i] = true;
            col_has[j] = true;
        }
    }
    let mut row_of = vec![usize::MAX; x.rows()];
    let mut col_of = vec![usize::MAX; x.cols()];
    let mut pa = Vec::new();
    let mut qa = Vec::new();
    for i in 0..x.rows() {
        if row_has[i] {
            row_of[i] = pa.len();
            pa.push(p[i]);
        }
    }
    for j in 0..x.cols() {
        if col_has[j] {
            col_of[j] = qa.len();
            qa.push(q[j]);
        }
    }
    let obs = x
        .entries()
        .filter(|&(i, j, _)| row_has[i] && col_has[j])
        .map(|(i, j, w)| (row_of[i], col_of[j], w))
        .collect();
    Problem {
        ma: pa.len(),
        na: qa.len(),
        row_of,
        col_of,
        obs,
        p: pa,
        q: qa,
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, b| a.max(b.abs()))
}

pub fn mle_newton(x: &SparseNetwork, marg: &MarginalPair, normalization: Normalization) -> Result<GlmFit> {
    mle_newton_at_level(x, marg, normalization, DEFAULT_CI_LEVEL)
}

pub fn mle_newton_at_level(
    x: &SparseNetwork,
    marg: &MarginalPair,
    normalization: Normalization,
    level: f64,
) -> Result<GlmFit> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidConfig(format!("confidence level {level} not in (0, 1)")));
    }
    let flow = check_feasibility(x, marg)?;
    if !flow.feasible {
        return Err(Error::Infeasible {
            max_flow: flow.max_flow_value,
            total: marg.total(),
        });
    }
    let prob = build_problem(x, marg);
    let n = prob.dim();
    if prob.ma == 0 {
        return Err(Error::Empty("no rows or columns with positive marginal".into()));
    }
    if !prob.connected() {
        return Err(Error::Disconnected);
    }
    let tol = 1e-10f64.max(1e-14 * marg.total());
    let noise = 1e-12 * marg.total();

    let mut theta = vec![0.0; n];
    let mut f = prob.objective(&theta);
    let mut iterations = 0;
    let mut converged = false;
    let mut chol = None;
    while iterations <= MAX_NEWTON_ITERATIONS {
        let rates = prob.rates(&theta).ok_or(Error::NotConverged {
            what: "Newton iteration (rate overflow)".into(),
            iterations,
        })?;
        let g = prob.gradient(&rates);
        let gmax = max_abs(&g);
        let c = Cholesky::new(prob.regularised_hessian(&rates)).ok_or(Error::Disconnected)?;
        if gmax < tol {
            converged = true;
            chol = Some(c);
            break;
        }
        let step = c.solve(&DVector::from_column_slice(&g));
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<f64> = theta.iter().zip(step.iter()).map(|(a, s)| a - t * s).collect();
            let ft = prob.objective(&trial);
            // Near the optimum the decrease drops below the rounding noise of
            // `f`; there a step counts if it shrinks the gradient instead.
            let better = ft <= f + 1e-15 * f.abs()
                || (ft <= f + noise
                    && prob
                        .rates(&trial)
                        .is_some_and(|r| max_abs(&prob.gradient(&r)) < gmax));
            if better {
                theta = trial;
                f = ft;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        iterations += 1;
        if !accepted {
            break;
        }
    }
    if !converged {
        return Err(Error::NotConverged {
            what: "Newton iteration".into(),
            iterations,
        });
    }
    let chol = chol.expect("factorisation kept on convergence");

    let shift = theta.iter().sum::<f64>() / n as f64;
    theta.iter_mut().for_each(|t| *t -= shift);

    let mut u = vec![f64::NEG_INFINITY; x.rows()];
    let mut v = vec![f64::INFINITY; x.cols()];
    for (i, &a) in prob.row_of.iter().enumerate() {
        if a != usize::MAX {
            u[i] = theta[a];
        }
    }
    for (j, &b) in prob.col_of.iter().enumerate() {
        if b != usize::MAX {
            v[j] = theta[prob.ma + b];
        }
    }
    let sum_zero = ScalingParameters {
        u,
        v,
        normalization: Normalization::SumZero,
    };
    let loglik = log_likelihood(x, marg, &sum_zero)?;
    let params = sum_zero.normalized(normalization)?;

    // Pseudo-inverse of the Laplacian: (H + J/N)⁻¹ − J/N.
    let inv = chol.inverse();
    let var = |k: usize| (inv[(k, k)] - 1.0 / n as f64).max(0.0).sqrt();
    let mut std_err_u = vec![f64::NAN; x.rows()];
    let mut std_err_v = vec![f64::NAN; x.cols()];
    for (i, &a) in prob.row_of.iter().enumerate() {
        if a != usize::MAX {
            std_err_u[i] = var(a);
        }
    }
    for (j, &b) in prob.col_of.iter().enumerate() {
        if b != usize::MAX {
            std_err_v[j] = var(prob.ma + b);
        }
    }
    let z = Normal::new(0.0, 1.0)
        .expect("standard normal")
        .inverse_cdf(0.5 + level / 2.0);
    let band = |point: &[f64], se: &[f64], sign: f64| -> Vec<f64> {
        point
            .iter()
            .zip(se)
            .map(|(p, s)| if p.is_finite() { p + sign * z * s } else { *p })
            .collect()
    };
    Ok(GlmFit {
        ci_lower_u: band(&params.u, &std_err_u, -1.0),
        ci_upper_u: band(&params.u, &std_err_u, 1.0),
        ci_lower_v: band(&params.v, &std_err_v, -1.0),
        ci_upper_v: band(&params.v, &std_err_v, 1.0),
        std_err_u,
        std_err_v,
        params,
        loglik,
        level,
        converged,
        newton_iterations: iterations,
    })
}
