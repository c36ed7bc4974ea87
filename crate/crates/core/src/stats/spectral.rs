//! Spectra of the bipartite graph induced by a weight matrix `W`:
//! the Fiedler eigenvalue of its Laplacian and the Perron pair of its
//! adjacency `A(W) = [[0, W], [Wᵀ, 0]]`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::network::SparseNetwork;

/// Above this many nodes the Fiedler value is computed by Lanczos instead of a
/// dense eigendecomposition.
pub const DENSE_LAPLACIAN_LIMIT: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LaplacianSpectrum {
    /// Second-smallest eigenvalue of `D(A·1) − A`.
    pub lambda2: f64,
    /// Number of graph nodes, `m + n`.
    pub dimension: usize,
}

impl LaplacianSpectrum {
    pub fn is_connected(&self, tol: f64) -> bool {
        self.lambda2 > tol
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralInfo {
    /// Leading eigenvalue of `A(W)`, i.e. the top singular value of `W`.
    pub lambda1: f64,
    /// Row block of the Perron vector, unit norm, non-negative.
    pub u1: Vec<f64>,
    /// Column block of the Perron vector, unit norm, non-negative.
    pub v1: Vec<f64>,
}

/// Dense Laplacian of the bipartite graph, rows first then columns.
pub fn bipartite_laplacian(w: &SparseNetwork) -> DMatrix<f64> {
    let (m, n) = w.shape();
    let mut l = DMatrix::<f64>::zeros(m + n, m + n);
    for (i, j, x) in w.entries() {
        l[(i, m + j)] -= x;
        l[(m + j, i)] -= x;
        l[(i, i)] += x;
        l[(m + j, m + j)] += x;
    }
    l
}

fn laplacian_apply(w: &SparseNetwork, x: &[f64], out: &mut [f64]) {
    let m = w.rows();
    out.iter_mut().for_each(|o| *o = 0.0);
    for (i, j, a) in w.entries() {
        let d = a * (x[i] - x[m + j]);
        out[i] += d;
        out[m + j] -= d;
    }
}

pub fn bipartite_laplacian_fiedler(w: &SparseNetwork) -> LaplacianSpectrum {
    let dim = w.rows() + w.cols();
    let lambda2 = if dim < 2 {
        0.0
    } else if dim <= DENSE_LAPLACIAN_LIMIT {
        fiedler_dense(w)
    } else {
        fiedler_lanczos(w, 1e-9)
    };
    LaplacianSpectrum {
        lambda2: lambda2.max(0.0),
        dimension: dim,
    }
}

pub(crate) fn fiedler_dense(w: &SparseNetwork) -> f64 {
    let eig = SymmetricEigen::new(bipartite_laplacian(w));
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    vals[1]
}

/// Lanczos with full reorthogonalisation on the complement of the all-ones
/// vector. Returns the smallest Ritz value once its residual bound drops below
/// `rel_tol` times the largest Ritz value.
pub(crate) fn fiedler_lanczos(w: &SparseNetwork, rel_tol: f64) -> f64 {
    let dim = w.rows() + w.cols();
    let ones_norm = 1.0 / (dim as f64).sqrt();
    let project = |x: &mut [f64]| {
        let s: f64 = x.iter().sum::<f64>() * ones_norm;
        x.iter_mut().for_each(|v| *v -= s * ones_norm);
    };
    let max_steps = (dim - 1).min(1500);

    // Deterministic, non-degenerate start vector.
    let mut q: Vec<f64> = (0..dim)
        .map(|k| ((k as f64 + 1.0) * 0.618_033_988_749_895).fract() - 0.5)
        .collect();
    project(&mut q);
    let nq = norm(&q);
    q.iter_mut().for_each(|v| *v /= nq);

    let mut basis: Vec<Vec<f64>> = vec![q];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut work = vec![0.0; dim];
    let mut best = f64::NAN;

    for k in 0..max_steps {
        laplacian_apply(w, &basis[k], &mut work);
        let a = dot(&work, &basis[k]);
        alpha.push(a);
        for b in &basis {
            let c = dot(&work, b);
            work.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
        project(&mut work);
        let bnext = norm(&work);

        let size = alpha.len();
        let mut t = DMatrix::<f64>::zeros(size, size);
        for i in 0..size {
            t[(i, i)] = alpha[i];
            if i + 1 < size {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let (imin, &theta) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        let theta_max = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
        let resid = bnext * eig.eigenvectors[(size - 1, imin)].abs();
        best = theta;
        if resid <= rel_tol * theta_max.max(f64::MIN_POSITIVE) || bnext <= 1e-14 * theta_max {
            break;
        }
        beta.push(bnext);
        basis.push(work.iter().map(|v| v / bnext).collect());
    }
    best
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

const POWER_MAX_ITER: usize = 200_000;

/// Leading eigenpair of `A(W)` by power iteration on `W Wᵀ`.
pub fn perron_spectral(w: &SparseNetwork) -> Result<SpectralInfo> {
    if w.nnz() == 0 {
        return Err(Error::Empty("Perron pair of a zero matrix".into()));
    }
    let (m, n) = w.shape();
    let mut u = vec![1.0 / (m as f64).sqrt(); m];
    let mut v = vec![0.0; n];
    let mut wv = vec![0.0; m];
    for it in 0..POWER_MAX_ITER {
        // v = Wᵀ u
        v.iter_mut().for_each(|x| *x = 0.0);
        for (i, j, a) in w.entries() {
            v[j] += a * u[i];
        }
        let sigma = norm(&v);
        if sigma == 0.0 {
            return Err(Error::Empty("start vector orthogonal to the range of W".into()));
        }
        v.iter_mut().for_each(|x| *x /= sigma);
        // wv = W v
        wv.iter_mut().for_each(|x| *x = 0.0);
        for (i, j, a) in w.entries() {
            wv[i] += a * v[j];
        }
        let resid = wv
            .iter()
            .zip(&u)
            .map(|(a, b)| (a - sigma * b).abs())
            .fold(0.0, f64::max);
        let nu = norm(&wv);
        u.iter_mut().zip(&wv).for_each(|(x, y)| *x = y / nu);
        if resid <= 1e-13 * sigma.max(1.0) && it > 0 {
            break;
        }
        if it + 1 == POWER_MAX_ITER {
            return Err(Error::NotConverged {
                what: "Perron power iteration".into(),
                iterations: POWER_MAX_ITER,
            });
        }
    }
    // Recompute v from the final u so that Wᵀu = λ v holds exactly.
    v.iter_mut().for_each(|x| *x = 0.0);
    for (i, j, a) in w.entries() {
        v[j] += a * u[i];
    }
    let sigma = norm(&v);
    v.iter_mut().for_each(|x| *x /= sigma);
    sign_normalize(&mut u);
    sign_normalize(&mut v);
    Ok(SpectralInfo {
        lambda1: sigma,
        u1: u,
        v1: v,
    })
}

fn sign_normalize(x: &mut [f64]) {
    let min = x.iter().copied().fold(f64::INFINITY, f64::min);
    if min < 0.0 {
        x.iter_mut().for_each(|v| *v = -*v);
    }
    x.iter_mut().for_each(|v| *v = v.max(0.0));
}

/// `λ₁` of `A(W)`; zero for an empty matrix.
pub fn leading_eigenvalue(w: &SparseNetwork) -> Result<f64> {
    if w.nnz() == 0 {
        return Ok(0.0);
    }
    Ok(perron_spectral(w)?.lambda1)
}

/// `‖A(W)·x − λ₁x‖∞` for `x = (u1, v1)/√2`.
pub fn perron_residual(w: &SparseNetwork, info: &SpectralInfo) -> f64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut top = vec![0.0; w.rows()];
    let mut bottom = vec![0.0; w.cols()];
    for (i, j, a) in w.entries() {
        top[i] += a * info.v1[j] * s;
        bottom[j] += a * info.u1[i] * s;
    }
    let r1 = top
        .iter()
        .zip(&info.u1)
        .map(|(a, b)| (a - info.lambda1 * b * s).abs());
    let r2 = bottom
        .iter()
        .zip(&info.v1)
        .map(|(a, b)| (a - info.lambda1 * b * s).abs());
    r1.chain(r2).fold(0.0, f64::max)
}
