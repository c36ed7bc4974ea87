//! The biproportional Poisson model `Y_ij ~ Poisson(e^{u_i} X̄_ij e^{-v_j})`
//! and diagnostics built on it.

pub mod bound;
pub mod diagnostics;
pub mod likelihood;
pub mod newton;
pub mod spectral;

pub use bound::{error_bound, finite_mle_condition, ErrorBoundReport};
pub use diagnostics::{fit_diagnostics, stationarity_check, FitDiagnostics, PercentileSummary};
pub use likelihood::{log_likelihood, neg_ll_gradient, rate_matrix, Normalization, ScalingParameters};
pub use newton::{mle_newton, GlmFit};
pub use spectral::{bipartite_laplacian_fiedler, perron_spectral, LaplacianSpectrum, SpectralInfo};

/// Percentile with linear interpolation between order statistics.
/// `sorted` must be ascending and non-empty; `pct` is in `[0, 100]`.
pub fn percentile(sorted: &[f64], pct: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of an empty sample");
    let pos = pct / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}
