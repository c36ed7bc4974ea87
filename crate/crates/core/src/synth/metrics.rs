//! Scale-free comparisons of networks and of scaling factors.

use crate::error::{Error, Result};
use crate::ipf::mean_normalize;
use crate::network::SparseNetwork;
use crate::stats::likelihood::ScalingParameters;

/// `⟨A, B⟩ / (‖A‖₂ ‖B‖₂)` over entries.
pub fn cosine_similarity(a: &SparseNetwork, b: &SparseNetwork) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch {
            expected: format!("{:?}", a.shape()),
            got: format!("{:?}", b.shape()),
        });
    }
    let (na, nb) = (a.frobenius_sq().sqrt(), b.frobenius_sq().sqrt());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Empty("cosine similarity of a zero matrix".into()));
    }
    let dot: f64 = a.entries().map(|(i, j, w)| w * b.get(i, j)).sum();
    Ok(dot / (na * nb))
}

/// ℓ2 distance between mean-normalised factors and mean-normalised true
/// factors `e^u`, `e^{−v}`. Indices with a zero estimated factor (zero
/// marginal) are left out of both the error and the truth normalisation.
pub fn l2_param_error(d0: &[f64], d1: &[f64], truth: &ScalingParameters) -> Result<f64> {
    if d0.len() != truth.rows() || d1.len() != truth.cols() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} and {} factors", truth.rows(), truth.cols()),
            got: format!("{} and {}", d0.len(), d1.len()),
        });
    }
    Ok((block_sq_error(d0, &truth.row_factors())? + block_sq_error(d1, &truth.col_factors())?).sqrt())
}

fn block_sq_error(est: &[f64], truth: &[f64]) -> Result<f64> {
    let masked: Vec<f64> = truth
        .iter()
        .zip(est)
        .map(|(&t, &e)| if e > 0.0 { t } else { 0.0 })
        .collect();
    let e = mean_normalize(est)?;
    let t = mean_normalize(&masked)?;
    Ok(e.iter().zip(&t).map(|(a, b)| (a - b).powi(2)).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::likelihood::Normalization;

    #[test]
    fn cosine_examples() {
        let a = SparseNetwork::from_dense(&[vec![1.0, 0.0]]).unwrap();
        let b = SparseNetwork::from_dense(&[vec![1.0, 1.0]]).unwrap();
        assert!((cosine_similarity(&a, &b).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((cosine_similarity(&b, &b).unwrap() - 1.0).abs() < 1e-15);
        let c = SparseNetwork::from_dense(&[vec![0.0, 2.0]]).unwrap();
        assert_eq!(cosine_similarity(&a, &c).unwrap(), 0.0);
        assert!(cosine_similarity(&a, &SparseNetwork::zeros(1, 2)).is_err());
    }

    #[test]
    fn l2_gauge_free() {
        let d0 = [1.0, 2.0, 3.0];
        let d1 = [0.5, 4.0];
        let truth = ScalingParameters::from_factors(&d0, &d1, Normalization::Raw).unwrap();
        assert!(l2_param_error(&d0, &d1, &truth).unwrap() < 1e-12);
        let s0: Vec<f64> = d0.iter().map(|x| x * 7.0).collect();
        let s1: Vec<f64> = d1.iter().map(|x| x / 7.0).collect();
        assert!(l2_param_error(&s0, &s1, &truth).unwrap() < 1e-12);
        assert!(l2_param_error(&d0[..2], &d1, &truth).is_err());
    }
}
