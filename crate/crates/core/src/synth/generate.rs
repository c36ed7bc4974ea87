//! Instance generation.
//!
//! Row and column factors `e^{u_i}`, `e^{−v_j}` are drawn once per seed. Each
//! trial then draws its own aggregated network `X̄` (and, for the interaction
//! model, station positions) and its own noise, each from a dedicated stream
//! of a ChaCha generator keyed by the seed. Every model therefore sees the
//! same truth and, for a given trial, the same `X̄`.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gamma, Poisson};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::network::{marginals, MarginalPair, SparseNetwork};
use crate::stats::likelihood::{Normalization, ScalingParameters};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SynthConfig {
    pub m: usize,
    pub n: usize,
    /// Fraction of entries of `X̄` set to zero.
    pub sparsity: f64,
    pub param_low: f64,
    pub param_high: f64,
    pub base_low: f64,
    pub base_high: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            m: 100,
            n: 100,
            sparsity: 0.0,
            param_low: 0.0,
            param_high: 4.0,
            base_low: 0.0,
            base_high: 1.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 {
            return Err(Error::InvalidConfig("m and n must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.sparsity) {
            return Err(Error::InvalidConfig(format!(
                "sparsity must lie in [0, 1), got {}",
                self.sparsity
            )));
        }
        if !(self.param_low >= 0.0 && self.param_low < self.param_high && self.param_high.is_finite()) {
            return Err(Error::InvalidConfig("parameter range must satisfy 0 <= low < high".into()));
        }
        if !(self.base_low >= 0.0 && self.base_low < self.base_high && self.base_high.is_finite()) {
            return Err(Error::InvalidConfig("base range must satisfy 0 <= low < high".into()));
        }
        Ok(())
    }

    /// Number of zeroed entries, `⌊r·m·n⌋`.
    pub fn zeroed_entries(&self) -> usize {
        (self.sparsity * (self.m * self.n) as f64).floor() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GenerativeModel {
    Poisson,
    /// Exponential noise with the Poisson mean; `Y` stays continuous.
    Exponential,
    /// Negative binomial with success probability `gamma`.
    NegBinom { gamma: f64 },
    /// Poisson with mean multiplied by `d^α e^{−βd}` for Euclidean distances
    /// between random row and column positions in the unit square.
    Interaction { alpha: f64, beta: f64 },
}

impl GenerativeModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            GenerativeModel::NegBinom { gamma } if !(gamma > 0.0 && gamma < 1.0) => Err(
                Error::InvalidConfig(format!("negative binomial gamma must lie in (0, 1), got {gamma}")),
            ),
            GenerativeModel::Interaction { alpha, beta } if !(alpha.is_finite() && beta.is_finite()) => {
                Err(Error::InvalidConfig("interaction parameters must be finite".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn label(&self) -> String {
        match self {
            GenerativeModel::Poisson => "poisson".into(),
            GenerativeModel::Exponential => "exponential".into(),
            GenerativeModel::NegBinom { gamma } => format!("negbinom({gamma})"),
            GenerativeModel::Interaction { alpha, beta } => format!("interaction({alpha},{beta})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthInstance {
    pub xbar: SparseNetwork,
    /// Parameters that generated the data, unnormalised.
    pub truth: ScalingParameters,
    pub y: SparseNetwork,
    pub marg: MarginalPair,
    pub seed: u64,
    pub trial: u64,
    /// Row and column positions, interaction model only.
    pub positions: Option<(Vec<[f64; 2]>, Vec<[f64; 2]>)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NegBinomParams {
    /// Number of successes `s = γλ / (1 − γ)`.
    pub successes: f64,
    pub probability: f64,
    /// `λ / γ`.
    pub variance: f64,
}

pub fn negbinom_params(mean: f64, gamma: f64) -> Result<NegBinomParams> {
    if !(mean > 0.0 && mean.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "negative binomial mean must be positive, got {mean}"
        )));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::InvalidConfig(format!("gamma must lie in (0, 1], got {gamma}")));
    }
    Ok(NegBinomParams {
        successes: gamma * mean / (1.0 - gamma),
        probability: gamma,
        variance: mean / gamma,
    })
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn positive_uniform(rng: &mut ChaCha8Rng, low: f64, high: f64) -> f64 {
    loop {
        let x = rng.random_range(low..high);
        if x > 0.0 {
            return x;
        }
    }
}

pub fn generate_instance(cfg: &SynthConfig, model: &GenerativeModel) -> Result<SynthInstance> {
    generate_trial(cfg, model, 0)
}

pub fn generate_trial(cfg: &SynthConfig, model: &GenerativeModel, trial: u64) -> Result<SynthInstance> {
    cfg.validate()?;
    model.validate()?;
    let (m, n) = (cfg.m, cfg.n);

    let mut truth_rng = stream(cfg.seed, 0);
    let a: Vec<f64> = (0..m)
        .map(|_| positive_uniform(&mut truth_rng, cfg.param_low, cfg.param_high))
        .collect();
    let b: Vec<f64> = (0..n)
        .map(|_| positive_uniform(&mut truth_rng, cfg.param_low, cfg.param_high))
        .collect();
    let truth = ScalingParameters::from_factors(&a, &b, Normalization::Raw)?;

    let mut base_rng = stream(cfg.seed, 1 + 2 * trial);
    let mut dense: Vec<f64> = (0..m * n)
        .map(|_| positive_uniform(&mut base_rng, cfg.base_low, cfg.base_high))
        .collect();
    for k in sample(&mut base_rng, m * n, cfg.zeroed_entries()) {
        dense[k] = 0.0;
    }
    let positions = match model {
        GenerativeModel::Interaction { .. } => {
            let mut pt = || [base_rng.random::<f64>(), base_rng.random::<f64>()];
            let rows: Vec<[f64; 2]> = (0..m).map(|_| pt()).collect();
            let cols: Vec<[f64; 2]> = (0..n).map(|_| pt()).collect();
            Some((rows, cols))
        }
        _ => None,
    };
    let xbar = SparseNetwork::from_triplets(
        m,
        n,
        dense
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 0.0)
            .map(|(k, &w)| (k / n, k % n, w)),
    )?;

    let mut noise = stream(cfg.seed, 2 + 2 * trial);
    let mut y_trip = Vec::with_capacity(xbar.nnz());
    for (i, j, w) in xbar.entries() {
        let mut mean = a[i] * w * b[j];
        if let (GenerativeModel::Interaction { alpha, beta }, Some((rp, cp))) = (model, &positions) {
            let d = ((rp[i][0] - cp[j][0]).powi(2) + (rp[i][1] - cp[j][1]).powi(2)).sqrt();
            if !(d > 0.0) {
                return Err(Error::InvalidConfig(format!("zero distance between row {i} and column {j}")));
            }
            mean *= d.powf(*alpha) * (-beta * d).exp();
        }
        let value = draw(model, mean, &mut noise)?;
        if value > 0.0 {
            y_trip.push((i, j, value));
        }
    }
    let y = SparseNetwork::from_triplets(m, n, y_trip)?;
    let marg = marginals(&y);
    Ok(SynthInstance {
        xbar,
        truth,
        y,
        marg,
        seed: cfg.seed,
        trial,
        positions,
    })
}

fn draw(model: &GenerativeModel, mean: f64, rng: &mut ChaCha8Rng) -> Result<f64> {
    if !(mean > 0.0) {
        return Ok(0.0);
    }
    let bad = |e: String| Error::InvalidConfig(format!("sampler for mean {mean}: {e}"));
    Ok(match *model {
        GenerativeModel::Poisson | GenerativeModel::Interaction { .. } => {
            Poisson::new(mean).map_err(|e| bad(e.to_string()))?.sample(rng)
        }
        GenerativeModel::Exponential => Exp::new(1.0 / mean).map_err(|e| bad(e.to_string()))?.sample(rng),
        GenerativeModel::NegBinom { gamma } => {
            let nb = negbinom_params(mean, gamma)?;
            let scale = (1.0 - gamma) / gamma;
            let rate = Gamma::new(nb.successes, scale)
                .map_err(|e| bad(e.to_string()))?
                .sample(rng);
            if rate > 0.0 {
                Poisson::new(rate).map_err(|e| bad(e.to_string()))?.sample(rng)
            } else {
                0.0
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn negbinom_examples() {
        let a = negbinom_params(1.0, 0.5).unwrap();
        assert_eq!((a.successes, a.variance), (1.0, 2.0));
        let b = negbinom_params(4.0, 0.8).unwrap();
        assert!((b.successes - 16.0).abs() < 1e-12 && (b.variance - 5.0).abs() < 1e-12);
        assert!(negbinom_params(0.0, 0.5).is_err());
        let near = negbinom_params(3.0, 1.0 - 1e-9).unwrap();
        assert!((near.variance - 3.0).abs() < 1e-6);
    }

    #[test]
    fn sparsity_count() {
        let cfg = SynthConfig {
            sparsity: 0.9,
            seed: 5,
            ..Default::default()
        };
        let inst = generate_instance(&cfg, &GenerativeModel::Poisson).unwrap();
        assert_eq!(inst.xbar.nnz(), 1000);
    }

    #[test]
    fn deterministic_and_shared_across_models() {
        let cfg = SynthConfig {
            m: 15,
            n: 12,
            sparsity: 0.3,
            seed: 99,
            ..Default::default()
        };
        let a = generate_trial(&cfg, &GenerativeModel::Poisson, 3).unwrap();
        let b = generate_trial(&cfg, &GenerativeModel::Poisson, 3).unwrap();
        assert_eq!(a, b);
        let c = generate_trial(&cfg, &GenerativeModel::NegBinom { gamma: 0.5 }, 3).unwrap();
        let d = generate_trial(&cfg, &GenerativeModel::Exponential, 3).unwrap();
        assert_eq!(a.xbar, c.xbar);
        assert_eq!(a.xbar, d.xbar);
        assert_eq!(a.truth, d.truth);
        let other = generate_trial(&cfg, &GenerativeModel::Poisson, 4).unwrap();
        assert_eq!(a.truth, other.truth);
        assert_ne!(a.xbar, other.xbar);
    }

    #[test]
    fn support_and_marginals() {
        let cfg = SynthConfig {
            m: 20,
            n: 30,
            sparsity: 0.5,
            seed: 1,
            ..Default::default()
        };
        for model in [
            GenerativeModel::Poisson,
            GenerativeModel::Exponential,
            GenerativeModel::NegBinom { gamma: 0.2 },
            GenerativeModel::Interaction { alpha: -0.5, beta: 2.0 },
        ] {
            let inst = generate_instance(&cfg, &model).unwrap();
            assert!(inst.y.entries().all(|(i, j, _)| inst.xbar.contains(i, j)));
            assert_eq!(inst.marg, marginals(&inst.y));
        }
    }

    #[test]
    fn invalid_inputs() {
        let cfg = SynthConfig::default();
        assert!(generate_instance(&cfg, &GenerativeModel::NegBinom { gamma: 1.0 }).is_err());
        let bad = SynthConfig {
            sparsity: 1.0,
            ..Default::default()
        };
        assert!(generate_instance(&bad, &GenerativeModel::Poisson).is_err());
        let degenerate = SynthConfig {
            param_low: 2.0,
            param_high: 2.0,
            ..Default::default()
        };
        assert!(generate_instance(&degenerate, &GenerativeModel::Poisson).is_err());
    }
}
