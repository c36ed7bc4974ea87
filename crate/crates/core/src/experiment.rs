//! Monte-Carlo drivers: sweeps over sparsity and over generative models.
//!
//! Trials run in parallel. Each trial is keyed by `(seed, trial index)`, so
//! results do not depend on scheduling.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ipf::{run_ipf, IpfConfig, IpfStatus};
use crate::stats::bound::error_bound;
use crate::stats::diagnostics::fit_diagnostics;
use crate::stats::percentile;
use crate::synth::{cosine_similarity, generate_trial, l2_param_error, GenerativeModel, SynthConfig};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialMetrics {
    pub trial: u64,
    pub status: IpfStatus,
    pub iterations: usize,
    /// `κ / λ₂²` at the truth.
    pub bound_ratio: f64,
    pub l2_error: f64,
    /// Between the IPF estimate and the sampled network.
    pub cosine: f64,
    pub dispersion: f64,
    /// Whether the ℓ1 marginal error never increased.
    pub monotone_trace: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    /// 2.5th percentile.
    pub lo: f64,
    /// 97.5th percentile.
    pub hi: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("no trials to summarise".into()));
        }
        let mut s = values.to_vec();
        s.sort_by(f64::total_cmp);
        Ok(Summary {
            mean: s.iter().sum::<f64>() / s.len() as f64,
            lo: percentile(&s, 2.5),
            hi: percentile(&s, 97.5),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentRow {
    pub model: String,
    pub sparsity: f64,
    pub trials: usize,
    pub converged: usize,
    pub iterations: Summary,
    pub bound_ratio: Summary,
    pub l2_error: Summary,
    pub cosine: Summary,
    pub dispersion: Summary,
}

/// Slack allowed on successive entries of the ℓ1 trace.
pub const TRACE_SLACK: f64 = 1e-12;

pub fn trace_is_monotone(trace: &[f64]) -> bool {
    trace.windows(2).all(|w| w[1] <= w[0] + TRACE_SLACK)
}

pub fn run_trial(
    cfg: &SynthConfig,
    model: &GenerativeModel,
    trial: u64,
    ipf: &IpfConfig,
) -> Result<TrialMetrics> {
    let inst = generate_trial(cfg, model, trial)?;
    let res = run_ipf(&inst.xbar, &inst.marg, ipf)?;
    let estimate = res.estimate(&inst.xbar);
    let b = inst
        .truth
        .u
        .iter()
        .chain(&inst.truth.v)
        .fold(0.0f64, |a, x| a.max(x.abs()));
    let bound = error_bound(&inst.xbar, &inst.truth, b)?;
    let active_rows = res.d0.iter().filter(|&&d| d > 0.0).count();
    let active_cols = res.d1.iter().filter(|&&d| d > 0.0).count();
    let dispersion = fit_diagnostics(&inst.y, &estimate, active_rows, active_cols)
        .map(|d| d.dispersion)
        .unwrap_or(f64::NAN);
    Ok(TrialMetrics {
        trial,
        status: res.status,
        iterations: res.iterations,
        bound_ratio: bound.kappa_over_lambda2_sq,
        l2_error: l2_param_error(&res.d0, &res.d1, &inst.truth)?,
        cosine: cosine_similarity(&estimate, &inst.y)?,
        dispersion,
        monotone_trace: trace_is_monotone(&res.l1_trace),
    })
}

pub fn run_trials(
    cfg: &SynthConfig,
    model: &GenerativeModel,
    trials: usize,
    ipf: &IpfConfig,
) -> Result<Vec<TrialMetrics>> {
    (0..trials as u64)
        .into_par_iter()
        .map(|t| run_trial(cfg, model, t, ipf))
        .collect()
}

pub fn summarize(model: &GenerativeModel, sparsity: f64, metrics: &[TrialMetrics]) -> Result<ExperimentRow> {
    let col = |f: fn(&TrialMetrics) -> f64| -> Result<Summary> {
        Summary::of(&metrics.iter().map(f).collect::<Vec<_>>())
    };
    Ok(ExperimentRow {
        model: model.label(),
        sparsity,
        trials: metrics.len(),
        converged: metrics.iter().filter(|m| m.status == IpfStatus::Converged).count(),
        iterations: col(|m| m.iterations as f64)?,
        bound_ratio: col(|m| m.bound_ratio)?,
        l2_error: col(|m| m.l2_error)?,
        cosine: col(|m| m.cosine)?,
        dispersion: col(|m| m.dispersion)?,
    })
}

/// One row per sparsity level, Poisson data.
pub fn experiment_sparsity(
    base: &SynthConfig,
    grid: &[f64],
    trials: usize,
    ipf: &IpfConfig,
) -> Result<Vec<(ExperimentRow, Vec<TrialMetrics>)>> {
    grid.iter()
        .map(|&r| {
            let cfg = SynthConfig { sparsity: r, ..*base };
            let metrics = run_trials(&cfg, &GenerativeModel::Poisson, trials, ipf)?;
            Ok((summarize(&GenerativeModel::Poisson, r, &metrics)?, metrics))
        })
        .collect()
}

/// One row per generative model at the configured sparsity.
pub fn experiment_misspec(
    base: &SynthConfig,
    models: &[GenerativeModel],
    trials: usize,
    ipf: &IpfConfig,
) -> Result<Vec<(ExperimentRow, Vec<TrialMetrics>)>> {
    models
        .iter()
        .map(|model| {
            let metrics = run_trials(base, model, trials, ipf)?;
            Ok((summarize(model, base.sparsity, &metrics)?, metrics))
        })
        .collect()
}

/// Models of the misspecification sweep, from best to worst expected IPF fit.
pub fn misspec_models() -> Vec<GenerativeModel> {
    vec![
        GenerativeModel::Poisson,
        GenerativeModel::NegBinom { gamma: 0.8 },
        GenerativeModel::NegBinom { gamma: 0.5 },
        GenerativeModel::Exponential,
        GenerativeModel::NegBinom { gamma: 0.2 },
    ]
}

/// `{0, 0.05, …, 0.9}`.
pub fn sparsity_grid() -> Vec<f64> {
    (0..=18).map(|k| k as f64 * 0.05).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_trial_gives_one_row() {
        let cfg = SynthConfig {
            m: 20,
            n: 20,
            seed: 4,
            ..Default::default()
        };
        let rows = experiment_sparsity(&cfg, &[0.0], 1, &IpfConfig::default()).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].0.trials, 1);
        assert_eq!(rows[0].0.converged, 1);
        assert!(rows[0].1[0].monotone_trace);
    }

    #[test]
    fn trials_are_reproducible() {
        let cfg = SynthConfig {
            m: 15,
            n: 10,
            sparsity: 0.2,
            seed: 11,
            ..Default::default()
        };
        let a = run_trials(&cfg, &GenerativeModel::Poisson, 6, &IpfConfig::default()).unwrap();
        let b = run_trials(&cfg, &GenerativeModel::Poisson, 6, &IpfConfig::default()).unwrap();
        assert_eq!(a, b);
    }
}
