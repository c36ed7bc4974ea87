//! ConvIPF: add edges to the support of `X` until IPF can converge.
//!
//! Each round finds one blocking set `S` with gap `δ = Σ_S p − Σ_{N(S)} q`
//! and connects a single row of `S` to columns outside `N(S)` whose column
//! marginals cover `δ`. Columns are chosen either to minimise the number of
//! new edges or to minimise the first-order change of the leading eigenvalue
//! of the bipartite adjacency.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::feasibility::{check_feasibility, find_blocking_set, BlockingDiagnosis};
use crate::knapsack::knapsack_min_cover;
use crate::network::{MarginalPair, SparseNetwork};
use crate::stats::spectral::{leading_eigenvalue, perron_spectral, SpectralInfo};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RepairObjective {
    MinEdges,
    MinLambda1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RowTiebreak {
    LargestP,
    SmallestP,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RepairConfig {
    pub objective: RepairObjective,
    /// Row choice for [`RepairObjective::MinEdges`].
    pub tiebreak: RowTiebreak,
    /// New edges get this multiple of the smallest positive entry of the input.
    pub edge_weight_multiplier: f64,
    pub knapsack_resolution: usize,
    /// Defaults to `m * n` when unset.
    pub max_rounds: Option<usize>,
}

impl Default for RepairConfig {
    fn default() -> Self {
        RepairConfig {
            objective: RepairObjective::MinLambda1,
            tiebreak: RowTiebreak::LargestP,
            edge_weight_multiplier: 0.01,
            knapsack_resolution: 1_000_000,
            max_rounds: None,
        }
    }
}

impl RepairConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.edge_weight_multiplier > 0.0 && self.edge_weight_multiplier.is_finite()) {
            return Err(Error::InvalidConfig(
                "edge weight multiplier must be positive".into(),
            ));
        }
        if self.knapsack_resolution == 0 {
            return Err(Error::InvalidConfig("knapsack resolution must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeAdditionSet {
    pub edges: Vec<(usize, usize)>,
    pub weight: f64,
    /// Eigenscore estimate of the change in `λ₁`.
    pub estimated_dlambda1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepairRound {
    pub blocking: BlockingDiagnosis,
    pub additions: EdgeAdditionSet,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepairReport {
    pub rounds: usize,
    pub total_edges_added: usize,
    pub round_log: Vec<RepairRound>,
    pub lambda1_before: f64,
    pub lambda1_after: f64,
    /// `lambda1_after - lambda1_before`.
    pub exact_dlambda1: f64,
    pub network: SparseNetwork,
}

/// Columns outside `N(S)` with positive marginal.
fn free_columns(marg: &MarginalPair, diag: &BlockingDiagnosis) -> Vec<usize> {
    let mut blocked = vec![false; marg.cols()];
    for &j in &diag.neighbor_cols {
        blocked[j] = true;
    }
    (0..marg.cols())
        .filter(|&j| !blocked[j] && marg.q()[j] > 0.0)
        .collect()
}

fn slack(marg: &MarginalPair) -> f64 {
    1e-12 * marg.total()
}

fn check_rows(diag: &BlockingDiagnosis, rows: usize) -> Result<()> {
    if diag.rows.is_empty() {
        return Err(Error::Empty("blocking set has no rows".into()));
    }
    match diag.rows.iter().find(|&&i| i >= rows) {
        Some(&i) => Err(Error::IndexOutOfRange {
            row: i,
            col: 0,
            rows,
            cols: 0,
        }),
        None => Ok(()),
    }
}

/// Fewest columns of `N̄(S)` covering `δ`, all wired to one row of `S`.
pub fn unblock_min_edges(
    x: &SparseNetwork,
    marg: &MarginalPair,
    diag: &BlockingDiagnosis,
    tiebreak: RowTiebreak,
    weight: f64,
) -> Result<EdgeAdditionSet> {
    marg.check_dims(x)?;
    check_rows(diag, x.rows())?;
    let p = marg.p();
    let q = marg.q();
    let row = match tiebreak {
        RowTiebreak::LargestP => *diag
            .rows
            .iter()
            .min_by(|&&a, &&b| p[b].total_cmp(&p[a]).then(a.cmp(&b)))
            .unwrap(),
        RowTiebreak::SmallestP => *diag
            .rows
            .iter()
            .min_by(|&&a, &&b| p[a].total_cmp(&p[b]).then(a.cmp(&b)))
            .unwrap(),
    };
    let mut cols = free_columns(marg, diag);
    cols.sort_by(|&a, &b| q[b].total_cmp(&q[a]).then(a.cmp(&b)));
    let target = diag.delta - slack(marg);
    let mut covered = 0.0;
    let mut edges = Vec::new();
    for j in cols {
        if covered >= target {
            break;
        }
        covered += q[j];
        edges.push((row, j));
    }
    if covered < target {
        return Err(Error::CannotUnblock {
            available: covered,
            delta: diag.delta,
        });
    }
    edges.sort_unstable();
    Ok(EdgeAdditionSet {
        edges,
        weight,
        estimated_dlambda1: None,
    })
}

/// Eigenscore-minimising columns wired to the row of `S` with the smallest
/// Perron score.
pub fn perron_addition(
    x: &SparseNetwork,
    marg: &MarginalPair,
    diag: &BlockingDiagnosis,
    spec: &SpectralInfo,
    weight: f64,
    knapsack_resolution: usize,
) -> Result<EdgeAdditionSet> {
    perron_addition_inner(x, marg, diag, spec, weight, knapsack_resolution, None)
}

/// As [`perron_addition`] but with the attachment row fixed to `row ∈ S`.
pub fn perron_addition_at_row(
    x: &SparseNetwork,
    marg: &MarginalPair,
    diag: &BlockingDiagnosis,
    spec: &SpectralInfo,
    weight: f64,
    knapsack_resolution: usize,
    row: usize,
) -> Result<EdgeAdditionSet> {
    if !diag.rows.contains(&row) {
        return Err(Error::InvalidConfig(format!("row {row} is not in the blocking set")));
    }
    perron_addition_inner(x, marg, diag, spec, weight, knapsack_resolution, Some(row))
}

fn perron_addition_inner(
    x: &SparseNetwork,
    marg: &MarginalPair,
    diag: &BlockingDiagnosis,
    spec: &SpectralInfo,
    weight: f64,
    knapsack_resolution: usize,
    forced_row: Option<usize>,
) -> Result<EdgeAdditionSet> {
    marg.check_dims(x)?;
    check_rows(diag, x.rows())?;
    if spec.u1.len() != x.rows() || spec.v1.len() != x.cols() {
        return Err(Error::DimensionMismatch {
            expected: format!("eigenvectors of length {} and {}", x.rows(), x.cols()),
            got: format!("{} and {}", spec.u1.len(), spec.v1.len()),
        });
    }
    let row = forced_row.unwrap_or_else(|| {
        *diag
            .rows
            .iter()
            .min_by(|&&a, &&b| spec.u1[a].total_cmp(&spec.u1[b]).then(a.cmp(&b)))
            .unwrap()
    });
    let cols = free_columns(marg, diag);
    let values: Vec<f64> = cols.iter().map(|&j| spec.v1[j]).collect();
    let weights: Vec<f64> = cols.iter().map(|&j| marg.q()[j]).collect();
    let available: f64 = weights.iter().sum();
    if available < diag.delta - slack(marg) {
        return Err(Error::CannotUnblock {
            available,
            delta: diag.delta,
        });
    }
    let threshold = diag.delta.min(available);
    let picked = knapsack_min_cover(&values, &weights, threshold, knapsack_resolution)?;
    let edges: Vec<(usize, usize)> = picked.iter().map(|&k| (row, cols[k])).collect();
    let score: f64 = picked.iter().map(|&k| values[k]).sum();
    Ok(EdgeAdditionSet {
        edges,
        weight,
        estimated_dlambda1: Some(weight * spec.u1[row] * score),
    })
}

fn spectral_or_flat(x: &SparseNetwork) -> Result<SpectralInfo> {
    if x.nnz() == 0 {
        return Ok(SpectralInfo {
            lambda1: 0.0,
            u1: vec![0.0; x.rows()],
            v1: vec![0.0; x.cols()],
        });
    }
    perron_spectral(x)
}

/// Weight given to repair edges on `x`.
pub fn repair_edge_weight(x: &SparseNetwork, multiplier: f64) -> f64 {
    multiplier * x.min_positive().unwrap_or(1.0)
}

/// Repeats blocking-set search and edge addition until `x` is feasible.
pub fn conv_ipf(x: &SparseNetwork, marg: &MarginalPair, cfg: &RepairConfig) -> Result<RepairReport> {
    cfg.validate()?;
    marg.check_dims(x)?;
    let max_rounds = cfg.max_rounds.unwrap_or(x.rows() * x.cols());
    let weight = repair_edge_weight(x, cfg.edge_weight_multiplier);
    let lambda1_before = leading_eigenvalue(x)?;

    let mut current = x.clone();
    let mut round_log = Vec::new();
    loop {
        let flow = check_feasibility(&current, marg)?;
        if flow.feasible {
            break;
        }
        if round_log.len() >= max_rounds {
            return Err(Error::MaxRoundsExceeded(max_rounds));
        }
        let blocking = find_blocking_set(&current, marg, &flow)?;
        let additions = match cfg.objective {
            RepairObjective::MinEdges => {
                unblock_min_edges(&current, marg, &blocking, cfg.tiebreak, weight)?
            }
            RepairObjective::MinLambda1 => {
                let spec = spectral_or_flat(&current)?;
                perron_addition(&current, marg, &blocking, &spec, weight, cfg.knapsack_resolution)?
            }
        };
        current = current.with_added(&additions.edges, weight)?;
        round_log.push(RepairRound {
            blocking,
            additions,
        });
    }

    let lambda1_after = leading_eigenvalue(&current)?;
    Ok(RepairReport {
        rounds: round_log.len(),
        total_edges_added: round_log.iter().map(|r| r.additions.edges.len()).sum(),
        round_log,
        lambda1_before,
        lambda1_after,
        exact_dlambda1: lambda1_after - lambda1_before,
        network: current,
    })
}

/// Sets every zero entry of `x` to `eps_fill`.
pub fn fill_all_zeros(x: &SparseNetwork, eps_fill: f64) -> Result<SparseNetwork> {
    if !(eps_fill > 0.0 && eps_fill.is_finite()) {
        return Err(Error::InvalidConfig("fill value must be positive".into()));
    }
    let (m, n) = x.shape();
    let missing: Vec<(usize, usize)> = (0..m)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| !x.contains(i, j))
        .collect();
    x.with_added(&missing, eps_fill)
}

/// `λ₁(after) − λ₁(before)` from two eigenvalue evaluations.
pub fn exact_dlambda1(before: &SparseNetwork, after: &SparseNetwork) -> Result<f64> {
    Ok(leading_eigenvalue(after)? - leading_eigenvalue(before)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (SparseNetwork, MarginalPair) {
        let x = SparseNetwork::from_dense(&[
            vec![1.0, 0.0, 0.0],
            vec![1.0, 1.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 1.0, 1.0],
        ])
        .unwrap();
        (x, MarginalPair::new(vec![1.0; 4], vec![1.0, 1.0, 2.0]).unwrap())
    }

    fn fake_diag(cols: usize, blocked: Vec<usize>, delta: f64) -> BlockingDiagnosis {
        let _ = cols;
        BlockingDiagnosis {
            rows: vec![0],
            neighbor_cols: blocked,
            p_sum: delta,
            q_sum: 0.0,
            delta,
        }
    }

    #[test]
    fn min_edges_greedy_prefix() {
        let x = SparseNetwork::zeros(1, 3);
        let m = MarginalPair::new(vec![6.0], vec![3.0, 2.0, 1.0]).unwrap();
        let a = unblock_min_edges(&x, &m, &fake_diag(3, vec![], 0.5), RowTiebreak::LargestP, 1.0).unwrap();
        assert_eq!(a.edges, vec![(0, 0)]);
        let b = unblock_min_edges(&x, &m, &fake_diag(3, vec![], 4.5), RowTiebreak::LargestP, 1.0).unwrap();
        assert_eq!(b.edges, vec![(0, 0), (0, 1)]);
    }

    #[test]
    fn toy_min_edges_adds_one_edge() {
        let (x, m) = toy();
        let cfg = RepairConfig {
            objective: RepairObjective::MinEdges,
            ..Default::default()
        };
        let r = conv_ipf(&x, &m, &cfg).unwrap();
        assert_eq!(r.rounds, 1);
        assert_eq!(r.total_edges_added, 1);
        assert_eq!(r.round_log[0].additions.edges, vec![(0, 2)]);
    }

    #[test]
    fn toy_min_lambda1() {
        let (x, m) = toy();
        let r = conv_ipf(&x, &m, &RepairConfig::default()).unwrap();
        assert_eq!(r.rounds, 1);
        assert_eq!(r.round_log[0].additions.edges, vec![(0, 2)]);
        assert!((r.round_log[0].additions.weight - 0.01).abs() < 1e-15);
        assert!((r.exact_dlambda1 - 0.000672).abs() < 5e-6, "{}", r.exact_dlambda1);
        let est = r.round_log[0].additions.estimated_dlambda1.unwrap();
        assert!((est - r.exact_dlambda1).abs() < 1e-5);
        assert!(check_feasibility(&r.network, &m).unwrap().feasible);
    }

    #[test]
    fn toy_forced_rows_and_fill() {
        let (x, m) = toy();
        let flow = check_feasibility(&x, &m).unwrap();
        let diag = find_blocking_set(&x, &m, &flow).unwrap();
        let spec = perron_spectral(&x).unwrap();
        let mut d = Vec::new();
        for row in 0..3 {
            let a = perron_addition_at_row(&x, &m, &diag, &spec, 0.01, 1_000_000, row).unwrap();
            assert_eq!(a.edges, vec![(row, 2)]);
            d.push(exact_dlambda1(&x, &x.with_added(&a.edges, 0.01).unwrap()).unwrap());
        }
        assert!((d[1] - 0.001936).abs() < 5e-6);
        assert!((d[2] - 0.001263).abs() < 5e-6);
        let filled = fill_all_zeros(&x, 0.01).unwrap();
        assert_eq!(filled.nnz() - x.nnz(), 6);
        let df = exact_dlambda1(&x, &filled).unwrap();
        assert!((df - 0.010381).abs() < 5e-6);
        assert!(d[0] <= d[2] && d[2] <= d[1] && d[1] <= df);
    }

    #[test]
    fn feasible_input_untouched() {
        let x = SparseNetwork::from_dense(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let m = crate::network::marginals(&x);
        let r = conv_ipf(&x, &m, &RepairConfig::default()).unwrap();
        assert_eq!(r.rounds, 0);
        assert_eq!(r.network, x);
        assert_eq!(r.exact_dlambda1, 0.0);
    }

    #[test]
    fn fill_dense_is_identity() {
        let x = SparseNetwork::from_dense(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(fill_all_zeros(&x, 0.5).unwrap(), x);
    }
}
