#![allow(dead_code)]

use ipfnet::{marginals, MarginalPair, SparseNetwork};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random network with each entry present with probability `density`.
pub fn random_network(rng: &mut impl Rng, m: usize, n: usize, density: f64) -> SparseNetwork {
    let mut trip = Vec::new();
    for i in 0..m {
        for j in 0..n {
            if rng.random::<f64>() < density {
                trip.push((i, j, rng.random_range(0.1..2.0)));
            }
        }
    }
    SparseNetwork::from_triplets(m, n, trip).unwrap()
}

/// Random network whose bipartite graph is connected: a zig-zag path
/// through all rows and columns plus random extra entries.
pub fn connected_network(rng: &mut impl Rng, m: usize, n: usize, density: f64) -> SparseNetwork {
    let mut dense = vec![vec![0.0; n]; m];
    for k in 0..m.max(n) {
        let (i, j) = (k.min(m - 1), k.min(n - 1));
        dense[i][j] = rng.random_range(0.1..2.0);
        if k + 1 < n && i == k {
            dense[i][k + 1] = rng.random_range(0.1..2.0);
        }
    }
    for row in dense.iter_mut() {
        for w in row.iter_mut() {
            if *w == 0.0 && rng.random::<f64>() < density {
                *w = rng.random_range(0.1..2.0);
            }
        }
    }
    SparseNetwork::from_dense(&dense).unwrap()
}

/// Marginals of a random reweighting of `x`, hence attainable on its support.
pub fn feasible_marginals(rng: &mut impl Rng, x: &SparseNetwork) -> MarginalPair {
    let vals: Vec<f64> = x.values().iter().map(|_| rng.random_range(0.2..3.0)).collect();
    marginals(&x.with_values(&vals))
}

/// Independent random marginals with matching totals; often infeasible on
/// sparse supports.
pub fn random_marginals(rng: &mut impl Rng, m: usize, n: usize) -> MarginalPair {
    let p: Vec<f64> = (0..m).map(|_| rng.random_range(0.1..3.0)).collect();
    let q: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..3.0)).collect();
    let (sp, sq): (f64, f64) = (p.iter().sum(), q.iter().sum());
    let q = q.iter().map(|v| v * sp / sq).collect();
    MarginalPair::with_tolerance(p, q, 1e-6).unwrap()
}

/// True iff some row subset violates Hall's condition, by enumeration.
pub fn exhaustive_blocked(x: &SparseNetwork, marg: &MarginalPair) -> bool {
    let m = x.rows();
    let tol = 1e-9 * marg.total();
    (1u32..(1 << m)).any(|mask| {
        let rows: Vec<usize> = (0..m).filter(|i| mask >> i & 1 == 1).collect();
        let mut cols = vec![false; x.cols()];
        for &i in &rows {
            for (j, _) in x.row(i) {
                cols[j] = true;
            }
        }
        let ps: f64 = rows.iter().map(|&i| marg.p()[i]).sum();
        let qs: f64 = (0..x.cols()).filter(|&j| cols[j]).map(|j| marg.q()[j]).sum();
        ps > qs + tol
    })
}

/// Minimum-value cover by enumeration; returns the optimal cost.
pub fn brute_force_cover(values: &[f64], weights: &[f64], threshold: f64) -> Option<f64> {
    let k = values.len();
    (0u32..(1 << k))
        .filter_map(|mask| {
            let w: f64 = (0..k).filter(|i| mask >> i & 1 == 1).map(|i| weights[i]).sum();
            (w >= threshold).then(|| (0..k).filter(|i| mask >> i & 1 == 1).map(|i| values[i]).sum())
        })
        .min_by(f64::total_cmp)
}

pub fn rel_frobenius(a: &SparseNetwork, b: &SparseNetwork) -> f64 {
    let mut diff = 0.0;
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            diff += (a.get(i, j) - b.get(i, j)).powi(2);
        }
    }
    diff.sqrt() / b.frobenius_sq().sqrt()
}
