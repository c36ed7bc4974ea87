mod common;

use common::*;
use ipfnet::knapsack::knapsack_min_cover;
use ipfnet::repair::{
    conv_ipf, exact_dlambda1, fill_all_zeros, perron_addition, perron_addition_at_row,
    repair_edge_weight, unblock_min_edges, RepairConfig, RepairObjective, RowTiebreak,
};
use ipfnet::stats::perron_spectral;
use ipfnet::{check_feasibility, find_blocking_set, run_ipf, verify_blocking, IpfConfig, IpfStatus, MarginalPair, SparseNetwork};
use proptest::prelude::*;
use rand::Rng;

/// Smallest `q(N(S)) - p(S)` over proper subsets `S` of the rows with positive
/// marginal, relative to the total. Near zero, IPF converges arbitrarily slowly.
fn hall_slack(x: &SparseNetwork, marg: &MarginalPair) -> f64 {
    let rows: Vec<usize> = (0..x.rows()).filter(|&i| marg.p()[i] > 0.0).collect();
    let mut best = f64::INFINITY;
    for mask in 1u32..(1 << rows.len()) - 1 {
        let mut cols = vec![false; x.cols()];
        let mut ps = 0.0;
        for (k, &i) in rows.iter().enumerate() {
            if mask >> k & 1 == 1 {
                ps += marg.p()[i];
                x.row(i).for_each(|(j, _)| cols[j] = true);
            }
        }
        let qs: f64 = (0..x.cols()).filter(|&j| cols[j]).map(|j| marg.q()[j]).sum();
        best = best.min(qs - ps);
    }
    best / marg.total()
}

fn objective() -> impl Strategy<Value = RepairObjective> {
    prop_oneof![Just(RepairObjective::MinEdges), Just(RepairObjective::MinLambda1)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn repaired_networks_are_feasible_and_converge(
        seed in any::<u64>(), m in 2usize..=10, n in 2usize..=10, density in 0.1f64..0.5, obj in objective(),
    ) {
        let mut r = rng(seed);
        let x = random_network(&mut r, m, n, density);
        let marg = random_marginals(&mut r, m, n);
        let cfg = RepairConfig { objective: obj, ..Default::default() };
        let report = conv_ipf(&x, &marg, &cfg).unwrap();
        prop_assert!(check_feasibility(&report.network, &marg).unwrap().feasible);
        prop_assert!(report.rounds <= m * n);
        prop_assert!(report.total_edges_added <= m * n - x.nnz());
        let res = run_ipf(&report.network, &marg, &IpfConfig { max_iterations: 100_000, ..Default::default() }).unwrap();
        if hall_slack(&report.network, &marg) > 1e-3 {
            prop_assert_eq!(res.status, IpfStatus::Converged);
        } else {
            // Feasible, so convergent in the limit, but possibly slower than any cap.
            prop_assert_ne!(res.status, IpfStatus::Oscillating);
        }
        for round in &report.round_log {
            let cols: Vec<usize> = round.additions.edges.iter().map(|e| e.1).collect();
            let mut unique = cols.clone();
            unique.dedup();
            prop_assert_eq!(unique.len(), cols.len());
            let q_added: f64 = cols.iter().map(|&j| marg.q()[j]).sum();
            prop_assert!(q_added >= round.blocking.delta - 1e-12 * marg.total());
            for &(i, j) in &round.additions.edges {
                prop_assert!(round.blocking.rows.contains(&i));
                prop_assert!(!round.blocking.neighbor_cols.contains(&j));
            }
        }
    }

    #[test]
    fn unblocked_sets_stay_unblocked(seed in any::<u64>(), m in 2usize..=10, n in 2usize..=10, density in 0.1f64..0.4) {
        let mut r = rng(seed);
        let x = random_network(&mut r, m, n, density);
        let marg = random_marginals(&mut r, m, n);
        let report = conv_ipf(&x, &marg, &RepairConfig::default()).unwrap();
        let w = repair_edge_weight(&x, 0.01);
        let mut states = vec![x.clone()];
        for round in &report.round_log {
            let next = states.last().unwrap().with_added(&round.additions.edges, w).unwrap();
            states.push(next);
        }
        for (k, round) in report.round_log.iter().enumerate() {
            for later in &states[k + 1..] {
                prop_assert!(!verify_blocking(later, &marg, &round.blocking.rows).unwrap());
            }
        }
    }

    #[test]
    fn min_edges_uses_fewest_columns(seed in any::<u64>(), m in 2usize..=8, n in 2usize..=15, density in 0.05f64..0.4) {
        let mut r = rng(seed);
        let x = random_network(&mut r, m, n, density);
        let marg = random_marginals(&mut r, m, n);
        let flow = check_feasibility(&x, &marg).unwrap();
        if flow.feasible { return Ok(()); }
        let diag = find_blocking_set(&x, &marg, &flow).unwrap();
        let add = unblock_min_edges(&x, &marg, &diag, RowTiebreak::LargestP, 0.01).unwrap();
        let free: Vec<usize> = (0..n).filter(|j| !diag.neighbor_cols.contains(j)).collect();
        // Unit values turn the cover into a minimum-cardinality search.
        let q: Vec<f64> = free.iter().map(|&j| marg.q()[j]).collect();
        let best = brute_force_cover(&vec![1.0; q.len()], &q, diag.delta - 1e-12 * marg.total()).unwrap();
        prop_assert_eq!(add.edges.len() as f64, best);
    }

    #[test]
    fn knapsack_matches_enumeration(
        items in prop::collection::vec((0.0f64..5.0, 0.0f64..5.0), 0..=15), frac in 0.0f64..=1.0,
    ) {
        let values: Vec<f64> = items.iter().map(|t| t.0).collect();
        let weights: Vec<f64> = items.iter().map(|t| t.1).collect();
        let threshold = frac * weights.iter().sum::<f64>();
        let picked = knapsack_min_cover(&values, &weights, threshold, 1_000_000).unwrap();
        let w: f64 = picked.iter().map(|&k| weights[k]).sum();
        let cost: f64 = picked.iter().map(|&k| values[k]).sum();
        prop_assert!(w >= threshold - 1e-12 * threshold.max(1.0));
        let best = brute_force_cover(&values, &weights, threshold).unwrap();
        prop_assert!(cost <= best + 1e-9, "cost {} vs optimum {}", cost, best);
    }

    #[test]
    fn adding_an_edge_raises_lambda1(seed in any::<u64>(), m in 1usize..=10, n in 1usize..=10, density in 0.0f64..0.5) {
        let mut r = rng(seed);
        let x = connected_network(&mut r, m, n, density);
        let zeros: Vec<(usize, usize)> = (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|&(i, j)| !x.contains(i, j)).collect();
        if zeros.is_empty() { return Ok(()); }
        let e = zeros[r.random_range(0..zeros.len())];
        let after = x.with_added(&[e], repair_edge_weight(&x, 0.01)).unwrap();
        prop_assert!(exact_dlambda1(&x, &after).unwrap() > 0.0);
    }
}

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

#[test]
fn toy_objective_dominance() {
    let (x, marg) = toy();
    let flow = check_feasibility(&x, &marg).unwrap();
    let diag = find_blocking_set(&x, &marg, &flow).unwrap();
    let spec = perron_spectral(&x).unwrap();
    let w = repair_edge_weight(&x, 0.01);
    let delta_for = |add: &ipfnet::repair::EdgeAdditionSet| {
        exact_dlambda1(&x, &x.with_added(&add.edges, w).unwrap()).unwrap()
    };
    let best = delta_for(&perron_addition(&x, &marg, &diag, &spec, w, 1_000_000).unwrap());
    let forced: Vec<f64> = [1, 2]
        .iter()
        .map(|&row| delta_for(&perron_addition_at_row(&x, &marg, &diag, &spec, w, 1_000_000, row).unwrap()))
        .collect();
    let fill = exact_dlambda1(&x, &fill_all_zeros(&x, 0.01).unwrap()).unwrap();
    for f in &forced {
        assert!(best <= *f && *f <= fill, "{best} {f} {fill}");
    }
    assert!(forced[1] <= forced[0]);
}

#[test]
fn feasible_input_is_left_alone() {
    let x = SparseNetwork::from_dense(&[vec![1.0, 2.0], vec![0.0, 3.0]]).unwrap();
    let marg = ipfnet::marginals(&x);
    let report = conv_ipf(&x, &marg, &RepairConfig::default()).unwrap();
    assert_eq!(report.rounds, 0);
    assert_eq!(report.network, x);
    assert_eq!(report.exact_dlambda1, 0.0);
}
