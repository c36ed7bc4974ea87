mod common;

use common::*;
use ipfnet::feasibility::neighbor_columns;
use ipfnet::{check_feasibility, find_blocking_set, verify_blocking, MarginalPair, SparseNetwork};
use proptest::prelude::*;
use rand::Rng;

fn conservation_holds(x: &SparseNetwork, marg: &MarginalPair, flow: &ipfnet::FlowDiagnostics) -> bool {
    let tol = 1e-9 * marg.total().max(1.0);
    let mut rows = vec![0.0; x.rows()];
    let mut cols = vec![0.0; x.cols()];
    for ((i, j, _), f) in x.entries().zip(&flow.edge_flows) {
        if *f < -tol {
            return false;
        }
        rows[i] += f;
        cols[j] += f;
    }
    let rows_ok = (0..x.rows()).all(|i| {
        (rows[i] - flow.row_flow[i]).abs() <= tol
            && flow.row_flow[i] >= -tol
            && flow.row_flow[i] <= marg.p()[i] + tol
    });
    let cols_ok = (0..x.cols()).all(|j| {
        (cols[j] - flow.col_flow[j]).abs() <= tol
            && flow.col_flow[j] >= -tol
            && flow.col_flow[j] <= marg.q()[j] + tol
    });
    rows_ok && cols_ok && flow.max_flow_value <= marg.total() + tol
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn flow_matches_hall_enumeration(seed in any::<u64>(), m in 1usize..=12, n in 1usize..=8, density in 0.1f64..0.8) {
        let mut r = rng(seed);
        let x = random_network(&mut r, m, n, density);
        let marg = random_marginals(&mut r, m, n);
        let flow = check_feasibility(&x, &marg).unwrap();
        prop_assert_eq!(flow.feasible, !exhaustive_blocked(&x, &marg));
    }

    #[test]
    fn flow_is_conserved(seed in any::<u64>(), m in 1usize..=10, n in 1usize..=10, density in 0.1f64..0.9) {
        let mut r = rng(seed);
        let x = random_network(&mut r, m, n, density);
        let marg = if r.random::<bool>() { random_marginals(&mut r, m, n) } else { feasible_marginals(&mut r, &x) };
        if marg.total() == 0.0 { return Ok(()); }
        let flow = check_feasibility(&x, &marg).unwrap();
        prop_assert!(conservation_holds(&x, &marg, &flow));
        // The certificate reproduces the marginals when feasible.
        if flow.feasible {
            let y = flow.flow_matrix(&x);
            let err: f64 = y.row_sums().iter().zip(marg.p()).map(|(a, b)| (a - b).abs()).sum::<f64>()
                + y.col_sums().iter().zip(marg.q()).map(|(a, b)| (a - b).abs()).sum::<f64>();
            prop_assert!(err <= 1e-8 * marg.total());
        }
    }

    #[test]
    fn blocking_sets_verify(seed in any::<u64>(), m in 1usize..=10, n in 1usize..=10, density in 0.1f64..0.6) {
        let mut r = rng(seed);
        let x = random_network(&mut r, m, n, density);
        let marg = random_marginals(&mut r, m, n);
        let flow = check_feasibility(&x, &marg).unwrap();
        if flow.feasible { return Ok(()); }
        let diag = find_blocking_set(&x, &marg, &flow).unwrap();
        prop_assert!(verify_blocking(&x, &marg, &diag.rows).unwrap());
        prop_assert!(diag.delta > 0.0);
        prop_assert_eq!(&diag.neighbor_cols, &neighbor_columns(&x, &diag.rows));
        let ps: f64 = diag.rows.iter().map(|&i| marg.p()[i]).sum();
        let qs: f64 = diag.neighbor_cols.iter().map(|&j| marg.q()[j]).sum();
        prop_assert!((diag.p_sum - ps).abs() < 1e-12 * marg.total());
        prop_assert!((diag.q_sum - qs).abs() < 1e-12 * marg.total());
    }

    #[test]
    fn self_marginals_are_feasible(seed in any::<u64>(), m in 1usize..=10, n in 1usize..=10, density in 0.1f64..0.9) {
        let mut r = rng(seed);
        let x = random_network(&mut r, m, n, density);
        if x.nnz() == 0 { return Ok(()); }
        let marg = ipfnet::marginals(&x);
        let flow = check_feasibility(&x, &marg).unwrap();
        prop_assert!(flow.feasible);
        prop_assert!((flow.max_flow_value - marg.total()).abs() <= 1e-9 * marg.total());
    }
}

#[test]
fn isolated_row_is_its_own_blocking_set() {
    let x = SparseNetwork::from_dense(&[vec![1.0, 1.0], vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap();
    let marg = MarginalPair::new(vec![1.0, 2.0, 1.0], vec![2.0, 2.0]).unwrap();
    let flow = check_feasibility(&x, &marg).unwrap();
    assert!(!flow.feasible);
    let diag = find_blocking_set(&x, &marg, &flow).unwrap();
    assert_eq!(diag.rows, vec![1]);
    assert!(diag.neighbor_cols.is_empty());
    assert_eq!(diag.delta, 2.0);
}

#[test]
fn empty_set_never_blocks() {
    let x = SparseNetwork::from_dense(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    let marg = MarginalPair::new(vec![1.0, 1.0], vec![1.0, 1.0]).unwrap();
    assert!(!verify_blocking(&x, &marg, &[]).unwrap());
    assert!(verify_blocking(&x, &marg, &[5]).is_err());
}
