use aste_core::pairmatch::{build_pair_graph, edge_weight, match_pairs, match_weights, Cardinality, MatchPolicy};
use aste_core::spanex::{CandidateSpan, Interval};
use aste_core::{MatchPolicyF32, MatchPolicyF64, PairGraphF32};
use num_rational::Ratio;
use proptest::prelude::*;
use std::collections::HashMap;

/// Optimal one-to-one total, memoized over (row, used columns).
fn optimum(w: &[Vec<i64>], tau: i64, row: usize, used: u32, memo: &mut HashMap<(usize, u32), i64>) -> i64 {
    if row == w.len() {
        return 0;
    }
    if let Some(&v) = memo.get(&(row, used)) {
        return v;
    }
    let mut best = optimum(w, tau, row + 1, used, memo);
    for (j, &x) in w[row].iter().enumerate() {
        if used & (1 << j) == 0 && x >= tau {
            best = best.max(x + optimum(w, tau, row + 1, used | (1 << j), memo));
        }
    }
    memo.insert((row, used), best);
    best
}

fn is_matching(pairs: &[(usize, usize)]) -> bool {
    let mut rows: Vec<_> = pairs.iter().map(|p| p.0).collect();
    let mut cols: Vec<_> = pairs.iter().map(|p| p.1).collect();
    rows.sort_unstable();
    cols.sort_unstable();
    rows.windows(2).all(|w| w[0] != w[1]) && cols.windows(2).all(|w| w[0] != w[1])
}

fn int_matrix(rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> impl Strategy<Value = Vec<Vec<i64>>> {
    (rows, cols).prop_flat_map(|(r, c)| prop::collection::vec(prop::collection::vec(0i64..100, c), r))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn large_graphs_use_an_exact_solver(w in int_matrix(13..16, 13..16), tau in 0i64..60) {
        let pairs = match_weights(&w, tau, Cardinality::OneToOne);
        prop_assert!(is_matching(&pairs));
        prop_assert!(pairs.iter().all(|&(a, o)| w[a][o] >= tau));
        let total: i64 = pairs.iter().map(|&(a, o)| w[a][o]).sum();
        prop_assert_eq!(total, optimum(&w, tau, 0, 0, &mut HashMap::new()));
    }

    #[test]
    fn wide_graphs_transpose(w in int_matrix(2..5, 13..20), tau in 0i64..60) {
        let pairs = match_weights(&w, tau, Cardinality::OneToOne);
        prop_assert!(is_matching(&pairs));
        let t: Vec<Vec<i64>> = (0..w[0].len()).map(|o| w.iter().map(|r| r[o]).collect()).collect();
        let total: i64 = pairs.iter().map(|&(a, o)| w[a][o]).sum();
        prop_assert_eq!(total, optimum(&t, tau, 0, 0, &mut HashMap::new()));
    }

}

proptest! {
    #[test]
    fn exact_rational_weights_reach_the_optimum(w in int_matrix(1..6, 1..6), tau in 0i64..100) {
        let rational: Vec<Vec<Ratio<i64>>> =
            w.iter().map(|r| r.iter().map(|&x| Ratio::new(x, 100)).collect()).collect();
        let pairs = match_weights(&rational, Ratio::new(tau, 100), Cardinality::OneToOne);
        prop_assert!(is_matching(&pairs));
        let total: i64 = pairs.iter().map(|&(a, o)| w[a][o]).sum();
        prop_assert_eq!(total, optimum(&w, tau, 0, 0, &mut HashMap::new()));
    }

    #[test]
    fn positive_scaling_keeps_the_matching(w in int_matrix(1..6, 1..6), tau in 0i64..100, k in 1i64..50) {
        let scaled: Vec<Vec<i64>> = w.iter().map(|r| r.iter().map(|&x| x * k).collect()).collect();
        prop_assert_eq!(
            match_weights(&w, tau, Cardinality::OneToOne),
            match_weights(&scaled, tau * k, Cardinality::OneToOne)
        );
    }

    #[test]
    fn one_to_many_attaches_each_opinion_at_most_once(w in int_matrix(1..6, 1..8), tau in 0i64..100) {
        let pairs = match_weights(&w, tau, Cardinality::OneToMany);
        let mut cols: Vec<_> = pairs.iter().map(|p| p.1).collect();
        cols.dedup();
        prop_assert_eq!(cols.len(), pairs.len());
        for &(a, o) in &pairs {
            prop_assert!(w[a][o] >= tau);
            prop_assert!(w.iter().all(|r| r[o] <= w[a][o]));
        }
    }

    #[test]
    fn edge_weight_stays_in_unit_interval(cos in -1.0f64..=1.0, gap in 0usize..100) {
        let x = edge_weight(cos, gap, &MatchPolicyF64::default());
        prop_assert!((0.0..=1.0).contains(&x));
        prop_assert!(edge_weight(cos, gap + 1, &MatchPolicyF64::default()) <= x);
    }
}

fn span(first: usize, last: usize) -> CandidateSpan {
    CandidateSpan {
        span: Interval::new(first, last),
        aspect_score: 0.9,
        opinion_score: 0.9,
    }
}

#[test]
fn f32_and_f64_graphs_agree() {
    let aspects = [span(0, 0), span(5, 6)];
    let opinions = [span(2, 2), span(8, 8)];
    let av = vec![vec![1.0, 0.0, 0.2], vec![0.0, 1.0, 0.1]];
    let ov = vec![vec![0.9, 0.1, 0.0], vec![0.1, 0.8, 0.3]];
    let g64 = build_pair_graph(&aspects, &opinions, &av, &ov, &MatchPolicyF64::default()).unwrap();
    let to32 = |m: &Vec<Vec<f64>>| -> Vec<Vec<f32>> { m.iter().map(|r| r.iter().map(|&x| x as f32).collect()).collect() };
    let g32: PairGraphF32 = build_pair_graph(&aspects, &opinions, &to32(&av), &to32(&ov), &MatchPolicyF32::default()).unwrap();
    for a in 0..2 {
        for o in 0..2 {
            assert!((g64.weight(a, o) - f64::from(g32.weight(a, o))).abs() < 1e-6);
        }
    }
    assert_eq!(match_pairs(&g64, &MatchPolicyF64::default()), vec![(0, 0), (1, 1)]);
    assert_eq!(match_pairs(&g32, &MatchPolicyF32::default()), vec![(0, 0), (1, 1)]);
}

#[test]
fn zero_vector_contributes_zero_cosine() {
    let policy = MatchPolicy::<f64>::default();
    let g = build_pair_graph(&[span(0, 0)], &[span(2, 2)], &[vec![0.0, 0.0]], &[vec![1.0, 0.0]], &policy).unwrap();
    let expected = 0.7 * 0.5 + 0.3 * (-1.0f64 / 5.0).exp();
    assert!((g.weight(0, 0) - expected).abs() < 1e-12);
}

#[test]
fn mismatched_dimensions_are_rejected() {
    let policy = MatchPolicy::<f64>::default();
    assert!(build_pair_graph(&[span(0, 0)], &[span(1, 1)], &[vec![1.0]], &[vec![1.0, 0.0]], &policy).is_err());
    assert!(build_pair_graph(&[span(0, 0)], &[span(1, 1)], &[], &[vec![1.0]], &policy).is_err());
}

#[test]
fn ties_prefer_lower_indices() {
    let w = vec![vec![5, 5], vec![5, 5]];
    assert_eq!(match_weights(&w, 1, Cardinality::OneToOne), vec![(0, 0), (1, 1)]);
    let w = vec![vec![5, 5]];
    assert_eq!(match_weights(&w, 1, Cardinality::OneToOne), vec![(0, 0)]);
}
