use num_traits::ToPrimitive;
use proptest::prelude::*;

use procmap_core::decompose::{
    amgm_lower_bound, amgm_lower_bound_exact, count_factorizations, enumerate_factorizations, greedy_grid, score,
    search_optimal, Factorization, Objective,
};

/// Ordered k-tuples with product d, by nested trial division.
fn naive_factorizations(d: u64, k: usize) -> Vec<Vec<u64>> {
    if k == 1 {
        return vec![vec![d]];
    }
    let mut out = Vec::new();
    for first in 1..=d {
        if d % first == 0 {
            for mut rest in naive_factorizations(d / first, k - 1) {
                rest.insert(0, first);
                out.push(rest);
            }
        }
    }
    out
}

#[test]
fn sixteen_over_three_dimensions() {
    assert_eq!(count_factorizations(16, 3), 15);
    assert_eq!(enumerate_factorizations(16, 3).len(), 15);
}

proptest! {
    #[test]
    fn count_matches_enumeration_and_naive(d in 1u64..=5000, k in 1usize..=4) {
        let listed: Vec<Vec<u64>> = enumerate_factorizations(d, k).into_iter().map(|f| f.0).collect();
        let mut naive = naive_factorizations(d, k);
        naive.sort();
        let mut sorted = listed.clone();
        sorted.sort();
        prop_assert_eq!(count_factorizations(d, k), listed.len() as u128);
        prop_assert_eq!(sorted, naive);
    }

    #[test]
    fn search_is_the_lexicographic_minimum(d in 1u64..=720, extents in prop::collection::vec(1u64..=256, 1..=3)) {
        let best = search_optimal(d, &extents, &Objective::Isotropic).unwrap();
        let mut all = naive_factorizations(d, extents.len());
        all.sort();
        let scored: Vec<_> = all.into_iter().map(|f| {
            let s = score(&Factorization(f.clone()), &extents, &Objective::Isotropic).unwrap();
            (s, f)
        }).collect();
        let min = scored.iter().map(|(s, _)| s.clone()).min().unwrap();
        let first = scored.iter().find(|(s, _)| *s == min).unwrap();
        prop_assert_eq!(&best.score, &min);
        prop_assert_eq!(&best.factorization.0, &first.1);
    }

    #[test]
    fn optimum_respects_the_amgm_bound(d in 1u64..=1024, extents in prop::collection::vec(1u64..=256, 1..=3)) {
        let best = search_optimal(d, &extents, &Objective::Isotropic).unwrap();
        let bound = amgm_lower_bound(d, &extents);
        prop_assert!(best.score.to_f64().unwrap() >= bound - 1e-12);
        let balanced = enumerate_factorizations(d, extents.len())
            .into_iter()
            .any(|f| f.workload(&extents).unwrap().is_balanced());
        if balanced {
            prop_assert_eq!(Some(best.score), amgm_lower_bound_exact(d, &extents));
        }
    }

    #[test]
    fn greedy_is_a_sorted_factorization(d in 1u64..=100_000, k in 1usize..=4) {
        let g = greedy_grid(d, k);
        prop_assert_eq!(g.k(), k);
        prop_assert_eq!(g.product(), d);
        prop_assert!(g.0.windows(2).all(|w| w[0] >= w[1]));
    }
}
