mod common;

use common::small_hypergraph;
use efl_core::extremal::{
    common_neighbours, extremal_color, maximal_complement_matching, pair_color, size_threshold, useful_pair, v_bad,
    PairingPlan,
};
use efl_core::hypercore::{verify_coloring, LinearHypergraph};
use proptest::prelude::*;

/// `|N(e) ∩ N(f)|` from vertex incidences, without neighbour lists.
fn shared_neighbours(h: &LinearHypergraph, e: usize, f: usize) -> usize {
    (0..h.m())
        .filter(|&g| g != e && g != f)
        .filter(|&g| {
            let meets = |x: usize| h.edge(g).iter().any(|v| h.edge(x).contains(v));
            meets(e) && meets(f)
        })
        .count()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn useful_pairs_match_counting(h in small_hypergraph(10, 14)) {
        for e in 0..h.m() {
            for f in 0..h.m() {
                let meet = e != f && h.edge(e).iter().any(|v| h.edge(f).contains(v));
                if meet {
                    prop_assert_eq!(common_neighbours(&h, e, f), shared_neighbours(&h, e, f));
                }
                prop_assert_eq!(useful_pair(&h, e, f), meet && shared_neighbours(&h, e, f) + 2 <= h.n());
            }
        }
    }

    #[test]
    fn pair_color_shape(h in small_hypergraph(10, 14)) {
        let pairs = maximal_complement_matching(&h);
        let plan = PairingPlan::from_pairs(h.m(), pairs.clone());
        let col = pair_color(&h, &plan).unwrap();
        prop_assert!(verify_coloring(&h, &col).is_ok());
        prop_assert!(col.classes().values().all(|c| c.len() <= 2));
        prop_assert_eq!(col.num_colors_used(), h.m() - pairs.len());
        // e(H) − n disjoint pairs give at most n colors.
        if h.m() >= h.n() && pairs.len() >= h.m() - h.n() {
            let plan = PairingPlan::from_pairs(h.m(), pairs[..h.m() - h.n()].to_vec());
            let col = pair_color(&h, &plan).unwrap();
            prop_assert!(col.num_colors_used() <= h.n());
        }
    }

    #[test]
    fn extremal_color_within_n(h in small_hypergraph(12, 16), delta in 0.05f64..0.5) {
        if let Ok(col) = extremal_color(&h, delta) {
            prop_assert!(verify_coloring(&h, &col).is_ok());
            prop_assert!(col.num_colors_used() <= h.n());
        }
    }

    #[test]
    fn v_bad_matches_definition(h in small_hypergraph(12, 16), delta in 0.02f64..0.5) {
        let k = size_threshold(h.n());
        let want: Vec<usize> = (0..h.n())
            .filter(|&x| {
                let a = h.edges().iter().filter(|e| e.contains(&x) && e.len() < k).count();
                4.0 * delta * a as f64 >= 1.0 - 1e-9
            })
            .collect();
        prop_assert_eq!(v_bad(&h, delta), want);
    }
}
