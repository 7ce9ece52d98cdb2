mod common;

use common::{mixed_hypergraph, small_hypergraph};
use efl_core::hypercore::{classify, coverage, volume, CoverageStatus, Hierarchy, LinearHypergraph, SizeClass};
use proptest::prelude::*;

fn rank(s: CoverageStatus) -> u8 {
    match s {
        CoverageStatus::Perfect => 0,
        CoverageStatus::NearlyPerfect => 1,
        CoverageStatus::Neither => 2,
    }
}

#[test]
fn complete_graph_breaks_the_bound_for_tiny_alpha() {
    // K_6 with α = 1/3: fifteen edges of size 2 = αn, above 2/α = 6.
    let h = efl_core::generators::complete(6);
    assert!(h.m() as f64 > 2.0 / (1.0 / 3.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn build_accepts_exactly_linear_lists(
        n in 3usize..10,
        raw in prop::collection::vec(prop::collection::btree_set(0usize..10, 2..5), 0..8),
    ) {
        let edges: Vec<Vec<usize>> = raw.into_iter().map(|s| s.into_iter().collect()).collect();
        let in_range = edges.iter().flatten().all(|&v| v < n);
        let linear = (0..edges.len()).all(|i| {
            (i + 1..edges.len()).all(|j| edges[i].iter().filter(|v| edges[j].contains(v)).count() <= 1)
        });
        let built = LinearHypergraph::build(n, edges, false);
        prop_assert_eq!(built.is_ok(), in_range && linear);
    }

    #[test]
    fn volume_at_most_one(h in mixed_hypergraph(6, 60), pick in prop::collection::vec(any::<bool>(), 0..200)) {
        let w: Vec<usize> = (0..h.m()).filter(|&e| pick.get(e).copied().unwrap_or(true)).collect();
        prop_assert!(volume(&h, &w) <= 1.0 + 1e-12);
        let all: Vec<usize> = (0..h.m()).collect();
        prop_assert!(volume(&h, &all) <= 1.0 + 1e-12);
    }

    #[test]
    fn few_huge_edges(h in mixed_hypergraph(6, 80)) {
        let n = h.n() as f64;
        for s in 1..=h.n() {
            let alpha = s as f64 / n;
            if alpha >= 1.0 {
                break;
            }
            // t = ⌈2/α⌉ pairwise almost disjoint edges of size ≥ ⌈αn⌉ would
            // cover more than n vertices; only then is the bound forced.
            let t = (2.0 / alpha).ceil() as usize;
            if t * s < h.n() + t * (t - 1) / 2 + 1 {
                continue;
            }
            let count = h.edges().iter().filter(|e| e.len() >= s).count();
            prop_assert!(count as f64 <= 2.0 / alpha + 1e-9, "alpha {} count {}", alpha, count);
        }
    }

    #[test]
    fn classify_partitions_edges(h in mixed_hypergraph(6, 80), r1 in 2usize..6, extra in 1usize..20) {
        let hier = Hierarchy { r1, r0: r1 + extra, ..Hierarchy::default() };
        let cls = classify(&h, &hier);
        let mut seen = vec![0usize; h.m()];
        for s in [SizeClass::Small, SizeClass::Medium, SizeClass::Large] {
            for e in cls.of_size(s) {
                seen[e] += 1;
            }
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn adding_an_edge_never_worsens_coverage(
        h in small_hypergraph(12, 20),
        u_pick in prop::collection::vec(any::<bool>(), 12),
        s_pick in prop::collection::vec(any::<bool>(), 12),
    ) {
        let n = h.n();
        let mut hit = vec![false; n];
        let mut m = Vec::new();
        for e in 0..h.m() {
            if h.edge(e).iter().all(|&v| !hit[v]) {
                h.edge(e).iter().for_each(|&v| hit[v] = true);
                m.push(h.edge(e).to_vec());
            }
        }
        let u: Vec<usize> = (0..n).filter(|&v| u_pick[v]).collect();
        let s: Vec<usize> = (0..n).filter(|&v| s_pick[v]).collect();
        for k in 0..m.len() {
            let smaller: Vec<Vec<usize>> = m.iter().enumerate().filter(|(i, _)| *i != k).map(|(_, e)| e.clone()).collect();
            let with = coverage(n, std::slice::from_ref(&m), &u, &s).unwrap();
            let without = coverage(n, &[smaller], &u, &s).unwrap();
            prop_assert!(rank(with.status) <= rank(without.status));
        }
    }

    #[test]
    fn lhg_round_trip(h in mixed_hypergraph(4, 50)) {
        let back = LinearHypergraph::from_lhg(&h.to_lhg(), false).unwrap();
        prop_assert_eq!(back.to_lhg(), h.to_lhg());
    }
}
