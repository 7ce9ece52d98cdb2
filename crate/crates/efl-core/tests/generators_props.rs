mod common;

use common::small_hypergraph;
use efl_core::generators::{
    embed_uniform, min_embedding_slack, projective_plane, random_linear, uniform_near_regular, GenError, SizeLaw,
};
use efl_core::hypercore::{volume, LinearHypergraph};
use proptest::prelude::*;

#[test]
fn planes_are_regular_with_unit_volume() {
    for q in [2, 3, 5, 7, 11] {
        let h = projective_plane(q).unwrap();
        assert!((0..h.n()).all(|v| h.degree(v) == q + 1));
        let all: Vec<usize> = (0..h.m()).collect();
        assert!((volume(&h, &all) - 1.0).abs() < 1e-12);
    }
}

#[test]
fn most_small_instances_embed() {
    let mut ok = 0;
    for seed in 0..40u64 {
        let h = random_linear(8, &SizeLaw::parse("2:2,3:1").unwrap(), 5, seed).unwrap();
        let r = h.max_edge_size();
        ok += usize::from(embed_uniform(&h, r, h.max_degree() + 1, min_embedding_slack(r)).is_ok());
    }
    assert!(ok >= 30, "{ok}/40 embedded");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_linear_is_valid_and_seeded(n in 5usize..60, m in 1usize..40, seed in any::<u64>()) {
        let law = SizeLaw::parse("2:2,3:2,4:1").unwrap();
        if let Ok(h) = random_linear(n, &law, m, seed) {
            prop_assert!(LinearHypergraph::build(h.n(), h.edges().to_vec(), false).is_ok());
            prop_assert_eq!(random_linear(n, &law, m, seed).unwrap().to_lhg(), h.to_lhg());
        }
    }

    #[test]
    fn near_regular_is_valid_and_seeded(n in 30usize..120, d in 2usize..6, seed in any::<u64>()) {
        if let Ok(h) = uniform_near_regular(n, 3, d, 0.5, seed) {
            prop_assert!(h.edges().iter().all(|e| e.len() == 3));
            prop_assert!(LinearHypergraph::build(h.n(), h.edges().to_vec(), false).is_ok());
            prop_assert_eq!(uniform_near_regular(n, 3, d, 0.5, seed).unwrap().to_lhg(), h.to_lhg());
        }
    }

    #[test]
    fn embedding_properties(h in small_hypergraph(7, 6), extra_d in 0usize..2, extra_c in 0usize..3) {
        let r = h.max_edge_size().max(2);
        let d = h.max_degree().max(1) + extra_d;
        let c = min_embedding_slack(r) + extra_c;
        let emb = match embed_uniform(&h, r, d, c) {
            Ok(emb) => emb,
            Err(GenError::UniformityImpossible(_)) => return Ok(()),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        let u = &emb.h_unif;
        // Uniform and linear.
        prop_assert!(u.edges().iter().all(|e| e.len() == r));
        prop_assert!(LinearHypergraph::build(u.n(), u.edges().to_vec(), false).is_ok());
        // Degrees in [D − C, D].
        for v in 0..u.n() {
            prop_assert!(u.degree(v) <= d && u.degree(v) + c >= d, "vertex {} degree {}", v, u.degree(v));
        }
        // Every edge is the trace of its image; high degrees are kept.
        for e in 0..h.m() {
            let image: Vec<usize> = h.edge(e).iter().map(|&v| emb.injection[v]).collect();
            let f = u.edge(emb.edge_map[e]);
            prop_assert!(image.iter().all(|x| f.contains(x)));
            let back: usize = f.iter().filter(|x| emb.injection.contains(x)).count();
            prop_assert_eq!(back, h.edge(e).len());
        }
        for v in 0..h.n() {
            if h.degree(v) + c >= d {
                prop_assert_eq!(u.degree(emb.injection[v]), h.degree(v));
            }
        }
    }
}
