#![allow(dead_code)]

use efl_core::generators::{random_linear, SizeLaw};
use efl_core::hypercore::LinearHypergraph;
use proptest::prelude::*;

/// Keeps candidate edges that preserve linearity, in order.
pub fn linear_from_candidates(n: usize, cands: Vec<Vec<usize>>) -> LinearHypergraph {
    let mut edges: Vec<Vec<usize>> = Vec::new();
    for mut e in cands {
        e.sort_unstable();
        e.dedup();
        if e.len() < 2 {
            continue;
        }
        let ok = edges.iter().all(|f| f != &e && f.iter().filter(|x| e.contains(x)).count() <= 1);
        if ok {
            edges.push(e);
        }
    }
    LinearHypergraph::build(n, edges, false).unwrap()
}

/// Linear hypergraphs with mixed edge sizes, including a few big edges.
pub fn mixed_hypergraph(min_n: usize, max_n: usize) -> impl Strategy<Value = LinearHypergraph> {
    (min_n..=max_n, any::<u64>(), 1usize..=3).prop_map(|(n, seed, dens)| {
        let big = (n / 3).max(3);
        let law = SizeLaw::parse(&format!("2:4,3:3,4:1,{big}:0.05")).unwrap();
        let mut m = dens * n;
        loop {
            if let Ok(h) = random_linear(n, &law, m, seed) {
                return h;
            }
            m = m * 2 / 3;
        }
    })
}

pub fn small_hypergraph(max_n: usize, max_m: usize) -> impl Strategy<Value = LinearHypergraph> {
    (3..=max_n).prop_flat_map(move |n| {
        prop::collection::vec(prop::collection::vec(0..n, 2..=n.min(5)), 0..=max_m)
            .prop_map(move |c| linear_from_candidates(n, c))
    })
}
