//! Edge-coloring toolkit for linear hypergraphs: instance generation,
//! ordering and greedy colorers, the projective-plane pairing colorer,
//! matching engines, reservoir absorption, nibble matchings, graph finishing,
//! an exact chromatic-index oracle and the end-to-end coloring pipeline.

#![forbid(unsafe_code)]

pub mod absorb;
pub mod extremal;
pub mod finish;
pub mod generators;
pub mod greedy;
pub mod hypercore;
pub mod matching;
pub mod nibble;
pub mod ordering;
pub mod pipeline;
pub mod rng;

pub use hypercore::{EdgeColoring, Hierarchy, LinearHypergraph};
