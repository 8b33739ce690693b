//! Erasure-aware minimum-weight perfect matching on the Z-check graph.
//!
//! Each shot zeroes the weights of edges whose faults were heralded, pairs
//! up defects inside zero-weight clusters directly, and matches the rest by
//! shortest paths. Dijkstra searches from each remaining defect stop once a
//! path can no longer beat sending both ends to the boundary, which splits
//! the instance into small components solved exactly by the blossom
//! algorithm.

pub mod blossom;
mod decode;
mod graph;

pub use decode::{decode_shot, Correction, Matcher};
pub use graph::{weight_of, xor_prob, DecodingGraph, Edge, FaultClass};
