//! Reproducible random DAGs for property tests.
//!
//! Nodes are placed in a uniformly random permutation and every forward pair
//! (earlier, later) receives an edge independently with probability
//! [`EDGE_PROBABILITY`].

use rand::seq::SliceRandom;
use rand::Rng;

use super::{CausalGraph, Dag, Edge, Node, NodeId, NodeRole};

pub const EDGE_PROBABILITY: f64 = 0.3;

/// Edge list of a random DAG on `n` nodes.
pub fn random_edges<R: Rng + ?Sized>(
    n: usize,
    edge_probability: f64,
    rng: &mut R,
) -> Vec<(usize, usize)> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random_bool(edge_probability) {
                edges.push((order[i], order[j]));
            }
        }
    }
    edges
}

pub fn random_dag<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Dag {
    Dag::new(n, &random_edges(n, EDGE_PROBABILITY, rng)).expect("forward edges are acyclic")
}

/// Random causal graph respecting every role invariant.
///
/// The exposure sits in the first half of the permutation; its parents become
/// confounders. Every other node is a latent cause with probability 0.2 and
/// otherwise a feature, observed with probability 0.8. Edge weights are drawn
/// from ±[0.3, 1.0] and noise variances from [0.5, 1.5].
pub fn random_causal_graph<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CausalGraph {
    assert!(n >= 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let exposure_pos = rng.random_range(0..n.div_ceil(2));
    let exposure = order[exposure_pos];

    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random_bool(EDGE_PROBABILITY) {
                let magnitude = rng.random_range(0.3..1.0);
                let weight = if rng.random_bool(0.5) {
                    magnitude
                } else {
                    -magnitude
                };
                edges.push(Edge {
                    from: NodeId(order[i]),
                    to: NodeId(order[j]),
                    weight,
                });
            }
        }
    }

    let nodes = (0..n)
        .map(|i| {
            let (role, observed) = if i == exposure {
                (NodeRole::Exposure, true)
            } else if edges.iter().any(|e| e.from.0 == i && e.to.0 == exposure) {
                (NodeRole::Confounder, true)
            } else if rng.random_bool(0.2) {
                (NodeRole::LatentCause, false)
            } else {
                (NodeRole::Feature, rng.random_bool(0.8))
            };
            Node {
                id: NodeId(i),
                label: format!("X{i}"),
                role,
                observed,
                noise_variance: rng.random_range(0.5..1.5),
            }
        })
        .collect();
    CausalGraph::new(nodes, edges).expect("generator respects graph invariants")
}
