use rand::seq::SliceRandom;

use crate::seeding::{self, Domain};

use super::graph::AdjacencyGraph;

/// Shuffle the edges and add each one whose endpoints are both still free.
/// The result is vertex-disjoint and maximal. Edges keep the graph's
/// `(min, max)` orientation and are returned in selection order.
pub fn random_maximal_matching(graph: &AdjacencyGraph, seed: u64) -> Vec<(usize, usize)> {
    let mut edges = graph.edges().to_vec();
    edges.shuffle(&mut seeding::stream(seed, Domain::Matching, &[]));
    let mut used = vec![false; graph.num_cells()];
    let mut out = Vec::new();
    for (a, b) in edges {
        if !used[a] && !used[b] {
            used[a] = true;
            used[b] = true;
            out.push((a, b));
        }
    }
    out
}

/// True when `matching` is a vertex-disjoint subset of the graph's edges
/// to which no further edge can be added.
pub fn is_maximal_matching(graph: &AdjacencyGraph, matching: &[(usize, usize)]) -> bool {
    let mut used = vec![false; graph.num_cells()];
    for &(a, b) in matching {
        if !graph.contains_edge(a, b) || used[a] || used[b] {
            return false;
        }
        used[a] = true;
        used[b] = true;
    }
    graph.edges().iter().all(|&(a, b)| used[a] || used[b])
}
