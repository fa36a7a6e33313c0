use serde::{Deserialize, Serialize};

/// Undirected cell-adjacency graph over cells `0..num_cells`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphFile", into = "GraphFile")]
pub struct AdjacencyGraph {
    num_cells: usize,
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct GraphFile {
    num_cells: usize,
    edges: Vec<[usize; 2]>,
}

impl TryFrom<GraphFile> for AdjacencyGraph {
    type Error = String;

    fn try_from(f: GraphFile) -> Result<Self, String> {
        AdjacencyGraph::new(f.num_cells, f.edges.iter().map(|e| (e[0], e[1])))
    }
}

impl From<AdjacencyGraph> for GraphFile {
    fn from(g: AdjacencyGraph) -> Self {
        GraphFile { num_cells: g.num_cells, edges: g.edges.iter().map(|&(a, b)| [a, b]).collect() }
    }
}

impl AdjacencyGraph {
    /// Edges are normalised to `(min, max)`, sorted and deduplicated.
    pub fn new(num_cells: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self, String> {
        let mut list = Vec::new();
        for (a, b) in edges {
            if a == b {
                return Err(format!("self-loop on cell {a}"));
            }
            if a >= num_cells || b >= num_cells {
                return Err(format!("edge ({a}, {b}) references a cell outside 0..{num_cells}"));
            }
            list.push((a.min(b), a.max(b)));
        }
        list.sort_unstable();
        list.dedup();
        let mut neighbors = vec![Vec::new(); num_cells];
        for &(a, b) in &list {
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        for n in &mut neighbors {
            n.sort_unstable();
        }
        Ok(Self { num_cells, edges: list, neighbors })
    }

    pub fn complete(num_cells: usize) -> Self {
        let edges = (0..num_cells).flat_map(|a| (a + 1..num_cells).map(move |b| (a, b)));
        Self::new(num_cells, edges).expect("complete graph is valid")
    }

    pub fn num_cells(&self) -> usize {
        self.num_cells
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Sorted neighbour list of `m`.
    pub fn neighbors(&self, m: usize) -> &[usize] {
        &self.neighbors[m]
    }

    pub fn contains_edge(&self, a: usize, b: usize) -> bool {
        self.edges.binary_search(&(a.min(b), a.max(b))).is_ok()
    }

    pub fn max_degree(&self) -> usize {
        self.neighbors.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn is_connected(&self) -> bool {
        if self.num_cells == 0 {
            return true;
        }
        let mut seen = vec![false; self.num_cells];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &w in &self.neighbors[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}
