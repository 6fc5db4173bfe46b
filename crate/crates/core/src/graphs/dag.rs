use crate::error::{Error, Result};
use crate::graphs::Pdag;

/// A directed acyclic graph over nodes `1..=n`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Dag {
    inner: Pdag,
}

impl Dag {
    /// Builds a DAG from 1-indexed `(from, to)` pairs. Fails on cycles,
    /// self-loops and repeated pairs.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        Dag::try_from_pdag(Pdag::from_edges(n, edges, &[])?)
    }

    pub fn empty(n: usize) -> Self {
        Dag {
            inner: Pdag::empty(n),
        }
    }

    pub(crate) fn try_from_pdag(g: Pdag) -> Result<Self> {
        if !g.undirected_edges().is_empty() {
            return Err(Error::InvalidGraph("a DAG cannot contain undirected edges".into()));
        }
        if !g.is_directed_acyclic() {
            return Err(Error::InvalidGraph("graph contains a directed cycle".into()));
        }
        Ok(Dag { inner: g })
    }

    pub fn as_pdag(&self) -> &Pdag {
        &self.inner
    }

    pub fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    pub fn edge_count(&self) -> usize {
        self.inner.edge_count()
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.inner.directed_edges()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.inner.has_directed_edge(i, j)
    }

    pub fn is_adjacent(&self, i: usize, j: usize) -> bool {
        self.inner.is_adjacent(i, j)
    }

    pub fn parents(&self, v: usize) -> Vec<usize> {
        self.inner.parents(v)
    }

    pub fn children(&self, v: usize) -> Vec<usize> {
        (1..=self.node_count()).filter(|&w| self.has_edge(v, w)).collect()
    }

    /// A topological order (1-indexed).
    pub fn topological_order(&self) -> Vec<usize> {
        self.inner
            .directed_topological_order()
            .expect("Dag is acyclic by construction")
            .into_iter()
            .map(|v| v + 1)
            .collect()
    }

    /// Unshielded colliders `(a, c, b)` with `a -> c <- b`, `a < b`, and `a`, `b`
    /// nonadjacent.
    pub fn v_structures(&self) -> Vec<(usize, usize, usize)> {
        v_structures_of(&self.inner)
    }

    /// Subgraph induced on `nodes` (1-indexed, ascending), relabelled `1..=k`
    /// in the given order.
    pub fn induced_subgraph(&self, nodes: &[usize]) -> Dag {
        let mut edges = Vec::new();
        for (a, &u) in nodes.iter().enumerate() {
            for (b, &v) in nodes.iter().enumerate() {
                if self.has_edge(u, v) {
                    edges.push((a + 1, b + 1));
                }
            }
        }
        Dag::from_edges(nodes.len(), &edges).expect("subgraph of a DAG is a DAG")
    }
}

pub(crate) fn v_structures_of(g: &Pdag) -> Vec<(usize, usize, usize)> {
    let n = g.node_count();
    let mut out = Vec::new();
    for c in 0..n {
        let pa = g.parents0(c);
        for (x, &a) in pa.iter().enumerate() {
            for &b in &pa[x + 1..] {
                if !g.adj(a, b) {
                    out.push((a + 1, c + 1, b + 1));
                }
            }
        }
    }
    out
}

impl std::fmt::Debug for Dag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Dag(p={}", self.node_count())?;
        for (i, j) in self.edges() {
            write!(f, ", {i}->{j}")?;
        }
        write!(f, ")")
    }
}
