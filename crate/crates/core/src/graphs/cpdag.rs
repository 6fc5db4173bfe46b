use crate::error::{Error, Result};
use crate::graphs::dag::v_structures_of;
use crate::graphs::{Dag, Pdag};

/// A completed partially directed acyclic graph: the essential graph of a
/// Markov equivalence class.
///
/// Construction checks that the graph is exactly `dag_to_cpdag` of one of its
/// consistent extensions, which implies Meek closure, an acyclic directed
/// part, and chordal chain components.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Cpdag {
    inner: Pdag,
}

impl Cpdag {
    pub fn new(
        n: usize,
        directed: &[(usize, usize)],
        undirected: &[(usize, usize)],
    ) -> Result<Self> {
        Cpdag::try_from_pdag(Pdag::from_edges(n, directed, undirected)?)
    }

    /// The CPDAG with no edges.
    pub fn empty(n: usize) -> Self {
        Cpdag {
            inner: Pdag::empty(n),
        }
    }

    pub fn try_from_pdag(g: Pdag) -> Result<Self> {
        if !g.is_directed_acyclic() {
            return Err(Error::InvalidGraph("directed part contains a cycle".into()));
        }
        if !g.is_meek_closed() {
            return Err(Error::InvalidGraph("graph is not closed under the Meek rules".into()));
        }
        let ext = g.consistent_extension().ok_or_else(|| {
            Error::InvalidGraph("graph has no consistent DAG extension".into())
        })?;
        if dag_to_cpdag(&ext).inner != g {
            return Err(Error::InvalidGraph(
                "graph is not the completed representative of its equivalence class".into(),
            ));
        }
        Ok(Cpdag { inner: g })
    }

    pub(crate) fn from_pdag_unchecked(g: Pdag) -> Self {
        Cpdag { inner: g }
    }

    pub fn as_pdag(&self) -> &Pdag {
        &self.inner
    }

    pub fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    pub fn directed_edges(&self) -> Vec<(usize, usize)> {
        self.inner.directed_edges()
    }

    pub fn undirected_edges(&self) -> Vec<(usize, usize)> {
        self.inner.undirected_edges()
    }

    pub fn has_directed_edge(&self, i: usize, j: usize) -> bool {
        self.inner.has_directed_edge(i, j)
    }

    pub fn has_undirected_edge(&self, i: usize, j: usize) -> bool {
        self.inner.has_undirected_edge(i, j)
    }

    pub fn is_adjacent(&self, i: usize, j: usize) -> bool {
        self.inner.is_adjacent(i, j)
    }

    /// Parents through directed edges only.
    pub fn parents(&self, v: usize) -> Vec<usize> {
        self.inner.parents(v)
    }

    pub fn undirected_neighbors(&self, v: usize) -> Vec<usize> {
        self.inner.undirected_neighbors(v)
    }

    pub fn edge_count(&self) -> usize {
        self.inner.edge_count()
    }

    /// Any member of the equivalence class.
    pub fn some_member(&self) -> Dag {
        self.inner
            .consistent_extension()
            .expect("a valid CPDAG has a consistent extension")
    }
}

/// The CPDAG of the Markov equivalence class containing `dag`.
pub fn dag_to_cpdag(dag: &Dag) -> Cpdag {
    let d = dag.as_pdag();
    let n = d.node_count();
    let mut g = Pdag::empty(n);
    for i in 0..n {
        for j in (i + 1)..n {
            if d.adj(i, j) {
                g.set_undir(i, j);
            }
        }
    }
    for (a, c, b) in v_structures_of(d) {
        g.set_dir(a - 1, c - 1);
        g.set_dir(b - 1, c - 1);
    }
    g.apply_meek_rules();
    Cpdag::from_pdag_unchecked(g)
}

impl std::fmt::Debug for Cpdag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Cpdag{:?}", self.inner)
    }
}
