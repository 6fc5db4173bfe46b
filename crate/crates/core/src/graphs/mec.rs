use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::graphs::{Cpdag, Dag, Pdag};

/// Default cap on the number of nodes in one undirected chain component.
pub const DEFAULT_MAX_COMPONENT_SIZE: usize = 12;

/// Distinct parent sets of one node over an equivalence class, with the number
/// of member DAGs that realise each. Entries are sorted by parent set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParentSetMultiset {
    pub entries: Vec<(Vec<usize>, u128)>,
}

impl ParentSetMultiset {
    /// Sum of multiplicities; equals the size of the equivalence class.
    pub fn total(&self) -> u128 {
        self.entries.iter().map(|(_, m)| *m).sum()
    }

    pub fn distinct_count(&self) -> usize {
        self.entries.len()
    }
}

/// One undirected chain component and all its admissible orientations.
#[derive(Debug, Clone)]
struct Component {
    /// 0-based node ids, ascending.
    nodes: Vec<usize>,
    /// For each orientation, the in-component parents of each node
    /// (indexed like `nodes`, 0-based ids).
    orientations: Vec<Vec<Vec<usize>>>,
}

/// Chain-component decomposition of a CPDAG with every component's
/// orientations enumerated once; answers parent-set and class-size queries.
#[derive(Debug, Clone)]
pub struct MecIndex {
    graph: Pdag,
    components: Vec<Component>,
    /// Component index of each node, if it has an undirected edge.
    component_of: Vec<Option<usize>>,
    size: u128,
}

impl MecIndex {
    pub fn new(cpdag: &Cpdag, max_component_size: usize) -> Result<Self> {
        let g = cpdag.as_pdag();
        let n = g.node_count();
        let mut component_of = vec![None; n];
        let mut components = Vec::new();
        for start in 0..n {
            if component_of[start].is_some() || g.undirected0(start).is_empty() {
                continue;
            }
            let id = components.len();
            let mut nodes = vec![start];
            component_of[start] = Some(id);
            let mut k = 0;
            while k < nodes.len() {
                for w in g.undirected0(nodes[k]) {
                    if component_of[w].is_none() {
                        component_of[w] = Some(id);
                        nodes.push(w);
                    }
                }
                k += 1;
            }
            nodes.sort_unstable();
            if nodes.len() > max_component_size {
                return Err(Error::Capacity {
                    component: nodes.iter().map(|v| v + 1).collect(),
                    size: nodes.len(),
                    max: max_component_size,
                });
            }
            let orientations = orient_component(g, &nodes);
            if orientations.is_empty() {
                return Err(Error::InvalidGraph(format!(
                    "chain component {:?} admits no orientation",
                    nodes.iter().map(|v| v + 1).collect::<Vec<_>>()
                )));
            }
            components.push(Component {
                nodes,
                orientations,
            });
        }
        let mut size: u128 = 1;
        for c in &components {
            size = size
                .checked_mul(c.orientations.len() as u128)
                .ok_or_else(|| Error::InvalidGraph("equivalence class size overflows u128".into()))?;
        }
        Ok(MecIndex {
            graph: cpdag.as_pdag().clone(),
            components,
            component_of,
            size,
        })
    }

    /// Index whose class is the single DAG `dag`; used when the full DAG is
    /// taken as known.
    pub fn from_dag(dag: &Dag) -> Self {
        MecIndex {
            graph: dag.as_pdag().clone(),
            components: Vec::new(),
            component_of: vec![None; dag.node_count()],
            size: 1,
        }
    }

    pub fn node_count(&self) -> usize {
        self.graph.node_count()
    }

    /// Number of DAGs in the equivalence class.
    pub fn mec_size(&self) -> u128 {
        self.size
    }

    /// Sizes of the undirected chain components (singletons omitted).
    pub fn component_sizes(&self) -> Vec<usize> {
        self.components.iter().map(|c| c.nodes.len()).collect()
    }

    /// Parent sets of `node` (1-indexed) across the class.
    pub fn parent_set_multiset(&self, node: usize) -> Result<ParentSetMultiset> {
        let n = self.graph.node_count();
        if node == 0 || node > n {
            return Err(Error::InvalidGraph(format!("node {node} outside 1..={n}")));
        }
        let v = node - 1;
        let directed = self.graph.parents0(v);
        let Some(cid) = self.component_of[v] else {
            let pa = directed.iter().map(|u| u + 1).collect();
            return Ok(ParentSetMultiset {
                entries: vec![(pa, self.size)],
            });
        };
        let comp = &self.components[cid];
        let others = self.size / comp.orientations.len() as u128;
        let pos = comp.nodes.binary_search(&v).expect("node belongs to its component");
        let mut acc: BTreeMap<Vec<usize>, u128> = BTreeMap::new();
        for orient in &comp.orientations {
            let mut pa: Vec<usize> = directed.iter().chain(&orient[pos]).map(|u| u + 1).collect();
            pa.sort_unstable();
            *acc.entry(pa).or_insert(0) += others;
        }
        Ok(ParentSetMultiset {
            entries: acc.into_iter().collect(),
        })
    }

    /// Every DAG in the class, in a canonical order.
    pub fn dags(&self) -> Vec<Dag> {
        let base = &self.graph;
        let n = base.node_count();
        let base_edges: Vec<(usize, usize)> = base.directed_edges();
        let mut out = Vec::with_capacity(self.size.min(1 << 20) as usize);
        let mut choice = vec![0usize; self.components.len()];
        loop {
            let mut edges = base_edges.clone();
            for (c, comp) in self.components.iter().enumerate() {
                let orient = &comp.orientations[choice[c]];
                for (k, pa) in orient.iter().enumerate() {
                    for &u in pa {
                        edges.push((u + 1, comp.nodes[k] + 1));
                    }
                }
            }
            out.push(Dag::from_edges(n, &edges).expect("enumerated orientation is acyclic"));
            // odometer over component choices
            let mut c = 0;
            loop {
                if c == choice.len() {
                    out.sort_by_key(|d| d.edges());
                    return out;
                }
                choice[c] += 1;
                if choice[c] < self.components[c].orientations.len() {
                    break;
                }
                choice[c] = 0;
                c += 1;
            }
        }
    }
}

/// All orientations of the undirected edges inside `nodes` that add no
/// v-structure and no directed cycle.
fn orient_component(g: &Pdag, nodes: &[usize]) -> Vec<Vec<Vec<usize>>> {
    // local graph: component nodes first, then their external directed parents
    let mut local_ids: Vec<usize> = nodes.to_vec();
    for &v in nodes {
        for u in g.parents0(v) {
            if !local_ids.contains(&u) {
                local_ids.push(u);
            }
        }
    }
    let m = local_ids.len();
    let mut local = Pdag::empty(m);
    for a in 0..m {
        for b in 0..m {
            let (u, v) = (local_ids[a], local_ids[b]);
            if a < b && g.undir(u, v) {
                local.set_undir(a, b);
            } else if g.dir(u, v) {
                local.set_dir(a, b);
            }
        }
    }
    let k = nodes.len();
    let reference = collider_count(&local);
    let mut results = Vec::new();
    recurse(local, k, reference, &mut results);
    for orient in &mut results {
        for pa in orient.iter_mut() {
            for u in pa.iter_mut() {
                *u = nodes[*u];
            }
        }
    }
    results
}

fn recurse(g: Pdag, k: usize, reference: usize, out: &mut Vec<Vec<Vec<usize>>>) {
    let next = (0..k).flat_map(|a| ((a + 1)..k).map(move |b| (a, b))).find(|&(a, b)| g.undir(a, b));
    let Some((a, b)) = next else {
        out.push((0..k).map(|v| (0..k).filter(|&u| g.dir(u, v)).collect()).collect());
        return;
    };
    for (x, y) in [(a, b), (b, a)] {
        let mut h = g.clone();
        h.set_dir(x, y);
        h.apply_meek_rules();
        if h.is_directed_acyclic() && collider_count(&h) == reference {
            recurse(h, k, reference, out);
        }
    }
}

/// Number of unshielded colliders formed by directed edges.
fn collider_count(g: &Pdag) -> usize {
    let n = g.node_count();
    let mut count = 0;
    for c in 0..n {
        let pa = g.parents0(c);
        for (x, &a) in pa.iter().enumerate() {
            for &b in &pa[x + 1..] {
                if !g.adj(a, b) {
                    count += 1;
                }
            }
        }
    }
    count
}

/// All DAGs in the equivalence class represented by `cpdag`.
pub fn enumerate_mec(cpdag: &Cpdag, max_component_size: usize) -> Result<Vec<Dag>> {
    Ok(MecIndex::new(cpdag, max_component_size)?.dags())
}

/// Parent sets of `node` over the class, aggregated with multiplicities.
pub fn parent_set_multiset(
    cpdag: &Cpdag,
    node: usize,
    max_component_size: usize,
) -> Result<ParentSetMultiset> {
    MecIndex::new(cpdag, max_component_size)?.parent_set_multiset(node)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_edge_two_dags() {
        let c = Cpdag::new(2, &[], &[(1, 2)]).unwrap();
        let dags = enumerate_mec(&c, 12).unwrap();
        assert_eq!(dags.len(), 2);
        let ms = parent_set_multiset(&c, 2, 12).unwrap();
        assert_eq!(ms.entries, vec![(vec![], 1), (vec![1], 1)]);
    }

    #[test]
    fn chain_three_dags() {
        let c = Cpdag::new(3, &[], &[(1, 2), (2, 3)]).unwrap();
        let dags = enumerate_mec(&c, 12).unwrap();
        assert_eq!(dags.len(), 3);
        assert!(dags.iter().all(|d| d.v_structures().is_empty()));
        let ms = parent_set_multiset(&c, 2, 12).unwrap();
        assert_eq!(ms.entries, vec![(vec![], 1), (vec![1], 1), (vec![3], 1)]);
    }

    #[test]
    fn directed_cpdag_single_member() {
        let c = Cpdag::new(3, &[(1, 3), (2, 3)], &[]).unwrap();
        let dags = enumerate_mec(&c, 12).unwrap();
        assert_eq!(dags.len(), 1);
        assert_eq!(dags[0].edges(), vec![(1, 3), (2, 3)]);
        let ms = parent_set_multiset(&c, 3, 12).unwrap();
        assert_eq!(ms.entries, vec![(vec![1, 2], 1)]);
    }

    #[test]
    fn complete_graph_has_factorial_members() {
        let und: Vec<(usize, usize)> =
            (1..=4).flat_map(|i| ((i + 1)..=4).map(move |j| (i, j))).collect();
        let c = Cpdag::new(4, &[], &und).unwrap();
        assert_eq!(MecIndex::new(&c, 12).unwrap().mec_size(), 24);
    }

    #[test]
    fn independent_components_multiply() {
        // two disjoint chains
        let c = Cpdag::new(6, &[], &[(1, 2), (2, 3), (4, 5), (5, 6)]).unwrap();
        let idx = MecIndex::new(&c, 12).unwrap();
        assert_eq!(idx.mec_size(), 9);
        assert_eq!(idx.dags().len(), 9);
        let ms = idx.parent_set_multiset(5).unwrap();
        assert_eq!(ms.entries, vec![(vec![], 3), (vec![4], 3), (vec![6], 3)]);
    }

    #[test]
    fn capacity_error_names_component() {
        let c = Cpdag::new(4, &[], &[(1, 2), (2, 3), (3, 4)]).unwrap();
        match MecIndex::new(&c, 3) {
            Err(Error::Capacity { component, size, max }) => {
                assert_eq!(component, vec![1, 2, 3, 4]);
                assert_eq!((size, max), (4, 3));
            }
            other => panic!("expected capacity error, got {other:?}"),
        }
    }
}
