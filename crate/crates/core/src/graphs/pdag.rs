use std::fmt;

use crate::error::{Error, Result};
use crate::graphs::Dag;

/// The four Meek orientation rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MeekRule {
    R1,
    R2,
    R3,
    R4,
}

impl MeekRule {
    pub const ALL: [MeekRule; 4] = [MeekRule::R1, MeekRule::R2, MeekRule::R3, MeekRule::R4];
}

/// A partially directed graph over nodes `1..=n`.
///
/// Stored as an edge-mark matrix: `marks[i][j]` is set when there is an edge
/// between `i` and `j` that does not point into `i`. A directed edge `i -> j`
/// sets only `marks[i][j]`; an undirected edge sets both.
///
/// Public methods take and return 1-indexed node labels. The crate-internal
/// helpers (`dir`, `undir`, `adj`, ...) work on 0-based positions.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Pdag {
    n: usize,
    marks: Vec<bool>,
}

impl Pdag {
    pub fn empty(n: usize) -> Self {
        Pdag {
            n,
            marks: vec![false; n * n],
        }
    }

    /// Builds a PDAG from 1-indexed edge lists.
    pub fn from_edges(
        n: usize,
        directed: &[(usize, usize)],
        undirected: &[(usize, usize)],
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGraph("graph must have at least one node".into()));
        }
        let mut g = Pdag::empty(n);
        let check = |i: usize, j: usize| -> Result<(usize, usize)> {
            if i == 0 || j == 0 || i > n || j > n {
                return Err(Error::InvalidGraph(format!(
                    "edge ({i}, {j}) references a node outside 1..={n}"
                )));
            }
            if i == j {
                return Err(Error::InvalidGraph(format!("self-loop on node {i}")));
            }
            Ok((i - 1, j - 1))
        };
        for &(i, j) in directed {
            let (a, b) = check(i, j)?;
            if g.adj(a, b) {
                return Err(Error::InvalidGraph(format!("more than one edge between {i} and {j}")));
            }
            g.set_dir(a, b);
        }
        for &(i, j) in undirected {
            let (a, b) = check(i, j)?;
            if g.adj(a, b) {
                return Err(Error::InvalidGraph(format!("more than one edge between {i} and {j}")));
            }
            g.set_undir(a, b);
        }
        Ok(g)
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    #[inline]
    fn mark(&self, i: usize, j: usize) -> bool {
        self.marks[i * self.n + j]
    }

    #[inline]
    pub(crate) fn dir(&self, i: usize, j: usize) -> bool {
        self.mark(i, j) && !self.mark(j, i)
    }

    #[inline]
    pub(crate) fn undir(&self, i: usize, j: usize) -> bool {
        self.mark(i, j) && self.mark(j, i)
    }

    #[inline]
    pub(crate) fn adj(&self, i: usize, j: usize) -> bool {
        self.mark(i, j) || self.mark(j, i)
    }

    pub(crate) fn set_dir(&mut self, i: usize, j: usize) {
        let n = self.n;
        self.marks[i * n + j] = true;
        self.marks[j * n + i] = false;
    }

    pub(crate) fn set_undir(&mut self, i: usize, j: usize) {
        let n = self.n;
        self.marks[i * n + j] = true;
        self.marks[j * n + i] = true;
    }

    pub(crate) fn remove(&mut self, i: usize, j: usize) {
        let n = self.n;
        self.marks[i * n + j] = false;
        self.marks[j * n + i] = false;
    }

    /// 0-based directed parents of `v`.
    pub(crate) fn parents0(&self, v: usize) -> Vec<usize> {
        (0..self.n).filter(|&u| self.dir(u, v)).collect()
    }

    /// 0-based undirected neighbours of `v`.
    pub(crate) fn undirected0(&self, v: usize) -> Vec<usize> {
        (0..self.n).filter(|&u| self.undir(u, v)).collect()
    }

    pub fn has_directed_edge(&self, i: usize, j: usize) -> bool {
        self.in_range(i, j) && self.dir(i - 1, j - 1)
    }

    pub fn has_undirected_edge(&self, i: usize, j: usize) -> bool {
        self.in_range(i, j) && self.undir(i - 1, j - 1)
    }

    pub fn is_adjacent(&self, i: usize, j: usize) -> bool {
        self.in_range(i, j) && self.adj(i - 1, j - 1)
    }

    fn in_range(&self, i: usize, j: usize) -> bool {
        i >= 1 && j >= 1 && i <= self.n && j <= self.n && i != j
    }

    /// Directed parents of node `v` (1-indexed, ascending).
    pub fn parents(&self, v: usize) -> Vec<usize> {
        self.parents0(v - 1).into_iter().map(|u| u + 1).collect()
    }

    /// Undirected neighbours of node `v` (1-indexed, ascending).
    pub fn undirected_neighbors(&self, v: usize) -> Vec<usize> {
        self.undirected0(v - 1).into_iter().map(|u| u + 1).collect()
    }

    /// All directed edges `(from, to)`, 1-indexed, in row-major order.
    pub fn directed_edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j && self.dir(i, j) {
                    out.push((i + 1, j + 1));
                }
            }
        }
        out
    }

    /// All undirected edges `(i, j)` with `i < j`, 1-indexed.
    pub fn undirected_edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                if self.undir(i, j) {
                    out.push((i + 1, j + 1));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        let mut c = 0;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                if self.adj(i, j) {
                    c += 1;
                }
            }
        }
        c
    }

    /// True when the directed part contains no cycle.
    pub fn is_directed_acyclic(&self) -> bool {
        self.directed_topological_order().is_some()
    }

    /// Kahn's algorithm over the directed edges only; 0-based.
    pub(crate) fn directed_topological_order(&self) -> Option<Vec<usize>> {
        let n = self.n;
        let mut indeg = vec![0usize; n];
        for i in 0..n {
            for j in 0..n {
                if i != j && self.dir(i, j) {
                    indeg[j] += 1;
                }
            }
        }
        let mut stack: Vec<usize> = (0..n).rev().filter(|&v| indeg[v] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(v) = stack.pop() {
            order.push(v);
            for w in (0..n).rev() {
                if w != v && self.dir(v, w) {
                    indeg[w] -= 1;
                    if indeg[w] == 0 {
                        stack.push(w);
                    }
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    /// Applies R1, R2, R3, R4 in that order until nothing changes.
    /// Returns whether any edge was oriented.
    pub fn apply_meek_rules(&mut self) -> bool {
        self.apply_meek_rules_in_order(&MeekRule::ALL)
    }

    /// Applies the given rules round-robin until a full pass changes nothing.
    pub fn apply_meek_rules_in_order(&mut self, order: &[MeekRule]) -> bool {
        let mut changed_any = false;
        loop {
            let mut changed = false;
            for &rule in order {
                changed |= self.apply_rule_once(rule);
            }
            if !changed {
                return changed_any;
            }
            changed_any = true;
        }
    }

    /// True when no rule can orient any further edge.
    pub fn is_meek_closed(&self) -> bool {
        let mut copy = self.clone();
        !copy.apply_meek_rules()
    }

    fn apply_rule_once(&mut self, rule: MeekRule) -> bool {
        let n = self.n;
        let mut changed = false;
        for a in 0..n {
            for b in 0..n {
                if a == b || !self.undir(a, b) {
                    continue;
                }
                let fires = match rule {
                    MeekRule::R1 => self.r1(a, b),
                    MeekRule::R2 => self.r2(a, b),
                    MeekRule::R3 => self.r3(a, b),
                    MeekRule::R4 => self.r4(a, b),
                };
                if fires {
                    self.set_dir(a, b);
                    changed = true;
                }
            }
        }
        changed
    }

    // c -> a, a - b, c and b nonadjacent  =>  a -> b
    fn r1(&self, a: usize, b: usize) -> bool {
        (0..self.n).any(|c| c != b && self.dir(c, a) && !self.adj(c, b))
    }

    // a -> c -> b, a - b  =>  a -> b
    fn r2(&self, a: usize, b: usize) -> bool {
        (0..self.n).any(|c| self.dir(a, c) && self.dir(c, b))
    }

    // a - c -> b, a - d -> b, c and d nonadjacent, a - b  =>  a -> b
    fn r3(&self, a: usize, b: usize) -> bool {
        let cands: Vec<usize> = (0..self.n)
            .filter(|&c| c != b && self.undir(a, c) && self.dir(c, b))
            .collect();
        for (x, &c) in cands.iter().enumerate() {
            for &d in &cands[x + 1..] {
                if !self.adj(c, d) {
                    return true;
                }
            }
        }
        false
    }

    // c -> d -> b, a adjacent to c and d, c and b nonadjacent, a - b  =>  a -> b
    fn r4(&self, a: usize, b: usize) -> bool {
        for d in 0..self.n {
            if d == a || !self.dir(d, b) || !self.adj(a, d) {
                continue;
            }
            for c in 0..self.n {
                if c != a && c != b && self.dir(c, d) && self.adj(a, c) && !self.adj(c, b) {
                    return true;
                }
            }
        }
        false
    }

    /// Dor-Tarsi: a DAG that keeps every directed edge, orients every
    /// undirected edge, and adds no new v-structure; `None` if none exists.
    pub fn consistent_extension(&self) -> Option<Dag> {
        let n = self.n;
        let mut work = self.clone();
        let mut out = self.clone();
        let mut alive = vec![true; n];
        for _ in 0..n {
            let sink = (0..n).find(|&x| {
                if !alive[x] {
                    return false;
                }
                if (0..n).any(|y| alive[y] && work.dir(x, y)) {
                    return false;
                }
                let nbrs: Vec<usize> = (0..n).filter(|&y| alive[y] && work.adj(x, y)).collect();
                nbrs.iter().filter(|&&y| work.undir(x, y)).all(|&y| {
                    nbrs.iter().all(|&z| z == y || work.adj(y, z))
                })
            })?;
            for y in 0..n {
                if alive[y] && work.undir(sink, y) {
                    out.set_dir(y, sink);
                }
            }
            for y in 0..n {
                if y != sink {
                    work.remove(sink, y);
                }
            }
            alive[sink] = false;
        }
        Dag::try_from_pdag(out).ok()
    }
}

impl fmt::Debug for Pdag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Pdag(p={}", self.n)?;
        for (i, j) in self.directed_edges() {
            write!(f, ", {i}->{j}")?;
        }
        for (i, j) in self.undirected_edges() {
            write!(f, ", {i}--{j}")?;
        }
        write!(f, ")")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn r1_orients_away_from_collider_free_parent() {
        let mut g = Pdag::from_edges(3, &[(1, 2)], &[(2, 3)]).unwrap();
        assert!(g.apply_meek_rules());
        assert!(g.has_directed_edge(2, 3));
    }

    #[test]
    fn r2_avoids_cycles() {
        let mut g = Pdag::from_edges(3, &[(1, 2), (2, 3)], &[(1, 3)]).unwrap();
        g.apply_meek_rules();
        assert!(g.has_directed_edge(1, 3));
    }

    #[test]
    fn r3_orients_into_collider() {
        // 1 - 2, 1 - 3, 1 - 4, 3 -> 2 <- 4, 3 and 4 nonadjacent
        let mut g = Pdag::from_edges(4, &[(3, 2), (4, 2)], &[(1, 2), (1, 3), (1, 4)]).unwrap();
        g.apply_meek_rules();
        assert!(g.has_directed_edge(1, 2));
        assert!(g.has_undirected_edge(1, 3));
        assert!(g.has_undirected_edge(1, 4));
    }

    #[test]
    fn r4_orients_along_chain() {
        // c=3 -> d=4 -> b=2, a=1 adjacent to 3 and 4, 3 and 2 nonadjacent
        let mut g =
            Pdag::from_edges(4, &[(3, 4), (4, 2)], &[(1, 2), (1, 3), (1, 4)]).unwrap();
        assert!(g.apply_rule_once(MeekRule::R4));
        assert!(g.has_directed_edge(1, 2));
    }

    #[test]
    fn rejects_self_loops_and_double_edges() {
        assert!(Pdag::from_edges(3, &[(1, 1)], &[]).is_err());
        assert!(Pdag::from_edges(3, &[(1, 2)], &[(2, 1)]).is_err());
        assert!(Pdag::from_edges(3, &[(1, 4)], &[]).is_err());
    }

    #[test]
    fn extension_of_chain() {
        let g = Pdag::from_edges(3, &[], &[(1, 2), (2, 3)]).unwrap();
        let dag = g.consistent_extension().unwrap();
        assert_eq!(dag.edge_count(), 2);
        assert!(dag.v_structures().is_empty());
    }

    #[test]
    fn four_cycle_has_no_extension() {
        let g = Pdag::from_edges(4, &[], &[(1, 2), (2, 3), (3, 4), (4, 1)]).unwrap();
        assert!(g.consistent_extension().is_none());
    }
}
