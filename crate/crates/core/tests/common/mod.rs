#![allow(dead_code)]

use mida_core::graphs::Dag;
use mida_core::lsem::{ErrorFamily, LsemSpec};
use rand::seq::SliceRandom;
use rand::Rng;

/// Random weighted DAG on `p` nodes under a random ordering, edge density
/// `prob`, weights in `±[0.3, 1]`, error variances in `[0.5, 1.5]`.
pub fn random_spec<R: Rng>(p: usize, prob: f64, rng: &mut R) -> LsemSpec {
    let mut order: Vec<usize> = (1..=p).collect();
    order.shuffle(rng);
    let mut edges = Vec::new();
    for a in 0..p {
        for b in (a + 1)..p {
            if rng.random::<f64>() < prob {
                let w = rng.random_range(0.3..1.0) * if rng.random::<bool>() { 1.0 } else { -1.0 };
                edges.push((order[a], order[b], w));
            }
        }
    }
    let variances = (0..p).map(|_| rng.random_range(0.5..1.5)).collect();
    LsemSpec::from_weighted_edges(p, &edges, variances, ErrorFamily::Gaussian, vec![0.0; p]).unwrap()
}

/// Sum over directed paths `s -> ... -> t` not visiting `avoid` of the
/// product of edge weights, by explicit depth-first traversal.
pub fn dfs_path_sum(spec: &LsemSpec, s: usize, t: usize, avoid: &[usize]) -> f64 {
    if s == t {
        return 1.0;
    }
    let mut total = 0.0;
    for c in spec.dag().children(s) {
        if avoid.contains(&c) {
            continue;
        }
        total += spec.weight(s, c) * dfs_path_sum(spec, c, t, avoid);
    }
    total
}

/// Every DAG on `n` labelled nodes.
pub fn all_dags(n: usize) -> Vec<Dag> {
    let pairs: Vec<(usize, usize)> = (1..=n).flat_map(|i| ((i + 1)..=n).map(move |j| (i, j))).collect();
    let mut out = Vec::new();
    let combos = 3usize.pow(pairs.len() as u32);
    for mut code in 0..combos {
        let mut edges = Vec::new();
        for &(i, j) in &pairs {
            match code % 3 {
                1 => edges.push((i, j)),
                2 => edges.push((j, i)),
                _ => {}
            }
            code /= 3;
        }
        if let Ok(d) = Dag::from_edges(n, &edges) {
            out.push(d);
        }
    }
    out
}

/// Skeleton plus v-structures: the Markov equivalence key of a DAG.
pub fn equivalence_key(d: &Dag) -> (Vec<(usize, usize)>, Vec<(usize, usize, usize)>) {
    let mut skel: Vec<(usize, usize)> = d.edges().into_iter().map(|(a, b)| (a.min(b), a.max(b))).collect();
    skel.sort_unstable();
    let mut v = d.v_structures();
    v.sort_unstable();
    (skel, v)
}

pub fn sorted_edges(d: &Dag) -> Vec<(usize, usize)> {
    let mut e = d.edges();
    e.sort_unstable();
    e
}
