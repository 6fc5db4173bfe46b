mod common;

use std::collections::{BTreeMap, BTreeSet};

use mida_core::graphs::{dag_to_cpdag, Cpdag, Dag, MecIndex, MeekRule, Pdag};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_dag(n: usize, density: f64, seed: u64) -> Dag {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (1..=n).collect();
    order.shuffle(&mut rng);
    let mut edges = Vec::new();
    for a in 0..n {
        for b in (a + 1)..n {
            if rng.random::<f64>() < density {
                edges.push((order[a], order[b]));
            }
        }
    }
    Dag::from_edges(n, &edges).unwrap()
}

/// Skeleton with only the v-structures oriented.
fn pattern(d: &Dag) -> Pdag {
    let vs = d.v_structures();
    let mut directed = BTreeSet::new();
    for &(a, c, b) in &vs {
        directed.insert((a, c));
        directed.insert((b, c));
    }
    let undirected: Vec<(usize, usize)> = d
        .edges()
        .into_iter()
        .filter(|e| !directed.contains(e))
        .collect();
    let directed: Vec<_> = directed.into_iter().collect();
    Pdag::from_edges(d.node_count(), &directed, &undirected).unwrap()
}

#[test]
fn mec_matches_brute_force_on_four_nodes() {
    let dags = common::all_dags(4);
    assert_eq!(dags.len(), 543);
    let mut classes: BTreeMap<_, BTreeSet<Vec<(usize, usize)>>> = BTreeMap::new();
    for d in &dags {
        classes.entry(common::equivalence_key(d)).or_default().insert(common::sorted_edges(d));
    }
    assert_eq!(classes.len(), 185);
    for d in &dags {
        let mec = MecIndex::new(&dag_to_cpdag(d), 12).unwrap();
        let got: BTreeSet<_> = mec.dags().iter().map(common::sorted_edges).collect();
        assert_eq!(got, classes[&common::equivalence_key(d)]);
        assert_eq!(mec.mec_size() as usize, got.len());
    }
}

#[test]
fn multiplicities_count_member_dags() {
    for seed in 0..30 {
        let d = random_dag(8, 0.35, seed);
        let mec = MecIndex::new(&dag_to_cpdag(&d), 12).unwrap();
        let members = mec.dags();
        for v in 1..=8 {
            let ms = mec.parent_set_multiset(v).unwrap();
            assert_eq!(ms.total(), mec.mec_size());
            let mut counted: BTreeMap<Vec<usize>, u128> = BTreeMap::new();
            for m in &members {
                *counted.entry(m.parents(v)).or_insert(0) += 1;
            }
            assert_eq!(ms.entries, counted.into_iter().collect::<Vec<_>>());
        }
    }
}

#[test]
fn meek_closure_of_pattern_is_the_cpdag() {
    for seed in 0..50 {
        let d = random_dag(9, 0.3, seed);
        let mut g = pattern(&d);
        g.apply_meek_rules();
        assert_eq!(g, *dag_to_cpdag(&d).as_pdag(), "seed {seed}");
    }
}

proptest! {
    #[test]
    fn meek_closure_is_order_independent(seed in 0u64..10_000, perm in Just(MeekRule::ALL.to_vec()).prop_shuffle()) {
        let d = random_dag(8, 0.35, seed);
        let mut a = pattern(&d);
        let mut b = a.clone();
        a.apply_meek_rules();
        b.apply_meek_rules_in_order(&perm);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn text_round_trip(seed in 0u64..10_000, n in 1usize..10) {
        let d = random_dag(n, 0.4, seed);
        let back: Dag = d.to_string().parse().unwrap();
        prop_assert_eq!(&back, &d);
        let c = dag_to_cpdag(&d);
        let back: Cpdag = c.to_string().parse().unwrap();
        prop_assert_eq!(back, c);
    }

    #[test]
    fn cpdag_members_share_the_cpdag(seed in 0u64..10_000) {
        let d = random_dag(7, 0.4, seed);
        let c = dag_to_cpdag(&d);
        for m in MecIndex::new(&c, 12).unwrap().dags() {
            prop_assert_eq!(&dag_to_cpdag(&m), &c);
        }
    }
}
