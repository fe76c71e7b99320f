use simcache::model::{caching_gain, expected_cost, serve_cost, Allocation, Approximizer};
use simcache::offline::{
    brute_force_optimal, cascade_place, greedy_place, is_locally_optimal, local_swap, BruteLimits, RequestSource,
    StopRule,
};
use simcache::toy;
use simcache::Exact;

fn q(n: i128, d: i128) -> Exact {
    Exact::new(n, d)
}

fn rates() -> [Exact; 5] {
    [q(1, 1), q(4, 3), q(2, 1), q(4, 3), q(1, 1)]
}

fn single(eps: Exact) -> simcache::model::Instance<Exact> {
    toy::single_cache(eps, q(1, 1), rates(), 2).unwrap()
}

fn at_leaf(objs: &[usize]) -> Allocation {
    Allocation::from_pairs(objs.iter().map(|&o| (o, 0)))
}

#[test]
fn serve_cost_examples() {
    let inst = single(q(4, 9));
    let c = serve_cost(&inst, 0, 0, &at_leaf(&[1, 3])).unwrap();
    assert_eq!(c.cost, q(4, 9));
    assert_eq!((c.object, c.node), (1, 0));
    let c = serve_cost(&inst, 4, 0, &at_leaf(&[2, 0])).unwrap();
    assert_eq!(c.cost, q(1, 1));
    assert!(c.repository);
    let c = serve_cost(&inst, 2, 0, &at_leaf(&[2])).unwrap();
    assert_eq!(c.cost, q(0, 1));
}

#[test]
fn expected_cost_and_gain() {
    let inst = single(q(4, 9));
    let b = expected_cost(&inst, &at_leaf(&[1, 3])).unwrap();
    assert_eq!(b.total, q(8, 9));
    assert_eq!(b.total, b.approximation + b.retrieval);
    assert_eq!(expected_cost(&inst, &at_leaf(&[2, 0])).unwrap().total, q(1, 1));
    assert_eq!(caching_gain(&inst, &at_leaf(&[1, 3])).unwrap(), q(52, 9));
    assert_eq!(caching_gain(&inst, &Allocation::new()).unwrap(), q(0, 1));
}

#[test]
fn brute_force_finds_the_pair_around_the_center() {
    let (a, c) = brute_force_optimal(&single(q(4, 9)), BruteLimits::default()).unwrap();
    assert_eq!(a, at_leaf(&[1, 3]));
    assert_eq!(c, q(8, 9));
}

#[test]
fn greedy_takes_the_center_first() {
    let g = greedy_place(&single(q(4, 9))).unwrap();
    assert_eq!(g.allocation, at_leaf(&[2, 0]));
    assert_eq!(g.steps[0].chosen, Approximizer::new(2, 0));
    assert!(g.steps[0].gain >= g.steps[1].gain);
}

#[test]
fn local_optimality_of_toy_states() {
    let inst = single(q(4, 9));
    assert!(is_locally_optimal(&inst, &at_leaf(&[1, 3])).unwrap().0);
    // With eps = 4/9 the greedy state cannot be improved by one swap.
    assert!(is_locally_optimal(&inst, &at_leaf(&[0, 2])).unwrap().0);

    let inst = single(q(1, 10));
    let (ok, witness) = is_locally_optimal(&inst, &at_leaf(&[0, 2])).unwrap();
    assert!(!ok);
    let w = witness.unwrap();
    assert!(w.delta < q(0, 1));
    assert!(
        (w.insert.object, w.evict.unwrap().object) == (3, 2) || (w.insert.object, w.evict.unwrap().object) == (1, 0)
    );
}

#[test]
fn local_swap_reaches_optimum_from_every_start_for_small_eps() {
    let inst = single(q(1, 10));
    for a in 0..5 {
        for b in a + 1..5 {
            let r = local_swap(
                &inst,
                &at_leaf(&[a, b]),
                RequestSource::Emulated { seed: 7 },
                StopRule::Converged { max_sweeps: 50 },
            )
            .unwrap();
            assert!(r.converged);
            assert_eq!(r.allocation, at_leaf(&[1, 3]), "start {{{a},{b}}}");
            assert!(r.swaps.windows(2).all(|w| w[1].cost <= w[0].cost));
        }
    }
}

#[test]
fn locally_optimal_start_is_returned_unchanged() {
    let inst = single(q(4, 9));
    let r = local_swap(
        &inst,
        &at_leaf(&[1, 3]),
        RequestSource::Emulated { seed: 1 },
        StopRule::Converged { max_sweeps: 10 },
    )
    .unwrap();
    assert!(r.swaps.is_empty());
    assert_eq!(r.allocation, at_leaf(&[1, 3]));
}

#[test]
fn cascade_escapes_greedy_state() {
    let c = cascade_place(&single(q(1, 10)), 3, 50).unwrap();
    assert_eq!(c.greedy.allocation, at_leaf(&[2, 0]));
    assert_eq!(*c.allocation(), at_leaf(&[1, 3]));
}

fn pair(leaf: usize, parent: usize) -> Allocation {
    Allocation::from_pairs([(leaf, 0), (parent, 1)])
}

#[test]
fn tandem_small_hop() {
    let inst = toy::tandem(q(1, 10), q(1, 10), q(1, 1), rates()).unwrap();
    let (a, _) = brute_force_optimal(&inst, BruteLimits::default()).unwrap();
    assert_eq!(a, pair(1, 3));
    let g = greedy_place(&inst).unwrap();
    assert_eq!(g.allocation, pair(2, 0));
    let r = local_swap(
        &inst,
        &g.allocation,
        RequestSource::Emulated { seed: 5 },
        StopRule::Converged { max_sweeps: 50 },
    )
    .unwrap();
    assert!(r.allocation == pair(1, 3) || r.allocation == pair(3, 1));
}

#[test]
fn tandem_large_hop() {
    let inst = toy::tandem(q(4, 9), q(10, 1), q(1, 1), rates()).unwrap();
    let (a, c) = brute_force_optimal(&inst, BruteLimits::default()).unwrap();
    assert_eq!(a, pair(2, 0));
    assert_eq!(c, q(21, 1));
    assert_eq!(greedy_place(&inst).unwrap().allocation, pair(2, 0));
}

#[test]
fn tandem_local_and_global_minima() {
    let inst = toy::tandem(q(4, 9), q(4, 9), q(1, 1), rates()).unwrap();
    let (a, c) = brute_force_optimal(&inst, BruteLimits::default()).unwrap();
    assert_eq!(a, pair(2, 0));
    assert_eq!(c, q(17, 9));
    assert_eq!(greedy_place(&inst).unwrap().allocation, pair(2, 0));
    for local in [pair(3, 1), pair(1, 3)] {
        assert!(is_locally_optimal(&inst, &local).unwrap().0);
        assert_eq!(expected_cost(&inst, &local).unwrap().total, q(52, 27));
    }
}
