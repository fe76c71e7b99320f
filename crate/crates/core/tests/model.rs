mod common;

use common::{addable, nested_pair, random_allocation, random_float_instance, SmallSpec};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use simcache::model::{
    approximation_cost_between, caching_gain, exchange_candidate, expected_cost, serve_cost, total_cost, Allocation,
    Approximizer, Metric,
};
use simcache::{Exact, Scalar};

#[test]
fn metric_costs() {
    let (a, b) = ([0.0, 0.0], [3.0, 4.0]);
    assert_eq!(approximation_cost_between(Metric::Norm1, 1.0, &a, &b).unwrap(), 7.0);
    assert_eq!(approximation_cost_between(Metric::Norm1, 2.0, &a, &b).unwrap(), 49.0);
    assert_eq!(approximation_cost_between(Metric::Norm2, 1.0, &a, &b).unwrap(), 5.0);
    for g in [0.0, 0.5, 1.0, 3.0] {
        assert_eq!(approximation_cost_between(Metric::Norm2, g, &b, &b).unwrap(), 0.0);
    }
}

#[test]
fn full_replication_costs_nothing() {
    for seed in 0..20 {
        let spec = SmallSpec::random(seed);
        // one slot per object at every cache
        let mut wide = spec.clone();
        for n in wide.nodes.iter_mut().filter(|n| n.1.is_some()) {
            n.0 = simcache::model::Capacity::Slots(spec.objects);
        }
        let inst = wide.exact();
        let all = Allocation::from_pairs(
            inst.caches()
                .iter()
                .flat_map(|&v| (0..inst.objects()).map(move |o| (o, v))),
        );
        assert_eq!(total_cost(&inst, &all).unwrap(), Exact::int(0));
    }
}

#[test]
fn empty_allocation_has_no_gain() {
    let inst = SmallSpec::random(3).exact();
    assert_eq!(caching_gain(&inst, &Allocation::new()).unwrap(), Exact::int(0));
}

#[test]
fn local_hit_is_free() {
    let inst = SmallSpec::random(11).exact();
    let v = inst.caches()[0];
    let a = Allocation::from_pairs([(2, v)]);
    let c = serve_cost(&inst, 2, v, &a).unwrap();
    assert_eq!(c.cost, Exact::int(0));
    assert_eq!((c.object, c.node), (2, v));
}

#[test]
fn breakdown_adds_up() {
    let inst = random_float_instance(5);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = random_allocation(&inst, &mut rng);
    let b = expected_cost(&inst, &a).unwrap();
    assert!((b.total - b.approximation - b.retrieval).abs() < 1e-12);
    let served: f64 = b.served_rate.values().sum();
    assert!((served - inst.demand().total_rate()).abs() < 1e-12);
    assert_eq!(b.assignments.len(), inst.requests().len());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gain_is_submodular_exactly(seed in any::<u64>()) {
        let inst = SmallSpec::random(seed).exact();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..20 {
            let (a, b) = nested_pair(&inst, &mut rng);
            let Some(x) = addable(&inst, &b, &mut rng) else { continue };
            let ga = caching_gain(&inst, &a).unwrap();
            let gb = caching_gain(&inst, &b).unwrap();
            let da = caching_gain(&inst, &a.with(x)).unwrap() - ga;
            let db = caching_gain(&inst, &b.with(x)).unwrap() - gb;
            prop_assert!(da >= db, "{a:?} {b:?} {x:?}: {da} < {db}");
        }
    }

    #[test]
    fn gain_is_submodular_in_floats(seed in any::<u64>()) {
        let inst = random_float_instance(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..20 {
            let (a, b) = nested_pair(&inst, &mut rng);
            let Some(x) = addable(&inst, &b, &mut rng) else { continue };
            let da = caching_gain(&inst, &a.with(x)).unwrap() - caching_gain(&inst, &a).unwrap();
            let db = caching_gain(&inst, &b.with(x)).unwrap() - caching_gain(&inst, &b).unwrap();
            prop_assert!(da >= db - 1e-9, "{da} < {db}");
        }
    }

    #[test]
    fn gain_is_monotone(seed in any::<u64>()) {
        let inst = SmallSpec::random(seed).exact();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..20 {
            let (a, b) = nested_pair(&inst, &mut rng);
            prop_assert!(caching_gain(&inst, &a).unwrap() <= caching_gain(&inst, &b).unwrap());
        }
    }

    #[test]
    fn capacity_constraints_form_a_matroid(seed in any::<u64>()) {
        let inst = SmallSpec::random(seed).exact();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..20 {
            let a = random_allocation(&inst, &mut rng);
            let b = random_allocation(&inst, &mut rng);
            let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
            if small.len() == large.len() {
                continue;
            }
            let x = exchange_candidate(&small, &large, inst.topology());
            prop_assert!(x.is_some());
            let x = x.unwrap();
            prop_assert!(large.contains(&x) && !small.contains(&x));
            prop_assert!(small.with(x).is_feasible(inst.topology(), inst.objects()));
        }
    }

    #[test]
    fn serving_never_costs_more_than_the_repository(seed in any::<u64>()) {
        let spec = SmallSpec::random(seed);
        let inst = spec.exact();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_allocation(&inst, &mut rng);
        for r in inst.requests() {
            let c = serve_cost(&inst, r.object, r.ingress, &a).unwrap();
            prop_assert!(c.cost <= inst.topology().hop(r.ingress, spec.repository()));
        }
    }

    #[test]
    fn cost_plus_gain_is_the_empty_cost(seed in any::<u64>()) {
        let inst = SmallSpec::random(seed).exact();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_allocation(&inst, &mut rng);
        let empty = total_cost(&inst, &Allocation::new()).unwrap();
        let total = expected_cost(&inst, &a).unwrap().total;
        prop_assert_eq!(total + caching_gain(&inst, &a).unwrap(), empty);
        prop_assert_eq!(empty, inst.empty_cost());
    }

    #[test]
    fn cost_ignores_insertion_order(seed in any::<u64>()) {
        let inst = random_float_instance(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_allocation(&inst, &mut rng);
        let mut pairs: Vec<Approximizer> = a.iter().copied().collect();
        pairs.reverse();
        let b = Allocation::from_pairs(pairs.iter().map(|x| (x.object, x.node)));
        prop_assert_eq!(total_cost(&inst, &a).unwrap().to_f64(), total_cost(&inst, &b).unwrap().to_f64());
    }
}
