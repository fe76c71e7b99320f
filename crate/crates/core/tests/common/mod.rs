#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use simcache::model::{
    Allocation, Approximizer, Capacity, CostMatrix, Demand, Instance, NodeId, ObjectSpace, RateEntry, Topology,
    TreeNode,
};
use simcache::{Exact, Scalar};

/// Small instance drawn with integer data so it can be built exactly or
/// in floating point.
#[derive(Clone, Debug)]
pub struct SmallSpec {
    pub objects: usize,
    /// `(capacity, parent, edge cost)` per node; the root is the repository.
    pub nodes: Vec<(Capacity, Option<NodeId>, i64)>,
    /// `None` is an infinite cost.
    pub costs: Vec<Vec<Option<i64>>>,
    /// `(object, ingress, rate numerator)`; rates are numerator / 6.
    pub rates: Vec<(usize, NodeId, i64)>,
}

pub const RATE_DENOM: i64 = 6;

impl SmallSpec {
    /// Up to 12 objects, 1–3 caches of at most 2 slots, cost entries in
    /// 1..=9 or infinite.
    pub fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let objects = rng.random_range(3..=12);
        let caches = rng.random_range(1..=3);
        let slot = |rng: &mut ChaCha8Rng| Capacity::Slots(rng.random_range(1..=2));
        // a chain, or for three caches sometimes two leaves under one parent
        let nodes = if caches == 3 && rng.random_bool(0.5) {
            vec![
                (slot(&mut rng), Some(2), rng.random_range(1..=4)),
                (slot(&mut rng), Some(2), rng.random_range(1..=4)),
                (slot(&mut rng), Some(3), rng.random_range(1..=6)),
                (Capacity::Unbounded, None, 0),
            ]
        } else {
            let mut v: Vec<_> = (0..caches)
                .map(|i| (slot(&mut rng), Some(i + 1), rng.random_range(1..=6)))
                .collect();
            v.push((Capacity::Unbounded, None, 0));
            v
        };
        let inf_share = rng.random_range(0.0..0.6);
        let costs = (0..objects)
            .map(|i| {
                (0..objects)
                    .map(|j| {
                        if i == j {
                            Some(0)
                        } else if rng.random_bool(inf_share) {
                            None
                        } else {
                            Some(rng.random_range(1..=9))
                        }
                    })
                    .collect()
            })
            .collect();
        let leaves: Vec<NodeId> = (0..caches).filter(|&v| !nodes.iter().any(|n| n.1 == Some(v))).collect();
        let mut rates = Vec::new();
        for o in 0..objects {
            for &v in &leaves {
                if rng.random_bool(0.8) {
                    rates.push((o, v, rng.random_range(1..=12)));
                }
            }
        }
        if rates.is_empty() {
            rates.push((0, leaves[0], 1));
        }
        SmallSpec {
            objects,
            nodes,
            costs,
            rates,
        }
    }

    pub fn repository(&self) -> NodeId {
        self.nodes.len() - 1
    }

    pub fn build<S: Scalar>(&self, conv: impl Fn(i64, i64) -> S) -> Instance<S> {
        let rows = self
            .costs
            .iter()
            .map(|r| r.iter().map(|c| c.map_or_else(S::infinity, |c| conv(c, 1))).collect())
            .collect();
        let topology = Topology::tree(
            self.nodes
                .iter()
                .map(|&(capacity, parent, e)| TreeNode {
                    capacity,
                    parent,
                    edge_cost: conv(e, 1),
                })
                .collect(),
        )
        .unwrap();
        let demand = Demand::Discrete(
            self.rates
                .iter()
                .map(|&(object, ingress, n)| RateEntry {
                    object,
                    ingress,
                    rate: conv(n, RATE_DENOM),
                })
                .collect(),
        );
        let repo = self.repository();
        Instance::new(
            ObjectSpace::Matrix(CostMatrix::from_rows(rows).unwrap()),
            topology,
            demand,
            (0..self.objects).map(|o| (o, repo)).collect(),
        )
        .unwrap()
    }

    pub fn exact(&self) -> Instance<Exact> {
        self.build(|n, d| Exact::new(n as i128, d as i128))
    }

    pub fn float(&self) -> Instance<f64> {
        self.build(|n, d| n as f64 / d as f64)
    }
}

/// Float instance with continuous random costs and rates, for checks that
/// run at a tolerance.
pub fn random_float_instance(seed: u64) -> Instance<f64> {
    let spec = SmallSpec::random(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut jitter = move |x: i64| x as f64 * rng.random_range(0.5..1.5);
    let costs = spec
        .costs
        .iter()
        .map(|r| {
            r.iter()
                .map(|c| match c {
                    None => f64::INFINITY,
                    Some(0) => 0.0,
                    Some(c) => jitter(*c),
                })
                .collect()
        })
        .collect();
    let nodes = spec
        .nodes
        .iter()
        .map(|&(capacity, parent, e)| TreeNode {
            capacity,
            parent,
            edge_cost: if parent.is_some() { jitter(e) } else { 0.0 },
        })
        .collect();
    let demand = Demand::Discrete(
        spec.rates
            .iter()
            .map(|&(object, ingress, n)| RateEntry {
                object,
                ingress,
                rate: jitter(n) / RATE_DENOM as f64,
            })
            .collect(),
    );
    let repo = spec.repository();
    Instance::new(
        ObjectSpace::Matrix(CostMatrix::from_rows(costs).unwrap()),
        Topology::tree(nodes).unwrap(),
        demand,
        (0..spec.objects).map(|o| (o, repo)).collect(),
    )
    .unwrap()
}

/// Uniformly random feasible allocation, each cache filled to a random level.
pub fn random_allocation<S: Scalar>(inst: &Instance<S>, rng: &mut impl Rng) -> Allocation {
    let mut a = Allocation::new();
    for &v in inst.caches() {
        let k = inst.topology().capacity(v).slots().unwrap_or(0).min(inst.objects());
        let fill = rng.random_range(0..=k);
        while a.occupancy(v) < fill {
            a.insert(Approximizer::new(rng.random_range(0..inst.objects()), v));
        }
    }
    a
}

/// Random feasible `a ⊆ b`.
pub fn nested_pair<S: Scalar>(inst: &Instance<S>, rng: &mut impl Rng) -> (Allocation, Allocation) {
    let b = random_allocation(inst, rng);
    let a = Allocation::from_pairs(b.iter().filter(|_| rng.random_bool(0.5)).map(|x| (x.object, x.node)));
    (a, b)
}

/// A random approximizer not in `b` that `b` still has room for.
pub fn addable<S: Scalar>(inst: &Instance<S>, b: &Allocation, rng: &mut impl Rng) -> Option<Approximizer> {
    let open: Vec<NodeId> = inst
        .caches()
        .iter()
        .copied()
        .filter(|&v| b.occupancy(v) < inst.topology().capacity(v).slots().unwrap_or(0))
        .collect();
    let candidates: Vec<Approximizer> = open
        .iter()
        .flat_map(|&v| (0..inst.objects()).map(move |o| Approximizer::new(o, v)))
        .filter(|x| !b.contains(x))
        .collect();
    (!candidates.is_empty()).then(|| candidates[rng.random_range(0..candidates.len())])
}

use simcache::continuum::{chain_objective, ChainSpec, RegionProfile};

/// Threshold-structure violations of a chain weight matrix: pairs of
/// regions where the more popular one is served further from the leaf,
/// plus any adjacent level pair sharing more than one fractional region.
pub fn threshold_violations(profile: &RegionProfile, spec: &ChainSpec, w: &[Vec<f64>], delta: f64) -> usize {
    let rates = profile.rates();
    let levels = |row: &Vec<f64>| -> (usize, usize) {
        let on: Vec<usize> = (0..row.len()).filter(|&j| row[j] > delta).collect();
        (on[0], *on.last().unwrap())
    };
    let span: Vec<(usize, usize)> = w.iter().map(levels).collect();
    let mut bad = 0;
    for a in 0..rates.len() {
        for b in 0..rates.len() {
            if rates[a] > rates[b] && span[a].1 > span[b].0 {
                bad += 1;
            }
        }
    }
    let active: Vec<usize> = (0..spec.levels()).filter(|&j| spec.hops[j].is_finite()).collect();
    for p in active.windows(2) {
        let shared = w.iter().filter(|row| row[p[0]] > delta && row[p[1]] > delta).count();
        bad += shared.saturating_sub(1);
    }
    bad
}

/// Moves a little mass of one region from level `i` to `j` and of another
/// from `j` to `i`; counts perturbations that lower the objective.
pub fn improving_swaps(
    profile: &RegionProfile,
    spec: &ChainSpec,
    w: &[Vec<f64>],
    trials: usize,
    rng: &mut impl Rng,
) -> usize {
    let base = chain_objective(profile, spec, w).unwrap();
    let active: Vec<usize> = (0..spec.levels()).filter(|&j| spec.hops[j].is_finite()).collect();
    if active.len() < 2 {
        return 0;
    }
    let m = w.len();
    let mut improving = 0;
    let mut done = 0;
    while done < trials {
        let i = active[rng.random_range(0..active.len() - 1)];
        let j = active[rng.random_range(active.iter().position(|&x| x == i).unwrap() + 1..active.len())];
        let (a, b) = (rng.random_range(0..m), rng.random_range(0..m));
        let eps = 10f64.powf(rng.random_range(-6.0..-2.0));
        let ea = eps.min(w[a][i]);
        let eb = (eps * rng.random_range(0.0..2.0)).min(w[b][j]);
        if ea == 0.0 && eb == 0.0 {
            continue;
        }
        let mut v = w.to_vec();
        v[a][i] -= ea;
        v[a][j] += ea;
        v[b][j] -= eb;
        v[b][i] += eb;
        let c = chain_objective(profile, spec, &v).unwrap();
        if c < base - 1e-10 * base.abs().max(1e-300) {
            improving += 1;
        }
        done += 1;
    }
    improving
}

/// Random profile of `m` regions with log-uniform rates.
pub fn random_profile(m: usize, rng: &mut impl Rng) -> RegionProfile {
    RegionProfile::new((0..m).map(|_| 10f64.powf(rng.random_range(-2.0..1.0))).collect()).unwrap()
}

/// Random chain of `n` levels ending at an unbounded repository.
pub fn random_chain(n: usize, gamma: f64, rng: &mut impl Rng) -> ChainSpec {
    let sizes: Vec<f64> = (0..n - 1).map(|_| rng.random_range(1.0..20.0)).collect();
    let mut hops = vec![0.0];
    for _ in 1..n {
        let last = *hops.last().unwrap();
        hops.push(last + rng.random_range(0.05..3.0));
    }
    ChainSpec::with_repository(&sizes, hops, gamma).unwrap()
}
