//! Ready-made instances for the tandem experiments and the per-method
//! runners the harness and the end-to-end tests share.
//!
//! Every tandem here is a chain `leaf (0) → parent (1) → repository (2)`.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::continuum::{chain_threshold_solve, tandem_uniform_analytic, ChainSpec, RegionProfile, UniformTandem};
use crate::error::{Error, Result};
use crate::model::{
    expected_cost, Allocation, Capacity, CostMatrix, Demand, Instance, Metric, NodeId, ObjectId, ObjectSpace,
    PointSet, RateEntry, Topology,
};
use crate::offline::{greedy_place, local_swap, RequestSource, StopRule};
use crate::online::{netduel_run, NetDuelConfig};
use crate::workload::{gaussian_grid_rates, sample_trace, EmbeddingCatalog, Horizon};

pub const LEAF: NodeId = 0;
pub const PARENT: NodeId = 1;
pub const REPOSITORY: NodeId = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Greedy,
    LocalSwap,
    Continuous,
    NetDuel,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Greedy, Method::LocalSwap, Method::Continuous, Method::NetDuel];

    pub fn name(self) -> &'static str {
        match self {
            Method::Greedy => "greedy",
            Method::LocalSwap => "localswap",
            Method::Continuous => "continuous",
            Method::NetDuel => "netduel",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown method {s:?} (greedy | localswap | continuous | netduel)")))
    }
}

/// Who serves a region's (leaf) requests.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Owner {
    Leaf,
    Parent,
    Repository,
}

impl Owner {
    pub fn name(self) -> &'static str {
        match self {
            Owner::Leaf => "leaf",
            Owner::Parent => "parent",
            Owner::Repository => "repository",
        }
    }

    fn of_node(node: NodeId) -> Owner {
        match node {
            LEAF => Owner::Leaf,
            PARENT => Owner::Parent,
            _ => Owner::Repository,
        }
    }
}

/// Knobs for the discrete and online methods.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSettings {
    pub seed: u64,
    /// Pass budget for LocalSwap run to convergence.
    pub max_sweeps: usize,
    pub netduel: NetDuelConfig,
    /// Length of the sampled trace NetDuel replays.
    pub netduel_requests: usize,
}

impl Default for MethodSettings {
    fn default() -> Self {
        MethodSettings {
            seed: 1,
            max_sweeps: 200,
            netduel: NetDuelConfig::default(),
            netduel_requests: 1_000_000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MethodRun {
    pub method: Method,
    pub cost: f64,
    /// `None` for the continuous model.
    pub allocation: Option<Allocation>,
    /// Owner of each object's leaf requests (each object is one region).
    pub owners: Vec<Owner>,
}

/// Owner of every leaf request class under a discrete allocation.
pub fn leaf_owners(inst: &Instance<f64>, allocation: &Allocation) -> Result<(f64, Vec<Owner>)> {
    let b = expected_cost(inst, allocation)?;
    let mut owners = vec![Owner::Repository; inst.objects()];
    for a in b.assignments.iter().filter(|a| a.ingress == LEAF) {
        owners[a.object] = Owner::of_node(a.choice.node);
    }
    Ok((b.total, owners))
}

/// Leaf-only Gaussian demand over an `L × L` norm-1 grid, two caches of
/// `k` slots, hop `h` between them and `repository_cost` to the repository.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridTandem {
    pub side: usize,
    pub sigma: f64,
    pub k: usize,
    pub h: f64,
    pub repository_cost: f64,
    pub gamma: f64,
}

impl GridTandem {
    pub fn new(side: usize, sigma: f64, k: usize, h: f64) -> Self {
        GridTandem {
            side,
            sigma,
            k,
            h,
            repository_cost: 1000.0,
            gamma: 1.0,
        }
    }

    pub fn rates(&self) -> Result<Vec<f64>> {
        gaussian_grid_rates(self.side, self.sigma, 1.0)
    }

    pub fn instance(&self) -> Result<Instance<f64>> {
        let space = ObjectSpace::Points(PointSet::grid(self.side, Metric::Norm1, self.gamma)?);
        let topology = Topology::chain(
            vec![Capacity::Slots(self.k), Capacity::Slots(self.k), Capacity::Unbounded],
            vec![self.h, self.repository_cost],
        )?;
        let demand = Demand::from_rates_at(&self.rates()?, LEAF);
        let n = self.side * self.side;
        Instance::new(space, topology, demand, (0..n).map(|o| (o, REPOSITORY)).collect())
    }

    /// The same tandem in the continuous model, one unit region per object.
    pub fn chain(&self) -> Result<ChainSpec> {
        let k = self.k as f64;
        ChainSpec::with_repository(&[k, k], vec![0.0, self.h, self.h + self.repository_cost], self.gamma)
    }

    pub fn profile(&self) -> Result<RegionProfile> {
        RegionProfile::new(self.rates()?)
    }

    /// Runs one method; `inst` must come from [`GridTandem::instance`].
    pub fn run(&self, inst: &Instance<f64>, method: Method, settings: &MethodSettings) -> Result<MethodRun> {
        match method {
            Method::Continuous => {
                let sol = chain_threshold_solve(&self.profile()?, &self.chain()?)?;
                // a region belongs to the parent when it takes the larger share
                let owners = sol
                    .weights
                    .iter()
                    .map(|w| {
                        if w[2] > w[0].max(w[1]) {
                            Owner::Repository
                        } else if w[1] > w[0] {
                            Owner::Parent
                        } else {
                            Owner::Leaf
                        }
                    })
                    .collect();
                Ok(MethodRun {
                    method,
                    cost: sol.cost,
                    allocation: None,
                    owners,
                })
            }
            _ => {
                let allocation = discrete_run(inst, method, settings)?;
                let (cost, owners) = leaf_owners(inst, &allocation)?;
                Ok(MethodRun {
                    method,
                    cost,
                    allocation: Some(allocation),
                    owners,
                })
            }
        }
    }
}

/// Greedy, LocalSwap (from the empty allocation, run to convergence) or
/// NetDuel (from empty, replaying a sampled trace).
pub fn discrete_run(inst: &Instance<f64>, method: Method, settings: &MethodSettings) -> Result<Allocation> {
    match method {
        Method::Greedy => Ok(greedy_place(inst)?.allocation),
        Method::LocalSwap => Ok(local_swap(
            inst,
            &Allocation::new(),
            RequestSource::Emulated { seed: settings.seed },
            StopRule::Converged {
                max_sweeps: settings.max_sweeps,
            },
        )?
        .allocation),
        Method::NetDuel => {
            let trace = sample_trace(inst.demand(), Horizon::Requests(settings.netduel_requests), settings.seed)?;
            Ok(netduel_run(inst, &Allocation::new(), &trace, settings.netduel.clone())?.allocation)
        }
        Method::Continuous => Err(Error::invalid("the continuous model has no discrete allocation")),
    }
}

/// Uniform demand at both leaf and parent over an `L × L` norm-1 torus with
/// `L = 2R² + 2R + 1`: radius-`R` diamonds tile it exactly with `L` balls,
/// so each cache gets `k = L` slots and borders play no role.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusTandem {
    pub ball_radius: usize,
    pub gamma: f64,
    pub h: f64,
    pub repository_cost: f64,
    /// Request rate per object at the leaf and at the parent.
    pub leaf_rate: f64,
    pub parent_rate: f64,
}

impl TorusTandem {
    pub fn new(ball_radius: usize, gamma: f64, h: f64) -> Self {
        TorusTandem {
            ball_radius,
            gamma,
            h,
            repository_cost: 1e6,
            leaf_rate: 1.0,
            parent_rate: 1.0,
        }
    }

    pub fn side(&self) -> usize {
        2 * self.ball_radius * self.ball_radius + 2 * self.ball_radius + 1
    }

    pub fn k(&self) -> usize {
        self.side()
    }

    pub fn area(&self) -> f64 {
        (self.side() * self.side()) as f64
    }

    /// Torus norm-1 costs `d^γ`.
    pub fn space(&self) -> Result<ObjectSpace<f64>> {
        let l = self.side();
        let n = l * l;
        let wrap = |a: usize, b: usize| {
            let d = a.abs_diff(b);
            d.min(l - d)
        };
        // costs only depend on the offset, so tabulate d^γ once
        let table: Vec<f64> = (0..=l).map(|d| (d as f64).powf(self.gamma)).collect();
        let mut data = Vec::with_capacity(n * n);
        for x in 0..n {
            let (xa, xb) = (x % l, x / l);
            for y in 0..n {
                data.push(table[wrap(xa, y % l) + wrap(xb, y / l)]);
            }
        }
        if self.gamma == 0.0 {
            for x in 0..n {
                data[x * n + x] = 0.0;
            }
        }
        Ok(ObjectSpace::Matrix(CostMatrix::new(n, data)?))
    }

    pub fn instance(&self) -> Result<Instance<f64>> {
        self.instance_with(self.space()?)
    }

    /// Builds the instance over a precomputed [`TorusTandem::space`] (it
    /// does not depend on `h`).
    pub fn instance_with(&self, space: ObjectSpace<f64>) -> Result<Instance<f64>> {
        let n = space.len();
        if n != self.side() * self.side() {
            return Err(Error::invalid("space does not match the torus size"));
        }
        let k = self.k();
        let topology = Topology::chain(
            vec![Capacity::Slots(k), Capacity::Slots(k), Capacity::Unbounded],
            vec![self.h, self.repository_cost],
        )?;
        let mut entries = Vec::with_capacity(2 * n);
        for object in 0..n {
            entries.push(RateEntry {
                object,
                ingress: LEAF,
                rate: self.leaf_rate,
            });
            entries.push(RateEntry {
                object,
                ingress: PARENT,
                rate: self.parent_rate,
            });
        }
        Instance::new(space, topology, Demand::Discrete(entries), (0..n).map(|o| (o, REPOSITORY)).collect())
    }

    pub fn analytic(&self) -> Result<UniformTandem> {
        tandem_uniform_analytic(
            self.k() as f64,
            self.h,
            self.gamma,
            self.area(),
            self.leaf_rate,
            self.parent_rate,
        )
    }
}

/// Share of the leaf's request rate served by the parent.
pub fn forwarded_share(inst: &Instance<f64>, allocation: &Allocation) -> Result<f64> {
    let b = expected_cost(inst, allocation)?;
    let (mut fwd, mut all) = (0.0, 0.0);
    for a in b.assignments.iter().filter(|a| a.ingress == LEAF) {
        all += a.rate;
        if a.choice.node != LEAF {
            fwd += a.rate;
        }
    }
    Ok(if all > 0.0 { fwd / all } else { 0.0 })
}

/// `points` hop costs evenly spaced over `[0, 2·onset]`.
pub fn onset_sweep(onset: f64, points: usize) -> Vec<f64> {
    let steps = points.saturating_sub(1).max(1) as f64;
    (0..points).map(|i| 2.0 * onset * i as f64 / steps).collect()
}

/// First swept hop cost from which the forwarded share stays at or below
/// `threshold` for the rest of the sweep (`hs` ascending).
pub fn discrete_onset(hs: &[f64], shares: &[f64], threshold: f64) -> Option<f64> {
    let mut onset = None;
    for (&h, &s) in hs.iter().zip(shares).rev() {
        if s > threshold {
            break;
        }
        onset = Some(h);
    }
    onset
}

/// Tandem over an embedding catalog: leaf requests at the empirical item
/// frequencies, cost `d^γ` in the Euclidean embedding.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTandem {
    pub k_leaf: usize,
    pub k_parent: usize,
    pub h: f64,
    pub repository_cost: f64,
    pub gamma: f64,
}

impl EmbeddingTandem {
    pub fn instance(&self, catalog: &EmbeddingCatalog) -> Result<Instance<f64>> {
        let total: u64 = catalog.counts.iter().sum();
        if total == 0 {
            return Err(Error::invalid("catalog has no recorded requests"));
        }
        let rates: Vec<f64> = catalog.counts.iter().map(|&c| c as f64 / total as f64).collect();
        let topology = Topology::chain(
            vec![
                Capacity::Slots(self.k_leaf),
                Capacity::Slots(self.k_parent),
                Capacity::Unbounded,
            ],
            vec![self.h, self.repository_cost],
        )?;
        Instance::new(
            ObjectSpace::Points(catalog.space(self.gamma)?),
            topology,
            Demand::from_rates_at(&rates, LEAF),
            (0..catalog.len()).map(|o| (o, REPOSITORY)).collect(),
        )
    }
}

/// Leaf admits items closer than `d_star` to the barycenter, the parent
/// the others.
pub fn barycenter_split(catalog: &EmbeddingCatalog, d_star: f64) -> impl Fn(NodeId, ObjectId) -> bool + Sync {
    let near: Vec<bool> = (0..catalog.len())
        .map(|i| catalog.distance_to_barycenter(i) < d_star)
        .collect();
    move |node, object| match node {
        LEAF => near[object],
        PARENT => !near[object],
        _ => true,
    }
}

/// `points` split distances strictly inside the range that leaves at least
/// `k_leaf` items below and `k_parent` items above the split.
pub fn d_star_grid(catalog: &EmbeddingCatalog, k_leaf: usize, k_parent: usize, points: usize) -> Result<Vec<f64>> {
    let mut d: Vec<f64> = (0..catalog.len()).map(|i| catalog.distance_to_barycenter(i)).collect();
    d.sort_by(f64::total_cmp);
    let n = d.len();
    if k_leaf == 0 || k_leaf + k_parent > n || points == 0 {
        return Err(Error::invalid("catalog too small for the requested split"));
    }
    // the split must sit above the k_leaf-th and at or below the (n−k_parent)-th distance
    let lo = d[k_leaf - 1];
    let hi = d[n - k_parent];
    if !(hi > lo) {
        return Err(Error::invalid("no distance split satisfies both cache sizes"));
    }
    Ok((1..=points)
        .map(|i| lo + (hi - lo) * i as f64 / (points + 1) as f64)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn torus_tiles_exactly() {
        let t = TorusTandem::new(1, 1.0, 0.0);
        assert_eq!((t.side(), t.k()), (5, 5));
        let ObjectSpace::Matrix(m) = t.space().unwrap() else { panic!() };
        // (0,0) to (4,4) wraps to distance 2
        assert_eq!(m.get(0, 24), 2.0);
        assert_eq!(m.get(0, 12), 4.0);
    }

    #[test]
    fn grid_owner_labels() {
        let g = GridTandem::new(6, 2.0, 3, 0.5);
        let inst = g.instance().unwrap();
        let run = g.run(&inst, Method::Greedy, &MethodSettings::default()).unwrap();
        assert_eq!(run.owners.len(), 36);
        assert!(run.owners.contains(&Owner::Leaf));
        let cont = g.run(&inst, Method::Continuous, &MethodSettings::default()).unwrap();
        assert_eq!(cont.owners.len(), 36);
        assert!(cont.cost > 0.0);
    }

    #[test]
    fn onset_is_the_start_of_the_quiet_tail() {
        let hs = onset_sweep(1.0, 5);
        assert_eq!(hs, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        assert_eq!(discrete_onset(&hs, &[0.5, 0.0, 0.2, 0.0, 0.0], 0.01), Some(1.5));
        assert_eq!(discrete_onset(&hs, &[0.5, 0.4, 0.2, 0.1, 0.3], 0.01), None);
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("lru".parse::<Method>().is_err());
    }
}
