use std::collections::{HashMap, HashSet};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::greedy::{greedy_place, greedy_place_constrained, GreedyResult};
use super::state::{Admissible, Move, PlacementState};
use crate::error::{Error, Result};
use crate::model::{Allocation, Approximizer, Instance, NodeId, ObjectId};
use crate::scalar::Scalar;
use crate::workload::RequestTrace;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopRule {
    /// Process this many requests.
    Iterations(usize),
    /// Visit every request class this many times (trace mode: replay the
    /// trace this many times).
    Sweeps(usize),
    /// Request-driven passes until one makes no swap, then passes over every
    /// (object, cache) replacement until one finds no improvement. Each
    /// phase gives up after `max_sweeps` passes.
    Converged { max_sweeps: usize },
}

#[derive(Clone, Copy, Debug)]
pub enum RequestSource<'t> {
    /// Requests drawn in proportion to the demand rates.
    Emulated { seed: u64 },
    Trace(&'t RequestTrace),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SwapTraceEntry<S> {
    pub iteration: usize,
    /// `(object, ingress)` of the triggering request; `None` during the
    /// final neighbourhood sweeps.
    pub request: Option<(ObjectId, NodeId)>,
    pub inserted: Approximizer,
    pub replaced: Option<Approximizer>,
    pub delta: S,
    pub cost: S,
}

#[derive(Clone, Debug)]
pub struct LocalSwapResult<S> {
    pub allocation: Allocation,
    pub swaps: Vec<SwapTraceEntry<S>>,
    pub cost: S,
    pub iterations: usize,
    /// True when the result was certified locally optimal.
    pub converged: bool,
}

struct Runner<'a, 'c, S> {
    state: PlacementState<'a, S>,
    admissible: Option<Admissible<'c>>,
    swaps: Vec<SwapTraceEntry<S>>,
    iteration: usize,
}

impl<'a, 'c, S: Scalar> Runner<'a, 'c, S> {
    /// One LocalSwap step for a request of `object` whose path crosses `nodes`.
    fn step(&mut self, request: Option<(ObjectId, NodeId)>, object: ObjectId, nodes: &[NodeId]) -> Result<bool> {
        self.iteration += 1;
        let Some(m) = self.state.best_move(object, nodes.iter().copied(), self.admissible) else {
            return Ok(false);
        };
        if !self.state.improves(&m) {
            return Ok(false);
        }
        let cost = self.state.apply(&m)?;
        self.swaps.push(SwapTraceEntry {
            iteration: self.iteration,
            request,
            inserted: m.insert,
            replaced: m.evict,
            delta: m.delta,
            cost,
        });
        Ok(true)
    }

    /// Pass over every object at every cache; returns the number of swaps.
    fn neighbourhood_sweep(&mut self, rng: &mut ChaCha8Rng) -> Result<usize> {
        let caches = self.state.instance().caches().to_vec();
        let mut order: Vec<ObjectId> = (0..self.state.instance().objects()).collect();
        order.shuffle(rng);
        let mut swaps = 0;
        for o in order {
            if self.step(None, o, &caches)? {
                swaps += 1;
            }
        }
        Ok(swaps)
    }
}

/// LocalSwap from `init`, driven by emulated requests or a trace.
pub fn local_swap<S: Scalar>(
    instance: &Instance<S>,
    init: &Allocation,
    source: RequestSource<'_>,
    stop: StopRule,
) -> Result<LocalSwapResult<S>> {
    run(instance, init, source, stop, None)
}

/// LocalSwap restricted to insertions allowed by `admissible`.
pub fn constrained_local_swap<S: Scalar>(
    instance: &Instance<S>,
    init: &Allocation,
    source: RequestSource<'_>,
    stop: StopRule,
    admissible: Admissible<'_>,
) -> Result<LocalSwapResult<S>> {
    check_constraint(instance, admissible)?;
    if let Some(a) = init.iter().find(|a| !admissible(a.node, a.object)) {
        return Err(Error::InvalidConstraint(format!(
            "initial allocation holds {a}, which the constraint forbids"
        )));
    }
    run(instance, init, source, stop, Some(admissible))
}

/// Every cache must admit at least as many objects as it has slots.
pub fn check_constraint<S: Scalar>(instance: &Instance<S>, admissible: Admissible<'_>) -> Result<()> {
    for &node in instance.caches() {
        let k = instance.topology().capacity(node).slots().unwrap_or(0);
        let allowed = (0..instance.objects()).filter(|&o| admissible(node, o)).take(k).count();
        if allowed < k {
            return Err(Error::InvalidConstraint(format!(
                "cache {node} has {k} slots but admits only {allowed} objects"
            )));
        }
    }
    Ok(())
}

fn run<S: Scalar>(
    instance: &Instance<S>,
    init: &Allocation,
    source: RequestSource<'_>,
    stop: StopRule,
    admissible: Option<Admissible<'_>>,
) -> Result<LocalSwapResult<S>> {
    let mut runner = Runner {
        state: PlacementState::new(instance, init)?,
        admissible,
        swaps: Vec::new(),
        iteration: 0,
    };
    let seed = match source {
        RequestSource::Emulated { seed } => seed,
        RequestSource::Trace(t) => t.seed.unwrap_or(0),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut converged = false;

    match source {
        RequestSource::Emulated { .. } => {
            let requests = instance.requests();
            if requests.is_empty() {
                return Err(Error::NoProgress {
                    attempts: 0,
                    reason: "demand has no request with positive rate".into(),
                });
            }
            let stops: Vec<Vec<NodeId>> = requests
                .iter()
                .map(|r| r.stops.iter().map(|s| s.node).collect())
                .collect();
            let class_sweep = |runner: &mut Runner<'_, '_, S>, rng: &mut ChaCha8Rng| -> Result<usize> {
                let mut order: Vec<usize> = (0..requests.len()).collect();
                order.shuffle(rng);
                let mut swaps = 0;
                for r in order {
                    let req = &requests[r];
                    if runner.step(Some((req.object, req.ingress)), req.object, &stops[r])? {
                        swaps += 1;
                    }
                }
                Ok(swaps)
            };
            match stop {
                StopRule::Iterations(n) => {
                    let weights: Vec<f64> = requests.iter().map(|r| r.rate.to_f64()).collect();
                    let dist = WeightedIndex::new(&weights).map_err(|e| Error::NoProgress {
                        attempts: 0,
                        reason: format!("cannot sample requests: {e}"),
                    })?;
                    for _ in 0..n {
                        let r = dist.sample(&mut rng);
                        let req = &requests[r];
                        runner.step(Some((req.object, req.ingress)), req.object, &stops[r])?;
                    }
                }
                StopRule::Sweeps(n) => {
                    for _ in 0..n {
                        class_sweep(&mut runner, &mut rng)?;
                    }
                }
                StopRule::Converged { max_sweeps } => {
                    let mut sweeps = 0;
                    let mut clean = false;
                    while sweeps < max_sweeps {
                        sweeps += 1;
                        if class_sweep(&mut runner, &mut rng)? == 0 {
                            clean = true;
                            break;
                        }
                    }
                    // a clean pass that tried every object at every cache
                    // already certifies local optimality
                    let mut pairs = HashSet::new();
                    for (r, nodes) in stops.iter().enumerate() {
                        for &n in nodes {
                            pairs.insert((requests[r].object, n));
                        }
                    }
                    let full = pairs.len() == instance.objects() * instance.caches().len();
                    converged = if clean && full {
                        true
                    } else {
                        finish(&mut runner, &mut rng, max_sweeps)?
                    };
                }
            }
        }
        RequestSource::Trace(trace) => {
            trace.check_objects(instance.objects(), instance.nodes())?;
            let mut routes: HashMap<(ObjectId, NodeId), Vec<NodeId>> = HashMap::new();
            let mut replay = |runner: &mut Runner<'_, '_, S>, limit: usize| -> Result<usize> {
                let mut done = 0;
                for e in trace.events.iter().take(limit) {
                    let nodes = match routes.get(&(e.object, e.ingress)) {
                        Some(n) => n,
                        None => {
                            let route = instance.route(e.object, e.ingress)?;
                            routes
                                .entry((e.object, e.ingress))
                                .or_insert(route.stops.iter().map(|s| s.node).collect())
                        }
                    };
                    runner.step(Some((e.object, e.ingress)), e.object, nodes)?;
                    done += 1;
                }
                Ok(done)
            };
            match stop {
                StopRule::Iterations(n) => {
                    let mut left = n;
                    while left > 0 && !trace.is_empty() {
                        left -= replay(&mut runner, left)?;
                    }
                }
                StopRule::Sweeps(n) => {
                    for _ in 0..n {
                        replay(&mut runner, usize::MAX)?;
                    }
                }
                StopRule::Converged { max_sweeps } => {
                    replay(&mut runner, usize::MAX)?;
                    converged = finish(&mut runner, &mut rng, max_sweeps)?;
                }
            }
        }
    }

    Ok(LocalSwapResult {
        allocation: runner.state.allocation(),
        cost: runner.state.cost(),
        iterations: runner.iteration,
        swaps: runner.swaps,
        converged,
    })
}

/// Neighbourhood sweeps until one finds nothing to improve.
fn finish<S: Scalar>(runner: &mut Runner<'_, '_, S>, rng: &mut ChaCha8Rng, max_sweeps: usize) -> Result<bool> {
    for _ in 0..max_sweeps.max(1) {
        if runner.neighbourhood_sweep(rng)? == 0 {
            return Ok(true);
        }
    }
    log::warn!("local swap stopped after {max_sweeps} sweeps without certifying local optimality");
    Ok(false)
}

/// Whether no single replacement at a single cache strictly lowers the
/// cost; otherwise the best improving move.
pub fn is_locally_optimal<S: Scalar>(
    instance: &Instance<S>,
    allocation: &Allocation,
) -> Result<(bool, Option<Move<S>>)> {
    locally_optimal_within(instance, allocation, None)
}

/// As [`is_locally_optimal`], over the moves allowed by `admissible`.
pub fn locally_optimal_within<S: Scalar>(
    instance: &Instance<S>,
    allocation: &Allocation,
    admissible: Option<Admissible<'_>>,
) -> Result<(bool, Option<Move<S>>)> {
    let state = PlacementState::new(instance, allocation)?;
    let mut witness: Option<Move<S>> = None;
    for object in 0..instance.objects() {
        if let Some(m) = state.best_move(object, instance.caches().iter().copied(), admissible) {
            if state.improves(&m) && witness.is_none_or(|w| m.delta < w.delta) {
                witness = Some(m);
            }
        }
    }
    Ok((witness.is_none(), witness))
}

#[derive(Clone, Debug)]
pub struct CascadeResult<S> {
    pub greedy: GreedyResult<S>,
    pub swap: LocalSwapResult<S>,
}

impl<S: Scalar> CascadeResult<S> {
    pub fn allocation(&self) -> &Allocation {
        &self.swap.allocation
    }

    pub fn cost(&self) -> S {
        self.swap.cost
    }
}

/// Greedy followed by LocalSwap run to convergence.
pub fn cascade_place<S: Scalar>(instance: &Instance<S>, seed: u64, max_sweeps: usize) -> Result<CascadeResult<S>> {
    let greedy = greedy_place(instance)?;
    let swap = local_swap(
        instance,
        &greedy.allocation,
        RequestSource::Emulated { seed },
        StopRule::Converged { max_sweeps },
    )?;
    Ok(CascadeResult { greedy, swap })
}

/// Constrained greedy followed by constrained LocalSwap to convergence.
pub fn cascade_place_constrained<S: Scalar>(
    instance: &Instance<S>,
    admissible: Admissible<'_>,
    seed: u64,
    max_sweeps: usize,
) -> Result<CascadeResult<S>> {
    check_constraint(instance, admissible)?;
    let greedy = greedy_place_constrained(instance, Some(admissible))?;
    let swap = constrained_local_swap(
        instance,
        &greedy.allocation,
        RequestSource::Emulated { seed },
        StopRule::Converged { max_sweeps },
        admissible,
    )?;
    Ok(CascadeResult { greedy, swap })
}
