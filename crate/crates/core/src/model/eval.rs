//! Exact evaluation of an allocation: per-request serving choice, expected
//! cost and caching gain.

use std::collections::BTreeMap;

use super::allocation::Allocation;
use super::instance::{Choice, Instance, Route};
use super::kdtree::KdTree;
use super::space::{ObjectId, ObjectSpace};
use super::topology::NodeId;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Above this many objects at one node, lookups go through a kd-tree.
const INDEX_THRESHOLD: usize = 32;

/// Per-node view of an allocation prepared for repeated lookups.
pub struct AllocationIndex<'a, S> {
    instance: &'a Instance<S>,
    objects: BTreeMap<NodeId, Vec<ObjectId>>,
    trees: BTreeMap<NodeId, KdTree>,
}

impl<'a, S: Scalar> AllocationIndex<'a, S> {
    pub fn new(instance: &'a Instance<S>, allocation: &Allocation) -> Self {
        let objects = allocation.by_node();
        let mut trees = BTreeMap::new();
        if let ObjectSpace::Points(p) = instance.space() {
            if p.gamma() > 0.0 {
                for (&node, objs) in &objects {
                    if objs.len() >= INDEX_THRESHOLD {
                        trees.insert(node, KdTree::from_points(p, objs));
                    }
                }
            }
        }
        AllocationIndex {
            instance,
            objects,
            trees,
        }
    }

    /// Best approximizer of `object` stored at cache `node`, if any.
    pub fn best_at(&self, node: NodeId, object: ObjectId, hop: S, hops: u32) -> Option<Choice<S>> {
        let space = self.instance.space();
        let make = |o: ObjectId| Choice {
            cost: space.cost(object, o) + hop,
            hops,
            object: o,
            node,
            repository: false,
        };
        if let (Some(tree), ObjectSpace::Points(p)) = (self.trees.get(&node), space) {
            return tree.nearest(p.point(object), 1).first().map(|n| make(n.id));
        }
        self.objects
            .get(&node)?
            .iter()
            .map(|&o| make(o))
            .min_by(|a, b| a.key_cmp(b))
    }

    /// Serving choice for a routed request.
    pub fn serve(&self, route: &Route<S>) -> Choice<S> {
        let mut best = route.fallback;
        for stop in &route.stops {
            if stop.hop.total_cmp(&best.cost).is_gt() {
                // hop costs only grow along the path
                break;
            }
            if let Some(c) = self.best_at(stop.node, route.object, stop.hop, stop.hops) {
                if c.beats(&best) {
                    best = c;
                }
            }
        }
        best
    }
}

/// Cost and approximizer serving one request for `object` at `ingress`.
pub fn serve_cost<S: Scalar>(
    instance: &Instance<S>,
    object: ObjectId,
    ingress: NodeId,
    allocation: &Allocation,
) -> Result<Choice<S>> {
    allocation.check_feasible(instance.topology(), instance.objects())?;
    let route = instance.route(object, ingress)?;
    let choice = AllocationIndex::new(instance, allocation).serve(&route);
    if choice.cost.is_infinite() {
        return Err(Error::Unservable { object, ingress });
    }
    Ok(choice)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Assignment<S> {
    pub object: ObjectId,
    pub ingress: NodeId,
    pub rate: S,
    pub choice: Choice<S>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CostBreakdown<S> {
    pub total: S,
    pub approximation: S,
    pub retrieval: S,
    /// Request rate served by each node, repositories included.
    pub served_rate: BTreeMap<NodeId, S>,
    pub assignments: Vec<Assignment<S>>,
}

fn require_discrete<S: Scalar>(instance: &Instance<S>) -> Result<()> {
    match instance.demand() {
        super::demand::Demand::Discrete(_) => Ok(()),
        super::demand::Demand::Regions(_) => Err(Error::invalid(
            "region demand has no discrete cost; use the continuum solvers",
        )),
    }
}

/// Expected cost per unit time, split into approximation and retrieval.
pub fn expected_cost<S: Scalar>(
    instance: &Instance<S>,
    allocation: &Allocation,
) -> Result<CostBreakdown<S>> {
    require_discrete(instance)?;
    allocation.check_feasible(instance.topology(), instance.objects())?;
    let index = AllocationIndex::new(instance, allocation);
    let mut approximation = S::zero();
    let mut retrieval = S::zero();
    let mut served_rate: BTreeMap<NodeId, S> = BTreeMap::new();
    let mut assignments = Vec::with_capacity(instance.requests().len());
    for r in instance.requests() {
        let choice = index.serve(&r.route);
        if choice.cost.is_infinite() {
            return Err(Error::Unservable {
                object: r.object,
                ingress: r.ingress,
            });
        }
        let hop = instance.topology().hop(r.ingress, choice.node);
        approximation = approximation + r.rate * (choice.cost - hop);
        retrieval = retrieval + r.rate * hop;
        let e = served_rate.entry(choice.node).or_insert_with(S::zero);
        *e = *e + r.rate;
        assignments.push(Assignment {
            object: r.object,
            ingress: r.ingress,
            rate: r.rate,
            choice,
        });
    }
    Ok(CostBreakdown {
        total: approximation + retrieval,
        approximation,
        retrieval,
        served_rate,
        assignments,
    })
}

/// `Σ λ_r · C(r, A)` without the breakdown.
pub fn total_cost<S: Scalar>(instance: &Instance<S>, allocation: &Allocation) -> Result<S> {
    require_discrete(instance)?;
    allocation.check_feasible(instance.topology(), instance.objects())?;
    let index = AllocationIndex::new(instance, allocation);
    Ok(instance
        .requests()
        .iter()
        .map(|r| r.rate * index.serve(&r.route).cost)
        .sum())
}

/// `G(A) = 𝒞(∅) − 𝒞(A)`.
pub fn caching_gain<S: Scalar>(instance: &Instance<S>, allocation: &Allocation) -> Result<S> {
    require_discrete(instance)?;
    let empty = instance.empty_cost();
    if empty.is_infinite() {
        return Err(Error::instance("cost of the empty allocation is infinite"));
    }
    Ok(empty - total_cost(instance, allocation)?)
}
