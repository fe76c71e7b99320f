use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};

use super::demand::Demand;
use super::kdtree::KdTree;
use super::space::{ObjectId, ObjectSpace};
use super::topology::{NodeId, Topology};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Candidate way of serving a request. Ordered by cost, then hop count,
/// then object id.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Choice<S> {
    pub cost: S,
    pub hops: u32,
    pub object: ObjectId,
    pub node: NodeId,
    pub repository: bool,
}

impl<S: Scalar> Choice<S> {
    #[inline]
    pub fn key_cmp(&self, other: &Self) -> Ordering {
        self.cost
            .total_cmp(&other.cost)
            .then(self.hops.cmp(&other.hops))
            .then(self.object.cmp(&other.object))
            .then(self.node.cmp(&other.node))
    }

    #[inline]
    pub fn beats(&self, other: &Self) -> bool {
        self.key_cmp(other) == Ordering::Less
    }
}

/// A cache on a request's forwarding path.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathStop<S> {
    pub node: NodeId,
    /// Retrieval cost `h(ingress, node)`.
    pub hop: S,
    /// Position along the path, 0 for the ingress.
    pub hops: u32,
}

/// A routed request class.
#[derive(Clone, Debug, PartialEq)]
pub struct Route<S> {
    pub object: ObjectId,
    pub ingress: NodeId,
    pub path: Vec<NodeId>,
    /// Caches along the path, in path order.
    pub stops: Vec<PathStop<S>>,
    /// Best repository approximizer on the path.
    pub fallback: Choice<S>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Request<S> {
    pub route: Route<S>,
    pub rate: S,
}

impl<S> std::ops::Deref for Request<S> {
    type Target = Route<S>;

    fn deref(&self) -> &Route<S> {
        &self.route
    }
}

/// Full problem statement: object space, network, demand and repository
/// seeds. Immutable once built.
#[derive(Debug)]
pub struct Instance<S> {
    space: ObjectSpace<S>,
    topology: Topology<S>,
    demand: Demand<S>,
    repositories: Vec<(ObjectId, NodeId)>,
    holds: HashSet<(NodeId, ObjectId)>,
    seeds_at: BTreeMap<NodeId, Vec<ObjectId>>,
    seed_index: BTreeMap<NodeId, KdTree>,
    requests: Vec<Request<S>>,
    caches: Vec<NodeId>,
}

impl<S: Scalar> Instance<S> {
    pub fn new(
        space: ObjectSpace<S>,
        topology: Topology<S>,
        demand: Demand<S>,
        repositories: Vec<(ObjectId, NodeId)>,
    ) -> Result<Self> {
        let objects = space.len();
        let nodes = topology.len();
        if objects == 0 {
            return Err(Error::instance("object space is empty"));
        }
        demand.validate(objects, nodes)?;

        let mut holds = HashSet::new();
        let mut seeds_at: BTreeMap<NodeId, Vec<ObjectId>> = BTreeMap::new();
        let mut has_repo = vec![false; objects];
        for &(o, v) in &repositories {
            if o >= objects || v >= nodes {
                return Err(Error::instance(format!("repository seed ({o}, {v}) out of range")));
            }
            if !topology.capacity(v).is_repository() {
                return Err(Error::instance(format!(
                    "node {v} holds seed {o} but is not marked as a repository"
                )));
            }
            if holds.insert((v, o)) {
                seeds_at.entry(v).or_default().push(o);
            }
            has_repo[o] = true;
        }
        if let Some(o) = has_repo.iter().position(|h| !h) {
            return Err(Error::instance(format!("object {o} has no authoritative repository")));
        }
        for objs in seeds_at.values_mut() {
            objs.sort_unstable();
        }

        let mut seed_index = BTreeMap::new();
        if let ObjectSpace::Points(p) = &space {
            if p.gamma() > 0.0 {
                for (&v, objs) in &seeds_at {
                    if objs.len() < objects && objs.len() > 32 {
                        seed_index.insert(v, KdTree::from_points(p, objs));
                    }
                }
            }
        }

        let mut inst = Instance {
            space,
            caches: topology.caches(),
            topology,
            demand,
            repositories,
            holds,
            seeds_at,
            seed_index,
            requests: Vec::new(),
        };

        if let Demand::Discrete(entries) = &inst.demand {
            let mut merged: BTreeMap<(ObjectId, NodeId), S> = BTreeMap::new();
            for e in entries {
                let slot = merged.entry((e.object, e.ingress)).or_insert_with(S::zero);
                *slot = *slot + e.rate;
            }
            let mut requests = Vec::with_capacity(merged.len());
            for ((object, ingress), rate) in merged {
                if rate > S::zero() {
                    requests.push(Request {
                        route: inst.route(object, ingress)?,
                        rate,
                    });
                }
            }
            inst.requests = requests;
        }
        Ok(inst)
    }

    pub fn space(&self) -> &ObjectSpace<S> {
        &self.space
    }

    pub fn topology(&self) -> &Topology<S> {
        &self.topology
    }

    pub fn demand(&self) -> &Demand<S> {
        &self.demand
    }

    pub fn repositories(&self) -> &[(ObjectId, NodeId)] {
        &self.repositories
    }

    pub fn objects(&self) -> usize {
        self.space.len()
    }

    pub fn nodes(&self) -> usize {
        self.topology.len()
    }

    /// Cache nodes with at least one slot.
    pub fn caches(&self) -> &[NodeId] {
        &self.caches
    }

    /// Request classes with positive rate, ordered by `(object, ingress)`.
    pub fn requests(&self) -> &[Request<S>] {
        &self.requests
    }

    pub fn is_repository_of(&self, node: NodeId, object: ObjectId) -> bool {
        self.holds.contains(&(node, object))
    }

    /// Routes a request and finds its best repository approximizer.
    pub fn route(&self, object: ObjectId, ingress: NodeId) -> Result<Route<S>> {
        if object >= self.objects() {
            return Err(Error::invalid(format!("unknown object {object}")));
        }
        let path = self
            .topology
            .path(ingress, object, |v, o| self.holds.contains(&(v, o)))?;
        let mut stops = Vec::new();
        let mut fallback: Option<Choice<S>> = None;
        let mut last_hop = S::zero();
        for (pos, &v) in path.iter().enumerate() {
            let hop = self.topology.hop(ingress, v);
            if hop.is_infinite() {
                return Err(Error::instance(format!(
                    "node {v} on the path of object {object} is unreachable from {ingress}"
                )));
            }
            if hop < last_hop {
                return Err(Error::instance(format!(
                    "retrieval cost decreases along the path of object {object} at node {v}"
                )));
            }
            last_hop = hop;
            let hops = pos as u32;
            if self.topology.capacity(v).is_repository() {
                if let Some(c) = self.best_seed_at(v, object, hop, hops) {
                    if fallback.as_ref().is_none_or(|f| c.beats(f)) {
                        fallback = Some(c);
                    }
                }
            } else if self.topology.capacity(v).slots().unwrap_or(0) > 0 {
                stops.push(PathStop { node: v, hop, hops });
            }
        }
        let fallback = fallback.ok_or(Error::Unservable { object, ingress })?;
        if fallback.cost.is_infinite() {
            return Err(Error::instance(format!(
                "request for object {object} at node {ingress} has infinite repository cost"
            )));
        }
        Ok(Route {
            object,
            ingress,
            path,
            stops,
            fallback,
        })
    }

    fn best_seed_at(&self, v: NodeId, object: ObjectId, hop: S, hops: u32) -> Option<Choice<S>> {
        if self.holds.contains(&(v, object)) {
            return Some(Choice {
                cost: hop,
                hops,
                object,
                node: v,
                repository: true,
            });
        }
        let seeds = self.seeds_at.get(&v)?;
        if let (Some(tree), ObjectSpace::Points(p)) = (self.seed_index.get(&v), &self.space) {
            let hit = tree.nearest(p.point(object), 1).first().copied()?;
            return Some(Choice {
                cost: self.space.cost(object, hit.id) + hop,
                hops,
                object: hit.id,
                node: v,
                repository: true,
            });
        }
        seeds
            .iter()
            .map(|&o| Choice {
                cost: self.space.cost(object, o) + hop,
                hops,
                object: o,
                node: v,
                repository: true,
            })
            .min_by(|a, b| a.key_cmp(b))
    }

    /// `𝒞(∅)`: expected cost when every request is served by a repository.
    pub fn empty_cost(&self) -> S {
        self.requests
            .iter()
            .map(|r| r.rate * r.fallback.cost)
            .sum()
    }
}
