use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::space::ObjectId;
use super::topology::{Capacity, NodeId, Topology};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// An object stored at a cache node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Approximizer {
    pub node: NodeId,
    pub object: ObjectId,
}

impl Approximizer {
    pub fn new(object: ObjectId, node: NodeId) -> Self {
        Approximizer { node, object }
    }
}

impl fmt::Display for Approximizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(x{}, n{})", self.object, self.node)
    }
}

/// A set of approximizers placed at caches.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Allocation {
    items: BTreeSet<Approximizer>,
}

impl Allocation {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds an allocation from `(object, node)` pairs.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (ObjectId, NodeId)>) -> Self {
        pairs
            .into_iter()
            .map(|(o, n)| Approximizer::new(o, n))
            .collect()
    }

    pub fn insert(&mut self, a: Approximizer) -> bool {
        self.items.insert(a)
    }

    pub fn remove(&mut self, a: &Approximizer) -> bool {
        self.items.remove(a)
    }

    pub fn contains(&self, a: &Approximizer) -> bool {
        self.items.contains(a)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Approximizer> + '_ {
        self.items.iter()
    }

    pub fn occupancy(&self, node: NodeId) -> usize {
        self.items.iter().filter(|a| a.node == node).count()
    }

    /// Objects grouped by node, in increasing object order.
    pub fn by_node(&self) -> BTreeMap<NodeId, Vec<ObjectId>> {
        let mut out: BTreeMap<NodeId, Vec<ObjectId>> = BTreeMap::new();
        for a in &self.items {
            out.entry(a.node).or_default().push(a.object);
        }
        out
    }

    pub fn objects_at(&self, node: NodeId) -> Vec<ObjectId> {
        self.items
            .range(Approximizer::new(0, node)..=Approximizer::new(usize::MAX, node))
            .map(|a| a.object)
            .collect()
    }

    pub fn is_subset(&self, other: &Allocation) -> bool {
        self.items.is_subset(&other.items)
    }

    pub fn with(&self, a: Approximizer) -> Allocation {
        let mut out = self.clone();
        out.insert(a);
        out
    }

    /// Checks per-node capacities and that every approximizer sits on a cache.
    pub fn check_feasible<S: Scalar>(&self, topology: &Topology<S>, objects: usize) -> Result<()> {
        let mut counts: BTreeMap<NodeId, usize> = BTreeMap::new();
        for a in &self.items {
            if a.node >= topology.len() {
                return Err(Error::InfeasibleAllocation(format!("unknown node {}", a.node)));
            }
            if a.object >= objects {
                return Err(Error::InfeasibleAllocation(format!(
                    "unknown object {}",
                    a.object
                )));
            }
            *counts.entry(a.node).or_default() += 1;
        }
        for (node, count) in counts {
            match topology.capacity(node) {
                Capacity::Slots(k) if count > k => {
                    return Err(Error::InfeasibleAllocation(format!(
                        "node {node} holds {count} objects but has {k} slots"
                    )))
                }
                Capacity::Unbounded => {
                    return Err(Error::InfeasibleAllocation(format!(
                        "node {node} is a repository and cannot take placements"
                    )))
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn is_feasible<S: Scalar>(&self, topology: &Topology<S>, objects: usize) -> bool {
        self.check_feasible(topology, objects).is_ok()
    }
}

impl FromIterator<Approximizer> for Allocation {
    fn from_iter<I: IntoIterator<Item = Approximizer>>(iter: I) -> Self {
        Allocation {
            items: iter.into_iter().collect(),
        }
    }
}

impl<'a> IntoIterator for &'a Allocation {
    type Item = &'a Approximizer;
    type IntoIter = std::collections::btree_set::Iter<'a, Approximizer>;

    fn into_iter(self) -> Self::IntoIter {
        self.items.iter()
    }
}

/// Matroid exchange: for feasible `a`, `b` with `|a| < |b|`, returns an
/// element of `b \ a` whose addition keeps `a` feasible.
pub fn exchange_candidate<S: Scalar>(
    a: &Allocation,
    b: &Allocation,
    topology: &Topology<S>,
) -> Option<Approximizer> {
    if a.len() >= b.len() {
        return None;
    }
    let ca = a.by_node();
    let cb = b.by_node();
    for (node, objs_b) in &cb {
        let na = ca.get(node).map_or(0, Vec::len);
        if na < objs_b.len() {
            let k = topology.capacity(*node).slots()?;
            if na < k {
                if let Some(&o) = objs_b
                    .iter()
                    .find(|&&o| !a.contains(&Approximizer::new(o, *node)))
                {
                    return Some(Approximizer::new(o, *node));
                }
            }
        }
    }
    None
}
