use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::space::ObjectId;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub type NodeId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Capacity {
    /// A cache holding at most this many objects.
    Slots(usize),
    /// A repository; it never stores placement decisions.
    Unbounded,
}

impl Capacity {
    pub fn slots(self) -> Option<usize> {
        match self {
            Capacity::Slots(k) => Some(k),
            Capacity::Unbounded => None,
        }
    }

    pub fn is_repository(self) -> bool {
        matches!(self, Capacity::Unbounded)
    }
}

/// One node of a tree topology; requests travel towards the root.
#[derive(Clone, Debug)]
pub struct TreeNode<S> {
    pub capacity: Capacity,
    pub parent: Option<NodeId>,
    /// Cost of the hop to the parent.
    pub edge_cost: S,
}

#[derive(Clone, Debug)]
pub enum Routing {
    /// Requests climb parent links until they meet a repository of the
    /// requested object.
    Tree { parent: Vec<Option<NodeId>> },
    /// Paths listed per `(ingress, object)`.
    Explicit {
        paths: BTreeMap<(NodeId, ObjectId), Vec<NodeId>>,
    },
}

#[derive(Clone, Debug)]
pub struct Topology<S> {
    capacity: Vec<Capacity>,
    hop: Vec<S>,
    routing: Routing,
}

impl<S: Scalar> Topology<S> {
    pub fn tree(nodes: Vec<TreeNode<S>>) -> Result<Self> {
        let n = nodes.len();
        if n == 0 {
            return Err(Error::instance("topology has no nodes"));
        }
        let parent: Vec<Option<NodeId>> = nodes.iter().map(|nd| nd.parent).collect();
        for (i, nd) in nodes.iter().enumerate() {
            if let Some(p) = nd.parent {
                if p >= n || p == i {
                    return Err(Error::instance(format!("node {i} has invalid parent {p}")));
                }
            }
            if !(nd.edge_cost >= S::zero()) {
                return Err(Error::instance(format!(
                    "node {i} has negative edge cost {}",
                    nd.edge_cost
                )));
            }
        }
        let mut hop = vec![S::infinity(); n * n];
        for i in 0..n {
            hop[i * n + i] = S::zero();
            let mut acc = S::zero();
            let mut cur = i;
            let mut steps = 0;
            while let Some(p) = parent[cur] {
                acc = acc + nodes[cur].edge_cost;
                hop[i * n + p] = acc;
                cur = p;
                steps += 1;
                if steps > n {
                    return Err(Error::instance("parent links contain a cycle"));
                }
            }
        }
        Ok(Topology {
            capacity: nodes.iter().map(|nd| nd.capacity).collect(),
            hop,
            routing: Routing::Tree { parent },
        })
    }

    /// A chain `0 → 1 → … → n-1`; `edge_costs[j]` is the hop from `j` to `j+1`.
    pub fn chain(capacities: Vec<Capacity>, edge_costs: Vec<S>) -> Result<Self> {
        if edge_costs.len() + 1 != capacities.len() {
            return Err(Error::instance(format!(
                "a chain of {} nodes needs {} edge costs, got {}",
                capacities.len(),
                capacities.len().saturating_sub(1),
                edge_costs.len()
            )));
        }
        let n = capacities.len();
        let nodes = capacities
            .into_iter()
            .enumerate()
            .map(|(i, capacity)| TreeNode {
                capacity,
                parent: (i + 1 < n).then_some(i + 1),
                edge_cost: if i + 1 < n { edge_costs[i] } else { S::zero() },
            })
            .collect();
        Topology::tree(nodes)
    }

    /// General graph: full hop-cost table plus explicit request paths.
    pub fn explicit(
        capacity: Vec<Capacity>,
        hop_rows: Vec<Vec<S>>,
        paths: BTreeMap<(NodeId, ObjectId), Vec<NodeId>>,
    ) -> Result<Self> {
        let n = capacity.len();
        if hop_rows.len() != n || hop_rows.iter().any(|r| r.len() != n) {
            return Err(Error::instance(format!("hop table must be {n}x{n}")));
        }
        let hop: Vec<S> = hop_rows.into_iter().flatten().collect();
        for i in 0..n {
            if hop[i * n + i] != S::zero() {
                return Err(Error::instance(format!("h({i},{i}) must be zero")));
            }
        }
        if let Some(v) = hop.iter().find(|v| !(**v >= S::zero())) {
            return Err(Error::instance(format!("negative hop cost {v}")));
        }
        for ((ingress, object), path) in &paths {
            if path.first() != Some(ingress) {
                return Err(Error::instance(format!(
                    "path for object {object} at node {ingress} must start at the ingress"
                )));
            }
            if let Some(bad) = path.iter().find(|&&v| v >= n) {
                return Err(Error::instance(format!("path references unknown node {bad}")));
            }
        }
        Ok(Topology {
            capacity,
            hop,
            routing: Routing::Explicit { paths },
        })
    }

    pub fn len(&self) -> usize {
        self.capacity.len()
    }

    pub fn is_empty(&self) -> bool {
        self.capacity.is_empty()
    }

    pub fn capacity(&self, node: NodeId) -> Capacity {
        self.capacity[node]
    }

    pub fn capacities(&self) -> &[Capacity] {
        &self.capacity
    }

    #[inline]
    pub fn hop(&self, from: NodeId, to: NodeId) -> S {
        self.hop[from * self.len() + to]
    }

    pub fn routing(&self) -> &Routing {
        &self.routing
    }

    /// Nodes with a finite, non-zero number of slots.
    pub fn caches(&self) -> Vec<NodeId> {
        (0..self.len())
            .filter(|&v| matches!(self.capacity[v], Capacity::Slots(k) if k > 0))
            .collect()
    }

    /// Total budget `K = Σ k_i` over the caches.
    pub fn total_slots(&self) -> usize {
        self.capacity.iter().filter_map(|c| c.slots()).sum()
    }

    /// Forwarding path of a request for `object` entering at `ingress`.
    /// `holds` tells whether a node is a repository for the object.
    pub fn path(
        &self,
        ingress: NodeId,
        object: ObjectId,
        holds: impl Fn(NodeId, ObjectId) -> bool,
    ) -> Result<Vec<NodeId>> {
        if ingress >= self.len() {
            return Err(Error::invalid(format!("unknown ingress node {ingress}")));
        }
        match &self.routing {
            Routing::Tree { parent } => {
                let mut path = vec![ingress];
                let mut cur = ingress;
                while !holds(cur, object) {
                    match parent[cur] {
                        Some(p) => {
                            path.push(p);
                            cur = p;
                        }
                        None => {
                            return Err(Error::instance(format!(
                                "no repository for object {object} above node {ingress}"
                            )))
                        }
                    }
                }
                Ok(path)
            }
            Routing::Explicit { paths } => {
                let path = paths.get(&(ingress, object)).ok_or_else(|| {
                    Error::instance(format!(
                        "no path given for object {object} at node {ingress}"
                    ))
                })?;
                match path.last() {
                    Some(&end) if holds(end, object) => Ok(path.clone()),
                    _ => Err(Error::instance(format!(
                        "path for object {object} at node {ingress} does not end at one of its repositories"
                    ))),
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_hop_costs_accumulate() {
        let t: Topology<f64> = Topology::chain(
            vec![Capacity::Slots(1), Capacity::Slots(1), Capacity::Unbounded],
            vec![0.5, 1.0],
        )
        .unwrap();
        assert_eq!(t.hop(0, 0), 0.0);
        assert_eq!(t.hop(0, 1), 0.5);
        assert_eq!(t.hop(0, 2), 1.5);
        assert!(t.hop(2, 0).is_infinite());
        assert_eq!(t.caches(), vec![0, 1]);
        assert_eq!(t.total_slots(), 2);
        let path = t.path(0, 3, |v, _| v == 2).unwrap();
        assert_eq!(path, vec![0, 1, 2]);
    }

    #[test]
    fn tree_rejects_cycles_and_missing_repository() {
        let nodes = vec![
            TreeNode {
                capacity: Capacity::Slots(1),
                parent: Some(1),
                edge_cost: 1.0,
            },
            TreeNode {
                capacity: Capacity::Slots(1),
                parent: Some(0),
                edge_cost: 1.0,
            },
        ];
        assert!(Topology::tree(nodes).is_err());
        let t: Topology<f64> =
            Topology::chain(vec![Capacity::Slots(1), Capacity::Slots(1)], vec![1.0]).unwrap();
        assert!(t.path(0, 0, |_, _| false).is_err());
    }

    #[test]
    fn explicit_paths_must_end_at_repository() {
        let mut paths = BTreeMap::new();
        paths.insert((0, 0), vec![0, 1]);
        let t: Topology<f64> = Topology::explicit(
            vec![Capacity::Slots(1), Capacity::Unbounded],
            vec![vec![0.0, 2.0], vec![2.0, 0.0]],
            paths,
        )
        .unwrap();
        assert_eq!(t.path(0, 0, |v, _| v == 1).unwrap(), vec![0, 1]);
        assert!(t.path(0, 0, |_, _| false).is_err());
        assert!(t.path(0, 1, |v, _| v == 1).is_err());
    }
}
