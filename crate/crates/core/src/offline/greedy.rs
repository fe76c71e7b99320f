use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::Serialize;

use super::state::{Admissible, PlacementState};
use crate::error::{Error, Result};
use crate::model::{Allocation, Approximizer, Instance, NodeId};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GreedyStep<S> {
    pub step: usize,
    pub chosen: Approximizer,
    pub gain: S,
    /// Free slots left at each cache after this step, as `(node, slots)`.
    pub remaining: Vec<(NodeId, usize)>,
}

#[derive(Clone, Debug)]
pub struct GreedyResult<S> {
    pub allocation: Allocation,
    pub steps: Vec<GreedyStep<S>>,
    pub cost: S,
    /// False when candidates ran out before every slot was filled.
    pub complete: bool,
}

struct Entry<S> {
    gain: S,
    node: NodeId,
    object: usize,
}

impl<S: Scalar> Entry<S> {
    /// Higher gain first, then lower node, then lower object.
    fn key_cmp(&self, other: &Self) -> Ordering {
        self.gain
            .total_cmp(&other.gain)
            .then(other.node.cmp(&self.node))
            .then(other.object.cmp(&self.object))
    }
}

impl<S: Scalar> PartialEq for Entry<S> {
    fn eq(&self, other: &Self) -> bool {
        self.key_cmp(other) == Ordering::Equal
    }
}
impl<S: Scalar> Eq for Entry<S> {}
impl<S: Scalar> PartialOrd for Entry<S> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.key_cmp(other))
    }
}
impl<S: Scalar> Ord for Entry<S> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key_cmp(other)
    }
}

/// Greedy placement: repeatedly adds the approximizer with the largest
/// marginal caching gain until every slot is used.
pub fn greedy_place<S: Scalar>(instance: &Instance<S>) -> Result<GreedyResult<S>> {
    greedy_place_constrained(instance, None)
}

pub fn greedy_place_constrained<S: Scalar>(
    instance: &Instance<S>,
    admissible: Option<Admissible<'_>>,
) -> Result<GreedyResult<S>> {
    let total_slots = instance.topology().total_slots();
    if total_slots == 0 {
        return Err(Error::invalid("greedy placement needs at least one cache slot"));
    }
    if instance.empty_cost().is_infinite() {
        return Err(Error::instance("cost of the empty allocation is infinite"));
    }
    let mut state = PlacementState::new(instance, &Allocation::new())?;
    let caches = instance.caches().to_vec();

    // Gains only shrink as the allocation grows, so stale heap entries are
    // upper bounds and the top can be re-evaluated lazily.
    let mut heap = BinaryHeap::with_capacity(caches.len() * instance.objects());
    for &node in &caches {
        for object in 0..instance.objects() {
            if admissible.is_some_and(|f| !f(node, object)) {
                continue;
            }
            heap.push(Entry {
                gain: state.insertion_gain(object, node),
                node,
                object,
            });
        }
    }

    let mut steps: Vec<GreedyStep<S>> = Vec::new();
    let mut placed = 0;
    while placed < total_slots {
        let Some(top) = heap.pop() else { break };
        if state.free_slots(top.node) == 0 {
            continue;
        }
        let gain = state.insertion_gain(top.object, top.node);
        let entry = Entry { gain, ..top };
        if heap.peek().is_some_and(|next| next.key_cmp(&entry).is_gt()) {
            heap.push(entry);
            continue;
        }
        if let Some(prev) = steps.last() {
            assert!(
                !S::is_improvement(prev.gain - gain, state.cost()),
                "marginal gain increased from {} to {}",
                prev.gain,
                gain
            );
        }
        let chosen = Approximizer::new(entry.object, entry.node);
        state.insert(chosen)?;
        placed += 1;
        steps.push(GreedyStep {
            step: steps.len(),
            chosen,
            gain,
            remaining: caches.iter().map(|&n| (n, state.free_slots(n))).collect(),
        });
    }
    let complete = placed == total_slots;
    if !complete {
        log::warn!("greedy ran out of candidates after {placed} of {total_slots} slots");
    }
    Ok(GreedyResult {
        allocation: state.allocation(),
        cost: state.cost(),
        steps,
        complete,
    })
}
