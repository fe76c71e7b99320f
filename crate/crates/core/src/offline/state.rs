//! Incremental placement state shared by the placement algorithms.
//!
//! For every request class the state keeps the best and second-best
//! approximizer (repository fallback included). Inserting object `o` at
//! cache `j` only touches requests routed through `j`, and one pass over
//! them prices the insertion against every possible eviction at `j`.

use crate::error::{Error, Result};
use crate::model::{Allocation, Approximizer, Choice, Instance, NodeId, ObjectId};
use crate::scalar::Scalar;

/// Predicate telling which objects a cache may hold.
pub type Admissible<'a> = &'a (dyn Fn(NodeId, ObjectId) -> bool + Sync);

/// Insert `insert`, evicting `evict` if given, changing the cost by `delta`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Move<S> {
    pub insert: Approximizer,
    pub evict: Option<Approximizer>,
    pub delta: S,
}

impl<S: Scalar> Move<S> {
    /// Lower delta first, then insertion node, then objects.
    fn better_than(&self, other: &Move<S>) -> bool {
        self.delta
            .total_cmp(&other.delta)
            .then(self.insert.node.cmp(&other.insert.node))
            .then(self.insert.object.cmp(&other.insert.object))
            .then(
                self.evict
                    .map(|a| a.object)
                    .cmp(&other.evict.map(|a| a.object)),
            )
            .is_lt()
    }
}

fn unreachable_choice<S: Scalar>() -> Choice<S> {
    Choice {
        cost: S::infinity(),
        hops: u32::MAX,
        object: usize::MAX,
        node: usize::MAX,
        repository: true,
    }
}

/// A request class whose path crosses a node.
#[derive(Clone, Copy)]
struct Through<S> {
    request: usize,
    object: ObjectId,
    rate: S,
    hop: S,
    hops: u32,
}

const ABSENT: u32 = u32::MAX;

pub struct PlacementState<'a, S> {
    inst: &'a Instance<S>,
    capacity: Vec<usize>,
    slots: Vec<Vec<ObjectId>>,
    /// Slot index of every object per node (`ABSENT` if not stored).
    position: Vec<Vec<u32>>,
    through: Vec<Vec<Through<S>>>,
    best: Vec<Choice<S>>,
    second: Vec<Choice<S>>,
    cost: S,
}

impl<'a, S: Scalar> PlacementState<'a, S> {
    pub fn new(inst: &'a Instance<S>, allocation: &Allocation) -> Result<Self> {
        allocation.check_feasible(inst.topology(), inst.objects())?;
        let n = inst.nodes();
        let capacity: Vec<usize> = inst
            .topology()
            .capacities()
            .iter()
            .map(|c| c.slots().unwrap_or(0))
            .collect();
        let mut slots = vec![Vec::new(); n];
        let mut position: Vec<Vec<u32>> = capacity
            .iter()
            .map(|&k| if k > 0 { vec![ABSENT; inst.objects()] } else { Vec::new() })
            .collect();
        for a in allocation {
            position[a.node][a.object] = slots[a.node].len() as u32;
            slots[a.node].push(a.object);
        }
        let mut through = vec![Vec::new(); n];
        for (r, req) in inst.requests().iter().enumerate() {
            for stop in &req.stops {
                through[stop.node].push(Through {
                    request: r,
                    object: req.object,
                    rate: req.rate,
                    hop: stop.hop,
                    hops: stop.hops,
                });
            }
        }
        let m = inst.requests().len();
        let mut state = PlacementState {
            inst,
            capacity,
            slots,
            position,
            through,
            best: vec![unreachable_choice(); m],
            second: vec![unreachable_choice(); m],
            cost: S::zero(),
        };
        for r in 0..m {
            state.recompute(r);
        }
        state.refresh_cost();
        Ok(state)
    }

    pub fn instance(&self) -> &'a Instance<S> {
        self.inst
    }

    /// Current expected cost.
    pub fn cost(&self) -> S {
        self.cost
    }

    pub fn contains(&self, object: ObjectId, node: NodeId) -> bool {
        self.position[node].get(object).is_some_and(|&p| p != ABSENT)
    }

    pub fn free_slots(&self, node: NodeId) -> usize {
        self.capacity[node] - self.slots[node].len()
    }

    pub fn objects_at(&self, node: NodeId) -> &[ObjectId] {
        &self.slots[node]
    }

    pub fn len(&self) -> usize {
        self.slots.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Serving choice of request class `r` (index into `instance.requests()`).
    pub fn serving(&self, r: usize) -> Choice<S> {
        self.best[r]
    }

    pub fn allocation(&self) -> Allocation {
        self.slots
            .iter()
            .enumerate()
            .flat_map(|(node, objs)| objs.iter().map(move |&o| Approximizer::new(o, node)))
            .collect()
    }

    fn cache_choice(&self, target: ObjectId, object: ObjectId, node: NodeId, hop: S, hops: u32) -> Choice<S> {
        Choice {
            cost: self.inst.space().cost(target, object) + hop,
            hops,
            object,
            node,
            repository: false,
        }
    }

    fn recompute(&mut self, r: usize) {
        let req = &self.inst.requests()[r];
        let mut best = req.fallback;
        let mut second = unreachable_choice();
        for stop in &req.stops {
            for &o in &self.slots[stop.node] {
                let c = self.cache_choice(req.object, o, stop.node, stop.hop, stop.hops);
                if c.beats(&best) {
                    second = best;
                    best = c;
                } else if c.beats(&second) {
                    second = c;
                }
            }
        }
        self.best[r] = best;
        self.second[r] = second;
    }

    fn refresh_cost(&mut self) {
        self.cost = self
            .inst
            .requests()
            .iter()
            .zip(&self.best)
            .map(|(req, b)| req.rate * b.cost)
            .sum();
    }

    /// Cost decrease from adding `object` at `node` without evicting.
    pub fn insertion_gain(&self, object: ObjectId, node: NodeId) -> S {
        let mut gain = S::zero();
        let space = self.inst.space();
        for t in &self.through[node] {
            let cur = self.best[t.request].cost;
            if t.hop >= cur {
                continue;
            }
            let c_new = space.cost(t.object, object) + t.hop;
            if c_new < cur {
                gain = gain + t.rate * (cur - c_new);
            }
        }
        gain
    }

    /// Best way of placing `object` at `node`: a plain insertion when the
    /// cache has room, otherwise the cheapest eviction.
    pub fn evaluate(&self, object: ObjectId, node: NodeId) -> Option<Move<S>> {
        if self.capacity[node] == 0 || self.contains(object, node) {
            return None;
        }
        let insert = Approximizer::new(object, node);
        let k = self.slots[node].len();
        let mut gain = S::zero();
        let mut correction = vec![S::zero(); k];
        let space = self.inst.space();
        for t in &self.through[node] {
            let best = &self.best[t.request];
            let held_here = best.node == node && !best.repository;
            if t.hop >= best.cost && !held_here {
                continue;
            }
            let holder = held_here.then(|| self.position[node][best.object] as usize);
            let c_new = space.cost(t.object, object) + t.hop;
            let rate = t.rate;
            let r = t.request;
            let cur = best.cost;
            let with_new = cur.min_of(c_new);
            if c_new < cur {
                gain = gain + rate * (cur - c_new);
            }
            if let Some(pos) = holder {
                let fallback = self.second[r].cost.min_of(c_new);
                correction[pos] = correction[pos] + rate * (fallback - with_new);
            }
        }
        if k < self.capacity[node] {
            return Some(Move {
                insert,
                evict: None,
                delta: S::zero() - gain,
            });
        }
        let mut out: Option<Move<S>> = None;
        for (pos, &y) in self.slots[node].iter().enumerate() {
            let m = Move {
                insert,
                evict: Some(Approximizer::new(y, node)),
                delta: correction[pos] - gain,
            };
            if out.as_ref().is_none_or(|o| m.better_than(o)) {
                out = Some(m);
            }
        }
        out
    }

    /// Best move over the given nodes for inserting `object`.
    pub fn best_move(
        &self,
        object: ObjectId,
        nodes: impl IntoIterator<Item = NodeId>,
        admissible: Option<Admissible<'_>>,
    ) -> Option<Move<S>> {
        let mut out: Option<Move<S>> = None;
        for node in nodes {
            if admissible.is_some_and(|f| !f(node, object)) {
                continue;
            }
            if let Some(m) = self.evaluate(object, node) {
                if out.as_ref().is_none_or(|o| m.better_than(o)) {
                    out = Some(m);
                }
            }
        }
        out
    }

    /// Whether `m` strictly lowers the cost.
    pub fn improves(&self, m: &Move<S>) -> bool {
        S::is_improvement(m.delta, self.cost)
    }

    /// Adds an approximizer to a cache with a free slot.
    pub fn insert(&mut self, a: Approximizer) -> Result<()> {
        self.apply(&Move {
            insert: a,
            evict: None,
            delta: S::zero(),
        })
        .map(|_| ())
    }

    /// Applies a move and returns the new cost.
    pub fn apply(&mut self, m: &Move<S>) -> Result<S> {
        let node = m.insert.node;
        if node >= self.capacity.len() || m.insert.object >= self.inst.objects() {
            return Err(Error::InfeasibleAllocation(format!("unknown approximizer {}", m.insert)));
        }
        if self.contains(m.insert.object, node) {
            return Err(Error::InfeasibleAllocation(format!("{} is already placed", m.insert)));
        }
        if let Some(y) = m.evict {
            if y.node != node || !self.contains(y.object, node) {
                return Err(Error::InfeasibleAllocation(format!("cannot evict {y}")));
            }
            let pos = std::mem::replace(&mut self.position[node][y.object], ABSENT) as usize;
            self.slots[node].swap_remove(pos);
            if let Some(&moved) = self.slots[node].get(pos) {
                self.position[node][moved] = pos as u32;
            }
        } else if self.free_slots(node) == 0 {
            return Err(Error::InfeasibleAllocation(format!(
                "node {node} is full; cannot insert {}",
                m.insert
            )));
        }
        let object = m.insert.object;
        self.position[node][object] = self.slots[node].len() as u32;
        self.slots[node].push(object);

        for i in 0..self.through[node].len() {
            let Through {
                request: r,
                object: target,
                hop,
                hops,
                ..
            } = self.through[node][i];
            let hit = |c: &Choice<S>| m.evict.is_some_and(|y| !c.repository && c.node == node && c.object == y.object);
            if hit(&self.best[r]) || hit(&self.second[r]) {
                self.recompute(r);
                continue;
            }
            let c = self.cache_choice(target, object, node, hop, hops);
            if c.beats(&self.best[r]) {
                self.second[r] = self.best[r];
                self.best[r] = c;
            } else if c.beats(&self.second[r]) {
                self.second[r] = c;
            }
        }
        self.refresh_cost();
        Ok(self.cost)
    }
}
