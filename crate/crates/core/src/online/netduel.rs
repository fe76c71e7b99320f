//! NetDuel: every cache slot holds a real object and, at times, a virtual
//! challenger known only by its id. Over a window of requests crossing the
//! node, the slot credits the real object with the cost it saves and the
//! challenger with the cost it would save in the real one's place. When the
//! window closes the challenger takes the slot if its saving beats the
//! real one's by the margin; otherwise it is dropped.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{expected_cost, Allocation, Choice, Instance, NodeId, ObjectId, Route};
use crate::workload::RequestTrace;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum VirtualRule {
    /// The requested object challenges the least useful idle slot.
    FromArrivals,
    /// No duels: the allocation stays as given.
    Disabled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetDuelConfig {
    /// Requests crossing the node per duel.
    pub window: usize,
    /// Relative excess the challenger's saving needs over the real one.
    pub margin: f64,
    pub rule: VirtualRule,
    /// Start a duel at every cache on the request path; otherwise only at
    /// the first one with an idle slot.
    pub independent_nodes: bool,
    /// Requests per point of the cost series.
    pub report_every: usize,
}

impl Default for NetDuelConfig {
    fn default() -> Self {
        NetDuelConfig {
            window: 500,
            margin: 0.05,
            rule: VirtualRule::FromArrivals,
            independent_nodes: true,
            report_every: 500,
        }
    }
}

impl NetDuelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::invalid("duel window must be at least one request"));
        }
        if !(self.margin >= 0.0) {
            return Err(Error::invalid(format!("duel margin must be >= 0, got {}", self.margin)));
        }
        if self.report_every == 0 {
            return Err(Error::invalid("report interval must be at least one request"));
        }
        Ok(())
    }

    fn wins(&self, virtual_saving: f64, real_saving: f64) -> bool {
        if self.margin.is_infinite() {
            return false;
        }
        virtual_saving > (1.0 + self.margin) * real_saving
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum DuelStatus {
    Idle,
    Dueling,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DuelState {
    /// `None` for a slot not filled yet.
    pub real: Option<ObjectId>,
    pub challenger: Option<ObjectId>,
    pub real_saving: f64,
    pub virtual_saving: f64,
    /// Node request count when the current duel started.
    pub window_start: u64,
    pub status: DuelStatus,
    /// Real saving over the last closed window; idle slots with the lowest
    /// score are challenged first.
    pub score: f64,
}

impl DuelState {
    fn empty() -> Self {
        DuelState {
            real: None,
            challenger: None,
            real_saving: 0.0,
            virtual_saving: 0.0,
            window_start: 0,
            status: DuelStatus::Idle,
            score: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SwapEvent {
    /// Index of the triggering request in the stream.
    pub request: u64,
    pub node: NodeId,
    pub inserted: ObjectId,
    pub evicted: Option<ObjectId>,
    pub real_saving: f64,
    pub virtual_saving: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RequestOutcome {
    pub choice: Choice<f64>,
    pub swaps: Vec<SwapEvent>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeriesPoint {
    pub window: usize,
    pub requests: usize,
    pub mean_cost: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NetDuelRun {
    #[serde(skip)]
    pub allocation: Allocation,
    pub series: Vec<SeriesPoint>,
    pub swaps: Vec<SwapEvent>,
    /// Expected cost of the final allocation under the instance demand.
    pub final_cost: f64,
}

pub struct NetDuel<'a> {
    inst: &'a Instance<f64>,
    config: NetDuelConfig,
    slots: Vec<Vec<DuelState>>,
    /// Object -> slot index per node, real objects only.
    holder: Vec<HashMap<ObjectId, usize>>,
    seen: Vec<u64>,
    routes: HashMap<(ObjectId, NodeId), Route<f64>>,
    requests: u64,
}

impl<'a> NetDuel<'a> {
    pub fn new(inst: &'a Instance<f64>, init: &Allocation, config: NetDuelConfig) -> Result<Self> {
        config.validate()?;
        init.check_feasible(inst.topology(), inst.objects())?;
        let n = inst.nodes();
        let mut slots: Vec<Vec<DuelState>> = inst
            .topology()
            .capacities()
            .iter()
            .map(|c| vec![DuelState::empty(); c.slots().unwrap_or(0)])
            .collect();
        let mut holder = vec![HashMap::new(); n];
        for (node, objects) in init.by_node() {
            for (pos, o) in objects.into_iter().enumerate() {
                slots[node][pos].real = Some(o);
                holder[node].insert(o, pos);
            }
        }
        let routes = inst
            .requests()
            .iter()
            .map(|r| ((r.object, r.ingress), r.route.clone()))
            .collect();
        Ok(NetDuel {
            inst,
            config,
            slots,
            holder,
            seen: vec![0; n],
            routes,
            requests: 0,
        })
    }

    pub fn slots(&self, node: NodeId) -> &[DuelState] {
        &self.slots[node]
    }

    pub fn allocation(&self) -> Allocation {
        Allocation::from_pairs(
            self.slots
                .iter()
                .enumerate()
                .flat_map(|(node, s)| s.iter().filter_map(move |d| d.real.map(|o| (o, node)))),
        )
    }

    fn route(&mut self, object: ObjectId, ingress: NodeId) -> Result<Route<f64>> {
        if let Some(r) = self.routes.get(&(object, ingress)) {
            return Ok(r.clone());
        }
        let r = self.inst.route(object, ingress)?;
        self.routes.insert((object, ingress), r.clone());
        Ok(r)
    }

    /// Serves one request, credits the duels it touches and closes the
    /// windows that fill up.
    pub fn on_request(&mut self, object: ObjectId, ingress: NodeId) -> Result<RequestOutcome> {
        if object >= self.inst.objects() || ingress >= self.inst.nodes() {
            return Err(Error::invalid(format!("request ({object}, {ingress}) is outside the instance")));
        }
        let route = self.route(object, ingress)?;
        let space = self.inst.space();
        let t = self.requests;
        self.requests += 1;

        // best and second-best real approximizers (slot position kept)
        let mut best = route.fallback;
        let mut best_slot: Option<(NodeId, usize)> = None;
        let mut second = Choice {
            cost: f64::INFINITY,
            hops: u32::MAX,
            object: usize::MAX,
            node: usize::MAX,
            repository: true,
        };
        for stop in &route.stops {
            for (pos, s) in self.slots[stop.node].iter().enumerate() {
                let Some(o) = s.real else { continue };
                let c = Choice {
                    cost: space.cost(object, o) + stop.hop,
                    hops: stop.hops,
                    object: o,
                    node: stop.node,
                    repository: false,
                };
                if c.beats(&best) {
                    second = best;
                    best = c;
                    best_slot = Some((stop.node, pos));
                } else if c.beats(&second) {
                    second = c;
                }
            }
        }

        if let Some((node, pos)) = best_slot {
            let slot = &mut self.slots[node][pos];
            if slot.status == DuelStatus::Dueling {
                slot.real_saving += second.cost - best.cost;
            }
        }
        for stop in &route.stops {
            self.seen[stop.node] += 1;
            for (pos, s) in self.slots[stop.node].iter_mut().enumerate() {
                let Some(v) = s.challenger else { continue };
                let without = if best_slot == Some((stop.node, pos)) { second.cost } else { best.cost };
                let c = space.cost(object, v) + stop.hop;
                if c < without {
                    s.virtual_saving += without - c;
                }
            }
        }

        let mut swaps = Vec::new();
        for stop in &route.stops {
            let node = stop.node;
            for pos in 0..self.slots[node].len() {
                let s = &self.slots[node][pos];
                if s.status != DuelStatus::Dueling || self.seen[node] - s.window_start < self.config.window as u64 {
                    continue;
                }
                if let Some(ev) = self.close(node, pos, t) {
                    swaps.push(ev);
                }
            }
        }

        if self.config.rule == VirtualRule::FromArrivals {
            for stop in &route.stops {
                if self.start_duel(stop.node, object) && !self.config.independent_nodes {
                    break;
                }
            }
        }
        Ok(RequestOutcome { choice: best, swaps })
    }

    fn close(&mut self, node: NodeId, pos: usize, t: u64) -> Option<SwapEvent> {
        let wins = {
            let s = &self.slots[node][pos];
            self.config.wins(s.virtual_saving, s.real_saving)
        };
        let s = &mut self.slots[node][pos];
        let v = s.challenger.take().expect("dueling slot has a challenger");
        s.status = DuelStatus::Idle;
        let (real_saving, virtual_saving) = (s.real_saving, s.virtual_saving);
        s.real_saving = 0.0;
        s.virtual_saving = 0.0;
        if !wins || self.holder[node].contains_key(&v) {
            s.score = real_saving;
            return None;
        }
        let evicted = s.real.replace(v);
        s.score = virtual_saving;
        if let Some(y) = evicted {
            self.holder[node].remove(&y);
        }
        self.holder[node].insert(v, pos);
        Some(SwapEvent {
            request: t,
            node,
            inserted: v,
            evicted,
            real_saving,
            virtual_saving,
        })
    }

    /// Pairs `object` with the idle slot of lowest score at `node`.
    fn start_duel(&mut self, node: NodeId, object: ObjectId) -> bool {
        if self.holder[node].contains_key(&object) || self.slots[node].iter().any(|s| s.challenger == Some(object)) {
            return false;
        }
        let mut pick: Option<usize> = None;
        for (pos, s) in self.slots[node].iter().enumerate() {
            if s.status != DuelStatus::Idle {
                continue;
            }
            let better = match pick {
                None => true,
                Some(p) => {
                    let q = &self.slots[node][p];
                    // empty slots first, then lowest score
                    (s.real.is_none() && q.real.is_some()) || (s.real.is_some() == q.real.is_some() && s.score < q.score)
                }
            };
            if better {
                pick = Some(pos);
            }
        }
        let Some(pos) = pick else { return false };
        let start = self.seen[node];
        let s = &mut self.slots[node][pos];
        s.challenger = Some(object);
        s.status = DuelStatus::Dueling;
        s.real_saving = 0.0;
        s.virtual_saving = 0.0;
        s.window_start = start;
        true
    }
}

/// Replays a trace through NetDuel from `init`.
pub fn netduel_run(
    inst: &Instance<f64>,
    init: &Allocation,
    trace: &RequestTrace,
    config: NetDuelConfig,
) -> Result<NetDuelRun> {
    if trace.is_empty() {
        return Err(Error::invalid("NetDuel needs a non-empty trace"));
    }
    trace.check_objects(inst.objects(), inst.nodes())?;
    let every = config.report_every;
    let mut policy = NetDuel::new(inst, init, config)?;
    let mut series = Vec::new();
    let mut swaps = Vec::new();
    let mut acc = 0.0;
    let mut count = 0;
    for e in &trace.events {
        let out = policy.on_request(e.object, e.ingress)?;
        acc += out.choice.cost;
        count += 1;
        swaps.extend(out.swaps);
        if count == every {
            series.push(SeriesPoint {
                window: series.len(),
                requests: count,
                mean_cost: acc / count as f64,
            });
            acc = 0.0;
            count = 0;
        }
    }
    if count > 0 {
        series.push(SeriesPoint {
            window: series.len(),
            requests: count,
            mean_cost: acc / count as f64,
        });
    }
    let allocation = policy.allocation();
    let final_cost = expected_cost(inst, &allocation)?.total;
    Ok(NetDuelRun {
        allocation,
        series,
        swaps,
        final_cost,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Capacity, CostMatrix, Demand, ObjectSpace, Topology};
    use crate::workload::TraceEvent;

    fn line(n: usize) -> Instance<f64> {
        let rows = (0..n)
            .map(|i| (0..n).map(|j| (i as f64 - j as f64).abs()).collect())
            .collect();
        let space = ObjectSpace::Matrix(CostMatrix::from_rows(rows).unwrap());
        let topo = Topology::chain(vec![Capacity::Slots(1), Capacity::Unbounded], vec![10.0]).unwrap();
        let demand = Demand::uniform_at(n, 0, 1.0);
        Instance::new(space, topo, demand, (0..n).map(|o| (o, 1)).collect()).unwrap()
    }

    fn trace(objects: &[usize]) -> RequestTrace {
        RequestTrace::new(
            objects
                .iter()
                .enumerate()
                .map(|(t, &o)| TraceEvent {
                    time: t as f64,
                    object: o,
                    ingress: 0,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn challenger_takes_an_empty_slot_after_one_window() {
        let inst = line(5);
        let cfg = NetDuelConfig {
            window: 3,
            ..NetDuelConfig::default()
        };
        let run = netduel_run(&inst, &Allocation::new(), &trace(&[2, 2, 2, 2]), cfg).unwrap();
        assert_eq!(run.swaps.len(), 1);
        assert_eq!(run.swaps[0].inserted, 2);
        assert_eq!(run.swaps[0].request, 3);
        assert_eq!(run.allocation, Allocation::from_pairs([(2, 0)]));
    }

    #[test]
    fn infinite_margin_is_static() {
        let inst = line(5);
        let init = Allocation::from_pairs([(0, 0)]);
        let cfg = NetDuelConfig {
            window: 2,
            margin: f64::INFINITY,
            ..NetDuelConfig::default()
        };
        let run = netduel_run(&inst, &init, &trace(&[4, 4, 4, 4, 4, 4]), cfg).unwrap();
        assert!(run.swaps.is_empty());
        assert_eq!(run.allocation, init);
    }

    #[test]
    fn weak_challenger_is_discarded() {
        let inst = line(5);
        let init = Allocation::from_pairs([(2, 0)]);
        let cfg = NetDuelConfig {
            window: 4,
            ..NetDuelConfig::default()
        };
        // 3 is requested once, 2 three times: the real object saves more
        let run = netduel_run(&inst, &init, &trace(&[3, 2, 2, 2, 2]), cfg).unwrap();
        assert!(run.swaps.is_empty());
        assert_eq!(run.allocation, init);
    }
}
