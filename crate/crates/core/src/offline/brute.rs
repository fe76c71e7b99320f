use crate::error::{Error, Result};
use crate::model::{Allocation, Approximizer, Instance, NodeId, ObjectId};
use crate::scalar::Scalar;

pub const DEFAULT_CAP: u128 = 10_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BruteLimits {
    /// Largest number of configurations to enumerate.
    pub max_configurations: u128,
}

impl Default for BruteLimits {
    fn default() -> Self {
        BruteLimits {
            max_configurations: DEFAULT_CAP,
        }
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Number of configurations that fill every cache.
pub fn configuration_count<S: Scalar>(instance: &Instance<S>) -> u128 {
    let o = instance.objects();
    instance.caches().iter().fold(1u128, |acc, &node| {
        let k = instance.topology().capacity(node).slots().unwrap_or(0).min(o);
        acc.saturating_mul(binomial(o, k))
    })
}

struct Search<'a, S> {
    instance: &'a Instance<S>,
    nodes: Vec<(NodeId, usize)>,
    /// `cost[level][r * objects + o]`: cost of serving request `r` with
    /// object `o` stored at `nodes[level]` (infinite when off-path).
    cost: Vec<Vec<S>>,
    rates: Vec<S>,
    chosen: Vec<Vec<ObjectId>>,
    best: Option<(S, Vec<Vec<ObjectId>>)>,
}

impl<S: Scalar> Search<'_, S> {
    fn node(&mut self, level: usize, cur: &[S]) {
        if level == self.nodes.len() {
            let total: S = cur.iter().zip(&self.rates).map(|(&c, &l)| l * c).sum();
            if self.best.as_ref().is_none_or(|(b, _)| total < *b) {
                self.best = Some((total, self.chosen.clone()));
            }
            return;
        }
        let k = self.nodes[level].1;
        self.combos(level, 0, k, cur.to_vec());
    }

    fn combos(&mut self, level: usize, start: usize, left: usize, cur: Vec<S>) {
        if left == 0 {
            self.node(level + 1, &cur);
            return;
        }
        let objects = self.instance.objects();
        for o in start..=objects - left {
            let mut next = cur.clone();
            for (r, c) in next.iter_mut().enumerate() {
                *c = c.min_of(self.cost[level][r * objects + o]);
            }
            self.chosen[level].push(o);
            self.combos(level, o + 1, left - 1, next);
            self.chosen[level].pop();
        }
    }
}

/// Global optimum by exhaustive enumeration. Every cache is filled, which
/// loses nothing since adding an approximizer never raises the cost.
pub fn brute_force_optimal<S: Scalar>(instance: &Instance<S>, limits: BruteLimits) -> Result<(Allocation, S)> {
    let size = configuration_count(instance);
    if size > limits.max_configurations {
        return Err(Error::CombinatorialSize {
            size,
            cap: limits.max_configurations,
        });
    }
    let objects = instance.objects();
    let requests = instance.requests();
    let nodes: Vec<(NodeId, usize)> = instance
        .caches()
        .iter()
        .map(|&n| (n, instance.topology().capacity(n).slots().unwrap_or(0).min(objects)))
        .collect();
    let cost = nodes
        .iter()
        .map(|&(node, _)| {
            let mut table = vec![S::infinity(); requests.len() * objects];
            for (r, req) in requests.iter().enumerate() {
                if let Some(stop) = req.stops.iter().find(|s| s.node == node) {
                    for o in 0..objects {
                        table[r * objects + o] = instance.space().cost(req.object, o) + stop.hop;
                    }
                }
            }
            table
        })
        .collect();
    let mut search = Search {
        instance,
        chosen: vec![Vec::new(); nodes.len()],
        nodes,
        cost,
        rates: requests.iter().map(|r| r.rate).collect(),
        best: None,
    };
    let start: Vec<S> = requests.iter().map(|r| r.fallback.cost).collect();
    search.node(0, &start);
    let (cost, chosen) = search.best.expect("at least one configuration");
    let allocation = search
        .nodes
        .iter()
        .zip(chosen)
        .flat_map(|(&(node, _), objs)| objs.into_iter().map(move |o| Approximizer::new(o, node)))
        .collect();
    Ok((allocation, cost))
}
