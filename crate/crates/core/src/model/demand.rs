use std::collections::BTreeSet;

use super::space::ObjectId;
use super::topology::NodeId;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Poisson rate of requests for `object` entering at `ingress`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateEntry<S> {
    pub object: ObjectId,
    pub ingress: NodeId,
    pub rate: S,
}

/// Piecewise-constant request density over unit-area regions.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionRates {
    /// Center of every region.
    pub centers: Vec<Vec<f64>>,
    /// `(region, ingress, rate)` triples.
    pub rates: Vec<(usize, NodeId, f64)>,
}

impl RegionRates {
    pub fn regions(&self) -> usize {
        self.centers.len()
    }

    /// Per-region rates observed at one ingress node.
    pub fn rates_at(&self, ingress: NodeId) -> Vec<f64> {
        let mut out = vec![0.0; self.regions()];
        for &(region, node, rate) in &self.rates {
            if node == ingress {
                out[region] += rate;
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Demand<S> {
    Discrete(Vec<RateEntry<S>>),
    Regions(RegionRates),
}

impl<S: Scalar> Demand<S> {
    /// Same rate for every object, all entering at `ingress`.
    pub fn uniform_at(objects: usize, ingress: NodeId, rate: S) -> Self {
        Demand::Discrete(
            (0..objects)
                .map(|object| RateEntry {
                    object,
                    ingress,
                    rate,
                })
                .collect(),
        )
    }

    /// Rates given per object, all entering at `ingress`.
    pub fn from_rates_at(rates: &[S], ingress: NodeId) -> Self {
        Demand::Discrete(
            rates
                .iter()
                .enumerate()
                .map(|(object, &rate)| RateEntry {
                    object,
                    ingress,
                    rate,
                })
                .collect(),
        )
    }

    pub fn validate(&self, objects: usize, nodes: usize) -> Result<()> {
        match self {
            Demand::Discrete(entries) => {
                for e in entries {
                    if e.object >= objects {
                        return Err(Error::instance(format!("demand names unknown object {}", e.object)));
                    }
                    if e.ingress >= nodes {
                        return Err(Error::instance(format!("demand names unknown node {}", e.ingress)));
                    }
                    if !(e.rate >= S::zero()) || e.rate.is_infinite() {
                        return Err(Error::instance(format!(
                            "rate for object {} at node {} must be finite and >= 0, got {}",
                            e.object, e.ingress, e.rate
                        )));
                    }
                }
            }
            Demand::Regions(r) => {
                if r.regions() == 0 {
                    return Err(Error::instance("region demand needs at least one region"));
                }
                for &(region, node, rate) in &r.rates {
                    if region >= r.regions() || node >= nodes {
                        return Err(Error::instance(format!(
                            "region rate ({region}, {node}) out of range"
                        )));
                    }
                    if !(rate >= 0.0) || !rate.is_finite() {
                        return Err(Error::instance(format!("region rate {rate} must be finite and >= 0")));
                    }
                }
            }
        }
        Ok(())
    }

    /// Number of distinct objects with positive demand.
    pub fn requested_objects(&self) -> usize {
        match self {
            Demand::Discrete(entries) => entries
                .iter()
                .filter(|e| e.rate > S::zero())
                .map(|e| e.object)
                .collect::<BTreeSet<_>>()
                .len(),
            Demand::Regions(r) => r
                .rates
                .iter()
                .filter(|t| t.2 > 0.0)
                .map(|t| t.0)
                .collect::<BTreeSet<_>>()
                .len(),
        }
    }

    pub fn total_rate(&self) -> f64 {
        match self {
            Demand::Discrete(entries) => entries.iter().map(|e| e.rate.to_f64()).sum(),
            Demand::Regions(r) => r.rates.iter().map(|t| t.2).sum(),
        }
    }
}
