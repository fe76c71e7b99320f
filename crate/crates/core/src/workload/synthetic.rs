use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp, Normal};

use super::embedding::{Barycenter, EmbeddingCatalog};
use super::trace::{RequestTrace, TraceEvent};
use crate::error::{Error, Result};
use crate::model::{Demand, NodeId};

/// Norm-1 distance of grid point `(x, y)` (object `y * side + x`) from the
/// grid center `((side−1)/2, (side−1)/2)`; for even sides the center falls
/// between four points.
pub fn grid_center_distance(side: usize, object: usize) -> f64 {
    let c = (side as f64 - 1.0) / 2.0;
    let (x, y) = ((object % side) as f64, (object / side) as f64);
    (x - c).abs() + (y - c).abs()
}

/// Rates `∝ exp(−d²/(2σ²))` over the `side × side` grid, summing to `total`.
pub fn gaussian_grid_rates(side: usize, sigma: f64, total: f64) -> Result<Vec<f64>> {
    if side == 0 {
        return Err(Error::invalid("grid side must be at least 1"));
    }
    if !(sigma > 0.0) {
        return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
    }
    if !(total >= 0.0) || !total.is_finite() {
        return Err(Error::invalid(format!("total rate must be finite and >= 0, got {total}")));
    }
    let raw: Vec<f64> = (0..side * side)
        .map(|o| {
            let d = grid_center_distance(side, o);
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|r| total * r / sum).collect())
}

pub fn gaussian_grid_demand(side: usize, sigma: f64, total: f64, ingress: NodeId) -> Result<Demand<f64>> {
    Ok(Demand::from_rates_at(&gaussian_grid_rates(side, sigma, total)?, ingress))
}

pub fn uniform_demand(objects: usize, total: f64, ingress: NodeId) -> Result<Demand<f64>> {
    if objects == 0 {
        return Err(Error::invalid("uniform demand needs at least one object"));
    }
    if !(total >= 0.0) || !total.is_finite() {
        return Err(Error::invalid(format!("total rate must be finite and >= 0, got {total}")));
    }
    Ok(Demand::uniform_at(objects, ingress, total / objects as f64))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Horizon {
    /// Simulated time span.
    Duration(f64),
    /// Number of requests.
    Requests(usize),
}

/// Merges independent Poisson streams, one per request class: exponential
/// gaps at the total rate, each arrival's class drawn by rate.
pub fn sample_trace(demand: &Demand<f64>, horizon: Horizon, seed: u64) -> Result<RequestTrace> {
    let Demand::Discrete(entries) = demand else {
        return Err(Error::invalid("traces are sampled from per-object demand"));
    };
    let entries: Vec<_> = entries.iter().filter(|e| e.rate > 0.0).collect();
    let total: f64 = entries.iter().map(|e| e.rate).sum();
    let mut trace = RequestTrace {
        events: Vec::new(),
        seed: Some(seed),
        provenance: Some("poisson".into()),
    };
    let empty = match horizon {
        Horizon::Duration(t) => !(t > 0.0),
        Horizon::Requests(n) => n == 0,
    };
    if total <= 0.0 || empty {
        return Ok(trace);
    }
    if !total.is_finite() {
        return Err(Error::invalid("total rate must be finite"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pick = WeightedIndex::new(entries.iter().map(|e| e.rate)).map_err(|e| Error::invalid(e.to_string()))?;
    let gap = Exp::new(total).map_err(|e| Error::invalid(e.to_string()))?;
    let mut t = 0.0;
    loop {
        t += gap.sample(&mut rng);
        match horizon {
            Horizon::Duration(end) if t > end => break,
            Horizon::Requests(n) if trace.events.len() >= n => break,
            _ => {}
        }
        let e = entries[pick.sample(&mut rng)];
        trace.events.push(TraceEvent {
            time: t,
            object: e.object,
            ingress: e.ingress,
        });
    }
    Ok(trace)
}

/// Parameters of the clustered embedding generator.
#[derive(Clone, Debug, PartialEq)]
pub struct ClusteredSpec {
    pub items: usize,
    pub dim: usize,
    pub clusters: usize,
    /// Distance of each cluster center from the origin.
    pub spread: f64,
    /// Per-coordinate standard deviation within a cluster.
    pub sigma: f64,
    /// Popularity `∝ exp(−|x| / decay)`.
    pub decay: f64,
    pub events: usize,
    pub seed: u64,
}

impl Default for ClusteredSpec {
    fn default() -> Self {
        ClusteredSpec {
            items: 10_000,
            dim: 10,
            clusters: 3,
            spread: 2.0,
            sigma: 1.5,
            decay: 1.0,
            events: 100_000,
            seed: 1,
        }
    }
}

/// Items in Gaussian clusters whose centers are spread evenly on a circle
/// around the origin (first two coordinates), and a trace whose item
/// popularity decays with the distance from the origin.
pub fn clustered_catalog(spec: &ClusteredSpec, ingress: NodeId) -> Result<(EmbeddingCatalog, RequestTrace)> {
    if spec.items == 0 || spec.dim < 2 || spec.clusters == 0 {
        return Err(Error::invalid("clustered catalog needs items, clusters and dimension >= 2"));
    }
    if !(spec.sigma > 0.0) || !(spec.decay > 0.0) || !(spec.spread >= 0.0) {
        return Err(Error::invalid("cluster sigma and decay must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let mut coords = Vec::with_capacity(spec.items * spec.dim);
    let mut weights = Vec::with_capacity(spec.items);
    for i in 0..spec.items {
        let c = i % spec.clusters;
        let angle = 2.0 * std::f64::consts::PI * c as f64 / spec.clusters as f64;
        let mut norm2 = 0.0;
        for d in 0..spec.dim {
            let center = match d {
                0 => spec.spread * angle.cos(),
                1 => spec.spread * angle.sin(),
                _ => 0.0,
            };
            let x = center + noise.sample(&mut rng);
            norm2 += x * x;
            coords.push(x);
        }
        weights.push((-norm2.sqrt() / spec.decay).exp());
    }
    let pick = WeightedIndex::new(&weights).map_err(|e| Error::invalid(e.to_string()))?;
    let mut counts = vec![0u64; spec.items];
    let events = (0..spec.events)
        .map(|t| {
            let object = pick.sample(&mut rng);
            counts[object] += 1;
            TraceEvent {
                time: t as f64,
                object,
                ingress,
            }
        })
        .collect();
    let ids = (0..spec.items).map(|i| format!("item{i}")).collect();
    let catalog = EmbeddingCatalog::new(ids, spec.dim, coords, counts, Barycenter::Weighted)?;
    let mut trace = RequestTrace::new(events)?;
    trace.seed = Some(spec.seed);
    trace.provenance = Some("clustered".into());
    Ok((catalog, trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_profile_values() {
        let r = gaussian_grid_rates(100, 12.5, 1.0).unwrap();
        let center = r[49 * 100 + 49];
        assert_eq!(grid_center_distance(100, 49 * 100 + 49), 1.0);
        let max = r.iter().copied().fold(0.0, f64::max);
        assert_eq!(center, max);
        // (74, 49) is 25 hops from the center; relative to the (virtual)
        // center point its weight is e^{-2}
        let far = r[49 * 100 + 74];
        assert_eq!(grid_center_distance(100, 49 * 100 + 74), 25.0);
        let rel = far / center * (-1.0f64 / (2.0 * 12.5 * 12.5)).exp();
        assert!((rel - (-2f64).exp()).abs() < 1e-12);
        assert!((rel - 0.1353).abs() < 1e-4);
        assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(gaussian_grid_rates(4, 0.0, 1.0).is_err());
    }

    #[test]
    fn odd_grid_has_a_center_point() {
        let r = gaussian_grid_rates(5, 1.0, 1.0).unwrap();
        let max = r.iter().copied().fold(0.0, f64::max);
        assert_eq!(r[12], max);
        assert!(r.iter().enumerate().all(|(i, &x)| i == 12 || x < max));
    }

    #[test]
    fn trace_horizons() {
        let d = uniform_demand(3, 3.0, 0).unwrap();
        assert!(sample_trace(&d, Horizon::Requests(0), 1).unwrap().is_empty());
        assert!(sample_trace(&d, Horizon::Duration(0.0), 1).unwrap().is_empty());
        let t = sample_trace(&d, Horizon::Requests(100), 1).unwrap();
        assert_eq!(t.len(), 100);
        let zero = Demand::from_rates_at(&[0.0, 0.0], 0);
        assert!(sample_trace(&zero, Horizon::Requests(10), 1).unwrap().is_empty());
    }
}
