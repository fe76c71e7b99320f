use serde::Serialize;

use super::{check_gamma, rate_exponent, zeta, RegionProfile};
use crate::error::{Error, Result};

/// Cost of requests of density `rate` falling in one norm-1 ball of radius
/// `r` and served by its center: `4λ r^{γ+2} / (γ+2)`.
pub fn ball_cost(rate: f64, r: f64, gamma: f64) -> f64 {
    if r == 0.0 {
        return 0.0;
    }
    4.0 * rate * r.powf(gamma + 2.0) / (gamma + 2.0)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SingleCacheSolution {
    /// Slots given to each region.
    pub slots: Vec<f64>,
    pub cost: f64,
}

/// `ζ Σ λ_i k_i^{−γ/2}` for a given slot split.
pub fn single_cache_cost(profile: &RegionProfile, slots: &[f64], gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    if slots.len() != profile.len() {
        return Err(Error::invalid(format!(
            "{} slot counts for {} regions",
            slots.len(),
            profile.len()
        )));
    }
    let z = zeta(gamma);
    Ok(profile
        .rates()
        .iter()
        .zip(slots)
        .map(|(&l, &k)| {
            if l == 0.0 {
                0.0
            } else if k <= 0.0 {
                f64::INFINITY
            } else {
                z * l * k.powf(-gamma / 2.0)
            }
        })
        .sum())
}

/// Optimal split of `k` slots: `k_i ∝ λ_i^β`, cost
/// `ζ k^{−γ/2} (Σ λ_i^β)^{1/β}`.
pub fn single_cache_opt(profile: &RegionProfile, k: f64, gamma: f64) -> Result<SingleCacheSolution> {
    check_gamma(gamma)?;
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::invalid(format!("cache size must be positive, got {k}")));
    }
    let beta = rate_exponent(gamma);
    let weights: Vec<f64> = profile.rates().iter().map(|l| l.powf(beta)).collect();
    let sum: f64 = weights.iter().sum();
    if sum == 0.0 {
        let m = profile.len() as f64;
        return Ok(SingleCacheSolution {
            slots: vec![k / m; profile.len()],
            cost: 0.0,
        });
    }
    Ok(SingleCacheSolution {
        slots: weights.iter().map(|w| k * w / sum).collect(),
        cost: zeta(gamma) * k.powf(-gamma / 2.0) * sum.powf(1.0 / beta),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_cost_values() {
        assert!((ball_cost(1.0, 1.0, 1.0) - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(ball_cost(3.0, 0.0, 1.0), 0.0);
        assert!((ball_cost(2.0, 0.5, 2.0) - 0.125).abs() < 1e-15);
    }

    #[test]
    fn single_cache_examples() {
        let s = single_cache_opt(&RegionProfile::new(vec![1.0]).unwrap(), 100.0, 1.0).unwrap();
        assert!((s.cost - 2f64.sqrt() / 3.0 / 10.0).abs() < 1e-12);
        let s = single_cache_opt(&RegionProfile::new(vec![1.0, 8.0]).unwrap(), 3.0, 1.0).unwrap();
        assert!((s.slots[0] - 0.6).abs() < 1e-12 && (s.slots[1] - 2.4).abs() < 1e-12);
        let s = single_cache_opt(&RegionProfile::new(vec![0.0, 0.0]).unwrap(), 4.0, 1.0).unwrap();
        assert_eq!((s.slots, s.cost), (vec![2.0, 2.0], 0.0));
    }

    #[test]
    fn optimum_matches_cost_of_its_own_split() {
        let p = RegionProfile::new(vec![0.3, 2.0, 5.0, 0.0]).unwrap();
        for gamma in [0.5, 1.0, 2.0] {
            let s = single_cache_opt(&p, 7.0, gamma).unwrap();
            let c = single_cache_cost(&p, &s.slots, gamma).unwrap();
            assert!((c - s.cost).abs() < 1e-12 * s.cost);
        }
    }
}
