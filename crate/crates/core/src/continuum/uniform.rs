//! Tandem with uniform arrivals at both caches and the parent's square
//! tessellation shifted so its centers sit on the corners of the leaf's.
//! A leaf request forwards exactly when that is cheaper:
//! `d_leaf^γ > d_parent^γ + h`.

use serde::Serialize;

use super::{ball_cost, check_gamma};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UniformTandem {
    /// Tessellation radius `sqrt(area / (2k))`.
    pub radius: f64,
    /// Width of the forwarded band (`max(0, (r−h)/2)`), for `γ = 1` only.
    pub z: Option<f64>,
    /// Leaf cost saved per parent slot, per unit leaf rate.
    pub saving_per_slot: f64,
    /// Largest `h` at which the leaf still forwards: `r^γ`.
    pub onset: f64,
    pub leaf_cost: f64,
    pub parent_cost: f64,
    pub cost: f64,
}

/// Saving per slot and unit rate: `8 ∫∫ max(0, d_leaf^γ − d_parent^γ − h)`
/// over one eighth of a leaf ball.
pub fn slot_saving(r: f64, h: f64, gamma: f64) -> f64 {
    if gamma == 1.0 {
        let z = (0.5 * (r - h)).max(0.0);
        return 8.0 / 3.0 * z * z * z;
    }
    // Point (u, v) with r/2 ≤ u ≤ r, 0 ≤ v ≤ r − u:
    // d_leaf = u + v, d_parent = r − u + v.
    let inner = |u: f64| -> f64 {
        let top = r - u;
        if top <= 0.0 {
            return 0.0;
        }
        let s = |v: f64| (u + v).powf(gamma) - (r - u + v).powf(gamma) - h;
        // s is monotone in v, so the positive part is an interval
        let (s0, s1) = (s(0.0), s(top));
        let (lo, hi) = match (s0 > 0.0, s1 > 0.0) {
            (false, false) => return 0.0,
            (true, true) => (0.0, top),
            (a, _) => {
                let (mut x0, mut x1) = (0.0, top);
                for _ in 0..80 {
                    let mid = 0.5 * (x0 + x1);
                    if (s(mid) > 0.0) == a {
                        x0 = mid;
                    } else {
                        x1 = mid;
                    }
                }
                let root = 0.5 * (x0 + x1);
                if a {
                    (0.0, root)
                } else {
                    (root, top)
                }
            }
        };
        gauss(&|v| s(v).max(0.0), lo, hi, 8)
    };
    // The largest saving along v grows with u (it sits at v = 0 or at
    // v = r − u), so the support in u is an interval ending at r.
    let peak = |u: f64| {
        let top = r - u;
        let s = |v: f64| (u + v).powf(gamma) - (r - u + v).powf(gamma) - h;
        s(0.0).max(s(top))
    };
    let (mut lo, mut hi) = (0.5 * r, r);
    if peak(hi - 1e-15 * r) <= 0.0 {
        return 0.0;
    }
    if peak(lo) <= 0.0 {
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if peak(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    }
    let pieces = 16;
    let step = (r - lo) / pieces as f64;
    let eps = 1e-13 * r.powf(gamma + 2.0).max(1e-300);
    8.0 * (0..pieces)
        .map(|p| adaptive_simpson(&inner, lo + p as f64 * step, lo + (p + 1) as f64 * step, eps, 40))
        .sum::<f64>()
}

/// Composite 10-point Gauss–Legendre on `pieces` equal subintervals.
fn gauss(f: &dyn Fn(f64) -> f64, a: f64, b: f64, pieces: usize) -> f64 {
    const X: [f64; 5] = [
        0.148_874_338_981_631_2,
        0.433_395_394_129_247_2,
        0.679_409_568_299_024_4,
        0.865_063_366_688_984_5,
        0.973_906_528_517_171_7,
    ];
    const W: [f64; 5] = [
        0.295_524_224_714_752_9,
        0.269_266_719_309_996_4,
        0.219_086_362_515_982_0,
        0.149_451_349_150_580_6,
        0.066_671_344_308_688_1,
    ];
    if b <= a {
        return 0.0;
    }
    let step = (b - a) / pieces as f64;
    let mut total = 0.0;
    for p in 0..pieces {
        let lo = a + p as f64 * step;
        let mid = lo + 0.5 * step;
        let half = 0.5 * step;
        for k in 0..5 {
            total += W[k] * (f(mid - half * X[k]) + f(mid + half * X[k])) * half;
        }
    }
    total
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, eps: f64, depth: u32) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, eps: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * eps {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, eps / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, eps / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, eps, depth)
}

/// Expected cost of the shifted tessellations: both caches hold `k` slots
/// over a domain of the given area; `leaf_rate` and `parent_rate` are
/// request densities per unit area.
pub fn tandem_uniform_analytic(
    k: f64,
    h: f64,
    gamma: f64,
    area: f64,
    leaf_rate: f64,
    parent_rate: f64,
) -> Result<UniformTandem> {
    check_gamma(gamma)?;
    if !(h >= 0.0) {
        return Err(Error::invalid(format!("hop cost must be >= 0, got {h}")));
    }
    if !(k > 0.0) || !(area > 0.0) || !k.is_finite() || !area.is_finite() {
        return Err(Error::invalid("cache size and area must be positive"));
    }
    if !(leaf_rate >= 0.0) || !(parent_rate >= 0.0) {
        return Err(Error::invalid("rates must be >= 0"));
    }
    let r = (area / (2.0 * k)).sqrt();
    let saving = if h.is_finite() { slot_saving(r, h, gamma) } else { 0.0 };
    let leaf_cost = k * ball_cost(leaf_rate, r, gamma) - k * leaf_rate * saving;
    let parent_cost = k * ball_cost(parent_rate, r, gamma);
    Ok(UniformTandem {
        radius: r,
        z: (gamma == 1.0).then(|| (0.5 * (r - h)).max(0.0)),
        saving_per_slot: saving,
        onset: r.powf(gamma),
        leaf_cost,
        parent_cost,
        cost: leaf_cost + parent_cost,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute 2-D midpoint integration of the saving over a whole leaf ball.
    fn grid_saving(r: f64, h: f64, gamma: f64, n: usize) -> f64 {
        let corners = [(r, 0.0), (-r, 0.0), (0.0, r), (0.0, -r)];
        let step = 2.0 * r / n as f64;
        let mut total = 0.0;
        for a in 0..n {
            for b in 0..n {
                let x = -r + (a as f64 + 0.5) * step;
                let y = -r + (b as f64 + 0.5) * step;
                let dl = x.abs() + y.abs();
                if dl > r {
                    continue;
                }
                let dp = corners
                    .iter()
                    .map(|(cx, cy)| (x - cx).abs() + (y - cy).abs())
                    .fold(f64::INFINITY, f64::min);
                total += (dl.powf(gamma) - dp.powf(gamma) - h).max(0.0) * step * step;
            }
        }
        total
    }

    #[test]
    fn closed_form_at_gamma_one() {
        assert!((slot_saving(1.0, 0.0, 1.0) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(slot_saving(1.0, 1.0, 1.0), 0.0);
        assert_eq!(slot_saving(1.0, 2.0, 1.0), 0.0);
        let g = grid_saving(1.0, 0.0, 1.0, 1200);
        assert!((g - 1.0 / 3.0).abs() < 2e-3, "{g}");
    }

    #[test]
    fn quadrature_matches_grid() {
        for gamma in [0.5, 2.0] {
            for h in [0.0, 0.2, 0.6] {
                let q = slot_saving(1.0, h, gamma);
                let g = grid_saving(1.0, h, gamma, 1200);
                assert!((q - g).abs() < 2e-2 * q.max(1e-3), "gamma {gamma} h {h}: {q} vs {g}");
            }
        }
    }

    #[test]
    fn quadrature_reference_value() {
        // independent adaptive cubature
        for (gamma, h, v) in [
            (0.5, 0.2, 0.079_786_666_62),
            (0.5, 0.6, 0.003_099_811_958),
            (2.0, 0.6, 0.045_612_212_558),
            (2.0, 0.2, 0.243_699_057_602),
        ] {
            assert!((slot_saving(1.0, h, gamma) - v).abs() < 1e-9, "gamma {gamma} h {h}");
        }
    }

    #[test]
    fn no_forwarding_past_onset() {
        let t = tandem_uniform_analytic(50.0, 10.0, 1.0, 10_000.0, 1.0, 1.0).unwrap();
        assert_eq!(t.radius, 10.0);
        assert_eq!(t.saving_per_slot, 0.0);
        let single = 50.0 * ball_cost(1.0, 10.0, 1.0);
        assert!((t.cost - 2.0 * single).abs() < 1e-9);
        let below = tandem_uniform_analytic(50.0, 10.0 - 1e-6, 1.0, 10_000.0, 1.0, 1.0).unwrap();
        assert!((below.cost - t.cost).abs() < 1e-9);
        assert!(tandem_uniform_analytic(1.0, -1.0, 1.0, 1.0, 1.0, 1.0).is_err());
    }
}
