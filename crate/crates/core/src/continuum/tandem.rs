//! Leaf and parent cache, arrivals `λ_i` at the leaf and `β λ_i` at the
//! parent. The leaf keeps the share `w_i` of region `i` and forwards the
//! rest over a hop of cost `h`.

use serde::Serialize;

use super::{check_gamma, rate_exponent, zeta, RegionProfile};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct TandemSpec {
    pub k_leaf: f64,
    /// `None` for an unbounded parent.
    pub k_parent: Option<f64>,
    pub h: f64,
    /// Parent arrival scale; zero means arrivals at the leaf only.
    pub beta_parent: f64,
    pub gamma: f64,
    pub profile: RegionProfile,
}

impl TandemSpec {
    pub fn validate(&self) -> Result<()> {
        check_gamma(self.gamma)?;
        if !(self.k_leaf > 0.0) || !self.k_leaf.is_finite() {
            return Err(Error::invalid(format!("leaf size must be positive, got {}", self.k_leaf)));
        }
        if let Some(k) = self.k_parent {
            if !(k > 0.0) || !k.is_finite() {
                return Err(Error::invalid(format!("parent size must be positive, got {k}")));
            }
        }
        if !(self.h >= 0.0) || !self.h.is_finite() {
            return Err(Error::invalid(format!("hop cost must be finite and >= 0, got {}", self.h)));
        }
        if !(self.beta_parent >= 0.0) || !self.beta_parent.is_finite() {
            return Err(Error::invalid(format!("parent scale must be >= 0, got {}", self.beta_parent)));
        }
        Ok(())
    }

    fn coefficients(&self) -> (f64, f64) {
        let z = zeta(self.gamma);
        let c1 = z * self.k_leaf.powf(-self.gamma / 2.0);
        let c2 = self.k_parent.map_or(0.0, |k| z * k.powf(-self.gamma / 2.0));
        (c1, c2)
    }

    fn check_weights(&self, w: &[f64]) -> Result<()> {
        if w.len() != self.profile.len() {
            return Err(Error::invalid(format!(
                "{} weights for {} regions",
                w.len(),
                self.profile.len()
            )));
        }
        if let Some(x) = w.iter().find(|x| !(**x >= 0.0 && **x <= 1.0)) {
            return Err(Error::invalid(format!("weights must lie in [0, 1], got {x}")));
        }
        Ok(())
    }
}

/// Precomputed per-region quantities.
struct Model {
    a: Vec<f64>,
    l: Vec<f64>,
    p: f64,
    beta: f64,
    bp: f64,
    c1: f64,
    c2: f64,
    h: f64,
    gamma: f64,
}

impl Model {
    fn new(spec: &TandemSpec) -> Self {
        let beta = rate_exponent(spec.gamma);
        let (c1, c2) = spec.coefficients();
        Model {
            a: spec.profile.rates().iter().map(|x| x.powf(beta)).collect(),
            l: spec.profile.rates().to_vec(),
            p: 1.0 / beta,
            beta,
            bp: spec.beta_parent,
            c1,
            c2,
            h: spec.h,
            gamma: spec.gamma,
        }
    }

    /// `(β_p + (1−w)^{1/β})^β`.
    fn phi(&self, w: f64) -> f64 {
        (self.bp + (1.0 - w).powf(self.p)).powf(self.beta)
    }

    /// `(1−w)^{γ/2} / (β_p + (1−w)^{1/β})^{γ/(γ+2)}`, equal to one in the
    /// limit `β_p = 0`.
    fn ratio(&self, w: f64) -> f64 {
        let u = 1.0 - w;
        if self.gamma == 0.0 {
            return 1.0;
        }
        if self.bp == 0.0 {
            return 1.0;
        }
        u.powf(self.gamma / 2.0) / (self.bp + u.powf(self.p)).powf(self.gamma / (self.gamma + 2.0))
    }

    fn sums(&self, w: &[f64]) -> (f64, f64) {
        let s1 = self.a.iter().zip(w).map(|(a, x)| a * x).sum();
        let s2 = self.a.iter().zip(w).map(|(a, &x)| a * self.phi(x)).sum();
        (s1, s2)
    }

    fn pow_pos(s: f64, e: f64) -> f64 {
        if e == 0.0 {
            1.0
        } else if s <= 0.0 {
            0.0
        } else {
            s.powf(e)
        }
    }

    fn cost(&self, w: &[f64]) -> f64 {
        let (s1, s2) = self.sums(w);
        let forwarded: f64 = self.l.iter().zip(w).map(|(l, x)| l * (1.0 - x)).sum();
        self.c1 * Self::pow_pos(s1, self.p) + self.c2 * Self::pow_pos(s2, self.p) + self.h * forwarded
    }

    /// Three terms of the derivative along `w_i` given the sums.
    fn grad_terms(&self, i: usize, w: f64, s1: f64, s2: f64) -> (f64, f64, f64) {
        let e = self.p - 1.0;
        let t1 = self.c1 * self.p * Self::pow_pos(s1, e) * self.a[i];
        let t2 = if self.c2 == 0.0 {
            0.0
        } else {
            self.c2 * self.p * Self::pow_pos(s2, e) * self.a[i] * self.ratio(w)
        };
        (t1, -t2, -self.h * self.l[i])
    }
}

/// Total approximation plus retrieval cost for leaf shares `w`.
pub fn tandem_both_cost(w: &[f64], spec: &TandemSpec) -> Result<f64> {
    spec.validate()?;
    spec.check_weights(w)?;
    Ok(Model::new(spec).cost(w))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Side {
    /// At `w = 0`: only the right derivative exists.
    Right,
    /// At `w = 1`: only the left derivative exists.
    Left,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TandemGradient {
    pub values: Vec<f64>,
    /// Components evaluated at the edge of `[0, 1]` are one-sided.
    pub one_sided: Vec<Option<Side>>,
}

pub fn tandem_both_grad(w: &[f64], spec: &TandemSpec) -> Result<TandemGradient> {
    spec.validate()?;
    spec.check_weights(w)?;
    let m = Model::new(spec);
    let (s1, s2) = m.sums(w);
    let values = (0..w.len())
        .map(|i| {
            let (a, b, c) = m.grad_terms(i, w[i], s1, s2);
            a + b + c
        })
        .collect();
    let one_sided = w
        .iter()
        .map(|&x| {
            if x == 0.0 {
                Some(Side::Right)
            } else if x == 1.0 {
                Some(Side::Left)
            } else {
                None
            }
        })
        .collect();
    Ok(TandemGradient { values, one_sided })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TandemSolution {
    pub weights: Vec<f64>,
    pub cost: f64,
    pub kkt_residual: f64,
    pub sweeps: usize,
    /// False when the budget ran out before the residual target.
    pub converged: bool,
}

fn residual(m: &Model, w: &[f64]) -> f64 {
    let (s1, s2) = m.sums(w);
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (i, &x) in w.iter().enumerate() {
        let (a, b, c) = m.grad_terms(i, x, s1, s2);
        let g = a + b + c;
        scale = scale.max(a.abs() + b.abs() + c.abs());
        let v = if x <= 0.0 {
            (-g).max(0.0)
        } else if x >= 1.0 {
            g.max(0.0)
        } else {
            g.abs()
        };
        worst = worst.max(v);
    }
    if scale == 0.0 {
        0.0
    } else {
        worst / scale
    }
}

/// Minimizes the cost over `[0,1]^M` by exact coordinate minimization; the
/// objective is convex, so each coordinate's derivative is monotone and a
/// bisection finds its minimizer.
pub fn tandem_both_solve(spec: &TandemSpec, tolerance: f64, max_sweeps: usize) -> Result<TandemSolution> {
    spec.validate()?;
    let m = Model::new(spec);
    let n = spec.profile.len();
    let mut w = vec![1.0; n];
    let (mut s1, mut s2) = m.sums(&w);
    let mut sweeps = 0;
    let mut res = residual(&m, &w);
    while res > tolerance && sweeps < max_sweeps {
        sweeps += 1;
        for i in 0..n {
            if m.a[i] == 0.0 && m.l[i] == 0.0 {
                continue;
            }
            let old = w[i];
            let r1 = s1 - m.a[i] * old;
            let r2 = s2 - m.a[i] * m.phi(old);
            let g = |x: f64| {
                let (a, b, c) = m.grad_terms(i, x, r1 + m.a[i] * x, r2 + m.a[i] * m.phi(x));
                a + b + c
            };
            let new = if g(0.0) >= 0.0 {
                0.0
            } else if g(1.0) <= 0.0 {
                1.0
            } else {
                let (mut lo, mut hi) = (0.0, 1.0);
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if g(mid) < 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            };
            w[i] = new;
            s1 = r1 + m.a[i] * new;
            s2 = r2 + m.a[i] * m.phi(new);
        }
        // refresh sums against drift
        let (a, b) = m.sums(&w);
        s1 = a;
        s2 = b;
        res = residual(&m, &w);
    }
    let converged = res <= tolerance;
    if !converged {
        log::warn!("tandem solve stopped after {sweeps} sweeps with KKT residual {res:e}");
    }
    Ok(TandemSolution {
        cost: m.cost(&w),
        weights: w,
        kkt_residual: res,
        sweeps,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::continuum::single_cache_opt;

    fn spec(rates: Vec<f64>, bp: f64, h: f64, gamma: f64) -> TandemSpec {
        TandemSpec {
            k_leaf: 10.0,
            k_parent: Some(10.0),
            h,
            beta_parent: bp,
            gamma,
            profile: RegionProfile::new(rates).unwrap(),
        }
    }

    #[test]
    fn leaf_only_all_local_is_single_cache() {
        let s = spec(vec![1.0, 3.0, 0.5], 0.0, 1.0, 1.0);
        let c = tandem_both_cost(&[1.0, 1.0, 1.0], &s).unwrap();
        let single = single_cache_opt(&s.profile, 10.0, 1.0).unwrap().cost;
        assert!((c - single).abs() < 1e-12 * single);
    }

    #[test]
    fn all_forwarded_single_region() {
        let s = spec(vec![1.0], 0.7, 0.0, 1.0);
        let c = tandem_both_cost(&[0.0], &s).unwrap();
        let expect = 2f64.sqrt() / 3.0 * 10f64.powf(-0.5) * (0.7 + 1.0);
        assert!((c - expect).abs() < 1e-12);
    }

    #[test]
    fn expensive_hop_keeps_everything_local() {
        let s = spec(vec![1.0, 2.0, 3.0], 1.0, 1e6, 1.0);
        let sol = tandem_both_solve(&s, 1e-8, 10_000).unwrap();
        assert!(sol.weights.iter().all(|&w| w == 1.0));
    }

    #[test]
    fn free_unbounded_parent_takes_everything() {
        let mut s = spec(vec![1.0, 2.0, 3.0], 0.0, 0.0, 1.0);
        s.k_parent = None;
        let sol = tandem_both_solve(&s, 1e-8, 10_000).unwrap();
        assert!(sol.weights.iter().all(|&w| w == 0.0), "{:?}", sol.weights);
    }
}
