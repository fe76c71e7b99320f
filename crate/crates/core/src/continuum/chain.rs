//! Chain of caches with arrivals at the leaf. Level `j` serving the share
//! `w_ij` of every region costs `c_j S_j^{1/β} + h_j L_j` with
//! `S_j = Σ w_ij λ_i^β`, `L_j = Σ w_ij λ_i` and `c_j = ζ k_j^{−γ/2}`
//! (zero for an unbounded level).

use serde::Serialize;

use super::{check_gamma, rate_exponent, zeta, RegionProfile};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ChainSpec {
    /// Slots per level from the leaf up; `None` is an unbounded level (the
    /// repository).
    pub sizes: Vec<Option<f64>>,
    /// Retrieval cost from the leaf to each level, leaf first. An infinite
    /// entry removes the level.
    pub hops: Vec<f64>,
    pub gamma: f64,
}

impl ChainSpec {
    pub fn new(sizes: Vec<Option<f64>>, hops: Vec<f64>, gamma: f64) -> Result<Self> {
        let spec = ChainSpec { sizes, hops, gamma };
        spec.validate()?;
        Ok(spec)
    }

    /// Caches of the given sizes, then an unbounded repository; `hops` has
    /// one entry per level including the repository.
    pub fn with_repository(sizes: &[f64], hops: Vec<f64>, gamma: f64) -> Result<Self> {
        let mut s: Vec<Option<f64>> = sizes.iter().map(|&k| Some(k)).collect();
        s.push(None);
        ChainSpec::new(s, hops, gamma)
    }

    pub fn validate(&self) -> Result<()> {
        check_gamma(self.gamma)?;
        if self.sizes.is_empty() || self.sizes.len() != self.hops.len() {
            return Err(Error::invalid(format!(
                "chain has {} sizes and {} hop costs",
                self.sizes.len(),
                self.hops.len()
            )));
        }
        for (j, s) in self.sizes.iter().enumerate() {
            if let Some(k) = s {
                if !(*k > 0.0) || !k.is_finite() {
                    return Err(Error::invalid(format!("level {j} has size {k}; sizes must be positive")));
                }
            }
        }
        for (j, h) in self.hops.iter().enumerate() {
            if !(*h >= 0.0) {
                return Err(Error::invalid(format!("level {j} has hop cost {h}")));
            }
        }
        if self.hops.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::invalid("hop costs must not decrease along the chain"));
        }
        if !self.hops[0].is_finite() {
            return Err(Error::invalid("the leaf must be reachable"));
        }
        Ok(())
    }

    pub fn levels(&self) -> usize {
        self.sizes.len()
    }

    pub fn beta(&self) -> f64 {
        rate_exponent(self.gamma)
    }

    /// `ζ k_j^{−γ/2}`, zero for an unbounded level.
    pub fn coefficient(&self, j: usize) -> f64 {
        match self.sizes[j] {
            Some(k) => zeta(self.gamma) * k.powf(-self.gamma / 2.0),
            None => 0.0,
        }
    }

    fn active(&self) -> Vec<usize> {
        (0..self.levels()).filter(|&j| self.hops[j].is_finite()).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveOptions {
    pub max_iterations: usize,
    /// Target on the normalized KKT residual.
    pub tolerance: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            max_iterations: 200_000,
            tolerance: 1e-9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContinuousSolution {
    /// `weights[i][j]`: share of region `i` served by level `j`.
    pub weights: Vec<Vec<f64>>,
    /// Slots level `j` devotes to region `i` (infinite at unbounded levels).
    pub slots: Vec<Vec<f64>>,
    /// Ball radius `sqrt(w_ij / (2 k_ij))` of those slots.
    pub radii: Vec<Vec<f64>>,
    /// Rate cutoffs from the leaf up: `thresholds[0]` is the largest rate
    /// and `thresholds[j]` the smallest rate still served below level `j`.
    pub thresholds: Vec<f64>,
    pub cost: f64,
    pub approximation: Vec<f64>,
    pub retrieval: Vec<f64>,
    pub kkt_residual: f64,
    pub iterations: usize,
}

/// Sums and marginal terms shared by both solvers.
struct Terms<'a> {
    spec: &'a ChainSpec,
    a: Vec<f64>,
    l: Vec<f64>,
    inv_beta: f64,
}

impl<'a> Terms<'a> {
    fn new(profile: &RegionProfile, spec: &'a ChainSpec) -> Self {
        let beta = spec.beta();
        Terms {
            spec,
            a: profile.rates().iter().map(|x| x.powf(beta)).collect(),
            l: profile.rates().to_vec(),
            inv_beta: 1.0 / beta,
        }
    }

    fn level_cost(&self, j: usize, s: f64, load: f64) -> (f64, f64) {
        let approx = if s > 0.0 {
            self.spec.coefficient(j) * s.powf(self.inv_beta)
        } else {
            0.0
        };
        let retr = if load > 0.0 { self.spec.hops[j] * load } else { 0.0 };
        (approx, retr)
    }

    /// `d(c_j S^{1/β})/dS`.
    fn slope(&self, j: usize, s: f64) -> f64 {
        let c = self.spec.coefficient(j);
        if c == 0.0 {
            return 0.0;
        }
        let e = self.inv_beta - 1.0;
        if e == 0.0 {
            c * self.inv_beta
        } else if s <= 0.0 {
            0.0
        } else {
            c * self.inv_beta * s.powf(e)
        }
    }

    fn sums(&self, w: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
        let n = self.spec.levels();
        let mut s = vec![0.0; n];
        let mut load = vec![0.0; n];
        for (i, row) in w.iter().enumerate() {
            for j in 0..n {
                s[j] += row[j] * self.a[i];
                load[j] += row[j] * self.l[i];
            }
        }
        (s, load)
    }

    fn cost(&self, w: &[Vec<f64>]) -> f64 {
        let (s, load) = self.sums(w);
        (0..self.spec.levels())
            .map(|j| {
                let (x, y) = self.level_cost(j, s[j], load[j]);
                x + y
            })
            .sum()
    }

    /// Normalized KKT residual: worst excess marginal cost of a level that
    /// serves part of a region over the cheapest level for that region.
    fn residual(&self, w: &[Vec<f64>], active: &[usize]) -> f64 {
        let (s, _) = self.sums(w);
        let slopes: Vec<f64> = (0..self.spec.levels()).map(|j| self.slope(j, s[j])).collect();
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for (i, row) in w.iter().enumerate() {
            let marg = |j: usize| self.a[i] * slopes[j] + self.spec.hops[j] * self.l[i];
            let best = active.iter().map(|&j| marg(j)).fold(f64::INFINITY, f64::min);
            for &j in active {
                let m = marg(j);
                scale = scale.max(m.abs());
                if row[j] > 1e-9 {
                    worst = worst.max(m - best);
                }
            }
        }
        if scale == 0.0 {
            0.0
        } else {
            worst / scale
        }
    }

    fn solution(&self, profile: &RegionProfile, w: Vec<Vec<f64>>, iterations: usize, active: &[usize]) -> ContinuousSolution {
        let n = self.spec.levels();
        let (s, load) = self.sums(&w);
        let mut approximation = vec![0.0; n];
        let mut retrieval = vec![0.0; n];
        for j in 0..n {
            let (x, y) = self.level_cost(j, s[j], load[j]);
            approximation[j] = x;
            retrieval[j] = y;
        }
        let slots: Vec<Vec<f64>> = w
            .iter()
            .enumerate()
            .map(|(i, row)| {
                (0..n)
                    .map(|j| match self.spec.sizes[j] {
                        _ if row[j] <= 0.0 => 0.0,
                        None => f64::INFINITY,
                        Some(_) if self.a[i] == 0.0 => 0.0,
                        Some(k) => k * row[j] * self.a[i] / s[j],
                    })
                    .collect()
            })
            .collect();
        let radii = w
            .iter()
            .zip(&slots)
            .map(|(row, ks)| {
                row.iter()
                    .zip(ks)
                    .map(|(&wij, &k)| if wij > 0.0 && k > 0.0 { (wij / (2.0 * k)).sqrt() } else { 0.0 })
                    .collect()
            })
            .collect();
        let thresholds = thresholds_of(profile, &w, 1e-9);
        let kkt_residual = self.residual(&w, active);
        ContinuousSolution {
            cost: approximation.iter().sum::<f64>() + retrieval.iter().sum::<f64>(),
            weights: w,
            slots,
            radii,
            thresholds,
            approximation,
            retrieval,
            kkt_residual,
            iterations,
        }
    }
}

/// Rate cutoffs read off a weight matrix: entry `j` is the smallest rate
/// among regions with more than `delta` of their mass on levels below `j`.
pub fn thresholds_of(profile: &RegionProfile, w: &[Vec<f64>], delta: f64) -> Vec<f64> {
    let rates = profile.rates();
    let max = rates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = rates.iter().copied().fold(f64::INFINITY, f64::min);
    let n = w.first().map_or(0, Vec::len);
    let mut out = vec![max];
    for j in 1..n {
        let t = w
            .iter()
            .zip(rates)
            .filter(|(row, _)| row[..j].iter().sum::<f64>() > delta)
            .map(|(_, &r)| r)
            .fold(f64::INFINITY, f64::min);
        out.push(if t.is_finite() { t } else { max });
    }
    out.push(min);
    out
}

/// Objective value of a weight matrix (`weights[i][j]`).
pub fn chain_objective(profile: &RegionProfile, spec: &ChainSpec, weights: &[Vec<f64>]) -> Result<f64> {
    spec.validate()?;
    if weights.len() != profile.len() || weights.iter().any(|r| r.len() != spec.levels()) {
        return Err(Error::invalid("weight matrix shape does not match the profile and chain"));
    }
    for (i, row) in weights.iter().enumerate() {
        if row.iter().any(|&x| !(x >= -1e-12)) || (row.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("weights of region {i} must be >= 0 and sum to 1")));
        }
        if row.iter().zip(&spec.hops).any(|(&x, h)| x > 0.0 && h.is_infinite()) {
            return Err(Error::invalid(format!("region {i} is served by an unreachable level")));
        }
    }
    Ok(Terms::new(profile, spec).cost(weights))
}

/// Threshold search: regions sorted by decreasing rate are cut into
/// consecutive runs, one per level from the leaf up, with fractional
/// regions at the cuts. Each cut is placed by bisection on the sign of the
/// cost derivative, which changes at most once along the sorted regions.
pub fn chain_threshold_solve(profile: &RegionProfile, spec: &ChainSpec) -> Result<ContinuousSolution> {
    spec.validate()?;
    let terms = Terms::new(profile, spec);
    let active = spec.active();
    let order = profile.order_desc();
    let m = profile.len();
    let a: Vec<f64> = order.iter().map(|&i| terms.a[i]).collect();
    let l: Vec<f64> = order.iter().map(|&i| terms.l[i]).collect();
    let mut pa = vec![0.0; m + 1];
    for i in 0..m {
        pa[i + 1] = pa[i] + a[i];
    }
    let prefix = |t: f64| -> f64 {
        let i = (t.floor() as usize).min(m);
        if i == m {
            pa[m]
        } else {
            pa[i] + (t - i as f64) * a[i]
        }
    };
    let n = active.len();
    let mf = m as f64;
    let mut b: Vec<f64> = (0..=n).map(|j| mf * j as f64 / n as f64).collect();

    // Derivative of the cost when the cut between active levels p and q
    // (p below q, levels in between empty) moves right at position t.
    let deriv = |b: &[f64], p: usize, q: usize, t: f64| -> f64 {
        let i = (t.floor() as usize).min(m - 1);
        let sp = prefix(t) - prefix(b[p]);
        let sq = prefix(b[q + 1]) - prefix(t);
        let (jp, jq) = (active[p], active[q]);
        a[i] * (terms.slope(jp, sp) - terms.slope(jq, sq)) + (spec.hops[jp] - spec.hops[jq]) * l[i]
    };
    let place = |b: &[f64], p: usize, q: usize| -> f64 {
        let (mut lo, mut hi) = (b[p], b[q + 1]);
        if deriv(b, p, q, lo) >= 0.0 {
            return lo;
        }
        let last = hi - 1e-15 * mf.max(1.0);
        if deriv(b, p, q, last.max(lo)) <= 0.0 {
            return hi;
        }
        for _ in 0..200 {
            if hi - lo <= 1e-13 * mf.max(1.0) {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if deriv(b, p, q, mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };

    let mut passes = 0;
    if n > 1 {
        loop {
            passes += 1;
            let mut moved: f64 = 0.0;
            // single cuts
            for c in 1..n {
                let t = place(&b, c - 1, c);
                moved = moved.max((t - b[c]).abs());
                b[c] = t;
            }
            // runs of coincident cuts move together
            let mut c = 1;
            while c < n {
                let mut e = c;
                while e + 1 < n && b[e + 1] == b[c] {
                    e += 1;
                }
                if e > c {
                    let t = place(&b, c - 1, e);
                    moved = moved.max((t - b[c]).abs());
                    for x in &mut b[c..=e] {
                        *x = t;
                    }
                }
                c = e + 1;
            }
            if moved <= 1e-13 * mf.max(1.0) || passes >= 100_000 {
                break;
            }
        }
    }

    let levels = spec.levels();
    let mut w = vec![vec![0.0; levels]; m];
    for (s, &region) in order.iter().enumerate() {
        let (lo, hi) = (s as f64, s as f64 + 1.0);
        for (c, &j) in active.iter().enumerate() {
            let overlap = (hi.min(b[c + 1]) - lo.max(b[c])).max(0.0);
            w[region][j] = overlap;
        }
        let total: f64 = w[region].iter().sum();
        if total > 0.0 {
            for x in &mut w[region] {
                *x /= total;
            }
        }
    }
    Ok(terms.solution(profile, w, passes, &active))
}

fn project_simplex(v: &mut [f64], allowed: &[usize], scratch: &mut Vec<f64>) {
    scratch.clear();
    scratch.extend(allowed.iter().map(|&j| v[j]));
    scratch.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, &u) in scratch.iter().enumerate() {
        cum += u;
        let t = (cum - 1.0) / (k + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    let mut keep = vec![false; v.len()];
    for &j in allowed {
        keep[j] = true;
    }
    for (j, x) in v.iter_mut().enumerate() {
        *x = if keep[j] { (*x - theta).max(0.0) } else { 0.0 };
    }
}

/// Projected-gradient minimization (accelerated, with backtracking and
/// restarts) from the uniform split.
pub fn chain_solve(profile: &RegionProfile, spec: &ChainSpec, opts: SolveOptions) -> Result<ContinuousSolution> {
    spec.validate()?;
    let terms = Terms::new(profile, spec);
    let active = spec.active();
    let m = profile.len();
    let n = spec.levels();
    let mut x = vec![vec![0.0; n]; m];
    for row in &mut x {
        for &j in &active {
            row[j] = 1.0 / active.len() as f64;
        }
    }
    let grad = |w: &[Vec<f64>]| -> Vec<Vec<f64>> {
        let (s, _) = terms.sums(w);
        let slopes: Vec<f64> = (0..n).map(|j| terms.slope(j, s[j])).collect();
        (0..m)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if spec.hops[j].is_finite() {
                            terms.a[i] * slopes[j] + spec.hops[j] * terms.l[i]
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect()
    };
    let mut scratch = Vec::new();
    let mut y = x.clone();
    let mut fx = terms.cost(&x);
    let mut t = 1.0f64;
    let mut lip = 1.0f64;
    let mut stall = 0;
    let mut iterations = 0;
    let mut residual;
    while iterations < opts.max_iterations {
        iterations += 1;
        let fy = terms.cost(&y);
        let g = grad(&y);
        let mut z;
        let mut fz;
        loop {
            z = y.clone();
            for (row, grow) in z.iter_mut().zip(&g) {
                for (v, gv) in row.iter_mut().zip(grow) {
                    *v -= gv / lip;
                }
                project_simplex(row, &active, &mut scratch);
            }
            let mut lin = 0.0;
            let mut sq = 0.0;
            for i in 0..m {
                for j in 0..n {
                    let d = z[i][j] - y[i][j];
                    lin += g[i][j] * d;
                    sq += d * d;
                }
            }
            fz = terms.cost(&z);
            if fz <= fy + lin + 0.5 * lip * sq + 1e-14 * fy.abs() || lip > 1e300 {
                break;
            }
            lip *= 2.0;
        }
        if fz > fx {
            // momentum overshot: restart from the last iterate
            t = 1.0;
            y = x.clone();
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let mom = (t - 1.0) / t_next;
        y = z
            .iter()
            .zip(&x)
            .map(|(zr, xr)| zr.iter().zip(xr).map(|(a, b)| a + mom * (a - b)).collect())
            .collect();
        for row in &mut y {
            project_simplex(row, &active, &mut scratch);
        }
        let improvement = fx - fz;
        x = z;
        fx = fz;
        t = t_next;
        lip = (lip * 0.95).max(1e-12);
        if improvement <= 1e-15 * fx.abs().max(1e-300) {
            stall += 1;
        } else {
            stall = 0;
        }
        if iterations % 25 == 0 || stall > 0 {
            residual = terms.residual(&x, &active);
            if residual <= opts.tolerance || stall > 500 {
                break;
            }
        }
    }
    residual = terms.residual(&x, &active);
    let sol = terms.solution(profile, x, iterations, &active);
    if residual > opts.tolerance.max(1e-6) {
        return Err(Error::NonConvergence {
            iterations,
            residual,
        });
    }
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::continuum::single_cache_opt;

    fn gaussian(m: usize) -> RegionProfile {
        RegionProfile::new(
            (0..m)
                .map(|i| {
                    let x = i as f64 - m as f64 / 2.0;
                    (-(x * x) / (2.0 * (m as f64 / 6.0).powi(2))).exp()
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn unreachable_repository_reduces_to_single_cache() {
        let p = gaussian(30);
        let spec = ChainSpec::with_repository(&[20.0], vec![0.0, f64::INFINITY], 1.0).unwrap();
        let s = chain_threshold_solve(&p, &spec).unwrap();
        assert!(s.weights.iter().all(|r| r[1] == 0.0));
        let single = single_cache_opt(&p, 20.0, 1.0).unwrap();
        assert!((s.cost - single.cost).abs() < 1e-12 * single.cost);
    }

    #[test]
    fn free_repository_takes_everything() {
        let p = gaussian(30);
        let spec = ChainSpec::with_repository(&[20.0], vec![0.0, 0.0], 1.0).unwrap();
        let s = chain_threshold_solve(&p, &spec).unwrap();
        assert!(s.weights.iter().all(|r| (r[1] - 1.0).abs() < 1e-9));
        assert!(s.cost.abs() < 1e-9);
    }

    #[test]
    fn popular_regions_stay_at_the_leaf() {
        let p = gaussian(100);
        let spec = ChainSpec::with_repository(&[50.0, 50.0], vec![0.0, 1.0, 10.0], 1.0).unwrap();
        let s = chain_threshold_solve(&p, &spec).unwrap();
        assert!(s.thresholds.windows(2).all(|w| w[0] >= w[1]));
        let pg = chain_solve(&p, &spec, SolveOptions::default()).unwrap();
        assert!((s.cost - pg.cost).abs() <= 1e-6 * s.cost, "{} vs {}", s.cost, pg.cost);
        assert!(s.kkt_residual < 1e-8, "{}", s.kkt_residual);
    }

    #[test]
    fn single_region_chain() {
        let p = RegionProfile::new(vec![2.0]).unwrap();
        let spec = ChainSpec::with_repository(&[4.0], vec![0.0, 0.3], 1.0).unwrap();
        let s = chain_threshold_solve(&p, &spec).unwrap();
        let pg = chain_solve(&p, &spec, SolveOptions::default()).unwrap();
        assert!((s.cost - pg.cost).abs() <= 1e-6 * s.cost);
    }
}
