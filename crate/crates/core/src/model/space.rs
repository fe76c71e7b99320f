use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub type ObjectId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Norm1,
    Norm2,
}

impl Metric {
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::Norm1 => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
            Metric::Norm2 => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
        }
    }
}

/// `d^gamma` with `0^gamma = 0` for every gamma, so an exact hit is free.
#[inline]
pub fn power_cost(d: f64, gamma: f64) -> f64 {
    if d == 0.0 {
        0.0
    } else if gamma == 1.0 {
        d
    } else if gamma == 2.0 {
        d * d
    } else if gamma == 0.5 {
        d.sqrt()
    } else {
        d.powf(gamma)
    }
}

/// Approximation cost between two arbitrary points of a metric space.
pub fn approximation_cost_between(metric: Metric, gamma: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!(
            "dimension mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if gamma < 0.0 || !gamma.is_finite() {
        return Err(Error::invalid(format!("gamma must be finite and >= 0, got {gamma}")));
    }
    Ok(power_cost(metric.distance(x, y), gamma))
}

/// Objects embedded in `R^p`; the cost of approximating `x` by `y` is
/// `d(x, y)^gamma`.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSet {
    dim: usize,
    coords: Vec<f64>,
    metric: Metric,
    gamma: f64,
}

impl PointSet {
    pub fn new(dim: usize, coords: Vec<f64>, metric: Metric, gamma: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("point dimension must be at least 1"));
        }
        if coords.len() % dim != 0 {
            return Err(Error::invalid(format!(
                "{} coordinates do not split into points of dimension {dim}",
                coords.len()
            )));
        }
        if let Some(bad) = coords.iter().find(|c| !c.is_finite()) {
            return Err(Error::invalid(format!("non-finite coordinate {bad}")));
        }
        if gamma < 0.0 || !gamma.is_finite() {
            return Err(Error::invalid(format!("gamma must be finite and >= 0, got {gamma}")));
        }
        Ok(PointSet {
            dim,
            coords,
            metric,
            gamma,
        })
    }

    /// The `side × side` integer grid in row-major order, object `y * side + x`
    /// at `(x, y)`.
    pub fn grid(side: usize, metric: Metric, gamma: f64) -> Result<Self> {
        let mut coords = Vec::with_capacity(2 * side * side);
        for y in 0..side {
            for x in 0..side {
                coords.push(x as f64);
                coords.push(y as f64);
            }
        }
        PointSet::new(2, coords, metric, gamma)
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    #[inline]
    pub fn point(&self, i: ObjectId) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn distance(&self, i: ObjectId, j: ObjectId) -> f64 {
        if self.dim == 2 {
            let a = &self.coords[2 * i..2 * i + 2];
            let b = &self.coords[2 * j..2 * j + 2];
            let dx = a[0] - b[0];
            let dy = a[1] - b[1];
            return match self.metric {
                Metric::Norm1 => dx.abs() + dy.abs(),
                Metric::Norm2 => (dx * dx + dy * dy).sqrt(),
            };
        }
        self.metric.distance(self.point(i), self.point(j))
    }

    #[inline]
    pub fn cost(&self, i: ObjectId, j: ObjectId) -> f64 {
        power_cost(self.distance(i, j), self.gamma)
    }
}

/// Dense `O × O` table of approximation costs; row `x`, column `y` holds
/// the cost of answering a request for `x` with `y`.
#[derive(Clone, Debug, PartialEq)]
pub struct CostMatrix<S> {
    n: usize,
    data: Vec<S>,
}

impl<S: Scalar> CostMatrix<S> {
    pub fn new(n: usize, data: Vec<S>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::invalid(format!(
                "cost matrix for {n} objects needs {} entries, got {}",
                n * n,
                data.len()
            )));
        }
        for x in 0..n {
            if data[x * n + x] != S::zero() {
                return Err(Error::invalid(format!(
                    "diagonal entry ({x},{x}) must be zero, got {}",
                    data[x * n + x]
                )));
            }
        }
        if let Some((idx, v)) = data.iter().enumerate().find(|(_, v)| **v < S::zero()) {
            return Err(Error::invalid(format!(
                "entry ({},{}) is negative: {v}",
                idx / n,
                idx % n
            )));
        }
        Ok(CostMatrix { n, data })
    }

    pub fn from_rows(rows: Vec<Vec<S>>) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().position(|r| r.len() != n) {
            return Err(Error::invalid(format!(
                "row {bad} has {} entries, expected {n}",
                rows[bad].len()
            )));
        }
        CostMatrix::new(n, rows.into_iter().flatten().collect())
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, x: ObjectId, y: ObjectId) -> S {
        self.data[x * self.n + y]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[S]> {
        self.data.chunks(self.n.max(1))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ObjectSpace<S> {
    Matrix(CostMatrix<S>),
    Points(PointSet),
}

impl<S: Scalar> ObjectSpace<S> {
    pub fn len(&self) -> usize {
        match self {
            ObjectSpace::Matrix(m) => m.len(),
            ObjectSpace::Points(p) => p.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Unchecked cost lookup used on hot paths.
    #[inline]
    pub fn cost(&self, x: ObjectId, y: ObjectId) -> S {
        match self {
            ObjectSpace::Matrix(m) => m.get(x, y),
            ObjectSpace::Points(p) => S::from_f64(p.cost(x, y)),
        }
    }

    pub fn approximation_cost(&self, x: ObjectId, y: ObjectId) -> Result<S> {
        let n = self.len();
        if x >= n || y >= n {
            return Err(Error::invalid(format!(
                "object ids ({x}, {y}) out of range for {n} objects"
            )));
        }
        Ok(self.cost(x, y))
    }

    pub fn points(&self) -> Option<&PointSet> {
        match self {
            ObjectSpace::Points(p) => Some(p),
            ObjectSpace::Matrix(_) => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norm1_costs() {
        let c = approximation_cost_between(Metric::Norm1, 1.0, &[0.0, 0.0], &[3.0, 4.0]).unwrap();
        assert_eq!(c, 7.0);
        let c = approximation_cost_between(Metric::Norm1, 2.0, &[0.0, 0.0], &[3.0, 4.0]).unwrap();
        assert_eq!(c, 49.0);
        let c = approximation_cost_between(Metric::Norm2, 1.0, &[0.0, 0.0], &[3.0, 4.0]).unwrap();
        assert_eq!(c, 5.0);
    }

    #[test]
    fn self_cost_is_zero_for_any_gamma() {
        for gamma in [0.0, 0.5, 1.0, 2.0, 3.7] {
            let c = approximation_cost_between(Metric::Norm2, gamma, &[1.5, -2.0], &[1.5, -2.0]);
            assert_eq!(c.unwrap(), 0.0);
        }
        let grid = PointSet::grid(4, Metric::Norm1, 0.0).unwrap();
        let space: ObjectSpace<f64> = ObjectSpace::Points(grid);
        assert_eq!(space.cost(5, 5), 0.0);
        assert_eq!(space.cost(5, 6), 1.0);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let err = approximation_cost_between(Metric::Norm1, 1.0, &[0.0], &[1.0, 2.0]);
        assert!(matches!(err, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn matrix_validation() {
        assert!(CostMatrix::<f64>::from_rows(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).is_ok());
        assert!(CostMatrix::<f64>::from_rows(vec![vec![1.0, 1.0], vec![1.0, 0.0]]).is_err());
        assert!(CostMatrix::<f64>::from_rows(vec![vec![0.0, -1.0], vec![1.0, 0.0]]).is_err());
        let m = CostMatrix::<f64>::from_rows(vec![vec![0.0, f64::INFINITY], vec![2.0, 0.0]]).unwrap();
        assert!(m.get(0, 1).is_infinite());
    }

    #[test]
    fn grid_layout_is_row_major() {
        let g = PointSet::grid(3, Metric::Norm1, 1.0).unwrap();
        assert_eq!(g.len(), 9);
        assert_eq!(g.point(5), &[2.0, 1.0]);
        assert_eq!(g.distance(0, 8), 4.0);
    }
}
