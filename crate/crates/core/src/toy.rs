//! The five-object line example: x2–x3 and x3–x4 cost nothing to
//! approximate, x1–x2 and x4–x5 cost `eps`, everything else is infinite.
//! Objects are numbered 0..5 for x1..x5.

use crate::error::Result;
use crate::model::{Capacity, CostMatrix, Demand, Instance, ObjectSpace, Topology};
use crate::scalar::Scalar;

pub fn line_costs<S: Scalar>(eps: S) -> Result<CostMatrix<S>> {
    let mut rows = vec![vec![S::infinity(); 5]; 5];
    for (i, row) in rows.iter_mut().enumerate() {
        row[i] = S::zero();
    }
    for (a, b, c) in [(1, 2, S::zero()), (2, 3, S::zero()), (0, 1, eps), (3, 4, eps)] {
        rows[a][b] = c;
        rows[b][a] = c;
    }
    CostMatrix::from_rows(rows)
}

/// One cache of `k` slots in front of the repository at distance `h_s`.
pub fn single_cache<S: Scalar>(eps: S, h_s: S, rates: [S; 5], k: usize) -> Result<Instance<S>> {
    let topology = Topology::chain(vec![Capacity::Slots(k), Capacity::Unbounded], vec![h_s])?;
    Instance::new(
        ObjectSpace::Matrix(line_costs(eps)?),
        topology,
        Demand::from_rates_at(&rates, 0),
        (0..5).map(|o| (o, 1)).collect(),
    )
}

/// Leaf (node 0) and parent (node 1), one slot each, requests at the leaf.
pub fn tandem<S: Scalar>(eps: S, h12: S, h_s: S, rates: [S; 5]) -> Result<Instance<S>> {
    let topology = Topology::chain(
        vec![Capacity::Slots(1), Capacity::Slots(1), Capacity::Unbounded],
        vec![h12, h_s],
    )?;
    Instance::new(
        ObjectSpace::Matrix(line_costs(eps)?),
        topology,
        Demand::from_rates_at(&rates, 0),
        (0..5).map(|o| (o, 2)).collect(),
    )
}
