use serde::Serialize;

use super::chain::{chain_objective, chain_threshold_solve, ChainSpec, ContinuousSolution};
use super::RegionProfile;
use crate::error::{Error, Result};

/// Tree whose leaves all sit at the same depth, with equal cache sizes per
/// level and leaf arrival rates `β_ℓ λ(x)`. Described by the chain seen
/// from any leaf plus the per-leaf scales.
#[derive(Clone, Debug, PartialEq)]
pub struct EquiDepthTree {
    pub chain: ChainSpec,
    pub leaf_scales: Vec<f64>,
}

impl EquiDepthTree {
    pub fn new(chain: ChainSpec, leaf_scales: Vec<f64>) -> Result<Self> {
        chain.validate()?;
        if leaf_scales.is_empty() {
            return Err(Error::invalid("tree needs at least one leaf"));
        }
        if let Some(b) = leaf_scales.iter().find(|b| !(**b > 0.0) || !b.is_finite()) {
            return Err(Error::invalid(format!("leaf scales must be positive, got {b}")));
        }
        Ok(EquiDepthTree { chain, leaf_scales })
    }

    /// Checks a parent-array tree (`sizes[v]` `None` for an unbounded
    /// node, `edge_costs[v]` the cost from `v` to its parent) and extracts
    /// the leaf chain. `leaf_scales` follow the leaves in node order.
    pub fn from_parents(
        parents: &[Option<usize>],
        sizes: &[Option<f64>],
        edge_costs: &[f64],
        leaf_scales: &[f64],
        gamma: f64,
    ) -> Result<Self> {
        let n = parents.len();
        if sizes.len() != n || edge_costs.len() != n {
            return Err(Error::invalid("tree arrays have different lengths"));
        }
        let roots: Vec<usize> = (0..n).filter(|&v| parents[v].is_none()).collect();
        if roots.len() != 1 {
            return Err(Error::UnsupportedTopology(format!("tree must have one root, found {}", roots.len())));
        }
        let mut has_child = vec![false; n];
        for p in parents.iter().flatten() {
            if *p >= n {
                return Err(Error::invalid(format!("unknown parent {p}")));
            }
            has_child[*p] = true;
        }
        let mut chains: Vec<Vec<usize>> = Vec::new();
        for leaf in (0..n).filter(|&v| !has_child[v]) {
            let mut path = vec![leaf];
            let mut cur = leaf;
            while let Some(p) = parents[cur] {
                path.push(p);
                cur = p;
                if path.len() > n {
                    return Err(Error::invalid("parent links contain a cycle"));
                }
            }
            chains.push(path);
        }
        let depth = chains[0].len();
        if chains.iter().any(|c| c.len() != depth) {
            return Err(Error::UnsupportedTopology("leaves are at different depths".into()));
        }
        let first = &chains[0];
        let mut hops = vec![0.0; depth];
        for j in 1..depth {
            hops[j] = hops[j - 1] + edge_costs[first[j - 1]];
        }
        for c in &chains[1..] {
            let mut h = 0.0;
            for j in 0..depth {
                if j > 0 {
                    h += edge_costs[c[j - 1]];
                }
                if sizes[c[j]] != sizes[first[j]] {
                    return Err(Error::UnsupportedTopology(format!("level {j} has caches of different sizes")));
                }
                if (h - hops[j]).abs() > 1e-12 * hops[j].abs().max(1.0) {
                    return Err(Error::UnsupportedTopology(format!(
                        "level {j} is reached at different costs from different leaves"
                    )));
                }
            }
        }
        if leaf_scales.len() != chains.len() {
            return Err(Error::invalid(format!(
                "{} leaf scales for {} leaves",
                leaf_scales.len(),
                chains.len()
            )));
        }
        let level_sizes = first.iter().map(|&v| sizes[v]).collect();
        EquiDepthTree::new(ChainSpec::new(level_sizes, hops, gamma)?, leaf_scales.to_vec())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TreeSolution {
    /// Allocation of one leaf chain, replicated at every cache of a level.
    pub unit: ContinuousSolution,
    /// Cost at each leaf's chain under the replicated allocation.
    pub leaf_costs: Vec<f64>,
    pub total: f64,
}

pub fn equidepth_tree_solve(profile: &RegionProfile, tree: &EquiDepthTree) -> Result<TreeSolution> {
    let unit = chain_threshold_solve(profile, &tree.chain)?;
    let leaf_costs = tree
        .leaf_scales
        .iter()
        .map(|&b| chain_objective(&profile.scaled(b), &tree.chain, &unit.weights))
        .collect::<Result<Vec<f64>>>()?;
    Ok(TreeSolution {
        total: leaf_costs.iter().sum(),
        unit,
        leaf_costs,
    })
}
