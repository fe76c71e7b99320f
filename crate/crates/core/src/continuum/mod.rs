//! Continuous-limit cost models: requests spread over unit-area regions,
//! caches tessellate them with norm-1 balls.

pub mod chain;
pub mod single;
pub mod tandem;
pub mod tree;
pub mod uniform;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use chain::{chain_objective, chain_solve, chain_threshold_solve, ChainSpec, ContinuousSolution, SolveOptions};
pub use single::{ball_cost, single_cache_cost, single_cache_opt, SingleCacheSolution};
pub use tandem::{tandem_both_cost, tandem_both_grad, tandem_both_solve, TandemGradient, TandemSolution, TandemSpec};
pub use tree::{equidepth_tree_solve, EquiDepthTree, TreeSolution};
pub use uniform::{tandem_uniform_analytic, UniformTandem};

/// `ζ = 2^{(2−γ)/2} / (γ+2)`.
pub fn zeta(gamma: f64) -> f64 {
    2f64.powf((2.0 - gamma) / 2.0) / (gamma + 2.0)
}

/// `β = 2 / (γ+2)`, the exponent applied to rates.
pub fn rate_exponent(gamma: f64) -> f64 {
    2.0 / (gamma + 2.0)
}

pub(crate) fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::invalid(format!("gamma must be finite and >= 0, got {gamma}")));
    }
    Ok(())
}

/// Request rate per unit-area region.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionProfile {
    rates: Vec<f64>,
}

impl RegionProfile {
    pub fn new(rates: Vec<f64>) -> Result<Self> {
        if rates.is_empty() {
            return Err(Error::invalid("profile needs at least one region"));
        }
        if let Some(r) = rates.iter().find(|r| !(**r >= 0.0) || !r.is_finite()) {
            return Err(Error::invalid(format!("region rates must be finite and >= 0, got {r}")));
        }
        Ok(RegionProfile { rates })
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.rates.iter().sum()
    }

    pub fn scaled(&self, factor: f64) -> RegionProfile {
        RegionProfile {
            rates: self.rates.iter().map(|r| r * factor).collect(),
        }
    }

    /// Region indices by decreasing rate, ties by index.
    pub fn order_desc(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| self.rates[b].total_cmp(&self.rates[a]).then(a.cmp(&b)));
        idx
    }

    /// Reads `region_id,rate` rows; rows are placed by region id.
    pub fn from_csv<R: std::io::Read>(input: R, path: &std::path::Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let mut rows: Vec<(usize, f64, usize)> = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = rec.position().map_or(i + 2, |p| p.line() as usize);
            let bad = |message: String| Error::Parse {
                path: path.to_path_buf(),
                line,
                message,
            };
            if rec.len() < 2 {
                return Err(bad("expected region_id,rate".into()));
            }
            let id: usize = rec[0].parse().map_err(|e| bad(format!("region_id: {e}")))?;
            let rate: f64 = rec[1].parse().map_err(|e| bad(format!("rate: {e}")))?;
            rows.push((id, rate, line));
        }
        let m = rows.iter().map(|r| r.0 + 1).max().unwrap_or(0);
        let mut rates = vec![f64::NAN; m];
        for (id, rate, line) in rows {
            if !rates[id].is_nan() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: format!("region {id} listed twice"),
                });
            }
            rates[id] = rate;
        }
        if let Some(missing) = rates.iter().position(|r| r.is_nan()) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 0,
                message: format!("region {missing} missing"),
            });
        }
        RegionProfile::new(rates)
    }
}
