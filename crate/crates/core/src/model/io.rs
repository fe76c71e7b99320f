//! Instance files.
//!
//! An instance is a TOML document with four sections:
//!
//! ```toml
//! [space]
//! kind = "grid"          # grid | points | matrix
//! side = 100             # grid only
//! metric = "norm1"       # grid/points: norm1 | norm2
//! gamma = 1.0
//! # points: coords = [[x, y], ...] or file = "items.csv" (item_id,x_1,...)
//! # matrix: rows = [[0, 1], [1, 0]] or file = "costs.csv" (one row per object, "inf" allowed)
//!
//! [topology]
//! kind = "chain"         # chain | tree
//! capacities = [100, 100, "repository"]
//! edges = [3.0, 1000.0]  # chain: hop j -> j+1
//! # tree: parents = [1, 2, -1] (-1 marks the root), edges = per-node hop to parent
//!
//! [demand]
//! kind = "gaussian-grid" # gaussian-grid | uniform | rates | file
//! sigma = 12.5
//! total = 1.0
//! ingress = 0
//! # rates: rates = [...]; file: file = "demand.csv" (object,ingress,rate)
//!
//! [repositories]
//! node = 2               # every object seeded at this node
//! # or seeds = [[object, node], ...]
//! ```
//!
//! Relative file names resolve against the instance file's directory.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::allocation::{Allocation, Approximizer};
use super::demand::{Demand, RateEntry};
use super::instance::Instance;
use super::space::{CostMatrix, Metric, ObjectSpace, PointSet};
use super::topology::{Capacity, NodeId, Topology, TreeNode};
use crate::error::{Error, Result};
use crate::workload::{gaussian_grid_demand, read_items, uniform_demand};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub space: SpaceSection,
    pub topology: TopologySection,
    pub demand: DemandSection,
    pub repositories: RepositorySection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSection {
    pub kind: String,
    pub side: Option<usize>,
    pub metric: Option<String>,
    pub gamma: Option<f64>,
    pub coords: Option<Vec<Vec<f64>>>,
    pub rows: Option<Vec<Vec<f64>>>,
    pub file: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum CapacityEntry {
    Slots(usize),
    Tag(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySection {
    pub kind: String,
    pub capacities: Vec<CapacityEntry>,
    #[serde(default)]
    pub edges: Vec<f64>,
    pub parents: Option<Vec<i64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandSection {
    pub kind: String,
    pub sigma: Option<f64>,
    pub total: Option<f64>,
    #[serde(default)]
    pub ingress: NodeId,
    pub rates: Option<Vec<f64>>,
    pub file: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RepositorySection {
    pub node: Option<NodeId>,
    pub seeds: Option<Vec<(usize, NodeId)>>,
}

fn line_at(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Converts a TOML error into a parse error pointing at the offending line.
pub(crate) fn toml_error(path: &Path, text: &str, e: &toml::de::Error) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line: e.span().map_or(1, |s| line_at(text, s.start)),
        message: e.message().trim().to_string(),
    }
}

fn metric(name: Option<&str>) -> Result<Metric> {
    match name.unwrap_or("norm1") {
        "norm1" => Ok(Metric::Norm1),
        "norm2" => Ok(Metric::Norm2),
        other => Err(Error::instance(format!("unknown metric {other:?} (norm1 | norm2)"))),
    }
}

fn resolve(base: &Path, file: &Path) -> PathBuf {
    if file.is_absolute() {
        file.to_path_buf()
    } else {
        base.join(file)
    }
}

fn read_matrix(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|f| {
                f.parse::<f64>().map_err(|_| Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    message: format!("not a number: {f:?}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

fn read_rates(path: &Path) -> Result<Vec<RateEntry<f64>>> {
    #[derive(Deserialize)]
    struct Row {
        object: usize,
        ingress: NodeId,
        rate: f64,
    }
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<Row>().enumerate() {
        let row = row.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 2,
            message: e.to_string(),
        })?;
        out.push(RateEntry {
            object: row.object,
            ingress: row.ingress,
            rate: row.rate,
        });
    }
    Ok(out)
}

impl InstanceFile {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| toml_error(path, text, &e))
    }

    /// Builds the instance, reading referenced CSV files relative to `base`.
    pub fn build(&self, base: &Path) -> Result<Instance<f64>> {
        let s = &self.space;
        let gamma = s.gamma.unwrap_or(1.0);
        let mut grid_side = None;
        let space = match s.kind.as_str() {
            "grid" => {
                let side = s.side.ok_or_else(|| Error::instance("grid space needs `side`"))?;
                grid_side = Some(side);
                ObjectSpace::Points(PointSet::grid(side, metric(s.metric.as_deref())?, gamma)?)
            }
            "points" => {
                let (dim, coords) = match (&s.coords, &s.file) {
                    (Some(c), None) => {
                        let dim = c.first().map_or(0, Vec::len);
                        if c.iter().any(|p| p.len() != dim) {
                            return Err(Error::instance("points must share one dimension"));
                        }
                        (dim, c.iter().flatten().copied().collect())
                    }
                    (None, Some(f)) => {
                        let p = resolve(base, f);
                        let (_, dim, coords) = read_items(std::fs::File::open(&p)?, &p)?;
                        (dim, coords)
                    }
                    _ => return Err(Error::instance("points space needs exactly one of `coords` or `file`")),
                };
                ObjectSpace::Points(PointSet::new(dim, coords, metric(s.metric.as_deref())?, gamma)?)
            }
            "matrix" => {
                let rows = match (&s.rows, &s.file) {
                    (Some(r), None) => r.clone(),
                    (None, Some(f)) => read_matrix(&resolve(base, f))?,
                    _ => return Err(Error::instance("matrix space needs exactly one of `rows` or `file`")),
                };
                ObjectSpace::Matrix(CostMatrix::from_rows(rows)?)
            }
            other => return Err(Error::instance(format!("unknown space kind {other:?}"))),
        };
        let objects = space.len();

        let t = &self.topology;
        let capacities = t
            .capacities
            .iter()
            .map(|c| match c {
                CapacityEntry::Slots(k) => Ok(Capacity::Slots(*k)),
                CapacityEntry::Tag(s) if s == "repository" => Ok(Capacity::Unbounded),
                CapacityEntry::Tag(s) => Err(Error::instance(format!(
                    "capacity must be a slot count or \"repository\", got {s:?}"
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        let topology = match t.kind.as_str() {
            "chain" => Topology::chain(capacities, t.edges.clone())?,
            "tree" => {
                let parents = t.parents.as_ref().ok_or_else(|| Error::instance("tree topology needs `parents`"))?;
                if parents.len() != capacities.len() || t.edges.len() != capacities.len() {
                    return Err(Error::instance("tree needs one parent and one edge cost per node"));
                }
                let nodes = capacities
                    .iter()
                    .zip(parents)
                    .zip(&t.edges)
                    .map(|((&capacity, &p), &edge_cost)| TreeNode {
                        capacity,
                        parent: usize::try_from(p).ok(),
                        edge_cost,
                    })
                    .collect();
                Topology::tree(nodes)?
            }
            other => return Err(Error::instance(format!("unknown topology kind {other:?}"))),
        };

        let d = &self.demand;
        let total = d.total.unwrap_or(1.0);
        let demand = match d.kind.as_str() {
            "gaussian-grid" => {
                let side = grid_side.ok_or_else(|| Error::instance("gaussian-grid demand needs a grid space"))?;
                let sigma = d.sigma.ok_or_else(|| Error::instance("gaussian-grid demand needs `sigma`"))?;
                gaussian_grid_demand(side, sigma, total, d.ingress)?
            }
            "uniform" => uniform_demand(objects, total, d.ingress)?,
            "rates" => {
                let rates = d.rates.as_ref().ok_or_else(|| Error::instance("rates demand needs `rates`"))?;
                Demand::from_rates_at(rates, d.ingress)
            }
            "file" => {
                let f = d.file.as_ref().ok_or_else(|| Error::instance("file demand needs `file`"))?;
                Demand::Discrete(read_rates(&resolve(base, f))?)
            }
            other => return Err(Error::instance(format!("unknown demand kind {other:?}"))),
        };

        let r = &self.repositories;
        let seeds = match (r.node, &r.seeds) {
            (Some(v), None) => (0..objects).map(|o| (o, v)).collect(),
            (None, Some(s)) => s.clone(),
            _ => return Err(Error::instance("repositories need exactly one of `node` or `seeds`")),
        };
        Instance::new(space, topology, demand, seeds)
    }
}

/// Reads and builds an instance file.
pub fn load_instance(path: &Path) -> Result<Instance<f64>> {
    let text = std::fs::read_to_string(path)?;
    let file = InstanceFile::parse(&text, path)?;
    file.build(path.parent().unwrap_or(Path::new(".")))
}

/// Writes `object,node` rows.
pub fn write_allocation<W: std::io::Write>(allocation: &Allocation, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["object", "node"])?;
    for a in allocation.iter() {
        w.write_record([a.object.to_string(), a.node.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_allocation(path: &Path) -> Result<Allocation> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let mut out = Allocation::new();
    for (i, row) in rdr.deserialize::<(usize, NodeId)>().enumerate() {
        let (object, node) = row.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 2,
            message: e.to_string(),
        })?;
        out.insert(Approximizer::new(object, node));
    }
    Ok(out)
}
