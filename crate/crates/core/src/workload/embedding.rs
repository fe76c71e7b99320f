use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::Serialize;

use super::trace::{RequestTrace, TraceEvent};
use crate::error::{Error, Result};
use crate::model::{Metric, NodeId, ObjectId, PointSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Barycenter {
    /// Mean of item vectors weighted by request counts.
    Weighted,
    /// Plain mean over the catalog.
    Unweighted,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingCatalog {
    pub ids: Vec<String>,
    pub dim: usize,
    coords: Vec<f64>,
    pub counts: Vec<u64>,
    pub barycenter: Vec<f64>,
    pub weighting: Barycenter,
}

impl EmbeddingCatalog {
    pub fn new(ids: Vec<String>, dim: usize, coords: Vec<f64>, counts: Vec<u64>, weighting: Barycenter) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("embedding dimension must be at least 1"));
        }
        if coords.len() != ids.len() * dim || counts.len() != ids.len() {
            return Err(Error::invalid("catalog arrays do not match the item count"));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("item coordinates must be finite"));
        }
        let mut cat = EmbeddingCatalog {
            ids,
            dim,
            coords,
            counts,
            barycenter: vec![0.0; dim],
            weighting,
        };
        cat.set_weighting(weighting);
        Ok(cat)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn point(&self, item: ObjectId) -> &[f64] {
        &self.coords[item * self.dim..(item + 1) * self.dim]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Recomputes the barycenter; a weighted one over a catalog without
    /// requests falls back to the plain mean.
    pub fn set_weighting(&mut self, weighting: Barycenter) {
        self.weighting = weighting;
        let n = self.len();
        let mut center = vec![0.0; self.dim];
        if n == 0 {
            self.barycenter = center;
            return;
        }
        let total: u64 = self.counts.iter().sum();
        let weighted = weighting == Barycenter::Weighted && total > 0;
        if weighting == Barycenter::Weighted && total == 0 {
            log::warn!("no requests recorded; using the unweighted barycenter");
        }
        for i in 0..n {
            let w = if weighted { self.counts[i] as f64 } else { 1.0 };
            for (c, x) in center.iter_mut().zip(self.point(i)) {
                *c += w * x;
            }
        }
        let denom = if weighted { total as f64 } else { n as f64 };
        for c in &mut center {
            *c /= denom;
        }
        self.barycenter = center;
    }

    pub fn distance_to_barycenter(&self, item: ObjectId) -> f64 {
        Metric::Norm2.distance(self.point(item), &self.barycenter)
    }

    /// Euclidean point set with cost `d^gamma`.
    pub fn space(&self, gamma: f64) -> Result<PointSet> {
        PointSet::new(self.dim, self.coords.clone(), Metric::Norm2, gamma)
    }

    /// Request counts recounted from a trace over this catalog.
    pub fn count_requests(&mut self, trace: &RequestTrace) -> Result<()> {
        let mut counts = vec![0u64; self.len()];
        for e in &trace.events {
            *counts
                .get_mut(e.object)
                .ok_or_else(|| Error::invalid(format!("trace references unknown item {}", e.object)))? += 1;
        }
        self.counts = counts;
        self.set_weighting(self.weighting);
        Ok(())
    }

    /// Writes `item_id,x_1,…,x_d` rows.
    pub fn write_items<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["item_id".to_string()];
        header.extend((1..=self.dim).map(|k| format!("x_{k}")));
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut row = vec![self.ids[i].clone()];
            row.extend(self.point(i).iter().map(|x| format!("{x:?}")));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes the trace as `timestamp,item_id,ingress_node` with catalog ids.
    pub fn write_events<W: Write>(&self, trace: &RequestTrace, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["timestamp", "item_id", "ingress_node"])?;
        for e in &trace.events {
            let id = self
                .ids
                .get(e.object)
                .ok_or_else(|| Error::invalid(format!("trace references unknown item {}", e.object)))?;
            w.write_record([format!("{:?}", e.time), id.clone(), e.ingress.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input)
}

fn line_of(rec: &csv::StringRecord, i: usize) -> usize {
    rec.position().map_or(i as u64 + 2, |p| p.line()) as usize
}

pub fn read_items<R: Read>(input: R, path: &Path) -> Result<(Vec<String>, usize, Vec<f64>)> {
    let mut rdr = reader(input);
    let dim = rdr.headers()?.len().saturating_sub(1);
    if dim == 0 {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "expected header item_id,x_1,...,x_d".into(),
        });
    }
    let mut ids = Vec::new();
    let mut coords = Vec::new();
    let mut seen = HashMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = line_of(&rec, i);
        let bad = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        if rec.len() != dim + 1 {
            return Err(bad(format!("expected {} columns, found {}", dim + 1, rec.len())));
        }
        let id = rec[0].to_string();
        if seen.insert(id.clone(), line).is_some() {
            return Err(bad(format!("duplicate item id {id}")));
        }
        for k in 1..=dim {
            let x: f64 = rec[k].parse().map_err(|e| bad(format!("coordinate {k}: {e}")))?;
            if !x.is_finite() {
                return Err(bad(format!("coordinate {k} is not finite")));
            }
            coords.push(x);
        }
        ids.push(id);
    }
    Ok((ids, dim, coords))
}

/// Reads `timestamp,item_id[,ingress_node]` rows against known item ids.
pub fn read_events<R: Read>(
    input: R,
    path: &Path,
    ids: &[String],
    default_ingress: NodeId,
) -> Result<RequestTrace> {
    let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mut rdr = reader(input);
    let mut events = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = line_of(&rec, i);
        let bad = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        if rec.len() < 2 {
            return Err(bad("expected timestamp,item_id[,ingress_node]".into()));
        }
        let time: f64 = rec[0].parse().map_err(|e| bad(format!("timestamp: {e}")))?;
        if !time.is_finite() {
            return Err(bad("timestamp must be finite".into()));
        }
        let object = *index
            .get(&rec[1])
            .ok_or_else(|| bad(format!("unknown item id {}", &rec[1])))?;
        let ingress = match rec.get(2) {
            Some(s) if !s.is_empty() => s.parse().map_err(|e| bad(format!("ingress_node: {e}")))?,
            _ => default_ingress,
        };
        events.push(TraceEvent { time, object, ingress });
    }
    if events.windows(2).any(|w| w[1].time < w[0].time) {
        log::warn!("{}: timestamps out of order; sorting", path.display());
        events.sort_by(|a, b| a.time.total_cmp(&b.time));
    }
    Ok(RequestTrace {
        events,
        seed: None,
        provenance: Some(path.display().to_string()),
    })
}

/// Loads an items file and an events file into a catalog with request
/// counts and barycenter, plus the trace.
pub fn ingest_embedding_trace(
    items: &Path,
    events: &Path,
    default_ingress: NodeId,
    weighting: Barycenter,
) -> Result<(EmbeddingCatalog, RequestTrace)> {
    let (ids, dim, coords) = read_items(std::fs::File::open(items)?, items)?;
    let trace = read_events(std::fs::File::open(events)?, events, &ids, default_ingress)?;
    let n = ids.len();
    let mut catalog = EmbeddingCatalog::new(ids, dim, coords, vec![0; n], weighting)?;
    catalog.count_requests(&trace)?;
    Ok((catalog, trace))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Shell {
    pub inner: f64,
    pub outer: f64,
    pub items: usize,
    pub requests: u64,
    /// Requests per item.
    pub density: f64,
}

/// Requests per item in shells `[kw, (k+1)w)` around the barycenter;
/// shells without items are left out.
pub fn shell_density(catalog: &EmbeddingCatalog, trace: &RequestTrace, width: f64) -> Result<Vec<Shell>> {
    if !(width > 0.0) || !width.is_finite() {
        return Err(Error::invalid(format!("shell width must be positive, got {width}")));
    }
    let mut counts = vec![0u64; catalog.len()];
    for e in &trace.events {
        *counts
            .get_mut(e.object)
            .ok_or_else(|| Error::invalid(format!("trace references unknown item {}", e.object)))? += 1;
    }
    let mut shells: std::collections::BTreeMap<u64, (usize, u64)> = std::collections::BTreeMap::new();
    for (i, &c) in counts.iter().enumerate() {
        let k = (catalog.distance_to_barycenter(i) / width).floor() as u64;
        let s = shells.entry(k).or_default();
        s.0 += 1;
        s.1 += c;
    }
    Ok(shells
        .into_iter()
        .map(|(k, (items, requests))| Shell {
            inner: k as f64 * width,
            outer: (k + 1) as f64 * width,
            items,
            requests,
            density: requests as f64 / items as f64,
        })
        .collect())
}
