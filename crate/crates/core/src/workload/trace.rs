use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{NodeId, ObjectId};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub time: f64,
    pub object: ObjectId,
    pub ingress: NodeId,
}

/// Timestamped requests, in non-decreasing time order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RequestTrace {
    pub events: Vec<TraceEvent>,
    pub seed: Option<u64>,
    pub provenance: Option<String>,
}

impl RequestTrace {
    pub fn new(events: Vec<TraceEvent>) -> Result<Self> {
        if let Some(w) = events.windows(2).position(|w| w[1].time < w[0].time) {
            return Err(Error::invalid(format!(
                "trace timestamps decrease at event {}",
                w + 1
            )));
        }
        Ok(RequestTrace {
            events,
            seed: None,
            provenance: None,
        })
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn check_objects(&self, objects: usize, nodes: usize) -> Result<()> {
        for (i, e) in self.events.iter().enumerate() {
            if e.object >= objects || e.ingress >= nodes {
                return Err(Error::invalid(format!(
                    "trace event {i} references object {} at node {} outside the instance",
                    e.object, e.ingress
                )));
            }
        }
        Ok(())
    }

    /// Writes `timestamp,item_id,ingress_node` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["timestamp", "item_id", "ingress_node"])?;
        for e in &self.events {
            w.write_record([e.time.to_string(), e.object.to_string(), e.ingress.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    /// Reads events; item ids are used as object ids directly and a missing
    /// ingress column means `default_ingress`. Out-of-order rows are sorted.
    pub fn read_csv<R: Read>(input: R, path: &Path, default_ingress: NodeId) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(input);
        let mut events = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = rec.position().map_or(i as u64 + 2, |p| p.line()) as usize;
            let bad = |message: String| Error::Parse {
                path: path.to_path_buf(),
                line,
                message,
            };
            if rec.len() < 2 {
                return Err(bad("expected timestamp,item_id[,ingress_node]".into()));
            }
            let time: f64 = rec[0].parse().map_err(|e| bad(format!("timestamp: {e}")))?;
            let object: ObjectId = rec[1].parse().map_err(|e| bad(format!("item_id: {e}")))?;
            let ingress = match rec.get(2) {
                Some(s) if !s.is_empty() => s.parse().map_err(|e| bad(format!("ingress_node: {e}")))?,
                _ => default_ingress,
            };
            if !time.is_finite() {
                return Err(bad("timestamp must be finite".into()));
            }
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

    pub fn load(path: &Path, default_ingress: NodeId) -> Result<Self> {
        RequestTrace::read_csv(std::fs::File::open(path)?, path, default_ingress)
    }
}
