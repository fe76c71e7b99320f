//! Demand generators, request traces and embedding catalogs.

pub mod embedding;
pub mod synthetic;
pub mod trace;

pub use embedding::{ingest_embedding_trace, read_events, read_items, shell_density, Barycenter, EmbeddingCatalog, Shell};
pub use synthetic::{
    clustered_catalog, gaussian_grid_demand, gaussian_grid_rates, grid_center_distance, sample_trace, uniform_demand,
    ClusteredSpec, Horizon,
};
pub use trace::{RequestTrace, TraceEvent};
