//! Objects, network, demand and allocations, with exact cost evaluation.

pub mod allocation;
pub mod demand;
pub mod eval;
pub mod instance;
pub mod io;
pub mod kdtree;
pub mod space;
pub mod topology;

pub use allocation::{exchange_candidate, Allocation, Approximizer};
pub use demand::{Demand, RateEntry, RegionRates};
pub use eval::{caching_gain, expected_cost, serve_cost, total_cost, AllocationIndex, Assignment, CostBreakdown};
pub use instance::{Choice, Instance, PathStop, Request, Route};
pub use space::{approximation_cost_between, power_cost, CostMatrix, Metric, ObjectId, ObjectSpace, PointSet};
pub use topology::{Capacity, NodeId, Routing, Topology, TreeNode};
pub use io::{load_instance, read_allocation, write_allocation, InstanceFile};
