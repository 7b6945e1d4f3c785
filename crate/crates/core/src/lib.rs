//! Simulator and optimizer for multi-tenant operator scheduling on a
//! shared accelerator.
//!
//! Concurrent tenant models compete for a normalized resource pool. The
//! crate models each tenant as a data-flow graph of profiled operators,
//! simulates greedy multi-stream execution cycle by cycle, and searches
//! for the spatial plan (batch decomposition) and temporal plan
//! (synchronization pointers) that minimize the leftover capacity — the
//! residue — penalized by synchronization cost.
//!
//! Modules:
//! - [`dfg`]: operators, tenant graphs, segmentation, decomposition.
//! - [`cost`]: the profiled (kind, shape, batch) -> cost lookup table.
//! - [`sim`]: the cycle-level simulator and residue accounting.
//! - [`regulate`]: spatial and temporal move generation.
//! - [`search`]: coordinate-descent joint search and brute-force oracle.
//! - [`sweep`]: granularity sweeps over pointer counts and chunk ways.
//! - [`scenario`]: scenario/plan files and synthetic generation.
//! - [`gantt`]: SVG rendering of schedule traces.
//!
//! With the default `parallel` feature, candidate evaluations inside the
//! search and the oracle run on rayon; disabling it yields a fully
//! sequential build with identical results.

pub mod cost;
pub mod dfg;
pub mod fixed;
pub mod gantt;
pub mod regulate;
pub mod scenario;
pub mod search;
pub mod sim;
pub mod sweep;

pub use cost::{load_profile, save_profile, synth_profile, CostEntry, CostModel, SynthParams};
pub use dfg::{
    apply_decomposition, build_model, cluster_listing, segment_model, ChunkOverhead, ModelGraph,
    OperatorDesc, OperatorSpec, PointerMatrix, Segment,
};
pub use fixed::{Frac, ResourceVector, ResourceWeights};
pub use regulate::{
    add_pointer, coordinate_moves, largest_residue_cycle, propose_decomposition,
    DecompositionPlan,
};
pub use search::{
    brute_force_oracle, coordinate_descent, objective, OracleBounds, SearchConfig, SearchResult,
};
pub use sim::{
    makespan, simulate, total_residue, utilization_report, ScenarioConfig, ScheduleTrace,
};
