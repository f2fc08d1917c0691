//! Task lifecycle simulation and trace checking.
//!
//! Tasks form a tree; each one moves through enqueued, mapped, launched
//! and executed, driven by per-node FIFO queues of enqueued (E) and
//! mapped (M) tasks. A mapper places each iteration point of an index
//! task on a processor, and tasks spanning several processors are split
//! into single-processor slices before mapping.

pub mod check;
pub mod graph;
pub mod sim;

pub use check::{check_trace, CheckDiagnostic, CheckKind};
pub use graph::{load_taskgraph, random_graph, GraphError, IndexTask, TaskGraph};
pub use sim::{
    run_to_quiescence, run_with, shard_policy, DistributionRecord, FnMapper, LogEntry, PointMapper, PointTable,
    ProcStats, Rule, Scheduler, Shard, SimError, Simulation, SliceRecord, Stage, Trace,
};
