//! Processor-space mapping toolkit.
//!
//! * [`procspace`]: machine grids and the split / merge / swap / slice
//!   transformations, with index resolution back to `(node, proc)`.
//! * [`decompose`]: exhaustive search for communication-minimizing
//!   processor grids, the balanced greedy baseline and the AM-GM bound.
//! * [`commvol`]: closed-form communication volumes and a cell-counting
//!   oracle.
//! * [`dsl`]: lexer, parser, validator and evaluator for mapper sources.
//! * [`corpus`]: bundled example mappers.
//! * [`tasksim`]: a deterministic simulator of the task lifecycle
//!   (enqueue, distribute, map, launch, execute) and a trace checker.

pub mod commvol;
pub mod corpus;
pub mod decompose;
pub mod dsl;
pub mod procspace;
pub mod tasksim;

pub use procspace::{MachineShape, ProcKind, ProcSpace, ProcessorRef, Transform, Tuple};
