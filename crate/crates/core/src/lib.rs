//! Defect prediction from compiled programs: x86 assembly is parsed into an
//! instruction-level control flow graph, vertices are embedded from one or
//! two views (normalized instruction, instruction group), and a directed
//! graph convolutional network classifies the whole graph.

pub mod asm;
pub mod cfg;
pub mod dataset;
pub mod dgcnn;
pub mod exec;
pub mod features;
pub mod linalg;
pub mod metrics;

pub use exec::Exec;
