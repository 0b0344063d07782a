//! Digital twin of the NV-1 massively parallel accelerator: a
//! deterministic epoch-synchronous simulator of up to 65,536
//! single-instruction cores with boot-loaded address-table communication
//! and multi-chiplet chaining, plus the analytical performance and power
//! model for the architecture.
//!
//! - [`model`] — node ids, opcodes, connection tables, program validation
//! - [`interconnect`] — the data-only broadcast bus and chip bridges
//! - [`sim`] — the epoch engine: double buffering, host I/O, statistics
//! - [`reference`] — independent dense executor used as the golden model
//! - [`loader`] — netlist format, graph compiler, boot-image codec
//! - [`perf`] — bandwidth, utilization, current, and efficiency figures

pub mod config;
pub mod interconnect;
pub mod loader;
pub mod model;
pub mod perf;
pub mod reference;
pub mod sim;
