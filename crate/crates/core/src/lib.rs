//! Detection of gambling smart contracts and gambling-associated addresses
//! on Ethereum from opcode statistics and transaction-graph metrics.

pub mod correction;
pub mod dataset;
pub mod disasm;
pub mod features;
pub mod gbdt;
pub mod graph;
pub mod memory;
pub mod metrics;
pub mod pipeline;
pub mod synthetic;
