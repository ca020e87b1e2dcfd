//! Std side of the atomic-arbitrage scanner: JSON-RPC and fixture block
//! sources, checkpointed traversal, the pool registry, classification
//! records, bucket reports and the command-line interface.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod fixture;
pub mod records;
pub mod registry;
pub mod report;
pub mod rpc;
pub mod scan;
pub mod source;
pub mod traverse;
pub mod verify;
pub mod wire;
