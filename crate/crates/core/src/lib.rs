//! Atomic-arbitrage detection over decoded DEX swap legs.
//!
//! The crate is `no_std` (with `alloc`) and holds everything that does not
//! touch the network or the filesystem: chain record types, exact token
//! arithmetic, swap-event decoding, the per-transaction classifier, bucketed
//! aggregation, and a deterministic synthetic-ledger generator with an
//! independent reference classifier.

#![no_std]
extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod abi;
pub mod amount;
pub mod analytics;
pub mod classify;
pub mod decode;
pub mod delta;
pub mod golden;
pub mod price;
pub mod synth;
pub mod types;

pub use amount::TokenAmount;
pub use delta::DeltaVector;
pub use price::PriceTable;
pub use types::{Address, RawBlock, RawLog, RawTransaction, TxHash, TxStatus, H256};
