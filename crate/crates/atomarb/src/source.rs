//! Where blocks come from.

use std::collections::BTreeMap;
use std::path::Path;

use atomarb_core::types::{Address, RawBlock};

use crate::fixture::{FixtureError, FixtureReader};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FetchError {
    #[error("block {0} not found")]
    NotFound(u64),
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("malformed response: {0}")]
    Decode(String),
    #[error("node returned error {code}: {message}")]
    Rpc { code: i64, message: String },
    #[error("call reverted: {0}")]
    Revert(String),
}

/// A random-access block store.
pub trait BlockSource: Sync {
    /// Highest block number available.
    fn head(&self) -> Result<u64, FetchError>;
    fn fetch_block(&self, number: u64) -> Result<RawBlock, FetchError>;
    /// Lowest block number available.
    fn first(&self) -> Result<u64, FetchError> {
        Ok(0)
    }
}

/// Read-only contract calls, used to discover pool metadata.
pub trait ContractCaller: Sync {
    fn call(&self, to: Address, calldata: &[u8]) -> Result<Vec<u8>, FetchError>;
}

/// Blocks held in memory after loading a fixture file.
#[derive(Debug, Clone, Default)]
pub struct FixtureSource {
    blocks: BTreeMap<u64, RawBlock>,
}

impl FixtureSource {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, FixtureError> {
        let mut blocks = BTreeMap::new();
        for b in FixtureReader::open(path)? {
            let b = b?;
            blocks.insert(b.number, b);
        }
        Ok(Self { blocks })
    }

    pub fn from_blocks(blocks: impl IntoIterator<Item = RawBlock>) -> Self {
        Self {
            blocks: blocks.into_iter().map(|b| (b.number, b)).collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    /// Lowest and highest block numbers, if any.
    pub fn extent(&self) -> Option<(u64, u64)> {
        Some((*self.blocks.keys().next()?, *self.blocks.keys().next_back()?))
    }
}

impl BlockSource for FixtureSource {
    fn head(&self) -> Result<u64, FetchError> {
        self.extent().map(|e| e.1).ok_or(FetchError::NotFound(0))
    }

    fn first(&self) -> Result<u64, FetchError> {
        self.extent().map(|e| e.0).ok_or(FetchError::NotFound(0))
    }

    fn fetch_block(&self, number: u64) -> Result<RawBlock, FetchError> {
        self.blocks.get(&number).cloned().ok_or(FetchError::NotFound(number))
    }
}
