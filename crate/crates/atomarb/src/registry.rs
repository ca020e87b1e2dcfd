//! Pool metadata: a JSON cache on disk, filled on demand from contract calls.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};

use atomarb_core::abi::{calldata, decode_address_array, decode_address_return, decode_uint, selector, word_at};
use atomarb_core::amount::MAX_DECIMALS;
use atomarb_core::decode::{balancer_pool_address, DecodeError, PoolKey, PoolMeta, PoolRegistry, Protocol, SwapTopic};
use atomarb_core::types::{Address, H256};
use serde::{Deserialize, Serialize};

use crate::source::{ContractCaller, FetchError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolEntry {
    pub pool: Address,
    pub protocol: Protocol,
    pub tokens: Vec<Address>,
    pub decimals: Vec<u8>,
}

impl From<&PoolMeta> for PoolEntry {
    fn from(m: &PoolMeta) -> Self {
        Self {
            pool: m.pool,
            protocol: m.protocol,
            tokens: m.tokens.clone(),
            decimals: m.decimals.clone(),
        }
    }
}

impl From<PoolEntry> for PoolMeta {
    fn from(e: PoolEntry) -> Self {
        PoolMeta {
            pool: e.pool,
            protocol: e.protocol,
            tokens: e.tokens,
            decimals: e.decimals,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PoolCacheError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {message}")]
    Invalid { path: PathBuf, message: String },
}

/// Reads a pool file (a JSON array of entries). A missing file is empty.
pub fn load_pools(path: &Path) -> Result<BTreeMap<Address, PoolMeta>, PoolCacheError> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(BTreeMap::new()),
        Err(source) => {
            return Err(PoolCacheError::Io {
                path: path.into(),
                source,
            })
        }
    };
    let invalid = |message: String| PoolCacheError::Invalid {
        path: path.into(),
        message,
    };
    let entries: Vec<PoolEntry> = serde_json::from_str(&text).map_err(|e| invalid(e.to_string()))?;
    let mut out = BTreeMap::new();
    for e in entries {
        let meta = PoolMeta::from(e);
        meta.validate().map_err(|e| invalid(e.to_string()))?;
        if meta.decimals.iter().any(|&d| d > MAX_DECIMALS) {
            return Err(invalid(format!("pool {} has a token with more than {MAX_DECIMALS} decimals", meta.pool)));
        }
        if out.insert(meta.pool, meta).is_some() {
            return Err(invalid("duplicate pool entry".into()));
        }
    }
    Ok(out)
}

pub fn pools_to_json(pools: &BTreeMap<Address, PoolMeta>) -> String {
    let entries: Vec<PoolEntry> = pools.values().map(PoolEntry::from).collect();
    let mut text = serde_json::to_string_pretty(&entries).expect("pool entries serialize");
    text.push('\n');
    text
}

/// Replaces `path` atomically with the given pools, sorted by address.
pub fn save_pools(path: &Path, pools: &BTreeMap<Address, PoolMeta>) -> Result<(), PoolCacheError> {
    let io_err = |source| PoolCacheError::Io {
        path: path.into(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(pools_to_json(pools).as_bytes()).map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

type Slot = Arc<OnceLock<Result<PoolMeta, DecodeError>>>;

/// Registry backed by a preloaded map and, optionally, on-chain lookups.
///
/// Each unknown pool is resolved at most once even under concurrent use.
/// Pools that answer the probes wrongly are remembered as unknown. Transport
/// failures are not: the first one is kept in [`LiveRegistry::take_fault`] so
/// the caller can stop instead of silently dropping legs.
pub struct LiveRegistry<'c> {
    known: BTreeMap<Address, PoolMeta>,
    caller: Option<&'c dyn ContractCaller>,
    slots: Mutex<BTreeMap<Address, Slot>>,
    fault: Mutex<Option<FetchError>>,
}

const TOKEN0: &str = "token0()";
const TOKEN1: &str = "token1()";
const DECIMALS: &str = "decimals()";
const ALGEBRA_STATE: &str = "globalState()";
const V3_STATE: &str = "slot0()";
const GET_POOL_TOKENS: &str = "getPoolTokens(bytes32)";

enum Probe {
    Value(Vec<u8>),
    Absent,
}

impl<'c> LiveRegistry<'c> {
    pub fn new(known: BTreeMap<Address, PoolMeta>, caller: Option<&'c dyn ContractCaller>) -> Self {
        Self {
            known,
            caller,
            slots: Mutex::new(BTreeMap::new()),
            fault: Mutex::new(None),
        }
    }

    /// First transport or node failure seen since the last call.
    pub fn take_fault(&self) -> Option<FetchError> {
        self.fault.lock().expect("fault lock").take()
    }

    /// Preloaded pools plus every pool resolved successfully so far.
    pub fn snapshot(&self) -> BTreeMap<Address, PoolMeta> {
        let mut all = self.known.clone();
        for (addr, slot) in self.slots.lock().expect("slot lock").iter() {
            if let Some(Ok(meta)) = slot.get() {
                all.insert(*addr, meta.clone());
            }
        }
        all
    }

    /// Number of pools resolved through contract calls.
    pub fn discovered(&self) -> usize {
        self.slots
            .lock()
            .expect("slot lock")
            .values()
            .filter(|s| matches!(s.get(), Some(Ok(_))))
            .count()
    }

    fn call(&self, caller: &dyn ContractCaller, to: Address, data: &[u8]) -> Result<Probe, FetchError> {
        match caller.call(to, data) {
            Ok(bytes) if bytes.is_empty() => Ok(Probe::Absent),
            Ok(bytes) => Ok(Probe::Value(bytes)),
            Err(FetchError::Revert(_)) => Ok(Probe::Absent),
            Err(e) => Err(e),
        }
    }

    fn decimals(&self, caller: &dyn ContractCaller, token: Address) -> Result<Option<u8>, FetchError> {
        let Probe::Value(bytes) = self.call(caller, token, &calldata(selector(DECIMALS), &[]))? else {
            return Ok(None);
        };
        let Ok(word) = word_at(&bytes, 0) else {
            return Ok(None);
        };
        Ok(u8::try_from(decode_uint(&word)).ok().filter(|&d| d <= MAX_DECIMALS))
    }

    fn address_of(&self, caller: &dyn ContractCaller, to: Address, sig: &str) -> Result<Option<Address>, FetchError> {
        match self.call(caller, to, &calldata(selector(sig), &[]))? {
            Probe::Value(bytes) => Ok(decode_address_return(&bytes).ok()),
            Probe::Absent => Ok(None),
        }
    }

    fn discover_pair(
        &self,
        caller: &dyn ContractCaller,
        pool: Address,
        topic: SwapTopic,
    ) -> Result<Option<PoolMeta>, FetchError> {
        let protocol = match topic {
            SwapTopic::PairV2 => Protocol::UniV2,
            SwapTopic::Concentrated => {
                if matches!(self.call(caller, pool, &calldata(selector(ALGEBRA_STATE), &[]))?, Probe::Value(_)) {
                    Protocol::Algebra
                } else if matches!(self.call(caller, pool, &calldata(selector(V3_STATE), &[]))?, Probe::Value(_)) {
                    Protocol::UniV3
                } else {
                    return Ok(None);
                }
            }
            SwapTopic::BalancerVault => return Ok(None),
        };
        let (Some(t0), Some(t1)) = (self.address_of(caller, pool, TOKEN0)?, self.address_of(caller, pool, TOKEN1)?)
        else {
            return Ok(None);
        };
        let (Some(d0), Some(d1)) = (self.decimals(caller, t0)?, self.decimals(caller, t1)?) else {
            return Ok(None);
        };
        Ok(PoolMeta::pair(pool, protocol, (t0, d0), (t1, d1)).ok())
    }

    fn discover_balancer(
        &self,
        caller: &dyn ContractCaller,
        vault: Address,
        pool_id: H256,
    ) -> Result<Option<PoolMeta>, FetchError> {
        let Probe::Value(bytes) = self.call(caller, vault, &calldata(selector(GET_POOL_TOKENS), &[pool_id]))? else {
            return Ok(None);
        };
        let Ok(tokens) = decode_address_array(&bytes, 0) else {
            return Ok(None);
        };
        let pool = balancer_pool_address(&pool_id);
        let mut decimals = Vec::with_capacity(tokens.len());
        for t in &tokens {
            match self.decimals(caller, *t)? {
                Some(d) => decimals.push(d),
                None => return Ok(None),
            }
        }
        let meta = PoolMeta {
            pool,
            protocol: Protocol::BalancerV2,
            tokens,
            decimals,
        };
        Ok(meta.validate().ok().map(|_| meta))
    }

    fn discover(&self, caller: &dyn ContractCaller, key: &PoolKey) -> Result<Option<PoolMeta>, FetchError> {
        match *key {
            PoolKey::Pair { pool, topic } => self.discover_pair(caller, pool, topic),
            PoolKey::Balancer { vault, pool_id } => self.discover_balancer(caller, vault, pool_id),
        }
    }
}

impl PoolRegistry for LiveRegistry<'_> {
    fn resolve(&self, key: &PoolKey) -> Result<PoolMeta, DecodeError> {
        let pool = key.pool();
        if let Some(meta) = self.known.get(&pool) {
            return Ok(meta.clone());
        }
        let Some(caller) = self.caller else {
            return Err(DecodeError::UnknownPool(pool));
        };
        let slot = self.slots.lock().expect("slot lock").entry(pool).or_default().clone();
        if let Some(done) = slot.get() {
            return done.clone();
        }
        // A fault leaves the slot empty so a later run can retry.
        let mut fault = None;
        let result = slot.get_or_init(|| match self.discover(caller, key) {
            Ok(Some(meta)) => Ok(meta),
            Ok(None) => Err(DecodeError::UnknownPool(pool)),
            Err(e) => {
                fault = Some(e);
                Err(DecodeError::UnknownPool(pool))
            }
        });
        let result = result.clone();
        if let Some(e) = fault {
            self.slots.lock().expect("slot lock").remove(&pool);
            self.fault.lock().expect("fault lock").get_or_insert(e);
        }
        result
    }
}
