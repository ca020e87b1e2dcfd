//! Swap-event decoding for Uniswap-V2-style pairs, Uniswap-V3-style and
//! Algebra concentrated-liquidity pools, and the Balancer V2 Vault.
//!
//! Every decoded leg is expressed from the taker's side: `token_in` is paid
//! into the pool and `token_out` is received from it. Amounts are copied from
//! the log without rescaling; the only transformation is taking the magnitude
//! of a signed concentrated-liquidity amount.
//!
//! Uniswap V3 and Algebra pools emit events with the same ABI shape, so they
//! share a topic. The two families are told apart by pool metadata.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use num_bigint::BigInt;
use num_traits::{Signed, Zero};

use crate::abi::{self, decode_int, decode_uint, event_topic, word_at};
use crate::amount::TokenAmount;
use crate::types::{Address, RawLog, RawTransaction, TxHash, H256};

pub const UNIV2_SWAP_SIGNATURE: &str = "Swap(address,uint256,uint256,uint256,uint256,address)";
pub const UNIV3_SWAP_SIGNATURE: &str = "Swap(address,address,int256,int256,uint160,uint128,int24)";
pub const ALGEBRA_SWAP_SIGNATURE: &str = "Swap(address,address,int256,int256,uint160,uint128,int24)";
pub const BALANCER_SWAP_SIGNATURE: &str = "Swap(bytes32,address,address,uint256,uint256)";

/// Decimals assumed for a Balancer token with no registry entry.
pub const DEFAULT_DECIMALS: u8 = 18;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Protocol {
    UniV2,
    UniV3,
    Algebra,
    BalancerV2,
}

impl Protocol {
    pub const ALL: [Protocol; 4] = [
        Protocol::UniV2,
        Protocol::UniV3,
        Protocol::Algebra,
        Protocol::BalancerV2,
    ];

    pub fn topic_kind(self) -> SwapTopic {
        match self {
            Protocol::UniV2 => SwapTopic::PairV2,
            Protocol::UniV3 | Protocol::Algebra => SwapTopic::Concentrated,
            Protocol::BalancerV2 => SwapTopic::BalancerVault,
        }
    }

    pub fn signature(self) -> &'static str {
        match self {
            Protocol::UniV2 => UNIV2_SWAP_SIGNATURE,
            Protocol::UniV3 => UNIV3_SWAP_SIGNATURE,
            Protocol::Algebra => ALGEBRA_SWAP_SIGNATURE,
            Protocol::BalancerV2 => BALANCER_SWAP_SIGNATURE,
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Distinct swap-event topics. Concentrated covers both V3 and Algebra.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SwapTopic {
    PairV2,
    Concentrated,
    BalancerVault,
}

/// topic0 values computed from the canonical signatures.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwapTopics {
    pub pair_v2: H256,
    pub concentrated: H256,
    pub balancer: H256,
}

impl Default for SwapTopics {
    fn default() -> Self {
        Self::new()
    }
}

impl SwapTopics {
    pub fn new() -> Self {
        Self {
            pair_v2: event_topic(UNIV2_SWAP_SIGNATURE),
            concentrated: event_topic(UNIV3_SWAP_SIGNATURE),
            balancer: event_topic(BALANCER_SWAP_SIGNATURE),
        }
    }

    pub fn topic(&self, kind: SwapTopic) -> H256 {
        match kind {
            SwapTopic::PairV2 => self.pair_v2,
            SwapTopic::Concentrated => self.concentrated,
            SwapTopic::BalancerVault => self.balancer,
        }
    }

    pub fn classify(&self, log: &RawLog) -> Option<SwapTopic> {
        let t0 = log.topic0()?;
        if *t0 == self.pair_v2 {
            Some(SwapTopic::PairV2)
        } else if *t0 == self.concentrated {
            Some(SwapTopic::Concentrated)
        } else if *t0 == self.balancer {
            Some(SwapTopic::BalancerVault)
        } else {
            None
        }
    }
}

/// Matches a log's topic0 against the canonical swap signatures.
pub fn classify_log(log: &RawLog) -> Option<SwapTopic> {
    SwapTopics::new().classify(log)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolMeta {
    pub pool: Address,
    pub protocol: Protocol,
    /// `[token0, token1]` for pair pools; the registered token list for Balancer.
    pub tokens: Vec<Address>,
    pub decimals: Vec<u8>,
}

impl PoolMeta {
    pub fn pair(
        pool: Address,
        protocol: Protocol,
        token0: (Address, u8),
        token1: (Address, u8),
    ) -> Result<Self, DecodeError> {
        let meta = Self {
            pool,
            protocol,
            tokens: alloc::vec![token0.0, token1.0],
            decimals: alloc::vec![token0.1, token1.1],
        };
        meta.validate()?;
        Ok(meta)
    }

    pub fn validate(&self) -> Result<(), DecodeError> {
        let bad = |reason: &'static str| DecodeError::BadMeta {
            pool: self.pool,
            reason,
        };
        if self.tokens.len() != self.decimals.len() {
            return Err(bad("token and decimals lists differ in length"));
        }
        if self.tokens.len() < 2 {
            return Err(bad("fewer than two tokens"));
        }
        if self.protocol != Protocol::BalancerV2 && self.tokens.len() != 2 {
            return Err(bad("pair pool must have exactly two tokens"));
        }
        for (i, t) in self.tokens.iter().enumerate() {
            if self.tokens[i + 1..].contains(t) {
                return Err(bad("duplicate token"));
            }
        }
        Ok(())
    }

    pub fn token0(&self) -> Address {
        self.tokens[0]
    }

    pub fn token1(&self) -> Address {
        self.tokens[1]
    }

    pub fn decimals_of(&self, token: &Address) -> Option<u8> {
        self.tokens
            .iter()
            .position(|t| t == token)
            .map(|i| self.decimals[i])
    }
}

/// One decoded swap leg.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwapEvent {
    pub pool: Address,
    pub protocol: Protocol,
    pub token_in: Address,
    pub token_out: Address,
    pub amount_in: TokenAmount,
    pub amount_out: TokenAmount,
    /// Recipient named by the event; the Balancer Vault event has none.
    pub recipient: Option<Address>,
    pub log_index: u64,
    pub tx_hash: TxHash,
}

impl SwapEvent {
    /// Checks the leg invariants: distinct tokens, non-negative amounts, at
    /// least one of them positive.
    pub fn validate(&self) -> Result<(), DecodeError> {
        if self.token_in == self.token_out {
            return Err(DecodeError::Malformed("token_in equals token_out"));
        }
        if self.amount_in.is_negative() || self.amount_out.is_negative() {
            return Err(DecodeError::Malformed("negative amount"));
        }
        if self.amount_in.is_zero() && self.amount_out.is_zero() {
            return Err(DecodeError::Malformed("all amounts zero"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DecodeError {
    #[error("malformed swap: {0}")]
    Malformed(&'static str),
    #[error("ambiguous swap direction")]
    AmbiguousSwap,
    #[error("unknown pool {0}")]
    UnknownPool(Address),
    #[error("pool {pool} is registered as {registered}, log needs {expected:?}")]
    ProtocolMismatch {
        pool: Address,
        registered: Protocol,
        expected: SwapTopic,
    },
    #[error("invalid metadata for pool {pool}: {reason}")]
    BadMeta { pool: Address, reason: &'static str },
    #[error("log is not a swap event")]
    NotASwap,
}

/// Key under which pool metadata is looked up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PoolKey {
    /// Pair-style pool identified by its emitting address.
    Pair { pool: Address, topic: SwapTopic },
    /// Balancer pool identified by Vault and pool id.
    Balancer { vault: Address, pool_id: H256 },
}

impl PoolKey {
    pub fn pool(&self) -> Address {
        match self {
            PoolKey::Pair { pool, .. } => *pool,
            PoolKey::Balancer { pool_id, .. } => balancer_pool_address(pool_id),
        }
    }
}

/// Source of pool metadata.
pub trait PoolRegistry {
    fn resolve(&self, key: &PoolKey) -> Result<PoolMeta, DecodeError>;
}

impl PoolRegistry for BTreeMap<Address, PoolMeta> {
    fn resolve(&self, key: &PoolKey) -> Result<PoolMeta, DecodeError> {
        let pool = key.pool();
        self.get(&pool).cloned().ok_or(DecodeError::UnknownPool(pool))
    }
}

impl<R: PoolRegistry + ?Sized> PoolRegistry for &R {
    fn resolve(&self, key: &PoolKey) -> Result<PoolMeta, DecodeError> {
        (**self).resolve(key)
    }
}

/// The pool address is the first 20 bytes of a Balancer pool id.
pub fn balancer_pool_address(pool_id: &H256) -> Address {
    let mut a = [0u8; 20];
    a.copy_from_slice(&pool_id.0[..20]);
    Address(a)
}

fn expect_shape(log: &RawLog, topics: usize, words: usize) -> Result<(), DecodeError> {
    if log.topics.len() != topics {
        return Err(DecodeError::Malformed("unexpected topic count"));
    }
    if log.data.len() != words * abi::WORD {
        return Err(DecodeError::Malformed("unexpected data length"));
    }
    Ok(())
}

fn check_pair_meta(log: &RawLog, meta: &PoolMeta, allowed: &[Protocol]) -> Result<(), DecodeError> {
    if !allowed.contains(&meta.protocol) {
        return Err(DecodeError::ProtocolMismatch {
            pool: meta.pool,
            registered: meta.protocol,
            expected: allowed[0].topic_kind(),
        });
    }
    if meta.pool != log.emitter {
        return Err(DecodeError::BadMeta {
            pool: meta.pool,
            reason: "metadata does not belong to the emitting pool",
        });
    }
    meta.validate()
}

fn word(data: &[u8], i: usize) -> Result<H256, DecodeError> {
    word_at(data, i).map_err(|_| DecodeError::Malformed("unexpected data length"))
}

fn pair_leg(
    log: &RawLog,
    meta: &PoolMeta,
    tx_hash: TxHash,
    in_idx: usize,
    amount_in: BigInt,
    amount_out: BigInt,
    recipient: Address,
) -> SwapEvent {
    let out_idx = 1 - in_idx;
    SwapEvent {
        pool: meta.pool,
        protocol: meta.protocol,
        token_in: meta.tokens[in_idx],
        token_out: meta.tokens[out_idx],
        amount_in: TokenAmount::new(amount_in, meta.decimals[in_idx]),
        amount_out: TokenAmount::new(amount_out, meta.decimals[out_idx]),
        recipient: Some(recipient),
        log_index: log.log_index,
        tx_hash,
    }
}

/// Decodes `Swap(sender, amount0In, amount1In, amount0Out, amount1Out, to)`.
///
/// Exactly one side may be paid in and the other paid out. A leg with only an
/// out amount (or only an in amount) is accepted: the pair has two tokens, so
/// the missing side is implied with amount zero.
pub fn decode_v2_swap(log: &RawLog, meta: &PoolMeta, tx_hash: TxHash) -> Result<SwapEvent, DecodeError> {
    expect_shape(log, 3, 4)?;
    check_pair_meta(log, meta, &[Protocol::UniV2])?;
    let amounts: Vec<BigInt> = (0..4)
        .map(|i| word(&log.data, i).map(|w| BigInt::from(decode_uint(&w))))
        .collect::<Result<_, _>>()?;
    let (in0, in1, out0, out1) = (&amounts[0], &amounts[1], &amounts[2], &amounts[3]);
    if amounts.iter().all(Zero::is_zero) {
        return Err(DecodeError::Malformed("all amounts zero"));
    }
    if (in0.is_positive() && in1.is_positive()) || (out0.is_positive() && out1.is_positive()) {
        return Err(DecodeError::AmbiguousSwap);
    }
    let in_side = if in0.is_positive() {
        Some(0)
    } else if in1.is_positive() {
        Some(1)
    } else {
        None
    };
    let out_side = if out0.is_positive() {
        Some(0)
    } else if out1.is_positive() {
        Some(1)
    } else {
        None
    };
    let in_idx = match (in_side, out_side) {
        (Some(i), Some(o)) if i == o => return Err(DecodeError::AmbiguousSwap),
        (Some(i), _) => i,
        (None, Some(o)) => 1 - o,
        (None, None) => unreachable!("all-zero case handled above"),
    };
    let amount_in = amounts[in_idx].clone();
    let amount_out = amounts[2 + (1 - in_idx)].clone();
    let recipient = Address::from_word(&log.topics[2]);
    Ok(pair_leg(log, meta, tx_hash, in_idx, amount_in, amount_out, recipient))
}

fn decode_concentrated(
    log: &RawLog,
    meta: &PoolMeta,
    tx_hash: TxHash,
    protocol: Protocol,
) -> Result<SwapEvent, DecodeError> {
    expect_shape(log, 3, 5)?;
    check_pair_meta(log, meta, &[protocol])?;
    let a0 = decode_int(&word(&log.data, 0)?);
    let a1 = decode_int(&word(&log.data, 1)?);
    if a0.is_zero() && a1.is_zero() {
        return Err(DecodeError::Malformed("all amounts zero"));
    }
    if a0.signum() == a1.signum() {
        return Err(DecodeError::Malformed("both amounts have the same sign"));
    }
    // Positive = paid into the pool by the taker.
    let (in_idx, amount_in, amount_out) = if a0.is_positive() || a1.is_negative() {
        (0, a0, -a1)
    } else {
        (1, a1, -a0)
    };
    let recipient = Address::from_word(&log.topics[2]);
    Ok(pair_leg(log, meta, tx_hash, in_idx, amount_in, amount_out, recipient))
}

/// Decodes a Uniswap-V3-style `Swap(sender, recipient, amount0, amount1, ...)`.
pub fn decode_v3_swap(log: &RawLog, meta: &PoolMeta, tx_hash: TxHash) -> Result<SwapEvent, DecodeError> {
    decode_concentrated(log, meta, tx_hash, Protocol::UniV3)
}

/// Decodes an Algebra swap; same sign convention as V3.
pub fn decode_algebra_swap(log: &RawLog, meta: &PoolMeta, tx_hash: TxHash) -> Result<SwapEvent, DecodeError> {
    decode_concentrated(log, meta, tx_hash, Protocol::Algebra)
}

/// Decodes the Vault's `Swap(poolId, tokenIn, tokenOut, amountIn, amountOut)`.
/// Token decimals come from `meta` when the pool is registered.
pub fn decode_balancer_swap(
    log: &RawLog,
    meta: Option<&PoolMeta>,
    tx_hash: TxHash,
) -> Result<SwapEvent, DecodeError> {
    expect_shape(log, 4, 2)?;
    let pool_id = log.topics[1];
    let pool = balancer_pool_address(&pool_id);
    let token_in = Address::from_word(&log.topics[2]);
    let token_out = Address::from_word(&log.topics[3]);
    let amount_in = BigInt::from(decode_uint(&word(&log.data, 0)?));
    let amount_out = BigInt::from(decode_uint(&word(&log.data, 1)?));
    if let Some(m) = meta {
        if m.protocol != Protocol::BalancerV2 {
            return Err(DecodeError::ProtocolMismatch {
                pool,
                registered: m.protocol,
                expected: SwapTopic::BalancerVault,
            });
        }
    }
    let decimals = |t: &Address| meta.and_then(|m| m.decimals_of(t)).unwrap_or(DEFAULT_DECIMALS);
    let leg = SwapEvent {
        pool,
        protocol: Protocol::BalancerV2,
        token_in,
        token_out,
        amount_in: TokenAmount::new(amount_in, decimals(&token_in)),
        amount_out: TokenAmount::new(amount_out, decimals(&token_out)),
        recipient: None,
        log_index: log.log_index,
        tx_hash,
    };
    leg.validate()?;
    Ok(leg)
}

/// A candidate swap log that could not be turned into a leg.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedLeg {
    pub log_index: u64,
    pub topic: SwapTopic,
    pub error: DecodeError,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DecodeDiagnostics {
    /// Logs whose topic0 matched a swap signature.
    pub candidate_logs: usize,
    pub skipped: Vec<SkippedLeg>,
}

impl DecodeDiagnostics {
    pub fn merge(&mut self, other: &DecodeDiagnostics) {
        self.candidate_logs += other.candidate_logs;
        self.skipped.extend(other.skipped.iter().cloned());
    }

    pub fn summary(&self) -> String {
        alloc::format!(
            "{} candidate swap logs, {} skipped",
            self.candidate_logs,
            self.skipped.len()
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DecodedTransaction {
    pub swaps: Vec<SwapEvent>,
    pub diagnostics: DecodeDiagnostics,
}

/// Decodes swap legs using precomputed topics and a metadata registry.
pub struct Decoder<R> {
    topics: SwapTopics,
    registry: R,
}

impl<R: PoolRegistry> Decoder<R> {
    pub fn new(registry: R) -> Self {
        Self {
            topics: SwapTopics::new(),
            registry,
        }
    }

    pub fn topics(&self) -> &SwapTopics {
        &self.topics
    }

    pub fn registry(&self) -> &R {
        &self.registry
    }

    /// Decodes a single log, resolving its pool through the registry.
    pub fn decode_log(&self, log: &RawLog, tx_hash: TxHash) -> Result<SwapEvent, DecodeError> {
        let topic = self.topics.classify(log).ok_or(DecodeError::NotASwap)?;
        match topic {
            SwapTopic::PairV2 | SwapTopic::Concentrated => {
                let key = PoolKey::Pair {
                    pool: log.emitter,
                    topic,
                };
                let meta = self.registry.resolve(&key)?;
                match (topic, meta.protocol) {
                    (SwapTopic::PairV2, _) => decode_v2_swap(log, &meta, tx_hash),
                    (_, Protocol::Algebra) => decode_algebra_swap(log, &meta, tx_hash),
                    _ => decode_v3_swap(log, &meta, tx_hash),
                }
            }
            SwapTopic::BalancerVault => {
                let pool_id = *log.topics.get(1).ok_or(DecodeError::Malformed("unexpected topic count"))?;
                let key = PoolKey::Balancer {
                    vault: log.emitter,
                    pool_id,
                };
                let meta = match self.registry.resolve(&key) {
                    Ok(m) => Some(m),
                    Err(DecodeError::UnknownPool(_)) => None,
                    Err(e) => return Err(e),
                };
                decode_balancer_swap(log, meta.as_ref(), tx_hash)
            }
        }
    }

    /// All decodable swap legs of a transaction, in log order. Failed
    /// transactions revert every leg and yield nothing.
    pub fn decode_transaction(&self, tx: &RawTransaction) -> DecodedTransaction {
        let mut out = DecodedTransaction::default();
        if !tx.succeeded() {
            return out;
        }
        for log in &tx.logs {
            let Some(topic) = self.topics.classify(log) else {
                continue;
            };
            out.diagnostics.candidate_logs += 1;
            match self.decode_log(log, tx.hash) {
                Ok(leg) => out.swaps.push(leg),
                Err(error) => out.diagnostics.skipped.push(SkippedLeg {
                    log_index: log.log_index,
                    topic,
                    error,
                }),
            }
        }
        out
    }
}

/// One-shot form of [`Decoder::decode_transaction`].
pub fn decode_transaction<R: PoolRegistry>(tx: &RawTransaction, registry: R) -> DecodedTransaction {
    Decoder::new(registry).decode_transaction(tx)
}
