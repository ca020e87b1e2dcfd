//! Swap-event encoders: the inverse of [`crate::decode`].

use alloc::vec;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_traits::Zero;

use crate::abi::{encode_int, encode_unsigned, fits_unsigned};
use crate::decode::{PoolMeta, Protocol, SwapEvent, SwapTopics};
use crate::types::{Address, RawLog, H256};

/// Balancer V2 Vault, deployed at the same address on every chain.
pub const BALANCER_VAULT: Address = Address([
    0xba, 0x12, 0x22, 0x22, 0x22, 0x22, 0x8d, 0x8b, 0xa4, 0x45, 0x95, 0x8a, 0x75, 0xa0, 0x70, 0x4d, 0x56, 0x6b, 0xf2,
    0xc8,
]);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EncodeError {
    #[error("swap cannot be encoded: {0}")]
    Unencodable(&'static str),
}

fn unencodable(reason: &'static str) -> EncodeError {
    EncodeError::Unencodable(reason)
}

/// Balancer pool id: pool address, then a two-byte specialization and a
/// ten-byte nonce (both zero here).
pub fn balancer_pool_id(pool: &Address) -> H256 {
    let mut id = [0u8; 32];
    id[..20].copy_from_slice(&pool.0);
    H256(id)
}

fn word_bytes(w: Result<H256, crate::abi::WordError>) -> Result<[u8; 32], EncodeError> {
    w.map(|h| h.0).map_err(|_| unencodable("amount does not fit its ABI word"))
}

/// Builds the log whose decoding yields `s` exactly.
///
/// Pair-style legs need the pool metadata to order token0/token1; Balancer
/// legs are emitted by `vault` and take decimals from `meta` when present.
pub fn encode_swap(s: &SwapEvent, meta: Option<&PoolMeta>, vault: Address) -> Result<RawLog, EncodeError> {
    if s.token_in == s.token_out {
        return Err(unencodable("token_in equals token_out"));
    }
    let (ain, aout) = (&s.amount_in.raw, &s.amount_out.raw);
    if ain.is_zero() && aout.is_zero() {
        return Err(unencodable("both amounts zero"));
    }
    if !fits_unsigned(ain, 256) || !fits_unsigned(aout, 256) {
        return Err(unencodable("amounts must be non-negative uint256"));
    }
    if let Some(m) = meta {
        if m.protocol != s.protocol {
            return Err(unencodable("protocol differs from pool metadata"));
        }
        if m.decimals_of(&s.token_in) != Some(s.amount_in.decimals)
            || m.decimals_of(&s.token_out) != Some(s.amount_out.decimals)
        {
            return Err(unencodable("tokens or decimals differ from pool metadata"));
        }
    }
    let topics = SwapTopics::new();
    match s.protocol {
        Protocol::BalancerV2 => {
            if s.recipient.is_some() {
                return Err(unencodable("the Vault event carries no recipient"));
            }
            if meta.is_none() && (s.amount_in.decimals != 18 || s.amount_out.decimals != 18) {
                return Err(unencodable("unregistered Balancer pool decodes with default decimals"));
            }
            let mut data = Vec::with_capacity(64);
            data.extend_from_slice(&word_bytes(encode_unsigned(ain))?);
            data.extend_from_slice(&word_bytes(encode_unsigned(aout))?);
            Ok(RawLog {
                emitter: vault,
                topics: vec![
                    topics.balancer,
                    balancer_pool_id(&s.pool),
                    s.token_in.to_word(),
                    s.token_out.to_word(),
                ],
                data,
                log_index: s.log_index,
            })
        }
        protocol => {
            let meta = meta.ok_or(unencodable("pair pool needs metadata"))?;
            if meta.pool != s.pool {
                return Err(unencodable("metadata belongs to another pool"));
            }
            let recipient = s.recipient.ok_or(unencodable("pair swap needs a recipient"))?;
            let in_idx = if s.token_in == meta.token0() { 0 } else { 1 };
            let mut data = Vec::with_capacity(160);
            let topic = if protocol == Protocol::UniV2 {
                let mut amounts = [BigInt::zero(), BigInt::zero(), BigInt::zero(), BigInt::zero()];
                amounts[in_idx] = ain.clone();
                amounts[2 + (1 - in_idx)] = aout.clone();
                for a in &amounts {
                    data.extend_from_slice(&word_bytes(encode_unsigned(a))?);
                }
                topics.pair_v2
            } else {
                if ain.bits() > 255 || aout.bits() > 255 {
                    return Err(unencodable("amount does not fit int256"));
                }
                let mut signed = [BigInt::zero(), BigInt::zero()];
                signed[in_idx] = ain.clone();
                signed[1 - in_idx] = -aout.clone();
                for a in &signed {
                    data.extend_from_slice(&word_bytes(encode_int(a))?);
                }
                // sqrtPrice/price = 2^96, liquidity = 1, tick = 0
                let mut price = [0u8; 32];
                price[19] = 1;
                data.extend_from_slice(&price);
                let mut liquidity = [0u8; 32];
                liquidity[31] = 1;
                data.extend_from_slice(&liquidity);
                data.extend_from_slice(&[0u8; 32]);
                topics.concentrated
            };
            Ok(RawLog {
                emitter: s.pool,
                topics: vec![topic, recipient.to_word(), recipient.to_word()],
                data,
                log_index: s.log_index,
            })
        }
    }
}
