//! JSON encodings of chain records.
//!
//! Quantities are `0x`-prefixed minimal hex and byte strings are `0x`-prefixed
//! lowercase hex, exactly as an Ethereum JSON-RPC node returns them, so a
//! fixture line and an RPC response describe a block the same way.

use atomarb_core::types::{decode_hex, encode_hex, Address, RawBlock, RawLog, RawTransaction, TxStatus, H256};
use atomarb_core::TokenAmount;
use num_bigint::BigInt;
use num_traits::Num;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum QuantityError {
    #[error("quantity {0:?} lacks the 0x prefix")]
    Prefix(String),
    #[error("quantity {0:?} is not hex")]
    Digits(String),
    #[error("quantity {0:?} overflows {1} bits")]
    Overflow(String, u32),
}

pub fn encode_quantity(v: u128) -> String {
    format!("{v:#x}")
}

pub fn encode_big_quantity(v: &BigInt) -> String {
    format!("0x{}", v.to_str_radix(16))
}

fn digits(s: &str) -> Result<&str, QuantityError> {
    let d = s
        .strip_prefix("0x")
        .or_else(|| s.strip_prefix("0X"))
        .ok_or_else(|| QuantityError::Prefix(s.into()))?;
    if d.is_empty() || !d.bytes().all(|b| b.is_ascii_hexdigit()) {
        return Err(QuantityError::Digits(s.into()));
    }
    Ok(d)
}

pub fn parse_quantity(s: &str) -> Result<u128, QuantityError> {
    let d = digits(s)?;
    u128::from_str_radix(d, 16).map_err(|_| QuantityError::Overflow(s.into(), 128))
}

pub fn parse_u64_quantity(s: &str) -> Result<u64, QuantityError> {
    u64::try_from(parse_quantity(s)?).map_err(|_| QuantityError::Overflow(s.into(), 64))
}

pub fn parse_big_quantity(s: &str) -> Result<BigInt, QuantityError> {
    let d = digits(s)?;
    let v = BigInt::from_str_radix(d, 16).map_err(|_| QuantityError::Digits(s.into()))?;
    if v.bits() > 256 {
        return Err(QuantityError::Overflow(s.into(), 256));
    }
    Ok(v)
}

macro_rules! quantity_serde {
    ($name:ident, $ty:ty, $enc:expr, $dec:expr) => {
        pub mod $name {
            use super::*;

            pub fn serialize<S: Serializer>(v: &$ty, s: S) -> Result<S::Ok, S::Error> {
                #[allow(clippy::redundant_closure_call)]
                s.serialize_str(&($enc)(v))
            }

            pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<$ty, D::Error> {
                let s = String::deserialize(d)?;
                #[allow(clippy::redundant_closure_call)]
                ($dec)(&s).map_err(serde::de::Error::custom)
            }
        }
    };
}

quantity_serde!(q64, u64, |v: &u64| encode_quantity(*v as u128), parse_u64_quantity);
quantity_serde!(q128, u128, |v: &u128| encode_quantity(*v), parse_quantity);
quantity_serde!(qbig, BigInt, encode_big_quantity, parse_big_quantity);
quantity_serde!(bytes, Vec<u8>, |v: &Vec<u8>| encode_hex(v), |s: &str| decode_hex(s));

pub mod opt_q128 {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Option<u128>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(v) => s.serialize_str(&encode_quantity(*v)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<u128>, D::Error> {
        Option::<String>::deserialize(d)?
            .map(|s| parse_quantity(&s).map_err(serde::de::Error::custom))
            .transpose()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WireLog {
    pub address: Address,
    pub topics: Vec<H256>,
    #[serde(with = "bytes")]
    pub data: Vec<u8>,
    #[serde(with = "q64")]
    pub log_index: u64,
}

impl From<&RawLog> for WireLog {
    fn from(l: &RawLog) -> Self {
        Self {
            address: l.emitter,
            topics: l.topics.clone(),
            data: l.data.clone(),
            log_index: l.log_index,
        }
    }
}

impl From<WireLog> for RawLog {
    fn from(l: WireLog) -> Self {
        Self {
            emitter: l.address,
            topics: l.topics,
            data: l.data,
            log_index: l.log_index,
        }
    }
}

fn encode_status(s: &TxStatus) -> String {
    match s {
        TxStatus::Success => "0x1".into(),
        TxStatus::Failure => "0x0".into(),
    }
}

fn parse_status(s: &str) -> Result<TxStatus, QuantityError> {
    match parse_quantity(s)? {
        1 => Ok(TxStatus::Success),
        0 => Ok(TxStatus::Failure),
        _ => Err(QuantityError::Digits(s.into())),
    }
}

quantity_serde!(status, TxStatus, encode_status, parse_status);

/// A transaction merged with its receipt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct WireTransaction {
    pub hash: H256,
    #[serde(with = "q64")]
    pub transaction_index: u64,
    pub from: Address,
    pub to: Option<Address>,
    #[serde(with = "qbig")]
    pub value: BigInt,
    #[serde(with = "q64")]
    pub gas_used: u64,
    #[serde(with = "q128")]
    pub effective_gas_price: u128,
    #[serde(with = "status")]
    pub status: TxStatus,
    pub logs: Vec<WireLog>,
}

/// One fixture line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct WireBlock {
    #[serde(with = "q64")]
    pub number: u64,
    #[serde(with = "q64")]
    pub timestamp: u64,
    pub miner: Address,
    pub transactions: Vec<WireTransaction>,
}

impl From<&RawBlock> for WireBlock {
    fn from(b: &RawBlock) -> Self {
        Self {
            number: b.number,
            timestamp: b.timestamp,
            miner: b.coinbase,
            transactions: b
                .transactions
                .iter()
                .map(|t| WireTransaction {
                    hash: t.hash,
                    transaction_index: t.index,
                    from: t.from,
                    to: t.to,
                    value: t.value.raw.clone(),
                    gas_used: t.gas_used,
                    effective_gas_price: t.effective_gas_price,
                    status: t.status,
                    logs: t.logs.iter().map(WireLog::from).collect(),
                })
                .collect(),
        }
    }
}

impl From<WireBlock> for RawBlock {
    fn from(b: WireBlock) -> Self {
        Self {
            number: b.number,
            timestamp: b.timestamp,
            coinbase: b.miner,
            transactions: b
                .transactions
                .into_iter()
                .map(|t| RawTransaction {
                    hash: t.hash,
                    index: t.transaction_index,
                    from: t.from,
                    to: t.to,
                    value: TokenAmount::native(t.value),
                    gas_used: t.gas_used,
                    effective_gas_price: t.effective_gas_price,
                    status: t.status,
                    logs: t.logs.into_iter().map(RawLog::from).collect(),
                })
                .collect(),
        }
    }
}

/// Serializes a block as one JSON line (no trailing newline).
pub fn block_to_line(b: &RawBlock) -> String {
    serde_json::to_string(&WireBlock::from(b)).expect("wire types always serialize")
}

pub fn block_from_line(line: &str) -> Result<RawBlock, serde_json::Error> {
    serde_json::from_str::<WireBlock>(line).map(RawBlock::from)
}
