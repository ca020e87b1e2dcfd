//! Chain records and identifiers shared by every stage of the pipeline.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::amount::TokenAmount;

/// Errors produced when parsing hex identifiers.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HexError {
    #[error("missing 0x prefix")]
    MissingPrefix,
    #[error("expected {expected} hex digits, found {found}")]
    Length { expected: usize, found: usize },
    #[error("invalid hex digit {0:?}")]
    Digit(char),
}

fn nibble(c: u8) -> Result<u8, HexError> {
    match c {
        b'0'..=b'9' => Ok(c - b'0'),
        b'a'..=b'f' => Ok(c - b'a' + 10),
        b'A'..=b'F' => Ok(c - b'A' + 10),
        _ => Err(HexError::Digit(c as char)),
    }
}

/// Decodes `0x`-prefixed hex into bytes. An odd digit count is rejected.
pub fn decode_hex(s: &str) -> Result<Vec<u8>, HexError> {
    let digits = s.strip_prefix("0x").ok_or(HexError::MissingPrefix)?;
    let raw = digits.as_bytes();
    if raw.len() % 2 != 0 {
        return Err(HexError::Length {
            expected: raw.len() + 1,
            found: raw.len(),
        });
    }
    raw.chunks(2)
        .map(|pair| Ok((nibble(pair[0])? << 4) | nibble(pair[1])?))
        .collect()
}

/// Lowercase `0x`-prefixed hex rendering.
pub fn encode_hex(bytes: &[u8]) -> String {
    const DIGITS: &[u8; 16] = b"0123456789abcdef";
    let mut out = String::with_capacity(2 + bytes.len() * 2);
    out.push_str("0x");
    for b in bytes {
        out.push(DIGITS[(b >> 4) as usize] as char);
        out.push(DIGITS[(b & 0xf) as usize] as char);
    }
    out
}

fn parse_fixed<const N: usize>(s: &str) -> Result<[u8; N], HexError> {
    let digits = s.strip_prefix("0x").ok_or(HexError::MissingPrefix)?;
    if digits.len() != N * 2 {
        return Err(HexError::Length {
            expected: N * 2,
            found: digits.len(),
        });
    }
    let bytes = decode_hex(s)?;
    let mut out = [0u8; N];
    out.copy_from_slice(&bytes);
    Ok(out)
}

macro_rules! fixed_bytes {
    ($(#[$meta:meta])* $name:ident, $len:expr) => {
        $(#[$meta])*
        #[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
        pub struct $name(pub [u8; $len]);

        impl $name {
            pub const LEN: usize = $len;
            pub const ZERO: Self = Self([0u8; $len]);

            pub fn as_bytes(&self) -> &[u8; $len] {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&encode_hex(&self.0))
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                fmt::Display::fmt(self, f)
            }
        }

        impl FromStr for $name {
            type Err = HexError;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                parse_fixed::<$len>(s).map(Self)
            }
        }

        impl From<[u8; $len]> for $name {
            fn from(b: [u8; $len]) -> Self {
                Self(b)
            }
        }

        #[cfg(feature = "serde")]
        impl serde::Serialize for $name {
            fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(&encode_hex(&self.0))
            }
        }

        #[cfg(feature = "serde")]
        impl<'de> serde::Deserialize<'de> for $name {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = <alloc::borrow::Cow<'de, str> as serde::Deserialize>::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

fixed_bytes!(
    /// 20-byte account or contract identifier.
    Address,
    20
);
fixed_bytes!(
    /// 32-byte word: transaction hashes, log topics, Balancer pool ids.
    H256,
    32
);

impl Address {
    /// Left-pads the address into an ABI word.
    pub fn to_word(&self) -> H256 {
        let mut w = [0u8; 32];
        w[12..].copy_from_slice(&self.0);
        H256(w)
    }

    /// Takes the low 20 bytes of an ABI word.
    pub fn from_word(word: &H256) -> Self {
        let mut a = [0u8; 20];
        a.copy_from_slice(&word.0[12..]);
        Address(a)
    }
}

pub type TxHash = H256;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawLog {
    pub emitter: Address,
    pub topics: Vec<H256>,
    pub data: Vec<u8>,
    pub log_index: u64,
}

impl RawLog {
    pub fn topic0(&self) -> Option<&H256> {
        self.topics.first()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum TxStatus {
    Success,
    Failure,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawTransaction {
    pub hash: TxHash,
    pub index: u64,
    pub from: Address,
    pub to: Option<Address>,
    /// Native value carried by the top-level call (18 decimals).
    pub value: TokenAmount,
    pub gas_used: u64,
    /// Effective gas price in wei.
    pub effective_gas_price: u128,
    pub status: TxStatus,
    pub logs: Vec<RawLog>,
}

impl RawTransaction {
    pub fn succeeded(&self) -> bool {
        self.status == TxStatus::Success
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawBlock {
    pub number: u64,
    pub timestamp: u64,
    pub coinbase: Address,
    pub transactions: Vec<RawTransaction>,
}

/// Structural problems in a chain record.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RecordError {
    #[error("log has {0} topics (max 4)")]
    TooManyTopics(usize),
    #[error("logs of transaction {tx} are not strictly ordered by log_index")]
    LogOrder { tx: TxHash },
    #[error("transactions of block {block} are not strictly ordered by index")]
    TxOrder { block: u64 },
    #[error("native value of transaction {tx} is negative")]
    NegativeValue { tx: TxHash },
}

impl RawBlock {
    /// Checks the ordering and shape invariants of a block and its receipts.
    pub fn validate(&self) -> Result<(), RecordError> {
        if self
            .transactions
            .windows(2)
            .any(|w| w[0].index >= w[1].index)
        {
            return Err(RecordError::TxOrder { block: self.number });
        }
        for tx in &self.transactions {
            if tx.value.is_negative() {
                return Err(RecordError::NegativeValue { tx: tx.hash });
            }
            if tx.logs.windows(2).any(|w| w[0].log_index >= w[1].log_index) {
                return Err(RecordError::LogOrder { tx: tx.hash });
            }
            if let Some(log) = tx.logs.iter().find(|l| l.topics.len() > 4) {
                return Err(RecordError::TooManyTopics(log.topics.len()));
            }
        }
        Ok(())
    }
}
