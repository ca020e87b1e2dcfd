//! Minimal ABI word codec and keccak-256 topic hashing.

use alloc::vec::Vec;

use num_bigint::{BigInt, BigUint, Sign};
use num_traits::Signed;
use tiny_keccak::{Hasher, Keccak};

use crate::types::{Address, H256};

pub const WORD: usize = 32;

pub fn keccak256(data: &[u8]) -> [u8; 32] {
    let mut k = Keccak::v256();
    k.update(data);
    let mut out = [0u8; 32];
    k.finalize(&mut out);
    out
}

/// topic0 of an event with the given canonical signature.
pub fn event_topic(signature: &str) -> H256 {
    H256(keccak256(signature.as_bytes()))
}

/// 4-byte function selector.
pub fn selector(signature: &str) -> [u8; 4] {
    let h = keccak256(signature.as_bytes());
    [h[0], h[1], h[2], h[3]]
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WordError {
    #[error("value does not fit in {bits} bits")]
    Overflow { bits: u32 },
    #[error("negative value for unsigned word")]
    Negative,
    #[error("data holds {found} bytes, need at least {needed}")]
    Short { needed: usize, found: usize },
}

/// The `i`-th 32-byte word of `data`.
pub fn word_at(data: &[u8], i: usize) -> Result<H256, WordError> {
    let end = (i + 1) * WORD;
    if data.len() < end {
        return Err(WordError::Short {
            needed: end,
            found: data.len(),
        });
    }
    let mut w = [0u8; 32];
    w.copy_from_slice(&data[i * WORD..end]);
    Ok(H256(w))
}

pub fn decode_uint(word: &H256) -> BigUint {
    BigUint::from_bytes_be(&word.0)
}

/// Two's-complement int256.
pub fn decode_int(word: &H256) -> BigInt {
    BigInt::from_signed_bytes_be(&word.0)
}

pub fn encode_uint(value: &BigUint) -> Result<H256, WordError> {
    let bytes = value.to_bytes_be();
    if bytes.len() > WORD {
        return Err(WordError::Overflow { bits: 256 });
    }
    let mut w = [0u8; 32];
    w[WORD - bytes.len()..].copy_from_slice(&bytes);
    Ok(H256(w))
}

pub fn encode_unsigned(value: &BigInt) -> Result<H256, WordError> {
    match value.to_biguint() {
        Some(u) => encode_uint(&u),
        None => Err(WordError::Negative),
    }
}

pub fn encode_int(value: &BigInt) -> Result<H256, WordError> {
    let bytes = value.to_signed_bytes_be();
    if bytes.len() > WORD {
        return Err(WordError::Overflow { bits: 256 });
    }
    let fill = if value.is_negative() { 0xff } else { 0x00 };
    let mut w = [fill; 32];
    w[WORD - bytes.len()..].copy_from_slice(&bytes);
    Ok(H256(w))
}

/// Checks that `value` fits an unsigned integer of `bits` width.
pub fn fits_unsigned(value: &BigInt, bits: u64) -> bool {
    value.sign() != Sign::Minus && value.bits() <= bits
}

/// Calldata for a call with the given selector and static word arguments.
pub fn calldata(sel: [u8; 4], args: &[H256]) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + args.len() * WORD);
    out.extend_from_slice(&sel);
    for a in args {
        out.extend_from_slice(&a.0);
    }
    out
}

/// Decodes an `address` return value.
pub fn decode_address_return(data: &[u8]) -> Result<Address, WordError> {
    Ok(Address::from_word(&word_at(data, 0)?))
}

/// Reads a dynamic `address[]` whose head offset sits at word `slot`.
pub fn decode_address_array(data: &[u8], slot: usize) -> Result<Vec<Address>, WordError> {
    let too_big = WordError::Overflow { bits: 64 };
    let offset = usize::try_from(decode_uint(&word_at(data, slot)?)).map_err(|_| too_big.clone())?;
    if offset % WORD != 0 {
        return Err(too_big);
    }
    let base = offset / WORD;
    let len = usize::try_from(decode_uint(&word_at(data, base)?)).map_err(|_| too_big)?;
    (0..len)
        .map(|i| word_at(data, base + 1 + i).map(|w| Address::from_word(&w)))
        .collect()
}
