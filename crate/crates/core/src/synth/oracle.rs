//! Brute-force reference classifier.
//!
//! Works directly on raw logs with its own word slicing and its own flow
//! convention (per-token `out − in` for pairs, negated pool deltas for
//! concentrated pools), tallies into a plain table and checks the three
//! inequalities. It shares no code with the decode or classify modules.

use alloc::collections::{BTreeMap, BTreeSet};

use num_bigint::{BigInt, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use tiny_keccak::{Hasher, Keccak};

use crate::classify::Strategy;
use crate::decode::{PoolMeta, Protocol};
use crate::price::PriceTable;
use crate::types::{Address, RawTransaction, TxStatus};

type Addr = [u8; 20];

fn topic(sig: &str) -> [u8; 32] {
    let mut k = Keccak::v256();
    k.update(sig.as_bytes());
    let mut out = [0u8; 32];
    k.finalize(&mut out);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Family {
    Pair,
    Concentrated,
}

/// Everything the oracle knows about the world, in plain tables.
#[derive(Debug, Clone)]
pub struct OracleWorld {
    pools: BTreeMap<Addr, (Family, Addr, Addr)>,
    prices: BTreeMap<Addr, (BigRational, u32)>,
    native_price: BigRational,
    fastlane: BTreeSet<Addr>,
    bid_topic: [u8; 32],
    bid_word: usize,
    v2_topic: [u8; 32],
    v3_topic: [u8; 32],
    vault_topic: [u8; 32],
}

impl OracleWorld {
    pub fn new<'a>(
        pools: impl IntoIterator<Item = &'a PoolMeta>,
        prices: &PriceTable,
        fastlane: impl IntoIterator<Item = Address>,
        bid_signature: &str,
        bid_word: usize,
    ) -> Self {
        let pools = pools
            .into_iter()
            .filter_map(|m| {
                let family = match m.protocol {
                    Protocol::UniV2 => Family::Pair,
                    Protocol::UniV3 | Protocol::Algebra => Family::Concentrated,
                    Protocol::BalancerV2 => return None,
                };
                Some((m.pool.0, (family, m.tokens[0].0, m.tokens[1].0)))
            })
            .collect();
        Self {
            pools,
            prices: prices
                .iter()
                .map(|(a, p)| (a.0, (p.price.clone(), p.decimals as u32)))
                .collect(),
            native_price: prices.native_price().unwrap_or_else(BigRational::one),
            fastlane: fastlane.into_iter().map(|a| a.0).collect(),
            bid_topic: topic(bid_signature),
            bid_word,
            v2_topic: topic("Swap(address,uint256,uint256,uint256,uint256,address)"),
            v3_topic: topic("Swap(address,address,int256,int256,uint160,uint128,int24)"),
            vault_topic: topic("Swap(bytes32,address,address,uint256,uint256)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleLabel {
    pub is_aa: bool,
    pub strategy: Strategy,
    pub profit: BigRational,
    pub swap_count: usize,
}

fn uint_at(data: &[u8], i: usize) -> BigInt {
    BigInt::from_bytes_be(Sign::Plus, &data[i * 32..i * 32 + 32])
}

fn int_at(data: &[u8], i: usize) -> BigInt {
    BigInt::from_signed_bytes_be(&data[i * 32..i * 32 + 32])
}

fn low20(word: &[u8; 32]) -> Addr {
    let mut a = [0u8; 20];
    a.copy_from_slice(&word[12..]);
    a
}

fn wei_to_common(wei: BigInt, native_price: &BigRational) -> BigRational {
    let mut scale = BigInt::one();
    for _ in 0..18 {
        scale *= 10;
    }
    BigRational::new(wei, scale) * native_price
}

pub fn oracle_classify(tx: &RawTransaction, world: &OracleWorld) -> OracleLabel {
    let ok = tx.status == TxStatus::Success;
    let mut table: BTreeMap<Addr, BigInt> = BTreeMap::new();
    let mut n = 0usize;

    if ok {
        for log in &tx.logs {
            let Some(t0) = log.topics.first() else { continue };
            let t0 = t0.0;
            let flows: Option<[(Addr, BigInt); 2]> = if t0 == world.v2_topic {
                match world.pools.get(&log.emitter.0) {
                    Some(&(Family::Pair, tok0, tok1)) if log.topics.len() == 3 && log.data.len() == 128 => {
                        let (i0, i1, o0, o1) = (
                            uint_at(&log.data, 0),
                            uint_at(&log.data, 1),
                            uint_at(&log.data, 2),
                            uint_at(&log.data, 3),
                        );
                        let ins = i0.is_positive() as u8 + i1.is_positive() as u8;
                        let outs = o0.is_positive() as u8 + o1.is_positive() as u8;
                        let same_side = (i0.is_positive() && o0.is_positive()) || (i1.is_positive() && o1.is_positive());
                        if ins + outs == 0 || ins > 1 || outs > 1 || same_side {
                            None
                        } else {
                            Some([(tok0, o0 - i0), (tok1, o1 - i1)])
                        }
                    }
                    _ => None,
                }
            } else if t0 == world.v3_topic {
                match world.pools.get(&log.emitter.0) {
                    Some(&(Family::Concentrated, tok0, tok1)) if log.topics.len() == 3 && log.data.len() == 160 => {
                        let (a0, a1) = (int_at(&log.data, 0), int_at(&log.data, 1));
                        let both_zero = a0.is_zero() && a1.is_zero();
                        let same_sign = (a0.is_positive() && a1.is_positive()) || (a0.is_negative() && a1.is_negative());
                        if both_zero || same_sign {
                            None
                        } else {
                            Some([(tok0, -a0), (tok1, -a1)])
                        }
                    }
                    _ => None,
                }
            } else if t0 == world.vault_topic && log.topics.len() == 4 && log.data.len() == 64 {
                let tin = low20(&log.topics[2].0);
                let tout = low20(&log.topics[3].0);
                let (ain, aout) = (uint_at(&log.data, 0), uint_at(&log.data, 1));
                let mut pool = [0u8; 20];
                pool.copy_from_slice(&log.topics[1].0[..20]);
                let registered_elsewhere = world.pools.contains_key(&pool);
                if tin == tout || (ain.is_zero() && aout.is_zero()) || registered_elsewhere {
                    None
                } else {
                    Some([(tin, -ain), (tout, aout)])
                }
            } else {
                continue;
            };
            if let Some(flows) = flows {
                n += 1;
                for (token, amount) in flows {
                    *table.entry(token).or_default() += amount;
                }
            }
        }
    }

    let mut gross = BigRational::zero();
    for (token, amount) in &table {
        if let Some((price, decimals)) = world.prices.get(token) {
            let mut scale = BigInt::one();
            for _ in 0..*decimals {
                scale *= 10;
            }
            gross += BigRational::new(amount.clone(), scale) * price;
        }
    }
    let fee = wei_to_common(BigInt::from(tx.gas_used) * BigInt::from(tx.effective_gas_price), &world.native_price);

    let to_fastlane = tx.to.is_some_and(|to| world.fastlane.contains(&to.0));
    let mut bid = BigInt::zero();
    if ok {
        let mut logged = BigInt::zero();
        for log in &tx.logs {
            let from_fl = world.fastlane.contains(&log.emitter.0);
            let is_bid = log.topics.first().map(|t| t.0) == Some(world.bid_topic);
            if from_fl && is_bid && log.data.len() >= (world.bid_word + 1) * 32 {
                logged += uint_at(&log.data, world.bid_word);
            }
        }
        let direct = if to_fastlane { tx.value.raw.clone() } else { BigInt::zero() };
        bid = if logged > direct { logged } else { direct };
    }
    let bid = wei_to_common(bid, &world.native_price);
    let profit = gross - fee - bid;

    let fastlane = to_fastlane || tx.logs.iter().any(|l| world.fastlane.contains(&l.emitter.0));
    let is_aa = n >= 2 && table.values().all(|v| !v.is_negative()) && profit.is_positive();
    let strategy = if !is_aa {
        Strategy::NotAA
    } else if fastlane {
        Strategy::FastLaneBased
    } else {
        Strategy::SpamBased
    };
    OracleLabel {
        is_aa,
        strategy,
        profit,
        swap_count: n,
    }
}
