//! Hand-built reference transactions with known verdicts.
//!
//! `plain_arbitrage` is a two-leg BUSD/WMATIC cycle across a V3 and a V2
//! pool netting 0.3121 WMATIC. `fastlane_arbitrage` is a three-leg
//! WMATIC → WETH → WBTC → WMATIC cycle routed through a FastLane relay that
//! nets 2,801 WMATIC. Token addresses are the Polygon mainnet ones; pool,
//! relay and account addresses are placeholders.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_rational::BigRational;

use crate::abi::{encode_unsigned, event_topic};
use crate::amount::{pow10, TokenAmount};
use crate::classify::ClassifierConfig;
use crate::decode::{PoolMeta, Protocol, SwapEvent};
use crate::price::PriceTable;
use crate::synth::{encode_swap, BALANCER_VAULT};
use crate::types::{Address, RawBlock, RawLog, RawTransaction, TxStatus, H256};

const fn hex_address(s: &str) -> Address {
    let b = s.as_bytes();
    assert!(b.len() == 42 && b[0] == b'0' && b[1] == b'x');
    let mut out = [0u8; 20];
    let mut i = 0;
    while i < 20 {
        out[i] = nibble(b[2 + 2 * i]) << 4 | nibble(b[3 + 2 * i]);
        i += 1;
    }
    Address(out)
}

const fn nibble(c: u8) -> u8 {
    match c {
        b'0'..=b'9' => c - b'0',
        b'a'..=b'f' => c - b'a' + 10,
        b'A'..=b'F' => c - b'A' + 10,
        _ => panic!("not a hex digit"),
    }
}

pub const WMATIC: Address = hex_address("0x0d500B1d8E8eF31E21C99d1Db9A6444d3ADf1270");
pub const WETH: Address = hex_address("0x7ceB23fD6bC0adD59E62ac25578270cFf1b9f619");
pub const WBTC: Address = hex_address("0x1BFD67037B42Cf73acF2047067bd4F2C47D9BfD6");
pub const BUSD: Address = hex_address("0xdAb529f40E671A1D4bF91361c21bf9f0C9712ab7");

pub const SEARCHER: Address = Address([0x5e; 20]);
pub const BOT: Address = Address([0xb0; 20]);
pub const FASTLANE_RELAY: Address = Address([0xfa; 20]);
pub const VALIDATOR: Address = Address([0xc0; 20]);

pub const POOL_V3_BUSD_WMATIC: Address = Address([0x31; 20]);
pub const POOL_V2_BUSD_WMATIC: Address = Address([0x21; 20]);
pub const POOL_V2_WMATIC_WETH: Address = Address([0x22; 20]);
pub const POOL_ALGEBRA_WETH_WBTC: Address = Address([0x41; 20]);
pub const POOL_BALANCER_WBTC_WMATIC: Address = Address([0x51; 20]);

/// A self-contained fixture: one block, the pools it touches, and the
/// classifier configuration it is meant to be judged under.
#[derive(Debug, Clone)]
pub struct Golden {
    pub block: RawBlock,
    pub pools: BTreeMap<Address, PoolMeta>,
    pub config: ClassifierConfig,
}

impl Golden {
    pub fn tx(&self) -> &RawTransaction {
        &self.block.transactions[0]
    }
}

/// `whole` (a decimal literal) in raw units of `decimals`.
fn raw(whole: &str, decimals: u8) -> BigInt {
    TokenAmount::parse(whole, decimals).expect("literal amount").raw
}

fn pair(pool: Address, protocol: Protocol, a: (Address, u8), b: (Address, u8)) -> PoolMeta {
    let (t0, t1) = if a.0 < b.0 { (a, b) } else { (b, a) };
    PoolMeta::pair(pool, protocol, t0, t1).expect("distinct tokens")
}

fn leg(meta: &PoolMeta, token_in: Address, amount_in: &str, token_out: Address, amount_out: &str) -> SwapEvent {
    let d_in = meta.decimals_of(&token_in).expect("token in pool");
    let d_out = meta.decimals_of(&token_out).expect("token in pool");
    SwapEvent {
        pool: meta.pool,
        protocol: meta.protocol,
        token_in,
        token_out,
        amount_in: TokenAmount::new(raw(amount_in, d_in), d_in),
        amount_out: TokenAmount::new(raw(amount_out, d_out), d_out),
        recipient: (meta.protocol != Protocol::BalancerV2).then_some(BOT),
        log_index: 0,
        tx_hash: H256::ZERO,
    }
}

fn logs(legs: &[(SwapEvent, &PoolMeta)]) -> Vec<RawLog> {
    legs.iter()
        .map(|(s, m)| encode_swap(s, Some(m), BALANCER_VAULT).expect("golden legs encode"))
        .collect()
}

fn index_logs(tx: &mut RawTransaction) {
    for (i, log) in tx.logs.iter_mut().enumerate() {
        log.log_index = i as u64;
    }
}

fn prices() -> PriceTable {
    PriceTable::native(WMATIC, 18)
        .with(BUSD, BigRational::new(5.into(), 4.into()), 18)
        .and_then(|p| p.with(WETH, BigRational::from_integer(3_400.into()), 18))
        .and_then(|p| p.with(WBTC, BigRational::from_integer(69_000.into()), 8))
        .expect("positive prices")
}

/// τ of the plain arbitrage: 182,394 gas at 118 gwei.
pub const PLAIN_GAS_USED: u64 = 182_394;
pub const PLAIN_GAS_PRICE: u128 = 118_000_000_000;

/// The V3 and V2 BUSD/WMATIC pools used by the plain arbitrage.
pub fn busd_wmatic_pools() -> (PoolMeta, PoolMeta) {
    (
        pair(POOL_V3_BUSD_WMATIC, Protocol::UniV3, (BUSD, 18), (WMATIC, 18)),
        pair(POOL_V2_BUSD_WMATIC, Protocol::UniV2, (BUSD, 18), (WMATIC, 18)),
    )
}

/// A leg on `meta` with decimal-literal amounts and the bot as recipient.
pub fn golden_leg(meta: &PoolMeta, token_in: Address, amount_in: &str, token_out: Address, amount_out: &str) -> SwapEvent {
    leg(meta, token_in, amount_in, token_out, amount_out)
}

/// A one-transaction spam-style block (searcher calls its own bot) with the
/// given legs and gas, priced and configured like the plain arbitrage.
pub fn spam_transaction(legs: &[(SwapEvent, PoolMeta)], gas_used: u64, gas_price: u128) -> Golden {
    let refs: Vec<(SwapEvent, &PoolMeta)> = legs.iter().map(|(s, m)| (s.clone(), m)).collect();
    let mut tx = RawTransaction {
        hash: H256([0xc6; 32]),
        index: 0,
        from: SEARCHER,
        to: Some(BOT),
        value: TokenAmount::native(0),
        gas_used,
        effective_gas_price: gas_price,
        status: TxStatus::Success,
        logs: logs(&refs),
    };
    index_logs(&mut tx);
    let pools = legs.iter().map(|(_, m)| (m.pool, m.clone())).collect();
    Golden {
        block: RawBlock {
            number: 58_329_504,
            timestamp: 1_723_000_000,
            coinbase: VALIDATOR,
            transactions: vec![tx],
        },
        pools,
        config: ClassifierConfig::new(prices()).with_fastlane([FASTLANE_RELAY]),
    }
}

/// BUSD → WMATIC on V3 (3.9383 in, 5.3139 out), then WMATIC → BUSD on V2
/// (5.0018 in, 3.9383 out). Δ(WMATIC) = +0.3121, Δ(BUSD) = 0.
pub fn plain_arbitrage() -> Golden {
    let (v3, v2) = busd_wmatic_pools();
    let buy = leg(&v3, BUSD, "3.9383", WMATIC, "5.3139");
    let sell = leg(&v2, WMATIC, "5.0018", BUSD, "3.9383");
    spam_transaction(&[(buy, v3), (sell, v2)], PLAIN_GAS_USED, PLAIN_GAS_PRICE)
}

/// Bid paid to the relay in the FastLane fixture: 150 MATIC.
pub fn fastlane_bid_wei() -> BigInt {
    BigInt::from(150) * pow10(18)
}

pub const FASTLANE_GAS_USED: u64 = 612_000;
pub const FASTLANE_GAS_PRICE: u128 = 250_000_000_000;

/// WMATIC → WETH (39,956.3 → 11.8) on a V2 pool, WETH → WBTC (11.8 → 0.62)
/// on an Algebra pool, WBTC → WMATIC (0.62 → 42,757.3) through the Balancer
/// Vault. Sent to the relay with the bid as call value; the relay also logs
/// the bid.
pub fn fastlane_arbitrage() -> Golden {
    let v2 = pair(POOL_V2_WMATIC_WETH, Protocol::UniV2, (WMATIC, 18), (WETH, 18));
    let algebra = pair(POOL_ALGEBRA_WETH_WBTC, Protocol::Algebra, (WETH, 18), (WBTC, 8));
    let balancer = PoolMeta {
        pool: POOL_BALANCER_WBTC_WMATIC,
        protocol: Protocol::BalancerV2,
        tokens: vec![WBTC, WMATIC],
        decimals: vec![8, 18],
    };
    let l1 = leg(&v2, WMATIC, "39956.3", WETH, "11.8");
    let l2 = leg(&algebra, WETH, "11.8", WBTC, "0.62");
    let l3 = leg(&balancer, WBTC, "0.62", WMATIC, "42757.3");
    let bid = fastlane_bid_wei();

    let mut bid_data = encode_unsigned(&bid).expect("fits").0.to_vec();
    bid_data.extend_from_slice(&BOT.to_word().0);
    let bid_log = RawLog {
        emitter: FASTLANE_RELAY,
        topics: vec![
            event_topic(crate::classify::FASTLANE_BID_SIGNATURE),
            SEARCHER.to_word(),
            H256([0x0e; 32]),
            VALIDATOR.to_word(),
        ],
        data: bid_data,
        log_index: 0,
    };
    let mut all = logs(&[(l1, &v2), (l2, &algebra), (l3, &balancer)]);
    all.push(bid_log);
    let mut tx = RawTransaction {
        hash: H256([0x3f; 32]),
        index: 0,
        from: SEARCHER,
        to: Some(FASTLANE_RELAY),
        value: TokenAmount::native(bid),
        gas_used: FASTLANE_GAS_USED,
        effective_gas_price: FASTLANE_GAS_PRICE,
        status: TxStatus::Success,
        logs: all,
    };
    index_logs(&mut tx);
    let pools = [v2, algebra, balancer].into_iter().map(|m| (m.pool, m)).collect();
    Golden {
        block: RawBlock {
            number: 51_200_000,
            timestamp: 1_703_000_000,
            coinbase: VALIDATOR,
            transactions: vec![tx],
        },
        pools,
        config: ClassifierConfig::new(prices()).with_fastlane([FASTLANE_RELAY]),
    }
}
