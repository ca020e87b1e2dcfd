use atomarb_core::amount::{pow10, TokenAmount};
use atomarb_core::classify::{evaluate, BlockInfo, ClassifierConfig, Strategy as Kind, UnpricedTokenPolicy};
use atomarb_core::decode::{Protocol, SwapEvent};
use atomarb_core::price::PriceTable;
use atomarb_core::types::{Address, RawTransaction, TxStatus, H256};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use proptest::prelude::*;
use std::collections::BTreeMap;

const TOKENS: u8 = 5;
const RELAY: Address = Address([0xfa; 20]);
const BLOCK: BlockInfo = BlockInfo { number: 7, timestamp: 1_000, coinbase: Address([0xcb; 20]) };

fn token(i: u8) -> Address {
    Address([i + 1; 20])
}

fn amount() -> impl Strategy<Value = BigInt> {
    (0u32..=24, 1u64..=999_999).prop_map(|(e, m)| BigInt::from(m) * pow10(e) / BigInt::from(1000) + 1)
}

fn swap() -> impl Strategy<Value = SwapEvent> {
    (0..TOKENS, 1..TOKENS, amount(), amount()).prop_map(|(a, off, ain, aout)| SwapEvent {
        pool: Address([0x90 + a; 20]),
        protocol: Protocol::UniV2,
        token_in: token(a),
        token_out: token((a + off) % TOKENS),
        amount_in: TokenAmount::new(ain, 18),
        amount_out: TokenAmount::new(aout, 18),
        recipient: Some(Address([0xb0; 20])),
        log_index: 0,
        tx_hash: H256::ZERO,
    })
}

/// Prices for tokens 0..4 in thousandths; token 4 is left unpriced.
fn prices() -> impl Strategy<Value = Vec<u64>> {
    proptest::collection::vec(1u64..=5_000_000, (TOKENS - 2) as usize)
}

fn table(p: &[u64]) -> PriceTable {
    let mut t = PriceTable::native(token(0), 18);
    for (i, v) in p.iter().enumerate() {
        t.set(token(i as u8 + 1), BigRational::new((*v).into(), 1000.into()), 18).unwrap();
    }
    t
}

fn transaction(gas_used: u64, gwei: u64, to_relay: bool, bid_wei: u64) -> RawTransaction {
    RawTransaction {
        hash: H256([9; 32]),
        index: 3,
        from: Address([0xee; 20]),
        to: Some(if to_relay { RELAY } else { Address([0xb0; 20]) }),
        value: TokenAmount::native(if to_relay { bid_wei } else { 0 }),
        gas_used,
        effective_gas_price: gwei as u128 * 1_000_000_000,
        status: TxStatus::Success,
        logs: vec![],
    }
}

fn tx_params() -> impl Strategy<Value = (u64, u64, bool, u64)> {
    (21_000u64..2_000_000, 1u64..600, any::<bool>(), 0u64..u64::MAX / 2)
}

/// Independent Δ and gross value: plain per-token sums over the legs.
fn naive_gross(swaps: &[SwapEvent], p: &[u64]) -> (BTreeMap<Address, BigInt>, BigRational) {
    let mut d: BTreeMap<Address, BigInt> = BTreeMap::new();
    for s in swaps {
        *d.entry(s.token_out).or_default() += &s.amount_out.raw;
        *d.entry(s.token_in).or_default() -= &s.amount_in.raw;
    }
    let mut gross = BigRational::zero();
    for (t, v) in &d {
        let price = match t.0[0] {
            1 => BigRational::from_integer(1.into()),
            k if (k as usize) - 2 < p.len() => BigRational::new(p[k as usize - 2].into(), 1000.into()),
            _ => continue,
        };
        gross += BigRational::new(v.clone(), pow10(18)) * price;
    }
    d.retain(|_, v| !v.is_zero());
    (d, gross)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn permutation_invariance(
        swaps in proptest::collection::vec(swap(), 0..6),
        p in prices(),
        params in tx_params(),
        seed in any::<u64>(),
    ) {
        let cfg = ClassifierConfig::new(table(&p)).with_fastlane([RELAY]);
        let tx = transaction(params.0, params.1, params.2, params.3);
        let base = evaluate(&tx, BLOCK, &swaps, &cfg);
        let mut shuffled = swaps.clone();
        use rand::{seq::SliceRandom, SeedableRng};
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let other = evaluate(&tx, BLOCK, &shuffled, &cfg);
        prop_assert_eq!(base, other);
    }

    #[test]
    fn profit_matches_independent_recomputation(
        swaps in proptest::collection::vec(swap(), 0..6),
        p in prices(),
        params in tx_params(),
    ) {
        let cfg = ClassifierConfig::new(table(&p)).with_fastlane([RELAY]);
        let tx = transaction(params.0, params.1, params.2, params.3);
        let c = evaluate(&tx, BLOCK, &swaps, &cfg);
        let (d, gross) = naive_gross(&swaps, &p);
        let tau = BigRational::new(BigInt::from(params.0) * BigInt::from(params.1) * pow10(9), pow10(18));
        let beta = if params.2 { BigRational::new(params.3.into(), pow10(18)) } else { BigRational::zero() };
        prop_assert_eq!(c.delta.iter().map(|(a, v)| (*a, v.clone())).collect::<BTreeMap<_, _>>(), d);
        prop_assert_eq!(&c.gross_value, &gross);
        prop_assert_eq!(&c.tau, &tau);
        prop_assert_eq!(&c.beta, &beta);
        prop_assert_eq!(c.recomputed_profit(), c.profit.clone());
        prop_assert_eq!(&c.profit, &(gross - tau - beta));
    }

    #[test]
    fn sufficiency_dominates(
        swaps in proptest::collection::vec(swap(), 0..6),
        p in prices(),
        params in tx_params(),
    ) {
        let cfg = ClassifierConfig::new(table(&p)).with_fastlane([RELAY]);
        let tx = transaction(params.0, params.1, params.2, params.3);
        let c = evaluate(&tx, BLOCK, &swaps, &cfg);
        if c.delta.iter().any(|(_, v)| v.is_negative()) {
            prop_assert!(!c.is_aa);
            prop_assert_eq!(c.strategy, Kind::NotAA);
        }
        if swaps.len() < 2 {
            prop_assert!(!c.is_aa);
        }
    }

    #[test]
    fn strategies_partition(
        swaps in proptest::collection::vec(swap(), 0..6),
        p in prices(),
        params in tx_params(),
    ) {
        let cfg = ClassifierConfig::new(table(&p)).with_fastlane([RELAY]);
        let tx = transaction(params.0, params.1, params.2, params.3);
        let c = evaluate(&tx, BLOCK, &swaps, &cfg);
        let expected = match (c.checks.multi_swap && c.checks.sufficiency && c.checks.profitability, c.is_fastlane) {
            (false, _) => Kind::NotAA,
            (true, true) => Kind::FastLaneBased,
            (true, false) => Kind::SpamBased,
        };
        prop_assert_eq!(c.strategy, expected);
        prop_assert_eq!(c.is_aa, c.strategy != Kind::NotAA);
        prop_assert_eq!(c.is_fastlane, params.2);
    }

    /// Raising the price of a token the transaction gained never turns an
    /// arbitrage into a non-arbitrage.
    #[test]
    fn price_monotone_in_gained_tokens(
        swaps in proptest::collection::vec(swap(), 2..6),
        p in prices(),
        params in tx_params(),
        which in 0usize..(TOKENS - 2) as usize,
        bump in 1u64..1_000_000,
    ) {
        let cfg = ClassifierConfig::new(table(&p)).with_fastlane([RELAY]);
        let tx = transaction(params.0, params.1, params.2, params.3);
        let before = evaluate(&tx, BLOCK, &swaps, &cfg);
        let mut raised = p.clone();
        raised[which] += bump;
        let after = evaluate(&tx, BLOCK, &swaps, &ClassifierConfig::new(table(&raised)).with_fastlane([RELAY]));
        let gained = before.delta.get(&token(which as u8 + 1)).is_positive();
        if gained {
            prop_assert!(after.profit >= before.profit);
            if before.is_aa { prop_assert!(after.is_aa); }
        }
        if before.delta.get(&token(which as u8 + 1)).is_zero() {
            prop_assert_eq!(after.is_aa, before.is_aa);
        }
    }

    #[test]
    fn reject_policy_never_admits_more(
        swaps in proptest::collection::vec(swap(), 0..6),
        p in prices(),
        params in tx_params(),
    ) {
        let mut cfg = ClassifierConfig::new(table(&p)).with_fastlane([RELAY]);
        let tx = transaction(params.0, params.1, params.2, params.3);
        let conservative = evaluate(&tx, BLOCK, &swaps, &cfg);
        cfg.unpriced_token_policy = UnpricedTokenPolicy::Reject;
        let strict = evaluate(&tx, BLOCK, &swaps, &cfg);
        if strict.is_aa { prop_assert!(conservative.is_aa); }
        let touches_unpriced = !strict.delta.get(&token(TOKENS - 1)).is_zero();
        prop_assert_eq!(strict.diagnostic.is_some(), touches_unpriced);
    }
}
