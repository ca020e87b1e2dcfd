use atomarb_core::amount::TokenAmount;
use atomarb_core::decode::{Decoder, PoolMeta, Protocol, SwapEvent};
use atomarb_core::synth::{encode_swap, EncodeError, BALANCER_VAULT};
use atomarb_core::types::{Address, H256};
use num_bigint::{BigInt, Sign};
use proptest::prelude::*;
use std::collections::BTreeMap;

/// Up to `bits` bits, biased towards both tiny and huge magnitudes.
fn raw(bits: u32) -> impl Strategy<Value = BigInt> {
    prop_oneof![
        (0u64..1000).prop_map(BigInt::from),
        proptest::collection::vec(any::<u8>(), 32).prop_map(move |bytes| {
            let v = BigInt::from_bytes_be(Sign::Plus, &bytes);
            v >> (256 - bits)
        }),
    ]
}

fn case(protocol: Protocol) -> impl Strategy<Value = (SwapEvent, PoolMeta)> {
    let bits = match protocol {
        Protocol::UniV2 | Protocol::BalancerV2 => 256,
        _ => 255,
    };
    (
        any::<[u8; 20]>(),
        any::<[u8; 20]>(),
        any::<[u8; 20]>(),
        0u8..=36,
        0u8..=36,
        any::<bool>(),
        raw(bits),
        raw(bits),
        any::<[u8; 32]>(),
        any::<u32>(),
        any::<[u8; 20]>(),
    )
        .prop_filter("distinct tokens, some amount", |(_, a, b, .., ain, aout, _, _, _)| {
            a != b && !(ain == &BigInt::from(0) && aout == &BigInt::from(0))
        })
        .prop_map(move |(pool, a, b, da, db, a_in, ain, aout, hash, idx, recipient)| {
            let (t0, t1) = if a < b { ((a, da), (b, db)) } else { ((b, db), (a, da)) };
            let meta = PoolMeta {
                pool: Address(pool),
                protocol,
                tokens: vec![Address(t0.0), Address(t1.0)],
                decimals: vec![t0.1, t1.1],
            };
            let ((tin, din), (tout, dout)) = if a_in { (t0, t1) } else { (t1, t0) };
            let swap = SwapEvent {
                pool: Address(pool),
                protocol,
                token_in: Address(tin),
                token_out: Address(tout),
                amount_in: TokenAmount::new(ain, din),
                amount_out: TokenAmount::new(aout, dout),
                recipient: (protocol != Protocol::BalancerV2).then_some(Address(recipient)),
                log_index: idx as u64,
                tx_hash: H256(hash),
            };
            (swap, meta)
        })
}

fn roundtrip(swap: &SwapEvent, meta: &PoolMeta) -> Result<(), TestCaseError> {
    let log = encode_swap(swap, Some(meta), BALANCER_VAULT).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let registry: BTreeMap<Address, PoolMeta> = [(meta.pool, meta.clone())].into_iter().collect();
    let decoded = Decoder::new(&registry).decode_log(&log, swap.tx_hash);
    prop_assert_eq!(decoded.as_ref(), Ok(swap));
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn univ2(c in case(Protocol::UniV2)) { roundtrip(&c.0, &c.1)?; }

    #[test]
    fn univ3(c in case(Protocol::UniV3)) { roundtrip(&c.0, &c.1)?; }

    #[test]
    fn algebra(c in case(Protocol::Algebra)) { roundtrip(&c.0, &c.1)?; }

    #[test]
    fn balancer(c in case(Protocol::BalancerV2)) { roundtrip(&c.0, &c.1)?; }
}

#[test]
fn balancer_same_token_is_unencodable() {
    let t = Address([7; 20]);
    let swap = SwapEvent {
        pool: Address([1; 20]),
        protocol: Protocol::BalancerV2,
        token_in: t,
        token_out: t,
        amount_in: TokenAmount::new(5, 18),
        amount_out: TokenAmount::new(6, 18),
        recipient: None,
        log_index: 0,
        tx_hash: H256::ZERO,
    };
    assert!(matches!(encode_swap(&swap, None, BALANCER_VAULT), Err(EncodeError::Unencodable(_))));
}

#[test]
fn protocol_mismatch_is_unencodable() {
    let meta = PoolMeta::pair(Address([1; 20]), Protocol::UniV2, (Address([2; 20]), 18), (Address([3; 20]), 18)).unwrap();
    let swap = SwapEvent {
        pool: meta.pool,
        protocol: Protocol::UniV3,
        token_in: Address([2; 20]),
        token_out: Address([3; 20]),
        amount_in: TokenAmount::new(5, 18),
        amount_out: TokenAmount::new(6, 18),
        recipient: Some(Address([9; 20])),
        log_index: 0,
        tx_hash: H256::ZERO,
    };
    assert!(encode_swap(&swap, Some(&meta), BALANCER_VAULT).is_err());
}
