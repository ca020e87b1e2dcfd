use atomarb_core::amount::parse_rational;
use atomarb_core::classify::{classify_block, Classification, Strategy};
use atomarb_core::decode::Decoder;
use atomarb_core::golden::*;
use num_bigint::BigInt;

fn run(g: &Golden) -> Classification {
    let out = classify_block(&g.block, &Decoder::new(&g.pools), &g.config);
    assert!(out.diagnostics.skipped.is_empty(), "{:?}", out.diagnostics);
    out.classifications.into_iter().next().unwrap()
}

fn dec(s: &str) -> num_rational::BigRational {
    parse_rational(s).unwrap()
}

#[test]
fn plain_arbitrage_nets_exact_wmatic() {
    let c = run(&plain_arbitrage());
    assert_eq!(c.strategy, Strategy::SpamBased);
    assert_eq!(c.swap_count, 2);
    // 5.3139 − 5.0018 WMATIC at 18 decimals
    assert_eq!(c.delta.get(&WMATIC), "312100000000000000".parse::<BigInt>().unwrap());
    assert_eq!(c.delta.get(&BUSD), BigInt::from(0));
    assert_eq!(c.delta.len(), 1);
    // τ = 182,394 × 118 gwei = 0.021522492 MATIC
    assert_eq!(c.tau, dec("0.021522492"));
    assert_eq!(c.profit, dec("0.290577508"));
}

#[test]
fn fastlane_arbitrage_nets_2801_wmatic() {
    let c = run(&fastlane_arbitrage());
    assert_eq!(c.strategy, Strategy::FastLaneBased);
    assert_eq!(c.swap_count, 3);
    assert_eq!(c.delta.get(&WMATIC), "2801000000000000000000".parse::<BigInt>().unwrap());
    assert_eq!(c.delta.get(&WETH), BigInt::from(0));
    assert_eq!(c.delta.get(&WBTC), BigInt::from(0));
    // call value and logged bid are the same 150 MATIC, counted once
    assert_eq!(c.beta, dec("150"));
    assert_eq!(c.tau, dec("0.153"));
    assert_eq!(c.profit, dec("2650.847"));
}

mod isolation {
    use super::*;

    fn verdict(g: &Golden) -> (bool, [bool; 3]) {
        let c = run(g);
        (c.is_aa, [c.checks.multi_swap, c.checks.sufficiency, c.checks.profitability])
    }

    #[test]
    fn single_swap_then_second_swap() {
        let (v3, v2) = busd_wmatic_pools();
        let gift = golden_leg(&v3, BUSD, "0", WMATIC, "0.3121");
        let g = spam_transaction(&[(gift.clone(), v3.clone())], PLAIN_GAS_USED, PLAIN_GAS_PRICE);
        assert_eq!(verdict(&g), (false, [false, true, true]));
        let second = golden_leg(&v2, WMATIC, "0.0001", BUSD, "0.0001");
        let g = spam_transaction(&[(gift, v3), (second, v2)], PLAIN_GAS_USED, PLAIN_GAS_PRICE);
        assert_eq!(verdict(&g), (true, [true, true, true]));
    }

    #[test]
    fn negative_delta_then_zeroed() {
        let (v3, v2) = busd_wmatic_pools();
        let buy = golden_leg(&v3, BUSD, "3.9383", WMATIC, "5.3139");
        let short = golden_leg(&v2, WMATIC, "5.0018", BUSD, "3.9382");
        let g = spam_transaction(&[(buy.clone(), v3.clone()), (short, v2.clone())], PLAIN_GAS_USED, PLAIN_GAS_PRICE);
        assert_eq!(verdict(&g), (false, [true, false, true]));
        let exact = golden_leg(&v2, WMATIC, "5.0018", BUSD, "3.9383");
        let g = spam_transaction(&[(buy, v3), (exact, v2)], PLAIN_GAS_USED, PLAIN_GAS_PRICE);
        assert_eq!(verdict(&g), (true, [true, true, true]));
    }

    #[test]
    fn fee_dominated_then_cheaper() {
        let (v3, v2) = busd_wmatic_pools();
        let legs = [
            (golden_leg(&v3, BUSD, "3.9383", WMATIC, "5.3139"), v3),
            (golden_leg(&v2, WMATIC, "5.0018", BUSD, "3.9383"), v2),
        ];
        // 182,394 gas at 2,000 gwei costs 0.364788 MATIC > 0.3121
        let g = spam_transaction(&legs, PLAIN_GAS_USED, 2_000_000_000_000);
        assert_eq!(verdict(&g), (false, [true, true, false]));
        let g = spam_transaction(&legs, PLAIN_GAS_USED, PLAIN_GAS_PRICE);
        assert_eq!(verdict(&g), (true, [true, true, true]));
    }
}
