//! Acceptance run. Prints one PASS or FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use atomarb::checkpoint::{BlockRange, CheckpointStore, Direction, ScanCheckpoint};
use atomarb::config::ConfigFile;
use atomarb::records::{write_records, RecordReader};
use atomarb::registry::load_pools;
use atomarb::report::{load_exclusions, write_csv};
use atomarb::scan::{run_scan, ScanJob};
use atomarb::source::FixtureSource;
use atomarb::traverse::Traversal;
use atomarb::verify::{load_truth, write_synth, CONFIG_FILE, FIXTURE_FILE, POOLS_FILE, TRUTH_FILE};
use atomarb_core::amount::{pow10, TokenAmount};
use atomarb_core::analytics::{aggregate, default_epoch, AggregateRow, ExclusionList, UsdRateSeries, DAY_SECS};
use atomarb_core::classify::{classify_block, Classification, ConditionChecks, Strategy};
use atomarb_core::decode::{Decoder, PoolMeta, Protocol, SwapEvent};
use atomarb_core::delta::DeltaVector;
use atomarb_core::golden::{self, Golden};
use atomarb_core::synth::{
    balancer_pool_id, encode_swap, generate, oracle_classify, OracleWorld, PlantKind, SynthPlan, TxPerBlock,
    BALANCER_VAULT,
};
use atomarb_core::types::{Address, RawTransaction, TxHash, H256};
use num_bigint::{BigInt, Sign};
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

fn run_criterion(n: u8, title: &str, f: impl FnOnce() -> Outcome) -> bool {
    let started = Instant::now();
    let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into());
        Err(format!("panicked: {msg}"))
    });
    let secs = started.elapsed().as_secs_f64();
    match &result {
        Ok(detail) => println!("PASS {n} {title}: {detail} [{secs:.1}s]"),
        Err(why) => println!("FAIL {n} {title}: {why} [{secs:.1}s]"),
    }
    result.is_ok()
}

fn main() {
    let results = [
        run_criterion(1, "oracle equivalence", oracle_equivalence),
        run_criterion(2, "golden fixture A", golden_a),
        run_criterion(3, "golden fixture B", golden_b),
        run_criterion(4, "condition isolation", condition_isolation),
        run_criterion(5, "aggregation fidelity", aggregation_fidelity),
        run_criterion(6, "decoder round-trips", decoder_round_trips),
        run_criterion(7, "resume correctness", resume_correctness),
        run_criterion(8, "exclusion semantics", exclusion_semantics),
    ];
    let failed = results.iter().filter(|ok| !**ok).count();
    println!("acceptance: {}/{} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_atomarb")
}

fn scan_job<'a>(
    source: &'a FixtureSource,
    pools: BTreeMap<Address, PoolMeta>,
    cfg: &'a atomarb_core::classify::ClassifierConfig,
    out: PathBuf,
) -> Result<ScanJob<'a>, String> {
    let (lo, hi) = source.extent().ok_or("empty fixture")?;
    Ok(ScanJob {
        source,
        caller: None,
        pools,
        classifier: cfg,
        range: BlockRange::new(lo, hi),
        direction: Direction::Forward,
        fixture_mode: true,
        checkpoint: out.with_extension("ckpt"),
        out,
        reset_checkpoint: false,
        parallelism: 8,
        stop_after: None,
        interrupt: None,
        pool_cache: None,
    })
}

// 1. Full pipeline on >= 5,000 synthetic transactions agrees with ground
//    truth and the reference oracle on every transaction, in under 60 s.
fn oracle_equivalence() -> Outcome {
    const LIMIT: Duration = Duration::from_secs(60);
    let started = Instant::now();
    let synth = generate(&SynthPlan::default()).map_err(e)?;
    let n = synth.transaction_count();
    ensure!(n >= 5_000, "plan produced only {n} transactions");
    let kinds: BTreeSet<PlantKind> = synth.truth.values().map(|t| t.kind).collect();
    for k in [
        PlantKind::AtomicArbitrage,
        PlantKind::NearMissMultiSwap,
        PlantKind::NearMissSufficiency,
        PlantKind::NearMissProfitability,
    ] {
        ensure!(kinds.contains(&k), "plan lacks {k:?}");
    }
    let fl_planted = synth.truth.values().filter(|t| t.strategy == Strategy::FastLaneBased).count();
    ensure!(fl_planted > 0, "plan has no FastLane-routed arbitrage");

    // Through the files and the scan path, as the CLI does it.
    let dir = tempfile::tempdir().map_err(e)?;
    write_synth(dir.path(), &synth).map_err(e)?;
    let source = FixtureSource::load(dir.path().join(FIXTURE_FILE)).map_err(e)?;
    let pools = load_pools(&dir.path().join(POOLS_FILE)).map_err(e)?;
    let cfg = ConfigFile::load(&dir.path().join(CONFIG_FILE))
        .map_err(e)?
        .classifier
        .ok_or("config has no classifier")?
        .to_config()
        .map_err(e)?;
    let truth = load_truth(&dir.path().join(TRUTH_FILE))?;
    let out = dir.path().join("scan.jsonl");
    let report = run_scan(&scan_job(&source, pools.clone(), &cfg, out.clone())?).map_err(e)?;
    ensure!(report.complete, "scan did not complete");

    let txs: BTreeMap<TxHash, &RawTransaction> =
        synth.blocks.iter().flat_map(|b| &b.transactions).map(|t| (t.hash, t)).collect();
    let world = OracleWorld::new(
        pools.values(),
        &cfg.price_table,
        cfg.fastlane_addresses.iter().copied(),
        &cfg.bid_event.signature,
        cfg.bid_event.amount_word,
    );
    let reader = RecordReader::new(std::io::BufReader::new(fs::File::open(&out).map_err(e)?));
    let mut seen = BTreeSet::new();
    let (mut aa, mut fl) = (0, 0);
    for rec in reader {
        let c = rec.map_err(e)?;
        let t = truth.get(&c.tx_hash).ok_or(format!("{} not in ground truth", c.tx_hash))?;
        let tx = txs.get(&c.tx_hash).ok_or(format!("{} not in fixture", c.tx_hash))?;
        let o = oracle_classify(tx, &world);
        let same = |is_aa: bool, s: Strategy, p: &BigRational, n: usize| {
            is_aa == c.is_aa && s == c.strategy && *p == c.profit && n == c.swap_count
        };
        ensure!(same(t.is_aa, t.strategy, &t.profit, t.swap_count), "{}: pipeline disagrees with truth ({:?})", c.tx_hash, t.kind);
        ensure!(same(o.is_aa, o.strategy, &o.profit, o.swap_count), "{}: pipeline disagrees with oracle", c.tx_hash);
        ensure!(seen.insert(c.tx_hash), "{} classified twice", c.tx_hash);
        aa += usize::from(c.is_aa);
        fl += usize::from(c.strategy == Strategy::FastLaneBased);
    }
    ensure!(seen.len() == n && truth.len() == n, "classified {} of {n} transactions", seen.len());
    let elapsed = started.elapsed();
    ensure!(elapsed < LIMIT, "took {:.1}s, limit {}s", elapsed.as_secs_f64(), LIMIT.as_secs());
    Ok(format!(
        "{n} transactions ({aa} AA, {fl} FastLane-based), 100% agreement with truth and oracle in {:.1}s",
        elapsed.as_secs_f64()
    ))
}

fn classify_one(g: &Golden) -> Result<Classification, String> {
    let out = classify_block(&g.block, &Decoder::new(&g.pools), &g.config);
    ensure!(out.diagnostics.skipped.is_empty(), "skipped legs: {:?}", out.diagnostics.skipped);
    out.classifications.into_iter().next().ok_or_else(|| "no classification".into())
}

fn whole(raw: &BigInt, decimals: u32) -> BigRational {
    BigRational::new(raw.clone(), pow10(decimals))
}

// 2. 3.9383 BUSD -> 5.3139 WMATIC (V3), 5.0018 WMATIC -> 3.9383 BUSD (V2).
fn golden_a() -> Outcome {
    let g = golden::plain_arbitrage();
    let c = classify_one(&g)?;
    let tx = g.tx();
    // 5.3139 - 5.0018 WMATIC in raw units, 18 decimals.
    let expected: BigInt = BigInt::from(53_139u64) * pow10(14) - BigInt::from(50_018u64) * pow10(14);
    ensure!(c.delta.get(&golden::WMATIC) == expected, "Δ(WMATIC) = {}", c.delta.get(&golden::WMATIC));
    ensure!(c.delta.get(&golden::BUSD).is_zero(), "Δ(BUSD) = {}", c.delta.get(&golden::BUSD));
    let tau = BigRational::new(BigInt::from(tx.gas_used) * BigInt::from(tx.effective_gas_price), pow10(18));
    let profit = rat(3121, 10_000) - &tau;
    ensure!(c.beta.is_zero(), "β = {}", c.beta);
    ensure!(c.profit == profit, "profit {} != 0.3121 - τ = {}", c.profit, profit);
    ensure!(c.is_aa && c.strategy == Strategy::SpamBased, "verdict {:?}", c.strategy);
    Ok(format!(
        "Δ(WMATIC) = {expected} raw, τ = {}, profit = {}, SpamBased",
        atomarb_core::amount::render_rational(&tau),
        atomarb_core::amount::render_rational(&c.profit)
    ))
}

// 3. FastLane-routed three-leg WMATIC/WETH/WBTC cycle nets 2,801 ± 1 WMATIC.
fn golden_b() -> Outcome {
    let g = golden::fastlane_arbitrage();
    let c = classify_one(&g)?;
    let wmatic = whole(&c.delta.get(&golden::WMATIC), 18);
    let off = (&wmatic - BigRational::from_integer(2801.into())).abs();
    ensure!(off <= BigRational::from_integer(1.into()), "Δ(WMATIC) = {wmatic}");
    ensure!(c.delta.get(&golden::WETH).is_zero(), "Δ(WETH) = {}", c.delta.get(&golden::WETH));
    ensure!(c.delta.get(&golden::WBTC).is_zero(), "Δ(WBTC) = {}", c.delta.get(&golden::WBTC));
    ensure!(c.swap_count == 3, "N = {}", c.swap_count);
    ensure!(c.is_aa && c.strategy == Strategy::FastLaneBased, "verdict {:?}", c.strategy);
    Ok(format!("Δ(WMATIC) = {wmatic}, Δ(WETH) = Δ(WBTC) = 0, N = 3, FastLaneBased"))
}

fn verdict(g: &Golden) -> Result<(bool, [bool; 3]), String> {
    let c = classify_one(g)?;
    Ok((c.is_aa, [c.checks.multi_swap, c.checks.sufficiency, c.checks.profitability]))
}

// 4. One fixture per condition violating only that condition; fixing the one
//    quantity flips the verdict.
fn condition_isolation() -> Outcome {
    use golden::{busd_wmatic_pools, golden_leg, spam_transaction, BUSD, PLAIN_GAS_PRICE, PLAIN_GAS_USED, WMATIC};
    let (v3, v2) = busd_wmatic_pools();
    let aa = (true, [true, true, true]);

    let gift = golden_leg(&v3, BUSD, "0", WMATIC, "0.3121");
    let single = spam_transaction(&[(gift.clone(), v3.clone())], PLAIN_GAS_USED, PLAIN_GAS_PRICE);
    ensure!(verdict(&single)? == (false, [false, true, true]), "single swap: {:?}", verdict(&single)?);
    let second = golden_leg(&v2, WMATIC, "0.0001", BUSD, "0.0001");
    let two = spam_transaction(&[(gift, v3.clone()), (second, v2.clone())], PLAIN_GAS_USED, PLAIN_GAS_PRICE);
    ensure!(verdict(&two)? == aa, "second swap added: {:?}", verdict(&two)?);

    let buy = golden_leg(&v3, BUSD, "3.9383", WMATIC, "5.3139");
    let short = golden_leg(&v2, WMATIC, "5.0018", BUSD, "3.9382");
    let neg = spam_transaction(&[(buy.clone(), v3.clone()), (short, v2.clone())], PLAIN_GAS_USED, PLAIN_GAS_PRICE);
    ensure!(verdict(&neg)? == (false, [true, false, true]), "negative Δ(BUSD): {:?}", verdict(&neg)?);
    let exact = golden_leg(&v2, WMATIC, "5.0018", BUSD, "3.9383");
    let legs = [(buy, v3), (exact, v2)];
    let zeroed = spam_transaction(&legs, PLAIN_GAS_USED, PLAIN_GAS_PRICE);
    ensure!(verdict(&zeroed)? == aa, "Δ(BUSD) zeroed: {:?}", verdict(&zeroed)?);

    // 182,394 gas at 2,000 gwei is 0.364788 MATIC, above the 0.3121 gross.
    let costly = spam_transaction(&legs, PLAIN_GAS_USED, 2_000_000_000_000);
    ensure!(verdict(&costly)? == (false, [true, true, false]), "fee-dominated: {:?}", verdict(&costly)?);
    let cheap = spam_transaction(&legs, PLAIN_GAS_USED, PLAIN_GAS_PRICE);
    ensure!(verdict(&cheap)? == aa, "fee lowered: {:?}", verdict(&cheap)?);
    Ok("each condition rejected alone and each single fix flips the verdict to AA".into())
}

const EPOCH: u64 = 1_700_000_000;
const BUCKET: u64 = 28 * DAY_SECS;

fn record(i: u64, ts: u64, strategy: Strategy, profit: BigRational, beta: BigRational, searcher: u8) -> Classification {
    let mut hash = [0u8; 32];
    hash[24..].copy_from_slice(&i.to_be_bytes());
    let is_aa = strategy != Strategy::NotAA;
    Classification {
        tx_hash: H256(hash),
        block_number: i,
        tx_index: 0,
        timestamp: ts,
        is_aa,
        strategy,
        swap_count: 2,
        delta: DeltaVector::new(),
        gross_value: &profit + &beta,
        tau: BigRational::zero(),
        beta,
        profit,
        searcher: Address([searcher; 20]),
        is_fastlane: strategy == Strategy::FastLaneBased,
        checks: ConditionChecks {
            multi_swap: true,
            sufficiency: true,
            profitability: is_aa,
        },
        diagnostic: None,
    }
}

/// Per-bucket tally written directly from the metric definitions.
fn tally(stream: &[Classification], rates: Option<&UsdRateSeries>) -> Vec<AggregateRow> {
    let mut by_bucket: BTreeMap<u64, Vec<&Classification>> = BTreeMap::new();
    for c in stream {
        by_bucket.entry((c.timestamp - EPOCH) / BUCKET).or_default().push(c);
    }
    let (Some(&lo), Some(&hi)) = (by_bucket.keys().next(), by_bucket.keys().last()) else {
        return Vec::new();
    };
    let rate_at = |ts: u64| -> BigRational {
        let pts = rates.unwrap().points();
        pts.iter().rfind(|(t, _)| *t <= ts).unwrap_or(&pts[0]).1.clone()
    };
    (lo..=hi)
        .map(|b| {
            let recs = by_bucket.get(&b).cloned().unwrap_or_default();
            let of = |s: Strategy| recs.iter().filter(move |c| c.strategy == s).copied().collect::<Vec<_>>();
            let (spam, fl) = (of(Strategy::SpamBased), of(Strategy::FastLaneBased));
            let sum = |v: &[&Classification], f: &dyn Fn(&Classification) -> BigRational| {
                v.iter().fold(BigRational::zero(), |acc, c| acc + f(c))
            };
            let mev_spam = sum(&spam, &|c| c.profit.clone());
            let mev_fl = sum(&fl, &|c| c.profit.clone());
            let bids = sum(&spam, &|c| c.beta.clone()) + sum(&fl, &|c| c.beta.clone());
            let fl_bids = sum(&fl, &|c| c.beta.clone());
            let uniq = |v: &[&Classification]| v.iter().map(|c| c.searcher).collect::<BTreeSet<_>>().len() as u64;
            let total = (spam.len() + fl.len()) as i64;
            let vol = &mev_spam + &mev_fl;
            AggregateRow {
                bucket_index: b,
                bucket_start: EPOCH + b * BUCKET,
                aa_tx_count_spam: spam.len() as u64,
                aa_tx_count_fastlane: fl.len() as u64,
                mev_usd_spam: rates.map(|_| sum(&spam, &|c| &c.profit * rate_at(c.timestamp))),
                mev_usd_fastlane: rates.map(|_| sum(&fl, &|c| &c.profit * rate_at(c.timestamp))),
                mev_volume_spam: mev_spam,
                bids_total: bids,
                unique_searchers_spam: uniq(&spam),
                unique_searchers_fastlane: uniq(&fl),
                fastlane_tx_share: (total > 0).then(|| rat(fl.len() as i64, total)),
                fastlane_mev_share: (!vol.is_zero()).then(|| &mev_fl / &vol),
                bid_to_mev_ratio: (!mev_fl.is_zero()).then(|| &fl_bids / &mev_fl),
                mev_volume_fastlane: mev_fl,
            }
        })
        .collect()
}

// 5. Known per-bucket totals including a 13/100 FastLane split, then the
//    tally oracle, conservation and share bounds on 100 random streams.
fn aggregation_fidelity() -> Outcome {
    let none = ExclusionList::new();
    // Bucket 0: 87 spam AA of 1 MATIC each from 3 searchers, 13 FastLane AA
    // of 1 MATIC each from 2 searchers paying 1/4 MATIC bids. Bucket 2: one
    // spam AA of 5 MATIC. Bucket 1 has only a non-AA record.
    let mut stream = Vec::new();
    for i in 0..100u64 {
        let (s, beta, who) = if i < 13 {
            (Strategy::FastLaneBased, rat(1, 4), 100 + (i % 2) as u8)
        } else {
            (Strategy::SpamBased, BigRational::zero(), (i % 3) as u8)
        };
        stream.push(record(i, EPOCH + i * 600, s, rat(1, 1), beta, who));
    }
    stream.push(record(100, EPOCH + BUCKET + 5, Strategy::NotAA, rat(-1, 10), BigRational::zero(), 7));
    stream.push(record(101, EPOCH + 2 * BUCKET + 9, Strategy::SpamBased, rat(5, 1), BigRational::zero(), 9));
    let rows = aggregate(&stream, &none, None, EPOCH, BUCKET).map_err(e)?.rows;
    ensure!(rows.len() == 3, "{} rows", rows.len());
    let r0 = &rows[0];
    ensure!(
        (r0.aa_tx_count_spam, r0.aa_tx_count_fastlane) == (87, 13),
        "bucket 0 counts {} / {}",
        r0.aa_tx_count_spam,
        r0.aa_tx_count_fastlane
    );
    ensure!(r0.fastlane_mev_share == Some(rat(13, 100)), "FastLane MEV share {:?}", r0.fastlane_mev_share);
    ensure!(r0.fastlane_tx_share == Some(rat(13, 100)), "FastLane tx share {:?}", r0.fastlane_tx_share);
    ensure!(r0.mev_volume_spam == rat(87, 1) && r0.mev_volume_fastlane == rat(13, 1), "bucket 0 volumes");
    ensure!(r0.bids_total == rat(13, 4), "bids {}", r0.bids_total);
    ensure!(r0.bid_to_mev_ratio == Some(rat(1, 4)), "bid-to-MEV {:?}", r0.bid_to_mev_ratio);
    ensure!((r0.unique_searchers_spam, r0.unique_searchers_fastlane) == (3, 2), "searcher counts");
    let r1 = &rows[1];
    ensure!(
        r1.aa_tx_count_spam + r1.aa_tx_count_fastlane == 0 && r1.fastlane_tx_share.is_none() && r1.bid_to_mev_ratio.is_none(),
        "bucket 1 should be an empty row"
    );
    let r2 = &rows[2];
    ensure!(r2.mev_volume_spam == rat(5, 1) && r2.fastlane_mev_share == Some(BigRational::zero()), "bucket 2");
    ensure!(r2.bid_to_mev_ratio.is_none(), "bucket 2 ratio must be undefined");
    ensure!(rows == tally(&stream, None), "constructed stream differs from tally");

    let mut rng = ChaCha8Rng::seed_from_u64(0xacce55);
    let points: Vec<_> = (0..7 * 28).map(|d| (EPOCH + d * DAY_SECS, rat(800 + d as i64, 1000))).collect();
    let rates = UsdRateSeries::new(points).map_err(e)?;
    for round in 0..100 {
        let len = rng.gen_range(0..400u64);
        let stream: Vec<_> = (0..len)
            .map(|i| {
                let s = *[Strategy::SpamBased, Strategy::FastLaneBased, Strategy::NotAA].choose(&mut rng).unwrap();
                let profit = rat(rng.gen_range(1..5_000_000), rng.gen_range(1..997));
                let profit = if s == Strategy::NotAA { -profit } else { profit };
                let beta = if s == Strategy::FastLaneBased {
                    rat(rng.gen_range(0..100_000), 1000)
                } else {
                    BigRational::zero()
                };
                record(i, EPOCH + rng.gen_range(0..6 * BUCKET), s, profit, beta, rng.gen_range(0..25))
            })
            .collect();
        let rows = aggregate(&stream, &none, Some(&rates), EPOCH, BUCKET).map_err(e)?.rows;
        ensure!(rows == tally(&stream, Some(&rates)), "round {round}: rows differ from tally");
        let count = |s: Strategy| stream.iter().filter(|c| c.strategy == s).count() as u64;
        let spam: u64 = rows.iter().map(|r| r.aa_tx_count_spam).sum();
        let fl: u64 = rows.iter().map(|r| r.aa_tx_count_fastlane).sum();
        ensure!(spam == count(Strategy::SpamBased) && fl == count(Strategy::FastLaneBased), "round {round}: counts not conserved");
        let vol = |s: Strategy| stream.iter().filter(|c| c.strategy == s).fold(BigRational::zero(), |a, c| a + &c.profit);
        let row_vol = rows.iter().fold(BigRational::zero(), |a, r| a + &r.mev_volume_spam + &r.mev_volume_fastlane);
        ensure!(row_vol == vol(Strategy::SpamBased) + vol(Strategy::FastLaneBased), "round {round}: volume not conserved");
        let unit = |v: &Option<BigRational>| v.as_ref().is_none_or(|x| !x.is_negative() && *x <= rat(1, 1));
        for r in &rows {
            ensure!(unit(&r.fastlane_tx_share) && unit(&r.fastlane_mev_share), "round {round}: share out of [0, 1]");
            ensure!(r.bid_to_mev_ratio.is_some() == !r.mev_volume_fastlane.is_zero(), "round {round}: ratio defined wrongly");
        }
    }
    Ok("13/100 FastLane split and all constructed totals exact; 100 random streams match the tally, conserve totals and keep shares in [0, 1]".into())
}

fn random_raw(rng: &mut ChaCha8Rng, bits: u64) -> BigInt {
    let width = rng.gen_range(0..=bits);
    let mut bytes = [0u8; 32];
    rng.fill(&mut bytes);
    BigInt::from_bytes_be(Sign::Plus, &bytes) >> (256 - width)
}

// 6. encode -> decode identity on >= 1,000 random swaps per protocol.
fn decoder_round_trips() -> Outcome {
    const CASES: usize = 1_000;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut done = BTreeMap::new();
    for protocol in Protocol::ALL {
        let bits = if matches!(protocol, Protocol::UniV3 | Protocol::Algebra) { 255 } else { 256 };
        let mut ok = 0;
        while ok < CASES {
            let pool = Address(rng.gen());
            let token_count = if protocol == Protocol::BalancerV2 { rng.gen_range(2..=8) } else { 2 };
            let mut tokens: Vec<Address> = (0..token_count).map(|_| Address(rng.gen())).collect();
            tokens.sort();
            tokens.dedup();
            if tokens.len() < 2 {
                continue;
            }
            let decimals: Vec<u8> = tokens.iter().map(|_| rng.gen_range(0..=36)).collect();
            let meta = PoolMeta {
                pool,
                protocol,
                tokens: tokens.clone(),
                decimals: decimals.clone(),
            };
            let i = rng.gen_range(0..tokens.len());
            let mut j = rng.gen_range(0..tokens.len() - 1);
            if j >= i {
                j += 1;
            }
            let (amount_in, amount_out) = (random_raw(&mut rng, bits), random_raw(&mut rng, bits));
            if amount_in.is_zero() && amount_out.is_zero() {
                continue;
            }
            let tx_hash = H256(rng.gen());
            let swap = SwapEvent {
                pool,
                protocol,
                token_in: tokens[i],
                token_out: tokens[j],
                amount_in: TokenAmount::new(amount_in, decimals[i]),
                amount_out: TokenAmount::new(amount_out, decimals[j]),
                recipient: (protocol != Protocol::BalancerV2).then(|| Address(rng.gen())),
                log_index: rng.gen_range(0..10_000),
                tx_hash,
            };
            let log = encode_swap(&swap, Some(&meta), BALANCER_VAULT).map_err(e)?;
            if protocol == Protocol::BalancerV2 {
                ensure!(log.topics.get(1) == Some(&balancer_pool_id(&pool)), "pool id not derived from pool");
            }
            let registry: BTreeMap<Address, PoolMeta> = [(pool, meta)].into();
            let back = Decoder::new(&registry).decode_log(&log, tx_hash).map_err(|err| format!("{protocol}: {err}"))?;
            ensure!(back == swap, "{protocol}: decoded {back:?} from {swap:?}");
            ok += 1;
        }
        done.insert(protocol, ok);
    }
    Ok(format!(
        "{} random swaps per protocol ({}), zero failures",
        CASES,
        done.keys().map(ToString::to_string).collect::<Vec<_>>().join(", ")
    ))
}

fn sorted_lines(bytes: &[u8]) -> Result<Vec<String>, String> {
    let text = std::str::from_utf8(bytes).map_err(e)?;
    let mut keyed = Vec::new();
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).map_err(e)?;
        let key = (v["block_number"].as_u64().ok_or("no block")?, v["tx_index"].as_u64().ok_or("no index")?);
        keyed.push((key, line.to_string()));
    }
    keyed.sort();
    Ok(keyed.into_iter().map(|(_, l)| l).collect())
}

fn scan_cli(dir: &Path, out: &Path, extra: &[&str]) -> Result<i32, String> {
    let status = Command::new(bin())
        .arg("scan")
        .arg("--fixture")
        .arg(dir.join(FIXTURE_FILE))
        .arg("--pool-cache")
        .arg(dir.join(POOLS_FILE))
        .arg("--config")
        .arg(dir.join(CONFIG_FILE))
        .arg("--out")
        .arg(out)
        .args(extra)
        .env("ATOMARB_LOG", "warn")
        .status()
        .map_err(e)?;
    status.code().ok_or_else(|| "scan killed by signal".into())
}

// 7. 10,000-block fixture, scan interrupted at 10 random points and resumed.
fn resume_correctness() -> Outcome {
    const BLOCKS: u64 = 10_000;
    let plan = SynthPlan {
        seed: 77,
        block_count: BLOCKS,
        tx_per_block: TxPerBlock { min: 0, max: 2 },
        ..SynthPlan::default()
    };
    let synth = generate(&plan).map_err(e)?;
    let dir = tempfile::tempdir().map_err(e)?;
    write_synth(dir.path(), &synth).map_err(e)?;
    let source = FixtureSource::load(dir.path().join(FIXTURE_FILE)).map_err(e)?;
    let (lo, hi) = source.extent().ok_or("empty fixture")?;
    ensure!(hi - lo + 1 == BLOCKS, "fixture has {} blocks", hi - lo + 1);

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut cuts: Vec<u64> = (1..BLOCKS).collect::<Vec<_>>().choose_multiple(&mut rng, 10).copied().collect();
    cuts.sort();

    // Traversal: each cut drops the cursor as a kill would, after the block
    // was handed out but before its checkpoint was saved.
    for direction in [Direction::Forward, Direction::Backward] {
        let store = CheckpointStore::new(dir.path().join(format!("traverse-{direction:?}.ckpt")));
        let range = BlockRange::new(lo, hi);
        let mut committed = Vec::new();
        let mut prev = 0;
        for &cut in cuts.iter().chain([&BLOCKS]) {
            let cp = store.load().map_err(e)?.unwrap_or_else(|| ScanCheckpoint::fresh(range, direction, true));
            let mut t = Traversal::new(&source, cp, 8);
            for _ in prev..cut {
                let b = t.next().ok_or("traversal ended early")?.map_err(e)?;
                committed.push(b.number);
                store.save(t.checkpoint()).map_err(e)?;
            }
            // One more block delivered and lost with the process.
            let _ = t.next();
            prev = cut;
        }
        let expected: Vec<u64> = match direction {
            Direction::Forward => (lo..=hi).collect(),
            Direction::Backward => (lo..=hi).rev().collect(),
        };
        ensure!(committed == expected, "{direction:?} traversal delivered {} blocks, not each exactly once", committed.len());
    }

    // The binary, stopped at each cut and resumed. A torn half-line is left
    // behind after every stop, as a kill mid-write would.
    let full = dir.path().join("full.jsonl");
    ensure!(scan_cli(dir.path(), &full, &[])? == 0, "uninterrupted scan failed");
    let expected = fs::read(&full).map_err(e)?;
    let out = dir.path().join("resumed.jsonl");
    let mut segments = Vec::new();
    let mut committed = 0;
    let mut prev = 0;
    for &cut in &cuts {
        let step = (cut - prev).to_string();
        let code = scan_cli(dir.path(), &out, &["--stop-after-blocks", &step])?;
        ensure!(code == 2, "interrupted run exited {code}, expected 2");
        let now = fs::read(&out).map_err(e)?;
        ensure!(now.len() >= committed, "output shrank below committed bytes");
        segments.push(now[committed..].to_vec());
        committed = now.len();
        fs::OpenOptions::new()
            .append(true)
            .open(&out)
            .and_then(|mut f| std::io::Write::write_all(&mut f, b"{\"tx_hash\":\"0x12"))
            .map_err(e)?;
        prev = cut;
    }
    ensure!(scan_cli(dir.path(), &out, &[])? == 0, "final resumed run failed");
    let last = fs::read(&out).map_err(e)?;
    segments.push(last[committed..].to_vec());

    let concatenated: Vec<u8> = segments.concat();
    ensure!(sorted_lines(&concatenated)? == sorted_lines(&expected)?, "sorted concatenation differs from uninterrupted run");
    ensure!(last == expected, "resumed output file differs from uninterrupted run");
    let lines = expected.iter().filter(|b| **b == b'\n').count();
    Ok(format!(
        "{BLOCKS} blocks, {lines} lines; cuts at {cuts:?}; traversal (both directions) and scan output exactly once"
    ))
}

fn report_cli(input: &Path, out: &Path, exclusions: Option<&Path>) -> Result<i32, String> {
    let mut cmd = Command::new(bin());
    cmd.arg("report").arg("--input").arg(input).arg("--out").arg(out).env("ATOMARB_LOG", "warn");
    if let Some(p) = exclusions {
        cmd.arg("--exclusions").arg(p);
    }
    cmd.status().map_err(e)?.code().ok_or_else(|| "report killed by signal".into())
}

// 8. Excluded hashes leave aggregates identical to deleting their records.
fn exclusion_semantics() -> Outcome {
    let synth = generate(&SynthPlan::default()).map_err(e)?;
    let decoder = Decoder::new(&synth.pools);
    let stream: Vec<Classification> = synth
        .blocks
        .iter()
        .flat_map(|b| classify_block(b, &decoder, &synth.config).classifications)
        .collect();
    // Five arbitrages from the day of the earliest one, so the default epoch
    // has to move when that record is the first in the stream.
    let first_aa = stream.iter().find(|c| c.is_aa).ok_or("no arbitrage in stream")?;
    let first_day = first_aa.timestamp / DAY_SECS;
    let chosen: Vec<&Classification> =
        stream.iter().filter(|c| c.is_aa && c.timestamp / DAY_SECS == first_day).take(5).collect();
    ensure!(chosen.len() == 5, "found only {} same-day arbitrages", chosen.len());

    let dir = tempfile::tempdir().map_err(e)?;
    let excl_path = dir.path().join("exclusions.json");
    let entries: Vec<_> = chosen
        .iter()
        .map(|c| serde_json::json!({"tx_hash": c.tx_hash, "reason": "exploit"}))
        .collect();
    fs::write(&excl_path, serde_json::json!({"description": "test", "entries": entries}).to_string()).map_err(e)?;
    let excl = load_exclusions(&[excl_path.as_path()])?;
    let hashes: BTreeSet<TxHash> = chosen.iter().map(|c| c.tx_hash).collect();
    let kept: Vec<Classification> = stream.iter().filter(|c| !hashes.contains(&c.tx_hash)).cloned().collect();

    let none = ExclusionList::new();
    let epoch_a = default_epoch(&stream, &excl).ok_or("no epoch")?;
    let epoch_b = default_epoch(&kept, &none).ok_or("no epoch")?;
    ensure!(epoch_a == epoch_b, "default epochs differ: {epoch_a} vs {epoch_b}");
    let with = aggregate(&stream, &excl, None, epoch_a, BUCKET).map_err(e)?;
    let without = aggregate(&kept, &none, None, epoch_b, BUCKET).map_err(e)?;
    ensure!(with.rows == without.rows, "rows differ");
    ensure!(with.excluded == 5, "excluded {}", with.excluded);
    let (mut a, mut b) = (Vec::new(), Vec::new());
    write_csv(&mut a, &with.rows).map_err(e)?;
    write_csv(&mut b, &without.rows).map_err(e)?;
    ensure!(a == b, "CSV differs");

    // Same through the report command.
    let (full_in, kept_in) = (dir.path().join("all.jsonl"), dir.path().join("kept.jsonl"));
    write_records(fs::File::create(&full_in).map_err(e)?, &stream).map_err(e)?;
    write_records(fs::File::create(&kept_in).map_err(e)?, &kept).map_err(e)?;
    let (ra, rb) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    ensure!(report_cli(&full_in, &ra, Some(&excl_path))? == 0, "report with exclusions failed");
    ensure!(report_cli(&kept_in, &rb, None)? == 0, "report without exclusions failed");
    let (ba, bb) = (fs::read(&ra).map_err(e)?, fs::read(&rb).map_err(e)?);
    ensure!(ba == bb, "report outputs differ");
    Ok(format!(
        "5 same-day hashes excluded from {} records: rows, CSV and report bytes identical to deletion",
        stream.len()
    ))
}
