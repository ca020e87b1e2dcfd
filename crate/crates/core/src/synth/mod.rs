//! Deterministic synthetic ledgers with planted ground truth.
//!
//! Every generated transaction is labeled with what it was built to be:
//! a profitable multi-swap cycle, a near miss that violates exactly one of the
//! three conditions, or background noise. Amounts span 10^0..10^24 raw units.

pub mod encode;
pub mod oracle;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::abi::{encode_unsigned, event_topic, keccak256};
use crate::amount::{parse_rational, pow10, TokenAmount};
use crate::classify::{BidEventSpec, ClassifierConfig, Strategy};
use crate::decode::{PoolMeta, Protocol, SwapEvent};
use crate::price::PriceTable;
use crate::types::{Address, RawBlock, RawLog, RawTransaction, TxHash, TxStatus, H256};

pub use encode::{balancer_pool_id, encode_swap, EncodeError, BALANCER_VAULT};
pub use oracle::{oracle_classify, OracleLabel, OracleWorld};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SynthToken {
    pub symbol: String,
    pub decimals: u8,
    /// Price per whole token in the common currency; `None` leaves it unpriced.
    pub price: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TxPerBlock {
    pub min: u32,
    pub max: u32,
}

/// Generation parameters. The first token is the common currency and doubles
/// as the wrapped native coin.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct SynthPlan {
    pub seed: u64,
    pub block_count: u64,
    pub start_block: u64,
    pub start_timestamp: u64,
    pub block_interval_secs: u64,
    pub tx_per_block: TxPerBlock,
    pub planted_aa_fraction: f64,
    pub near_miss_fraction: f64,
    pub fastlane_fraction: f64,
    pub searcher_count: u32,
    pub tokens: Vec<SynthToken>,
}

impl Default for SynthPlan {
    fn default() -> Self {
        let tok = |symbol: &str, decimals: u8, price: Option<&str>| SynthToken {
            symbol: symbol.into(),
            decimals,
            price: price.map(String::from),
        };
        Self {
            seed: 20_230_101,
            block_count: 1_000,
            start_block: 50_000_000,
            start_timestamp: 1_700_000_000,
            block_interval_secs: 2,
            tx_per_block: TxPerBlock { min: 3, max: 9 },
            planted_aa_fraction: 0.3,
            near_miss_fraction: 0.3,
            fastlane_fraction: 0.25,
            searcher_count: 12,
            tokens: vec![
                tok("WMATIC", 18, Some("1")),
                tok("WETH", 18, Some("4012.5")),
                tok("WBTC", 8, Some("98765.4321")),
                tok("USDC", 6, Some("1.92")),
                tok("BUSD", 18, Some("1.9175")),
                tok("LINK", 18, Some("25.03")),
                tok("XNP", 18, None),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PlanError {
    #[error("fraction {0} must lie in [0, 1]")]
    Fraction(&'static str),
    #[error("planted and near-miss fractions sum above 1")]
    FractionSum,
    #[error("tx_per_block.min exceeds tx_per_block.max")]
    TxRange,
    #[error("plan needs at least three priced tokens")]
    TooFewTokens,
    #[error("first token must be priced at exactly 1")]
    CommonCurrency,
    #[error("bad price for {0}")]
    Price(String),
    #[error("duplicate token symbol {0}")]
    DuplicateSymbol(String),
    #[error("searcher_count must be positive")]
    NoSearchers,
    #[error("block_interval_secs must be positive")]
    Interval,
}

impl SynthPlan {
    pub fn validate(&self) -> Result<(), PlanError> {
        let frac = |v: f64, name| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(PlanError::Fraction(name))
            }
        };
        frac(self.planted_aa_fraction, "planted_aa_fraction")?;
        frac(self.near_miss_fraction, "near_miss_fraction")?;
        frac(self.fastlane_fraction, "fastlane_fraction")?;
        if self.planted_aa_fraction + self.near_miss_fraction > 1.0 {
            return Err(PlanError::FractionSum);
        }
        if self.tx_per_block.min > self.tx_per_block.max {
            return Err(PlanError::TxRange);
        }
        if self.searcher_count == 0 {
            return Err(PlanError::NoSearchers);
        }
        if self.block_interval_secs == 0 {
            return Err(PlanError::Interval);
        }
        let mut priced = 0;
        for (i, t) in self.tokens.iter().enumerate() {
            if self.tokens[..i].iter().any(|o| o.symbol == t.symbol) {
                return Err(PlanError::DuplicateSymbol(t.symbol.clone()));
            }
            if let Some(p) = &t.price {
                let r = parse_rational(p).map_err(|_| PlanError::Price(t.symbol.clone()))?;
                if !r.is_positive() {
                    return Err(PlanError::Price(t.symbol.clone()));
                }
                if i == 0 && !r.is_one() {
                    return Err(PlanError::CommonCurrency);
                }
                priced += 1;
            } else if i == 0 {
                return Err(PlanError::CommonCurrency);
            }
        }
        if priced < 3 {
            return Err(PlanError::TooFewTokens);
        }
        Ok(())
    }
}

/// What a generated transaction was built to be.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum PlantKind {
    AtomicArbitrage,
    /// Violates only the multi-swap condition.
    NearMissMultiSwap,
    /// Violates only the sufficiency condition.
    NearMissSufficiency,
    /// Violates only the profitability condition.
    NearMissProfitability,
    NoiseSingleSwap,
    NoiseTokenTransfer,
    NoiseNativeTransfer,
    NoiseReverted,
    NoiseMalformedSwap,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TruthLabel {
    pub kind: PlantKind,
    pub is_aa: bool,
    pub strategy: Strategy,
    pub profit: BigRational,
    pub swap_count: usize,
}

/// Labels keyed by transaction hash.
pub type GroundTruth = BTreeMap<TxHash, TruthLabel>;

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub blocks: Vec<RawBlock>,
    pub truth: GroundTruth,
    pub pools: BTreeMap<Address, PoolMeta>,
    pub config: ClassifierConfig,
    pub symbols: BTreeMap<Address, String>,
}

impl SynthOutput {
    pub fn transaction_count(&self) -> usize {
        self.blocks.iter().map(|b| b.transactions.len()).sum()
    }

    pub fn oracle_world(&self) -> OracleWorld {
        OracleWorld::new(
            self.pools.values(),
            &self.config.price_table,
            self.config.fastlane_addresses.iter().copied(),
            &self.config.bid_event.signature,
            self.config.bid_event.amount_word,
        )
    }
}

/// Deterministic address from a label and a discriminator.
pub fn derive_address(label: &str, parts: &[u64]) -> Address {
    let h = derive_word(label, parts);
    let mut a = [0u8; 20];
    a.copy_from_slice(&h.0[12..]);
    Address(a)
}

fn derive_word(label: &str, parts: &[u64]) -> H256 {
    let mut buf = Vec::with_capacity(label.len() + parts.len() * 8);
    buf.extend_from_slice(label.as_bytes());
    for p in parts {
        buf.extend_from_slice(&p.to_be_bytes());
    }
    H256(keccak256(&buf))
}

#[derive(Debug, Clone)]
struct Token {
    address: Address,
    decimals: u8,
    price: Option<BigRational>,
}

#[derive(Debug, Clone)]
struct LegPlan {
    protocol: Protocol,
    token_in: usize,
    amount_in: BigInt,
    token_out: usize,
    amount_out: BigInt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BidChannel {
    CallValue,
    Event,
    Both,
}

struct Generator<'p> {
    plan: &'p SynthPlan,
    rng: ChaCha8Rng,
    tokens: Vec<Token>,
    pools: BTreeMap<Address, PoolMeta>,
    fastlane: Vec<Address>,
    validators: Vec<Address>,
    bid_spec: BidEventSpec,
    native_price: BigRational,
}

const PROTOCOLS: [Protocol; 4] = Protocol::ALL;

impl<'p> Generator<'p> {
    fn random_raw(&mut self, max_exp: u32) -> BigInt {
        let exp = self.rng.gen_range(0..=max_exp);
        let head = exp.min(18);
        let mantissa = self.rng.gen_range(1..=10u64.pow(head));
        BigInt::from(mantissa) * pow10(exp - head)
    }

    fn priced_tokens(&self) -> Vec<usize> {
        (0..self.tokens.len()).filter(|&i| self.tokens[i].price.is_some()).collect()
    }

    fn unpriced_tokens(&self) -> Vec<usize> {
        (0..self.tokens.len()).filter(|&i| self.tokens[i].price.is_none()).collect()
    }

    fn value_of(&self, token: usize, raw: &BigInt) -> BigRational {
        match &self.tokens[token].price {
            Some(p) => TokenAmount::new(raw.clone(), self.tokens[token].decimals).to_rational() * p,
            None => BigRational::zero(),
        }
    }

    /// Smallest raw amount of `token` worth strictly more than `value × margin`.
    fn raw_above(&self, token: usize, value: &BigRational, margin: &BigRational) -> BigInt {
        let t = &self.tokens[token];
        let price = t.price.as_ref().expect("priced token");
        let raw = value * margin / price * BigRational::from_integer(pow10(t.decimals as u32));
        raw.floor().to_integer() + BigInt::one()
    }

    /// Largest raw amount of `token` worth at most `value × fraction`.
    fn raw_below(&self, token: usize, value: &BigRational, fraction: &BigRational) -> BigInt {
        let t = &self.tokens[token];
        let price = t.price.as_ref().expect("priced token");
        let raw = value * fraction / price * BigRational::from_integer(pow10(t.decimals as u32));
        raw.floor().to_integer()
    }

    fn protocol(&mut self) -> Protocol {
        *PROTOCOLS.choose(&mut self.rng).expect("non-empty")
    }

    fn pool_for(&mut self, protocol: Protocol, a: usize, b: usize) -> PoolMeta {
        let (lo, hi) = if self.tokens[a].address < self.tokens[b].address {
            (a, b)
        } else {
            (b, a)
        };
        let tag = Protocol::ALL.iter().position(|p| *p == protocol).unwrap_or(0) as u64;
        let address = derive_address("synth-pool", &[self.plan.seed, tag, lo as u64, hi as u64]);
        let (t0, t1) = (&self.tokens[lo], &self.tokens[hi]);
        let meta = PoolMeta {
            pool: address,
            protocol,
            tokens: vec![t0.address, t1.address],
            decimals: vec![t0.decimals, t1.decimals],
        };
        self.pools.entry(address).or_insert(meta).clone()
    }

    fn gas(&mut self) -> (u64, u128) {
        let gas_used = self.rng.gen_range(21_000..=1_500_000u64);
        let gwei = self.rng.gen_range(30..=500u128);
        (gas_used, gwei * 1_000_000_000)
    }

    fn wei_value(&self, wei: &BigInt) -> BigRational {
        TokenAmount::native(wei.clone()).to_rational() * &self.native_price
    }

    /// Distinct tokens for a cycle starting (and ending) at `start`.
    fn cycle_path(&mut self, start: usize, len: usize) -> Vec<usize> {
        let mut others: Vec<usize> = (0..self.tokens.len()).filter(|&i| i != start).collect();
        others.shuffle(&mut self.rng);
        let mut path = vec![start];
        path.extend(others.into_iter().take(len - 1));
        path
    }

    /// Legs `start → t1 → … → start`. Every intermediate token nets zero
    /// (or a surplus when `surplus` is set) except `deficit_at`, which nets
    /// `−deficit`. The start token nets `+profit`.
    fn cycle(
        &mut self,
        path: &[usize],
        profit: &BigInt,
        surplus: bool,
        deficit: Option<(usize, BigInt)>,
    ) -> Vec<LegPlan> {
        let start_in = self.random_raw(24);
        let mut legs = Vec::with_capacity(path.len());
        let mut amount_in = start_in.clone();
        for hop in 0..path.len() {
            let token_in = path[hop];
            let last = hop + 1 == path.len();
            let token_out = if last { path[0] } else { path[hop + 1] };
            let amount_out = if last { &start_in + profit } else { self.random_raw(24) };
            let protocol = self.protocol();
            legs.push(LegPlan {
                protocol,
                token_in,
                amount_in: amount_in.clone(),
                token_out,
                amount_out: amount_out.clone(),
            });
            let mut next_in = amount_out;
            if let Some((at, extra)) = &deficit {
                if *at == hop + 1 {
                    next_in += extra;
                }
            }
            if surplus && next_in > BigInt::from(10) && self.rng.gen_bool(0.3) {
                let cut = self.rng.gen_range(2..10u32);
                next_in -= &next_in / BigInt::from(cut);
            }
            amount_in = next_in;
        }
        legs
    }

    fn build(&mut self) -> SynthOutput {
        let plan = self.plan;
        let mut blocks = Vec::with_capacity(plan.block_count as usize);
        let mut truth = GroundTruth::new();
        let searchers: Vec<(Address, Address)> = (0..plan.searcher_count as u64)
            .map(|i| {
                (
                    derive_address("synth-searcher-eoa", &[plan.seed, i]),
                    derive_address("synth-searcher-bot", &[plan.seed, i]),
                )
            })
            .collect();

        for b in 0..plan.block_count {
            let number = plan.start_block + b;
            let timestamp = plan.start_timestamp + b * plan.block_interval_secs;
            let coinbase = *self.validators.choose(&mut self.rng).expect("validators");
            let n_tx = self.rng.gen_range(plan.tx_per_block.min..=plan.tx_per_block.max);
            let mut log_index = 0u64;
            let mut transactions = Vec::with_capacity(n_tx as usize);
            for index in 0..n_tx as u64 {
                let hash = derive_word("synth-tx", &[plan.seed, number, index]);
                let searcher = *searchers.choose(&mut self.rng).expect("searchers");
                let (tx, label) = self.transaction(hash, index, coinbase, searcher, &mut log_index);
                truth.insert(hash, label);
                transactions.push(tx);
            }
            blocks.push(RawBlock {
                number,
                timestamp,
                coinbase,
                transactions,
            });
        }

        let common = self.tokens[0].address;
        let mut prices = PriceTable::native(common, self.tokens[0].decimals);
        let mut symbols = BTreeMap::new();
        for (t, spec) in self.tokens.iter().zip(&plan.tokens) {
            if let Some(p) = &t.price {
                if t.address != common {
                    prices.set(t.address, p.clone(), t.decimals).expect("validated price");
                }
            }
            symbols.insert(t.address, spec.symbol.clone());
        }
        let mut config = ClassifierConfig::new(prices).with_fastlane(self.fastlane.iter().copied());
        config.bid_event = self.bid_spec.clone();
        SynthOutput {
            blocks,
            truth,
            pools: core::mem::take(&mut self.pools),
            config,
            symbols,
        }
    }

    fn transaction(
        &mut self,
        hash: TxHash,
        index: u64,
        coinbase: Address,
        (eoa, bot): (Address, Address),
        log_index: &mut u64,
    ) -> (RawTransaction, TruthLabel) {
        let (gas_used, gas_price) = self.gas();
        let fee = self.wei_value(&(BigInt::from(gas_used) * BigInt::from(gas_price)));
        let roll: f64 = self.rng.gen();
        let plan = self.plan;
        let kind = if roll < plan.planted_aa_fraction {
            PlantKind::AtomicArbitrage
        } else if roll < plan.planted_aa_fraction + plan.near_miss_fraction {
            *[
                PlantKind::NearMissMultiSwap,
                PlantKind::NearMissSufficiency,
                PlantKind::NearMissProfitability,
            ]
            .choose(&mut self.rng)
            .expect("non-empty")
        } else {
            *[
                PlantKind::NoiseSingleSwap,
                PlantKind::NoiseTokenTransfer,
                PlantKind::NoiseNativeTransfer,
                PlantKind::NoiseReverted,
                PlantKind::NoiseMalformedSwap,
            ]
            .choose(&mut self.rng)
            .expect("non-empty")
        };
        let fl_probability = match kind {
            PlantKind::AtomicArbitrage
            | PlantKind::NearMissMultiSwap
            | PlantKind::NearMissSufficiency
            | PlantKind::NearMissProfitability => plan.fastlane_fraction,
            _ => plan.fastlane_fraction / 2.0,
        };
        let fastlane = self.rng.gen_bool(fl_probability);
        let bid_wei = if fastlane {
            self.random_bid()
        } else {
            BigInt::zero()
        };
        let succeeded = kind != PlantKind::NoiseReverted;
        let bid_value = if succeeded {
            self.wei_value(&bid_wei)
        } else {
            BigRational::zero()
        };
        let costs = &fee + &bid_value;

        let priced = self.priced_tokens();
        let mut legs: Vec<LegPlan> = Vec::new();
        let mut extra_logs: Vec<RawLog> = Vec::new();
        let mut to = Some(bot);
        let mut value = BigInt::zero();

        match kind {
            PlantKind::AtomicArbitrage => {
                let start = *priced.choose(&mut self.rng).expect("priced");
                let len = self.rng.gen_range(2..=4usize).min(self.tokens.len());
                let path = self.cycle_path(start, len);
                let margin = BigRational::new(self.rng.gen_range(100..=5_000u32).into(), 100.into());
                let profit = self.raw_above(start, &costs, &margin);
                legs = self.cycle(&path, &profit, true, None);
            }
            PlantKind::NearMissMultiSwap => {
                // A single leg that receives tokens without paying: sufficient
                // and profitable, but only one swap.
                let out = *priced.choose(&mut self.rng).expect("priced");
                let mut inp = self.rng.gen_range(0..self.tokens.len());
                if inp == out {
                    inp = (inp + 1) % self.tokens.len();
                }
                let margin = BigRational::new(self.rng.gen_range(100..=5_000u32).into(), 100.into());
                let amount_out = self.raw_above(out, &costs, &margin);
                let protocol = self.protocol();
                legs.push(LegPlan {
                    protocol,
                    token_in: inp,
                    amount_in: BigInt::zero(),
                    token_out: out,
                    amount_out,
                });
            }
            PlantKind::NearMissSufficiency => {
                let start = *priced.choose(&mut self.rng).expect("priced");
                let len = self.rng.gen_range(2..=4usize).min(self.tokens.len());
                let path = self.cycle_path(start, len);
                let at = self.rng.gen_range(1..path.len());
                let short_token = path[at];
                let deficit = self.random_raw(20);
                let deficit_value = self.value_of(short_token, &deficit);
                let margin = BigRational::new(self.rng.gen_range(100..=5_000u32).into(), 100.into());
                let profit = self.raw_above(start, &(&costs + &deficit_value), &margin);
                legs = self.cycle(&path, &profit, false, Some((at, deficit)));
            }
            PlantKind::NearMissProfitability => {
                let unpriced = self.unpriced_tokens();
                let use_unpriced = !unpriced.is_empty() && self.rng.gen_bool(0.25);
                let start = if use_unpriced {
                    *unpriced.choose(&mut self.rng).expect("unpriced")
                } else {
                    *priced.choose(&mut self.rng).expect("priced")
                };
                let len = self.rng.gen_range(2..=4usize).min(self.tokens.len());
                let path = self.cycle_path(start, len);
                let profit = if use_unpriced {
                    self.random_raw(24)
                } else if self.rng.gen_bool(0.1) {
                    BigInt::zero()
                } else {
                    let fraction = BigRational::new(self.rng.gen_range(0..100u32).into(), 100.into());
                    self.raw_below(start, &costs, &fraction)
                };
                legs = self.cycle(&path, &profit, false, None);
            }
            PlantKind::NoiseSingleSwap => {
                let a = self.rng.gen_range(0..self.tokens.len());
                let b = (a + self.rng.gen_range(1..self.tokens.len())) % self.tokens.len();
                let amount_in = self.random_raw(24);
                let amount_out = self.random_raw(24);
                let protocol = self.protocol();
                legs.push(LegPlan {
                    protocol,
                    token_in: a,
                    amount_in,
                    token_out: b,
                    amount_out,
                });
            }
            PlantKind::NoiseTokenTransfer => {
                let token = self.rng.gen_range(0..self.tokens.len());
                let amount = self.random_raw(24);
                let recipient = derive_address("synth-recipient", &[self.rng.gen()]);
                extra_logs.push(RawLog {
                    emitter: self.tokens[token].address,
                    topics: vec![
                        event_topic("Transfer(address,address,uint256)"),
                        eoa.to_word(),
                        recipient.to_word(),
                    ],
                    data: encode_unsigned(&amount).expect("fits").0.to_vec(),
                    log_index: 0,
                });
                to = Some(self.tokens[token].address);
            }
            PlantKind::NoiseNativeTransfer => {
                to = Some(derive_address("synth-recipient", &[self.rng.gen()]));
                value = self.random_raw(21);
            }
            PlantKind::NoiseReverted => {
                let start = *priced.choose(&mut self.rng).expect("priced");
                let path = self.cycle_path(start, 2);
                let profit = self.random_raw(22);
                legs = self.cycle(&path, &profit, false, None);
            }
            PlantKind::NoiseMalformedSwap => {
                let a = self.rng.gen_range(0..self.tokens.len());
                let b = (a + 1) % self.tokens.len();
                let pool = self.pool_for(Protocol::UniV2, a, b);
                extra_logs.push(RawLog {
                    emitter: pool.pool,
                    topics: vec![
                        event_topic(crate::decode::UNIV2_SWAP_SIGNATURE),
                        bot.to_word(),
                        bot.to_word(),
                    ],
                    data: vec![0u8; 128],
                    log_index: 0,
                });
            }
        }

        let channel = if fastlane {
            Some(*[BidChannel::CallValue, BidChannel::Event, BidChannel::Both].choose(&mut self.rng).expect("non-empty"))
        } else {
            None
        };
        let relay = if fastlane {
            Some(*self.fastlane.choose(&mut self.rng).expect("fastlane"))
        } else {
            None
        };
        if let (Some(channel), Some(relay)) = (channel, relay) {
            if matches!(channel, BidChannel::CallValue | BidChannel::Both) {
                to = Some(relay);
                value = bid_wei.clone();
            }
            if matches!(channel, BidChannel::Event | BidChannel::Both) {
                let mut data = encode_unsigned(&bid_wei).expect("fits").0.to_vec();
                data.extend_from_slice(&bot.to_word().0);
                extra_logs.push(RawLog {
                    emitter: relay,
                    topics: vec![
                        event_topic(&self.bid_spec.signature),
                        eoa.to_word(),
                        derive_word("synth-opportunity", &[self.rng.gen()]),
                        coinbase.to_word(),
                    ],
                    data,
                    log_index: 0,
                });
            }
        }

        // Ground truth from the planted legs.
        let mut gross = BigRational::zero();
        let mut tally: BTreeMap<usize, BigInt> = BTreeMap::new();
        for leg in &legs {
            gross += self.value_of(leg.token_out, &leg.amount_out);
            gross -= self.value_of(leg.token_in, &leg.amount_in);
            *tally.entry(leg.token_out).or_default() += &leg.amount_out;
            *tally.entry(leg.token_in).or_default() -= &leg.amount_in;
        }
        let swap_count = if succeeded { legs.len() } else { 0 };
        if !succeeded {
            gross = BigRational::zero();
        }
        let profit = &gross - &costs;
        let is_aa = kind == PlantKind::AtomicArbitrage;
        debug_assert_eq!(
            is_aa,
            swap_count >= 2 && tally.values().all(|v| !v.is_negative()) && profit.is_positive(),
            "{kind:?}"
        );
        let strategy = match (is_aa, fastlane) {
            (false, _) => Strategy::NotAA,
            (true, true) => Strategy::FastLaneBased,
            (true, false) => Strategy::SpamBased,
        };

        let mut logs: Vec<RawLog> = Vec::new();
        for leg in &legs {
            logs.push(self.encode_leg(leg, hash, bot));
        }
        for log in extra_logs {
            let at = self.rng.gen_range(0..=logs.len());
            logs.insert(at, log);
        }
        for log in &mut logs {
            log.log_index = *log_index;
            *log_index += 1;
        }

        let tx = RawTransaction {
            hash,
            index,
            from: eoa,
            to,
            value: TokenAmount::native(value),
            gas_used,
            effective_gas_price: gas_price,
            status: if succeeded { TxStatus::Success } else { TxStatus::Failure },
            logs,
        };
        let label = TruthLabel {
            kind,
            is_aa,
            strategy,
            profit,
            swap_count,
        };
        (tx, label)
    }

    fn random_bid(&mut self) -> BigInt {
        // 0.01 .. ~50 native
        let cents = self.rng.gen_range(1..=5_000u64);
        BigInt::from(cents) * pow10(16)
    }

    fn encode_leg(&mut self, leg: &LegPlan, hash: TxHash, bot: Address) -> RawLog {
        let meta = self.pool_for(leg.protocol, leg.token_in, leg.token_out);
        let event = SwapEvent {
            pool: meta.pool,
            protocol: leg.protocol,
            token_in: self.tokens[leg.token_in].address,
            token_out: self.tokens[leg.token_out].address,
            amount_in: TokenAmount::new(leg.amount_in.clone(), self.tokens[leg.token_in].decimals),
            amount_out: TokenAmount::new(leg.amount_out.clone(), self.tokens[leg.token_out].decimals),
            recipient: (leg.protocol != Protocol::BalancerV2).then_some(bot),
            log_index: 0,
            tx_hash: hash,
        };
        encode_swap(&event, Some(&meta), BALANCER_VAULT).expect("generated legs are encodable")
    }
}

/// Generates the ledger described by `plan`. Pure: the same plan always
/// yields the same output.
pub fn generate(plan: &SynthPlan) -> Result<SynthOutput, PlanError> {
    plan.validate()?;
    let tokens = plan
        .tokens
        .iter()
        .enumerate()
        .map(|(i, t)| Token {
            address: derive_address("synth-token", &[plan.seed, i as u64]),
            decimals: t.decimals,
            price: t.price.as_deref().map(|p| parse_rational(p).expect("validated")),
        })
        .collect();
    let mut generator = Generator {
        plan,
        rng: ChaCha8Rng::seed_from_u64(plan.seed),
        tokens,
        pools: BTreeMap::new(),
        fastlane: (0..2).map(|i| derive_address("synth-fastlane", &[plan.seed, i])).collect(),
        validators: (0..4).map(|i| derive_address("synth-validator", &[plan.seed, i])).collect(),
        bid_spec: BidEventSpec::default(),
        native_price: BigRational::one(),
    };
    Ok(generator.build())
}
