//! Atomic-arbitrage verdicts.
//!
//! A transaction is an atomic arbitrage when all three conditions hold:
//!
//! 1. multi-swap: it contains at least two decoded swap legs;
//! 2. sufficiency: no token ends with a net loss, i.e. `Δ(A) ≥ 0` for every
//!    token touched by a leg (relaxed by an optional per-token dust allowance);
//! 3. profitability: `Σ Δ(A)·P(A) − τ − β > 0`, where `τ` is the gas fee and
//!    `β` the bid paid for prioritization, all in the common currency.
//!
//! Δ is measured for the transaction as a single economic agent: every leg's
//! taker-side flow is summed regardless of which contract routed it.
//!
//! Arbitrages that touch a configured FastLane address are FastLane-based; the
//! rest are spam-based.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};

use crate::abi::{decode_uint, event_topic, word_at};
use crate::amount::TokenAmount;
use crate::decode::{DecodeDiagnostics, Decoder, PoolRegistry, SwapEvent};
use crate::delta::DeltaVector;
use crate::price::PriceTable;
use crate::types::{Address, RawBlock, RawTransaction, TxHash, H256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Strategy {
    FastLaneBased,
    SpamBased,
    NotAA,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum UnpricedTokenPolicy {
    /// Unpriced tokens contribute nothing to the gross value.
    #[default]
    Conservative,
    /// Any unpriced token with a non-zero delta makes the value undefined.
    Reject,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum SearcherIdentity {
    /// The externally owned account that signed the transaction.
    #[default]
    From,
    /// The contract the transaction calls (falls back to `from` on creation).
    To,
}

/// Event emitted by a FastLane contract that carries a bid amount (wei) in
/// one of its data words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BidEventSpec {
    pub signature: String,
    pub amount_word: usize,
}

/// `RelayFlashBid(address indexed sender, uint256 amount, bytes32 indexed
/// oppTxHash, address indexed validator, address searcherContractAddress)`.
pub const FASTLANE_BID_SIGNATURE: &str = "RelayFlashBid(address,uint256,bytes32,address,address)";

impl Default for BidEventSpec {
    fn default() -> Self {
        Self {
            signature: String::from(FASTLANE_BID_SIGNATURE),
            amount_word: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassifierConfig {
    pub price_table: PriceTable,
    /// Per-token allowance below zero still accepted by the sufficiency test.
    pub dust_threshold: BTreeMap<Address, BigInt>,
    pub fastlane_addresses: BTreeSet<Address>,
    pub unpriced_token_policy: UnpricedTokenPolicy,
    pub searcher_identity: SearcherIdentity,
    pub bid_event: BidEventSpec,
}

impl ClassifierConfig {
    pub fn new(price_table: PriceTable) -> Self {
        Self {
            price_table,
            dust_threshold: BTreeMap::new(),
            fastlane_addresses: BTreeSet::new(),
            unpriced_token_policy: UnpricedTokenPolicy::default(),
            searcher_identity: SearcherIdentity::default(),
            bid_event: BidEventSpec::default(),
        }
    }

    pub fn with_fastlane(mut self, addrs: impl IntoIterator<Item = Address>) -> Self {
        self.fastlane_addresses.extend(addrs);
        self
    }

    pub fn dust(&self, token: &Address) -> BigInt {
        self.dust_threshold.get(token).cloned().unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ClassifyError {
    #[error("no price for tokens with non-zero delta: {0:?}")]
    Unpriceable(Vec<Address>),
}

/// Outcome of each condition for one transaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConditionChecks {
    pub multi_swap: bool,
    pub sufficiency: bool,
    pub profitability: bool,
}

impl ConditionChecks {
    pub fn all(&self) -> bool {
        self.multi_swap && self.sufficiency && self.profitability
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Classification {
    pub tx_hash: TxHash,
    pub block_number: u64,
    pub tx_index: u64,
    pub timestamp: u64,
    pub is_aa: bool,
    pub strategy: Strategy,
    pub swap_count: usize,
    pub delta: DeltaVector,
    /// `Σ Δ(A)·P(A)` in the common currency.
    pub gross_value: BigRational,
    pub tau: BigRational,
    pub beta: BigRational,
    pub profit: BigRational,
    pub searcher: Address,
    pub is_fastlane: bool,
    pub checks: ConditionChecks,
    pub diagnostic: Option<ClassifyError>,
}

impl Classification {
    /// `gross_value − τ − β`, recomputed from the stored parts.
    pub fn recomputed_profit(&self) -> BigRational {
        &self.gross_value - &self.tau - &self.beta
    }
}

/// Block fields the classifier needs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockInfo {
    pub number: u64,
    pub timestamp: u64,
    pub coinbase: Address,
}

impl From<&RawBlock> for BlockInfo {
    fn from(b: &RawBlock) -> Self {
        Self {
            number: b.number,
            timestamp: b.timestamp,
            coinbase: b.coinbase,
        }
    }
}

/// δ of one leg: `+amount_out` of `token_out`, `−amount_in` of `token_in`.
pub fn swap_delta(s: &SwapEvent) -> DeltaVector {
    let mut d = DeltaVector::new();
    d.credit(s.token_out, &s.amount_out.raw);
    d.debit(s.token_in, &s.amount_in.raw);
    d
}

/// Δ over all legs.
pub fn net_delta<'a>(swaps: impl IntoIterator<Item = &'a SwapEvent>) -> DeltaVector {
    let mut total = DeltaVector::new();
    for s in swaps {
        total += &swap_delta(s);
    }
    total
}

fn native_to_common(wei: BigInt, prices: &PriceTable) -> BigRational {
    let whole = TokenAmount::native(wei).to_rational();
    match prices.native_price() {
        Some(p) => whole * p,
        // An unpriced native coin cannot be converted; count it at par.
        None => whole,
    }
}

/// τ: `gas_used × effective_gas_price` wei, in the common currency.
pub fn compute_fee(tx: &RawTransaction, prices: &PriceTable) -> BigRational {
    let wei = BigInt::from(tx.gas_used) * BigInt::from(tx.effective_gas_price);
    native_to_common(wei, prices)
}

/// Bid amounts (wei) found in FastLane-emitted bid events.
pub fn bid_log_amounts(tx: &RawTransaction, cfg: &ClassifierConfig) -> Vec<BigInt> {
    let topic: H256 = event_topic(&cfg.bid_event.signature);
    tx.logs
        .iter()
        .filter(|l| cfg.fastlane_addresses.contains(&l.emitter) && l.topic0() == Some(&topic))
        .filter_map(|l| word_at(&l.data, cfg.bid_event.amount_word).ok())
        .map(|w| BigInt::from(decode_uint(&w)))
        .collect()
}

/// β in the common currency.
///
/// Two observable bid channels exist without call traces: native value sent
/// by the top-level call to a FastLane contract, and bid events emitted by
/// FastLane contracts. A relay both receives the bid as call value and logs
/// it, so the two channels are not summed; the larger one is taken. A
/// reverted transaction transfers nothing.
pub fn compute_bid(tx: &RawTransaction, cfg: &ClassifierConfig) -> BigRational {
    if !tx.succeeded() {
        return BigRational::zero();
    }
    let top_level = match tx.to {
        Some(to) if cfg.fastlane_addresses.contains(&to) => tx.value.raw.clone(),
        _ => BigInt::zero(),
    };
    let logged: BigInt = bid_log_amounts(tx, cfg).into_iter().sum();
    native_to_common(top_level.max(logged), &cfg.price_table)
}

pub fn is_fastlane(tx: &RawTransaction, cfg: &ClassifierConfig) -> bool {
    let routed = tx.to.is_some_and(|to| cfg.fastlane_addresses.contains(&to));
    routed || tx.logs.iter().any(|l| cfg.fastlane_addresses.contains(&l.emitter))
}

/// `Σ Δ(A)/10^decimals × P(A)` over the vector.
pub fn priced_value(
    d: &DeltaVector,
    prices: &PriceTable,
    policy: UnpricedTokenPolicy,
) -> Result<BigRational, ClassifyError> {
    let mut total = BigRational::zero();
    let mut missing = Vec::new();
    for (token, amount) in d.iter() {
        match prices.get(token) {
            Some(p) => total += TokenAmount::new(amount.clone(), p.decimals).to_rational() * &p.price,
            None => missing.push(*token),
        }
    }
    match policy {
        UnpricedTokenPolicy::Reject if !missing.is_empty() => Err(ClassifyError::Unpriceable(missing)),
        _ => Ok(total),
    }
}

pub fn searcher_of(tx: &RawTransaction, identity: SearcherIdentity) -> Address {
    match identity {
        SearcherIdentity::From => tx.from,
        SearcherIdentity::To => tx.to.unwrap_or(tx.from),
    }
}

/// Applies the three conditions to one transaction's decoded legs.
pub fn evaluate(tx: &RawTransaction, block: BlockInfo, swaps: &[SwapEvent], cfg: &ClassifierConfig) -> Classification {
    let delta = net_delta(swaps);
    let tau = compute_fee(tx, &cfg.price_table);
    let beta = compute_bid(tx, cfg);
    let fastlane = is_fastlane(tx, cfg);

    let (gross_value, diagnostic) = match priced_value(&delta, &cfg.price_table, cfg.unpriced_token_policy) {
        Ok(v) => (v, None),
        Err(e) => (BigRational::zero(), Some(e)),
    };
    let profit = &gross_value - &tau - &beta;

    let checks = ConditionChecks {
        multi_swap: swaps.len() >= 2,
        sufficiency: delta.deficits().all(|(token, amount)| -amount <= cfg.dust(token)),
        profitability: diagnostic.is_none() && profit.is_positive(),
    };
    let is_aa = checks.all();
    let strategy = match (is_aa, fastlane) {
        (false, _) => Strategy::NotAA,
        (true, true) => Strategy::FastLaneBased,
        (true, false) => Strategy::SpamBased,
    };

    Classification {
        tx_hash: tx.hash,
        block_number: block.number,
        tx_index: tx.index,
        timestamp: block.timestamp,
        is_aa,
        strategy,
        swap_count: swaps.len(),
        delta,
        gross_value,
        tau,
        beta,
        profit,
        searcher: searcher_of(tx, cfg.searcher_identity),
        is_fastlane: fastlane,
        checks,
        diagnostic,
    }
}

/// Classifications of every transaction in a block plus decode diagnostics.
#[derive(Debug, Clone, Default)]
pub struct BlockOutcome {
    pub classifications: Vec<Classification>,
    pub diagnostics: DecodeDiagnostics,
}

/// Decodes and classifies every transaction of `block` in index order.
pub fn classify_block<R: PoolRegistry>(block: &RawBlock, decoder: &Decoder<R>, cfg: &ClassifierConfig) -> BlockOutcome {
    let info = BlockInfo::from(block);
    let mut out = BlockOutcome::default();
    for tx in &block.transactions {
        let decoded = decoder.decode_transaction(tx);
        out.diagnostics.merge(&decoded.diagnostics);
        out.classifications.push(evaluate(tx, info, &decoded.swaps, cfg));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decode::Protocol;
    use crate::types::{TxStatus, H256};
    use alloc::vec;

    fn addr(b: u8) -> Address {
        Address([b; 20])
    }

    fn leg(token_in: u8, amount_in: i64, token_out: u8, amount_out: i64, log_index: u64) -> SwapEvent {
        SwapEvent {
            pool: addr(100 + log_index as u8),
            protocol: Protocol::UniV2,
            token_in: addr(token_in),
            token_out: addr(token_out),
            amount_in: TokenAmount::new(amount_in, 18),
            amount_out: TokenAmount::new(amount_out, 18),
            recipient: None,
            log_index,
            tx_hash: H256::ZERO,
        }
    }

    fn tx(to: u8, value: i64, gas_used: u64, price: u128) -> RawTransaction {
        RawTransaction {
            hash: H256([1; 32]),
            index: 0,
            from: addr(0xee),
            to: Some(addr(to)),
            value: TokenAmount::native(value),
            gas_used,
            effective_gas_price: price,
            status: TxStatus::Success,
            logs: vec![],
        }
    }

    fn cfg() -> ClassifierConfig {
        let prices = PriceTable::native(addr(1), 18)
            .with(addr(2), BigRational::from_integer(2.into()), 18)
            .unwrap();
        ClassifierConfig::new(prices).with_fastlane([addr(0xfa)])
    }

    const BLOCK: BlockInfo = BlockInfo {
        number: 1,
        timestamp: 0,
        coinbase: Address([0xcb; 20]),
    };

    #[test]
    fn swap_delta_sign_structure() {
        let d = swap_delta(&leg(1, 10, 2, 10, 0));
        assert_eq!(d.get(&addr(1)), BigInt::from(-10));
        assert_eq!(d.get(&addr(2)), BigInt::from(10));
        assert_eq!(d.len(), 2);
    }

    #[test]
    fn net_delta_empty_and_permuted() {
        assert!(net_delta(&[]).is_empty());
        let a = leg(1, 10, 2, 12, 0);
        let b = leg(2, 12, 1, 11, 1);
        assert_eq!(net_delta(&[a.clone(), b.clone()]), net_delta(&[b, a]));
    }

    #[test]
    fn fee_cases() {
        let prices = cfg().price_table;
        assert!(compute_fee(&tx(5, 0, 0, 50_000_000_000), &prices).is_zero());
        assert_eq!(
            compute_fee(&tx(5, 0, 100_000, 50_000_000_000), &prices),
            BigRational::new(5.into(), 1000.into())
        );
    }

    #[test]
    fn bid_channels() {
        let c = cfg();
        assert!(compute_bid(&tx(5, 0, 0, 0), &c).is_zero());
        let two = 2_000_000_000_000_000_000i64;
        assert_eq!(compute_bid(&tx(0xfa, two, 0, 0), &c), BigRational::from_integer(2.into()));
        // Value to a non-FastLane address is not a bid.
        assert!(compute_bid(&tx(5, two, 0, 0), &c).is_zero());
    }

    #[test]
    fn fastlane_membership() {
        let c = cfg();
        assert!(!is_fastlane(&tx(5, 0, 0, 0), &c));
        assert!(is_fastlane(&tx(0xfa, 0, 0, 0), &c));
        let mut t = tx(5, 0, 0, 0);
        t.logs.push(crate::types::RawLog {
            emitter: addr(0xfa),
            topics: vec![],
            data: vec![],
            log_index: 0,
        });
        assert!(is_fastlane(&t, &c));
    }

    #[test]
    fn priced_value_policies() {
        let c = cfg();
        assert!(priced_value(&DeltaVector::new(), &c.price_table, UnpricedTokenPolicy::Reject)
            .unwrap()
            .is_zero());
        let unpriced: DeltaVector = [(addr(9), BigInt::from(5))].into_iter().collect();
        assert!(priced_value(&unpriced, &c.price_table, UnpricedTokenPolicy::Conservative)
            .unwrap()
            .is_zero());
        assert_eq!(
            priced_value(&unpriced, &c.price_table, UnpricedTokenPolicy::Reject),
            Err(ClassifyError::Unpriceable(vec![addr(9)]))
        );
    }

    #[test]
    fn reject_policy_yields_not_aa_with_diagnostic() {
        let mut c = cfg();
        c.unpriced_token_policy = UnpricedTokenPolicy::Reject;
        let swaps = [leg(1, 10, 9, 12, 0), leg(9, 12, 1, 20, 1)];
        let cl = evaluate(&tx(5, 0, 0, 0), BLOCK, &swaps, &c);
        assert!(cl.diagnostic.is_none());
        assert!(cl.is_aa);
        let swaps = [leg(1, 10, 9, 13, 0), leg(9, 12, 1, 20, 1)];
        let cl = evaluate(&tx(5, 0, 0, 0), BLOCK, &swaps, &c);
        assert!(matches!(cl.diagnostic, Some(ClassifyError::Unpriceable(_))));
        assert_eq!(cl.strategy, Strategy::NotAA);
        assert_eq!(cl.recomputed_profit(), cl.profit);
    }

    #[test]
    fn dust_allowance_relaxes_sufficiency() {
        let mut c = cfg();
        let swaps = [leg(1, 10, 2, 12, 0), leg(2, 13, 1, 20, 1)];
        assert!(!evaluate(&tx(5, 0, 0, 0), BLOCK, &swaps, &c).is_aa);
        c.dust_threshold.insert(addr(2), BigInt::from(1));
        assert!(evaluate(&tx(5, 0, 0, 0), BLOCK, &swaps, &c).is_aa);
    }

    #[test]
    fn searcher_identity() {
        let t = tx(5, 0, 0, 0);
        assert_eq!(searcher_of(&t, SearcherIdentity::From), addr(0xee));
        assert_eq!(searcher_of(&t, SearcherIdentity::To), addr(5));
        let mut creation = t;
        creation.to = None;
        assert_eq!(searcher_of(&creation, SearcherIdentity::To), addr(0xee));
    }
}
