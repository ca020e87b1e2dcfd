//! Fixed-width time-bucket aggregation of classifications.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use num_rational::BigRational;
use num_traits::{Signed, Zero};

use crate::classify::{Classification, Strategy};
use crate::types::{Address, TxHash};

pub const DAY_SECS: u64 = 86_400;
pub const DEFAULT_BUCKET_SECS: u64 = 28 * DAY_SECS;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AnalyticsError {
    #[error("timestamp {timestamp} precedes epoch start {epoch_start}")]
    BeforeEpoch { timestamp: u64, epoch_start: u64 },
    #[error("bucket length must be positive")]
    ZeroBucket,
    #[error("USD rate at {0} is not positive")]
    NonPositiveRate(u64),
    #[error("USD rate timestamps must be strictly increasing (at {0})")]
    RateOrder(u64),
    #[error("USD rate series has a gap longer than one day after {0}")]
    RateGap(u64),
}

pub fn bucketize(timestamp: u64, epoch_start: u64, bucket_secs: u64) -> Result<u64, AnalyticsError> {
    if bucket_secs == 0 {
        return Err(AnalyticsError::ZeroBucket);
    }
    timestamp
        .checked_sub(epoch_start)
        .map(|d| d / bucket_secs)
        .ok_or(AnalyticsError::BeforeEpoch {
            timestamp,
            epoch_start,
        })
}

/// Transactions removed from every aggregate, with the reason for each.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExclusionList {
    entries: BTreeMap<TxHash, String>,
}

impl ExclusionList {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, hash: TxHash, reason: impl Into<String>) {
        self.entries.insert(hash, reason.into());
    }

    pub fn contains(&self, hash: &TxHash) -> bool {
        self.entries.contains_key(hash)
    }

    pub fn reason(&self, hash: &TxHash) -> Option<&str> {
        self.entries.get(hash).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&TxHash, &str)> {
        self.entries.iter().map(|(h, r)| (h, r.as_str()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Common-currency → USD rates as a step function.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UsdRateSeries {
    points: Vec<(u64, BigRational)>,
}

impl UsdRateSeries {
    /// Rates must be positive, strictly increasing in time, and at most one
    /// day apart.
    pub fn new(points: Vec<(u64, BigRational)>) -> Result<Self, AnalyticsError> {
        for (i, (ts, rate)) in points.iter().enumerate() {
            if !rate.is_positive() {
                return Err(AnalyticsError::NonPositiveRate(*ts));
            }
            if i > 0 {
                let prev = points[i - 1].0;
                if *ts <= prev {
                    return Err(AnalyticsError::RateOrder(*ts));
                }
                if ts - prev > DAY_SECS {
                    return Err(AnalyticsError::RateGap(prev));
                }
            }
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[(u64, BigRational)] {
        &self.points
    }

    /// The latest rate at or before `timestamp`; timestamps before the first
    /// point use the first rate. `None` only for an empty series.
    pub fn rate_at(&self, timestamp: u64) -> Option<&BigRational> {
        let idx = self.points.partition_point(|(ts, _)| *ts <= timestamp);
        let idx = idx.saturating_sub(1);
        self.points.get(idx).map(|(_, r)| r)
    }
}

/// Mergeable per-bucket partial sums.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BucketAccumulator {
    pub spam_count: u64,
    pub fastlane_count: u64,
    pub spam_mev: BigRational,
    pub fastlane_mev: BigRational,
    pub spam_mev_usd: BigRational,
    pub fastlane_mev_usd: BigRational,
    pub bids_total: BigRational,
    pub fastlane_bids: BigRational,
    pub spam_searchers: BTreeSet<Address>,
    pub fastlane_searchers: BTreeSet<Address>,
}

impl BucketAccumulator {
    pub fn add(&mut self, c: &Classification, usd_rate: Option<&BigRational>) {
        let usd = usd_rate.map(|r| &c.profit * r).unwrap_or_default();
        match c.strategy {
            Strategy::NotAA => return,
            Strategy::SpamBased => {
                self.spam_count += 1;
                self.spam_mev += &c.profit;
                self.spam_mev_usd += usd;
                self.spam_searchers.insert(c.searcher);
            }
            Strategy::FastLaneBased => {
                self.fastlane_count += 1;
                self.fastlane_mev += &c.profit;
                self.fastlane_mev_usd += usd;
                self.fastlane_bids += &c.beta;
                self.fastlane_searchers.insert(c.searcher);
            }
        }
        self.bids_total += &c.beta;
    }

    /// Commutative, associative merge; searcher sets are unioned.
    pub fn merge(&mut self, other: &BucketAccumulator) {
        self.spam_count += other.spam_count;
        self.fastlane_count += other.fastlane_count;
        self.spam_mev += &other.spam_mev;
        self.fastlane_mev += &other.fastlane_mev;
        self.spam_mev_usd += &other.spam_mev_usd;
        self.fastlane_mev_usd += &other.fastlane_mev_usd;
        self.bids_total += &other.bids_total;
        self.fastlane_bids += &other.fastlane_bids;
        self.spam_searchers.extend(other.spam_searchers.iter().copied());
        self.fastlane_searchers.extend(other.fastlane_searchers.iter().copied());
    }

    pub fn to_row(&self, bucket_index: u64, bucket_start: u64, with_usd: bool) -> AggregateRow {
        let share = |part: &BigRational, whole: BigRational| (!whole.is_zero()).then(|| part / whole);
        let total_count = BigRational::from_integer((self.spam_count + self.fastlane_count).into());
        let fl_count = BigRational::from_integer(self.fastlane_count.into());
        AggregateRow {
            bucket_index,
            bucket_start,
            aa_tx_count_spam: self.spam_count,
            aa_tx_count_fastlane: self.fastlane_count,
            mev_volume_spam: self.spam_mev.clone(),
            mev_volume_fastlane: self.fastlane_mev.clone(),
            mev_usd_spam: with_usd.then(|| self.spam_mev_usd.clone()),
            mev_usd_fastlane: with_usd.then(|| self.fastlane_mev_usd.clone()),
            bids_total: self.bids_total.clone(),
            unique_searchers_spam: self.spam_searchers.len() as u64,
            unique_searchers_fastlane: self.fastlane_searchers.len() as u64,
            fastlane_tx_share: share(&fl_count, total_count),
            fastlane_mev_share: share(&self.fastlane_mev, &self.fastlane_mev + &self.spam_mev),
            bid_to_mev_ratio: share(&self.fastlane_bids, self.fastlane_mev.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AggregateRow {
    pub bucket_index: u64,
    pub bucket_start: u64,
    pub aa_tx_count_spam: u64,
    pub aa_tx_count_fastlane: u64,
    pub mev_volume_spam: BigRational,
    pub mev_volume_fastlane: BigRational,
    pub mev_usd_spam: Option<BigRational>,
    pub mev_usd_fastlane: Option<BigRational>,
    /// β summed over all AA transactions.
    pub bids_total: BigRational,
    pub unique_searchers_spam: u64,
    pub unique_searchers_fastlane: u64,
    /// `None` when the bucket has no AA transactions.
    pub fastlane_tx_share: Option<BigRational>,
    pub fastlane_mev_share: Option<BigRational>,
    /// FastLane β over FastLane MEV; `None` when there is no FastLane MEV.
    pub bid_to_mev_ratio: Option<BigRational>,
}

/// A record rejected by the aggregator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedRecord {
    pub tx_hash: TxHash,
    pub error: AnalyticsError,
}

/// Streaming aggregator. Rows cover every bucket between the first and last
/// bucket that received a record (AA or not), gaps included.
#[derive(Debug, Clone)]
pub struct Aggregator<'a> {
    epoch_start: u64,
    bucket_secs: u64,
    exclusions: &'a ExclusionList,
    usd_rates: Option<&'a UsdRateSeries>,
    buckets: BTreeMap<u64, BucketAccumulator>,
    skipped: Vec<SkippedRecord>,
    excluded: u64,
}

impl<'a> Aggregator<'a> {
    pub fn new(
        epoch_start: u64,
        bucket_secs: u64,
        exclusions: &'a ExclusionList,
        usd_rates: Option<&'a UsdRateSeries>,
    ) -> Result<Self, AnalyticsError> {
        if bucket_secs == 0 {
            return Err(AnalyticsError::ZeroBucket);
        }
        Ok(Self {
            epoch_start,
            bucket_secs,
            exclusions,
            usd_rates,
            buckets: BTreeMap::new(),
            skipped: Vec::new(),
            excluded: 0,
        })
    }

    pub fn push(&mut self, c: &Classification) {
        if self.exclusions.contains(&c.tx_hash) {
            self.excluded += 1;
            return;
        }
        match bucketize(c.timestamp, self.epoch_start, self.bucket_secs) {
            Ok(b) => {
                let rate = self.usd_rates.and_then(|s| s.rate_at(c.timestamp));
                self.buckets.entry(b).or_default().add(c, rate);
            }
            Err(error) => self.skipped.push(SkippedRecord {
                tx_hash: c.tx_hash,
                error,
            }),
        }
    }

    /// Folds another aggregator's partial buckets into this one.
    pub fn merge(&mut self, other: Aggregator<'_>) {
        for (b, acc) in other.buckets {
            self.buckets.entry(b).or_default().merge(&acc);
        }
        self.skipped.extend(other.skipped);
        self.excluded += other.excluded;
    }

    pub fn skipped(&self) -> &[SkippedRecord] {
        &self.skipped
    }

    pub fn excluded(&self) -> u64 {
        self.excluded
    }

    pub fn rows(&self) -> Vec<AggregateRow> {
        let (Some(&first), Some(&last)) = (self.buckets.keys().next(), self.buckets.keys().next_back()) else {
            return Vec::new();
        };
        let empty = BucketAccumulator::default();
        let with_usd = self.usd_rates.is_some();
        (first..=last)
            .map(|b| {
                let start = self.epoch_start + b * self.bucket_secs;
                self.buckets.get(&b).unwrap_or(&empty).to_row(b, start, with_usd)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Aggregation {
    pub rows: Vec<AggregateRow>,
    pub skipped: Vec<SkippedRecord>,
    pub excluded: u64,
}

pub fn aggregate<'c>(
    records: impl IntoIterator<Item = &'c Classification>,
    exclusions: &ExclusionList,
    usd_rates: Option<&UsdRateSeries>,
    epoch_start: u64,
    bucket_secs: u64,
) -> Result<Aggregation, AnalyticsError> {
    let mut agg = Aggregator::new(epoch_start, bucket_secs, exclusions, usd_rates)?;
    for c in records {
        agg.push(c);
    }
    Ok(Aggregation {
        rows: agg.rows(),
        skipped: agg.skipped,
        excluded: agg.excluded,
    })
}

/// Earliest timestamp among records that are not excluded.
pub fn default_epoch<'c>(
    records: impl IntoIterator<Item = &'c Classification>,
    exclusions: &ExclusionList,
) -> Option<u64> {
    records
        .into_iter()
        .filter(|c| !exclusions.contains(&c.tx_hash))
        .map(|c| c.timestamp)
        .min()
}
