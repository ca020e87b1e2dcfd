//! Bucket tables as CSV or JSON, plus the exclusion and USD-rate inputs.
//!
//! CSV columns, in order:
//!
//! | column | meaning |
//! |---|---|
//! | `bucket_index` | bucket number from the epoch start |
//! | `bucket_start_iso` | bucket start, RFC 3339 UTC |
//! | `spam_tx_count`, `fl_tx_count` | AA transactions per strategy |
//! | `spam_mev_native`, `fl_mev_native` | summed profit, common currency |
//! | `spam_mev_usd`, `fl_mev_usd` | the same in USD; empty without rates |
//! | `bids_native` | summed bids of all AA transactions |
//! | `uniq_searchers_spam`, `uniq_searchers_fl` | distinct searchers |
//! | `fl_tx_share`, `fl_mev_share` | FastLane share of count and profit |
//! | `bid_to_mev_ratio` | FastLane bids over FastLane profit |
//!
//! Empty cells (JSON `null`) mark undefined ratios. Values are exact decimals
//! when the rational terminates and are otherwise rounded half away from
//! zero to 18 places.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use atomarb_core::amount::{parse_rational, pow10, render_rational};
use atomarb_core::analytics::{AggregateRow, ExclusionList, UsdRateSeries};
use atomarb_core::types::TxHash;
use chrono::{DateTime, SecondsFormat};
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::Signed;
use serde::{Deserialize, Serialize};

use crate::config::ReportFormat;

pub const COLUMNS: [&str; 14] = [
    "bucket_index",
    "bucket_start_iso",
    "spam_tx_count",
    "fl_tx_count",
    "spam_mev_native",
    "fl_mev_native",
    "spam_mev_usd",
    "fl_mev_usd",
    "bids_native",
    "uniq_searchers_spam",
    "uniq_searchers_fl",
    "fl_tx_share",
    "fl_mev_share",
    "bid_to_mev_ratio",
];

pub const REPORT_DECIMALS: u32 = 18;

/// Exact decimal when possible, else rounded to [`REPORT_DECIMALS`] places.
pub fn render_value(r: &BigRational) -> String {
    let exact = render_rational(r);
    if !exact.contains('/') {
        return exact;
    }
    let scale = pow10(REPORT_DECIMALS);
    let scaled = r.numer().abs() * &scale;
    let (mut q, rem) = scaled.div_rem(r.denom());
    if rem * BigInt::from(2) >= *r.denom() {
        q += 1;
    }
    if r.is_negative() {
        q = -q;
    }
    render_rational(&BigRational::new(q, scale))
}

pub fn iso8601(ts: u64) -> String {
    i64::try_from(ts)
        .ok()
        .and_then(|s| DateTime::from_timestamp(s, 0))
        .map(|d| d.to_rfc3339_opts(SecondsFormat::Secs, true))
        .unwrap_or_else(|| ts.to_string())
}

pub fn parse_iso8601(s: &str) -> Result<u64, String> {
    let dt = DateTime::parse_from_rfc3339(s).map_err(|e| format!("{s}: {e}"))?;
    u64::try_from(dt.timestamp()).map_err(|_| format!("{s}: before 1970"))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReportRow {
    pub bucket_index: u64,
    pub bucket_start_iso: String,
    pub spam_tx_count: u64,
    pub fl_tx_count: u64,
    pub spam_mev_native: String,
    pub fl_mev_native: String,
    pub spam_mev_usd: Option<String>,
    pub fl_mev_usd: Option<String>,
    pub bids_native: String,
    pub uniq_searchers_spam: u64,
    pub uniq_searchers_fl: u64,
    pub fl_tx_share: Option<String>,
    pub fl_mev_share: Option<String>,
    pub bid_to_mev_ratio: Option<String>,
}

impl From<&AggregateRow> for ReportRow {
    fn from(r: &AggregateRow) -> Self {
        let opt = |v: &Option<BigRational>| v.as_ref().map(render_value);
        Self {
            bucket_index: r.bucket_index,
            bucket_start_iso: iso8601(r.bucket_start),
            spam_tx_count: r.aa_tx_count_spam,
            fl_tx_count: r.aa_tx_count_fastlane,
            spam_mev_native: render_value(&r.mev_volume_spam),
            fl_mev_native: render_value(&r.mev_volume_fastlane),
            spam_mev_usd: opt(&r.mev_usd_spam),
            fl_mev_usd: opt(&r.mev_usd_fastlane),
            bids_native: render_value(&r.bids_total),
            uniq_searchers_spam: r.unique_searchers_spam,
            uniq_searchers_fl: r.unique_searchers_fastlane,
            fl_tx_share: opt(&r.fastlane_tx_share),
            fl_mev_share: opt(&r.fastlane_mev_share),
            bid_to_mev_ratio: opt(&r.bid_to_mev_ratio),
        }
    }
}

impl ReportRow {
    fn cells(&self) -> [String; 14] {
        let o = |v: &Option<String>| v.clone().unwrap_or_default();
        [
            self.bucket_index.to_string(),
            self.bucket_start_iso.clone(),
            self.spam_tx_count.to_string(),
            self.fl_tx_count.to_string(),
            self.spam_mev_native.clone(),
            self.fl_mev_native.clone(),
            o(&self.spam_mev_usd),
            o(&self.fl_mev_usd),
            self.bids_native.clone(),
            self.uniq_searchers_spam.to_string(),
            self.uniq_searchers_fl.to_string(),
            o(&self.fl_tx_share),
            o(&self.fl_mev_share),
            o(&self.bid_to_mev_ratio),
        ]
    }
}

pub fn write_csv<W: Write>(w: W, rows: &[AggregateRow]) -> io::Result<()> {
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    out.write_record(COLUMNS)?;
    for r in rows {
        out.write_record(ReportRow::from(r).cells())?;
    }
    out.flush()
}

pub fn write_json<W: Write>(mut w: W, rows: &[AggregateRow]) -> io::Result<()> {
    let rows: Vec<ReportRow> = rows.iter().map(ReportRow::from).collect();
    serde_json::to_writer_pretty(&mut w, &rows)?;
    w.write_all(b"\n")?;
    w.flush()
}

pub fn write_report<W: Write>(w: W, rows: &[AggregateRow], format: ReportFormat) -> io::Result<()> {
    match format {
        ReportFormat::Csv => write_csv(w, rows),
        ReportFormat::Json => write_json(w, rows),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExclusionEntry {
    pub tx_hash: TxHash,
    pub reason: String,
}

/// Exclusion file: `{"description": "...", "entries": [{"tx_hash", "reason"}]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExclusionFile {
    #[serde(default)]
    pub description: String,
    pub entries: Vec<ExclusionEntry>,
}

/// Shipped with the binary and always applied. The five KyberSwap exploit
/// transactions of 2023-11-23 go here; the entry list starts out empty.
pub const BUNDLED_EXCLUSIONS: &str = include_str!("../data/exclusions/kyberswap-2023-11-23.json");

pub fn parse_exclusions(text: &str) -> Result<ExclusionFile, String> {
    serde_json::from_str(text).map_err(|e| e.to_string())
}

pub fn bundled_exclusions() -> ExclusionFile {
    parse_exclusions(BUNDLED_EXCLUSIONS).expect("bundled exclusion file parses")
}

/// The bundled list plus every file in `paths`.
pub fn load_exclusions(paths: &[&Path]) -> Result<ExclusionList, String> {
    let mut list = ExclusionList::new();
    let mut add = |f: ExclusionFile| {
        for e in f.entries {
            list.insert(e.tx_hash, e.reason);
        }
    };
    add(bundled_exclusions());
    for p in paths {
        let text = fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
        add(parse_exclusions(&text).map_err(|e| format!("{}: {e}", p.display()))?);
    }
    Ok(list)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatePoint {
    pub timestamp: u64,
    /// USD per whole unit of the common currency.
    pub rate: String,
}

/// Rate file: `{"points": [{"timestamp": 1700000000, "rate": "0.85"}]}`,
/// strictly increasing timestamps at most one day apart.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateFile {
    pub points: Vec<RatePoint>,
}

pub fn load_usd_rates(path: &Path) -> Result<UsdRateSeries, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let file: RateFile = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    let points = file
        .points
        .into_iter()
        .map(|p| {
            parse_rational(&p.rate)
                .map(|r| (p.timestamp, r))
                .map_err(|e| format!("{}: rate at {}: {e}", path.display(), p.timestamp))
        })
        .collect::<Result<Vec<_>, _>>()?;
    UsdRateSeries::new(points).map_err(|e| format!("{}: {e}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn values_render_exact_or_rounded() {
        assert_eq!(render_value(&q(13, 100)), "0.13");
        assert_eq!(render_value(&q(0, 1)), "0");
        assert_eq!(render_value(&q(1, 3)), "0.333333333333333333");
        assert_eq!(render_value(&q(2, 3)), "0.666666666666666667");
        assert_eq!(render_value(&q(-2, 3)), "-0.666666666666666667");
        assert_eq!(render_value(&q(1, 1_000_000_007)), "0.000000000999999993");
    }

    #[test]
    fn iso_dates() {
        assert_eq!(iso8601(0), "1970-01-01T00:00:00Z");
        assert_eq!(iso8601(1_700_000_000), "2023-11-14T22:13:20Z");
        assert_eq!(parse_iso8601("2023-11-14T22:13:20Z"), Ok(1_700_000_000));
        assert_eq!(parse_iso8601("2023-11-15T00:13:20+02:00"), Ok(1_700_000_000));
        assert!(parse_iso8601("yesterday").is_err());
    }

    #[test]
    fn csv_header_and_empty_cells() {
        let row = AggregateRow {
            bucket_index: 2,
            bucket_start: 1_700_000_000,
            aa_tx_count_spam: 87,
            aa_tx_count_fastlane: 13,
            mev_volume_spam: q(87, 1),
            mev_volume_fastlane: q(13, 1),
            mev_usd_spam: None,
            mev_usd_fastlane: None,
            bids_total: q(1, 2),
            unique_searchers_spam: 4,
            unique_searchers_fastlane: 1,
            fastlane_tx_share: Some(q(13, 100)),
            fastlane_mev_share: Some(q(13, 100)),
            bid_to_mev_ratio: None,
        };
        let mut out = Vec::new();
        write_csv(&mut out, &[row]).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), COLUMNS.join(","));
        assert_eq!(lines.next().unwrap(), "2,2023-11-14T22:13:20Z,87,13,87,13,,,0.5,4,1,0.13,0.13,");
        assert!(lines.next().is_none());
    }

    #[test]
    fn bundled_list_parses() {
        let f = bundled_exclusions();
        assert!(f.entries.is_empty());
        assert!(!f.description.is_empty());
    }

    #[test]
    fn rate_file_checks_order() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.json");
        fs::write(&p, r#"{"points":[{"timestamp":10,"rate":"0.5"},{"timestamp":5,"rate":"0.6"}]}"#).unwrap();
        assert!(load_usd_rates(&p).is_err());
        fs::write(&p, r#"{"points":[{"timestamp":10,"rate":"0.5"},{"timestamp":20,"rate":"3/4"}]}"#).unwrap();
        let s = load_usd_rates(&p).unwrap();
        assert_eq!(s.rate_at(25), Some(&q(3, 4)));
    }
}
