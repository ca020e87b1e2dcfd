//! Classification records: one JSON object per line.
//!
//! Rationals are written exactly, as a terminating decimal where one exists
//! and as `numerator/denominator` otherwise. Raw token deltas are decimal
//! integer strings.

use std::collections::BTreeMap;
use std::io::{self, BufRead, Write};

use atomarb_core::amount::{parse_rational, render_rational};
use atomarb_core::classify::{Classification, ClassifyError, ConditionChecks, Strategy};
use atomarb_core::delta::DeltaVector;
use atomarb_core::types::{Address, TxHash};
use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassificationRecord {
    pub tx_hash: TxHash,
    pub block_number: u64,
    pub tx_index: u64,
    pub timestamp: u64,
    pub is_aa: bool,
    pub strategy: Strategy,
    pub swap_count: usize,
    pub delta: BTreeMap<Address, String>,
    pub gross_value: String,
    pub tau: String,
    pub beta: String,
    pub profit: String,
    pub searcher: Address,
    pub is_fastlane: bool,
    pub checks: ConditionChecks,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub unpriced_tokens: Vec<Address>,
}

impl From<&Classification> for ClassificationRecord {
    fn from(c: &Classification) -> Self {
        let unpriced_tokens = match &c.diagnostic {
            Some(ClassifyError::Unpriceable(tokens)) => tokens.clone(),
            None => Vec::new(),
        };
        Self {
            tx_hash: c.tx_hash,
            block_number: c.block_number,
            tx_index: c.tx_index,
            timestamp: c.timestamp,
            is_aa: c.is_aa,
            strategy: c.strategy,
            swap_count: c.swap_count,
            delta: c.delta.iter().map(|(t, v)| (*t, v.to_string())).collect(),
            gross_value: render_rational(&c.gross_value),
            tau: render_rational(&c.tau),
            beta: render_rational(&c.beta),
            profit: render_rational(&c.profit),
            searcher: c.searcher,
            is_fastlane: c.is_fastlane,
            checks: c.checks,
            unpriced_tokens,
        }
    }
}

impl ClassificationRecord {
    /// Rebuilds the classification, checking the record's own invariants.
    pub fn into_classification(self) -> Result<Classification, String> {
        let rat = |field: &str, s: &str| parse_rational(s).map_err(|e| format!("{field}: {e}"));
        let gross_value = rat("gross_value", &self.gross_value)?;
        let tau = rat("tau", &self.tau)?;
        let beta = rat("beta", &self.beta)?;
        let profit: BigRational = rat("profit", &self.profit)?;
        let mut delta = DeltaVector::new();
        for (token, raw) in &self.delta {
            let v: BigInt = raw.parse().map_err(|_| format!("delta of {token}: not an integer: {raw}"))?;
            if v == BigInt::from(0) {
                return Err(format!("delta of {token} is zero"));
            }
            delta.credit(*token, &v);
        }
        if profit != &gross_value - &tau - &beta {
            return Err("profit differs from gross_value - tau - beta".into());
        }
        if self.is_aa != (self.strategy != Strategy::NotAA) || self.is_aa != self.checks.all() {
            return Err("is_aa, strategy and checks disagree".into());
        }
        let diagnostic = (!self.unpriced_tokens.is_empty()).then_some(ClassifyError::Unpriceable(self.unpriced_tokens));
        Ok(Classification {
            tx_hash: self.tx_hash,
            block_number: self.block_number,
            tx_index: self.tx_index,
            timestamp: self.timestamp,
            is_aa: self.is_aa,
            strategy: self.strategy,
            swap_count: self.swap_count,
            delta,
            gross_value,
            tau,
            beta,
            profit,
            searcher: self.searcher,
            is_fastlane: self.is_fastlane,
            checks: self.checks,
            diagnostic,
        })
    }
}

pub fn record_line(c: &Classification) -> String {
    let mut line = serde_json::to_string(&ClassificationRecord::from(c)).expect("record serializes");
    line.push('\n');
    line
}

pub fn write_records<'a, W: Write>(mut w: W, records: impl IntoIterator<Item = &'a Classification>) -> io::Result<()> {
    for c in records {
        w.write_all(record_line(c).as_bytes())?;
    }
    w.flush()
}

#[derive(Debug, thiserror::Error)]
pub enum RecordReadError {
    #[error("line {line}: {source}")]
    Io {
        line: usize,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {message}")]
    Invalid { line: usize, message: String },
}

impl RecordReadError {
    pub fn line(&self) -> usize {
        match self {
            Self::Io { line, .. } | Self::Invalid { line, .. } => *line,
        }
    }
}

/// Streams classifications, stopping after the first bad line.
pub struct RecordReader<R> {
    lines: io::Lines<R>,
    line: usize,
    failed: bool,
}

impl<R: BufRead> RecordReader<R> {
    pub fn new(reader: R) -> Self {
        Self {
            lines: reader.lines(),
            line: 0,
            failed: false,
        }
    }
}

impl<R: BufRead> Iterator for RecordReader<R> {
    type Item = Result<Classification, RecordReadError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        loop {
            self.line += 1;
            let line = self.line;
            let text = match self.lines.next()? {
                Ok(t) => t,
                Err(source) => {
                    self.failed = true;
                    return Some(Err(RecordReadError::Io { line, source }));
                }
            };
            if text.trim().is_empty() {
                continue;
            }
            let item = serde_json::from_str::<ClassificationRecord>(&text)
                .map_err(|e| e.to_string())
                .and_then(ClassificationRecord::into_classification)
                .map_err(|message| RecordReadError::Invalid { line, message });
            self.failed = item.is_err();
            return Some(item);
        }
    }
}
