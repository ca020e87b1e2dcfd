//! Synthetic ledgers on disk and the three-way agreement check.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use atomarb_core::amount::{parse_rational, render_rational};
use atomarb_core::classify::{classify_block, ClassifierConfig, Strategy};
use atomarb_core::decode::{Decoder, PoolMeta};
use atomarb_core::synth::{oracle_classify, GroundTruth, OracleWorld, PlantKind, SynthOutput, TruthLabel};
use atomarb_core::types::{Address, RawBlock, TxHash};
use serde::{Deserialize, Serialize};

use crate::config::ClassifierFile;
use crate::fixture::{store_fixture, FixtureError};
use crate::registry::{pools_to_json, PoolCacheError};

pub const FIXTURE_FILE: &str = "fixture.jsonl";
pub const TRUTH_FILE: &str = "truth.json";
pub const POOLS_FILE: &str = "pools.json";
pub const CONFIG_FILE: &str = "config.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthEntry {
    pub kind: PlantKind,
    pub is_aa: bool,
    pub strategy: Strategy,
    pub profit: String,
    pub swap_count: usize,
}

pub fn truth_to_json(truth: &GroundTruth) -> String {
    let map: BTreeMap<&TxHash, TruthEntry> = truth
        .iter()
        .map(|(h, l)| {
            (
                h,
                TruthEntry {
                    kind: l.kind,
                    is_aa: l.is_aa,
                    strategy: l.strategy,
                    profit: render_rational(&l.profit),
                    swap_count: l.swap_count,
                },
            )
        })
        .collect();
    let mut text = serde_json::to_string_pretty(&map).expect("truth serializes");
    text.push('\n');
    text
}

pub fn load_truth(path: &Path) -> Result<GroundTruth, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let raw: BTreeMap<TxHash, TruthEntry> =
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    raw.into_iter()
        .map(|(h, e)| {
            let profit = parse_rational(&e.profit).map_err(|err| format!("{}: profit of {h}: {err}", path.display()))?;
            Ok((
                h,
                TruthLabel {
                    kind: e.kind,
                    is_aa: e.is_aa,
                    strategy: e.strategy,
                    profit,
                    swap_count: e.swap_count,
                },
            ))
        })
        .collect()
}

#[derive(Debug, thiserror::Error)]
pub enum SynthWriteError {
    #[error(transparent)]
    Fixture(#[from] FixtureError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Pools(#[from] PoolCacheError),
}

/// Writes fixture, ground truth, pool file and classifier config into `dir`.
pub fn write_synth(dir: &Path, out: &SynthOutput) -> Result<(), SynthWriteError> {
    let write = |name: &str, text: String| {
        let path = dir.join(name);
        fs::write(&path, text).map_err(|source| SynthWriteError::Io { path, source })
    };
    fs::create_dir_all(dir).map_err(|source| SynthWriteError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    store_fixture(dir.join(FIXTURE_FILE), &out.blocks)?;
    write(TRUTH_FILE, truth_to_json(&out.truth))?;
    write(POOLS_FILE, pools_to_json(&out.pools))?;
    let cfg = ClassifierFile::from_config(&out.config, &out.symbols);
    let mut text = serde_json::to_string_pretty(&serde_json::json!({ "classifier": cfg })).expect("config serializes");
    text.push('\n');
    write(CONFIG_FILE, text)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mismatch {
    pub tx_hash: TxHash,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Agreement {
    pub transactions: usize,
    pub aa: usize,
    pub fastlane: usize,
    pub by_kind: BTreeMap<String, usize>,
    pub mismatches: Vec<Mismatch>,
}

impl Agreement {
    pub fn is_perfect(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Runs the pipeline and the reference oracle over `blocks` and compares both
/// with `truth`. Transactions missing from either side count as mismatches.
pub fn check_agreement(
    blocks: &[RawBlock],
    pools: &BTreeMap<Address, PoolMeta>,
    cfg: &ClassifierConfig,
    truth: &GroundTruth,
) -> Agreement {
    let world = OracleWorld::new(
        pools.values(),
        &cfg.price_table,
        cfg.fastlane_addresses.iter().copied(),
        &cfg.bid_event.signature,
        cfg.bid_event.amount_word,
    );
    let decoder = Decoder::new(pools);
    let mut report = Agreement::default();
    let mut seen = BTreeMap::new();
    for block in blocks {
        let outcome = classify_block(block, &decoder, cfg);
        for (tx, c) in block.transactions.iter().zip(&outcome.classifications) {
            report.transactions += 1;
            seen.insert(tx.hash, ());
            if c.is_aa {
                report.aa += 1;
            }
            if c.strategy == Strategy::FastLaneBased {
                report.fastlane += 1;
            }
            let Some(t) = truth.get(&tx.hash) else {
                report.mismatches.push(Mismatch {
                    tx_hash: tx.hash,
                    detail: "not in ground truth".into(),
                });
                continue;
            };
            *report.by_kind.entry(format!("{:?}", t.kind)).or_default() += 1;
            let o = oracle_classify(tx, &world);
            let mut diffs = Vec::new();
            let mut cmp = |what: &str, truth: String, pipeline: String, oracle: String| {
                if truth != pipeline || truth != oracle {
                    diffs.push(format!("{what}: truth {truth}, pipeline {pipeline}, oracle {oracle}"));
                }
            };
            cmp("is_aa", t.is_aa.to_string(), c.is_aa.to_string(), o.is_aa.to_string());
            cmp("strategy", format!("{:?}", t.strategy), format!("{:?}", c.strategy), format!("{:?}", o.strategy));
            cmp("swaps", t.swap_count.to_string(), c.swap_count.to_string(), o.swap_count.to_string());
            cmp(
                "profit",
                render_rational(&t.profit),
                render_rational(&c.profit),
                render_rational(&o.profit),
            );
            if !diffs.is_empty() {
                report.mismatches.push(Mismatch {
                    tx_hash: tx.hash,
                    detail: format!("{:?}: {}", t.kind, diffs.join("; ")),
                });
            }
        }
    }
    for h in truth.keys().filter(|h| !seen.contains_key(*h)) {
        report.mismatches.push(Mismatch {
            tx_hash: *h,
            detail: "in ground truth but not in fixture".into(),
        });
    }
    report
}
