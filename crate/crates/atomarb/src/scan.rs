//! Checkpointed scan: blocks in, classification lines out.
//!
//! The checkpoint records how many bytes of the output file belong to
//! finished blocks. On resume the file is cut back to that length, so a run
//! killed between writing a block and saving the checkpoint never duplicates
//! or loses lines.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{self, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};

use atomarb_core::classify::{classify_block, ClassifierConfig, Strategy};
use atomarb_core::decode::{Decoder, PoolMeta};
use atomarb_core::types::Address;

use crate::checkpoint::{BlockRange, CheckpointError, CheckpointStore, Direction, OutputMark, ScanCheckpoint};
use crate::records::record_line;
use crate::registry::{save_pools, LiveRegistry, PoolCacheError};
use crate::source::{BlockSource, ContractCaller, FetchError};
use crate::traverse::Traversal;

pub struct ScanJob<'a> {
    pub source: &'a dyn BlockSource,
    pub caller: Option<&'a dyn ContractCaller>,
    pub pools: BTreeMap<Address, PoolMeta>,
    pub classifier: &'a ClassifierConfig,
    pub range: BlockRange,
    pub direction: Direction,
    pub fixture_mode: bool,
    pub out: PathBuf,
    pub checkpoint: PathBuf,
    pub reset_checkpoint: bool,
    pub parallelism: usize,
    /// Stop (as if interrupted) after this many blocks in this run.
    pub stop_after: Option<u64>,
    pub interrupt: Option<&'a AtomicBool>,
    /// Where newly discovered pools are saved.
    pub pool_cache: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScanReport {
    pub blocks: u64,
    pub transactions: u64,
    pub aa_spam: u64,
    pub aa_fastlane: u64,
    pub skipped_legs: u64,
    /// Cursor the run started from when it resumed a checkpoint.
    pub resumed_at: Option<u64>,
    pub complete: bool,
    pub pools_discovered: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum ScanError {
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("block source: {0}")]
    Fetch(#[from] FetchError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{0}; rerun with --reset-checkpoint to start over")]
    Output(String),
    #[error(transparent)]
    PoolCache(#[from] PoolCacheError),
}

fn io_err(path: &Path) -> impl Fn(io::Error) -> ScanError + '_ {
    move |source| ScanError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Opens the output positioned at the end of the last finished block.
fn open_output(job: &ScanJob<'_>, cp: &ScanCheckpoint, resumed: bool) -> Result<File, ScanError> {
    let err = io_err(&job.out);
    if !resumed {
        return File::create(&job.out).map_err(err);
    }
    let mark = cp
        .output
        .as_ref()
        .ok_or_else(|| ScanError::Output("checkpoint has no output position".into()))?;
    if mark.path != job.out {
        return Err(ScanError::Output(format!(
            "checkpoint belongs to output {}, not {}",
            mark.path.display(),
            job.out.display()
        )));
    }
    let mut file = OpenOptions::new().write(true).open(&job.out).map_err(&err)?;
    let len = file.metadata().map_err(&err)?.len();
    if len < mark.bytes {
        return Err(ScanError::Output(format!(
            "{} has {len} bytes but the checkpoint expects at least {}",
            job.out.display(),
            mark.bytes
        )));
    }
    file.set_len(mark.bytes).map_err(&err)?;
    file.seek(SeekFrom::End(0)).map_err(&err)?;
    Ok(file)
}

pub fn run_scan(job: &ScanJob<'_>) -> Result<ScanReport, ScanError> {
    let mut report = ScanReport::default();
    let store = CheckpointStore::new(&job.checkpoint);
    if job.reset_checkpoint {
        store.remove()?;
    }
    if job.range.is_empty() {
        File::create(&job.out).map_err(io_err(&job.out))?;
        store.remove()?;
        report.complete = true;
        return Ok(report);
    }

    let existing = store.load_matching(job.range, job.direction, job.fixture_mode)?;
    let resumed = existing.is_some();
    let mut cp = existing.unwrap_or_else(|| ScanCheckpoint::fresh(job.range, job.direction, job.fixture_mode));
    if resumed {
        report.resumed_at = Some(cp.next_block);
    }
    let mut out = open_output(job, &cp, resumed)?;
    let mut written = out.stream_position().map_err(io_err(&job.out))?;
    cp.output = Some(OutputMark {
        path: job.out.clone(),
        bytes: written,
    });
    store.save(&cp)?;

    let registry = LiveRegistry::new(job.pools.clone(), job.caller);
    let decoder = Decoder::new(&registry);
    let mut traversal = Traversal::new(job.source, cp, job.parallelism);
    let mut stopped = false;

    while let Some(block) = traversal.next() {
        let block = block?;
        let outcome = classify_block(&block, &decoder, job.classifier);
        if let Some(fault) = registry.take_fault() {
            return Err(fault.into());
        }
        let mut buf = String::new();
        for c in &outcome.classifications {
            buf.push_str(&record_line(c));
            match c.strategy {
                Strategy::SpamBased => report.aa_spam += 1,
                Strategy::FastLaneBased => report.aa_fastlane += 1,
                Strategy::NotAA => {}
            }
        }
        for s in &outcome.diagnostics.skipped {
            log::debug!("block {}: skipped leg {s:?}", block.number);
        }
        report.skipped_legs += outcome.diagnostics.skipped.len() as u64;
        report.transactions += outcome.classifications.len() as u64;
        report.blocks += 1;

        let err = io_err(&job.out);
        out.write_all(buf.as_bytes()).map_err(&err)?;
        out.sync_data().map_err(&err)?;
        written += buf.len() as u64;
        let cp = traversal.checkpoint_mut();
        cp.output = Some(OutputMark {
            path: job.out.clone(),
            bytes: written,
        });
        store.save(cp)?;

        let interrupted = job.interrupt.is_some_and(|f| f.load(Ordering::SeqCst));
        if interrupted || job.stop_after.is_some_and(|n| report.blocks >= n) {
            stopped = !traversal.checkpoint().is_complete();
            break;
        }
    }

    report.pools_discovered = registry.discovered();
    if let Some(path) = &job.pool_cache {
        if report.pools_discovered > 0 {
            save_pools(path, &registry.snapshot())?;
        }
    }
    report.complete = !stopped;
    if report.complete {
        store.remove()?;
    }
    Ok(report)
}
