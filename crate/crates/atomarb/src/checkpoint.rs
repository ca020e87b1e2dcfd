//! Scan progress persisted between runs.
//!
//! The cursor `next_block` splits the range into done and remaining parts.
//! Forward scans have `[next_block, end]` remaining; backward scans have
//! `[start, next_block - 1]` remaining. Either way
//! `start <= next_block <= end + 1`.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

/// Inclusive block range; empty when `start > end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockRange {
    pub start: u64,
    pub end: u64,
}

impl BlockRange {
    pub fn new(start: u64, end: u64) -> Self {
        Self { start, end }
    }

    pub fn is_empty(&self) -> bool {
        self.start > self.end
    }

    pub fn len(&self) -> u64 {
        if self.is_empty() {
            0
        } else {
            self.end - self.start + 1
        }
    }
}

/// Where the output file stood when the checkpoint was taken.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputMark {
    pub path: PathBuf,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanCheckpoint {
    pub next_block: u64,
    pub direction: Direction,
    pub range_start: u64,
    pub range_end: u64,
    pub fixture_mode: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputMark>,
}

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("checkpoint {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("checkpoint {path} is corrupt ({reason}); rerun with --reset-checkpoint to discard it")]
    Corrupt { path: PathBuf, reason: String },
    #[error(
        "checkpoint {path} belongs to a different scan ({found}); rerun with --reset-checkpoint to discard it"
    )]
    Mismatch { path: PathBuf, found: String },
    #[error("block {got} delivered out of order (expected {expected})")]
    OutOfOrder { expected: u64, got: u64 },
}

impl ScanCheckpoint {
    /// A cursor at the beginning of a non-empty `range`.
    pub fn fresh(range: BlockRange, direction: Direction, fixture_mode: bool) -> Self {
        let next_block = match direction {
            Direction::Forward => range.start,
            Direction::Backward => range.end + 1,
        };
        Self {
            next_block,
            direction,
            range_start: range.start,
            range_end: range.end,
            fixture_mode,
            output: None,
        }
    }

    pub fn range(&self) -> BlockRange {
        BlockRange::new(self.range_start, self.range_end)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.range_start > self.range_end {
            return Err(format!("range {}..={} is empty", self.range_start, self.range_end));
        }
        if self.next_block < self.range_start || self.next_block > self.range_end.saturating_add(1) {
            return Err(format!(
                "next_block {} outside {}..={}",
                self.next_block,
                self.range_start,
                self.range_end + 1
            ));
        }
        Ok(())
    }

    pub fn is_complete(&self) -> bool {
        match self.direction {
            Direction::Forward => self.next_block > self.range_end,
            Direction::Backward => self.next_block <= self.range_start,
        }
    }

    /// Blocks still to be delivered, in delivery order.
    pub fn remaining(&self) -> Box<dyn Iterator<Item = u64> + Send> {
        match self.direction {
            Direction::Forward => Box::new(self.next_block..=self.range_end),
            Direction::Backward => Box::new((self.range_start..self.next_block).rev()),
        }
    }

    pub fn remaining_len(&self) -> u64 {
        match self.direction {
            Direction::Forward => (self.range_end + 1).saturating_sub(self.next_block),
            Direction::Backward => self.next_block.saturating_sub(self.range_start),
        }
    }

    /// The block the cursor expects next, if any.
    pub fn expected(&self) -> Option<u64> {
        if self.is_complete() {
            return None;
        }
        Some(match self.direction {
            Direction::Forward => self.next_block,
            Direction::Backward => self.next_block - 1,
        })
    }

    /// Marks `block` delivered. Blocks must arrive in cursor order.
    pub fn advance(&mut self, block: u64) -> Result<(), CheckpointError> {
        let expected = self.expected().ok_or(CheckpointError::OutOfOrder {
            expected: self.next_block,
            got: block,
        })?;
        if block != expected {
            return Err(CheckpointError::OutOfOrder { expected, got: block });
        }
        self.next_block = match self.direction {
            Direction::Forward => block + 1,
            Direction::Backward => block,
        };
        Ok(())
    }

    pub fn same_scan(&self, range: BlockRange, direction: Direction, fixture_mode: bool) -> bool {
        self.range() == range && self.direction == direction && self.fixture_mode == fixture_mode
    }
}

/// A checkpoint file, replaced atomically on every save.
#[derive(Debug, Clone)]
pub struct CheckpointStore {
    path: PathBuf,
}

impl CheckpointStore {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self { path: path.into() }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn io(&self, source: io::Error) -> CheckpointError {
        CheckpointError::Io {
            path: self.path.clone(),
            source,
        }
    }

    pub fn load(&self) -> Result<Option<ScanCheckpoint>, CheckpointError> {
        let text = match fs::read_to_string(&self.path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(self.io(e)),
        };
        let corrupt = |reason: String| CheckpointError::Corrupt {
            path: self.path.clone(),
            reason,
        };
        let cp: ScanCheckpoint = serde_json::from_str(&text).map_err(|e| corrupt(e.to_string()))?;
        cp.validate().map_err(corrupt)?;
        Ok(Some(cp))
    }

    /// Loads the checkpoint for this scan, or `None` when there is none.
    /// A checkpoint left by a different scan is an error.
    pub fn load_matching(
        &self,
        range: BlockRange,
        direction: Direction,
        fixture_mode: bool,
    ) -> Result<Option<ScanCheckpoint>, CheckpointError> {
        match self.load()? {
            Some(cp) if !cp.same_scan(range, direction, fixture_mode) => Err(CheckpointError::Mismatch {
                path: self.path.clone(),
                found: format!(
                    "{:?} {}..={}{}",
                    cp.direction,
                    cp.range_start,
                    cp.range_end,
                    if cp.fixture_mode { " from fixture" } else { "" }
                ),
            }),
            other => Ok(other),
        }
    }

    /// Writes to a sibling temp file, syncs it, then renames it over the
    /// checkpoint.
    pub fn save(&self, cp: &ScanCheckpoint) -> Result<(), CheckpointError> {
        let dir = match self.path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| self.io(e))?;
        let text = serde_json::to_string_pretty(cp).expect("checkpoint serializes");
        tmp.write_all(text.as_bytes()).map_err(|e| self.io(e))?;
        tmp.write_all(b"\n").map_err(|e| self.io(e))?;
        tmp.as_file().sync_data().map_err(|e| self.io(e))?;
        tmp.persist(&self.path).map_err(|e| self.io(e.error))?;
        Ok(())
    }

    pub fn remove(&self) -> Result<(), CheckpointError> {
        match fs::remove_file(&self.path) {
            Ok(()) => Ok(()),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(()),
            Err(e) => Err(self.io(e)),
        }
    }
}
