//! Fixture files: one block per line, receipts merged in.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use atomarb_core::types::{RawBlock, RecordError};

use crate::wire::{block_from_line, block_to_line};

#[derive(Debug, thiserror::Error)]
pub enum FixtureError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("{path}:{line}: block {number} breaks the block-number order of the file")]
    Order { path: PathBuf, line: usize, number: u64 },
    #[error("{path}:{line}: {source}")]
    Record {
        path: PathBuf,
        line: usize,
        #[source]
        source: RecordError,
    },
}

impl FixtureError {
    /// 1-based line the error refers to, when there is one.
    pub fn line(&self) -> Option<usize> {
        match self {
            Self::Io { .. } => None,
            Self::Parse { line, .. } | Self::Order { line, .. } | Self::Record { line, .. } => Some(*line),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Order {
    Unknown,
    Ascending,
    Descending,
}

/// Streams blocks from a fixture, validating each line as it goes.
pub struct FixtureReader<R> {
    path: PathBuf,
    lines: io::Lines<R>,
    line: usize,
    last: Option<u64>,
    order: Order,
    failed: bool,
}

impl FixtureReader<BufReader<File>> {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, FixtureError> {
        let path = path.as_ref().to_path_buf();
        let file = File::open(&path).map_err(|source| FixtureError::Io { path: path.clone(), source })?;
        Ok(Self::new(path, BufReader::new(file)))
    }
}

impl<R: BufRead> FixtureReader<R> {
    pub fn new(path: PathBuf, reader: R) -> Self {
        Self {
            path,
            lines: reader.lines(),
            line: 0,
            last: None,
            order: Order::Unknown,
            failed: false,
        }
    }

    fn check_order(&mut self, number: u64) -> Result<(), FixtureError> {
        if let Some(prev) = self.last {
            let step = match number.cmp(&prev) {
                std::cmp::Ordering::Greater => Order::Ascending,
                std::cmp::Ordering::Less => Order::Descending,
                std::cmp::Ordering::Equal => Order::Unknown,
            };
            if step == Order::Unknown || (self.order != Order::Unknown && step != self.order) {
                return Err(FixtureError::Order {
                    path: self.path.clone(),
                    line: self.line,
                    number,
                });
            }
            self.order = step;
        }
        self.last = Some(number);
        Ok(())
    }

    fn parse(&mut self, text: &str) -> Result<RawBlock, FixtureError> {
        let block = block_from_line(text).map_err(|e| FixtureError::Parse {
            path: self.path.clone(),
            line: self.line,
            message: e.to_string(),
        })?;
        block.validate().map_err(|source| FixtureError::Record {
            path: self.path.clone(),
            line: self.line,
            source,
        })?;
        self.check_order(block.number)?;
        Ok(block)
    }
}

impl<R: BufRead> Iterator for FixtureReader<R> {
    type Item = Result<RawBlock, FixtureError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        loop {
            let text = match self.lines.next()? {
                Ok(t) => t,
                Err(source) => {
                    self.failed = true;
                    return Some(Err(FixtureError::Io { path: self.path.clone(), source }));
                }
            };
            self.line += 1;
            if text.trim().is_empty() {
                continue;
            }
            let item = self.parse(&text);
            self.failed = item.is_err();
            return Some(item);
        }
    }
}

pub fn load_fixture(path: impl AsRef<Path>) -> Result<Vec<RawBlock>, FixtureError> {
    FixtureReader::open(path)?.collect()
}

/// Writes `blocks` one per line, each terminated by `\n`.
pub fn write_fixture<'a, W: Write>(mut w: W, blocks: impl IntoIterator<Item = &'a RawBlock>) -> io::Result<()> {
    for b in blocks {
        w.write_all(block_to_line(b).as_bytes())?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn store_fixture<'a>(path: impl AsRef<Path>, blocks: impl IntoIterator<Item = &'a RawBlock>) -> Result<(), FixtureError> {
    let path = path.as_ref();
    let io_err = |source| FixtureError::Io { path: path.to_path_buf(), source };
    let file = File::create(path).map_err(io_err)?;
    write_fixture(BufWriter::new(file), blocks).map_err(io_err)
}
