//! Ordered range traversal with bounded parallel prefetch.

use std::collections::VecDeque;
use std::thread;

use atomarb_core::types::RawBlock;

use crate::checkpoint::ScanCheckpoint;
use crate::source::{BlockSource, FetchError};

pub const DEFAULT_PARALLELISM: usize = 8;

/// Yields every remaining block of a checkpoint's range exactly once, in
/// direction order. Up to `parallelism` blocks are fetched concurrently, but
/// delivery is strictly ordered and [`Traversal::checkpoint`] always
/// describes the last block handed out. Iteration stops at the first error.
pub struct Traversal<'s, S: ?Sized> {
    source: &'s S,
    cursor: ScanCheckpoint,
    pending: Box<dyn Iterator<Item = u64> + Send>,
    ready: VecDeque<(u64, Result<RawBlock, FetchError>)>,
    parallelism: usize,
    done: bool,
}

impl<'s, S: BlockSource + ?Sized> Traversal<'s, S> {
    pub fn new(source: &'s S, cursor: ScanCheckpoint, parallelism: usize) -> Self {
        Self {
            source,
            pending: cursor.remaining(),
            cursor,
            ready: VecDeque::new(),
            parallelism: parallelism.max(1),
            done: false,
        }
    }

    /// Progress up to and including the last delivered block.
    pub fn checkpoint(&self) -> &ScanCheckpoint {
        &self.cursor
    }

    pub fn checkpoint_mut(&mut self) -> &mut ScanCheckpoint {
        &mut self.cursor
    }

    fn refill(&mut self) {
        let batch: Vec<u64> = self.pending.by_ref().take(self.parallelism).collect();
        if batch.len() <= 1 {
            self.ready
                .extend(batch.into_iter().map(|n| (n, self.source.fetch_block(n))));
            return;
        }
        let source = self.source;
        let fetched: Vec<_> = thread::scope(|s| {
            let handles: Vec<_> = batch
                .iter()
                .map(|&n| s.spawn(move || (n, source.fetch_block(n))))
                .collect();
            handles.into_iter().map(|h| h.join().expect("fetch thread panicked")).collect()
        });
        self.ready.extend(fetched);
    }
}

impl<S: BlockSource + ?Sized> Iterator for Traversal<'_, S> {
    type Item = Result<RawBlock, FetchError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        if self.ready.is_empty() {
            self.refill();
        }
        let Some((n, item)) = self.ready.pop_front() else {
            self.done = true;
            return None;
        };
        match item {
            Ok(block) if block.number != n => {
                self.done = true;
                Some(Err(FetchError::Decode(format!("asked for block {n}, got {}", block.number))))
            }
            Ok(block) => {
                self.cursor.advance(n).expect("blocks are delivered in cursor order");
                Some(Ok(block))
            }
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}
