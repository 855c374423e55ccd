//! Sharded prefetching table.
//!
//! Each row is `[source, assoc_1, .., assoc_P]` with unused cells holding
//! [`RESERVED_ADDR`]. Associations are kept oldest first; a new association
//! on a full row pushes the oldest out. Shards of [`SHARD_ROWS`] rows are
//! allocated on demand up to a fixed limit, after which rows are recycled
//! oldest first.

use std::collections::HashMap;

use super::tables::INDEX_ENTRY_BYTES;
use crate::trace::RESERVED_ADDR;

pub const SHARD_ROWS: usize = 2000;

const EMPTY: u64 = RESERVED_ADDR;

#[derive(Debug, Clone)]
pub struct PrefetchTable {
    list_size: usize,
    max_shards: usize,
    shards: Vec<Box<[u64]>>,
    index: HashMap<u64, u32>,
    /// Rows handed out so far, including recycled ones only once.
    allocated: usize,
    /// Next row to recycle once every shard is in use.
    recycle: usize,
}

impl PrefetchTable {
    pub fn new(list_size: usize, max_shards: usize) -> Self {
        assert!(list_size >= 1, "prefetch list size must be at least 1");
        PrefetchTable {
            list_size,
            max_shards,
            shards: Vec::new(),
            index: HashMap::new(),
            allocated: 0,
            recycle: 0,
        }
    }

    /// Bytes for one shard: its cells plus one index entry per row.
    pub fn shard_bytes(list_size: usize) -> u64 {
        SHARD_ROWS as u64 * ((1 + list_size as u64) * 8 + INDEX_ENTRY_BYTES)
    }

    pub fn list_size(&self) -> usize {
        self.list_size
    }

    pub fn max_shards(&self) -> usize {
        self.max_shards
    }

    pub fn shard_count(&self) -> usize {
        self.shards.len()
    }

    /// Number of source blocks with a row.
    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn bytes(&self) -> u64 {
        self.shards.len() as u64 * Self::shard_bytes(self.list_size)
    }

    pub fn max_bytes(&self) -> u64 {
        self.max_shards as u64 * Self::shard_bytes(self.list_size)
    }

    fn width(&self) -> usize {
        self.list_size + 1
    }

    fn cells(&self, row: usize) -> &[u64] {
        let w = self.width();
        let off = (row % SHARD_ROWS) * w;
        &self.shards[row / SHARD_ROWS][off..off + w]
    }

    fn cells_mut(&mut self, row: usize) -> &mut [u64] {
        let w = self.width();
        let off = (row % SHARD_ROWS) * w;
        &mut self.shards[row / SHARD_ROWS][off..off + w]
    }

    /// Associations of `src`, oldest first.
    pub fn get(&self, src: u64) -> &[u64] {
        match self.index.get(&src) {
            Some(&row) => {
                let assoc = &self.cells(row as usize)[1..];
                let n = assoc.iter().position(|&a| a == EMPTY).unwrap_or(assoc.len());
                &assoc[..n]
            }
            None => &[],
        }
    }

    fn allocate_row(&mut self, src: u64) -> Option<usize> {
        let rows_available = self.shards.len() * SHARD_ROWS;
        let row = if self.allocated < rows_available {
            self.allocated += 1;
            self.allocated - 1
        } else if self.shards.len() < self.max_shards {
            self.shards
                .push(vec![EMPTY; SHARD_ROWS * self.width()].into_boxed_slice());
            self.allocated += 1;
            self.allocated - 1
        } else if rows_available > 0 {
            let row = self.recycle;
            self.recycle = (self.recycle + 1) % rows_available;
            let old = self.cells(row)[0];
            self.index.remove(&old);
            row
        } else {
            return None;
        };
        let cells = self.cells_mut(row);
        cells.fill(EMPTY);
        cells[0] = src;
        self.index.insert(src, row as u32);
        Some(row)
    }

    /// Records `src -> dst`. Duplicates are ignored; a full row drops its
    /// oldest association.
    pub fn add(&mut self, src: u64, dst: u64) {
        if src == dst || src == EMPTY || dst == EMPTY {
            return;
        }
        let row = match self.index.get(&src) {
            Some(&row) => row as usize,
            None => match self.allocate_row(src) {
                Some(row) => row,
                None => return,
            },
        };
        let list_size = self.list_size;
        let assoc = &mut self.cells_mut(row)[1..];
        if assoc.contains(&dst) {
            return;
        }
        match assoc.iter().position(|&a| a == EMPTY) {
            Some(free) => assoc[free] = dst,
            None => {
                assoc.copy_within(1..list_size, 0);
                assoc[list_size - 1] = dst;
            }
        }
    }

    /// All `(src, dst)` pairs in row order, associations oldest first.
    pub fn pairs(&self) -> Vec<(u64, u64)> {
        let mut out = Vec::new();
        for row in 0..self.allocated {
            let cells = self.cells(row);
            if cells[0] == EMPTY {
                continue;
            }
            out.extend(cells[1..].iter().take_while(|&&a| a != EMPTY).map(|&a| (cells[0], a)));
        }
        out
    }
}
