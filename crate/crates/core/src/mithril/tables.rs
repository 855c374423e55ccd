//! Fixed-size recording and mining tables.
//!
//! Both tables store packed timestamp rows in one flat word array and map
//! block addresses to row slots through a hash index. The recording table is
//! circular: free slots always form one contiguous run starting at `head`, so
//! the most recently filled slot sits just before it and the oldest just after
//! the free run.

use std::collections::HashMap;

use super::timestamp::{packed_len, packed_push, words_per_row, RowView, TimestampRow};

/// Bytes charged per index entry: 8 for the block address, 4 for the slot.
pub const INDEX_ENTRY_BYTES: u64 = 12;

#[derive(Debug, Clone)]
pub struct RecordingTable {
    capacity: usize,
    row_cap: usize,
    stride: usize,
    words: Vec<u64>,
    addrs: Vec<u64>,
    index: HashMap<u64, u32>,
    head: usize,
    len: usize,
}

impl RecordingTable {
    /// `capacity` rows of `row_cap` timestamps each.
    pub fn new(capacity: usize, row_cap: usize) -> Self {
        let stride = words_per_row(row_cap);
        RecordingTable {
            capacity,
            row_cap,
            stride,
            words: vec![0; capacity * stride],
            addrs: vec![0; capacity],
            index: HashMap::with_capacity(capacity.min(1 << 16)),
            head: 0,
            len: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn contains(&self, addr: u64) -> bool {
        self.index.contains_key(&addr)
    }

    pub fn get(&self, addr: u64) -> Option<RowView<'_>> {
        self.index.get(&addr).map(|&slot| self.view(slot as usize))
    }

    fn view(&self, slot: usize) -> RowView<'_> {
        RowView::new(self.addrs[slot], &self.words[slot * self.stride..(slot + 1) * self.stride])
    }

    fn row_mut(&mut self, slot: usize) -> &mut [u64] {
        &mut self.words[slot * self.stride..(slot + 1) * self.stride]
    }

    /// Table plus index bytes at full occupancy.
    pub fn bytes(&self) -> u64 {
        Self::bytes_for(self.capacity, self.row_cap)
    }

    pub fn bytes_for(capacity: usize, row_cap: usize) -> u64 {
        capacity as u64 * (words_per_row(row_cap) as u64 * 8 + INDEX_ENTRY_BYTES)
    }

    /// Appends `ts` to the row of `addr`, allocating a row if needed.
    ///
    /// Returns the row once it holds `row_cap` timestamps; it has then been
    /// removed and the table compacted.
    pub fn append(&mut self, addr: u64, ts: u16) -> Option<TimestampRow> {
        if self.capacity == 0 {
            return None;
        }
        let slot = match self.index.get(&addr) {
            Some(&slot) => slot as usize,
            None => self.allocate(addr),
        };
        packed_push(self.row_mut(slot), ts);
        if packed_len(self.row_mut(slot)) < self.row_cap {
            return None;
        }
        let mut row = TimestampRow::new(addr, self.row_cap);
        for t in self.view(slot).iter() {
            row.push(t);
        }
        self.remove_slot(slot);
        Some(row)
    }

    fn allocate(&mut self, addr: u64) -> usize {
        let slot = self.head;
        if self.len < self.capacity {
            self.len += 1;
        } else {
            // Full: `head` is the oldest row.
            self.index.remove(&self.addrs[slot]);
        }
        self.head = (self.head + 1) % self.capacity;
        self.row_mut(slot).fill(0);
        self.addrs[slot] = addr;
        self.index.insert(addr, slot as u32);
        slot
    }

    /// Frees `slot` by moving the most recently filled row into it.
    fn remove_slot(&mut self, slot: usize) {
        let last = (self.head + self.capacity - 1) % self.capacity;
        self.index.remove(&self.addrs[slot]);
        if slot != last {
            let stride = self.stride;
            self.words.copy_within(last * stride..(last + 1) * stride, slot * stride);
            self.addrs[slot] = self.addrs[last];
            self.index.insert(self.addrs[slot], slot as u32);
        }
        self.row_mut(last).fill(0);
        self.head = last;
        self.len -= 1;
    }

    /// Checks the index against the row storage; used by tests and fuzzers.
    pub fn check_consistency(&self) -> Result<(), String> {
        if self.index.len() != self.len {
            return Err(format!("index has {} entries, table {}", self.index.len(), self.len));
        }
        for (&addr, &slot) in &self.index {
            let row = self.view(slot as usize);
            if row.addr != addr {
                return Err(format!("addr {addr} indexed at slot {slot} holding {}", row.addr));
            }
            if row.is_empty() || row.len() >= self.row_cap.max(1) {
                return Err(format!("addr {addr} has {} timestamps", row.len()));
            }
        }
        Ok(())
    }
}

/// Outcome of appending to the mining table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MiningAppend {
    /// Block has no row in the table.
    Absent,
    Appended,
    /// Row already holds the maximum number of timestamps.
    Dropped,
}

#[derive(Debug, Clone)]
pub struct MiningTable {
    capacity: usize,
    row_cap: usize,
    stride: usize,
    words: Vec<u64>,
    addrs: Vec<u64>,
    index: HashMap<u64, u32>,
    len: usize,
}

impl MiningTable {
    pub fn new(capacity: usize, row_cap: usize) -> Self {
        let stride = words_per_row(row_cap);
        MiningTable {
            capacity,
            row_cap,
            stride,
            words: vec![0; capacity * stride],
            addrs: vec![0; capacity],
            index: HashMap::with_capacity(capacity.min(1 << 16)),
            len: 0,
        }
    }

    /// Table sized to `rows`, pre-filled with them in order.
    pub fn from_rows(row_cap: usize, rows: &[TimestampRow]) -> Self {
        let mut table = MiningTable::new(rows.len(), row_cap);
        for row in rows {
            table.insert(row.view());
        }
        table
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn row_capacity(&self) -> usize {
        self.row_cap
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn is_full(&self) -> bool {
        self.len >= self.capacity
    }

    pub fn contains(&self, addr: u64) -> bool {
        self.index.contains_key(&addr)
    }

    pub fn get(&self, addr: u64) -> Option<RowView<'_>> {
        self.index.get(&addr).map(|&slot| self.row(slot as usize))
    }

    /// Row in slot `slot`, slots being numbered in insertion order.
    pub fn row(&self, slot: usize) -> RowView<'_> {
        debug_assert!(slot < self.len);
        RowView::new(self.addrs[slot], &self.words[slot * self.stride..(slot + 1) * self.stride])
    }

    pub fn rows(&self) -> impl Iterator<Item = RowView<'_>> + '_ {
        (0..self.len).map(move |slot| self.row(slot))
    }

    pub fn bytes(&self) -> u64 {
        Self::bytes_for(self.capacity, self.row_cap)
    }

    pub fn bytes_for(capacity: usize, row_cap: usize) -> u64 {
        capacity as u64 * (words_per_row(row_cap) as u64 * 8 + INDEX_ENTRY_BYTES)
    }

    /// Copies `row` into the next free slot. Returns `false` if the table is
    /// full or already holds the block.
    pub fn insert(&mut self, row: RowView<'_>) -> bool {
        if self.is_full() || self.index.contains_key(&row.addr) {
            return false;
        }
        let slot = self.len;
        self.len += 1;
        self.addrs[slot] = row.addr;
        self.index.insert(row.addr, slot as u32);
        let stride = self.stride;
        let dst = &mut self.words[slot * stride..(slot + 1) * stride];
        dst.fill(0);
        for ts in row.iter().take(self.row_cap) {
            packed_push(dst, ts);
        }
        true
    }

    pub fn append(&mut self, addr: u64, ts: u16) -> MiningAppend {
        let Some(&slot) = self.index.get(&addr) else {
            return MiningAppend::Absent;
        };
        let stride = self.stride;
        let words = &mut self.words[slot as usize * stride..(slot as usize + 1) * stride];
        if packed_len(words) >= self.row_cap {
            return MiningAppend::Dropped;
        }
        packed_push(words, ts);
        MiningAppend::Appended
    }

    pub fn clear(&mut self) {
        self.words.fill(0);
        self.index.clear();
        self.len = 0;
    }

    /// Owned copies of all rows in slot order.
    pub fn snapshot(&self) -> Vec<TimestampRow> {
        self.rows().map(|r| r.to_row()).collect()
    }
}
