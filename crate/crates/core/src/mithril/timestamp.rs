//! 15-bit logical timestamps packed four to a 64-bit word.
//!
//! Word layout (little end first):
//!
//! ```text
//! bits  0..15  timestamp k*4+0
//! bits 15..30  timestamp k*4+1
//! bits 30..45  timestamp k*4+2
//! bits 45..60  timestamp k*4+3
//! bits 60..64  row length (first word of a row only)
//! ```
//!
//! The 4-bit length field caps a row at 15 timestamps.

use std::fmt;

pub const TS_BITS: u32 = 15;
pub const TS_MODULUS: u32 = 1 << TS_BITS;
pub const TS_PER_WORD: usize = 4;
/// Largest row length the length field can hold.
pub const MAX_ROW_LEN: usize = 15;

const TS_MASK: u64 = (1 << TS_BITS) - 1;
const LEN_SHIFT: u32 = 60;
const HALF: i32 = 1 << (TS_BITS - 1);

/// Keeps the low 15 bits of a logical timestamp.
pub fn compress_ts(ts: u64) -> u16 {
    (ts & TS_MASK) as u16
}

/// Signed distance `a - b` between two compressed timestamps, taking the
/// representative in `[-16384, 16383]`.
pub fn ts_diff(a: u16, b: u16) -> i32 {
    let d = (i32::from(a) - i32::from(b)).rem_euclid(TS_MODULUS as i32);
    if d >= HALF {
        d - TS_MODULUS as i32
    } else {
        d
    }
}

/// Words needed for a row of `capacity` timestamps.
pub fn words_per_row(capacity: usize) -> usize {
    capacity.div_ceil(TS_PER_WORD).max(1)
}

pub(crate) fn packed_len(words: &[u64]) -> usize {
    (words[0] >> LEN_SHIFT) as usize
}

pub(crate) fn packed_get(words: &[u64], k: usize) -> u16 {
    let shift = (k % TS_PER_WORD) as u32 * TS_BITS;
    ((words[k / TS_PER_WORD] >> shift) & TS_MASK) as u16
}

/// Appends `ts`; the caller guarantees room in `words` and in the length field.
pub(crate) fn packed_push(words: &mut [u64], ts: u16) {
    let k = packed_len(words);
    debug_assert!(k < MAX_ROW_LEN && k < words.len() * TS_PER_WORD);
    let shift = (k % TS_PER_WORD) as u32 * TS_BITS;
    let w = &mut words[k / TS_PER_WORD];
    *w = (*w & !(TS_MASK << shift)) | (u64::from(ts) << shift);
    words[0] = (words[0] & !(0xF << LEN_SHIFT)) | (((k + 1) as u64) << LEN_SHIFT);
}

/// Borrowed view of one packed row.
#[derive(Clone, Copy)]
pub struct RowView<'a> {
    pub addr: u64,
    words: &'a [u64],
}

impl<'a> RowView<'a> {
    pub(crate) fn new(addr: u64, words: &'a [u64]) -> Self {
        RowView { addr, words }
    }

    pub fn len(&self) -> usize {
        packed_len(self.words)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, k: usize) -> u16 {
        debug_assert!(k < self.len());
        packed_get(self.words, k)
    }

    pub fn first(&self) -> Option<u16> {
        (!self.is_empty()).then(|| self.get(0))
    }

    pub fn iter(&self) -> impl Iterator<Item = u16> + 'a {
        let words = self.words;
        (0..packed_len(words)).map(move |k| packed_get(words, k))
    }

    pub fn words(&self) -> &'a [u64] {
        self.words
    }

    pub fn to_row(&self) -> TimestampRow {
        TimestampRow {
            addr: self.addr,
            capacity: self.len(),
            words: self.words.to_vec(),
        }
    }
}

impl fmt::Debug for RowView<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Row")
            .field("addr", &self.addr)
            .field("ts", &self.iter().collect::<Vec<_>>())
            .finish()
    }
}

/// An owned packed row: a block address and its recorded timestamps.
#[derive(Clone, PartialEq, Eq)]
pub struct TimestampRow {
    addr: u64,
    capacity: usize,
    words: Vec<u64>,
}

impl TimestampRow {
    /// Empty row with room for `capacity` timestamps (at most 15).
    pub fn new(addr: u64, capacity: usize) -> Self {
        assert!(capacity <= MAX_ROW_LEN, "row capacity {capacity} exceeds {MAX_ROW_LEN}");
        TimestampRow {
            addr,
            capacity,
            words: vec![0; words_per_row(capacity)],
        }
    }

    /// Row holding `timestamps` (compressed on the way in).
    pub fn with_timestamps(addr: u64, timestamps: &[u64]) -> Self {
        let mut row = Self::new(addr, timestamps.len());
        for &ts in timestamps {
            row.push(compress_ts(ts));
        }
        row
    }

    pub fn addr(&self) -> u64 {
        self.addr
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        packed_len(&self.words)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Appends a compressed timestamp; `false` when the row is full.
    pub fn push(&mut self, ts: u16) -> bool {
        if self.len() >= self.capacity() {
            return false;
        }
        packed_push(&mut self.words, ts & TS_MASK as u16);
        true
    }

    pub fn get(&self, k: usize) -> u16 {
        self.view().get(k)
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn view(&self) -> RowView<'_> {
        RowView::new(self.addr, &self.words)
    }

    pub fn timestamps(&self) -> Vec<u16> {
        self.view().iter().collect()
    }
}

impl fmt::Debug for TimestampRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.view().fmt(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn compress_examples() {
        assert_eq!(compress_ts(0), 0);
        assert_eq!(compress_ts(32768), 0);
        assert_eq!(compress_ts(40000), 7232);
    }

    #[test]
    fn diff_examples() {
        assert_eq!(ts_diff(10, 7), 3);
        assert_eq!(ts_diff(2, 32766), 4);
        assert_eq!(ts_diff(7, 10), -3);
        assert_eq!(ts_diff(0, 16384), -16384);
        assert_eq!(ts_diff(16383, 0), 16383);
    }

    #[test]
    fn packing_layout() {
        let mut row = TimestampRow::new(9, 8);
        assert_eq!(row.words().len(), 2);
        for ts in [1, 2, 3, 4, 0x7fff] {
            assert!(row.push(ts));
        }
        let w = row.words();
        assert_eq!(w[0] >> 60, 5);
        assert_eq!(w[0] & 0x7fff, 1);
        assert_eq!((w[0] >> 45) & 0x7fff, 4);
        assert_eq!(w[1] & 0x7fff, 0x7fff);
        assert_eq!(w[1] >> 60, 0);
        assert_eq!(row.timestamps(), vec![1, 2, 3, 4, 0x7fff]);
    }

    #[test]
    fn push_respects_capacity() {
        let mut row = TimestampRow::new(1, 2);
        assert!(row.push(1));
        assert!(row.push(2));
        assert!(!row.push(3));
        assert_eq!(row.len(), 2);

        let mut row = TimestampRow::new(1, 15);
        for t in 0..15 {
            assert!(row.push(t));
        }
        assert!(!row.push(99));
        assert_eq!(row.len(), 15);
    }

    proptest! {
        #[test]
        fn diff_is_antisymmetric(a in 0u16..32768, b in 0u16..32768) {
            let d = ts_diff(a, b);
            prop_assert!((-16384..=16383).contains(&d));
            if d != -16384 {
                prop_assert_eq!(ts_diff(b, a), -d);
            }
        }

        #[test]
        fn diff_recovers_small_gaps(t in 0u64..1 << 40, gap in 0u64..16384) {
            prop_assert_eq!(ts_diff(compress_ts(t + gap), compress_ts(t)), gap as i32);
        }

        #[test]
        fn row_roundtrip(ts in proptest::collection::vec(0u64..1 << 30, 0..=15)) {
            let row = TimestampRow::with_timestamps(3, &ts);
            let want: Vec<u16> = ts.iter().map(|&t| compress_ts(t)).collect();
            prop_assert_eq!(row.timestamps(), want);
        }
    }
}
