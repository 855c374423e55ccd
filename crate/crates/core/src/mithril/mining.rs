//! Weak/strong association checks and the mining pass over a full mining table.

use super::tables::MiningTable;
use super::timestamp::{ts_diff, RowView};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Association {
    /// Every timestamp pair within the lookahead range.
    Weak,
    /// Weak, and at least one pair exactly one apart.
    Strong,
}

/// Tests whether two rows are associated under `assoc`.
///
/// Rows of different lengths are never associated.
pub fn check_association(a: RowView<'_>, b: RowView<'_>, assoc: Association, lookahead: u32) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut consecutive = false;
    for (x, y) in a.iter().zip(b.iter()) {
        let gap = ts_diff(x, y).unsigned_abs();
        if gap > lookahead {
            return false;
        }
        if gap == 1 {
            consecutive = true;
        }
    }
    match assoc {
        Association::Weak => true,
        Association::Strong => consecutive,
    }
}

/// Slot order of `table` sorted by first timestamp.
///
/// Comparison is wrap-aware relative to the first timestamp of slot 0, the
/// earliest row to enter the table; ties keep slot order.
pub fn sorted_slots(table: &MiningTable) -> Vec<usize> {
    let Some(anchor) = table.rows().next().and_then(|r| r.first()) else {
        return Vec::new();
    };
    let mut keyed: Vec<(i32, usize)> = table
        .rows()
        .enumerate()
        .map(|(slot, row)| (row.first().map_or(i32::MAX, |f| ts_diff(f, anchor)), slot))
        .collect();
    keyed.sort_by_key(|&(key, _)| key);
    keyed.into_iter().map(|(_, slot)| slot).collect()
}

/// Mines associated block pairs from `table`.
///
/// Rows are scanned in first-timestamp order. For each row with at least
/// `min_support` timestamps, later rows are checked until their first
/// timestamp is more than `lookahead` past it: the first match only needs a
/// weak association, every further match for the same row must be strong.
/// Each accepted pair is returned in both directions, `(i, j)` then `(j, i)`.
pub fn mine(table: &MiningTable, min_support: usize, lookahead: u32) -> Vec<(u64, u64)> {
    let order = sorted_slots(table);
    let mut pairs = Vec::new();
    for (pos, &i) in order.iter().enumerate() {
        let row_i = table.row(i);
        if row_i.len() < min_support {
            continue;
        }
        let Some(first_i) = row_i.first() else { continue };
        let mut assoc = Association::Weak;
        for &j in &order[pos + 1..] {
            let row_j = table.row(j);
            if check_association(row_i, row_j, assoc, lookahead) {
                pairs.push((row_i.addr, row_j.addr));
                pairs.push((row_j.addr, row_i.addr));
                assoc = Association::Strong;
            }
            match row_j.first() {
                Some(first_j) if ts_diff(first_j, first_i) > lookahead as i32 => break,
                _ => {}
            }
        }
    }
    pairs
}
