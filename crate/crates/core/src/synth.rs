//! Seeded synthetic workloads.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::trace::RESERVED_ADDR;

/// Address range used for random block numbers.
const ADDR_SPACE: u64 = 1 << 40;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n` distinct random block addresses.
pub fn distinct_addrs(n: usize, seed: u64) -> Vec<u64> {
    let mut rng = rng(seed);
    let mut seen = HashSet::with_capacity(n);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let a = rng.gen_range(0..ADDR_SPACE);
        if a != RESERVED_ADDR && seen.insert(a) {
            out.push(a);
        }
    }
    out
}

/// Pairs `(a_i, b_i)` of distinct random blocks, each requested as `a_i`
/// immediately followed by `b_i`, `rounds` times over.
///
/// The pairs are split into two halves and every round plays a shuffle of
/// the first half and then a shuffle of the second, so consecutive uses of a
/// pair are separated by at least `pairs` other blocks.
pub fn paired(pairs: usize, rounds: usize, seed: u64) -> (Vec<(u64, u64)>, Vec<u64>) {
    let addrs = distinct_addrs(2 * pairs, seed);
    let list: Vec<(u64, u64)> = addrs.chunks_exact(2).map(|c| (c[0], c[1])).collect();
    let mut rng = rng(seed ^ 0x9e37_79b9_7f4a_7c15);
    let (first, second) = list.split_at(pairs / 2);
    let mut trace = Vec::with_capacity(2 * pairs * rounds);
    for _ in 0..rounds {
        for half in [first, second] {
            let mut order = half.to_vec();
            order.shuffle(&mut rng);
            for (a, b) in order {
                trace.push(a);
                trace.push(b);
            }
        }
    }
    (list, trace)
}

/// `start, start+1, ..` for `len` blocks.
pub fn sequential(start: u64, len: u64) -> Vec<u64> {
    (start..start + len).collect()
}

/// `streams` sequential runs of `len` blocks each, interleaved in random
/// order. Streams start far apart so they never overlap.
pub fn interleaved(streams: usize, len: u64, seed: u64) -> Vec<u64> {
    let mut rng = rng(seed);
    let mut next: Vec<(u64, u64)> = (0..streams as u64).map(|s| (s << 32, (s << 32) + len)).collect();
    let mut out = Vec::with_capacity(streams * len as usize);
    while !next.is_empty() {
        let k = rng.gen_range(0..next.len());
        out.push(next[k].0);
        next[k].0 += 1;
        if next[k].0 == next[k].1 {
            next.swap_remove(k);
        }
    }
    out
}

/// `n` requests drawn uniformly from `0..universe`.
pub fn uniform(n: usize, universe: u64, seed: u64) -> Vec<u64> {
    let mut rng = rng(seed);
    (0..n).map(|_| rng.gen_range(0..universe)).collect()
}
