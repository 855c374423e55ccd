//! The interface shared by every prefetcher in a stack.

use std::fmt;

use serde::Serialize;

use crate::cache::CacheEntry;

/// Which layer asked for a block to be prefetched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PrefetchSource {
    Mithril,
    Amp,
    Pg,
}

impl PrefetchSource {
    pub const ALL: [PrefetchSource; 3] = [PrefetchSource::Mithril, PrefetchSource::Amp, PrefetchSource::Pg];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            PrefetchSource::Mithril => "mithril",
            PrefetchSource::Amp => "amp",
            PrefetchSource::Pg => "pg",
        }
    }
}

impl fmt::Display for PrefetchSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Ordered, duplicate-free list of blocks to bring into the cache.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PrefetchDecision {
    addrs: Vec<u64>,
}

impl PrefetchDecision {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds a decision for a request to `trigger`, dropping `trigger` itself
    /// and any repeated address while keeping first-seen order.
    pub fn new(trigger: u64, candidates: impl IntoIterator<Item = u64>) -> Self {
        let mut addrs: Vec<u64> = Vec::new();
        for addr in candidates {
            if addr != trigger && !addrs.contains(&addr) {
                addrs.push(addr);
            }
        }
        PrefetchDecision { addrs }
    }

    pub fn addrs(&self) -> &[u64] {
        &self.addrs
    }

    pub fn is_empty(&self) -> bool {
        self.addrs.is_empty()
    }

    pub fn len(&self) -> usize {
        self.addrs.len()
    }
}

/// A prefetcher observes demand requests and cache evictions.
pub trait Prefetcher {
    fn source(&self) -> PrefetchSource;

    /// Called once per demand request after the cache lookup.
    fn on_request(&mut self, addr: u64, hit: bool) -> PrefetchDecision;

    /// Called for every block truly evicted from the cache.
    fn on_evict(&mut self, _entry: &CacheEntry) {}

    /// Metadata currently held, in bytes.
    fn metadata_bytes(&self) -> u64;

    /// Upper bound on [`Prefetcher::metadata_bytes`] over the whole run.
    fn max_metadata_bytes(&self) -> u64;
}
