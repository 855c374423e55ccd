//! Capacity-bounded block cache with LRU or FIFO replacement.
//!
//! Entries live in an index-linked list ordered from the eviction end (head)
//! to the insertion end (tail). LRU moves an entry to the tail on every hit,
//! FIFO leaves the order alone. When second chance is enabled, a prefetched
//! block that reaches the head without ever being hit is moved back to the
//! tail once instead of being evicted.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::ConfigError;
use crate::prefetch::PrefetchSource;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    Lru,
    Fifo,
}

impl FromStr for Policy {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "lru" => Ok(Policy::Lru),
            "fifo" => Ok(Policy::Fifo),
            other => Err(ConfigError::new(format!(
                "unknown cache policy `{other}` (expected lru or fifo)"
            ))),
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Policy::Lru => "lru",
            Policy::Fifo => "fifo",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Origin {
    Demand,
    Prefetch(PrefetchSource),
}

impl Origin {
    pub fn prefetch_source(self) -> Option<PrefetchSource> {
        match self {
            Origin::Demand => None,
            Origin::Prefetch(src) => Some(src),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CacheEntry {
    pub addr: u64,
    pub origin: Origin,
    /// Hit at least once since insertion.
    pub touched: bool,
    /// The one second chance of this residency has been spent.
    pub second_chance_used: bool,
}

impl CacheEntry {
    fn new(addr: u64, origin: Origin) -> Self {
        CacheEntry {
            addr,
            origin,
            touched: false,
            second_chance_used: false,
        }
    }

    /// Prefetched and never used.
    pub fn is_unused_prefetch(&self) -> bool {
        matches!(self.origin, Origin::Prefetch(_)) && !self.touched
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CacheConfig {
    pub capacity_blocks: u64,
    pub policy: Policy,
    pub second_chance: bool,
    /// Blocks reserved for prefetcher metadata.
    pub metadata_charge_blocks: u64,
}

impl CacheConfig {
    pub fn new(capacity_blocks: u64, policy: Policy) -> Self {
        CacheConfig {
            capacity_blocks,
            policy,
            second_chance: false,
            metadata_charge_blocks: 0,
        }
    }

    pub fn with_second_chance(mut self, on: bool) -> Self {
        self.second_chance = on;
        self
    }

    pub fn effective_capacity(&self) -> Result<u64, ConfigError> {
        match self.capacity_blocks.checked_sub(self.metadata_charge_blocks) {
            Some(cap) if cap >= 1 => Ok(cap),
            _ => Err(ConfigError::new(format!(
                "metadata needs {} of {} cache blocks, leaving no room for data",
                self.metadata_charge_blocks, self.capacity_blocks
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lookup {
    Miss,
    Hit {
        origin: Origin,
        /// This hit is the first use of the entry since it was inserted.
        first_touch: bool,
    },
}

impl Lookup {
    pub fn is_hit(self) -> bool {
        matches!(self, Lookup::Hit { .. })
    }
}

/// Outcome of an insertion.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Insertion {
    /// Entries that left the cache.
    pub evicted: Vec<CacheEntry>,
    /// Addresses that were given their second chance during this insertion.
    pub reinserted: Vec<u64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CacheStats {
    pub evictions: u64,
    pub second_chances: u64,
}

pub type EvictionHook = Box<dyn FnMut(&CacheEntry)>;

const NIL: u32 = u32::MAX;

#[derive(Debug, Clone)]
struct Node {
    entry: CacheEntry,
    prev: u32,
    next: u32,
}

pub struct BlockCache {
    capacity: u64,
    policy: Policy,
    second_chance: bool,
    nodes: Vec<Node>,
    free: Vec<u32>,
    index: HashMap<u64, u32>,
    head: u32,
    tail: u32,
    hook: Option<EvictionHook>,
    stats: CacheStats,
}

impl fmt::Debug for BlockCache {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BlockCache")
            .field("capacity", &self.capacity)
            .field("policy", &self.policy)
            .field("second_chance", &self.second_chance)
            .field("len", &self.len())
            .finish()
    }
}

impl BlockCache {
    pub fn new(config: &CacheConfig) -> Result<Self, ConfigError> {
        let capacity = config.effective_capacity()?;
        if capacity >= u64::from(NIL) {
            return Err(ConfigError::new(format!("cache capacity {capacity} is too large")));
        }
        Ok(BlockCache {
            capacity,
            policy: config.policy,
            second_chance: config.second_chance,
            nodes: Vec::new(),
            free: Vec::new(),
            index: HashMap::new(),
            head: NIL,
            tail: NIL,
            hook: None,
            stats: CacheStats::default(),
        })
    }

    /// Blocks available for data after metadata charging.
    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn contains(&self, addr: u64) -> bool {
        self.index.contains_key(&addr)
    }

    pub fn get(&self, addr: u64) -> Option<&CacheEntry> {
        self.index.get(&addr).map(|&i| &self.nodes[i as usize].entry)
    }

    pub fn stats(&self) -> CacheStats {
        self.stats
    }

    pub fn set_eviction_hook(&mut self, hook: impl FnMut(&CacheEntry) + 'static) {
        self.hook = Some(Box::new(hook));
    }

    pub fn clear_eviction_hook(&mut self) {
        self.hook = None;
    }

    /// Entries from the eviction end to the insertion end.
    pub fn iter(&self) -> impl Iterator<Item = &CacheEntry> + '_ {
        let mut cur = self.head;
        std::iter::from_fn(move || {
            if cur == NIL {
                return None;
            }
            let node = &self.nodes[cur as usize];
            cur = node.next;
            Some(&node.entry)
        })
    }

    pub fn lookup(&mut self, addr: u64) -> Lookup {
        let Some(&idx) = self.index.get(&addr) else {
            return Lookup::Miss;
        };
        let entry = &mut self.nodes[idx as usize].entry;
        let first_touch = !entry.touched;
        entry.touched = true;
        let origin = entry.origin;
        if self.policy == Policy::Lru {
            self.unlink(idx);
            self.push_tail(idx);
        }
        Lookup::Hit { origin, first_touch }
    }

    pub fn insert(&mut self, addr: u64, origin: Origin) -> Vec<CacheEntry> {
        self.insert_detailed(addr, origin).evicted
    }

    /// Inserts `addr`, evicting as needed.
    ///
    /// Re-inserting a resident block only refreshes LRU recency and upgrades a
    /// prefetched entry to demand when `origin` is demand.
    pub fn insert_detailed(&mut self, addr: u64, origin: Origin) -> Insertion {
        let mut out = Insertion::default();
        if let Some(&idx) = self.index.get(&addr) {
            if origin == Origin::Demand {
                self.nodes[idx as usize].entry.origin = Origin::Demand;
            }
            if self.policy == Policy::Lru {
                self.unlink(idx);
                self.push_tail(idx);
            }
            return out;
        }
        while self.index.len() as u64 >= self.capacity {
            let victim = self.head;
            let entry = &mut self.nodes[victim as usize].entry;
            if self.second_chance && entry.is_unused_prefetch() && !entry.second_chance_used {
                entry.second_chance_used = true;
                out.reinserted.push(entry.addr);
                self.stats.second_chances += 1;
                self.unlink(victim);
                self.push_tail(victim);
                continue;
            }
            let evicted = self.remove_node(victim);
            self.stats.evictions += 1;
            if let Some(hook) = self.hook.as_mut() {
                hook(&evicted);
            }
            out.evicted.push(evicted);
        }
        let node = Node {
            entry: CacheEntry::new(addr, origin),
            prev: NIL,
            next: NIL,
        };
        let idx = match self.free.pop() {
            Some(i) => {
                self.nodes[i as usize] = node;
                i
            }
            None => {
                self.nodes.push(node);
                (self.nodes.len() - 1) as u32
            }
        };
        self.push_tail(idx);
        self.index.insert(addr, idx);
        out
    }

    fn remove_node(&mut self, idx: u32) -> CacheEntry {
        self.unlink(idx);
        let entry = self.nodes[idx as usize].entry;
        self.index.remove(&entry.addr);
        self.free.push(idx);
        entry
    }

    fn unlink(&mut self, idx: u32) {
        let Node { prev, next, .. } = self.nodes[idx as usize];
        if prev == NIL {
            self.head = next;
        } else {
            self.nodes[prev as usize].next = next;
        }
        if next == NIL {
            self.tail = prev;
        } else {
            self.nodes[next as usize].prev = prev;
        }
        let node = &mut self.nodes[idx as usize];
        node.prev = NIL;
        node.next = NIL;
    }

    fn push_tail(&mut self, idx: u32) {
        let old_tail = self.tail;
        {
            let node = &mut self.nodes[idx as usize];
            node.prev = old_tail;
            node.next = NIL;
        }
        if old_tail == NIL {
            self.head = idx;
        } else {
            self.nodes[old_tail as usize].next = idx;
        }
        self.tail = idx;
    }
}
