//! Probability-graph prefetching.
//!
//! Every request adds an arc from each block seen in the last `window`
//! requests to the requested block. On a request, successors whose share of
//! the node's outgoing arc weight reaches `prob_threshold` are prefetched.
//! The graph is charged against a byte budget; when it overflows, whole
//! predecessor nodes are dropped in least-recently-used order.

use std::collections::{BTreeMap, HashMap, VecDeque};

use serde::Serialize;

use crate::cache::CacheEntry;
use crate::error::ConfigError;
use crate::prefetch::{PrefetchDecision, PrefetchSource, Prefetcher};

/// Per-node overhead: address, recency stamp, arc-map header.
pub const NODE_BYTES: u64 = 24;
/// Per-arc cost: successor address plus a 32-bit count, padded.
pub const EDGE_BYTES: u64 = 16;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PgConfig {
    pub window: usize,
    pub prob_threshold: f64,
    pub max_prefetch: usize,
    /// Fraction of cache bytes the graph may occupy.
    pub max_metadata: f64,
}

impl Default for PgConfig {
    fn default() -> Self {
        PgConfig {
            window: 10,
            prob_threshold: 0.5,
            max_prefetch: 2,
            max_metadata: 0.10,
        }
    }
}

impl PgConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.window == 0 {
            return Err(ConfigError::new("pg window must be at least 1"));
        }
        if !(self.prob_threshold > 0.0 && self.prob_threshold <= 1.0) {
            return Err(ConfigError::new(format!(
                "pg prob_threshold must be in (0, 1], got {}",
                self.prob_threshold
            )));
        }
        if self.max_prefetch == 0 {
            return Err(ConfigError::new("pg max_prefetch must be at least 1"));
        }
        if !(self.max_metadata > 0.0 && self.max_metadata < 1.0) {
            return Err(ConfigError::new(format!(
                "pg max_metadata must be in (0, 1), got {}",
                self.max_metadata
            )));
        }
        Ok(())
    }

    pub fn budget_bytes(&self, cache_bytes: u64) -> u64 {
        (self.max_metadata * cache_bytes as f64).floor() as u64
    }
}

#[derive(Debug, Clone, Default)]
struct Node {
    successors: HashMap<u64, u32>,
    total: u64,
    stamp: u64,
}

#[derive(Debug, Clone)]
pub struct PgPrefetcher {
    config: PgConfig,
    budget: u64,
    window: VecDeque<u64>,
    nodes: HashMap<u64, Node>,
    recency: BTreeMap<u64, u64>,
    edges: u64,
    tick: u64,
}

impl PgPrefetcher {
    pub fn new(config: PgConfig, budget_bytes: u64) -> Result<Self, ConfigError> {
        config.validate()?;
        Ok(PgPrefetcher {
            window: VecDeque::with_capacity(config.window + 1),
            budget: budget_bytes,
            nodes: HashMap::new(),
            recency: BTreeMap::new(),
            edges: 0,
            tick: 0,
            config,
        })
    }

    pub fn config(&self) -> &PgConfig {
        &self.config
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> u64 {
        self.edges
    }

    /// Stored co-occurrence count for the arc `from -> to`.
    pub fn count(&self, from: u64, to: u64) -> u32 {
        self.nodes
            .get(&from)
            .and_then(|n| n.successors.get(&to))
            .copied()
            .unwrap_or(0)
    }

    /// Outgoing arcs of `from` with their normalised probabilities, sorted by
    /// descending count then address.
    pub fn successors(&self, from: u64) -> Vec<(u64, f64)> {
        let Some(node) = self.nodes.get(&from) else {
            return Vec::new();
        };
        let mut arcs: Vec<(u64, u32)> = node.successors.iter().map(|(&a, &c)| (a, c)).collect();
        arcs.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        arcs.into_iter()
            .map(|(a, c)| (a, f64::from(c) / node.total as f64))
            .collect()
    }

    fn touch(&mut self, addr: u64) {
        self.tick += 1;
        let tick = self.tick;
        let node = self.nodes.entry(addr).or_default();
        if node.stamp != 0 {
            self.recency.remove(&node.stamp);
        }
        node.stamp = tick;
        self.recency.insert(tick, addr);
    }

    fn enforce_budget(&mut self) {
        while self.metadata_bytes() > self.budget {
            let Some((_, victim)) = self.recency.pop_first() else {
                break;
            };
            if let Some(node) = self.nodes.remove(&victim) {
                self.edges -= node.successors.len() as u64;
            }
        }
    }
}

impl Prefetcher for PgPrefetcher {
    fn source(&self) -> PrefetchSource {
        PrefetchSource::Pg
    }

    fn on_request(&mut self, addr: u64, _hit: bool) -> PrefetchDecision {
        let mut preds: Vec<u64> = self.window.iter().copied().filter(|&q| q != addr).collect();
        preds.sort_unstable();
        preds.dedup();
        for q in preds {
            self.touch(q);
            let node = self.nodes.get_mut(&q).expect("touched node exists");
            let count = node.successors.entry(addr).or_insert(0);
            if *count == 0 {
                self.edges += 1;
            }
            *count = count.saturating_add(1);
            node.total += 1;
        }
        self.window.push_back(addr);
        if self.window.len() > self.config.window {
            self.window.pop_front();
        }

        let decision = match self.nodes.get(&addr) {
            Some(node) if node.total > 0 => {
                let total = node.total as f64;
                let mut arcs: Vec<(u64, u32)> = node
                    .successors
                    .iter()
                    .filter(|(_, &c)| f64::from(c) / total >= self.config.prob_threshold)
                    .map(|(&a, &c)| (a, c))
                    .collect();
                arcs.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
                arcs.truncate(self.config.max_prefetch);
                PrefetchDecision::new(addr, arcs.into_iter().map(|(a, _)| a))
            }
            _ => PrefetchDecision::empty(),
        };
        if self.nodes.contains_key(&addr) {
            self.touch(addr);
        }
        self.enforce_budget();
        decision
    }

    fn on_evict(&mut self, _entry: &CacheEntry) {}

    fn metadata_bytes(&self) -> u64 {
        self.config.window as u64 * 8 + self.nodes.len() as u64 * NODE_BYTES + self.edges * EDGE_BYTES
    }

    fn max_metadata_bytes(&self) -> u64 {
        self.budget
    }
}
