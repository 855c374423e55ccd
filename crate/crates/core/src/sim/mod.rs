//! Trace replay through a cache with optional prefetching layers.
//!
//! Per demand request the stack does, in order:
//!
//! 1. cache lookup; a miss inserts the block as demand;
//! 2. Mithril and then the baseline see the request and its hit/miss outcome;
//! 3. Mithril's candidates are inserted, then the baseline's, skipping
//!    blocks already resident.
//!
//! Every eviction is reported to both prefetchers. Metadata is charged up
//! front: the layers' maximum footprint, rounded up to whole blocks, is
//! removed from the cache capacity before the run starts.

mod report;

use std::collections::{HashMap, HashSet};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::baseline::{pg, AmpConfig, AmpPrefetcher, PgConfig, PgPrefetcher};
use crate::cache::{BlockCache, CacheConfig, Lookup, Origin};
use crate::error::ConfigError;
use crate::mithril::{MithrilConfig, MithrilEngine};
use crate::prefetch::{PrefetchDecision, PrefetchSource, Prefetcher};
use crate::trace::DEFAULT_BLOCK_SIZE;

pub use report::{write_csv, write_jsonl, LayerCounters, SimulationReport};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
    #[error("invariant violated: {0}")]
    Invariant(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Baseline {
    None,
    Amp(AmpConfig),
    Pg(PgConfig),
}

impl Baseline {
    pub fn name(&self) -> &'static str {
        match self {
            Baseline::None => "none",
            Baseline::Amp(_) => "amp",
            Baseline::Pg(_) => "pg",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StackConfig {
    /// Any `metadata_charge_blocks` set here is reserved on top of the
    /// prefetchers' own charge.
    pub cache: CacheConfig,
    pub block_size: u64,
    pub baseline: Baseline,
    pub mithril: Option<MithrilConfig>,
}

impl StackConfig {
    pub fn new(cache: CacheConfig) -> Self {
        StackConfig {
            cache,
            block_size: DEFAULT_BLOCK_SIZE,
            baseline: Baseline::None,
            mithril: None,
        }
    }

    pub fn with_mithril(mut self, cfg: MithrilConfig) -> Self {
        self.mithril = Some(cfg);
        self
    }

    pub fn with_baseline(mut self, baseline: Baseline) -> Self {
        self.baseline = baseline;
        self
    }

    pub fn with_block_size(mut self, block_size: u64) -> Self {
        self.block_size = block_size;
        self
    }

    /// Same stack at a different nominal capacity.
    pub fn with_capacity(&self, capacity_blocks: u64) -> Self {
        let mut s = self.clone();
        s.cache.capacity_blocks = capacity_blocks;
        s
    }

    pub fn cache_bytes(&self) -> u64 {
        self.cache.capacity_blocks.saturating_mul(self.block_size)
    }
}

pub struct Simulation {
    cache: BlockCache,
    mithril: Option<MithrilEngine>,
    baseline: Option<Box<dyn Prefetcher>>,
    capacity_blocks: u64,
    charge_blocks: u64,
    budget: u64,
    seen: HashSet<u64>,
    requests: u64,
    hits: u64,
    cold_misses: u64,
    layers: [LayerCounters; 3],
    peak_metadata: u64,
}

impl Simulation {
    pub fn new(stack: &StackConfig) -> Result<Self, SimError> {
        if stack.block_size == 0 {
            return Err(ConfigError::new("block_size must be positive").into());
        }
        let cache_bytes = stack.cache_bytes();
        let mithril = stack
            .mithril
            .clone()
            .map(|cfg| MithrilEngine::new(cfg, cache_bytes))
            .transpose()?;
        let baseline: Option<Box<dyn Prefetcher>> = match &stack.baseline {
            Baseline::None => None,
            Baseline::Amp(cfg) => Some(Box::new(AmpPrefetcher::new(cfg.clone())?)),
            Baseline::Pg(cfg) => {
                cfg.validate()?;
                let budget = cfg.budget_bytes(cache_bytes);
                let floor = cfg.window as u64 * 8 + pg::NODE_BYTES + pg::EDGE_BYTES;
                if budget < floor {
                    return Err(ConfigError::new(format!(
                        "pg metadata budget of {budget} bytes cannot hold its window and one arc ({floor} bytes)"
                    ))
                    .into());
                }
                Some(Box::new(PgPrefetcher::new(cfg.clone(), budget)?))
            }
        };
        let budget = mithril.as_ref().map_or(0, |m| m.max_metadata_bytes())
            + baseline.as_ref().map_or(0, |b| b.max_metadata_bytes());
        let charge_blocks = budget.div_ceil(stack.block_size);
        let mut cache_cfg = stack.cache.clone();
        cache_cfg.metadata_charge_blocks = cache_cfg.metadata_charge_blocks.saturating_add(charge_blocks);
        let cache = BlockCache::new(&cache_cfg).map_err(|e| {
            ConfigError::new(format!(
                "{e} (capacity {} blocks, metadata charge {} blocks)",
                stack.cache.capacity_blocks, cache_cfg.metadata_charge_blocks
            ))
        })?;
        Ok(Simulation {
            cache,
            mithril,
            baseline,
            capacity_blocks: stack.cache.capacity_blocks,
            charge_blocks: cache_cfg.metadata_charge_blocks,
            budget,
            seen: HashSet::new(),
            requests: 0,
            hits: 0,
            cold_misses: 0,
            layers: [LayerCounters::default(); 3],
            peak_metadata: 0,
        })
    }

    pub fn cache(&self) -> &BlockCache {
        &self.cache
    }

    pub fn mithril(&self) -> Option<&MithrilEngine> {
        self.mithril.as_ref()
    }

    pub fn metadata_bytes(&self) -> u64 {
        self.mithril.as_ref().map_or(0, |m| m.metadata_bytes())
            + self.baseline.as_ref().map_or(0, |b| b.metadata_bytes())
    }

    /// Metadata limit charged against the cache.
    pub fn budget_bytes(&self) -> u64 {
        self.budget
    }

    fn insert(&mut self, addr: u64, origin: Origin) {
        let evicted = self.cache.insert(addr, origin);
        for entry in &evicted {
            if let Some(m) = self.mithril.as_mut() {
                m.on_evict(entry);
            }
            if let Some(b) = self.baseline.as_mut() {
                b.on_evict(entry);
            }
        }
    }

    fn issue(&mut self, source: PrefetchSource, decision: PrefetchDecision) {
        for &addr in decision.addrs() {
            let layer = &mut self.layers[source.index()];
            layer.candidates += 1;
            if self.cache.contains(addr) {
                continue;
            }
            layer.issued += 1;
            self.insert(addr, Origin::Prefetch(source));
        }
    }

    /// Replays one demand request; returns whether it hit.
    pub fn step(&mut self, addr: u64) -> Result<bool, SimError> {
        self.requests += 1;
        let hit = match self.cache.lookup(addr) {
            Lookup::Hit { origin, first_touch } => {
                if let (Some(src), true) = (origin.prefetch_source(), first_touch) {
                    self.layers[src.index()].used += 1;
                }
                self.hits += 1;
                true
            }
            Lookup::Miss => {
                if self.seen.insert(addr) {
                    self.cold_misses += 1;
                }
                self.insert(addr, Origin::Demand);
                false
            }
        };
        let from_mithril = self.mithril.as_mut().map(|m| m.handle(addr, hit));
        let from_baseline = self.baseline.as_mut().map(|b| (b.source(), b.on_request(addr, hit)));
        if let Some(d) = from_mithril {
            self.issue(PrefetchSource::Mithril, d);
        }
        if let Some((src, d)) = from_baseline {
            self.issue(src, d);
        }
        let meta = self.metadata_bytes();
        self.peak_metadata = self.peak_metadata.max(meta);
        if meta > self.budget {
            return Err(SimError::Invariant(format!(
                "metadata {meta} bytes exceeds budget {} bytes after request {}",
                self.budget, self.requests
            )));
        }
        Ok(hit)
    }

    pub fn report(&self) -> SimulationReport {
        let misses = self.requests - self.hits;
        let [m, a, p] = self.layers;
        let issued = m.issued + a.issued + p.issued;
        let used = m.used + a.used + p.used;
        let stats = self.cache.stats();
        let (assoc, runs) = self.mithril.as_ref().map_or((0, 0), |e| {
            (e.prefetch_table().pairs().len() as u64, e.stats().mining_runs)
        });
        SimulationReport {
            capacity_blocks: self.capacity_blocks,
            effective_capacity_blocks: self.cache.capacity(),
            metadata_charge_blocks: self.charge_blocks,
            requests: self.requests,
            hits: self.hits,
            misses,
            cold_misses: self.cold_misses,
            hit_ratio: report::ratio(self.hits, self.requests),
            max_obtainable_hit_ratio: 1.0 - report::ratio(self.cold_misses, self.requests),
            prefetch_candidates: m.candidates + a.candidates + p.candidates,
            prefetches_issued: issued,
            prefetched_used: used,
            precision: report::ratio(used, issued),
            mithril_candidates: m.candidates,
            mithril_issued: m.issued,
            mithril_used: m.used,
            amp_candidates: a.candidates,
            amp_issued: a.issued,
            amp_used: a.used,
            pg_candidates: p.candidates,
            pg_issued: p.issued,
            pg_used: p.used,
            evictions: stats.evictions,
            second_chances: stats.second_chances,
            metadata_bytes: self.peak_metadata,
            metadata_budget_bytes: self.budget,
            mithril_associations: assoc,
            mithril_mining_runs: runs,
        }
    }

    /// Final report after checking the counters' internal consistency.
    pub fn finish(self) -> Result<SimulationReport, SimError> {
        let r = self.report();
        let check = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(SimError::Invariant(format!("{what} ({r:?})")))
            }
        };
        check(r.hits + r.misses == r.requests, "hits + misses != requests")?;
        check(r.cold_misses <= r.misses, "cold misses exceed misses")?;
        check(r.prefetched_used <= r.prefetches_issued, "used prefetches exceed issued")?;
        check(r.metadata_bytes <= r.metadata_budget_bytes, "metadata exceeds budget")?;
        check(self.cache.len() as u64 <= r.effective_capacity_blocks, "cache over capacity")?;
        Ok(r)
    }
}

/// Replays `trace` through a fresh stack.
pub fn run<I: IntoIterator<Item = u64>>(trace: I, stack: &StackConfig) -> Result<SimulationReport, SimError> {
    let mut sim = Simulation::new(stack)?;
    for addr in trace {
        sim.step(addr)?;
    }
    sim.finish()
}

/// One independent run per capacity, in parallel; reports in `sizes` order.
pub fn sweep(trace: &[u64], sizes: &[u64], template: &StackConfig) -> Result<Vec<SimulationReport>, SimError> {
    if sizes.is_empty() {
        return Err(ConfigError::new("sweep needs at least one cache size").into());
    }
    if sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ConfigError::new("sweep sizes must be strictly increasing").into());
    }
    sizes
        .par_iter()
        .map(|&size| run(trace.iter().copied(), &template.with_capacity(size)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct HitFrequencyRow {
    pub addr: u64,
    pub frequency: u64,
    pub hit_count: u64,
}

/// Per-block request and hit counts, most frequent first (ties by address).
pub fn analyze_hit_frequency<I: IntoIterator<Item = u64>>(
    trace: I,
    stack: &StackConfig,
) -> Result<(Vec<HitFrequencyRow>, SimulationReport), SimError> {
    let mut sim = Simulation::new(stack)?;
    let mut counts: HashMap<u64, (u64, u64)> = HashMap::new();
    for addr in trace {
        let hit = sim.step(addr)?;
        let c = counts.entry(addr).or_default();
        c.0 += 1;
        c.1 += u64::from(hit);
    }
    let mut rows: Vec<HitFrequencyRow> = counts
        .into_iter()
        .map(|(addr, (frequency, hit_count))| HitFrequencyRow {
            addr,
            frequency,
            hit_count,
        })
        .collect();
    rows.sort_by(|a, b| b.frequency.cmp(&a.frequency).then(a.addr.cmp(&b.addr)));
    Ok((rows, sim.finish()?))
}
