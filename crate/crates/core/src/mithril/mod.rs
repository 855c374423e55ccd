//! Association-mining prefetcher.
//!
//! Request timestamps are recorded per block in a small recording table. A
//! block that reaches `min_support` timestamps moves to the mining table,
//! where it keeps collecting up to `max_support`. When the mining table fills
//! it is mined for associated block pairs, which are installed in the
//! prefetching table, and then cleared. On each request the engine returns
//! the blocks associated with the requested one.

pub mod mining;
pub mod prefetch_table;
pub mod tables;
pub mod timestamp;

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::cache::CacheEntry;
use crate::error::ConfigError;
use crate::prefetch::{PrefetchDecision, PrefetchSource, Prefetcher};

pub use mining::{check_association, mine, sorted_slots, Association};
pub use prefetch_table::{PrefetchTable, SHARD_ROWS};
pub use tables::{MiningAppend, MiningTable, RecordingTable, INDEX_ENTRY_BYTES};
pub use timestamp::{compress_ts, ts_diff, RowView, TimestampRow, MAX_ROW_LEN};

/// Largest lookahead that `ts_diff` can represent unambiguously.
pub const MAX_LOOKAHEAD: u32 = 16383;

/// Which cache events feed the recorder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordingMode {
    MissOnly,
    EveryRequest,
    EvictOnly,
    MissAndEvict,
}

impl RecordingMode {
    fn on_request(self, hit: bool) -> bool {
        match self {
            RecordingMode::EveryRequest => true,
            RecordingMode::MissOnly | RecordingMode::MissAndEvict => !hit,
            RecordingMode::EvictOnly => false,
        }
    }

    fn on_evict(self) -> bool {
        matches!(self, RecordingMode::EvictOnly | RecordingMode::MissAndEvict)
    }

    pub fn name(self) -> &'static str {
        match self {
            RecordingMode::MissOnly => "miss_only",
            RecordingMode::EveryRequest => "every_request",
            RecordingMode::EvictOnly => "evict_only",
            RecordingMode::MissAndEvict => "miss_and_evict",
        }
    }
}

impl fmt::Display for RecordingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RecordingMode {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "miss_only" | "miss" => Ok(RecordingMode::MissOnly),
            "every_request" | "every" | "all" => Ok(RecordingMode::EveryRequest),
            "evict_only" | "evict" => Ok(RecordingMode::EvictOnly),
            "miss_and_evict" | "miss_evict" => Ok(RecordingMode::MissAndEvict),
            _ => Err(ConfigError::new(format!(
                "unknown recording mode {s:?} (expected miss_only, every_request, evict_only, miss_and_evict)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MithrilConfig {
    /// R: timestamps needed before a block is mined.
    pub min_support: usize,
    /// S: timestamps kept per mined block; more makes the block frequent.
    pub max_support: usize,
    /// Δ: largest timestamp gap between co-occurring accesses.
    pub lookahead: u32,
    /// P: associations kept per source block.
    pub prefetch_list_size: usize,
    /// M: fraction of cache bytes the engine may use.
    pub max_metadata: f64,
    pub recording_table_rows: usize,
    pub mining_table_rows: usize,
    pub recording_mode: RecordingMode,
}

impl Default for MithrilConfig {
    fn default() -> Self {
        MithrilConfig {
            min_support: 4,
            max_support: 8,
            lookahead: 50,
            prefetch_list_size: 2,
            max_metadata: 0.10,
            recording_table_rows: 100_000,
            mining_table_rows: 1250,
            recording_mode: RecordingMode::MissOnly,
        }
    }
}

impl MithrilConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let (r, s) = (self.min_support, self.max_support);
        if !(1 <= r && r <= s && s <= MAX_ROW_LEN) {
            return Err(ConfigError::new(format!(
                "need 1 <= min_support <= max_support <= {MAX_ROW_LEN}, got R={r} S={s}"
            )));
        }
        if !(1..=MAX_LOOKAHEAD).contains(&self.lookahead) {
            return Err(ConfigError::new(format!(
                "lookahead must be in 1..={MAX_LOOKAHEAD}, got {}",
                self.lookahead
            )));
        }
        if self.prefetch_list_size == 0 {
            return Err(ConfigError::new("prefetch_list_size must be at least 1"));
        }
        if !(self.max_metadata > 0.0 && self.max_metadata < 1.0) {
            return Err(ConfigError::new(format!(
                "max_metadata must be in (0, 1), got {}",
                self.max_metadata
            )));
        }
        Ok(())
    }

    /// Bytes of the recording and mining tables with their indexes.
    pub fn fixed_metadata_bytes(&self) -> u64 {
        RecordingTable::bytes_for(self.recording_table_rows, self.min_support)
            + MiningTable::bytes_for(self.mining_table_rows, self.max_support)
    }

    pub fn budget_bytes(&self, cache_bytes: u64) -> u64 {
        (self.max_metadata * cache_bytes as f64).floor() as u64
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct MithrilStats {
    /// Recording events, including those dropped for frequent blocks.
    pub recorded: u64,
    pub dropped: u64,
    pub mining_runs: u64,
    /// Directed pairs produced by mining.
    pub pairs_mined: u64,
}

#[derive(Debug, Clone)]
pub struct MithrilEngine {
    config: MithrilConfig,
    budget: u64,
    clock: u64,
    recording: RecordingTable,
    mining: MiningTable,
    prefetch: PrefetchTable,
    stats: MithrilStats,
}

impl MithrilEngine {
    /// Engine whose metadata is bounded by `max_metadata * cache_bytes`.
    ///
    /// Fails if the recording and mining tables alone exceed that budget.
    /// Whatever remains is available to prefetching-table shards.
    pub fn new(config: MithrilConfig, cache_bytes: u64) -> Result<Self, ConfigError> {
        config.validate()?;
        let budget = config.budget_bytes(cache_bytes);
        let fixed = config.fixed_metadata_bytes();
        if fixed > budget {
            return Err(ConfigError::new(format!(
                "recording and mining tables need {fixed} bytes but the metadata budget is {budget} bytes"
            )));
        }
        let max_shards = ((budget - fixed) / PrefetchTable::shard_bytes(config.prefetch_list_size)) as usize;
        Ok(MithrilEngine {
            recording: RecordingTable::new(config.recording_table_rows, config.min_support),
            mining: MiningTable::new(config.mining_table_rows, config.max_support),
            prefetch: PrefetchTable::new(config.prefetch_list_size, max_shards),
            budget,
            clock: 0,
            stats: MithrilStats::default(),
            config,
        })
    }

    pub fn config(&self) -> &MithrilConfig {
        &self.config
    }

    pub fn budget_bytes(&self) -> u64 {
        self.budget
    }

    /// Logical time: the number of recording events so far.
    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn stats(&self) -> MithrilStats {
        self.stats
    }

    pub fn recording_table(&self) -> &RecordingTable {
        &self.recording
    }

    pub fn mining_table(&self) -> &MiningTable {
        &self.mining
    }

    pub fn prefetch_table(&self) -> &PrefetchTable {
        &self.prefetch
    }

    /// Current `(src, dst)` contents of the prefetching table.
    pub fn associations(&self) -> Vec<(u64, u64)> {
        self.prefetch.pairs()
    }

    /// Blocks associated with `addr`, oldest first.
    pub fn lookup(&self, addr: u64) -> &[u64] {
        self.prefetch.get(addr)
    }

    pub fn add_association(&mut self, src: u64, dst: u64) {
        self.prefetch.add(src, dst);
    }

    /// Records an access to `addr` at logical time `now`.
    ///
    /// Does not touch the engine clock; [`MithrilEngine::record_event`] is the
    /// clocked entry point.
    pub fn record(&mut self, addr: u64, now: u64) {
        let ts = compress_ts(now);
        match self.mining.append(addr, ts) {
            MiningAppend::Appended => return,
            MiningAppend::Dropped => {
                self.stats.dropped += 1;
                return;
            }
            MiningAppend::Absent => {}
        }
        let Some(row) = self.recording.append(addr, ts) else {
            return;
        };
        self.mining.insert(row.view());
        if self.mining.is_full() {
            self.run_mining();
        }
    }

    /// Records `addr` at the current clock and advances it.
    pub fn record_event(&mut self, addr: u64) {
        let now = self.clock;
        self.clock += 1;
        self.stats.recorded += 1;
        self.record(addr, now);
    }

    fn run_mining(&mut self) {
        let pairs = mine(&self.mining, self.config.min_support, self.config.lookahead);
        self.stats.mining_runs += 1;
        self.stats.pairs_mined += pairs.len() as u64;
        for (src, dst) in pairs {
            self.prefetch.add(src, dst);
        }
        self.mining.clear();
    }

    /// Demand request path: record if the mode asks for it, then return the
    /// associated blocks.
    pub fn handle(&mut self, addr: u64, hit: bool) -> PrefetchDecision {
        if self.config.recording_mode.on_request(hit) {
            self.record_event(addr);
        }
        PrefetchDecision::new(addr, self.prefetch.get(addr).iter().copied())
    }

    /// Metadata in use: fixed tables plus allocated shards.
    pub fn metadata_bytes(&self) -> u64 {
        self.recording.bytes() + self.mining.bytes() + self.prefetch.bytes()
    }

    /// Metadata if every shard the budget allows were allocated.
    pub fn max_metadata_bytes(&self) -> u64 {
        self.recording.bytes() + self.mining.bytes() + self.prefetch.max_bytes()
    }
}

impl Prefetcher for MithrilEngine {
    fn source(&self) -> PrefetchSource {
        PrefetchSource::Mithril
    }

    fn on_request(&mut self, addr: u64, hit: bool) -> PrefetchDecision {
        self.handle(addr, hit)
    }

    fn on_evict(&mut self, entry: &CacheEntry) {
        if self.config.recording_mode.on_evict() {
            self.record_event(entry.addr);
        }
    }

    fn metadata_bytes(&self) -> u64 {
        MithrilEngine::metadata_bytes(self)
    }

    fn max_metadata_bytes(&self) -> u64 {
        MithrilEngine::max_metadata_bytes(self)
    }
}
