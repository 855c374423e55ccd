//! Trace-driven block cache simulation with a history-based prefetching layer.
//!
//! The crate is organised bottom-up:
//!
//! - [`trace`] turns on-disk block I/O traces into a stream of [`trace::BlockRequest`]s.
//! - [`cache`] is a capacity-bounded LRU/FIFO block cache with prefetch-aware
//!   insertion and second-chance reinsertion of unused prefetched blocks.
//! - [`baseline`] holds the AMP sequential prefetcher and the probability-graph
//!   prefetcher.
//! - [`mithril`] is the association-mining prefetcher: timestamp recording,
//!   weak/strong association mining, and the sharded prefetching table.
//! - [`sim`] composes the above into a stack, replays traces and reports
//!   hit ratio, precision and metadata usage.
//! - [`synth`] generates the synthetic workloads used by the tests and the CLI.

pub mod baseline;
pub mod cache;
pub mod error;
pub mod mithril;
pub mod prefetch;
pub mod sim;
pub mod synth;
pub mod trace;

pub use error::ConfigError;
pub use cache::{BlockCache, CacheConfig, CacheEntry, Lookup, Origin, Policy};
pub use mithril::{MithrilConfig, MithrilEngine, RecordingMode};
pub use prefetch::{PrefetchDecision, PrefetchSource, Prefetcher};
pub use sim::{
    analyze_hit_frequency, run, sweep, Baseline, HitFrequencyRow, SimError, Simulation,
    SimulationReport, StackConfig,
};
pub use trace::{BlockRequest, TraceError, TraceFormat, TraceKind, TraceReader};
