//! Adaptive multi-stream sequential prefetching.
//!
//! Streams are detected from runs of consecutive block addresses. Each stream
//! keeps a prefetch degree `p` and a trigger distance `g`: once a demand
//! request comes within `g` blocks of the stream's prefetch frontier, the next
//! `p` blocks past the frontier are fetched. A demand miss on a block the
//! stream already covered grows `p`; eviction of an unused prefetched block
//! belonging to the stream shrinks it.
//!
//! The table size, detection threshold and degree limits are tunables rather
//! than values fixed by the original AMP design.

use std::collections::{HashMap, VecDeque};

use serde::Serialize;

use crate::cache::{CacheEntry, Origin};
use crate::error::ConfigError;
use crate::prefetch::{PrefetchDecision, PrefetchSource, Prefetcher};

const STREAM_BYTES: u64 = 48;
const CANDIDATE_BYTES: u64 = 16;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AmpConfig {
    pub max_streams: usize,
    /// Consecutive addresses needed before a run is treated as a stream.
    pub seq_threshold: u32,
    pub initial_degree: u32,
    pub max_degree: u32,
}

impl Default for AmpConfig {
    fn default() -> Self {
        AmpConfig {
            max_streams: 64,
            seq_threshold: 2,
            initial_degree: 4,
            max_degree: 64,
        }
    }
}

impl AmpConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.max_streams == 0 {
            return Err(ConfigError::new("amp max_streams must be at least 1"));
        }
        if self.seq_threshold == 0 {
            return Err(ConfigError::new("amp seq_threshold must be at least 1"));
        }
        if self.initial_degree == 0 || self.initial_degree > self.max_degree {
            return Err(ConfigError::new(format!(
                "amp degrees must satisfy 1 <= initial ({}) <= max ({})",
                self.initial_degree, self.max_degree
            )));
        }
        Ok(())
    }

    pub fn metadata_bytes(&self) -> u64 {
        self.max_streams as u64 * (STREAM_BYTES + CANDIDATE_BYTES)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AmpStream {
    pub last_addr: u64,
    pub degree: u32,
    pub trigger: u32,
    /// Highest block prefetched (or demanded) for this stream.
    pub frontier: u64,
    /// Lowest block the stream has prefetched.
    pub start: u64,
    last_used: u64,
}

impl AmpStream {
    fn covers(&self, addr: u64) -> bool {
        self.start <= addr && addr <= self.frontier
    }

    fn set_degree(&mut self, degree: u32) {
        self.degree = degree;
        self.trigger = degree.div_ceil(2);
    }
}

#[derive(Debug, Clone)]
pub struct AmpPrefetcher {
    config: AmpConfig,
    streams: Vec<AmpStream>,
    /// Run length of recent non-stream requests, keyed by their address.
    candidates: HashMap<u64, u32>,
    candidate_order: VecDeque<u64>,
    tick: u64,
}

impl AmpPrefetcher {
    pub fn new(config: AmpConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        Ok(AmpPrefetcher {
            streams: Vec::with_capacity(config.max_streams),
            candidates: HashMap::new(),
            candidate_order: VecDeque::new(),
            tick: 0,
            config,
        })
    }

    pub fn config(&self) -> &AmpConfig {
        &self.config
    }

    pub fn streams(&self) -> &[AmpStream] {
        &self.streams
    }

    fn remember_candidate(&mut self, addr: u64, run: u32) {
        if self.candidates.insert(addr, run).is_none() {
            self.candidate_order.push_back(addr);
        }
        while self.candidates.len() > self.config.max_streams {
            if let Some(old) = self.candidate_order.pop_front() {
                self.candidates.remove(&old);
            }
        }
    }

    fn start_stream(&mut self, addr: u64) {
        let mut stream = AmpStream {
            last_addr: addr,
            degree: 0,
            trigger: 0,
            frontier: addr,
            start: addr.saturating_add(1),
            last_used: self.tick,
        };
        stream.set_degree(self.config.initial_degree);
        if self.streams.len() < self.config.max_streams {
            self.streams.push(stream);
        } else if let Some(victim) = self.streams.iter_mut().min_by_key(|s| s.last_used) {
            *victim = stream;
        }
    }
}

impl Prefetcher for AmpPrefetcher {
    fn source(&self) -> PrefetchSource {
        PrefetchSource::Amp
    }

    fn on_request(&mut self, addr: u64, hit: bool) -> PrefetchDecision {
        self.tick += 1;
        let max_degree = self.config.max_degree;
        let pos = self
            .streams
            .iter()
            .position(|s| s.last_addr.checked_add(1) == Some(addr));
        let Some(pos) = pos else {
            let run = match addr.checked_sub(1) {
                Some(prev) => self.candidates.remove(&prev).map_or(1, |r| r + 1),
                None => 1,
            };
            if run >= self.config.seq_threshold {
                self.start_stream(addr);
            } else {
                self.remember_candidate(addr, run);
            }
            return PrefetchDecision::empty();
        };

        let stream = &mut self.streams[pos];
        stream.last_used = self.tick;
        if !hit && stream.covers(addr) {
            stream.set_degree((stream.degree + 1).min(max_degree));
        }
        stream.last_addr = addr;
        stream.frontier = stream.frontier.max(addr);
        if addr.saturating_add(u64::from(stream.trigger)) < stream.frontier {
            return PrefetchDecision::empty();
        }
        // u64::MAX is reserved; stop one short of it.
        let first = stream.frontier.saturating_add(1).min(u64::MAX - 1);
        let last = stream
            .frontier
            .saturating_add(u64::from(stream.degree))
            .min(u64::MAX - 1);
        if first > stream.frontier {
            stream.frontier = last;
            PrefetchDecision::new(addr, first..=last)
        } else {
            PrefetchDecision::empty()
        }
    }

    fn on_evict(&mut self, entry: &CacheEntry) {
        if entry.origin != Origin::Prefetch(PrefetchSource::Amp) || entry.touched {
            return;
        }
        if let Some(stream) = self.streams.iter_mut().find(|s| s.covers(entry.addr)) {
            stream.set_degree(stream.degree.saturating_sub(1).max(1));
        }
    }

    fn metadata_bytes(&self) -> u64 {
        self.config.metadata_bytes()
    }

    fn max_metadata_bytes(&self) -> u64 {
        self.config.metadata_bytes()
    }
}
