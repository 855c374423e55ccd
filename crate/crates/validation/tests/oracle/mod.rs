//! Straight-line reference models used to derive expected values.
//!
//! Nothing here shares code with `mithril-core`: timestamps are raw `u64`s,
//! tables are hash maps and vectors, and caches are linear scans.

use std::collections::{HashMap, VecDeque};

/// Rows in the order they reached `r` recorded events, each holding the
/// first `min(count, s)` timestamps. Event `i` of `stream` has timestamp
/// `base + i`.
pub fn mining_rows(stream: &[u64], base: u64, r: usize, s: usize) -> Vec<(u64, Vec<u64>)> {
    let mut seen: HashMap<u64, Vec<u64>> = HashMap::new();
    let mut order = Vec::new();
    for (i, &a) in stream.iter().enumerate() {
        let ts = seen.entry(a).or_default();
        if ts.len() < s {
            ts.push(base + i as u64);
        }
        if ts.len() == r && !order.contains(&a) {
            order.push(a);
        }
    }
    order.into_iter().map(|a| (a, seen[&a].clone())).collect()
}

fn weak(a: &[u64], b: &[u64], delta: u64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.abs_diff(*y) <= delta)
}

fn strong(a: &[u64], b: &[u64], delta: u64) -> bool {
    weak(a, b, delta) && a.iter().zip(b).any(|(x, y)| x.abs_diff(*y) == 1)
}

/// Every row pair `(i, j)` with `j` after `i` in first-timestamp order and
/// `first_j - first_i <= delta`; a row's first partner may be weakly
/// associated, later partners must be strongly associated. Pairs are
/// emitted as `(i, j), (j, i)`.
pub fn mine_pairs(rows: &[(u64, Vec<u64>)], r: usize, delta: u64) -> Vec<(u64, u64)> {
    let mut sorted: Vec<&(u64, Vec<u64>)> = rows.iter().collect();
    sorted.sort_by_key(|(_, ts)| ts[0]);
    let mut out = Vec::new();
    for (k, (ai, ti)) in sorted.iter().enumerate() {
        if ti.len() < r {
            continue;
        }
        let mut found = false;
        for (aj, tj) in &sorted[k + 1..] {
            if tj[0] - ti[0] > delta {
                continue;
            }
            let ok = if found { strong(ti, tj, delta) } else { weak(ti, tj, delta) };
            if ok {
                out.push((*ai, *aj));
                out.push((*aj, *ai));
                found = true;
            }
        }
    }
    out
}

/// LRU over a vector, front = least recent.
pub fn lru_hits(trace: &[u64], cap: usize) -> Vec<bool> {
    let mut v: Vec<u64> = Vec::new();
    trace
        .iter()
        .map(|&a| {
            let hit = if let Some(p) = v.iter().position(|&x| x == a) {
                v.remove(p);
                true
            } else {
                if v.len() == cap {
                    v.remove(0);
                }
                false
            };
            v.push(a);
            hit
        })
        .collect()
}

pub fn fifo_hits(trace: &[u64], cap: usize) -> Vec<bool> {
    let mut q: VecDeque<u64> = VecDeque::new();
    trace
        .iter()
        .map(|&a| {
            if q.contains(&a) {
                return true;
            }
            if q.len() == cap {
                q.pop_front();
            }
            q.push_back(a);
            false
        })
        .collect()
}

struct Slot {
    addr: u64,
    prefetched: bool,
    touched: bool,
    chance_used: bool,
}

/// LRU cache with prefetch marks and one reinsertion for untouched
/// prefetched victims.
struct SecondChanceLru {
    cap: usize,
    slots: Vec<Slot>,
}

impl SecondChanceLru {
    fn contains(&self, a: u64) -> bool {
        self.slots.iter().any(|s| s.addr == a)
    }

    /// `Some(first use of a prefetched block)` on a hit.
    fn lookup(&mut self, a: u64) -> Option<bool> {
        let p = self.slots.iter().position(|s| s.addr == a)?;
        let mut s = self.slots.remove(p);
        let used = s.prefetched && !s.touched;
        s.touched = true;
        self.slots.push(s);
        Some(used)
    }

    fn insert(&mut self, a: u64, prefetched: bool) {
        while self.slots.len() >= self.cap {
            let mut v = self.slots.remove(0);
            if v.prefetched && !v.touched && !v.chance_used {
                v.chance_used = true;
                self.slots.push(v);
            }
        }
        self.slots.push(Slot {
            addr: a,
            prefetched,
            touched: false,
            chance_used: false,
        });
    }
}

pub struct MithrilParams {
    pub r: usize,
    pub s: usize,
    pub delta: u64,
    pub p: usize,
    pub recording_rows: usize,
    pub mining_rows: usize,
    pub prefetch_rows: usize,
}

/// Miss-recording association prefetcher for workloads that never overflow
/// the recording or prefetching tables and stay below the timestamp wrap.
struct Recorder {
    prm: MithrilParams,
    clock: u64,
    recording: HashMap<u64, Vec<u64>>,
    mining: Vec<(u64, Vec<u64>)>,
    assoc: HashMap<u64, Vec<u64>>,
}

impl Recorder {
    fn record(&mut self, a: u64) {
        let t = self.clock;
        self.clock += 1;
        assert!(self.clock < 16384, "oracle does not model timestamp wrap");
        if let Some((_, ts)) = self.mining.iter_mut().find(|(x, _)| *x == a) {
            if ts.len() < self.prm.s {
                ts.push(t);
            }
            return;
        }
        self.recording.entry(a).or_default().push(t);
        assert!(self.recording.len() <= self.prm.recording_rows, "oracle does not model row overwrite");
        if self.recording[&a].len() == self.prm.r {
            let ts = self.recording.remove(&a).unwrap();
            self.mining.push((a, ts));
            if self.mining.len() == self.prm.mining_rows {
                for (x, y) in mine_pairs(&self.mining, self.prm.r, self.prm.delta) {
                    self.install(x, y);
                }
                self.mining.clear();
            }
        }
    }

    fn install(&mut self, x: u64, y: u64) {
        let list = self.assoc.entry(x).or_default();
        if list.contains(&y) {
            return;
        }
        list.push(y);
        if list.len() > self.prm.p {
            list.remove(0);
        }
        assert!(self.assoc.len() <= self.prm.prefetch_rows, "oracle does not model row recycling");
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleResult {
    pub hits: u64,
    pub issued: u64,
    pub used: u64,
}

/// Replays `trace` through a second-chance LRU of `cap` blocks with a
/// miss-recording association prefetcher.
pub fn mithril_lru(trace: &[u64], cap: usize, prm: MithrilParams) -> OracleResult {
    let mut cache = SecondChanceLru { cap, slots: Vec::new() };
    let mut rec = Recorder {
        prm,
        clock: 0,
        recording: HashMap::new(),
        mining: Vec::new(),
        assoc: HashMap::new(),
    };
    let mut res = OracleResult { hits: 0, issued: 0, used: 0 };
    for &a in trace {
        match cache.lookup(a) {
            Some(used) => {
                res.hits += 1;
                res.used += u64::from(used);
            }
            None => {
                cache.insert(a, false);
                rec.record(a);
            }
        }
        for c in rec.assoc.get(&a).cloned().unwrap_or_default() {
            if c != a && !cache.contains(c) {
                cache.insert(c, true);
                res.issued += 1;
            }
        }
    }
    res
}
