//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.
//!
//! Run with `cargo test -p mithril-validation --test acceptance`. The
//! external-trace check runs only when `MSR_TRACE` names an MSR-format file.

mod oracle;

use std::collections::{BTreeSet, HashMap, HashSet};
use std::time::Instant;

use mithril_cli::CliError;
use mithril_core::baseline::AmpConfig;
use mithril_core::mithril::{compress_ts, mine, ts_diff, PrefetchTable};
use mithril_core::trace::{load_addresses, TraceFormat};
use mithril_core::{
    run, synth, Baseline, BlockCache, CacheConfig, Lookup, MithrilConfig, MithrilEngine, Origin, Policy,
    PrefetchSource, RecordingMode, SimError, SimulationReport, StackConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

/// Every report produced by the suite, for the budget check.
struct Ledger {
    runs: Vec<(String, StackConfig, SimulationReport)>,
}

impl Ledger {
    fn run(&mut self, label: &str, trace: &[u64], stack: &StackConfig) -> Result<SimulationReport, SimError> {
        let r = run(trace.iter().copied(), stack)?;
        self.runs.push((label.to_string(), stack.clone(), r.clone()));
        Ok(r)
    }
}

fn pct(x: f64) -> String {
    format!("{:.2}%", 100.0 * x)
}

fn c1_mining_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC1);
    let (mut mismatches, mut total_pairs, mut first_bad) = (0, 0, None);
    for instance in 0..1000 {
        let n = rng.gen_range(1..=500);
        let distinct = rng.gen_range(1..=50u64);
        let r = rng.gen_range(1..=3);
        let s = rng.gen_range(4..=8);
        let delta = rng.gen_range(1..=20u32);
        let stream: Vec<u64> = match instance % 3 {
            0 => (0..n).map(|_| rng.gen_range(0..distinct)).collect(),
            // Back-to-back pairs with noise.
            1 => {
                let mut v = Vec::with_capacity(n);
                while v.len() < n {
                    let a = rng.gen_range(0..distinct) & !1;
                    v.push(a);
                    if rng.gen_bool(0.8) {
                        v.push(a | 1);
                    }
                }
                v.truncate(n);
                v
            }
            // Short sequential runs.
            _ => {
                let mut v = Vec::with_capacity(n);
                while v.len() < n {
                    let a = rng.gen_range(0..distinct);
                    v.extend((a..a + rng.gen_range(1..6)).map(|x| x % distinct));
                }
                v.truncate(n);
                v
            }
        };
        // Half the instances straddle the 15-bit timestamp wrap.
        let base = if instance % 2 == 0 { 0 } else { 32768 - 250 };
        let mut engine = MithrilEngine::new(
            MithrilConfig {
                min_support: r,
                max_support: s,
                lookahead: delta,
                recording_table_rows: 1000,
                mining_table_rows: 1000,
                recording_mode: RecordingMode::EveryRequest,
                ..MithrilConfig::default()
            },
            1 << 40,
        )
        .expect("valid config");
        for (i, &a) in stream.iter().enumerate() {
            engine.record(a, base + i as u64);
        }
        let rows = oracle::mining_rows(&stream, base, r, s);
        let snapshot: Vec<(u64, Vec<u16>)> = engine
            .mining_table()
            .rows()
            .map(|row| (row.addr, row.iter().collect()))
            .collect();
        let expected_rows: Vec<(u64, Vec<u16>)> = rows
            .iter()
            .map(|(a, ts)| (*a, ts.iter().map(|&t| compress_ts(t)).collect()))
            .collect();
        let got: BTreeSet<(u64, u64)> = mine(engine.mining_table(), r, delta).into_iter().collect();
        let want: BTreeSet<(u64, u64)> = oracle::mine_pairs(&rows, r, u64::from(delta)).into_iter().collect();
        total_pairs += want.len();
        if snapshot != expected_rows || got != want {
            mismatches += 1;
            first_bad.get_or_insert(instance);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        mismatches == 0 && secs < 10.0,
        format!(
            "mining oracle equivalence: 1000 instances, {total_pairs} oracle pairs, {mismatches} mismatches{}, {secs:.2} s (limit 10 s)",
            first_bad.map_or(String::new(), |i| format!(" (first at instance {i})"))
        ),
    )
}

fn c2_cache_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC2);
    let mut mismatches = 0;
    let mut requests = 0;
    for _ in 0..100 {
        let n = rng.gen_range(1..=10_000);
        let universe = rng.gen_range(1..=2000u64);
        let cap = rng.gen_range(1..=300usize);
        let trace: Vec<u64> = (0..n).map(|_| rng.gen_range(0..universe)).collect();
        requests += n;
        for policy in [Policy::Lru, Policy::Fifo] {
            let mut cache = BlockCache::new(&CacheConfig::new(cap as u64, policy)).unwrap();
            let got: Vec<bool> = trace
                .iter()
                .map(|&a| match cache.lookup(a) {
                    Lookup::Hit { .. } => true,
                    Lookup::Miss => {
                        cache.insert(a, Origin::Demand);
                        false
                    }
                })
                .collect();
            let want = match policy {
                Policy::Lru => oracle::lru_hits(&trace, cap),
                Policy::Fifo => oracle::fifo_hits(&trace, cap),
            };
            if got != want {
                mismatches += 1;
            }
        }
    }
    verdict(
        mismatches == 0,
        format!("cache oracle equivalence: 100 traces x {{LRU, FIFO}}, {requests} requests each policy, {mismatches} mismatching runs"),
    )
}

const PAIRED_CAPACITY: u64 = 800;
const PAIRED_BLOCK_SIZE: u64 = 32768;

/// Capacity left after charging default Mithril tables, computed from the
/// table layouts rather than from the engine.
fn paired_effective_capacity() -> u64 {
    let budget = PAIRED_CAPACITY * PAIRED_BLOCK_SIZE / 10;
    let recording = 100_000 * (4u64.div_ceil(4) * 8 + 12);
    let mining = 1250 * (8u64.div_ceil(4) * 8 + 12);
    let shard = 2000 * ((1 + 2) * 8 + 12);
    let shards = (budget - recording - mining) / shard;
    let charged = recording + mining + shards * shard;
    PAIRED_CAPACITY - charged.div_ceil(PAIRED_BLOCK_SIZE)
}

fn c3_paired_gain(ledger: &mut Ledger) -> Outcome {
    let (pairs, trace) = synth::paired(1000, 5, 0xC3);
    // Construction check: consecutive pair, reuse distance above capacity.
    let adjacent = trace.chunks_exact(2).all(|c| pairs.contains(&(c[0], c[1])));
    let mut last: HashMap<u64, usize> = HashMap::new();
    let mut min_reuse = usize::MAX;
    for (i, &a) in trace.iter().enumerate() {
        if let Some(j) = last.insert(a, i) {
            min_reuse = min_reuse.min(trace[j + 1..i].iter().collect::<HashSet<_>>().len());
        }
    }

    let lru_stack = StackConfig::new(CacheConfig::new(PAIRED_CAPACITY, Policy::Lru)).with_block_size(PAIRED_BLOCK_SIZE);
    let mithril_stack = StackConfig::new(CacheConfig::new(PAIRED_CAPACITY, Policy::Lru).with_second_chance(true))
        .with_block_size(PAIRED_BLOCK_SIZE)
        .with_mithril(MithrilConfig::default());
    let lru = match ledger.run("paired/lru", &trace, &lru_stack) {
        Ok(r) => r,
        Err(e) => return Outcome::Fail(format!("paired-workload gain: LRU run failed: {e}")),
    };
    let m = match ledger.run("paired/mithril-lru", &trace, &mithril_stack) {
        Ok(r) => r,
        Err(e) => return Outcome::Fail(format!("paired-workload gain: Mithril-LRU run failed: {e}")),
    };

    let eff = paired_effective_capacity();
    let expected = oracle::mithril_lru(
        &trace,
        eff as usize,
        oracle::MithrilParams {
            r: 4,
            s: 8,
            delta: 50,
            p: 2,
            recording_rows: 100_000,
            mining_rows: 1250,
            prefetch_rows: 8 * 2000,
        },
    );
    let oracle_ratio = expected.hits as f64 / trace.len() as f64;
    let gap_pp = 100.0 * (m.hit_ratio - oracle_ratio).abs();

    let construction = adjacent && min_reuse > PAIRED_CAPACITY as usize;
    let lru_ok = lru.hit_ratio <= 0.01;
    let oracle_ok = gap_pp <= 5.0 && m.effective_capacity_blocks == eff;
    let target_ok = m.hit_ratio >= 0.35;
    verdict(
        construction && lru_ok && oracle_ok && target_ok,
        format!(
            "paired-workload gain: min reuse distance {min_reuse} blocks (> {PAIRED_CAPACITY}), \
             LRU {} (<= 1%: {}), Mithril-LRU {} vs oracle {} (gap {gap_pp:.2} pp <= 5: {}), \
             Mithril-LRU >= 35%: {}",
            pct(lru.hit_ratio),
            lru_ok,
            pct(m.hit_ratio),
            pct(oracle_ratio),
            oracle_ok,
            target_ok,
        ),
    )
}

fn c4_memory_bound() -> Outcome {
    let cfg = MithrilConfig::default();
    let by_layout = 100_000u64 * (8 + 12) + 1250 * (2 * 8 + 12);
    let limit = 2 * 1024 * 1024;
    let engine = MithrilEngine::new(cfg.clone(), 1 << 30).unwrap();
    let fixed = cfg.fixed_metadata_bytes();
    verdict(
        fixed == by_layout && engine.metadata_bytes() == fixed && fixed < limit,
        format!("memory bound: recording + mining = {fixed} bytes (layout {by_layout}) < {limit}"),
    )
}

fn c5_compression() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC5);
    let mut failures = 0u64;
    let mut checks = 0u64;
    for ts in 0..1_000_000u64 {
        if u64::from(compress_ts(ts)) != ts % 32768 {
            failures += 1;
        }
        for gap in [0, 1, 50, 16383, rng.gen_range(0..16384)] {
            checks += 1;
            if ts_diff(compress_ts(ts + gap), compress_ts(ts)) != gap as i32 {
                failures += 1;
            }
        }
    }
    verdict(
        failures == 0,
        format!("compression roundtrip and wrap: 10^6 timestamps, {checks} gap checks, {failures} failures"),
    )
}

fn c6_second_chance() -> Outcome {
    let cfg = CacheConfig::new(2, Policy::Lru).with_second_chance(true);
    let mut c = BlockCache::new(&cfg).unwrap();
    let pf = Origin::Prefetch(PrefetchSource::Mithril);
    c.insert(1, pf);
    c.insert(2, Origin::Demand);
    let ins = c.insert_detailed(3, Origin::Demand);
    let evicted: Vec<u64> = ins.evicted.iter().map(|e| e.addr).collect();
    let scenario = evicted == [2] && ins.reinserted == [1] && c.stats().second_chances == 1;

    let mut rng = ChaCha8Rng::seed_from_u64(0xC6);
    let mut cache = BlockCache::new(&CacheConfig::new(64, Policy::Lru).with_second_chance(true)).unwrap();
    let mut chances: HashMap<u64, u32> = HashMap::new();
    let mut worst = 0;
    for _ in 0..100_000 {
        let a = rng.gen_range(0..256u64);
        if rng.gen_bool(0.3) {
            cache.lookup(a);
            continue;
        }
        let origin = if rng.gen_bool(0.7) { pf } else { Origin::Demand };
        if !cache.contains(a) {
            chances.remove(&a);
        }
        let ins = cache.insert_detailed(a, origin);
        for x in ins.reinserted {
            let n = chances.entry(x).or_default();
            *n += 1;
            worst = worst.max(*n);
        }
        for e in ins.evicted {
            chances.remove(&e.addr);
        }
        assert!(cache.len() as u64 <= cache.capacity());
    }
    verdict(
        scenario && worst <= 1,
        format!(
            "second chance: scenario evicted {evicted:?} reinserted {:?}; fuzz 10^5 ops, max reinsertions per residency {worst}",
            [1]
        ),
    )
}

fn c7_fifo_associations() -> Outcome {
    let mut t = PrefetchTable::new(2, 1);
    t.add(1, 2);
    t.add(1, 3);
    t.add(1, 4);
    let table = t.get(1).to_vec();
    let mut e = MithrilEngine::new(MithrilConfig::default(), 1 << 30).unwrap();
    for d in [2, 3, 4] {
        e.add_association(1, d);
    }
    let engine = e.lookup(1).to_vec();
    verdict(
        table == [3, 4] && engine == [3, 4],
        format!("FIFO association replacement: a->b, a->c, a->d with P=2 keeps {engine:?}"),
    )
}

fn c8_amp_sequential(ledger: &mut Ledger) -> Outcome {
    let trace = synth::sequential(0, 1_000_000);
    let start = Instant::now();
    let amp = ledger.run(
        "sequential/amp-lru",
        &trace,
        &StackConfig::new(CacheConfig::new(4096, Policy::Lru)).with_baseline(Baseline::Amp(AmpConfig::default())),
    );
    let secs = start.elapsed().as_secs_f64();
    let lru = ledger.run("sequential/lru", &trace, &StackConfig::new(CacheConfig::new(4096, Policy::Lru)));
    match (amp, lru) {
        (Ok(a), Ok(l)) => verdict(
            a.hit_ratio >= 0.9 && l.hit_ratio < 0.01 && secs < 30.0,
            format!(
                "AMP sequential sanity: AMP {} (>= 90%), LRU {} (< 1%), AMP run {secs:.2} s (< 30 s)",
                pct(a.hit_ratio),
                pct(l.hit_ratio)
            ),
        ),
        (a, l) => Outcome::Fail(format!("AMP sequential sanity: run failed: {:?} {:?}", a.err(), l.err())),
    }
}

fn c10_msr_smoke(ledger: &mut Ledger) -> Outcome {
    let Some(path) = std::env::var_os("MSR_TRACE") else {
        return Outcome::Skip("MSR smoke test: set MSR_TRACE to an MSR-format trace to run".into());
    };
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("hrc.csv");
    let path_str = path.to_string_lossy().into_owned();
    // 256 MiB of 4 KiB blocks.
    let size = 256 * 1024 * 1024 / 4096;
    let sizes = format!("{},{}", size / 4, size);
    let code = mithril_cli::main_with_args([
        "mithril-sim",
        "sweep",
        "--trace",
        &path_str,
        "--format",
        "extent-csv",
        "--sizes",
        &sizes,
        "--mithril",
        "--second-chance",
        "-o",
        out.to_str().unwrap(),
    ]);
    if code != 0 {
        return Outcome::Fail(format!("MSR smoke test: sweep exited with {code}"));
    }
    let csv = std::fs::read_to_string(&out).unwrap_or_default();
    let mut lines = csv.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<&str> = lines.next().unwrap_or_default().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name);
    let (Some(hr), Some(cap)) = (col("hit_ratio"), col("max_obtainable_hit_ratio")) else {
        return Outcome::Fail("MSR smoke test: sweep report lacks hit-ratio columns".into());
    };
    let over_cap = lines
        .map(|l| l.split(',').collect::<Vec<_>>())
        .filter(|f| f[hr].parse::<f64>().unwrap_or(f64::NAN) > f[cap].parse::<f64>().unwrap_or(f64::NAN) + 1e-12)
        .count();
    if over_cap > 0 {
        return Outcome::Fail(format!("MSR smoke test: {over_cap} sweep rows exceed the hit-ratio cap"));
    }
    let trace = match load_addresses(&path, &TraceFormat::msr()) {
        Ok(t) => t,
        Err(e) => return Outcome::Fail(format!("MSR smoke test: {e}")),
    };
    let lru = ledger.run("msr/lru", &trace, &StackConfig::new(CacheConfig::new(size, Policy::Lru)));
    let m = ledger.run(
        "msr/mithril-lru",
        &trace,
        &StackConfig::new(CacheConfig::new(size, Policy::Lru).with_second_chance(true)).with_mithril(MithrilConfig::default()),
    );
    match (lru, m) {
        (Ok(l), Ok(m)) => verdict(
            m.hit_ratio >= l.hit_ratio && m.hit_ratio <= m.max_obtainable_hit_ratio,
            format!(
                "MSR smoke test: {} requests, LRU {} vs Mithril-LRU {} at {size} blocks, cap {}",
                trace.len(),
                pct(l.hit_ratio),
                pct(m.hit_ratio),
                pct(m.max_obtainable_hit_ratio)
            ),
        ),
        (l, m) => Outcome::Fail(format!("MSR smoke test: run failed: {:?} {:?}", l.err(), m.err())),
    }
}

fn c9_budget(ledger: &Ledger) -> Outcome {
    let mut bad = Vec::new();
    for (label, stack, r) in &ledger.runs {
        let cache_bytes = stack.cache.capacity_blocks * stack.block_size;
        let mithril_cap = stack
            .mithril
            .as_ref()
            .map_or(u64::MAX, |m| (m.max_metadata * cache_bytes as f64).floor() as u64);
        let charge = r.metadata_budget_bytes.div_ceil(stack.block_size);
        let ok = r.metadata_bytes <= r.metadata_budget_bytes
            && (stack.baseline != Baseline::None || r.metadata_budget_bytes <= mithril_cap)
            && r.metadata_charge_blocks == charge
            && r.effective_capacity_blocks == r.capacity_blocks - charge;
        if !ok {
            bad.push(label.clone());
        }
    }
    let code = CliError::from(SimError::Invariant("metadata over budget".into())).exit_code();
    verdict(
        bad.is_empty() && code == 3,
        format!(
            "budget invariant: {} runs checked, violations {:?}, invariant exit code {code}",
            ledger.runs.len(),
            bad
        ),
    )
}

fn main() {
    let mut ledger = Ledger { runs: Vec::new() };
    let results = vec![
        ("C1", c1_mining_oracle()),
        ("C2", c2_cache_oracle()),
        ("C3", c3_paired_gain(&mut ledger)),
        ("C4", c4_memory_bound()),
        ("C5", c5_compression()),
        ("C6", c6_second_chance()),
        ("C7", c7_fifo_associations()),
        ("C8", c8_amp_sequential(&mut ledger)),
        ("C10", c10_msr_smoke(&mut ledger)),
    ];
    let c9 = c9_budget(&ledger);
    let mut results = results;
    results.insert(8, ("C9", c9));

    let mut failed = 0;
    for (id, outcome) in &results {
        let (tag, detail) = match outcome {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Outcome::Skip(d) => ("SKIP", d),
        };
        println!("{tag} {id:<3} {detail}");
    }
    println!("acceptance: {} criteria, {failed} failed", results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
