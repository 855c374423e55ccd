//! Command-line front end for `mithril-core`.
//!
//! `main.rs` only forwards to [`main_with_args`]; everything here is
//! testable in process.

mod config;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use mithril_core::baseline::{AmpConfig, PgConfig};
use mithril_core::sim::{write_csv, write_jsonl, SimulationReport};
use mithril_core::trace::{load_addresses, open_trace, OnParseError, TraceFormat, TraceKind};
use mithril_core::{
    analyze_hit_frequency, sweep, synth, Baseline, CacheConfig, ConfigError, MithrilConfig, Policy,
    RecordingMode, SimError, Simulation, StackConfig, TraceError,
};
use thiserror::Error;

pub use config::KeyValues;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Trace(#[from] TraceError),
    #[error("{context}: {source}")]
    Io { context: String, source: io::Error },
    #[error("{0}")]
    Invariant(String),
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(c) => CliError::Config(c),
            SimError::Invariant(msg) => CliError::Invariant(msg),
        }
    }
}

impl CliError {
    /// 1 usage/config, 2 I/O or unreadable trace, 3 invariant violation.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 1,
            CliError::Trace(TraceError::UnknownKind(_) | TraceError::InvalidFormat(_)) => 1,
            CliError::Trace(_) | CliError::Io { .. } => 2,
            CliError::Invariant(_) => 3,
        }
    }
}

fn io_err(context: impl Into<String>) -> impl FnOnce(io::Error) -> CliError {
    let context = context.into();
    move |source| CliError::Io { context, source }
}

#[derive(Debug, Parser)]
#[command(name = "mithril-sim", version, about = "Block cache simulator with association-mining prefetching")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Replay a trace and write one report.
    Simulate(SimulateArgs),
    /// Replay a trace at several cache sizes (hit-ratio curve).
    Sweep(SweepArgs),
    /// Replay a trace with Mithril and dump the prefetching table as src,dst.
    DumpAssociations(RunArgs),
    /// Per-block request frequency and hit count.
    Hitfreq(RunArgs),
    /// Generate a synthetic trace.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Csv,
    Jsonl,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// plaintext, csv, binary64 or extent-csv.
    #[arg(long)]
    pub format: Option<String>,
    #[arg(long)]
    pub addr_col: Option<usize>,
    #[arg(long)]
    pub len_col: Option<usize>,
    #[arg(long)]
    pub op_col: Option<usize>,
    /// Bytes per block, for extent expansion and metadata charging.
    #[arg(long)]
    pub block_size: Option<u64>,
    #[arg(long)]
    pub radix: Option<u32>,
    #[arg(long)]
    pub reads_only: bool,
    /// fail or skip.
    #[arg(long)]
    pub on_parse_error: Option<String>,
}

#[derive(Debug, Args)]
pub struct StackArgs {
    /// key=value file; command-line flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub policy: Option<String>,
    #[arg(long)]
    pub second_chance: bool,
    #[arg(long)]
    pub mithril: bool,
    #[arg(long)]
    pub amp: bool,
    #[arg(long)]
    pub pg: bool,

    #[arg(long)]
    pub min_support: Option<usize>,
    #[arg(long)]
    pub max_support: Option<usize>,
    #[arg(long)]
    pub lookahead: Option<u32>,
    #[arg(long)]
    pub prefetch_list_size: Option<usize>,
    #[arg(long)]
    pub max_metadata: Option<f64>,
    #[arg(long)]
    pub recording_table_rows: Option<usize>,
    #[arg(long)]
    pub mining_table_rows: Option<usize>,
    #[arg(long)]
    pub recording_mode: Option<String>,

    #[arg(long)]
    pub amp_max_streams: Option<usize>,
    #[arg(long)]
    pub amp_seq_threshold: Option<u32>,
    #[arg(long)]
    pub amp_initial_degree: Option<u32>,
    #[arg(long)]
    pub amp_max_degree: Option<u32>,

    #[arg(long)]
    pub pg_window: Option<usize>,
    #[arg(long)]
    pub pg_threshold: Option<f64>,
    #[arg(long)]
    pub pg_max_prefetch: Option<usize>,
    #[arg(long)]
    pub pg_max_metadata: Option<f64>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub trace: TraceArgs,
    #[command(flatten)]
    pub stack: StackArgs,
    #[arg(long)]
    pub size_blocks: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, value_enum)]
    pub report_format: Option<ReportFormat>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub trace: TraceArgs,
    #[command(flatten)]
    pub stack: StackArgs,
    /// Comma-separated cache sizes in blocks, increasing.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Vec<u64>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub report_format: Option<ReportFormat>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Workload {
    /// Pairs of blocks requested back to back, recurring in shuffled rounds.
    Paired,
    /// One sequential run.
    Sequential,
    /// Several sequential runs interleaved at random.
    Interleaved,
    /// Uniform random requests.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthFormat {
    Plaintext,
    Binary64,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(value_enum)]
    pub workload: Workload,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// paired: number of pairs.
    #[arg(long, default_value_t = 1000)]
    pub pairs: usize,
    /// paired: times each pair recurs.
    #[arg(long, default_value_t = 5)]
    pub rounds: usize,
    /// sequential/interleaved: blocks per run; uniform: number of requests.
    #[arg(long, default_value_t = 100_000)]
    pub len: u64,
    /// sequential: first block.
    #[arg(long, default_value_t = 0)]
    pub start: u64,
    /// interleaved: number of runs.
    #[arg(long, default_value_t = 8)]
    pub streams: usize,
    /// uniform: number of distinct blocks.
    #[arg(long, default_value_t = 10_000)]
    pub universe: u64,
    #[arg(long, value_enum, default_value_t = SynthFormat::Plaintext)]
    pub format: SynthFormat,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

/// Parses `args` (program name first) and runs the command.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::DumpAssociations(a) => dump_associations(a),
        Command::Hitfreq(a) => hitfreq(a),
        Command::Synth(a) => cmd_synth(a),
    }
}

/// Everything a run needs after merging flags, config file and defaults.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub trace: PathBuf,
    pub format: TraceFormat,
    pub stack: StackConfig,
}

impl RunSpec {
    /// `key=value` lines describing every knob, in a fixed order.
    pub fn header(&self) -> Vec<(String, String)> {
        let mut h = vec![
            ("trace".to_string(), self.trace.display().to_string()),
            ("format".to_string(), self.format.kind.to_string()),
            ("addr_col".to_string(), self.format.addr_col.to_string()),
            ("len_col".to_string(), self.format.len_col.to_string()),
            (
                "op_col".to_string(),
                self.format.op_col.map_or("none".to_string(), |c| c.to_string()),
            ),
            ("block_size".to_string(), self.stack.block_size.to_string()),
            ("radix".to_string(), self.format.radix.to_string()),
            ("reads_only".to_string(), self.format.reads_only.to_string()),
            (
                "on_parse_error".to_string(),
                match self.format.on_parse_error {
                    OnParseError::Fail => "fail",
                    OnParseError::Skip => "skip",
                }
                .to_string(),
            ),
            ("policy".to_string(), self.stack.cache.policy.to_string()),
            ("size_blocks".to_string(), self.stack.cache.capacity_blocks.to_string()),
            ("second_chance".to_string(), self.stack.cache.second_chance.to_string()),
            ("mithril".to_string(), self.stack.mithril.is_some().to_string()),
            ("baseline".to_string(), self.stack.baseline.name().to_string()),
        ];
        let mut push = |k: &str, v: String| h.push((k.to_string(), v));
        if let Some(m) = &self.stack.mithril {
            push("min_support", m.min_support.to_string());
            push("max_support", m.max_support.to_string());
            push("lookahead", m.lookahead.to_string());
            push("prefetch_list_size", m.prefetch_list_size.to_string());
            push("max_metadata", m.max_metadata.to_string());
            push("recording_table_rows", m.recording_table_rows.to_string());
            push("mining_table_rows", m.mining_table_rows.to_string());
            push("recording_mode", m.recording_mode.to_string());
            push("association_direction", "both".to_string());
        }
        match &self.stack.baseline {
            Baseline::None => {}
            Baseline::Amp(a) => {
                push("amp_max_streams", a.max_streams.to_string());
                push("amp_seq_threshold", a.seq_threshold.to_string());
                push("amp_initial_degree", a.initial_degree.to_string());
                push("amp_max_degree", a.max_degree.to_string());
            }
            Baseline::Pg(p) => {
                push("pg_window", p.window.to_string());
                push("pg_threshold", p.prob_threshold.to_string());
                push("pg_max_prefetch", p.max_prefetch.to_string());
                push("pg_max_metadata", p.max_metadata.to_string());
            }
        }
        h
    }

    /// Name such as `mithril-amp-lru`.
    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if self.stack.mithril.is_some() {
            parts.push("mithril".to_string());
        }
        if self.stack.baseline != Baseline::None {
            parts.push(self.stack.baseline.name().to_string());
        }
        parts.push(self.stack.cache.policy.to_string());
        parts.join("-")
    }
}

fn resolve(
    trace: &TraceArgs,
    stack: &StackArgs,
    size_blocks: Option<u64>,
    need_size: bool,
) -> Result<RunSpec, CliError> {
    let kv = match &stack.config {
        Some(path) => KeyValues::load(path)?,
        None => KeyValues::default(),
    };

    let path: PathBuf = match &trace.trace {
        Some(p) => p.clone(),
        None => kv
            .get_str("trace")
            .map(PathBuf::from)
            .ok_or_else(|| CliError::Usage("--trace is required".into()))?,
    };
    let kind: TraceKind = kv.pick_str(trace.format.as_deref(), "format", "plaintext").parse()?;
    let mut format = TraceFormat::with_kind(kind);
    format.addr_col = kv.pick(trace.addr_col, "addr_col", format.addr_col)?;
    format.len_col = kv.pick(trace.len_col, "len_col", format.len_col)?;
    format.op_col = match trace.op_col {
        Some(c) => Some(c),
        None => match kv.get_str("op_col") {
            Some("none") => None,
            Some(_) => Some(kv.pick(None, "op_col", 0usize)?),
            None => format.op_col,
        },
    };
    format.block_size = kv.pick(trace.block_size, "block_size", format.block_size)?;
    format.radix = kv.pick(trace.radix, "radix", format.radix)?;
    format.reads_only = trace.reads_only || kv.pick(None, "reads_only", false)?;
    format.on_parse_error = kv.pick_str(trace.on_parse_error.as_deref(), "on_parse_error", "fail").parse()?;
    format.validate()?;
    if format.block_size == 0 {
        return Err(ConfigError::new("block_size must be positive").into());
    }

    let policy: Policy = kv.pick_str(stack.policy.as_deref(), "policy", "lru").parse()?;
    let size = match size_blocks.or(kv.parse_opt("size_blocks")?) {
        Some(s) => s,
        None if need_size => return Err(CliError::Usage("--size-blocks is required".into())),
        None => 1,
    };
    let second_chance = stack.second_chance || kv.pick(None, "second_chance", false)?;
    let cache = CacheConfig::new(size, policy).with_second_chance(second_chance);

    let use_mithril = stack.mithril || kv.pick(None, "mithril", false)?;
    let use_amp = stack.amp || kv.pick(None, "amp", false)?;
    let use_pg = stack.pg || kv.pick(None, "pg", false)?;
    if use_amp && use_pg {
        return Err(CliError::Usage("choose at most one of --amp and --pg".into()));
    }

    let mithril = if use_mithril {
        let d = MithrilConfig::default();
        let cfg = MithrilConfig {
            min_support: kv.pick(stack.min_support, "min_support", d.min_support)?,
            max_support: kv.pick(stack.max_support, "max_support", d.max_support)?,
            lookahead: kv.pick(stack.lookahead, "lookahead", d.lookahead)?,
            prefetch_list_size: kv.pick(stack.prefetch_list_size, "prefetch_list_size", d.prefetch_list_size)?,
            max_metadata: kv.pick(stack.max_metadata, "max_metadata", d.max_metadata)?,
            recording_table_rows: kv.pick(
                stack.recording_table_rows,
                "recording_table_rows",
                d.recording_table_rows,
            )?,
            mining_table_rows: kv.pick(stack.mining_table_rows, "mining_table_rows", d.mining_table_rows)?,
            recording_mode: kv
                .pick_str(stack.recording_mode.as_deref(), "recording_mode", d.recording_mode.name())
                .parse::<RecordingMode>()?,
        };
        cfg.validate()?;
        Some(cfg)
    } else {
        None
    };

    let baseline = if use_amp {
        let d = AmpConfig::default();
        let cfg = AmpConfig {
            max_streams: kv.pick(stack.amp_max_streams, "amp_max_streams", d.max_streams)?,
            seq_threshold: kv.pick(stack.amp_seq_threshold, "amp_seq_threshold", d.seq_threshold)?,
            initial_degree: kv.pick(stack.amp_initial_degree, "amp_initial_degree", d.initial_degree)?,
            max_degree: kv.pick(stack.amp_max_degree, "amp_max_degree", d.max_degree)?,
        };
        cfg.validate()?;
        Baseline::Amp(cfg)
    } else if use_pg {
        let d = PgConfig::default();
        let cfg = PgConfig {
            window: kv.pick(stack.pg_window, "pg_window", d.window)?,
            prob_threshold: kv.pick(stack.pg_threshold, "pg_threshold", d.prob_threshold)?,
            max_prefetch: kv.pick(stack.pg_max_prefetch, "pg_max_prefetch", d.max_prefetch)?,
            max_metadata: kv.pick(stack.pg_max_metadata, "pg_max_metadata", d.max_metadata)?,
        };
        cfg.validate()?;
        Baseline::Pg(cfg)
    } else {
        Baseline::None
    };

    let stack = StackConfig {
        cache,
        block_size: format.block_size,
        baseline,
        mithril,
    };
    Ok(RunSpec {
        trace: path,
        format,
        stack,
    })
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(io_err(format!("cannot create {}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_reports(
    out: &mut dyn Write,
    spec: &RunSpec,
    reports: &[SimulationReport],
    format: ReportFormat,
) -> Result<(), CliError> {
    let err = io_err("cannot write report");
    let header = spec.header();
    let res = match format {
        ReportFormat::Csv => (|| {
            for (k, v) in &header {
                writeln!(out, "# {k}={v}")?;
            }
            write_csv(&mut *out, reports).map_err(io::Error::from)
        })(),
        ReportFormat::Jsonl => (|| {
            let cfg: serde_json::Map<String, serde_json::Value> = header
                .into_iter()
                .map(|(k, v)| (k, serde_json::Value::String(v)))
                .collect();
            serde_json::to_writer(&mut *out, &serde_json::json!({ "config": cfg }))?;
            writeln!(out)?;
            write_jsonl(&mut *out, reports)
        })(),
    };
    res.and_then(|()| out.flush()).map_err(err)
}

fn run_streaming(spec: &RunSpec) -> Result<Simulation, CliError> {
    let mut sim = Simulation::new(&spec.stack)?;
    let mut reader = open_trace(&spec.trace, &spec.format)?;
    while let Some(req) = reader.next_request()? {
        sim.step(req.addr)?;
    }
    Ok(sim)
}

fn simulate(a: SimulateArgs) -> Result<(), CliError> {
    let spec = resolve(&a.run.trace, &a.run.stack, a.run.size_blocks, true)?;
    let report = run_streaming(&spec)?.finish()?;
    let mut out = open_output(a.run.output.as_deref())?;
    write_reports(&mut out, &spec, std::slice::from_ref(&report), a.report_format.unwrap_or(ReportFormat::Csv))?;
    eprintln!("{} {}", spec.label(), report.summary_line());
    Ok(())
}

fn cmd_sweep(a: SweepArgs) -> Result<(), CliError> {
    if a.sizes.is_empty() {
        return Err(CliError::Usage("--sizes needs at least one cache size".into()));
    }
    let spec = resolve(&a.trace, &a.stack, a.sizes.first().copied(), true)?;
    let trace = load_addresses(&spec.trace, &spec.format)?;
    let reports = sweep(&trace, &a.sizes, &spec.stack)?;
    let mut out = open_output(a.output.as_deref())?;
    write_reports(&mut out, &spec, &reports, a.report_format.unwrap_or(ReportFormat::Csv))?;
    for r in &reports {
        eprintln!("{} size_blocks={} {}", spec.label(), r.capacity_blocks, r.summary_line());
    }
    Ok(())
}

fn dump_associations(a: RunArgs) -> Result<(), CliError> {
    let spec = resolve(&a.trace, &a.stack, a.size_blocks, true)?;
    if spec.stack.mithril.is_none() {
        return Err(CliError::Usage("dump-associations needs --mithril".into()));
    }
    let sim = run_streaming(&spec)?;
    let engine = sim.mithril().expect("mithril enabled");
    let mut out = open_output(a.output.as_deref())?;
    let res = (|| {
        writeln!(out, "src,dst")?;
        for (src, dst) in engine.associations() {
            writeln!(out, "{src},{dst}")?;
        }
        out.flush()
    })();
    res.map_err(io_err("cannot write associations"))?;
    sim.finish()?;
    Ok(())
}

fn hitfreq(a: RunArgs) -> Result<(), CliError> {
    let spec = resolve(&a.trace, &a.stack, a.size_blocks, true)?;
    let trace = load_addresses(&spec.trace, &spec.format)?;
    let mut runs = Vec::new();
    let has_prefetch = spec.stack.mithril.is_some() || spec.stack.baseline != Baseline::None;
    if has_prefetch {
        let plain = RunSpec {
            stack: StackConfig {
                baseline: Baseline::None,
                mithril: None,
                ..spec.stack.clone()
            },
            ..spec.clone()
        };
        runs.push(plain);
    }
    runs.push(spec);
    let mut out = open_output(a.output.as_deref())?;
    writeln!(out, "algorithm,addr,frequency,hit_count").map_err(io_err("cannot write output"))?;
    for run in &runs {
        let (rows, report) = analyze_hit_frequency(trace.iter().copied(), &run.stack)?;
        let label = run.label();
        for r in rows {
            writeln!(out, "{label},{},{},{}", r.addr, r.frequency, r.hit_count).map_err(io_err("cannot write output"))?;
        }
        eprintln!("{label} {}", report.summary_line());
    }
    out.flush().map_err(io_err("cannot write output"))
}

fn cmd_synth(a: SynthArgs) -> Result<(), CliError> {
    let trace = match a.workload {
        Workload::Paired => {
            if a.pairs < 2 {
                return Err(CliError::Usage("--pairs must be at least 2".into()));
            }
            synth::paired(a.pairs, a.rounds, a.seed).1
        }
        Workload::Sequential => synth::sequential(a.start, a.len),
        Workload::Interleaved => synth::interleaved(a.streams, a.len, a.seed),
        Workload::Uniform => {
            if a.universe == 0 {
                return Err(CliError::Usage("--universe must be positive".into()));
            }
            synth::uniform(a.len as usize, a.universe, a.seed)
        }
    };
    let mut out = open_output(a.output.as_deref())?;
    let res = (|| {
        match a.format {
            SynthFormat::Plaintext => {
                for addr in &trace {
                    writeln!(out, "{addr}")?;
                }
            }
            SynthFormat::Binary64 => {
                for addr in &trace {
                    out.write_all(&addr.to_le_bytes())?;
                }
            }
        }
        out.flush()
    })();
    res.map_err(io_err("cannot write trace"))
}
