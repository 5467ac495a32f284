//! `twm`: replay interaction streams into a walk-matrix sketch, compare it
//! against the exact oracle, sweep sketch dimensions and benchmark
//! throughput.
//!
//! Exit codes: 0 success, 1 input/parse error, 2 configuration error,
//! 3 numeric range error, 4 instance too large for the oracle.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use serde::Serialize;

use twm_core::eval::{self, EvalError, REPLAY_WINDOW, REPORT_SCHEMA_VERSION};
use twm_core::event::{compact_ids, normalize_times, parse_stream, StreamError};
use twm_core::oracle::{Horizon, OracleError, WalkOracle};
use twm_core::pairwise::{pairwise_feature, PairwiseFeature};
use twm_core::sketch::auto_dim;
use twm_core::{InteractionEvent, NodeId, ScoreScheme, Sketch, SketchConfig, SketchError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SchemeArg {
    Decay,
    Count,
    Cawn,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Mode {
    Replay,
    Compare,
    Sweep,
    Bench,
}

#[derive(Debug, Parser)]
#[command(name = "twm", version, about = "Temporal walk matrix sketches: replay, compare, sweep, bench")]
struct Args {
    #[arg(long, value_enum, default_value = "replay")]
    mode: Mode,
    /// Interaction stream, one `u,v,t` record per line.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "decay")]
    scheme: SchemeArg,
    /// Time-decay weight.
    #[arg(long, default_value_t = 1e-6)]
    lambda: f64,
    /// CAWN sampling decay.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Maximum hop count.
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Sketch dimension.
    #[arg(long, conflicts_with = "dim_auto")]
    dim: Option<usize>,
    /// Use `ceil(10 ln(2E))` for E input events.
    #[arg(long)]
    dim_auto: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Timestamp subtracted from every event; defaults to the first
    /// timestamp (or 0 when resuming from a snapshot).
    #[arg(long)]
    t_origin: Option<f64>,
    /// Relabel node ids densely in order of first appearance.
    #[arg(long)]
    compact_ids: bool,
    /// Inner-product tolerance of the compare report.
    #[arg(long, default_value_t = 0.5)]
    epsilon: f64,
    /// Number of seeds in compare/sweep ensembles.
    #[arg(long, default_value_t = 1)]
    seeds: usize,
    /// Sketch dimensions for the sweep.
    #[arg(long, value_delimiter = ',', default_value = "1,4,16,64")]
    dims: Vec<usize>,
    /// Stream sizes for the benchmark.
    #[arg(long, value_delimiter = ',', default_value = "100000,1000000")]
    edge_counts: Vec<usize>,
    /// Benchmark repeats per size (fastest is reported).
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    /// Report path (JSON); stdout when absent.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    snapshot_out: Option<PathBuf>,
    #[arg(long)]
    snapshot_in: Option<PathBuf>,
    /// Node pairs `u:v,...` whose pairwise features are exported after replay.
    #[arg(long, value_delimiter = ',')]
    pairs: Vec<String>,
    /// Pairwise feature output; CSV when the extension is `.csv`, JSON otherwise.
    #[arg(long, requires = "pairs")]
    pairs_out: Option<PathBuf>,
    /// Directory receiving the oracle matrices as `A<l>.csv` (compare mode).
    #[arg(long)]
    matrices_out: Option<PathBuf>,
    /// Hard cap on node ids held by the sketch.
    #[arg(long)]
    max_nodes: Option<usize>,
    /// Worker threads; defaults to all cores.
    #[arg(long, env = "TWM_THREADS")]
    threads: Option<usize>,
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }

    fn config(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }
}

impl From<StreamError> for Failure {
    fn from(e: StreamError) -> Self {
        Failure::input(e.to_string())
    }
}

impl From<SketchError> for Failure {
    fn from(e: SketchError) -> Self {
        let code = match e {
            SketchError::NumericRange { .. } => 3,
            SketchError::TimestampRegression { .. }
            | SketchError::SharedTimestamp { .. }
            | SketchError::CorruptSnapshot(_)
            | SketchError::VersionMismatch { .. }
            | SketchError::ScalarMismatch { .. } => 1,
            _ => 2,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<OracleError> for Failure {
    fn from(e: OracleError) -> Self {
        let code = match e {
            OracleError::WalkExplosion { .. } | OracleError::InstanceTooLarge { .. } => 4,
            _ => 2,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Sketch(e) => e.into(),
            EvalError::Oracle(e) => e.into(),
            EvalError::Config(m) => Failure::config(m),
        }
    }
}

fn io_error(path: &Path, e: io::Error) -> Failure {
    Failure::input(format!("{}: {e}", path.display()))
}

/// Every report is wrapped with the mode and the resolved configuration.
#[derive(Serialize)]
struct Envelope<'a, R: Serialize> {
    schema_version: u32,
    mode: &'static str,
    scheme: ScoreScheme,
    t_origin: Option<f64>,
    warnings: &'a [String],
    report: R,
}

fn scheme_of(args: &Args) -> Result<ScoreScheme, Failure> {
    let scheme = match args.scheme {
        SchemeArg::Decay => ScoreScheme::TimeDecay { lambda: args.lambda },
        SchemeArg::Count => ScoreScheme::UniformCount,
        SchemeArg::Cawn => ScoreScheme::CawnDecay { alpha: args.alpha },
    };
    scheme.validate().map_err(|e| Failure::config(e.0))?;
    Ok(scheme)
}

struct Stream {
    events: Vec<InteractionEvent>,
    t_origin: Option<f64>,
}

fn load_stream(args: &Args, resuming: bool) -> Result<Stream, Failure> {
    let Some(path) = &args.input else {
        return Ok(Stream { events: Vec::new(), t_origin: None });
    };
    let file = File::open(path).map_err(|e| io_error(path, e))?;
    let mut events = parse_stream(BufReader::new(file))?;
    if args.compact_ids {
        events = compact_ids(&events).0;
    }
    let origin = match args.t_origin {
        Some(t) => Some(t),
        None if resuming => None,
        None => events.first().map(|e| e.t),
    };
    if let Some(t) = origin {
        events = normalize_times(&events, t)?;
    }
    Ok(Stream { events, t_origin: origin })
}

fn dim_of(args: &Args, events: usize) -> Result<usize, Failure> {
    let dim = if args.dim_auto { auto_dim(events) } else { args.dim.unwrap_or(64) };
    if dim == 0 {
        return Err(Failure::config("--dim must be at least 1"));
    }
    Ok(dim)
}

fn range_warnings(scheme: ScoreScheme, events: &[InteractionEvent]) -> Vec<String> {
    let mut warnings = Vec::new();
    if let (ScoreScheme::TimeDecay { lambda }, Some(last)) = (scheme, events.last()) {
        if lambda * last.t > 500.0 {
            warnings.push(format!(
                "lambda * (t_max - t_origin) = {:.1} exceeds 500; exp(lambda t) is close to overflow",
                lambda * last.t
            ));
        }
    }
    warnings
}

fn write_json<R: Serialize>(path: Option<&Path>, value: &R) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::config(e.to_string()))?;
    match path {
        Some(p) => std::fs::write(p, text + "\n").map_err(|e| io_error(p, e)),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn parse_pairs(pairs: &[String]) -> Result<Vec<(NodeId, NodeId)>, Failure> {
    pairs
        .iter()
        .map(|p| {
            let (u, v) = p.split_once(':').ok_or_else(|| Failure::config(format!("pair {p:?} is not `u:v`")))?;
            let parse = |x: &str| x.trim().parse::<NodeId>().map_err(|e| Failure::config(format!("pair {p:?}: {e}")));
            Ok((parse(u)?, parse(v)?))
        })
        .collect()
}

fn export_pairs(path: &Path, features: &[PairwiseFeature<f64>]) -> Result<(), Failure> {
    let file = File::create(path).map_err(|e| io_error(path, e))?;
    let mut out = BufWriter::new(file);
    let result = if path.extension().is_some_and(|e| e == "csv") {
        let len = features.first().map_or(0, |f| f.raw.len());
        PairwiseFeature::<f64>::write_csv_header(len, &mut out)
            .and_then(|_| features.iter().try_for_each(|f| f.write_csv_row(&mut out)))
    } else {
        serde_json::to_writer_pretty(&mut out, features).map_err(io::Error::other).and_then(|_| writeln!(out))
    };
    result.and_then(|_| out.flush()).map_err(|e| io_error(path, e))
}

fn cmd_replay(args: &Args, scheme: ScoreScheme) -> Result<(), Failure> {
    let stream = load_stream(args, args.snapshot_in.is_some())?;
    let mut state = match &args.snapshot_in {
        Some(path) => {
            let bytes = std::fs::read(path).map_err(|e| io_error(path, e))?;
            Sketch::restore(&bytes)?
        }
        None => {
            let dim = dim_of(args, stream.events.len())?;
            // over-limit ids surface as a capacity error during replay
            let n_hint = twm_core::event::node_count(&stream.events).min(args.max_nodes.unwrap_or(usize::MAX));
            Sketch::init(SketchConfig {
                n_hint,
                max_nodes: args.max_nodes,
                ..SketchConfig::new(args.k, dim, scheme, args.seed)
            })?
        }
    };
    let warnings = range_warnings(state.scheme(), &stream.events);
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let report = eval::replay_timed(&mut state, &stream.events, REPLAY_WINDOW)?;
    if let Some(path) = &args.snapshot_out {
        std::fs::write(path, state.snapshot()).map_err(|e| io_error(path, e))?;
    }
    if let Some(path) = &args.pairs_out {
        let features: Vec<_> =
            parse_pairs(&args.pairs)?.into_iter().map(|(u, v)| pairwise_feature(&state, u, v)).collect();
        export_pairs(path, &features)?;
    }
    let envelope = Envelope {
        schema_version: REPORT_SCHEMA_VERSION,
        mode: "replay",
        scheme: state.scheme(),
        t_origin: stream.t_origin,
        warnings: &warnings,
        report,
    };
    write_json(args.report.as_deref(), &envelope)
}

fn cmd_compare(args: &Args, scheme: ScoreScheme) -> Result<(), Failure> {
    let mut stream = load_stream(args, false)?;
    // the oracle indexes nodes densely
    stream.events = compact_ids(&stream.events).0;
    let dim = dim_of(args, stream.events.len())?;
    let n = twm_core::event::node_count(&stream.events);
    let config = eval::sketch_config(scheme, args.k, dim, args.seed, n);
    if let Some(dir) = &args.matrices_out {
        let exact = WalkOracle::new(&stream.events, n)?.exact_matrices::<f64>(
            scheme,
            args.k,
            Horizon::after_last(&stream.events),
        )?;
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
        for (l, m) in exact.matrices().iter().enumerate() {
            let path = dir.join(format!("A{l}.csv"));
            let file = File::create(&path).map_err(|e| io_error(&path, e))?;
            m.write_csv(BufWriter::new(file)).map_err(|e| io_error(&path, e))?;
        }
    }
    let warnings = range_warnings(scheme, &stream.events);
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let report = eval::compare::<f64>(&stream.events, config, args.epsilon, args.seeds)?;
    let envelope = Envelope {
        schema_version: REPORT_SCHEMA_VERSION,
        mode: "compare",
        scheme,
        t_origin: stream.t_origin,
        warnings: &warnings,
        report,
    };
    write_json(args.report.as_deref(), &envelope)
}

fn cmd_sweep(args: &Args, scheme: ScoreScheme) -> Result<(), Failure> {
    let mut stream = load_stream(args, false)?;
    stream.events = compact_ids(&stream.events).0;
    if args.dims.contains(&0) {
        return Err(Failure::config("sweep dimensions must be at least 1"));
    }
    let warnings = range_warnings(scheme, &stream.events);
    let n = twm_core::event::node_count(&stream.events);
    let report = eval::sweep::<f64>(&stream.events, scheme, args.k, &args.dims, args.seed, args.seeds, n)?;
    let envelope = Envelope {
        schema_version: REPORT_SCHEMA_VERSION,
        mode: "sweep",
        scheme,
        t_origin: stream.t_origin,
        warnings: &warnings,
        report,
    };
    write_json(args.report.as_deref(), &envelope)
}

fn cmd_bench(args: &Args, scheme: ScoreScheme) -> Result<(), Failure> {
    if args.edge_counts.contains(&0) {
        return Err(Failure::config("edge counts must be positive"));
    }
    let dim = dim_of(args, args.edge_counts.iter().copied().max().unwrap_or(0))?;
    let report = eval::bench::<f64>(&args.edge_counts, scheme, args.k, dim, args.seed, args.repeats)?;
    let envelope = Envelope {
        schema_version: REPORT_SCHEMA_VERSION,
        mode: "bench",
        scheme,
        t_origin: None,
        warnings: &[],
        report,
    };
    write_json(args.report.as_deref(), &envelope)
}

fn run(args: &Args) -> Result<(), Failure> {
    if args.k == 0 {
        return Err(Failure::config("--k must be at least 1"));
    }
    if let Some(threads) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build_global()
            .map_err(|e| Failure::config(e.to_string()))?;
    }
    let scheme = scheme_of(args)?;
    if args.mode != Mode::Bench && args.mode != Mode::Replay && args.input.is_none() {
        return Err(Failure::config("--input is required for compare and sweep"));
    }
    match args.mode {
        Mode::Replay => cmd_replay(args, scheme),
        Mode::Compare => cmd_compare(args, scheme),
        Mode::Sweep => cmd_sweep(args, scheme),
        Mode::Bench => cmd_bench(args, scheme),
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
