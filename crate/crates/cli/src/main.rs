//! `rmsmec`: single solves, parameter sweeps, convergence traces, capacity
//! searches, the brute-force subcarrier oracle and channel dumps. Every
//! subcommand writes CSV, to `--out` or to stdout.
//!
//! Exit status: 0 on success, 1 when the scenario or a solve is infeasible,
//! 2 on usage or configuration errors, 3 on I/O errors.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use rmsmec_core::benchmarks::{run_benchmark, BenchmarkId};
use rmsmec_core::harness::{
    convergence_trace, emit_csv, oracle_p2_grid, run_sweep, summarize, write_csv, HarnessError, Measure, SweepParam,
    SweepSpec,
};
use rmsmec_core::harness::sweep::scenario_channels;
use rmsmec_core::scenario::{default_paper_params, load_params, SeededStreams, SystemParams};
use rmsmec_core::solvers::{init_point, round_and_repair, solve_p2, BcdSettings, Scheme, SolverError};

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Infeasible(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            Self::Infeasible(_) => 1,
            Self::Usage(_) => 2,
            Self::Io(_) => 3,
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::InvalidSpec(_) | HarnessError::Config(_) => Self::Usage(e.to_string()),
            HarnessError::Solver(_) => Self::Infeasible(e.to_string()),
            HarnessError::Io(_) | HarnessError::Csv(_) => Self::Io(e.to_string()),
        }
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        Self::Infeasible(e.to_string())
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "rmsmec", version, about = "Energy-minimizing resource allocation for metasurface-assisted multi-tier edge computing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario TOML; defaults to the built-in reference scenario.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Outer iteration cap of the block descent.
    #[arg(long)]
    max_outer: Option<usize>,
    /// Fractional-decrease stopping threshold.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one scenario with one or more schemes.
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "proposed")]
        benchmarks: String,
        /// Per-iteration trace of the first scheme; defaults to `<out>_trace.csv`.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Energy of every scheme over a parameter grid and a set of seeds.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// One of T, D, M, K, iterations.
        #[arg(long)]
        param: String,
        #[arg(long)]
        values: String,
        #[arg(long, default_value = "all")]
        benchmarks: String,
        /// A count `n` (seeds 1..=n) or a comma-separated list.
        #[arg(long, default_value = "20")]
        seeds: String,
    },
    /// Objective after every outer iteration of the proposed scheme.
    Converge {
        #[command(flatten)]
        common: Common,
        /// Surface sizes.
        #[arg(long, default_value = "16,25,36,49")]
        values: String,
        #[arg(long, default_value = "20")]
        seeds: String,
    },
    /// Largest uniform per-user demand each scheme can serve.
    Capacity {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "T")]
        param: String,
        /// Grid of the swept parameter; the scenario's own value when omitted.
        #[arg(long)]
        values: Option<String>,
        #[arg(long, default_value = "proposed,comm-collab,comp-collab,local-only")]
        benchmarks: String,
        #[arg(long, default_value = "20")]
        seeds: String,
    },
    /// Relaxed, rounded and exhaustive subcarrier energies of a tiny scenario.
    Oracle {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        grid_levels: usize,
    },
    /// Channel coefficients of one seeded scenario.
    DumpChannels {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn load(common: &Common) -> Result<(SystemParams, BcdSettings), CliError> {
    let (params, mut settings) = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            let params = load_params(&text).map_err(|e| CliError::Usage(e.to_string()))?;
            let settings = BcdSettings::from_config(&text).map_err(|e| CliError::Usage(e.to_string()))?;
            (params, settings)
        }
        None => (default_paper_params(), BcdSettings::default()),
    };
    if let Some(n) = common.max_outer {
        if n == 0 {
            return Err(CliError::Usage("--max-outer must be at least 1".into()));
        }
        settings.max_outer = n;
    }
    if let Some(eps) = common.epsilon {
        if !(eps >= 0.0) {
            return Err(CliError::Usage("--epsilon must be non-negative".into()));
        }
        settings.epsilon = Some(eps);
    }
    Ok((params, settings))
}

fn parse_seeds(text: &str) -> Result<Vec<u64>, CliError> {
    let bad = || CliError::Usage(format!("bad seed list `{text}`"));
    if text.contains(',') {
        text.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect()
    } else {
        let n: u64 = text.trim().parse().map_err(|_| bad())?;
        Ok((1..=n).collect())
    }
}

fn parse_values(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|s| s.trim().parse().map_err(|_| CliError::Usage(format!("bad value `{s}`"))))
        .collect()
}

fn parse_benchmarks(text: &str) -> Result<Vec<BenchmarkId>, CliError> {
    if text.trim() == "all" {
        return Ok(BenchmarkId::ALL.to_vec());
    }
    text.split(',')
        .map(|s| s.parse().map_err(|e: rmsmec_core::benchmarks::UnknownBenchmark| CliError::Usage(e.to_string())))
        .collect()
}

fn parse_param(text: &str) -> Result<SweepParam, CliError> {
    text.parse().map_err(|e: HarnessError| CliError::Usage(e.to_string()))
}

fn emit<T: Serialize>(rows: &[T], out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(path) => emit_csv(rows, path)?,
        None => write_csv(rows, io::stdout().lock())?,
    }
    Ok(())
}

fn trace_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("result");
    out.with_file_name(format!("{stem}_trace.csv"))
}

fn summary_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("sweep");
    out.with_file_name(format!("{stem}_summary.csv"))
}

fn solve(common: &Common, seed: u64, benchmarks: &str, trace: Option<&Path>) -> Result<(), CliError> {
    let (mut params, settings) = load(common)?;
    params.seed = seed;
    let ids = parse_benchmarks(benchmarks)?;
    let channels = scenario_channels(&params);
    let mut rows = Vec::new();
    let mut first_state = None;
    for id in ids {
        let out = run_benchmark(id, &params, &channels, &settings)?;
        rows.push(out.row(&params));
        if first_state.is_none() {
            first_state = out.state;
        }
    }
    emit(&rows, common.out.as_deref())?;
    let trace = trace.map(Path::to_path_buf).or_else(|| common.out.as_deref().map(trace_path));
    if let (Some(path), Some(state)) = (trace, first_state) {
        let file = File::create(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        state
            .write_trace_csv(BufWriter::new(file))
            .map_err(|e| CliError::Io(e.to_string()))?;
    }
    Ok(())
}

fn sweep(common: &Common, param: SweepParam, values: Vec<f64>, ids: Vec<BenchmarkId>, seeds: &str, measure: Measure) -> Result<(), CliError> {
    let (params, settings) = load(common)?;
    let spec = SweepSpec {
        param,
        values,
        benchmarks: ids,
        seeds: parse_seeds(seeds)?,
        measure,
        out: common.out.clone(),
    };
    let rows = run_sweep(&spec, &params, &settings)?;
    match &common.out {
        Some(out) => emit_csv(&summarize(&rows), &summary_path(out))?,
        None => write_csv(&rows, io::stdout().lock())?,
    }
    Ok(())
}

fn converge(common: &Common, values: &str, seeds: &str) -> Result<(), CliError> {
    let (params, settings) = load(common)?;
    let m_list = parse_values(values)?.into_iter().map(|v| v as usize).collect::<Vec<_>>();
    let rows = convergence_trace(&params, &parse_seeds(seeds)?, &m_list, &settings)?;
    emit(&rows, common.out.as_deref())
}

fn capacity(common: &Common, param: &str, values: Option<&str>, benchmarks: &str, seeds: &str) -> Result<(), CliError> {
    let param = parse_param(param)?;
    let values = match values {
        Some(v) => parse_values(v)?,
        None => {
            let (p, s) = load(common)?;
            vec![match param {
                SweepParam::T => p.t,
                SweepParam::D => p.d.iter().sum::<f64>() / p.d.len().max(1) as f64,
                SweepParam::M => p.m() as f64,
                SweepParam::K => p.k as f64,
                SweepParam::Iterations => s.max_outer as f64,
            }]
        }
    };
    sweep(common, param, values, parse_benchmarks(benchmarks)?, seeds, Measure::Capacity)
}

#[derive(Serialize)]
struct OracleRow {
    seed: u64,
    relaxed: f64,
    rounded: f64,
    oracle: Option<f64>,
    gap: Option<f64>,
}

fn oracle(common: &Common, seed: u64, grid_levels: usize) -> Result<(), CliError> {
    let (mut params, settings) = load(common)?;
    params.seed = seed;
    let channels = scenario_channels(&params);
    let init = init_point(&params, &channels, &Scheme::PROPOSED, &SeededStreams::new(seed))?;
    let exact = oracle_p2_grid(&params, &channels, &init, grid_levels)?;
    let relaxed = solve_p2(&params, &channels, &init, &settings.solver)?;
    let rounded = round_and_repair(&params, &channels, &relaxed.alloc, settings.rounding_search, &settings.solver)?;
    let row = OracleRow {
        seed,
        relaxed: relaxed.transmit_energy,
        rounded: rounded.transmit_energy,
        oracle: exact.energy,
        gap: exact.energy.map(|e| rounded.transmit_energy / e - 1.0),
    };
    emit(&[row], common.out.as_deref())
}

#[derive(Serialize)]
struct ChannelRow {
    link: &'static str,
    k: Option<usize>,
    n: usize,
    m: Option<usize>,
    re: f64,
    im: f64,
}

fn dump_channels(common: &Common, seed: u64) -> Result<(), CliError> {
    let (mut params, _) = load(common)?;
    params.seed = seed;
    let ch = scenario_channels(&params);
    let mut rows = Vec::new();
    for k in 0..params.k {
        for n in 0..params.n {
            let x = ch.h_r[(k, n)];
            rows.push(ChannelRow { link: "relay", k: Some(k), n, m: None, re: x.re, im: x.im });
        }
    }
    for (link, vecs) in [("relay_surface", &ch.g), ("surface_feed", &ch.h_f), ("cascade", &ch.v)] {
        for (n, v) in vecs.iter().enumerate() {
            for (m, x) in v.iter().enumerate() {
                rows.push(ChannelRow { link, k: None, n, m: Some(m), re: x.re, im: x.im });
            }
        }
    }
    emit(&rows, common.out.as_deref())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve { common, seed, benchmarks, trace } => solve(&common, seed, &benchmarks, trace.as_deref()),
        Command::Sweep { common, param, values, benchmarks, seeds } => sweep(
            &common,
            parse_param(&param)?,
            parse_values(&values)?,
            parse_benchmarks(&benchmarks)?,
            &seeds,
            Measure::Energy,
        ),
        Command::Converge { common, values, seeds } => converge(&common, &values, &seeds),
        Command::Capacity { common, param, values, benchmarks, seeds } => {
            capacity(&common, &param, values.as_deref(), &benchmarks, &seeds)
        }
        Command::Oracle { common, seed, grid_levels } => oracle(&common, seed, grid_levels),
        Command::DumpChannels { common, seed } => dump_channels(&common, seed),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {
            let _ = io::stdout().flush();
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("rmsmec: {e}");
            ExitCode::from(e.code())
        }
    }
}
