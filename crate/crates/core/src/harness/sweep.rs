//! Seeded parameter sweeps and convergence traces.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use super::{emit_csv, HarnessError};
use crate::benchmarks::{capacity, run_benchmark, BenchmarkId};
use crate::channel::{build_channel_set, ChannelSet};
use crate::scenario::{generate_topology, SeededStreams, SystemParams};
use crate::solvers::{run_bcd, BcdSettings};

/// Environment variable holding the worker count of sweeps. Unset or zero
/// means one worker per available core.
pub const WORKERS_ENV: &str = "RMSMEC_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SweepParam {
    T,
    D,
    M,
    K,
    /// Outer iteration cap of the descent.
    Iterations,
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::T => "T",
            Self::D => "D",
            Self::M => "M",
            Self::K => "K",
            Self::Iterations => "iterations",
        })
    }
}

impl FromStr for SweepParam {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "T" | "t" => Ok(Self::T),
            "D" | "d" => Ok(Self::D),
            "M" | "m" => Ok(Self::M),
            "K" | "k" => Ok(Self::K),
            "iterations" | "iters" => Ok(Self::Iterations),
            other => Err(HarnessError::InvalidSpec(format!("unknown sweep parameter `{other}`"))),
        }
    }
}

/// What each cell records.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measure {
    /// Total energy of the converged allocation.
    Energy,
    /// Largest uniform demand the scheme can serve.
    Capacity,
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub values: Vec<f64>,
    pub benchmarks: Vec<BenchmarkId>,
    pub seeds: Vec<u64>,
    pub measure: Measure,
    pub out: Option<PathBuf>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::InvalidSpec(msg));
        if self.values.is_empty() {
            return bad("no values".into());
        }
        if self.seeds.is_empty() {
            return bad("no seeds".into());
        }
        if self.benchmarks.is_empty() {
            return bad("no benchmarks".into());
        }
        for &v in &self.values {
            let ok = match self.param {
                SweepParam::T => v > 0.0,
                SweepParam::D => v >= 0.0,
                SweepParam::M | SweepParam::K | SweepParam::Iterations => v >= 1.0 && v.fract() == 0.0,
            };
            if !ok || !v.is_finite() {
                return bad(format!("value {v} is not valid for {}", self.param));
            }
        }
        Ok(())
    }
}

/// One (value, seed, scheme) cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub param: String,
    pub value: f64,
    pub benchmark: String,
    pub seed: u64,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "D")]
    pub d: f64,
    /// Total energy, J; empty in capacity sweeps.
    pub objective: Option<f64>,
    /// Uniform demand capacity, bits; empty in energy sweeps.
    pub capacity: Option<f64>,
    pub iterations: usize,
    pub feasible: bool,
    pub error: String,
}

impl SweepRow {
    /// The recorded quantity of the sweep's measure.
    pub fn metric(&self) -> Option<f64> {
        self.objective.or(self.capacity)
    }
}

/// Mean and standard deviation of one (value, scheme) cell over the
/// feasible seeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub param: String,
    pub value: f64,
    pub benchmark: String,
    pub mean: f64,
    pub std: f64,
    pub count: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    #[serde(rename = "M")]
    pub m: usize,
    pub seed: u64,
    pub iteration: usize,
    pub objective: f64,
}

fn worker_pool() -> rayon::ThreadPool {
    let n = std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .unwrap_or(0);
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .expect("thread pool")
}

fn apply(
    param: SweepParam,
    value: f64,
    base: &SystemParams,
    settings: &BcdSettings,
) -> Result<(SystemParams, BcdSettings), HarnessError> {
    let mut p = base.clone();
    let mut s = settings.clone();
    match param {
        SweepParam::T => p.t = value,
        SweepParam::D => p = p.with_uniform_demand(value),
        SweepParam::M => p = p.with_square_surface(value as usize)?,
        SweepParam::K => p = p.with_users(value as usize),
        SweepParam::Iterations => s.max_outer = value as usize,
    }
    p.validate()?;
    Ok((p, s))
}

/// Topology and channels of `params` under its own seed.
pub fn scenario_channels(params: &SystemParams) -> ChannelSet {
    build_channel_set(params, &generate_topology(params), &SeededStreams::new(params.seed))
}

fn run_cell(spec: &SweepSpec, params: &SystemParams, settings: &BcdSettings, value: f64) -> Vec<SweepRow> {
    let channels = scenario_channels(params);
    let mean_d = params.d.iter().sum::<f64>() / params.d.len().max(1) as f64;
    spec.benchmarks
        .iter()
        .map(|&id| {
            let mut row = SweepRow {
                param: spec.param.to_string(),
                value,
                benchmark: id.name().to_string(),
                seed: params.seed,
                k: params.k,
                n: params.n,
                m: params.m(),
                t: params.t,
                d: mean_d,
                objective: None,
                capacity: None,
                iterations: 0,
                feasible: false,
                error: String::new(),
            };
            match spec.measure {
                Measure::Energy => match run_benchmark(id, params, &channels, settings) {
                    Ok(out) => {
                        row.objective = Some(out.objective);
                        row.iterations = out.iterations;
                        row.feasible = out.feasible;
                    }
                    Err(e) => row.error = e.to_string(),
                },
                Measure::Capacity => {
                    row.capacity = Some(capacity(id, params, &channels, settings));
                    row.feasible = true;
                }
            }
            row
        })
        .collect()
}

/// Runs every (value, seed, scheme) cell, in parallel across cells, and
/// returns rows ordered by value, then seed, then scheme. Failed cells are
/// kept as rows with an error message. Writes the rows when `spec.out` is set.
pub fn run_sweep(
    spec: &SweepSpec,
    base: &SystemParams,
    settings: &BcdSettings,
) -> Result<Vec<SweepRow>, HarnessError> {
    spec.validate()?;
    let mut cells = Vec::new();
    for &value in &spec.values {
        let (p, s) = apply(spec.param, value, base, settings)?;
        for &seed in &spec.seeds {
            let mut ps = p.clone();
            ps.seed = seed;
            cells.push((value, ps, s.clone()));
        }
    }
    let rows: Vec<SweepRow> = worker_pool().install(|| {
        cells
            .par_iter()
            .map(|(value, p, s)| run_cell(spec, p, s, *value))
            .collect::<Vec<_>>()
            .into_iter()
            .flatten()
            .collect()
    });
    if let Some(path) = &spec.out {
        emit_csv(&rows, path)?;
    }
    Ok(rows)
}

/// Groups rows by (value, scheme) in first-appearance order.
pub fn summarize(rows: &[SweepRow]) -> Vec<SummaryRow> {
    let mut out: Vec<(SummaryRow, Vec<f64>)> = Vec::new();
    for r in rows {
        let idx = match out
            .iter()
            .position(|(s, _)| s.value == r.value && s.benchmark == r.benchmark)
        {
            Some(i) => i,
            None => {
                out.push((
                    SummaryRow {
                        param: r.param.clone(),
                        value: r.value,
                        benchmark: r.benchmark.clone(),
                        mean: f64::NAN,
                        std: f64::NAN,
                        count: 0,
                        failures: 0,
                    },
                    Vec::new(),
                ));
                out.len() - 1
            }
        };
        match r.metric().filter(|_| r.feasible) {
            Some(v) => out[idx].1.push(v),
            None => out[idx].0.failures += 1,
        }
    }
    out.into_iter()
        .map(|(mut s, xs)| {
            let n = xs.len();
            s.count = n;
            if n > 0 {
                s.mean = xs.iter().sum::<f64>() / n as f64;
                s.std = if n > 1 {
                    (xs.iter().map(|x| (x - s.mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
                } else {
                    0.0
                };
            }
            s
        })
        .collect()
}

/// Objective after every outer iteration of the proposed scheme, with the
/// initial point as iteration 0, for each surface size and seed.
pub fn convergence_trace(
    params: &SystemParams,
    seeds: &[u64],
    m_list: &[usize],
    settings: &BcdSettings,
) -> Result<Vec<TraceRow>, HarnessError> {
    let mut cells = Vec::new();
    for &m in m_list {
        let p = params.with_square_surface(m)?;
        for &seed in seeds {
            let mut ps = p.clone();
            ps.seed = seed;
            cells.push(ps);
        }
    }
    let settings = BenchmarkId::Proposed.settings(settings);
    let traces: Vec<Result<Vec<TraceRow>, HarnessError>> = worker_pool().install(|| {
        cells
            .par_iter()
            .map(|p| {
                let (_, state) = run_bcd(p, &scenario_channels(p), &settings)?;
                let m = p.m();
                Ok(std::iter::once(state.initial_objective)
                    .chain(state.trace.iter().copied())
                    .enumerate()
                    .map(|(iteration, objective)| TraceRow {
                        m,
                        seed: p.seed,
                        iteration,
                        objective,
                    })
                    .collect())
            })
            .collect()
    });
    let mut rows = Vec::new();
    for t in traces {
        rows.extend(t?);
    }
    Ok(rows)
}
