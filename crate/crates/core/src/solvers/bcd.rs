//! Outer block coordinate descent loop and the computing-capacity search.

use std::fmt;
use std::io::Write;

use log::debug;

use super::{
    init_point, repair_powers_after_rounding, round_and_repair, solve_p2, solve_p3_sca, solve_p4_dc,
    solve_p4_sdr, BcdSettings, PhaseMode, SolverError,
};
use crate::channel::ChannelSet;
use crate::scenario::{SeededStreams, SystemParams};
use crate::sysmodel::{check_feasibility, total_objective, Allocation};

/// Slack on the objective when deciding whether a block made things worse, J.
const OBJECTIVE_SLACK: f64 = 1e-9;
/// Relative bisection width of the capacity search.
const CAPACITY_REL_TOL: f64 = 1e-2;
/// The capacity search gives up doubling past this multiple of the local capacity.
const CAPACITY_MAX_FACTOR: f64 = 1e3;

/// What happened to a block update in one outer iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockStatus {
    Accepted,
    /// Solved, but the result was infeasible or raised the objective.
    Rejected,
    /// The subproblem solver returned an error.
    Failed,
    /// Not run under this scheme.
    Skipped,
}

impl fmt::Display for BlockStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Accepted => "accepted",
            Self::Rejected => "rejected",
            Self::Failed => "failed",
            Self::Skipped => "skipped",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub objective: f64,
    pub p2: BlockStatus,
    pub p3: BlockStatus,
    pub p4: BlockStatus,
    /// Rank gap of the last lifted coefficient matrix, if one was solved.
    pub rank_gap: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct BcdState {
    pub alloc: Allocation,
    /// Completed outer iterations.
    pub iteration: usize,
    pub initial_objective: f64,
    /// Objective after each outer iteration.
    pub trace: Vec<f64>,
    pub records: Vec<IterationRecord>,
    /// The fractional-decrease test fired before the iteration cap.
    pub converged: bool,
}

impl BcdState {
    /// Writes `iteration,objective,p2,p3,p4,rank_gap`, with the initial point
    /// as iteration 0.
    pub fn write_trace_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iteration", "objective", "p2", "p3", "p4", "rank_gap"])?;
        w.write_record(["0", &format!("{:.12e}", self.initial_objective), "", "", "", ""])?;
        for r in &self.records {
            w.write_record([
                r.iteration.to_string(),
                format!("{:.12e}", r.objective),
                r.p2.to_string(),
                r.p3.to_string(),
                r.p4.to_string(),
                r.rank_gap.map(|g| format!("{g:.3e}")).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

struct Acceptor<'a> {
    params: &'a SystemParams,
    channels: &'a ChannelSet,
    tol: f64,
}

impl Acceptor<'_> {
    /// Objective of `cand` when it is feasible and no worse than `obj`.
    fn judge(&self, cand: &Allocation, obj: f64) -> Option<f64> {
        if !check_feasibility(cand, self.params, self.channels, self.tol).feasible {
            return None;
        }
        let value = total_objective(cand, self.params);
        (value <= obj + OBJECTIVE_SLACK).then_some(value)
    }

    fn apply(&self, result: Result<Allocation, SolverError>, alloc: &mut Allocation, obj: &mut f64) -> BlockStatus {
        match result {
            Ok(cand) => match self.judge(&cand, *obj) {
                Some(value) => {
                    *alloc = cand;
                    *obj = value;
                    BlockStatus::Accepted
                }
                None => BlockStatus::Rejected,
            },
            Err(e) => {
                debug!("block failed: {e}");
                BlockStatus::Failed
            }
        }
    }
}

/// Relaxed solve, rounding with its assignment search, and power repair.
/// Falls back to re-solving the
/// powers on the current binary assignment when the rounded one is
/// infeasible or worse.
fn subcarrier_block(
    params: &SystemParams,
    channels: &ChannelSet,
    alloc: &Allocation,
    obj: f64,
    round: bool,
    settings: &BcdSettings,
    acc: &Acceptor<'_>,
) -> Result<Allocation, SolverError> {
    let relaxed = solve_p2(params, channels, alloc, &settings.solver)?;
    if !round {
        return Ok(relaxed.alloc);
    }
    let primary = round_and_repair(params, channels, &relaxed.alloc, settings.rounding_search, &settings.solver);
    if let Ok(sol) = &primary {
        if acc.judge(&sol.alloc, obj).is_some() {
            return primary.map(|s| s.alloc);
        }
    }
    if alloc.is_binary() {
        if let Ok(sol) = repair_powers_after_rounding(params, channels, alloc, &settings.solver) {
            return Ok(sol.alloc);
        }
    }
    primary.map(|s| s.alloc)
}

/// Runs block coordinate descent from the constructive initial point.
pub fn run_bcd(
    params: &SystemParams,
    channels: &ChannelSet,
    settings: &BcdSettings,
) -> Result<(Allocation, BcdState), SolverError> {
    let streams = SeededStreams::new(params.seed);
    let scheme = settings.scheme;
    let init = init_point(params, channels, &scheme, &streams)?;
    let initial_objective = total_objective(&init, params);
    let mut state = BcdState {
        alloc: init,
        iteration: 0,
        initial_objective,
        trace: Vec::new(),
        records: Vec::new(),
        converged: false,
    };
    if !scheme.relay_compute && !scheme.mec {
        state.trace.push(initial_objective);
        state.converged = true;
        return Ok((state.alloc.clone(), state));
    }
    let acc = Acceptor {
        params,
        channels,
        tol: settings.accept_tol,
    };
    let epsilon = settings.epsilon.unwrap_or(params.epsilon);
    let round_each = scheme.round && !settings.defer_rounding;
    let mut best_binary = state.alloc.clone();
    let mut alloc = state.alloc.clone();
    let mut obj = initial_objective;
    for it in 1..=settings.max_outer {
        let prev = obj;
        let p2 = subcarrier_block(params, channels, &alloc, obj, round_each, settings, &acc);
        let p2 = acc.apply(p2, &mut alloc, &mut obj);

        let p3 = solve_p3_sca(
            params,
            channels,
            &alloc,
            &scheme,
            settings.sca_max_iters,
            settings.sca_tol,
            &settings.solver,
        )
        .map(|s| s.alloc);
        let p3 = acc.apply(p3, &mut alloc, &mut obj);

        let mut rank = None;
        let p4 = if scheme.mec && scheme.phase != PhaseMode::Fixed {
            let sol = match scheme.phase {
                PhaseMode::Dc => solve_p4_dc(params, channels, &alloc, settings),
                _ => solve_p4_sdr(params, channels, &alloc, settings, &streams, it as u64),
            };
            let cand = sol.map(|sol| {
                rank = sol.s_mat.as_ref().map(|_| sol.rank_gap);
                let mut next = alloc.clone();
                next.s_mat = sol.s_mat;
                next.s = sol.s;
                next
            });
            acc.apply(cand, &mut alloc, &mut obj)
        } else {
            BlockStatus::Skipped
        };

        if alloc.is_binary() {
            best_binary = alloc.clone();
        }
        state.iteration = it;
        state.trace.push(obj);
        state.records.push(IterationRecord {
            iteration: it,
            objective: obj,
            p2,
            p3,
            p4,
            rank_gap: rank,
        });
        debug!("bcd iteration {it}: objective {obj:.6e} ({p2}/{p3}/{p4})");
        if (prev - obj) / prev.abs().max(f64::MIN_POSITIVE) <= epsilon {
            state.converged = true;
            break;
        }
    }
    if scheme.round && settings.defer_rounding && !alloc.is_binary() {
        alloc = match round_and_repair(params, channels, &alloc, settings.rounding_search, &settings.solver) {
            Ok(sol) if check_feasibility(&sol.alloc, params, channels, settings.accept_tol).feasible => sol.alloc,
            _ => best_binary,
        };
        obj = total_objective(&alloc, params);
        if let Some(last) = state.trace.last_mut() {
            *last = obj;
        }
    }
    state.alloc = alloc.clone();
    Ok((alloc, state))
}

/// Largest uniform per-user demand that the scheme can finish within the
/// frame, found by doubling and then bisection from the local capacity.
pub fn capacity_search(params: &SystemParams, channels: &ChannelSet, settings: &BcdSettings) -> f64 {
    let local = params.local_capacity();
    if !settings.scheme.relay_compute && !settings.scheme.mec {
        return local;
    }
    let feasible = |bits: f64| {
        let p = params.with_uniform_demand(bits);
        match run_bcd(&p, channels, settings) {
            Ok((alloc, _)) => check_feasibility(&alloc, &p, channels, 1e-6).feasible,
            Err(_) => false,
        }
    };
    let mut lo = local;
    let mut hi = 2.0 * local;
    while feasible(hi) {
        lo = hi;
        hi *= 2.0;
        if hi > CAPACITY_MAX_FACTOR * local {
            return lo;
        }
    }
    while hi - lo > CAPACITY_REL_TOL * lo {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}
