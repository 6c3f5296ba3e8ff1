//! Comparison schemes. Every scheme except the all-local one reuses the block
//! coordinate descent with some features switched off, so differences in the
//! results come from the scheme rather than the code path.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::channel::ChannelSet;
use crate::scenario::{SeededStreams, SystemParams};
use crate::solvers::init::random_phases;
use crate::solvers::{capacity_search, run_bcd, BcdSettings, BcdState, PhaseMode, Scheme, SolverError};
use crate::sysmodel::{check_feasibility, total_objective, Allocation};

/// Relative tolerance of the feasibility flag in result rows.
pub const FEASIBILITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum BenchmarkId {
    LocalOnly,
    CompCollab,
    CommCollab,
    RandomPhase,
    SdrPhase,
    ThreeStage,
    UpperBound,
    Proposed,
}

impl BenchmarkId {
    pub const ALL: [BenchmarkId; 8] = [
        Self::LocalOnly,
        Self::CompCollab,
        Self::CommCollab,
        Self::RandomPhase,
        Self::SdrPhase,
        Self::ThreeStage,
        Self::UpperBound,
        Self::Proposed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::LocalOnly => "local-only",
            Self::CompCollab => "comp-collab",
            Self::CommCollab => "comm-collab",
            Self::RandomPhase => "random-phase",
            Self::SdrPhase => "sdr-phase",
            Self::ThreeStage => "three-stage",
            Self::UpperBound => "upper-bound",
            Self::Proposed => "proposed",
        }
    }

    /// Feature switches of the scheme.
    pub fn scheme(self) -> Scheme {
        let p = Scheme::PROPOSED;
        match self {
            Self::LocalOnly => Scheme {
                relay_compute: false,
                mec: false,
                ..p
            },
            Self::CompCollab => Scheme { mec: false, ..p },
            Self::CommCollab => Scheme {
                relay_compute: false,
                ..p
            },
            Self::RandomPhase => Scheme {
                phase: PhaseMode::Fixed,
                ..p
            },
            Self::SdrPhase => Scheme {
                phase: PhaseMode::Sdr,
                ..p
            },
            Self::UpperBound => Scheme { round: false, ..p },
            Self::ThreeStage | Self::Proposed => p,
        }
    }

    /// `base` with the scheme and, for the single-pass scheme, the outer
    /// iteration count replaced.
    pub fn settings(self, base: &BcdSettings) -> BcdSettings {
        let mut s = base.clone();
        s.scheme = self.scheme();
        if self == Self::ThreeStage {
            s.max_outer = 1;
        }
        s
    }
}

impl fmt::Display for BenchmarkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown benchmark `{0}`")]
pub struct UnknownBenchmark(pub String);

impl FromStr for BenchmarkId {
    type Err = UnknownBenchmark;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        Self::ALL
            .into_iter()
            .find(|id| id.name() == key)
            .ok_or_else(|| UnknownBenchmark(s.to_string()))
    }
}

#[derive(Debug, Clone)]
pub struct BenchmarkOutcome {
    pub id: BenchmarkId,
    pub alloc: Allocation,
    pub objective: f64,
    pub iterations: usize,
    pub feasible: bool,
    /// Descent history; absent for the all-local scheme.
    pub state: Option<BcdState>,
}

impl BenchmarkOutcome {
    pub fn row(&self, params: &SystemParams) -> ResultRow {
        ResultRow {
            benchmark: self.id.name().to_string(),
            seed: params.seed,
            k: params.k,
            n: params.n,
            m: params.m(),
            t: params.t,
            d: params.d.iter().sum::<f64>() / params.d.len().max(1) as f64,
            objective: self.objective,
            iterations: self.iterations,
            feasible: self.feasible,
        }
    }
}

/// One line of a results file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
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
    pub objective: f64,
    pub iterations: usize,
    pub feasible: bool,
}

/// All bits computed on the devices over the whole frame.
pub fn run_local_only(params: &SystemParams) -> Result<(Allocation, f64), SolverError> {
    let cap = params.local_capacity();
    if let Some((user, &d)) = params.d.iter().enumerate().find(|(_, &d)| d > cap) {
        return Err(SolverError::ScenarioInfeasible {
            user,
            missing: d - cap,
        });
    }
    let s = random_phases(params.m(), &SeededStreams::new(params.seed));
    let alloc = Allocation::all_local(params, s);
    let obj = total_objective(&alloc, params);
    Ok((alloc, obj))
}

fn run_scheme(
    id: BenchmarkId,
    params: &SystemParams,
    channels: &ChannelSet,
    base: &BcdSettings,
) -> Result<BenchmarkOutcome, SolverError> {
    let (alloc, state) = run_bcd(params, channels, &id.settings(base))?;
    Ok(BenchmarkOutcome {
        id,
        objective: total_objective(&alloc, params),
        feasible: check_feasibility(&alloc, params, channels, FEASIBILITY_TOL).feasible,
        iterations: state.iteration,
        alloc,
        state: Some(state),
    })
}

/// Relay computing only; nothing reaches the edge server.
pub fn run_comp_collab(
    params: &SystemParams,
    channels: &ChannelSet,
    base: &BcdSettings,
) -> Result<BenchmarkOutcome, SolverError> {
    run_scheme(BenchmarkId::CompCollab, params, channels, base)
}

/// The relay forwards to the edge server but computes nothing.
pub fn run_comm_collab(
    params: &SystemParams,
    channels: &ChannelSet,
    base: &BcdSettings,
) -> Result<BenchmarkOutcome, SolverError> {
    run_scheme(BenchmarkId::CommCollab, params, channels, base)
}

/// Coefficients stay at the seeded random unit-modulus phases.
pub fn run_random_phase(
    params: &SystemParams,
    channels: &ChannelSet,
    base: &BcdSettings,
) -> Result<BenchmarkOutcome, SolverError> {
    run_scheme(BenchmarkId::RandomPhase, params, channels, base)
}

/// Coefficients from the relaxed SDP and Gaussian randomization.
pub fn run_sdr_phase(
    params: &SystemParams,
    channels: &ChannelSet,
    base: &BcdSettings,
) -> Result<BenchmarkOutcome, SolverError> {
    run_scheme(BenchmarkId::SdrPhase, params, channels, base)
}

/// One pass over the three blocks.
pub fn run_three_stage(
    params: &SystemParams,
    channels: &ChannelSet,
    base: &BcdSettings,
) -> Result<BenchmarkOutcome, SolverError> {
    run_scheme(BenchmarkId::ThreeStage, params, channels, base)
}

/// Full descent with fractional subcarrier shares kept.
pub fn run_upper_bound(
    params: &SystemParams,
    channels: &ChannelSet,
    base: &BcdSettings,
) -> Result<BenchmarkOutcome, SolverError> {
    run_scheme(BenchmarkId::UpperBound, params, channels, base)
}

/// Runs any scheme by id.
pub fn run_benchmark(
    id: BenchmarkId,
    params: &SystemParams,
    channels: &ChannelSet,
    base: &BcdSettings,
) -> Result<BenchmarkOutcome, SolverError> {
    if id == BenchmarkId::LocalOnly {
        let (alloc, objective) = run_local_only(params)?;
        return Ok(BenchmarkOutcome {
            id,
            feasible: check_feasibility(&alloc, params, channels, FEASIBILITY_TOL).feasible,
            alloc,
            objective,
            iterations: 0,
            state: None,
        });
    }
    run_scheme(id, params, channels, base)
}

/// Largest uniform per-user demand the scheme handles within the frame.
pub fn capacity(id: BenchmarkId, params: &SystemParams, channels: &ChannelSet, base: &BcdSettings) -> f64 {
    capacity_search(params, channels, &id.settings(base))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::build_channel_set;
    use crate::scenario::{default_paper_params, generate_topology};

    fn setup(params: &SystemParams) -> ChannelSet {
        build_channel_set(params, &generate_topology(params), &SeededStreams::new(params.seed))
    }

    #[test]
    fn ids_round_trip_through_names() {
        for id in BenchmarkId::ALL {
            assert_eq!(id.name().parse::<BenchmarkId>().unwrap(), id);
        }
        assert_eq!("Upper_Bound".parse::<BenchmarkId>().unwrap(), BenchmarkId::UpperBound);
        assert!("magic".parse::<BenchmarkId>().is_err());
    }

    #[test]
    fn local_only_golden_and_limits() {
        let params = default_paper_params().with_uniform_demand(1e5);
        let (alloc, obj) = run_local_only(&params).unwrap();
        // alpha_t (c_t D)^3 / T^2 per user, five users.
        let per_user = 1e-27 * (1e3 * 1e5f64).powi(3) / 1.0;
        assert!((obj - 5.0 * per_user).abs() <= 1e-15);
        assert!(alloc.p1.iter().chain(alloc.p2.iter()).all(|&p| p == 0.0));
        assert_eq!(run_local_only(&params.with_uniform_demand(0.0)).unwrap().1, 0.0);
        let mut slower = params.clone();
        slower.t = 2.0;
        assert!(run_local_only(&slower).unwrap().1 < obj);
        assert!(run_local_only(&params.with_uniform_demand(3e6)).is_err());
    }

    #[test]
    fn restricted_schemes_zero_their_legs() {
        let params = default_paper_params();
        let ch = setup(&params);
        let base = BcdSettings {
            max_outer: 2,
            ..BcdSettings::default()
        };
        let comp = run_comp_collab(&params, &ch, &base).unwrap();
        assert!(comp.alloc.d_m.iter().all(|&d| d == 0.0));
        assert!(comp.feasible);
        let comm = run_comm_collab(&params, &ch, &base).unwrap();
        assert!(comm.alloc.d_r.iter().all(|&d| d == 0.0));
        assert!(comm.feasible);
        let rnd = run_random_phase(&params, &ch, &base).unwrap();
        assert!(rnd.alloc.s.iter().all(|x| (x.norm() - 1.0).abs() < 1e-12));
        let again = run_random_phase(&params, &ch, &base).unwrap();
        assert_eq!(rnd.objective, again.objective);
        let three = run_three_stage(&params, &ch, &base).unwrap();
        assert_eq!(three.state.unwrap().trace.len(), 1);
    }

    #[test]
    fn comp_collab_without_relay_falls_back_to_local() {
        let params = default_paper_params().with_uniform_demand(5e5);
        let ch = setup(&params).with_relay_zeroed();
        let out = run_comp_collab(&params, &ch, &BcdSettings::default()).unwrap();
        let (_, local) = run_local_only(&params).unwrap();
        assert!((out.objective - local).abs() <= 1e-9 * local);
    }

    #[test]
    fn local_only_capacity_is_exact() {
        let params = default_paper_params();
        let ch = setup(&params);
        let cap = capacity(BenchmarkId::LocalOnly, &params, &ch, &BcdSettings::default());
        assert_eq!(cap, params.t * params.f_t_max / params.c_t);
    }
}
