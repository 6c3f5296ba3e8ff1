//! Block coordinate descent over the three subproblems, with the
//! initialization, rounding and rank-one extraction steps around them.

pub mod bcd;
pub mod init;
pub mod p2;
pub mod p3;
pub mod p4;

use thiserror::Error;

use crate::convexcore::{rate_sdp::BarrierSettings, ConvexError, SolverSettings};
use crate::scenario::{ConfigError, KeyReader};

pub use bcd::{capacity_search, run_bcd, BcdState, BlockStatus, IterationRecord};
pub use init::init_point;
pub use p2::{repair_powers_after_rounding, round_and_repair, round_subcarriers, solve_p2, P2Solution};
pub use p3::{solve_p3_sca, P3Solution};
pub use p4::{extract_rank_one, solve_p4_dc, solve_p4_sdr, P4Solution};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("scenario infeasible: user {user} needs {missing:.3e} more bits than all resources allow")]
    ScenarioInfeasible { user: usize, missing: f64 },
    #[error("subproblem infeasible: {0}")]
    Infeasible(String),
    #[error("subproblem did not reach a usable point: {0}")]
    Numerical(String),
    #[error(transparent)]
    Convex(#[from] ConvexError),
}

/// How the transmissive coefficients are chosen in the third block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseMode {
    /// Penalized rank-one SDP solved by DC iterations.
    Dc,
    /// Relaxed SDP followed by Gaussian randomization.
    Sdr,
    /// Keep the initial coefficients.
    Fixed,
}

/// Feature switches that turn the full algorithm into its restricted
/// comparison schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Scheme {
    /// Bits may be computed at the relay.
    pub relay_compute: bool,
    /// Bits may be sent on to the edge server.
    pub mec: bool,
    pub phase: PhaseMode,
    /// Restore binary subcarrier assignments after the relaxed solve.
    pub round: bool,
}

impl Scheme {
    pub const PROPOSED: Scheme = Scheme {
        relay_compute: true,
        mec: true,
        phase: PhaseMode::Dc,
        round: true,
    };
}

impl Default for Scheme {
    fn default() -> Self {
        Self::PROPOSED
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BcdSettings {
    pub max_outer: usize,
    /// Fractional-decrease stopping threshold; `None` uses the scenario's.
    pub epsilon: Option<f64>,
    pub sca_max_iters: usize,
    pub sca_tol: f64,
    pub dc_max_iters: usize,
    /// Weight of the trace term in the DC objective.
    pub dc_trace_weight: f64,
    /// Fractions of the best achievable rate slack the DC iterations must
    /// keep, tried in order until one reaches a rank-one point. An empty
    /// list or a lone zero runs the plain penalty.
    pub dc_slack_floors: Vec<f64>,
    /// Rescale extracted coefficients so the largest magnitude is one.
    pub normalize_amplitude: bool,
    /// Keep shares relaxed until the last iteration.
    pub defer_rounding: bool,
    /// Extra power solves allowed when searching around the rounded
    /// subcarrier assignment.
    pub rounding_search: usize,
    pub sdr_candidates: usize,
    pub scheme: Scheme,
    pub solver: SolverSettings,
    pub barrier: BarrierSettings,
    /// Tolerance used when accepting a block update.
    pub accept_tol: f64,
}

impl Default for BcdSettings {
    fn default() -> Self {
        Self {
            max_outer: 50,
            epsilon: None,
            sca_max_iters: 30,
            sca_tol: 1e-6,
            dc_max_iters: 30,
            dc_trace_weight: 1e-2,
            dc_slack_floors: vec![0.9, 0.5, 0.0],
            normalize_amplitude: true,
            defer_rounding: false,
            rounding_search: 40,
            sdr_candidates: 200,
            scheme: Scheme::PROPOSED,
            solver: SolverSettings::default(),
            barrier: BarrierSettings::default(),
            accept_tol: 1e-7,
        }
    }
}

impl BcdSettings {
    /// Reads the optional settings keys of a scenario document; other keys
    /// are ignored.
    pub fn from_config(config_text: &str) -> Result<Self, ConfigError> {
        let table: toml::Table = config_text
            .parse()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.message().to_string()))?;
        let mut r = KeyReader::new(table);
        let mut s = Self::default();
        if let Some(v) = r.usize("max_outer")? {
            s.max_outer = v;
        }
        if let Some(v) = r.usize("sca_max_iters")? {
            s.sca_max_iters = v;
        }
        if let Some(v) = r.f64("sca_tol")? {
            s.sca_tol = v;
        }
        if let Some(v) = r.usize("dc_max_iters")? {
            s.dc_max_iters = v;
        }
        if let Some(v) = r.bool("defer_rounding")? {
            s.defer_rounding = v;
        }
        if s.max_outer == 0 {
            return Err(ConfigError::Invalid {
                key: "max_outer".into(),
                reason: "must be at least 1".into(),
            });
        }
        Ok(s)
    }
}
