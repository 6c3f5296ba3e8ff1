//! Task-split and time-slot block, solved by successive convex
//! approximation of the two shared CPU budgets.

use super::p2::{MIN_SLOT, RATE_MARGIN};
use super::{Scheme, SolverError};
use crate::channel::ChannelSet;
use crate::convexcore::linearize::{taylor_ratio_coeffs, taylor_ratio_mec_coeffs};
use crate::convexcore::{
    add_cubic_over_square_epigraph, solve, ConicProgram, LinExpr, SolveStatus, SolverSettings,
    VarId,
};
use crate::scenario::SystemParams;
use crate::sysmodel::{cn_cpu_load, mec_cpu_load, total_objective, user_rates, Allocation};

const TIGHTEN: f64 = 0.95;
const MAX_REPAIRS: usize = 5;
/// Relative slack allowed on the original CPU budgets after a solve.
const CAP_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct P3Solution {
    pub alloc: Allocation,
    pub objective: f64,
    /// Objective after each accepted inner iteration, starting with the
    /// objective at the expansion point.
    pub inner_objectives: Vec<f64>,
    /// Number of budget tightenings applied over all inner iterations.
    pub repairs: usize,
}

struct Vars {
    dr: VarId,
    dm: VarId,
    tau: [VarId; 4],
}

/// One convexified program at the expansion point `at`, with the linearized
/// budgets scaled by `(factor_r, factor_m)`.
fn solve_inner(
    params: &SystemParams,
    at: &Allocation,
    rates: &(Vec<f64>, Vec<f64>, Vec<f64>),
    scheme: &Scheme,
    factors: (f64, f64),
    settings: &SolverSettings,
) -> Result<Allocation, SolverError> {
    let k_count = params.k;
    let t_total = params.t;
    let bs = params.d.iter().copied().fold(1.0, f64::max);
    let (r1, r2, r3) = rates;
    let mut prog = ConicProgram::new();
    let mut objective = LinExpr::default();
    let mut relay_cap = LinExpr::default();
    let mut mec_cap = LinExpr::default();
    let mut vars = Vec::with_capacity(k_count);
    for k in 0..k_count {
        let dl = prog.nonneg(format!("dl[{k}]"));
        let v = Vars {
            dr: prog.nonneg(format!("dr[{k}]")),
            dm: prog.nonneg(format!("dm[{k}]")),
            tau: [0, 1, 2, 3].map(|j| prog.nonneg(format!("tau{}[{k}]", j + 1))),
        };
        let demand = params.d[k] / bs;
        prog.add_eq(LinExpr::var(dl) + v.dr.into() + v.dm.into(), demand.into());
        let mut budget = LinExpr::default();
        for &t in &v.tau {
            budget.add_term(t, 1.0);
        }
        prog.add_le(budget, 1.0.into());
        let m = 1.0 + RATE_MARGIN;
        prog.add_le(LinExpr::term(v.dr, m), LinExpr::term(v.tau[0], t_total * r1[k] / bs));
        prog.add_le(LinExpr::term(v.dm, m), LinExpr::term(v.tau[1], t_total * r2[k] / bs));
        prog.add_le(LinExpr::term(v.dm, m), LinExpr::term(v.tau[2], t_total * r3[k] / bs));
        prog.add_le(dl.into(), (params.local_capacity() / bs).into());
        if !scheme.relay_compute {
            prog.add_bound(v.dr, 0.0, 0.0);
            prog.add_bound(v.tau[0], 0.0, 0.0);
        }
        if !scheme.mec {
            prog.add_bound(v.dm, 0.0, 0.0);
            for j in 1..4 {
                prog.add_bound(v.tau[j], 0.0, 0.0);
            }
        }

        // Transmit power per slot is fixed in this block.
        let mut slot_power = [0.0; 3];
        for n in 0..params.n {
            slot_power[0] += at.a[(k, n)] * at.p1[(k, n)];
            slot_power[1] += at.a[(k, n)] * at.p2[(k, n)];
            slot_power[2] += at.b[(k, n)] * at.p3[(k, n)];
        }
        for j in 0..3 {
            objective.add_term(v.tau[j], slot_power[j] * t_total);
        }
        let ul = prog.free(format!("ul[{k}]"));
        let ur = prog.free(format!("ur[{k}]"));
        add_cubic_over_square_epigraph(
            &mut prog,
            ul,
            params.alpha_t * (params.c_t * bs).powi(3),
            dl.into(),
            t_total.into(),
        )?;
        add_cubic_over_square_epigraph(
            &mut prog,
            ur,
            params.alpha_r * (params.c_r * bs).powi(3),
            v.dr.into(),
            LinExpr::constant(t_total) - LinExpr::term(v.tau[0], t_total),
        )?;
        objective.add_term(ul, 1.0);
        objective.add_term(ur, 1.0);

        if scheme.relay_compute {
            let (cd, ct, c0) = taylor_ratio_coeffs(at.d_r[k], at.t1[k], params.c_r, t_total);
            relay_cap.add_term(v.dr, cd * bs / params.f_r_max);
            relay_cap.add_term(v.tau[0], ct * t_total / params.f_r_max);
            relay_cap.constant += c0 / params.f_r_max;
        }
        if scheme.mec {
            let t0 = at.t4[k].max(1e-6 * t_total);
            let (cd, ct, c0) = taylor_ratio_mec_coeffs(at.d_m[k], t0, params.c_m);
            mec_cap.add_term(v.dm, cd * bs / params.f_m_max);
            mec_cap.add_term(v.tau[3], ct * t_total / params.f_m_max);
            mec_cap.constant += c0 / params.f_m_max;
        }
        vars.push(v);
    }
    if scheme.relay_compute {
        prog.add_le(relay_cap, factors.0.into());
    }
    if scheme.mec {
        prog.add_le(mec_cap, factors.1.into());
    }
    prog.minimize(objective);

    let sol = solve(&prog, settings)?;
    match sol.status {
        SolveStatus::Optimal | SolveStatus::NumericalLimit => {}
        SolveStatus::Infeasible => return Err(SolverError::Infeasible("task split program".into())),
        SolveStatus::Unbounded => {
            return Err(SolverError::Numerical("task split program unbounded".into()))
        }
    }
    let mut out = at.clone();
    for (k, v) in vars.iter().enumerate() {
        let t: Vec<f64> = v
            .tau
            .iter()
            .map(|&x| {
                let t = sol.value(x).clamp(0.0, 1.0) * t_total;
                if t < MIN_SLOT {
                    0.0
                } else {
                    t
                }
            })
            .collect();
        // Keep the time budget exact despite solver round-off.
        let sum: f64 = t.iter().sum();
        let shrink = if sum > t_total { t_total / sum } else { 1.0 };
        out.t1[k] = t[0] * shrink;
        out.t2[k] = t[1] * shrink;
        out.t3[k] = t[2] * shrink;
        out.t4[k] = t[3] * shrink;
        let mut dr = (sol.value(v.dr) * bs).max(0.0);
        let mut dm = (sol.value(v.dm) * bs).max(0.0);
        if out.t1[k] == 0.0 {
            dr = 0.0;
        }
        if out.t2[k] == 0.0 || out.t3[k] == 0.0 {
            dm = 0.0;
        }
        // Rates are linear here, so shrinking the slots may only cost the
        // bits the margin already covers; clip to what the slots carry.
        dr = dr.min(out.t1[k] * r1[k]);
        dm = dm.min(out.t2[k] * r2[k]).min(out.t3[k] * r3[k]);
        out.d_r[k] = dr;
        out.d_m[k] = dm;
        out.d_l[k] = (params.d[k] - dr - dm).max(0.0);
    }
    Ok(out)
}

/// Successive convex approximation of the task split and slot lengths with
/// subcarriers, powers and coefficients held fixed.
pub fn solve_p3_sca(
    params: &SystemParams,
    channels: &ChannelSet,
    alloc: &Allocation,
    scheme: &Scheme,
    max_iters: usize,
    tol: f64,
    settings: &SolverSettings,
) -> Result<P3Solution, SolverError> {
    let rates = user_rates(params, channels, alloc);
    let mut current = alloc.clone();
    if scheme.mec {
        for k in 0..params.k {
            current.t4[k] = (params.t - current.t1[k] - current.t2[k] - current.t3[k]).max(0.0);
        }
    }
    let mut obj = total_objective(&current, params);
    let mut inner = vec![obj];
    let mut repairs = 0;
    for it in 0..max_iters {
        let mut factors = (1.0, 1.0);
        let mut accepted = None;
        let mut last_err = None;
        for _ in 0..=MAX_REPAIRS {
            match solve_inner(params, &current, &rates, scheme, factors, settings) {
                Ok(cand) => {
                    let relay_ok = cn_cpu_load(params, &cand.d_r, &cand.t1)
                        <= params.f_r_max * (1.0 + CAP_TOL);
                    let mec_ok = mec_cpu_load(params, &cand.d_m, &cand.t4)
                        <= params.f_m_max * (1.0 + CAP_TOL);
                    if relay_ok && mec_ok {
                        accepted = Some(cand);
                        break;
                    }
                    repairs += 1;
                    if !relay_ok {
                        factors.0 *= TIGHTEN;
                    }
                    if !mec_ok {
                        factors.1 *= TIGHTEN;
                    }
                }
                Err(e) => {
                    last_err = Some(e);
                    break;
                }
            }
        }
        let Some(cand) = accepted else {
            if it == 0 {
                return Err(last_err.unwrap_or_else(|| {
                    SolverError::Infeasible("CPU budgets still violated after tightening".into())
                }));
            }
            break;
        };
        let cand_obj = total_objective(&cand, params);
        if !(cand_obj <= obj + 1e-12 * obj.abs().max(1.0)) {
            break;
        }
        let decrease = (obj - cand_obj) / obj.abs().max(1e-300);
        current = cand;
        obj = cand_obj;
        inner.push(obj);
        if decrease <= tol {
            break;
        }
    }
    Ok(P3Solution {
        alloc: current,
        objective: obj,
        inner_objectives: inner,
        repairs,
    })
}
