//! Subcarrier and power block: relaxed joint program, rounding, and the
//! power-only repair after rounding.

use nalgebra::DMatrix;

use super::SolverError;
use crate::channel::ChannelSet;
use crate::convexcore::epigraph::RateMode;
use crate::convexcore::{
    add_perspective_rate_constraint, solve, ConicProgram, LinExpr, RateTerm, SolveStatus,
    SolverSettings, VarId,
};
use crate::scenario::SystemParams;
use crate::sysmodel::{offload_energy, total_objective, Allocation};

/// Rate targets are inflated by this factor so the solver's own tolerance
/// does not leave the rate constraints marginally violated.
pub(crate) const RATE_MARGIN: f64 = 1e-7;
/// Slots shorter than this carry no bits.
pub(crate) const MIN_SLOT: f64 = 1e-9;
const SHARE_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct P2Solution {
    pub alloc: Allocation,
    /// Total transmit energy of the solution, J.
    pub transmit_energy: f64,
    /// Full objective with the computing terms added back, J.
    pub objective: f64,
    pub status: SolveStatus,
    pub iterations: u32,
}

#[derive(Clone, Copy)]
enum Share {
    Var(VarId),
    Fixed(f64),
}

impl Share {
    fn expr(self) -> LinExpr {
        match self {
            Share::Var(v) => v.into(),
            Share::Fixed(x) => x.into(),
        }
    }
}

/// One offloading leg of one user: `bits <= time * sum_n rate_n`.
struct Leg {
    bits: f64,
    time: f64,
    /// `(n, share, q, snr gain)` where `q = gain * share * power`.
    terms: Vec<(usize, Share, VarId, f64)>,
}

fn solve_program(
    params: &SystemParams,
    channels: &ChannelSet,
    alloc: &Allocation,
    fixed: bool,
    settings: &SolverSettings,
) -> Result<P2Solution, SolverError> {
    let (k_count, n_count) = (params.k, params.n);
    let bit_scale = params.d.iter().copied().fold(1.0, f64::max);
    let g1 = DMatrix::from_fn(k_count, n_count, |k, n| channels.relay_gain2(k, n) / params.sigma2);
    let g3: Vec<f64> = (0..n_count)
        .map(|n| channels.cascade_gain2(n, &alloc.s) / params.delta2)
        .collect();

    let mut prog = ConicProgram::new();
    let uses_a: Vec<bool> = (0..k_count).map(|k| alloc.d_r[k] > 0.0 || alloc.d_m[k] > 0.0).collect();
    let uses_b: Vec<bool> = (0..k_count).map(|k| alloc.d_m[k] > 0.0).collect();
    let mut share_a = vec![vec![Share::Fixed(0.0); n_count]; k_count];
    let mut share_b = vec![vec![Share::Fixed(0.0); n_count]; k_count];
    for n in 0..n_count {
        let mut col_a = LinExpr::default();
        let mut col_b = LinExpr::default();
        for k in 0..k_count {
            if uses_a[k] && g1[(k, n)] > 0.0 {
                share_a[k][n] = if fixed {
                    Share::Fixed(alloc.a[(k, n)])
                } else {
                    let v = prog.nonneg(format!("a[{k},{n}]"));
                    col_a.add_term(v, 1.0);
                    Share::Var(v)
                };
            }
            if uses_b[k] && g3[n] > 0.0 {
                share_b[k][n] = if fixed {
                    Share::Fixed(alloc.b[(k, n)])
                } else {
                    let v = prog.nonneg(format!("b[{k},{n}]"));
                    col_b.add_term(v, 1.0);
                    Share::Var(v)
                };
            }
        }
        if !col_a.terms.is_empty() {
            prog.add_le(col_a, 1.0.into());
        }
        if !col_b.terms.is_empty() {
            prog.add_le(col_b, 1.0.into());
        }
    }

    let active = |s: Share| match s {
        Share::Var(_) => true,
        Share::Fixed(x) => x > 0.0,
    };
    let mut legs: Vec<(usize, usize, Leg)> = Vec::new();
    for k in 0..k_count {
        let specs = [
            (1, alloc.d_r[k], alloc.t1[k]),
            (2, alloc.d_m[k], alloc.t2[k]),
            (3, alloc.d_m[k], alloc.t3[k]),
        ];
        for (slot, bits, time) in specs {
            if bits <= 0.0 {
                continue;
            }
            if time < MIN_SLOT {
                return Err(SolverError::Infeasible(format!(
                    "user {k} slot {slot} carries {bits:.3e} bits in {time:.3e} s"
                )));
            }
            let mut terms = Vec::new();
            for n in 0..n_count {
                let (share, gain) = if slot == 3 {
                    (share_b[k][n], g3[n])
                } else {
                    (share_a[k][n], g1[(k, n)])
                };
                if gain > 0.0 && active(share) {
                    let q = prog.nonneg(format!("q{slot}[{k},{n}]"));
                    terms.push((n, share, q, gain));
                }
            }
            if terms.is_empty() {
                return Err(SolverError::Infeasible(format!(
                    "user {k} slot {slot} has no usable subcarrier"
                )));
            }
            legs.push((k, slot, Leg { bits, time, terms }));
        }
    }

    // Power budgets and objective.
    let mut objective = LinExpr::default();
    let mut relay_power = LinExpr::default();
    let mut user_power = vec![[LinExpr::default(), LinExpr::default()]; k_count];
    for (k, slot, leg) in &legs {
        for &(_, _, q, gain) in &leg.terms {
            objective.add_term(q, leg.time / gain);
            match slot {
                1 => user_power[*k][0].add_term(q, 1.0 / gain),
                2 => user_power[*k][1].add_term(q, 1.0 / gain),
                _ => relay_power.add_term(q, 1.0 / gain),
            };
        }
    }
    for caps in user_power {
        for e in caps {
            if !e.terms.is_empty() {
                prog.add_le(e, params.p_t_max.into());
            }
        }
    }
    if !relay_power.terms.is_empty() {
        prog.add_le(relay_power, params.p_r_max.into());
    }
    for (_, _, leg) in &legs {
        let terms = leg
            .terms
            .iter()
            .map(|&(_, share, q, _)| RateTerm {
                share: share.expr(),
                power: q.into(),
                gain: 1.0,
            })
            .collect();
        add_perspective_rate_constraint(
            &mut prog,
            (leg.bits * (1.0 + RATE_MARGIN) / bit_scale).into(),
            leg.time.into(),
            params.w / bit_scale,
            RateMode::Conic(terms),
        )?;
    }
    let reference = offload_energy(alloc).iter().sum::<f64>().max(1e-6);
    prog.minimize(objective * (1.0 / reference));

    let mut out = alloc.clone();
    out.p1.fill(0.0);
    out.p2.fill(0.0);
    out.p3.fill(0.0);
    let (status, iterations) = if legs.is_empty() {
        (SolveStatus::Optimal, 0)
    } else {
        let sol = solve(&prog, settings)?;
        match sol.status {
            SolveStatus::Optimal | SolveStatus::NumericalLimit => {}
            SolveStatus::Infeasible => {
                return Err(SolverError::Infeasible("power/subcarrier program".into()))
            }
            SolveStatus::Unbounded => {
                return Err(SolverError::Numerical("power/subcarrier program unbounded".into()))
            }
        }
        let read = |s: Share| -> f64 {
            match s {
                Share::Var(v) => {
                    let x = sol.value(v).clamp(0.0, 1.0);
                    if x < SHARE_FLOOR {
                        0.0
                    } else {
                        x
                    }
                }
                Share::Fixed(x) => x,
            }
        };
        if !fixed {
            for k in 0..k_count {
                for n in 0..n_count {
                    out.a[(k, n)] = read(share_a[k][n]);
                    out.b[(k, n)] = read(share_b[k][n]);
                }
            }
        }
        for (k, slot, leg) in &legs {
            for &(n, share, q, gain) in &leg.terms {
                let a = read(share);
                let p = if a > 0.0 {
                    sol.value(q).max(0.0) / (gain * a)
                } else {
                    0.0
                };
                match slot {
                    1 => out.p1[(*k, n)] = p,
                    2 => out.p2[(*k, n)] = p,
                    _ => out.p3[(*k, n)] = p,
                }
            }
        }
        (sol.status, sol.iterations)
    };
    let transmit_energy = offload_energy(&out).iter().sum();
    let objective = total_objective(&out, params);
    Ok(P2Solution {
        alloc: out,
        transmit_energy,
        objective,
        status,
        iterations,
    })
}

/// Relaxed joint subcarrier and power allocation with the task split, slots
/// and coefficients of `alloc` held fixed.
pub fn solve_p2(
    params: &SystemParams,
    channels: &ChannelSet,
    alloc: &Allocation,
    settings: &SolverSettings,
) -> Result<P2Solution, SolverError> {
    solve_program(params, channels, alloc, false, settings)
}

/// Assigns each subcarrier to its largest share, lowest user index on ties.
/// All-zero columns stay unassigned.
pub fn round_subcarriers(a: &DMatrix<f64>, b: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let round = |m: &DMatrix<f64>| {
        let mut out = DMatrix::zeros(m.nrows(), m.ncols());
        for n in 0..m.ncols() {
            let mut best: Option<usize> = None;
            for k in 0..m.nrows() {
                if m[(k, n)] > 0.0 && best.is_none_or(|b| m[(k, n)] > m[(b, n)]) {
                    best = Some(k);
                }
            }
            if let Some(k) = best {
                out[(k, n)] = 1.0;
            }
        }
        out
    };
    (round(a), round(b))
}

/// Re-solves the powers with the binary shares of `alloc` frozen.
pub fn repair_powers_after_rounding(
    params: &SystemParams,
    channels: &ChannelSet,
    alloc: &Allocation,
    settings: &SolverSettings,
) -> Result<P2Solution, SolverError> {
    solve_program(params, channels, alloc, true, settings)
}

/// A relaxed column counts as fractional when its largest share is below
/// `1 - FRACTIONAL_TOL`.
const FRACTIONAL_TOL: f64 = 1e-3;

/// Owner of column `n` of a binary share matrix.
fn owner(m: &DMatrix<f64>, n: usize) -> Option<usize> {
    (0..m.nrows()).find(|&k| m[(k, n)] > 0.0)
}

/// Assignments one step away from `current` on the searched columns: one
/// column handed to another user, or two columns swapping owners.
fn neighbours(current: &Allocation, cols_a: &[usize], cols_b: &[usize]) -> Vec<Allocation> {
    let mut out = Vec::new();
    for (is_a, cols) in [(true, cols_a), (false, cols_b)] {
        let m = if is_a { &current.a } else { &current.b };
        let set = |cand: &mut Allocation, n: usize, k: Option<usize>| {
            let t = if is_a { &mut cand.a } else { &mut cand.b };
            t.column_mut(n).fill(0.0);
            if let Some(k) = k {
                t[(k, n)] = 1.0;
            }
        };
        for &n in cols {
            for k in (0..m.nrows()).filter(|&k| Some(k) != owner(m, n)) {
                let mut cand = current.clone();
                set(&mut cand, n, Some(k));
                out.push(cand);
            }
        }
        for (i, &n1) in cols.iter().enumerate() {
            for &n2 in &cols[i + 1..] {
                let (o1, o2) = (owner(m, n1), owner(m, n2));
                if o1 != o2 {
                    let mut cand = current.clone();
                    set(&mut cand, n1, o2);
                    set(&mut cand, n2, o1);
                    out.push(cand);
                }
            }
        }
    }
    out
}

/// Gives every user with bits to send but no subcarrier the column where its
/// relaxed share is largest, taken from an owner that keeps another column.
fn cover_empty_legs(relaxed: &Allocation, rounded: &mut Allocation) {
    let k_count = relaxed.k();
    for is_a in [true, false] {
        let (shares, m) = if is_a {
            (&relaxed.a, &mut rounded.a)
        } else {
            (&relaxed.b, &mut rounded.b)
        };
        for k in 0..k_count {
            let needy = if is_a {
                relaxed.d_r[k] > 0.0 || relaxed.d_m[k] > 0.0
            } else {
                relaxed.d_m[k] > 0.0
            };
            if !needy || m.row(k).iter().any(|&x| x > 0.0) {
                continue;
            }
            let spare = |n: usize| match owner(m, n) {
                None => true,
                Some(o) => m.row(o).iter().filter(|&&x| x > 0.0).count() > 1,
            };
            let pick = (0..m.ncols())
                .filter(|&n| shares[(k, n)] > 0.0 && spare(n))
                .fold(None, |best: Option<usize>, n| match best {
                    Some(b) if shares[(k, b)] >= shares[(k, n)] => Some(b),
                    _ => Some(n),
                });
            if let Some(n) = pick {
                m.column_mut(n).fill(0.0);
                m[(k, n)] = 1.0;
            }
        }
    }
}

/// Rounds one share matrix so that each user keeps about as many columns as
/// its relaxed total share, filling the quotas from the largest shares down.
/// Users flagged in `needy` get at least one column when one is available.
fn quota_round(m: &DMatrix<f64>, needy: &[bool]) -> DMatrix<f64> {
    let (k_count, n_count) = (m.nrows(), m.ncols());
    let used = (0..n_count).filter(|&n| m.column(n).max() > 0.0).count();
    let totals: Vec<f64> = (0..k_count).map(|k| m.row(k).sum()).collect();
    let mut quota: Vec<usize> = totals.iter().map(|t| t.floor() as usize).collect();
    let mut order: Vec<usize> = (0..k_count).collect();
    order.sort_by(|&x, &y| (totals[y] - totals[y].floor()).total_cmp(&(totals[x] - totals[x].floor())));
    let mut spare = used.saturating_sub(quota.iter().sum());
    for &k in order.iter().cycle().take(k_count * n_count.max(1)) {
        if spare == 0 {
            break;
        }
        if totals[k] > 0.0 {
            quota[k] += 1;
            spare -= 1;
        }
    }
    for k in 0..k_count {
        if needy[k] && quota[k] == 0 {
            if let Some(donor) = (0..k_count).filter(|&j| quota[j] > 1).max_by_key(|&j| quota[j]) {
                quota[donor] -= 1;
                quota[k] = 1;
            }
        }
    }
    let mut pairs: Vec<(usize, usize)> = (0..k_count)
        .flat_map(|k| (0..n_count).map(move |n| (k, n)))
        .filter(|&(k, n)| m[(k, n)] > 0.0)
        .collect();
    pairs.sort_by(|&(k1, n1), &(k2, n2)| m[(k2, n2)].total_cmp(&m[(k1, n1)]));
    let mut out = DMatrix::zeros(k_count, n_count);
    let mut taken = vec![false; n_count];
    let mut count = vec![0usize; k_count];
    for &(k, n) in &pairs {
        if !taken[n] && count[k] < quota[k] {
            out[(k, n)] = 1.0;
            taken[n] = true;
            count[k] += 1;
        }
    }
    // Columns left over after the quotas go to their largest share.
    for &(k, n) in &pairs {
        if !taken[n] {
            out[(k, n)] = 1.0;
            taken[n] = true;
        }
    }
    out
}

/// Argmax rounding of a relaxed solution and power repair, followed by a
/// first-improvement search over reassignments and owner swaps of the
/// fractional columns while the repaired transmit energy drops. Argmax alone
/// can leave a user with bits to send on no subcarrier; when that happens
/// the empty users are first given a column and then every column is
/// searched. `max_repairs` caps the number of extra power
/// solves.
pub fn round_and_repair(
    params: &SystemParams,
    channels: &ChannelSet,
    relaxed: &Allocation,
    max_repairs: usize,
    settings: &SolverSettings,
) -> Result<P2Solution, SolverError> {
    let mut start = relaxed.clone();
    (start.a, start.b) = round_subcarriers(&relaxed.a, &relaxed.b);
    let mut first = repair_powers_after_rounding(params, channels, &start, settings);
    let argmax_failed = first.is_err();
    let needy_a: Vec<bool> = (0..relaxed.k()).map(|k| relaxed.d_r[k] > 0.0 || relaxed.d_m[k] > 0.0).collect();
    let needy_b: Vec<bool> = relaxed.d_m.iter().map(|&d| d > 0.0).collect();
    let mut quota = relaxed.clone();
    quota.a = quota_round(&relaxed.a, &needy_a);
    quota.b = quota_round(&relaxed.b, &needy_b);
    if quota != start {
        if let Ok(sol) = repair_powers_after_rounding(params, channels, &quota, settings) {
            if first.as_ref().map_or(true, |f| sol.transmit_energy < f.transmit_energy) {
                start = quota;
                first = Ok(sol);
            }
        }
    }
    if first.is_err() {
        let mut covered = start.clone();
        cover_empty_legs(relaxed, &mut covered);
        if covered != start {
            if let Ok(sol) = repair_powers_after_rounding(params, channels, &covered, settings) {
                start = covered;
                first = Ok(sol);
            }
        }
    }
    let fractional = |m: &DMatrix<f64>| -> Vec<usize> {
        (0..m.ncols())
            .filter(|&n| {
                let top = m.column(n).max();
                argmax_failed || (top > 0.0 && top < 1.0 - FRACTIONAL_TOL)
            })
            .collect()
    };
    let (cols_a, cols_b) = (fractional(&relaxed.a), fractional(&relaxed.b));
    if cols_a.is_empty() && cols_b.is_empty() {
        return first;
    }
    let (mut best, first_err) = match first {
        Ok(sol) => (Some(sol), None),
        Err(e) => (None, Some(e)),
    };
    let mut current = best.as_ref().map_or(start, |s| s.alloc.clone());
    let mut solves = 0;
    let mut improved = true;
    while improved && solves < max_repairs {
        improved = false;
        for cand in neighbours(&current, &cols_a, &cols_b) {
            if solves >= max_repairs {
                break;
            }
            solves += 1;
            let Ok(sol) = repair_powers_after_rounding(params, channels, &cand, settings) else {
                continue;
            };
            if best.as_ref().is_none_or(|b| sol.transmit_energy < b.transmit_energy * (1.0 - 1e-9)) {
                current = sol.alloc.clone();
                best = Some(sol);
                improved = true;
                break;
            }
        }
    }
    best.ok_or_else(|| first_err.unwrap_or_else(|| SolverError::Infeasible("no binary assignment found".into())))
}
