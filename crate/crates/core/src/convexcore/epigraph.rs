//! Cone encodings of the two nonlinear constraint families: perspective-log
//! rate constraints and cubic-over-square energy epigraphs.

use std::f64::consts::LN_2;

use super::program::{ConicProgram, ConstraintId, LinExpr, VarId};
use super::ConvexError;

/// One subcarrier's contribution `a W log2(1 + gain p / a)` to a rate sum.
/// `gain` is the channel gain over the noise power.
#[derive(Debug, Clone)]
pub struct RateTerm {
    pub share: LinExpr,
    pub power: LinExpr,
    pub gain: f64,
}

#[derive(Debug, Clone)]
pub enum RateMode {
    /// Shares and powers may be variables; the time must be constant.
    Conic(Vec<RateTerm>),
    /// Precomputed rate in bit/s; the time may be a variable.
    Fixed(f64),
}

#[derive(Debug, Clone)]
pub struct RateHandle {
    pub id: ConstraintId,
    /// Per-term auxiliaries `rho <= a ln(1 + gain p / a)` (conic mode only).
    pub rho: Vec<VarId>,
}

/// Adds `bits <= time * sum_n a_n W log2(1 + gain_n p_n / a_n)`.
pub fn add_perspective_rate_constraint(
    prog: &mut ConicProgram,
    bits: LinExpr,
    time: LinExpr,
    bandwidth: f64,
    mode: RateMode,
) -> Result<RateHandle, ConvexError> {
    match mode {
        RateMode::Fixed(rate) => {
            if !rate.is_finite() || rate < 0.0 {
                return Err(ConvexError::Domain(format!("rate {rate}")));
            }
            let id = prog.add_le(bits, time * rate);
            Ok(RateHandle { id, rho: Vec::new() })
        }
        RateMode::Conic(terms) => {
            let variable_terms = terms
                .iter()
                .any(|t| !t.share.is_constant() || !t.power.is_constant());
            if variable_terms && !time.is_constant() {
                return Err(ConvexError::Bilinear);
            }
            let t = time.constant;
            if t < 0.0 {
                return Err(ConvexError::Domain(format!("negative time {t}")));
            }
            let mut rho = Vec::with_capacity(terms.len());
            let mut capacity = LinExpr::constant(0.0);
            for term in terms {
                let r = prog.free("rho");
                prog.add_exp_cone(
                    r.into(),
                    term.share.clone(),
                    term.share.clone() + term.power * term.gain,
                );
                capacity.add_term(r, t * bandwidth / LN_2);
                rho.push(r);
            }
            let id = prog.add_le(bits, capacity);
            Ok(RateHandle { id, rho })
        }
    }
}

/// Adds `u >= coeff * d^3 / denom^2` as the power cone
/// `(u / coeff, denom, d)` with exponent 1/3.
pub fn add_cubic_over_square_epigraph(
    prog: &mut ConicProgram,
    u: VarId,
    coeff: f64,
    d: LinExpr,
    denom: LinExpr,
) -> Result<ConstraintId, ConvexError> {
    if denom.is_constant() && denom.constant <= 0.0 {
        return Err(ConvexError::Domain(format!(
            "nonpositive denominator {}",
            denom.constant
        )));
    }
    if coeff < 0.0 || !coeff.is_finite() {
        return Err(ConvexError::Domain(format!("coefficient {coeff}")));
    }
    if coeff == 0.0 {
        return Ok(prog.add_le(0.0.into(), u.into()));
    }
    Ok(prog.add_pow_cone(1.0 / 3.0, LinExpr::term(u, 1.0 / coeff), denom, d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convexcore::{solve, SolveStatus, SolverSettings};
    use crate::scenario::SeededStreams;
    use crate::sysmodel::shannon_rate;
    use rand::Rng;

    const W: f64 = 1e6;

    #[test]
    fn fixed_share_and_power_is_linear() {
        let mut p = ConicProgram::new();
        let d = p.nonneg("d");
        let rate = shannon_rate(W, 1e-10, 1e-9, 1.0, 0.5);
        let h = add_perspective_rate_constraint(
            &mut p,
            LinExpr::term(d, 1e6),
            0.3.into(),
            W,
            RateMode::Fixed(rate),
        )
        .unwrap();
        assert!(h.rho.is_empty());
        p.minimize(-LinExpr::var(d));
        let out = solve(&p, &SolverSettings::default()).unwrap();
        assert!((out.value(d) * 1e6 / (0.3 * rate) - 1.0).abs() < 1e-7);
    }

    #[test]
    fn bilinear_is_rejected() {
        let mut p = ConicProgram::new();
        let d = p.nonneg("d");
        let t = p.nonneg("t");
        let a = p.nonneg("a");
        let q = p.nonneg("q");
        let terms = vec![RateTerm {
            share: a.into(),
            power: q.into(),
            gain: 1.0,
        }];
        let err = add_perspective_rate_constraint(&mut p, d.into(), t.into(), W, RateMode::Conic(terms));
        assert_eq!(err.unwrap_err(), ConvexError::Bilinear);
    }

    #[test]
    fn vanishing_share_and_power_forces_zero_bits() {
        let mut p = ConicProgram::new();
        let d = p.nonneg("d");
        let terms = vec![RateTerm {
            share: 0.0.into(),
            power: 0.0.into(),
            gain: 10.0,
        }];
        add_perspective_rate_constraint(&mut p, d.into(), 0.5.into(), W, RateMode::Conic(terms))
            .unwrap();
        p.minimize(-LinExpr::var(d));
        let out = solve(&p, &SolverSettings::default()).unwrap();
        assert!(out.value(d).abs() < 1e-6);
    }

    #[test]
    fn conic_solution_satisfies_direct_rate() {
        // Minimum power to push 1.2 Mbit in 0.4 s over two subcarriers with
        // a free share split, then re-evaluated with the Shannon formula.
        let noise = 1e-10;
        let gains = [3e-9, 8e-10];
        let (t, bits) = (0.4, 1.2e6);
        let mut p = ConicProgram::new();
        let a: Vec<_> = (0..2).map(|_| p.nonneg("a")).collect();
        let pw: Vec<_> = (0..2).map(|_| p.nonneg("p")).collect();
        for &ai in &a {
            p.add_le(ai.into(), 1.0.into());
        }
        let terms = (0..2)
            .map(|n| RateTerm {
                share: a[n].into(),
                power: pw[n].into(),
                gain: gains[n] / noise,
            })
            .collect();
        add_perspective_rate_constraint(&mut p, (bits / 1e6).into(), t.into(), W / 1e6, RateMode::Conic(terms))
            .unwrap();
        p.minimize(LinExpr::var(pw[0]) + LinExpr::var(pw[1]));
        let out = solve(&p, &SolverSettings::default()).unwrap();
        assert_eq!(out.status, SolveStatus::Optimal);
        let achieved: f64 = (0..2)
            .map(|n| {
                let share = out.value(a[n]);
                let power = if share > 0.0 { out.value(pw[n]) / share } else { 0.0 };
                t * shannon_rate(W, noise, gains[n], share, power)
            })
            .sum();
        assert!(achieved >= bits * (1.0 - 1e-6), "{achieved}");
    }

    #[test]
    fn cubic_epigraph_example() {
        // Bits in units of 1e5 so the cone coefficient stays well scaled.
        let coeff = 0.3e-18 * 1e15;
        let mut p = ConicProgram::new();
        let u = p.free("u");
        add_cubic_over_square_epigraph(&mut p, u, coeff, 1.0.into(), 0.5.into()).unwrap();
        p.minimize(u.into());
        let out = solve(&p, &SolverSettings::default()).unwrap();
        assert!((out.value(u) / 1.2e-3 - 1.0).abs() < 1e-7, "{}", out.value(u));
    }

    #[test]
    fn cubic_epigraph_zero_bits() {
        let mut p = ConicProgram::new();
        let u = p.free("u");
        add_cubic_over_square_epigraph(&mut p, u, 2.0, 0.0.into(), 0.7.into()).unwrap();
        p.minimize(u.into());
        let out = solve(&p, &SolverSettings::default()).unwrap();
        assert!(out.value(u).abs() < 1e-7);
    }

    #[test]
    fn cubic_epigraph_rejects_nonpositive_denominator() {
        let mut p = ConicProgram::new();
        let u = p.free("u");
        let err = add_cubic_over_square_epigraph(&mut p, u, 1.0, 1.0.into(), 0.0.into());
        assert!(matches!(err, Err(ConvexError::Domain(_))));
    }

    #[test]
    fn power_cone_boundary_matches_direct_evaluation() {
        let mut rng = SeededStreams::new(7).stream(65, 0, 0);
        for _ in 0..100 {
            let coeff: f64 = rng.random_range(1e-3..10.0);
            let d: f64 = rng.random_range(0.0..3.0);
            let w: f64 = rng.random_range(0.05..1.0);
            let direct = coeff * d.powi(3) / (w * w);
            // Smallest u with (u/coeff)^(1/3) w^(2/3) >= d.
            let from_cone = coeff * (d / w.powf(2.0 / 3.0)).powi(3);
            assert!((from_cone - direct).abs() <= 1e-8 * direct.max(1e-300));
        }
        let mut settings = SolverSettings::default();
        settings.tol_gap_rel = 1e-10;
        settings.tol_gap_abs = 1e-12;
        for _ in 0..10 {
            let coeff: f64 = rng.random_range(1e-2..1.0);
            let d: f64 = rng.random_range(0.1..2.0);
            let w: f64 = rng.random_range(0.1..1.0);
            let mut p = ConicProgram::new();
            let u = p.free("u");
            add_cubic_over_square_epigraph(&mut p, u, coeff, d.into(), w.into()).unwrap();
            p.minimize(u.into());
            let out = solve(&p, &settings).unwrap();
            let direct = coeff * d.powi(3) / (w * w);
            assert!((out.value(u) / direct - 1.0).abs() < 1e-6);
        }
    }
}
