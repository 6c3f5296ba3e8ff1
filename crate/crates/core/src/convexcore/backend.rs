//! Interior-point backend for [`ConicProgram`] built on Clarabel.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};

use super::program::{ConicProgram, Constraint, LinExpr, VarKind};
use super::{ConvexError, SolveOutcome, SolveStatus, SolverSettings};

/// Rows of `A x + s = b` contributed by one cone.
struct Rows {
    a: Vec<(usize, usize, f64)>,
    b: Vec<f64>,
}

impl Rows {
    fn new() -> Self {
        Self {
            a: Vec::new(),
            b: Vec::new(),
        }
    }

    /// Appends a row whose slack equals `expr`.
    fn push_slack(&mut self, expr: &LinExpr) {
        let row = self.b.len();
        for &(v, c) in &expr.compact().terms {
            self.a.push((row, v.0, -c));
        }
        self.b.push(expr.constant);
    }

    fn len(&self) -> usize {
        self.b.len()
    }
}

/// Standard form `min q'x  s.t.  A x + s = b, s in K`.
pub(crate) struct StandardForm {
    pub q: Vec<f64>,
    pub q0: f64,
    pub a: Vec<(usize, usize, f64)>,
    pub b: Vec<f64>,
    pub cones: Vec<SupportedConeT<f64>>,
    pub n: usize,
}

pub(crate) fn standard_form(prog: &ConicProgram) -> StandardForm {
    let n = prog.num_vars();
    let mut zero = Rows::new();
    let mut nonneg = Rows::new();
    let mut others: Vec<(Rows, SupportedConeT<f64>)> = Vec::new();
    for v in 0..n {
        let id = super::program::VarId(v);
        if prog.kind(id) == VarKind::Nonneg {
            nonneg.push_slack(&LinExpr::var(id));
        }
    }
    for c in prog.constraints() {
        match c {
            Constraint::Eq(e) => zero.push_slack(e),
            Constraint::Le(e) => nonneg.push_slack(&(-e.clone())),
            Constraint::Bound { var, lo, hi } => {
                if lo.is_finite() {
                    nonneg.push_slack(&(LinExpr::var(*var) - LinExpr::constant(*lo)));
                }
                if hi.is_finite() {
                    nonneg.push_slack(&(LinExpr::constant(*hi) - LinExpr::var(*var)));
                }
            }
            Constraint::Exp(args) => {
                let mut r = Rows::new();
                args.iter().for_each(|e| r.push_slack(e));
                others.push((r, SupportedConeT::ExponentialConeT()));
            }
            Constraint::Pow { alpha, args } => {
                let mut r = Rows::new();
                args.iter().for_each(|e| r.push_slack(e));
                others.push((r, SupportedConeT::PowerConeT(*alpha)));
            }
            Constraint::Psd { dim, svec } => {
                let mut r = Rows::new();
                svec.iter().for_each(|e| r.push_slack(e));
                others.push((r, SupportedConeT::PSDTriangleConeT(*dim)));
            }
        }
    }
    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut cones = Vec::new();
    let mut append = |rows: Rows, cone: SupportedConeT<f64>| {
        let offset = b.len();
        a.extend(rows.a.into_iter().map(|(r, c, v)| (r + offset, c, v)));
        b.extend(rows.b);
        cones.push(cone);
    };
    if zero.len() > 0 {
        let k = zero.len();
        append(zero, SupportedConeT::ZeroConeT(k));
    }
    if nonneg.len() > 0 {
        let k = nonneg.len();
        append(nonneg, SupportedConeT::NonnegativeConeT(k));
    }
    for (rows, cone) in others {
        append(rows, cone);
    }
    let obj = prog.objective().compact();
    let mut q = vec![0.0; n];
    for &(v, c) in &obj.terms {
        q[v.0] += c;
    }
    StandardForm {
        q,
        q0: obj.constant,
        a,
        b,
        cones,
        n,
    }
}

/// Solves `prog` with the interior-point backend.
pub fn solve(prog: &ConicProgram, settings: &SolverSettings) -> Result<SolveOutcome, ConvexError> {
    prog.validate()?;
    let sf = standard_form(prog);
    let m = sf.b.len();
    let (rows, (cols, vals)): (Vec<usize>, (Vec<usize>, Vec<f64>)) =
        sf.a.iter().map(|&(r, c, v)| (r, (c, v))).unzip();
    let a = CscMatrix::new_from_triplets(m, sf.n, rows, cols, vals);
    let p = CscMatrix::zeros((sf.n, sf.n));
    let cfg = DefaultSettings {
        verbose: false,
        max_iter: settings.max_iter,
        tol_gap_abs: settings.tol_gap_abs,
        tol_gap_rel: settings.tol_gap_rel,
        tol_feas: settings.tol_feas,
        presolve_enable: false,
        ..DefaultSettings::default()
    };
    let mut solver = DefaultSolver::new(&p, &sf.q, &a, &sf.b, &sf.cones, cfg)
        .map_err(|e| ConvexError::Backend(e.to_string()))?;
    solver.solve();
    let sol = &solver.solution;
    let residual = sol.r_prim.max(sol.r_dual);
    let status = match sol.status {
        SolverStatus::Solved if residual <= settings.tol_feas => SolveStatus::Optimal,
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
            SolveStatus::Infeasible
        }
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => SolveStatus::Unbounded,
        _ => SolveStatus::NumericalLimit,
    };
    Ok(SolveOutcome {
        status,
        x: sol.x.clone(),
        objective: sol.obj_val + sf.q0,
        iterations: sol.iterations,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings() -> SolverSettings {
        SolverSettings::default()
    }

    #[test]
    fn simple_lower_bound() {
        let mut p = ConicProgram::new();
        let x = p.free("x");
        p.add_le(LinExpr::constant(3.0), x.into());
        p.minimize(x.into());
        let out = solve(&p, &settings()).unwrap();
        assert_eq!(out.status, SolveStatus::Optimal);
        assert!((out.x[0] - 3.0).abs() < 1e-7);
        assert!(out.residual <= settings().tol_feas);
    }

    #[test]
    fn infeasible_time_budget() {
        // t1 + t2 <= 1 with t1 >= 0.7 and t2 >= 0.6.
        let mut p = ConicProgram::new();
        let t1 = p.nonneg("t1");
        let t2 = p.nonneg("t2");
        p.add_le(LinExpr::var(t1) + LinExpr::var(t2), 1.0.into());
        p.add_bound(t1, 0.7, f64::INFINITY);
        p.add_bound(t2, 0.6, f64::INFINITY);
        p.minimize(LinExpr::var(t1));
        assert_eq!(solve(&p, &settings()).unwrap().status, SolveStatus::Infeasible);
    }

    #[test]
    fn unbounded_program() {
        let mut p = ConicProgram::new();
        let x = p.free("x");
        p.minimize(x.into());
        p.add_le(x.into(), 1.0.into());
        assert_eq!(solve(&p, &settings()).unwrap().status, SolveStatus::Unbounded);
    }

    #[test]
    fn exponential_cone_convention() {
        // max r s.t. r <= ln(1 + 3): (r, 1, 1 + 3) in K_exp.
        let mut p = ConicProgram::new();
        let r = p.free("r");
        p.add_exp_cone(r.into(), 1.0.into(), 4.0.into());
        p.minimize(-LinExpr::var(r));
        let out = solve(&p, &settings()).unwrap();
        assert!((out.x[0] - 4f64.ln()).abs() < 1e-7, "{:?}", out);
    }

    #[test]
    fn power_cone_convention() {
        // min u s.t. u >= d^3 / w^2 with d = 2, w = 0.5.
        let mut p = ConicProgram::new();
        let u = p.free("u");
        p.add_pow_cone(1.0 / 3.0, u.into(), 0.5.into(), 2.0.into());
        p.minimize(u.into());
        let out = solve(&p, &settings()).unwrap();
        assert!((out.x[0] / 32.0 - 1.0).abs() < 1e-7, "{:?}", out);
    }

    #[test]
    fn psd_convention_matches_min_eigenvalue() {
        // min tr(C S) s.t. tr S = 1, S Hermitian PSD  =  lambda_min(C).
        use nalgebra::DMatrix;
        use num_complex::Complex64;
        let c = DMatrix::from_row_slice(
            3,
            3,
            &[
                Complex64::new(2.0, 0.0),
                Complex64::new(0.5, 0.7),
                Complex64::new(-0.3, 0.1),
                Complex64::new(0.5, -0.7),
                Complex64::new(1.0, 0.0),
                Complex64::new(0.2, -0.4),
                Complex64::new(-0.3, -0.1),
                Complex64::new(0.2, 0.4),
                Complex64::new(1.5, 0.0),
            ],
        );
        let mut p = ConicProgram::new();
        let s = p.add_hermitian_psd(3, "S");
        p.add_eq(s.trace(), 1.0.into());
        p.minimize(s.inner(&c));
        let out = solve(&p, &settings()).unwrap();
        let lmin = c.symmetric_eigenvalues().min();
        assert_eq!(out.status, SolveStatus::Optimal);
        assert!((out.objective - lmin).abs() < 1e-6, "{} vs {lmin}", out.objective);
        let sv = s.value(&out.x);
        assert!((sv.trace().re - 1.0).abs() < 1e-7);
    }

    #[test]
    fn rate_program_matches_grid_search() {
        // min p1 + p2  s.t.  ln(1 + 2 p1) + ln(1 + 0.5 p2) >= 1.5, p >= 0.
        let mut p = ConicProgram::new();
        let p1 = p.nonneg("p1");
        let p2 = p.nonneg("p2");
        let r1 = p.free("r1");
        let r2 = p.free("r2");
        p.add_exp_cone(r1.into(), 1.0.into(), LinExpr::constant(1.0) + LinExpr::term(p1, 2.0));
        p.add_exp_cone(r2.into(), 1.0.into(), LinExpr::constant(1.0) + LinExpr::term(p2, 0.5));
        p.add_le(1.5.into(), LinExpr::var(r1) + LinExpr::var(r2));
        p.minimize(LinExpr::var(p1) + LinExpr::var(p2));
        let out = solve(&p, &settings()).unwrap();
        // Grid over p1 with p2 obtained by exact inversion, 10^4 points.
        let best = (0..10_000)
            .map(|i| {
                let x = 2.5 * i as f64 / 9_999.0;
                let need = 1.5 - (1.0 + 2.0 * x).ln();
                let y = if need <= 0.0 { 0.0 } else { (need.exp() - 1.0) / 0.5 };
                x + y
            })
            .fold(f64::INFINITY, f64::min);
        assert!((out.objective - best).abs() <= 1e-4 * best, "{} vs {best}", out.objective);
    }
}
