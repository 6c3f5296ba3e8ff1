//! Barrier method for Hermitian SDPs with log-rate constraints:
//!
//! ```text
//! S PSD,  S_mm <= 1,  g_k(S) = sum_n c_kn ln(1 + a_kn v_n^H S v_n) / e_k - 1 >= 0.
//! ```
//!
//! The Newton system has the structure `S^-1 (.) S^-1 + Q W Q^T` with `Q`
//! spanned by the `M` diagonal selectors and the `N` rank-one matrices
//! `v_n v_n^H`, so each step is solved through a Woodbury reduction of size
//! `M + N` instead of a dense system in `M^2` unknowns.

use nalgebra::{Cholesky, DMatrix, DVector};
use num_complex::Complex64;

use super::program::{ConicProgram, HermitianBlock, LinExpr};
use super::linearize::real_embedding;
use super::ConvexError;
use crate::channel::{CMatrix, CVector};

/// One rate row: `sum_terms share ln(1 + snr_gain v_n^H S v_n) >= demand`,
/// with `demand` in nats.
#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub demand: f64,
    /// `(n, share, snr_gain)`.
    pub terms: Vec<(usize, f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierSettings {
    /// Relative duality-gap target `nu / t <= tol * max(1, |objective|)`.
    pub tol: f64,
    /// Barrier parameter growth per outer step.
    pub mu: f64,
    pub max_newton: usize,
}

impl Default for BarrierSettings {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            mu: 10.0,
            max_newton: 2000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SdpPoint {
    pub s: CMatrix,
    pub objective: f64,
    /// `g_k(S)` for every row.
    pub slack: Vec<f64>,
    pub newton_steps: usize,
}

#[derive(Debug, Clone)]
struct Row {
    e: f64,
    /// `(n, c, a)` with `a` relative to the scaled vectors.
    terms: Vec<(usize, f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct RateSdp {
    m: usize,
    vecs: Vec<CVector>,
    rows: Vec<Row>,
}

fn inner(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

fn hermitize(a: &mut CMatrix) {
    let h = (&*a + a.adjoint()) * Complex64::new(0.5, 0.0);
    *a = h;
}

enum Goal<'a> {
    MaxSlack,
    Linear(&'a CMatrix),
}

impl RateSdp {
    /// `vecs[n]` are the vectors `v_n`; rows index into them.
    pub fn new(vecs: Vec<CVector>, rows: Vec<RateRow>) -> Result<Self, ConvexError> {
        let m = vecs.first().map_or(0, |v| v.len());
        if m == 0 || vecs.iter().any(|v| v.len() != m) {
            return Err(ConvexError::Malformed("inconsistent vector lengths".into()));
        }
        let mut scale = vec![0.0f64; vecs.len()];
        for r in &rows {
            if !(r.demand > 0.0) {
                return Err(ConvexError::Domain(format!("row demand {}", r.demand)));
            }
            for &(n, c, a) in &r.terms {
                if n >= vecs.len() || c < 0.0 || a < 0.0 {
                    return Err(ConvexError::Malformed(format!("term ({n}, {c}, {a})")));
                }
                scale[n] = scale[n].max(a);
            }
        }
        let vecs = vecs
            .into_iter()
            .zip(&scale)
            .map(|(v, &s)| v * Complex64::new(s.sqrt(), 0.0))
            .collect();
        let rows = rows
            .into_iter()
            .map(|r| Row {
                e: r.demand,
                terms: r
                    .terms
                    .into_iter()
                    .filter(|&(n, c, a)| c > 0.0 && a > 0.0 && scale[n] > 0.0)
                    .map(|(n, c, a)| (n, c, a / scale[n]))
                    .collect(),
            })
            .collect();
        Ok(Self { m, vecs, rows })
    }

    /// The same rows with every demand raised so that `g_k(S) >= 0` in the
    /// result means `g_k(S) >= floor` here.
    pub fn with_slack_floor(&self, floor: f64) -> Self {
        let mut out = self.clone();
        for r in &mut out.rows {
            r.e *= 1.0 + floor;
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    fn quads(&self, s: &CMatrix) -> Vec<f64> {
        self.vecs.iter().map(|v| v.dotc(&(s * v)).re).collect()
    }

    fn row_values(&self, u: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| {
                r.terms
                    .iter()
                    .map(|&(n, c, a)| c * (a * u[n].max(0.0)).ln_1p())
                    .sum::<f64>()
                    / r.e
                    - 1.0
            })
            .collect()
    }

    /// `g_k(S)` for every row.
    pub fn slacks(&self, s: &CMatrix) -> Vec<f64> {
        self.row_values(&self.quads(s))
    }

    /// `min_k g_k(S)`, or `+inf` with no rows.
    pub fn min_slack(&self, s: &CMatrix) -> f64 {
        self.slacks(s).into_iter().fold(f64::INFINITY, f64::min)
    }

    fn nu(&self) -> f64 {
        (2 * self.m + self.rows.len()) as f64
    }

    /// Barrier value, or `None` outside the domain.
    fn barrier(&self, s: &CMatrix, eta: Option<f64>) -> Option<f64> {
        // Complex Cholesky takes square roots of complex pivots and does not
        // reject indefinite input, so definiteness is tested on the real
        // embedding, whose determinant is det(S)^2.
        let chol = Cholesky::new(real_embedding(s))?;
        let l = chol.l_dirty();
        let mut f = 0.0;
        for i in 0..2 * self.m {
            let d = l[(i, i)];
            if !(d > 0.0) {
                return None;
            }
            f -= d.ln();
        }
        for i in 0..self.m {
            let z = 1.0 - s[(i, i)].re;
            if !(z > 0.0) {
                return None;
            }
            f -= z.ln();
        }
        for g in self.slacks(s) {
            let h = g - eta.unwrap_or(0.0);
            if !(h > 0.0) || !h.is_finite() {
                return None;
            }
            f -= h.ln();
        }
        Some(f)
    }

    fn objective(goal: &Goal, s: &CMatrix, eta: f64) -> f64 {
        match goal {
            Goal::MaxSlack => -eta,
            Goal::Linear(c) => inner(c, s),
        }
    }

    /// Newton direction `(dS, d_eta, decrement^2)` for `t * objective + barrier`.
    fn newton_step(&self, goal: &Goal, t: f64, s: &CMatrix, eta: f64) -> Option<(CMatrix, f64, f64)> {
        let (m, nv) = (self.m, self.vecs.len());
        let sinv = Cholesky::new(s.clone())?.inverse();
        let u = self.quads(s);
        let g = self.row_values(&u);
        let phase1 = matches!(goal, Goal::MaxSlack);
        let h: Vec<f64> = g.iter().map(|&gk| if phase1 { gk - eta } else { gk }).collect();
        let z: Vec<f64> = (0..m).map(|i| 1.0 - s[(i, i)].re).collect();

        // Per-row gradient coefficients and the rate part of W.
        let mut gamma = vec![0.0; nv];
        let mut wvv = DMatrix::<f64>::zeros(nv, nv);
        let mut betas: Vec<Vec<(usize, f64)>> = Vec::with_capacity(self.rows.len());
        for (k, r) in self.rows.iter().enumerate() {
            let mut beta = Vec::with_capacity(r.terms.len());
            for &(n, c, a) in &r.terms {
                let q = 1.0 + a * u[n].max(0.0);
                let b = c * a / (r.e * q);
                gamma[n] += b / h[k];
                wvv[(n, n)] += c * a * a / (r.e * q * q * h[k]);
                beta.push((n, b));
            }
            for &(n1, b1) in &beta {
                for &(n2, b2) in &beta {
                    wvv[(n1, n2)] += b1 * b2 / (h[k] * h[k]);
                }
            }
            betas.push(beta);
        }

        let mut r_mat = sinv;
        for i in 0..m {
            r_mat[(i, i)] -= Complex64::new(1.0 / z[i], 0.0);
        }
        if let Goal::Linear(c) = goal {
            r_mat -= *c * Complex64::new(t, 0.0);
        }
        let mut coef = gamma.clone();

        // Eliminate eta through its Schur complement.
        let mut eta_data = None;
        if phase1 {
            let r_eta = t - h.iter().map(|hk| 1.0 / hk).sum::<f64>();
            let h_ee: f64 = h.iter().map(|hk| 1.0 / (hk * hk)).sum();
            let mut b = vec![0.0; nv];
            for (k, beta) in betas.iter().enumerate() {
                for &(n, bk) in beta {
                    b[n] -= bk / (h[k] * h[k]);
                }
            }
            for n1 in 0..nv {
                coef[n1] -= r_eta * b[n1] / h_ee;
                for n2 in 0..nv {
                    wvv[(n1, n2)] -= b[n1] * b[n2] / h_ee;
                }
            }
            eta_data = Some((r_eta, h_ee, b));
        }
        for (n, v) in self.vecs.iter().enumerate() {
            if gamma[n] != 0.0 {
                r_mat += v * v.adjoint() * Complex64::new(gamma[n], 0.0);
            }
        }
        let mut r_red = r_mat.clone();
        for (n, v) in self.vecs.iter().enumerate() {
            let extra = coef[n] - gamma[n];
            if extra != 0.0 {
                r_red += v * v.adjoint() * Complex64::new(extra, 0.0);
            }
        }

        let y = s * &r_red * s;
        let sv: Vec<CVector> = self.vecs.iter().map(|v| s * v).collect();
        let dim = m + nv;
        let mut qy = DVector::<f64>::zeros(dim);
        for i in 0..m {
            qy[i] = y[(i, i)].re;
        }
        for (n, v) in self.vecs.iter().enumerate() {
            qy[m + n] = v.dotc(&(&y * v)).re;
        }
        let mut gmat = DMatrix::<f64>::zeros(dim, dim);
        for i in 0..m {
            for j in 0..m {
                gmat[(i, j)] = s[(i, j)].norm_sqr();
            }
            for n in 0..nv {
                let x = sv[n][i].norm_sqr();
                gmat[(i, m + n)] = x;
                gmat[(m + n, i)] = x;
            }
        }
        for n1 in 0..nv {
            for n2 in n1..nv {
                let x = self.vecs[n1].dotc(&sv[n2]).norm_sqr();
                gmat[(m + n1, m + n2)] = x;
                gmat[(m + n2, m + n1)] = x;
            }
        }
        let mut wfull = DMatrix::<f64>::zeros(dim, dim);
        for i in 0..m {
            wfull[(i, i)] = 1.0 / (z[i] * z[i]);
        }
        wfull.view_mut((m, m), (nv, nv)).copy_from(&wvv);
        let lhs = DMatrix::<f64>::identity(dim, dim) + &wfull * &gmat;
        let rhs = &wfull * &qy;
        let zz = lhs.lu().solve(&rhs)?;

        let mut x = CMatrix::zeros(m, m);
        for i in 0..m {
            x[(i, i)] = Complex64::new(zz[i], 0.0);
        }
        for (n, v) in self.vecs.iter().enumerate() {
            if zz[m + n] != 0.0 {
                x += v * v.adjoint() * Complex64::new(zz[m + n], 0.0);
            }
        }
        let mut ds = y - s * x * s;
        hermitize(&mut ds);

        let mut dec = inner(&r_mat, &ds);
        let mut deta = 0.0;
        if let Some((r_eta, h_ee, b)) = eta_data {
            let coupling: f64 = self
                .vecs
                .iter()
                .zip(&b)
                .map(|(v, bn)| bn * v.dotc(&(&ds * v)).re)
                .sum();
            deta = (r_eta - coupling) / h_ee;
            dec += r_eta * deta;
        }
        if !dec.is_finite() || !ds.iter().all(|x| x.re.is_finite() && x.im.is_finite()) {
            return None;
        }
        Some((ds, deta, dec))
    }

    fn path_following(
        &self,
        goal: Goal,
        mut s: CMatrix,
        mut eta: f64,
        settings: &BarrierSettings,
    ) -> Result<SdpPoint, ConvexError> {
        let phase1 = matches!(goal, Goal::MaxSlack);
        let eta_opt = |e: f64| if phase1 { Some(e) } else { None };
        if self.barrier(&s, eta_opt(eta)).is_none() {
            return Err(ConvexError::Domain("starting point is not interior".into()));
        }
        let nu = self.nu();
        let mut t = nu / Self::objective(&goal, &s, eta).abs().max(1.0);
        let mut steps = 0usize;
        loop {
            // Centering.
            for _ in 0..200 {
                let f0 = t * Self::objective(&goal, &s, eta) + self.barrier(&s, eta_opt(eta)).unwrap();
                let Some((ds, deta, dec)) = self.newton_step(&goal, t, &s, eta) else {
                    return Err(ConvexError::Backend("singular Newton system".into()));
                };
                steps += 1;
                if dec <= 2e-10 || steps >= settings.max_newton {
                    break;
                }
                let mut alpha = 1.0;
                let mut accepted = false;
                for _ in 0..60 {
                    let cand = &s + &ds * Complex64::new(alpha, 0.0);
                    let ceta = eta + alpha * deta;
                    if let Some(b) = self.barrier(&cand, eta_opt(ceta)) {
                        let f1 = t * Self::objective(&goal, &cand, ceta) + b;
                        if f1 <= f0 - 0.25 * alpha * dec {
                            s = cand;
                            eta = ceta;
                            accepted = true;
                            break;
                        }
                    }
                    alpha *= 0.5;
                }
                if !accepted {
                    break;
                }
            }
            let obj = Self::objective(&goal, &s, eta);
            if nu / t <= settings.tol * obj.abs().max(1.0) || steps >= settings.max_newton {
                break;
            }
            t *= settings.mu;
        }
        let slack = self.slacks(&s);
        let objective = match goal {
            Goal::MaxSlack => slack.iter().copied().fold(f64::INFINITY, f64::min),
            Goal::Linear(c) => inner(c, &s),
        };
        Ok(SdpPoint {
            s,
            objective,
            slack,
            newton_steps: steps,
        })
    }

    /// Maximizes `min_k g_k(S)`. The result is strictly interior; its
    /// objective is the attained minimum slack.
    pub fn max_min_slack(
        &self,
        start: Option<&CMatrix>,
        settings: &BarrierSettings,
    ) -> Result<SdpPoint, ConvexError> {
        if self.rows.is_empty() {
            return Err(ConvexError::Malformed("no rate rows".into()));
        }
        let half = CMatrix::identity(self.m, self.m) * Complex64::new(0.5, 0.0);
        let s0 = match start {
            Some(st) => st * Complex64::new(0.9, 0.0) + &half * Complex64::new(0.1, 0.0),
            None => half,
        };
        let eta0 = self.min_slack(&s0) - 1.0;
        self.path_following(Goal::MaxSlack, s0, eta0, settings)
    }

    /// Minimizes `<C, S>` from a strictly feasible `start`.
    pub fn minimize_linear(
        &self,
        c: &CMatrix,
        start: &CMatrix,
        settings: &BarrierSettings,
    ) -> Result<SdpPoint, ConvexError> {
        let mut ch = c.clone();
        hermitize(&mut ch);
        self.path_following(Goal::Linear(&ch), self.recenter(start), 0.0, settings)
    }

    /// Pulls an interior point toward `I / 2` while keeping at least half of
    /// its minimum slack. Points returned by the slack maximization sit next
    /// to the box boundary, where Newton steps lose precision.
    fn recenter(&self, start: &CMatrix) -> CMatrix {
        if self.barrier(start, None).is_none() {
            return start.clone();
        }
        let target = 0.5 * self.min_slack(start);
        let half = CMatrix::identity(self.m, self.m) * Complex64::new(0.5, 0.0);
        let mut theta = 0.5;
        for _ in 0..30 {
            let cand = start * Complex64::new(1.0 - theta, 0.0) + &half * Complex64::new(theta, 0.0);
            if self.min_slack(&cand) >= target {
                return cand;
            }
            theta *= 0.5;
        }
        start.clone()
    }

    /// The same feasible set as a generic conic program over a Hermitian
    /// block, with `eta` as a lower bound on every row's slack. Used to
    /// cross-check the barrier method on small sizes.
    pub fn conic_model(&self) -> (ConicProgram, HermitianBlock, super::VarId) {
        let mut p = ConicProgram::new();
        let s = p.add_hermitian_psd(self.m, "S");
        let eta = p.free("eta");
        for &d in &s.diag {
            p.add_le(d.into(), 1.0.into());
        }
        for r in &self.rows {
            let mut sum = LinExpr::constant(-1.0);
            for &(n, c, a) in &r.terms {
                let v = &self.vecs[n];
                let rho = p.free("rho");
                p.add_exp_cone(
                    rho.into(),
                    1.0.into(),
                    LinExpr::constant(1.0) + s.inner(&(v * v.adjoint())) * a,
                );
                sum.add_term(rho, c / r.e);
            }
            p.add_le(eta.into(), sum);
        }
        (p, s, eta)
    }
}
