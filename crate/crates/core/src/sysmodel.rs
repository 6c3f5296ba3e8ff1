//! Rates, energies, the total objective and full constraint checking for a
//! candidate [`Allocation`].
//!
//! Powers are stored as actual per-subcarrier powers. With fractional shares
//! the relaxed auxiliary power is `share * power`, so the same formulas cover
//! the relaxed and the integral forms.

use std::f64::consts::LN_2;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::channel::{CMatrix, CVector, ChannelSet};
use crate::scenario::SystemParams;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("no computing time left: t1 = {t1} >= T = {t}")]
    NoComputeTime { t1: f64, t: f64 },
    #[error("CPU frequency must be positive, got {0}")]
    NonPositiveFrequency(f64),
}

/// One full decision point.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    /// Slot I/II subcarrier shares, `K x N`.
    pub a: DMatrix<f64>,
    /// Slot III subcarrier shares, `K x N`.
    pub b: DMatrix<f64>,
    pub p1: DMatrix<f64>,
    pub p2: DMatrix<f64>,
    pub p3: DMatrix<f64>,
    pub d_l: Vec<f64>,
    pub d_r: Vec<f64>,
    pub d_m: Vec<f64>,
    pub t1: Vec<f64>,
    pub t2: Vec<f64>,
    pub t3: Vec<f64>,
    pub t4: Vec<f64>,
    /// Transmissive coefficients.
    pub s: CVector,
    /// Covariance from the last semidefinite solve, if any.
    pub s_mat: Option<CMatrix>,
}

impl Allocation {
    /// Everything computed locally, all powers and offload slots zero.
    pub fn all_local(params: &SystemParams, s: CVector) -> Self {
        let (k, n) = (params.k, params.n);
        Self {
            a: DMatrix::zeros(k, n),
            b: DMatrix::zeros(k, n),
            p1: DMatrix::zeros(k, n),
            p2: DMatrix::zeros(k, n),
            p3: DMatrix::zeros(k, n),
            d_l: params.d.clone(),
            d_r: vec![0.0; k],
            d_m: vec![0.0; k],
            t1: vec![0.0; k],
            t2: vec![0.0; k],
            t3: vec![0.0; k],
            t4: vec![0.0; k],
            s,
            s_mat: None,
        }
    }

    pub fn k(&self) -> usize {
        self.a.nrows()
    }

    pub fn n(&self) -> usize {
        self.a.ncols()
    }

    /// True when every share is exactly 0 or 1.
    pub fn is_binary(&self) -> bool {
        self.a.iter().chain(self.b.iter()).all(|&x| x == 0.0 || x == 1.0)
    }
}

/// `a W log2(1 + p g / noise)`.
pub fn shannon_rate(w: f64, noise: f64, gain2: f64, share: f64, power: f64) -> f64 {
    if share <= 0.0 || power <= 0.0 {
        return 0.0;
    }
    share * w * (power * gain2 / noise).ln_1p() / LN_2
}

/// Relaxed form `a W log2(1 + p~ g / (a noise))`, zero at `a = 0`.
pub fn perspective_rate(w: f64, noise: f64, gain2: f64, share: f64, aux_power: f64) -> f64 {
    if share <= 0.0 {
        return 0.0;
    }
    share * w * (aux_power * gain2 / (share * noise)).ln_1p() / LN_2
}

/// Slot I rate of one subcarrier.
pub fn rate_slot1(params: &SystemParams, h_gain2: f64, a: f64, p: f64) -> f64 {
    shannon_rate(params.w, params.sigma2, h_gain2, a, p)
}

/// Slot II rate of one subcarrier.
pub fn rate_slot2(params: &SystemParams, h_gain2: f64, a: f64, p: f64) -> f64 {
    shannon_rate(params.w, params.sigma2, h_gain2, a, p)
}

/// Slot III rate of subcarrier `n` through the metasurface with coefficients `s`.
pub fn rate_slot3(
    params: &SystemParams,
    channels: &ChannelSet,
    b: f64,
    p: f64,
    s: &CVector,
    n: usize,
) -> f64 {
    shannon_rate(params.w, params.delta2, channels.cascade_gain2(n, s), b, p)
}

/// Slot III rate with the lifted covariance `S` in place of `s s^H`.
pub fn rate_slot3_cov(
    params: &SystemParams,
    channels: &ChannelSet,
    b: f64,
    p: f64,
    s_mat: &CMatrix,
    n: usize,
) -> f64 {
    let gain = channels.cascade_gain2_cov(n, s_mat).max(0.0);
    shannon_rate(params.w, params.delta2, gain, b, p)
}

/// Per-user rate sums `(R1, R2, R3)` in bits/s.
pub fn user_rates(
    params: &SystemParams,
    channels: &ChannelSet,
    alloc: &Allocation,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let cascade: Vec<f64> = (0..params.n)
        .map(|n| channels.cascade_gain2(n, &alloc.s))
        .collect();
    let mut r1 = vec![0.0; params.k];
    let mut r2 = vec![0.0; params.k];
    let mut r3 = vec![0.0; params.k];
    for k in 0..params.k {
        for n in 0..params.n {
            let h = channels.relay_gain2(k, n);
            r1[k] += rate_slot1(params, h, alloc.a[(k, n)], alloc.p1[(k, n)]);
            r2[k] += rate_slot2(params, h, alloc.a[(k, n)], alloc.p2[(k, n)]);
            r3[k] += shannon_rate(
                params.w,
                params.delta2,
                cascade[n],
                alloc.b[(k, n)],
                alloc.p3[(k, n)],
            );
        }
    }
    (r1, r2, r3)
}

/// Offloading transmit energy per user, J.
pub fn offload_energy(alloc: &Allocation) -> Vec<f64> {
    (0..alloc.k())
        .map(|k| {
            let mut e = 0.0;
            for n in 0..alloc.n() {
                e += alloc.a[(k, n)] * alloc.p1[(k, n)] * alloc.t1[k]
                    + alloc.a[(k, n)] * alloc.p2[(k, n)] * alloc.t2[k]
                    + alloc.b[(k, n)] * alloc.p3[(k, n)] * alloc.t3[k];
            }
            e
        })
        .collect()
}

/// Local computing energy at the equal-frequency optimum, J.
pub fn local_compute_energy(params: &SystemParams, d_l: f64, t: f64) -> f64 {
    params.alpha_t * (params.c_t * d_l).powi(3) / (t * t)
}

/// Local CPU frequency limit.
pub fn local_cpu_ok(params: &SystemParams, d_l: f64, t: f64) -> bool {
    params.c_t * d_l / t <= params.f_t_max
}

/// Relay-side computing energy for `d_r` bits in the time left after slot I, J.
pub fn cn_compute_energy(params: &SystemParams, d_r: f64, t1: f64) -> Result<f64, ModelError> {
    if t1 >= params.t {
        return Err(ModelError::NoComputeTime { t1, t: params.t });
    }
    let rest = params.t - t1;
    Ok(params.alpha_r * (params.c_r * d_r).powi(3) / (rest * rest))
}

/// Aggregate relay CPU frequency needed by all users.
pub fn cn_cpu_load(params: &SystemParams, d_r: &[f64], t1: &[f64]) -> f64 {
    d_r.iter()
        .zip(t1)
        .map(|(&d, &t1)| ratio(params.c_r * d, params.t - t1))
        .sum()
}

/// Edge-server execution time for `d_m` bits at frequency `f`, s.
pub fn mec_slot_time(params: &SystemParams, d_m: f64, f: f64) -> Result<f64, ModelError> {
    if f <= 0.0 {
        return Err(ModelError::NonPositiveFrequency(f));
    }
    Ok(params.c_m * d_m / f)
}

/// Aggregate edge-server CPU frequency needed by all users.
pub fn mec_cpu_load(params: &SystemParams, d_m: &[f64], t4: &[f64]) -> f64 {
    d_m.iter()
        .zip(t4)
        .map(|(&d, &t4)| ratio(params.c_m * d, t4))
        .sum()
}

/// `num / den` with `0 / 0 = 0` and `x / 0 = inf` for `x > 0`.
fn ratio(num: f64, den: f64) -> f64 {
    if num <= 0.0 {
        0.0
    } else if den <= 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

/// Per-user energy terms `(offload, local, relay computing)`.
pub fn energy_terms(alloc: &Allocation, params: &SystemParams) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let off = offload_energy(alloc);
    let local = alloc
        .d_l
        .iter()
        .map(|&d| local_compute_energy(params, d.max(0.0), params.t))
        .collect();
    let cn = alloc
        .d_r
        .iter()
        .zip(&alloc.t1)
        .map(|(&d, &t1)| {
            if d <= 0.0 {
                0.0
            } else {
                cn_compute_energy(params, d, t1).unwrap_or(f64::INFINITY)
            }
        })
        .collect();
    (off, local, cn)
}

/// Total energy of task nodes and relay, J. Edge-server energy is not counted.
pub fn total_objective(alloc: &Allocation, params: &SystemParams) -> f64 {
    let (off, local, cn) = energy_terms(alloc, params);
    off.iter().sum::<f64>() + local.iter().sum::<f64>() + cn.iter().sum::<f64>()
}

/// Signed residual `lhs - rhs` of one constraint instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    pub name: &'static str,
    pub index: Option<usize>,
    pub residual: f64,
    /// Natural scale the residual is measured against.
    pub scale: f64,
}

impl Residual {
    pub fn relative(&self) -> f64 {
        self.residual / self.scale
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    pub entries: Vec<Residual>,
    pub max_violation: f64,
    pub tol: f64,
    pub feasible: bool,
}

impl FeasibilityReport {
    fn new(entries: Vec<Residual>, tol: f64) -> Self {
        let max_violation = entries
            .iter()
            .map(|e| {
                let r = e.relative();
                if r.is_nan() {
                    f64::INFINITY
                } else {
                    r.max(0.0)
                }
            })
            .fold(0.0, f64::max);
        Self {
            entries,
            max_violation,
            tol,
            feasible: max_violation <= tol,
        }
    }

    /// Largest relative residual among entries with the given name.
    pub fn worst(&self, name: &str) -> Option<f64> {
        self.entries
            .iter()
            .filter(|e| e.name == name)
            .map(Residual::relative)
            .reduce(f64::max)
    }

    /// Entries whose relative residual exceeds the tolerance.
    pub fn violations(&self) -> impl Iterator<Item = &Residual> {
        self.entries.iter().filter(move |e| !(e.relative() <= self.tol))
    }
}

impl fmt::Display for FeasibilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "feasible = {}  max_violation = {:.3e}  tol = {:.1e}",
            self.feasible, self.max_violation, self.tol
        )?;
        for e in &self.entries {
            let idx = e.index.map_or(String::new(), |i| format!("[{i}]"));
            let flag = if e.relative() <= self.tol { "ok" } else { "VIOLATED" };
            writeln!(
                f,
                "{:<10}{:<6} residual = {:>12.4e}  scale = {:.3e}  {}",
                e.name, idx, e.residual, e.scale, flag
            )?;
        }
        Ok(())
    }
}

/// Evaluates every constraint of the full problem.
pub fn check_feasibility(
    alloc: &Allocation,
    params: &SystemParams,
    channels: &ChannelSet,
    tol: f64,
) -> FeasibilityReport {
    let (k_count, n_count) = (params.k, params.n);
    let mut out = Vec::new();
    let mut push = |name: &'static str, index: Option<usize>, residual: f64, scale: f64| {
        out.push(Residual {
            name,
            index,
            residual,
            scale,
        });
    };
    let (r1, r2, r3) = user_rates(params, channels, alloc);
    for k in 0..k_count {
        let bits = params.d[k].max(1.0);
        let sum = alloc.d_l[k] + alloc.d_r[k] + alloc.d_m[k];
        push("eq1", Some(k), (sum - params.d[k]).abs(), bits);
        let t_sum = alloc.t1[k] + alloc.t2[k] + alloc.t3[k] + alloc.t4[k];
        push("eq2", Some(k), t_sum - params.t, params.t);
        push("eq6_38b", Some(k), alloc.d_r[k] - alloc.t1[k] * r1[k], bits);
        push("eq23_40c", Some(k), alloc.d_m[k] - alloc.t2[k] * r2[k], bits);
        push("eq23_40d", Some(k), alloc.d_m[k] - alloc.t3[k] * r3[k], bits);
        let row_sum = |m: &DMatrix<f64>, p: &DMatrix<f64>| -> f64 {
            (0..n_count).map(|n| m[(k, n)] * p[(k, n)]).sum()
        };
        push("eq8", Some(k), row_sum(&alloc.a, &alloc.p1) - params.p_t_max, params.p_t_max);
        push("eq11", Some(k), row_sum(&alloc.a, &alloc.p2) - params.p_t_max, params.p_t_max);
        push(
            "eq32_38k",
            Some(k),
            params.c_t * alloc.d_l[k] / params.t - params.f_t_max,
            params.f_t_max,
        );
        let min_bits = alloc.d_l[k].min(alloc.d_r[k]).min(alloc.d_m[k]);
        push("nonneg_d", Some(k), -min_bits, bits);
        let min_t = alloc.t1[k].min(alloc.t2[k]).min(alloc.t3[k]).min(alloc.t4[k]);
        push("nonneg_t", Some(k), -min_t, params.t);
    }
    let relay_power: f64 = alloc.b.component_mul(&alloc.p3).sum();
    push("eq22", None, relay_power - params.p_r_max, params.p_r_max);
    for n in 0..n_count {
        push("eq4", Some(n), alloc.a.column(n).sum() - 1.0, 1.0);
        push("eq20", Some(n), alloc.b.column(n).sum() - 1.0, 1.0);
    }
    let share_out = alloc
        .a
        .iter()
        .chain(alloc.b.iter())
        .map(|&x| (-x).max(x - 1.0))
        .fold(f64::NEG_INFINITY, f64::max);
    push("shares", None, share_out, 1.0);
    let min_p = alloc
        .p1
        .iter()
        .chain(alloc.p2.iter())
        .chain(alloc.p3.iter())
        .fold(f64::INFINITY, |m, &x| m.min(x));
    push("nonneg_p", None, -min_p, params.p_t_max.max(params.p_r_max));
    push(
        "eq35_38l",
        None,
        cn_cpu_load(params, &alloc.d_r, &alloc.t1) - params.f_r_max,
        params.f_r_max,
    );
    push(
        "eq37_38m",
        None,
        mec_cpu_load(params, &alloc.d_m, &alloc.t4) - params.f_m_max,
        params.f_m_max,
    );
    for (m, s) in alloc.s.iter().enumerate() {
        push("eq13_38p", Some(m), s.norm() - 1.0, 1.0);
    }
    FeasibilityReport::new(out, tol)
}

/// Unit-modulus vector with the given phases.
pub fn phases_to_vector(phases: &[f64]) -> CVector {
    CVector::from_iterator(phases.len(), phases.iter().map(|&th| Complex64::from_polar(1.0, th)))
}
