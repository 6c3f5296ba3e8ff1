//! Constructive feasible starting point.

use nalgebra::DMatrix;
use rand::Rng;
use std::f64::consts::PI;

use super::{Scheme, SolverError};
use crate::channel::{CVector, ChannelSet};
use crate::scenario::{stream, SeededStreams, SystemParams};
use crate::sysmodel::{phases_to_vector, user_rates, Allocation};

/// Unit-modulus coefficients with i.i.d. uniform phases.
pub fn random_phases(m: usize, streams: &SeededStreams) -> CVector {
    let mut rng = streams.stream(stream::INIT_PHASE, 0, 0);
    let phases: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
    phases_to_vector(&phases)
}

/// Round-robin subcarriers with equal powers, then a per-user task split
/// that balances each offloading leg against its rate and CPU budgets.
///
/// Each user gets an equal share of the relay and edge CPUs. The edge leg
/// moves bits at `Q = 1 / (1/R2 + 1/R3 + c_m/F_m)` per second of the time left
/// after slot I; slot I is opened only when the relay path is faster than
/// that, and is sized so the relay finishes computing exactly at `T`. A
/// fraction of both offloading capacities is then used, enough to respect
/// the local CPU limit.
pub fn init_point(
    params: &SystemParams,
    channels: &ChannelSet,
    scheme: &Scheme,
    streams: &SeededStreams,
) -> Result<Allocation, SolverError> {
    let (k_count, n_count) = (params.k, params.n);
    let s = random_phases(channels.m(), streams);
    let mut alloc = Allocation::all_local(params, s);
    let offload = scheme.relay_compute || scheme.mec;
    if offload {
        let owned = n_count.div_ceil(k_count) as f64;
        alloc.a = DMatrix::from_fn(k_count, n_count, |k, n| f64::from(n % k_count == k));
        alloc.b = alloc.a.clone();
        alloc.p1 = &alloc.a * (params.p_t_max / owned);
        alloc.p2 = alloc.p1.clone();
        if scheme.mec {
            alloc.p3 = &alloc.b * (params.p_r_max / n_count as f64);
        }
        if !scheme.relay_compute {
            alloc.p1.fill(0.0);
        }
        if !scheme.mec {
            alloc.p2.fill(0.0);
            alloc.b.fill(0.0);
        }
    }
    let (r1, r2, r3) = user_rates(params, channels, &alloc);
    let f_r = params.f_r_max / k_count as f64;
    let f_m = params.f_m_max / k_count as f64;
    let t_total = params.t;
    let cap_l = params.local_capacity();
    for k in 0..k_count {
        let demand = params.d[k];
        let q = if scheme.mec && r2[k] > 0.0 && r3[k] > 0.0 {
            1.0 / (1.0 / r2[k] + 1.0 / r3[k] + params.c_m / f_m)
        } else {
            0.0
        };
        let t1 = if scheme.relay_compute && r1[k] > q {
            f_r * t_total / (params.c_r * r1[k] + f_r)
        } else {
            0.0
        };
        let rest = t_total - t1;
        let cap_r = (t1 * r1[k]).min(f_r * rest / params.c_r);
        let cap_m = rest * q;
        let cap_off = cap_r + cap_m;
        if demand - cap_off > cap_l {
            return Err(SolverError::ScenarioInfeasible {
                user: k,
                missing: demand - cap_off - cap_l,
            });
        }
        let lambda = if cap_off > 0.0 && demand > 0.0 {
            let need = (demand - cap_l) / cap_off;
            (demand / cap_off)
                .min(need.max(2.0 * demand / (3.0 * cap_off)))
                .min(1.0)
                .max(0.0)
        } else {
            0.0
        };
        alloc.d_r[k] = lambda * cap_r;
        alloc.d_m[k] = lambda * cap_m;
        alloc.d_l[k] = (demand - alloc.d_r[k] - alloc.d_m[k]).max(0.0);
        alloc.t1[k] = if alloc.d_r[k] > 0.0 { t1 } else { 0.0 };
        if q > 0.0 && alloc.d_m[k] > 0.0 {
            alloc.t2[k] = rest * q / r2[k];
            alloc.t3[k] = rest * q / r3[k];
            alloc.t4[k] = rest * q * params.c_m / f_m;
        }
        // Users that offload nothing keep no slots and no power.
        if alloc.d_r[k] == 0.0 {
            alloc.p1.row_mut(k).fill(0.0);
        }
        if alloc.d_m[k] == 0.0 {
            alloc.p2.row_mut(k).fill(0.0);
            alloc.p3.row_mut(k).fill(0.0);
        }
        if alloc.d_r[k] == 0.0 && alloc.d_m[k] == 0.0 {
            alloc.a.row_mut(k).fill(0.0);
        }
        if alloc.d_m[k] == 0.0 {
            alloc.b.row_mut(k).fill(0.0);
        }
    }
    Ok(alloc)
}
