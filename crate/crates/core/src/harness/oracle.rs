//! Exhaustive subcarrier and power search for tiny instances.

use nalgebra::DMatrix;

use super::HarnessError;
use crate::channel::ChannelSet;
use crate::scenario::SystemParams;
use crate::sysmodel::Allocation;

pub const MAX_ORACLE_USERS: usize = 2;
pub const MAX_ORACLE_SUBCARRIERS: usize = 2;
pub const MAX_GRID_LEVELS: usize = 400;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    /// Least transmit energy over all binary assignments, J; `None` when no
    /// assignment meets the rates.
    pub energy: Option<f64>,
    pub a: Option<DMatrix<f64>>,
    pub b: Option<DMatrix<f64>>,
}

/// Smallest total power on `gains` (SNR per watt) that carries `rate` bits/s
/// within `cap` watts. All subcarriers but the last are gridded over
/// `[0, cap]`; the last one is solved exactly.
fn leg_power(w: f64, rate: f64, gains: &[f64], cap: f64, levels: usize) -> Option<f64> {
    if rate <= 0.0 {
        return Some(0.0);
    }
    let invert = |bits: f64, g: f64| (2f64.powf(bits / w) - 1.0) / g;
    match gains {
        [] => None,
        [g] => Some(invert(rate, *g)).filter(|&p| p <= cap),
        [head @ .., last] => {
            let mut best: Option<f64> = None;
            for i in 0..=levels {
                let p0 = cap * i as f64 / levels as f64;
                let carried = w * (1.0 + p0 * head[0]).log2();
                let rest = leg_power(w, (rate - carried).max(0.0), &[&head[1..], &[*last][..]].concat(), cap - p0, levels);
                if let Some(pr) = rest {
                    let total = p0 + pr;
                    if total <= cap && best.is_none_or(|b| total < b) {
                        best = Some(total);
                    }
                }
            }
            best
        }
    }
}

/// Enumerates every binary slot I/II and slot III assignment of a tiny
/// instance and grids the powers, with the task split, slot lengths and
/// coefficients taken from `alloc`. Returns the least transmit energy.
pub fn oracle_p2_grid(
    params: &SystemParams,
    channels: &ChannelSet,
    alloc: &Allocation,
    grid_levels: usize,
) -> Result<OracleResult, HarnessError> {
    let (k_count, n_count) = (params.k, params.n);
    if k_count > MAX_ORACLE_USERS || n_count > MAX_ORACLE_SUBCARRIERS {
        return Err(HarnessError::InvalidSpec(format!(
            "oracle supports at most {MAX_ORACLE_USERS} users and {MAX_ORACLE_SUBCARRIERS} subcarriers"
        )));
    }
    if grid_levels == 0 || grid_levels > MAX_GRID_LEVELS {
        return Err(HarnessError::InvalidSpec(format!("grid levels must be in 1..={MAX_GRID_LEVELS}")));
    }
    let w = params.w;
    let g_relay = |k: usize, n: usize| channels.relay_gain2(k, n) / params.sigma2;
    let g_rms = |n: usize| channels.cascade_gain2(n, &alloc.s) / params.delta2;
    let rate = |bits: f64, time: f64| if bits > 0.0 { bits / time } else { 0.0 };

    // owner[n] == k_count means the subcarrier is unused.
    let assignments: Vec<Vec<usize>> = (0..(k_count + 1).pow(n_count as u32))
        .map(|mut code| {
            (0..n_count)
                .map(|_| {
                    let o = code % (k_count + 1);
                    code /= k_count + 1;
                    o
                })
                .collect()
        })
        .collect();
    let owned = |owner: &[usize], k: usize| -> Vec<usize> { (0..n_count).filter(|&n| owner[n] == k).collect() };
    let to_matrix = |owner: &[usize]| DMatrix::from_fn(k_count, n_count, |k, n| f64::from(owner[n] == k));

    // Slot I/II energy of every user-side assignment.
    let mut best_a: Option<(f64, &Vec<usize>)> = None;
    for owner in &assignments {
        let mut energy = 0.0;
        let mut ok = true;
        for k in 0..k_count {
            let gains: Vec<f64> = owned(owner, k).iter().map(|&n| g_relay(k, n)).collect();
            let legs = [(alloc.d_r[k], alloc.t1[k]), (alloc.d_m[k], alloc.t2[k])];
            for (bits, time) in legs {
                if bits <= 0.0 {
                    continue;
                }
                match leg_power(w, rate(bits, time), &gains, params.p_t_max, grid_levels) {
                    Some(p) => energy += p * time,
                    None => ok = false,
                }
            }
        }
        if ok && best_a.is_none_or(|(e, _)| energy < e) {
            best_a = Some((energy, owner));
        }
    }

    // Slot III: each user's least power also leaves the most relay budget,
    // so the shared cap only filters assignments.
    let mut best_b: Option<(f64, &Vec<usize>)> = None;
    for owner in &assignments {
        let mut energy = 0.0;
        let mut power = 0.0;
        let mut ok = true;
        for k in 0..k_count {
            if alloc.d_m[k] <= 0.0 {
                continue;
            }
            let gains: Vec<f64> = owned(owner, k).iter().map(|&n| g_rms(n)).collect();
            match leg_power(w, rate(alloc.d_m[k], alloc.t3[k]), &gains, params.p_r_max, grid_levels) {
                Some(p) => {
                    energy += p * alloc.t3[k];
                    power += p;
                }
                None => ok = false,
            }
        }
        if ok && power <= params.p_r_max && best_b.is_none_or(|(e, _)| energy < e) {
            best_b = Some((energy, owner));
        }
    }

    Ok(match (best_a, best_b) {
        (Some((ea, oa)), Some((eb, ob))) => OracleResult {
            energy: Some(ea + eb),
            a: Some(to_matrix(oa)),
            b: Some(to_matrix(ob)),
        },
        _ => OracleResult {
            energy: None,
            a: None,
            b: None,
        },
    })
}
