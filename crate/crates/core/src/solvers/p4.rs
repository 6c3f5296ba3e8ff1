//! Transmissive-coefficient block: rank-one-penalized SDP solved by DC
//! iterations, the relaxation-plus-randomization alternative, and rank-one
//! extraction.

use std::f64::consts::LN_2;

use nalgebra::SymmetricEigen;
use num_complex::Complex64;

use super::p2::{MIN_SLOT, RATE_MARGIN};
use super::{BcdSettings, SolverError};
use crate::channel::{complex_normal, CMatrix, CVector, ChannelSet};
use crate::convexcore::linearize::{hermitian_part, leading_eigenpair, spectral_norm};
use crate::convexcore::rate_sdp::{RateRow, RateSdp};
use crate::convexcore::{linearize_spectral_norm, rank_gap};
use crate::scenario::{stream, SeededStreams, SystemParams};
use crate::sysmodel::{rate_slot3, Allocation};

/// Weight of the current point in the barrier start; the rest comes from the
/// strictly feasible max-slack point.
const START_MIX: f64 = 0.99;

#[derive(Debug, Clone)]
pub struct P4Solution {
    pub s: CVector,
    pub s_mat: Option<CMatrix>,
    pub rank_gap: f64,
    /// `(1 + w) tr S - ||S||_2` after each DC iteration.
    pub dc_objectives: Vec<f64>,
    pub iterations: usize,
}

impl P4Solution {
    fn unchanged(s: &CVector) -> Self {
        Self {
            s: s.clone(),
            s_mat: None,
            rank_gap: 0.0,
            dc_objectives: Vec::new(),
            iterations: 0,
        }
    }
}

/// Rate rows of every user that sends bits through the metasurface.
fn rate_problem(
    params: &SystemParams,
    channels: &ChannelSet,
    alloc: &Allocation,
) -> Result<Option<RateSdp>, SolverError> {
    let mut rows = Vec::new();
    for k in 0..params.k {
        if alloc.d_m[k] <= 0.0 || alloc.t3[k] < MIN_SLOT {
            continue;
        }
        let terms: Vec<(usize, f64, f64)> = (0..params.n)
            .filter(|&n| alloc.b[(k, n)] > 0.0 && alloc.p3[(k, n)] > 0.0)
            .map(|n| (n, alloc.b[(k, n)], alloc.p3[(k, n)] / params.delta2))
            .collect();
        rows.push(RateRow {
            demand: alloc.d_m[k] * (1.0 + RATE_MARGIN) * LN_2 / (alloc.t3[k] * params.w),
            terms,
        });
    }
    if rows.is_empty() {
        return Ok(None);
    }
    Ok(Some(RateSdp::new(channels.v.clone(), rows)?))
}

/// `s = sqrt(lambda_1) u_1`, with magnitudes clipped to one.
pub fn extract_rank_one(s_mat: &CMatrix) -> CVector {
    let (lambda, u) = leading_eigenpair(s_mat);
    if lambda <= 0.0 {
        return CVector::zeros(s_mat.nrows());
    }
    (u * Complex64::new(lambda.sqrt(), 0.0)).map(|x| if x.norm() > 1.0 { x / x.norm() } else { x })
}

fn normalize_amplitude(s: CVector) -> CVector {
    let peak = s.iter().fold(0.0f64, |m, x| m.max(x.norm()));
    if peak > 0.0 {
        s / Complex64::new(peak, 0.0)
    } else {
        s
    }
}

/// Checks the slot III rate of every user against its bits.
fn rates_hold(params: &SystemParams, channels: &ChannelSet, alloc: &Allocation, s: &CVector) -> bool {
    (0..params.k).all(|k| {
        if alloc.d_m[k] <= 0.0 {
            return true;
        }
        let r: f64 = (0..params.n)
            .map(|n| rate_slot3(params, channels, alloc.b[(k, n)], alloc.p3[(k, n)], s, n))
            .sum();
        alloc.t3[k] * r >= alloc.d_m[k]
    })
}

struct DcRun {
    s_mat: CMatrix,
    gap: f64,
    objectives: Vec<f64>,
    iterations: usize,
}

/// DC iterations from `center`, which must be strictly feasible for `sdp`.
/// At least one step is taken.
fn dc_iterations(
    sdp: &RateSdp,
    center: &CMatrix,
    epsilon_rank: f64,
    settings: &BcdSettings,
) -> Result<DcRun, SolverError> {
    let m = sdp.dim();
    let w = settings.dc_trace_weight;
    let dc_value = |s: &CMatrix| (1.0 + w) * s.trace().re - spectral_norm(s);
    let mut run = DcRun {
        s_mat: center.clone(),
        gap: rank_gap(center),
        objectives: Vec::new(),
        iterations: 0,
    };
    while run.iterations == 0 || (run.gap > epsilon_rank && run.iterations < settings.dc_max_iters) {
        let lb = linearize_spectral_norm(&run.s_mat);
        let c = CMatrix::identity(m, m) * Complex64::new(1.0 + w, 0.0) - lb.gradient();
        let mut start = &run.s_mat * Complex64::new(START_MIX, 0.0) + center * Complex64::new(1.0 - START_MIX, 0.0);
        if !(sdp.min_slack(&start) > 0.0) {
            start = center.clone();
        }
        let next = sdp.minimize_linear(&c, &start, &settings.barrier)?;
        run.s_mat = hermitian_part(&next.s);
        run.iterations += 1;
        run.objectives.push(dc_value(&run.s_mat));
        run.gap = rank_gap(&run.s_mat);
    }
    Ok(run)
}

/// DC iterations on `min (1 + w) tr S - ||S||_2` over the rate-feasible
/// covariances, followed by rank-one extraction.
///
/// The iterations start from the covariance with the largest minimum rate
/// slack and keep a fraction of that slack (`dc_slack_floors`), so the
/// rank-one point they reach favours strong cascaded gains. The floor is
/// lowered when no rank-one point keeps it. The current coefficients are kept when they have more slack than
/// the extracted ones.
pub fn solve_p4_dc(
    params: &SystemParams,
    channels: &ChannelSet,
    alloc: &Allocation,
    settings: &BcdSettings,
) -> Result<P4Solution, SolverError> {
    let Some(sdp) = rate_problem(params, channels, alloc)? else {
        return Ok(P4Solution::unchanged(&alloc.s));
    };
    let current = &alloc.s * alloc.s.adjoint();
    let center = sdp.max_min_slack(Some(&current), &settings.barrier)?;
    if !(center.objective > 0.0) {
        return Err(SolverError::Infeasible(format!(
            "no covariance meets every slot III rate (best slack {:.3e})",
            center.objective
        )));
    }
    let floors: &[f64] = if settings.dc_slack_floors.is_empty() {
        &[0.0]
    } else {
        &settings.dc_slack_floors
    };
    let mut run = None;
    for &fraction in floors {
        let floored = sdp.with_slack_floor(fraction * center.objective);
        let attempt = dc_iterations(&floored, &center.s, params.epsilon_rank, settings)?;
        let done = attempt.gap <= params.epsilon_rank;
        run = Some(attempt);
        if done {
            break;
        }
    }
    let run = run.expect("at least one floor");
    let mut s = extract_rank_one(&run.s_mat);
    if settings.normalize_amplitude {
        s = normalize_amplitude(s);
    }
    if !rates_hold(params, channels, alloc, &s) {
        return Err(SolverError::Infeasible(format!(
            "extracted coefficients miss a slot III rate (rank gap {:.3e})",
            run.gap
        )));
    }
    if sdp.min_slack(&(&s * s.adjoint())) < sdp.min_slack(&current) {
        s = alloc.s.clone();
    }
    Ok(P4Solution {
        s,
        s_mat: Some(run.s_mat),
        rank_gap: run.gap,
        dc_objectives: run.objectives,
        iterations: run.iterations,
    })
}

/// Relaxed SDP with the largest minimum rate slack, then Gaussian
/// randomization around it. `draw` selects the random stream.
pub fn solve_p4_sdr(
    params: &SystemParams,
    channels: &ChannelSet,
    alloc: &Allocation,
    settings: &BcdSettings,
    streams: &SeededStreams,
    draw: u64,
) -> Result<P4Solution, SolverError> {
    let Some(sdp) = rate_problem(params, channels, alloc)? else {
        return Ok(P4Solution::unchanged(&alloc.s));
    };
    let current = &alloc.s * alloc.s.adjoint();
    let relaxed = sdp.max_min_slack(Some(&current), &settings.barrier)?;
    let s_mat = hermitian_part(&relaxed.s);
    let eig = SymmetricEigen::new(s_mat.clone());
    let m = sdp.dim();
    let root = CMatrix::from_fn(m, m, |i, j| {
        eig.eigenvectors[(i, j)] * Complex64::new(eig.eigenvalues[j].max(0.0).sqrt(), 0.0)
    });
    let mut rng = streams.stream(stream::SDR_RANDOMIZATION, draw, 0);
    let mut best: Option<(f64, CVector)> = None;
    for _ in 0..settings.sdr_candidates {
        let z = CVector::from_fn(m, |_, _| complex_normal(&mut rng));
        let xi = normalize_amplitude(&root * z);
        let slack = sdp.min_slack(&(&xi * xi.adjoint()));
        if slack >= 0.0 && best.as_ref().is_none_or(|(b, _)| slack > *b) {
            best = Some((slack, xi));
        }
    }
    let Some((_, s)) = best else {
        return Err(SolverError::Infeasible("no randomized candidate meets the rates".into()));
    };
    if !rates_hold(params, channels, alloc, &s) {
        return Err(SolverError::Infeasible("randomized candidate misses a rate".into()));
    }
    Ok(P4Solution {
        s,
        rank_gap: rank_gap(&s_mat),
        s_mat: Some(s_mat),
        dc_objectives: Vec::new(),
        iterations: 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::default_paper_params;
    use nalgebra::DMatrix;
    use rand::Rng;

    #[test]
    fn extraction_of_rank_one_recovers_vector() {
        let mut rng = SeededStreams::new(11).stream(80, 0, 0);
        let s0 = CVector::from_fn(6, |_, _| Complex64::from_polar(rng.random_range(0.1..1.0), rng.random_range(0.0..6.28)));
        let s = extract_rank_one(&(&s0 * s0.adjoint()));
        let phase = s0.dotc(&s);
        let aligned = &s * (phase.conj() / phase.norm());
        assert!((aligned - &s0).norm() < 1e-10 * s0.norm());
        assert_eq!(extract_rank_one(&CMatrix::zeros(3, 3)), CVector::zeros(3));
    }

    #[test]
    fn single_element_closed_form() {
        // K = 1, N = 1, M = 1 without a slack floor: the DC solve lands on
        // the smallest S meeting the rate, S = delta^2 (2^(d/(t W)) - 1) / (P |v|^2).
        let mut params = default_paper_params();
        params.k = 1;
        params.n = 1;
        params.mc = 1;
        params.mr = 1;
        params.d = vec![1e6];
        let v = 2e-5;
        let ch = ChannelSet::from_parts(
            DMatrix::from_element(1, 1, Complex64::new(1e-4, 0.0)),
            vec![CVector::from_element(1, Complex64::new(v, 0.0))],
            vec![CVector::from_element(1, Complex64::new(1.0, 0.0))],
        );
        let mut alloc = Allocation::all_local(&params, CVector::from_element(1, Complex64::new(1.0, 0.0)));
        alloc.b[(0, 0)] = 1.0;
        alloc.p3[(0, 0)] = 0.5;
        alloc.d_m[0] = 1e5;
        alloc.d_l[0] = 9e5;
        alloc.t3[0] = 0.1;
        let settings = BcdSettings {
            normalize_amplitude: false,
            dc_slack_floors: vec![0.0],
            ..BcdSettings::default()
        };
        let sol = solve_p4_dc(&params, &ch, &alloc, &settings).unwrap();
        let d = 1e5 * (1.0 + RATE_MARGIN);
        let expect = params.delta2 * (2f64.powf(d / (0.1 * params.w)) - 1.0) / (0.5 * v * v);
        let got = sol.s_mat.unwrap()[(0, 0)].re;
        assert!((got / expect - 1.0).abs() < 1e-6, "{got} vs {expect}");
        assert!(sol.rank_gap.abs() < 1e-12);
    }

    #[test]
    fn dc_objective_does_not_increase() {
        let mut rng = SeededStreams::new(5).stream(81, 0, 0);
        let mut params = default_paper_params();
        params.k = 2;
        params.n = 2;
        params.mc = 2;
        params.mr = 2;
        params.d = vec![1e6; 2];
        let g: Vec<CVector> = (0..2).map(|_| CVector::from_fn(4, |_, _| complex_normal(&mut rng) * 1e-4)).collect();
        let hf: Vec<CVector> = (0..2).map(|_| CVector::from_fn(4, |_, _| complex_normal(&mut rng))).collect();
        let ch = ChannelSet::from_parts(DMatrix::from_element(2, 2, Complex64::new(1e-4, 0.0)), g, hf);
        let s0 = CVector::from_element(4, Complex64::new(1.0, 0.0));
        let mut alloc = Allocation::all_local(&params, s0);
        for k in 0..2 {
            alloc.b[(k, k)] = 1.0;
            alloc.p3[(k, k)] = 0.5;
            alloc.d_m[k] = 5e4;
            alloc.d_l[k] = 1e6 - 5e4;
            alloc.t3[k] = 0.1;
        }
        let settings = BcdSettings {
            dc_slack_floors: vec![0.0],
            ..BcdSettings::default()
        };
        let sol = solve_p4_dc(&params, &ch, &alloc, &settings).unwrap();
        assert!(!sol.dc_objectives.is_empty());
        for w in sol.dc_objectives.windows(2) {
            assert!(w[1] <= w[0] + 1e-7 * w[0].abs().max(1.0), "{} -> {}", w[0], w[1]);
        }
        assert!(sol.rank_gap <= params.epsilon_rank);
        assert!(rates_hold(&params, &ch, &alloc, &sol.s));
        assert!(sol.s.iter().all(|x| x.norm() <= 1.0 + 1e-12));
    }

    proptest::proptest! {
        #[test]
        fn extraction_error_is_bounded_by_rank_gap(seed in 0u64..500, eps in 0.0f64..0.05) {
            let mut rng = SeededStreams::new(seed).stream(82, 0, 0);
            let x = CVector::from_fn(5, |_, _| complex_normal(&mut rng) * 0.3);
            let e = CMatrix::from_fn(5, 2, |_, _| complex_normal(&mut rng) * 0.3);
            let s_mat = &x * x.adjoint() + &e * e.adjoint() * Complex64::new(eps, 0.0);
            let s = extract_rank_one(&s_mat);
            let clipped = s.iter().any(|v| (v.norm() - 1.0).abs() < 1e-12);
            proptest::prop_assume!(!clipped);
            let residual = (&s_mat - &s * s.adjoint()).norm();
            let bound = s_mat.trace().re * rank_gap(&s_mat);
            proptest::prop_assert!(residual <= bound + 1e-12, "{} > {}", residual, bound);
        }
    }
}
