//! End-to-end acceptance checks at the reference scenario. Prints one
//! pass/fail line per check and exits non-zero when any fails.
//!
//! The 20-seed benchmark runs are computed once and shared by the descent,
//! rank-gap, ordering and feasibility checks.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;

use rmsmec_core::benchmarks::{capacity, run_benchmark, BenchmarkId, BenchmarkOutcome};
use rmsmec_core::channel::{complex_normal, CMatrix, CVector, ChannelSet};
use rmsmec_core::convexcore::linearize::{
    linearize_spectral_norm, taylor_ratio_coeffs, taylor_ratio_mec_coeffs, taylor_ratio_upper, taylor_ratio_upper_mec,
};
use rmsmec_core::convexcore::SolverSettings;
use rmsmec_core::harness::sweep::scenario_channels;
use rmsmec_core::harness::{oracle_p2_grid, run_sweep, summarize, Measure, SummaryRow, SweepParam, SweepSpec};
use rmsmec_core::scenario::{default_paper_params, SeededStreams, SystemParams};
use rmsmec_core::solvers::{round_and_repair, solve_p2, solve_p4_dc, BcdSettings};
use rmsmec_core::sysmodel::{
    check_feasibility, cn_compute_energy, local_compute_energy, perspective_rate, shannon_rate, Allocation,
};

const SEEDS: u64 = 20;
const TREND_TOL: f64 = 0.02;
const FEAS_TOL: f64 = 1e-6;
const RANDOM_POINTS: usize = 1000;

struct Check {
    label: &'static str,
    pass: bool,
    detail: String,
}

fn rng(tag: u64) -> rand_chacha::ChaCha8Rng {
    SeededStreams::new(9000 + tag).stream(tag, 0, 0)
}

fn log_uniform(r: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    (r.random_range(lo.ln()..hi.ln())).exp()
}

/// `a <= b` up to the one-sided tolerance, taken relative to the larger value.
fn le(a: f64, b: f64) -> bool {
    a - b <= TREND_TOL * a.abs().max(b.abs())
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

struct SeedRun {
    params: SystemParams,
    channels: ChannelSet,
    outcomes: Vec<BenchmarkOutcome>,
    proposed_time: Duration,
}

fn reference_run(seed: u64) -> SeedRun {
    let mut params = default_paper_params();
    params.seed = seed;
    let channels = scenario_channels(&params);
    let settings = BcdSettings::default();
    let mut outcomes = Vec::new();
    let mut proposed_time = Duration::ZERO;
    for id in BenchmarkId::ALL {
        let start = Instant::now();
        let out = run_benchmark(id, &params, &channels, &settings)
            .unwrap_or_else(|e| panic!("seed {seed} {id}: {e}"));
        if id == BenchmarkId::Proposed {
            proposed_time = start.elapsed();
        }
        outcomes.push(out);
    }
    SeedRun {
        params,
        channels,
        outcomes,
        proposed_time,
    }
}

fn outcome(run: &SeedRun, id: BenchmarkId) -> &BenchmarkOutcome {
    run.outcomes.iter().find(|o| o.id == id).expect("every benchmark ran")
}

fn descent(runs: &[SeedRun]) -> Check {
    let mut worst_rise = f64::NEG_INFINITY;
    let mut max_iters = 0;
    let mut max_time = Duration::ZERO;
    let mut pass = true;
    for run in runs {
        let state = outcome(run, BenchmarkId::Proposed).state.as_ref().expect("descent state");
        let mut prev = state.initial_objective;
        for &v in &state.trace {
            worst_rise = worst_rise.max(v - prev);
            prev = v;
        }
        max_iters = max_iters.max(state.iteration);
        max_time = max_time.max(run.proposed_time);
        pass &= state.converged && state.iteration <= 50 && run.proposed_time <= Duration::from_secs(120);
    }
    pass &= worst_rise <= 1e-9;
    Check {
        label: "descent is monotone and converges",
        pass,
        detail: format!(
            "worst step rise {worst_rise:.2e} J, at most {max_iters} iterations, slowest run {max_time:.1?}"
        ),
    }
}

/// Central-difference Hessian of `f` in log-scaled coordinates around `x`.
fn scaled_hessian(f: impl Fn(f64, f64) -> f64, x: (f64, f64), h: f64) -> DMatrix<f64> {
    let g = |u: f64, v: f64| f(x.0 * (1.0 + u), x.1 * (1.0 + v));
    let h11 = (g(h, 0.0) - 2.0 * g(0.0, 0.0) + g(-h, 0.0)) / (h * h);
    let h22 = (g(0.0, h) - 2.0 * g(0.0, 0.0) + g(0.0, -h)) / (h * h);
    let h12 = (g(h, h) - g(h, -h) - g(-h, h) + g(-h, -h)) / (4.0 * h * h);
    DMatrix::from_row_slice(2, 2, &[h11, h12, h12, h22])
}

fn curvature() -> Check {
    let mut r = rng(1);
    let (w, noise) = (1e6, 1e-10);
    let mut worst_concave = f64::NEG_INFINITY;
    for _ in 0..RANDOM_POINTS {
        let gain2 = log_uniform(&mut r, 1e-9, 1e-6);
        let a = r.random_range(0.05..1.0);
        let p = log_uniform(&mut r, 1e-3, 10.0);
        let hess = scaled_hessian(|a, p| perspective_rate(w, noise, gain2, a, p), (a, p), 1e-4);
        let eig = SymmetricEigen::new(hess).eigenvalues;
        let scale = eig.amax().max(f64::MIN_POSITIVE);
        worst_concave = worst_concave.max(eig.max() / scale);
    }
    let params = default_paper_params();
    let mut worst_convex = f64::NEG_INFINITY;
    let mut worst_flat = 0.0f64;
    for _ in 0..RANDOM_POINTS {
        let d = log_uniform(&mut r, 1e4, 1e6);
        let t1 = r.random_range(0.01..0.9);
        // Second coordinate is the compute time T - t1, which keeps the
        // log-scaling away from t1 = 0.
        let f = |d: f64, rest: f64| cn_compute_energy(&params, d, params.t - rest).expect("interior point");
        let hess = scaled_hessian(f, (d, params.t - t1), 1e-4);
        let eig = SymmetricEigen::new(hess).eigenvalues;
        let scale = eig.amax().max(f64::MIN_POSITIVE);
        worst_convex = worst_convex.max(-eig.min() / scale);
        worst_flat = worst_flat.max(eig.iter().fold(f64::INFINITY, |m, &e| m.min(e.abs())) / scale);
    }
    let pass = worst_concave <= 1e-6 && worst_convex <= 1e-6 && worst_flat <= 1e-6;
    Check {
        label: "rate concavity and compute-energy convexity",
        pass,
        detail: format!(
            "rate max eig/scale {worst_concave:.1e}; energy min eig/scale {:.1e}, smallest |eig|/scale {worst_flat:.1e}",
            -worst_convex
        ),
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn tangency() -> Check {
    let mut r = rng(2);
    let t_total = 1.0;
    let mut worst = 0.0f64;
    for _ in 0..RANDOM_POINTS {
        let c = log_uniform(&mut r, 1e2, 1e4);
        let d0 = log_uniform(&mut r, 1e4, 1e6);
        let t0 = r.random_range(0.01..0.95);

        let orig = |d: f64, t: f64| c * d / (t_total - t);
        let (hd, ht) = (1e-4 * d0, 1e-5 * (t_total - t0));
        let fd_d = (orig(d0 + hd, t0) - orig(d0 - hd, t0)) / (2.0 * hd);
        let fd_t = (orig(d0, t0 + ht) - orig(d0, t0 - ht)) / (2.0 * ht);
        let (c_d, c_t, c_0) = taylor_ratio_coeffs(d0, t0, c, t_total);
        let surrogate = |d: f64, t: f64| taylor_ratio_upper(d0, t0, d, t, c, t_total);
        let sd = (surrogate(d0 + hd, t0) - surrogate(d0 - hd, t0)) / (2.0 * hd);
        let st = (surrogate(d0, t0 + ht) - surrogate(d0, t0 - ht)) / (2.0 * ht);
        for e in [
            rel(surrogate(d0, t0), orig(d0, t0)),
            rel(c_d * d0 + c_t * t0 + c_0, orig(d0, t0)),
            rel(c_d, fd_d),
            rel(c_t, fd_t),
            rel(sd, fd_d),
            rel(st, fd_t),
        ] {
            worst = worst.max(e);
        }

        let orig = |d: f64, t: f64| c * d / t;
        let ht = 1e-5 * t0;
        let fd_d = (orig(d0 + hd, t0) - orig(d0 - hd, t0)) / (2.0 * hd);
        let fd_t = (orig(d0, t0 + ht) - orig(d0, t0 - ht)) / (2.0 * ht);
        let (c_d, c_t, c_0) = taylor_ratio_mec_coeffs(d0, t0, c);
        let surrogate = |d: f64, t: f64| taylor_ratio_upper_mec(d0, t0, d, t, c);
        let sd = (surrogate(d0 + hd, t0) - surrogate(d0 - hd, t0)) / (2.0 * hd);
        let st = (surrogate(d0, t0 + ht) - surrogate(d0, t0 - ht)) / (2.0 * ht);
        for e in [
            rel(surrogate(d0, t0), orig(d0, t0)),
            rel(c_d * d0 + c_t * t0 + c_0, orig(d0, t0)),
            rel(c_d, fd_d),
            rel(c_t, fd_t),
            rel(sd, fd_d),
            rel(st, fd_t),
        ] {
            worst = worst.max(e);
        }
    }
    Check {
        label: "ratio linearizations are tangent",
        pass: worst <= 1e-6,
        detail: format!("worst relative value/gradient mismatch {worst:.1e}"),
    }
}

fn random_psd(r: &mut impl Rng) -> CMatrix {
    let m = r.random_range(2..=8usize);
    let rank = r.random_range(1..=m);
    let x = CMatrix::from_fn(m, rank, |_, _| complex_normal(r));
    &x * x.adjoint()
}

fn dc_correctness(runs: &[SeedRun]) -> Check {
    let mut r = rng(3);
    let mut worst_violation = f64::NEG_INFINITY;
    for _ in 0..RANDOM_POINTS {
        let prev = random_psd(&mut r);
        let m = prev.nrows();
        let x = CMatrix::from_fn(m, r.random_range(1..=m), |_, _| complex_normal(&mut r));
        let s = &x * x.adjoint();
        let norm = SymmetricEigen::new(s.clone()).eigenvalues.max();
        worst_violation = worst_violation.max(linearize_spectral_norm(&prev).eval(&s) - norm);
    }

    let gaps: Vec<f64> = runs
        .iter()
        .flat_map(|run| {
            outcome(run, BenchmarkId::Proposed)
                .state
                .iter()
                .flat_map(|s| s.records.iter().filter_map(|rec| rec.rank_gap))
                .collect::<Vec<_>>()
        })
        .collect();
    let worst_gap = gaps.iter().copied().fold(0.0f64, f64::max);

    // One element, one user, one subcarrier: the least S meeting the rate.
    let mut params = default_paper_params();
    params.k = 1;
    params.n = 1;
    params.mc = 1;
    params.mr = 1;
    params.d = vec![1e6];
    let (v, p3, d_m, t3) = (2e-5, 0.5, 1e5, 0.1);
    let ch = ChannelSet::from_parts(
        DMatrix::from_element(1, 1, Complex64::new(1e-4, 0.0)),
        vec![CVector::from_element(1, Complex64::new(v, 0.0))],
        vec![CVector::from_element(1, Complex64::new(1.0, 0.0))],
    );
    let mut alloc = Allocation::all_local(&params, CVector::from_element(1, Complex64::new(1.0, 0.0)));
    alloc.b[(0, 0)] = 1.0;
    alloc.p3[(0, 0)] = p3;
    alloc.d_m[0] = d_m;
    alloc.d_l[0] = 1e6 - d_m;
    alloc.t3[0] = t3;
    let settings = BcdSettings {
        normalize_amplitude: false,
        dc_slack_floors: vec![0.0],
        ..BcdSettings::default()
    };
    let expect = params.delta2 * (2f64.powf(d_m / (t3 * params.w)) - 1.0) / (p3 * v * v);
    let scalar_err = match solve_p4_dc(&params, &ch, &alloc, &settings) {
        Ok(sol) => sol.s_mat.map_or(f64::INFINITY, |s| rel(s[(0, 0)].re, expect)),
        Err(_) => f64::INFINITY,
    };

    let pass = worst_violation <= 1e-9 && !gaps.is_empty() && worst_gap <= 1e-3 && scalar_err <= 1e-6;
    Check {
        label: "rank-one penalty: lower bound, converged gap, scalar case",
        pass,
        detail: format!(
            "bound violation {worst_violation:.1e}; worst gap {worst_gap:.1e} over {} solves; scalar error {scalar_err:.1e}",
            gaps.len()
        ),
    }
}

fn tiny_instance(inst: u64) -> (SystemParams, ChannelSet, Allocation) {
    let mut r = SeededStreams::new(100 + inst).stream(90, 0, 0);
    let mut params = default_paper_params();
    params.k = 2;
    params.n = 2;
    params.mc = 1;
    params.mr = 1;
    params.d = vec![1e6; 2];
    let h = DMatrix::from_fn(2, 2, |_, _| complex_normal(&mut r) * 3e-5);
    let g = (0..2).map(|_| CVector::from_element(1, complex_normal(&mut r) * 1e-4)).collect();
    let hf = (0..2).map(|_| CVector::from_element(1, Complex64::new(1.0, 0.0))).collect();
    let ch = ChannelSet::from_parts(h, g, hf);
    let mut a = Allocation::all_local(&params, CVector::from_element(1, Complex64::new(1.0, 0.0)));
    for k in 0..2 {
        a.d_r[k] = r.random_range(1e5..4e5);
        a.d_m[k] = r.random_range(1e5..4e5);
        a.d_l[k] = 1e6 - a.d_r[k] - a.d_m[k];
        a.t1[k] = r.random_range(0.1..0.3);
        a.t2[k] = r.random_range(0.1..0.3);
        a.t3[k] = r.random_range(0.1..0.3);
    }
    (params, ch, a)
}

fn oracle_equivalence() -> Check {
    let st = SolverSettings::default();
    let mut bound_ok = 0;
    let mut worst_gap = 0.0f64;
    let mut failures = 0;
    for inst in 0..25 {
        let (params, ch, alloc) = tiny_instance(inst);
        let oracle = oracle_p2_grid(&params, &ch, &alloc, 400).ok().and_then(|o| o.energy);
        let relaxed = solve_p2(&params, &ch, &alloc, &st);
        let (Some(oracle), Ok(relaxed)) = (oracle, relaxed) else {
            failures += 1;
            continue;
        };
        if relaxed.transmit_energy <= oracle * (1.0 + 1e-9) {
            bound_ok += 1;
        }
        match round_and_repair(&params, &ch, &relaxed.alloc, BcdSettings::default().rounding_search, &st) {
            Ok(sol) => worst_gap = worst_gap.max(sol.transmit_energy / oracle - 1.0),
            Err(_) => failures += 1,
        }
    }

    // One user on one subcarrier: the power that meets the rate exactly.
    let mut params = default_paper_params();
    params.k = 1;
    params.n = 1;
    params.mc = 1;
    params.mr = 1;
    params.d = vec![1e6];
    let gain2: f64 = 4e-9;
    let ch = ChannelSet::from_parts(
        DMatrix::from_element(1, 1, Complex64::new(gain2.sqrt(), 0.0)),
        vec![CVector::from_element(1, Complex64::new(1e-3, 0.0))],
        vec![CVector::from_element(1, Complex64::new(1.0, 0.0))],
    );
    let mut alloc = Allocation::all_local(&params, CVector::from_element(1, Complex64::new(1.0, 0.0)));
    let (d_r, t1) = (5e5, 0.25);
    alloc.d_r[0] = d_r;
    alloc.d_l[0] = 1e6 - d_r;
    alloc.t1[0] = t1;
    let expect = params.sigma2 * (2f64.powf(d_r / (t1 * params.w)) - 1.0) / gain2;
    let solver_err = solve_p2(&params, &ch, &alloc, &st).map_or(f64::INFINITY, |s| rel(s.alloc.p1[(0, 0)], expect));
    let oracle_err = oracle_p2_grid(&params, &ch, &alloc, 10)
        .ok()
        .and_then(|o| o.energy)
        .map_or(f64::INFINITY, |e| rel(e, expect * t1));

    let pass = failures == 0 && bound_ok == 25 && worst_gap <= 0.05 && solver_err <= 1e-4 && oracle_err <= 1e-4;
    Check {
        label: "subcarrier block against exhaustive search",
        pass,
        detail: format!(
            "relaxed <= oracle on {bound_ok}/25, worst rounded gap {:.2}%, {failures} failures; \
             single-link power error {solver_err:.1e} (solver), {oracle_err:.1e} (oracle)",
            100.0 * worst_gap
        ),
    }
}

fn orderings(runs: &[SeedRun]) -> Check {
    use BenchmarkId::*;
    let energy = |id: BenchmarkId| mean(&runs.iter().map(|r| outcome(r, id).objective).collect::<Vec<_>>());
    let mut failures = Vec::new();
    if !le(energy(UpperBound), energy(Proposed)) {
        failures.push("upper-bound > proposed".to_string());
    }
    for id in [CompCollab, CommCollab, RandomPhase, SdrPhase, ThreeStage] {
        if !le(energy(Proposed), energy(id)) {
            failures.push(format!("proposed > {id}"));
        }
        if !le(energy(id), energy(LocalOnly)) {
            failures.push(format!("{id} > local-only"));
        }
    }

    let schemes = [Proposed, CommCollab, CompCollab, LocalOnly];
    let settings = BcdSettings::default();
    let caps: Vec<f64> = schemes
        .iter()
        .map(|&id| mean(&runs.iter().map(|r| capacity(id, &r.params, &r.channels, &settings)).collect::<Vec<_>>()))
        .collect();
    for (i, pair) in caps.windows(2).enumerate() {
        if !le(pair[1], pair[0]) {
            failures.push(format!("capacity {} < {}", schemes[i], schemes[i + 1]));
        }
    }
    let local_exact = runs.iter().all(|r| {
        let p = &r.params;
        capacity(LocalOnly, p, &r.channels, &settings) == p.t * p.f_t_max / p.c_t
    });
    if !local_exact {
        failures.push("local-only capacity differs from T f / c".to_string());
    }

    let listing: Vec<String> = BenchmarkId::ALL
        .iter()
        .map(|&id| format!("{id} {:.4e}", energy(id)))
        .collect();
    Check {
        label: "scheme orderings in energy and capacity",
        pass: failures.is_empty(),
        detail: format!(
            "mean energy [{}] J; mean capacity [{}] bits{}",
            listing.join(", "),
            schemes
                .iter()
                .zip(&caps)
                .map(|(id, c)| format!("{id} {c:.4e}"))
                .collect::<Vec<_>>()
                .join(", "),
            if failures.is_empty() {
                String::new()
            } else {
                format!("; violated: {}", failures.join(", "))
            }
        ),
    }
}

struct TrendData {
    rows: Vec<rmsmec_core::harness::SweepRow>,
    summaries: Vec<(SweepParam, Vec<SummaryRow>)>,
}

fn sweep(param: SweepParam, values: &[f64], benchmarks: &[BenchmarkId], data: &mut TrendData) {
    let spec = SweepSpec {
        param,
        values: values.to_vec(),
        benchmarks: benchmarks.to_vec(),
        seeds: (1..=SEEDS).collect(),
        measure: Measure::Energy,
        out: None,
    };
    let rows = run_sweep(&spec, &default_paper_params(), &BcdSettings::default()).expect("valid sweep");
    data.summaries.push((param, summarize(&rows)));
    data.rows.extend(rows);
}

fn series(data: &TrendData, param: SweepParam, id: BenchmarkId) -> Vec<(f64, f64, usize)> {
    data.summaries
        .iter()
        .filter(|(p, _)| *p == param)
        .flat_map(|(_, rows)| rows.iter().filter(|r| r.benchmark == id.name()))
        .map(|r| (r.value, r.mean, r.failures))
        .collect()
}

fn trends(data: &TrendData) -> Check {
    use BenchmarkId::*;
    let mut failures = Vec::new();
    let mut listing = Vec::new();
    for (param, id, increasing) in [
        (SweepParam::T, Proposed, false),
        (SweepParam::M, Proposed, false),
        (SweepParam::D, Proposed, true),
        (SweepParam::K, Proposed, true),
    ] {
        let s = series(data, param, id);
        listing.push(format!(
            "{param}: {}",
            s.iter().map(|(_, m, _)| format!("{m:.4e}")).collect::<Vec<_>>().join(" ")
        ));
        if s.iter().any(|x| x.2 > 0) {
            failures.push(format!("{param} sweep has failed cells"));
        }
        for pair in s.windows(2) {
            let ok = if increasing { le(pair[0].1, pair[1].1) } else { le(pair[1].1, pair[0].1) };
            if !ok {
                failures.push(format!("{param} {} -> {}", pair[0].0, pair[1].0));
            }
        }
    }
    for id in [LocalOnly, CompCollab] {
        let s = series(data, SweepParam::M, id);
        let (lo, hi) = s.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x.1), hi.max(x.1)));
        listing.push(format!("{id} over M spread {:.1e}", (hi - lo) / hi));
        if !le(hi, lo) || s.iter().any(|x| x.2 > 0) {
            failures.push(format!("{id} varies with M"));
        }
    }
    Check {
        label: "energy trends in T, M, D and K",
        pass: failures.is_empty(),
        detail: format!(
            "{}{}",
            listing.join("; "),
            if failures.is_empty() {
                String::new()
            } else {
                format!("; violated: {}", failures.join(", "))
            }
        ),
    }
}

fn feasibility(runs: &[SeedRun], data: &TrendData) -> Check {
    let mut checked = 0;
    let mut bad = Vec::new();
    for run in runs {
        for o in &run.outcomes {
            checked += 1;
            if !check_feasibility(&o.alloc, &run.params, &run.channels, FEAS_TOL).feasible {
                bad.push(format!("{} seed {}", o.id, run.params.seed));
            }
        }
    }
    for row in &data.rows {
        checked += 1;
        if !row.feasible || !row.error.is_empty() {
            bad.push(format!("{} {}={} seed {}", row.benchmark, row.param, row.value, row.seed));
        }
    }

    let p = default_paper_params();
    let local = local_compute_energy(&p, 1e5, 1.0);
    let cn = cn_compute_energy(&p, 1e5, 0.5).unwrap_or(f64::NAN);
    let rate = shannon_rate(1e6, 1e-10, 1e-6, 1.0, 0.1);
    let golden = rel(local, 1e-3) <= 1e-12
        && rel(cn, 1.2e-3) <= 1e-12
        && rel(rate, 1e6 * 1001f64.log2()) <= 1e-12
        && rel(rate, 9.9672e6) <= 5e-6;
    Check {
        label: "feasibility of every converged allocation and golden values",
        pass: bad.is_empty() && golden,
        detail: format!(
            "{} of {checked} allocations infeasible{}; local {local:.6e} J, relay compute {cn:.6e} J, rate {rate:.6e} bit/s",
            bad.len(),
            if bad.is_empty() {
                String::new()
            } else {
                format!(" ({})", bad.join(", "))
            }
        ),
    }
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut checks = vec![curvature(), tangency(), oracle_equivalence()];

    let runs: Vec<SeedRun> = (1..=SEEDS).map(reference_run).collect();
    checks.insert(0, descent(&runs));
    checks.push(dc_correctness(&runs));
    checks.push(orderings(&runs));

    let mut data = TrendData {
        rows: Vec::new(),
        summaries: Vec::new(),
    };
    use BenchmarkId::*;
    sweep(SweepParam::T, &[0.5, 1.0, 1.5, 2.0], &[Proposed], &mut data);
    sweep(SweepParam::M, &[16.0, 25.0, 36.0, 49.0], &[Proposed, LocalOnly, CompCollab], &mut data);
    sweep(SweepParam::D, &[0.5e6, 1e6, 1.5e6, 2e6], &[Proposed], &mut data);
    sweep(SweepParam::K, &[2.0, 3.0, 5.0, 8.0], &[Proposed], &mut data);
    checks.push(trends(&data));
    checks.push(feasibility(&runs, &data));

    for c in &checks {
        println!("[{}] {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.label, c.detail);
    }
    let failed = checks.iter().filter(|c| !c.pass).count();
    println!(
        "acceptance: {} of {} checks passed in {:.1?}",
        checks.len() - failed,
        checks.len(),
        start.elapsed()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
