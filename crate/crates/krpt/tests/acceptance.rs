//! Acceptance suite: one test per criterion, each printing a single
//! pass/fail line with the measured numbers.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.
//! Expensive ensembles are shared between criteria through lazy fixtures;
//! the whole suite is sized for a single workstation core.

use krpt::core::{damkohler, log_grid, ConcentrationTrace, KernelSpec, SimConfig};
use krpt::engine::{self, empirical_autocovariance, gaussian_autocovariance_theory, min_image};
use krpt::engine::{PairAcceleration, RunOptions};
use krpt::eulerian;
use krpt::kernels;
use krpt::moments;

use std::sync::LazyLock;

fn check(criterion: &str, ok: bool, detail: &str) {
    if ok {
        println!("criterion {criterion} PASS: {detail}");
    } else {
        println!("criterion {criterion} FAIL: {detail}");
        panic!("criterion {criterion} failed: {detail}");
    }
}

fn base_config(n_gauss: usize) -> SimConfig {
    SimConfig {
        n_gauss,
        ..SimConfig::base()
    }
    .validated()
    .unwrap()
}

/// Times at which ensembles are recorded for the comparisons.
static RECORD_GRID: LazyLock<Vec<f64>> = LazyLock::new(|| log_grid(1.0, 1000.0, 120));

/// Matching grid pinned by the experiment protocol: 100 log-spaced points
/// in [1e-2, 1000].
static MATCH_GRID: LazyLock<Vec<f64>> = LazyLock::new(|| log_grid(1e-2, 1000.0, 100));

fn solve_ls_width(n_gauss: usize) -> f64 {
    let cfg = base_config(n_gauss);
    kernels::least_squares_width(&MATCH_GRID, &cfg, kernels::UPPER_FRACTION_DEFAULT)
        .unwrap()
        .half_width
}

static LS_WIDTH_100: LazyLock<f64> = LazyLock::new(|| solve_ls_width(100));
static LS_WIDTH_500: LazyLock<f64> = LazyLock::new(|| solve_ls_width(500));
static LS_WIDTH_900: LazyLock<f64> = LazyLock::new(|| solve_ls_width(900));

fn ls_width(n_gauss: usize) -> f64 {
    match n_gauss {
        100 => *LS_WIDTH_100,
        500 => *LS_WIDTH_500,
        900 => *LS_WIDTH_900,
        _ => unreachable!(),
    }
}

fn gauss_ensemble(n_gauss: usize) -> ConcentrationTrace {
    let cfg = base_config(n_gauss);
    let kernel = KernelSpec::FixedGaussian {
        half_width: ls_width(n_gauss),
    };
    engine::run_ensemble(&cfg, kernel, &RECORD_GRID, &RunOptions::default()).unwrap()
}

static DIRAC_TRACE: LazyLock<ConcentrationTrace> = LazyLock::new(|| {
    engine::run_ensemble(
        &base_config(100),
        KernelSpec::Dirac,
        &RECORD_GRID,
        &RunOptions::default(),
    )
    .unwrap()
});
static GAUSS_TRACE_100: LazyLock<ConcentrationTrace> = LazyLock::new(|| gauss_ensemble(100));
static GAUSS_TRACE_500: LazyLock<ConcentrationTrace> = LazyLock::new(|| gauss_ensemble(500));
static GAUSS_TRACE_900: LazyLock<ConcentrationTrace> = LazyLock::new(|| gauss_ensemble(900));

#[test]
fn criterion_01_base_damkohler_number() {
    let cfg = base_config(100);
    let da = damkohler(&cfg, 1000).unwrap();
    check(
        "01",
        da == 0.5,
        &format!("damkohler(D=1e-5, k=5, C0=1, domain=1, N=1000) = {da} (want exactly 0.5)"),
    );
}

#[test]
fn criterion_02_width_degenerates_with_equal_counts() {
    let mut worst = 0.0f64;
    for t_star in [1.0, 10.0, 100.0] {
        let w = kernels::width_at_time(t_star, 1000, 1000, 1e-5, 1.0, 1).unwrap();
        worst = worst.max(w.abs());
    }
    check(
        "02",
        worst <= 1e-10,
        &format!("max |half-width| at N_G = N_delta over t* in {{1,10,100}} = {worst:e} (want <= 1e-10)"),
    );
}

#[test]
fn criterion_03_least_squares_width() {
    let ls = ls_width(100);
    let single_time = kernels::width_at_time(15.0, 100, 1000, 1e-5, 1.0, 1).unwrap();
    let ok = (ls - 0.1096).abs() <= 0.01 && (single_time - ls).abs() <= 0.005;
    check(
        "03",
        ok,
        &format!(
            "least-squares width = {ls:.5} (want 0.1096 +- 0.01); \
             width_at_time(15) = {single_time:.5} (want within 0.005 of the least-squares value)"
        ),
    );
}

#[test]
fn criterion_04_variable_width_checkpoint() {
    let cfg = base_config(500);
    let w = kernels::variable_width(50.0, &cfg).unwrap();
    check(
        "04",
        (w - 0.0473).abs() <= 0.002,
        &format!("variable width at t = 50, N_G/N_delta = 0.5: {w:.5} (want 0.0473 +- 0.002)"),
    );
}

#[test]
fn criterion_05_analytic_lower_bound() {
    let cfg = base_config(100);
    let mut detail = String::new();
    let mut all_ok = true;
    let cases: [(&str, &ConcentrationTrace); 4] = [
        ("dirac", &DIRAC_TRACE),
        ("gauss-0.9", &GAUSS_TRACE_900),
        ("gauss-0.5", &GAUSS_TRACE_500),
        ("gauss-0.1", &GAUSS_TRACE_100),
    ];
    for (name, trace) in cases {
        let mut min_margin = f64::INFINITY;
        for (t, c) in trace.times.iter().zip(trace.mean.iter()) {
            let lower = moments::well_mixed(*t, cfg.c0, cfg.rate);
            min_margin = min_margin.min(c - lower);
        }
        all_ok &= min_margin > 0.0;
        detail.push_str(&format!("{name}: min(Cbar - lower) = {min_margin:.3e}; "));
    }
    // Moment-equation solutions must satisfy the same bound.
    for (name, kernel) in [
        ("moment-dirac", KernelSpec::Dirac),
        (
            "moment-gauss-0.1",
            KernelSpec::FixedGaussian {
                half_width: ls_width(100),
            },
        ),
    ] {
        let cfg = base_config(100);
        let sol = moments::solve_mean_concentration(kernel, &cfg, &RECORD_GRID).unwrap();
        let mut min_margin = f64::INFINITY;
        for (t, c) in sol.trace.times.iter().zip(sol.trace.mean.iter()) {
            min_margin = min_margin.min(c - moments::well_mixed(*t, cfg.c0, cfg.rate));
        }
        all_ok &= min_margin > 0.0;
        detail.push_str(&format!("{name}: min margin = {min_margin:.3e}; "));
    }
    check("05", all_ok, detail.trim_end_matches("; "));
}

#[test]
fn criterion_06_particle_matching_at_one_tenth_counts() {
    let dirac = &*DIRAC_TRACE;
    let gauss = &*GAUSS_TRACE_100;
    let mut max_disc = 0.0f64;
    for (d, g) in dirac.mean.iter().zip(gauss.mean.iter()) {
        max_disc = max_disc.max((d - g).abs());
    }
    let final_disc = (dirac.mean.last().unwrap() - gauss.mean.last().unwrap()).abs();
    check(
        "06",
        max_disc <= 0.06 && final_disc <= 0.01,
        &format!(
            "N_G/N_delta = 0.1 least-squares vs Dirac: max discrepancy = {max_disc:.4} \
             (want <= 0.06), final = {final_disc:.4} (want <= 0.01)"
        ),
    );
}

#[test]
fn criterion_07_variable_width_on_the_large_domain() {
    // Gate: the cell list must reproduce the exact loop on the unit domain
    // to 1e-9 relative in total mass over a step.
    let gate_cfg = base_config(100);
    let mut worst_rel = 0.0f64;
    for kernel in [
        KernelSpec::Dirac,
        KernelSpec::FixedGaussian { half_width: 0.02 },
    ] {
        let base = engine::initialize(&gate_cfg, kernel, 99).unwrap();
        let mut exact = base.clone();
        engine::reaction_step(&mut exact, &gate_cfg, &RunOptions::default()).unwrap();
        let mut pruned = base.clone();
        let opts = RunOptions {
            acceleration: PairAcceleration::CellList,
            ..RunOptions::default()
        };
        engine::reaction_step(&mut pruned, &gate_cfg, &opts).unwrap();
        let rel = (exact.total_mass_a() - pruned.total_mass_a()).abs() / exact.total_mass_a();
        worst_rel = worst_rel.max(rel);
    }
    assert!(
        worst_rel <= 1e-9,
        "cell-list equivalence gate failed: {worst_rel:e}"
    );

    let cfg = SimConfig {
        domain: 16.0,
        n_dirac: 16000,
        n_gauss: 1600,
        ..SimConfig::base()
    }
    .validated()
    .unwrap();
    let opts = RunOptions {
        acceleration: PairAcceleration::CellList,
        ..RunOptions::default()
    };
    let dirac = engine::run_ensemble(&cfg, KernelSpec::Dirac, &RECORD_GRID, &opts).unwrap();
    let gauss =
        engine::run_ensemble(&cfg, KernelSpec::VariableGaussian, &RECORD_GRID, &opts).unwrap();
    let mut max_disc = 0.0f64;
    for (d, g) in dirac.mean.iter().zip(gauss.mean.iter()) {
        max_disc = max_disc.max((d - g).abs());
    }
    let final_disc = (dirac.mean.last().unwrap() - gauss.mean.last().unwrap()).abs();
    check(
        "07",
        max_disc <= 0.05 && final_disc <= 0.015,
        &format!(
            "domain = 16, variable kernel at N_G/N_delta = 0.1 (cell-list gate rel err \
             {worst_rel:.2e}): max discrepancy = {max_disc:.4} (want <= 0.05), \
             final = {final_disc:.4} (want <= 0.015)"
        ),
    );
}

#[test]
fn criterion_08_eulerian_cross_validation() {
    let cfg = base_config(100);
    // Flat start collapses the grid solver onto the well-mixed law; the
    // explicit reaction term needs t >= 10 at k C0 dt = 0.5 before its
    // truncation error falls under 1e-3.
    let flat_grid = log_grid(10.0, 1000.0, 60);
    let flat = eulerian::fd_solve(&cfg, 0.0, 1, &flat_grid).unwrap();
    let mut flat_err = 0.0f64;
    for (t, c) in flat.times.iter().zip(flat.mean.iter()) {
        flat_err = flat_err.max((c - moments::well_mixed(*t, cfg.c0, cfg.rate)).abs());
    }

    let fd = eulerian::fd_ensemble(&cfg, eulerian::default_amplitude(&cfg), &RECORD_GRID).unwrap();
    let mut max_gap = 0.0f64;
    for (f, d) in fd.mean.iter().zip(DIRAC_TRACE.mean.iter()) {
        max_gap = max_gap.max((f - d).abs());
    }
    check(
        "08",
        flat_err < 1e-3 * cfg.c0 && max_gap < 0.05,
        &format!(
            "flat-start vs closed form on [10, 1000]: max err = {flat_err:.2e} (want < 1e-3); \
             perturbed ensemble vs Dirac particles: max gap = {max_gap:.4} (want < 0.05)"
        ),
    );
}

#[test]
fn criterion_09_initial_field_statistics() {
    let cfg = base_config(100);
    let width = ls_width(100);
    let kernel = KernelSpec::FixedGaussian { half_width: width };
    let systems: Vec<_> = (0..200u64)
        .map(|r| engine::initialize(&cfg, kernel, 0xace ^ r).unwrap())
        .collect();
    let lags = [0.0, width, 2.0 * width, 0.25, 0.5];
    let est = empirical_autocovariance(&systems, &lags, &cfg).unwrap();

    let mut ok = true;
    let mut worst_cross = 0.0f64;
    for k in 0..lags.len() {
        let sigmas = est.cross_mean[k].abs() / est.cross_se[k];
        worst_cross = worst_cross.max(sigmas);
        ok &= sigmas <= 3.0;
    }
    let mut worst_auto = 0.0f64;
    for k in 0..3 {
        let theory = gaussian_autocovariance_theory(est.lags[k], width, &cfg);
        let sigmas = (est.auto_mean[k] - theory).abs() / est.auto_se[k];
        worst_auto = worst_auto.max(sigmas);
        ok &= sigmas <= 3.0;
    }
    check(
        "09",
        ok,
        &format!(
            "200 seeded initializations: worst cross-covariance deviation = \
             {worst_cross:.2} se (want <= 3), worst autocovariance deviation = \
             {worst_auto:.2} se at lags {{0, w, 2w}} (want <= 3)"
        ),
    );
}

#[test]
fn criterion_10_step_refinement_and_langevin_scale() {
    // Shared Brownian path across step sizes isolates the splitting error.
    let final_mean = |dt: f64| {
        let cfg = SimConfig {
            dt,
            n_realizations: 1,
            ..SimConfig::base()
        }
        .validated()
        .unwrap();
        let opts = RunOptions {
            noise_substep: Some(0.05),
            ..RunOptions::default()
        };
        engine::run_realization(&cfg, KernelSpec::Dirac, cfg.seed, &[1000.0], &opts)
            .unwrap()
            .trace
            .mean[0]
    };
    let c: Vec<f64> = [0.4, 0.2, 0.1, 0.05].iter().map(|&dt| final_mean(dt)).collect();
    let d1 = (c[1] - c[0]).abs();
    let d2 = (c[2] - c[1]).abs();
    let d3 = (c[3] - c[2]).abs();
    let cauchy_ok = d2 <= d1 / 1.5 && d3 <= d2 / 1.5;

    // Langevin displacement variance over 1e5 particle-steps.
    let cfg = base_config(100);
    let n = 50_000;
    let mut sys = krpt::engine::ParticleSystem {
        positions_a: vec![0.5; n],
        positions_b: vec![0.5; n],
        masses_a: vec![1.0; n],
        masses_b: vec![1.0; n],
        kernel: KernelSpec::Dirac,
        time: 0.0,
    };
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4242);
    engine::diffusion_step(&mut sys, &cfg, &mut rng);
    let half = 0.5 * cfg.domain;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for &x in sys.positions_a.iter().chain(sys.positions_b.iter()) {
        let d = min_image(x - 0.5, cfg.domain, half);
        sum += d;
        sum_sq += d * d;
    }
    let count = (2 * n) as f64;
    let var = sum_sq / count - (sum / count) * (sum / count);
    let expect = 2.0 * cfg.diffusion * cfg.dt;
    let var_ok = (var - expect).abs() <= 0.02 * expect;

    check(
        "10",
        cauchy_ok && var_ok,
        &format!(
            "final means over dt {{0.4, 0.2, 0.1, 0.05}} = {c:?}; successive diffs \
             {d1:.3e} -> {d2:.3e} -> {d3:.3e} (want each ratio >= 1.5); displacement \
             variance = {var:.4e} vs 2 D dt = {expect:.4e} (want within 2%)"
        ),
    );
}

#[test]
fn criterion_11_error_bound_and_delta_scaling() {
    // The bound is a theorem only when 8 pi D exceeds k C0; check it there.
    let mut detail = String::new();
    let mut ok = true;
    for n_gauss in [900usize, 500] {
        let cfg = SimConfig {
            diffusion: 0.1,
            rate: 0.02,
            n_gauss,
            ..SimConfig::base()
        }
        .validated()
        .unwrap();
        let start = moments::bound_validity_start(&cfg).unwrap();
        let width = kernels::least_squares_width(&MATCH_GRID, &cfg, 0.25)
            .unwrap()
            .half_width;
        let grid = log_grid(start, 1000.0, 50);
        let dirac = moments::solve_mean_concentration(KernelSpec::Dirac, &cfg, &grid).unwrap();
        let gauss = moments::solve_mean_concentration(
            KernelSpec::FixedGaussian { half_width: width },
            &cfg,
            &grid,
        )
        .unwrap();
        let delta = 1.0 / n_gauss as f64 - 1e-3;
        let mut worst_ratio = 0.0f64;
        for i in 0..grid.len() {
            let diff = (gauss.trace.mean[i] - dirac.trace.mean[i]).abs();
            let bound = moments::error_bound(grid[i], delta, &cfg, width).cbar_bound;
            worst_ratio = worst_ratio.max(diff / bound);
        }
        ok &= worst_ratio <= 1.0;
        detail.push_str(&format!(
            "ratio {}: max diff/bound on [{start:.1}, 1000] = {worst_ratio:.3}; ",
            n_gauss as f64 / 1000.0
        ));
    }

    // Empirical delta scaling on the base parameters with single-time
    // matched widths. The proportionality is a late-time statement: the
    // early transient comes from regularizing the point-kernel spike and
    // does not scale with the mass deficit, so the window starts at t = 100.
    let grid = log_grid(100.0, 1000.0, 80);
    let max_diff = |n_gauss: usize| {
        let cfg = base_config(n_gauss);
        let width = kernels::width_at_time(15.0, n_gauss, 1000, 1e-5, 1.0, 1).unwrap();
        let dirac = moments::solve_mean_concentration(KernelSpec::Dirac, &cfg, &grid).unwrap();
        let gauss = moments::solve_mean_concentration(
            KernelSpec::FixedGaussian { half_width: width },
            &cfg,
            &grid,
        )
        .unwrap();
        dirac
            .trace
            .mean
            .iter()
            .zip(gauss.trace.mean.iter())
            .map(|(d, g)| (d - g).abs())
            .fold(0.0f64, f64::max)
    };
    let delta_900: f64 = 1.0 / 900.0 - 1e-3;
    let delta_990: f64 = 1.0 / 990.0 - 1e-3;
    let expect_ratio = delta_900 / delta_990;
    let measured_ratio = max_diff(900) / max_diff(990);
    let scaling_ok =
        measured_ratio >= expect_ratio / 2.0 && measured_ratio <= expect_ratio * 2.0;
    ok &= scaling_ok;
    detail.push_str(&format!(
        "delta scaling: max-diff ratio N_G 900 vs 990 = {measured_ratio:.2} \
         (delta ratio = {expect_ratio:.2}, want within a factor of 2)"
    ));
    check("11", ok, &detail);
}
