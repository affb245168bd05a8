//! Browser demo bindings: three interactive views over the krpt library.
//!
//! Every entry point takes and returns JSON strings so the page stays a
//! plain static file and the functions remain callable from native tests.
//! Failures come back as `{"error": "..."}` rather than thrown exceptions.

use krpt::core::{log_grid, KernelSpec, SimConfig};
use krpt::engine::{self, RunOptions, Species};
use krpt::kernels::{self, VariableWidth};
use krpt::moments;

use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::wasm_bindgen;

fn err_json(msg: impl std::fmt::Display) -> String {
    serde_json::json!({ "error": msg.to_string() }).to_string()
}

#[derive(Deserialize)]
struct MomentParams {
    #[serde(default = "default_diffusion")]
    diffusion: f64,
    #[serde(default = "default_rate")]
    rate: f64,
    #[serde(default = "one")]
    c0: f64,
    #[serde(default = "one")]
    domain: f64,
    #[serde(default = "default_n_dirac")]
    n_dirac: usize,
    #[serde(default = "default_n_gauss")]
    n_gauss: usize,
    #[serde(default = "default_t_final")]
    t_final: f64,
    /// Explicit half-width; when absent the matching strategy applies.
    half_width: Option<f64>,
    /// Matching time; when absent, least-squares matching is used.
    t_star: Option<f64>,
    /// Skip the step-refinement pass for interactive latency.
    #[serde(default = "yes")]
    fast: bool,
}

fn default_diffusion() -> f64 {
    1e-5
}
fn default_rate() -> f64 {
    5.0
}
fn one() -> f64 {
    1.0
}
fn default_n_dirac() -> usize {
    1000
}
fn default_n_gauss() -> usize {
    100
}
fn default_t_final() -> f64 {
    1000.0
}
fn yes() -> bool {
    true
}

fn config_from(p: &MomentParams) -> Result<SimConfig, krpt::KrptError> {
    SimConfig {
        diffusion: p.diffusion,
        rate: p.rate,
        c0: p.c0,
        domain: p.domain,
        n_dirac: p.n_dirac,
        n_gauss: p.n_gauss,
        t_final: p.t_final,
        ..SimConfig::base()
    }
    .validated()
}

#[derive(Serialize)]
struct MomentCurves {
    times: Vec<f64>,
    well_mixed: Vec<f64>,
    dirac: Vec<f64>,
    gaussian: Vec<f64>,
    half_width: f64,
    lower_bound_ok: bool,
}

fn solve_curve(
    kernel: KernelSpec,
    config: &SimConfig,
    grid: &[f64],
    fast: bool,
) -> Result<Vec<f64>, krpt::KrptError> {
    let solution = if fast {
        let h = 1e-3 / (config.rate * config.c0).max(1e-12);
        moments::solve_with_step(kernel, config, grid, h)?
    } else {
        moments::solve_mean_concentration(kernel, config, grid)?
    };
    Ok(solution.trace.mean)
}

/// Mean-concentration curves: well-mixed closed form, Dirac moment
/// solution, and the Gaussian moment solution at the chosen half-width.
#[wasm_bindgen]
pub fn moment_curves(params_json: &str) -> String {
    let params: MomentParams = match serde_json::from_str(params_json) {
        Ok(p) => p,
        Err(e) => return err_json(e),
    };
    let config = match config_from(&params) {
        Ok(c) => c,
        Err(e) => return err_json(e),
    };
    let half_width = match params.half_width {
        Some(w) => w,
        None => match params.t_star {
            Some(t_star) => match kernels::width_at_time(
                t_star,
                config.n_gauss,
                config.n_dirac,
                config.diffusion,
                config.domain,
                config.dim,
            ) {
                Ok(w) => w,
                Err(e) => return err_json(e),
            },
            None => {
                let grid = log_grid(1e-2, config.t_final, 60);
                match kernels::least_squares_width(&grid, &config, kernels::UPPER_FRACTION_DEFAULT)
                {
                    Ok(ls) => ls.half_width,
                    Err(e) => return err_json(e),
                }
            }
        },
    };
    let grid = log_grid(config.dt, config.t_final, 160);
    let gauss_kernel = match KernelSpec::fixed(half_width) {
        Ok(k) => k,
        Err(e) => return err_json(e),
    };
    let dirac = match solve_curve(KernelSpec::Dirac, &config, &grid, params.fast) {
        Ok(v) => v,
        Err(e) => return err_json(e),
    };
    let gaussian = match solve_curve(gauss_kernel, &config, &grid, params.fast) {
        Ok(v) => v,
        Err(e) => return err_json(e),
    };
    let well_mixed: Vec<f64> = grid
        .iter()
        .map(|&t| moments::well_mixed(t, config.c0, config.rate))
        .collect();
    let lower_bound_ok = dirac
        .iter()
        .zip(well_mixed.iter())
        .all(|(c, w)| c >= &(w * (1.0 - 1e-9)));
    serde_json::to_string(&MomentCurves {
        times: grid,
        well_mixed,
        dirac,
        gaussian,
        half_width,
        lower_bound_ok,
    })
    .unwrap_or_else(err_json)
}

#[derive(Deserialize)]
struct WidthParams {
    #[serde(default = "default_diffusion")]
    diffusion: f64,
    #[serde(default = "one")]
    domain: f64,
    #[serde(default = "default_n_dirac")]
    n_dirac: usize,
    #[serde(default = "default_n_gauss")]
    n_gauss: usize,
    #[serde(default = "default_dt")]
    dt: f64,
    #[serde(default = "default_t_final")]
    t_final: f64,
}

fn default_dt() -> f64 {
    0.1
}

#[derive(Serialize)]
struct WidthProfile {
    /// Matching times swept up to just below tau*.
    t_star: Vec<f64>,
    width_at_t_star: Vec<f64>,
    tau_star: f64,
    domain_rule_width: f64,
}

/// The half-width as a function of the matching time, together with the
/// feasibility boundary tau* and the 12%-of-domain guideline.
#[wasm_bindgen]
pub fn width_profile(params_json: &str) -> String {
    let p: WidthParams = match serde_json::from_str(params_json) {
        Ok(p) => p,
        Err(e) => return err_json(e),
    };
    let tau = match kernels::max_matching_time(p.n_gauss, p.n_dirac, p.diffusion, p.domain, 1, p.dt / 2.0)
    {
        Ok(t) => t.value(),
        Err(e) => return err_json(e),
    };
    let hi = p.t_final.max(p.dt).min(tau * (1.0 - 1e-9));
    let lo = (p.dt / 2.0).min(hi / 2.0);
    let grid = log_grid(lo, hi, 160);
    let mut widths = Vec::with_capacity(grid.len());
    for &t in &grid {
        match kernels::width_at_time(t, p.n_gauss, p.n_dirac, p.diffusion, p.domain, 1) {
            Ok(w) => widths.push(w),
            Err(e) => return err_json(e),
        }
    }
    serde_json::to_string(&WidthProfile {
        t_star: grid,
        width_at_t_star: widths,
        tau_star: tau,
        domain_rule_width: kernels::DOMAIN_EFFECT_RATIO * p.domain,
    })
    .unwrap_or_else(err_json)
}

#[derive(Deserialize)]
struct DemoParams {
    #[serde(default = "default_diffusion")]
    diffusion: f64,
    #[serde(default = "default_rate")]
    rate: f64,
    #[serde(default = "demo_n")]
    n_dirac: usize,
    #[serde(default = "demo_ng")]
    n_gauss: usize,
    #[serde(default = "demo_t")]
    t_final: f64,
    #[serde(default = "default_dt")]
    dt: f64,
    #[serde(default)]
    seed: u64,
    /// "dirac", "gaussian", or "variable".
    #[serde(default = "demo_kernel")]
    kernel: String,
    half_width: Option<f64>,
    #[serde(default = "demo_snaps")]
    snapshot_times: Vec<f64>,
}

fn demo_n() -> usize {
    400
}
fn demo_ng() -> usize {
    200
}
fn demo_t() -> f64 {
    200.0
}
fn demo_kernel() -> String {
    "dirac".to_string()
}
fn demo_snaps() -> Vec<f64> {
    vec![50.0, 200.0]
}

#[derive(Serialize)]
struct SnapshotOut {
    time: f64,
    positions_a: Vec<f64>,
    masses_a: Vec<f64>,
    positions_b: Vec<f64>,
    masses_b: Vec<f64>,
}

#[derive(Serialize)]
struct DemoOut {
    times: Vec<f64>,
    cbar: Vec<f64>,
    well_mixed: Vec<f64>,
    snapshots: Vec<SnapshotOut>,
    half_width_label: String,
}

/// Runs a single small realization and returns its trace plus
/// mass-filtered snapshots for the island/moat view. Particle counts are
/// capped to keep the page responsive.
#[wasm_bindgen]
pub fn particle_demo(params_json: &str) -> String {
    let p: DemoParams = match serde_json::from_str(params_json) {
        Ok(p) => p,
        Err(e) => return err_json(e),
    };
    if p.n_dirac > 2000 {
        return err_json("n_dirac capped at 2000 for the demo");
    }
    let config = match (SimConfig {
        diffusion: p.diffusion,
        rate: p.rate,
        n_dirac: p.n_dirac,
        n_gauss: p.n_gauss.min(p.n_dirac),
        t_final: p.t_final,
        dt: p.dt,
        seed: p.seed,
        n_realizations: 1,
        ..SimConfig::base()
    })
    .validated()
    {
        Ok(c) => c,
        Err(e) => return err_json(e),
    };
    let kernel = match p.kernel.as_str() {
        "dirac" => KernelSpec::Dirac,
        "variable" => KernelSpec::VariableGaussian,
        "gaussian" => {
            let w = match p.half_width {
                Some(w) => w,
                None => {
                    match kernels::variable_width(p.t_final / 2.0, &config) {
                        Ok(w) => w,
                        Err(e) => return err_json(e),
                    }
                }
            };
            match KernelSpec::fixed(w) {
                Ok(k) => k,
                Err(e) => return err_json(e),
            }
        }
        other => return err_json(format!("unknown kernel {other:?}")),
    };
    let half_width_label = match kernel {
        KernelSpec::Dirac => "0".to_string(),
        KernelSpec::FixedGaussian { half_width } => format!("{half_width:.4}"),
        KernelSpec::VariableGaussian => match VariableWidth::new(&config) {
            Ok(vw) => format!("variable (tau* = {:.3e})", vw.tau_star()),
            Err(e) => return err_json(e),
        },
    };
    let grid = log_grid(config.dt, config.t_final, 120);
    let opts = RunOptions {
        snapshot_times: p.snapshot_times.clone(),
        ..RunOptions::default()
    };
    let out = match engine::run_realization(&config, kernel, config.seed, &grid, &opts) {
        Ok(o) => o,
        Err(e) => return err_json(e),
    };
    let snapshots = out
        .snapshots
        .iter()
        .map(|s| {
            let mut snap = SnapshotOut {
                time: s.time,
                positions_a: Vec::new(),
                masses_a: Vec::new(),
                positions_b: Vec::new(),
                masses_b: Vec::new(),
            };
            for (species, x, m) in &s.particles {
                match species {
                    Species::A => {
                        snap.positions_a.push(*x);
                        snap.masses_a.push(*m);
                    }
                    Species::B => {
                        snap.positions_b.push(*x);
                        snap.masses_b.push(*m);
                    }
                }
            }
            snap
        })
        .collect();
    let well_mixed = out
        .trace
        .times
        .iter()
        .map(|&t| moments::well_mixed(t, config.c0, config.rate))
        .collect();
    serde_json::to_string(&DemoOut {
        times: out.trace.times,
        cbar: out.trace.mean,
        well_mixed,
        snapshots,
        half_width_label,
    })
    .unwrap_or_else(err_json)
}
