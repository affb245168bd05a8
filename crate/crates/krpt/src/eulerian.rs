//! Semi-implicit finite-difference reference solver on a periodic grid.
//!
//! Diffusion is treated backward in time with central differences; the
//! reaction product is lagged one step. The periodic tridiagonal system is
//! solved directly (Thomas elimination with a Sherman-Morrison corner
//! correction), so each step is exact up to rounding.

use crate::core::{ConcentrationTrace, SimConfig};
use crate::error::{KrptError, Result};
use crate::engine::reduce_traces;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Per-cell concentrations of both species on a periodic grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub cell_width: f64,
    pub values_a: Vec<f64>,
    pub values_b: Vec<f64>,
    pub time: f64,
}

impl GridField {
    pub fn n_cells(&self) -> usize {
        self.values_a.len()
    }

    /// Domain-averaged concentration of species A.
    pub fn mean_concentration(&self, domain: f64) -> f64 {
        self.values_a.iter().sum::<f64>() * self.cell_width / domain
    }

    /// Signed mass difference between the species.
    pub fn mass_difference(&self) -> f64 {
        self.values_a
            .iter()
            .zip(self.values_b.iter())
            .map(|(a, b)| a - b)
            .sum::<f64>()
            * self.cell_width
    }

    /// Spatial variance of species A about its mean.
    pub fn spatial_variance(&self) -> f64 {
        let n = self.values_a.len() as f64;
        let mean = self.values_a.iter().sum::<f64>() / n;
        self.values_a
            .iter()
            .map(|v| (v - mean) * (v - mean))
            .sum::<f64>()
            / n
    }
}

/// Default perturbation amplitude: matches the per-cell variance of the
/// discretized Dirac particle field, capped at `C0` to keep cells
/// non-negative.
pub fn default_amplitude(config: &SimConfig) -> f64 {
    let dx = config.domain / config.n_dirac as f64;
    (3.0 * config.c0 * config.mass_dirac() / dx).sqrt().min(config.c0)
}

/// Builds a grid of `n_dirac` cells with each cell of each species drawn
/// independently as `C0 + U(-amplitude, amplitude)`.
pub fn fd_initialize(config: &SimConfig, amplitude: f64, seed: u64) -> Result<GridField> {
    if !(0.0..=config.c0).contains(&amplitude) {
        return Err(KrptError::NegativeConcentrationRisk {
            amplitude,
            c0: config.c0,
        });
    }
    let n = config.n_dirac;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |count: usize| -> Vec<f64> {
        (0..count)
            .map(|_| {
                if amplitude == 0.0 {
                    config.c0
                } else {
                    config.c0 + rng.random_range(-amplitude..amplitude)
                }
            })
            .collect()
    };
    Ok(GridField {
        cell_width: config.domain / n as f64,
        values_a: draw(n),
        values_b: draw(n),
        time: 0.0,
    })
}

/// Advances the field one step: reaction uses lagged concentrations, then
/// each species solves the implicit periodic diffusion system.
pub fn fd_step(field: &mut GridField, config: &SimConfig) -> Result<()> {
    let n = field.n_cells();
    let dt = config.dt;
    let r = config.diffusion * dt / (field.cell_width * field.cell_width);
    let diag = 1.0 + 2.0 * r;
    let off = -r;

    let mut rhs_a = Vec::with_capacity(n);
    let mut rhs_b = Vec::with_capacity(n);
    for i in 0..n {
        let sink = config.rate * dt * field.values_a[i] * field.values_b[i];
        rhs_a.push(field.values_a[i] - sink);
        rhs_b.push(field.values_b[i] - sink);
    }
    if r == 0.0 {
        field.values_a = rhs_a;
        field.values_b = rhs_b;
    } else {
        field.values_a = solve_cyclic_uniform(diag, off, &rhs_a);
        field.values_b = solve_cyclic_uniform(diag, off, &rhs_b);
    }
    field.time += dt;
    for values in [&field.values_a, &field.values_b] {
        if let Some(&worst) = values
            .iter()
            .filter(|v| **v < -1e-10)
            .min_by(|a, b| a.total_cmp(b))
        {
            return Err(KrptError::NegativeConcentration {
                time: field.time,
                value: worst,
            });
        }
    }
    Ok(())
}

/// Solves the periodic tridiagonal system with constant diagonal `b` and
/// constant off-diagonal (and corner) `a`, via Sherman-Morrison.
fn solve_cyclic_uniform(b: f64, a: f64, rhs: &[f64]) -> Vec<f64> {
    let n = rhs.len();
    assert!(n >= 3, "periodic grid needs at least 3 cells");
    let gamma = -b;
    // Modified diagonal absorbs the corners.
    let mut diag = vec![b; n];
    diag[0] = b - gamma;
    diag[n - 1] = b - a * a / gamma;

    let x = thomas_uniform_off(&diag, a, rhs);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = a;
    let z = thomas_uniform_off(&diag, a, &u);

    let factor = (x[0] + (a / gamma) * x[n - 1]) / (1.0 + z[0] + (a / gamma) * z[n - 1]);
    x.iter().zip(z.iter()).map(|(xi, zi)| xi - factor * zi).collect()
}

/// Thomas elimination for a tridiagonal system with per-row diagonal and a
/// single constant off-diagonal value on both bands.
fn thomas_uniform_off(diag: &[f64], off: f64, rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut gam = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut beta = diag[0];
    x[0] = rhs[0] / beta;
    for j in 1..n {
        gam[j] = off / beta;
        beta = diag[j] - off * gam[j];
        x[j] = (rhs[j] - off * x[j - 1]) / beta;
    }
    for j in (0..n - 1).rev() {
        x[j] -= gam[j + 1] * x[j + 1];
    }
    x
}

/// Steps a single seeded field to the end of the run, recording the
/// domain-averaged concentration at the step boundaries nearest the grid
/// times.
pub fn fd_solve(
    config: &SimConfig,
    amplitude: f64,
    seed: u64,
    output_grid: &[f64],
) -> Result<ConcentrationTrace> {
    let n_steps = config.n_steps();
    if n_steps == 0 {
        return Err(KrptError::EmptyTrace);
    }
    let mut field = fd_initialize(config, amplitude, seed)?;
    let half_step = 0.5 * config.dt;
    let mut times = Vec::new();
    let mut mean = Vec::new();
    let mut gi = 0;
    let record = |t_now: f64, field: &GridField, times: &mut Vec<f64>, mean: &mut Vec<f64>, gi: &mut usize| {
        while *gi < output_grid.len() && output_grid[*gi] <= t_now + half_step {
            times.push(output_grid[*gi]);
            mean.push(field.mean_concentration(config.domain));
            *gi += 1;
        }
    };
    record(0.0, &field, &mut times, &mut mean, &mut gi);
    for _ in 0..n_steps {
        fd_step(&mut field, config)?;
        record(field.time, &field, &mut times, &mut mean, &mut gi);
    }
    if times.is_empty() {
        return Err(KrptError::EmptyTrace);
    }
    let std = vec![0.0; times.len()];
    Ok(ConcentrationTrace { times, mean, std })
}

/// Ensemble version of [`fd_solve`] with seeds `seed ^ r`.
pub fn fd_ensemble(
    config: &SimConfig,
    amplitude: f64,
    output_grid: &[f64],
) -> Result<ConcentrationTrace> {
    if config.n_realizations == 0 {
        return Err(KrptError::EmptyEnsemble);
    }
    let runs: Vec<Result<ConcentrationTrace>> = (0..config.n_realizations as u64)
        .into_par_iter()
        .map(|r| fd_solve(config, amplitude, config.seed ^ r, output_grid))
        .collect();
    let mut traces = Vec::with_capacity(runs.len());
    for run in runs {
        traces.push(run?);
    }
    Ok(reduce_traces(&traces))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::log_grid;
    use crate::moments::well_mixed;

    fn base() -> SimConfig {
        SimConfig::base().validated().unwrap()
    }

    #[test]
    fn amplitude_above_c0_is_rejected() {
        let cfg = base();
        assert!(matches!(
            fd_initialize(&cfg, 1.5, 1),
            Err(KrptError::NegativeConcentrationRisk { .. })
        ));
    }

    #[test]
    fn default_amplitude_caps_at_c0() {
        let cfg = base();
        // Variance matching would ask for sqrt(3) C0 here; the cap keeps
        // cells non-negative.
        assert_eq!(default_amplitude(&cfg), cfg.c0);
    }

    #[test]
    fn zero_amplitude_gives_a_flat_field() {
        let cfg = base();
        let field = fd_initialize(&cfg, 0.0, 1).unwrap();
        assert!(field.values_a.iter().all(|&v| v == cfg.c0));
        assert!(field.values_b.iter().all(|&v| v == cfg.c0));
    }

    #[test]
    fn perturbed_cells_have_uniform_moments() {
        let cfg = base();
        let amplitude = 0.5;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        let mut count = 0usize;
        for seed in 0..100u64 {
            let field = fd_initialize(&cfg, amplitude, seed).unwrap();
            for v in field.values_a.iter().chain(field.values_b.iter()) {
                let d = v - cfg.c0;
                sum += d;
                sum_sq += d * d;
                count += 1;
            }
        }
        let mean = sum / count as f64;
        let var = sum_sq / count as f64 - mean * mean;
        // Mean within 3 standard errors of a U(-a, a) sample of this size.
        let se = (amplitude * amplitude / 3.0 / count as f64).sqrt();
        assert!(mean.abs() < 3.0 * se, "mean {mean} se {se}");
        let expect = amplitude * amplitude / 3.0;
        assert!((var - expect).abs() < 0.05 * expect, "var {var}");
    }

    #[test]
    fn flat_field_without_reaction_is_stationary() {
        let cfg = SimConfig {
            rate: 0.0,
            ..SimConfig::base()
        }
        .validated()
        .unwrap();
        let mut field = fd_initialize(&cfg, 0.0, 1).unwrap();
        fd_step(&mut field, &cfg).unwrap();
        for v in &field.values_a {
            assert!((v - cfg.c0).abs() < 1e-13);
        }
    }

    #[test]
    fn reaction_only_step_is_the_discrete_logistic() {
        let cfg = SimConfig {
            diffusion: 0.0,
            ..SimConfig::base()
        }
        .validated()
        .unwrap();
        let mut field = fd_initialize(&cfg, 0.0, 1).unwrap();
        fd_step(&mut field, &cfg).unwrap();
        let expect = cfg.c0 - cfg.rate * cfg.dt * cfg.c0 * cfg.c0;
        for v in &field.values_a {
            assert!((v - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn species_mass_difference_is_conserved() {
        let cfg = base();
        let mut field = fd_initialize(&cfg, 0.8, 3).unwrap();
        let before = field.mass_difference();
        for _ in 0..20 {
            fd_step(&mut field, &cfg).unwrap();
            assert!((field.mass_difference() - before).abs() < 1e-12);
        }
    }

    #[test]
    fn cyclic_solver_matches_a_dense_elimination_oracle() {
        // Brute-force Gaussian elimination on the full periodic matrix.
        fn dense_solve(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Vec<f64> {
            let n = rhs.len();
            for col in 0..n {
                let pivot = (col..n)
                    .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
                    .unwrap();
                m.swap(col, pivot);
                rhs.swap(col, pivot);
                for row in 0..n {
                    if row != col {
                        let f = m[row][col] / m[col][col];
                        for k in 0..n {
                            m[row][k] -= f * m[col][k];
                        }
                        rhs[row] -= f * rhs[col];
                    }
                }
            }
            (0..n).map(|i| rhs[i] / m[i][i]).collect()
        }

        let n = 9;
        let (b, a) = (1.0 + 2.0 * 0.7, -0.7);
        let rhs: Vec<f64> = (0..n).map(|i| ((i * 7 + 3) % 5) as f64 - 1.5).collect();
        let mut dense = vec![vec![0.0; n]; n];
        for i in 0..n {
            dense[i][i] = b;
            dense[i][(i + 1) % n] = a;
            dense[i][(i + n - 1) % n] = a;
        }
        let expect = dense_solve(dense, rhs.clone());
        let got = solve_cyclic_uniform(b, a, &rhs);
        for (g, e) in got.iter().zip(expect.iter()) {
            assert!((g - e).abs() < 1e-12, "{g} vs {e}");
        }
    }

    #[test]
    fn flat_start_tracks_the_well_mixed_solution_late() {
        let cfg = base();
        let grid = log_grid(10.0, 1000.0, 60);
        let trace = fd_solve(&cfg, 0.0, 1, &grid).unwrap();
        let max_err = trace
            .times
            .iter()
            .zip(trace.mean.iter())
            .map(|(&t, &c)| (c - well_mixed(t, cfg.c0, cfg.rate)).abs())
            .fold(0.0f64, f64::max);
        assert!(max_err < 1e-3 * cfg.c0, "max flat-start error {max_err}");
    }

    #[test]
    fn pure_diffusion_smooths_the_field_monotonically() {
        let cfg = SimConfig {
            rate: 0.0,
            diffusion: 1e-3,
            ..SimConfig::base()
        }
        .validated()
        .unwrap();
        let mut field = fd_initialize(&cfg, 0.9, 5).unwrap();
        let mut prev = field.spatial_variance();
        for _ in 0..100 {
            fd_step(&mut field, &cfg).unwrap();
            let var = field.spatial_variance();
            assert!(var <= prev + 1e-15, "variance rose: {var} > {prev}");
            prev = var;
        }
    }

    #[test]
    fn grid_refinement_converges_with_a_prolonged_initial_field() {
        // Same piecewise-constant initial function solved on the coarse grid
        // and on its 2x refinement.
        let coarse_cfg = SimConfig {
            n_dirac: 500,
            n_gauss: 500,
            t_final: 1000.0,
            ..SimConfig::base()
        }
        .validated()
        .unwrap();
        let coarse = fd_initialize(&coarse_cfg, 0.9, 11).unwrap();
        let mut fine = GridField {
            cell_width: coarse.cell_width / 2.0,
            values_a: coarse.values_a.iter().flat_map(|&v| [v, v]).collect(),
            values_b: coarse.values_b.iter().flat_map(|&v| [v, v]).collect(),
            time: 0.0,
        };
        let mut coarse = coarse;
        for _ in 0..coarse_cfg.n_steps() {
            fd_step(&mut coarse, &coarse_cfg).unwrap();
            fd_step(&mut fine, &coarse_cfg).unwrap();
        }
        let c = coarse.mean_concentration(coarse_cfg.domain);
        let f = fine.mean_concentration(coarse_cfg.domain);
        assert!((c - f).abs() / c < 1e-3, "coarse {c} fine {f}");
    }
}
