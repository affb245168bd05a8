//! Stochastic particle simulator: mass-carrying particles of two species
//! react through a pairwise co-location kernel and diffuse by Langevin
//! steps on a domain with reflecting walls.
//!
//! A realization is deterministic given its seed. Initial positions come
//! from one seeded stream; each particle owns an independent stream for its
//! Brownian increments, which makes time-step refinement studies possible
//! with a shared noise path (`RunOptions::noise_substep`).

mod pairs;
mod stats;

pub use pairs::PairSweepReport;
pub use stats::{empirical_autocovariance, gaussian_autocovariance_theory, CovarianceEstimates};

use crate::core::{ConcentrationTrace, KernelSpec, SimConfig};
use crate::error::{KrptError, Result};
use crate::kernels::{Colocation, VariableWidth};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

/// Positions and masses of both species plus the active kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSystem {
    pub positions_a: Vec<f64>,
    pub positions_b: Vec<f64>,
    pub masses_a: Vec<f64>,
    pub masses_b: Vec<f64>,
    pub kernel: KernelSpec,
    pub time: f64,
}

impl ParticleSystem {
    pub fn total_mass_a(&self) -> f64 {
        self.masses_a.iter().sum()
    }

    pub fn total_mass_b(&self) -> f64 {
        self.masses_b.iter().sum()
    }

    /// Domain-averaged concentration of species A.
    pub fn mean_concentration(&self, domain: f64) -> f64 {
        self.total_mass_a() / domain
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Species {
    A,
    B,
}

impl std::fmt::Display for Species {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Species::A => write!(f, "A"),
            Species::B => write!(f, "B"),
        }
    }
}

/// Particles above the mass threshold at one instant.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub time: f64,
    /// Mass filter that was applied, recorded for the output header.
    pub threshold: f64,
    pub particles: Vec<(Species, f64, f64)>,
}

/// How the pairwise mass transfer is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PairLoopMode {
    /// Masses mutate inside the nested loop; later pairs see reduced masses.
    /// Loop order is fixed: A outer, B inner, ascending index.
    #[default]
    Sequential,
    /// All decrements are computed from start-of-step masses and applied at
    /// the end. Differs from `Sequential` at second order in the time step.
    SummedDecrement,
}

/// Whether to evaluate every pair or prune with a cell list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PairAcceleration {
    /// Exact evaluation of all pairs; the correctness reference.
    #[default]
    Exact,
    /// Cell-list pruning at the interaction cutoff. Must agree with the
    /// exact loop to 1e-9 relative on total mass per step.
    CellList,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub loop_mode: PairLoopMode,
    pub acceleration: PairAcceleration,
    /// Times at which to capture mass-filtered snapshots.
    pub snapshot_times: Vec<f64>,
    /// Mass filter for snapshots; defaults to 2% of the Dirac particle mass.
    pub snapshot_threshold: Option<f64>,
    /// When set, Brownian increments are drawn at this reference step and
    /// summed per step, so runs at different `dt` share one noise path.
    pub noise_substep: Option<f64>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            loop_mode: PairLoopMode::default(),
            acceleration: PairAcceleration::default(),
            snapshot_times: Vec::new(),
            snapshot_threshold: None,
            noise_substep: None,
        }
    }
}

/// Folds a coordinate into `[0, domain]` by reflection at the walls.
#[inline]
pub(crate) fn reflect_position(x: f64, domain: f64) -> f64 {
    let r = x.rem_euclid(2.0 * domain);
    if r > domain {
        2.0 * domain - r
    } else {
        r
    }
}

/// Shortest separation on a circle; used by the covariance estimators,
/// which treat the initial uniform field as translation invariant.
#[inline(always)]
pub fn min_image(dx: f64, domain: f64, half_domain: f64) -> f64 {
    if dx > half_domain {
        dx - domain
    } else if dx < -half_domain {
        dx + domain
    } else {
        dx
    }
}

/// Independent per-particle stream for Brownian increments.
fn particle_stream(seed: u64, species: Species, index: usize) -> ChaCha8Rng {
    let tag = match species {
        Species::A => 0x517c_c1b7_2722_0a95_u64,
        Species::B => 0x6c62_272e_07bb_0142_u64,
    };
    ChaCha8Rng::seed_from_u64(
        seed ^ tag.wrapping_add((index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)),
    )
}

/// Draws `n` i.i.d. uniform positions per species and assigns every particle
/// the mass `C0 * domain / n`.
pub fn initialize(config: &SimConfig, kernel: KernelSpec, seed: u64) -> Result<ParticleSystem> {
    if config.dim != 1 {
        return Err(KrptError::UnsupportedDimension(config.dim));
    }
    let n = kernel.particle_count(config);
    let mass = config.particle_mass(n).value();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |count: usize| -> Vec<f64> {
        (0..count)
            .map(|_| rng.random_range(0.0..config.domain))
            .collect()
    };
    Ok(ParticleSystem {
        positions_a: draw(n),
        positions_b: draw(n),
        masses_a: vec![mass; n],
        masses_b: vec![mass; n],
        kernel,
        time: 0.0,
    })
}

fn reaction_width(system: &ParticleSystem, provider: Option<&VariableWidth>) -> f64 {
    match system.kernel {
        KernelSpec::Dirac => 0.0,
        KernelSpec::FixedGaussian { half_width } => half_width,
        KernelSpec::VariableGaussian => provider
            .expect("variable kernel requires a width provider")
            .width(system.time),
    }
}

/// One pairwise mass-transfer step with an explicit kernel half-width.
pub fn reaction_step_with_width(
    system: &mut ParticleSystem,
    config: &SimConfig,
    opts: &RunOptions,
    half_width: f64,
) -> Result<PairSweepReport> {
    let coloc = Colocation::new(half_width, config.diffusion, config.dt, config.dim)?;
    let coeff = config.rate * config.dt;
    let n = system.masses_a.len();
    let overdraw_floor = -1e-12 * config.particle_mass(n).value();
    pairs::sweep(system, config, opts, &coloc, coeff, overdraw_floor)
}

/// One pairwise mass-transfer step, resolving the kernel width from the
/// system's kernel (recomputed from the current time for variable kernels).
pub fn reaction_step(
    system: &mut ParticleSystem,
    config: &SimConfig,
    opts: &RunOptions,
) -> Result<PairSweepReport> {
    let provider = match system.kernel {
        KernelSpec::VariableGaussian => Some(VariableWidth::new(config)?),
        _ => None,
    };
    let width = reaction_width(system, provider.as_ref());
    reaction_step_with_width(system, config, opts, width)
}

/// Langevin move of every particle, reflected at the walls. `streams`
/// holds one RNG per particle, species A first.
fn diffusion_step_with_streams(
    system: &mut ParticleSystem,
    config: &SimConfig,
    opts: &RunOptions,
    streams: &mut [ChaCha8Rng],
) {
    let substeps = opts
        .noise_substep
        .map(|dt_ref| (config.dt / dt_ref).round().max(1.0) as usize)
        .unwrap_or(1);
    let scale = (2.0 * config.diffusion * (config.dt / substeps as f64)).sqrt();
    let domain = config.domain;
    let n = system.positions_a.len();
    let (streams_a, streams_b) = streams.split_at_mut(n);
    for (x, rng) in system.positions_a.iter_mut().zip(streams_a) {
        let mut xi_sum = 0.0;
        for _ in 0..substeps {
            let xi: f64 = rng.sample(StandardNormal);
            xi_sum += xi;
        }
        *x = reflect_position(*x + scale * xi_sum, domain);
    }
    for (x, rng) in system.positions_b.iter_mut().zip(streams_b) {
        let mut xi_sum = 0.0;
        for _ in 0..substeps {
            let xi: f64 = rng.sample(StandardNormal);
            xi_sum += xi;
        }
        *x = reflect_position(*x + scale * xi_sum, domain);
    }
}

/// Langevin move driven by a caller-provided RNG (one stream for the whole
/// system). Draw order is A then B, ascending index.
pub fn diffusion_step<R: Rng>(system: &mut ParticleSystem, config: &SimConfig, rng: &mut R) {
    let scale = (2.0 * config.diffusion * config.dt).sqrt();
    let domain = config.domain;
    for x in system
        .positions_a
        .iter_mut()
        .chain(system.positions_b.iter_mut())
    {
        let xi: f64 = rng.sample(StandardNormal);
        *x = reflect_position(*x + scale * xi, domain);
    }
}

/// Output of a single realization.
#[derive(Debug, Clone)]
pub struct RealizationOutput {
    pub trace: ConcentrationTrace,
    pub snapshots: Vec<Snapshot>,
}

/// Runs one realization: reactions first, then diffusion, within every step.
///
/// The trace records the domain-averaged concentration of species A at the
/// step boundaries nearest the requested grid times.
pub fn run_realization(
    config: &SimConfig,
    kernel: KernelSpec,
    seed: u64,
    output_grid: &[f64],
    opts: &RunOptions,
) -> Result<RealizationOutput> {
    let n_steps = config.n_steps();
    if n_steps == 0 {
        return Err(KrptError::EmptyTrace);
    }
    let mut system = initialize(config, kernel, seed)?;
    let n = system.positions_a.len();
    let mut streams: Vec<ChaCha8Rng> = (0..n)
        .map(|i| particle_stream(seed, Species::A, i))
        .chain((0..n).map(|i| particle_stream(seed, Species::B, i)))
        .collect();

    let provider = match kernel {
        KernelSpec::VariableGaussian => Some(VariableWidth::new(config)?),
        _ => None,
    };
    let threshold = opts
        .snapshot_threshold
        .unwrap_or(0.02 * config.mass_dirac());

    let mut times = Vec::with_capacity(output_grid.len());
    let mut mean = Vec::with_capacity(output_grid.len());
    let mut snapshots = Vec::new();
    let half_step = 0.5 * config.dt;
    let mut grid_idx = 0;
    let mut snap_idx = 0;
    let record_up_to = |t_now: f64,
                           system: &ParticleSystem,
                           times: &mut Vec<f64>,
                           mean: &mut Vec<f64>,
                           snapshots: &mut Vec<Snapshot>,
                           grid_idx: &mut usize,
                           snap_idx: &mut usize| {
        while *grid_idx < output_grid.len() && output_grid[*grid_idx] <= t_now + half_step {
            times.push(output_grid[*grid_idx]);
            mean.push(system.mean_concentration(config.domain));
            *grid_idx += 1;
        }
        while *snap_idx < opts.snapshot_times.len()
            && opts.snapshot_times[*snap_idx] <= t_now + half_step
        {
            snapshots.push(take_snapshot(system, threshold));
            *snap_idx += 1;
        }
    };

    record_up_to(
        0.0,
        &system,
        &mut times,
        &mut mean,
        &mut snapshots,
        &mut grid_idx,
        &mut snap_idx,
    );
    for step in 1..=n_steps {
        let width = reaction_width(&system, provider.as_ref());
        reaction_step_with_width(&mut system, config, opts, width)?;
        diffusion_step_with_streams(&mut system, config, opts, &mut streams);
        system.time = step as f64 * config.dt;
        record_up_to(
            system.time,
            &system,
            &mut times,
            &mut mean,
            &mut snapshots,
            &mut grid_idx,
            &mut snap_idx,
        );
    }
    if let Some(p) = provider {
        if p.clamped() {
            eprintln!(
                "note: variable kernel width clamped at tau* = {:.6e}",
                p.tau_star()
            );
        }
    }
    if times.is_empty() {
        return Err(KrptError::EmptyTrace);
    }
    let std = vec![0.0; times.len()];
    Ok(RealizationOutput {
        trace: ConcentrationTrace { times, mean, std },
        snapshots,
    })
}

fn take_snapshot(system: &ParticleSystem, threshold: f64) -> Snapshot {
    let mut particles = Vec::new();
    for (x, m) in system.positions_a.iter().zip(system.masses_a.iter()) {
        if *m > threshold {
            particles.push((Species::A, *x, *m));
        }
    }
    for (x, m) in system.positions_b.iter().zip(system.masses_b.iter()) {
        if *m > threshold {
            particles.push((Species::B, *x, *m));
        }
    }
    Snapshot {
        time: system.time,
        threshold,
        particles,
    }
}

/// Runs `n_realizations` with seeds `seed ^ r` and reduces per-time mean and
/// sample standard deviation. The reduction is performed in realization
/// order, so the result does not depend on scheduling.
pub fn run_ensemble(
    config: &SimConfig,
    kernel: KernelSpec,
    output_grid: &[f64],
    opts: &RunOptions,
) -> Result<ConcentrationTrace> {
    if config.n_realizations == 0 {
        return Err(KrptError::EmptyEnsemble);
    }
    let runs: Vec<Result<RealizationOutput>> = (0..config.n_realizations as u64)
        .into_par_iter()
        .map(|r| run_realization(config, kernel, config.seed ^ r, output_grid, opts))
        .collect();
    let mut traces = Vec::with_capacity(runs.len());
    for run in runs {
        traces.push(run?.trace);
    }
    Ok(reduce_traces(&traces))
}

/// Pointwise mean and sample standard deviation of equally-gridded traces.
pub fn reduce_traces(traces: &[ConcentrationTrace]) -> ConcentrationTrace {
    let n = traces.len();
    let len = traces[0].times.len();
    let mut mean = vec![0.0; len];
    let mut std = vec![0.0; len];
    for tr in traces {
        for (m, v) in mean.iter_mut().zip(tr.mean.iter()) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }
    if n > 1 {
        for tr in traces {
            for (s, (v, m)) in std.iter_mut().zip(tr.mean.iter().zip(mean.iter())) {
                *s += (v - m) * (v - m);
            }
        }
        for s in std.iter_mut() {
            *s = (*s / (n - 1) as f64).sqrt();
        }
    }
    ConcentrationTrace {
        times: traces[0].times.clone(),
        mean,
        std,
    }
}
