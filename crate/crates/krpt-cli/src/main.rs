//! Experiment driver for the krpt toolkit.
//!
//! Subcommands: `simulate`, `moments`, `match-width`, `compare`, `snapshot`.
//! Configs are flat `key = value` files; any flag given on the command line
//! overrides the file. Exit codes: 0 success, 1 solver error, 2 usage or
//! config error.

use clap::{Args, Parser, Subcommand, ValueEnum};
use krpt::core::{log_grid, KernelSpec, SimConfig};
use krpt::engine::{self, PairAcceleration, PairLoopMode, RunOptions};
use krpt::error::KrptError;
use krpt::eulerian;
use krpt::kernels::{self, VariableWidth, WidthSelection};
use krpt::moments::{self, MomentSolution};

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "krpt", version, about = "Reactive particle tracking experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a particle ensemble and write its concentration trace
    Simulate(SimulateArgs),
    /// Solve the mean-concentration moment equations for both kernels
    Moments(MomentsArgs),
    /// Resolve a Gaussian kernel half-width for the configured counts
    MatchWidth(MatchWidthArgs),
    /// Bundle particle, moment, well-mixed, and optional grid solutions
    Compare(CompareArgs),
    /// Record mass-filtered particle snapshots from a single realization
    Snapshot(SnapshotArgs),
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Path to a key = value config file
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    diffusion: Option<f64>,
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long)]
    c0: Option<f64>,
    #[arg(long)]
    domain: Option<f64>,
    #[arg(long)]
    n_dirac: Option<usize>,
    #[arg(long)]
    n_gauss: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_final: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_realizations: Option<usize>,
}

impl ConfigArgs {
    fn load(&self) -> Result<SimConfig, CliError> {
        let text = fs::read_to_string(&self.config)
            .map_err(|e| CliError::Usage(format!("cannot read config {:?}: {e}", self.config)))?;
        let mut cfg = SimConfig::from_key_values(&text)
            .map_err(|e| CliError::Usage(format!("config {:?}: {e}", self.config)))?;
        if let Some(v) = self.diffusion {
            cfg.diffusion = v;
        }
        if let Some(v) = self.rate {
            cfg.rate = v;
        }
        if let Some(v) = self.c0 {
            cfg.c0 = v;
        }
        if let Some(v) = self.domain {
            cfg.domain = v;
        }
        if let Some(v) = self.n_dirac {
            cfg.n_dirac = v;
        }
        if let Some(v) = self.n_gauss {
            cfg.n_gauss = v;
        }
        if let Some(v) = self.dt {
            cfg.dt = v;
        }
        if let Some(v) = self.t_final {
            cfg.t_final = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.n_realizations {
            cfg.n_realizations = v;
        }
        cfg.validated()
            .map_err(|e| CliError::Usage(format!("config {:?}: {e}", self.config)))
    }
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum KernelChoice {
    Dirac,
    Gaussian,
    Variable,
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum MatchChoice {
    TStar,
    LeastSquares,
}

#[derive(Args, Clone)]
struct KernelArgs {
    /// Particle kernel to simulate with
    #[arg(long, value_enum, default_value = "dirac")]
    kernel: KernelChoice,
    /// Width-selection strategy for Gaussian kernels
    #[arg(long = "match", value_enum, default_value = "least-squares")]
    matching: MatchChoice,
    /// Matching time for the t-star strategy
    #[arg(long)]
    t_star: Option<f64>,
    /// Explicit half-width, bypassing the matching strategies
    #[arg(long)]
    half_width: Option<f64>,
}

impl KernelArgs {
    fn resolve(&self, config: &SimConfig) -> Result<KernelSpec, CliError> {
        match self.kernel {
            KernelChoice::Dirac => Ok(KernelSpec::Dirac),
            KernelChoice::Variable => Ok(KernelSpec::VariableGaussian),
            KernelChoice::Gaussian => {
                if let Some(w) = self.half_width {
                    return KernelSpec::fixed(w).map_err(solver);
                }
                let selection = match self.matching {
                    MatchChoice::TStar => WidthSelection::SpecificTime {
                        t_star: self.t_star.unwrap_or(config.t_final),
                    },
                    MatchChoice::LeastSquares => WidthSelection::LeastSquares {
                        t_grid: log_grid(1e-2, config.t_final, 100),
                        upper_fraction: kernels::UPPER_FRACTION_DEFAULT,
                    },
                };
                selection.resolve(config).map_err(solver)
            }
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    kernel: KernelArgs,
    /// Output directory
    #[arg(long, default_value = "out")]
    output: PathBuf,
    /// Comma-separated times at which to record snapshots
    #[arg(long, value_delimiter = ',')]
    snapshot_times: Vec<f64>,
    /// Prune far pairs with a cell list (validated against the exact loop)
    #[arg(long)]
    cell_list: bool,
    /// Apply all mass decrements at the end of each step
    #[arg(long)]
    summed: bool,
    /// Number of output grid points (log-spaced over [dt, t_final])
    #[arg(long, default_value_t = 200)]
    grid_points: usize,
}

#[derive(Args)]
struct MomentsArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    kernel: KernelArgs,
    #[arg(long, default_value = "out")]
    output: PathBuf,
    #[arg(long, default_value_t = 200)]
    grid_points: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyChoice {
    TStar,
    LeastSquares,
    Variable,
}

#[derive(Args)]
struct MatchWidthArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Width-selection strategy to report on
    #[arg(long, value_enum)]
    strategy: StrategyChoice,
    #[arg(long)]
    t_star: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum Recipe {
    /// Least-squares matched Gaussian against the Dirac baseline
    Base,
    /// Single-time matching at t* = 100
    Tstar100,
    /// Single-time matching at t* = 1000
    Tstar1000,
    /// Least-squares matching (alias of base)
    LeastSquares,
    /// Time-variable kernel width
    Variable,
    /// Domain sizes 1..16 with counts scaled in proportion
    OmegaSweep,
    /// Base bundle plus the finite-difference reference
    EulerianCompare,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, value_enum, default_value = "base")]
    recipe: Recipe,
    /// Include the finite-difference reference column
    #[arg(long)]
    with_eulerian: bool,
    #[arg(long, default_value = "out")]
    output: PathBuf,
    #[arg(long, default_value_t = 200)]
    grid_points: usize,
    /// Matching time used by the omega-sweep and t-star recipes
    #[arg(long)]
    t_star: Option<f64>,
    #[arg(long)]
    cell_list: bool,
}

#[derive(Args)]
struct SnapshotArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    kernel: KernelArgs,
    /// Comma-separated snapshot times
    #[arg(long, value_delimiter = ',', required = true)]
    times: Vec<f64>,
    #[arg(long, default_value = "out")]
    output: PathBuf,
    /// Mass filter as a fraction of the Dirac particle mass
    #[arg(long, default_value_t = 0.02)]
    threshold_fraction: f64,
}

enum CliError {
    Usage(String),
    Solver(String),
}

fn solver(e: KrptError) -> CliError {
    CliError::Solver(e.to_string())
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("KRPT_THREADS") {
        match threads.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global();
            }
            _ => {
                eprintln!("error: KRPT_THREADS must be a positive integer");
                return ExitCode::from(2);
            }
        }
    }
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Moments(args) => cmd_moments(args),
        Command::MatchWidth(args) => cmd_match_width(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Snapshot(args) => cmd_snapshot(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Solver(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

/// Prints the resolved width and warns when it breaks the domain-size rule
/// of thumb.
fn report_width(kernel: &KernelSpec, config: &SimConfig) -> Result<(), CliError> {
    match kernel {
        KernelSpec::Dirac => println!("resolved half-width = 0 (dirac)"),
        KernelSpec::FixedGaussian { half_width } => {
            println!("resolved half-width = {half_width:.6e}");
            if kernels::exceeds_domain_rule(*half_width, config.domain) {
                eprintln!(
                    "warning: half-width/domain = {:.3} exceeds 0.12; expect domain effects",
                    half_width / config.domain
                );
            }
        }
        KernelSpec::VariableGaussian => {
            println!("resolved half-width = variable");
            let vw = VariableWidth::new(config).map_err(solver)?;
            let horizon = config.t_final.min(vw.tau_star());
            let peak = (0..200)
                .map(|i| vw.width(config.dt / 2.0 + horizon * i as f64 / 199.0))
                .fold(0.0f64, f64::max);
            if kernels::exceeds_domain_rule(peak, config.domain) {
                eprintln!(
                    "warning: variable half-width peaks at {:.3} of the domain (> 0.12); \
                     expect domain effects",
                    peak / config.domain
                );
            }
        }
    }
    Ok(())
}

fn run_options(cell_list: bool, summed: bool) -> RunOptions {
    RunOptions {
        loop_mode: if summed {
            PairLoopMode::SummedDecrement
        } else {
            PairLoopMode::Sequential
        },
        acceleration: if cell_list {
            PairAcceleration::CellList
        } else {
            PairAcceleration::Exact
        },
        ..RunOptions::default()
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)
            .map_err(|e| CliError::Usage(format!("cannot create {parent:?}: {e}")))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::Usage(format!("cannot write {path:?}: {e}")))
}

fn kernel_file_tag(kernel: &KernelSpec) -> &'static str {
    match kernel {
        KernelSpec::Dirac => "dirac",
        KernelSpec::FixedGaussian { .. } => "gaussian",
        KernelSpec::VariableGaussian => "variable",
    }
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let config = args.config.load()?;
    let kernel = args.kernel.resolve(&config)?;
    report_width(&kernel, &config)?;
    println!(
        "damkohler = {}",
        krpt::damkohler(&config, kernel.particle_count(&config))
            .map(|d| format!("{d:.6}"))
            .unwrap_or_else(|_| "undefined (D = 0)".to_string())
    );
    let grid = log_grid(config.dt, config.t_final, args.grid_points.max(2));
    let opts = run_options(args.cell_list, args.summed);
    let trace = engine::run_ensemble(&config, kernel, &grid, &opts).map_err(solver)?;
    let mut buf = Vec::new();
    krpt::io::write_trace_csv(&mut buf, &config, &kernel.to_string(), &[], &trace)
        .map_err(solver)?;
    let path = args
        .output
        .join(format!("trace_{}.csv", kernel_file_tag(&kernel)));
    write_file(&path, &buf)?;
    println!("wrote {}", path.display());

    if !args.snapshot_times.is_empty() {
        let snap_opts = RunOptions {
            snapshot_times: args.snapshot_times.clone(),
            ..run_options(args.cell_list, args.summed)
        };
        let out = engine::run_realization(&config, kernel, config.seed, &grid, &snap_opts)
            .map_err(solver)?;
        for snapshot in &out.snapshots {
            let mut buf = Vec::new();
            krpt::io::write_snapshot_csv(
                &mut buf,
                &config,
                &kernel.to_string(),
                config.seed,
                snapshot,
            )
            .map_err(solver)?;
            let path = args.output.join(format!("snapshot_t{}.csv", snapshot.time));
            write_file(&path, &buf)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

/// Moment solution rows must respect the analytic lower bound before they
/// are written out.
fn check_lower_bound(solution: &MomentSolution, config: &SimConfig) -> Result<(), CliError> {
    for (t, c) in solution.trace.times.iter().zip(solution.trace.mean.iter()) {
        let lower = moments::well_mixed(*t, config.c0, config.rate);
        if *c < lower * (1.0 - 1e-12) {
            return Err(CliError::Solver(format!(
                "moment solution violates the analytic lower bound at t = {t}: {c} < {lower}"
            )));
        }
    }
    Ok(())
}

fn cmd_moments(args: MomentsArgs) -> Result<(), CliError> {
    let config = args.config.load()?;
    if args.kernel.kernel == KernelChoice::Variable {
        return Err(CliError::Usage(
            "the moment solver supports dirac and fixed gaussian kernels only".into(),
        ));
    }
    // Always resolve a Gaussian width so both traces can be written.
    let gauss_kernel = KernelArgs {
        kernel: KernelChoice::Gaussian,
        ..args.kernel.clone()
    }
    .resolve(&config)?;
    report_width(&gauss_kernel, &config)?;
    let grid = log_grid(config.dt, config.t_final, args.grid_points.max(2));
    let delta = 1.0 / config.n_gauss as f64 - 1.0 / config.n_dirac as f64;
    let width = gauss_kernel.fixed_half_width().unwrap_or(0.0);

    for (name, kernel) in [("dirac", KernelSpec::Dirac), ("gaussian", gauss_kernel)] {
        let solution =
            moments::solve_mean_concentration(kernel, &config, &grid).map_err(solver)?;
        check_lower_bound(&solution, &config)?;
        let bounds: Vec<_> = grid
            .iter()
            .map(|&t| moments::error_bound(t, delta, &config, width))
            .collect();
        let mut buf = Vec::new();
        krpt::io::write_moments_csv(&mut buf, &config, &kernel.to_string(), &solution, &bounds)
            .map_err(solver)?;
        let path = args.output.join(format!("moments_{name}.csv"));
        write_file(&path, &buf)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_match_width(args: MatchWidthArgs) -> Result<(), CliError> {
    let config = args.config.load()?;
    let tau = kernels::max_matching_time(
        config.n_gauss,
        config.n_dirac,
        config.diffusion,
        config.domain,
        config.dim,
        config.dt / 2.0,
    )
    .map_err(solver)?;
    println!("tau_star = {:.6e}", tau.value());
    match args.strategy {
        StrategyChoice::TStar => {
            let t_star = args.t_star.unwrap_or(config.t_final);
            let width = kernels::width_at_time(
                t_star,
                config.n_gauss,
                config.n_dirac,
                config.diffusion,
                config.domain,
                config.dim,
            )
            .map_err(solver)?;
            println!("strategy = t-star ({t_star})");
            println!("half_width = {width:.6e}");
            if kernels::exceeds_domain_rule(width, config.domain) {
                eprintln!(
                    "warning: half-width/domain = {:.3} exceeds 0.12",
                    width / config.domain
                );
            }
        }
        StrategyChoice::LeastSquares => {
            let grid = log_grid(1e-2, config.t_final, 100);
            let ls = kernels::least_squares_width(&grid, &config, kernels::UPPER_FRACTION_DEFAULT)
                .map_err(solver)?;
            println!("strategy = least-squares");
            println!("half_width = {:.6e}", ls.half_width);
            println!("objective = {:.6e}", ls.objective);
            if kernels::exceeds_domain_rule(ls.half_width, config.domain) {
                eprintln!(
                    "warning: half-width/domain = {:.3} exceeds 0.12",
                    ls.half_width / config.domain
                );
            }
        }
        StrategyChoice::Variable => {
            let vw = VariableWidth::new(&config).map_err(solver)?;
            println!("strategy = variable");
            println!("half_width(dt/2) = {:.6e}", vw.width(0.0));
            println!("half_width(t_final) = {:.6e}", vw.width(config.t_final));
        }
    }
    Ok(())
}

fn cmd_compare(args: CompareArgs) -> Result<(), CliError> {
    let base_config = args.config.load()?;
    let with_eulerian = args.with_eulerian || args.recipe == Recipe::EulerianCompare;
    let omegas: Vec<f64> = if args.recipe == Recipe::OmegaSweep {
        vec![1.0, 2.0, 4.0, 8.0, 16.0]
    } else {
        vec![base_config.domain]
    };

    for &omega in &omegas {
        let config = if args.recipe == Recipe::OmegaSweep {
            // Counts scale with the domain so the Damkohler number is fixed.
            let factor = omega / base_config.domain;
            SimConfig {
                domain: omega,
                n_dirac: (base_config.n_dirac as f64 * factor).round() as usize,
                n_gauss: (base_config.n_gauss as f64 * factor).round() as usize,
                ..base_config.clone()
            }
            .validated()
            .map_err(solver)?
        } else {
            base_config.clone()
        };
        let kernel = match args.recipe {
            Recipe::Tstar100 => WidthSelection::SpecificTime { t_star: 100.0 }
                .resolve(&config)
                .map_err(solver)?,
            Recipe::Tstar1000 | Recipe::OmegaSweep => WidthSelection::SpecificTime {
                t_star: args.t_star.unwrap_or(1000.0),
            }
            .resolve(&config)
            .map_err(solver)?,
            Recipe::Variable => KernelSpec::VariableGaussian,
            Recipe::Base | Recipe::LeastSquares | Recipe::EulerianCompare => {
                WidthSelection::LeastSquares {
                    t_grid: log_grid(1e-2, config.t_final, 100),
                    upper_fraction: kernels::UPPER_FRACTION_DEFAULT,
                }
                .resolve(&config)
                .map_err(solver)?
            }
        };
        report_width(&kernel, &config)?;
        let (max_disc, final_disc) = write_bundle(&args, &config, kernel, omega, with_eulerian)?;
        println!(
            "omega = {omega}: max particle discrepancy = {max_disc:.4e}, final = {final_disc:.4e}"
        );
    }
    Ok(())
}

fn write_bundle(
    args: &CompareArgs,
    config: &SimConfig,
    kernel: KernelSpec,
    omega: f64,
    with_eulerian: bool,
) -> Result<(f64, f64), CliError> {
    let grid = log_grid(config.dt, config.t_final, args.grid_points.max(2));
    let opts = run_options(args.cell_list, false);

    let dirac_trace =
        engine::run_ensemble(config, KernelSpec::Dirac, &grid, &opts).map_err(solver)?;
    let gauss_trace = engine::run_ensemble(config, kernel, &grid, &opts).map_err(solver)?;
    let dirac_moments =
        moments::solve_mean_concentration(KernelSpec::Dirac, config, &grid).map_err(solver)?;
    // Variable kernels have no moment-equation counterpart; that column is
    // left empty (NaN) to keep the bundle rectangular.
    let gauss_moments = match kernel {
        KernelSpec::VariableGaussian => None,
        k => Some(moments::solve_mean_concentration(k, config, &grid).map_err(solver)?),
    };
    let fd_trace = if with_eulerian {
        Some(
            eulerian::fd_ensemble(config, eulerian::default_amplitude(config), &grid)
                .map_err(solver)?,
        )
    } else {
        None
    };

    let mut max_disc = 0.0f64;
    for (d, g) in dirac_trace.mean.iter().zip(gauss_trace.mean.iter()) {
        max_disc = max_disc.max((d - g).abs());
    }
    let final_disc = (dirac_trace.mean.last().unwrap() - gauss_trace.mean.last().unwrap()).abs();

    let width = kernel.fixed_half_width();
    let mut text = String::new();
    let _ = writeln!(text, "# krpt compare bundle");
    let _ = writeln!(text, "# kernel = {kernel}");
    let _ = writeln!(text, "# max_particle_discrepancy = {max_disc:.16e}");
    let _ = writeln!(text, "# final_particle_discrepancy = {final_disc:.16e}");
    if let Some(w) = width {
        let _ = writeln!(text, "# lg_over_omega = {:.16e}", w / config.domain);
    }
    for line in config.to_key_values().lines() {
        let _ = writeln!(text, "# {line}");
    }
    let mut header = String::from(
        "time,well_mixed,cbar_dirac_mean,cbar_dirac_std,cbar_gauss_mean,cbar_gauss_std,\
         moment_dirac,moment_gauss,particle_diff,lg_over_omega",
    );
    if fd_trace.is_some() {
        header.push_str(",fd_mean,fd_std");
    }
    let _ = writeln!(text, "{header}");
    for i in 0..grid.len() {
        let lg_col = width.map(|w| w / config.domain).unwrap_or(f64::NAN);
        let _ = write!(
            text,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            grid[i],
            moments::well_mixed(grid[i], config.c0, config.rate),
            dirac_trace.mean[i],
            dirac_trace.std[i],
            gauss_trace.mean[i],
            gauss_trace.std[i],
            dirac_moments.trace.mean[i],
            gauss_moments
                .as_ref()
                .map(|m| m.trace.mean[i])
                .unwrap_or(f64::NAN),
            (dirac_trace.mean[i] - gauss_trace.mean[i]).abs(),
            lg_col,
        );
        if let Some(fd) = &fd_trace {
            let _ = write!(text, ",{:.16e},{:.16e}", fd.mean[i], fd.std[i]);
        }
        text.push('\n');
    }

    let name = if args.recipe == Recipe::OmegaSweep {
        format!("compare_{}_omega{omega}.csv", recipe_name(args.recipe))
    } else {
        format!("compare_{}.csv", recipe_name(args.recipe))
    };
    let path = args.output.join(name);
    write_file(&path, text.as_bytes())?;
    println!("wrote {}", path.display());
    Ok((max_disc, final_disc))
}

fn recipe_name(recipe: Recipe) -> &'static str {
    match recipe {
        Recipe::Base => "base",
        Recipe::Tstar100 => "tstar100",
        Recipe::Tstar1000 => "tstar1000",
        Recipe::LeastSquares => "least_squares",
        Recipe::Variable => "variable",
        Recipe::OmegaSweep => "omega_sweep",
        Recipe::EulerianCompare => "eulerian",
    }
}

fn cmd_snapshot(args: SnapshotArgs) -> Result<(), CliError> {
    let config = args.config.load()?;
    let kernel = args.kernel.resolve(&config)?;
    report_width(&kernel, &config)?;
    let opts = RunOptions {
        snapshot_times: args.times.clone(),
        snapshot_threshold: Some(args.threshold_fraction * config.mass_dirac()),
        ..RunOptions::default()
    };
    let grid = [config.t_final];
    let out =
        engine::run_realization(&config, kernel, config.seed, &grid, &opts).map_err(solver)?;
    for snapshot in &out.snapshots {
        let mut buf = Vec::new();
        krpt::io::write_snapshot_csv(
            &mut buf,
            &config,
            &kernel.to_string(),
            config.seed,
            snapshot,
        )
        .map_err(solver)?;
        let path = args.output.join(format!("snapshot_t{}.csv", snapshot.time));
        write_file(&path, &buf)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
