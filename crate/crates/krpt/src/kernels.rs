//! Co-location probability of particle pairs and selection of the Gaussian
//! kernel half-width.
//!
//! Three strategies resolve a half-width for a reduced particle count:
//! matching at a single time, least-squares matching of the mean-concentration
//! solutions over a time grid, and a per-step time-variable width.

use crate::core::{KernelSpec, SimConfig};
use crate::error::{KrptError, Result};
use crate::moments;

use std::f64::consts::PI;

/// Default upper bound for the least-squares search, as a fraction of the
/// domain.
pub const UPPER_FRACTION_DEFAULT: f64 = 0.25;

/// Rule-of-thumb ratio above which finite-domain effects distort the
/// solution; callers should warn when a resolved width exceeds it.
pub const DOMAIN_EFFECT_RATIO: f64 = 0.12;

/// True when a resolved half-width is large enough relative to the domain
/// to trigger the domain-effect warning.
pub fn exceeds_domain_rule(half_width: f64, domain: f64) -> bool {
    half_width / domain > DOMAIN_EFFECT_RATIO
}

/// Gaussian co-location density with precomputed constants, for use in the
/// pairwise reaction loop.
///
/// Separations whose density underflows to zero are short-circuited before
/// calling `exp`; the returned values are bit-identical to the plain
/// evaluation.
#[derive(Debug, Clone, Copy)]
pub struct Colocation {
    norm: f64,
    inv_four_var: f64,
    skip_sep_sq: f64,
    variance: f64,
}

impl Colocation {
    pub fn new(half_width: f64, diffusion: f64, dt: f64, dim: u32) -> Result<Self> {
        if !(half_width >= 0.0) {
            return Err(KrptError::NegativeHalfWidth(half_width));
        }
        if !(diffusion >= 0.0) {
            return Err(KrptError::NegativeDiffusion(diffusion));
        }
        if !(dt > 0.0) {
            return Err(KrptError::NonPositiveTimeStep(dt));
        }
        let variance = half_width * half_width + 2.0 * diffusion * dt;
        if variance <= 0.0 {
            return Err(KrptError::DegenerateKernel);
        }
        let inv_four_var = 1.0 / (4.0 * variance);
        Ok(Colocation {
            norm: neg_half_dim_power(4.0 * PI * variance, dim),
            inv_four_var,
            // exp(-x) is exactly 0.0 for x >= 750; skipping there changes nothing.
            skip_sep_sq: 750.0 / inv_four_var,
            variance,
        })
    }

    /// Density at squared separation `sep_sq`.
    #[inline(always)]
    pub fn density_at_sq(&self, sep_sq: f64) -> f64 {
        if sep_sq >= self.skip_sep_sq {
            0.0
        } else {
            self.norm * (-sep_sq * self.inv_four_var).exp()
        }
    }

    /// Total variance `half_width^2 + 2 D dt` of the co-location Gaussian
    /// along one axis (the density itself has variance twice this).
    pub fn variance(&self) -> f64 {
        self.variance
    }

    /// Peak density at zero separation.
    pub fn peak(&self) -> f64 {
        self.norm
    }

    /// Separation beyond which the density evaluates to exactly zero.
    pub fn underflow_radius(&self) -> f64 {
        self.skip_sep_sq.sqrt()
    }
}

/// Probability density that a particle pair at separation `separation`
/// co-locates within one step.
pub fn colocation_probability(
    separation: f64,
    half_width: f64,
    diffusion: f64,
    dt: f64,
    dim: u32,
) -> Result<f64> {
    let c = Colocation::new(half_width, diffusion, dt, dim)?;
    Ok(c.density_at_sq(separation * separation))
}

/// `x^(-d/2)` with fast paths for the low dimensions used in practice.
pub(crate) fn neg_half_dim_power(x: f64, dim: u32) -> f64 {
    match dim {
        1 => 1.0 / x.sqrt(),
        2 => 1.0 / x,
        _ => x.powf(-0.5 * dim as f64),
    }
}

/// `x^(-2/d)` for the bracket term of the width formula.
fn neg_two_over_dim_power(x: f64, dim: u32) -> f64 {
    match dim {
        1 => 1.0 / (x * x),
        2 => 1.0 / x,
        _ => x.powf(-2.0 / dim as f64),
    }
}

fn width_radicand(
    t: f64,
    n_gauss: usize,
    n_dirac: usize,
    diffusion: f64,
    domain: f64,
    dim: u32,
) -> f64 {
    let ratio = n_gauss as f64 / n_dirac as f64;
    let inv = neg_half_dim_power(8.0 * PI * diffusion * t, dim);
    // Written so that ratio = 1 collapses the domain terms exactly.
    let bracket = ratio * inv + (1.0 - ratio) / domain;
    neg_two_over_dim_power(bracket, dim) / (4.0 * PI) - 2.0 * diffusion * t
}

/// Half-width that makes the Gaussian and Dirac mean-concentration solutions
/// agree at the matching time `t_star`.
///
/// With `n_gauss == n_dirac` the width is identically zero. Past the maximum
/// matching time the radicand goes negative and the request is rejected.
pub fn width_at_time(
    t_star: f64,
    n_gauss: usize,
    n_dirac: usize,
    diffusion: f64,
    domain: f64,
    dim: u32,
) -> Result<f64> {
    if !(t_star > 0.0) {
        return Err(KrptError::InfeasibleMatchTime {
            t_star,
            tau_star: 0.0,
        });
    }
    if n_gauss > n_dirac {
        return Err(KrptError::GaussianCountExceedsDirac { n_gauss, n_dirac });
    }
    if n_gauss == n_dirac {
        // The bracket reduces to (8 pi D t)^(-d/2) exactly, so the radicand
        // cancels to zero in exact arithmetic.
        return Ok(0.0);
    }
    let radicand = width_radicand(t_star, n_gauss, n_dirac, diffusion, domain, dim);
    if radicand < 0.0 {
        let tau_star = max_matching_time(n_gauss, n_dirac, diffusion, domain, dim, t_star * 1e-9)
            .map(|m| m.value())
            .unwrap_or(f64::INFINITY);
        return Err(KrptError::InfeasibleMatchTime { t_star, tau_star });
    }
    Ok(radicand.sqrt())
}

/// Largest feasible matching time, or `Unbounded` when every time is
/// feasible (`n_gauss == n_dirac`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MaxMatchingTime {
    Finite(f64),
    Unbounded,
}

impl MaxMatchingTime {
    pub fn value(self) -> f64 {
        match self {
            MaxMatchingTime::Finite(t) => t,
            MaxMatchingTime::Unbounded => f64::INFINITY,
        }
    }

    pub fn is_unbounded(self) -> bool {
        matches!(self, MaxMatchingTime::Unbounded)
    }
}

/// Maximum matching time `tau*` beyond which the width formula turns
/// imaginary.
///
/// There is no closed form; the boundary is bracketed by doubling from
/// `bracket_lo` (use half a time step) and refined by bisection to a
/// relative tolerance of 1e-10. If no sign change appears below 1e12 the
/// result is reported as unbounded.
pub fn max_matching_time(
    n_gauss: usize,
    n_dirac: usize,
    diffusion: f64,
    domain: f64,
    dim: u32,
    bracket_lo: f64,
) -> Result<MaxMatchingTime> {
    if n_gauss > n_dirac {
        return Err(KrptError::GaussianCountExceedsDirac { n_gauss, n_dirac });
    }
    if n_gauss == n_dirac {
        return Ok(MaxMatchingTime::Unbounded);
    }
    let radicand = |t: f64| width_radicand(t, n_gauss, n_dirac, diffusion, domain, dim);
    let mut lo = bracket_lo.max(f64::MIN_POSITIVE);
    if radicand(lo) < 0.0 {
        // Bracket seed is already infeasible; walk down until feasible.
        while radicand(lo) < 0.0 && lo > 1e-300 {
            lo /= 2.0;
        }
    }
    let mut hi = lo * 2.0;
    while radicand(hi) >= 0.0 {
        hi *= 2.0;
        if hi > 1e12 {
            return Ok(MaxMatchingTime::Unbounded);
        }
    }
    while hi - lo > 1e-10 * hi {
        let mid = 0.5 * (lo + hi);
        if radicand(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(MaxMatchingTime::Finite(0.5 * (lo + hi)))
}

/// Time-variable half-width used by the `VariableGaussian` kernel.
///
/// Evaluates the width formula at `max(t, dt/2)`. Past `tau*` the width is
/// held at its boundary value instead of erroring, so long runs stay
/// well-defined; [`VariableWidth::clamped`] reports whether that happened.
#[derive(Debug, Clone)]
pub struct VariableWidth {
    n_gauss: usize,
    n_dirac: usize,
    diffusion: f64,
    domain: f64,
    dim: u32,
    t_floor: f64,
    tau_star: f64,
    clamped: std::cell::Cell<bool>,
}

impl VariableWidth {
    pub fn new(config: &SimConfig) -> Result<Self> {
        let tau_star = max_matching_time(
            config.n_gauss,
            config.n_dirac,
            config.diffusion,
            config.domain,
            config.dim,
            config.dt / 2.0,
        )?
        .value();
        Ok(VariableWidth {
            n_gauss: config.n_gauss,
            n_dirac: config.n_dirac,
            diffusion: config.diffusion,
            domain: config.domain,
            dim: config.dim,
            t_floor: config.dt / 2.0,
            tau_star,
            clamped: std::cell::Cell::new(false),
        })
    }

    pub fn width(&self, t: f64) -> f64 {
        let mut t_eval = t.max(self.t_floor);
        if t_eval > self.tau_star {
            t_eval = self.tau_star;
            self.clamped.set(true);
        }
        width_at_time(
            t_eval,
            self.n_gauss,
            self.n_dirac,
            self.diffusion,
            self.domain,
            self.dim,
        )
        .unwrap_or(0.0)
    }

    pub fn tau_star(&self) -> f64 {
        self.tau_star
    }

    /// Whether any evaluation so far hit the `tau*` clamp.
    pub fn clamped(&self) -> bool {
        self.clamped.get()
    }
}

/// One-shot evaluation of the time-variable width.
pub fn variable_width(t: f64, config: &SimConfig) -> Result<f64> {
    Ok(VariableWidth::new(config)?.width(t))
}

/// Result of the least-squares width search.
#[derive(Debug, Clone, Copy)]
pub struct LeastSquaresWidth {
    pub half_width: f64,
    pub objective: f64,
}

/// Root-sum-square mismatch between the Dirac and Gaussian mean-concentration
/// solutions on `t_grid`, as a function of the Gaussian half-width.
pub fn matching_objective(half_width: f64, config: &SimConfig, t_grid: &[f64]) -> Result<f64> {
    let dirac = moments::solve_mean_concentration(KernelSpec::Dirac, config, t_grid)?;
    objective_against(&dirac.trace.mean, half_width, config, t_grid)
}

fn objective_against(
    dirac_mean: &[f64],
    half_width: f64,
    config: &SimConfig,
    t_grid: &[f64],
) -> Result<f64> {
    let kernel = if half_width > 0.0 {
        KernelSpec::FixedGaussian { half_width }
    } else {
        // Zero-width Gaussian still carries the Gaussian particle mass.
        KernelSpec::FixedGaussian { half_width: 0.0 }
    };
    let gauss = moments::solve_mean_concentration(kernel, config, t_grid)?;
    let sum_sq: f64 = dirac_mean
        .iter()
        .zip(gauss.trace.mean.iter())
        .map(|(d, g)| (d - g) * (d - g))
        .sum();
    Ok(sum_sq.sqrt())
}

/// Picks the half-width minimizing the mismatch of the two moment-equation
/// solutions over `t_grid`, by golden-section search on
/// `(0, upper_fraction * domain]`.
///
/// The search assumes a unimodal objective, resolves the minimizer to an
/// absolute tolerance of `1e-4 * domain`, and breaks ties toward smaller
/// widths.
pub fn least_squares_width(
    t_grid: &[f64],
    config: &SimConfig,
    upper_fraction: f64,
) -> Result<LeastSquaresWidth> {
    if t_grid.is_empty() {
        return Err(KrptError::EmptyTimeGrid);
    }
    if !(upper_fraction > 0.0 && upper_fraction <= 1.0) {
        return Err(KrptError::MalformedConfigValue {
            key: "upper_fraction".to_string(),
            value: upper_fraction.to_string(),
        });
    }
    let dirac = moments::solve_mean_concentration(KernelSpec::Dirac, config, t_grid)?;
    let dirac_mean = &dirac.trace.mean;
    let objective = |w: f64| objective_against(dirac_mean, w, config, t_grid);

    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut a = 0.0;
    let mut b = upper_fraction * config.domain;
    let tol = 1e-4 * config.domain;

    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = objective(x1)?;
    let mut f2 = objective(x2)?;
    while b - a > tol {
        if f1 <= f2 {
            // Keep the lower segment on ties so the result leans small.
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = objective(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = objective(x2)?;
        }
    }
    let (half_width, objective) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    Ok(LeastSquaresWidth {
        half_width,
        objective,
    })
}

/// A width-selection strategy plus its parameters.
#[derive(Debug, Clone)]
pub enum WidthSelection {
    /// Match the moment solutions at one time.
    SpecificTime { t_star: f64 },
    /// Minimize the mismatch over a time grid.
    LeastSquares {
        t_grid: Vec<f64>,
        upper_fraction: f64,
    },
    /// Recompute the width from the running simulation time.
    Variable,
}

impl WidthSelection {
    /// Resolves the strategy to a concrete kernel for `config`.
    pub fn resolve(&self, config: &SimConfig) -> Result<KernelSpec> {
        match self {
            WidthSelection::SpecificTime { t_star } => {
                let w = width_at_time(
                    *t_star,
                    config.n_gauss,
                    config.n_dirac,
                    config.diffusion,
                    config.domain,
                    config.dim,
                )?;
                KernelSpec::fixed(w)
            }
            WidthSelection::LeastSquares {
                t_grid,
                upper_fraction,
            } => {
                if t_grid.is_empty() {
                    return Err(KrptError::EmptyTimeGrid);
                }
                if !t_grid.windows(2).all(|w| w[1] > w[0]) || t_grid[0] < 0.0 {
                    return Err(KrptError::InvalidTimeGrid);
                }
                let ls = least_squares_width(t_grid, config, *upper_fraction)?;
                KernelSpec::fixed(ls.half_width)
            }
            WidthSelection::Variable => Ok(KernelSpec::VariableGaussian),
        }
    }
}
