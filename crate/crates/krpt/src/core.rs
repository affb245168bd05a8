//! Shared domain types: simulation configuration, kernel descriptions,
//! particle masses, and concentration traces.
//!
//! All quantities are carried in bare simulation units. Configs are plain
//! value objects; once validated they are immutable and safe to share
//! across threads.

use crate::error::{KrptError, Result};

/// Physical and numerical parameters of one simulation setup.
///
/// `n_dirac` is the reference (Dirac) particle count per species and
/// `n_gauss` the reduced Gaussian count; both species always carry the same
/// count and per-particle mass.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Diffusion coefficient D.
    pub diffusion: f64,
    /// Reaction rate constant k.
    pub rate: f64,
    /// Initial mean concentration of each species.
    pub c0: f64,
    /// Domain measure (length for d = 1).
    pub domain: f64,
    /// Spatial dimension d. Formulas support any d >= 1; the particle
    /// engine runs d = 1.
    pub dim: u32,
    /// Dirac baseline particle count per species.
    pub n_dirac: usize,
    /// Gaussian particle count per species.
    pub n_gauss: usize,
    /// Time step.
    pub dt: f64,
    /// Stop time.
    pub t_final: f64,
    /// Base RNG seed; realization r runs with `seed ^ r`.
    pub seed: u64,
    /// Ensemble size.
    pub n_realizations: usize,
}

impl SimConfig {
    /// The Damkohler-0.5 base case used throughout the experiment recipes.
    pub fn base() -> Self {
        SimConfig {
            diffusion: 1e-5,
            rate: 5.0,
            c0: 1.0,
            domain: 1.0,
            dim: 1,
            n_dirac: 1000,
            n_gauss: 100,
            dt: 0.1,
            t_final: 1000.0,
            seed: 0x6b72_7074,
            n_realizations: 6,
        }
    }

    /// Checks every invariant and returns the config unchanged on success.
    ///
    /// Validation is idempotent; derived quantities (`mass_dirac`,
    /// `mass_gauss`, `spacing`) are cheap and computed on demand.
    pub fn validated(self) -> Result<Self> {
        if !(self.domain > 0.0) || !self.domain.is_finite() {
            return Err(KrptError::NonPositiveDomain(self.domain));
        }
        if !(self.c0 > 0.0) || !self.c0.is_finite() {
            return Err(KrptError::NonPositiveConcentration(self.c0));
        }
        if !(self.diffusion >= 0.0) || !self.diffusion.is_finite() {
            return Err(KrptError::NegativeDiffusion(self.diffusion));
        }
        if !(self.rate >= 0.0) || !self.rate.is_finite() {
            return Err(KrptError::NegativeRate(self.rate));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(KrptError::NonPositiveTimeStep(self.dt));
        }
        if !(self.t_final >= self.dt) {
            return Err(KrptError::StopTimeBeforeFirstStep {
                t_final: self.t_final,
                dt: self.dt,
            });
        }
        if self.dim == 0 {
            return Err(KrptError::ZeroDimension);
        }
        if self.n_gauss == 0 || self.n_gauss > self.n_dirac {
            return Err(KrptError::GaussianCountExceedsDirac {
                n_gauss: self.n_gauss,
                n_dirac: self.n_dirac,
            });
        }
        if self.n_realizations == 0 {
            return Err(KrptError::EmptyEnsemble);
        }
        Ok(self)
    }

    /// Mass of a single particle when `n` particles per species carry the
    /// total mass `C0 * domain`.
    pub fn particle_mass(&self, n: usize) -> ParticleMass {
        ParticleMass(self.c0 * self.domain / n as f64)
    }

    /// Mass of one Dirac particle.
    pub fn mass_dirac(&self) -> f64 {
        self.particle_mass(self.n_dirac).value()
    }

    /// Mass of one Gaussian particle.
    pub fn mass_gauss(&self) -> f64 {
        self.particle_mass(self.n_gauss).value()
    }

    /// Mean inter-particle spacing for `n` particles.
    pub fn spacing(&self, n: usize) -> f64 {
        self.domain / n as f64
    }

    /// `N_G / N_delta`.
    pub fn count_ratio(&self) -> f64 {
        self.n_gauss as f64 / self.n_dirac as f64
    }

    /// Number of whole time steps in a run.
    pub fn n_steps(&self) -> usize {
        (self.t_final / self.dt + 0.5).floor() as usize
    }

    /// Renders the config as `key = value` lines, one per field. The output
    /// parses back through [`SimConfig::from_key_values`].
    pub fn to_key_values(&self) -> String {
        format!(
            "diffusion = {:e}\nrate = {:e}\nc0 = {:e}\ndomain = {:e}\ndim = {}\n\
             n_dirac = {}\nn_gauss = {}\ndt = {:e}\nt_final = {:e}\nseed = {}\n\
             n_realizations = {}\n",
            self.diffusion,
            self.rate,
            self.c0,
            self.domain,
            self.dim,
            self.n_dirac,
            self.n_gauss,
            self.dt,
            self.t_final,
            self.seed,
            self.n_realizations,
        )
    }

    /// Parses a flat `key = value` config. Lines that are empty or start
    /// with `#` are ignored; later keys override earlier ones. Unknown keys
    /// are rejected. Missing keys fall back to [`SimConfig::base`].
    pub fn from_key_values(text: &str) -> Result<Self> {
        let mut cfg = SimConfig::base();
        for raw in text.lines() {
            let line = match raw.find('#') {
                Some(i) => &raw[..i],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| KrptError::MalformedConfigLine(line.to_string()))?;
            let key = key.trim();
            let value = value.trim();
            let malformed = || KrptError::MalformedConfigValue {
                key: key.to_string(),
                value: value.to_string(),
            };
            match key {
                "diffusion" => cfg.diffusion = value.parse().map_err(|_| malformed())?,
                "rate" => cfg.rate = value.parse().map_err(|_| malformed())?,
                "c0" => cfg.c0 = value.parse().map_err(|_| malformed())?,
                "domain" => cfg.domain = value.parse().map_err(|_| malformed())?,
                "dim" => cfg.dim = value.parse().map_err(|_| malformed())?,
                "n_dirac" => cfg.n_dirac = value.parse().map_err(|_| malformed())?,
                "n_gauss" => cfg.n_gauss = value.parse().map_err(|_| malformed())?,
                "dt" => cfg.dt = value.parse().map_err(|_| malformed())?,
                "t_final" => cfg.t_final = value.parse().map_err(|_| malformed())?,
                "seed" => cfg.seed = value.parse().map_err(|_| malformed())?,
                "n_realizations" => cfg.n_realizations = value.parse().map_err(|_| malformed())?,
                _ => return Err(KrptError::UnknownConfigKey(key.to_string())),
            }
        }
        cfg.validated()
    }
}

/// Particle Damkohler number `k C0 dx^2 / D` with `dx = domain / n`.
///
/// Scales as `n^-2` at fixed physical parameters.
pub fn damkohler(config: &SimConfig, n: usize) -> Result<f64> {
    if config.diffusion == 0.0 {
        return Err(KrptError::ZeroDiffusion);
    }
    let dx = config.spacing(n);
    Ok(config.rate * config.c0 * dx * dx / config.diffusion)
}

/// Mass carried by one particle. Positive by construction: `n * m = C0 * domain`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParticleMass(f64);

impl ParticleMass {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Spatial smoothing applied to particle mass in the co-location kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    /// Point particles; no smoothing beyond single-step diffusion.
    Dirac,
    /// Gaussian smoothing with a fixed half-width.
    FixedGaussian { half_width: f64 },
    /// Gaussian smoothing whose half-width is recomputed from the current
    /// simulation time at every step.
    VariableGaussian,
}

impl KernelSpec {
    /// Builds a fixed-width kernel, normalizing a zero width to `Dirac`.
    pub fn fixed(half_width: f64) -> Result<Self> {
        if !(half_width >= 0.0) || !half_width.is_finite() {
            return Err(KrptError::NegativeHalfWidth(half_width));
        }
        if half_width == 0.0 {
            Ok(KernelSpec::Dirac)
        } else {
            Ok(KernelSpec::FixedGaussian { half_width })
        }
    }

    /// Half-width for the fixed variants; `None` for `VariableGaussian`.
    pub fn fixed_half_width(&self) -> Option<f64> {
        match *self {
            KernelSpec::Dirac => Some(0.0),
            KernelSpec::FixedGaussian { half_width } => Some(half_width),
            KernelSpec::VariableGaussian => None,
        }
    }

    /// Particle count this kernel runs with under `config`.
    pub fn particle_count(&self, config: &SimConfig) -> usize {
        match self {
            KernelSpec::Dirac => config.n_dirac,
            _ => config.n_gauss,
        }
    }
}

impl std::fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            KernelSpec::Dirac => write!(f, "dirac"),
            KernelSpec::FixedGaussian { half_width } => write!(f, "gaussian({half_width:e})"),
            KernelSpec::VariableGaussian => write!(f, "variable"),
        }
    }
}

/// Time series of domain-averaged concentration with ensemble statistics.
///
/// `std` is the sample standard deviation across realizations and is zero
/// for single-realization runs.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationTrace {
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ConcentrationTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// `n` logarithmically spaced points spanning `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2);
    let (la, lb) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (la + (lb - la) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_case_masses_and_damkohler() {
        let cfg = SimConfig::base().validated().unwrap();
        assert_eq!(cfg.mass_dirac(), 1e-3);
        assert_eq!(cfg.mass_gauss(), 1e-2);
        // Operation order keeps the base case bit-exact.
        assert_eq!(damkohler(&cfg, 1000).unwrap(), 0.5);
        assert_eq!(damkohler(&cfg, 100).unwrap(), 50.0);
    }

    #[test]
    fn damkohler_of_zero_rate_is_zero() {
        let cfg = SimConfig {
            rate: 0.0,
            ..SimConfig::base()
        };
        assert_eq!(damkohler(&cfg, 1000).unwrap(), 0.0);
    }

    #[test]
    fn damkohler_rejects_zero_diffusion() {
        let cfg = SimConfig {
            diffusion: 0.0,
            ..SimConfig::base()
        };
        assert!(matches!(
            damkohler(&cfg, 1000),
            Err(KrptError::ZeroDiffusion)
        ));
    }

    #[test]
    fn damkohler_scales_inverse_square_in_particle_count() {
        let cfg = SimConfig::base();
        let reference = damkohler(&cfg, 1000).unwrap() * 1000.0 * 1000.0;
        for n in [100usize, 500, 1000] {
            let scaled = damkohler(&cfg, n).unwrap() * (n as f64) * (n as f64);
            assert!(
                (scaled - reference).abs() <= 4.0 * f64::EPSILON * reference,
                "n = {n}: {scaled} vs {reference}"
            );
        }
    }

    #[test]
    fn validation_is_idempotent() {
        let once = SimConfig::base().validated().unwrap();
        let twice = once.clone().validated().unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn validation_rejects_degenerate_domain() {
        let cfg = SimConfig {
            domain: 0.0,
            ..SimConfig::base()
        };
        assert!(matches!(
            cfg.validated(),
            Err(KrptError::NonPositiveDomain(_))
        ));
    }

    #[test]
    fn validation_rejects_empty_or_oversized_gauss_count() {
        let zero = SimConfig {
            n_gauss: 0,
            ..SimConfig::base()
        };
        assert!(matches!(
            zero.validated(),
            Err(KrptError::GaussianCountExceedsDirac { .. })
        ));
        let oversized = SimConfig {
            n_gauss: 1001,
            ..SimConfig::base()
        };
        assert!(matches!(
            oversized.validated(),
            Err(KrptError::GaussianCountExceedsDirac { .. })
        ));
    }

    #[test]
    fn validation_rejects_stop_before_first_step() {
        let cfg = SimConfig {
            t_final: 0.05,
            ..SimConfig::base()
        };
        assert!(matches!(
            cfg.validated(),
            Err(KrptError::StopTimeBeforeFirstStep { .. })
        ));
    }

    #[test]
    fn zero_width_kernel_normalizes_to_dirac() {
        assert_eq!(KernelSpec::fixed(0.0).unwrap(), KernelSpec::Dirac);
        assert!(matches!(
            KernelSpec::fixed(0.1).unwrap(),
            KernelSpec::FixedGaussian { .. }
        ));
        assert!(KernelSpec::fixed(-1.0).is_err());
    }

    #[test]
    fn key_value_round_trip() {
        let cfg = SimConfig {
            seed: 42,
            n_gauss: 300,
            ..SimConfig::base()
        };
        let text = cfg.to_key_values();
        let back = SimConfig::from_key_values(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn key_value_parsing_errors() {
        assert!(matches!(
            SimConfig::from_key_values("unknown_key = 3"),
            Err(KrptError::UnknownConfigKey(_))
        ));
        assert!(matches!(
            SimConfig::from_key_values("dt = banana"),
            Err(KrptError::MalformedConfigValue { .. })
        ));
        assert!(matches!(
            SimConfig::from_key_values("just words"),
            Err(KrptError::MalformedConfigLine(_))
        ));
        // Comments and blank lines pass through.
        let cfg = SimConfig::from_key_values("# comment\n\nseed = 7 # trailing\n").unwrap();
        assert_eq!(cfg.seed, 7);
    }
}
