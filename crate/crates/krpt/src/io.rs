//! CSV emission for traces, snapshots, and moment solutions.
//!
//! Every file opens with comment lines embedding the fully resolved
//! configuration (as parseable `key = value` pairs), the kernel, and the
//! seed, so a run can be reproduced byte for byte from its own header.
//! Numbers are written with 17 significant digits.

use crate::core::{ConcentrationTrace, SimConfig};
use crate::engine::Snapshot;
use crate::error::Result;
use crate::moments::{BoundPair, MomentSolution};

use std::io::Write;

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_config_header<W: Write>(
    out: &mut W,
    title: &str,
    config: &SimConfig,
    kernel: &str,
    extra: &[(&str, String)],
) -> Result<()> {
    writeln!(out, "# {title}")?;
    writeln!(out, "# kernel = {kernel}")?;
    for (key, value) in extra {
        writeln!(out, "# {key} = {value}")?;
    }
    for line in config.to_key_values().lines() {
        writeln!(out, "# {line}")?;
    }
    Ok(())
}

/// Ensemble trace: `time, cbar_mean, cbar_std`.
pub fn write_trace_csv<W: Write>(
    out: &mut W,
    config: &SimConfig,
    kernel: &str,
    extra: &[(&str, String)],
    trace: &ConcentrationTrace,
) -> Result<()> {
    write_config_header(out, "krpt trace", config, kernel, extra)?;
    writeln!(out, "time,cbar_mean,cbar_std")?;
    for i in 0..trace.len() {
        writeln!(
            out,
            "{},{},{}",
            fmt(trace.times[i]),
            fmt(trace.mean[i]),
            fmt(trace.std[i])
        )?;
    }
    Ok(())
}

/// Mass-filtered particle snapshot: `time, species, position, mass`.
pub fn write_snapshot_csv<W: Write>(
    out: &mut W,
    config: &SimConfig,
    kernel: &str,
    seed: u64,
    snapshot: &Snapshot,
) -> Result<()> {
    let extra = [
        ("seed_used", seed.to_string()),
        ("mass_threshold", fmt(snapshot.threshold)),
    ];
    write_config_header(out, "krpt snapshot", config, kernel, &extra)?;
    writeln!(out, "time,species,position,mass")?;
    for (species, position, mass) in &snapshot.particles {
        writeln!(
            out,
            "{},{},{},{}",
            fmt(snapshot.time),
            species,
            fmt(*position),
            fmt(*mass)
        )?;
    }
    Ok(())
}

/// Moment solution with bound diagnostics:
/// `time, cbar, g, integral_cbar, bound_g, bound_cbar`.
pub fn write_moments_csv<W: Write>(
    out: &mut W,
    config: &SimConfig,
    kernel: &str,
    solution: &MomentSolution,
    bounds: &[BoundPair],
) -> Result<()> {
    write_config_header(out, "krpt moments", config, kernel, &[])?;
    writeln!(out, "time,cbar,g,integral_cbar,bound_g,bound_cbar")?;
    for i in 0..solution.trace.len() {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt(solution.trace.times[i]),
            fmt(solution.trace.mean[i]),
            fmt(solution.g_trace[i]),
            fmt(solution.accumulated_integral[i]),
            fmt(bounds[i].g_bound),
            fmt(bounds[i].cbar_bound)
        )?;
    }
    Ok(())
}
