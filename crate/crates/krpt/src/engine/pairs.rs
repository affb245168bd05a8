//! Pairwise mass-transfer sweeps: the exact all-pairs reference and a
//! cell-list pruned variant.
//!
//! The domain has reflecting walls, so the co-location density of a pair
//! sums the direct term and the two first-order mirror images; that keeps
//! the kernel normalized against wall truncation. The exact loop
//! short-circuits separations whose density underflows to zero, which
//! changes nothing in the arithmetic. The cell list drops pairs beyond a
//! cutoff where the density tail is below 1e-9 of the transferred mass;
//! runs must validate it against the exact loop before relying on it.

use super::{PairAcceleration, PairLoopMode, ParticleSystem, RunOptions};
use crate::core::SimConfig;
use crate::error::{KrptError, Result};
use crate::kernels::Colocation;

/// Beyond this many standard deviations of the co-location Gaussian the
/// neglected tail mass is below 1e-10 of the reacted mass per step.
const CELL_CUTOFF_SIGMAS: f64 = 9.0;

/// Counters from one sweep, mainly for validating the pruning.
#[derive(Debug, Clone, Copy, Default)]
pub struct PairSweepReport {
    /// Candidate pairs visited.
    pub pairs_visited: u64,
}

/// Co-location density on the reflecting segment: direct separation plus
/// the images of `xb` through each wall. Higher-order images are beyond
/// the underflow radius for any usable kernel.
#[inline(always)]
fn pair_density(coloc: &Colocation, xa: f64, xb: f64, two_omega: f64) -> f64 {
    let direct = xa - xb;
    let left = xa + xb;
    let right = two_omega - left;
    coloc.density_at_sq(direct * direct)
        + coloc.density_at_sq(left * left)
        + coloc.density_at_sq(right * right)
}

/// Mirror terms vanish identically unless the particle sits within the
/// underflow radius of a wall, so interior particles can use the plain
/// direct-separation density (bit-identical, and the common case).
#[inline(always)]
fn near_wall(x: f64, domain: f64, radius: f64) -> bool {
    x < radius || x > domain - radius
}

pub(super) fn sweep(
    system: &mut ParticleSystem,
    config: &SimConfig,
    opts: &RunOptions,
    coloc: &Colocation,
    coeff: f64,
    overdraw_floor: f64,
) -> Result<PairSweepReport> {
    let cells = match opts.acceleration {
        PairAcceleration::Exact => None,
        PairAcceleration::CellList => build_cells(system, config, coloc),
    };
    match (opts.loop_mode, cells) {
        (PairLoopMode::Sequential, None) => {
            sequential_exact(system, config, coloc, coeff, overdraw_floor)
        }
        (PairLoopMode::SummedDecrement, None) => {
            summed_exact(system, config, coloc, coeff, overdraw_floor)
        }
        (PairLoopMode::Sequential, Some(cells)) => {
            sequential_cells(system, config, coloc, coeff, overdraw_floor, &cells)
        }
        (PairLoopMode::SummedDecrement, Some(cells)) => {
            summed_cells(system, config, coloc, coeff, overdraw_floor, &cells)
        }
    }
}

fn overdraw_error(time: f64, value: f64) -> KrptError {
    KrptError::MassOverdraw {
        time,
        overdraw: value,
    }
}

fn sequential_exact(
    system: &mut ParticleSystem,
    config: &SimConfig,
    coloc: &Colocation,
    coeff: f64,
    floor: f64,
) -> Result<PairSweepReport> {
    let domain = config.domain;
    let two_omega = 2.0 * domain;
    let radius = coloc.underflow_radius();
    let time = system.time;
    let positions_b = &system.positions_b;
    let masses_b = &mut system.masses_b;
    let mut visited = 0u64;
    for (xa, ma) in system.positions_a.iter().zip(system.masses_a.iter_mut()) {
        let xa = *xa;
        let mut m = *ma;
        if near_wall(xa, domain, radius) {
            for (xb, mb) in positions_b.iter().zip(masses_b.iter_mut()) {
                let v = pair_density(coloc, xa, *xb, two_omega);
                if v > 0.0 {
                    let dm = coeff * m * *mb * v;
                    m -= dm;
                    *mb -= dm;
                    if m < floor || *mb < floor {
                        return Err(overdraw_error(time, m.min(*mb)));
                    }
                }
            }
        } else {
            for (xb, mb) in positions_b.iter().zip(masses_b.iter_mut()) {
                let d = xa - *xb;
                let v = coloc.density_at_sq(d * d);
                if v > 0.0 {
                    let dm = coeff * m * *mb * v;
                    m -= dm;
                    *mb -= dm;
                    if m < floor || *mb < floor {
                        return Err(overdraw_error(time, m.min(*mb)));
                    }
                }
            }
        }
        visited += positions_b.len() as u64;
        *ma = m;
    }
    Ok(PairSweepReport {
        pairs_visited: visited,
    })
}

fn summed_exact(
    system: &mut ParticleSystem,
    config: &SimConfig,
    coloc: &Colocation,
    coeff: f64,
    floor: f64,
) -> Result<PairSweepReport> {
    let two_omega = 2.0 * config.domain;
    let na = system.masses_a.len();
    let nb = system.masses_b.len();
    let mut dec_a = vec![0.0; na];
    let mut dec_b = vec![0.0; nb];
    let radius = coloc.underflow_radius();
    for j in 0..na {
        let xa = system.positions_a[j];
        let ma = system.masses_a[j];
        let wall = near_wall(xa, config.domain, radius);
        let mut total = 0.0;
        for l in 0..nb {
            let v = if wall {
                pair_density(coloc, xa, system.positions_b[l], two_omega)
            } else {
                let d = xa - system.positions_b[l];
                coloc.density_at_sq(d * d)
            };
            if v > 0.0 {
                let dm = coeff * ma * system.masses_b[l] * v;
                total += dm;
                dec_b[l] += dm;
            }
        }
        dec_a[j] = total;
    }
    apply_decrements(system, &dec_a, &dec_b, floor)?;
    Ok(PairSweepReport {
        pairs_visited: (na * nb) as u64,
    })
}

fn apply_decrements(
    system: &mut ParticleSystem,
    dec_a: &[f64],
    dec_b: &[f64],
    floor: f64,
) -> Result<()> {
    let time = system.time;
    for (m, d) in system.masses_a.iter_mut().zip(dec_a) {
        *m -= d;
        if *m < floor {
            return Err(overdraw_error(time, *m));
        }
    }
    for (m, d) in system.masses_b.iter_mut().zip(dec_b) {
        *m -= d;
        if *m < floor {
            return Err(overdraw_error(time, *m));
        }
    }
    Ok(())
}

/// B-particle indices bucketed into equal cells of width >= the cutoff, so
/// only the home cell, its two neighbors, and (near a wall) the mirror-side
/// end cell can interact.
struct Cells {
    n_cells: usize,
    inv_width: f64,
    cutoff: f64,
    buckets: Vec<Vec<u32>>,
}

fn build_cells(system: &ParticleSystem, config: &SimConfig, coloc: &Colocation) -> Option<Cells> {
    let cutoff = CELL_CUTOFF_SIGMAS * coloc.variance().sqrt();
    let n_cells = (config.domain / cutoff).floor() as usize;
    if n_cells < 3 {
        // Cutoff spans the domain; pruning can't help.
        return None;
    }
    let inv_width = n_cells as f64 / config.domain;
    let mut buckets = vec![Vec::new(); n_cells];
    for (l, &x) in system.positions_b.iter().enumerate() {
        let c = ((x * inv_width) as usize).min(n_cells - 1);
        buckets[c].push(l as u32);
    }
    Some(Cells {
        n_cells,
        inv_width,
        cutoff,
        buckets,
    })
}

impl Cells {
    /// Bucket indices whose occupants can interact with a particle at `xa`,
    /// strictly ascending: the clipped home ring plus the wall-mirror end
    /// cells when `xa` is within the cutoff of a wall.
    fn candidate_buckets(&self, xa: f64, domain: f64, out: &mut Vec<usize>) {
        out.clear();
        let home = ((xa * self.inv_width) as usize).min(self.n_cells - 1);
        if xa <= self.cutoff {
            out.push(0);
        }
        for c in home.saturating_sub(1)..=(home + 1).min(self.n_cells - 1) {
            if out.last() != Some(&c) && !out.contains(&c) {
                out.push(c);
            }
        }
        if xa >= domain - self.cutoff && out.last() != Some(&(self.n_cells - 1)) {
            out.push(self.n_cells - 1);
        }
    }
}

/// Merges the ascending index lists of the candidate buckets into `out`.
fn merge_ascending(buckets: &[Vec<u32>], picks: &[usize], out: &mut Vec<u32>) {
    out.clear();
    let mut cursors: Vec<(usize, usize)> = picks.iter().map(|&b| (b, 0)).collect();
    loop {
        let mut best: Option<(usize, u32)> = None;
        for (slot, &(bucket, pos)) in cursors.iter().enumerate() {
            if let Some(&idx) = buckets[bucket].get(pos) {
                if best.map(|(_, b)| idx < b).unwrap_or(true) {
                    best = Some((slot, idx));
                }
            }
        }
        match best {
            Some((slot, idx)) => {
                cursors[slot].1 += 1;
                out.push(idx);
            }
            None => break,
        }
    }
}

fn sequential_cells(
    system: &mut ParticleSystem,
    config: &SimConfig,
    coloc: &Colocation,
    coeff: f64,
    floor: f64,
    cells: &Cells,
) -> Result<PairSweepReport> {
    let domain = config.domain;
    let two_omega = 2.0 * domain;
    let time = system.time;
    let positions_b = &system.positions_b;
    let masses_b = &mut system.masses_b;
    let mut visited = 0u64;
    // The sequential update is order-dependent, so candidates must be
    // visited in ascending global index, exactly like the exact loop.
    let mut picks: Vec<usize> = Vec::new();
    let mut candidates: Vec<u32> = Vec::new();
    let radius = coloc.underflow_radius();
    for (xa, ma) in system.positions_a.iter().zip(system.masses_a.iter_mut()) {
        let xa = *xa;
        let mut m = *ma;
        let wall = near_wall(xa, domain, radius);
        cells.candidate_buckets(xa, domain, &mut picks);
        merge_ascending(&cells.buckets, &picks, &mut candidates);
        for &l in &candidates {
            let l = l as usize;
            let v = if wall {
                pair_density(coloc, xa, positions_b[l], two_omega)
            } else {
                let d = xa - positions_b[l];
                coloc.density_at_sq(d * d)
            };
            visited += 1;
            if v > 0.0 {
                let dm = coeff * m * masses_b[l] * v;
                m -= dm;
                masses_b[l] -= dm;
                if m < floor || masses_b[l] < floor {
                    return Err(overdraw_error(time, m.min(masses_b[l])));
                }
            }
        }
        *ma = m;
    }
    Ok(PairSweepReport {
        pairs_visited: visited,
    })
}

fn summed_cells(
    system: &mut ParticleSystem,
    config: &SimConfig,
    coloc: &Colocation,
    coeff: f64,
    floor: f64,
    cells: &Cells,
) -> Result<PairSweepReport> {
    let domain = config.domain;
    let two_omega = 2.0 * domain;
    let na = system.masses_a.len();
    let mut dec_a = vec![0.0; na];
    let mut dec_b = vec![0.0; system.masses_b.len()];
    let mut visited = 0u64;
    let mut picks: Vec<usize> = Vec::new();
    let radius = coloc.underflow_radius();
    for j in 0..na {
        let xa = system.positions_a[j];
        let ma = system.masses_a[j];
        let wall = near_wall(xa, domain, radius);
        cells.candidate_buckets(xa, domain, &mut picks);
        let mut total = 0.0;
        for &bucket in &picks {
            for &l in &cells.buckets[bucket] {
                let l = l as usize;
                let v = if wall {
                    pair_density(coloc, xa, system.positions_b[l], two_omega)
                } else {
                    let d = xa - system.positions_b[l];
                    coloc.density_at_sq(d * d)
                };
                visited += 1;
                if v > 0.0 {
                    let dm = coeff * ma * system.masses_b[l] * v;
                    total += dm;
                    dec_b[l] += dm;
                }
            }
        }
        dec_a[j] = total;
    }
    apply_decrements(system, &dec_a, &dec_b, floor)?;
    Ok(PairSweepReport {
        pairs_visited: visited,
    })
}
