//! Floquet–Bloch bands of a cell over a free abelian group: band functions
//! sampled on the character torus, band extents and the gaps between them.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::analysis::{merge_components, IntervalSet, TAU_PW};
use crate::cell::{assemble, BoundaryCondition, CellGraph};
use crate::error::{Error, Result};
use crate::groups::GroupPresentation;
use crate::linalg::EigenOptions;

/// Default samples per torus dimension.
pub const DEFAULT_GRID_POINTS: usize = 32;

/// Sampled band functions `λ_k(θ)` and their extents.
#[derive(Debug, Clone, PartialEq)]
pub struct BandData {
    pub grid: Vec<Vec<f64>>,
    /// `values[i][k]` is `λ_{k+1}` at `grid[i]`.
    pub values: Vec<Vec<f64>>,
    /// `(min, max)` of each band over the grid.
    pub bands: Vec<(f64, f64)>,
}

impl BandData {
    /// Whether every band lies in the matching interval, endpoints inflated by `TAU_PW`.
    pub fn within(&self, intervals: &IntervalSet) -> Vec<bool> {
        self.bands
            .iter()
            .enumerate()
            .map(|(k, &(lo, hi))| {
                k < intervals.len() && {
                    let (a, b) = intervals.get(k);
                    lo >= a - TAU_PW && hi <= b + TAU_PW
                }
            })
            .collect()
    }
}

/// Product grid with `points` uniform phases `2πj/points` per dimension, in
/// lexicographic order starting from `θ = 0`.
pub fn uniform_grid(rank: usize, points: usize) -> Result<Vec<Vec<f64>>> {
    if points == 0 {
        return Err(Error::OutOfRange("θ-grid needs at least one point per dimension".into()));
    }
    let total = points
        .checked_pow(rank as u32)
        .filter(|t| *t <= 1 << 22)
        .ok_or_else(|| Error::OutOfRange(format!("θ-grid with {points}^{rank} points is too large")))?;
    Ok((0..total)
        .map(|mut idx| {
            let mut theta = vec![0.0; rank];
            for t in theta.iter_mut().rev() {
                *t = 2.0 * PI * (idx % points) as f64 / points as f64;
                idx /= points;
            }
            theta
        })
        .collect())
}

pub fn default_grid(rank: usize) -> Result<Vec<Vec<f64>>> {
    uniform_grid(rank, DEFAULT_GRID_POINTS)
}

/// Band functions of `cell` over the free abelian group `group`.
pub fn band_functions(
    cell: &CellGraph,
    group: &GroupPresentation,
    grid: &[Vec<f64>],
    k: usize,
    opts: &EigenOptions,
) -> Result<BandData> {
    if !group.is_free_abelian() {
        return Err(Error::Unsupported("Floquet bands need a free abelian group".into()));
    }
    if group.generator_count() != cell.generator_count() {
        return Err(Error::ArityMismatch { expected: cell.generator_count(), got: group.generator_count() });
    }
    if k == 0 {
        return Err(Error::OutOfRange("band count must be at least 1".into()));
    }
    if grid.is_empty() {
        return Err(Error::OutOfRange("θ-grid is empty".into()));
    }
    if !grid.iter().any(|t| t.iter().all(|x| *x == 0.0)) {
        return Err(Error::OutOfRange("θ-grid must contain θ = 0".into()));
    }
    let k = k.min(cell.vertex_count());
    let values: Vec<Vec<f64>> = grid
        .par_iter()
        .map(|theta| Ok(assemble(cell, &BoundaryCondition::Bloch(theta.clone()))?.lowest(k, opts)?.values))
        .collect::<Result<_>>()?;
    let bands = (0..k)
        .map(|j| {
            values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), row| (lo.min(row[j]), hi.max(row[j])))
        })
        .collect();
    Ok(BandData { grid: grid.to_vec(), values, bands })
}

/// Open gaps between the merged sampled bands. Sampled bands are inner
/// approximations of the true bands, so reported gaps may be too wide.
pub fn band_gap_report(b: &BandData) -> Result<Vec<(f64, f64)>> {
    Ok(merge_components(&IntervalSet::new(b.bands.clone())?).gaps)
}
