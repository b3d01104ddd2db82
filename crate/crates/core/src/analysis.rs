//! Neumann–Dirichlet interval bookkeeping: merged components and gaps,
//! ε-sweeps, gap search, component counting, and the counting-level Weyl
//! comparison.

use rayon::prelude::*;

use crate::cell::{apply_metric, assemble, limit_cell, BoundaryCondition, CellGraph, MetricFamily};
use crate::error::{Error, Result};
use crate::linalg::{EigenOptions, Spectrum};

/// Containment tolerance: interval endpoints are inflated by this much.
pub const TAU_PW: f64 = 1e-7;
/// Two eigenvalues closer than this count as one value.
pub const TAU_MULT: f64 = 1e-7;
/// Slack allowed when a computed Dirichlet value falls just below its Neumann partner.
const ORDER_SLACK: f64 = 1e-9;

/// Intervals `I_k = [λ_k⁻, λ_k⁺]`; `λ_k⁺ = +∞` when `k` exceeds the Dirichlet dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalSet {
    intervals: Vec<(f64, f64)>,
}

/// Maximal disjoint closed components of an [`IntervalSet`] and the open gaps between them.
#[derive(Debug, Clone, PartialEq)]
pub struct Components {
    pub components: Vec<(f64, f64)>,
    pub gaps: Vec<(f64, f64)>,
}

impl Components {
    pub fn count(&self) -> usize {
        self.components.len()
    }

    /// Index of the component containing `x` (endpoints inflated by `tol`).
    pub fn locate(&self, x: f64, tol: f64) -> Option<usize> {
        self.components.iter().position(|&(lo, hi)| x >= lo - tol && x <= hi + tol)
    }
}

impl IntervalSet {
    pub fn new(intervals: Vec<(f64, f64)>) -> Result<Self> {
        let mut out = Vec::with_capacity(intervals.len());
        let mut prev_lo = f64::NEG_INFINITY;
        for (k, (lo, hi)) in intervals.into_iter().enumerate() {
            if lo.is_nan() || hi.is_nan() || !lo.is_finite() {
                return Err(Error::OutOfRange(format!("interval {} has a non-finite lower end", k + 1)));
            }
            if hi < lo - ORDER_SLACK * lo.abs().max(1.0) {
                return Err(Error::OutOfRange(format!("interval {} is reversed: [{lo}, {hi}]", k + 1)));
            }
            if lo < prev_lo - ORDER_SLACK * lo.abs().max(1.0) {
                return Err(Error::OutOfRange(format!("lower ends decrease at interval {}", k + 1)));
            }
            prev_lo = lo;
            out.push((lo, hi.max(lo)));
        }
        Ok(Self { intervals: out })
    }

    /// Pairs Neumann and Dirichlet spectra index-wise; missing Dirichlet
    /// values become `+∞`.
    pub fn from_spectra(neumann: &Spectrum, dirichlet: &Spectrum) -> Result<Self> {
        let intervals = neumann
            .values
            .iter()
            .enumerate()
            .map(|(k, &lo)| (lo, dirichlet.values.get(k).copied().unwrap_or(f64::INFINITY)))
            .collect();
        Self::new(intervals)
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// `I_{k+1}` (zero-based index).
    pub fn get(&self, k: usize) -> (f64, f64) {
        self.intervals[k]
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.intervals.iter().copied()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.intervals.iter().map(|(lo, hi)| hi - lo).collect()
    }

    /// Largest width over the intervals.
    pub fn max_width(&self) -> f64 {
        self.widths().into_iter().fold(0.0, f64::max)
    }

    /// Indices of every interval containing `x` after inflating by `tol`.
    pub fn containing(&self, x: f64, tol: f64) -> Vec<usize> {
        (0..self.len()).filter(|&k| self.intervals[k].0 - tol <= x && x <= self.intervals[k].1 + tol).collect()
    }

    /// Interval `I_{⌈(m+1)/n⌉}` (zero-based `m`) for an `n`-dimensional representation.
    pub fn envelope_for(&self, m: usize, rep_dim: usize) -> Option<(f64, f64)> {
        self.intervals.get(m / rep_dim).copied()
    }
}

/// Union of the intervals as maximal disjoint closed components.
pub fn merge_components(s: &IntervalSet) -> Components {
    let mut sorted: Vec<(f64, f64)> = s.intervals.clone();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut components: Vec<(f64, f64)> = Vec::new();
    for (lo, hi) in sorted {
        match components.last_mut() {
            Some(last) if lo - TAU_PW <= last.1 + TAU_PW => last.1 = last.1.max(hi),
            _ => components.push((lo, hi)),
        }
    }
    let gaps = components.windows(2).map(|w| (w[0].1, w[1].0)).collect();
    Components { components, gaps }
}

/// `I_k(ε)` for `k ≤ count` on the ε-metric cell.
pub fn dn_intervals(cell: &CellGraph, fam: &MetricFamily, eps: f64, count: usize) -> Result<IntervalSet> {
    dn_intervals_with(cell, fam, eps, count, &EigenOptions::default())
}

pub fn dn_intervals_with(
    cell: &CellGraph,
    fam: &MetricFamily,
    eps: f64,
    count: usize,
    opts: &EigenOptions,
) -> Result<IntervalSet> {
    if count == 0 {
        return Err(Error::OutOfRange("interval count must be at least 1".into()));
    }
    let scaled = apply_metric(cell, fam, eps)?;
    let neumann = assemble(&scaled, &BoundaryCondition::Neumann)?.lowest(count, opts)?;
    if neumann.len() < count {
        return Err(Error::TooManyEigenvalues { requested: count, available: neumann.len() });
    }
    let dirichlet = match scaled.dirichlet_dim() {
        0 => Spectrum::new(Vec::new(), count),
        _ => assemble(&scaled, &BoundaryCondition::Dirichlet)?.lowest(count, opts)?,
    };
    IntervalSet::from_spectra(&neumann, &dirichlet)
}

/// The dyadic grid `2⁻¹, …, 2⁻ⁿ`, largest first.
pub fn dyadic_grid(levels: u32) -> Vec<f64> {
    (1..=levels as i32).map(|i| 0.5f64.powi(i)).collect()
}

/// Default sweep grid `2⁻¹, …, 2⁻¹²`.
pub fn default_sweep_grid() -> Vec<f64> {
    dyadic_grid(12)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub eps: f64,
    pub intervals: IntervalSet,
    pub components: Components,
}

/// Intervals and components at every grid point, in grid order.
pub fn sweep(
    cell: &CellGraph,
    fam: &MetricFamily,
    count: usize,
    grid: &[f64],
    opts: &EigenOptions,
) -> Result<Vec<SweepPoint>> {
    if grid.is_empty() {
        return Err(Error::OutOfRange("ε-grid is empty".into()));
    }
    grid.par_iter()
        .map(|&eps| {
            let intervals = dn_intervals_with(cell, fam, eps, count, opts)?;
            let components = merge_components(&intervals);
            Ok(SweepPoint { eps, intervals, components })
        })
        .collect()
}

/// Lowest `count` eigenvalues of the decoupled limit cell.
pub fn limit_spectrum(cell: &CellGraph, fam: &MetricFamily, count: usize, opts: &EigenOptions) -> Result<Spectrum> {
    assemble(&limit_cell(cell, fam)?, &BoundaryCondition::Neumann)?.lowest(count, opts)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapSearch {
    /// Largest grid ε with at least the requested number of gaps.
    pub eps: Option<f64>,
    pub gaps: Vec<(f64, f64)>,
    /// Distinct limit eigenvalues among the first `count`.
    pub distinct_limit: usize,
}

/// Largest grid ε whose merged `I_1 … I_count` have at least `n` gaps. When
/// the limit spectrum has fewer than `n + 1` distinct values among the first
/// `count`, the answer is `None` without a sweep.
pub fn find_eps_for_gaps(
    cell: &CellGraph,
    fam: &MetricFamily,
    n: usize,
    count: usize,
    grid: &[f64],
    opts: &EigenOptions,
) -> Result<GapSearch> {
    let distinct_limit = limit_spectrum(cell, fam, count, opts)?.distinct(TAU_MULT).len();
    if distinct_limit < n + 1 {
        return Ok(GapSearch { eps: None, gaps: Vec::new(), distinct_limit });
    }
    let points = sweep(cell, fam, count, grid, opts)?;
    Ok(first_with_gaps(&points, n, distinct_limit))
}

/// Same search over an existing sweep.
pub fn first_with_gaps(points: &[SweepPoint], n: usize, distinct_limit: usize) -> GapSearch {
    let best = points
        .iter()
        .filter(|p| p.components.gaps.len() >= n)
        .max_by(|a, b| a.eps.total_cmp(&b.eps));
    GapSearch { eps: best.map(|p| p.eps), gaps: best.map(|p| p.components.gaps.clone()).unwrap_or_default(), distinct_limit }
}

/// `N(λ)`: merged components meeting `[0, λ]`.
pub fn count_components(s: &IntervalSet, lambda: f64) -> usize {
    merge_components(s).components.iter().filter(|(lo, _)| *lo <= lambda + TAU_PW).count()
}

/// `N(λ)` for a point spectrum: distinct values (within `TAU_MULT`) in `[0, λ]`.
pub fn count_points(spectrum: &Spectrum, lambda: f64) -> usize {
    spectrum.distinct(TAU_MULT).into_iter().filter(|v| *v <= lambda + TAU_MULT).count()
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeylRow {
    pub lambda: f64,
    pub limit_count: usize,
    /// Largest sweep ε whose count reaches `limit_count`.
    pub eps: Option<f64>,
    pub achieved: usize,
    pub holds: bool,
    /// False when `λ` lies beyond the computed limit spectrum.
    pub depth_ok: bool,
}

/// Counting-level comparison of `N(g_ε, λ)` with the limit count `N_limit(λ)`.
pub fn weyl_compare(limit: &Spectrum, points: &[SweepPoint], lambdas: &[f64]) -> Vec<WeylRow> {
    let top = limit.values.last().copied().unwrap_or(f64::NEG_INFINITY);
    lambdas
        .iter()
        .map(|&lambda| {
            let limit_count = count_points(limit, lambda);
            let counts: Vec<(f64, usize)> =
                points.iter().map(|p| (p.eps, count_components(&p.intervals, lambda))).collect();
            let chosen = counts
                .iter()
                .filter(|(_, n)| *n >= limit_count)
                .max_by(|a, b| a.0.total_cmp(&b.0))
                .copied();
            let achieved = match chosen {
                Some((_, n)) => n,
                None => counts.iter().map(|c| c.1).max().unwrap_or(0),
            };
            WeylRow {
                lambda,
                limit_count,
                eps: chosen.map(|c| c.0),
                achieved,
                holds: chosen.is_some(),
                depth_ok: lambda < top || limit.len() < limit.count_requested,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum HitOutcome {
    /// A computed spectral point at tower `level` lies in the interval.
    Hit { level: usize, value: f64 },
    /// A residual enclosure `[center - radius, center + radius]` lies in the interval.
    Certified { center: f64, radius: f64 },
    Unconfirmed,
}

impl HitOutcome {
    pub fn is_confirmed(&self) -> bool {
        !matches!(self, HitOutcome::Unconfirmed)
    }
}

/// For each `I_k` with `k ≤ count`, the shallowest level with a spectral
/// point inside; otherwise an enclosure from `certify(k)` if it fits,
/// otherwise `Unconfirmed`.
pub fn classify_hits(
    intervals: &IntervalSet,
    count: usize,
    levels: &[Vec<f64>],
    mut certify: impl FnMut(usize) -> Option<(f64, f64)>,
) -> Vec<HitOutcome> {
    (0..count.min(intervals.len()))
        .map(|k| {
            let (lo, hi) = intervals.get(k);
            for (level, values) in levels.iter().enumerate() {
                if let Some(&value) = values.iter().find(|&&v| v >= lo - TAU_PW && v <= hi + TAU_PW) {
                    return HitOutcome::Hit { level, value };
                }
            }
            match certify(k) {
                Some((center, radius)) if center - radius >= lo - TAU_PW && center + radius <= hi + TAU_PW => {
                    HitOutcome::Certified { center, radius }
                }
                _ => HitOutcome::Unconfirmed,
            }
        })
        .collect()
}

/// Values that lie in no component (endpoints inflated by `TAU_PW`).
pub fn uncovered(components: &Components, values: &[f64]) -> Vec<f64> {
    values.iter().copied().filter(|&v| components.locate(v, TAU_PW).is_none()).collect()
}

/// Summary of one ε: components, gaps, per-interval hit outcomes, `N(λ)` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct GapReport {
    pub eps: f64,
    pub components: Components,
    pub hits: Vec<HitOutcome>,
    pub counts: Vec<(f64, usize)>,
}

impl GapReport {
    pub fn new(point: &SweepPoint, hits: Vec<HitOutcome>, lambdas: &[f64]) -> Self {
        let counts = lambdas.iter().map(|&l| (l, count_components(&point.intervals, l))).collect();
        Self { eps: point.eps, components: point.components.clone(), hits, counts }
    }

    pub fn component_count(&self) -> usize {
        self.components.count()
    }

    pub fn gap_count(&self) -> usize {
        self.components.gaps.len()
    }
}
