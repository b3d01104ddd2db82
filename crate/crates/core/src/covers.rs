//! Finite covering graphs `M_i` glued from copies of a cell along the Cayley
//! graph of a finite quotient, their spectra, and the decomposition and
//! inclusion checks relating them to equivariant spectra.

use rayon::prelude::*;

use crate::analysis::{
    classify_hits, dn_intervals_with, merge_components, Components, HitOutcome, IntervalSet, TAU_PW,
};
use crate::cell::{apply_metric, assemble, BoundaryCondition, CellEdge, CellGraph, MetricFamily};
use crate::error::{Error, Result};
use crate::groups::{irreps, FiniteQuotient, Tower, UnitaryRep};
use crate::linalg::{eig_lowest_pairs, residual_enclosure, EigenOptions, Spectrum};

/// Copies `(v, g)` of the cell vertices, one per group element; vertex
/// `(v, g)` has index `g * n + v` with `n` the cell size.
#[derive(Debug, Clone)]
pub struct CoverGraph {
    graph: CellGraph,
    cell_vertices: usize,
    order: usize,
    /// Left multiplication table `left[h][g] = h·g`.
    left: Vec<Vec<usize>>,
}

impl CoverGraph {
    pub fn graph(&self) -> &CellGraph {
        &self.graph
    }

    pub fn vertex_count(&self) -> usize {
        self.graph.vertex_count()
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn index(&self, v: usize, g: usize) -> usize {
        g * self.cell_vertices + v
    }

    /// Vertex permutation of the deck transformation `(v, g) ↦ (v, h·g)`.
    pub fn deck_permutation(&self, h: usize) -> Vec<usize> {
        (0..self.vertex_count())
            .map(|i| self.index(i % self.cell_vertices, self.left[h][i / self.cell_vertices]))
            .collect()
    }
}

/// Glues `|G|` copies of `cell`: port `p⁻` in copy `g` joins port `p⁺` in
/// copy `g·γ_j`. Couplings that would join a vertex to itself are dropped.
pub fn build_cover(cell: &CellGraph, q: &FiniteQuotient) -> Result<CoverGraph> {
    if cell.generator_count() != q.generator_count() {
        return Err(Error::ArityMismatch { expected: q.generator_count(), got: cell.generator_count() });
    }
    let n = cell.vertex_count();
    let order = q.order();
    let at = |v: usize, g: usize| g * n + v;
    let mut measures = Vec::with_capacity(n * order);
    let mut scaled = Vec::with_capacity(n * order);
    let mut edges = Vec::with_capacity((cell.edges().len() + cell.couplings().count()) * order);
    for g in 0..order {
        measures.extend_from_slice(cell.measures());
        scaled.extend_from_slice(cell.scaled());
        edges.extend(cell.edges().iter().map(|e| CellEdge { a: at(e.a, g), b: at(e.b, g), ..e.clone() }));
        for (j, m, p, c) in cell.couplings() {
            let (a, b) = (at(m, g), at(p, q.right_gen(g, j)));
            if a != b {
                edges.push(CellEdge { a, b, conductance: c, junction: true });
            }
        }
    }
    let graph = CellGraph::new(measures, edges, Vec::new(), scaled)?;
    let left = (0..order).map(|h| (0..order).map(|g| q.mul(h, g)).collect()).collect();
    Ok(CoverGraph { graph, cell_vertices: n, order, left })
}

pub fn cover_spectrum(c: &CoverGraph, k: usize, opts: &EigenOptions) -> Result<Spectrum> {
    assemble(&c.graph, &BoundaryCondition::Neumann)?.lowest(k, opts)
}

pub fn equivariant_spectrum(cell: &CellGraph, rep: &UnitaryRep, k: usize, opts: &EigenOptions) -> Result<Spectrum> {
    assemble(cell, &BoundaryCondition::Equivariant(rep.clone()))?.lowest(k, opts)
}

/// Spectrum of the quotient `M` (ports identified), i.e. the trivial representation.
pub fn quotient_spectrum(cell: &CellGraph, k: usize, opts: &EigenOptions) -> Result<Spectrum> {
    equivariant_spectrum(cell, &UnitaryRep::trivial(cell.generator_count()), k, opts)
}

/// Index-wise pairing of two ascending lists; returns the largest gap, or
/// `None` when the lengths differ.
pub fn pairing_gap(a: &[f64], b: &[f64]) -> Option<f64> {
    (a.len() == b.len()).then(|| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeterWeylReport {
    pub cover: Vec<f64>,
    /// `⋃_ρ dim(ρ)·spec(Δ^ρ)`, truncated to the same length.
    pub merged: Vec<f64>,
    pub rep_dims: Vec<usize>,
    pub max_gap: f64,
}

impl PeterWeylReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.cover.len() == self.merged.len() && self.max_gap <= tol
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PeterWeylOutcome {
    Checked(PeterWeylReport),
    Skipped(String),
}

/// Compares the lowest `k` cover eigenvalues with the union of the
/// equivariant spectra over all irreducible representations, each repeated
/// `dim ρ` times.
pub fn peter_weyl_check(cell: &CellGraph, q: &FiniteQuotient, k: usize, opts: &EigenOptions) -> Result<PeterWeylOutcome> {
    let reps = match irreps(q) {
        Ok(r) => r,
        Err(Error::Unsupported(msg)) => return Ok(PeterWeylOutcome::Skipped(msg)),
        Err(e) => return Err(e),
    };
    let cover = cover_spectrum(&build_cover(cell, q)?, k, opts)?.values;
    let parts: Vec<(usize, Vec<f64>)> = reps
        .par_iter()
        .map(|rep| Ok((rep.dim(), equivariant_spectrum(cell, rep, k, opts)?.values)))
        .collect::<Result<_>>()?;
    let mut merged: Vec<f64> =
        parts.iter().flat_map(|(d, vals)| vals.iter().flat_map(move |v| std::iter::repeat_n(*v, *d))).collect();
    merged.sort_by(f64::total_cmp);
    merged.truncate(cover.len());
    let max_gap = pairing_gap(&cover, &merged).unwrap_or(f64::INFINITY);
    Ok(PeterWeylOutcome::Checked(PeterWeylReport {
        cover,
        merged,
        rep_dims: parts.iter().map(|p| p.0).collect(),
        max_gap,
    }))
}

/// True when each of the lowest `k` quotient eigenvalues is within `TAU_PW`
/// of a cover eigenvalue.
pub fn quotient_embedding_check(cell: &CellGraph, q: &FiniteQuotient, k: usize, opts: &EigenOptions) -> Result<bool> {
    let base = quotient_spectrum(cell, k, opts)?;
    let cover = build_cover(cell, q)?;
    let depth = (k * q.order()).min(cover.vertex_count());
    let lifted = cover_spectrum(&cover, depth, opts)?;
    Ok(base.values.iter().all(|v| lifted.values.iter().any(|w| (v - w).abs() <= TAU_PW)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelSpectrum {
    pub level: usize,
    pub order: usize,
    pub values: Vec<f64>,
    /// First interval `I_k` (zero-based) containing each value.
    pub interval: Vec<Option<usize>>,
}

impl LevelSpectrum {
    pub fn outside(&self) -> Vec<f64> {
        self.values.iter().zip(&self.interval).filter(|(_, i)| i.is_none()).map(|(v, _)| *v).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TowerReport {
    pub eps: f64,
    pub intervals: IntervalSet,
    pub components: Components,
    pub levels: Vec<LevelSpectrum>,
    /// Outcome per `I_k`, `k ≤ hit_count`.
    pub hits: Vec<HitOutcome>,
}

impl TowerReport {
    pub fn all_inside(&self) -> bool {
        self.levels.iter().all(|l| l.interval.iter().all(Option::is_some))
    }
}

/// Cover spectra (lowest `k`) at every tower level for the ε-metric cell,
/// located in the intervals `I_j(ε)` for all `j` up to the cell size, plus
/// hit outcomes for the first `hit_count` intervals.
///
/// An interval missed by every level is certified, if possible, by lifting
/// the matching quotient eigenvector to the deepest cover and bounding its
/// residual.
pub fn tower_spectrum_union(
    cell: &CellGraph,
    fam: &MetricFamily,
    t: &Tower,
    k: usize,
    eps: f64,
    hit_count: usize,
    opts: &EigenOptions,
) -> Result<TowerReport> {
    if t.depth() == 0 {
        return Err(Error::InvalidGroup("tower has no levels".into()));
    }
    let scaled = apply_metric(cell, fam, eps)?;
    let intervals = dn_intervals_with(cell, fam, eps, cell.vertex_count(), opts)?;
    let components = merge_components(&intervals);
    let quotients: Vec<&FiniteQuotient> = (0..t.depth()).map(|i| t.level(i)).collect::<Result<_>>()?;
    let covers: Vec<CoverGraph> = quotients.par_iter().map(|q| build_cover(&scaled, q)).collect::<Result<_>>()?;
    let levels: Vec<LevelSpectrum> = covers
        .par_iter()
        .enumerate()
        .map(|(level, c)| {
            let values = cover_spectrum(c, k, opts)?.values;
            let interval = values.iter().map(|&v| intervals.containing(v, TAU_PW).first().copied()).collect();
            Ok(LevelSpectrum { level, order: c.order(), values, interval })
        })
        .collect::<Result<_>>()?;
    let deepest = covers.last().expect("tower is nonempty");
    let spectra: Vec<Vec<f64>> = levels.iter().map(|l| l.values.clone()).collect();
    let hits = classify_hits(&intervals, hit_count, &spectra, |j| lifted_quasimode(&scaled, deepest, j, opts).ok());
    Ok(TowerReport { eps, intervals, components, levels, hits })
}

/// The `j`-th (zero-based) quotient eigenpair, lifted constantly over the
/// copies of `cover`: returns its eigenvalue and residual enclosure radius.
fn lifted_quasimode(cell: &CellGraph, cover: &CoverGraph, j: usize, opts: &EigenOptions) -> Result<(f64, f64)> {
    let base = assemble(cell, &BoundaryCondition::Equivariant(UnitaryRep::trivial(cell.generator_count())))?;
    let pairs = eig_lowest_pairs(&base.stiffness, &base.mass, j + 1, opts)?;
    let (lambda, u) = match (pairs.values.get(j), pairs.vectors.get(j)) {
        (Some(l), Some(u)) => (*l, u),
        _ => return Err(Error::TooManyEigenvalues { requested: j + 1, available: pairs.values.len() }),
    };
    let lifted: Vec<f64> = (0..cover.vertex_count()).map(|i| u[i % cell.vertex_count()]).collect();
    let op = assemble(cover.graph(), &BoundaryCondition::Neumann)?;
    Ok((lambda, residual_enclosure(&op.stiffness, &op.mass, &lifted, lambda)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cell::{MetricMode, PortPairing};
    use crate::groups::{GroupPresentation, QuotientSpec};
    use std::f64::consts::PI;

    fn opts() -> EigenOptions {
        EigenOptions::default()
    }

    fn single_vertex(w: f64, r: usize) -> CellGraph {
        let ports = (0..r).map(|_| PortPairing { minus: vec![0], plus: vec![0], conductance: vec![w] }).collect();
        CellGraph::new(vec![1.0], Vec::new(), ports, vec![false]).unwrap()
    }

    fn p3_end_ports() -> CellGraph {
        let c = CellGraph::path(3).unwrap();
        CellGraph::new(
            c.measures().to_vec(),
            c.edges().to_vec(),
            vec![PortPairing { minus: vec![0], plus: vec![2], conductance: vec![1.0] }],
            vec![false; 3],
        )
        .unwrap()
    }

    fn cyclic(m: u32) -> FiniteQuotient {
        FiniteQuotient::new(QuotientSpec::cyclic_power(1, m).unwrap()).unwrap()
    }

    /// Two generators; four vertices in a path, ports at both ends in each direction.
    fn two_generator_cell() -> CellGraph {
        let c = CellGraph::path(4).unwrap();
        CellGraph::new(
            vec![1.0, 2.0, 1.5, 1.0],
            c.edges().to_vec(),
            vec![
                PortPairing { minus: vec![0], plus: vec![3], conductance: vec![0.7] },
                PortPairing { minus: vec![1], plus: vec![2], conductance: vec![0.4] },
            ],
            vec![false; 4],
        )
        .unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        pairing_gap(a, b).is_some_and(|g| g <= tol)
    }

    #[test]
    fn single_vertex_cover_is_a_cycle() {
        let w = 0.8;
        for m in [1u32, 2, 3, 5, 8] {
            let cover = build_cover(&single_vertex(w, 1), &cyclic(m)).unwrap();
            assert_eq!(cover.vertex_count(), m as usize);
            let got = cover_spectrum(&cover, m as usize, &opts()).unwrap();
            let mut want: Vec<f64> = (0..m).map(|j| 2.0 * w * (1.0 - (2.0 * PI * j as f64 / m as f64).cos())).collect();
            want.sort_by(f64::total_cmp);
            if m == 2 {
                // the two copies are joined twice
                want = vec![0.0, 4.0 * w];
            }
            assert!(close(&got.values, &want, 1e-10), "m={m}: {:?} vs {want:?}", got.values);
        }
    }

    #[test]
    fn trivial_group_cover_is_the_quotient() {
        let q = FiniteQuotient::new(QuotientSpec::cyclic_power(1, 1).unwrap()).unwrap();
        let cell = p3_end_ports();
        let cover = cover_spectrum(&build_cover(&cell, &q).unwrap(), 3, &opts()).unwrap();
        let quot = quotient_spectrum(&cell, 3, &opts()).unwrap();
        assert!(close(&cover.values, &quot.values, 1e-12));
        assert!(cover.values[0].abs() < 1e-12);
        assert!(quotient_embedding_check(&cell, &q, 3, &opts()).unwrap());
    }

    #[test]
    fn ring_of_three_p3_cells_matches_bloch_samples() {
        let cell = p3_end_ports();
        let cover = build_cover(&cell, &cyclic(3)).unwrap();
        assert_eq!(cover.vertex_count(), 9);
        let got = cover_spectrum(&cover, 9, &opts()).unwrap();
        let mut bloch: Vec<f64> = (0..3)
            .flat_map(|j| {
                let theta = 2.0 * PI * j as f64 / 3.0;
                assemble(&cell, &BoundaryCondition::Bloch(vec![theta])).unwrap().full_spectrum(&opts()).unwrap().values
            })
            .collect();
        bloch.sort_by(f64::total_cmp);
        assert!(close(&got.values, &bloch, 1e-10));
    }

    #[test]
    fn characters_match_bloch() {
        let cell = single_vertex(1.3, 1);
        for j in 0..6 {
            let theta = 2.0 * PI * j as f64 / 6.0;
            let s = equivariant_spectrum(&cell, &UnitaryRep::character(&[theta]), 1, &opts()).unwrap();
            assert!((s.values[0] - 2.0 * 1.3 * (1.0 - theta.cos())).abs() < 1e-12);
        }
    }

    #[test]
    fn arity_mismatch() {
        assert!(matches!(build_cover(&single_vertex(1.0, 2), &cyclic(3)), Err(Error::ArityMismatch { .. })));
    }

    #[test]
    fn deck_transformations_preserve_spectrum() {
        let cell = two_generator_cell();
        let q = FiniteQuotient::new(QuotientSpec::symmetric(3).unwrap()).unwrap();
        let cover = build_cover(&cell, &q).unwrap();
        let base = cover_spectrum(&cover, cover.vertex_count(), &opts()).unwrap();
        for h in 0..q.order() {
            let perm = cover.deck_permutation(h);
            let moved = cover.graph().relabeled(&perm).unwrap();
            // deck maps preserve the edge multiset exactly
            let key = |g: &CellGraph| {
                let mut e: Vec<(usize, usize, u64)> = g
                    .edges()
                    .iter()
                    .map(|e| (e.a.min(e.b), e.a.max(e.b), e.conductance.to_bits()))
                    .collect();
                e.sort();
                e
            };
            assert_eq!(key(&moved), key(cover.graph()));
            let s = assemble(&moved, &BoundaryCondition::Neumann).unwrap().full_spectrum(&opts()).unwrap();
            assert!(close(&s.values, &base.values, 1e-10));
        }
    }

    #[test]
    fn peter_weyl_cyclic_and_s3() {
        let opts = opts();
        for m in [2u32, 5, 7] {
            let cell = p3_end_ports();
            match peter_weyl_check(&cell, &cyclic(m), 3 * m as usize, &opts).unwrap() {
                PeterWeylOutcome::Checked(r) => assert!(r.passes(1e-9), "m={m} gap {}", r.max_gap),
                PeterWeylOutcome::Skipped(s) => panic!("{s}"),
            }
        }
        let q = FiniteQuotient::new(QuotientSpec::symmetric(3).unwrap()).unwrap();
        match peter_weyl_check(&two_generator_cell(), &q, 24, &opts).unwrap() {
            PeterWeylOutcome::Checked(r) => {
                assert!(r.passes(1e-9), "gap {}", r.max_gap);
                let mut dims = r.rep_dims.clone();
                dims.sort();
                assert_eq!(dims, vec![1, 1, 2]);
                assert_eq!(r.cover.len(), 24);
            }
            PeterWeylOutcome::Skipped(s) => panic!("{s}"),
        }
    }

    #[test]
    fn peter_weyl_trivial_and_unsupported() {
        let q = FiniteQuotient::new(QuotientSpec::cyclic_power(1, 1).unwrap()).unwrap();
        assert!(matches!(
            peter_weyl_check(&p3_end_ports(), &q, 3, &opts()).unwrap(),
            PeterWeylOutcome::Checked(r) if r.max_gap < 1e-12
        ));
        let s5 = FiniteQuotient::new(QuotientSpec::symmetric(5).unwrap()).unwrap();
        assert!(matches!(peter_weyl_check(&two_generator_cell(), &s5, 5, &opts()).unwrap(), PeterWeylOutcome::Skipped(_)));
    }

    #[test]
    fn heisenberg_embedding() {
        let q = FiniteQuotient::new(QuotientSpec::heisenberg(2).unwrap()).unwrap();
        assert!(quotient_embedding_check(&two_generator_cell(), &q, 4, &opts()).unwrap());
        for m in [3u32, 6] {
            assert!(quotient_embedding_check(&single_vertex(1.0, 1), &cyclic(m), 1, &opts()).unwrap());
        }
    }

    #[test]
    fn equivariant_values_stay_in_envelopes() {
        let cell = two_generator_cell();
        let q = FiniteQuotient::new(QuotientSpec::symmetric(3).unwrap()).unwrap();
        assert_eq!(cell.dirichlet_dim(), 0);
        let neu = assemble(&cell, &BoundaryCondition::Neumann).unwrap().full_spectrum(&opts()).unwrap();
        let envelope = IntervalSet::from_spectra(&neu, &Spectrum::new(Vec::new(), 4)).unwrap();
        for rep in irreps(&q).unwrap() {
            let n = rep.dim();
            let s = equivariant_spectrum(&cell, &rep, n * cell.vertex_count(), &opts()).unwrap();
            for (m, v) in s.values.iter().enumerate() {
                let (lo, hi) = envelope.envelope_for(m, n).unwrap();
                assert!(*v >= lo - TAU_PW && *v <= hi + TAU_PW);
            }
        }
    }

    #[test]
    fn cyclic_tower_inclusion_and_hits() {
        let body = 3;
        let cell = CellGraph::with_bridges(vec![1.0; body], vec![(0, 1, 1.0), (1, 2, 1.0)], &[(0, 2)], 1, 1.0, 1.0, 1.0)
            .unwrap();
        let fam = MetricFamily::new(MetricMode::Handle, 3).unwrap();
        let levels = [2u32, 4, 8].iter().map(|&m| QuotientSpec::cyclic_power(1, m).unwrap()).collect();
        let t = Tower::new(GroupPresentation::free_abelian(1).unwrap(), levels).unwrap();
        let report = tower_spectrum_union(&cell, &fam, &t, 30, 0.05, 5, &opts()).unwrap();
        assert!(report.all_inside());
        assert_eq!(report.levels.len(), 3);
        assert_eq!(report.levels[2].values.len(), 30);
        assert!(report.hits.iter().all(|h| matches!(h, HitOutcome::Hit { .. })));
        let trivial = Tower::new(
            GroupPresentation::free_abelian(1).unwrap(),
            vec![QuotientSpec::cyclic_power(1, 1).unwrap()],
        )
        .unwrap();
        let r = tower_spectrum_union(&cell, &fam, &trivial, 5, 0.05, 3, &opts()).unwrap();
        assert!(r.all_inside());
    }

    #[test]
    fn lifted_quasimodes_are_exact() {
        let cell = p3_end_ports();
        let cover = build_cover(&cell, &cyclic(4)).unwrap();
        for j in 0..3 {
            let (_, r) = lifted_quasimode(&cell, &cover, j, &opts()).unwrap();
            assert!(r < 1e-9);
        }
    }
}
