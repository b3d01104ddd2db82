//! The fundamental domain as a weighted graph with generator-labeled port
//! pairings, the two ε-decoupling metric families, and operator assembly
//! under Dirichlet, Neumann, equivariant and Bloch boundary conditions.
//!
//! Stiffness comes from conductances, mass from vertex measures, so the
//! quadratic form of a vertex function `u` is
//! `Σ_edges c (u_a - u_b)² + Σ_ports c |u_{p⁻} - ρ(γ_j) u_{p⁺}|²`
//! with the port terms present only for coupled (equivariant/Bloch) conditions.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::groups::UnitaryRep;
use crate::linalg::{eig_lowest_with, EigenOptions, MassMatrix, Spectrum, SymMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct CellEdge {
    pub a: usize,
    pub b: usize,
    pub conductance: f64,
    /// Scaled by the handle model.
    pub junction: bool,
}

/// Port pairing of one generator: `minus[i]` in copy `g` couples to
/// `plus[i]` in copy `g·γ_j` with conductance `conductance[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PortPairing {
    pub minus: Vec<usize>,
    pub plus: Vec<usize>,
    pub conductance: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellGraph {
    measures: Vec<f64>,
    edges: Vec<CellEdge>,
    ports: Vec<PortPairing>,
    /// Handle (bridge) vertices or conformal-zone vertices.
    scaled: Vec<bool>,
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

impl CellGraph {
    pub fn new(measures: Vec<f64>, edges: Vec<CellEdge>, ports: Vec<PortPairing>, scaled: Vec<bool>) -> Result<Self> {
        let n = measures.len();
        let bad = |m: String| Err(Error::InvalidCell(m));
        if n == 0 {
            return bad("cell needs at least one vertex".into());
        }
        if scaled.len() != n {
            return bad(format!("scaled flags cover {} of {n} vertices", scaled.len()));
        }
        if let Some(i) = measures.iter().position(|m| !(*m > 0.0 && m.is_finite())) {
            return bad(format!("vertex {i} has non-positive measure"));
        }
        for (k, e) in edges.iter().enumerate() {
            if e.a >= n || e.b >= n {
                return bad(format!("edge {k} references a missing vertex"));
            }
            if e.a == e.b {
                return bad(format!("edge {k} is a loop"));
            }
            if !(e.conductance > 0.0 && e.conductance.is_finite()) {
                return bad(format!("edge {k} has non-positive conductance"));
            }
        }
        for (j, p) in ports.iter().enumerate() {
            if p.minus.len() != p.plus.len() || p.minus.len() != p.conductance.len() {
                return bad(format!("port pairing {j} has mismatched lengths"));
            }
            if p.minus.is_empty() {
                return bad(format!("port pairing {j} is empty"));
            }
            for list in [&p.minus, &p.plus] {
                let mut seen = vec![false; n];
                for &v in list.iter() {
                    if v >= n {
                        return bad(format!("port pairing {j} references a missing vertex"));
                    }
                    if std::mem::replace(&mut seen[v], true) {
                        return bad(format!("port pairing {j} repeats vertex {v}"));
                    }
                }
            }
            if p.conductance.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
                return bad(format!("port pairing {j} has non-positive conductance"));
            }
        }
        let cell = Self { measures, edges, ports, scaled };
        // connected once every port pair is identified
        let mut parent: Vec<usize> = (0..n).collect();
        for (a, b) in cell.edges.iter().map(|e| (e.a, e.b)).chain(cell.couplings().map(|(_, a, b, _)| (a, b))) {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            parent[ra] = rb;
        }
        let root = find(&mut parent, 0);
        if (0..n).any(|v| find(&mut parent, v) != root) {
            return bad("cell is disconnected even with ports identified".into());
        }
        Ok(cell)
    }

    /// Path graph `0 - 1 - … - (n-1)` with unit weights and no ports.
    pub fn path(n: usize) -> Result<Self> {
        let edges = (1..n).map(|i| CellEdge { a: i - 1, b: i, conductance: 1.0, junction: false }).collect();
        Self::new(vec![1.0; n], edges, Vec::new(), vec![false; n])
    }

    /// A body graph with decoupling bridges: for each generator `j` with
    /// anchors `(a⁻, a⁺)`, two bridge paths of `bridge_len` scaled vertices
    /// hang off `a⁻` and `a⁺`; their far ends are the ports `P_j⁻`, `P_j⁺`,
    /// coupled with conductance `coupling`. Bridge edges are junction edges.
    pub fn with_bridges(
        body_measures: Vec<f64>,
        body_edges: Vec<(usize, usize, f64)>,
        anchors: &[(usize, usize)],
        bridge_len: usize,
        bridge_measure: f64,
        bridge_conductance: f64,
        coupling: f64,
    ) -> Result<Self> {
        if bridge_len == 0 {
            return Err(Error::InvalidCell("bridge length must be at least 1".into()));
        }
        let body = body_measures.len();
        let mut measures = body_measures;
        let mut scaled = vec![false; body];
        let mut edges: Vec<CellEdge> =
            body_edges.into_iter().map(|(a, b, c)| CellEdge { a, b, conductance: c, junction: false }).collect();
        let mut ports = Vec::new();
        for &(am, ap) in anchors {
            let mut ends = [0usize; 2];
            for (side, anchor) in [am, ap].into_iter().enumerate() {
                let mut prev = anchor;
                for _ in 0..bridge_len {
                    let v = measures.len();
                    measures.push(bridge_measure);
                    scaled.push(true);
                    edges.push(CellEdge { a: prev, b: v, conductance: bridge_conductance, junction: true });
                    prev = v;
                }
                ends[side] = prev;
            }
            ports.push(PortPairing { minus: vec![ends[0]], plus: vec![ends[1]], conductance: vec![coupling] });
        }
        Self::new(measures, edges, ports, scaled)
    }

    pub fn vertex_count(&self) -> usize {
        self.measures.len()
    }

    pub fn generator_count(&self) -> usize {
        self.ports.len()
    }

    pub fn measures(&self) -> &[f64] {
        &self.measures
    }

    pub fn edges(&self) -> &[CellEdge] {
        &self.edges
    }

    pub fn ports(&self) -> &[PortPairing] {
        &self.ports
    }

    pub fn scaled(&self) -> &[bool] {
        &self.scaled
    }

    /// `(generator, minus vertex, plus vertex, conductance)` for every port pair.
    pub fn couplings(&self) -> impl Iterator<Item = (usize, usize, usize, f64)> + '_ {
        self.ports.iter().enumerate().flat_map(|(j, p)| {
            p.minus.iter().zip(&p.plus).zip(&p.conductance).map(move |((&m, &pl), &c)| (j, m, pl, c))
        })
    }

    /// Vertices constrained by the Dirichlet condition.
    pub fn port_vertices(&self) -> Vec<bool> {
        let mut on = vec![false; self.vertex_count()];
        for p in &self.ports {
            for &v in p.minus.iter().chain(&p.plus) {
                on[v] = true;
            }
        }
        on
    }

    pub fn dirichlet_dim(&self) -> usize {
        self.port_vertices().iter().filter(|p| !**p).count()
    }

    /// The same cell with vertices relabeled by `perm` (vertex `v` becomes `perm[v]`).
    pub fn relabeled(&self, perm: &[usize]) -> Result<Self> {
        let n = self.vertex_count();
        if perm.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: perm.len() });
        }
        let mut measures = vec![0.0; n];
        let mut scaled = vec![false; n];
        for v in 0..n {
            measures[perm[v]] = self.measures[v];
            scaled[perm[v]] = self.scaled[v];
        }
        let edges = self.edges.iter().map(|e| CellEdge { a: perm[e.a], b: perm[e.b], ..e.clone() }).collect();
        let ports = self
            .ports
            .iter()
            .map(|p| PortPairing {
                minus: p.minus.iter().map(|&v| perm[v]).collect(),
                plus: p.plus.iter().map(|&v| perm[v]).collect(),
                conductance: p.conductance.clone(),
            })
            .collect();
        Self::new(measures, edges, ports, scaled)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricMode {
    /// Thin handles: junction edges and handle vertices shrink.
    Handle,
    /// Conformal change `ρ_ε² g` on a zone separating the copies.
    Conformal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MetricFamily {
    pub mode: MetricMode,
    pub dimension: u32,
}

impl MetricFamily {
    pub fn new(mode: MetricMode, dimension: u32) -> Result<Self> {
        if dimension < 2 {
            return Err(Error::OutOfRange(format!("dimension must be at least 2, got {dimension}")));
        }
        if mode == MetricMode::Conformal && dimension < 3 {
            return Err(Error::OutOfRange("the conformal family needs dimension >= 3".into()));
        }
        Ok(Self { mode, dimension })
    }

    /// Conductance factor `ε^{d-2}` of a fully scaled edge.
    pub fn edge_factor(&self, eps: f64) -> f64 {
        eps.powi(self.dimension as i32 - 2)
    }

    /// Measure factor `ε^d` of a scaled vertex.
    pub fn vertex_factor(&self, eps: f64) -> f64 {
        eps.powi(self.dimension as i32)
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps <= 1.0 {
        Ok(())
    } else {
        Err(Error::OutOfRange(format!("ε must lie in (0, 1], got {eps}")))
    }
}

/// The cell carrying the ε-metric of `fam`.
///
/// Handle model: junction edges and every port coupling get `ε^{d-2}`, scaled
/// vertices get `ε^d`. Conformal model: scaled vertices get `ε^d`; an edge or
/// coupling gets the geometric mean of its endpoint factors (`ε^{d-2}` on the
/// zone, `1` off it).
pub fn apply_metric(cell: &CellGraph, fam: &MetricFamily, eps: f64) -> Result<CellGraph> {
    check_eps(eps)?;
    let ef = fam.edge_factor(eps);
    let vf = fam.vertex_factor(eps);
    let mut out = cell.clone();
    for (m, &s) in out.measures.iter_mut().zip(&cell.scaled) {
        if s {
            *m *= vf;
        }
    }
    let endpoint = |v: usize| if cell.scaled[v] { ef } else { 1.0 };
    match fam.mode {
        MetricMode::Handle => {
            for e in out.edges.iter_mut().filter(|e| e.junction) {
                e.conductance *= ef;
            }
            for p in &mut out.ports {
                p.conductance.iter_mut().for_each(|c| *c *= ef);
            }
        }
        MetricMode::Conformal => {
            for e in &mut out.edges {
                e.conductance *= (endpoint(e.a) * endpoint(e.b)).sqrt();
            }
            for p in &mut out.ports {
                for ((c, &m), &pl) in p.conductance.iter_mut().zip(&p.minus).zip(&p.plus) {
                    *c *= (endpoint(m) * endpoint(pl)).sqrt();
                }
            }
        }
    }
    Ok(out)
}

/// The decoupled limit cell: scaled vertices, junction edges and ports removed.
pub fn limit_cell(cell: &CellGraph, fam: &MetricFamily) -> Result<CellGraph> {
    let keep: Vec<usize> = (0..cell.vertex_count()).filter(|&v| !cell.scaled[v]).collect();
    if keep.is_empty() {
        return Err(Error::InvalidCell("limit cell is empty".into()));
    }
    let mut new_index = vec![usize::MAX; cell.vertex_count()];
    for (i, &v) in keep.iter().enumerate() {
        new_index[v] = i;
    }
    let edges = cell
        .edges
        .iter()
        .filter(|e| !cell.scaled[e.a] && !cell.scaled[e.b])
        .filter(|e| !(fam.mode == MetricMode::Handle && e.junction))
        .map(|e| CellEdge { a: new_index[e.a], b: new_index[e.b], conductance: e.conductance, junction: false })
        .collect();
    let measures = keep.iter().map(|&v| cell.measures[v]).collect();
    CellGraph::new(measures, edges, Vec::new(), vec![false; keep.len()])
}

/// `h(r) = r^{2-d}` for `d ≥ 3`, `ln r` for `d = 2`.
fn cutoff_h(d: u32, r: f64) -> f64 {
    if d == 2 {
        r.ln()
    } else {
        r.powi(2 - d as i32)
    }
}

/// Capacity cut-off: `0` on `(0, ε]`, `(h(r) - h(ε)) / (h(√ε) - h(ε))` on
/// `[ε, √ε]`, `1` on `[√ε, 1]`.
pub fn cutoff_profile(d: u32, eps: f64, r: f64) -> Result<f64> {
    if d < 2 {
        return Err(Error::OutOfRange(format!("dimension must be at least 2, got {d}")));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::OutOfRange(format!("ε must lie in (0, 1), got {eps}")));
    }
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::OutOfRange(format!("r must lie in (0, 1], got {r}")));
    }
    let root = eps.sqrt();
    Ok(if r <= eps {
        0.0
    } else if r >= root {
        1.0
    } else {
        (cutoff_h(d, r) - cutoff_h(d, eps)) / (cutoff_h(d, root) - cutoff_h(d, eps))
    })
}

/// Discrete radial Dirichlet energy `Σ |Δχ/Δr|² r_mid^{d-1} Δr` of the
/// cut-off on a uniform grid of `cells` intervals over `(0, 1]`.
pub fn cutoff_energy(d: u32, eps: f64, cells: usize) -> Result<f64> {
    let dr = 1.0 / cells as f64;
    let mut prev = cutoff_profile(d, eps, dr)?;
    let mut total = 0.0;
    for i in 1..cells {
        let r = (i + 1) as f64 * dr;
        let cur = cutoff_profile(d, eps, r.min(1.0))?;
        let slope = (cur - prev) / dr;
        let mid = r - 0.5 * dr;
        total += slope * slope * mid.powi(d as i32 - 1) * dr;
        prev = cur;
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryCondition {
    Dirichlet,
    Neumann,
    Equivariant(UnitaryRep),
    /// Phases `θ_j`, one per generator.
    Bloch(Vec<f64>),
}

/// An assembled generalized eigenproblem. Complex Hermitian problems are
/// realized as real symmetric ones of twice the size (`[[A, -B], [B, A]]`
/// for `H = A + iB`), which repeats every eigenvalue twice.
#[derive(Debug, Clone)]
pub struct Operator {
    pub stiffness: SymMatrix,
    pub mass: MassMatrix,
    pub realified: bool,
}

impl Operator {
    /// Dimension of the underlying (complex) problem.
    pub fn dim(&self) -> usize {
        if self.realified {
            self.stiffness.dim() / 2
        } else {
            self.stiffness.dim()
        }
    }

    /// The `k` lowest eigenvalues of the underlying problem.
    pub fn lowest(&self, k: usize, opts: &EigenOptions) -> Result<Spectrum> {
        if !self.realified {
            return eig_lowest_with(&self.stiffness, &self.mass, k, opts);
        }
        let doubled = eig_lowest_with(&self.stiffness, &self.mass, 2 * k, opts)?;
        let values = doubled.values.iter().step_by(2).copied().collect();
        Ok(Spectrum::new(values, k))
    }

    /// Whole spectrum.
    pub fn full_spectrum(&self, opts: &EigenOptions) -> Result<Spectrum> {
        self.lowest(self.dim(), opts)
    }
}

/// Upper-triangle accumulator for a Hermitian matrix. Callers add every entry
/// of a Hermitian contribution; entries below the diagonal are implied.
struct Hermitian {
    dim: usize,
    upper: BTreeMap<(usize, usize), Complex64>,
}

impl Hermitian {
    fn new(dim: usize) -> Self {
        Self { dim, upper: BTreeMap::new() }
    }

    fn add(&mut self, i: usize, j: usize, z: Complex64) {
        if i <= j {
            *self.upper.entry((i, j)).or_insert(Complex64::new(0.0, 0.0)) += z;
        }
    }

    fn into_operator(self, mass: Vec<f64>, real: bool) -> Result<Operator> {
        let n = self.dim;
        if real {
            let mut s = SymMatrix::new(n)?;
            for (&(i, j), z) in &self.upper {
                s.add(i, j, z.re);
            }
            return Ok(Operator { stiffness: s, mass: MassMatrix::new(mass)?, realified: false });
        }
        let mut s = SymMatrix::new(2 * n)?;
        for (&(i, j), z) in &self.upper {
            s.add(i, j, z.re);
            s.add(n + i, n + j, z.re);
            if i != j {
                s.add(i, n + j, -z.im);
                s.add(j, n + i, z.im);
            }
        }
        let doubled = mass.iter().chain(mass.iter()).copied().collect();
        Ok(Operator { stiffness: s, mass: MassMatrix::new(doubled)?, realified: true })
    }
}

/// Assembles the generalized eigenproblem of `cell` under `bc`.
///
/// Dirichlet removes every port vertex; Neumann keeps them free with no
/// coupling; `Equivariant(ρ)` gives each vertex an `n`-vector and couples
/// `p⁻` to `ρ(γ_j) p⁺`; `Bloch(θ)` is the scalar case `ρ(γ_j) = e^{iθ_j}`.
pub fn assemble(cell: &CellGraph, bc: &BoundaryCondition) -> Result<Operator> {
    match bc {
        BoundaryCondition::Neumann => assemble_scalar(cell, &vec![true; cell.vertex_count()]),
        BoundaryCondition::Dirichlet => {
            let free: Vec<bool> = cell.port_vertices().iter().map(|p| !p).collect();
            if !free.iter().any(|f| *f) {
                return Err(Error::InvalidCell("every vertex is a port; the Dirichlet system is empty".into()));
            }
            assemble_scalar(cell, &free)
        }
        BoundaryCondition::Bloch(theta) => {
            if theta.len() != cell.generator_count() {
                return Err(Error::ArityMismatch { expected: cell.generator_count(), got: theta.len() });
            }
            assemble_equivariant(cell, &UnitaryRep::character(theta))
        }
        BoundaryCondition::Equivariant(rep) => {
            if rep.generator_count() != cell.generator_count() {
                return Err(Error::ArityMismatch { expected: cell.generator_count(), got: rep.generator_count() });
            }
            assemble_equivariant(cell, rep)
        }
    }
}

fn assemble_scalar(cell: &CellGraph, free: &[bool]) -> Result<Operator> {
    let mut index = vec![usize::MAX; cell.vertex_count()];
    let mut mass = Vec::new();
    for v in 0..cell.vertex_count() {
        if free[v] {
            index[v] = mass.len();
            mass.push(cell.measures[v]);
        }
    }
    let mut s = SymMatrix::new(mass.len())?;
    for e in &cell.edges {
        let (a, b) = (index[e.a], index[e.b]);
        if free[e.a] {
            s.add(a, a, e.conductance);
        }
        if free[e.b] {
            s.add(b, b, e.conductance);
        }
        if free[e.a] && free[e.b] {
            s.add(a, b, -e.conductance);
        }
    }
    Ok(Operator { stiffness: s, mass: MassMatrix::new(mass)?, realified: false })
}

fn assemble_equivariant(cell: &CellGraph, rep: &UnitaryRep) -> Result<Operator> {
    let n = rep.dim();
    let dof = |v: usize, a: usize| v * n + a;
    let mut h = Hermitian::new(cell.vertex_count() * n);
    let one = Complex64::new(1.0, 0.0);
    for e in &cell.edges {
        let c = e.conductance * one;
        for a in 0..n {
            h.add(dof(e.a, a), dof(e.a, a), c);
            h.add(dof(e.b, a), dof(e.b, a), c);
            h.add(dof(e.a, a), dof(e.b, a), -c);
            h.add(dof(e.b, a), dof(e.a, a), -c);
        }
    }
    // c |h(p⁻) - U h(p⁺)|²
    for (j, m, p, c) in cell.couplings() {
        let u = rep.generator(j);
        for a in 0..n {
            h.add(dof(m, a), dof(m, a), c * one);
            h.add(dof(p, a), dof(p, a), c * one);
            for b in 0..n {
                h.add(dof(m, a), dof(p, b), -c * u[(a, b)]);
                h.add(dof(p, b), dof(m, a), -c * u[(a, b)].conj());
            }
        }
    }
    let mass = (0..cell.vertex_count() * n).map(|i| cell.measures[i / n]).collect();
    h.into_operator(mass, rep.is_real())
}

/// Lowest `k` Neumann (`λ_k⁻`) and Dirichlet (`λ_k⁺`) eigenvalues.
pub fn dn_eigenvalues(cell: &CellGraph, k: usize) -> Result<(Spectrum, Spectrum)> {
    dn_eigenvalues_with(cell, k, &EigenOptions::default())
}

pub fn dn_eigenvalues_with(cell: &CellGraph, k: usize, opts: &EigenOptions) -> Result<(Spectrum, Spectrum)> {
    if k == 0 {
        return Err(Error::OutOfRange("eigenvalue count must be at least 1".into()));
    }
    let available = cell.dirichlet_dim();
    if k > available {
        return Err(Error::TooManyEigenvalues { requested: k, available });
    }
    let neumann = assemble(cell, &BoundaryCondition::Neumann)?.lowest(k, opts)?;
    let dirichlet = assemble(cell, &BoundaryCondition::Dirichlet)?.lowest(k, opts)?;
    Ok((neumann, dirichlet))
}
