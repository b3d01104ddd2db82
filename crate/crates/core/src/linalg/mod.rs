//! Symmetric generalized eigenproblems `K u = λ M u` with diagonal mass.
//!
//! The generalized problem is reduced to a standard symmetric one through the
//! similarity `M^{-1/2} K M^{-1/2}`. Small systems go through a dense
//! symmetric eigensolver; systems above [`EigenOptions::dense_threshold`] use
//! a block Krylov (Lanczos) iteration with full reorthogonalization.

mod lanczos;

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative accuracy of the dense path.
pub const TAU_EIG_DENSE: f64 = 1e-9;
/// Relative accuracy of the iterative path.
pub const TAU_EIG_ITERATIVE: f64 = 1e-8;

/// Real symmetric matrix stored as its upper triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    upper: BTreeMap<(usize, usize), f64>,
}

impl SymMatrix {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::OutOfRange("matrix dimension must be at least 1".into()));
        }
        Ok(Self { dim, upper: BTreeMap::new() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of stored (upper-triangle) entries.
    pub fn nnz(&self) -> usize {
        self.upper.len()
    }

    /// Accumulates `value` into entry `(i, j)` (and by symmetry `(j, i)`).
    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        assert!(i < self.dim && j < self.dim, "index ({i}, {j}) out of range for dimension {}", self.dim);
        let key = if i <= j { (i, j) } else { (j, i) };
        *self.upper.entry(key).or_insert(0.0) += value;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let key = if i <= j { (i, j) } else { (j, i) };
        self.upper.get(&key).copied().unwrap_or(0.0)
    }

    /// Upper-triangle entries `(i, j, value)` with `i <= j`, in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.upper.iter().map(|(&(i, j), &v)| (i, j, v))
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (i, j, v) in self.iter() {
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
        m
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim);
        let mut y = vec![0.0; self.dim];
        for (i, j, v) in self.iter() {
            y[i] += v * x[j];
            if i != j {
                y[j] += v * x[i];
            }
        }
        y
    }

    /// Symmetric permutation `P A P^T` where row `i` moves to `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.dim);
        let mut out = Self { dim: self.dim, upper: BTreeMap::new() };
        for (i, j, v) in self.iter() {
            out.add(perm[i], perm[j], v);
        }
        out
    }
}

/// Diagonal, strictly positive mass matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MassMatrix {
    diagonal: Vec<f64>,
}

impl MassMatrix {
    pub fn new(diagonal: Vec<f64>) -> Result<Self> {
        if diagonal.is_empty() {
            return Err(Error::OutOfRange("mass dimension must be at least 1".into()));
        }
        if let Some((index, &value)) = diagonal.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(Error::NonPositiveMass { index, value });
        }
        Ok(Self { diagonal })
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::new(vec![1.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.diagonal.len()
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut diagonal = vec![0.0; self.diagonal.len()];
        for (i, &p) in perm.iter().enumerate() {
            diagonal[p] = self.diagonal[i];
        }
        Self { diagonal }
    }
}

/// Lowest eigenvalues, ascending and repeated by multiplicity.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub count_requested: usize,
}

impl Spectrum {
    pub fn new(mut values: Vec<f64>, count_requested: usize) -> Self {
        values.sort_by(f64::total_cmp);
        values.truncate(count_requested);
        Self { values, count_requested }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Distinct values, where neighbours closer than `tol` are one value.
    pub fn distinct(&self, tol: f64) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for &v in &self.values {
            match out.last() {
                Some(&last) if (v - last).abs() <= tol => {}
                _ => out.push(v),
            }
        }
        out
    }
}

/// Eigenvalues together with mass-normalized eigenvectors.
#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    /// `vectors[i]` satisfies `K u = values[i] M u` and `u^T M u = 1`.
    pub vectors: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct EigenOptions {
    /// Largest dimension handled by the dense solver.
    pub dense_threshold: usize,
    /// Relative residual tolerance of the iterative path.
    pub tolerance: f64,
    /// Maximum number of block iterations of the iterative path.
    pub max_iterations: usize,
    pub block_size: usize,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            dense_threshold: 2000,
            tolerance: TAU_EIG_ITERATIVE,
            max_iterations: 400,
            block_size: 8,
            seed: 0x5eed,
        }
    }
}

fn check_dims(stiffness: &SymMatrix, mass: &MassMatrix) -> Result<()> {
    if stiffness.dim() != mass.dim() {
        return Err(Error::DimensionMismatch { expected: stiffness.dim(), got: mass.dim() });
    }
    Ok(())
}

/// `M^{-1/2} K M^{-1/2}` as an upper-triangle matrix.
fn reduce(stiffness: &SymMatrix, mass: &MassMatrix) -> SymMatrix {
    let scale: Vec<f64> = mass.diagonal().iter().map(|m| 1.0 / m.sqrt()).collect();
    let mut out = SymMatrix { dim: stiffness.dim, upper: BTreeMap::new() };
    for (i, j, v) in stiffness.iter() {
        out.upper.insert((i, j), v * scale[i] * scale[j]);
    }
    out
}

/// The `k` lowest generalized eigenvalues of `K u = λ M u`.
pub fn eig_lowest(stiffness: &SymMatrix, mass: &MassMatrix, k: usize) -> Result<Spectrum> {
    eig_lowest_with(stiffness, mass, k, &EigenOptions::default())
}

pub fn eig_lowest_with(
    stiffness: &SymMatrix,
    mass: &MassMatrix,
    k: usize,
    opts: &EigenOptions,
) -> Result<Spectrum> {
    let pairs = solve(stiffness, mass, k, opts, false)?;
    Ok(Spectrum::new(pairs.values, k))
}

/// Like [`eig_lowest_with`] but also returns eigenvectors.
pub fn eig_lowest_pairs(
    stiffness: &SymMatrix,
    mass: &MassMatrix,
    k: usize,
    opts: &EigenOptions,
) -> Result<EigenPairs> {
    solve(stiffness, mass, k, opts, true)
}

fn solve(
    stiffness: &SymMatrix,
    mass: &MassMatrix,
    k: usize,
    opts: &EigenOptions,
    want_vectors: bool,
) -> Result<EigenPairs> {
    check_dims(stiffness, mass)?;
    if k == 0 {
        return Err(Error::OutOfRange("eigenvalue count must be at least 1".into()));
    }
    let n = stiffness.dim();
    let k = k.min(n);
    let reduced = reduce(stiffness, mass);
    let (values, vectors) = if n <= opts.dense_threshold {
        dense_lowest(&reduced, k, want_vectors)
    } else {
        lanczos::block_lanczos_lowest(&reduced, k, opts)?
    };
    let scale: Vec<f64> = mass.diagonal().iter().map(|m| 1.0 / m.sqrt()).collect();
    let vectors = vectors
        .into_iter()
        .map(|y| y.iter().zip(&scale).map(|(a, s)| a * s).collect())
        .collect();
    Ok(EigenPairs { values, vectors })
}

fn dense_lowest(reduced: &SymMatrix, k: usize, want_vectors: bool) -> (Vec<f64>, Vec<Vec<f64>>) {
    let dense = reduced.to_dense();
    if !want_vectors {
        let mut values: Vec<f64> = dense.symmetric_eigenvalues().iter().copied().collect();
        values.sort_by(f64::total_cmp);
        values.truncate(k);
        return (values, Vec::new());
    }
    let eig = SymmetricEigen::new(dense);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    // stable: equal values keep solver order
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    order.truncate(k);
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = order
        .iter()
        .map(|&i| eig.eigenvectors.column(i).iter().copied().collect())
        .collect();
    (values, vectors)
}

/// Radius `r` such that `[λ - r, λ + r]` contains a generalized eigenvalue.
///
/// For the operator `M^{-1} K`, self-adjoint in the `M` inner product,
/// `dist(λ, spec) <= ‖(K - λM) u‖_{M^{-1}} / ‖u‖_M`.
pub fn residual_enclosure(stiffness: &SymMatrix, mass: &MassMatrix, u: &[f64], lambda: f64) -> Result<f64> {
    check_dims(stiffness, mass)?;
    if u.len() != stiffness.dim() {
        return Err(Error::DimensionMismatch { expected: stiffness.dim(), got: u.len() });
    }
    let m = mass.diagonal();
    let norm_u: f64 = u.iter().zip(m).map(|(x, w)| w * x * x).sum::<f64>().sqrt();
    if norm_u == 0.0 {
        return Err(Error::ZeroVector);
    }
    let ku = stiffness.mul_vec(u);
    let residual: f64 = ku
        .iter()
        .zip(u)
        .zip(m)
        .map(|((kx, x), w)| {
            let r = kx - lambda * w * x;
            r * r / w
        })
        .sum::<f64>()
        .sqrt();
    Ok(residual / norm_u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn path_laplacian(n: usize) -> SymMatrix {
        let mut a = SymMatrix::new(n).unwrap();
        for i in 0..n - 1 {
            a.add(i, i, 1.0);
            a.add(i + 1, i + 1, 1.0);
            a.add(i, i + 1, -1.0);
        }
        a
    }

    fn cycle_laplacian(n: usize) -> SymMatrix {
        let mut a = SymMatrix::new(n).unwrap();
        for i in 0..n {
            let j = (i + 1) % n;
            a.add(i, i, 1.0);
            a.add(j, j, 1.0);
            a.add(i, j, -1.0);
        }
        a
    }

    #[test]
    fn path3_neumann_spectrum() {
        let s = eig_lowest(&path_laplacian(3), &MassMatrix::identity(3).unwrap(), 3).unwrap();
        let closed: Vec<f64> = (0..3).map(|j| 2.0 - 2.0 * (j as f64 * PI / 3.0).cos()).collect();
        for (a, b) in s.values.iter().zip(&closed) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        assert!((s.values[1] - 1.0).abs() < 1e-12 && (s.values[2] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn scalar_case() {
        let mut a = SymMatrix::new(1).unwrap();
        a.add(0, 0, 3.0);
        let s = eig_lowest(&a, &MassMatrix::new(vec![4.0]).unwrap(), 1).unwrap();
        assert_eq!(s.values, vec![0.75]);
    }

    #[test]
    fn cycle4_spectrum_with_multiplicity() {
        let s = eig_lowest(&cycle_laplacian(4), &MassMatrix::identity(4).unwrap(), 4).unwrap();
        for (a, b) in s.values.iter().zip([0.0, 2.0, 2.0, 4.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn length_is_min_of_request_and_dimension() {
        let s = eig_lowest(&path_laplacian(3), &MassMatrix::identity(3).unwrap(), 10).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.count_requested, 10);
    }

    #[test]
    fn errors() {
        let a = path_laplacian(3);
        assert!(matches!(
            eig_lowest(&a, &MassMatrix::identity(4).unwrap(), 1),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(MassMatrix::new(vec![1.0, 0.0]), Err(Error::NonPositiveMass { index: 1, .. })));
        assert!(matches!(MassMatrix::new(vec![1.0, f64::NAN]), Err(Error::NonPositiveMass { .. })));
        assert!(SymMatrix::new(0).is_err());
        let m = MassMatrix::identity(3).unwrap();
        assert!(matches!(residual_enclosure(&a, &m, &[0.0; 3], 1.0), Err(Error::ZeroVector)));
    }

    #[test]
    fn residual_of_eigenpairs_vanishes() {
        let a = path_laplacian(3);
        let m = MassMatrix::new(vec![1.0, 2.0, 0.5]).unwrap();
        let pairs = eig_lowest_pairs(&a, &m, 3, &EigenOptions::default()).unwrap();
        for (lambda, u) in pairs.values.iter().zip(&pairs.vectors) {
            assert!(residual_enclosure(&a, &m, u, *lambda).unwrap() < 1e-9);
        }
        let id = MassMatrix::identity(3).unwrap();
        assert!(residual_enclosure(&a, &id, &[1.0, 1.0, 1.0], 0.0).unwrap() < 1e-15);
    }

    #[test]
    fn residual_of_point_mass_encloses_spectrum() {
        let a = path_laplacian(3);
        let m = MassMatrix::identity(3).unwrap();
        // (A - 1) e_0 = (0, -1, 0), so r = 1 exactly.
        let r = residual_enclosure(&a, &m, &[1.0, 0.0, 0.0], 1.0).unwrap();
        assert!((r - 1.0).abs() < 1e-15);
        let spec = eig_lowest(&a, &m, 3).unwrap();
        assert!(spec.values.iter().any(|&l| (l - 1.0).abs() <= r + TAU_EIG_DENSE));
    }

    #[test]
    fn distinct_merges_within_tolerance() {
        let s = Spectrum::new(vec![0.0, 2.0, 2.0 + 1e-9, 4.0], 4);
        assert_eq!(s.distinct(1e-7), vec![0.0, 2.0, 4.0]);
    }

    #[test]
    fn iterative_path_matches_dense() {
        let n = 120;
        let mut a = cycle_laplacian(n);
        for i in (0..n).step_by(7) {
            a.add(i, (i + 31) % n, -0.5);
            a.add(i, i, 0.5);
            a.add((i + 31) % n, (i + 31) % n, 0.5);
        }
        let m = MassMatrix::new((0..n).map(|i| 1.0 + (i % 5) as f64 * 0.25).collect()).unwrap();
        let dense = eig_lowest(&a, &m, 12).unwrap();
        let opts = EigenOptions { dense_threshold: 10, ..EigenOptions::default() };
        let iter = eig_lowest_with(&a, &m, 12, &opts).unwrap();
        for (x, y) in dense.values.iter().zip(&iter.values) {
            assert!((x - y).abs() <= TAU_EIG_ITERATIVE * dense.values[11].max(1.0), "{x} vs {y}");
        }
    }

    #[test]
    fn iterative_path_resolves_multiplicity() {
        // cycle spectrum is doubly degenerate
        let n = 200;
        let a = cycle_laplacian(n);
        let m = MassMatrix::identity(n).unwrap();
        let opts = EigenOptions { dense_threshold: 10, ..EigenOptions::default() };
        let iter = eig_lowest_with(&a, &m, 9, &opts).unwrap();
        let mut closed: Vec<f64> = (0..n).map(|j| 2.0 - 2.0 * (2.0 * PI * j as f64 / n as f64).cos()).collect();
        closed.sort_by(f64::total_cmp);
        for (x, y) in iter.values.iter().zip(&closed) {
            assert!((x - y).abs() < 1e-8, "{x} vs {y}");
        }
    }

    #[test]
    fn iterative_path_is_deterministic_per_seed() {
        let a = cycle_laplacian(150);
        let m = MassMatrix::identity(150).unwrap();
        let opts = EigenOptions { dense_threshold: 10, ..EigenOptions::default() };
        let x = eig_lowest_with(&a, &m, 5, &opts).unwrap();
        let y = eig_lowest_with(&a, &m, 5, &opts).unwrap();
        assert_eq!(x.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), y.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn iterative_non_convergence_reports_residual() {
        let a = cycle_laplacian(300);
        let m = MassMatrix::identity(300).unwrap();
        let opts = EigenOptions { dense_threshold: 10, max_iterations: 2, block_size: 2, ..EigenOptions::default() };
        match eig_lowest_with(&a, &m, 4, &opts) {
            Err(Error::NoConvergence { iterations, residual }) => {
                assert_eq!(iterations, 2);
                assert!(residual > 0.0);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        fn random_system() -> impl Strategy<Value = (SymMatrix, MassMatrix)> {
            (2usize..12).prop_flat_map(|n| {
                (
                    proptest::collection::vec((0..n, 0..n, 0.1f64..3.0), n..3 * n),
                    proptest::collection::vec(0.2f64..4.0, n),
                )
                    .prop_map(move |(edges, masses)| {
                        let mut a = SymMatrix::new(n).unwrap();
                        for i in 0..n - 1 {
                            a.add(i, i, 1.0);
                            a.add(i + 1, i + 1, 1.0);
                            a.add(i, i + 1, -1.0);
                        }
                        for (i, j, w) in edges {
                            if i != j {
                                a.add(i, i, w);
                                a.add(j, j, w);
                                a.add(i, j, -w);
                            }
                        }
                        (a, MassMatrix::new(masses).unwrap())
                    })
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn ascending_and_permutation_invariant((a, m) in random_system(), shift in 0usize..11) {
                let n = a.dim();
                let s = eig_lowest(&a, &m, n).unwrap();
                prop_assert!(s.values.windows(2).all(|w| w[0] <= w[1]));
                let perm: Vec<usize> = (0..n).map(|i| (i * 7 + shift) % n).collect();
                let mut seen = vec![false; n];
                let perm: Vec<usize> = if perm.iter().all(|&p| !std::mem::replace(&mut seen[p], true)) {
                    perm
                } else {
                    (0..n).rev().collect()
                };
                let t = eig_lowest(&a.permuted(&perm), &m.permuted(&perm), n).unwrap();
                let scale = s.values[n - 1].abs().max(1.0);
                for (x, y) in s.values.iter().zip(&t.values) {
                    prop_assert!((x - y).abs() <= TAU_EIG_DENSE * scale);
                }
            }

            #[test]
            fn enclosure_contains_spectral_point((a, m) in random_system(), lambda in 0.0f64..8.0, seed in 0u64..1000) {
                let n = a.dim();
                let u: Vec<f64> = (0..n).map(|i| (((i as u64 + 1) * (seed + 3)) % 17) as f64 - 8.0).collect();
                prop_assume!(u.iter().any(|x| *x != 0.0));
                let r = residual_enclosure(&a, &m, &u, lambda).unwrap();
                let s = eig_lowest(&a, &m, n).unwrap();
                let scale = s.values[n - 1].abs().max(1.0);
                prop_assert!(s.values.iter().any(|&l| (l - lambda).abs() <= r + TAU_EIG_DENSE * scale));
            }
        }
    }
}
