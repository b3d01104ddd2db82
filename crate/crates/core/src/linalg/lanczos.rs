use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EigenOptions, SymMatrix};
use crate::error::{Error, Result};

/// Compressed rows of a symmetric matrix, both triangles expanded.
struct Csr {
    offsets: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl Csr {
    fn from_sym(a: &SymMatrix) -> Self {
        let n = a.dim();
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, j, v) in a.iter() {
            rows[i].push((j, v));
            if i != j {
                rows[j].push((i, v));
            }
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        offsets.push(0);
        for row in rows {
            for (j, v) in row {
                cols.push(j);
                vals.push(v);
            }
            offsets.push(cols.len());
        }
        Self { offsets, cols, vals }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.offsets.len() - 1)
            .map(|i| {
                (self.offsets[i]..self.offsets[i + 1])
                    .map(|p| self.vals[p] * x[self.cols[p]])
                    .sum()
            })
            .collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Orthogonalizes `w` against `basis` (two Gram-Schmidt passes) and
/// normalizes it. Returns `None` when `w` is numerically in the span.
fn orthonormalize(basis: &[Vec<f64>], mut w: Vec<f64>) -> Option<Vec<f64>> {
    let start = dot(&w, &w).sqrt();
    if start == 0.0 {
        return None;
    }
    for _ in 0..2 {
        for q in basis {
            let c = dot(q, &w);
            axpy(-c, q, &mut w);
        }
    }
    let norm = dot(&w, &w).sqrt();
    if norm <= 1e-10 * start {
        return None;
    }
    w.iter_mut().for_each(|x| *x /= norm);
    Some(w)
}

/// Lowest `k` eigenpairs of a symmetric matrix by block Krylov iteration
/// with full reorthogonalization and Rayleigh-Ritz extraction. Eigenvalues of
/// multiplicity up to the block size are resolved.
pub(super) fn block_lanczos_lowest(
    a: &SymMatrix,
    k: usize,
    opts: &EigenOptions,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = a.dim();
    let csr = Csr::from_sym(a);
    let block = opts.block_size.clamp(1, n);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let random_vec = |rng: &mut ChaCha8Rng| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();

    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut images: Vec<Vec<f64>> = Vec::new();
    // projected matrix, row-major growable
    let mut projected: Vec<Vec<f64>> = Vec::new();

    let mut pending: Vec<Vec<f64>> = (0..block).map(|_| random_vec(&mut rng)).collect();
    let mut worst = f64::INFINITY;

    for _ in 0..opts.max_iterations {
        let mut added = 0;
        let mut attempts = 0;
        let mut queue = std::mem::take(&mut pending).into_iter();
        while added < block && basis.len() < n {
            let candidate = match queue.next() {
                Some(v) => v,
                None => {
                    attempts += 1;
                    if attempts > 4 * block {
                        break;
                    }
                    random_vec(&mut rng)
                }
            };
            if let Some(q) = orthonormalize(&basis, candidate) {
                let aq = csr.apply(&q);
                let row: Vec<f64> = basis.iter().map(|v| dot(v, &aq)).collect();
                for (r, val) in projected.iter_mut().zip(&row) {
                    r.push(*val);
                }
                let mut new_row = row;
                new_row.push(dot(&q, &aq));
                projected.push(new_row);
                basis.push(q);
                images.push(aq);
                added += 1;
            }
        }

        let m = basis.len();
        let t = DMatrix::from_fn(m, m, |i, j| 0.5 * (projected[i][j] + projected[j][i]));
        let eig = SymmetricEigen::new(t);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
        let scale = eig.eigenvalues.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));

        let take = k.min(m);
        let mut values = Vec::with_capacity(take);
        let mut vectors = Vec::with_capacity(take);
        worst = 0.0;
        for &idx in order.iter().take(take) {
            let theta = eig.eigenvalues[idx];
            let s = eig.eigenvectors.column(idx);
            let mut x = vec![0.0; n];
            let mut ax = vec![0.0; n];
            for (c, coeff) in s.iter().enumerate() {
                axpy(*coeff, &basis[c], &mut x);
                axpy(*coeff, &images[c], &mut ax);
            }
            axpy(-theta, &x, &mut ax);
            worst = worst.max(dot(&ax, &ax).sqrt() / scale);
            values.push(theta);
            vectors.push(x);
        }

        if (take == k && worst <= opts.tolerance) || m == n {
            return Ok((values, vectors));
        }
        if added == 0 {
            break;
        }

        let start = m - added;
        pending = images[start..].to_vec();
    }
    Err(Error::NoConvergence { iterations: opts.max_iterations, residual: worst })
}
