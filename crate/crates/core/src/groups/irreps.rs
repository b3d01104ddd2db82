//! Irreducible unitary representations of abelian quotients and of the
//! catalogued non-abelian families (`S₃`, `S₄`, dihedral `D_n`, `H₃(ℤ/p)`).

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::quotient::{FiniteQuotient, Key, Realization};
use super::rep::UnitaryRep;
use super::word::alphabet;
use crate::error::{Error, Result};

fn clean(z: Complex64) -> Complex64 {
    let snap = |v: f64| if v.abs() < 1e-14 { 0.0 } else { v };
    Complex64::new(snap(z.re), snap(z.im))
}

fn real(m: DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|v| Complex64::new(v, 0.0))
}

fn root_of_unity(num: i64, den: i64) -> Complex64 {
    clean(Complex64::from_polar(1.0, 2.0 * PI * num.rem_euclid(den) as f64 / den as f64))
}

/// Complete list of pairwise inequivalent irreducible unitary representations.
///
/// Supported: every abelian quotient, and `S₃`, `S₄`, `D_n` (as permutation
/// groups on `3`, `4`, resp. `n` points), `H₃(ℤ/p)` for prime `p`. Other
/// groups yield [`Error::Unsupported`].
pub fn irreps(q: &FiniteQuotient) -> Result<Vec<UnitaryRep>> {
    let reps = if q.is_abelian() {
        abelian_characters(q)?
    } else {
        match &q.spec().realization {
            Realization::Heisenberg { modulus } if is_prime(*modulus) && q.order() == (*modulus as usize).pow(3) => {
                heisenberg_irreps(q, *modulus)
            }
            Realization::Permutation { degrees } if degrees.len() == 1 => {
                let n = degrees[0];
                if (n == 3 && q.order() == 6) || (n == 4 && q.order() == 24) {
                    symmetric_irreps(q, n)
                } else if n >= 3 && q.order() == 2 * n && q.spec().gen_images.iter().all(|g| affine_form(g).is_some()) {
                    dihedral_irreps(q, n)
                } else {
                    return Err(unsupported(q));
                }
            }
            _ => return Err(unsupported(q)),
        }
    };
    let reps = dedupe_by_character(q, reps)?;
    let total: usize = reps.iter().map(|r| r.dim() * r.dim()).sum();
    if total != q.order() {
        return Err(Error::InvalidGroup(format!(
            "irreducible dimensions square-sum to {total}, group order is {}",
            q.order()
        )));
    }
    Ok(reps)
}

fn unsupported(q: &FiniteQuotient) -> Error {
    Error::Unsupported(format!(
        "irreducible representations of this non-abelian group of order {} are not catalogued",
        q.order()
    ))
}

fn is_prime(p: u32) -> bool {
    p >= 2 && (2..p).take_while(|d| d * d <= p).all(|d| p % d != 0)
}

/// Characters of an abelian group: every assignment of roots of unity of the
/// generator orders that extends consistently along the Cayley graph.
fn abelian_characters(q: &FiniteQuotient) -> Result<Vec<UnitaryRep>> {
    let r = q.generator_count();
    let orders: Vec<usize> = (0..r).map(|j| q.element_order(q.gen_element(j))).collect();
    let letters = alphabet(r);
    let mut out = Vec::new();
    let total: usize = orders.iter().product();
    for code in 0..total {
        let mut rem = code;
        let phases: Vec<Complex64> = orders
            .iter()
            .map(|&o| {
                let a = rem % o;
                rem /= o;
                root_of_unity(a as i64, o as i64)
            })
            .collect();
        let mut values: Vec<Option<Complex64>> = vec![None; q.order()];
        values[0] = Some(Complex64::new(1.0, 0.0));
        let mut consistent = true;
        'walk: for g in 0..q.order() {
            let base = values[g].expect("BFS order");
            for &l in &letters {
                let step = if l > 0 { phases[l as usize - 1] } else { phases[(-l) as usize - 1].conj() };
                let v = base * step;
                let h = q.right_letter(g, l);
                match values[h] {
                    Some(existing) if (existing - v).norm() > 1e-9 => {
                        consistent = false;
                        break 'walk;
                    }
                    Some(_) => {}
                    None => values[h] = Some(v),
                }
            }
        }
        if consistent {
            out.push(UnitaryRep::new(phases.into_iter().map(|z| DMatrix::from_element(1, 1, z)).collect())?);
        }
    }
    Ok(out)
}

fn permutation_matrix(p: &[u32]) -> DMatrix<f64> {
    let n = p.len();
    let mut m = DMatrix::zeros(n, n);
    for (i, &v) in p.iter().enumerate() {
        m[(v as usize, i)] = 1.0;
    }
    m
}

/// Orthonormal (Helmert) basis of the sum-zero subspace of `ℝⁿ`, as columns.
fn sum_zero_basis(n: usize) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(n, n - 1);
    for k in 1..n {
        let norm = ((k * (k + 1)) as f64).sqrt();
        for i in 0..k {
            b[(i, k - 1)] = 1.0 / norm;
        }
        b[(k, k - 1)] = -(k as f64) / norm;
    }
    b
}

fn standard(p: &[u32]) -> DMatrix<f64> {
    let b = sum_zero_basis(p.len());
    b.transpose() * permutation_matrix(p) * b
}

fn parity(p: &[u32]) -> f64 {
    let mut seen = vec![false; p.len()];
    let mut transpositions = 0;
    for start in 0..p.len() {
        let mut len = 0;
        let mut cur = start;
        while !seen[cur] {
            seen[cur] = true;
            cur = p[cur] as usize;
            len += 1;
        }
        if len > 0 {
            transpositions += len - 1;
        }
    }
    if transpositions % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Action of `σ ∈ S₄` on the three perfect matchings of `{0,1,2,3}`.
fn matching_action(p: &[u32]) -> Key {
    const MATCHINGS: [[(u32, u32); 2]; 3] = [[(0, 1), (2, 3)], [(0, 2), (1, 3)], [(0, 3), (1, 2)]];
    let find = |a: u32, b: u32| {
        MATCHINGS
            .iter()
            .position(|m| m.iter().any(|&(x, y)| (x, y) == (a.min(b), a.max(b))))
            .expect("every pair lies in one matching") as u32
    };
    MATCHINGS.iter().map(|m| find(p[m[0].0 as usize], p[m[0].1 as usize])).collect()
}

fn symmetric_irreps(q: &FiniteQuotient, n: usize) -> Vec<UnitaryRep> {
    let gens = &q.spec().gen_images;
    let build = |f: &dyn Fn(&[u32]) -> DMatrix<f64>| {
        UnitaryRep::new(gens.iter().map(|g| real(f(g))).collect()).expect("permutation images are orthogonal")
    };
    let mut reps = vec![
        build(&|_| DMatrix::identity(1, 1)),
        build(&|p| DMatrix::from_element(1, 1, parity(p))),
        build(&standard),
    ];
    if n == 4 {
        reps.push(build(&|p| standard(p) * parity(p)));
        reps.push(build(&|p| standard(&matching_action(p))));
    }
    reps
}

/// `(s, c)` with `σ(i) = s·i + c mod n`, `s = ±1`.
fn affine_form(p: &[u32]) -> Option<(i64, i64)> {
    let n = p.len() as i64;
    let c = p[0] as i64;
    let s = (p[1] as i64 - c).rem_euclid(n);
    let s = if s == 1 {
        1
    } else if s == n - 1 {
        -1
    } else {
        return None;
    };
    (0..n).all(|i| p[i as usize] as i64 == (s * i + c).rem_euclid(n)).then_some((s, c))
}

fn dihedral_irreps(q: &FiniteQuotient, n: usize) -> Vec<UnitaryRep> {
    let gens: Vec<(i64, i64)> = q.spec().gen_images.iter().map(|g| affine_form(g).expect("checked")).collect();
    let scalar = |f: &dyn Fn(i64, i64) -> f64| {
        UnitaryRep::new(gens.iter().map(|&(s, c)| DMatrix::from_element(1, 1, Complex64::new(f(s, c), 0.0))).collect())
            .expect("signs are unitary")
    };
    let sign_c = |c: i64| if c.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    let mut reps = vec![scalar(&|_, _| 1.0), scalar(&|s, _| s as f64)];
    if n % 2 == 0 {
        reps.push(scalar(&|_, c| sign_c(c)));
        reps.push(scalar(&|s, c| s as f64 * sign_c(c)));
    }
    for h in 1..n.div_ceil(2) {
        let mats = gens
            .iter()
            .map(|&(s, c)| {
                let t = 2.0 * PI * (h as i64 * c).rem_euclid(n as i64) as f64 / n as f64;
                let rot = DMatrix::from_row_slice(2, 2, &[t.cos(), -t.sin(), t.sin(), t.cos()]);
                let flip = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, s as f64]);
                real((rot * flip).map(|v| if v.abs() < 1e-14 { 0.0 } else { v }))
            })
            .collect();
        reps.push(UnitaryRep::new(mats).expect("rotations are orthogonal"));
    }
    reps
}

/// `p²` characters `ω^{ax+bz}` and `p-1` Schrödinger representations
/// `ρ_c(x,y,z) δ_k = ω^{c(y+xk)} δ_{k+z}` of dimension `p`.
fn heisenberg_irreps(q: &FiniteQuotient, p: u32) -> Vec<UnitaryRep> {
    let p = p as i64;
    let gens = &q.spec().gen_images;
    let mut reps = Vec::new();
    for a in 0..p {
        for b in 0..p {
            let mats = gens
                .iter()
                .map(|g| DMatrix::from_element(1, 1, root_of_unity(a * g[0] as i64 + b * g[2] as i64, p)))
                .collect();
            reps.push(UnitaryRep::new(mats).expect("roots of unity"));
        }
    }
    for c in 1..p {
        let mats = gens
            .iter()
            .map(|g| {
                let (x, y, z) = (g[0] as i64, g[1] as i64, g[2] as i64);
                let mut m = DMatrix::from_element(p as usize, p as usize, Complex64::new(0.0, 0.0));
                for k in 0..p {
                    m[(((k + z) % p) as usize, k as usize)] = root_of_unity(c * (y + x * k), p);
                }
                m
            })
            .collect();
        reps.push(UnitaryRep::new(mats).expect("monomial unitary"));
    }
    reps
}

fn dedupe_by_character(q: &FiniteQuotient, reps: Vec<UnitaryRep>) -> Result<Vec<UnitaryRep>> {
    let mut seen: Vec<Vec<Complex64>> = Vec::new();
    let mut out = Vec::new();
    for rep in reps {
        let chi = rep.character_values(q)?;
        let dup = seen.iter().any(|other| other.iter().zip(&chi).all(|(a, b)| (a - b).norm() < 1e-9));
        if !dup {
            seen.push(chi);
            out.push(rep);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::quotient::QuotientSpec;

    fn inner(q: &FiniteQuotient, a: &[Complex64], b: &[Complex64]) -> Complex64 {
        a.iter().zip(b).map(|(x, y)| x * y.conj()).sum::<Complex64>() / q.order() as f64
    }

    fn assert_orthonormal_characters(q: &FiniteQuotient, reps: &[UnitaryRep]) {
        let chars: Vec<Vec<Complex64>> = reps.iter().map(|r| r.character_values(q).unwrap()).collect();
        for (i, a) in chars.iter().enumerate() {
            for (j, b) in chars.iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                let v = inner(q, a, b);
                assert!((v - Complex64::new(expect, 0.0)).norm() < 1e-10, "<χ{i},χ{j}> = {v}");
            }
        }
        let total: usize = reps.iter().map(|r| r.dim() * r.dim()).sum();
        assert_eq!(total, q.order());
    }

    #[test]
    fn cyclic_characters() {
        let q = FiniteQuotient::new(QuotientSpec::cyclic_power(1, 6).unwrap()).unwrap();
        let reps = irreps(&q).unwrap();
        assert_eq!(reps.len(), 6);
        let mut phases: Vec<f64> = reps.iter().map(|r| r.generator(0)[(0, 0)].arg().rem_euclid(2.0 * PI)).collect();
        phases.sort_by(f64::total_cmp);
        for (j, t) in phases.iter().enumerate() {
            assert!((t - 2.0 * PI * j as f64 / 6.0).abs() < 1e-12);
        }
        assert_orthonormal_characters(&q, &reps);
    }

    #[test]
    fn trivial_group() {
        let q = FiniteQuotient::new(QuotientSpec::cyclic_power(2, 1).unwrap()).unwrap();
        let reps = irreps(&q).unwrap();
        assert_eq!(reps.len(), 1);
        assert_eq!(reps[0].dim(), 1);
    }

    #[test]
    fn s3_dims() {
        let q = FiniteQuotient::new(QuotientSpec::symmetric(3).unwrap()).unwrap();
        let reps = irreps(&q).unwrap();
        let mut dims: Vec<usize> = reps.iter().map(|r| r.dim()).collect();
        dims.sort();
        assert_eq!(dims, vec![1, 1, 2]);
        assert_orthonormal_characters(&q, &reps);
    }

    #[test]
    fn s4_dims() {
        let q = FiniteQuotient::new(QuotientSpec::symmetric(4).unwrap()).unwrap();
        let reps = irreps(&q).unwrap();
        let mut dims: Vec<usize> = reps.iter().map(|r| r.dim()).collect();
        dims.sort();
        assert_eq!(dims, vec![1, 1, 2, 3, 3]);
        assert_orthonormal_characters(&q, &reps);
    }

    #[test]
    fn dihedral_groups() {
        for n in 3..9 {
            let q = FiniteQuotient::new(QuotientSpec::dihedral(n).unwrap()).unwrap();
            let reps = irreps(&q).unwrap();
            assert_orthonormal_characters(&q, &reps);
            assert!(reps.iter().all(|r| r.is_real()));
        }
    }

    #[test]
    fn heisenberg_prime() {
        for p in [2, 3, 5] {
            let q = FiniteQuotient::new(QuotientSpec::heisenberg(p).unwrap()).unwrap();
            let reps = irreps(&q).unwrap();
            assert_eq!(reps.len() as u32, p * p + p - 1);
            assert_orthonormal_characters(&q, &reps);
        }
    }

    #[test]
    fn abelian_products_and_permutation_abelian() {
        let q = FiniteQuotient::new(QuotientSpec::cyclic_power(2, 2).unwrap()).unwrap();
        let reps = irreps(&q).unwrap();
        assert_eq!(reps.len(), 4);
        assert!(reps.iter().all(|r| r.is_real()));
        assert_orthonormal_characters(&q, &reps);
        // abelian group given by permutations: ⟨(0 1 2), (3 4)⟩ ≅ ℤ/6
        let spec = QuotientSpec::permutation_blocks(&[(5, vec!["(0 1 2)".into(), "(3 4)".into()])]).unwrap();
        let q = FiniteQuotient::new(spec).unwrap();
        let reps = irreps(&q).unwrap();
        assert_eq!(reps.len(), 6);
        assert_orthonormal_characters(&q, &reps);
    }

    #[test]
    fn uncatalogued_is_unsupported() {
        let q = FiniteQuotient::new(QuotientSpec::heisenberg(4).unwrap()).unwrap();
        assert!(matches!(irreps(&q), Err(Error::Unsupported(_))));
        let spec = QuotientSpec::permutation_blocks(&[(5, vec!["(0 1 2 3 4)".into(), "(0 1)".into()])]).unwrap();
        assert!(matches!(irreps(&FiniteQuotient::new(spec).unwrap()), Err(Error::Unsupported(_))));
    }
}
