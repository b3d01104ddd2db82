use nalgebra::DMatrix;
use num_complex::Complex64;

use super::quotient::FiniteQuotient;
use super::word::Word;
use crate::error::{Error, Result};

/// Unitarity tolerance for representation matrices.
pub const UNITARY_TOL: f64 = 1e-12;

/// A unitary representation given by the images of the generators.
///
/// Matrices are complex; a representation whose matrices are all real is
/// orthogonal and is assembled without the real/imaginary doubling.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryRep {
    generators: Vec<DMatrix<Complex64>>,
}

fn max_abs(m: &DMatrix<Complex64>) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

impl UnitaryRep {
    pub fn new(generators: Vec<DMatrix<Complex64>>) -> Result<Self> {
        let n = generators.first().map(|m| m.nrows()).unwrap_or(0);
        if n == 0 {
            return Err(Error::RelationCheck("representation needs at least one generator of dimension >= 1".into()));
        }
        for (j, m) in generators.iter().enumerate() {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::RelationCheck(format!("generator {j} is not {n}x{n}")));
            }
            let defect = max_abs(&(m.adjoint() * m - DMatrix::identity(n, n)));
            if defect > UNITARY_TOL {
                return Err(Error::RelationCheck(format!("generator {j} is not unitary (defect {defect:.2e})")));
            }
        }
        Ok(Self { generators })
    }

    /// The one-dimensional trivial representation.
    pub fn trivial(generator_count: usize) -> Self {
        Self { generators: vec![DMatrix::identity(1, 1); generator_count] }
    }

    /// Scalar character `γ_j ↦ e^{iθ_j}`.
    pub fn character(phases: &[f64]) -> Self {
        Self {
            generators: phases.iter().map(|t| DMatrix::from_element(1, 1, Complex64::from_polar(1.0, *t))).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.generators[0].nrows()
    }

    pub fn generator_count(&self) -> usize {
        self.generators.len()
    }

    pub fn generator(&self, j: usize) -> &DMatrix<Complex64> {
        &self.generators[j]
    }

    pub fn is_real(&self) -> bool {
        self.generators.iter().all(|m| m.iter().all(|z| z.im == 0.0))
    }

    pub fn letter(&self, letter: i32) -> DMatrix<Complex64> {
        let m = &self.generators[letter.unsigned_abs() as usize - 1];
        if letter > 0 {
            m.clone()
        } else {
            m.adjoint()
        }
    }

    pub fn eval(&self, word: &Word) -> DMatrix<Complex64> {
        let n = self.dim();
        word.letters().iter().fold(DMatrix::identity(n, n), |acc, &l| acc * self.letter(l))
    }

    /// Max-entry distance of `ρ(word)` from the identity.
    pub fn relator_defect(&self, word: &Word) -> f64 {
        let n = self.dim();
        max_abs(&(self.eval(word) - DMatrix::identity(n, n)))
    }

    /// `ρ(g)` for every element of `q`, built along the BFS tree and checked
    /// for consistency on every Cayley edge, so a representation that is not
    /// well defined on `q` is rejected.
    pub fn element_matrices(&self, q: &FiniteQuotient, tol: f64) -> Result<Vec<DMatrix<Complex64>>> {
        if q.generator_count() != self.generator_count() {
            return Err(Error::ArityMismatch { expected: q.generator_count(), got: self.generator_count() });
        }
        let n = self.dim();
        let mut mats: Vec<Option<DMatrix<Complex64>>> = vec![None; q.order()];
        mats[0] = Some(DMatrix::identity(n, n));
        for g in 0..q.order() {
            let base = mats[g].clone().expect("BFS order visits parents first");
            for l in super::word::alphabet(q.generator_count()) {
                let h = q.right_letter(g, l);
                let prod = &base * self.letter(l);
                match &mats[h] {
                    Some(existing) => {
                        let defect = max_abs(&(existing - &prod));
                        if defect > tol {
                            return Err(Error::RelationCheck(format!(
                                "representation is not well defined on the quotient (defect {defect:.2e})"
                            )));
                        }
                    }
                    None => mats[h] = Some(prod),
                }
            }
        }
        Ok(mats.into_iter().map(|m| m.expect("generators reach every element")).collect())
    }

    /// Characters `tr ρ(g)` for every element of `q`.
    pub fn character_values(&self, q: &FiniteQuotient) -> Result<Vec<Complex64>> {
        Ok(self.element_matrices(q, 1e-9)?.iter().map(|m| m.trace()).collect())
    }
}
