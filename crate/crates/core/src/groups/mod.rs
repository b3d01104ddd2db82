//! Finitely generated groups handled through presentations and finite
//! quotients: Cayley graphs, word metric, towers, coset representatives,
//! relation checks and irreducible representations.

mod irreps;
mod quotient;
mod rep;
mod tower;
mod word;

pub use irreps::irreps;
pub use quotient::{
    cayley_graph, parse_cycles, word_metric_ball, CayleyGraph, FiniteQuotient, Key, QuotientSpec, Realization,
    ENUMERATION_CAP,
};
pub use rep::UnitaryRep;
pub use tower::{minimal_representatives, residual_injectivity_radius, InjectivityRadius, Tower};
pub use word::{alphabet, letter_from_index, letter_index, Word};

use crate::error::{Error, Result};

/// Tolerance for relator checks on unitary representations.
pub const REP_RELATION_TOL: f64 = 1e-10;

/// Which built-in family a presentation belongs to. Decides whether the
/// word problem of the infinite group can be solved exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupFamily {
    /// Free group on `r` generators.
    Free,
    /// `ℤ^r`.
    FreeAbelian,
    /// Discrete Heisenberg group `H₃(ℤ)` on generators `x, z`.
    Heisenberg,
    /// Fundamental group of a closed orientable surface.
    Surface,
    /// Anything else; the word problem is approximated through quotients.
    Presented,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupPresentation {
    generator_count: usize,
    relators: Vec<Word>,
    declared_abelian: bool,
    family: GroupFamily,
}

/// Exact normal form of a group element, where available.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum NormalForm {
    Reduced(Word),
    Exponents(Vec<i64>),
    Heisenberg(i64, i64, i64),
}

impl GroupPresentation {
    pub fn new(generator_count: usize, relators: Vec<Word>, declared_abelian: bool) -> Result<Self> {
        Self::with_family(generator_count, relators, declared_abelian, GroupFamily::Presented)
    }

    fn with_family(
        generator_count: usize,
        relators: Vec<Word>,
        declared_abelian: bool,
        family: GroupFamily,
    ) -> Result<Self> {
        if generator_count == 0 {
            return Err(Error::InvalidGroup("at least one generator is required".into()));
        }
        for r in &relators {
            if r.letters().iter().any(|&l| l == 0) || r.max_generator() > generator_count {
                return Err(Error::InvalidGroup(format!("relator {r} uses an unknown generator")));
            }
        }
        let relators = relators.into_iter().map(|r| r.reduced()).filter(|r| !r.is_empty()).collect();
        Ok(Self { generator_count, relators, declared_abelian, family })
    }

    pub fn free(rank: usize) -> Result<Self> {
        Self::with_family(rank, Vec::new(), rank == 1, GroupFamily::Free)
    }

    pub fn free_abelian(rank: usize) -> Result<Self> {
        let mut relators = Vec::new();
        for i in 1..=rank as i32 {
            for j in i + 1..=rank as i32 {
                relators.push(Word::commutator(&Word(vec![i]), &Word(vec![j])));
            }
        }
        Self::with_family(rank, relators, true, GroupFamily::FreeAbelian)
    }

    /// `⟨x, z | [x,[x,z]], [z,[x,z]]⟩`.
    pub fn heisenberg() -> Self {
        let x = Word(vec![1]);
        let z = Word(vec![2]);
        let c = Word::commutator(&x, &z);
        let relators = vec![Word::commutator(&x, &c), Word::commutator(&z, &c)];
        Self::with_family(2, relators, false, GroupFamily::Heisenberg).expect("static presentation")
    }

    /// `⟨a₁, b₁, …, a_g, b_g | [a₁,b₁]⋯[a_g,b_g]⟩` with `a_i = 2i-1`, `b_i = 2i`.
    pub fn surface(genus: usize) -> Result<Self> {
        if genus == 0 {
            return Err(Error::InvalidGroup("surface genus must be at least 1".into()));
        }
        let mut rel = Word::empty();
        for i in 0..genus as i32 {
            rel = rel.concat(&Word::commutator(&Word(vec![2 * i + 1]), &Word(vec![2 * i + 2])));
        }
        Self::with_family(2 * genus, vec![rel], genus == 1, GroupFamily::Surface)
    }

    pub fn generator_count(&self) -> usize {
        self.generator_count
    }

    pub fn relators(&self) -> &[Word] {
        &self.relators
    }

    pub fn declared_abelian(&self) -> bool {
        self.declared_abelian
    }

    pub fn family(&self) -> GroupFamily {
        self.family
    }

    /// Free abelian of rank `r`: required for Bloch (character torus) analysis.
    pub fn is_free_abelian(&self) -> bool {
        matches!(self.family, GroupFamily::FreeAbelian) || (self.family == GroupFamily::Free && self.generator_count == 1)
    }

    /// Exact normal form of `word` in the infinite group, if this family has a
    /// solvable word problem built in.
    pub fn normal_form(&self, word: &Word) -> Option<NormalForm> {
        match self.family {
            GroupFamily::Free => Some(NormalForm::Reduced(word.reduced())),
            GroupFamily::FreeAbelian => {
                let mut e = vec![0i64; self.generator_count];
                for &l in word.letters() {
                    e[l.unsigned_abs() as usize - 1] += i64::from(l.signum());
                }
                Some(NormalForm::Exponents(e))
            }
            GroupFamily::Heisenberg => {
                let (mut x, mut y, mut z) = (0i64, 0i64, 0i64);
                for &l in word.letters() {
                    match l {
                        1 => x += 1,
                        -1 => x -= 1,
                        2 => {
                            y += x;
                            z += 1;
                        }
                        -2 => {
                            y -= x;
                            z -= 1;
                        }
                        _ => unreachable!("validated generator range"),
                    }
                }
                Some(NormalForm::Heisenberg(x, y, z))
            }
            GroupFamily::Surface | GroupFamily::Presented => None,
        }
    }
}

/// Target of a relation check.
pub enum RelationTarget<'a> {
    Quotient(&'a QuotientSpec),
    Rep(&'a UnitaryRep),
}

/// `true` iff every relator evaluates to the identity (exactly for quotients,
/// to [`REP_RELATION_TOL`] for representations).
pub fn check_relations(p: &GroupPresentation, target: RelationTarget<'_>) -> Result<bool> {
    match target {
        RelationTarget::Quotient(q) => {
            if q.generator_count() != p.generator_count() {
                return Err(Error::ArityMismatch { expected: p.generator_count(), got: q.generator_count() });
            }
            let id = q.realization.identity();
            for r in p.relators() {
                if q.eval(r)? != id {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        RelationTarget::Rep(rep) => {
            if rep.generator_count() != p.generator_count() {
                return Err(Error::ArityMismatch { expected: p.generator_count(), got: rep.generator_count() });
            }
            Ok(p.relators().iter().all(|r| rep.relator_defect(r) <= REP_RELATION_TOL))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::rep::UnitaryRep;
    use nalgebra::DMatrix;
    use num_complex::Complex64;

    #[test]
    fn surface_relator_with_commuting_images() {
        let p = GroupPresentation::surface(1).unwrap();
        assert_eq!(p.relators(), &[Word(vec![1, 2, -1, -2])]);
        let q = QuotientSpec::cyclic_power(2, 5).unwrap();
        assert!(check_relations(&p, RelationTarget::Quotient(&q)).unwrap());
        let nonab = QuotientSpec::symmetric(3).unwrap();
        assert!(!check_relations(&p, RelationTarget::Quotient(&nonab)).unwrap());
    }

    #[test]
    fn heisenberg_relators_hold_mod_m() {
        let p = GroupPresentation::heisenberg();
        for m in 2..8 {
            let q = QuotientSpec::heisenberg(m).unwrap();
            assert!(check_relations(&p, RelationTarget::Quotient(&q)).unwrap());
        }
        // but H₃ is not abelian
        let ab = GroupPresentation::free_abelian(2).unwrap();
        assert!(!check_relations(&ab, RelationTarget::Quotient(&QuotientSpec::heisenberg(3).unwrap())).unwrap());
    }

    #[test]
    fn free_group_checks_anything() {
        let p = GroupPresentation::free(2).unwrap();
        assert!(check_relations(&p, RelationTarget::Quotient(&QuotientSpec::symmetric(4).unwrap())).unwrap());
        let rot = |t: f64| DMatrix::from_row_slice(2, 2, &[t.cos(), -t.sin(), t.sin(), t.cos()].map(|v| Complex64::new(v, 0.0)));
        let rep = UnitaryRep::new(vec![rot(0.3), rot(1.1)]).unwrap();
        assert!(check_relations(&p, RelationTarget::Rep(&rep)).unwrap());
    }

    #[test]
    fn arity_mismatch() {
        let p = GroupPresentation::free(3).unwrap();
        let q = QuotientSpec::cyclic_power(2, 3).unwrap();
        assert!(matches!(check_relations(&p, RelationTarget::Quotient(&q)), Err(Error::ArityMismatch { .. })));
    }

    #[test]
    fn heisenberg_normal_form_matches_matrix_product() {
        let p = GroupPresentation::heisenberg();
        assert_eq!(p.normal_form(&Word(vec![1, 2, -1, -2])), Some(NormalForm::Heisenberg(0, 1, 0)));
        for r in p.relators() {
            assert_eq!(p.normal_form(r), Some(NormalForm::Heisenberg(0, 0, 0)));
        }
    }
}
