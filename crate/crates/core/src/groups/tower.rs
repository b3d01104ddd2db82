use std::collections::HashSet;
use std::sync::OnceLock;

use super::quotient::{FiniteQuotient, Key, QuotientSpec};
use super::word::{alphabet, Word};
use super::{check_relations, GroupPresentation, NormalForm, RelationTarget};
use crate::error::{Error, Result};

/// Nested finite quotients `G_0 ← G_1 ← …` of one presented group, ordered
/// from coarse to fine. Level `i+1` projects onto level `i` mapping generator
/// images to generator images.
#[derive(Debug)]
pub struct Tower {
    presentation: GroupPresentation,
    levels: Vec<QuotientSpec>,
    enumerated: Vec<OnceLock<FiniteQuotient>>,
}

impl Clone for Tower {
    fn clone(&self) -> Self {
        Self {
            presentation: self.presentation.clone(),
            levels: self.levels.clone(),
            enumerated: self.levels.iter().map(|_| OnceLock::new()).collect(),
        }
    }
}

impl Tower {
    pub fn new(presentation: GroupPresentation, levels: Vec<QuotientSpec>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidGroup("a tower needs at least one level".into()));
        }
        for (i, level) in levels.iter().enumerate() {
            if !check_relations(&presentation, RelationTarget::Quotient(level))? {
                return Err(Error::InvalidGroup(format!("level {i} does not satisfy the relators")));
            }
        }
        for (i, pair) in levels.windows(2).enumerate() {
            let (coarse, fine) = (&pair[0], &pair[1]);
            for (j, (gf, gc)) in fine.gen_images.iter().zip(&coarse.gen_images).enumerate() {
                match fine.project_key(coarse, gf) {
                    Some(img) if &img == gc => {}
                    Some(_) => {
                        return Err(Error::InvalidGroup(format!(
                            "projection from level {} to {i} does not map generator {j} to generator {j}",
                            i + 1
                        )))
                    }
                    None => {
                        return Err(Error::InvalidGroup(format!(
                            "levels {i} and {} have no compatible projection",
                            i + 1
                        )))
                    }
                }
            }
        }
        let enumerated = levels.iter().map(|_| OnceLock::new()).collect();
        Ok(Self { presentation, levels, enumerated })
    }

    pub fn presentation(&self) -> &GroupPresentation {
        &self.presentation
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn spec(&self, i: usize) -> &QuotientSpec {
        &self.levels[i]
    }

    /// Enumerated quotient at level `i` (computed once).
    pub fn level(&self, i: usize) -> Result<&FiniteQuotient> {
        if i >= self.levels.len() {
            return Err(Error::OutOfRange(format!("tower has {} levels, asked for {i}", self.levels.len())));
        }
        if let Some(q) = self.enumerated[i].get() {
            return Ok(q);
        }
        let q = FiniteQuotient::new(self.levels[i].clone())?;
        Ok(self.enumerated[i].get_or_init(|| q))
    }

    /// `π_{i+1 → i}` as an element map, checked exhaustively to be a
    /// homomorphism that is onto.
    pub fn projection(&self, i: usize) -> Result<Vec<usize>> {
        let fine = self.level(i + 1)?;
        let coarse = self.level(i)?;
        let map: Vec<usize> = (0..fine.order())
            .map(|g| {
                let key = self.levels[i + 1]
                    .project_key(&self.levels[i], fine.element(g))
                    .expect("validated on construction");
                coarse.index_of(&key).expect("projection lands in the coarse group")
            })
            .collect();
        for g in 0..fine.order() {
            for j in 0..fine.generator_count() {
                if map[fine.right_gen(g, j)] != coarse.right_gen(map[g], j) {
                    return Err(Error::InvalidGroup(format!("projection {} -> {i} is not a homomorphism", i + 1)));
                }
            }
        }
        let mut hit = vec![false; coarse.order()];
        map.iter().for_each(|&c| hit[c] = true);
        if hit.iter().any(|h| !h) {
            return Err(Error::InvalidGroup(format!("projection {} -> {i} is not onto", i + 1)));
        }
        Ok(map)
    }
}

/// Coset representatives `R_0 ⊆ R_1 ⊆ … ⊆ R_i`: one word per element of
/// `G_i`, each of minimal word length in its coset. Words chosen at a coarser
/// level are kept; new elements get their shortlex-minimal word.
pub fn minimal_representatives(t: &Tower, i: usize) -> Result<Vec<Word>> {
    let mut words: Vec<Word> = Vec::new();
    for level in 0..=i {
        let q = t.level(level)?;
        let mut covered = vec![false; q.order()];
        for w in &words {
            let g = q.eval(w)?;
            if std::mem::replace(&mut covered[g], true) {
                return Err(Error::InvalidGroup(format!("level {level} does not separate coarser representatives")));
            }
        }
        for g in 0..q.order() {
            if !covered[g] {
                words.push(q.shortlex_word(g));
            }
        }
    }
    Ok(words)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InjectivityRadius {
    /// Largest `n` such that the word ball `B_n` maps injectively to `G_i`.
    pub radius: usize,
    /// No collision was found up to `n_max`; the true radius may be larger.
    pub saturated: bool,
    /// Whether ball elements were identified by an exact normal form (as
    /// opposed to their images in the deepest tower level).
    pub exact: bool,
}

#[derive(Clone, PartialEq, Eq, Hash)]
enum BallKey {
    Exact(NormalForm),
    Images(Vec<Key>),
}

/// Largest `n ≤ n_max` for which distinct group elements of word length
/// `≤ n` have distinct images in `G_i`. Elements are identified by the exact
/// normal form when the family provides one, otherwise by their images in
/// every tower level.
pub fn residual_injectivity_radius(t: &Tower, i: usize, n_max: usize) -> Result<InjectivityRadius> {
    if i >= t.depth() {
        return Err(Error::OutOfRange(format!("tower has {} levels, asked for {i}", t.depth())));
    }
    let p = t.presentation();
    let exact = p.normal_form(&Word::empty()).is_some();
    let key_of = |w: &Word| -> Result<BallKey> {
        match p.normal_form(w) {
            Some(nf) => Ok(BallKey::Exact(nf)),
            None => Ok(BallKey::Images(t.levels.iter().map(|l| l.eval(w)).collect::<Result<_>>()?)),
        }
    };
    let target = t.spec(i);
    let letters = alphabet(p.generator_count());

    let identity = Word::empty();
    let mut seen: HashSet<BallKey> = HashSet::from([key_of(&identity)?]);
    let mut images: HashSet<Key> = HashSet::from([target.eval(&identity)?]);
    let mut frontier = vec![identity];
    for n in 1..=n_max {
        let mut next = Vec::new();
        for w in &frontier {
            for &l in &letters {
                if w.letters().last() == Some(&-l) {
                    continue;
                }
                let mut letters = w.letters().to_vec();
                letters.push(l);
                let candidate = Word(letters);
                let key = key_of(&candidate)?;
                if !seen.insert(key) {
                    continue;
                }
                if !images.insert(target.eval(&candidate)?) {
                    return Ok(InjectivityRadius { radius: n - 1, saturated: false, exact });
                }
                next.push(candidate);
            }
        }
        frontier = next;
    }
    Ok(InjectivityRadius { radius: n_max, saturated: true, exact })
}
