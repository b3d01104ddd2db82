//! Finite quotients `G = Γ/N` realized concretely (residues, Heisenberg
//! triples, permutation tuples) and enumerated by breadth-first closure.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::word::{letter_from_index, letter_index, Word};
use crate::error::{Error, Result};

/// Concrete element encoding; its meaning depends on the [`Realization`].
pub type Key = Vec<u32>;

/// Default cap on enumerated group order.
pub const ENUMERATION_CAP: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Realization {
    /// `∏ ℤ/m_j` with componentwise addition.
    Abelian { moduli: Vec<u32> },
    /// `H₃(ℤ/m)`: triples `(x, y, z)` standing for the unipotent matrix
    /// `[[1, x, y], [0, 1, z], [0, 0, 1]]`.
    Heisenberg { modulus: u32 },
    /// Direct product of symmetric groups `S_{n_1} × ... ` acting blockwise;
    /// a key concatenates the image lists of each block. Products compose as
    /// functions: `(g·h)(i) = g(h(i))`.
    Permutation { degrees: Vec<usize> },
}

impl Realization {
    pub fn key_len(&self) -> usize {
        match self {
            Self::Abelian { moduli } => moduli.len(),
            Self::Heisenberg { .. } => 3,
            Self::Permutation { degrees } => degrees.iter().sum(),
        }
    }

    pub fn identity(&self) -> Key {
        match self {
            Self::Abelian { moduli } => vec![0; moduli.len()],
            Self::Heisenberg { .. } => vec![0; 3],
            Self::Permutation { degrees } => {
                let total: usize = degrees.iter().sum();
                (0..total as u32).collect()
            }
        }
    }

    pub fn mul(&self, a: &[u32], b: &[u32]) -> Key {
        match self {
            Self::Abelian { moduli } => a
                .iter()
                .zip(b)
                .zip(moduli)
                .map(|((x, y), m)| ((*x as u64 + *y as u64) % *m as u64) as u32)
                .collect(),
            Self::Heisenberg { modulus } => {
                let m = *modulus as u64;
                let (x, y, z) = (a[0] as u64, a[1] as u64, a[2] as u64);
                let (x2, y2, z2) = (b[0] as u64, b[1] as u64, b[2] as u64);
                vec![((x + x2) % m) as u32, ((y + y2 + x * z2) % m) as u32, ((z + z2) % m) as u32]
            }
            Self::Permutation { degrees } => {
                let mut out = Vec::with_capacity(a.len());
                let mut offset = 0usize;
                for &n in degrees {
                    for i in 0..n {
                        let hi = b[offset + i] as usize;
                        out.push(a[hi]);
                    }
                    offset += n;
                }
                out
            }
        }
    }

    pub fn inverse(&self, a: &[u32]) -> Key {
        match self {
            Self::Abelian { moduli } => a.iter().zip(moduli).map(|(x, m)| (m - x) % m).collect(),
            Self::Heisenberg { modulus } => {
                let m = *modulus as u64;
                let (x, y, z) = (a[0] as u64, a[1] as u64, a[2] as u64);
                // (x,y,z)^{-1} = (-x, xz - y, -z)
                vec![((m - x) % m) as u32, ((x * z % m + m - y) % m) as u32, ((m - z) % m) as u32]
            }
            Self::Permutation { .. } => {
                let mut out = vec![0u32; a.len()];
                for (i, &v) in a.iter().enumerate() {
                    out[v as usize] = i as u32;
                }
                out
            }
        }
    }

    pub fn validate_key(&self, key: &[u32]) -> Result<()> {
        if key.len() != self.key_len() {
            return Err(Error::InvalidGroup(format!(
                "element has {} components, realization expects {}",
                key.len(),
                self.key_len()
            )));
        }
        match self {
            Self::Abelian { moduli } => {
                if moduli.iter().any(|&m| m == 0) {
                    return Err(Error::InvalidGroup("modulus must be positive".into()));
                }
                if key.iter().zip(moduli).any(|(x, m)| x >= m) {
                    return Err(Error::InvalidGroup("residue out of range".into()));
                }
            }
            Self::Heisenberg { modulus } => {
                if *modulus == 0 || key.iter().any(|x| x >= modulus) {
                    return Err(Error::InvalidGroup("Heisenberg entry out of range".into()));
                }
            }
            Self::Permutation { degrees } => {
                let mut offset = 0usize;
                for &n in degrees {
                    let mut seen = vec![false; n];
                    for &v in &key[offset..offset + n] {
                        let local = (v as usize).checked_sub(offset).filter(|&p| p < n);
                        match local {
                            Some(p) if !seen[p] => seen[p] = true,
                            _ => return Err(Error::InvalidGroup("not a permutation".into())),
                        }
                    }
                    offset += n;
                }
            }
        }
        Ok(())
    }
}

/// Parses one-line cycle notation such as `(0 1 2)(3 4)` on points `0..degree`,
/// returning the image list shifted by `offset` (for product blocks).
pub fn parse_cycles(text: &str, degree: usize, offset: usize) -> Result<Key> {
    let mut image: Vec<u32> = (0..degree as u32).collect();
    let mut seen = vec![false; degree];
    let mut rest = text.trim();
    while !rest.is_empty() {
        let open = rest
            .strip_prefix('(')
            .ok_or_else(|| Error::InvalidGroup(format!("expected '(' in cycle notation {text:?}")))?;
        let close = open
            .find(')')
            .ok_or_else(|| Error::InvalidGroup(format!("unclosed cycle in {text:?}")))?;
        let points: Vec<usize> = open[..close]
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<usize>().map_err(|_| Error::InvalidGroup(format!("bad point {s:?} in {text:?}"))))
            .collect::<Result<_>>()?;
        for &p in &points {
            if p >= degree {
                return Err(Error::InvalidGroup(format!("point {p} exceeds degree {degree}")));
            }
            if std::mem::replace(&mut seen[p], true) {
                return Err(Error::InvalidGroup(format!("point {p} repeated in {text:?}")));
            }
        }
        for (i, &p) in points.iter().enumerate() {
            image[p] = points[(i + 1) % points.len()] as u32;
        }
        rest = open[close + 1..].trim_start();
    }
    Ok(image.into_iter().map(|v| v + offset as u32).collect())
}

/// A finite quotient given by its realization and generator images, without
/// enumeration. Cheap to evaluate words in, even for huge groups.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuotientSpec {
    pub realization: Realization,
    pub gen_images: Vec<Key>,
}

impl QuotientSpec {
    pub fn new(realization: Realization, gen_images: Vec<Key>) -> Result<Self> {
        for key in &gen_images {
            realization.validate_key(key)?;
        }
        Ok(Self { realization, gen_images })
    }

    /// `(ℤ/m)^r` with the standard basis as generator images.
    pub fn cyclic_power(rank: usize, modulus: u32) -> Result<Self> {
        if modulus == 0 {
            return Err(Error::InvalidGroup("modulus must be positive".into()));
        }
        let gens = (0..rank)
            .map(|j| (0..rank).map(|i| u32::from(i == j) % modulus).collect())
            .collect();
        Self::new(Realization::Abelian { moduli: vec![modulus; rank] }, gens)
    }

    /// `H₃(ℤ/m)` generated by `x = A_{1,0,0}` and `z = A_{0,0,1}`.
    pub fn heisenberg(modulus: u32) -> Result<Self> {
        if modulus == 0 {
            return Err(Error::InvalidGroup("modulus must be positive".into()));
        }
        let one = 1 % modulus;
        Self::new(Realization::Heisenberg { modulus }, vec![vec![one, 0, 0], vec![0, 0, one]])
    }

    /// Image of a free group in a product of symmetric groups. `blocks[b][j]`
    /// is the cycle notation of generator `j` in block `b`.
    pub fn permutation_blocks(blocks: &[(usize, Vec<String>)]) -> Result<Self> {
        let rank = blocks.first().map(|b| b.1.len()).unwrap_or(0);
        if blocks.iter().any(|b| b.1.len() != rank) {
            return Err(Error::InvalidGroup("every block must give one image per generator".into()));
        }
        let mut gens: Vec<Key> = vec![Vec::new(); rank];
        let mut offset = 0usize;
        for (degree, images) in blocks {
            for (j, text) in images.iter().enumerate() {
                gens[j].extend(parse_cycles(text, *degree, offset)?);
            }
            offset += degree;
        }
        Self::new(Realization::Permutation { degrees: blocks.iter().map(|b| b.0).collect() }, gens)
    }

    /// Symmetric group `S_n` on `n ∈ {3, 4}` points with generators `(0 1)`
    /// and the `n`-cycle.
    pub fn symmetric(n: usize) -> Result<Self> {
        let cycle = format!("({})", (0..n).map(|i| i.to_string()).collect::<Vec<_>>().join(" "));
        Self::permutation_blocks(&[(n, vec!["(0 1)".into(), cycle])])
    }

    /// Dihedral group `D_n` of order `2n` acting on the vertices of an
    /// `n`-gon, generated by the rotation `i ↦ i+1` and the reflection `i ↦ -i`.
    pub fn dihedral(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidGroup("dihedral group needs n >= 3".into()));
        }
        let rotation: Key = (0..n).map(|i| ((i + 1) % n) as u32).collect();
        let reflection: Key = (0..n).map(|i| ((n - i) % n) as u32).collect();
        Self::new(Realization::Permutation { degrees: vec![n] }, vec![rotation, reflection])
    }

    pub fn generator_count(&self) -> usize {
        self.gen_images.len()
    }

    pub fn letter_image(&self, letter: i32) -> Key {
        let g = &self.gen_images[letter.unsigned_abs() as usize - 1];
        if letter > 0 {
            g.clone()
        } else {
            self.realization.inverse(g)
        }
    }

    /// Evaluates a word left to right.
    pub fn eval(&self, word: &Word) -> Result<Key> {
        if word.max_generator() > self.generator_count() {
            return Err(Error::ArityMismatch { expected: self.generator_count(), got: word.max_generator() });
        }
        let mut acc = self.realization.identity();
        for &l in word.letters() {
            acc = self.realization.mul(&acc, &self.letter_image(l));
        }
        Ok(acc)
    }

    /// Image of `key` under the natural projection onto `coarser`, when the
    /// two realizations are structurally compatible (divisible moduli, or a
    /// prefix of permutation blocks).
    pub fn project_key(&self, coarser: &QuotientSpec, key: &[u32]) -> Option<Key> {
        match (&self.realization, &coarser.realization) {
            (Realization::Abelian { moduli: fine }, Realization::Abelian { moduli: coarse })
                if fine.len() == coarse.len() && fine.iter().zip(coarse).all(|(f, c)| f % c == 0) =>
            {
                Some(key.iter().zip(coarse).map(|(x, c)| x % c).collect())
            }
            (Realization::Heisenberg { modulus: fine }, Realization::Heisenberg { modulus: coarse })
                if fine % coarse == 0 =>
            {
                Some(key.iter().map(|x| x % coarse).collect())
            }
            (Realization::Permutation { degrees: fine }, Realization::Permutation { degrees: coarse })
                if fine.len() >= coarse.len() && fine[..coarse.len()] == coarse[..] =>
            {
                Some(key[..coarse.iter().sum::<usize>()].to_vec())
            }
            _ => None,
        }
    }
}

/// An enumerated finite quotient. Element `0` is the identity and elements are
/// listed in shortlex order of their minimal words (letters ordered
/// `1, -1, 2, -2, ...`).
#[derive(Debug, Clone)]
pub struct FiniteQuotient {
    spec: QuotientSpec,
    elements: Vec<Key>,
    index: HashMap<Key, usize>,
    /// `step[g][letter_index(l)] = g · l`
    step: Vec<Vec<usize>>,
    /// BFS tree: `(parent, letter)` for every non-identity element.
    parent: Vec<Option<(usize, i32)>>,
}

impl FiniteQuotient {
    pub fn new(spec: QuotientSpec) -> Result<Self> {
        Self::with_cap(spec, ENUMERATION_CAP)
    }

    pub fn with_cap(spec: QuotientSpec, cap: usize) -> Result<Self> {
        let r = spec.generator_count();
        let letters: Vec<Key> = (0..2 * r).map(|i| spec.letter_image(letter_from_index(i))).collect();
        let identity = spec.realization.identity();
        let mut elements = vec![identity.clone()];
        let mut index = HashMap::from([(identity, 0usize)]);
        let mut parent = vec![None];
        let mut step: Vec<Vec<usize>> = Vec::new();
        let mut head = 0;
        while head < elements.len() {
            let mut row = Vec::with_capacity(2 * r);
            for (li, img) in letters.iter().enumerate() {
                let next = spec.realization.mul(&elements[head], img);
                let id = match index.get(&next) {
                    Some(&id) => id,
                    None => {
                        if elements.len() >= cap {
                            return Err(Error::InvalidGroup(format!("group order exceeds enumeration cap {cap}")));
                        }
                        let id = elements.len();
                        index.insert(next.clone(), id);
                        elements.push(next);
                        parent.push(Some((head, letter_from_index(li))));
                        id
                    }
                };
                row.push(id);
            }
            step.push(row);
            head += 1;
        }
        Ok(Self { spec, elements, index, step, parent })
    }

    pub fn spec(&self) -> &QuotientSpec {
        &self.spec
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn generator_count(&self) -> usize {
        self.spec.generator_count()
    }

    pub fn identity(&self) -> usize {
        0
    }

    pub fn element(&self, g: usize) -> &Key {
        &self.elements[g]
    }

    pub fn index_of(&self, key: &[u32]) -> Option<usize> {
        self.index.get(key).copied()
    }

    /// `g · γ_j` for generator `j` (0-based).
    pub fn right_gen(&self, g: usize, j: usize) -> usize {
        self.step[g][2 * j]
    }

    pub fn right_letter(&self, g: usize, letter: i32) -> usize {
        self.step[g][letter_index(letter)]
    }

    pub fn gen_element(&self, j: usize) -> usize {
        self.right_gen(0, j)
    }

    pub fn mul(&self, a: usize, b: usize) -> usize {
        self.index[&self.spec.realization.mul(&self.elements[a], &self.elements[b])]
    }

    pub fn inverse(&self, a: usize) -> usize {
        self.index[&self.spec.realization.inverse(&self.elements[a])]
    }

    pub fn eval(&self, word: &Word) -> Result<usize> {
        if word.max_generator() > self.generator_count() {
            return Err(Error::ArityMismatch { expected: self.generator_count(), got: word.max_generator() });
        }
        Ok(word.letters().iter().fold(0, |g, &l| self.right_letter(g, l)))
    }

    /// Shortlex-minimal word for element `g`.
    pub fn shortlex_word(&self, g: usize) -> Word {
        let mut letters = Vec::new();
        let mut cur = g;
        while let Some((p, l)) = self.parent[cur] {
            letters.push(l);
            cur = p;
        }
        letters.reverse();
        Word(letters)
    }

    pub fn is_abelian(&self) -> bool {
        let r = self.generator_count();
        (0..r).all(|i| (0..r).all(|j| self.mul(self.gen_element(i), self.gen_element(j)) == self.mul(self.gen_element(j), self.gen_element(i))))
    }

    /// Order of element `g`.
    pub fn element_order(&self, g: usize) -> usize {
        let mut acc = g;
        let mut n = 1;
        while acc != 0 {
            acc = self.mul(acc, g);
            n += 1;
        }
        n
    }

    /// Group-axiom spot checks: exhaustive associativity for order ≤ 512,
    /// otherwise `10⁴` random triples; identity and inverses for every element.
    pub fn check_axioms(&self, seed: u64) -> Result<()> {
        let n = self.order();
        for a in 0..n {
            if self.mul(a, 0) != a || self.mul(0, a) != a {
                return Err(Error::InvalidGroup(format!("identity law fails at element {a}")));
            }
            let inv = self.inverse(a);
            if self.mul(a, inv) != 0 || self.mul(inv, a) != 0 {
                return Err(Error::InvalidGroup(format!("inverse law fails at element {a}")));
            }
        }
        let table: Option<Vec<usize>> =
            (n <= 512).then(|| (0..n * n).map(|i| self.mul(i / n, i % n)).collect());
        let m = |a: usize, b: usize| match &table {
            Some(t) => t[a * n + b],
            None => self.mul(a, b),
        };
        let check = |a: usize, b: usize, c: usize| {
            if m(m(a, b), c) != m(a, m(b, c)) {
                Err(Error::InvalidGroup(format!("associativity fails at ({a}, {b}, {c})")))
            } else {
                Ok(())
            }
        };
        if table.is_some() {
            for a in 0..n {
                for b in 0..n {
                    for c in 0..n {
                        check(a, b, c)?;
                    }
                }
            }
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..10_000 {
                check(rng.random_range(0..n), rng.random_range(0..n), rng.random_range(0..n))?;
            }
        }
        Ok(())
    }
}

/// Directed Cayley graph: an edge `g → g·γ_j` labeled `j` for every element
/// and generator (0-based labels).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CayleyGraph {
    pub vertex_count: usize,
    pub edges: Vec<(usize, usize, usize)>,
}

pub fn cayley_graph(q: &FiniteQuotient) -> CayleyGraph {
    let edges = (0..q.order())
        .flat_map(|g| (0..q.generator_count()).map(move |j| (g, j)))
        .map(|(g, j)| (g, q.right_gen(g, j), j))
        .collect();
    CayleyGraph { vertex_count: q.order(), edges }
}

/// Word-metric distances from the identity with generators `G ∪ G⁻¹`;
/// `None` for elements beyond `radius`.
pub fn word_metric_ball(q: &FiniteQuotient, radius: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; q.order()];
    dist[0] = Some(0);
    let mut frontier = vec![0usize];
    for d in 1..=radius {
        let mut next = Vec::new();
        for &g in &frontier {
            for li in 0..2 * q.generator_count() {
                let h = q.step[g][li];
                if dist[h].is_none() {
                    dist[h] = Some(d);
                    next.push(h);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    dist
}
