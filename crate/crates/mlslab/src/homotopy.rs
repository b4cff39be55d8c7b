//! Free-homotopy classes: integer pairs on the torus, canonicalized cyclic
//! words in the genus-2 surface group
//! `< a, b, c, d | [a,b][c,d] >`.
//!
//! Letters are encoded as `u8` in `0..8` with `letter = 2*generator + inv`,
//! so the lexicographic order on encodings is a < a^-1 < b < b^-1 < c < c^-1
//! < d < d^-1. String form uses lowercase for generators and uppercase for
//! inverses ("abA" = a b a^-1).

use crate::error::{Error, Result};
use std::collections::{BTreeSet, HashSet, VecDeque};

pub const ALPHABET: &[u8; 8] = b"aAbBcCdD";

/// The relator [a,b][c,d] = a b a^-1 b^-1 c d c^-1 d^-1.
pub const RELATOR: [u8; 8] = [0, 2, 1, 3, 4, 6, 5, 7];

#[inline]
pub fn letter_inverse(l: u8) -> u8 {
    l ^ 1
}

pub fn word_to_string(w: &[u8]) -> String {
    w.iter().map(|&l| ALPHABET[l as usize] as char).collect()
}

pub fn word_from_str(s: &str) -> Result<Vec<u8>> {
    s.chars()
        .map(|c| {
            ALPHABET
                .iter()
                .position(|&a| a as char == c)
                .map(|i| i as u8)
                .ok_or_else(|| Error::Config(format!("invalid letter '{c}' in word \"{s}\"")))
        })
        .collect()
}

pub fn word_inverse(w: &[u8]) -> Vec<u8> {
    w.iter().rev().map(|&l| letter_inverse(l)).collect()
}

/// Free reduction: cancel adjacent inverse pairs.
pub fn free_reduce(w: &[u8]) -> Vec<u8> {
    let mut out: Vec<u8> = Vec::with_capacity(w.len());
    for &l in w {
        if out.last() == Some(&letter_inverse(l)) {
            out.pop();
        } else {
            out.push(l);
        }
    }
    out
}

/// Free reduction including the cyclic first/last cancellation.
pub fn cyclic_reduce(w: &[u8]) -> Vec<u8> {
    let mut v = free_reduce(w);
    while v.len() >= 2 && v[0] == letter_inverse(*v.last().unwrap()) {
        v.pop();
        v.remove(0);
    }
    v
}

/// The 16 cyclic rotations of the relator and of its inverse.
fn relator_rotations() -> &'static Vec<[u8; 8]> {
    use std::sync::OnceLock;
    static ROTS: OnceLock<Vec<[u8; 8]>> = OnceLock::new();
    ROTS.get_or_init(|| {
        let mut rots = Vec::with_capacity(16);
        let inv: Vec<u8> = word_inverse(&RELATOR);
        for base in [RELATOR.to_vec(), inv] {
            for r in 0..8 {
                let mut rot = [0u8; 8];
                for i in 0..8 {
                    rot[i] = base[(i + r) % 8];
                }
                rots.push(rot);
            }
        }
        rots
    })
}

/// Longest run of `rot` matched cyclically in `w` starting at position `i`.
fn match_len(w: &[u8], i: usize, rot: &[u8; 8]) -> usize {
    let n = w.len();
    let cap = n.min(8);
    let mut m = 0;
    while m < cap && w[(i + m) % n] == rot[m] {
        m += 1;
    }
    m
}

/// Replace the cyclic subword w[i..i+m] (which equals rot[0..m]) by the
/// complementary side inverse(rot[m..8]).
fn replace_subword(w: &[u8], i: usize, m: usize, rot: &[u8; 8]) -> Vec<u8> {
    let n = w.len();
    let mut out = word_inverse(&rot[m..8]);
    for j in m..n {
        out.push(w[(i + j) % n]);
    }
    out
}

/// Dehn reduction of a cyclic word: repeatedly replace any cyclic subword
/// strictly longer than half the relator by the complementary shorter side,
/// interleaved with cyclic free reduction. Returns the (possibly empty)
/// reduced word.
pub fn dehn_reduce(w: &[u8]) -> Vec<u8> {
    let mut v = cyclic_reduce(w);
    'outer: loop {
        if v.is_empty() {
            return v;
        }
        let n = v.len();
        for rot in relator_rotations() {
            for i in 0..n {
                let m = match_len(&v, i, rot);
                if m == 8 && n == 8 {
                    return Vec::new(); // the word is exactly a relator
                }
                if m >= 5 && m <= n {
                    v = cyclic_reduce(&replace_subword(&v, i, m, rot));
                    continue 'outer;
                }
            }
        }
        return v;
    }
}

fn min_rotation(w: &[u8]) -> Vec<u8> {
    let n = w.len();
    let mut best = w.to_vec();
    for r in 1..n {
        let mut cand = Vec::with_capacity(n);
        for i in 0..n {
            cand.push(w[(i + r) % n]);
        }
        if cand < best {
            best = cand;
        }
    }
    best
}

const ORBIT_CAP: usize = 20_000;

/// All cyclically Dehn-reduced forms reachable from `w` by rotations and
/// half-relator swaps, each stored as its lexicographically minimal rotation.
fn conjugacy_orbit(w: &[u8]) -> BTreeSet<Vec<u8>> {
    let mut seen: BTreeSet<Vec<u8>> = BTreeSet::new();
    let mut queue: VecDeque<Vec<u8>> = VecDeque::new();
    let start = min_rotation(w);
    seen.insert(start.clone());
    queue.push_back(start);
    while let Some(v) = queue.pop_front() {
        if seen.len() > ORBIT_CAP {
            break;
        }
        let n = v.len();
        // half-relator swaps: a cyclic subword of length exactly 4 matching
        // half a relator rotation may be replaced by the complementary half
        if n >= 4 {
            for rot in relator_rotations() {
                for i in 0..n {
                    if match_len(&v, i, rot) >= 4 {
                        let swapped = dehn_reduce(&replace_subword(&v, i, 4, rot));
                        if swapped.is_empty() {
                            continue;
                        }
                        let norm = min_rotation(&swapped);
                        if seen.insert(norm.clone()) {
                            queue.push_back(norm);
                        }
                    }
                }
            }
        }
    }
    seen
}

/// A canonical representative of a conjugacy class of the genus-2 surface
/// group: freely and Dehn reduced, lexicographically minimal over all cyclic
/// rotations and half-relator swaps.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CyclicWord {
    letters: Vec<u8>,
}

impl CyclicWord {
    pub fn letters(&self) -> &[u8] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    /// Canonical word of the inverse class.
    pub fn inverse(&self) -> CyclicWord {
        canonicalize(&word_inverse(&self.letters)).expect("inverse of nontrivial is nontrivial")
    }
}

impl std::fmt::Display for CyclicWord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&word_to_string(&self.letters))
    }
}

impl std::str::FromStr for CyclicWord {
    type Err = Error;
    fn from_str(s: &str) -> Result<CyclicWord> {
        canonicalize(&word_from_str(s)?)
    }
}

/// Reduce a raw letter sequence to the canonical representative of its
/// conjugacy class. Errors with `TrivialClass` if the word is trivial in the
/// surface group.
pub fn canonicalize(raw: &[u8]) -> Result<CyclicWord> {
    let reduced = dehn_reduce(raw);
    if reduced.is_empty() {
        return Err(Error::TrivialClass(word_to_string(raw)));
    }
    let orbit = conjugacy_orbit(&reduced);
    let letters = orbit.into_iter().next().expect("orbit is nonempty");
    Ok(CyclicWord { letters })
}

/// A free-homotopy class on the torus, one per +- pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TorusClass {
    pub p: i64,
    pub q: i64,
}

impl TorusClass {
    pub fn new(p: i64, q: i64) -> Self {
        TorusClass { p, q }
    }

    pub fn is_trivial(&self) -> bool {
        self.p == 0 && self.q == 0
    }

    /// Representative of the +- pair with p > 0, or p = 0 and q > 0.
    pub fn canonical(&self) -> TorusClass {
        if self.p > 0 || (self.p == 0 && self.q > 0) {
            *self
        } else {
            TorusClass::new(-self.p, -self.q)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ConjugacyClass {
    Torus(TorusClass),
    Surface(CyclicWord),
}

impl ConjugacyClass {
    /// The `class_id` used verbatim in CSV output.
    pub fn id(&self) -> String {
        match self {
            ConjugacyClass::Torus(t) => format!("{},{}", t.p, t.q),
            ConjugacyClass::Surface(w) => w.to_string(),
        }
    }
}

impl std::fmt::Display for ConjugacyClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.id())
    }
}

/// All nontrivial torus classes with max(|p|, |q|) <= bound, one per +- pair,
/// ordered by (p, q).
pub fn enumerate_torus_classes(bound: i64) -> Vec<TorusClass> {
    let mut out = Vec::new();
    for q in 1..=bound {
        out.push(TorusClass::new(0, q));
    }
    for p in 1..=bound {
        for q in -bound..=bound {
            out.push(TorusClass::new(p, q));
        }
    }
    out.sort();
    out
}

/// All freely reduced cyclic words over the 8-letter alphabet with length in
/// 1..=bound, visited in depth-first order.
pub fn cyclically_reduced_words(bound: usize) -> impl Iterator<Item = Vec<u8>> {
    let mut stack: Vec<Vec<u8>> = (0..8u8).rev().map(|l| vec![l]).collect();
    std::iter::from_fn(move || {
        while let Some(w) = stack.pop() {
            if w.len() < bound {
                for l in (0..8u8).rev() {
                    if letter_inverse(l) != *w.last().unwrap() {
                        let mut w2 = w.clone();
                        w2.push(l);
                        stack.push(w2);
                    }
                }
            }
            // cyclic reducedness: first and last letters are not inverse
            if w.len() == 1 || w[0] != letter_inverse(*w.last().unwrap()) {
                return Some(w);
            }
        }
        None
    })
}

/// All distinct genus-2 conjugacy classes represented by words of length up
/// to `bound`, sorted by (length, canonical word). Both a class and its
/// inverse class appear.
pub fn enumerate_surface_classes(bound: usize) -> Result<Vec<CyclicWord>> {
    if bound > 10 {
        return Err(Error::Config(format!(
            "surface enumeration bound {bound} exceeds the supported maximum of 10"
        )));
    }
    use rayon::prelude::*;
    let prefixes: Vec<u8> = (0..8).collect();
    let sets: Vec<HashSet<CyclicWord>> = prefixes
        .par_iter()
        .map(|&first| {
            let mut set = HashSet::new();
            for w in cyclically_reduced_words(bound) {
                if w[0] != first {
                    continue;
                }
                if let Ok(c) = canonicalize(&w) {
                    set.insert(c);
                }
            }
            set
        })
        .collect();
    let mut all: Vec<CyclicWord> = sets.into_iter().flatten().collect::<HashSet<_>>().into_iter().collect();
    all.sort_by(|a, b| (a.len(), a.letters()).cmp(&(b.len(), b.letters())));
    Ok(all)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn canon(s: &str) -> String {
        canonicalize(&word_from_str(s).unwrap()).unwrap().to_string()
    }

    #[test]
    fn conjugation_strips() {
        assert_eq!(canon("abA"), "b");
    }

    #[test]
    fn rotation_to_lex_min() {
        assert_eq!(canon("ba"), "ab");
    }

    #[test]
    fn relator_is_trivial() {
        let w = word_from_str("abABcdCD").unwrap();
        assert!(matches!(canonicalize(&w), Err(Error::TrivialClass(_))));
    }

    #[test]
    fn half_relator_words_identified() {
        // abAB = (cdCD)^-1 = dcDC in the group
        assert_eq!(canon("abAB"), canon("dcDC"));
    }

    #[test]
    fn idempotence_and_conjugation_invariance() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut tested = 0;
        while tested < 200 {
            let n = rng.gen_range(1..=6);
            let w: Vec<u8> = (0..n).map(|_| rng.gen_range(0..8u8)).collect();
            let Ok(c) = canonicalize(&w) else { continue };
            tested += 1;
            // idempotence
            assert_eq!(canonicalize(c.letters()).unwrap(), c);
            // conjugation invariance
            let m = rng.gen_range(0..=4);
            let u: Vec<u8> = (0..m).map(|_| rng.gen_range(0..8u8)).collect();
            let mut conj = u.clone();
            conj.extend_from_slice(&w);
            conj.extend(word_inverse(&u));
            assert_eq!(canonicalize(&conj).unwrap(), c, "conjugation changed class of {}", c);
        }
    }

    #[test]
    fn inverse_class_is_distinct_for_generators() {
        let a = canonicalize(&word_from_str("a").unwrap()).unwrap();
        assert_eq!(a.inverse().to_string(), "A");
    }

    #[test]
    fn torus_enumeration_counts() {
        let b1 = enumerate_torus_classes(1);
        assert_eq!(
            b1,
            vec![
                TorusClass::new(0, 1),
                TorusClass::new(1, -1),
                TorusClass::new(1, 0),
                TorusClass::new(1, 1)
            ]
        );
        assert_eq!(enumerate_torus_classes(2).len(), 12);
        assert_eq!(enumerate_torus_classes(0).len(), 0);
    }

    #[test]
    fn surface_enumeration_length_one() {
        let classes = enumerate_surface_classes(1).unwrap();
        assert_eq!(classes.len(), 8); // x and x^-1 are distinct classes
        let ids: Vec<String> = classes.iter().map(|c| c.to_string()).collect();
        assert_eq!(ids, vec!["a", "A", "b", "B", "c", "C", "d", "D"]);
    }
}
