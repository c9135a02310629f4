//! Word rewriting in the Coxeter group
//! `⟨x₀ … x_{ℓ−1} : x_j² = e, [x_j, x_k] = e for row pairs, (t₁t₂)^p = e⟩`.
//!
//! Moves are square deletion, commuting swaps and the single braid move
//! between alternating `(t₁, t₂)` runs of length `p`. None of them increases
//! length, so the rewriting class of a word is finite.

use std::collections::{BTreeSet, HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::presentations::BinaryLinearSystem;

pub const DEFAULT_NODE_CAP: usize = 200_000;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawContext")]
pub struct CoxeterContext {
    generators: usize,
    commuting: BTreeSet<(usize, usize)>,
    t1: usize,
    t2: usize,
    p: usize,
    #[serde(skip_serializing_if = "is_default_cap")]
    cap: usize,
}

fn is_default_cap(c: &usize) -> bool {
    *c == DEFAULT_NODE_CAP
}

#[derive(Deserialize)]
struct RawContext {
    generators: usize,
    commuting: Vec<(usize, usize)>,
    t1: usize,
    t2: usize,
    p: usize,
    #[serde(default)]
    cap: Option<usize>,
}

impl TryFrom<RawContext> for CoxeterContext {
    type Error = Error;
    fn try_from(r: RawContext) -> Result<Self> {
        let ctx = CoxeterContext::new(r.generators, r.commuting, r.t1, r.t2, r.p)?;
        Ok(ctx.with_cap(r.cap.unwrap_or(DEFAULT_NODE_CAP)))
    }
}

/// A word in canonical form: of minimal length in its class and
/// lexicographically least among those.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NormalWord(pub Vec<usize>);

impl NormalWord {
    pub fn identity() -> Self {
        NormalWord(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

impl std::fmt::Display for NormalWord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.0.is_empty() {
            return f.write_str("e");
        }
        let parts: Vec<String> = self.0.iter().map(usize::to_string).collect();
        f.write_str(&parts.join(" "))
    }
}

/// Parses a space-separated list of generator indices.
pub fn parse_word(s: &str) -> Result<Vec<usize>> {
    s.split_whitespace()
        .map(|t| t.parse().map_err(|_| Error::InvalidArgument(format!("bad generator {t:?}"))))
        .collect()
}

impl CoxeterContext {
    pub fn new(
        generators: usize,
        commuting: impl IntoIterator<Item = (usize, usize)>,
        t1: usize,
        t2: usize,
        p: usize,
    ) -> Result<Self> {
        if t1 >= generators || t2 >= generators || t1 == t2 {
            return Err(Error::InvalidContext(format!("braid pair ({t1}, {t2}) must be two distinct generators")));
        }
        if p < 2 {
            return Err(Error::InvalidContext(format!("braid order p = {p} must be at least 2")));
        }
        let mut set = BTreeSet::new();
        for (j, k) in commuting {
            if j >= generators || k >= generators {
                return Err(Error::InvalidContext(format!("commuting pair ({j}, {k}) out of range")));
            }
            if j != k {
                set.insert((j.min(k), j.max(k)));
            }
        }
        if set.contains(&(t1.min(t2), t1.max(t2))) {
            return Err(Error::InvalidContext("the braid pair also carries a commuting relation".into()));
        }
        Ok(CoxeterContext { generators, commuting: set, t1, t2, p, cap: DEFAULT_NODE_CAP })
    }

    /// Commuting pairs from row membership of `a`.
    pub fn from_system(a: &BinaryLinearSystem, t1: usize, t2: usize, p: usize) -> Result<Self> {
        let mut pairs = Vec::new();
        for r in a.rows() {
            for (s, &j) in r.iter().enumerate() {
                pairs.extend(r[s + 1..].iter().map(|&k| (j, k)));
            }
        }
        Self::new(a.n(), pairs, t1, t2, p)
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        self.cap = cap;
        self
    }

    pub fn generators(&self) -> usize {
        self.generators
    }

    pub fn t1(&self) -> usize {
        self.t1
    }

    pub fn t2(&self) -> usize {
        self.t2
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn commuting_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.commuting.iter().copied()
    }

    pub fn commutes(&self, j: usize, k: usize) -> bool {
        self.commuting.contains(&(j.min(k), j.max(k)))
    }

    fn check(&self, w: &[usize]) -> Result<()> {
        match w.iter().find(|&&g| g >= self.generators) {
            Some(g) => Err(Error::IndexError(format!("generator {g} of {}", self.generators))),
            None => Ok(()),
        }
    }

    /// Start of an alternating `(t₁, t₂)` run of length `p` at `i`, if any.
    fn braid_at(&self, w: &[usize], i: usize) -> Option<usize> {
        let run = w.get(i..i + self.p)?;
        let first = run[0];
        if first != self.t1 && first != self.t2 {
            return None;
        }
        let other = if first == self.t1 { self.t2 } else { self.t1 };
        let ok = run.iter().enumerate().all(|(s, &g)| g == if s % 2 == 0 { first } else { other });
        ok.then_some(other)
    }

    /// Length-preserving moves: commuting swaps and braid replacements.
    fn same_length_neighbors(&self, w: &[usize], out: &mut Vec<Vec<usize>>) {
        for i in 0..w.len().saturating_sub(1) {
            if w[i] != w[i + 1] && self.commutes(w[i], w[i + 1]) {
                let mut v = w.to_vec();
                v.swap(i, i + 1);
                out.push(v);
            }
        }
        for i in 0..(w.len() + 1).saturating_sub(self.p) {
            if let Some(other) = self.braid_at(w, i) {
                let first = w[i];
                let mut v = w.to_vec();
                for s in 0..self.p {
                    v[i + s] = if s % 2 == 0 { other } else { first };
                }
                out.push(v);
            }
        }
    }

    fn square_at(w: &[usize]) -> Option<usize> {
        (0..w.len().saturating_sub(1)).find(|&i| w[i] == w[i + 1])
    }

    /// All words one move away from `w`.
    pub fn neighbors(&self, w: &[usize]) -> Result<BTreeSet<Vec<usize>>> {
        self.check(w)?;
        let mut out = Vec::new();
        for i in 0..w.len().saturating_sub(1) {
            if w[i] == w[i + 1] {
                let mut v = w[..i].to_vec();
                v.extend_from_slice(&w[i + 2..]);
                out.push(v);
            }
        }
        self.same_length_neighbors(w, &mut out);
        Ok(out.into_iter().collect())
    }

    /// Canonical form of a word with no square anywhere in its
    /// length-preserving class, or a strictly shorter word of the same class.
    fn settle(&self, w: Vec<usize>, budget: &mut usize) -> Result<std::result::Result<Vec<usize>, Vec<usize>>> {
        let mut seen: HashSet<Vec<usize>> = HashSet::new();
        let mut queue = VecDeque::new();
        let mut best = w.clone();
        seen.insert(w.clone());
        queue.push_back(w);
        let mut buf = Vec::new();
        while let Some(v) = queue.pop_front() {
            if let Some(i) = Self::square_at(&v) {
                let mut s = v[..i].to_vec();
                s.extend_from_slice(&v[i + 2..]);
                return Ok(Err(s));
            }
            if v < best {
                best = v.clone();
            }
            buf.clear();
            self.same_length_neighbors(&v, &mut buf);
            for u in buf.drain(..) {
                if seen.insert(u.clone()) {
                    *budget += 1;
                    if *budget > self.cap {
                        return Err(Error::CoxeterCapExceeded { cap: self.cap });
                    }
                    queue.push_back(u);
                }
            }
        }
        Ok(Ok(best))
    }

    fn reduce(&self, mut w: Vec<usize>, budget: &mut usize) -> Result<Vec<usize>> {
        loop {
            match self.settle(w, budget)? {
                Ok(best) => return Ok(best),
                Err(shorter) => w = shorter,
            }
        }
    }

    /// Normal form, built letter by letter: each prefix is kept canonical,
    /// so every intermediate class consists of reduced expressions only.
    pub fn normal_form(&self, w: &[usize]) -> Result<NormalWord> {
        self.check(w)?;
        let mut budget = 0;
        let mut cur: Vec<usize> = Vec::new();
        for &g in w {
            cur.push(g);
            cur = self.reduce(cur, &mut budget)?;
        }
        Ok(NormalWord(cur))
    }

    /// Normal form of the concatenation of two normal forms.
    pub fn multiply(&self, a: &NormalWord, b: &NormalWord) -> Result<NormalWord> {
        let mut budget = 0;
        let mut cur = a.0.clone();
        for &g in &b.0 {
            cur.push(g);
            cur = self.reduce(cur, &mut budget)?;
        }
        Ok(NormalWord(cur))
    }

    /// Inverse of a group element: the reversed word, renormalized.
    pub fn inverse(&self, a: &NormalWord) -> Result<NormalWord> {
        let rev: Vec<usize> = a.0.iter().rev().copied().collect();
        self.normal_form(&rev)
    }

    /// Normal form from the complete closure of `w` under every move, with
    /// no shortcuts. Exponential; meant as a cross-check.
    pub fn normal_form_full_closure(&self, w: &[usize]) -> Result<NormalWord> {
        self.check(w)?;
        let mut seen: HashSet<Vec<usize>> = HashSet::new();
        let mut queue = VecDeque::new();
        seen.insert(w.to_vec());
        queue.push_back(w.to_vec());
        let mut best = w.to_vec();
        while let Some(v) = queue.pop_front() {
            if (v.len(), &v) < (best.len(), &best) {
                best = v.clone();
            }
            for u in self.neighbors(&v)? {
                if seen.insert(u.clone()) {
                    if seen.len() > self.cap {
                        return Err(Error::CoxeterCapExceeded { cap: self.cap });
                    }
                    queue.push_back(u);
                }
            }
        }
        Ok(NormalWord(best))
    }

    pub fn equal(&self, w1: &[usize], w2: &[usize]) -> Result<bool> {
        Ok(self.normal_form(w1)? == self.normal_form(w2)?)
    }

    /// Whether `w` lies in `⟨t₁, t₂⟩`, judged on its normal form.
    pub fn in_braid_subgroup(&self, w: &NormalWord) -> bool {
        w.0.iter().all(|&g| g == self.t1 || g == self.t2)
    }

    /// Every relator as a word: squares, commutators of commuting pairs, and
    /// `(t₁t₂)^p`.
    pub fn relators(&self) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = (0..self.generators).map(|j| vec![j, j]).collect();
        out.extend(self.commuting.iter().map(|&(j, k)| vec![j, k, j, k]));
        out.push((0..2 * self.p).map(|s| if s % 2 == 0 { self.t1 } else { self.t2 }).collect());
        out
    }
}

/// A permutation of `{0, …, n−1}`, stored as images.
pub type Perm = Vec<usize>;

/// `(a ∘ b)(i) = a(b(i))`; words act with their first letter outermost.
fn compose(a: &Perm, b: &Perm) -> Perm {
    b.iter().map(|&i| a[i]).collect()
}

/// Equality tester through a homomorphism onto a permutation group.
#[derive(Clone, Debug)]
pub struct QuotientOracle {
    images: Vec<Perm>,
    degree: usize,
}

impl QuotientOracle {
    /// Checks every relator of `ctx` against the images.
    pub fn new(ctx: &CoxeterContext, images: Vec<Perm>) -> Result<Self> {
        if images.len() != ctx.generators() {
            return Err(Error::InvalidArgument(format!(
                "{} images for {} generators",
                images.len(),
                ctx.generators()
            )));
        }
        let degree = images.first().map_or(0, Vec::len);
        for (g, im) in images.iter().enumerate() {
            let mut sorted = im.clone();
            sorted.sort_unstable();
            if im.len() != degree || sorted != (0..degree).collect::<Vec<_>>() {
                return Err(Error::InvalidArgument(format!("image of generator {g} is not a permutation")));
            }
        }
        let oracle = QuotientOracle { images, degree };
        let id: Perm = (0..degree).collect();
        for r in ctx.relators() {
            if oracle.image(&r) != id {
                return Err(Error::RelatorViolation(format!("relator {r:?} maps to a non-identity element")));
            }
        }
        Ok(oracle)
    }

    pub fn image(&self, w: &[usize]) -> Perm {
        w.iter().fold((0..self.degree).collect(), |acc, &g| compose(&acc, &self.images[g]))
    }

    pub fn equal(&self, w1: &[usize], w2: &[usize]) -> bool {
        self.image(w1) == self.image(w2)
    }
}

/// The dihedral quotient: `t₁, t₂` act as reflections of a `p`-gon whose
/// product is a rotation by one step; every other generator maps to `e`.
pub fn dihedral_quotient(ctx: &CoxeterContext) -> Result<QuotientOracle> {
    let p = ctx.p();
    let id: Perm = (0..p).collect();
    let mut images = vec![id; ctx.generators()];
    images[ctx.t1()] = (0..p).map(|i| (p - i) % p).collect();
    images[ctx.t2()] = (0..p).map(|i| (p + 1 - i) % p).collect();
    QuotientOracle::new(ctx, images)
}

/// The sign quotient: every generator maps to the transposition of two points.
pub fn sign_quotient(ctx: &CoxeterContext) -> Result<QuotientOracle> {
    QuotientOracle::new(ctx, vec![vec![1, 0]; ctx.generators()])
}

/// The trivial quotient.
pub fn trivial_quotient(ctx: &CoxeterContext) -> Result<QuotientOracle> {
    QuotientOracle::new(ctx, vec![vec![0]; ctx.generators()])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ctx(p: usize) -> CoxeterContext {
        // Rows {0,1,2} and {1,2,3}, with t1 = x0 and t2 = x3.
        let a = BinaryLinearSystem::new(4, vec![vec![0, 1, 2], vec![1, 2, 3]]).unwrap();
        CoxeterContext::from_system(&a, 0, 3, p).unwrap()
    }

    #[test]
    fn neighbor_moves() {
        let c = ctx(3);
        assert!(c.neighbors(&[1, 1]).unwrap().contains(&vec![]));
        assert!(c.neighbors(&[0, 3, 0]).unwrap().contains(&vec![3, 0, 3]));
        assert!(c.neighbors(&[0, 3]).unwrap().is_empty());
        assert!(c.neighbors(&[2, 1]).unwrap().contains(&vec![1, 2]));
    }

    #[test]
    fn normal_forms() {
        let c = ctx(3);
        assert!(c.normal_form(&[2, 2]).unwrap().is_empty());
        assert_eq!(c.normal_form(&[2, 1]).unwrap().0, vec![1, 2]);
        assert_eq!(c.normal_form(&[0, 3, 0, 3]).unwrap().len(), 2);
        assert_eq!(c.normal_form(&[0, 3, 0, 3]).unwrap().0, vec![3, 0]);
        assert!(c.equal(&[0, 3, 0], &[3, 0, 3]).unwrap());
        let c5 = ctx(5);
        assert!(!c5.equal(&[0, 3], &[3, 0]).unwrap());
        assert!(c5.equal(&[0, 1], &[1, 0]).unwrap());
    }

    #[test]
    fn context_validation() {
        assert!(CoxeterContext::new(3, [(0, 1)], 0, 1, 3).is_err());
        assert!(CoxeterContext::new(3, [], 0, 0, 3).is_err());
        let a = BinaryLinearSystem::new(3, vec![vec![0, 1, 2]]).unwrap();
        assert!(CoxeterContext::from_system(&a, 0, 1, 3).is_err());
        let c: CoxeterContext =
            serde_json::from_str(r#"{"generators":3,"commuting":[[1,2]],"t1":0,"t2":1,"p":5}"#).unwrap();
        assert!(c.commutes(2, 1));
    }

    #[test]
    fn cap_is_enforced() {
        let c = ctx(3).with_cap(3);
        let long: Vec<usize> = (0..30).map(|i| [0, 3, 1, 2][i % 4]).collect();
        assert_eq!(c.normal_form(&long), Err(Error::CoxeterCapExceeded { cap: 3 }));
    }

    #[test]
    fn quotients() {
        let c = ctx(5);
        let triv = trivial_quotient(&c).unwrap();
        assert!(triv.equal(&[0, 1, 2], &[3]));
        let d = dihedral_quotient(&c).unwrap();
        assert!(!d.equal(&[0, 3], &[3, 0]));
        let s = sign_quotient(&c).unwrap();
        assert!(!s.equal(&[0], &[]));
        let bad = vec![vec![1, 0], vec![0, 1], vec![0, 1], vec![0, 1]];
        // t1 ↦ swap, t2 ↦ e gives (t1 t2)^5 ↦ swap.
        assert!(matches!(QuotientOracle::new(&c, bad), Err(Error::RelatorViolation(_))));
    }

    fn arb_word() -> impl Strategy<Value = Vec<usize>> {
        prop::collection::vec(0usize..4, 0..9)
    }

    proptest! {
        #[test]
        fn incremental_matches_full_closure(w in arb_word(), odd in prop::bool::ANY) {
            let c = ctx(if odd { 3 } else { 5 });
            let nf = c.normal_form(&w).unwrap();
            prop_assert_eq!(&nf, &c.normal_form_full_closure(&w).unwrap());
            prop_assert_eq!(&c.normal_form(&nf.0).unwrap(), &nf);
            prop_assert!(nf.len() <= w.len());
        }

        #[test]
        fn sound_against_quotients(w1 in arb_word(), w2 in arb_word()) {
            let c = ctx(5);
            if c.equal(&w1, &w2).unwrap() {
                for q in [dihedral_quotient(&c).unwrap(), sign_quotient(&c).unwrap()] {
                    prop_assert!(q.equal(&w1, &w2));
                }
            }
        }

        #[test]
        fn products_and_inverses(w1 in arb_word(), w2 in arb_word()) {
            let c = ctx(3);
            let (a, b) = (c.normal_form(&w1).unwrap(), c.normal_form(&w2).unwrap());
            let mut cat = w1.clone();
            cat.extend(&w2);
            prop_assert_eq!(c.multiply(&a, &b).unwrap(), c.normal_form(&cat).unwrap());
            let inv = c.inverse(&a).unwrap();
            prop_assert!(c.multiply(&a, &inv).unwrap().is_empty());
        }
    }
}
