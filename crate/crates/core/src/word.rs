//! Words in free groups over arbitrary generator types.

use std::fmt;

use serde::{Deserialize, Serialize};

/// `gen^exp` with `exp = ±1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Letter<G> {
    pub gen: G,
    pub exp: i8,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Word<G> {
    pub letters: Vec<Letter<G>>,
}

impl<G: Clone + Eq> Word<G> {
    pub fn identity() -> Self {
        Word { letters: Vec::new() }
    }

    pub fn gen(g: G) -> Self {
        Word { letters: vec![Letter { gen: g, exp: 1 }] }
    }

    pub fn gen_inv(g: G) -> Self {
        Word { letters: vec![Letter { gen: g, exp: -1 }] }
    }

    /// `g^n` for any integer `n`.
    pub fn power(g: G, n: i64) -> Self {
        let exp = if n < 0 { -1 } else { 1 };
        Word { letters: (0..n.unsigned_abs()).map(|_| Letter { gen: g.clone(), exp }).collect() }
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn inverse(&self) -> Self {
        Word {
            letters: self
                .letters
                .iter()
                .rev()
                .map(|l| Letter { gen: l.gen.clone(), exp: -l.exp })
                .collect(),
        }
    }

    /// Concatenation without reduction.
    pub fn concat(&self, o: &Self) -> Self {
        let mut letters = self.letters.clone();
        letters.extend(o.letters.iter().cloned());
        Word { letters }
    }

    /// Concatenation of several words without reduction.
    pub fn product<'a>(parts: impl IntoIterator<Item = &'a Self>) -> Self
    where
        G: 'a,
    {
        let mut letters = Vec::new();
        for p in parts {
            letters.extend(p.letters.iter().cloned());
        }
        Word { letters }
    }

    pub fn reduced(&self) -> Self {
        let mut out: Vec<Letter<G>> = Vec::with_capacity(self.letters.len());
        for l in &self.letters {
            match out.last() {
                Some(top) if top.gen == l.gen && top.exp == -l.exp => {
                    out.pop();
                }
                _ => out.push(l.clone()),
            }
        }
        Word { letters: out }
    }

    pub fn is_reduced(&self) -> bool {
        self.letters.windows(2).all(|w| !(w[0].gen == w[1].gen && w[0].exp == -w[1].exp))
    }

    /// `h⁻¹ self h`, unreduced.
    pub fn conjugate_by(&self, h: &Self) -> Self {
        Word::product([&h.inverse(), self, h])
    }

    /// `[a, b] = a⁻¹ b⁻¹ a b`, unreduced.
    pub fn commutator(a: &Self, b: &Self) -> Self {
        Word::product([&a.inverse(), &b.inverse(), a, b])
    }

    /// Sum of exponents of `g`.
    pub fn exponent_sum(&self, g: &G) -> i64 {
        self.letters.iter().filter(|l| &l.gen == g).map(|l| l.exp as i64).sum()
    }

    pub fn map<H: Clone + Eq>(&self, mut f: impl FnMut(&G) -> H) -> Word<H> {
        Word { letters: self.letters.iter().map(|l| Letter { gen: f(&l.gen), exp: l.exp }).collect() }
    }
}

impl<G: fmt::Display> fmt::Display for Word<G> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.letters.is_empty() {
            return write!(f, "e");
        }
        for (i, l) in self.letters.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            if l.exp == 1 {
                write!(f, "{}", l.gen)?;
            } else {
                write!(f, "{}^-1", l.gen)?;
            }
        }
        Ok(())
    }
}
