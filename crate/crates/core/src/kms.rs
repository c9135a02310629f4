//! Words over the KMS generating set of a Minsky machine: the ⊛ calculus,
//! command relators, configuration words and the cyclic-extension relators.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::minsky::{Command, CommandKind, MinskyMachine};
use crate::presentations::Presentation;
use crate::word::{Letter, Word};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum KmsGenerator {
    /// `x(q_s A_{i₁} ⋯ A_{i_m})` with strictly increasing `i`.
    X { state: usize, glasses: Vec<usize> },
    /// `A_i`, bottom of glass `i` (`0 ≤ i ≤ k`).
    BigA(usize),
    /// `a_i`
    A(usize),
    /// `a_i′`
    APrime(usize),
    /// `ã_i`
    ATilde(usize),
    /// `ã_i′`
    ATildePrime(usize),
    /// The extra generator of the cyclic extension.
    T,
}

impl KmsGenerator {
    /// `x(q_s A_0)`
    pub fn x0(state: usize) -> Self {
        KmsGenerator::X { state, glasses: vec![0] }
    }

    /// `x(q_s A_0 A_1 ⋯ A_k)`
    pub fn x_full(state: usize, k: usize) -> Self {
        KmsGenerator::X { state, glasses: (0..=k).collect() }
    }

    pub fn name(&self) -> String {
        match self {
            KmsGenerator::X { state, glasses } => {
                let mut s = format!("x(q{state}");
                for g in glasses {
                    s.push_str(&format!("A{g}"));
                }
                s.push(')');
                s
            }
            KmsGenerator::BigA(i) => format!("A{i}"),
            KmsGenerator::A(i) => format!("a{i}"),
            KmsGenerator::APrime(i) => format!("a'{i}"),
            KmsGenerator::ATilde(i) => format!("a~{i}"),
            KmsGenerator::ATildePrime(i) => format!("a~'{i}"),
            KmsGenerator::T => "t".into(),
        }
    }

    /// Inverse of [`KmsGenerator::name`].
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("unknown generator name {s:?}"));
        let num = |t: &str| t.parse::<usize>().map_err(|_| bad());
        if s == "t" {
            return Ok(KmsGenerator::T);
        }
        if let Some(body) = s.strip_prefix("x(q").and_then(|b| b.strip_suffix(')')) {
            let mut parts = body.split('A');
            let state = num(parts.next().ok_or_else(bad)?)?;
            let glasses = parts.map(num).collect::<Result<Vec<_>>>()?;
            if glasses.windows(2).any(|w| w[0] >= w[1]) {
                return Err(bad());
            }
            return Ok(KmsGenerator::X { state, glasses });
        }
        if let Some(r) = s.strip_prefix("a~'") {
            return Ok(KmsGenerator::ATildePrime(num(r)?));
        }
        if let Some(r) = s.strip_prefix("a~") {
            return Ok(KmsGenerator::ATilde(num(r)?));
        }
        if let Some(r) = s.strip_prefix("a'") {
            return Ok(KmsGenerator::APrime(num(r)?));
        }
        if let Some(r) = s.strip_prefix('a') {
            return Ok(KmsGenerator::A(num(r)?));
        }
        if let Some(r) = s.strip_prefix('A') {
            return Ok(KmsGenerator::BigA(num(r)?));
        }
        Err(bad())
    }
}

impl fmt::Display for KmsGenerator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

pub type KmsWord = Word<KmsGenerator>;

/// Right operand of ⊛.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Star {
    /// `a_j`
    A(usize),
    /// `A_j`
    BigA(usize),
}

/// The sets `L₀`, `L₁`, `L₂` for `k` glasses and state set `[N+1]`.
pub fn generator_sets(k: usize, n: usize) -> (Vec<KmsGenerator>, Vec<KmsGenerator>, Vec<KmsGenerator>) {
    let mut l0 = Vec::new();
    for state in 0..=n {
        for mask in 0u64..(1 << (k + 1)) {
            let glasses = (0..=k).filter(|&i| mask >> i & 1 == 1).collect();
            l0.push(KmsGenerator::X { state, glasses });
        }
    }
    let l1 = (0..=k).map(KmsGenerator::BigA).collect();
    let mut l2 = Vec::new();
    for i in 1..=k {
        l2.extend([
            KmsGenerator::A(i),
            KmsGenerator::APrime(i),
            KmsGenerator::ATilde(i),
            KmsGenerator::ATildePrime(i),
        ]);
    }
    (l0, l1, l2)
}

/// `f ⊛ g` before free reduction.
pub fn circledast_unreduced(f: &KmsWord, g: Star) -> KmsWord {
    match g {
        Star::BigA(j) => Word::commutator(f, &Word::gen(KmsGenerator::BigA(j))),
        Star::A(j) => {
            let a = Word::gen(KmsGenerator::A(j));
            let a_inv = a.inverse();
            let ap_inv = Word::gen_inv(KmsGenerator::APrime(j));
            let f_inv = f.inverse();
            Word::product([
                &f_inv,
                &f.conjugate_by(&a),
                &f_inv.conjugate_by(&a_inv),
                &f.conjugate_by(&ap_inv),
            ])
        }
    }
}

/// `f ⊛ g`, freely reduced.
pub fn circledast(f: &KmsWord, g: Star) -> KmsWord {
    circledast_unreduced(f, g).reduced()
}

/// Left-nested `f ⊛ g₁ ⊛ ⋯ ⊛ g_m`, reduced after every step.
pub fn iterated_circledast(f: &KmsWord, gens: &[Star]) -> KmsWord {
    gens.iter().fold(f.reduced(), |acc, &g| circledast(&acc, g))
}

/// The same fold without any free reduction.
pub fn iterated_circledast_unreduced(f: &KmsWord, gens: &[Star]) -> KmsWord {
    gens.iter().fold(f.clone(), |acc, &g| circledast_unreduced(&acc, g))
}

fn x0_word(state: usize) -> KmsWord {
    Word::gen(KmsGenerator::x0(state))
}

/// The two sides `(r, s)` of the relation `r = s` attached to a command.
pub fn command_relation(cmd: &Command) -> (KmsWord, KmsWord) {
    let a_stars: Vec<Star> = cmd.glasses.iter().map(|&j| Star::A(j)).collect();
    let big_stars: Vec<Star> = cmd.glasses.iter().map(|&j| Star::BigA(j)).collect();
    let (xi, xj) = (x0_word(cmd.from), x0_word(cmd.to));
    match cmd.kind {
        CommandKind::Add => (xi, iterated_circledast(&xj, &a_stars)),
        CommandKind::Sub => (iterated_circledast(&xi, &a_stars), xj),
        CommandKind::EmptyCheck => {
            (iterated_circledast(&xi, &big_stars), iterated_circledast(&xj, &big_stars))
        }
        CommandKind::Stop => (xi, xj),
    }
}

/// Relator `r s⁻¹` for a command, freely reduced.
pub fn command_relator(cmd: &Command) -> KmsWord {
    let (r, s) = command_relation(cmd);
    r.concat(&s.inverse()).reduced()
}

fn all_big_stars(k: usize) -> Vec<Star> {
    (1..=k).map(Star::BigA).collect()
}

/// `w(n) = x(q₁A₀) ⊛ a₁^{⊛n} ⊛ A₁ ⊛ ⋯ ⊛ A_k`.
pub fn input_word(n: usize, k: usize) -> KmsWord {
    let mut stars = vec![Star::A(1); n];
    stars.extend(all_big_stars(k));
    iterated_circledast(&x0_word(1), &stars)
}

/// `w_accept = x(q₀A₀) ⊛ A₁ ⊛ ⋯ ⊛ A_k`.
pub fn accept_word(k: usize) -> KmsWord {
    iterated_circledast(&x0_word(0), &all_big_stars(k))
}

/// The single-generator form `x(q₁A₀A₁⋯A_k)` of `w(0)`.
pub fn input_word_zero_alias(k: usize) -> KmsWord {
    Word::gen(KmsGenerator::x_full(1, k))
}

/// The single-generator form `x(q₀A₀A₁⋯A_k)` of `w_accept`.
pub fn accept_word_alias(k: usize) -> KmsWord {
    Word::gen(KmsGenerator::x_full(0, k))
}

/// `[t, a₁]`, `[t, a₁′]`, and `t⁻¹ x(q₁A₀) t (x(q₁A₀) ⊛ a₁)⁻¹`.
pub fn extension_relators() -> Vec<KmsWord> {
    let t = Word::gen(KmsGenerator::T);
    let x = x0_word(1);
    vec![
        Word::commutator(&t, &Word::gen(KmsGenerator::A(1))),
        Word::commutator(&t, &Word::gen(KmsGenerator::APrime(1))),
        x.conjugate_by(&t).concat(&circledast(&x, Star::A(1)).inverse()),
    ]
}

/// `(x(q₁A₀) ⊛ a₁^{⊛p}) x(q₁A₀)⁻¹` and `t^p`.
pub fn pn_quotient_relators(p: usize) -> Result<Vec<KmsWord>> {
    if p < 2 {
        return Err(Error::InvalidArgument(format!("p = {p} must be at least 2")));
    }
    let x = x0_word(1);
    let first = iterated_circledast(&x, &vec![Star::A(1); p]).concat(&x.inverse()).reduced();
    Ok(vec![first, Word::power(KmsGenerator::T, p as i64)])
}

/// A supplier of relators for `G(MM)`.
pub trait RelationSource {
    fn relators(&self, machine: &MinskyMachine) -> Vec<KmsWord>;
    /// Whether the source emits the full defining relations.
    fn is_complete(&self) -> bool;
}

/// The relations written out explicitly: `L₀` and `L₁` are involutions,
/// each `Lᵢ` is abelian, and one relator per command. The remaining common
/// relations are not emitted, so the source reports itself incomplete.
#[derive(Clone, Copy, Debug, Default)]
pub struct StatedRelations;

impl RelationSource for StatedRelations {
    fn relators(&self, m: &MinskyMachine) -> Vec<KmsWord> {
        let (l0, l1, l2) = generator_sets(m.glasses, m.states.saturating_sub(1));
        let mut out = Vec::new();
        for g in l0.iter().chain(&l1) {
            out.push(Word::power(g.clone(), 2));
        }
        for set in [&l0, &l1, &l2] {
            for (i, a) in set.iter().enumerate() {
                for b in &set[i + 1..] {
                    out.push(Word::commutator(&Word::gen(a.clone()), &Word::gen(b.clone())));
                }
            }
        }
        out.extend(m.commands.iter().map(command_relator));
        out
    }

    fn is_complete(&self) -> bool {
        false
    }
}

/// Interns generators so presentations built from related machines share
/// indices for shared generators.
#[derive(Clone, Debug, Default)]
pub struct GeneratorTable {
    gens: Vec<KmsGenerator>,
    index: HashMap<KmsGenerator, usize>,
}

impl GeneratorTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, g: &KmsGenerator) -> usize {
        if let Some(&i) = self.index.get(g) {
            return i;
        }
        self.gens.push(g.clone());
        self.index.insert(g.clone(), self.gens.len() - 1);
        self.gens.len() - 1
    }

    pub fn get(&self, g: &KmsGenerator) -> Option<usize> {
        self.index.get(g).copied()
    }

    pub fn generator(&self, i: usize) -> &KmsGenerator {
        &self.gens[i]
    }

    pub fn len(&self) -> usize {
        self.gens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gens.is_empty()
    }

    pub fn intern_word(&mut self, w: &KmsWord) -> Word<usize> {
        w.map(|g| self.intern(g))
    }

    /// Presentation over every interned generator.
    pub fn presentation(&mut self, relators: &[KmsWord]) -> Presentation {
        let rel: Vec<Word<usize>> = relators.iter().map(|w| self.intern_word(w)).collect();
        Presentation {
            generators: self.gens.len(),
            relators: rel,
            names: self.gens.iter().map(KmsGenerator::name).collect(),
        }
    }
}

/// Presentation of `G(MM)` from a relation source. All of `S(MM)` is
/// interned first, in `L₀, L₁, L₂` order.
pub fn machine_presentation(
    m: &MinskyMachine,
    source: &dyn RelationSource,
    table: &mut GeneratorTable,
) -> Result<Presentation> {
    m.validate()?;
    let (l0, l1, l2) = generator_sets(m.glasses, m.states.saturating_sub(1));
    for g in l0.iter().chain(&l1).chain(&l2) {
        table.intern(g);
    }
    Ok(table.presentation(&source.relators(m)))
}

/// `{"gen": name, "exp": ±1}` entries, the exchange form of a word.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NamedLetter {
    pub gen: String,
    pub exp: i8,
}

pub fn to_named(w: &KmsWord) -> Vec<NamedLetter> {
    w.letters.iter().map(|l| NamedLetter { gen: l.gen.name(), exp: l.exp }).collect()
}

pub fn from_named(letters: &[NamedLetter]) -> Result<KmsWord> {
    let letters = letters
        .iter()
        .map(|l| {
            if l.exp != 1 && l.exp != -1 {
                return Err(Error::InvalidArgument(format!("exponent {} is not ±1", l.exp)));
            }
            Ok(Letter { gen: KmsGenerator::parse(&l.gen)?, exp: l.exp })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Word { letters })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minsky::Command;
    use proptest::prelude::*;

    fn x(s: usize) -> KmsWord {
        x0_word(s)
    }

    #[test]
    fn set_sizes() {
        let (l0, l1, l2) = generator_sets(1, 1);
        assert_eq!((l0.len(), l1.len(), l2.len()), (8, 2, 4));
        assert_eq!(generator_sets(4, 2).2.len(), 16);
        assert_eq!(generator_sets(3, 2).1.len(), 4);
        assert_eq!(generator_sets(3, 2).0.len(), 3 * 16);
    }

    #[test]
    fn star_lengths() {
        let c = circledast(&x(1), Star::BigA(1));
        assert_eq!(c.to_string(), "x(q1A0)^-1 A1^-1 x(q1A0) A1");
        assert!(circledast(&Word::identity(), Star::BigA(1)).is_empty());
        let c = circledast(&x(1), Star::A(1));
        assert_eq!(c.len(), 10);
        assert_eq!(c.to_string(), "x(q1A0)^-1 a1^-1 x(q1A0) a1 a1 x(q1A0)^-1 a1^-1 a'1 x(q1A0) a'1^-1");
        assert_eq!(iterated_circledast(&x(1), &[]), x(1));
        for len in 1..4 {
            let f = Word::power(KmsGenerator::A(2), len as i64);
            let two = iterated_circledast_unreduced(&f, &[Star::A(1), Star::A(1)]);
            assert_eq!(two.len(), 4 * (4 * len + 6) + 6);
        }
    }

    #[test]
    fn relator_forms() {
        let stop = command_relator(&Command::stop(3));
        assert_eq!(stop, x(3).concat(&x(0).inverse()));
        let ec = command_relator(&Command::empty_check(1, 2, &[1]));
        let expect = circledast(&x(1), Star::BigA(1))
            .concat(&circledast(&x(2), Star::BigA(1)).inverse())
            .reduced();
        assert_eq!(ec, expect);
        let add = command_relator(&Command::add(1, 2, &[1]));
        assert_eq!(add, x(1).concat(&circledast(&x(2), Star::A(1)).inverse()).reduced());
        assert_eq!(add.len(), 11);
    }

    #[test]
    fn configuration_words() {
        assert_eq!(input_word_zero_alias(2).to_string(), "x(q1A0A1A2)");
        assert_eq!(accept_word_alias(2).to_string(), "x(q0A0A1A2)");
        let w1 = input_word(1, 1);
        let unreduced = iterated_circledast_unreduced(&x(1), &[Star::A(1), Star::BigA(1)]);
        assert_eq!(unreduced.len(), 2 * 10 + 2);
        assert_eq!(w1, unreduced.reduced());
        let sq = input_word_zero_alias(3).concat(&input_word_zero_alias(3));
        assert_eq!(sq.exponent_sum(&KmsGenerator::x_full(1, 3)), 2);
    }

    #[test]
    fn extension_shapes() {
        let e = extension_relators();
        assert_eq!(e.len(), 3);
        assert_eq!(e[0].to_string(), "t^-1 a1^-1 t a1");
        let tail = circledast(&x(1), Star::A(1)).inverse();
        assert!(e[2].letters.ends_with(&tail.letters));
        let q = pn_quotient_relators(2).unwrap();
        assert_eq!(q.len(), 2);
        assert_eq!(q[1], Word::power(KmsGenerator::T, 2));
        let twice = circledast(&circledast(&x(1), Star::A(1)), Star::A(1));
        assert_eq!(q[0], twice.concat(&x(1).inverse()).reduced());
        assert!(pn_quotient_relators(1).is_err());
    }

    #[test]
    fn names_round_trip() {
        let (l0, l1, l2) = generator_sets(2, 2);
        for g in l0.iter().chain(&l1).chain(&l2).chain([&KmsGenerator::T]) {
            assert_eq!(&KmsGenerator::parse(&g.name()).unwrap(), g);
        }
        let w = input_word(2, 2);
        assert_eq!(from_named(&to_named(&w)).unwrap(), w);
    }

    #[test]
    fn shared_generator_indices() {
        let m0 = MinskyMachine::new(
            1,
            3,
            vec![Command::sub(1, 1, &[1]), Command::empty_check(1, 2, &[1]), Command::stop(2)],
        )
        .unwrap();
        let m1 = m0.p_cycle_extension(3).unwrap();
        let mut table = GeneratorTable::new();
        let p0 = machine_presentation(&m0, &StatedRelations, &mut table).unwrap();
        let p1 = machine_presentation(&m1, &StatedRelations, &mut table).unwrap();
        // Every relator of the smaller machine reappears verbatim.
        for r in &p0.relators {
            assert!(p1.relators.contains(r));
        }
        assert!(!StatedRelations.is_complete());
    }

    fn arb_command() -> impl Strategy<Value = Command> {
        (0usize..4, 1usize..5, 0usize..5, prop::collection::btree_set(1usize..4, 1..3)).prop_map(
            |(kind, from, to, g)| {
                let g: Vec<usize> = g.into_iter().collect();
                match kind {
                    0 => Command::add(from, to, &g),
                    1 => Command::sub(from, to, &g),
                    2 => Command::empty_check(from, to, &g),
                    _ => Command::stop(from),
                }
            },
        )
        .prop_filter("self-loop empty checks give the trivial relator", |c| c.from != c.to)
    }

    proptest! {
        #[test]
        fn relators_are_reduced_over_s(cmd in arb_command()) {
            let r = command_relator(&cmd);
            prop_assert!(!r.is_empty());
            prop_assert!(r.is_reduced());
            let (l0, l1, l2) = generator_sets(3, 5);
            prop_assert!(r.letters.iter().all(|l| l0.contains(&l.gen) || l1.contains(&l.gen) || l2.contains(&l.gen)));
        }

        #[test]
        fn star_reduction_idempotent(bits in prop::collection::vec(0u8..4, 0..4), j in 1usize..3) {
            let g = if j == 1 { Star::A(1) } else { Star::BigA(2) };
            let f = Word { letters: bits.iter().map(|&b| Letter { gen: KmsGenerator::x0(b as usize / 2), exp: if b % 2 == 0 { 1 } else { -1 } }).collect() };
            let c = circledast(&f, g);
            prop_assert_eq!(c.reduced(), c);
        }
    }
}
