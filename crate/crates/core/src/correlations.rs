//! Correlations, strategies and their checkers.

use std::collections::HashMap;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{inner, vec_norm, vec_sub, Mat, Scalar};
use crate::presentations::BinaryLinearSystem;

/// Default tolerance for float strategy invariants.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Question or answer label.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Label {
    Int(i64),
    Sym(String),
    /// A variable question `x_i`.
    Var { var: usize },
    Tuple(Vec<Label>),
}

impl Label {
    pub fn var(i: usize) -> Self {
        Label::Var { var: i }
    }

    pub fn sym(s: &str) -> Self {
        Label::Sym(s.to_string())
    }

    pub fn bits(bits: &[u8]) -> Self {
        Label::Tuple(bits.iter().map(|&b| Label::Int(b as i64)).collect())
    }

    pub fn pair(a: Label, b: Label) -> Self {
        Label::Tuple(vec![a, b])
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Int(i) => write!(f, "{i}"),
            Label::Sym(s) => write!(f, "{s}"),
            Label::Var { var } => write!(f, "x{var}"),
            Label::Tuple(v) => {
                write!(f, "(")?;
                for (i, l) in v.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{l}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// `ℤ₂^κ` in index order: `a_0` is the most significant bit.
pub fn binary_answers(kappa: usize) -> Vec<Label> {
    (0..1usize << kappa)
        .map(|v| Label::bits(&(0..kappa).map(|i| (v >> (kappa - 1 - i) & 1) as u8).collect::<Vec<_>>()))
        .collect()
}

/// Bit `i` of answer index `v` in `ℤ₂^κ`.
pub fn answer_bit(v: usize, i: usize, kappa: usize) -> usize {
    v >> (kappa - 1 - i) & 1
}

/// Nonlocal scenario `(X, Y, A, B)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub questions_a: Vec<Label>,
    pub questions_b: Vec<Label>,
    pub answers_a: Vec<Label>,
    pub answers_b: Vec<Label>,
}

impl Scenario {
    pub fn new(
        questions_a: Vec<Label>,
        questions_b: Vec<Label>,
        answers_a: Vec<Label>,
        answers_b: Vec<Label>,
    ) -> Result<Self> {
        let s = Scenario { questions_a, questions_b, answers_a, answers_b };
        for (name, set) in
            [("X", &s.questions_a), ("Y", &s.questions_b), ("A", &s.answers_a), ("B", &s.answers_b)]
        {
            if set.is_empty() {
                return Err(Error::InvalidArgument(format!("label set {name} is empty")));
            }
            let mut sorted = set.clone();
            sorted.sort();
            sorted.dedup();
            if sorted.len() != set.len() {
                return Err(Error::InvalidArgument(format!("label set {name} has duplicates")));
            }
        }
        Ok(s)
    }

    /// Same questions and answers for both parties.
    pub fn symmetric(questions: Vec<Label>, answers: Vec<Label>) -> Result<Self> {
        Self::new(questions.clone(), questions, answers.clone(), answers)
    }

    pub fn is_symmetric(&self) -> bool {
        self.questions_a == self.questions_b && self.answers_a == self.answers_b
    }

    pub fn dims(&self) -> (usize, usize, usize, usize) {
        (self.questions_a.len(), self.questions_b.len(), self.answers_a.len(), self.answers_b.len())
    }

    pub fn qa(&self, l: &Label) -> Option<usize> {
        self.questions_a.iter().position(|q| q == l)
    }

    pub fn qb(&self, l: &Label) -> Option<usize> {
        self.questions_b.iter().position(|q| q == l)
    }

    pub fn aa(&self, l: &Label) -> Option<usize> {
        self.answers_a.iter().position(|q| q == l)
    }

    pub fn ab(&self, l: &Label) -> Option<usize> {
        self.answers_b.iter().position(|q| q == l)
    }
}

/// Dense table `P(a, b | x, y)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Correlation<T> {
    pub scenario: Scenario,
    table: Vec<T>,
}

impl<T: Scalar> Correlation<T> {
    pub fn from_fn(scenario: Scenario, mut f: impl FnMut(usize, usize, usize, usize) -> T) -> Self {
        let (nx, ny, na, nb) = scenario.dims();
        let mut table = Vec::with_capacity(nx * ny * na * nb);
        for x in 0..nx {
            for y in 0..ny {
                for a in 0..na {
                    for b in 0..nb {
                        table.push(f(x, y, a, b));
                    }
                }
            }
        }
        Correlation { scenario, table }
    }

    pub fn from_table(scenario: Scenario, table: Vec<T>) -> Result<Self> {
        let (nx, ny, na, nb) = scenario.dims();
        if table.len() != nx * ny * na * nb {
            return Err(Error::ScenarioMismatch(format!(
                "table has {} entries, scenario needs {}",
                table.len(),
                nx * ny * na * nb
            )));
        }
        Ok(Correlation { scenario, table })
    }

    fn idx(&self, x: usize, y: usize, a: usize, b: usize) -> usize {
        let (_, ny, na, nb) = self.scenario.dims();
        ((x * ny + y) * na + a) * nb + b
    }

    pub fn get(&self, x: usize, y: usize, a: usize, b: usize) -> &T {
        &self.table[self.idx(x, y, a, b)]
    }

    /// Entry by labels, in the order `(a, b | x, y)`.
    pub fn entry(&self, a: &Label, b: &Label, x: &Label, y: &Label) -> Result<&T> {
        let s = &self.scenario;
        let miss = |l: &Label| Error::ScenarioMismatch(format!("label {l} not in scenario"));
        let (xi, yi) = (s.qa(x).ok_or_else(|| miss(x))?, s.qb(y).ok_or_else(|| miss(y))?);
        let (ai, bi) = (s.aa(a).ok_or_else(|| miss(a))?, s.ab(b).ok_or_else(|| miss(b))?);
        Ok(self.get(xi, yi, ai, bi))
    }

    pub fn table(&self) -> &[T] {
        &self.table
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(&T) -> U) -> Correlation<U> {
        Correlation { scenario: self.scenario.clone(), table: self.table.iter().map(f).collect() }
    }

    pub fn to_complex(&self) -> Correlation<Complex64> {
        self.map(Scalar::to_complex)
    }

    /// Largest entrywise modulus of the difference.
    pub fn max_abs_diff<U: Scalar>(&self, o: &Correlation<U>) -> Result<f64> {
        if self.scenario != o.scenario {
            return Err(Error::ScenarioMismatch("correlations over different scenarios".into()));
        }
        Ok(self
            .table
            .iter()
            .zip(&o.table)
            .map(|(a, b)| (a.to_complex() - b.to_complex()).norm())
            .fold(0.0, f64::max))
    }
}

/// Whether an entry is a nonnegative real: exact zero first, then the sign
/// of the numeric value; the imaginary part must vanish.
fn is_nonnegative<T: Scalar>(v: &T, tol: f64) -> bool {
    if v.is_negligible(tol) {
        return true;
    }
    let imag_ok = if T::is_exact() { v.sub(&v.conj()).is_zero() } else { v.to_complex().im.abs() <= tol };
    imag_ok && v.to_complex().re > 0.0
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidityReport {
    /// `(x, y, a, b, value)` for entries that are negative or non-real.
    pub negative: Vec<(usize, usize, usize, usize, f64)>,
    /// `|Σ_{a,b} P(a,b|x,y) − 1|` per `(x, y)`, row-major.
    pub normalization_defects: Vec<f64>,
    pub max_normalization_defect: f64,
    pub ok: bool,
}

/// Nonnegativity and normalization.
pub fn validate<T: Scalar>(c: &Correlation<T>, tol: f64) -> ValidityReport {
    let (nx, ny, na, nb) = c.scenario.dims();
    let mut negative = Vec::new();
    let mut defects = Vec::with_capacity(nx * ny);
    let mut ok = true;
    for x in 0..nx {
        for y in 0..ny {
            let mut sum = T::zero();
            for a in 0..na {
                for b in 0..nb {
                    let v = c.get(x, y, a, b);
                    if !is_nonnegative(v, tol) {
                        negative.push((x, y, a, b, v.to_complex().re));
                        ok = false;
                    }
                    sum = sum.add(v);
                }
            }
            let d = sum.sub(&T::one());
            ok &= d.is_negligible(tol);
            defects.push(d.to_complex().norm());
        }
    }
    let max = defects.iter().copied().fold(0.0, f64::max);
    ValidityReport { negative, normalization_defects: defects, max_normalization_defect: max, ok }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NonsignallingReport {
    /// Largest variation of a marginal across the other party's question.
    pub max_defect: f64,
    pub ok: bool,
}

/// Marginal independence from the other party's question.
pub fn is_nonsignalling<T: Scalar>(c: &Correlation<T>, tol: f64) -> NonsignallingReport {
    let (nx, ny, na, nb) = c.scenario.dims();
    let mut max: f64 = 0.0;
    let mut ok = true;
    let mut note = |d: T| {
        ok &= d.is_negligible(tol);
        max = max.max(d.to_complex().norm());
    };
    let alice = |x: usize, y: usize, a: usize| (0..nb).fold(T::zero(), |s, b| s.add(c.get(x, y, a, b)));
    let bob = |x: usize, y: usize, b: usize| (0..na).fold(T::zero(), |s, a| s.add(c.get(x, y, a, b)));
    for x in 0..nx {
        for a in 0..na {
            let base = alice(x, 0, a);
            for y in 1..ny {
                note(alice(x, y, a).sub(&base));
            }
        }
    }
    for y in 0..ny {
        for b in 0..nb {
            let base = bob(0, y, b);
            for x in 1..nx {
                note(bob(x, y, b).sub(&base));
            }
        }
    }
    NonsignallingReport { max_defect: max, ok }
}

/// `Σ_a P(a, a | x, x) = 1` for every question.
pub fn is_synchronous<T: Scalar>(c: &Correlation<T>, tol: f64) -> Result<bool> {
    let s = &c.scenario;
    if !s.is_symmetric() {
        return Err(Error::ScenarioMismatch("synchronicity needs X = Y and A = B".into()));
    }
    let (nx, _, na, _) = s.dims();
    Ok((0..nx).all(|x| {
        let diag = (0..na).fold(T::zero(), |acc, a| acc.add(c.get(x, x, a, a)));
        diag.sub(&T::one()).is_negligible(tol)
    }))
}

/// One violating entry: question labels and answer indices.
pub type Violation = (Label, Label, usize, usize);

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PerfectReport {
    /// Violations of the six conditions, in order.
    pub conditions: [Vec<Violation>; 6],
}

impl PerfectReport {
    pub fn passes(&self) -> bool {
        self.conditions.iter().all(Vec::is_empty)
    }

    pub fn violation_count(&self) -> usize {
        self.conditions.iter().map(Vec::len).sum()
    }
}

enum Question {
    Row(usize),
    Var(usize),
}

fn classify(l: &Label, a: &BinaryLinearSystem) -> Option<Question> {
    match l {
        Label::Int(i) if *i >= 0 && (*i as usize) < a.m() => Some(Question::Row(*i as usize)),
        Label::Var { var } if *var < a.n() => Some(Question::Var(*var)),
        _ => None,
    }
}

/// Which of the six perfect-correlation conditions require the entry
/// `(a, b | x, y)` to vanish. `None` when `x` or `y` is not a row or variable
/// question of `A`. Answer indices follow [`binary_answers`] with `κ` the row size.
pub fn forbidden(a: &BinaryLinearSystem, x: &Label, y: &Label, av: usize, bv: usize) -> Option<[bool; 6]> {
    let kappa = a.kappa()?;
    let (qx, qy) = (classify(x, a)?, classify(y, a)?);
    let bit = |v: usize, i: usize| answer_bit(v, i, kappa);
    let parity = |v: usize| v.count_ones() % 2;
    let head_zero = |v: usize| v >> 1 == 0;
    let last = |v: usize| bit(v, kappa - 1);
    let mut hit = [false; 6];
    hit[0] = matches!(qx, Question::Row(_)) && parity(av) != 0 || matches!(qy, Question::Row(_)) && parity(bv) != 0;
    hit[1] = matches!(qx, Question::Var(_)) && !head_zero(av) || matches!(qy, Question::Var(_)) && !head_zero(bv);
    match (qx, qy) {
        (Question::Row(i), Question::Row(j)) => {
            hit[2] = a
                .row(i)
                .iter()
                .any(|&k| a.phi(j, k).is_some_and(|pj| bit(av, a.phi(i, k).unwrap()) != bit(bv, pj)));
        }
        (Question::Row(i), Question::Var(k)) => {
            hit[3] = a.phi(i, k).is_some_and(|pi| bit(av, pi) != last(bv));
        }
        (Question::Var(k), Question::Row(j)) => {
            hit[4] = a.phi(j, k).is_some_and(|pj| last(av) != bit(bv, pj));
        }
        (Question::Var(i), Question::Var(j)) => {
            hit[5] = i == j && last(av) != last(bv);
        }
    }
    Some(hit)
}

/// The six vanishing conditions of a perfect correlation for `Ax = 0`.
/// Questions outside `[m] ∪ X_var` are ignored.
pub fn check_perfect<T: Scalar>(c: &Correlation<T>, a: &BinaryLinearSystem, tol: f64) -> Result<PerfectReport> {
    let kappa = a
        .kappa()
        .ok_or_else(|| Error::ScenarioMismatch("rows of A do not share a common size".into()))?;
    let s = &c.scenario;
    let answers = binary_answers(kappa);
    if s.answers_a != answers || s.answers_b != answers {
        return Err(Error::ScenarioMismatch(format!("answers must be Z_2^{kappa} in index order")));
    }
    for i in 0..a.m() {
        if s.qa(&Label::Int(i as i64)).is_none() || s.qb(&Label::Int(i as i64)).is_none() {
            return Err(Error::ScenarioMismatch(format!("row question {i} missing")));
        }
    }
    for j in 0..a.n() {
        if s.qa(&Label::var(j)).is_none() || s.qb(&Label::var(j)).is_none() {
            return Err(Error::ScenarioMismatch(format!("variable question x{j} missing")));
        }
    }
    let mut conditions: [Vec<Violation>; 6] = Default::default();
    let n_ans = answers.len();
    for (xi, xl) in s.questions_a.iter().enumerate() {
        if classify(xl, a).is_none() {
            continue;
        }
        for (yi, yl) in s.questions_b.iter().enumerate() {
            for av in 0..n_ans {
                for bv in 0..n_ans {
                    let Some(hit) = forbidden(a, xl, yl, av, bv) else { continue };
                    if c.get(xi, yi, av, bv).is_negligible(tol) {
                        continue;
                    }
                    for (t, h) in hit.iter().enumerate() {
                        if *h {
                            conditions[t].push((xl.clone(), yl.clone(), av, bv));
                        }
                    }
                }
            }
        }
    }
    Ok(PerfectReport { conditions })
}

/// How the two parties share the Hilbert space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    /// `ℂ^{dim_a} ⊗ ℂ^{dim_b}`; Alice acts on the first factor.
    Tensor { dim_a: usize, dim_b: usize },
    /// One space; the two families are assumed to commute.
    Commuting { dim: usize },
}

/// A state plus one projective measurement per question and party.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Strategy<T> {
    pub scenario: Scenario,
    pub mode: Mode,
    pub state: Vec<T>,
    /// `alice[x][a]`
    pub alice: Vec<Vec<Mat<T>>>,
    /// `bob[y][b]`
    pub bob: Vec<Vec<Mat<T>>>,
}

/// `M ⊗ 1` applied to `v` with `v[i·db + j] = Ψ[i][j]`.
fn apply_left<T: Scalar>(m: &Mat<T>, v: &[T], da: usize, db: usize) -> Vec<T> {
    let mut out = vec![T::zero(); da * db];
    for i in 0..da {
        for k in 0..da {
            let c = m.get(i, k);
            if c.is_zero() {
                continue;
            }
            for j in 0..db {
                let x = &v[k * db + j];
                if !x.is_zero() {
                    out[i * db + j] = out[i * db + j].add(&c.mul(x));
                }
            }
        }
    }
    out
}

/// `1 ⊗ N` applied to `v`.
fn apply_right<T: Scalar>(n: &Mat<T>, v: &[T], da: usize, db: usize) -> Vec<T> {
    let mut out = vec![T::zero(); da * db];
    for i in 0..da {
        out[i * db..(i + 1) * db].clone_from_slice(&n.mul_vec(&v[i * db..(i + 1) * db]));
    }
    out
}

impl<T: Scalar> Strategy<T> {
    pub fn dim(&self) -> usize {
        match self.mode {
            Mode::Tensor { dim_a, dim_b } => dim_a * dim_b,
            Mode::Commuting { dim } => dim,
        }
    }

    fn local_dims(&self) -> (usize, usize) {
        match self.mode {
            Mode::Tensor { dim_a, dim_b } => (dim_a, dim_b),
            Mode::Commuting { dim } => (dim, dim),
        }
    }

    /// Alice's operator applied to a vector of the full space.
    pub fn apply_alice(&self, m: &Mat<T>, v: &[T]) -> Vec<T> {
        match self.mode {
            Mode::Tensor { dim_a, dim_b } => apply_left(m, v, dim_a, dim_b),
            Mode::Commuting { .. } => m.mul_vec(v),
        }
    }

    pub fn apply_bob(&self, n: &Mat<T>, v: &[T]) -> Vec<T> {
        match self.mode {
            Mode::Tensor { dim_a, dim_b } => apply_right(n, v, dim_a, dim_b),
            Mode::Commuting { .. } => n.mul_vec(v),
        }
    }

    /// Alice's operator as a matrix on the full space.
    pub fn alice_full(&self, m: &Mat<T>) -> Mat<T> {
        match self.mode {
            Mode::Tensor { dim_b, .. } => m.kron(&Mat::identity(dim_b)),
            Mode::Commuting { .. } => m.clone(),
        }
    }

    pub fn bob_full(&self, n: &Mat<T>) -> Mat<T> {
        match self.mode {
            Mode::Tensor { dim_a, .. } => Mat::identity(dim_a).kron(n),
            Mode::Commuting { .. } => n.clone(),
        }
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(&T) -> U + Copy) -> Strategy<U> {
        let fam = |v: &Vec<Vec<Mat<T>>>| v.iter().map(|ops| ops.iter().map(|m| m.map(f)).collect()).collect();
        Strategy {
            scenario: self.scenario.clone(),
            mode: self.mode,
            state: self.state.iter().map(f).collect(),
            alice: fam(&self.alice),
            bob: fam(&self.bob),
        }
    }

    pub fn to_complex(&self) -> Strategy<Complex64> {
        self.map(Scalar::to_complex)
    }

    /// Shapes, unit state and completeness. Cheap; used before every evaluation.
    pub fn check_shape(&self, tol: f64) -> Result<()> {
        let (nx, ny, na, nb) = self.scenario.dims();
        let (da, db) = self.local_dims();
        let bad = |m: String| Err(Error::InvariantViolation(m));
        if self.state.len() != self.dim() {
            return bad(format!("state has length {}, space has dimension {}", self.state.len(), self.dim()));
        }
        if !inner(&self.state, &self.state).sub(&T::one()).is_negligible(tol) {
            return bad("state is not a unit vector".into());
        }
        for (fam, nq, nans, d, who) in [(&self.alice, nx, na, da, "Alice"), (&self.bob, ny, nb, db, "Bob")] {
            if fam.len() != nq || fam.iter().any(|ops| ops.len() != nans) {
                return bad(format!("{who}'s family does not match the scenario"));
            }
            for (q, ops) in fam.iter().enumerate() {
                if ops.iter().any(|m| m.rows() != d || m.cols() != d) {
                    return bad(format!("{who}'s question {q} has operators of the wrong size"));
                }
                let sum = ops.iter().fold(Mat::zeros(d, d), |acc, m| acc.add(m));
                if !sum.approx_eq(&Mat::identity(d), tol) {
                    return bad(format!("{who}'s question {q} does not sum to the identity"));
                }
            }
        }
        Ok(())
    }

    /// Full invariant check: shape, `P² = P = P*`, and for commuting-mode
    /// strategies, that every Alice operator commutes with every Bob operator.
    pub fn check_invariants(&self, tol: f64) -> Result<()> {
        self.check_shape(tol)?;
        for (who, fam) in [("Alice", &self.alice), ("Bob", &self.bob)] {
            for (q, ops) in fam.iter().enumerate() {
                for (a, m) in ops.iter().enumerate() {
                    if !m.mul(m).approx_eq(m, tol) || !m.adjoint().approx_eq(m, tol) {
                        return Err(Error::InvariantViolation(format!(
                            "{who}'s operator ({q}, {a}) is not a projection"
                        )));
                    }
                }
            }
        }
        if let Mode::Commuting { .. } = self.mode {
            for ma in self.alice.iter().flatten() {
                for nb in self.bob.iter().flatten() {
                    if !ma.mul(nb).approx_eq(&nb.mul(ma), tol) {
                        return Err(Error::InvariantViolation("Alice and Bob operators do not commute".into()));
                    }
                }
            }
        }
        Ok(())
    }

    fn alice_vectors(&self) -> Vec<Vec<Vec<T>>> {
        self.alice
            .iter()
            .map(|ops| ops.iter().map(|m| self.apply_alice(&m.adjoint(), &self.state)).collect())
            .collect()
    }

    fn bob_vectors(&self) -> Vec<Vec<Vec<T>>> {
        self.bob.iter().map(|ops| ops.iter().map(|n| self.apply_bob(n, &self.state)).collect()).collect()
    }

    /// `⟨ψ|M|ψ⟩` for every Alice outcome and `⟨ψ|N|ψ⟩` for every Bob outcome.
    pub fn marginals(&self) -> (Vec<Vec<T>>, Vec<Vec<T>>) {
        let (av, bv) = (self.alice_vectors(), self.bob_vectors());
        let f = |vs: Vec<Vec<Vec<T>>>| -> Vec<Vec<T>> {
            vs.iter().map(|q| q.iter().map(|v| inner(&self.state, v)).collect()).collect()
        };
        (f(av).into_iter().map(|q| q.into_iter().map(|v| v.conj()).collect()).collect(), f(bv))
    }

    /// Every outcome of zero probability has the zero operator.
    pub fn is_good(&self, tol: f64) -> bool {
        let (pa, pb) = self.marginals();
        let check = |fam: &Vec<Vec<Mat<T>>>, probs: &Vec<Vec<T>>| {
            fam.iter().zip(probs).all(|(ops, ps)| {
                ops.iter().zip(ps).all(|(m, p)| !p.is_negligible(tol) || m.entries().iter().all(|e| e.is_negligible(tol)))
            })
        };
        check(&self.alice, &pa) && check(&self.bob, &pb)
    }
}

/// `P(a, b | x, y) = ⟨ψ| M_x^a ⊗ N_y^b |ψ⟩`.
pub fn correlation_from_strategy<T: Scalar>(s: &Strategy<T>, tol: f64) -> Result<Correlation<T>> {
    s.check_shape(tol)?;
    Ok(induced_correlation(s))
}

/// Evaluates the correlation without checking completeness, for families
/// that only sum to the identity on a subspace containing the state.
/// Dimensions must still match.
pub fn induced_correlation<T: Scalar>(s: &Strategy<T>) -> Correlation<T> {
    let av = s.alice_vectors();
    let bv = s.bob_vectors();
    Correlation::from_fn(s.scenario.clone(), |x, y, a, b| inner(&av[x][a], &bv[y][b]))
}

/// Merges every zero-probability outcome into the first outcome of the same
/// question with nonzero probability. The induced correlation is unchanged.
pub fn make_good<T: Scalar>(s: &Strategy<T>, tol: f64) -> Strategy<T> {
    let (pa, pb) = s.marginals();
    let fix = |fam: &Vec<Vec<Mat<T>>>, probs: &Vec<Vec<T>>| -> Vec<Vec<Mat<T>>> {
        fam.iter()
            .zip(probs)
            .map(|(ops, ps)| {
                let Some(keep) = ps.iter().position(|p| !p.is_negligible(tol)) else {
                    return ops.clone();
                };
                let mut out = ops.clone();
                for (k, p) in ps.iter().enumerate() {
                    if k != keep && p.is_negligible(tol) && !ops[k].is_zero() {
                        out[keep] = out[keep].add(&ops[k]);
                        out[k] = Mat::zeros(ops[k].rows(), ops[k].cols());
                    }
                }
                out
            })
            .collect()
    };
    Strategy {
        scenario: s.scenario.clone(),
        mode: s.mode,
        state: s.state.clone(),
        alice: fix(&s.alice, &pa),
        bob: fix(&s.bob, &pb),
    }
}

/// `max_{x,a} ‖(M_x^a − N_x^a)|ψ⟩‖`.
pub fn synchronous_consistency<T: Scalar>(s: &Strategy<T>) -> Result<f64> {
    if !s.scenario.is_symmetric() {
        return Err(Error::ScenarioMismatch("synchronous consistency needs X = Y and A = B".into()));
    }
    let mut max: f64 = 0.0;
    for (ma, nb) in s.alice.iter().zip(&s.bob) {
        for (m, n) in ma.iter().zip(nb) {
            let d = vec_sub(&s.apply_alice(m, &s.state), &s.apply_bob(n, &s.state));
            max = max.max(vec_norm(&d));
        }
    }
    Ok(max)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ObservableReport {
    /// `max ‖M(x_i)² − 1‖` and the same for `N`, as largest entry moduli.
    pub observable_defect: f64,
    /// `‖∏_{k∈I_i} N(x_k)|ψ⟩ − |ψ⟩‖` per row.
    pub row_product_defects: Vec<f64>,
    /// `max ‖[N(x_j), N(x_k)]|ψ⟩‖` over pairs sharing a row.
    pub commutation_defect: f64,
    /// `max ‖(M(x_i) − N(x_i))|ψ⟩‖`.
    pub state_consistency_defect: f64,
    /// `max ‖(M_{i,k}^{(c)} − N_{x_k}^{(c)})|ψ⟩‖`.
    pub grouped_defect: f64,
}

impl ObservableReport {
    pub fn max_defect(&self) -> f64 {
        self.row_product_defects
            .iter()
            .copied()
            .chain([
                self.observable_defect,
                self.commutation_defect,
                self.state_consistency_defect,
                self.grouped_defect,
            ])
            .fold(0.0, f64::max)
    }
}

/// Builds the binary observables of a strategy for a perfect correlation and
/// measures how far they are from a representation of the solution group.
pub fn extract_solution_observables<T: Scalar>(
    s: &Strategy<T>,
    a: &BinaryLinearSystem,
    tol: f64,
) -> Result<ObservableReport> {
    let kappa = a.kappa().ok_or_else(|| Error::ScenarioMismatch("rows of A differ in size".into()))?;
    if !s.is_good(tol) {
        return Err(Error::NotGoodStrategy("a zero-probability outcome has a nonzero projection".into()));
    }
    let sc = &s.scenario;
    let miss = |l: &Label| Error::ScenarioMismatch(format!("question {l} missing"));
    let (zero, one) = (0usize, 1usize);
    let (d_a, d_b) = s.local_dims();
    let var_obs = |fam: &Vec<Vec<Mat<T>>>, q: usize| fam[q][zero].sub(&fam[q][one]);
    let mut m_obs = Vec::new();
    let mut n_obs = Vec::new();
    for j in 0..a.n() {
        let l = Label::var(j);
        m_obs.push(var_obs(&s.alice, sc.qa(&l).ok_or_else(|| miss(&l))?));
        n_obs.push(var_obs(&s.bob, sc.qb(&l).ok_or_else(|| miss(&l))?));
    }
    let mut observable_defect: f64 = 0.0;
    for m in &m_obs {
        observable_defect = observable_defect.max(m.mul(m).max_abs_diff(&Mat::identity(d_a)));
    }
    for n in &n_obs {
        observable_defect = observable_defect.max(n.mul(n).max_abs_diff(&Mat::identity(d_b)));
    }
    let psi = &s.state;
    let nv: Vec<Vec<T>> = n_obs.iter().map(|n| s.apply_bob(n, psi)).collect();
    let mut row_product_defects = Vec::new();
    let mut commutation_defect: f64 = 0.0;
    let mut grouped_defect: f64 = 0.0;
    for (i, row) in a.rows().iter().enumerate() {
        let mut v = psi.clone();
        for &k in row.iter().rev() {
            v = s.apply_bob(&n_obs[k], &v);
        }
        row_product_defects.push(vec_norm(&vec_sub(&v, psi)));
        for (t, &j) in row.iter().enumerate() {
            for &k in &row[t + 1..] {
                let jk = s.apply_bob(&n_obs[j], &nv[k]);
                let kj = s.apply_bob(&n_obs[k], &nv[j]);
                commutation_defect = commutation_defect.max(vec_norm(&vec_sub(&jk, &kj)));
            }
        }
        let l = Label::Int(i as i64);
        let qi = sc.qa(&l).ok_or_else(|| miss(&l))?;
        for &k in row {
            let pos = a.phi(i, k).expect("k is in row i");
            let qk = sc.qb(&Label::var(k)).ok_or_else(|| miss(&Label::var(k)))?;
            for c in 0..2 {
                let grouped = s.alice[qi]
                    .iter()
                    .enumerate()
                    .filter(|(v, _)| answer_bit(*v, pos, kappa) == c)
                    .fold(Mat::zeros(d_a, d_a), |acc, (_, m)| acc.add(m));
                let lhs = s.apply_alice(&grouped, psi);
                let rhs = s.apply_bob(&s.bob[qk][c], psi);
                grouped_defect = grouped_defect.max(vec_norm(&vec_sub(&lhs, &rhs)));
            }
        }
    }
    let mut state_consistency_defect: f64 = 0.0;
    for (m, nvec) in m_obs.iter().zip(&nv) {
        state_consistency_defect = state_consistency_defect.max(vec_norm(&vec_sub(&s.apply_alice(m, psi), nvec)));
    }
    Ok(ObservableReport {
        observable_defect,
        row_product_defects,
        commutation_defect,
        state_consistency_defect,
        grouped_defect,
    })
}

/// Deterministic correlation from answer functions `f_A(x)`, `f_B(y)`.
pub fn deterministic<T: Scalar>(scenario: Scenario, fa: impl Fn(usize) -> usize, fb: impl Fn(usize) -> usize) -> Correlation<T> {
    Correlation::from_fn(scenario, |x, y, a, b| if fa(x) == a && fb(y) == b { T::one() } else { T::zero() })
}

/// Row questions `0..m` then variable questions, answers `ℤ₂^κ`.
pub fn solution_scenario(a: &BinaryLinearSystem) -> Result<Scenario> {
    let kappa = a.kappa().ok_or_else(|| Error::ScenarioMismatch("rows of A differ in size".into()))?;
    let mut q: Vec<Label> = (0..a.m()).map(|i| Label::Int(i as i64)).collect();
    q.extend((0..a.n()).map(Label::var));
    Scenario::symmetric(q, binary_answers(kappa))
}

/// Index of each label, for repeated lookups.
pub fn label_index(labels: &[Label]) -> HashMap<Label, usize> {
    labels.iter().cloned().enumerate().map(|(i, l)| (l, i)).collect()
}
