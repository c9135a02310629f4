//! The family of correlations `C_f` built from trace-like functions on the
//! finite support set `W_n ⊂ G_n`, and the filter down to `F_n`.
//!
//! `G_n` is the Coxeter group with involutions `x_j`, commuting pairs from the
//! rows of `A`, and `(t₁t₂)^p = e`. Group-algebra elements are keyed by
//! Coxeter normal forms.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::correlations::{binary_answers, check_perfect, forbidden, Correlation, Label, PerfectReport, Scenario};
use crate::coxeter::{CoxeterContext, NormalWord};
use crate::cyclotomic::CyclotomicNumber as Cy;
use crate::dihedral::{idempotents, DihedralElement};
use crate::error::{Error, Result};
use crate::linalg::{Mat, Scalar};
use crate::minsky::is_prime;
use crate::presentations::BinaryLinearSystem;

/// A system with three entries per row plus the designated generators.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawFnContext")]
pub struct FnContext {
    #[serde(flatten)]
    a: BinaryLinearSystem,
    x0: usize,
    t1: usize,
    t2: usize,
    p: usize,
    /// Accepted for completeness; the construction does not use them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    u1: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    u2: Option<usize>,
    #[serde(skip)]
    coxeter: Option<CoxeterContext>,
}

#[derive(Deserialize)]
struct RawFnContext {
    #[serde(flatten)]
    a: BinaryLinearSystem,
    x0: usize,
    t1: usize,
    t2: usize,
    p: usize,
    #[serde(default)]
    u1: Option<usize>,
    #[serde(default)]
    u2: Option<usize>,
}

impl TryFrom<RawFnContext> for FnContext {
    type Error = Error;
    fn try_from(r: RawFnContext) -> Result<Self> {
        let mut ctx = FnContext::new(r.a, r.x0, r.t1, r.t2, r.p)?;
        ctx.u1 = r.u1;
        ctx.u2 = r.u2;
        Ok(ctx)
    }
}

impl FnContext {
    pub fn new(a: BinaryLinearSystem, x0: usize, t1: usize, t2: usize, p: usize) -> Result<Self> {
        let bad = |m: String| Err(Error::InvalidContext(m));
        if a.m() == 0 || a.rows().iter().any(|r| r.len() != 3) {
            return bad("every row must have exactly three entries".into());
        }
        let n = a.n();
        if x0 >= n || t1 >= n || t2 >= n {
            return bad(format!("designated indices must be below {n}"));
        }
        if x0 == t1 || x0 == t2 || t1 == t2 {
            return bad("x0, t1 and t2 must be distinct".into());
        }
        if a.share_row(t1, t2) {
            return bad("t1 and t2 share a row".into());
        }
        if p < 3 || !is_prime(p as u64) {
            return bad(format!("p = {p} must be an odd prime"));
        }
        let coxeter = CoxeterContext::from_system(&a, t1, t2, p)?;
        Ok(FnContext { a, x0, t1, t2, p, u1: None, u2: None, coxeter: Some(coxeter) })
    }

    pub fn system(&self) -> &BinaryLinearSystem {
        &self.a
    }

    pub fn x0(&self) -> usize {
        self.x0
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

    pub fn coxeter(&self) -> &CoxeterContext {
        self.coxeter.as_ref().expect("built in FnContext::new")
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        self.coxeter = Some(self.coxeter().clone().with_cap(cap));
        self
    }

    /// `X_var ∪ [m] ∪ {m, m+1, m+2, (m,t₁), (m,t₂)}` in that order.
    pub fn questions(&self) -> Vec<FnQuestion> {
        let mut q: Vec<FnQuestion> = (0..self.a.n()).map(FnQuestion::Var).collect();
        q.extend((0..self.a.m()).map(FnQuestion::Row));
        q.extend((0..3).map(FnQuestion::Dihedral));
        q.extend([FnQuestion::ZeroT(1), FnQuestion::ZeroT(2)]);
        q
    }

    pub fn scenario(&self) -> Scenario {
        let labels = self.questions().iter().map(|q| q.label(self.a.m())).collect();
        Scenario::symmetric(labels, binary_answers(3)).expect("labels are distinct")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FnQuestion {
    Var(usize),
    Row(usize),
    /// Question `m + j`, `j ∈ [3]`.
    Dihedral(usize),
    /// Question `(m, t_k)`.
    ZeroT(usize),
}

impl FnQuestion {
    pub fn label(self, m: usize) -> Label {
        match self {
            FnQuestion::Var(i) => Label::var(i),
            FnQuestion::Row(i) => Label::Int(i as i64),
            FnQuestion::Dihedral(j) => Label::Int((m + j) as i64),
            FnQuestion::ZeroT(k) => Label::pair(Label::Int(m as i64), Label::Sym(format!("t{k}"))),
        }
    }

    fn restricted(self) -> bool {
        matches!(self, FnQuestion::Var(_) | FnQuestion::Row(_))
    }
}

/// Finite sum `Σ α_g g` in `ℂ[G_n]`, keyed by normal form.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GroupAlgebraElement {
    support: BTreeMap<NormalWord, Cy>,
}

/// Memoized products of normal forms.
#[derive(Default)]
struct WordMul {
    memo: HashMap<(NormalWord, NormalWord), NormalWord>,
}

impl WordMul {
    fn mul(&mut self, ctx: &CoxeterContext, a: &NormalWord, b: &NormalWord) -> Result<NormalWord> {
        if a.is_empty() {
            return Ok(b.clone());
        }
        if b.is_empty() {
            return Ok(a.clone());
        }
        let key = (a.clone(), b.clone());
        if let Some(w) = self.memo.get(&key) {
            return Ok(w.clone());
        }
        let w = ctx.multiply(a, b)?;
        self.memo.insert(key, w.clone());
        Ok(w)
    }
}

impl GroupAlgebraElement {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn identity() -> Self {
        Self::word(NormalWord::identity(), Cy::one())
    }

    pub fn word(w: NormalWord, c: Cy) -> Self {
        let mut out = Self::zero();
        out.add_term(w, &c);
        out
    }

    pub fn support(&self) -> &BTreeMap<NormalWord, Cy> {
        &self.support
    }

    pub fn is_zero(&self) -> bool {
        self.support.is_empty()
    }

    pub fn coeff(&self, w: &NormalWord) -> Cy {
        self.support.get(w).cloned().unwrap_or_else(Cy::zero)
    }

    pub fn add_term(&mut self, w: NormalWord, c: &Cy) {
        let v = self.coeff(&w).add(c);
        if v.is_zero() {
            self.support.remove(&w);
        } else {
            self.support.insert(w, v);
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut out = self.clone();
        for (w, c) in &o.support {
            out.add_term(w.clone(), c);
        }
        out
    }

    pub fn scale(&self, c: &Cy) -> Self {
        let mut out = Self::zero();
        for (w, v) in &self.support {
            out.add_term(w.clone(), &v.mul(c));
        }
        out
    }

    pub fn mul(&self, o: &Self, ctx: &CoxeterContext) -> Result<Self> {
        self.mul_memo(o, ctx, &mut WordMul::default())
    }

    fn mul_memo(&self, o: &Self, ctx: &CoxeterContext, memo: &mut WordMul) -> Result<Self> {
        let mut out = Self::zero();
        for (g, a) in &self.support {
            for (h, b) in &o.support {
                out.add_term(memo.mul(ctx, g, h)?, &a.mul(b));
            }
        }
        Ok(out)
    }

    /// `Σ ᾱ_g g⁻¹`.
    pub fn star(&self, ctx: &CoxeterContext) -> Result<Self> {
        let mut out = Self::zero();
        for (w, c) in &self.support {
            out.add_term(ctx.inverse(w)?, &c.conjugate());
        }
        Ok(out)
    }
}

fn half_sum(g: usize, sign_bit: usize) -> GroupAlgebraElement {
    let mut out = GroupAlgebraElement::word(NormalWord::identity(), Cy::from_ratio(1, 2));
    let s = if sign_bit == 0 { 1 } else { -1 };
    out.add_term(NormalWord(vec![g]), &Cy::from_ratio(s, 2));
    out
}

/// `t₂^s(t₁t₂)^j` as a normal form of `G_n`.
fn embed_dihedral(ctx: &FnContext, d: DihedralElement) -> Result<NormalWord> {
    let mut w = Vec::new();
    if d.s == 1 {
        w.push(ctx.t2);
    }
    for _ in 0..d.j {
        w.extend([ctx.t1, ctx.t2]);
    }
    ctx.coxeter().normal_form(&w)
}

/// `σ(x, a)` for every question and every `a ∈ ℤ₂³`, indexed `[q][a]` in the
/// order of [`FnContext::questions`] and [`binary_answers`].
pub fn sigma_table(ctx: &FnContext) -> Result<Vec<Vec<GroupAlgebraElement>>> {
    let cx = ctx.coxeter();
    let pi = idempotents(ctx.p)?;
    let mut memo = WordMul::default();
    let embed = |x: &crate::dihedral::DihedralAlgebraElement| -> Result<GroupAlgebraElement> {
        let mut out = GroupAlgebraElement::zero();
        for (d, c) in x.support() {
            out.add_term(embed_dihedral(ctx, *d)?, c);
        }
        Ok(out)
    };
    let pi_g: Vec<Vec<GroupAlgebraElement>> =
        pi.iter().map(|row| row.iter().map(&embed).collect::<Result<Vec<_>>>()).collect::<Result<_>>()?;
    let bit = |a: usize, i: usize| a >> (2 - i) & 1;
    let mut table = Vec::new();
    for q in ctx.questions() {
        let mut row = Vec::with_capacity(8);
        for a in 0..8 {
            let hash = 2 * bit(a, 0) + bit(a, 1);
            let el = match q {
                FnQuestion::Var(i) if hash == 0 => half_sum(i, bit(a, 2)),
                FnQuestion::Row(i) => {
                    let mut acc = GroupAlgebraElement::identity();
                    for (pos, &k) in ctx.a.row(i).iter().enumerate() {
                        acc = acc.mul_memo(&half_sum(k, bit(a, pos)), cx, &mut memo)?;
                    }
                    acc
                }
                FnQuestion::Dihedral(j) if hash <= 2 && bit(a, 2) == 0 => pi_g[j][hash].clone(),
                FnQuestion::ZeroT(k) if hash < 3 => {
                    let t = if k == 1 { ctx.t1 } else { ctx.t2 };
                    pi_g[0][hash].mul_memo(&half_sum(t, bit(a, 2)), cx, &mut memo)?
                }
                _ => GroupAlgebraElement::zero(),
            };
            row.push(el);
        }
        table.push(row);
    }
    Ok(table)
}

/// `σ(x, a)` for one question label and answer index.
pub fn sigma(ctx: &FnContext, x: &Label, a: usize) -> Result<GroupAlgebraElement> {
    let qi = ctx
        .scenario()
        .qa(x)
        .ok_or_else(|| Error::ScenarioMismatch(format!("question {x} not in the question set")))?;
    if a >= 8 {
        return Err(Error::IndexError(format!("answer index {a} outside Z_2^3")));
    }
    Ok(sigma_table(ctx)?.swap_remove(qi).swap_remove(a))
}

/// `f : W_n → {0, 1}`; serialized as a list of `(word, bit)` pairs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<(NormalWord, u8)>", into = "Vec<(NormalWord, u8)>")]
pub struct TraceFunction {
    pub values: BTreeMap<NormalWord, bool>,
}

impl From<Vec<(NormalWord, u8)>> for TraceFunction {
    fn from(v: Vec<(NormalWord, u8)>) -> Self {
        TraceFunction { values: v.into_iter().map(|(w, b)| (w, b != 0)).collect() }
    }
}

impl From<TraceFunction> for Vec<(NormalWord, u8)> {
    fn from(f: TraceFunction) -> Self {
        f.values.into_iter().map(|(w, b)| (w, b as u8)).collect()
    }
}

impl TraceFunction {
    pub fn get(&self, w: &NormalWord) -> Option<bool> {
        self.values.get(w).copied()
    }
}

/// The forced and free parts of `W_n`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TraceConstraints {
    pub forced1: BTreeSet<NormalWord>,
    pub forced0: BTreeSet<NormalWord>,
    /// Ordered by length, then lexicographically.
    pub free: Vec<NormalWord>,
}

/// Precomputed `σ` table, `W_n`, and every product `σ(x,a)σ(y,b)` as sparse
/// coefficients over `W_n`.
pub struct FnModel {
    ctx: FnContext,
    questions: Vec<FnQuestion>,
    sigma: Vec<Vec<GroupAlgebraElement>>,
    wn: Vec<NormalWord>,
    index: HashMap<NormalWord, usize>,
    products: Vec<Vec<(usize, Cy)>>,
}

impl FnModel {
    pub fn new(ctx: FnContext) -> Result<Self> {
        let sigma = sigma_table(&ctx)?;
        let questions = ctx.questions();
        let nq = questions.len();
        let cx = ctx.coxeter();
        let mut memo = WordMul::default();
        let mut raw = Vec::with_capacity(nq * nq * 64);
        let mut wn = BTreeSet::new();
        for x in 0..nq {
            for y in 0..nq {
                for a in 0..8 {
                    for b in 0..8 {
                        let (sa, sb) = (&sigma[x][a], &sigma[y][b]);
                        let prod = if sa.is_zero() || sb.is_zero() {
                            GroupAlgebraElement::zero()
                        } else {
                            sa.mul_memo(sb, cx, &mut memo)?
                        };
                        wn.extend(prod.support.keys().cloned());
                        raw.push(prod);
                    }
                }
            }
        }
        let wn: Vec<NormalWord> = wn.into_iter().collect();
        let index: HashMap<NormalWord, usize> = wn.iter().cloned().enumerate().map(|(i, w)| (w, i)).collect();
        let products = raw
            .into_iter()
            .map(|prod| prod.support.into_iter().map(|(w, c)| (index[&w], c)).collect())
            .collect();
        Ok(FnModel { ctx, questions, sigma, wn, index, products })
    }

    pub fn context(&self) -> &FnContext {
        &self.ctx
    }

    pub fn sigma(&self, q: usize, a: usize) -> &GroupAlgebraElement {
        &self.sigma[q][a]
    }

    pub fn wn(&self) -> &[NormalWord] {
        &self.wn
    }

    fn product(&self, x: usize, y: usize, a: usize, b: usize) -> &[(usize, Cy)] {
        let nq = self.questions.len();
        &self.products[((x * nq + y) * 8 + a) * 8 + b]
    }

    /// `f(e) = 1`, `f(x₀) = 0`, `f = 0` on `⟨t₁,t₂⟩ ∖ {e}`, the rest free.
    pub fn constraints(&self) -> TraceConstraints {
        let cx = self.ctx.coxeter();
        let e = NormalWord::identity();
        let x0 = NormalWord(vec![self.ctx.x0]);
        let mut forced1 = BTreeSet::new();
        let mut forced0 = BTreeSet::new();
        let mut free = Vec::new();
        for w in &self.wn {
            if *w == e {
                forced1.insert(w.clone());
            } else if *w == x0 || cx.in_braid_subgroup(w) {
                forced0.insert(w.clone());
            } else {
                free.push(w.clone());
            }
        }
        free.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
        TraceConstraints { forced1, forced0, free }
    }

    /// Checks that `f` is defined exactly on `W_n` and meets the constraints.
    pub fn check(&self, f: &TraceFunction) -> Result<()> {
        if f.values.len() != self.wn.len() || self.wn.iter().any(|w| !f.values.contains_key(w)) {
            return Err(Error::ConstraintViolation("f must be defined exactly on W_n".into()));
        }
        let c = self.constraints();
        if let Some(w) = c.forced1.iter().find(|w| !f.values[*w]) {
            return Err(Error::ConstraintViolation(format!("f({w}) must be 1")));
        }
        if let Some(w) = c.forced0.iter().find(|w| f.values[*w]) {
            return Err(Error::ConstraintViolation(format!("f({w}) must be 0")));
        }
        Ok(())
    }

    /// The function with the given values on the free words (in the order
    /// of [`TraceConstraints::free`]) and the forced values elsewhere.
    pub fn function_from_bits(&self, bits: &[bool]) -> Result<TraceFunction> {
        let c = self.constraints();
        if bits.len() != c.free.len() {
            return Err(Error::InvalidArgument(format!("{} bits for {} free words", bits.len(), c.free.len())));
        }
        let mut values: BTreeMap<NormalWord, bool> = c.forced1.into_iter().map(|w| (w, true)).collect();
        values.extend(c.forced0.into_iter().map(|w| (w, false)));
        values.extend(c.free.into_iter().zip(bits.iter().copied()));
        Ok(TraceFunction { values })
    }

    fn f_vector(&self, f: &TraceFunction) -> Vec<bool> {
        self.wn.iter().map(|w| f.values[w]).collect()
    }

    fn evaluate(&self, fv: &[bool], x: usize, y: usize, a: usize, b: usize) -> Cy {
        self.product(x, y, a, b)
            .iter()
            .filter(|(i, _)| fv[*i])
            .fold(Cy::zero(), |s, (_, c)| s.add(c))
    }

    /// `C_f(a,b|x,y) = f(σ(x,a)σ(y,b))`.
    pub fn correlation(&self, f: &TraceFunction) -> Result<Correlation<Cy>> {
        self.check(f)?;
        let fv = self.f_vector(f);
        Ok(Correlation::from_fn(self.ctx.scenario(), |x, y, a, b| self.evaluate(&fv, x, y, a, b)))
    }

    /// `C_f` restricted to `X_var ∪ [m]`.
    pub fn restricted_correlation(&self, f: &TraceFunction) -> Result<Correlation<Cy>> {
        self.check(f)?;
        let fv = self.f_vector(f);
        let keep: Vec<usize> = (0..self.questions.len()).filter(|&q| self.questions[q].restricted()).collect();
        let m = self.ctx.a.m();
        let labels: Vec<Label> = keep.iter().map(|&q| self.questions[q].label(m)).collect();
        let sc = Scenario::symmetric(labels, binary_answers(3))?;
        Ok(Correlation::from_fn(sc, |x, y, a, b| self.evaluate(&fv, keep[x], keep[y], a, b)))
    }

    /// Perfect-correlation report for the restriction of `C_f`.
    pub fn perfect_report(&self, f: &TraceFunction) -> Result<PerfectReport> {
        check_perfect(&self.restricted_correlation(f)?, &self.ctx.a, 0.0)
    }

    pub fn is_in_fn(&self, f: &TraceFunction) -> Result<bool> {
        Ok(self.perfect_report(f)?.passes())
    }

    /// Linear equations over the free bits whose solutions in `{0,1}` are
    /// exactly the members of `F_n`: every entry the perfect conditions
    /// forbid must vanish. Each row is `(coefficients, right-hand side)`.
    fn membership_equations(&self) -> Vec<(Vec<BigRational>, BigRational)> {
        let c = self.constraints();
        let free_pos: HashMap<usize, usize> = c.free.iter().enumerate().map(|(i, w)| (self.index[w], i)).collect();
        let e_idx = self.index.get(&NormalWord::identity()).copied();
        let m = self.ctx.a.m();
        let k = c.free.len();
        let mut eqs = Vec::new();
        let nq = self.questions.len();
        for x in 0..nq {
            for y in 0..nq {
                if !self.questions[x].restricted() || !self.questions[y].restricted() {
                    continue;
                }
                let (lx, ly) = (self.questions[x].label(m), self.questions[y].label(m));
                for a in 0..8 {
                    for b in 0..8 {
                        let hit = forbidden(&self.ctx.a, &lx, &ly, a, b).expect("restricted questions");
                        if !hit.iter().any(|h| *h) {
                            continue;
                        }
                        let mut coeffs = vec![BigRational::zero(); k];
                        let mut rhs = BigRational::zero();
                        for (i, v) in self.product(x, y, a, b) {
                            let q = v.to_rational().expect("restricted entries are rational");
                            if let Some(&j) = free_pos.get(i) {
                                coeffs[j] += q;
                            } else if Some(*i) == e_idx {
                                rhs -= q;
                            }
                        }
                        if coeffs.iter().all(Zero::is_zero) && rhs.is_zero() {
                            continue;
                        }
                        eqs.push((coeffs, rhs));
                    }
                }
            }
        }
        eqs
    }

    /// Members of `F_n` in increasing candidate index, starting at `start`.
    /// Candidate `k` sets free word `i` to bit `|free| − 1 − i` of `k`.
    pub fn enumerate(&self, start: &BigUint) -> FnEnumerator<'_> {
        FnEnumerator::new(self, start)
    }
}

/// Row-reduced system where each row's pivot is its latest variable in
/// enumeration order, so a pivot is fixed once everything before it is.
struct ReducedSystem {
    /// `pivot_row[v]`: the row solving for variable `v`, if any.
    pivot_row: Vec<Option<usize>>,
    /// Row `r`: `v_{pivot} = rhs − Σ coeff·v` over earlier variables.
    rows: Vec<(usize, Vec<(usize, BigRational)>, BigRational)>,
    inconsistent: bool,
}

impl ReducedSystem {
    fn new(k: usize, eqs: Vec<(Vec<BigRational>, BigRational)>) -> Self {
        let mut rows: Vec<(Vec<BigRational>, BigRational)> = eqs;
        let mut pivots: Vec<(usize, usize)> = Vec::new();
        let mut next = 0;
        for col in (0..k).rev() {
            let Some(r) = (next..rows.len()).find(|&r| !rows[r].0[col].is_zero()) else { continue };
            rows.swap(next, r);
            let inv = rows[next].0[col].recip();
            let (coeffs, rhs) = &mut rows[next];
            for c in coeffs.iter_mut() {
                *c *= &inv;
            }
            *rhs *= &inv;
            let (piv_c, piv_r) = (rows[next].0.clone(), rows[next].1.clone());
            for (r2, row) in rows.iter_mut().enumerate() {
                if r2 == next || row.0[col].is_zero() {
                    continue;
                }
                let f = row.0[col].clone();
                for (c, pc) in row.0.iter_mut().zip(&piv_c) {
                    if !pc.is_zero() {
                        *c -= &f * pc;
                    }
                }
                row.1 -= &f * &piv_r;
            }
            pivots.push((col, next));
            next += 1;
        }
        let inconsistent = rows[next..].iter().any(|(_, rhs)| !rhs.is_zero());
        let mut pivot_row = vec![None; k];
        let mut out = Vec::new();
        for (col, r) in pivots {
            let (coeffs, rhs) = &rows[r];
            let others = coeffs
                .iter()
                .enumerate()
                .filter(|(j, c)| *j != col && !c.is_zero())
                .map(|(j, c)| (j, c.clone()))
                .collect::<Vec<_>>();
            debug_assert!(others.iter().all(|(j, _)| *j < col));
            pivot_row[col] = Some(out.len());
            out.push((col, others, rhs.clone()));
        }
        ReducedSystem { pivot_row, rows: out, inconsistent }
    }

    /// Value the pivot row forces, given all earlier variables.
    fn forced(&self, row: usize, assign: &[u8]) -> Option<u8> {
        let (_, others, rhs) = &self.rows[row];
        let mut v = rhs.clone();
        for (j, c) in others {
            if assign[*j] == 1 {
                v -= c;
            }
        }
        if v.is_zero() {
            Some(0)
        } else if v.is_one() {
            Some(1)
        } else {
            None
        }
    }

    /// Whether every pivot row can still land in `[0, 1]` given the first
    /// `depth` variables.
    fn feasible(&self, assign: &[u8], depth: usize) -> bool {
        self.rows.iter().all(|(col, others, rhs)| {
            if *col < depth {
                return true;
            }
            let (mut lo, mut hi) = (rhs.clone(), rhs.clone());
            for (j, c) in others {
                if *j < depth {
                    if assign[*j] == 1 {
                        lo -= c;
                        hi -= c;
                    }
                } else if c.is_positive() {
                    lo -= c;
                } else {
                    hi -= c;
                }
            }
            !(hi < BigRational::zero() || lo > BigRational::one())
        })
    }
}

/// Lazy, resumable stream over `F_n`.
pub struct FnEnumerator<'a> {
    model: &'a FnModel,
    system: ReducedSystem,
    k: usize,
    start: Vec<u8>,
    assign: Vec<u8>,
    /// `tight[d]`: the first `d` bits equal the start cursor's.
    tight: Vec<bool>,
    depth: usize,
    done: bool,
    fresh: bool,
}

#[derive(Clone, Debug)]
pub struct FnMember {
    pub index: BigUint,
    pub f: TraceFunction,
}

impl<'a> FnEnumerator<'a> {
    fn new(model: &'a FnModel, start: &BigUint) -> Self {
        let k = model.constraints().free.len();
        let system = ReducedSystem::new(k, model.membership_equations());
        let start_bits: Vec<u8> = (0..k).map(|i| start.bit((k - 1 - i) as u64) as u8).collect();
        let past_end = start.bits() as usize > k;
        FnEnumerator {
            model,
            done: system.inconsistent || past_end,
            system,
            k,
            start: start_bits,
            assign: vec![0; k],
            tight: vec![true; k + 1],
            depth: 0,
            fresh: true,
        }
    }

    pub fn free_count(&self) -> usize {
        self.k
    }

    /// Candidate values for variable `d` at or above `from`.
    fn options(&self, d: usize, from: u8) -> Vec<u8> {
        let lower = if self.tight[d] { self.start[d].max(from) } else { from };
        match self.system.pivot_row[d] {
            Some(r) => match self.system.forced(r, &self.assign) {
                Some(v) if v >= lower => vec![v],
                _ => vec![],
            },
            None => (lower..2).collect(),
        }
    }

    /// Sets variable `d` to the first viable option `≥ from`.
    fn place(&mut self, d: usize, from: u8) -> bool {
        for v in self.options(d, from) {
            self.assign[d] = v;
            self.tight[d + 1] = self.tight[d] && v == self.start[d];
            if self.system.feasible(&self.assign, d + 1) {
                return true;
            }
        }
        false
    }

    /// Moves to the next assignment of variables `< depth` in order.
    fn backtrack(&mut self) -> bool {
        while self.depth > 0 {
            let d = self.depth - 1;
            let cur = self.assign[d];
            if cur == 0 && self.place(d, 1) {
                return true;
            }
            self.depth -= 1;
        }
        false
    }
}

impl Iterator for FnEnumerator<'_> {
    type Item = FnMember;

    fn next(&mut self) -> Option<FnMember> {
        if self.done {
            return None;
        }
        if !self.fresh && !self.backtrack() {
            self.done = true;
            return None;
        }
        self.fresh = false;
        loop {
            if self.depth == self.k {
                let bits: Vec<bool> = self.assign.iter().map(|&b| b == 1).collect();
                let mut index = BigUint::zero();
                for &b in &self.assign {
                    index = (index << 1u32) + BigUint::from(b);
                }
                let f = self.model.function_from_bits(&bits).expect("bit count matches");
                return Some(FnMember { index, f });
            }
            if self.place(self.depth, 0) {
                self.depth += 1;
            } else if !self.backtrack() {
                self.done = true;
                return None;
            }
        }
    }
}

/// `W_n` for a context.
pub fn compute_wn(ctx: &FnContext) -> Result<Vec<NormalWord>> {
    Ok(FnModel::new(ctx.clone())?.wn)
}

/// Up to `limit` members of `F_n` with their correlations, from candidate `start`.
pub fn enumerate_fn(model: &FnModel, start: &BigUint, limit: usize) -> Result<Vec<(FnMember, Correlation<Cy>)>> {
    model
        .enumerate(start)
        .take(limit)
        .map(|m| {
            let c = model.correlation(&m.f)?;
            Ok((m, c))
        })
        .collect()
}

/// `f(g) = 1` exactly when the image of `g` is the identity, for images of
/// the generators in a finite-dimensional representation.
pub fn f_from_finite_image<T: Scalar>(model: &FnModel, images: &[Mat<T>], tol: f64) -> Result<TraceFunction> {
    let cx = model.ctx.coxeter();
    if images.len() != cx.generators() {
        return Err(Error::InvalidArgument(format!("{} images for {} generators", images.len(), cx.generators())));
    }
    let d = images[0].rows();
    if images.iter().any(|m| m.rows() != d || m.cols() != d) {
        return Err(Error::InvalidArgument("images must be square of one size".into()));
    }
    let id = Mat::identity(d);
    let image = |w: &[usize]| w.iter().fold(id.clone(), |acc, &g| acc.mul(&images[g]));
    for r in cx.relators() {
        if !image(&r).approx_eq(&id, tol) {
            return Err(Error::RelatorViolation(format!("relator {r:?} does not map to the identity")));
        }
    }
    let values = model.wn.iter().map(|w| (w.clone(), image(&w.0).approx_eq(&id, tol))).collect();
    let f = TraceFunction { values };
    model.check(&f)?;
    Ok(f)
}
