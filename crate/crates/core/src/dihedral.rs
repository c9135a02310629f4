//! The dihedral group `D_p = ⟨t₁, t₂ | t₁² = t₂² = (t₁t₂)^p = e⟩`, its group
//! algebra, the nine idempotents `π_i^{(a)}`, and the correlations `𝔇_p`, `𝔇′_p`
//! built from them.
//!
//! Elements are written `t₂^s (t₁t₂)^j`. Basis vectors of `ℓ²D_p` are ordered
//! by `s·p + j`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::correlations::{Label, Mode, Scenario, Strategy};
use crate::cyclotomic::{cos_value, sin_value, CyclotomicNumber as Cy};
use crate::error::{Error, Result};
use crate::linalg::{inner, vec_norm, vec_scale, vec_sub, Mat, Scalar};
use crate::minsky::{discrete_log, is_prime, is_primitive_root};
use crate::correlations::Correlation;

type C = Complex64;

/// `t₂^s (t₁t₂)^j` with `s ∈ {0, 1}` and `0 ≤ j < p`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DihedralElement {
    pub s: u8,
    pub j: usize,
}

impl DihedralElement {
    pub fn identity() -> Self {
        DihedralElement { s: 0, j: 0 }
    }

    /// `(t₁t₂)^j`.
    pub fn rotation(j: usize, p: usize) -> Self {
        DihedralElement { s: 0, j: j % p }
    }

    /// `t₂(t₁t₂)^j`.
    pub fn reflection(j: usize, p: usize) -> Self {
        DihedralElement { s: 1, j: j % p }
    }

    /// `t₁ = t₂(t₁t₂)^{p−1}`.
    pub fn t1(p: usize) -> Self {
        Self::reflection(p - 1, p)
    }

    pub fn t2() -> Self {
        DihedralElement { s: 1, j: 0 }
    }

    pub fn inverse(self, p: usize) -> Self {
        if self.s == 0 {
            Self::rotation(p - self.j, p)
        } else {
            self
        }
    }

    pub fn index(self, p: usize) -> usize {
        self.s as usize * p + self.j
    }

    pub fn from_index(i: usize, p: usize) -> Self {
        DihedralElement { s: (i / p) as u8, j: i % p }
    }

    pub fn all(p: usize) -> impl Iterator<Item = Self> {
        (0..2 * p).map(move |i| Self::from_index(i, p))
    }

    /// Image under `t₁t₂ ↦ (t₁t₂)^r`, `t₂ ↦ t₂`.
    pub fn automorphism(self, r: usize, p: usize) -> Self {
        DihedralElement { s: self.s, j: self.j * r % p }
    }
}

/// Group product, using `(t₁t₂)^j t₂ = t₂ (t₁t₂)^{−j}`.
pub fn dihedral_mul(a: DihedralElement, b: DihedralElement, p: usize) -> DihedralElement {
    match b.s {
        0 => DihedralElement { s: a.s, j: (a.j + b.j) % p },
        _ => DihedralElement { s: a.s ^ 1, j: (b.j + p - a.j) % p },
    }
}

/// Element of `ℚ(ω_{4p})[D_p]`; the support holds no zero coefficients.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DihedralAlgebraElement {
    p: usize,
    support: BTreeMap<DihedralElement, Cy>,
}

impl DihedralAlgebraElement {
    pub fn zero(p: usize) -> Self {
        DihedralAlgebraElement { p, support: BTreeMap::new() }
    }

    pub fn identity(p: usize) -> Self {
        Self::element(DihedralElement::identity(), p)
    }

    pub fn element(g: DihedralElement, p: usize) -> Self {
        let mut out = Self::zero(p);
        out.add_term(g, &Cy::one());
        out
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn support(&self) -> &BTreeMap<DihedralElement, Cy> {
        &self.support
    }

    pub fn coeff(&self, g: &DihedralElement) -> Cy {
        self.support.get(g).cloned().unwrap_or_else(Cy::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.support.is_empty()
    }

    pub fn add_term(&mut self, g: DihedralElement, c: &Cy) {
        let v = self.coeff(&g).add(c);
        if v.is_zero() {
            self.support.remove(&g);
        } else {
            self.support.insert(g, v);
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        assert_eq!(self.p, o.p, "group algebras differ");
        let mut out = self.clone();
        for (g, c) in &o.support {
            out.add_term(*g, c);
        }
        out
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.scale(&Cy::from_integer(-1)))
    }

    pub fn scale(&self, c: &Cy) -> Self {
        let mut out = Self::zero(self.p);
        if c.is_zero() {
            return out;
        }
        for (g, v) in &self.support {
            out.support.insert(*g, v.mul(c));
        }
        out
    }

    pub fn mul(&self, o: &Self) -> Self {
        assert_eq!(self.p, o.p, "group algebras differ");
        let mut out = Self::zero(self.p);
        for (g, a) in &self.support {
            for (h, b) in &o.support {
                out.add_term(dihedral_mul(*g, *h, self.p), &a.mul(b));
            }
        }
        out
    }

    /// `Σ c_g g ↦ Σ c̄_g g⁻¹`.
    pub fn star(&self) -> Self {
        let support = self.support.iter().map(|(g, c)| (g.inverse(self.p), c.conjugate())).collect();
        DihedralAlgebraElement { p: self.p, support }
    }

    /// `Σ c_g g ↦ Σ c_g g⁻¹`.
    pub fn iota(&self) -> Self {
        let support = self.support.iter().map(|(g, c)| (g.inverse(self.p), c.clone())).collect();
        DihedralAlgebraElement { p: self.p, support }
    }

    /// Coordinates in the basis of `ℓ²D_p`.
    pub fn to_vector(&self) -> Vec<Cy> {
        let mut v = vec![Cy::zero(); 2 * self.p];
        for (g, c) in &self.support {
            v[g.index(self.p)] = c.clone();
        }
        v
    }

    /// `⟨x, y⟩ = Σ x̄_g y_g`.
    pub fn inner(&self, o: &Self) -> Cy {
        self.support
            .iter()
            .filter_map(|(g, a)| o.support.get(g).map(|b| a.conjugate().mul(b)))
            .fold(Cy::zero(), |s, v| s.add(&v))
    }
}

/// `cos((2j+1)π/p)` at conductor `4p`.
fn cos_odd(j: i64, p: u64) -> Cy {
    let half = BigRational::new(BigInt::from(1), BigInt::from(2));
    let e = 2 * (2 * j + 1);
    Cy::from_terms(4 * p, &[(e, half.clone()), (-e, half)])
}

fn check_prime(p: usize) -> Result<()> {
    if p < 3 || !is_prime(p as u64) {
        return Err(Error::InvalidArgument(format!("p = {p} must be an odd prime")));
    }
    Ok(())
}

/// `π_i^{(a)}` at `[i][a]`. Each row `{π_i^{(a)}}_a` sums to `e`.
pub fn idempotents(p: usize) -> Result<[[DihedralAlgebraElement; 3]; 3]> {
    check_prime(p)?;
    let pq = p as u64;
    let e = DihedralAlgebraElement::identity(p);
    let sum = |f: &dyn Fn(i64) -> Cy, s: u8, scale: Cy| {
        let mut out = DihedralAlgebraElement::zero(p);
        for j in 0..p {
            out.add_term(DihedralElement { s, j }, &f(j as i64).mul(&scale));
        }
        out
    };
    let inv_p = Cy::from_ratio(1, p as i64);
    let half = Cy::from_ratio(1, 2);
    let pi00 = sum(&|_| Cy::one(), 0, inv_p.clone());
    let pi01 = sum(&|j| cos_value(j, pq), 0, Cy::from_ratio(2, p as i64));
    let pi02 = e.sub(&pi00).sub(&pi01);
    let pi10 = pi01.scale(&half).add(&sum(&|j| cos_odd(j, pq), 1, inv_p.clone()));
    let pi11 = pi01.sub(&pi10);
    let pi20 = pi01.scale(&half).add(&sum(&|j| sin_value(j, pq), 1, inv_p));
    let pi21 = pi01.sub(&pi20);
    let rest = e.sub(&pi01);
    Ok([[pi00, pi01, pi02], [pi10, pi11, rest.clone()], [pi20, pi21, rest]])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

/// `L(x)|h⟩ = Σ x_g |gh⟩` or `R(x)|h⟩ = Σ x_g |hg⁻¹⟩`.
pub fn regular_rep(x: &DihedralAlgebraElement, side: Side) -> Mat<Cy> {
    let p = x.p;
    let mut m: Mat<Cy> = Mat::zeros(2 * p, 2 * p);
    for h in DihedralElement::all(p) {
        for (g, c) in &x.support {
            let target = match side {
                Side::Left => dihedral_mul(*g, h, p),
                Side::Right => dihedral_mul(h, g.inverse(p), p),
            };
            let (r, col) = (target.index(p), h.index(p));
            let v = m.get(r, col).add(c);
            m.set(r, col, v);
        }
    }
    m
}

/// Answer `(a₀, a₁) ∈ [3]×[2]` lives at index `2a₀ + a₁`, with `a₀` the high digit.
pub const fn answer_index(a0: usize, a1: usize) -> usize {
    2 * a0 + a1
}

/// Questions of `𝔇_p`: `0, 1, 2, t₁, t₂, (0,t₁), (0,t₂)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CpQuestion {
    Idem(usize),
    T(usize),
    ZeroT(usize),
}

pub const CP_QUESTIONS: [CpQuestion; 7] = [
    CpQuestion::Idem(0),
    CpQuestion::Idem(1),
    CpQuestion::Idem(2),
    CpQuestion::T(1),
    CpQuestion::T(2),
    CpQuestion::ZeroT(1),
    CpQuestion::ZeroT(2),
];

impl CpQuestion {
    pub fn label(self) -> Label {
        let t = |k: usize| Label::Sym(format!("t{k}"));
        match self {
            CpQuestion::Idem(i) => Label::Int(i as i64),
            CpQuestion::T(k) => t(k),
            CpQuestion::ZeroT(k) => Label::pair(Label::Int(0), t(k)),
        }
    }
}

pub fn cp_answers() -> Vec<Label> {
    let mut out = vec![Label::Int(0); 6];
    for a0 in 0..3 {
        for a1 in 0..2 {
            out[answer_index(a0, a1)] = Label::pair(Label::Int(a0 as i64), Label::Int(a1 as i64));
        }
    }
    out
}

pub fn cp_scenario() -> Scenario {
    Scenario::symmetric(CP_QUESTIONS.iter().map(|q| q.label()).collect(), cp_answers()).expect("labels are distinct")
}

/// `t_k` as a group element.
fn t(k: usize, p: usize) -> DihedralElement {
    if k == 1 {
        DihedralElement::t1(p)
    } else {
        DihedralElement::t2()
    }
}

/// `(e + (−1)^a t)/2`.
fn half_sum(k: usize, a: usize, p: usize) -> DihedralAlgebraElement {
    let sign = if a == 0 { 1 } else { -1 };
    let mut out = DihedralAlgebraElement::zero(p);
    out.add_term(DihedralElement::identity(), &Cy::from_ratio(1, 2));
    out.add_term(t(k, p), &Cy::from_ratio(sign, 2));
    out
}

/// The group-algebra element behind `M̃_x^{(a₀,a₁)}` (and `Ñ` under `R`).
fn cp_element(pi: &[[DihedralAlgebraElement; 3]; 3], q: CpQuestion, a0: usize, a1: usize) -> DihedralAlgebraElement {
    let p = pi[0][0].p;
    match q {
        CpQuestion::Idem(i) if a1 == 0 => pi[i][a0].clone(),
        CpQuestion::T(k) if a0 == 0 => half_sum(k, a1, p),
        CpQuestion::ZeroT(k) => cp_element(pi, CpQuestion::Idem(0), a0, 0).mul(&cp_element(pi, CpQuestion::T(k), 0, a1)),
        _ => DihedralAlgebraElement::zero(p),
    }
}

fn cp_elements(p: usize) -> Result<Vec<Vec<DihedralAlgebraElement>>> {
    let pi = idempotents(p)?;
    Ok(CP_QUESTIONS
        .iter()
        .map(|&q| {
            let mut ops = vec![DihedralAlgebraElement::zero(p); 6];
            for a0 in 0..3 {
                for a1 in 0..2 {
                    ops[answer_index(a0, a1)] = cp_element(&pi, q, a0, a1);
                }
            }
            ops
        })
        .collect())
}

/// `𝔇_p(a,b|x,y)` as the coefficient of `e` in `α·ι(β)`, which is `Σ_g α_g β_g`.
pub fn build_cp(p: usize) -> Result<Correlation<Cy>> {
    let els = cp_elements(p)?;
    Ok(Correlation::from_fn(cp_scenario(), |x, y, a, b| {
        let (al, be) = (&els[x][a], &els[y][b]);
        al.support
            .iter()
            .filter_map(|(g, c)| be.support.get(g).map(|d| c.mul(d)))
            .fold(Cy::zero(), |s, v| s.add(&v))
    }))
}

/// `(ℓ²D_p, |e⟩, L(α), R(β))` with exact entries.
pub fn canonical_strategy(p: usize) -> Result<Strategy<Cy>> {
    let els = cp_elements(p)?;
    let fam = |side| els.iter().map(|ops| ops.iter().map(|x| regular_rep(x, side)).collect()).collect();
    let mut state = vec![Cy::zero(); 2 * p];
    state[0] = Cy::one();
    Ok(Strategy {
        scenario: cp_scenario(),
        mode: Mode::Commuting { dim: 2 * p },
        state,
        alice: fam(Side::Left),
        bob: fam(Side::Right),
    })
}

pub fn cp_prime_scenario() -> Scenario {
    Scenario::symmetric((0..5).map(Label::Int).collect(), (0..3).map(Label::Int).collect()).expect("distinct")
}

fn cp_prime_element(pi: &[[DihedralAlgebraElement; 3]; 3], x: usize, a: usize) -> DihedralAlgebraElement {
    let p = pi[0][0].p;
    match x {
        0 if a < 2 => pi[0][a + 1].clone(),
        1 | 2 if a < 2 => half_sum(x, a, p),
        3 => pi[1][a].clone(),
        4 => pi[2][a].clone(),
        _ => DihedralAlgebraElement::zero(p),
    }
}

/// `𝔇′_p(a,b|x,y) = ⟨v|L(γ)R(δ)|v⟩ / ⟨v|v⟩` with `v = e − π₀^{(0)}`.
pub fn build_cp_prime(p: usize) -> Result<Correlation<Cy>> {
    let pi = idempotents(p)?;
    let v = DihedralAlgebraElement::identity(p).sub(&pi[0][0]);
    let norm2 = v.inner(&v);
    let inv = Cy::from_rational(&norm2.to_rational().expect("norm is rational").recip());
    let left: Vec<Vec<_>> = (0..5).map(|x| (0..3).map(|a| cp_prime_element(&pi, x, a).star().mul(&v)).collect()).collect();
    let right: Vec<Vec<_>> = (0..5).map(|y| (0..3).map(|b| v.mul(&cp_prime_element(&pi, y, b).iota())).collect()).collect();
    Ok(Correlation::from_fn(cp_prime_scenario(), |x, y, a, b| left[x][a].inner(&right[y][b]).mul(&inv)))
}

/// `‖L(e − π₀^{(0)})|e⟩‖²`.
pub fn cp_prime_norm(p: usize) -> Result<Cy> {
    let pi = idempotents(p)?;
    let v = DihedralAlgebraElement::identity(p).sub(&pi[0][0]);
    Ok(v.inner(&v))
}

fn missing(l: &Label) -> Error {
    Error::ScenarioMismatch(format!("question {l} missing"))
}

fn alice_op<'a, T: Scalar>(s: &'a Strategy<T>, q: CpQuestion, a0: usize, a1: usize) -> Result<&'a Mat<T>> {
    let l = q.label();
    let x = s.scenario.qa(&l).ok_or_else(|| missing(&l))?;
    let a = s.scenario.aa(&cp_answers()[answer_index(a0, a1)]).ok_or_else(|| missing(&l))?;
    Ok(&s.alice[x][a])
}

fn bob_op<'a, T: Scalar>(s: &'a Strategy<T>, q: CpQuestion, b0: usize, b1: usize) -> Result<&'a Mat<T>> {
    let l = q.label();
    let y = s.scenario.qb(&l).ok_or_else(|| missing(&l))?;
    let b = s.scenario.ab(&cp_answers()[answer_index(b0, b1)]).ok_or_else(|| missing(&l))?;
    Ok(&s.bob[y][b])
}

/// Extracts a strategy for `𝔇′_p` from a good strategy for `𝔇_p`. Returns
/// the float strategy and `‖(1 − M₀^{(0,0)})|ψ⟩‖²` in the input's scalar type.
///
/// Question 0's family sums to `1 − M₀^{(0,0)}`, which is the identity only on
/// the subspace holding the new state, so evaluate it with
/// [`crate::correlations::induced_correlation`].
pub fn extract_cp_prime_strategy<T: Scalar>(s: &Strategy<T>, tol: f64) -> Result<(Strategy<C>, T)> {
    if !s.is_good(tol) {
        return Err(Error::NotGoodStrategy("a zero-probability outcome has a nonzero projection".into()));
    }
    let m00 = alice_op(s, CpQuestion::Idem(0), 0, 0)?;
    let phi = vec_sub(&s.state, &s.apply_alice(m00, &s.state));
    let norm2 = inner(&phi, &phi);
    let n = norm2.to_complex().re.sqrt();
    if n <= tol {
        return Err(Error::InvariantViolation("(1 − M_0^(0,0))|ψ⟩ vanishes".into()));
    }
    let state: Vec<C> = phi.iter().map(|v| v.to_complex() / n).collect();
    let (da, db) = match s.mode {
        Mode::Tensor { dim_a, dim_b } => (dim_a, dim_b),
        Mode::Commuting { dim } => (dim, dim),
    };
    type Getter<'a, T> = dyn Fn(CpQuestion, usize, usize) -> Result<&'a Mat<T>> + 'a;
    let family = |get: &Getter<'_, T>, d: usize| -> Result<Vec<Vec<Mat<C>>>> {
        let z = Mat::zeros(d, d);
        let mut fam = Vec::new();
        for x in 0..5 {
            let mut ops = Vec::new();
            for a in 0..3 {
                let m = match x {
                    0 if a < 2 => get(CpQuestion::Idem(0), a + 1, 0)?.to_complex(),
                    1 | 2 if a < 2 => get(CpQuestion::T(x), 0, a)?.to_complex(),
                    3 => get(CpQuestion::Idem(1), a, 0)?.to_complex(),
                    4 => get(CpQuestion::Idem(2), a, 0)?.to_complex(),
                    _ => z.clone(),
                };
                ops.push(m);
            }
            fam.push(ops);
        }
        Ok(fam)
    };
    let alice = family(&|q, a0, a1| alice_op(s, q, a0, a1), da)?;
    let bob = family(&|q, b0, b1| bob_op(s, q, b0, b1), db)?;
    Ok((Strategy { scenario: cp_prime_scenario(), mode: s.mode, state, alice, bob }, norm2))
}

/// `|h⟩ ↦ |φ_r(h)⟩` on the left side and `|h⟩ ↦ |φ_r^{−1}(h)⟩` on the right,
/// where `φ_r(t₁t₂) = (t₁t₂)^r` and `φ_r(t₂) = t₂`. The right-side matrix is
/// the action of `U_AU_B` of [`semidirect_witness`] on the `D_p` block.
pub fn automorphism_unitary<T: Scalar>(p: usize, r: usize, side: Side) -> Result<Mat<T>> {
    check_prime(p)?;
    if !is_primitive_root(r as u64, p as u64) {
        return Err(Error::NotPrimitiveRoot { r: r as u64, p: p as u64 });
    }
    let k = match side {
        Side::Left => r,
        Side::Right => mod_inverse(r, p),
    };
    let mut m = Mat::zeros(2 * p, 2 * p);
    for h in DihedralElement::all(p) {
        m.set(h.automorphism(k, p).index(p), h.index(p), T::one());
    }
    Ok(m)
}

fn mod_inverse(r: usize, p: usize) -> usize {
    (1..p).find(|k| r * k % p == 1).expect("r is a unit mod p")
}

/// A strategy for `𝔇_p` together with unitaries meeting every hypothesis of
/// the order-`p` theorem.
///
/// The space is `ℓ²G` for `G = D_p ⋊ ℤ_{p−1}` with `u⁻¹ d u = φ_r(d)`; the
/// measurements are `L(α)`, `R(β)` for the same `α, β ∈ ℂ[D_p]` as in
/// [`canonical_strategy`], `U_A = L(u)`, `U_B = R(u)`, and `|ψ⟩ = |e⟩`. On
/// `ℓ²D_p` alone no such unitaries exist for `r ≢ ±1`.
#[derive(Clone, Debug)]
pub struct SemidirectWitness {
    pub p: usize,
    pub r: usize,
    pub strategy: Strategy<C>,
    pub u_a: Mat<C>,
    pub u_b: Mat<C>,
}

/// `(u^a d)` is stored at index `a·2p + idx(d)`.
fn semidirect_mul(x: (usize, DihedralElement), y: (usize, DihedralElement), p: usize, r: usize) -> (usize, DihedralElement) {
    let rb = crate::minsky::mod_pow(r as u64, y.0 as u64, p as u64) as usize;
    ((x.0 + y.0) % (p - 1), dihedral_mul(x.1.automorphism(rb, p), y.1, p))
}

pub fn semidirect_witness(p: usize, r: usize) -> Result<SemidirectWitness> {
    check_prime(p)?;
    if !is_primitive_root(r as u64, p as u64) {
        return Err(Error::NotPrimitiveRoot { r: r as u64, p: p as u64 });
    }
    let els = cp_elements(p)?;
    let n = 2 * p * (p - 1);
    let idx = |x: (usize, DihedralElement)| x.0 * 2 * p + x.1.index(p);
    let elem = |i: usize| (i / (2 * p), DihedralElement::from_index(i % (2 * p), p));
    let rep = |terms: &[((usize, DihedralElement), C)], side: Side| {
        let mut m = Mat::zeros(n, n);
        for h in 0..n {
            for (g, c) in terms {
                let target = match side {
                    Side::Left => semidirect_mul(*g, elem(h), p, r),
                    Side::Right => {
                        let inv = semidirect_inverse(*g, p, r);
                        semidirect_mul(elem(h), inv, p, r)
                    }
                };
                let v = m.get(idx(target), h) + c;
                m.set(idx(target), h, v);
            }
        }
        m
    };
    let lift = |x: &DihedralAlgebraElement| -> Vec<((usize, DihedralElement), C)> {
        x.support.iter().map(|(g, c)| ((0, *g), c.to_complex())).collect()
    };
    let fam = |side| els.iter().map(|ops| ops.iter().map(|x| rep(&lift(x), side)).collect()).collect();
    let u = [((1 % (p - 1), DihedralElement::identity()), C::new(1.0, 0.0))];
    let mut state = vec![C::new(0.0, 0.0); n];
    state[0] = C::new(1.0, 0.0);
    Ok(SemidirectWitness {
        p,
        r,
        strategy: Strategy {
            scenario: cp_scenario(),
            mode: Mode::Commuting { dim: n },
            state,
            alice: fam(Side::Left),
            bob: fam(Side::Right),
        },
        u_a: rep(&u, Side::Left),
        u_b: rep(&u, Side::Right),
    })
}

fn semidirect_inverse(x: (usize, DihedralElement), p: usize, r: usize) -> (usize, DihedralElement) {
    // (u^a d)^{-1} = d^{-1} u^{-a} = u^{-a} φ^{-a}(d^{-1}).
    let a_inv = (p - 1 - x.0) % (p - 1);
    let k = crate::minsky::mod_pow(r as u64, a_inv as u64, p as u64) as usize;
    (a_inv, x.1.inverse(p).automorphism(k, p))
}

/// `M_t = M_t^{(0,0)} − M_t^{(0,1)}` for `t ∈ {t₁, t₂}`, Alice or Bob.
fn t_observable<T: Scalar>(s: &Strategy<T>, k: usize, side: Side) -> Result<Mat<T>> {
    let get = |a1| match side {
        Side::Left => alice_op(s, CpQuestion::T(k), 0, a1),
        Side::Right => bob_op(s, CpQuestion::T(k), 0, a1),
    };
    Ok(get(0)?.sub(get(1)?))
}

/// `(M_{t₁}M_{t₂})^p |ψ⟩ − |ψ⟩`, in the strategy's own scalar type.
pub fn fcp_conclusion<T: Scalar>(s: &Strategy<T>, p: usize) -> Result<Vec<T>> {
    let (m1, m2) = (t_observable(s, 1, Side::Left)?, t_observable(s, 2, Side::Left)?);
    let mut v = s.state.clone();
    for _ in 0..p {
        v = s.apply_alice(&m1, &s.apply_alice(&m2, &v));
    }
    Ok(vec_sub(&v, &s.state))
}

/// The vectors `ψ₀, …, ψ_p` of the order-`p` argument.
#[derive(Clone, Debug, Serialize)]
pub struct PsiVectors {
    pub vectors: Vec<Vec<C>>,
    /// `+1` if `ψ₁` uses the signs as defined (`+iM₂M₁^{(1,0)} − iM₂M₁^{(0,0)}`),
    /// `−1` for the opposite signs. Chosen by the `ω_p` eigenvalue check.
    pub psi1_sign: i8,
    /// `‖M_{t₁}M_{t₂}ψ₁ − ω_pψ₁‖` for the chosen sign.
    pub psi1_eigen_defect: f64,
}

pub fn omega(p: usize) -> C {
    C::from_polar(1.0, 2.0 * PI / p as f64)
}

pub fn psi_vectors(s: &Strategy<C>, u_a: &Mat<C>, u_b: &Mat<C>, p: usize, r: usize, tol: f64) -> Result<PsiVectors> {
    if !is_primitive_root(r as u64, p as u64) {
        return Err(Error::NotPrimitiveRoot { r: r as u64, p: p as u64 });
    }
    if !s.is_good(tol) {
        return Err(Error::NotGoodStrategy("a zero-probability outcome has a nonzero projection".into()));
    }
    let psi = &s.state;
    let m0 = s.apply_alice(alice_op(s, CpQuestion::Idem(0), 0, 0)?, psi);
    let psi0 = s.apply_alice(alice_op(s, CpQuestion::T(1), 0, 0)?, &m0);
    let psip = s.apply_alice(alice_op(s, CpQuestion::T(1), 0, 1)?, &m0);
    let m2 = alice_op(s, CpQuestion::Idem(2), 0, 0)?.sub(alice_op(s, CpQuestion::Idem(2), 1, 0)?);
    let v00 = s.apply_alice(alice_op(s, CpQuestion::Idem(1), 0, 0)?, psi);
    let v10 = s.apply_alice(alice_op(s, CpQuestion::Idem(1), 1, 0)?, psi);
    let (w00, w10) = (s.apply_alice(&m2, &v00), s.apply_alice(&m2, &v10));
    let mt = t_observable(s, 1, Side::Left)?.mul(&t_observable(s, 2, Side::Left)?);
    let w = omega(p);
    let candidate = |sign: f64| -> Vec<C> {
        let i = C::new(0.0, sign);
        (0..psi.len()).map(|k| 0.5 * (v00[k] + i * w10[k] - i * w00[k] + v10[k])).collect()
    };
    let defect = |v: &Vec<C>| vec_norm(&vec_sub(&s.apply_alice(&mt, v), &vec_scale(v, &w)));
    let (plus, minus) = (candidate(1.0), candidate(-1.0));
    let (dp, dm) = (defect(&plus), defect(&minus));
    let (psi1, sign, eigen) = if dp <= dm { (plus, 1, dp) } else { (minus, -1, dm) };
    let uab = u_a.mul(u_b);
    let mut vectors = vec![Vec::new(); p + 1];
    vectors[0] = psi0;
    vectors[p] = psip;
    let mut v = psi1;
    for k in 0..p - 1 {
        let j = crate::minsky::mod_pow(r as u64, k as u64, p as u64) as usize;
        debug_assert_eq!(discrete_log(r as u64, j as u64, p as u64), Some(k as u64));
        vectors[j] = v.clone();
        v = uab.mul_vec(&v);
    }
    Ok(PsiVectors { vectors, psi1_sign: sign, psi1_eigen_defect: eigen })
}

/// Defects of the six hypotheses and of the conclusion of the order-`p` theorem.
#[derive(Clone, Debug, Serialize)]
pub struct FcpReport {
    /// `[U_AU_B ψ = U_BU_A ψ, U_A N ψ = N U_A ψ, U_B M ψ = M U_B ψ,
    ///   U_AU_B ψ = ψ, (N_{t₁}N_{t₂}) U_B ψ = U_B (N_{t₁}N_{t₂})^r ψ,
    ///   (M_{t₁}M_{t₂}) U_A ψ = U_A (M_{t₁}M_{t₂})^r ψ]`
    pub hypothesis_defects: [f64; 6],
    pub hypotheses_hold: bool,
    /// `‖(M_{t₁}M_{t₂})^p ψ − ψ‖`.
    pub conclusion_defect: f64,
    /// True when the hypotheses hold and the conclusion defect is within tolerance.
    pub conclusion_holds: bool,
    pub tolerance: f64,
}

/// Checks the theorem's hypotheses numerically; `U_A`, `U_B` act on the full space.
pub fn verify_fcp(s: &Strategy<C>, u_a: &Mat<C>, u_b: &Mat<C>, p: usize, r: usize, tol: f64) -> Result<FcpReport> {
    let d = s.dim();
    if u_a.rows() != d || u_b.rows() != d || !u_a.is_square() || !u_b.is_square() {
        return Err(Error::InvariantViolation(format!("unitaries must act on the {d}-dimensional space")));
    }
    let psi = &s.state;
    let dist = |a: &[C], b: &[C]| vec_norm(&vec_sub(a, b));
    let (ua_psi, ub_psi) = (u_a.mul_vec(psi), u_b.mul_vec(psi));
    let uab_psi = u_a.mul_vec(&ub_psi);
    let h1 = dist(&uab_psi, &u_b.mul_vec(&ua_psi));
    let mut h2: f64 = 0.0;
    for ops in &s.bob {
        for n in ops {
            h2 = h2.max(dist(&u_a.mul_vec(&s.apply_bob(n, psi)), &s.apply_bob(n, &ua_psi)));
        }
    }
    let mut h3: f64 = 0.0;
    for ops in &s.alice {
        for m in ops {
            h3 = h3.max(dist(&u_b.mul_vec(&s.apply_alice(m, psi)), &s.apply_alice(m, &ub_psi)));
        }
    }
    let h4 = dist(&uab_psi, psi);
    let nt = t_observable(s, 1, Side::Right)?.mul(&t_observable(s, 2, Side::Right)?);
    let mt = t_observable(s, 1, Side::Left)?.mul(&t_observable(s, 2, Side::Left)?);
    let power = |apply: &dyn Fn(&[C]) -> Vec<C>, k: usize| {
        let mut v = psi.clone();
        for _ in 0..k {
            v = apply(&v);
        }
        v
    };
    let nr = power(&|v| s.apply_bob(&nt, v), r);
    let h5 = dist(&s.apply_bob(&nt, &ub_psi), &u_b.mul_vec(&nr));
    let mr = power(&|v| s.apply_alice(&mt, v), r);
    let h6 = dist(&s.apply_alice(&mt, &ua_psi), &u_a.mul_vec(&mr));
    let hypothesis_defects = [h1, h2, h3, h4, h5, h6];
    let hypotheses_hold = hypothesis_defects.iter().all(|&h| h <= tol);
    let conclusion_defect = vec_norm(&fcp_conclusion(s, p)?);
    Ok(FcpReport {
        hypothesis_defects,
        hypotheses_hold,
        conclusion_defect,
        conclusion_holds: hypotheses_hold && conclusion_defect <= tol,
        tolerance: tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlations::{
        correlation_from_strategy, induced_correlation, is_nonsignalling, is_synchronous, validate,
    };
    use proptest::prelude::*;

    fn el(s: u8, j: usize) -> DihedralElement {
        DihedralElement { s, j }
    }

    /// `t₂^s(t₁t₂)^j` as the affine map `x ↦ (−1)^s (x + j)` on `ℤ_p`, where
    /// `t₁t₂` acts as `x ↦ x + 1` and `t₂` as `x ↦ −x`. Returns `(sign, shift)`.
    fn affine(g: DihedralElement, p: i64) -> (i64, i64) {
        let sign = if g.s == 1 { -1 } else { 1 };
        (sign, (sign * g.j as i64).rem_euclid(p))
    }

    fn compose(f: (i64, i64), g: (i64, i64), p: i64) -> (i64, i64) {
        (f.0 * g.0, (f.0 * g.1 + f.1).rem_euclid(p))
    }

    #[test]
    fn multiplication_rules() {
        let p = 5;
        assert_eq!(dihedral_mul(el(0, 2), el(0, 4), p), el(0, 1));
        assert_eq!(dihedral_mul(el(1, 0), el(1, 0), p), el(0, 0));
        assert_eq!(dihedral_mul(el(0, 1), el(1, 0), p), el(1, p - 1));
        let t1 = DihedralElement::t1(p);
        assert_eq!(dihedral_mul(t1, t1, p), DihedralElement::identity());
        // (t₁t₂)^p = e
        let c = dihedral_mul(t1, DihedralElement::t2(), p);
        assert_eq!(c, el(0, 1));
        let mut x = DihedralElement::identity();
        for _ in 0..p {
            x = dihedral_mul(x, c, p);
        }
        assert_eq!(x, DihedralElement::identity());
    }

    proptest! {
        #[test]
        fn mul_matches_affine_action(s1 in 0u8..2, j1 in 0usize..7, s2 in 0u8..2, j2 in 0usize..7) {
            let p = 7;
            let (a, b) = (el(s1, j1), el(s2, j2));
            let want = compose(affine(a, p as i64), affine(b, p as i64), p as i64);
            prop_assert_eq!(affine(dihedral_mul(a, b, p), p as i64), want);
        }

        #[test]
        fn group_axioms(s1 in 0u8..2, j1 in 0usize..5, s2 in 0u8..2, j2 in 0usize..5, s3 in 0u8..2, j3 in 0usize..5) {
            let p = 5;
            let (a, b, c) = (el(s1, j1), el(s2, j2), el(s3, j3));
            prop_assert_eq!(dihedral_mul(dihedral_mul(a, b, p), c, p), dihedral_mul(a, dihedral_mul(b, c, p), p));
            prop_assert_eq!(dihedral_mul(a, a.inverse(p), p), DihedralElement::identity());
        }
    }

    #[test]
    fn idempotent_identities() {
        for p in [3, 5, 7] {
            let pi = idempotents(p).unwrap();
            let e = DihedralAlgebraElement::identity(p);
            assert_eq!(pi[0][0].coeff(&DihedralElement::identity()), Cy::from_ratio(1, p as i64));
            for row in &pi {
                assert_eq!(row[0].add(&row[1]).add(&row[2]), e);
                for x in row {
                    assert_eq!(x.mul(x), *x, "p = {p}");
                    assert_eq!(x.star(), *x);
                    assert_eq!(x.iota(), *x);
                }
            }
            // π₀^{(a)} are central.
            let t1 = DihedralAlgebraElement::element(DihedralElement::t1(p), p);
            for x in &pi[0] {
                assert_eq!(x.mul(&t1), t1.mul(x));
            }
        }
    }

    #[test]
    fn rejects_bad_p() {
        assert!(idempotents(9).is_err());
        assert!(idempotents(2).is_err());
    }

    #[test]
    fn regular_representation() {
        let p = 5;
        let e = DihedralAlgebraElement::identity(p);
        assert_eq!(regular_rep(&e, Side::Left), Mat::identity(2 * p));
        let pi = idempotents(p).unwrap();
        assert_eq!(regular_rep(&pi[0][1], Side::Left).trace(), Cy::from_integer(4));
        for g in [el(0, 1), el(1, 3)] {
            for h in [el(1, 0), el(0, 2), el(1, 4)] {
                let l = regular_rep(&DihedralAlgebraElement::element(g, p), Side::Left);
                let r = regular_rep(&DihedralAlgebraElement::element(h, p), Side::Right);
                assert_eq!(l.mul(&r), r.mul(&l));
            }
        }
        // L is a homomorphism.
        let (a, b) = (&pi[1][0], &pi[2][1]);
        assert_eq!(
            regular_rep(&a.mul(b), Side::Left),
            regular_rep(a, Side::Left).mul(&regular_rep(b, Side::Left))
        );
        assert_eq!(
            regular_rep(&a.mul(b), Side::Right),
            regular_rep(a, Side::Right).mul(&regular_rep(b, Side::Right))
        );
    }

    fn entry(c: &Correlation<Cy>, a: (usize, usize), b: (usize, usize), x: CpQuestion, y: CpQuestion) -> Cy {
        let ans = cp_answers();
        c.entry(&ans[answer_index(a.0, a.1)], &ans[answer_index(b.0, b.1)], &x.label(), &y.label()).unwrap().clone()
    }

    #[test]
    fn cp_table_values() {
        use CpQuestion::*;
        for p in [5usize, 7] {
            let c = build_cp(p).unwrap();
            let pi = p as i64;
            assert_eq!(entry(&c, (0, 0), (0, 0), Idem(0), Idem(0)), Cy::from_ratio(1, pi));
            assert_eq!(entry(&c, (1, 0), (1, 0), Idem(0), Idem(0)), Cy::from_ratio(2, pi));
            assert_eq!(entry(&c, (2, 0), (2, 0), Idem(0), Idem(0)), Cy::from_ratio(pi - 3, pi));
            assert_eq!(entry(&c, (2, 0), (2, 0), Idem(0), ZeroT(1)), Cy::from_ratio(pi - 3, 2 * pi));
            assert_eq!(entry(&c, (0, 0), (0, 1), Idem(0), ZeroT(1)), Cy::from_ratio(1, 2 * pi));
            // The a₀ = 0 marginal 1/p splits evenly over the two diagonal entries.
            assert_eq!(entry(&c, (0, 0), (0, 0), ZeroT(1), ZeroT(2)), Cy::from_ratio(1, 2 * pi));
            assert_eq!(entry(&c, (0, 1), (0, 1), ZeroT(1), ZeroT(2)), Cy::from_ratio(1, 2 * pi));
            assert_eq!(entry(&c, (0, 1), (0, 0), ZeroT(1), ZeroT(2)), Cy::zero());
            assert_eq!(entry(&c, (0, 0), (1, 0), Idem(2), Idem(1)), Cy::from_ratio(1, 2 * pi));
            assert_eq!(entry(&c, (2, 0), (2, 0), Idem(2), Idem(1)), Cy::from_ratio(pi - 2, pi));
            let pf = p as f64;
            let (c2, s2) = ((PI / (2.0 * pf)).cos().powi(2), (PI / (2.0 * pf)).sin().powi(2));
            let sn = (PI / pf).sin();
            let close = |v: Cy, want: f64| (v.to_complex() - C::new(want, 0.0)).norm() < 1e-12;
            assert!(close(entry(&c, (0, 0), (0, 0), T(1), Idem(1)), c2 / pf));
            assert!(close(entry(&c, (0, 0), (1, 0), T(1), Idem(1)), s2 / pf));
            assert!(close(entry(&c, (0, 0), (0, 0), T(1), Idem(2)), (1.0 - sn) / (2.0 * pf)));
            assert!(close(entry(&c, (0, 1), (0, 0), T(1), Idem(2)), (1.0 + sn) / (2.0 * pf)));
            assert!(close(entry(&c, (0, 0), (0, 0), T(2), Idem(2)), (1.0 + sn) / (2.0 * pf)));
            assert!(close(entry(&c, (0, 1), (1, 0), T(2), Idem(1)), c2 / pf));
            // Exact form: cos²(π/2p) = (1 + cos(π/p))/2.
            let cos_pi_p = cos_odd(0, p as u64);
            let want = Cy::one().add(&cos_pi_p).mul(&Cy::from_ratio(1, 2 * pi));
            assert_eq!(entry(&c, (0, 0), (0, 0), T(1), Idem(1)), want);
        }
    }

    #[test]
    fn cp_is_synchronous_and_valid() {
        let c = build_cp(5).unwrap();
        assert!(validate(&c, 0.0).ok);
        assert!(is_nonsignalling(&c, 0.0).ok);
        assert!(is_synchronous(&c, 0.0).unwrap());
        assert!(c.table().iter().all(|v| v.is_real()));
    }

    #[test]
    fn canonical_strategy_matches_algebra_route() {
        let p = 5;
        let s = canonical_strategy(p).unwrap();
        s.check_invariants(0.0).unwrap();
        let ans = cp_answers();
        let m = &s.alice[3][answer_index(0, 0)];
        let want = regular_rep(&DihedralAlgebraElement::identity(p), Side::Left)
            .add(&regular_rep(&DihedralAlgebraElement::element(DihedralElement::t1(p), p), Side::Left))
            .scale(&Cy::from_ratio(1, 2));
        assert_eq!(*m, want);
        assert_eq!(ans.len(), 6);
        let c = correlation_from_strategy(&s, 0.0).unwrap();
        assert_eq!(c, build_cp(p).unwrap());
        assert_eq!(crate::correlations::synchronous_consistency(&s).unwrap(), 0.0);
        // (t₁t₂)^p = e, so the conclusion holds exactly.
        assert!(fcp_conclusion(&s, p).unwrap().iter().all(Cy::is_zero));
    }

    #[test]
    fn cp_prime_routes_agree() {
        for p in [5usize, 7] {
            assert_eq!(cp_prime_norm(p).unwrap(), Cy::from_ratio(p as i64 - 1, p as i64));
            let exact = build_cp_prime(p).unwrap();
            assert!(validate(&exact, 0.0).ok);
            let s = canonical_strategy(p).unwrap();
            let (sp, norm2) = extract_cp_prime_strategy(&s, 0.0).unwrap();
            assert_eq!(norm2, Cy::from_ratio(p as i64 - 1, p as i64));
            assert!(sp.alice[0][2].is_zero());
            let induced = induced_correlation(&sp);
            assert!(exact.max_abs_diff(&induced).unwrap() < 1e-10, "p = {p}");
        }
    }

    #[test]
    fn extraction_rejects_bad_strategy() {
        let mut s = canonical_strategy(5).unwrap();
        // Give a zero-probability outcome a nonzero projection.
        let mut m = Mat::zeros(10, 10);
        m.set(3, 3, Cy::one());
        s.alice[0][answer_index(0, 1)] = m;
        assert!(matches!(extract_cp_prime_strategy(&s, 0.0), Err(Error::NotGoodStrategy(_))));
    }

    #[test]
    fn automorphism_permutation() {
        let p = 5;
        let u: Mat<Cy> = automorphism_unitary(p, 2, Side::Left).unwrap();
        let col = u.mul_vec(&crate::linalg::basis_vector(2 * p, el(0, 1).index(p)));
        assert_eq!(col, crate::linalg::basis_vector::<Cy>(2 * p, el(0, 2).index(p)));
        for i in 0..2 * p {
            let ones = (0..2 * p).filter(|&j| u.get(i, j).is_one()).count();
            assert_eq!(ones, 1);
        }
        assert!(automorphism_unitary::<Cy>(p, 4, Side::Left).is_err());
        // Left and right permutations are inverse to each other.
        let v: Mat<Cy> = automorphism_unitary(p, 2, Side::Right).unwrap();
        assert_eq!(u.mul(&v), Mat::identity(2 * p));
    }

    #[test]
    fn witness_satisfies_theorem() {
        let (p, r) = (5, 2);
        let w = semidirect_witness(p, r).unwrap();
        w.strategy.check_invariants(1e-12).unwrap();
        let c = correlation_from_strategy(&w.strategy, 1e-12).unwrap();
        assert!(c.max_abs_diff(&build_cp(p).unwrap()).unwrap() < 1e-12);
        let rep = verify_fcp(&w.strategy, &w.u_a, &w.u_b, p, r, 1e-10).unwrap();
        assert!(rep.hypotheses_hold, "{:?}", rep.hypothesis_defects);
        assert!(rep.conclusion_holds);
        // U_AU_B on the D_p block is the inverse automorphism.
        let uab = w.u_a.mul(&w.u_b);
        let block: Mat<C> = automorphism_unitary(p, r, Side::Right).unwrap();
        for i in 0..2 * p {
            for j in 0..2 * p {
                assert!((uab.get(i, j) - block.get(i, j)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn two_dimensional_unitaries_fail_hypotheses() {
        let (p, r) = (5, 2);
        let s = canonical_strategy(p).unwrap().to_complex();
        let ua: Mat<C> = automorphism_unitary(p, r, Side::Left).unwrap();
        let ub: Mat<C> = automorphism_unitary(p, r, Side::Right).unwrap();
        let rep = verify_fcp(&s, &ua, &ub, p, r, 1e-10).unwrap();
        assert!(rep.hypothesis_defects[3] < 1e-12);
        assert!(!rep.hypotheses_hold);
        assert!(rep.conclusion_defect < 1e-12);
    }

    #[test]
    fn psi_decomposition() {
        for (p, r) in [(5usize, 2usize), (7, 3)] {
            let w = semidirect_witness(p, r).unwrap();
            let s = &w.strategy;
            let pv = psi_vectors(s, &w.u_a, &w.u_b, p, r, 1e-12).unwrap();
            let n2 = |v: &Vec<C>| inner(v, v).re;
            let pf = p as f64;
            assert!((n2(&pv.vectors[0]) - 1.0 / (2.0 * pf)).abs() < 1e-12);
            assert!((n2(&pv.vectors[p]) - 1.0 / (2.0 * pf)).abs() < 1e-12);
            assert!((n2(&pv.vectors[1]) - 1.0 / pf).abs() < 1e-12);
            assert!((inner(&s.state, &pv.vectors[1]) - C::new(1.0 / pf, 0.0)).norm() < 1e-12);
            assert!(pv.psi1_eigen_defect < 1e-9);
            // The proof's expansion signs give the ω_p eigenvector here.
            assert_eq!(pv.psi1_sign, -1);
            let sum = pv.vectors.iter().fold(vec![C::new(0.0, 0.0); s.dim()], |acc, v| crate::linalg::vec_add(&acc, v));
            assert!(vec_norm(&vec_sub(&sum, &s.state)) < 1e-9);
            for i in 0..=p {
                for j in i + 1..=p {
                    assert!(inner(&pv.vectors[i], &pv.vectors[j]).norm() < 1e-9, "({i},{j})");
                }
            }
            let mt = t_observable(s, 1, Side::Left).unwrap().mul(&t_observable(s, 2, Side::Left).unwrap());
            for j in 1..p {
                let v = &pv.vectors[j];
                let want = vec_scale(v, &omega(p).powu(j as u32));
                assert!(vec_norm(&vec_sub(&mt.mul_vec(v), &want)) < 1e-9);
            }
        }
    }

    #[test]
    fn psi_rejects_non_primitive_root() {
        let w = semidirect_witness(5, 2).unwrap();
        let e = psi_vectors(&w.strategy, &w.u_a, &w.u_b, 5, 4, 1e-12);
        assert!(matches!(e, Err(Error::NotPrimitiveRoot { r: 4, p: 5 })));
    }
}
