//! Exact arithmetic in cyclotomic fields.
//!
//! A [`CyclotomicNumber`] of conductor `N` is stored in the power basis
//! `{ω_N^k : 0 ≤ k < φ(N)}` after reduction modulo the `N`-th cyclotomic
//! polynomial. Numerators share a single positive denominator internally.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, OnceLock, RwLock};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Euler's totient.
pub fn euler_phi(n: u64) -> u64 {
    let mut m = n;
    let mut result = n;
    let mut d = 2;
    while d * d <= m {
        if m % d == 0 {
            while m % d == 0 {
                m /= d;
            }
            result -= result / d;
        }
        d += 1;
    }
    if m > 1 {
        result -= result / m;
    }
    result
}

fn divisors(n: u64) -> Vec<u64> {
    (1..=n).filter(|d| n % d == 0).collect()
}

/// Dense integer polynomial, lowest degree first.
pub type IntPoly = Vec<BigInt>;

fn poly_div_monic(num: &[BigInt], den: &[BigInt]) -> IntPoly {
    let mut rem = num.to_vec();
    let dd = den.len() - 1;
    if rem.len() <= dd {
        return vec![BigInt::zero()];
    }
    let mut quot = vec![BigInt::zero(); rem.len() - dd];
    for i in (0..quot.len()).rev() {
        let c = rem[i + dd].clone();
        if c.is_zero() {
            continue;
        }
        for (j, dj) in den.iter().enumerate() {
            rem[i + j] -= &c * dj;
        }
        quot[i] = c;
    }
    debug_assert!(rem.iter().all(Zero::is_zero), "inexact cyclotomic division");
    quot
}

fn poly_mul(a: &[BigInt], b: &[BigInt]) -> IntPoly {
    let mut out = vec![BigInt::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn poly_cache() -> &'static RwLock<HashMap<u64, Arc<IntPoly>>> {
    static CACHE: OnceLock<RwLock<HashMap<u64, Arc<IntPoly>>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// The `n`-th cyclotomic polynomial, from `x^n − 1 = ∏_{d | n} Φ_d`.
pub fn cyclotomic_polynomial(n: u64) -> IntPoly {
    assert!(n >= 1, "conductor must be positive");
    cyclotomic_polynomial_shared(n).as_ref().clone()
}

fn cyclotomic_polynomial_shared(n: u64) -> Arc<IntPoly> {
    if let Some(p) = poly_cache().read().unwrap().get(&n) {
        return p.clone();
    }
    let mut xn1 = vec![BigInt::zero(); n as usize + 1];
    xn1[0] = BigInt::from(-1);
    xn1[n as usize] = BigInt::one();
    let mut den: IntPoly = vec![BigInt::one()];
    for d in divisors(n) {
        if d < n {
            den = poly_mul(&den, &cyclotomic_polynomial_shared(d));
        }
    }
    let phi = Arc::new(poly_div_monic(&xn1, &den));
    poly_cache().write().unwrap().insert(n, phi.clone());
    phi
}

/// Row `e` holds the power-basis coordinates of `x^e mod Φ_N` for `0 ≤ e < N`.
struct PowerTable {
    phi: usize,
    rows: Vec<Vec<i64>>,
}

fn table_cache() -> &'static RwLock<HashMap<u64, Arc<PowerTable>>> {
    static CACHE: OnceLock<RwLock<HashMap<u64, Arc<PowerTable>>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

fn power_table(n: u64) -> Arc<PowerTable> {
    if let Some(t) = table_cache().read().unwrap().get(&n) {
        return t.clone();
    }
    let poly = cyclotomic_polynomial_shared(n);
    let phi = poly.len() - 1;
    let low: Vec<i64> = poly[..phi]
        .iter()
        .map(|c| c.to_i64().expect("cyclotomic coefficient overflow"))
        .collect();
    let mut rows = Vec::with_capacity(n as usize);
    let mut cur = vec![0i64; phi];
    if phi > 0 {
        cur[0] = 1;
    }
    for _ in 0..n {
        rows.push(cur.clone());
        // multiply by x, then replace x^phi by -(low part of Φ)
        let top = cur[phi - 1];
        for i in (1..phi).rev() {
            cur[i] = cur[i - 1];
        }
        cur[0] = 0;
        if top != 0 {
            for i in 0..phi {
                cur[i] -= top * low[i];
            }
        }
    }
    let table = Arc::new(PowerTable { phi, rows });
    table_cache().write().unwrap().insert(n, table.clone());
    table
}

/// Exact element of `ℚ(ω_N)`.
#[derive(Clone)]
pub struct CyclotomicNumber {
    conductor: u64,
    num: Vec<BigInt>,
    den: BigInt,
}

impl CyclotomicNumber {
    /// Builds from power-basis exponents (any integers, taken mod `n`) with integer
    /// coefficients over a common denominator, reducing modulo `Φ_n`.
    fn from_exponents<I>(n: u64, terms: I, den: BigInt) -> Self
    where
        I: IntoIterator<Item = (u64, BigInt)>,
    {
        let table = power_table(n);
        let mut num = vec![BigInt::zero(); table.phi];
        for (e, c) in terms {
            if c.is_zero() {
                continue;
            }
            let row = &table.rows[(e % n) as usize];
            for (slot, &r) in num.iter_mut().zip(row) {
                if r != 0 {
                    *slot += &c * r;
                }
            }
        }
        let mut out = CyclotomicNumber { conductor: n, num, den };
        out.normalize();
        out
    }

    fn normalize(&mut self) {
        if self.den.is_negative() {
            self.den = -&self.den;
            for c in &mut self.num {
                *c = -&*c;
            }
        }
        let mut g = self.den.clone();
        for c in &self.num {
            if g.is_one() {
                break;
            }
            g = g.gcd(c);
        }
        if self.num.iter().all(Zero::is_zero) {
            self.den = BigInt::one();
            return;
        }
        if !g.is_one() {
            self.den /= &g;
            for c in &mut self.num {
                *c /= &g;
            }
        }
    }

    pub fn zero() -> Self {
        CyclotomicNumber { conductor: 1, num: vec![BigInt::zero()], den: BigInt::one() }
    }

    pub fn one() -> Self {
        Self::from_integer(1)
    }

    pub fn from_integer(v: i64) -> Self {
        CyclotomicNumber { conductor: 1, num: vec![BigInt::from(v)], den: BigInt::one() }
    }

    /// `n / d` as a rational of conductor 1.
    pub fn from_ratio(n: i64, d: i64) -> Self {
        assert!(d != 0, "zero denominator");
        let mut out = CyclotomicNumber { conductor: 1, num: vec![BigInt::from(n)], den: BigInt::from(d) };
        out.normalize();
        out
    }

    pub fn from_rational(q: &BigRational) -> Self {
        let mut out =
            CyclotomicNumber { conductor: 1, num: vec![q.numer().clone()], den: q.denom().clone() };
        out.normalize();
        out
    }

    /// `ω_n^k`.
    pub fn root_of_unity(n: u64, k: i64) -> Self {
        assert!(n >= 1, "conductor must be positive");
        let e = k.rem_euclid(n as i64) as u64;
        Self::from_exponents(n, [(e, BigInt::one())], BigInt::one())
    }

    /// Builds `Σ c_k ω_n^k` from rational coefficients over arbitrary exponents.
    pub fn from_terms(n: u64, terms: &[(i64, BigRational)]) -> Self {
        let den = terms.iter().fold(BigInt::one(), |acc, (_, q)| acc.lcm(q.denom()));
        let ints = terms.iter().map(|(k, q)| {
            let scale = &den / q.denom();
            (k.rem_euclid(n as i64) as u64, q.numer() * scale)
        });
        Self::from_exponents(n, ints, den.clone())
    }

    pub fn conductor(&self) -> u64 {
        self.conductor
    }

    /// Power-basis coordinates as exact rationals; length `φ(conductor)`.
    pub fn coeffs(&self) -> Vec<BigRational> {
        self.num.iter().map(|c| BigRational::new(c.clone(), self.den.clone())).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.num.iter().all(Zero::is_zero)
    }

    pub fn is_one(&self) -> bool {
        self.den.is_one() && self.num[0].is_one() && self.num[1..].iter().all(Zero::is_zero)
    }

    /// The value as a rational, if it lies in `ℚ`.
    pub fn to_rational(&self) -> Option<BigRational> {
        if self.num[1..].iter().all(Zero::is_zero) {
            Some(BigRational::new(self.num[0].clone(), self.den.clone()))
        } else {
            None
        }
    }

    /// Re-expresses the value at conductor `m`, which must be a multiple of the current one.
    pub fn lift(&self, m: u64) -> Self {
        assert!(m % self.conductor == 0, "conductor {} does not divide {}", self.conductor, m);
        if m == self.conductor {
            return self.clone();
        }
        let step = m / self.conductor;
        let terms = self
            .num
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(i, c)| (i as u64 * step, c.clone()));
        Self::from_exponents(m, terms, self.den.clone())
    }

    fn unify(a: &Self, b: &Self) -> (Self, Self) {
        let m = a.conductor.lcm(&b.conductor);
        (a.lift(m), b.lift(m))
    }

    fn add_impl(&self, other: &Self, sign: i64) -> Self {
        let (a, b);
        let (x, y) = if self.conductor == other.conductor {
            (self, other)
        } else {
            let (la, lb) = Self::unify(self, other);
            a = la;
            b = lb;
            (&a, &b)
        };
        let g = x.den.gcd(&y.den);
        let fx = &y.den / &g;
        let fy = &x.den / &g;
        let num = x
            .num
            .iter()
            .zip(&y.num)
            .map(|(p, q)| if sign > 0 { p * &fx + q * &fy } else { p * &fx - q * &fy })
            .collect();
        let mut out = CyclotomicNumber { conductor: x.conductor, num, den: &x.den * &fx };
        out.normalize();
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        self.add_impl(other, 1)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add_impl(other, -1)
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        if self.conductor == 1 {
            return other.scale_int(&self.num[0], &self.den);
        }
        if other.conductor == 1 {
            return self.scale_int(&other.num[0], &other.den);
        }
        let (a, b);
        let (x, y) = if self.conductor == other.conductor {
            (self, other)
        } else {
            let (la, lb) = Self::unify(self, other);
            a = la;
            b = lb;
            (&a, &b)
        };
        let n = x.conductor as usize;
        let mut acc = vec![BigInt::zero(); n];
        for (i, p) in x.num.iter().enumerate() {
            if p.is_zero() {
                continue;
            }
            for (j, q) in y.num.iter().enumerate() {
                if q.is_zero() {
                    continue;
                }
                acc[(i + j) % n] += p * q;
            }
        }
        let terms = acc.into_iter().enumerate().map(|(e, c)| (e as u64, c));
        Self::from_exponents(x.conductor, terms, &x.den * &y.den)
    }

    fn scale_int(&self, n: &BigInt, d: &BigInt) -> Self {
        let mut out = CyclotomicNumber {
            conductor: self.conductor,
            num: self.num.iter().map(|c| c * n).collect(),
            den: &self.den * d,
        };
        out.normalize();
        out
    }

    pub fn scale(&self, q: &BigRational) -> Self {
        self.scale_int(q.numer(), q.denom())
    }

    pub fn neg(&self) -> Self {
        CyclotomicNumber {
            conductor: self.conductor,
            num: self.num.iter().map(|c| -c).collect(),
            den: self.den.clone(),
        }
    }

    /// Complex conjugate, `ω_N^k ↦ ω_N^{−k}`.
    pub fn conjugate(&self) -> Self {
        let n = self.conductor;
        let terms = self
            .num
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(i, c)| ((n - i as u64) % n, c.clone()));
        Self::from_exponents(n, terms, self.den.clone())
    }

    pub fn is_real(&self) -> bool {
        self.conjugate() == *self
    }

    /// `x^k` for `k ≥ 0`.
    pub fn pow(&self, k: u32) -> Self {
        let mut out = Self::one();
        for _ in 0..k {
            out = out.mul(self);
        }
        out
    }

    /// Numeric value as `(re, im)`.
    pub fn to_float(&self) -> (f64, f64) {
        let c = self.to_complex();
        (c.re, c.im)
    }

    pub fn to_complex(&self) -> Complex64 {
        let n = self.conductor as f64;
        let mut re = 0.0;
        let mut im = 0.0;
        for (i, c) in self.num.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let v = BigRational::new(c.clone(), self.den.clone()).to_f64().unwrap_or(f64::NAN);
            let ang = 2.0 * std::f64::consts::PI * i as f64 / n;
            re += v * ang.cos();
            im += v * ang.sin();
        }
        Complex64::new(re, im)
    }
}

/// `cos(2jπ/p) = (ω_p^j + ω_p^{−j})/2`, expressed at conductor `4p`.
pub fn cos_value(j: i64, p: u64) -> CyclotomicNumber {
    let n = 4 * p;
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    CyclotomicNumber::from_terms(n, &[(4 * j, half.clone()), (-4 * j, half)])
}

/// `sin((2j+1)π/p) = (ω_{2p}^{2j+1} − ω_{2p}^{−(2j+1)})·ω_4³/2`, at conductor `4p`.
pub fn sin_value(j: i64, p: u64) -> CyclotomicNumber {
    let n = 4 * p as i64;
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    // ω_{2p}^e = ω_{4p}^{2e}, ω_4^3 = ω_{4p}^{3p}
    let e = 2 * (2 * j + 1);
    let shift = 3 * p as i64;
    CyclotomicNumber::from_terms(n as u64, &[(e + shift, half.clone()), (-e + shift, -half)])
}

impl PartialEq for CyclotomicNumber {
    fn eq(&self, other: &Self) -> bool {
        if self.conductor == other.conductor {
            return self.den == other.den && self.num == other.num;
        }
        let m = self.conductor.lcm(&other.conductor);
        let (a, b) = (self.lift(m), other.lift(m));
        a.den == b.den && a.num == b.num
    }
}

impl Eq for CyclotomicNumber {}

impl Default for CyclotomicNumber {
    fn default() -> Self {
        Self::zero()
    }
}

impl From<i64> for CyclotomicNumber {
    fn from(v: i64) -> Self {
        Self::from_integer(v)
    }
}

impl fmt::Debug for CyclotomicNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for CyclotomicNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, q) in self.coeffs().iter().enumerate() {
            if q.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            if k == 0 {
                write!(f, "{q}")?;
            } else {
                write!(f, "({q})*w{}^{k}", self.conductor)?;
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct CyclotomicJson {
    conductor: u64,
    coeffs: Vec<[IntJson; 2]>,
}

/// Integers serialize as JSON numbers when they fit in `i64`, otherwise as strings.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum IntJson {
    Small(i64),
    Big(String),
}

impl From<&BigInt> for IntJson {
    fn from(v: &BigInt) -> Self {
        match v.to_i64() {
            Some(s) => IntJson::Small(s),
            None => IntJson::Big(v.to_string()),
        }
    }
}

impl IntJson {
    fn to_bigint(&self) -> Result<BigInt, String> {
        match self {
            IntJson::Small(v) => Ok(BigInt::from(*v)),
            IntJson::Big(s) => s.parse().map_err(|_| format!("bad integer {s:?}")),
        }
    }
}

impl Serialize for CyclotomicNumber {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let coeffs = self.coeffs().iter().map(|q| [q.numer().into(), q.denom().into()]).collect();
        CyclotomicJson { conductor: self.conductor, coeffs }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for CyclotomicNumber {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = CyclotomicJson::deserialize(d)?;
        if raw.conductor == 0 {
            return Err(D::Error::custom("conductor must be positive"));
        }
        let phi = euler_phi(raw.conductor) as usize;
        if raw.coeffs.len() != phi {
            return Err(D::Error::custom(format!(
                "expected {phi} coefficients for conductor {}",
                raw.conductor
            )));
        }
        let mut terms = Vec::with_capacity(phi);
        for (k, [n, dn]) in raw.coeffs.iter().enumerate() {
            let n = n.to_bigint().map_err(D::Error::custom)?;
            let dn = dn.to_bigint().map_err(D::Error::custom)?;
            if dn.is_zero() {
                return Err(D::Error::custom("zero denominator"));
            }
            terms.push((k as i64, BigRational::new(n, dn)));
        }
        Ok(CyclotomicNumber::from_terms(raw.conductor, &terms))
    }
}
