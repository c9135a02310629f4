//! Dense matrices over exact or floating-point scalars.

use std::fmt::Debug;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cyclotomic::CyclotomicNumber;

/// Field operations shared by the exact and float backends.
pub trait Scalar: Clone + Debug + PartialEq + Send + Sync + 'static {
    fn zero() -> Self;
    fn one() -> Self;
    fn from_ratio(n: i64, d: i64) -> Self;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    fn conj(&self) -> Self;
    fn is_zero(&self) -> bool;
    fn to_complex(&self) -> Complex64;
    /// Exact backends ignore `tol` and test for zero.
    fn is_negligible(&self, tol: f64) -> bool;
    /// Whether the backend decides equalities exactly.
    fn is_exact() -> bool;
}

impl Scalar for CyclotomicNumber {
    fn zero() -> Self {
        CyclotomicNumber::zero()
    }
    fn one() -> Self {
        CyclotomicNumber::one()
    }
    fn from_ratio(n: i64, d: i64) -> Self {
        CyclotomicNumber::from_ratio(n, d)
    }
    fn add(&self, o: &Self) -> Self {
        CyclotomicNumber::add(self, o)
    }
    fn sub(&self, o: &Self) -> Self {
        CyclotomicNumber::sub(self, o)
    }
    fn mul(&self, o: &Self) -> Self {
        CyclotomicNumber::mul(self, o)
    }
    fn neg(&self) -> Self {
        CyclotomicNumber::neg(self)
    }
    fn conj(&self) -> Self {
        self.conjugate()
    }
    fn is_zero(&self) -> bool {
        CyclotomicNumber::is_zero(self)
    }
    fn to_complex(&self) -> Complex64 {
        CyclotomicNumber::to_complex(self)
    }
    fn is_negligible(&self, _tol: f64) -> bool {
        CyclotomicNumber::is_zero(self)
    }
    fn is_exact() -> bool {
        true
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn from_ratio(n: i64, d: i64) -> Self {
        Complex64::new(n as f64 / d as f64, 0.0)
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn conj(&self) -> Self {
        Complex64::conj(self)
    }
    fn is_zero(&self) -> bool {
        self.re == 0.0 && self.im == 0.0
    }
    fn to_complex(&self) -> Complex64 {
        *self
    }
    fn is_negligible(&self, tol: f64) -> bool {
        self.norm() <= tol
    }
    fn is_exact() -> bool {
        false
    }
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_ratio(n: i64, d: i64) -> Self {
        n as f64 / d as f64
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn conj(&self) -> Self {
        *self
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn to_complex(&self) -> Complex64 {
        Complex64::new(*self, 0.0)
    }
    fn is_negligible(&self, tol: f64) -> bool {
        self.abs() <= tol
    }
    fn is_exact() -> bool {
        false
    }
}

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Mat { rows, cols, data }
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged matrix");
        Mat { rows: r, cols: c, data: rows.into_iter().flatten().collect() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &T {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    pub fn entries(&self) -> &[T] {
        &self.data
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(&T) -> U) -> Mat<U> {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(f).collect() }
    }

    pub fn add(&self, o: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (o.rows, o.cols));
        let data = self.data.iter().zip(&o.data).map(|(a, b)| a.add(b)).collect();
        Mat { rows: self.rows, cols: self.cols, data }
    }

    pub fn sub(&self, o: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (o.rows, o.cols));
        let data = self.data.iter().zip(&o.data).map(|(a, b)| a.sub(b)).collect();
        Mat { rows: self.rows, cols: self.cols, data }
    }

    pub fn scale(&self, s: &T) -> Self {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|a| a.mul(s)).collect() }
    }

    pub fn mul(&self, o: &Self) -> Self {
        assert_eq!(self.cols, o.rows, "dimension mismatch");
        let mut out = Self::zeros(self.rows, o.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self.data[i * self.cols + k];
                if a.is_zero() {
                    continue;
                }
                for j in 0..o.cols {
                    let b = &o.data[k * o.cols + j];
                    if b.is_zero() {
                        continue;
                    }
                    let slot = &mut out.data[i * o.cols + j];
                    *slot = slot.add(&a.mul(b));
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len(), "dimension mismatch");
        (0..self.rows)
            .map(|i| {
                let mut acc = T::zero();
                for (k, x) in v.iter().enumerate() {
                    let a = &self.data[i * self.cols + k];
                    if !a.is_zero() && !x.is_zero() {
                        acc = acc.add(&a.mul(x));
                    }
                }
                acc
            })
            .collect()
    }

    pub fn transpose(&self) -> Self {
        Mat::from_fn(self.cols, self.rows, |i, j| self.get(j, i).clone())
    }

    pub fn adjoint(&self) -> Self {
        Mat::from_fn(self.cols, self.rows, |i, j| self.get(j, i).conj())
    }

    pub fn trace(&self) -> T {
        (0..self.rows.min(self.cols)).fold(T::zero(), |acc, i| acc.add(self.get(i, i)))
    }

    pub fn kron(&self, o: &Self) -> Self {
        Mat::from_fn(self.rows * o.rows, self.cols * o.cols, |i, j| {
            self.get(i / o.rows, j / o.cols).mul(o.get(i % o.rows, j % o.cols))
        })
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Scalar::is_zero)
    }

    /// Largest entry modulus of `self − o`.
    pub fn max_abs_diff(&self, o: &Self) -> f64 {
        self.data
            .iter()
            .zip(&o.data)
            .map(|(a, b)| a.sub(b).to_complex().norm())
            .fold(0.0, f64::max)
    }

    /// All entries of `self − o` negligible at `tol` (exactly zero for exact scalars).
    pub fn approx_eq(&self, o: &Self, tol: f64) -> bool {
        (self.rows, self.cols) == (o.rows, o.cols)
            && self.data.iter().zip(&o.data).all(|(a, b)| a.sub(b).is_negligible(tol))
    }

    pub fn to_complex(&self) -> Mat<Complex64> {
        self.map(Scalar::to_complex)
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut out = Mat::identity(self.rows);
        for _ in 0..k {
            out = out.mul(self);
        }
        out
    }
}

/// `⟨u|v⟩`, antilinear in the first argument.
pub fn inner<T: Scalar>(u: &[T], v: &[T]) -> T {
    u.iter().zip(v).fold(T::zero(), |acc, (a, b)| acc.add(&a.conj().mul(b)))
}

pub fn vec_sub<T: Scalar>(u: &[T], v: &[T]) -> Vec<T> {
    u.iter().zip(v).map(|(a, b)| a.sub(b)).collect()
}

pub fn vec_add<T: Scalar>(u: &[T], v: &[T]) -> Vec<T> {
    u.iter().zip(v).map(|(a, b)| a.add(b)).collect()
}

pub fn vec_scale<T: Scalar>(u: &[T], s: &T) -> Vec<T> {
    u.iter().map(|a| a.mul(s)).collect()
}

/// Euclidean norm of a vector, evaluated numerically.
pub fn vec_norm<T: Scalar>(u: &[T]) -> f64 {
    u.iter().map(|a| a.to_complex().norm_sqr()).sum::<f64>().sqrt()
}

pub fn basis_vector<T: Scalar>(n: usize, i: usize) -> Vec<T> {
    let mut v = vec![T::zero(); n];
    v[i] = T::one();
    v
}
