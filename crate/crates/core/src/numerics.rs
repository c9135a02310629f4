//! Approximate representations: normalized Hilbert–Schmidt quantities,
//! relator defects, rounding near-measurements to projective measurements,
//! and strategies from representations via the maximally entangled state.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::correlations::{answer_bit, Correlation, Mode, Scenario, Strategy};
use crate::error::{Error, Result};
use crate::linalg::{Mat, Scalar};
use crate::presentations::{BinaryLinearSystem, Presentation};
use crate::word::Word;

/// Default tolerance for unitarity checks.
pub const UNITARY_TOL: f64 = 1e-9;

/// Eigenvalues this close to 1/2 make the threshold ill-conditioned.
pub const SPECTRAL_GAP: f64 = 1e-8;

type C = Complex64;

/// `√(Tr(M†M)/d)`.
pub fn hs_norm<T: Scalar>(m: &Mat<T>) -> f64 {
    let d = m.rows().max(1) as f64;
    (m.entries().iter().map(|x| x.to_complex().norm_sqr()).sum::<f64>() / d).sqrt()
}

/// `Tr(M)/d`.
pub fn normalized_trace<T: Scalar>(m: &Mat<T>) -> C {
    m.trace().to_complex() / m.rows().max(1) as f64
}

/// `Tr(M)/d` in the scalar type of `M`.
pub fn normalized_trace_exact<T: Scalar>(m: &Mat<T>) -> T {
    m.trace().mul(&T::from_ratio(1, m.rows().max(1) as i64))
}

/// Largest singular value.
pub fn op_norm(m: &Mat<C>) -> f64 {
    to_dmatrix(m).singular_values().max()
}

pub fn to_dmatrix(m: &Mat<C>) -> DMatrix<C> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.entries())
}

pub fn from_dmatrix(m: &DMatrix<C>) -> Mat<C> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Serde adapter: row-major complex entries as `[re, im]` decimal strings.
pub mod matrix_format {
    use super::*;
    use serde::{de::Error as _, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &Mat<C>, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[String; 2]>> = (0..m.rows())
            .map(|i| (0..m.cols()).map(|j| { let z = m.get(i, j); [z.re.to_string(), z.im.to_string()] }).collect())
            .collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Mat<C>, D::Error> {
        let rows: Vec<Vec<[String; 2]>> = Vec::deserialize(d)?;
        let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| D::Error::custom(format!("bad number {s:?}: {e}")));
        let mut out = Vec::with_capacity(rows.len());
        for r in &rows {
            if r.len() != rows[0].len() {
                return Err(D::Error::custom("ragged matrix"));
            }
            out.push(r.iter().map(|[re, im]| Ok(C::new(parse(re)?, parse(im)?))).collect::<std::result::Result<Vec<_>, _>>()?);
        }
        Ok(Mat::from_rows(out))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledOperator {
    pub label: String,
    #[serde(with = "matrix_format")]
    pub matrix: Mat<C>,
}

/// Labeled `d × d` complex matrices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFamily")]
pub struct OperatorFamily {
    pub dimension: usize,
    pub operators: Vec<LabeledOperator>,
}

#[derive(Deserialize)]
struct RawFamily {
    dimension: usize,
    operators: Vec<LabeledOperator>,
}

impl TryFrom<RawFamily> for OperatorFamily {
    type Error = Error;
    fn try_from(r: RawFamily) -> Result<Self> {
        OperatorFamily::new(r.dimension, r.operators)
    }
}

impl OperatorFamily {
    pub fn new(dimension: usize, operators: Vec<LabeledOperator>) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        for (i, op) in operators.iter().enumerate() {
            if op.matrix.rows() != dimension || op.matrix.cols() != dimension {
                return Err(Error::InvalidArgument(format!("operator {:?} is not {dimension}×{dimension}", op.label)));
            }
            if operators[..i].iter().any(|o| o.label == op.label) {
                return Err(Error::InvalidArgument(format!("duplicate label {:?}", op.label)));
            }
        }
        Ok(OperatorFamily { dimension, operators })
    }

    /// Labels `"0"`, `"1"`, … in order.
    pub fn from_matrices(matrices: Vec<Mat<C>>) -> Result<Self> {
        let d = matrices.first().map_or(1, |m| m.rows());
        let ops = matrices.into_iter().enumerate().map(|(i, matrix)| LabeledOperator { label: i.to_string(), matrix }).collect();
        Self::new(d, ops)
    }

    pub fn get(&self, label: &str) -> Option<&Mat<C>> {
        self.operators.iter().find(|o| o.label == label).map(|o| &o.matrix)
    }

    pub fn matrices(&self) -> Vec<Mat<C>> {
        self.operators.iter().map(|o| o.matrix.clone()).collect()
    }
}

/// `‖φ(r) − 1‖` per relator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DefectReport {
    pub relator_defects: Vec<f64>,
    pub epsilon: f64,
}

fn eval_word(w: &Word<usize>, images: &[Mat<C>], adjoints: &[Mat<C>], d: usize) -> Mat<C> {
    w.letters.iter().fold(Mat::identity(d), |acc, l| acc.mul(if l.exp > 0 { &images[l.gen] } else { &adjoints[l.gen] }))
}

/// Relator defects of an assignment of unitaries to the generators. A
/// generator is looked up by its presentation name, then by its index.
pub fn approx_defect(pres: &Presentation, assignment: &OperatorFamily) -> Result<DefectReport> {
    pres.validate()?;
    let d = assignment.dimension;
    let mut images = Vec::with_capacity(pres.generators);
    for g in 0..pres.generators {
        let m = assignment
            .get(&pres.name(g))
            .or_else(|| assignment.get(&g.to_string()))
            .ok_or_else(|| Error::InvalidArgument(format!("no operator for generator {}", pres.name(g))))?;
        let defect = m.adjoint().mul(m).max_abs_diff(&Mat::identity(d));
        if defect > UNITARY_TOL {
            return Err(Error::NotUnitary(format!("generator {} is off by {defect:e}", pres.name(g))));
        }
        images.push(m.clone());
    }
    let adjoints: Vec<Mat<C>> = images.iter().map(Mat::adjoint).collect();
    let id = Mat::identity(d);
    let relator_defects: Vec<f64> = pres.relators.iter().map(|r| hs_norm(&eval_word(r, &images, &adjoints, d).sub(&id))).collect();
    let epsilon = relator_defects.iter().copied().fold(0.0, f64::max);
    Ok(DefectReport { relator_defects, epsilon })
}

/// `Δ_pos(1) = 2√2`, `Δ_pos(n+1) = (40n + 3)Δ_pos(n)`.
pub fn delta_pos(n: usize) -> f64 {
    (1..n.max(1)).fold(2.0 * 2f64.sqrt(), |acc, k| acc * (40 * k + 3) as f64)
}

/// `Δ(c, n) = Δ_pos(n)(2c² + 7c + 5)n + 2c + 4`.
pub fn delta(c: f64, n: usize) -> f64 {
    delta_pos(n) * (2.0 * c * c + 7.0 * c + 5.0) * n as f64 + 2.0 * c + 4.0
}

/// The lemma's hypotheses, each in normalized Hilbert–Schmidt norm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NearPvmDefects {
    pub idempotence: f64,
    pub self_adjointness: f64,
    pub orthogonality: f64,
    pub completeness: f64,
    pub max_op_norm: f64,
}

impl NearPvmDefects {
    /// The smallest `ε` the family satisfies.
    pub fn epsilon(&self) -> f64 {
        self.idempotence.max(self.self_adjointness).max(self.orthogonality).max(self.completeness)
    }
}

pub fn near_pvm_defects(family: &[Mat<C>]) -> NearPvmDefects {
    let d = family.first().map_or(1, |m| m.rows());
    let mut out = NearPvmDefects { idempotence: 0.0, self_adjointness: 0.0, orthogonality: 0.0, completeness: 0.0, max_op_norm: 0.0 };
    let mut sum = Mat::zeros(d, d);
    for (i, p) in family.iter().enumerate() {
        out.idempotence = out.idempotence.max(hs_norm(&p.mul(p).sub(p)));
        out.self_adjointness = out.self_adjointness.max(hs_norm(&p.adjoint().sub(p)));
        out.max_op_norm = out.max_op_norm.max(op_norm(p));
        for (j, q) in family.iter().enumerate() {
            if i != j {
                out.orthogonality = out.orthogonality.max(hs_norm(&p.mul(q)));
            }
        }
        sum = sum.add(p);
    }
    out.completeness = hs_norm(&sum.sub(&Mat::identity(d)));
    out
}

/// Largest deviation from `Π² = Π = Π*` and `ΣΠ = 1`, entrywise.
pub fn pvm_defect<T: Scalar>(family: &[Mat<T>]) -> f64 {
    let Some(first) = family.first() else { return 0.0 };
    let d = first.rows();
    let mut sum = Mat::zeros(d, d);
    let mut worst: f64 = 0.0;
    for p in family {
        worst = worst.max(p.mul(p).max_abs_diff(p)).max(p.adjoint().max_abs_diff(p));
        sum = sum.add(p);
    }
    worst.max(sum.max_abs_diff(&Mat::identity(d)))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RoundingReport {
    #[serde(with = "matrix_list")]
    pub projections: Vec<Mat<C>>,
    /// `‖Π_i − P_i‖`.
    pub distances: Vec<f64>,
    pub input: NearPvmDefects,
    pub c: f64,
    /// `Δ(c, n)·ε` for the measured `ε`.
    pub bound: f64,
    pub pvm_defect: f64,
}

mod matrix_list {
    use super::*;
    use serde::{Deserializer, Serializer};

    #[derive(Serialize, Deserialize)]
    struct W(#[serde(with = "matrix_format")] Mat<C>);

    pub fn serialize<S: Serializer>(v: &[Mat<C>], s: S) -> std::result::Result<S::Ok, S::Error> {
        v.iter().map(|m| W(m.clone())).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Mat<C>>, D::Error> {
        Ok(Vec::<W>::deserialize(d)?.into_iter().map(|w| w.0).collect())
    }
}

/// Orthonormal eigenvectors of a Hermitian matrix with eigenvalue `≥ 1/2`.
fn threshold_vectors(h: &DMatrix<C>, index: usize) -> Result<Vec<DVector<C>>> {
    let herm = (h + h.adjoint()) * C::new(0.5, 0.0);
    let eig = SymmetricEigen::new(herm);
    let mut out = Vec::new();
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        if (lam - 0.5).abs() < SPECTRAL_GAP {
            return Err(Error::SpectralGapFailure { index, eigenvalue: lam });
        }
        if lam >= 0.5 {
            out.push(eig.eigenvectors.column(k).into_owned());
        }
    }
    Ok(out)
}

fn projector(vs: &[DVector<C>], d: usize) -> DMatrix<C> {
    vs.iter().fold(DMatrix::zeros(d, d), |acc, v| acc + v * v.adjoint())
}

/// Orthonormalizes `v` against `basis` (two passes); `None` if it vanishes.
fn orthonormalize(v: &DVector<C>, basis: &[DVector<C>]) -> Option<DVector<C>> {
    let mut w = v.clone();
    for _ in 0..2 {
        for b in basis {
            let c = b.dotc(&w);
            w -= b * c;
        }
    }
    let n = w.norm();
    (n > 0.5).then(|| w / C::new(n, 0.0))
}

/// Rounds a near-projective measurement to an exact one: symmetrize,
/// threshold at 1/2, then compress each operator by the complement of the
/// projections already chosen. The last outcome takes the remainder.
pub fn round_to_pvm(family: &[Mat<C>], c: f64) -> Result<RoundingReport> {
    let n = family.len();
    if n == 0 {
        return Err(Error::InvalidArgument("empty family".into()));
    }
    let d = family[0].rows();
    if family.iter().any(|m| m.rows() != d || m.cols() != d) {
        return Err(Error::InvalidArgument("operators must be square of one size".into()));
    }
    if !(c >= 1.0) {
        return Err(Error::InvalidArgument(format!("norm bound c = {c} must be at least 1")));
    }
    let input = near_pvm_defects(family);
    if input.max_op_norm > c * (1.0 + 1e-12) {
        return Err(Error::InvalidArgument(format!("operator norm {} exceeds c = {c}", input.max_op_norm)));
    }
    let mut basis: Vec<DVector<C>> = Vec::new();
    let mut projections = Vec::with_capacity(n);
    for (i, p) in family.iter().enumerate().take(n - 1) {
        let q = to_dmatrix(p);
        let q_prime = projector(&threshold_vectors(&q, i)?, d);
        let comp = DMatrix::identity(d, d) - projector(&basis, d);
        let compressed = &comp * q_prime * &comp;
        let mut chosen = Vec::new();
        for v in threshold_vectors(&compressed, i)? {
            let mut prior = basis.clone();
            prior.extend(chosen.iter().cloned());
            if let Some(w) = orthonormalize(&v, &prior) {
                chosen.push(w);
            }
        }
        projections.push(from_dmatrix(&projector(&chosen, d)));
        basis.extend(chosen);
    }
    // The remainder, as rank-one terms orthogonal to everything chosen.
    let comp = DMatrix::identity(d, d) - projector(&basis, d);
    let mut rest = Vec::new();
    for v in threshold_vectors(&comp, n - 1)? {
        let mut prior = basis.clone();
        prior.extend(rest.iter().cloned());
        if let Some(w) = orthonormalize(&v, &prior) {
            rest.push(w);
        }
    }
    projections.push(from_dmatrix(&projector(&rest, d)));
    let distances = projections.iter().zip(family).map(|(pi, p)| hs_norm(&pi.sub(p))).collect();
    let pvm_defect = pvm_defect(&projections);
    let bound = delta(c, n) * input.epsilon();
    Ok(RoundingReport { projections, distances, input, c, bound, pvm_defect })
}

/// Haar-random unitary from the QR decomposition of a complex Gaussian matrix.
pub fn random_unitary(d: usize, rng: &mut impl Rng) -> Mat<C> {
    let g = DMatrix::from_fn(d, d, |_, _| C::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let phases = DMatrix::from_diagonal(&DVector::from_fn(d, |i, _| {
        let z = r[(i, i)];
        if z.norm() == 0.0 { C::new(1.0, 0.0) } else { z / z.norm() }
    }));
    from_dmatrix(&(q * phases))
}

/// Projective measurement with `n` outcomes: a random unitary conjugating a
/// random partition of the standard basis (some parts may be empty).
pub fn random_pvm(d: usize, n: usize, rng: &mut impl Rng) -> Vec<Mat<C>> {
    let u = to_dmatrix(&random_unitary(d, rng));
    let owner: Vec<usize> = (0..d).map(|_| rng.random_range(0..n)).collect();
    (0..n)
        .map(|a| {
            let cols: Vec<DVector<C>> = (0..d).filter(|&k| owner[k] == a).map(|k| u.column(k).into_owned()).collect();
            from_dmatrix(&projector(&cols, d))
        })
        .collect()
}

/// `M + ε E` with `E` a complex Gaussian matrix of unit normalized
/// Hilbert–Schmidt norm.
pub fn perturb(m: &Mat<C>, eps: f64, rng: &mut impl Rng) -> Mat<C> {
    let d = m.rows();
    let e = Mat::from_fn(d, m.cols(), |_, _| C::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    let e = e.scale(&C::new(eps / hs_norm(&e), 0.0));
    m.add(&e)
}

/// `e^{iδK}` for Hermitian `K`.
pub fn exp_i_hermitian(k: &Mat<C>, delta: f64) -> Mat<C> {
    let eig = SymmetricEigen::new(to_dmatrix(k));
    let v = eig.eigenvectors;
    let phases = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| C::from_polar(1.0, delta * l)));
    from_dmatrix(&(&v * phases * v.adjoint()))
}

fn check_pvms<T: Scalar>(scenario: &Scenario, measurements: &[Vec<Mat<T>>], tol: f64) -> Result<usize> {
    let (nx, _, na, _) = scenario.dims();
    if measurements.len() != nx || measurements.iter().any(|f| f.len() != na) {
        return Err(Error::InvariantViolation(format!("need {nx} families of {na} operators")));
    }
    let d = measurements.first().and_then(|f| f.first()).map_or(1, |m| m.rows());
    for (x, fam) in measurements.iter().enumerate() {
        if fam.iter().any(|m| m.rows() != d || m.cols() != d) {
            return Err(Error::InvariantViolation(format!("question {x}: operators must be {d}×{d}")));
        }
        let defect = pvm_defect(fam);
        if defect > tol {
            return Err(Error::InvariantViolation(format!("question {x}: projective-measurement defect {defect:e}")));
        }
    }
    Ok(d)
}

/// Tensor strategy on `ℂ^d ⊗ ℂ^d`: `|ψ⟩ = d^{-1/2} Σ|i⟩|i⟩`, Alice measures
/// `M_x^a`, Bob measures `(M_y^b)^T`.
pub fn strategy_from_rep<T: Scalar>(scenario: &Scenario, measurements: &[Vec<Mat<T>>], tol: f64) -> Result<Strategy<C>> {
    if !scenario.is_symmetric() {
        return Err(Error::ScenarioMismatch("strategy_from_rep needs a symmetric scenario".into()));
    }
    let d = check_pvms(scenario, measurements, tol)?;
    let amp = C::new(1.0 / (d as f64).sqrt(), 0.0);
    let mut state = vec![C::new(0.0, 0.0); d * d];
    for i in 0..d {
        state[i * d + i] = amp;
    }
    let alice: Vec<Vec<Mat<C>>> = measurements.iter().map(|f| f.iter().map(Mat::to_complex).collect()).collect();
    let bob = alice.iter().map(|f| f.iter().map(Mat::transpose).collect()).collect();
    Ok(Strategy { scenario: scenario.clone(), mode: Mode::Tensor { dim_a: d, dim_b: d }, state, alice, bob })
}

/// `C(a,b|x,y) = tTr(M_x^a M_y^b)`, computed directly in `T`.
pub fn trace_correlation<T: Scalar>(scenario: &Scenario, measurements: &[Vec<Mat<T>>], tol: f64) -> Result<Correlation<T>> {
    check_pvms(scenario, measurements, tol)?;
    Ok(Correlation::from_fn(scenario.clone(), |x, y, a, b| normalized_trace_exact(&measurements[x][a].mul(&measurements[y][b]))))
}

/// PVMs for the questions of [`crate::correlations::solution_scenario`]
/// from ±1 observables `X_j`: row `i` answers with the joint eigenprojection
/// `Π_k (1 + (−1)^{a_k} X_k)/2`, variable `j` with `(1 ± X_j)/2` on answers
/// 0 and 1 and zero elsewhere.
pub fn solution_measurements<T: Scalar>(a: &BinaryLinearSystem, observables: &[Mat<T>]) -> Result<Vec<Vec<Mat<T>>>> {
    let kappa = a.kappa().ok_or_else(|| Error::ScenarioMismatch("rows of A differ in size".into()))?;
    if observables.len() != a.n() {
        return Err(Error::InvalidArgument(format!("{} observables for {} variables", observables.len(), a.n())));
    }
    let d = observables.first().map_or(1, |m| m.rows());
    let id = Mat::identity(d);
    let half = T::from_ratio(1, 2);
    let spectral = |x: &Mat<T>, bit: usize| {
        let signed = if bit == 0 { x.clone() } else { x.scale(&T::one().neg()) };
        id.add(&signed).scale(&half)
    };
    let mut out = Vec::new();
    for i in 0..a.m() {
        out.push(
            (0..1usize << kappa)
                .map(|v| a.row(i).iter().enumerate().fold(id.clone(), |acc, (pos, &k)| acc.mul(&spectral(&observables[k], answer_bit(v, pos, kappa)))))
                .collect(),
        );
    }
    for x in observables {
        out.push((0..1usize << kappa).map(|v| if v < 2 { spectral(x, v) } else { Mat::zeros(d, d) }).collect());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlations::{check_perfect, correlation_from_strategy, extract_solution_observables, is_synchronous, solution_scenario};
    use crate::cyclotomic::CyclotomicNumber as Cy;
    use crate::presentations::solution_group;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> C {
        C::new(re, 0.0)
    }

    #[test]
    fn norms_and_traces() {
        let id: Mat<C> = Mat::identity(5);
        assert_eq!(hs_norm(&id), 1.0);
        assert_eq!(normalized_trace(&id), c(1.0));
        let z = Mat::from_rows(vec![vec![c(1.0), c(0.0)], vec![c(0.0), c(-1.0)]]);
        assert_eq!(hs_norm(&z), 1.0);
        assert_eq!(normalized_trace(&z), c(0.0));
        let exact: Mat<Cy> = Mat::identity(3);
        assert_eq!(normalized_trace_exact(&exact), Cy::one());
    }

    #[test]
    fn delta_values() {
        assert_eq!(delta_pos(1), 2.0 * 2f64.sqrt());
        assert!((delta_pos(2) - 43.0 * 2.0 * 2f64.sqrt()).abs() < 1e-12);
        assert!((delta_pos(2) - 121.622).abs() < 1e-3);
        assert_eq!(delta(1.0, 2), delta_pos(2) * 14.0 * 2.0 + 6.0);
        assert!(delta(2.0, 8) > delta(1.0, 8));
    }

    #[test]
    fn matrix_json_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let fam = OperatorFamily::from_matrices(vec![random_unitary(3, &mut rng)]).unwrap();
        let s = serde_json::to_string(&fam).unwrap();
        assert!(s.contains("[\""));
        let back: OperatorFamily = serde_json::from_str(&s).unwrap();
        assert_eq!(back, fam);
        let bad = r#"{"dimension":2,"operators":[{"label":"a","matrix":[[["1","0"]]]}]}"#;
        assert!(serde_json::from_str::<OperatorFamily>(bad).is_err());
    }

    fn z2_squared() -> (BinaryLinearSystem, Vec<Mat<C>>) {
        // Regular representation of ℤ₂²: x₀, x₁ shift the two bits, x₂ both.
        let a = BinaryLinearSystem::new(3, vec![vec![0, 1, 2]]).unwrap();
        let shift = |m: usize| Mat::from_fn(4, 4, |i, j| if i == j ^ m { c(1.0) } else { c(0.0) });
        (a, vec![shift(1), shift(2), shift(3)])
    }

    #[test]
    fn defects() {
        let (a, obs) = z2_squared();
        let pres = solution_group(&a);
        let fam = OperatorFamily::new(4, obs.iter().enumerate().map(|(j, m)| LabeledOperator { label: format!("x{j}"), matrix: m.clone() }).collect()).unwrap();
        assert!(approx_defect(&pres, &fam).unwrap().epsilon < 1e-12);
        let one = Presentation::new(1, vec![Word::gen(0)]).unwrap();
        let id = OperatorFamily::from_matrices(vec![Mat::identity(2)]).unwrap();
        assert_eq!(approx_defect(&one, &id).unwrap().epsilon, 0.0);
        let nonunitary = OperatorFamily::from_matrices(vec![Mat::identity(2).scale(&c(2.0))]).unwrap();
        assert!(matches!(approx_defect(&one, &nonunitary), Err(Error::NotUnitary(_))));
        // Perturbing by e^{iδK} moves the defect linearly in δ.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = random_unitary(4, &mut rng);
        let k = g.add(&g.adjoint()).scale(&c(0.5));
        let mut ratios = Vec::new();
        for delta in [1e-3, 1e-4, 1e-5] {
            let u = exp_i_hermitian(&k, delta);
            let mut fam2 = fam.clone();
            fam2.operators[0].matrix = obs[0].mul(&u);
            ratios.push(approx_defect(&pres, &fam2).unwrap().epsilon / delta);
        }
        assert!(ratios.iter().all(|r| *r > 1e-3 && *r < 10.0), "{ratios:?}");
        assert!((ratios[1] / ratios[2] - 1.0).abs() < 1e-2);
    }

    #[test]
    fn rounding_exact_input_is_fixed() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pvm = random_pvm(6, 3, &mut rng);
        let r = round_to_pvm(&pvm, 1.0).unwrap();
        assert!(r.pvm_defect < 1e-12);
        assert!(r.distances.iter().all(|&d| d < 1e-12), "{:?}", r.distances);
    }

    #[test]
    fn rounding_gross_input_reports() {
        let zeros = vec![Mat::zeros(3, 3); 4];
        let r = round_to_pvm(&zeros, 1.0).unwrap();
        assert!(r.pvm_defect < 1e-12);
        assert_eq!(r.distances[3], 1.0);
        let half = vec![Mat::identity(2).scale(&c(0.5)); 2];
        assert!(matches!(round_to_pvm(&half, 1.0), Err(Error::SpectralGapFailure { index: 0, .. })));
        let big = vec![Mat::identity(2).scale(&c(3.0))];
        assert!(round_to_pvm(&big, 1.0).is_err());
    }

    #[test]
    fn strategy_from_representation() {
        let (a, obs) = z2_squared();
        let sc = solution_scenario(&a).unwrap();
        let pvms = solution_measurements(&a, &obs).unwrap();
        let s = strategy_from_rep(&sc, &pvms, 1e-12).unwrap();
        let corr = correlation_from_strategy(&s, 1e-12).unwrap();
        let traced = trace_correlation(&sc, &pvms, 1e-12).unwrap();
        assert!(corr.max_abs_diff(&traced).unwrap() < 1e-12);
        assert!(check_perfect(&corr, &a, 0.0).unwrap().passes());
        assert!(is_synchronous(&corr, 1e-12).unwrap());
        assert!(extract_solution_observables(&s, &a, 1e-12).unwrap().max_defect() < 1e-12);
        // The exact path agrees.
        let exact: Vec<Mat<Cy>> = obs.iter().map(|m| m.map(|z| Cy::from_integer(z.re as i64))).collect();
        let ex = trace_correlation(&sc, &solution_measurements(&a, &exact).unwrap(), 0.0).unwrap();
        assert!(check_perfect(&ex, &a, 0.0).unwrap().passes());
        assert!(corr.max_abs_diff(&ex).unwrap() < 1e-12);
        // d = 1: deterministic.
        let triv: Vec<Mat<C>> = vec![Mat::identity(1); 3];
        let s1 = strategy_from_rep(&sc, &solution_measurements(&a, &triv).unwrap(), 0.0).unwrap();
        let c1 = correlation_from_strategy(&s1, 0.0).unwrap();
        assert!(c1.table().iter().all(|z| *z == c(0.0) || *z == c(1.0)));
        // Non-involutions are rejected.
        let bad = vec![Mat::identity(2).scale(&c(2.0)); 3];
        assert!(matches!(strategy_from_rep(&sc, &solution_measurements(&a, &bad).unwrap(), 1e-9), Err(Error::InvariantViolation(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn hs_norm_unitarily_invariant(seed in any::<u64>(), d in 1usize..8) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = perturb(&Mat::zeros(d, d), 1.7, &mut rng);
            let u = random_unitary(d, &mut rng);
            let v = random_unitary(d, &mut rng);
            prop_assert!((hs_norm(&u) - 1.0).abs() < 1e-12);
            prop_assert!((hs_norm(&u.mul(&m).mul(&v)) - hs_norm(&m)).abs() < 1e-12);
        }

        #[test]
        fn rounding_within_bound(seed in any::<u64>(), d in 2usize..12) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pvm = random_pvm(d, 4, &mut rng);
            let noisy: Vec<Mat<C>> = pvm.iter().map(|p| perturb(p, 1e-4, &mut rng)).collect();
            let cn = noisy.iter().map(op_norm).fold(1.0, f64::max);
            let r = round_to_pvm(&noisy, cn).unwrap();
            prop_assert!(r.pvm_defect < 1e-12);
            prop_assert!(r.distances.iter().all(|&x| x <= r.bound));
            // The rounding lands back on the original measurement.
            for (a, b) in r.projections.iter().zip(&pvm) {
                prop_assert!(a.max_abs_diff(b) < 1e-2);
            }
        }
    }
}
