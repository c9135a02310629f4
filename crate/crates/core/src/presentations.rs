//! Binary linear systems, their homogeneous solution groups, extended
//! linear-plus-conjugacy presentations, and row normalization.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::word::Word;

/// A homogeneous system `Ax = 0` over ℤ₂, stored as the support of each row.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSystem")]
pub struct BinaryLinearSystem {
    n: usize,
    rows: Vec<Vec<usize>>,
}

#[derive(Deserialize)]
struct RawSystem {
    n: usize,
    rows: Vec<Vec<usize>>,
}

impl TryFrom<RawSystem> for BinaryLinearSystem {
    type Error = Error;
    fn try_from(r: RawSystem) -> Result<Self> {
        BinaryLinearSystem::new(r.n, r.rows)
    }
}

impl BinaryLinearSystem {
    /// Rows are given as column-index lists; they are sorted and deduplicated.
    pub fn new(n: usize, rows: Vec<Vec<usize>>) -> Result<Self> {
        let mut out = Vec::with_capacity(rows.len());
        for (i, row) in rows.into_iter().enumerate() {
            let set: BTreeSet<usize> = row.into_iter().collect();
            if let Some(&j) = set.iter().find(|&&j| j >= n) {
                return Err(Error::IndexError(format!("row {i} names column {j} but n = {n}")));
            }
            out.push(set.into_iter().collect());
        }
        Ok(BinaryLinearSystem { n, rows: out })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.rows
    }

    /// `I_i`, sorted ascending.
    pub fn row(&self, i: usize) -> &[usize] {
        &self.rows[i]
    }

    /// Common row size κ, if every row has the same number of entries.
    pub fn kappa(&self) -> Option<usize> {
        let k = self.rows.first()?.len();
        self.rows.iter().all(|r| r.len() == k).then_some(k)
    }

    /// `φ_i(j)`: position of column `j` within row `i`.
    pub fn phi(&self, i: usize, j: usize) -> Option<usize> {
        self.rows[i].binary_search(&j).ok()
    }

    /// Whether some row contains both `j` and `k`.
    pub fn share_row(&self, j: usize, k: usize) -> bool {
        self.rows.iter().any(|r| r.binary_search(&j).is_ok() && r.binary_search(&k).is_ok())
    }

    /// Whether the assignment `x` (bit `j` = value of `x_j`) solves every row.
    pub fn is_solution(&self, x: &[bool]) -> bool {
        self.rows.iter().all(|r| r.iter().filter(|&&j| x[j]).count() % 2 == 0)
    }
}

/// `⟨S : R⟩` with `S = {0, …, generators − 1}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Presentation {
    pub generators: usize,
    pub relators: Vec<Word<usize>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub names: Vec<String>,
}

impl Presentation {
    pub fn new(generators: usize, relators: Vec<Word<usize>>) -> Result<Self> {
        let p = Presentation { generators, relators, names: Vec::new() };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, r) in self.relators.iter().enumerate() {
            if let Some(l) = r.letters.iter().find(|l| l.gen >= self.generators) {
                return Err(Error::IndexError(format!(
                    "relator {i} uses generator {} of {}",
                    l.gen, self.generators
                )));
            }
        }
        if !self.names.is_empty() && self.names.len() != self.generators {
            return Err(Error::InvalidArgument("name list length differs from generator count".into()));
        }
        Ok(())
    }

    pub fn name(&self, g: usize) -> String {
        self.names.get(g).cloned().unwrap_or_else(|| format!("g{g}"))
    }

    /// Relator rendered with generator names.
    pub fn render(&self, i: usize) -> String {
        self.render_word(&self.relators[i])
    }

    pub fn render_word(&self, w: &Word<usize>) -> String {
        w.map(|&g| self.name(g)).to_string()
    }
}

/// Product of the given generators in order.
fn product_word(gens: &[usize]) -> Word<usize> {
    Word::product(gens.iter().map(|&g| Word::gen(g)).collect::<Vec<_>>().iter())
}

fn solution_relators(a: &BinaryLinearSystem) -> Vec<Word<usize>> {
    let mut rel: Vec<Word<usize>> = (0..a.n).map(|j| Word::power(j, 2)).collect();
    rel.extend(a.rows.iter().map(|r| product_word(r)));
    let mut seen = BTreeSet::new();
    for r in &a.rows {
        for (s, &j) in r.iter().enumerate() {
            for &k in &r[s + 1..] {
                if seen.insert((j, k)) {
                    rel.push(Word::commutator(&Word::gen(j), &Word::gen(k)));
                }
            }
        }
    }
    rel
}

/// Homogeneous solution group `Γ(A)`: involutions, one product relator per
/// row, and commutators of every pair sharing a row (each pair once).
pub fn solution_group(a: &BinaryLinearSystem) -> Presentation {
    Presentation {
        generators: a.n,
        relators: solution_relators(a),
        names: (0..a.n).map(|j| format!("x{j}")).collect(),
    }
}

/// Extended homogeneous-linear-plus-conjugacy data `EΓ(A, C₀, C₁, L)`.
///
/// Generators are `x_0 … x_{n−1}` followed by `y_0 … y_{ℓ−1}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EhlpcPresentation {
    #[serde(flatten)]
    pub a: BinaryLinearSystem,
    #[serde(rename = "C0", default)]
    pub c0: Vec<(usize, usize, usize)>,
    #[serde(rename = "C1", default)]
    pub c1: Vec<(usize, usize, usize)>,
    /// Square `ℓ × ℓ`, zero above the diagonal.
    #[serde(rename = "L", default)]
    pub l: Vec<Vec<u64>>,
}

impl EhlpcPresentation {
    pub fn new(a: BinaryLinearSystem, y_count: usize) -> Self {
        EhlpcPresentation { a, c0: Vec::new(), c1: Vec::new(), l: vec![vec![0; y_count]; y_count] }
    }

    pub fn y_count(&self) -> usize {
        self.l.len()
    }

    /// Appends a fresh `y` generator and returns its index.
    pub fn add_y_generator(&mut self) -> usize {
        for row in &mut self.l {
            row.push(0);
        }
        let l = self.l.len();
        self.l.push(vec![0; l + 1]);
        l
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.a.n;
        let l = self.l.len();
        for &(i, j, k) in &self.c0 {
            if i >= n || j >= n || k >= n {
                return Err(Error::IndexError(format!("C0 triple ({i},{j},{k}) with n = {n}")));
            }
        }
        for &(i, j, k) in &self.c1 {
            if i >= l || j >= n || k >= n {
                return Err(Error::IndexError(format!("C1 triple ({i},{j},{k}) with n = {n}, l = {l}")));
            }
        }
        for (i, row) in self.l.iter().enumerate() {
            if row.len() != l {
                return Err(Error::InvalidArgument("L is not square".into()));
            }
            if let Some(j) = (i + 1..l).find(|&j| row[j] != 0) {
                return Err(Error::TriangularityViolation { yi: i, yj: j });
            }
        }
        Ok(())
    }

    /// Adds `y_i⁻¹ x_j y_i = x_k` to `C₁`.
    pub fn add_conjugacy(&mut self, yi: usize, xj: usize, xk: usize) -> Result<()> {
        if yi >= self.y_count() || xj >= self.a.n || xk >= self.a.n {
            return Err(Error::IndexError(format!("conjugacy ({yi},{xj},{xk}) out of range")));
        }
        self.c1.push((yi, xj, xk));
        Ok(())
    }

    /// Sets `L_{ij} = r`, i.e. `y_i⁻¹ y_j y_i = y_j^r`.
    pub fn add_power_conjugacy(&mut self, yi: usize, yj: usize, r: u64) -> Result<()> {
        if r == 0 {
            return Err(Error::InvalidArgument("power must be positive".into()));
        }
        if yi <= yj {
            return Err(Error::TriangularityViolation { yi, yj });
        }
        if yi >= self.y_count() {
            return Err(Error::IndexError(format!("y{yi} with l = {}", self.y_count())));
        }
        self.l[yi][yj] = r;
        Ok(())
    }
}

/// Full relator list of an EHLPC group.
pub fn ehlpc_presentation(e: &EhlpcPresentation) -> Result<Presentation> {
    e.validate()?;
    let n = e.a.n;
    let y = |i: usize| n + i;
    let mut rel = solution_relators(&e.a);
    for &(i, j, k) in &e.c0 {
        rel.push(product_word(&[i, j, i]).concat(&Word::gen_inv(k)));
    }
    for &(i, j, k) in &e.c1 {
        rel.push(Word::gen(j).conjugate_by(&Word::gen(y(i))).concat(&Word::gen_inv(k)));
    }
    for (i, row) in e.l.iter().enumerate() {
        for (j, &lij) in row.iter().enumerate() {
            if lij > 0 {
                let conj = Word::gen(y(j)).conjugate_by(&Word::gen(y(i)));
                rel.push(conj.concat(&Word::power(y(j), -(lij as i64))));
            }
        }
    }
    let mut names: Vec<String> = (0..n).map(|j| format!("x{j}")).collect();
    names.extend((0..e.l.len()).map(|i| format!("y{i}")));
    Ok(Presentation { generators: n + e.l.len(), relators: rel, names })
}

/// Rewrites `A` so every row has exactly three entries, keeping the original
/// columns and appending auxiliary ones. Returns the new system and the map
/// from old column indices into it (the identity).
///
/// Empty rows impose nothing and are dropped.
pub fn normalize_rows_to_three(a: &BinaryLinearSystem) -> (BinaryLinearSystem, Vec<usize>) {
    let mut n = a.n;
    let mut fresh = || {
        n += 1;
        n - 1
    };
    let mut out: Vec<Vec<usize>> = Vec::new();
    for row in &a.rows {
        match row.len() {
            0 => {}
            1 => {
                let j = row[0];
                let (z1, z2, z3) = (fresh(), fresh(), fresh());
                out.extend([vec![j, z1, z2], vec![j, z1, z3], vec![j, z2, z3], vec![z1, z2, z3]]);
            }
            2 => {
                let (j, k) = (row[0], row[1]);
                let (z1, z2) = (fresh(), fresh());
                out.extend([vec![j, z1, z2], vec![k, z1, z2]]);
            }
            _ => {
                let mut cur = row.clone();
                while cur.len() > 3 {
                    let (j1, j2) = (cur[0], cur[1]);
                    let z3 = fresh();
                    out.push(vec![z3, j1, j2]);
                    for &jt in &cur[2..] {
                        let z1t = fresh();
                        let z2t = fresh();
                        out.push(vec![z1t, j1, jt]);
                        out.push(vec![z2t, j2, jt]);
                    }
                    let mut next = vec![z3];
                    next.extend_from_slice(&cur[2..]);
                    cur = next;
                }
                out.push(cur);
            }
        }
    }
    let map = (0..a.n).collect();
    let sys = BinaryLinearSystem::new(n, out).expect("auxiliary columns are in range");
    (sys, map)
}

/// Whether the ℤ₂ solution sets of `a` and `b`, projected onto `originals`,
/// coincide. Enumerates assignments of `originals` and decides extendability
/// to the remaining columns by elimination.
pub fn restricted_solution_sets_equal(
    a: &BinaryLinearSystem,
    b: &BinaryLinearSystem,
    originals: &[usize],
) -> Result<bool> {
    if originals.len() > 20 {
        return Err(Error::TooLarge { bits: originals.len() });
    }
    for &j in originals {
        if j >= a.n || j >= b.n {
            return Err(Error::IndexError(format!("original column {j} missing from a system")));
        }
    }
    for mask in 0u64..(1u64 << originals.len()) {
        let fixed: Vec<(usize, bool)> =
            originals.iter().enumerate().map(|(t, &j)| (j, mask >> t & 1 == 1)).collect();
        if extendable(a, &fixed) != extendable(b, &fixed) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Whether `Ax = 0` has a solution agreeing with `fixed`.
fn extendable(a: &BinaryLinearSystem, fixed: &[(usize, bool)]) -> bool {
    let mut val: Vec<Option<bool>> = vec![None; a.n];
    for &(j, v) in fixed {
        val[j] = Some(v);
    }
    let free: Vec<usize> = (0..a.n).filter(|&j| val[j].is_none()).collect();
    let mut col = vec![usize::MAX; a.n];
    for (c, &j) in free.iter().enumerate() {
        col[j] = c;
    }
    // Each equation: bitset over free columns plus a right-hand side.
    let words = free.len().div_ceil(64).max(1);
    let mut eqs: Vec<(Vec<u64>, bool)> = a
        .rows
        .iter()
        .map(|r| {
            let mut bits = vec![0u64; words];
            let mut rhs = false;
            for &j in r {
                match val[j] {
                    Some(v) => rhs ^= v,
                    None => bits[col[j] / 64] ^= 1 << (col[j] % 64),
                }
            }
            (bits, rhs)
        })
        .collect();
    let mut pivot_row = 0;
    for c in 0..free.len() {
        let (w, b) = (c / 64, 1u64 << (c % 64));
        let Some(p) = (pivot_row..eqs.len()).find(|&i| eqs[i].0[w] & b != 0) else {
            continue;
        };
        eqs.swap(pivot_row, p);
        let (pb, pr) = eqs[pivot_row].clone();
        for (i, e) in eqs.iter_mut().enumerate() {
            if i != pivot_row && e.0[w] & b != 0 {
                for (x, y) in e.0.iter_mut().zip(&pb) {
                    *x ^= y;
                }
                e.1 ^= pr;
            }
        }
        pivot_row += 1;
    }
    eqs[pivot_row..].iter().all(|(_, rhs)| !rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sys(n: usize, rows: &[&[usize]]) -> BinaryLinearSystem {
        BinaryLinearSystem::new(n, rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    /// Independent oracle: enumerate every assignment of every column.
    fn projected_solutions(a: &BinaryLinearSystem, originals: &[usize]) -> BTreeSet<Vec<bool>> {
        (0u64..1 << a.n())
            .map(|m| (0..a.n()).map(|j| m >> j & 1 == 1).collect::<Vec<_>>())
            .filter(|x| a.is_solution(x))
            .map(|x| originals.iter().map(|&j| x[j]).collect())
            .collect()
    }

    #[test]
    fn solution_group_counts() {
        assert_eq!(solution_group(&sys(3, &[&[0, 1, 2]])).relators.len(), 7);
        assert_eq!(solution_group(&sys(4, &[])).relators.len(), 4);
        let g = solution_group(&sys(4, &[&[0, 1, 2], &[1, 2, 3]]));
        // 4 squares, 2 rows, pairs 01 02 12 13 23.
        assert_eq!(g.relators.len(), 4 + 2 + 5);
        let comm: Vec<String> = (6..11).map(|i| g.render(i)).collect();
        assert_eq!(comm[4], "x2^-1 x3^-1 x2 x3");
    }

    #[test]
    fn ehlpc_relators() {
        let a = sys(3, &[&[0, 1, 2]]);
        let mut e = EhlpcPresentation::new(a.clone(), 2);
        assert_eq!(ehlpc_presentation(&e).unwrap().relators, solution_group(&a).relators);
        e.add_power_conjugacy(1, 0, 2).unwrap();
        let p = ehlpc_presentation(&e).unwrap();
        assert_eq!(p.render(p.relators.len() - 1), "y1^-1 y0 y1 y0^-1 y0^-1");
        e.add_conjugacy(0, 1, 1).unwrap();
        let p = ehlpc_presentation(&e).unwrap();
        assert_eq!(p.relators.len(), 9);
        assert!(p.relators.iter().any(|r| p.render_word(r) == "y0^-1 x1 y0 x1^-1"));
        assert_eq!(e.add_power_conjugacy(0, 1, 2), Err(Error::TriangularityViolation { yi: 0, yj: 1 }));
        assert!(matches!(e.add_conjugacy(5, 0, 0), Err(Error::IndexError(_))));
        e.c0.push((0, 1, 7));
        assert!(matches!(ehlpc_presentation(&e), Err(Error::IndexError(_))));
    }

    #[test]
    fn extension_chain() {
        // The H-style extension: two fresh y generators t, u with three
        // conjugacy relations and one power relation.
        let a = sys(4, &[&[0, 1, 2], &[1, 2, 3]]);
        let mut e = EhlpcPresentation::new(a, 2);
        let t = e.add_y_generator();
        let u = e.add_y_generator();
        e.add_conjugacy(t, 0, 3).unwrap();
        e.add_conjugacy(t, 1, 1).unwrap();
        e.add_conjugacy(t, 2, 2).unwrap();
        e.add_power_conjugacy(u, t, 3).unwrap();
        assert_eq!(e.c1.len(), 3);
        assert_eq!(e.l.iter().flatten().filter(|&&v| v > 0).count(), 1);
        let base = solution_group(&e.a).relators.len();
        assert_eq!(ehlpc_presentation(&e).unwrap().relators.len(), base + 4);
    }

    #[test]
    fn json_shapes() {
        let e: EhlpcPresentation =
            serde_json::from_str(r#"{"n":3,"rows":[[2,0,1]],"C1":[[0,1,1]],"L":[[0]]}"#).unwrap();
        assert_eq!(e.a.row(0), &[0, 1, 2]);
        assert!(serde_json::from_str::<BinaryLinearSystem>(r#"{"n":2,"rows":[[0,5]]}"#).is_err());
    }

    #[test]
    fn normalization_examples() {
        let a = sys(3, &[&[0, 1, 2]]);
        assert_eq!(normalize_rows_to_three(&a).0, a);
        let one = sys(1, &[&[0]]);
        let (b, _) = normalize_rows_to_three(&one);
        assert_eq!((b.n(), b.m()), (4, 4));
        assert_eq!(b.rows(), &[vec![0, 1, 2], vec![0, 1, 3], vec![0, 2, 3], vec![1, 2, 3]]);
        assert!(restricted_solution_sets_equal(&one, &b, &[0]).unwrap());
        let four = sys(4, &[&[0, 1, 2, 3]]);
        let (b, _) = normalize_rows_to_three(&four);
        assert_eq!((b.n(), b.m()), (9, 6));
        assert!(b.rows().iter().all(|r| r.len() == 3));
        assert!(restricted_solution_sets_equal(&four, &b, &[0, 1, 2, 3]).unwrap());
        assert!(!restricted_solution_sets_equal(&four, &sys(4, &[&[0, 1]]), &[0, 1, 2, 3]).unwrap());
    }

    #[test]
    fn too_large() {
        let a = sys(21, &[]);
        let all: Vec<usize> = (0..21).collect();
        assert_eq!(restricted_solution_sets_equal(&a, &a, &all), Err(Error::TooLarge { bits: 21 }));
    }

    fn arb_system() -> impl Strategy<Value = BinaryLinearSystem> {
        (1usize..=6).prop_flat_map(|n| {
            prop::collection::vec(prop::collection::btree_set(0..n, 1..=n), 0..4).prop_map(move |rows| {
                BinaryLinearSystem::new(n, rows.into_iter().map(|r| r.into_iter().collect()).collect())
                    .unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn normalization_preserves_solutions(a in arb_system()) {
            let (b, map) = normalize_rows_to_three(&a);
            prop_assert!(b.rows().iter().all(|r| r.len() == 3));
            prop_assert_eq!(&normalize_rows_to_three(&b).0, &b);
            prop_assert!(restricted_solution_sets_equal(&a, &b, &map).unwrap());
            if b.n() <= 16 {
                prop_assert_eq!(projected_solutions(&a, &map), projected_solutions(&b, &map));
            }
        }

        #[test]
        fn relator_count_formula(a in arb_system()) {
            let mut pairs = BTreeSet::new();
            for r in a.rows() {
                for (s, &j) in r.iter().enumerate() {
                    for &k in &r[s + 1..] {
                        pairs.insert((j, k));
                    }
                }
            }
            prop_assert_eq!(solution_group(&a).relators.len(), a.n() + a.m() + pairs.len());
        }
    }
}
