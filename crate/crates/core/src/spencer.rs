//! Classical and constraint-coupled Spencer extension operators as exact sparse
//! matrices `Sym^k(g) -> Sym^{k+1}(g)`.
//!
//! The constrained operator sends a generator `v` to the symmetric bilinear form
//! `(w1, w2) -> 1/2 (lam[w1,[w2,v]] + lam[w2,[w1,v]])`, turned into an element of
//! `Sym^2(g)` by raising both slots with the inverse Killing form, and is extended to
//! monomials by the graded Leibniz rule with the first factor split off:
//! `delta(v1 . rest) = delta(v1) . rest - v1 . delta(rest)`.
//! For a sorted monomial this gives the closed form
//! `delta(m) = sum_j (-1)^j delta(m_j) . (m without m_j)`.

use std::collections::HashMap;

use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpencerError};
use crate::lie::{DualVector, LieAlgebra};
use crate::linalg::{self, NullspaceOptions, SparseMatrix};
use crate::sym::{check_cap, enumerate_basis, sym_dim, Monomial, MonomialIndexer, SymElement};
use crate::Q;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Classical,
    Constrained,
    EquivalentForm,
}

#[derive(Clone, Debug)]
pub struct SpencerMatrix {
    pub variant: Variant,
    pub lambda: Option<DualVector>,
    pub k_from: usize,
    pub k_to: usize,
    pub matrix: SparseMatrix,
}

fn half() -> Q {
    Q::new(1.into(), 2.into())
}

fn check_generator(alg: &LieAlgebra, v: &SymElement) -> Result<()> {
    if v.algebra() != alg.fingerprint() {
        return Err(SpencerError::AlgebraMismatch);
    }
    if v.degree() != 1 {
        return Err(SpencerError::DegreeMismatch {
            expected: 1,
            found: v.degree(),
        });
    }
    Ok(())
}

fn check_lambda(alg: &LieAlgebra, lam: &DualVector) -> Result<()> {
    if lam.algebra != alg.fingerprint() || lam.coefficients.len() != alg.dim {
        return Err(SpencerError::AlgebraMismatch);
    }
    Ok(())
}

fn dense(alg: &LieAlgebra, v: &SymElement) -> Vec<Q> {
    let mut out = vec![Q::zero(); alg.dim];
    for (m, c) in v.terms() {
        out[m.indices()[0] as usize] = c.clone();
    }
    out
}

fn unit(n: usize, i: usize) -> Vec<Q> {
    let mut u = vec![Q::zero(); n];
    u[i] = Q::one();
    u
}

fn pair(lam: &DualVector, x: &[Q]) -> Q {
    lam.coefficients
        .iter()
        .zip(x)
        .filter(|(a, b)| !a.is_zero() && !b.is_zero())
        .map(|(a, b)| a * b)
        .sum()
}

/// The bilinear form `(w1, w2) -> 1/2 (lam[w1,[w2,v]] + lam[w2,[w1,v]])` on basis pairs.
pub fn generator_form(alg: &LieAlgebra, lam: &DualVector, v: &SymElement) -> Result<Vec<Vec<Q>>> {
    check_generator(alg, v)?;
    check_lambda(alg, lam)?;
    let n = alg.dim;
    let v = dense(alg, v);
    let inner: Vec<Vec<Q>> = (0..n).map(|w| alg.bracket_dense(&unit(n, w), &v)).collect();
    let mut form = vec![vec![Q::zero(); n]; n];
    for w1 in 0..n {
        for w2 in 0..n {
            let a = pair(lam, &alg.bracket_dense(&unit(n, w1), &inner[w2]));
            let b = pair(lam, &alg.bracket_dense(&unit(n, w2), &inner[w1]));
            form[w1][w2] = half() * (a + b);
        }
    }
    Ok(form)
}

/// The alternative expression `(w1, w2) -> lam[w2,[w1,v]] + 1/2 lam[[w1,w2],v]`.
pub fn equivalent_form(alg: &LieAlgebra, lam: &DualVector, v: &SymElement) -> Result<Vec<Vec<Q>>> {
    check_generator(alg, v)?;
    check_lambda(alg, lam)?;
    let n = alg.dim;
    let v = dense(alg, v);
    let mut form = vec![vec![Q::zero(); n]; n];
    for w1 in 0..n {
        let w1v = alg.bracket_dense(&unit(n, w1), &v);
        for w2 in 0..n {
            let a = pair(lam, &alg.bracket_dense(&unit(n, w2), &w1v));
            let w12 = alg.bracket_dense(&unit(n, w1), &unit(n, w2));
            let b = pair(lam, &alg.bracket_dense(&w12, &v));
            form[w1][w2] = a + half() * b;
        }
    }
    Ok(form)
}

/// Identify a bilinear form on `g` with an element of `Sym^2(g)` through the inverse
/// Killing form on both slots. The symmetric tensor `T^{ab}` maps to the polynomial
/// `sum_{a,b} T^{ab} e_a e_b`.
pub fn form_to_sym2<'a>(
    alg: &LieAlgebra,
    entries: impl IntoIterator<Item = (usize, usize, &'a Q)>,
) -> SymElement {
    let kinv = alg.killing_inverse();
    let mut t: HashMap<(usize, usize), Q> = HashMap::new();
    for (w1, w2, b) in entries {
        if b.is_zero() {
            continue;
        }
        for (a, x) in &kinv[w1] {
            let xb = x * b;
            for (c, y) in &kinv[w2] {
                let (lo, hi) = if a <= c { (*a, *c) } else { (*c, *a) };
                *t.entry((lo, hi)).or_insert_with(Q::zero) += &xb * y;
            }
        }
    }
    let mut terms: Vec<(Monomial, Q)> = t
        .into_iter()
        .map(|((a, b), c)| (Monomial::new(vec![a as u16, b as u16]), c))
        .collect();
    terms.sort_by(|x, y| x.0.cmp(&y.0));
    SymElement::from_terms(alg, 2, terms)
}

fn dense_form_entries(form: &[Vec<Q>]) -> impl Iterator<Item = (usize, usize, &Q)> {
    form.iter()
        .enumerate()
        .flat_map(|(i, row)| row.iter().enumerate().map(move |(j, x)| (i, j, x)))
}

/// `delta^lam(v)` for a degree-1 element, straight from the defining double brackets.
pub fn delta_on_generator(alg: &LieAlgebra, lam: &DualVector, v: &SymElement) -> Result<SymElement> {
    let form = generator_form(alg, lam, v)?;
    Ok(form_to_sym2(alg, dense_form_entries(&form)))
}

/// `delta^lam(v)` through the alternative expression.
pub fn delta_equivalent(alg: &LieAlgebra, lam: &DualVector, v: &SymElement) -> Result<SymElement> {
    let form = equivalent_form(alg, lam, v)?;
    Ok(form_to_sym2(alg, dense_form_entries(&form)))
}

/// Images of every basis generator under an operator `g -> Sym^2(g)`.
#[derive(Clone, Debug)]
pub struct GeneratorImages {
    pub images: Vec<SymElement>,
    /// Alternating signs by factor position (constrained) or all plus (classical).
    pub graded: bool,
}

impl GeneratorImages {
    /// Generator images of `delta^lam` computed sparsely: with `L[a][c] = lam([e_a, e_c])`
    /// the form is `1/2 (G(w1,w2) + G(w2,w1))`, `G(w1,w2) = sum_c L[w1][c] [w2,v]_c`.
    pub fn constrained(alg: &LieAlgebra, lam: &DualVector) -> Result<Self> {
        check_lambda(alg, lam)?;
        let n = alg.dim;
        let mut lcol: Vec<Vec<(usize, Q)>> = vec![Vec::new(); n];
        if !lam.is_zero() {
            for (a, _) in (0..n).map(|a| (a, ())) {
                for (c, col) in lcol.iter_mut().enumerate() {
                    let x = alg.pair_bracket(lam, a, c);
                    if !x.is_zero() {
                        col.push((a, x));
                    }
                }
            }
        }
        let images = (0..n)
            .into_par_iter()
            .map(|v| {
                let mut g: HashMap<(usize, usize), Q> = HashMap::new();
                for w2 in 0..n {
                    for &(c, coef) in alg.bracket_basis(w2, v) {
                        let coef = Q::from_integer(coef.into());
                        for (w1, l) in &lcol[c] {
                            *g.entry((*w1, w2)).or_insert_with(Q::zero) += &coef * l;
                        }
                    }
                }
                let mut sym: HashMap<(usize, usize), Q> = HashMap::new();
                for ((w1, w2), x) in g {
                    let x = x * half();
                    *sym.entry((w1, w2)).or_insert_with(Q::zero) += &x;
                    *sym.entry((w2, w1)).or_insert_with(Q::zero) += x;
                }
                let mut entries: Vec<(usize, usize, Q)> =
                    sym.into_iter().map(|((a, b), x)| (a, b, x)).collect();
                entries.sort_by_key(|(a, b, _)| (*a, *b));
                form_to_sym2(alg, entries.iter().map(|(a, b, x)| (*a, *b, x)))
            })
            .collect();
        Ok(GeneratorImages {
            images,
            graded: true,
        })
    }

    /// `v -> sum_i e_i . [e_i, v]`, extended as an ungraded derivation.
    pub fn classical(alg: &LieAlgebra) -> Self {
        let n = alg.dim;
        let images = (0..n)
            .map(|v| {
                let mut s = SymElement::zero(alg, 2);
                for i in 0..n {
                    for &(k, c) in alg.bracket_basis(i, v) {
                        s.add_term(
                            Monomial::new(vec![i as u16, k as u16]),
                            Q::from_integer(c.into()),
                        );
                    }
                }
                s
            })
            .collect();
        GeneratorImages {
            images,
            graded: false,
        }
    }

    /// Image of a monomial of degree `k >= 1`.
    pub fn apply_monomial(&self, m: &Monomial) -> SymElement {
        let idx = m.indices();
        let mut out = self.images[0].zero_like(m.degree() + 1);
        for (j, &i) in idx.iter().enumerate() {
            let rest = m.without(j);
            let img = self.images[i as usize].mul_monomial(&rest);
            let sign = if self.graded && j % 2 == 1 { -Q::one() } else { Q::one() };
            out.add_scaled(&img, &sign);
        }
        out
    }

    pub fn apply(&self, s: &SymElement) -> SymElement {
        let mut out = self.images[0].zero_like(s.degree() + 1);
        for (m, c) in s.terms() {
            out.add_scaled(&self.apply_monomial(m), c);
        }
        out
    }

    /// Assemble the matrix on `Sym^k` in enumerated-basis order.
    pub fn assemble(&self, alg: &LieAlgebra, k: usize, cap: u128) -> Result<SparseMatrix> {
        if k == 0 {
            return Err(SpencerError::Invalid("operator degree must be >= 1".into()));
        }
        check_cap(
            &format!("Sym^{} of {} (rows)", k + 1, alg.label()),
            sym_dim(alg.dim, k + 1),
            cap,
        )?;
        let basis = enumerate_basis(alg, k, cap)?;
        let indexer = MonomialIndexer::new(alg.dim, k + 1);
        let columns: Vec<Vec<(u64, Q)>> = basis
            .par_iter()
            .map(|m| self.apply_monomial(m).to_coordinates(&indexer))
            .collect();
        Ok(SparseMatrix {
            nrows: sym_dim(alg.dim, k + 1) as u64,
            ncols: columns.len(),
            columns,
        })
    }
}

pub fn delta_classical(alg: &LieAlgebra, k: usize, cap: u128) -> Result<SpencerMatrix> {
    let matrix = GeneratorImages::classical(alg).assemble(alg, k, cap)?;
    Ok(SpencerMatrix {
        variant: Variant::Classical,
        lambda: None,
        k_from: k,
        k_to: k + 1,
        matrix,
    })
}

pub fn delta_constrained(alg: &LieAlgebra, lam: &DualVector, k: usize, cap: u128) -> Result<SpencerMatrix> {
    check_cap(
        &format!("Sym^{} of {} (rows)", k + 1, alg.label()),
        sym_dim(alg.dim, k + 1),
        cap,
    )?;
    let matrix = GeneratorImages::constrained(alg, lam)?.assemble(alg, k, cap)?;
    Ok(SpencerMatrix {
        variant: Variant::Constrained,
        lambda: Some(lam.clone()),
        k_from: k,
        k_to: k + 1,
        matrix,
    })
}

/// Constrained operator assembled from the alternative generator expression.
pub fn delta_equivalent_matrix(alg: &LieAlgebra, lam: &DualVector, k: usize, cap: u128) -> Result<SpencerMatrix> {
    let images = (0..alg.dim)
        .map(|v| delta_equivalent(alg, lam, &alg.basis_element(v)))
        .collect::<Result<Vec<_>>>()?;
    let matrix = GeneratorImages {
        images,
        graded: true,
    }
    .assemble(alg, k, cap)?;
    Ok(SpencerMatrix {
        variant: Variant::EquivalentForm,
        lambda: Some(lam.clone()),
        k_from: k,
        k_to: k + 1,
        matrix,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct MirrorReport {
    pub k: usize,
    pub rows: u64,
    pub cols: usize,
    pub holds: bool,
    /// Largest |entry| of `delta^{-lam} + delta^{lam}`, as `num/den`.
    pub max_abs_entry: String,
    pub nnz_of_sum: usize,
}

fn q_string(x: &Q) -> String {
    format!("{}/{}", x.numer(), x.denom())
}

/// `delta^{-lam} + delta^{lam} = 0` as exact matrices.
pub fn verify_mirror(alg: &LieAlgebra, lam: &DualVector, k: usize, cap: u128) -> Result<MirrorReport> {
    let plus = delta_constrained(alg, lam, k, cap)?.matrix;
    let minus = delta_constrained(alg, &lam.scaled(&-Q::one()), k, cap)?.matrix;
    let sum = plus.add(&minus)?;
    Ok(MirrorReport {
        k,
        rows: sum.nrows,
        cols: sum.ncols,
        holds: sum.is_zero(),
        max_abs_entry: q_string(&sum.max_abs_entry()),
        nnz_of_sum: sum.nnz(),
    })
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct NilpotencyReport {
    pub k: usize,
    pub rows: u64,
    pub cols: usize,
    pub nnz: usize,
    pub rank: usize,
    pub max_abs_entry: String,
    pub is_zero: bool,
}

/// The composite `delta^{k+1} o delta^k`, computed exactly and summarized. The target
/// `Sym^{k+2}` is addressed by rank and never enumerated.
pub fn composite(alg: &LieAlgebra, lam: &DualVector, k: usize, cap: u128) -> Result<SparseMatrix> {
    let images = GeneratorImages::constrained(alg, lam)?;
    check_cap(
        &format!("Sym^{} of {} (intermediate)", k + 1, alg.label()),
        sym_dim(alg.dim, k + 1),
        cap,
    )?;
    let basis = enumerate_basis(alg, k, cap)?;
    let indexer = MonomialIndexer::new(alg.dim, k + 2);
    let columns: Vec<Vec<(u64, Q)>> = basis
        .par_iter()
        .map(|m| images.apply(&images.apply_monomial(m)).to_coordinates(&indexer))
        .collect();
    Ok(SparseMatrix {
        nrows: sym_dim(alg.dim, k + 2) as u64,
        ncols: columns.len(),
        columns,
    })
}

pub fn nilpotency_audit(
    alg: &LieAlgebra,
    lam: &DualVector,
    k: usize,
    cap: u128,
    opts: &NullspaceOptions,
) -> Result<NilpotencyReport> {
    let c = composite(alg, lam, k, cap)?;
    let rank = linalg::rank(&c, opts)?;
    Ok(NilpotencyReport {
        k,
        rows: c.nrows,
        cols: c.ncols,
        nnz: c.nnz(),
        rank,
        max_abs_entry: q_string(&c.max_abs_entry()),
        is_zero: c.is_zero(),
    })
}

/// Random dual vector with small rational entries. `density` in (0, 1] is the
/// fraction of nonzero slots (at least one slot is always nonzero).
pub fn random_lambda(alg: &LieAlgebra, seed: u64, density: f64) -> DualVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coeffs = vec![Q::zero(); alg.dim];
    let mut any = false;
    for c in coeffs.iter_mut() {
        if rng.gen_bool(density.clamp(0.0, 1.0)) {
            *c = random_nonzero_rational(&mut rng);
            any = true;
        }
    }
    if !any {
        let i = rng.gen_range(0..alg.dim);
        coeffs[i] = random_nonzero_rational(&mut rng);
    }
    DualVector::new(alg, coeffs).expect("length matches")
}

pub fn random_nonzero_rational<R: Rng>(rng: &mut R) -> Q {
    let mut n: i64 = 0;
    while n == 0 {
        n = rng.gen_range(-5..=5);
    }
    let d: i64 = rng.gen_range(1..=4);
    Q::new(n.into(), d.into())
}

/// Parse a dual-vector description:
/// `zero`, `preset:zero`, `preset:cartan<i>` (dual of `h_i`, 1-based),
/// `preset:random:<seed>` (sparse), `preset:dense:<seed>`,
/// or `coeffs:<index>=<num>[/<den>],...` (0-based basis indices).
pub fn parse_lambda(alg: &LieAlgebra, spec: &str) -> Result<DualVector> {
    let bad = || SpencerError::Invalid(format!("unrecognized lambda {spec:?}"));
    let s = spec.trim();
    if s == "zero" || s == "preset:zero" {
        return Ok(DualVector::zero(alg));
    }
    if let Some(rest) = s.strip_prefix("preset:cartan") {
        let i: usize = rest.parse().map_err(|_| bad())?;
        if i == 0 || i > alg.rank {
            return Err(SpencerError::Invalid(format!(
                "cartan preset index {i} outside 1..={}",
                alg.rank
            )));
        }
        return Ok(DualVector::basis(alg, i - 1));
    }
    if let Some(rest) = s.strip_prefix("preset:random:") {
        let seed: u64 = rest.parse().map_err(|_| bad())?;
        let density = (4.0 / alg.dim as f64).min(1.0);
        return Ok(random_lambda(alg, seed, density));
    }
    if let Some(rest) = s.strip_prefix("preset:dense:") {
        let seed: u64 = rest.parse().map_err(|_| bad())?;
        return Ok(random_lambda(alg, seed, 1.0));
    }
    if let Some(rest) = s.strip_prefix("coeffs:") {
        let mut v = DualVector::zero(alg);
        for item in rest.split(',').filter(|x| !x.is_empty()) {
            let (idx, val) = item.split_once('=').ok_or_else(bad)?;
            let idx: usize = idx.trim().parse().map_err(|_| bad())?;
            if idx >= alg.dim {
                return Err(SpencerError::Invalid(format!(
                    "index {idx} outside the {}-dimensional algebra",
                    alg.dim
                )));
            }
            let val: Q = val.trim().parse().map_err(|_| bad())?;
            v.coefficients[idx] = val;
        }
        return Ok(v);
    }
    Err(bad())
}

/// Largest absolute coefficient of an element, for reports.
pub fn max_abs_coefficient(s: &SymElement) -> Q {
    s.terms().map(|(_, c)| c.abs()).max().unwrap_or_else(Q::zero)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sym::DEFAULT_MAX_DIM;

    fn q(n: i64) -> Q {
        Q::from_integer(n.into())
    }

    fn m(v: &[u16]) -> Monomial {
        Monomial::new(v.to_vec())
    }

    // A1 basis: 0 = h, 1 = e, 2 = f

    #[test]
    fn classical_image_of_h() {
        let g = LieAlgebra::from_label("A1").unwrap();
        let c = GeneratorImages::classical(&g);
        let img = c.apply(&g.basis_element(0));
        let expect = SymElement::from_terms(&g, 2, [(m(&[1, 1]), q(-2)), (m(&[2, 2]), q(2))]);
        assert_eq!(img, expect);
    }

    #[test]
    fn generator_forms_on_sl2() {
        let g = LieAlgebra::from_label("A1").unwrap();
        let hstar = DualVector::basis(&g, 0);
        let f = generator_form(&g, &hstar, &g.basis_element(0)).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expect = if (i, j) == (1, 2) || (i, j) == (2, 1) { q(2) } else { q(0) };
                assert_eq!(f[i][j], expect, "({i},{j})");
            }
        }
        let f = generator_form(&g, &hstar, &g.basis_element(1)).unwrap();
        assert_eq!(f[2][0], q(-1));
        assert_eq!(f[0][2], q(-1));
        for (i, j) in [(1, 1), (2, 2), (0, 0), (1, 0), (1, 2)] {
            assert_eq!(f[i][j], q(0), "({i},{j})");
        }
        let zero = DualVector::zero(&g);
        assert!(delta_on_generator(&g, &zero, &g.basis_element(2)).unwrap().is_zero());
    }

    #[test]
    fn sparse_images_match_direct_definition() {
        for label in ["A1", "A2", "G2"] {
            let g = LieAlgebra::from_label(label).unwrap();
            for seed in 0..3 {
                let lam = random_lambda(&g, seed, 0.7);
                let imgs = GeneratorImages::constrained(&g, &lam).unwrap();
                for v in 0..g.dim {
                    let direct = delta_on_generator(&g, &lam, &g.basis_element(v)).unwrap();
                    assert_eq!(imgs.images[v], direct, "{label} v={v}");
                    let eq = delta_equivalent(&g, &lam, &g.basis_element(v)).unwrap();
                    assert_eq!(eq, direct, "{label} v={v}");
                }
            }
        }
    }

    #[test]
    fn leibniz_degree_two() {
        let g = LieAlgebra::from_label("A2").unwrap();
        let lam = random_lambda(&g, 9, 0.5);
        let imgs = GeneratorImages::constrained(&g, &lam).unwrap();
        let (a, b) = (2usize, 5usize);
        let got = imgs.apply_monomial(&m(&[a as u16, b as u16]));
        let va = g.basis_element(a);
        let vb = g.basis_element(b);
        let expect = imgs.images[a]
            .sym_product(&vb)
            .unwrap()
            .add(&va.sym_product(&imgs.images[b]).unwrap().neg())
            .unwrap();
        assert_eq!(got, expect);
    }

    #[test]
    fn zero_lambda_gives_zero_matrix() {
        let g = LieAlgebra::from_label("A2").unwrap();
        let z = DualVector::zero(&g);
        for k in 1..=3 {
            let d = delta_constrained(&g, &z, k, DEFAULT_MAX_DIM).unwrap();
            assert!(d.matrix.is_zero());
            assert_eq!(d.matrix.ncols as u128, sym_dim(8, k));
            assert_eq!(d.matrix.nrows as u128, sym_dim(8, k + 1));
        }
    }

    #[test]
    fn resource_cap_names_dimensions() {
        let g = LieAlgebra::from_label("A2").unwrap();
        let err = delta_classical(&g, 3, 100).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("Sym^4") && msg.contains("330"), "{msg}");
    }

    #[test]
    fn lambda_parsing() {
        let g = LieAlgebra::from_label("A2").unwrap();
        assert_eq!(parse_lambda(&g, "preset:cartan2").unwrap(), DualVector::basis(&g, 1));
        assert!(parse_lambda(&g, "zero").unwrap().is_zero());
        let v = parse_lambda(&g, "coeffs:0=1/2,3=-4").unwrap();
        assert_eq!(v.coefficients[0], Q::new(1.into(), 2.into()));
        assert_eq!(v.coefficients[3], q(-4));
        assert!(parse_lambda(&g, "preset:cartan3").is_err());
        assert!(parse_lambda(&g, "nonsense").is_err());
        assert_eq!(parse_lambda(&g, "preset:random:4").unwrap(), parse_lambda(&g, "preset:random:4").unwrap());
    }
}
