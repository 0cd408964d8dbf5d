//! A discrete Spencer double complex over the cubical flat torus `T^d`.
//!
//! A `p`-cell is a base vertex `v` in `(Z/N)^d` and a sorted set `S` of `p` axes.
//! Its boundary is `sum_{a in S} (-1)^{pos(a)} [(v + e_a, S \ a) - (v, S \ a)]`.
//! Cochains on `p`-cells valued in `Sym^q(g)` carry bidegree `(p, q)`; the total
//! differential is `D(a x s) = (da x s, (-1)^p a x delta(s))`.

use std::collections::BTreeMap;

use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpencerError};
use crate::kernel::{kernel, KernelBasis};
use crate::lie::{DualVector, LieAlgebra};
use crate::linalg::{self, NullspaceOptions, SparseMatrix};
use crate::spencer::{delta_constrained, GeneratorImages};
use crate::sym::{binomial, check_cap, enumerate_basis, MonomialIndexer, SymElement};
use crate::Q;

#[derive(Clone, Debug)]
pub struct CellComplex {
    pub d: usize,
    pub n: usize,
    /// Axis subsets per degree, in lexicographic order.
    subsets: Vec<Vec<Vec<usize>>>,
    vertices: usize,
}

fn subsets_of(d: usize, p: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, d: usize, p: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == p {
            out.push(cur.clone());
            return;
        }
        for a in start..d {
            cur.push(a);
            rec(a + 1, d, p, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, d, p, &mut Vec::new(), &mut out);
    out
}

impl CellComplex {
    pub fn torus(d: usize, n: usize, cap: u128) -> Result<Self> {
        if d == 0 || n == 0 {
            return Err(SpencerError::Invalid("torus needs d >= 1 and N >= 1".into()));
        }
        let vertices = (n as u128).checked_pow(d as u32).unwrap_or(u128::MAX);
        let largest = (0..=d).map(|p| vertices.saturating_mul(binomial(d as u128, p as u128))).max().unwrap();
        check_cap(&format!("cells of T^{d} with N = {n}"), largest, cap)?;
        Ok(CellComplex {
            d,
            n,
            subsets: (0..=d).map(|p| subsets_of(d, p)).collect(),
            vertices: vertices as usize,
        })
    }

    pub fn cell_count(&self, p: usize) -> usize {
        if p > self.d {
            0
        } else {
            self.vertices * self.subsets[p].len()
        }
    }

    pub fn vertex(&self, v: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.d);
        let mut x = v;
        for _ in 0..self.d {
            out.push(x % self.n);
            x /= self.n;
        }
        out
    }

    fn vertex_index(&self, v: &[usize]) -> usize {
        v.iter().rev().fold(0, |acc, &x| acc * self.n + x)
    }

    /// `(vertex, axes)` of a cell.
    pub fn cell(&self, p: usize, idx: usize) -> (Vec<usize>, &[usize]) {
        let m = self.subsets[p].len();
        (self.vertex(idx / m), &self.subsets[p][idx % m])
    }

    pub fn index(&self, p: usize, v: &[usize], axes: &[usize]) -> usize {
        let s = self.subsets[p].binary_search_by(|x| x.as_slice().cmp(axes)).expect("sorted axis set");
        self.vertex_index(v) * self.subsets[p].len() + s
    }

    /// Boundary of a `p`-cell as `(p-1)`-cells with signs.
    pub fn boundary(&self, p: usize, idx: usize) -> Vec<(usize, i64)> {
        let (v, axes) = self.cell(p, idx);
        let mut acc: BTreeMap<usize, i64> = BTreeMap::new();
        for (pos, &a) in axes.iter().enumerate() {
            let sign = if pos % 2 == 0 { 1 } else { -1 };
            let face: Vec<usize> = axes.iter().copied().filter(|&b| b != a).collect();
            let mut shifted = v.clone();
            shifted[a] = (shifted[a] + 1) % self.n;
            *acc.entry(self.index(p - 1, &shifted, &face)).or_insert(0) += sign;
            *acc.entry(self.index(p - 1, &v, &face)).or_insert(0) -= sign;
        }
        acc.into_iter().filter(|(_, s)| *s != 0).collect()
    }

    /// Coboundary `C^p -> C^{p+1}` as a matrix (rows: `(p+1)`-cells).
    pub fn coboundary_matrix(&self, p: usize) -> SparseMatrix {
        let mut columns: Vec<Vec<(u64, Q)>> = vec![Vec::new(); self.cell_count(p)];
        if p < self.d {
            for s in 0..self.cell_count(p + 1) {
                for (t, sign) in self.boundary(p + 1, s) {
                    columns[t].push((s as u64, Q::from_integer(sign.into())));
                }
            }
        }
        SparseMatrix::from_columns(self.cell_count(p + 1) as u64, columns)
    }

    /// Scalar coboundary of a dense cochain.
    pub fn coboundary_scalar(&self, p: usize, c: &[Q]) -> Vec<Q> {
        (0..self.cell_count(p + 1))
            .map(|s| {
                self.boundary(p + 1, s)
                    .into_iter()
                    .map(|(t, sign)| &c[t] * Q::from_integer(sign.into()))
                    .sum()
            })
            .collect()
    }

    /// Cubical Betti numbers from exact coboundary ranks.
    pub fn betti_numbers(&self, opts: &NullspaceOptions) -> Result<Vec<usize>> {
        let ranks = (0..=self.d)
            .map(|p| linalg::rank(&self.coboundary_matrix(p), opts))
            .collect::<Result<Vec<_>>>()?;
        Ok((0..=self.d)
            .map(|p| self.cell_count(p) - ranks[p] - if p > 0 { ranks[p - 1] } else { 0 })
            .collect())
    }

    /// Standard representative of the axis class `S`: value 1 on every cell of type `S`.
    pub fn axis_cocycle(&self, axes: &[usize]) -> Vec<Q> {
        let p = axes.len();
        let w = Q::one();
        let mut c = vec![Q::zero(); self.cell_count(p)];
        for (i, x) in c.iter_mut().enumerate() {
            if self.cell(p, i).1 == axes {
                *x = w.clone();
            }
        }
        c
    }

    /// Coordinates of the class of a closed scalar `p`-cochain in the basis of axis
    /// classes: pairings with the slice tori through the origin, divided by `N^p`.
    pub fn class_coordinates(&self, p: usize, c: &[Q]) -> Vec<(Vec<usize>, Q)> {
        let scale = Q::from_integer(num_bigint::BigInt::from(self.n).pow(p as u32));
        self.subsets[p]
            .iter()
            .map(|axes| {
                let mut total = Q::zero();
                for (i, x) in c.iter().enumerate() {
                    if x.is_zero() {
                        continue;
                    }
                    let (v, s) = self.cell(p, i);
                    if s == axes.as_slice()
                        && v.iter().enumerate().all(|(b, &vb)| axes.contains(&b) || vb == 0)
                    {
                        total += x;
                    }
                }
                (axes.clone(), total / &scale)
            })
            .collect()
    }

    pub fn axis_sets(&self, p: usize) -> &[Vec<usize>] {
        &self.subsets[p]
    }
}

/// A cochain on `p`-cells with values in `Sym^q(g)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpencerCochain {
    pub p: usize,
    pub q: usize,
    pub values: BTreeMap<usize, SymElement>,
}

impl SpencerCochain {
    pub fn zero(p: usize, q: usize) -> Self {
        SpencerCochain {
            p,
            q,
            values: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, cell: usize, s: SymElement) -> Result<()> {
        if s.degree() != self.q {
            return Err(SpencerError::DegreeMismatch {
                expected: self.q,
                found: s.degree(),
            });
        }
        if !s.is_zero() {
            self.values.insert(cell, s);
        }
        Ok(())
    }

    /// `alpha x s` for a scalar cochain `alpha`.
    pub fn tensor(p: usize, alpha: &[Q], s: &SymElement) -> Self {
        let mut c = SpencerCochain::zero(p, s.degree());
        if !s.is_zero() {
            for (i, a) in alpha.iter().enumerate() {
                if !a.is_zero() {
                    c.values.insert(i, s.scaled(a));
                }
            }
        }
        c
    }

    pub fn is_zero(&self) -> bool {
        self.values.values().all(|s| s.is_zero())
    }
}

/// Cell-wise coboundary, algebra part untouched.
pub fn coboundary(cx: &CellComplex, c: &SpencerCochain) -> Result<SpencerCochain> {
    if c.p >= cx.d {
        return Err(SpencerError::Invalid(format!(
            "no coboundary out of degree {} on T^{}",
            c.p, cx.d
        )));
    }
    let mut out = SpencerCochain::zero(c.p + 1, c.q);
    for s in 0..cx.cell_count(c.p + 1) {
        let mut acc: Option<SymElement> = None;
        for (t, sign) in cx.boundary(c.p + 1, s) {
            if let Some(v) = c.values.get(&t) {
                let term = v.scaled(&Q::from_integer(sign.into()));
                acc = Some(match acc {
                    None => term,
                    Some(a) => a.add(&term)?,
                });
            }
        }
        if let Some(a) = acc {
            out.insert(s, a)?;
        }
    }
    Ok(out)
}

/// Both components of the total differential: `(dc, (-1)^p delta(c))`.
pub fn spencer_differential(
    alg: &LieAlgebra,
    cx: &CellComplex,
    c: &SpencerCochain,
    lam: &DualVector,
) -> Result<(SpencerCochain, SpencerCochain)> {
    let form = if c.p < cx.d {
        coboundary(cx, c)?
    } else {
        SpencerCochain::zero(c.p + 1, c.q)
    };
    let images = GeneratorImages::constrained(alg, lam)?;
    let sign = if c.p % 2 == 0 { Q::one() } else { -Q::one() };
    let mut alg_part = SpencerCochain::zero(c.p, c.q + 1);
    for (cell, s) in &c.values {
        let img = if c.q == 0 {
            SymElement::zero(alg, 1)
        } else {
            images.apply(s)
        };
        alg_part.insert(*cell, img.scaled(&sign))?;
    }
    Ok((form, alg_part))
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct CohomologyReport {
    pub torus_dim: usize,
    pub subdivisions: usize,
    pub algebra: String,
    pub k: usize,
    pub kernel_dim: usize,
    pub cell_counts: Vec<usize>,
    pub de_rham: Vec<usize>,
    pub degenerate: Vec<usize>,
    /// `b_p * dim K` per degree.
    pub expected_degenerate: Vec<usize>,
    pub structural_identity_holds: bool,
    /// Rank of the class map from the product classes `[omega_S x s_j]` to
    /// `H^p_dR` copies, per degree.
    pub phi_rank: Vec<usize>,
    pub phi_full_rank: bool,
    pub euler_de_rham: i64,
    pub euler_degenerate: i64,
}

pub fn euler_characteristic(dims: &[usize]) -> i64 {
    dims.iter()
        .enumerate()
        .map(|(p, &x)| if p % 2 == 0 { x as i64 } else { -(x as i64) })
        .sum()
}

/// Coordinates of a kernel element in the reduced kernel basis (its free coordinates).
fn kernel_coordinates(kb: &KernelBasis, indexer: &MonomialIndexer, s: &SymElement) -> Result<Vec<Q>> {
    let v: Vec<(usize, Q)> = s
        .to_coordinates(indexer)
        .into_iter()
        .map(|(r, c)| (r as usize, c))
        .collect();
    if !kb.contains(&v) {
        return Err(SpencerError::Invalid("value outside the kernel".into()));
    }
    let lookup: BTreeMap<usize, &Q> = v.iter().map(|(i, c)| (*i, c)).collect();
    Ok(kb
        .vectors
        .iter()
        .map(|b| {
            let free = b
                .iter()
                .find(|(c, _)| kb.pivots.binary_search(c).is_err())
                .map(|(c, _)| *c)
                .unwrap();
            lookup.get(&free).map(|x| (*x).clone()).unwrap_or_else(Q::zero)
        })
        .collect())
}

/// Scalar component `alpha_j` of a kernel-valued cochain `sum_j alpha_j x s_j`.
fn components(
    cx: &CellComplex,
    kb: &KernelBasis,
    indexer: &MonomialIndexer,
    c: &SpencerCochain,
) -> Result<Vec<Vec<Q>>> {
    let mut out = vec![vec![Q::zero(); cx.cell_count(c.p)]; kb.dim];
    for (cell, s) in &c.values {
        for (j, x) in kernel_coordinates(kb, indexer, s)?.into_iter().enumerate() {
            out[j][*cell] = x;
        }
    }
    Ok(out)
}

/// Class of the `j`-th kernel component of a closed kernel-valued cochain.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct DeRhamClass {
    pub p: usize,
    pub coordinates: Vec<(Vec<usize>, String)>,
}

/// `[sum_j alpha_j x s_j] -> [alpha_j]`, with the class in axis coordinates.
pub fn phi_deg(
    alg: &LieAlgebra,
    cx: &CellComplex,
    kb: &KernelBasis,
    c: &SpencerCochain,
    j: usize,
) -> Result<(Vec<Q>, Vec<(Vec<usize>, Q)>)> {
    if c.q != kb.k {
        return Err(SpencerError::DegreeMismatch {
            expected: kb.k,
            found: c.q,
        });
    }
    if j >= kb.dim {
        return Err(SpencerError::Invalid(format!("kernel index {j} >= dim {}", kb.dim)));
    }
    if c.p < cx.d && !coboundary(cx, c)?.is_zero() {
        return Err(SpencerError::NotClosed);
    }
    let indexer = MonomialIndexer::new(alg.dim, kb.k);
    let comps = components(cx, kb, &indexer, c)?;
    let alpha = comps.into_iter().nth(j).unwrap();
    let coords = cx.class_coordinates(c.p, &alpha);
    Ok((alpha, coords))
}

pub fn class_record(p: usize, coords: &[(Vec<usize>, Q)]) -> DeRhamClass {
    DeRhamClass {
        p,
        coordinates: coords
            .iter()
            .map(|(s, x)| (s.clone(), format!("{}/{}", x.numer(), x.denom())))
            .collect(),
    }
}

/// Cohomology of the degenerate complex `C^p(T^d) x K^k_lam` with differential
/// `d x id`, computed by applying the coboundary to every basis cochain and reading
/// the result in kernel coordinates.
pub fn degenerate_cohomology(
    alg: &LieAlgebra,
    lam: &DualVector,
    k: usize,
    cx: &CellComplex,
    cap: u128,
    opts: &NullspaceOptions,
) -> Result<CohomologyReport> {
    let kb = kernel(&delta_constrained(alg, lam, k, cap)?, opts)?;
    degenerate_cohomology_with(alg, &kb, cx, cap, opts)
}

pub fn degenerate_cohomology_with(
    alg: &LieAlgebra,
    kb: &KernelBasis,
    cx: &CellComplex,
    cap: u128,
    opts: &NullspaceOptions,
) -> Result<CohomologyReport> {
    let kappa = kb.dim;
    let d = cx.d;
    let largest = (0..=d).map(|p| cx.cell_count(p) as u128 * kappa as u128).max().unwrap();
    check_cap("degenerate cochain space", largest, cap)?;
    let de_rham = cx.betti_numbers(opts)?;
    let elements = kb.elements(alg)?;
    let indexer = MonomialIndexer::new(alg.dim, kb.k);

    let mut ranks = Vec::with_capacity(d + 1);
    for p in 0..=d {
        if p == d || kappa == 0 {
            ranks.push(0);
            continue;
        }
        let np = cx.cell_count(p);
        let mut columns = Vec::with_capacity(np * kappa);
        for cell in 0..np {
            for s in &elements {
                let mut c = SpencerCochain::zero(p, kb.k);
                c.insert(cell, s.clone())?;
                let dc = coboundary(cx, &c)?;
                let comps = components(cx, kb, &indexer, &dc)?;
                let mut col = Vec::new();
                for (tcell, _) in dc.values.iter() {
                    for (j, comp) in comps.iter().enumerate() {
                        if !comp[*tcell].is_zero() {
                            col.push(((tcell * kappa + j) as u64, comp[*tcell].clone()));
                        }
                    }
                }
                col.sort_by_key(|(r, _)| *r);
                columns.push(col);
            }
        }
        let m = SparseMatrix::from_columns((cx.cell_count(p + 1) * kappa) as u64, columns);
        ranks.push(linalg::rank(&m, opts)?);
    }
    let degenerate: Vec<usize> = (0..=d)
        .map(|p| cx.cell_count(p) * kappa - ranks[p] - if p > 0 { ranks[p - 1] } else { 0 })
        .collect();
    let expected: Vec<usize> = de_rham.iter().map(|b| b * kappa).collect();

    let mut phi_rank = Vec::with_capacity(d + 1);
    for p in 0..=d {
        let mut rows: Vec<Vec<Q>> = Vec::new();
        for axes in cx.axis_sets(p) {
            let omega = cx.axis_cocycle(axes);
            for s in &elements {
                let c = SpencerCochain::tensor(p, &omega, s);
                let mut row = Vec::new();
                for j in 0..kappa {
                    let (_, coords) = phi_deg(alg, cx, kb, &c, j)?;
                    row.extend(coords.into_iter().map(|(_, x)| x));
                }
                rows.push(row);
            }
        }
        let r = if rows.is_empty() || rows[0].is_empty() {
            0
        } else {
            let mut m = rows;
            linalg::dense_rref(&mut m).len()
        };
        phi_rank.push(r);
    }
    let phi_full_rank = phi_rank.iter().zip(&expected).all(|(r, e)| r == e);

    Ok(CohomologyReport {
        torus_dim: d,
        subdivisions: cx.n,
        algebra: alg.label(),
        k: kb.k,
        kernel_dim: kappa,
        cell_counts: (0..=d).map(|p| cx.cell_count(p)).collect(),
        euler_de_rham: euler_characteristic(&de_rham),
        euler_degenerate: euler_characteristic(&degenerate),
        structural_identity_holds: degenerate == expected,
        de_rham,
        degenerate,
        expected_degenerate: expected,
        phi_rank,
        phi_full_rank,
    })
}

/// Random integer scalar cochain in `[-3, 3]`.
pub fn random_scalar_cochain(cx: &CellComplex, p: usize, seed: u64) -> Vec<Q> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..cx.cell_count(p))
        .map(|_| Q::from_integer(rng.gen_range(-3i64..=3).into()))
        .collect()
}

/// Monomial basis of `Sym^q` for building test cochains.
pub fn sym_basis_elements(alg: &LieAlgebra, q: usize, cap: u128) -> Result<Vec<SymElement>> {
    Ok(enumerate_basis(alg, q, cap)?
        .into_iter()
        .map(|m| SymElement::monomial(alg, m))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sym::DEFAULT_MAX_DIM;

    #[test]
    fn cell_counts_and_boundary_squared() {
        for (d, n) in [(2, 3), (3, 2), (2, 1), (3, 3)] {
            let cx = CellComplex::torus(d, n, DEFAULT_MAX_DIM).unwrap();
            for p in 0..=d {
                assert_eq!(cx.cell_count(p) as u128, (n as u128).pow(d as u32) * binomial(d as u128, p as u128));
            }
            for p in 2..=d {
                for s in 0..cx.cell_count(p) {
                    let mut acc: BTreeMap<usize, i64> = BTreeMap::new();
                    for (t, a) in cx.boundary(p, s) {
                        for (u, b) in cx.boundary(p - 1, t) {
                            *acc.entry(u).or_insert(0) += a * b;
                        }
                    }
                    assert!(acc.values().all(|x| *x == 0));
                }
            }
        }
    }

    #[test]
    fn torus_betti_numbers() {
        let opts = NullspaceOptions::default();
        assert_eq!(CellComplex::torus(2, 3, DEFAULT_MAX_DIM).unwrap().betti_numbers(&opts).unwrap(), vec![1, 2, 1]);
        assert_eq!(CellComplex::torus(3, 2, DEFAULT_MAX_DIM).unwrap().betti_numbers(&opts).unwrap(), vec![1, 3, 3, 1]);
        assert_eq!(CellComplex::torus(1, 4, DEFAULT_MAX_DIM).unwrap().betti_numbers(&opts).unwrap(), vec![1, 1]);
    }

    #[test]
    fn axis_classes() {
        let cx = CellComplex::torus(2, 3, DEFAULT_MAX_DIM).unwrap();
        let w = cx.axis_cocycle(&[1]);
        assert!(cx.coboundary_scalar(1, &w).iter().all(|x| x.is_zero()));
        let coords = cx.class_coordinates(1, &w);
        assert_eq!(coords[0].1, Q::zero());
        assert_eq!(coords[1].1, Q::one());
        let f = random_scalar_cochain(&cx, 0, 7);
        let df = cx.coboundary_scalar(0, &f);
        assert!(cx.class_coordinates(1, &df).iter().all(|(_, x)| x.is_zero()));
    }

    #[test]
    fn euler() {
        assert_eq!(euler_characteristic(&[1, 0, 1]) * 5, 10);
        assert_eq!(euler_characteristic(&[3, 6, 3]), 0);
    }

    #[test]
    fn a1_zero_lambda_on_t2() {
        let g = LieAlgebra::from_label("A1").unwrap();
        let cx = CellComplex::torus(2, 3, DEFAULT_MAX_DIM).unwrap();
        let r = degenerate_cohomology(&g, &DualVector::zero(&g), 1, &cx, DEFAULT_MAX_DIM, &Default::default()).unwrap();
        assert_eq!(r.degenerate, vec![3, 6, 3]);
        assert!(r.structural_identity_holds);
        assert!(r.phi_full_rank);
        assert_eq!(r.euler_degenerate, 0);
    }
}
