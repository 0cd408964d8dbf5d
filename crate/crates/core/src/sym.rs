//! Monomial bases and exact arithmetic in `Sym^k(g)`.
//!
//! A monomial is a sorted multiset of basis indices; the product of monomials is the
//! sorted union with coefficient 1 (no multinomial normalization).

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpencerError};
use crate::lie::LieAlgebra;
use crate::Q;

pub const DEFAULT_MAX_DIM: u128 = 10_000_000;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Monomial(Vec<u16>);

impl Monomial {
    pub fn new(mut indices: Vec<u16>) -> Self {
        indices.sort_unstable();
        Monomial(indices)
    }

    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn degree(&self) -> usize {
        self.0.len()
    }

    pub fn indices(&self) -> &[u16] {
        &self.0
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let mut out = Vec::with_capacity(self.0.len() + other.0.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            if self.0[i] <= other.0[j] {
                out.push(self.0[i]);
                i += 1;
            } else {
                out.push(other.0[j]);
                j += 1;
            }
        }
        out.extend_from_slice(&self.0[i..]);
        out.extend_from_slice(&other.0[j..]);
        Monomial(out)
    }

    /// The monomial with the factor at `pos` removed.
    pub fn without(&self, pos: usize) -> Monomial {
        let mut v = self.0.clone();
        v.remove(pos);
        Monomial(v)
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|i| i.to_string()).collect();
        write!(f, "[{}]", parts.join(","))
    }
}

/// `C(n + k - 1, k)`, the dimension of `Sym^k` of an `n`-dimensional space.
pub fn sym_dim(n: usize, k: usize) -> u128 {
    binomial((n + k).saturating_sub(1) as u128, k as u128)
}

pub fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) / (i + 1);
    }
    r
}

pub fn check_cap(what: &str, dim: u128, cap: u128) -> Result<()> {
    if dim > cap {
        return Err(SpencerError::ResourceCap {
            what: what.to_string(),
            dim,
            cap,
        });
    }
    Ok(())
}

/// All degree-`k` monomials in lexicographic order of their sorted index lists.
pub fn enumerate_basis(alg: &LieAlgebra, k: usize, cap: u128) -> Result<Vec<Monomial>> {
    enumerate_monomials(alg.dim, k, cap)
}

pub fn enumerate_monomials(n: usize, k: usize, cap: u128) -> Result<Vec<Monomial>> {
    let total = sym_dim(n, k);
    check_cap(&format!("Sym^{k} of a {n}-dimensional space"), total, cap)?;
    let mut out = Vec::with_capacity(total as usize);
    let mut cur: Vec<u16> = vec![0; k];
    if k == 0 {
        out.push(Monomial::one());
        return Ok(out);
    }
    loop {
        out.push(Monomial(cur.clone()));
        // advance to the next non-decreasing sequence
        let mut pos = k;
        while pos > 0 && cur[pos - 1] as usize == n - 1 {
            pos -= 1;
        }
        if pos == 0 {
            break;
        }
        let v = cur[pos - 1] + 1;
        for slot in &mut cur[pos - 1..] {
            *slot = v;
        }
    }
    Ok(out)
}

/// Position of a monomial in the order produced by [`enumerate_monomials`], in O(k).
#[derive(Clone, Debug)]
pub struct MonomialIndexer {
    n: usize,
    k: usize,
    // prefix[r][v] = number of r-multisets drawn from [u, n) summed over u < v
    prefix: Vec<Vec<u128>>,
}

impl MonomialIndexer {
    pub fn new(n: usize, k: usize) -> Self {
        let mut prefix = Vec::with_capacity(k);
        for r in 0..k {
            let mut row = Vec::with_capacity(n + 1);
            let mut acc = 0u128;
            row.push(0);
            for u in 0..n {
                acc += sym_dim(n - u, r);
                row.push(acc);
            }
            prefix.push(row);
        }
        MonomialIndexer { n, k, prefix }
    }

    pub fn len(&self) -> u128 {
        sym_dim(self.n, self.k)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn rank(&self, m: &Monomial) -> u64 {
        debug_assert_eq!(m.degree(), self.k);
        let mut lo = 0usize;
        let mut r = 0u128;
        for (t, &i) in m.0.iter().enumerate() {
            let rem = self.k - t - 1;
            let row = &self.prefix[rem];
            r += row[i as usize] - row[lo];
            lo = i as usize;
        }
        r as u64
    }
}

/// A homogeneous element of `Sym^k(g)` with exact coefficients.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymElement {
    algebra: u64,
    dim: usize,
    degree: usize,
    terms: BTreeMap<Monomial, Q>,
}

impl SymElement {
    pub fn zero(alg: &LieAlgebra, degree: usize) -> Self {
        SymElement {
            algebra: alg.fingerprint(),
            dim: alg.dim,
            degree,
            terms: BTreeMap::new(),
        }
    }

    pub(crate) fn zero_like(&self, degree: usize) -> Self {
        SymElement {
            algebra: self.algebra,
            dim: self.dim,
            degree,
            terms: BTreeMap::new(),
        }
    }

    /// The constant `1` in `Sym^0`.
    pub fn unit(alg: &LieAlgebra) -> Self {
        let mut s = Self::zero(alg, 0);
        s.terms.insert(Monomial::one(), Q::one());
        s
    }

    pub fn generator(alg: &LieAlgebra, i: usize) -> Self {
        Self::monomial(alg, Monomial::new(vec![i as u16]))
    }

    pub fn monomial(alg: &LieAlgebra, m: Monomial) -> Self {
        let mut s = Self::zero(alg, m.degree());
        s.terms.insert(m, Q::one());
        s
    }

    pub fn from_terms(
        alg: &LieAlgebra,
        degree: usize,
        terms: impl IntoIterator<Item = (Monomial, Q)>,
    ) -> Self {
        let mut s = Self::zero(alg, degree);
        for (m, c) in terms {
            assert_eq!(m.degree(), degree, "monomial {m} in a degree-{degree} element");
            s.add_term(m, c);
        }
        s
    }

    /// Degree-1 element from a dense coefficient vector.
    pub fn from_dense(alg: &LieAlgebra, coefficients: &[Q]) -> Self {
        Self::from_terms(
            alg,
            1,
            coefficients
                .iter()
                .enumerate()
                .filter(|(_, c)| !c.is_zero())
                .map(|(i, c)| (Monomial::new(vec![i as u16]), c.clone())),
        )
    }

    pub fn algebra(&self) -> u64 {
        self.algebra
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Q)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, m: &Monomial) -> Q {
        self.terms.get(m).cloned().unwrap_or_else(Q::zero)
    }

    pub fn add_term(&mut self, m: Monomial, c: Q) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.algebra != other.algebra || self.dim != other.dim {
            return Err(SpencerError::AlgebraMismatch);
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        if self.degree != other.degree {
            return Err(SpencerError::DegreeMismatch {
                expected: self.degree,
                found: other.degree,
            });
        }
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn add_scaled(&mut self, other: &Self, c: &Q) {
        debug_assert_eq!(self.degree, other.degree);
        if c.is_zero() {
            return;
        }
        for (m, x) in &other.terms {
            self.add_term(m.clone(), x * c);
        }
    }

    pub fn scaled(&self, c: &Q) -> Self {
        let mut out = self.zero_like(self.degree);
        if !c.is_zero() {
            out.terms = self.terms.iter().map(|(m, x)| (m.clone(), x * c)).collect();
        }
        out
    }

    pub fn neg(&self) -> Self {
        self.scaled(&-Q::one())
    }

    /// Symmetric product; degrees add.
    pub fn sym_product(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let mut out = self.zero_like(self.degree + other.degree);
        for (a, x) in &self.terms {
            for (b, y) in &other.terms {
                out.add_term(a.mul(b), x * y);
            }
        }
        Ok(out)
    }

    /// Symmetric product with a single monomial, coefficient 1.
    pub fn mul_monomial(&self, m: &Monomial) -> Self {
        let mut out = self.zero_like(self.degree + m.degree());
        for (a, x) in &self.terms {
            out.add_term(a.mul(m), x.clone());
        }
        out
    }

    /// Coordinates against an enumerated basis.
    pub fn to_coordinates(&self, indexer: &MonomialIndexer) -> Vec<(u64, Q)> {
        let mut v: Vec<(u64, Q)> = self
            .terms
            .iter()
            .map(|(m, c)| (indexer.rank(m), c.clone()))
            .collect();
        v.sort_by_key(|(r, _)| *r);
        v
    }

    pub fn from_coordinates(
        alg: &LieAlgebra,
        degree: usize,
        basis: &[Monomial],
        coords: &[(u64, Q)],
    ) -> Self {
        Self::from_terms(
            alg,
            degree,
            coords.iter().map(|(r, c)| (basis[*r as usize].clone(), c.clone())),
        )
    }

    pub fn to_records(&self) -> Vec<SymTermRecord> {
        self.terms
            .iter()
            .map(|(m, c)| SymTermRecord {
                indices: m.indices().to_vec(),
                numerator: c.numer().to_string(),
                denominator: c.denom().to_string(),
            })
            .collect()
    }
}

/// One `(index-list, numerator, denominator)` record of a serialized element.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymTermRecord {
    pub indices: Vec<u16>,
    pub numerator: String,
    pub denominator: String,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64) -> Q {
        Q::from_integer(n.into())
    }

    #[test]
    fn sym_dims() {
        assert_eq!(sym_dim(3, 2), 6);
        assert_eq!(sym_dim(7, 0), 1);
        assert_eq!(sym_dim(133, 2), 8911);
        assert_eq!(sym_dim(133, 3), 400_995);
    }

    #[test]
    fn enumeration_order_and_ranks() {
        let basis = enumerate_monomials(4, 3, DEFAULT_MAX_DIM).unwrap();
        assert_eq!(basis.len() as u128, sym_dim(4, 3));
        assert!(basis.windows(2).all(|w| w[0] < w[1]));
        let idx = MonomialIndexer::new(4, 3);
        for (i, m) in basis.iter().enumerate() {
            assert_eq!(idx.rank(m), i as u64);
        }
        assert_eq!(enumerate_monomials(5, 0, 10).unwrap(), vec![Monomial::one()]);
    }

    #[test]
    fn enumeration_respects_cap() {
        let err = enumerate_monomials(133, 3, 1000).unwrap_err();
        assert!(matches!(err, SpencerError::ResourceCap { dim: 400_995, .. }));
    }

    #[test]
    fn a1_bases() {
        let g = LieAlgebra::from_label("A1").unwrap();
        assert_eq!(enumerate_basis(&g, 1, DEFAULT_MAX_DIM).unwrap().len(), 3);
        assert_eq!(enumerate_basis(&g, 2, DEFAULT_MAX_DIM).unwrap().len(), 6);
    }

    #[test]
    fn product_by_bilinearity() {
        let g = LieAlgebra::from_label("A1").unwrap();
        let (h, e, f) = (g.basis_element(0), g.basis_element(1), g.basis_element(2));
        assert_eq!(e.sym_product(&f).unwrap(), f.sym_product(&e).unwrap());
        let lhs = e
            .add(&h)
            .unwrap()
            .sym_product(&e.add(&h.neg()).unwrap())
            .unwrap();
        let rhs = e
            .sym_product(&e)
            .unwrap()
            .add(&h.sym_product(&h).unwrap().neg())
            .unwrap();
        assert_eq!(lhs, rhs);
        let ef = e.sym_product(&f).unwrap();
        assert_eq!(ef.len(), 1);
        assert_eq!(ef.coefficient(&Monomial::new(vec![1, 2])), q(1));
    }
}
