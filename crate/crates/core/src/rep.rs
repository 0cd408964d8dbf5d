//! Module structure of Spencer kernels: the adjoint action on `Sym^k(g)`, submodule
//! checks, weight multiplicities, and decomposition into irreducibles.

use std::collections::{BTreeMap, HashMap};

use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpencerError};
use crate::kernel::KernelBasis;
use crate::lie::LieAlgebra;
use crate::linalg::{self, dense_inverse, NullspaceOptions, SparseMatrix};
use crate::sym::{enumerate_basis, Monomial, MonomialIndexer, SymElement};
use crate::Q;

/// Dynkin labels: eigenvalues of `h_1 .. h_r`.
pub type WeightVector = Vec<i64>;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct IrrepSummand {
    pub highest_weight: WeightVector,
    pub dim: u128,
    pub multiplicity: u64,
}

fn adjoint_monomial(alg: &LieAlgebra, x: &[(usize, Q)], m: &Monomial, c: &Q, out: &mut SymElement) {
    for (j, &i) in m.indices().iter().enumerate() {
        let rest = m.without(j);
        for (xi, xc) in x {
            for &(t, b) in alg.bracket_basis(*xi, i as usize) {
                let mut idx = rest.indices().to_vec();
                idx.push(t as u16);
                out.add_term(Monomial::new(idx), xc * c * Q::from_integer(b.into()));
            }
        }
    }
}

/// `ad_x` extended to `Sym^k(g)` as a derivation.
pub fn ad_action_on_sym(alg: &LieAlgebra, x: &SymElement, s: &SymElement) -> Result<SymElement> {
    if x.algebra() != alg.fingerprint() || s.algebra() != alg.fingerprint() {
        return Err(SpencerError::AlgebraMismatch);
    }
    if x.degree() != 1 {
        return Err(SpencerError::DegreeMismatch {
            expected: 1,
            found: x.degree(),
        });
    }
    let xs: Vec<(usize, Q)> = x.terms().map(|(m, c)| (m.indices()[0] as usize, c.clone())).collect();
    let mut out = SymElement::zero(alg, s.degree());
    for (m, c) in s.terms() {
        adjoint_monomial(alg, &xs, m, c, &mut out);
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct SubmoduleVerdict {
    pub holds: bool,
    pub pairs_checked: u64,
    /// First failing pair: (algebra basis label, kernel basis position).
    pub violation: Option<(String, usize)>,
}

fn ad_coordinates(alg: &LieAlgebra, x: usize, s: &SymElement, indexer: &MonomialIndexer) -> Vec<(usize, Q)> {
    let mut out = SymElement::zero(alg, s.degree());
    let one = [(x, Q::from_integer(1.into()))];
    for (m, c) in s.terms() {
        adjoint_monomial(alg, &one, m, c, &mut out);
    }
    out.to_coordinates(indexer)
        .into_iter()
        .map(|(r, c)| (r as usize, c))
        .collect()
}

/// Stability of the kernel span under `ad_x` for every basis element `x`.
pub fn is_g_submodule(alg: &LieAlgebra, kb: &KernelBasis) -> Result<SubmoduleVerdict> {
    submodule_check(alg, kb, 0..alg.dim)
}

/// Stability under the Cartan subalgebra only.
pub fn is_h_stable(alg: &LieAlgebra, kb: &KernelBasis) -> Result<SubmoduleVerdict> {
    submodule_check(alg, kb, 0..alg.rank)
}

fn submodule_check(alg: &LieAlgebra, kb: &KernelBasis, xs: std::ops::Range<usize>) -> Result<SubmoduleVerdict> {
    if kb.dim == 0 || kb.dim == kb.ambient_dim {
        return Ok(SubmoduleVerdict {
            holds: true,
            pairs_checked: 0,
            violation: None,
        });
    }
    let elements = kb.elements(alg)?;
    let indexer = MonomialIndexer::new(alg.dim, kb.k);
    let pairs: Vec<(usize, usize)> = xs.flat_map(|x| (0..elements.len()).map(move |s| (x, s))).collect();
    let bad = pairs
        .par_iter()
        .find_first(|(x, s)| !kb.contains(&ad_coordinates(alg, *x, &elements[*s], &indexer)));
    Ok(SubmoduleVerdict {
        holds: bad.is_none(),
        pairs_checked: match bad {
            None => pairs.len() as u64,
            Some(_) => pairs.iter().position(|p| Some(p) == bad).unwrap() as u64 + 1,
        },
        violation: bad.map(|(x, s)| (alg.basis_labels[*x].clone(), *s)),
    })
}

pub fn monomial_weight(alg: &LieAlgebra, m: &Monomial) -> WeightVector {
    let mut w = vec![0i64; alg.rank];
    for &i in m.indices() {
        for (a, b) in w.iter_mut().zip(alg.weight(i as usize)) {
            *a += b;
        }
    }
    w
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct WeightDecomposition {
    /// Weight and its multiplicity, sorted by weight.
    pub weights: Vec<(WeightVector, u64)>,
    pub total: u64,
    /// False when the span is not stable under the Cartan subalgebra; the weights
    /// are then only the ranks of the projections and are advisory.
    pub cartan_stable: bool,
}

impl WeightDecomposition {
    pub fn multiset(&self) -> Vec<WeightVector> {
        self.weights
            .iter()
            .flat_map(|(w, m)| std::iter::repeat(w.clone()).take(*m as usize))
            .collect()
    }
}

/// Weight multiplicities of the kernel span: for each weight, the rank of the kernel
/// projected onto the monomials of that weight.
pub fn weight_decomposition(alg: &LieAlgebra, kb: &KernelBasis) -> Result<WeightDecomposition> {
    let monomials = enumerate_basis(alg, kb.k, kb.ambient_dim as u128 + 1)?;
    let weight_of: Vec<WeightVector> = monomials.par_iter().map(|m| monomial_weight(alg, m)).collect();
    let mut groups: BTreeMap<WeightVector, Vec<Vec<(u64, Q)>>> = BTreeMap::new();
    for v in &kb.vectors {
        let mut parts: BTreeMap<&WeightVector, Vec<(u64, Q)>> = BTreeMap::new();
        for (i, c) in v {
            parts.entry(&weight_of[*i]).or_default().push((*i as u64, c.clone()));
        }
        for (w, col) in parts {
            groups.entry(w.clone()).or_default().push(col);
        }
    }
    let opts = NullspaceOptions::default();
    let ambient = kb.ambient_dim as u64;
    let ranked: Vec<(WeightVector, usize)> = groups
        .into_par_iter()
        .map(|(w, cols)| {
            let m = SparseMatrix::from_columns(ambient, cols);
            linalg::rank(&m, &opts).map(|r| (w, r))
        })
        .collect::<Result<_>>()?;
    let weights: Vec<(WeightVector, u64)> = ranked
        .into_iter()
        .filter(|(_, r)| *r > 0)
        .map(|(w, r)| (w, r as u64))
        .collect();
    let total = weights.iter().map(|(_, m)| m).sum();
    let cartan_stable = is_h_stable(alg, kb)?.holds;
    Ok(WeightDecomposition {
        weights,
        total,
        cartan_stable: cartan_stable && total == kb.dim as u64,
    })
}

/// Weight geometry of a root system in Dynkin-label coordinates.
#[derive(Clone, Debug)]
pub struct WeightLattice {
    pub rank: usize,
    /// `(omega_i, omega_j)` scaled to integers.
    gram: Vec<Vec<i64>>,
    /// Simple roots in Dynkin labels (column `j` of the Cartan matrix).
    simple: Vec<Vec<i64>>,
    /// Positive roots in Dynkin labels, with their heights.
    positive: Vec<(Vec<i64>, i64)>,
    /// Positive roots in simple-root coordinates.
    positive_coords: Vec<Vec<i64>>,
    /// Half squared lengths of simple roots.
    d: Vec<i64>,
}

impl WeightLattice {
    pub fn new(alg: &LieAlgebra) -> Self {
        let rs = &alg.roots;
        let r = alg.rank;
        let a = &rs.datum.cartan_matrix;
        let d: Vec<i64> = (0..r).map(|j| rs.inner_products[j][j] / 2).collect();
        let aq: Vec<Vec<Q>> = a
            .iter()
            .map(|row| row.iter().map(|&x| Q::from_integer(x.into())).collect())
            .collect();
        let ainv = dense_inverse(&aq).expect("Cartan matrix is invertible");
        // G = A^{-T} D
        let g: Vec<Vec<Q>> = (0..r)
            .map(|i| (0..r).map(|j| &ainv[j][i] * Q::from_integer(d[j].into())).collect())
            .collect();
        let mut lcm = num_bigint::BigInt::from(1);
        for x in g.iter().flatten() {
            let den = x.denom().clone();
            let gcd = num_integer::Integer::gcd(&lcm, &den);
            lcm = &lcm * &den / gcd;
        }
        let scale = Q::from_integer(lcm);
        let gram = g
            .iter()
            .map(|row| {
                row.iter()
                    .map(|x| (x * &scale).to_integer().to_i64().unwrap())
                    .collect()
            })
            .collect();
        let simple: Vec<Vec<i64>> = (0..r).map(|j| (0..r).map(|i| a[i][j]).collect()).collect();
        let to_dynkin = |c: &[i32]| -> Vec<i64> {
            (0..r)
                .map(|i| c.iter().enumerate().map(|(j, &cj)| cj as i64 * a[i][j]).sum())
                .collect()
        };
        let positive = rs
            .positive_roots
            .iter()
            .map(|c| (to_dynkin(c), c.iter().map(|&x| x as i64).sum()))
            .collect();
        let positive_coords = rs
            .positive_roots
            .iter()
            .map(|c| c.iter().map(|&x| x as i64).collect())
            .collect();
        WeightLattice {
            rank: r,
            gram,
            simple,
            positive,
            positive_coords,
            d,
        }
    }

    /// Scaled inner product of two weights.
    pub fn inner(&self, a: &[i64], b: &[i64]) -> i128 {
        let mut s = 0i128;
        for i in 0..self.rank {
            if a[i] == 0 {
                continue;
            }
            for j in 0..self.rank {
                s += a[i] as i128 * b[j] as i128 * self.gram[i][j] as i128;
            }
        }
        s
    }

    pub fn is_dominant(w: &[i64]) -> bool {
        w.iter().all(|&x| x >= 0)
    }

    pub fn reflect(&self, w: &[i64], i: usize) -> WeightVector {
        w.iter().zip(&self.simple[i]).map(|(x, a)| x - w[i] * a).collect()
    }

    /// Weyl dimension formula.
    pub fn weyl_dim(&self, hw: &[i64]) -> Result<u128> {
        if hw.len() != self.rank || !Self::is_dominant(hw) {
            return Err(SpencerError::NotDominant(hw.to_vec()));
        }
        // <lam + rho, alpha^vee> is proportional to sum_j c_j d_j (lam_j + 1)
        let mut num = num_bigint::BigInt::from(1);
        let mut den = num_bigint::BigInt::from(1);
        for c in &self.positive_coords {
            let mut a = 0i64;
            let mut b = 0i64;
            for j in 0..self.rank {
                a += c[j] * self.d[j] * (hw[j] + 1);
                b += c[j] * self.d[j];
            }
            num *= a;
            den *= b;
        }
        let q = Q::new(num, den);
        if !q.is_integer() {
            return Err(SpencerError::Construction("non-integral Weyl dimension".into()));
        }
        Ok(q.to_integer().to_u128().unwrap())
    }

    /// Weight multiplicities of the irreducible module with highest weight `hw`,
    /// by Freudenthal's recursion level by level below `hw`.
    pub fn freudenthal(&self, hw: &[i64]) -> Result<BTreeMap<WeightVector, u64>> {
        if hw.len() != self.rank || !Self::is_dominant(hw) {
            return Err(SpencerError::NotDominant(hw.to_vec()));
        }
        let rho = vec![1i64; self.rank];
        let shift = |w: &[i64]| -> Vec<i64> { w.iter().zip(&rho).map(|(a, b)| a + b).collect() };
        let top = self.inner(&shift(hw), &shift(hw));
        // weight -> (multiplicity, level)
        let mut mult: HashMap<WeightVector, (u64, i64)> = HashMap::new();
        mult.insert(hw.to_vec(), (1, 0));
        let mut frontier = vec![hw.to_vec()];
        let mut level = 0i64;
        while !frontier.is_empty() {
            level += 1;
            let mut candidates: Vec<WeightVector> = Vec::new();
            for w in &frontier {
                for s in &self.simple {
                    let c: WeightVector = w.iter().zip(s).map(|(x, y)| x - y).collect();
                    if !mult.contains_key(&c) {
                        candidates.push(c);
                    }
                }
            }
            candidates.sort();
            candidates.dedup();
            let mut next = Vec::new();
            for mu in candidates {
                let denom = top - self.inner(&shift(&mu), &shift(&mu));
                if denom <= 0 {
                    continue;
                }
                let mut sum = 0i128;
                for (alpha, ht) in &self.positive {
                    let mut k = 1i64;
                    while k * ht <= level {
                        let up: WeightVector = mu.iter().zip(alpha).map(|(x, a)| x + k * a).collect();
                        if let Some((m, _)) = mult.get(&up) {
                            sum += *m as i128 * self.inner(&up, alpha);
                        }
                        k += 1;
                    }
                }
                let num = 2 * sum;
                if num % denom != 0 {
                    return Err(SpencerError::Construction(format!(
                        "non-integral multiplicity at {mu:?}"
                    )));
                }
                let m = num / denom;
                if m > 0 {
                    next.push(mu.clone());
                    mult.insert(mu, (m as u64, level));
                }
            }
            frontier = next;
        }
        Ok(mult.into_iter().map(|(w, (m, _))| (w, m)).collect())
    }

    /// Scaled `(w, rho)`, used to order weights.
    fn height(&self, w: &[i64]) -> i128 {
        self.inner(w, &vec![1i64; self.rank])
    }

    /// Highest-weight peeling of a weight multiset into irreducible summands.
    pub fn decompose_character(&self, weights: &[WeightVector]) -> Result<Vec<IrrepSummand>> {
        let mut chi: BTreeMap<WeightVector, i64> = BTreeMap::new();
        for w in weights {
            if w.len() != self.rank {
                return Err(SpencerError::BadCharacter(format!("weight {w:?} has wrong length")));
            }
            *chi.entry(w.clone()).or_insert(0) += 1;
        }
        for (w, m) in &chi {
            for i in 0..self.rank {
                let r = self.reflect(w, i);
                if chi.get(&r) != Some(m) {
                    return Err(SpencerError::BadCharacter(format!(
                        "not Weyl symmetric: {w:?} has multiplicity {m}, its reflection {r:?} has {}",
                        chi.get(&r).copied().unwrap_or(0)
                    )));
                }
            }
        }
        let mut out = Vec::new();
        while let Some(top) = chi
            .iter()
            .filter(|(_, m)| **m != 0)
            .max_by(|a, b| self.height(a.0).cmp(&self.height(b.0)).then(b.0.cmp(a.0)))
            .map(|(w, m)| (w.clone(), *m))
        {
            let (hw, m) = top;
            if m < 0 || !Self::is_dominant(&hw) {
                return Err(SpencerError::BadCharacter(format!(
                    "leading weight {hw:?} has multiplicity {m}"
                )));
            }
            for (w, k) in self.freudenthal(&hw)? {
                let e = chi.entry(w.clone()).or_insert(0);
                *e -= m * k as i64;
                if *e < 0 {
                    return Err(SpencerError::BadCharacter(format!(
                        "negative multiplicity at {w:?} after removing {hw:?}"
                    )));
                }
                if *e == 0 {
                    chi.remove(&w);
                }
            }
            out.push(IrrepSummand {
                dim: self.weyl_dim(&hw)?,
                highest_weight: hw,
                multiplicity: m as u64,
            });
        }
        Ok(out)
    }
}

pub fn weyl_dim(alg: &LieAlgebra, hw: &[i64]) -> Result<u128> {
    WeightLattice::new(alg).weyl_dim(hw)
}

pub fn decompose_character(alg: &LieAlgebra, weights: &[WeightVector]) -> Result<Vec<IrrepSummand>> {
    WeightLattice::new(alg).decompose_character(weights)
}

/// Smallest Weyl dimension over the fundamental weights.
pub fn min_fundamental_dim(alg: &LieAlgebra) -> Result<u128> {
    let lat = WeightLattice::new(alg);
    let mut best = u128::MAX;
    for i in 0..alg.rank {
        let mut w = vec![0i64; alg.rank];
        w[i] = 1;
        best = best.min(lat.weyl_dim(&w)?);
    }
    Ok(best)
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct ModuleReport {
    pub submodule: SubmoduleVerdict,
    pub weights: WeightDecomposition,
    pub summands: Option<Vec<IrrepSummand>>,
    /// Set when the kernel is not a submodule or peeling failed.
    pub advisory: Option<String>,
}

/// Submodule check, weights, and decomposition of a kernel in one pass.
pub fn module_report(alg: &LieAlgebra, kb: &KernelBasis) -> Result<ModuleReport> {
    let submodule = is_g_submodule(alg, kb)?;
    let weights = weight_decomposition(alg, kb)?;
    let mut advisory = None;
    if !submodule.holds {
        advisory = Some("kernel is not ad-stable; decomposition is advisory".to_string());
    }
    let summands = match decompose_character(alg, &weights.multiset()) {
        Ok(s) => Some(s),
        Err(e) => {
            advisory = Some(match advisory {
                Some(a) => format!("{a}; {e}"),
                None => e.to_string(),
            });
            None
        }
    };
    Ok(ModuleReport {
        submodule,
        weights,
        summands,
        advisory,
    })
}
