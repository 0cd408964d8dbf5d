//! Exact kernels of Spencer matrices, kernel mirror stability, and the dimension
//! tension verdict.

use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpencerError};
use crate::lie::{DualVector, Family, LieAlgebra};
use crate::linalg::{self, NullspaceOptions, RankCertificate, SparseMatrix};
use crate::spencer::{delta_constrained, SpencerMatrix};
use crate::sym::{enumerate_basis, Monomial, SymElement, DEFAULT_MAX_DIM};
use crate::Q;

/// Reduced basis of `ker delta | Sym^k`. Vectors are sparse in the lexicographic
/// monomial order of `Sym^k`.
#[derive(Clone, Debug)]
pub struct KernelBasis {
    pub k: usize,
    pub dim: usize,
    /// `sym_dim(n, k)`.
    pub ambient_dim: usize,
    pub rank: usize,
    pub pivots: Vec<usize>,
    pub vectors: Vec<Vec<(usize, Q)>>,
    pub certificate: RankCertificate,
}

impl KernelBasis {
    /// The basis as symmetric tensors.
    pub fn elements(&self, alg: &LieAlgebra) -> Result<Vec<SymElement>> {
        let monomials = enumerate_basis(alg, self.k, DEFAULT_MAX_DIM.max(self.ambient_dim as u128))?;
        Ok(self
            .vectors
            .iter()
            .map(|v| to_element(alg, self.k, &monomials, v))
            .collect())
    }

    /// Is a coordinate vector in the span of the basis?
    pub fn contains(&self, v: &[(usize, Q)]) -> bool {
        linalg::in_reduced_span(&self.vectors, &self.pivots, v)
    }

    pub fn as_matrix(&self) -> SparseMatrix {
        SparseMatrix {
            nrows: self.ambient_dim as u64,
            ncols: self.vectors.len(),
            columns: self
                .vectors
                .iter()
                .map(|v| v.iter().map(|(r, x)| (*r as u64, x.clone())).collect())
                .collect(),
        }
    }
}

fn to_element(alg: &LieAlgebra, k: usize, monomials: &[Monomial], v: &[(usize, Q)]) -> SymElement {
    SymElement::from_terms(alg, k, v.iter().map(|(i, x)| (monomials[*i].clone(), x.clone())))
}

pub fn kernel(mat: &SpencerMatrix, opts: &NullspaceOptions) -> Result<KernelBasis> {
    let ns = linalg::nullspace(&mat.matrix, opts)?;
    Ok(KernelBasis {
        k: mat.k_from,
        dim: ns.basis.len(),
        ambient_dim: ns.ncols,
        rank: ns.rank,
        pivots: ns.pivots,
        vectors: ns.basis,
        certificate: ns.certificate,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct KernelComparison {
    pub rank_first: usize,
    pub rank_second: usize,
    pub rank_stacked: usize,
    pub equal: bool,
}

/// `ker A = ker B` iff `rank A = rank B = rank [A; B]`.
pub fn compare_kernels(a: &SparseMatrix, b: &SparseMatrix, opts: &NullspaceOptions) -> Result<KernelComparison> {
    let rank_first = linalg::rank(a, opts)?;
    let rank_second = linalg::rank(b, opts)?;
    let rank_stacked = if rank_first == a.ncols && rank_second == b.ncols {
        // both injective: the stacked rank is pinned between rank A and ncols
        a.ncols
    } else {
        linalg::rank(&a.stack(b)?, opts)?
    };
    Ok(KernelComparison {
        rank_first,
        rank_second,
        rank_stacked,
        equal: rank_first == rank_stacked && rank_second == rank_stacked,
    })
}

/// `ker delta^lam = ker delta^{-lam}` on `Sym^k`.
pub fn mirror_stability_check(
    alg: &LieAlgebra,
    lam: &DualVector,
    k: usize,
    cap: u128,
    opts: &NullspaceOptions,
) -> Result<KernelComparison> {
    let plus = delta_constrained(alg, lam, k, cap)?.matrix;
    let minus = delta_constrained(alg, &lam.scaled(&-Q::one()), k, cap)?.matrix;
    compare_kernels(&plus, &minus, opts)
}

/// Dimension of the smallest nontrivial irreducible representation.
pub fn min_irrep_dim(family: Family, rank: usize) -> Result<u64> {
    let unknown = || SpencerError::UnknownFamily(format!("{family}{rank}"));
    let n = rank as u64;
    match (family, rank) {
        (Family::A, r) if r >= 1 => Ok(n + 1),
        (Family::B, 2) => Ok(4),
        (Family::B, r) if r >= 3 => Ok(2 * n + 1),
        (Family::C, r) if r >= 2 => Ok(2 * n),
        (Family::D, r) if r >= 4 => Ok(2 * n),
        (Family::E, 6) => Ok(27),
        (Family::E, 7) => Ok(56),
        (Family::E, 8) => Ok(248),
        (Family::F, 4) => Ok(26),
        (Family::G, 2) => Ok(7),
        _ => Err(unknown()),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    ForcedMatch,
    Infeasible,
    Unconstrained,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct TensionReport {
    pub algebra: String,
    pub h11: u64,
    pub min_irrep_dim: u64,
    pub kernel_dim_measured: Option<u64>,
    /// Valid only for a nonzero kernel.
    pub lower_bound: u64,
    /// Taken from the `h11` input, not derived from the algebra.
    pub upper_bound: u64,
    pub verdict: Verdict,
    pub forced_dim: Option<u64>,
    /// Whether the measured dimension is compatible with the bounds. A zero kernel is
    /// always compatible, since the lower bound needs a nonzero module.
    pub measurement_consistent: Option<bool>,
    pub measured_kernel_is_zero: Option<bool>,
    pub upper_bound_source: String,
}

pub fn tension_report(alg: &LieAlgebra, h11: u64, kernel_dim: Option<u64>) -> Result<TensionReport> {
    let datum = &alg.roots.datum;
    let lower = min_irrep_dim(datum.family, datum.rank)?;
    let upper = h11;
    let verdict = if lower == upper {
        Verdict::ForcedMatch
    } else if lower > upper {
        Verdict::Infeasible
    } else {
        Verdict::Unconstrained
    };
    let forced_dim = (verdict == Verdict::ForcedMatch).then_some(lower);
    let measurement_consistent = kernel_dim.map(|d| d == 0 || (lower <= d && d <= upper));
    Ok(TensionReport {
        algebra: alg.label(),
        h11,
        min_irrep_dim: lower,
        kernel_dim_measured: kernel_dim,
        lower_bound: lower,
        upper_bound: upper,
        verdict,
        forced_dim,
        measurement_consistent,
        measured_kernel_is_zero: kernel_dim.map(|d| d == 0),
        upper_bound_source: "user-supplied h11".into(),
    })
}
