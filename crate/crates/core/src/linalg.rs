//! Exact linear algebra over the rationals.
//!
//! Null spaces are returned in reduced form: the basis vector attached to free column
//! `f` has entry 1 at `f`, 0 at every other free column, and is determined on pivot
//! columns by the reduced row echelon form. This basis is canonical for a fixed column
//! order, so every route below must produce it bit-for-bit.
//!
//! Large blocks go through multi-modular elimination. A rank mod p never exceeds the
//! rank over Q, so agreeing modular ranks are lower bounds; the exact pass reconstructs
//! the modular null space over Q and checks `A v = 0` exactly, which bounds the rank
//! from above.

use std::collections::HashMap;
use std::io::Write;

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpencerError};
use crate::Q;

/// Column-major sparse matrix with exact entries. Row indices are `u64` so that
/// targets like `Sym^4(e7)` can be addressed without enumeration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SparseMatrix {
    pub nrows: u64,
    pub ncols: usize,
    /// Each column sorted by row, no explicit zeros.
    pub columns: Vec<Vec<(u64, Q)>>,
}

impl SparseMatrix {
    pub fn zeros(nrows: u64, ncols: usize) -> Self {
        SparseMatrix {
            nrows,
            ncols,
            columns: vec![Vec::new(); ncols],
        }
    }

    pub fn from_columns(nrows: u64, columns: Vec<Vec<(u64, Q)>>) -> Self {
        let columns = columns
            .into_iter()
            .map(|mut c| {
                c.retain(|(_, v)| !v.is_zero());
                c.sort_by_key(|(r, _)| *r);
                c
            })
            .collect::<Vec<_>>();
        SparseMatrix {
            nrows,
            ncols: columns.len(),
            columns,
        }
    }

    pub fn from_dense(rows: &[Vec<Q>]) -> Self {
        let nrows = rows.len() as u64;
        let ncols = rows.first().map_or(0, |r| r.len());
        let mut columns = vec![Vec::new(); ncols];
        for (i, row) in rows.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if !v.is_zero() {
                    columns[j].push((i as u64, v.clone()));
                }
            }
        }
        SparseMatrix {
            nrows,
            ncols,
            columns,
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<Q>> {
        let mut out = vec![vec![Q::zero(); self.ncols]; self.nrows as usize];
        for (j, col) in self.columns.iter().enumerate() {
            for (i, v) in col {
                out[*i as usize][j] = v.clone();
            }
        }
        out
    }

    pub fn nnz(&self) -> usize {
        self.columns.iter().map(|c| c.len()).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.columns.iter().all(|c| c.is_empty())
    }

    pub fn get(&self, row: u64, col: usize) -> Q {
        match self.columns[col].binary_search_by_key(&row, |(r, _)| *r) {
            Ok(i) => self.columns[col][i].1.clone(),
            Err(_) => Q::zero(),
        }
    }

    pub fn max_abs_entry(&self) -> Q {
        self.columns
            .iter()
            .flatten()
            .map(|(_, v)| v.abs())
            .max()
            .unwrap_or_else(Q::zero)
    }

    pub fn scaled(&self, c: &Q) -> Self {
        if c.is_zero() {
            return Self::zeros(self.nrows, self.ncols);
        }
        SparseMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            columns: self
                .columns
                .iter()
                .map(|col| col.iter().map(|(r, v)| (*r, v * c)).collect())
                .collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(SpencerError::Invalid("matrix shapes differ".into()));
        }
        let columns = self
            .columns
            .iter()
            .zip(&other.columns)
            .map(|(a, b)| merge_columns(a, b))
            .collect();
        Ok(SparseMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            columns,
        })
    }

    /// `[self; other]`, rows of `other` shifted below `self`.
    pub fn stack(&self, other: &Self) -> Result<Self> {
        if self.ncols != other.ncols {
            return Err(SpencerError::Invalid("column counts differ".into()));
        }
        let columns = self
            .columns
            .iter()
            .zip(&other.columns)
            .map(|(a, b)| {
                let mut c = a.clone();
                c.extend(b.iter().map(|(r, v)| (r + self.nrows, v.clone())));
                c
            })
            .collect();
        Ok(SparseMatrix {
            nrows: self.nrows + other.nrows,
            ncols: self.ncols,
            columns,
        })
    }

    /// `A v` for a sparse vector given as (column, value) pairs.
    pub fn apply(&self, v: &[(usize, Q)]) -> Vec<(u64, Q)> {
        let mut acc: HashMap<u64, Q> = HashMap::new();
        for (c, x) in v {
            for (r, a) in &self.columns[*c] {
                *acc.entry(*r).or_insert_with(Q::zero) += a * x;
            }
        }
        let mut out: Vec<(u64, Q)> = acc.into_iter().filter(|(_, v)| !v.is_zero()).collect();
        out.sort_by_key(|(r, _)| *r);
        out
    }

    /// Matrix Market coordinate format; values are exact `num/den` tokens.
    pub fn write_matrix_market<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate rational general")?;
        writeln!(w, "% entries are exact rationals written as num/den")?;
        writeln!(w, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        let mut entries: Vec<(u64, usize, &Q)> = self
            .columns
            .iter()
            .enumerate()
            .flat_map(|(j, c)| c.iter().map(move |(i, v)| (*i, j, v)))
            .collect();
        entries.sort_by_key(|(i, j, _)| (*i, *j));
        for (i, j, v) in entries {
            writeln!(w, "{} {} {}/{}", i + 1, j + 1, v.numer(), v.denom())?;
        }
        Ok(())
    }
}

fn merge_columns(a: &[(u64, Q)], b: &[(u64, Q)]) -> Vec<(u64, Q)> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        if j == b.len() || (i < a.len() && a[i].0 < b[j].0) {
            out.push(a[i].clone());
            i += 1;
        } else if i == a.len() || b[j].0 < a[i].0 {
            out.push(b[j].clone());
            j += 1;
        } else {
            let s = &a[i].1 + &b[j].1;
            if !s.is_zero() {
                out.push((a[i].0, s));
            }
            i += 1;
            j += 1;
        }
    }
    out
}

/// In-place Gauss-Jordan over Q; returns pivot columns.
pub fn dense_rref(m: &mut [Vec<Q>]) -> Vec<usize> {
    let rows = m.len();
    let cols = m.first().map_or(0, |r| r.len());
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        let inv = Q::one() / &m[r][c];
        for x in m[r].iter_mut() {
            *x *= &inv;
        }
        let pivot_row = m[r].clone();
        for (i, row) in m.iter_mut().enumerate() {
            if i != r && !row[c].is_zero() {
                let f = row[c].clone();
                for (x, y) in row.iter_mut().zip(&pivot_row) {
                    if !y.is_zero() {
                        *x -= &f * y;
                    }
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

pub fn dense_inverse(m: &[Vec<Q>]) -> Option<Vec<Vec<Q>>> {
    let n = m.len();
    let mut aug: Vec<Vec<Q>> = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { Q::one() } else { Q::zero() }));
            r
        })
        .collect();
    let piv = dense_rref(&mut aug);
    if piv.len() < n || piv[n - 1] != n - 1 {
        return None;
    }
    Some(aug.into_iter().map(|r| r[n..].to_vec()).collect())
}

pub fn dense_determinant(m: &[Vec<Q>]) -> Q {
    let n = m.len();
    let mut a = m.to_vec();
    let mut det = Q::one();
    for c in 0..n {
        let Some(p) = (c..n).find(|&i| !a[i][c].is_zero()) else {
            return Q::zero();
        };
        if p != c {
            a.swap(p, c);
            det = -det;
        }
        det *= &a[c][c];
        let inv = Q::one() / &a[c][c];
        let pivot_row = a[c].clone();
        for row in a.iter_mut().skip(c + 1) {
            if !row[c].is_zero() {
                let f = &row[c] * &inv;
                for (x, y) in row.iter_mut().zip(&pivot_row).skip(c) {
                    *x -= &f * y;
                }
            }
        }
    }
    det
}

/// Reduced null-space basis from a matrix already in RREF with the given pivots.
fn nullspace_from_rref(rref: &[Vec<Q>], pivots: &[usize], ncols: usize) -> Vec<Vec<(usize, Q)>> {
    let mut is_pivot = vec![false; ncols];
    for &p in pivots {
        is_pivot[p] = true;
    }
    (0..ncols)
        .filter(|&f| !is_pivot[f])
        .map(|f| {
            let mut v: Vec<(usize, Q)> = pivots
                .iter()
                .enumerate()
                .filter(|(r, _)| !rref[*r][f].is_zero())
                .map(|(r, &p)| (p, -rref[r][f].clone()))
                .collect();
            v.push((f, Q::one()));
            v.sort_by_key(|(c, _)| *c);
            v
        })
        .collect()
}

/// Fraction-free (Bareiss) elimination of an integer matrix; returns the echelon
/// rows and pivot columns.
fn bareiss_echelon(mut a: Vec<Vec<BigInt>>, ncols: usize) -> (Vec<Vec<BigInt>>, Vec<usize>) {
    let rows = a.len();
    let mut pivots = Vec::new();
    let mut prev = BigInt::one();
    let mut r = 0;
    for c in 0..ncols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !a[i][c].is_zero()) else {
            continue;
        };
        a.swap(r, p);
        let (top, rest) = a.split_at_mut(r + 1);
        let pr = &top[r];
        rest.par_iter_mut().for_each(|row| {
            let f = row[c].clone();
            for j in c..ncols {
                // exact division by the previous pivot
                let v = &pr[c] * &row[j] - &f * &pr[j];
                row[j] = v / &prev;
            }
        });
        prev = a[r][c].clone();
        pivots.push(c);
        r += 1;
    }
    a.truncate(r);
    (a, pivots)
}

/// Exact rank and reduced null space of a dense rational block through fraction-free
/// elimination.
fn exact_block_nullspace(rows: &[Vec<Q>], ncols: usize) -> (usize, Vec<usize>, Vec<Vec<(usize, Q)>>) {
    let ints: Vec<Vec<BigInt>> = rows
        .iter()
        .map(|row| {
            let l = row
                .iter()
                .fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
            row.iter()
                .map(|x| x.numer() * (&l / x.denom()))
                .collect()
        })
        .collect();
    let (ech, pivots) = bareiss_echelon(ints, ncols);
    let mut rref: Vec<Vec<Q>> = ech
        .into_iter()
        .map(|r| r.into_iter().map(Q::from_integer).collect())
        .collect();
    let piv2 = dense_rref(&mut rref);
    debug_assert_eq!(piv2, pivots);
    let basis = nullspace_from_rref(&rref, &pivots, ncols);
    (pivots.len(), pivots, basis)
}

// ---------------------------------------------------------------------------
// modular arithmetic

fn mul_mod(a: u64, b: u64, p: u64) -> u64 {
    a * b % p
}

fn pow_mod(mut a: u64, mut e: u64, p: u64) -> u64 {
    let mut r = 1u64;
    a %= p;
    while e > 0 {
        if e & 1 == 1 {
            r = (r as u128 * a as u128 % p as u128) as u64;
        }
        a = (a as u128 * a as u128 % p as u128) as u64;
        e >>= 1;
    }
    r
}

fn inv_mod(a: u64, p: u64) -> u64 {
    pow_mod(a, p - 2, p)
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for sp in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n % sp == 0 {
            return n == sp;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = (x as u128 * x as u128 % n as u128) as u64;
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic stream of word-size primes in `[2^30, 2^31)`.
#[derive(Clone, Debug)]
pub struct PrimeStream {
    state: u64,
}

impl PrimeStream {
    pub fn new(seed: u64) -> Self {
        PrimeStream { state: seed }
    }
}

impl Iterator for PrimeStream {
    type Item = u64;

    fn next(&mut self) -> Option<u64> {
        loop {
            self.state = splitmix(self.state);
            let cand = (1u64 << 30) | (self.state & ((1 << 30) - 1)) | 1;
            if is_prime(cand) {
                return Some(cand);
            }
        }
    }
}

fn q_mod(x: &Q, p: u64) -> Option<u64> {
    let bp = BigInt::from(p);
    let d = x.denom().mod_floor(&bp).to_u64().unwrap();
    if d == 0 {
        return None;
    }
    let n = x.numer().mod_floor(&bp).to_u64().unwrap();
    Some(mul_mod(n, inv_mod(d, p), p))
}

/// Barrett reduction for `x < 2^62` modulo `p < 2^31`.
#[derive(Clone, Copy)]
struct Barrett {
    p: u64,
    r: u64,
}

impl Barrett {
    fn new(p: u64) -> Self {
        Barrett {
            p,
            r: (u128::from(u64::MAX) / u128::from(p)) as u64,
        }
    }

    #[inline(always)]
    fn reduce(self, x: u64) -> u64 {
        let q = ((u128::from(x) * u128::from(self.r)) >> 64) as u64;
        let mut t = x - q * self.p;
        while t >= self.p {
            t -= self.p;
        }
        t
    }
}

fn eliminate(row: &mut [u64], prow: &[u64], c: usize, br: Barrett) {
    let f = row[c];
    if f != 0 {
        let nf = br.p - f;
        for (x, &y) in row[c..].iter_mut().zip(&prow[c..]) {
            *x = br.reduce(*x + nf * y);
        }
    }
}

/// Result of eliminating one block modulo a prime.
#[derive(Clone, Debug)]
struct ModularRref {
    rank: usize,
    pivots: Vec<usize>,
    /// Reduced rows, one per pivot, dense over the block's columns.
    rows: Vec<Vec<u64>>,
}

/// Block of a sparse matrix with local row/column numbering.
struct Block {
    columns: Vec<usize>,
    nrows: usize,
    /// local column -> (local row, value)
    entries: Vec<Vec<(usize, Q)>>,
}

impl Block {
    fn dense_rows(&self) -> Vec<Vec<Q>> {
        let mut out = vec![vec![Q::zero(); self.columns.len()]; self.nrows];
        for (c, col) in self.entries.iter().enumerate() {
            for (r, v) in col {
                out[*r][c] = v.clone();
            }
        }
        out
    }

    fn modular_rref(&self, p: u64, seed: u64) -> Option<ModularRref> {
        let n = self.columns.len();
        let compress = self.nrows > 2 * n + 16;
        let m = if compress { n + 8 } else { self.nrows };
        let br = Barrett::new(p);
        let mut rows = vec![vec![0u64; n]; m];
        if compress {
            // Vandermonde combination: compressed row s is sum_r u_r^s A[r]
            let nodes: Vec<u64> = (0..self.nrows)
                .map(|r| 1 + splitmix(seed ^ (r as u64).wrapping_mul(0x2545_f491_4f6c_dd1d)) % (p - 1))
                .collect();
            let mut acc = vec![0u64; m];
            for (c, col) in self.entries.iter().enumerate() {
                acc.iter_mut().for_each(|x| *x = 0);
                for (r, v) in col {
                    let mut t = q_mod(v, p)?;
                    let u = nodes[*r];
                    for a in acc.iter_mut() {
                        *a += t;
                        t = br.reduce(t * u);
                    }
                }
                for (row, a) in rows.iter_mut().zip(&acc) {
                    row[c] = *a % p;
                }
            }
        } else {
            for (c, col) in self.entries.iter().enumerate() {
                for (r, v) in col {
                    rows[*r][c] = q_mod(v, p)?;
                }
            }
        }
        let mut pivots = Vec::new();
        let mut rank = 0;
        for c in 0..n {
            if rank == m {
                break;
            }
            let Some(piv) = (rank..m).find(|&i| rows[i][c] != 0) else {
                continue;
            };
            rows.swap(rank, piv);
            let inv = inv_mod(rows[rank][c], p);
            for x in rows[rank][c..].iter_mut() {
                *x = mul_mod(*x, inv, p);
            }
            let (_, rest) = rows.split_at_mut(rank);
            let (prow, below) = rest.split_first_mut().unwrap();
            let prow: &Vec<u64> = prow;
            below.par_iter_mut().for_each(|row| eliminate(row, prow, c, br));
            pivots.push(c);
            rank += 1;
        }
        // back substitution, needed only for the null space
        if rank < n {
            for i in (1..rank).rev() {
                let c = pivots[i];
                let (top, rest) = rows.split_at_mut(i);
                let prow: &Vec<u64> = &rest[0];
                top.par_iter_mut().for_each(|row| eliminate(row, prow, c, br));
            }
        }
        rows.truncate(rank);
        Some(ModularRref {
            rank,
            pivots,
            rows,
        })
    }

    /// Exact check that every candidate vector lies in the null space.
    fn annihilates(&self, basis: &[Vec<(usize, Q)>]) -> bool {
        basis.par_iter().all(|v| {
            let mut acc: HashMap<usize, Q> = HashMap::new();
            for (c, x) in v {
                for (r, a) in &self.entries[*c] {
                    *acc.entry(*r).or_insert_with(Q::zero) += a * x;
                }
            }
            acc.values().all(|x| x.is_zero())
        })
    }
}

/// Rational reconstruction of `a mod m`: `r/s` with `|r|, s <= sqrt(m/2)`.
fn rational_reconstruct(a: &BigInt, m: &BigInt) -> Option<Q> {
    let bound = (m / BigInt::from(2)).sqrt();
    let (mut r0, mut r1) = (m.clone(), a.mod_floor(m));
    let (mut s0, mut s1) = (BigInt::zero(), BigInt::one());
    while r1 > bound {
        let q = &r0 / &r1;
        let r2 = &r0 - &q * &r1;
        let s2 = &s0 - &q * &s1;
        r0 = std::mem::replace(&mut r1, r2);
        s0 = std::mem::replace(&mut s1, s2);
    }
    if s1.is_zero() || s1.abs() > bound {
        return None;
    }
    if s1.sign() == Sign::Minus {
        r1 = -r1;
        s1 = -s1;
    }
    Some(Q::new(r1, s1))
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct RankCertificate {
    pub primes_used: Vec<u64>,
    /// Total rank under the i-th accepted prime of every block.
    pub modular_ranks: Vec<usize>,
    pub exact_confirmed: bool,
    pub retries: usize,
    pub blocks: usize,
    pub largest_block: (usize, usize),
    /// Blocks settled by fraction-free elimination vs. modular + reconstruction.
    pub exact_blocks: usize,
    pub modular_blocks: usize,
}

#[derive(Clone, Debug)]
pub struct NullspaceOptions {
    pub prime_seed: u64,
    /// Blocks with at most this many columns (and rows) use fraction-free elimination.
    pub small_cols: usize,
    pub small_rows: usize,
    pub agreeing_primes: usize,
    pub max_retries: usize,
    pub max_primes: usize,
    /// Refuse blocks whose dense modular workspace would exceed this many cells.
    pub max_block_cells: u128,
}

impl Default for NullspaceOptions {
    fn default() -> Self {
        NullspaceOptions {
            prime_seed: 0x5eed_5eed,
            small_cols: 24,
            small_rows: 400,
            agreeing_primes: 3,
            max_retries: 3,
            max_primes: 400,
            max_block_cells: 400_000_000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Nullspace {
    pub ncols: usize,
    pub rank: usize,
    pub pivots: Vec<usize>,
    /// Reduced basis, each vector sorted by column.
    pub basis: Vec<Vec<(usize, Q)>>,
    pub certificate: RankCertificate,
}

fn split_blocks(mat: &SparseMatrix) -> Vec<Block> {
    let n = mat.ncols;
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut owner: HashMap<u64, usize> = HashMap::new();
    for (c, col) in mat.columns.iter().enumerate() {
        for (r, _) in col {
            match owner.get(r) {
                Some(&o) => {
                    let (a, b) = (find(&mut parent, o), find(&mut parent, c));
                    if a != b {
                        parent[a.max(b)] = a.min(b);
                    }
                }
                None => {
                    owner.insert(*r, c);
                }
            }
        }
    }
    let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
    for c in 0..n {
        let root = find(&mut parent, c);
        groups.entry(root).or_default().push(c);
    }
    let mut groups: Vec<Vec<usize>> = groups.into_values().collect();
    groups.sort_by_key(|g| g[0]);
    groups
        .into_iter()
        .map(|columns| {
            let mut rows: Vec<u64> = columns
                .iter()
                .flat_map(|&c| mat.columns[c].iter().map(|(r, _)| *r))
                .collect();
            rows.sort_unstable();
            rows.dedup();
            let local: HashMap<u64, usize> = rows.iter().enumerate().map(|(i, r)| (*r, i)).collect();
            let entries = columns
                .iter()
                .map(|&c| {
                    mat.columns[c]
                        .iter()
                        .map(|(r, v)| (local[r], v.clone()))
                        .collect()
                })
                .collect();
            Block {
                columns,
                nrows: rows.len(),
                entries,
            }
        })
        .collect()
}

struct BlockOutcome {
    rank: usize,
    pivots: Vec<usize>,
    basis: Vec<Vec<(usize, Q)>>,
    ranks_by_slot: Vec<usize>,
    primes: Vec<u64>,
    retries: usize,
    modular: bool,
}

fn solve_block(block: &Block, opts: &NullspaceOptions, block_id: usize) -> Result<BlockOutcome> {
    let n = block.columns.len();
    let mut primes = PrimeStream::new(opts.prime_seed);
    let seed = opts.prime_seed.wrapping_add(block_id as u64);

    // modular ranks (lower bounds), retried on disagreement
    let mut retries = 0;
    let (mut accepted, mut used) = loop {
        let mut results: Vec<(u64, ModularRref)> = Vec::new();
        let mut used = Vec::new();
        while results.len() < opts.agreeing_primes {
            let p = primes.next().unwrap();
            used.push(p);
            if let Some(r) = block.modular_rref(p, seed ^ p) {
                results.push((p, r));
            }
        }
        let first = &results[0].1;
        if results
            .iter()
            .all(|(_, r)| r.rank == first.rank && r.pivots == first.pivots)
        {
            break (results, used);
        }
        retries += 1;
        if retries > opts.max_retries {
            let ranks: Vec<usize> = results.iter().map(|(_, r)| r.rank).collect();
            return Err(SpencerError::RankDisagreement(format!(
                "block {block_id} ({} x {n}): ranks {ranks:?} under primes {used:?}",
                block.nrows
            )));
        }
    };
    let ranks_by_slot: Vec<usize> = accepted.iter().map(|(_, r)| r.rank).collect();
    let rank = accepted[0].1.rank;
    let pivots = accepted[0].1.pivots.clone();

    if n <= opts.small_cols && block.nrows <= opts.small_rows {
        let (erank, epivots, basis) = exact_block_nullspace(&block.dense_rows(), n);
        if erank != rank || epivots != pivots {
            // a modular rank exceeding the exact rank is impossible; a lower one means
            // every accepted prime was unlucky
            retries += 1;
        }
        return Ok(BlockOutcome {
            rank: erank,
            pivots: epivots,
            basis,
            ranks_by_slot,
            primes: used,
            retries,
            modular: false,
        });
    }

    let mut is_pivot = vec![false; n];
    for &p in &pivots {
        is_pivot[p] = true;
    }
    let free: Vec<usize> = (0..n).filter(|&c| !is_pivot[c]).collect();
    if free.is_empty() {
        // full column rank mod p implies full column rank over Q
        return Ok(BlockOutcome {
            rank,
            pivots,
            basis: Vec::new(),
            ranks_by_slot,
            primes: used,
            retries,
            modular: true,
        });
    }

    // CRT accumulation of -R[r][f] for every pivot row r and free column f
    let mut modulus = BigInt::one();
    let mut residues: Vec<Vec<BigInt>> = vec![vec![BigInt::zero(); free.len()]; rank];
    let absorb = |p: u64, r: &ModularRref, modulus: &mut BigInt, residues: &mut Vec<Vec<BigInt>>| {
        let bp = BigInt::from(p);
        let inv = modulus.modpow(&(&bp - 2u32), &bp);
        for (i, row) in r.rows.iter().enumerate() {
            for (j, &f) in free.iter().enumerate() {
                let target = BigInt::from((p - row[f]) % p);
                let cur = &residues[i][j];
                let delta = ((&target - cur.mod_floor(&bp)).mod_floor(&bp) * &inv).mod_floor(&bp);
                residues[i][j] = cur + &*modulus * delta;
            }
        }
        *modulus *= bp;
    };
    for (p, r) in &accepted {
        absorb(*p, r, &mut modulus, &mut residues);
    }
    loop {
        let attempt: Option<Vec<Vec<(usize, Q)>>> = free
            .iter()
            .enumerate()
            .map(|(j, &f)| {
                let mut v: Vec<(usize, Q)> = Vec::with_capacity(rank + 1);
                for (i, &pc) in pivots.iter().enumerate() {
                    let x = rational_reconstruct(&residues[i][j], &modulus)?;
                    if !x.is_zero() {
                        v.push((pc, x));
                    }
                }
                v.push((f, Q::one()));
                v.sort_by_key(|(c, _)| *c);
                Some(v)
            })
            .collect();
        if let Some(basis) = attempt {
            if block.annihilates(&basis) {
                return Ok(BlockOutcome {
                    rank,
                    pivots,
                    basis,
                    ranks_by_slot,
                    primes: used,
                    retries,
                    modular: true,
                });
            }
        }
        if used.len() >= opts.max_primes {
            break;
        }
        // more primes; doubling keeps the number of reconstruction attempts logarithmic
        let extra = accepted.len().max(2);
        let mut fresh = Vec::new();
        while fresh.len() < extra {
            let p = primes.next().unwrap();
            used.push(p);
            if let Some(r) = block.modular_rref(p, seed ^ p) {
                if r.rank == rank && r.pivots == pivots {
                    fresh.push((p, r));
                } else if r.rank > rank {
                    return Err(SpencerError::RankDisagreement(format!(
                        "block {block_id}: prime {p} gives rank {} above accepted {rank}",
                        r.rank
                    )));
                }
            }
        }
        for (p, r) in &fresh {
            absorb(*p, r, &mut modulus, &mut residues);
        }
        accepted.extend(fresh);
    }

    // reconstruction did not settle; finish with fraction-free elimination
    let (erank, epivots, basis) = exact_block_nullspace(&block.dense_rows(), n);
    used.dedup();
    Ok(BlockOutcome {
        rank: erank,
        pivots: epivots,
        basis,
        ranks_by_slot,
        primes: used,
        retries: retries + 1,
        modular: false,
    })
}

/// Exact rank and reduced null space of a sparse rational matrix.
pub fn nullspace(mat: &SparseMatrix, opts: &NullspaceOptions) -> Result<Nullspace> {
    let blocks = split_blocks(mat);
    for b in &blocks {
        let n = b.columns.len() as u128;
        let m = (b.nrows as u128).min(2 * n + 16);
        if n * m > opts.max_block_cells {
            return Err(SpencerError::ResourceCap {
                what: format!("dense elimination block ({} x {})", b.nrows, n),
                dim: n * m,
                cap: opts.max_block_cells,
            });
        }
    }
    let outcomes: Vec<Result<BlockOutcome>> = blocks
        .par_iter()
        .enumerate()
        .map(|(i, b)| {
            if b.nrows == 0 {
                return Ok(BlockOutcome {
                    rank: 0,
                    pivots: Vec::new(),
                    basis: (0..b.columns.len()).map(|c| vec![(c, Q::one())]).collect(),
                    ranks_by_slot: vec![0; opts.agreeing_primes],
                    primes: Vec::new(),
                    retries: 0,
                    modular: false,
                });
            }
            solve_block(b, opts, i)
        })
        .collect();

    let mut rank = 0;
    let mut pivots = Vec::new();
    let mut basis: Vec<Vec<(usize, Q)>> = Vec::new();
    let mut modular_ranks = vec![0usize; opts.agreeing_primes];
    let mut primes_used: Vec<u64> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let mut retries = 0;
    let mut largest = (0, 0);
    let (mut exact_blocks, mut modular_blocks) = (0, 0);
    for (b, out) in blocks.iter().zip(outcomes) {
        let out = out?;
        rank += out.rank;
        pivots.extend(out.pivots.iter().map(|&p| b.columns[p]));
        basis.extend(out.basis.into_iter().map(|v| {
            v.into_iter()
                .map(|(c, x)| (b.columns[c], x))
                .collect::<Vec<_>>()
        }));
        for (slot, r) in modular_ranks.iter_mut().zip(&out.ranks_by_slot) {
            *slot += r;
        }
        for p in out.primes {
            if seen.insert(p) {
                primes_used.push(p);
            }
        }
        retries += out.retries;
        if b.columns.len() > largest.1 {
            largest = (b.nrows, b.columns.len());
        }
        if out.modular {
            modular_blocks += 1;
        } else if b.nrows > 0 {
            exact_blocks += 1;
        }
    }
    pivots.sort_unstable();
    // order by free column: each vector's free column is its last entry equal to 1
    // outside the pivot set
    let mut keyed: Vec<(usize, Vec<(usize, Q)>)> = basis
        .into_iter()
        .map(|v| {
            let f = v
                .iter()
                .find(|(c, _)| pivots.binary_search(c).is_err())
                .map(|(c, _)| *c)
                .unwrap();
            (f, v)
        })
        .collect();
    keyed.sort_by_key(|(f, _)| *f);
    let basis: Vec<Vec<(usize, Q)>> = keyed.into_iter().map(|(_, v)| v).collect();
    let exact_confirmed = modular_ranks.iter().all(|&r| r == rank)
        && rank + basis.len() == mat.ncols;
    Ok(Nullspace {
        ncols: mat.ncols,
        rank,
        pivots,
        basis,
        certificate: RankCertificate {
            primes_used,
            modular_ranks,
            exact_confirmed,
            retries,
            blocks: blocks.len(),
            largest_block: largest,
            exact_blocks,
            modular_blocks,
        },
    })
}

/// Exact rank (via the null space).
pub fn rank(mat: &SparseMatrix, opts: &NullspaceOptions) -> Result<usize> {
    Ok(nullspace(mat, opts)?.rank)
}

/// Is `v` in the span of a reduced null-space basis? Such a basis has one vector per
/// free column with 1 there and 0 on the other free columns, so `v` is in the span iff
/// it equals the combination read off its free coordinates.
pub fn in_reduced_span(basis: &[Vec<(usize, Q)>], pivots: &[usize], v: &[(usize, Q)]) -> bool {
    let free_of = |b: &Vec<(usize, Q)>| -> usize {
        b.iter()
            .find(|(c, _)| pivots.binary_search(c).is_err())
            .map(|(c, _)| *c)
            .unwrap()
    };
    let mut acc: HashMap<usize, Q> = HashMap::new();
    for b in basis {
        let f = free_of(b);
        let coef = v.iter().find(|(c, _)| *c == f).map(|(_, x)| x.clone());
        if let Some(coef) = coef {
            for (c, x) in b {
                *acc.entry(*c).or_insert_with(Q::zero) += &coef * x;
            }
        }
    }
    for (c, x) in v {
        *acc.entry(*c).or_insert_with(Q::zero) -= x;
    }
    acc.values().all(|x| x.is_zero())
}
