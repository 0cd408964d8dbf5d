//! Independent oracles shared by the integration suites.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};

use num_traits::{One, Signed, Zero};
use spencer_core::kernel::KernelBasis;
use spencer_core::lie::{DualVector, LieAlgebra};
use spencer_core::sym::enumerate_basis;
use spencer_core::Q;

pub fn q(n: i64) -> Q {
    Q::from_integer(n.into())
}

pub fn qr(n: i64, d: i64) -> Q {
    Q::new(n.into(), d.into())
}

/// Polynomials keyed by sorted index vectors.
pub type Poly = BTreeMap<Vec<usize>, Q>;

fn add_into(p: &mut Poly, m: Vec<usize>, c: Q) {
    if c.is_zero() {
        return;
    }
    let e = p.entry(m.clone()).or_insert_with(Q::zero);
    *e += c;
    if e.is_zero() {
        p.remove(&m);
    }
}

fn mul(a: &Poly, b: &Poly) -> Poly {
    let mut out = Poly::new();
    for (ma, ca) in a {
        for (mb, cb) in b {
            let mut m = ma.clone();
            m.extend_from_slice(mb);
            m.sort_unstable();
            add_into(&mut out, m, ca * cb);
        }
    }
    out
}

/// Dense structure constants `c[x][y][z]` with `[e_x, e_y] = sum_z c[x][y][z] e_z`.
pub fn structure_constants(g: &LieAlgebra) -> Vec<Vec<Vec<Q>>> {
    let n = g.dim;
    let mut c = vec![vec![vec![Q::zero(); n]; n]; n];
    for x in 0..n {
        for y in 0..n {
            for &(z, v) in g.bracket_basis(x, y) {
                c[x][y][z] = q(v);
            }
        }
    }
    c
}

/// `tr(ad_a ad_b)` straight from the structure constants.
pub fn killing_by_trace(c: &[Vec<Vec<Q>>]) -> Vec<Vec<Q>> {
    let n = c.len();
    let mut k = vec![vec![Q::zero(); n]; n];
    for a in 0..n {
        for b in 0..n {
            let mut t = Q::zero();
            for y in 0..n {
                for z in 0..n {
                    // [a, [b, y]] coefficient on y
                    if !c[b][y][z].is_zero() && !c[a][z][y].is_zero() {
                        t += &c[b][y][z] * &c[a][z][y];
                    }
                }
            }
            k[a][b] = t;
        }
    }
    k
}

pub fn invert(m: &[Vec<Q>]) -> Vec<Vec<Q>> {
    let n = m.len();
    let mut a: Vec<Vec<Q>> = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { Q::one() } else { Q::zero() }));
            r
        })
        .collect();
    for col in 0..n {
        let p = (col..n).find(|&r| !a[r][col].is_zero()).expect("singular");
        a.swap(col, p);
        let inv = Q::one() / &a[col][col];
        for x in a[col].iter_mut() {
            *x *= &inv;
        }
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                let pivot = a[col].clone();
                for (x, y) in a[r].iter_mut().zip(pivot.iter()) {
                    *x -= &f * y;
                }
            }
        }
    }
    a.into_iter().map(|r| r[n..].to_vec()).collect()
}

/// Brute-force constrained operator: generator images from the double-bracket form,
/// indices raised with the inverse Killing form, extended by the recursive Leibniz rule
/// `delta(v s) = delta(v) s - v delta(s)`.
pub struct DenseOracle {
    pub n: usize,
    images: Vec<Poly>,
    graded: bool,
}

impl DenseOracle {
    pub fn new(g: &LieAlgebra, lam: &DualVector) -> Self {
        let n = g.dim;
        let c = structure_constants(g);
        let kinv = invert(&killing_by_trace(&c));
        let l = &lam.coefficients;
        // lam([x, y])
        let lb = |x: usize, y: usize| -> Q {
            let mut s = Q::zero();
            for z in 0..n {
                if !c[x][y][z].is_zero() {
                    s += &c[x][y][z] * &l[z];
                }
            }
            s
        };
        let mut images = Vec::with_capacity(n);
        for v in 0..n {
            // lam([w1, [w2, v]])
            let mut h = vec![vec![Q::zero(); n]; n];
            for w1 in 0..n {
                for w2 in 0..n {
                    let mut s = Q::zero();
                    for z in 0..n {
                        if !c[w2][v][z].is_zero() {
                            s += &c[w2][v][z] * lb(w1, z);
                        }
                    }
                    h[w1][w2] = s;
                }
            }
            let half = qr(1, 2);
            let b: Vec<Vec<Q>> = (0..n)
                .map(|i| (0..n).map(|j| &half * (&h[i][j] + &h[j][i])).collect())
                .collect();
            let mut poly = Poly::new();
            for a in 0..n {
                for bb in 0..n {
                    let mut t = Q::zero();
                    for x in 0..n {
                        if kinv[a][x].is_zero() {
                            continue;
                        }
                        for y in 0..n {
                            if !b[x][y].is_zero() && !kinv[y][bb].is_zero() {
                                t += &kinv[a][x] * &b[x][y] * &kinv[y][bb];
                            }
                        }
                    }
                    let mut m = vec![a, bb];
                    m.sort_unstable();
                    add_into(&mut poly, m, t);
                }
            }
            images.push(poly);
        }
        DenseOracle { n, images, graded: true }
    }

    /// `v -> sum_i e_i [e_i, v]`, extended as an ordinary derivation.
    pub fn classical(g: &LieAlgebra) -> Self {
        let n = g.dim;
        let c = structure_constants(g);
        let images = (0..n)
            .map(|v| {
                let mut poly = Poly::new();
                for i in 0..n {
                    for z in 0..n {
                        let mut m = vec![i, z];
                        m.sort_unstable();
                        add_into(&mut poly, m, c[i][v][z].clone());
                    }
                }
                poly
            })
            .collect();
        DenseOracle { n, images, graded: false }
    }

    pub fn apply(&self, m: &[usize]) -> Poly {
        if m.len() == 1 {
            return self.images[m[0]].clone();
        }
        let first: Poly = [(vec![m[0]], Q::one())].into_iter().collect();
        let rest: Poly = [(m[1..].to_vec(), Q::one())].into_iter().collect();
        let mut out = mul(&self.images[m[0]], &rest);
        for (mm, cc) in mul(&first, &self.apply(&m[1..])) {
            add_into(&mut out, mm, if self.graded { -cc } else { cc });
        }
        out
    }

    /// Dense matrix of `delta` on `Sym^k`; columns follow `domain`, rows follow `codomain`.
    pub fn matrix(&self, k: usize) -> (Vec<Vec<usize>>, Vec<Vec<usize>>, Vec<Vec<Q>>) {
        let domain = monomials(self.n, k);
        let codomain = monomials(self.n, k + 1);
        let row_of: HashMap<&Vec<usize>, usize> = codomain.iter().enumerate().map(|(i, m)| (m, i)).collect();
        let mut a = vec![vec![Q::zero(); domain.len()]; codomain.len()];
        for (j, m) in domain.iter().enumerate() {
            for (mm, c) in self.apply(m) {
                a[row_of[&mm]][j] = c;
            }
        }
        (domain, codomain, a)
    }
}

/// Sorted index vectors of degree `k` in `n` variables, lexicographic.
pub fn monomials(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(n: usize, k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(n, k, i, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, k, 0, &mut Vec::new(), &mut out);
    out
}

/// Row-reduce in place; returns pivot columns.
pub fn rref(a: &mut [Vec<Q>]) -> Vec<usize> {
    let rows = a.len();
    let cols = if rows == 0 { 0 } else { a[0].len() };
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !a[i][c].is_zero()) else {
            continue;
        };
        a.swap(r, p);
        let inv = Q::one() / &a[r][c];
        for x in a[r].iter_mut() {
            *x *= &inv;
        }
        for i in 0..rows {
            if i != r && !a[i][c].is_zero() {
                let f = a[i][c].clone();
                let pivot = a[r].clone();
                for (x, y) in a[i].iter_mut().zip(pivot.iter()) {
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

pub fn dense_rank(a: &[Vec<Q>]) -> usize {
    let mut b = a.to_vec();
    rref(&mut b).len()
}

/// Null space basis of a dense matrix, one vector per free column.
pub fn dense_nullspace(a: &[Vec<Q>], cols: usize) -> Vec<Vec<Q>> {
    let mut b = a.to_vec();
    let pivots = rref(&mut b);
    let free: Vec<usize> = (0..cols).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v = vec![Q::zero(); cols];
            v[f] = Q::one();
            for (r, &p) in pivots.iter().enumerate() {
                v[p] = -b[r][f].clone();
            }
            v
        })
        .collect()
}

/// Crate kernel vectors rewritten as dense vectors in the oracle's monomial order.
pub fn kernel_in_oracle_order(g: &LieAlgebra, kb: &KernelBasis, order: &[Vec<usize>]) -> Vec<Vec<Q>> {
    let crate_order = enumerate_basis(g, kb.k, u128::MAX).unwrap();
    let pos: HashMap<Vec<usize>, usize> = order.iter().enumerate().map(|(i, m)| (m.clone(), i)).collect();
    kb.vectors
        .iter()
        .map(|v| {
            let mut d = vec![Q::zero(); order.len()];
            for (i, x) in v {
                let m: Vec<usize> = crate_order[*i].indices().iter().map(|&t| t as usize).collect();
                d[pos[&m]] = x.clone();
            }
            d
        })
        .collect()
}

/// Two families of vectors span the same subspace.
pub fn same_span(a: &[Vec<Q>], b: &[Vec<Q>]) -> bool {
    let ra = dense_rank(a);
    let rb = dense_rank(b);
    let mut both = a.to_vec();
    both.extend_from_slice(b);
    ra == rb && dense_rank(&both) == ra
}

pub fn max_abs(v: &[Q]) -> Q {
    v.iter().map(|x| x.abs()).max().unwrap_or_else(Q::zero)
}

/// Positive roots by closure: start from simple roots and add simple roots while the
/// alpha-string condition allows.
pub fn positive_roots_by_closure(cartan: &[Vec<i64>]) -> usize {
    let r = cartan.len();
    let mut roots: Vec<Vec<i64>> = (0..r)
        .map(|i| (0..r).map(|j| i64::from(i == j)).collect())
        .collect();
    let mut layer = roots.clone();
    while !layer.is_empty() {
        let mut next = Vec::new();
        for beta in &layer {
            for i in 0..r {
                // <beta, alpha_i^vee> = sum_j beta_j A[i][j]
                let pairing: i64 = (0..r).map(|j| beta[j] * cartan[i][j]).sum();
                let mut p = 0;
                let mut down = beta.clone();
                loop {
                    down[i] -= 1;
                    if down.iter().all(|&x| x == 0) || !roots.contains(&down) {
                        break;
                    }
                    p += 1;
                }
                if p - pairing > 0 {
                    let mut up = beta.clone();
                    up[i] += 1;
                    if !roots.contains(&up) && !next.contains(&up) {
                        next.push(up);
                    }
                }
            }
        }
        roots.extend(next.iter().cloned());
        layer = next;
    }
    roots.len()
}
