//! Semisimple Lie algebras in a Chevalley basis.
//!
//! Cartan matrices follow the convention `A[i][j] = <alpha_j, alpha_i^vee> = alpha_j(h_i)`,
//! with Bourbaki node numbering. Roots are stored as integer coordinate vectors in the
//! basis of simple roots.
//!
//! Basis order (part of every on-disk format): `h_1..h_r`, then `e_alpha` for positive
//! roots sorted by height ascending and, within a height, by coordinate vector in
//! descending lexicographic order (so simple roots come out as `alpha_1, alpha_2, ...`),
//! then `f_alpha` in the same root order.
//!
//! Sign convention: for every non-simple positive root `xi` the extraspecial pair
//! `(alpha, beta)` (the special pair with `alpha` earliest in root order) gets
//! `N_{alpha,beta} = +(p + 1)`. All remaining structure constants follow from the
//! relations `N_{-a,-b} = -N_{a,b}`, `N_{a,b}/(c,c) = N_{b,c}/(a,a) = N_{c,a}/(b,b)` when
//! `a + b + c = 0`, and the four-root relation. With this choice `[e_a, f_a] = h_a` (the
//! coroot) and the map `e_a -> -f_a, f_a -> -e_a, h -> -h` is an automorphism.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpencerError};
use crate::sym::{Monomial, SymElement};
use crate::Q;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    A,
    B,
    C,
    D,
    E,
    F,
    G,
}

impl Family {
    pub fn is_exceptional(self) -> bool {
        matches!(self, Family::E | Family::F | Family::G)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            Family::A => 'A',
            Family::B => 'B',
            Family::C => 'C',
            Family::D => 'D',
            Family::E => 'E',
            Family::F => 'F',
            Family::G => 'G',
        };
        write!(f, "{c}")
    }
}

impl FromStr for Family {
    type Err = SpencerError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" | "a" => Ok(Family::A),
            "B" | "b" => Ok(Family::B),
            "C" | "c" => Ok(Family::C),
            "D" | "d" => Ok(Family::D),
            "E" | "e" => Ok(Family::E),
            "F" | "f" => Ok(Family::F),
            "G" | "g" => Ok(Family::G),
            _ => Err(SpencerError::InvalidLabel(s.to_string())),
        }
    }
}

fn rank_is_valid(family: Family, rank: usize) -> bool {
    match family {
        Family::A => rank >= 1,
        Family::B | Family::C => rank >= 2,
        Family::D => rank >= 4,
        Family::E => (6..=8).contains(&rank),
        Family::F => rank == 4,
        Family::G => rank == 2,
    }
}

/// The standard Cartan matrix for a (family, rank) pair.
pub fn standard_cartan_matrix(family: Family, rank: usize) -> Result<Vec<Vec<i64>>> {
    if !rank_is_valid(family, rank) {
        return Err(SpencerError::InvalidLabel(format!("{family}{rank}")));
    }
    let n = rank;
    let mut a = vec![vec![0i64; n]; n];
    for (i, row) in a.iter_mut().enumerate() {
        row[i] = 2;
    }
    let mut link = |i: usize, j: usize| {
        a[i][j] = -1;
        a[j][i] = -1;
    };
    match family {
        Family::A | Family::B | Family::C | Family::F | Family::G => {
            for i in 0..n - 1 {
                link(i, i + 1);
            }
        }
        Family::D => {
            for i in 0..n - 2 {
                link(i, i + 1);
            }
            link(n - 3, n - 1);
        }
        Family::E => {
            link(0, 2);
            link(1, 3);
            for i in 2..n - 1 {
                link(i, i + 1);
            }
        }
    }
    match family {
        // alpha_n short
        Family::B => a[n - 1][n - 2] = -2,
        // alpha_n long
        Family::C => a[n - 2][n - 1] = -2,
        // alpha_1, alpha_2 long; alpha_3, alpha_4 short
        Family::F => a[2][1] = -2,
        // alpha_1 short, alpha_2 long
        Family::G => a[0][1] = -3,
        _ => {}
    }
    Ok(a)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CartanDatum {
    pub family: Family,
    pub rank: usize,
    pub cartan_matrix: Vec<Vec<i64>>,
}

impl CartanDatum {
    pub fn new(family: Family, rank: usize) -> Result<Self> {
        let cartan_matrix = standard_cartan_matrix(family, rank)?;
        Ok(CartanDatum {
            family,
            rank,
            cartan_matrix,
        })
    }

    /// Accepts an explicit matrix, which must coincide with the standard table.
    pub fn from_matrix(family: Family, rank: usize, matrix: Vec<Vec<i64>>) -> Result<Self> {
        if matrix.len() != rank || matrix.iter().any(|r| r.len() != rank) {
            return Err(SpencerError::InvalidCartan(format!(
                "matrix is not {rank}x{rank}"
            )));
        }
        for (i, row) in matrix.iter().enumerate() {
            for (j, &x) in row.iter().enumerate() {
                if i == j && x != 2 {
                    return Err(SpencerError::InvalidCartan(format!(
                        "diagonal entry ({i},{j}) = {x}, expected 2"
                    )));
                }
                if i != j && x > 0 {
                    return Err(SpencerError::InvalidCartan(format!(
                        "off-diagonal entry ({i},{j}) = {x} is positive"
                    )));
                }
                if i != j && (x == 0) != (matrix[j][i] == 0) {
                    return Err(SpencerError::InvalidCartan(format!(
                        "entry ({i},{j}) = {x} but ({j},{i}) = {}",
                        matrix[j][i]
                    )));
                }
            }
        }
        let standard = standard_cartan_matrix(family, rank)?;
        for i in 0..rank {
            for j in 0..rank {
                if matrix[i][j] != standard[i][j] {
                    return Err(SpencerError::InvalidCartan(format!(
                        "entry ({i},{j}) = {}, standard {family}{rank} table has {}",
                        matrix[i][j], standard[i][j]
                    )));
                }
            }
        }
        Ok(CartanDatum {
            family,
            rank,
            cartan_matrix: matrix,
        })
    }

    pub fn label(&self) -> String {
        format!("{}{}", self.family, self.rank)
    }
}

impl FromStr for CartanDatum {
    type Err = SpencerError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || SpencerError::InvalidLabel(s.to_string());
        let mut chars = s.chars();
        let fam = chars.next().ok_or_else(bad)?;
        let family: Family = fam.to_string().parse().map_err(|_| bad())?;
        let rank: usize = chars.as_str().parse().map_err(|_| bad())?;
        CartanDatum::new(family, rank).map_err(|_| bad())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RootSystem {
    pub datum: CartanDatum,
    pub simple_roots: Vec<Vec<i32>>,
    pub positive_roots: Vec<Vec<i32>>,
    pub root_count: usize,
    /// `(alpha_i, alpha_j)`, scaled so that short roots have squared length 2.
    pub inner_products: Vec<Vec<i64>>,
}

impl RootSystem {
    pub fn rank(&self) -> usize {
        self.datum.rank
    }

    pub fn inner(&self, a: &[i32], b: &[i32]) -> i64 {
        let mut s = 0i64;
        for (i, &x) in a.iter().enumerate() {
            if x == 0 {
                continue;
            }
            for (j, &y) in b.iter().enumerate() {
                s += x as i64 * y as i64 * self.inner_products[i][j];
            }
        }
        s
    }

    /// `<root, alpha_i^vee>`, the eigenvalue of `h_i` on `e_root`.
    pub fn pairing(&self, root: &[i32], i: usize) -> i64 {
        root.iter()
            .enumerate()
            .map(|(j, &c)| c as i64 * self.datum.cartan_matrix[i][j])
            .sum()
    }

    pub fn height(root: &[i32]) -> i64 {
        root.iter().map(|&c| c as i64).sum()
    }

    /// Coordinates of the coroot of `root` in the basis of simple coroots.
    pub fn coroot(&self, root: &[i32]) -> Vec<i64> {
        let n2 = self.inner(root, root);
        root.iter()
            .enumerate()
            .map(|(i, &c)| {
                let num = c as i64 * self.inner_products[i][i];
                debug_assert_eq!(num % n2, 0);
                num / n2
            })
            .collect()
    }

    pub fn algebra_dim(&self) -> usize {
        self.rank() + 2 * self.positive_roots.len()
    }
}

fn symmetrizer(a: &[Vec<i64>]) -> Result<Vec<i64>> {
    // (alpha_i, alpha_i) = 2 d_i with A[i][j] d_i = A[j][i] d_j
    let n = a.len();
    let mut d: Vec<Option<Q>> = vec![None; n];
    d[0] = Some(Q::one());
    let mut stack = vec![0usize];
    while let Some(i) = stack.pop() {
        for j in 0..n {
            if i == j || a[i][j] == 0 {
                continue;
            }
            let di = d[i].clone().unwrap();
            let dj = di * Q::from_integer(a[i][j].into()) / Q::from_integer(a[j][i].into());
            match &d[j] {
                None => {
                    d[j] = Some(dj);
                    stack.push(j);
                }
                Some(old) if *old != dj => {
                    return Err(SpencerError::InvalidCartan(format!(
                        "matrix is not symmetrizable at ({i},{j})"
                    )))
                }
                _ => {}
            }
        }
    }
    let d: Vec<Q> = d
        .into_iter()
        .map(|x| x.ok_or_else(|| SpencerError::InvalidCartan("Dynkin diagram is disconnected".into())))
        .collect::<Result<_>>()?;
    let min = d.iter().min().unwrap().clone();
    d.iter()
        .map(|x| {
            let r = x / &min;
            if !r.is_integer() {
                return Err(SpencerError::InvalidCartan("non-integral symmetrizer".into()));
            }
            Ok(r.to_integer().to_i64().unwrap())
        })
        .collect()
}

fn root_order(a: &[i32], b: &[i32]) -> std::cmp::Ordering {
    RootSystem::height(a)
        .cmp(&RootSystem::height(b))
        .then_with(|| b.cmp(a))
}

pub fn build_root_system(datum: &CartanDatum) -> Result<RootSystem> {
    let datum = CartanDatum::from_matrix(datum.family, datum.rank, datum.cartan_matrix.clone())?;
    let n = datum.rank;
    let a = &datum.cartan_matrix;
    let d = symmetrizer(a)?;
    let inner_products: Vec<Vec<i64>> = (0..n)
        .map(|i| (0..n).map(|j| a[i][j] * d[i]).collect())
        .collect();

    let simple_roots: Vec<Vec<i32>> = (0..n)
        .map(|i| {
            let mut v = vec![0; n];
            v[i] = 1;
            v
        })
        .collect();
    let mut known: std::collections::HashSet<Vec<i32>> = simple_roots.iter().cloned().collect();
    let mut all = simple_roots.clone();
    let mut frontier = simple_roots.clone();
    while !frontier.is_empty() {
        let mut next: Vec<Vec<i32>> = Vec::new();
        for beta in &frontier {
            for i in 0..n {
                // alpha_i-string through beta: p - q = <beta, alpha_i^vee>
                let mut p = 0i64;
                let mut probe = beta.clone();
                loop {
                    probe[i] -= 1;
                    if known.contains(&probe) {
                        p += 1;
                    } else {
                        break;
                    }
                }
                let pair: i64 = (0..n).map(|j| beta[j] as i64 * a[i][j]).sum();
                if p - pair > 0 {
                    let mut up = beta.clone();
                    up[i] += 1;
                    if known.insert(up.clone()) {
                        next.push(up);
                    }
                }
            }
        }
        all.extend(next.iter().cloned());
        frontier = next;
    }
    all.sort_by(|x, y| root_order(x, y));
    let root_count = 2 * all.len();
    Ok(RootSystem {
        datum,
        simple_roots,
        positive_roots: all,
        root_count,
        inner_products,
    })
}

/// Structure constants `N_{a,b}` over all roots, indexed by signed root index
/// (`0..P` positive, `P..2P` their negatives).
struct StructureConstants {
    roots: Vec<Vec<i32>>,
    index: HashMap<Vec<i32>, usize>,
    norms: Vec<i64>,
    npos: usize,
    table: HashMap<(usize, usize), i64>,
}

impl StructureConstants {
    fn neg(&self, i: usize) -> usize {
        if i < self.npos {
            i + self.npos
        } else {
            i - self.npos
        }
    }

    fn sum(&self, a: usize, b: usize) -> Option<usize> {
        let s: Vec<i32> = self.roots[a]
            .iter()
            .zip(&self.roots[b])
            .map(|(x, y)| x + y)
            .collect();
        self.index.get(&s).copied()
    }

    fn diff(&self, a: usize, b: usize) -> Option<usize> {
        self.sum(a, self.neg(b))
    }

    /// Largest `p` with `b - p a` a root.
    fn string_below(&self, a: usize, b: usize) -> i64 {
        let mut p = 0;
        let mut cur = self.roots[b].clone();
        loop {
            for (c, x) in cur.iter_mut().zip(&self.roots[a]) {
                *c -= x;
            }
            if self.index.contains_key(&cur) {
                p += 1;
            } else {
                return p;
            }
        }
    }

    fn ratio(&self, num: usize, den: usize) -> Q {
        Q::new(self.norms[num].into(), self.norms[den].into())
    }

    /// `N_{a,b}` for any pair with `a + b` a root, using only positive pairs already tabulated.
    fn n(&self, a: usize, b: usize) -> Result<Q> {
        let p = self.npos;
        let missing = || {
            SpencerError::Construction(format!(
                "structure constant N({:?},{:?}) requested before it was fixed",
                self.roots[a], self.roots[b]
            ))
        };
        let s = self.sum(a, b).ok_or_else(missing)?;
        let pos = |x: usize, y: usize| -> Result<Q> {
            self.table
                .get(&(x, y))
                .map(|&v| Q::from_integer(v.into()))
                .ok_or_else(missing)
        };
        if a < p && b < p {
            return pos(a, b);
        }
        if a >= p && b >= p {
            return Ok(-pos(a - p, b - p)?);
        }
        let c = self.neg(s);
        if a < p {
            if c < p {
                Ok(self.ratio(c, b) * pos(c, a)?)
            } else {
                Ok(-(self.ratio(c, a) * pos(self.neg(b), self.neg(c))?))
            }
        } else if c < p {
            Ok(self.ratio(c, a) * pos(b, c)?)
        } else {
            Ok(-(self.ratio(c, b) * pos(self.neg(c), self.neg(a))?))
        }
    }

    fn build(rs: &RootSystem) -> Result<Self> {
        let npos = rs.positive_roots.len();
        let mut roots = rs.positive_roots.clone();
        roots.extend(
            rs.positive_roots
                .iter()
                .map(|r| r.iter().map(|x| -x).collect::<Vec<_>>()),
        );
        let index: HashMap<Vec<i32>, usize> =
            roots.iter().enumerate().map(|(i, r)| (r.clone(), i)).collect();
        let norms = roots.iter().map(|r| rs.inner(r, r)).collect();
        let mut sc = StructureConstants {
            roots,
            index,
            norms,
            npos,
            table: HashMap::new(),
        };
        for xi in 0..npos {
            if RootSystem::height(&sc.roots[xi]) == 1 {
                continue;
            }
            let mut special = Vec::new();
            for a in 0..xi {
                if let Some(b) = sc.diff(xi, a) {
                    if b < npos && a < b {
                        special.push((a, b));
                    }
                }
            }
            let (a1, b1) = *special.first().ok_or_else(|| {
                SpencerError::Construction(format!(
                    "root {:?} has no decomposition",
                    sc.roots[xi]
                ))
            })?;
            let n1 = sc.string_below(a1, b1) + 1;
            sc.table.insert((a1, b1), n1);
            sc.table.insert((b1, a1), -n1);
            for &(a, b) in &special[1..] {
                let mut t = Q::zero();
                if let Some(d) = sc.diff(b, a1) {
                    t += sc.n(b, sc.neg(a1))? * sc.n(a, sc.neg(b1))?
                        / Q::from_integer(sc.norms[d].into());
                }
                if let Some(d) = sc.diff(a, a1) {
                    t += sc.n(sc.neg(a1), a)? * sc.n(b, sc.neg(b1))?
                        / Q::from_integer(sc.norms[d].into());
                }
                let val = Q::from_integer(sc.norms[xi].into()) * t / Q::from_integer(n1.into());
                let expected = sc.string_below(a, b) + 1;
                if !val.is_integer() || val.abs() != Q::from_integer(expected.into()) {
                    return Err(SpencerError::Construction(format!(
                        "N({:?},{:?}) = {val}, expected +-{expected} (triple with {:?})",
                        sc.roots[a], sc.roots[b], sc.roots[xi]
                    )));
                }
                let v = val.to_integer().to_i64().unwrap();
                sc.table.insert((a, b), v);
                sc.table.insert((b, a), -v);
            }
        }
        Ok(sc)
    }
}

/// Immutable bracket and Killing tables of a semisimple Lie algebra.
#[derive(Clone, Debug)]
pub struct LieAlgebra {
    pub roots: RootSystem,
    pub dim: usize,
    pub rank: usize,
    pub basis_labels: Vec<String>,
    brackets: Vec<Vec<(usize, i64)>>,
    weights: Vec<Vec<i64>>,
    killing: Vec<Vec<i64>>,
    killing_inverse: Vec<Vec<(usize, Q)>>,
    fingerprint: u64,
}

fn coords_label(prefix: char, r: &[i32]) -> String {
    let body: Vec<String> = r.iter().map(|c| c.to_string()).collect();
    format!("{prefix}({})", body.join(","))
}

pub fn build_chevalley_basis(rs: &RootSystem) -> Result<LieAlgebra> {
    let rank = rs.rank();
    let npos = rs.positive_roots.len();
    let dim = rank + 2 * npos;
    let sc = StructureConstants::build(rs)?;
    let root_basis = |r: usize| rank + r;

    let mut labels: Vec<String> = (1..=rank).map(|i| format!("h{i}")).collect();
    labels.extend(rs.positive_roots.iter().map(|r| coords_label('e', r)));
    labels.extend(rs.positive_roots.iter().map(|r| coords_label('f', r)));

    let mut weights = vec![vec![0i64; rank]; dim];
    for (r, root) in sc.roots.iter().enumerate() {
        weights[root_basis(r)] = (0..rank).map(|i| rs.pairing(root, i)).collect();
    }

    let mut brackets: Vec<Vec<(usize, i64)>> = vec![Vec::new(); dim * dim];
    for x in 0..dim {
        for y in 0..dim {
            let mut out: Vec<(usize, i64)> = Vec::new();
            match (x < rank, y < rank) {
                (true, true) => {}
                (true, false) => {
                    let w = weights[y][x];
                    if w != 0 {
                        out.push((y, w));
                    }
                }
                (false, true) => {
                    let w = weights[x][y];
                    if w != 0 {
                        out.push((x, -w));
                    }
                }
                (false, false) => {
                    let (a, b) = (x - rank, y - rank);
                    if sc.neg(a) == b {
                        let pos = if a < npos { a } else { b };
                        let sign = if a < npos { 1 } else { -1 };
                        for (i, c) in rs.coroot(&sc.roots[pos]).into_iter().enumerate() {
                            if c != 0 {
                                out.push((i, sign * c));
                            }
                        }
                    } else if let Some(s) = sc.sum(a, b) {
                        let n = sc.n(a, b)?;
                        if !n.is_integer() {
                            return Err(SpencerError::Construction(format!(
                                "non-integral N({:?},{:?}) = {n}",
                                sc.roots[a], sc.roots[b]
                            )));
                        }
                        out.push((root_basis(s), n.to_integer().to_i64().unwrap()));
                    }
                }
            }
            out.sort_unstable();
            brackets[x * dim + y] = out;
        }
    }

    let mut hasher = DefaultHasher::new();
    rs.datum.hash(&mut hasher);
    let fingerprint = hasher.finish();

    let mut alg = LieAlgebra {
        roots: rs.clone(),
        dim,
        rank,
        basis_labels: labels,
        brackets,
        weights,
        killing: Vec::new(),
        killing_inverse: Vec::new(),
        fingerprint,
    };
    if let Some((x, y, z)) = alg.jacobi_violation() {
        return Err(SpencerError::Construction(format!(
            "Jacobi identity fails on ({}, {}, {})",
            alg.basis_labels[x], alg.basis_labels[y], alg.basis_labels[z]
        )));
    }
    alg.killing = alg.killing_by_trace();
    alg.killing_inverse = alg.invert_killing()?;
    Ok(alg)
}

impl Hash for CartanDatum {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.family.hash(state);
        self.rank.hash(state);
        self.cartan_matrix.hash(state);
    }
}

impl LieAlgebra {
    pub fn from_datum(datum: &CartanDatum) -> Result<Self> {
        build_chevalley_basis(&build_root_system(datum)?)
    }

    pub fn from_label(label: &str) -> Result<Self> {
        Self::from_datum(&label.parse()?)
    }

    pub fn label(&self) -> String {
        self.roots.datum.label()
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn num_positive_roots(&self) -> usize {
        self.roots.positive_roots.len()
    }

    /// Basis index of `e_alpha` for the positive root with index `r`.
    pub fn e_index(&self, r: usize) -> usize {
        self.rank + r
    }

    pub fn f_index(&self, r: usize) -> usize {
        self.rank + self.num_positive_roots() + r
    }

    /// `[b_x, b_y]` as a sorted sparse combination of basis indices.
    pub fn bracket_basis(&self, x: usize, y: usize) -> &[(usize, i64)] {
        &self.brackets[x * self.dim + y]
    }

    /// Weight of basis element `i`: its eigenvalues under `ad h_1 .. ad h_r`.
    pub fn weight(&self, i: usize) -> &[i64] {
        &self.weights[i]
    }

    pub fn killing(&self) -> &[Vec<i64>] {
        &self.killing
    }

    /// Sparse rows of the inverse Killing matrix.
    pub fn killing_inverse(&self) -> &[Vec<(usize, Q)>] {
        &self.killing_inverse
    }

    /// Bracket of two dense coefficient vectors.
    pub fn bracket_dense(&self, x: &[Q], y: &[Q]) -> Vec<Q> {
        let mut out = vec![Q::zero(); self.dim];
        for (i, a) in x.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in y.iter().enumerate() {
                if b.is_zero() {
                    continue;
                }
                let ab = a * b;
                for &(k, c) in self.bracket_basis(i, j) {
                    out[k] += &ab * Q::from_integer(c.into());
                }
            }
        }
        out
    }

    pub fn basis_element(&self, i: usize) -> SymElement {
        SymElement::generator(self, i)
    }

    /// Bilinear extension of the bracket to degree-1 elements.
    pub fn bracket(&self, x: &SymElement, y: &SymElement) -> Result<SymElement> {
        for e in [x, y] {
            if e.algebra() != self.fingerprint || e.dim() != self.dim {
                return Err(SpencerError::AlgebraMismatch);
            }
            if e.degree() != 1 {
                return Err(SpencerError::DegreeMismatch {
                    expected: 1,
                    found: e.degree(),
                });
            }
        }
        let mut acc: std::collections::BTreeMap<usize, Q> = Default::default();
        for (mx, a) in x.terms() {
            for (my, b) in y.terms() {
                let ab = a * b;
                for &(k, c) in self.bracket_basis(mx.indices()[0] as usize, my.indices()[0] as usize) {
                    *acc.entry(k).or_insert_with(Q::zero) += &ab * Q::from_integer(c.into());
                }
            }
        }
        Ok(SymElement::from_terms(
            self,
            1,
            acc.into_iter()
                .map(|(k, c)| (Monomial::new(vec![k as u16]), c)),
        ))
    }

    /// `(ad*_x lam)(y) = -lam([x, y])`.
    pub fn coadjoint(&self, x: &SymElement, lam: &DualVector) -> Result<DualVector> {
        if lam.algebra != self.fingerprint || x.algebra() != self.fingerprint {
            return Err(SpencerError::AlgebraMismatch);
        }
        if x.degree() != 1 {
            return Err(SpencerError::DegreeMismatch {
                expected: 1,
                found: x.degree(),
            });
        }
        let mut out = vec![Q::zero(); self.dim];
        for (mx, a) in x.terms() {
            let i = mx.indices()[0] as usize;
            for (y, slot) in out.iter_mut().enumerate() {
                for &(k, c) in self.bracket_basis(i, y) {
                    if !lam.coefficients[k].is_zero() {
                        *slot -= a * Q::from_integer(c.into()) * &lam.coefficients[k];
                    }
                }
            }
        }
        Ok(DualVector {
            algebra: self.fingerprint,
            coefficients: out,
        })
    }

    /// `lam([b_x, b_y])` for basis elements.
    pub fn pair_bracket(&self, lam: &DualVector, x: usize, y: usize) -> Q {
        let mut s = Q::zero();
        for &(k, c) in self.bracket_basis(x, y) {
            if !lam.coefficients[k].is_zero() {
                s += Q::from_integer(c.into()) * &lam.coefficients[k];
            }
        }
        s
    }

    /// First basis triple (i < j < k) on which the Jacobi sum is nonzero.
    pub fn jacobi_violation(&self) -> Option<(usize, usize, usize)> {
        let n = self.dim;
        (0..n)
            .into_par_iter()
            .filter_map(|x| {
                let mut buf = vec![0i64; n];
                let mut touched: Vec<usize> = Vec::new();
                for y in x + 1..n {
                    for z in y + 1..n {
                        for &(a, b, c) in &[(x, y, z), (y, z, x), (z, x, y)] {
                            for &(k, v) in self.bracket_basis(b, c) {
                                for &(m, w) in self.bracket_basis(a, k) {
                                    if buf[m] == 0 {
                                        touched.push(m);
                                    }
                                    buf[m] += v * w;
                                }
                            }
                        }
                        let bad = touched.iter().any(|&m| buf[m] != 0);
                        for &m in &touched {
                            buf[m] = 0;
                        }
                        touched.clear();
                        if bad {
                            return Some((x, y, z));
                        }
                    }
                }
                None
            })
            .find_first(|_| true)
    }

    /// Number of basis triples checked by [`Self::jacobi_violation`].
    pub fn jacobi_triple_count(&self) -> u64 {
        let n = self.dim as u64;
        n * (n - 1) * (n - 2) / 6
    }

    pub fn is_antisymmetric(&self) -> bool {
        (0..self.dim).all(|x| {
            (0..self.dim).all(|y| {
                let a = self.bracket_basis(x, y);
                let b = self.bracket_basis(y, x);
                a.len() == b.len() && a.iter().zip(b).all(|(p, q)| p.0 == q.0 && p.1 == -q.1)
            })
        })
    }

    /// `tr(ad x ad y)` from the bracket table.
    pub fn killing_by_trace(&self) -> Vec<Vec<i64>> {
        let n = self.dim;
        (0..n)
            .into_par_iter()
            .map(|x| {
                (0..n)
                    .map(|y| {
                        let mut t = 0i64;
                        for b in 0..n {
                            for &(c, v) in self.bracket_basis(y, b) {
                                for &(d, w) in self.bracket_basis(x, c) {
                                    if d == b {
                                        t += v * w;
                                    }
                                }
                            }
                        }
                        t
                    })
                    .collect()
            })
            .collect()
    }

    /// Killing form from root data: `K(h_i,h_j) = sum_alpha alpha(h_i) alpha(h_j)` and
    /// `K(e_alpha, f_alpha) = K(h_alpha, h_alpha) / 2`.
    pub fn killing_by_roots(&self) -> Vec<Vec<i64>> {
        let n = self.dim;
        let r = self.rank;
        let p = self.num_positive_roots();
        let mut k = vec![vec![0i64; n]; n];
        for i in 0..r {
            for j in 0..r {
                let s: i64 = self
                    .roots
                    .positive_roots
                    .iter()
                    .map(|a| self.roots.pairing(a, i) * self.roots.pairing(a, j))
                    .sum();
                k[i][j] = 2 * s;
            }
        }
        for (a, root) in self.roots.positive_roots.iter().enumerate() {
            let co = self.roots.coroot(root);
            let mut khh = 0i64;
            for i in 0..r {
                for j in 0..r {
                    khh += co[i] * co[j] * k[i][j];
                }
            }
            let (e, f) = (r + a, r + p + a);
            k[e][f] = khh / 2;
            k[f][e] = khh / 2;
        }
        k
    }

    fn invert_killing(&self) -> Result<Vec<Vec<(usize, Q)>>> {
        let r = self.rank;
        let p = self.num_positive_roots();
        let block: Vec<Vec<Q>> = (0..r)
            .map(|i| (0..r).map(|j| Q::from_integer(self.killing[i][j].into())).collect())
            .collect();
        let inv = crate::linalg::dense_inverse(&block).ok_or_else(|| {
            SpencerError::Construction("Killing form is degenerate on the Cartan subalgebra".into())
        })?;
        let mut rows: Vec<Vec<(usize, Q)>> = vec![Vec::new(); self.dim];
        for i in 0..r {
            for j in 0..r {
                if !inv[i][j].is_zero() {
                    rows[i].push((j, inv[i][j].clone()));
                }
            }
        }
        for a in 0..p {
            let (e, f) = (r + a, r + p + a);
            let kef = self.killing[e][f];
            if kef == 0 {
                return Err(SpencerError::Construction(format!(
                    "Killing form vanishes on ({}, {})",
                    self.basis_labels[e], self.basis_labels[f]
                )));
            }
            let v = Q::new(BigInt::one(), kef.into());
            rows[e].push((f, v.clone()));
            rows[f].push((e, v));
        }
        Ok(rows)
    }

    /// Exact determinant of the Killing matrix.
    pub fn killing_determinant(&self) -> Q {
        let m: Vec<Vec<Q>> = self
            .killing
            .iter()
            .map(|r| r.iter().map(|&x| Q::from_integer(x.into())).collect())
            .collect();
        crate::linalg::dense_determinant(&m)
    }

    pub fn to_document(&self) -> AlgebraDocument {
        let mut brackets = Vec::new();
        for i in 0..self.dim {
            for j in 0..self.dim {
                for &(k, c) in self.bracket_basis(i, j) {
                    brackets.push((i, j, k, c, 1));
                }
            }
        }
        AlgebraDocument {
            schema_version: ALGEBRA_SCHEMA_VERSION,
            label: self.label(),
            family: self.roots.datum.family,
            rank: self.rank,
            cartan_matrix: self.roots.datum.cartan_matrix.clone(),
            dim: self.dim,
            basis_labels: self.basis_labels.clone(),
            brackets,
            killing: self.killing.clone(),
        }
    }
}

pub const ALGEBRA_SCHEMA_VERSION: u32 = 1;

/// Versioned JSON form of an algebra table. Bracket records are
/// `(i, j, k, numerator, denominator)` meaning `[b_i, b_j]` has coefficient
/// `numerator/denominator` on `b_k`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct AlgebraDocument {
    pub schema_version: u32,
    pub label: String,
    pub family: Family,
    pub rank: usize,
    pub cartan_matrix: Vec<Vec<i64>>,
    pub dim: usize,
    pub basis_labels: Vec<String>,
    pub brackets: Vec<(usize, usize, usize, i64, i64)>,
    pub killing: Vec<Vec<i64>>,
}

/// An element of the dual space in the dual basis.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DualVector {
    pub(crate) algebra: u64,
    pub coefficients: Vec<Q>,
}

impl DualVector {
    pub fn zero(alg: &LieAlgebra) -> Self {
        DualVector {
            algebra: alg.fingerprint,
            coefficients: vec![Q::zero(); alg.dim],
        }
    }

    pub fn new(alg: &LieAlgebra, coefficients: Vec<Q>) -> Result<Self> {
        if coefficients.len() != alg.dim {
            return Err(SpencerError::Invalid(format!(
                "dual vector has {} entries, algebra dimension is {}",
                coefficients.len(),
                alg.dim
            )));
        }
        Ok(DualVector {
            algebra: alg.fingerprint,
            coefficients,
        })
    }

    /// Dual basis vector `b_i^*`.
    pub fn basis(alg: &LieAlgebra, i: usize) -> Self {
        let mut v = Self::zero(alg);
        v.coefficients[i] = Q::one();
        v
    }

    pub fn is_zero(&self) -> bool {
        self.coefficients.iter().all(|c| c.is_zero())
    }

    pub fn scaled(&self, c: &Q) -> Self {
        DualVector {
            algebra: self.algebra,
            coefficients: self.coefficients.iter().map(|x| x * c).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        DualVector {
            algebra: self.algebra,
            coefficients: self
                .coefficients
                .iter()
                .zip(&other.coefficients)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    /// `<lam, x>` for a degree-1 element.
    pub fn eval(&self, x: &SymElement) -> Q {
        x.terms()
            .map(|(m, c)| c * &self.coefficients[m.indices()[0] as usize])
            .sum()
    }
}
