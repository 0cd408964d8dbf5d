//! Penalized discrete Spencer energy on a lattice gauge configuration, its analytic
//! gradient, a backtracking gradient-descent minimizer, and a compatible-pair
//! certificate. Floating point throughout.
//!
//! Edges are the forward edges `v -> v + e_a` of the cubical torus, each counted once;
//! the reversed edge carries `-omega`.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpencerError};
use crate::lie::LieAlgebra;

#[derive(Clone, Debug)]
pub struct LatticeBundle {
    pub algebra: LieAlgebra,
    pub d: usize,
    pub n: usize,
    /// Gauge field on forward edges, indexed `node * d + axis`.
    pub omega: Vec<Vec<f64>>,
    /// `I - M_e` per edge, where `M_e lam = ad*_{omega(e)} lam`; row-major.
    transport: Vec<Vec<f64>>,
}

impl LatticeBundle {
    pub fn new(algebra: LieAlgebra, d: usize, n: usize, omega: Vec<Vec<f64>>) -> Result<Self> {
        if d == 0 || n == 0 {
            return Err(SpencerError::Invalid("lattice needs d >= 1 and N >= 1".into()));
        }
        let nodes = n.pow(d as u32);
        if omega.len() != nodes * d || omega.iter().any(|w| w.len() != algebra.dim) {
            return Err(SpencerError::Invalid(format!(
                "gauge field needs {} edges of length {}",
                nodes * d,
                algebra.dim
            )));
        }
        if omega.iter().flatten().any(|x| !x.is_finite()) {
            return Err(SpencerError::Invalid("non-finite gauge field".into()));
        }
        let transport = omega.par_iter().map(|w| transport_matrix(&algebra, w)).collect();
        Ok(LatticeBundle {
            algebra,
            d,
            n,
            omega,
            transport,
        })
    }

    pub fn zero_gauge(algebra: LieAlgebra, d: usize, n: usize) -> Result<Self> {
        let edges = n.pow(d as u32) * d;
        let dim = algebra.dim;
        Self::new(algebra, d, n, vec![vec![0.0; dim]; edges])
    }

    pub fn random_gauge(algebra: LieAlgebra, d: usize, n: usize, scale: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let edges = n.pow(d as u32) * d;
        let omega = (0..edges)
            .map(|_| (0..algebra.dim).map(|_| rng.gen_range(-scale..=scale)).collect())
            .collect();
        Self::new(algebra, d, n, omega)
    }

    pub fn nodes(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn edges(&self) -> usize {
        self.nodes() * self.d
    }

    pub fn dim(&self) -> usize {
        self.algebra.dim
    }

    /// `(tail, head)` of a forward edge.
    pub fn edge(&self, e: usize) -> (usize, usize) {
        let (v, a) = (e / self.d, e % self.d);
        let stride = self.n.pow(a as u32);
        let coord = (v / stride) % self.n;
        let head = if coord + 1 == self.n { v - coord * stride } else { v + stride };
        (v, head)
    }

    /// Gauge field on an edge traversed in either direction.
    pub fn edge_omega(&self, e: usize, forward: bool) -> Vec<f64> {
        if forward {
            self.omega[e].clone()
        } else {
            self.omega[e].iter().map(|x| -x).collect()
        }
    }

    fn apply_transport(&self, e: usize, lam: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let t = &self.transport[e];
        (0..n).map(|b| (0..n).map(|c| t[b * n + c] * lam[c]).sum()).collect()
    }

    fn apply_transport_t(&self, e: usize, r: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let t = &self.transport[e];
        let mut out = vec![0.0; n];
        for b in 0..n {
            if r[b] == 0.0 {
                continue;
            }
            for c in 0..n {
                out[c] += t[b * n + c] * r[b];
            }
        }
        out
    }

    /// Translate node indices by a lattice vector.
    pub fn translate_node(&self, v: usize, shift: &[usize]) -> usize {
        let mut out = 0;
        let mut stride = 1;
        for s in shift.iter().take(self.d) {
            let coord = (v / stride) % self.n;
            out += ((coord + s) % self.n) * stride;
            stride *= self.n;
        }
        out
    }
}

/// `I - M` with `(M lam)_y = -sum_x w_x lam([e_x, e_y])`.
fn transport_matrix(alg: &LieAlgebra, w: &[f64]) -> Vec<f64> {
    let n = alg.dim;
    let mut t = vec![0.0; n * n];
    for b in 0..n {
        t[b * n + b] = 1.0;
    }
    for (x, &wx) in w.iter().enumerate() {
        if wx == 0.0 {
            continue;
        }
        for y in 0..n {
            for &(k, c) in alg.bracket_basis(x, y) {
                // M[y][k] = -w_x c, so (I - M)[y][k] += w_x c
                t[y * n + k] += wx * c as f64;
            }
        }
    }
    t
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldConfig {
    /// One dual vector per node.
    pub lambda: Vec<Vec<f64>>,
}

impl FieldConfig {
    pub fn zero(b: &LatticeBundle) -> Self {
        FieldConfig {
            lambda: vec![vec![0.0; b.dim()]; b.nodes()],
        }
    }

    pub fn random(b: &LatticeBundle, scale: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        FieldConfig {
            lambda: (0..b.nodes())
                .map(|_| (0..b.dim()).map(|_| rng.gen_range(-scale..=scale)).collect())
                .collect(),
        }
    }

    /// Covariantly constant along a spanning tree of forward edges rooted at node 0:
    /// `lam(head) = (I - M_e) lam(tail)` on every tree edge.
    pub fn transported(b: &LatticeBundle, seed_value: &[f64]) -> Self {
        let mut lambda = vec![Vec::new(); b.nodes()];
        lambda[0] = seed_value.to_vec();
        for v in 1..b.nodes() {
            let (parent, axis) = tree_parent(b, v);
            lambda[v] = b.apply_transport(parent * b.d + axis, &lambda[parent]);
        }
        FieldConfig { lambda }
    }

    pub fn is_finite(&self) -> bool {
        self.lambda.iter().flatten().all(|x| x.is_finite())
    }
}

/// Parent of `v` in the forward spanning tree: step back along the highest axis with
/// a nonzero coordinate. Nodes are processed in increasing index, so parents come first.
fn tree_parent(b: &LatticeBundle, v: usize) -> (usize, usize) {
    let mut stride = b.n.pow(b.d as u32 - 1);
    for a in (0..b.d).rev() {
        if (v / stride) % b.n != 0 {
            return (v - stride, a);
        }
        stride /= b.n.max(1);
    }
    unreachable!("node 0 has no parent")
}

/// Forward edges of the spanning tree used by [`FieldConfig::transported`].
pub fn tree_edges(b: &LatticeBundle) -> Vec<usize> {
    (1..b.nodes())
        .map(|v| {
            let (p, a) = tree_parent(b, v);
            p * b.d + a
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub alpha1: f64,
    /// Reserved; the obstruction penalty is not implemented.
    #[serde(default)]
    pub alpha2: f64,
    pub alpha3: f64,
    pub bound: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Weights {
            alpha1: 1.0,
            alpha2: 0.0,
            alpha3: 1.0,
            bound: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub main_term: f64,
    pub pen1: f64,
    pub pen3: f64,
    pub alpha1: f64,
    pub alpha3: f64,
    pub bound: f64,
    pub total: f64,
}

fn check_inputs(b: &LatticeBundle, cfg: &FieldConfig, w: &Weights) -> Result<()> {
    if w.alpha1 < 0.0 || w.alpha3 < 0.0 || !w.alpha1.is_finite() || !w.alpha3.is_finite() {
        return Err(SpencerError::Invalid("penalty weights must be finite and nonnegative".into()));
    }
    if cfg.lambda.len() != b.nodes() || cfg.lambda.iter().any(|l| l.len() != b.dim()) {
        return Err(SpencerError::Invalid("field does not match the lattice".into()));
    }
    Ok(())
}

/// Residual `lam(head) - lam(tail) + ad*_omega lam(tail)` on a forward edge.
pub fn edge_residual(b: &LatticeBundle, cfg: &FieldConfig, e: usize) -> Vec<f64> {
    let (t, h) = b.edge(e);
    let moved = b.apply_transport(e, &cfg.lambda[t]);
    cfg.lambda[h].iter().zip(moved).map(|(x, y)| x - y).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Position of the first node attaining the largest `max_i lam_i^2`, and that coordinate.
fn sup_argmax(cfg: &FieldConfig) -> (f64, usize, usize) {
    let mut best = (0.0, 0, 0);
    for (v, l) in cfg.lambda.iter().enumerate() {
        for (i, x) in l.iter().enumerate() {
            if x * x > best.0 {
                best = (x * x, v, i);
            }
        }
    }
    best
}

pub fn energy(b: &LatticeBundle, cfg: &FieldConfig, w: &Weights) -> Result<EnergyBreakdown> {
    check_inputs(b, cfg, w)?;
    let per_edge: Vec<(f64, f64)> = (0..b.edges())
        .into_par_iter()
        .map(|e| {
            let r = edge_residual(b, cfg, e);
            let (t, _) = b.edge(e);
            let p = dot(&cfg.lambda[t], &b.omega[e]);
            (dot(&r, &r), p * p)
        })
        .collect();
    let main_term: f64 = per_edge.iter().map(|x| x.0).sum();
    let pen1: f64 = per_edge.iter().map(|x| x.1).sum();
    let pen3 = (sup_argmax(cfg).0 - w.bound).max(0.0);
    Ok(EnergyBreakdown {
        main_term,
        pen1,
        pen3,
        alpha1: w.alpha1,
        alpha3: w.alpha3,
        bound: w.bound,
        total: main_term + w.alpha1 * pen1 + w.alpha3 * pen3,
    })
}

/// Analytic gradient with respect to every coefficient of every node. The bound
/// penalty contributes only when active, at the first maximizing coordinate.
pub fn gradient(b: &LatticeBundle, cfg: &FieldConfig, w: &Weights) -> Result<FieldConfig> {
    check_inputs(b, cfg, w)?;
    let n = b.dim();
    let contributions: Vec<(usize, usize, Vec<f64>, Vec<f64>)> = (0..b.edges())
        .into_par_iter()
        .map(|e| {
            let (t, h) = b.edge(e);
            let r = edge_residual(b, cfg, e);
            let gh: Vec<f64> = r.iter().map(|x| 2.0 * x).collect();
            let mut gt: Vec<f64> = b.apply_transport_t(e, &r).iter().map(|x| -2.0 * x).collect();
            let p = dot(&cfg.lambda[t], &b.omega[e]);
            for (g, om) in gt.iter_mut().zip(&b.omega[e]) {
                *g += w.alpha1 * 2.0 * p * om;
            }
            (t, h, gt, gh)
        })
        .collect();
    let mut grad = vec![vec![0.0; n]; b.nodes()];
    for (t, h, gt, gh) in contributions {
        for i in 0..n {
            grad[t][i] += gt[i];
            grad[h][i] += gh[i];
        }
    }
    let (sup, v, i) = sup_argmax(cfg);
    if sup > w.bound && w.alpha3 != 0.0 {
        grad[v][i] += w.alpha3 * 2.0 * cfg.lambda[v][i];
    }
    Ok(FieldConfig { lambda: grad })
}

/// Square root of the main term.
pub fn cartan_residual(b: &LatticeBundle, cfg: &FieldConfig) -> Result<f64> {
    Ok(energy(b, cfg, &Weights { alpha1: 0.0, alpha2: 0.0, alpha3: 0.0, bound: 0.0 })?
        .main_term
        .sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub step: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
    #[serde(default = "default_backtracks")]
    pub max_backtracks: usize,
}

fn default_backtracks() -> usize {
    60
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            step: 0.1,
            max_iterations: 20_000,
            tolerance: 1e-8,
            max_backtracks: 60,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub total: f64,
    pub main_term: f64,
    pub pen1: f64,
    pub pen3: f64,
    pub grad_norm: f64,
    pub step: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    GradientTolerance,
    IterationCap,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MinimizeOutcome {
    pub config: FieldConfig,
    pub trace: Vec<TraceRow>,
    pub termination: Termination,
    pub final_energy: EnergyBreakdown,
    pub final_grad_norm: f64,
}

fn norm(g: &FieldConfig) -> f64 {
    g.lambda.iter().flatten().map(|x| x * x).sum::<f64>().sqrt()
}

/// Gradient descent with Armijo backtracking. The step grows by 2 after an accepted
/// step and is capped at `solver.step`.
pub fn minimize(
    b: &LatticeBundle,
    start: &FieldConfig,
    w: &Weights,
    solver: &SolverConfig,
) -> Result<MinimizeOutcome> {
    let mut cfg = start.clone();
    let mut e = energy(b, &cfg, w)?;
    let mut trace = Vec::new();
    let mut step = solver.step;
    for it in 0..=solver.max_iterations {
        let g = gradient(b, &cfg, w)?;
        let gn = norm(&g);
        trace.push(TraceRow {
            iteration: it,
            total: e.total,
            main_term: e.main_term,
            pen1: e.pen1,
            pen3: e.pen3,
            grad_norm: gn,
            step,
        });
        if !e.total.is_finite() {
            return Err(SpencerError::Diverged {
                iteration: it,
                energy: e.total,
            });
        }
        if gn < solver.tolerance {
            return Ok(MinimizeOutcome {
                config: cfg,
                trace,
                termination: Termination::GradientTolerance,
                final_energy: e,
                final_grad_norm: gn,
            });
        }
        if it == solver.max_iterations {
            return Ok(MinimizeOutcome {
                config: cfg,
                trace,
                termination: Termination::IterationCap,
                final_energy: e,
                final_grad_norm: gn,
            });
        }
        let mut accepted = None;
        for _ in 0..solver.max_backtracks {
            let trial = FieldConfig {
                lambda: cfg
                    .lambda
                    .iter()
                    .zip(&g.lambda)
                    .map(|(l, d)| l.iter().zip(d).map(|(x, y)| x - step * y).collect())
                    .collect(),
            };
            let te = energy(b, &trial, w)?;
            if te.total <= e.total - 1e-4 * step * gn * gn {
                accepted = Some((trial, te));
                break;
            }
            step *= 0.5;
        }
        match accepted {
            Some((trial, te)) => {
                cfg = trial;
                e = te;
                step = (step * 2.0).min(solver.step);
            }
            None => {
                return Err(SpencerError::Diverged {
                    iteration: it,
                    energy: e.total,
                })
            }
        }
    }
    unreachable!()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeCertificate {
    pub node: usize,
    /// `lam = 0` here: the pairing functional vanishes and transversality is undefined.
    pub degenerate: bool,
    /// `D + V = T` for `T = R^d + g`, `V = g`, `D` the kernel of
    /// `(xi, X) -> <lam, omega(xi) + X>`.
    pub transversal: Option<bool>,
    pub rank_d: usize,
    pub rank_v: usize,
    pub rank_sum: usize,
    pub rank_t: usize,
    /// Outgoing axes whose edge pairing is within tolerance: these directions lie in `D`.
    pub d_axes: Vec<usize>,
    pub max_abs_pairing: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompatibilityCertificate {
    pub tolerance: f64,
    pub nodes: Vec<NodeCertificate>,
    pub degenerate_nodes: usize,
    pub transversal_nodes: usize,
    pub compatible_edges: usize,
    pub total_edges: usize,
    pub max_abs_pairing: f64,
}

pub fn certify_compatible_pair(b: &LatticeBundle, cfg: &FieldConfig, tolerance: f64) -> Result<CompatibilityCertificate> {
    check_inputs(b, cfg, &Weights::default())?;
    let n = b.dim();
    let rank_t = b.d + n;
    let mut nodes = Vec::with_capacity(b.nodes());
    for v in 0..b.nodes() {
        let lam = &cfg.lambda[v];
        let degenerate = lam.iter().all(|x| *x == 0.0);
        let pairings: Vec<f64> = (0..b.d).map(|a| dot(lam, &b.omega[v * b.d + a])).collect();
        let d_axes: Vec<usize> = (0..b.d).filter(|&a| pairings[a].abs() <= tolerance).collect();
        let max_abs_pairing = pairings.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        // the functional restricted to V is lam itself, so V lies in D iff lam = 0
        let rank_d = if degenerate { rank_t } else { rank_t - 1 };
        let rank_sum = if degenerate { rank_d } else { rank_d + 1 };
        nodes.push(NodeCertificate {
            node: v,
            degenerate,
            transversal: if degenerate { None } else { Some(rank_sum == rank_t) },
            rank_d,
            rank_v: n,
            rank_sum,
            rank_t,
            d_axes,
            max_abs_pairing,
        });
    }
    let compatible_edges = nodes.iter().map(|x| x.d_axes.len()).sum();
    Ok(CompatibilityCertificate {
        tolerance,
        degenerate_nodes: nodes.iter().filter(|x| x.degenerate).count(),
        transversal_nodes: nodes.iter().filter(|x| x.transversal == Some(true)).count(),
        compatible_edges,
        total_edges: b.edges(),
        max_abs_pairing: nodes.iter().fold(0.0f64, |m, x| m.max(x.max_abs_pairing)),
        nodes,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub d: usize,
    pub n: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialField {
    Random,
    Zero,
    Transported,
}

/// JSON run configuration for the `varsolve` command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarConfig {
    pub lattice: LatticeSpec,
    pub algebra: String,
    #[serde(default)]
    pub weights: Weights,
    pub seed: u64,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default = "default_scale")]
    pub omega_scale: f64,
    #[serde(default = "default_scale")]
    pub lambda_scale: f64,
    #[serde(default = "default_init")]
    pub init: InitialField,
    #[serde(default = "default_certificate_tolerance")]
    pub certificate_tolerance: f64,
}

fn default_scale() -> f64 {
    0.5
}

fn default_init() -> InitialField {
    InitialField::Random
}

fn default_certificate_tolerance() -> f64 {
    1e-8
}

impl VarConfig {
    pub fn build(&self) -> Result<(LatticeBundle, FieldConfig)> {
        let alg = LieAlgebra::from_label(&self.algebra)?;
        let b = LatticeBundle::random_gauge(alg, self.lattice.d, self.lattice.n, self.omega_scale, self.seed)?;
        let start = match self.init {
            InitialField::Random => FieldConfig::random(&b, self.lambda_scale, self.seed.wrapping_add(1)),
            InitialField::Zero => FieldConfig::zero(&b),
            InitialField::Transported => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed.wrapping_add(1));
                let s: Vec<f64> = (0..b.dim())
                    .map(|_| rng.gen_range(-self.lambda_scale..=self.lambda_scale))
                    .collect();
                FieldConfig::transported(&b, &s)
            }
        };
        Ok((b, start))
    }
}

pub fn write_trace_csv<W: Write>(trace: &[TraceRow], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for row in trace {
        wr.serialize(row).map_err(|e| SpencerError::Invalid(e.to_string()))?;
    }
    wr.flush()?;
    Ok(())
}
