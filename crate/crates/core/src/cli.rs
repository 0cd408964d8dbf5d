//! The `spencer` command line.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_traits::Signed;
use serde::Serialize;

use crate::cochain::{degenerate_cohomology, CellComplex, CohomologyReport};
use crate::error::{Result, SpencerError};
use crate::kernel::{kernel, min_irrep_dim, mirror_stability_check, tension_report, KernelComparison};
use crate::lie::{AlgebraDocument, LieAlgebra};
use crate::linalg::{NullspaceOptions, RankCertificate};
use crate::rep::{module_report, ModuleReport};
use crate::report::{lambda_record, Report, RunManifest};
use crate::spencer::{
    delta_classical, delta_constrained, delta_equivalent_matrix, nilpotency_audit, parse_lambda, verify_mirror,
    MirrorReport, NilpotencyReport, Variant,
};
use crate::sym::{SymTermRecord, DEFAULT_MAX_DIM};
use crate::varsolve::{self, cartan_residual, certify_compatible_pair, energy, minimize, VarConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RESOURCE: i32 = 3;
pub const EXIT_IDENTITY: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "spencer", version, about = "Constraint-coupled Spencer operators over semisimple Lie algebras")]
pub struct Cli {
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Also write a CSV table (solver trace, per-degree tables).
    #[arg(long, global = true)]
    pub csv: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Largest basis the tool may enumerate or materialize.
    #[arg(long, global = true, default_value_t = DEFAULT_MAX_DIM as u64)]
    pub max_dim: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Lie algebra tables.
    Lie {
        #[command(subcommand)]
        command: LieCommand,
    },
    /// Assemble a Spencer matrix.
    Matrix(MatrixArgs),
    /// Kernel of a constrained Spencer matrix.
    Kernel(KernelArgs),
    /// Mirror, kernel mirror and nilpotency audits.
    Verify(VerifyArgs),
    /// Degenerate cohomology on a cubical torus.
    Cohomology(CohomologyArgs),
    /// Dimension tension verdict.
    Tension(TensionArgs),
    /// Lattice variational solver.
    Varsolve(VarsolveArgs),
    /// Spencer operator commands, grouped.
    Spencer {
        #[command(subcommand)]
        command: SpencerCommand,
    },
}

#[derive(Subcommand, Debug, Clone)]
pub enum SpencerCommand {
    Matrix(MatrixArgs),
    Kernel(KernelArgs),
    Verify(VerifyArgs),
    Cohomology(CohomologyArgs),
}

impl Command {
    /// `spencer <cmd>` and `<cmd>` are the same command.
    fn flatten(&self) -> Command {
        match self {
            Command::Spencer { command } => match command {
                SpencerCommand::Matrix(a) => Command::Matrix(a.clone()),
                SpencerCommand::Kernel(a) => Command::Kernel(a.clone()),
                SpencerCommand::Verify(a) => Command::Verify(a.clone()),
                SpencerCommand::Cohomology(a) => Command::Cohomology(a.clone()),
            },
            c => c.clone(),
        }
    }
}

#[derive(Subcommand, Debug, Clone)]
pub enum LieCommand {
    Info {
        #[arg(long)]
        algebra: String,
        /// Include the full bracket table and Killing matrix.
        #[arg(long)]
        table: bool,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum VariantArg {
    Classical,
    Constrained,
    Equivalent,
}

#[derive(Args, Debug, Clone)]
pub struct MatrixArgs {
    #[arg(long)]
    pub algebra: String,
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value = "preset:zero")]
    pub lambda: String,
    #[arg(long, value_enum, default_value_t = VariantArg::Constrained)]
    pub variant: VariantArg,
    /// Matrix Market export path.
    #[arg(long)]
    pub mtx: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct KernelArgs {
    #[arg(long)]
    pub algebra: String,
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value = "preset:cartan1")]
    pub lambda: String,
    /// Include the kernel basis in sparse form.
    #[arg(long)]
    pub basis: bool,
    /// Submodule check and decomposition into irreducibles.
    #[arg(long)]
    pub decompose: bool,
}

#[derive(Args, Debug, Clone)]
pub struct VerifyArgs {
    #[arg(long)]
    pub algebra: String,
    #[arg(long, default_value = "preset:cartan1")]
    pub lambda: String,
    #[arg(long, default_value_t = 1)]
    pub k_min: usize,
    #[arg(long, default_value_t = 3)]
    pub k_max: usize,
}

#[derive(Args, Debug, Clone)]
pub struct CohomologyArgs {
    #[arg(long, default_value_t = 2)]
    pub torus: usize,
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    #[arg(long)]
    pub algebra: String,
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value = "preset:cartan1")]
    pub lambda: String,
}

#[derive(Args, Debug, Clone)]
pub struct TensionArgs {
    #[arg(long)]
    pub algebra: String,
    #[arg(long)]
    pub h11: u64,
    #[arg(long)]
    pub kernel_dim: Option<u64>,
}

#[derive(Args, Debug, Clone)]
pub struct VarsolveArgs {
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Serialize)]
struct LieInfoBody {
    label: String,
    family: String,
    rank: usize,
    dim: usize,
    positive_roots: usize,
    roots: usize,
    cartan_matrix: Vec<Vec<i64>>,
    basis_labels: Vec<String>,
    killing_determinant: String,
    killing_determinant_sign: i32,
    killing_forms_agree: bool,
    antisymmetric: bool,
    jacobi_holds: bool,
    jacobi_triples: u64,
    min_irrep_dim: Option<u64>,
    table: Option<AlgebraDocument>,
}

#[derive(Serialize)]
struct MatrixBody {
    variant: Variant,
    k_from: usize,
    k_to: usize,
    lambda: Option<Vec<(usize, String)>>,
    rows: u64,
    cols: usize,
    nnz: usize,
    max_abs_entry: String,
    is_zero: bool,
    matrix_market: Option<String>,
}

#[derive(Serialize)]
struct Prediction {
    dim: u64,
    condition: String,
}

#[derive(Serialize)]
struct KernelBody {
    k: usize,
    lambda: Vec<(usize, String)>,
    rows: u64,
    cols: usize,
    rank: usize,
    kernel_dim: usize,
    certificate: RankCertificate,
    framework_prediction: Option<Prediction>,
    prediction_agrees: Option<bool>,
    basis: Option<Vec<Vec<SymTermRecord>>>,
    module: Option<ModuleReport>,
}

#[derive(Serialize)]
struct VerifyDegree {
    k: usize,
    mirror: Option<MirrorReport>,
    kernel_mirror: Option<KernelComparison>,
    nilpotency: Option<NilpotencyReport>,
    skipped: Option<String>,
}

#[derive(Serialize)]
struct VerifyBody {
    lambda: Vec<(usize, String)>,
    degrees: Vec<VerifyDegree>,
    forced_identities_hold: bool,
    nilpotency_gates_exit: bool,
}

#[derive(Serialize)]
struct CohomologyBody {
    lambda: Vec<(usize, String)>,
    report: CohomologyReport,
}

#[derive(Serialize)]
struct VarsolveBody {
    functional: &'static str,
    config: VarConfig,
    initial_energy: varsolve::EnergyBreakdown,
    final_energy: varsolve::EnergyBreakdown,
    iterations: usize,
    termination: varsolve::Termination,
    final_grad_norm: f64,
    cartan_residual_start: f64,
    cartan_residual_final: f64,
    trace_monotone: bool,
    certificate: varsolve::CompatibilityCertificate,
}

/// Outcome of a command: a report and the exit status it implies.
pub struct Outcome {
    pub report: Report,
    pub exit: i32,
    pub csv: Option<String>,
}

fn algebra(label: &str) -> Result<LieAlgebra> {
    LieAlgebra::from_label(label)
}

pub fn execute(cli: &Cli) -> Result<Outcome> {
    let cap = cli.max_dim as u128;
    let opts = NullspaceOptions::default();
    match &cli.command.flatten() {
        Command::Spencer { .. } => unreachable!("flattened above"),
        Command::Lie {
            command: LieCommand::Info { algebra: label, table },
        } => {
            let g = algebra(label)?;
            let det = g.killing_determinant();
            let body = LieInfoBody {
                label: g.label(),
                family: g.roots.datum.family.to_string(),
                rank: g.rank,
                dim: g.dim,
                positive_roots: g.num_positive_roots(),
                roots: 2 * g.num_positive_roots(),
                cartan_matrix: g.roots.datum.cartan_matrix.clone(),
                basis_labels: g.basis_labels.clone(),
                killing_determinant: format!("{}", det),
                killing_determinant_sign: if det.is_positive() {
                    1
                } else if det.is_negative() {
                    -1
                } else {
                    0
                },
                killing_forms_agree: g.killing_by_trace() == g.killing_by_roots(),
                antisymmetric: g.is_antisymmetric(),
                jacobi_holds: g.jacobi_violation().is_none(),
                jacobi_triples: g.jacobi_triple_count(),
                min_irrep_dim: min_irrep_dim(g.roots.datum.family, g.rank).ok(),
                table: table.then(|| g.to_document()),
            };
            let m = RunManifest::new("lie info")
                .algebra(&g.label())
                .param("algebra", label)
                .param("table", table);
            Ok(Outcome {
                report: Report::new(m, body)?,
                exit: EXIT_OK,
                csv: None,
            })
        }
        Command::Matrix(a) => {
            let g = algebra(&a.algebra)?;
            let lam = parse_lambda(&g, &a.lambda)?;
            let sm = match a.variant {
                VariantArg::Classical => delta_classical(&g, a.k, cap)?,
                VariantArg::Constrained => delta_constrained(&g, &lam, a.k, cap)?,
                VariantArg::Equivalent => delta_equivalent_matrix(&g, &lam, a.k, cap)?,
            };
            if let Some(path) = &a.mtx {
                sm.matrix.write_matrix_market(BufWriter::new(File::create(path)?))?;
            }
            let body = MatrixBody {
                variant: sm.variant,
                k_from: sm.k_from,
                k_to: sm.k_to,
                lambda: sm.lambda.as_ref().map(lambda_record),
                rows: sm.matrix.nrows,
                cols: sm.matrix.ncols,
                nnz: sm.matrix.nnz(),
                max_abs_entry: q_string(&sm.matrix.max_abs_entry()),
                is_zero: sm.matrix.is_zero(),
                matrix_market: a.mtx.as_ref().map(|p| p.display().to_string()),
            };
            let m = RunManifest::new("matrix")
                .algebra(&g.label())
                .param("k", a.k)
                .param("lambda", &a.lambda)
                .param("variant", a.variant)
                .param("max_dim", cli.max_dim);
            Ok(Outcome {
                report: Report::new(with_seed(m, &a.lambda), body)?,
                exit: EXIT_OK,
                csv: None,
            })
        }
        Command::Kernel(a) => {
            let g = algebra(&a.algebra)?;
            let lam = parse_lambda(&g, &a.lambda)?;
            let sm = delta_constrained(&g, &lam, a.k, cap)?;
            let kb = kernel(&sm, &opts)?;
            let prediction = if g.roots.datum.family.is_exceptional() && a.k == 2 {
                min_irrep_dim(g.roots.datum.family, g.rank).ok().map(|d| Prediction {
                    dim: d,
                    condition: format!("forced dimension when h11 = {d} and the kernel is a nonzero module"),
                })
            } else {
                None
            };
            let prediction_agrees = prediction.as_ref().map(|p| p.dim == kb.dim as u64);
            let basis = if a.basis {
                Some(kb.elements(&g)?.iter().map(|s| s.to_records()).collect())
            } else {
                None
            };
            let module = if a.decompose { Some(module_report(&g, &kb)?) } else { None };
            let body = KernelBody {
                k: a.k,
                lambda: lambda_record(&lam),
                rows: sm.matrix.nrows,
                cols: sm.matrix.ncols,
                rank: kb.rank,
                kernel_dim: kb.dim,
                certificate: kb.certificate.clone(),
                framework_prediction: prediction,
                prediction_agrees,
                basis,
                module,
            };
            let m = RunManifest::new("kernel")
                .algebra(&g.label())
                .param("k", a.k)
                .param("lambda", &a.lambda)
                .param("basis", a.basis)
                .param("decompose", a.decompose)
                .param("max_dim", cli.max_dim)
                .seed(opts.prime_seed);
            Ok(Outcome {
                report: Report::new(with_seed(m, &a.lambda), body)?,
                exit: EXIT_OK,
                csv: None,
            })
        }
        Command::Verify(a) => {
            let g = algebra(&a.algebra)?;
            let lam = parse_lambda(&g, &a.lambda)?;
            if a.k_min == 0 || a.k_min > a.k_max {
                return Err(SpencerError::Invalid("need 1 <= k-min <= k-max".into()));
            }
            let mut degrees = Vec::new();
            let mut ok = true;
            for k in a.k_min..=a.k_max {
                let mirror = verify_mirror(&g, &lam, k, cap)?;
                let kernel_mirror = mirror_stability_check(&g, &lam, k, cap, &opts)?;
                ok &= mirror.holds && kernel_mirror.equal;
                let (nilpotency, skipped) = match nilpotency_audit(&g, &lam, k, cap, &opts) {
                    Ok(r) => (Some(r), None),
                    Err(e @ SpencerError::ResourceCap { .. }) => (None, Some(e.to_string())),
                    Err(e) => return Err(e),
                };
                degrees.push(VerifyDegree {
                    k,
                    mirror: Some(mirror),
                    kernel_mirror: Some(kernel_mirror),
                    nilpotency,
                    skipped,
                });
            }
            let body = VerifyBody {
                lambda: lambda_record(&lam),
                degrees,
                forced_identities_hold: ok,
                nilpotency_gates_exit: false,
            };
            let m = RunManifest::new("verify")
                .algebra(&g.label())
                .param("lambda", &a.lambda)
                .param("k_min", a.k_min)
                .param("k_max", a.k_max)
                .param("max_dim", cli.max_dim)
                .seed(opts.prime_seed);
            Ok(Outcome {
                report: Report::new(with_seed(m, &a.lambda), body)?,
                exit: if ok { EXIT_OK } else { EXIT_IDENTITY },
                csv: None,
            })
        }
        Command::Cohomology(a) => {
            let g = algebra(&a.algebra)?;
            let lam = parse_lambda(&g, &a.lambda)?;
            let cx = CellComplex::torus(a.torus, a.n, cap)?;
            let report = degenerate_cohomology(&g, &lam, a.k, &cx, cap, &opts)?;
            let exit = if report.structural_identity_holds { EXIT_OK } else { EXIT_IDENTITY };
            let csv = cohomology_csv(&report);
            let body = CohomologyBody {
                lambda: lambda_record(&lam),
                report,
            };
            let m = RunManifest::new("cohomology")
                .algebra(&g.label())
                .param("torus", a.torus)
                .param("n", a.n)
                .param("k", a.k)
                .param("lambda", &a.lambda)
                .param("max_dim", cli.max_dim)
                .seed(opts.prime_seed);
            Ok(Outcome {
                report: Report::new(with_seed(m, &a.lambda), body)?,
                exit,
                csv: Some(csv),
            })
        }
        Command::Tension(a) => {
            let g = algebra(&a.algebra)?;
            let body = tension_report(&g, a.h11, a.kernel_dim)?;
            let m = RunManifest::new("tension")
                .algebra(&g.label())
                .param("h11", a.h11)
                .param("kernel_dim", a.kernel_dim);
            Ok(Outcome {
                report: Report::new(m, body)?,
                exit: EXIT_OK,
                csv: None,
            })
        }
        Command::Varsolve(a) => {
            let text = std::fs::read_to_string(&a.config)?;
            let config: VarConfig = serde_json::from_str(&text)?;
            let (bundle, start) = config.build()?;
            let initial_energy = energy(&bundle, &start, &config.weights)?;
            let outcome = minimize(&bundle, &start, &config.weights, &config.solver)?;
            let certificate = certify_compatible_pair(&bundle, &outcome.config, config.certificate_tolerance)?;
            let mut csv = Vec::new();
            varsolve::write_trace_csv(&outcome.trace, &mut csv)?;
            let body = VarsolveBody {
                functional: "real discrete modified-Cartan residual with compatibility and bound penalties",
                initial_energy,
                final_energy: outcome.final_energy,
                iterations: outcome.trace.len() - 1,
                termination: outcome.termination,
                final_grad_norm: outcome.final_grad_norm,
                cartan_residual_start: cartan_residual(&bundle, &start)?,
                cartan_residual_final: cartan_residual(&bundle, &outcome.config)?,
                trace_monotone: outcome.trace.windows(2).all(|w| w[1].total <= w[0].total),
                certificate,
                config: config.clone(),
            };
            let m = RunManifest::new("varsolve")
                .algebra(&config.algebra)
                .param("config", serde_json::to_value(&config)?)
                .seed(config.seed);
            Ok(Outcome {
                report: Report::new(m, body)?,
                exit: EXIT_OK,
                csv: Some(String::from_utf8(csv).expect("csv is utf-8")),
            })
        }
    }
}

fn with_seed(m: RunManifest, lambda: &str) -> RunManifest {
    let seed = lambda
        .strip_prefix("preset:random:")
        .or_else(|| lambda.strip_prefix("preset:dense:"))
        .and_then(|s| s.parse().ok());
    match seed {
        Some(s) => m.seed(s),
        None => m,
    }
}

fn q_string(x: &crate::Q) -> String {
    format!("{}/{}", x.numer(), x.denom())
}

fn cohomology_csv(r: &CohomologyReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["degree", "cells", "de_rham", "degenerate", "expected", "phi_rank"])
        .expect("in-memory write");
    for p in 0..r.de_rham.len() {
        w.write_record([
            p.to_string(),
            r.cell_counts[p].to_string(),
            r.de_rham[p].to_string(),
            r.degenerate[p].to_string(),
            r.expected_degenerate[p].to_string(),
            r.phi_rank[p].to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

pub fn exit_code(e: &SpencerError) -> i32 {
    match e {
        SpencerError::ResourceCap { .. } => EXIT_RESOURCE,
        SpencerError::InvalidLabel(_)
        | SpencerError::InvalidCartan(_)
        | SpencerError::Invalid(_)
        | SpencerError::UnknownFamily(_)
        | SpencerError::Json(_) => EXIT_USAGE,
        _ => EXIT_FAILURE,
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    f.write_all(text.as_bytes())?;
    f.flush()?;
    Ok(())
}

/// Parse arguments, run, write outputs, and return the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    if let Some(t) = cli.threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let outcome = match execute(&cli) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    let result = (|| -> Result<()> {
        let json = outcome.report.to_json()?;
        let mut csv_target = cli.csv.clone();
        match &cli.out {
            Some(p) if p.extension().is_some_and(|x| x == "csv") && outcome.csv.is_some() => {
                csv_target = Some(p.clone());
                print!("{json}");
            }
            Some(p) => write_file(p, &json)?,
            None => print!("{json}"),
        }
        if let (Some(p), Some(text)) = (csv_target, &outcome.csv) {
            write_file(&p, text)?;
        }
        Ok(())
    })();
    match result {
        Ok(()) => outcome.exit,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
