//! `momap`: batch driver for King's equation, the universal Hamiltonian
//! check, deformed ADHM data, the truncated Nekrasov equation and the
//! state identities.
//!
//! Exit codes: 0 success, 1 input error, 2 divergence (with a destabilizer
//! certificate), 3 no convergence or a failed check.

mod report;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use num_rational::BigRational;
use serde_json::{json, Value};

use momap::adhm::{adhm_to_json, solve_adhm, stabilizer_dimension};
use momap::cyclic::{verify_universal, xi_welldefinedness_probe};
use momap::fock::nekrasov::{parse_nekrasov_problem, weights_json};
use momap::fock::state::gram_min_eigenvalue;
use momap::fock::{commutator_diagnostics, solve_nekrasov, verify_state_identities, verify_state_identities_f64};
use momap::moment::{king_residual, HermitianMetricFamily, KahlerData};
use momap::numerics::PositiveDefiniteMatrix;
use momap::quiver::{matrix_to_json, parse_quiver_spec_with, ParseOptions, QuiverProblem};
use momap::solver::{solve_metric, ConvergenceRecord, SolveOptions, SolveStatus};
use momap::Error;

use report::{emit, write_history, RunManifest};

const MAX_STATE_DEGREE: u32 = 10;
const UNIVERSAL_TOL: f64 = 1e-10;

#[derive(Parser, Debug)]
#[command(name = "momap", version, about = "Moment-map solvers for quivers, ADHM data and Fock modules")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Convergence tolerance on the residual sup norm.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true)]
    max_iters: Option<usize>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Result file; the run manifest goes to `<out>.manifest.json`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// CSV file for the convergence history.
    #[arg(long, global = true)]
    history: Option<PathBuf>,
    /// Accept stability parameters whose slope sum is nonzero.
    #[arg(long, global = true)]
    allow_nonzero_slope: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// King's equation for quiver representations.
    #[command(subcommand)]
    King(KingCommand),
    /// Deformed ADHM equations.
    #[command(subcommand)]
    Adhm(AdhmCommand),
    /// Truncated Nekrasov equation on monomial modules.
    #[command(subcommand)]
    Nekrasov(NekrasovCommand),
    /// Identities of the Gaussian state.
    #[command(subcommand)]
    Fock(FockCommand),
}

#[derive(Subcommand, Debug)]
enum KingCommand {
    /// Find a metric solving King's equation, or a destabilizer.
    Solve { input: PathBuf },
    /// Compare the universal Hamiltonian with the direct formulas.
    VerifyUniversal {
        input: PathBuf,
        #[arg(long, default_value_t = 100)]
        samples: usize,
    },
}

#[derive(Subcommand, Debug)]
enum AdhmCommand {
    Solve {
        #[arg(long = "n", short = 'N')]
        n: usize,
        #[arg(long, short = 'k')]
        k: usize,
        #[arg(long, allow_negative_numbers = true)]
        eta: f64,
        /// Use the mirror sign convention for eta.
        #[arg(long)]
        flip_eta: bool,
    },
}

#[derive(Subcommand, Debug)]
enum NekrasovCommand {
    Solve { input: PathBuf },
}

#[derive(Subcommand, Debug)]
enum FockCommand {
    CheckState {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        degree: u32,
        #[arg(long)]
        rho: f64,
        #[arg(long)]
        hbar: f64,
    },
}

/// A finished run: result payload, manifest status and exit code.
struct Outcome {
    result: Value,
    status: String,
    code: u8,
    history: Option<Vec<ConvergenceRecord>>,
}

impl Global {
    fn solve_options(&self) -> SolveOptions {
        let mut opts = SolveOptions {
            seed: self.seed,
            ..SolveOptions::default()
        };
        if let Some(tol) = self.tol {
            opts.tol = tol;
        }
        if let Some(m) = self.max_iters {
            opts.max_iters = m;
        }
        opts
    }
}

fn read_input(path: &Path) -> Result<(Vec<u8>, String), String> {
    let bytes = fs::read(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| format!("{} is not UTF-8", path.display()))?;
    Ok((bytes, text))
}

fn by_vertex<T>(p: &QuiverProblem, f: impl Fn(usize) -> T) -> BTreeMap<String, T> {
    p.quiver.vertices().iter().enumerate().map(|(i, v)| (v.clone(), f(i))).collect()
}

fn king_solve(p: &QuiverProblem, opts: &SolveOptions) -> Result<Outcome, Error> {
    let rep = p
        .rep
        .clone()
        .ok_or_else(|| Error::Validation("the problem has no representation (\"rep\") to solve for".into()))?;
    let w = KahlerData::uniform(&p.quiver);
    // A metric in the file is the starting point: solve for the transported
    // representation g T g⁻¹ with g = h^{1/2}, then pull the result back.
    let start = p.metric.clone().unwrap_or_else(|| {
        p.dims.as_slice().iter().map(|&d| PositiveDefiniteMatrix::identity(d)).collect()
    });
    let g: Vec<_> = start.iter().map(|h| h.sqrt()).collect::<Result<_, _>>()?;
    let g_inv: Vec<_> = start.iter().zip(&g).map(|(h, g)| h.solve(g)).collect();
    let moved = rep.transform(&g, &g_inv);
    let outcome = solve_metric(&moved, &p.eta, &w, opts)?;

    let mut result = json!({
        "status": outcome.status,
        "iterations": outcome.iterations,
        "final_sup_norm": outcome.final_sup_norm,
        "final_functional": outcome.final_functional,
        "history": outcome.history,
    });
    if let (SolveStatus::Converged, Some(h)) = (outcome.status, &outcome.metric) {
        let blocks: Vec<PositiveDefiniteMatrix> = h
            .blocks()
            .iter()
            .zip(&g)
            .map(|(hv, gv)| PositiveDefiniteMatrix::new(gv * hv.as_matrix() * gv))
            .collect::<Result<_, _>>()?;
        let metric = HermitianMetricFamily::new(&p.dims, blocks)?;
        let check = king_residual(&rep, &metric, &p.eta, &w)?;
        result["metric"] = json!(by_vertex(p, |v| matrix_to_json(metric.get(v).as_matrix())));
        result["residual_sup_norm"] = json!(check.sup_norm);
    }
    if let Some(c) = &outcome.certificate {
        // Subspaces are orthonormal for the starting metric; map them back
        // to the coordinates of the input.
        result["certificate"] = json!({
            "subspaces": by_vertex(p, |v| matrix_to_json(&(&g_inv[v] * &c.subspaces[v]))),
            "subdims": by_vertex(p, |v| c.subdims[v]),
            "slope": c.slope,
            "defect": c.defect,
        });
    }
    let (status, code) = match outcome.status {
        SolveStatus::Converged => ("Converged", 0),
        SolveStatus::Diverged => ("Diverged", 2),
        SolveStatus::MaxIters => ("MaxIters", 3),
    };
    Ok(Outcome {
        result,
        status: status.into(),
        code,
        history: Some(outcome.history),
    })
}

fn king_verify(p: &QuiverProblem, samples: usize, seed: u64) -> Result<Outcome, Error> {
    let w = KahlerData::uniform(&p.quiver);
    let report = verify_universal(&p.quiver, &p.dims, &p.eta, &w, samples, seed)?;
    let probe = xi_welldefinedness_probe(&p.quiver, &p.eta, &w, samples, seed)?;
    let passed = report.max_deviation < UNIVERSAL_TOL;
    Ok(Outcome {
        result: json!({
            "samples": report.samples,
            "max_deviation": report.max_deviation,
            "xi_relation_deviation": probe,
            "tolerance": UNIVERSAL_TOL,
            "passed": passed,
        }),
        status: if passed { "ok" } else { "failed" }.into(),
        code: if passed { 0 } else { 3 },
        history: None,
    })
}

fn adhm(n: usize, k: usize, eta: f64, opts: &SolveOptions) -> Result<Outcome, Error> {
    match solve_adhm(n, k, eta, opts.seed, opts) {
        Ok(sol) => {
            let stab = stabilizer_dimension(&sol.data);
            let mut result = adhm_to_json(&sol.data, eta);
            result["residuals"] = json!({
                "complex_norm": sol.residuals.complex_norm,
                "real_norm": sol.residuals.real_norm,
                "trace_deviation": sol.residuals.trace_deviation,
            });
            result["stabilizer_dimension"] = json!(stab);
            result["iterations"] = json!(sol.iterations);
            let ok = sol.residuals.sup_norm() <= opts.tol && stab == 0;
            Ok(Outcome {
                result,
                status: if ok { "Converged" } else { "degenerate" }.into(),
                code: if ok { 0 } else { 3 },
                history: Some(sol.history),
            })
        }
        Err(Error::Solver { iteration, message }) => Ok(Outcome {
            result: json!({"status": "MaxIters", "iterations": iteration, "message": message}),
            status: "MaxIters".into(),
            code: 3,
            history: None,
        }),
        Err(e) => Err(e),
    }
}

fn nekrasov(text: &str, opts: &SolveOptions) -> Result<Outcome, Error> {
    let p = parse_nekrasov_problem(text)?;
    let t = &p.truncation;
    match solve_nekrasov(t, p.hbar, p.m, p.buffer, opts) {
        Ok(sol) => {
            let diag = commutator_diagnostics(t, &sol.metric, p.hbar)?;
            Ok(Outcome {
                result: json!({
                    "status": "Converged",
                    "boundary_policy": format!("Fock weights frozen at degree >= {}", t.cap() - p.buffer),
                    "free_residual": sol.free_residual,
                    "iterations": sol.iterations,
                    "weights": weights_json(t, &sol.metric),
                    "residual_profile": sol.profile,
                    "commutator_profile": diag,
                }),
                status: "Converged".into(),
                code: 0,
                history: Some(sol.history),
            })
        }
        Err(Error::Solver { iteration, message }) => Ok(Outcome {
            result: json!({"status": "MaxIters", "iterations": iteration, "message": message}),
            status: "MaxIters".into(),
            code: 3,
            history: None,
        }),
        Err(e) => Err(e),
    }
}

fn fock_check(n: usize, degree: u32, rho: f64, hbar: f64) -> Result<Outcome, Error> {
    if degree > MAX_STATE_DEGREE {
        return Err(Error::Validation(format!("degree is capped at {MAX_STATE_DEGREE}")));
    }
    let exact = |x: f64, name: &str| {
        BigRational::from_float(x).ok_or_else(|| Error::Validation(format!("{name} must be finite")))
    };
    let check = verify_state_identities(n, degree, &exact(rho, "rho")?, &exact(hbar, "hbar")?)?;
    let float = verify_state_identities_f64(n, degree, rho, hbar)?;
    let gram = gram_min_eigenvalue(n, degree.min(4), rho, hbar)?;
    Ok(Outcome {
        result: json!({
            "n": n,
            "degree": degree,
            "rho": rho,
            "hbar": hbar,
            "checked": check.checked,
            "exact_deviation": check.max_deviation,
            "float_deviation": float.max_deviation,
            "gram_min_eigenvalue": gram,
            "passed": check.exact_zero,
        }),
        status: if check.exact_zero { "ok" } else { "failed" }.into(),
        code: if check.exact_zero { 0 } else { 3 },
        history: None,
    })
}

fn run(cli: &Cli) -> Result<(Outcome, Option<Vec<u8>>), String> {
    let g = &cli.global;
    let opts = g.solve_options();
    opts.validate().map_err(|e| e.to_string())?;
    let parse = |text: &str| {
        parse_quiver_spec_with(
            text,
            ParseOptions {
                allow_nonzero_slope: g.allow_nonzero_slope,
            },
        )
    };
    let err = |e: Error| e.to_string();
    match &cli.command {
        Command::King(KingCommand::Solve { input }) => {
            let (bytes, text) = read_input(input)?;
            let p = parse(&text).map_err(err)?;
            Ok((king_solve(&p, &opts).map_err(err)?, Some(bytes)))
        }
        Command::King(KingCommand::VerifyUniversal { input, samples }) => {
            let (bytes, text) = read_input(input)?;
            let p = parse(&text).map_err(err)?;
            Ok((king_verify(&p, *samples, g.seed).map_err(err)?, Some(bytes)))
        }
        Command::Adhm(AdhmCommand::Solve { n, k, eta, flip_eta }) => {
            let eta = if *flip_eta { -eta } else { *eta };
            Ok((adhm(*n, *k, eta, &opts).map_err(err)?, None))
        }
        Command::Nekrasov(NekrasovCommand::Solve { input }) => {
            let (bytes, text) = read_input(input)?;
            Ok((nekrasov(&text, &opts).map_err(err)?, Some(bytes)))
        }
        Command::Fock(FockCommand::CheckState { n, degree, rho, hbar }) => {
            Ok((fock_check(*n, *degree, *rho, *hbar).map_err(err)?, None))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    let (outcome, input) = match run(&cli) {
        Ok(r) => r,
        Err(message) => {
            eprintln!("error: {message}");
            return ExitCode::from(1);
        }
    };
    if let (Some(path), Some(history)) = (&cli.global.history, &outcome.history) {
        if let Err(e) = write_history(path, history) {
            eprintln!("error: cannot write history to {}: {e}", path.display());
            return ExitCode::from(1);
        }
    }
    let manifest = RunManifest::new(
        input.as_deref(),
        cli.global.seed,
        start.elapsed(),
        &outcome.status,
        i32::from(outcome.code),
    );
    if let Err(e) = emit(&outcome.result, &manifest, cli.global.out.as_deref()) {
        eprintln!("error: cannot write results: {e}");
        return ExitCode::from(1);
    }
    ExitCode::from(outcome.code)
}
