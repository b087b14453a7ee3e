//! Command-line front end.

mod config;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use clap::Parser;
use serde_json::{json, Map, Value};

pub use config::{parse_config, parse_config_text, Cli, Command, ConfigErrors, DirectionArg, RunConfig, Scalar};

use crate::barriers::{default_barriers, monotone_iterate, stability_classify, Direction, MonotoneOptions};
use crate::branch::{pseudo_arclength_continue, trace_minimal_branch, BranchConfig, NewtonOptions, Termination};
use crate::error::Error;
use crate::grid::{norm_inf, write_csv, Field, Grid};
use crate::linops::{assemble, dirichlet_lambda1, smallest_eigenpair};
use crate::minimax::{dyadic_endpoint, mountain_pass, second_solution, MountainPassOptions};
use crate::problems::{catalog, catalog_entries, Coupling, Params, ProblemSpec};

/// Parses arguments, runs the command, and returns the process exit code:
/// 0 on success, 1 on a solver error, 2 on invalid configuration.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    init_logging();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match parse_config(cli) {
        Ok(cfg) => run(&cfg),
        Err(e) => {
            eprint!("error: {e}");
            2
        }
    }
}

fn init_logging() {
    let level = match std::env::var("ELLIPTIC_LOG").as_deref() {
        Ok("debug") => log::LevelFilter::Debug,
        Ok("info") => log::LevelFilter::Info,
        _ => log::LevelFilter::Off,
    };
    let _ = env_logger::Builder::new().filter_level(level).format_timestamp(None).try_init();
}

enum Failure {
    Solver(Error),
    Io(std::io::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Solver(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e)
    }
}

/// Runs a validated configuration, writing artifacts under `cfg.out`.
pub fn run(cfg: &RunConfig) -> i32 {
    if cfg.command == Command::Catalog {
        print_catalog();
        return 0;
    }
    let mut summary = Map::new();
    summary.insert("command".into(), json!(cfg.command.name()));
    summary.insert("n".into(), json!(cfg.n));
    summary.insert("dim".into(), json!(cfg.dim));
    summary.insert("seed".into(), json!(cfg.seed));
    let outcome = fs::create_dir_all(&cfg.out)
        .map_err(Failure::from)
        .and_then(|_| execute(cfg, &mut summary));
    match outcome {
        Ok(()) => {
            summary.insert("status".into(), json!("ok"));
            match write_summary(&cfg.out, &summary) {
                Ok(()) => 0,
                Err(e) => {
                    eprintln!("error: cannot write summary: {e}");
                    1
                }
            }
        }
        Err(failure) => {
            let (name, message) = match &failure {
                Failure::Solver(e) => (e.name(), e.to_string()),
                Failure::Io(e) => ("Io", e.to_string()),
            };
            eprintln!("error: {name}: {message}");
            summary.insert("status".into(), json!("failed"));
            summary.insert("error".into(), json!(name));
            summary.insert("message".into(), json!(message));
            let _ = write_summary(&cfg.out, &summary);
            1
        }
    }
}

fn print_catalog() {
    // A closed pipe (e.g. `| head`) is not an error worth reporting.
    let _ = write_catalog(&mut std::io::stdout().lock());
}

fn write_catalog(out: &mut impl Write) -> std::io::Result<()> {
    for entry in catalog_entries() {
        writeln!(out, "{}: {}", entry.name, entry.formula)?;
        for p in &entry.params {
            writeln!(out, "  param {} (default {}, {})", p.name, p.default, p.constraint)?;
        }
        if let Ok(nl) = catalog(entry.name, &Params::new()) {
            let meta = serde_json::to_string(nl.meta()).unwrap_or_default();
            writeln!(out, "  meta {meta}")?;
        }
    }
    Ok(())
}

fn write_summary(dir: &Path, summary: &Map<String, Value>) -> std::io::Result<()> {
    let mut f = BufWriter::new(File::create(dir.join("summary.json"))?);
    serde_json::to_writer_pretty(&mut f, summary)?;
    writeln!(f)?;
    f.flush()
}

fn write_field(dir: &Path, name: &str, grid: &Grid, u: &Field) -> std::io::Result<()> {
    let mut f = BufWriter::new(File::create(dir.join(name))?);
    write_csv(grid, u, &mut f)?;
    f.flush()
}

fn build_grid(cfg: &RunConfig) -> Result<Grid, Error> {
    match cfg.dim {
        1 => Grid::unit_interval(cfg.n),
        _ => Grid::unit_square(cfg.n),
    }
}

fn build_problem(cfg: &RunConfig, grid: &Grid, lambda1: f64) -> Result<(ProblemSpec, f64), Error> {
    let params: Params = cfg.params.iter().map(|(k, v)| (k.clone(), v.resolve(lambda1))).collect();
    let nl = catalog(&cfg.problem, &params)?;
    let lambda = cfg.lambda.resolve(lambda1);
    Ok((ProblemSpec::new(grid, nl, Coupling::Lambda(lambda)), lambda))
}

fn execute(cfg: &RunConfig, s: &mut Map<String, Value>) -> Result<(), Failure> {
    let grid = build_grid(cfg)?;
    let lambda1 = dirichlet_lambda1(&grid)?;
    s.insert("lambda1".into(), json!(lambda1));
    match &cfg.command {
        Command::Catalog => Ok(()),
        Command::Eig { shift } => {
            let op = assemble(&grid, &grid.constant(*shift))?;
            let pair = smallest_eigenpair(&op)?;
            s.insert("eigenvalue".into(), json!(pair.value));
            s.insert("residual".into(), json!(pair.residual));
            s.insert("iterations".into(), json!(pair.iterations));
            s.insert("shift".into(), json!(shift));
            write_field(&cfg.out, "eigenvector.csv", &grid, &pair.vector)?;
            Ok(())
        }
        Command::SolveMonotone { direction, max_iter } => {
            let (problem, lambda) = build_problem(cfg, &grid, lambda1)?;
            s.insert("problem".into(), json!(cfg.problem));
            s.insert("lambda".into(), json!(lambda));
            let pair = default_barriers(&problem)?;
            let dir = match direction {
                DirectionArg::Sub => Direction::FromSub,
                DirectionArg::Super => Direction::FromSuper,
            };
            let opts = MonotoneOptions {
                tol: cfg.tol,
                max_iter: *max_iter,
                record_iterates: false,
            };
            let (u, trace) = monotone_iterate(&problem, &pair, dir, &opts)?;
            let st = stability_classify(&problem, &u, lambda)?;
            s.insert("direction".into(), json!(dir));
            s.insert("sup_norm".into(), json!(norm_inf(&u)));
            s.insert("residual".into(), json!(trace.final_residual()));
            s.insert("lambda1_lin".into(), json!(st.lambda1_lin));
            s.insert("tag".into(), json!(st.tag));
            s.insert("iterations".into(), json!(trace.iterations()));
            s.insert("shift_a".into(), json!(trace.shift_a));
            write_field(&cfg.out, "solution.csv", &grid, &u)?;
            Ok(())
        }
        Command::Branch {
            arclength,
            lambda_max,
            lambda_min,
            norm_cap,
            max_points,
        } => {
            let (problem, _) = build_problem(cfg, &grid, lambda1)?;
            s.insert("problem".into(), json!(cfg.problem));
            let bc = BranchConfig {
                newton: NewtonOptions {
                    tol: cfg.tol,
                    ..NewtonOptions::default()
                },
                lambda_max: *lambda_max,
                lambda_min: *lambda_min,
                norm_cap: *norm_cap,
                max_points: *max_points,
                ..BranchConfig::default()
            };
            let mut diagram = trace_minimal_branch(&problem, &bc)?;
            let fold = diagram.fold.clone();
            if *arclength {
                if diagram.termination == Termination::Fold {
                    diagram = pseudo_arclength_continue(&problem, &diagram, &bc)?;
                } else {
                    log::info!("no fold reached; skipping arclength continuation");
                }
            }
            let fp0 = problem.nonlinearity().meta().fprime0;
            s.insert("termination".into(), json!(diagram.termination));
            s.insert("n_points".into(), json!(diagram.points.len()));
            s.insert("minimal_points".into(), json!(diagram.minimal_len));
            s.insert(
                "bound_lambda1_over_fprime0".into(),
                if fp0 > 0.0 { json!(lambda1 / fp0) } else { Value::Null },
            );
            if let Some(f) = fold {
                s.insert("lambda_star".into(), json!(f.lambda_star));
                s.insert("u_star_sup_norm".into(), json!(f.u_star_supnorm));
            }
            let mut w = BufWriter::new(File::create(cfg.out.join("diagram.csv"))?);
            writeln!(w, "lambda,sup_norm,l2_norm,lambda1_lin,tag,arclength")?;
            for p in &diagram.points {
                writeln!(
                    w,
                    "{:.16e},{:.16e},{:.16e},{:.16e},{},{:.16e}",
                    p.lambda,
                    p.sup_norm,
                    p.l2_norm,
                    p.lambda1_lin,
                    p.tag.as_str(),
                    p.arclength
                )?;
            }
            w.flush()?;
            Ok(())
        }
        Command::Mp { m, max_iter, second } => {
            let (problem, lambda) = build_problem(cfg, &grid, lambda1)?;
            s.insert("problem".into(), json!(cfg.problem));
            s.insert("lambda".into(), json!(lambda));
            let opts = MountainPassOptions {
                m: *m,
                tol: cfg.tol,
                max_iter: *max_iter,
                ..MountainPassOptions::default()
            };
            let (saddle, mp) = if *second {
                let sol = second_solution(&problem, lambda, &opts)?;
                s.insert("minimal_sup_norm".into(), json!(norm_inf(&sol.minimal)));
                s.insert("ordering_ok".into(), json!(sol.certificate.ordering_ok));
                s.insert("min_gap".into(), json!(sol.certificate.min_gap));
                s.insert("residual".into(), json!(sol.certificate.residual));
                write_field(&cfg.out, "minimal.csv", &grid, &sol.minimal)?;
                (sol.u2, sol.minimax)
            } else {
                let e = dyadic_endpoint(&problem, lambda, 1.0)?;
                let mp = mountain_pass(&problem, lambda, &e, &opts)?;
                (mp.u.clone(), mp)
            };
            let st = stability_classify(&problem, &saddle, lambda)?;
            s.insert("c".into(), json!(mp.c));
            s.insert("sup_norm".into(), json!(norm_inf(&saddle)));
            s.insert("grad_norm".into(), json!(mp.grad_norm));
            s.insert("lambda1_lin".into(), json!(st.lambda1_lin));
            s.insert("tag".into(), json!(st.tag));
            s.insert("iters".into(), json!(mp.iterations));
            write_field(&cfg.out, "saddle.csv", &grid, &saddle)?;
            Ok(())
        }
    }
}

/// Entry point for the binary.
pub fn main() -> ! {
    let code = main_with_args(std::env::args_os());
    std::process::exit(code)
}

