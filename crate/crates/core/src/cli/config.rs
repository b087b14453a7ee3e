//! Run configuration: command-line flags over a `key = value` file over defaults.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "elliptic", version, about = "Solution landscapes of -Δu = λ f(u) with zero Dirichlet data")]
pub struct Cli {
    /// Interior nodes per axis.
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Spatial dimension (1 or 2).
    #[arg(long, global = true)]
    pub dim: Option<usize>,
    /// Solver tolerance (command-specific meaning).
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// File of `key = value` lines; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: CommandArgs,
}

#[derive(Args, Debug, Default)]
pub struct ProblemArgs {
    /// Catalog name of the nonlinearity.
    #[arg(long)]
    pub problem: Option<String>,
    /// Catalog parameter, repeatable; values accept `K*lambda1`.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    pub params: Vec<String>,
    /// Coupling λ; accepts `K*lambda1`.
    #[arg(long)]
    pub lambda: Option<String>,
}

#[derive(Subcommand, Debug)]
pub enum CommandArgs {
    /// List catalog entries with parameters and metadata.
    Catalog {
        #[arg(value_parser = ["list"])]
        action: Option<String>,
    },
    /// Smallest eigenpair of -Δ_h + c.
    Eig {
        /// Constant shift c.
        #[arg(long)]
        shift: Option<f64>,
    },
    /// Monotone iteration between automatically built barriers.
    SolveMonotone {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, value_enum)]
        direction: Option<DirectionArg>,
        #[arg(long)]
        max_iter: Option<usize>,
    },
    /// Minimal branch with fold detection, optionally continued past the fold.
    Branch {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long)]
        arclength: bool,
        #[arg(long)]
        lambda_max: Option<f64>,
        #[arg(long)]
        lambda_min: Option<f64>,
        #[arg(long)]
        norm_cap: Option<f64>,
        #[arg(long)]
        max_points: Option<usize>,
    },
    /// Mountain-pass saddle, or with --second a solution above the minimal one.
    Mp {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Path segments.
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        max_iter: Option<usize>,
        #[arg(long)]
        second: bool,
    },
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirectionArg {
    Sub,
    Super,
}

/// A real number, possibly given as a multiple of the discrete `λ₁_h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scalar {
    Value(f64),
    Lambda1(f64),
}

impl Scalar {
    pub fn parse(s: &str) -> Option<Scalar> {
        let s = s.trim();
        if let Ok(v) = s.parse::<f64>() {
            return v.is_finite().then_some(Scalar::Value(v));
        }
        if s == "lambda1" {
            return Some(Scalar::Lambda1(1.0));
        }
        let k = s.strip_suffix("lambda1")?.trim_end().strip_suffix('*')?;
        k.trim().parse::<f64>().ok().filter(|k| k.is_finite()).map(Scalar::Lambda1)
    }

    pub fn resolve(self, lambda1: f64) -> f64 {
        match self {
            Scalar::Value(v) => v,
            Scalar::Lambda1(k) => k * lambda1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Catalog,
    Eig {
        shift: f64,
    },
    SolveMonotone {
        direction: DirectionArg,
        max_iter: usize,
    },
    Branch {
        arclength: bool,
        lambda_max: Option<f64>,
        lambda_min: f64,
        norm_cap: f64,
        max_points: usize,
    },
    Mp {
        m: usize,
        max_iter: usize,
        second: bool,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Catalog => "catalog",
            Command::Eig { .. } => "eig",
            Command::SolveMonotone { .. } => "solve-monotone",
            Command::Branch { .. } => "branch",
            Command::Mp { .. } => "mp",
        }
    }
}

/// A fully validated run description.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub problem: String,
    pub params: BTreeMap<String, Scalar>,
    pub lambda: Scalar,
    pub n: usize,
    pub dim: usize,
    pub tol: f64,
    pub out: PathBuf,
    pub seed: u64,
}

/// Every problem found while parsing and validating, one line per field.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConfigErrors(pub Vec<String>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid configuration:")?;
        for e in &self.0 {
            writeln!(f, "  - {e}")?;
        }
        Ok(())
    }
}

const FILE_KEYS: &[&str] = &[
    "n", "dim", "tol", "out", "seed", "problem", "lambda", "direction", "max_iter", "m", "second", "arclength",
    "lambda_max", "lambda_min", "norm_cap", "max_points", "shift",
];

/// Reads `key = value` lines; `#` starts a comment. Keys `param.NAME` set catalog parameters.
pub fn read_config_file(path: &Path, errors: &mut Vec<String>) -> BTreeMap<String, String> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            errors.push(format!("config: cannot read {}: {e}", path.display()));
            return BTreeMap::new();
        }
    };
    parse_config_text(&text, errors)
}

pub fn parse_config_text(text: &str, errors: &mut Vec<String>) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            errors.push(format!("config line {}: expected `key = value`", lineno + 1));
            continue;
        };
        let (k, v) = (k.trim(), v.trim());
        let known = FILE_KEYS.contains(&k) || k.strip_prefix("param.").is_some_and(|p| !p.is_empty());
        if !known {
            errors.push(format!("config line {}: unknown key `{k}`", lineno + 1));
            continue;
        }
        out.insert(k.to_string(), v.to_string());
    }
    out
}

struct Merge<'a> {
    file: &'a BTreeMap<String, String>,
    errors: Vec<String>,
}

impl Merge<'_> {
    fn get<T: std::str::FromStr>(&mut self, key: &str, flag: Option<T>, default: T) -> T {
        if let Some(v) = flag {
            return v;
        }
        match self.file.get(key) {
            Some(raw) => match raw.parse::<T>() {
                Ok(v) => v,
                Err(_) => {
                    self.errors.push(format!("{key}: cannot parse `{raw}`"));
                    default
                }
            },
            None => default,
        }
    }

    fn get_opt<T: std::str::FromStr>(&mut self, key: &str, flag: Option<T>) -> Option<T> {
        if flag.is_some() {
            return flag;
        }
        let raw = self.file.get(key)?;
        match raw.parse::<T>() {
            Ok(v) => Some(v),
            Err(_) => {
                self.errors.push(format!("{key}: cannot parse `{raw}`"));
                None
            }
        }
    }

    fn flag(&mut self, key: &str, given: bool) -> bool {
        given || self.get(key, None, false)
    }

    fn scalar(&mut self, key: &str, flag: Option<&str>, default: Scalar) -> Scalar {
        let raw = match flag {
            Some(f) => f.to_string(),
            None => match self.file.get(key) {
                Some(v) => v.clone(),
                None => return default,
            },
        };
        Scalar::parse(&raw).unwrap_or_else(|| {
            self.errors.push(format!("{key}: expected a number or `K*lambda1`, got `{raw}`"));
            default
        })
    }
}

/// Merges flags, file and defaults, then validates every field.
pub fn parse_config(cli: Cli) -> Result<RunConfig, ConfigErrors> {
    let mut early = Vec::new();
    let file = cli
        .config
        .as_deref()
        .map(|p| read_config_file(p, &mut early))
        .unwrap_or_default();
    let mut m = Merge { file: &file, errors: early };

    let empty = ProblemArgs::default();
    let pargs = match &cli.command {
        CommandArgs::SolveMonotone { problem, .. } | CommandArgs::Branch { problem, .. } | CommandArgs::Mp { problem, .. } => problem,
        _ => &empty,
    };

    let n = m.get("n", cli.n, 200usize);
    let dim = m.get("dim", cli.dim, 1usize);
    let out = m.get("out", cli.out.clone(), PathBuf::from("out"));
    let seed = m.get("seed", cli.seed, 0u64);
    let problem = m.get("problem", pargs.problem.clone(), "gelfand".to_string());
    let lambda = m.scalar("lambda", pargs.lambda.as_deref(), Scalar::Value(1.0));

    let mut params = BTreeMap::new();
    for (k, v) in &file {
        if let Some(name) = k.strip_prefix("param.") {
            match Scalar::parse(v) {
                Some(s) => {
                    params.insert(name.to_string(), s);
                }
                None => m.errors.push(format!("param.{name}: expected a number or `K*lambda1`, got `{v}`")),
            }
        }
    }
    for kv in &pargs.params {
        match kv.split_once('=') {
            Some((k, v)) => match Scalar::parse(v) {
                Some(s) => {
                    params.insert(k.trim().to_string(), s);
                }
                None => m.errors.push(format!("param.{}: expected a number or `K*lambda1`, got `{v}`", k.trim())),
            },
            None => m.errors.push(format!("param: expected KEY=VALUE, got `{kv}`")),
        }
    }

    let (command, default_tol) = match &cli.command {
        CommandArgs::Catalog { .. } => (Command::Catalog, 1e-10),
        CommandArgs::Eig { shift } => (
            Command::Eig {
                shift: m.get("shift", *shift, 0.0),
            },
            crate::linops::EIGEN_TOL,
        ),
        CommandArgs::SolveMonotone { direction, max_iter, .. } => {
            let direction = match direction {
                Some(d) => *d,
                None => match file.get("direction").map(String::as_str) {
                    None | Some("super") => DirectionArg::Super,
                    Some("sub") => DirectionArg::Sub,
                    Some(other) => {
                        m.errors.push(format!("direction: expected `sub` or `super`, got `{other}`"));
                        DirectionArg::Super
                    }
                },
            };
            let max_iter = m.get("max_iter", *max_iter, 20_000usize);
            (Command::SolveMonotone { direction, max_iter }, 1e-10)
        }
        CommandArgs::Branch {
            arclength,
            lambda_max,
            lambda_min,
            norm_cap,
            max_points,
            ..
        } => {
            let cmd = Command::Branch {
                arclength: m.flag("arclength", *arclength),
                lambda_max: m.get_opt("lambda_max", *lambda_max),
                lambda_min: m.get("lambda_min", *lambda_min, 0.0),
                norm_cap: m.get("norm_cap", *norm_cap, 1e3),
                max_points: m.get("max_points", *max_points, 5000usize),
            };
            (cmd, 1e-9)
        }
        CommandArgs::Mp { m: segs, max_iter, second, .. } => {
            let cmd = Command::Mp {
                m: m.get("m", *segs, 32usize),
                max_iter: m.get("max_iter", *max_iter, 20_000usize),
                second: m.flag("second", *second),
            };
            (cmd, 1e-6)
        }
    };
    let tol = m.get("tol", cli.tol, default_tol);
    let mut errors = m.errors;

    if n < 3 {
        errors.push(format!("n: must be at least 3 interior nodes (got {n})"));
    }
    if !(dim == 1 || dim == 2) {
        errors.push(format!("dim: must be 1 or 2 (got {dim})"));
    }
    if !(tol.is_finite() && tol > 0.0) {
        errors.push(format!("tol: must be positive (got {tol})"));
    }
    if !matches!(command, Command::Catalog | Command::Eig { .. })
        && !crate::problems::catalog_entries().iter().any(|e| e.name == problem)
    {
        errors.push(format!("problem: unknown catalog entry `{problem}`"));
    }
    match &command {
        Command::Mp { m: segs, .. } if *segs < 8 => errors.push(format!("m: must be at least 8 (got {segs})")),
        Command::Branch { norm_cap, lambda_min, .. } => {
            if !(*norm_cap > 0.0) {
                errors.push(format!("norm_cap: must be positive (got {norm_cap})"));
            }
            if !(*lambda_min >= 0.0) {
                errors.push(format!("lambda_min: must be nonnegative (got {lambda_min})"));
            }
        }
        Command::SolveMonotone { max_iter, .. } | Command::Mp { max_iter, .. } if *max_iter == 0 => {
            errors.push("max_iter: must be positive".to_string())
        }
        _ => {}
    }

    if errors.is_empty() {
        Ok(RunConfig {
            command,
            problem,
            params,
            lambda,
            n,
            dim,
            tol,
            out,
            seed,
        })
    } else {
        Err(ConfigErrors(errors))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Result<RunConfig, ConfigErrors> {
        let mut full = vec!["elliptic"];
        full.extend_from_slice(args);
        parse_config(Cli::try_parse_from(full).unwrap())
    }

    #[test]
    fn scalar_forms() {
        assert_eq!(Scalar::parse("2.5"), Some(Scalar::Value(2.5)));
        assert_eq!(Scalar::parse("lambda1"), Some(Scalar::Lambda1(1.0)));
        assert_eq!(Scalar::parse("2*lambda1"), Some(Scalar::Lambda1(2.0)));
        assert_eq!(Scalar::parse("0.5 * lambda1"), Some(Scalar::Lambda1(0.5)));
        assert_eq!(Scalar::parse("lambda2"), None);
        assert_eq!(Scalar::parse("inf"), None);
    }

    #[test]
    fn defaults_are_filled() {
        let c = parse(&["branch", "--problem", "gelfand", "--n", "200"]).unwrap();
        assert_eq!(c.n, 200);
        assert_eq!(c.dim, 1);
        assert_eq!(c.tol, 1e-9);
        assert!(matches!(c.command, Command::Branch { arclength: false, norm_cap, .. } if norm_cap == 1e3));
    }

    #[test]
    fn small_grid_is_rejected() {
        let e = parse(&["branch", "--n", "2"]).unwrap_err();
        assert!(e.0.iter().any(|m| m.starts_with("n:")));
    }

    #[test]
    fn errors_are_aggregated() {
        let e = parse(&["mp", "--n", "1", "--dim", "3", "--m", "2", "--problem", "nope"]).unwrap_err();
        assert_eq!(e.0.len(), 4, "{e}");
    }

    #[test]
    fn file_values_yield_to_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "# comment\nn = 50\ntol = 1e-7\nparam.p = 3\nlambda = 0.5*lambda1\n").unwrap();
        let c = parse(&["mp", "--config", path.to_str().unwrap(), "--n", "60"]).unwrap();
        assert_eq!(c.n, 60);
        assert_eq!(c.tol, 1e-7);
        assert_eq!(c.params["p"], Scalar::Value(3.0));
        assert_eq!(c.lambda, Scalar::Lambda1(0.5));
    }

    #[test]
    fn unknown_file_keys_are_rejected() {
        let mut errors = Vec::new();
        parse_config_text("n = 5\ncolour = blue\njunk\n", &mut errors);
        assert_eq!(errors.len(), 2);
        assert!(errors[0].contains("unknown key `colour`"));
    }
}
