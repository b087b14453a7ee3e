//! Newton's method and continuation in `λ` for `-Δu = λ f(u)`.

use serde::Serialize;

use crate::barriers::{classify_with, StabilityTag};
use crate::error::{Error, Result};
use crate::grid::{dot, max_abs, norm_inf, norm_l2, Field, Grid};
use crate::linops::{dirichlet_lambda1, BandedLu, ShiftedLaplacian};
use crate::problems::{residual, Coupling, ProblemSpec, Source};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    /// Converged once `‖-Δ_h u - s(u)‖∞ <= tol · max(1, ‖u‖∞)`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: 1e-9,
            max_iter: 50,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub u: Field,
    pub iterations: usize,
    pub residual: f64,
}

const MAX_HALVINGS: usize = 30;

fn jacobian<S: Source + ?Sized>(grid: &Grid, src: &S, u: &[f64]) -> ShiftedLaplacian {
    ShiftedLaplacian::with_shift(grid, src.derivatives(u).iter().map(|d| -d).collect())
}

fn factor_jacobian<S: Source + ?Sized>(grid: &Grid, src: &S, u: &[f64], lambda: f64) -> Result<BandedLu> {
    jacobian(grid, src, u).factorize().map_err(|e| match e {
        Error::SingularOperator { .. } => Error::SingularJacobian { lambda },
        other => other,
    })
}

/// Damped Newton for `-Δ_h u = s(u)`; `lambda` only labels errors.
pub(crate) fn newton_with<S: Source + ?Sized>(
    grid: &Grid,
    src: &S,
    mut u: Vec<f64>,
    opts: &NewtonOptions,
    lambda: f64,
) -> Result<(Vec<f64>, usize, f64)> {
    let mut r = residual(grid, src, &u);
    let mut rnorm = max_abs(&r);
    for it in 0..=opts.max_iter {
        if !rnorm.is_finite() {
            break;
        }
        if rnorm <= opts.tol * max_abs(&u).max(1.0) {
            return Ok((u, it, rnorm));
        }
        if it == opts.max_iter {
            break;
        }
        let lu = factor_jacobian(grid, src, &u, lambda)?;
        let mut delta = r.clone();
        lu.solve_in_place(&mut delta);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<f64> = u.iter().zip(&delta).map(|(a, d)| a - t * d).collect();
            let rt = residual(grid, src, &trial);
            let rtn = max_abs(&rt);
            if rtn < rnorm {
                u = trial;
                r = rt;
                rnorm = rtn;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return Err(Error::NoConvergence {
                iterations: it + 1,
                residual: rnorm,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        residual: rnorm,
    })
}

/// Solves `-Δ_h u = λ f(u) + g` by damped Newton from `guess`.
pub fn newton_solve(problem: &ProblemSpec, lambda: f64, guess: &Field, opts: &NewtonOptions) -> Result<NewtonOutcome> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidInput(format!("lambda must be nonnegative, got {lambda}")));
    }
    let grid = problem.grid();
    grid.check(guess)?;
    let src = problem.source(lambda);
    let (u, iterations, residual) = newton_with(grid, &src, guess.values().to_vec(), opts, lambda)?;
    Ok(NewtonOutcome {
        u: grid.wrap(u),
        iterations,
        residual,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchConfig {
    pub newton: NewtonOptions,
    /// First `Δλ`; defaults to `0.05 λ₁_h / f'(0)` (or `0.05 λ₁_h` when `f'(0) <= 0`).
    pub initial_step: Option<f64>,
    pub min_step: f64,
    pub lambda_max: Option<f64>,
    pub lambda_min: f64,
    pub norm_cap: f64,
    pub max_points: usize,
    /// A step is rejected when `λ₁,lin` falls below this fraction of its previous value.
    pub guard: f64,
    /// First arclength step; defaults to a fraction of the state norm.
    pub arclength_step: Option<f64>,
}

impl Default for BranchConfig {
    fn default() -> Self {
        BranchConfig {
            newton: NewtonOptions::default(),
            initial_step: None,
            min_step: 1e-8,
            lambda_max: None,
            lambda_min: 0.0,
            norm_cap: 1e3,
            max_points: 5000,
            guard: 0.2,
            arclength_step: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BranchPoint {
    pub lambda: f64,
    pub u: Field,
    pub sup_norm: f64,
    pub l2_norm: f64,
    pub lambda1_lin: f64,
    pub tag: StabilityTag,
    pub arclength: f64,
    pub newton_iters: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Steps collapsed after Newton failed beyond the last accepted point.
    Fold,
    /// The sup-norm exceeded the cap.
    Asymptote,
    /// Steps collapsed while Newton kept converging: stability was lost without a turning point.
    Bifurcation,
    LambdaMax,
    LambdaMin,
    MaxPoints,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Fold => "fold",
            Termination::Asymptote => "asymptote",
            Termination::Bifurcation => "bifurcation",
            Termination::LambdaMax => "lambda_max",
            Termination::LambdaMin => "lambda_min",
            Termination::MaxPoints => "max_points",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Fold {
    pub lambda_star: f64,
    pub u_star_supnorm: f64,
    pub lambda1_lin: f64,
    pub u_star: Field,
    /// `λ* <= λ₁_h / f'(0) + 1e-8`, checked for convex positive `f` with `f'(0) > 0`.
    pub within_bound: Option<bool>,
}

#[derive(Debug, Clone)]
pub struct Diagram {
    pub points: Vec<BranchPoint>,
    pub fold: Option<Fold>,
    pub termination: Termination,
    /// Number of leading points on the minimal branch.
    pub minimal_len: usize,
    pub lambda1: f64,
}

impl Diagram {
    pub fn minimal(&self) -> &[BranchPoint] {
        &self.points[..self.minimal_len]
    }

    /// Points added after the minimal prefix, in continuation order.
    pub fn continued(&self) -> &[BranchPoint] {
        &self.points[self.minimal_len..]
    }
}

fn lambda_coupled(problem: &ProblemSpec) -> Result<()> {
    match problem.coupling() {
        Coupling::Lambda(_) => Ok(()),
        Coupling::Fixed => Err(Error::InvalidInput("continuation needs a lambda-coupled problem".into())),
    }
}

struct Ctx<'a> {
    problem: &'a ProblemSpec,
    grid: &'a Grid,
    meas: f64,
}

impl Ctx<'_> {
    fn point(&self, lambda: f64, u: Vec<f64>, iters: usize, arclength: f64) -> Result<BranchPoint> {
        let src = self.problem.source(lambda);
        let st = classify_with(self.grid, &src, &u)?;
        let res = max_abs(&residual(self.grid, &src, &u));
        let field = self.grid.wrap(u);
        Ok(BranchPoint {
            lambda,
            sup_norm: norm_inf(&field),
            l2_norm: norm_l2(self.grid, &field)?,
            u: field,
            lambda1_lin: st.lambda1_lin,
            tag: st.tag,
            arclength,
            newton_iters: iters,
            residual: res,
        })
    }

    /// `∂u/∂λ` along the branch: `J u_λ = f(u)`.
    fn tangent(&self, lambda: f64, u: &[f64]) -> Result<Vec<f64>> {
        let src = self.problem.source(lambda);
        let lu = factor_jacobian(self.grid, &src, u, lambda)?;
        Ok(lu.solve(&self.dlambda(u)))
    }

    /// `∂s/∂λ = f(x, u)`.
    fn dlambda(&self, u: &[f64]) -> Vec<f64> {
        let nl = self.problem.nonlinearity();
        u.iter()
            .enumerate()
            .map(|(i, &v)| nl.f(self.grid.point(i), v))
            .collect()
    }

    fn distance(&self, a: &BranchPoint, b_lambda: f64, b: &[f64]) -> f64 {
        let du: f64 = a.u.values().iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        (self.meas * du + (a.lambda - b_lambda).powi(2)).sqrt()
    }
}

/// Natural continuation of the minimal branch from `(0, u₀)`.
pub fn trace_minimal_branch(problem: &ProblemSpec, config: &BranchConfig) -> Result<Diagram> {
    lambda_coupled(problem)?;
    let grid = problem.grid();
    let ctx = Ctx {
        problem,
        grid,
        meas: grid.cell_measure(),
    };
    let lambda1 = dirichlet_lambda1(grid)?;
    let fp0 = problem.nonlinearity().meta().fprime0;
    let step0 = config
        .initial_step
        .unwrap_or(if fp0 > 0.0 { 0.05 * lambda1 / fp0 } else { 0.05 * lambda1 });

    let (u0, it0, _) = newton_with(grid, &problem.source(0.0), vec![0.0; grid.len()], &config.newton, 0.0)?;
    let mut points = vec![ctx.point(0.0, u0, it0, 0.0)?];
    let mut step = step0;
    let mut failed_since_accept = false;

    let termination = loop {
        if points.len() >= config.max_points {
            break Termination::MaxPoints;
        }
        let last = points.last().expect("branch has a start point");
        if let Some(lmax) = config.lambda_max {
            if last.lambda >= lmax {
                break Termination::LambdaMax;
            }
        }
        let (dl, target) = match config.lambda_max {
            Some(lmax) if last.lambda + step >= lmax => (lmax - last.lambda, lmax),
            _ => (step, last.lambda + step),
        };
        let accepted = ctx.tangent(last.lambda, last.u.values()).and_then(|ul| {
            let guess: Vec<f64> = last.u.values().iter().zip(&ul).map(|(u, d)| u + dl * d).collect();
            let (u, it, _) = newton_with(grid, &problem.source(target), guess, &config.newton, target)?;
            let arc = last.arclength + ctx.distance(last, target, &u);
            ctx.point(target, u, it, arc)
        });
        match accepted {
            Ok(p) if p.lambda1_lin > 0.0 && p.lambda1_lin >= config.guard * last.lambda1_lin => {
                log::debug!("accepted lambda = {:.10} sup = {:.6e} mu = {:.6e}", p.lambda, p.sup_norm, p.lambda1_lin);
                let over_cap = p.sup_norm > config.norm_cap;
                points.push(p);
                failed_since_accept = false;
                if over_cap {
                    break Termination::Asymptote;
                }
                step = (1.5 * step).min(step0);
            }
            Ok(_) => {
                step *= 0.5;
            }
            Err(e) => {
                log::debug!("continuation step {dl:e} from lambda = {} failed: {e}", last.lambda);
                failed_since_accept = true;
                step *= 0.5;
            }
        }
        if step < config.min_step {
            break if failed_since_accept {
                Termination::Fold
            } else {
                Termination::Bifurcation
            };
        }
    };

    let minimal_len = points.len();
    let mut diagram = Diagram {
        points,
        fold: None,
        termination,
        minimal_len,
        lambda1,
    };
    if termination == Termination::Fold {
        match estimate_lambda_star(problem, &diagram, config) {
            Ok(fold) => diagram.fold = Some(fold),
            Err(e) => log::warn!("fold refinement failed: {e}"),
        }
    }
    Ok(diagram)
}

/// Refines the fold by secant steps on `λ ↦ λ₁,lin(u(λ))²`, which vanishes
/// linearly at a simple fold, until `|λ₁,lin| <= 1e-6 λ₁_h`.
pub fn estimate_lambda_star(problem: &ProblemSpec, diagram: &Diagram, config: &BranchConfig) -> Result<Fold> {
    if diagram.termination != Termination::Fold || diagram.minimal_len < 2 {
        return Err(Error::NoFold);
    }
    lambda_coupled(problem)?;
    let grid = problem.grid();
    let ctx = Ctx {
        problem,
        grid,
        meas: grid.cell_measure(),
    };
    let lambda1 = diagram.lambda1;
    let target = 1e-6 * lambda1;
    let pts = diagram.minimal();
    let (pa, pb) = (&pts[pts.len() - 2], &pts[pts.len() - 1]);

    let mut good = (pb.lambda, pb.u.values().to_vec());
    let mut good_tangent = ctx.tangent(good.0, &good.1)?;
    let mut a = (pa.lambda, pa.lambda1_lin.powi(2));
    let mut b = (pb.lambda, pb.lambda1_lin.powi(2));
    let mut best = (pb.lambda1_lin.abs(), pb.lambda, pb.u.values().to_vec(), pb.lambda1_lin);
    let mut next = secant(a, b);
    for _ in 0..100 {
        if best.0 <= target {
            break;
        }
        let dl = next - good.0;
        let guess: Vec<f64> = good.1.iter().zip(&good_tangent).map(|(u, t)| u + dl * t).collect();
        let solved = newton_with(grid, &problem.source(next), guess, &config.newton, next)
            .and_then(|(u, _, _)| Ok((classify_with(grid, &problem.source(next), &u)?.lambda1_lin, u)));
        match solved {
            Ok((mu, u)) => {
                if mu.abs() < best.0 {
                    best = (mu.abs(), next, u.clone(), mu);
                }
                if mu > 0.0 && next > good.0 {
                    good_tangent = ctx.tangent(next, &u)?;
                    good = (next, u);
                }
                a = b;
                b = (next, mu * mu);
                let s = secant(a, b);
                next = if s.is_finite() && s != b.0 { s } else { 0.5 * (next + good.0) };
            }
            Err(_) => {
                // Past the fold: no solution; move back toward the last good point.
                next = 0.5 * (next + good.0);
            }
        }
    }
    if best.0 > target {
        log::warn!("fold refinement stopped at |mu| = {:e}", best.0);
    }
    let meta = problem.nonlinearity().meta();
    let within_bound = (meta.convex && meta.positive && meta.fprime0 > 0.0)
        .then(|| best.1 <= lambda1 / meta.fprime0 + 1e-8);
    if within_bound == Some(false) {
        log::warn!("fold estimate {} exceeds lambda1/f'(0) = {}", best.1, lambda1 / meta.fprime0);
    }
    let u_star = grid.wrap(best.2);
    Ok(Fold {
        lambda_star: best.1,
        u_star_supnorm: norm_inf(&u_star),
        lambda1_lin: best.3,
        u_star,
        within_bound,
    })
}

fn secant(a: (f64, f64), b: (f64, f64)) -> f64 {
    b.0 - b.1 * (b.0 - a.0) / (b.1 - a.1)
}

const CORRECTOR_ITERS: usize = 12;

/// Continues past the fold in `(u, λ)` with pseudo-arclength steps, using the
/// inner product `h^N u·v + λμ`.
pub fn pseudo_arclength_continue(problem: &ProblemSpec, diagram: &Diagram, config: &BranchConfig) -> Result<Diagram> {
    if diagram.termination != Termination::Fold || diagram.minimal_len < 2 {
        return Err(Error::NoFold);
    }
    lambda_coupled(problem)?;
    let grid = problem.grid();
    let ctx = Ctx {
        problem,
        grid,
        meas: grid.cell_measure(),
    };
    let meas = ctx.meas;
    let norm = |u: &[f64], l: f64| (meas * dot(u, u) + l * l).sqrt();

    let mut points: Vec<BranchPoint> = diagram.points[..diagram.minimal_len].to_vec();
    let start = points.last().expect("nonempty minimal branch").clone();
    let ul = ctx.tangent(start.lambda, start.u.values())?;
    let tn = norm(&ul, 1.0);
    let mut tangent: (Vec<f64>, f64) = (ul.iter().map(|x| x / tn).collect(), 1.0 / tn);
    let ds0 = config.arclength_step.unwrap_or(0.05 * (1.0 + start.l2_norm));
    let mut ds = ds0;

    let termination = loop {
        if points.len() >= config.max_points {
            break Termination::MaxPoints;
        }
        let last = points.last().expect("nonempty branch").clone();
        let corrected = corrector(&ctx, &last, &tangent, ds, config);
        let accepted = corrected.and_then(|(lambda, u, it)| {
            // Reject steps that turn sharply: they tend to hop between branches.
            let du: Vec<f64> = u.iter().zip(last.u.values()).map(|(a, b)| a - b).collect();
            let dl = lambda - last.lambda;
            let len = norm(&du, dl);
            let cos = (meas * dot(&du, &tangent.0) + dl * tangent.1) / len;
            if !(cos > 0.5) {
                return Err(Error::StepCollapse { lambda, step: ds });
            }
            let p = ctx.point(lambda, u, it, last.arclength + len)?;
            Ok((p, (du.iter().map(|x| x / len).collect::<Vec<_>>(), dl / len), it))
        });
        match accepted {
            Ok((p, secant_tangent, it)) => {
                log::debug!("arclength point lambda = {:.8} sup = {:.6e} mu = {:.4e}", p.lambda, p.sup_norm, p.lambda1_lin);
                let (sup, lambda) = (p.sup_norm, p.lambda);
                points.push(p);
                tangent = secant_tangent;
                if sup > config.norm_cap {
                    break Termination::Asymptote;
                }
                if lambda < config.lambda_min {
                    break Termination::LambdaMin;
                }
                if config.lambda_max.is_some_and(|lmax| lambda > lmax) {
                    break Termination::LambdaMax;
                }
                if it <= 4 {
                    ds *= 1.5;
                }
            }
            Err(e) => {
                log::debug!("arclength step {ds:e} from lambda = {} rejected: {e}", last.lambda);
                ds *= 0.5;
                if ds < config.min_step {
                    return Err(Error::StepCollapse {
                        lambda: last.lambda,
                        step: ds,
                    });
                }
            }
        }
    };
    Ok(Diagram {
        points,
        fold: diagram.fold.clone(),
        termination,
        minimal_len: diagram.minimal_len,
        lambda1: diagram.lambda1,
    })
}

/// Newton on the bordered system `F(u, λ) = 0`, `⟨t, (u, λ) - predictor⟩ = 0`.
fn corrector(
    ctx: &Ctx<'_>,
    last: &BranchPoint,
    tangent: &(Vec<f64>, f64),
    ds: f64,
    config: &BranchConfig,
) -> Result<(f64, Vec<f64>, usize)> {
    let grid = ctx.grid;
    let meas = ctx.meas;
    let pred_u: Vec<f64> = last.u.values().iter().zip(&tangent.0).map(|(u, t)| u + ds * t).collect();
    let pred_l = last.lambda + ds * tangent.1;
    let cu: Vec<f64> = tangent.0.iter().map(|t| meas * t).collect();
    let cl = tangent.1;
    let (mut u, mut lambda) = (pred_u.clone(), pred_l);

    for it in 0..=CORRECTOR_ITERS {
        let src = ctx.problem.source(lambda);
        let r = residual(grid, &src, &u);
        let rn = max_abs(&r);
        if !rn.is_finite() {
            break;
        }
        if it > 0 && rn <= config.newton.tol * max_abs(&u).max(1.0) {
            return Ok((lambda, u, it));
        }
        if it == CORRECTOR_ITERS {
            break;
        }
        let jac = jacobian(grid, &src, &u);
        let lu = jac.factorize().map_err(|_| Error::SingularJacobian { lambda })?;
        let fu = ctx.dlambda(&u);
        let n_res: f64 = dot(&cu, &u.iter().zip(&pred_u).map(|(a, b)| a - b).collect::<Vec<_>>()) + cl * (lambda - pred_l);
        let rhs_u: Vec<f64> = r.iter().map(|x| -x).collect();
        let (du, dl) = bordered_solve(&jac, &lu, &fu, &cu, cl, &rhs_u, -n_res);
        for (a, d) in u.iter_mut().zip(&du) {
            *a += d;
        }
        lambda += dl;
    }
    Err(Error::NoConvergence {
        iterations: CORRECTOR_ITERS,
        residual: f64::NAN,
    })
}

/// Solves `[J, -f; cᵀ, c_λ] (x, y) = (p, q)` by block elimination with two
/// steps of iterative refinement.
fn bordered_solve(
    jac: &ShiftedLaplacian,
    lu: &BandedLu,
    f: &[f64],
    c: &[f64],
    cl: f64,
    p: &[f64],
    q: f64,
) -> (Vec<f64>, f64) {
    let b = lu.solve(f);
    let cb = dot(c, &b) + cl;
    let block = |p: &[f64], q: f64| {
        let a = lu.solve(p);
        let y = (q - dot(c, &a)) / cb;
        let x: Vec<f64> = a.iter().zip(&b).map(|(ai, bi)| ai + y * bi).collect();
        (x, y)
    };
    let (mut x, mut y) = block(p, q);
    let mut jx = vec![0.0; x.len()];
    for _ in 0..2 {
        jac.apply_slice(&x, &mut jx);
        let r1: Vec<f64> = p.iter().zip(&jx).zip(f).map(|((pi, ji), fi)| pi - (ji - fi * y)).collect();
        let r2 = q - (dot(c, &x) + cl * y);
        let (dx, dy) = block(&r1, r2);
        for (xi, d) in x.iter_mut().zip(&dx) {
            *xi += d;
        }
        y += dy;
    }
    (x, y)
}

/// Solution at exactly `lambda` on a branch segment: interpolates between the
/// first pair of consecutive points bracketing `lambda` and runs Newton.
pub fn solve_on_branch(problem: &ProblemSpec, points: &[BranchPoint], lambda: f64, opts: &NewtonOptions) -> Result<NewtonOutcome> {
    let pair = points
        .windows(2)
        .find(|w| (w[0].lambda - lambda) * (w[1].lambda - lambda) <= 0.0 && w[0].lambda != w[1].lambda)
        .ok_or_else(|| Error::InvalidInput(format!("no branch segment brackets lambda = {lambda}")))?;
    let t = (lambda - pair[0].lambda) / (pair[1].lambda - pair[0].lambda);
    let guess = pair[0].u.combine(1.0 - t, &pair[1].u, t)?;
    newton_solve(problem, lambda, &guess, opts)
}

/// The minimal solution at `lambda`, reached by natural continuation from zero.
pub fn minimal_solution(problem: &ProblemSpec, lambda: f64, config: &BranchConfig) -> Result<BranchPoint> {
    let cfg = BranchConfig {
        lambda_max: Some(lambda),
        ..config.clone()
    };
    let d = trace_minimal_branch(problem, &cfg)?;
    match d.points.last() {
        Some(p) if d.termination == Termination::LambdaMax && p.lambda == lambda => Ok(p.clone()),
        _ => Err(Error::InvalidInput(format!(
            "minimal branch ends before lambda = {lambda} ({})",
            d.termination.as_str()
        ))),
    }
}
