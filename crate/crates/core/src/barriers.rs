//! Sub- and supersolutions, the monotone iteration between them, and
//! linearized stability.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{max_abs, Field, Grid};
use crate::linops::{self, ShiftedLaplacian};
use crate::problems::{residual, ProblemSpec, Source};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Sub,
    Super,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierCheck {
    pub ok: bool,
    /// Largest amount by which the inequality fails; 0 when it holds everywhere.
    pub worst_violation: f64,
}

/// Checks `-Δ_h u <= s(u)` (sub) or `>= s(u)` (super) at every node.
pub fn verify_barrier(problem: &ProblemSpec, u: &Field, side: Side) -> Result<BarrierCheck> {
    problem.grid().check(u)?;
    Ok(check_with(problem.grid(), &problem.source(problem.lambda()), u.values(), side))
}

fn check_with<S: Source + ?Sized>(grid: &Grid, src: &S, u: &[f64], side: Side) -> BarrierCheck {
    let r = residual(grid, src, u);
    let mut scale = src.values(u).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    scale = scale.max(max_abs(&r));
    let tol = 1e-10 * (1.0 + scale);
    let worst = r
        .iter()
        .map(|&ri| match side {
            Side::Sub => ri,
            Side::Super => -ri,
        })
        .fold(0.0f64, f64::max);
    BarrierCheck {
        ok: worst <= tol,
        worst_violation: worst,
    }
}

/// An ordered pair of barriers with their verification flags.
#[derive(Debug, Clone)]
pub struct BarrierPair {
    pub lower: Field,
    pub upper: Field,
    pub lower_verified: bool,
    pub upper_verified: bool,
    pub ordering_ok: bool,
}

impl BarrierPair {
    /// Verifies both sides and the nodewise ordering `lower <= upper`.
    pub fn new(problem: &ProblemSpec, lower: Field, upper: Field) -> Result<Self> {
        let lower_verified = verify_barrier(problem, &lower, Side::Sub)?.ok;
        let upper_verified = verify_barrier(problem, &upper, Side::Super)?.ok;
        let ordering_ok = lower.max_excess_over(&upper)? <= 0.0;
        Ok(BarrierPair {
            lower,
            upper,
            lower_verified,
            upper_verified,
            ordering_ok,
        })
    }

    pub fn is_usable(&self) -> bool {
        self.lower_verified && self.upper_verified && self.ordering_ok
    }
}

const GROWTH_FRACTIONS: [f64; 6] = [0.0, 0.25, 0.5, 0.75, 0.9, 0.95];
const GROWTH_SAMPLES: usize = 128;

/// Barriers from a sampled growth bound `s(u) sign u <= a|u| + C` with `a < λ₁_h`.
///
/// The supersolution solves `(-Δ_h - a) U = C'`; the subsolution is `-U`,
/// or `εφ₁` when the linearization at zero exceeds `λ₁_h`.
pub fn default_barriers(problem: &ProblemSpec) -> Result<BarrierPair> {
    let grid = problem.grid();
    let src = problem.source(problem.lambda());
    let n = grid.len();
    let first = linops::smallest_eigenpair(&ShiftedLaplacian::laplacian(grid))?;
    let lambda1 = first.value;

    let mut upper = None;
    'ladder: for k in (0..=30).chain((1..=30).map(|k| -k)) {
        let r = 2f64.powi(k);
        // Samples avoid u = 0, where sign u is undefined.
        let mut excess = vec![f64::NEG_INFINITY; GROWTH_FRACTIONS.len()];
        for i in 0..n {
            for j in 0..GROWTH_SAMPLES {
                let t = r * (j as f64 + 0.5) / GROWTH_SAMPLES as f64;
                let up = src.value(i, t);
                let down = -src.value(i, -t);
                for (e, frac) in excess.iter_mut().zip(GROWTH_FRACTIONS) {
                    let a = frac * lambda1;
                    *e = e.max(up - a * t).max(down - a * t);
                }
            }
        }
        for (frac, e) in GROWTH_FRACTIONS.iter().zip(excess) {
            if !e.is_finite() {
                continue;
            }
            let c = e.max(0.0) * (1.0 + 1e-6);
            let a = frac * lambda1;
            let op = ShiftedLaplacian::with_shift(grid, vec![-a; n]);
            let u = match linops::solve(&op, &grid.constant(c)) {
                Ok(u) => u,
                Err(_) => continue,
            };
            if crate::grid::norm_inf(&u) > r {
                continue;
            }
            let up = check_with(grid, &src, u.values(), Side::Super);
            let neg: Vec<f64> = u.values().iter().map(|v| -v).collect();
            let down = check_with(grid, &src, &neg, Side::Sub);
            if up.ok && down.ok {
                log::debug!("growth bound accepted: R = {r}, a = {a}, C = {c}");
                upper = Some(u);
                break 'ladder;
            }
        }
    }
    let upper = upper.ok_or_else(|| {
        Error::GrowthBoundUnavailable("no (R, a) on the ladder yields verified barriers".into())
    })?;

    let slope0 = src.derivative(n / 2, 0.0);
    let lower = if slope0 > lambda1 {
        let mut eps = 1.0;
        let mut found = None;
        for _ in 0..=60 {
            let cand = first.vector.scaled(eps);
            let ok = check_with(grid, &src, cand.values(), Side::Sub).ok;
            if ok && cand.max_excess_over(&upper)? <= 0.0 {
                found = Some(cand);
                break;
            }
            eps *= 0.5;
        }
        found.ok_or(Error::EpsilonExhausted)?
    } else {
        upper.scaled(-1.0)
    };
    BarrierPair::new(problem, lower, upper)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Start from the supersolution; converges to the maximal solution of the pair.
    FromSuper,
    /// Start from the subsolution; converges to the minimal solution.
    FromSub,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneOptions {
    /// Stop once successive iterates differ by at most this in sup-norm.
    pub tol: f64,
    pub max_iter: usize,
    /// Keep every iterate in the trace.
    pub record_iterates: bool,
}

impl Default for MonotoneOptions {
    fn default() -> Self {
        MonotoneOptions {
            tol: 1e-10,
            max_iter: 20_000,
            record_iterates: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MonotoneTrace {
    /// Starting barrier followed by each iterate (empty unless recorded).
    pub iterates: Vec<Field>,
    /// Nonlinear residual `‖-Δ_h u_n - s(u_n)‖∞` of each iterate.
    pub residuals: Vec<f64>,
    /// `‖u_n - u_{n-1}‖∞` of each iterate.
    pub increments: Vec<f64>,
    pub shift_a: f64,
    pub direction: Direction,
    /// Largest breach of the monotone ordering seen (≤ 0 when none).
    pub worst_ordering: f64,
}

impl MonotoneTrace {
    pub fn iterations(&self) -> usize {
        self.increments.len()
    }

    pub fn final_residual(&self) -> f64 {
        self.residuals.last().copied().unwrap_or(f64::NAN)
    }
}

const SHIFT_SAMPLES: usize = 32;
const SHIFT_MARGIN: f64 = 1e-6;

fn estimate_shift<S: Source + ?Sized>(src: &S, lower: &[f64], upper: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for (i, (&lo, &hi)) in lower.iter().zip(upper).enumerate() {
        for j in 0..SHIFT_SAMPLES {
            let t = lo + (hi - lo) * j as f64 / (SHIFT_SAMPLES - 1) as f64;
            worst = worst.max(-src.derivative(i, t));
        }
    }
    worst + SHIFT_MARGIN
}

/// Iterates `(-Δ_h + a) u_n = s(u_{n-1}) + a u_{n-1}` from one side of a
/// verified, ordered pair.
pub fn monotone_iterate(
    problem: &ProblemSpec,
    pair: &BarrierPair,
    direction: Direction,
    opts: &MonotoneOptions,
) -> Result<(Field, MonotoneTrace)> {
    if !pair.is_usable() {
        return Err(Error::InvalidInput(
            "barrier pair must be verified on both sides and ordered".into(),
        ));
    }
    let grid = problem.grid();
    grid.check(&pair.lower)?;
    grid.check(&pair.upper)?;
    let src = problem.source(problem.lambda());
    let shift = estimate_shift(&src, pair.lower.values(), pair.upper.values());
    match run_monotone(grid, &src, pair, direction, opts, shift) {
        Err(Error::OrderingViolated { iteration, violation }) => {
            log::info!(
                "ordering violated at iteration {iteration} by {violation:e}; retrying with shift {}",
                2.0 * shift
            );
            run_monotone(grid, &src, pair, direction, opts, 2.0 * shift)
        }
        other => other,
    }
}

fn run_monotone<S: Source + ?Sized>(
    grid: &Grid,
    src: &S,
    pair: &BarrierPair,
    direction: Direction,
    opts: &MonotoneOptions,
    shift: f64,
) -> Result<(Field, MonotoneTrace)> {
    let n = grid.len();
    let op = ShiftedLaplacian::with_shift(grid, vec![shift; n]);
    let lower = pair.lower.values();
    let upper = pair.upper.values();
    let mut u = match direction {
        Direction::FromSuper => upper.to_vec(),
        Direction::FromSub => lower.to_vec(),
    };
    let mut trace = MonotoneTrace {
        iterates: Vec::new(),
        residuals: Vec::new(),
        increments: Vec::new(),
        shift_a: shift,
        direction,
        worst_ordering: f64::NEG_INFINITY,
    };
    if opts.record_iterates {
        trace.iterates.push(grid.wrap(u.clone()));
    }
    // 1-D systems are factored once; 2-D systems go through the iterative solver.
    let lu = match grid.dim() {
        crate::grid::Dim::One => Some(op.factorize()?),
        crate::grid::Dim::Two => None,
    };
    for it in 1..=opts.max_iter {
        let rhs: Vec<f64> = u
            .iter()
            .enumerate()
            .map(|(i, &v)| src.value(i, v) + shift * v)
            .collect();
        let next = match &lu {
            Some(lu) => lu.solve(&rhs),
            None => linops::solve(&op, &grid.wrap(rhs))?.into_values(),
        };
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidField("monotone iterate is not finite".into()));
        }
        let tol = 1e-12 * max_abs(&next).max(1.0);
        let mut breach = f64::NEG_INFINITY;
        let mut increment = 0.0f64;
        for i in 0..n {
            let step = match direction {
                Direction::FromSuper => next[i] - u[i],
                Direction::FromSub => u[i] - next[i],
            };
            breach = breach
                .max(step)
                .max(lower[i] - next[i])
                .max(next[i] - upper[i]);
            increment = increment.max((next[i] - u[i]).abs());
        }
        trace.worst_ordering = trace.worst_ordering.max(breach);
        if breach > tol {
            return Err(Error::OrderingViolated {
                iteration: it,
                violation: breach,
            });
        }
        u = next;
        trace.increments.push(increment);
        trace.residuals.push(max_abs(&residual(grid, src, &u)));
        if opts.record_iterates {
            trace.iterates.push(grid.wrap(u.clone()));
        }
        if increment <= opts.tol {
            return Ok((grid.wrap(u), trace));
        }
    }
    Err(Error::MaxIterExceeded {
        iterations: opts.max_iter,
        residual: trace.increments.last().copied().unwrap_or(f64::NAN),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StabilityTag {
    Stable,
    Semistable,
    Unstable,
}

impl StabilityTag {
    pub fn as_str(self) -> &'static str {
        match self {
            StabilityTag::Stable => "stable",
            StabilityTag::Semistable => "semistable",
            StabilityTag::Unstable => "unstable",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Stability {
    /// Smallest eigenvalue of `-Δ_h - λ f'(u)`.
    pub lambda1_lin: f64,
    pub tag: StabilityTag,
    /// Half-width of the semistable band.
    pub band: f64,
    pub eigenvector: Field,
}

/// Classifies `u` by the sign of the smallest eigenvalue of the linearization.
pub fn stability_classify(problem: &ProblemSpec, u: &Field, lambda: f64) -> Result<Stability> {
    problem.grid().check(u)?;
    if !u.is_finite() {
        return Err(Error::InvalidField("state is not finite".into()));
    }
    classify_with(problem.grid(), &problem.source(lambda), u.values())
}

pub(crate) fn classify_with<S: Source + ?Sized>(grid: &Grid, src: &S, u: &[f64]) -> Result<Stability> {
    let shift: Vec<f64> = src.derivatives(u).iter().map(|d| -d).collect();
    let band = 1e-8 * (1.0 + max_abs(&shift));
    let op = ShiftedLaplacian::with_shift(grid, shift);
    let pair = linops::smallest_eigenpair(&op)?;
    let tag = if pair.value > band {
        StabilityTag::Stable
    } else if pair.value < -band {
        StabilityTag::Unstable
    } else {
        StabilityTag::Semistable
    };
    Ok(Stability {
        lambda1_lin: pair.value,
        tag,
        band,
        eigenvector: pair.vector,
    })
}
