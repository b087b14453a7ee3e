//! The discrete energy, its gradient, mountain-pass saddles, the second
//! solution above the minimal one, and ε-critical points by descent.

use crate::barriers::classify_with;
use crate::branch::{minimal_solution, newton_with, BranchConfig, NewtonOptions};
use crate::error::{Error, Result};
use crate::grid::{dot, max_abs, Field, Grid};
use crate::linops::{laplacian_apply, smallest_eigenpair, BandedLu, ShiftedLaplacian};
use crate::problems::{residual, ProblemSpec, Source, TranslatedSource};

/// Energy `½ h^N u·(-Δ_h u) - h^N Σ P(u)`, with `P` the primitive of the source.
struct Functional<'a, S: Source + ?Sized> {
    grid: &'a Grid,
    src: &'a S,
    meas: f64,
    lap: BandedLu,
}

impl<'a, S: Source + ?Sized> Functional<'a, S> {
    fn new(grid: &'a Grid, src: &'a S) -> Result<Self> {
        Ok(Functional {
            grid,
            src,
            meas: grid.cell_measure(),
            lap: ShiftedLaplacian::laplacian(grid).factorize()?,
        })
    }

    fn lap(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        laplacian_apply(self.grid, u, &mut out);
        out
    }

    fn energy(&self, u: &[f64]) -> f64 {
        let quad = 0.5 * dot(u, &self.lap(u));
        let pot: f64 = u.iter().enumerate().map(|(i, &v)| self.src.primitive(i, v)).sum();
        self.meas * (quad - pot)
    }

    /// `⟨a, b⟩_E = h^N a·(-Δ_h b)`.
    fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.meas * dot(a, &self.lap(b))
    }

    /// Preconditioned gradient `(-Δ_h)⁻¹ r` and its energy norm.
    fn gradient(&self, u: &[f64]) -> (Vec<f64>, Vec<f64>, f64) {
        let r = residual(self.grid, self.src, u);
        let g = self.lap.solve(&r);
        let norm = (self.meas * dot(&g, &r)).max(0.0).sqrt();
        (r, g, norm)
    }
}

/// `E_λ(u)`.
pub fn energy(problem: &ProblemSpec, lambda: f64, u: &Field) -> Result<f64> {
    problem.grid().check(u)?;
    let src = problem.source(lambda);
    Ok(Functional::new(problem.grid(), &src)?.energy(u.values()))
}

#[derive(Debug, Clone)]
pub struct Gradient {
    pub field: Field,
    /// Energy norm when preconditioned, sup-norm of the raw residual otherwise.
    pub norm: f64,
}

/// Raw residual `-Δ_h u - λ f(u)` (the `h^N`-weighted gradient), or its
/// energy-space representative `(-Δ_h)⁻¹ r` when `preconditioned`.
pub fn grad(problem: &ProblemSpec, lambda: f64, u: &Field, preconditioned: bool) -> Result<Gradient> {
    let grid = problem.grid();
    grid.check(u)?;
    let src = problem.source(lambda);
    if preconditioned {
        let (_, g, norm) = Functional::new(grid, &src)?.gradient(u.values());
        Ok(Gradient {
            field: grid.wrap(g),
            norm,
        })
    } else {
        let r = residual(grid, &src, u.values());
        let norm = max_abs(&r);
        Ok(Gradient {
            field: grid.wrap(r),
            norm,
        })
    }
}

/// A discrete path of `m + 1` fields with fixed endpoints.
#[derive(Debug, Clone)]
pub struct Path {
    nodes: Vec<Field>,
}

impl Path {
    pub fn nodes(&self) -> &[Field] {
        &self.nodes
    }

    /// Number of segments.
    pub fn m(&self) -> usize {
        self.nodes.len() - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MountainPassOptions {
    /// Number of path segments (at least 8).
    pub m: usize,
    /// Target for the projected gradient at the max node, in energy norm.
    pub tol: f64,
    pub max_iter: usize,
    pub reparam_every: usize,
    pub newton: NewtonOptions,
}

impl Default for MountainPassOptions {
    fn default() -> Self {
        MountainPassOptions {
            m: 32,
            tol: 1e-6,
            max_iter: 20_000,
            reparam_every: 10,
            newton: NewtonOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MinimaxResult {
    /// Energy of the saddle.
    pub c: f64,
    pub u: Field,
    /// Energy norm of the preconditioned gradient at the saddle.
    pub grad_norm: f64,
    pub path: Path,
    pub iterations: usize,
    /// Path maximum after every accepted deformation, starting with the straight path.
    pub max_energy_trace: Vec<f64>,
    /// Number of reparametrizations skipped because they raised the path maximum.
    pub skipped_reparams: usize,
}

const MAX_HALVINGS: usize = 40;
const REPARAM_SLACK: f64 = 1e-12;

fn argmax(e: &[f64]) -> usize {
    e.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
        .0
}

fn max_of(e: &[f64]) -> f64 {
    e.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Points at equal energy-norm arclength along the polyline `nodes[lo..=hi]`,
/// replacing the interior nodes of that range.
fn redistribute<S: Source + ?Sized>(f: &Functional<'_, S>, nodes: &mut [Vec<f64>], lo: usize, hi: usize) {
    if hi <= lo + 1 {
        return;
    }
    let mut cum = vec![0.0];
    for k in lo..hi {
        let d: Vec<f64> = nodes[k + 1].iter().zip(&nodes[k]).map(|(a, b)| a - b).collect();
        let len = f.inner(&d, &d).max(0.0).sqrt();
        cum.push(cum.last().unwrap() + len);
    }
    let total = *cum.last().unwrap();
    if !(total > 0.0) {
        return;
    }
    let old: Vec<Vec<f64>> = nodes[lo..=hi].to_vec();
    let count = hi - lo;
    let mut seg = 0;
    for j in 1..count {
        let s = total * j as f64 / count as f64;
        while seg + 1 < count && cum[seg + 1] < s {
            seg += 1;
        }
        let width = cum[seg + 1] - cum[seg];
        let t = if width > 0.0 { (s - cum[seg]) / width } else { 0.0 };
        nodes[lo + j] = old[seg]
            .iter()
            .zip(&old[seg + 1])
            .map(|(a, b)| (1.0 - t) * a + t * b)
            .collect();
    }
}

fn run_mountain_pass<S: Source + ?Sized>(
    grid: &Grid,
    src: &S,
    endpoint: &[f64],
    opts: &MountainPassOptions,
    lambda: f64,
) -> Result<MinimaxResult> {
    if opts.m < 8 {
        return Err(Error::InvalidInput(format!("path needs m >= 8 segments, got {}", opts.m)));
    }
    if endpoint.iter().all(|&v| v == 0.0) {
        return Err(Error::InvalidInput("endpoint must be nonzero".into()));
    }
    let f = Functional::new(grid, src)?;
    if !(f.energy(endpoint) < 0.0) {
        return Err(Error::NoMountainGeometry);
    }
    let m = opts.m;
    let mut nodes: Vec<Vec<f64>> = (0..=m)
        .map(|k| {
            if k == m {
                endpoint.to_vec()
            } else {
                let t = k as f64 / m as f64;
                endpoint.iter().map(|v| t * v).collect()
            }
        })
        .collect();
    let mut energies: Vec<f64> = nodes.iter().map(|u| f.energy(u)).collect();
    let mut trace = vec![max_of(&energies)];
    let mut step = 1.0f64;
    let mut skipped = 0;
    let mut converged = false;
    let mut iterations = 0;

    for it in 1..=opts.max_iter {
        iterations = it;
        let k = argmax(&energies);
        if k == 0 || k == m {
            return Err(Error::PathCollapsed);
        }
        let u = &nodes[k];
        let (r, g, _) = f.gradient(u);
        // Remove the component along the path so the node slides off the ridge, not along it.
        let tau: Vec<f64> = nodes[k + 1].iter().zip(&nodes[k - 1]).map(|(a, b)| a - b).collect();
        let tt = f.inner(&tau, &tau);
        let gt = f.meas * dot(&r, &tau);
        let d: Vec<f64> = if tt > 0.0 {
            g.iter().zip(&tau).map(|(gi, ti)| gi - gt / tt * ti).collect()
        } else {
            g
        };
        let dn = f.inner(&d, &d).max(0.0).sqrt();
        if dn <= opts.tol {
            converged = true;
            break;
        }

        let e0 = energies[k];
        let mut alpha = (2.0 * step).min(1.0);
        let mut moved = None;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<f64> = u.iter().zip(&d).map(|(a, b)| a - alpha * b).collect();
            let et = f.energy(&trial);
            if et < e0 {
                moved = Some((trial, et));
                break;
            }
            alpha *= 0.5;
        }
        let Some((trial, et)) = moved else {
            log::info!("mountain pass: no descent at iteration {it} (projected gradient {dn:e})");
            converged = dn <= 1e3 * opts.tol;
            break;
        };
        step = alpha;
        nodes[k] = trial;
        energies[k] = et;
        trace.push(max_of(&energies));

        if it % opts.reparam_every == 0 {
            let before = *trace.last().unwrap();
            let kmax = argmax(&energies);
            let mut uniform = nodes.clone();
            redistribute(&f, &mut uniform, 0, m);
            let eu: Vec<f64> = uniform.iter().map(|u| f.energy(u)).collect();
            if max_of(&eu) <= before + REPARAM_SLACK {
                nodes = uniform;
                energies = eu;
            } else {
                let mut pinned = nodes.clone();
                redistribute(&f, &mut pinned, 0, kmax);
                redistribute(&f, &mut pinned, kmax, m);
                let ep: Vec<f64> = pinned.iter().map(|u| f.energy(u)).collect();
                if max_of(&ep) <= before + REPARAM_SLACK {
                    nodes = pinned;
                    energies = ep;
                } else {
                    skipped += 1;
                }
            }
            trace.push(max_of(&energies));
        }
    }
    if !converged {
        let k = argmax(&energies);
        let (_, _, gn) = f.gradient(&nodes[k]);
        return Err(Error::MaxIterExceeded {
            iterations: opts.max_iter,
            residual: gn,
        });
    }

    let k = argmax(&energies);
    let (saddle, _, _) = newton_with(grid, src, nodes[k].clone(), &opts.newton, lambda)?;
    let (_, _, grad_norm) = f.gradient(&saddle);
    let c = f.energy(&saddle);
    Ok(MinimaxResult {
        c,
        u: grid.wrap(saddle),
        grad_norm,
        path: Path {
            nodes: nodes.into_iter().map(|v| grid.wrap(v)).collect(),
        },
        iterations,
        max_energy_trace: trace,
        skipped_reparams: skipped,
    })
}

/// Mountain-pass saddle between `0` and `endpoint`, which must have negative energy.
pub fn mountain_pass(problem: &ProblemSpec, lambda: f64, endpoint: &Field, opts: &MountainPassOptions) -> Result<MinimaxResult> {
    let grid = problem.grid();
    grid.check(endpoint)?;
    let src = problem.source(lambda);
    run_mountain_pass(grid, &src, endpoint.values(), opts, lambda)
}

fn first_mode(grid: &Grid) -> Result<Vec<f64>> {
    Ok(smallest_eigenpair(&ShiftedLaplacian::laplacian(grid))?.vector.into_values())
}

fn scan_endpoint<S: Source + ?Sized>(grid: &Grid, src: &S, base: f64) -> Result<(Vec<f64>, f64)> {
    let f = Functional::new(grid, src)?;
    let e1 = first_mode(grid)?;
    for k in 0..=16 {
        let t = base * 2f64.powi(k);
        let e: Vec<f64> = e1.iter().map(|v| t * v).collect();
        if f.energy(&e) < 0.0 {
            return Ok((e, t));
        }
    }
    Err(Error::NoMountainGeometry)
}

/// `t φ₁` for the smallest `t ∈ {2⁰, …, 2¹⁶}·base` with negative energy.
pub fn dyadic_endpoint(problem: &ProblemSpec, lambda: f64, base: f64) -> Result<Field> {
    let src = problem.source(lambda);
    let (e, _) = scan_endpoint(problem.grid(), &src, base)?;
    Ok(problem.grid().wrap(e))
}

#[derive(Debug, Clone)]
pub struct Certificate {
    /// `‖-Δ_h u₂ - λ f(u₂)‖∞`.
    pub residual: f64,
    pub lambda1_lin: f64,
    /// `min(u₂ - u̲)`.
    pub min_gap: f64,
    /// `‖u₂ - u̲‖∞`.
    pub gap: f64,
    pub ordering_ok: bool,
}

#[derive(Debug, Clone)]
pub struct SecondSolution {
    pub u2: Field,
    pub minimal: Field,
    pub certificate: Certificate,
    /// Mountain-pass result for the translated unknown `v = u₂ - u̲`.
    pub minimax: MinimaxResult,
    pub endpoint_scale: f64,
}

const ORDERING_SLACK: f64 = 1e-10;

/// Second solution above `minimal`: a mountain pass for `v = u - u̲` on the
/// translated energy, which has `v = 0` as a strict local minimum.
pub fn second_solution_from(
    problem: &ProblemSpec,
    lambda: f64,
    minimal: &Field,
    opts: &MountainPassOptions,
) -> Result<SecondSolution> {
    let grid = problem.grid();
    grid.check(minimal)?;
    let src = problem.source(lambda);
    let base = minimal.values();
    let shifted = TranslatedSource { inner: &src, base };
    let scale = max_abs(base);
    let (endpoint, t) = scan_endpoint(grid, &shifted, if scale > 0.0 { scale } else { 1.0 })?;
    let mp = run_mountain_pass(grid, &shifted, &endpoint, opts, lambda)?;
    let v = mp.u.values();
    let min_gap = v.iter().copied().fold(f64::INFINITY, f64::min);
    if min_gap < -ORDERING_SLACK {
        return Err(Error::OrderingFailed { violation: -min_gap });
    }
    let u2: Vec<f64> = base.iter().zip(v).map(|(a, b)| a + b).collect();
    let res = max_abs(&residual(grid, &src, &u2));
    let st = classify_with(grid, &src, &u2)?;
    Ok(SecondSolution {
        certificate: Certificate {
            residual: res,
            lambda1_lin: st.lambda1_lin,
            min_gap,
            gap: max_abs(v),
            ordering_ok: true,
        },
        u2: grid.wrap(u2),
        minimal: minimal.clone(),
        minimax: mp,
        endpoint_scale: t,
    })
}

/// [`second_solution_from`] with the minimal solution obtained by continuation.
pub fn second_solution(problem: &ProblemSpec, lambda: f64, opts: &MountainPassOptions) -> Result<SecondSolution> {
    let minimal = minimal_solution(problem, lambda, &BranchConfig::default())?;
    second_solution_from(problem, lambda, &minimal.u, opts)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EkelandOptions {
    pub max_iter: usize,
    /// Sufficient-decrease constant of the Armijo test.
    pub armijo: f64,
}

impl Default for EkelandOptions {
    fn default() -> Self {
        EkelandOptions {
            max_iter: 100_000,
            armijo: 1e-4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EkelandPoint {
    pub z: Field,
    pub energy: f64,
    pub start_energy: f64,
    pub grad_norm: f64,
    pub iterations: usize,
}

/// Preconditioned descent with Armijo backtracking until the energy-norm
/// gradient is at most `eps`.
pub fn ekeland_point(problem: &ProblemSpec, lambda: f64, eps: f64, start: &Field, opts: &EkelandOptions) -> Result<EkelandPoint> {
    let grid = problem.grid();
    grid.check(start)?;
    let src = problem.source(lambda);
    let f = Functional::new(grid, &src)?;
    let mut u = start.values().to_vec();
    let start_energy = f.energy(&u);
    let mut e = start_energy;
    let mut alpha = 1.0f64;
    for it in 0..=opts.max_iter {
        let (_, g, gn) = f.gradient(&u);
        if gn <= eps {
            return Ok(EkelandPoint {
                z: grid.wrap(u),
                energy: e,
                start_energy,
                grad_norm: gn,
                iterations: it,
            });
        }
        if it == opts.max_iter {
            return Err(Error::MaxIterExceeded {
                iterations: opts.max_iter,
                residual: gn,
            });
        }
        let mut a = (2.0 * alpha).min(1.0);
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<f64> = u.iter().zip(&g).map(|(x, d)| x - a * d).collect();
            let et = f.energy(&trial);
            if et <= e - opts.armijo * a * gn * gn {
                u = trial;
                e = et;
                alpha = a;
                accepted = true;
                break;
            }
            a *= 0.5;
        }
        if !accepted {
            return Err(Error::NoConvergence {
                iterations: it + 1,
                residual: gn,
            });
        }
    }
    unreachable!("loop returns on its last iteration")
}
