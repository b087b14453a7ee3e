//! The shifted discrete Laplacian `-Δ_h + diag(c)` with its solvers.
//!
//! Second-order centered differences on the interior nodes of a [`Grid`]:
//! a 3-point stencil in 1-D and a 5-point stencil in 2-D. The operator is
//! symmetric, and for `c >= 0` it is an M-matrix.

use crate::error::{Error, Result};
use crate::grid::{dot, max_abs, Dim, Field, Grid};

/// Residual tolerance for eigenpairs.
pub const EIGEN_TOL: f64 = 1e-10;
/// Relative tolerance of the 2-D conjugate-gradient solve.
pub const CG_TOL: f64 = 1e-10;
/// Smallest eigenvalue required before solving with a partly negative shift.
pub const COERCIVITY_FLOOR: f64 = 1e-12;

/// `out = -Δ_h u` with zero Dirichlet data.
pub(crate) fn laplacian_apply(grid: &Grid, u: &[f64], out: &mut [f64]) {
    let nx = grid.nx();
    let ix2 = 1.0 / (grid.hx() * grid.hx());
    match grid.dim() {
        Dim::One => {
            for i in 0..nx {
                let left = if i > 0 { u[i - 1] } else { 0.0 };
                let right = if i + 1 < nx { u[i + 1] } else { 0.0 };
                out[i] = (2.0 * u[i] - left - right) * ix2;
            }
        }
        Dim::Two => {
            let ny = grid.ny();
            let iy2 = 1.0 / (grid.hy() * grid.hy());
            for j in 0..ny {
                for i in 0..nx {
                    let k = i + nx * j;
                    let w = if i > 0 { u[k - 1] } else { 0.0 };
                    let e = if i + 1 < nx { u[k + 1] } else { 0.0 };
                    let s = if j > 0 { u[k - nx] } else { 0.0 };
                    let n = if j + 1 < ny { u[k + nx] } else { 0.0 };
                    out[k] = (2.0 * u[k] - w - e) * ix2 + (2.0 * u[k] - s - n) * iy2;
                }
            }
        }
    }
}

/// `-Δ_h + diag(shift)` on one grid.
#[derive(Debug, Clone)]
pub struct ShiftedLaplacian {
    grid: Grid,
    shift: Vec<f64>,
}

/// Assembles `-Δ_h + diag(c)`.
pub fn assemble(grid: &Grid, c: &Field) -> Result<ShiftedLaplacian> {
    grid.check(c)?;
    Ok(ShiftedLaplacian {
        grid: grid.clone(),
        shift: c.values().to_vec(),
    })
}

impl ShiftedLaplacian {
    /// The unshifted `-Δ_h`.
    pub fn laplacian(grid: &Grid) -> Self {
        ShiftedLaplacian {
            grid: grid.clone(),
            shift: vec![0.0; grid.len()],
        }
    }

    pub(crate) fn with_shift(grid: &Grid, shift: Vec<f64>) -> Self {
        debug_assert_eq!(shift.len(), grid.len());
        ShiftedLaplacian {
            grid: grid.clone(),
            shift,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn shift(&self) -> &[f64] {
        &self.shift
    }

    pub fn apply(&self, u: &Field) -> Result<Field> {
        self.grid.check(u)?;
        let mut out = vec![0.0; self.grid.len()];
        self.apply_slice(u.values(), &mut out);
        Ok(self.grid.wrap(out))
    }

    pub(crate) fn apply_slice(&self, u: &[f64], out: &mut [f64]) {
        laplacian_apply(&self.grid, u, out);
        for ((o, c), v) in out.iter_mut().zip(&self.shift).zip(u) {
            *o += c * v;
        }
    }

    fn diagonal(&self, i: usize) -> f64 {
        let base = match self.grid.dim() {
            Dim::One => 2.0 / (self.grid.hx() * self.grid.hx()),
            Dim::Two => {
                2.0 / (self.grid.hx() * self.grid.hx()) + 2.0 / (self.grid.hy() * self.grid.hy())
            }
        };
        base + self.shift[i]
    }

    /// Bandwidth of the stencil in the node numbering.
    fn bandwidth(&self) -> usize {
        match self.grid.dim() {
            Dim::One => 1,
            Dim::Two => self.grid.nx(),
        }
    }

    fn entry(&self, r: usize, c: usize) -> f64 {
        if r == c {
            return self.diagonal(r);
        }
        let nx = self.grid.nx();
        let (lo, hi) = if r < c { (r, c) } else { (c, r) };
        if hi - lo == 1 && hi % nx != 0 {
            -1.0 / (self.grid.hx() * self.grid.hx())
        } else if self.grid.dim() == Dim::Two && hi - lo == nx {
            -1.0 / (self.grid.hy() * self.grid.hy())
        } else {
            0.0
        }
    }

    /// Off-diagonal absolute row sum of row `i`.
    fn radius(&self, i: usize) -> f64 {
        let nx = self.grid.nx();
        let ix2 = 1.0 / (self.grid.hx() * self.grid.hx());
        let ix = i % nx;
        let mut r = 0.0;
        if ix > 0 {
            r += ix2;
        }
        if ix + 1 < nx {
            r += ix2;
        }
        if self.grid.dim() == Dim::Two {
            let iy2 = 1.0 / (self.grid.hy() * self.grid.hy());
            let iy = i / nx;
            if iy > 0 {
                r += iy2;
            }
            if iy + 1 < self.grid.ny() {
                r += iy2;
            }
        }
        r
    }

    /// Gershgorin lower bound on the spectrum.
    pub fn gershgorin_lower(&self) -> f64 {
        (0..self.grid.len())
            .map(|i| self.diagonal(i) - self.radius(i))
            .fold(f64::INFINITY, f64::min)
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.grid.len())
            .map(|i| self.diagonal(i).abs() + self.radius(i))
            .fold(0.0, f64::max)
    }

    /// LU factorization of `self - sigma I` with partial pivoting.
    ///
    /// Works for indefinite operators; fails only on a numerically zero pivot.
    pub fn factorize_shifted(&self, sigma: f64) -> Result<BandedLu> {
        BandedLu::factor(self.grid.len(), self.bandwidth(), |r, c| {
            let v = self.entry(r, c);
            if r == c {
                v - sigma
            } else {
                v
            }
        })
    }

    pub fn factorize(&self) -> Result<BandedLu> {
        self.factorize_shifted(0.0)
    }
}

/// Banded LU with partial pivoting, equal lower and upper bandwidth `b`.
///
/// Rows are stored as windows covering columns `[r - b, r + 2b]`, which
/// holds the fill produced by row interchanges.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    b: usize,
    w: usize,
    data: Vec<f64>,
    lower: Vec<f64>,
    piv: Vec<usize>,
}

impl BandedLu {
    fn idx(&self, r: usize, c: usize) -> usize {
        r * self.w + (c + self.b - r)
    }

    fn factor(n: usize, b: usize, entry: impl Fn(usize, usize) -> f64) -> Result<BandedLu> {
        let w = 3 * b + 1;
        let mut lu = BandedLu {
            n,
            b,
            w,
            data: vec![0.0; n * w],
            lower: vec![0.0; n * b],
            piv: vec![0; n],
        };
        let mut anorm = 0.0f64;
        for r in 0..n {
            let mut row = 0.0;
            for c in r.saturating_sub(b)..=(r + b).min(n - 1) {
                let v = entry(r, c);
                row += v.abs();
                let k = lu.idx(r, c);
                lu.data[k] = v;
            }
            anorm = anorm.max(row);
        }
        let tiny = f64::EPSILON * anorm.max(f64::MIN_POSITIVE);
        for k in 0..n {
            let last = (k + b).min(n - 1);
            let right = (k + 2 * b).min(n - 1);
            let mut p = k;
            let mut best = lu.data[lu.idx(k, k)].abs();
            for r in k + 1..=last {
                let v = lu.data[lu.idx(r, k)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if !(best > tiny) {
                return Err(Error::SingularOperator {
                    row: k,
                    pivot: best,
                });
            }
            lu.piv[k] = p;
            if p != k {
                for c in k..=right {
                    let (i, j) = (lu.idx(k, c), lu.idx(p, c));
                    lu.data.swap(i, j);
                }
            }
            let pivot = lu.data[lu.idx(k, k)];
            for r in k + 1..=last {
                let ir = lu.idx(r, k);
                let m = lu.data[ir] / pivot;
                lu.data[ir] = 0.0;
                lu.lower[k * b + (r - k - 1)] = m;
                if m != 0.0 {
                    for c in k + 1..=right {
                        let akc = lu.data[lu.idx(k, c)];
                        let irc = lu.idx(r, c);
                        lu.data[irc] -= m * akc;
                    }
                }
            }
        }
        Ok(lu)
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let (n, b) = (self.n, self.b);
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                x.swap(k, p);
            }
            let xk = x[k];
            if xk != 0.0 {
                for r in k + 1..=(k + b).min(n - 1) {
                    x[r] -= self.lower[k * b + (r - k - 1)] * xk;
                }
            }
        }
        for k in (0..n).rev() {
            let mut s = x[k];
            for c in k + 1..=(k + 2 * b).min(n - 1) {
                s -= self.data[self.idx(k, c)] * x[c];
            }
            x[k] = s / self.data[self.idx(k, k)];
        }
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// Solves `A u = rhs` for a coercive `A`.
///
/// A shift with negative entries is accepted only after an eigensolve shows
/// the smallest eigenvalue exceeds [`COERCIVITY_FLOOR`]. 1-D systems use
/// exact elimination; 2-D systems use Jacobi-preconditioned conjugate
/// gradients.
pub fn solve(a: &ShiftedLaplacian, rhs: &Field) -> Result<Field> {
    a.grid.check(rhs)?;
    if a.shift.iter().any(|&c| c < 0.0) {
        let smallest = smallest_eigenpair(a)?.value;
        if !(smallest > COERCIVITY_FLOOR) {
            return Err(Error::NotCoercive { smallest });
        }
    }
    let x = match a.grid.dim() {
        Dim::One => a.factorize()?.solve(rhs.values()),
        Dim::Two => conjugate_gradient(a, rhs.values(), CG_TOL, 20 * a.grid.len() + 100)?,
    };
    Ok(a.grid.wrap(x))
}

fn conjugate_gradient(a: &ShiftedLaplacian, b: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let n = b.len();
    let bnorm = dot(b, b).sqrt();
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(x);
    }
    let dinv: Vec<f64> = (0..n).map(|i| 1.0 / a.diagonal(i)).collect();
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&dinv).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    for it in 0..max_iter {
        a.apply_slice(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::NotCoercive { smallest: pap });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rnorm = dot(&r, &r).sqrt();
        if rnorm <= tol * bnorm {
            log::debug!("cg converged in {} iterations", it + 1);
            return Ok(x);
        }
        for i in 0..n {
            z[i] = r[i] * dinv[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual: dot(&r, &r).sqrt() / bnorm,
    })
}

/// Smallest eigenvalue with its eigenvector.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: f64,
    /// Unit discrete L² norm; its first largest-magnitude entry is positive.
    pub vector: Field,
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct EigenOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            tol: EIGEN_TOL,
            max_iter: 20_000,
        }
    }
}

pub fn smallest_eigenpair(a: &ShiftedLaplacian) -> Result<EigenPair> {
    smallest_eigenpair_with(a, EigenOptions::default())
}

/// Shifted inverse power iteration from a Gershgorin lower bound.
///
/// The residual target is `max(tol, 16 ε ‖A‖∞ ‖v‖∞)`: below that floor the
/// residual of a computed product `A v` is dominated by rounding.
pub fn smallest_eigenpair_with(a: &ShiftedLaplacian, opts: EigenOptions) -> Result<EigenPair> {
    let n = a.grid.len();
    let meas = a.grid.cell_measure();
    let lower = a.gershgorin_lower();
    let sigma = lower - 1.0f64.max(1e-6 * lower.abs());
    let lu = a.factorize_shifted(sigma)?;
    let anorm = a.norm_inf();

    let normalize = |v: &mut [f64]| {
        let s = (meas * dot(v, v)).sqrt();
        for x in v.iter_mut() {
            *x /= s;
        }
    };
    let mut v = vec![1.0; n];
    normalize(&mut v);
    let mut av = vec![0.0; n];
    let mut mu_prev = f64::NAN;
    let mut residual = f64::INFINITY;
    for it in 1..=opts.max_iter {
        lu.solve_in_place(&mut v);
        normalize(&mut v);
        a.apply_slice(&v, &mut av);
        let mu = meas * dot(&v, &av);
        residual = av
            .iter()
            .zip(&v)
            .fold(0.0f64, |m, (x, y)| m.max((x - mu * y).abs()));
        let floor = 16.0 * f64::EPSILON * anorm * max_abs(&v);
        let settled = (mu - mu_prev).abs() <= opts.tol * (1.0 + mu.abs());
        if settled && residual <= opts.tol.max(floor) {
            let pos = v
                .iter()
                .enumerate()
                .fold((0, 0.0f64), |(bi, bv), (i, x)| {
                    if x.abs() > bv {
                        (i, x.abs())
                    } else {
                        (bi, bv)
                    }
                })
                .0;
            if v[pos] < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            return Ok(EigenPair {
                value: mu,
                vector: a.grid.wrap(v),
                residual,
                iterations: it,
            });
        }
        mu_prev = mu;
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        residual,
    })
}

/// Smallest eigenvalue of the unshifted `-Δ_h`.
pub fn dirichlet_lambda1(grid: &Grid) -> Result<f64> {
    Ok(smallest_eigenpair(&ShiftedLaplacian::laplacian(grid))?.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn closed_form_1d(n: usize) -> f64 {
        let h = 1.0 / (n as f64 + 1.0);
        4.0 / (h * h) * (PI * h / 2.0).sin().powi(2)
    }

    #[test]
    fn three_node_eigenvector_is_mapped_to_a_multiple() {
        // For n = 3 the first eigenvector of tridiag(-1, 2, -1) is (1, √2, 1),
        // eigenvalue (2 - √2)/h².
        let g = Grid::unit_interval(3).unwrap();
        let a = ShiftedLaplacian::laplacian(&g);
        let s = 2.0f64.sqrt();
        let v = g.field(vec![1.0, s, 1.0]).unwrap();
        let av = a.apply(&v).unwrap();
        let expected = (2.0 - s) / (g.hx() * g.hx());
        for (x, y) in av.values().iter().zip(v.values()) {
            assert!((x - expected * y).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_maps_to_zero_and_unit_shift_adds_identity() {
        let g = Grid::unit_interval(6).unwrap();
        let a0 = assemble(&g, &g.zeros()).unwrap();
        assert!(a0.apply(&g.zeros()).unwrap().values().iter().all(|&x| x == 0.0));
        let a1 = assemble(&g, &g.constant(1.0)).unwrap();
        let u = g.sample(|p| p.x * p.x - 0.3);
        let d = a1.apply(&u).unwrap().combine(1.0, &a0.apply(&u).unwrap(), -1.0).unwrap();
        for (x, y) in d.values().iter().zip(u.values()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn assemble_rejects_foreign_shift() {
        let g = Grid::unit_interval(6).unwrap();
        let h = Grid::unit_interval(6).unwrap();
        assert!(matches!(assemble(&g, &h.zeros()), Err(Error::BindingMismatch)));
    }

    #[test]
    fn solve_homogeneous_and_parabola() {
        let g = Grid::unit_interval(99).unwrap();
        let a = ShiftedLaplacian::laplacian(&g);
        let u = solve(&a, &g.zeros()).unwrap();
        assert!(u.values().iter().all(|&x| x == 0.0));
        let u = solve(&a, &g.constant(1.0)).unwrap();
        // node 49 sits at x = 0.5
        assert!((g.point(49).x - 0.5).abs() < 1e-15);
        assert!((u.values()[49] - 0.125).abs() < 2e-5);
        for (i, v) in u.values().iter().enumerate() {
            let x = g.point(i).x;
            assert!((v - x * (1.0 - x) / 2.0).abs() < 1e-10);
        }
    }

    /// Dense Gauss-Jordan inverse used as an independent oracle.
    fn dense_inverse(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = m.len();
        let mut a: Vec<Vec<f64>> = m
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let mut r = row.clone();
                r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
                r
            })
            .collect();
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
            a.swap(k, p);
            let piv = a[k][k];
            for x in a[k].iter_mut() {
                *x /= piv;
            }
            for i in 0..n {
                if i != k {
                    let f = a[i][k];
                    let rowk = a[k].clone();
                    for (x, y) in a[i].iter_mut().zip(rowk) {
                        *x -= f * y;
                    }
                }
            }
        }
        a.into_iter().map(|r| r[n..].to_vec()).collect()
    }

    #[test]
    fn m_matrix_inverse_is_nonnegative() {
        for n in 3..=10 {
            let g = Grid::unit_interval(n).unwrap();
            let c: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin().abs() * 5.0).collect();
            let a = ShiftedLaplacian::with_shift(&g, c);
            let dense: Vec<Vec<f64>> =
                (0..n).map(|r| (0..n).map(|c| a.entry(r, c)).collect()).collect();
            let inv = dense_inverse(&dense);
            assert!(inv.iter().flatten().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn banded_lu_matches_dense_inverse_on_indefinite_2d() {
        let g = Grid::rectangle(4, 3, (0.0, 1.0), (0.0, 2.0)).unwrap();
        let n = g.len();
        let c: Vec<f64> = (0..n).map(|i| -40.0 + 7.0 * (i as f64).cos()).collect();
        let a = ShiftedLaplacian::with_shift(&g, c);
        let dense: Vec<Vec<f64>> = (0..n).map(|r| (0..n).map(|c| a.entry(r, c)).collect()).collect();
        let inv = dense_inverse(&dense);
        let rhs: Vec<f64> = (0..n).map(|i| 1.0 + i as f64).collect();
        let x = a.factorize().unwrap().solve(&rhs);
        for r in 0..n {
            let expect: f64 = (0..n).map(|c| inv[r][c] * rhs[c]).sum();
            assert!((x[r] - expect).abs() < 1e-9 * (1.0 + expect.abs()));
        }
    }

    #[test]
    fn singular_shift_is_reported() {
        // tridiag(-1,2,-1)/h² - λ1 I is singular for n = 3.
        let g = Grid::unit_interval(3).unwrap();
        let a = ShiftedLaplacian::laplacian(&g);
        let lambda = (2.0 - 2.0f64.sqrt()) / (g.hx() * g.hx());
        let b = ShiftedLaplacian::with_shift(&g, vec![-lambda; 3]);
        assert!(matches!(solve(&b, &g.constant(1.0)), Err(Error::NotCoercive { .. })));
        assert!(a.factorize().is_ok());
    }

    #[test]
    fn solve_2d_cg() {
        let g = Grid::unit_square(15).unwrap();
        let a = assemble(&g, &g.constant(0.5)).unwrap();
        let rhs = g.sample(|p| (p.x * 3.0).sin() + p.y);
        let u = solve(&a, &rhs).unwrap();
        let r = a.apply(&u).unwrap().combine(1.0, &rhs, -1.0).unwrap();
        assert!(max_abs(r.values()) <= 1e-8 * (1.0 + max_abs(rhs.values())));
    }

    #[test]
    fn eigen_closed_form_and_shifts() {
        let g = Grid::unit_interval(99).unwrap();
        let a = ShiftedLaplacian::laplacian(&g);
        let e = smallest_eigenpair(&a).unwrap();
        assert!((e.value - closed_form_1d(99)).abs() < 1e-10);
        assert!(e.vector.values().iter().all(|&x| x > 0.0));

        let b = assemble(&g, &g.constant(5.0)).unwrap();
        let eb = smallest_eigenpair(&b).unwrap();
        assert!((eb.value - e.value - 5.0).abs() < 1e-9);
        let diff = eb.vector.combine(1.0, &e.vector, -1.0).unwrap();
        assert!(max_abs(diff.values()) < 1e-8);

        let c = assemble(&g, &g.constant(-e.value)).unwrap();
        let ec = smallest_eigenpair(&c).unwrap();
        assert!(ec.value.abs() < 1e-10, "{}", ec.value);
    }

    #[test]
    fn eigen_2d_unit_square() {
        let n = 20;
        let g = Grid::unit_square(n).unwrap();
        let e = smallest_eigenpair(&ShiftedLaplacian::laplacian(&g)).unwrap();
        assert!((e.value - 2.0 * closed_form_1d(n)).abs() < 1e-9);
    }

    #[test]
    fn eigen_of_indefinite_operator() {
        let g = Grid::unit_interval(50).unwrap();
        let c = g.sample(|p| -80.0 * (-(p.x - 0.3).powi(2) * 50.0).exp());
        let a = assemble(&g, &c).unwrap();
        let e = smallest_eigenpair(&a).unwrap();
        assert!(e.value < 0.0);
        assert!(e.vector.values().iter().all(|&x| x > 0.0));
        let r = a.apply(&e.vector).unwrap().combine(1.0, &e.vector, -e.value).unwrap();
        assert!(max_abs(r.values()) <= 1e-9);
    }

    #[test]
    fn lambda1_converges_at_second_order() {
        let runs: Vec<(f64, f64)> = [50usize, 100, 200]
            .iter()
            .map(|&n| {
                let g = Grid::unit_interval(n).unwrap();
                (g.hx(), (dirichlet_lambda1(&g).unwrap() - PI * PI).abs())
            })
            .collect();
        for w in runs.windows(2) {
            let order = (w[0].1 / w[1].1).ln() / (w[0].0 / w[1].0).ln();
            assert!((1.9..=2.1).contains(&order), "order {order}");
        }
        let g = Grid::unit_square(40).unwrap();
        assert!((dirichlet_lambda1(&g).unwrap() - 2.0 * PI * PI).abs() < 0.02);
    }

    proptest::proptest! {
        #[test]
        fn symmetric_quadratic_form(u in proptest::collection::vec(-1.0f64..1.0, 12),
                                    v in proptest::collection::vec(-1.0f64..1.0, 12),
                                    c in proptest::collection::vec(-3.0f64..3.0, 12)) {
            let g = Grid::rectangle(4, 3, (0.0, 1.0), (0.0, 1.0)).unwrap();
            let a = ShiftedLaplacian::with_shift(&g, c);
            let mut au = vec![0.0; 12];
            let mut av = vec![0.0; 12];
            a.apply_slice(&u, &mut au);
            a.apply_slice(&v, &mut av);
            let lhs = dot(&u, &av);
            let rhs = dot(&v, &au);
            let scale = dot(&u, &u).sqrt() * dot(&v, &v).sqrt() * a.norm_inf();
            proptest::prop_assert!((lhs - rhs).abs() <= 1e-12 * scale.max(1.0));
        }

        #[test]
        fn maximum_principle(rhs in proptest::collection::vec(0.0f64..10.0, 20),
                             c in proptest::collection::vec(0.0f64..50.0, 20)) {
            let g = Grid::unit_interval(20).unwrap();
            let a = ShiftedLaplacian::with_shift(&g, c);
            let u = solve(&a, &g.field(rhs).unwrap()).unwrap();
            proptest::prop_assert!(u.values().iter().all(|&x| x >= 0.0));
        }

        #[test]
        fn solve_inverts_apply(u in proptest::collection::vec(-5.0f64..5.0, 30),
                               c in proptest::collection::vec(0.0f64..20.0, 30)) {
            let g = Grid::unit_interval(30).unwrap();
            let a = ShiftedLaplacian::with_shift(&g, c);
            let f = g.field(u.clone()).unwrap();
            let back = solve(&a, &a.apply(&f).unwrap()).unwrap();
            for (x, y) in back.values().iter().zip(&u) {
                proptest::prop_assert!((x - y).abs() <= 1e-9);
            }
        }

        #[test]
        fn eigenvalue_monotone_in_shift(c1 in proptest::collection::vec(-20.0f64..20.0, 15),
                                        bump in proptest::collection::vec(0.0f64..10.0, 15)) {
            let g = Grid::unit_interval(15).unwrap();
            let c2: Vec<f64> = c1.iter().zip(&bump).map(|(a, b)| a + b).collect();
            let e1 = smallest_eigenpair(&ShiftedLaplacian::with_shift(&g, c1)).unwrap().value;
            let e2 = smallest_eigenpair(&ShiftedLaplacian::with_shift(&g, c2)).unwrap().value;
            proptest::prop_assert!(e1 <= e2 + 1e-9);
        }
    }
}
