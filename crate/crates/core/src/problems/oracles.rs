//! Reference solutions for one-dimensional problems, independent of the
//! discrete solvers: the closed-form Bratu branch and a shooting method.

use crate::grid::{Field, Grid, Point};

use super::Nonlinearity;

/// Closed-form branch of `-u'' = λ e^u` on (0, 1), parametrized by `θ > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BratuOracle {
    /// Parameter at the fold.
    pub theta_star: f64,
    /// `max_θ λ(θ)`.
    pub lambda_star: f64,
    /// `u*(1/2)` at the fold.
    pub u_star_mid: f64,
}

/// Locates the fold of the Bratu branch by bisection on the zero of `dλ/dθ`.
pub fn bratu_oracle() -> BratuOracle {
    // dλ/dθ = θ sech²(θ/4) (1 - (θ/4) tanh(θ/4)); the bracket holds the unique sign change.
    let g = |t: f64| 1.0 - 0.25 * t * (0.25 * t).tanh();
    let (mut lo, mut hi) = (1.0, 10.0);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let theta_star = 0.5 * (lo + hi);
    BratuOracle {
        theta_star,
        lambda_star: BratuOracle::lambda(theta_star),
        u_star_mid: BratuOracle::sup_norm(theta_star),
    }
}

impl BratuOracle {
    pub fn lambda(theta: f64) -> f64 {
        let c = (0.25 * theta).cosh();
        theta * theta / (2.0 * c * c)
    }

    pub fn dlambda(theta: f64) -> f64 {
        let q = 0.25 * theta;
        theta / q.cosh().powi(2) * (1.0 - q * q.tanh())
    }

    /// `u(1/2) = 2 ln cosh(θ/4)`, the maximum of the profile.
    pub fn sup_norm(theta: f64) -> f64 {
        2.0 * (0.25 * theta).cosh().ln()
    }

    pub fn profile(theta: f64, x: f64) -> f64 {
        -2.0 * ((0.5 * theta * (x - 0.5)).cosh() / (0.25 * theta).cosh()).ln()
    }

    /// `u'(0)`.
    pub fn slope(theta: f64) -> f64 {
        theta * (0.25 * theta).tanh()
    }

    /// Map `θ ↦ (λ, sup-norm)`.
    pub fn branch_map(theta: f64) -> (f64, f64) {
        (Self::lambda(theta), Self::sup_norm(theta))
    }

    /// All `θ` in (0, 100) with `λ(θ) = λ`, ascending.
    pub fn thetas(lambda: f64) -> Vec<f64> {
        let samples = 20_000;
        let hi = 100.0;
        let mut out = Vec::new();
        let mut prev = (1e-9, Self::lambda(1e-9) - lambda);
        for k in 1..=samples {
            let t = hi * k as f64 / samples as f64;
            let v = Self::lambda(t) - lambda;
            if v == 0.0 {
                out.push(t);
            } else if prev.1 != 0.0 && (prev.1 < 0.0) != (v < 0.0) {
                let (mut a, mut b) = (prev.0, t);
                let fa = prev.1;
                while b - a > 1e-13 * b.max(1.0) {
                    let m = 0.5 * (a + b);
                    if (Self::lambda(m) - lambda < 0.0) == (fa < 0.0) {
                        a = m;
                    } else {
                        b = m;
                    }
                }
                out.push(0.5 * (a + b));
            }
            prev = (t, v);
        }
        out
    }

    /// Nodal samples of the profile.
    pub fn sample(grid: &Grid, theta: f64) -> Field {
        grid.sample(|p| Self::profile(theta, p.x))
    }
}

/// Settings of the shooting scan for `-u'' = λ f(x, u)` on `(0, length)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShootingConfig {
    pub length: f64,
    /// RK4 steps across the interval; the step must not exceed 1e-4.
    pub steps: usize,
    /// Smallest and largest initial slope scanned.
    pub s_min: f64,
    pub s_max: f64,
    /// Geometric scan points over `[s_min, s_max]`.
    pub samples: usize,
    /// Also scan negative slopes.
    pub negative: bool,
    /// Bisection width on the slope.
    pub bisect_tol: f64,
}

impl Default for ShootingConfig {
    fn default() -> Self {
        ShootingConfig {
            length: 1.0,
            steps: 10_000,
            s_min: 1e-4,
            s_max: 100.0,
            samples: 1000,
            negative: false,
            bisect_tol: 1e-12,
        }
    }
}

/// A root of the shooting map with its trajectory.
#[derive(Debug, Clone)]
pub struct ShootingRoot {
    pub slope: f64,
    pub sup_norm: f64,
    /// `|u(length)|`
    pub residual: f64,
    step: f64,
    u: Vec<f64>,
    du: Vec<f64>,
}

impl ShootingRoot {
    /// Cubic Hermite interpolation of the trajectory.
    pub fn value_at(&self, x: f64) -> f64 {
        let last = self.u.len() - 1;
        let s = (x / self.step).clamp(0.0, last as f64);
        let k = (s.floor() as usize).min(last - 1);
        let t = s - k as f64;
        let (h00, h10, h01, h11) = (
            (1.0 + 2.0 * t) * (1.0 - t) * (1.0 - t),
            t * (1.0 - t) * (1.0 - t),
            t * t * (3.0 - 2.0 * t),
            t * t * (t - 1.0),
        );
        h00 * self.u[k] + h10 * self.step * self.du[k] + h01 * self.u[k + 1] + h11 * self.step * self.du[k + 1]
    }

    /// Samples at the nodes of a one-dimensional grid whose left end is 0.
    pub fn sample(&self, grid: &Grid) -> Field {
        grid.sample(|p| self.value_at(p.x))
    }
}

const BLOW_UP: f64 = 1e8;

struct Trajectory {
    end: f64,
    u: Vec<f64>,
    du: Vec<f64>,
}

fn integrate(nl: &Nonlinearity, lambda: f64, cfg: &ShootingConfig, s: f64, keep: bool) -> Trajectory {
    let h = cfg.length / cfg.steps as f64;
    let rhs = |x: f64, u: f64| -lambda * nl.f(Point { x, y: 0.0 }, u);
    let (mut u, mut v) = (0.0f64, s);
    let mut us = Vec::new();
    let mut dus = Vec::new();
    if keep {
        us.reserve(cfg.steps + 1);
        dus.reserve(cfg.steps + 1);
        us.push(u);
        dus.push(v);
    }
    for k in 0..cfg.steps {
        let x = k as f64 * h;
        let k1u = v;
        let k1v = rhs(x, u);
        let k2u = v + 0.5 * h * k1v;
        let k2v = rhs(x + 0.5 * h, u + 0.5 * h * k1u);
        let k3u = v + 0.5 * h * k2v;
        let k3v = rhs(x + 0.5 * h, u + 0.5 * h * k2u);
        let k4u = v + h * k3v;
        let k4v = rhs(x + h, u + h * k3u);
        u += h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
        v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        if !u.is_finite() || u.abs() > BLOW_UP {
            // Only the sign of the end value matters after blow-up.
            let end = if u.is_nan() { f64::NAN } else { u.signum() * BLOW_UP };
            return Trajectory { end, u: us, du: dus };
        }
        if keep {
            us.push(u);
            dus.push(v);
        }
    }
    Trajectory { end: u, u: us, du: dus }
}

fn root_from(nl: &Nonlinearity, lambda: f64, cfg: &ShootingConfig, s: f64) -> ShootingRoot {
    let t = integrate(nl, lambda, cfg, s, true);
    let sup_norm = t.u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    ShootingRoot {
        slope: s,
        sup_norm,
        residual: t.end.abs(),
        step: cfg.length / cfg.steps as f64,
        u: t.u,
        du: t.du,
    }
}

/// All isolated roots `s` of `u(length; s) = 0` for `u'' = -λ f(x, u)`,
/// `u(0) = 0`, `u'(0) = s`, ordered by slope. The zero root is included
/// whenever `f(·, 0) ≡ 0`.
pub fn shooting_oracle(nl: &Nonlinearity, lambda: f64, cfg: &ShootingConfig) -> Vec<ShootingRoot> {
    assert!(cfg.length / cfg.steps as f64 <= 1e-4 * (1.0 + 1e-12), "shooting step exceeds 1e-4");
    let end = |s: f64| integrate(nl, lambda, cfg, s, false).end;
    let ratio = (cfg.s_max / cfg.s_min).powf(1.0 / (cfg.samples - 1) as f64);
    let positive: Vec<f64> = (0..cfg.samples).map(|k| cfg.s_min * ratio.powi(k as i32)).collect();
    let mut slopes: Vec<f64> = Vec::new();
    if cfg.negative {
        slopes.extend(positive.iter().rev().map(|s| -s));
    }
    slopes.extend(&positive);

    let certify = 1e-6;
    let mut roots = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for &s in &slopes {
        let v = end(s);
        if v.is_nan() {
            prev = None;
            continue;
        }
        if v == 0.0 {
            roots.push(s);
        } else if let Some((s0, v0)) = prev {
            if v0 != 0.0 && (v0 < 0.0) != (v < 0.0) {
                let (mut a, mut b, fa) = (s0, s, v0);
                while (b - a).abs() > cfg.bisect_tol * a.abs().max(b.abs()).max(1.0) {
                    let m = 0.5 * (a + b);
                    let fm = end(m);
                    if fm == 0.0 {
                        a = m;
                        b = m;
                        break;
                    }
                    if (fm < 0.0) == (fa < 0.0) {
                        a = m;
                    } else {
                        b = m;
                    }
                }
                roots.push(0.5 * (a + b));
            }
        }
        prev = Some((s, v));
    }

    let mut out: Vec<ShootingRoot> = roots
        .into_iter()
        .map(|s| root_from(nl, lambda, cfg, s))
        .filter(|r| r.residual <= certify * (1.0 + r.sup_norm))
        .collect();
    if nl.f(Point { x: 0.5, y: 0.0 }, 0.0) == 0.0 && (0..=16).all(|k| nl.f(Point { x: k as f64 / 16.0 * cfg.length, y: 0.0 }, 0.0) == 0.0) {
        out.push(root_from(nl, lambda, cfg, 0.0));
    }
    out.sort_by(|a, b| a.slope.total_cmp(&b.slope));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{catalog, Params};

    fn params(kv: &[(&str, f64)]) -> Params {
        kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn fold_location() {
        let o = bratu_oracle();
        assert!((o.lambda_star - 3.513830719).abs() < 1e-8, "{}", o.lambda_star);
        assert!(BratuOracle::dlambda(o.theta_star).abs() <= 1e-9);
        assert!((o.u_star_mid - BratuOracle::profile(o.theta_star, 0.5)).abs() < 1e-14);
    }

    #[test]
    fn trivial_end_of_branch() {
        let (l, s) = BratuOracle::branch_map(1e-8);
        assert!(l < 1e-15 && s < 1e-15);
    }

    #[test]
    fn two_thetas_below_the_fold() {
        let t = BratuOracle::thetas(1.0);
        assert_eq!(t.len(), 2);
        assert!(t.iter().all(|&x| x < 20.0));
        for x in t {
            assert!((BratuOracle::lambda(x) - 1.0).abs() < 1e-12);
        }
        assert!(BratuOracle::thetas(3.6).is_empty());
    }

    #[test]
    fn profile_solves_the_ode() {
        let theta = 3.0;
        let lambda = BratuOracle::lambda(theta);
        let d = 1e-4;
        for &x in &[0.1, 0.3, 0.5, 0.8] {
            let u = |y| BratuOracle::profile(theta, y);
            let upp = (u(x + d) - 2.0 * u(x) + u(x - d)) / (d * d);
            assert!((-upp - lambda * u(x).exp()).abs() < 1e-5);
        }
        assert!(BratuOracle::profile(theta, 0.0).abs() < 1e-14);
        let d = 1e-6;
        let slope = (BratuOracle::profile(theta, d) - BratuOracle::profile(theta, -d)) / (2.0 * d);
        assert!((slope - BratuOracle::slope(theta)).abs() < 1e-6);
    }

    #[test]
    fn shooting_matches_bratu_counts_and_values() {
        let nl = catalog("gelfand", &Params::new()).unwrap();
        let cfg = ShootingConfig::default();
        for &(lambda, count) in &[(1.0, 2), (2.0, 2), (3.0, 2), (3.6, 0)] {
            let roots = shooting_oracle(&nl, lambda, &cfg);
            assert_eq!(roots.len(), count, "lambda = {lambda}");
            let thetas = BratuOracle::thetas(lambda);
            for (r, t) in roots.iter().zip(&thetas) {
                assert!((r.sup_norm - BratuOracle::sup_norm(*t)).abs() < 1e-8);
                assert!((r.slope - BratuOracle::slope(*t)).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn shooting_power_has_one_positive_root() {
        let nl = catalog("power", &params(&[("p", 3.0)])).unwrap();
        let roots = shooting_oracle(&nl, 1.0, &ShootingConfig::default());
        let positive: Vec<_> = roots.iter().filter(|r| r.slope > 0.0).collect();
        assert_eq!(positive.len(), 1);
        assert!(positive[0].sup_norm > 1.0);
        // Symmetric about the midpoint.
        let r = positive[0];
        assert!((r.value_at(0.3) - r.value_at(0.7)).abs() < 1e-8);
    }

    #[test]
    fn shooting_cubic_at_first_eigenvalue_has_only_zero() {
        let pi2 = std::f64::consts::PI.powi(2);
        let nl = catalog("logistic", &params(&[("c", pi2), ("p", 3.0)])).unwrap();
        let roots = shooting_oracle(&nl, 1.0, &ShootingConfig::default());
        assert_eq!(roots.len(), 1);
        assert_eq!(roots[0].slope, 0.0);
        assert_eq!(roots[0].sup_norm, 0.0);
    }

    #[test]
    fn shooting_matches_affine_closed_form() {
        let (a, b) = (1.0, 1.0);
        let nl = catalog("affine", &params(&[("a", a), ("b", b)])).unwrap();
        let pi2 = std::f64::consts::PI.powi(2);
        for &lambda in &[0.25 * pi2, 0.5 * pi2, 0.9 * pi2] {
            let k = (lambda * a).sqrt();
            let exact = |x: f64| b / a * ((k * (x - 0.5)).cos() / (0.5 * k).cos() - 1.0);
            let roots = shooting_oracle(&nl, lambda, &ShootingConfig::default());
            assert_eq!(roots.len(), 1);
            for &x in &[0.1, 0.25, 0.5, 0.9] {
                assert!((roots[0].value_at(x) - exact(x)).abs() < 1e-8, "lambda {lambda} x {x}");
            }
        }
    }
}
