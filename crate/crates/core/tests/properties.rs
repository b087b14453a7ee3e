use elliptic::barriers::{stability_classify, StabilityTag};
use elliptic::branch::{
    newton_solve, pseudo_arclength_continue, trace_minimal_branch, BranchConfig, BranchPoint, NewtonOptions, Termination,
};
use elliptic::grid::{norm_inf, Field, Grid};
use elliptic::linops::dirichlet_lambda1;
use elliptic::minimax::{dyadic_endpoint, mountain_pass, second_solution, MountainPassOptions};
use elliptic::problems::{catalog, Coupling, Params, ProblemSpec};
use proptest::prelude::*;

fn problem(n: usize, name: &str, kv: &[(&str, f64)]) -> ProblemSpec {
    let g = Grid::unit_interval(n).unwrap();
    let params: Params = kv.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    ProblemSpec::new(&g, catalog(name, &params).unwrap(), Coupling::Lambda(1.0))
}

fn neg_laplacian(u: &[f64], h: f64) -> Vec<f64> {
    let n = u.len();
    (0..n)
        .map(|i| {
            let l = if i > 0 { u[i - 1] } else { 0.0 };
            let r = if i + 1 < n { u[i + 1] } else { 0.0 };
            (2.0 * u[i] - l - r) / (h * h)
        })
        .collect()
}

/// `‖-u'' - λ f(u)‖∞`, evaluated without the library's operators.
fn residual(p: &ProblemSpec, lambda: f64, u: &Field) -> f64 {
    let g = p.grid();
    let nl = p.nonlinearity();
    let lap = neg_laplacian(u.values(), g.hx());
    lap.iter()
        .zip(u.values())
        .enumerate()
        .map(|(i, (d, &v))| (d - lambda * nl.f(g.point(i), v)).abs())
        .fold(0.0, f64::max)
}

fn dirichlet_energy(u: &Field, h: f64) -> f64 {
    h * u.values().iter().zip(neg_laplacian(u.values(), h)).map(|(a, b)| a * b).sum::<f64>()
}

#[test]
fn square_eigenvalue_converges_at_second_order() {
    let target = 2.0 * std::f64::consts::PI.powi(2);
    let errs: Vec<(f64, f64)> = [10usize, 20, 40]
        .iter()
        .map(|&n| {
            let g = Grid::unit_square(n).unwrap();
            let h = g.hx();
            let l1 = dirichlet_lambda1(&g).unwrap();
            let exact = 8.0 / (h * h) * (std::f64::consts::PI * h / 2.0).sin().powi(2);
            assert!((l1 - exact).abs() < 1e-8 * exact, "n={n}: {l1} vs {exact}");
            (h, (l1 - target).abs())
        })
        .collect();
    for w in errs.windows(2) {
        let order = (w[0].1 / w[1].1).ln() / (w[0].0 / w[1].0).ln();
        assert!((1.9..=2.1).contains(&order), "order {order}");
    }
}

#[test]
fn convex_branches_are_monotone_stable_and_below_the_bound() {
    for (name, kv) in [("gelfand", &[][..]), ("asym_neg", &[("a", 2.0), ("l", -0.5)][..]), ("affine", &[("a", 1.0), ("b", 1.0)][..])] {
        let p = problem(80, name, kv);
        let cfg = BranchConfig::default();
        let d = trace_minimal_branch(&p, &cfg).unwrap();
        let meta = p.nonlinearity().meta();
        assert!(meta.convex && meta.positive && meta.fprime0 > 0.0);
        for pt in d.minimal() {
            let tol = cfg.newton.tol * norm_inf(&pt.u).max(1.0);
            assert!(residual(&p, pt.lambda, &pt.u) <= tol, "{name} λ={}", pt.lambda);
            assert!(pt.lambda1_lin > 0.0, "{name}: unstable minimal point at λ={}", pt.lambda);
        }
        for w in d.minimal().windows(2) {
            assert!(w[0].u.max_excess_over(&w[1].u).unwrap() <= 1e-10, "{name}: not increasing in λ");
        }
        if let Some(fold) = &d.fold {
            assert!(fold.lambda_star <= d.lambda1 / meta.fprime0 + 1e-8, "{name}: λ* = {}", fold.lambda_star);
        }
    }
}

#[test]
fn fold_is_the_single_sign_change() {
    let p = problem(100, "gelfand", &[]);
    let cfg = BranchConfig {
        lambda_min: 0.5,
        ..BranchConfig::default()
    };
    let d = trace_minimal_branch(&p, &cfg).unwrap();
    let fold = d.fold.clone().unwrap();
    assert!(fold.lambda1_lin.abs() <= 1e-4 * d.lambda1, "{}", fold.lambda1_lin);
    let ext = pseudo_arclength_continue(&p, &d, &cfg).unwrap();
    for pt in &ext.points {
        let tol = cfg.newton.tol * norm_inf(&pt.u).max(1.0);
        assert!(residual(&p, pt.lambda, &pt.u) <= tol);
    }
    let signs: Vec<bool> = ext.points[1..].iter().map(|q| q.lambda1_lin > 0.0).collect();
    assert_eq!(signs.windows(2).filter(|w| w[0] != w[1]).count(), 1);
    let turn = signs.iter().position(|s| !s).unwrap();
    let near: Vec<&BranchPoint> = ext.points[turn..=turn + 1].iter().collect();
    assert!(near.iter().all(|q| (q.lambda - fold.lambda_star).abs() < 0.1));
}

#[test]
fn stable_solution_is_the_minimal_one() {
    let p = problem(80, "gelfand", &[]);
    let g = p.grid().clone();
    let d = trace_minimal_branch(&p, &BranchConfig::default()).unwrap();
    let opts = NewtonOptions::default();
    // Close to the fold the Jacobian is nearly singular and residual-based
    // agreement no longer pins the solution down to 1e-7.
    let lstar = d.fold.as_ref().unwrap().lambda_star;
    for pt in d.minimal().iter().step_by(4).skip(1).filter(|pt| pt.lambda < 0.95 * lstar) {
        let bump = g.sample(|q| 6.0 * (std::f64::consts::PI * q.x).sin());
        for start in [g.zeros(), pt.u.combine(1.0, &bump, 1.0).unwrap()] {
            let Ok(out) = newton_solve(&p, pt.lambda, &start, &opts) else { continue };
            let st = stability_classify(&p, &out.u, pt.lambda).unwrap();
            if st.tag == StabilityTag::Stable {
                let gap = out.u.combine(1.0, &pt.u, -1.0).unwrap();
                assert!(norm_inf(&gap) < 1e-7, "λ={}: stable solution differs by {}", pt.lambda, norm_inf(&gap));
            }
        }
    }
}

#[test]
fn dirichlet_energy_stays_bounded_up_to_the_fold() {
    let p = problem(100, "gelfand", &[]);
    let d = trace_minimal_branch(&p, &BranchConfig::default()).unwrap();
    assert_eq!(d.termination, Termination::Fold);
    let h = p.grid().hx();
    let e: Vec<f64> = d.minimal().iter().map(|pt| dirichlet_energy(&pt.u, h)).collect();
    assert!(e.windows(2).all(|w| w[1] >= w[0]));
    let star = dirichlet_energy(&d.fold.as_ref().unwrap().u_star, h);
    assert!(star.is_finite() && star >= *e.last().unwrap());
    assert!(star < 10.0, "energy at the fold {star}");
}

#[test]
fn second_solution_solves_the_original_problem() {
    let p = problem(80, "gelfand", &[]);
    for lambda in [1.0, 2.0, 3.0] {
        let s = second_solution(&p, lambda, &MountainPassOptions::default()).unwrap();
        let tol = NewtonOptions::default().tol * norm_inf(&s.u2).max(1.0);
        assert!(residual(&p, lambda, &s.u2) <= tol, "λ={lambda}");
        assert!(s.certificate.lambda1_lin < 0.0);
        assert!(s.minimal.values().iter().zip(s.u2.values()).all(|(a, b)| a <= b));
    }
}

/// `inf { ∫|v'|² : ‖v‖_{p+1} = 1 }` by preconditioned descent on the sphere.
fn constrained_minimum(g: &Grid, p: f64) -> f64 {
    let h = g.hx();
    let n = g.len();
    let norm = |v: &[f64]| (h * v.iter().map(|x| x.abs().powf(p + 1.0)).sum::<f64>()).powf(1.0 / (p + 1.0));
    let quotient = |v: &[f64]| h * v.iter().zip(neg_laplacian(v, h)).map(|(a, b)| a * b).sum::<f64>() / norm(v).powi(2);
    let mut v: Vec<f64> = (1..=n).map(|i| (std::f64::consts::PI * i as f64 * h).sin()).collect();
    let s = norm(&v);
    v.iter_mut().for_each(|x| *x /= s);
    let inv_lap = |r: &[f64]| {
        // Thomas sweep for the constant tridiagonal -D².
        let (a, b) = (2.0 / (h * h), -1.0 / (h * h));
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        c[0] = b / a;
        d[0] = r[0] / a;
        for i in 1..n {
            let m = a - b * c[i - 1];
            c[i] = b / m;
            d[i] = (r[i] - b * d[i - 1]) / m;
        }
        for i in (0..n - 1).rev() {
            d[i] -= c[i] * d[i + 1];
        }
        d
    };
    let mut q = quotient(&v);
    for _ in 0..5000 {
        let vp: Vec<f64> = v.iter().map(|x| x.abs().powf(p - 1.0) * x).collect();
        let w = inv_lap(&vp);
        let mut next: Vec<f64> = v.iter().zip(&w).map(|(a, b)| 0.5 * a + 0.5 * q * b).collect();
        let s = norm(&next);
        next.iter_mut().for_each(|x| *x /= s);
        let qn = quotient(&next);
        v = next;
        if (q - qn).abs() <= 1e-15 * q {
            q = qn;
            break;
        }
        q = qn;
    }
    q
}

#[test]
fn power_saddle_rescales_to_the_constrained_minimizer() {
    let pexp = 3.0;
    let p = problem(100, "power", &[("p", pexp)]);
    let e = dyadic_endpoint(&p, 1.0, 1.0).unwrap();
    let mp = mountain_pass(&p, 1.0, &e, &MountainPassOptions::default()).unwrap();
    let m = constrained_minimum(p.grid(), pexp);
    let h = p.grid().hx();
    let scaled: Vec<f64> = mp.u.values().iter().map(|x| x / m.powf(1.0 / (pexp - 1.0))).collect();
    let lp = (h * scaled.iter().map(|x| x.abs().powf(pexp + 1.0)).sum::<f64>()).powf(1.0 / (pexp + 1.0));
    assert!((lp - 1.0).abs() < 1e-3, "‖u/m^(1/(p-1))‖ = {lp}, m = {m}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn saddles_are_certified(pexp in 2.0f64..5.0, lambda in 0.5f64..4.0) {
        let p = problem(40, "power", &[("p", pexp)]);
        let e = dyadic_endpoint(&p, lambda, 1.0).unwrap();
        let mp = mountain_pass(&p, lambda, &e, &MountainPassOptions::default()).unwrap();
        let tol = NewtonOptions::default().tol * norm_inf(&mp.u).max(1.0);
        prop_assert!(residual(&p, lambda, &mp.u) <= tol);
        prop_assert!(stability_classify(&p, &mp.u, lambda).unwrap().lambda1_lin < 0.0);
        let nodes = mp.path.nodes();
        prop_assert!(nodes[0].values().iter().all(|&v| v == 0.0));
        prop_assert!(nodes[mp.path.m()].values() == e.values());
        prop_assert!(mp.max_energy_trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }
}
