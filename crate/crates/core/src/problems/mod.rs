//! Nonlinearities `f(x, u)` with derivative and antiderivative, the catalog
//! of named instances, and problem definitions `-Δu = λ f(x, u) + g`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid, Point};

pub mod oracles;

pub use oracles::{bratu_oracle, shooting_oracle, BratuOracle, ShootingConfig, ShootingRoot};

type Rule = Arc<dyn Fn(Point, f64) -> f64 + Send + Sync>;

/// Structural facts about a nonlinearity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Meta {
    /// `f` is convex in `u`.
    pub convex: bool,
    /// `f(u) > 0` for `u >= 0`.
    pub positive: bool,
    /// `f(0)`
    pub f0: f64,
    /// `f'(0)`
    pub fprime0: f64,
    /// `a = lim f(t)/t` as `t → ∞`, when the growth is asymptotically linear.
    pub slope_a: Option<f64>,
    /// `l = lim (f(t) - a t)`.
    pub offset_l: Option<f64>,
    /// `(μ, r)` with `t f'(t) >= μ f(t)` for all `t >= r`.
    pub ar: Option<(f64, f64)>,
}

/// A nonlinearity `f`, its `u`-derivative and its antiderivative `F(x, u) = ∫₀ᵘ f(x, t) dt`.
#[derive(Clone)]
pub struct Nonlinearity {
    name: String,
    f: Rule,
    fprime: Rule,
    antiderivative: Rule,
    meta: Meta,
}

impl fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Nonlinearity")
            .field("name", &self.name)
            .field("meta", &self.meta)
            .finish()
    }
}

impl Nonlinearity {
    pub fn new(
        name: impl Into<String>,
        f: impl Fn(Point, f64) -> f64 + Send + Sync + 'static,
        fprime: impl Fn(Point, f64) -> f64 + Send + Sync + 'static,
        antiderivative: impl Fn(Point, f64) -> f64 + Send + Sync + 'static,
        meta: Meta,
    ) -> Self {
        Nonlinearity {
            name: name.into(),
            f: Arc::new(f),
            fprime: Arc::new(fprime),
            antiderivative: Arc::new(antiderivative),
            meta,
        }
    }

    /// An autonomous nonlinearity `f(u)`.
    pub fn autonomous(
        name: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        fprime: impl Fn(f64) -> f64 + Send + Sync + 'static,
        antiderivative: impl Fn(f64) -> f64 + Send + Sync + 'static,
        meta: Meta,
    ) -> Self {
        Self::new(
            name,
            move |_, u| f(u),
            move |_, u| fprime(u),
            move |_, u| antiderivative(u),
            meta,
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn meta(&self) -> &Meta {
        &self.meta
    }

    pub fn f(&self, x: Point, u: f64) -> f64 {
        (self.f)(x, u)
    }

    pub fn fprime(&self, x: Point, u: f64) -> f64 {
        (self.fprime)(x, u)
    }

    pub fn antiderivative(&self, x: Point, u: f64) -> f64 {
        (self.antiderivative)(x, u)
    }
}

/// Named numeric parameters of a catalog entry.
pub type Params = BTreeMap<String, f64>;

#[derive(Debug, Clone, Serialize)]
pub struct ParamSpec {
    pub name: &'static str,
    pub default: f64,
    pub constraint: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub formula: &'static str,
    pub params: Vec<ParamSpec>,
}

/// Names, formulas and parameter schemas of every catalog entry.
pub fn catalog_entries() -> Vec<CatalogEntry> {
    let p = |name, default, constraint| ParamSpec {
        name,
        default,
        constraint,
    };
    vec![
        CatalogEntry {
            name: "gelfand",
            formula: "f(u) = exp(u)",
            params: vec![],
        },
        CatalogEntry {
            name: "affine",
            formula: "f(u) = a u + b",
            params: vec![p("a", 1.0, "a > 0"), p("b", 1.0, "finite")],
        },
        CatalogEntry {
            name: "logistic",
            formula: "f(u) = c u - |u|^(p-1) u",
            params: vec![p("c", 1.0, "finite"), p("p", 3.0, "p > 1")],
        },
        CatalogEntry {
            name: "power",
            formula: "f(u) = (u+)^p",
            params: vec![p("p", 3.0, "p > 1")],
        },
        CatalogEntry {
            name: "asym_neg",
            formula: "f(u) = a u + l + exp(-u)",
            params: vec![p("a", 2.0, "a > 1"), p("l", -0.5, "-1 < l < 0")],
        },
        CatalogEntry {
            name: "constant",
            formula: "f(u) = b",
            params: vec![p("b", 1.0, "finite")],
        },
    ]
}

fn out_of_range(name: &str, value: f64, reason: &str) -> Error {
    Error::ParamOutOfRange {
        name: name.to_string(),
        value,
        reason: reason.to_string(),
    }
}

/// Looks up a named nonlinearity; missing parameters take their defaults.
pub fn catalog(name: &str, params: &Params) -> Result<Nonlinearity> {
    let entry = catalog_entries()
        .into_iter()
        .find(|e| e.name == name)
        .ok_or_else(|| Error::UnknownName(name.to_string()))?;
    for (key, value) in params {
        if !entry.params.iter().any(|p| p.name == key) {
            return Err(Error::InvalidInput(format!(
                "`{name}` has no parameter `{key}`"
            )));
        }
        if !value.is_finite() {
            return Err(out_of_range(key, *value, "must be finite"));
        }
    }
    let get = |key: &str| {
        params.get(key).copied().unwrap_or_else(|| {
            entry
                .params
                .iter()
                .find(|p| p.name == key)
                .map(|p| p.default)
                .unwrap_or(f64::NAN)
        })
    };

    let nl = match name {
        "gelfand" => Nonlinearity::autonomous(
            name,
            f64::exp,
            f64::exp,
            |u| u.exp_m1(),
            Meta {
                convex: true,
                positive: true,
                f0: 1.0,
                fprime0: 1.0,
                slope_a: None,
                offset_l: None,
                // t e^t >= μ e^t once t >= μ
                ar: Some((2.0, 2.0)),
            },
        ),
        "affine" => {
            let (a, b) = (get("a"), get("b"));
            if a <= 0.0 {
                return Err(out_of_range("a", a, "a > 0"));
            }
            Nonlinearity::autonomous(
                name,
                move |u| a * u + b,
                move |_| a,
                move |u| 0.5 * a * u * u + b * u,
                Meta {
                    convex: true,
                    positive: b > 0.0,
                    f0: b,
                    fprime0: a,
                    slope_a: Some(a),
                    offset_l: Some(b),
                    ar: None,
                },
            )
        }
        "logistic" => {
            let (c, p) = (get("c"), get("p"));
            if p <= 1.0 {
                return Err(out_of_range("p", p, "p > 1"));
            }
            Nonlinearity::autonomous(
                name,
                move |u| c * u - u.abs().powf(p - 1.0) * u,
                move |u| c - p * u.abs().powf(p - 1.0),
                move |u| 0.5 * c * u * u - u.abs().powf(p + 1.0) / (p + 1.0),
                Meta {
                    convex: false,
                    positive: false,
                    f0: 0.0,
                    fprime0: c,
                    slope_a: None,
                    offset_l: None,
                    ar: None,
                },
            )
        }
        "power" => {
            let p = get("p");
            if p <= 1.0 {
                return Err(out_of_range("p", p, "p > 1"));
            }
            Nonlinearity::autonomous(
                name,
                move |u| u.max(0.0).powf(p),
                move |u| p * u.max(0.0).powf(p - 1.0),
                move |u| u.max(0.0).powf(p + 1.0) / (p + 1.0),
                Meta {
                    convex: true,
                    positive: false,
                    f0: 0.0,
                    fprime0: 0.0,
                    slope_a: None,
                    offset_l: None,
                    ar: Some((p, 0.0)),
                },
            )
        }
        "asym_neg" => {
            let (a, l) = (get("a"), get("l"));
            if a <= 1.0 {
                return Err(out_of_range("a", a, "a > 1 so that f'(0) > 0"));
            }
            if !(l > -1.0 && l < 0.0) {
                return Err(out_of_range("l", l, "-1 < l < 0 so that f(0) > 0"));
            }
            // f'' = e^{-u} > 0; f(0) = l + 1 > 0 and f' = a - e^{-u} > 0 on u >= 0.
            Nonlinearity::autonomous(
                name,
                move |u| a * u + l + (-u).exp(),
                move |u| a - (-u).exp(),
                move |u| 0.5 * a * u * u + l * u - (-u).exp_m1(),
                Meta {
                    convex: true,
                    positive: true,
                    f0: l + 1.0,
                    fprime0: a - 1.0,
                    slope_a: Some(a),
                    offset_l: Some(l),
                    ar: None,
                },
            )
        }
        "constant" => {
            let b = get("b");
            Nonlinearity::autonomous(
                name,
                move |_| b,
                |_| 0.0,
                move |u| b * u,
                Meta {
                    convex: true,
                    positive: b > 0.0,
                    f0: b,
                    fprime0: 0.0,
                    slope_a: Some(0.0),
                    offset_l: Some(b),
                    ar: None,
                },
            )
        }
        _ => unreachable!("catalog entry without a rule"),
    };
    Ok(nl)
}

/// How the nonlinearity enters the equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coupling {
    /// `-Δu = λ f(u)`
    Lambda(f64),
    /// `-Δu = f(x, u)`
    Fixed,
}

/// `-Δu = λ f(x, u) + g(x)` in Ω with `u = 0` on ∂Ω.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    grid: Grid,
    nonlinearity: Nonlinearity,
    coupling: Coupling,
    forcing: Option<Field>,
}

impl ProblemSpec {
    pub fn new(grid: &Grid, nonlinearity: Nonlinearity, coupling: Coupling) -> Self {
        ProblemSpec {
            grid: grid.clone(),
            nonlinearity,
            coupling,
            forcing: None,
        }
    }

    pub fn with_forcing(mut self, g: Field) -> Result<Self> {
        self.grid.check(&g)?;
        self.forcing = Some(g);
        Ok(self)
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        ProblemSpec {
            coupling: Coupling::Lambda(lambda),
            ..self.clone()
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn nonlinearity(&self) -> &Nonlinearity {
        &self.nonlinearity
    }

    pub fn coupling(&self) -> Coupling {
        self.coupling
    }

    pub fn forcing(&self) -> Option<&Field> {
        self.forcing.as_ref()
    }

    /// Coefficient in front of `f`: `λ`, or 1 for a fixed coupling.
    pub fn lambda(&self) -> f64 {
        match self.coupling {
            Coupling::Lambda(l) => l,
            Coupling::Fixed => 1.0,
        }
    }

    pub(crate) fn source(&self, lambda: f64) -> NodalSource<'_> {
        NodalSource {
            nl: &self.nonlinearity,
            points: self.grid.points(),
            forcing: self.forcing.as_ref().map(|g| g.values()),
            lambda,
        }
    }
}

/// Nodewise right-hand side `s_i(u)` of `-Δ_h u = s(u)`.
pub(crate) trait Source {
    fn value(&self, i: usize, u: f64) -> f64;
    fn derivative(&self, i: usize, u: f64) -> f64;
    /// Antiderivative in `u`, zero at `u = 0`.
    fn primitive(&self, i: usize, u: f64) -> f64;

    fn values(&self, u: &[f64]) -> Vec<f64> {
        u.iter().enumerate().map(|(i, &v)| self.value(i, v)).collect()
    }

    fn derivatives(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .enumerate()
            .map(|(i, &v)| self.derivative(i, v))
            .collect()
    }
}

/// `-Δ_h u - s(u)` nodewise.
pub(crate) fn residual<S: Source + ?Sized>(grid: &Grid, s: &S, u: &[f64]) -> Vec<f64> {
    let mut r = vec![0.0; u.len()];
    crate::linops::laplacian_apply(grid, u, &mut r);
    for (i, (ri, &ui)) in r.iter_mut().zip(u).enumerate() {
        *ri -= s.value(i, ui);
    }
    r
}

pub(crate) struct NodalSource<'a> {
    nl: &'a Nonlinearity,
    points: Vec<Point>,
    forcing: Option<&'a [f64]>,
    lambda: f64,
}

impl Source for NodalSource<'_> {
    fn value(&self, i: usize, u: f64) -> f64 {
        let g = self.forcing.map_or(0.0, |g| g[i]);
        self.lambda * self.nl.f(self.points[i], u) + g
    }

    fn derivative(&self, i: usize, u: f64) -> f64 {
        self.lambda * self.nl.fprime(self.points[i], u)
    }

    fn primitive(&self, i: usize, u: f64) -> f64 {
        let g = self.forcing.map_or(0.0, |g| g[i]);
        self.lambda * self.nl.antiderivative(self.points[i], u) + g * u
    }
}

/// Source of the equation for `v = u - base`:
/// `-Δ_h v = s(base + v) - s(base)`, exact when `base` solves the problem.
pub(crate) struct TranslatedSource<'a, S: Source> {
    pub inner: &'a S,
    pub base: &'a [f64],
}

impl<S: Source> Source for TranslatedSource<'_, S> {
    fn value(&self, i: usize, v: f64) -> f64 {
        let b = self.base[i];
        self.inner.value(i, b + v) - self.inner.value(i, b)
    }

    fn derivative(&self, i: usize, v: f64) -> f64 {
        self.inner.derivative(i, self.base[i] + v)
    }

    fn primitive(&self, i: usize, v: f64) -> f64 {
        let b = self.base[i];
        self.inner.primitive(i, b + v) - self.inner.primitive(i, b) - self.inner.value(i, b) * v
    }
}
