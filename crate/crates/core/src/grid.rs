//! Uniform tensor grids on intervals and rectangles, and nodal fields.
//!
//! Only interior nodes are stored; the homogeneous Dirichlet condition is
//! implicit. Nodes are numbered `i = ix + nx * iy`.

use std::io::{self, Write};
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};

static NEXT_GRID_ID: AtomicU64 = AtomicU64::new(1);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridId(u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dim {
    One,
    Two,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone)]
pub struct Grid {
    id: GridId,
    dim: Dim,
    counts: [usize; 2],
    spacing: [f64; 2],
    extents: [(f64, f64); 2],
}

/// Builds a grid from per-axis interior node counts and extents.
///
/// `counts` and `extents` must both have `dim` entries.
pub fn build_grid(dim: usize, counts: &[usize], extents: &[(f64, f64)]) -> Result<Grid> {
    let dim = match dim {
        1 => Dim::One,
        2 => Dim::Two,
        d => return Err(Error::InvalidGrid(format!("dimension {d} not supported"))),
    };
    let axes = match dim {
        Dim::One => 1,
        Dim::Two => 2,
    };
    if counts.len() != axes || extents.len() != axes {
        return Err(Error::InvalidGrid(format!(
            "expected {axes} counts and extents, got {} and {}",
            counts.len(),
            extents.len()
        )));
    }
    let mut c = [1usize; 2];
    let mut h = [1.0f64; 2];
    let mut e = [(0.0, 1.0); 2];
    for axis in 0..axes {
        let n = counts[axis];
        let (a, b) = extents[axis];
        if n < 3 {
            return Err(Error::InvalidGrid(format!(
                "axis {axis}: need at least 3 interior nodes, got {n}"
            )));
        }
        if !(a.is_finite() && b.is_finite()) || b <= a {
            return Err(Error::InvalidGrid(format!(
                "axis {axis}: degenerate extent ({a}, {b})"
            )));
        }
        c[axis] = n;
        h[axis] = (b - a) / (n as f64 + 1.0);
        e[axis] = (a, b);
    }
    Ok(Grid {
        id: GridId(NEXT_GRID_ID.fetch_add(1, Ordering::Relaxed)),
        dim,
        counts: c,
        spacing: h,
        extents: e,
    })
}

impl Grid {
    /// `n` interior nodes on `(a, b)`.
    pub fn interval(n: usize, a: f64, b: f64) -> Result<Grid> {
        build_grid(1, &[n], &[(a, b)])
    }

    /// `n` interior nodes on the unit interval.
    pub fn unit_interval(n: usize) -> Result<Grid> {
        Self::interval(n, 0.0, 1.0)
    }

    pub fn rectangle(nx: usize, ny: usize, x: (f64, f64), y: (f64, f64)) -> Result<Grid> {
        build_grid(2, &[nx, ny], &[x, y])
    }

    pub fn unit_square(n: usize) -> Result<Grid> {
        Self::rectangle(n, n, (0.0, 1.0), (0.0, 1.0))
    }

    pub fn id(&self) -> GridId {
        self.id
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    /// Total number of interior nodes.
    pub fn len(&self) -> usize {
        self.counts[0] * self.counts[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn nx(&self) -> usize {
        self.counts[0]
    }

    /// 1 for interval grids.
    pub fn ny(&self) -> usize {
        self.counts[1]
    }

    pub fn hx(&self) -> f64 {
        self.spacing[0]
    }

    /// Only meaningful for rectangles.
    pub fn hy(&self) -> f64 {
        self.spacing[1]
    }

    pub fn extents(&self) -> &[(f64, f64)] {
        match self.dim {
            Dim::One => &self.extents[..1],
            Dim::Two => &self.extents[..],
        }
    }

    /// Quadrature weight of one node: `h` or `hx * hy`.
    pub fn cell_measure(&self) -> f64 {
        match self.dim {
            Dim::One => self.spacing[0],
            Dim::Two => self.spacing[0] * self.spacing[1],
        }
    }

    pub fn point(&self, i: usize) -> Point {
        let ix = i % self.counts[0];
        let iy = i / self.counts[0];
        let x = self.extents[0].0 + (ix as f64 + 1.0) * self.spacing[0];
        let y = match self.dim {
            Dim::One => 0.0,
            Dim::Two => self.extents[1].0 + (iy as f64 + 1.0) * self.spacing[1],
        };
        Point { x, y }
    }

    pub fn points(&self) -> Vec<Point> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    pub fn zeros(&self) -> Field {
        Field {
            grid: self.id,
            values: vec![0.0; self.len()],
        }
    }

    pub fn constant(&self, value: f64) -> Field {
        Field {
            grid: self.id,
            values: vec![value; self.len()],
        }
    }

    /// Samples `g` at the interior nodes.
    pub fn sample(&self, mut g: impl FnMut(Point) -> f64) -> Field {
        Field {
            grid: self.id,
            values: (0..self.len()).map(|i| g(self.point(i))).collect(),
        }
    }

    /// Wraps nodal values, checking length and finiteness.
    pub fn field(&self, values: Vec<f64>) -> Result<Field> {
        if values.len() != self.len() {
            return Err(Error::InvalidField(format!(
                "expected {} values, got {}",
                self.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidField(format!("non-finite value at node {i}")));
        }
        Ok(Field {
            grid: self.id,
            values,
        })
    }

    pub(crate) fn wrap(&self, values: Vec<f64>) -> Field {
        debug_assert_eq!(values.len(), self.len());
        Field {
            grid: self.id,
            values,
        }
    }

    pub fn check(&self, field: &Field) -> Result<()> {
        if field.grid == self.id {
            Ok(())
        } else {
            Err(Error::BindingMismatch)
        }
    }
}

/// Real values at the interior nodes of one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: GridId,
    values: Vec<f64>,
}

impl Field {
    pub fn grid_id(&self) -> GridId {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &Field, b: f64) -> Result<Field> {
        if self.grid != other.grid {
            return Err(Error::BindingMismatch);
        }
        Ok(Field {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(u, v)| a * u + b * v)
                .collect(),
        })
    }

    pub fn scaled(&self, a: f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|u| a * u).collect(),
        }
    }

    /// Largest value of `self - other` (positive means `self` exceeds `other` somewhere).
    pub fn max_excess_over(&self, other: &Field) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::BindingMismatch);
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(u, v)| u - v)
            .fold(f64::NEG_INFINITY, f64::max))
    }
}

/// Interior-node rectangle rule.
pub fn integrate(grid: &Grid, field: &Field) -> Result<f64> {
    grid.check(field)?;
    Ok(grid.cell_measure() * field.values.iter().sum::<f64>())
}

pub fn norm_inf(field: &Field) -> f64 {
    max_abs(&field.values)
}

pub fn norm_l2(grid: &Grid, field: &Field) -> Result<f64> {
    grid.check(field)?;
    Ok((grid.cell_measure() * dot(&field.values, &field.values)).sqrt())
}

/// Discrete energy norm `sqrt(measure * u . (-Δ_h u))`, the analogue of `‖∇u‖_{L²}`.
pub fn norm_h1(grid: &Grid, field: &Field) -> Result<f64> {
    grid.check(field)?;
    let mut au = vec![0.0; grid.len()];
    crate::linops::laplacian_apply(grid, &field.values, &mut au);
    Ok((grid.cell_measure() * dot(&field.values, &au)).max(0.0).sqrt())
}

/// Writes `x[,y],u` rows, one per interior node, with 17 significant digits.
pub fn write_csv<W: Write>(grid: &Grid, field: &Field, mut out: W) -> io::Result<()> {
    if grid.check(field).is_err() {
        return Err(io::Error::new(
            io::ErrorKind::InvalidInput,
            "field is bound to a different grid",
        ));
    }
    match grid.dim {
        Dim::One => writeln!(out, "x,u")?,
        Dim::Two => writeln!(out, "x,y,u")?,
    }
    for (i, u) in field.values.iter().enumerate() {
        let p = grid.point(i);
        match grid.dim {
            Dim::One => writeln!(out, "{:.16e},{:.16e}", p.x, u)?,
            Dim::Two => writeln!(out, "{:.16e},{:.16e},{:.16e}", p.x, p.y, u)?,
        }
    }
    Ok(())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}
