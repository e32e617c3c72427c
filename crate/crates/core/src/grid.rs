//! Structured cell-centered grids, field containers and midpoint quadrature.
//!
//! Cells are stored row-major with `x` varying fastest: cell `(i, j)` lives at
//! index `j * nx + i`. A grid with `ny == 1` is one-dimensional; its cell
//! measure is `hx` and `ly` is ignored.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use crate::error::{Error, Result};

/// Boundary treatment shared by every field on a grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BcMode {
    /// No-slip velocity, homogeneous Neumann for scalars (mirror ghosts).
    Walls,
    /// Periodic in every active direction.
    Periodic,
}

impl fmt::Display for BcMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BcMode::Walls => f.write_str("walls"),
            BcMode::Periodic => f.write_str("periodic"),
        }
    }
}

impl FromStr for BcMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "walls" => Ok(BcMode::Walls),
            "periodic" => Ok(BcMode::Periodic),
            other => Err(Error::InvalidParameter(format!("unknown bc mode '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    bc: BcMode,
}

/// Builds a validated grid.
pub fn make_grid(nx: usize, ny: usize, lx: f64, ly: f64, bc: BcMode) -> Result<Grid> {
    Grid::new(nx, ny, lx, ly, bc)
}

impl Grid {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64, bc: BcMode) -> Result<Self> {
        if nx < 4 {
            return Err(Error::InvalidGrid(format!(
                "nx = {nx}; stencils need at least 4 cells"
            )));
        }
        if ny == 0 {
            return Err(Error::InvalidGrid("ny must be at least 1".into()));
        }
        if ny > 1 && ny < 4 {
            return Err(Error::InvalidGrid(format!(
                "ny = {ny}; a 2D grid needs at least 4 cells per direction"
            )));
        }
        if !(lx.is_finite() && lx > 0.0) {
            return Err(Error::InvalidGrid(format!("lx = {lx} must be positive")));
        }
        if ny > 1 && !(ly.is_finite() && ly > 0.0) {
            return Err(Error::InvalidGrid(format!("ly = {ly} must be positive")));
        }
        Ok(Grid { nx, ny, lx, ly, bc })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }

    pub fn ly(&self) -> f64 {
        self.ly
    }

    pub fn bc(&self) -> BcMode {
        self.bc
    }

    pub fn hx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        if self.ny == 1 {
            self.ly
        } else {
            self.ly / self.ny as f64
        }
    }

    /// Smallest active spacing.
    pub fn h_min(&self) -> f64 {
        if self.dim() == 1 {
            self.hx()
        } else {
            self.hx().min(self.hy())
        }
    }

    /// Number of active space dimensions.
    pub fn dim(&self) -> usize {
        if self.ny == 1 {
            1
        } else {
            2
        }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_measure(&self) -> f64 {
        if self.dim() == 1 {
            self.hx()
        } else {
            self.hx() * self.hy()
        }
    }

    /// Measure of the whole domain.
    pub fn volume(&self) -> f64 {
        if self.dim() == 1 {
            self.lx
        } else {
            self.lx * self.ly
        }
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn center(&self, i: usize, j: usize) -> (f64, f64) {
        let x = (i as f64 + 0.5) * self.hx();
        let y = if self.dim() == 1 {
            0.0
        } else {
            (j as f64 + 0.5) * self.hy()
        };
        (x, y)
    }

    pub(crate) fn check_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!(
                "grids differ: {}x{} vs {}x{}",
                self.nx, self.ny, other.nx, other.ny
            )))
        }
    }
}

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

/// One real value per cell.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a grid of {} cells",
                values.len(),
                grid.len()
            )));
        }
        check_finite(&values, "scalar field")?;
        Ok(ScalarField { grid, values })
    }

    /// Skips validation; for kernels that produce values from valid inputs.
    pub(crate) fn from_raw(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        ScalarField { grid, values }
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        ScalarField {
            grid,
            values: vec![value; grid.len()],
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                let (x, y) = grid.center(i, j);
                values.push(f(x, y));
            }
        }
        ScalarField { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField::from_raw(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> ScalarField {
        debug_assert_eq!(self.grid, other.grid);
        ScalarField::from_raw(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        integrate(self) / self.grid.volume()
    }
}

/// Cell-centered vector field with one component per active dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    grid: Grid,
    comps: Vec<Vec<f64>>,
}

impl VectorField {
    pub fn new(grid: Grid, comps: Vec<Vec<f64>>) -> Result<Self> {
        if comps.len() != grid.dim() {
            return Err(Error::ShapeMismatch(format!(
                "{} components on a {}D grid",
                comps.len(),
                grid.dim()
            )));
        }
        for c in &comps {
            if c.len() != grid.len() {
                return Err(Error::ShapeMismatch(format!(
                    "component of length {} on a grid of {} cells",
                    c.len(),
                    grid.len()
                )));
            }
            check_finite(c, "vector field")?;
        }
        Ok(VectorField { grid, comps })
    }

    pub(crate) fn from_raw(grid: Grid, comps: Vec<Vec<f64>>) -> Self {
        debug_assert_eq!(comps.len(), grid.dim());
        VectorField { grid, comps }
    }

    pub fn zeros(grid: Grid) -> Self {
        VectorField {
            grid,
            comps: vec![vec![0.0; grid.len()]; grid.dim()],
        }
    }

    pub fn constant(grid: Grid, value: &[f64]) -> Result<Self> {
        if value.len() != grid.dim() {
            return Err(Error::ShapeMismatch(format!(
                "{} components on a {}D grid",
                value.len(),
                grid.dim()
            )));
        }
        Ok(VectorField {
            grid,
            comps: value.iter().map(|&v| vec![v; grid.len()]).collect(),
        })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> [f64; 2]) -> Self {
        let d = grid.dim();
        let mut comps = vec![Vec::with_capacity(grid.len()); d];
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                let (x, y) = grid.center(i, j);
                let v = f(x, y);
                for (k, comp) in comps.iter_mut().enumerate() {
                    comp.push(v[k]);
                }
            }
        }
        VectorField { grid, comps }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn comp(&self, k: usize) -> &[f64] {
        &self.comps[k]
    }

    pub fn comp_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.comps[k]
    }

    pub fn comps(&self) -> &[Vec<f64>] {
        &self.comps
    }

    /// Pointwise squared magnitude.
    pub fn norm_sq(&self) -> ScalarField {
        let mut out = vec![0.0; self.grid.len()];
        for c in &self.comps {
            for (o, v) in out.iter_mut().zip(c) {
                *o += v * v;
            }
        }
        ScalarField::from_raw(self.grid, out)
    }

    /// Pointwise dot product.
    pub fn dot(&self, other: &VectorField) -> ScalarField {
        let mut out = vec![0.0; self.grid.len()];
        for (a, b) in self.comps.iter().zip(&other.comps) {
            for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
                *o += x * y;
            }
        }
        ScalarField::from_raw(self.grid, out)
    }

    pub fn l2_norm(&self) -> f64 {
        integrate(&self.norm_sq()).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.comps
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, s: f64) -> VectorField {
        VectorField::from_raw(
            self.grid,
            self.comps
                .iter()
                .map(|c| c.iter().map(|v| v * s).collect())
                .collect(),
        )
    }

    pub fn sub(&self, other: &VectorField) -> VectorField {
        VectorField::from_raw(
            self.grid,
            self.comps
                .iter()
                .zip(&other.comps)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
                .collect(),
        )
    }
}

/// Cell-centered `d x d` tensor field, entry `(a, b)` at `a * d + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorField {
    grid: Grid,
    entries: Vec<Vec<f64>>,
}

impl TensorField {
    pub fn zeros(grid: Grid) -> Self {
        let d = grid.dim();
        TensorField {
            grid,
            entries: vec![vec![0.0; grid.len()]; d * d],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn entry(&self, a: usize, b: usize) -> &[f64] {
        &self.entries[a * self.dim() + b]
    }

    pub fn entry_mut(&mut self, a: usize, b: usize) -> &mut [f64] {
        let d = self.dim();
        &mut self.entries[a * d + b]
    }

    /// Pointwise trace.
    pub fn trace(&self) -> ScalarField {
        let d = self.dim();
        let mut out = vec![0.0; self.grid.len()];
        for a in 0..d {
            for (o, v) in out.iter_mut().zip(self.entry(a, a)) {
                *o += v;
            }
        }
        ScalarField::from_raw(self.grid, out)
    }

    /// Pointwise Frobenius contraction `T : U`.
    pub fn contract(&self, other: &TensorField) -> ScalarField {
        let mut out = vec![0.0; self.grid.len()];
        for (a, b) in self.entries.iter().zip(&other.entries) {
            for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
                *o += x * y;
            }
        }
        ScalarField::from_raw(self.grid, out)
    }
}

/// Midpoint quadrature: sum of cell values times the cell measure.
pub fn integrate(f: &ScalarField) -> f64 {
    f.values.iter().sum::<f64>() * f.grid.cell_measure()
}

/// `L^p` norm for `p` in `{1, 2, inf}`.
pub fn lp_norm(f: &ScalarField, p: f64) -> Result<f64> {
    let m = f.grid.cell_measure();
    if p == 1.0 {
        Ok(f.values.iter().map(|v| v.abs()).sum::<f64>() * m)
    } else if p == 2.0 {
        Ok((f.values.iter().map(|v| v * v).sum::<f64>() * m).sqrt())
    } else if p == f64::INFINITY {
        Ok(f.values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs())))
    } else {
        Err(Error::UnsupportedNorm(p))
    }
}

pub fn h1_seminorm(f: &ScalarField) -> f64 {
    crate::operators::gradient(f).l2_norm()
}

/// Writes fields sharing one grid as text: a header line
/// `nx,ny,lx,ly,bc_mode,components`, its values, then one row per cell.
pub fn write_fields<W: Write>(out: &mut W, grid: &Grid, columns: &[&[f64]]) -> std::io::Result<()> {
    writeln!(out, "nx,ny,lx,ly,bc_mode,components")?;
    writeln!(
        out,
        "{},{},{},{},{},{}",
        grid.nx(),
        grid.ny(),
        grid.lx(),
        grid.ly(),
        grid.bc(),
        columns.len()
    )?;
    let mut line = String::new();
    for cell in 0..grid.len() {
        line.clear();
        for (k, col) in columns.iter().enumerate() {
            if k > 0 {
                line.push(',');
            }
            line.push_str(&col[cell].to_string());
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    Ok(())
}

/// Reads the layout produced by [`write_fields`].
pub fn read_fields<R: BufRead>(input: R) -> Result<(Grid, Vec<Vec<f64>>)> {
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: "<field>".into(),
        line,
        msg,
    };
    let mut lines = input.lines().enumerate();
    let mut next = |what: &str| -> Result<(usize, String)> {
        match lines.next() {
            Some((n, Ok(l))) => Ok((n + 1, l)),
            Some((n, Err(e))) => Err(parse_err(n + 1, e.to_string())),
            None => Err(parse_err(0, format!("missing {what}"))),
        }
    };
    let (_, _header) = next("header")?;
    let (ln, meta) = next("grid line")?;
    let parts: Vec<&str> = meta.split(',').collect();
    if parts.len() != 6 {
        return Err(parse_err(ln, "expected 6 header values".into()));
    }
    let num = |s: &str| -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .map_err(|e| parse_err(ln, format!("'{s}': {e}")))
    };
    let int = |s: &str| -> Result<usize> {
        s.trim()
            .parse::<usize>()
            .map_err(|e| parse_err(ln, format!("'{s}': {e}")))
    };
    let grid = Grid::new(
        int(parts[0])?,
        int(parts[1])?,
        num(parts[2])?,
        num(parts[3])?,
        parts[4].parse()?,
    )?;
    let ncomp = int(parts[5])?;
    let mut columns = vec![Vec::with_capacity(grid.len()); ncomp];
    for _ in 0..grid.len() {
        let (ln, row) = next("cell row")?;
        let vals: Vec<&str> = row.split(',').collect();
        if vals.len() != ncomp {
            return Err(parse_err(ln, format!("expected {ncomp} values")));
        }
        for (col, v) in columns.iter_mut().zip(vals) {
            col.push(
                v.trim()
                    .parse::<f64>()
                    .map_err(|e| parse_err(ln, format!("'{v}': {e}")))?,
            );
        }
    }
    Ok((grid, columns))
}
