//! Cell-centered rectangular grids, scalar fields and the Neumann-respecting
//! finite-volume operators built on them.
//!
//! Cells are stored row-major: cell `(i, j)` lives at `j * nx + i`, with its
//! center at `((i + 1/2) hx, (j + 1/2) hy)`. Homogeneous Neumann conditions are
//! realized by reflection ghosts that copy the adjacent boundary cell, so every
//! boundary face carries zero flux. `ny = 1` selects one-dimensional mode.

use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("field has {got} values, grid expects {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("non-finite value {value} at cell ({i}, {j})")]
    NonFinite { i: usize, j: usize, value: f64 },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("weight must be strictly positive, found {value} at cell ({i}, {j})")]
    NonPositiveWeight { i: usize, j: usize, value: f64 },
    #[error("snapshot format: {0}")]
    Snapshot(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for GridError {
    fn from(e: std::io::Error) -> Self {
        GridError::Io(e.to_string())
    }
}

/// Discrete rectangle `[0, lx] x [0, ly]` split into `nx * ny` equal cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self, GridError> {
        if nx < 3 {
            return Err(GridError::InvalidGrid(format!("nx = {nx}, need at least 3")));
        }
        if ny < 1 {
            return Err(GridError::InvalidGrid("ny must be at least 1".into()));
        }
        if !(lx.is_finite() && lx > 0.0) || !(ly.is_finite() && ly > 0.0) {
            return Err(GridError::InvalidGrid(format!(
                "side lengths must be positive and finite, got lx = {lx}, ly = {ly}"
            )));
        }
        Ok(Self { nx, ny, lx, ly })
    }

    /// One-dimensional grid on `[0, lx]` with a unit-width transverse direction.
    pub fn line(nx: usize, lx: f64) -> Result<Self, GridError> {
        Self::new(nx, 1, lx, 1.0)
    }

    /// Square grid with `n x n` cells on `[0, l]^2`.
    pub fn square(n: usize, l: f64) -> Result<Self, GridError> {
        Self::new(n, n, l, l)
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
    pub fn hx(&self) -> f64 {
        self.lx / self.nx as f64
    }
    pub fn hy(&self) -> f64 {
        self.ly / self.ny as f64
    }
    /// Smallest cell width.
    pub fn h_min(&self) -> f64 {
        if self.is_1d() {
            self.hx()
        } else {
            self.hx().min(self.hy())
        }
    }
    pub fn is_1d(&self) -> bool {
        self.ny == 1
    }
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    pub fn cell_area(&self) -> f64 {
        self.hx() * self.hy()
    }
    /// |Omega|
    pub fn measure(&self) -> f64 {
        self.lx * self.ly
    }
    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }
    #[inline]
    pub fn coords(&self, k: usize) -> (usize, usize) {
        (k % self.nx, k / self.nx)
    }
    #[inline]
    pub fn center(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 + 0.5) * self.hx(), (j as f64 + 0.5) * self.hy())
    }

    /// Iterates over all interior faces in a fixed order: x-faces row by row,
    /// then y-faces.
    pub fn faces(&self) -> impl Iterator<Item = Face> + '_ {
        let (nx, ny) = (self.nx, self.ny);
        let hx = self.hx();
        let hy = self.hy();
        let xs = (0..ny).flat_map(move |j| {
            (0..nx - 1).map(move |i| Face {
                left: j * nx + i,
                right: j * nx + i + 1,
                spacing: hx,
                width: hy,
                axis: Axis::X,
            })
        });
        let ys = (0..ny.saturating_sub(1)).flat_map(move |j| {
            (0..nx).map(move |i| Face {
                left: j * nx + i,
                right: (j + 1) * nx + i,
                spacing: hy,
                width: hx,
                axis: Axis::Y,
            })
        });
        xs.chain(ys)
    }

    /// Calls `f(left, right, spacing, width, axis)` for every interior face,
    /// in the order of [`GridSpec::faces`]. Plain loops, for hot paths.
    #[inline]
    pub fn visit_faces(&self, mut f: impl FnMut(usize, usize, f64, f64, Axis)) {
        let (nx, ny) = (self.nx, self.ny);
        let (hx, hy) = (self.hx(), self.hy());
        for j in 0..ny {
            let row = j * nx;
            for i in 0..nx - 1 {
                f(row + i, row + i + 1, hx, hy, Axis::X);
            }
        }
        for j in 0..ny.saturating_sub(1) {
            let row = j * nx;
            for i in 0..nx {
                f(row + i, row + nx + i, hy, hx, Axis::Y);
            }
        }
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{} on [0,{}]x[0,{}]", self.nx, self.ny, self.lx, self.ly)
    }
}

/// An interior face between two cells. `left` is the lower-index cell,
/// `spacing` the center-to-center distance and `width` the face length.
#[derive(Debug, Clone, Copy)]
pub struct Face {
    pub left: usize,
    pub right: usize,
    pub spacing: f64,
    pub width: f64,
    pub axis: Axis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

impl Face {
    /// Area of the dual region associated with the face, `spacing * width`.
    #[inline]
    pub fn dual_area(&self) -> f64 {
        self.spacing * self.width
    }
}

/// Cell-centered scalar field.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: GridSpec,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.len() {
            return Err(GridError::LengthMismatch { expected: grid.len(), got: values.len() });
        }
        let f = Self { grid, values };
        f.check_finite()?;
        Ok(f)
    }

    pub fn constant(grid: GridSpec, c: f64) -> Self {
        Self { grid, values: vec![c; grid.len()] }
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self::constant(grid, 0.0)
    }

    /// Samples `f(x, y)` at cell centers.
    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                let (x, y) = grid.center(i, j);
                values.push(f(x, y));
            }
        }
        Self { grid, values }
    }

    pub(crate) fn from_raw(grid: GridSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn grid(&self) -> &GridSpec {
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
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn check_finite(&self) -> Result<(), GridError> {
        match self.values.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(k) => {
                let (i, j) = self.grid.coords(k);
                Err(GridError::NonFinite { i, j, value: self.values[k] })
            }
        }
    }

    pub fn same_grid(&self, other: &Field) -> Result<(), GridError> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(GridError::GridMismatch)
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field::from_raw(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        debug_assert_eq!(self.grid, other.grid);
        Field::from_raw(
            self.grid,
            self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        )
    }

    /// Cell-wise product.
    pub fn product(&self, other: &Field) -> Field {
        self.zip_map(other, |a, b| a * b)
    }

    /// `self + c * other`
    pub fn axpy(&self, c: f64, other: &Field) -> Field {
        self.zip_map(other, |a, b| a + c * b)
    }

    pub fn scaled(&self, c: f64) -> Field {
        self.map(|v| c * v)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Writes the field in the text snapshot format.
    pub fn write_snapshot<W: Write>(&self, mut out: W, t: f64) -> Result<(), GridError> {
        let g = &self.grid;
        writeln!(
            out,
            "# alarm-taxis field nx={} ny={} lx={} ly={} t={}",
            g.nx, g.ny, g.lx, g.ly, t
        )?;
        for j in 0..g.ny {
            let row = &self.values[j * g.nx..(j + 1) * g.nx];
            let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(out, "{}", line.join(" "))?;
        }
        Ok(())
    }

    /// Reads a snapshot, returning the field and its time stamp.
    pub fn read_snapshot<R: BufRead>(input: R) -> Result<(Field, f64), GridError> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| GridError::Snapshot("empty file".into()))??;
        let rest = header
            .strip_prefix("# alarm-taxis field")
            .ok_or_else(|| GridError::Snapshot(format!("bad header line: {header}")))?;
        let mut nx = None;
        let mut ny = None;
        let mut lx = None;
        let mut ly = None;
        let mut t = None;
        for tok in rest.split_whitespace() {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| GridError::Snapshot(format!("bad header token {tok}")))?;
            let bad = || GridError::Snapshot(format!("bad header value {tok}"));
            match k {
                "nx" => nx = Some(v.parse::<usize>().map_err(|_| bad())?),
                "ny" => ny = Some(v.parse::<usize>().map_err(|_| bad())?),
                "lx" => lx = Some(v.parse::<f64>().map_err(|_| bad())?),
                "ly" => ly = Some(v.parse::<f64>().map_err(|_| bad())?),
                "t" => t = Some(v.parse::<f64>().map_err(|_| bad())?),
                _ => return Err(GridError::Snapshot(format!("unknown header key {k}"))),
            }
        }
        let missing = || GridError::Snapshot("header lacks nx, ny, lx, ly or t".into());
        let grid = GridSpec::new(
            nx.ok_or_else(missing)?,
            ny.ok_or_else(missing)?,
            lx.ok_or_else(missing)?,
            ly.ok_or_else(missing)?,
        )?;
        let mut values = Vec::with_capacity(grid.len());
        for (row, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            for tok in line.split_whitespace() {
                let v = tok.parse::<f64>().map_err(|_| {
                    GridError::Snapshot(format!("bad value {tok:?} on data row {}", row + 1))
                })?;
                values.push(v);
            }
        }
        Ok((Field::new(grid, values)?, t.ok_or_else(missing)?))
    }

    pub fn read_snapshot_file(path: &Path) -> Result<(Field, f64), GridError> {
        let file = std::fs::File::open(path)
            .map_err(|e| GridError::Io(format!("{}: {e}", path.display())))?;
        Self::read_snapshot(std::io::BufReader::new(file))
    }
}

/// Five-point (three-point in 1D) Neumann Laplacian.
pub fn laplacian(f: &Field) -> Result<Field, GridError> {
    f.check_finite()?;
    Ok(laplacian_unchecked(f))
}

pub(crate) fn laplacian_unchecked(f: &Field) -> Field {
    let g = f.grid;
    let (nx, ny) = (g.nx, g.ny);
    let ix2 = 1.0 / (g.hx() * g.hx());
    let iy2 = 1.0 / (g.hy() * g.hy());
    let v = &f.values;
    let mut out = vec![0.0; g.len()];
    for j in 0..ny {
        for i in 0..nx {
            let k = j * nx + i;
            let c = v[k];
            let w = if i > 0 { v[k - 1] } else { c };
            let e = if i + 1 < nx { v[k + 1] } else { c };
            let s = if j > 0 { v[k - nx] } else { c };
            let n = if j + 1 < ny { v[k + nx] } else { c };
            out[k] = ((w - c) + (e - c)) * ix2 + ((s - c) + (n - c)) * iy2;
        }
    }
    Field::from_raw(g, out)
}

/// Upwinded `div(carrier * grad(potential))`.
///
/// The face flux is `carrier_up * (psi_right - psi_left) / h`, with the carrier
/// taken from the cell the drift points away from. Faces with no potential
/// jump carry no flux and boundary faces carry none either, so the result
/// integrates to zero.
pub fn taxis_divergence(carrier: &Field, potential: &Field) -> Result<Field, GridError> {
    carrier.same_grid(potential)?;
    carrier.check_finite()?;
    potential.check_finite()?;
    Ok(taxis_divergence_unchecked(carrier, potential))
}

pub(crate) fn taxis_divergence_unchecked(carrier: &Field, potential: &Field) -> Field {
    let g = carrier.grid;
    let inv_area = 1.0 / g.cell_area();
    let c = &carrier.values;
    let p = &potential.values;
    let mut out = vec![0.0; g.len()];
    g.visit_faces(|l, r, spacing, width, _| {
        let jump = p[r] - p[l];
        let up = if jump > 0.0 {
            c[l]
        } else if jump < 0.0 {
            c[r]
        } else {
            return;
        };
        // flux through the face times face length, per cell area
        let q = up * jump / spacing * width * inv_area;
        out[l] += q;
        out[r] -= q;
    });
    Field::from_raw(g, out)
}

/// Midpoint-rule integral over the domain.
pub fn integrate(f: &Field) -> f64 {
    f.grid.cell_area() * f.values.iter().sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
}

pub fn norms(f: &Field) -> Norms {
    let a = f.grid.cell_area();
    let (mut s1, mut s2, mut m) = (0.0, 0.0, 0.0f64);
    for &v in &f.values {
        s1 += v.abs();
        s2 += v * v;
        m = m.max(v.abs());
    }
    Norms { l1: a * s1, l2: (a * s2).sqrt(), linf: m }
}

/// Face-based approximation of `int |grad f|^2`, optionally weighted.
///
/// With a weight, each face term is multiplied by the harmonic mean of the
/// two adjacent weight values.
pub fn grad_sq_integral(f: &Field, weight: Option<&Field>) -> Result<f64, GridError> {
    if let Some(w) = weight {
        f.same_grid(w)?;
        if let Some(k) = w.values.iter().position(|&x| !(x > 0.0) || !x.is_finite()) {
            let (i, j) = w.grid.coords(k);
            return Err(GridError::NonPositiveWeight { i, j, value: w.values[k] });
        }
    }
    Ok(grad_sq_unchecked(f, weight))
}

pub(crate) fn grad_sq_unchecked(f: &Field, weight: Option<&Field>) -> f64 {
    let v = &f.values;
    let mut sum = 0.0;
    f.grid.visit_faces(|l, r, spacing, width, _| {
        let slope = (v[r] - v[l]) / spacing;
        let mut term = slope * slope * spacing * width;
        if let Some(w) = weight {
            let (a, b) = (w.values[l], w.values[r]);
            term *= 2.0 * a * b / (a + b);
        }
        sum += term;
    });
    sum
}

/// Face gradients averaged to cell centers; boundary faces contribute zero.
pub(crate) fn cell_gradients(f: &Field) -> (Vec<f64>, Vec<f64>) {
    let g = f.grid;
    let mut gx = vec![0.0; g.len()];
    let mut gy = vec![0.0; g.len()];
    let v = &f.values;
    g.visit_faces(|l, r, spacing, _, axis| {
        let slope = 0.5 * (v[r] - v[l]) / spacing;
        let target = match axis {
            Axis::X => &mut gx,
            Axis::Y => &mut gy,
        };
        target[l] += slope;
        target[r] += slope;
    });
    (gx, gy)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line3() -> GridSpec {
        GridSpec::line(3, 3.0).unwrap()
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(GridSpec::new(2, 1, 1.0, 1.0).is_err());
        assert!(GridSpec::new(3, 0, 1.0, 1.0).is_err());
        assert!(GridSpec::new(3, 1, 0.0, 1.0).is_err());
        assert!(GridSpec::new(3, 1, 1.0, f64::NAN).is_err());
    }

    #[test]
    fn laplacian_of_constant_vanishes() {
        let g = GridSpec::new(7, 5, 2.0, 1.3).unwrap();
        let l = laplacian(&Field::constant(g, 4.2)).unwrap();
        assert!(l.values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn laplacian_hand_example() {
        let f = Field::new(line3(), vec![0.0, 1.0, 2.0]).unwrap();
        assert_eq!(laplacian(&f).unwrap().values(), &[1.0, 0.0, -1.0]);
    }

    #[test]
    fn laplacian_rejects_nan_with_cell() {
        let g = GridSpec::new(3, 2, 1.0, 1.0).unwrap();
        let mut f = Field::zeros(g);
        f.values_mut()[4] = f64::NAN;
        match laplacian(&f) {
            Err(GridError::NonFinite { i: 1, j: 1, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn taxis_constant_potential_is_zero() {
        let g = GridSpec::new(4, 3, 1.0, 1.0).unwrap();
        let c = Field::from_fn(g, |x, y| 1.0 + x * y);
        let d = taxis_divergence(&c, &Field::constant(g, 3.0)).unwrap();
        assert!(d.values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn taxis_hand_example() {
        // faces: 1 * (1 - 0) = 1 from cell 0, 3 * (0 - 1) = -3 from cell 2
        let c = Field::new(line3(), vec![1.0, 2.0, 3.0]).unwrap();
        let p = Field::new(line3(), vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(taxis_divergence(&c, &p).unwrap().values(), &[1.0, -4.0, 3.0]);
    }

    #[test]
    fn taxis_grid_mismatch() {
        let a = Field::zeros(line3());
        let b = Field::zeros(GridSpec::line(4, 3.0).unwrap());
        assert_eq!(taxis_divergence(&a, &b), Err(GridError::GridMismatch));
    }

    #[test]
    fn integrate_examples() {
        let g = GridSpec::new(5, 4, 1.0, 1.0).unwrap();
        assert!((integrate(&Field::constant(g, 1.0)) - 1.0).abs() < 1e-15);
        let g = GridSpec::new(5, 4, 2.0, 1.0).unwrap();
        assert!((integrate(&Field::constant(g, 2.0)) - 4.0).abs() < 1e-15);
    }

    #[test]
    fn integrate_ramp_is_second_order() {
        // midpoint rule is exact for linear functions
        for n in [3, 10, 100] {
            let g = GridSpec::line(n, 1.0).unwrap();
            assert!((integrate(&Field::from_fn(g, |x, _| x)) - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn norms_examples() {
        let g = GridSpec::new(3, 3, 1.0, 1.0).unwrap();
        assert_eq!(norms(&Field::zeros(g)), Norms { l1: 0.0, l2: 0.0, linf: 0.0 });
        let n = norms(&Field::constant(g, 1.0));
        assert!((n.l1 - 1.0).abs() < 1e-15 && (n.l2 - 1.0).abs() < 1e-15 && n.linf == 1.0);
        // [3, -4] on unit cells, padded with a zero cell to satisfy nx >= 3
        let f = Field::new(line3(), vec![3.0, -4.0, 0.0]).unwrap();
        let n = norms(&f);
        assert_eq!((n.l1, n.l2, n.linf), (7.0, 5.0, 4.0));
    }

    #[test]
    fn grad_sq_examples() {
        let g = GridSpec::new(4, 3, 1.0, 2.0).unwrap();
        assert_eq!(grad_sq_integral(&Field::constant(g, 2.0), None).unwrap(), 0.0);
        // one unit jump across a face of measure 1, then flat
        let f = Field::new(line3(), vec![0.0, 1.0, 1.0]).unwrap();
        assert_eq!(grad_sq_integral(&f, None).unwrap(), 1.0);
        let f = Field::from_fn(g, |x, y| x * x - y);
        let a = grad_sq_integral(&f, None).unwrap();
        let b = grad_sq_integral(&f, Some(&Field::constant(g, 1.0))).unwrap();
        assert!((a - b).abs() <= 1e-14 * a);
    }

    #[test]
    fn grad_sq_rejects_nonpositive_weight() {
        let f = Field::zeros(line3());
        let w = Field::new(line3(), vec![1.0, 0.0, 1.0]).unwrap();
        assert!(matches!(
            grad_sq_integral(&f, Some(&w)),
            Err(GridError::NonPositiveWeight { i: 1, j: 0, .. })
        ));
    }

    #[test]
    fn snapshot_round_trip_is_exact() {
        let g = GridSpec::new(4, 3, 1.5, 0.7).unwrap();
        let f = Field::from_fn(g, |x, y| (x * 7.1).sin() / (1.0 + y) + 1e-300);
        let mut buf = Vec::new();
        f.write_snapshot(&mut buf, 0.125).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# alarm-taxis field nx=4 ny=3 lx=1.5 ly=0.7 t=0.125\n"));
        assert_eq!(text.lines().count(), 4);
        let (back, t) = Field::read_snapshot(&buf[..]).unwrap();
        assert_eq!(t, 0.125);
        assert_eq!(back, f);
    }

    #[test]
    fn cell_gradients_of_linear_profile() {
        let g = GridSpec::new(5, 4, 1.0, 1.0).unwrap();
        let f = Field::from_fn(g, |x, y| 2.0 * x - 3.0 * y);
        let (gx, gy) = cell_gradients(&f);
        // interior cells see the exact slope, boundary cells half of it
        let k = g.index(2, 1);
        assert!((gx[k] - 2.0).abs() < 1e-12 && (gy[k] + 3.0).abs() < 1e-12);
        assert!((gx[g.index(0, 1)] - 1.0).abs() < 1e-12);
    }
}
