//! Uniform periodic staggered mesh and the three field layouts
//! (cell-, face- and vertex-centered), with discrete inner products and norms.
//!
//! Storage is interior-only (`nx * ny` per family); the periodic ghost rule
//! is applied on access by index wrapping, never by storing ghost layers.
//! Flattened layout is row-major with the x index outermost: `idx = i * ny + j`.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("grid spacing mismatch: lx/nx = {hx} but ly/ny = {hy}")]
    SpacingMismatch { hx: f64, hy: f64 },
    #[error("grid too small: need nx >= 4 and ny >= 4, got {nx} x {ny}")]
    TooSmall { nx: usize, ny: usize },
    #[error("grid lengths must be positive and finite, got lx = {lx}, ly = {ly}")]
    BadExtent { lx: f64, ly: f64 },
}

/// Uniform periodic mesh over `[x0, x0+lx) x [y0, y0+ly)` with square cells.
///
/// Cell centers sit at `(x0 + (i+1/2) h, y0 + (j+1/2) h)` for `i in 0..nx`,
/// `j in 0..ny` (0-based; the usual 1-based staggered-grid indexing maps to
/// this by shifting the index down by one).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    h: f64,
    x0: f64,
    y0: f64,
}

impl Grid {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64, x0: f64, y0: f64) -> Result<Self, GridError> {
        if nx < 4 || ny < 4 {
            return Err(GridError::TooSmall { nx, ny });
        }
        if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
            return Err(GridError::BadExtent { lx, ly });
        }
        let hx = lx / nx as f64;
        let hy = ly / ny as f64;
        if hx != hy {
            return Err(GridError::SpacingMismatch { hx, hy });
        }
        Ok(Self { nx, ny, lx, ly, h: hx, x0, y0 })
    }

    /// Square grid on `[x0, x0+l)^2`.
    pub fn square(n: usize, l: f64, x0: f64, y0: f64) -> Result<Self, GridError> {
        Self::new(n, n, l, l, x0, y0)
    }

    /// Build from counts and spacing (always self-consistent); used by the
    /// snapshot reader whose header carries `h` rather than the extents.
    pub fn from_spacing(nx: usize, ny: usize, h: f64, x0: f64, y0: f64) -> Result<Self, GridError> {
        if nx < 4 || ny < 4 {
            return Err(GridError::TooSmall { nx, ny });
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(GridError::BadExtent { lx: h, ly: h });
        }
        Ok(Self { nx, ny, lx: h * nx as f64, ly: h * ny as f64, h, x0, y0 })
    }

    /// Unit square `[0,1)^2`.
    pub fn unit(n: usize) -> Self {
        Self::square(n, 1.0, 0.0, 0.0).expect("unit grid")
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
    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn x0(&self) -> f64 {
        self.x0
    }
    pub fn y0(&self) -> f64 {
        self.y0
    }

    pub fn ncells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.nx && j < self.ny);
        i * self.ny + j
    }

    /// Cell-center x coordinate.
    #[inline]
    pub fn xc(&self, i: usize) -> f64 {
        self.x0 + (i as f64 + 0.5) * self.h
    }
    /// Cell-center y coordinate.
    #[inline]
    pub fn yc(&self, j: usize) -> f64 {
        self.y0 + (j as f64 + 0.5) * self.h
    }
    /// x-face abscissa: face `i` separates cells `i` and `i+1 (mod nx)`.
    #[inline]
    pub fn xf(&self, i: usize) -> f64 {
        self.x0 + (i as f64 + 1.0) * self.h
    }
    /// y-face ordinate: face `j` separates cells `j` and `j+1 (mod ny)`.
    #[inline]
    pub fn yf(&self, j: usize) -> f64 {
        self.y0 + (j as f64 + 1.0) * self.h
    }

    #[inline]
    pub fn wrap_x(&self, i: isize) -> usize {
        i.rem_euclid(self.nx as isize) as usize
    }
    #[inline]
    pub fn wrap_y(&self, j: isize) -> usize {
        j.rem_euclid(self.ny as isize) as usize
    }

    /// Next x index with periodic wrap.
    #[inline]
    pub fn xp(&self, i: usize) -> usize {
        if i + 1 == self.nx {
            0
        } else {
            i + 1
        }
    }
    /// Previous x index with periodic wrap.
    #[inline]
    pub fn xm(&self, i: usize) -> usize {
        if i == 0 {
            self.nx - 1
        } else {
            i - 1
        }
    }
    #[inline]
    pub fn yp(&self, j: usize) -> usize {
        if j + 1 == self.ny {
            0
        } else {
            j + 1
        }
    }
    #[inline]
    pub fn ym(&self, j: usize) -> usize {
        if j == 0 {
            self.ny - 1
        } else {
            j - 1
        }
    }
}

#[inline]
fn assert_same_grid(a: &Grid, b: &Grid, what: &str) {
    assert_eq!(a, b, "grid mismatch in {what}");
}

fn assert_finite(vals: &[f64], what: &str) {
    for (k, v) in vals.iter().enumerate() {
        assert!(v.is_finite(), "non-finite value {v} at flat index {k} in {what}");
    }
}

/// Scalar field stored at cell centers.
#[derive(Debug, Clone, PartialEq)]
pub struct CellField {
    grid: Grid,
    values: Vec<f64>,
}

impl CellField {
    pub fn zeros(grid: Grid) -> Self {
        Self { grid, values: vec![0.0; grid.ncells()] }
    }

    pub fn constant(grid: Grid, v: f64) -> Self {
        assert!(v.is_finite(), "non-finite constant for CellField");
        Self { grid, values: vec![v; grid.ncells()] }
    }

    /// Sample `f(x, y)` at the cell centers.
    pub fn from_fn(grid: Grid, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.ncells());
        for i in 0..grid.nx() {
            for j in 0..grid.ny() {
                values.push(f(grid.xc(i), grid.yc(j)));
            }
        }
        assert_finite(&values, "CellField::from_fn");
        Self { grid, values }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid.ncells(), "value count does not match grid");
        assert_finite(&values, "CellField::from_values");
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.grid.idx(i, j);
        self.values[k] = v;
    }

    /// Periodic ghost access: any integer index is wrapped into the interior.
    #[inline]
    pub fn at_wrapped(&self, i: isize, j: isize) -> f64 {
        self.at(self.grid.wrap_x(i), self.grid.wrap_y(j))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }

    pub fn has_nan(&self) -> bool {
        self.values.iter().any(|v| !v.is_finite())
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &CellField) {
        assert_same_grid(&self.grid, &other.grid, "CellField::axpy");
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for a in self.values.iter_mut() {
            *a *= alpha;
        }
    }

    pub fn add_scalar(&mut self, alpha: f64) {
        for a in self.values.iter_mut() {
            *a += alpha;
        }
    }
}

impl std::ops::Add<&CellField> for &CellField {
    type Output = CellField;
    fn add(self, rhs: &CellField) -> CellField {
        let mut out = self.clone();
        out.axpy(1.0, rhs);
        out
    }
}

impl std::ops::Sub<&CellField> for &CellField {
    type Output = CellField;
    fn sub(self, rhs: &CellField) -> CellField {
        let mut out = self.clone();
        out.axpy(-1.0, rhs);
        out
    }
}

/// Vector field stored at cell faces: `x[i*ny+j]` lives on the face between
/// cells `(i, j)` and `(i+1, j)`, `y[i*ny+j]` between `(i, j)` and `(i, j+1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeField {
    grid: Grid,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl EdgeField {
    pub fn zeros(grid: Grid) -> Self {
        let n = grid.ncells();
        Self { grid, x: vec![0.0; n], y: vec![0.0; n] }
    }

    pub fn constant(grid: Grid, vx: f64, vy: f64) -> Self {
        let n = grid.ncells();
        assert!(vx.is_finite() && vy.is_finite(), "non-finite constant for EdgeField");
        Self { grid, x: vec![vx; n], y: vec![vy; n] }
    }

    /// Sample the two components at their own face midpoints.
    pub fn from_fns(
        grid: Grid,
        mut fx: impl FnMut(f64, f64) -> f64,
        mut fy: impl FnMut(f64, f64) -> f64,
    ) -> Self {
        let n = grid.ncells();
        let mut x = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for i in 0..grid.nx() {
            for j in 0..grid.ny() {
                x.push(fx(grid.xf(i), grid.yc(j)));
                y.push(fy(grid.xc(i), grid.yf(j)));
            }
        }
        assert_finite(&x, "EdgeField::from_fns (x family)");
        assert_finite(&y, "EdgeField::from_fns (y family)");
        Self { grid, x, y }
    }

    pub fn from_values(grid: Grid, x: Vec<f64>, y: Vec<f64>) -> Self {
        assert_eq!(x.len(), grid.ncells(), "x-face count does not match grid");
        assert_eq!(y.len(), grid.ncells(), "y-face count does not match grid");
        assert_finite(&x, "EdgeField::from_values (x family)");
        assert_finite(&y, "EdgeField::from_values (y family)");
        Self { grid, x, y }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn x_at(&self, i: usize, j: usize) -> f64 {
        self.x[self.grid.idx(i, j)]
    }
    #[inline]
    pub fn y_at(&self, i: usize, j: usize) -> f64 {
        self.y[self.grid.idx(i, j)]
    }
    #[inline]
    pub fn set_x(&mut self, i: usize, j: usize, v: f64) {
        let k = self.grid.idx(i, j);
        self.x[k] = v;
    }
    #[inline]
    pub fn set_y(&mut self, i: usize, j: usize, v: f64) {
        let k = self.grid.idx(i, j);
        self.y[k] = v;
    }

    pub fn xs(&self) -> &[f64] {
        &self.x
    }
    pub fn ys(&self) -> &[f64] {
        &self.y
    }
    pub fn xs_mut(&mut self) -> &mut [f64] {
        &mut self.x
    }
    pub fn ys_mut(&mut self) -> &mut [f64] {
        &mut self.y
    }

    /// Simultaneous mutable access to both face families.
    pub fn parts_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.x, &mut self.y)
    }

    pub fn max_abs(&self) -> f64 {
        let mx = self.x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        self.y.iter().fold(mx, |m, v| m.max(v.abs()))
    }

    pub fn has_nan(&self) -> bool {
        self.x.iter().chain(self.y.iter()).any(|v| !v.is_finite())
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &EdgeField) {
        assert_same_grid(&self.grid, &other.grid, "EdgeField::axpy");
        for (a, b) in self.x.iter_mut().zip(&other.x) {
            *a += alpha * b;
        }
        for (a, b) in self.y.iter_mut().zip(&other.y) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for a in self.x.iter_mut().chain(self.y.iter_mut()) {
            *a *= alpha;
        }
    }

    /// Face-wise division by another edge field (e.g. `D / eps`).
    pub fn component_div(&self, den: &EdgeField) -> EdgeField {
        assert_same_grid(&self.grid, &den.grid, "EdgeField::component_div");
        let x = self.x.iter().zip(&den.x).map(|(a, b)| a / b).collect();
        let y = self.y.iter().zip(&den.y).map(|(a, b)| a / b).collect();
        EdgeField { grid: self.grid, x, y }
    }
}

impl std::ops::Add<&EdgeField> for &EdgeField {
    type Output = EdgeField;
    fn add(self, rhs: &EdgeField) -> EdgeField {
        let mut out = self.clone();
        out.axpy(1.0, rhs);
        out
    }
}

impl std::ops::Sub<&EdgeField> for &EdgeField {
    type Output = EdgeField;
    fn sub(self, rhs: &EdgeField) -> EdgeField {
        let mut out = self.clone();
        out.axpy(-1.0, rhs);
        out
    }
}

/// Scalar field stored at cell vertices: `values[i*ny+j]` lives at the corner
/// shared by cells `(i, j)`, `(i+1, j)`, `(i, j+1)`, `(i+1, j+1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexField {
    grid: Grid,
    values: Vec<f64>,
}

impl VertexField {
    pub fn zeros(grid: Grid) -> Self {
        Self { grid, values: vec![0.0; grid.ncells()] }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid.ncells(), "vertex count does not match grid");
        assert_finite(&values, "VertexField::from_values");
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.grid.idx(i, j);
        self.values[k] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// p-norm selector for the discrete norms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PNorm {
    One,
    Two,
    Inf,
}

/// Cell inner product `(a, b) = h^2 sum a_ij b_ij`.
pub fn inner_cell(a: &CellField, b: &CellField) -> f64 {
    assert_same_grid(&a.grid, &b.grid, "inner_cell");
    let s: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    a.grid.h() * a.grid.h() * s
}

/// Face inner product; under periodicity the paper's averaged form counts
/// every face exactly twice with weight `h^2/2`, so it reduces to a plain
/// `h^2` sum over all distinct faces of both families.
pub fn inner_edge(f: &EdgeField, g: &EdgeField) -> f64 {
    assert_same_grid(&f.grid, &g.grid, "inner_edge");
    let sx: f64 = f.x.iter().zip(&g.x).map(|(x, y)| x * y).sum();
    let sy: f64 = f.y.iter().zip(&g.y).map(|(x, y)| x * y).sum();
    f.grid.h() * f.grid.h() * (sx + sy)
}

pub fn norm_cell(a: &CellField, p: PNorm) -> f64 {
    let h2 = a.grid.h() * a.grid.h();
    match p {
        PNorm::One => h2 * a.values.iter().map(|v| v.abs()).sum::<f64>(),
        PNorm::Two => inner_cell(a, a).sqrt(),
        PNorm::Inf => a.max_abs(),
    }
}

pub fn norm_edge(f: &EdgeField, p: PNorm) -> f64 {
    let h2 = f.grid.h() * f.grid.h();
    match p {
        PNorm::One => h2 * f.x.iter().chain(f.y.iter()).map(|v| v.abs()).sum::<f64>(),
        PNorm::Two => inner_edge(f, f).sqrt(),
        PNorm::Inf => f.max_abs(),
    }
}
