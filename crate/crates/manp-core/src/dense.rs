//! Dense assembly of the discrete operators on tiny grids.
//!
//! Only intended for grids of at most a few hundred cells: oracle checks of
//! the spectral path and the dense-inverse positivity diagnostic (Eq. (27)
//! style conditions). Production-size grids never touch this module.

use nalgebra::{DMatrix, DVector};

use crate::grid::{CellField, EdgeField, Grid};
use crate::physics::bernoulli;

/// Flatten a cell field into a vector with the same `i * ny + j` layout used
/// by the field storage.
pub fn to_vector(f: &CellField) -> DVector<f64> {
    DVector::from_column_slice(f.values())
}

pub fn to_field(grid: Grid, v: &DVector<f64>) -> CellField {
    CellField::from_values(grid, v.as_slice().to_vec())
}

/// Assemble the matrix of any linear cell-field operator by applying it to
/// unit vectors (column by column).
pub fn assemble(grid: Grid, mut op: impl FnMut(&CellField) -> CellField) -> DMatrix<f64> {
    let n = grid.ncells();
    let mut mat = DMatrix::zeros(n, n);
    for col in 0..n {
        let mut e = vec![0.0; n];
        e[col] = 1.0;
        let out = op(&CellField::from_values(grid, e));
        for (row, v) in out.values().iter().enumerate() {
            mat[(row, col)] = *v;
        }
    }
    mat
}

/// Direct stencil assembly of the periodic five-point Laplacian,
/// independent of the `operators` module.
pub fn assemble_laplacian(grid: Grid) -> DMatrix<f64> {
    let n = grid.ncells();
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    let mut mat = DMatrix::zeros(n, n);
    for i in 0..grid.nx() {
        for j in 0..grid.ny() {
            let row = grid.idx(i, j);
            mat[(row, row)] -= 4.0 * inv_h2;
            mat[(row, grid.idx(grid.xp(i), j))] += inv_h2;
            mat[(row, grid.idx(grid.xm(i), j))] += inv_h2;
            mat[(row, grid.idx(i, grid.yp(j)))] += inv_h2;
            mat[(row, grid.idx(i, grid.ym(j)))] += inv_h2;
        }
    }
    mat
}

/// Direct row-by-row assembly of the convection operator `M_h` from its
/// five-point structure: off-diagonals `B(+-dg) kappa/h^2`, diagonal the
/// negative sum of the outflow weights.
pub fn assemble_convection(grid: Grid, dg: &EdgeField, kappa: f64) -> DMatrix<f64> {
    let n = grid.ncells();
    let c = kappa / (grid.h() * grid.h());
    let mut mat = DMatrix::zeros(n, n);
    for i in 0..grid.nx() {
        let ip = grid.xp(i);
        let im = grid.xm(i);
        for j in 0..grid.ny() {
            let jp = grid.yp(j);
            let jm = grid.ym(j);
            let row = grid.idx(i, j);
            let dg_e = dg.x_at(i, j); // face (i+1/2, j)
            let dg_w = dg.x_at(im, j); // face (i-1/2, j)
            let dg_n = dg.y_at(i, j); // face (i, j+1/2)
            let dg_s = dg.y_at(i, jm); // face (i, j-1/2)
            mat[(row, grid.idx(ip, j))] += c * bernoulli(-dg_e);
            mat[(row, grid.idx(im, j))] += c * bernoulli(dg_w);
            mat[(row, grid.idx(i, jp))] += c * bernoulli(-dg_n);
            mat[(row, grid.idx(i, jm))] += c * bernoulli(dg_s);
            mat[(row, row)] -=
                c * (bernoulli(dg_e) + bernoulli(-dg_w) + bernoulli(dg_n) + bernoulli(-dg_s));
        }
    }
    mat
}

/// Matrix function of a symmetric matrix via eigendecomposition.
pub fn symmetric_matrix_function(mat: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let eig = nalgebra::SymmetricEigen::new(mat.clone());
    let vals = eig.eigenvalues.map(f);
    &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose()
}

/// `max_i sum_j |A_ij|`
pub fn inf_norm(mat: &DMatrix<f64>) -> f64 {
    (0..mat.nrows())
        .map(|i| (0..mat.ncols()).map(|j| mat[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn min_entry(mat: &DMatrix<f64>) -> f64 {
    mat.iter().fold(f64::INFINITY, |m, &v| m.min(v))
}

pub fn invert(mat: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    mat.clone().try_inverse()
}

pub fn solve(mat: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    mat.clone().lu().solve(rhs)
}
