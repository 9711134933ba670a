//! Central-difference operators on the staggered periodic mesh:
//! divergence, gradient, Laplacian and the 2-D curl.
//!
//! All stencils carry their `1/h` factors exactly as defined; no rescaling.

use crate::grid::{CellField, EdgeField, VertexField};

/// Discrete divergence, face field to cell field:
/// `(div f)_ij = (fx_i - fx_{i-1})/h + (fy_j - fy_{j-1})/h` with periodic wrap.
pub fn divergence(f: &EdgeField) -> CellField {
    let g = *f.grid();
    let mut out = CellField::zeros(g);
    let inv_h = 1.0 / g.h();
    for i in 0..g.nx() {
        let im = g.xm(i);
        for j in 0..g.ny() {
            let jm = g.ym(j);
            let v = (f.x_at(i, j) - f.x_at(im, j) + f.y_at(i, j) - f.y_at(i, jm)) * inv_h;
            out.set(i, j, v);
        }
    }
    out
}

/// Discrete gradient, cell field to face field:
/// `(Dx phi)_{i+1/2,j} = (phi_{i+1,j} - phi_{i,j})/h`, y family analogous.
pub fn gradient(phi: &CellField) -> EdgeField {
    let g = *phi.grid();
    let mut out = EdgeField::zeros(g);
    let inv_h = 1.0 / g.h();
    for i in 0..g.nx() {
        let ip = g.xp(i);
        for j in 0..g.ny() {
            let jp = g.yp(j);
            out.set_x(i, j, (phi.at(ip, j) - phi.at(i, j)) * inv_h);
            out.set_y(i, j, (phi.at(i, jp) - phi.at(i, j)) * inv_h);
        }
    }
    out
}

/// Standard five-point Laplacian, computed as `divergence(gradient(phi))`
/// written out as a single stencil (the composition is exact).
pub fn laplacian(phi: &CellField) -> CellField {
    let g = *phi.grid();
    let mut out = CellField::zeros(g);
    let inv_h2 = 1.0 / (g.h() * g.h());
    for i in 0..g.nx() {
        let ip = g.xp(i);
        let im = g.xm(i);
        for j in 0..g.ny() {
            let jp = g.yp(j);
            let jm = g.ym(j);
            let v = (phi.at(ip, j) + phi.at(im, j) + phi.at(i, jp) + phi.at(i, jm)
                - 4.0 * phi.at(i, j))
                * inv_h2;
            out.set(i, j, v);
        }
    }
    out
}

/// 2-D discrete curl, face field to vertex field:
/// `(curl f)_{i+1/2,j+1/2} = (fy_{i+1,j+1/2} - fy_{i,j+1/2})/h - (fx_{i+1/2,j+1} - fx_{i+1/2,j})/h`.
pub fn curl2d(f: &EdgeField) -> VertexField {
    let g = *f.grid();
    let mut out = VertexField::zeros(g);
    let inv_h = 1.0 / g.h();
    for i in 0..g.nx() {
        let ip = g.xp(i);
        for j in 0..g.ny() {
            let jp = g.yp(j);
            let v = (f.y_at(ip, j) - f.y_at(i, j) - (f.x_at(i, jp) - f.x_at(i, j))) * inv_h;
            out.set(i, j, v);
        }
    }
    out
}

/// Componentwise Laplacian of a face field (each family treated as a periodic
/// scalar array on its own lattice). Used by the commutation identity
/// `lap(div u) = div(lap u)`.
pub fn laplacian_edge(f: &EdgeField) -> EdgeField {
    let g = *f.grid();
    let mut out = EdgeField::zeros(g);
    let inv_h2 = 1.0 / (g.h() * g.h());
    for i in 0..g.nx() {
        let ip = g.xp(i);
        let im = g.xm(i);
        for j in 0..g.ny() {
            let jp = g.yp(j);
            let jm = g.ym(j);
            let vx = (f.x_at(ip, j) + f.x_at(im, j) + f.x_at(i, jp) + f.x_at(i, jm)
                - 4.0 * f.x_at(i, j))
                * inv_h2;
            let vy = (f.y_at(ip, j) + f.y_at(im, j) + f.y_at(i, jp) + f.y_at(i, jm)
                - 4.0 * f.y_at(i, j))
                * inv_h2;
            out.set_x(i, j, vx);
            out.set_y(i, j, vy);
        }
    }
    out
}
