//! Local curl-free relaxation: lexicographic Gauss-Seidel sweeps over cells,
//! each applying the explicit four-face update that zeroes the vertex curl of
//! `D / eps` while leaving every cell divergence untouched.
//!
//! Each update is the exact minimizer of the quadratic functional
//! `F_pot = h^2 kappa^2 sum D^2 / eps` along its one-parameter family, so the
//! energy is non-increasing update by update and the unique fixed point is
//! the curl-free field with the same Gauss data.

use thiserror::Error;

use crate::grid::EdgeField;

#[derive(Debug, Error)]
pub enum CurlFreeError {
    #[error("curl-free relaxation exhausted {} sweeps (max |eta|/h = {:e}, tol {tol:e})", report.sweeps, report.final_max_eta)]
    SweepsExhausted {
        /// the partially relaxed field, for post-mortem dumps
        d: EdgeField,
        report: RelaxReport,
        tol: f64,
    },
}

/// The electrostatic functional `F_pot = h^2 kappa^2 sum_faces D^2 / eps`.
pub fn f_pot(d: &EdgeField, eps_edge: &EdgeField, kappa: f64) -> f64 {
    let g = d.grid();
    assert_eq!(g, eps_edge.grid(), "grid mismatch in f_pot");
    let mut s = 0.0;
    for (v, e) in d.xs().iter().zip(eps_edge.xs()) {
        s += v * v / e;
    }
    for (v, e) in d.ys().iter().zip(eps_edge.ys()) {
        s += v * v / e;
    }
    g.h() * g.h() * kappa * kappa * s
}

/// Face increment `eta / h` of the local update at cell `(i, j)` (the vertex
/// shared with cells `(i+1, j)`, `(i, j+1)`, `(i+1, j+1)`):
///
/// applying `+eta/h` to the two entering faces and `-eta/h` to the two
/// leaving faces makes the vertex curl of `D / eps` vanish exactly.
pub fn local_eta(i: usize, j: usize, d: &EdgeField, eps_edge: &EdgeField) -> f64 {
    let g = *d.grid();
    let ip = g.xp(i);
    let jp = g.yp(j);
    let ex_b = eps_edge.x_at(i, j);
    let ex_t = eps_edge.x_at(i, jp);
    let ey_l = eps_edge.y_at(i, j);
    let ey_r = eps_edge.y_at(ip, j);
    let num = d.x_at(i, j) / ex_b - d.x_at(i, jp) / ex_t + d.y_at(ip, j) / ey_r
        - d.y_at(i, j) / ey_l;
    let den = 1.0 / ex_b + 1.0 / ex_t + 1.0 / ey_l + 1.0 / ey_r;
    -num / den
}

/// Relaxation report; `energy_trace[0]` is the incoming `F_pot`, followed by
/// one entry per completed sweep.
#[derive(Debug, Clone)]
pub struct RelaxReport {
    pub sweeps: usize,
    pub final_max_eta: f64,
    pub energy_trace: Vec<f64>,
    /// heuristic bound on the remaining curl residual:
    /// `4 * final_max_eta * max(1/eps) / h`
    pub curl_bound: f64,
}

/// Sweep lexicographically (i outer, j inner, freshly updated faces visible
/// to later cells) until `max |eta|/h <= tol_eta`. The divergence of every
/// cell is invariant under each update; `F_pot` never increases.
pub fn relax(
    mut d: EdgeField,
    eps_edge: &EdgeField,
    kappa: f64,
    tol_eta: f64,
    max_sweeps: usize,
) -> Result<(EdgeField, RelaxReport), CurlFreeError> {
    let g = *d.grid();
    assert_eq!(&g, eps_edge.grid(), "grid mismatch in relax");
    assert!(tol_eta > 0.0, "tol_eta must be positive");
    let (nx, ny) = (g.nx(), g.ny());
    let inv_ex: Vec<f64> = eps_edge.xs().iter().map(|e| 1.0 / e).collect();
    let inv_ey: Vec<f64> = eps_edge.ys().iter().map(|e| 1.0 / e).collect();
    let max_inv_eps = inv_ex.iter().chain(&inv_ey).fold(0.0_f64, |m, &v| m.max(v));

    let mut energy_trace = vec![f_pot(&d, eps_edge, kappa)];
    let h2k2 = g.h() * g.h() * kappa * kappa;
    let mut sweeps = 0;
    let mut max_eta = f64::INFINITY;

    let (xs, ys) = d.parts_mut();
    while sweeps < max_sweeps {
        sweeps += 1;
        max_eta = 0.0;
        for i in 0..nx {
            let row = i * ny;
            let row_r = (if i + 1 == nx { 0 } else { i + 1 }) * ny;
            for j in 0..ny {
                let base = row + j;
                let top = row + if j + 1 == ny { 0 } else { j + 1 };
                let right = row_r + j;
                let ie_b = inv_ex[base];
                let ie_t = inv_ex[top];
                let ie_l = inv_ey[base];
                let ie_r = inv_ey[right];
                let num = xs[base] * ie_b - xs[top] * ie_t + ys[right] * ie_r - ys[base] * ie_l;
                let eta = -num / (ie_b + ie_t + ie_l + ie_r);
                xs[base] += eta;
                xs[top] -= eta;
                ys[base] -= eta;
                ys[right] += eta;
                let a = eta.abs();
                if a > max_eta {
                    max_eta = a;
                }
            }
        }
        // F_pot from the working slices
        let mut s = 0.0;
        for (v, ie) in xs.iter().zip(&inv_ex) {
            s += v * v * ie;
        }
        for (v, ie) in ys.iter().zip(&inv_ey) {
            s += v * v * ie;
        }
        energy_trace.push(h2k2 * s);
        if max_eta <= tol_eta {
            let report = RelaxReport {
                sweeps,
                final_max_eta: max_eta,
                energy_trace,
                curl_bound: 4.0 * max_eta * max_inv_eps / g.h(),
            };
            return Ok((d, report));
        }
    }
    let report = RelaxReport {
        sweeps,
        final_max_eta: max_eta,
        curl_bound: 4.0 * max_eta * max_inv_eps / g.h(),
        energy_trace,
    };
    Err(CurlFreeError::SweepsExhausted { d, report, tol: tol_eta })
}

/// Max-norm of the vertex curl of `D / eps` (the quantity the relaxation
/// drives to zero). Shared by diagnostics.
pub fn curl_residual(d: &EdgeField, eps_edge: &EdgeField) -> f64 {
    crate::operators::curl2d(&d.component_div(eps_edge)).max_abs()
}
