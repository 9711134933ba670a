//! Implicit ETD1 concentration update solved by Picard iteration, plus the
//! contraction (Eq. 24 style) and positivity (Eq. 27 style) condition monitors.
//!
//! The update solves the linear fixed point
//! `c = c^n + dt * f_e(dt L_h) (M_h^n c + s)`,
//! where `M_h^n` is the frozen convection operator of the step and `s` an
//! optional explicit source (used by manufactured-solution runs).

use thiserror::Error;

use crate::grid::{CellField, EdgeField, Grid};
use crate::physics::{
    bernoulli, dg_edges, excess_potential, max_abs_dg, ConvectionOp, ModelParams, PhysicsError,
    SimState,
};
use crate::dense;
use crate::spectral::{MultiplierKind, SpectralError, SpectralMultipliers, Spectrum};

#[derive(Debug, Error)]
pub enum EtdError {
    #[error("Picard iteration did not converge in {iters} iterations (last diff {last_diff:e}, tol {tol:e}); contraction condition likely violated")]
    PicardDiverged { iters: usize, last_diff: f64, tol: f64 },
    #[error("NaN detected in Picard iterate {iter}")]
    NanDetected { iter: usize },
    #[error("concentration positivity lost for species {species} at cell ({i}, {j}): {value:e}")]
    PositivityLost { species: usize, i: usize, j: usize, value: f64 },
    #[error(transparent)]
    Physics(#[from] PhysicsError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// Convergence record of one Picard solve.
#[derive(Debug, Clone, Copy)]
pub struct PicardStats {
    pub iters: usize,
    pub last_diff: f64,
    /// max-norm residual of the fixed-point equation at the returned iterate
    pub residual: f64,
    /// largest observed ratio of successive difference norms
    pub max_ratio: f64,
}

/// Result of one implicit (or explicit) concentration update for one species.
pub struct PicardOutcome {
    pub c: CellField,
    /// `M_h^n c + s` evaluated at the returned concentration
    pub conv: CellField,
    /// spectrum of `conv`, reusable for the in-step time integral
    pub conv_spec: Spectrum,
    pub stats: PicardStats,
}

/// Solver knobs with the scheme defaults.
#[derive(Debug, Clone, Copy)]
pub struct PicardOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self { tol: 1e-12, max_iter: 100 }
    }
}

fn max_abs_diff(a: &CellField, b: &CellField) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Fixed-point solve of the implicit ETD1 update.
///
/// The initial iterate defaults to `c^n`; an explicit `initial` (e.g. a
/// linear extrapolation from the previous step) only changes the path to the
/// unique fixed point, not the limit.
#[allow(clippy::too_many_arguments)]
pub fn picard_solve(
    c_n: &CellField,
    conv_op: &ConvectionOp,
    dt: f64,
    m: &SpectralMultipliers,
    source: Option<&CellField>,
    opts: PicardOptions,
    initial: Option<&CellField>,
) -> Result<PicardOutcome, EtdError> {
    assert!(dt > 0.0, "dt must be positive");
    let mut c_k = initial.unwrap_or(c_n).clone();
    let mut prev_diff = f64::INFINITY;
    let mut max_ratio = 0.0_f64;

    for iter in 1..=opts.max_iter {
        let mut v = conv_op.apply(&c_k);
        if let Some(s) = source {
            v.axpy(1.0, s);
        }
        let fe_v = m.apply(MultiplierKind::Fe, dt, &v)?;
        let mut c_next = c_n.clone();
        c_next.axpy(dt, &fe_v);
        if c_next.has_nan() {
            return Err(EtdError::NanDetected { iter });
        }
        let diff = max_abs_diff(&c_next, &c_k);
        if iter >= 2 && prev_diff > 0.0 {
            max_ratio = max_ratio.max(diff / prev_diff);
        }
        let thresh = opts.tol * (1.0 + c_k.max_abs());
        c_k = c_next;
        if diff <= thresh {
            // converged; evaluate the convection term at the returned iterate
            // and the true fixed-point residual
            let mut conv = conv_op.apply(&c_k);
            if let Some(s) = source {
                conv.axpy(1.0, s);
            }
            let conv_spec = m.forward(&conv);
            let fe_conv = m.apply_from_spectrum(MultiplierKind::Fe, dt, &conv_spec)?;
            let mut res_field = c_n.clone();
            res_field.axpy(dt, &fe_conv);
            let residual = max_abs_diff(&res_field, &c_k);
            return Ok(PicardOutcome {
                c: c_k,
                conv,
                conv_spec,
                stats: PicardStats { iters: iter, last_diff: diff, residual, max_ratio },
            });
        }
        prev_diff = diff;
    }
    Err(EtdError::PicardDiverged { iters: opts.max_iter, last_diff: prev_diff, tol: opts.tol })
}

/// One-shot explicit ETD1 update `c^{n+1} = c^n + dt f_e(dt L_h)(M_h^n c^n + s)`.
pub fn explicit_update(
    c_n: &CellField,
    conv_op: &ConvectionOp,
    dt: f64,
    m: &SpectralMultipliers,
    source: Option<&CellField>,
) -> Result<PicardOutcome, EtdError> {
    let mut conv = conv_op.apply(c_n);
    if let Some(s) = source {
        conv.axpy(1.0, s);
    }
    let conv_spec = m.forward(&conv);
    let fe_v = m.apply_from_spectrum(MultiplierKind::Fe, dt, &conv_spec)?;
    let mut c_next = c_n.clone();
    c_next.axpy(dt, &fe_v);
    if c_next.has_nan() {
        return Err(EtdError::NanDetected { iter: 1 });
    }
    Ok(PicardOutcome {
        c: c_next,
        conv,
        conv_spec,
        stats: PicardStats { iters: 1, last_diff: 0.0, residual: 0.0, max_ratio: 0.0 },
    })
}

/// Eq. (24) style solvability condition: `dt/h^2 < 1 / (16 kappa B(-max|dg|))`.
#[derive(Debug, Clone, Copy)]
pub struct ContractionReport {
    pub ok: bool,
    /// ratio of left to right side; contraction requires `margin < 1`
    pub margin: f64,
    /// the admissible `dt/h^2` threshold
    pub threshold: f64,
    pub max_dg: f64,
}

pub fn contraction_check(dgs: &[EdgeField], dt: f64, h: f64, kappa: f64) -> ContractionReport {
    let max_dg = max_abs_dg(dgs);
    let threshold = 1.0 / (16.0 * kappa * bernoulli(-max_dg));
    let margin = (dt / (h * h)) / threshold;
    ContractionReport { ok: margin < 1.0, margin, threshold, max_dg }
}

/// Eq. (27) style positivity condition, evaluated by dense inversion of
/// `I - dt M_h^n` on tiny grids only.
#[derive(Debug, Clone)]
pub enum PositivityCheck {
    Evaluated { lhs: f64, alpha_min: f64, rhs: f64, ok: bool },
    NotEvaluated { reason: String },
}

pub const DENSE_GRID_LIMIT: usize = 10;

pub fn positivity_condition_check(
    dgs: &[EdgeField],
    dt: f64,
    grid: Grid,
    kappa: f64,
    lambda: f64,
    dense_grid_limit: usize,
) -> PositivityCheck {
    if grid.nx() > dense_grid_limit || grid.ny() > dense_grid_limit {
        return PositivityCheck::NotEvaluated {
            reason: format!(
                "not evaluated (dense-only diagnostic, grid {}x{} exceeds {}x{})",
                grid.nx(),
                grid.ny(),
                dense_grid_limit,
                dense_grid_limit
            ),
        };
    }
    let n = grid.ncells();
    let mut alpha_min = f64::INFINITY;
    for dg in dgs {
        let m = dense::assemble_convection(grid, dg, kappa);
        let a = nalgebra::DMatrix::identity(n, n) - dt * &m;
        let inv = match dense::invert(&a) {
            Some(inv) => inv,
            None => {
                return PositivityCheck::NotEvaluated {
                    reason: "dense matrix I - dt M is singular".to_string(),
                }
            }
        };
        alpha_min = alpha_min.min(dense::min_entry(&inv));
    }
    let lhs = (4.0 * kappa / (grid.h() * grid.h()) + lambda / 4.0) * dt;
    let rhs = alpha_min / (4.0 + 2.0 * alpha_min);
    PositivityCheck::Evaluated { lhs, alpha_min, rhs, ok: alpha_min > 0.0 && lhs < rhs }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeStepMode {
    Implicit,
    Explicit,
}

/// Output of one concentration step over all species.
pub struct ConcentrationStep {
    pub c_new: Vec<CellField>,
    /// fluxes `J^{l,n}` consistent with the update (evaluated at the
    /// concentration the convection operator acted on), used by the
    /// displacement predictor
    pub fluxes: Vec<EdgeField>,
    pub dgs: Vec<EdgeField>,
    /// `M_h^n c + s` per species at the updated concentration
    pub convs: Vec<CellField>,
    pub conv_specs: Vec<Spectrum>,
    pub picard: Vec<PicardStats>,
}

/// Advance all species by one ETD1 step (Algorithm step 1).
///
/// `face_sources`, when present, are per-species manufactured face fields
/// `g^l(t_n)` entering the flux as `-kappa g`; `cell_sources` are the
/// matching explicit sources of the concentration equation (`kappa div g^l`,
/// analytic or discrete at the caller's choice).
#[allow(clippy::too_many_arguments)]
pub fn step_concentrations(
    state: &SimState,
    params: &ModelParams,
    m: &SpectralMultipliers,
    dt: f64,
    mode: TimeStepMode,
    face_sources: Option<&[EdgeField]>,
    cell_sources: Option<&[CellField]>,
    opts: PicardOptions,
    initial_guesses: Option<&[CellField]>,
) -> Result<ConcentrationStep, EtdError> {
    let nsp = params.nspecies();
    assert_eq!(state.c.len(), nsp, "state species count mismatch");
    let mut c_new = Vec::with_capacity(nsp);
    let mut fluxes = Vec::with_capacity(nsp);
    let mut dgs = Vec::with_capacity(nsp);
    let mut convs = Vec::with_capacity(nsp);
    let mut conv_specs = Vec::with_capacity(nsp);
    let mut picard = Vec::with_capacity(nsp);

    for ell in 0..nsp {
        let mucr = excess_potential(ell, &state.c, params)?;
        let dg = dg_edges(ell, &state.d, &mucr, params);
        let op = ConvectionOp::new(&dg, params.kappa);
        let gsrc = face_sources.map(|s| &s[ell]);
        let cell_source = cell_sources.map(|s| &s[ell]);
        let outcome = match mode {
            TimeStepMode::Implicit => picard_solve(
                &state.c[ell],
                &op,
                dt,
                m,
                cell_source,
                opts,
                initial_guesses.map(|g| &g[ell]),
            )?,
            TimeStepMode::Explicit => explicit_update(&state.c[ell], &op, dt, m, cell_source)?,
        };
        // the flux consistent with the update: implicit mode applied M to
        // c^{n+1}, explicit mode to c^n
        let c_for_flux = match mode {
            TimeStepMode::Implicit => &outcome.c,
            TimeStepMode::Explicit => &state.c[ell],
        };
        fluxes.push(op.flux_of(c_for_flux, gsrc));

        let g = *outcome.c.grid();
        for i in 0..g.nx() {
            for j in 0..g.ny() {
                let v = outcome.c.at(i, j);
                if v <= 0.0 {
                    return Err(EtdError::PositivityLost { species: ell, i, j, value: v });
                }
            }
        }
        c_new.push(outcome.c);
        convs.push(outcome.conv);
        conv_specs.push(outcome.conv_spec);
        picard.push(outcome.stats);
        dgs.push(dg);
    }
    Ok(ConcentrationStep { c_new, fluxes, dgs, convs, conv_specs, picard })
}
