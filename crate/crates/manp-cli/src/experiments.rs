//! Convergence suites (Cauchy-difference and manufactured-solution) and the
//! dry-run condition check.

use std::fs::{self, File};
use std::io::{BufWriter, Write};

use manp_core::diagnostics::{energy_condition_check, EnergyConditionReport};
use manp_core::etd::{
    contraction_check, positivity_condition_check, ContractionReport, PositivityCheck,
    DENSE_GRID_LIMIT,
};
use manp_core::grid::{norm_cell, CellField, Grid, PNorm};
use manp_core::physics::{dg_edges, excess_potential};

use crate::config::{Experiment, RunConfig};
use crate::sim::{run, RunOutput, Simulation};
use crate::{mms, RunError};

/// Average the four fine cells inside each coarse cell (the bilinear
/// projection onto coarse cell centers for this staggering). The fine grid
/// must be exactly twice as fine in each direction.
pub fn restrict_fine_to_coarse(fine: &CellField) -> Result<CellField, RunError> {
    let fg = *fine.grid();
    if fg.nx() % 2 != 0 || fg.ny() % 2 != 0 {
        return Err(RunError::Config(format!(
            "restriction needs even grid sizes, got {}x{}",
            fg.nx(),
            fg.ny()
        )));
    }
    let cg = Grid::new(fg.nx() / 2, fg.ny() / 2, fg.lx(), fg.ly(), fg.x0(), fg.y0())?;
    let mut out = CellField::zeros(cg);
    for i in 0..cg.nx() {
        for j in 0..cg.ny() {
            let s = fine.at(2 * i, 2 * j)
                + fine.at(2 * i + 1, 2 * j)
                + fine.at(2 * i, 2 * j + 1)
                + fine.at(2 * i + 1, 2 * j + 1);
            out.set(i, j, 0.25 * s);
        }
    }
    Ok(out)
}

/// One row of a convergence table; `order_*` is empty on the first row.
#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    pub h: f64,
    pub err_inf: f64,
    pub order_inf: Option<f64>,
    pub err_2: f64,
    pub order_2: Option<f64>,
}

/// Per-species tables, species-major.
pub type ConvergenceTables = Vec<Vec<ConvergenceRow>>;

/// Outcome of a convergence suite: the tables plus every mesh's full run
/// output (diagnostics rows and final state), mesh-major in the configured
/// order.
pub struct SuiteOutput {
    pub tables: ConvergenceTables,
    pub runs: Vec<RunOutput>,
}

fn attach_orders(rows: &mut [ConvergenceRow]) {
    for k in 1..rows.len() {
        rows[k].order_inf = Some((rows[k - 1].err_inf / rows[k].err_inf).log2());
        rows[k].order_2 = Some((rows[k - 1].err_2 / rows[k].err_2).log2());
    }
}

pub fn write_table_csv(path: &std::path::Path, rows: &[ConvergenceRow]) -> Result<(), RunError> {
    let mut f = BufWriter::new(File::create(path)?);
    writeln!(f, "h,err_inf,order_inf,err_2,order_2")?;
    for r in rows {
        let oi = r.order_inf.map(|v| format!("{v}")).unwrap_or_default();
        let o2 = r.order_2.map(|v| format!("{v}")).unwrap_or_default();
        writeln!(f, "{},{},{},{},{}", r.h, r.err_inf, oi, r.err_2, o2)?;
    }
    Ok(())
}

fn mesh_config(base: &RunConfig, n: usize) -> RunConfig {
    let mut cfg = base.clone();
    cfg.experiment = Experiment::Run;
    cfg.nx = n;
    cfg.ny = n;
    let h = base.lx / n as f64;
    cfg.dt = base.dt_factor * h * h;
    cfg.output_dir = base.output_dir.join(format!("mesh_{n:04}"));
    cfg.snapshots = 0;
    cfg
}

fn run_mesh(base: &RunConfig, n: usize) -> Result<RunOutput, RunError> {
    let cfg = mesh_config(base, n);
    run(&cfg)
}

/// Cauchy-difference study: run every mesh in `config.meshes`, restrict each
/// finer solution onto the next coarser grid and difference them.
pub fn converge_cauchy(config: &RunConfig) -> Result<SuiteOutput, RunError> {
    fs::create_dir_all(&config.output_dir)?;
    let nsp = config.species.len();
    let mut runs: Vec<RunOutput> = Vec::new();
    for &n in &config.meshes {
        runs.push(run_mesh(config, n)?);
    }
    let mut tables: ConvergenceTables = vec![Vec::new(); nsp];
    for pair in 0..config.meshes.len() - 1 {
        let coarse_h = config.lx / config.meshes[pair] as f64;
        for ell in 0..nsp {
            let restricted = restrict_fine_to_coarse(&runs[pair + 1].sim.state.c[ell])?;
            let delta = &runs[pair].sim.state.c[ell] - &restricted;
            tables[ell].push(ConvergenceRow {
                h: coarse_h,
                err_inf: norm_cell(&delta, PNorm::Inf),
                order_inf: None,
                err_2: norm_cell(&delta, PNorm::Two),
                order_2: None,
            });
        }
    }
    for (ell, t) in tables.iter_mut().enumerate() {
        attach_orders(t);
        write_table_csv(&config.output_dir.join(format!("cauchy_c{}.csv", ell + 1)), t)?;
    }
    Ok(SuiteOutput { tables, runs })
}

/// Manufactured-solution study: run every mesh and compare the final
/// concentrations against the exact solution at `t_final`.
pub fn converge_mms(config: &RunConfig) -> Result<SuiteOutput, RunError> {
    fs::create_dir_all(&config.output_dir)?;
    let nsp = config.species.len();
    let mut tables: ConvergenceTables = vec![Vec::new(); nsp];
    let mut runs: Vec<RunOutput> = Vec::new();
    for &n in &config.meshes {
        let cfg = mesh_config(config, n);
        let out = run(&cfg)?;
        let g = out.sim.grid();
        let t_end = out.sim.state.t;
        for ell in 0..nsp {
            let exact = CellField::from_fn(g, |x, y| mms::c_exact(x, y, t_end));
            let delta = &out.sim.state.c[ell] - &exact;
            tables[ell].push(ConvergenceRow {
                h: g.h(),
                err_inf: norm_cell(&delta, PNorm::Inf),
                order_inf: None,
                err_2: norm_cell(&delta, PNorm::Two),
                order_2: None,
            });
        }
        runs.push(out);
    }
    for (ell, t) in tables.iter_mut().enumerate() {
        attach_orders(t);
        write_table_csv(&config.output_dir.join(format!("mms_c{}.csv", ell + 1)), t)?;
    }
    Ok(SuiteOutput { tables, runs })
}

/// Dry-run condition checks (Eq. 24 solvability, Eq. 27 positivity, Eq. 31
/// energy dissipation) evaluated on the initial state.
pub struct CheckReport {
    pub contraction: ContractionReport,
    pub positivity: PositivityCheck,
    pub energy: EnergyConditionReport,
    pub init_gauss_res: f64,
    pub init_curl_res: f64,
    pub init_relax_sweeps: usize,
}

pub fn check(config: &RunConfig) -> Result<CheckReport, RunError> {
    let sim = Simulation::new(config)?;
    let params = &sim.params;
    let mut dgs = Vec::new();
    for ell in 0..params.nspecies() {
        let mucr = excess_potential(ell, &sim.state.c, params)?;
        dgs.push(dg_edges(ell, &sim.state.d, &mucr, params));
    }
    let grid = sim.grid();
    let contraction = contraction_check(&dgs, config.dt, grid.h(), params.kappa);
    let positivity = positivity_condition_check(
        &dgs,
        config.dt,
        grid,
        params.kappa,
        params.lambda,
        DENSE_GRID_LIMIT,
    );
    let energy = energy_condition_check(&sim.state.c, &dgs, config.dt, params);
    let row = sim.current_row(&[], sim.init_relax_sweeps, 0.0, 0.0)?;
    Ok(CheckReport {
        contraction,
        positivity,
        energy,
        init_gauss_res: row.gauss_res,
        init_curl_res: row.curl_res,
        init_relax_sweeps: sim.init_relax_sweeps,
    })
}


impl CheckReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let c = &self.contraction;
        out.push_str(&format!(
            "solvability (dt/h^2 bound): {} margin={:.4e} threshold(dt/h^2)={:.4e} max|dg|={:.4e}\n",
            if c.ok { "ok" } else { "VIOLATED" },
            c.margin,
            c.threshold,
            c.max_dg
        ));
        match &self.positivity {
            PositivityCheck::Evaluated { lhs, alpha_min, rhs, ok } => out.push_str(&format!(
                "positivity (dense): {} lhs={lhs:.4e} alpha_min={alpha_min:.4e} rhs={rhs:.4e}\n",
                if *ok { "ok" } else { "not satisfied" }
            )),
            PositivityCheck::NotEvaluated { reason } => {
                out.push_str(&format!("positivity (dense): {reason}\n"))
            }
        }
        let e = &self.energy;
        out.push_str(&format!(
            "energy dissipation: {} lhs={:.4e} rhs={:.4e} max|dg|={:.4e} c_max={:.4}\n",
            if e.ok { "ok" } else { "not satisfied (empirical monitoring applies)" },
            e.lhs,
            e.rhs,
            e.max_dg,
            e.c_max
        ));
        out.push_str(&format!(
            "initial state: gauss_res={:.3e} curl_res={:.3e} relax_sweeps={}\n",
            self.init_gauss_res, self.init_curl_res, self.init_relax_sweeps
        ));
        out
    }
}
