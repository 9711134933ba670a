use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use manp_cli::config::{Experiment, RunConfig};
use manp_cli::{experiments, sim, RunError};

#[derive(Parser)]
#[command(name = "manp", about = "Structure-preserving implicit ETD solver for Maxwell-Ampere Nernst-Planck systems", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Time-step a configured system to t_final, writing diagnostics and snapshots
    Run { config: PathBuf },
    /// Cauchy-difference convergence study over the configured mesh list
    ConvergeCauchy { config: PathBuf },
    /// Manufactured-solution convergence study over the configured mesh list
    ConvergeMms { config: PathBuf },
    /// Evaluate the solvability/positivity/energy step-size conditions on the initial state
    Check { config: PathBuf },
}

fn dispatch(cmd: Command) -> Result<(), RunError> {
    match cmd {
        Command::Run { config } => {
            let cfg = RunConfig::load(&config)?;
            if cfg.experiment != Experiment::Run {
                eprintln!("note: config declares experiment {:?}; running it as a plain run", cfg.experiment);
            }
            let out = sim::run(&cfg)?;
            let last = out.rows.last().expect("at least the initial row");
            println!(
                "completed {} steps to t = {}; energy {:.6e}, c_min {:.3e}, gauss {:.3e}, curl {:.3e}",
                out.sim.state.step, out.sim.state.t, last.energy, last.c_min, last.gauss_res, last.curl_res
            );
            println!("diagnostics: {}", sim::diagnostics_path(&cfg).display());
            Ok(())
        }
        Command::ConvergeCauchy { config } => {
            let cfg = RunConfig::load(&config)?;
            let out = experiments::converge_cauchy(&cfg)?;
            print_tables("Cauchy difference", &out.tables);
            println!("tables written under {}", cfg.output_dir.display());
            Ok(())
        }
        Command::ConvergeMms { config } => {
            let cfg = RunConfig::load(&config)?;
            let out = experiments::converge_mms(&cfg)?;
            print_tables("manufactured-solution error", &out.tables);
            println!("tables written under {}", cfg.output_dir.display());
            Ok(())
        }
        Command::Check { config } => {
            let cfg = RunConfig::load(&config)?;
            let report = experiments::check(&cfg)?;
            print!("{}", report.render());
            Ok(())
        }
    }
}

fn print_tables(what: &str, tables: &experiments::ConvergenceTables) {
    for (ell, rows) in tables.iter().enumerate() {
        println!("{} for c{} (h, err_inf, order_inf, err_2, order_2):", what, ell + 1);
        for r in rows {
            println!(
                "  {:<12.6e} {:<12.4e} {:<8} {:<12.4e} {:<8}",
                r.h,
                r.err_inf,
                r.order_inf.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into()),
                r.err_2,
                r.order_2.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into()),
            );
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
