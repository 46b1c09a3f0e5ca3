use clap::{Parser, Subcommand};
use ductflow::config::RunConfig;
use ductflow::farfield::solve_farfield;
use ductflow::gas::GasConstants;
use ductflow::pipeline::{exit_code_for, run_pipeline, sweep, verify_run_dir, SweepParam};
use std::path::PathBuf;
use std::process::ExitCode;

/// Steady two-layer subsonic duct flow with a contact discontinuity.
#[derive(Parser)]
#[command(name = "ductflow", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline and emit artifacts.
    Solve { config: PathBuf },
    /// Run the pipeline once per parameter value and aggregate the results.
    Sweep {
        config: PathBuf,
        /// One of: omega, sigma, R, resolution.
        #[arg(long)]
        param: String,
        /// Comma-separated list of values.
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
    },
    /// Solve only the far-field algebra and print the right state.
    Farfield { config: PathBuf },
    /// Re-verify an emitted run directory.
    Verify { run_dir: PathBuf },
}

fn main() -> ExitCode {
    match dispatch() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e) as u8)
        }
    }
}

fn dispatch() -> ductflow::Result<ExitCode> {
    match Cli::parse().command {
        Command::Solve { config } => {
            let cfg = RunConfig::from_file(&config)?;
            let (report, dir) = run_pipeline(&cfg)?;
            print!("{}", report.render_text());
            println!("artifacts: {}", dir.display());
            Ok(if report.all_pass() { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Sweep { config, param, values } => {
            if values.is_empty() {
                return Err(ductflow::Error::InvalidConfig("no sweep values given".into()));
            }
            let cfg = RunConfig::from_file(&config)?;
            let param: SweepParam = param.parse()?;
            let rows = sweep(&cfg, param, &values)?;
            let mut all_ok = true;
            for row in &rows {
                println!(
                    "value={:<12} status={:<14} p_r={:.12} omega_star={:.12} iters={}",
                    row.value, row.status, row.p_r, row.omega_star, row.iterations
                );
                all_ok &= row.status == "ok";
            }
            Ok(if all_ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Farfield { config } => {
            let cfg = RunConfig::from_file(&config)?;
            let gc = GasConstants::new(cfg.gamma)?;
            let ff = solve_farfield(&cfg.left, cfg.omega_plus, cfg.omega_minus, &gc)?;
            println!("p_r={:.16e}", ff.p_r);
            println!("omega_star={:.16e}", ff.omega_star);
            println!("u_r_top={:.16e}", ff.u_r_top);
            println!("u_r_bot={:.16e}", ff.u_r_bot);
            println!("rho_r_top={:.16e}", ff.rho_r_top);
            println!("rho_r_bot={:.16e}", ff.rho_r_bot);
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { run_dir } => {
            let report = verify_run_dir(&run_dir)?;
            print!("{}", report.render_text());
            Ok(if report.all_pass() { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
    }
}
