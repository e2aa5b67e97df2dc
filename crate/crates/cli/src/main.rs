use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{error, info};

use kwe::cli_io::{initial_condition, load_config, write_reports, write_snapshot, RunConfig};
use kwe::collision::ReduceMode;
use kwe::diagnostics::trajectory_reports;
use kwe::kaniel_shinbrot::ks_converge;
use kwe::phase_grid::{weighted_norm, NormKind};
use kwe::scattering::{extract_scattering_state, solve_final_state};
use kwe::solver::run;
use kwe::suites::{bench, lemma_check, transport_check, CheckResult, LemmaTolerances};
use kwe::{DistributionField, KweError, Result};

#[derive(Parser)]
#[command(name = "kwe", version, about = "Kinetic wave equation solver near vacuum")]
struct Cli {
    /// Let the reduction order follow the thread count (faster, not bit-reproducible).
    #[arg(long, global = true)]
    fast_reduce: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve the configured initial data and write the time series.
    Run { config: PathBuf },
    /// Collision identity suite.
    LemmaCheck { config: PathBuf },
    /// Free transport suite.
    TransportCheck { config: PathBuf },
    /// Kaniel-Shinbrot positivity certificate.
    Ks { config: PathBuf },
    /// Scattering state extraction and final-state round trip.
    Scatter { config: PathBuf },
    /// Collision kernel throughput.
    Bench {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1,8")]
        threads: Vec<usize>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load(path: &Path, fast_reduce: bool) -> Result<RunConfig> {
    let mut cfg = load_config(path)?;
    if fast_reduce {
        cfg.solver.reduce = ReduceMode::Fast;
    }
    Ok(cfg)
}

fn initial(cfg: &RunConfig) -> Result<DistributionField> {
    initial_condition(&cfg.initial_name, &cfg.initial, cfg.grid)
}

fn output_dir(cfg: &RunConfig) -> Result<&Path> {
    std::fs::create_dir_all(&cfg.output_dir)?;
    Ok(&cfg.output_dir)
}

/// Print check lines; exit code 4 when any failed.
fn report_checks(checks: &[CheckResult]) -> u8 {
    for c in checks {
        println!("{c}");
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    if failed == 0 {
        info!("all {} checks passed", checks.len());
        0
    } else {
        error!("{failed} of {} checks failed", checks.len());
        KweError::property("").exit_code() as u8
    }
}

fn dispatch(cli: &Cli) -> Result<u8> {
    match &cli.command {
        Command::Run { config } => {
            let cfg = load(config, cli.fast_reduce)?;
            let f0 = initial(&cfg)?;
            let q = cfg.quadrature()?;
            info!(
                "run: {} phase-space nodes, {} sphere nodes, t_end = {}",
                cfg.grid.len(),
                q.len(),
                cfg.solver.t_end
            );
            let traj = run(&f0, &cfg.solver, &q)?;
            let dir = output_dir(&cfg)?;
            write_reports(&dir.join("timeseries.csv"), &trajectory_reports(&traj, &cfg.solver.weights))?;
            if cfg.write_snapshots {
                for (k, s) in traj.snapshots.iter().enumerate() {
                    write_snapshot(&dir.join(format!("snapshot_{k:05}.kwe")), s)?;
                }
            }
            info!("wrote {} snapshots to {}", traj.snapshots.len(), dir.display());
            Ok(0)
        }
        Command::LemmaCheck { config } => {
            let cfg = load(config, cli.fast_reduce)?;
            let q = cfg.quadrature()?;
            let checks = lemma_check(&cfg.grid.v, &q, cfg.seed, LemmaTolerances::default())?;
            Ok(report_checks(&checks))
        }
        Command::TransportCheck { config } => {
            let cfg = load(config, cli.fast_reduce)?;
            Ok(report_checks(&transport_check(cfg.seed)?))
        }
        Command::Ks { config } => {
            let cfg = load(config, cli.fast_reduce)?;
            let f0 = initial(&cfg)?;
            let q = cfg.quadrature()?;
            let cert = ks_converge(&f0, &cfg.solver, &q)?;
            let dir = output_dir(&cfg)?;
            let w = &cfg.solver.weights;
            write_reports(&dir.join("ks_lower.csv"), &trajectory_reports(&cert.state.lower_trajectory(), w))?;
            write_reports(&dir.join("ks_upper.csv"), &trajectory_reports(&cert.state.upper_trajectory(), w))?;
            println!("iterations {}", cert.iterations);
            println!("gap history {:?}", cert.state.gap_history);
            println!("gap ratios {:?}", cert.state.gap_ratios());
            let checks = vec![
                CheckResult::at_most(
                    "gap below tolerance",
                    if cert.converged { 0.0 } else { 1.0 },
                    0.0,
                ),
                CheckResult::at_most(
                    "nesting violation (relative to max f0)",
                    cert.max_nesting_violation / f0.max_abs().max(f64::MIN_POSITIVE),
                    cfg.solver.ks_nesting_tol,
                ),
                CheckResult::at_most("negative part of the lower iterate", (-cert.final_min).max(0.0), 1e-12),
                CheckResult::at_most("Strang trajectory outside the sandwich", cert.sandwich_violation.max(0.0), 1e-10),
                CheckResult::at_most("midpoint vs Strang (relative L1)", cert.strang_rel_l1, 1e-4),
            ];
            Ok(report_checks(&checks))
        }
        Command::Scatter { config } => {
            let cfg = load(config, cli.fast_reduce)?;
            let f0 = initial(&cfg)?;
            let q = cfg.quadrature()?;
            let traj = run(&f0, &cfg.solver, &q)?;
            let rep = extract_scattering_state(&traj, &q)?;
            let dir = output_dir(&cfg)?;
            write_snapshot(&dir.join("f_plus.kwe"), &rep.state)?;
            if let Some(fit) = &rep.tail_fit {
                println!("tail ladder slope {:.4}", fit.slope);
            }
            println!("end defect {:.3e} (times sqrt(t_end): {:.3e})", rep.end_defect, rep.end_constant);
            let g = &rep.state;
            let fin = solve_final_state(g, cfg.solver.t_end, &cfg.solver, &q)?;
            let again = extract_scattering_state(&run(&fin.f0, &cfg.solver, &q)?, &q)?;
            let gn = weighted_norm(g, 0.0, NormKind::L1Xv);
            let err = weighted_norm(&again.state.axpy(-1.0, g), 0.0, NormKind::L1Xv);
            println!(
                "final-state iterations {}, neglected tail {:.3e}",
                fin.iterations, fin.tail_bound
            );
            let checks = vec![CheckResult::at_most(
                "round trip ||extract(run(final_state(g))) - g|| / ||g||",
                if gn > 0.0 { err / gn } else { err },
                1e-3 + if gn > 0.0 { fin.tail_bound / gn } else { 0.0 },
            )];
            Ok(report_checks(&checks))
        }
        Command::Bench { config, threads } => {
            let cfg = load(config, cli.fast_reduce)?;
            let q = cfg.quadrature()?;
            let rep = bench(&cfg.grid.v, &q, threads, cfg.solver.reduce)?;
            for (k, r) in rep.threads.iter().zip(&rep.rates) {
                println!("threads {k}: {r:.3e} evaluations/s");
            }
            println!("parallel efficiency {:.3}", rep.parallel_efficiency());
            Ok(0)
        }
    }
}
