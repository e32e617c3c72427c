use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lowmach::compressible::{run_compressible, Stepping};
use lowmach::constitutive::verify_assumptions;
use lowmach::energetics::{energy_inequality_from, uniform_bound_ratios, uniform_estimates_report};
use lowmach::harness::output::{read_diagnostics, read_table, write_diagnostics, COMPRESSIBLE_COLUMNS, MODEL_H_COLUMNS};
use lowmach::harness::sweep::{run_reference, ENERGY_TOL};
use lowmach::harness::{emit_outputs, fit_convergence_order, load_config, run_sweep, well_prepared_initial_data, Config};
use lowmach::Error;

/// Compressible Navier-Stokes/Cahn-Hilliard solver and low-Mach sweep driver.
#[derive(Parser)]
#[command(name = "lowmach", version)]
struct Cli {
    /// Directory for output files (overrides output.directory).
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Worker threads for the sweep (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for randomized checks; the solvers themselves are deterministic.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Do not write SVG plots.
    #[arg(long, global = true)]
    no_plots: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single compressible run at run.epsilon.
    RunCompressible { config: PathBuf },
    /// Single model-H run.
    RunModelh { config: PathBuf },
    /// Full Mach-parameter sweep with all outputs.
    Sweep { config: PathBuf },
    /// Re-check a stored diagnostics CSV or sweep.csv.
    Check { csv: PathBuf },
    /// Sample the structural assumptions on the configured constitutive laws.
    VerifyAssumptions { config: PathBuf },
}

enum Outcome {
    Pass,
    Fail,
}

fn load(cli: &Cli, path: &Path) -> Result<Config, Error> {
    let mut cfg = load_config(path)?;
    if let Some(dir) = &cli.output_dir {
        cfg.output.directory = dir.clone();
    }
    if cli.no_plots {
        cfg.output.emit_plots = false;
    }
    for w in &cfg.warnings {
        eprintln!("warning: {w}");
    }
    Ok(cfg)
}

fn report(name: &str, passed: bool, detail: &str) -> bool {
    println!("{} {name}: {detail}", if passed { "PASS" } else { "FAIL" });
    passed
}

fn mkdir(dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn run_compressible_cmd(cfg: &Config) -> Result<Outcome, Error> {
    let params = cfg.params()?;
    let (initial, _) = well_prepared_initial_data(cfg, cfg.run_epsilon)?;
    let traj = run_compressible(
        &initial,
        &params,
        cfg.time.t_end,
        cfg.time.sample_every,
        Stepping::Cfl(cfg.time.cfl),
    )?;
    mkdir(&cfg.output.directory)?;
    let path = cfg.output.directory.join(format!("diagnostics_eps_{}.csv", cfg.run_epsilon));
    write_diagnostics(&path, &traj.diagnostics, &COMPRESSIBLE_COLUMNS)?;
    println!("wrote {} ({} steps)", path.display(), traj.steps);
    let ineq = energy_inequality_from(&traj.diagnostics, ENERGY_TOL)?;
    let d0 = traj.diagnostics[0];
    let dn = traj.diagnostics[traj.diagnostics.len() - 1];
    let u = uniform_estimates_report(&traj, &params);
    println!("uniform estimates: {:?}", u.primary());
    let mut ok = report("energy inequality", ineq.passed, &format!("violation {:e}", ineq.violation));
    let (drift, pdrift) = d0.conservation_drift(&dn);
    ok &= report("mass conservation", drift <= 1e-12, &format!("relative drift {drift:e}"));
    ok &= report("phase-mass conservation", pdrift <= 1e-12, &format!("relative drift {pdrift:e}"));
    Ok(if ok { Outcome::Pass } else { Outcome::Fail })
}

fn run_modelh_cmd(cfg: &Config) -> Result<Outcome, Error> {
    let (traj, dt) = run_reference(cfg)?;
    mkdir(&cfg.output.directory)?;
    let path = cfg.output.directory.join("modelh.csv");
    write_diagnostics(&path, &traj.diagnostics, &MODEL_H_COLUMNS)?;
    println!("wrote {} ({} steps of {dt})", path.display(), traj.steps);
    let ineq = energy_inequality_from(&traj.diagnostics, ENERGY_TOL)?;
    let mut ok = report("energy inequality", ineq.passed, &format!("violation {:e}", ineq.violation));
    let div = traj.diagnostics.iter().map(|d| d.div_residual).fold(0.0, f64::max);
    ok &= report("divergence-free velocity", div <= 1e-10, &format!("max l2 divergence {div:e}"));
    Ok(if ok { Outcome::Pass } else { Outcome::Fail })
}

fn sweep_cmd(cfg: &Config) -> Result<Outcome, Error> {
    let result = run_sweep(cfg)?;
    let files = emit_outputs(&result, &cfg.output.directory, cfg.output.emit_fields, cfg.output.emit_plots)?;
    println!("wrote {} files to {}", files.len(), cfg.output.directory.display());
    let mut ok = true;
    for a in result.assess(cfg.sweep.fit_threshold) {
        ok &= report(&a.name, a.passed, &a.detail);
    }
    let ratios = uniform_bound_ratios(&result.summaries().map(|(_, s)| s.uniform).collect::<Vec<_>>());
    println!("uniform-estimate max/min ratios across eps: {ratios:?}");
    Ok(if ok { Outcome::Pass } else { Outcome::Fail })
}

fn check_cmd(path: &Path) -> Result<Outcome, Error> {
    let table = read_table(path)?;
    if let Some(sups) = table.column("sup_Etilde") {
        let eps = table.column("epsilon").ok_or_else(|| Error::Config("sweep table lacks 'epsilon'".into()))?;
        let pairs: Vec<(f64, f64)> = eps.iter().copied().zip(sups.iter().copied()).filter(|p| p.1.is_finite()).collect();
        let order = fit_convergence_order(&pairs)?;
        let mut ok = report("fitted order", order.is_finite(), &format!("{order}"));
        ok &= report(
            "sup_t Etilde strictly decreasing",
            sups.windows(2).all(|w| w[1] < w[0]),
            &format!("{sups:?}"),
        );
        for col in ["final_l1_rho", "final_l2_v", "final_h1_c"] {
            if let Some(v) = table.column(col) {
                ok &= report(&format!("{col} strictly decreasing"), v.windows(2).all(|w| w[1] < w[0]), &format!("{v:?}"));
            }
        }
        return Ok(if ok { Outcome::Pass } else { Outcome::Fail });
    }
    let rows = read_diagnostics(path)?;
    let ineq = energy_inequality_from(&rows, ENERGY_TOL)?;
    let detail = match ineq.worst_pair {
        Some((s, t)) => format!("worst slack {:e} between samples {s} and {t}", ineq.worst_slack),
        None => "single sample".into(),
    };
    let mut ok = report("energy inequality", ineq.passed, &detail);
    if let (Some(first), Some(last)) = (rows.first(), rows.last()) {
        let (drift, pdrift) = first.conservation_drift(last);
        ok &= report("mass conservation", drift <= 1e-12, &format!("relative drift {drift:e}"));
        ok &= report("phase-mass conservation", pdrift <= 1e-12, &format!("relative drift {pdrift:e}"));
    }
    Ok(if ok { Outcome::Pass } else { Outcome::Fail })
}

fn verify_cmd(cfg: &Config) -> Result<Outcome, Error> {
    let params = cfg.params()?;
    let r = verify_assumptions(&params.pressure, &params.potential, (0.0, 10.0), (-5.0, 5.0), 4001)?;
    for c in &r.checks {
        report(c.name, c.passed, &format!("margin {}", c.margin));
    }
    Ok(if r.passed() { Outcome::Pass } else { Outcome::Fail })
}

fn run(cli: &Cli) -> Result<Outcome, Error> {
    match &cli.command {
        Command::RunCompressible { config } => run_compressible_cmd(&load(cli, config)?),
        Command::RunModelh { config } => run_modelh_cmd(&load(cli, config)?),
        Command::Sweep { config } => sweep_cmd(&load(cli, config)?),
        Command::Check { csv } => check_cmd(csv),
        Command::VerifyAssumptions { config } => verify_cmd(&load(cli, config)?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(seed) = cli.seed {
        eprintln!("seed {seed} (no randomized stage in this command)");
    }
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start thread pool: {e}");
            return ExitCode::from(1);
        }
    };
    match pool.install(|| run(&cli)) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::from(1)
        }
    }
}
