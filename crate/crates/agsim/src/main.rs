//! Command-line front end: single runs, viscosity sweeps, the Holder
//! uniformity study, oracle tables, and one-shot field diagnostics.

use agsim::config::{parse_config, RunConfig, SolverKind};
use agsim::diagnostics::{
    fmt_e12, holder_star_norm, lp_norm, tail_norm, DiagnosticsCsv, MassLedger,
};
use agsim::field::{read_agf, write_agf, ScalarField};
use agsim::harness::{corrector_study, holder_uniformity_study, vv_study, write_report, VvConfig};
use agsim::init::InitSpec;
use agsim::inviscid::run_inviscid;
use agsim::oracles::{patch_reference, radial_reference};
use agsim::params::{SimParams, SolverError};
use agsim::run::{RecorderConfig, RunOptions, Trajectory};
use agsim::viscous::run_viscous;
use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "agsim", version, about = "aggregation-equation simulation suite")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single viscous or inviscid run from a config file.
    Run {
        /// Path to a `key = value` config file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Verify the amplitude bound and mass identity; exit 3 on failure.
        #[arg(long)]
        check: bool,
    },
    /// Vanishing-viscosity study (plus the corrector study when applicable).
    Vv {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Verify the convergence-rate bands; exit 3 on failure.
        #[arg(long)]
        check: bool,
    },
    /// Uniform-in-viscosity Holder bound study.
    Holder {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Reference tables from the grid-free oracles.
    Oracle {
        /// `patch` or `radial`.
        kind: String,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// One-shot diagnostics of an AGF1 field dump.
    Norms { field: PathBuf },
    /// Print version and the resolved defaults.
    Info,
}

fn main() -> ExitCode {
    match dispatch() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

#[derive(Debug)]
enum CliError {
    Config(String),
    Solver(String),
    CheckFailed(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "{m}"),
            CliError::Solver(m) => write!(f, "{m}"),
            CliError::CheckFailed(m) => write!(f, "check failed: {m}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Solver(_) => 2,
            CliError::CheckFailed(_) => 3,
        }
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        CliError::Solver(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(format!("io error: {e}"))
    }
}

fn load_config(path: &Option<PathBuf>) -> Result<RunConfig, CliError> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
            parse_config(&text).map_err(|e| CliError::Config(e.to_string()))
        }
    }
}

fn dispatch() -> Result<(), CliError> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, check } => cmd_run(&load_config(&config)?, check),
        Command::Vv { config, check } => cmd_vv(&load_config(&config)?, check),
        Command::Holder { config } => cmd_holder(&load_config(&config)?),
        Command::Oracle { kind, config } => cmd_oracle(&kind, &load_config(&config)?),
        Command::Norms { field } => cmd_norms(&field),
        Command::Info => cmd_info(),
    }
}

fn write_manifest(cfg: &RunConfig) -> Result<(), CliError> {
    std::fs::create_dir_all(&cfg.outdir)?;
    let stamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let content = format!("# resolved configuration (unix time {stamp})\n{}", cfg.manifest());
    std::fs::write(cfg.outdir.join("manifest.txt"), content)?;
    Ok(())
}

fn recorder_from(cfg: &RunConfig) -> RecorderConfig {
    RecorderConfig {
        every: cfg.observe_every,
        snapshot_every: cfg.snapshot_every,
        holder_beta: cfg.holder_beta,
        tail_r1: cfg.tail_r1,
        tail_r2: cfg.tail_r2,
    }
}

fn cmd_run(cfg: &RunConfig, check: bool) -> Result<(), CliError> {
    let grid = cfg
        .grid()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let rho0 = cfg
        .init
        .build(grid)
        .map_err(|e| CliError::Config(format!("initial condition: {e}")))?;
    write_manifest(cfg)?;

    let opts = RunOptions {
        recorder: recorder_from(cfg),
        adaptive: true,
    };
    let viscous = match cfg.solver {
        SolverKind::Viscous => true,
        SolverKind::Inviscid => false,
        SolverKind::Auto => cfg.params.nu > 0.0,
    };
    let traj = if viscous {
        run_viscous(&rho0, &cfg.params, &opts)?
    } else {
        run_inviscid(&rho0, &cfg.params, &opts)?
    };

    write_diagnostics_csv(&cfg.outdir, &traj, &cfg.params)?;
    if cfg.snapshot_every > 0 {
        for snap in &traj.snapshots {
            let name = format!("rho_t{:.6}.agf", snap.t);
            write_agf(&cfg.outdir.join(name), snap)
                .map_err(|e| CliError::Config(e.to_string()))?;
        }
    }
    let name = format!("rho_t{:.6}.agf", traj.final_rho.t);
    write_agf(&cfg.outdir.join(name), &traj.final_rho)
        .map_err(|e| CliError::Config(e.to_string()))?;

    println!(
        "run finished: t = {:.6}, steps = {}, |rho|_inf = {:.6e}, mass = {:.6e}",
        traj.final_rho.t,
        traj.steps,
        traj.final_rho.max_abs(),
        traj.final_rho.mass()
    );

    if check {
        let excess = traj.amplitude_envelope_excess(cfg.params.sigma2);
        if excess > 1e-3 {
            return Err(CliError::CheckFailed(format!(
                "amplitude bound exceeded by {excess:.3e}"
            )));
        }
        let residuals = traj
            .ledger
            .identity_residuals(cfg.params.sigma1, cfg.params.sigma2);
        let m0 = traj.ledger.mass[0].abs().max(1e-300);
        let worst = residuals.iter().fold(0.0f64, |m, r| m.max(r.abs()));
        let tol = if viscous { 1e-3 } else { 1e-4 } * m0;
        if worst > tol {
            return Err(CliError::CheckFailed(format!(
                "mass identity residual {worst:.3e} above {tol:.3e}"
            )));
        }
        println!("checks passed: amplitude bound, mass identity");
    }
    Ok(())
}

fn write_diagnostics_csv(
    outdir: &Path,
    traj: &Trajectory,
    params: &SimParams,
) -> Result<(), CliError> {
    let file = std::fs::File::create(outdir.join("diagnostics.csv"))?;
    let mut csv = DiagnosticsCsv::new(std::io::BufWriter::new(file))?;
    let residuals = traj.ledger.identity_residuals(params.sigma1, params.sigma2);
    for i in 0..traj.times.len() {
        csv.row(
            traj.times[i],
            traj.ledger.mass[i],
            traj.ledger.l2sq[i].sqrt(),
            traj.linf[i],
            0.0,
            traj.holder[i],
            traj.tail1[i],
            traj.tail2[i],
            residuals[i],
        )?;
    }
    csv.flush()?;
    Ok(())
}

fn vv_config_from(cfg: &RunConfig) -> Result<VvConfig, CliError> {
    Ok(VvConfig {
        grid: cfg.grid().map_err(|e| CliError::Config(e.to_string()))?,
        params: cfg.params,
        nu_list: cfg.nu_list.clone(),
        t_eval: cfg.t_eval,
        beta: cfg.holder_beta,
        init: cfg.init.clone(),
        g0_radius: cfg.g0_radius,
        record_every: cfg.observe_every,
        pilot_floor: cfg.pilot_floor,
    })
}

fn cmd_vv(cfg: &RunConfig, check: bool) -> Result<(), CliError> {
    let vv_cfg = vv_config_from(cfg)?;
    write_manifest(cfg)?;
    let report = vv_study(&vv_cfg).map_err(|e| CliError::Solver(e.to_string()))?;
    write_report(&cfg.outdir, &report).map_err(|e| CliError::Solver(e.to_string()))?;
    print!("{}", report.to_csv());

    let nonconservative =
        vv_cfg.grid.dim() == 2 && vv_cfg.params.sigma1 + vv_cfg.params.sigma2 != 0.0;
    if nonconservative {
        let cr = corrector_study(&vv_cfg).map_err(|e| CliError::Solver(e.to_string()))?;
        println!(
            "# corrector: slope_theta={:.6}, identity_defect={:.3e}",
            cr.slope_theta, cr.identity_defect
        );
    }

    if check {
        if report.flagged {
            return Err(CliError::CheckFailed("too few sweep points for a fit".into()));
        }
        if !(0.4..=0.6).contains(&report.slope_l2) {
            return Err(CliError::CheckFailed(format!(
                "L2 slope {:.4} outside [0.4, 0.6]",
                report.slope_l2
            )));
        }
        if report.r2_l2 < 0.98 {
            return Err(CliError::CheckFailed(format!(
                "L2 fit r2 {:.4} below 0.98",
                report.r2_l2
            )));
        }
        if report.slope_h1 < 0.4 {
            return Err(CliError::CheckFailed(format!(
                "H1 slope {:.4} below 0.4",
                report.slope_h1
            )));
        }
        println!("checks passed: slope_l2 and r2 in band, slope_h1 above 0.4");
    }
    Ok(())
}

fn cmd_holder(cfg: &RunConfig) -> Result<(), CliError> {
    let vv_cfg = vv_config_from(cfg)?;
    write_manifest(cfg)?;
    let report = holder_uniformity_study(&vv_cfg).map_err(|e| CliError::Solver(e.to_string()))?;
    println!("nu,holder_sup");
    for (nu, sup) in &report.rows {
        println!("{},{}", fmt_e12(*nu), fmt_e12(*sup));
    }
    println!("# ratio={:.6}", report.ratio);
    Ok(())
}

fn cmd_oracle(kind: &str, cfg: &RunConfig) -> Result<(), CliError> {
    match kind {
        "patch" => {
            let (c, r0) = match cfg.init {
                InitSpec::Patch { c, r0, .. } => (c, r0),
                _ => (1.0, 0.5),
            };
            println!("t,density,radius");
            let steps = 50;
            for i in 0..=steps {
                let t = cfg.params.t_end * i as f64 / steps as f64;
                let (dens, rad) =
                    patch_reference(c, r0, cfg.params.sigma1, cfg.params.sigma2, cfg.dim, t)
                        .map_err(|e| CliError::Solver(e.to_string()))?;
                println!("{},{},{}", fmt_e12(t), fmt_e12(dens), fmt_e12(rad));
            }
            Ok(())
        }
        "radial" => {
            let grid = cfg.grid().map_err(|e| CliError::Config(e.to_string()))?;
            let profile = cfg.init.radial_profile(&grid).ok_or_else(|| {
                CliError::Config("radial oracle needs a radial init (gaussian or patch)".into())
            })?;
            let p = SimParams {
                nu: 0.0,
                ..cfg.params
            };
            let out = radial_reference(&profile, &p, cfg.params.t_end, 512, cfg.dim)
                .map_err(|e| CliError::Solver(e.to_string()))?;
            println!("r,value");
            for (r, v) in out.radii.iter().zip(&out.values) {
                println!("{},{}", fmt_e12(*r), fmt_e12(*v));
            }
            Ok(())
        }
        other => Err(CliError::Config(format!(
            "unknown oracle `{other}` (expected patch or radial)"
        ))),
    }
}

fn cmd_norms(path: &Path) -> Result<(), CliError> {
    let field: ScalarField = read_agf(path).map_err(|e| CliError::Config(e.to_string()))?;
    let mut ledger = MassLedger::new();
    ledger.update(&field).ok();
    println!("grid: d={}, n={}, L={}", field.grid.dim(), field.grid.points_per_axis(), field.grid.box_length());
    println!("t = {}", fmt_e12(field.t));
    println!("mass = {}", fmt_e12(field.mass()));
    for p in [1.0, 2.0, 4.0] {
        println!(
            "L{} = {}",
            p,
            fmt_e12(lp_norm(&field, p).map_err(|e| CliError::Config(e.to_string()))?)
        );
    }
    println!("Linf = {}", fmt_e12(field.max_abs()));
    println!("holder_0.5 = {}", fmt_e12(holder_star_norm(&field, 0.5)));
    let l = field.grid.box_length();
    for r in [l / 8.0, l / 5.0] {
        if let Ok(t) = tail_norm(&field, r) {
            println!("tail_{r:.3} = {}", fmt_e12(t));
        }
    }
    Ok(())
}

fn cmd_info() -> Result<(), CliError> {
    println!("agsim {}", env!("CARGO_PKG_VERSION"));
    println!("defaults:");
    print!("{}", RunConfig::default().manifest());
    Ok(())
}
