//! `chiller` command line: steady-state reports, stage decompositions,
//! device diagnosis, jump-trajectory ensembles, characteristic-curve sweeps
//! and cooling optimization, all driven by a single JSON configuration.
//!
//! Exit codes: 0 success, 1 configuration/schema violation, 2 solver
//! failure, 3 invariant violation (from `--check`).

mod checks;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;

use chiller_core::lindblad::build_liouvillian;
use chiller_core::models::ModelKind;
use chiller_core::stages;
use chiller_core::sweep;
use chiller_core::thermo;
use chiller_core::{mcwf, ChillerError};

use config::RunConfig;
use output::{sha256_hex, CheckLine, OutDir, RunManifest};

#[derive(Parser)]
#[command(name = "chiller", version, about = "absorption-chiller simulation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Override the configured RNG seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Run the invariant suite only; no data files are written.
    #[arg(long, global = true)]
    check: bool,

    /// Suppress progress output.
    #[arg(long, global = true)]
    quiet: bool,

    /// Also dump the Bohr-channel table as channels.csv.
    #[arg(long, global = true)]
    dump_channels: bool,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Solve the steady state and report all thermodynamic observables.
    Steady,
    /// Stage decomposition of the four-level chiller over a frequency scan.
    Breakdown,
    /// Graph diagnosis: transitions, stages, leak directions.
    Diagnose,
    /// Stochastic jump-trajectory ensemble with cycle statistics.
    Mcwf,
    /// Characteristic-curve sweep over the cold frequency.
    Sweep,
    /// Locate the cooling-power maximum and compare against 3/4 Carnot.
    Optimize,
    /// Emit the full characteristic-curve and entropy-share data set
    /// (three couplings, the filtered variant, and the share scan).
    ReproFig2,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Steady => "steady",
            Command::Breakdown => "breakdown",
            Command::Diagnose => "diagnose",
            Command::Mcwf => "mcwf",
            Command::Sweep => "sweep",
            Command::Optimize => "optimize",
            Command::ReproFig2 => "repro-fig2",
        }
    }
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Failure {
            code: 1,
            message: message.into(),
        }
    }

    fn solver(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }

    fn invariant(message: impl Into<String>) -> Self {
        Failure {
            code: 3,
            message: message.into(),
        }
    }
}

impl From<ChillerError> for Failure {
    fn from(e: ChillerError) -> Self {
        match e {
            ChillerError::InvalidModel(_) | ChillerError::InvalidBath(_) => {
                Failure::config(e.to_string())
            }
            _ => Failure::solver(e.to_string()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::solver(format!("io: {e}"))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(n) = std::env::var("CHILLER_THREADS") {
        if let Ok(n) = n.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let config_path = cli
        .config
        .as_ref()
        .ok_or_else(|| Failure::config("--config <path> is required"))?;
    let raw = std::fs::read(config_path)
        .map_err(|e| Failure::config(format!("cannot read {}: {e}", config_path.display())))?;
    let cfg = RunConfig::parse(std::str::from_utf8(&raw).unwrap_or_default())
        .map_err(Failure::config)?;
    let seed = cli.seed.unwrap_or(cfg.seed);
    let digest = sha256_hex(&raw);

    let model = cfg.build_model().map_err(Failure::config)?;
    let baths = cfg.build_baths().map_err(Failure::config)?;
    if !cli.quiet {
        for w in &model.warnings {
            eprintln!("warning: {w}");
        }
    }

    if cli.check {
        let checks = checks::run_checks(&model, &baths);
        let mut ok = true;
        for c in &checks {
            println!("{}: {} ({})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
            ok &= c.pass;
        }
        return if ok {
            Ok(())
        } else {
            Err(Failure::invariant("invariant suite failed"))
        };
    }

    let started = Instant::now();
    let mut out = OutDir::new(&cli.out)?;
    let mut checks: Vec<CheckLine> = Vec::new();

    if cli.dump_channels {
        let liouv = build_liouvillian(&model, &baths)?;
        out.write_text("channels.csv", &output::channels_csv(&liouv))?;
    }

    match cli.command {
        Command::Steady => {
            let report = thermo::solve(&model, &baths)?;
            #[derive(Serialize)]
            struct SteadyOut<'a> {
                model: &'a config::ModelDoc,
                report: chiller_core::thermo::SteadyReportData<f64>,
                warnings: &'a [String],
            }
            out.write_json(
                "steady.json",
                &SteadyOut {
                    model: &cfg.model,
                    report: report.to_data(),
                    warnings: &model.warnings,
                },
            )?;
            checks.push(CheckLine {
                name: "cooling".into(),
                pass: true,
                detail: format!("Qdot_c = {}", report.currents.cold),
            });
        }
        Command::Breakdown => {
            if model.kind != ModelKind::FourLevel {
                return Err(Failure::config(
                    "breakdown requires a four_level model".to_string(),
                ));
            }
            let section = cfg
                .breakdown
                .ok_or_else(|| Failure::config("config lacks a \"breakdown\" section"))?;
            let rows = sweep::entropy_share_scan(
                &cfg.sweep_config().map_err(Failure::config)?,
                section.omega_c_min,
                section.omega_c_max,
                section.points,
            )?;
            let worst = rows
                .iter()
                .map(|r| r.rel_mismatch)
                .fold(0.0_f64, f64::max);
            checks.push(CheckLine {
                name: "stage_sum_identity".into(),
                pass: worst <= 1e-10,
                detail: format!("max relative mismatch {worst:.2e}"),
            });
            out.write_text("breakdown.csv", &output::breakdown_csv(&rows))?;
        }
        Command::Diagnose => {
            let report = stages::diagnose(&model, &baths)?;
            out.write_json("diagnose.json", &report)?;
            checks.push(CheckLine {
                name: "endoreversible".into(),
                pass: true,
                detail: format!("{}", report.endoreversible),
            });
        }
        Command::Mcwf => {
            let section = cfg
                .mcwf
                .ok_or_else(|| Failure::config("config lacks an \"mcwf\" section"))?;
            let estimate =
                mcwf::estimate_currents(&model, &baths, section.n_trajectories, section.duration, seed)?;
            let deterministic = thermo::solve(&model, &baths)?;
            let stage_rates = if model.kind == ModelKind::FourLevel {
                Some(stages::stage_breakdown(&model, &baths)?.rates)
            } else {
                None
            };
            #[derive(Serialize)]
            struct McwfOut {
                estimate: mcwf::CurrentEstimate<f64>,
                deterministic_currents: chiller_core::models::PerBath<f64>,
                deterministic_stage_rates: Option<stages::StageRates<f64>>,
                loop_convention: &'static str,
            }
            for bath in chiller_core::models::Bath::ALL {
                let dev =
                    (estimate.currents.get(bath) - deterministic.currents.get(bath)).abs();
                let se = *estimate.std_err.get(bath);
                checks.push(CheckLine {
                    name: format!("current_{bath}_within_3_sigma"),
                    pass: dev <= 3.0 * se,
                    detail: format!("deviation {dev:.3e}, se {se:.3e}"),
                });
            }
            out.write_json(
                "mcwf.json",
                &McwfOut {
                    estimate,
                    deterministic_currents: deterministic.currents,
                    deterministic_stage_rates: stage_rates,
                    loop_convention:
                        "loop erasure: a repeated state pops the enclosed primitive loop",
                },
            )?;
        }
        Command::Sweep => {
            let section = cfg
                .sweep
                .ok_or_else(|| Failure::config("config lacks a \"sweep\" section"))?;
            let rows = sweep::sweep_characteristic(
                &cfg.sweep_config().map_err(Failure::config)?,
                section.omega_c_min,
                section.omega_c_max,
                section.points,
            )?;
            let failures = rows.iter().filter(|r| r.error.is_some()).count();
            checks.push(CheckLine {
                name: "rows_solved".into(),
                pass: failures < rows.len(),
                detail: format!("{} of {} rows carry error markers", failures, rows.len()),
            });
            out.write_text("sweep.csv", &output::sweep_csv(&rows))?;
        }
        Command::Optimize => {
            let section = cfg
                .optimize
                .ok_or_else(|| Failure::config("config lacks an \"optimize\" section"))?;
            let report = sweep::optimize_cooling(
                &cfg.sweep_config().map_err(Failure::config)?,
                section.omega_c_min,
                section.omega_c_max,
            )?;
            let (ok, margin) = sweep::bound_check(&report);
            checks.push(CheckLine {
                name: "endoreversible_bound".into(),
                pass: ok,
                detail: format!("margin {margin}"),
            });
            out.write_json("optimum.json", &report)?;
        }
        Command::ReproFig2 => {
            repro_fig2(&cfg, &mut out, &mut checks)?;
        }
    }

    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION"),
        command: cli.command.name().to_string(),
        config_sha256: digest,
        seed,
        wall_time_ms: started.elapsed().as_millis(),
        artifacts: out
            .written
            .iter()
            .map(|p| p.file_name().unwrap_or_default().to_string_lossy().into_owned())
            .collect(),
        checks,
    };
    out.write_json("manifest.json", &manifest)?;
    if !cli.quiet {
        for p in &out.written {
            println!("wrote {}", p.display());
        }
    }
    Ok(())
}

/// Characteristic curves for three couplings, the work-filtered open curve
/// and the entropy-share scan, at the configured temperatures.
fn repro_fig2(
    cfg: &RunConfig,
    out: &mut OutDir,
    checks: &mut Vec<CheckLine>,
) -> Result<(), Failure> {
    let base = cfg.sweep_config().map_err(Failure::config)?;
    if base.kind != ModelKind::FourLevel {
        return Err(Failure::config("repro-fig2 requires a four_level model"));
    }
    for g in [0.1, 0.3, 0.5] {
        let mut c = base;
        c.g = g;
        c.track_work_cutoff = false;
        let rows = sweep::sweep_characteristic(&c, g + 0.01, 2.9, 400)?;
        out.write_text(&format!("fig2a_g{g}.csv"), &output::sweep_csv(&rows))?;
    }
    // open curve: work-bath cutoff pinned at omega_w, minus stage suppressed
    let mut open = base;
    open.g = 0.1;
    open.track_work_cutoff = true;
    let rows = sweep::sweep_characteristic(&open, 0.2, 2.5249, 400)?;
    let max_eps = rows
        .iter()
        .filter_map(|r| r.point.as_ref().and_then(|p| p.cop))
        .fold(0.0_f64, f64::max);
    checks.push(CheckLine {
        name: "open_curve_cop_saturation".into(),
        pass: max_eps > 0.7,
        detail: format!("max COP {max_eps}"),
    });
    out.write_text("fig2a_open_g0.1.csv", &output::sweep_csv(&rows))?;

    // entropy shares around the reversible frequency
    let mut scan = base;
    scan.g = 0.1;
    scan.track_work_cutoff = false;
    let rows = sweep::entropy_share_scan(&scan, 2.4, 2.85, 200)?;
    out.write_text("fig2b_shares_g0.1.csv", &output::breakdown_csv(&rows))?;
    Ok(())
}
