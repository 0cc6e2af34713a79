//! Command-line front end: spectra, phase maps, ramps, trajectory
//! ensembles, and the measurement pipeline, all driven by one
//! configuration file.
//!
//! Every run writes its data files plus a `manifest.json` echoing the
//! full configuration, the effective seed, worker count, and wall time,
//! so results stay reproducible from the output directory alone.  Exit
//! statuses: `0` success, `2` unusable request (bad flags, unreadable or
//! invalid configuration), `3` computation failure (reported in
//! `diagnostics.json`).

mod config;
mod run;

use clap::{Args, Parser, Subcommand};
use config::{validate_config, RunConfig};
use ermsim::dynamics::Tolerances;
use ermsim::export::{json_to_path, RunManifest};
use run::{RunContext, RunError};
use serde_json::json;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(
    name = "ermsim",
    version,
    about = "Simulations of a single trapped ion's extended Rabi model: \
             spectra, phase maps, ramps, open-system trajectories, and the \
             sideband measurement pipeline."
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

/// Flags shared by every computing subcommand.
#[derive(Args)]
struct CommonArgs {
    /// Configuration file (TOML or JSON).
    #[arg(long)]
    config: PathBuf,

    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,

    /// Master seed for stochastic subcommands (overrides the config key).
    #[arg(long)]
    seed: Option<u64>,

    /// Worker threads (default: all cores).
    #[arg(long)]
    workers: Option<usize>,

    /// Common scale factor on the integration tolerances.
    #[arg(long, default_value_t = 1.0)]
    tolerance_scale: f64,
}

#[derive(Subcommand)]
enum Cmd {
    /// Eigenvalue ladder, Peres lattice, and landmark energies.
    Spectrum(CommonArgs),
    /// Phase classification and phase-space volumes over a (λ, δ) grid.
    PhaseMap(CommonArgs),
    /// Smoothed density of states over the full ladder.
    Dos(CommonArgs),
    /// Level flow across a coupling sweep.
    Levels(CommonArgs),
    /// Wigner function of one eigenstate's motional reduction.
    Wigner(CommonArgs),
    /// Strength function of a coupling quench.
    Quench(CommonArgs),
    /// Schrödinger ramp from the vacuum.
    Ramp(CommonArgs),
    /// Final-state observables across a protocol sweep.
    Scan(CommonArgs),
    /// Monte-Carlo wave-function ramp with decoherence.
    Mcwf(CommonArgs),
    /// Ramp, project onto spin-down, and read the vacuum population off a
    /// blue-sideband Rabi signal.
    Diagnose(CommonArgs),
    /// Map laboratory trap parameters to the dimensionless model.
    MapParams(CommonArgs),
    /// Check a configuration file without computing anything.
    Validate {
        /// Configuration file (TOML or JSON).
        #[arg(long)]
        config: PathBuf,

        /// Directory for the JSON report (printed either way).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

impl Cmd {
    /// Dispatch name and shared flags (`None` for `validate`).
    fn parts(&self) -> Option<(&'static str, &CommonArgs)> {
        match self {
            Cmd::Spectrum(a) => Some(("spectrum", a)),
            Cmd::PhaseMap(a) => Some(("phase-map", a)),
            Cmd::Dos(a) => Some(("dos", a)),
            Cmd::Levels(a) => Some(("levels", a)),
            Cmd::Wigner(a) => Some(("wigner", a)),
            Cmd::Quench(a) => Some(("quench", a)),
            Cmd::Ramp(a) => Some(("ramp", a)),
            Cmd::Scan(a) => Some(("scan", a)),
            Cmd::Mcwf(a) => Some(("mcwf", a)),
            Cmd::Diagnose(a) => Some(("diagnose", a)),
            Cmd::MapParams(a) => Some(("map-params", a)),
            Cmd::Validate { .. } => None,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.cmd {
        Cmd::Validate { config, out } => run_validate(config, out.as_deref()),
        other => {
            let (name, args) = other.parts().expect("validate handled above");
            run_command(name, args)
        }
    }
}

fn run_command(name: &'static str, args: &CommonArgs) -> ExitCode {
    let cfg = match RunConfig::load(&args.config) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if !(args.tolerance_scale > 0.0) {
        eprintln!("error: --tolerance-scale must be positive");
        return ExitCode::from(2);
    }
    if let Some(w) = args.workers {
        if w == 0 {
            eprintln!("error: --workers must be ≥ 1");
            return ExitCode::from(2);
        }
        // A pool may already exist (second run in one process); the
        // request is then a no-op and the run proceeds on the live pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(w).build_global();
    }
    if let Err(e) = std::fs::create_dir_all(&args.out) {
        eprintln!("error: cannot create {}: {e}", args.out.display());
        return ExitCode::from(2);
    }

    let started = Instant::now();
    let mut manifest = RunManifest::new(name, cfg.echo());
    let ctx = RunContext {
        seed: args.seed.or(cfg.seed),
        cfg,
        out: args.out.clone(),
        tol: Tolerances::default().scaled(args.tolerance_scale),
    };
    manifest.seed = ctx.seed;
    manifest.workers = args.workers.unwrap_or_else(rayon::current_num_threads);
    manifest.tolerance_scale = args.tolerance_scale;

    let outcome = run::dispatch(name, &ctx);
    manifest.wall_seconds = started.elapsed().as_secs_f64();
    let status = match outcome {
        Ok(files) => {
            println!("{name}: wrote {} in {}", files.join(", "), ctx.out.display());
            manifest.outputs = files;
            ExitCode::SUCCESS
        }
        Err(RunError::Config(e)) => {
            eprintln!("configuration error: {e}");
            ExitCode::from(2)
        }
        Err(RunError::Numeric(msg)) => {
            let diagnostics = json!({
                "subcommand": name,
                "error": msg,
                "config": ctx.cfg.echo(),
            });
            match json_to_path(&ctx.out.join("diagnostics.json"), &diagnostics) {
                Ok(()) => {
                    manifest.outputs = vec!["diagnostics.json".into()];
                    eprintln!(
                        "computation failed: {msg} (details in {})",
                        ctx.out.join("diagnostics.json").display()
                    );
                }
                Err(e) => eprintln!("computation failed: {msg} (and no diagnostics: {e})"),
            }
            ExitCode::from(3)
        }
    };
    if let Err(e) = json_to_path(&ctx.out.join("manifest.json"), &manifest) {
        eprintln!("error: cannot write manifest: {e}");
        return ExitCode::from(3);
    }
    status
}

/// Print every check as `ok`/`VIOLATION`, the feasibility grades when a
/// trap block is present, and optionally write the JSON report.  Always
/// exits 0 — violations are the report, not a failure of `validate`.
fn run_validate(config: &Path, out: Option<&Path>) -> ExitCode {
    let cfg = match RunConfig::load(config) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let report = validate_config(&cfg);
    for check in &report.checks {
        let tag = if check.passed { "ok        " } else { "VIOLATION " };
        println!("{tag}{} — {}", check.name, check.detail);
    }
    if let Some(f) = &report.feasibility {
        let grade = |g| format!("{g:?}").to_lowercase();
        println!(
            "feasibility: detunings {:.4}/{:.4} of the secular frequency ({}), \
             Lamb-Dicke {} ({}), sign conventions {}",
            f.ratio_red,
            f.ratio_blue,
            grade(f.detuning_grade),
            f.lamb_dicke,
            grade(f.lamb_dicke_grade),
            if f.sign_convention_ok { "ok" } else { "VIOLATED" },
        );
    }
    if let Some(dir) = out {
        if let Err(e) = std::fs::create_dir_all(dir) {
            eprintln!("error: cannot create {}: {e}", dir.display());
            return ExitCode::from(2);
        }
        let path = dir.join("validate.json");
        if let Err(e) = json_to_path(&path, &report) {
            eprintln!("error: cannot write {}: {e}", path.display());
            return ExitCode::from(2);
        }
        println!("report written to {}", path.display());
    }
    if report.passed() {
        println!("configuration ok");
    } else {
        let violations = report.checks.iter().filter(|c| !c.passed).count();
        println!("{violations} violation(s)");
    }
    ExitCode::SUCCESS
}
