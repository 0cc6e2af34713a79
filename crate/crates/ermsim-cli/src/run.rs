//! Subcommand implementations: resolve a [`RunConfig`], compute, and
//! write the declared output files into the run directory.
//!
//! Every runner returns the list of files it wrote (names relative to the
//! output directory) so the caller can assemble the manifest.  Errors
//! split into two exit classes: [`RunError::Config`] for anything wrong
//! with the request (exit status 2; nothing was computed) and
//! [`RunError::Numeric`] for failures of the computation itself (exit
//! status 3, reported in a diagnostics file).

use crate::config::{ConfigError, RunConfig};
use ermsim::dynamics::{
    down_project, propagate_schrodinger, ramp_scan, ScanAxis, Tolerances,
};
use ermsim::export::{
    level_flow_rows, spectrum_rows, write_dos_csv, write_mcwf_series_csv, write_peres_csv,
    write_phase_map_csv, write_rabi_csv, write_scan_csv, write_spectrum_csv, write_strength_csv,
    write_wigner_csv, write_witness_csv, json_to_path, PhaseMapRow,
};
use ermsim::hamiltonian::ErmHamiltonian;
use ermsim::hilbert::{suggest_cutoff, HilbertSpace, QuantumState};
use ermsim::observables::{
    default_wigner_grid, peres_lattice, reduced_motional, strength_function, wigner,
};
use ermsim::opensys::{
    blue_sideband_drive, blue_sideband_members, build_dissipators, default_fit_components,
    extract_vacuum_population, mcwf_evolve, mcwf_expectation, DissipatorSpec, McwfObservable,
    McwfOptions, MotionalInput, NoiseModel,
};
use ermsim::params::ModelParams;
use ermsim::semiclassics::{critical_set, default_smoothing_width, dos_grid, smoothed_dos};
use ermsim::spectrum::{diagonalize, diagonalize_at, level_dynamics, EigRange};
use ermsim::C64;
use ndarray as nd;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use thiserror::Error;

/// Failure of a run, split by exit class.
#[derive(Debug, Error)]
pub enum RunError {
    /// The request itself is unusable (exit status 2).
    #[error("{0}")]
    Config(#[from] ConfigError),

    /// The computation failed (exit status 3).
    #[error("{0}")]
    Numeric(String),
}

pub type RunResult<T> = Result<T, RunError>;

/// Library failures surface as [`RunError::Numeric`]; configuration
/// resolution keeps its own variant (and exit status) via `#[from]`.
macro_rules! numeric_from {
    ($($ty:ty),* $(,)?) => {$(
        impl From<$ty> for RunError {
            fn from(e: $ty) -> Self {
                RunError::Numeric(e.to_string())
            }
        }
    )*};
}

numeric_from!(
    ermsim::dynamics::DynError,
    ermsim::export::ExportError,
    ermsim::observables::ObservablesError,
    ermsim::opensys::OpenError,
    ermsim::params::ParamError,
    ermsim::semiclassics::SemiclassicsError,
    ermsim::spectrum::SpectrumError,
    std::io::Error,
);

fn invalid(msg: impl Into<String>) -> RunError {
    RunError::Config(ConfigError::Invalid(msg.into()))
}

/// Everything a runner needs besides the configuration file itself.
pub struct RunContext {
    pub cfg: RunConfig,
    /// Output directory (exists by the time runners execute).
    pub out: PathBuf,
    /// Effective master seed (`--seed` wins over the config key).
    pub seed: Option<u64>,
    pub tol: Tolerances,
}

impl RunContext {
    fn writer(&self, name: &str) -> RunResult<BufWriter<File>> {
        Ok(BufWriter::new(File::create(self.out.join(name))?))
    }

    fn write_summary<T: Serialize>(&self, name: &str, value: &T) -> RunResult<()> {
        json_to_path(&self.out.join(name), value)?;
        Ok(())
    }

    fn require_seed(&self) -> RunResult<u64> {
        self.seed.ok_or_else(|| {
            invalid("seed mandatory for trajectory runs (set `seed` or pass --seed)")
        })
    }
}

/// Run one subcommand by name; returns the files written.
pub fn dispatch(name: &str, ctx: &RunContext) -> RunResult<Vec<String>> {
    match name {
        "spectrum" => run_spectrum(ctx),
        "phase-map" => run_phase_map(ctx),
        "dos" => run_dos(ctx),
        "levels" => run_levels(ctx),
        "wigner" => run_wigner(ctx),
        "quench" => run_quench(ctx),
        "ramp" => run_ramp(ctx),
        "scan" => run_scan(ctx),
        "mcwf" => run_mcwf(ctx),
        "diagnose" => run_diagnose(ctx),
        "map-params" => run_map_params(ctx),
        other => Err(invalid(format!("unknown subcommand {other}"))),
    }
}

/// Eigenvalue selection from the `[spectrum]` block (absent → all).
fn spectrum_range(cfg: &RunConfig, dim: usize) -> RunResult<EigRange> {
    let Some(b) = cfg.spectrum else { return Ok(EigRange::All) };
    match (b.levels, b.window) {
        (Some(_), Some(_)) => {
            Err(invalid("[spectrum]: provide at most one of `levels` and `window`"))
        }
        (Some(0), None) => Err(invalid("[spectrum]: levels must be ≥ 1")),
        (Some(k), None) if k > dim => Err(invalid(format!(
            "[spectrum]: levels = {k} exceeds the space dimension {dim}"
        ))),
        (Some(k), None) => Ok(EigRange::Lowest(k)),
        (None, Some([lo, hi])) if lo > hi => {
            Err(invalid("[spectrum]: window needs lo ≤ hi"))
        }
        (None, Some([lo, hi])) => Ok(EigRange::Window { lo, hi }),
        (None, None) => Ok(EigRange::All),
    }
}

/// Diagonalize at the model's coupling and export the ladder, the Peres
/// lattice, and the landmark energies.
fn run_spectrum(ctx: &RunContext) -> RunResult<Vec<String>> {
    let model = ctx.cfg.resolve_model()?;
    let space = ctx.cfg.resolve_space(&model);
    let range = spectrum_range(&ctx.cfg, space.dim())?;
    let ham = ErmHamiltonian::new(model, space)?;
    let spec = diagonalize(&ham, range, true)?;
    if spec.is_empty() {
        return Err(invalid("[spectrum]: the energy window selected no levels"));
    }

    write_spectrum_csv(ctx.writer("spectrum.csv")?, &spectrum_rows(&spec))?;
    let peres = peres_lattice(&spec)?;
    write_peres_csv(ctx.writer("peres.csv")?, &peres)?;

    let cs = critical_set(model.coupling, model.regime);
    let emergent_count = peres.iter().filter(|p| p.emergent).count();
    let summary = json!({
        "n_levels": spec.len(),
        "ground_energy": spec.ground_energy(),
        "emergent_count": emergent_count,
        "e_vac": cs.e_vac,
        "e_min": cs.e_min,
        "e_sad": cs.e_sad,
        "fock_cutoff": space.fock_cutoff,
    });
    ctx.write_summary("spectrum_summary.json", &summary)?;
    Ok(vec!["spectrum.csv".into(), "peres.csv".into(), "spectrum_summary.json".into()])
}

/// Classify the (λ, δ) plane: phase labels, landmark energies, and (in
/// the trapping phases) the phase-space volumes.
fn run_phase_map(ctx: &RunContext) -> RunResult<Vec<String>> {
    let Some(pm) = ctx.cfg.phase_map else {
        return Err(invalid("phase-map needs a [phase_map] block"));
    };
    pm.lambda.validate("phase_map.lambda")?;
    pm.delta.validate("phase_map.delta")?;
    if pm.lambda.min < 0.0 {
        return Err(invalid("phase_map.lambda: couplings must be ≥ 0"));
    }
    if pm.delta.min < -1.0 || pm.delta.max > 1.0 {
        return Err(invalid("phase_map.delta: the regime parameter lies in [-1, 1]"));
    }

    let lambdas = pm.lambda.values();
    let deltas = pm.delta.values();
    let pairs: Vec<(f64, f64)> = lambdas
        .iter()
        .flat_map(|&l| deltas.iter().map(move |&d| (l, d)))
        .collect();
    let rows: Vec<PhaseMapRow> =
        pairs.par_iter().map(|&(l, d)| PhaseMapRow::at(l, d)).collect();
    write_phase_map_csv(ctx.writer("phase_map.csv")?, &rows)?;

    let mut phases = BTreeMap::<String, usize>::new();
    for r in &rows {
        *phases.entry(r.phase.clone()).or_insert(0) += 1;
    }
    let summary = json!({ "points": rows.len(), "phases": phases });
    ctx.write_summary("phase_map_summary.json", &summary)?;
    Ok(vec!["phase_map.csv".into(), "phase_map_summary.json".into()])
}

/// Smoothed density of states over the full ladder.
fn run_dos(ctx: &RunContext) -> RunResult<Vec<String>> {
    let block = ctx.cfg.dos.unwrap_or_default();
    let model = ctx.cfg.resolve_model()?;
    let space = ctx.cfg.resolve_space(&model);
    let ham = ErmHamiltonian::new(model, space)?;
    let spec = diagonalize(&ham, EigRange::All, false)?;

    let sigma = match block.sigma {
        Some(s) if s > 0.0 => s,
        Some(s) => return Err(invalid(format!("[dos]: sigma = {s} must be positive"))),
        None => default_smoothing_width(&spec.energies),
    };
    let points = block.points.unwrap_or(400);
    if points < 2 {
        return Err(invalid("[dos]: need at least two grid points"));
    }
    let grid = dos_grid(&spec.energies, sigma, points);
    let dos = smoothed_dos(&spec.energies, sigma, &grid);
    write_dos_csv(ctx.writer("dos.csv")?, &grid, &dos)?;

    let summary = json!({
        "n_levels": spec.len(),
        "sigma": sigma,
        "ground_energy": spec.ground_energy(),
        "top_energy": spec.energies[spec.len() - 1],
    });
    ctx.write_summary("dos_summary.json", &summary)?;
    Ok(vec!["dos.csv".into(), "dos_summary.json".into()])
}

/// Track the lowest levels across a coupling sweep.
fn run_levels(ctx: &RunContext) -> RunResult<Vec<String>> {
    let Some(lb) = ctx.cfg.levels else {
        return Err(invalid("levels needs a [levels] block"));
    };
    lb.lambda.validate("levels.lambda")?;
    if lb.lambda.min < 0.0 {
        return Err(invalid("levels.lambda: couplings must be ≥ 0"));
    }
    if lb.count == 0 {
        return Err(invalid("levels.count must be ≥ 1"));
    }

    let model = ctx.cfg.resolve_model()?;
    // The truncation must hold at the strongest coupling of the sweep,
    // not just at the model's final value.
    let cutoff = ctx
        .cfg
        .space
        .and_then(|s| s.fock_cutoff)
        .unwrap_or_else(|| suggest_cutoff(model.system_size, model.coupling.max(lb.lambda.max)));
    let space = HilbertSpace::new(cutoff);
    if lb.count > space.dim() {
        return Err(invalid(format!(
            "levels.count = {} exceeds the space dimension {}",
            lb.count,
            space.dim()
        )));
    }

    let ham = ErmHamiltonian::new(model, space)?;
    let flow = level_dynamics(&ham, &lb.lambda.values(), lb.count)?;
    write_spectrum_csv(ctx.writer("levels.csv")?, &level_flow_rows(&flow))?;

    let summary = json!({
        "grid_points": flow.lambdas.len(),
        "levels": lb.count,
        "fock_cutoff": cutoff,
    });
    ctx.write_summary("levels_summary.json", &summary)?;
    Ok(vec!["levels.csv".into(), "levels_summary.json".into()])
}

/// Wigner function of one eigenstate's motional reduction.
fn run_wigner(ctx: &RunContext) -> RunResult<Vec<String>> {
    let Some(wb) = ctx.cfg.wigner else {
        return Err(invalid("wigner needs a [wigner] block"));
    };
    let model = ctx.cfg.resolve_model()?;
    let space = ctx.cfg.resolve_space(&model);
    if wb.state_index >= space.dim() {
        return Err(invalid(format!(
            "[wigner]: state_index = {} exceeds the space dimension {}",
            wb.state_index,
            space.dim()
        )));
    }

    let ham = ErmHamiltonian::new(model, space)?;
    let spec = diagonalize(&ham, EigRange::Lowest(wb.state_index + 1), true)?;
    let psi = spec.state(wb.state_index).expect("selection covers the index");
    let rho = reduced_motional(&psi);

    let (x_grid, p_grid) = match (wb.points, wb.extent) {
        (None, None) => default_wigner_grid(model.system_size, model.coupling, model.regime),
        (points, extent) => {
            let n = points.unwrap_or(201);
            if n < 2 {
                return Err(invalid("[wigner]: need at least two grid points per axis"));
            }
            let ext = match extent {
                Some(e) if e > 0.0 => e,
                Some(e) => {
                    return Err(invalid(format!("[wigner]: extent = {e} must be positive")))
                }
                None => {
                    let cs = critical_set(model.coupling, model.regime);
                    1.5 * cs.x_c.max(cs.p_c.unwrap_or(0.0)).max(3.0 / model.system_size.sqrt())
                }
            };
            let axis: Vec<f64> = (0..n)
                .map(|i| -ext + 2.0 * ext * i as f64 / (n - 1) as f64)
                .collect();
            (axis.clone(), axis)
        }
    };

    let values = wigner(&rho, model.system_size, &x_grid, &p_grid)?;
    write_wigner_csv(ctx.writer("wigner.csv")?, &x_grid, &p_grid, &values)?;

    let summary = json!({
        "state_index": wb.state_index,
        "energy": spec.energies[wb.state_index],
        "points_per_axis": x_grid.len(),
        "extent": x_grid[x_grid.len() - 1],
    });
    ctx.write_summary("wigner_summary.json", &summary)?;
    Ok(vec!["wigner.csv".into(), "wigner_summary.json".into()])
}

/// Strength function of a coupling quench: the ground state prepared at
/// `coupling_from`, decomposed over the eigenbasis at the model coupling.
fn run_quench(ctx: &RunContext) -> RunResult<Vec<String>> {
    let qb = ctx.cfg.quench.unwrap_or_default();
    if qb.coupling_from < 0.0 {
        return Err(invalid("[quench]: coupling_from must be ≥ 0"));
    }
    let model = ctx.cfg.resolve_model()?;
    let space = ctx.cfg.resolve_space(&model);
    let ham = ErmHamiltonian::new(model, space)?;

    let prep = diagonalize_at(&ham, qb.coupling_from, EigRange::Lowest(1), true)?;
    let psi0 = prep.state(0).expect("one state requested");
    let spec = diagonalize(&ham, EigRange::All, true)?;
    let points = strength_function(&psi0, &spec)?;
    write_strength_csv(ctx.writer("strength.csv")?, &points)?;

    let e_mean: f64 = points.iter().map(|p| p.weight * p.energy).sum();
    let participation = 1.0 / points.iter().map(|p| p.weight * p.weight).sum::<f64>();
    let summary = json!({
        "coupling_from": qb.coupling_from,
        "coupling_to": model.coupling,
        "prep_energy": prep.ground_energy(),
        "e_mean": e_mean,
        "participation": participation,
    });
    ctx.write_summary("quench_summary.json", &summary)?;
    Ok(vec!["strength.csv".into(), "quench_summary.json".into()])
}

/// Schrödinger ramp from the vacuum: witness series plus final-state
/// observables and integration statistics.
fn run_ramp(ctx: &RunContext) -> RunResult<Vec<String>> {
    let model = ctx.cfg.resolve_model()?;
    let space = ctx.cfg.resolve_space(&model);
    let protocol = ctx.cfg.resolve_protocol(&model)?;

    let out = propagate_schrodinger(
        &QuantumState::vacuum(space),
        &protocol,
        &ctx.tol,
        ctx.cfg.protocol_samples(),
    )?;
    write_witness_csv(ctx.writer("witness.csv")?, &out.witness)?;

    let fs = &out.final_state;
    let (p0, pdown) = (fs.p_vacuum_down(), fs.p_down());
    let summary = json!({
        "tau_f": protocol.tau_f,
        "p0": p0,
        "pdown": pdown,
        "p0_tilde": if pdown > 0.0 { p0 / pdown } else { 0.0 },
        "n_mean": fs.n_mean(),
        "jz_mean": fs.jz_mean(),
        "stats": out.stats,
    });
    ctx.write_summary("ramp_summary.json", &summary)?;
    Ok(vec!["witness.csv".into(), "ramp_summary.json".into()])
}

/// Final-state observables across a sweep of one protocol parameter.
fn run_scan(ctx: &RunContext) -> RunResult<Vec<String>> {
    let Some(sb) = ctx.cfg.scan else {
        return Err(invalid("scan needs a [scan] block"));
    };
    sb.grid.validate("scan.grid")?;
    match sb.axis {
        ScanAxis::Duration if sb.grid.min < 0.0 => {
            return Err(invalid("scan.grid: durations must be ≥ 0"));
        }
        ScanAxis::Regime if sb.grid.min < -1.0 || sb.grid.max > 1.0 => {
            return Err(invalid("scan.grid: the regime parameter lies in [-1, 1]"));
        }
        ScanAxis::SystemSize if sb.grid.min <= 0.0 => {
            return Err(invalid("scan.grid: system sizes must be positive"));
        }
        _ => {}
    }

    let model = ctx.cfg.resolve_model()?;
    let protocol = ctx.cfg.resolve_protocol(&model)?;
    let rows = ramp_scan(&protocol, sb.axis, &sb.grid.values(), &ctx.tol)?;
    write_scan_csv(ctx.writer("scan.csv")?, &rows)?;

    let summary = json!({ "axis": sb.axis, "points": rows.len() });
    ctx.write_summary("scan_summary.json", &summary)?;
    Ok(vec!["scan.csv".into(), "scan_summary.json".into()])
}

/// Per-channel jump totals with named fields for the summary.
#[derive(Serialize)]
struct JumpTotals {
    motional_dephasing: u64,
    qubit_dephasing: u64,
    damping: u64,
    heating: u64,
}

impl From<[u64; 4]> for JumpTotals {
    fn from(t: [u64; 4]) -> Self {
        Self {
            motional_dephasing: t[0],
            qubit_dephasing: t[1],
            damping: t[2],
            heating: t[3],
        }
    }
}

/// Jump channels for a ramp in dimensionless time; an all-zero rate block
/// needs no energy scale.
fn resolve_channels(spec: &DissipatorSpec, model: &ModelParams) -> RunResult<NoiseModel> {
    let trivial = spec.motional_dephasing == 0.0
        && spec.qubit_dephasing == 0.0
        && spec.heating == 0.0
        && spec.damping_rate() == 0.0;
    if trivial {
        return Ok(NoiseModel::none());
    }
    build_dissipators(spec, model).map_err(|e| RunError::Config(ConfigError::Invalid(e.to_string())))
}

/// Monte-Carlo wave-function ramp from the vacuum.
fn run_mcwf(ctx: &RunContext) -> RunResult<Vec<String>> {
    let Some(mb) = ctx.cfg.mcwf else {
        return Err(invalid("mcwf needs an [mcwf] block"));
    };
    if mb.n_traj == 0 {
        return Err(invalid("[mcwf]: n_traj must be ≥ 1"));
    }
    let seed = ctx.require_seed()?;
    let model = ctx.cfg.resolve_model()?;
    let space = ctx.cfg.resolve_space(&model);
    let protocol = ctx.cfg.resolve_protocol(&model)?;
    let noise = resolve_channels(&ctx.cfg.resolve_noise()?, &model)?;

    let opts = McwfOptions {
        samples: mb.samples.unwrap_or(101),
        tol: ctx.tol,
        ..McwfOptions::default()
    };
    let ens = mcwf_evolve(&QuantumState::vacuum(space), &protocol, &noise, mb.n_traj, seed, &opts)?;
    write_mcwf_series_csv(ctx.writer("mcwf_series.csv")?, &ens)?;

    let summary = json!({
        "n_traj": ens.n_traj,
        "seed": ens.seed,
        "incidents": ens.incidents,
        "jump_totals": JumpTotals::from(ens.jump_totals),
        "observables": {
            "p0": mcwf_expectation(&ens, McwfObservable::Vacuum),
            "pdown": mcwf_expectation(&ens, McwfObservable::SpinDown),
            "n_mean": mcwf_expectation(&ens, McwfObservable::NMean),
            "jz_mean": mcwf_expectation(&ens, McwfObservable::JzMean),
            "p0_tilde": mcwf_expectation(&ens, McwfObservable::VacuumConditional),
        },
    });
    ctx.write_summary("mcwf_summary.json", &summary)?;
    Ok(vec!["mcwf_series.csv".into(), "mcwf_summary.json".into()])
}

/// Salt separating the readout stage's RNG from the preparation stage's.
const READOUT_SEED_SALT: u64 = 0x9E37_79B9_7F4A_7C15;

/// Two-stage measurement pipeline: ramp (unitary or MCWF), project onto
/// the qubit-down sector, drive the blue sideband in lab time, and
/// recover the vacuum population from the Rabi signal.
fn run_diagnose(ctx: &RunContext) -> RunResult<Vec<String>> {
    let Some(block) = ctx.cfg.diagnose else {
        return Err(invalid("diagnose needs a [diagnose] block"));
    };
    if !(block.drive2_hz > 0.0) {
        return Err(invalid("[diagnose]: drive2_hz must be positive"));
    }
    if !(block.t_max_seconds > 0.0) {
        return Err(invalid("[diagnose]: t_max_seconds must be positive"));
    }
    let points = block.points.unwrap_or(200);
    if points < 4 {
        return Err(invalid("[diagnose]: need at least four signal points"));
    }

    let model = ctx.cfg.resolve_model()?;
    let space = ctx.cfg.resolve_space(&model);
    let protocol = ctx.cfg.resolve_protocol(&model)?;
    let spec = ctx.cfg.resolve_noise()?;
    let eta_omega2 = 2.0 * PI * block.drive2_hz;
    let t_grid: Vec<f64> = (0..points)
        .map(|k| block.t_max_seconds * k as f64 / (points - 1) as f64)
        .collect();

    let ramp_traj = block.ramp_trajectories.unwrap_or(0);
    let bsb_traj = block.bsb_trajectories.unwrap_or(0);
    let seed = if ramp_traj > 0 || bsb_traj > 0 { Some(ctx.require_seed()?) } else { None };

    // Stage 1: the post-ramp motional ensemble, conditioned on |↓⟩.  Each
    // member carries its spin-down sector population as weight.
    let vacuum = QuantumState::vacuum(space);
    let (members, pdown_ref) = if ramp_traj == 0 {
        let out =
            propagate_schrodinger(&vacuum, &protocol, &ctx.tol, ctx.cfg.protocol_samples())?;
        let (motional, pdown) = down_project(&out.final_state)?;
        (vec![(1.0, motional)], pdown)
    } else {
        let noise = resolve_channels(&spec, &model)?;
        let opts = McwfOptions { samples: 2, tol: ctx.tol, keep_states: true, ..McwfOptions::default() };
        let ens =
            mcwf_evolve(&vacuum, &protocol, &noise, ramp_traj, seed.expect("checked above"), &opts)?;
        let mut members = Vec::new();
        let mut pdown_sum = 0.0;
        for rec in &ens.records {
            let flat = rec.final_flat.as_ref().expect("keep_states was set");
            let state = QuantumState::from_interleaved(space, flat);
            // A trajectory with no spin-down amplitude cannot contribute
            // to the conditioned ensemble.
            if let Ok((motional, pdown)) = down_project(&state) {
                pdown_sum += pdown;
                members.push((pdown, motional));
            }
        }
        if members.is_empty() {
            return Err(RunError::Numeric(
                "no trajectory retained spin-down amplitude after the ramp".into(),
            ));
        }
        (members, pdown_sum / ens.records.len() as f64)
    };

    // Conditional reference populations (ratio of ensemble means).
    let nfock = members[0].1.len();
    let wtotal: f64 = members.iter().map(|(w, _)| w).sum();
    let mut populations_ref = vec![0.0; nfock];
    for (w, m) in &members {
        for (n, a) in m.iter().enumerate() {
            populations_ref[n] += w * a.norm_sqr();
        }
    }
    for p in populations_ref.iter_mut() {
        *p /= wtotal;
    }
    let p0_ref = populations_ref[0];

    // Stage 2: the blue-sideband Rabi signal.  Without readout
    // trajectories the signal is the ideal (noiseless) frequency comb.
    let signal = if bsb_traj == 0 {
        if members.len() == 1 {
            blue_sideband_drive(MotionalInput::Pure(&members[0].1), eta_omega2, &t_grid, None)?
        } else {
            let mut rho = nd::Array2::zeros((nfock, nfock));
            for (n, &p) in populations_ref.iter().enumerate() {
                rho[[n, n]] = C64::new(p, 0.0);
            }
            blue_sideband_drive(MotionalInput::Mixed(&rho), eta_omega2, &t_grid, None)?
        }
    } else {
        blue_sideband_members(
            &members,
            eta_omega2,
            &t_grid,
            &spec,
            bsb_traj,
            seed.expect("checked above") ^ READOUT_SEED_SALT,
        )?
    };
    write_rabi_csv(ctx.writer("rabi.csv")?, &signal)?;

    let n_components = match block.fit_components {
        Some(0) => return Err(invalid("[diagnose]: fit_components must be ≥ 1")),
        Some(k) => k,
        None => default_fit_components(&populations_ref),
    };
    let fit = extract_vacuum_population(&signal, eta_omega2, n_components)?;

    let summary = json!({
        "stage1": {
            "pdown": pdown_ref,
            "p0_tilde": p0_ref,
            "n_members": members.len(),
            "populations": &populations_ref[..n_components.min(nfock)],
        },
        "fit": fit,
        "p0_reference": p0_ref,
        "eta_omega2": eta_omega2,
    });
    ctx.write_summary("diagnose_summary.json", &summary)?;
    Ok(vec!["rabi.csv".into(), "diagnose_summary.json".into()])
}

/// Map a laboratory trap block to the dimensionless model, with the
/// feasibility report.
fn run_map_params(ctx: &RunContext) -> RunResult<Vec<String>> {
    let trap = ctx
        .cfg
        .trap_params()?
        .ok_or_else(|| invalid("map-params needs a [trap] block"))?;
    let model = trap.map_to_model().map_err(ConfigError::Param)?;
    let feasibility =
        trap.check_feasibility(ctx.cfg.protocol.and_then(|p| p.t_f_seconds));

    let summary = json!({
        "model": {
            "system_size": model.system_size,
            "coupling": model.coupling,
            "regime": model.regime,
            "energy_scale_hz": model.energy_scale.map(|e| e / (2.0 * PI)),
        },
        "feasibility": feasibility,
    });
    ctx.write_summary("map_params.json", &summary)?;
    Ok(vec!["map_params.json".into()])
}
