//! CSV and JSON serialization of every result type, plus the run
//! manifest.
//!
//! Every CSV schema is fixed by a row struct whose field order *is* the
//! column order; floats are written in shortest round-trip form, so a
//! given result always serializes to identical bytes.  Optional columns
//! (saddle energies and volumes outside the trapping regime) serialize as
//! empty cells.  JSON output is pretty-printed with stable key order:
//! struct keys appear in declaration order and map keys are sorted.
//!
//! Writers are generic over [`std::io::Write`] so they serve files,
//! buffers, and tests alike; the `*_path` helpers bolt on file creation.

use crate::dynamics::{ScanRow, WitnessSeries};
use crate::observables::PeresPoint;
use crate::opensys::RabiSignal;
use crate::semiclassics::{classify_phase, critical_set, phase_space_volumes};
use crate::spectrum::{LevelFlow, Spectrum};
use ndarray as nd;
use serde::Serialize;
use std::io::Write;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExportError {
    /// Filesystem failure.
    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    /// CSV encoding failure.
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    /// JSON encoding failure.
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    /// Inconsistent input lengths (ragged series).
    #[error("ragged input: {0}")]
    Ragged(String),
}

pub type ExportResult<T> = Result<T, ExportError>;

fn write_rows<W: Write, R: Serialize>(w: W, rows: &[R]) -> ExportResult<()> {
    let mut out = csv::Writer::from_writer(w);
    for row in rows {
        out.serialize(row)?;
    }
    out.flush()?;
    Ok(())
}

/// One spectrum line: `lambda,index,energy,parity`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SpectrumRow {
    pub lambda: f64,
    /// Position in the full ascending ladder.
    pub index: usize,
    pub energy: f64,
    pub parity: i8,
}

/// Rows of a single-coupling spectrum.
pub fn spectrum_rows(spec: &Spectrum) -> Vec<SpectrumRow> {
    let lambda = spec.params.coupling;
    spec.energies
        .iter()
        .zip(&spec.parities)
        .zip(&spec.ladder_index)
        .map(|((&energy, &parity), &index)| SpectrumRow { lambda, index, energy, parity })
        .collect()
}

/// Rows of a level flow across a coupling grid, grid-major.
pub fn level_flow_rows(flow: &LevelFlow) -> Vec<SpectrumRow> {
    let mut rows = Vec::with_capacity(flow.lambdas.len() * flow.energies.ncols());
    for (g, &lambda) in flow.lambdas.iter().enumerate() {
        for k in 0..flow.energies.ncols() {
            rows.push(SpectrumRow {
                lambda,
                index: k,
                energy: flow.energies[[g, k]],
                parity: flow.parities[[g, k]],
            });
        }
    }
    rows
}

pub fn write_spectrum_csv<W: Write>(w: W, rows: &[SpectrumRow]) -> ExportResult<()> {
    write_rows(w, rows)
}

/// One phase-diagram grid point:
/// `lambda,delta,phase,e_min,e_sad,v_minus,v_plus`.
///
/// The saddle energy and window volumes exist only in the trapping
/// phases (`λ|δ| > 1`) and appear as empty cells elsewhere.
#[derive(Clone, Debug, Serialize)]
pub struct PhaseMapRow {
    pub lambda: f64,
    pub delta: f64,
    /// Phase label (`N`, `S1`, `S2`, `S2'`).
    pub phase: String,
    pub e_min: f64,
    pub e_sad: Option<f64>,
    pub v_minus: Option<f64>,
    pub v_plus: Option<f64>,
}

impl PhaseMapRow {
    /// Evaluate the classification, critical energies, and (in the
    /// trapping phases) the phase-space volumes at one grid point.
    pub fn at(lambda: f64, delta: f64) -> Self {
        let cls = classify_phase(lambda, delta);
        let cs = critical_set(lambda, delta);
        let (v_minus, v_plus) = match phase_space_volumes(lambda, delta) {
            Ok(v) => (Some(v.v_minus), Some(v.v_plus)),
            Err(_) => (None, None),
        };
        Self {
            lambda,
            delta,
            phase: cls.phase.to_string(),
            e_min: cs.e_min,
            e_sad: cs.e_sad,
            v_minus,
            v_plus,
        }
    }
}

pub fn write_phase_map_csv<W: Write>(w: W, rows: &[PhaseMapRow]) -> ExportResult<()> {
    write_rows(w, rows)
}

/// One Peres-lattice line:
/// `energy,n_mean,jz_mean,parity,entropy,emergent_flag`.
#[derive(Clone, Copy, Debug, Serialize)]
struct PeresRow {
    energy: f64,
    n_mean: f64,
    jz_mean: f64,
    parity: i8,
    entropy: f64,
    emergent_flag: bool,
}

pub fn write_peres_csv<W: Write>(w: W, points: &[PeresPoint]) -> ExportResult<()> {
    let rows: Vec<PeresRow> = points
        .iter()
        .map(|p| PeresRow {
            energy: p.energy,
            n_mean: p.n_mean,
            jz_mean: p.jz_mean,
            parity: p.parity,
            entropy: p.entropy,
            emergent_flag: p.emergent,
        })
        .collect();
    write_rows(w, &rows)
}

/// One Wigner-function sample: `x,p,w`.
#[derive(Clone, Copy, Debug, Serialize)]
struct WignerRow {
    x: f64,
    p: f64,
    w: f64,
}

/// Serialize a Wigner grid `values[[i, j]] = W(x_grid[i], p_grid[j])`,
/// x-major.
pub fn write_wigner_csv<W: Write>(
    w: W,
    x_grid: &[f64],
    p_grid: &[f64],
    values: &nd::Array2<f64>,
) -> ExportResult<()> {
    if values.dim() != (x_grid.len(), p_grid.len()) {
        return Err(ExportError::Ragged(format!(
            "wigner grid is {:?}, axes are {}×{}",
            values.dim(),
            x_grid.len(),
            p_grid.len()
        )));
    }
    let mut out = csv::Writer::from_writer(w);
    for (i, &x) in x_grid.iter().enumerate() {
        for (j, &p) in p_grid.iter().enumerate() {
            out.serialize(WignerRow { x, p, w: values[[i, j]] })?;
        }
    }
    out.flush()?;
    Ok(())
}

/// One strength-function line: `energy,weight`.
#[derive(Clone, Copy, Debug, Serialize)]
struct StrengthRow {
    energy: f64,
    weight: f64,
}

pub fn write_strength_csv<W: Write>(
    w: W,
    points: &[crate::observables::StrengthPoint],
) -> ExportResult<()> {
    let rows: Vec<StrengthRow> =
        points.iter().map(|p| StrengthRow { energy: p.energy, weight: p.weight }).collect();
    write_rows(w, &rows)
}

/// One smoothed density-of-states sample: `energy,dos`.
#[derive(Clone, Copy, Debug, Serialize)]
struct DosRow {
    energy: f64,
    dos: f64,
}

pub fn write_dos_csv<W: Write>(w: W, energy: &[f64], dos: &[f64]) -> ExportResult<()> {
    if energy.len() != dos.len() {
        return Err(ExportError::Ragged(format!(
            "dos series: {} energies vs {} values",
            energy.len(),
            dos.len()
        )));
    }
    let rows: Vec<DosRow> =
        energy.iter().zip(dos).map(|(&energy, &dos)| DosRow { energy, dos }).collect();
    write_rows(w, &rows)
}

/// One witness sample: `tau,lambda,h_mean,n_mean,jz_mean,p0`.
#[derive(Clone, Copy, Debug, Serialize)]
struct WitnessRow {
    tau: f64,
    lambda: f64,
    h_mean: f64,
    n_mean: f64,
    jz_mean: f64,
    p0: f64,
}

pub fn write_witness_csv<W: Write>(w: W, series: &WitnessSeries) -> ExportResult<()> {
    let n = series.tau.len();
    if [&series.lambda, &series.h_mean, &series.n_mean, &series.jz_mean, &series.p0]
        .iter()
        .any(|v| v.len() != n)
    {
        return Err(ExportError::Ragged("witness series columns differ in length".into()));
    }
    let mut out = csv::Writer::from_writer(w);
    for k in 0..n {
        out.serialize(WitnessRow {
            tau: series.tau[k],
            lambda: series.lambda[k],
            h_mean: series.h_mean[k],
            n_mean: series.n_mean[k],
            jz_mean: series.jz_mean[k],
            p0: series.p0[k],
        })?;
    }
    out.flush()?;
    Ok(())
}

/// Scan rows already carry their schema
/// (`axis_value,p0_tilde,pdown,n_mean,jz_mean`).
pub fn write_scan_csv<W: Write>(w: W, rows: &[ScanRow]) -> ExportResult<()> {
    write_rows(w, rows)
}

/// One sideband-signal sample: `t_seconds,jz_mean,jz_mre`.
#[derive(Clone, Copy, Debug, Serialize)]
struct RabiRow {
    t_seconds: f64,
    jz_mean: f64,
    jz_mre: f64,
}

pub fn write_rabi_csv<W: Write>(w: W, signal: &RabiSignal) -> ExportResult<()> {
    let n = signal.t_seconds.len();
    if signal.jz_mean.len() != n || signal.jz_mre.len() != n {
        return Err(ExportError::Ragged("rabi signal columns differ in length".into()));
    }
    let mut out = csv::Writer::from_writer(w);
    for k in 0..n {
        out.serialize(RabiRow {
            t_seconds: signal.t_seconds[k],
            jz_mean: signal.jz_mean[k],
            jz_mre: signal.jz_mre[k],
        })?;
    }
    out.flush()?;
    Ok(())
}

/// One trajectory-ensemble sample: per-observable ensemble mean and
/// standard error at each sample time
/// (`tau,lambda,p0,p0_sem,pdown,pdown_sem,n_mean,n_sem,jz_mean,jz_sem`).
#[derive(Clone, Copy, Debug, Serialize)]
struct McwfRow {
    tau: f64,
    lambda: f64,
    p0: f64,
    p0_sem: f64,
    pdown: f64,
    pdown_sem: f64,
    n_mean: f64,
    n_sem: f64,
    jz_mean: f64,
    jz_sem: f64,
}

pub fn write_mcwf_series_csv<W: Write>(
    w: W,
    ens: &crate::opensys::TrajectoryEnsemble,
) -> ExportResult<()> {
    let s = &ens.series;
    let n = s.time.len();
    if ens.lambda.len() != n
        || [&s.p0, &s.pdown, &s.n_mean, &s.jz_mean]
            .iter()
            .any(|m| m.mean.len() != n || m.sem.len() != n)
    {
        return Err(ExportError::Ragged("ensemble series columns differ in length".into()));
    }
    let mut out = csv::Writer::from_writer(w);
    for k in 0..n {
        out.serialize(McwfRow {
            tau: s.time[k],
            lambda: ens.lambda[k],
            p0: s.p0.mean[k],
            p0_sem: s.p0.sem[k],
            pdown: s.pdown.mean[k],
            pdown_sem: s.pdown.sem[k],
            n_mean: s.n_mean.mean[k],
            n_sem: s.n_mean.sem[k],
            jz_mean: s.jz_mean.mean[k],
            jz_sem: s.jz_mean.sem[k],
        })?;
    }
    out.flush()?;
    Ok(())
}

/// Pretty-printed JSON with a trailing newline.  Struct keys keep their
/// declaration order; map keys are sorted — both deterministic.
pub fn write_json_pretty<W: Write, T: Serialize>(mut w: W, value: &T) -> ExportResult<()> {
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    Ok(())
}

/// Write a JSON document to a path.
pub fn json_to_path<T: Serialize>(path: &Path, value: &T) -> ExportResult<()> {
    let f = std::fs::File::create(path)?;
    write_json_pretty(std::io::BufWriter::new(f), value)
}

/// Run provenance: enough to reconstruct the run from the output
/// directory alone.  Timestamps and wall time are the only fields allowed
/// to differ between byte-identical reruns.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    /// Tool name and version.
    pub tool: String,
    pub subcommand: String,
    pub seed: Option<u64>,
    pub workers: usize,
    pub tolerance_scale: f64,
    /// Unix timestamp (seconds) at run start.
    pub started_unix_seconds: u64,
    pub wall_seconds: f64,
    /// Files written by the run, relative to the output directory.
    pub outputs: Vec<String>,
    /// Full parsed configuration, echoed back.
    pub config: serde_json::Value,
}

impl RunManifest {
    pub fn new(subcommand: &str, config: serde_json::Value) -> Self {
        let started_unix_seconds = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Self {
            tool: format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")),
            subcommand: subcommand.to_string(),
            seed: None,
            workers: 0,
            tolerance_scale: 1.0,
            started_unix_seconds,
            wall_seconds: 0.0,
            outputs: Vec::new(),
            config,
        }
    }
}
