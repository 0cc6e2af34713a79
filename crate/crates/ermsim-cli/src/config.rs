//! Run configuration: a single structured file, TOML or JSON grammar,
//! feeding every subcommand.
//!
//! Exactly one of `[model]` / `[trap]` describes the physics; the other
//! blocks are read only by the subcommands that need them.  All `*_hz`
//! fields hold plain-Hz values and require the explicit declaration
//! `units = "2pi_hz"`; they are multiplied by 2π on ingestion (internal
//! storage is rad/s).  Decay rates in `[noise]` are plain 1/s and need no
//! unit key.  Unknown keys anywhere are rejected, so typos fail loudly.

use ermsim::dynamics::{RampProtocol, ScanAxis};
use ermsim::hilbert::{suggest_cutoff, HilbertSpace};
use ermsim::opensys::DissipatorSpec;
use ermsim::params::{ModelParams, TrapParams};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::Path;
use thiserror::Error;

/// Errors that make a run impossible before any computation starts
/// (exit status 2).
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {0}: {1}")]
    Unreadable(String, std::io::Error),

    /// Neither grammar parsed; both messages are reported.
    #[error("config parses as neither TOML ({toml}) nor JSON ({json})")]
    Unparseable { toml: String, json: String },

    #[error("{0}")]
    Invalid(String),

    #[error("parameters: {0}")]
    Param(#[from] ermsim::params::ParamError),

    #[error("protocol: {0}")]
    Protocol(#[from] ermsim::dynamics::DynError),
}

pub type ConfigResult<T> = Result<T, ConfigError>;

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

/// The accepted value of the `units` key.
pub const UNITS_2PI_HZ: &str = "2pi_hz";

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Must be `"2pi_hz"` whenever any `*_hz` field is present.
    pub units: Option<String>,
    pub model: Option<ModelBlock>,
    pub trap: Option<TrapBlock>,
    pub space: Option<SpaceBlock>,
    pub protocol: Option<ProtocolBlock>,
    pub noise: Option<NoiseBlock>,
    pub spectrum: Option<SpectrumBlock>,
    pub phase_map: Option<PhaseMapBlock>,
    pub levels: Option<LevelsBlock>,
    pub dos: Option<DosBlock>,
    pub wigner: Option<WignerBlock>,
    pub quench: Option<QuenchBlock>,
    pub scan: Option<ScanBlock>,
    pub mcwf: Option<McwfBlock>,
    pub diagnose: Option<DiagnoseBlock>,
    /// Master seed for trajectory subcommands (`--seed` overrides).
    pub seed: Option<u64>,
}

/// Dimensionless model parameters, with an optional lab anchor.
#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    /// Effective system size Δ.
    pub system_size: f64,
    /// Final coupling λ.
    pub coupling: f64,
    /// Drive asymmetry δ ∈ [−1, 1].
    pub regime: f64,
    /// Optional energy scale ε/ħ as plain Hz (needs `units`).
    pub energy_scale_hz: Option<f64>,
}

/// Laboratory trap and drive parameters, plain Hz (needs `units`).
#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TrapBlock {
    pub secular_freq_hz: f64,
    pub red_detuning_hz: f64,
    pub blue_detuning_hz: f64,
    pub lamb_dicke: f64,
    pub rabi_red_hz: f64,
    pub rabi_blue_hz: f64,
    pub qubit_freq_hz: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceBlock {
    /// Fock cutoff N_max; omitted → heuristic from (Δ, λ).
    pub fock_cutoff: Option<usize>,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolBlock {
    /// Ramp duration in dimensionless time (0 = quench).
    pub tau_f: Option<f64>,
    /// Ramp duration in lab seconds (needs an energy scale).
    pub t_f_seconds: Option<f64>,
    /// Witness samples over the protocol.
    pub samples: Option<usize>,
}

/// Decoherence rates, plain 1/s.
#[derive(Clone, Copy, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseBlock {
    #[serde(default)]
    pub motional_dephasing: f64,
    #[serde(default)]
    pub qubit_dephasing: f64,
    #[serde(default)]
    pub heating: f64,
    /// Defaults to `heating` (the n̄ ≫ 1 limit).
    pub damping: Option<f64>,
}

/// A uniform one-dimensional grid.
#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn validate(&self, name: &str) -> ConfigResult<()> {
        if !self.min.is_finite() || !self.max.is_finite() {
            return Err(invalid(format!("{name}: grid bounds must be finite")));
        }
        if self.points == 0 {
            return Err(invalid(format!("{name}: grid needs at least one point")));
        }
        if self.points == 1 && self.min != self.max {
            return Err(invalid(format!("{name}: a single-point grid needs min == max")));
        }
        if self.min > self.max {
            return Err(invalid(format!("{name}: grid needs min ≤ max")));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.min];
        }
        (0..self.points)
            .map(|i| self.min + (self.max - self.min) * i as f64 / (self.points - 1) as f64)
            .collect()
    }
}

#[derive(Clone, Copy, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumBlock {
    /// Keep the lowest `levels` eigenvalues (omitted → all).
    pub levels: Option<usize>,
    /// Alternative: an energy window `[lo, hi]`.
    pub window: Option<[f64; 2]>,
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseMapBlock {
    pub lambda: GridSpec,
    pub delta: GridSpec,
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct LevelsBlock {
    pub lambda: GridSpec,
    /// How many levels to track.
    pub count: usize,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DosBlock {
    /// Gaussian smoothing width (omitted → three mean level spacings).
    pub sigma: Option<f64>,
    /// Energy-grid size (default 400).
    pub points: Option<usize>,
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct WignerBlock {
    /// Ladder index of the eigenstate to transform.
    pub state_index: usize,
    /// Grid points per axis (default 201).
    pub points: Option<usize>,
    /// Half-width of the square grid (default from the critical set).
    pub extent: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct QuenchBlock {
    /// Prepare the ground state at this coupling, then quench to the
    /// model's coupling (default 0 → the vacuum).
    #[serde(default)]
    pub coupling_from: f64,
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ScanBlock {
    pub axis: ScanAxis,
    pub grid: GridSpec,
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct McwfBlock {
    pub n_traj: usize,
    /// Sample times over the protocol (default 101).
    pub samples: Option<usize>,
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnoseBlock {
    /// Sideband coupling ηΩ₂ of the diagnostic stage, plain Hz
    /// (needs `units`); may differ from the trap drive.
    pub drive2_hz: f64,
    /// Signal duration in lab seconds.
    pub t_max_seconds: f64,
    /// Signal samples (default 200).
    pub points: Option<usize>,
    /// Trajectories for the preparation ramp (0/omitted → unitary ramp).
    pub ramp_trajectories: Option<usize>,
    /// Trajectories for the sideband stage (0/omitted → closed form).
    pub bsb_trajectories: Option<usize>,
    /// Comb components in the vacuum fit (omitted → auto, 99.9% mass).
    pub fit_components: Option<usize>,
}

impl RunConfig {
    /// Load from a file, accepting either grammar: TOML is tried first,
    /// then JSON; if both fail, both messages are reported.
    pub fn load(path: &Path) -> ConfigResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Unreadable(path.display().to_string(), e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> ConfigResult<Self> {
        let toml_err = match toml::from_str::<Self>(text) {
            Ok(cfg) => return Ok(cfg),
            Err(e) => e.to_string(),
        };
        match serde_json::from_str::<Self>(text) {
            Ok(cfg) => Ok(cfg),
            Err(e) => Err(ConfigError::Unparseable { toml: toml_err, json: e.to_string() }),
        }
    }

    /// Echo as a JSON value (for manifests and diagnostics).
    pub fn echo(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    /// True when any plain-Hz field is present.
    fn uses_hz_fields(&self) -> bool {
        self.trap.is_some()
            || self.model.is_some_and(|m| m.energy_scale_hz.is_some())
            || self.diagnose.is_some()
    }

    /// Enforce the unit declaration for plain-Hz fields.
    pub fn check_units(&self) -> ConfigResult<()> {
        match self.units.as_deref() {
            Some(UNITS_2PI_HZ) => Ok(()),
            Some(other) => Err(invalid(format!(
                "units = {other:?} is not supported; the only accepted value is \"{UNITS_2PI_HZ}\""
            ))),
            None if self.uses_hz_fields() => Err(invalid(format!(
                "plain-Hz fields need an explicit `units = \"{UNITS_2PI_HZ}\"` declaration"
            ))),
            None => Ok(()),
        }
    }

    /// The trap block as internal rad/s quantities.
    pub fn trap_params(&self) -> ConfigResult<Option<TrapParams>> {
        self.check_units()?;
        let Some(t) = self.trap else { return Ok(None) };
        let two_pi = 2.0 * PI;
        let params = TrapParams {
            secular_freq: two_pi * t.secular_freq_hz,
            red_detuning: two_pi * t.red_detuning_hz,
            blue_detuning: two_pi * t.blue_detuning_hz,
            lamb_dicke: t.lamb_dicke,
            rabi_red: two_pi * t.rabi_red_hz,
            rabi_blue: two_pi * t.rabi_blue_hz,
            qubit_freq: t.qubit_freq_hz.map(|f| two_pi * f),
        };
        params.validate()?;
        Ok(Some(params))
    }

    /// Resolve the physics block: exactly one of `[model]` / `[trap]`.
    pub fn resolve_model(&self) -> ConfigResult<ModelParams> {
        match (&self.model, &self.trap) {
            (Some(_), Some(_)) => {
                Err(invalid("provide exactly one of [model] and [trap], not both"))
            }
            (None, None) => Err(invalid("provide one of [model] or [trap]")),
            (Some(m), None) => {
                self.check_units()?;
                let mut params = ModelParams::new(m.system_size, m.coupling, m.regime)?;
                params.energy_scale = m.energy_scale_hz.map(|f| 2.0 * PI * f);
                params.validate()?;
                Ok(params)
            }
            (None, Some(_)) => {
                let trap = self.trap_params()?.expect("trap block just matched");
                Ok(trap.map_to_model()?)
            }
        }
    }

    /// Resolve the truncated space: explicit cutoff, or the heuristic at
    /// the model's final coupling.
    pub fn resolve_space(&self, model: &ModelParams) -> HilbertSpace {
        let cutoff = self
            .space
            .and_then(|s| s.fock_cutoff)
            .unwrap_or_else(|| suggest_cutoff(model.system_size, model.coupling));
        HilbertSpace::new(cutoff)
    }

    /// Resolve the ramp protocol: exactly one duration field.
    pub fn resolve_protocol(&self, model: &ModelParams) -> ConfigResult<RampProtocol> {
        let Some(p) = self.protocol else {
            return Err(invalid("this subcommand needs a [protocol] block"));
        };
        let tau_f = match (p.tau_f, p.t_f_seconds) {
            (Some(_), Some(_)) => {
                return Err(invalid("[protocol]: provide exactly one of tau_f and t_f_seconds"))
            }
            (None, None) => {
                return Err(invalid("[protocol]: provide one of tau_f or t_f_seconds"))
            }
            (Some(tau), None) => tau,
            (None, Some(t)) => model.tau_from_lab_time(t)?,
        };
        Ok(RampProtocol::new(*model, tau_f)?)
    }

    /// Witness samples (default 400, the propagator minimum).
    pub fn protocol_samples(&self) -> usize {
        self.protocol.and_then(|p| p.samples).unwrap_or(400)
    }

    /// Resolve the noise block (absent → no decoherence).
    pub fn resolve_noise(&self) -> ConfigResult<DissipatorSpec> {
        let Some(n) = self.noise else { return Ok(DissipatorSpec::none()) };
        let spec = DissipatorSpec {
            motional_dephasing: n.motional_dephasing,
            qubit_dephasing: n.qubit_dephasing,
            heating: n.heating,
            damping: n.damping,
        };
        spec.validate().map_err(|e| invalid(format!("[noise]: {e}")))?;
        Ok(spec)
    }
}

/// One line of a validation report.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Report of `validate`: every check, plus the feasibility report when a
/// trap block is present.  Report-only — producing it never fails.
#[derive(Debug, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
    pub feasibility: Option<ermsim::params::FeasibilityReport>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Inspect every block the config references, without computing anything.
pub fn validate_config(cfg: &RunConfig) -> ValidationReport {
    let mut checks = Vec::new();
    let mut push = |name: &str, result: Result<String, String>| match result {
        Ok(detail) => checks.push(Check { name: name.into(), passed: true, detail }),
        Err(detail) => checks.push(Check { name: name.into(), passed: false, detail }),
    };

    push(
        "units",
        cfg.check_units().map(|_| "unit declaration consistent".into()).map_err(|e| e.to_string()),
    );
    let model = cfg.resolve_model();
    push(
        "physics block",
        model
            .as_ref()
            .map(|m| {
                format!(
                    "Δ = {}, λ = {}, δ = {}{}",
                    m.system_size,
                    m.coupling,
                    m.regime,
                    match m.energy_scale {
                        Some(e) => format!(", ε/ħ = {e} rad/s"),
                        None => String::new(),
                    }
                )
            })
            .map_err(|e| e.to_string()),
    );

    if let Ok(m) = &model {
        let space = cfg.resolve_space(m);
        push(
            "space",
            Ok(format!("Fock cutoff {} (dimension {})", space.fock_cutoff, space.dim())),
        );
        if cfg.protocol.is_some() {
            push(
                "protocol",
                cfg.resolve_protocol(m)
                    .map(|p| format!("τ_f = {}", p.tau_f))
                    .map_err(|e| e.to_string()),
            );
        }
    }

    push(
        "noise",
        cfg.resolve_noise()
            .map(|s| {
                format!(
                    "Γ_m = {}, Γ_q = {}, heating = {}, damping = {} (1/s)",
                    s.motional_dephasing,
                    s.qubit_dephasing,
                    s.heating,
                    s.damping_rate()
                )
            })
            .map_err(|e| e.to_string()),
    );

    for (name, grid) in [
        ("phase_map.lambda", cfg.phase_map.map(|b| b.lambda)),
        ("phase_map.delta", cfg.phase_map.map(|b| b.delta)),
        ("levels.lambda", cfg.levels.map(|b| b.lambda)),
        ("scan.grid", cfg.scan.map(|b| b.grid)),
    ] {
        if let Some(g) = grid {
            push(name, g.validate(name).map(|_| format!("{} points", g.points)).map_err(|e| e.to_string()));
        }
    }

    if let Some(m) = cfg.mcwf {
        push(
            "mcwf.n_traj",
            if m.n_traj > 0 {
                Ok(format!("{} trajectories", m.n_traj))
            } else {
                Err("need at least one trajectory".into())
            },
        );
        push(
            "mcwf.seed",
            if cfg.seed.is_some() {
                Ok("seed present".into())
            } else {
                Err("seed mandatory for trajectory runs (set `seed` or pass --seed)".into())
            },
        );
    }
    if let Some(d) = cfg.diagnose {
        push(
            "diagnose",
            if d.drive2_hz > 0.0 && d.t_max_seconds > 0.0 {
                Ok(format!("ηΩ₂ = 2π·{} Hz over {} s", d.drive2_hz, d.t_max_seconds))
            } else {
                Err("need drive2_hz > 0 and t_max_seconds > 0".into())
            },
        );
        let stochastic = d.ramp_trajectories.unwrap_or(0) > 0 || d.bsb_trajectories.unwrap_or(0) > 0;
        if stochastic && cfg.seed.is_none() {
            push("diagnose.seed", Err("seed mandatory for trajectory runs".into()));
        }
    }

    let feasibility = cfg
        .trap_params()
        .ok()
        .flatten()
        .map(|t| t.check_feasibility(cfg.protocol.and_then(|p| p.t_f_seconds)));
    ValidationReport { checks, feasibility }
}
