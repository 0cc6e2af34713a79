//! Model and trap parameter sets, the laboratory ↔ model mapping, and
//! feasibility checks.
//!
//! The dimensionless model is controlled by three numbers:
//!
//! - `system_size` `Δ` — plays the role of an inverse effective Planck
//!   constant (`Δ → ∞` is the classical limit);
//! - `coupling` `λ` — interaction strength (ground-state criticality at
//!   `λ = 1`);
//! - `regime` `δ ∈ [-1, 1]` — drive asymmetry between the
//!   Jaynes-Cummings-type and anti-Jaynes-Cummings-type couplings.
//!
//! A fourth, dimensional quantity `energy_scale` (`ε/ħ` in rad/s) connects
//! dimensionless time `τ` to laboratory time through `τ = (ε/ħ)·√Δ·t`;
//! it is optional for purely dimensionless work.
//!
//! Laboratory parameters map onto the model as
//!
//! ```text
//!     ε = (ħ/2)·√(δb² − δr²)          Δ = (δb + δr)/(δb − δr)
//!     Λ = η·(Ω₁ + Ω₂)/2               λ = 2Λ/√(δb² − δr²)
//!     δ = (Ω₁ − Ω₂)/(Ω₁ + Ω₂)
//! ```
//!
//! under the sign conventions `δr + δb < 0` and `δr > δb` (both detunings
//! negative, the blue one larger in magnitude).  The mapping assumes the
//! bichromatic rotating-wave treatment, which requires `|δ_{r,b}| ≪ ν` and
//! `η ≪ 1`; [`TrapParams::check_feasibility`] reports how well a parameter
//! set honors those assumptions without rejecting anything.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ParamError {
    /// Returned when the effective system size is not positive.
    #[error("invalid model parameters: system_size must be positive, got {0}")]
    NonPositiveSystemSize(f64),

    /// Returned when the coupling strength is negative.
    #[error("invalid model parameters: coupling must be non-negative, got {0}")]
    NegativeCoupling(f64),

    /// Returned when the drive asymmetry leaves [-1, 1].
    #[error("invalid model parameters: regime must lie in [-1, 1], got {0}")]
    RegimeOutOfRange(f64),

    /// Returned when a lab-time conversion is requested without an energy
    /// scale.
    #[error("missing energy scale: lab-time conversion needs energy_scale (ε/ħ)")]
    MissingEnergyScale,

    /// Returned when a parameter that must be a finite number is not.
    #[error("invalid parameters: {0} must be finite")]
    NonFinite(&'static str),

    /// Returned when the detunings violate the sign convention
    /// `δr + δb < 0`, `δr > δb`.
    #[error("detuning convention violated: need δr + δb < 0 and δr > δb, got δr = {0}, δb = {1}")]
    DetuningConvention(f64, f64),

    /// Returned when `δb² ≤ δr²`, which makes the energy scale vanish or
    /// turn imaginary (the system size Δ degenerates).
    #[error("degenerate detunings: need δb² > δr², got δr = {0}, δb = {1}")]
    DegenerateDetunings(f64, f64),

    /// Returned when both drive strengths vanish but the asymmetry is
    /// needed.
    #[error("undefined regime: Ω₁ + Ω₂ = 0 leaves the drive asymmetry undefined")]
    ZeroDrive,

    /// Returned when trap quantities that must be positive are not.
    #[error("invalid trap parameters: {0} must be positive, got {1}")]
    NonPositiveTrap(&'static str, f64),
}

pub type ParamResult<T> = Result<T, ParamError>;

/// Dimensionless model parameters (plus the optional lab energy scale).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Effective system size `Δ` (inverse effective Planck constant).
    pub system_size: f64,
    /// Coupling strength `λ ≥ 0`.
    pub coupling: f64,
    /// Drive asymmetry `δ ∈ [-1, 1]`.
    pub regime: f64,
    /// `ε/ħ` in rad/s; `None` for purely dimensionless work.
    pub energy_scale: Option<f64>,
}

impl ModelParams {
    /// Dimensionless parameters without a lab anchor.
    pub fn new(system_size: f64, coupling: f64, regime: f64) -> ParamResult<Self> {
        let p = Self { system_size, coupling, regime, energy_scale: None };
        p.validate()?;
        Ok(p)
    }

    /// Check all invariants.
    pub fn validate(&self) -> ParamResult<()> {
        if !self.system_size.is_finite() || !self.coupling.is_finite() || !self.regime.is_finite() {
            return Err(ParamError::NonFinite("model parameters"));
        }
        if self.system_size <= 0.0 {
            return Err(ParamError::NonPositiveSystemSize(self.system_size));
        }
        if self.coupling < 0.0 {
            return Err(ParamError::NegativeCoupling(self.coupling));
        }
        if !(-1.0..=1.0).contains(&self.regime) {
            return Err(ParamError::RegimeOutOfRange(self.regime));
        }
        if let Some(e) = self.energy_scale {
            if !e.is_finite() || e <= 0.0 {
                return Err(ParamError::NonFinite("energy_scale"));
            }
        }
        Ok(())
    }

    /// Same parameters at a different coupling (ramps sweep λ with
    /// everything else fixed).
    pub fn with_coupling(&self, coupling: f64) -> Self {
        Self { coupling, ..*self }
    }

    /// Dimensionless time from lab time: `τ = (ε/ħ)·√Δ·t`.
    pub fn tau_from_lab_time(&self, t_seconds: f64) -> ParamResult<f64> {
        let eps = self.energy_scale.ok_or(ParamError::MissingEnergyScale)?;
        Ok(eps * self.system_size.sqrt() * t_seconds)
    }

    /// Lab time from dimensionless time (inverse of
    /// [`Self::tau_from_lab_time`]).
    pub fn lab_time_from_tau(&self, tau: f64) -> ParamResult<f64> {
        let eps = self.energy_scale.ok_or(ParamError::MissingEnergyScale)?;
        Ok(tau / (eps * self.system_size.sqrt()))
    }

    /// Conversion factor from rates in 1/s to rates per unit `τ`
    /// (divide by `ε√Δ/ħ`).
    pub fn rate_to_dimensionless(&self, rate_per_s: f64) -> ParamResult<f64> {
        let eps = self.energy_scale.ok_or(ParamError::MissingEnergyScale)?;
        Ok(rate_per_s / (eps * self.system_size.sqrt()))
    }

    /// Construct trap parameters realizing this model, given a secular
    /// frequency and Lamb-Dicke parameter (the two degrees of freedom the
    /// model does not fix).  Requires `energy_scale`.
    pub fn realize_trap(&self, secular_freq: f64, lamb_dicke: f64) -> ParamResult<TrapParams> {
        self.validate()?;
        let eps = self.energy_scale.ok_or(ParamError::MissingEnergyScale)?;
        if secular_freq <= 0.0 {
            return Err(ParamError::NonPositiveTrap("secular_freq", secular_freq));
        }
        if lamb_dicke <= 0.0 {
            return Err(ParamError::NonPositiveTrap("lamb_dicke", lamb_dicke));
        }
        // Invert the mapping: with D = δb − δr and S = δb + δr,
        // Δ = S/D and ε/ħ = √(DS)/2 = |D|√Δ/2 fix both combinations; the
        // convention δr > δb makes D (and hence S) negative.
        let d = -2.0 * eps / self.system_size.sqrt();
        let s = self.system_size * d;
        let blue_detuning = 0.5 * (s + d);
        let red_detuning = 0.5 * (s - d);
        // Λ = λ·(ε/ħ) splits into the two drives via the asymmetry.
        let lam_total = self.coupling * eps;
        let omega_sum = 2.0 * lam_total / lamb_dicke;
        let rabi_red = 0.5 * omega_sum * (1.0 + self.regime);
        let rabi_blue = 0.5 * omega_sum * (1.0 - self.regime);
        let trap = TrapParams {
            secular_freq,
            red_detuning,
            blue_detuning,
            lamb_dicke,
            rabi_red,
            rabi_blue,
            qubit_freq: None,
        };
        trap.validate()?;
        Ok(trap)
    }
}

/// Laboratory trap and drive parameters (angular frequencies in rad/s).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrapParams {
    /// Secular (motional) frequency `ν`.
    pub secular_freq: f64,
    /// Red-sideband detuning `δr` (negative by convention).
    pub red_detuning: f64,
    /// Blue-sideband detuning `δb` (negative, `|δb| > |δr|`).
    pub blue_detuning: f64,
    /// Lamb-Dicke parameter `η`.
    pub lamb_dicke: f64,
    /// Red-sideband Rabi frequency `Ω₁` (peak value for ramps).
    pub rabi_red: f64,
    /// Blue-sideband Rabi frequency `Ω₂` (peak value).
    pub rabi_blue: f64,
    /// Qubit transition frequency `ω₀` (informational only).
    pub qubit_freq: Option<f64>,
}

impl TrapParams {
    /// Check all invariants.
    pub fn validate(&self) -> ParamResult<()> {
        let fields = [
            self.secular_freq,
            self.red_detuning,
            self.blue_detuning,
            self.lamb_dicke,
            self.rabi_red,
            self.rabi_blue,
        ];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(ParamError::NonFinite("trap parameters"));
        }
        if self.red_detuning + self.blue_detuning >= 0.0 || self.red_detuning <= self.blue_detuning {
            return Err(ParamError::DetuningConvention(self.red_detuning, self.blue_detuning));
        }
        if self.lamb_dicke <= 0.0 {
            return Err(ParamError::NonPositiveTrap("lamb_dicke", self.lamb_dicke));
        }
        if self.rabi_red < 0.0 {
            return Err(ParamError::NonPositiveTrap("rabi_red", self.rabi_red));
        }
        if self.rabi_blue < 0.0 {
            return Err(ParamError::NonPositiveTrap("rabi_blue", self.rabi_blue));
        }
        Ok(())
    }

    /// Map laboratory parameters onto the dimensionless model.
    pub fn map_to_model(&self) -> ParamResult<ModelParams> {
        self.validate()?;
        let (dr, db) = (self.red_detuning, self.blue_detuning);
        let disc = db * db - dr * dr;
        if disc <= 0.0 {
            return Err(ParamError::DegenerateDetunings(dr, db));
        }
        if self.rabi_red + self.rabi_blue <= 0.0 {
            return Err(ParamError::ZeroDrive);
        }
        let eps = 0.5 * disc.sqrt();
        let system_size = (db + dr) / (db - dr);
        let lam_total = self.lamb_dicke * (self.rabi_red + self.rabi_blue) / 2.0;
        let coupling = 2.0 * lam_total / disc.sqrt();
        let regime = (self.rabi_red - self.rabi_blue) / (self.rabi_red + self.rabi_blue);
        let p = ModelParams {
            system_size,
            coupling,
            regime,
            energy_scale: Some(eps),
        };
        p.validate()?;
        Ok(p)
    }

    /// Report how well this parameter set honors the approximations behind
    /// the model mapping (report-only, never an error).
    pub fn check_feasibility(&self, ramp_duration: Option<f64>) -> FeasibilityReport {
        let ratio_red = if self.secular_freq > 0.0 {
            self.red_detuning.abs() / self.secular_freq
        } else {
            f64::INFINITY
        };
        let ratio_blue = if self.secular_freq > 0.0 {
            self.blue_detuning.abs() / self.secular_freq
        } else {
            f64::INFINITY
        };
        let model = self.map_to_model().ok();
        let rescaled_duration = match (ramp_duration, &model) {
            (Some(t), Some(m)) => m.tau_from_lab_time(t).ok(),
            _ => None,
        };
        FeasibilityReport {
            ratio_red,
            ratio_blue,
            detuning_grade: Grade::for_ratio(ratio_red.max(ratio_blue)),
            lamb_dicke: self.lamb_dicke,
            lamb_dicke_grade: Grade::for_ratio(self.lamb_dicke / LAMB_DICKE_SCALE),
            sign_convention_ok: self.validate().is_ok(),
            model,
            ramp_duration,
            rescaled_duration,
        }
    }
}

/// Advisory thresholds for `|δ_{r,b}|/ν`: the mapping assumes the ratio is
/// small; these grades mirror demonstrated experimental bands.
pub const FEASIBILITY_PASS: f64 = 0.01;
pub const FEASIBILITY_WARN: f64 = 0.03;
/// The Lamb-Dicke grade reuses the same thresholds against `η/0.25`.
const LAMB_DICKE_SCALE: f64 = 25.0;

/// Advisory grade for a smallness ratio.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Grade {
    Pass,
    Warn,
    Fail,
}

impl Grade {
    fn for_ratio(r: f64) -> Self {
        if r <= FEASIBILITY_PASS {
            Grade::Pass
        } else if r <= FEASIBILITY_WARN {
            Grade::Warn
        } else {
            Grade::Fail
        }
    }
}

/// Output of [`TrapParams::check_feasibility`].
#[derive(Clone, Debug, Serialize)]
pub struct FeasibilityReport {
    /// `|δr|/ν`.
    pub ratio_red: f64,
    /// `|δb|/ν`.
    pub ratio_blue: f64,
    /// Grade for the worse of the two detuning ratios.
    pub detuning_grade: Grade,
    /// Lamb-Dicke parameter `η`.
    pub lamb_dicke: f64,
    /// Grade for the Lamb-Dicke expansion (`η ≪ 1`).
    pub lamb_dicke_grade: Grade,
    /// Whether the detuning sign conventions hold.
    pub sign_convention_ok: bool,
    /// The mapped model parameters, when the mapping is defined.
    pub model: Option<ModelParams>,
    /// Requested ramp duration in seconds, if any.
    pub ramp_duration: Option<f64>,
    /// The same duration in dimensionless time.
    pub rescaled_duration: Option<f64>,
}
