//! Coherent dynamics: coupling ramps, witness time series, projection onto
//! the qubit-down sector, and sweeps over protocol parameters.
//!
//! The workhorse protocol ramps the coupling linearly from zero,
//! `λ(τ) = λ_f·τ/τ_f`, holding `Δ` and `δ` fixed, with the vacuum
//! `|↓, 0⟩` as the default initial state.  Evolution integrates
//! `dψ/dτ = −i·ĥ(λ(τ))·ψ` in the interleaved parity layout with an
//! adaptive Runge-Kutta scheme that *never renormalizes*: the norm drift
//! over the whole run is reported as an integration-quality certificate.
//! The propagator samples a uniform grid of at least 400 times and records
//! the witness tuple `(⟨ĥ⟩_{λ(τ)}, ⟨n̂⟩, ⟨Ĵz⟩, P₀)`, whose departure from
//! the instantaneous ground line diagnoses the excited-state critical
//! region crossed by the ramp.
//!
//! A quench is the `τ_f = 0` limit: the protocol then evolves nothing and
//! hands the initial state to spectral tools (strength functions) at the
//! final coupling.

use crate::hamiltonian::ErmHamiltonian;
use crate::hilbert::{HilbertSpace, QuantumState, StateError, TAIL_FRACTION};
use crate::numeric::{Advance, AdaptiveRk, OdeError, OdeOptions, OdeRhs, StepOutcome};
use crate::params::{ModelParams, ParamError};
use crate::C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DynError {
    /// Returned when population reaches the Fock cutoff during evolution:
    /// results beyond this time would be truncation artifacts.
    #[error("cutoff pressure at τ = {tau:.4}: tail mass {mass:.3e} exceeds {threshold:.1e}; raise the Fock cutoff")]
    CutoffPressure { tau: f64, mass: f64, threshold: f64 },

    /// Returned when the step size underflows (stiffness or a tolerance
    /// far beyond reach).
    #[error("integration stalled at τ = {tau:.6}: step {h:.3e} underflowed")]
    Stiffness { tau: f64, h: f64 },

    /// Any other integrator failure.
    #[error("integrator: {0}")]
    Numeric(OdeError),

    /// Invalid state input.
    #[error("state: {0}")]
    State(#[from] StateError),

    /// Invalid parameters.
    #[error("parameters: {0}")]
    Param(#[from] ParamError),

    /// Returned when projecting onto a sector with no population.
    #[error("projection undefined: ⟨P̂↓⟩ = {0:.3e} is below 1e-12")]
    EmptyProjection(f64),
}

pub type DynResult<T> = Result<T, DynError>;

impl From<OdeError> for DynError {
    fn from(e: OdeError) -> Self {
        match e {
            OdeError::StepUnderflow(t, h) => DynError::Stiffness { tau: t, h },
            other => DynError::Numeric(other),
        }
    }
}

/// Linear coupling ramp `λ(τ) = λ_f·τ/τ_f` over `τ ∈ [0, τ_f]`.
///
/// `model.coupling` is the *final* coupling `λ_f`; `tau_f = 0` denotes a
/// quench (no evolution, parameters switched instantly).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RampProtocol {
    pub model: ModelParams,
    pub tau_f: f64,
}

impl RampProtocol {
    pub fn new(model: ModelParams, tau_f: f64) -> DynResult<Self> {
        model.validate()?;
        if !tau_f.is_finite() || tau_f < 0.0 {
            return Err(ParamError::NonFinite("tau_f").into());
        }
        Ok(Self { model, tau_f })
    }

    /// Instantaneous coupling at time `τ`.
    pub fn coupling_at(&self, tau: f64) -> f64 {
        if self.tau_f == 0.0 {
            self.model.coupling
        } else {
            self.model.coupling * (tau / self.tau_f).clamp(0.0, 1.0)
        }
    }
}

/// Integration controls for the propagators.
#[derive(Clone, Copy, Debug)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    /// Ceiling on the Fock-tail mass before aborting with
    /// [`DynError::CutoffPressure`].
    pub tail_threshold: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rtol: 1e-9, atol: 1e-12, tail_threshold: 1e-8 }
    }
}

impl Tolerances {
    /// Loosen or tighten both tolerances by a common factor (the CLI's
    /// `--tolerance-scale`).
    pub fn scaled(&self, factor: f64) -> Self {
        Self { rtol: self.rtol * factor, atol: self.atol * factor, ..*self }
    }
}

/// Witness time series sampled along a ramp.
#[derive(Clone, Debug, Default)]
pub struct WitnessSeries {
    pub tau: Vec<f64>,
    pub lambda: Vec<f64>,
    /// ⟨ĥ⟩ at the instantaneous coupling.
    pub h_mean: Vec<f64>,
    pub n_mean: Vec<f64>,
    pub jz_mean: Vec<f64>,
    /// Population of `|↓, 0⟩`.
    pub p0: Vec<f64>,
}

impl WitnessSeries {
    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau.is_empty()
    }
}

/// Integration statistics of one propagation.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct PropagationStats {
    /// |‖ψ(τ_f)‖ − ‖ψ(0)‖| over the whole run (no renormalization is
    /// applied, so this certifies the integration).
    pub norm_drift: f64,
    pub naccepted: u64,
    pub nrejected: u64,
    /// Largest observed Fock-tail mass.
    pub max_tail_mass: f64,
}

/// Output of [`propagate_schrodinger`].
#[derive(Clone, Debug)]
pub struct PropagationOutput {
    pub witness: WitnessSeries,
    /// Final state, normalized.
    pub final_state: QuantumState,
    pub stats: PropagationStats,
}

/// Minimum number of uniform witness samples per ramp.
pub const MIN_WITNESS_SAMPLES: usize = 400;

struct SchrodingerRhs<'a> {
    ham: &'a ErmHamiltonian,
    protocol: &'a RampProtocol,
}

impl OdeRhs for SchrodingerRhs<'_> {
    fn eval(&mut self, t: f64, y: &[C64], dy: &mut [C64]) {
        let lam = self.protocol.coupling_at(t);
        self.ham.matvec_interleaved(lam, y, dy, y.len());
        for v in dy.iter_mut() {
            // dψ = −i·(ĥψ).
            *v = C64::new(v.im, -v.re);
        }
    }

    fn spectral_bound(&self, t: f64, nwork: usize) -> f64 {
        self.ham.spectral_bound(self.protocol.coupling_at(t), nwork)
    }
}

/// Evolve `ψ₀` under the ramp, sampling the witness series on a uniform
/// grid of `max(samples, 400)` times (including both endpoints).
pub fn propagate_schrodinger(
    psi0: &QuantumState,
    protocol: &RampProtocol,
    tol: &Tolerances,
    samples: usize,
) -> DynResult<PropagationOutput> {
    let ham = ErmHamiltonian::new(protocol.model, psi0.space)?;
    let space = psi0.space;
    let y0 = psi0.to_interleaved();
    let nsamp = samples.max(MIN_WITNESS_SAMPLES);

    let mut witness = WitnessSeries::default();
    let mut stats = PropagationStats::default();
    let norm0 = psi0.norm();

    if protocol.tau_f == 0.0 {
        // Quench: parameters switch, the state does not move.
        record_witness(&mut witness, &ham, protocol, 0.0, &y0);
        return Ok(PropagationOutput {
            witness,
            final_state: normalized_from_flat(space, &y0),
            stats,
        });
    }

    let rhs = SchrodingerRhs { ham: &ham, protocol };
    let opts = OdeOptions { rtol: tol.rtol, atol: tol.atol, windowed: true, ..OdeOptions::default() };
    let mut stepper = AdaptiveRk::new(rhs, 0.0, y0, opts);
    let tail_from = ((space.fock_cutoff as f64) * TAIL_FRACTION).floor().max(1.0) as usize;

    record_witness(&mut witness, &ham, protocol, 0.0, stepper.y());
    for k in 1..nsamp {
        let t_k = protocol.tau_f * k as f64 / (nsamp - 1) as f64;
        match stepper.advance_to(t_k, |_, _| StepOutcome::Continue)? {
            Advance::Reached => {}
            Advance::Halted => unreachable!("observer never halts"),
        }
        record_witness(&mut witness, &ham, protocol, t_k, stepper.y());
        let tail = flat_tail_mass(stepper.y(), tail_from);
        stats.max_tail_mass = stats.max_tail_mass.max(tail);
        if tail > tol.tail_threshold {
            return Err(DynError::CutoffPressure {
                tau: t_k,
                mass: tail,
                threshold: tol.tail_threshold,
            });
        }
    }
    stats.naccepted = stepper.naccepted;
    stats.nrejected = stepper.nrejected;
    stats.norm_drift = (stepper.norm2().sqrt() - norm0).abs();
    Ok(PropagationOutput {
        witness,
        final_state: normalized_from_flat(space, stepper.y()),
        stats,
    })
}

fn record_witness(
    w: &mut WitnessSeries,
    ham: &ErmHamiltonian,
    protocol: &RampProtocol,
    tau: f64,
    y: &[C64],
) {
    let lam = protocol.coupling_at(tau);
    w.tau.push(tau);
    w.lambda.push(lam);
    w.h_mean.push(ham.mean_energy_interleaved(lam, y, y.len()));
    w.n_mean.push(flat_n_mean(y));
    w.jz_mean.push(flat_jz_mean(y));
    w.p0.push(flat_p0(y));
}

fn normalized_from_flat(space: HilbertSpace, y: &[C64]) -> QuantumState {
    let mut state = QuantumState::from_interleaved(space, y);
    let norm = state.norm();
    if norm > 0.0 {
        for a in state.amplitudes.iter_mut() {
            *a /= norm;
        }
    }
    state
}

/// ‖y‖² on interleaved amplitudes.
pub(crate) fn flat_norm_sqr(y: &[C64]) -> f64 {
    y.iter().map(|a| a.norm_sqr()).sum()
}

/// ⟨n̂⟩ on (possibly unnormalized) interleaved amplitudes.
pub(crate) fn flat_n_mean(y: &[C64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (j, a) in y.iter().enumerate() {
        let p = a.norm_sqr();
        num += (j / 2) as f64 * p;
        den += p;
    }
    if den > 0.0 { num / den } else { 0.0 }
}

/// ⟨Ĵz⟩ on interleaved amplitudes.
pub(crate) fn flat_jz_mean(y: &[C64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (j, a) in y.iter().enumerate() {
        let p = a.norm_sqr();
        num += if HilbertSpace::spin_of_interleaved(j) == 1 { 0.5 } else { -0.5 } * p;
        den += p;
    }
    if den > 0.0 { num / den } else { 0.0 }
}

/// Population of `|↓,0⟩` (interleaved slot 0) on interleaved amplitudes.
pub(crate) fn flat_p0(y: &[C64]) -> f64 {
    let den = flat_norm_sqr(y);
    if den > 0.0 { y[0].norm_sqr() / den } else { 0.0 }
}

/// Total spin-down population on interleaved amplitudes.
pub(crate) fn flat_p_down(y: &[C64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (j, a) in y.iter().enumerate() {
        let p = a.norm_sqr();
        if HilbertSpace::spin_of_interleaved(j) == 0 {
            num += p;
        }
        den += p;
    }
    if den > 0.0 { num / den } else { 0.0 }
}

/// Mass above Fock `from` on interleaved amplitudes, relative to the
/// total.
pub(crate) fn flat_tail_mass(y: &[C64], from: usize) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (j, a) in y.iter().enumerate() {
        let p = a.norm_sqr();
        if j / 2 >= from {
            num += p;
        }
        den += p;
    }
    if den > 0.0 { num / den } else { 0.0 }
}

/// Normalized motional state after projecting onto `|↓⟩`, plus the sector
/// population `⟨P̂↓⟩`.  Errors when the sector is empty (`⟨P̂↓⟩ < 1e-12`).
pub fn down_project(psi: &QuantumState) -> DynResult<(Vec<C64>, f64)> {
    let nfock = psi.space.fock_cutoff + 1;
    let mut motional: Vec<C64> = (0..nfock).map(|n| psi.amplitudes[2 * n]).collect();
    let p_down: f64 = motional.iter().map(|a| a.norm_sqr()).sum();
    let total = psi.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>();
    let p_down = if total > 0.0 { p_down / total } else { 0.0 };
    if p_down < 1e-12 {
        return Err(DynError::EmptyProjection(p_down));
    }
    let norm = motional.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    for a in motional.iter_mut() {
        *a /= norm;
    }
    Ok((motional, p_down))
}

/// Sweep axis for [`ramp_scan`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanAxis {
    /// Ramp duration `τ_f`.
    Duration,
    /// Drive asymmetry `δ`.
    Regime,
    /// System size `Δ` (the Fock cutoff adapts per point).
    SystemSize,
}

/// One row of a ramp scan: final-state observables at a grid value.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ScanRow {
    pub axis_value: f64,
    /// Conditional vacuum population `P₀/⟨P̂↓⟩`.
    pub p0_tilde: f64,
    pub pdown: f64,
    pub n_mean: f64,
    pub jz_mean: f64,
}

/// Run the ramp across a grid of one protocol parameter, starting from
/// the vacuum, and record final-state observables (grid points run in
/// parallel).
pub fn ramp_scan(
    base: &RampProtocol,
    axis: ScanAxis,
    grid: &[f64],
    tol: &Tolerances,
) -> DynResult<Vec<ScanRow>> {
    let rows: Vec<DynResult<ScanRow>> = grid
        .par_iter()
        .map(|&v| {
            let mut protocol = *base;
            match axis {
                ScanAxis::Duration => protocol.tau_f = v,
                ScanAxis::Regime => protocol.model.regime = v,
                ScanAxis::SystemSize => protocol.model.system_size = v,
            }
            protocol.model.validate()?;
            let cutoff = crate::hilbert::suggest_cutoff(
                protocol.model.system_size,
                protocol.model.coupling,
            );
            let space = HilbertSpace::new(cutoff);
            let out = propagate_schrodinger(
                &QuantumState::vacuum(space),
                &protocol,
                tol,
                MIN_WITNESS_SAMPLES,
            )?;
            let flat = out.final_state.to_interleaved();
            let p0 = flat_p0(&flat);
            let pdown = flat_p_down(&flat);
            Ok(ScanRow {
                axis_value: v,
                p0_tilde: if pdown > 0.0 { p0 / pdown } else { 0.0 },
                pdown,
                n_mean: flat_n_mean(&flat),
                jz_mean: flat_jz_mean(&flat),
            })
        })
        .collect();
    rows.into_iter().collect()
}
