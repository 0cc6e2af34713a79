//! Open-system dynamics: Monte-Carlo wave-function (MCWF) trajectories, a
//! small-cutoff dense density-matrix oracle, and the blue-sideband
//! Rabi-oscillation diagnostic with vacuum-population extraction.
//!
//! Noise enters through four jump operators, each rescaled from its lab
//! rate to the dimensionless time unit `ε√Δ/ħ`:
//!
//! - motional dephasing  `l_m ∝ √(2Γ_m)·n̂`,
//! - qubit dephasing     `l_q ∝ √(2Γ_q)·(Ĵz + 1/2)`,
//! - phonon damping      `l_d ∝ √(γ(n̄+1))·â`,
//! - phonon heating      `l_h ∝ √(γn̄)·â†`,
//!
//! with qubit relaxation deliberately omitted (its rate is negligible on
//! the millisecond protocols this models).  All four `l†l` are diagonal in
//! the interleaved basis, so the effective non-Hermitian Hamiltonian is
//! `𝔥 = ĥ − (i/2)·G` with `G` a nonnegative diagonal, and the squared
//! norm of an unnormalized trajectory decays monotonically — the survival
//! probability used for jump timing.
//!
//! An MCWF trajectory draws `ξ ~ U(0,1)`, integrates under `𝔥` until
//! `‖φ‖² = ξ`, locates the crossing inside the last accepted step by
//! Illinois root-finding on re-integrated probes, picks a channel with
//! probability `γ_j/Σγ`, applies the jump, renormalizes, redraws `ξ`, and
//! repeats.  Trajectories are bit-reproducible: trajectory `i` of master
//! seed `s` uses a counter-based RNG stream derived from `(s, i)`, and the
//! ensemble reduction runs in fixed chunk order regardless of worker
//! count.
//!
//! The diagnostic stage models a resonant blue-sideband drive
//! `H = (ħηΩ₂/2)(σ₊â† + σ₋â)` applied to the qubit-down projected
//! motional state, in lab time, producing `⟨Ĵz⟩(t)`; the vacuum
//! population is then recovered from the known frequency comb
//! `ηΩ₂√(n+1)` by nonnegative least squares with per-component damping
//! envelopes.

use crate::dynamics::{
    flat_jz_mean, flat_n_mean, flat_norm_sqr, flat_p0, flat_p_down, DynError, RampProtocol,
    Tolerances,
};
use crate::hamiltonian::ErmHamiltonian;
use crate::hilbert::{HilbertSpace, QuantumState, StateError};
use crate::numeric::jacobi::eigh_small;
use crate::numeric::lsq::{nnls, LsqError};
use crate::numeric::{Advance, AdaptiveRk, OdeError, OdeOptions, OdeRhs, StepOutcome};
use crate::params::{ModelParams, ParamError};
use crate::C64;
use ndarray as nd;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OpenError {
    /// Negative decay or heating rate.
    #[error("negative rate: {0} = {1}")]
    NegativeRate(&'static str, f64),

    /// Invalid model parameters (missing energy scale, ...).
    #[error("parameters: {0}")]
    Param(#[from] ParamError),

    /// Failure in the underlying coherent propagation.
    #[error("propagation: {0}")]
    Dyn(#[from] DynError),

    /// Invalid state input.
    #[error("state: {0}")]
    State(#[from] StateError),

    /// Integrator failure inside a trajectory or the dense oracle.
    #[error("integrator: {0}")]
    Numeric(#[from] OdeError),

    /// A trajectory kept producing non-monotone survival even after
    /// resampling with fresh RNG streams.
    #[error("trajectory {index} failed after {attempts} attempts (non-monotone survival)")]
    TrajectoryFailed { index: usize, attempts: u32 },

    /// The total jump weight vanished at a forced jump.
    #[error("all channel weights vanished at τ = {tau:.6} where a jump is required")]
    VanishingRates { tau: f64 },

    /// A trajectory exceeded the jump budget (runaway rates).
    #[error("trajectory {index} exceeded {budget} jumps")]
    RunawayJumps { index: usize, budget: usize },

    /// Dense-oracle request beyond its dimension bound.
    #[error("dense oracle supports dimensions ≤ {bound}, got {dim}")]
    OracleScope { dim: usize, bound: usize },

    /// Diagnostic signal too short to resolve the vacuum component.
    #[error("signal spans {periods:.2} vacuum periods; at least {MIN_VACUUM_PERIODS} are required")]
    ShortSignal { periods: f64 },

    /// Fit design matrix numerically degenerate.
    #[error("degenerate fit: {0}")]
    FitDegeneracy(String),

    /// Least-squares failure inside the extraction fit.
    #[error("least squares: {0}")]
    Lsq(#[from] LsqError),

    /// Malformed input grid or signal.
    #[error("bad input: {0}")]
    BadInput(String),
}

pub type OpenResult<T> = Result<T, OpenError>;

/// Physical decoherence rates, in lab units (1/s).
///
/// Only the heating *rate* `γn̄` is usually known, not `γ` and the thermal
/// occupation `n̄` separately; in the `n̄ ≫ 1` limit the damping rate
/// `γ(n̄+1)` approaches the same value, which is the default here unless
/// overridden.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct DissipatorSpec {
    /// Motional dephasing rate `Γ_m` (1/s).
    pub motional_dephasing: f64,
    /// Qubit dephasing rate `Γ_q` (1/s).
    pub qubit_dephasing: f64,
    /// Phonon heating rate `γn̄` (quanta/s).
    pub heating: f64,
    /// Phonon damping rate `γ(n̄+1)` (1/s); `None` means equal to
    /// `heating` (the `n̄ ≫ 1` limit).
    pub damping: Option<f64>,
}

impl DissipatorSpec {
    /// No decoherence at all.
    pub fn none() -> Self {
        Self::default()
    }

    /// Rates given directly (`n̄ ≫ 1` damping default).
    pub fn from_rates(motional_dephasing: f64, qubit_dephasing: f64, heating: f64) -> Self {
        Self { motional_dephasing, qubit_dephasing, heating, damping: None }
    }

    /// Rates from an explicit bath coupling `γ` and occupation `n̄`.
    pub fn from_bath(motional_dephasing: f64, qubit_dephasing: f64, gamma: f64, n_th: f64) -> Self {
        Self {
            motional_dephasing,
            qubit_dephasing,
            heating: gamma * n_th,
            damping: Some(gamma * (n_th + 1.0)),
        }
    }

    /// Effective damping rate `γ(n̄+1)` (1/s).
    pub fn damping_rate(&self) -> f64 {
        self.damping.unwrap_or(self.heating)
    }

    pub fn validate(&self) -> OpenResult<()> {
        let checks = [
            ("motional_dephasing", self.motional_dephasing),
            ("qubit_dephasing", self.qubit_dephasing),
            ("heating", self.heating),
            ("damping", self.damping_rate()),
        ];
        for (name, v) in checks {
            if !v.is_finite() || v < 0.0 {
                return Err(OpenError::NegativeRate(name, v));
            }
        }
        Ok(())
    }
}

/// Dimensionless noise channels: the rates per unit of evolution time of
/// `l†l` prefactors
/// (`l_m†l_m = 2κ_m n̂²`, `l_q†l_q = 2κ_q(Ĵz+1/2)`, `l_d†l_d = κ_d n̂`,
/// `l_h†l_h = κ_h(n̂+1)` below the cutoff).
///
/// For ramp evolution the time unit is `ε√Δ/ħ` (use
/// [`build_dissipators`]); the sideband diagnostic runs in lab seconds, so
/// there the fields hold the 1/s rates directly.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct NoiseModel {
    pub kappa_m: f64,
    pub kappa_q: f64,
    pub kappa_d: f64,
    pub kappa_h: f64,
}

impl NoiseModel {
    pub fn none() -> Self {
        Self::default()
    }

    /// True when every channel is off (evolution reduces to Schrödinger).
    pub fn is_trivial(&self) -> bool {
        self.kappa_m == 0.0 && self.kappa_q == 0.0 && self.kappa_d == 0.0 && self.kappa_h == 0.0
    }
}

/// Rescale lab rates to the dimensionless jump channels
/// (`κ = rate/(ε√Δ/ħ)`); requires the model's `energy_scale`.
pub fn build_dissipators(spec: &DissipatorSpec, model: &ModelParams) -> OpenResult<NoiseModel> {
    spec.validate()?;
    Ok(NoiseModel {
        kappa_m: model.rate_to_dimensionless(spec.motional_dephasing)?,
        kappa_q: model.rate_to_dimensionless(spec.qubit_dephasing)?,
        kappa_d: model.rate_to_dimensionless(spec.damping_rate())?,
        kappa_h: model.rate_to_dimensionless(spec.heating)?,
    })
}

/// The four decoherence channels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    MotionalDephasing,
    QubitDephasing,
    Damping,
    Heating,
}

pub const N_CHANNELS: usize = 4;
pub const CHANNEL_KINDS: [ChannelKind; N_CHANNELS] = [
    ChannelKind::MotionalDephasing,
    ChannelKind::QubitDephasing,
    ChannelKind::Damping,
    ChannelKind::Heating,
];

/// Jump channels realized on a concrete truncated space (interleaved
/// layout).  `gdiag` is the diagonal of `Σ l†l`, entering the effective
/// Hamiltonian and the survival decay; weights and `gdiag` use the same
/// truncated operators so the norm bookkeeping is exactly consistent.
struct JumpSet {
    rates: [f64; N_CHANNELS],
    gdiag: Vec<f64>,
    /// Prefix maxima of `gdiag`, for the integrator's stability cap.
    gmax_prefix: Vec<f64>,
    nmax: usize,
}

impl JumpSet {
    fn new(noise: &NoiseModel, space: HilbertSpace) -> Self {
        let dim = space.dim();
        let nmax = space.fock_cutoff;
        let rates = [noise.kappa_m, noise.kappa_q, noise.kappa_d, noise.kappa_h];
        let mut gdiag = vec![0.0; dim];
        for (j, g) in gdiag.iter_mut().enumerate() {
            let n = (j / 2) as f64;
            let s = HilbertSpace::spin_of_interleaved(j) as f64;
            let heat = if j / 2 < nmax { noise.kappa_h * (n + 1.0) } else { 0.0 };
            *g = 2.0 * noise.kappa_m * n * n + 2.0 * noise.kappa_q * s + noise.kappa_d * n + heat;
        }
        let mut gmax_prefix = gdiag.clone();
        for j in 1..dim {
            gmax_prefix[j] = gmax_prefix[j].max(gmax_prefix[j - 1]);
        }
        Self { rates, gdiag, gmax_prefix, nmax }
    }

    /// Unnormalized channel weight `γ_c = ⟨φ|l_c†l_c|φ⟩`.
    fn weight(&self, c: usize, y: &[C64]) -> f64 {
        let rate = self.rates[c];
        if rate == 0.0 {
            return 0.0;
        }
        let mut acc = 0.0;
        match CHANNEL_KINDS[c] {
            ChannelKind::MotionalDephasing => {
                for (j, a) in y.iter().enumerate() {
                    let n = (j / 2) as f64;
                    acc += n * n * a.norm_sqr();
                }
                acc *= 2.0 * rate;
            }
            ChannelKind::QubitDephasing => {
                for (j, a) in y.iter().enumerate() {
                    if HilbertSpace::spin_of_interleaved(j) == 1 {
                        acc += a.norm_sqr();
                    }
                }
                acc *= 2.0 * rate;
            }
            ChannelKind::Damping => {
                for (j, a) in y.iter().enumerate() {
                    acc += (j / 2) as f64 * a.norm_sqr();
                }
                acc *= rate;
            }
            ChannelKind::Heating => {
                for (j, a) in y.iter().enumerate() {
                    if j / 2 < self.nmax {
                        acc += (j / 2 + 1) as f64 * a.norm_sqr();
                    }
                }
                acc *= rate;
            }
        }
        acc
    }

    /// Apply channel `c`'s operator content (constants dropped — the
    /// caller renormalizes) into `out`, which is cleared first.
    fn apply(&self, c: usize, y: &[C64], out: &mut Vec<C64>) {
        out.clear();
        out.resize(y.len(), C64::new(0.0, 0.0));
        match CHANNEL_KINDS[c] {
            ChannelKind::MotionalDephasing => {
                for (j, &a) in y.iter().enumerate() {
                    out[j] = a * (j / 2) as f64;
                }
            }
            ChannelKind::QubitDephasing => {
                for (j, &a) in y.iter().enumerate() {
                    if HilbertSpace::spin_of_interleaved(j) == 1 {
                        out[j] = a;
                    }
                }
            }
            ChannelKind::Damping => {
                // â sends fock k → k−1 within the same spin; in the
                // interleaved layout that is slot 2k → 2k−1 and slot
                // 2k+1 → 2k−2, with factor √k.
                for k in 1..=self.nmax {
                    let root = (k as f64).sqrt();
                    if 2 * k < y.len() {
                        out[2 * k - 1] = y[2 * k] * root;
                    }
                    if 2 * k + 1 < y.len() {
                        out[2 * k - 2] = y[2 * k + 1] * root;
                    }
                }
            }
            ChannelKind::Heating => {
                // â† sends fock k → k+1: slot 2k → 2k+3, slot 2k+1 → 2k+2,
                // factor √(k+1).
                for k in 0..self.nmax {
                    let root = ((k + 1) as f64).sqrt();
                    if 2 * k < y.len() && 2 * k + 3 < out.len() {
                        out[2 * k + 3] = y[2 * k] * root;
                    }
                    if 2 * k + 1 < y.len() && 2 * k + 2 < out.len() {
                        out[2 * k + 2] = y[2 * k + 1] * root;
                    }
                }
            }
        }
    }
}

/// Coherent part of an open evolution: a Hermitian generator with the
/// stride-2 interleaved structure, possibly time dependent.
trait CoherentPart: Sync {
    /// `dy = H(t)·x` over the given working span.
    fn matvec(&self, t: f64, x: &[C64], dy: &mut [C64]);
    /// Spectral-radius bound over the first `n` components.
    fn bound(&self, t: f64, n: usize) -> f64;
}

/// Interaction ramp of the full model.
struct ErmRamp<'a> {
    ham: &'a ErmHamiltonian,
    protocol: RampProtocol,
}

impl CoherentPart for ErmRamp<'_> {
    fn matvec(&self, t: f64, x: &[C64], dy: &mut [C64]) {
        self.ham.matvec_interleaved(self.protocol.coupling_at(t), x, dy, x.len());
    }

    fn bound(&self, t: f64, n: usize) -> f64 {
        self.ham.spectral_bound(self.protocol.coupling_at(t), n)
    }
}

/// Resonant blue-sideband drive `(ηΩ₂/2)(σ₊â† + σ₋â)` in lab time: in the
/// interleaved layout it couples slot `j → j+2` with strength
/// `(ηΩ₂/2)√(fock(j)+1)` whenever slot `j` is a spin-down state.
struct BsbCoherent {
    offd: Vec<f64>,
    bound_prefix: Vec<f64>,
}

impl BsbCoherent {
    fn new(eta_omega2: f64, space: HilbertSpace) -> Self {
        let dim = space.dim();
        let mut offd = vec![0.0; dim];
        for (j, v) in offd.iter_mut().enumerate() {
            if HilbertSpace::spin_of_interleaved(j) == 0 && j + 2 < dim {
                *v = 0.5 * eta_omega2 * ((j / 2 + 1) as f64).sqrt();
            }
        }
        // Row-sum (Gershgorin) bound, as a running prefix maximum.
        let mut bound_prefix = vec![0.0; dim];
        let mut run = 0.0f64;
        for j in 0..dim {
            let row = offd[j].abs() + if j >= 2 { offd[j - 2].abs() } else { 0.0 };
            run = run.max(row);
            bound_prefix[j] = run;
        }
        Self { offd, bound_prefix }
    }
}

impl CoherentPart for BsbCoherent {
    fn matvec(&self, _t: f64, x: &[C64], dy: &mut [C64]) {
        let span = x.len();
        for j in 0..span {
            let mut acc = C64::new(0.0, 0.0);
            if j >= 2 && self.offd[j - 2] != 0.0 {
                acc += x[j - 2] * self.offd[j - 2];
            }
            if j + 2 < span && self.offd[j] != 0.0 {
                acc += x[j + 2] * self.offd[j];
            }
            dy[j] = acc;
        }
    }

    fn bound(&self, _t: f64, n: usize) -> f64 {
        if n == 0 { 0.0 } else { self.bound_prefix[n.min(self.bound_prefix.len()) - 1] }
    }
}

/// `dφ = −i·H(t)φ − (1/2)·G∘φ`: the effective non-Hermitian generator.
struct McwfRhs<'a, C: CoherentPart> {
    coherent: &'a C,
    jumps: &'a JumpSet,
}

impl<C: CoherentPart> OdeRhs for McwfRhs<'_, C> {
    fn eval(&mut self, t: f64, y: &[C64], dy: &mut [C64]) {
        self.coherent.matvec(t, y, dy);
        for (j, v) in dy.iter_mut().enumerate() {
            let g = 0.5 * self.jumps.gdiag[j];
            *v = C64::new(v.im - g * y[j].re, -v.re - g * y[j].im);
        }
    }

    fn spectral_bound(&self, t: f64, nwork: usize) -> f64 {
        let g = if nwork == 0 { 0.0 } else { self.jumps.gmax_prefix[nwork - 1] };
        self.coherent.bound(t, nwork) + 0.5 * g
    }
}

/// One quantum jump: when it happened and through which channel.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct JumpEvent {
    pub time: f64,
    pub channel: ChannelKind,
}

/// Per-trajectory record: final plain observables (normalized
/// expectations of the unnormalized state), survival bookkeeping, jump
/// log, and the RNG stream that makes the trajectory reproducible.
#[derive(Clone, Debug)]
pub struct TrajectoryRecord {
    pub index: usize,
    pub stream: u64,
    /// How many times the trajectory was restarted on a root-finding
    /// incident (fresh RNG stream each time).
    pub resamples: u32,
    pub p0: f64,
    pub pdown: f64,
    pub n_mean: f64,
    pub jz_mean: f64,
    /// Final squared norm (survival still pending at the end time).
    pub survival: f64,
    pub jumps: Vec<JumpEvent>,
    /// Final unnormalized state (interleaved), kept only on request.
    pub final_flat: Option<Vec<C64>>,
}

/// Mean and standard error of one observable across trajectories, per
/// sample time.
#[derive(Clone, Debug, Default)]
pub struct MeanSeries {
    pub mean: Vec<f64>,
    pub sem: Vec<f64>,
}

/// Ensemble-averaged time series of the plain observables.
#[derive(Clone, Debug, Default)]
pub struct SampleSeries {
    pub time: Vec<f64>,
    pub p0: MeanSeries,
    pub pdown: MeanSeries,
    pub n_mean: MeanSeries,
    pub jz_mean: MeanSeries,
}

/// Result of an MCWF run: per-trajectory records plus ensemble series.
#[derive(Clone, Debug)]
pub struct TrajectoryEnsemble {
    pub n_traj: usize,
    pub seed: u64,
    pub records: Vec<TrajectoryRecord>,
    pub series: SampleSeries,
    /// Instantaneous coupling at each sample time.
    pub lambda: Vec<f64>,
    /// Total jumps per channel across the ensemble.
    pub jump_totals: [u64; N_CHANNELS],
    /// Total root-finding incidents that forced a resample.
    pub incidents: u64,
}

/// Controls for MCWF runs.
#[derive(Clone, Copy, Debug)]
pub struct McwfOptions {
    /// Sample-time count over the protocol (endpoints included).
    pub samples: usize,
    pub tol: Tolerances,
    /// Keep each unnormalized final state (memory: `16·dim` bytes per
    /// trajectory) for staged pipelines.
    pub keep_states: bool,
    /// Hard per-trajectory jump budget.
    pub max_jumps: usize,
}

impl Default for McwfOptions {
    fn default() -> Self {
        Self { samples: 101, tol: Tolerances::default(), keep_states: false, max_jumps: 1_000_000 }
    }
}

/// Trajectories per deterministic reduction chunk.
const CHUNK: usize = 64;
/// Restart budget on root-finding incidents.
const MAX_ATTEMPTS: u32 = 4;

enum TrajFailure {
    /// Non-monotone numerical survival broke the root bracket: restart
    /// the trajectory on a fresh stream.
    Incident,
    Hard(OpenError),
}

impl From<OdeError> for TrajFailure {
    fn from(e: OdeError) -> Self {
        TrajFailure::Hard(e.into())
    }
}

struct TrajectoryOutcome {
    rows: Vec<[f64; 4]>,
    jumps: Vec<JumpEvent>,
    survival: f64,
    final_flat: Vec<C64>,
}

/// Observables of one sample row, in fixed order.
fn sample_row(y: &[C64]) -> [f64; 4] {
    [flat_p0(y), flat_p_down(y), flat_n_mean(y), flat_jz_mean(y)]
}

fn draw_open_unit(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let x: f64 = rng.gen();
        if x > 0.0 {
            return x;
        }
    }
}

/// Run one trajectory over `grid` (strictly increasing, starting at the
/// initial time), recording a sample row at each grid time.
fn run_trajectory<C: CoherentPart>(
    coherent: &C,
    jumps: &JumpSet,
    y0: &[C64],
    grid: &[f64],
    tol: &Tolerances,
    max_jumps: usize,
    index: usize,
    rng: &mut ChaCha8Rng,
) -> Result<TrajectoryOutcome, TrajFailure> {
    let opts = OdeOptions {
        rtol: tol.rtol,
        atol: tol.atol,
        windowed: true,
        ..OdeOptions::default()
    };
    let rhs = McwfRhs { coherent, jumps };
    let mut stepper = AdaptiveRk::new(rhs, grid[0], y0.to_vec(), opts);
    let mut xi = draw_open_unit(rng);
    let mut rows = Vec::with_capacity(grid.len());
    let mut events: Vec<JumpEvent> = Vec::new();
    let mut probe = Vec::new();
    let mut jumped = Vec::new();

    rows.push(sample_row(stepper.y()));
    for &target in &grid[1..] {
        while stepper.t() < target {
            let adv = stepper
                .advance_to(target, |info, y| {
                    let s: f64 = y[..info.nact].iter().map(|c| c.norm_sqr()).sum();
                    if s <= xi { StepOutcome::Halt } else { StepOutcome::Continue }
                })
                .map_err(TrajFailure::from)?;
            match adv {
                Advance::Reached => break,
                Advance::Halted => {
                    if events.len() >= max_jumps {
                        return Err(TrajFailure::Hard(OpenError::RunawayJumps {
                            index,
                            budget: max_jumps,
                        }));
                    }
                    let (t_prev, y_prev) = stepper.prev();
                    let span = stepper.t() - t_prev;
                    let s_prev = flat_norm_sqr(y_prev);
                    let s_now = stepper.norm2();
                    let dt = locate_crossing(&mut stepper, span, s_prev, s_now, xi, &mut probe)
                        .ok_or(TrajFailure::Incident)?;
                    let t_jump = t_prev + dt;
                    // Channel roulette on the unnormalized weights.
                    let mut weights = [0.0; N_CHANNELS];
                    let mut total = 0.0;
                    for c in 0..N_CHANNELS {
                        weights[c] = jumps.weight(c, &probe);
                        total += weights[c];
                    }
                    if total <= f64::MIN_POSITIVE {
                        return Err(TrajFailure::Hard(OpenError::VanishingRates { tau: t_jump }));
                    }
                    let mut u = draw_open_unit(rng) * total;
                    let mut chosen = N_CHANNELS - 1;
                    for (c, &w) in weights.iter().enumerate() {
                        if u <= w {
                            chosen = c;
                            break;
                        }
                        u -= w;
                    }
                    jumps.apply(chosen, &probe, &mut jumped);
                    let norm = flat_norm_sqr(&jumped).sqrt();
                    if norm <= f64::MIN_POSITIVE {
                        return Err(TrajFailure::Hard(OpenError::VanishingRates { tau: t_jump }));
                    }
                    for a in jumped.iter_mut() {
                        *a /= norm;
                    }
                    stepper.set_state(t_jump, &jumped);
                    events.push(JumpEvent { time: t_jump, channel: CHANNEL_KINDS[chosen] });
                    xi = draw_open_unit(rng);
                }
            }
        }
        rows.push(sample_row(stepper.y()));
    }
    Ok(TrajectoryOutcome {
        rows,
        jumps: events,
        survival: stepper.norm2(),
        final_flat: stepper.y().to_vec(),
    })
}

/// Locate `‖φ(t_prev + dt)‖² = ξ` for `dt ∈ [0, span]` by the Illinois
/// variant of regula falsi on re-integrated probes.  Returns `None` when
/// the bracket is numerically broken (survival not monotone).
fn locate_crossing<R: OdeRhs>(
    stepper: &mut AdaptiveRk<R>,
    span: f64,
    s_prev: f64,
    s_now: f64,
    xi: f64,
    probe: &mut Vec<C64>,
) -> Option<f64> {
    let mut a = 0.0;
    let mut fa = s_prev - xi;
    let mut b = span;
    let mut fb = s_now - xi;
    if fa < 0.0 || fb > 0.0 {
        return None;
    }
    if fa == 0.0 {
        stepper.probe_from_prev(0.0, probe);
        return Some(0.0);
    }
    let ftol = 1e-12 * xi;
    let mut dt = b;
    for _ in 0..60 {
        // Secant proposal with bisection fallback.
        let denom = fb - fa;
        let mut cand = if denom != 0.0 { b - fb * (b - a) / denom } else { 0.5 * (a + b) };
        if !(cand > a && cand < b) {
            cand = 0.5 * (a + b);
        }
        dt = cand;
        stepper.probe_from_prev(dt, probe);
        let f = flat_norm_sqr(probe) - xi;
        if f.abs() <= ftol || (b - a) <= 1e-10 * span {
            return Some(dt);
        }
        if f > 0.0 {
            a = dt;
            fa = f;
            // Illinois: halve the retained opposite ordinate.
            fb *= 0.5;
        } else {
            b = dt;
            fb = f;
            fa *= 0.5;
        }
    }
    // Bracket collapsed far enough; accept the midpoint probe.
    stepper.probe_from_prev(dt, probe);
    Some(dt)
}

/// Per-chunk accumulation for the deterministic reduction.
struct ChunkOut {
    records: Vec<TrajectoryRecord>,
    sum: Vec<[f64; 4]>,
    sumsq: Vec<[f64; 4]>,
    jump_totals: [u64; N_CHANNELS],
    incidents: u64,
}

/// Generic MCWF ensemble over any coherent part: trajectories are
/// distributed across workers in fixed chunks and reduced in chunk order,
/// so results are independent of worker count.
fn mcwf_ensemble<C: CoherentPart>(
    coherent: &C,
    jumps: &JumpSet,
    y0: &[C64],
    grid: &[f64],
    n_traj: usize,
    seed: u64,
    opts: &McwfOptions,
) -> OpenResult<(Vec<TrajectoryRecord>, SampleSeries, [u64; N_CHANNELS], u64)> {
    let nsamp = grid.len();
    let nchunks = n_traj.div_ceil(CHUNK);
    let chunks: Vec<ChunkOut> = (0..nchunks)
        .into_par_iter()
        .map(|ci| -> OpenResult<ChunkOut> {
            let lo = ci * CHUNK;
            let hi = ((ci + 1) * CHUNK).min(n_traj);
            let mut out = ChunkOut {
                records: Vec::with_capacity(hi - lo),
                sum: vec![[0.0; 4]; nsamp],
                sumsq: vec![[0.0; 4]; nsamp],
                jump_totals: [0; N_CHANNELS],
                incidents: 0,
            };
            for index in lo..hi {
                let mut attempt = 0u32;
                let (outcome, stream) = loop {
                    let stream = index as u64 + ((attempt as u64) << 40);
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(stream);
                    match run_trajectory(
                        coherent, jumps, y0, grid, &opts.tol, opts.max_jumps, index, &mut rng,
                    ) {
                        Ok(o) => break (o, stream),
                        Err(TrajFailure::Incident) => {
                            out.incidents += 1;
                            attempt += 1;
                            if attempt >= MAX_ATTEMPTS {
                                return Err(OpenError::TrajectoryFailed {
                                    index,
                                    attempts: attempt,
                                });
                            }
                        }
                        Err(TrajFailure::Hard(e)) => return Err(e),
                    }
                };
                for (k, row) in outcome.rows.iter().enumerate() {
                    for (c, &v) in row.iter().enumerate() {
                        out.sum[k][c] += v;
                        out.sumsq[k][c] += v * v;
                    }
                }
                for ev in &outcome.jumps {
                    let c = CHANNEL_KINDS.iter().position(|&k| k == ev.channel).unwrap();
                    out.jump_totals[c] += 1;
                }
                let last = outcome.rows[nsamp - 1];
                out.records.push(TrajectoryRecord {
                    index,
                    stream,
                    resamples: attempt,
                    p0: last[0],
                    pdown: last[1],
                    n_mean: last[2],
                    jz_mean: last[3],
                    survival: outcome.survival,
                    jumps: outcome.jumps,
                    final_flat: opts.keep_states.then_some(outcome.final_flat),
                });
            }
            Ok(out)
        })
        .collect::<OpenResult<Vec<ChunkOut>>>()?;

    // Sequential fold in chunk order.
    let mut records = Vec::with_capacity(n_traj);
    let mut sum = vec![[0.0; 4]; nsamp];
    let mut sumsq = vec![[0.0; 4]; nsamp];
    let mut jump_totals = [0u64; N_CHANNELS];
    let mut incidents = 0u64;
    for ch in chunks {
        records.extend(ch.records);
        for k in 0..nsamp {
            for c in 0..4 {
                sum[k][c] += ch.sum[k][c];
                sumsq[k][c] += ch.sumsq[k][c];
            }
        }
        for c in 0..N_CHANNELS {
            jump_totals[c] += ch.jump_totals[c];
        }
        incidents += ch.incidents;
    }

    let n = n_traj as f64;
    let mut series = SampleSeries { time: grid.to_vec(), ..SampleSeries::default() };
    let fields: [&mut MeanSeries; 4] =
        [&mut series.p0, &mut series.pdown, &mut series.n_mean, &mut series.jz_mean];
    for (c, field) in fields.into_iter().enumerate() {
        for k in 0..nsamp {
            let mean = sum[k][c] / n;
            let var = if n_traj > 1 {
                ((sumsq[k][c] - n * mean * mean) / (n - 1.0)).max(0.0)
            } else {
                0.0
            };
            field.mean.push(mean);
            field.sem.push((var / n).sqrt());
        }
    }
    Ok((records, series, jump_totals, incidents))
}

/// Evolve `N` MCWF trajectories of the interaction ramp with the given
/// noise channels.
pub fn mcwf_evolve(
    psi0: &QuantumState,
    protocol: &RampProtocol,
    noise: &NoiseModel,
    n_traj: usize,
    seed: u64,
    opts: &McwfOptions,
) -> OpenResult<TrajectoryEnsemble> {
    if n_traj == 0 {
        return Err(OpenError::BadInput("need at least one trajectory".into()));
    }
    let ham = ErmHamiltonian::new(protocol.model, psi0.space)?;
    let jumps = JumpSet::new(noise, psi0.space);
    let coherent = ErmRamp { ham: &ham, protocol: *protocol };
    let grid = if protocol.tau_f == 0.0 {
        vec![0.0]
    } else {
        let nsamp = opts.samples.max(2);
        (0..nsamp).map(|k| protocol.tau_f * k as f64 / (nsamp - 1) as f64).collect()
    };
    let y0 = psi0.to_interleaved();
    let (records, series, jump_totals, incidents) =
        mcwf_ensemble(&coherent, &jumps, &y0, &grid, n_traj, seed, opts)?;
    let lambda = grid.iter().map(|&t| protocol.coupling_at(t)).collect();
    Ok(TrajectoryEnsemble {
        n_traj,
        seed,
        records,
        series,
        lambda,
        jump_totals,
        incidents,
    })
}

/// Observables with ensemble estimators over a trajectory ensemble.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum McwfObservable {
    /// Population of `|↓,0⟩`.
    Vacuum,
    /// Population of the qubit-down sector.
    SpinDown,
    NMean,
    JzMean,
    /// Conditional vacuum population: ratio of the ensemble means of the
    /// vacuum and spin-down populations.
    VacuumConditional,
}

/// Ensemble estimate: mean, standard error, and mean relative error
/// `η = σ/(√N·|mean|)`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct McwfResult {
    pub mean: f64,
    pub sem: f64,
    pub mre: f64,
    pub n_traj: usize,
}

/// Reduce the per-trajectory final observables to an ensemble estimate.
///
/// Plain observables use the sample mean and its standard error; the
/// conditional vacuum population is the ratio of means with a
/// delta-method standard error.
pub fn mcwf_expectation(ens: &TrajectoryEnsemble, obs: McwfObservable) -> McwfResult {
    let n = ens.records.len();
    let nf = n as f64;
    let pick = |r: &TrajectoryRecord| -> f64 {
        match obs {
            McwfObservable::Vacuum => r.p0,
            McwfObservable::SpinDown => r.pdown,
            McwfObservable::NMean => r.n_mean,
            McwfObservable::JzMean => r.jz_mean,
            McwfObservable::VacuumConditional => unreachable!("handled below"),
        }
    };
    if obs == McwfObservable::VacuumConditional {
        let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for r in &ens.records {
            sx += r.p0;
            sy += r.pdown;
            sxx += r.p0 * r.p0;
            syy += r.pdown * r.pdown;
            sxy += r.p0 * r.pdown;
        }
        let (xbar, ybar) = (sx / nf, sy / nf);
        let ratio = if ybar != 0.0 { xbar / ybar } else { 0.0 };
        let sem = if n > 1 && ybar != 0.0 {
            let vxx = (sxx - nf * xbar * xbar) / (nf - 1.0);
            let vyy = (syy - nf * ybar * ybar) / (nf - 1.0);
            let vxy = (sxy - nf * xbar * ybar) / (nf - 1.0);
            let var = (vxx - 2.0 * ratio * vxy + ratio * ratio * vyy).max(0.0) / (ybar * ybar);
            (var / nf).sqrt()
        } else {
            0.0
        };
        let mre = if ratio != 0.0 { sem / ratio.abs() } else { f64::INFINITY };
        return McwfResult { mean: ratio, sem, mre, n_traj: n };
    }
    let mut s = 0.0;
    let mut s2 = 0.0;
    for r in &ens.records {
        let v = pick(r);
        s += v;
        s2 += v * v;
    }
    let mean = s / nf;
    let var = if n > 1 { ((s2 - nf * mean * mean) / (nf - 1.0)).max(0.0) } else { 0.0 };
    let sem = (var / nf).sqrt();
    let mre = if mean != 0.0 { sem / mean.abs() } else { f64::INFINITY };
    McwfResult { mean, sem, mre, n_traj: n }
}

/// Hard cap on the dense oracle's Hilbert-space dimension.
pub const ORACLE_DIM_BOUND: usize = 2 * (16 + 1);

/// Dense density-matrix evolution output.
#[derive(Clone, Debug)]
pub struct DenseEvolution {
    /// Final density matrix in the public `(spin, fock)` ordering.
    pub rho_final: nd::Array2<C64>,
    pub time: Vec<f64>,
    pub n_mean: Vec<f64>,
    pub jz_mean: Vec<f64>,
    pub p0: Vec<f64>,
    pub pdown: Vec<f64>,
    /// Largest `|Tr ρ − 1|` seen at any sample.
    pub max_trace_drift: f64,
    /// Smallest eigenvalue of the final density matrix.
    pub min_eigenvalue: f64,
}

/// `|ψ⟩⟨ψ|` in the public ordering.
pub fn pure_density(psi: &QuantumState) -> nd::Array2<C64> {
    let d = psi.amplitudes.len();
    let mut rho = nd::Array2::zeros((d, d));
    for i in 0..d {
        for j in 0..d {
            rho[[i, j]] = psi.amplitudes[i] * psi.amplitudes[j].conj();
        }
    }
    rho
}

struct LindbladRhs {
    dim: usize,
    h_diag: Vec<f64>,
    h_unit: Vec<f64>,
    protocol: RampProtocol,
    jump_ops: Vec<nd::Array2<C64>>,
    gdiag: Vec<f64>,
    bound: f64,
}

impl LindbladRhs {
    /// `H(t)·m` for the stride-2 interleaved Hamiltonian, column-wise.
    fn h_mul(&self, lam: f64, m: &nd::ArrayView2<C64>, out: &mut nd::Array2<C64>) {
        let d = self.dim;
        for i in 0..d {
            for j in 0..d {
                let mut acc = m[[i, j]] * self.h_diag[i];
                if i >= 2 {
                    acc += m[[i - 2, j]] * (lam * self.h_unit[i - 2]);
                }
                if i + 2 < d {
                    acc += m[[i + 2, j]] * (lam * self.h_unit[i]);
                }
                out[[i, j]] = acc;
            }
        }
    }
}

impl OdeRhs for LindbladRhs {
    fn eval(&mut self, t: f64, y: &[C64], dy: &mut [C64]) {
        let d = self.dim;
        let rho = nd::ArrayView2::from_shape((d, d), y).expect("lindblad: state shape");
        let lam = self.protocol.coupling_at(t);
        let mut hrho = nd::Array2::zeros((d, d));
        self.h_mul(lam, &rho, &mut hrho);
        // dρ = −i(Hρ − ρH) − ½{G, ρ} + Σ LρL†; G and the anticommutator
        // use that every L†L here is the diagonal `gdiag`.
        let mut out = nd::Array2::zeros((d, d));
        for i in 0..d {
            for j in 0..d {
                let comm = hrho[[i, j]] - hrho[[j, i]].conj();
                let anti = 0.5 * (self.gdiag[i] + self.gdiag[j]);
                out[[i, j]] = C64::new(comm.im, -comm.re) - rho[[i, j]] * anti;
            }
        }
        for l in &self.jump_ops {
            let lr = l.dot(&rho);
            let lrl = lr.dot(&l.t().mapv(|v| v.conj()));
            out += &lrl;
        }
        dy.copy_from_slice(out.as_slice().expect("lindblad: contiguous output"));
    }

    fn spectral_bound(&self, _t: f64, _nwork: usize) -> f64 {
        self.bound
    }
}

/// Integrate the master equation `dρ/dτ = −i[ĥ(λ(τ)),ρ] + Σ_j D[l_j]ρ`
/// directly on a small truncated space — the trusted oracle the
/// trajectory sampler is checked against.
///
/// `rho0` is in the public `(spin, fock)` ordering and must be positive
/// with unit trace.
pub fn lindblad_dense_evolve(
    rho0: &nd::Array2<C64>,
    protocol: &RampProtocol,
    noise: &NoiseModel,
    space: HilbertSpace,
    tol: &Tolerances,
    samples: usize,
) -> OpenResult<DenseEvolution> {
    let d = space.dim();
    if d > ORACLE_DIM_BOUND {
        return Err(OpenError::OracleScope { dim: d, bound: ORACLE_DIM_BOUND });
    }
    if rho0.dim() != (d, d) {
        return Err(OpenError::BadInput(format!(
            "density matrix is {:?}, space needs ({d}, {d})",
            rho0.dim()
        )));
    }
    let ham = ErmHamiltonian::new(protocol.model, space)?;
    let jumps = JumpSet::new(noise, space);

    // Interleaved-ordered initial state.
    let mut rho_int = nd::Array2::zeros((d, d));
    for j1 in 0..d {
        for j2 in 0..d {
            rho_int[[j1, j2]] =
                rho0[[space.public_from_interleaved(j1), space.public_from_interleaved(j2)]];
        }
    }

    // Dense jump operators (with √rate prefactors) in interleaved order.
    let mut jump_ops = Vec::new();
    for (c, &rate) in jumps.rates.iter().enumerate() {
        if rate == 0.0 {
            continue;
        }
        let mut op = nd::Array2::zeros((d, d));
        let mut basis = vec![C64::new(0.0, 0.0); d];
        let mut image = Vec::new();
        let scale = match CHANNEL_KINDS[c] {
            ChannelKind::MotionalDephasing | ChannelKind::QubitDephasing => (2.0 * rate).sqrt(),
            ChannelKind::Damping | ChannelKind::Heating => rate.sqrt(),
        };
        for j in 0..d {
            basis[j] = C64::new(1.0, 0.0);
            jumps.apply(c, &basis, &mut image);
            basis[j] = C64::new(0.0, 0.0);
            for (i, &v) in image.iter().enumerate() {
                op[[i, j]] = v * scale;
            }
        }
        jump_ops.push(op);
    }

    let gmax = jumps.gdiag.iter().cloned().fold(0.0, f64::max);
    let hbound = ham.spectral_bound(protocol.model.coupling.abs(), d);
    let rhs = LindbladRhs {
        dim: d,
        h_diag: ham.diag_free().to_vec(),
        h_unit: ham.coupl_unit().to_vec(),
        protocol: *protocol,
        jump_ops,
        gdiag: jumps.gdiag.clone(),
        bound: 2.0 * hbound + 2.0 * gmax,
    };

    let y0 = rho_int.as_slice().expect("lindblad: contiguous input").to_vec();
    let opts = OdeOptions { rtol: tol.rtol, atol: tol.atol, ..OdeOptions::default() };
    let mut stepper = AdaptiveRk::new(rhs, 0.0, y0, opts);

    let nsamp = samples.max(2);
    let tf = protocol.tau_f;
    let grid: Vec<f64> = if tf == 0.0 {
        vec![0.0]
    } else {
        (0..nsamp).map(|k| tf * k as f64 / (nsamp - 1) as f64).collect()
    };
    let mut out = DenseEvolution {
        rho_final: nd::Array2::zeros((d, d)),
        time: Vec::new(),
        n_mean: Vec::new(),
        jz_mean: Vec::new(),
        p0: Vec::new(),
        pdown: Vec::new(),
        max_trace_drift: 0.0,
        min_eigenvalue: 0.0,
    };
    for (k, &t) in grid.iter().enumerate() {
        if k > 0 {
            stepper.advance_to(t, |_, _| StepOutcome::Continue)?;
        }
        let rho = nd::ArrayView2::from_shape((d, d), stepper.y()).expect("lindblad: state shape");
        let mut trace = 0.0;
        let (mut nm, mut jz, mut pd) = (0.0, 0.0, 0.0);
        for j in 0..d {
            let p = rho[[j, j]].re;
            trace += p;
            nm += (j / 2) as f64 * p;
            jz += if HilbertSpace::spin_of_interleaved(j) == 1 { 0.5 } else { -0.5 } * p;
            if HilbertSpace::spin_of_interleaved(j) == 0 {
                pd += p;
            }
        }
        out.time.push(t);
        out.n_mean.push(nm);
        out.jz_mean.push(jz);
        out.p0.push(rho[[0, 0]].re);
        out.pdown.push(pd);
        out.max_trace_drift = out.max_trace_drift.max((trace - 1.0).abs());
    }

    // Back to public ordering, plus a positivity audit of the final state
    // via the Hermitian embedding [[Re, −Im], [Im, Re]].
    let rho = nd::ArrayView2::from_shape((d, d), stepper.y()).expect("lindblad: state shape");
    let mut embed = nd::Array2::zeros((2 * d, 2 * d));
    for i in 0..d {
        for j in 0..d {
            let v = 0.5 * (rho[[i, j]] + rho[[j, i]].conj());
            embed[[i, j]] = v.re;
            embed[[i + d, j + d]] = v.re;
            embed[[i + d, j]] = v.im;
            embed[[i, j + d]] = -v.im;
        }
    }
    let (eigs, _) = eigh_small(&embed);
    out.min_eigenvalue = eigs[0];
    for j1 in 0..d {
        for j2 in 0..d {
            out.rho_final[[space.public_from_interleaved(j1), space.public_from_interleaved(j2)]] =
                rho[[j1, j2]];
        }
    }
    Ok(out)
}

/// Blue-sideband Rabi signal: times in lab seconds, ensemble mean of
/// `⟨Ĵz⟩`, and its mean relative error per point (zero on the unitary
/// path).
#[derive(Clone, Debug, Serialize)]
pub struct RabiSignal {
    pub t_seconds: Vec<f64>,
    pub jz_mean: Vec<f64>,
    pub jz_mre: Vec<f64>,
}

/// Noise settings for the diagnostic stage (applied in lab time).
#[derive(Clone, Copy, Debug)]
pub struct BsbNoise<'a> {
    pub spec: &'a DissipatorSpec,
    pub n_traj: usize,
    pub seed: u64,
}

/// Motional input to the diagnostic: a pure state vector over Fock
/// states, or a density matrix.
#[derive(Clone, Copy, Debug)]
pub enum MotionalInput<'a> {
    Pure(&'a [C64]),
    Mixed(&'a nd::Array2<C64>),
}

impl MotionalInput<'_> {
    /// Fock populations (normalized).
    fn populations(&self) -> OpenResult<Vec<f64>> {
        let p: Vec<f64> = match self {
            MotionalInput::Pure(amps) => amps.iter().map(|a| a.norm_sqr()).collect(),
            MotionalInput::Mixed(rho) => {
                if rho.nrows() != rho.ncols() {
                    return Err(OpenError::BadInput("motional density matrix not square".into()));
                }
                rho.diag().iter().map(|v| v.re).collect()
            }
        };
        let total: f64 = p.iter().sum();
        if !(total > 0.0) || p.iter().any(|&v| v < -1e-10) {
            return Err(OpenError::BadInput("motional populations not normalizable".into()));
        }
        Ok(p.iter().map(|v| v.max(0.0) / total).collect())
    }
}

/// `|↓⟩ ⊗ φ_m` as interleaved amplitudes on the doubled space.
fn embed_down_motional(motional: &[C64]) -> (HilbertSpace, Vec<C64>) {
    let space = HilbertSpace::new(motional.len() - 1);
    let mut flat = vec![C64::new(0.0, 0.0); space.dim()];
    let norm: f64 = motional.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    for (n, &a) in motional.iter().enumerate() {
        flat[space.interleaved_from_public(2 * n)] = a / norm;
    }
    (space, flat)
}

fn validate_t_grid(t_grid: &[f64]) -> OpenResult<()> {
    if t_grid.is_empty() {
        return Err(OpenError::BadInput("empty time grid".into()));
    }
    if t_grid[0] < 0.0 || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(OpenError::BadInput("time grid must be increasing and nonnegative".into()));
    }
    Ok(())
}

/// Simulate the blue-sideband diagnostic on a qubit-down motional state.
///
/// The unitary path is the exact frequency comb
/// `⟨Ĵz⟩(t) = −(1/2)·Σ_n p_n·cos(ηΩ₂√(n+1)·t)` — for this drive the
/// signal depends on the Fock populations only, coherences included.
/// With noise, MCWF trajectories run in lab time with the 1/s rates; a
/// mixed input is then sampled by its populations (for this observable
/// the leading coherence corrections vanish, and rate·t is small over a
/// diagnostic window).
pub fn blue_sideband_drive(
    input: MotionalInput,
    eta_omega2: f64,
    t_grid: &[f64],
    noise: Option<BsbNoise>,
) -> OpenResult<RabiSignal> {
    if !(eta_omega2 > 0.0) {
        return Err(OpenError::BadInput(format!("eta_omega2 = {eta_omega2} must be positive")));
    }
    validate_t_grid(t_grid)?;
    let populations = input.populations()?;
    match noise {
        None => {
            let mut jz = Vec::with_capacity(t_grid.len());
            for &t in t_grid {
                let mut acc = 0.0;
                for (n, &p) in populations.iter().enumerate() {
                    acc += p * (eta_omega2 * ((n + 1) as f64).sqrt() * t).cos();
                }
                jz.push(-0.5 * acc);
            }
            Ok(RabiSignal {
                t_seconds: t_grid.to_vec(),
                jz_mean: jz,
                jz_mre: vec![0.0; t_grid.len()],
            })
        }
        Some(bsb) => {
            let members: Vec<(f64, Vec<C64>)> = match input {
                MotionalInput::Pure(amps) => vec![(1.0, amps.to_vec())],
                MotionalInput::Mixed(_) => populations
                    .iter()
                    .enumerate()
                    .filter(|(_, &p)| p > 0.0)
                    .map(|(n, &p)| {
                        let mut amps = vec![C64::new(0.0, 0.0); populations.len()];
                        amps[n] = C64::new(1.0, 0.0);
                        (p, amps)
                    })
                    .collect(),
            };
            blue_sideband_members(&members, eta_omega2, t_grid, bsb.spec, bsb.n_traj, bsb.seed)
        }
    }
}

/// Noisy blue-sideband signal from a weighted mixture of pure motional
/// states: each trajectory first draws a member (probability ∝ weight),
/// then runs MCWF in lab time from `|↓⟩ ⊗ member`.
pub fn blue_sideband_members(
    members: &[(f64, Vec<C64>)],
    eta_omega2: f64,
    t_grid: &[f64],
    spec: &DissipatorSpec,
    n_traj: usize,
    seed: u64,
) -> OpenResult<RabiSignal> {
    if members.is_empty() || n_traj == 0 {
        return Err(OpenError::BadInput("need members and at least one trajectory".into()));
    }
    validate_t_grid(t_grid)?;
    spec.validate()?;
    let nfock = members[0].1.len();
    if members.iter().any(|(w, m)| m.len() != nfock || !w.is_finite() || *w < 0.0) {
        return Err(OpenError::BadInput("members must share a cutoff with weights ≥ 0".into()));
    }
    let wtotal: f64 = members.iter().map(|(w, _)| w).sum();
    if !(wtotal > 0.0) {
        return Err(OpenError::BadInput("member weights sum to zero".into()));
    }
    // Lab-time channels: rates in 1/s, time variable in seconds.
    let lab_noise = NoiseModel {
        kappa_m: spec.motional_dephasing,
        kappa_q: spec.qubit_dephasing,
        kappa_d: spec.damping_rate(),
        kappa_h: spec.heating,
    };
    let space = HilbertSpace::new(nfock - 1);
    let jumps = JumpSet::new(&lab_noise, space);
    let coherent = BsbCoherent::new(eta_omega2, space);

    // Grid for the runner must include the start time.
    let mut grid = Vec::with_capacity(t_grid.len() + 1);
    let prepend = t_grid[0] > 0.0;
    if prepend {
        grid.push(0.0);
    }
    grid.extend_from_slice(t_grid);

    let opts = McwfOptions::default();
    let nsamp = grid.len();
    let nchunks = n_traj.div_ceil(CHUNK);
    let chunks: Vec<(Vec<f64>, Vec<f64>, u64)> = (0..nchunks)
        .into_par_iter()
        .map(|ci| -> OpenResult<(Vec<f64>, Vec<f64>, u64)> {
            let lo = ci * CHUNK;
            let hi = ((ci + 1) * CHUNK).min(n_traj);
            let mut sum = vec![0.0; nsamp];
            let mut sumsq = vec![0.0; nsamp];
            let mut incidents = 0u64;
            for index in lo..hi {
                let mut attempt = 0u32;
                let outcome = loop {
                    let stream = index as u64 + ((attempt as u64) << 40);
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(stream);
                    // Member roulette is the trajectory's first draw.
                    let mut u = rng.gen::<f64>() * wtotal;
                    let mut member = &members[members.len() - 1].1;
                    for (w, m) in members {
                        if u <= *w {
                            member = m;
                            break;
                        }
                        u -= w;
                    }
                    let (_, y0) = embed_down_motional(member);
                    match run_trajectory(
                        &coherent, &jumps, &y0, &grid, &opts.tol, opts.max_jumps, index, &mut rng,
                    ) {
                        Ok(o) => break o,
                        Err(TrajFailure::Incident) => {
                            incidents += 1;
                            attempt += 1;
                            if attempt >= MAX_ATTEMPTS {
                                return Err(OpenError::TrajectoryFailed {
                                    index,
                                    attempts: attempt,
                                });
                            }
                        }
                        Err(TrajFailure::Hard(e)) => return Err(e),
                    }
                };
                for (k, row) in outcome.rows.iter().enumerate() {
                    sum[k] += row[3];
                    sumsq[k] += row[3] * row[3];
                }
            }
            Ok((sum, sumsq, incidents))
        })
        .collect::<OpenResult<Vec<_>>>()?;

    let mut sum = vec![0.0; nsamp];
    let mut sumsq = vec![0.0; nsamp];
    for (s, s2, _) in &chunks {
        for k in 0..nsamp {
            sum[k] += s[k];
            sumsq[k] += s2[k];
        }
    }
    let n = n_traj as f64;
    let skip = usize::from(prepend);
    let mut signal = RabiSignal {
        t_seconds: t_grid.to_vec(),
        jz_mean: Vec::with_capacity(t_grid.len()),
        jz_mre: Vec::with_capacity(t_grid.len()),
    };
    for k in skip..nsamp {
        let mean = sum[k] / n;
        let var = if n_traj > 1 { ((sumsq[k] - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
        let sem = (var / n).sqrt();
        signal.jz_mean.push(mean);
        signal.jz_mre.push(if mean != 0.0 { sem / mean.abs() } else { f64::INFINITY });
    }
    Ok(signal)
}

/// Smallest component count covering 99.9% of the population mass
/// (at least one).
pub fn default_fit_components(populations: &[f64]) -> usize {
    let total: f64 = populations.iter().sum();
    if total <= 0.0 {
        return 1;
    }
    let mut acc = 0.0;
    for (n, &p) in populations.iter().enumerate() {
        acc += p;
        if acc >= 0.999 * total {
            return n + 1;
        }
    }
    populations.len().max(1)
}

/// Minimum vacuum-period coverage required by the extraction fit.
pub const MIN_VACUUM_PERIODS: f64 = 5.0;
/// Singular-value ratio above which the fit design is declared
/// degenerate.
const COND_LIMIT: f64 = 3e8;

/// Vacuum-population fit result.
#[derive(Clone, Debug, Serialize)]
pub struct VacuumFit {
    pub p0: f64,
    /// Covariance-derived one-sigma error on `p0`.
    pub p0_err: f64,
    /// All fitted populations (length `n_components`).
    pub populations: Vec<f64>,
    /// Per-component damping rates (1/s) of the envelope fit.
    pub dampings: Vec<f64>,
    pub residual_rms: f64,
    /// Singular-value ratio of the undamped design matrix.
    pub condition: f64,
    pub n_components: usize,
}

/// Recover the vacuum population from a Rabi signal by fitting
/// `⟨Ĵz⟩(t) ≈ −(1/2)·Σ_n p_n·cos(ηΩ₂√(n+1)·t)·e^{−κ_n t}` with `p ≥ 0`,
/// `Σp ≤ 1`, and free per-component damping envelopes.
///
/// The populations are solved by nonnegative least squares; the envelopes
/// by coordinate-wise line searches, alternating for a few sweeps.  The
/// fit error comes from the covariance of the linearized problem at the
/// solution.
pub fn extract_vacuum_population(
    signal: &RabiSignal,
    eta_omega2: f64,
    n_components: usize,
) -> OpenResult<VacuumFit> {
    if !(eta_omega2 > 0.0) || n_components == 0 {
        return Err(OpenError::BadInput("need eta_omega2 > 0 and n_components ≥ 1".into()));
    }
    let m = signal.t_seconds.len();
    if m != signal.jz_mean.len() || m < 4 {
        return Err(OpenError::BadInput("signal too short or ragged".into()));
    }
    let span = signal.t_seconds[m - 1] - signal.t_seconds[0];
    let periods = span * eta_omega2 / (2.0 * PI);
    if periods < MIN_VACUUM_PERIODS {
        return Err(OpenError::ShortSignal { periods });
    }
    let k = n_components;
    if k + 1 >= m {
        return Err(OpenError::FitDegeneracy(format!(
            "{k} components cannot be resolved from {m} samples"
        )));
    }
    let omegas: Vec<f64> = (0..k).map(|n| eta_omega2 * ((n + 1) as f64).sqrt()).collect();
    let ts = &signal.t_seconds;
    let b = &signal.jz_mean;

    // Conditioning audit on the undamped design.
    let design = |kappas: &[f64]| -> nd::Array2<f64> {
        let mut a = nd::Array2::zeros((m, k));
        for i in 0..m {
            for j in 0..k {
                a[[i, j]] = -0.5 * (omegas[j] * ts[i]).cos() * (-kappas[j] * ts[i]).exp();
            }
        }
        a
    };
    let a0 = design(&vec![0.0; k]);
    let gram = a0.t().dot(&a0);
    let (eigs, _) = eigh_small(&gram);
    let lam_min = eigs[0].max(0.0);
    let lam_max = eigs[k - 1].max(f64::MIN_POSITIVE);
    let condition = (lam_max / lam_min.max(f64::MIN_POSITIVE)).sqrt();
    if !condition.is_finite() || condition > COND_LIMIT {
        return Err(OpenError::FitDegeneracy(format!(
            "design condition number {condition:.3e} exceeds {COND_LIMIT:.0e}"
        )));
    }

    // Soft Σp ≤ 1 via a heavily weighted row with a nonnegative slack
    // column: W·(Σp + s) = W.
    let bscale = b.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-12);
    let weight = 1e3 * bscale;
    let solve_p = |kappas: &[f64]| -> OpenResult<(Vec<f64>, f64)> {
        let a = design(kappas);
        let mut aug = nd::Array2::zeros((m + 1, k + 1));
        let mut rhs = vec![0.0; m + 1];
        for i in 0..m {
            for j in 0..k {
                aug[[i, j]] = a[[i, j]];
            }
            rhs[i] = b[i];
        }
        for j in 0..=k {
            aug[[m, j]] = weight;
        }
        rhs[m] = weight;
        let sol = nnls(&aug, &rhs)?;
        // Data-only residual (the constraint row is a prior, not data).
        let mut sse = 0.0;
        for i in 0..m {
            let mut fit = 0.0;
            for j in 0..k {
                fit += a[[i, j]] * sol.x[j];
            }
            sse += (b[i] - fit) * (b[i] - fit);
        }
        Ok((sol.x[..k].to_vec(), sse))
    };

    let mut kappas = vec![0.0; k];
    let (mut pops, mut sse) = solve_p(&kappas)?;
    let kappa_hi = 8.0 / span;
    for _sweep in 0..8 {
        // Envelope line searches: golden section per component on the
        // *profiled* objective (populations re-solved at every trial κ),
        // keeping κ = 0 whenever damping does not strictly improve the
        // fit, so undamped combs are recovered exactly.
        for j in 0..k {
            let eval = |kap: f64| -> f64 {
                let mut trial = kappas.clone();
                trial[j] = kap;
                solve_p(&trial).map(|(_, s)| s).unwrap_or(f64::INFINITY)
            };
            let golden = golden_min(&eval, 0.0, kappa_hi, 32);
            kappas[j] = if eval(golden) < eval(0.0) { golden } else { 0.0 };
        }
        let (p_new, sse_new) = solve_p(&kappas)?;
        let improved = sse - sse_new > 1e-12 * sse.max(1e-300);
        pops = p_new;
        sse = sse_new;
        if !improved {
            break;
        }
    }

    // Covariance of the population estimates at the fitted envelopes,
    // via the eigen-pseudo-inverse of the final design's Gram matrix.
    let a_fin = design(&kappas);
    let gram_fin = a_fin.t().dot(&a_fin);
    let (eigs, vecs) = eigh_small(&gram_fin);
    let floor = eigs[k - 1].max(f64::MIN_POSITIVE) * 1e-14;
    let active = pops.iter().filter(|&&p| p > 0.0).count();
    let dof = (m as isize - 2 * active as isize).max(1) as f64;
    let sigma2 = sse / dof;
    let mut cov00 = 0.0;
    for (j, &e) in eigs.iter().enumerate() {
        if e > floor {
            cov00 += vecs[[0, j]] * vecs[[0, j]] / e;
        }
    }
    Ok(VacuumFit {
        p0: pops[0],
        p0_err: (sigma2 * cov00).sqrt(),
        populations: pops,
        dampings: kappas,
        residual_rms: (sse / m as f64).sqrt(),
        condition,
        n_components: k,
    })
}

/// Golden-section minimum of `f` on `[a, b]`.
fn golden_min(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, iters: usize) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut lo, mut hi) = (a, b);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..iters {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}
