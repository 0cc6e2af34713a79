//! Classical limit: energy surfaces, critical points, phase diagram,
//! smoothed level densities, and phase-space volumes.
//!
//! In the `Δ → ∞` limit the model reduces to a classical Hamiltonian on
//! the motional phase plane with two branches `m = ±1/2` from the spin:
//!
//! ```text
//!     h(x, p; m) = (x² + p²)/2 + m·√(2λ²(x² + δ²p²) + 1) .
//! ```
//!
//! Only the lower branch (`m = −1/2`) is critical.  In polar coordinates
//! `x = r cos φ`, `p = r sin φ` it reads
//! `h = r²/2 − (1/2)√(2λ²c(φ)r² + 1)` with `c(φ) = cos²φ + δ² sin²φ`.
//! Its landmarks:
//!
//! - `e_vac = −1/2`: the value at the origin (the qubit-down vacuum);
//!   a local *maximum* of the lower branch once `λ|δ| > 1`;
//! - `e_min = −(λ² + λ⁻²)/4` at `(±x_c, 0)` for `λ ≥ 1`, with
//!   `x_c = (λ/√2)·√(1 − λ⁻⁴)`: the displaced wells;
//! - `e_sad = −((λδ)² + (λδ)⁻²)/4` at `(0, ±p_c)` for `λ|δ| > 1`, with
//!   `p_c = (λ|δ|/√2)·√(1 − (λδ)⁻⁴)`: saddle points flanking the
//!   vacuum hilltop.
//!
//! The stationary energies seed the excited-state phase diagram: `N` below
//! `λ_c = 1`, `S1` between `λ_c` and `λ₀ = 1/|δ|`, and `S2` (`δ > 0`) or
//! `S2′` (`δ < 0`) beyond `λ₀`, where the hilltop/saddle structure traps a
//! family of vacuum-like states at energies between `e_sad` and `e_vac`.
//! The phase-space volumes of the trapped island (`v⁻`) and of the
//! surrounding shell in the same energy window (`v⁺`) predict how many
//! such states a finite-`Δ` spectrum holds: `N_e = v⁻·Δ/(2π)`.

use crate::numeric::{integrate, QuadError};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SemiclassicsError {
    /// Returned when an operation requires the double-well-plus-saddle
    /// regime `λ|δ| > 1` but the parameters lie elsewhere.
    #[error("phase precondition: λ|δ| = {0} does not exceed 1")]
    NoSaddle(f64),

    /// Quadrature failure in a volume integral.
    #[error("volume quadrature: {0}")]
    Quad(#[from] QuadError),

    /// Returned when a radial root bracket cannot be established.
    #[error("radial root bracket failed at φ = {phi}, e = {e}")]
    RootBracket { phi: f64, e: f64 },
}

pub type SemiResult<T> = Result<T, SemiclassicsError>;

/// Spin branch of the classical energy surface.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    /// `m = −1/2` (the critical branch).
    Lower,
    /// `m = +1/2` (uncritical).
    Upper,
}

/// Classical energy `h(x, p; m)` at coupling `λ` and asymmetry `δ`.
pub fn classical_energy(x: f64, p: f64, branch: Branch, coupling: f64, regime: f64) -> f64 {
    let m = match branch {
        Branch::Lower => -0.5,
        Branch::Upper => 0.5,
    };
    let lam2 = coupling * coupling;
    0.5 * (x * x + p * p) + m * (2.0 * lam2 * (x * x + regime * regime * p * p) + 1.0).sqrt()
}

/// `c(φ) = cos²φ + δ²·sin²φ`.
fn angular_weight(phi: f64, regime: f64) -> f64 {
    let (s, c) = phi.sin_cos();
    c * c + regime * regime * s * s
}

/// Minimum of the lower branch along the ray at fixed `φ`:
/// `−(g + 1/g)/4` at `r² = (g² − 1)/(2g)` for `g = λ²c ≥ 1`, else `−1/2`
/// at the origin.
fn ray_minimum(g: f64) -> f64 {
    if g >= 1.0 { -0.25 * (g + 1.0 / g) } else { -0.5 }
}

/// Landmark energies and stationary points of the lower branch.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CriticalSet {
    /// Energy at the origin, always `−1/2`.
    pub e_vac: f64,
    /// Global minimum (`−1/2` in the normal phase).
    pub e_min: f64,
    /// Saddle energy, present only for `λ|δ| > 1`.
    pub e_sad: Option<f64>,
    /// Displaced-well position (`0` in the normal phase).
    pub x_c: f64,
    /// Saddle position, present only for `λ|δ| > 1`.
    pub p_c: Option<f64>,
    /// Ground-state critical coupling (independent of δ).
    pub lambda_c: f64,
    /// Excited-state critical coupling `1/|δ|` (infinite at δ = 0).
    pub lambda_0: f64,
}

/// Compute the [`CriticalSet`] at `(λ, δ)`.
pub fn critical_set(coupling: f64, regime: f64) -> CriticalSet {
    let lam = coupling;
    let ld = lam * regime.abs();
    let (e_min, x_c) = if lam >= 1.0 {
        (-0.25 * (lam * lam + (lam * lam).recip()), lam / 2.0f64.sqrt() * (1.0 - lam.powi(-4)).sqrt())
    } else {
        (-0.5, 0.0)
    };
    let (e_sad, p_c) = if ld > 1.0 {
        (
            Some(-0.25 * (ld * ld + (ld * ld).recip())),
            Some(ld / 2.0f64.sqrt() * (1.0 - ld.powi(-4)).sqrt()),
        )
    } else {
        (None, None)
    };
    CriticalSet {
        e_vac: -0.5,
        e_min,
        e_sad,
        x_c,
        p_c,
        lambda_c: 1.0,
        lambda_0: if regime == 0.0 { f64::INFINITY } else { regime.abs().recip() },
    }
}

/// Phase of the excited-state diagram.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Phase {
    /// Normal: single well at the origin (λ < 1).
    Normal,
    /// Superradiant, no saddle (1 < λ ≤ 1/|δ|).
    S1,
    /// Superradiant with trapped vacuum island, δ > 0.
    S2,
    /// Superradiant with trapped vacuum island, δ < 0.
    S2Prime,
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Phase::Normal => "N",
            Phase::S1 => "S1",
            Phase::S2 => "S2",
            Phase::S2Prime => "S2'",
        };
        write!(f, "{}", s)
    }
}

/// Result of [`classify_phase`]: exact boundary points are labeled with
/// the lower phase and flagged, so sweep code behaves deterministically.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PhaseClassification {
    pub phase: Phase,
    pub boundary: bool,
}

/// Classify `(λ, δ)` in the excited-state phase diagram.
pub fn classify_phase(coupling: f64, regime: f64) -> PhaseClassification {
    let ld = coupling * regime.abs();
    if coupling < 1.0 {
        PhaseClassification { phase: Phase::Normal, boundary: false }
    } else if coupling == 1.0 {
        PhaseClassification { phase: Phase::Normal, boundary: true }
    } else if ld < 1.0 {
        PhaseClassification { phase: Phase::S1, boundary: false }
    } else if ld == 1.0 {
        PhaseClassification { phase: Phase::S1, boundary: true }
    } else if regime > 0.0 {
        PhaseClassification { phase: Phase::S2, boundary: false }
    } else {
        PhaseClassification { phase: Phase::S2Prime, boundary: false }
    }
}

/// Exact spectrum at `δ = ±1` (`sign`), where the model reduces to a
/// Jaynes-Cummings / anti-Jaynes-Cummings ladder of 2×2 blocks: the
/// unpaired level `−sign/2` plus pairs
///
/// ```text
///     e_n^± = (2n+1)/(2Δ) ± r_n/2 ,
///     r_n = √( ((1 − sign·Δ)/Δ)² + 4λ²(n+1)/Δ ) ,    n = 0 … n_max.
/// ```
pub fn jc_spectrum_analytic(system_size: f64, coupling: f64, sign: i8, n_max: usize) -> Vec<f64> {
    assert!(sign == 1 || sign == -1, "jc_spectrum_analytic: sign must be ±1");
    let delta = system_size;
    let mut out = Vec::with_capacity(2 * (n_max + 1) + 1);
    out.push(-0.5 * sign as f64);
    let base = (1.0 - sign as f64 * delta) / delta;
    for n in 0..=n_max {
        let mean = (2 * n + 1) as f64 / (2.0 * delta);
        let r = (base * base + 4.0 * coupling * coupling * (n + 1) as f64 / delta).sqrt();
        out.push(mean - 0.5 * r);
        out.push(mean + 0.5 * r);
    }
    out.sort_by(f64::total_cmp);
    out
}

/// Gaussian-smoothed density of states
/// `ρ_σ(e) = Σ_i exp(−(e−e_i)²/2σ²)/(σ√(2π))`, evaluated on `grid`.
pub fn smoothed_dos(energies: &[f64], sigma: f64, grid: &[f64]) -> Vec<f64> {
    assert!(sigma > 0.0, "smoothed_dos: σ must be positive");
    let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    grid.iter()
        .map(|&e| {
            energies
                .iter()
                .map(|&ei| {
                    let z = (e - ei) / sigma;
                    (-0.5 * z * z).exp()
                })
                .sum::<f64>()
                * norm
        })
        .collect()
}

/// Uniform grid covering the spectrum padded by `5σ` on both sides, so
/// that the smoothed density integrates to the level count.
pub fn dos_grid(energies: &[f64], sigma: f64, npoints: usize) -> Vec<f64> {
    assert!(npoints >= 2 && !energies.is_empty(), "dos_grid: need ≥2 points and ≥1 level");
    let lo = energies.iter().cloned().fold(f64::INFINITY, f64::min) - 5.0 * sigma;
    let hi = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 5.0 * sigma;
    (0..npoints).map(|i| lo + (hi - lo) * i as f64 / (npoints - 1) as f64).collect()
}

/// Default smoothing width: three mean level spacings of the input window
/// (wide enough to suppress shell oscillations, narrow enough to keep the
/// saddle-point peak visible).
pub fn default_smoothing_width(energies: &[f64]) -> f64 {
    assert!(energies.len() >= 2, "default_smoothing_width: need at least two levels");
    let lo = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    3.0 * (hi - lo) / (energies.len() - 1) as f64
}

/// Phase-space volumes of the trapped island (`v⁻`) and surrounding shell
/// (`v⁺`) over the energy window `(e_sad, e_vac)`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Volumes {
    pub v_minus: f64,
    pub v_plus: f64,
}

/// Semiclassical state-count estimate derived from the volumes.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct EmergentPrediction {
    /// Vacuum-island states: `v⁻·Δ/(2π)` (real-valued, not rounded).
    pub n_e: f64,
    /// Shell states in the same window: `v⁺·Δ/(2π)`.
    pub n_b: f64,
    /// `v⁻/v⁺`.
    pub ratio: f64,
}

/// Inner tolerance of the angular integral.
const PHI_RTOL: f64 = 1e-8;
const PHI_ATOL: f64 = 1e-9;
/// Outer tolerance of the energy integral (well under the 1e−4·2π
/// contract).
const E_RTOL: f64 = 1e-7;
const E_ATOL: f64 = 2e-5;
/// Bisection iterations for radial roots (brackets are O(1) wide, so this
/// reaches machine precision).
const ROOT_ITERS: usize = 80;

/// Compute `(v⁻, v⁺)` as the double integral
///
/// ```text
///     v± = ∫_{e_sad}^{e_vac} de ∮ dφ  r±(φ,e) · |∂h/∂r(r±,φ)|⁻¹
/// ```
///
/// over the inner/outer radial roots of `h(r,φ) = e` on the lower branch.
/// The integrand has an integrable edge singularity as `e → e_sad` near
/// the saddle angles; the substitution `e = e_sad + (e_vac − e_sad)·u²`
/// removes it.  Radial roots are found by bracketed bisection (the
/// enclosing radius follows from the root product/sum of the quadratic in
/// `r²`).  Requires `λ|δ| > 1`.
pub fn phase_space_volumes(coupling: f64, regime: f64) -> SemiResult<Volumes> {
    let ld = coupling * regime.abs();
    if ld <= 1.0 {
        return Err(SemiclassicsError::NoSaddle(ld));
    }
    let cs = critical_set(coupling, regime);
    let e_sad = cs.e_sad.expect("phase_space_volumes: saddle exists for λ|δ| > 1");
    let e_vac = cs.e_vac;
    let width = e_vac - e_sad;

    // One closure per volume; each evaluates the angular integral at the
    // substituted energy.  c(φ) has period π and is symmetric about π/2,
    // so the full circle is four times the first quadrant.
    let mut failure: Option<SemiclassicsError> = None;
    let mut volume = |inner: bool| -> SemiResult<f64> {
        let q = integrate(
            |u| {
                let e = e_sad + width * u * u;
                let jac = 2.0 * width * u;
                let angular = integrate(
                    |phi| {
                        let g = coupling * coupling * angular_weight(phi, regime);
                        match radial_root(g, e, inner) {
                            Ok(r2) => shell_density(g, r2),
                            Err(err) => {
                                failure.get_or_insert(err);
                                0.0
                            }
                        }
                    },
                    0.0,
                    std::f64::consts::FRAC_PI_2,
                    PHI_RTOL,
                    PHI_ATOL,
                );
                match angular {
                    Ok(a) => 4.0 * a.value * jac,
                    Err(err) => {
                        failure.get_or_insert(SemiclassicsError::Quad(err));
                        0.0
                    }
                }
            },
            0.0,
            1.0,
            E_RTOL,
            E_ATOL,
        )?;
        if let Some(err) = failure.take() {
            return Err(err);
        }
        Ok(q.value)
    };

    let v_minus = volume(true)?;
    let v_plus = volume(false)?;
    Ok(Volumes { v_minus, v_plus })
}

/// `N_e = v⁻Δ/(2π)`, `N_b = v⁺Δ/(2π)`, and their ratio.
pub fn predict_emergent_counts(
    coupling: f64,
    regime: f64,
    system_size: f64,
) -> SemiResult<EmergentPrediction> {
    let v = phase_space_volumes(coupling, regime)?;
    let scale = system_size / (2.0 * std::f64::consts::PI);
    Ok(EmergentPrediction {
        n_e: v.v_minus * scale,
        n_b: v.v_plus * scale,
        ratio: v.v_minus / v.v_plus,
    })
}

/// `r / |∂h/∂r|` expressed through `u = r²`:
/// `∂h/∂r = r·(1 − g/√(2gu + 1))`, so the ratio is finite even at `r = 0`.
fn shell_density(g: f64, u: f64) -> f64 {
    (1.0 - g / (2.0 * g * u + 1.0).sqrt()).abs().recip()
}

/// Lower-branch value of `h` along a ray, as a function of `u = r²`.
fn h_of_u(g: f64, u: f64) -> f64 {
    0.5 * u - 0.5 * (2.0 * g * u + 1.0).sqrt()
}

/// Inner (`inner = true`) or outer radial root `u = r²` of `h(r,φ) = e`
/// along the ray with `g = λ²c(φ)`, by bracketed bisection.  `h` descends
/// from `−1/2` at the origin to its ray minimum at `u* = (g²−1)/(2g)` and
/// rises beyond, so the two roots are bracketed by `[0, u*]` and
/// `[u*, u_hi]` with `u_hi = 4e + 2g + 1 ≥ u⁺` (from the quadratic
/// `u² − (4e+2g)u + 4e² − 1 = 0` satisfied by the roots).
fn radial_root(g: f64, e: f64, inner: bool) -> SemiResult<f64> {
    debug_assert!(g > 1.0, "radial_root: rays with g ≤ 1 have no inner root");
    let u_star = (g * g - 1.0) / (2.0 * g);
    let (mut lo, mut hi) = if inner {
        (0.0, u_star)
    } else {
        (u_star, (4.0 * e + 2.0 * g + 1.0).max(u_star + 1.0))
    };
    let f_lo = h_of_u(g, lo) - e;
    let f_hi = h_of_u(g, hi) - e;
    // The ray minimum must lie below e and the bracket ends above; exact
    // tangency (e = ray minimum) collapses the bracket to u*.
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        if (ray_minimum(g) - e).abs() < 1e-14 * e.abs().max(1.0) {
            return Ok(u_star);
        }
        return Err(SemiclassicsError::RootBracket { phi: f64::NAN, e });
    }
    let increasing = f_hi > 0.0;
    for _ in 0..ROOT_ITERS {
        let mid = 0.5 * (lo + hi);
        let fm = h_of_u(g, mid) - e;
        if (fm > 0.0) == increasing {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
