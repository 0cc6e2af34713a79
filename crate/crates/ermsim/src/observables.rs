//! Observables and derived quantities: reduced density matrices,
//! entanglement entropy, Peres lattices, Wigner functions, strength
//! functions, and the vacuum-island state classifier.
//!
//! Conventions:
//!
//! - the motional Wigner function follows
//!   `W(x,p) = (Δ/π)·∫ ⟨x−y|ρ_m|x+y⟩·e^{2iΔyp} dy`, so the vacuum gives
//!   `(Δ/π)·e^{−Δ(x²+p²)}` and the `n = 1` Fock state dips to `−Δ/π` at
//!   the origin — the phase-space coordinates are the same `(x, p)` the
//!   classical limit uses, with `ħ_eff = 1/Δ`;
//! - entanglement entropy is reported in nats and bits (`S_E/ln 2`), from
//!   the closed-form eigenvalues of the 2×2 reduced qubit matrix;
//! - a level of the spectrum counts as a *vacuum-island* (emergent) state
//!   when its energy lies strictly inside `(e_sad, e_vac)` and its Fock
//!   occupation satisfies `⟨n̂⟩/Δ < p_c²/2`, i.e. the state fits inside
//!   the classically trapped island around the origin.

use crate::hilbert::QuantumState;
use crate::semiclassics::{critical_set, SemiclassicsError};
use crate::spectrum::Spectrum;
use crate::C64;
use ndarray as nd;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ObservablesError {
    /// Returned when an operation needs eigenvectors that were not
    /// computed.
    #[error("spectrum carries no eigenvectors; rerun diagonalization with states")]
    MissingStates,

    /// Returned when operand dimensions disagree.
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    /// Returned when a density matrix is not Hermitian to tolerance.
    #[error("density matrix deviates from Hermiticity by {0:.3e}")]
    NonHermitian(f64),

    /// Returned when the Wigner sum leaves an imaginary residue beyond
    /// tolerance (signals an inconsistent density matrix).
    #[error("imaginary residue {0:.3e} in Wigner reconstruction exceeds 1e-10")]
    ImaginaryResidue(f64),

    /// Returned when the state carries weight outside the requested
    /// phase-space grid.
    #[error("grid covers the state poorly: mass {mass:.3e} outside extent {extent:.3} exceeds 1e-3")]
    GridCoverage { mass: f64, extent: f64 },

    /// Returned when strength-function weights do not resolve the state
    /// (the eigenbasis selection does not span it).
    #[error("strength function incomplete: weights sum to {0}, need 1 ± 1e-8")]
    IncompleteBasis(f64),

    /// Phase-structure precondition failures (no saddle, etc.).
    #[error(transparent)]
    Semi(#[from] SemiclassicsError),
}

pub type ObsResult<T> = Result<T, ObservablesError>;

/// Reduced motional density matrix `ρ_m[n, m] = Σ_s ψ(s,n)·ψ*(s,m)`.
pub fn reduced_motional(psi: &QuantumState) -> nd::Array2<C64> {
    let nfock = psi.space.fock_cutoff + 1;
    let mut rho = nd::Array2::zeros((nfock, nfock));
    for n in 0..nfock {
        for m in 0..nfock {
            let mut acc = C64::new(0.0, 0.0);
            for s in 0..2 {
                acc += psi.amplitudes[2 * n + s] * psi.amplitudes[2 * m + s].conj();
            }
            rho[[n, m]] = acc;
        }
    }
    rho
}

/// Entanglement entropy of the qubit-motion split.
#[derive(Clone, Copy, Debug)]
pub struct Entropy {
    /// `S_E = −Tr ρ_q ln ρ_q` in nats.
    pub nats: f64,
    /// `S_E / ln 2` (1.0 for a maximally entangled qubit).
    pub bits: f64,
}

/// Entanglement entropy from the 2×2 reduced qubit matrix, whose
/// eigenvalues are `1/2 ± √((p↓−p↑)²/4 + |c|²)` with
/// `c = Σ_n ψ(↓,n)ψ*(↑,n)`.
pub fn entanglement_entropy(psi: &QuantumState) -> Entropy {
    let mut p_down = 0.0;
    let mut p_up = 0.0;
    let mut coh = C64::new(0.0, 0.0);
    for n in 0..=psi.space.fock_cutoff {
        let down = psi.amplitudes[2 * n];
        let up = psi.amplitudes[2 * n + 1];
        p_down += down.norm_sqr();
        p_up += up.norm_sqr();
        coh += down * up.conj();
    }
    entropy_from_qubit_matrix(p_down, p_up, coh)
}

fn entropy_from_qubit_matrix(p_down: f64, p_up: f64, coh: C64) -> Entropy {
    let half_gap = (0.25 * (p_down - p_up).powi(2) + coh.norm_sqr()).sqrt();
    let mid = 0.5 * (p_down + p_up);
    let nats = [mid + half_gap, mid - half_gap]
        .into_iter()
        .map(|p| {
            let p = p.clamp(0.0, 1.0);
            if p > 0.0 { -p * p.ln() } else { 0.0 }
        })
        .sum();
    Entropy { nats, bits: nats / std::f64::consts::LN_2 }
}

/// One eigenstate's coordinates in a Peres lattice.
#[derive(Clone, Copy, Debug)]
pub struct PeresPoint {
    pub energy: f64,
    pub n_mean: f64,
    pub jz_mean: f64,
    pub parity: i8,
    /// Eigenstate entanglement entropy in nats.
    pub entropy: f64,
    /// Whether the level classifies as a vacuum-island state.
    pub emergent: bool,
}

/// Expectation lattice `(e_k, ⟨n̂⟩_k, ⟨Ĵz⟩_k, …)` over all levels of a
/// spectrum.  Vacuum-island flags are attached when the parameters lie in
/// the saddle regime and default to `false` elsewhere.
pub fn peres_lattice(spec: &Spectrum) -> ObsResult<Vec<PeresPoint>> {
    let states = spec.states.as_ref().ok_or(ObservablesError::MissingStates)?;
    let flags = match classify_emergent(spec) {
        Ok(c) => c.flags,
        Err(ObservablesError::Semi(SemiclassicsError::NoSaddle(_))) => vec![false; spec.len()],
        Err(e) => return Err(e),
    };
    let mut out = Vec::with_capacity(spec.len());
    for (k, v) in states.iter().enumerate() {
        let mut p_down = 0.0;
        let mut p_up = 0.0;
        let mut coh = 0.0;
        for n in 0..v.len() / 2 {
            p_down += v[2 * n] * v[2 * n];
            p_up += v[2 * n + 1] * v[2 * n + 1];
            coh += v[2 * n] * v[2 * n + 1];
        }
        let entropy = entropy_from_qubit_matrix(p_down, p_up, C64::new(coh, 0.0)).nats;
        out.push(PeresPoint {
            energy: spec.energies[k],
            n_mean: spec.n_mean(k).expect("peres_lattice: states checked above"),
            jz_mean: 0.5 * (p_up - p_down),
            parity: spec.parities[k],
            entropy,
            emergent: flags[k],
        });
    }
    Ok(out)
}

/// Classification of spectrum levels into vacuum-island states.
#[derive(Clone, Debug)]
pub struct EmergentClassification {
    /// Per-level flag, aligned with the spectrum's selection.
    pub flags: Vec<bool>,
    /// Number of flagged levels.
    pub count: usize,
    /// The open energy window `(e_sad, e_vac)`.
    pub window: (f64, f64),
    /// The occupation threshold `p_c²/2` on `⟨n̂⟩/Δ`.
    pub occupation_threshold: f64,
}

/// Flag levels with `e ∈ (e_sad, e_vac)` and `⟨n̂⟩/Δ < p_c²/2`.
/// Requires the saddle regime `λ|δ| > 1` and stored eigenvectors.
pub fn classify_emergent(spec: &Spectrum) -> ObsResult<EmergentClassification> {
    let lam = spec.params.coupling;
    let d = spec.params.regime;
    let cs = critical_set(lam, d);
    let (e_sad, p_c) = match (cs.e_sad, cs.p_c) {
        (Some(e), Some(p)) => (e, p),
        _ => return Err(SemiclassicsError::NoSaddle(lam * d.abs()).into()),
    };
    if spec.states.is_none() {
        return Err(ObservablesError::MissingStates);
    }
    let threshold = 0.5 * p_c * p_c;
    let delta = spec.params.system_size;
    let mut flags = vec![false; spec.len()];
    let mut count = 0;
    for k in 0..spec.len() {
        let e = spec.energies[k];
        if e > e_sad && e < cs.e_vac {
            let occ = spec.n_mean(k).expect("classify_emergent: states checked above") / delta;
            if occ < threshold {
                flags[k] = true;
                count += 1;
            }
        }
    }
    Ok(EmergentClassification {
        flags,
        count,
        window: (e_sad, cs.e_vac),
        occupation_threshold: threshold,
    })
}

/// One line of a strength function: an eigenstate energy and the overlap
/// weight `|⟨E_k|ψ⟩|²`.
#[derive(Clone, Copy, Debug)]
pub struct StrengthPoint {
    pub energy: f64,
    pub weight: f64,
}

/// Decompose a state over the eigenbasis of a spectrum.  The selection
/// must span the state: weights are required to sum to `1 ± 1e-8`.
pub fn strength_function(psi: &QuantumState, spec: &Spectrum) -> ObsResult<Vec<StrengthPoint>> {
    let states = spec.states.as_ref().ok_or(ObservablesError::MissingStates)?;
    if spec.space.dim() != psi.space.dim() {
        return Err(ObservablesError::DimensionMismatch(spec.space.dim(), psi.space.dim()));
    }
    let mut out = Vec::with_capacity(spec.len());
    let mut total = 0.0;
    for (k, v) in states.iter().enumerate() {
        let overlap: C64 = v
            .iter()
            .zip(&psi.amplitudes)
            .map(|(&vk, &a)| a * vk)
            .sum();
        let weight = overlap.norm_sqr();
        total += weight;
        out.push(StrengthPoint { energy: spec.energies[k], weight });
    }
    if (total - 1.0).abs() > 1e-8 {
        return Err(ObservablesError::IncompleteBasis(total));
    }
    Ok(out)
}

/// Default Wigner grid: 201 × 201 points spanning
/// `±1.5·max(x_c, p_c, 3/√Δ)` in both directions.
pub fn default_wigner_grid(system_size: f64, coupling: f64, regime: f64) -> (Vec<f64>, Vec<f64>) {
    let cs = critical_set(coupling, regime);
    let extent = 1.5 * cs.x_c.max(cs.p_c.unwrap_or(0.0)).max(3.0 / system_size.sqrt());
    let axis: Vec<f64> =
        (0..201).map(|i| -extent + 2.0 * extent * i as f64 / 200.0).collect();
    (axis.clone(), axis)
}

/// Hermiticity tolerance for Wigner input checks.
const HERMITICITY_TOL: f64 = 1e-10;
/// Imaginary-residue ceiling (relative to the largest |W| on the grid).
const IM_RESIDUE_TOL: f64 = 1e-10;
/// Maximum state mass allowed outside the grid extent.
const COVERAGE_TOL: f64 = 1e-3;
/// Coherences below this magnitude are skipped in the Wigner sum.
const RHO_CUT: f64 = 1e-14;

/// Wigner function of a motional density matrix on a rectangular grid;
/// `out[[i, j]]` corresponds to `(x_grid[i], p_grid[j])`.
///
/// Evaluated per Fock coherence through the closed form (for `m = n+d`,
/// `d ≥ 0`, natural coordinates `q = √Δ·x`, `π_p = √Δ·p`, `ζ = q² + π_p²`)
///
/// ```text
///     W_{mn} = ((−1)ⁿ/π)·√(n!/m!)·(√2(q − iπ_p))^d·e^{−ζ}·L_n^{(d)}(2ζ),
/// ```
///
/// accumulated with a scaled associated-Laguerre recurrence so that no
/// intermediate overflows; the total is `Δ·Σ ρ_{mn} W_{mn}`.  The
/// imaginary residue of the sum is checked against `1e-10` and discarded.
pub fn wigner(
    rho_m: &nd::Array2<C64>,
    system_size: f64,
    x_grid: &[f64],
    p_grid: &[f64],
) -> ObsResult<nd::Array2<f64>> {
    let nfock = rho_m.nrows();
    if rho_m.ncols() != nfock {
        return Err(ObservablesError::DimensionMismatch(nfock, rho_m.ncols()));
    }
    // Hermiticity check (and trace normalization is the caller's business;
    // any Hermitian operator has a well-defined transform).
    let mut herm = 0.0f64;
    for n in 0..nfock {
        for m in 0..=n {
            herm = herm.max((rho_m[[n, m]] - rho_m[[m, n]].conj()).norm());
        }
    }
    if herm > HERMITICITY_TOL {
        return Err(ObservablesError::NonHermitian(herm));
    }
    // Coverage: population living at radii beyond the grid extent.
    let extent = x_grid
        .iter()
        .chain(p_grid)
        .fold(0.0f64, |m, &v| m.max(v.abs()));
    let mut outside = 0.0;
    for n in 0..nfock {
        let r_n = ((2 * n + 1) as f64 / system_size).sqrt();
        if r_n > extent {
            outside += rho_m[[n, n]].re;
        }
    }
    if outside > COVERAGE_TOL {
        return Err(ObservablesError::GridCoverage { mass: outside, extent });
    }
    // Per-offset magnitude ceilings let the sum skip negligible bands.
    let band_max: Vec<f64> = (0..nfock)
        .map(|d| (0..nfock - d).map(|n| rho_m[[n + d, n]].norm()).fold(0.0, f64::max))
        .collect();

    let mut out = nd::Array2::zeros((x_grid.len(), p_grid.len()));
    let mut worst_im = 0.0f64;
    let mut worst_abs = 0.0f64;
    for (ix, &x) in x_grid.iter().enumerate() {
        for (ip, &p) in p_grid.iter().enumerate() {
            let q = system_size.sqrt() * x;
            let pi_p = system_size.sqrt() * p;
            let zeta = q * q + pi_p * pi_p;
            let phase_step = if zeta > 0.0 {
                C64::new(q / zeta.sqrt(), -pi_p / zeta.sqrt())
            } else {
                C64::new(1.0, 0.0)
            };
            let mut acc = C64::new(0.0, 0.0);
            let mut phase = C64::new(1.0, 0.0);
            let mut ln_fact_ratio = 0.0; // ln(d!)
            for d in 0..nfock {
                if d > 0 {
                    phase *= phase_step;
                    ln_fact_ratio += (d as f64).ln();
                }
                if band_max[d] < RHO_CUT {
                    continue;
                }
                // g_0 = √(1/d!)·(2ζ)^{d/2}·e^{−ζ}; zero when ζ = 0, d > 0.
                let g0 = if d == 0 {
                    (-zeta).exp()
                } else if zeta == 0.0 {
                    0.0
                } else {
                    (-zeta + 0.5 * d as f64 * (2.0 * zeta).ln() - 0.5 * ln_fact_ratio).exp()
                };
                let mut g_prev = 0.0;
                let mut g = g0;
                let mut sign = 1.0;
                for n in 0..nfock - d {
                    let w = phase * (sign * g * std::f64::consts::FRAC_1_PI);
                    if d == 0 {
                        acc += w * rho_m[[n, n]];
                    } else {
                        acc += w * rho_m[[n + d, n]] + w.conj() * rho_m[[n, n + d]];
                    }
                    // Orthonormal-scaled recurrence for
                    // √(n!/(n+d)!)·L_n^{(d)}(2ζ) (times the g0 prefactor).
                    let nf = n as f64;
                    let df = d as f64;
                    let g_next = ((2.0 * nf + df + 1.0 - 2.0 * zeta) * g
                        - (nf * (nf + df)).sqrt() * g_prev)
                        / (((nf + 1.0) * (nf + 1.0 + df)).sqrt());
                    g_prev = g;
                    g = g_next;
                    sign = -sign;
                }
            }
            let w = acc * system_size;
            worst_im = worst_im.max(w.im.abs());
            worst_abs = worst_abs.max(w.re.abs());
            out[[ix, ip]] = w.re;
        }
    }
    if worst_im > IM_RESIDUE_TOL * worst_abs.max(1.0) {
        return Err(ObservablesError::ImaginaryResidue(worst_im));
    }
    Ok(out)
}
