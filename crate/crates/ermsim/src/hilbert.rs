//! Truncated Hilbert space, basis conventions, and state storage.
//!
//! The joint qubit ⊗ motion space is truncated at Fock number
//! `fock_cutoff` = `N_max` and indexed by
//!
//! ```text
//!     i = 2n + s ,      s = 0 (↓) or 1 (↑),   n = 0 … N_max ,
//! ```
//!
//! so the dimension is `2(N_max + 1)`.  Parity
//! `P = (−1)^(n̂ + Ĵz + 1/2)` assigns `(−1)^(n+s)` to `|s, n⟩`; it commutes
//! exactly with the Hamiltonian even after truncation, splitting the space
//! into an even block (`+1`, containing `|↓,0⟩`) and an odd block (`−1`,
//! containing `|↑,0⟩`).
//!
//! Each parity block, ordered by Fock number, is *tridiagonal* in the
//! Hamiltonian: position `k` inside a block holds Fock state `n = k` with
//! the spin forced by the parity.  Evolution kernels interleave the two
//! blocks as
//!
//! ```text
//!     flat[2k]     = even-block position k
//!     flat[2k + 1] = odd-block position k ,
//! ```
//!
//! which keeps couplings local (`k ↔ k±1` within a block is `j ↔ j±2`
//! interleaved) so that truncating the flat array at `2k` truncates both
//! blocks at the same Fock number.  Conversions between the public `2n+s`
//! ordering and the interleaved ordering live here.

use crate::C64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StateError {
    /// Returned when amplitudes do not match the space dimension.
    #[error("dimension mismatch: space has dimension {0} but got {1} amplitudes")]
    DimensionMismatch(usize, usize),

    /// Returned when a state's norm is too far from one.
    #[error("state norm {0} deviates from unity beyond tolerance {1}")]
    NotNormalized(f64, f64),

    /// Returned when the population near the Fock cutoff exceeds a health
    /// threshold, signalling an untrustworthy truncation.
    #[error("truncation health: tail mass {mass:.3e} above Fock {from} exceeds {threshold:.3e}")]
    TailMass { mass: f64, from: usize, threshold: f64 },

    /// Returned when a basis label lies outside the truncated space.
    #[error("basis label out of range: n = {0} exceeds fock_cutoff = {1}")]
    FockOutOfRange(usize, usize),
}

pub type StateResult<T> = Result<T, StateError>;

/// Default norm tolerance for state constructors.
pub const NORM_TOL: f64 = 1e-8;
/// Fraction of the Fock range whose occupation counts as "tail" for
/// truncation-health checks.
pub const TAIL_FRACTION: f64 = 0.9;
/// Default ceiling on the tail mass.
pub const TAIL_THRESHOLD: f64 = 1e-8;

/// Qubit state labels for the `2n + s` indexing.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Spin {
    Down = 0,
    Up = 1,
}

/// Truncated joint Hilbert space.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HilbertSpace {
    /// Largest retained Fock number `N_max`.
    pub fock_cutoff: usize,
}

impl HilbertSpace {
    pub fn new(fock_cutoff: usize) -> Self {
        Self { fock_cutoff }
    }

    /// Total dimension `2(N_max + 1)`.
    pub fn dim(&self) -> usize {
        2 * (self.fock_cutoff + 1)
    }

    /// Flat index of `|s, n⟩`.
    pub fn index(&self, spin: Spin, n: usize) -> usize {
        2 * n + spin as usize
    }

    /// Inverse of [`Self::index`].
    pub fn label(&self, i: usize) -> (Spin, usize) {
        let spin = if i % 2 == 0 { Spin::Down } else { Spin::Up };
        (spin, i / 2)
    }

    /// Parity eigenvalue `(−1)^(n+s)` of basis state `i = 2n + s`.
    pub fn parity_of_index(&self, i: usize) -> i8 {
        let (spin, n) = self.label(i);
        if (n + spin as usize) % 2 == 0 { 1 } else { -1 }
    }

    /// Interleaved index of public index `i`: even-parity block positions
    /// go to even slots, odd-parity to odd slots, both ordered by Fock
    /// number.
    pub fn interleaved_from_public(&self, i: usize) -> usize {
        let (spin, n) = self.label(i);
        let k = n; // block position equals the Fock number
        if (n + spin as usize) % 2 == 0 { 2 * k } else { 2 * k + 1 }
    }

    /// Public index of interleaved index `j` (inverse of
    /// [`Self::interleaved_from_public`]).
    pub fn public_from_interleaved(&self, j: usize) -> usize {
        let k = j / 2;
        let s = if j % 2 == 0 { k % 2 } else { 1 - k % 2 };
        2 * k + s
    }

    /// Spin value (0 = ↓, 1 = ↑) of interleaved index `j`.
    pub fn spin_of_interleaved(j: usize) -> usize {
        let k = j / 2;
        if j % 2 == 0 { k % 2 } else { 1 - k % 2 }
    }

    /// Fock number of interleaved index `j`.
    pub fn fock_of_interleaved(j: usize) -> usize {
        j / 2
    }
}

/// A pure state over a [`HilbertSpace`], stored in the public `2n + s`
/// ordering.
#[derive(Clone, Debug)]
pub struct QuantumState {
    pub space: HilbertSpace,
    pub amplitudes: Vec<C64>,
}

impl QuantumState {
    /// Build from amplitudes, checking dimension and normalization.
    pub fn new(space: HilbertSpace, amplitudes: Vec<C64>) -> StateResult<Self> {
        if amplitudes.len() != space.dim() {
            return Err(StateError::DimensionMismatch(space.dim(), amplitudes.len()));
        }
        let state = Self { space, amplitudes };
        let n = state.norm();
        if (n - 1.0).abs() > NORM_TOL {
            return Err(StateError::NotNormalized(n, NORM_TOL));
        }
        Ok(state)
    }

    /// The basis state `|s, n⟩`.
    pub fn basis(space: HilbertSpace, spin: Spin, n: usize) -> StateResult<Self> {
        if n > space.fock_cutoff {
            return Err(StateError::FockOutOfRange(n, space.fock_cutoff));
        }
        let mut amplitudes = vec![C64::new(0.0, 0.0); space.dim()];
        amplitudes[space.index(spin, n)] = C64::new(1.0, 0.0);
        Ok(Self { space, amplitudes })
    }

    /// The global ground state at zero coupling, `|↓, 0⟩`.
    pub fn vacuum(space: HilbertSpace) -> Self {
        Self::basis(space, Spin::Down, 0).expect("vacuum: n = 0 is always in range")
    }

    /// Euclidean norm.
    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Population above Fock number `from` (inclusive).
    pub fn tail_mass(&self, from: usize) -> f64 {
        self.amplitudes
            .iter()
            .enumerate()
            .filter(|(i, _)| i / 2 >= from)
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    /// Check that the population near the cutoff is negligible; the
    /// boundary sits at `TAIL_FRACTION` of the Fock range.
    pub fn check_truncation_health(&self, threshold: f64) -> StateResult<()> {
        let from = ((self.space.fock_cutoff as f64) * TAIL_FRACTION).floor() as usize;
        let mass = self.tail_mass(from.max(1));
        if mass > threshold {
            Err(StateError::TailMass { mass, from: from.max(1), threshold })
        } else {
            Ok(())
        }
    }

    /// Amplitudes reordered into the interleaved parity layout.
    pub fn to_interleaved(&self) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.amplitudes.len()];
        for (i, &a) in self.amplitudes.iter().enumerate() {
            out[self.space.interleaved_from_public(i)] = a;
        }
        out
    }

    /// Rebuild a state from interleaved amplitudes.
    pub fn from_interleaved(space: HilbertSpace, flat: &[C64]) -> Self {
        assert!(
            flat.len() == space.dim(),
            "from_interleaved: expected {} amplitudes, got {}",
            space.dim(),
            flat.len()
        );
        let mut amplitudes = vec![C64::new(0.0, 0.0); flat.len()];
        for (j, &a) in flat.iter().enumerate() {
            amplitudes[space.public_from_interleaved(j)] = a;
        }
        Self { space, amplitudes }
    }

    /// ⟨n̂⟩ (no normalization applied; callers hold normalized states).
    pub fn n_mean(&self) -> f64 {
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(i, a)| (i / 2) as f64 * a.norm_sqr())
            .sum()
    }

    /// ⟨Ĵz⟩ with `Ĵz|↑⟩ = +1/2`, `Ĵz|↓⟩ = −1/2`.
    pub fn jz_mean(&self) -> f64 {
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(i, a)| if i % 2 == 1 { 0.5 } else { -0.5 } * a.norm_sqr())
            .sum()
    }

    /// Population of `|↓, 0⟩`.
    pub fn p_vacuum_down(&self) -> f64 {
        self.amplitudes[0].norm_sqr()
    }

    /// Total spin-down population ⟨P̂↓⟩.
    pub fn p_down(&self) -> f64 {
        self.amplitudes.iter().step_by(2).map(|a| a.norm_sqr()).sum()
    }

    /// ⟨P̂⟩ for the parity operator.
    pub fn parity_mean(&self) -> f64 {
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(i, a)| self.space.parity_of_index(i) as f64 * a.norm_sqr())
            .sum()
    }
}

/// Fock-space extent heuristic: retain
/// `N_max = ceil(Δ·max(4·x_c², 8) + 40)` with `x_c` the displaced-well
/// position at the largest coupling reached, so the grid covers the
/// classically accessible region at saddle energies with generous margin.
pub fn suggest_cutoff(system_size: f64, max_coupling: f64) -> usize {
    let lam = max_coupling.max(1.0);
    let xc2 = 0.5 * lam * lam * (1.0 - lam.powi(-4));
    (system_size * (4.0 * xc2).max(8.0) + 40.0).ceil() as usize
}
