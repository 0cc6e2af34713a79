//! Hamiltonian assembly in parity-block tridiagonal form.
//!
//! The dimensionless Hamiltonian is
//!
//! ```text
//!     ĥ = Ĵz + n̂/Δ + (λ/√Δ)·[ (1+δ)/2·(Ĵ₊â + Ĵ₋â†)
//!                            + (1−δ)/2·(Ĵ₊â† + Ĵ₋â) ] ,
//! ```
//!
//! with physical energies `E = ε·√Δ·h`.  Both coupling terms change `n` by
//! exactly one and flip the spin, so they preserve the parity
//! `(−1)^(n+s)` and, within a parity block ordered by Fock number, connect
//! nearest neighbors only: each block is symmetric tridiagonal.  With
//! `g± = (λ/√Δ)(1±δ)/2`, block position `k` (Fock `n = k`) carries
//!
//! ```text
//!     even block:  d_k = (−1)^(k+1)/2·(−1)^k… = (k even ? −1/2 : +1/2) + k/Δ
//!                  b_k = √(k+1)·(k even ? g₋ : g₊)
//!     odd block:   d_k = (k even ? +1/2 : −1/2) + k/Δ
//!                  b_k = √(k+1)·(k even ? g₊ : g₋)
//! ```
//!
//! because the spin at position `k` alternates, starting from `↓` (even
//! block) or `↑` (odd block).  The coupling enters linearly,
//! `ĥ(λ) = D + λ·V`, which ramps exploit by caching the λ-independent
//! diagonal and the unit-coupling off-diagonals once.
//!
//! [`ErmHamiltonian::dense`] assembles the same operator in the public
//! `2n+s` ordering directly from the ladder-operator algebra — an
//! independent construction used by the tests to certify the block
//! reduction.

use crate::hilbert::{HilbertSpace, Spin};
use crate::numeric::SymTridiag;
use crate::params::{ModelParams, ParamResult};
use crate::C64;
use ndarray as nd;

/// Parity sector label.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn sign(&self) -> i8 {
        match self {
            Parity::Even => 1,
            Parity::Odd => -1,
        }
    }
}

/// The model Hamiltonian over a truncated space, stored as interleaved
/// parity-block tridiagonals (see [`crate::hilbert`] for the layout).
#[derive(Clone, Debug)]
pub struct ErmHamiltonian {
    pub params: ModelParams,
    pub space: HilbertSpace,
    /// λ-independent diagonal in interleaved order.
    diag_free: Vec<f64>,
    /// Unit-coupling off-diagonal: `unit[j]` couples interleaved `j ↔ j+2`
    /// per unit λ (last two entries zero).
    coupl_unit: Vec<f64>,
    /// Running maxima of `|diag_free[..j+1]|` for spectral-radius bounds.
    pmax_diag: Vec<f64>,
    /// Running maxima of `|coupl_unit[..j+1]|`.
    pmax_unit: Vec<f64>,
}

impl ErmHamiltonian {
    pub fn new(params: ModelParams, space: HilbertSpace) -> ParamResult<Self> {
        params.validate()?;
        let dim = space.dim();
        let delta_inv = 1.0 / params.system_size;
        let sqrt_delta_inv = params.system_size.sqrt().recip();
        let gp_unit = 0.5 * (1.0 + params.regime) * sqrt_delta_inv;
        let gm_unit = 0.5 * (1.0 - params.regime) * sqrt_delta_inv;
        let mut diag_free = vec![0.0; dim];
        let mut coupl_unit = vec![0.0; dim];
        for j in 0..dim {
            let n = HilbertSpace::fock_of_interleaved(j);
            let s = HilbertSpace::spin_of_interleaved(j);
            diag_free[j] = if s == 1 { 0.5 } else { -0.5 } + n as f64 * delta_inv;
            if j + 2 < dim {
                // j ↔ j+2 couples Fock k ↔ k+1 inside one block; which of
                // g± applies follows from the spin at position k.
                let k = n;
                let even_slot = j % 2 == 0;
                let lower_is_jc = if even_slot { k % 2 == 1 } else { k % 2 == 0 };
                let g = if lower_is_jc { gp_unit } else { gm_unit };
                coupl_unit[j] = g * ((k + 1) as f64).sqrt();
            }
        }
        let mut pmax_diag = vec![0.0; dim];
        let mut pmax_unit = vec![0.0; dim];
        let mut md = 0.0f64;
        let mut mu = 0.0f64;
        for j in 0..dim {
            md = md.max(diag_free[j].abs());
            mu = mu.max(coupl_unit[j].abs());
            pmax_diag[j] = md;
            pmax_unit[j] = mu;
        }
        Ok(Self { params, space, diag_free, coupl_unit, pmax_diag, pmax_unit })
    }

    /// One parity block at coupling `λ`, as a symmetric tridiagonal matrix
    /// over Fock positions `0 ..= N_max`.
    pub fn block(&self, parity: Parity, coupling: f64) -> SymTridiag {
        let start = match parity {
            Parity::Even => 0,
            Parity::Odd => 1,
        };
        let nblk = self.space.fock_cutoff + 1;
        let diag: Vec<f64> = (0..nblk).map(|k| self.diag_free[2 * k + start]).collect();
        let offd: Vec<f64> =
            (0..nblk - 1).map(|k| coupling * self.coupl_unit[2 * k + start]).collect();
        SymTridiag::new(diag, offd)
    }

    /// Dense matrix in the public `2n+s` ordering, assembled independently
    /// from the ladder-operator algebra.
    pub fn dense(&self, coupling: f64) -> nd::Array2<f64> {
        let dim = self.space.dim();
        let nmax = self.space.fock_cutoff;
        let delta = self.params.system_size;
        let gp = coupling * 0.5 * (1.0 + self.params.regime) / delta.sqrt();
        let gm = coupling * 0.5 * (1.0 - self.params.regime) / delta.sqrt();
        let mut h = nd::Array2::zeros((dim, dim));
        let idx = |s: Spin, n: usize| self.space.index(s, n);
        for n in 0..=nmax {
            h[[idx(Spin::Down, n), idx(Spin::Down, n)]] = -0.5 + n as f64 / delta;
            h[[idx(Spin::Up, n), idx(Spin::Up, n)]] = 0.5 + n as f64 / delta;
            if n + 1 <= nmax {
                let root = ((n + 1) as f64).sqrt();
                // Ĵ₊â + h.c.: ⟨↑,n|ĥ|↓,n+1⟩ = g₊·√(n+1).
                let (a, b) = (idx(Spin::Up, n), idx(Spin::Down, n + 1));
                h[[a, b]] = gp * root;
                h[[b, a]] = gp * root;
                // Ĵ₊â† + h.c.: ⟨↑,n+1|ĥ|↓,n⟩ = g₋·√(n+1).
                let (a, b) = (idx(Spin::Up, n + 1), idx(Spin::Down, n));
                h[[a, b]] = gm * root;
                h[[b, a]] = gm * root;
            }
        }
        h
    }

    /// Diagonal of the parity operator in the public ordering.
    pub fn parity_diag(&self) -> Vec<f64> {
        (0..self.space.dim()).map(|i| self.space.parity_of_index(i) as f64).collect()
    }

    /// `y = ĥ(λ)·x` on interleaved amplitudes, restricted to the first
    /// `span` entries (`x[span..]` is treated as zero; `y[span..]` is not
    /// written).
    pub(crate) fn matvec_interleaved(&self, coupling: f64, x: &[C64], y: &mut [C64], span: usize) {
        assert!(span <= self.diag_free.len() && span <= x.len() && span <= y.len());
        for j in 0..span {
            let mut acc = x[j] * self.diag_free[j];
            if j >= 2 {
                acc += x[j - 2] * (coupling * self.coupl_unit[j - 2]);
            }
            if j + 2 < span {
                acc += x[j + 2] * (coupling * self.coupl_unit[j]);
            }
            y[j] = acc;
        }
    }

    /// ⟨x|ĥ(λ)|x⟩ / ⟨x|x⟩ on interleaved amplitudes over `span` entries.
    pub(crate) fn mean_energy_interleaved(&self, coupling: f64, x: &[C64], span: usize) -> f64 {
        let span = span.min(x.len());
        let mut num = 0.0;
        let mut den = 0.0;
        for j in 0..span {
            let p = x[j].norm_sqr();
            num += self.diag_free[j] * p;
            den += p;
            if j + 2 < span {
                num += 2.0 * coupling * self.coupl_unit[j] * (x[j].conj() * x[j + 2]).re;
            }
        }
        if den > 0.0 { num / den } else { 0.0 }
    }

    /// Upper bound on the spectral radius of `ĥ(λ)` restricted to the
    /// first `span` interleaved entries (Gershgorin over the restriction).
    pub(crate) fn spectral_bound(&self, coupling: f64, span: usize) -> f64 {
        if span == 0 {
            return 0.0;
        }
        let j = span.min(self.diag_free.len()) - 1;
        self.pmax_diag[j] + 2.0 * coupling.abs() * self.pmax_unit[j]
    }

    /// The λ-independent diagonal in interleaved order (dynamics kernels
    /// use it to assemble effective non-Hermitian generators).
    pub(crate) fn diag_free(&self) -> &[f64] {
        &self.diag_free
    }

    /// Unit-coupling off-diagonals in interleaved order.
    pub(crate) fn coupl_unit(&self) -> &[f64] {
        &self.coupl_unit
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::jacobi::eigh_small;

    fn params(delta: f64, lambda: f64, regime: f64) -> ModelParams {
        ModelParams::new(delta, lambda, regime).unwrap()
    }

    fn interleave(space: HilbertSpace, x: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); x.len()];
        for (i, &a) in x.iter().enumerate() {
            out[space.interleaved_from_public(i)] = a;
        }
        out
    }

    #[test]
    fn known_coupling_matrix_element() {
        // ⟨↑,0|ĥ|↓,1⟩ = (λ/√Δ)·(1+δ)/2 = 4·0.75/√15 ≈ 0.7746 at
        // Δ = 15, λ = 4, δ = 0.5.
        let p = params(15.0, 4.0, 0.5);
        let space = HilbertSpace::new(6);
        let h = ErmHamiltonian::new(p, space).unwrap().dense(4.0);
        let expect = 3.0 / 15.0f64.sqrt();
        assert!((h[[1, 2]] - expect).abs() < 1e-15);
        assert!((expect - 0.7745966692414834).abs() < 1e-15);
        // The mirrored process ⟨↑,1|ĥ|↓,0⟩ carries (1−δ)/2 instead.
        assert!((h[[3, 0]] - 1.0 / 15.0f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn dense_matrix_is_symmetric_and_parity_block_diagonal() {
        let p = params(7.3, 2.1, -0.4);
        let space = HilbertSpace::new(40);
        let ham = ErmHamiltonian::new(p, space).unwrap();
        let h = ham.dense(2.1);
        let par = ham.parity_diag();
        for i in 0..space.dim() {
            for j in 0..space.dim() {
                assert_eq!(h[[i, j]], h[[j, i]]);
                if par[i] != par[j] {
                    // [ĥ, P̂] = 0 exactly: no matrix element may connect
                    // the sectors, truncated or not.
                    assert_eq!(h[[i, j]], 0.0);
                }
            }
        }
    }

    #[test]
    fn zero_coupling_spectrum_is_the_free_ladder() {
        let p = params(12.0, 0.0, 0.3);
        let space = HilbertSpace::new(9);
        let ham = ErmHamiltonian::new(p, space).unwrap();
        for parity in [Parity::Even, Parity::Odd] {
            let evs = ham.block(parity, 0.0).eigenvalues().unwrap();
            // Free energies ±1/2 + n/Δ with the spin fixed by parity.
            let mut expect: Vec<f64> = (0..=9)
                .map(|k| {
                    let s_up = match parity {
                        Parity::Even => k % 2 == 1,
                        Parity::Odd => k % 2 == 0,
                    };
                    (if s_up { 0.5 } else { -0.5 }) + k as f64 / 12.0
                })
                .collect();
            expect.sort_by(f64::total_cmp);
            for (a, b) in evs.iter().zip(&expect) {
                assert!((a - b).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn block_reduction_matches_dense_diagonalization() {
        // The central structural claim: the two tridiagonal parity blocks
        // carry exactly the dense spectrum.
        let p = params(15.0, 4.0, 0.5);
        let space = HilbertSpace::new(14);
        let ham = ErmHamiltonian::new(p, space).unwrap();
        let (dense_evs, _) = eigh_small(&ham.dense(4.0));
        let mut block_evs = ham.block(Parity::Even, 4.0).eigenvalues().unwrap();
        block_evs.extend(ham.block(Parity::Odd, 4.0).eigenvalues().unwrap());
        block_evs.sort_by(f64::total_cmp);
        assert_eq!(dense_evs.len(), block_evs.len());
        let scale = dense_evs.iter().fold(1.0f64, |m, e| m.max(e.abs()));
        for (a, b) in dense_evs.iter().zip(&block_evs) {
            assert!((a - b).abs() < 1e-11 * scale, "{} vs {}", a, b);
        }
    }

    #[test]
    fn coupling_enters_linearly() {
        let p = params(9.0, 1.0, 0.25);
        let space = HilbertSpace::new(11);
        let ham = ErmHamiltonian::new(p, space).unwrap();
        let h0 = ham.dense(0.0);
        let h1 = ham.dense(1.0);
        let h3 = ham.dense(3.0);
        let recombined = &h0 + &(&h1 - &h0) * 3.0;
        for (a, b) in h3.iter().zip(recombined.iter()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn interleaved_matvec_agrees_with_dense() {
        let p = params(6.5, 1.7, 0.6);
        let space = HilbertSpace::new(13);
        let ham = ErmHamiltonian::new(p, space).unwrap();
        let dim = space.dim();
        let x: Vec<C64> =
            (0..dim).map(|i| C64::new((i as f64 * 0.7).sin(), (i as f64 * 1.3).cos())).collect();
        // Dense product in public order.
        let h = ham.dense(1.7);
        let mut y_dense = vec![C64::new(0.0, 0.0); dim];
        for i in 0..dim {
            for j in 0..dim {
                y_dense[i] += x[j] * h[[i, j]];
            }
        }
        // Interleaved product mapped back.
        let xf = interleave(space, &x);
        let mut yf = vec![C64::new(0.0, 0.0); dim];
        ham.matvec_interleaved(1.7, &xf, &mut yf, dim);
        for j in 0..dim {
            let i = space.public_from_interleaved(j);
            assert!((yf[j] - y_dense[i]).norm() < 1e-13);
        }
        // Mean energy agrees with the quadratic form of the dense matrix.
        let num: C64 = x
            .iter()
            .enumerate()
            .map(|(i, xi)| xi.conj() * y_dense[i])
            .sum();
        let den: f64 = x.iter().map(|xi| xi.norm_sqr()).sum();
        let direct = num.re / den;
        let viaf = ham.mean_energy_interleaved(1.7, &xf, dim);
        assert!((direct - viaf).abs() < 1e-12);
    }

    #[test]
    fn spectral_bound_dominates_the_spectrum() {
        let p = params(15.0, 4.0, 0.5);
        let space = HilbertSpace::new(60);
        let ham = ErmHamiltonian::new(p, space).unwrap();
        for lam in [0.0, 1.0, 4.0] {
            let mut evs = ham.block(Parity::Even, lam).eigenvalues().unwrap();
            evs.extend(ham.block(Parity::Odd, lam).eigenvalues().unwrap());
            let radius = evs.iter().fold(0.0f64, |m, e| m.max(e.abs()));
            assert!(ham.spectral_bound(lam, space.dim()) >= radius);
        }
        // Restricted windows bound the restricted operator.
        let sub = ham.block(Parity::Even, 4.0);
        let evs = SymTridiag::new(sub.diag[..10].to_vec(), sub.offd[..9].to_vec())
            .eigenvalues()
            .unwrap();
        let radius = evs.iter().fold(0.0f64, |m, e| m.max(e.abs()));
        assert!(ham.spectral_bound(4.0, 20) >= radius);
    }

    #[test]
    fn block_off_diagonals_select_the_right_coupling() {
        // Even block starts (↓,0)→(↑,1): the co-rotating-with-â† channel
        // (1−δ)/2; odd block starts (↑,0)→(↓,1): the (1+δ)/2 channel.
        let p = params(16.0, 2.0, 0.5);
        let space = HilbertSpace::new(5);
        let ham = ErmHamiltonian::new(p, space).unwrap();
        let even = ham.block(Parity::Even, 2.0);
        let odd = ham.block(Parity::Odd, 2.0);
        let gp = 2.0 * 0.75 / 4.0;
        let gm = 2.0 * 0.25 / 4.0;
        assert!((even.offd[0] - gm).abs() < 1e-15);
        assert!((even.offd[1] - gp * 2.0f64.sqrt()).abs() < 1e-15);
        assert!((odd.offd[0] - gp).abs() < 1e-15);
        assert!((odd.offd[1] - gm * 2.0f64.sqrt()).abs() < 1e-15);
        // Diagonals carry the alternating spin plus the ladder.
        assert!((even.diag[0] - (-0.5)).abs() < 1e-15);
        assert!((even.diag[1] - (0.5 + 1.0 / 16.0)).abs() < 1e-15);
        assert!((odd.diag[0] - 0.5).abs() < 1e-15);
        assert!((odd.diag[1] - (-0.5 + 1.0 / 16.0)).abs() < 1e-15);
    }
}
