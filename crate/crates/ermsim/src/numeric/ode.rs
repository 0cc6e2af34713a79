//! Adaptive embedded Runge-Kutta integration for complex linear systems.
//!
//! The integrator is the Dormand-Prince 5(4) pair (FSAL, PI step control)
//! over state vectors of `Complex64`, with two features tailored to
//! wave-function propagation on a semi-infinite ladder basis:
//!
//! - **Stability cap.**  The right-hand side can advertise a bound on the
//!   spectral radius of its (anti-Hermitian) generator; the step size is
//!   then kept below the imaginary-axis stability extent of the method.
//!   Without the cap, modes with negligible amplitude but high frequency —
//!   always present near a basis cutoff — can push the controller into an
//!   accept/reject limit cycle or slow instability.
//!
//! - **Active window.**  For initially localized states only a prefix of
//!   the basis carries amplitude, and each step can spread support by at
//!   most `stages × bandwidth` components.  With `windowed` enabled, stage
//!   arithmetic runs on a sliding prefix `[0, nwork)` that is re-trimmed
//!   after every accepted step (components below `tail_cut · ‖y‖²` are
//!   zeroed).  This is exact to the trim threshold and reduces the cost of
//!   a propagation from `O(n)` to `O(support)` per step.
//!
//! There is no built-in renormalization: for unitary problems the norm
//! drift over a propagation is a direct certificate of integration
//! accuracy, and for dissipative (non-Hermitian) problems the norm decay is
//! physical signal.  Drivers that need norm bookkeeping read it from the
//! state between steps.

use crate::C64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OdeError {
    /// Returned when the controller drives the step size below the
    /// resolvable limit, which signals an inconsistent problem (NaN inputs,
    /// vanishing tolerances, discontinuous right-hand side).
    #[error("step size underflow at t = {0}: h = {1:e}")]
    StepUnderflow(f64, f64),

    /// Returned when the step budget is exhausted before the target time.
    #[error("exceeded {0} steps before reaching the target time")]
    MaxSteps(u64),

    /// Returned when the error estimate is repeatedly non-finite.
    #[error("non-finite error estimate at t = {0}; the state has left f64 range")]
    NonFinite(f64),
}
use OdeError::*;

pub type OdeResult<T> = Result<T, OdeError>;

/// Right-hand side of `y' = f(t, y)`.
pub trait OdeRhs {
    /// Write `f(t, y)` into `dy`.  Both slices have the integrator's
    /// current working span; `y` entries beyond the active state are zero,
    /// and `dy` must be written in full.
    fn eval(&mut self, t: f64, y: &[C64], dy: &mut [C64]);

    /// Upper bound on the spectral radius of the generator restricted to
    /// the first `nwork` components at time `t`; `INFINITY` disables the
    /// stability cap.
    fn spectral_bound(&self, _t: f64, _nwork: usize) -> f64 {
        f64::INFINITY
    }
}

/// Integration controls.
#[derive(Clone, Copy, Debug)]
pub struct OdeOptions {
    /// Relative tolerance per component.
    pub rtol: f64,
    /// Absolute tolerance per component.
    pub atol: f64,
    /// Initial step size; chosen automatically when `None`.
    pub h0: Option<f64>,
    /// Hard cap on total accepted + rejected steps per `advance_to` call.
    pub max_steps: u64,
    /// Maintain an active prefix window (see module docs).
    pub windowed: bool,
    /// Working-span margin beyond the active prefix, in components; must be
    /// at least `stages × bandwidth` of the right-hand side.
    pub window_grow: usize,
    /// Window lengths are rounded up to a multiple of this.
    pub window_granularity: usize,
    /// Trim threshold: components with `|y_i|² ≤ tail_cut · ‖y‖²` are
    /// treated as empty.
    pub tail_cut: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-12,
            h0: None,
            max_steps: 200_000_000,
            windowed: false,
            window_grow: 16,
            window_granularity: 2,
            tail_cut: 1e-28,
        }
    }
}

/// Information handed to the step observer after every accepted step.
#[derive(Clone, Copy, Debug)]
pub struct StepInfo {
    /// Time before the step.
    pub t_prev: f64,
    /// Time after the step.
    pub t: f64,
    /// Active prefix length after the step.
    pub nact: usize,
}

/// Observer verdict after an accepted step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepOutcome {
    Continue,
    /// Stop integrating; `advance_to` returns `Advance::Halted`.
    Halt,
}

/// How an `advance_to` call ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Advance {
    /// The target time was reached.
    Reached,
    /// The observer requested a halt.
    Halted,
}

// Dormand-Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// b - b̂ (5th-order value minus 4th-order embedded value).
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// Imaginary-axis stability extent of the pair, with margin.
const STAB_EXTENT: f64 = 2.8;

/// Adaptive Dormand-Prince 5(4) integrator.
pub struct AdaptiveRk<R: OdeRhs> {
    pub rhs: R,
    t: f64,
    y: Vec<C64>,
    nact: usize,
    t_prev: f64,
    y_prev: Vec<C64>,
    nact_prev: usize,
    /// Components of `y_prev` that may be nonzero (stale-tail bookkeeping).
    prev_extent: usize,
    h: f64,
    err_prev: f64,
    k: [Vec<C64>; 7],
    ytmp: Vec<C64>,
    fsal_extent: usize,
    fsal_valid: bool,
    opts: OdeOptions,
    /// Accepted steps so far (across all calls).
    pub naccepted: u64,
    /// Rejected steps so far (across all calls).
    pub nrejected: u64,
}

impl<R: OdeRhs> AdaptiveRk<R> {
    pub fn new(rhs: R, t0: f64, y0: Vec<C64>, opts: OdeOptions) -> Self {
        let n = y0.len();
        let nact = if opts.windowed { active_prefix(&y0, opts.tail_cut, opts.window_granularity) } else { n };
        Self {
            rhs,
            t: t0,
            y_prev: y0.clone(),
            y: y0,
            nact,
            t_prev: t0,
            nact_prev: nact,
            prev_extent: n,
            h: opts.h0.unwrap_or(0.0),
            err_prev: 1e-2,
            k: std::array::from_fn(|_| vec![C64::default(); n]),
            ytmp: vec![C64::default(); n],
            fsal_extent: 0,
            fsal_valid: false,
            opts,
            naccepted: 0,
            nrejected: 0,
        }
    }

    pub fn t(&self) -> f64 { self.t }
    pub fn y(&self) -> &[C64] { &self.y }
    pub fn nact(&self) -> usize { self.nact }

    /// State before the most recent accepted step.
    pub fn prev(&self) -> (f64, &[C64]) { (self.t_prev, &self.y_prev) }

    /// Squared norm of the current state (active window only; exact, since
    /// everything outside the window is zero).
    pub fn norm2(&self) -> f64 {
        self.y[..self.nact].iter().map(|c| c.norm_sqr()).sum()
    }

    /// Replace the state (after a quantum jump, for example).  Keeps the
    /// step-size history but forgets the FSAL stage.
    pub fn set_state(&mut self, t: f64, y: &[C64]) {
        if y.len() != self.y.len() {
            panic!("AdaptiveRk::set_state: dimension mismatch");
        }
        self.y.copy_from_slice(y);
        self.t = t;
        self.nact = if self.opts.windowed {
            active_prefix(&self.y, self.opts.tail_cut, self.opts.window_granularity)
        } else {
            self.y.len()
        };
        for c in self.y[self.nact..].iter_mut() { *c = C64::default(); }
        self.t_prev = t;
        self.y_prev.copy_from_slice(&self.y);
        self.nact_prev = self.nact;
        self.prev_extent = self.y.len();
        self.fsal_valid = false;
    }

    /// Advance to `t_target`, hitting it exactly, calling `observer` after
    /// every accepted step.
    pub fn advance_to<F>(&mut self, t_target: f64, mut observer: F) -> OdeResult<Advance>
    where
        F: FnMut(StepInfo, &[C64]) -> StepOutcome,
    {
        if t_target < self.t {
            panic!("AdaptiveRk::advance_to: target {} precedes current time {}", t_target, self.t);
        }
        let n = self.y.len();
        let mut steps: u64 = 0;
        let mut nonfinite_streak = 0u32;
        while self.t < t_target {
            // Snap across a remainder too small to resolve.
            let remaining = t_target - self.t;
            if remaining <= 16.0 * f64::EPSILON * self.t.abs().max(1.0) {
                self.t = t_target;
                break;
            }
            steps += 1;
            if steps > self.opts.max_steps {
                return Err(MaxSteps(self.opts.max_steps));
            }
            let nwork = if self.opts.windowed {
                round_up(self.nact + self.opts.window_grow, self.opts.window_granularity).min(n)
            } else {
                n
            };
            if self.h == 0.0 {
                self.h = self.initial_step(nwork);
            }
            // Stability cap, then force-hit the target.
            let bound = self.rhs.spectral_bound(self.t, nwork);
            let hstab = if bound.is_finite() && bound > 0.0 { STAB_EXTENT / bound } else { f64::INFINITY };
            let h_free = self.h.min(hstab);
            let hit = self.t + h_free >= t_target;
            let h_used = if hit { remaining } else { h_free };
            if !hit && h_used < 16.0 * f64::EPSILON * self.t.abs().max(1.0) {
                return Err(StepUnderflow(self.t, h_used));
            }

            let err = self.try_step(h_used, nwork);
            if !err.is_finite() {
                nonfinite_streak += 1;
                if nonfinite_streak > 30 {
                    return Err(NonFinite(self.t));
                }
                self.h = h_used * 0.25;
                self.nrejected += 1;
                continue;
            }
            nonfinite_streak = 0;
            if err <= 1.0 {
                // Accept: rotate state buffers, trim the window, refresh the
                // FSAL stage, grow the proposal.
                self.naccepted += 1;
                self.t_prev = self.t;
                std::mem::swap(&mut self.y, &mut self.ytmp);
                // y_prev ← the state before this step (now in ytmp),
                // clearing any stale tail left by an earlier, wider step.
                if self.prev_extent > nwork {
                    for c in self.y_prev[nwork..self.prev_extent].iter_mut() {
                        *c = C64::default();
                    }
                }
                self.y_prev[..nwork].copy_from_slice(&self.ytmp[..nwork]);
                self.prev_extent = nwork;
                self.nact_prev = self.nact;
                self.t = if hit { t_target } else { self.t + h_used };
                if self.opts.windowed {
                    let newact = active_prefix(&self.y[..nwork], self.opts.tail_cut, self.opts.window_granularity);
                    for c in self.y[newact..nwork].iter_mut() { *c = C64::default(); }
                    self.nact = newact;
                } else {
                    self.nact = n;
                }
                // FSAL: stage 7 is f at the accepted point.
                self.k.swap(0, 6);
                self.fsal_extent = nwork;
                self.fsal_valid = true;
                let fac = 0.9 * err.max(1e-10).powf(-0.7 / 5.0) * self.err_prev.powf(0.4 / 5.0);
                let fac = fac.clamp(0.2, 5.0);
                self.err_prev = err.max(1e-10);
                let h_next = h_used * fac;
                self.h = if hit { self.h.max(h_next) } else { h_next };
                let info = StepInfo { t_prev: self.t_prev, t: self.t, nact: self.nact };
                if observer(info, &self.y) == StepOutcome::Halt {
                    return Ok(Advance::Halted);
                }
            } else {
                self.nrejected += 1;
                let fac = (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
                self.h = h_used * fac;
            }
        }
        Ok(Advance::Reached)
    }

    /// One fixed Dormand-Prince step of size `dt` from the pre-step state
    /// `(t_prev, y_prev)`, written into `out` (resized to the system
    /// dimension); returns the embedded error estimate.
    ///
    /// Used by root-finding drivers to probe inside the last accepted step;
    /// `dt` must not exceed that step's span, so the embedded error bound of
    /// the accepted step applies.  Scratch reuse invalidates the FSAL stage.
    pub fn probe_from_prev(&mut self, dt: f64, out: &mut Vec<C64>) -> f64 {
        let n = self.y.len();
        out.clear();
        out.resize(n, C64::default());
        let nwork = if self.opts.windowed {
            round_up(self.nact_prev + self.opts.window_grow, self.opts.window_granularity).min(n)
        } else {
            n
        };
        self.fsal_valid = false;
        std::mem::swap(&mut self.y, &mut self.y_prev);
        std::mem::swap(&mut self.t, &mut self.t_prev);
        let err = self.try_step(dt, nwork);
        std::mem::swap(&mut self.y, &mut self.y_prev);
        std::mem::swap(&mut self.t, &mut self.t_prev);
        out[..nwork].copy_from_slice(&self.ytmp[..nwork]);
        err
    }

    /// Attempt a step of size `h` from `(self.t, self.y)` over span `nwork`;
    /// the candidate state lands in `self.ytmp` and the scaled error
    /// estimate is returned.
    fn try_step(&mut self, h: f64, nwork: usize) -> f64 {
        let t = self.t;
        // Stage 1 (FSAL when available and wide enough).
        if !(self.fsal_valid && self.fsal_extent >= nwork) {
            let (k1, y) = (&mut self.k[0], &self.y);
            self.rhs.eval(t, &y[..nwork], &mut k1[..nwork]);
        }
        let w = nwork;
        {
            let (y, ytmp, k) = (&self.y, &mut self.ytmp, &self.k);
            for i in 0..w {
                ytmp[i] = y[i] + h * (A21 * k[0][i]);
            }
        }
        self.stage(1, t + C2 * h, w);
        {
            let (y, ytmp, k) = (&self.y, &mut self.ytmp, &self.k);
            for i in 0..w {
                ytmp[i] = y[i] + h * (A31 * k[0][i] + A32 * k[1][i]);
            }
        }
        self.stage(2, t + C3 * h, w);
        {
            let (y, ytmp, k) = (&self.y, &mut self.ytmp, &self.k);
            for i in 0..w {
                ytmp[i] = y[i] + h * (A41 * k[0][i] + A42 * k[1][i] + A43 * k[2][i]);
            }
        }
        self.stage(3, t + C4 * h, w);
        {
            let (y, ytmp, k) = (&self.y, &mut self.ytmp, &self.k);
            for i in 0..w {
                ytmp[i] = y[i] + h * (A51 * k[0][i] + A52 * k[1][i] + A53 * k[2][i] + A54 * k[3][i]);
            }
        }
        self.stage(4, t + C5 * h, w);
        {
            let (y, ytmp, k) = (&self.y, &mut self.ytmp, &self.k);
            for i in 0..w {
                ytmp[i] = y[i]
                    + h * (A61 * k[0][i] + A62 * k[1][i] + A63 * k[2][i] + A64 * k[3][i] + A65 * k[4][i]);
            }
        }
        self.stage(5, t + h, w);
        // 5th-order solution (b-row doubles as the a7 row).
        {
            let (y, ytmp, k) = (&self.y, &mut self.ytmp, &self.k);
            for i in 0..w {
                ytmp[i] = y[i]
                    + h * (B1 * k[0][i] + B3 * k[2][i] + B4 * k[3][i] + B5 * k[4][i] + B6 * k[5][i]);
            }
        }
        self.stage(6, t + h, w);
        // Scaled RMS error over the working span.
        let (y, ytmp, k) = (&self.y, &self.ytmp, &self.k);
        let atol = self.opts.atol;
        let rtol = self.opts.rtol;
        let mut acc = 0.0;
        for i in 0..w {
            let e = E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i]
                + E7 * k[6][i];
            let scale = atol + rtol * y[i].norm().max(ytmp[i].norm());
            let r = h * e.norm() / scale;
            acc += r * r;
        }
        (acc / w.max(1) as f64).sqrt()
    }

    /// Evaluate stage `s` at time `ts` from the prepared `ytmp`.
    fn stage(&mut self, s: usize, ts: f64, w: usize) {
        let (k, ytmp) = (&mut self.k[s], &self.ytmp);
        self.rhs.eval(ts, &ytmp[..w], &mut k[..w]);
    }

    /// Conservative automatic initial step.
    fn initial_step(&mut self, nwork: usize) -> f64 {
        // Scale from the first derivative: h₀ such that the first Euler
        // increment is a small fraction of the state scale.
        let (k1, y) = (&mut self.k[0], &self.y);
        self.rhs.eval(self.t, &y[..nwork], &mut k1[..nwork]);
        let ynorm = self.y[..nwork].iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let dnorm = self.k[0][..nwork].iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let h = if dnorm > 0.0 { 1e-3 * ynorm.max(self.opts.atol) / dnorm } else { 1e-6 };
        let bound = self.rhs.spectral_bound(self.t, nwork);
        if bound.is_finite() && bound > 0.0 {
            h.min(0.1 * STAB_EXTENT / bound)
        } else {
            h
        }
    }
}

/// Smallest prefix containing all components above the trim threshold,
/// rounded up to `granularity` (at least one granule).
fn active_prefix(y: &[C64], tail_cut: f64, granularity: usize) -> usize {
    let norm2: f64 = y.iter().map(|c| c.norm_sqr()).sum();
    let cut = tail_cut * norm2;
    let mut last = 0;
    for (i, c) in y.iter().enumerate() {
        if c.norm_sqr() > cut {
            last = i + 1;
        }
    }
    round_up(last.max(1), granularity).min(y.len())
}

fn round_up(x: usize, g: usize) -> usize {
    if g <= 1 { x } else { x.div_ceil(g) * g }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// y' = c·y with constant complex c.
    struct Linear(C64);
    impl OdeRhs for Linear {
        fn eval(&mut self, _t: f64, y: &[C64], dy: &mut [C64]) {
            for (d, s) in dy.iter_mut().zip(y) { *d = self.0 * s; }
        }
    }

    /// y' = i·t·y  ⇒  y(t) = y(0)·exp(i t²/2).
    struct Chirp;
    impl OdeRhs for Chirp {
        fn eval(&mut self, t: f64, y: &[C64], dy: &mut [C64]) {
            let c = C64::new(0.0, t);
            for (d, s) in dy.iter_mut().zip(y) { *d = c * s; }
        }
    }

    /// Nearest-neighbor hopping chain, y'_j = -i (y_{j-1} + y_{j+1}).
    struct Hopping;
    impl OdeRhs for Hopping {
        fn eval(&mut self, _t: f64, y: &[C64], dy: &mut [C64]) {
            let n = y.len();
            let mi = C64::new(0.0, -1.0);
            for j in 0..n {
                let mut acc = C64::default();
                if j > 0 { acc += y[j - 1]; }
                if j + 1 < n { acc += y[j + 1]; }
                dy[j] = mi * acc;
            }
        }
        fn spectral_bound(&self, _t: f64, _nwork: usize) -> f64 { 2.0 }
    }

    fn drive<R: OdeRhs>(rhs: R, y0: Vec<C64>, t1: f64, opts: OdeOptions) -> Vec<C64> {
        let mut rk = AdaptiveRk::new(rhs, 0.0, y0, opts);
        rk.advance_to(t1, |_, _| StepOutcome::Continue).unwrap();
        rk.y().to_vec()
    }

    #[test]
    fn exponential_decay_matches_closed_form() {
        let opts = OdeOptions { rtol: 1e-10, atol: 1e-14, ..Default::default() };
        let y = drive(Linear(C64::new(-1.0, 0.0)), vec![C64::new(1.0, 0.0)], 1.0, opts);
        assert!((y[0].re - (-1.0_f64).exp()).abs() < 1e-10);
        assert!(y[0].im.abs() < 1e-12);
    }

    #[test]
    fn oscillator_phase_and_norm() {
        let opts = OdeOptions { rtol: 1e-11, atol: 1e-14, ..Default::default() };
        let w = 3.0;
        let y = drive(Linear(C64::new(0.0, w)), vec![C64::new(1.0, 0.0)], 10.0, opts);
        let expect = C64::new(0.0, w * 10.0).exp();
        assert!((y[0] - expect).norm() < 1e-8);
        assert!((y[0].norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn nonautonomous_chirp() {
        let opts = OdeOptions { rtol: 1e-11, atol: 1e-14, ..Default::default() };
        let y = drive(Chirp, vec![C64::new(1.0, 0.0)], 3.0, opts);
        let expect = C64::new(0.0, 4.5).exp();
        assert!((y[0] - expect).norm() < 1e-8);
    }

    #[test]
    fn hits_sample_times_exactly() {
        let mut rk = AdaptiveRk::new(
            Linear(C64::new(0.0, 1.0)),
            0.0,
            vec![C64::new(1.0, 0.0)],
            OdeOptions::default(),
        );
        for i in 1..=7 {
            let target = 0.3 * i as f64;
            rk.advance_to(target, |_, _| StepOutcome::Continue).unwrap();
            assert_eq!(rk.t(), target);
        }
        assert!((rk.y()[0] - C64::new(0.0, 2.1).exp()).norm() < 1e-8);
    }

    #[test]
    fn windowed_agrees_with_full_and_stays_narrow() {
        let n = 400;
        let mut y0 = vec![C64::default(); n];
        y0[0] = C64::new(1.0, 0.0);
        let t1 = 10.0;
        let strict = OdeOptions { rtol: 1e-11, atol: 1e-14, ..Default::default() };
        let full = drive(Hopping, y0.clone(), t1, strict);
        let wopts = OdeOptions { windowed: true, window_grow: 16, ..strict };
        let mut rk = AdaptiveRk::new(Hopping, 0.0, y0, wopts);
        let mut max_nact = 0;
        rk.advance_to(t1, |info, _| {
            max_nact = max_nact.max(info.nact);
            StepOutcome::Continue
        }).unwrap();
        // The light cone travels at speed 2, so support stays well inside n.
        assert!(max_nact < 120, "window grew to {}", max_nact);
        let diff: f64 = full.iter()
            .zip(rk.y())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(diff < 1e-9, "windowed/full disagreement: {:e}", diff);
        assert!((rk.norm2() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn observer_can_halt_and_probe_reproduces_the_step() {
        let mut rk = AdaptiveRk::new(
            Linear(C64::new(-0.5, 2.0)),
            0.0,
            vec![C64::new(1.0, 0.0)],
            OdeOptions::default(),
        );
        let outcome = rk.advance_to(5.0, |info, _| {
            if info.t > 1.0 { StepOutcome::Halt } else { StepOutcome::Continue }
        }).unwrap();
        assert_eq!(outcome, Advance::Halted);
        assert!(rk.t() > 1.0 && rk.t() < 5.0);
        // Probing the full span of the last step must land on the current state.
        let (t_prev, _) = rk.prev();
        let dt = rk.t() - t_prev;
        let mut out = Vec::new();
        rk.probe_from_prev(dt, &mut out);
        assert!((out[0] - rk.y()[0]).norm() < 1e-10);
        // Probing half the span lands between the endpoints.
        rk.probe_from_prev(0.5 * dt, &mut out);
        let expect = C64::new(-0.5, 2.0) * C64::new(t_prev + 0.5 * dt, 0.0);
        let expect = expect.exp();
        assert!((out[0] - expect).norm() < 1e-9);
    }

    #[test]
    fn rejects_do_not_lose_state_consistency() {
        // Start with an absurdly large h0 to force rejections.
        let opts = OdeOptions { h0: Some(100.0), rtol: 1e-10, atol: 1e-14, ..Default::default() };
        let mut rk = AdaptiveRk::new(Linear(C64::new(0.0, 5.0)), 0.0, vec![C64::new(1.0, 0.0)], opts);
        rk.advance_to(2.0, |_, _| StepOutcome::Continue).unwrap();
        assert!(rk.nrejected > 0);
        assert!((rk.y()[0] - C64::new(0.0, 10.0).exp()).norm() < 1e-8);
    }
}
