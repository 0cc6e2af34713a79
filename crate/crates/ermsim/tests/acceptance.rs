//! End-to-end acceptance gates for the toolkit.
//!
//! Eight tests cover the pinned regression values: final-state
//! witnesses of unitary ramps, noisy trajectory-ensemble statistics,
//! the exactly solvable spectrum oracle, semiclassical phase-space
//! volumes, the emergent-state census, the ground-state occupation
//! law, the qualitative shape of duration scans in the three coupling
//! regimes, and a timed pass over the shared invariant checks.  Each
//! test prints one `acceptance k/8 …: PASS/FAIL` verdict line (visible
//! with `--nocapture`, or on failure) and then asserts it.
//!
//! Two long-running variants are gated behind the environment flag
//! `ERMSIM_ACCEPTANCE_FULL=1`: the table-size trajectory ensembles
//! (minutes instead of seconds per column) and the largest
//! emergent-census size, whose window holds ~10⁴ basis states.  The
//! default configuration runs the documented reduced versions with
//! correspondingly widened statistical bounds.

mod props;

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use ermsim::dynamics::{
    propagate_schrodinger, ramp_scan, RampProtocol, ScanAxis, Tolerances,
};
use ermsim::hamiltonian::ErmHamiltonian;
use ermsim::hilbert::{suggest_cutoff, HilbertSpace, QuantumState, Spin};
use ermsim::opensys::{
    build_dissipators, mcwf_evolve, mcwf_expectation, DissipatorSpec, McwfObservable, McwfOptions,
};
use ermsim::params::ModelParams;
use ermsim::semiclassics::{
    critical_set, jc_spectrum_analytic, phase_space_volumes, predict_emergent_counts,
};
use ermsim::spectrum::{diagonalize, EigRange};

/// Opt into the table-size ensembles and the largest census point.
fn full_mode() -> bool {
    std::env::var("ERMSIM_ACCEPTANCE_FULL").map(|v| v == "1").unwrap_or(false)
}

/// Print the per-criterion verdict line, then enforce it.
fn verdict(k: usize, name: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("acceptance {k}/8 {name}: {tag} — {detail}");
    assert!(pass, "acceptance {k}/8 {name}: {detail}");
}

/// 1: deterministic ramps from the vacuum at Δ=15.4, λ_f=4, δ=0.5 hit
/// the pinned final-state witnesses to three significant figures.
#[test]
fn linear_ramp_witnesses_match_pinned_values() {
    // (τ_f/π, vacuum survival, ⟨n̂⟩, ⟨Ĵz⟩) with half-ulp-of-last-digit
    // tolerances on the three-figure pins.
    const PINS: [(f64, f64, f64, f64); 3] = [
        (10.0, 0.704, 2.54, -0.4095),
        (20.0, 0.485, 16.7, -0.3079),
        (50.0, 0.207, 62.5, -0.1302),
    ];
    const TOL_P0: f64 = 5e-4;
    const TOL_N: [f64; 3] = [5e-3, 5e-2, 5e-2];
    const TOL_JZ: f64 = 5e-4;

    let model = ModelParams::new(15.4, 4.0, 0.5).expect("ramp witnesses: params");
    let space = HilbertSpace::new(suggest_cutoff(15.4, 4.0));
    let tol = Tolerances::default();
    let mut pass = true;
    let mut detail = String::new();
    for (i, &(tau_over_pi, p0_pin, n_pin, jz_pin)) in PINS.iter().enumerate() {
        let protocol =
            RampProtocol::new(model, tau_over_pi * PI).expect("ramp witnesses: protocol");
        let out = propagate_schrodinger(&QuantumState::vacuum(space), &protocol, &tol, 2)
            .expect("ramp witnesses: propagation");
        let psi = &out.final_state;
        let (p0, n, jz) = (psi.p_vacuum_down(), psi.n_mean(), psi.jz_mean());
        pass &= (p0 - p0_pin).abs() <= TOL_P0;
        pass &= (n - n_pin).abs() <= TOL_N[i];
        pass &= (jz - jz_pin).abs() <= TOL_JZ;
        pass &= out.stats.max_tail_mass <= tol.tail_threshold;
        detail.push_str(&format!(
            "τ_f={tau_over_pi}π: p0={p0:.4} n={n:.3} jz={jz:.4}; "
        ));
    }
    verdict(1, "linear-ramp witnesses", pass, detail.trim_end_matches("; "));
}

/// 2: noisy trajectory ensembles (trap heating, motional and qubit
/// dephasing at the published rates) reproduce the pinned open-system
/// means within three standard errors and the √N-scaled relative-error
/// prefactors within 15%.  The pinned means are themselves finite-N
/// estimates, so the 3σ band applies to the *difference* of the two
/// independent estimates: σ² = σ_pin² + sem_run².  Default ensembles
/// are 10× reduced (their own sem then widens the band) with a
/// sampling-noise allowance on the prefactors.
#[test]
fn trajectory_ensembles_match_pinned_statistics() {
    const COLUMNS: [(f64, usize); 3] = [(10.0, 50_000), (20.0, 25_000), (50.0, 2_500)];
    // Rows per column: (ensemble mean, quoted sem, √N-scaled relative
    // error) for the vacuum survival, ⟨n̂⟩, and ⟨Ĵz⟩ in that order.
    const PINS: [[(f64, f64, f64); 3]; 3] = [
        [(0.703, 0.001, 0.312), (2.47, 0.01, 1.30), (-0.4057, 0.0005, 0.254)],
        [(0.478, 0.002, 0.803), (15.5, 0.1, 1.36), (-0.301, 0.001, 0.684)],
        [(0.211, 0.008, 1.84), (60.1, 0.9, 0.753), (-0.122, 0.004, 1.70)],
    ];
    const OBS: [McwfObservable; 3] =
        [McwfObservable::Vacuum, McwfObservable::NMean, McwfObservable::JzMean];

    let full = full_mode();
    let mut model = ModelParams::new(15.4, 4.0, 0.5).expect("ensemble statistics: params");
    model.energy_scale = Some(2.0 * PI * 980.0);
    let spec = DissipatorSpec::from_rates(10.0, 100.0, 3.3);
    let noise = build_dissipators(&spec, &model).expect("ensemble statistics: dissipators");
    let space = HilbertSpace::new(suggest_cutoff(15.4, 4.0));
    let opts = McwfOptions { samples: 2, ..McwfOptions::default() };

    let mut pass = true;
    let mut detail = String::from(if full { "full ensembles: " } else { "reduced ensembles: " });
    for (c, &(tau_over_pi, n_full)) in COLUMNS.iter().enumerate() {
        let n_run = if full { n_full } else { n_full / 10 };
        let protocol =
            RampProtocol::new(model, tau_over_pi * PI).expect("ensemble statistics: protocol");
        let ens = mcwf_evolve(&QuantumState::vacuum(space), &protocol, &noise, n_run, 1, &opts)
            .expect("ensemble statistics: ensemble");
        detail.push_str(&format!("τ_f={tau_over_pi}π N={n_run}:"));
        for (k, obs) in OBS.into_iter().enumerate() {
            let (mean_pin, sem_pin, pref_pin) = PINS[c][k];
            let r = mcwf_expectation(&ens, obs);
            // The quoted error and the √N-scaled prefactor encode the
            // same spread at different roundings; take the looser one.
            let sigma_pin = sem_pin.max(pref_pin * mean_pin.abs() / (n_full as f64).sqrt());
            let bound = 3.0 * (sigma_pin.powi(2) + r.sem.powi(2)).sqrt();
            let mean_ok = (r.mean - mean_pin).abs() <= bound;
            let pref = r.mre * (n_run as f64).sqrt();
            let pref_tol = if full { 0.15 } else { 0.15 + 3.0 / (2.0 * n_run as f64).sqrt() };
            let pref_ok = (pref - pref_pin).abs() <= pref_tol * pref_pin;
            pass &= mean_ok && pref_ok;
            detail.push_str(&format!(" {:.4}±{:.4}", r.mean, r.sem));
            if !mean_ok || !pref_ok {
                detail.push_str(&format!(
                    " [pin {mean_pin}±{bound:.4}, prefactor {pref:.3} vs {pref_pin}]"
                ));
            }
        }
        detail.push_str("; ");
    }
    verdict(2, "trajectory-ensemble statistics", pass, detail.trim_end_matches("; "));
}

/// 3: at δ=±1 the model is exactly solvable; the lowest 50 numerical
/// levels must match the closed-form spectrum to 1e−9 at cutoff 400.
#[test]
fn exactly_solvable_limits_match_analytic_spectrum() {
    const CUTOFF: usize = 400;
    const BOUND: f64 = 1e-9;
    let space = HilbertSpace::new(CUTOFF);
    let mut worst = 0.0_f64;
    let mut pass = true;
    for sign in [1i8, -1i8] {
        for coupling in [0.5, 2.0, 4.0] {
            let model = ModelParams::new(15.0, coupling, sign as f64)
                .expect("solvable limits: params");
            let ham = ErmHamiltonian::new(model, space).expect("solvable limits: hamiltonian");
            let spec = diagonalize(&ham, EigRange::Lowest(50), false)
                .expect("solvable limits: diagonalize");
            let exact = jc_spectrum_analytic(15.0, coupling, sign, CUTOFF);
            let dev = spec
                .energies
                .iter()
                .zip(exact.iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0_f64, f64::max);
            worst = worst.max(dev);
            pass &= dev <= BOUND;
        }
    }
    verdict(
        3,
        "exactly-solvable spectrum oracle",
        pass,
        &format!("max |deviation| = {worst:.2e} over 6 parameter sets (bound {BOUND:.0e})"),
    );
}

/// 4: the island and shell phase-space volumes at (λ=4, δ=0.5) match
/// their pinned values to ±0.001.
#[test]
fn phase_space_volumes_match_pinned_values() {
    let v = phase_space_volumes(4.0, 0.5).expect("phase-space volumes");
    let v_minus = v.v_minus / (2.0 * PI);
    let v_plus = v.v_plus / (2.0 * PI);
    let pass = (v_minus - 0.210).abs() <= 0.001 && (v_plus - 1.335).abs() <= 0.001;
    verdict(
        4,
        "phase-space volumes",
        pass,
        &format!("v⁻/2π = {v_minus:.6} (pin 0.210±0.001), v⁺/2π = {v_plus:.6} (pin 1.335±0.001)"),
    );
}

/// Occupation census between the critical energies at (λ=4, δ=0.5):
/// diagonalize the window and count levels with ⟨n̂⟩/Δ below the
/// saddle-momentum threshold.  The window reaches a tenth of the
/// characteristic energy above the upper critical energy because the
/// topmost well-bound level sits a finite-size offset above it and
/// still belongs to the count.  Returns (count, relative deviation
/// from the semiclassical volume prediction).
fn occupation_census(system_size: f64) -> (usize, f64) {
    let cs = critical_set(4.0, 0.5);
    let threshold = 0.5 * cs.p_c.expect("occupation census: p_c").powi(2);
    let model = ModelParams::new(system_size, 4.0, 0.5).expect("occupation census: params");
    let space = HilbertSpace::new(suggest_cutoff(system_size, 4.0));
    let ham = ErmHamiltonian::new(model, space).expect("occupation census: hamiltonian");
    let window = EigRange::Window {
        lo: cs.e_sad.expect("occupation census: e_sad"),
        hi: cs.e_vac + 0.1,
    };
    let spec = diagonalize(&ham, window, true).expect("occupation census: diagonalize");
    let count = (0..spec.energies.len())
        .filter(|&k| spec.n_mean(k).expect("occupation census: n_mean") / system_size < threshold)
        .count();
    let pred =
        predict_emergent_counts(4.0, 0.5, system_size).expect("occupation census: prediction");
    (count, (count as f64 - pred.n_e).abs() / pred.n_e)
}

/// 5: the counted emergent states deviate from the semiclassical
/// prediction v⁻Δ/2π by 4.8% ± 1.5 points at Δ=20, and the deviation
/// does not grow with Δ and has fallen by Δ=200.  The Δ=800 point
/// (≈0.6%) runs only in full mode: its window spans ~10⁴ levels.
#[test]
fn emergent_state_census_tracks_semiclassical_count() {
    let sizes: [f64; 4] = [20.0, 50.0, 100.0, 200.0];
    let mut devs = Vec::new();
    let mut detail = String::new();
    for &d in &sizes {
        let (count, dev) = occupation_census(d);
        detail.push_str(&format!("Δ={d}: {count} states, dev {:.3}%; ", 100.0 * dev));
        devs.push(dev);
    }
    let mut pass = (100.0 * devs[0] - 4.8).abs() <= 1.5;
    // The counts at small Δ can scale exactly with Δ, so successive
    // deviations may tie; require no growth and a net decrease.
    pass &= devs.windows(2).all(|w| w[1] <= w[0] + 1e-9);
    pass &= devs[3] < devs[0];
    if full_mode() {
        let (count, dev) = occupation_census(800.0);
        detail.push_str(&format!("Δ=800: {count} states, dev {:.3}%; ", 100.0 * dev));
        pass &= (100.0 * dev - 0.6).abs() <= 0.5;
    }
    verdict(5, "emergent-state census", pass, detail.trim_end_matches("; "));
}

/// 6: the superradiant ground state occupies the semiclassical well
/// minimum, ⟨n̂⟩_gs/Δ = x_c²/2, within 2% at Δ=15, λ=4.
#[test]
fn ground_state_occupation_locks_to_well_minimum() {
    let mut pass = true;
    let mut detail = String::new();
    for regime in [0.0, 0.5] {
        let model = ModelParams::new(15.0, 4.0, regime).expect("ground state: params");
        let space = HilbertSpace::new(suggest_cutoff(15.0, 4.0));
        let ham = ErmHamiltonian::new(model, space).expect("ground state: hamiltonian");
        let spec =
            diagonalize(&ham, EigRange::Lowest(1), true).expect("ground state: diagonalize");
        let cs = critical_set(4.0, regime);
        let lhs = spec.n_mean(0).expect("ground state: n_mean") / 15.0;
        let rhs = 0.5 * cs.x_c * cs.x_c;
        let rel = (lhs - rhs).abs() / rhs;
        pass &= rel <= 0.02;
        detail.push_str(&format!("δ={regime}: ⟨n̂⟩/Δ = {lhs:.5} vs x_c²/2 = {rhs:.5} ({:.4}%); ", 100.0 * rel));
    }
    verdict(6, "ground-state occupation", pass, detail.trim_end_matches("; "));
}

/// 7: the conditional vacuum fraction as a function of ramp duration
/// decays monotonically for δ=0, develops an interior local maximum
/// for δ=0.5, and stays pinned at one for δ=1 where the initial state
/// is an exact eigenstate.
#[test]
fn duration_scans_show_regime_dependent_structure() {
    let tol = Tolerances::default();
    let scan = |regime: f64, grid: &[f64]| {
        let model = ModelParams::new(15.4, 4.0, regime).expect("duration scans: params");
        let base = RampProtocol::new(model, 200.0 * PI).expect("duration scans: protocol");
        ramp_scan(&base, ScanAxis::Duration, grid, &tol).expect("duration scans: scan")
    };

    let coarse: Vec<f64> = (0..=20).map(|k| 10.0 * PI * k as f64).collect();
    let rows = scan(0.0, &coarse);
    let mono = rows.windows(2).all(|w| w[1].p0_tilde <= w[0].p0_tilde + 1e-4);
    let final0 = rows.last().expect("duration scans: empty scan").p0_tilde;
    let depleted = final0 < 0.01;

    // Fine sampling where the structure lives, then coarse to the end
    // of the stated range.
    let mut grid: Vec<f64> = (0..=30).map(|k| 2.0 * PI * k as f64).collect();
    grid.extend((7..=20).map(|k| 10.0 * PI * k as f64));
    let rows = scan(0.5, &grid);
    let p: Vec<f64> = rows.iter().map(|r| r.p0_tilde).collect();
    let hump = (1..p.len() - 1).any(|i| p[i] >= p[i - 1] + 1e-3 && p[i] >= p[i + 1] + 1e-3);

    let sparse: Vec<f64> = (0..=10).map(|k| 20.0 * PI * k as f64).collect();
    let rows = scan(1.0, &sparse);
    let flat = rows.iter().all(|r| (r.p0_tilde - 1.0).abs() <= 1e-9);

    let pass = mono && depleted && hump && flat;
    verdict(
        7,
        "duration-scan structure",
        pass,
        &format!(
            "δ=0 monotone decay: {mono} (final {final0:.4}); δ=0.5 interior maximum: {hump}; δ=1 pinned at 1: {flat}"
        ),
    );
}

/// 8: one representative call of every shared invariant check — parity
/// structure, unitary-ramp conservation, strength-function sum rules,
/// Wigner normalization, entropy bounds, the trajectory-vs-dense
/// oracle, and seed determinism — completes green in under two
/// minutes.  The randomized sweeps live in the `properties` target.
#[test]
fn invariant_checks_complete_quickly() {
    let start = Instant::now();
    let result = std::panic::catch_unwind(|| {
        props::check_parity_structure(
            ModelParams::new(9.0, 1.8, -0.37).expect("invariant checks: params"),
            70,
        );
        props::check_unitary_invariants(
            ModelParams::new(11.0, 1.4, 0.6).expect("invariant checks: params"),
            suggest_cutoff(11.0, 1.4),
            Spin::Up,
            2,
            7.0,
        );
        props::check_strength_sum_rules(
            ModelParams::new(8.0, 2.0, 0.5).expect("invariant checks: params"),
            suggest_cutoff(8.0, 2.0),
            Spin::Down,
            1,
        );
        props::check_wigner_normalization(
            ModelParams::new(8.0, 0.6, 0.25).expect("invariant checks: params"),
            44,
            2,
        );
        props::check_entropy_bounds(
            ModelParams::new(10.0, 2.2, -0.5).expect("invariant checks: params"),
            suggest_cutoff(10.0, 2.2),
            8,
        );
        props::check_mcwf_against_dense((60.0, 120.0, 45.0), 4.0, 300, 7);
        props::check_seed_determinism(48, 11);
    });
    let elapsed = start.elapsed();
    let quick = elapsed < Duration::from_secs(120);
    let pass = result.is_ok() && quick;
    let tag = if pass { "PASS" } else { "FAIL" };
    println!(
        "acceptance 8/8 invariant checks: {tag} — seven invariant families in {elapsed:.2?} (budget 120 s)"
    );
    if let Err(payload) = result {
        std::panic::resume_unwind(payload);
    }
    assert!(quick, "acceptance 8/8 invariant checks: exceeded 120 s ({elapsed:.2?})");
}
