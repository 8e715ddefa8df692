//! Acceptance gate: every release-blocking numerical guarantee of the
//! library, one test per guarantee, with the tolerances pinned in-line.
//!
//! Each closed-form route is checked against an independently built dense
//! reference (eigendecomposition / trace / quadrature), never against a
//! reshuffling of its own algebra.

use std::time::Instant;

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spinbath::ensemble::run_experiment;
use spinbath::measurement::{
    extract_axial_coefficients, gamma_general, gamma_pure, legendre_moment, legendre_moment_exact,
    oracle_gamma as dephasing_oracle_gamma,
};
use spinbath::quadrature::legendre_moment_quadrature;
use spinbath::sbs::{
    fidelity_short_time, fidelity_short_time_exact_info, gamma_short_time, macrofraction_fidelity,
    quantum_fisher_information, sbs_bound, sz_variance_thermal, total_decoherence_factor,
    EnvironmentSpec, MacrofractionLayout,
};
use spinbath::spin::build_spin_operators;
use spinbath::state::{
    spin_coherent_state, thermal_state, thermal_state_along_z, SpinState, SystemState,
};
use spinbath::thermal::{fidelity_thermal, gamma_thermal, oracle_fidelity, oracle_gamma};
use spinbath::{CoherentGammaParamsF64, ExperimentConfigF64, Spin, ThermalParamsF64};

/// Random single-spin thermal parameter draws: for each `2j = 1..=6`,
/// 100 samples of `βΩ ∈ [0.1, 3]`, `g/Ω ∈ [0, 10]`, `m, m' ∈ {-3/2, …, 3/2}`
/// (half-integer steps), `t ∈ [0, 10]`.
fn thermal_sweep() -> Vec<ThermalParamsF64> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut draws = Vec::with_capacity(600);
    for tj in 1..=6u32 {
        let spin = Spin::new(tj).unwrap();
        for _ in 0..100 {
            let b = rng.gen_range(0.1..=3.0);
            let g = rng.gen_range(0.0..=10.0);
            let m = 0.5 * rng.gen_range(-3..=3i32) as f64;
            let m_prime = 0.5 * rng.gen_range(-3..=3i32) as f64;
            let t = rng.gen_range(0.0..=10.0);
            draws.push(ThermalParamsF64::new(spin, b, g, m, m_prime, t).unwrap());
        }
    }
    draws
}

/// Closed-form thermal decoherence factor vs the dense propagator trace,
/// |γ_closed - γ_oracle| <= 1e-9 over the full random sweep, in under 10 s.
#[test]
fn thermal_gamma_closed_form_matches_dense_oracle() {
    let start = Instant::now();
    for p in &thermal_sweep() {
        let closed = gamma_thermal(p);
        let dense = oracle_gamma(p).unwrap();
        let diff = (closed - dense).norm();
        assert!(
            diff <= 1e-9,
            "gamma mismatch {diff:.3e} at 2j={}, b={}, g={}, m={}, m'={}, t={}",
            p.spin.twice_j(),
            p.beta_omega,
            p.g_over_omega,
            p.m,
            p.m_prime,
            p.t
        );
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "sweep took {elapsed:?}");
}

/// Closed-form thermal fidelity vs the dense Uhlmann trace norm,
/// |F_closed - F_oracle| <= 1e-9 over the same random sweep.
#[test]
fn thermal_fidelity_closed_form_matches_dense_oracle() {
    for p in &thermal_sweep() {
        let closed = fidelity_thermal(p).unwrap();
        let dense = oracle_fidelity(p).unwrap();
        let diff = (closed - dense).abs();
        assert!(
            diff <= 1e-9,
            "fidelity mismatch {diff:.3e} at 2j={}, b={}, g={}, m={}, m'={}, t={}",
            p.spin.twice_j(),
            p.beta_omega,
            p.g_over_omega,
            p.m,
            p.m_prime,
            p.t
        );
    }
}

/// Coherent-state decoherence factor: dense-trace agreement to 1e-11 over
/// 200 draws, the power law γ_j = (γ_{1/2})^{2j} to 1e-11, and full revival
/// |γ| = 1 at g t Δm = 2π to 1e-12.
#[test]
fn pure_dephasing_gamma_oracle_power_law_and_revival() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let tj = rng.gen_range(1..=6u32);
        let spin = Spin::new(tj).unwrap();
        let p = CoherentGammaParamsF64 {
            spin,
            theta: rng.gen_range(0.0..=std::f64::consts::PI),
            g: rng.gen_range(0.0..=10.0),
            t: rng.gen_range(0.0..=10.0),
            delta_m: 0.5 * rng.gen_range(-3..=3i32) as f64,
        };
        let closed = gamma_pure(&p);
        let phi = rng.gen_range(0.0..=std::f64::consts::TAU);
        let state = spin_coherent_state::<f64>(spin, p.theta, phi);
        let dense = dephasing_oracle_gamma(&state, p.g, p.t, p.delta_m).unwrap();
        assert!(
            (closed - dense).norm() <= 1e-11,
            "coherent gamma mismatch at 2j={tj}"
        );

        // One spin-j behaves as 2j spin-1/2 constituents.
        let half = CoherentGammaParamsF64 {
            spin: Spin::new(1).unwrap(),
            ..p
        };
        let powered = gamma_pure(&half).powi(tj as i32);
        assert!((closed - powered).norm() <= 1e-11, "power law at 2j={tj}");
    }

    // Full revival whenever the accumulated phase is a full turn.
    for tj in 1..=6u32 {
        let p = CoherentGammaParamsF64 {
            spin: Spin::new(tj).unwrap(),
            theta: 1.234,
            g: std::f64::consts::TAU,
            t: 2.0,
            delta_m: 0.5,
        };
        assert!(
            (gamma_pure(&p).norm() - 1.0).abs() <= 1e-12,
            "revival at 2j={tj}"
        );
    }
}

/// General (mixed-state) decoherence factor from the extracted axial
/// coefficients vs the plain trace, <= 1e-9, for maximally mixed, thermal
/// dephasing-axis, and spin-coherent environment states with j <= 5/2; the
/// maximally mixed case is also pinned to its Dirichlet-kernel closed form.
#[test]
fn general_dephasing_gamma_matches_trace_for_state_families() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for tj in 1..=5u32 {
        let spin = Spin::new(tj).unwrap();
        let states: Vec<(&str, SpinState<f64>)> = vec![
            ("maximally mixed", SpinState::maximally_mixed(spin)),
            (
                "thermal dephasing-axis",
                thermal_state_along_z(spin, rng.gen_range(0.1..=3.0)),
            ),
            (
                "spin coherent",
                spin_coherent_state(
                    spin,
                    rng.gen_range(0.0..=std::f64::consts::PI),
                    rng.gen_range(0.0..=std::f64::consts::TAU),
                ),
            ),
        ];
        for (label, state) in &states {
            for _ in 0..20 {
                let g = rng.gen_range(0.0..=10.0);
                let t = rng.gen_range(0.0..=10.0);
                let delta_m = 0.5 * rng.gen_range(-3..=3i32) as f64;
                let coeffs = extract_axial_coefficients(state).unwrap();
                let closed = gamma_general(&coeffs, g, t, delta_m);
                let dense = dephasing_oracle_gamma(state, g, t, delta_m).unwrap();
                assert!(
                    (closed - dense).norm() <= 1e-9,
                    "{label} mismatch at 2j={tj}"
                );

                if *label == "maximally mixed" {
                    // (1/(2j+1)) Σ_m e^{-i g t Δm m} over the ladder.
                    let u = g * t * delta_m;
                    let mut dirichlet = nalgebra::Complex::new(0.0, 0.0);
                    for i in 0..spin.dimension() {
                        let m = spin.magnetic::<f64>(i);
                        dirichlet += nalgebra::Complex::new(0.0, -u * m).exp();
                    }
                    dirichlet /= spin.dimension() as f64;
                    assert!(
                        (closed - dirichlet).norm() <= 1e-9,
                        "Dirichlet form at 2j={tj}"
                    );
                }
            }
        }
    }
}

/// Legendre moments ∫_{-1}^{1} x^k P_l(x) dx: the exact rational closed form
/// equals Gauss-Legendre quadrature to 1e-12 for all 0 <= l, k <= 10, and
/// the (l, k) = (2, 2) moment is +4/15 exactly.
#[test]
fn legendre_moments_match_quadrature_table() {
    for l in 0..=10u32 {
        for k in 0..=10u32 {
            let closed = legendre_moment::<f64>(l, k);
            let quad = legendre_moment_quadrature::<f64>(l as usize, k as usize);
            assert!(
                (closed - quad).abs() <= 1e-12,
                "moment mismatch at l={l}, k={k}: {closed} vs {quad}"
            );
        }
    }
    let expected = BigRational::new(BigInt::from(4), BigInt::from(15));
    assert_eq!(legendre_moment_exact(2, 2), expected);
}

/// Thermal `⟨S_z²⟩` and the information prefactor vs dense references
/// (relative 1e-9), their βΩ → 0 and βΩ → ∞ limits, and the short-time
/// Gaussian envelopes within 2% of brute-force products at exponent 0.02.
#[test]
fn short_time_moments_limits_and_gaussian_envelopes() {
    // Dense references: Boltzmann state over S_x, then direct traces.
    for tj in 1..=6u32 {
        let spin = Spin::new(tj).unwrap();
        let (_, _, sz) = build_spin_operators::<f64>(spin);
        let szm = sz.matrix();
        for &b in &[0.1, 0.9, 3.0] {
            let rho = thermal_state::<f64>(spin, b);
            let var_dense =
                (rho.rho() * szm * szm).trace().re - (rho.rho() * szm).trace().re.powi(2);
            let var = sz_variance_thermal::<f64>(spin, b);
            assert!(
                ((var - var_dense) / var_dense).abs() <= 1e-9,
                "variance at 2j={tj}, b={b}"
            );

            let eig = spinbath::matfun::hermitian_eigen(rho.rho()).unwrap();
            let mut qfi_dense = 0.0;
            for i in 0..spin.dimension() {
                for k in 0..spin.dimension() {
                    let (pi, pk) = (eig.values[i], eig.values[k]);
                    if pi + pk > 1e-12 {
                        let el = (eig.vectors.column(i).adjoint() * szm * eig.vectors.column(k))
                            [(0, 0)]
                            .norm_sqr();
                        qfi_dense += 2.0 * (pi - pk).powi(2) / (pi + pk) * el;
                    }
                }
            }
            let qfi = quantum_fisher_information::<f64>(spin, b);
            assert!(
                ((qfi - qfi_dense) / qfi_dense).abs() <= 1e-9,
                "information prefactor at 2j={tj}, b={b}"
            );
        }

        // Limits: infinite temperature and the saturation value.
        let j = tj as f64 / 2.0;
        let flat = sz_variance_thermal::<f64>(spin, 0.0);
        assert!(((flat - j * (j + 1.0) / 3.0) / flat).abs() <= 1e-13);
        assert!(quantum_fisher_information::<f64>(spin, 0.0) == 0.0);
        assert!((quantum_fisher_information::<f64>(spin, 50.0) - tj as f64).abs() <= 1e-9);
    }

    // Gaussian envelopes vs exact products over a fixed coupling draw.
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let couplings: Vec<f64> = (0..10).map(|_| rng.gen_range(0.0..10.0)).collect();
    let layout = MacrofractionLayout::contiguous(5, &[5], couplings).unwrap();
    let (m, mp) = (-0.5, 0.5);
    let dm: f64 = m - mp;
    for tj in 1..=6u32 {
        let spin = Spin::new(tj).unwrap();
        for &b in &[0.1, 0.9, 3.0] {
            let env = EnvironmentSpec::new(spin, b).unwrap();
            let g2u = layout.mean_coupling_sq(layout.unobserved());
            let g2m = layout.mean_coupling_sq(layout.fraction(0));

            // Probe each envelope where its own exponent equals 0.02.
            let qfi = quantum_fisher_information(spin, b);
            let t_f = (0.02 / (0.5 * 5.0 * g2m * dm * dm * qfi)).sqrt();
            let exact_f = macrofraction_fidelity(&layout, &env, 0, m, mp, t_f).unwrap();
            let gauss_f = fidelity_short_time_exact_info(5, g2m, dm, t_f, spin, b);
            assert!(
                ((gauss_f - exact_f) / exact_f).abs() <= 0.02,
                "fidelity envelope 2j={tj}, b={b}"
            );

            let var = sz_variance_thermal(spin, b);
            let t_g = (0.02 / (2.0 * 5.0 * g2u * dm * dm * var)).sqrt();
            let exact_g = total_decoherence_factor(&layout, &env, m, mp, t_g)
                .unwrap()
                .norm();
            let gauss_g = gamma_short_time(5, g2u, dm, t_g, spin, b, false);
            assert!(
                ((gauss_g - exact_g) / exact_g).abs() <= 0.02,
                "decoherence envelope 2j={tj}, b={b}"
            );

            // The large-j variants hold in the moderate-to-cold regime; at
            // βΩ = 0.1 their prefactors are genuinely off by factors of a
            // few, so they are pinned only where they apply.
            if b >= 0.9 {
                let gauss_gl = gamma_short_time(5, g2u, dm, t_g, spin, b, true);
                assert!(
                    ((gauss_gl - exact_g) / exact_g).abs() <= 0.02,
                    "large-j decoherence envelope 2j={tj}, b={b}"
                );
                let gauss_fl = fidelity_short_time(5, g2m, dm, t_f, spin, b);
                assert!(
                    ((gauss_fl - exact_f) / exact_f).abs() <= 0.02,
                    "large-j fidelity envelope 2j={tj}, b={b}"
                );
            }
        }
    }
}

/// The seeded reference ensemble (βΩ = 0.9, 5 + 5 spins, m = ∓1/2,
/// couplings U[0, 10], 100 realizations, j = 1/2 … 5/2): averaged
/// macrofraction fidelity is pointwise non-increasing in j on t ∈ [0.5, 5];
/// averaged |Γ| for j >= 1 stays below 0.2 on t ∈ [1, 30] except at
/// isolated grid points; at j = 5/2 at least one single realization revives
/// above F = 0.5 on t ∈ [5, 30]. Completes in under 120 s.
#[test]
fn reference_ensemble_ordering_revivals_and_runtime() {
    let start = Instant::now();
    let config = ExperimentConfigF64::reference_scenario(42);
    let run = run_experiment(&config).unwrap();
    let grid = &config.time_grid;

    // (a) More macroscopic environments distinguish the branches better:
    // averaged fidelity ordered downward in j at every early-window point.
    for w in run.per_spin.windows(2) {
        for (i, &t) in grid.iter().enumerate() {
            if (0.5..=5.0).contains(&t) {
                assert!(
                    w[1].average.fidelity_mac[i] <= w[0].average.fidelity_mac[i] + 1e-12,
                    "fidelity ordering broken at t={t} between 2j={} and 2j={}",
                    w[0].spin.twice_j(),
                    w[1].spin.twice_j()
                );
            }
        }
    }

    // (b) Averaged decoherence factor stays suppressed for j >= 1; any
    // excursion above 0.2 must be an isolated grid point, not a plateau.
    for series in &run.per_spin {
        if series.spin.twice_j() < 2 {
            continue;
        }
        let violations: Vec<usize> = grid
            .iter()
            .enumerate()
            .filter(|&(i, &t)| (1.0..=30.0).contains(&t) && series.average.gamma_abs[i] >= 0.2)
            .map(|(i, _)| i)
            .collect();
        for w in violations.windows(2) {
            assert!(
                w[1] - w[0] > 1,
                "adjacent suppression violations at 2j={}",
                series.spin.twice_j()
            );
        }
    }

    // (c) Single realizations at j = 5/2 still revive late.
    let last = run.per_spin.last().unwrap();
    assert_eq!(last.spin.twice_j(), 5);
    let revived = last.realizations.iter().any(|r| {
        grid.iter()
            .enumerate()
            .filter(|&(_, &t)| (5.0..=30.0).contains(&t))
            .any(|(i, _)| r.fidelity_mac[i] > 0.5)
    });
    assert!(revived, "no single-realization fidelity revival at 2j=5");

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 120.0, "ensemble took {elapsed:?}");
}

/// Exact anchors of the objectivity bound: an equal two-level superposition
/// with one macrofraction gives bound = 2 (bit-exact) at t = 0, and a fully
/// dephased central state has a decoherence term of exactly 0 at all times.
#[test]
fn objectivity_bound_exact_anchors() {
    let central = Spin::new(1).unwrap();
    let env = EnvironmentSpec::new(Spin::new(3).unwrap(), 0.9).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let couplings: Vec<f64> = (0..10).map(|_| rng.gen_range(0.0..10.0)).collect();
    let layout = MacrofractionLayout::contiguous(5, &[5], couplings).unwrap();

    let superposed = SystemState::equal_superposition(central, &[0.5, -0.5]).unwrap();
    let report = sbs_bound(&superposed, &layout, &env, 0.0).unwrap();
    assert_eq!(report.bound, 2.0);
    assert_eq!(report.decoherence, 1.0);
    assert_eq!(report.distinguishability, 1.0);

    let dephased = SystemState::diagonal(central, &[0.3, 0.7]).unwrap();
    for &t in &[0.0, 0.7, 3.1, 17.9] {
        let report = sbs_bound(&dephased, &layout, &env, t).unwrap();
        assert_eq!(report.decoherence, 0.0);
        assert_eq!(report.bound, report.distinguishability);
    }
}
