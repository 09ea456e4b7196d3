use flockmf::lemma::{
    check_envelope, envelope_constants, envelope_report_on, functional_for, lyapunov_series, run_grid, sample_grid,
    solve_saturated, standard_grid, Bracket, ComparisonSystem, EnvelopeConstants, Functional, SourceTerm,
};
use proptest::prelude::*;

#[test]
fn constant_drift_matches_hyperbolic_solution() {
    // β = 0 gives a'' = C a
    for (c, a0, b0) in [(0.25, 1.0, 0.0), (1.0, 0.5, 2.0), (4.0, 0.0, 1.0)] {
        let sys = ComparisonSystem::power(0.0, c, a0, b0, SourceTerm::Zero);
        let s = solve_saturated(&sys, 5.0, 51).unwrap();
        let k: f64 = f64::sqrt(c);
        for (i, &t) in s.times.iter().enumerate() {
            let a = a0 * (k * t).cosh() + b0 / k * (k * t).sinh();
            let b = a0 * k * (k * t).sinh() + b0 * (k * t).cosh();
            assert!((s.a[i] - a).abs() <= 1e-8 * a.abs().max(1.0), "c {c} t {t}");
            assert!((s.b[i] - b).abs() <= 1e-8 * b.abs().max(1.0));
        }
    }
}

#[test]
fn critical_drift_matches_power_solution() {
    // β = 2 with B = 1 + t: a = B^ζ solves a'' = C B^{-2} a when ζ(ζ−1) = C
    let c = 2.0;
    let zeta = (1.0 + f64::sqrt(1.0 + 4.0 * c)) / 2.0;
    let sys = ComparisonSystem::power(2.0, c, 1.0, zeta, SourceTerm::Zero);
    let s = solve_saturated(&sys, 20.0, 21).unwrap();
    for (i, &t) in s.times.iter().enumerate() {
        let exact = (1.0 + t).powf(zeta);
        assert!((s.a[i] - exact).abs() <= 1e-8 * exact);
    }
    assert_eq!(envelope_constants(&sys).unwrap().zeta().unwrap(), zeta);
}

#[test]
fn constants_by_hand() {
    let sys = ComparisonSystem::power(3.0, 2.0, 1.0, 0.5, SourceTerm::Zero);
    let EnvelopeConstants::Integrable { c1, c2 } = envelope_constants(&sys).unwrap() else { panic!() };
    assert!((c2 - 1f64.exp()).abs() < 1e-14);
    assert!((c1 - 1.5 * 1f64.exp()).abs() < 1e-13);
    let sys = ComparisonSystem::power(1.0, 0.75, 1.0, 1.0, SourceTerm::Zero);
    let (gamma, c_bar) = envelope_constants(&sys).unwrap().gamma().unwrap();
    assert_eq!(gamma, 0.5);
    // C̄ solves γ²C̄² − γ(1−γ)C̄ − C = 0 with the positive root
    assert!((gamma * gamma * c_bar * c_bar - gamma * (1.0 - gamma) * c_bar - 0.75).abs() < 1e-12);
    let (theta, c_bar) = envelope_constants(&ComparisonSystem::log_corrected(0.5, 6.0, 1.0, 1.0, SourceTerm::Zero))
        .unwrap()
        .theta()
        .unwrap();
    assert_eq!(theta, 2.0);
    assert!((c_bar - 1.5).abs() < 1e-14);
}

#[test]
fn full_grid_has_no_violations() {
    let grid = standard_grid();
    assert!(grid.len() >= 63);
    let summary = run_grid(&grid, &sample_grid(50.0, 201)).unwrap();
    assert_eq!(summary.configurations, grid.len());
    assert!(summary.violations.is_empty(), "{:?}", &summary.violations[..summary.violations.len().min(3)]);
}

#[test]
fn log_corrected_grid_is_dominated() {
    for alpha in [0.0, 0.25, 0.5] {
        for c in [0.1, 1.0, 10.0] {
            for g in [SourceTerm::Zero, SourceTerm::Power { coeff: 1.0, exponent: -2.0 }] {
                let sys = ComparisonSystem::log_corrected(alpha, c, 1.0, 1.0, g);
                let r = envelope_report_on(&sys, &sample_grid(50.0, 201)).unwrap();
                assert!(r.passed(), "alpha {alpha} c {c}: {:?}", r.first_violation);
            }
        }
    }
}

#[test]
fn tabulated_source_is_dominated_across_its_kink() {
    let g = SourceTerm::Tabulated { times: vec![0.0, 5.0, 10.0], values: vec![0.0, 2.0, 0.5] };
    for beta in [0.5, 2.0, 3.0] {
        let sys = ComparisonSystem::power(beta, 1.0, 1.0, 0.0, g.clone());
        check_envelope(&sys, 20.0, 401).unwrap();
    }
}

#[test]
fn log_drift_at_zero_alpha_is_the_critical_drift() {
    for c in [0.1, 1.0, 10.0] {
        let log = ComparisonSystem::log_corrected(0.0, c, 1.0, 2.0, SourceTerm::Zero);
        let crit = ComparisonSystem::power(2.0, c, 1.0, 2.0, SourceTerm::Zero);
        let times = sample_grid(30.0, 61);
        for &t in &times {
            assert_eq!(log.drift_at(t), crit.drift_at(t));
        }
        let (a, b) = (solve_saturated(&log, 30.0, 61).unwrap(), solve_saturated(&crit, 30.0, 61).unwrap());
        for i in 0..times.len() {
            assert!((a.a[i] - b.a[i]).abs() <= 1e-9 * b.a[i].abs().max(1.0));
        }
    }
}

#[test]
fn lyapunov_functionals_do_not_increase_without_source() {
    let times = sample_grid(40.0, 401);
    for (sys, which) in [
        (ComparisonSystem::power(1.0, 1.0, 1.0, 1.0, SourceTerm::Zero), Functional::L2),
        (ComparisonSystem::power(2.0, 1.0, 1.0, 1.0, SourceTerm::Zero), Functional::L3),
        (ComparisonSystem::log_corrected(0.3, 1.0, 1.0, 1.0, SourceTerm::Zero), Functional::L4),
    ] {
        assert_eq!(functional_for(&sys), which);
        let s = lyapunov_series(&sys, &times, which).unwrap();
        let scale = s.values[0].abs().max(1.0);
        assert!(s.max_increase() <= 1e-8 * scale, "{which:?}: {}", s.max_increase());
    }
}

#[test]
fn lyapunov_functionals_stay_below_their_budget_with_source() {
    let times = sample_grid(40.0, 401);
    let g = SourceTerm::Power { coeff: 0.5, exponent: -1.0 };
    for sys in [
        ComparisonSystem::power(3.0, 1.0, 1.0, 1.0, g.clone()),
        ComparisonSystem::power(1.0, 1.0, 1.0, 1.0, g.clone()),
        ComparisonSystem::power(2.0, 1.0, 1.0, 1.0, g.clone()),
        ComparisonSystem::log_corrected(0.3, 1.0, 1.0, 1.0, g.clone()),
    ] {
        let s = lyapunov_series(&sys, &times, functional_for(&sys)).unwrap();
        assert!(s.max_excess() <= 1e-8 * s.ceiling.last().unwrap().abs().max(1.0));
    }
}

#[test]
fn japanese_bracket_is_available_but_not_default() {
    let sys = ComparisonSystem::power(1.0, 1.0, 1.0, 1.0, SourceTerm::Zero);
    assert_eq!(sys.bracket, Bracket::Affine);
    let j = sys.clone().with_bracket(Bracket::Japanese);
    assert!((j.drift_at(3.0) - 1.0 / 10f64.sqrt()).abs() < 1e-15);
    assert!(solve_saturated(&j, 10.0, 11).is_ok());
}

#[test]
fn invalid_systems_are_rejected() {
    assert!(check_envelope(&ComparisonSystem::power(-1.0, 1.0, 1.0, 1.0, SourceTerm::Zero), 1.0, 3).is_err());
    assert!(check_envelope(&ComparisonSystem::power(1.0, 1.0, -1.0, 1.0, SourceTerm::Zero), 1.0, 3).is_err());
    let bad = SourceTerm::Tabulated { times: vec![1.0, 0.0], values: vec![1.0, 1.0] };
    assert!(check_envelope(&ComparisonSystem::power(1.0, 1.0, 1.0, 1.0, bad), 1.0, 3).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn random_power_systems_are_dominated(
        beta in 0.0f64..3.5,
        c in 0.05f64..8.0,
        a0 in 0.0f64..5.0,
        b0 in 0.0f64..5.0,
        coeff in 0.0f64..2.0,
        exponent in -3.0f64..0.0,
    ) {
        prop_assume!((beta - 2.0).abs() > 0.1);
        let sys = ComparisonSystem::power(beta, c, a0, b0, SourceTerm::Power { coeff, exponent });
        let r = envelope_report_on(&sys, &sample_grid(20.0, 81)).unwrap();
        prop_assert!(r.passed(), "{:?}", r.first_violation);
    }
}
