use std::f64::consts::PI;

use gridsync::analysis::{is_non_increasing, passivity_residual, EnergyKind};
use gridsync::dynamics::{
    representation_equivalence, simulate_with, InitialError, IntegratorConfig, Representation, SimOptions,
};
use gridsync::pll::{Family, PllConfig};
use gridsync::scenarios::{builtin_scenario, run_scenario, HIGH_INERTIA_STEPS};
use gridsync::signals::{GridModel, GAMMA};
use proptest::prelude::*;

const W50: f64 = 100.0 * PI;

fn config(family: Family, k_p: f64, k_i: f64) -> PllConfig {
    match family {
        Family::Srf => PllConfig::srf(k_p, k_i, GAMMA).unwrap(),
        Family::Atan => PllConfig::atan(k_p, k_i, GAMMA).unwrap(),
    }
}

fn family() -> impl Strategy<Value = Family> {
    prop_oneof![Just(Family::Srf), Just(Family::Atan)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn dq_flow_stays_on_the_circle(
        fam in family(),
        delta in -3.0f64..3.0,
        err in -50.0f64..50.0,
    ) {
        let grid = GridModel::constant(1.0, W50).unwrap();
        let cfg = config(fam, 200.0, 1000.0);
        let icfg = IntegratorConfig::new(1e-5, 0.05).with_stride(50);
        let opts = SimOptions { renormalize: false, ..SimOptions::default() };
        let x0 = InitialError::new(delta, W50 + err).to_state(&grid);
        let tr = simulate_with(&grid, &cfg, Representation::Dq, &icfg, x0, &opts).unwrap();
        let drift = tr.v_hat.iter().map(|v| (v.norm() - GAMMA).abs()).fold(0.0, f64::max);
        prop_assert!(drift < 1e-7 * GAMMA, "drift {drift}");
        prop_assert_eq!(tr.renormalizations, 0);
    }

    #[test]
    fn storage_balance_and_monotone_lyapunov(
        fam in family(),
        delta in -3.0f64..3.0,
        err in -30.0f64..30.0,
    ) {
        let grid = GridModel::constant(1.0, W50).unwrap();
        let cfg = config(fam, 200.0, 1000.0);
        let icfg = IntegratorConfig::new(1e-5, 0.1);
        let x0 = InitialError::new(delta, W50 + err).to_state(&grid);
        let tr = simulate_with(&grid, &cfg, Representation::Polar, &icfg, x0, &SimOptions::default()).unwrap();
        let (h, w) = match fam {
            Family::Srf => (EnergyKind::H1, EnergyKind::W1),
            Family::Atan => (EnergyKind::H2, EnergyKind::W2),
        };
        let h_max = tr.energy(h).unwrap().iter().cloned().fold(0.0, f64::max);
        let res = passivity_residual(&tr, h).unwrap();
        prop_assert!(res < 1e-6 * h_max.max(1e-12), "residual {res} vs {h_max}");
        prop_assert!(is_non_increasing(&tr, w, 1e-9).unwrap());
    }

    #[test]
    fn representations_agree(
        fam in family(),
        delta in -3.0f64..3.0,
        err in -30.0f64..30.0,
    ) {
        let grid = GridModel::constant(1.0, W50).unwrap();
        let cfg = config(fam, 200.0, 1000.0);
        let icfg = IntegratorConfig::new(1e-5, 0.1).with_stride(10);
        let x0 = InitialError::new(delta, W50 + err).to_state(&grid);
        let dev = representation_equivalence(&grid, &cfg, &icfg, x0).unwrap();
        prop_assert!(dev.delta < 1e-6, "{dev:?}");
    }
}

#[test]
fn scenario_reports_are_reproducible() {
    let s = builtin_scenario(HIGH_INERTIA_STEPS).unwrap();
    let a = run_scenario(&s).unwrap();
    let b = run_scenario(&s).unwrap();
    assert_eq!(a.report, b.report);
    for ((la, ta), (lb, tb)) in a.trajectories.iter().zip(&b.trajectories) {
        assert_eq!(la, lb);
        assert_eq!(ta, tb);
    }
}

#[test]
fn phase_steps_leave_the_frequency_alone() {
    let s = builtin_scenario(HIGH_INERTIA_STEPS).unwrap();
    let run = run_scenario(&s).unwrap();
    for (label, tr) in &run.trajectories {
        assert_eq!(tr.events.len(), 5, "{label}");
        for e in &tr.events {
            let before = e.row;
            assert_eq!(tr.times[before], tr.times[before + 1]);
            assert_eq!(tr.omega_hat[before], tr.omega_hat[before + 1]);
            assert!((tr.delta[before] - tr.delta[before + 1] - e.jump).abs() < 1e-12);
        }
    }
}
