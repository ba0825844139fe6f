//! Direct-solver basics: causality, linearity, one-sided support, and a
//! quick two-point amplification check. Full sweeps live in the acceptance
//! suite.

use oscamp_core::experiments::{self, SweepParams};
use oscamp_core::presets::{self, PresetName};
use oscamp_core::solver::{BoundaryPulse, Discretization, Evolution};

fn quick_params(eps_list: Vec<f64>) -> SweepParams {
    SweepParams {
        eps_list,
        t_end: 0.8,
        ppw: 22.0,
        k_modes: 8,
        pulse: BoundaryPulse::default(),
    }
}

#[test]
fn zero_data_stays_zero() {
    let ps = presets::build(PresetName::Resonant).unwrap();
    let ctx = experiments::study_context(&ps).unwrap();
    let disc = Discretization::for_run(&ps.spec, 0.1, 0.3, 4.0, 12.0, 1, 4).unwrap();
    let evo = Evolution::new(&ps.spec, &ctx.beta_l, ctx.omega_n, 0.1, &disc).unwrap();
    let pulse = BoundaryPulse {
        t_on: 0.0,
        width: 0.1,
        amplitude: 0.0,
    };
    let run = evo.evolve(&pulse, &[1.0, 1.0], 20, 1.0).unwrap();
    assert_eq!(run.sup_norm, 0.0);
}

#[test]
fn doubling_data_doubles_solution() {
    let ps = presets::build(PresetName::Resonant).unwrap();
    let ctx = experiments::study_context(&ps).unwrap();
    let disc = Discretization::for_run(&ps.spec, 0.1, 0.5, 4.0, 14.0, 1, 6).unwrap();
    let evo = Evolution::new(&ps.spec, &ctx.beta_l, ctx.omega_n, 0.1, &disc).unwrap();
    let p1 = BoundaryPulse::default();
    let p2 = BoundaryPulse {
        amplitude: 2.0,
        ..BoundaryPulse::default()
    };
    let r1 = evo.evolve(&p1, &[1.0, 1.0], 25, 1e9).unwrap();
    let r2 = evo.evolve(&p2, &[1.0, 1.0], 25, 1e9).unwrap();
    let ratio = r2.sup_norm / r1.sup_norm;
    assert!((ratio - 2.0).abs() < 1e-10, "ratio = {ratio}");
}

#[test]
fn one_sided_spectrum_leaves_lower_modes_empty() {
    // data in mode 1 only, spectrum r = +1 only: modes k < 1 stay zero
    let ps = presets::build(PresetName::Resonant).unwrap();
    let ctx = experiments::study_context(&ps).unwrap();
    let disc = Discretization::for_run(&ps.spec, 0.1, 0.5, 4.0, 14.0, -3, 6).unwrap();
    let evo = Evolution::new(&ps.spec, &ctx.beta_l, ctx.omega_n, 0.1, &disc).unwrap();
    let run = evo.evolve(&BoundaryPulse::default(), &[1.0, 1.0], 25, 1e9).unwrap();
    for (m, sup) in run.mode_sups.iter().enumerate() {
        let k = disc.kmin + m as i64;
        if k < 1 {
            assert!(
                *sup < 1e-12 * run.sup_norm.max(1.0),
                "mode {k} has sup {sup}"
            );
        }
    }
    assert!(run.mode_sups.iter().any(|s| *s > 0.0));
}

#[test]
fn resonant_preset_amplifies_like_double_order() {
    // two-point slope check; the full sweep is in the acceptance suite
    let ps = presets::build(PresetName::Resonant).unwrap();
    let sweep = experiments::amplification_sweep(&ps, &quick_params(vec![0.0707, 0.0354]))
        .unwrap();
    assert!(
        sweep.fitted_slope < -1.6 && sweep.fitted_slope > -2.4,
        "slope = {} ratios {:?}",
        sweep.fitted_slope,
        sweep
            .measurements
            .iter()
            .map(|m| m.sup_ratio)
            .collect::<Vec<_>>()
    );
}

#[test]
fn ulc_preset_does_not_amplify() {
    let ps = presets::build(PresetName::Ulc).unwrap();
    let sweep = experiments::amplification_sweep(&ps, &quick_params(vec![0.05, 0.025])).unwrap();
    assert!(
        sweep.fitted_slope > -0.35,
        "slope = {} ratios {:?}",
        sweep.fitted_slope,
        sweep
            .measurements
            .iter()
            .map(|m| m.sup_ratio)
            .collect::<Vec<_>>()
    );
}

#[test]
fn self_convergence_second_order() {
    let ps = presets::build(PresetName::Resonant).unwrap();
    let ctx = experiments::study_context(&ps).unwrap();
    let eps = 0.08;
    let mut sups = Vec::new();
    for ppw in [16.0, 32.0, 64.0] {
        let disc = Discretization::for_run(&ps.spec, eps, 0.5, 4.0, ppw, 1, 6).unwrap();
        let evo = Evolution::new(&ps.spec, &ctx.beta_l, ctx.omega_n, eps, &disc).unwrap();
        let run = evo.evolve(&BoundaryPulse::default(), &[1.0, 1.0], 30, 1e9).unwrap();
        sups.push(run.sup_norm);
    }
    let d1 = (sups[1] - sups[0]).abs();
    let d2 = (sups[2] - sups[1]).abs();
    // at least second order in the grid (fourth-order interior, second-order
    // boundary pieces): successive differences shrink by >= 3x
    assert!(d2 < d1 / 3.0, "differences {d1:.3e} -> {d2:.3e}");
}
