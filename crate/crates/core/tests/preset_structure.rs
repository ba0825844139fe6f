//! Structural checks on the shipped presets: weak-stability sets, omega
//! ratios, resonances, factorizations and assumption reports.

use oscamp_core::amplification::{self, OmegaClass};
use oscamp_core::lopatinski;
use oscamp_core::presets::{self, PresetName};
use oscamp_core::spectral::{self, Frequency};

#[test]
fn euler_incoming_has_one_weak_stability_pair() {
    let ps = presets::build(PresetName::EulerIncoming).unwrap();
    let report = lopatinski::scan_upsilon0(&ps.spec, 1440).unwrap();
    assert_eq!(report.upsilon_count(), 2, "expected a single +- pair");
    for root in &report.roots {
        assert!(root.pair.is_some(), "roots must pair under negation");
        assert!(root.simple_zero, "Lopatinski zero must be first order");
        assert!(root.residual < 1e-8);
    }
    assert!(report.ulc_elsewhere > 1e-3, "ULC margin away from the roots");
}

#[test]
fn euler_incoming_omega_ratio_in_favorable_interval() {
    let ps = presets::build(PresetName::EulerIncoming).unwrap();
    let report = lopatinski::scan_upsilon0(&ps.spec, 1440).unwrap();
    let beta_l = report.upsilon_plus()[0];
    let phases = spectral::classify_phases(&ps.spec, &beta_l).unwrap();
    assert_eq!(phases.n_incoming(), 2);
    assert_eq!(phases.n_outgoing(), 1);
    let osc = ps.osc_index(&phases);
    let table = amplification::omega_table(&phases, osc).unwrap();
    // the (i, N) column is exactly -1
    for (&(_, j), om) in &table.entries {
        if j == osc {
            assert!((om + 1.0).abs() < 1e-12, "Omega_iN = {om}");
        }
    }
    // the other incoming gives a ratio in (-1, 0)
    let other: Vec<f64> = table
        .entries
        .iter()
        .filter(|((_, j), _)| *j != osc)
        .map(|(_, om)| *om)
        .collect();
    assert_eq!(other.len(), 1);
    assert!(
        -1.0 < other[0] && other[0] < 0.0,
        "Omega = {} outside (-1,0)",
        other[0]
    );
    assert_eq!(table.classes.values().filter(|c| **c == OmegaClass::Favorable).count(), 1);
}

#[test]
fn resonant_preset_has_unit_omega_and_clean_pair() {
    let ps = presets::build(PresetName::Resonant).unwrap();
    let beta_l = ps.beta_l.unwrap();
    let phases = spectral::classify_phases(&ps.spec, &beta_l).unwrap();
    let osc = ps.osc_index(&phases);
    let table = amplification::omega_table(&phases, osc).unwrap();
    let other: Vec<f64> = table
        .entries
        .iter()
        .filter(|((_, j), _)| *j != osc)
        .map(|(_, om)| *om)
        .collect();
    assert_eq!(other.len(), 1);
    assert!((other[0] - 1.0).abs() < 1e-9, "Omega = {}", other[0]);

    // the boundary matrix was built from the kernel at beta_l: the scan must
    // find exactly that pair
    let report = lopatinski::scan_upsilon0(&ps.spec, 1440).unwrap();
    assert_eq!(report.upsilon_count(), 2);
    let found = report.upsilon_plus()[0];
    let d = found
        .direction_distance(&beta_l)
        .min(found.mirror().direction_distance(&beta_l));
    assert!(d < 1e-6, "scan found beta at distance {d}");
    assert!(report.roots.iter().all(|r| r.simple_zero));

    // resonance detection: Omega = 1 = 1/1
    let res = amplification::detect_resonances(&table, 50, 1e-9);
    assert!(res.iter().any(|r| r.p == 1 && r.q == 1), "{res:?}");
}

#[test]
fn euler_outgoing_is_weakly_stable_with_single_incoming() {
    let ps = presets::build(PresetName::EulerOutgoing).unwrap();
    let beta_l = ps.beta_l.unwrap();
    let phases = spectral::classify_phases(&ps.spec, &beta_l).unwrap();
    assert_eq!(phases.n_incoming(), 1);
    let report = lopatinski::scan_upsilon0(&ps.spec, 1440).unwrap();
    assert_eq!(report.upsilon_count(), 2);
    // the detected root is the designed one
    let found = report.upsilon_plus()[0];
    let d = found
        .direction_distance(&beta_l)
        .min(found.mirror().direction_distance(&beta_l));
    assert!(d < 1e-6);
}

#[test]
fn ulc_preset_has_no_roots_and_margin() {
    let ps = presets::build(PresetName::Ulc).unwrap();
    let report = lopatinski::scan_upsilon0(&ps.spec, 1440).unwrap();
    assert_eq!(report.upsilon_count(), 0, "ULC preset must have empty Upsilon_0");
    assert!(report.ulc_elsewhere > 0.3, "margin = {}", report.ulc_elsewhere);
    // gamma > 0 hemisphere margin (weak-stability assumption, first bullet)
    let samples = lopatinski::hemisphere_samples(&[0.1, 0.4, 0.8], 360);
    let m = lopatinski::ulc_region_check(&ps.spec, &samples).unwrap();
    assert!(m > 0.1, "hemisphere margin = {m}");
}

#[test]
fn resonant_preset_passes_assumption_checks() {
    let ps = presets::build(PresetName::Resonant).unwrap();
    let rep = spectral::validate_assumptions(&ps.spec, 720).unwrap();
    assert!(rep.strictly_hyperbolic, "{rep:?}");
    assert!(rep.p_consistent);
    assert!(rep.bnd_rank_consistent);
    assert!(rep.min_space_gap > 0.5);
    assert!(rep.hyperbolic_fraction > 0.2, "hyperbolic fraction {}", rep.hyperbolic_fraction);
}

#[test]
fn assumption_report_flags_degenerate_systems() {
    use nalgebra::DMatrix;
    use num_complex::Complex;
    // B1 = B2 = I collapses the characteristic roots
    let spec = spectral::SystemSpec::new(
        DMatrix::identity(3, 3),
        DMatrix::identity(3, 3),
        DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]),
        1,
        DMatrix::from_element(3, 3, Complex::new(0.0, 0.0)),
        vec![(1, Complex::new(1.0, 0.0))],
        2,
    )
    .unwrap();
    let rep = spectral::validate_assumptions(&spec, 180).unwrap();
    assert!(!rep.strictly_hyperbolic);
    // declared p inconsistent with B2 = I (three positive eigenvalues)
    assert!(!rep.p_consistent);
}

#[test]
fn euler_incoming_local_factorization() {
    let ps = presets::build(PresetName::EulerIncoming).unwrap();
    let report = lopatinski::scan_upsilon0(&ps.spec, 1440).unwrap();
    let beta_l = report.upsilon_plus()[0];
    let fact = lopatinski::local_factorization(&ps.spec, &beta_l, 0.05).unwrap();
    assert!(fact.residual <= 1e-6, "fit residual {}", fact.residual);
    assert!(fact.hplus_min > 0.0);
    assert!(fact.ratio_min > 0.0 && fact.ratio_max.is_finite());
    // on the zero locus tau = c_+ eta (gamma = 0) the determinant vanishes:
    // that is the root direction itself
    let d = lopatinski::delta_abs(&ps.spec, &beta_l).unwrap();
    assert!(d < 1e-8);
}

#[test]
fn symbol_basics() {
    let ps = presets::build(PresetName::EulerIncoming).unwrap();
    // zero frequency rejected
    assert!(Frequency::new(0.0, 0.0, 0.0).is_err());
    // eta = 0 isolates -B2^-1 tau
    let z = Frequency::real(1.0, 0.0).unwrap();
    let a = spectral::symbol(&ps.spec, &z).unwrap();
    let b2i = ps.spec.b2.clone().try_inverse().unwrap();
    for i in 0..3 {
        for j in 0..3 {
            assert!((a[(i, j)].re + b2i[(i, j)]).abs() < 1e-14);
            assert!(a[(i, j)].im.abs() < 1e-14);
        }
    }
}
