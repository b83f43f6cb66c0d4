use corner_gl::effective::store::{append_records, read_records};
use corner_gl::effective::*;
use corner_gl::oned::solve_interval_default;
use proptest::prelude::*;
use std::f64::consts::FRAC_PI_2;

fn coarse() -> Numerics {
    Numerics { h: 0.2, ..Numerics::default() }
}

#[test]
fn corner_record_carries_a_negative_correction() {
    let r = corner_energy_raw(FRAC_PI_2, 0.8, 8.0, 3.0, &coarse()).unwrap();
    let bulk = 2.0 * 8.0 * solve_interval_default(0.8, 3.0).unwrap().energy;
    assert_eq!(r.reference, Some(bulk));
    assert!(r.energy < bulk, "{} vs {bulk}", r.energy);
    assert!(r.converged && r.virial_holds());
    assert!(r.sup.unwrap() <= 1.0 + 1e-8);
}

#[test]
fn preconditions_are_enforced() {
    let n = coarse();
    assert!(matches!(corner_energy_raw(FRAC_PI_2, 0.55, 8.0, 3.0, &n), Err(EffError::InvalidParameter(_))));
    assert!(matches!(corner_energy_raw(FRAC_PI_2, 0.8, 60.0, 3.0, &n), Err(EffError::InvalidParameter(_))));
    assert!(corner_energy_raw(FRAC_PI_2, 0.8, 2.0, 3.0, &n).is_err());
    assert!(matches!(check_sector_mu(0.61, 0.51, 0.59), Err(EffError::InvalidParameter(_))));
    assert!(matches!(check_sector_mu(0.50, 0.51, 0.59), Err(EffError::InvalidParameter(_))));
    assert!(check_sector_mu(0.59, 0.51, 0.59).is_ok());
    assert!(matches!(sector_energy(FRAC_PI_2, 0.3, &[4.0, 6.0, 8.0], &n), Err(EffError::InvalidParameter(_))));
}

#[test]
fn sector_sweep_decreases_in_radius() {
    let s = sector_energy(FRAC_PI_2, 0.55, &[4.0, 6.0, 8.0], &coarse()).unwrap();
    assert!(s.report.is_nonincreasing());
    assert!(s.report.limit <= s.largest().energy + s.report.last_increment);
    assert!(s.report.limit < 0.0 && s.report.error.is_finite());
    assert!(s.records.iter().all(|r| r.kind == RecordKind::Sector && r.virial_holds()));
}

#[test]
fn dirichlet_nesting_is_exact() {
    let s = dirichlet_corner_energy(FRAC_PI_2, &Schedule::depths(&[3.0, 4.0, 5.0]), true, &coarse()).unwrap();
    assert!(s.monotone_in_depth && s.monotone_in_length);
    assert!(s.report.limit <= 0.0);
    assert!(s.wedge_gaps.iter().all(|g| g.1 >= 0.0), "{:?}", s.wedge_gaps);
    for r in &s.records {
        let w = s.wedge_records.iter().find(|w| w.length == r.length).unwrap();
        assert!(w.energy <= r.energy);
    }
}

#[test]
fn single_mu_is_rejected() {
    let cfg = ContinuityConfig {
        beta: FRAC_PI_2,
        mu_above: vec![0.6],
        mu_below: vec![0.57, 0.58],
        corner_schedule: Schedule::depths(&[3.0, 4.0, 5.0]),
        sector_radii: vec![4.0, 6.0, 8.0],
        dirichlet_schedule: Schedule::depths(&[3.0, 4.0, 5.0]),
        numerics: coarse(),
    };
    let e = continuity_study(&cfg).unwrap_err();
    assert!(e.to_string().contains("insufficient points for limit fit"), "{e}");
}

#[test]
fn null_input_is_not_refuted() {
    let zero = linear_limit(&[(0.01, 0.0, 0.0), (0.02, 0.0, 0.0), (0.04, 0.0, 0.0)]).unwrap();
    assert_eq!(decide(zero.value, zero.error).unwrap(), Verdict::NotRefuted);
}

#[test]
fn records_are_reproducible() {
    let a = corner_energy_raw(FRAC_PI_2, 0.8, 5.0, 2.5, &coarse()).unwrap();
    let b = corner_energy_raw(FRAC_PI_2, 0.8, 5.0, 2.5, &coarse()).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.energy.to_bits(), b.energy.to_bits());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("records.jsonl");
    append_records(&path, &[a.clone(), b]).unwrap();
    let back = read_records(&path).unwrap();
    assert_eq!(back[0].energy.to_bits(), a.energy.to_bits());
    assert_eq!(back.len(), 2);
}

proptest! {
    // the tail beyond the last point stays below one increment when each unit
    // step contracts the remainder by at least one half
    #[test]
    fn exponential_limits_are_recovered(e_inf in -1.0f64..1.0, c in 0.01f64..1.0, gamma in std::f64::consts::LN_2..2.0, sign in prop::bool::ANY) {
        let c = if sign { c } else { -c };
        let pts: Vec<(f64, f64)> = [3.0, 4.0, 5.0, 6.0].iter().map(|&p| (p, e_inf + c * (-gamma * p).exp())).collect();
        let r = extrapolate_exponential(&pts).unwrap();
        prop_assert!((r.limit - e_inf).abs() <= r.error + 1e-12);
        prop_assert!(r.monotone);
        let last = pts[3].1;
        prop_assert!((r.limit - last).abs() <= r.last_increment * (1.0 + 1e-12));
    }

    #[test]
    fn limits_stay_finite_and_flagged(values in prop::collection::vec(-1.0f64..1.0, 3..6)) {
        let pts: Vec<(f64, f64)> = values.iter().enumerate().map(|(k, &v)| (k as f64 + 1.0, v)).collect();
        if let Ok(r) = extrapolate_exponential(&pts) {
            prop_assert!(r.limit.is_finite() && r.error.is_finite());
            prop_assert_eq!(r.monotone_steps.len(), pts.len() - 1);
        }
    }

    #[test]
    fn linear_limits_of_lines_are_exact(a in -1.0f64..1.0, b in -5.0f64..5.0) {
        let pts: Vec<(f64, f64, f64)> = [0.01, 0.02, 0.04].iter().map(|&x| (x, a + b * x, 0.0)).collect();
        let f = linear_limit(&pts).unwrap();
        prop_assert!((f.value - a).abs() < 1e-12 && f.error < 1e-12);
    }
}
