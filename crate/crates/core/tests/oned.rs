use corner_gl::oned::*;
use proptest::prelude::*;

/// Shooting oracle for the lowest eigenvalue of -u'' + (t + alpha)^2 u with
/// u'(0) = 0: the ground energy is the smallest lambda at which the solution
/// of the initial value problem u(0) = 1 changes sign before `t_end`.
fn shooting_lambda(alpha: f64, t_end: f64) -> f64 {
    let crosses = |lambda: f64| -> bool {
        let steps = 40_000;
        let h = t_end / steps as f64;
        let rhs = |t: f64, u: f64, v: f64| (v, ((t + alpha).powi(2) - lambda) * u);
        let (mut u, mut v, mut t) = (1.0f64, 0.0f64, 0.0f64);
        for _ in 0..steps {
            let (k1u, k1v) = rhs(t, u, v);
            let (k2u, k2v) = rhs(t + 0.5 * h, u + 0.5 * h * k1u, v + 0.5 * h * k1v);
            let (k3u, k3v) = rhs(t + 0.5 * h, u + 0.5 * h * k2u, v + 0.5 * h * k2v);
            let (k4u, k4v) = rhs(t + h, u + h * k3u, v + h * k3v);
            u += h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
            v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
            t += h;
            if u < 0.0 {
                return true;
            }
            if u.abs() > 1e30 {
                return false;
            }
        }
        false
    };
    let (mut lo, mut hi) = (0.0, 3.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if crosses(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn oracle_theta0() -> (f64, f64) {
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (-1.2, -0.4);
    for _ in 0..40 {
        let c = b - phi * (b - a);
        let d = a + phi * (b - a);
        if shooting_lambda(c, 12.0) < shooting_lambda(d, 12.0) {
            b = d;
        } else {
            a = c;
        }
    }
    let alpha = 0.5 * (a + b);
    (shooting_lambda(alpha, 12.0), alpha)
}

#[test]
fn linear_energy_matches_shooting_oracle() {
    for alpha in [-2.0, -0.768, 0.0, 0.5] {
        let len = halfline_length(alpha);
        let (lambda, psi) = linear_ground_energy(alpha, len, (len / 0.0025) as usize).unwrap();
        let oracle = shooting_lambda(alpha, 12.0);
        assert!((lambda - oracle).abs() < 2e-6, "alpha {alpha}: {lambda} vs {oracle}");
        assert!(psi.values.iter().all(|&v| v >= 0.0));
        assert!((psi.l2_norm_sq() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn harmonic_limits() {
    let (l0, _) = linear_ground_energy(0.0, 15.0, 6000).unwrap();
    assert!((l0 - 1.0).abs() < 1e-6);
    let (l5, _) = linear_ground_energy(-5.0, 25.0, 8000).unwrap();
    assert!((l5 - 1.0).abs() < 1e-4);
}

#[test]
fn theta0_against_oracle() {
    let th = compute_theta0(1e-6).unwrap();
    let (oracle, oracle_alpha) = oracle_theta0();
    assert!(th.theta0 > 0.0 && th.theta0 < 1.0);
    assert!((th.theta0 - 0.5901).abs() < 1e-3);
    assert!((th.theta0 - oracle).abs() < 2e-6, "{} vs {oracle}", th.theta0);
    assert!((th.alpha_opt - oracle_alpha).abs() < 1e-3);
    assert!((th.alpha_opt + th.theta0.sqrt()).abs() < 1e-3);
    assert!(th.psi0_l4_norm4 > 0.0);
    assert!(compute_theta0(1e-9).is_err());
}

#[test]
fn halfline_trivial_below_threshold() {
    for alpha in [-2.0, -0.77, 0.3] {
        let p = solve_halfline(0.5, alpha, 15.0, 6000).unwrap();
        assert!(p.is_trivial());
        assert_eq!(p.energy, 0.0);
    }
    assert!(solve_halfline(0.5, 0.0, 10.0, 6000).is_err());
    assert!(solve_halfline(1.2, 0.0, 15.0, 6000).is_err());
}

#[test]
fn halfline_nontrivial_and_resolution_oracle() {
    let star = solve_halfline_star(0.7).unwrap();
    let coarse = solve_halfline(0.7, star.alpha, 15.0, 6000).unwrap();
    let fine = solve_halfline(0.7, star.alpha, 15.0, 24000).unwrap();
    assert!(coarse.energy < 0.0);
    assert!(coarse.sup() <= 1.0);
    let rel = ((coarse.energy - fine.energy) / fine.energy).abs();
    assert!(rel < 1e-5, "relative resolution error {rel}");
    // virial identity of the 1D functional
    let virial = coarse.energy + 0.5 * 0.7 * coarse.l4_norm4();
    assert!(virial.abs() < 1e-12);
    // Gaussian envelope with C = 2
    for (t, f) in coarse.nodes() {
        assert!(f <= 2.0 * (-0.5 * (t + star.alpha).powi(2)).exp() + 1e-14, "envelope at t = {t}");
    }
}

#[test]
fn star_optimality_and_quadratic_vanishing() {
    let th = compute_theta0(1e-8).unwrap();
    let s = solve_halfline_star(0.8).unwrap();
    assert!(s.profile.optimality_residual().abs() <= 1e-6 * s.profile.l2_norm_sq());
    assert!(s.energy < 0.0);
    // Bifurcation from the linear ground state: f = c psi0 with
    // c^2 = delta / (Theta0 |psi0|_4^4) gives E ~ -delta^2 / (2 Theta0 |psi0|_4^4).
    let mut ratios = Vec::new();
    for delta in [0.04, 0.02, 0.01] {
        let s = solve_halfline_star(th.theta0 + delta).unwrap();
        let ratio = s.energy * 2.0 * th.theta0 * th.psi0_l4_norm4 / (-delta * delta);
        ratios.push(ratio);
        assert!(s.profile.l2_norm_sq() <= 3.0 * delta / (th.theta0 * th.psi0_l4_norm4));
    }
    assert!((ratios[2] - 1.0).abs() < 0.05, "ratios {ratios:?}");
    // Richardson-style check: the ratio converges monotonically towards 1
    assert!((ratios[2] - 1.0).abs() < (ratios[0] - 1.0).abs());
}

#[test]
fn parameters_at_and_below_threshold_are_trivial() {
    let th = compute_theta0(1e-8).unwrap();
    for mu in [0.3, 0.5, th.theta0] {
        let s = solve_halfline_star(mu).unwrap();
        assert_eq!(s.energy, 0.0);
        assert!(s.profile.sup() <= 1e-6);
    }
}

#[test]
fn interval_matches_halfline() {
    let star = solve_halfline_star(0.8).unwrap();
    let int = solve_interval_default(0.8, 12.0).unwrap();
    assert!((int.energy - star.energy).abs() <= 1e-6);
    assert!((int.alpha - star.alpha).abs() <= 1e-6);
    let sup = int
        .profile
        .nodes()
        .map(|(t, f)| (f - star.profile.eval(t)).abs())
        .fold(0.0f64, f64::max);
    assert!(sup <= 1e-5);
    let zero = solve_interval_default(0.5, 10.0).unwrap();
    assert!(zero.energy.abs() <= 1e-8 && zero.profile.sup() <= 1e-8);
    assert!(solve_interval(0.8, 1.5, 600).is_err());
}

#[test]
fn interval_error_decays_superpolynomially() {
    let star = solve_halfline_star(0.8).unwrap();
    let mut errors = Vec::new();
    for ell in [6.0, 8.0, 10.0, 12.0] {
        let e = solve_interval_default(0.8, ell).unwrap().energy;
        let err = (e - star.energy).abs();
        assert!(err <= 1e-10f64.max((-ell * ell / 8.0).exp()), "ell {ell}: {err}");
        errors.push(err);
    }
    // below the rounding floor the sequence is flat; above it, it must drop
    for w in errors.windows(2) {
        assert!(w[1] <= w[0].max(1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn linear_energy_bounded_below_by_theta0(alpha in -3.0f64..1.0) {
        let th = compute_theta0_with(1e-8, 0.01).unwrap();
        let (lambda, _) = linear_ground_state(&Grid1D::halfline(alpha, 0.01), alpha);
        prop_assert!(lambda >= th.theta0 - 1e-12);
    }

    #[test]
    fn minimisers_respect_max_principle(mu in 0.05f64..0.99, alpha in -2.0f64..0.0) {
        let grid = Grid1D::halfline(alpha, 0.02);
        let p = minimize_fixed_alpha(&grid, mu, alpha, None).unwrap();
        prop_assert!(p.sup() <= 1.0);
        prop_assert!(p.values.iter().all(|&v| v >= 0.0));
        prop_assert!(p.energy <= 0.0);
    }
}
