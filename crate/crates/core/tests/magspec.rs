use corner_gl::geometry::{mesh, BoundaryTag, MeshOptions, Polygon};
use corner_gl::magspec::*;
use corner_gl::oned::compute_theta0;
use num_complex::Complex64;
use proptest::prelude::*;
use std::f64::consts::PI;

/// Tensor Gauss-Legendre (5 points) on the unit square.
fn gauss_square(f: impl Fn(f64, f64) -> f64) -> f64 {
    let x = [
        (0.0, 128.0 / 225.0),
        (-(5.0 - 2.0 * (10.0f64 / 7.0).sqrt()).sqrt() / 3.0, (322.0 + 13.0 * 70f64.sqrt()) / 900.0),
        ((5.0 - 2.0 * (10.0f64 / 7.0).sqrt()).sqrt() / 3.0, (322.0 + 13.0 * 70f64.sqrt()) / 900.0),
        (-(5.0 + 2.0 * (10.0f64 / 7.0).sqrt()).sqrt() / 3.0, (322.0 - 13.0 * 70f64.sqrt()) / 900.0),
        ((5.0 + 2.0 * (10.0f64 / 7.0).sqrt()).sqrt() / 3.0, (322.0 - 13.0 * 70f64.sqrt()) / 900.0),
    ];
    let mut s = 0.0;
    for &(a, wa) in &x {
        for &(b, wb) in &x {
            s += wa * wb * f(0.5 * (a + 1.0), 0.5 * (b + 1.0));
        }
    }
    0.25 * s
}

/// Cell-centred finite differences with Peierls phases on `[0, R]^2`:
/// Neumann on the axes, Dirichlet on the far sides, Landau gauge
/// `A = (-y, 0)`. Lowest eigenvalue by inverse iteration with CG solves.
fn fd_quadrant_eigenvalue(r: f64, n: usize) -> f64 {
    let h = r / n as f64;
    let idx = |i: usize, j: usize| i * n + j;
    let apply = |u: &[Complex64], shift: f64| -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                let y = (j as f64 + 0.5) * h;
                let k = idx(i, j);
                let mut acc = u[k] * (-shift);
                // x-links carry exp(-i y h)
                let px = Complex64::from_polar(1.0, -y * h);
                if i + 1 < n {
                    acc += (u[k] - px * u[idx(i + 1, j)]) / (h * h);
                } else {
                    acc += 2.0 * u[k] / (h * h);
                }
                if i > 0 {
                    acc += (u[k] - px.conj() * u[idx(i - 1, j)]) / (h * h);
                }
                if j + 1 < n {
                    acc += (u[k] - u[idx(i, j + 1)]) / (h * h);
                } else {
                    acc += 2.0 * u[k] / (h * h);
                }
                if j > 0 {
                    acc += (u[k] - u[idx(i, j - 1)]) / (h * h);
                }
                out[k] = acc;
            }
        }
        out
    };
    let dotc = |a: &[Complex64], b: &[Complex64]| a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<Complex64>();
    let cg = |b: &[Complex64], shift: f64| -> Vec<Complex64> {
        let mut x = vec![Complex64::new(0.0, 0.0); b.len()];
        let mut r = b.to_vec();
        let mut p = r.clone();
        let mut rr = dotc(&r, &r).re;
        let b2 = rr;
        for _ in 0..20_000 {
            let ap = apply(&p, shift);
            let a = rr / dotc(&p, &ap).re;
            for k in 0..x.len() {
                x[k] += p[k] * a;
                r[k] -= ap[k] * a;
            }
            let rr_new = dotc(&r, &r).re;
            if rr_new < 1e-26 * b2 {
                break;
            }
            for k in 0..p.len() {
                p[k] = r[k] + p[k] * (rr_new / rr);
            }
            rr = rr_new;
        }
        x
    };
    let shift = 0.35;
    let mut u: Vec<Complex64> = (0..n * n).map(|k| Complex64::new(1.0 + 0.01 * (k % 7) as f64, 0.0)).collect();
    let mut lambda = 0.0;
    for _ in 0..200 {
        let norm = dotc(&u, &u).re.sqrt();
        u.iter_mut().for_each(|z| *z /= norm);
        let w = cg(&u, shift);
        let next = shift + 1.0 / dotc(&u, &w).re;
        let done = (next - lambda).abs() < 1e-11;
        lambda = next;
        u = w;
        if done {
            break;
        }
    }
    lambda
}

fn unit_square(h: f64) -> corner_gl::geometry::Mesh {
    mesh(&Polygon::unit_square(BoundaryTag::Outer), &MeshOptions::new(h)).unwrap()
}

#[test]
fn constant_field_matches_quadrature_oracle() {
    let oracle = gauss_square(|x, y| 0.25 * (x * x + y * y));
    assert!((oracle - 1.0 / 6.0).abs() < 1e-14);
    let m = unit_square(0.08);
    let one = vec![Complex64::new(1.0, 0.0); m.num_vertices()];
    let galerkin = assemble_with(&m, &[], FormKind::Galerkin, field).unwrap();
    assert!((galerkin.quadratic(&one) - oracle).abs() < 1e-12);
    let link = assemble(&m, &[]).unwrap();
    assert!((link.quadratic(&one) - oracle).abs() < 1e-3);
}

#[test]
fn galerkin_gauge_defect_vanishes_under_refinement() {
    let c = [0.9, -0.4];
    let defect = |h: f64| {
        let m = unit_square(h);
        let base = assemble_with(&m, &[], FormKind::Galerkin, field).unwrap();
        let shifted = assemble_with(&m, &[], FormKind::Galerkin, |x| {
            let f = field(x);
            [f[0] + c[0], f[1] + c[1]]
        })
        .unwrap();
        let psi: Vec<Complex64> = m.vertices.iter().map(|x| Complex64::new(1.0 + x[0] * x[1], x[0] - x[1])).collect();
        let gauged: Vec<Complex64> = m
            .vertices
            .iter()
            .zip(&psi)
            .map(|(x, z)| z * Complex64::from_polar(1.0, -(c[0] * x[0] + c[1] * x[1])))
            .collect();
        (base.quadratic(&psi) - shifted.quadratic(&gauged)).abs()
    };
    let (d1, d2) = (defect(0.2), defect(0.1));
    assert!(d2 < 0.5 * d1, "{d1} {d2}");
}

#[test]
fn quarter_plane_against_finite_difference_oracle() {
    let fd = |n: usize| fd_quadrant_eigenvalue(8.0, n);
    let (c, f) = (fd(80), fd(160));
    let oracle = f + (f - c) / 3.0;
    let mu = mu_beta(PI / 2.0, 8.0, 0.1, true).unwrap();
    assert!((mu.value - oracle).abs() < 0.01, "fem {} vs oracle {oracle}", mu.value);
    assert!((mu.value - 0.51).abs() < 0.01);
    assert!(mu.error < 0.01);
}

#[test]
fn ordering_below_threshold() {
    let theta0 = compute_theta0(1e-8).unwrap().theta0;
    let q = mu_beta(PI / 4.0, 8.0, 0.1, true).unwrap();
    let h = mu_beta(PI / 2.0, 8.0, 0.1, true).unwrap();
    let s = mu_beta(PI / 6.0, 8.0, 0.1, true).unwrap();
    assert!(q.value < h.value && h.value < theta0);
    assert!(s.value < theta0);
    for m in [&q, &h, &s] {
        check_extrapolation(m, theta0).unwrap();
        assert!(m.levels.iter().all(|l| l.2 > 0.0 && l.3 <= 1e-8));
    }
}

#[test]
fn truncation_sweep_is_non_increasing() {
    let opts = MuBetaOptions::default();
    let vals: Vec<f64> = [6.0, 9.0, 12.0].iter().map(|&r| truncated_eigenvalue(PI / 2.0, r, 0.1, &opts).unwrap().0).collect();
    assert!(vals[0] >= vals[1] && vals[1] >= vals[2], "{vals:?}");
}

#[test]
fn mesh_refinement_converges_at_second_order() {
    let opts = MuBetaOptions::default();
    let vals: Vec<f64> = [0.2, 0.1, 0.05].iter().map(|&h| truncated_eigenvalue(PI / 2.0, 6.0, h, &opts).unwrap().0).collect();
    let (d1, d2) = ((vals[0] - vals[1]).abs(), (vals[1] - vals[2]).abs());
    assert!(d1 >= 3.0 * d2, "{vals:?}");
}

#[test]
fn diamagnetic_inequality() {
    let m = truncated_mesh(PI / 2.0, 3.0, 0.1).unwrap();
    let form = assemble(&m, &[]).unwrap();
    for (k, psi) in random_cutoff_fields(&m, &[BoundaryTag::Artificial], 0.5, 10, 3).iter().enumerate() {
        let modulus: Vec<f64> = psi.iter().map(|z| z.norm()).collect();
        let q = form.quadratic(psi);
        let d = dirichlet_energy(&m, &modulus);
        assert!(q >= d - 1e-2 * form.mass_norm_sq(psi), "field {k}: {q} < {d}");
    }
}

#[test]
fn spectral_lower_bounds() {
    let theta0 = compute_theta0(1e-8).unwrap().theta0;
    let mu_half = mu_beta(PI / 2.0, 8.0, 0.1, true).unwrap().value;
    let inner = truncated_mesh(PI / 2.0, 2.0, 0.08).unwrap();
    let mut fields = random_cutoff_fields(&inner, &[BoundaryTag::Artificial], 0.5, 20, 11);
    let ground = lowest_eigenpair(&assemble(&inner, &[BoundaryTag::Artificial]).unwrap()).unwrap();
    fields.push(ground.vector.clone());
    let rep = form_lower_bound_check(&inner, LowerBound::Inner { mu_beta: mu_half }, &fields).unwrap();
    assert!(rep.pass, "{:?}", rep.min_quotient);
    assert_eq!(rep.quotients.len(), 21);

    let outer = annular_mesh(PI / 2.0, 3.0, 6.0, 0.1).unwrap();
    let mut fields = random_cutoff_fields(&outer, &[BoundaryTag::Artificial], 0.5, 10, 12);
    fields.push(lowest_eigenpair(&assemble(&outer, &[BoundaryTag::Artificial]).unwrap()).unwrap().vector);
    let rep = form_lower_bound_check(&outer, LowerBound::Outer { theta0 }, &fields).unwrap();
    assert!(rep.pass, "{:?}", rep.min_quotient);

    let mut fields = random_cutoff_fields(&outer, &BoundaryTag::ALL, 0.5, 10, 13);
    fields.push(lowest_eigenpair(&assemble(&outer, &BoundaryTag::ALL).unwrap()).unwrap().vector);
    let rep = form_lower_bound_check(&outer, LowerBound::Compact, &fields).unwrap();
    assert!(rep.pass, "{:?}", rep.min_quotient);

    // a field that does not vanish on the legs violates the compact hypothesis
    let bad = random_cutoff_fields(&outer, &[BoundaryTag::Artificial], 0.5, 1, 14);
    assert!(matches!(form_lower_bound_check(&outer, LowerBound::Compact, &bad), Err(MagSpecError::Hypothesis(_))));
}

#[test]
fn matrix_dump_has_coordinate_rows() {
    let form = assemble(&unit_square(0.5), &[]).unwrap();
    let text = matrix_to_text(&form.stiffness);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1 + form.stiffness.nnz());
    assert_eq!(lines[1].split_whitespace().count(), 4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn forms_are_hermitian_and_nonnegative(h in 0.15f64..0.5, seed in 0u64..1000, galerkin in any::<bool>()) {
        let m = unit_square(h);
        let kind = if galerkin { FormKind::Galerkin } else { FormKind::Link };
        let form = assemble_with(&m, &[], kind, field).unwrap();
        prop_assert!(form.stiffness.hermitian_defect() < 1e-14);
        for psi in random_cutoff_fields(&m, &[], 1.0, 3, seed) {
            prop_assert!(form.quadratic(&psi) >= 0.0);
            prop_assert!(form.mass_norm_sq(&psi) > 0.0);
        }
    }

    #[test]
    fn link_form_gauge_covariance(c0 in -2.0f64..2.0, c1 in -2.0f64..2.0) {
        let m = unit_square(0.3);
        let base = assemble(&m, &[]).unwrap();
        let shifted = assemble_with(&m, &[], FormKind::Link, |x| {
            let f = field(x);
            [f[0] + c0, f[1] + c1]
        }).unwrap();
        let psi = &random_cutoff_fields(&m, &[], 1.0, 1, 5)[0];
        let gauged: Vec<Complex64> = m.vertices.iter().zip(psi).map(|(x, z)| z * Complex64::from_polar(1.0, -(c0 * x[0] + c1 * x[1]))).collect();
        let q = base.quadratic(psi);
        prop_assert!((q - shifted.quadratic(&gauged)).abs() <= 1e-10 * q);
    }
}
