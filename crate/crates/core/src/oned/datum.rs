//! Boundary data built from 1D profiles: `f(t) exp(i alpha s + i s t / 2)`.
//!
//! In both leg charts the gauge `F = x^perp / 2` has components
//! `F.t = t / 2` and `F.n = -s / 2`, so this phase turns the magnetic kinetic
//! energy into `|f'|^2 + (t + alpha)^2 |f|^2`.

use super::{solve_interval_default, Grid1D, JointMinimum, OneDError, Profile1D, RightEnd};
use crate::geometry::{Point, SectorGeometry};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// A 1D profile transported to the plane through tubular coordinates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundaryDatum {
    pub geom: SectorGeometry,
    pub profile: Profile1D,
    pub alpha: f64,
    /// Largest admissible normal coordinate.
    pub t_max: f64,
    /// Phase jump of the raw trace at the bisectrix point of the inner
    /// boundary, spread linearly along the second-leg inner edge.
    #[serde(default)]
    pub inner_ramp: f64,
}

impl BoundaryDatum {
    pub fn new(geom: SectorGeometry, profile: Profile1D, alpha: f64, t_max: f64) -> Self {
        Self { geom, profile, alpha, t_max, inner_ramp: 0.0 }
    }

    /// Makes the trace continuous where the two leg charts meet on the inner
    /// boundary `t = t_max`: the jump (reduced to `(-pi, pi]`) is added on the
    /// second-leg inner edge and decreases linearly to zero at `s = L`, so the
    /// data on `|s| = L` are untouched.
    pub fn with_continuous_inner_trace(mut self) -> Self {
        let s_d = self.t_max / self.geom.half_tan();
        let jump = -2.0 * s_d * (self.alpha + 0.5 * self.t_max);
        let tau = std::f64::consts::TAU;
        self.inner_ramp = jump - tau * (jump / tau).round();
        self
    }

    fn ramp(&self, s: f64, t: f64) -> f64 {
        let (Some(l), true) = (self.geom.length, self.inner_ramp != 0.0 && s > 0.0) else {
            return 0.0;
        };
        if (t - self.t_max).abs() > 1e-9 * (1.0 + self.t_max) {
            return 0.0;
        }
        let s_d = self.t_max / self.geom.half_tan();
        self.inner_ramp * ((l - s) / (l - s_d)).clamp(0.0, 1.0)
    }

    pub fn eval_tubular(&self, s: f64, t: f64) -> Result<Complex64, OneDError> {
        let tol = 1e-9 * (1.0 + self.t_max);
        if !(t >= -tol && t <= self.t_max + tol) {
            return Err(OneDError::OutsideChart(format!("t = {t} outside [0, {}]", self.t_max)));
        }
        let t = t.clamp(0.0, self.t_max);
        let f = self.profile.eval(t);
        Ok(Complex64::from_polar(f, self.alpha * s + 0.5 * s * t + self.ramp(s, t)))
    }

    /// Evaluation at a Cartesian point; the chart is chosen by the side of the
    /// bisectrix, points on it use the first leg.
    pub fn eval(&self, x: Point) -> Result<Complex64, OneDError> {
        let c = self.geom.tubular_unchecked(x, self.geom.on_first_side(x));
        self.eval_tubular(c.s, c.t)
    }
}

/// `psi_0 = f_0(t) exp(i alpha_0 s + i s t / 2)` from the interval problem at
/// depth `ell = geom.depth`, with a continuous trace on the inner boundary.
pub fn boundary_datum_psi0(geom: &SectorGeometry, mu: f64) -> Result<BoundaryDatum, OneDError> {
    let ell = geom.require_depth().map_err(|e| OneDError::InvalidParameter(e.to_string()))?;
    let sol = solve_interval_default(mu, ell)?;
    Ok(datum_from_interval(geom, &sol))
}

pub fn datum_from_interval(geom: &SectorGeometry, sol: &JointMinimum) -> BoundaryDatum {
    BoundaryDatum::new(*geom, sol.profile.clone(), sol.alpha, sol.profile.grid.len()).with_continuous_inner_trace()
}

/// The truncated profile `g` together with its band limits.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WedgeProfile {
    pub profile: Profile1D,
    pub t1: f64,
    pub t2: f64,
}

/// `g = f_star` on `[0, t1]`, `g = f_star * chi` on `[t1, t2]`, `g = 0`
/// beyond, with `t1 = L tan(beta/2) / 3`, `t2 = 2 t1` and the C^1 cubic
/// step `chi(u) = 1 - 3u^2 + 2u^3`.
pub fn wedge_profile_g(star: &JointMinimum, length: f64, beta: f64) -> Result<WedgeProfile, OneDError> {
    let span = length * (0.5 * beta).tan();
    let (t1, t2) = (span / 3.0, 2.0 * span / 3.0);
    let dt = star.profile.grid.dt;
    if t1 < dt {
        return Err(OneDError::WedgeProfile(format!(
            "L = {length} too small: band width {t1} below the grid spacing {dt}"
        )));
    }
    let len = star.profile.grid.len().max(span);
    let intervals = (len / dt).ceil() as usize;
    let grid = Grid1D { dt, intervals, right: RightEnd::Dirichlet };
    let values = (0..grid.unknowns())
        .map(|i| {
            let t = grid.node(i);
            let f = star.profile.eval(t);
            if t <= t1 {
                f
            } else if t >= t2 {
                0.0
            } else {
                let u = (t - t1) / (t2 - t1);
                f * (1.0 - 3.0 * u * u + 2.0 * u * u * u)
            }
        })
        .collect();
    let profile = Profile1D { grid, values, alpha: star.alpha, mu: star.profile.mu, energy: f64::NAN };
    Ok(WedgeProfile { profile, t1, t2 })
}

/// `psi_g = g(t) exp(i alpha_star s + i s t / 2)` on the wedge.
pub fn boundary_datum_psig(geom: &SectorGeometry, star: &JointMinimum) -> Result<BoundaryDatum, OneDError> {
    let length = geom.require_length().map_err(|e| OneDError::InvalidParameter(e.to_string()))?;
    let g = wedge_profile_g(star, length, geom.beta)?;
    let t_max = length * geom.half_tan();
    Ok(BoundaryDatum::new(*geom, g.profile, star.alpha, t_max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oned::solve_halfline_star_with;
    use std::f64::consts::PI;

    fn star() -> JointMinimum {
        solve_halfline_star_with(0.8, 0.01, -0.768).unwrap()
    }

    #[test]
    fn phase_and_modulus() {
        let s = star();
        let geom = SectorGeometry::corner(PI / 2.0, 10.0, 3.0).unwrap();
        let d = BoundaryDatum::new(geom, s.profile.clone(), s.alpha, 3.0);
        let v0 = d.eval_tubular(0.0, 0.0).unwrap();
        assert!((v0.re - s.profile.values[0]).abs() < 1e-15 && v0.im.abs() < 1e-15);
        for (sv, tv) in [(-3.0, 0.5), (2.0, 1.5), (7.5, 2.9)] {
            let v = d.eval_tubular(sv, tv).unwrap();
            assert!((v.norm() - s.profile.eval(tv)).abs() < 1e-14);
        }
        let period = 2.0 * PI / s.alpha;
        let a = d.eval_tubular(period, 0.0).unwrap();
        assert!((a - v0).norm() < 1e-12);
        assert!(d.eval_tubular(1.0, 3.5).is_err());
    }

    #[test]
    fn cartesian_evaluation_uses_leg_charts() {
        let s = star();
        let geom = SectorGeometry::corner(PI / 2.0, 10.0, 3.0).unwrap();
        let d = BoundaryDatum::new(geom, s.profile.clone(), s.alpha, 3.0);
        // second leg is the y-axis: x = (t, s)
        let v = d.eval([1.0, 4.0]).unwrap();
        let w = d.eval_tubular(4.0, 1.0).unwrap();
        assert!((v - w).norm() < 1e-14);
    }

    #[test]
    fn inner_trace_is_continuous_at_the_bisectrix() {
        let s = solve_interval_default(0.8, 3.0).unwrap();
        for beta in [PI / 3.0, PI / 2.0, 0.8 * PI] {
            let geom = SectorGeometry::corner(beta, 12.0, 3.0).unwrap();
            let d = datum_from_interval(&geom, &s);
            let s_d = 3.0 / geom.half_tan();
            let eps = 1e-7;
            let left = d.eval(geom.tubular_to_cartesian(-s_d - eps, 3.0)).unwrap();
            let right = d.eval(geom.tubular_to_cartesian(s_d + eps, 3.0)).unwrap();
            assert!((left - right).norm() < 1e-5 * left.norm().max(1e-3), "beta {beta}: {left} vs {right}");
            let raw = BoundaryDatum::new(geom, s.profile.clone(), s.alpha, 3.0);
            assert!((raw.eval_tubular(-s_d, 3.0).unwrap() - raw.eval_tubular(s_d, 3.0).unwrap()).norm() > 1e-3 * left.norm());
        }
    }

    #[test]
    fn g_bands() {
        let s = star();
        let length = 9.0;
        let g = wedge_profile_g(&s, length, PI / 2.0).unwrap();
        assert!((g.t1 - 3.0).abs() < 1e-12);
        let grid = g.profile.grid;
        let mut prev = f64::INFINITY;
        for (i, &v) in g.profile.values.iter().enumerate() {
            let t = grid.node(i);
            if t <= g.t1 {
                assert_eq!(v, s.profile.eval(t));
            } else if t >= g.t2 {
                assert_eq!(v, 0.0);
            } else {
                assert!(v <= prev);
            }
            prev = v;
        }
        assert!(wedge_profile_g(&s, 0.01, PI / 2.0).is_err());
    }
}
