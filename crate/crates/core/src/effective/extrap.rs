//! Limits of convergent sequences: `E(p) = E_inf + c exp(-gamma p)` in the
//! truncation parameter, and linear fits in `mu - Theta0`.

use serde::{Deserialize, Serialize};

use super::EffError;

/// Increments below this (relative to the values) count as no change when
/// judging monotonicity.
const FLAT: f64 = 1e-12;

/// Growing increments are only treated as divergence above this fraction of
/// the values; smaller wiggles are discretization noise.
const NOISE: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtrapolationReport {
    /// `(parameter, energy)` in increasing parameter order.
    pub sequence: Vec<(f64, f64)>,
    pub limit: f64,
    pub error: f64,
    pub fit_residual: f64,
    pub last_increment: f64,
    /// Fitted decay rate of the exponential model.
    pub rate: f64,
    /// `E[k+1] <= E[k]` for every step.
    pub monotone_steps: Vec<bool>,
    pub monotone: bool,
}

impl ExtrapolationReport {
    pub fn is_nonincreasing(&self) -> bool {
        self.monotone_steps.iter().all(|&b| b)
    }
}

fn scale(values: &[f64]) -> f64 {
    values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300)
}

/// Least-squares `(E_inf, c)` for a fixed rate, with the exponential
/// normalized at the last parameter. Returns the max abs residual as well.
fn linear_part(p: &[f64], e: &[f64], gamma: f64) -> (f64, f64, f64) {
    let last = *p.last().unwrap();
    let basis: Vec<f64> = p.iter().map(|&x| (-gamma * (x - last)).exp()).collect();
    let n = p.len() as f64;
    let (sb, se) = (basis.iter().sum::<f64>(), e.iter().sum::<f64>());
    let sbb: f64 = basis.iter().map(|b| b * b).sum();
    let sbe: f64 = basis.iter().zip(e).map(|(b, y)| b * y).sum();
    let det = n * sbb - sb * sb;
    let (a, c) = if det.abs() <= 1e-300 { (se / n, 0.0) } else { ((sbb * se - sb * sbe) / det, (n * sbe - sb * se) / det) };
    let res = basis.iter().zip(e).map(|(b, y)| (a + c * b - y).abs()).fold(0.0, f64::max);
    (a, c, res)
}

/// Exponential-model extrapolation of a sequence with at least 3 points.
/// The error bar is the larger of the max fit residual and the last increment.
/// For a monotone sequence the limit is kept within one last increment of the
/// final value; sequences whose increments grow (beyond the noise level) are
/// refused.
pub fn extrapolate_exponential(points: &[(f64, f64)]) -> Result<ExtrapolationReport, EffError> {
    if points.len() < 3 {
        return Err(EffError::InsufficientPoints(format!("exponential fit needs 3 points, got {}", points.len())));
    }
    let mut seq = points.to_vec();
    seq.sort_by(|a, b| a.0.total_cmp(&b.0));
    if seq.iter().any(|(p, e)| !p.is_finite() || !e.is_finite()) {
        return Err(EffError::Diverging("non-finite entries in the sequence".into()));
    }
    let p: Vec<f64> = seq.iter().map(|x| x.0).collect();
    let e: Vec<f64> = seq.iter().map(|x| x.1).collect();
    let n = e.len();
    let tol = FLAT * scale(&e);
    let d: Vec<f64> = e.windows(2).map(|w| w[1] - w[0]).collect();
    let monotone_steps: Vec<bool> = d.iter().map(|&x| x <= 0.0).collect();
    let monotone = d.iter().all(|&x| x <= tol) || d.iter().all(|&x| x >= -tol);
    let last_increment = d[n - 2].abs();
    let prev = d[n - 3].abs();
    if last_increment > NOISE * scale(&e) && last_increment > 1.1 * prev * (p[n - 1] - p[n - 2]) / (p[n - 2] - p[n - 3]) {
        return Err(EffError::Diverging(format!(
            "increments grow: |dE| = {prev:e} then {last_increment:e} along {p:?}"
        )));
    }
    let span = (p[n - 1] - p[0]).max(1e-300);
    // profile the residual over the rate on a log grid, then golden-section
    let grid: Vec<f64> = (0..=120).map(|k| 1e-2 / span * 10f64.powf(k as f64 / 30.0)).collect();
    let scored: Vec<(f64, f64)> = grid.iter().map(|&g| (g, linear_part(&p, &e, g).2)).collect();
    let k = (0..scored.len()).min_by(|&i, &j| scored[i].1.total_cmp(&scored[j].1)).unwrap();
    let (mut lo, mut hi) = (grid[k.saturating_sub(1)], grid[(k + 1).min(grid.len() - 1)]);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let a = hi - phi * (hi - lo);
        let b = lo + phi * (hi - lo);
        if linear_part(&p, &e, a).2 <= linear_part(&p, &e, b).2 {
            hi = b;
        } else {
            lo = a;
        }
    }
    let rate = 0.5 * (lo + hi);
    let (mut limit, _, fit_residual) = linear_part(&p, &e, rate);
    if !limit.is_finite() {
        return Err(EffError::Diverging(format!("fit produced a non-finite limit for {seq:?}")));
    }
    if monotone {
        let last = e[n - 1];
        limit = limit.clamp(last - last_increment, last + last_increment);
    }
    let error = fit_residual.max(last_increment);
    Ok(ExtrapolationReport { sequence: seq, limit, error, fit_residual, last_increment, rate, monotone_steps, monotone })
}

/// Value at `x = 0` of a linear least-squares fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearLimit {
    /// `(x, value, error)` of the fitted points.
    pub points: Vec<(f64, f64, f64)>,
    pub value: f64,
    pub slope: f64,
    pub fit_residual: f64,
    /// Distance to the intercept of the least-squares quadratic (zero below
    /// 3 points): the size of the leading term the linear model leaves out.
    pub model_error: f64,
    /// Largest constituent error bar plus the larger of the fit residual and
    /// the model error.
    pub error: f64,
}

/// Intercept of the least-squares quadratic.
fn quadratic_intercept(points: &[(f64, f64, f64)]) -> f64 {
    let mut m = [[0.0f64; 3]; 3];
    let mut r = [0.0f64; 3];
    for p in points {
        let pw = [1.0, p.0, p.0 * p.0];
        for i in 0..3 {
            r[i] += pw[i] * p.1;
            for j in 0..3 {
                m[i][j] += pw[i] * pw[j];
            }
        }
    }
    let det = |a: &[[f64; 3]; 3]| {
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    };
    let mut a0 = m;
    for i in 0..3 {
        a0[i][0] = r[i];
    }
    det(&a0) / det(&m)
}

pub fn linear_limit(points: &[(f64, f64, f64)]) -> Result<LinearLimit, EffError> {
    if points.len() < 2 {
        return Err(EffError::InsufficientPoints(format!("insufficient points for limit fit: {} given, need 2", points.len())));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(EffError::InsufficientPoints("insufficient points for limit fit: abscissae coincide".into()));
    }
    let slope = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx;
    let value = my - slope * mx;
    let fit_residual = points.iter().map(|p| (value + slope * p.0 - p.1).abs()).fold(0.0, f64::max);
    let worst = points.iter().map(|p| p.2).fold(0.0, f64::max);
    let distinct = {
        let mut xs: Vec<f64> = points.iter().map(|p| p.0).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        xs.len()
    };
    let model_error = if distinct >= 3 { (quadratic_intercept(points) - value).abs() } else { 0.0 };
    let model_error = if model_error.is_finite() { model_error } else { 0.0 };
    Ok(LinearLimit { points: points.to_vec(), value, slope, fit_residual, model_error, error: worst + fit_residual.max(model_error) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_exponential_is_recovered() {
        let pts: Vec<(f64, f64)> = [3.0, 4.0, 5.0, 6.0].iter().map(|&l| (l, -0.2 + 0.5 * (-1.3f64 * l).exp())).collect();
        let r = extrapolate_exponential(&pts).unwrap();
        assert!((r.rate - 1.3).abs() < 1e-4, "{r:?}");
        assert!((r.limit + 0.2).abs() < 1e-8);
        assert!(r.fit_residual < 1e-9);
        assert!(r.is_nonincreasing() && r.monotone);
        assert!((r.error - r.last_increment).abs() < 1e-15);
    }

    #[test]
    fn limit_stays_within_one_increment() {
        let r = extrapolate_exponential(&[(1.0, 1.0), (2.0, 0.5), (3.0, 0.26)]).unwrap();
        assert!((r.limit - r.sequence[2].1).abs() <= r.last_increment + 1e-15);
        assert!(!r.is_nonincreasing() || r.limit <= 0.26);
    }

    #[test]
    fn growing_increments_are_refused() {
        assert!(matches!(extrapolate_exponential(&[(1.0, 0.0), (2.0, -1.0), (3.0, -3.0)]), Err(EffError::Diverging(_))));
        assert!(matches!(extrapolate_exponential(&[(1.0, 0.0), (2.0, -1.0)]), Err(EffError::InsufficientPoints(_))));
    }

    #[test]
    fn constant_sequence() {
        let r = extrapolate_exponential(&[(1.0, -0.5), (2.0, -0.5), (3.0, -0.5)]).unwrap();
        assert_eq!(r.limit, -0.5);
        assert_eq!(r.error, 0.0);
    }

    #[test]
    fn linear_fit() {
        let f = linear_limit(&[(0.01, -0.1 - 0.02, 1e-3), (0.02, -0.1 - 0.04, 2e-3), (0.04, -0.1 - 0.08, 1e-3)]).unwrap();
        assert!((f.value + 0.1).abs() < 1e-14 && (f.slope + 2.0).abs() < 1e-12);
        assert!(f.model_error < 1e-12);
        assert!((f.error - 2e-3).abs() < 1e-12);
        let q = linear_limit(&[(1.0, 1.0, 0.0), (2.0, 4.0, 0.0), (3.0, 9.0, 0.0)]).unwrap();
        assert!((q.value + 10.0 / 3.0).abs() < 1e-12, "{q:?}");
        assert!((q.model_error - 10.0 / 3.0).abs() < 1e-9);
        assert!((q.error - q.model_error.max(q.fit_residual)).abs() < 1e-15);
        assert!(matches!(linear_limit(&[(0.01, 1.0, 0.0)]), Err(EffError::InsufficientPoints(_))));
    }
}
