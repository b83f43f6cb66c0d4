//! One-dimensional effective problems: the de Gennes constant, the half-line
//! profile `(f_star, alpha_star)` and its interval counterpart `(f0, alpha0)`.
//!
//! All problems share a vertex-centred uniform grid on `[0, T]` with the
//! Neumann condition at `t = 0` realised by the trapezoid end weight (equivalent
//! to ghost-node reflection). The half-line is truncated with a Dirichlet node
//! at `T`, the interval `[0, ell]` carries Neumann conditions at both ends.

mod datum;
pub(crate) mod tridiag;

pub use datum::{boundary_datum_psi0, boundary_datum_psig, datum_from_interval, wedge_profile_g, BoundaryDatum, WedgeProfile};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default grid spacing shared by every 1D solve so that the half-line,
/// interval and threshold computations see the same discrete spectrum.
pub const DEFAULT_DT: f64 = 0.0025;

/// Bracket of the outer phase search.
pub const ALPHA_BRACKET: (f64, f64) = (-3.0, 1.0);

#[derive(Debug, Error)]
pub enum OneDError {
    #[error("invalid 1D parameter: {0}")]
    InvalidParameter(String),
    #[error("nonlinear 1D solve did not converge after {iterations} iterations (gradient {gradient:.3e})")]
    NonConvergence { iterations: usize, gradient: f64 },
    #[error("phase search bracket failure: {0}")]
    Bracket(String),
    #[error("evaluation outside the tubular chart: {0}")]
    OutsideChart(String),
    #[error("wedge profile: {0}")]
    WedgeProfile(String),
}

/// Boundary condition at the right end of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RightEnd {
    Dirichlet,
    Neumann,
}

/// Uniform grid `t_i = i * dt`, `i = 0..=intervals`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    pub dt: f64,
    pub intervals: usize,
    pub right: RightEnd,
}

impl Grid1D {
    pub fn new(len: f64, intervals: usize, right: RightEnd) -> Result<Self, OneDError> {
        if !(len > 0.0) || intervals < 2 {
            return Err(OneDError::InvalidParameter(format!(
                "grid needs positive length and at least 2 intervals (len={len}, n={intervals})"
            )));
        }
        Ok(Self { dt: len / intervals as f64, intervals, right })
    }

    /// Half-line truncation `T = max(15, |alpha| + 10)` at spacing `dt`.
    pub fn halfline(alpha: f64, dt: f64) -> Self {
        let len = halfline_length(alpha);
        let intervals = (len / dt).round() as usize;
        Self { dt: len / intervals as f64, intervals, right: RightEnd::Dirichlet }
    }

    /// Interval `[0, ell]` with Neumann ends, spacing as close to `dt` as possible.
    pub fn interval(ell: f64, dt: f64) -> Self {
        let intervals = ((ell / dt).round() as usize).max(2);
        Self { dt: ell / intervals as f64, intervals, right: RightEnd::Neumann }
    }

    pub fn len(&self) -> f64 {
        self.dt * self.intervals as f64
    }

    /// Number of unknowns (the Dirichlet node is eliminated).
    pub fn unknowns(&self) -> usize {
        match self.right {
            RightEnd::Dirichlet => self.intervals,
            RightEnd::Neumann => self.intervals + 1,
        }
    }

    pub fn node(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    /// Trapezoid quadrature weight of unknown `i`.
    pub fn weight(&self, i: usize) -> f64 {
        let last_neumann = self.right == RightEnd::Neumann && i == self.intervals;
        if i == 0 || last_neumann {
            0.5 * self.dt
        } else {
            self.dt
        }
    }

    fn weights(&self) -> Vec<f64> {
        (0..self.unknowns()).map(|i| self.weight(i)).collect()
    }

    /// Kinetic matrix of `sum (f_{i+1} - f_i)^2 / dt` as (diag, off).
    fn kinetic(&self) -> (Vec<f64>, Vec<f64>) {
        let m = self.unknowns();
        let inv = 1.0 / self.dt;
        let mut diag = vec![0.0; m];
        for e in 0..self.intervals {
            diag[e] += inv;
            if e + 1 < m {
                diag[e + 1] += inv;
            }
        }
        (diag, vec![-inv; m - 1])
    }
}

pub fn halfline_length(alpha: f64) -> f64 {
    15.0f64.max(alpha.abs() + 10.0)
}

/// Real non-negative profile on a [`Grid1D`] together with its phase.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Profile1D {
    pub grid: Grid1D,
    /// Values at the unknowns; the Dirichlet end (if any) is implicitly zero.
    pub values: Vec<f64>,
    pub alpha: f64,
    pub mu: f64,
    pub energy: f64,
}

impl Profile1D {
    fn zero(grid: Grid1D, alpha: f64, mu: f64) -> Self {
        Self { values: vec![0.0; grid.unknowns()], grid, alpha, mu, energy: 0.0 }
    }

    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let tail = match self.grid.right {
            RightEnd::Dirichlet => Some((self.grid.len(), 0.0)),
            RightEnd::Neumann => None,
        };
        self.values
            .iter()
            .enumerate()
            .map(|(i, &f)| (self.grid.node(i), f))
            .chain(tail)
    }

    /// Piecewise-linear evaluation; zero past a Dirichlet end.
    pub fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return self.values[0];
        }
        let x = t / self.grid.dt;
        let i = x.floor() as usize;
        let last = self.values.len() - 1;
        let at = |k: usize| -> f64 {
            if k <= last {
                self.values[k]
            } else {
                match self.grid.right {
                    RightEnd::Dirichlet => 0.0,
                    RightEnd::Neumann => self.values[last],
                }
            }
        };
        if i >= self.grid.intervals {
            return at(self.grid.intervals);
        }
        let frac = x - i as f64;
        (1.0 - frac) * at(i) + frac * at(i + 1)
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.values.iter().enumerate().map(|(i, f)| self.grid.weight(i) * f * f).sum()
    }

    pub fn l4_norm4(&self) -> f64 {
        self.values.iter().enumerate().map(|(i, f)| self.grid.weight(i) * f.powi(4)).sum()
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, f| m.max(f.abs()))
    }

    /// First-order phase condition `int (t + alpha) f^2 dt`.
    pub fn optimality_residual(&self) -> f64 {
        phase_residual(&self.grid, self.alpha, &self.values)
    }

    pub fn is_trivial(&self) -> bool {
        self.values.iter().all(|&f| f == 0.0)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,f\n");
        for (t, f) in self.nodes() {
            out.push_str(&format!("{t:.10e},{f:.17e}\n"));
        }
        out
    }
}

fn potential(grid: &Grid1D, alpha: f64) -> Vec<f64> {
    (0..grid.unknowns()).map(|i| (grid.node(i) + alpha).powi(2)).collect()
}

fn phase_residual(grid: &Grid1D, alpha: f64, f: &[f64]) -> f64 {
    f.iter().enumerate().map(|(i, v)| grid.weight(i) * (grid.node(i) + alpha) * v * v).sum()
}

/// Discrete energy of the 1D functional.
pub fn discrete_energy(grid: &Grid1D, mu: f64, alpha: f64, f: &[f64]) -> f64 {
    let m = grid.unknowns();
    let inv = 1.0 / grid.dt;
    let mut kinetic = 0.0;
    for e in 0..grid.intervals {
        let right = if e + 1 < m { f[e + 1] } else { 0.0 };
        kinetic += (right - f[e]).powi(2) * inv;
    }
    let mut rest = 0.0;
    for (i, &v) in f.iter().enumerate() {
        let w = grid.weight(i);
        let pot = (grid.node(i) + alpha).powi(2);
        rest += w * ((pot - mu) * v * v + 0.5 * mu * v.powi(4));
    }
    kinetic + rest
}

/// Lowest eigenpair of `-d^2/dt^2 + (t + alpha)^2` on a grid. The eigenvector
/// is non-negative and normalised in the discrete `L^2` norm.
pub fn linear_ground_state(grid: &Grid1D, alpha: f64) -> (f64, Profile1D) {
    let (k_diag, k_off) = grid.kinetic();
    let w = grid.weights();
    let v = potential(grid, alpha);
    let m = grid.unknowns();
    let diag: Vec<f64> = (0..m).map(|i| (k_diag[i] + w[i] * v[i]) / w[i]).collect();
    let off: Vec<f64> = (0..m - 1).map(|i| k_off[i] / (w[i] * w[i + 1]).sqrt()).collect();
    let lambda = tridiag::lowest_eigenvalue(&diag, &off);
    let y = tridiag::eigenvector(&diag, &off, lambda);
    let mut f: Vec<f64> = y.iter().zip(&w).map(|(y, w)| y / w.sqrt()).collect();
    let norm = f.iter().zip(&w).map(|(f, w)| w * f * f).sum::<f64>().sqrt();
    let sign = if f.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
    f.iter_mut().for_each(|x| *x *= sign / norm);
    let profile = Profile1D { grid: *grid, values: f, alpha, mu: 0.0, energy: lambda };
    (lambda, profile)
}

/// Lowest eigenvalue of the shifted harmonic oscillator on `[0, T]` with a
/// Neumann end at 0 and a Dirichlet end at `T`.
pub fn linear_ground_energy(alpha: f64, len: f64, n: usize) -> Result<(f64, Profile1D), OneDError> {
    if len < 10.0 + alpha.abs() - 1e-12 || n < 200 {
        return Err(OneDError::InvalidParameter(format!(
            "need T >= 10 + |alpha| and n >= 200 (T={len}, alpha={alpha}, n={n})"
        )));
    }
    let grid = Grid1D::new(len, n, RightEnd::Dirichlet)?;
    Ok(linear_ground_state(&grid, alpha))
}

/// The de Gennes constant together with its optimal phase and ground state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Theta0 {
    pub theta0: f64,
    pub alpha_opt: f64,
    pub psi0: Profile1D,
    pub psi0_l4_norm4: f64,
}

fn golden_section<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// `Theta0 = min_alpha lambda(alpha)` by golden-section search on the default grid.
pub fn compute_theta0(tol: f64) -> Result<Theta0, OneDError> {
    compute_theta0_with(tol, DEFAULT_DT)
}

pub fn compute_theta0_with(tol: f64, dt: f64) -> Result<Theta0, OneDError> {
    if !(tol >= 1e-8) {
        return Err(OneDError::InvalidParameter(format!("tol must be >= 1e-8, got {tol}")));
    }
    let lambda = |alpha: f64| linear_ground_state(&Grid1D::halfline(alpha, dt), alpha).0;
    let (a, b) = ALPHA_BRACKET;
    let (alpha_opt, theta0) = golden_section(lambda, a, b, tol);
    let edge = lambda(a).min(lambda(b));
    if !(theta0 < edge) || (alpha_opt - a).abs() < 10.0 * tol || (alpha_opt - b).abs() < 10.0 * tol {
        return Err(OneDError::Bracket(format!("minimum of lambda(alpha) at bracket edge ({alpha_opt})")));
    }
    let (_, psi0) = linear_ground_state(&Grid1D::halfline(alpha_opt, dt), alpha_opt);
    let psi0_l4_norm4 = psi0.l4_norm4();
    Ok(Theta0 { theta0, alpha_opt, psi0, psi0_l4_norm4 })
}

const NEWTON_MAX_ITER: usize = 200;

/// Minimiser of the 1D functional at fixed `alpha` on `grid`. Uses damped
/// Newton on the Euler-Lagrange equation; the zero profile is returned exactly
/// when `mu` does not exceed the linear ground energy at this phase.
pub fn minimize_fixed_alpha(
    grid: &Grid1D,
    mu: f64,
    alpha: f64,
    warm: Option<&[f64]>,
) -> Result<Profile1D, OneDError> {
    if !(mu > 0.0 && mu < 1.0) {
        return Err(OneDError::InvalidParameter(format!("mu must lie in (0, 1), got {mu}")));
    }
    let (lambda, psi) = linear_ground_state(grid, alpha);
    if mu <= lambda {
        return Ok(Profile1D::zero(*grid, alpha, mu));
    }
    let m = grid.unknowns();
    let w = grid.weights();
    let v = potential(grid, alpha);
    let (k_diag, k_off) = grid.kinetic();

    let energy = |f: &[f64]| discrete_energy(grid, mu, alpha, f);
    let amp = ((mu - lambda) / (mu * psi.l4_norm4())).sqrt();
    let cold: Vec<f64> = psi.values.iter().map(|p| amp * p).collect();
    let mut f = match warm {
        Some(x) if x.len() == m && energy(x) < energy(&cold) => x.to_vec(),
        _ => cold,
    };
    let mut e = energy(&f);
    let mut last_grad = f64::INFINITY;
    for iter in 0..NEWTON_MAX_ITER {
        let mut grad = vec![0.0; m];
        let mut h_diag = vec![0.0; m];
        for i in 0..m {
            let mut kf = k_diag[i] * f[i];
            if i > 0 {
                kf += k_off[i - 1] * f[i - 1];
            }
            if i + 1 < m {
                kf += k_off[i] * f[i + 1];
            }
            grad[i] = 2.0 * kf + 2.0 * w[i] * ((v[i] - mu) * f[i] + mu * f[i].powi(3));
            h_diag[i] = 2.0 * k_diag[i] + 2.0 * w[i] * (v[i] - mu + 3.0 * mu * f[i] * f[i]);
        }
        let h_off: Vec<f64> = k_off.iter().map(|o| 2.0 * o).collect();
        // strong-form residual in the weighted norm
        let gnorm = grad.iter().zip(&w).map(|(g, w)| g * g / w).sum::<f64>().sqrt();
        if gnorm < 1e-12 || (gnorm < 1e-9 && gnorm > 0.5 * last_grad) {
            last_grad = gnorm;
            break;
        }
        last_grad = gnorm;
        let neg: Vec<f64> = grad.iter().map(|g| -g).collect();
        // Levenberg shift until the Hessian is positive definite
        let mut step = None;
        for tau in [0.0, 1e-3, 1e-2, 1e-1, 1.0, 10.0] {
            let shifted: Vec<f64> = h_diag.iter().zip(&w).map(|(h, w)| h + 2.0 * tau * w).collect();
            if let Some(s) = tridiag::solve_spd(&shifted, &h_off, &neg) {
                step = Some(s);
                break;
            }
        }
        let step = step.unwrap_or_else(|| neg.iter().zip(&w).map(|(g, w)| 0.05 * g / w).collect());
        let slope: f64 = step.iter().zip(&grad).map(|(s, g)| s * g).sum();
        if gnorm < 1e-6 {
            // quadratic convergence region: energy decrease is below rounding
            f.iter_mut().zip(&step).for_each(|(a, b)| *a += b);
            e = energy(&f);
            continue;
        }
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = f.iter().zip(&step).map(|(a, b)| a + t * b).collect();
            let et = energy(&trial);
            if et <= e + 1e-4 * t * slope || (et <= e && t < 1e-3) {
                f = trial;
                e = et;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // no descent representable at double precision
            if gnorm < 1e-9 {
                break;
            }
            return Err(OneDError::NonConvergence { iterations: iter, gradient: gnorm });
        }
    }
    if last_grad >= 1e-9 {
        return Err(OneDError::NonConvergence { iterations: NEWTON_MAX_ITER, gradient: last_grad });
    }
    if f.iter().sum::<f64>() < 0.0 {
        f.iter_mut().for_each(|x| *x = -*x);
    }
    Ok(Profile1D { grid: *grid, values: f, alpha, mu, energy: e })
}

/// Half-line minimiser at fixed phase on `[0, T]` with `n` intervals.
pub fn solve_halfline(mu: f64, alpha: f64, len: f64, n: usize) -> Result<Profile1D, OneDError> {
    if len < 15.0 {
        return Err(OneDError::InvalidParameter(format!("half-line truncation must be >= 15, got {len}")));
    }
    let grid = Grid1D::new(len, n, RightEnd::Dirichlet)?;
    minimize_fixed_alpha(&grid, mu, alpha, None)
}

/// Result of a joint `(alpha, f)` minimisation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JointMinimum {
    pub energy: f64,
    pub profile: Profile1D,
    pub alpha: f64,
}

/// Joint minimisation over the phase with a grid built per phase value.
/// `mirror` is a lower phase bound at a reflection symmetry of the problem;
/// the window `{lambda < mu}` may legitimately reach it.
fn joint_minimum<G: Fn(f64) -> Grid1D>(mu: f64, make_grid: G, alpha_linear: f64, mirror: Option<f64>) -> Result<JointMinimum, OneDError> {
    let (a, b) = match mirror {
        Some(m) if m > ALPHA_BRACKET.0 => (m, ALPHA_BRACKET.1),
        _ => ALPHA_BRACKET,
    };
    let clipped = a != ALPHA_BRACKET.0;
    let lambda = |alpha: f64| linear_ground_state(&make_grid(alpha), alpha).0;
    let (alpha_min, lambda_min) = golden_section(lambda, a, b, 1e-7);
    if mu <= lambda_min {
        // trivial regime: the phase is undetermined, report the linear optimum
        let grid = make_grid(alpha_linear);
        let profile = Profile1D::zero(grid, alpha_linear, mu);
        return Ok(JointMinimum { energy: 0.0, profile, alpha: alpha_linear });
    }
    if (!clipped && lambda(a) <= mu) || lambda(b) <= mu {
        return Err(OneDError::Bracket(format!(
            "linear energy below mu = {mu} at the edge of the phase bracket [{a}, {b}]"
        )));
    }
    // nontrivial minimisers only exist where lambda(alpha) < mu
    let edge = |mut inside: f64, mut outside: f64| {
        for _ in 0..60 {
            let mid = 0.5 * (inside + outside);
            if lambda(mid) < mu {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        outside
    };
    let lo = if clipped && lambda(a) < mu { a } else { edge(alpha_min, a) };
    let hi = edge(alpha_min, b);

    let mut warm: Option<Vec<f64>> = None;
    let mut eval = |alpha: f64| -> Result<Profile1D, OneDError> {
        let grid = make_grid(alpha);
        let p = minimize_fixed_alpha(&grid, mu, alpha, warm.as_deref())?;
        if !p.is_trivial() && p.values.len() == grid.unknowns() {
            warm = Some(p.values.clone());
        }
        Ok(p)
    };
    let mut failure = None;
    let (alpha_g, e_g) = golden_section(
        |alpha| match eval(alpha) {
            Ok(p) => p.energy,
            Err(err) => {
                failure.get_or_insert(err);
                f64::INFINITY
            }
        },
        lo,
        hi,
        1e-7 * (hi - lo).max(1e-3),
    );
    if let Some(err) = failure {
        return Err(err);
    }
    if !(e_g < 0.0) {
        return Err(OneDError::Bracket(format!("no negative energy inside the window [{lo}, {hi}]")));
    }
    let (a, b) = (lo, hi);
    // polish: secant on r(alpha) = int (t + alpha) f_alpha^2, which is half of dE/dalpha
    let mut best = eval(alpha_g)?;
    let scale = best.l2_norm_sq();
    let mut x0 = alpha_g;
    let mut r0 = best.optimality_residual();
    let mut x1 = alpha_g + 1e-4;
    let mut p1 = eval(x1)?;
    let mut r1 = p1.optimality_residual();
    for _ in 0..40 {
        if r1.abs() < r0.abs() {
            best = p1.clone();
        }
        if best.optimality_residual().abs() <= 1e-13 * scale || r1 == r0 {
            break;
        }
        let x2 = x1 - r1 * (x1 - x0) / (r1 - r0);
        if !(x2 > a && x2 < b) {
            break;
        }
        x0 = x1;
        r0 = r1;
        x1 = x2;
        p1 = eval(x1)?;
        r1 = p1.optimality_residual();
    }
    if r1.abs() < best.optimality_residual().abs() {
        best = p1;
    }
    Ok(JointMinimum { energy: best.energy, alpha: best.alpha, profile: best })
}

/// `E^1D_star(mu)` with its minimising pair on the default grid.
pub fn solve_halfline_star(mu: f64) -> Result<JointMinimum, OneDError> {
    let theta = compute_theta0(1e-8)?;
    solve_halfline_star_with(mu, DEFAULT_DT, theta.alpha_opt)
}

pub fn solve_halfline_star_with(mu: f64, dt: f64, alpha_linear: f64) -> Result<JointMinimum, OneDError> {
    joint_minimum(mu, |alpha| Grid1D::halfline(alpha, dt), alpha_linear, None)
}

/// `E^1D_ell(mu)` with its minimising pair `(f0, alpha0)`.
pub fn solve_interval(mu: f64, ell: f64, n: usize) -> Result<JointMinimum, OneDError> {
    if ell < 2.0 {
        return Err(OneDError::InvalidParameter(format!("interval length must be >= 2, got {ell}")));
    }
    let grid = Grid1D::new(ell, n, RightEnd::Neumann)?;
    let theta = compute_theta0(1e-8)?;
    // t -> ell - t, alpha -> -ell - alpha maps the problem to itself; the
    // branch with alpha > -ell/2 is the one localized at t = 0
    joint_minimum(mu, |_| grid, theta.alpha_opt, Some(-0.5 * ell))
}

/// Interval solve on the default spacing.
pub fn solve_interval_default(mu: f64, ell: f64) -> Result<JointMinimum, OneDError> {
    let grid = Grid1D::interval(ell, DEFAULT_DT);
    solve_interval(mu, ell, grid.intervals)
}
