//! Preconditioned limited-memory BFGS on the free nodal values.
//!
//! The line search evaluates the energy change along the search direction from
//! its exact expansion (quadratic part plus a cancellation-free quartic
//! increment), so Armijo decisions stay reliable down to gradient norms where
//! a difference of two full energy evaluations would be pure rounding noise.

use super::GlProblem;
use crate::sparse::{re_dot, Cholesky};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LbfgsOptions {
    /// Stop when `|g| <= tol * max(1, |E|)`.
    pub tol: f64,
    pub max_iter: usize,
    pub memory: usize,
    pub armijo: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 20_000, memory: 12, armijo: 1e-4 }
    }
}

#[derive(Debug, Clone)]
pub struct LbfgsOutcome {
    pub psi: Vec<Complex64>,
    pub energy: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// At least one accepted step, or stationary from the start.
    pub progressed: bool,
    pub trace: Vec<(usize, f64, f64)>,
}

pub(crate) fn run(problem: &GlProblem, precond: &Cholesky, mut psi: Vec<Complex64>, opts: &LbfgsOptions, keep_trace: bool) -> LbfgsOutcome {
    let free = &problem.form.free_nodes;
    let nf = free.len();
    let restrict = |v: &[Complex64]| -> Vec<Complex64> { free.iter().map(|&i| v[i]).collect() };
    let mut kpsi = problem.shifted.matvec(&psi);
    let mut energy = problem.energy(&psi);
    let mut g = restrict(&problem.gradient_from(&psi, &kpsi));
    let mut gnorm = re_dot(&g, &g).sqrt();
    let mut hist: VecDeque<(Vec<Complex64>, Vec<Complex64>, f64)> = VecDeque::new();
    let mut trace = Vec::new();
    let mut accepted = 0usize;
    let mut converged = false;
    let mut iterations = 0;
    let mut d_full = vec![Complex64::new(0.0, 0.0); psi.len()];
    while iterations < opts.max_iter {
        if keep_trace {
            trace.push((iterations, energy, gnorm));
        }
        if gnorm <= opts.tol * energy.abs().max(1.0) {
            converged = true;
            break;
        }
        iterations += 1;
        let mut d = direction(&g, &hist, precond);
        let mut slope = re_dot(&g, &d);
        if !(slope < 0.0) {
            hist.clear();
            d = steepest(&g, precond);
            slope = re_dot(&g, &d);
        }
        let mut step = None;
        for attempt in 0..2 {
            for (k, &i) in free.iter().enumerate() {
                d_full[i] = d[k];
            }
            let kd = problem.shifted.matvec(&d_full);
            let q1 = 2.0 * re_dot(&kpsi, &d_full);
            let q2 = re_dot(&d_full, &kd);
            let mut t = 1.0;
            for _ in 0..60 {
                let de = t * q1 + t * t * q2 + 0.5 * problem.mu * problem.quartic_increment(&psi, &d_full, t);
                if de <= opts.armijo * t * slope {
                    step = Some((t, de, kd));
                    break;
                }
                t *= 0.5;
            }
            if step.is_some() || attempt == 1 || hist.is_empty() {
                break;
            }
            hist.clear();
            d = steepest(&g, precond);
            slope = re_dot(&g, &d);
        }
        let Some((t, de, kd)) = step else {
            break;
        };
        accepted += 1;
        for (k, &i) in free.iter().enumerate() {
            psi[i] += d[k] * t;
        }
        for (a, b) in kpsi.iter_mut().zip(&kd) {
            *a += b * t;
        }
        energy += de;
        if accepted.is_multiple_of(100) {
            kpsi = problem.shifted.matvec(&psi);
            energy = problem.energy(&psi);
        }
        let g_new = restrict(&problem.gradient_from(&psi, &kpsi));
        let s: Vec<Complex64> = d.iter().map(|z| z * t).collect();
        let y: Vec<Complex64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = re_dot(&s, &y);
        if sy > 1e-14 * re_dot(&s, &s).sqrt() * re_dot(&y, &y).sqrt() {
            if hist.len() == opts.memory {
                hist.pop_front();
            }
            hist.push_back((s, y, 1.0 / sy));
        }
        g = g_new;
        gnorm = re_dot(&g, &g).sqrt();
    }
    energy = problem.energy(&psi);
    debug_assert_eq!(g.len(), nf);
    LbfgsOutcome { psi, energy, grad_norm: gnorm, iterations, converged, progressed: converged || accepted > 0, trace }
}

fn steepest(g: &[Complex64], precond: &Cholesky) -> Vec<Complex64> {
    precond.solve(g).into_iter().map(|z| -z).collect()
}

fn direction(g: &[Complex64], hist: &VecDeque<(Vec<Complex64>, Vec<Complex64>, f64)>, precond: &Cholesky) -> Vec<Complex64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(hist.len());
    for (s, y, rho) in hist.iter().rev() {
        let a = rho * re_dot(s, &q);
        for (qk, yk) in q.iter_mut().zip(y) {
            *qk -= yk * a;
        }
        alphas.push(a);
    }
    let mut r = precond.solve(&q);
    if let Some((s, y, _)) = hist.back() {
        let py = precond.solve(y);
        let gamma = re_dot(s, y) / re_dot(y, &py);
        r.iter_mut().for_each(|z| *z *= gamma);
    }
    for ((s, y, rho), a) in hist.iter().zip(alphas.into_iter().rev()) {
        let b = rho * re_dot(y, &r);
        for (rk, sk) in r.iter_mut().zip(s) {
            *rk += sk * (a - b);
        }
    }
    r.into_iter().map(|z| -z).collect()
}
