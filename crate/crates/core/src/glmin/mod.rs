//! Minimization of `int |(grad + iF) psi|^2 - mu |psi|^2 + mu |psi|^4 / 2`
//! over P1 fields with prescribed values on Dirichlet nodes and natural
//! conditions elsewhere.

mod lbfgs;

pub use lbfgs::{LbfgsOptions, LbfgsOutcome};

use crate::geometry::{BoundaryTag, Mesh, Point};
use crate::magspec::{assemble_with, field, lowest_eigenpair_with, FormKind, LanczosOptions, MagSpecError, MagneticForm};
use crate::par;
use crate::sparse::{Cholesky, CsrMatrix};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GlError {
    #[error(transparent)]
    Form(#[from] MagSpecError),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("boundary data: {0}")]
    Data(String),
    #[error("all starts failed to make line-search progress: {0}")]
    NoProgress(String),
    #[error("insufficient dynamic range for the decay fit: {0}")]
    InsufficientRange(String),
}

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Nodal order parameter with its solver diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexField {
    pub values: Vec<Complex64>,
    pub mesh_hash: String,
    pub mu: f64,
    pub energy: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Which initialization produced this field.
    pub start: String,
}

impl ComplexField {
    pub fn sup(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn to_csv(&self, mesh: &Mesh) -> String {
        let mut out = String::from("x,y,re,im,abs\n");
        for (x, z) in mesh.vertices.iter().zip(&self.values) {
            let _ = writeln!(out, "{},{},{},{},{}", x[0], x[1], z.re, z.im, z.norm());
        }
        out
    }
}

/// The discrete energy functional on one mesh.
pub struct GlProblem<'a> {
    pub mesh: &'a Mesh,
    pub form: MagneticForm,
    pub mu: f64,
    /// Full nodal vector holding the prescribed values on constrained nodes.
    pub data: Vec<Complex64>,
    /// Terms `(a, b, w)` of `int |psi|^4 = sum w |(psi_a + psi_b) / 2|^4`: edge
    /// midpoints for the Galerkin form, vertices (`a == b`) for the link form.
    quartic: Vec<(usize, usize, f64)>,
    /// `A - mu M`.
    shifted: CsrMatrix,
}

impl<'a> GlProblem<'a> {
    pub fn new<D>(mesh: &'a Mesh, mu: f64, dirichlet: &[BoundaryTag], data: D) -> Result<Self, GlError>
    where
        D: Fn(Point) -> Result<Complex64, String>,
    {
        Self::with_kind(mesh, mu, dirichlet, data, FormKind::default())
    }

    pub fn with_kind<D>(mesh: &'a Mesh, mu: f64, dirichlet: &[BoundaryTag], data: D, kind: FormKind) -> Result<Self, GlError>
    where
        D: Fn(Point) -> Result<Complex64, String>,
    {
        if !(mu > 0.0 && mu < 1.0) {
            return Err(GlError::InvalidParameter(format!("mu must lie in (0, 1), got {mu}")));
        }
        let form = assemble_with(mesh, dirichlet, kind, field)?;
        let mut values = vec![ZERO; mesh.num_vertices()];
        for i in 0..mesh.num_vertices() {
            if form.constrained[i] {
                values[i] = data(mesh.vertices[i]).map_err(|e| GlError::Data(format!("node {i} at {:?}: {e}", mesh.vertices[i])))?;
            }
        }
        let mut edges = BTreeMap::new();
        for e in (0..mesh.num_triangles()).filter(|_| kind == FormKind::Galerkin) {
            let tri = mesh.triangles[e];
            let w = mesh.signed_area(e).abs() / 3.0;
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                *edges.entry((a.min(b), a.max(b))).or_insert(0.0) += w;
            }
        }
        if kind == FormKind::Link {
            for e in 0..mesh.num_triangles() {
                let w = mesh.signed_area(e).abs() / 3.0;
                for &i in &mesh.triangles[e] {
                    *edges.entry((i, i)).or_insert(0.0) += w;
                }
            }
        }
        let quartic = edges.into_iter().map(|((a, b), w)| (a, b, w)).collect();
        let shifted = form.stiffness.add_scaled(-mu, &form.mass);
        Ok(Self { mesh, form, mu, data: values, quartic, shifted })
    }

    /// Zero data on the given tags.
    pub fn homogeneous(mesh: &'a Mesh, mu: f64, dirichlet: &[BoundaryTag]) -> Result<Self, GlError> {
        Self::new(mesh, mu, dirichlet, |_| Ok(ZERO))
    }

    pub fn has_zero_data(&self) -> bool {
        self.data.iter().all(|z| *z == ZERO)
    }

    /// `int |psi|^4` with the quadrature matching the mass matrix.
    pub fn l4_norm4(&self, psi: &[Complex64]) -> f64 {
        par::sum_range(self.quartic.len(), |k| {
            let (a, b, w) = self.quartic[k];
            w * (0.5 * (psi[a] + psi[b])).norm_sqr().powi(2)
        })
    }

    /// `int |x|^2 |psi|^4` with the same rule.
    pub fn moment(&self, psi: &[Complex64]) -> f64 {
        let v = &self.mesh.vertices;
        par::sum_range(self.quartic.len(), |k| {
            let (a, b, w) = self.quartic[k];
            let m = [0.5 * (v[a][0] + v[b][0]), 0.5 * (v[a][1] + v[b][1])];
            w * (m[0] * m[0] + m[1] * m[1]) * (0.5 * (psi[a] + psi[b])).norm_sqr().powi(2)
        })
    }

    pub fn l2_norm_sq(&self, psi: &[Complex64]) -> f64 {
        self.form.mass_norm_sq(psi)
    }

    pub fn energy(&self, psi: &[Complex64]) -> f64 {
        self.shifted.form(psi) + 0.5 * self.mu * self.l4_norm4(psi)
    }

    /// Real gradient on all nodes: `dE = Re <g, dpsi>`.
    pub fn gradient(&self, psi: &[Complex64]) -> Vec<Complex64> {
        let kpsi = self.shifted.matvec(psi);
        self.gradient_from(psi, &kpsi)
    }

    fn gradient_from(&self, psi: &[Complex64], kpsi: &[Complex64]) -> Vec<Complex64> {
        let mut g: Vec<Complex64> = kpsi.iter().map(|z| z * 2.0).collect();
        for &(a, b, w) in &self.quartic {
            let m = 0.5 * (psi[a] + psi[b]);
            let c = m * (self.mu * w * m.norm_sqr());
            g[a] += c;
            g[b] += c;
        }
        g
    }

    /// Quartic increment `Q(psi + t d) - Q(psi)` without cancellation.
    fn quartic_increment(&self, psi: &[Complex64], d: &[Complex64], t: f64) -> f64 {
        par::sum_range(self.quartic.len(), |k| {
            let (a, b, w) = self.quartic[k];
            let m = 0.5 * (psi[a] + psi[b]);
            let dm = 0.5 * (d[a] + d[b]);
            let m2 = m.norm_sqr();
            let inc = 2.0 * t * (m.conj() * dm).re + t * t * dm.norm_sqr();
            w * inc * (2.0 * m2 + inc)
        })
    }

    pub fn free_gradient_norm(&self, g: &[Complex64]) -> f64 {
        self.form.free_nodes.iter().map(|&i| g[i].norm_sqr()).sum::<f64>().sqrt()
    }

    /// Stationarity diagnostics of a field.
    pub fn virial(&self, psi: &[Complex64]) -> Virial {
        let g = self.gradient(psi);
        let energy = self.energy(psi);
        let l4 = self.l4_norm4(psi);
        let flux = 0.5
            * (0..psi.len())
                .filter(|&i| self.form.constrained[i])
                .map(|i| (g[i].conj() * psi[i]).re)
                .sum::<f64>();
        let raw = energy + 0.5 * self.mu * l4;
        Virial { energy, l4_norm4: l4, flux, raw, defect: raw - flux }
    }

    /// Magnetic harmonic extension of the Dirichlet data.
    pub fn lifting(&self) -> Result<Vec<Complex64>, GlError> {
        let mut psi = self.data.clone();
        if self.has_zero_data() {
            return Ok(psi);
        }
        let (a, _) = self.form.free_pencil();
        let ad = self.form.stiffness.matvec(&self.data);
        let rhs: Vec<Complex64> = self.form.free_nodes.iter().map(|&i| -ad[i]).collect();
        // ad on free rows equals A_fD psi_D because data vanishes on free nodes
        let x = Cholesky::new(&a).map_err(MagSpecError::from)?.solve(&rhs);
        for (k, &i) in self.form.free_nodes.iter().enumerate() {
            psi[i] = x[k];
        }
        Ok(psi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Virial {
    pub energy: f64,
    pub l4_norm4: f64,
    /// Boundary contribution `Re <g_D, psi_D> / 2` of the Dirichlet nodes.
    pub flux: f64,
    /// `E + mu/2 int |psi|^4`.
    pub raw: f64,
    /// `E + mu/2 int |psi|^4 - flux`; vanishes at stationarity.
    pub defect: f64,
}

impl Virial {
    pub fn tolerance(&self) -> f64 {
        1e-5 * (1.0 + self.l4_norm4)
    }

    pub fn holds(&self) -> bool {
        self.defect.abs() <= self.tolerance()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InitStrategy {
    /// Lifting plus a seeded random perturbation of the given amplitude.
    Random { amplitude: f64 },
    HarmonicLifting,
    /// Lifting plus the lowest eigenfunction at its quartic-optimal scale.
    ScaledEigenfunction,
    Warm(Vec<Complex64>),
}

impl InitStrategy {
    pub fn name(&self) -> &'static str {
        match self {
            InitStrategy::Random { .. } => "random",
            InitStrategy::HarmonicLifting => "lifting",
            InitStrategy::ScaledEigenfunction => "eigenfunction",
            InitStrategy::Warm(_) => "warm",
        }
    }

    pub fn default_set() -> Vec<InitStrategy> {
        vec![InitStrategy::Random { amplitude: 1e-2 }, InitStrategy::HarmonicLifting, InitStrategy::ScaledEigenfunction]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimizeOptions {
    pub starts: Vec<InitStrategy>,
    pub seed: u64,
    pub lbfgs: LbfgsOptions,
    /// Keep the per-iteration trace of the returned start.
    pub trace: bool,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self { starts: InitStrategy::default_set(), seed: 0, lbfgs: LbfgsOptions::default(), trace: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartLog {
    pub start: String,
    pub energy: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Minimizer {
    pub field: ComplexField,
    pub virial: Virial,
    pub l2_norm_sq: f64,
    pub starts: Vec<StartLog>,
    /// `(iteration, energy, gradient norm)` of the returned start.
    pub trace: Vec<(usize, f64, f64)>,
    /// Set when the result was classified as the zero minimizer.
    pub trivial: bool,
}

impl Minimizer {
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iter,E,gradnorm\n");
        for (i, e, g) in &self.trace {
            let _ = writeln!(out, "{i},{e},{g}");
        }
        out
    }
}

fn initial_state(problem: &GlProblem, start: &InitStrategy, seed: u64) -> Result<Vec<Complex64>, GlError> {
    let n = problem.mesh.num_vertices();
    match start {
        InitStrategy::Random { amplitude } => {
            let mut psi = problem.lifting()?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for &i in &problem.form.free_nodes {
                psi[i] += Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * *amplitude;
            }
            Ok(psi)
        }
        InitStrategy::HarmonicLifting => problem.lifting(),
        InitStrategy::ScaledEigenfunction => {
            let mut psi = problem.lifting()?;
            let pair = lowest_eigenpair_with(&problem.form, &LanczosOptions { tol: 1e-6, ..LanczosOptions::default() })?;
            let q = problem.l4_norm4(&pair.vector);
            let c2 = (problem.mu - pair.lambda).max(0.0) / (problem.mu * q);
            let c = c2.sqrt();
            for i in 0..n {
                psi[i] += pair.vector[i] * c;
            }
            Ok(psi)
        }
        InitStrategy::Warm(values) => {
            if values.len() != n {
                return Err(GlError::InvalidParameter(format!("warm start has {} values for {n} nodes", values.len())));
            }
            let mut psi = values.clone();
            for i in 0..n {
                if problem.form.constrained[i] {
                    psi[i] = problem.data[i];
                }
            }
            Ok(psi)
        }
    }
}

/// Runs every start and returns the lowest-energy result.
pub fn minimize(problem: &GlProblem, opts: &MinimizeOptions) -> Result<Minimizer, GlError> {
    if opts.starts.is_empty() {
        return Err(GlError::InvalidParameter("no initialization strategies given".into()));
    }
    let (a, m) = problem.form.free_pencil();
    let precond = Cholesky::new(&a.add_scaled(1.0, &m)).map_err(MagSpecError::from)?;
    let runs = par::map(&opts.starts, |start| -> Result<(LbfgsOutcome, String), GlError> {
        let x0 = initial_state(problem, start, opts.seed)?;
        Ok((lbfgs::run(problem, &precond, x0, &opts.lbfgs, opts.trace), start.name().to_string()))
    });
    let mut logs = Vec::new();
    let mut best: Option<(LbfgsOutcome, String)> = None;
    let mut errors = Vec::new();
    for run in runs {
        match run {
            Ok((out, name)) => {
                logs.push(StartLog { start: name.clone(), energy: out.energy, grad_norm: out.grad_norm, iterations: out.iterations, converged: out.converged });
                let better = best.as_ref().is_none_or(|(b, _)| out.energy < b.energy);
                if out.progressed && better {
                    best = Some((out, name));
                }
            }
            Err(e) => errors.push(e.to_string()),
        }
    }
    let Some((out, name)) = best else {
        return Err(GlError::NoProgress(if errors.is_empty() { format!("{logs:?}") } else { errors.join("; ") }));
    };
    let mut values = out.psi;
    let mut l2 = problem.l2_norm_sq(&values);
    let mut trivial = false;
    let mut energy = problem.energy(&values);
    if problem.has_zero_data() && l2.sqrt() < 1e-6 {
        values.iter_mut().for_each(|z| *z = ZERO);
        l2 = 0.0;
        energy = 0.0;
        trivial = true;
    }
    let virial = problem.virial(&values);
    let field = ComplexField {
        values,
        mesh_hash: problem.mesh.hash(),
        mu: problem.mu,
        energy,
        grad_norm: out.grad_norm,
        iterations: out.iterations,
        converged: out.converged,
        start: name,
    };
    Ok(Minimizer { field, virial, l2_norm_sq: l2, starts: logs, trace: out.trace, trivial })
}

/// Origin of the distance used by [`fit_decay_rate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecayOrigin {
    Vertex,
    OuterBoundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub rate: f64,
    pub r2: f64,
    pub points: usize,
}

/// Least-squares slope of `-log |psi|` against the distance to the vertex or
/// to the `Outer` boundary, over nodes with `|psi|` in `[1e-8, 1e-2]`.
pub fn fit_decay_rate(mesh: &Mesh, psi: &[Complex64], origin: DecayOrigin) -> Result<DecayFit, GlError> {
    let outer: Vec<(Point, Point)> = mesh
        .boundary_edges()
        .filter(|e| e.2 == BoundaryTag::Outer)
        .map(|(a, b, _)| (mesh.vertices[a], mesh.vertices[b]))
        .collect();
    let mut pts = Vec::new();
    for (x, z) in mesh.vertices.iter().zip(psi) {
        let m = z.norm();
        if (1e-8..=1e-2).contains(&m) {
            let d = match origin {
                DecayOrigin::Vertex => x[0].hypot(x[1]),
                DecayOrigin::OuterBoundary => outer
                    .iter()
                    .map(|&(a, b)| crate::geometry::dist_point_segment(*x, a, b))
                    .fold(f64::INFINITY, f64::min),
            };
            pts.push((d, m.ln()));
        }
    }
    let n = pts.len();
    if n < 10 {
        return Err(GlError::InsufficientRange(format!("only {n} nodes with |psi| in [1e-8, 1e-2]")));
    }
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
    let (mx, my) = (sx / n as f64, sy / n as f64);
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let span = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max) - pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    if !(span > 2.0 * mesh.h) || sxx == 0.0 {
        return Err(GlError::InsufficientRange(format!("distance span {span} too small")));
    }
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Ok(DecayFit { rate: -slope, r2, points: n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{mesh, MeshOptions, Polygon};
    use crate::sparse::re_dot;

    fn square() -> Mesh {
        mesh(&Polygon::unit_square(BoundaryTag::Outer), &MeshOptions::new(0.1)).unwrap()
    }

    #[test]
    fn constant_field_energy() {
        let m = square();
        let p = GlProblem::with_kind(&m, 0.8, &[], |_| Ok(ZERO), FormKind::Galerkin).unwrap();
        let one = vec![Complex64::new(1.0, 0.0); m.num_vertices()];
        assert!((p.energy(&one) - (1.0 / 6.0 - 0.4)).abs() < 1e-12);
        assert_eq!(p.energy(&vec![ZERO; m.num_vertices()]), 0.0);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let m = square();
        let p = GlProblem::homogeneous(&m, 0.7, &[]).unwrap();
        let psi: Vec<Complex64> = m.vertices.iter().map(|x| Complex64::new(0.3 + x[0], 0.2 * x[1])).collect();
        let g = p.gradient(&psi);
        let d: Vec<Complex64> = m.vertices.iter().map(|x| Complex64::new(x[1].sin(), x[0] * x[0])).collect();
        let eps = 1e-6;
        let plus: Vec<Complex64> = psi.iter().zip(&d).map(|(a, b)| a + b * eps).collect();
        let minus: Vec<Complex64> = psi.iter().zip(&d).map(|(a, b)| a - b * eps).collect();
        let fd = (p.energy(&plus) - p.energy(&minus)) / (2.0 * eps);
        let an = re_dot(&g, &d);
        assert!((fd - an).abs() < 1e-7 * an.abs().max(1.0), "{fd} vs {an}");
        let inc = p.quartic_increment(&psi, &d, 0.3);
        let direct = p.l4_norm4(&plus.iter().zip(&d).map(|(a, b)| a - b * eps + b * 0.3).collect::<Vec<_>>()) - p.l4_norm4(&psi);
        assert!((inc - direct).abs() < 1e-12);
    }

    #[test]
    fn virial_is_exact_at_zero_data() {
        let m = square();
        let p = GlProblem::homogeneous(&m, 0.7, &[BoundaryTag::Outer]).unwrap();
        let psi: Vec<Complex64> = m.vertices.iter().map(|x| Complex64::new(x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1]), 0.0)).collect();
        let v = p.virial(&psi);
        assert!(v.flux.abs() < 1e-15);
    }

    #[test]
    fn decay_fit_recovers_exponential() {
        let m = mesh(&Polygon::new(vec![[0.0, 0.0], [30.0, 0.0], [30.0, 1.0], [0.0, 1.0]], vec![BoundaryTag::Outer; 4], None).unwrap(), &MeshOptions::new(0.5)).unwrap();
        let psi: Vec<Complex64> = m.vertices.iter().map(|x| Complex64::from_polar((-0.7 * x[0].hypot(x[1])).exp(), x[1])).collect();
        let fit = fit_decay_rate(&m, &psi, DecayOrigin::Vertex).unwrap();
        assert!((fit.rate - 0.7).abs() < 1e-10 && fit.r2 > 0.999999);
        assert!(matches!(fit_decay_rate(&m, &vec![ZERO; m.num_vertices()], DecayOrigin::Vertex), Err(GlError::InsufficientRange(_))));
    }
}
