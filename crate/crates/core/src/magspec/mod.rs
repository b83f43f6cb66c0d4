//! Magnetic quadratic form `q[psi] = int |(grad + iF) psi|^2` with
//! `F(x) = (-y, x) / 2`, discretized by P1 finite elements.

mod lanczos;

pub use lanczos::{lowest_eigenpair, lowest_eigenpair_with, EigenPair, LanczosOptions};

use crate::geometry::polygon::{build_annular_sector, build_truncated_sector, default_arc_segments};
use crate::geometry::{mesh, BoundaryTag, GeometryError, Mesh, MeshOptions, Point, SectorGeometry};
use crate::par;
use crate::sparse::{CsrMatrix, FactorError};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MagSpecError {
    #[error("degenerate mesh: {0}")]
    DegenerateMesh(String),
    #[error(transparent)]
    Factor(#[from] FactorError),
    #[error("eigensolver stagnated after {iterations} iterations (residual {residual:e})")]
    Stagnation { iterations: usize, residual: f64 },
    #[error("extrapolation inconsistent: {0}")]
    Extrapolation(String),
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

pub fn field(x: Point) -> [f64; 2] {
    [-0.5 * x[1], 0.5 * x[0]]
}

/// Discretization of the kinetic term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum FormKind {
    /// Galerkin P1 form with the 3-point edge-midpoint rule and consistent mass.
    Galerkin,
    /// P1 cotangent weights with Peierls phases `exp(i int_e F.dl)` on
    /// edges and a lumped mass. Exactly gauge covariant, so its error does not
    /// grow with `|F|`.
    #[default]
    Link,
}

#[derive(Debug, Clone)]
pub struct MagneticForm {
    /// Hermitian stiffness on all nodes.
    pub stiffness: CsrMatrix,
    /// P1 mass matrix on all nodes (consistent or lumped, following `kind`).
    pub mass: CsrMatrix,
    pub constrained: Vec<bool>,
    /// Position of each node among the free ones.
    pub free_index: Vec<Option<usize>>,
    pub free_nodes: Vec<usize>,
    pub kind: FormKind,
}

impl MagneticForm {
    pub fn num_nodes(&self) -> usize {
        self.constrained.len()
    }

    pub fn num_free(&self) -> usize {
        self.free_nodes.len()
    }

    pub fn quadratic(&self, psi: &[Complex64]) -> f64 {
        self.stiffness.form(psi)
    }

    pub fn mass_norm_sq(&self, psi: &[Complex64]) -> f64 {
        self.mass.form(psi)
    }

    pub fn rayleigh(&self, psi: &[Complex64]) -> f64 {
        self.quadratic(psi) / self.mass_norm_sq(psi)
    }

    /// Stiffness and mass restricted to the free nodes.
    pub fn free_pencil(&self) -> (CsrMatrix, CsrMatrix) {
        let m = self.num_free();
        (self.stiffness.principal(&self.free_index, m), self.mass.principal(&self.free_index, m))
    }

    pub fn extend(&self, free: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.num_nodes()];
        for (k, &i) in self.free_nodes.iter().enumerate() {
            out[i] = free[k];
        }
        out
    }

    pub fn restrict(&self, full: &[Complex64]) -> Vec<Complex64> {
        self.free_nodes.iter().map(|&i| full[i]).collect()
    }
}

pub fn assemble(mesh: &Mesh, dirichlet: &[BoundaryTag]) -> Result<MagneticForm, MagSpecError> {
    assemble_with(mesh, dirichlet, FormKind::default(), field)
}

pub fn assemble_with<G>(mesh: &Mesh, dirichlet: &[BoundaryTag], kind: FormKind, f: G) -> Result<MagneticForm, MagSpecError>
where
    G: Fn(Point) -> [f64; 2] + Sync + Send,
{
    let n = mesh.num_vertices();
    let locals = par::map_range(mesh.num_triangles(), |e| element(mesh, e, kind, &f));
    let mut a = Vec::with_capacity(9 * locals.len());
    let mut m = Vec::with_capacity(9 * locals.len());
    for (e, local) in locals.into_iter().enumerate() {
        let (ka, ma) = local.map_err(|area| {
            MagSpecError::DegenerateMesh(format!("triangle {e} has area {area:e}"))
        })?;
        let tri = mesh.triangles[e];
        for p in 0..3 {
            for q in 0..3 {
                a.push((tri[p], tri[q], ka[p][q]));
                m.push((tri[p], tri[q], Complex64::new(ma[p][q], 0.0)));
            }
        }
    }
    let constrained = mesh.nodes_on(dirichlet);
    let mut free_index = vec![None; n];
    let mut free_nodes = Vec::new();
    for i in 0..n {
        if !constrained[i] {
            free_index[i] = Some(free_nodes.len());
            free_nodes.push(i);
        }
    }
    if n > 0 && mesh.triangles.iter().flatten().collect::<std::collections::BTreeSet<_>>().len() < n {
        return Err(MagSpecError::DegenerateMesh("vertex not covered by any triangle".into()));
    }
    Ok(MagneticForm {
        stiffness: CsrMatrix::from_triplets(n, a),
        mass: CsrMatrix::from_triplets(n, m),
        constrained,
        free_index,
        free_nodes,
        kind,
    })
}

type Local = ([[Complex64; 3]; 3], [[f64; 3]; 3]);

fn element<G: Fn(Point) -> [f64; 2]>(mesh: &Mesh, e: usize, kind: FormKind, f: &G) -> Result<Local, f64> {
    let p = mesh.triangle_points(e);
    let signed = 0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]));
    let area = signed.abs();
    let scale = mesh.h.max(1e-300).powi(2);
    if !(area > 1e-14 * scale) {
        return Err(signed);
    }
    let mut grad = [[0.0; 2]; 3];
    for a in 0..3 {
        let (b, c) = ((a + 1) % 3, (a + 2) % 3);
        grad[a] = [(p[b][1] - p[c][1]) / (2.0 * signed), (p[c][0] - p[b][0]) / (2.0 * signed)];
    }
    let mut k = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            k[a][b] = area * (grad[a][0] * grad[b][0] + grad[a][1] * grad[b][1]);
        }
    }
    let mut mass = match kind {
        FormKind::Galerkin => [[area / 12.0; 3]; 3],
        FormKind::Link => [[0.0; 3]; 3],
    };
    for (a, row) in mass.iter_mut().enumerate() {
        row[a] = match kind {
            FormKind::Galerkin => area / 6.0,
            FormKind::Link => area / 3.0,
        };
    }
    let mid = |a: usize, b: usize| [0.5 * (p[a][0] + p[b][0]), 0.5 * (p[a][1] + p[b][1])];
    let mut out = [[Complex64::new(0.0, 0.0); 3]; 3];
    match kind {
        FormKind::Galerkin => {
            // quadrature node q sits on the edge opposite to vertex q
            let w = area / 3.0;
            for q in 0..3 {
                let (a, b) = ((q + 1) % 3, (q + 2) % 3);
                let fq = f(mid(a, b));
                let f2 = fq[0] * fq[0] + fq[1] * fq[1];
                let mut phi = [0.0; 3];
                phi[a] = 0.5;
                phi[b] = 0.5;
                let fg: Vec<f64> = (0..3).map(|j| fq[0] * grad[j][0] + fq[1] * grad[j][1]).collect();
                for j in 0..3 {
                    for l in 0..3 {
                        let im = phi[l] * fg[j] - phi[j] * fg[l];
                        out[j][l] += Complex64::new(f2 * phi[j] * phi[l], im) * w;
                    }
                }
            }
            for j in 0..3 {
                for l in 0..3 {
                    out[j][l] += k[j][l];
                }
            }
        }
        FormKind::Link => {
            for j in 0..3 {
                out[j][j] = Complex64::new(k[j][j], 0.0);
                for l in 0..3 {
                    if l != j {
                        let fm = f(mid(j, l));
                        let theta = fm[0] * (p[l][0] - p[j][0]) + fm[1] * (p[l][1] - p[j][1]);
                        out[j][l] = Complex64::from_polar(k[j][l], theta);
                    }
                }
            }
        }
    }
    Ok((out, mass))
}

/// `int |grad u|^2` for the P1 interpolant of real nodal values.
pub fn dirichlet_energy(mesh: &Mesh, u: &[f64]) -> f64 {
    par::sum_range(mesh.num_triangles(), |e| {
        let p = mesh.triangle_points(e);
        let tri = mesh.triangles[e];
        let signed = 0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]));
        let mut g = [0.0; 2];
        for a in 0..3 {
            let (b, c) = ((a + 1) % 3, (a + 2) % 3);
            g[0] += u[tri[a]] * (p[b][1] - p[c][1]) / (2.0 * signed);
            g[1] += u[tri[a]] * (p[c][0] - p[b][0]) / (2.0 * signed);
        }
        signed.abs() * (g[0] * g[0] + g[1] * g[1])
    })
}

/// Result of [`mu_beta`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MuBeta {
    pub beta: f64,
    pub radius: f64,
    pub h: f64,
    /// Extrapolated value, or the finest raw value without extrapolation.
    pub value: f64,
    pub error: f64,
    /// `(R, h, lambda, residual)` per computed problem.
    pub levels: Vec<(f64, f64, f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct MuBetaOptions {
    pub kind: FormKind,
    pub lanczos: LanczosOptions,
}

/// Ratio between the two radii of the far-field extrapolation at `beta = pi`.
pub const HALF_PLANE_RADIUS_RATIO: f64 = 1.5;

pub fn truncated_eigenvalue(beta: f64, radius: f64, h: f64, opts: &MuBetaOptions) -> Result<(f64, f64), MagSpecError> {
    let m = truncated_mesh(beta, radius, h)?;
    let form = assemble_with(&m, &[BoundaryTag::Artificial], opts.kind, field)?;
    let pair = lowest_eigenpair_with(&form, &opts.lanczos)?;
    Ok((pair.lambda, pair.residual))
}

/// Lowest eigenvalue on the sector truncated at `R` with Dirichlet data on the
/// arc. With `extrapolate` the mesh sizes `2h` and `h` are combined by
/// Richardson extrapolation for a second-order method. At `beta = pi` the
/// ground state spreads along the whole diameter and feels the truncation as a
/// `c / R^2` shift, so a second radius `1.5 R` is added and that shift is
/// extrapolated away as well.
pub fn mu_beta(beta: f64, radius: f64, h: f64, extrapolate: bool) -> Result<MuBeta, MagSpecError> {
    mu_beta_with(beta, radius, h, extrapolate, &MuBetaOptions::default())
}

pub fn mu_beta_with(beta: f64, radius: f64, h: f64, extrapolate: bool, opts: &MuBetaOptions) -> Result<MuBeta, MagSpecError> {
    if !(h > 0.0) {
        return Err(MagSpecError::InvalidParameter(format!("h must be positive, got {h}")));
    }
    SectorGeometry::truncated(beta, radius)?;
    let half_plane = (beta - PI).abs() < 1e-12;
    let mut jobs = Vec::new();
    let radii: Vec<f64> = if extrapolate && half_plane { vec![radius, HALF_PLANE_RADIUS_RATIO * radius] } else { vec![radius] };
    for &r in &radii {
        if extrapolate {
            jobs.push((r, 2.0 * h));
        }
        jobs.push((r, h));
    }
    let levels = par::map(&jobs, |&(r, hk)| truncated_eigenvalue(beta, r, hk, opts).map(|(l, res)| (r, hk, l, res)))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    if !extrapolate {
        return Ok(MuBeta { beta, radius, h, value: levels[0].2, error: f64::NAN, levels });
    }
    let richardson = |coarse: f64, fine: f64| {
        let d = (fine - coarse) / 3.0;
        (fine + d, d.abs())
    };
    let (v1, e1) = richardson(levels[0].2, levels[1].2);
    if !half_plane {
        return Ok(MuBeta { beta, radius, h, value: v1, error: e1, levels });
    }
    let (v2, e2) = richardson(levels[2].2, levels[3].2);
    let (r1, r2) = (radii[0] * radii[0], radii[1] * radii[1]);
    let value = (r2 * v2 - r1 * v1) / (r2 - r1);
    let error = e1.max(e2) * (r2 + r1) / (r2 - r1) + 0.5 * (value - v2).abs();
    Ok(MuBeta { beta, radius, h, value, error, levels })
}

/// Rejects extrapolations whose error bar exceeds a quarter of the gap to
/// `theta0`. Only meaningful for `beta < pi`.
pub fn check_extrapolation(mu: &MuBeta, theta0: f64) -> Result<(), MagSpecError> {
    if mu.beta < PI && mu.error > 0.25 * (theta0 - mu.value).abs() {
        return Err(MagSpecError::Extrapolation(format!(
            "error estimate {:e} exceeds |theta0 - mu_beta| / 4 = {:e}",
            mu.error,
            0.25 * (theta0 - mu.value).abs()
        )));
    }
    Ok(())
}

/// Hypotheses of the spectral lower bounds on a piece `Omega` of the sector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LowerBound {
    /// `Omega` contains the vertex, fields vanish on the arc: bound `mu_beta`.
    Inner { mu_beta: f64 },
    /// `Omega` avoids the vertex, fields vanish on the arcs: bound `theta0`.
    Outer { theta0: f64 },
    /// Fields vanish on all of `\partial Omega`: bound 1.
    Compact,
}

impl LowerBound {
    pub fn bound(&self) -> f64 {
        match *self {
            LowerBound::Inner { mu_beta } => mu_beta,
            LowerBound::Outer { theta0 } => theta0,
            LowerBound::Compact => 1.0,
        }
    }

    pub fn vanishing_tags(&self) -> &'static [BoundaryTag] {
        match self {
            LowerBound::Inner { .. } | LowerBound::Outer { .. } => &[BoundaryTag::Artificial],
            LowerBound::Compact => &BoundaryTag::ALL,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LowerBoundReport {
    pub bound: f64,
    pub slack: f64,
    pub quotients: Vec<f64>,
    pub min_quotient: f64,
    pub pass: bool,
}

pub const LOWER_BOUND_SLACK: f64 = 1e-2;

pub fn form_lower_bound_check(mesh: &Mesh, kind: LowerBound, fields: &[Vec<Complex64>]) -> Result<LowerBoundReport, MagSpecError> {
    let form = assemble(mesh, &[])?;
    let excluded = mesh.nodes_on(kind.vanishing_tags());
    let mut quotients = Vec::with_capacity(fields.len());
    for (k, psi) in fields.iter().enumerate() {
        if psi.len() != mesh.num_vertices() {
            return Err(MagSpecError::InvalidParameter(format!("field {k} has {} values for {} nodes", psi.len(), mesh.num_vertices())));
        }
        let sup = psi.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if sup == 0.0 {
            return Err(MagSpecError::Hypothesis(format!("field {k} vanishes identically")));
        }
        if let Some(i) = (0..psi.len()).find(|&i| excluded[i] && psi[i].norm() > 1e-12 * sup) {
            return Err(MagSpecError::Hypothesis(format!(
                "field {k} is nonzero ({:e}) at excluded boundary node {i}",
                psi[i].norm()
            )));
        }
        quotients.push(form.rayleigh(psi));
    }
    let min_quotient = quotients.iter().copied().fold(f64::INFINITY, f64::min);
    let bound = kind.bound();
    Ok(LowerBoundReport { bound, slack: LOWER_BOUND_SLACK, pass: min_quotient >= bound - LOWER_BOUND_SLACK, quotients, min_quotient })
}

/// Random smooth fields `chi(x) sum_k c_k exp(i k.x)` whose cutoff `chi`
/// vanishes on the boundary edges carrying `vanish_on` and ramps up to 1 over
/// the distance `width`.
pub fn random_cutoff_fields(mesh: &Mesh, vanish_on: &[BoundaryTag], width: f64, count: usize, seed: u64) -> Vec<Vec<Complex64>> {
    let edges: Vec<(Point, Point)> = mesh
        .boundary_edges()
        .filter(|(_, _, t)| vanish_on.contains(t))
        .map(|(a, b, _)| (mesh.vertices[a], mesh.vertices[b]))
        .collect();
    let on = mesh.nodes_on(vanish_on);
    let chi: Vec<f64> = mesh
        .vertices
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            if on[i] {
                return 0.0;
            }
            let d = edges.iter().map(|&(a, b)| crate::geometry::dist_point_segment(x, a, b)).fold(f64::INFINITY, f64::min);
            let u = (d / width).min(1.0);
            u * u * (3.0 - 2.0 * u)
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let modes: Vec<(Complex64, [f64; 2])> = (0..3)
                .map(|_| {
                    let c = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                    (c, [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)])
                })
                .collect();
            mesh.vertices
                .iter()
                .zip(&chi)
                .map(|(x, &w)| {
                    let s: Complex64 = modes.iter().map(|(c, k)| c * Complex64::from_polar(1.0, k[0] * x[0] + k[1] * x[1])).sum();
                    s * w
                })
                .collect()
        })
        .collect()
}

/// Mesh of the annular piece `{r_in < |x| < r_out}` of the sector.
pub fn annular_mesh(beta: f64, r_in: f64, r_out: f64, h: f64) -> Result<Mesh, MagSpecError> {
    let poly = build_annular_sector(beta, r_in, r_out, default_arc_segments(beta, r_out, h))?;
    Ok(mesh(&poly, &MeshOptions::new(h))?)
}

/// Mesh of the sector truncated at `radius`.
pub fn truncated_mesh(beta: f64, radius: f64, h: f64) -> Result<Mesh, MagSpecError> {
    let geom = SectorGeometry::truncated(beta, radius)?;
    let poly = build_truncated_sector(&geom, default_arc_segments(beta, radius, h))?;
    Ok(mesh(&poly, &MeshOptions::new(h))?)
}

/// Coordinate text dump `row col re im` of a sparse matrix.
pub fn matrix_to_text(a: &CsrMatrix) -> String {
    let mut out = format!("{} {} {}\n", a.n, a.n, a.nnz());
    for i in 0..a.n {
        for (j, v) in a.row(i) {
            out.push_str(&format!("{i} {j} {:.17e} {:.17e}\n", v.re, v.im));
        }
    }
    out
}
