//! Study pipelines: truncated-domain minimizations, their extrapolated limits
//! and the threshold comparisons built on top of them.

mod extrap;
pub mod store;

pub use extrap::{extrapolate_exponential, linear_limit, ExtrapolationReport, LinearLimit};

use crate::geometry::polygon::{build_corner_region, build_truncated_sector, build_wedge, default_arc_segments};
use crate::geometry::{mesh, mesh_nested, BoundaryTag, GeometryError, Mesh, MeshOptions, NestedMeshes, Polygon, SectorGeometry};
use crate::glmin::{fit_decay_rate, minimize, DecayOrigin, GlError, GlProblem, InitStrategy, LbfgsOptions, MinimizeOptions, Minimizer};
use crate::magspec::{mu_beta, MagSpecError, MuBeta};
use crate::oned::{
    boundary_datum_psig, compute_theta0, datum_from_interval, solve_halfline_star, solve_interval_default,
    BoundaryDatum, JointMinimum, OneDError,
};
use crate::par;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EffError {
    #[error(transparent)]
    Oned(#[from] OneDError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Form(#[from] MagSpecError),
    #[error(transparent)]
    Gl(#[from] GlError),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("{0}")]
    InsufficientPoints(String),
    #[error("refusing to extrapolate a diverging sequence: {0}")]
    Diverging(String),
    #[error("monotonicity violated: {0}")]
    Monotonicity(String),
    #[error("error bar too large to decide: {0}")]
    Undecidable(String),
}

impl EffError {
    /// Caused by the request rather than by the numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Self::InvalidParameter(_)
                | Self::InsufficientPoints(_)
                | Self::Geometry(GeometryError::Invalid(_) | GeometryError::OutsideChart(_))
                | Self::Oned(OneDError::InvalidParameter(_))
                | Self::Form(MagSpecError::InvalidParameter(_) | MagSpecError::Geometry(GeometryError::Invalid(_)))
                | Self::Gl(GlError::InvalidParameter(_))
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordKind {
    Sector,
    Corn,
    DirichletCorn,
    Wedge,
    DirichletWedge,
    OnedStar,
    OnedInterval,
}

impl RecordKind {
    pub const ALL: [RecordKind; 7] = [
        Self::Sector,
        Self::Corn,
        Self::DirichletCorn,
        Self::Wedge,
        Self::DirichletWedge,
        Self::OnedStar,
        Self::OnedInterval,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Sector => "sector",
            Self::Corn => "corn",
            Self::DirichletCorn => "dirichlet_corn",
            Self::Wedge => "wedge",
            Self::DirichletWedge => "dirichlet_wedge",
            Self::OnedStar => "oned_star",
            Self::OnedInterval => "oned_interval",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

/// One computed energy with its parameters and diagnostics. Records carry no
/// wall-clock data, so identical inputs give identical records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyRecord {
    pub kind: RecordKind,
    pub beta: Option<f64>,
    pub mu: f64,
    pub length: Option<f64>,
    pub depth: Option<f64>,
    pub radius: Option<f64>,
    pub h: Option<f64>,
    pub energy: f64,
    /// Bulk term removed by the corner definitions: `2 L E^1D_ell` for `corn`,
    /// `2 L E^1D_star` for `wedge`.
    pub reference: Option<f64>,
    pub grad_norm: Option<f64>,
    pub virial_defect: Option<f64>,
    pub virial_tolerance: Option<f64>,
    pub decay_rate: Option<f64>,
    pub l2_norm_sq: Option<f64>,
    pub l4_norm4: Option<f64>,
    /// `int |x|^2 |psi|^4`.
    pub moment: Option<f64>,
    pub sup: Option<f64>,
    pub alpha: Option<f64>,
    pub converged: bool,
    pub start: Option<String>,
    pub seed: u64,
    pub mesh_hash: Option<String>,
    pub num_nodes: Option<usize>,
    /// Hash of the resolved study configuration, filled in by the caller.
    #[serde(default)]
    pub config_hash: String,
}

impl EnergyRecord {
    fn blank(kind: RecordKind, mu: f64, energy: f64) -> Self {
        Self {
            kind,
            beta: None,
            mu,
            length: None,
            depth: None,
            radius: None,
            h: None,
            energy,
            reference: None,
            grad_norm: None,
            virial_defect: None,
            virial_tolerance: None,
            decay_rate: None,
            l2_norm_sq: None,
            l4_norm4: None,
            moment: None,
            sup: None,
            alpha: None,
            converged: true,
            start: None,
            seed: 0,
            mesh_hash: None,
            num_nodes: None,
            config_hash: String::new(),
        }
    }

    fn from_minimizer(kind: RecordKind, geom: &SectorGeometry, problem: &GlProblem, res: &Minimizer, num: &Numerics, decay: Option<DecayOrigin>) -> Self {
        let f = &res.field;
        let decay_rate = decay.and_then(|o| fit_decay_rate(problem.mesh, &f.values, o).ok()).map(|d| d.rate);
        Self {
            beta: Some(geom.beta),
            length: geom.length,
            depth: geom.depth,
            radius: geom.radius,
            h: Some(num.h),
            grad_norm: Some(f.grad_norm),
            virial_defect: Some(res.virial.defect),
            virial_tolerance: Some(res.virial.tolerance()),
            decay_rate,
            l2_norm_sq: Some(res.l2_norm_sq),
            l4_norm4: Some(res.virial.l4_norm4),
            moment: Some(problem.moment(&f.values)),
            sup: Some(f.sup()),
            converged: f.converged,
            start: Some(f.start.clone()),
            seed: num.seed,
            mesh_hash: Some(f.mesh_hash.clone()),
            num_nodes: Some(problem.mesh.num_vertices()),
            ..Self::blank(kind, problem.mu, f.energy)
        }
    }

    /// Energy minus the bulk reference (the raw energy when there is none).
    pub fn corrected(&self) -> f64 {
        self.energy - self.reference.unwrap_or(0.0)
    }

    /// Stationarity identity within its tolerance.
    pub fn virial_holds(&self) -> bool {
        match (self.virial_defect, self.virial_tolerance) {
            (Some(d), Some(t)) => d.abs() <= t,
            _ => true,
        }
    }
}

pub fn oned_star_record(mu: f64) -> Result<EnergyRecord, EffError> {
    let s = solve_halfline_star(mu)?;
    Ok(EnergyRecord { alpha: Some(s.alpha), sup: Some(s.profile.sup()), l4_norm4: Some(s.profile.l4_norm4()), ..EnergyRecord::blank(RecordKind::OnedStar, mu, s.energy) })
}

pub fn oned_interval_record(mu: f64, ell: f64) -> Result<EnergyRecord, EffError> {
    let s = solve_interval_default(mu, ell)?;
    Ok(EnergyRecord {
        depth: Some(ell),
        alpha: Some(s.alpha),
        sup: Some(s.profile.sup()),
        l4_norm4: Some(s.profile.l4_norm4()),
        ..EnergyRecord::blank(RecordKind::OnedInterval, mu, s.energy)
    })
}

/// Discretization and solver settings shared by all 2D pipelines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Numerics {
    pub h: f64,
    pub seed: u64,
    pub random_amplitude: f64,
    pub lbfgs: LbfgsOptions,
}

impl Default for Numerics {
    fn default() -> Self {
        Self { h: 0.1, seed: 0, random_amplitude: 1e-2, lbfgs: LbfgsOptions::default() }
    }
}

impl Numerics {
    fn mesh_options(&self) -> MeshOptions {
        MeshOptions::new(self.h)
    }

    fn solve(&self, problem: &GlProblem, warm: Vec<Vec<Complex64>>) -> Result<Minimizer, EffError> {
        let mut starts = vec![
            InitStrategy::Random { amplitude: self.random_amplitude },
            InitStrategy::HarmonicLifting,
            InitStrategy::ScaledEigenfunction,
        ];
        starts.extend(warm.into_iter().map(InitStrategy::Warm));
        let opts = MinimizeOptions { starts, seed: self.seed, lbfgs: self.lbfgs, trace: true };
        Ok(minimize(problem, &opts)?)
    }
}

/// `(L, ell) in A`: `1 <= ell < L tan(beta/2) <= C ell^A`.
pub const ADMISSIBLE_C: f64 = 4.0;
pub const ADMISSIBLE_A: f64 = 2.0;

pub fn check_admissible(geom: &SectorGeometry) -> Result<(), EffError> {
    geom.check_corner()?;
    if !geom.is_admissible(ADMISSIBLE_C, ADMISSIBLE_A) {
        return Err(EffError::InvalidParameter(format!(
            "(L, ell) = ({:?}, {:?}) outside the admissible set: L tan(beta/2) must not exceed {ADMISSIBLE_C} ell^{ADMISSIBLE_A}",
            geom.length, geom.depth
        )));
    }
    Ok(())
}

/// How `L` and `ell` are tied along a schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "power")]
pub enum Law {
    /// Values are depths, `L = ell^p`.
    LengthFromDepth(f64),
    /// Values are lengths, `ell = L^p`.
    DepthFromLength(f64),
}

impl Default for Law {
    fn default() -> Self {
        Law::LengthFromDepth(1.5)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub values: Vec<f64>,
    pub law: Law,
}

impl Schedule {
    pub fn depths(ells: &[f64]) -> Self {
        Self { values: ells.to_vec(), law: Law::default() }
    }

    /// `(L, ell)` in increasing order.
    pub fn pairs(&self) -> Vec<(f64, f64)> {
        let mut v: Vec<(f64, f64)> = self
            .values
            .iter()
            .map(|&x| match self.law {
                Law::LengthFromDepth(p) => (x.powf(p), x),
                Law::DepthFromLength(p) => (x, x.powf(p)),
            })
            .collect();
        v.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.total_cmp(&b.0)));
        v
    }

    fn validate(&self) -> Result<(), EffError> {
        if self.values.is_empty() || self.values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(EffError::InvalidParameter(format!("schedule values must be positive, got {:?}", self.values)));
        }
        let p = self.pairs();
        if p.windows(2).any(|w| !(w[1].0 > w[0].0 && w[1].1 > w[0].1)) {
            return Err(EffError::InvalidParameter(format!("schedule must be strictly increasing in L and ell, got {p:?}")));
        }
        Ok(())
    }
}

fn theta0() -> Result<f64, EffError> {
    Ok(compute_theta0(1e-8)?.theta0)
}

/// Coarse `mu_beta` (R = 8, h = 0.2, Richardson) used to validate sector runs.
pub fn mu_beta_estimate(beta: f64) -> Result<MuBeta, EffError> {
    Ok(mu_beta(beta, 8.0, 0.2, true)?)
}

/// `mu in (mu_beta, Theta0]`.
pub fn check_sector_mu(mu: f64, mu_beta: f64, theta0: f64) -> Result<(), EffError> {
    if !(mu > mu_beta && mu <= theta0) {
        return Err(EffError::InvalidParameter(format!(
            "sector studies need mu in the admissible interval (mu_beta, Theta0] = ({mu_beta:.6}, {theta0:.10}], got {mu}"
        )));
    }
    Ok(())
}

fn check_corner_mu(mu: f64, theta0: f64) -> Result<(), EffError> {
    if !(mu > theta0 && mu < 1.0) {
        return Err(EffError::InvalidParameter(format!("corner studies need mu in (Theta0, 1) = ({theta0:.10}, 1), got {mu}")));
    }
    Ok(())
}

/// Final minimizer of a study with its mesh, kept for field and trace dumps.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub mesh: Mesh,
    pub minimizer: Minimizer,
}

/// Truncated-sector sweep and its extrapolation in `R`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorStudy {
    pub beta: f64,
    pub mu: f64,
    pub records: Vec<EnergyRecord>,
    pub report: ExtrapolationReport,
    /// Largest radius.
    #[serde(skip)]
    pub snapshot: Option<Snapshot>,
}

impl SectorStudy {
    pub fn largest(&self) -> &EnergyRecord {
        self.records.last().expect("non-empty sweep")
    }
}

/// `E_sector(mu)` from truncated sectors on nested meshes; each radius is
/// warm started from the zero extension of the previous minimizer, so the
/// sequence is non-increasing exactly.
pub fn sector_energy(beta: f64, mu: f64, radii: &[f64], num: &Numerics) -> Result<SectorStudy, EffError> {
    let th = theta0()?;
    let mb = mu_beta_estimate(beta)?;
    check_sector_mu(mu, mb.value, th)?;
    sector_energy_unchecked(beta, mu, radii, num)
}

/// [`sector_energy`] without the `mu_beta` validation.
pub fn sector_energy_unchecked(beta: f64, mu: f64, radii: &[f64], num: &Numerics) -> Result<SectorStudy, EffError> {
    let mut radii = radii.to_vec();
    radii.sort_by(f64::total_cmp);
    radii.dedup();
    if radii.len() < 3 {
        return Err(EffError::InsufficientPoints(format!("need 3 distinct radii, got {radii:?}")));
    }
    let geoms = radii.iter().map(|&r| SectorGeometry::truncated(beta, r)).collect::<Result<Vec<_>, _>>()?;
    let polys = geoms
        .iter()
        .map(|g| build_truncated_sector(g, default_arc_segments(beta, g.radius.unwrap(), num.h)))
        .collect::<Result<Vec<_>, _>>()?;
    let nested = mesh_nested(&polys, polys.len() - 1, &num.mesh_options())?;
    let mut records: Vec<EnergyRecord> = Vec::new();
    let mut prev: Option<Vec<Complex64>> = None;
    let mut snapshot = None;
    for (k, g) in geoms.iter().enumerate() {
        let m = &nested.meshes[k];
        let problem = GlProblem::homogeneous(m, mu, &[BoundaryTag::Artificial])?;
        let warm = prev.take().map(|v| vec![nested.transfer(k - 1, k, &v)]).unwrap_or_default();
        let res = num.solve(&problem, warm)?;
        let rec = EnergyRecord::from_minimizer(RecordKind::Sector, g, &problem, &res, num, Some(DecayOrigin::Vertex));
        if let Some(last) = records.last() {
            if rec.energy > last.energy {
                return Err(EffError::Monotonicity(format!(
                    "E(R = {}) = {} above E(R = {}) = {}: under-resolved mesh",
                    radii[k], rec.energy, radii[k - 1], last.energy
                )));
            }
        }
        records.push(rec);
        prev = Some(res.field.values.clone());
        snapshot = Some(Snapshot { mesh: m.clone(), minimizer: res });
    }
    let report = extrapolate_exponential(&records.iter().map(|r| (r.radius.unwrap(), r.energy)).collect::<Vec<_>>())?;
    Ok(SectorStudy { beta, mu, records, report, snapshot })
}

fn datum_fn(d: &BoundaryDatum) -> impl Fn(crate::geometry::Point) -> Result<Complex64, String> + '_ {
    move |x| d.eval(x).map_err(|e| e.to_string())
}

fn corner_solve(geom: &SectorGeometry, mu: f64, interval: &JointMinimum, num: &Numerics, m: &Mesh) -> Result<(EnergyRecord, Minimizer), EffError> {
    let datum = datum_from_interval(geom, interval);
    let problem = GlProblem::new(m, mu, &[BoundaryTag::Bd, BoundaryTag::Inner], datum_fn(&datum))?;
    let res = num.solve(&problem, Vec::new())?;
    let l = geom.length.unwrap();
    let rec = EnergyRecord {
        reference: Some(2.0 * l * interval.energy),
        alpha: Some(interval.alpha),
        ..EnergyRecord::from_minimizer(RecordKind::Corn, geom, &problem, &res, num, Some(DecayOrigin::OuterBoundary))
    };
    Ok((rec, res))
}

/// `E^corn_{L,ell}(mu)` with `psi_0` data on the transverse and inner sides.
pub fn corner_energy_raw(beta: f64, mu: f64, length: f64, depth: f64, num: &Numerics) -> Result<EnergyRecord, EffError> {
    check_corner_mu(mu, theta0()?)?;
    let geom = SectorGeometry::corner(beta, length, depth)?;
    check_admissible(&geom)?;
    let m = mesh(&build_corner_region(&geom)?, &num.mesh_options())?;
    Ok(corner_solve(&geom, mu, &solve_interval_default(mu, depth)?, num, &m)?.0)
}

fn wedge_solve(geom: &SectorGeometry, mu: f64, star: &JointMinimum, num: &Numerics, m: &Mesh) -> Result<EnergyRecord, EffError> {
    let datum = boundary_datum_psig(geom, star)?;
    let problem = GlProblem::new(m, mu, &[BoundaryTag::Bd], datum_fn(&datum))?;
    let res = num.solve(&problem, Vec::new())?;
    Ok(EnergyRecord {
        reference: Some(2.0 * geom.length.unwrap() * star.energy),
        alpha: Some(star.alpha),
        ..EnergyRecord::from_minimizer(RecordKind::Wedge, geom, &problem, &res, num, Some(DecayOrigin::OuterBoundary))
    })
}

/// `E^wedge_L(mu)` with `psi_g` data on the transverse sides.
pub fn wedge_energy_raw(beta: f64, mu: f64, length: f64, num: &Numerics) -> Result<EnergyRecord, EffError> {
    check_corner_mu(mu, theta0()?)?;
    let geom = SectorGeometry::wedge(beta, length)?;
    let m = mesh(&build_wedge(&geom)?, &num.mesh_options())?;
    wedge_solve(&geom, mu, &solve_halfline_star(mu)?, num, &m)
}

/// Steps of a route sequence may rise by at most this much and still count as
/// non-increasing (the superpolynomially small defect of the wedge route).
pub const ROUTE_SLACK: f64 = 1e-3;

/// Pointwise decay exponents `-d log|g| / d log p` between successive points.
pub fn local_exponents(points: &[(f64, f64)]) -> Vec<f64> {
    points.windows(2).map(|w| -(w[1].1.abs() / w[0].1.abs()).ln() / (w[1].0 / w[0].0).ln()).collect()
}

/// Decay faster than any power over the sampled range: `|g|` strictly
/// decreasing with strictly increasing local exponents.
pub fn decays_superpolynomially(points: &[(f64, f64)]) -> bool {
    let ex = local_exponents(points);
    points.len() >= 3 && ex.iter().all(|&e| e > 0.0) && ex.windows(2).all(|w| w[1] > w[0])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CornerStudy {
    pub beta: f64,
    pub mu: f64,
    pub corner_records: Vec<EnergyRecord>,
    pub wedge_records: Vec<EnergyRecord>,
    /// `E^corn_{L,ell} - 2 L E^1D_ell` against `ell`.
    pub corner_route: ExtrapolationReport,
    /// `E^wedge_L - 2 L E^1D_star` against `L`.
    pub wedge_route: ExtrapolationReport,
    /// Non-increasing steps of the wedge route up to [`ROUTE_SLACK`].
    pub wedge_monotone: Vec<bool>,
    pub discrepancy: f64,
    pub combined_error: f64,
    pub routes_agree: bool,
    /// `(ell, E^wedge_L - E^corn_{L,ell})`.
    pub raw_gaps: Vec<(f64, f64)>,
    pub gap_superpolynomial: bool,
    /// Last corner region of the schedule.
    #[serde(skip)]
    pub snapshot: Option<Snapshot>,
}

impl CornerStudy {
    /// The corner-route limit with its error bar.
    pub fn value(&self) -> (f64, f64) {
        (self.corner_route.limit, self.corner_route.error)
    }
}

/// `E_corner(mu)` along a schedule by both routes.
pub fn corner_energy(beta: f64, mu: f64, schedule: &Schedule, num: &Numerics) -> Result<CornerStudy, EffError> {
    check_corner_mu(mu, theta0()?)?;
    schedule.validate()?;
    let pairs = schedule.pairs();
    let geoms = pairs
        .iter()
        .map(|&(l, ell)| {
            let g = SectorGeometry::corner(beta, l, ell)?;
            check_admissible(&g)?;
            Ok(g)
        })
        .collect::<Result<Vec<_>, EffError>>()?;
    let star = solve_halfline_star(mu)?;
    let intervals = par::map(&pairs, |&(_, ell)| solve_interval_default(mu, ell)).into_iter().collect::<Result<Vec<_>, _>>()?;
    // each corner region is meshed as a sub-polygon of its wedge, so the raw
    // gap compares energies on one mesh family
    let last = pairs.len() - 1;
    let out = par::map_range(pairs.len(), |k| -> Result<(EnergyRecord, EnergyRecord, Option<Snapshot>), EffError> {
        let wedge = SectorGeometry::wedge(beta, pairs[k].0)?;
        let mut nested = mesh_nested(&[build_corner_region(&geoms[k])?, build_wedge(&wedge)?], 1, &num.mesh_options())?;
        let w = wedge_solve(&wedge, mu, &star, num, &nested.meshes[1])?;
        let (c, res) = corner_solve(&geoms[k], mu, &intervals[k], num, &nested.meshes[0])?;
        let snap = (k == last).then(|| Snapshot { mesh: nested.meshes.swap_remove(0), minimizer: res });
        Ok((c, w, snap))
    });
    let mut corner_records = Vec::new();
    let mut wedge_records = Vec::new();
    let mut snapshot = None;
    for r in out {
        let (c, w, snap) = r?;
        corner_records.push(c);
        wedge_records.push(w);
        snapshot = snapshot.or(snap);
    }
    let corner_route = extrapolate_exponential(&corner_records.iter().map(|r| (r.depth.unwrap(), r.corrected())).collect::<Vec<_>>())?;
    let wedge_route = extrapolate_exponential(&wedge_records.iter().map(|r| (r.length.unwrap(), r.corrected())).collect::<Vec<_>>())?;
    let wedge_monotone = wedge_route.sequence.windows(2).map(|w| w[1].1 <= w[0].1 + ROUTE_SLACK).collect();
    let discrepancy = (corner_route.limit - wedge_route.limit).abs();
    let combined_error = corner_route.error + wedge_route.error;
    let raw_gaps: Vec<(f64, f64)> = corner_records.iter().zip(&wedge_records).map(|(c, w)| (c.depth.unwrap(), w.energy - c.energy)).collect();
    Ok(CornerStudy {
        beta,
        mu,
        gap_superpolynomial: decays_superpolynomially(&raw_gaps),
        corner_records,
        wedge_records,
        corner_route,
        wedge_route,
        wedge_monotone,
        discrepancy,
        combined_error,
        routes_agree: discrepancy <= combined_error,
        raw_gaps,
        snapshot,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletStudy {
    pub beta: f64,
    pub mu: f64,
    /// Depths and lengths of the grid.
    pub depths: Vec<f64>,
    pub lengths: Vec<f64>,
    /// Corner records of all admissible grid points `(ell_i, L_j)`.
    pub records: Vec<EnergyRecord>,
    pub wedge_records: Vec<EnergyRecord>,
    /// Exact comparisons `E(ell_i, L_j) <= E(ell_{i-1}, L_j)`.
    pub monotone_in_depth: bool,
    /// Exact comparisons `E(ell_i, L_j) <= E(ell_i, L_{j-1})`.
    pub monotone_in_length: bool,
    /// Along the schedule diagonal.
    pub report: ExtrapolationReport,
    /// `(ell, E^D_{L,ell} - E^{D,wedge}_L)` along the diagonal.
    pub wedge_gaps: Vec<(f64, f64)>,
    pub wedge_gap_superpolynomial: bool,
    /// Last diagonal grid point.
    #[serde(skip)]
    pub snapshot: Option<Snapshot>,
}

impl DirichletStudy {
    pub fn record(&self, depth: f64, length: f64) -> Option<&EnergyRecord> {
        self.records.iter().find(|r| r.depth == Some(depth) && r.length == Some(length))
    }
}

/// `E^D_corner(Theta0)` from zero-data corner regions on one nested mesh
/// family. Every grid point is warm started from the zero extensions of its
/// smaller neighbours, which makes monotonicity in both `ell` and `L` exact.
pub fn dirichlet_corner_energy(beta: f64, schedule: &Schedule, with_wedge: bool, num: &Numerics) -> Result<DirichletStudy, EffError> {
    schedule.validate()?;
    let mu = theta0()?;
    let pairs = schedule.pairs();
    let depths: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let lengths: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    for &(l, ell) in &pairs {
        check_admissible(&SectorGeometry::corner(beta, l, ell)?)?;
    }
    let mut polys: Vec<Polygon> = Vec::new();
    let mut grid: Vec<(usize, usize, SectorGeometry)> = Vec::new();
    for (j, &l) in lengths.iter().enumerate() {
        for (i, &ell) in depths.iter().enumerate() {
            if let Ok(g) = SectorGeometry::corner(beta, l, ell) {
                polys.push(build_corner_region(&g)?);
                grid.push((i, j, g));
            }
        }
    }
    let nc = polys.len();
    let wedges: Vec<SectorGeometry> = if with_wedge { lengths.iter().map(|&l| SectorGeometry::wedge(beta, l)).collect::<Result<_, _>>()? } else { Vec::new() };
    for g in &wedges {
        polys.push(build_wedge(g)?);
    }
    let background = if with_wedge { polys.len() - 1 } else { nc - 1 };
    let nested: NestedMeshes = mesh_nested(&polys, background, &num.mesh_options())?;
    let zero_tags = [BoundaryTag::Bd, BoundaryTag::Inner];
    let mut fields: Vec<Option<Vec<Complex64>>> = vec![None; polys.len()];
    let mut energies: Vec<f64> = vec![f64::NAN; polys.len()];
    let mut records = Vec::new();
    let index_of = |i: usize, j: usize| grid.iter().position(|&(a, b, _)| a == i && b == j);
    let solve_at = |k: usize, kind: RecordKind, geom: &SectorGeometry, preds: &[usize], fields: &[Option<Vec<Complex64>>]| -> Result<(EnergyRecord, Minimizer), EffError> {
        let m: &Mesh = &nested.meshes[k];
        let problem = GlProblem::homogeneous(m, mu, &zero_tags)?;
        let warm = preds.iter().filter_map(|&p| fields[p].as_ref().map(|v| nested.transfer(p, k, v))).collect();
        let res = num.solve(&problem, warm)?;
        let rec = EnergyRecord::from_minimizer(kind, geom, &problem, &res, num, None);
        Ok((rec, res))
    };
    let last_diagonal = index_of(pairs.len() - 1, pairs.len() - 1);
    let mut snapshot = None;
    for (k, &(i, j, g)) in grid.iter().enumerate() {
        let preds: Vec<usize> = [i.checked_sub(1).and_then(|a| index_of(a, j)), j.checked_sub(1).and_then(|b| index_of(i, b))].into_iter().flatten().collect();
        let (rec, res) = solve_at(k, RecordKind::DirichletCorn, &g, &preds, &fields)?;
        energies[k] = rec.energy;
        fields[k] = Some(res.field.values.clone());
        records.push(rec);
        if Some(k) == last_diagonal {
            snapshot = Some(Snapshot { mesh: nested.meshes[k].clone(), minimizer: res });
        }
    }
    let mut wedge_records = Vec::new();
    for (j, g) in wedges.iter().enumerate() {
        let k = nc + j;
        let mut preds: Vec<usize> = (0..depths.len()).rev().filter_map(|i| index_of(i, j)).take(1).collect();
        if j > 0 {
            preds.push(k - 1);
        }
        let (rec, res) = solve_at(k, RecordKind::DirichletWedge, g, &preds, &fields)?;
        energies[k] = rec.energy;
        fields[k] = Some(res.field.values);
        wedge_records.push(rec);
    }
    let mut monotone_in_depth = true;
    let mut monotone_in_length = true;
    for (k, &(i, j, _)) in grid.iter().enumerate() {
        if let Some(p) = i.checked_sub(1).and_then(|a| index_of(a, j)) {
            monotone_in_depth &= energies[k] <= energies[p];
        }
        if let Some(p) = j.checked_sub(1).and_then(|b| index_of(i, b)) {
            monotone_in_length &= energies[k] <= energies[p];
        }
    }
    let diagonal: Vec<(f64, f64)> = (0..pairs.len()).filter_map(|d| index_of(d, d).map(|k| (depths[d], energies[k]))).collect();
    let report = extrapolate_exponential(&diagonal)?;
    let wedge_gaps: Vec<(f64, f64)> = wedge_records
        .iter()
        .enumerate()
        .filter_map(|(d, w)| index_of(d, d).map(|k| (depths[d], energies[k] - w.energy)))
        .collect();
    Ok(DirichletStudy {
        beta,
        mu,
        depths,
        lengths,
        records,
        wedge_gap_superpolynomial: decays_superpolynomially(&wedge_gaps),
        wedge_records,
        monotone_in_depth,
        monotone_in_length,
        report,
        wedge_gaps,
        snapshot,
    })
}

/// Settings of the threshold studies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuityConfig {
    pub beta: f64,
    /// `mu > Theta0`.
    pub mu_above: Vec<f64>,
    /// `mu < Theta0`.
    pub mu_below: Vec<f64>,
    pub corner_schedule: Schedule,
    pub sector_radii: Vec<f64>,
    pub dirichlet_schedule: Schedule,
    pub numerics: Numerics,
}

/// A limit with its error bar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

impl Estimate {
    pub fn consistent_with(&self, other: &Estimate) -> bool {
        (self.value - other.value).abs() <= self.error + other.error
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuityReport {
    pub beta: f64,
    pub theta0: f64,
    pub corner_limit: LinearLimit,
    pub sector_limit: LinearLimit,
    pub dirichlet: Estimate,
    pub corner_studies: Vec<CornerStudy>,
    pub sector_studies: Vec<SectorStudy>,
    pub dirichlet_study: DirichletStudy,
    /// `E_sector(Theta0 - delta)` non-decreasing in `delta`.
    pub sector_monotone_in_delta: bool,
    pub all_negative: bool,
    pub pairwise_consistent: bool,
    pub pass: bool,
}

impl ContinuityReport {
    pub fn estimates(&self) -> [(&'static str, Estimate); 3] {
        [
            ("corner_above", Estimate { value: self.corner_limit.value, error: self.corner_limit.error }),
            ("sector_below", Estimate { value: self.sector_limit.value, error: self.sector_limit.error }),
            ("dirichlet_corner", self.dirichlet),
        ]
    }
}

fn corner_limit(cfg_beta: f64, mus: &[f64], schedule: &Schedule, num: &Numerics, theta0: f64) -> Result<(LinearLimit, Vec<CornerStudy>), EffError> {
    if mus.len() < 2 {
        return Err(EffError::InsufficientPoints(format!("insufficient points for limit fit: {} values of mu above Theta0", mus.len())));
    }
    let studies = mus.iter().map(|&mu| corner_energy(cfg_beta, mu, schedule, num)).collect::<Result<Vec<_>, _>>()?;
    let pts: Vec<(f64, f64, f64)> = studies.iter().map(|s| (s.mu - theta0, s.value().0, s.value().1)).collect();
    Ok((linear_limit(&pts)?, studies))
}

/// Threshold continuity: the limits of `E_corner` from above and `E_sector`
/// from below, against `E^D_corner(Theta0)`.
pub fn continuity_study(cfg: &ContinuityConfig) -> Result<ContinuityReport, EffError> {
    let th = theta0()?;
    if cfg.mu_above.len() < 2 || cfg.mu_below.len() < 2 {
        return Err(EffError::InsufficientPoints(format!(
            "insufficient points for limit fit: {} above and {} below Theta0",
            cfg.mu_above.len(),
            cfg.mu_below.len()
        )));
    }
    for &mu in &cfg.mu_above {
        check_corner_mu(mu, th)?;
    }
    let mb = mu_beta_estimate(cfg.beta)?;
    for &mu in &cfg.mu_below {
        check_sector_mu(mu, mb.value, th)?;
    }
    let (corner_limit, corner_studies) = corner_limit(cfg.beta, &cfg.mu_above, &cfg.corner_schedule, &cfg.numerics, th)?;
    let sector_studies = cfg
        .mu_below
        .iter()
        .map(|&mu| sector_energy_unchecked(cfg.beta, mu, &cfg.sector_radii, &cfg.numerics))
        .collect::<Result<Vec<_>, _>>()?;
    let pts: Vec<(f64, f64, f64)> = sector_studies.iter().map(|s| (s.mu - th, s.report.limit, s.report.error)).collect();
    let sector_limit = linear_limit(&pts)?;
    let dirichlet_study = dirichlet_corner_energy(cfg.beta, &cfg.dirichlet_schedule, false, &cfg.numerics)?;
    let dirichlet = Estimate { value: dirichlet_study.report.limit, error: dirichlet_study.report.error };
    let mut by_delta: Vec<(f64, f64)> = sector_studies.iter().map(|s| (th - s.mu, s.report.limit)).collect();
    by_delta.sort_by(|a, b| a.0.total_cmp(&b.0));
    let sector_monotone_in_delta = by_delta.windows(2).all(|w| w[1].1 >= w[0].1);
    let mut report = ContinuityReport {
        beta: cfg.beta,
        theta0: th,
        corner_limit,
        sector_limit,
        dirichlet,
        corner_studies,
        sector_studies,
        dirichlet_study,
        sector_monotone_in_delta,
        all_negative: false,
        pairwise_consistent: false,
        pass: false,
    };
    let est = report.estimates();
    report.all_negative = est.iter().all(|(_, e)| e.value < 0.0);
    report.pairwise_consistent = (0..3).all(|a| ((a + 1)..3).all(|b| est[a].1.consistent_with(&est[b].1)));
    report.pass = report.all_negative && report.pairwise_consistent;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Refuted,
    NotRefuted,
}

/// Error bars above this cannot separate the limit from the predicted 0.
pub const UNDECIDABLE_ERROR: f64 = 0.1;

/// The threshold prediction of the linear-in-angle conjecture is
/// `lim E_corner = 0`; it is refuted when the limit lies below `-3` error bars.
pub fn decide(limit: f64, error: f64) -> Result<Verdict, EffError> {
    if !(limit.is_finite() && error.is_finite() && error >= 0.0) || error > UNDECIDABLE_ERROR {
        return Err(EffError::Undecidable(format!("limit {limit} with error {error}")));
    }
    Ok(if limit < -3.0 * error { Verdict::Refuted } else { Verdict::NotRefuted })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConjectureReport {
    pub beta: f64,
    pub theta0: f64,
    pub limit: LinearLimit,
    pub prediction: f64,
    /// `limit / error`.
    pub sigmas: f64,
    pub verdict: Verdict,
    pub studies: Vec<CornerStudy>,
}

pub fn conjecture_check(beta: f64, mu_above: &[f64], schedule: &Schedule, num: &Numerics) -> Result<ConjectureReport, EffError> {
    let th = theta0()?;
    for &mu in mu_above {
        check_corner_mu(mu, th)?;
    }
    let (limit, studies) = corner_limit(beta, mu_above, schedule, num, th)?;
    let verdict = decide(limit.value, limit.error)?;
    Ok(ConjectureReport { beta, theta0: th, prediction: 0.0, sigmas: limit.value / limit.error, verdict, limit, studies })
}
