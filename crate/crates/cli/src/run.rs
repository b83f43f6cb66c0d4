use crate::config::{StudyConfig, StudyKind};
use crate::plot;
use crate::CliError;
use corner_gl::effective::store::append_records;
use corner_gl::effective::*;
use corner_gl::geometry::{write_mesh, BoundaryTag, Mesh};
use corner_gl::magspec::{assemble, matrix_to_text, mu_beta, truncated_mesh};
use corner_gl::oned::{compute_theta0, Profile1D};
use serde_json::{json, Value};
use std::fmt::Write;
use std::path::{Path, PathBuf};

/// Optional dumps requested on the command line.
#[derive(Debug, Default, Clone, clap::Args)]
pub struct Outputs {
    /// Write the mesh of the last solve.
    #[arg(long)]
    pub mesh_out: Option<PathBuf>,
    /// Write the final field as CSV `x,y,re,im,abs`.
    #[arg(long)]
    pub field_out: Option<PathBuf>,
    /// Write the L-BFGS trace as CSV `iter,E,gradnorm`.
    #[arg(long)]
    pub trace_out: Option<PathBuf>,
    /// Write the 1D profile as CSV.
    #[arg(long)]
    pub profile_out: Option<PathBuf>,
    /// Write the eigenvalue levels as CSV `beta,R,h,lambda,residual`.
    #[arg(long)]
    pub eig_out: Option<PathBuf>,
    /// Write the stiffness matrix here and the mass matrix to `<path>.mass`.
    #[arg(long)]
    pub matrix_out: Option<PathBuf>,
}

impl Outputs {
    fn check(&self, kind: StudyKind) -> Result<(), CliError> {
        use StudyKind::*;
        let field = matches!(kind, Sector | Corner | Dirichlet | Continuity | Conjecture);
        let allowed = [
            ("--mesh-out", self.mesh_out.is_some(), field || kind == MuBeta),
            ("--field-out", self.field_out.is_some(), field),
            ("--trace-out", self.trace_out.is_some(), field),
            ("--profile-out", self.profile_out.is_some(), matches!(kind, Theta0 | Oned)),
            ("--eig-out", self.eig_out.is_some(), kind == MuBeta),
            ("--matrix-out", self.matrix_out.is_some(), kind == MuBeta),
        ];
        for (flag, given, ok) in allowed {
            if given && !ok {
                return Err(CliError::Validation(format!("{flag} is not available for {} studies", kind.as_str())));
            }
        }
        Ok(())
    }
}

/// Everything a study produces before it is written out.
#[derive(Default)]
struct Product {
    records: Vec<EnergyRecord>,
    report: Value,
    svg: Option<String>,
    snapshot: Option<Snapshot>,
    mesh: Option<Mesh>,
    profile: Option<Profile1D>,
    eig_csv: Option<String>,
    matrices: Option<(String, String)>,
}

fn eff(e: EffError) -> CliError {
    if e.is_validation() {
        CliError::Validation(e.to_string())
    } else {
        CliError::Numerical(e.to_string())
    }
}

fn theta0(tol: f64) -> Result<f64, CliError> {
    compute_theta0(tol).map(|t| t.theta0).map_err(|e| eff(e.into()))
}

fn split_mus(cfg: &StudyConfig, th: f64) -> (Vec<f64>, Vec<f64>) {
    let mus = cfg.mus(th);
    (mus.iter().copied().filter(|&m| m > th).collect(), mus.iter().copied().filter(|&m| m <= th).collect())
}

fn schedule(cfg: &StudyConfig) -> Result<Schedule, CliError> {
    cfg.schedule.resolve("schedule").map_err(CliError::Validation)
}

fn corner_json(s: &CornerStudy) -> Value {
    json!({
        "mu": s.mu,
        "corner_route": { "limit": s.corner_route.limit, "error": s.corner_route.error, "monotone": s.corner_route.monotone },
        "wedge_route": { "limit": s.wedge_route.limit, "error": s.wedge_route.error, "monotone": s.wedge_monotone },
        "discrepancy": s.discrepancy,
        "combined_error": s.combined_error,
        "routes_agree": s.routes_agree,
        "raw_gaps": s.raw_gaps,
        "gap_superpolynomial": s.gap_superpolynomial,
    })
}

fn sector_json(s: &SectorStudy) -> Value {
    json!({
        "mu": s.mu,
        "limit": s.report.limit,
        "error": s.report.error,
        "nonincreasing_in_radius": s.report.is_nonincreasing(),
        "sequence": s.report.sequence,
    })
}

fn dirichlet_json(s: &DirichletStudy) -> Value {
    json!({
        "mu": s.mu,
        "limit": s.report.limit,
        "error": s.report.error,
        "monotone_in_depth": s.monotone_in_depth,
        "monotone_in_length": s.monotone_in_length,
        "wedge_gaps": s.wedge_gaps,
        "wedge_gap_superpolynomial": s.wedge_gap_superpolynomial,
    })
}

fn corner_records(s: &CornerStudy) -> impl Iterator<Item = EnergyRecord> + '_ {
    s.corner_records.iter().chain(&s.wedge_records).cloned()
}

fn compute(cfg: &StudyConfig) -> Result<Product, CliError> {
    let num = cfg.numerics();
    let mut p = Product::default();
    match cfg.study {
        StudyKind::Theta0 => {
            let t = compute_theta0(cfg.tol).map_err(|e| eff(e.into()))?;
            p.report = json!({ "theta0": t.theta0, "alpha_opt": t.alpha_opt, "psi0_l4_norm4": t.psi0_l4_norm4 });
            p.profile = Some(t.psi0);
        }
        StudyKind::MuBeta => {
            let m = mu_beta(cfg.beta, cfg.radius, cfg.mesh.h, cfg.extrapolate).map_err(|e| eff(e.into()))?;
            let mut csv = String::from("beta,R,h,lambda,residual\n");
            for (r, h, l, res) in &m.levels {
                let _ = writeln!(csv, "{},{r},{h},{l},{res}", m.beta);
            }
            let mesh = truncated_mesh(cfg.beta, cfg.radius, cfg.mesh.h).map_err(|e| eff(e.into()))?;
            let form = assemble(&mesh, &[BoundaryTag::Artificial]).map_err(|e| eff(e.into()))?;
            p.matrices = Some((matrix_to_text(&form.stiffness), matrix_to_text(&form.mass)));
            p.mesh = Some(mesh);
            p.eig_csv = Some(csv);
            p.report = json!({ "beta": m.beta, "radius": m.radius, "h": m.h, "mu_beta": m.value, "error": m.error, "levels": m.levels });
        }
        StudyKind::Oned => {
            let th = theta0(1e-8)?;
            let mut rows = Vec::new();
            for mu in cfg.mus(th) {
                let star = oned_star_record(mu).map_err(eff)?;
                rows.push(json!({ "mu": mu, "ell": null, "energy": star.energy, "alpha": star.alpha }));
                p.records.push(star);
                for &ell in &cfg.schedule.ell {
                    let r = oned_interval_record(mu, ell).map_err(eff)?;
                    rows.push(json!({ "mu": mu, "ell": ell, "energy": r.energy, "alpha": r.alpha }));
                    p.records.push(r);
                }
            }
            if let (Some(&mu), Some(&ell)) = (cfg.mus(th).last(), cfg.schedule.ell.last()) {
                p.profile = Some(corner_gl::oned::solve_interval_default(mu, ell).map_err(|e| eff(e.into()))?.profile);
            }
            p.report = json!({ "theta0": th, "energies": rows });
        }
        StudyKind::Sector => {
            let th = theta0(1e-8)?;
            let mb = mu_beta_estimate(cfg.beta).map_err(eff)?;
            let mus = cfg.mus(th);
            for &mu in &mus {
                check_sector_mu(mu, mb.value, th).map_err(eff)?;
            }
            let mut studies = Vec::new();
            for &mu in &mus {
                studies.push(sector_energy_unchecked(cfg.beta, mu, &cfg.radii, &num).map_err(eff)?);
            }
            p.report = json!({ "theta0": th, "mu_beta": mb.value, "studies": studies.iter().map(sector_json).collect::<Vec<_>>() });
            p.records = studies.iter().flat_map(|s| s.records.iter().cloned()).collect();
            p.snapshot = studies.pop().and_then(|s| s.snapshot);
            p.svg = Some(plot::convergence(&p.records));
        }
        StudyKind::Corner => {
            let th = theta0(1e-8)?;
            let s = schedule(cfg)?;
            let mut studies = Vec::new();
            for mu in cfg.mus(th) {
                studies.push(corner_energy(cfg.beta, mu, &s, &num).map_err(eff)?);
            }
            p.report = json!({ "theta0": th, "studies": studies.iter().map(corner_json).collect::<Vec<_>>() });
            p.records = studies.iter().flat_map(corner_records).collect();
            p.snapshot = studies.pop().and_then(|s| s.snapshot);
            p.svg = Some(plot::convergence(&p.records));
        }
        StudyKind::Dirichlet => {
            let s = dirichlet_corner_energy(cfg.beta, &schedule(cfg)?, cfg.wedge, &num).map_err(eff)?;
            p.report = dirichlet_json(&s);
            p.records = s.records.iter().chain(&s.wedge_records).cloned().collect();
            p.snapshot = s.snapshot;
            p.svg = Some(plot::convergence(&p.records));
        }
        StudyKind::Continuity => {
            let th = theta0(1e-8)?;
            let (mu_above, mu_below) = split_mus(cfg, th);
            let c = ContinuityConfig {
                beta: cfg.beta,
                mu_above,
                mu_below,
                corner_schedule: schedule(cfg)?,
                sector_radii: cfg.radii.clone(),
                dirichlet_schedule: cfg.dirichlet_schedule.resolve("dirichlet_schedule").map_err(CliError::Validation)?,
                numerics: num,
            };
            let r = continuity_study(&c).map_err(eff)?;
            let est: serde_json::Map<String, Value> = r.estimates().iter().map(|(k, e)| (k.to_string(), json!(e))).collect();
            p.report = json!({
                "theta0": r.theta0,
                "estimates": est,
                "corner_fit": { "slope": r.corner_limit.slope, "fit_residual": r.corner_limit.fit_residual, "model_error": r.corner_limit.model_error },
                "sector_fit": { "slope": r.sector_limit.slope, "fit_residual": r.sector_limit.fit_residual, "model_error": r.sector_limit.model_error },
                "corner_studies": r.corner_studies.iter().map(corner_json).collect::<Vec<_>>(),
                "sector_studies": r.sector_studies.iter().map(sector_json).collect::<Vec<_>>(),
                "dirichlet_study": dirichlet_json(&r.dirichlet_study),
                "sector_monotone_in_delta": r.sector_monotone_in_delta,
                "all_negative": r.all_negative,
                "pairwise_consistent": r.pairwise_consistent,
                "pass": r.pass,
                "status": if r.pass { "PASS" } else { "FAIL" },
            });
            p.records = r.corner_studies.iter().flat_map(corner_records).collect();
            p.records.extend(r.sector_studies.iter().flat_map(|s| s.records.iter().cloned()));
            p.records.extend(r.dirichlet_study.records.iter().cloned());
            p.svg = Some(plot::continuity(&p.records, r.theta0, Some((r.dirichlet.value, r.dirichlet.error))));
            p.snapshot = r.corner_studies.into_iter().last().and_then(|s| s.snapshot);
        }
        StudyKind::Conjecture => {
            let th = theta0(1e-8)?;
            let (above, below) = split_mus(cfg, th);
            if !below.is_empty() {
                return Err(CliError::Validation(format!("conjecture studies take mu above Theta0 = {th:.10} only, got {below:?}")));
            }
            let r = conjecture_check(cfg.beta, &above, &schedule(cfg)?, &num).map_err(eff)?;
            p.report = json!({
                "theta0": r.theta0,
                "limit": r.limit.value,
                "error": r.limit.error,
                "slope": r.limit.slope,
                "prediction": r.prediction,
                "sigmas": r.sigmas,
                "verdict": r.verdict,
                "studies": r.studies.iter().map(corner_json).collect::<Vec<_>>(),
            });
            p.records = r.studies.iter().flat_map(corner_records).collect();
            p.svg = Some(plot::continuity(&p.records, r.theta0, None));
            p.snapshot = r.studies.into_iter().last().and_then(|s| s.snapshot);
        }
    }
    Ok(p)
}

const CSV_HEADER: &str = "kind,beta,mu,length,depth,radius,h,energy,reference,corrected,virial_defect,sup,converged,start";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn records_csv(records: &[EnergyRecord]) -> String {
    let mut s = format!("{CSV_HEADER}\n");
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.kind.as_str(),
            opt(r.beta),
            r.mu,
            opt(r.length),
            opt(r.depth),
            opt(r.radius),
            opt(r.h),
            r.energy,
            opt(r.reference),
            r.corrected(),
            opt(r.virial_defect),
            opt(r.sup),
            r.converged,
            r.start.as_deref().unwrap_or("")
        );
    }
    s
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn output_dir(cfg: &StudyConfig) -> PathBuf {
    let root = std::env::var_os("CORNER_GL_RESULTS")
        .map(PathBuf::from)
        .or_else(|| cfg.output_root.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("results"));
    root.join(&cfg.name)
}

/// Runs a study and writes `records.jsonl`, `report.json`, `report.csv` and
/// (for 2D studies) `plot.svg` under the output directory. Returns the report.
pub fn run(cfg: &StudyConfig, outs: &Outputs) -> Result<Value, CliError> {
    outs.check(cfg.study)?;
    let hash = cfg.hash();
    let mut p = compute(cfg)?;
    for r in &mut p.records {
        r.config_hash = hash.clone();
    }
    let dir = output_dir(cfg);
    std::fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    if !p.records.is_empty() {
        append_records(&dir.join("records.jsonl"), &p.records).map_err(|e| CliError::Io(e.to_string()))?;
    }
    let mut report = json!({ "study": cfg.study, "name": cfg.name, "beta": cfg.beta, "config_hash": hash, "config": cfg });
    if let (Value::Object(dst), Value::Object(src)) = (&mut report, p.report) {
        dst.extend(src);
    }
    report["num_records"] = json!(p.records.len());
    write(&dir.join("report.json"), &serde_json::to_string_pretty(&report).expect("report serializes"))?;
    write(&dir.join("report.csv"), &records_csv(&p.records))?;
    if let Some(svg) = &p.svg {
        write(&dir.join("plot.svg"), svg)?;
    }
    let mesh = p.snapshot.as_ref().map(|s| &s.mesh).or(p.mesh.as_ref());
    if let (Some(path), Some(m)) = (&outs.mesh_out, mesh) {
        write_mesh(m, path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    }
    if let Some(s) = &p.snapshot {
        if let Some(path) = &outs.field_out {
            write(path, &s.minimizer.field.to_csv(&s.mesh))?;
        }
        if let Some(path) = &outs.trace_out {
            write(path, &s.minimizer.trace_csv())?;
        }
    }
    if let (Some(path), Some(prof)) = (&outs.profile_out, &p.profile) {
        write(path, &prof.to_csv())?;
    }
    if let (Some(path), Some(csv)) = (&outs.eig_out, &p.eig_csv) {
        write(path, csv)?;
    }
    if let (Some(path), Some((a, m))) = (&outs.matrix_out, &p.matrices) {
        write(path, a)?;
        let mut mass = path.clone().into_os_string();
        mass.push(".mass");
        write(Path::new(&mass), m)?;
    }
    Ok(report)
}
