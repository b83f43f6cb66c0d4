//! Study descriptors: parsing, defaults and resolution.

use corner_gl::effective::{Law, Numerics, Schedule};
use corner_gl::glmin::LbfgsOptions;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::f64::consts::{FRAC_PI_2, PI};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum StudyKind {
    Theta0,
    MuBeta,
    Oned,
    Sector,
    Corner,
    Dirichlet,
    Continuity,
    Conjecture,
}

impl StudyKind {
    pub const ALL: [StudyKind; 8] = [
        Self::Theta0,
        Self::MuBeta,
        Self::Oned,
        Self::Sector,
        Self::Corner,
        Self::Dirichlet,
        Self::Continuity,
        Self::Conjecture,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Theta0 => "theta0",
            Self::MuBeta => "mu_beta",
            Self::Oned => "oned",
            Self::Sector => "sector",
            Self::Corner => "corner",
            Self::Dirichlet => "dirichlet",
            Self::Continuity => "continuity",
            Self::Conjecture => "conjecture",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LawName {
    LengthFromDepth,
    DepthFromLength,
}

/// `[schedule]` as written. Depth lists go with `length_from_depth`
/// (`L = ell^power`), length lists with `depth_from_length` (`ell = L^power`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    #[serde(default)]
    pub ell: Vec<f64>,
    #[serde(default)]
    pub length: Vec<f64>,
    #[serde(default)]
    pub law: Option<LawName>,
    #[serde(default)]
    pub power: Option<f64>,
}

impl ScheduleSpec {
    pub fn depths(ell: &[f64]) -> Self {
        Self { ell: ell.to_vec(), length: Vec::new(), law: Some(LawName::LengthFromDepth), power: Some(1.5) }
    }

    pub fn resolve(&self, what: &str) -> Result<Schedule, String> {
        let law = self.law.unwrap_or(if self.ell.is_empty() && !self.length.is_empty() { LawName::DepthFromLength } else { LawName::LengthFromDepth });
        let (values, law) = match law {
            LawName::LengthFromDepth => {
                if !self.length.is_empty() {
                    return Err(format!("{what}: `length` is not used with law length_from_depth, give `ell`"));
                }
                (self.ell.clone(), Law::LengthFromDepth(self.power.unwrap_or(1.5)))
            }
            LawName::DepthFromLength => {
                if !self.ell.is_empty() {
                    return Err(format!("{what}: `ell` is not used with law depth_from_length, give `length`"));
                }
                (self.length.clone(), Law::DepthFromLength(self.power.unwrap_or(2.0 / 3.0)))
            }
        };
        let p = match law {
            Law::LengthFromDepth(p) | Law::DepthFromLength(p) => p,
        };
        if !(p.is_finite() && p > 0.0) {
            return Err(format!("{what}: power must be positive, got {p}"));
        }
        if values.is_empty() {
            return Err(format!("{what}: empty schedule"));
        }
        Ok(Schedule { values, law })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSpec {
    pub h: f64,
}

/// A config file as written; every omitted field takes the study default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub study: Option<StudyKind>,
    pub name: Option<String>,
    pub beta: Option<f64>,
    pub beta_over_pi: Option<f64>,
    pub mu_grid: Option<Vec<f64>>,
    /// Offsets from Theta0, positive above and negative below.
    pub mu_offsets: Option<Vec<f64>>,
    pub schedule: Option<ScheduleSpec>,
    pub dirichlet_schedule: Option<ScheduleSpec>,
    pub radii: Option<Vec<f64>>,
    pub radius: Option<f64>,
    pub extrapolate: Option<bool>,
    pub wedge: Option<bool>,
    pub tol: Option<f64>,
    pub mesh: Option<MeshSpec>,
    pub solver: Option<LbfgsOptions>,
    pub seed: Option<u64>,
    pub output_root: Option<String>,
}

/// Fully resolved study; its JSON form is what gets hashed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub study: StudyKind,
    pub name: String,
    pub beta: f64,
    pub mu_grid: Vec<f64>,
    pub mu_offsets: Vec<f64>,
    pub schedule: ScheduleSpec,
    pub dirichlet_schedule: ScheduleSpec,
    pub radii: Vec<f64>,
    pub radius: f64,
    pub extrapolate: bool,
    pub wedge: bool,
    pub tol: f64,
    pub mesh: MeshSpec,
    pub solver: LbfgsOptions,
    pub seed: u64,
    pub output_root: Option<String>,
}

/// Centralized defaults of every study kind.
pub fn defaults(kind: StudyKind) -> StudyConfig {
    let base = StudyConfig {
        study: kind,
        name: kind.as_str().to_string(),
        beta: FRAC_PI_2,
        mu_grid: Vec::new(),
        mu_offsets: Vec::new(),
        schedule: ScheduleSpec::depths(&[3.0, 4.0, 5.0]),
        dirichlet_schedule: ScheduleSpec::depths(&[4.0, 5.0, 6.0]),
        radii: vec![8.0, 12.0, 16.0],
        radius: 12.0,
        extrapolate: true,
        wedge: true,
        tol: 1e-8,
        mesh: MeshSpec { h: 0.1 },
        solver: LbfgsOptions::default(),
        seed: 0,
        output_root: None,
    };
    match kind {
        StudyKind::Theta0 => base,
        StudyKind::MuBeta => StudyConfig { mesh: MeshSpec { h: 0.05 }, ..base },
        StudyKind::Oned => StudyConfig { mu_grid: vec![0.8], schedule: ScheduleSpec::depths(&[12.0]), ..base },
        StudyKind::Sector => StudyConfig { mu_grid: vec![0.52, 0.55, 0.58], ..base },
        StudyKind::Corner => StudyConfig { mu_grid: vec![0.8], ..base },
        StudyKind::Dirichlet => StudyConfig { schedule: ScheduleSpec::depths(&[4.0, 5.0, 6.0]), ..base },
        StudyKind::Continuity => StudyConfig {
            mu_offsets: vec![0.00125, 0.0025, 0.005, -0.0025, -0.005, -0.01],
            schedule: ScheduleSpec::depths(&[5.0, 6.0, 7.0]),
            radii: vec![24.0, 32.0, 40.0],
            ..base
        },
        StudyKind::Conjecture => StudyConfig {
            mu_offsets: vec![0.00125, 0.0025, 0.005],
            schedule: ScheduleSpec::depths(&[5.0, 6.0, 7.0]),
            ..base
        },
    }
}

pub fn parse(path: &Path) -> Result<RawConfig, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    } else {
        toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }
}

fn positive_list(what: &str, v: &[f64]) -> Result<(), String> {
    if v.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
        return Err(format!("{what} must be positive and finite, got {v:?}"));
    }
    Ok(())
}

impl RawConfig {
    /// Overlays the file on the study defaults and checks everything that can
    /// be checked without numerics.
    pub fn resolve(self) -> Result<StudyConfig, String> {
        let kind = self.study.ok_or("missing `study` (one of theta0, mu_beta, oned, sector, corner, dirichlet, continuity, conjecture)")?;
        let d = defaults(kind);
        let beta = match (self.beta, self.beta_over_pi) {
            (Some(_), Some(_)) => return Err("give either `beta` or `beta_over_pi`, not both".into()),
            (Some(b), None) => b,
            (None, Some(b)) => b * PI,
            (None, None) => d.beta,
        };
        let (mu_grid, mu_offsets) = match (self.mu_grid, self.mu_offsets) {
            (None, None) => (d.mu_grid, d.mu_offsets),
            (g, o) => (g.unwrap_or_default(), o.unwrap_or_default()),
        };
        let c = StudyConfig {
            study: kind,
            name: self.name.unwrap_or(d.name),
            beta,
            mu_grid,
            mu_offsets,
            schedule: self.schedule.unwrap_or(d.schedule),
            dirichlet_schedule: self.dirichlet_schedule.unwrap_or(d.dirichlet_schedule),
            radii: self.radii.unwrap_or(d.radii),
            radius: self.radius.unwrap_or(d.radius),
            extrapolate: self.extrapolate.unwrap_or(d.extrapolate),
            wedge: self.wedge.unwrap_or(d.wedge),
            tol: self.tol.unwrap_or(d.tol),
            mesh: self.mesh.unwrap_or(d.mesh),
            solver: self.solver.unwrap_or(d.solver),
            seed: self.seed.unwrap_or(d.seed),
            output_root: self.output_root,
        };
        c.validate()?;
        Ok(c)
    }
}

impl StudyConfig {
    fn validate(&self) -> Result<(), String> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) || self.name == ".." || self.name == "." {
            return Err(format!("`name` must be a plain directory name, got {:?}", self.name));
        }
        let max_beta = if self.study == StudyKind::MuBeta { PI } else { PI * (1.0 - 1e-12) };
        if !(self.beta > 0.0 && self.beta <= max_beta) {
            return Err(format!("beta must lie in (0, pi){}, got {}", if self.study == StudyKind::MuBeta { "]" } else { "" }, self.beta));
        }
        if self.mu_grid.iter().chain(&self.mu_offsets).any(|m| !m.is_finite()) {
            return Err("mu values must be finite".into());
        }
        if self.mu_grid.iter().any(|&m| !(m > 0.0 && m < 1.0)) {
            return Err(format!("mu_grid entries must lie in (0, 1), got {:?}", self.mu_grid));
        }
        if !(self.mesh.h.is_finite() && self.mesh.h > 0.0 && self.mesh.h <= 1.0) {
            return Err(format!("mesh.h must lie in (0, 1], got {}", self.mesh.h));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(format!("tol must be positive, got {}", self.tol));
        }
        let s = &self.solver;
        if !(s.tol > 0.0 && s.memory > 0 && s.max_iter > 0 && s.armijo > 0.0 && s.armijo < 1.0) {
            return Err(format!("invalid solver options {s:?}"));
        }
        positive_list("radii", &self.radii)?;
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(format!("radius must be positive, got {}", self.radius));
        }
        match self.study {
            StudyKind::Oned | StudyKind::Sector | StudyKind::Corner if self.mus_absolute().is_empty() => {
                return Err(format!("{} study needs at least one mu", self.study.as_str()));
            }
            StudyKind::Corner | StudyKind::Dirichlet | StudyKind::Conjecture | StudyKind::Continuity => {
                positive_list("schedule", &self.schedule.resolve("schedule")?.values)?;
            }
            StudyKind::Oned => positive_list("schedule.ell", &self.schedule.ell)?,
            _ => {}
        }
        if self.study == StudyKind::Continuity {
            positive_list("dirichlet_schedule", &self.dirichlet_schedule.resolve("dirichlet_schedule")?.values)?;
        }
        if self.study == StudyKind::Sector && self.radii.len() < 3 {
            return Err(format!("sector study needs 3 radii, got {:?}", self.radii));
        }
        Ok(())
    }

    /// `mu_grid` as given (offsets need Theta0 and are added by the runner).
    pub fn mus_absolute(&self) -> Vec<f64> {
        if self.mu_offsets.is_empty() {
            self.mu_grid.clone()
        } else {
            vec![f64::NAN; self.mu_grid.len() + self.mu_offsets.len()]
        }
    }

    /// All requested mu values given Theta0, sorted and deduplicated.
    pub fn mus(&self, theta0: f64) -> Vec<f64> {
        let mut v: Vec<f64> = self.mu_grid.iter().copied().chain(self.mu_offsets.iter().map(|d| theta0 + d)).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    pub fn numerics(&self) -> Numerics {
        Numerics { h: self.mesh.h, seed: self.seed, lbfgs: self.solver, ..Numerics::default() }
    }

    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

/// Default descriptors of all studies, as TOML.
pub fn print_defaults() -> String {
    let mut out = String::new();
    for k in StudyKind::ALL {
        let d = defaults(k);
        out.push_str(&format!("# ---- {} ----\n", k.as_str()));
        out.push_str(&toml::to_string(&d).expect("defaults serialize"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(s: &str) -> Result<RawConfig, toml::de::Error> {
        toml::from_str(s)
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(raw("study = \"corner\"\nbogus = 1\n").is_err());
        assert!(raw("study = \"corner\"\n[mesh]\nh = 0.1\nfoo = 2\n").is_err());
        assert!(raw("study = \"corner\"\n[solver]\nmemmory = 3\n").is_err());
    }

    #[test]
    fn defaults_fill_omitted_fields() {
        let c = raw("study = \"corner\"\nmu_grid = [0.8]\n[schedule]\nell = [3, 4, 5]\nlaw = \"length_from_depth\"\n[mesh]\nh = 0.15\n").unwrap().resolve().unwrap();
        assert_eq!(c.mesh.h, 0.15);
        assert_eq!(c.beta, FRAC_PI_2);
        let s = c.schedule.resolve("schedule").unwrap();
        assert_eq!(s.pairs()[2], (5f64.powf(1.5), 5.0));
        assert_eq!(c.hash(), c.clone().hash());
        let mut other = c.clone();
        other.seed = 1;
        assert_ne!(other.hash(), c.hash());
    }

    #[test]
    fn inverse_law_takes_lengths() {
        let s = ScheduleSpec { ell: vec![], length: vec![8.0, 27.0], law: Some(LawName::DepthFromLength), power: None };
        let p = s.resolve("s").unwrap().pairs();
        assert!((p[1].1 - 9.0).abs() < 1e-12);
        let bad = ScheduleSpec { ell: vec![3.0], ..s };
        assert!(bad.resolve("s").is_err());
    }

    #[test]
    fn validation_errors() {
        assert!(raw("mu_grid = [0.8]").unwrap().resolve().is_err());
        assert!(raw("study = \"corner\"\nmu_grid = [1.5]").unwrap().resolve().is_err());
        assert!(raw("study = \"sector\"\nbeta = 4.0").unwrap().resolve().is_err());
        assert!(raw("study = \"sector\"\nbeta = 1.0\nbeta_over_pi = 0.5").unwrap().resolve().is_err());
        assert!(raw("study = \"corner\"\nname = \"../x\"").unwrap().resolve().is_err());
        assert!(raw("study = \"mu_beta\"\nbeta_over_pi = 1.0").unwrap().resolve().is_ok());
    }

    #[test]
    fn defaults_round_trip_through_toml() {
        for k in StudyKind::ALL {
            let d = defaults(k);
            let text = toml::to_string(&d).unwrap();
            let back: StudyConfig = toml::from_str(&text).unwrap();
            assert_eq!(back, d);
        }
    }
}
