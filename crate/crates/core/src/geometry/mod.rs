//! Sector, corner-region and wedge geometry, tubular coordinates and meshes.
//!
//! The sector of opening `beta` is `{0 < theta < beta}` with its vertex `V` at
//! the origin. The first leg runs along the positive x-axis and is
//! parametrised by `s <= 0` through `p(s) = (-s, 0)`; the second leg is
//! `p(s) = s (cos beta, sin beta)` for `s > 0`. On both legs `n` is the inward
//! unit normal and `x(s, t) = p(s) + t n(s)`.

mod io;
mod mesh;
pub mod polygon;

pub use io::{read_mesh, write_mesh};
pub use mesh::{mesh, mesh_nested, Mesh, MeshOptions, NestedMeshes};
pub use polygon::Polygon;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Point = [f64; 2];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid geometry: {0}")]
    Invalid(String),
    #[error("point outside the tubular chart: {0}")]
    OutsideChart(String),
    #[error("meshing failed: {0}")]
    Mesh(String),
    #[error("mesh file: {0}")]
    Io(String),
}

/// Boundary label of a mesh edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryTag {
    /// Part of the sector boundary; natural (Neumann) condition.
    Outer,
    /// Transverse cut at `|s| = L`; Dirichlet.
    Bd,
    /// Inner offset curve at depth `ell`; Dirichlet.
    Inner,
    /// Truncation arc of a finite sector; Dirichlet zero.
    Artificial,
}

impl BoundaryTag {
    pub const ALL: [BoundaryTag; 4] = [Self::Outer, Self::Bd, Self::Inner, Self::Artificial];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Outer => "outer",
            Self::Bd => "bd",
            Self::Inner => "inner",
            Self::Artificial => "artificial",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.as_str() == s)
    }
}

/// Angle and truncation parameters of a sector-type domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectorGeometry {
    pub beta: f64,
    /// Tangential half-length `L`.
    pub length: Option<f64>,
    /// Normal depth `ell`.
    pub depth: Option<f64>,
    /// Truncation radius `R`.
    pub radius: Option<f64>,
}

/// Tubular coordinates `(s, t)` of a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TubularCoords {
    pub s: f64,
    pub t: f64,
}

impl SectorGeometry {
    pub fn new(beta: f64) -> Result<Self, GeometryError> {
        if !(beta > 0.0 && beta < std::f64::consts::PI) {
            return Err(GeometryError::Invalid(format!("beta must lie in (0, pi), got {beta}")));
        }
        Ok(Self { beta, length: None, depth: None, radius: None })
    }

    /// Like [`SectorGeometry::new`] but admits the half-plane `beta = pi`,
    /// which is only meaningful for truncated sectors.
    pub fn new_closed(beta: f64) -> Result<Self, GeometryError> {
        if !(beta > 0.0 && beta <= std::f64::consts::PI) {
            return Err(GeometryError::Invalid(format!("beta must lie in (0, pi], got {beta}")));
        }
        Ok(Self { beta, length: None, depth: None, radius: None })
    }

    pub fn corner(beta: f64, length: f64, depth: f64) -> Result<Self, GeometryError> {
        let g = Self { length: Some(length), depth: Some(depth), ..Self::new(beta)? };
        g.check_corner()?;
        Ok(g)
    }

    pub fn wedge(beta: f64, length: f64) -> Result<Self, GeometryError> {
        if !(length > 0.0) {
            return Err(GeometryError::Invalid(format!("wedge half-length must be positive, got {length}")));
        }
        Ok(Self { length: Some(length), ..Self::new(beta)? })
    }

    pub fn truncated(beta: f64, radius: f64) -> Result<Self, GeometryError> {
        if !(radius > 0.0) {
            return Err(GeometryError::Invalid(format!("sector radius must be positive, got {radius}")));
        }
        Ok(Self { radius: Some(radius), ..Self::new_closed(beta)? })
    }

    pub fn half_tan(&self) -> f64 {
        (0.5 * self.beta).tan()
    }

    pub fn require_length(&self) -> Result<f64, GeometryError> {
        self.length.ok_or_else(|| GeometryError::Invalid("tangential half-length L not set".into()))
    }

    pub fn require_depth(&self) -> Result<f64, GeometryError> {
        self.depth.ok_or_else(|| GeometryError::Invalid("normal depth ell not set".into()))
    }

    pub fn require_radius(&self) -> Result<f64, GeometryError> {
        self.radius.ok_or_else(|| GeometryError::Invalid("truncation radius R not set".into()))
    }

    /// `1 <= ell < L tan(beta/2)`.
    pub fn check_corner(&self) -> Result<(), GeometryError> {
        let l = self.require_length()?;
        let ell = self.require_depth()?;
        if !(ell >= 1.0) {
            return Err(GeometryError::Invalid(format!("depth ell must be >= 1, got {ell}")));
        }
        let cap = l * self.half_tan();
        if !(ell < cap) {
            return Err(GeometryError::Invalid(format!(
                "depth ell = {ell} must be below L tan(beta/2) = {cap}; the inner boundary would self-intersect"
            )));
        }
        Ok(())
    }

    /// Membership in the admissible set `1 <= ell < L tan(beta/2) <= c ell^a`.
    pub fn is_admissible(&self, c: f64, a: f64) -> bool {
        match (self.length, self.depth) {
            (Some(l), Some(ell)) => self.check_corner().is_ok() && l * self.half_tan() <= c * ell.powf(a),
            _ => false,
        }
    }

    /// Unit tangent and inward normal of the leg indexed by the sign of `s`.
    pub fn frame(&self, s: f64) -> (Point, Point) {
        if s <= 0.0 {
            ([-1.0, 0.0], [0.0, 1.0])
        } else {
            let (sb, cb) = self.beta.sin_cos();
            ([cb, sb], [sb, -cb])
        }
    }

    pub fn tubular_to_cartesian(&self, s: f64, t: f64) -> Point {
        let (tan, nor) = self.frame(s);
        [s * tan[0] + t * nor[0], s * tan[1] + t * nor[1]]
    }

    /// Inverse chart. Points at the vertex or on the bisectrix are rejected.
    pub fn cartesian_to_tubular(&self, x: Point) -> Result<TubularCoords, GeometryError> {
        let r = x[0].hypot(x[1]);
        if r < 1e-14 {
            return Err(GeometryError::OutsideChart("the vertex has no tubular coordinates".into()));
        }
        let theta = x[1].atan2(x[0]);
        let half = 0.5 * self.beta;
        if (theta - half).abs() <= 1e-12 * (1.0 + half) {
            return Err(GeometryError::OutsideChart(format!("point {x:?} lies on the bisectrix")));
        }
        Ok(self.tubular_unchecked(x, theta < half))
    }

    /// Leg-specific chart evaluation; `first` selects the leg `s <= 0`.
    pub fn tubular_unchecked(&self, x: Point, first: bool) -> TubularCoords {
        if first {
            TubularCoords { s: -x[0], t: x[1] }
        } else {
            let (sb, cb) = self.beta.sin_cos();
            TubularCoords { s: x[0] * cb + x[1] * sb, t: x[0] * sb - x[1] * cb }
        }
    }

    /// Whether `x` lies on the side of the bisectrix belonging to the first leg
    /// (the bisectrix itself is assigned to the first leg).
    pub fn on_first_side(&self, x: Point) -> bool {
        let half = 0.5 * self.beta;
        let (sh, ch) = half.sin_cos();
        // signed side of the bisectrix line, with rounding slack so that points
        // constructed on it stay on the first leg
        x[0] * sh - x[1] * ch >= -1e-12 * (1.0 + x[0].abs() + x[1].abs())
    }

    /// Euclidean distance to the sector boundary (both legs, as rays).
    pub fn distance_to_boundary(&self, x: Point) -> f64 {
        let b = self.tubular_to_cartesian(1.0, 0.0);
        let d1 = dist_point_ray(x, [1.0, 0.0]);
        let d2 = dist_point_ray(x, b);
        d1.min(d2)
    }
}

fn dist_point_ray(x: Point, dir: Point) -> f64 {
    let proj = x[0] * dir[0] + x[1] * dir[1];
    if proj <= 0.0 {
        x[0].hypot(x[1])
    } else {
        (x[0] - proj * dir[0]).hypot(x[1] - proj * dir[1])
    }
}

pub fn dist_point_segment(x: Point, a: Point, b: Point) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let u = if len2 == 0.0 {
        0.0
    } else {
        (((x[0] - a[0]) * d[0] + (x[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0)
    };
    (x[0] - a[0] - u * d[0]).hypot(x[1] - a[1] - u * d[1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn first_leg_example() {
        for beta in [0.3, PI / 2.0, 2.5] {
            let g = SectorGeometry::new(beta).unwrap();
            let x = g.tubular_to_cartesian(-2.0, 1.0);
            assert!((x[0] - 2.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn round_trip_and_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for beta in [PI / 4.0, PI / 2.0, 2.0] {
            let g = SectorGeometry::new(beta).unwrap();
            for _ in 0..100 {
                let s: f64 = rng.random_range(0.05..5.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                let t = rng.random_range(0.0..0.999) * s.abs() * g.half_tan();
                let x = g.tubular_to_cartesian(s, t);
                let back = g.cartesian_to_tubular(x).unwrap();
                let y = g.tubular_to_cartesian(back.s, back.t);
                assert!((x[0] - y[0]).abs() < 1e-12 && (x[1] - y[1]).abs() < 1e-12);
                assert!((g.distance_to_boundary(x) - t).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn near_second_leg_distance() {
        let g = SectorGeometry::new(PI / 2.0).unwrap();
        let delta = 1e-3;
        // second leg is the positive y-axis
        let x = [delta, 1.0];
        let c = g.cartesian_to_tubular(x).unwrap();
        let oracle = dist_point_segment(x, [0.0, 0.0], [0.0, 100.0]);
        assert!((c.t - oracle).abs() < 1e-14);
        assert!((c.s - 1.0).abs() < 1e-14);
    }

    #[test]
    fn chart_rejections() {
        let g = SectorGeometry::new(PI / 2.0).unwrap();
        assert!(g.cartesian_to_tubular([0.0, 0.0]).is_err());
        assert!(g.cartesian_to_tubular([1.0, 1.0]).is_err());
    }

    #[test]
    fn corner_constraint() {
        assert!(SectorGeometry::corner(PI / 3.0, 2.0, 2.0).is_err());
        assert!(SectorGeometry::corner(PI / 2.0, 4.0, 1.0).is_ok());
        assert!(SectorGeometry::corner(PI / 2.0, 4.0, 0.5).is_err());
        assert!(SectorGeometry::wedge(PI / 2.0, 0.0).is_err());
        assert!(SectorGeometry::new(PI).is_err());
        assert!(SectorGeometry::truncated(PI, 5.0).is_ok());
        let g = SectorGeometry::corner(PI / 2.0, 8.0, 4.0).unwrap();
        assert!(g.is_admissible(1.0, 1.5));
        assert!(!g.is_admissible(1.0, 1.0));
    }
}
