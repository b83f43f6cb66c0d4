use super::{BoundaryTag, GeometryError, Point, SectorGeometry};
use serde::{Deserialize, Serialize};

/// Simple polygon, counter-clockwise, with one tag per edge `i -> i + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    pub vertices: Vec<Point>,
    pub tags: Vec<BoundaryTag>,
    /// Index of the corner vertex `V`, when present.
    pub corner: Option<usize>,
}

impl Polygon {
    pub fn new(vertices: Vec<Point>, tags: Vec<BoundaryTag>, corner: Option<usize>) -> Result<Self, GeometryError> {
        if vertices.len() < 3 || vertices.len() != tags.len() {
            return Err(GeometryError::Invalid("polygon needs >= 3 vertices and one tag per edge".into()));
        }
        let p = Self { vertices, tags, corner };
        if !(p.signed_area() > 0.0) {
            return Err(GeometryError::Invalid("polygon must be counter-clockwise with positive area".into()));
        }
        Ok(p)
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn edge(&self, i: usize) -> (Point, Point) {
        (self.vertices[i], self.vertices[(i + 1) % self.len()])
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point, Point, BoundaryTag)> + '_ {
        (0..self.len()).map(|i| {
            let (a, b) = self.edge(i);
            (a, b, self.tags[i])
        })
    }

    /// Shoelace formula.
    pub fn signed_area(&self) -> f64 {
        let n = self.vertices.len();
        let mut acc = 0.0;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            acc += a[0] * b[1] - b[0] * a[1];
        }
        0.5 * acc
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    pub fn perimeter(&self) -> f64 {
        self.edges().map(|(a, b, _)| (b[0] - a[0]).hypot(b[1] - a[1])).sum()
    }

    pub fn perimeter_with(&self, tag: BoundaryTag) -> f64 {
        self.edges().filter(|e| e.2 == tag).map(|(a, b, _)| (b[0] - a[0]).hypot(b[1] - a[1])).sum()
    }

    /// Even-odd point-in-polygon test.
    pub fn contains(&self, x: Point) -> bool {
        let n = self.vertices.len();
        let mut inside = false;
        let mut j = n - 1;
        for i in 0..n {
            let (a, b) = (self.vertices[i], self.vertices[j]);
            if (a[1] > x[1]) != (b[1] > x[1]) {
                let cross = a[0] + (x[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
                if x[0] < cross {
                    inside = !inside;
                }
            }
            j = i;
        }
        inside
    }

    pub fn bounding_box(&self) -> (Point, Point) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for v in &self.vertices {
            for k in 0..2 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        (lo, hi)
    }

    pub fn diameter(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        (hi[0] - lo[0]).hypot(hi[1] - lo[1])
    }

    /// Unit square `[0,1]^2` with all edges tagged `tag`.
    pub fn unit_square(tag: BoundaryTag) -> Self {
        Self {
            vertices: vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            tags: vec![tag; 4],
            corner: None,
        }
    }
}

/// Hexagon `A-V-B-E-D-C` of the corner region, stored counter-clockwise as
/// `A, C, D, E, B, V`.
pub fn build_corner_region(geom: &SectorGeometry) -> Result<Polygon, GeometryError> {
    geom.check_corner()?;
    let l = geom.require_length()?;
    let ell = geom.require_depth()?;
    let a = geom.tubular_to_cartesian(-l, 0.0);
    let c = geom.tubular_to_cartesian(-l, ell);
    let b = geom.tubular_to_cartesian(l, 0.0);
    let e = geom.tubular_to_cartesian(l, ell);
    let d = geom.tubular_to_cartesian(-ell / geom.half_tan(), ell);
    use BoundaryTag::*;
    Polygon::new(vec![a, c, d, e, b, [0.0, 0.0]], vec![Bd, Inner, Inner, Bd, Outer, Outer], Some(5))
}

/// Kite `A-V-B-D'` whose transverse sides are normal to the legs at `|s| = L`
/// and meet on the bisectrix; stored counter-clockwise as `A, D', B, V`.
pub fn build_wedge(geom: &SectorGeometry) -> Result<Polygon, GeometryError> {
    let l = geom.require_length()?;
    if !(l > 0.0) {
        return Err(GeometryError::Invalid(format!("wedge half-length must be positive, got {l}")));
    }
    let a = geom.tubular_to_cartesian(-l, 0.0);
    let b = geom.tubular_to_cartesian(l, 0.0);
    let tip = geom.tubular_to_cartesian(-l, l * geom.half_tan());
    use BoundaryTag::*;
    Polygon::new(vec![a, tip, b, [0.0, 0.0]], vec![Bd, Bd, Outer, Outer], Some(3))
}

/// Sector truncated at radius `R`, the arc replaced by `arc_segments` chords.
pub fn build_truncated_sector(geom: &SectorGeometry, arc_segments: usize) -> Result<Polygon, GeometryError> {
    let r = geom.require_radius()?;
    if arc_segments < 2 {
        return Err(GeometryError::Invalid("need at least 2 arc segments".into()));
    }
    let mut vertices = vec![[0.0, 0.0]];
    let mut tags = vec![BoundaryTag::Outer];
    for k in 0..=arc_segments {
        let th = geom.beta * k as f64 / arc_segments as f64;
        vertices.push([r * th.cos(), r * th.sin()]);
        tags.push(if k == arc_segments { BoundaryTag::Outer } else { BoundaryTag::Artificial });
    }
    // exact leg directions
    vertices[1] = [r, 0.0];
    vertices[arc_segments + 1] = geom.tubular_to_cartesian(r, 0.0);
    Polygon::new(vertices, tags, Some(0))
}

/// Annular piece `{r_in < |x| < r_out}` of the sector: legs tagged
/// `Outer`, both arcs `Artificial`.
pub fn build_annular_sector(beta: f64, r_in: f64, r_out: f64, arc_segments: usize) -> Result<Polygon, GeometryError> {
    let geom = SectorGeometry::new_closed(beta)?;
    if !(r_in > 0.0 && r_out > r_in) {
        return Err(GeometryError::Invalid(format!("need 0 < r_in < r_out, got {r_in}, {r_out}")));
    }
    if arc_segments < 2 {
        return Err(GeometryError::Invalid("need at least 2 arc segments".into()));
    }
    let inner = (arc_segments as f64 * r_in / r_out).ceil().max(2.0) as usize;
    let mut vertices = Vec::new();
    let mut tags = Vec::new();
    vertices.push([r_in, 0.0]);
    tags.push(BoundaryTag::Outer);
    for k in 0..=arc_segments {
        let th = beta * k as f64 / arc_segments as f64;
        vertices.push([r_out * th.cos(), r_out * th.sin()]);
        tags.push(if k == arc_segments { BoundaryTag::Outer } else { BoundaryTag::Artificial });
    }
    *vertices.last_mut().unwrap() = geom.tubular_to_cartesian(r_out, 0.0);
    for k in (1..=inner).rev() {
        let th = beta * k as f64 / inner as f64;
        vertices.push([r_in * th.cos(), r_in * th.sin()]);
        tags.push(BoundaryTag::Artificial);
    }
    vertices[arc_segments + 2] = geom.tubular_to_cartesian(r_in, 0.0);
    Polygon::new(vertices, tags, None)
}

/// Arc resolution keeping chords at most `h` long.
pub fn default_arc_segments(beta: f64, radius: f64, h: f64) -> usize {
    ((beta * radius / h).ceil() as usize).max(8)
}
