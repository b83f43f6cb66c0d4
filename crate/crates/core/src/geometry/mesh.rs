use super::polygon::Polygon;
use super::{dist_point_segment, BoundaryTag, GeometryError, Point};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use spade::{AngleLimit, ConstrainedDelaunayTriangulation, Point2, RefinementParameters, Triangulation};
use std::collections::{BTreeMap, HashMap};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshOptions {
    /// Target edge length.
    pub h: f64,
    /// Minimum interior angle in degrees.
    pub min_angle_deg: f64,
    /// Use `h / 4` within distance 1 of the corner vertex.
    pub vertex_grading: bool,
}

impl MeshOptions {
    pub fn new(h: f64) -> Self {
        Self { h, min_angle_deg: 20.0, vertex_grading: false }
    }

    pub fn graded(mut self, on: bool) -> Self {
        self.vertex_grading = on;
        self
    }

    fn validate(&self) -> Result<(), GeometryError> {
        if !(self.h > 0.0) {
            return Err(GeometryError::Invalid(format!("mesh size h must be positive, got {}", self.h)));
        }
        if !(self.min_angle_deg >= 0.0 && self.min_angle_deg <= 33.0) {
            return Err(GeometryError::Invalid(format!(
                "angle floor must lie in [0, 33] degrees, got {}",
                self.min_angle_deg
            )));
        }
        Ok(())
    }
}

/// Triangle mesh with per-edge boundary tags. Edge `k` of triangle `i` joins
/// `triangles[i][k]` and `triangles[i][(k + 1) % 3]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    pub vertices: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    pub edge_tags: Vec<[Option<BoundaryTag>; 3]>,
    pub h: f64,
}

impl Mesh {
    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_points(&self, i: usize) -> [Point; 3] {
        let t = self.triangles[i];
        [self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]]]
    }

    pub fn signed_area(&self, i: usize) -> f64 {
        let [a, b, c] = self.triangle_points(i);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    pub fn area(&self) -> f64 {
        (0..self.num_triangles()).map(|i| self.signed_area(i)).sum()
    }

    pub fn boundary_edges(&self) -> impl Iterator<Item = (usize, usize, BoundaryTag)> + '_ {
        self.triangles.iter().zip(&self.edge_tags).flat_map(|(t, tags)| {
            (0..3).filter_map(move |k| tags[k].map(|tag| (t[k], t[(k + 1) % 3], tag)))
        })
    }

    pub fn boundary_length(&self, tag: Option<BoundaryTag>) -> f64 {
        self.boundary_edges()
            .filter(|e| tag.is_none_or(|t| t == e.2))
            .map(|(a, b, _)| dist(self.vertices[a], self.vertices[b]))
            .sum()
    }

    /// Nodes lying on at least one edge whose tag is in `tags`.
    pub fn nodes_on(&self, tags: &[BoundaryTag]) -> Vec<bool> {
        let mut on = vec![false; self.num_vertices()];
        for (a, b, tag) in self.boundary_edges() {
            if tags.contains(&tag) {
                on[a] = true;
                on[b] = true;
            }
        }
        on
    }

    pub fn max_edge(&self) -> f64 {
        let mut m = 0.0f64;
        for i in 0..self.num_triangles() {
            let p = self.triangle_points(i);
            for k in 0..3 {
                m = m.max(dist(p[k], p[(k + 1) % 3]));
            }
        }
        m
    }

    /// Smallest interior angle over all triangles, in degrees.
    pub fn min_angle_deg(&self) -> f64 {
        let mut m = 180.0f64;
        for i in 0..self.num_triangles() {
            m = m.min(min_angle(&self.triangle_points(i)));
        }
        m
    }

    pub fn vertex_index(&self, x: Point, tol: f64) -> Option<usize> {
        self.vertices.iter().position(|v| dist(*v, x) <= tol)
    }

    /// SHA-256 of the text serialisation.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(super::io::to_text(self).as_bytes());
        hex::encode(hasher.finalize())
    }
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn min_angle(p: &[Point; 3]) -> f64 {
    let mut m = 180.0f64;
    for k in 0..3 {
        let (a, b, c) = (p[k], p[(k + 1) % 3], p[(k + 2) % 3]);
        let u = [b[0] - a[0], b[1] - a[1]];
        let v = [c[0] - a[0], c[1] - a[1]];
        let cross = (u[0] * v[1] - u[1] * v[0]).abs();
        let dot = u[0] * v[0] + u[1] * v[1];
        m = m.min(cross.atan2(dot).to_degrees());
    }
    m
}

/// Meshes of a family of polygons cut out of one shared background
/// triangulation, so that every mesh is an exact sub-mesh of it.
#[derive(Debug, Clone)]
pub struct NestedMeshes {
    pub meshes: Vec<Mesh>,
    /// Background vertex id of every local vertex, per mesh.
    pub global_ids: Vec<Vec<usize>>,
}

impl NestedMeshes {
    /// Zero-extends (or restricts) nodal values from mesh `from` to mesh `to`.
    pub fn transfer<T: Copy + Default>(&self, from: usize, to: usize, values: &[T]) -> Vec<T> {
        let lookup: HashMap<usize, usize> =
            self.global_ids[from].iter().enumerate().map(|(local, &g)| (g, local)).collect();
        self.global_ids[to]
            .iter()
            .map(|g| lookup.get(g).map_or_else(T::default, |&i| values[i]))
            .collect()
    }
}

/// Conforming quality triangulation of one polygon.
pub fn mesh(polygon: &Polygon, opts: &MeshOptions) -> Result<Mesh, GeometryError> {
    let mut nested = mesh_nested(std::slice::from_ref(polygon), 0, opts)?;
    Ok(nested.meshes.pop().expect("one mesh"))
}

/// Triangulates `polygons[background]` conforming to the edges of every
/// polygon in the family and extracts one mesh per polygon. Each polygon must
/// lie inside the background polygon.
pub fn mesh_nested(polygons: &[Polygon], background: usize, opts: &MeshOptions) -> Result<NestedMeshes, GeometryError> {
    opts.validate()?;
    let hull = polygons
        .get(background)
        .ok_or_else(|| GeometryError::Invalid("background polygon index out of range".into()))?;
    let scale = hull.diameter();
    let tol = 1e-9 * scale.max(1.0);
    let corner = hull.corner.map(|i| hull.vertices[i]);
    let size = |x: Point| -> f64 {
        match corner {
            Some(v) if opts.vertex_grading && dist(x, v) < 1.0 => 0.25 * opts.h,
            _ => opts.h,
        }
    };

    let mut segments: Vec<(Point, Point)> = Vec::new();
    for p in polygons {
        for (a, b, _) in p.edges() {
            segments.push((a, b));
        }
    }
    let pieces = split_segments(&segments, tol);

    // boundary points, deduplicated on a tolerance grid
    let mut points = PointSet::new(tol);
    let mut edges: Vec<[usize; 2]> = Vec::new();
    for (a, b) in &pieces {
        let len = dist(*a, *b);
        let hs = size(*a).min(size(*b));
        let n = ((len / hs).ceil() as usize).max(1);
        let mut prev = points.insert(*a);
        for k in 1..=n {
            let q = if k == n {
                *b
            } else {
                let u = k as f64 / n as f64;
                [a[0] + u * (b[0] - a[0]), a[1] + u * (b[1] - a[1])]
            };
            let id = points.insert(q);
            if id != prev {
                edges.push([prev, id]);
            }
            prev = id;
        }
    }
    // The domain is embedded in a slightly larger axis-aligned box so that its
    // boundary is never part of the convex hull: spade's refinement does not
    // terminate on nearly collinear hull vertices.
    let chull = convex_hull(&hull.vertices);
    let inside_hull = |x: Point| -> bool {
        (0..chull.len()).all(|k| {
            let (a, b) = (chull[k], chull[(k + 1) % chull.len()]);
            (b[0] - a[0]) * (x[1] - a[1]) - (b[1] - a[1]) * (x[0] - a[0]) > 0.0
        })
    };
    let mut buckets = Buckets::new(opts.h);
    for (i, p) in points.points.iter().enumerate() {
        buckets.insert(*p, i);
    }

    // interior seeds: hexagonal lattice at the local size
    let (lo, hi) = hull.bounding_box();
    let mut seeds = Vec::new();
    let mut lattice = |spacing: f64, lo: Point, hi: Point, keep: &dyn Fn(Point) -> bool| {
        let dy = spacing * 3f64.sqrt() / 2.0;
        let rows = ((hi[1] - lo[1]) / dy).ceil() as i64 + 1;
        let cols = ((hi[0] - lo[0]) / spacing).ceil() as i64 + 2;
        for j in 0..rows {
            let shift = if j % 2 == 0 { 0.0 } else { 0.5 * spacing };
            for i in -1..cols {
                let x = [lo[0] + i as f64 * spacing + shift, lo[1] + j as f64 * dy];
                if keep(x) {
                    seeds.push(x);
                }
            }
        }
    };
    let graded = corner.filter(|_| opts.vertex_grading);
    lattice(opts.h, lo, hi, &|x| graded.is_none_or(|v| dist(x, v) >= 1.0 + opts.h));
    if let Some(v) = graded {
        let fine_lo = [v[0] - 1.0, v[1] - 1.0];
        let fine_hi = [v[0] + 1.0, v[1] + 1.0];
        lattice(0.25 * opts.h, fine_lo, fine_hi, &|x| dist(x, v) < 1.0);
    }
    let mut all_points = points.points.clone();
    for x in seeds {
        if !inside_hull(x) {
            continue;
        }
        let r = 0.75 * size(x);
        if buckets.any_within(x, r, &points.points) {
            continue;
        }
        all_points.push(x);
    }

    let margin = 2.0 * opts.h;
    for corner in [[lo[0] - margin, lo[1] - margin], [hi[0] + margin, lo[1] - margin], [hi[0] + margin, hi[1] + margin], [lo[0] - margin, hi[1] + margin]] {
        all_points.push(corner);
    }
    let vertices: Vec<Point2<f64>> = all_points.iter().map(|p| Point2::new(p[0], p[1])).collect();
    let mut cdt: ConstrainedDelaunayTriangulation<Point2<f64>> =
        ConstrainedDelaunayTriangulation::bulk_load_cdt(vertices, edges)
            .map_err(|e| GeometryError::Mesh(format!("constrained triangulation failed: {e:?}")))?;

    let max_area = 0.5 * opts.h * opts.h;
    let budget = 20 * cdt.num_vertices() + 1000;
    for round in 0..6 {
        let params = RefinementParameters::<f64>::new()
            .with_angle_limit(AngleLimit::from_deg(opts.min_angle_deg))
            .with_max_allowed_area(max_area)
            .with_max_additional_vertices(budget);
        let result = cdt.refine(params);
        if !result.refinement_complete {
            return Err(GeometryError::Mesh(format!(
                "quality refinement did not finish at h = {} (angle floor {} deg, {} vertices)",
                opts.h,
                opts.min_angle_deg,
                cdt.num_vertices()
            )));
        }
        // split over-long edges inside the domain
        let mut mids = Vec::new();
        for e in cdt.undirected_edges() {
            let [p, q] = e.positions();
            let (a, b) = ([p.x, p.y], [q.x, q.y]);
            let m = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
            if dist(a, b) > 1.5 * size(m).max(size(a)).max(size(b)) * 0.999 && inside_hull(m) {
                mids.push(m);
            }
        }
        if mids.is_empty() {
            break;
        }
        if round == 5 {
            return Err(GeometryError::Mesh("edge length bound 1.5 h not reached".into()));
        }
        for m in mids {
            cdt.insert(Point2::new(m[0], m[1]))
                .map_err(|e| GeometryError::Mesh(format!("vertex insertion failed: {e:?}")))?;
        }
    }

    let bg_vertices: Vec<Point> = cdt.vertices().map(|v| [v.position().x, v.position().y]).collect();
    let bg_triangles: Vec<[usize; 3]> = cdt
        .inner_faces()
        .map(|f| {
            let v = f.vertices();
            [v[0].fix().index(), v[1].fix().index(), v[2].fix().index()]
        })
        .collect();

    let mut meshes = Vec::with_capacity(polygons.len());
    let mut global_ids = Vec::with_capacity(polygons.len());
    for poly in polygons {
        let (m, ids) = extract(poly, &bg_vertices, &bg_triangles, opts.h, tol)?;
        let floor = opts.min_angle_deg.min(min_input_angle(poly)) - 1e-6;
        if m.min_angle_deg() < floor {
            return Err(GeometryError::Mesh(format!(
                "minimum angle {:.2} deg below the floor {:.2} deg",
                m.min_angle_deg(),
                opts.min_angle_deg
            )));
        }
        meshes.push(m);
        global_ids.push(ids);
    }
    Ok(NestedMeshes { meshes, global_ids })
}

/// Counter-clockwise convex hull (monotone chain), collinear points dropped.
fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    let cross = |o: Point, a: Point, b: Point| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut lower: Vec<Point> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Point> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn min_input_angle(p: &Polygon) -> f64 {
    let n = p.len();
    let mut m = 180.0f64;
    for i in 0..n {
        let prev = p.vertices[(i + n - 1) % n];
        let cur = p.vertices[i];
        let next = p.vertices[(i + 1) % n];
        let u = [prev[0] - cur[0], prev[1] - cur[1]];
        let v = [next[0] - cur[0], next[1] - cur[1]];
        let ang = (u[0] * v[1] - u[1] * v[0]).abs().atan2(u[0] * v[0] + u[1] * v[1]).to_degrees();
        m = m.min(ang);
    }
    // refinement cannot improve angles at sharp input corners
    m / 2.0
}

fn extract(
    poly: &Polygon,
    bg_vertices: &[Point],
    bg_triangles: &[[usize; 3]],
    h: f64,
    tol: f64,
) -> Result<(Mesh, Vec<usize>), GeometryError> {
    let kept: Vec<[usize; 3]> = bg_triangles
        .iter()
        .filter(|t| {
            let c = [
                (bg_vertices[t[0]][0] + bg_vertices[t[1]][0] + bg_vertices[t[2]][0]) / 3.0,
                (bg_vertices[t[0]][1] + bg_vertices[t[1]][1] + bg_vertices[t[2]][1]) / 3.0,
            ];
            poly.contains(c)
        })
        .copied()
        .collect();
    if kept.is_empty() {
        return Err(GeometryError::Mesh("polygon contains no background triangles".into()));
    }
    let mut local: BTreeMap<usize, usize> = BTreeMap::new();
    for t in &kept {
        for &v in t {
            local.insert(v, 0);
        }
    }
    for (i, (_, slot)) in local.iter_mut().enumerate() {
        *slot = i;
    }
    let ids: Vec<usize> = local.keys().copied().collect();
    let vertices: Vec<Point> = ids.iter().map(|&g| bg_vertices[g]).collect();
    let triangles: Vec<[usize; 3]> = kept.iter().map(|t| [local[&t[0]], local[&t[1]], local[&t[2]]]).collect();

    let mut edge_count: HashMap<(usize, usize), usize> = HashMap::new();
    for t in &triangles {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            *edge_count.entry((a.min(b), a.max(b))).or_insert(0) += 1;
        }
    }
    let mut edge_tags = Vec::with_capacity(triangles.len());
    for t in &triangles {
        let mut tags = [None; 3];
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            if edge_count[&(a.min(b), a.max(b))] == 1 {
                let (pa, pb) = (vertices[a], vertices[b]);
                let tag = poly
                    .edges()
                    .find(|(u, v, _)| dist_point_segment(pa, *u, *v) <= tol && dist_point_segment(pb, *u, *v) <= tol)
                    .map(|e| e.2)
                    .ok_or_else(|| {
                        GeometryError::Mesh(format!("boundary edge {pa:?}-{pb:?} does not lie on the polygon"))
                    })?;
                tags[k] = Some(tag);
            }
        }
        edge_tags.push(tags);
    }
    Ok((Mesh { vertices, triangles, edge_tags, h }, ids))
}

/// Splits segments at mutual intersections, shared points and overlaps, and
/// removes duplicates.
fn split_segments(segments: &[(Point, Point)], tol: f64) -> Vec<(Point, Point)> {
    let mut out: Vec<(Point, Point)> = Vec::new();
    let mut seen = PointSet::new(tol);
    let mut keys = std::collections::BTreeSet::new();
    for (i, &(a, b)) in segments.iter().enumerate() {
        let d = [b[0] - a[0], b[1] - a[1]];
        let len2 = d[0] * d[0] + d[1] * d[1];
        let mut params = vec![0.0, 1.0];
        let on_segment = |x: Point, params: &mut Vec<f64>| {
            if dist_point_segment(x, a, b) <= tol {
                let u = ((x[0] - a[0]) * d[0] + (x[1] - a[1]) * d[1]) / len2;
                params.push(u.clamp(0.0, 1.0));
            }
        };
        for (j, &(c, e)) in segments.iter().enumerate() {
            if i == j {
                continue;
            }
            on_segment(c, &mut params);
            on_segment(e, &mut params);
            if let Some(x) = proper_intersection(a, b, c, e) {
                on_segment(x, &mut params);
            }
        }
        params.sort_by(|x, y| x.total_cmp(y));
        let mut pts: Vec<Point> = Vec::new();
        for u in params {
            let x = if u == 0.0 {
                a
            } else if u == 1.0 {
                b
            } else {
                [a[0] + u * d[0], a[1] + u * d[1]]
            };
            let id = seen.insert(x);
            let x = seen.points[id];
            if pts.last().is_none_or(|p| dist(*p, x) > tol) {
                pts.push(x);
            }
        }
        for w in pts.windows(2) {
            let ia = seen.insert(w[0]);
            let ib = seen.insert(w[1]);
            if keys.insert((ia.min(ib), ia.max(ib))) {
                out.push((w[0], w[1]));
            }
        }
    }
    out
}

fn proper_intersection(a: Point, b: Point, c: Point, d: Point) -> Option<Point> {
    let r = [b[0] - a[0], b[1] - a[1]];
    let s = [d[0] - c[0], d[1] - c[1]];
    let denom = r[0] * s[1] - r[1] * s[0];
    if denom.abs() < 1e-14 * (r[0].hypot(r[1]) * s[0].hypot(s[1])) {
        return None;
    }
    let q = [c[0] - a[0], c[1] - a[1]];
    let t = (q[0] * s[1] - q[1] * s[0]) / denom;
    let u = (q[0] * r[1] - q[1] * r[0]) / denom;
    if (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u) {
        Some([a[0] + t * r[0], a[1] + t * r[1]])
    } else {
        None
    }
}

/// Points merged within a tolerance, in insertion order.
struct PointSet {
    tol: f64,
    points: Vec<Point>,
    grid: HashMap<(i64, i64), Vec<usize>>,
}

impl PointSet {
    fn new(tol: f64) -> Self {
        Self { tol, points: Vec::new(), grid: HashMap::new() }
    }

    fn key(&self, x: Point) -> (i64, i64) {
        let cell = 16.0 * self.tol;
        ((x[0] / cell).floor() as i64, (x[1] / cell).floor() as i64)
    }

    fn insert(&mut self, x: Point) -> usize {
        let (kx, ky) = self.key(x);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(list) = self.grid.get(&(kx + dx, ky + dy)) {
                    for &i in list {
                        if dist(self.points[i], x) <= self.tol {
                            return i;
                        }
                    }
                }
            }
        }
        let id = self.points.len();
        self.points.push(x);
        self.grid.entry((kx, ky)).or_default().push(id);
        id
    }
}

struct Buckets {
    cell: f64,
    map: HashMap<(i64, i64), Vec<usize>>,
}

impl Buckets {
    fn new(cell: f64) -> Self {
        Self { cell, map: HashMap::new() }
    }

    fn key(&self, x: Point) -> (i64, i64) {
        ((x[0] / self.cell).floor() as i64, (x[1] / self.cell).floor() as i64)
    }

    fn insert(&mut self, x: Point, id: usize) {
        let k = self.key(x);
        self.map.entry(k).or_default().push(id);
    }

    fn any_within(&self, x: Point, r: f64, points: &[Point]) -> bool {
        let (kx, ky) = self.key(x);
        let reach = (r / self.cell).ceil() as i64;
        for dx in -reach..=reach {
            for dy in -reach..=reach {
                if let Some(list) = self.map.get(&(kx + dx, ky + dy)) {
                    if list.iter().any(|&i| dist(points[i], x) < r) {
                        return true;
                    }
                }
            }
        }
        false
    }
}
