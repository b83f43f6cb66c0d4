use super::{BoundaryTag, GeometryError, Mesh};
use std::fmt::Write as _;
use std::path::Path;

pub(super) fn to_text(m: &Mesh) -> String {
    let mut out = String::with_capacity(64 * (m.num_vertices() + m.num_triangles()));
    let _ = writeln!(out, "vertices {} triangles {}", m.num_vertices(), m.num_triangles());
    for v in &m.vertices {
        let _ = writeln!(out, "{:.17e} {:.17e}", v[0], v[1]);
    }
    for (t, tags) in m.triangles.iter().zip(&m.edge_tags) {
        let tag = |k: usize| tags[k].map_or("-", BoundaryTag::as_str);
        let _ = writeln!(out, "{} {} {} {} {} {}", t[0], t[1], t[2], tag(0), tag(1), tag(2));
    }
    out
}

pub(super) fn from_text(text: &str, h: f64) -> Result<Mesh, GeometryError> {
    let bad = |msg: String| GeometryError::Io(msg);
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| bad("empty mesh file".into()))?;
    let words: Vec<&str> = header.split_whitespace().collect();
    if words.len() != 4 || words[0] != "vertices" || words[2] != "triangles" {
        return Err(bad(format!("bad header line: {header}")));
    }
    let n: usize = words[1].parse().map_err(|_| bad(format!("bad vertex count: {}", words[1])))?;
    let m: usize = words[3].parse().map_err(|_| bad(format!("bad triangle count: {}", words[3])))?;
    let mut vertices = Vec::with_capacity(n);
    for i in 0..n {
        let line = lines.next().ok_or_else(|| bad(format!("missing vertex line {i}")))?;
        let xs: Vec<f64> = line.split_whitespace().map(str::parse).collect::<Result<_, _>>()
            .map_err(|_| bad(format!("bad vertex line: {line}")))?;
        if xs.len() != 2 {
            return Err(bad(format!("bad vertex line: {line}")));
        }
        vertices.push([xs[0], xs[1]]);
    }
    let mut triangles = Vec::with_capacity(m);
    let mut edge_tags = Vec::with_capacity(m);
    for i in 0..m {
        let line = lines.next().ok_or_else(|| bad(format!("missing triangle line {i}")))?;
        let w: Vec<&str> = line.split_whitespace().collect();
        if w.len() != 6 {
            return Err(bad(format!("bad triangle line: {line}")));
        }
        let mut t = [0usize; 3];
        for k in 0..3 {
            t[k] = w[k].parse().map_err(|_| bad(format!("bad index in: {line}")))?;
            if t[k] >= n {
                return Err(bad(format!("vertex index out of range in: {line}")));
            }
        }
        let mut tags = [None; 3];
        for k in 0..3 {
            tags[k] = match w[3 + k] {
                "-" => None,
                s => Some(BoundaryTag::parse(s).ok_or_else(|| bad(format!("unknown tag {s}")))?),
            };
        }
        triangles.push(t);
        edge_tags.push(tags);
    }
    Ok(Mesh { vertices, triangles, edge_tags, h })
}

pub fn write_mesh(mesh: &Mesh, path: &Path) -> std::io::Result<()> {
    std::fs::write(path, to_text(mesh))
}

/// Reads a mesh file; `h` is not stored in the format and is recomputed as
/// the longest edge divided by 1.5.
pub fn read_mesh(path: &Path) -> Result<Mesh, GeometryError> {
    let text = std::fs::read_to_string(path).map_err(|e| GeometryError::Io(e.to_string()))?;
    let mut m = from_text(&text, 0.0)?;
    m.h = m.max_edge() / 1.5;
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{mesh, MeshOptions, Polygon};

    #[test]
    fn text_round_trip() {
        let m = mesh(&Polygon::unit_square(BoundaryTag::Artificial), &MeshOptions::new(0.4)).unwrap();
        let back = from_text(&to_text(&m), m.h).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn rejects_garbage() {
        assert!(from_text("vertices 1 triangles 0\n0 0 0\n", 1.0).is_err());
        assert!(from_text("verts 0\n", 1.0).is_err());
        assert!(from_text("vertices 3 triangles 1\n0 0\n1 0\n0 1\n0 1 2 outer - wall\n", 1.0).is_err());
    }
}
