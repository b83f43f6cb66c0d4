//! Hand-written SVG line plots. The plotted numbers are repeated as a CSV
//! table inside an XML comment so a figure can be regenerated from itself.

use corner_gl::effective::{extrapolate_exponential, EnergyRecord, RecordKind};
use std::collections::BTreeMap;
use std::fmt::Write;

pub struct Series {
    pub label: String,
    /// `(x, y, error)`; a zero error draws no bar.
    pub points: Vec<(f64, f64, f64)>,
}

const W: f64 = 720.0;
const H: f64 = 480.0;
const M: (f64, f64, f64, f64) = (80.0, 30.0, 40.0, 60.0); // left, right, top, bottom
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];

fn bounds(series: &[Series], vlines: &[(f64, String)]) -> (f64, f64, f64, f64) {
    let pts = series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y, e) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y - e);
        y1 = y1.max(y + e);
    }
    for (x, _) in vlines {
        x0 = x0.min(*x);
        x1 = x1.max(*x);
    }
    if !x0.is_finite() {
        return (0.0, 1.0, 0.0, 1.0);
    }
    let pad = |a: f64, b: f64| {
        let d = if b > a { 0.05 * (b - a) } else { 0.5 * a.abs().max(1e-3) };
        (a - d, b + d)
    };
    let (x0, x1) = pad(x0, x1);
    let (y0, y1) = pad(y0, y1);
    (x0, x1, y0, y1)
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn line_plot(title: &str, xlabel: &str, ylabel: &str, series: &[Series], vlines: &[(f64, String)]) -> String {
    let (x0, x1, y0, y1) = bounds(series, vlines);
    let px = |x: f64| M.0 + (x - x0) / (x1 - x0) * (W - M.0 - M.1);
    let py = |y: f64| H - M.3 - (y - y0) / (y1 - y0) * (H - M.2 - M.3);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#);
    s.push_str("<!--\nseries,x,y,error\n");
    for sr in series {
        for (x, y, e) in &sr.points {
            let _ = writeln!(s, "{},{x:e},{y:e},{e:e}", sr.label.replace(['-', ','], "_"));
        }
    }
    for (x, l) in vlines {
        let _ = writeln!(s, "vline {},{x:e},,", l.replace(['-', ','], "_"));
    }
    s.push_str("-->\n");
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#, W / 2.0, esc(title));
    let (l, r, t, b) = (M.0, W - M.1, M.2, H - M.3);
    let _ = writeln!(s, r#"<rect x="{l}" y="{t}" width="{}" height="{}" fill="none" stroke="black"/>"#, r - l, b - t);
    for k in 0..=5 {
        let fx = x0 + (x1 - x0) * k as f64 / 5.0;
        let fy = y0 + (y1 - y0) * k as f64 / 5.0;
        let (xp, yp) = (px(fx), py(fy));
        let _ = writeln!(s, r#"<line x1="{xp:.1}" y1="{b}" x2="{xp:.1}" y2="{}" stroke="black"/><text x="{xp:.1}" y="{}" text-anchor="middle">{}</text>"#, b + 5.0, b + 18.0, tick(fx));
        let _ = writeln!(s, r#"<line x1="{}" y1="{yp:.1}" x2="{l}" y2="{yp:.1}" stroke="black"/><text x="{}" y="{:.1}" text-anchor="end">{}</text>"#, l - 5.0, l - 8.0, yp + 4.0, tick(fy));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (l + r) / 2.0, H - 15.0, esc(xlabel));
    let _ = writeln!(s, r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>"#, (t + b) / 2.0, (t + b) / 2.0, esc(ylabel));
    for (x, label) in vlines {
        let xp = px(*x);
        let _ = writeln!(s, r#"<line x1="{xp:.1}" y1="{t}" x2="{xp:.1}" y2="{b}" stroke="gray" stroke-dasharray="5,4"/><text x="{:.1}" y="{}" fill="gray">{}</text>"#, xp + 4.0, t + 14.0, esc(label));
    }
    if y0 < 0.0 && y1 > 0.0 {
        let yp = py(0.0);
        let _ = writeln!(s, r#"<line x1="{l}" y1="{yp:.1}" x2="{r}" y2="{yp:.1}" stroke="lightgray"/>"#);
    }
    for (i, sr) in series.iter().enumerate() {
        let c = COLORS[i % COLORS.len()];
        let mut pts = sr.points.clone();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let path: Vec<String> = pts.iter().map(|p| format!("{:.2},{:.2}", px(p.0), py(p.1))).collect();
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{c}" stroke-width="1.5"/>"#, path.join(" "));
        for &(x, y, e) in &pts {
            let (xp, yp) = (px(x), py(y));
            let _ = writeln!(s, r#"<circle cx="{xp:.2}" cy="{yp:.2}" r="3" fill="{c}"/>"#);
            if e > 0.0 {
                let _ = writeln!(s, r#"<line x1="{xp:.2}" y1="{:.2}" x2="{xp:.2}" y2="{:.2}" stroke="{c}"/>"#, py(y - e), py(y + e));
            }
        }
        let ly = t + 16.0 * (i as f64 + 1.0);
        let _ = writeln!(s, r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{c}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#, r - 170.0, r - 150.0, r - 145.0, ly + 4.0, esc(&sr.label));
    }
    s.push_str("</svg>\n");
    s
}

fn tick(v: f64) -> String {
    if v == 0.0 || (1e-3..1e4).contains(&v.abs()) {
        let t = format!("{v:.4}");
        let t = t.trim_end_matches('0').trim_end_matches('.');
        if t == "-0" { "0".into() } else { t.into() }
    } else {
        format!("{v:.2e}")
    }
}

fn key(x: f64) -> u64 {
    x.to_bits()
}

/// Truncation parameter of a record for convergence plots.
fn truncation(r: &EnergyRecord) -> Option<f64> {
    match r.kind {
        RecordKind::Sector => r.radius,
        RecordKind::Corn | RecordKind::DirichletCorn | RecordKind::OnedInterval => r.depth,
        RecordKind::Wedge | RecordKind::DirichletWedge => r.length,
        RecordKind::OnedStar => None,
    }
}

type Groups = BTreeMap<(RecordKind, u64), Vec<(f64, f64, f64)>>;

/// Corrected energy against truncation, one series per `(kind, mu)`.
pub fn convergence(records: &[EnergyRecord]) -> String {
    let mut groups = Groups::new();
    for r in records {
        if let Some(p) = truncation(r) {
            groups.entry((r.kind, key(r.mu))).or_default().push((p, r.corrected(), 0.0));
        }
    }
    let series: Vec<Series> = groups
        .into_iter()
        .map(|((k, m), points)| Series { label: format!("{} mu={:.5}", k.as_str(), f64::from_bits(m)), points })
        .collect();
    line_plot("Convergence in the truncation parameter", "truncation (R, ell or L)", "corrected energy", &series, &[])
}

/// Per-mu limits of the corner (`corn`) and sector records, extrapolated
/// the same way as in the studies; groups with fewer than 3 truncations fall
/// back to the last value.
pub fn branch_limits(records: &[EnergyRecord], kind: RecordKind) -> Vec<(f64, f64, f64)> {
    let mut groups: BTreeMap<u64, Vec<(f64, f64)>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.kind == kind) {
        if let Some(p) = truncation(r) {
            groups.entry(key(r.mu)).or_default().push((p, r.corrected()));
        }
    }
    let mut out = Vec::new();
    for (m, mut pts) in groups {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        pts.dedup_by(|a, b| a.0 == b.0);
        let mu = f64::from_bits(m);
        match extrapolate_exponential(&pts) {
            Ok(r) => out.push((mu, r.limit, r.error)),
            Err(_) => out.push((mu, pts.last().unwrap().1, 0.0)),
        }
    }
    out
}

/// Both branches against `mu` with the threshold marked.
pub fn continuity(records: &[EnergyRecord], theta0: f64, dirichlet: Option<(f64, f64)>) -> String {
    let mut series = vec![
        Series { label: "corner (mu > Theta0)".into(), points: branch_limits(records, RecordKind::Corn) },
        Series { label: "sector (mu < Theta0)".into(), points: branch_limits(records, RecordKind::Sector) },
    ];
    if let Some((v, e)) = dirichlet {
        series.push(Series { label: "Dirichlet corner".into(), points: vec![(theta0, v, e)] });
    }
    series.retain(|s| !s.points.is_empty());
    line_plot("Corner and sector energies across the threshold", "mu", "energy", &series, &[(theta0, "Theta0".into())])
}
