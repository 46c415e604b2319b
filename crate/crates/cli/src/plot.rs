//! Self-contained SVG plots of CSV tables. The markup depends only on the
//! input data, so identical inputs give identical bytes.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{CliError, CliResult};
use crate::output::write_atomic;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Heatmap,
    Line,
}

impl std::str::FromStr for PlotKind {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "heatmap" => Ok(Self::Heatmap),
            "line" => Ok(Self::Line),
            _ => Err(CliError::Usage(format!("unknown plot kind `{s}` (expected heatmap or line)"))),
        }
    }
}

/// Header row and numeric rows of a CSV file; `#` lines are skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn read(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        let columns: Vec<String> = rdr.headers()?.iter().map(|s| s.trim().to_string()).collect();
        if columns.iter().all(|c| c.is_empty()) {
            return Err(CliError::SchemaMismatch("CSV has no header row".into()));
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|f| f.trim().parse::<f64>().map_err(|_| CliError::SchemaMismatch(format!("non-numeric field `{f}`"))))
                .collect::<CliResult<Vec<f64>>>()?;
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(CliError::SchemaMismatch("CSV has no data rows".into()));
        }
        Ok(Self { columns, rows })
    }

    pub fn column(&self, name: &str) -> CliResult<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| CliError::SchemaMismatch(format!("missing column `{name}` (have {})", self.columns.join(", "))))
    }
}

const W: f64 = 480.0;
const H: f64 = 640.0;
const PAD: f64 = 40.0;

/// Piecewise-linear ramp from dark blue through teal to yellow.
fn color(t: f64) -> String {
    const STOPS: [(f64, f64, f64); 4] = [(48.0, 18.0, 84.0), (33.0, 144.0, 141.0), (94.0, 201.0, 98.0), (253.0, 231.0, 37.0)];
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let x = t * 3.0;
    let k = (x.floor() as usize).min(2);
    let f = x - k as f64;
    let (a, b) = (STOPS[k], STOPS[k + 1]);
    let c = |p: f64, q: f64| (p + f * (q - p)).round() as u8;
    format!("#{:02x}{:02x}{:02x}", c(a.0, b.0), c(a.1, b.1), c(a.2, b.2))
}

fn open_svg(s: &mut String) {
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>"#);
}

/// Heatmap of `density` over the `(re_tau, im_tau)` nodes: one quadrilateral
/// per grid cell, coloured by its mean corner value, with `Im τ` on a log axis.
pub fn heatmap_svg(t: &Table) -> CliResult<String> {
    let (ir, ii, iv) = (t.column("re_tau")?, t.column("im_tau")?, t.column("density")?);
    let mut cols: Vec<(f64, Vec<(f64, f64)>)> = Vec::new();
    for r in &t.rows {
        let (u, y, v) = (r[ir], r[ii], r[iv]);
        if y.is_nan() || y <= 0.0 {
            return Err(CliError::SchemaMismatch("im_tau must be positive".into()));
        }
        match cols.iter_mut().find(|c| c.0 == u) {
            Some(c) => c.1.push((y, v)),
            None => cols.push((u, vec![(y, v)])),
        }
    }
    cols.sort_by(|a, b| a.0.total_cmp(&b.0));
    for c in &mut cols {
        c.1.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    let rows = cols[0].1.len();
    if cols.len() < 2 || rows < 2 || cols.iter().any(|c| c.1.len() != rows) {
        return Err(CliError::SchemaMismatch("density nodes do not form a grid".into()));
    }
    let (umin, umax) = (cols[0].0, cols[cols.len() - 1].0);
    let ys = cols.iter().flat_map(|c| c.1.iter().map(|p| p.0));
    let (ymin, ymax) = ys.fold((f64::INFINITY, 0.0f64), |(lo, hi), y| (lo.min(y), hi.max(y)));
    let vmax = t.rows.iter().map(|r| r[iv]).fold(0.0f64, f64::max);
    let sx = |u: f64| PAD + (u - umin) / (umax - umin).max(1e-300) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y / ymin).ln() / (ymax / ymin).ln().max(1e-300) * (H - 2.0 * PAD);
    let mut s = String::new();
    open_svg(&mut s);
    for i in 0..cols.len() - 1 {
        for j in 0..rows - 1 {
            let corners = [(cols[i].0, cols[i].1[j]), (cols[i + 1].0, cols[i + 1].1[j]), (cols[i + 1].0, cols[i + 1].1[j + 1]), (cols[i].0, cols[i].1[j + 1])];
            let mean = corners.iter().map(|c| c.1 .1).sum::<f64>() / 4.0;
            let mut d = String::new();
            for (k, (u, (y, _))) in corners.iter().enumerate() {
                let _ = write!(d, "{}{:.3},{:.3} ", if k == 0 { "M" } else { "L" }, sx(*u), sy(*y));
            }
            d.push('Z');
            let _ = writeln!(s, r#"<path d="{d}" fill="{}" stroke="none"/>"#, color(if vmax > 0.0 { mean / vmax } else { 0.0 }));
        }
    }
    // Unit-circle arc |τ| = 1 bounding the fundamental domain from below.
    let mut arc = String::new();
    for k in 0..=64 {
        let u = umin + (umax - umin) * k as f64 / 64.0;
        let y = (1.0 - u * u).max(ymin * ymin).sqrt().max(ymin);
        let _ = write!(arc, "{}{:.3},{:.3} ", if k == 0 { "M" } else { "L" }, sx(u), sy(y));
    }
    let _ = writeln!(s, r#"<path d="{}" fill="none" stroke="black" stroke-width="1"/>"#, arc.trim_end());
    axis_labels(&mut s, "Re τ", "Im τ (log)", (umin, umax), (ymin, ymax));
    s.push_str("</svg>\n");
    Ok(s)
}

fn axis_labels(s: &mut String, xl: &str, yl: &str, xr: (f64, f64), yr: (f64, f64)) {
    let _ = writeln!(s, r#"<g font-family="sans-serif" font-size="11" fill="black">"#);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{xl}</text>"#, W / 2.0, H - 8.0);
    let _ = writeln!(s, r#"<text x="12" y="{}" transform="rotate(-90 12 {})" text-anchor="middle">{yl}</text>"#, H / 2.0, H / 2.0);
    let _ = writeln!(s, r#"<text x="{PAD}" y="{}">{:.3}</text>"#, H - PAD + 14.0, xr.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{:.3}</text>"#, W - PAD, H - PAD + 14.0, xr.1);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{:.3}</text>"#, PAD - 2.0, H - PAD, yr.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{:.3}</text>"#, PAD - 2.0, PAD + 4.0, yr.1);
    s.push_str("</g>\n");
}

/// Polyline of column `y` against column `x`, in file order.
pub fn line_svg(t: &Table, x: &str, y: &str) -> CliResult<String> {
    let (ix, iy) = (t.column(x)?, t.column(y)?);
    let pts: Vec<(f64, f64)> = t.rows.iter().map(|r| (r[ix], r[iy])).collect();
    if pts.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
        return Err(CliError::SchemaMismatch("line data must be finite".into()));
    }
    let range = |f: fn(&(f64, f64)) -> f64| pts.iter().map(f).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let (xr, yr) = (range(|p| p.0), range(|p| p.1));
    let span = |r: (f64, f64)| if r.1 > r.0 { r.1 - r.0 } else { 1.0 };
    let sx = |v: f64| PAD + (v - xr.0) / span(xr) * (W - 2.0 * PAD);
    let sy = |v: f64| H - PAD - (v - yr.0) / span(yr) * (H - 2.0 * PAD);
    let mut s = String::new();
    open_svg(&mut s);
    let mut d = String::new();
    for (k, (a, b)) in pts.iter().enumerate() {
        let _ = write!(d, "{}{:.3},{:.3} ", if k == 0 { "M" } else { "L" }, sx(*a), sy(*b));
    }
    let _ = writeln!(s, r##"<path d="{}" fill="none" stroke="#21908d" stroke-width="1.5"/>"##, d.trim_end());
    axis_labels(&mut s, x, y, xr, yr);
    s.push_str("</svg>\n");
    Ok(s)
}

/// Renders `data` and writes `out` only if rendering succeeded. `provenance`
/// goes into a leading XML comment; it must not contain `--`.
pub fn emit_plot(data: &Path, kind: PlotKind, out: &Path, columns: Option<(&str, &str)>, provenance: Option<&str>) -> CliResult<()> {
    let table = Table::read(data)?;
    let svg = match kind {
        PlotKind::Heatmap => heatmap_svg(&table)?,
        PlotKind::Line => {
            let (x, y) = match columns {
                Some(c) => c,
                None if table.columns.len() >= 2 => (table.columns[0].as_str(), table.columns[1].as_str()),
                None => return Err(CliError::SchemaMismatch("line plots need two columns".into())),
            };
            line_svg(&table, x, y)?
        }
    };
    let doc = match provenance {
        Some(p) => format!("<!-- {} -->\n{svg}", p.replace("--", "- -")),
        None => svg,
    };
    write_atomic(out, doc.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_csv() -> String {
        let mut s = String::from("# provenance\nre_tau,im_tau,density,se\n");
        for i in 0..3 {
            let u = -0.5 + 0.5 * i as f64;
            for j in 0..4 {
                let y = (1.0 - u * u).sqrt() + j as f64;
                s.push_str(&format!("{u},{y},{},0.01\n", 1.0 / y));
            }
        }
        s
    }

    #[test]
    fn heatmap_has_one_path_per_cell_and_is_deterministic() {
        let t = Table::parse(&grid_csv()).unwrap();
        let a = heatmap_svg(&t).unwrap();
        assert_eq!(a.matches("stroke=\"none\"").count(), 2 * 3);
        assert_eq!(a, heatmap_svg(&Table::parse(&grid_csv()).unwrap()).unwrap());
        assert!(a.starts_with("<svg") && a.ends_with("</svg>\n"));
    }

    #[test]
    fn schema_errors() {
        assert!(matches!(Table::parse(""), Err(CliError::SchemaMismatch(_))));
        assert!(matches!(Table::parse("a,b\n"), Err(CliError::SchemaMismatch(_))));
        let t = Table::parse("a,b\n1,2\n2,3\n").unwrap();
        assert!(matches!(heatmap_svg(&t), Err(CliError::SchemaMismatch(_))));
        assert!(line_svg(&t, "a", "b").unwrap().contains("<path"));
        assert!(matches!(line_svg(&t, "a", "c"), Err(CliError::SchemaMismatch(_))));
        let ragged = Table::parse("re_tau,im_tau,density\n0,1,1\n0,2,1\n0.5,1,1\n").unwrap();
        assert!(matches!(heatmap_svg(&ragged), Err(CliError::SchemaMismatch(_))));
        assert_eq!(color(0.0), "#301254");
        assert_eq!(color(1.0), "#fde725");
    }
}
