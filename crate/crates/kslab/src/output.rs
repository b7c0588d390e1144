//! File outputs: diagnostic CSV series, grid snapshots, mesh dumps, and
//! SVG plots. All writers format with Rust's default float `Display`
//! (locale independent, shortest round-trip), so identical runs produce
//! byte-identical files.

use crate::assembly::FemField;
use crate::diagnostics::{ConvergenceReport, DiagRecord};
use crate::mesh::StructuredTriMesh;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("snapshot needs {expected} nodal values, field has {got}")]
    FieldSize { got: usize, expected: usize },
}

fn write_file(path: &Path, content: &str) -> Result<(), OutputError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|source| OutputError::Io {
                path: path.to_path_buf(),
                source,
            })?;
        }
    }
    std::fs::write(path, content).map_err(|source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Diagnostic series as CSV with the fixed column order
/// `k,t,mass,I,linf,min,energy`.
pub fn series_string(records: &[DiagRecord]) -> String {
    let mut s = String::from("k,t,mass,I,linf,min,energy\n");
    for r in records {
        writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.k, r.t, r.mass, r.second_moment, r.linf, r.min, r.energy
        )
        .unwrap();
    }
    s
}

pub fn write_series(records: &[DiagRecord], path: &Path) -> Result<(), OutputError> {
    write_file(path, &series_string(records))
}

/// Grid snapshot: a header line `x0 y0 x1 y1 a`, then the nodal values in
/// row-major order, one grid line per row.
pub fn snapshot_string(field: &FemField, mesh: &StructuredTriMesh) -> Result<String, OutputError> {
    let n = mesh.a + 1;
    if field.len() != n * n {
        return Err(OutputError::FieldSize {
            got: field.len(),
            expected: n * n,
        });
    }
    let d = mesh.domain;
    let mut s = format!("{} {} {} {} {}\n", d.x0, d.y0, d.x1, d.y1, mesh.a);
    for j in 0..n {
        let mut line = String::new();
        for i in 0..n {
            if i > 0 {
                line.push(' ');
            }
            write!(line, "{}", field.values[j * n + i]).unwrap();
        }
        s.push_str(&line);
        s.push('\n');
    }
    Ok(s)
}

pub fn write_snapshot(
    field: &FemField,
    mesh: &StructuredTriMesh,
    path: &Path,
) -> Result<(), OutputError> {
    write_file(path, &snapshot_string(field, mesh)?)
}

/// Plain-text mesh dump (vertex list then triangle list) for external
/// visualization.
pub fn mesh_dump_string(mesh: &StructuredTriMesh) -> String {
    let mut s = format!("vertices {}\n", mesh.vertex_count());
    for v in &mesh.vertices {
        writeln!(s, "{} {}", v[0], v[1]).unwrap();
    }
    writeln!(s, "triangles {}", mesh.triangle_count()).unwrap();
    for t in &mesh.triangles {
        writeln!(s, "{} {} {}", t[0], t[1], t[2]).unwrap();
    }
    s
}

pub fn write_mesh_dump(mesh: &StructuredTriMesh, path: &Path) -> Result<(), OutputError> {
    write_file(path, &mesh_dump_string(mesh))
}

const SVG_W: f64 = 800.0;
const SVG_H: f64 = 500.0;
const MARGIN: f64 = 60.0;

struct SvgFrame {
    t_min: f64,
    t_max: f64,
}

impl SvgFrame {
    fn x(&self, t: f64) -> f64 {
        let w = SVG_W - 2.0 * MARGIN;
        MARGIN + (t - self.t_min) / (self.t_max - self.t_min).max(f64::MIN_POSITIVE) * w
    }

    /// y for a series value normalized to its own [lo, hi] range.
    fn y(&self, v: f64, lo: f64, hi: f64) -> f64 {
        let h = SVG_H - 2.0 * MARGIN;
        let span = (hi - lo).max(f64::MIN_POSITIVE);
        SVG_H - MARGIN - (v - lo) / span * h
    }
}

fn polyline(frame: &SvgFrame, points: &[(f64, f64)], lo: f64, hi: f64, color: &str) -> String {
    let mut coords = String::new();
    for &(t, v) in points {
        write!(coords, "{:.2},{:.2} ", frame.x(t), frame.y(v, lo, hi)).unwrap();
    }
    format!(
        "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
        coords.trim_end()
    )
}

/// Line plot of `|n|_inf` and the second moment versus time, each
/// normalized to its own range. When `k_max_time` is given, a vertical
/// marker line (`id="kmax-marker"`) is drawn at `t = k_max tau`.
pub fn svg_series_string(records: &[DiagRecord], k_max_time: Option<f64>) -> String {
    let t_max = records
        .last()
        .map(|r| r.t)
        .unwrap_or(1.0)
        .max(f64::MIN_POSITIVE);
    let frame = SvgFrame { t_min: 0.0, t_max };
    let linf: Vec<(f64, f64)> = records.iter().map(|r| (r.t, r.linf)).collect();
    let moment: Vec<(f64, f64)> = records.iter().map(|r| (r.t, r.second_moment)).collect();
    let bounds = |pts: &[(f64, f64)]| {
        let lo = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        let hi = pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    };
    let (l_lo, l_hi) = bounds(&linf);
    let (m_lo, m_hi) = bounds(&moment);

    let mut s = String::new();
    writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SVG_W}\" height=\"{SVG_H}\" viewBox=\"0 0 {SVG_W} {SVG_H}\">"
    )
    .unwrap();
    s.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    // Axes.
    writeln!(
        s,
        "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n<line x1=\"{m}\" y1=\"{t}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>",
        m = MARGIN,
        r = SVG_W - MARGIN,
        t = MARGIN,
        b = SVG_H - MARGIN
    )
    .unwrap();
    if !records.is_empty() {
        s.push_str(&polyline(&frame, &linf, l_lo, l_hi, "#c0392b"));
        s.push_str(&polyline(&frame, &moment, m_lo, m_hi, "#2980b9"));
    }
    if let Some(tm) = k_max_time {
        if tm.is_finite() && tm >= 0.0 && tm <= t_max {
            writeln!(
                s,
                "<line id=\"kmax-marker\" x1=\"{x:.2}\" y1=\"{t}\" x2=\"{x:.2}\" y2=\"{b}\" stroke=\"#555555\" stroke-dasharray=\"6 3\"/>",
                x = frame.x(tm),
                t = MARGIN,
                b = SVG_H - MARGIN
            )
            .unwrap();
        }
    }
    writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" fill=\"#c0392b\" font-size=\"14\">Linf norm (range {l_lo:.4e} .. {l_hi:.4e})</text>",
        MARGIN + 10.0,
        MARGIN + 18.0
    )
    .unwrap();
    writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" fill=\"#2980b9\" font-size=\"14\">second moment (range {m_lo:.4e} .. {m_hi:.4e})</text>",
        MARGIN + 10.0,
        MARGIN + 36.0
    )
    .unwrap();
    writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" fill=\"black\" font-size=\"14\">t in [0, {t_max}]</text>",
        MARGIN + 10.0,
        SVG_H - MARGIN + 30.0
    )
    .unwrap();
    s.push_str("</svg>\n");
    s
}

pub fn write_svg_series(
    records: &[DiagRecord],
    k_max_time: Option<f64>,
    path: &Path,
) -> Result<(), OutputError> {
    write_file(path, &svg_series_string(records, k_max_time))
}

/// Log-log plot of the convergence study errors versus step size, one
/// polyline per norm.
pub fn svg_convergence_string(report: &ConvergenceReport) -> String {
    let colors = ["#c0392b", "#2980b9", "#27ae60", "#8e44ad", "#d35400"];
    let xs: Vec<f64> = report.taus.iter().map(|t| t.ln()).collect();
    let x_lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let x_hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut y_lo = f64::INFINITY;
    let mut y_hi = f64::NEG_INFINITY;
    for errs in &report.errors {
        for &e in errs {
            let le = e.max(f64::MIN_POSITIVE).ln();
            y_lo = y_lo.min(le);
            y_hi = y_hi.max(le);
        }
    }
    let frame = SvgFrame {
        t_min: x_lo,
        t_max: x_hi,
    };

    let mut s = String::new();
    writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SVG_W}\" height=\"{SVG_H}\" viewBox=\"0 0 {SVG_W} {SVG_H}\">"
    )
    .unwrap();
    s.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    writeln!(
        s,
        "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n<line x1=\"{m}\" y1=\"{t}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>",
        m = MARGIN,
        r = SVG_W - MARGIN,
        t = MARGIN,
        b = SVG_H - MARGIN
    )
    .unwrap();
    for (pi, errs) in report.errors.iter().enumerate() {
        let pts: Vec<(f64, f64)> = xs
            .iter()
            .zip(errs)
            .map(|(&x, &e)| (x, e.max(f64::MIN_POSITIVE).ln()))
            .collect();
        let color = colors[pi % colors.len()];
        s.push_str(&polyline(&frame, &pts, y_lo, y_hi, color));
        let p = report.p_values[pi];
        let label = if p.is_infinite() {
            "inf".to_string()
        } else {
            format!("{p}")
        };
        writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" fill=\"{color}\" font-size=\"14\">p = {label}: order {:.3}</text>",
            MARGIN + 10.0,
            MARGIN + 18.0 * (pi as f64 + 1.0),
            report.orders[pi]
        )
        .unwrap();
    }
    writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" fill=\"black\" font-size=\"14\">log error vs log tau</text>",
        MARGIN + 10.0,
        SVG_H - MARGIN + 30.0
    )
    .unwrap();
    s.push_str("</svg>\n");
    s
}

pub fn write_svg_convergence(report: &ConvergenceReport, path: &Path) -> Result<(), OutputError> {
    write_file(path, &svg_convergence_string(report))
}

/// Convergence report as CSV: one row per step size with the errors per
/// norm, then one `order` row.
pub fn convergence_csv_string(report: &ConvergenceReport) -> String {
    let mut s = String::from("tau");
    for &p in &report.p_values {
        if p.is_infinite() {
            s.push_str(",e_inf");
        } else {
            write!(s, ",e_{p}").unwrap();
        }
    }
    s.push('\n');
    for (ti, &tau) in report.taus.iter().enumerate() {
        write!(s, "{tau}").unwrap();
        for errs in &report.errors {
            write!(s, ",{}", errs[ti]).unwrap();
        }
        s.push('\n');
    }
    s.push_str("order");
    for &o in &report.orders {
        write!(s, ",{o}").unwrap();
    }
    s.push('\n');
    s
}

pub fn write_convergence_csv(report: &ConvergenceReport, path: &Path) -> Result<(), OutputError> {
    write_file(path, &convergence_csv_string(report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_uniform, Rect};

    fn record(k: usize, linf: f64) -> DiagRecord {
        DiagRecord {
            k,
            t: k as f64 * 0.1,
            mass: 1.0,
            second_moment: 0.5,
            linf,
            min: 0.0,
            energy: -1.0,
        }
    }

    #[test]
    fn zero_snapshot_is_all_zeros() {
        let mesh = build_uniform(Rect::unit(), 3).unwrap();
        let s = snapshot_string(&FemField::zeros(16), &mesh).unwrap();
        let mut lines = s.lines();
        assert_eq!(lines.next().unwrap(), "0 0 1 1 3");
        let mut count = 0;
        for line in lines {
            let vals: Vec<&str> = line.split(' ').collect();
            assert_eq!(vals.len(), 4);
            assert!(vals.iter().all(|v| *v == "0"));
            count += vals.len();
        }
        assert_eq!(count, 16);
    }

    #[test]
    fn snapshot_rejects_wrong_size() {
        let mesh = build_uniform(Rect::unit(), 3).unwrap();
        assert!(matches!(
            snapshot_string(&FemField::zeros(5), &mesh),
            Err(OutputError::FieldSize { .. })
        ));
    }

    #[test]
    fn series_has_one_row_per_record() {
        let s = series_string(&[record(0, 2.0)]);
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], "k,t,mass,I,linf,min,energy");
        assert_eq!(lines[1], "0,0,1,0.5,2,0,-1");
    }

    #[test]
    fn svg_marker_present_only_with_finite_bound() {
        let records: Vec<DiagRecord> = (0..10).map(|k| record(k, 1.0 + k as f64)).collect();
        let with = svg_series_string(&records, Some(0.45));
        assert!(with.contains("id=\"kmax-marker\""));
        let without = svg_series_string(&records, None);
        assert!(!without.contains("kmax-marker"));
        let out_of_range = svg_series_string(&records, Some(100.0));
        assert!(!out_of_range.contains("kmax-marker"));
    }

    #[test]
    fn mesh_dump_counts() {
        let mesh = build_uniform(Rect::unit(), 2).unwrap();
        let s = mesh_dump_string(&mesh);
        assert!(s.starts_with("vertices 9\n"));
        assert!(s.contains("triangles 8\n"));
        assert_eq!(s.lines().count(), 1 + 9 + 1 + 8);
    }

    #[test]
    fn convergence_csv_shape() {
        let report = ConvergenceReport {
            taus: vec![4e-4, 2e-4],
            p_values: vec![1.0, f64::INFINITY],
            errors: vec![vec![1e-2, 2.5e-3], vec![2e-2, 5e-3]],
            orders: vec![2.0, 2.0],
        };
        let s = convergence_csv_string(&report);
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "tau,e_1,e_inf");
        assert_eq!(lines.len(), 4);
        assert!(lines[3].starts_with("order,2,2"));
        let svg = svg_convergence_string(&report);
        assert!(svg.contains("order 2.000"));
    }
}
