use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{BiasGrid, MetricsError, SizeSummary};

/// What to render.
#[derive(Debug, Clone, Copy)]
pub enum ReportInput<'a> {
    /// Accuracy per haystack size: `summary.csv` + `accuracy_by_size.svg`.
    Results(&'a [SizeSummary]),
    /// Positional-bias grid: `bias_grid.csv` + `bias_heatmap.svg`.
    Grid(&'a BiasGrid),
}

/// Write CSV and SVG renderings into `out_dir`. Output bytes depend only on
/// the input values.
pub fn emit_report(input: ReportInput<'_>, out_dir: impl AsRef<Path>) -> Result<Vec<PathBuf>, MetricsError> {
    let dir = out_dir.as_ref();
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |source| MetricsError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let (csv_name, svg_name, csv, svg) = match input {
        ReportInput::Results(rows) => (
            "summary.csv",
            "accuracy_by_size.svg",
            results_csv(rows),
            line_chart(rows),
        ),
        ReportInput::Grid(grid) => ("bias_grid.csv", "bias_heatmap.svg", grid_csv(grid), heatmap(grid)),
    };
    let csv_path = dir.join(csv_name);
    std::fs::write(&csv_path, csv).map_err(io(&csv_path))?;
    let svg_path = dir.join(svg_name);
    std::fs::write(&svg_path, svg).map_err(io(&svg_path))?;
    Ok(vec![csv_path, svg_path])
}

const CSV_HEADER: [&str; 6] = ["size", "depth", "mean", "std", "n", "compliance"];

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf8 csv")
}

fn results_csv(rows: &[SizeSummary]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory csv");
    for r in rows {
        w.write_record([
            r.size.to_string(),
            String::new(),
            format!("{:.6}", r.mean),
            format!("{:.6}", r.std),
            r.n.to_string(),
            format!("{:.6}", r.compliance),
        ])
        .expect("in-memory csv");
    }
    finish(w)
}

/// Unevaluated cells have empty statistics and `n = 0`.
fn grid_csv(grid: &BiasGrid) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory csv");
    for c in &grid.cells {
        let stat = |v: f64| if c.evaluated { format!("{v:.6}") } else { String::new() };
        w.write_record([
            c.size.to_string(),
            format!("{:.4}", c.depth),
            stat(c.accuracy),
            stat(c.std),
            c.n.to_string(),
            stat(c.compliance),
        ])
        .expect("in-memory csv");
    }
    finish(w)
}

/// Red (0) through yellow (0.5) to green (1).
fn color(v: f64) -> String {
    let v = v.clamp(0.0, 1.0);
    let (r, g) = if v < 0.5 {
        (215.0, 48.0 + (v / 0.5) * (223.0 - 48.0))
    } else {
        (
            215.0 - ((v - 0.5) / 0.5) * (215.0 - 26.0),
            223.0 - ((v - 0.5) / 0.5) * (223.0 - 150.0),
        )
    };
    format!("#{:02x}{:02x}{:02x}", r.round() as u8, g.round() as u8, 60)
}

fn heatmap(grid: &BiasGrid) -> String {
    let (cw, ch) = (64.0, 36.0);
    let (left, top) = (80.0, 40.0);
    let w = left + cw * grid.depths.len() as f64 + 110.0;
    let h = top + ch * grid.sizes.len() as f64 + 60.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{left:.0}" y="20">accuracy by haystack size and needle depth</text>"#
    );
    for (r, size) in grid.sizes.iter().enumerate() {
        let y = top + ch * r as f64;
        let _ = writeln!(
            s,
            r#"<text x="{:.0}" y="{:.1}" text-anchor="end">N={size}</text>"#,
            left - 8.0,
            y + ch / 2.0 + 4.0
        );
        for (c, _) in grid.depths.iter().enumerate() {
            let cell = grid.cell(r, c);
            let x = left + cw * c as f64;
            let (fill, label) = if cell.evaluated {
                (color(cell.accuracy), format!("{:.2}", cell.accuracy))
            } else {
                ("#bdbdbd".to_string(), "E".to_string())
            };
            let _ = writeln!(
                s,
                r##"<rect x="{x:.1}" y="{y:.1}" width="{cw:.1}" height="{ch:.1}" fill="{fill}" stroke="#ffffff"/>"##
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{label}</text>"#,
                x + cw / 2.0,
                y + ch / 2.0 + 4.0
            );
        }
    }
    let base = top + ch * grid.sizes.len() as f64;
    for (c, d) in grid.depths.iter().enumerate() {
        let x = left + cw * c as f64 + cw / 2.0;
        let _ = writeln!(
            s,
            r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{d:.2}</text>"#,
            base + 16.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">needle depth</text>"#,
        left + cw * grid.depths.len() as f64 / 2.0,
        base + 36.0
    );
    // color scale
    let sx = left + cw * grid.depths.len() as f64 + 30.0;
    let steps = 10;
    let sh = (ch * grid.sizes.len().max(3) as f64) / steps as f64;
    for i in 0..steps {
        let v = 1.0 - i as f64 / (steps - 1) as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{sx:.1}" y="{:.1}" width="18" height="{sh:.1}" fill="{}"/>"#,
            top + sh * i as f64,
            color(v)
        );
    }
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}">1.0</text>"#, sx + 24.0, top + 10.0);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}">0.0</text>"#,
        sx + 24.0,
        top + sh * steps as f64
    );
    s.push_str("</svg>\n");
    s
}

fn line_chart(rows: &[SizeSummary]) -> String {
    let (left, top, pw, ph) = (60.0, 30.0, 480.0, 240.0);
    let n = rows.len().max(1);
    let x_at = |i: usize| {
        left + if n == 1 {
            pw / 2.0
        } else {
            pw * i as f64 / (n - 1) as f64
        }
    };
    let y_at = |v: f64| top + ph * (1.0 - v.clamp(0.0, 1.0));
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" font-family="sans-serif" font-size="12">"#,
        left + pw + 40.0,
        top + ph + 50.0
    );
    let _ = writeln!(
        s,
        r##"<rect x="{left:.0}" y="{top:.0}" width="{pw:.0}" height="{ph:.0}" fill="none" stroke="#444444"/>"##
    );
    for t in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let y = y_at(t);
        let _ = writeln!(
            s,
            r##"<line x1="{left:.0}" y1="{y:.1}" x2="{:.0}" y2="{y:.1}" stroke="#dddddd"/>"##,
            left + pw
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.0}" y="{:.1}" text-anchor="end">{t:.2}</text>"#,
            left - 6.0,
            y + 4.0
        );
    }
    let points: Vec<String> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| format!("{:.1},{:.1}", x_at(i), y_at(r.mean)))
        .collect();
    let _ = writeln!(
        s,
        r##"<polyline points="{}" fill="none" stroke="#1f77b4" stroke-width="2"/>"##,
        points.join(" ")
    );
    for (i, r) in rows.iter().enumerate() {
        let x = x_at(i);
        let _ = writeln!(
            s,
            r##"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="#1f77b4"/>"##,
            y_at(r.mean - r.std),
            y_at(r.mean + r.std)
        );
        let _ = writeln!(
            s,
            r##"<circle cx="{x:.1}" cy="{:.1}" r="3" fill="#1f77b4"/>"##,
            y_at(r.mean)
        );
        let _ = writeln!(
            s,
            r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            top + ph + 16.0,
            r.size
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">haystack size</text>"#,
        left + pw / 2.0,
        top + ph + 36.0
    );
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::BiasCell;

    fn grid() -> BiasGrid {
        let sizes = vec![5, 10, 20, 50, 100];
        let depths = vec![0.0, 0.25, 0.5, 0.75, 1.0];
        let mut cells = Vec::new();
        for &size in &sizes {
            for &depth in &depths {
                cells.push(BiasCell {
                    size,
                    depth,
                    needle_index: 0,
                    evaluated: size < 100,
                    accuracy: 0.5 + depth / 4.0,
                    bootstrap_mean: 0.5,
                    std: 0.01,
                    n: 10,
                    compliance: 1.0,
                });
            }
        }
        BiasGrid { sizes, depths, cells }
    }

    #[test]
    fn single_size_result_is_one_row() {
        let rows = [SizeSummary {
            size: 10,
            mean: 0.75,
            std: 0.02,
            n: 100,
            compliance: 1.0,
        }];
        let csv = results_csv(&rows);
        assert_eq!(
            csv,
            "size,depth,mean,std,n,compliance\n10,,0.750000,0.020000,100,1.000000\n"
        );
    }

    #[test]
    fn grid_report_rows_and_files() {
        let dir = tempfile::tempdir().unwrap();
        let g = grid();
        let files = emit_report(ReportInput::Grid(&g), dir.path()).unwrap();
        assert_eq!(files.len(), 2);
        let csv = std::fs::read_to_string(&files[0]).unwrap();
        assert_eq!(csv.lines().count(), 26);
        assert!(csv.contains("\n100,0.5000,,,10,\n"));
        let svg = std::fs::read_to_string(&files[1]).unwrap();
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches(">E<").count(), 5);
    }

    #[test]
    fn rerun_is_byte_identical() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let g = grid();
        let fa = emit_report(ReportInput::Grid(&g), a.path()).unwrap();
        let fb = emit_report(ReportInput::Grid(&g), b.path()).unwrap();
        for (x, y) in fa.iter().zip(&fb) {
            assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap());
        }
    }

    #[test]
    fn unwritable_path_errors() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("plain");
        std::fs::write(&file, "x").unwrap();
        assert!(matches!(
            emit_report(ReportInput::Grid(&grid()), file.join("sub")),
            Err(MetricsError::Io { .. })
        ));
    }
}
