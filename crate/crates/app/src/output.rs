//! VTK, CSV and SVG writers.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use chdbc::diagnostics::{DiagnosticsRow, CSV_HEADER};
use chdbc::stepper::{StepEvent, StepObserver};
use chdbc::{BoundaryMesh, BulkMesh, State};

/// Companion file of a bulk VTK path: `a/b.vtk` → `a/b_boundary.vtk`.
pub fn boundary_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("snapshot");
    let ext = path.extension().and_then(|s| s.to_str()).unwrap_or("vtk");
    path.with_file_name(format!("{stem}_boundary.{ext}"))
}

fn scalars(out: &mut String, name: &str, values: impl Iterator<Item = f64>) {
    writeln!(out, "SCALARS {name} double 1\nLOOKUP_TABLE default").unwrap();
    for v in values {
        writeln!(out, "{v:.16e}").unwrap();
    }
}

/// Legacy ASCII VTK text of the bulk fields φ, μ.
pub fn format_vtk_bulk(mesh: &BulkMesh, state: &State) -> String {
    let n = mesh.num_vertices();
    let m = mesh.num_triangles();
    let mut out = String::with_capacity(64 * n + 32 * m);
    writeln!(out, "# vtk DataFile Version 3.0\nbulk t={:e} n={}\nASCII", state.t, state.n).unwrap();
    writeln!(out, "DATASET UNSTRUCTURED_GRID\nPOINTS {n} double").unwrap();
    for p in &mesh.vertices {
        writeln!(out, "{:.16e} {:.16e} 0", p[0], p[1]).unwrap();
    }
    writeln!(out, "CELLS {m} {}", 4 * m).unwrap();
    for t in &mesh.triangles {
        writeln!(out, "3 {} {} {}", t[0], t[1], t[2]).unwrap();
    }
    writeln!(out, "CELL_TYPES {m}").unwrap();
    for _ in 0..m {
        out.push_str("5\n");
    }
    writeln!(out, "POINT_DATA {n}").unwrap();
    scalars(&mut out, "phi", state.phi.iter().copied());
    scalars(&mut out, "mu", state.mu.iter().copied());
    out
}

/// Legacy ASCII VTK polyline of the boundary fields φ|_Γ, θ.
pub fn format_vtk_boundary(mesh: &BulkMesh, bnd: &BoundaryMesh, state: &State) -> String {
    let nb = bnd.num_vertices();
    let local = bnd.local_edges(mesh.num_vertices());
    let e = local.len();
    let mut out = String::with_capacity(64 * nb);
    writeln!(out, "# vtk DataFile Version 3.0\nboundary t={:e} n={}\nASCII", state.t, state.n).unwrap();
    writeln!(out, "DATASET UNSTRUCTURED_GRID\nPOINTS {nb} double").unwrap();
    for &i in &bnd.bnd_to_bulk {
        let p = mesh.vertices[i];
        writeln!(out, "{:.16e} {:.16e} 0", p[0], p[1]).unwrap();
    }
    writeln!(out, "CELLS {e} {}", 3 * e).unwrap();
    for [a, b] in &local {
        writeln!(out, "2 {a} {b}").unwrap();
    }
    writeln!(out, "CELL_TYPES {e}").unwrap();
    for _ in 0..e {
        out.push_str("3\n");
    }
    writeln!(out, "POINT_DATA {nb}").unwrap();
    scalars(&mut out, "phi", bnd.bnd_to_bulk.iter().map(|&i| state.phi[i]));
    scalars(&mut out, "theta", state.theta.iter().copied());
    out
}

/// Write `path` (bulk) and its `_boundary` companion.
pub fn write_vtk(mesh: &BulkMesh, bnd: &BoundaryMesh, state: &State, path: &Path) -> Result<()> {
    std::fs::write(path, format_vtk_bulk(mesh, state))
        .with_context(|| format!("writing {}", path.display()))?;
    let bpath = boundary_path(path);
    std::fs::write(&bpath, format_vtk_boundary(mesh, bnd, state))
        .with_context(|| format!("writing {}", bpath.display()))?;
    Ok(())
}

/// Streams diagnostics rows to CSV at a fixed step cadence; the first and
/// last states are always written.
pub struct CsvSink<W: Write> {
    out: W,
    every: usize,
    pub rows: Vec<DiagnosticsRow>,
}

impl CsvSink<BufWriter<File>> {
    pub fn create(path: &Path, every: usize) -> Result<Self> {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        Self::new(BufWriter::new(file), every)
    }
}

impl<W: Write> CsvSink<W> {
    pub fn new(mut out: W, every: usize) -> Result<Self> {
        writeln!(out, "{CSV_HEADER}")?;
        Ok(Self {
            out,
            every: every.max(1),
            rows: Vec::new(),
        })
    }

    pub fn finish(mut self) -> Result<(W, Vec<DiagnosticsRow>)> {
        self.out.flush()?;
        Ok((self.out, self.rows))
    }
}

impl<W: Write> StepObserver for CsvSink<W> {
    fn observe(&mut self, ev: &StepEvent<'_>) -> chdbc::Result<()> {
        if ev.state.n % self.every != 0 && !ev.is_final {
            return Ok(());
        }
        let row =
            DiagnosticsRow::evaluate(ev.ops, ev.params, ev.dw_bulk, ev.dw_bnd, ev.prev, ev.state);
        if row.values().iter().any(|v| !v.is_finite()) {
            return Err(chdbc::Error::NonFinite { step: ev.state.n });
        }
        writeln!(self.out, "{}", row.to_csv_line()).map_err(|e| chdbc::Error::Io {
            path: PathBuf::from("diagnostics.csv"),
            source: e,
        })?;
        self.rows.push(row);
        Ok(())
    }
}

/// Writes VTK snapshots every `every` steps plus the first and last state.
pub struct VtkSink<'m> {
    pub mesh: &'m BulkMesh,
    pub bnd: &'m BoundaryMesh,
    pub dir: PathBuf,
    pub every: usize,
    pub written: Vec<PathBuf>,
}

impl StepObserver for VtkSink<'_> {
    fn observe(&mut self, ev: &StepEvent<'_>) -> chdbc::Result<()> {
        if self.every == 0 || (ev.state.n % self.every != 0 && !ev.is_final) {
            return Ok(());
        }
        let path = self.dir.join(format!("bulk_{:07}.vtk", ev.state.n));
        write_vtk(self.mesh, self.bnd, ev.state, &path).map_err(|e| chdbc::Error::Io {
            path: path.clone(),
            source: std::io::Error::other(e.to_string()),
        })?;
        self.written.push(path);
        Ok(())
    }
}

/// Self-contained SVG line chart; each series is `(label, colour, points)`.
pub fn svg_line_chart(title: &str, x_label: &str, series: &[(&str, &str, Vec<(f64, f64)>)]) -> String {
    let (w, h, pad) = (720.0, 420.0, 60.0);
    let pts = series.iter().flat_map(|s| s.2.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !(x1 > x0) {
        x1 = x0 + 1.0;
    }
    if !(y1 > y0) {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
    let sy = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);
    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#).unwrap();
    writeln!(out, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{title}</text>"#, w / 2.0).unwrap();
    writeln!(
        out,
        r#"<path d="M{pad} {pad} V{} H{}" fill="none" stroke="black"/>"#,
        h - pad,
        w - pad
    )
    .unwrap();
    for (v, y) in [(y0, h - pad), (y1, pad)] {
        writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{v:.4e}</text>"#, pad - 4.0, y + 4.0).unwrap();
    }
    for (v, x) in [(x0, pad), (x1, w - pad)] {
        writeln!(out, r#"<text x="{x}" y="{}" text-anchor="middle">{v:.3e}</text>"#, h - pad + 16.0).unwrap();
    }
    writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{x_label}</text>"#, w / 2.0, h - 12.0).unwrap();
    for (k, (label, colour, points)) in series.iter().enumerate() {
        let mut d = String::new();
        for (i, &(x, y)) in points.iter().enumerate() {
            write!(d, "{}{:.2} {:.2} ", if i == 0 { "M" } else { "L" }, sx(x), sy(y)).unwrap();
        }
        writeln!(out, r#"<path d="{}" fill="none" stroke="{colour}" stroke-width="1.5"/>"#, d.trim_end()).unwrap();
        let ly = pad + 16.0 * k as f64;
        writeln!(
            out,
            r#"<text x="{}" y="{ly}" fill="{colour}" text-anchor="end">{label}</text>"#,
            w - pad - 4.0
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    out
}

/// Modified and original energy over time.
pub fn energy_chart(rows: &[DiagnosticsRow]) -> String {
    let e_mod = rows.iter().map(|r| (r.t, r.e_mod)).collect();
    let e_orig = rows.iter().map(|r| (r.t, r.e_orig)).collect();
    svg_line_chart(
        "Energy",
        "t",
        &[("modified", "#1f77b4", e_mod), ("original", "#d62728", e_orig)],
    )
}
