//! Conforming P1 triangulations of polygonal domains and their boundary
//! partitions.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use log::warn;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Default upper bound for the ratio `max diameter / min incircle diameter`.
pub const DEFAULT_QUASIUNIFORMITY_BOUND: f64 = 10.0;

/// Triangulation of the bulk domain.
#[derive(Debug, Clone, PartialEq)]
pub struct BulkMesh {
    pub vertices: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    /// Largest edge length over all triangles.
    pub h: f64,
    /// Refinement level when the mesh is the structured unit-square grid.
    pub grid_level: Option<u32>,
}

/// Boundary partition induced by a bulk mesh. Edges are stored with bulk
/// vertex indices and ordered along each boundary loop.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryMesh {
    pub edges: Vec<[usize; 2]>,
    pub bnd_to_bulk: Vec<usize>,
}

impl BulkMesh {
    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn area(&self) -> f64 {
        (0..self.num_triangles())
            .map(|t| signed_area(self.triangle_points(t)))
            .sum()
    }

    /// Maximum over triangles of diameter / incircle diameter.
    pub fn quasiuniformity_ratio(&self) -> f64 {
        let mut max_diam: f64 = 0.0;
        let mut min_incircle = f64::INFINITY;
        for t in 0..self.num_triangles() {
            let p = self.triangle_points(t);
            max_diam = max_diam.max(diameter(p));
            min_incircle = min_incircle.min(2.0 * inradius(p));
        }
        max_diam / min_incircle
    }
}

impl BoundaryMesh {
    pub fn num_vertices(&self) -> usize {
        self.bnd_to_bulk.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Inverse of `bnd_to_bulk`, sized to the bulk vertex count.
    pub fn bulk_to_bnd(&self, num_bulk: usize) -> Vec<Option<usize>> {
        let mut map = vec![None; num_bulk];
        for (j, &i) in self.bnd_to_bulk.iter().enumerate() {
            map[i] = Some(j);
        }
        map
    }

    /// Edges expressed in boundary-local vertex indices.
    pub fn local_edges(&self, num_bulk: usize) -> Vec<[usize; 2]> {
        let map = self.bulk_to_bnd(num_bulk);
        self.edges
            .iter()
            .map(|&[a, b]| {
                [
                    map[a].expect("edge vertex is a boundary vertex"),
                    map[b].expect("edge vertex is a boundary vertex"),
                ]
            })
            .collect()
    }

    pub fn perimeter(&self, mesh: &BulkMesh) -> f64 {
        self.edges
            .iter()
            .map(|&[a, b]| distance(mesh.vertices[a], mesh.vertices[b]))
            .sum()
    }
}

pub fn signed_area([a, b, c]: [Point; 3]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

pub fn distance(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

pub fn diameter([a, b, c]: [Point; 3]) -> f64 {
    distance(a, b).max(distance(b, c)).max(distance(c, a))
}

pub fn inradius(p: [Point; 3]) -> f64 {
    let [a, b, c] = p;
    let s = 0.5 * (distance(a, b) + distance(b, c) + distance(c, a));
    signed_area(p).abs() / s
}

/// Uniform `2^level × 2^level` grid on the unit square, every cell split by
/// its lower-left to upper-right diagonal.
pub fn build_unit_square_mesh(level: u32) -> Result<(BulkMesh, BoundaryMesh)> {
    if level == 0 || level > 12 {
        return Err(Error::InvalidArgument(format!(
            "mesh level must be in 1..=12, got {level}"
        )));
    }
    let n = 1usize << level;
    let inv = 1.0 / n as f64;
    let vid = |i: usize, j: usize| j * (n + 1) + i;

    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push([i as f64 * inv, j as f64 * inv]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let v00 = vid(i, j);
            let v10 = vid(i + 1, j);
            let v11 = vid(i + 1, j + 1);
            let v01 = vid(i, j + 1);
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }
    let mut mesh = BulkMesh {
        vertices,
        triangles,
        h: 0.0,
        grid_level: Some(level),
    };
    mesh.h = max_edge_length(&mesh);
    let bnd = extract_boundary(&mesh)?;
    Ok((mesh, bnd))
}

fn max_edge_length(mesh: &BulkMesh) -> f64 {
    (0..mesh.num_triangles())
        .map(|t| diameter(mesh.triangle_points(t)))
        .fold(0.0, f64::max)
}

/// Undirected edge → `(triangle, from, to)` for every occurrence.
type EdgeIncidence = BTreeMap<(usize, usize), Vec<(usize, usize, usize)>>;

/// Directed boundary edges `(a, b)` as they appear in counterclockwise
/// triangles, keyed by the undirected edge. An edge is on the boundary iff
/// exactly one triangle contains it.
fn edge_incidence(mesh: &BulkMesh) -> EdgeIncidence {
    let mut map = EdgeIncidence::new();
    for (t, tri) in mesh.triangles.iter().enumerate() {
        for k in 0..3 {
            let a = tri[k];
            let b = tri[(k + 1) % 3];
            map.entry((a.min(b), a.max(b))).or_default().push((t, a, b));
        }
    }
    map
}

/// Collect the edges that belong to exactly one triangle and order them into
/// closed loops, each traversed with the domain on its left.
pub fn extract_boundary(mesh: &BulkMesh) -> Result<BoundaryMesh> {
    let incidence = edge_incidence(mesh);
    let mut succ: BTreeMap<usize, usize> = BTreeMap::new();
    for (key, tris) in &incidence {
        match tris.len() {
            1 => {
                let (_, a, b) = tris[0];
                if succ.insert(a, b).is_some() {
                    return Err(Error::Mesh(format!(
                        "boundary vertex {a} has more than one outgoing boundary edge"
                    )));
                }
            }
            2 => {}
            k => {
                return Err(Error::Mesh(format!(
                    "edge {:?} is shared by {k} triangles",
                    key
                )))
            }
        }
    }
    order_loops(&succ)
}

fn order_loops(succ: &BTreeMap<usize, usize>) -> Result<BoundaryMesh> {
    let mut visited: BTreeMap<usize, bool> = succ.keys().map(|&k| (k, false)).collect();
    let mut edges = Vec::with_capacity(succ.len());
    let mut bnd_to_bulk = Vec::with_capacity(succ.len());
    for &start in succ.keys() {
        if visited[&start] {
            continue;
        }
        let mut v = start;
        loop {
            visited.insert(v, true);
            bnd_to_bulk.push(v);
            let next = *succ.get(&v).ok_or_else(|| {
                Error::Mesh(format!("open boundary loop: vertex {v} has no successor"))
            })?;
            edges.push([v, next]);
            if next == start {
                break;
            }
            match visited.get(&next) {
                Some(false) => v = next,
                Some(true) => {
                    return Err(Error::Mesh(format!(
                        "boundary loop through vertex {next} does not close at its start"
                    )))
                }
                None => {
                    return Err(Error::Mesh(format!(
                        "open boundary loop: vertex {next} has no outgoing boundary edge"
                    )))
                }
            }
        }
    }
    Ok(BoundaryMesh { edges, bnd_to_bulk })
}

/// Parse the whitespace separated mesh format:
///
/// ```text
/// nv nt ne
/// x y          (nv lines)
/// i j k        (nt lines, 0-based)
/// i j          (ne lines, boundary edges)
/// ```
///
/// `#` starts a comment. Clockwise triangles are reoriented with a warning.
/// The boundary is always extracted from the triangles; listed edges must
/// agree with it.
pub fn parse_mesh(text: &str, origin: &Path) -> Result<(BulkMesh, BoundaryMesh)> {
    let tokens: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .flat_map(|(ln, line)| {
            let content = line.split('#').next().unwrap_or("");
            content.split_whitespace().map(move |tok| (ln + 1, tok))
        })
        .collect();
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        msg,
    };
    if tokens.len() < 3 {
        return Err(parse_err(1, "missing header `nv nt ne`".into()));
    }
    let mut header = [0usize; 3];
    for (slot, &(ln, tok)) in header.iter_mut().zip(&tokens) {
        *slot = tok
            .parse()
            .map_err(|e| parse_err(ln, format!("bad header count `{tok}`: {e}")))?;
    }
    let [nv, nt, ne] = header;
    let rest = &tokens[3..];
    let needed = 2 * nv + 3 * nt + 2 * ne;
    if rest.len() < needed {
        let line = tokens.last().map(|t| t.0).unwrap_or(1);
        return Err(parse_err(
            line,
            format!("expected {needed} numbers after header, found {}", rest.len()),
        ));
    }
    if rest.len() > needed {
        return Err(parse_err(rest[needed].0, "trailing data after boundary edges".into()));
    }
    let float_at = |k: usize| -> Result<f64> {
        let (ln, tok) = rest[k];
        let v = tok
            .parse::<f64>()
            .map_err(|e| parse_err(ln, format!("bad coordinate `{tok}`: {e}")))?;
        if !v.is_finite() {
            return Err(parse_err(ln, format!("non-finite coordinate `{tok}`")));
        }
        Ok(v)
    };
    let index_at = |k: usize, bound: usize| -> Result<usize> {
        let (ln, tok) = rest[k];
        let v = tok
            .parse::<usize>()
            .map_err(|e| parse_err(ln, format!("bad index `{tok}`: {e}")))?;
        if v >= bound {
            return Err(parse_err(ln, format!("vertex index {v} out of range (nv = {bound})")));
        }
        Ok(v)
    };

    let mut vertices = Vec::with_capacity(nv);
    for v in 0..nv {
        vertices.push([float_at(2 * v)?, float_at(2 * v + 1)?]);
    }
    let base = 2 * nv;
    let mut triangles = Vec::with_capacity(nt);
    for t in 0..nt {
        let k = base + 3 * t;
        triangles.push([index_at(k, nv)?, index_at(k + 1, nv)?, index_at(k + 2, nv)?]);
    }
    let base = base + 3 * nt;
    let mut listed = Vec::with_capacity(ne);
    for e in 0..ne {
        let k = base + 2 * e;
        listed.push([index_at(k, nv)?, index_at(k + 1, nv)?]);
    }

    let mut mesh = BulkMesh {
        vertices,
        triangles,
        h: 0.0,
        grid_level: None,
    };
    orient_triangles(&mut mesh)?;
    check_referenced(&mesh)?;
    check_conforming(&mesh)?;
    mesh.h = max_edge_length(&mesh);
    let bnd = extract_boundary(&mesh)?;

    if !listed.is_empty() {
        let mut want: Vec<(usize, usize)> =
            listed.iter().map(|&[a, b]| (a.min(b), a.max(b))).collect();
        let mut have: Vec<(usize, usize)> =
            bnd.edges.iter().map(|&[a, b]| (a.min(b), a.max(b))).collect();
        want.sort_unstable();
        have.sort_unstable();
        if want != have {
            return Err(Error::Mesh(
                "listed boundary edges differ from the edges belonging to exactly one triangle"
                    .into(),
            ));
        }
    }
    if let Some(level) = detect_unit_square_level(&mesh) {
        mesh.grid_level = Some(level);
    }
    Ok((mesh, bnd))
}

pub fn load_mesh(path: impl AsRef<Path>) -> Result<(BulkMesh, BoundaryMesh)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_mesh(&text, path)
}

/// Serialize in the format accepted by [`parse_mesh`].
pub fn format_mesh(mesh: &BulkMesh, bnd: &BoundaryMesh) -> String {
    use std::fmt::Write;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{} {} {}",
        mesh.num_vertices(),
        mesh.num_triangles(),
        bnd.num_edges()
    );
    for v in &mesh.vertices {
        let _ = writeln!(s, "{:e} {:e}", v[0], v[1]);
    }
    for t in &mesh.triangles {
        let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
    }
    for e in &bnd.edges {
        let _ = writeln!(s, "{} {}", e[0], e[1]);
    }
    s
}

fn orient_triangles(mesh: &mut BulkMesh) -> Result<()> {
    let scale = mesh
        .vertices
        .iter()
        .fold(0.0f64, |m, p| m.max(p[0].abs()).max(p[1].abs()))
        .max(1.0);
    for t in 0..mesh.num_triangles() {
        let area = signed_area(mesh.triangle_points(t));
        if area.abs() <= 1e-14 * scale * scale {
            return Err(Error::DegenerateElement { index: t, area });
        }
        if area < 0.0 {
            warn!("triangle {t} is listed clockwise; reorienting");
            mesh.triangles[t].swap(1, 2);
        }
    }
    Ok(())
}

fn check_referenced(mesh: &BulkMesh) -> Result<()> {
    let mut used = vec![false; mesh.num_vertices()];
    for t in &mesh.triangles {
        for &v in t {
            used[v] = true;
        }
    }
    if let Some(v) = used.iter().position(|u| !u) {
        return Err(Error::Mesh(format!(
            "vertex {v} is not referenced by any triangle"
        )));
    }
    Ok(())
}

/// Conformity problems found in a triangulation.
fn conformity_issues(mesh: &BulkMesh) -> Vec<String> {
    let mut issues = Vec::new();
    let incidence = edge_incidence(mesh);
    for (&(a, b), tris) in &incidence {
        match tris.len() {
            1 => {
                // a vertex in the interior of a single-owner edge is a hanging node
                let pa = mesh.vertices[a];
                let pb = mesh.vertices[b];
                let len = distance(pa, pb);
                for (v, &p) in mesh.vertices.iter().enumerate() {
                    if v == a || v == b {
                        continue;
                    }
                    let cross = (pb[0] - pa[0]) * (p[1] - pa[1]) - (pb[1] - pa[1]) * (p[0] - pa[0]);
                    if cross.abs() > 1e-12 * len * len {
                        continue;
                    }
                    let s = ((p[0] - pa[0]) * (pb[0] - pa[0]) + (p[1] - pa[1]) * (pb[1] - pa[1]))
                        / (len * len);
                    if s > 1e-12 && s < 1.0 - 1e-12 {
                        issues.push(format!("hanging vertex {v} on edge ({a}, {b})"));
                    }
                }
            }
            2 => {
                let (_, a0, b0) = tris[0];
                let (_, a1, b1) = tris[1];
                if a0 == a1 && b0 == b1 {
                    issues.push(format!(
                        "triangles {} and {} overlap across edge ({a}, {b})",
                        tris[0].0, tris[1].0
                    ));
                }
            }
            k => issues.push(format!("edge ({a}, {b}) is shared by {k} triangles")),
        }
    }
    issues
}

fn check_conforming(mesh: &BulkMesh) -> Result<()> {
    match conformity_issues(mesh).into_iter().next() {
        Some(msg) => Err(Error::Mesh(format!("non-conforming mesh: {msg}"))),
        None => Ok(()),
    }
}

fn detect_unit_square_level(mesh: &BulkMesh) -> Option<u32> {
    let nv = mesh.num_vertices();
    let n = (nv as f64).sqrt().round() as usize - 1;
    if n < 2 || !n.is_power_of_two() || (n + 1) * (n + 1) != nv {
        return None;
    }
    let level = n.trailing_zeros();
    let (reference, _) = build_unit_square_mesh(level).ok()?;
    let same = reference.vertices == mesh.vertices && reference.triangles == mesh.triangles;
    same.then_some(level)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Warning,
    Violation,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Issue {
    NonPositiveArea { triangle: usize, area: f64 },
    NonConforming(String),
    UnreferencedVertex(usize),
    WrongMeshSize { stored: f64, actual: f64 },
    QuasiUniformity { ratio: f64, bound: f64 },
    /// Boundary edge set differs from the edges owned by exactly one triangle.
    BoundaryMismatch(String),
    OpenLoop(String),
    PerimeterMismatch { listed: f64, actual: f64 },
    BadBoundaryMap(String),
}

impl Issue {
    pub fn severity(&self) -> Severity {
        match self {
            Issue::QuasiUniformity { .. } => Severity::Warning,
            _ => Severity::Violation,
        }
    }
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Issue::NonPositiveArea { triangle, area } => {
                write!(f, "triangle {triangle} has non-positive area {area:e}")
            }
            Issue::NonConforming(msg) => write!(f, "non-conforming: {msg}"),
            Issue::UnreferencedVertex(v) => write!(f, "vertex {v} is not used by any triangle"),
            Issue::WrongMeshSize { stored, actual } => {
                write!(f, "stored h = {stored:e} but longest edge is {actual:e}")
            }
            Issue::QuasiUniformity { ratio, bound } => {
                write!(f, "quasiuniformity ratio {ratio:.4} exceeds {bound}")
            }
            Issue::BoundaryMismatch(msg) => write!(f, "boundary mismatch: {msg}"),
            Issue::OpenLoop(msg) => write!(f, "boundary loop: {msg}"),
            Issue::PerimeterMismatch { listed, actual } => write!(
                f,
                "boundary edge lengths sum to {listed:e}, boundary of triangulation has length {actual:e}"
            ),
            Issue::BadBoundaryMap(msg) => write!(f, "boundary vertex map: {msg}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
    pub quasiuniformity_ratio: f64,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn has_violations(&self) -> bool {
        self.issues
            .iter()
            .any(|i| i.severity() == Severity::Violation)
    }
}

/// Check every mesh invariant and list what fails. Never errors.
pub fn validate(mesh: &BulkMesh, bnd: &BoundaryMesh) -> ValidationReport {
    validate_with_bound(mesh, bnd, DEFAULT_QUASIUNIFORMITY_BOUND)
}

pub fn validate_with_bound(
    mesh: &BulkMesh,
    bnd: &BoundaryMesh,
    quasiuniformity_bound: f64,
) -> ValidationReport {
    let mut issues = Vec::new();
    let nv = mesh.num_vertices();

    for t in 0..mesh.num_triangles() {
        let area = signed_area(mesh.triangle_points(t));
        if area <= 0.0 {
            issues.push(Issue::NonPositiveArea { triangle: t, area });
        }
    }
    let mut used = vec![false; nv];
    for tri in &mesh.triangles {
        for &v in tri {
            used[v] = true;
        }
    }
    issues.extend(
        used.iter()
            .enumerate()
            .filter(|(_, u)| !**u)
            .map(|(v, _)| Issue::UnreferencedVertex(v)),
    );
    issues.extend(conformity_issues(mesh).into_iter().map(Issue::NonConforming));

    let actual_h = max_edge_length(mesh);
    if (actual_h - mesh.h).abs() > 1e-14 * actual_h.max(1.0) {
        issues.push(Issue::WrongMeshSize {
            stored: mesh.h,
            actual: actual_h,
        });
    }
    let ratio = mesh.quasiuniformity_ratio();
    if ratio.is_nan() || ratio > quasiuniformity_bound {
        issues.push(Issue::QuasiUniformity {
            ratio,
            bound: quasiuniformity_bound,
        });
    }

    // boundary edges are exactly the edges owned by one triangle
    let incidence = edge_incidence(mesh);
    let mut owned: Vec<(usize, usize)> = incidence
        .iter()
        .filter(|(_, t)| t.len() == 1)
        .map(|(&k, _)| k)
        .collect();
    owned.sort_unstable();
    let mut listed: Vec<(usize, usize)> = bnd
        .edges
        .iter()
        .map(|&[a, b]| (a.min(b), a.max(b)))
        .collect();
    listed.sort_unstable();
    for e in &listed {
        if owned.binary_search(e).is_err() {
            let owners = incidence.get(e).map_or(0, |t| t.len());
            issues.push(Issue::BoundaryMismatch(format!(
                "edge {e:?} is contained in {owners} triangles, expected exactly one"
            )));
        }
    }
    for e in &owned {
        if listed.binary_search(e).is_err() {
            issues.push(Issue::BoundaryMismatch(format!(
                "edge {e:?} lies on the boundary but is missing from the boundary mesh"
            )));
        }
    }
    if listed.windows(2).any(|w| w[0] == w[1]) {
        issues.push(Issue::BoundaryMismatch("duplicate boundary edge".into()));
    }

    // loop closure
    if !bnd.edges.is_empty() {
        let mut loop_start = bnd.edges[0][0];
        for k in 0..bnd.edges.len() {
            let [_, b] = bnd.edges[k];
            if b == loop_start {
                if let Some(next) = bnd.edges.get(k + 1) {
                    loop_start = next[0];
                }
                continue;
            }
            match bnd.edges.get(k + 1) {
                Some(next) if next[0] == b => {}
                _ => {
                    issues.push(Issue::OpenLoop(format!(
                        "edge {k} ends at vertex {b} but the loop does not continue from it"
                    )));
                    break;
                }
            }
        }
    }

    let listed_len = bnd.perimeter(mesh);
    let actual_len: f64 = owned
        .iter()
        .map(|&(a, b)| distance(mesh.vertices[a], mesh.vertices[b]))
        .sum();
    if (listed_len - actual_len).abs() > 1e-12 * actual_len.max(1.0) {
        issues.push(Issue::PerimeterMismatch {
            listed: listed_len,
            actual: actual_len,
        });
    }

    let mut seen = vec![false; nv];
    for &v in &bnd.bnd_to_bulk {
        if v >= nv {
            issues.push(Issue::BadBoundaryMap(format!("index {v} out of range")));
            continue;
        }
        if seen[v] {
            issues.push(Issue::BadBoundaryMap(format!("bulk vertex {v} listed twice")));
        }
        seen[v] = true;
    }
    for &[a, b] in &bnd.edges {
        for v in [a, b] {
            if v < nv && !seen[v] {
                issues.push(Issue::BadBoundaryMap(format!(
                    "edge vertex {v} has no boundary-local index"
                )));
            }
        }
    }

    ValidationReport {
        issues,
        quasiuniformity_ratio: ratio,
    }
}

/// Evaluate the P1 function with nodal `values` on the unit-square grid of
/// the given level at the point `p ∈ [0,1]²`.
pub fn eval_unit_square_p1(level: u32, values: &[f64], p: Point) -> f64 {
    let n = 1usize << level;
    debug_assert_eq!(values.len(), (n + 1) * (n + 1));
    let sx = (p[0] * n as f64).clamp(0.0, n as f64);
    let sy = (p[1] * n as f64).clamp(0.0, n as f64);
    let i = (sx.floor() as usize).min(n - 1);
    let j = (sy.floor() as usize).min(n - 1);
    let a = sx - i as f64;
    let b = sy - j as f64;
    let vid = |i: usize, j: usize| values[j * (n + 1) + i];
    let f00 = vid(i, j);
    let f10 = vid(i + 1, j);
    let f11 = vid(i + 1, j + 1);
    let f01 = vid(i, j + 1);
    if a >= b {
        f00 + a * (f10 - f00) + b * (f11 - f10)
    } else {
        f00 + b * (f01 - f00) + a * (f11 - f01)
    }
}

/// Nodal values on level `to` of the coarse P1 function on level `from`.
/// Exact on the nested unit-square hierarchy.
pub fn prolongate_unit_square(from: u32, to: u32, values: &[f64]) -> Result<Vec<f64>> {
    if to < from {
        return Err(Error::InvalidArgument(format!(
            "cannot prolongate from level {from} to coarser level {to}"
        )));
    }
    let nc = 1usize << from;
    if values.len() != (nc + 1) * (nc + 1) {
        return Err(Error::LengthMismatch {
            expected: (nc + 1) * (nc + 1),
            got: values.len(),
        });
    }
    if to == from {
        return Ok(values.to_vec());
    }
    let nf = 1usize << to;
    let inv = 1.0 / nf as f64;
    let mut out = Vec::with_capacity((nf + 1) * (nf + 1));
    for j in 0..=nf {
        for i in 0..=nf {
            out.push(eval_unit_square_p1(from, values, [i as f64 * inv, j as f64 * inv]));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQRT2: f64 = std::f64::consts::SQRT_2;

    #[test]
    fn level_one_counts() {
        let (m, b) = build_unit_square_mesh(1).unwrap();
        assert_eq!(m.num_vertices(), 9);
        assert_eq!(m.num_triangles(), 8);
        assert_eq!(b.num_edges(), 8);
        assert_eq!(b.num_vertices(), 8);
        assert_eq!(b.perimeter(&m), 4.0);
        assert!(validate(&m, &b).is_empty());
    }

    #[test]
    fn level_seven_and_eight_sizes() {
        let (m, b) = build_unit_square_mesh(7).unwrap();
        assert_eq!(m.num_vertices(), 16641);
        assert_eq!(b.num_vertices(), 512);
        assert!((m.h - SQRT2 / 128.0).abs() < 1e-16);
        let (m, b) = build_unit_square_mesh(8).unwrap();
        assert_eq!(m.num_vertices(), 66049);
        assert_eq!(b.num_vertices(), 1024);
    }

    #[test]
    fn level_zero_is_rejected() {
        assert!(build_unit_square_mesh(0).is_err());
    }

    #[test]
    fn boundary_is_counterclockwise_from_origin() {
        let (m, b) = build_unit_square_mesh(2).unwrap();
        assert_eq!(b.bnd_to_bulk[0], 0);
        assert_eq!(m.vertices[b.bnd_to_bulk[1]], [0.25, 0.0]);
        assert_eq!(b.edges.last().unwrap()[1], 0);
    }

    #[test]
    fn quasiuniformity_is_one_plus_sqrt2() {
        // right isosceles with legs L: diameter L√2, incircle diameter L(2-√2)
        let legs = 0.125;
        let expected = (legs * SQRT2) / (legs * (2.0 - SQRT2));
        assert!((expected - (1.0 + SQRT2)).abs() < 1e-14);
        for level in 1..=5 {
            let (m, _) = build_unit_square_mesh(level).unwrap();
            assert!((m.quasiuniformity_ratio() - (1.0 + SQRT2)).abs() < 1e-12);
        }
    }

    #[test]
    fn missing_boundary_edge_is_a_violation() {
        let (m, mut b) = build_unit_square_mesh(3).unwrap();
        assert!(validate(&m, &b).is_empty());
        b.edges.remove(5);
        let report = validate(&m, &b);
        assert!(report
            .issues
            .iter()
            .any(|i| matches!(i, Issue::BoundaryMismatch(_))));
        assert!(report.issues.iter().any(|i| matches!(i, Issue::OpenLoop(_))));
    }

    #[test]
    fn flipped_triangle_is_reported() {
        let (mut m, b) = build_unit_square_mesh(2).unwrap();
        m.triangles[3].swap(0, 1);
        let report = validate(&m, &b);
        assert!(report
            .issues
            .iter()
            .any(|i| matches!(i, Issue::NonPositiveArea { triangle: 3, .. })));
    }

    #[test]
    fn tight_quasiuniformity_bound_is_only_a_warning() {
        let (m, b) = build_unit_square_mesh(2).unwrap();
        let report = validate_with_bound(&m, &b, 2.0);
        assert_eq!(report.issues.len(), 1);
        assert!(!report.has_violations());
    }

    #[test]
    fn area_and_perimeter() {
        for level in 1..=6 {
            let (m, b) = build_unit_square_mesh(level).unwrap();
            assert!((m.area() - 1.0).abs() <= 1e-14);
            assert!((b.perimeter(&m) - 4.0).abs() <= 1e-13);
        }
    }

    #[test]
    fn p1_evaluation_hits_nodes() {
        let (m, _) = build_unit_square_mesh(3).unwrap();
        let f: Vec<f64> = m.vertices.iter().map(|p| p[0] * p[0] - 3.0 * p[1]).collect();
        for (p, &v) in m.vertices.iter().zip(&f) {
            assert_eq!(eval_unit_square_p1(3, &f, *p), v);
        }
    }
}
