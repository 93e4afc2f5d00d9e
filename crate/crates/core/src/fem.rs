//! P1 finite element operators on the bulk triangulation and its boundary.
//!
//! Mass-type terms are always lumped: `(ML)_i = ∫ I_h{χ_i}`, so every product
//! of finite element functions under a nodal interpolation operator becomes a
//! diagonal weight. Consistent mass matrices are assembled as well, but only
//! for measuring errors in the exact L² norm.

use crate::error::{Error, Result};
use crate::mesh::{distance, signed_area, BoundaryMesh, BulkMesh, Point};
use crate::sparse::{dot, CsrMatrix, TripletList};

/// Assembled operators for one mesh pair.
#[derive(Debug, Clone)]
pub struct FemOperators {
    /// `∫_Ω ∇χ_i·∇χ_j`
    pub k_bulk: CsrMatrix,
    /// Edgewise `∫_Γ ∇_Γχ_i·∇_Γχ_j`
    pub k_bnd: CsrMatrix,
    pub ml_bulk: Vec<f64>,
    pub ml_bnd: Vec<f64>,
    /// `trace[j]` is the bulk index of boundary vertex `j`.
    pub trace: Vec<usize>,
    pub m_bulk: CsrMatrix,
    pub m_bnd: CsrMatrix,
}

impl FemOperators {
    pub fn n_bulk(&self) -> usize {
        self.ml_bulk.len()
    }

    pub fn n_bnd(&self) -> usize {
        self.ml_bnd.len()
    }

    /// |Ω| as seen by the lumped quadrature.
    pub fn bulk_measure(&self) -> f64 {
        self.ml_bulk.iter().sum()
    }

    /// |Γ| as seen by the lumped quadrature.
    pub fn bnd_measure(&self) -> f64 {
        self.ml_bnd.iter().sum()
    }

    /// Boundary nodal values `T f` of a bulk nodal vector.
    pub fn restrict(&self, bulk: &[f64]) -> Vec<f64> {
        self.trace.iter().map(|&i| bulk[i]).collect()
    }

    /// `Tᵀ g`: scatter boundary values into a zero bulk vector.
    pub fn extend(&self, bnd: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_bulk()];
        for (&i, &v) in self.trace.iter().zip(bnd) {
            out[i] += v;
        }
        out
    }

    pub fn lumped_integral_bulk(&self, nodal: &[f64]) -> Result<f64> {
        lumped_integral(&self.ml_bulk, nodal)
    }

    pub fn lumped_integral_bnd(&self, nodal: &[f64]) -> Result<f64> {
        lumped_integral(&self.ml_bnd, nodal)
    }

    /// Exact `∫_Ω f_h²` for the P1 function with the given nodal values.
    pub fn l2_norm_sq_bulk(&self, nodal: &[f64]) -> f64 {
        self.m_bulk.quad_form(nodal)
    }

    /// Exact `∫_Γ f_h²` for the boundary P1 function with the given values.
    pub fn l2_norm_sq_bnd(&self, nodal: &[f64]) -> f64 {
        self.m_bnd.quad_form(nodal)
    }
}

/// `Σ_i ML_i f_i`, the integral of the nodal interpolant.
pub fn lumped_integral(ml: &[f64], nodal: &[f64]) -> Result<f64> {
    if ml.len() != nodal.len() {
        return Err(Error::LengthMismatch {
            expected: ml.len(),
            got: nodal.len(),
        });
    }
    Ok(dot(ml, nodal))
}

/// Local P1 stiffness `|K| ∇λ_a·∇λ_b` of a counterclockwise triangle.
pub fn local_stiffness_triangle(v0: Point, v1: Point, v2: Point) -> Result<[[f64; 3]; 3]> {
    let area = signed_area([v0, v1, v2]);
    let scale = distance(v0, v1).max(distance(v1, v2)).max(distance(v2, v0));
    if !(area.abs() > 1e-14 * scale * scale) {
        return Err(Error::DegenerateElement { index: 0, area });
    }
    // ∇λ_a = rot(opposite edge) / (2 area)
    let p = [v0, v1, v2];
    let mut grad = [[0.0; 2]; 3];
    for a in 0..3 {
        let b = p[(a + 1) % 3];
        let c = p[(a + 2) % 3];
        grad[a] = [(b[1] - c[1]) / (2.0 * area), (c[0] - b[0]) / (2.0 * area)];
    }
    let mut s = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            s[a][b] = area.abs() * (grad[a][0] * grad[b][0] + grad[a][1] * grad[b][1]);
        }
    }
    Ok(s)
}

/// Assemble stiffness, lumped and consistent mass matrices on Ω and Γ.
///
/// Elements are visited in storage order, so the result is bit-reproducible.
pub fn assemble_operators(mesh: &BulkMesh, bnd: &BoundaryMesh) -> Result<FemOperators> {
    let n = mesh.num_vertices();
    let mut k_bulk = TripletList::with_capacity(n, n, 9 * mesh.num_triangles());
    let mut m_bulk = TripletList::with_capacity(n, n, 9 * mesh.num_triangles());
    let mut ml_bulk = vec![0.0; n];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let [p0, p1, p2] = mesh.triangle_points(t);
        let s = local_stiffness_triangle(p0, p1, p2).map_err(|e| match e {
            Error::DegenerateElement { area, .. } => Error::DegenerateElement { index: t, area },
            other => other,
        })?;
        let area = signed_area([p0, p1, p2]).abs();
        for a in 0..3 {
            ml_bulk[tri[a]] += area / 3.0;
            for b in 0..3 {
                k_bulk.push(tri[a], tri[b], s[a][b]);
                let m = if a == b { area / 6.0 } else { area / 12.0 };
                m_bulk.push(tri[a], tri[b], m);
            }
        }
    }

    let nb = bnd.num_vertices();
    let local = bnd.local_edges(n);
    let mut k_bnd = TripletList::with_capacity(nb, nb, 4 * local.len());
    let mut m_bnd = TripletList::with_capacity(nb, nb, 4 * local.len());
    let mut ml_bnd = vec![0.0; nb];
    for (e, (&[ga, gb], &[la, lb])) in bnd.edges.iter().zip(&local).enumerate() {
        let len = distance(mesh.vertices[ga], mesh.vertices[gb]);
        if !(len > 0.0) {
            return Err(Error::DegenerateElement { index: e, area: len });
        }
        let inv = 1.0 / len;
        for (i, j, sign) in [(la, la, 1.0), (la, lb, -1.0), (lb, la, -1.0), (lb, lb, 1.0)] {
            k_bnd.push(i, j, sign * inv);
            let m = if i == j { len / 3.0 } else { len / 6.0 };
            m_bnd.push(i, j, m);
        }
        ml_bnd[la] += 0.5 * len;
        ml_bnd[lb] += 0.5 * len;
    }

    Ok(FemOperators {
        k_bulk: k_bulk.into_csr(),
        k_bnd: k_bnd.into_csr(),
        ml_bulk,
        ml_bnd,
        trace: bnd.bnd_to_bulk.clone(),
        m_bulk: m_bulk.into_csr(),
        m_bnd: m_bnd.into_csr(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_unit_square_mesh;

    fn ops(level: u32) -> (BulkMesh, FemOperators) {
        let (m, b) = build_unit_square_mesh(level).unwrap();
        let ops = assemble_operators(&m, &b).unwrap();
        (m, ops)
    }

    #[test]
    fn right_triangle_stiffness() {
        // ∇λ0 = (-1,-1)/h, ∇λ1 = (1,0)/h, ∇λ2 = (0,1)/h, area h²/2
        let want = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for h in [1.0, 0.25, 3.0e-3, 17.0] {
            let s = local_stiffness_triangle([0.0, 0.0], [h, 0.0], [0.0, h]).unwrap();
            for a in 0..3 {
                for b in 0..3 {
                    assert!((s[a][b] - want[a][b]).abs() < 1e-14, "h={h}");
                }
            }
        }
    }

    #[test]
    fn stiffness_rows_sum_to_zero_and_scale_free() {
        let p = [[0.1, -0.3], [1.7, 0.2], [0.4, 1.1]];
        let s = local_stiffness_triangle(p[0], p[1], p[2]).unwrap();
        for row in &s {
            assert!(row.iter().sum::<f64>().abs() < 1e-14);
        }
        let c = 7.5;
        let q = p.map(|v| [c * v[0], c * v[1]]);
        let sc = local_stiffness_triangle(q[0], q[1], q[2]).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                assert!((s[a][b] - sc[a][b]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn degenerate_triangle_is_an_error() {
        let r = local_stiffness_triangle([0.0, 0.0], [1.0, 1.0], [2.0, 2.0]);
        assert!(matches!(r, Err(Error::DegenerateElement { .. })));
    }

    #[test]
    fn level_one_lumped_masses() {
        let (m, ops) = ops(1);
        assert!((ops.bulk_measure() - 1.0).abs() < 1e-15);
        assert!((ops.bnd_measure() - 4.0).abs() < 1e-15);
        let center = m
            .vertices
            .iter()
            .position(|p| *p == [0.5, 0.5])
            .unwrap();
        assert!((ops.ml_bulk[center] - 0.25).abs() < 1e-16);
    }

    #[test]
    fn linear_field_energy_is_exact() {
        let (m, ops) = ops(3);
        let x: Vec<f64> = m.vertices.iter().map(|p| p[0]).collect();
        assert!((ops.k_bulk.quad_form(&x) - 1.0).abs() <= 1e-13);
    }

    #[test]
    fn lumped_integrals() {
        let (m, ops) = ops(2);
        assert!((ops.lumped_integral_bulk(&vec![1.0; m.num_vertices()]).unwrap() - 1.0).abs() < 1e-15);
        let c = -2.5;
        let g = vec![c; ops.n_bnd()];
        assert!((ops.lumped_integral_bnd(&g).unwrap() - 4.0 * c).abs() < 1e-14);
        let (m, ops) = self::ops(3);
        let x: Vec<f64> = m.vertices.iter().map(|p| p[0]).collect();
        assert!((ops.lumped_integral_bulk(&x).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(
            ops.lumped_integral_bulk(&[1.0, 2.0]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn lumped_equals_consistent_row_sums() {
        let (_, ops) = ops(3);
        for (i, &ml) in ops.ml_bulk.iter().enumerate() {
            let row: f64 = ops.m_bulk.row(i).map(|(_, v)| v).sum();
            assert!((row - ml).abs() < 1e-16);
        }
        for (j, &ml) in ops.ml_bnd.iter().enumerate() {
            let row: f64 = ops.m_bnd.row(j).map(|(_, v)| v).sum();
            assert!((row - ml).abs() < 1e-15);
        }
    }

    #[test]
    fn trace_and_extend_are_adjoint() {
        let (m, ops) = ops(2);
        let f: Vec<f64> = (0..m.num_vertices()).map(|i| (i as f64).sin()).collect();
        let g: Vec<f64> = (0..ops.n_bnd()).map(|j| (j as f64).cos()).collect();
        let lhs = dot(&ops.restrict(&f), &g);
        let rhs = dot(&f, &ops.extend(&g));
        assert!((lhs - rhs).abs() < 1e-14);
    }
}
