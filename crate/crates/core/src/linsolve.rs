//! Linear solvers for the step systems.
//!
//! The direct path wraps faer's sparse LU with partial pivoting. The
//! iterative path is restarted GMRES, right-preconditioned with ILU(0).

use faer::prelude::*;
use faer::sparse::{linalg::LuError, SparseColMat, Triplet};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::{dot, CsrMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SolverOptions {
    /// Sparse LU. The state-independent block is factored once per run.
    #[default]
    Direct,
    /// Restarted GMRES with an ILU(0) preconditioner on the full system.
    Gmres {
        restart: usize,
        max_iter: usize,
        rel_tol: f64,
    },
}

impl SolverOptions {
    pub fn gmres() -> Self {
        SolverOptions::Gmres {
            restart: 60,
            max_iter: 2000,
            rel_tol: 1e-14,
        }
    }
}

/// Sparse LU factors of a square matrix.
pub struct SparseLu {
    n: usize,
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
}

impl std::fmt::Debug for SparseLu {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SparseLu").field("n", &self.n).finish()
    }
}

impl SparseLu {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        if a.rows() != a.cols() {
            return Err(Error::Solver(format!(
                "matrix is {}x{}, expected square",
                a.rows(),
                a.cols()
            )));
        }
        let triplets: Vec<Triplet<usize, usize, f64>> = a
            .triplets()
            .map(|(i, j, v)| Triplet::new(i, j, v))
            .collect();
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(a.rows(), a.cols(), &triplets)
            .map_err(|e| Error::Solver(format!("building column matrix: {e:?}")))?;
        let lu = mat.sp_lu().map_err(|e| match e {
            LuError::SymbolicSingular { index } => {
                Error::Solver(format!("matrix is structurally singular at column {index}"))
            }
            other => Error::Solver(format!("sparse LU failed: {other:?}")),
        })?;
        Ok(Self { n: a.rows(), lu })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Overwrite every column with `A⁻¹ column`.
    pub fn solve_columns(&self, cols: &mut [Vec<f64>]) -> Result<()> {
        if cols.is_empty() {
            return Ok(());
        }
        for c in cols.iter() {
            if c.len() != self.n {
                return Err(Error::LengthMismatch {
                    expected: self.n,
                    got: c.len(),
                });
            }
        }
        let mut rhs = Mat::<f64>::from_fn(self.n, cols.len(), |i, j| cols[j][i]);
        self.lu.solve_in_place(rhs.as_mut());
        for (j, c) in cols.iter_mut().enumerate() {
            for (i, ci) in c.iter_mut().enumerate() {
                *ci = rhs[(i, j)];
            }
        }
        if cols.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Solver("LU solve produced non-finite values (singular matrix)".into()));
        }
        Ok(())
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let mut cols = vec![rhs.to_vec()];
        self.solve_columns(&mut cols)?;
        Ok(cols.pop().unwrap())
    }
}

/// Incomplete LU factorization with the sparsity pattern of the input.
#[derive(Debug, Clone)]
pub struct Ilu0 {
    lu: CsrMatrix,
    diag_pos: Vec<usize>,
    values: Vec<f64>,
}

impl Ilu0 {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let n = a.rows();
        let rp = a.row_ptr();
        let ci = a.col_idx();
        let mut values = a.values().to_vec();
        let mut diag_pos = vec![usize::MAX; n];
        for i in 0..n {
            for k in rp[i]..rp[i + 1] {
                if ci[k] == i {
                    diag_pos[i] = k;
                }
            }
            if diag_pos[i] == usize::MAX {
                return Err(Error::Solver(format!("ILU(0): row {i} has no diagonal entry")));
            }
        }
        let mut marker = vec![usize::MAX; n];
        for i in 0..n {
            for k in rp[i]..rp[i + 1] {
                marker[ci[k]] = k;
            }
            for kk in rp[i]..rp[i + 1] {
                let k = ci[kk];
                if k >= i {
                    break;
                }
                let pivot = values[diag_pos[k]];
                if pivot == 0.0 {
                    return Err(Error::Solver(format!("ILU(0): zero pivot in row {k}")));
                }
                let lik = values[kk] / pivot;
                values[kk] = lik;
                for q in diag_pos[k] + 1..rp[k + 1] {
                    let j = ci[q];
                    let pos = marker[j];
                    if pos != usize::MAX {
                        values[pos] -= lik * values[q];
                    }
                }
            }
            for k in rp[i]..rp[i + 1] {
                marker[ci[k]] = usize::MAX;
            }
            if values[diag_pos[i]] == 0.0 {
                return Err(Error::Solver(format!("ILU(0): zero pivot in row {i}")));
            }
        }
        Ok(Self {
            lu: a.clone(),
            diag_pos,
            values,
        })
    }

    /// `x ← (LU)⁻¹ x`
    pub fn apply(&self, x: &mut [f64]) {
        let rp = self.lu.row_ptr();
        let ci = self.lu.col_idx();
        let n = x.len();
        for i in 0..n {
            let mut acc = x[i];
            for k in rp[i]..self.diag_pos[i] {
                acc -= self.values[k] * x[ci[k]];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for k in self.diag_pos[i] + 1..rp[i + 1] {
                acc -= self.values[k] * x[ci[k]];
            }
            x[i] = acc / self.values[self.diag_pos[i]];
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GmresStats {
    pub iterations: usize,
    pub residual_norm: f64,
}

/// Restarted GMRES with right preconditioning, starting from `x`.
/// Stops once `‖b − A x‖₂ ≤ rel_tol·(1 + ‖b‖₂)`.
pub fn gmres(
    a: &CsrMatrix,
    precond: &Ilu0,
    b: &[f64],
    x: &mut [f64],
    restart: usize,
    max_iter: usize,
    rel_tol: f64,
) -> Result<GmresStats> {
    let n = b.len();
    let restart = restart.max(1);
    let target = rel_tol * (1.0 + dot(b, b).sqrt());
    let mut iterations = 0;
    let mut r = vec![0.0; n];
    let mut w = vec![0.0; n];
    loop {
        a.mul_vec_into(x, &mut r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        let beta = dot(&r, &r).sqrt();
        if beta <= target {
            return Ok(GmresStats {
                iterations,
                residual_norm: beta,
            });
        }
        if iterations >= max_iter {
            return Err(Error::Solver(format!(
                "GMRES did not converge in {max_iter} iterations (residual {beta:e}, target {target:e})"
            )));
        }
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(restart + 1);
        basis.push(r.iter().map(|v| v / beta).collect());
        let mut hess = vec![vec![0.0; restart]; restart + 1];
        let mut cs = vec![0.0; restart];
        let mut sn = vec![0.0; restart];
        let mut g = vec![0.0; restart + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..restart {
            let mut z = basis[k].clone();
            precond.apply(&mut z);
            a.mul_vec_into(&z, &mut w);
            for (j, v) in basis.iter().enumerate() {
                let hjk = dot(&w, v);
                hess[j][k] = hjk;
                for (wi, vi) in w.iter_mut().zip(v) {
                    *wi -= hjk * vi;
                }
            }
            let hnext = dot(&w, &w).sqrt();
            hess[k + 1][k] = hnext;
            for j in 0..k {
                let t = cs[j] * hess[j][k] + sn[j] * hess[j + 1][k];
                hess[j + 1][k] = -sn[j] * hess[j][k] + cs[j] * hess[j + 1][k];
                hess[j][k] = t;
            }
            let denom = hess[k][k].hypot(hess[k + 1][k]);
            if denom == 0.0 {
                k_used = k;
                break;
            }
            cs[k] = hess[k][k] / denom;
            sn[k] = hess[k + 1][k] / denom;
            hess[k][k] = denom;
            hess[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            iterations += 1;
            k_used = k + 1;
            if g[k + 1].abs() <= target || iterations >= max_iter || hnext == 0.0 {
                break;
            }
            basis.push(w.iter().map(|v| v / hnext).collect());
        }
        // back substitution for the Krylov coefficients
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut acc = g[i];
            for j in i + 1..k_used {
                acc -= hess[i][j] * y[j];
            }
            y[i] = acc / hess[i][i];
        }
        let mut update = vec![0.0; n];
        for (yj, v) in y.iter().zip(&basis) {
            for (ui, vi) in update.iter_mut().zip(v) {
                *ui += yj * vi;
            }
        }
        precond.apply(&mut update);
        for (xi, ui) in x.iter_mut().zip(&update) {
            *xi += ui;
        }
        if k_used == 0 {
            return Err(Error::Solver("GMRES breakdown".into()));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::TripletList;

    fn tridiag(n: usize) -> CsrMatrix {
        let mut t = TripletList::new(n, n);
        for i in 0..n {
            t.push(i, i, 4.0);
            if i > 0 {
                t.push(i, i - 1, -1.0);
            }
            if i + 1 < n {
                t.push(i, i + 1, -2.0);
            }
        }
        t.into_csr()
    }

    #[test]
    fn lu_solves_nonsymmetric_system() {
        let a = tridiag(50);
        let x_true: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin()).collect();
        let b = a.mul_vec(&x_true);
        let lu = SparseLu::factor(&a).unwrap();
        let x = lu.solve(&b).unwrap();
        for (u, v) in x.iter().zip(&x_true) {
            assert!((u - v).abs() < 1e-13);
        }
    }

    #[test]
    fn lu_handles_zero_diagonal_with_pivoting() {
        let mut t = TripletList::new(2, 2);
        t.push(0, 1, 1.0);
        t.push(1, 0, 1.0);
        let lu = SparseLu::factor(&t.into_csr()).unwrap();
        assert_eq!(lu.solve(&[2.0, 3.0]).unwrap(), vec![3.0, 2.0]);
    }

    #[test]
    fn singular_matrix_is_reported() {
        let mut t = TripletList::new(2, 2);
        t.push(0, 0, 1.0);
        t.push(1, 0, 1.0);
        let r = SparseLu::factor(&t.into_csr()).and_then(|lu| lu.solve(&[1.0, 1.0]));
        assert!(r.is_err());
    }

    #[test]
    fn ilu0_is_exact_for_tridiagonal() {
        let a = tridiag(20);
        let ilu = Ilu0::new(&a).unwrap();
        let x_true: Vec<f64> = (0..20).map(|i| i as f64 - 3.0).collect();
        let mut b = a.mul_vec(&x_true);
        ilu.apply(&mut b);
        for (u, v) in b.iter().zip(&x_true) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn gmres_converges() {
        let n = 200;
        let mut t = TripletList::new(n, n);
        for i in 0..n {
            t.push(i, i, 3.0 + (i % 7) as f64);
            t.push(i, (i * 13 + 5) % n, 0.7);
            if i > 0 {
                t.push(i, i - 1, -1.0);
            }
        }
        let a = t.into_csr();
        let x_true: Vec<f64> = (0..n).map(|i| ((i * i) % 11) as f64).collect();
        let b = a.mul_vec(&x_true);
        let mut x = vec![0.0; n];
        let ilu = Ilu0::new(&a).unwrap();
        let stats = gmres(&a, &ilu, &b, &mut x, 30, 1000, 1e-14).unwrap();
        assert!(stats.iterations > 0);
        for (u, v) in x.iter().zip(&x_true) {
            assert!((u - v).abs() < 1e-10);
        }
    }
}
