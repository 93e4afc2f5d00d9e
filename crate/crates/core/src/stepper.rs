//! Linear SAV time stepping for the Cahn–Hilliard system with dynamic
//! boundary conditions.
//!
//! Each step solves one linear system in the unknowns
//! `[φⁿ | μⁿ | θⁿ | rⁿ | sⁿ]` of size `2 N_Ω + N_Γ + 2`. With `T` the trace
//! map, `Δφ = φⁿ − φⁿ⁻¹`, `b_Ω`, `b_Γ` the lumped potential forces at
//! `φⁿ⁻¹` and `(w₁, w₂) = (1/(1+ξ), ξ/(1+ξ))` (or `(0, 1)` for `ξ = ∞`) the
//! rows are
//!
//! ```text
//! (A) (ML_Ω + β⁻¹TᵀML_ΓT)Δφ + τ m K_Ω μ + τ β⁻¹ m_Γ TᵀK_Γ θ = 0
//! (C) ML_Ω μ + TᵀML_Γ θ − εσ K_Ω φ − δ TᵀK_Γ Tφ − σ/ε b_Ω/√E_Ω r − 1/δ Tᵀb_Γ/√E_Γ s = 0
//! (B) w₁[ML_Γ TΔφ/τ + m_Γ K_Γ θ] + w₂ β m ML_Γ(βθ − Tμ) = 0
//! (D) r − b_Ω·φ/(2√E_Ω) = rⁿ⁻¹ − b_Ω·φⁿ⁻¹/(2√E_Ω)
//! (E) s − b_Γ·Tφ/(2√E_Γ) = sⁿ⁻¹ − b_Γ·Tφⁿ⁻¹/(2√E_Γ)
//! ```
//!
//! Rows (A) carry the factor τ. Everything except the last two rows and
//! columns is independent of the state, so the direct solver factors that
//! block once and eliminates `(r, s)` through a 2×2 Schur complement.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::FemOperators;
use crate::linsolve::{gmres, Ilu0, SolverOptions, SparseLu};
use crate::potential::{
    discrete_energy_bnd, discrete_energy_bulk, nodal_force_bnd, nodal_force_bulk, sav_radius,
    DoubleWell,
};
use crate::sparse::{dot, norm_inf, CsrMatrix, TripletList};

/// Residual bound for an accepted solve, relative to `1 + ‖rhs‖_∞`.
pub const RESIDUAL_TOL: f64 = 1e-11;

/// Physical and discretization parameters. `xi` may be `f64::INFINITY`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub m: f64,
    pub m_gamma: f64,
    pub epsilon: f64,
    pub sigma: f64,
    pub delta: f64,
    pub beta: f64,
    pub xi: f64,
    pub tau: f64,
    pub t_end: f64,
}

impl Params {
    /// All coefficients one, for checking against the unit-coefficient scheme.
    pub fn unit(xi: f64, tau: f64, t_end: f64) -> Self {
        Self {
            m: 1.0,
            m_gamma: 1.0,
            epsilon: 1.0,
            sigma: 1.0,
            delta: 1.0,
            beta: 1.0,
            xi,
            tau,
            t_end,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("m", self.m),
            ("m_gamma", self.m_gamma),
            ("epsilon", self.epsilon),
            ("sigma", self.sigma),
            ("delta", self.delta),
            ("beta", self.beta),
            ("tau", self.tau),
            ("t_end", self.t_end),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if !(self.xi >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "xi must be in [0, inf], got {}",
                self.xi
            )));
        }
        Ok(())
    }

    /// `(w₁, w₂)` weighting the surface equation and the exchange term.
    pub fn adsorption_weights(&self) -> (f64, f64) {
        if self.xi.is_infinite() {
            (0.0, 1.0)
        } else {
            (1.0 / (1.0 + self.xi), self.xi / (1.0 + self.xi))
        }
    }
}

/// Discrete unknowns at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub phi: Vec<f64>,
    pub mu: Vec<f64>,
    pub theta: Vec<f64>,
    pub r: f64,
    pub s: f64,
    pub t: f64,
    pub n: usize,
}

impl State {
    pub fn is_finite(&self) -> bool {
        self.r.is_finite()
            && self.s.is_finite()
            && self.phi.iter().chain(&self.mu).chain(&self.theta).all(|v| v.is_finite())
    }
}

/// Offsets of the unknown blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub n_bulk: usize,
    pub n_bnd: usize,
}

impl Layout {
    pub fn of(ops: &FemOperators) -> Self {
        Self {
            n_bulk: ops.n_bulk(),
            n_bnd: ops.n_bnd(),
        }
    }
    pub fn phi(&self) -> usize {
        0
    }
    pub fn mu(&self) -> usize {
        self.n_bulk
    }
    pub fn theta(&self) -> usize {
        2 * self.n_bulk
    }
    pub fn r(&self) -> usize {
        2 * self.n_bulk + self.n_bnd
    }
    pub fn s(&self) -> usize {
        self.r() + 1
    }
    /// Size of the state-independent block.
    pub fn core(&self) -> usize {
        self.r()
    }
    pub fn size(&self) -> usize {
        self.r() + 2
    }
}

/// Full linear system of one step.
#[derive(Debug, Clone)]
pub struct StepSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub layout: Layout,
}

/// Solution blocks of one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSolution {
    pub phi: Vec<f64>,
    pub mu: Vec<f64>,
    pub theta: Vec<f64>,
    pub r: f64,
    pub s: f64,
}

impl StepSolution {
    fn from_vector(layout: Layout, x: &[f64]) -> Self {
        Self {
            phi: x[layout.phi()..layout.mu()].to_vec(),
            mu: x[layout.mu()..layout.theta()].to_vec(),
            theta: x[layout.theta()..layout.r()].to_vec(),
            r: x[layout.r()],
            s: x[layout.s()],
        }
    }
}

/// The state-dependent part: last two columns and rows plus the right-hand side.
#[derive(Debug, Clone)]
struct Border {
    /// Column of `r` (resp. `s`) restricted to the core rows, dense.
    col: [Vec<f64>; 2],
    /// Row (D) (resp. (E)) restricted to the core columns, dense.
    row: [Vec<f64>; 2],
    rhs_core: Vec<f64>,
    rhs_aux: [f64; 2],
}

/// Initial state: `φ⁰` given nodally, `r⁰ = √E_h^Ω(φ⁰)`, `s⁰ = √E_h^Γ(φ⁰)`.
pub fn init_state(
    ops: &FemOperators,
    dw_bulk: &DoubleWell,
    dw_bnd: &DoubleWell,
    phi0: Vec<f64>,
) -> Result<State> {
    if phi0.len() != ops.n_bulk() {
        return Err(Error::LengthMismatch {
            expected: ops.n_bulk(),
            got: phi0.len(),
        });
    }
    if phi0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("initial phase field is not finite".into()));
    }
    let e_bulk = discrete_energy_bulk(ops, dw_bulk, &phi0);
    let e_bnd = discrete_energy_bnd(ops, dw_bnd, &phi0);
    let r = sav_radius(e_bulk, dw_bulk.energy_floor(ops.bulk_measure()))?;
    let s = sav_radius(e_bnd, dw_bnd.energy_floor(ops.bnd_measure()))?;
    Ok(State {
        phi: phi0,
        mu: vec![0.0; ops.n_bulk()],
        theta: vec![0.0; ops.n_bnd()],
        r,
        s,
        t: 0.0,
        n: 0,
    })
}

/// Assemble the state-independent block (rows and columns of φ, μ, θ).
pub fn assemble_core_matrix(ops: &FemOperators, params: &Params) -> CsrMatrix {
    let lay = Layout::of(ops);
    let n = lay.n_bulk;
    let (w1, w2) = params.adsorption_weights();
    let Params {
        m,
        m_gamma,
        epsilon,
        sigma,
        delta,
        beta,
        tau,
        ..
    } = *params;
    let tr = &ops.trace;
    let nnz_guess = 4 * ops.k_bulk.nnz() + 6 * ops.k_bnd.nnz() + 2 * n;
    let mut t = TripletList::with_capacity(lay.core(), lay.core(), nnz_guess);

    // (A): τ-scaled mass balance, tested over the bulk space
    let diag_a = mass_diagonal(ops, beta);
    for i in 0..n {
        t.push(i, lay.phi() + i, diag_a[i]);
        for (j, k) in ops.k_bulk.row(i) {
            t.push(i, lay.mu() + j, tau * m * k);
        }
    }
    for (jb, &i) in tr.iter().enumerate() {
        for (lb, k) in ops.k_bnd.row(jb) {
            t.push(i, lay.theta() + lb, tau * m_gamma * k / beta);
        }
    }

    // (C): chemical potential
    for i in 0..n {
        let row = lay.mu() + i;
        t.push(row, lay.mu() + i, ops.ml_bulk[i]);
        for (j, k) in ops.k_bulk.row(i) {
            t.push(row, lay.phi() + j, -epsilon * sigma * k);
        }
    }
    for (jb, &i) in tr.iter().enumerate() {
        let row = lay.mu() + i;
        t.push(row, lay.theta() + jb, ops.ml_bnd[jb]);
        for (lb, k) in ops.k_bnd.row(jb) {
            t.push(row, lay.phi() + tr[lb], -delta * k);
        }
    }

    // (B): surface equation blended with the exchange condition
    for (jb, &i) in tr.iter().enumerate() {
        let row = lay.theta() + jb;
        let ml = ops.ml_bnd[jb];
        if w1 != 0.0 {
            t.push(row, lay.phi() + i, w1 * ml / tau);
            for (lb, k) in ops.k_bnd.row(jb) {
                t.push(row, lay.theta() + lb, w1 * m_gamma * k);
            }
        }
        if w2 != 0.0 {
            t.push(row, lay.theta() + jb, w2 * beta * beta * m * ml);
            t.push(row, lay.mu() + i, -w2 * beta * m * ml);
        }
    }
    t.into_csr()
}

/// Diagonal of `ML_Ω + β⁻¹ TᵀML_Γ T`.
fn mass_diagonal(ops: &FemOperators, beta: f64) -> Vec<f64> {
    let mut d = ops.ml_bulk.clone();
    for (jb, &i) in ops.trace.iter().enumerate() {
        d[i] += ops.ml_bnd[jb] / beta;
    }
    d
}

fn check_energy(energy: f64, dw: &DoubleWell, measure: f64) -> Result<f64> {
    let floor = dw.energy_floor(measure);
    if !(energy >= floor) {
        return Err(Error::EnergyFloor { energy, floor });
    }
    Ok(energy.sqrt())
}

fn assemble_border(
    ops: &FemOperators,
    params: &Params,
    dw_bulk: &DoubleWell,
    dw_bnd: &DoubleWell,
    prev: &State,
) -> Result<Border> {
    let lay = Layout::of(ops);
    let n0 = lay.core();
    let Params {
        epsilon,
        sigma,
        delta,
        beta,
        tau,
        ..
    } = *params;
    let (w1, _) = params.adsorption_weights();
    if prev.phi.len() != lay.n_bulk {
        return Err(Error::LengthMismatch {
            expected: lay.n_bulk,
            got: prev.phi.len(),
        });
    }

    let sqrt_e_bulk = check_energy(
        discrete_energy_bulk(ops, dw_bulk, &prev.phi),
        dw_bulk,
        ops.bulk_measure(),
    )?;
    let sqrt_e_bnd = check_energy(
        discrete_energy_bnd(ops, dw_bnd, &prev.phi),
        dw_bnd,
        ops.bnd_measure(),
    )?;
    let b_bulk = nodal_force_bulk(ops, dw_bulk, &prev.phi);
    let b_bnd = nodal_force_bnd(ops, dw_bnd, &prev.phi);

    let mut col_r = vec![0.0; n0];
    let mut col_s = vec![0.0; n0];
    let mut row_r = vec![0.0; n0];
    let mut row_s = vec![0.0; n0];
    for i in 0..lay.n_bulk {
        col_r[lay.mu() + i] = -sigma / epsilon * b_bulk[i] / sqrt_e_bulk;
        row_r[lay.phi() + i] = -b_bulk[i] / (2.0 * sqrt_e_bulk);
    }
    for (jb, &i) in ops.trace.iter().enumerate() {
        col_s[lay.mu() + i] += -b_bnd[jb] / (delta * sqrt_e_bnd);
        row_s[lay.phi() + i] += -b_bnd[jb] / (2.0 * sqrt_e_bnd);
    }

    let mut rhs_core = vec![0.0; n0];
    let diag_a = mass_diagonal(ops, beta);
    for i in 0..lay.n_bulk {
        rhs_core[lay.phi() + i] = diag_a[i] * prev.phi[i];
    }
    if w1 != 0.0 {
        for (jb, &i) in ops.trace.iter().enumerate() {
            rhs_core[lay.theta() + jb] = w1 * ops.ml_bnd[jb] / tau * prev.phi[i];
        }
    }
    let phi_dot_r = dot(&b_bulk, &prev.phi) / (2.0 * sqrt_e_bulk);
    let trace_phi = ops.restrict(&prev.phi);
    let phi_dot_s = dot(&b_bnd, &trace_phi) / (2.0 * sqrt_e_bnd);

    Ok(Border {
        col: [col_r, col_s],
        row: [row_r, row_s],
        rhs_core,
        rhs_aux: [prev.r - phi_dot_r, prev.s - phi_dot_s],
    })
}

fn combine(core: &CsrMatrix, border: Border, layout: Layout) -> StepSystem {
    let n0 = layout.core();
    let size = layout.size();
    let mut t = TripletList::with_capacity(size, size, core.nnz() + 4 * n0 + 2);
    for (i, j, v) in core.triplets() {
        t.push(i, j, v);
    }
    for (c, col) in border.col.iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            if v != 0.0 {
                t.push(i, n0 + c, v);
            }
        }
    }
    for (c, row) in border.row.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if v != 0.0 {
                t.push(n0 + c, j, v);
            }
        }
        t.push(n0 + c, n0 + c, 1.0);
    }
    let mut rhs = border.rhs_core;
    rhs.extend_from_slice(&border.rhs_aux);
    StepSystem {
        matrix: t.into_csr(),
        rhs,
        layout,
    }
}

/// Assemble the full step system for the transition out of `prev`.
pub fn assemble_step_system(
    ops: &FemOperators,
    params: &Params,
    dw_bulk: &DoubleWell,
    dw_bnd: &DoubleWell,
    prev: &State,
) -> Result<StepSystem> {
    params.validate()?;
    let core = assemble_core_matrix(ops, params);
    let border = assemble_border(ops, params, dw_bulk, dw_bnd, prev)?;
    Ok(combine(&core, border, Layout::of(ops)))
}

/// `‖A x − b‖_∞`
pub fn residual_inf(matrix: &CsrMatrix, x: &[f64], rhs: &[f64]) -> f64 {
    let ax = matrix.mul_vec(x);
    ax.iter()
        .zip(rhs)
        .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
}

fn accept_residual(res: f64, rhs_norm: f64) -> Result<()> {
    let bound = RESIDUAL_TOL * (1.0 + rhs_norm);
    if !(res <= bound) {
        return Err(Error::Solver(format!(
            "residual {res:e} exceeds {bound:e}; the step system should be uniquely solvable"
        )));
    }
    Ok(())
}

/// Solve a full step system with a fresh sparse LU and verify the residual.
pub fn solve_step(system: &StepSystem) -> Result<StepSolution> {
    let lu = SparseLu::factor(&system.matrix)?;
    let mut x = lu.solve(&system.rhs)?;
    let rhs_norm = norm_inf(&system.rhs);
    let mut res = residual_inf(&system.matrix, &x, &system.rhs);
    for _ in 0..2 {
        if res <= RESIDUAL_TOL * (1.0 + rhs_norm) {
            break;
        }
        let ax = system.matrix.mul_vec(&x);
        let r: Vec<f64> = system.rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let dx = lu.solve(&r)?;
        for (xi, di) in x.iter_mut().zip(&dx) {
            *xi += di;
        }
        res = residual_inf(&system.matrix, &x, &system.rhs);
    }
    accept_residual(res, rhs_norm)?;
    Ok(StepSolution::from_vector(system.layout, &x))
}

enum Backend {
    Direct(SparseLu),
    Gmres {
        restart: usize,
        max_iter: usize,
        rel_tol: f64,
    },
}

/// Advances states for fixed operators and parameters. The direct backend
/// keeps one LU factorization of the state-independent block.
pub struct Stepper<'a> {
    ops: &'a FemOperators,
    params: Params,
    dw_bulk: DoubleWell,
    dw_bnd: DoubleWell,
    layout: Layout,
    core: CsrMatrix,
    backend: Backend,
    last_residual: f64,
}

impl<'a> Stepper<'a> {
    pub fn new(
        ops: &'a FemOperators,
        params: &Params,
        dw_bulk: &DoubleWell,
        dw_bnd: &DoubleWell,
        solver: SolverOptions,
    ) -> Result<Self> {
        params.validate()?;
        let core = assemble_core_matrix(ops, params);
        let backend = match solver {
            SolverOptions::Direct => Backend::Direct(SparseLu::factor(&core)?),
            SolverOptions::Gmres {
                restart,
                max_iter,
                rel_tol,
            } => Backend::Gmres {
                restart,
                max_iter,
                rel_tol,
            },
        };
        Ok(Self {
            ops,
            params: *params,
            dw_bulk: *dw_bulk,
            dw_bnd: *dw_bnd,
            layout: Layout::of(ops),
            core,
            backend,
            last_residual: 0.0,
        })
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    /// Residual `‖A x − b‖_∞` of the most recent solve.
    pub fn last_residual(&self) -> f64 {
        self.last_residual
    }

    pub fn step(&mut self, prev: &State) -> Result<State> {
        let border = assemble_border(self.ops, &self.params, &self.dw_bulk, &self.dw_bnd, prev)?;
        let sol = match &self.backend {
            Backend::Direct(lu) => {
                let mut x0 = Vec::with_capacity(self.layout.core());
                x0.extend_from_slice(&prev.phi);
                x0.extend_from_slice(&prev.mu);
                x0.extend_from_slice(&prev.theta);
                let (x, y, res) = solve_bordered(&self.core, lu, &border, x0, [prev.r, prev.s])?;
                self.last_residual = res;
                let lay = self.layout;
                StepSolution {
                    phi: x[lay.phi()..lay.mu()].to_vec(),
                    mu: x[lay.mu()..lay.theta()].to_vec(),
                    theta: x[lay.theta()..lay.r()].to_vec(),
                    r: y[0],
                    s: y[1],
                }
            }
            Backend::Gmres {
                restart,
                max_iter,
                rel_tol,
            } => {
                let system = combine(&self.core, border, self.layout);
                let ilu = Ilu0::new(&system.matrix)?;
                let mut x = Vec::with_capacity(self.layout.size());
                x.extend_from_slice(&prev.phi);
                x.extend_from_slice(&prev.mu);
                x.extend_from_slice(&prev.theta);
                x.push(prev.r);
                x.push(prev.s);
                gmres(&system.matrix, &ilu, &system.rhs, &mut x, *restart, *max_iter, *rel_tol)?;
                let res = residual_inf(&system.matrix, &x, &system.rhs);
                accept_residual(res, norm_inf(&system.rhs))?;
                self.last_residual = res;
                StepSolution::from_vector(self.layout, &x)
            }
        };
        let next = State {
            phi: sol.phi,
            mu: sol.mu,
            theta: sol.theta,
            r: sol.r,
            s: sol.s,
            t: 0.0,
            n: prev.n + 1,
        };
        if !next.is_finite() {
            return Err(Error::NonFinite { step: next.n });
        }
        Ok(next)
    }
}

/// Solve `[[A₀, U], [Vᵀ, I]] [x; y] = [f; g]` with `A₀` factored, as a
/// correction to `(x₀, y₀)`. Starting from the previous state keeps the
/// roundoff proportional to the increment, which matters for μ and θ: they
/// enter the τ-scaled rows with tiny coefficients.
fn solve_bordered(
    core: &CsrMatrix,
    lu: &SparseLu,
    border: &Border,
    x0: Vec<f64>,
    y0: [f64; 2],
) -> Result<(Vec<f64>, [f64; 2], f64)> {
    let rhs_norm = norm_inf(&border.rhs_core)
        .max(border.rhs_aux[0].abs())
        .max(border.rhs_aux[1].abs());
    let tol = RESIDUAL_TOL * (1.0 + rhs_norm);
    let mut cols = vec![border.col[0].clone(), border.col[1].clone()];
    lu.solve_columns(&mut cols)?;
    let z = cols;
    // Schur complement S = I − Vᵀ A₀⁻¹ U
    let s = [
        [1.0 - dot(&border.row[0], &z[0]), -dot(&border.row[0], &z[1])],
        [-dot(&border.row[1], &z[0]), 1.0 - dot(&border.row[1], &z[1])],
    ];
    let det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
    if !(det.abs() > 0.0) || !det.is_finite() {
        return Err(Error::Solver(format!(
            "singular auxiliary Schur complement (det = {det:e})"
        )));
    }
    let correction = |res: &(Vec<f64>, [f64; 2])| -> Result<(Vec<f64>, [f64; 2])> {
        let mut dx = lu.solve(&res.0)?;
        let g = [
            res.1[0] - dot(&border.row[0], &dx),
            res.1[1] - dot(&border.row[1], &dx),
        ];
        let dy = [
            (s[1][1] * g[0] - s[0][1] * g[1]) / det,
            (s[0][0] * g[1] - s[1][0] * g[0]) / det,
        ];
        for (k, zk) in z.iter().enumerate() {
            for (xi, zi) in dx.iter_mut().zip(zk) {
                *xi -= dy[k] * zi;
            }
        }
        Ok((dx, dy))
    };
    let res_norm = |r: &(Vec<f64>, [f64; 2])| norm_inf(&r.0).max(r.1[0].abs()).max(r.1[1].abs());

    let (mut x, mut y) = (x0, y0);
    let mut res = bordered_residual(core, border, &x, &y);
    // one solve plus at most two refinement passes
    for pass in 0..3 {
        if pass > 0 && res_norm(&res) <= tol {
            break;
        }
        let (dx, dy) = correction(&res)?;
        for (xi, di) in x.iter_mut().zip(&dx) {
            *xi += di;
        }
        y[0] += dy[0];
        y[1] += dy[1];
        res = bordered_residual(core, border, &x, &y);
    }
    let r = res_norm(&res);
    accept_residual(r, rhs_norm)?;
    Ok((x, y, r))
}

/// Residual `rhs − M [x; y]` split into core and auxiliary parts.
fn bordered_residual(
    core: &CsrMatrix,
    border: &Border,
    x: &[f64],
    y: &[f64; 2],
) -> (Vec<f64>, [f64; 2]) {
    let ax = core.mul_vec(x);
    let mut r = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        r.push(border.rhs_core[i] - ax[i] - border.col[0][i] * y[0] - border.col[1][i] * y[1]);
    }
    let aux = [
        border.rhs_aux[0] - dot(&border.row[0], x) - y[0],
        border.rhs_aux[1] - dot(&border.row[1], x) - y[1],
    ];
    (r, aux)
}

/// Information handed to observers after the initial state and every step.
pub struct StepEvent<'a> {
    pub ops: &'a FemOperators,
    /// Parameters in effect for the step that produced `state` (the last
    /// step may use a shortened `tau`).
    pub params: &'a Params,
    pub dw_bulk: &'a DoubleWell,
    pub dw_bnd: &'a DoubleWell,
    pub prev: Option<&'a State>,
    pub state: &'a State,
    pub is_final: bool,
}

pub trait StepObserver {
    fn observe(&mut self, event: &StepEvent<'_>) -> Result<()>;
}

impl<F> StepObserver for F
where
    F: FnMut(&StepEvent<'_>) -> Result<()>,
{
    fn observe(&mut self, event: &StepEvent<'_>) -> Result<()> {
        self(event)
    }
}

/// Number of full steps and the length of a trailing partial step, if any.
pub fn step_plan(t_end: f64, tau: f64) -> (usize, Option<f64>) {
    let ratio = t_end / tau;
    let rounded = ratio.round();
    if (rounded * tau - t_end).abs() <= 1e-12 * t_end {
        (rounded as usize, None)
    } else {
        let full = ratio.floor() as usize;
        let rest = t_end - full as f64 * tau;
        (full, Some(rest))
    }
}

/// Integrate from `phi0` to `params.t_end`, notifying observers at `t = 0`
/// and after every step.
pub fn run(
    ops: &FemOperators,
    params: &Params,
    dw_bulk: &DoubleWell,
    dw_bnd: &DoubleWell,
    phi0: Vec<f64>,
    solver: SolverOptions,
    observers: &mut [&mut dyn StepObserver],
) -> Result<State> {
    params.validate()?;
    let (full_steps, partial) = step_plan(params.t_end, params.tau);
    if let Some(rest) = partial {
        warn!(
            "t_end = {} is not a multiple of tau = {}; last step shortened to {rest:e}",
            params.t_end, params.tau
        );
    }
    let mut state = init_state(ops, dw_bulk, dw_bnd, phi0)?;
    let total = full_steps + usize::from(partial.is_some());
    for obs in observers.iter_mut() {
        obs.observe(&StepEvent {
            ops,
            params,
            dw_bulk,
            dw_bnd,
            prev: None,
            state: &state,
            is_final: total == 0,
        })?;
    }

    let mut stepper = Stepper::new(ops, params, dw_bulk, dw_bnd, solver)?;
    for k in 0..full_steps {
        let mut next = stepper.step(&state)?;
        next.t = next.n as f64 * params.tau;
        let is_final = k + 1 == total;
        if is_final {
            next.t = params.t_end;
        }
        for obs in observers.iter_mut() {
            obs.observe(&StepEvent {
                ops,
                params,
                dw_bulk,
                dw_bnd,
                prev: Some(&state),
                state: &next,
                is_final,
            })?;
        }
        state = next;
    }
    if let Some(rest) = partial {
        let short = Params { tau: rest, ..*params };
        let mut last = Stepper::new(ops, &short, dw_bulk, dw_bnd, solver)?;
        let mut next = last.step(&state)?;
        next.t = params.t_end;
        for obs in observers.iter_mut() {
            obs.observe(&StepEvent {
                ops,
                params: &short,
                dw_bulk,
                dw_bnd,
                prev: Some(&state),
                state: &next,
                is_final: true,
            })?;
        }
        state = next;
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights() {
        let mut p = Params::unit(0.0, 1e-3, 1.0);
        assert_eq!(p.adsorption_weights(), (1.0, 0.0));
        p.xi = 1.0;
        assert_eq!(p.adsorption_weights(), (0.5, 0.5));
        p.xi = f64::INFINITY;
        assert_eq!(p.adsorption_weights(), (0.0, 1.0));
    }

    #[test]
    fn params_validation() {
        let mut p = Params::unit(0.0, 1e-3, 1.0);
        assert!(p.validate().is_ok());
        p.xi = f64::INFINITY;
        assert!(p.validate().is_ok());
        p.xi = -1.0;
        assert!(p.validate().is_err());
        p.xi = f64::NAN;
        assert!(p.validate().is_err());
        let q = Params { tau: 0.0, ..Params::unit(0.0, 1.0, 1.0) };
        assert!(q.validate().is_err());
    }

    #[test]
    fn plan() {
        assert_eq!(step_plan(0.01, 1e-4), (100, None));
        assert_eq!(step_plan(1.0, 2e-5), (50000, None));
        let (n, rest) = step_plan(1.0, 0.3);
        assert_eq!(n, 3);
        assert!((rest.unwrap() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn layout_offsets() {
        let l = Layout { n_bulk: 9, n_bnd: 8 };
        assert_eq!((l.mu(), l.theta(), l.r(), l.s(), l.size()), (9, 18, 26, 27, 28));
    }
}
