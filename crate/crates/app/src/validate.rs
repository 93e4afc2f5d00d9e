//! Invariant suite run by `chdbc validate`.

use anyhow::Result;
use chdbc::diagnostics::{energy_identity_residual, jump_max, masses, modified_energy};
use chdbc::stepper::{init_state, Params, Stepper};
use chdbc::{DoubleWell, FemOperators, SolverOptions};

pub const IDENTITY_TOL: f64 = 1e-9;
pub const MASS_TOL: f64 = 1e-11;
pub const JUMP_TOL: f64 = 1e-10;
pub const FIXED_POINT_TOL: f64 = 1e-11;
pub const FIXED_POINT_SAV_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: String, passed: bool, detail: String) -> Self {
        Self { name, passed, detail }
    }
}

/// Worst values seen along one trajectory.
#[derive(Debug, Clone, Default)]
pub struct TrajectoryStats {
    pub steps: usize,
    /// `max |residual| / (1 + Ẽⁿ⁻¹)`
    pub identity: f64,
    /// `max (Ẽⁿ − Ẽⁿ⁻¹)`; positive means an increase.
    pub energy_increase: f64,
    /// Drifts relative to `1 + |m⁰|`: combined, bulk, boundary.
    pub mass_drift: [f64; 3],
    pub jump_max: f64,
    pub mass_first: [f64; 3],
    pub mass_last: [f64; 3],
}

pub fn trajectory_stats(
    ops: &FemOperators,
    params: &Params,
    dw_bulk: &DoubleWell,
    dw_bnd: &DoubleWell,
    phi0: Vec<f64>,
    steps: usize,
    solver: SolverOptions,
) -> Result<TrajectoryStats> {
    let mut state = init_state(ops, dw_bulk, dw_bnd, phi0)?;
    let mut stepper = Stepper::new(ops, params, dw_bulk, dw_bnd, solver)?;
    let m0 = masses(ops, params, &state);
    let m0 = [m0.2, m0.0, m0.1];
    let mut st = TrajectoryStats {
        steps,
        energy_increase: f64::NEG_INFINITY,
        mass_first: m0,
        mass_last: m0,
        ..Default::default()
    };
    let mut e_prev = modified_energy(ops, params, &state);
    for _ in 0..steps {
        let next = stepper.step(&state)?;
        let res = energy_identity_residual(ops, params, &state, &next);
        st.identity = st.identity.max(res.abs() / (1.0 + e_prev));
        let e = modified_energy(ops, params, &next);
        st.energy_increase = st.energy_increase.max(e - e_prev);
        e_prev = e;
        let m = masses(ops, params, &next);
        let m = [m.2, m.0, m.1];
        for k in 0..3 {
            st.mass_drift[k] = st.mass_drift[k].max((m[k] - m0[k]).abs() / (1.0 + m0[k].abs()));
        }
        st.mass_last = m;
        st.jump_max = st.jump_max.max(jump_max(ops, &next, params.beta));
        state = next;
    }
    Ok(st)
}

/// Energy identity, monotone modified energy, mass conservation and the
/// `ξ = ∞` constraint for each `ξ`, then the two uniform fixed points.
pub fn run_suite(
    ops: &FemOperators,
    base: &Params,
    dw_bulk: &DoubleWell,
    dw_bnd: &DoubleWell,
    phi0: &[f64],
    xis: &[f64],
    steps: usize,
    solver: SolverOptions,
) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for &xi in xis {
        let p = Params { xi, ..*base };
        let st = trajectory_stats(ops, &p, dw_bulk, dw_bnd, phi0.to_vec(), steps, solver)?;
        checks.push(Check::new(
            format!("xi={xi}: energy identity"),
            st.identity <= IDENTITY_TOL,
            format!("max |residual|/(1+E) = {:.3e}", st.identity),
        ));
        checks.push(Check::new(
            format!("xi={xi}: modified energy non-increasing"),
            st.energy_increase <= 0.0,
            format!("max increase = {:.3e}", st.energy_increase),
        ));
        checks.push(Check::new(
            format!("xi={xi}: combined mass"),
            st.mass_drift[0] <= MASS_TOL,
            format!("relative drift = {:.3e}", st.mass_drift[0]),
        ));
        if xi == 0.0 {
            checks.push(Check::new(
                format!("xi={xi}: bulk and boundary mass"),
                st.mass_drift[1] <= MASS_TOL && st.mass_drift[2] <= MASS_TOL,
                format!("relative drifts = {:.3e} / {:.3e}", st.mass_drift[1], st.mass_drift[2]),
            ));
        }
        if xi.is_infinite() {
            checks.push(Check::new(
                format!("xi={xi}: beta*theta = trace mu"),
                st.jump_max <= JUMP_TOL,
                format!("max nodal jump = {:.3e}", st.jump_max),
            ));
        }
    }
    for value in [0.0, 1.0] {
        let (passed, detail) = fixed_point(ops, base, dw_bulk, dw_bnd, value, 50, solver)?;
        checks.push(Check::new(format!("phi = {value} stationary"), passed, detail));
    }
    Ok(checks)
}

/// Advance a uniform state and report the largest deviations.
pub fn fixed_point(
    ops: &FemOperators,
    params: &Params,
    dw_bulk: &DoubleWell,
    dw_bnd: &DoubleWell,
    value: f64,
    steps: usize,
    solver: SolverOptions,
) -> Result<(bool, String)> {
    let s0 = init_state(ops, dw_bulk, dw_bnd, vec![value; ops.n_bulk()])?;
    let mut stepper = Stepper::new(ops, params, dw_bulk, dw_bnd, solver)?;
    let (mut dphi, mut chem, mut dsav) = (0.0f64, 0.0f64, 0.0f64);
    let mut state = s0.clone();
    for _ in 0..steps {
        state = stepper.step(&state)?;
        for (a, b) in state.phi.iter().zip(&s0.phi) {
            dphi = dphi.max((a - b).abs());
        }
        for v in state.mu.iter().chain(&state.theta) {
            chem = chem.max(v.abs());
        }
        dsav = dsav.max((state.r - s0.r).abs()).max((state.s - s0.s).abs());
    }
    let passed = dphi <= FIXED_POINT_TOL && chem <= FIXED_POINT_TOL && dsav <= FIXED_POINT_SAV_TOL;
    Ok((
        passed,
        format!("{steps} steps: |phi-phi0| = {dphi:.3e}, |mu|,|theta| = {chem:.3e}, |r-r0|,|s-s0| = {dsav:.3e}"),
    ))
}
