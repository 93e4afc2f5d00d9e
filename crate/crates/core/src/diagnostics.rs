//! Energies, masses, the discrete dissipation identity and the boundary jump.

use std::fmt::Write as _;

use crate::fem::FemOperators;
use crate::potential::{discrete_energy_bnd, discrete_energy_bulk, DoubleWell};
use crate::stepper::{Params, State};

pub const CSV_HEADER: &str =
    "t,E_mod,E_orig,mass_bulk,mass_bnd,mass_combined,r,s,diss_residual,jump_norm";

/// Gradient part `½εσ φᵀKφ + ½δ (Tφ)ᵀK_Γ(Tφ)`.
fn gradient_energy(ops: &FemOperators, params: &Params, phi: &[f64]) -> f64 {
    let tphi = ops.restrict(phi);
    0.5 * params.epsilon * params.sigma * ops.k_bulk.quad_form(phi)
        + 0.5 * params.delta * ops.k_bnd.quad_form(&tphi)
}

/// `Ẽ = ½εσ φᵀKφ + ε⁻¹σ r² + ½δ (Tφ)ᵀK_Γ(Tφ) + δ⁻¹ s²`
pub fn modified_energy(ops: &FemOperators, params: &Params, state: &State) -> f64 {
    gradient_energy(ops, params, &state.phi)
        + params.sigma / params.epsilon * state.r * state.r
        + state.s * state.s / params.delta
}

/// Energy with the true lumped potential terms in place of `r²`, `s²`.
pub fn original_energy(
    ops: &FemOperators,
    params: &Params,
    dw_bulk: &DoubleWell,
    dw_bnd: &DoubleWell,
    state: &State,
) -> f64 {
    gradient_energy(ops, params, &state.phi)
        + params.sigma / params.epsilon * discrete_energy_bulk(ops, dw_bulk, &state.phi)
        + discrete_energy_bnd(ops, dw_bnd, &state.phi) / params.delta
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn jump_sq(ops: &FemOperators, state: &State, beta: f64) -> f64 {
    ops.trace
        .iter()
        .zip(&state.theta)
        .zip(&ops.ml_bnd)
        .map(|((&i, &th), &ml)| {
            let d = beta * th - state.mu[i];
            ml * d * d
        })
        .sum()
}

/// Signed defect of the discrete energy identity for the step `prev → next`.
///
/// `params.tau` must be the step length actually used. The exchange term is
/// omitted for `ξ = ∞`.
pub fn energy_identity_residual(
    ops: &FemOperators,
    params: &Params,
    prev: &State,
    next: &State,
) -> f64 {
    let dphi = sub(&next.phi, &prev.phi);
    let dr = next.r - prev.r;
    let ds = next.s - prev.s;
    let diff = modified_energy(ops, params, next) - modified_energy(ops, params, prev);
    let numerical_dissipation = gradient_energy(ops, params, &dphi)
        + params.sigma / params.epsilon * dr * dr
        + ds * ds / params.delta;
    let physical = params.tau
        * (params.m * ops.k_bulk.quad_form(&next.mu)
            + params.m_gamma * ops.k_bnd.quad_form(&next.theta));
    let exchange = if params.xi.is_infinite() {
        0.0
    } else {
        params.xi * params.tau * params.m * jump_sq(ops, next, params.beta)
    };
    diff + numerical_dissipation + physical + exchange
}

/// `(∫_Ω I_h φ, ∫_Γ I_h φ, ∫_Ω I_h φ + β⁻¹ ∫_Γ I_h φ)`
pub fn masses(ops: &FemOperators, params: &Params, state: &State) -> (f64, f64, f64) {
    let bulk: f64 = ops.ml_bulk.iter().zip(&state.phi).map(|(m, p)| m * p).sum();
    let bnd: f64 = ops
        .ml_bnd
        .iter()
        .zip(&ops.trace)
        .map(|(m, &i)| m * state.phi[i])
        .sum();
    (bulk, bnd, bulk + bnd / params.beta)
}

/// Lumped `‖βθ − Tμ‖_{L²(Γ)}`.
pub fn jump_norm(ops: &FemOperators, state: &State, beta: f64) -> f64 {
    jump_sq(ops, state, beta).sqrt()
}

/// Largest nodal `|βθ − Tμ|`.
pub fn jump_max(ops: &FemOperators, state: &State, beta: f64) -> f64 {
    ops.trace
        .iter()
        .zip(&state.theta)
        .fold(0.0, |m, (&i, &th)| m.max((beta * th - state.mu[i]).abs()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub e_mod: f64,
    pub e_orig: f64,
    pub mass_bulk: f64,
    pub mass_bnd: f64,
    pub mass_combined: f64,
    pub r: f64,
    pub s: f64,
    pub diss_residual: f64,
    pub jump_norm: f64,
}

impl DiagnosticsRow {
    /// Row for `state`; `prev` is `None` at `t = 0`, where μ and θ carry no
    /// information and the residual and jump are reported as zero.
    pub fn evaluate(
        ops: &FemOperators,
        params: &Params,
        dw_bulk: &DoubleWell,
        dw_bnd: &DoubleWell,
        prev: Option<&State>,
        state: &State,
    ) -> Self {
        let (mass_bulk, mass_bnd, mass_combined) = masses(ops, params, state);
        let (diss_residual, jump) = match prev {
            Some(p) => (
                energy_identity_residual(ops, params, p, state),
                jump_norm(ops, state, params.beta),
            ),
            None => (0.0, 0.0),
        };
        Self {
            t: state.t,
            e_mod: modified_energy(ops, params, state),
            e_orig: original_energy(ops, params, dw_bulk, dw_bnd, state),
            mass_bulk,
            mass_bnd,
            mass_combined,
            r: state.r,
            s: state.s,
            diss_residual,
            jump_norm: jump,
        }
    }

    pub fn values(&self) -> [f64; 10] {
        [
            self.t,
            self.e_mod,
            self.e_orig,
            self.mass_bulk,
            self.mass_bnd,
            self.mass_combined,
            self.r,
            self.s,
            self.diss_residual,
            self.jump_norm,
        ]
    }

    /// One CSV line without the trailing newline. Shortest round-trip formatting.
    pub fn to_csv_line(&self) -> String {
        let mut out = String::with_capacity(200);
        for (k, v) in self.values().iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            write!(out, "{v:e}").expect("writing to a String");
        }
        out
    }
}
