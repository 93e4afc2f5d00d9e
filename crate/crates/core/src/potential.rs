//! Shifted quartic double-well potentials and their lumped discrete energies.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::FemOperators;

/// `W(x) = ¼(1 − x²)² + shift` with `shift > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoubleWell {
    pub shift: f64,
}

impl DoubleWell {
    pub fn new(shift: f64) -> Result<Self> {
        if !(shift > 0.0 && shift.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "double-well shift must be positive, got {shift}"
            )));
        }
        Ok(Self { shift })
    }

    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        let w = 1.0 - x * x;
        0.25 * w * w + self.shift
    }

    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        x * x * x - x
    }

    /// Runtime lower bound on the discrete energy over a set of the given
    /// measure. The true infimum is `shift·measure`, so tripping this floor
    /// means something upstream is broken.
    pub fn energy_floor(&self, measure: f64) -> f64 {
        0.5 * self.shift * measure
    }
}

fn lumped_energy(ml: &[f64], dw: &DoubleWell, values: impl Iterator<Item = f64>) -> f64 {
    ml.iter().zip(values).map(|(m, x)| m * dw.value(x)).sum()
}

/// `E_h^Ω(φ) = ∫_Ω I_h{F(φ)}`
pub fn discrete_energy_bulk(ops: &FemOperators, dw: &DoubleWell, phi: &[f64]) -> f64 {
    debug_assert_eq!(phi.len(), ops.n_bulk());
    lumped_energy(&ops.ml_bulk, dw, phi.iter().copied())
}

/// `E_h^Γ(φ|_Γ) = ∫_Γ I_h^Γ{G(φ)}`, evaluated on the trace of a bulk vector.
pub fn discrete_energy_bnd(ops: &FemOperators, dw: &DoubleWell, phi: &[f64]) -> f64 {
    debug_assert_eq!(phi.len(), ops.n_bulk());
    lumped_energy(&ops.ml_bnd, dw, ops.trace.iter().map(|&i| phi[i]))
}

/// `(b_Ω)_i = (ML_Ω)_i F'(φ_i)`, so that `b_Ω·ψ = ∫_Ω I_h{F'(φ)ψ}`.
pub fn nodal_force_bulk(ops: &FemOperators, dw: &DoubleWell, phi: &[f64]) -> Vec<f64> {
    ops.ml_bulk
        .iter()
        .zip(phi)
        .map(|(m, &x)| m * dw.derivative(x))
        .collect()
}

/// Boundary analogue of [`nodal_force_bulk`], of length `N_Γ`, evaluated on
/// the trace of a bulk vector.
pub fn nodal_force_bnd(ops: &FemOperators, dw: &DoubleWell, phi: &[f64]) -> Vec<f64> {
    ops.ml_bnd
        .iter()
        .zip(&ops.trace)
        .map(|(m, &i)| m * dw.derivative(phi[i]))
        .collect()
}

/// Square root of a discrete energy, checked against the floor.
pub fn sav_radius(energy: f64, floor: f64) -> Result<f64> {
    if !(energy >= floor) || !(energy > 0.0) {
        return Err(Error::EnergyFloor { energy, floor });
    }
    Ok(energy.sqrt())
}
