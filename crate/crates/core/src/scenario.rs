//! Benchmark initial data and parameter sets on the unit square.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{BulkMesh, Point};
use crate::potential::DoubleWell;
use crate::stepper::Params;

/// Nodal initial phase fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialCondition {
    Constant {
        value: f64,
    },
    /// `mean + amplitude·U(−1, 1)` per node, reproducible from `seed`.
    Random {
        mean: f64,
        amplitude: f64,
        seed: u64,
    },
    /// `max{0.1 sin(πx), 0.1 sin(πy)}`
    Separation,
    /// Tanh-mollified ellipse: `+1` inside, `−1` outside.
    Droplet {
        center: Point,
        semi_axes: [f64; 2],
        width: f64,
    },
}

impl InitialCondition {
    pub fn droplet(epsilon: f64) -> Self {
        Self::Droplet {
            center: [0.1, 0.5],
            semi_axes: [0.6814 / 2.0, 0.367 / 2.0],
            width: epsilon,
        }
    }

    /// Value at a point, for the deterministic kinds.
    pub fn eval(&self, p: Point) -> Option<f64> {
        use std::f64::consts::{PI, SQRT_2};
        match *self {
            Self::Constant { value } => Some(value),
            Self::Random { .. } => None,
            Self::Separation => Some((0.1 * (PI * p[0]).sin()).max(0.1 * (PI * p[1]).sin())),
            Self::Droplet {
                center,
                semi_axes: [a, b],
                width,
            } => {
                let dx = (p[0] - center[0]) / a;
                let dy = (p[1] - center[1]) / b;
                let f = dx * dx + dy * dy - 1.0;
                let grad = 2.0 * ((dx / a).powi(2) + (dy / b).powi(2)).sqrt();
                // first-order signed distance, positive inside; at the center
                // the gradient vanishes and the point is deep inside anyway
                let d = if grad > 0.0 { -f / grad } else { f64::INFINITY };
                Some((d / (SQRT_2 * width)).tanh())
            }
        }
    }

    pub fn nodal_values(&self, mesh: &BulkMesh) -> Result<Vec<f64>> {
        let values: Vec<f64> = match *self {
            Self::Random {
                mean,
                amplitude,
                seed,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..mesh.num_vertices())
                    .map(|_| mean + amplitude * rng.gen_range(-1.0..=1.0))
                    .collect()
            }
            _ => mesh
                .vertices
                .iter()
                .map(|&p| self.eval(p).expect("deterministic initial condition"))
                .collect(),
        };
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "initial condition produced non-finite nodal values".into(),
            ));
        }
        Ok(values)
    }
}

/// Initial data, potential shifts and default parameters of a benchmark.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub initial: InitialCondition,
    pub shift_bulk: f64,
    pub shift_bnd: f64,
    pub params: Params,
}

impl Scenario {
    pub fn potentials(&self) -> Result<(DoubleWell, DoubleWell)> {
        Ok((DoubleWell::new(self.shift_bulk)?, DoubleWell::new(self.shift_bnd)?))
    }
}

/// Spinodal-type separation from a small smooth perturbation.
pub fn scenario_separation() -> Scenario {
    Scenario {
        initial: InitialCondition::Separation,
        shift_bulk: 0.01 / 1.0,
        shift_bnd: 0.01 / 4.0,
        params: Params {
            m: 0.01,
            m_gamma: 0.02,
            epsilon: 0.02,
            sigma: 2.0,
            delta: 0.02,
            beta: 1.0,
            xi: 0.0,
            tau: 2e-5,
            t_end: 1.0,
        },
    }
}

/// Elliptical droplet attached to the left edge.
pub fn scenario_adsorption() -> Scenario {
    let epsilon = 0.01;
    Scenario {
        initial: InitialCondition::droplet(epsilon),
        shift_bulk: 0.001 / 1.0,
        shift_bnd: 0.001 / 4.0,
        params: Params {
            m: 0.01,
            m_gamma: 0.02,
            epsilon,
            sigma: 2.0,
            delta: 0.01,
            beta: 4.0,
            xi: 1.0,
            tau: 5e-5,
            t_end: 2.5,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::assemble_operators;
    use crate::mesh::build_unit_square_mesh;

    #[test]
    fn separation_values() {
        let ic = InitialCondition::Separation;
        assert!((ic.eval([0.5, 0.5]).unwrap() - 0.1).abs() < 1e-16);
        assert!(ic.eval([0.0, 0.0]).unwrap().abs() < 1e-16);
        let (m, _) = build_unit_square_mesh(5).unwrap();
        for v in ic.nodal_values(&m).unwrap() {
            assert!((-1e-17..=0.1).contains(&v));
        }
    }

    #[test]
    fn droplet_inside_and_outside() {
        let ic = InitialCondition::droplet(0.01);
        assert!(ic.eval([0.1, 0.5]).unwrap() > 0.999_999);
        assert!(ic.eval([0.9, 0.5]).unwrap() < -0.999_999);
        let (m, b) = build_unit_square_mesh(6).unwrap();
        let ops = assemble_operators(&m, &b).unwrap();
        let phi = ic.nodal_values(&m).unwrap();
        assert!(ops.lumped_integral_bulk(&phi).unwrap() < 0.0);
    }

    #[test]
    fn random_is_reproducible() {
        let (m, _) = build_unit_square_mesh(3).unwrap();
        let ic = InitialCondition::Random {
            mean: 0.0,
            amplitude: 0.5,
            seed: 7,
        };
        let a = ic.nodal_values(&m).unwrap();
        assert_eq!(a, ic.nodal_values(&m).unwrap());
        assert!(a.iter().all(|v| v.abs() <= 0.5));
    }
}
