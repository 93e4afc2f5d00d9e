use chdbc::diagnostics::{energy_identity_residual, jump_max, masses, modified_energy};
use chdbc::fem::assemble_operators;
use chdbc::linsolve::SolverOptions;
use chdbc::mesh::build_unit_square_mesh;
use chdbc::scenario::{scenario_separation, InitialCondition};
use chdbc::stepper::{assemble_step_system, init_state, solve_step, Params, Stepper};
use chdbc::{DoubleWell, FemOperators};

fn setup(level: u32) -> (FemOperators, Vec<f64>) {
    let (m, b) = build_unit_square_mesh(level).unwrap();
    let ops = assemble_operators(&m, &b).unwrap();
    let phi = InitialCondition::Separation.nodal_values(&m).unwrap();
    (ops, phi)
}

#[test]
fn separation_steps_satisfy_energy_identity() {
    let (ops, phi0) = setup(4);
    let sc = scenario_separation();
    let (f, g) = sc.potentials().unwrap();
    for xi in [0.0, 0.5, 1.0, 10.0, f64::INFINITY] {
        let p = Params { xi, tau: 1e-4, t_end: 0.002, ..sc.params };
        let mut st = init_state(&ops, &f, &g, phi0.clone()).unwrap();
        let mass0 = masses(&ops, &p, &st);
        let mut stepper = Stepper::new(&ops, &p, &f, &g, SolverOptions::Direct).unwrap();
        for _ in 0..20 {
            let next = stepper.step(&st).unwrap();
            let e_prev = modified_energy(&ops, &p, &st);
            let res = energy_identity_residual(&ops, &p, &st, &next);
            assert!(res.abs() <= 1e-9 * (1.0 + e_prev), "xi={xi} res={res:e}");
            assert!(modified_energy(&ops, &p, &next) <= e_prev);
            if xi.is_infinite() {
                assert!(jump_max(&ops, &next, p.beta) <= 1e-10);
            }
            st = next;
        }
        let mass = masses(&ops, &p, &st);
        assert!((mass.2 - mass0.2).abs() <= 1e-11 * (1.0 + mass0.2.abs()), "xi={xi}");
        if xi == 0.0 {
            assert!((mass.0 - mass0.0).abs() <= 1e-11 * (1.0 + mass0.0.abs()));
            assert!((mass.1 - mass0.1).abs() <= 1e-11 * (1.0 + mass0.1.abs()));
        }
    }
}

#[test]
fn cached_and_fresh_solves_agree() {
    let (ops, phi0) = setup(3);
    let sc = scenario_separation();
    let (f, g) = sc.potentials().unwrap();
    let p = Params { xi: 1.0, tau: 1e-3, ..sc.params };
    let st = init_state(&ops, &f, &g, phi0).unwrap();
    let fresh = solve_step(&assemble_step_system(&ops, &p, &f, &g, &st).unwrap()).unwrap();
    let mut stepper = Stepper::new(&ops, &p, &f, &g, SolverOptions::Direct).unwrap();
    let cached = stepper.step(&st).unwrap();
    let mut gm = Stepper::new(&ops, &p, &f, &g, SolverOptions::gmres()).unwrap();
    let krylov = gm.step(&st).unwrap();
    for other in [&cached, &krylov] {
        for (a, b) in fresh.phi.iter().zip(&other.phi) {
            assert!((a - b).abs() < 1e-10);
        }
        for (a, b) in fresh.mu.iter().zip(&other.mu) {
            assert!((a - b).abs() < 1e-8);
        }
        assert!((fresh.r - other.r).abs() < 1e-12);
    }
    let _ = DoubleWell::new(1.0);
}
