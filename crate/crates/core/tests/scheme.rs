use chdbc::diagnostics::{energy_identity_residual, masses, modified_energy};
use chdbc::fem::assemble_operators;
use chdbc::mesh::build_unit_square_mesh;
use chdbc::potential::{discrete_energy_bnd, discrete_energy_bulk, nodal_force_bnd, nodal_force_bulk};
use chdbc::scenario::{scenario_adsorption, scenario_separation, InitialCondition};
use chdbc::stepper::{assemble_step_system, init_state, residual_inf, run, solve_step, Params, State, StepEvent, Stepper};
use chdbc::{DoubleWell, FemOperators, SolverOptions};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ops(level: u32) -> FemOperators {
    let (m, b) = build_unit_square_mesh(level).unwrap();
    assemble_operators(&m, &b).unwrap()
}

fn random_state(ops: &FemOperators, f: &DoubleWell, g: &DoubleWell, seed: u64) -> State {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phi = (0..ops.n_bulk()).map(|_| rng.gen_range(-1.2..1.2)).collect();
    let mut st = init_state(ops, f, g, phi).unwrap();
    // r, s off their energies, as after a few steps
    st.r *= 1.0 + 0.1 * rng.gen_range(-1.0..1.0);
    st.s *= 1.0 + 0.1 * rng.gen_range(-1.0..1.0);
    st
}

fn dense(rows: usize, m: &chdbc::CsrMatrix) -> Vec<Vec<f64>> {
    let mut d = m.to_dense();
    d.resize(rows, vec![0.0; m.cols()]);
    d
}

/// The unit-coefficient scheme written out row by row over the nodal bases,
/// with rows of the first equation multiplied by `τ`.
fn literal_system(ops: &FemOperators, xi: f64, tau: f64, f: &DoubleWell, g: &DoubleWell, prev: &State) -> (Vec<Vec<f64>>, Vec<f64>) {
    let (n, nb) = (ops.n_bulk(), ops.n_bnd());
    let size = 2 * n + nb + 2;
    let (iphi, imu, ith, ir, is) = (0, n, 2 * n, 2 * n + nb, 2 * n + nb + 1);
    let k = dense(n, &ops.k_bulk);
    let kg = dense(nb, &ops.k_bnd);
    // T[j][i] = 1 iff boundary vertex j is bulk vertex i
    let tmat: Vec<Vec<f64>> = (0..nb)
        .map(|j| (0..n).map(|i| if ops.trace[j] == i { 1.0 } else { 0.0 }).collect())
        .collect();
    let (a, b) = if xi.is_infinite() { (0.0, 1.0) } else { (1.0 / (1.0 + xi), xi / (1.0 + xi)) };
    let e_om = discrete_energy_bulk(ops, f, &prev.phi);
    let e_ga = discrete_energy_bnd(ops, g, &prev.phi);
    let fp = nodal_force_bulk(ops, f, &prev.phi);
    let gp = nodal_force_bnd(ops, g, &prev.phi);
    let mut mat = vec![vec![0.0; size]; size];
    let mut rhs = vec![0.0; size];

    for i in 0..n {
        // ∫I_h{∂φ ψ_i} + ∫∇μ·∇ψ_i + ∫_Γ I_h^Γ{∂φ ψ_i} + ∫_Γ∇θ·∇ψ_i
        mat[i][iphi + i] += ops.ml_bulk[i];
        rhs[i] += ops.ml_bulk[i] * prev.phi[i];
        for j in 0..n {
            mat[i][imu + j] += tau * k[i][j];
        }
        for jb in 0..nb {
            if tmat[jb][i] == 1.0 {
                mat[i][iphi + i] += ops.ml_bnd[jb];
                rhs[i] += ops.ml_bnd[jb] * prev.phi[i];
                for lb in 0..nb {
                    mat[i][ith + lb] += tau * kg[jb][lb];
                }
            }
        }
    }
    for j in 0..nb {
        let row = ith + j;
        let i = ops.trace[j];
        if a != 0.0 {
            mat[row][iphi + i] += a * ops.ml_bnd[j] / tau;
            rhs[row] += a * ops.ml_bnd[j] * prev.phi[i] / tau;
            for l in 0..nb {
                mat[row][ith + l] += a * kg[j][l];
            }
        }
        if b != 0.0 {
            mat[row][ith + j] += b * ops.ml_bnd[j];
            mat[row][imu + i] -= b * ops.ml_bnd[j];
        }
    }
    for i in 0..n {
        let row = imu + i;
        mat[row][imu + i] += ops.ml_bulk[i];
        for j in 0..n {
            mat[row][iphi + j] -= k[i][j];
        }
        mat[row][ir] -= fp[i] / e_om.sqrt();
        for jb in 0..nb {
            if tmat[jb][i] == 1.0 {
                mat[row][ith + jb] += ops.ml_bnd[jb];
                for lb in 0..nb {
                    mat[row][iphi + ops.trace[lb]] -= kg[jb][lb];
                }
                mat[row][is] -= gp[jb] / e_ga.sqrt();
            }
        }
    }
    mat[ir][ir] = 1.0;
    rhs[ir] = prev.r;
    for i in 0..n {
        mat[ir][iphi + i] -= fp[i] / (2.0 * e_om.sqrt());
        rhs[ir] -= fp[i] * prev.phi[i] / (2.0 * e_om.sqrt());
    }
    mat[is][is] = 1.0;
    rhs[is] = prev.s;
    for j in 0..nb {
        mat[is][iphi + ops.trace[j]] -= gp[j] / (2.0 * e_ga.sqrt());
        rhs[is] -= gp[j] * prev.phi[ops.trace[j]] / (2.0 * e_ga.sqrt());
    }
    (mat, rhs)
}

#[test]
fn unit_coefficients_match_literal_transcription() {
    let ops = ops(2);
    let (f, g) = (DoubleWell::new(0.01).unwrap(), DoubleWell::new(0.0025).unwrap());
    let prev = random_state(&ops, &f, &g, 7);
    for xi in [0.0, 0.3, 1.0, 25.0, f64::INFINITY] {
        let tau = 1e-3;
        let p = Params::unit(xi, tau, 1.0);
        let sys = assemble_step_system(&ops, &p, &f, &g, &prev).unwrap();
        let (mat, rhs) = literal_system(&ops, xi, tau, &f, &g, &prev);
        let got = sys.matrix.to_dense();
        for (i, (row_a, row_b)) in got.iter().zip(&mat).enumerate() {
            for (j, (x, y)) in row_a.iter().zip(row_b).enumerate() {
                assert!((x - y).abs() <= 1e-14, "xi={xi} entry ({i},{j}): {x} vs {y}");
            }
        }
        for (x, y) in sys.rhs.iter().zip(&rhs) {
            assert!((x - y).abs() <= 1e-14 * (1.0 + y.abs()), "xi={xi} rhs {x} vs {y}");
        }
    }
}

#[test]
fn boundary_rows_reduce_in_the_limits() {
    let ops = ops(2);
    let sc = scenario_separation();
    let (f, g) = sc.potentials().unwrap();
    let prev = random_state(&ops, &f, &g, 3);
    let n = ops.n_bulk();
    for (xi, mu_coupled, phi_coupled) in [(0.0, false, true), (f64::INFINITY, true, false)] {
        let p = Params { xi, ..sc.params };
        let sys = assemble_step_system(&ops, &p, &f, &g, &prev).unwrap();
        for j in 0..ops.n_bnd() {
            let row: Vec<(usize, f64)> = sys.matrix.row(2 * n + j).filter(|&(_, v)| v != 0.0).collect();
            assert_eq!(row.iter().any(|&(c, _)| (n..2 * n).contains(&c)), mu_coupled, "xi={xi}");
            assert_eq!(row.iter().any(|&(c, _)| c < n), phi_coupled, "xi={xi}");
        }
    }
}

#[test]
fn random_state_step_satisfies_identity() {
    let ops = ops(3);
    let sc = scenario_separation();
    let (f, g) = sc.potentials().unwrap();
    let p = Params { xi: 1.0, tau: 1e-3, ..sc.params };
    for seed in 0..4 {
        let prev = random_state(&ops, &f, &g, seed);
        let sys = assemble_step_system(&ops, &p, &f, &g, &prev).unwrap();
        let sol = solve_step(&sys).unwrap();
        let mut x = sol.phi.clone();
        x.extend(&sol.mu);
        x.extend(&sol.theta);
        x.extend([sol.r, sol.s]);
        let rhs_norm = sys.rhs.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(residual_inf(&sys.matrix, &x, &sys.rhs) <= 1e-11 * (1.0 + rhs_norm));
        let next = State { phi: sol.phi, mu: sol.mu, theta: sol.theta, r: sol.r, s: sol.s, t: p.tau, n: 1 };
        let e = modified_energy(&ops, &p, &prev);
        let res = energy_identity_residual(&ops, &p, &prev, &next);
        assert!(res.abs() <= 1e-9 * (1.0 + e), "seed {seed}: {res:e}");
    }
}

#[test]
fn identity_detects_a_wrong_adsorption_rate() {
    let ops = ops(3);
    let sc = scenario_separation();
    let (f, g) = sc.potentials().unwrap();
    let p = Params { xi: 1.0, tau: 1e-3, ..sc.params };
    let prev = random_state(&ops, &f, &g, 11);
    let next = Stepper::new(&ops, &p, &f, &g, SolverOptions::Direct).unwrap().step(&prev).unwrap();
    let e = modified_energy(&ops, &p, &prev);
    let wrong = Params { xi: 1.1, ..p };
    let res = energy_identity_residual(&ops, &wrong, &prev, &next);
    assert!(res.abs() > 1e3 * 1e-9 * (1.0 + e), "{res:e}");
}

#[test]
fn initial_radii() {
    let ops = ops(3);
    let (f, g) = scenario_separation().potentials().unwrap();
    let zero = init_state(&ops, &f, &g, vec![0.0; ops.n_bulk()]).unwrap();
    assert!((zero.r - 0.26f64.sqrt()).abs() < 1e-14);
    assert!((zero.s - 1.01f64.sqrt()).abs() < 1e-14);
    let one = init_state(&ops, &f, &g, vec![1.0; ops.n_bulk()]).unwrap();
    assert!((one.r - 0.1).abs() < 1e-14 && (one.s - 0.1).abs() < 1e-14);
}

#[test]
fn zero_state_stays_put_through_run() {
    let ops = ops(3);
    let sc = scenario_separation();
    let (f, g) = sc.potentials().unwrap();
    let p = Params { xi: 2.0, tau: 1e-3, t_end: 1e-2, ..sc.params };
    let s0 = init_state(&ops, &f, &g, vec![0.0; ops.n_bulk()]).unwrap();
    let end = run(&ops, &p, &f, &g, s0.phi.clone(), SolverOptions::Direct, &mut []).unwrap();
    assert_eq!(end.n, 10);
    assert!(end.phi.iter().all(|&v| v == 0.0));
    assert_eq!((end.r, end.s), (s0.r, s0.s));
}

#[test]
fn modified_energy_decreases_on_level_six() {
    let (m, b) = build_unit_square_mesh(6).unwrap();
    let ops = assemble_operators(&m, &b).unwrap();
    let sc = scenario_separation();
    let (f, g) = sc.potentials().unwrap();
    let p = Params { tau: 2e-5, t_end: 0.01, ..sc.params };
    let phi0 = sc.initial.nodal_values(&m).unwrap();
    let mut energies = Vec::new();
    let mut obs = |ev: &StepEvent<'_>| {
        energies.push(modified_energy(ev.ops, ev.params, ev.state));
        Ok(())
    };
    run(&ops, &p, &f, &g, phi0, SolverOptions::Direct, &mut [&mut obs]).unwrap();
    assert_eq!(energies.len(), 501);
    assert!(energies.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn adsorption_exchanges_mass_only_for_positive_rate() {
    let (m, b) = build_unit_square_mesh(4).unwrap();
    let ops = assemble_operators(&m, &b).unwrap();
    let sc = scenario_adsorption();
    let (f, g) = sc.potentials().unwrap();
    let phi0 = sc.initial.nodal_values(&m).unwrap();
    let mut change = Vec::new();
    for xi in [0.0, 1.0] {
        let p = Params { xi, tau: 5e-5, t_end: 5e-3, ..sc.params };
        let s0 = init_state(&ops, &f, &g, phi0.clone()).unwrap();
        let end = run(&ops, &p, &f, &g, phi0.clone(), SolverOptions::Direct, &mut []).unwrap();
        change.push((masses(&ops, &p, &end).1 - masses(&ops, &p, &s0).1).abs());
    }
    assert!(change[0] <= 1e-13, "{change:?}");
    assert!(change[1] > 1e-6, "{change:?}");
}

#[test]
fn runs_are_bitwise_reproducible() {
    let (m, b) = build_unit_square_mesh(4).unwrap();
    let ops = assemble_operators(&m, &b).unwrap();
    let sc = scenario_separation();
    let (f, g) = sc.potentials().unwrap();
    let p = Params { xi: 0.5, tau: 1e-4, t_end: 2e-3, ..sc.params };
    let phi0 = InitialCondition::Separation.nodal_values(&m).unwrap();
    let a = run(&ops, &p, &f, &g, phi0.clone(), SolverOptions::Direct, &mut []).unwrap();
    let b = run(&ops, &p, &f, &g, phi0, SolverOptions::Direct, &mut []).unwrap();
    assert_eq!(a, b);
}

#[test]
fn truncated_last_step_ends_at_t_end() {
    let ops = ops(3);
    let sc = scenario_separation();
    let (f, g) = sc.potentials().unwrap();
    let p = Params { tau: 3e-4, t_end: 1e-3, ..sc.params };
    let phi0 = vec![0.05; ops.n_bulk()];
    let mut times = Vec::new();
    let mut obs = |ev: &StepEvent<'_>| {
        times.push(ev.state.t);
        Ok(())
    };
    run(&ops, &p, &f, &g, phi0, SolverOptions::Direct, &mut [&mut obs]).unwrap();
    assert_eq!(times.len(), 5);
    assert_eq!(*times.last().unwrap(), 1e-3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn one_step_invariants(seed in any::<u64>(), xi in prop_oneof![Just(0.0), 0.0..50.0, Just(f64::INFINITY)], tau_exp in -5.0..-1.0f64) {
        let ops = ops(2);
        let sc = scenario_separation();
        let (f, g) = sc.potentials().unwrap();
        let p = Params { xi, tau: 10f64.powf(tau_exp), ..sc.params };
        let prev = random_state(&ops, &f, &g, seed);
        let next = Stepper::new(&ops, &p, &f, &g, SolverOptions::Direct).unwrap().step(&prev).unwrap();
        let e_prev = modified_energy(&ops, &p, &prev);
        let res = energy_identity_residual(&ops, &p, &prev, &next);
        prop_assert!(res.abs() <= 1e-9 * (1.0 + e_prev));
        prop_assert!(modified_energy(&ops, &p, &next) <= e_prev);
        let (m0, m1) = (masses(&ops, &p, &prev), masses(&ops, &p, &next));
        prop_assert!((m1.2 - m0.2).abs() <= 1e-12 * (1.0 + m0.2.abs()));
        if xi == 0.0 {
            prop_assert!((m1.0 - m0.0).abs() <= 1e-12 * (1.0 + m0.0.abs()));
            prop_assert!((m1.1 - m0.1).abs() <= 1e-12 * (1.0 + m0.1.abs()));
        }
    }
}
