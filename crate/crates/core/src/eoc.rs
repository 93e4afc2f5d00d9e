//! Space-time errors between runs and experimental orders of convergence.
//!
//! All runs live on the nested unit-square hierarchy. Differences are taken
//! on the finer of the two meshes after exact P1 prolongation, measured in
//! the consistent-mass L² norm and integrated in time by the trapezoidal rule
//! on a uniform sampling grid. Between stored snapshots a trajectory is
//! linear in time.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{assemble_operators, FemOperators};
use crate::linsolve::SolverOptions;
use crate::mesh::{build_unit_square_mesh, prolongate_unit_square};
use crate::potential::DoubleWell;
use crate::scenario::InitialCondition;
use crate::stepper::{self, Params, StepEvent, StepObserver};

/// Default step of the trapezoidal rule in time.
pub const DEFAULT_SAMPLE_DT: f64 = 2e-4;

/// Nodal φ snapshots of one run on a unit-square level.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub level: u32,
    pub tau: f64,
    pub times: Vec<f64>,
    pub bulk: Vec<Vec<f64>>,
    pub boundary: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn new(level: u32, tau: f64) -> Self {
        Self {
            level,
            tau,
            times: Vec::new(),
            bulk: Vec::new(),
            boundary: Vec::new(),
        }
    }

    pub fn push(&mut self, ops: &FemOperators, t: f64, phi: Vec<f64>) {
        self.boundary.push(ops.restrict(&phi));
        self.times.push(t);
        self.bulk.push(phi);
    }

    pub fn t_end(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    /// Bulk field at time `t` by linear interpolation between snapshots.
    pub fn bulk_at(&self, t: f64) -> Result<Vec<f64>> {
        let (k, w) = self.bracket(t)?;
        if w == 0.0 {
            return Ok(self.bulk[k].clone());
        }
        Ok(self.bulk[k]
            .iter()
            .zip(&self.bulk[k + 1])
            .map(|(a, b)| (1.0 - w) * a + w * b)
            .collect())
    }

    fn bracket(&self, t: f64) -> Result<(usize, f64)> {
        let n = self.times.len();
        if n == 0 {
            return Err(Error::Incomparable("empty trajectory".into()));
        }
        let slack = 1e-9 * (1.0 + self.t_end().abs());
        if t < self.times[0] - slack || t > self.times[n - 1] + slack {
            return Err(Error::Incomparable(format!(
                "time {t} outside the trajectory range [{}, {}]",
                self.times[0],
                self.times[n - 1]
            )));
        }
        let k = self.times.partition_point(|&s| s <= t + slack).saturating_sub(1);
        if (self.times[k] - t).abs() <= slack || k + 1 == n {
            return Ok((k.min(n - 1), 0.0));
        }
        let w = (t - self.times[k]) / (self.times[k + 1] - self.times[k]);
        Ok((k, w))
    }
}

/// Uniform sample times `kT/n` on `[0, T]` with `n = max(1, round(T/dt))`.
pub fn sample_times(t_end: f64, sample_dt: f64) -> Vec<f64> {
    let n = ((t_end / sample_dt).round() as usize).max(1);
    (0..=n).map(|k| t_end * k as f64 / n as f64).collect()
}

fn trapezoid(values: &[f64], t_end: f64) -> f64 {
    let n = values.len() - 1;
    if n == 0 {
        return 0.0;
    }
    let dt = t_end / n as f64;
    let inner: f64 = values[1..n].iter().sum();
    dt * (inner + 0.5 * (values[0] + values[n]))
}

fn reference_operators(level: u32) -> Result<FemOperators> {
    let (mesh, bnd) = build_unit_square_mesh(level)?;
    assemble_operators(&mesh, &bnd)
}

fn check_comparable(a: &Trajectory, b: &Trajectory) -> Result<()> {
    let (ta, tb) = (a.t_end(), b.t_end());
    if (ta - tb).abs() > 1e-9 * (1.0 + ta.abs().max(tb.abs())) {
        return Err(Error::Incomparable(format!(
            "mismatched horizons {ta} and {tb}"
        )));
    }
    Ok(())
}

/// Squared bulk and boundary L² norms of `fine_diff`, a nodal vector on the
/// reference level.
fn squared_norms(ops: &FemOperators, diff: &[f64]) -> (f64, f64) {
    (ops.l2_norm_sq_bulk(diff), ops.l2_norm_sq_bnd(&ops.restrict(diff)))
}

/// `(‖φ_a − φ_b‖_{L²(0,T;L²(Ω))}, ‖φ_a − φ_b‖_{L²(0,T;L²(Γ))})` for two runs on
/// nested unit-square meshes with equal horizons.
pub fn l2l2_error(coarse: &Trajectory, reference: &Trajectory, sample_dt: f64) -> Result<(f64, f64)> {
    if !(sample_dt > 0.0) {
        return Err(Error::InvalidArgument(format!("sample_dt must be positive, got {sample_dt}")));
    }
    check_comparable(coarse, reference)?;
    let fine = coarse.level.max(reference.level);
    let ops = reference_operators(fine)?;
    let t_end = reference.t_end();
    let mut bulk = Vec::new();
    let mut bnd = Vec::new();
    for t in sample_times(t_end, sample_dt) {
        let a = prolongate_unit_square(coarse.level, fine, &coarse.bulk_at(t)?)?;
        let b = prolongate_unit_square(reference.level, fine, &reference.bulk_at(t)?)?;
        let diff: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        let (eb, eg) = squared_norms(&ops, &diff);
        bulk.push(eb);
        bnd.push(eg);
    }
    Ok((trapezoid(&bulk, t_end).sqrt(), trapezoid(&bnd, t_end).sqrt()))
}

/// `eoc_k = log(e_k/e_{k−1}) / log(p_k/p_{k−1})` for consecutive rows.
pub fn compute_eoc(rows: &[(f64, f64)]) -> Result<Vec<f64>> {
    if rows.len() < 2 {
        return Err(Error::InvalidArgument("at least two rows are needed".into()));
    }
    for &(p, e) in rows {
        if !(p > 0.0) || !(e > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "parameters and errors must be positive, got ({p}, {e})"
            )));
        }
    }
    rows.windows(2)
        .map(|w| {
            let (p0, e0) = w[0];
            let (p1, e1) = w[1];
            if p0 == p1 {
                return Err(Error::InvalidArgument(format!("repeated parameter {p0}")));
            }
            Ok((e1 / e0).ln() / (p1 / p0).ln())
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    H,
    Tau,
    Xi,
    XiInverse,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::H => "h",
            Axis::Tau => "tau",
            Axis::Xi => "xi",
            Axis::XiInverse => "xi_inverse",
        }
    }
}

impl std::str::FromStr for Axis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "h" => Ok(Axis::H),
            "tau" => Ok(Axis::Tau),
            "xi" => Ok(Axis::Xi),
            "xi_inverse" | "xi-inverse" => Ok(Axis::XiInverse),
            _ => Err(Error::InvalidArgument(format!(
                "unknown axis '{s}', expected h, tau, xi or xi-inverse"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EocRow {
    pub parameter: f64,
    pub error_bulk: f64,
    pub error_bnd: f64,
    pub eoc_bulk: Option<f64>,
    pub eoc_bnd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EocReport {
    pub axis: Axis,
    pub rows: Vec<EocRow>,
}

impl EocReport {
    /// Rows sorted by parameter, with EOCs filled in between neighbours.
    pub fn from_errors(axis: Axis, mut errors: Vec<(f64, f64, f64)>) -> Result<Self> {
        errors.sort_by(|a, b| a.0.total_cmp(&b.0));
        let bulk: Vec<(f64, f64)> = errors.iter().map(|&(p, e, _)| (p, e)).collect();
        let bnd: Vec<(f64, f64)> = errors.iter().map(|&(p, _, e)| (p, e)).collect();
        let (eb, eg) = if errors.len() >= 2 {
            (compute_eoc(&bulk)?, compute_eoc(&bnd)?)
        } else {
            (Vec::new(), Vec::new())
        };
        let rows = errors
            .iter()
            .enumerate()
            .map(|(k, &(parameter, error_bulk, error_bnd))| EocRow {
                parameter,
                error_bulk,
                error_bnd,
                eoc_bulk: k.checked_sub(1).map(|j| eb[j]),
                eoc_bnd: k.checked_sub(1).map(|j| eg[j]),
            })
            .collect();
        Ok(Self { axis, rows })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("axis,parameter,error_bulk,error_bnd,eoc_bulk,eoc_bnd\n");
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        for r in &self.rows {
            writeln!(
                out,
                "{},{:e},{:e},{:e},{},{}",
                self.axis.name(),
                r.parameter,
                r.error_bulk,
                r.error_bnd,
                opt(r.eoc_bulk),
                opt(r.eoc_bnd)
            )
            .expect("writing to a String");
        }
        out
    }
}

/// Inputs of a convergence study.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub axis: Axis,
    pub initial: InitialCondition,
    pub shift_bulk: f64,
    pub shift_bnd: f64,
    /// Base parameters; the varied one is overridden per run.
    pub params: Params,
    /// Mesh level of every run on the `tau`, `xi` and `xi_inverse` axes.
    pub level: u32,
    /// Levels compared on the `h` axis.
    pub levels: Vec<u32>,
    pub reference_level: u32,
    pub taus: Vec<f64>,
    pub reference_tau: f64,
    /// `ξ` values on the `xi` axis, `ξ⁻¹` values on the `xi_inverse` axis.
    pub xis: Vec<f64>,
    pub sample_dt: f64,
    pub solver: SolverOptions,
}

#[derive(Debug, Clone, Copy)]
struct RunSpec {
    parameter: f64,
    level: u32,
    params: Params,
}

/// Records φ at uniform sample times, interpolating linearly within steps.
struct Sampler<F: FnMut(f64, &[f64]) -> crate::Result<()>> {
    times: Vec<f64>,
    next: usize,
    prev_phi: Vec<f64>,
    prev_t: f64,
    sink: F,
}

impl<F: FnMut(f64, &[f64]) -> Result<()>> Sampler<F> {
    fn new(t_end: f64, sample_dt: f64, sink: F) -> Self {
        Self {
            times: sample_times(t_end, sample_dt),
            next: 0,
            prev_phi: Vec::new(),
            prev_t: 0.0,
            sink,
        }
    }
}

impl<F: FnMut(f64, &[f64]) -> Result<()>> StepObserver for Sampler<F> {
    fn observe(&mut self, ev: &StepEvent<'_>) -> Result<()> {
        let t = ev.state.t;
        let slack = 1e-9 * ev.params.tau;
        while self.next < self.times.len() && self.times[self.next] <= t + slack {
            let ts = self.times[self.next];
            if (ts - t).abs() <= slack || ev.prev.is_none() {
                (self.sink)(ts, &ev.state.phi)?;
            } else {
                let w = (ts - self.prev_t) / (t - self.prev_t);
                let phi: Vec<f64> = self
                    .prev_phi
                    .iter()
                    .zip(&ev.state.phi)
                    .map(|(a, b)| (1.0 - w) * a + w * b)
                    .collect();
                (self.sink)(ts, &phi)?;
            }
            self.next += 1;
        }
        self.prev_t = t;
        self.prev_phi.clone_from(&ev.state.phi);
        Ok(())
    }
}

fn potentials(cfg: &StudyConfig) -> Result<(DoubleWell, DoubleWell)> {
    Ok((DoubleWell::new(cfg.shift_bulk)?, DoubleWell::new(cfg.shift_bnd)?))
}

fn simulate<F>(cfg: &StudyConfig, spec: &RunSpec, sink: F) -> Result<()>
where
    F: FnMut(f64, &[f64]) -> Result<()>,
{
    let (mesh, bnd) = build_unit_square_mesh(spec.level)?;
    let ops = assemble_operators(&mesh, &bnd)?;
    let (f, g) = potentials(cfg)?;
    let phi0 = cfg.initial.nodal_values(&mesh)?;
    let mut sampler = Sampler::new(spec.params.t_end, cfg.sample_dt, sink);
    stepper::run(&ops, &spec.params, &f, &g, phi0, cfg.solver, &mut [&mut sampler])?;
    if sampler.next != sampler.times.len() {
        return Err(Error::Incomparable(format!(
            "run stopped after {} of {} sample times",
            sampler.next,
            sampler.times.len()
        )));
    }
    Ok(())
}

/// Run a study and sample a full trajectory of the given run.
pub fn simulate_trajectory(cfg: &StudyConfig, level: u32, params: &Params) -> Result<Trajectory> {
    let ops = reference_operators(level)?;
    let mut traj = Trajectory::new(level, params.tau);
    let spec = RunSpec {
        parameter: 0.0,
        level,
        params: *params,
    };
    simulate(cfg, &spec, |t, phi| {
        traj.push(&ops, t, phi.to_vec());
        Ok(())
    })?;
    Ok(traj)
}

/// Errors of one run against a reference, accumulated while the run proceeds.
fn error_against(cfg: &StudyConfig, spec: &RunSpec, reference: &Trajectory, ref_ops: &FemOperators) -> Result<(f64, f64)> {
    if spec.level > reference.level {
        return Err(Error::Incomparable(format!(
            "run level {} is finer than reference level {}",
            spec.level, reference.level
        )));
    }
    let mut k = 0usize;
    let mut bulk = Vec::with_capacity(reference.times.len());
    let mut bnd = Vec::with_capacity(reference.times.len());
    simulate(cfg, spec, |t, phi| {
        let rt = reference.times.get(k).copied().ok_or_else(|| {
            Error::Incomparable("run has more samples than the reference".into())
        })?;
        if (rt - t).abs() > 1e-9 * (1.0 + t.abs()) {
            return Err(Error::Incomparable(format!("sample time {t} does not match {rt}")));
        }
        let fine = prolongate_unit_square(spec.level, reference.level, phi)?;
        let diff: Vec<f64> = fine.iter().zip(&reference.bulk[k]).map(|(a, b)| a - b).collect();
        let (eb, eg) = squared_norms(ref_ops, &diff);
        bulk.push(eb);
        bnd.push(eg);
        k += 1;
        Ok(())
    })?;
    if k != reference.times.len() {
        return Err(Error::Incomparable("run has fewer samples than the reference".into()));
    }
    let t_end = reference.t_end();
    Ok((trapezoid(&bulk, t_end).sqrt(), trapezoid(&bnd, t_end).sqrt()))
}

/// Mesh size `√2·2⁻ˡ` of a unit-square level.
pub fn level_h(level: u32) -> f64 {
    std::f64::consts::SQRT_2 / (1u64 << level) as f64
}

/// Execute all runs of a study and compare them with its reference run.
///
/// The reference is kept in memory at the sample times only; the other runs
/// are compared on the fly and execute in parallel.
pub fn run_eoc_study(cfg: &StudyConfig) -> Result<EocReport> {
    cfg.params.validate()?;
    let base = cfg.params;
    let (reference, runs): (RunSpec, Vec<RunSpec>) = match cfg.axis {
        Axis::H => {
            if cfg.levels.iter().any(|&l| l >= cfg.reference_level) {
                return Err(Error::InvalidArgument(
                    "levels must be coarser than the reference level".into(),
                ));
            }
            (
                RunSpec { parameter: level_h(cfg.reference_level), level: cfg.reference_level, params: base },
                cfg.levels
                    .iter()
                    .map(|&l| RunSpec { parameter: level_h(l), level: l, params: base })
                    .collect(),
            )
        }
        Axis::Tau => (
            RunSpec {
                parameter: cfg.reference_tau,
                level: cfg.level,
                params: Params { tau: cfg.reference_tau, ..base },
            },
            cfg.taus
                .iter()
                .map(|&tau| RunSpec { parameter: tau, level: cfg.level, params: Params { tau, ..base } })
                .collect(),
        ),
        Axis::Xi => (
            RunSpec { parameter: 0.0, level: cfg.level, params: Params { xi: 0.0, ..base } },
            cfg.xis
                .iter()
                .map(|&xi| RunSpec { parameter: xi, level: cfg.level, params: Params { xi, ..base } })
                .collect(),
        ),
        Axis::XiInverse => (
            RunSpec {
                parameter: 0.0,
                level: cfg.level,
                params: Params { xi: f64::INFINITY, ..base },
            },
            cfg.xis
                .iter()
                .map(|&inv| RunSpec {
                    parameter: inv,
                    level: cfg.level,
                    params: Params { xi: 1.0 / inv, ..base },
                })
                .collect(),
        ),
    };
    if runs.is_empty() {
        return Err(Error::InvalidArgument("a study needs at least one run".into()));
    }
    for r in &runs {
        r.params.validate()?;
    }
    log::info!(
        "{} study: reference run at level {}, tau {:e}",
        cfg.axis.name(),
        reference.level,
        reference.params.tau
    );
    let ref_traj = simulate_trajectory(cfg, reference.level, &reference.params)?;
    let ref_ops = reference_operators(reference.level)?;
    let errors = runs
        .par_iter()
        .map(|spec| {
            let (eb, eg) = error_against(cfg, spec, &ref_traj, &ref_ops)?;
            log::info!("{} = {:e}: errors {eb:e} / {eg:e}", cfg.axis.name(), spec.parameter);
            Ok((spec.parameter, eb, eg))
        })
        .collect::<Result<Vec<_>>>()?;
    EocReport::from_errors(cfg.axis, errors)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn printed_table_pairs() {
        let h = std::f64::consts::SQRT_2;
        let e = compute_eoc(&[(h / 128.0, 6.28e-3), (h / 64.0, 3.06e-2)]).unwrap();
        assert!((e[0] - 2.28).abs() <= 0.01);
        let e = compute_eoc(&[(2e-5, 4.79e-3), (4e-5, 1.44e-2)]).unwrap();
        assert!((e[0] - 1.59).abs() <= 0.01);
        let e = compute_eoc(&[(1.0, 0.3), (2.0, 0.3)]).unwrap();
        assert_eq!(e[0], 0.0);
    }

    #[test]
    fn eoc_rejects_bad_rows() {
        assert!(compute_eoc(&[(1.0, 0.1)]).is_err());
        assert!(compute_eoc(&[(1.0, 0.1), (2.0, 0.0)]).is_err());
        assert!(compute_eoc(&[(1.0, -0.1), (2.0, 0.1)]).is_err());
        assert!(compute_eoc(&[(1.0, 0.1), (1.0, 0.2)]).is_err());
    }

    #[test]
    fn sample_grid() {
        let t = sample_times(1e-3, 2e-4);
        assert_eq!(t.len(), 6);
        assert_eq!(*t.last().unwrap(), 1e-3);
        assert_eq!(sample_times(1e-5, 2e-4).len(), 2);
    }

    #[test]
    fn trapezoid_of_constant_and_linear() {
        assert!((trapezoid(&[2.0; 11], 0.5) - 1.0).abs() < 1e-15);
        let lin: Vec<f64> = (0..=4).map(|k| k as f64).collect();
        assert!((trapezoid(&lin, 4.0) - 8.0).abs() < 1e-15);
    }

    #[test]
    fn axis_names_round_trip() {
        for a in [Axis::H, Axis::Tau, Axis::Xi, Axis::XiInverse] {
            assert_eq!(a.name().parse::<Axis>().unwrap(), a);
        }
        assert_eq!("xi-inverse".parse::<Axis>().unwrap(), Axis::XiInverse);
        assert!("space".parse::<Axis>().is_err());
    }

    #[test]
    fn report_csv_leaves_first_eoc_empty() {
        let rep = EocReport::from_errors(Axis::Tau, vec![(4e-5, 1.44e-2, 7.38e-2), (2e-5, 4.79e-3, 2.48e-2)]).unwrap();
        let csv = rep.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "axis,parameter,error_bulk,error_bnd,eoc_bulk,eoc_bnd");
        assert!(lines[1].ends_with(",,"));
        assert_eq!(rep.rows[0].parameter, 2e-5);
        assert!((rep.rows[1].eoc_bnd.unwrap() - 1.58).abs() <= 0.01);
    }
}
