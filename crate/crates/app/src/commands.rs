//! Subcommand implementations, callable without going through argv.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chdbc::eoc::{run_eoc_study, Axis, EocReport, StudyConfig};
use chdbc::fem::assemble_operators;
use chdbc::mesh::{build_unit_square_mesh, load_mesh, validate, Severity};
use chdbc::scenario::{scenario_adsorption, scenario_separation};
use chdbc::stepper::{self, Params};
use chdbc::{BoundaryMesh, BulkMesh, State};
use log::{info, warn};

use crate::config::{Config, DEFAULT_LEVEL};
use crate::output::{energy_chart, CsvSink, VtkSink};
use crate::tables;
use crate::validate::{run_suite, Check};

/// Command-line overrides shared by the subcommands.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub output_dir: Option<PathBuf>,
    pub axis: Option<Axis>,
    pub levels: Option<Vec<u32>>,
    pub tau: Option<f64>,
    pub xi: Option<f64>,
    pub t_end: Option<f64>,
    pub snapshot_every: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut Config) {
        if let Some(d) = &self.output_dir {
            cfg.output.dir = d.clone();
        }
        if let Some(a) = self.axis {
            cfg.eoc.axis = Some(a);
        }
        if let Some(l) = &self.levels {
            match l.as_slice() {
                [single] => {
                    cfg.mesh.level = Some(*single);
                    cfg.mesh.path = None;
                    cfg.eoc.level = Some(*single);
                }
                many => cfg.eoc.levels = Some(many.to_vec()),
            }
        }
        if let Some(t) = self.tau {
            cfg.params.tau = Some(t);
        }
        if let Some(x) = self.xi {
            cfg.params.xi = Some(x);
        }
        if let Some(t) = self.t_end {
            cfg.params.t_end = Some(t);
        }
        if let Some(s) = self.snapshot_every {
            cfg.output.snapshot_every = s;
        }
    }
}

pub fn load_config(path: Option<&Path>, ov: &Overrides) -> Result<Config> {
    let mut cfg = match path {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    ov.apply(&mut cfg);
    // re-run the checks on the merged configuration
    Config::parse(&cfg.to_toml()?).context("after applying command-line overrides")
}

pub fn build_mesh(cfg: &Config) -> Result<(BulkMesh, BoundaryMesh)> {
    let (mesh, bnd) = match &cfg.mesh.path {
        Some(p) => load_mesh(p)?,
        None => build_unit_square_mesh(cfg.mesh.level.unwrap_or(DEFAULT_LEVEL))?,
    };
    let report = validate(&mesh, &bnd);
    for issue in &report.issues {
        match issue.severity() {
            Severity::Warning => warn!("mesh: {issue}"),
            Severity::Violation => bail!("mesh: {issue}"),
        }
    }
    Ok((mesh, bnd))
}

fn warn_on_coupling(h: f64, params: &Params) {
    let ratio = h.powi(4) / params.tau;
    if ratio > 1.0 {
        warn!("h^4/tau = {ratio:.3e} > 1; the time step is small relative to the mesh size");
    }
}

pub struct RunSummary {
    pub final_state: State,
    pub csv: PathBuf,
    pub snapshots: Vec<PathBuf>,
}

pub fn run(cfg: &Config) -> Result<RunSummary> {
    let sc = cfg.scenario()?;
    let (mesh, bnd) = build_mesh(cfg)?;
    let ops = assemble_operators(&mesh, &bnd)?;
    let (f, g) = sc.potentials()?;
    warn_on_coupling(mesh.h, &sc.params);
    let phi0 = sc.initial.nodal_values(&mesh)?;
    let dir = &cfg.output.dir;
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    std::fs::write(dir.join("config.toml"), cfg.to_toml()?)?;

    let csv_path = dir.join("diagnostics.csv");
    let mut csv = CsvSink::create(&csv_path, cfg.output.diagnostics_every)?;
    let mut vtk = VtkSink {
        mesh: &mesh,
        bnd: &bnd,
        dir: dir.clone(),
        every: cfg.output.snapshot_every,
        written: Vec::new(),
    };
    info!(
        "running {} vertices, {} boundary vertices, tau = {:e}, T = {}, xi = {}",
        mesh.num_vertices(),
        bnd.num_vertices(),
        sc.params.tau,
        sc.params.t_end,
        sc.params.xi
    );
    let final_state = stepper::run(&ops, &sc.params, &f, &g, phi0, cfg.solver, &mut [&mut csv, &mut vtk])?;
    let snapshots = std::mem::take(&mut vtk.written);
    let (_, rows) = csv.finish()?;
    if cfg.output.svg {
        std::fs::write(dir.join("energy.svg"), energy_chart(&rows))?;
    }
    Ok(RunSummary {
        final_state,
        csv: csv_path,
        snapshots,
    })
}

/// Configurations of the published studies (hours of runtime).
pub fn full_study(axis: Axis, base: &StudyConfig) -> StudyConfig {
    match axis {
        Axis::H | Axis::Tau => {
            let sc = scenario_separation();
            StudyConfig {
                axis,
                initial: sc.initial,
                shift_bulk: sc.shift_bulk,
                shift_bnd: sc.shift_bnd,
                params: Params { tau: 2e-5, t_end: 1.0, ..sc.params },
                level: 7,
                levels: vec![6, 7],
                reference_level: 8,
                taus: vec![2e-5, 4e-5],
                reference_tau: 1e-5,
                xis: Vec::new(),
                sample_dt: 2e-4,
                solver: base.solver,
            }
        }
        Axis::Xi | Axis::XiInverse => {
            let sc = scenario_adsorption();
            StudyConfig {
                axis,
                initial: sc.initial,
                shift_bulk: sc.shift_bulk,
                shift_bnd: sc.shift_bnd,
                params: Params { tau: 3e-5, t_end: 2.5, ..sc.params },
                level: 8,
                levels: Vec::new(),
                reference_level: 8,
                taus: Vec::new(),
                reference_tau: 3e-5,
                xis: vec![1e-4, 2e-4, 3e-4, 4e-4, 5e-4, 7.5e-4, 1e-3, 1e-2, 1e-1, 1.0],
                sample_dt: 2e-4,
                solver: base.solver,
            }
        }
    }
}

pub fn eoc(cfg: &Config, axis: Option<Axis>, full: bool) -> Result<(EocReport, PathBuf)> {
    let mut study = cfg.study(axis)?;
    if full {
        study = full_study(study.axis, &study);
    }
    let report = run_eoc_study(&study)?;
    std::fs::create_dir_all(&cfg.output.dir)?;
    let path = cfg.output.dir.join(format!("eoc_{}.csv", study.axis.name()));
    std::fs::write(&path, report.to_csv())?;
    Ok((report, path))
}

pub const VALIDATE_STEPS: usize = 200;
pub const VALIDATE_XIS: [f64; 3] = [0.0, 1.0, f64::INFINITY];

/// Invariant suite on the configured scenario. Without a mesh or time step in
/// the configuration it uses level 4 and `tau = 1e-4`.
pub fn validate_cmd(cfg: &Config) -> Result<Vec<Check>> {
    let mut cfg = cfg.clone();
    if cfg.mesh.level.is_none() && cfg.mesh.path.is_none() {
        cfg.mesh.level = Some(4);
    }
    if cfg.params.tau.is_none() {
        cfg.params.tau = Some(1e-4);
    }
    let sc = cfg.scenario()?;
    let (mesh, bnd) = build_mesh(&cfg)?;
    let ops = assemble_operators(&mesh, &bnd)?;
    let (f, g) = sc.potentials()?;
    let phi0 = sc.initial.nodal_values(&mesh)?;
    run_suite(&ops, &sc.params, &f, &g, &phi0, &VALIDATE_XIS, VALIDATE_STEPS, cfg.solver)
}

/// Rendered table and whether every entry is reproduced within tolerance.
pub fn paper_tables() -> (String, bool) {
    let entries = tables::recompute();
    let ok = entries.iter().all(|e| e.reproduced());
    (tables::render(&entries) + &tables::summary(&entries), ok)
}
