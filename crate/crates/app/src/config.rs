//! TOML run configuration.
//!
//! ```toml
//! scenario = "separation"     # separation | adsorption | custom
//!
//! [mesh]
//! level = 6                   # unit square, 2^level cells per side
//! # path = "domain.mesh"      # or a mesh file
//!
//! [params]                    # every key optional, defaults per scenario
//! xi = "inf"
//! tau = 2e-5
//! t_end = 0.01
//!
//! [output]
//! dir = "out"
//! diagnostics_every = 1
//! snapshot_every = 500        # 0 disables VTK output
//! ```

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chdbc::eoc::{Axis, StudyConfig, DEFAULT_SAMPLE_DT};
use chdbc::scenario::{scenario_adsorption, scenario_separation, InitialCondition, Scenario};
use chdbc::stepper::Params;
use chdbc::SolverOptions;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    #[default]
    Separation,
    Adsorption,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

/// Adsorption rate: a number, TOML `inf`, or the string `"inf"`.
mod xi_serde {
    use serde::{de, Deserialize, Deserializer, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Int(i64),
        Text(String),
    }

    pub fn parse_xi(s: &str) -> Result<f64, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
            t => t.parse::<f64>().map_err(|e| format!("invalid xi '{s}': {e}")),
        }
    }

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(x) if x.is_infinite() => s.serialize_str("inf"),
            Some(x) => s.serialize_f64(*x),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        let v = match Raw::deserialize(d)? {
            Raw::Num(x) => x,
            Raw::Int(i) => i as f64,
            Raw::Text(t) => parse_xi(&t).map_err(de::Error::custom)?,
        };
        Ok(Some(v))
    }
}

pub use xi_serde::parse_xi;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, with = "xi_serde", skip_serializing_if = "Option::is_none")]
    pub xi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
}

impl ParamsConfig {
    pub fn apply(&self, base: Params) -> Params {
        Params {
            m: self.m.unwrap_or(base.m),
            m_gamma: self.m_gamma.unwrap_or(base.m_gamma),
            epsilon: self.epsilon.unwrap_or(base.epsilon),
            sigma: self.sigma.unwrap_or(base.sigma),
            delta: self.delta.unwrap_or(base.delta),
            beta: self.beta.unwrap_or(base.beta),
            xi: self.xi.unwrap_or(base.xi),
            tau: self.tau.unwrap_or(base.tau),
            t_end: self.t_end.unwrap_or(base.t_end),
        }
    }
}

/// Shifts of the double wells as absolute constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift_bulk: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift_bnd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "one")]
    pub diagnostics_every: usize,
    #[serde(default)]
    pub snapshot_every: usize,
    #[serde(default = "yes")]
    pub svg: bool,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}
fn one() -> usize {
    1
}
fn yes() -> bool {
    true
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            diagnostics_every: 1,
            snapshot_every: 0,
            svg: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct EocConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<Axis>,
    /// Mesh level for the tau and xi axes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_level: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub taus: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_tau: Option<f64>,
    /// ξ values, or ξ⁻¹ values on the `xi_inverse` axis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xis: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_dt: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub scenario: ScenarioKind,
    #[serde(default)]
    pub mesh: MeshConfig,
    #[serde(default)]
    pub params: ParamsConfig,
    #[serde(default)]
    pub potential: PotentialConfig,
    /// Required for the custom scenario, ignored otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialCondition>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub eoc: EocConfig,
}

pub const DEFAULT_LEVEL: u32 = 5;

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text)?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg = Self::parse(&text).with_context(|| format!("in config {}", path.display()))?;
        // relative mesh paths are resolved against the config file
        if let (Some(p), Some(dir)) = (&cfg.mesh.path, path.parent()) {
            if p.is_relative() {
                cfg.mesh.path = Some(dir.join(p));
            }
        }
        if let Some(p) = &cfg.mesh.path {
            if !p.exists() {
                bail!("mesh file {} does not exist", p.display());
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    fn check(&self) -> Result<()> {
        if self.mesh.level.is_some() && self.mesh.path.is_some() {
            bail!("[mesh] takes either `level` or `path`, not both");
        }
        if self.scenario == ScenarioKind::Custom && self.initial.is_none() {
            bail!("the custom scenario needs an [initial] section");
        }
        if self.output.diagnostics_every == 0 {
            bail!("output.diagnostics_every must be at least 1");
        }
        self.params()?.validate()?;
        let _ = self.scenario()?.potentials()?;
        Ok(())
    }

    /// Scenario with all overrides applied.
    pub fn scenario(&self) -> Result<Scenario> {
        let mut sc = match self.scenario {
            ScenarioKind::Separation => scenario_separation(),
            ScenarioKind::Adsorption => scenario_adsorption(),
            ScenarioKind::Custom => Scenario {
                initial: self.initial.context("missing [initial]")?,
                ..scenario_separation()
            },
        };
        sc.params = self.params.apply(sc.params);
        if let InitialCondition::Droplet { .. } = sc.initial {
            if self.scenario == ScenarioKind::Adsorption {
                sc.initial = InitialCondition::droplet(sc.params.epsilon);
            }
        }
        if let Some(s) = self.potential.shift_bulk {
            sc.shift_bulk = s;
        }
        if let Some(s) = self.potential.shift_bnd {
            sc.shift_bnd = s;
        }
        Ok(sc)
    }

    pub fn params(&self) -> Result<Params> {
        Ok(self.scenario()?.params)
    }

    /// Study settings; missing entries get the small default study of the axis.
    pub fn study(&self, axis_override: Option<Axis>) -> Result<StudyConfig> {
        let sc = self.scenario()?;
        let axis = axis_override.or(self.eoc.axis).unwrap_or(Axis::H);
        let level = self.eoc.level.or(self.mesh.level).unwrap_or(DEFAULT_LEVEL);
        let levels = self.eoc.levels.clone().unwrap_or_else(|| vec![4, 5]);
        let reference_level = self
            .eoc
            .reference_level
            .unwrap_or_else(|| levels.iter().max().copied().unwrap_or(5) + 1);
        let reference_tau = self.eoc.reference_tau.unwrap_or(sc.params.tau);
        let taus = self
            .eoc
            .taus
            .clone()
            .unwrap_or_else(|| vec![2.0 * reference_tau, 4.0 * reference_tau]);
        let xis = self.eoc.xis.clone().unwrap_or_else(|| vec![1e-4, 2e-4, 4e-4]);
        if self.mesh.path.is_some() {
            bail!("convergence studies need the nested unit-square meshes; remove [mesh].path");
        }
        Ok(StudyConfig {
            axis,
            initial: sc.initial,
            shift_bulk: sc.shift_bulk,
            shift_bnd: sc.shift_bnd,
            params: sc.params,
            level,
            levels,
            reference_level,
            taus,
            reference_tau,
            xis,
            sample_dt: self.eoc.sample_dt.unwrap_or(DEFAULT_SAMPLE_DT),
            solver: self.solver,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_the_separation_default() {
        let cfg = Config::parse("").unwrap();
        assert_eq!(cfg.scenario, ScenarioKind::Separation);
        assert_eq!(cfg.params().unwrap(), scenario_separation().params);
    }

    #[test]
    fn xi_spellings() {
        for text in ["xi = \"inf\"", "xi = inf", "xi = \"Infinity\""] {
            let cfg = Config::parse(&format!("[params]\n{text}\n")).unwrap();
            assert_eq!(cfg.params.xi, Some(f64::INFINITY), "{text}");
        }
        assert_eq!(Config::parse("[params]\nxi = 1\n").unwrap().params.xi, Some(1.0));
        assert_eq!(Config::parse("[params]\nxi = 0.5\n").unwrap().params.xi, Some(0.5));
        assert!(Config::parse("[params]\nxi = \"lots\"\n").is_err());
        assert!(Config::parse("[params]\nxi = -1.0\n").is_err());
    }

    #[test]
    fn round_trip() {
        let text = r#"
scenario = "custom"

[mesh]
level = 3

[params]
xi = "inf"
tau = 1e-4
t_end = 0.02
beta = 2.5

[potential]
shift_bulk = 0.02

[initial]
kind = "random"
mean = 0.1
amplitude = 0.05
seed = 42

[output]
dir = "runs/a"
diagnostics_every = 5
snapshot_every = 10
svg = false

[solver]
kind = "gmres"
restart = 40
max_iter = 500
rel_tol = 1e-13

[eoc]
axis = "xi_inverse"
level = 4
xis = [1e-4, 2e-4]
sample_dt = 1e-3
"#;
        let a = Config::parse(text).unwrap();
        let b = Config::parse(&a.to_toml().unwrap()).unwrap();
        assert_eq!(a, b);
        assert_eq!(b.params().unwrap().xi, f64::INFINITY);
        let c = Config::parse(&b.to_toml().unwrap()).unwrap();
        assert_eq!(b, c);
    }

    #[test]
    fn rejects_contradictions() {
        assert!(Config::parse("scenario = \"custom\"").is_err());
        assert!(Config::parse("[mesh]\nlevel = 3\npath = \"x.mesh\"").is_err());
        assert!(Config::parse("[params]\ntau = 0.0").is_err());
        assert!(Config::parse("[params]\nkappa = 2.0").is_err());
        assert!(Config::parse("[potential]\nshift_bulk = 0.0").is_err());
    }

    #[test]
    fn adsorption_droplet_follows_epsilon() {
        let cfg = Config::parse("scenario = \"adsorption\"\n[params]\nepsilon = 0.02\n").unwrap();
        match cfg.scenario().unwrap().initial {
            InitialCondition::Droplet { width, .. } => assert_eq!(width, 0.02),
            other => panic!("unexpected {other:?}"),
        }
    }
}
