//! Scenario configuration: TOML with unknown keys rejected, validated before any computation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    TriangleArea,
    Nu,
    ActionHom,
    DefectScan,
    Homogenize,
    Calibrate,
    Ham2dRun,
    LocalType,
    SobolevScan,
}

impl ScenarioKind {
    pub fn name(&self) -> &'static str {
        match self {
            ScenarioKind::TriangleArea => "triangle-area",
            ScenarioKind::Nu => "nu",
            ScenarioKind::ActionHom => "action-hom",
            ScenarioKind::DefectScan => "defect-scan",
            ScenarioKind::Homogenize => "homogenize",
            ScenarioKind::Calibrate => "calibrate",
            ScenarioKind::Ham2dRun => "ham2d-run",
            ScenarioKind::LocalType => "local-type",
            ScenarioKind::SobolevScan => "sobolev-scan",
        }
    }

    pub fn uses_grid(&self) -> bool {
        matches!(self, ScenarioKind::Ham2dRun | ScenarioKind::LocalType | ScenarioKind::SobolevScan)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainKind {
    Torus,
    Disk,
}

fn d_n() -> usize {
    1
}
fn d_form() -> String {
    "trace".into()
}
fn d_grid() -> i64 {
    32
}
fn d_radius() -> f64 {
    1.0
}
fn d_dt() -> f64 {
    1e-3
}
fn d_order() -> usize {
    16
}
fn d_kmax() -> usize {
    8
}
fn d_domain() -> DomainKind {
    DomainKind::Torus
}
fn d_cells() -> usize {
    4
}
fn d_one() -> f64 {
    1.0
}
fn d_power() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Instance {
    #[serde(default = "d_n")]
    pub n: usize,
    #[serde(default = "d_form")]
    pub form: String,
    /// Grid resolution; signed so that negative values are reported as validation errors.
    #[serde(default = "d_grid")]
    pub grid_n: i64,
    #[serde(default = "d_domain")]
    pub domain: DomainKind,
    #[serde(default = "d_radius")]
    pub radius: f64,
    #[serde(default = "d_dt")]
    pub dt: f64,
    #[serde(default = "d_order")]
    pub t_order: usize,
    #[serde(default = "d_order")]
    pub s_order: usize,
    #[serde(default = "d_kmax")]
    pub k_max: usize,
    /// Spread of random Siegel points.
    #[serde(default = "d_one")]
    pub spread: f64,
}

impl Default for Instance {
    fn default() -> Self {
        toml::from_str("").expect("defaults")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PathConfig {
    /// exp(2 pi m t J0).
    Rotation {
        winding: i64,
        #[serde(default = "d_cells")]
        cells: usize,
    },
    /// Loop in U(n): U diag(exp(2 pi i m_k t)) U^* with U the identity.
    Unitary {
        windings: Vec<i64>,
        #[serde(default = "d_cells")]
        cells: usize,
    },
    /// One row-major 2n x 2n sp(2n) element per uniform cell.
    Piecewise { generators: Vec<Vec<f64>> },
    /// Row-major 2n x 2n expressions in t, sampled at cell midpoints.
    Expression {
        entries: Vec<String>,
        #[serde(default = "d_cells")]
        cells: usize,
    },
    /// Random piecewise path; endpoints restricted to spectral radius at most max_radius.
    Random {
        #[serde(default = "d_cells")]
        cells: usize,
        #[serde(default = "d_one")]
        rotation: f64,
        #[serde(default = "d_wiggle")]
        wiggle: f64,
        max_radius: Option<f64>,
    },
}

fn d_wiggle() -> f64 {
    0.6
}

fn d_bump_amp() -> [f64; 2] {
    [0.02, 0.06]
}
fn d_bump_radius() -> [f64; 2] {
    [0.2, 0.35]
}
fn d_modes() -> usize {
    3
}
fn d_freq() -> i64 {
    1
}
fn d_amp() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FlowConfig {
    /// H(t, x, y) given as an expression.
    Expression {
        hamiltonian: String,
        #[serde(default = "d_one")]
        duration: f64,
        #[serde(default = "d_cells")]
        cells: usize,
    },
    /// -A max(0, 1 - |p - c|^2 / R^2)^3.
    RotationBump {
        amplitude: f64,
        radius: f64,
        #[serde(default)]
        center: [f64; 2],
        #[serde(default = "d_one")]
        duration: f64,
        #[serde(default = "d_cells")]
        cells: usize,
    },
    /// Rotation bumps with amplitude and radius drawn uniformly from the ranges, placed inside the unit square.
    RandomBump {
        #[serde(default = "d_bump_amp")]
        amplitude: [f64; 2],
        #[serde(default = "d_bump_radius")]
        radius: [f64; 2],
        #[serde(default = "d_cells")]
        cells: usize,
    },
    /// Random Fourier Hamiltonian on the torus.
    RandomFourier {
        #[serde(default = "d_modes")]
        modes: usize,
        #[serde(default = "d_freq")]
        max_freq: i64,
        #[serde(default = "d_amp")]
        amplitude: f64,
        #[serde(default)]
        time_dependent: bool,
        #[serde(default = "d_one")]
        duration: f64,
        #[serde(default = "d_cells")]
        cells: usize,
    },
}

fn d_spread() -> f64 {
    0.5
}
fn d_field_amp() -> f64 {
    0.2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BasepointConfig {
    Standard,
    /// Random Siegel point (Sp scenarios) or random smooth field (grid scenarios).
    Random {
        #[serde(default = "d_spread")]
        spread: f64,
        #[serde(default = "d_modes")]
        modes: usize,
        #[serde(default = "d_freq")]
        max_freq: i64,
        #[serde(default = "d_field_amp")]
        amplitude: f64,
    },
    /// Explicit Siegel point, X and Y row-major n x n.
    Siegel { x: Vec<f64>, y: Vec<f64> },
    /// Binary structure field, path relative to the config file.
    File { path: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Column {
    Value,
    Error,
    Reference,
    Aux,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Assertion {
    /// Rows with this label; all rows when absent.
    pub label: Option<String>,
    #[serde(default = "d_column")]
    pub column: Column,
    pub expected: Option<f64>,
    pub tolerance: Option<f64>,
    /// |column| < below.
    pub below: Option<f64>,
}

fn d_column() -> Column {
    Column::Value
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Write a plot-data CSV for series-producing scenarios.
    #[serde(default)]
    pub plot: bool,
    /// Write the endpoint structure field of ham2d runs as a binary grid.
    #[serde(default)]
    pub field: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    pub name: Option<String>,
    #[serde(default)]
    pub seed: u64,
    /// Number of random items for scans and random paths in calibration suites.
    pub count: Option<usize>,
    /// Calibration ledger for local-type, path relative to the config file.
    pub ledger: Option<String>,
    #[serde(default)]
    pub instance: Instance,
    /// Power applied to the path or flow.
    #[serde(default = "d_power")]
    pub power: usize,
    /// ham2d-run: also report homogenized values at instance.k_max.
    #[serde(default)]
    pub homogenize: bool,
    pub path: Option<PathConfig>,
    pub flow: Option<FlowConfig>,
    pub basepoint: Option<BasepointConfig>,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default, rename = "assert")]
    pub assertions: Vec<Assertion>,
}

/// A parsed config together with where it came from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ScenarioConfig,
    pub name: String,
    pub dir: PathBuf,
}

impl LoadedConfig {
    pub fn resolve(&self, rel: &str) -> PathBuf {
        self.dir.join(rel)
    }

    /// Canonical text of the effective configuration, the input of every digest.
    pub fn canonical(&self) -> String {
        toml::to_string(&self.config).expect("config serializes")
    }
}

pub fn load(path: &Path, seed_override: Option<u64>) -> Result<LoadedConfig, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut config: ScenarioConfig = toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    if let Some(s) = seed_override {
        config.seed = s;
    }
    let name = config
        .name
        .clone()
        .unwrap_or_else(|| path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "scenario".into()));
    if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) {
        return Err(format!("name '{name}' must be non-empty and use only letters, digits, '-', '_' or '.'"));
    }
    let loaded = LoadedConfig { config, name, dir: path.parent().map(Path::to_path_buf).unwrap_or_default() };
    validate(&loaded.config)?;
    Ok(loaded)
}

fn positive(v: f64, what: &str) -> Result<(), String> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(format!("{what} must be positive and finite, got {v}"))
    }
}

/// Structural checks; numerical preparation (expression parsing, path compilation) happens in the scenario module.
pub fn validate(c: &ScenarioConfig) -> Result<(), String> {
    let i = &c.instance;
    if !(1..=4).contains(&i.n) {
        return Err(format!("instance.n must be between 1 and 4, got {}", i.n));
    }
    if i.form.parse::<moment_qm::siegel::FormKind>().is_err() {
        return Err(format!("instance.form must be trace, siegel or bergman, got '{}'", i.form));
    }
    if c.scenario.uses_grid() {
        if i.grid_n < 16 {
            return Err(format!("instance.grid_n must be at least 16, got {}", i.grid_n));
        }
        if i.n != 1 {
            return Err("grid scenarios have one-dimensional fibers: instance.n must be 1".into());
        }
        positive(i.radius, "instance.radius")?;
        positive(i.dt, "instance.dt")?;
    } else if i.grid_n < 0 {
        return Err(format!("instance.grid_n must not be negative, got {}", i.grid_n));
    }
    if i.t_order == 0 || i.s_order == 0 {
        return Err("quadrature orders must be positive".into());
    }
    if i.k_max < 2 {
        return Err(format!("instance.k_max must be at least 2, got {}", i.k_max));
    }
    positive(i.spread, "instance.spread")?;
    let needs_path = matches!(c.scenario, ScenarioKind::Nu | ScenarioKind::ActionHom | ScenarioKind::Homogenize);
    if needs_path && c.path.is_none() {
        return Err(format!("scenario {} needs a [path] section", c.scenario.name()));
    }
    let needs_flow = matches!(c.scenario, ScenarioKind::Ham2dRun | ScenarioKind::LocalType | ScenarioKind::SobolevScan);
    if needs_flow && c.flow.is_none() {
        return Err(format!("scenario {} needs a [flow] section", c.scenario.name()));
    }
    if c.scenario == ScenarioKind::LocalType && i.domain != DomainKind::Disk {
        return Err("local-type runs on the disk domain".into());
    }
    if c.scenario == ScenarioKind::SobolevScan && i.domain != DomainKind::Torus {
        return Err("sobolev-scan runs on the torus domain".into());
    }
    if c.power == 0 {
        return Err("power must be positive".into());
    }
    if let Some(p) = &c.path {
        match p {
            PathConfig::Rotation { cells, .. } | PathConfig::Unitary { cells, .. } | PathConfig::Expression { cells, .. } | PathConfig::Random { cells, .. }
                if *cells == 0 =>
            {
                return Err("path.cells must be positive".into())
            }
            PathConfig::Unitary { windings, .. } if windings.len() != i.n => {
                return Err(format!("path.windings needs {} entries", i.n));
            }
            PathConfig::Piecewise { generators } if generators.is_empty() => return Err("path.generators is empty".into()),
            _ => {}
        }
    }
    if let Some(f) = &c.flow {
        match f {
            FlowConfig::Expression { duration, cells, .. } | FlowConfig::RotationBump { duration, cells, .. } | FlowConfig::RandomFourier { duration, cells, .. } => {
                positive(*duration, "flow.duration")?;
                if *cells == 0 {
                    return Err("flow.cells must be positive".into());
                }
            }
            FlowConfig::RandomBump { amplitude, radius, cells } => {
                if *cells == 0 {
                    return Err("flow.cells must be positive".into());
                }
                if !(amplitude[0] > 0.0 && amplitude[0] <= amplitude[1]) {
                    return Err("flow.amplitude must be an increasing positive range".into());
                }
                if !(radius[0] > 0.0 && radius[0] <= radius[1] && radius[1] < 0.45) {
                    return Err("flow.radius must be an increasing range inside (0, 0.45)".into());
                }
            }
        }
        if let FlowConfig::RotationBump { amplitude, radius, .. } = f {
            positive(*amplitude, "flow.amplitude")?;
            positive(*radius, "flow.radius")?;
        }
    }
    if let Some(0) = c.count {
        return Err("count must be positive".into());
    }
    for (k, a) in c.assertions.iter().enumerate() {
        match (a.expected, a.tolerance, a.below) {
            (Some(e), Some(t), None) if e.is_finite() && t >= 0.0 => {}
            (None, None, Some(b)) if b > 0.0 => {}
            _ => return Err(format!("assertion {k} needs either expected and tolerance >= 0, or below > 0")),
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<ScenarioConfig, String> {
        let c: ScenarioConfig = toml::from_str(s).map_err(|e| e.to_string())?;
        validate(&c)?;
        Ok(c)
    }

    #[test]
    fn minimal_config_uses_defaults() {
        let c = parse("scenario = \"nu\"\n[path]\nkind = \"rotation\"\nwinding = 1\n").unwrap();
        assert_eq!(c.instance, Instance::default());
        assert_eq!(c.path.unwrap(), PathConfig::Rotation { winding: 1, cells: 4 });
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        assert!(parse("scenario = \"nu\"\ncolour = 1\n").is_err());
        assert!(parse("scenario = \"nu\"\n[path]\nkind = \"rotation\"\nwinding = 1\nspin = 2\n").is_err());
        assert!(parse("scenario = \"ham2d-run\"\n[instance]\ngrid_n = -4\n[flow]\nkind = \"expression\"\nhamiltonian = \"x\"\n").is_err());
        assert!(parse("scenario = \"nu\"\n").is_err());
        assert!(parse("scenario = \"nu\"\n[path]\nkind = \"rotation\"\nwinding = 1\n[[assert]]\nexpected = 1.0\n").is_err());
        assert!(parse("scenario = \"teleport\"\n").is_err());
    }

    #[test]
    fn canonical_text_round_trips() {
        let c = parse("scenario = \"homogenize\"\nseed = 9\npower = 2\n[path]\nkind = \"random\"\n[[assert]]\nlabel = \"estimate\"\nbelow = 10.0\n").unwrap();
        let text = toml::to_string(&c).unwrap();
        let back: ScenarioConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, c);
    }
}
