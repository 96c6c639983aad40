//! Scenario and run configuration files.
//!
//! A scenario file fully describes one experiment. A run file names a
//! scenario (built-in or path) and overrides a few of its settings. Both are
//! TOML by default; JSON is accepted when the file ends in `.json` or starts
//! with `{`. A saved `report.json` can also be rerun: its embedded config is
//! used.

use std::fmt;
use std::path::{Path, PathBuf};

use occlab_core::geometry::{GoodExtension, GraphFunction, GraphSurface};
use occlab_core::linalg::Matrix;
use occlab_core::occupation::{LevelGrid, Profile};
use occlab_core::{Foliation, LevelFunction, Manifold, Region, SdeModel};
use serde::{Deserialize, Serialize};

use crate::scenarios;

/// Config format version read by this build.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{origin}:{line}:{column}: {message}")]
    Parse {
        origin: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error(
        "{origin}: unsupported config version {found} (this build reads version {expected}); \
         migration: set `version = {expected}` and compare the file against `occlab list` \
         built-ins for renamed keys"
    )]
    Version {
        origin: String,
        found: i64,
        expected: u32,
    },
    #[error("{origin}: missing top-level `version` key (expected {expected})")]
    MissingVersion { origin: String, expected: u32 },
    #[error("unknown scenario `{0}`: not a built-in name and not a readable file")]
    UnknownScenario(String),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum QvMode {
    #[default]
    Analytic,
    Realized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelConfig {
    StandardBm {
        x0: Vec<f64>,
    },
    Frozen {
        x0: Vec<f64>,
    },
    DriftedBm {
        x0: Vec<f64>,
        drift: Vec<f64>,
        sigma: Vec<Vec<f64>>,
    },
    Linear {
        x0: Vec<f64>,
        drift_matrix: Vec<Vec<f64>>,
        drift_offset: Vec<f64>,
        sigma: Vec<Vec<f64>>,
    },
    SingularRadialDrift {
        x0: Vec<f64>,
    },
}

impl ModelConfig {
    pub fn x0(&self) -> &[f64] {
        match self {
            Self::StandardBm { x0 }
            | Self::Frozen { x0 }
            | Self::DriftedBm { x0, .. }
            | Self::Linear { x0, .. }
            | Self::SingularRadialDrift { x0 } => x0,
        }
    }

    pub fn dim(&self) -> usize {
        self.x0().len()
    }

    pub fn build(&self) -> occlab_core::Result<SdeModel> {
        Ok(match self {
            Self::StandardBm { x0 } => SdeModel::standard_bm(x0.clone()),
            Self::Frozen { x0 } => SdeModel::frozen(x0.clone()),
            Self::DriftedBm { x0, drift, sigma } => {
                SdeModel::drifted_bm(x0.clone(), drift.clone(), Matrix::from_rows(sigma)?)?
            }
            Self::Linear {
                x0,
                drift_matrix,
                drift_offset,
                sigma,
            } => SdeModel::linear(
                x0.clone(),
                Matrix::from_rows(drift_matrix)?,
                drift_offset.clone(),
                Matrix::from_rows(sigma)?,
            )?,
            Self::SingularRadialDrift { x0 } => SdeModel::singular_radial_drift(x0.clone()),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub n_paths: usize,
    pub dt: f64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    pub seed: u64,
    #[serde(default)]
    pub qv: QvMode,
}

fn default_horizon() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ManifoldConfig {
    Hyperplane {
        normal: Vec<f64>,
        offset: f64,
    },
    Sphere {
        center: Vec<f64>,
        radius: f64,
    },
    /// `x_N = slope . x_bar + intercept`.
    LinearGraph {
        slope: Vec<f64>,
        #[serde(default)]
        intercept: f64,
    },
    /// `x_N = x_bar^T H x_bar / 2 + linear . x_bar + constant`.
    QuadraticGraph {
        hessian: Vec<Vec<f64>>,
        linear: Vec<f64>,
        #[serde(default)]
        constant: f64,
        bbox_half_width: f64,
    },
    SquareBoundary,
    CrossingLines,
}

impl ManifoldConfig {
    pub fn build(&self) -> occlab_core::Result<Manifold> {
        Ok(match self {
            Self::Hyperplane { normal, offset } => Manifold::hyperplane(normal.clone(), *offset)?,
            Self::Sphere { center, radius } => Manifold::sphere(center.clone(), *radius)?,
            Self::LinearGraph { slope, intercept } => {
                Manifold::graph(GraphSurface::linear(slope.clone(), *intercept))
            }
            Self::QuadraticGraph {
                hessian,
                linear,
                constant,
                bbox_half_width,
            } => {
                let func = GraphFunction::Quadratic {
                    hessian: Matrix::from_rows(hessian)?,
                    linear: linear.clone(),
                    constant: *constant,
                };
                Manifold::graph(GraphSurface::new(func, *bbox_half_width)?)
            }
            Self::SquareBoundary => Manifold::SquareBoundary,
            Self::CrossingLines => Manifold::CrossingLines,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LevelConfig {
    /// `phi(x) = x^index`, zero-based.
    Coordinate {
        index: usize,
    },
    SquaredNorm {
        center: Vec<f64>,
    },
    /// Needs a graph manifold.
    GraphDifference,
    /// Needs a leaf manifold.
    SignedDistance,
    /// Needs a leaf manifold; `inner` is the band width `eps_1`.
    GoodExtension {
        inner: f64,
    },
    SquareCorner,
    CrossingLines,
    CrossingSignedDistance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RegionConfig {
    #[default]
    Full,
    Empty,
    /// `{d(x, manifold) < width}`.
    TubularBand {
        width: f64,
    },
    LevelBand {
        lo: f64,
        hi: f64,
    },
    ComplementOfBall {
        center: Vec<f64>,
        radius: f64,
    },
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FoliationConfig {
    pub level: LevelConfig,
    #[serde(default)]
    pub region: RegionConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelGridConfig {
    pub start: f64,
    pub spacing: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    #[serde(default = "default_eps")]
    pub eps: Vec<f64>,
    /// Index `i` of the weighting `d<X^i>`, zero-based.
    #[serde(default)]
    pub component: usize,
    /// Explicit level grid shared by every bandwidth.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<LevelGridConfig>,
    /// Without `levels`: per-bandwidth grids with spacing `eps` covering this
    /// range, offset so that `phi(x0)` falls midway between two levels.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level_range: Option<[f64; 2]>,
}

fn default_eps() -> Vec<f64> {
    vec![1e-2]
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            eps: default_eps(),
            component: 0,
            levels: None,
            level_range: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TestFunction {
    One,
    Zero,
    /// `|x|`.
    Norm,
    Coordinate {
        index: usize,
    },
}

impl TestFunction {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Self::One => 1.0,
            Self::Zero => 0.0,
            Self::Norm => libm::sqrt(x.iter().map(|v| v * v).sum::<f64>()),
            Self::Coordinate { index } => x[*index],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ExperimentConfig {
    /// Transversal density of the foliation, with optional local-time probes,
    /// occupation-formula residual and control diagnostics.
    Density {
        #[serde(default)]
        probe_levels: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        test_function: Option<TestFunction>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bin_spacing: Option<f64>,
        /// Step refinement of the independent left-hand-side rerun.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        refine: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        windows: Option<usize>,
    },
    /// Transversal density against symmetric and geometric local times
    /// near a leaf manifold, using its good extension.
    LEqualsL { levels: Vec<f64>, inner: f64 },
    /// Graph against geometric local time for linear graphs `x_N = a . x_bar`.
    GraphScaling { slopes: Vec<Vec<f64>> },
    /// Both sides of the weighting conjecture for the configured graph.
    Conjecture,
    SingularSde {
        deltas: Vec<f64>,
        #[serde(default = "default_refine")]
        reference_refine: usize,
        #[serde(default = "default_checkpoints")]
        checkpoints: usize,
    },
    Integrability {
        profile: Profile,
        #[serde(default = "default_radius")]
        radius: f64,
        #[serde(default = "default_dims")]
        exponent_dims: Vec<usize>,
    },
}

fn default_refine() -> usize {
    4
}

fn default_checkpoints() -> usize {
    10
}

fn default_radius() -> f64 {
    1.0
}

fn default_dims() -> Vec<usize> {
    vec![2, 3]
}

impl ExperimentConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Density { .. } => "density",
            Self::LEqualsL { .. } => "l-equals-l",
            Self::GraphScaling { .. } => "graph-scaling",
            Self::Conjecture => "conjecture",
            Self::SingularSde { .. } => "singular-sde",
            Self::Integrability { .. } => "integrability",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GateName {
    MassConservation,
    LocalTimeOracle,
    BandwidthConsistency,
    AllZero,
    OccupationResidual,
    Nondegeneracy,
    LEqualsSymmetric,
    NegativeLevelsZero,
    LEqualsGeometric,
    GraphScaling,
    ZeroOccupation,
    QvIdentity,
    MonotoneOccupation,
    CertificateClosedForm,
    FinitePathIntegrals,
}

impl GateName {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::MassConservation => "mass-conservation",
            Self::LocalTimeOracle => "local-time-oracle",
            Self::BandwidthConsistency => "bandwidth-consistency",
            Self::AllZero => "all-zero",
            Self::OccupationResidual => "occupation-residual",
            Self::Nondegeneracy => "nondegeneracy",
            Self::LEqualsSymmetric => "l-equals-symmetric",
            Self::NegativeLevelsZero => "negative-levels-zero",
            Self::LEqualsGeometric => "l-equals-geometric",
            Self::GraphScaling => "graph-scaling",
            Self::ZeroOccupation => "zero-occupation",
            Self::QvIdentity => "qv-identity",
            Self::MonotoneOccupation => "monotone-occupation",
            Self::CertificateClosedForm => "certificate-closed-form",
            Self::FinitePathIntegrals => "finite-path-integrals",
        }
    }

    /// Experiment kind that implements this assertion.
    pub fn experiment(&self) -> &'static str {
        match self {
            Self::MassConservation
            | Self::LocalTimeOracle
            | Self::BandwidthConsistency
            | Self::AllZero
            | Self::OccupationResidual
            | Self::Nondegeneracy => "density",
            Self::LEqualsSymmetric | Self::NegativeLevelsZero | Self::LEqualsGeometric => {
                "l-equals-l"
            }
            Self::GraphScaling => "graph-scaling",
            Self::ZeroOccupation | Self::QvIdentity | Self::MonotoneOccupation => "singular-sde",
            Self::CertificateClosedForm | Self::FinitePathIntegrals => "integrability",
        }
    }

    /// Meaning of the tolerance value.
    pub fn tolerance_meaning(&self) -> &'static str {
        match self {
            Self::MassConservation | Self::OccupationResidual | Self::GraphScaling => {
                "relative error"
            }
            Self::LocalTimeOracle
            | Self::BandwidthConsistency
            | Self::LEqualsSymmetric
            | Self::LEqualsGeometric => "standard errors",
            Self::AllZero | Self::NegativeLevelsZero => "absolute bound",
            Self::Nondegeneracy => "floor",
            Self::ZeroOccupation => "fraction of the horizon",
            Self::QvIdentity => "absolute error",
            Self::MonotoneOccupation | Self::CertificateClosedForm | Self::FinitePathIntegrals => {
                "unused"
            }
        }
    }
}

impl fmt::Display for GateName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateConfig {
    pub name: GateName,
    #[serde(default)]
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub version: u32,
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub tags: Vec<String>,
    #[serde(default)]
    pub exploratory: bool,
    pub model: ModelConfig,
    pub sim: SimConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifold: Option<ManifoldConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub foliation: Option<FoliationConfig>,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    pub experiment: ExperimentConfig,
    #[serde(default)]
    pub gates: Vec<GateConfig>,
}

impl ScenarioConfig {
    pub fn gate(&self, name: GateName) -> Option<&GateConfig> {
        self.gates.iter().find(|g| g.name == name)
    }

    pub fn build_manifold(&self) -> occlab_core::Result<Option<Manifold>> {
        self.manifold
            .as_ref()
            .map(ManifoldConfig::build)
            .transpose()
    }

    /// Builds the configured foliation. Manifold-dependent pieces use the
    /// scenario manifold.
    pub fn build_foliation(&self) -> Result<Foliation, String> {
        let f = self
            .foliation
            .as_ref()
            .ok_or("the experiment needs a [foliation] table")?;
        let manifold = self.build_manifold().map_err(|e| e.to_string())?;
        let need = |what: &str| -> Result<Manifold, String> {
            manifold
                .clone()
                .ok_or_else(|| format!("{what} needs a [manifold] table"))
        };
        let dim = self.model.dim();
        let level = match &f.level {
            LevelConfig::Coordinate { index } => LevelFunction::Coordinate { index: *index, dim },
            LevelConfig::SquaredNorm { center } => LevelFunction::SquaredNorm {
                center: center.clone(),
            },
            LevelConfig::GraphDifference => match need("graph-difference")? {
                Manifold::Graph(g) => LevelFunction::GraphDifference(g),
                _ => return Err("graph-difference needs a graph manifold".into()),
            },
            LevelConfig::SignedDistance => LevelFunction::SignedDistance(need("signed-distance")?),
            LevelConfig::GoodExtension { inner } => LevelFunction::GoodExtension(
                GoodExtension::new(need("good-extension")?, *inner).map_err(|e| e.to_string())?,
            ),
            LevelConfig::SquareCorner => LevelFunction::SquareCorner,
            LevelConfig::CrossingLines => LevelFunction::CrossingLines,
            LevelConfig::CrossingSignedDistance => LevelFunction::CrossingSignedDistance,
        };
        let region = match &f.region {
            RegionConfig::Full => Region::Full,
            RegionConfig::Empty => Region::Empty,
            RegionConfig::TubularBand { width } => Region::TubularBand {
                manifold: need("tubular-band")?,
                width: *width,
            },
            RegionConfig::LevelBand { lo, hi } => Region::LevelBand { lo: *lo, hi: *hi },
            RegionConfig::ComplementOfBall { center, radius } => Region::ComplementOfBall {
                center: center.clone(),
                radius: *radius,
            },
            RegionConfig::Box { lo, hi } => Region::Box {
                lo: lo.clone(),
                hi: hi.clone(),
            },
        };
        Ok(Foliation::new(level, region))
    }

    /// Level grid used with bandwidth `eps`.
    pub fn level_grid(&self, eps: f64, phi_x0: f64) -> occlab_core::Result<LevelGrid> {
        if let Some(g) = self.estimator.levels {
            return LevelGrid::new(g.start, g.spacing, g.count);
        }
        // Two bandwidths of margin: every value of phi in the range meets two
        // band windows and the end levels, halved by the trapezoid rule, see
        // none of it.
        let [lo, hi] = self.estimator.level_range.unwrap_or([-1.0, 1.0]);
        let (lo, hi) = (lo - 2.0 * eps, hi + 2.0 * eps);
        let below = ((phi_x0 - lo) / eps).ceil().max(1.0);
        let start = phi_x0 + 0.5 * eps - below * eps;
        let count = ((hi - start) / eps).floor() as usize + 1;
        LevelGrid::new(start, eps, count)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_paths: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<LevelGridConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
}

impl Overrides {
    /// Later values win field by field.
    pub fn merge(self, later: Overrides) -> Overrides {
        Overrides {
            seed: later.seed.or(self.seed),
            n_paths: later.n_paths.or(self.n_paths),
            dt: later.dt.or(self.dt),
            eps: later.eps.or(self.eps),
            levels: later.levels.or(self.levels),
            out: later.out.or(self.out),
            jobs: later.jobs.or(self.jobs),
        }
    }

    pub fn apply(&self, cfg: &mut ScenarioConfig) {
        if let Some(s) = self.seed {
            cfg.sim.seed = s;
        }
        if let Some(n) = self.n_paths {
            cfg.sim.n_paths = n;
        }
        if let Some(dt) = self.dt {
            cfg.sim.dt = dt;
        }
        if let Some(eps) = &self.eps {
            cfg.estimator.eps = eps.clone();
        }
        if let Some(l) = self.levels {
            cfg.estimator.levels = Some(l);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    /// Built-in scenario name or path to a scenario file, relative to the
    /// run file.
    pub scenario: String,
    #[serde(default)]
    pub overrides: Overrides,
}

/// A scenario ready to validate, with the run-level settings that do not
/// enter the report.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub scenario: ScenarioConfig,
    pub overrides: Overrides,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Format {
    Toml,
    Json,
}

fn detect(origin: &str, text: &str) -> Format {
    if origin.ends_with(".json") || text.trim_start().starts_with('{') {
        Format::Json
    } else {
        Format::Toml
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before
        .rfind('\n')
        .map_or(before.len(), |p| before.len() - p - 1)
        + 1;
    (line, column)
}

fn toml_error(origin: &str, text: &str, e: toml::de::Error) -> ConfigError {
    let (line, column) = e.span().map_or((1, 1), |s| line_col(text, s.start));
    ConfigError::Parse {
        origin: origin.to_string(),
        line,
        column,
        message: e.message().trim().to_string(),
    }
}

fn json_error(origin: &str, e: serde_json::Error) -> ConfigError {
    ConfigError::Parse {
        origin: origin.to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

fn parse_value(origin: &str, text: &str, fmt: Format) -> Result<serde_json::Value, ConfigError> {
    match fmt {
        Format::Json => serde_json::from_str(text).map_err(|e| json_error(origin, e)),
        Format::Toml => {
            let v: toml::Value = toml::from_str(text).map_err(|e| toml_error(origin, text, e))?;
            serde_json::to_value(v).map_err(|e| ConfigError::Invalid(e.to_string()))
        }
    }
}

fn parse_typed<T: serde::de::DeserializeOwned>(
    origin: &str,
    text: &str,
    fmt: Format,
) -> Result<T, ConfigError> {
    match fmt {
        Format::Json => serde_json::from_str(text).map_err(|e| json_error(origin, e)),
        Format::Toml => toml::from_str(text).map_err(|e| toml_error(origin, text, e)),
    }
}

fn check_version(origin: &str, v: &serde_json::Value) -> Result<(), ConfigError> {
    match v.get("version").and_then(serde_json::Value::as_i64) {
        None => Err(ConfigError::MissingVersion {
            origin: origin.to_string(),
            expected: FORMAT_VERSION,
        }),
        Some(found) if found != FORMAT_VERSION as i64 => Err(ConfigError::Version {
            origin: origin.to_string(),
            found,
            expected: FORMAT_VERSION,
        }),
        Some(_) => Ok(()),
    }
}

/// Parses a scenario file's text.
pub fn parse_scenario(origin: &str, text: &str) -> Result<ScenarioConfig, ConfigError> {
    let fmt = detect(origin, text);
    let value = parse_value(origin, text, fmt)?;
    check_version(origin, &value)?;
    parse_typed(origin, text, fmt)
}

/// Resolves a scenario reference: a built-in name, a scenario file, a run
/// file, or a saved report.
pub fn load(reference: &str) -> Result<Loaded, ConfigError> {
    if let Some(text) = scenarios::builtin_source(reference) {
        return Ok(Loaded {
            scenario: parse_scenario(reference, text)?,
            overrides: Overrides::default(),
        });
    }
    let path = Path::new(reference);
    if !path.exists() {
        return Err(ConfigError::UnknownScenario(reference.to_string()));
    }
    load_file(path, 0)
}

fn load_file(path: &Path, depth: usize) -> Result<Loaded, ConfigError> {
    let origin = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let fmt = detect(&origin, &text);
    let value = parse_value(&origin, &text, fmt)?;

    // Saved report: rerun its embedded config.
    if value.get("input_hash").is_some() {
        let cfg = value
            .get("config")
            .ok_or_else(|| ConfigError::Invalid(format!("{origin}: report has no `config`")))?;
        check_version(&origin, cfg)?;
        let scenario: ScenarioConfig = serde_json::from_value(cfg.clone())
            .map_err(|e| ConfigError::Invalid(format!("{origin}: config: {e}")))?;
        return Ok(Loaded {
            scenario,
            overrides: Overrides::default(),
        });
    }

    check_version(&origin, &value)?;
    if value
        .get("scenario")
        .is_some_and(serde_json::Value::is_string)
    {
        if depth > 0 {
            return Err(ConfigError::Invalid(format!(
                "{origin}: a run file cannot reference another run file"
            )));
        }
        let run: RunConfig = parse_typed(&origin, &text, fmt)?;
        let mut base = if let Some(src) = scenarios::builtin_source(&run.scenario) {
            Loaded {
                scenario: parse_scenario(&run.scenario, src)?,
                overrides: Overrides::default(),
            }
        } else {
            let target = path.parent().unwrap_or(Path::new(".")).join(&run.scenario);
            if !target.exists() {
                return Err(ConfigError::UnknownScenario(run.scenario.clone()));
            }
            load_file(&target, depth + 1)?
        };
        base.overrides = base.overrides.merge(run.overrides);
        return Ok(base);
    }
    Ok(Loaded {
        scenario: parse_typed(&origin, &text, fmt)?,
        overrides: Overrides::default(),
    })
}
