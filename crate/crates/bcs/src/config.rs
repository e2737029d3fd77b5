//! Run configuration: one TOML document with nested blocks, fully validated
//! before any computation starts. Unknown keys are rejected at every level.
//!
//! Defaults: `n_points` 256, `ell_max` 12, `tol` 1e-9, `mixing` 0.5. The
//! momentum cutoff defaults to `default_p_max` scaled by the potential's
//! length scale and can be overridden per run.
//!
//! Schema (all blocks after `potential` optional):
//!
//! ```toml
//! dimension = 2              # 2 or 3
//! mu = 1.0
//! command = "tc"             # optional guard: must match the subcommand
//!
//! [temperature]              # exactly one of the three forms
//! value = 0.1                # single temperature
//! # min = 0.05, max = 1.0, count = 20   uniform mesh, endpoints included
//! # list = [0.1, 0.2, 0.5]              explicit ascending mesh
//!
//! [potential]
//! kind = "gaussian"          # gaussian | two_gaussian | tabulated
//! strength = 2.0             # gaussian only
//! range = 1.0
//! # strengths = [1.5, -3.0]  two_gaussian only
//! # ranges = [3.0, 0.5]
//! # path = "vhat.csv"        tabulated only: rows "p,vhat", knots ascending
//! scale = 1.0                # optional multiplier on all strengths
//!
//! [grid]
//! n_points = 256
//! p_max = 8.0                # optional cutoff override
//!
//! [solver]
//! tol = 1e-9
//! max_iter = 10000
//! mixing = 0.5
//!
//! [sectors]
//! ell_max = 12
//!
//! [output]
//! dir = "out"                # overridden by --out
//!
//! [gap]                      # gap / rotationtest sector override
//! ell = 0                    # default: the dominant sector
//!
//! [sweep]
//! k_min = 3                  # fit points at T = T_c (1 - 2^-k)
//! k_max = 8
//!
//! [rotation]
//! n_radial = 32
//! n_angles = 64
//!
//! [weak_coupling]
//! lambda_scale = 1.0
//! ```

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{BcsError, Result};
use crate::gap::SolverOptions;
use crate::grid::{build_grid, default_p_max, Dimension, RadialGrid};
use crate::potentials::PotentialSpec;

fn config_err(msg: impl Into<String>) -> BcsError {
    BcsError::Config(msg.into())
}

/// Temperature selection: a single value, a uniform mesh, or an explicit
/// list. Exactly one form must be present.
#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TemperatureSpec {
    pub value: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub count: Option<usize>,
    pub list: Option<Vec<f64>>,
}

impl TemperatureSpec {
    fn validate(&self) -> Result<()> {
        let range_keys = [self.min.is_some(), self.max.is_some(), self.count.is_some()];
        let has_range = range_keys.iter().any(|&b| b);
        let forms = [self.value.is_some(), has_range, self.list.is_some()];
        if forms.iter().filter(|&&b| b).count() != 1 {
            return Err(config_err(
                "temperature: give exactly one of `value`, `min`/`max`/`count`, `list`",
            ));
        }
        if has_range && !range_keys.iter().all(|&b| b) {
            return Err(config_err(
                "temperature: mesh form needs all of `min`, `max`, `count`",
            ));
        }
        for t in self.mesh()? {
            if !(t.is_finite() && t > 0.0) {
                return Err(config_err(format!("temperature: T = {t} not positive")));
            }
        }
        Ok(())
    }

    /// The single temperature; errors when the config holds a mesh.
    pub fn single(&self) -> Result<f64> {
        self.value
            .ok_or_else(|| config_err("this command needs `temperature.value`"))
    }

    /// The temperature mesh, ascending; a single value is a one-point mesh.
    pub fn mesh(&self) -> Result<Vec<f64>> {
        if let Some(v) = self.value {
            return Ok(vec![v]);
        }
        if let Some(list) = &self.list {
            if list.is_empty() {
                return Err(config_err("temperature: empty `list`"));
            }
            if list.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(config_err("temperature: `list` must be strictly ascending"));
            }
            return Ok(list.clone());
        }
        let (min, max, count) = (
            self.min.unwrap_or(f64::NAN),
            self.max.unwrap_or(f64::NAN),
            self.count.unwrap_or(0),
        );
        if !(min.is_finite() && max.is_finite() && min < max) || count < 2 {
            return Err(config_err(format!(
                "temperature: need min < max and count >= 2, got min = {min}, max = {max}, count = {count}"
            )));
        }
        let step = (max - min) / (count - 1) as f64;
        Ok((0..count).map(|i| min + step * i as f64).collect())
    }
}

/// Potential family selector for the `[potential]` block.
#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKind {
    Gaussian,
    TwoGaussian,
    Tabulated,
}

/// The `[potential]` block. Which parameter keys are required depends on
/// `kind`; keys belonging to another kind are rejected.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    pub kind: PotentialKind,
    pub strength: Option<f64>,
    pub range: Option<f64>,
    pub strengths: Option<[f64; 2]>,
    pub ranges: Option<[f64; 2]>,
    pub path: Option<PathBuf>,
    /// Multiplier applied to all strengths (tabulated values included).
    pub scale: Option<f64>,
}

impl PotentialConfig {
    fn validate(&self) -> Result<()> {
        let allowed: &[&str] = match self.kind {
            PotentialKind::Gaussian => &["strength", "range"],
            PotentialKind::TwoGaussian => &["strengths", "ranges"],
            PotentialKind::Tabulated => &["path"],
        };
        let present = [
            ("strength", self.strength.is_some()),
            ("range", self.range.is_some()),
            ("strengths", self.strengths.is_some()),
            ("ranges", self.ranges.is_some()),
            ("path", self.path.is_some()),
        ];
        for (key, set) in present {
            let wanted = allowed.contains(&key);
            if wanted && !set {
                return Err(config_err(format!(
                    "potential: kind {:?} requires `{key}`",
                    self.kind
                )));
            }
            if !wanted && set {
                return Err(config_err(format!(
                    "potential: `{key}` does not apply to kind {:?}",
                    self.kind
                )));
            }
        }
        if let Some(s) = self.scale {
            if !(s.is_finite() && s > 0.0) {
                return Err(config_err(format!("potential: scale = {s}")));
            }
        }
        Ok(())
    }

    /// Build the potential, resolving a tabulated path against `base_dir`.
    fn build(&self, dimension: Dimension, base_dir: &Path) -> Result<PotentialSpec> {
        let spec = match self.kind {
            PotentialKind::Gaussian => PotentialSpec::gaussian(
                self.strength.unwrap_or(f64::NAN),
                self.range.unwrap_or(f64::NAN),
                dimension,
            ),
            PotentialKind::TwoGaussian => PotentialSpec::two_gaussian(
                self.strengths.unwrap_or([f64::NAN; 2]),
                self.ranges.unwrap_or([f64::NAN; 2]),
                dimension,
            ),
            PotentialKind::Tabulated => {
                let rel = self.path.as_ref().expect("validated above");
                let path = if rel.is_absolute() {
                    rel.clone()
                } else {
                    base_dir.join(rel)
                };
                let (momenta, values) = load_table(&path)?;
                PotentialSpec::tabulated(momenta, values, dimension)
            }
        };
        let spec = spec.map_err(|e| config_err(format!("potential: {e}")))?;
        match self.scale {
            Some(s) => spec.scaled(s).map_err(|e| config_err(format!("potential: {e}"))),
            None => Ok(spec),
        }
    }
}

/// Parse a two-column CSV of momentum knots and transform values. An
/// optional header line is skipped; blank lines are ignored.
fn load_table(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let text = fs::read_to_string(path)
        .map_err(|e| config_err(format!("potential table {}: {e}", path.display())))?;
    let mut momenta = Vec::new();
    let mut values = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',').map(str::trim);
        let pair = (
            fields.next().and_then(|s| s.parse::<f64>().ok()),
            fields.next().and_then(|s| s.parse::<f64>().ok()),
        );
        match pair {
            (Some(p), Some(v)) if fields.next().is_none() => {
                momenta.push(p);
                values.push(v);
            }
            _ if idx == 0 => continue,
            _ => {
                return Err(config_err(format!(
                    "potential table {}: line {} is not `p,vhat`",
                    path.display(),
                    idx + 1
                )))
            }
        }
    }
    Ok((momenta, values))
}

/// The `[grid]` block.
#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_n_points")]
    pub n_points: usize,
    /// Momentum cutoff override; the default grows with the Fermi momentum
    /// and shrinks with the potential's length scale.
    pub p_max: Option<f64>,
}

fn default_n_points() -> usize {
    256
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            n_points: default_n_points(),
            p_max: None,
        }
    }
}

/// The `[solver]` block, mirroring `SolverOptions`.
#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_mixing")]
    pub mixing: f64,
}

fn default_tol() -> f64 {
    1e-9
}

fn default_max_iter() -> usize {
    10_000
}

fn default_mixing() -> f64 {
    0.5
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: default_tol(),
            max_iter: default_max_iter(),
            mixing: default_mixing(),
        }
    }
}

/// The `[sectors]` block.
#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SectorsConfig {
    #[serde(default = "default_ell_max")]
    pub ell_max: i32,
}

fn default_ell_max() -> i32 {
    12
}

impl Default for SectorsConfig {
    fn default() -> Self {
        SectorsConfig {
            ell_max: default_ell_max(),
        }
    }
}

/// The `[output]` block.
#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
}

/// The `[gap]` block: sector override for gap-profile commands.
#[derive(Clone, Copy, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GapConfig {
    pub ell: Option<i32>,
}

/// The `[sweep]` block: dyadic exponent range for the scaling fit.
#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "default_k_min")]
    pub k_min: u32,
    #[serde(default = "default_k_max")]
    pub k_max: u32,
    pub ell: Option<i32>,
}

fn default_k_min() -> u32 {
    3
}

fn default_k_max() -> u32 {
    8
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            k_min: default_k_min(),
            k_max: default_k_max(),
            ell: None,
        }
    }
}

/// The `[rotation]` block: polar grid dimensions for the rotation sweep.
#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RotationConfig {
    #[serde(default = "default_n_radial")]
    pub n_radial: usize,
    #[serde(default = "default_n_angles")]
    pub n_angles: usize,
}

fn default_n_radial() -> usize {
    32
}

fn default_n_angles() -> usize {
    64
}

impl Default for RotationConfig {
    fn default() -> Self {
        RotationConfig {
            n_radial: default_n_radial(),
            n_angles: default_n_angles(),
        }
    }
}

/// The `[weak_coupling]` block.
#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct WeakCouplingConfig {
    #[serde(default = "default_lambda_scale")]
    pub lambda_scale: f64,
}

fn default_lambda_scale() -> f64 {
    1.0
}

impl Default for WeakCouplingConfig {
    fn default() -> Self {
        WeakCouplingConfig {
            lambda_scale: default_lambda_scale(),
        }
    }
}

/// A validated run configuration.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dimension: u8,
    pub mu: f64,
    /// Optional guard: when present, the invoked subcommand must match.
    pub command: Option<String>,
    pub temperature: Option<TemperatureSpec>,
    pub potential: PotentialConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub sectors: SectorsConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub gap: GapConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub rotation: RotationConfig,
    #[serde(default)]
    pub weak_coupling: WeakCouplingConfig,
}

/// A configuration together with its source text (for the manifest echo)
/// and source directory (for resolving relative table paths).
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub text: String,
    pub base_dir: PathBuf,
}

impl RunConfig {
    /// Parse and validate a TOML string; `base_dir` anchors relative paths.
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<RunConfig> {
        let config: RunConfig =
            toml::from_str(text).map_err(|e| config_err(format!("parse: {e}")))?;
        config.validate(base_dir)?;
        Ok(config)
    }

    /// Load a config file, keeping its text and directory.
    pub fn load(path: &Path) -> Result<LoadedConfig> {
        let text = fs::read_to_string(path)
            .map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let base_dir = path
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        let config = RunConfig::from_toml(&text, &base_dir)?;
        Ok(LoadedConfig {
            config,
            text,
            base_dir,
        })
    }

    fn validate(&self, base_dir: &Path) -> Result<()> {
        self.dimension_enum()?;
        if !self.mu.is_finite() {
            return Err(config_err(format!("mu = {} not finite", self.mu)));
        }
        if let Some(t) = &self.temperature {
            t.validate()?;
        }
        self.potential.validate()?;
        // Building the potential now surfaces bad parameters and unreadable
        // tables before any output directory is created.
        self.potential.build(self.dimension_enum()?, base_dir)?;
        if self.grid.n_points < 8 {
            return Err(config_err(format!(
                "grid: n_points = {} (need >= 8)",
                self.grid.n_points
            )));
        }
        if let Some(p) = self.grid.p_max {
            if !(p.is_finite() && p > 0.0) {
                return Err(config_err(format!("grid: p_max = {p}")));
            }
        }
        let s = &self.solver;
        if !(s.mixing > 0.0 && s.mixing <= 1.0) {
            return Err(config_err(format!("solver: mixing = {}", s.mixing)));
        }
        if !(s.tol.is_finite() && s.tol > 0.0) {
            return Err(config_err(format!("solver: tol = {}", s.tol)));
        }
        if s.max_iter == 0 {
            return Err(config_err("solver: max_iter = 0"));
        }
        if self.sectors.ell_max < 0 {
            return Err(config_err(format!(
                "sectors: ell_max = {}",
                self.sectors.ell_max
            )));
        }
        for (name, ell) in [("gap", self.gap.ell), ("sweep", self.sweep.ell)] {
            if let Some(l) = ell {
                if l < 0 || l % 2 != 0 || l > self.sectors.ell_max {
                    return Err(config_err(format!(
                        "{name}: ell = {l} is not an even sector within ell_max"
                    )));
                }
            }
        }
        if self.sweep.k_min > self.sweep.k_max {
            return Err(config_err(format!(
                "sweep: k_min = {} > k_max = {}",
                self.sweep.k_min, self.sweep.k_max
            )));
        }
        if !(self.weak_coupling.lambda_scale.is_finite() && self.weak_coupling.lambda_scale > 0.0)
        {
            return Err(config_err(format!(
                "weak_coupling: lambda_scale = {}",
                self.weak_coupling.lambda_scale
            )));
        }
        Ok(())
    }

    pub fn dimension_enum(&self) -> Result<Dimension> {
        match self.dimension {
            2 => Ok(Dimension::Two),
            3 => Ok(Dimension::Three),
            d => Err(config_err(format!("dimension = {d} (must be 2 or 3)"))),
        }
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            mixing: self.solver.mixing,
            tol: self.solver.tol,
            max_iter: self.solver.max_iter,
        }
    }

    /// The temperature block, or a config error naming what is missing.
    pub fn temperature_spec(&self) -> Result<&TemperatureSpec> {
        self.temperature
            .as_ref()
            .ok_or_else(|| config_err("this command needs a [temperature] block"))
    }
}

impl LoadedConfig {
    /// Build the configured potential.
    pub fn potential_spec(&self) -> Result<PotentialSpec> {
        self.config
            .potential
            .build(self.config.dimension_enum()?, &self.base_dir)
    }

    /// Build the production radial grid for this run.
    pub fn build_grid(&self, spec: &PotentialSpec) -> Result<Arc<RadialGrid>> {
        let p_max = self
            .config
            .grid
            .p_max
            .unwrap_or_else(|| default_p_max(self.config.mu, spec.length_scale()));
        build_grid(
            p_max,
            self.config.grid.n_points,
            self.config.mu,
            self.config.dimension_enum()?,
        )
    }
}
