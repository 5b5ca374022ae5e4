//! Structured-text run configuration: TOML sections with unknown keys
//! rejected, parse errors carrying line numbers, and validation messages
//! that name the violated invariant.

use serde::{Deserialize, Serialize};

use crate::compat::InitialDataSpec;
use crate::grid::BoxGrid;
use crate::integrators::{FlowParams, RenormalizePolicy, Scheme};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl std::fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainConfig,
    pub initial_data: InitialDataConfig,
    pub flow: FlowConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub dims: usize,
    /// Same node count on every axis.
    pub nodes_per_axis: usize,
}

/// Initial-data section; exactly one family with its own parameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialDataConfig {
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitudes: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode_count: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blend_width: Option<f64>,
}

fn default_fp_tol() -> f64 {
    1e-12
}
fn default_fp_max_iters() -> usize {
    200
}
fn default_cfl_constant() -> f64 {
    0.25
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    #[serde(default)]
    pub eps: f64,
    pub scheme: String,
    pub dt: f64,
    pub t_final: f64,
    #[serde(default = "default_fp_tol")]
    pub fp_tol: f64,
    #[serde(default = "default_fp_max_iters")]
    pub fp_max_iters: usize,
    /// Absent means the scheme-dependent default policy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub renormalize: Option<bool>,
    #[serde(default = "default_cfl_constant")]
    pub cfl_constant: f64,
    #[serde(default)]
    pub override_cfl: bool,
}

fn default_out_dir() -> String {
    "out".into()
}
fn default_monitor_stride() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out_dir")]
    pub directory: String,
    #[serde(default = "default_monitor_stride")]
    pub monitor_stride: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { directory: default_out_dir(), monitor_stride: default_monitor_stride() }
    }
}

/// Parameters for the experiment subcommands; all optional with defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Optional selector echo; the subcommand decides what runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_list: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_sizes: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_factor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_long: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_stride: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation_times: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compat_order: Option<usize>,
}

/// Typed, validated form of a run configuration.
#[derive(Debug, Clone)]
pub struct ValidatedRun {
    pub grid: BoxGrid,
    pub initial_data: InitialDataSpec,
    pub params: FlowParams,
    pub t_final: f64,
    pub monitor_stride: usize,
    pub out_dir: String,
    pub experiment: ExperimentConfig,
}

const KNOWN_KINDS: &[&str] = &["simulate", "check-compat", "sweep-eps", "converge", "longrun"];

impl RunConfig {
    /// Full semantic validation; collects every violated invariant.
    pub fn validated(&self) -> Result<ValidatedRun, ConfigErrors> {
        let mut errors: Vec<ConfigError> = Vec::new();
        let mut err = |message: String| errors.push(ConfigError { line: None, message });

        if !(1..=3).contains(&self.domain.dims) {
            err(format!("grid dimension must be 1, 2, or 3 (got {})", self.domain.dims));
        }
        if self.domain.nodes_per_axis < 3 {
            err(format!(
                "grid needs at least 3 nodes per axis (got {})",
                self.domain.nodes_per_axis
            ));
        }

        let initial_data = match self.initial_data.to_spec() {
            Ok(spec) => {
                if let Err(e) = spec.validate() {
                    err(e.to_string());
                }
                Some(spec)
            }
            Err(msg) => {
                err(msg);
                None
            }
        };

        let scheme = match self.flow.scheme.as_str() {
            "rk4_projected" => Some(Scheme::Rk4Projected),
            "implicit_midpoint" => Some(Scheme::ImplicitMidpoint),
            other => {
                err(format!(
                    "unknown scheme \"{other}\" (expected rk4_projected or implicit_midpoint)"
                ));
                None
            }
        };

        if !(0.0..=1.0).contains(&self.flow.eps) {
            err("eps must lie in [0,1]".into());
        }
        if !(self.flow.dt > 0.0) || !self.flow.dt.is_finite() {
            err(format!("dt must be positive (got {})", self.flow.dt));
        }
        if !(self.flow.t_final > 0.0) || !self.flow.t_final.is_finite() {
            err(format!("t_final must be positive (got {})", self.flow.t_final));
        }
        if !(self.flow.fp_tol > 0.0) {
            err(format!("fp_tol must be positive (got {})", self.flow.fp_tol));
        }
        if self.flow.fp_max_iters == 0 {
            err("fp_max_iters must be at least 1".into());
        }
        if self.output.monitor_stride == 0 {
            err("monitor_stride must be at least 1".into());
        }

        // CFL invariant, checked against the configured grid spacing.
        if (1..=3).contains(&self.domain.dims) && self.domain.nodes_per_axis >= 3 {
            let h = 1.0 / (self.domain.nodes_per_axis - 1) as f64;
            let limit = self.flow.cfl_constant * h * h;
            if self.flow.dt > limit && !self.flow.override_cfl && self.flow.dt.is_finite() {
                err(format!(
                    "dt must satisfy dt <= cfl_constant * h^2 (dt = {:.3e}, limit = {:.3e}); \
                     set override_cfl = true to run anyway",
                    self.flow.dt, limit
                ));
            }
        }

        if let Some(exp) = &self.experiment {
            if let Some(kind) = &exp.kind {
                if !KNOWN_KINDS.contains(&kind.as_str()) {
                    err(format!(
                        "unknown experiment kind \"{kind}\" (expected one of {})",
                        KNOWN_KINDS.join(", ")
                    ));
                }
            }
            if let Some(list) = &exp.eps_list {
                let descending = list.windows(2).all(|w| w[0] > w[1]);
                if list.is_empty() || !descending || list.last() != Some(&0.0) {
                    err("eps_list must be sorted strictly descending and end with 0".into());
                }
                if list.iter().any(|e| !(0.0..=1.0).contains(e)) {
                    err("eps must lie in [0,1]".into());
                }
            }
            if let Some(sizes) = &exp.grid_sizes {
                if sizes.iter().any(|&n| n < 3) {
                    err("grid_sizes entries need at least 3 nodes per axis".into());
                }
            }
        }

        if !errors.is_empty() {
            return Err(ConfigErrors(errors));
        }

        let grid = BoxGrid::new_uniform(self.domain.dims, self.domain.nodes_per_axis)
            .expect("validated above");
        let mut params = FlowParams::new(scheme.expect("validated"), self.flow.eps, self.flow.dt);
        params.fp_tol = self.flow.fp_tol;
        params.fp_max_iters = self.flow.fp_max_iters;
        params.renormalize = match self.flow.renormalize {
            None => RenormalizePolicy::Auto,
            Some(true) => RenormalizePolicy::On,
            Some(false) => RenormalizePolicy::Off,
        };
        params.cfl_constant = self.flow.cfl_constant;
        params.override_cfl = self.flow.override_cfl;

        Ok(ValidatedRun {
            grid,
            initial_data: initial_data.expect("validated"),
            params,
            t_final: self.flow.t_final,
            monitor_stride: self.output.monitor_stride,
            out_dir: self.output.directory.clone(),
            experiment: self.experiment.clone().unwrap_or_default(),
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

impl InitialDataConfig {
    fn to_spec(&self) -> Result<InitialDataSpec, String> {
        match self.family.as_str() {
            "mirror_symmetric_profile" => {
                for (key, set) in [
                    ("amplitude", self.amplitude.is_some()),
                    ("mode_count", self.mode_count.is_some()),
                    ("blend_width", self.blend_width.is_some()),
                ] {
                    if set {
                        return Err(format!(
                            "key \"{key}\" does not apply to family mirror_symmetric_profile"
                        ));
                    }
                }
                let amplitudes = self
                    .amplitudes
                    .clone()
                    .ok_or("mirror_symmetric_profile requires \"amplitudes\"")?;
                Ok(InitialDataSpec::MirrorSymmetricProfile { amplitudes })
            }
            "constant_near_boundary" => {
                if self.amplitudes.is_some() {
                    return Err(
                        "key \"amplitudes\" does not apply to family constant_near_boundary"
                            .into(),
                    );
                }
                let amplitude =
                    self.amplitude.ok_or("constant_near_boundary requires \"amplitude\"")?;
                let blend_width =
                    self.blend_width.ok_or("constant_near_boundary requires \"blend_width\"")?;
                Ok(InitialDataSpec::ConstantNearBoundary {
                    amplitude,
                    mode_count: self.mode_count.unwrap_or(0),
                    blend_width,
                })
            }
            other => Err(format!(
                "unknown initial-data family \"{other}\" \
                 (expected mirror_symmetric_profile or constant_near_boundary)"
            )),
        }
    }
}

/// Parse and validate a configuration. Syntax errors carry the line they
/// occurred on; semantic errors name the violated invariant and are all
/// collected before reporting.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigErrors> {
    let config: RunConfig = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|span| text[..span.start.min(text.len())].lines().count().max(1));
        ConfigErrors(vec![ConfigError { line, message: e.message().to_string() }])
    })?;
    config.validated()?;
    Ok(config)
}
