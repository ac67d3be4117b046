//! Sectioned TOML configuration.
//!
//! Values are layered: built-in defaults, then the config file, then
//! `RIS_EE_<SECTION>_<KEY>` environment variables. Every resolved value keeps
//! its origin so validation errors point at a file line or a variable name.

use std::fmt;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Deserialize;
use toml::Spanned;

use ris_ee::algorithms::{AlternatingOptions, InitStrategy, Scheme};
use ris_ee::channel::{ChannelModel, Dims};
use ris_ee::experiments::{Scenario, SweepAxis, SweepSpec};
use ris_ee::model::{ExposureCoefficients, SystemParams};

pub const ENV_PREFIX: &str = "RIS_EE_";

const SECTIONS: [&str; 6] = ["system", "channel", "exposure", "solver", "sweep", "run"];

type Field<T> = Option<Spanned<T>>;

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawConfig {
    system: RawSystem,
    channel: RawChannel,
    exposure: RawExposure,
    solver: RawSolver,
    sweep: RawSweep,
    run: RawRun,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawSystem {
    bandwidth_hz: Field<f64>,
    path_loss_db: Field<f64>,
    noise_psd_dbm_per_hz: Field<f64>,
    amp_inefficiency: Field<f64>,
    static_power_w: Field<f64>,
    max_tx_power_w: Field<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawChannel {
    ris_elements: Field<u64>,
    tx_antennas: Field<u64>,
    rx_antennas: Field<u64>,
    h_mean_re: Field<f64>,
    h_mean_im: Field<f64>,
    g_mean_re: Field<f64>,
    g_mean_im: Field<f64>,
    scatter_variance: Field<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawExposure {
    c: Field<f64>,
    d: Field<f64>,
    c_vector: Field<Vec<f64>>,
    d_vector: Field<Vec<f64>>,
    budget_ratio: Field<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawSolver {
    rel_tol: Field<f64>,
    max_iters: Field<u64>,
    init: Field<String>,
    init_seed: Field<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawSweep {
    axis: Field<String>,
    values: Field<Vec<f64>>,
    schemes: Field<Vec<String>>,
    trials: Field<u32>,
    master_seed: Field<u64>,
    threads: Field<u16>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawRun {
    scheme: Field<String>,
    seed: Field<u64>,
}

/// Where a configuration value came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Origin {
    Default,
    File { path: PathBuf, line: usize },
    Env(String),
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Default => write!(f, "default"),
            Origin::File { path, line } => write!(f, "{}:{line}", path.display()),
            Origin::Env(var) => write!(f, "environment variable {var}"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{}: {source}", path.display())]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{origin}: {message}")]
    Syntax { origin: String, message: String },

    #[error("{origin}: [{section}] {key}: {message}")]
    Invalid {
        origin: Origin,
        section: &'static str,
        key: &'static str,
        message: String,
    },
}

enum Source {
    File { path: PathBuf, text: String },
    Env { var: String },
}

struct Layer {
    raw: RawConfig,
    source: Source,
}

impl Layer {
    fn origin(&self, span: std::ops::Range<usize>) -> Origin {
        match &self.source {
            Source::File { path, text } => Origin::File {
                path: path.clone(),
                line: text[..span.start.min(text.len())].matches('\n').count() + 1,
            },
            Source::Env { var } => Origin::Env(var.clone()),
        }
    }
}

struct Value<T> {
    value: T,
    origin: Origin,
    section: &'static str,
    key: &'static str,
}

impl<T> Value<T> {
    fn error(&self, message: impl Into<String>) -> ConfigError {
        ConfigError::Invalid {
            origin: self.origin.clone(),
            section: self.section,
            key: self.key,
            message: message.into(),
        }
    }

    fn check(self, ok: impl FnOnce(&T) -> bool, message: &str) -> Result<T, ConfigError> {
        if ok(&self.value) {
            Ok(self.value)
        } else {
            Err(self.error(message))
        }
    }
}

struct Layers(Vec<Layer>);

impl Layers {
    fn get<T: Clone>(
        &self,
        section: &'static str,
        key: &'static str,
        pick: impl Fn(&RawConfig) -> &Field<T>,
    ) -> Option<Value<T>> {
        self.0.iter().rev().find_map(|layer| {
            pick(&layer.raw).as_ref().map(|s| Value {
                value: s.get_ref().clone(),
                origin: layer.origin(s.span()),
                section,
                key,
            })
        })
    }

    fn or<T: Clone>(
        &self,
        section: &'static str,
        key: &'static str,
        default: T,
        pick: impl Fn(&RawConfig) -> &Field<T>,
    ) -> Value<T> {
        self.get(section, key, pick).unwrap_or(Value {
            value: default,
            origin: Origin::Default,
            section,
            key,
        })
    }
}

/// Per-antenna exposure coefficients as configured.
#[derive(Debug, Clone, PartialEq)]
pub enum CoeffSpec {
    /// `1 / antennas`
    Inverse,
    Scalar(f64),
    Vector(Vec<f64>),
}

impl CoeffSpec {
    pub fn build(&self, antennas: usize) -> Vec<f64> {
        match self {
            CoeffSpec::Inverse => vec![1.0 / antennas as f64; antennas],
            CoeffSpec::Scalar(c) => vec![*c; antennas],
            CoeffSpec::Vector(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSettings {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub schemes: Vec<Scheme>,
    pub trials: u32,
    pub master_seed: u64,
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub scheme: Scheme,
    pub seed: u64,
}

/// Fully resolved configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    /// Exposure budgets are zero here; see [`Config::params_for`].
    pub params: SystemParams,
    pub channel: ChannelModel,
    pub tx_coeffs: CoeffSpec,
    pub rx_coeffs: CoeffSpec,
    /// `P_q / mean(c)`, also used for `P_w / mean(d)`.
    pub budget_ratio: f64,
    pub solver: AlternatingOptions,
    pub sweep: SweepSettings,
    pub run: RunSettings,
}

impl Default for Config {
    fn default() -> Self {
        Config::resolve(&Layers(Vec::new())).expect("built-in defaults are valid")
    }
}

impl Config {
    /// Loads the optional file and applies `RIS_EE_*` variables from `env`.
    pub fn load(
        path: Option<&Path>,
        env: impl IntoIterator<Item = (String, String)>,
    ) -> Result<Self, ConfigError> {
        let mut layers = Vec::new();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
                path: path.to_path_buf(),
                source,
            })?;
            layers.push(file_layer(path, text)?);
        }
        let mut vars: Vec<(String, String)> = env
            .into_iter()
            .filter(|(k, _)| k.starts_with(ENV_PREFIX))
            .collect();
        vars.sort();
        for (var, value) in vars {
            layers.push(env_layer(&var, &value)?);
        }
        Config::resolve(&Layers(layers))
    }

    /// Parses config text; `path` is only used in messages.
    pub fn parse(path: &Path, text: &str) -> Result<Self, ConfigError> {
        Config::resolve(&Layers(vec![file_layer(path, text.to_string())?]))
    }

    fn resolve(l: &Layers) -> Result<Self, ConfigError> {
        let defaults = SystemParams::default();
        let positive = |v: &f64| v.is_finite() && *v > 0.0;
        let finite = |v: &f64| v.is_finite();
        let params = SystemParams {
            bandwidth_hz: l
                .or("system", "bandwidth_hz", defaults.bandwidth_hz, |r| {
                    &r.system.bandwidth_hz
                })
                .check(positive, "must be finite and > 0")?,
            path_loss_db: l
                .or("system", "path_loss_db", defaults.path_loss_db, |r| {
                    &r.system.path_loss_db
                })
                .check(finite, "must be finite")?,
            noise_psd_dbm_per_hz: l
                .or(
                    "system",
                    "noise_psd_dbm_per_hz",
                    defaults.noise_psd_dbm_per_hz,
                    |r| &r.system.noise_psd_dbm_per_hz,
                )
                .check(finite, "must be finite")?,
            amp_inefficiency: l
                .or(
                    "system",
                    "amp_inefficiency",
                    defaults.amp_inefficiency,
                    |r| &r.system.amp_inefficiency,
                )
                .check(|v| v.is_finite() && *v >= 1.0, "must be finite and >= 1")?,
            static_power_w: l
                .or("system", "static_power_w", defaults.static_power_w, |r| {
                    &r.system.static_power_w
                })
                .check(positive, "must be finite and > 0")?,
            max_tx_power_w: l
                .or("system", "max_tx_power_w", defaults.max_tx_power_w, |r| {
                    &r.system.max_tx_power_w
                })
                .check(positive, "must be finite and > 0")?,
            tx_exposure_budget: 0.0,
            rx_exposure_budget: 0.0,
        };

        let base = ChannelModel::default();
        let count = |key: &'static str, default: usize, pick: fn(&RawConfig) -> &Field<u64>| {
            l.or("channel", key, default as u64, pick)
                .check(|n| *n >= 1, "must be >= 1")
                .map(|n| n as usize)
        };
        let dims = Dims::new(
            count("ris_elements", base.dims.ris_elements, |r| {
                &r.channel.ris_elements
            })?,
            count("tx_antennas", base.dims.tx_antennas, |r| {
                &r.channel.tx_antennas
            })?,
            count("rx_antennas", base.dims.rx_antennas, |r| {
                &r.channel.rx_antennas
            })?,
        );
        let part = |key: &'static str, default: f64, pick: fn(&RawConfig) -> &Field<f64>| {
            l.or("channel", key, default, pick)
                .check(finite, "must be finite")
        };
        let channel = ChannelModel {
            mean_h: Complex64::new(
                part("h_mean_re", base.mean_h.re, |r| &r.channel.h_mean_re)?,
                part("h_mean_im", base.mean_h.im, |r| &r.channel.h_mean_im)?,
            ),
            mean_g: Complex64::new(
                part("g_mean_re", base.mean_g.re, |r| &r.channel.g_mean_re)?,
                part("g_mean_im", base.mean_g.im, |r| &r.channel.g_mean_im)?,
            ),
            scatter_variance: l
                .or("channel", "scatter_variance", base.scatter_variance, |r| {
                    &r.channel.scatter_variance
                })
                .check(|v| v.is_finite() && *v >= 0.0, "must be finite and >= 0")?,
            dims,
        };

        let tx_coeffs = coeff_spec(
            l,
            ("c", |r| &r.exposure.c),
            ("c_vector", |r| &r.exposure.c_vector),
            dims.tx_antennas,
            "tx_antennas",
        )?;
        let rx_coeffs = coeff_spec(
            l,
            ("d", |r| &r.exposure.d),
            ("d_vector", |r| &r.exposure.d_vector),
            dims.rx_antennas,
            "rx_antennas",
        )?;
        let budget_ratio = l
            .or("exposure", "budget_ratio", 0.85, |r| {
                &r.exposure.budget_ratio
            })
            .check(|v| v.is_finite() && *v >= 0.0, "must be finite and >= 0")?;

        let solver_defaults = AlternatingOptions::default();
        let init_seed = l
            .or("solver", "init_seed", 0, |r| &r.solver.init_seed)
            .value;
        let init = l.or("solver", "init", "uniform".to_string(), |r| &r.solver.init);
        let init = match init.value.as_str() {
            "uniform" => InitStrategy::UniformFeasible,
            "random" => InitStrategy::RandomFeasible(init_seed),
            _ => return Err(init.error("expected \"uniform\" or \"random\"")),
        };
        let solver = AlternatingOptions {
            rel_tol: l
                .or("solver", "rel_tol", solver_defaults.rel_tol, |r| {
                    &r.solver.rel_tol
                })
                .check(|v| *v > 0.0 && *v < 1.0, "must lie in (0, 1)")?,
            max_iters: l
                .or(
                    "solver",
                    "max_iters",
                    solver_defaults.max_iters as u64,
                    |r| &r.solver.max_iters,
                )
                .check(|n| *n >= 1, "must be >= 1")? as usize,
            init,
        };

        let axis = l.or("sweep", "axis", "ris_elements".to_string(), |r| {
            &r.sweep.axis
        });
        let axis = axis
            .value
            .parse::<SweepAxis>()
            .map_err(|_| axis.error("expected \"ris_elements\" or \"budget_ratio\""))?;
        let default_values = match axis {
            SweepAxis::RisElements => vec![20.0, 40.0, 60.0, 80.0, 100.0],
            SweepAxis::BudgetRatio => (1..=7).map(|k| 0.2 * k as f64).collect(),
        };
        let values = l
            .or("sweep", "values", default_values, |r| &r.sweep.values)
            .check(
                |v| !v.is_empty() && v.windows(2).all(|w| w[0] < w[1]),
                "must be non-empty and strictly increasing",
            )?;
        let bad_value = |v: &f64| match axis {
            SweepAxis::RisElements => !(*v >= 1.0 && v.fract() == 0.0),
            SweepAxis::BudgetRatio => !(v.is_finite() && *v >= 0.0),
        };
        if values.iter().any(bad_value) {
            let v = l.get("sweep", "values", |r| &r.sweep.values).unwrap();
            return Err(v.error(match axis {
                SweepAxis::RisElements => "RIS sizes must be positive integers",
                SweepAxis::BudgetRatio => "budget ratios must be finite and >= 0",
            }));
        }
        let schemes = l.or(
            "sweep",
            "schemes",
            Scheme::ALL.iter().map(|s| s.to_string()).collect(),
            |r| &r.sweep.schemes,
        );
        let parsed: Result<Vec<Scheme>, _> = schemes.value.iter().map(|s| s.parse()).collect();
        let schemes = match parsed {
            Ok(list) if !list.is_empty() => list,
            Ok(_) => return Err(schemes.error("need at least one scheme")),
            Err(e) => return Err(schemes.error(e.to_string())),
        };
        let sweep = SweepSettings {
            axis,
            values,
            schemes,
            trials: l
                .or("sweep", "trials", 100, |r| &r.sweep.trials)
                .check(|n| *n >= 1, "must be >= 1")?,
            master_seed: l
                .or("sweep", "master_seed", 1, |r| &r.sweep.master_seed)
                .value,
            threads: match l.or("sweep", "threads", 0, |r| &r.sweep.threads).value {
                0 => None,
                k => Some(usize::from(k)),
            },
        };

        let scheme = l.or("run", "scheme", "a".to_string(), |r| &r.run.scheme);
        let run = RunSettings {
            scheme: scheme
                .value
                .parse()
                .map_err(|e: ris_ee::Error| scheme.error(e.to_string()))?,
            seed: l.or("run", "seed", 1, |r| &r.run.seed).value,
        };

        Ok(Config {
            params,
            channel,
            tx_coeffs,
            rx_coeffs,
            budget_ratio,
            solver,
            sweep,
            run,
        })
    }

    pub fn coefficients(&self, n_tx: usize, n_rx: usize) -> ris_ee::Result<ExposureCoefficients> {
        ExposureCoefficients::new(self.tx_coeffs.build(n_tx), self.rx_coeffs.build(n_rx))
    }

    /// System parameters with budgets `ratio · mean(c)` and `ratio · mean(d)`.
    pub fn params_for(&self, coeffs: &ExposureCoefficients) -> SystemParams {
        SystemParams {
            tx_exposure_budget: self.budget_ratio * coeffs.tx_mean(),
            rx_exposure_budget: self.budget_ratio * coeffs.rx_mean(),
            ..self.params
        }
    }

    pub fn sweep_spec(&self) -> ris_ee::Result<SweepSpec> {
        let dims = self.channel.dims;
        let scenario = Scenario {
            params: self.params,
            channel: self.channel,
            coeffs: self.coefficients(dims.tx_antennas, dims.rx_antennas)?,
            opts: self.solver,
        };
        Ok(SweepSpec {
            axis: self.sweep.axis,
            axis_values: self.sweep.values.clone(),
            fixed: match self.sweep.axis {
                SweepAxis::RisElements => self.budget_ratio,
                SweepAxis::BudgetRatio => dims.ris_elements as f64,
            },
            schemes: self.sweep.schemes.clone(),
            trials: self.sweep.trials,
            master_seed: self.sweep.master_seed,
            scenario,
            threads: self.sweep.threads,
        })
    }
}

type ScalarPick = fn(&RawConfig) -> &Field<f64>;
type VectorPick = fn(&RawConfig) -> &Field<Vec<f64>>;

fn coeff_spec(
    l: &Layers,
    (scalar_key, scalar): (&'static str, ScalarPick),
    (vector_key, vector): (&'static str, VectorPick),
    antennas: usize,
    antennas_key: &str,
) -> Result<CoeffSpec, ConfigError> {
    let positive = |v: &f64| v.is_finite() && *v > 0.0;
    match (
        l.get("exposure", scalar_key, scalar),
        l.get("exposure", vector_key, vector),
    ) {
        (Some(_), Some(v)) => Err(v.error(format!("conflicts with `{scalar_key}`; set only one"))),
        (Some(c), None) => Ok(CoeffSpec::Scalar(
            c.check(positive, "must be finite and > 0")?,
        )),
        (None, Some(v)) => {
            if v.value.len() != antennas {
                let message = format!(
                    "has {} entries but {antennas_key} = {antennas}",
                    v.value.len()
                );
                return Err(v.error(message));
            }
            Ok(CoeffSpec::Vector(v.check(
                |xs| xs.iter().all(positive),
                "entries must be finite and > 0",
            )?))
        }
        (None, None) => Ok(CoeffSpec::Inverse),
    }
}

fn file_layer(path: &Path, text: String) -> Result<Layer, ConfigError> {
    let raw: RawConfig = toml::from_str(&text).map_err(|e| ConfigError::Syntax {
        origin: path.display().to_string(),
        message: e.to_string().trim_end().to_string(),
    })?;
    Ok(Layer {
        raw,
        source: Source::File {
            path: path.to_path_buf(),
            text,
        },
    })
}

/// `RIS_EE_SWEEP_MASTER_SEED=7` becomes `[sweep] master_seed = 7`. Values
/// that are not valid TOML are taken as strings.
fn env_layer(var: &str, value: &str) -> Result<Layer, ConfigError> {
    let syntax = |message: String| ConfigError::Syntax {
        origin: format!("environment variable {var}"),
        message,
    };
    let name = var[ENV_PREFIX.len()..].to_ascii_lowercase();
    let (section, key) = SECTIONS
        .iter()
        .find_map(|s| name.strip_prefix(s)?.strip_prefix('_').map(|k| (*s, k)))
        .ok_or_else(|| {
            syntax(format!(
                "expected {ENV_PREFIX}<SECTION>_<KEY> with SECTION one of {}",
                SECTIONS.join(", ").to_ascii_uppercase()
            ))
        })?;
    let parse = |v: &str| toml::from_str::<RawConfig>(&format!("[{section}]\n{key} = {v}\n"));
    let raw = match toml::from_str::<toml::Table>(&format!("x = {value}")) {
        Ok(_) => parse(value),
        Err(_) => parse(&toml::Value::String(value.to_string()).to_string()),
    }
    .map_err(|e| syntax(e.message().to_string()))?;
    Ok(Layer {
        raw,
        source: Source::Env {
            var: var.to_string(),
        },
    })
}
