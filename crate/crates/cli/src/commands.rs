use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use ris_ee::algorithms::{run_scheme, Scheme};
use ris_ee::channel::{channel_hash, dump_channel, load_channel, phase_seed, sample};
use ris_ee::experiments::{run_sweep_with_progress, write_aggregate_csv, write_trials_csv};
use ris_ee::model::{check_constraints, ConstraintSet, EvalResult, SystemParams};
use ris_ee::validation::{run_validation, Solvers};

use crate::config::{Config, ConfigError};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Precondition(String),
    #[error("validation failed: {0}")]
    PropertyFailure(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Runtime(_) => 1,
            CliError::Config(_) => 2,
            CliError::Precondition(_) => 3,
            CliError::PropertyFailure(_) => 4,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<ris_ee::Error> for CliError {
    fn from(e: ris_ee::Error) -> Self {
        use ris_ee::Error as E;
        match e {
            E::Precondition(_) => CliError::Precondition(e.to_string()),
            E::InvalidParameter { .. } | E::DimensionMismatch { .. } | E::NonFinite { .. } => {
                CliError::Config(e.to_string())
            }
            E::Io { .. } | E::Format { .. } => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunPaths {
    pub out: Option<PathBuf>,
    pub dump_channel: Option<PathBuf>,
    pub load_channel: Option<PathBuf>,
}

#[derive(Serialize)]
struct RunSummary<'a> {
    scheme: String,
    seed: u64,
    channel_hash: String,
    ris_elements: usize,
    tx_antennas: usize,
    rx_antennas: usize,
    params: &'a SystemParams,
    result: &'a EvalResult,
    tx_power_w: f64,
    iterations: usize,
    feasible: bool,
    phases: &'a [f64],
    beamformer: Vec<[f64; 2]>,
    combiner: Vec<[f64; 2]>,
}

/// One solve of `cfg.run.scheme` on one channel realization.
pub fn cmd_run(cfg: &Config, paths: &RunPaths, out: &mut dyn Write) -> Result<(), CliError> {
    let (channels, seed) = match &paths.load_channel {
        Some(path) => load_channel(path)?,
        None => (sample(&cfg.channel, cfg.run.seed)?, cfg.run.seed),
    };
    if let Some(path) = &paths.dump_channel {
        dump_channel(path, &channels, seed)?;
    }
    let coeffs = cfg.coefficients(channels.n_tx(), channels.n_rx())?;
    let params = cfg.params_for(&coeffs);
    let scheme = cfg.run.scheme;
    let outcome = run_scheme(
        scheme,
        &params,
        &channels,
        &coeffs,
        &cfg.solver,
        phase_seed(seed),
    )?;
    let set = if scheme.is_emf_aware() {
        ConstraintSet::EmfAware
    } else {
        ConstraintSet::NormOnly
    };
    let report = check_constraints(&params, &coeffs, &outcome.config, set);
    let hash = channel_hash(&channels);
    let eval = &outcome.eval;

    writeln!(out, "scheme             {scheme}")?;
    writeln!(out, "seed               {seed}")?;
    writeln!(
        out,
        "channel            N={} NT={} NR={} sha256:{hash}",
        channels.n_ris(),
        channels.n_tx(),
        channels.n_rx()
    )?;
    writeln!(
        out,
        "energy efficiency  {:.6e} bit/J",
        eval.ee_bits_per_joule
    )?;
    writeln!(out, "rate               {:.6e} bit/s", eval.rate_bps)?;
    writeln!(
        out,
        "tx power           {:.6e} W",
        outcome.config.tx_power_w
    )?;
    writeln!(
        out,
        "tx exposure        {:.6e} (budget {:.6e})",
        eval.tx_exposure, params.tx_exposure_budget
    )?;
    writeln!(
        out,
        "rx exposure        {:.6e} (budget {:.6e})",
        eval.rx_exposure, params.rx_exposure_budget
    )?;
    writeln!(out, "iterations         {}", outcome.iterations)?;
    writeln!(
        out,
        "feasible           {}",
        if report.is_feasible() { "yes" } else { "no" }
    )?;
    for v in &report.violations {
        writeln!(out, "  violated {:?} by {:.3e}", v.constraint, -v.slack)?;
    }

    if let Some(path) = &paths.out {
        let parts = |v: &nalgebra::DVector<num_complex::Complex64>| {
            v.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>()
        };
        let summary = RunSummary {
            scheme: scheme.to_string(),
            seed,
            channel_hash: hash,
            ris_elements: channels.n_ris(),
            tx_antennas: channels.n_tx(),
            rx_antennas: channels.n_rx(),
            params: &params,
            result: eval,
            tx_power_w: outcome.config.tx_power_w,
            iterations: outcome.iterations,
            feasible: report.is_feasible(),
            phases: &outcome.config.phases,
            beamformer: parts(&outcome.config.beamformer),
            combiner: parts(&outcome.config.combiner),
        };
        let json =
            serde_json::to_string_pretty(&summary).map_err(|e| CliError::Runtime(e.to_string()))?;
        std::fs::write(path, json + "\n")
            .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

/// Runs the configured sweep and writes `trials.csv` and `aggregate.csv`
/// into `dir`.
pub fn cmd_sweep(cfg: &Config, dir: &Path, out: &mut dyn Write) -> Result<(), CliError> {
    let spec = cfg.sweep_spec()?;
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))?;
    let mut io_error = None;
    let result = run_sweep_with_progress(&spec, |value, done| {
        if io_error.is_none() {
            let line = writeln!(out, "{} = {value}: {done} results", spec.axis);
            io_error = line.err();
        }
    })?;
    if let Some(e) = io_error {
        return Err(e.into());
    }
    let trials = dir.join("trials.csv");
    let aggregate = dir.join("aggregate.csv");
    write_trials_csv(&trials, &result.records)?;
    write_aggregate_csv(&aggregate, &result.table.rows)?;

    let skipped_schemes: Vec<Scheme> = {
        let mut s: Vec<Scheme> = result.table.skipped.iter().map(|t| t.scheme).collect();
        s.sort();
        s.dedup();
        s
    };
    if let Some(first) = result.table.skipped.first() {
        writeln!(
            out,
            "skipped {} scheme runs ({}): {}",
            result.table.skipped.len(),
            skipped_schemes
                .iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
                .join(", "),
            first.reason,
        )?;
    }
    writeln!(
        out,
        "wrote {} trial rows to {} and {} aggregate rows to {}",
        result.records.len(),
        trials.display(),
        result.table.rows.len(),
        aggregate.display()
    )?;
    Ok(())
}

/// Oracle property suite on `count` seeded instances per property.
pub fn cmd_validate(
    count: usize,
    seed: u64,
    solvers: &Solvers,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let report = run_validation(count, seed, solvers);
    if report.is_vacuous() {
        writeln!(out, "warning: count = 0, no instances checked")?;
    }
    let mut failed = Vec::new();
    for p in &report.properties {
        if p.passed() {
            writeln!(out, "PASS  {} ({} instances)", p.name, p.instances)?;
        } else {
            let seeds: Vec<String> = p.failures.iter().map(|s| s.to_string()).collect();
            writeln!(
                out,
                "FAIL  {} ({} of {} instances; seeds {})",
                p.name,
                p.failures.len(),
                p.instances,
                seeds.join(" ")
            )?;
            failed.push(p.name);
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::PropertyFailure(failed.join("; ")))
    }
}
