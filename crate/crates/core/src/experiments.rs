//! Monte Carlo sweeps over the exposure budget ratio or the RIS size.
//!
//! Trial `t` uses channel seed `trial_seed(master_seed, t)` at every axis
//! value and for every scheme, so schemes are compared on identical
//! channels and neighbouring axis values share their random draws (a
//! smaller RIS is a prefix of a larger one). Work items run on a rayon pool;
//! results are collected in index order, so the thread count never changes
//! the output.

use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::algorithms::{run_scheme, AlternatingOptions, Scheme};
use crate::channel::{channel_hash, phase_seed, sample, trial_seed, ChannelModel, Dims};
use crate::error::{Error, Result};
use crate::model::{ExposureCoefficients, SystemParams};

pub const TRIALS_HEADER: [&str; 13] = [
    "scheme",
    "axis",
    "axis_value",
    "trial",
    "seed",
    "channel_hash",
    "ee_bpj",
    "rate_bps",
    "tx_exposure",
    "rx_exposure",
    "tx_power_w",
    "iterations",
    "wall_time_s",
];

pub const AGGREGATE_HEADER: [&str; 10] = [
    "scheme",
    "axis",
    "axis_value",
    "trials",
    "mean_ee_bpj",
    "se_ee_bpj",
    "mean_tx_exposure",
    "se_tx_exposure",
    "mean_rx_exposure",
    "se_rx_exposure",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepAxis {
    /// `P_q / c` (and `P_w / d`), at a fixed number of RIS elements.
    BudgetRatio,
    /// Number of RIS elements, at a fixed budget ratio.
    RisElements,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::BudgetRatio => "budget_ratio",
            SweepAxis::RisElements => "ris_elements",
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "budget_ratio" => Ok(SweepAxis::BudgetRatio),
            "ris_elements" => Ok(SweepAxis::RisElements),
            other => Err(Error::invalid(
                "axis",
                format!("unknown axis `{other}` (expected budget_ratio or ris_elements)"),
            )),
        }
    }
}

/// Everything about a trial except the swept quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    /// Exposure budgets in here are overwritten from the budget ratio.
    pub params: SystemParams,
    /// `dims.ris_elements` is overwritten when sweeping the RIS size.
    pub channel: ChannelModel,
    pub coeffs: ExposureCoefficients,
    pub opts: AlternatingOptions,
}

impl Scenario {
    /// Default link with isotropic coefficients `1/N_T`, `1/N_R`.
    pub fn isotropic(
        params: SystemParams,
        channel: ChannelModel,
        opts: AlternatingOptions,
    ) -> Result<Self> {
        let Dims {
            tx_antennas: nt,
            rx_antennas: nr,
            ..
        } = channel.dims;
        let coeffs = ExposureCoefficients::isotropic(nt, 1.0 / nt as f64, nr, 1.0 / nr as f64)?;
        Ok(Scenario {
            params,
            channel,
            coeffs,
            opts,
        })
    }

    /// Budgets `P_q = ratio · mean(c)` and `P_w = ratio · mean(d)`.
    pub fn with_budget_ratio(&self, ratio: f64) -> SystemParams {
        SystemParams {
            tx_exposure_budget: ratio * self.coeffs.tx_mean(),
            rx_exposure_budget: ratio * self.coeffs.rx_mean(),
            ..self.params
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub axis_values: Vec<f64>,
    /// Budget ratio when sweeping RIS size, RIS size when sweeping the ratio.
    pub fixed: f64,
    pub schemes: Vec<Scheme>,
    pub trials: u32,
    pub master_seed: u64,
    pub scenario: Scenario,
    /// Worker count; `None` uses rayon's default.
    pub threads: Option<usize>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.axis_values.is_empty() {
            return Err(Error::invalid("axis_values", "need at least one value"));
        }
        if !self.axis_values.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::invalid("axis_values", "must be strictly increasing"));
        }
        if self.trials == 0 {
            return Err(Error::invalid("trials", "must be >= 1"));
        }
        if self.schemes.is_empty() {
            return Err(Error::invalid("schemes", "need at least one scheme"));
        }
        let sizes: Vec<f64> = match self.axis {
            SweepAxis::RisElements => self.axis_values.clone(),
            SweepAxis::BudgetRatio => vec![self.fixed],
        };
        if sizes.iter().any(|n| !(*n >= 1.0 && n.fract() == 0.0)) {
            return Err(Error::invalid("ris_elements", "must be positive integers"));
        }
        let ratios: Vec<f64> = match self.axis {
            SweepAxis::BudgetRatio => self.axis_values.clone(),
            SweepAxis::RisElements => vec![self.fixed],
        };
        if ratios.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(Error::invalid("budget_ratio", "must be finite and >= 0"));
        }
        self.scenario.params.validate()?;
        self.scenario.opts.validate()?;
        self.scenario.channel.validate()
    }

    /// `(ris_elements, budget_ratio)` at one axis value.
    fn point(&self, axis_value: f64) -> (usize, f64) {
        match self.axis {
            SweepAxis::BudgetRatio => (self.fixed as usize, axis_value),
            SweepAxis::RisElements => (axis_value as usize, self.fixed),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub scheme: Scheme,
    pub axis: SweepAxis,
    pub axis_value: f64,
    pub trial: u32,
    pub seed: u64,
    pub channel_hash: String,
    pub ee_bpj: f64,
    pub rate_bps: f64,
    pub tx_exposure: f64,
    pub rx_exposure: f64,
    pub tx_power_w: f64,
    pub iterations: u64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub scheme: Scheme,
    pub axis: SweepAxis,
    pub axis_value: f64,
    pub trials: u64,
    pub mean_ee_bpj: f64,
    pub se_ee_bpj: f64,
    pub mean_tx_exposure: f64,
    pub se_tx_exposure: f64,
    pub mean_rx_exposure: f64,
    pub se_rx_exposure: f64,
}

/// A trial/scheme combination that failed and was left out of the table.
#[derive(Debug, Clone, PartialEq)]
pub struct SkippedTrial {
    pub scheme: Scheme,
    pub axis_value: f64,
    pub trial: u32,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepTable {
    pub rows: Vec<AggregateRow>,
    pub skipped: Vec<SkippedTrial>,
}

impl SweepTable {
    pub fn row(&self, scheme: Scheme, axis_value: f64) -> Option<&AggregateRow> {
        self.rows
            .iter()
            .find(|r| r.scheme == scheme && r.axis_value == axis_value)
    }

    /// Mean EE of a scheme along the axis, in axis order.
    pub fn series(&self, scheme: Scheme) -> Vec<&AggregateRow> {
        self.rows.iter().filter(|r| r.scheme == scheme).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub records: Vec<TrialRecord>,
    pub table: SweepTable,
}

enum Outcome {
    Done(TrialRecord),
    Skipped(SkippedTrial),
}

fn run_point(spec: &SweepSpec, axis_value: f64, trial: u32) -> Vec<Outcome> {
    let (n_ris, ratio) = spec.point(axis_value);
    let seed = trial_seed(spec.master_seed, u64::from(trial));
    let skip_all = |reason: String| {
        spec.schemes
            .iter()
            .map(|&scheme| {
                Outcome::Skipped(SkippedTrial {
                    scheme,
                    axis_value,
                    trial,
                    reason: reason.clone(),
                })
            })
            .collect()
    };
    let model = spec.scenario.channel.with_dims(Dims {
        ris_elements: n_ris,
        ..spec.scenario.channel.dims
    });
    let channels = match sample(&model, seed) {
        Ok(c) => c,
        Err(e) => return skip_all(e.to_string()),
    };
    let hash = channel_hash(&channels);
    let params = spec.scenario.with_budget_ratio(ratio);

    spec.schemes
        .iter()
        .map(|&scheme| {
            let start = Instant::now();
            let result = run_scheme(
                scheme,
                &params,
                &channels,
                &spec.scenario.coeffs,
                &spec.scenario.opts,
                phase_seed(seed),
            );
            let wall_time_s = start.elapsed().as_secs_f64();
            match result {
                Ok(out) => Outcome::Done(TrialRecord {
                    scheme,
                    axis: spec.axis,
                    axis_value,
                    trial,
                    seed,
                    channel_hash: hash.clone(),
                    ee_bpj: out.eval.ee_bits_per_joule,
                    rate_bps: out.eval.rate_bps,
                    tx_exposure: out.eval.tx_exposure,
                    rx_exposure: out.eval.rx_exposure,
                    tx_power_w: out.config.tx_power_w,
                    iterations: out.iterations as u64,
                    wall_time_s,
                }),
                Err(e) => Outcome::Skipped(SkippedTrial {
                    scheme,
                    axis_value,
                    trial,
                    reason: e.to_string(),
                }),
            }
        })
        .collect()
}

/// Runs every (axis value, trial, scheme) combination and aggregates.
///
/// Schemes (b) and (d) are recorded as skipped at budget ratios above 1,
/// where the closed-form optimum does not apply. `progress` is called once per axis
/// value, after all of its trials finish.
pub fn run_sweep_with_progress(
    spec: &SweepSpec,
    mut progress: impl FnMut(f64, usize),
) -> Result<SweepOutput> {
    spec.validate()?;
    let pool = {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(t) = spec.threads {
            builder = builder.num_threads(t.max(1));
        }
        builder
            .build()
            .map_err(|e| Error::invalid("threads", e.to_string()))?
    };

    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for &axis_value in &spec.axis_values {
        let outcomes: Vec<Vec<Outcome>> = pool.install(|| {
            (0..spec.trials)
                .into_par_iter()
                .map(|trial| run_point(spec, axis_value, trial))
                .collect()
        });
        let mut done = 0;
        for outcome in outcomes.into_iter().flatten() {
            match outcome {
                Outcome::Done(r) => {
                    done += 1;
                    records.push(r);
                }
                Outcome::Skipped(s) => skipped.push(s),
            }
        }
        progress(axis_value, done);
    }
    let rows = aggregate(&records);
    Ok(SweepOutput {
        records,
        table: SweepTable { rows, skipped },
    })
}

pub fn run_sweep(spec: &SweepSpec) -> Result<SweepOutput> {
    run_sweep_with_progress(spec, |_, _| {})
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Mean and standard error per (axis value, scheme), in first-seen order.
pub fn aggregate(records: &[TrialRecord]) -> Vec<AggregateRow> {
    let mut keys: Vec<(f64, Scheme, SweepAxis)> = Vec::new();
    for r in records {
        if !keys
            .iter()
            .any(|(v, s, a)| *v == r.axis_value && *s == r.scheme && *a == r.axis)
        {
            keys.push((r.axis_value, r.scheme, r.axis));
        }
    }
    keys.into_iter()
        .map(|(axis_value, scheme, axis)| {
            let group: Vec<&TrialRecord> = records
                .iter()
                .filter(|r| r.axis_value == axis_value && r.scheme == scheme && r.axis == axis)
                .collect();
            let col = |f: fn(&TrialRecord) -> f64| {
                mean_and_se(&group.iter().map(|r| f(r)).collect::<Vec<_>>())
            };
            let (mean_ee_bpj, se_ee_bpj) = col(|r| r.ee_bpj);
            let (mean_tx_exposure, se_tx_exposure) = col(|r| r.tx_exposure);
            let (mean_rx_exposure, se_rx_exposure) = col(|r| r.rx_exposure);
            AggregateRow {
                scheme,
                axis,
                axis_value,
                trials: group.len() as u64,
                mean_ee_bpj,
                se_ee_bpj,
                mean_tx_exposure,
                se_tx_exposure,
                mean_rx_exposure,
                se_rx_exposure,
            }
        })
        .collect()
}

/// Shortest decimal that parses back to the same double.
fn fmt_f64(v: f64) -> String {
    ryu::Buffer::new().format(v).to_owned()
}

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::format(path, format!("{other:?}")),
    }
}

pub fn write_trials<W: Write>(
    out: W,
    records: &[TrialRecord],
) -> std::result::Result<(), csv::Error> {
    let mut w = csv_writer(out);
    w.write_record(TRIALS_HEADER)?;
    for r in records {
        w.write_record([
            r.scheme.to_string(),
            r.axis.to_string(),
            fmt_f64(r.axis_value),
            r.trial.to_string(),
            r.seed.to_string(),
            r.channel_hash.clone(),
            fmt_f64(r.ee_bpj),
            fmt_f64(r.rate_bps),
            fmt_f64(r.tx_exposure),
            fmt_f64(r.rx_exposure),
            fmt_f64(r.tx_power_w),
            r.iterations.to_string(),
            fmt_f64(r.wall_time_s),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_aggregate<W: Write>(
    out: W,
    rows: &[AggregateRow],
) -> std::result::Result<(), csv::Error> {
    let mut w = csv_writer(out);
    w.write_record(AGGREGATE_HEADER)?;
    for r in rows {
        w.write_record([
            r.scheme.to_string(),
            r.axis.to_string(),
            fmt_f64(r.axis_value),
            r.trials.to_string(),
            fmt_f64(r.mean_ee_bpj),
            fmt_f64(r.se_ee_bpj),
            fmt_f64(r.mean_tx_exposure),
            fmt_f64(r.se_tx_exposure),
            fmt_f64(r.mean_rx_exposure),
            fmt_f64(r.se_rx_exposure),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trials_csv(path: &Path, records: &[TrialRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_trials(file, records).map_err(|e| csv_error(path, e))
}

pub fn write_aggregate_csv(path: &Path, rows: &[AggregateRow]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_aggregate(file, rows).map_err(|e| csv_error(path, e))
}

fn field<T: FromStr>(
    path: &Path,
    line: u64,
    record: &csv::StringRecord,
    idx: usize,
    name: &str,
) -> Result<T> {
    record.get(idx).and_then(|s| s.parse().ok()).ok_or_else(|| {
        Error::format(
            path,
            format!("line {line}: bad `{name}` value {:?}", record.get(idx)),
        )
    })
}

fn read_records<R: Read, T>(
    path: &Path,
    input: R,
    header: &[&str],
    mut parse: impl FnMut(u64, &csv::StringRecord) -> Result<T>,
) -> Result<Vec<T>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    let found = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(Error::format(
            path,
            format!(
                "unexpected header {:?}, expected {:?}",
                found.iter().collect::<Vec<_>>(),
                header
            ),
        ));
    }
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        out.push(parse(i as u64 + 2, &record)?);
    }
    Ok(out)
}

pub fn read_trials<R: Read>(path: &Path, input: R) -> Result<Vec<TrialRecord>> {
    read_records(path, input, &TRIALS_HEADER, |line, rec| {
        Ok(TrialRecord {
            scheme: field(path, line, rec, 0, "scheme")?,
            axis: field(path, line, rec, 1, "axis")?,
            axis_value: field(path, line, rec, 2, "axis_value")?,
            trial: field(path, line, rec, 3, "trial")?,
            seed: field(path, line, rec, 4, "seed")?,
            channel_hash: field(path, line, rec, 5, "channel_hash")?,
            ee_bpj: field(path, line, rec, 6, "ee_bpj")?,
            rate_bps: field(path, line, rec, 7, "rate_bps")?,
            tx_exposure: field(path, line, rec, 8, "tx_exposure")?,
            rx_exposure: field(path, line, rec, 9, "rx_exposure")?,
            tx_power_w: field(path, line, rec, 10, "tx_power_w")?,
            iterations: field(path, line, rec, 11, "iterations")?,
            wall_time_s: field(path, line, rec, 12, "wall_time_s")?,
        })
    })
}

pub fn read_aggregate<R: Read>(path: &Path, input: R) -> Result<Vec<AggregateRow>> {
    read_records(path, input, &AGGREGATE_HEADER, |line, rec| {
        Ok(AggregateRow {
            scheme: field(path, line, rec, 0, "scheme")?,
            axis: field(path, line, rec, 1, "axis")?,
            axis_value: field(path, line, rec, 2, "axis_value")?,
            trials: field(path, line, rec, 3, "trials")?,
            mean_ee_bpj: field(path, line, rec, 4, "mean_ee_bpj")?,
            se_ee_bpj: field(path, line, rec, 5, "se_ee_bpj")?,
            mean_tx_exposure: field(path, line, rec, 6, "mean_tx_exposure")?,
            se_tx_exposure: field(path, line, rec, 7, "se_tx_exposure")?,
            mean_rx_exposure: field(path, line, rec, 8, "mean_rx_exposure")?,
            se_rx_exposure: field(path, line, rec, 9, "se_rx_exposure")?,
        })
    })
}

pub fn read_trials_csv(path: &Path) -> Result<Vec<TrialRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_trials(path, file)
}

pub fn read_aggregate_csv(path: &Path) -> Result<Vec<AggregateRow>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_aggregate(path, file)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small_spec(
        axis: SweepAxis,
        values: Vec<f64>,
        fixed: f64,
        schemes: Vec<Scheme>,
        trials: u32,
    ) -> SweepSpec {
        let channel = ChannelModel::default().with_dims(Dims::new(16, 4, 4));
        SweepSpec {
            axis,
            axis_values: values,
            fixed,
            schemes,
            trials,
            master_seed: 9,
            scenario: Scenario::isotropic(
                SystemParams::default(),
                channel,
                AlternatingOptions::default(),
            )
            .unwrap(),
            threads: Some(2),
        }
    }

    fn record(scheme: Scheme, ee: f64) -> TrialRecord {
        TrialRecord {
            scheme,
            axis: SweepAxis::BudgetRatio,
            axis_value: 0.85,
            trial: 0,
            seed: u64::MAX,
            channel_hash: "00ff00ff00ff00ff".into(),
            ee_bpj: ee,
            rate_bps: 1e8,
            tx_exposure: 0.2125,
            rx_exposure: 1e-300,
            tx_power_w: 20.0,
            iterations: 17,
            wall_time_s: 1.5e-5,
        }
    }

    #[test]
    fn single_trial_mean_is_the_record() {
        let spec = small_spec(SweepAxis::BudgetRatio, vec![0.85], 16.0, vec![Scheme::A], 1);
        let out = run_sweep(&spec).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.table.rows.len(), 1);
        assert_eq!(out.table.rows[0].mean_ee_bpj, out.records[0].ee_bpj);
        assert_eq!(out.table.rows[0].se_ee_bpj, 0.0);
    }

    #[test]
    fn unaware_dominates_aware_in_mean() {
        let spec = small_spec(
            SweepAxis::BudgetRatio,
            vec![0.4, 0.85],
            16.0,
            vec![Scheme::A, Scheme::E],
            20,
        );
        let out = run_sweep(&spec).unwrap();
        for v in [0.4, 0.85] {
            let a = out.table.row(Scheme::A, v).unwrap().mean_ee_bpj;
            let e = out.table.row(Scheme::E, v).unwrap().mean_ee_bpj;
            assert!(e >= a, "{v}: {e} < {a}");
        }
    }

    #[test]
    fn schemes_share_channels_and_skip_above_unit_ratio() {
        let spec = small_spec(
            SweepAxis::BudgetRatio,
            vec![0.5, 1.2],
            16.0,
            Scheme::ALL.to_vec(),
            3,
        );
        let out = run_sweep(&spec).unwrap();
        assert_eq!(out.table.skipped.len(), 6);
        assert!(out
            .table
            .skipped
            .iter()
            .all(|s| s.axis_value == 1.2 && s.reason.contains("P_q/c")));
        assert!(out.table.row(Scheme::B, 1.2).is_none());
        assert!(out.table.row(Scheme::D, 1.2).is_none());
        assert_eq!(out.table.row(Scheme::B, 0.5).unwrap().trials, 3);
        for trial in 0..3 {
            let hashes: Vec<&str> = out
                .records
                .iter()
                .filter(|r| r.trial == trial && r.axis_value == 0.5)
                .map(|r| r.channel_hash.as_str())
                .collect();
            assert_eq!(hashes.len(), 6);
            assert!(hashes.iter().all(|h| *h == hashes[0]));
        }
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let mut spec = small_spec(
            SweepAxis::RisElements,
            vec![4.0, 8.0],
            0.85,
            vec![Scheme::A, Scheme::C],
            6,
        );
        let strip = |mut rs: Vec<TrialRecord>| {
            rs.iter_mut().for_each(|r| r.wall_time_s = 0.0);
            rs
        };
        spec.threads = Some(1);
        let one = strip(run_sweep(&spec).unwrap().records);
        spec.threads = Some(4);
        let four = strip(run_sweep(&spec).unwrap().records);
        assert_eq!(one, four);
    }

    #[test]
    fn invalid_specs_rejected() {
        let spec = small_spec(
            SweepAxis::BudgetRatio,
            vec![0.5, 0.5],
            16.0,
            vec![Scheme::A],
            1,
        );
        assert!(run_sweep(&spec).is_err());
        let spec = small_spec(SweepAxis::BudgetRatio, vec![0.5], 16.0, vec![Scheme::A], 0);
        assert!(run_sweep(&spec).is_err());
        let spec = small_spec(SweepAxis::RisElements, vec![2.5], 0.85, vec![Scheme::A], 1);
        assert!(run_sweep(&spec).is_err());
    }

    #[test]
    fn empty_records_write_header_only() {
        let mut buf = Vec::new();
        write_trials(&mut buf, &[]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            format!("{}\n", TRIALS_HEADER.join(","))
        );
    }

    #[test]
    fn one_record_two_lines() {
        let mut buf = Vec::new();
        let r = record(Scheme::C, 4.25e6);
        write_trials(&mut buf, std::slice::from_ref(&r)).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(!text.contains('\r'));
        let back = read_trials(Path::new("mem"), buf.as_slice()).unwrap();
        assert_eq!(back, vec![r]);
    }

    #[test]
    fn wrong_header_rejected() {
        let text = "scheme,axis\na,budget_ratio\n";
        assert!(matches!(
            read_trials(Path::new("x.csv"), text.as_bytes()),
            Err(Error::Format { .. })
        ));
    }

    #[test]
    fn aggregate_round_trip() {
        let rows = aggregate(&[
            record(Scheme::A, 1.0),
            record(Scheme::A, 3.0),
            record(Scheme::B, 2.0),
        ]);
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].mean_ee_bpj, 2.0);
        assert!((rows[0].se_ee_bpj - 1.0).abs() < 1e-15);
        let mut buf = Vec::new();
        write_aggregate(&mut buf, &rows).unwrap();
        assert_eq!(
            read_aggregate(Path::new("mem"), buf.as_slice()).unwrap(),
            rows
        );
    }

    fn any_f64() -> impl Strategy<Value = f64> {
        prop_oneof![
            Just(1e-300),
            Just(1e300),
            Just(0.0),
            Just(f64::MIN_POSITIVE),
            Just(f64::MAX),
            any::<f64>().prop_filter("finite", |v| v.is_finite()),
        ]
    }

    prop_compose! {
        fn any_record()(
            scheme in prop::sample::select(Scheme::ALL.to_vec()),
            ris in any::<bool>(),
            axis_value in any_f64(),
            trial in any::<u32>(),
            seed in any::<u64>(),
            hash in "[0-9a-f]{16}",
            vals in prop::array::uniform6(any_f64()),
            iterations in any::<u64>(),
        ) -> TrialRecord {
            TrialRecord {
                scheme,
                axis: if ris { SweepAxis::RisElements } else { SweepAxis::BudgetRatio },
                axis_value,
                trial,
                seed,
                channel_hash: hash,
                ee_bpj: vals[0],
                rate_bps: vals[1],
                tx_exposure: vals[2],
                rx_exposure: vals[3],
                tx_power_w: vals[4],
                iterations,
                wall_time_s: vals[5],
            }
        }
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_exact(records in prop::collection::vec(any_record(), 0..200)) {
            let mut buf = Vec::new();
            write_trials(&mut buf, &records).unwrap();
            let back = read_trials(Path::new("mem"), buf.as_slice()).unwrap();
            prop_assert_eq!(back, records);
        }
    }

    #[test]
    fn ten_thousand_extreme_records_round_trip() {
        let records: Vec<TrialRecord> = (0..10_000u32)
            .map(|i| {
                let mut r = record(Scheme::ALL[i as usize % 6], 1e-300 * (i as f64 + 1.0));
                r.rate_bps = 1e300 / (i as f64 + 1.0);
                r.trial = i;
                r
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_trials_csv(&path, &records).unwrap();
        assert_eq!(read_trials_csv(&path).unwrap(), records);
    }
}
