//! Joint optimization of RIS phases, beamformer, combiner and power.
//!
//! [`alternating_max`] cycles through the phase, beamformer and combiner
//! blocks, each solved globally, until the channel gain `|wᴴ G Φ H q|` stops
//! improving, then sets the power once. [`global_special_case`] solves the
//! isotropic, tight-budget case exactly by scanning all transmit/receive
//! antenna pairs.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::channel::random_phases;
use crate::error::{Error, Result};
use crate::model::{
    angle, evaluate, wrap_phase, ChannelPair, EvalResult, ExposureCoefficients, LinkConfig,
    SystemParams,
};
use crate::subsolvers::{
    align_and_solve_beamformer, align_and_solve_combiner, matched_unit, optimize_phases,
    optimize_power, PowerProblem,
};

/// Slack allowed on `P/c ≤ 1` before the closed-form path is refused.
const SPECIAL_CASE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitStrategy {
    /// `q_n = t / √N_T` with the largest `t ≤ 1` meeting the exposure budget;
    /// likewise for `w`.
    UniformFeasible,
    /// Complex Gaussian directions scaled to the boundary of the feasible set.
    RandomFeasible(u64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlternatingOptions {
    /// Stop once the relative gain improvement over a full cycle drops below
    /// this.
    pub rel_tol: f64,
    pub max_iters: usize,
    pub init: InitStrategy,
}

impl Default for AlternatingOptions {
    fn default() -> Self {
        AlternatingOptions {
            rel_tol: 1e-8,
            max_iters: 500,
            init: InitStrategy::UniformFeasible,
        }
    }
}

impl AlternatingOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(Error::invalid(
                "rel_tol",
                format!("must lie in (0, 1), got {}", self.rel_tol),
            ));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters", "must be >= 1"));
        }
        Ok(())
    }
}

/// Per-iteration record of an alternating run.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveTrace {
    /// `|wᴴ G Φ H q|` after each full cycle.
    pub objectives: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub final_eval: EvalResult,
}

impl SolveTrace {
    /// True when no cycle decreased the gain by more than `rel_slack` relative.
    pub fn is_monotone(&self, rel_slack: f64) -> bool {
        self.objectives
            .windows(2)
            .all(|w| w[1] >= w[0] - rel_slack * w[0].abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ExposureMode {
    Aware,
    Unaware,
}

pub fn alternating_max(
    params: &SystemParams,
    channels: &ChannelPair,
    coeffs: &ExposureCoefficients,
    opts: &AlternatingOptions,
) -> Result<(LinkConfig, SolveTrace)> {
    alternate(params, channels, coeffs, opts, None, ExposureMode::Aware)
}

fn check_inputs(
    params: &SystemParams,
    channels: &ChannelPair,
    coeffs: &ExposureCoefficients,
) -> Result<()> {
    params.validate()?;
    if coeffs.tx().len() != channels.n_tx() {
        return Err(Error::DimensionMismatch {
            what: "tx exposure coefficients",
            expected: channels.n_tx(),
            actual: coeffs.tx().len(),
        });
    }
    if coeffs.rx().len() != channels.n_rx() {
        return Err(Error::DimensionMismatch {
            what: "rx exposure coefficients",
            expected: channels.n_rx(),
            actual: coeffs.rx().len(),
        });
    }
    Ok(())
}

fn initial_vector(
    n: usize,
    coeffs: &[f64],
    budget: f64,
    mode: ExposureMode,
    rng: Option<&mut ChaCha8Rng>,
) -> DVector<Complex64> {
    let direction = match rng {
        None => DVector::from_element(n, Complex64::new(1.0, 0.0)),
        Some(rng) => DVector::from_fn(n, |_, _| {
            Complex64::new(
                StandardNormal.sample(&mut *rng),
                StandardNormal.sample(&mut *rng),
            )
        }),
    };
    let norm = direction.norm();
    if norm == 0.0 {
        return DVector::zeros(n);
    }
    let mut scale = 1.0 / norm;
    if mode == ExposureMode::Aware {
        let exposure: f64 = coeffs
            .iter()
            .zip(direction.iter())
            .map(|(c, z)| c * z.norm())
            .sum();
        if exposure > 0.0 {
            scale = scale.min(budget / exposure);
        }
    }
    direction * Complex64::new(scale, 0.0)
}

fn alternate(
    params: &SystemParams,
    channels: &ChannelPair,
    coeffs: &ExposureCoefficients,
    opts: &AlternatingOptions,
    fixed_phases: Option<&[f64]>,
    mode: ExposureMode,
) -> Result<(LinkConfig, SolveTrace)> {
    check_inputs(params, channels, coeffs)?;
    opts.validate()?;
    if let Some(p) = fixed_phases {
        if p.len() != channels.n_ris() {
            return Err(Error::DimensionMismatch {
                what: "fixed phases",
                expected: channels.n_ris(),
                actual: p.len(),
            });
        }
    }

    let (tx_budget, rx_budget) = (params.tx_exposure_budget, params.rx_exposure_budget);
    let mut rng = match opts.init {
        InitStrategy::UniformFeasible => None,
        InitStrategy::RandomFeasible(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
    };
    let mut q = initial_vector(channels.n_tx(), coeffs.tx(), tx_budget, mode, rng.as_mut());
    let mut w = initial_vector(channels.n_rx(), coeffs.rx(), rx_budget, mode, rng.as_mut());
    let mut phases = fixed_phases.map_or_else(|| vec![0.0; channels.n_ris()], <[f64]>::to_vec);

    let mut objectives: Vec<f64> = Vec::new();
    let mut converged = false;
    for _ in 0..opts.max_iters {
        if fixed_phases.is_none() {
            let g = channels.g().adjoint() * &w;
            let h = channels.h() * &q;
            phases = optimize_phases(g.as_slice(), h.as_slice());
        }
        let cascade = channels.cascade(&phases);

        let v = cascade.adjoint() * &w;
        q = match mode {
            ExposureMode::Aware => align_and_solve_beamformer(&v, coeffs.tx(), tx_budget)?,
            ExposureMode::Unaware => matched_unit(&v),
        };
        let u = &cascade * &q;
        w = match mode {
            ExposureMode::Aware => align_and_solve_combiner(&u, coeffs.rx(), rx_budget)?,
            ExposureMode::Unaware => matched_unit(&u),
        };

        let objective = w.dotc(&u).norm();
        let previous = objectives.last().copied();
        objectives.push(objective);
        if let Some(prev) = previous {
            if objective - prev <= opts.rel_tol * prev {
                converged = true;
                break;
            }
        }
    }

    let mut cfg = LinkConfig {
        phases,
        beamformer: q,
        combiner: w,
        tx_power_w: 0.0,
    };
    cfg.tx_power_w = best_power(params, channels, &cfg);
    let final_eval = evaluate(params, channels, coeffs, &cfg)?;
    let trace = SolveTrace {
        iterations: objectives.len(),
        objectives,
        converged,
        final_eval,
    };
    Ok((cfg, trace))
}

fn best_power(params: &SystemParams, channels: &ChannelPair, cfg: &LinkConfig) -> f64 {
    let gain = channels
        .effective_channel(&cfg.phases, &cfg.beamformer, &cfg.combiner)
        .norm_sqr();
    optimize_power(&PowerProblem {
        gain: gain * params.snr_scale(),
        amp_inefficiency: params.amp_inefficiency,
        static_power_w: params.static_power_w,
        max_tx_power_w: params.max_tx_power_w,
    })
}

/// `Obj(i, j)` over transmit antenna `i` and receive antenna `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveTable {
    pub n_tx: usize,
    pub n_rx: usize,
    values: Vec<f64>,
    /// Selected `(transmit, receive)` antenna pair (0-based).
    pub best: (usize, usize),
}

impl ObjectiveTable {
    fn from_fn(n_tx: usize, n_rx: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(n_tx * n_rx);
        let mut best = (0, 0);
        let mut best_value = f64::NEG_INFINITY;
        for i in 0..n_tx {
            for j in 0..n_rx {
                let v = f(i, j);
                // strict comparison keeps the lowest index on ties
                if v > best_value {
                    best_value = v;
                    best = (i, j);
                }
                values.push(v);
            }
        }
        ObjectiveTable {
            n_tx,
            n_rx,
            values,
            best,
        }
    }

    pub fn get(&self, tx: usize, rx: usize) -> f64 {
        self.values[tx * self.n_rx + rx]
    }

    pub fn best_value(&self) -> f64 {
        self.get(self.best.0, self.best.1)
    }
}

fn special_case_ratios(params: &SystemParams, coeff_c: f64, coeff_d: f64) -> Result<(f64, f64)> {
    if !(coeff_c > 0.0 && coeff_d > 0.0) {
        return Err(Error::Precondition(format!(
            "closed-form optimum needs positive isotropic coefficients, got c = {coeff_c}, d = {coeff_d}; use alternating_max"
        )));
    }
    let ratio_q = params.tx_exposure_budget / coeff_c;
    let ratio_w = params.rx_exposure_budget / coeff_d;
    if ratio_q > 1.0 + SPECIAL_CASE_TOL {
        return Err(Error::Precondition(format!(
            "P_q/c = {ratio_q} exceeds 1; the single-antenna optimum does not apply, use alternating_max"
        )));
    }
    if ratio_w > 1.0 + SPECIAL_CASE_TOL {
        return Err(Error::Precondition(format!(
            "P_w/d = {ratio_w} exceeds 1; the single-antenna optimum does not apply, use alternating_max"
        )));
    }
    Ok((ratio_q.min(1.0), ratio_w.min(1.0)))
}

fn single_antenna(n: usize, index: usize, magnitude: f64) -> DVector<Complex64> {
    let mut v = DVector::zeros(n);
    v[index] = Complex64::new(magnitude, 0.0);
    v
}

/// Global optimum for isotropic coefficients `c_n = c`, `d_n = d` with
/// `P_q/c ≤ 1` and `P_w/d ≤ 1`.
///
/// A single transmit and a single receive antenna are active; the pair
/// maximizing `Σ_n |G[j, n] H[n, i]|` is found by exhaustive search and the
/// RIS co-phases that pair's cascaded path.
pub fn global_special_case(
    params: &SystemParams,
    channels: &ChannelPair,
    coeff_c: f64,
    coeff_d: f64,
) -> Result<(LinkConfig, ObjectiveTable)> {
    params.validate()?;
    let (ratio_q, ratio_w) = special_case_ratios(params, coeff_c, coeff_d)?;
    let (h, g) = (channels.h(), channels.g());
    let n = channels.n_ris();

    let h_abs = h.map(|z| z.norm());
    let g_abs = g.map(|z| z.norm());
    let table = ObjectiveTable::from_fn(channels.n_tx(), channels.n_rx(), |i, j| {
        (0..n).map(|e| g_abs[(j, e)] * h_abs[(e, i)]).sum()
    });

    let (tx, rx) = table.best;
    let phases = (0..n)
        .map(|e| wrap_phase(-angle(g[(rx, e)] * h[(e, tx)])))
        .collect();
    let mut cfg = LinkConfig {
        phases,
        beamformer: single_antenna(channels.n_tx(), tx, ratio_q),
        combiner: single_antenna(channels.n_rx(), rx, ratio_w),
        tx_power_w: 0.0,
    };
    cfg.tx_power_w = best_power(params, channels, &cfg);
    Ok((cfg, table))
}

/// Closed-form beamformer, combiner and power for fixed RIS phases under the
/// same isotropic, tight-budget assumptions as [`global_special_case`].
pub fn global_with_fixed_phases(
    params: &SystemParams,
    channels: &ChannelPair,
    coeff_c: f64,
    coeff_d: f64,
    phases: &[f64],
) -> Result<(LinkConfig, ObjectiveTable)> {
    params.validate()?;
    let (ratio_q, ratio_w) = special_case_ratios(params, coeff_c, coeff_d)?;
    if phases.len() != channels.n_ris() {
        return Err(Error::DimensionMismatch {
            what: "fixed phases",
            expected: channels.n_ris(),
            actual: phases.len(),
        });
    }
    let cascade = channels.cascade(phases);
    let table = ObjectiveTable::from_fn(channels.n_tx(), channels.n_rx(), |i, j| {
        cascade[(j, i)].norm()
    });
    let (tx, rx) = table.best;
    let mut cfg = LinkConfig {
        phases: phases.to_vec(),
        beamformer: single_antenna(channels.n_tx(), tx, ratio_q),
        combiner: single_antenna(channels.n_rx(), rx, ratio_w),
        tx_power_w: 0.0,
    };
    cfg.tx_power_w = best_power(params, channels, &cfg);
    Ok((cfg, table))
}

/// The six compared schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    /// Exposure-aware alternating optimization of Φ, q, w, p.
    A,
    /// Exposure-aware closed-form global optimum.
    B,
    /// As (a) with random, fixed RIS phases.
    C,
    /// As (b) with random, fixed RIS phases.
    D,
    /// Exposure-unaware alternating optimization of Φ, q, w, p.
    E,
    /// As (e) with random, fixed RIS phases.
    F,
}

impl Scheme {
    pub const ALL: [Scheme; 6] = [
        Scheme::A,
        Scheme::B,
        Scheme::C,
        Scheme::D,
        Scheme::E,
        Scheme::F,
    ];

    pub fn letter(self) -> char {
        match self {
            Scheme::A => 'a',
            Scheme::B => 'b',
            Scheme::C => 'c',
            Scheme::D => 'd',
            Scheme::E => 'e',
            Scheme::F => 'f',
        }
    }

    /// Schemes built on the isotropic single-antenna optimum.
    pub fn requires_special_case(self) -> bool {
        matches!(self, Scheme::B | Scheme::D)
    }

    pub fn uses_random_phases(self) -> bool {
        matches!(self, Scheme::C | Scheme::D | Scheme::F)
    }

    pub fn is_emf_aware(self) -> bool {
        !matches!(self, Scheme::E | Scheme::F)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "a" => Ok(Scheme::A),
            "b" => Ok(Scheme::B),
            "c" => Ok(Scheme::C),
            "d" => Ok(Scheme::D),
            "e" => Ok(Scheme::E),
            "f" => Ok(Scheme::F),
            other => Err(Error::invalid(
                "scheme",
                format!("unknown scheme `{other}` (expected a-f)"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeOutcome {
    pub config: LinkConfig,
    pub eval: EvalResult,
    pub iterations: usize,
    pub trace: Option<SolveTrace>,
}

/// Runs one scheme on one channel realization. `phase_seed` drives the
/// random RIS phases of schemes (c), (d) and (f) and is ignored otherwise.
pub fn run_scheme(
    scheme: Scheme,
    params: &SystemParams,
    channels: &ChannelPair,
    coeffs: &ExposureCoefficients,
    opts: &AlternatingOptions,
    phase_seed: u64,
) -> Result<SchemeOutcome> {
    check_inputs(params, channels, coeffs)?;
    let random = scheme
        .uses_random_phases()
        .then(|| random_phases(channels.n_ris(), phase_seed));

    if scheme.requires_special_case() {
        let (c, d) = coeffs.isotropic_values().ok_or_else(|| {
            Error::Precondition(format!(
                "scheme ({scheme}) requires isotropic exposure coefficients"
            ))
        })?;
        let (config, _) = match &random {
            Some(phases) => global_with_fixed_phases(params, channels, c, d, phases)?,
            None => global_special_case(params, channels, c, d)?,
        };
        let eval = evaluate(params, channels, coeffs, &config)?;
        return Ok(SchemeOutcome {
            config,
            eval,
            iterations: 1,
            trace: None,
        });
    }

    let mode = if scheme.is_emf_aware() {
        ExposureMode::Aware
    } else {
        ExposureMode::Unaware
    };
    let (config, trace) = alternate(params, channels, coeffs, opts, random.as_deref(), mode)?;
    Ok(SchemeOutcome {
        eval: trace.final_eval,
        iterations: trace.iterations,
        config,
        trace: Some(trace),
    })
}
