//! System model of a single-user RIS-assisted MIMO link.
//!
//! The transmitter (N_T antennas) reaches the receiver (N_R antennas) only
//! through an RIS with N passive elements. With RIS phases φ, beamformer q,
//! combiner w and transmit power p the link delivers
//!
//! ```text
//! EE = B log2(1 + p |wᴴ G Φ H q|² / (δ σ²)) / (μ p + P_c)      [bit/J]
//! ```
//!
//! subject to `0 ≤ p ≤ P_max`, `Σ c_n |q_n| ≤ P_q`, `‖q‖² ≤ 1`,
//! `Σ d_n |w_n| ≤ P_w` and `‖w‖² ≤ 1`.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

/// Absolute tolerance used by every feasibility check.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Scalar physical constants of the link.
///
/// Path loss and noise density are kept in dB / dBm as configured; the
/// linear values are derived on demand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SystemParams {
    pub bandwidth_hz: f64,
    pub path_loss_db: f64,
    pub noise_psd_dbm_per_hz: f64,
    /// Inverse of the power amplifier efficiency (μ ≥ 1).
    pub amp_inefficiency: f64,
    pub static_power_w: f64,
    pub max_tx_power_w: f64,
    /// Transmit-side exposure budget P_q.
    pub tx_exposure_budget: f64,
    /// Receive-side exposure budget P_w.
    pub rx_exposure_budget: f64,
}

impl Default for SystemParams {
    /// B = 5 MHz, δ = 110 dB, N₀ = −174 dBm/Hz, P_c = 30 W, P_max = 20 W,
    /// ideal amplifier, and exposure budgets at 0.85 × (1/4) for a
    /// four-antenna array with isotropic coefficients.
    fn default() -> Self {
        SystemParams {
            bandwidth_hz: 5e6,
            path_loss_db: 110.0,
            noise_psd_dbm_per_hz: -174.0,
            amp_inefficiency: 1.0,
            static_power_w: 30.0,
            max_tx_power_w: 20.0,
            tx_exposure_budget: 0.85 * 0.25,
            rx_exposure_budget: 0.85 * 0.25,
        }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("bandwidth_hz", self.bandwidth_hz),
            ("static_power_w", self.static_power_w),
            ("max_tx_power_w", self.max_tx_power_w),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(
                    name,
                    format!("must be finite and > 0, got {v}"),
                ));
            }
        }
        let non_negative = [
            ("tx_exposure_budget", self.tx_exposure_budget),
            ("rx_exposure_budget", self.rx_exposure_budget),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(
                    name,
                    format!("must be finite and >= 0, got {v}"),
                ));
            }
        }
        if !(self.amp_inefficiency.is_finite() && self.amp_inefficiency >= 1.0) {
            return Err(Error::invalid(
                "amp_inefficiency",
                format!("must be >= 1, got {}", self.amp_inefficiency),
            ));
        }
        if !self.path_loss_db.is_finite() {
            return Err(Error::invalid("path_loss_db", "must be finite"));
        }
        let sigma2 = self.noise_power_w();
        if !(sigma2.is_finite() && sigma2 > 0.0) {
            return Err(Error::invalid(
                "noise_psd_dbm_per_hz",
                format!("noise power {sigma2} W is not finite and positive"),
            ));
        }
        if !(self.snr_scale().is_finite()) {
            return Err(Error::invalid("path_loss_db", "δσ² underflows to zero"));
        }
        Ok(())
    }

    pub fn path_loss_linear(&self) -> f64 {
        db_to_linear(self.path_loss_db)
    }

    /// Receiver noise power σ² = N₀ · B in watts.
    pub fn noise_power_w(&self) -> f64 {
        db_to_linear(self.noise_psd_dbm_per_hz - 30.0) * self.bandwidth_hz
    }

    /// 1 / (δ σ²): multiplies `p · |wᴴ G Φ H q|²` to give the receive SNR.
    pub fn snr_scale(&self) -> f64 {
        1.0 / (self.path_loss_linear() * self.noise_power_w())
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

/// Per-antenna absorption weights: `c_n` at the transmitter, `d_n` at the
/// receiver.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExposureCoefficients {
    tx: Vec<f64>,
    rx: Vec<f64>,
}

impl ExposureCoefficients {
    pub fn new(tx: Vec<f64>, rx: Vec<f64>) -> Result<Self> {
        if tx.is_empty() || rx.is_empty() {
            return Err(Error::invalid(
                "exposure coefficients",
                "need at least one antenna per side",
            ));
        }
        for (name, v) in [("tx_coeffs", &tx), ("rx_coeffs", &rx)] {
            if let Some(i) = v.iter().position(|c| !(c.is_finite() && *c >= 0.0)) {
                return Err(Error::invalid(
                    name,
                    format!("entry {i} must be finite and >= 0, got {}", v[i]),
                ));
            }
        }
        Ok(ExposureCoefficients { tx, rx })
    }

    /// `c_n = c` for all transmit antennas and `d_n = d` for all receive ones.
    pub fn isotropic(n_tx: usize, c: f64, n_rx: usize, d: f64) -> Result<Self> {
        Self::new(vec![c; n_tx], vec![d; n_rx])
    }

    pub fn tx(&self) -> &[f64] {
        &self.tx
    }

    pub fn rx(&self) -> &[f64] {
        &self.rx
    }

    pub fn is_isotropic(&self) -> bool {
        self.isotropic_values().is_some()
    }

    /// The common `(c, d)` pair when both sides are isotropic.
    pub fn isotropic_values(&self) -> Option<(f64, f64)> {
        let c = self.tx[0];
        let d = self.rx[0];
        (self.tx.iter().all(|&x| x == c) && self.rx.iter().all(|&x| x == d)).then_some((c, d))
    }

    pub fn tx_mean(&self) -> f64 {
        self.tx.iter().sum::<f64>() / self.tx.len() as f64
    }

    pub fn rx_mean(&self) -> f64 {
        self.rx.iter().sum::<f64>() / self.rx.len() as f64
    }
}

/// Fading channels `H` (N × N_T, transmitter → RIS) and `G` (N_R × N,
/// RIS → receiver).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelPair {
    h: DMatrix<Complex64>,
    g: DMatrix<Complex64>,
}

impl ChannelPair {
    pub fn new(h: DMatrix<Complex64>, g: DMatrix<Complex64>) -> Result<Self> {
        if h.nrows() == 0 || h.ncols() == 0 || g.nrows() == 0 {
            return Err(Error::invalid("channel", "all dimensions must be >= 1"));
        }
        if g.ncols() != h.nrows() {
            return Err(Error::DimensionMismatch {
                what: "G columns vs. H rows (RIS elements)",
                expected: h.nrows(),
                actual: g.ncols(),
            });
        }
        if let Some(i) = h
            .iter()
            .position(|z| !(z.re.is_finite() && z.im.is_finite()))
        {
            return Err(Error::NonFinite {
                what: "H",
                index: i,
            });
        }
        if let Some(i) = g
            .iter()
            .position(|z| !(z.re.is_finite() && z.im.is_finite()))
        {
            return Err(Error::NonFinite {
                what: "G",
                index: i,
            });
        }
        Ok(ChannelPair { h, g })
    }

    pub fn h(&self) -> &DMatrix<Complex64> {
        &self.h
    }

    pub fn g(&self) -> &DMatrix<Complex64> {
        &self.g
    }

    pub fn n_ris(&self) -> usize {
        self.h.nrows()
    }

    pub fn n_tx(&self) -> usize {
        self.h.ncols()
    }

    pub fn n_rx(&self) -> usize {
        self.g.nrows()
    }

    /// End-to-end matrix `G Φ H` (N_R × N_T).
    pub fn cascade(&self, phases: &[f64]) -> DMatrix<Complex64> {
        debug_assert_eq!(phases.len(), self.n_ris());
        let mut scaled = self.h.clone();
        for (n, &phi) in phases.iter().enumerate() {
            let r = Complex64::cis(phi);
            scaled.row_mut(n).iter_mut().for_each(|z| *z *= r);
        }
        &self.g * scaled
    }

    /// `wᴴ G Φ H q` evaluated in O(N (N_T + N_R)).
    pub fn effective_channel(
        &self,
        phases: &[f64],
        beamformer: &DVector<Complex64>,
        combiner: &DVector<Complex64>,
    ) -> Complex64 {
        let g = self.g.adjoint() * combiner;
        let h = &self.h * beamformer;
        phases
            .iter()
            .zip(g.iter().zip(h.iter()))
            .map(|(&phi, (gn, hn))| gn.conj() * Complex64::cis(phi) * hn)
            .sum()
    }

    fn check_config(&self, cfg: &LinkConfig) -> Result<()> {
        let checks = [
            ("phases", self.n_ris(), cfg.phases.len()),
            ("beamformer", self.n_tx(), cfg.beamformer.len()),
            ("combiner", self.n_rx(), cfg.combiner.len()),
        ];
        for (what, expected, actual) in checks {
            if expected != actual {
                return Err(Error::DimensionMismatch {
                    what,
                    expected,
                    actual,
                });
            }
        }
        Ok(())
    }
}

/// One complete decision point: RIS phases, beamformer, combiner and power.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkConfig {
    /// RIS phases in `[0, 2π)`.
    pub phases: Vec<f64>,
    pub beamformer: DVector<Complex64>,
    pub combiner: DVector<Complex64>,
    pub tx_power_w: f64,
}

impl LinkConfig {
    pub fn zero(n_ris: usize, n_tx: usize, n_rx: usize) -> Self {
        LinkConfig {
            phases: vec![0.0; n_ris],
            beamformer: DVector::zeros(n_tx),
            combiner: DVector::zeros(n_rx),
            tx_power_w: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalResult {
    pub ee_bits_per_joule: f64,
    pub rate_bps: f64,
    /// `|wᴴ G Φ H q|²`
    pub effective_gain: f64,
    /// `Σ c_n |q_n|`
    pub tx_exposure: f64,
    /// `Σ d_n |w_n|`
    pub rx_exposure: f64,
}

/// `Σ coeffs_n |v_n|`
pub fn exposure(coeffs: &[f64], v: &DVector<Complex64>) -> f64 {
    coeffs.iter().zip(v.iter()).map(|(c, z)| c * z.norm()).sum()
}

/// Bits per Joule for a given channel gain `|wᴴ G Φ H q|²` and power.
pub fn energy_efficiency(params: &SystemParams, effective_gain: f64, tx_power_w: f64) -> f64 {
    let rate = params.bandwidth_hz * (tx_power_w * effective_gain * params.snr_scale()).ln_1p()
        / std::f64::consts::LN_2;
    rate / (params.amp_inefficiency * tx_power_w + params.static_power_w)
}

pub fn evaluate(
    params: &SystemParams,
    channels: &ChannelPair,
    coeffs: &ExposureCoefficients,
    cfg: &LinkConfig,
) -> Result<EvalResult> {
    channels.check_config(cfg)?;
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
    let snr_scale = params.snr_scale();
    let effective_gain = channels
        .effective_channel(&cfg.phases, &cfg.beamformer, &cfg.combiner)
        .norm_sqr();
    let p = cfg.tx_power_w;
    let rate_bps =
        params.bandwidth_hz * (p * effective_gain * snr_scale).ln_1p() / std::f64::consts::LN_2;
    Ok(EvalResult {
        ee_bits_per_joule: rate_bps / (params.amp_inefficiency * p + params.static_power_w),
        rate_bps,
        effective_gain,
        tx_exposure: exposure(coeffs.tx(), &cfg.beamformer),
        rx_exposure: exposure(coeffs.rx(), &cfg.combiner),
    })
}

/// Which constraint families a configuration is checked against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintSet {
    /// Power bounds, both exposure sums and both unit-norm sums.
    EmfAware,
    /// Power bounds and unit norms only (exposure-unaware baselines).
    NormOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constraint {
    PowerNonNegative,
    PowerMax,
    TxExposure,
    RxExposure,
    BeamformerNorm,
    CombinerNorm,
    PhaseRange,
}

/// A violated constraint; `slack` is `bound − value` and therefore negative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub constraint: Constraint,
    pub slack: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeasibilityReport {
    pub violations: Vec<Violation>,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn slack(&self, constraint: Constraint) -> Option<f64> {
        self.violations
            .iter()
            .find(|v| v.constraint == constraint)
            .map(|v| v.slack)
    }
}

pub fn is_feasible(
    params: &SystemParams,
    coeffs: &ExposureCoefficients,
    cfg: &LinkConfig,
) -> FeasibilityReport {
    check_constraints(params, coeffs, cfg, ConstraintSet::EmfAware)
}

pub fn check_constraints(
    params: &SystemParams,
    coeffs: &ExposureCoefficients,
    cfg: &LinkConfig,
    set: ConstraintSet,
) -> FeasibilityReport {
    debug_assert_eq!(coeffs.tx().len(), cfg.beamformer.len());
    debug_assert_eq!(coeffs.rx().len(), cfg.combiner.len());

    let mut violations = Vec::new();
    let mut check = |constraint, slack: f64| {
        if !(slack >= -FEASIBILITY_TOL) {
            violations.push(Violation { constraint, slack });
        }
    };
    check(Constraint::PowerNonNegative, cfg.tx_power_w);
    check(Constraint::PowerMax, params.max_tx_power_w - cfg.tx_power_w);
    if set == ConstraintSet::EmfAware {
        check(
            Constraint::TxExposure,
            params.tx_exposure_budget - exposure(coeffs.tx(), &cfg.beamformer),
        );
        check(
            Constraint::RxExposure,
            params.rx_exposure_budget - exposure(coeffs.rx(), &cfg.combiner),
        );
    }
    check(
        Constraint::BeamformerNorm,
        1.0 - cfg.beamformer.norm_squared(),
    );
    check(Constraint::CombinerNorm, 1.0 - cfg.combiner.norm_squared());
    let worst_phase = cfg
        .phases
        .iter()
        .map(|&phi| phi.min(TAU - phi))
        .fold(f64::INFINITY, f64::min);
    if cfg.phases.iter().any(|phi| !phi.is_finite()) {
        check(Constraint::PhaseRange, f64::NAN);
    } else if worst_phase.is_finite() {
        check(Constraint::PhaseRange, worst_phase);
    }
    FeasibilityReport { violations }
}

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_phase(phi: f64) -> f64 {
    let r = phi.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Principal angle in `(−π, π]`, with `angle(0) = 0`.
pub fn angle(z: Complex64) -> f64 {
    if z.re == 0.0 && z.im == 0.0 {
        0.0
    } else {
        z.im.atan2(z.re)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_channel(h: Complex64, g: Complex64) -> ChannelPair {
        ChannelPair::new(
            DMatrix::from_element(1, 1, h),
            DMatrix::from_element(1, 1, g),
        )
        .unwrap()
    }

    /// B = 1 Hz and δσ² = 1: path loss 0 dB, N₀ = 30 dBm/Hz.
    fn unit_params() -> SystemParams {
        SystemParams {
            bandwidth_hz: 1.0,
            path_loss_db: 0.0,
            noise_psd_dbm_per_hz: 30.0,
            amp_inefficiency: 1.0,
            static_power_w: 1.0,
            max_tx_power_w: 10.0,
            tx_exposure_budget: 1.0,
            rx_exposure_budget: 1.0,
        }
    }

    fn scalar_cfg(p: f64) -> LinkConfig {
        LinkConfig {
            phases: vec![0.0],
            beamformer: DVector::from_element(1, Complex64::new(1.0, 0.0)),
            combiner: DVector::from_element(1, Complex64::new(1.0, 0.0)),
            tx_power_w: p,
        }
    }

    #[test]
    fn zero_power_gives_zero_ee() {
        let params = SystemParams::default();
        let ch = scalar_channel(Complex64::new(3.0, 1.0), Complex64::new(-2.0, 0.5));
        let coeffs = ExposureCoefficients::isotropic(1, 1.0, 1, 1.0).unwrap();
        let r = evaluate(&params, &ch, &coeffs, &scalar_cfg(0.0)).unwrap();
        assert_eq!(r.ee_bits_per_joule, 0.0);
        assert_eq!(r.rate_bps, 0.0);
    }

    #[test]
    fn scalar_toy_is_half_bit_per_joule() {
        let params = unit_params();
        assert!((params.snr_scale() - 1.0).abs() < 1e-15);
        let ch = scalar_channel(Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0));
        let coeffs = ExposureCoefficients::isotropic(1, 1.0, 1, 1.0).unwrap();
        let r = evaluate(&params, &ch, &coeffs, &scalar_cfg(1.0)).unwrap();
        assert!((r.effective_gain - 1.0).abs() < 1e-15);
        assert!((r.ee_bits_per_joule - 0.5).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let params = unit_params();
        let ch = scalar_channel(Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0));
        let coeffs = ExposureCoefficients::isotropic(1, 1.0, 1, 1.0).unwrap();
        let mut cfg = scalar_cfg(1.0);
        cfg.beamformer = DVector::zeros(2);
        assert!(matches!(
            evaluate(&params, &ch, &coeffs, &cfg),
            Err(Error::DimensionMismatch {
                what: "beamformer",
                ..
            })
        ));
    }

    #[test]
    fn non_finite_channel_is_rejected() {
        let h = DMatrix::from_element(1, 1, Complex64::new(f64::NAN, 0.0));
        let g = DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
        assert!(matches!(
            ChannelPair::new(h, g),
            Err(Error::NonFinite {
                what: "H",
                index: 0
            })
        ));
        let h = DMatrix::from_element(2, 1, Complex64::new(1.0, 0.0));
        let g = DMatrix::from_element(1, 3, Complex64::new(1.0, 0.0));
        assert!(matches!(
            ChannelPair::new(h, g),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn zero_config_is_feasible() {
        let params = SystemParams::default();
        let coeffs = ExposureCoefficients::isotropic(3, 1.0, 2, 1.0).unwrap();
        let cfg = LinkConfig::zero(4, 3, 2);
        assert!(is_feasible(&params, &coeffs, &cfg).is_feasible());
    }

    #[test]
    fn unit_beamformer_violates_small_budget() {
        let params = SystemParams {
            tx_exposure_budget: 0.5,
            ..SystemParams::default()
        };
        let coeffs = ExposureCoefficients::isotropic(3, 1.0, 2, 0.0).unwrap();
        let mut cfg = LinkConfig::zero(4, 3, 2);
        cfg.beamformer[0] = Complex64::new(1.0, 0.0);
        let report = is_feasible(&params, &coeffs, &cfg);
        assert!(!report.is_feasible());
        assert_eq!(report.violations.len(), 1);
        assert!((report.slack(Constraint::TxExposure).unwrap() + 0.5).abs() < 1e-15);
        // Without exposure constraints the same point is fine.
        assert!(check_constraints(&params, &coeffs, &cfg, ConstraintSet::NormOnly).is_feasible());
    }

    #[test]
    fn power_bounds_are_checked() {
        let params = SystemParams::default();
        let coeffs = ExposureCoefficients::isotropic(1, 1.0, 1, 1.0).unwrap();
        let mut cfg = LinkConfig::zero(1, 1, 1);
        cfg.tx_power_w = 20.5;
        let report = is_feasible(&params, &coeffs, &cfg);
        assert_eq!(report.violations[0].constraint, Constraint::PowerMax);
        cfg.tx_power_w = -1.0;
        let report = is_feasible(&params, &coeffs, &cfg);
        assert_eq!(
            report.violations[0].constraint,
            Constraint::PowerNonNegative
        );
    }

    #[test]
    fn default_noise_power() {
        let p = SystemParams::default();
        // -174 dBm/Hz over 5 MHz
        let expected = 10f64.powf(-20.4) * 5e6;
        assert!((p.noise_power_w() / expected - 1.0).abs() < 1e-12);
        p.validate().unwrap();
    }

    #[test]
    fn invalid_params_are_rejected() {
        let bad = SystemParams {
            amp_inefficiency: 0.5,
            ..SystemParams::default()
        };
        assert!(matches!(
            bad.validate(),
            Err(Error::InvalidParameter {
                name: "amp_inefficiency",
                ..
            })
        ));
        let bad = SystemParams {
            static_power_w: 0.0,
            ..SystemParams::default()
        };
        assert!(bad.validate().is_err());
        let bad = SystemParams {
            tx_exposure_budget: -0.1,
            ..SystemParams::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn isotropy_predicate() {
        assert!(ExposureCoefficients::isotropic(4, 0.25, 2, 0.5)
            .unwrap()
            .is_isotropic());
        let c = ExposureCoefficients::new(vec![0.25, 0.3], vec![0.5]).unwrap();
        assert!(!c.is_isotropic());
        assert!(ExposureCoefficients::new(vec![-1.0], vec![0.5]).is_err());
    }

    #[test]
    fn phase_wrapping() {
        assert_eq!(wrap_phase(0.0), 0.0);
        assert!(
            (wrap_phase(-std::f64::consts::FRAC_PI_2) - 1.5 * std::f64::consts::PI).abs() < 1e-15
        );
        assert!((wrap_phase(7.0) - (7.0 - TAU)).abs() < 1e-15);
        assert_eq!(wrap_phase(TAU), 0.0);
        assert_eq!(angle(Complex64::new(0.0, 0.0)), 0.0);
    }

    #[test]
    fn cascade_matches_effective_channel() {
        let h = DMatrix::from_fn(3, 2, |i, j| Complex64::new(i as f64 + 0.5, j as f64 - 0.3));
        let g = DMatrix::from_fn(2, 3, |i, j| Complex64::new(j as f64 * 0.7, 1.0 - i as f64));
        let ch = ChannelPair::new(h, g).unwrap();
        let phases = [0.3, 2.0, 5.5];
        let q = DVector::from_vec(vec![Complex64::new(0.6, 0.1), Complex64::new(-0.2, 0.5)]);
        let w = DVector::from_vec(vec![Complex64::new(0.1, -0.4), Complex64::new(0.7, 0.2)]);
        let direct = (w.adjoint() * ch.cascade(&phases) * &q)[(0, 0)];
        let fast = ch.effective_channel(&phases, &q, &w);
        assert!((direct - fast).norm() < 1e-12);
    }
}
