//! Oracle-based property checks on seeded random instances.
//!
//! Each property compares a solver against an independent route (exhaustive
//! grids, random feasible search, KKT certificates) and reports the seeds of
//! failing instances for replay. The per-block solvers are injected through
//! [`Solvers`] so that a deliberately broken solver can be shown to fail.

use std::f64::consts::TAU;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::algorithms::{alternating_max, global_special_case, AlternatingOptions};
use crate::channel::{sample, trial_seed, ChannelModel, Dims};
use crate::error::Result;
use crate::model::{
    energy_efficiency, is_feasible, ChannelPair, ExposureCoefficients, SystemParams,
};
use crate::subsolvers::{
    kkt_residuals, optimize_phases, optimize_power, solve_conic_linear, ConicLinearProblem,
    ConicSolution, PowerProblem,
};

/// Default master seed of the validation instances.
pub const DEFAULT_VALIDATION_SEED: u64 = 0x05EE_D0F0_AC1E;

/// Per-block solvers under test.
#[derive(Clone, Copy)]
pub struct Solvers {
    pub phases: fn(&[Complex64], &[Complex64]) -> Vec<f64>,
    pub conic: fn(&ConicLinearProblem) -> Result<ConicSolution>,
    pub power: fn(&PowerProblem) -> f64,
}

impl Default for Solvers {
    fn default() -> Self {
        Solvers {
            phases: optimize_phases,
            conic: solve_conic_linear,
            power: optimize_power,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyResult {
    pub name: &'static str,
    pub instances: usize,
    /// Seeds of failing instances.
    pub failures: Vec<u64>,
}

impl PropertyResult {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub properties: Vec<PropertyResult>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.properties.iter().all(PropertyResult::passed)
    }

    /// No instances were checked at all.
    pub fn is_vacuous(&self) -> bool {
        self.properties.iter().all(|p| p.instances == 0)
    }
}

fn complex_normal(rng: &mut impl Rng) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Random point on the boundary of `{Σ c_n |x_n| ≤ budget, ‖x‖ ≤ 1}`.
pub fn random_feasible_vector(
    rng: &mut impl Rng,
    coeffs: &[f64],
    budget: f64,
) -> DVector<Complex64> {
    let d = DVector::from_fn(coeffs.len(), |_, _| complex_normal(rng));
    let exposure: f64 = coeffs.iter().zip(d.iter()).map(|(c, z)| c * z.norm()).sum();
    let mut scale = 1.0 / d.norm();
    if exposure > 0.0 {
        scale = scale.min(budget / exposure);
    }
    d * Complex64::new(scale, 0.0)
}

/// Best EE over `samples` random feasible `(Φ, q, w)`, each with its own
/// power chosen by the supplied power solver.
pub fn random_search_ee(
    rng: &mut impl Rng,
    params: &SystemParams,
    channels: &ChannelPair,
    coeffs: &ExposureCoefficients,
    samples: usize,
    power: fn(&PowerProblem) -> f64,
) -> f64 {
    let mut best: f64 = 0.0;
    for _ in 0..samples {
        let phases: Vec<f64> = (0..channels.n_ris())
            .map(|_| rng.random_range(0.0..TAU))
            .collect();
        let q = random_feasible_vector(rng, coeffs.tx(), params.tx_exposure_budget);
        let w = random_feasible_vector(rng, coeffs.rx(), params.rx_exposure_budget);
        let gain = channels.effective_channel(&phases, &q, &w).norm_sqr();
        let p = power(&PowerProblem {
            gain: gain * params.snr_scale(),
            amp_inefficiency: params.amp_inefficiency,
            static_power_w: params.static_power_w,
            max_tx_power_w: params.max_tx_power_w,
        });
        best = best.max(energy_efficiency(params, gain, p));
    }
    best
}

fn random_conic(rng: &mut impl Rng, n: usize) -> ConicLinearProblem {
    ConicLinearProblem {
        gains: (0..n).map(|_| rng.random_range(0.0..2.0)).collect(),
        coeffs: (0..n).map(|_| rng.random_range(0.0..1.0)).collect(),
        budget: rng.random_range(0.0..1.5),
    }
}

fn check(
    name: &'static str,
    count: usize,
    stream: u64,
    mut property: impl FnMut(u64) -> bool,
) -> PropertyResult {
    let failures = (0..count as u64)
        .map(|i| trial_seed(stream, i))
        .filter(|&seed| !property(seed))
        .collect();
    PropertyResult {
        name,
        instances: count,
        failures,
    }
}

/// Runs every property on `count` seeded instances.
pub fn run_validation(count: usize, master_seed: u64, solvers: &Solvers) -> ValidationReport {
    let solvers = *solvers;
    let mut properties = Vec::new();

    properties.push(check(
        "phase alignment dominates a 64x64 phase grid",
        count,
        master_seed ^ 1,
        |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = [complex_normal(&mut rng), complex_normal(&mut rng)];
            let h = [complex_normal(&mut rng), complex_normal(&mut rng)];
            let value = |p: &[f64]| -> Complex64 {
                (0..2)
                    .map(|n| g[n].conj() * Complex64::cis(p[n]) * h[n])
                    .sum()
            };
            let aligned = value(&(solvers.phases)(&g, &h));
            let closed: f64 = (0..2).map(|n| (g[n] * h[n]).norm()).sum();
            let steps = 64;
            let grid_best = (0..steps * steps)
                .map(|k| {
                    let p = [
                        TAU * (k / steps) as f64 / steps as f64,
                        TAU * (k % steps) as f64 / steps as f64,
                    ];
                    value(&p).norm()
                })
                .fold(0.0, f64::max);
            aligned.im.abs() <= 1e-10 * closed.max(1.0)
                && (aligned.norm() - closed).abs() <= 1e-10 * closed.max(1.0)
                && aligned.norm() >= grid_best - 1e-12
        },
    ));

    properties.push(check(
        "conic solution is feasible and dominates random feasible points",
        count,
        master_seed ^ 2,
        |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(1..=8);
            let prob = random_conic(&mut rng, n);
            let Ok(sol) = (solvers.conic)(&prob) else {
                return false;
            };
            let value = prob.objective(&sol.x);
            let feasible = prob.exposure(&sol.x) <= prob.budget + 1e-9
                && sol.x.iter().map(|x| x * x).sum::<f64>() <= 1.0 + 1e-9
                && sol.x.iter().all(|x| *x >= 0.0);
            feasible
                && (0..10_000).all(|_| {
                    let cand = random_feasible_vector(&mut rng, &prob.coeffs, prob.budget);
                    let mags: Vec<f64> = cand.iter().map(|z| z.norm()).collect();
                    prob.objective(&mags) <= value + 1e-9
                })
        },
    ));

    properties.push(check(
        "conic KKT certificate (slackness <= 1e-7)",
        count,
        master_seed ^ 3,
        |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(1..=8);
            let prob = random_conic(&mut rng, n);
            let Ok(sol) = (solvers.conic)(&prob) else {
                return false;
            };
            let kkt = kkt_residuals(&prob, &sol);
            kkt.exposure_slackness <= 1e-7
                && kkt.norm_slackness <= 1e-7
                && kkt.stationarity <= 1e-7
                && kkt.primal <= 1e-9
        },
    ));

    properties.push(check(
        "single-antenna selection matches the conic solver",
        count,
        master_seed ^ 4,
        |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(1..=8);
            let gains: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..2.0)).collect();
            let c = rng.random_range(0.01..2.0);
            let ratio = rng.random_range(0.0..=1.0);
            let prob = ConicLinearProblem {
                gains: gains.clone(),
                coeffs: vec![c; n],
                budget: ratio * c,
            };
            let Ok(sol) = (solvers.conic)(&prob) else {
                return false;
            };
            let best = gains.iter().copied().fold(0.0, f64::max);
            (prob.objective(&sol.x) - best * ratio).abs() <= 1e-9
        },
    ));

    properties.push(check(
        "power step dominates a 10^4-point grid",
        count,
        master_seed ^ 5,
        |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let prob = PowerProblem {
                gain: 10f64.powf(rng.random_range(-3.0..8.0)),
                amp_inefficiency: rng.random_range(1.0..5.0),
                static_power_w: rng.random_range(0.1..50.0),
                max_tx_power_w: rng.random_range(0.1..50.0),
            };
            let p = (solvers.power)(&prob);
            let value = prob.objective(p);
            (0..=10_000)
                .all(|k| prob.objective(prob.max_tx_power_w * k as f64 / 10_000.0) <= value + 1e-12)
                && (0.0..=prob.max_tx_power_w).contains(&p)
        },
    ));

    properties.push(check(
        "alternating traces are monotone, converge and stay feasible",
        count,
        master_seed ^ 6,
        |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (n, nt, nr) = (
                rng.random_range(1..=32),
                rng.random_range(1..=6),
                rng.random_range(1..=6),
            );
            let Ok(channels) = sample(
                &ChannelModel::default().with_dims(Dims::new(n, nt, nr)),
                seed,
            ) else {
                return false;
            };
            let Ok(coeffs) = ExposureCoefficients::new(
                (0..nt).map(|_| rng.random_range(0.0..1.0)).collect(),
                (0..nr).map(|_| rng.random_range(0.0..1.0)).collect(),
            ) else {
                return false;
            };
            let params = SystemParams {
                tx_exposure_budget: rng.random_range(0.0..1.0),
                rx_exposure_budget: rng.random_range(0.0..1.0),
                ..SystemParams::default()
            };
            match alternating_max(&params, &channels, &coeffs, &AlternatingOptions::default()) {
                Ok((cfg, trace)) => {
                    trace.is_monotone(1e-9)
                        && trace.converged
                        && is_feasible(&params, &coeffs, &cfg).is_feasible()
                }
                Err(_) => false,
            }
        },
    ));

    properties.push(check(
        "closed-form optimum dominates alternating and random search",
        count,
        master_seed ^ 7,
        |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (n, nt, nr) = (
                rng.random_range(1..=4),
                rng.random_range(1..=3),
                rng.random_range(1..=3),
            );
            let Ok(channels) = sample(
                &ChannelModel::default().with_dims(Dims::new(n, nt, nr)),
                seed,
            ) else {
                return false;
            };
            let (c, d) = (1.0 / nt as f64, 1.0 / nr as f64);
            let Ok(coeffs) = ExposureCoefficients::isotropic(nt, c, nr, d) else {
                return false;
            };
            let params = SystemParams {
                tx_exposure_budget: 0.85 * c,
                rx_exposure_budget: 0.85 * d,
                ..SystemParams::default()
            };
            let (Ok((global, _)), Ok((_, trace))) = (
                global_special_case(&params, &channels, c, d),
                alternating_max(&params, &channels, &coeffs, &AlternatingOptions::default()),
            ) else {
                return false;
            };
            let global_gain = channels
                .effective_channel(&global.phases, &global.beamformer, &global.combiner)
                .norm_sqr();
            let global_ee = energy_efficiency(&params, global_gain, global.tx_power_w);
            let alt_ee = trace.final_eval.ee_bits_per_joule;
            let random_ee =
                random_search_ee(&mut rng, &params, &channels, &coeffs, 1_000, solvers.power);
            is_feasible(&params, &coeffs, &global).is_feasible()
                && global_ee >= alt_ee - 1e-9 * global_ee
                && global_ee >= random_ee - 1e-9 * global_ee
        },
    ));

    ValidationReport { properties }
}
