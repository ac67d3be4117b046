//! Per-block optimizers used by the alternating and closed-form algorithms.
//!
//! Each routine globally solves its block with the others held fixed:
//!
//! * RIS phases: co-phasing of `conj(g_n) h_n`.
//! * Beamformer / combiner magnitudes: a linear objective over the
//!   intersection of a weighted-ℓ1 exposure budget and the unit ℓ2 ball,
//!   solved through its two-multiplier KKT system.
//! * Transmit power: a scalar pseudo-concave ratio, solved by bisection on
//!   the sign of its derivative.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{angle, wrap_phase};

/// Maximum bisection steps; far more than needed to reach the f64 floor.
const MAX_BISECTIONS: usize = 200;

/// Phases maximizing `|Σ_n conj(g_n) e^{jφ_n} h_n|`, i.e. `φ_n = −∠(g_n* h_n)`.
///
/// `g = Gᴴ w` and `h = H q`. After applying the result the sum equals
/// `Σ_n |g_n h_n|` and is real non-negative.
pub fn optimize_phases(g: &[Complex64], h: &[Complex64]) -> Vec<f64> {
    debug_assert_eq!(g.len(), h.len());
    g.iter()
        .zip(h)
        .map(|(gn, hn)| wrap_phase(-angle(gn.conj() * hn)))
        .collect()
}

/// `max Σ gains_n x_n  s.t.  Σ coeffs_n x_n ≤ budget,  Σ x_n² ≤ 1,  x ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConicLinearProblem {
    pub gains: Vec<f64>,
    pub coeffs: Vec<f64>,
    pub budget: f64,
}

/// Optimal magnitudes together with the KKT multipliers that certify them.
///
/// Stationarity reads `gains_n − λ coeffs_n − 2ν x_n = 0` on the support and
/// `≤ 0` off it, with `λ` the exposure multiplier and `ν` the norm multiplier.
#[derive(Debug, Clone, PartialEq)]
pub struct ConicSolution {
    pub x: Vec<f64>,
    pub exposure_multiplier: f64,
    pub norm_multiplier: f64,
}

impl ConicLinearProblem {
    pub fn new(gains: Vec<f64>, coeffs: Vec<f64>, budget: f64) -> Result<Self> {
        let prob = ConicLinearProblem {
            gains,
            coeffs,
            budget,
        };
        prob.validate()?;
        Ok(prob)
    }

    pub fn validate(&self) -> Result<()> {
        if self.gains.is_empty() {
            return Err(Error::invalid("gains", "need at least one entry"));
        }
        if self.coeffs.len() != self.gains.len() {
            return Err(Error::DimensionMismatch {
                what: "exposure coefficients",
                expected: self.gains.len(),
                actual: self.coeffs.len(),
            });
        }
        if let Some(i) = self
            .gains
            .iter()
            .position(|v| !(v.is_finite() && *v >= 0.0))
        {
            return Err(Error::invalid(
                "gains",
                format!("entry {i} must be finite and >= 0"),
            ));
        }
        if let Some(i) = self
            .coeffs
            .iter()
            .position(|v| !(v.is_finite() && *v >= 0.0))
        {
            return Err(Error::invalid(
                "coeffs",
                format!("entry {i} must be finite and >= 0"),
            ));
        }
        if !(self.budget.is_finite() && self.budget >= 0.0) {
            return Err(Error::invalid(
                "budget",
                format!("must be finite and >= 0, got {}", self.budget),
            ));
        }
        Ok(())
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.gains.iter().zip(x).map(|(a, x)| a * x).sum()
    }

    pub fn exposure(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().zip(x).map(|(c, x)| c * x).sum()
    }

    /// `(gains − λ coeffs)_+`
    fn shifted(&self, lambda: f64) -> Vec<f64> {
        self.gains
            .iter()
            .zip(&self.coeffs)
            .map(|(a, c)| (a - lambda * c).max(0.0))
            .collect()
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Global maximizer of a [`ConicLinearProblem`].
///
/// The dual function is `λ·budget + ‖(gains − λ coeffs)_+‖`; its derivative
/// is `budget − coeffs·x(λ)` with `x(λ)` the normalized shifted gains. Three
/// regimes arise:
///
/// 1. `λ = 0`: the normalized gains already meet the budget (norm tight).
/// 2. `0 < λ < λ_max`: both constraints tight; `λ` is found by bisection on
///    the monotone exposure of `x(λ)`.
/// 3. `λ = λ_max = max gains_n / coeffs_n`: the dual has a kink, the unit
///    ball is slack and the budget is spent on the best gain-per-cost
///    antennas.
pub fn solve_conic_linear(prob: &ConicLinearProblem) -> Result<ConicSolution> {
    prob.validate()?;
    let n = prob.gains.len();
    let gains_norm = norm(&prob.gains);
    if gains_norm == 0.0 {
        return Ok(ConicSolution {
            x: vec![0.0; n],
            exposure_multiplier: 0.0,
            norm_multiplier: 0.0,
        });
    }

    let unconstrained: Vec<f64> = prob.gains.iter().map(|a| a / gains_norm).collect();
    if prob.exposure(&unconstrained) <= prob.budget {
        return Ok(ConicSolution {
            x: unconstrained,
            exposure_multiplier: 0.0,
            norm_multiplier: gains_norm / 2.0,
        });
    }

    // Antennas that cost no exposure keep a positive shifted gain for every λ,
    // so the exposure of x(λ) eventually drops to zero and a root exists.
    let free_gain = prob
        .gains
        .iter()
        .zip(&prob.coeffs)
        .any(|(a, c)| *c == 0.0 && *a > 0.0);
    let lambda_max = prob
        .gains
        .iter()
        .zip(&prob.coeffs)
        .filter(|(_, c)| **c > 0.0)
        .map(|(a, c)| a / c)
        .fold(0.0, f64::max);

    if !free_gain {
        // Limit direction of x(λ) as λ → λ_max is proportional to the
        // coefficients of the antennas attaining the best ratio.
        let tied: Vec<f64> = prob
            .gains
            .iter()
            .zip(&prob.coeffs)
            .map(|(a, c)| {
                if *c > 0.0 && a / c == lambda_max {
                    *c
                } else {
                    0.0
                }
            })
            .collect();
        let tied_norm = norm(&tied);
        if tied_norm >= prob.budget {
            let scale = prob.budget / (tied_norm * tied_norm);
            return Ok(ConicSolution {
                x: tied.iter().map(|c| c * scale).collect(),
                exposure_multiplier: lambda_max,
                norm_multiplier: 0.0,
            });
        }
    }

    // Both constraints tight. `lo` keeps exposure above budget, `hi` below;
    // bisect down to adjacent doubles.
    let mut lo = 0.0;
    let mut hi = lambda_max;
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let shifted = prob.shifted(mid);
        let s = norm(&shifted);
        let exposure = if s > 0.0 {
            prob.exposure(&shifted) / s
        } else {
            0.0
        };
        if exposure > prob.budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    let shifted = prob.shifted(hi);
    let s = norm(&shifted);
    let x = if s > 0.0 {
        shifted.iter().map(|v| v / s).collect()
    } else {
        vec![0.0; n]
    };
    Ok(ConicSolution {
        x,
        exposure_multiplier: hi,
        norm_multiplier: s / 2.0,
    })
}

/// KKT residuals of a candidate solution: the larger of the two
/// complementary-slackness products and the worst stationarity violation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResiduals {
    pub exposure_slackness: f64,
    pub norm_slackness: f64,
    pub stationarity: f64,
    pub primal: f64,
}

pub fn kkt_residuals(prob: &ConicLinearProblem, sol: &ConicSolution) -> KktResiduals {
    let lambda = sol.exposure_multiplier;
    let nu = sol.norm_multiplier;
    let exposure_slack = prob.budget - prob.exposure(&sol.x);
    let norm_slack = 1.0 - sol.x.iter().map(|x| x * x).sum::<f64>();
    let stationarity = prob
        .gains
        .iter()
        .zip(&prob.coeffs)
        .zip(&sol.x)
        .map(|((a, c), x)| {
            let grad = a - lambda * c - 2.0 * nu * x;
            if *x > 0.0 {
                grad.abs()
            } else {
                grad.max(0.0)
            }
        })
        .fold(0.0, f64::max);
    KktResiduals {
        exposure_slackness: (lambda * exposure_slack).abs(),
        norm_slackness: (nu * norm_slack).abs(),
        stationarity,
        primal: (-exposure_slack).max(-norm_slack).max(0.0),
    }
}

/// Complex weights with phases aligned to `target` and magnitudes from the
/// exposure/norm problem, so that `targetᴴ x` is real non-negative.
fn align_and_solve(
    target: &DVector<Complex64>,
    coeffs: &[f64],
    budget: f64,
) -> Result<DVector<Complex64>> {
    let prob = ConicLinearProblem::new(
        target.iter().map(|z| z.norm()).collect(),
        coeffs.to_vec(),
        budget,
    )?;
    let sol = solve_conic_linear(&prob)?;
    Ok(DVector::from_iterator(
        target.len(),
        target
            .iter()
            .zip(&sol.x)
            .map(|(z, x)| Complex64::from_polar(*x, angle(*z))),
    ))
}

/// Beamformer maximizing `|vᴴ q|` under the transmit exposure budget and
/// `‖q‖ ≤ 1`, where `vᴴ = wᴴ G Φ H`.
pub fn align_and_solve_beamformer(
    v: &DVector<Complex64>,
    coeffs: &[f64],
    budget: f64,
) -> Result<DVector<Complex64>> {
    align_and_solve(v, coeffs, budget)
}

/// Combiner maximizing `|wᴴ u|` under the receive exposure budget and
/// `‖w‖ ≤ 1`, where `u = G Φ H q`.
pub fn align_and_solve_combiner(
    u: &DVector<Complex64>,
    coeffs: &[f64],
    budget: f64,
) -> Result<DVector<Complex64>> {
    align_and_solve(u, coeffs, budget)
}

/// Unit-norm matched filter `v / ‖v‖` (zero when `v = 0`).
pub fn matched_unit(v: &DVector<Complex64>) -> DVector<Complex64> {
    let n = v.norm();
    if n > 0.0 {
        v / Complex64::new(n, 0.0)
    } else {
        DVector::zeros(v.len())
    }
}

/// Index of the first maximum (lowest index wins ties).
pub fn argmax_first(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in values.iter().enumerate() {
        match best {
            Some(b) if values[b] >= *v => {}
            _ => best = Some(i),
        }
    }
    best
}

/// Isotropic fast path: all of the budget `P/c` on the strongest antenna.
///
/// Only optimal when `budget_over_coeff ≤ 1`, where the exposure budget
/// implies the unit-norm constraint.
pub fn select_single_antenna(gains: &[f64], budget_over_coeff: f64) -> Result<Vec<f64>> {
    if !(budget_over_coeff.is_finite() && budget_over_coeff >= 0.0) {
        return Err(Error::invalid(
            "budget_over_coeff",
            "must be finite and >= 0",
        ));
    }
    if budget_over_coeff > 1.0 {
        return Err(Error::Precondition(format!(
            "budget-to-coefficient ratio {budget_over_coeff} exceeds 1; the single-antenna solution is not optimal"
        )));
    }
    let best =
        argmax_first(gains).ok_or_else(|| Error::invalid("gains", "need at least one entry"))?;
    let mut x = vec![0.0; gains.len()];
    x[best] = budget_over_coeff;
    Ok(x)
}

/// `max log2(1 + p·gain) / (μ p + P_c)  s.t.  0 ≤ p ≤ P_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerProblem {
    /// `|wᴴ G Φ H q|² / (δ σ²)`
    pub gain: f64,
    pub amp_inefficiency: f64,
    pub static_power_w: f64,
    pub max_tx_power_w: f64,
}

impl PowerProblem {
    pub fn objective(&self, p: f64) -> f64 {
        (p * self.gain).ln_1p()
            / std::f64::consts::LN_2
            / (self.amp_inefficiency * p + self.static_power_w)
    }

    /// Positive multiple of the derivative of [`Self::objective`].
    fn derivative_sign(&self, p: f64) -> f64 {
        let c = self.gain;
        c * (self.amp_inefficiency * p + self.static_power_w) / (1.0 + p * c)
            - self.amp_inefficiency * (p * c).ln_1p()
    }
}

/// Global maximizer of the power problem.
///
/// The derivative sign function is strictly decreasing, so the stationary
/// point is bracketed by bisection over `[0, P_max]`.
pub fn optimize_power(prob: &PowerProblem) -> f64 {
    let p_max = prob.max_tx_power_w;
    if !(prob.gain > 0.0) || !(p_max > 0.0) {
        return 0.0;
    }
    if prob.derivative_sign(p_max) >= 0.0 {
        return p_max;
    }
    let (mut lo, mut hi) = (0.0, p_max);
    let width = 1e-12 * p_max;
    for _ in 0..MAX_BISECTIONS {
        if hi - lo <= width {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if prob.derivative_sign(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let p = 0.5 * (lo + hi);
    // Pick the better endpoint of the final bracket.
    [lo, p, hi]
        .into_iter()
        .max_by(|a, b| prob.objective(*a).total_cmp(&prob.objective(*b)))
        .unwrap_or(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn aligned_sum(g: &[Complex64], h: &[Complex64], phases: &[f64]) -> Complex64 {
        g.iter()
            .zip(h)
            .zip(phases)
            .map(|((g, h), phi)| g.conj() * Complex64::cis(*phi) * h)
            .sum()
    }

    #[test]
    fn phase_examples() {
        assert_eq!(optimize_phases(&[c(1.0, 0.0)], &[c(1.0, 0.0)]), vec![0.0]);
        let phi = optimize_phases(&[c(0.0, 1.0)], &[c(1.0, 0.0)]);
        assert!((phi[0] - FRAC_PI_2).abs() < 1e-15);
        assert_eq!(optimize_phases(&[c(0.0, 0.0)], &[c(1.0, 2.0)]), vec![0.0]);
    }

    #[test]
    fn phase_alignment_beats_exhaustive_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g: Vec<Complex64> = (0..2)
            .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let h: Vec<Complex64> = (0..2)
            .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let phases = optimize_phases(&g, &h);
        let value = aligned_sum(&g, &h, &phases);
        let closed: f64 = g.iter().zip(&h).map(|(g, h)| (g * h).norm()).sum();
        assert!((value.norm() - closed).abs() < 1e-10);
        assert!(value.im.abs() < 1e-10 && value.re > 0.0);

        let steps = 256;
        let mut best: f64 = 0.0;
        for i in 0..steps {
            for j in 0..steps {
                let p = [
                    2.0 * PI * i as f64 / steps as f64,
                    2.0 * PI * j as f64 / steps as f64,
                ];
                best = best.max(aligned_sum(&g, &h, &p).norm());
            }
        }
        assert!(value.norm() >= best - 1e-12);
    }

    #[test]
    fn conic_norm_tight() {
        let sol = solve_conic_linear(
            &ConicLinearProblem::new(vec![3.0, 4.0], vec![0.0, 0.0], 0.0).unwrap(),
        )
        .unwrap();
        assert!((sol.x[0] - 0.6).abs() < 1e-15 && (sol.x[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn conic_exposure_tight_scalar() {
        let prob = ConicLinearProblem::new(vec![1.0], vec![1.0], 0.5).unwrap();
        let sol = solve_conic_linear(&prob).unwrap();
        assert!((sol.x[0] - 0.5).abs() < 1e-15);
        assert_eq!(sol.norm_multiplier, 0.0);
    }

    #[test]
    fn conic_isotropic_picks_strongest() {
        let prob = ConicLinearProblem::new(vec![2.0, 1.0], vec![1.0, 1.0], 0.8).unwrap();
        let sol = solve_conic_linear(&prob).unwrap();
        assert!((sol.x[0] - 0.8).abs() < 1e-12 && sol.x[1].abs() < 1e-12);
        // grid oracle, step 1e-3
        let mut best: f64 = 0.0;
        for i in 0..=1000 {
            for j in 0..=1000 {
                let x = [i as f64 * 1e-3, j as f64 * 1e-3];
                if prob.exposure(&x) <= 0.8 + 1e-12 && x[0] * x[0] + x[1] * x[1] <= 1.0 {
                    best = best.max(prob.objective(&x));
                }
            }
        }
        assert!((prob.objective(&sol.x) - best).abs() < 1e-9);
    }

    /// Projected gradient ascent onto {x ≥ 0, c·x ≤ P, ‖x‖ ≤ 1} with the
    /// projection computed by alternating projections (Dykstra).
    fn projected_gradient(prob: &ConicLinearProblem, iters: usize, step: f64) -> Vec<f64> {
        let project = |y: &[f64]| -> Vec<f64> {
            let n = y.len();
            let mut x = y.to_vec();
            let mut p = vec![0.0; n];
            let mut q = vec![0.0; n];
            for _ in 0..20 {
                // halfspace ∩ orthant
                let z: Vec<f64> = (0..n).map(|i| x[i] + p[i]).collect();
                let mut lo = 0.0;
                let mut hi = 1e3;
                let clip = |t: f64| -> Vec<f64> {
                    (0..n)
                        .map(|i| (z[i] - t * prob.coeffs[i]).max(0.0))
                        .collect()
                };
                let y1 = if prob.exposure(&clip(0.0)) <= prob.budget {
                    clip(0.0)
                } else {
                    for _ in 0..60 {
                        let mid = 0.5 * (lo + hi);
                        if prob.exposure(&clip(mid)) > prob.budget {
                            lo = mid
                        } else {
                            hi = mid
                        }
                    }
                    clip(hi)
                };
                for i in 0..n {
                    p[i] = z[i] - y1[i];
                }
                // ball
                let z2: Vec<f64> = (0..n).map(|i| y1[i] + q[i]).collect();
                let nz = norm(&z2);
                let y2: Vec<f64> = z2
                    .iter()
                    .map(|v| if nz > 1.0 { v / nz } else { *v })
                    .collect();
                for i in 0..n {
                    q[i] = z2[i] - y2[i];
                }
                x = y2;
            }
            x
        };
        let mut x = vec![0.0; prob.gains.len()];
        for _ in 0..iters {
            let y: Vec<f64> = x
                .iter()
                .zip(&prob.gains)
                .map(|(x, a)| x + step * a)
                .collect();
            x = project(&y);
        }
        x
    }

    #[test]
    fn conic_matches_projected_gradient_non_isotropic() {
        let prob = ConicLinearProblem::new(vec![2.0, 1.0], vec![1.0, 3.0], 1.5).unwrap();
        let sol = solve_conic_linear(&prob).unwrap();
        let oracle = projected_gradient(&prob, 100_000, 1e-3);
        let oracle_obj = prob.objective(&oracle);
        assert!(
            (prob.objective(&sol.x) - oracle_obj).abs() < 1e-4,
            "{:?} vs {:?}",
            sol.x,
            oracle
        );
        let kkt = kkt_residuals(&prob, &sol);
        assert!(kkt.exposure_slackness <= 1e-7 && kkt.norm_slackness <= 1e-7);
        assert!(kkt.stationarity <= 1e-7 && kkt.primal <= 1e-9, "{kkt:?}");
    }

    #[test]
    fn conic_zero_gains_and_zero_budget() {
        let sol = solve_conic_linear(
            &ConicLinearProblem::new(vec![0.0, 0.0], vec![1.0, 2.0], 1.0).unwrap(),
        )
        .unwrap();
        assert_eq!(sol.x, vec![0.0, 0.0]);
        let sol = solve_conic_linear(
            &ConicLinearProblem::new(vec![1.0, 2.0], vec![1.0, 2.0], 0.0).unwrap(),
        )
        .unwrap();
        assert_eq!(sol.x, vec![0.0, 0.0]);
        // a free antenna takes the whole unit norm when the budget is zero
        let prob = ConicLinearProblem::new(vec![1.0, 2.0, 0.5], vec![1.0, 0.0, 0.0], 0.0).unwrap();
        let sol = solve_conic_linear(&prob).unwrap();
        let n = (4.0f64 + 0.25).sqrt();
        assert!(
            sol.x[0] == 0.0
                && (sol.x[1] - 2.0 / n).abs() < 1e-12
                && (sol.x[2] - 0.5 / n).abs() < 1e-12
        );
    }

    #[test]
    fn conic_rejects_bad_input() {
        assert!(ConicLinearProblem::new(vec![], vec![], 1.0).is_err());
        assert!(ConicLinearProblem::new(vec![1.0], vec![1.0, 2.0], 1.0).is_err());
        assert!(ConicLinearProblem::new(vec![1.0], vec![-1.0], 1.0).is_err());
        assert!(ConicLinearProblem::new(vec![1.0], vec![1.0], -1.0).is_err());
    }

    #[test]
    fn conic_ties_split_budget() {
        let prob = ConicLinearProblem::new(vec![2.0, 2.0], vec![1.0, 1.0], 0.5).unwrap();
        let sol = solve_conic_linear(&prob).unwrap();
        assert!((prob.objective(&sol.x) - 1.0).abs() < 1e-12);
        assert!((prob.exposure(&sol.x) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn beamformer_examples() {
        let q =
            align_and_solve_beamformer(&DVector::from_vec(vec![c(1.0, 0.0)]), &[0.0], 0.3).unwrap();
        assert!((q[0] - c(1.0, 0.0)).norm() < 1e-15);

        let v = DVector::from_vec(vec![c(-2.0, 0.0), c(0.0, 1.0)]);
        let q = align_and_solve_beamformer(&v, &[0.0, 0.0], 0.0).unwrap();
        let s5 = 5f64.sqrt();
        assert!((q[0].norm() - 2.0 / s5).abs() < 1e-15 && (q[1].norm() - 1.0 / s5).abs() < 1e-15);
        assert!((angle(q[0]) - PI).abs() < 1e-15 && (angle(q[1]) - FRAC_PI_2).abs() < 1e-15);
        let inner = (v.adjoint() * &q)[(0, 0)];
        assert!(inner.im.abs() < 1e-15 && inner.re > 0.0);
    }

    fn random_dominance(seed: u64, combiner: bool) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 3;
        let v = DVector::from_fn(n, |_, _| {
            c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let coeffs: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
        let budget = 0.4;
        let q = if combiner {
            align_and_solve_combiner(&v, &coeffs, budget).unwrap()
        } else {
            align_and_solve_beamformer(&v, &coeffs, budget).unwrap()
        };
        let value = (v.adjoint() * &q)[(0, 0)].norm();
        for _ in 0..100_000 {
            let d = DVector::from_fn(n, |_, _| {
                c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            });
            let exp: f64 = coeffs.iter().zip(d.iter()).map(|(c, z)| c * z.norm()).sum();
            let scale = (1.0 / d.norm()).min(budget / exp) * rng.random_range(0.0..=1.0f64).sqrt();
            let cand = d * c(scale, 0.0);
            assert!((v.adjoint() * &cand)[(0, 0)].norm() <= value + 1e-12);
        }
    }

    #[test]
    fn beamformer_dominates_random_feasible() {
        random_dominance(11, false);
    }

    #[test]
    fn combiner_examples() {
        let w =
            align_and_solve_combiner(&DVector::from_vec(vec![c(1.0, 0.0)]), &[0.0], 5.0).unwrap();
        assert!((w[0] - c(1.0, 0.0)).norm() < 1e-15);
        let u = DVector::from_vec(vec![c(-2.0, 0.0), c(0.0, 1.0)]);
        let w = align_and_solve_combiner(&u, &[0.0, 0.0], 0.0).unwrap();
        assert!((angle(w[0]) - PI).abs() < 1e-15 && (angle(w[1]) - FRAC_PI_2).abs() < 1e-15);
        assert!((w[0].norm() - 2.0 / 5f64.sqrt()).abs() < 1e-15);
        random_dominance(12, true);
    }

    #[test]
    fn single_antenna_examples() {
        assert_eq!(
            select_single_antenna(&[1.0, 5.0, 3.0], 0.85).unwrap(),
            vec![0.0, 0.85, 0.0]
        );
        assert_eq!(
            select_single_antenna(&[2.0, 2.0], 0.5).unwrap(),
            vec![0.5, 0.0]
        );
        assert!(matches!(
            select_single_antenna(&[1.0], 1.2),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn single_antenna_matches_general_solver() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let gains: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..3.0)).collect();
            let c = rng.random_range(0.05..2.0);
            let x = select_single_antenna(&gains, 0.85).unwrap();
            let prob = ConicLinearProblem::new(gains.clone(), vec![c; 4], 0.85 * c).unwrap();
            let sol = solve_conic_linear(&prob).unwrap();
            assert!((prob.objective(&x) - prob.objective(&sol.x)).abs() < 1e-9);
        }
    }

    fn power(gain: f64, mu: f64, pc: f64, pmax: f64) -> PowerProblem {
        PowerProblem {
            gain,
            amp_inefficiency: mu,
            static_power_w: pc,
            max_tx_power_w: pmax,
        }
    }

    #[test]
    fn power_edge_cases() {
        assert_eq!(optimize_power(&power(0.0, 1.0, 1.0, 20.0)), 0.0);
        assert_eq!(optimize_power(&power(1.0, 1.0, 1e9, 20.0)), 20.0);
    }

    #[test]
    fn power_matches_dense_grid() {
        let prob = power(10.0, 1.0, 1.0, 20.0);
        let p = optimize_power(&prob);
        let (mut best_p, mut best_f) = (0.0, 0.0);
        let steps = 20_000_000;
        for i in 0..=steps {
            let q = 20.0 * i as f64 / steps as f64;
            let f = prob.objective(q);
            if f > best_f {
                best_f = f;
                best_p = q;
            }
        }
        assert!((p - best_p).abs() < 1e-5, "{p} vs {best_p}");
        assert!(prob.objective(p) >= best_f - 1e-10);
    }
}
