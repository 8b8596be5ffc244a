//! Delta-method uncertainty machinery: per-shot covariance of the parity
//! proportions, estimator gradient, σ(n) = σ₁/√n curves, and confidence
//! intervals.
//!
//! The three proportions come from the same shots, so their joint covariance
//! is not diagonal. Published σ values, however, are reproduced by the
//! diagonal (independent-Bernoulli) convention, which is therefore the
//! default; the full joint-covariance variant stays available through
//! [`SigmaConvention`] and is exercised by the comparison test.

use serde::{Deserialize, Serialize};

use crate::circuit::{joint_parity_distribution, CircuitModel};
use crate::error::{Error, Result};
use crate::estimate;
use crate::states::{BellDiagonalState, NoiseModel};

/// 3×3 per-shot covariance of the parity-agree indicators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotCovariance {
    pub sigma: [[f64; 3]; 3],
}

impl ShotCovariance {
    pub fn diagonal(&self) -> [f64; 3] {
        [self.sigma[0][0], self.sigma[1][1], self.sigma[2][2]]
    }

    /// Quadratic form gᵀ Σ g.
    pub fn quadratic_form(&self, g: &[f64; 3]) -> f64 {
        let mut q = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                q += g[i] * self.sigma[i][j] * g[j];
            }
        }
        q
    }
}

/// Which covariance enters the delta-method variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SigmaConvention {
    /// Independent Bernoulli variances f_i(1−f_i) only (default).
    Diagonal,
    /// Full joint covariance including cross terms.
    FullJoint,
}

/// σ(n) = sigma1/√n for a given true state and noise level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaCurve {
    pub sigma1: f64,
    pub state: BellDiagonalState,
    pub lambda: f64,
}

impl SigmaCurve {
    pub fn sigma_at(&self, n: u64) -> f64 {
        self.sigma1 / (n as f64).sqrt()
    }
}

/// Agree-probability marginals (f₁, f₂, f₃) of the oracle's joint
/// distribution.
pub fn marginal_parity_probs(state: &BellDiagonalState, oracle: &CircuitModel) -> [f64; 3] {
    joint_parity_distribution(state, oracle).agree_marginals()
}

/// Exact Σ from the 8-cell joint distribution:
/// Σ_ij = P(agree_i ∧ agree_j) − f_i f_j.
pub fn shot_covariance(state: &BellDiagonalState, oracle: &CircuitModel) -> ShotCovariance {
    let dist = joint_parity_distribution(state, oracle);
    let f = dist.agree_marginals();
    let mut sigma = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let joint = if i == j {
                f[i]
            } else {
                dist.pair_agree(i, j)
            };
            sigma[i][j] = joint - f[i] * f[j];
        }
    }
    ShotCovariance { sigma }
}

/// Raw â as a smooth function of the proportions, for differentiation. Uses
/// the closed-form inversion, which coincides with the Newton-refined
/// estimator on the feasible region.
fn a_raw(p: [f64; 3], lambda: f64) -> f64 {
    let (bet, del) = (estimate::beta(lambda), estimate::delta(lambda));
    let u = ((p[0] - 0.5) / bet).sqrt();
    let v = ((p[1] - 0.5) / bet).sqrt();
    0.25 * (u + v + 1.0) - (p[2] - 0.5) / (2.0 * del * u * u * v)
}

fn analytic_gradient(f: [f64; 3], lambda: f64) -> [f64; 3] {
    let (bet, del) = (estimate::beta(lambda), estimate::delta(lambda));
    let u = ((f[0] - 0.5) / bet).sqrt();
    let v = ((f[1] - 0.5) / bet).sqrt();
    let q = f[2] - 0.5;
    let da_du = 0.25 + q / (del * u * u * u * v);
    let da_dv = 0.25 + q / (2.0 * del * u * u * v * v);
    [
        da_du / (2.0 * bet * u),
        da_dv / (2.0 * bet * v),
        -1.0 / (2.0 * del * u * u * v),
    ]
}

/// Richardson-checked central finite differences on the inversion map.
fn finite_difference_gradient(f: [f64; 3], lambda: f64) -> [f64; 3] {
    let h = 1e-6;
    let mut g = [0.0; 3];
    for i in 0..3 {
        let deriv = |step: f64| {
            let (mut lo, mut hi) = (f, f);
            lo[i] -= step;
            hi[i] += step;
            (a_raw(hi, lambda) - a_raw(lo, lambda)) / (2.0 * step)
        };
        let (d1, d2) = (deriv(h), deriv(h / 2.0));
        // Richardson extrapolation; d1 and d2 double as a consistency check
        g[i] = (4.0 * d2 - d1) / 3.0;
        debug_assert!((d1 - d2).abs() <= 1e-4 * (1.0 + d2.abs()));
    }
    g
}

/// Gradient of the inversion map â = g(p₁,p₂,p₃) at the point f.
/// Analytic at λ = 0; central finite differences for general λ.
pub fn estimator_gradient(
    f: [f64; 3],
    noise: NoiseModel,
    _oracle: &CircuitModel,
) -> Result<[f64; 3]> {
    if f[0] <= 0.5 + 1e-12 || f[1] <= 0.5 + 1e-12 {
        return Err(Error::BoundarySingularity);
    }
    if noise.is_noiseless() {
        Ok(analytic_gradient(f, 0.0))
    } else {
        Ok(finite_difference_gradient(f, noise.lambda()))
    }
}

/// σ₁ under an explicit covariance convention.
pub fn sigma_one_with(
    state: &BellDiagonalState,
    noise: NoiseModel,
    oracle: &CircuitModel,
    convention: SigmaConvention,
) -> Result<SigmaCurve> {
    if state.a() < 0.5 {
        return Err(Error::Domain {
            value: state.a(),
            domain: "a >= 0.5",
        });
    }
    let f = marginal_parity_probs(state, oracle);
    let g = estimator_gradient(f, noise, oracle)?;
    let var = match convention {
        SigmaConvention::Diagonal => {
            let d = [f[0] * (1.0 - f[0]), f[1] * (1.0 - f[1]), f[2] * (1.0 - f[2])];
            g[0] * g[0] * d[0] + g[1] * g[1] * d[1] + g[2] * g[2] * d[2]
        }
        SigmaConvention::FullJoint => shot_covariance(state, oracle).quadratic_form(&g),
    };
    Ok(SigmaCurve {
        sigma1: var.max(0.0).sqrt(),
        state: *state,
        lambda: noise.lambda(),
    })
}

/// Default σ₁ (diagonal convention — the one that reproduces the published
/// table; see the convention-comparison test).
pub fn sigma_one(
    state: &BellDiagonalState,
    noise: NoiseModel,
    oracle: &CircuitModel,
) -> Result<SigmaCurve> {
    sigma_one_with(state, noise, oracle, SigmaConvention::Diagonal)
}

/// [a_hat − k·σ₁/√n, a_hat + k·σ₁/√n] clipped to [0,1].
pub fn confidence_interval(a_hat: f64, curve: &SigmaCurve, n: u64, k_sigma: f64) -> (f64, f64) {
    let half = k_sigma * curve.sigma_at(n);
    ((a_hat - half).max(0.0), (a_hat + half).min(1.0))
}
