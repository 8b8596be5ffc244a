//! State reconstruction from parity proportions.
//!
//! The noise model admits closed-form agree marginals at every λ:
//!
//! ```text
//! f1 = 1/2 + β u²,   f2 = 1/2 + β v²,
//! f3 = 1/2 + (δ/2) u²v (u + v + 1 − 4a),
//! ```
//!
//! with u = 2(a+b)−1, v = 2(a+d)−1, β = (1−λ)²/2 and δ = (1−λ)¹⁰. The β
//! factor counts the two λ/2 parity-flip sources feeding each of locations 1
//! and 2; δ counts the ten feeding location 3. Inversion is therefore closed
//! form for any λ; [`invert_general`] still refines the solution with a
//! damped Newton iteration against the circuit oracle's marginals, so the
//! reconstruction remains anchored to the simulated circuit rather than to
//! the derived formulas.

use serde::{Deserialize, Serialize};

use crate::circuit::{CircuitModel, MeasurementTally};
use crate::error::{Error, Result};
use crate::states::{project_to_simplex, BellDiagonalState, NoiseModel};

/// Parity-agree proportions at the three measurement locations.
/// `n_shots = 0` marks exact/analytic input (strict domain checking).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParityProportions {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub n_shots: u64,
}

impl ParityProportions {
    pub fn exact(p1: f64, p2: f64, p3: f64) -> Self {
        Self {
            p1,
            p2,
            p3,
            n_shots: 0,
        }
    }

    pub fn from_tally(t: &MeasurementTally) -> Self {
        let [p1, p2, p3] = t.proportions();
        Self {
            p1,
            p2,
            p3,
            n_shots: t.n_shots,
        }
    }
}

/// Reconstructed state plus diagnostic flags.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionResult {
    pub state: BellDiagonalState,
    pub a_hat: f64,
    /// p₁ or p₂ fell below 1/2 and was clamped before taking square roots.
    pub clamped: bool,
    /// The raw solution left the probability simplex and was projected back.
    pub projected: bool,
}

/// Flip-retention factor for locations 1 and 2: β(λ) = (1−λ)²/2.
pub fn beta(lambda: f64) -> f64 {
    let r = 1.0 - lambda;
    0.5 * r * r
}

/// Flip-retention factor for location 3: δ(λ) = (1−λ)¹⁰.
pub fn delta(lambda: f64) -> f64 {
    (1.0 - lambda).powi(10)
}

/// Closed-form agree marginals (f₁, f₂, f₃) for four copies of `state`.
pub fn forward_marginals(state: &BellDiagonalState, noise: NoiseModel) -> [f64; 3] {
    let [a, b, _c, d] = state.coeffs();
    let (u, v) = (2.0 * (a + b) - 1.0, 2.0 * (a + d) - 1.0);
    let (bet, del) = (beta(noise.lambda()), delta(noise.lambda()));
    [
        0.5 + bet * u * u,
        0.5 + bet * v * v,
        0.5 + 0.5 * del * u * u * v * (u + v + 1.0 - 4.0 * a),
    ]
}

/// Closed-form inversion of the marginal system at noise level λ.
/// Returns the raw coefficient vector (sum exactly 1, possibly outside the
/// simplex) and whether clamping occurred.
fn invert_closed(p: &ParityProportions, lambda: f64) -> Result<([f64; 4], bool)> {
    let exact = p.n_shots == 0;
    if exact && (p.p1 < 0.5 - 1e-6 || p.p2 < 0.5 - 1e-6) {
        return Err(Error::LowParity(p.p1.min(p.p2)));
    }
    let mut clamped = false;
    let floor = 0.5 + 1e-9;
    let (p1, p2) = (p.p1.max(floor), p.p2.max(floor));
    if p1 > p.p1 || p2 > p.p2 {
        clamped = true;
    }
    let (bet, del) = (beta(lambda), delta(lambda));
    let u = ((p1 - 0.5) / bet).sqrt();
    let v = ((p2 - 0.5) / bet).sqrt();
    let denom = 2.0 * del * u * u * v;
    if denom == 0.0 || !denom.is_finite() {
        return Err(Error::BoundarySingularity);
    }
    let a = 0.25 * (u + v + 1.0) - (p.p3 - 0.5) / denom;
    let b = 0.5 * (1.0 + u) - a;
    let d = 0.5 * (1.0 + v) - a;
    let c = 1.0 - a - b - d;
    Ok(([a, b, c, d], clamped))
}

fn finish(raw: [f64; 4], clamped: bool) -> Result<ReconstructionResult> {
    let outside = raw.iter().any(|&x| !(-1e-12..=1.0 + 1e-12).contains(&x));
    let state = project_to_simplex(raw)?;
    Ok(ReconstructionResult {
        state,
        a_hat: state.a(),
        clamped,
        projected: outside,
    })
}

/// Noiseless-circuit inversion: the closed-form solution at λ = 0.
pub fn invert_ideal(p: &ParityProportions) -> Result<ReconstructionResult> {
    let (raw, clamped) = invert_closed(p, 0.0)?;
    finish(raw, clamped)
}

/// General-λ inversion against the circuit oracle's marginals.
///
/// Strategy: damped Newton on (a,b,c) with d = 1−a−b−c, using the oracle's
/// exact polynomial marginals and their exact gradients. Multi-start from 8
/// deterministic seeds — the closed-form solution first, then a Werner
/// ladder — keeping the root with the smallest residual (ties: largest a).
/// Clamped inputs skip the residual requirement: the proportions are then
/// known to be off the model manifold, so the projected closed-form solution
/// is returned flagged rather than failing.
pub fn invert_general(
    p: &ParityProportions,
    noise: NoiseModel,
    oracle: &CircuitModel,
) -> Result<ReconstructionResult> {
    debug_assert_eq!(noise.lambda(), oracle.lambda());
    let (raw, clamped) = invert_closed(p, noise.lambda())?;
    if clamped {
        return finish(raw, true);
    }
    let target = [p.p1, p.p2, p.p3];
    let mut seeds: Vec<[f64; 3]> = Vec::with_capacity(8);
    seeds.push([raw[0], raw[1], raw[2]]);
    for f in [0.55, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99] {
        let r = (1.0 - f) / 3.0;
        seeds.push([f, r, r]);
    }
    let mut best: Option<([f64; 3], f64)> = None;
    for seed in seeds {
        if let Some((x, res)) = newton(oracle, seed, &target) {
            let better = match &best {
                None => true,
                Some((bx, bres)) => {
                    res < bres - 1e-15 || ((res - bres).abs() <= 1e-15 && x[0] > bx[0])
                }
            };
            if better {
                best = Some((x, res));
            }
        }
    }
    match best {
        Some((x, res)) if res <= 1e-9 => {
            finish([x[0], x[1], x[2], 1.0 - x[0] - x[1] - x[2]], false)
        }
        Some((_, res)) => Err(Error::InfeasibleProportions(res)),
        None => Err(Error::InfeasibleProportions(f64::INFINITY)),
    }
}

/// Damped Newton iteration on the reduced system. Returns the iterate and
/// its final residual norm, or None if the linear solve degenerates.
fn newton(oracle: &CircuitModel, seed: [f64; 3], target: &[f64; 3]) -> Option<([f64; 3], f64)> {
    let tensor = oracle.tensor();
    let eval = |x: &[f64; 3]| -> ([f64; 3], f64) {
        let w = [x[0], x[1], x[2], 1.0 - x[0] - x[1] - x[2]];
        let m = tensor.joint(&w).agree_marginals();
        let r = [m[0] - target[0], m[1] - target[1], m[2] - target[2]];
        let n = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
        (r, n)
    };
    let mut x = seed;
    let (_, mut res) = eval(&x);
    for _ in 0..60 {
        if res <= 1e-12 {
            break;
        }
        let w = [x[0], x[1], x[2], 1.0 - x[0] - x[1] - x[2]];
        let g = tensor.marginal_gradients(&w);
        // reduced Jacobian: ∂f_i/∂x_j − ∂f_i/∂d
        let mut jac = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                jac[i][j] = g[i][j] - g[i][3];
            }
        }
        let (r, _) = eval(&x);
        let step = solve3(&jac, &[-r[0], -r[1], -r[2]])?;
        // backtracking line search
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..25 {
            let cand = [x[0] + t * step[0], x[1] + t * step[1], x[2] + t * step[2]];
            let (_, cres) = eval(&cand);
            if cres < res {
                x = cand;
                res = cres;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Some((x, res))
}

fn solve3(a: &[[f64; 3]; 3], b: &[f64; 3]) -> Option<[f64; 3]> {
    let det = |m: &[[f64; 3]; 3]| -> f64 {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(a);
    if d.abs() < 1e-300 {
        return None;
    }
    let mut out = [0.0; 3];
    for col in 0..3 {
        let mut m = *a;
        for row in 0..3 {
            m[row][col] = b[row];
        }
        out[col] = det(&m) / d;
    }
    Some(out)
}

/// Tally → proportions → inversion, dispatching on λ.
pub fn estimate_from_tally(
    tally: &MeasurementTally,
    noise: NoiseModel,
    oracle: &CircuitModel,
) -> Result<ReconstructionResult> {
    if tally.n_shots == 0 {
        return Err(Error::Domain {
            value: 0.0,
            domain: "n_shots >= 1",
        });
    }
    let p = ParityProportions::from_tally(tally);
    if noise.is_noiseless() {
        invert_ideal(&p)
    } else {
        invert_general(&p, noise, oracle)
    }
}

/// The rounded-coefficient closed form for â at λ = 0, as published. Kept
/// for cross-checking only — the exact inversion is authoritative.
pub fn a_hat_rounded_ideal(p1: f64, p2: f64, p3: f64) -> f64 {
    let s1 = (p1 - 0.5).sqrt();
    let s2 = (p2 - 0.5).sqrt();
    let num = 2000.0 * p1 * p2 + 2000.0 * p1 * s1 * s2 + 1414.0 * p1 * s2
        - 1000.0 * p1
        - 1000.0 * p2
        - 1000.0 * p3
        - 1000.0 * s1 * s2
        - 707.0 * s2
        + 1000.0;
    num / ((5657.0 * p1 - 2828.0) * s2)
}

/// The rounded-coefficient closed form for â at λ = 0.1, as published
/// (with the first-term symbol typo corrected to x₁).
pub fn a_hat_rounded_lambda01(p1: f64, p2: f64, p3: f64) -> f64 {
    let s1 = (p1 - 0.5).sqrt();
    let s2 = (p2 - 0.5).sqrt();
    let num = 1503.0 * p1 * p2 + 1503.0 * p1 * s1 * s2 + 957.0 * p1 * s2
        - 752.0 * p1
        - 752.0 * p2
        - 1414.0 * p3
        - 752.0 * s1 * s2
        - 478.0 * s2
        + 1083.0;
    num / (3826.0 * p1 * s2 - 1913.0 * s2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn werner_example() {
        let r = invert_ideal(&ParityProportions::exact(0.68, 0.68, 0.4352)).unwrap();
        assert_abs_diff_eq!(r.a_hat, 0.7, epsilon = 1e-12);
        assert_abs_diff_eq!(r.state.b(), 0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(r.state.c(), 0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(r.state.d(), 0.1, epsilon = 1e-12);
        assert!(!r.clamped && !r.projected);
    }

    #[test]
    fn perfect_parity_limit() {
        let r = invert_ideal(&ParityProportions::exact(1.0, 1.0, 0.0)).unwrap();
        assert_abs_diff_eq!(r.a_hat, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn continuity_in_p3() {
        let eps = 1e-6;
        let base = invert_ideal(&ParityProportions::exact(0.68, 0.68, 0.4352)).unwrap();
        let bumped = invert_ideal(&ParityProportions::exact(0.68, 0.68, 0.4352 + eps)).unwrap();
        // p₃ enters linearly with negative slope
        assert!(bumped.a_hat < base.a_hat);
        assert_abs_diff_eq!(base.a_hat - bumped.a_hat, eps / (2.0 * 0.36 * 0.6), epsilon = 1e-9);
    }

    #[test]
    fn low_parity_is_error_for_exact_input() {
        assert!(matches!(
            invert_ideal(&ParityProportions::exact(0.4, 0.68, 0.4)),
            Err(Error::LowParity(_))
        ));
    }

    #[test]
    fn sampled_low_parity_is_clamped() {
        let p = ParityProportions {
            p1: 0.49,
            p2: 0.68,
            p3: 0.4,
            n_shots: 50,
        };
        let r = invert_ideal(&p).unwrap();
        assert!(r.clamped);
    }

    #[test]
    fn rounded_forms_match_exact() {
        // rounded-coefficient cross-check on exact forward proportions
        let w = BellDiagonalState::werner(0.7).unwrap();
        let f0 = forward_marginals(&w, NoiseModel::noiseless());
        let a0 = a_hat_rounded_ideal(f0[0], f0[1], f0[2]);
        assert_abs_diff_eq!(a0, 0.7, epsilon = 5e-3);
        let n01 = NoiseModel::new(0.1).unwrap();
        let f1 = forward_marginals(&w, n01);
        let a1 = a_hat_rounded_lambda01(f1[0], f1[1], f1[2]);
        assert_abs_diff_eq!(a1, 0.7, epsilon = 5e-3);
    }
}
