//! Closed-form purification engine: the coefficient update rational
//! functions, the success-probability quartic, recursive iteration (noisy
//! rounds delegate to the circuit oracle), and the λ-threshold search.

use serde::{Deserialize, Serialize};

use crate::circuit;
use crate::error::{Error, Result};
use crate::states::{BellDiagonalState, NoiseModel};

/// One completed purification round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PurificationOutcome {
    pub output: BellDiagonalState,
    pub success_probability: f64,
    pub round_index: usize,
}

/// Recursive purification trajectory: the initial state plus one outcome per
/// round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub initial: BellDiagonalState,
    pub rounds: Vec<PurificationOutcome>,
}

impl Trajectory {
    /// Fidelity after each round, in order.
    pub fn fidelities(&self) -> Vec<f64> {
        self.rounds.iter().map(|r| r.output.fidelity()).collect()
    }

    /// Per-round success probabilities, in order.
    pub fn success_probabilities(&self) -> Vec<f64> {
        self.rounds.iter().map(|r| r.success_probability).collect()
    }
}

/// Success probability of one noiseless round: the quartic polynomial in
/// (a,b,c,d), which is also the shared denominator of the coefficient
/// update.
pub fn success_probability_ideal(state: &BellDiagonalState) -> f64 {
    let [a, b, c, d] = state.coeffs();
    a.powi(4)
        + a * a * (2.0 * b * b + 4.0 * b * d + (c + d) * (c + d))
        + 2.0 * a * (2.0 * b * b * c + c * c * d + d * d * d)
        + b.powi(4)
        + b * b * (c + d) * (c + d)
        + 2.0 * b * c * (c * c + d * d)
        + 2.0 * c * d * (c * c + d * d)
}

/// One noiseless purification round via the closed-form coefficient update.
pub fn purify_once_ideal(state: &BellDiagonalState) -> Result<PurificationOutcome> {
    let [a, b, c, d] = state.coeffs();
    let den = success_probability_ideal(state);
    if den < 1e-15 {
        return Err(Error::DegeneratePostSelection(den));
    }
    let na = a.powi(4) + a * a * (b * b + d * d) + b * b * d * (2.0 * c + d) + 2.0 * c.powi(3) * d;
    let nb = a * a * (b * b + c * (c + 2.0 * d)) + b.powi(4) + b * b * c * c + 2.0 * c * d.powi(3);
    let nc = 2.0 * a * (2.0 * b * b * c + c * c * d + d.powi(3));
    let nd = 2.0 * b * (c.powi(3) + 2.0 * a * a * d + c * d * d);
    let output = BellDiagonalState::new(na / den, nb / den, nc / den, nd / den)?;
    Ok(PurificationOutcome {
        output,
        success_probability: den,
        round_index: 1,
    })
}

/// Recursive iteration. Noiseless rounds use the closed forms; noisy rounds
/// evaluate the circuit oracle on four copies of the previous output.
pub fn iterate(
    state: &BellDiagonalState,
    noise: NoiseModel,
    rounds: usize,
) -> Result<Trajectory> {
    if rounds == 0 {
        return Err(Error::Domain {
            value: 0.0,
            domain: "rounds >= 1",
        });
    }
    let mut current = *state;
    let mut out = Vec::with_capacity(rounds);
    for round_index in 1..=rounds {
        let step = if noise.is_noiseless() {
            purify_once_ideal(&current)
        } else {
            circuit::single_run_output(&current, noise.lambda()).map(|(output, p)| {
                PurificationOutcome {
                    output,
                    success_probability: p,
                    round_index,
                }
            })
        };
        match step {
            Ok(mut o) => {
                o.round_index = round_index;
                current = o.output;
                out.push(o);
            }
            Err(Error::DegeneratePostSelection(_)) => {
                return Err(Error::TrajectoryDegenerate {
                    completed_rounds: round_index - 1,
                })
            }
            Err(e) => return Err(e),
        }
    }
    Ok(Trajectory {
        initial: *state,
        rounds: out,
    })
}

/// Single-round fidelity gain of the Werner state with fidelity `f` at noise
/// level `lambda`.
fn werner_gain(f: f64, lambda: f64) -> Result<f64> {
    let w = BellDiagonalState::werner(f)?;
    let (out, _p) = circuit::single_run_output(&w, lambda)?;
    Ok(out.fidelity() - f)
}

/// Largest λ at which one purification round of the Werner state with
/// fidelity `initial_f` does not decrease the fidelity. Bisection to
/// absolute tolerance 1e-4.
pub fn find_lambda_threshold(initial_f: f64) -> Result<f64> {
    if !(0.5..=1.0).contains(&initial_f) {
        return Err(Error::Domain {
            value: initial_f,
            domain: "0.5 < F <= 1",
        });
    }
    if werner_gain(initial_f, 0.0)? <= 0.0 {
        // fidelity cannot increase even without noise (e.g. F = 1)
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0, 0.25);
    if werner_gain(initial_f, hi)? > 0.0 {
        return Err(Error::NoSignChange(lo, hi));
    }
    while hi - lo > 1e-4 {
        let mid = 0.5 * (lo + hi);
        if werner_gain(initial_f, mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
