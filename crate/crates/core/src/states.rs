//! Bell-diagonal state algebra.
//!
//! A Bell-diagonal two-qubit state is fully described by the probability
//! 4-vector `(a, b, c, d)` of its weights on the Bell basis
//! |Φ⁺⟩⟨Φ⁺|, |Ψ⁺⟩⟨Ψ⁺|, |Ψ⁻⟩⟨Ψ⁻|, |Φ⁻⟩⟨Φ⁻|. The fidelity of the pair is the
//! coefficient `a`. Because every state handled by this crate commutes with
//! every other (they are diagonal in the same basis), fidelity and trace
//! distance reduce to their classical closed forms over the 4-vectors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Simplex membership tolerance.
pub const SIMPLEX_TOL: f64 = 1e-12;
/// Constructors renormalize when the sum deviates by at most this much.
pub const RENORM_TOL: f64 = 1e-9;

/// Probability 4-vector over the Bell basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BellDiagonalState {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
}

impl BellDiagonalState {
    /// Builds a state from raw coefficients.
    ///
    /// Sums within `RENORM_TOL` of 1 are renormalized; larger deviations or
    /// components outside `[0, 1]` are rejected.
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        for v in [a, b, c, d] {
            if !v.is_finite() {
                return Err(Error::NonFinite);
            }
            if !(-SIMPLEX_TOL..=1.0 + SIMPLEX_TOL).contains(&v) {
                return Err(Error::Domain {
                    value: v,
                    domain: "[0, 1]",
                });
            }
        }
        let sum = a + b + c + d;
        if (sum - 1.0).abs() > RENORM_TOL {
            return Err(Error::NotNormalized { sum });
        }
        Ok(Self {
            a: (a / sum).clamp(0.0, 1.0),
            b: (b / sum).clamp(0.0, 1.0),
            c: (c / sum).clamp(0.0, 1.0),
            d: (d / sum).clamp(0.0, 1.0),
        })
    }

    /// Werner state `(F, (1−F)/3, (1−F)/3, (1−F)/3)`.
    pub fn werner(fidelity: f64) -> Result<Self> {
        if !fidelity.is_finite() || !(0.0..=1.0).contains(&fidelity) {
            return Err(Error::Domain {
                value: fidelity,
                domain: "[0, 1]",
            });
        }
        let e = (1.0 - fidelity) / 3.0;
        Self::new(fidelity, e, e, e)
    }

    /// The perfect pair `(1, 0, 0, 0)`.
    pub fn perfect() -> Self {
        Self {
            a: 1.0,
            b: 0.0,
            c: 0.0,
            d: 0.0,
        }
    }

    pub fn a(&self) -> f64 {
        self.a
    }
    pub fn b(&self) -> f64 {
        self.b
    }
    pub fn c(&self) -> f64 {
        self.c
    }
    pub fn d(&self) -> f64 {
        self.d
    }

    /// Fidelity of the pair, i.e. the |Φ⁺⟩ weight.
    pub fn fidelity(&self) -> f64 {
        self.a
    }

    pub fn coeffs(&self) -> [f64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    /// Fidelity between two commuting diagonal states: `(Σ √(p_i q_i))²`.
    pub fn state_fidelity(&self, other: &Self) -> f64 {
        let s: f64 = self
            .coeffs()
            .iter()
            .zip(other.coeffs())
            .map(|(p, q)| (p * q).sqrt())
            .sum();
        (s * s).clamp(0.0, 1.0)
    }

    /// Trace distance between two commuting diagonal states: `½ Σ |p_i − q_i|`.
    pub fn trace_distance(&self, other: &Self) -> f64 {
        let s: f64 = self
            .coeffs()
            .iter()
            .zip(other.coeffs())
            .map(|(p, q)| (p - q).abs())
            .sum();
        (0.5 * s).clamp(0.0, 1.0)
    }
}

/// Euclidean projection of a raw 4-vector onto the probability simplex.
///
/// Standard sort-and-threshold algorithm; idempotent and non-expansive.
pub fn project_to_simplex(raw: [f64; 4]) -> Result<BellDiagonalState> {
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let mut sorted = raw;
    sorted.sort_by(|x, y| y.partial_cmp(x).unwrap());
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    let mut k = 0;
    for (i, &v) in sorted.iter().enumerate() {
        cumsum += v;
        let t = (cumsum - 1.0) / (i as f64 + 1.0);
        if v - t > 0.0 {
            theta = t;
            k = i + 1;
        }
    }
    debug_assert!(k > 0);
    let proj = raw.map(|v| (v - theta).max(0.0));
    let sum: f64 = proj.iter().sum();
    BellDiagonalState::new(proj[0] / sum, proj[1] / sum, proj[2] / sum, proj[3] / sum)
}

/// Per-gate depolarizing parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    lambda: f64,
}

impl NoiseModel {
    pub fn new(lambda: f64) -> Result<Self> {
        if !lambda.is_finite() || !(0.0..1.0).contains(&lambda) {
            return Err(Error::Domain {
                value: lambda,
                domain: "[0, 1)",
            });
        }
        Ok(Self { lambda })
    }

    pub fn noiseless() -> Self {
        Self { lambda: 0.0 }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn is_noiseless(&self) -> bool {
        self.lambda == 0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn werner_examples() {
        let w = BellDiagonalState::werner(0.7).unwrap();
        for (got, want) in w.coeffs().iter().zip([0.7, 0.1, 0.1, 0.1]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
        }
        assert_eq!(BellDiagonalState::werner(1.0).unwrap().coeffs(), [1.0, 0.0, 0.0, 0.0]);
        for (got, want) in BellDiagonalState::werner(0.25)
            .unwrap()
            .coeffs()
            .iter()
            .zip([0.25; 4])
        {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
        }
        assert!(BellDiagonalState::werner(1.2).is_err());
        assert!(BellDiagonalState::werner(-0.1).is_err());
    }

    #[test]
    fn new_renormalizes_small_drift() {
        let s = BellDiagonalState::new(0.7 + 4e-10, 0.1, 0.1, 0.1).unwrap();
        let sum: f64 = s.coeffs().iter().sum();
        assert!((sum - 1.0).abs() <= SIMPLEX_TOL);
        assert!(BellDiagonalState::new(0.7, 0.1, 0.1, 0.2).is_err());
    }

    #[test]
    fn fidelity_examples() {
        let w = BellDiagonalState::werner(0.7).unwrap();
        assert_abs_diff_eq!(w.state_fidelity(&w), 1.0, epsilon = 1e-15);
        let p = BellDiagonalState::perfect();
        let q = BellDiagonalState::new(0.0, 1.0, 0.0, 0.0).unwrap();
        assert_abs_diff_eq!(p.state_fidelity(&q), 0.0, epsilon = 1e-15);
        // (sqrt(1*0.7))^2 by direct evaluation
        assert_abs_diff_eq!(p.state_fidelity(&w), 0.7, epsilon = 1e-12);
    }

    #[test]
    fn trace_distance_examples() {
        let p = BellDiagonalState::perfect();
        let q = BellDiagonalState::new(0.0, 1.0, 0.0, 0.0).unwrap();
        assert_abs_diff_eq!(p.trace_distance(&p), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.trace_distance(&q), 1.0, epsilon = 1e-15);
        let r0 = BellDiagonalState::werner(0.7).unwrap();
        let q1 = [0.845946, 0.0675676, 0.0189189, 0.0675676];
        let s: f64 = q1.iter().sum();
        let r1 = BellDiagonalState::new(q1[0] / s, q1[1] / s, q1[2] / s, q1[3] / s).unwrap();
        // direct evaluation of ½ Σ |Δ|
        assert_abs_diff_eq!(r0.trace_distance(&r1), 0.145946, epsilon = 1e-6);
    }

    #[test]
    fn simplex_projection_examples() {
        let s = project_to_simplex([0.7, 0.1, 0.1, 0.1]).unwrap();
        assert_abs_diff_eq!(s.a(), 0.7, epsilon = 1e-15);

        // KKT check for (1.02, -0.01, -0.01, 0.0): enumerate all support sets and
        // verify the projection matches the unique feasible KKT point.
        let raw = [1.02, -0.01, -0.01, 0.0];
        let p = project_to_simplex(raw).unwrap();
        let mut best: Option<[f64; 4]> = None;
        for mask in 1u8..16 {
            let idx: Vec<usize> = (0..4).filter(|i| mask & (1 << i) != 0).collect();
            let m = idx.len() as f64;
            let sum: f64 = idx.iter().map(|&i| raw[i]).sum();
            let theta = (sum - 1.0) / m;
            let mut cand = [0.0; 4];
            for &i in &idx {
                cand[i] = raw[i] - theta;
            }
            let feasible = cand.iter().all(|&v| v >= -1e-15)
                && (0..4).all(|i| idx.contains(&i) || raw[i] - theta <= 1e-15);
            if feasible {
                best = Some(cand);
            }
        }
        let kkt = best.expect("KKT point exists");
        for i in 0..4 {
            assert_abs_diff_eq!(p.coeffs()[i], kkt[i].max(0.0), epsilon = 1e-12);
        }

        let interior = project_to_simplex([0.25, 0.25, 0.25, 0.25]).unwrap();
        assert_eq!(interior.coeffs(), [0.25, 0.25, 0.25, 0.25]);
        assert!(project_to_simplex([f64::NAN, 0.0, 0.0, 0.0]).is_err());
    }

    fn arb_state() -> impl Strategy<Value = BellDiagonalState> {
        [0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64].prop_filter_map(
            "nonzero",
            |v| {
                let s: f64 = v.iter().sum();
                if s < 1e-6 {
                    return None;
                }
                BellDiagonalState::new(v[0] / s, v[1] / s, v[2] / s, v[3] / s).ok()
            },
        )
    }

    proptest! {
        #[test]
        fn metric_sanity(p in arb_state(), q in arb_state()) {
            let t = p.trace_distance(&q);
            let f = p.state_fidelity(&q);
            prop_assert!((0.0..=1.0).contains(&t));
            prop_assert!((0.0..=1.0).contains(&f));
            prop_assert!(t >= p.trace_distance(&q) - 1e-15); // symmetric
            prop_assert!((t - q.trace_distance(&p)).abs() < 1e-15);
            prop_assert!((f - q.state_fidelity(&p)).abs() < 1e-12);
            // Fuchs–van de Graaf for commuting states
            prop_assert!(1.0 - f.sqrt() <= t + 1e-9);
            prop_assert!(t <= (1.0 - f).sqrt() + 1e-9);
        }

        #[test]
        fn projection_idempotent_nonexpansive(
            v in [-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64],
            w in [-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64],
        ) {
            let p = project_to_simplex(v).unwrap();
            let p2 = project_to_simplex(p.coeffs()).unwrap();
            for i in 0..4 {
                prop_assert!((p.coeffs()[i] - p2.coeffs()[i]).abs() < 1e-12);
            }
            let q = project_to_simplex(w).unwrap();
            let d_in: f64 = v.iter().zip(w).map(|(x, y)| (x - y) * (x - y)).sum();
            let d_out: f64 = p
                .coeffs()
                .iter()
                .zip(q.coeffs())
                .map(|(x, y)| (x - y) * (x - y))
                .sum();
            prop_assert!(d_out <= d_in + 1e-12);
        }

        #[test]
        fn triangle_inequality(p in arb_state(), q in arb_state(), r in arb_state()) {
            prop_assert!(p.trace_distance(&r) <= p.trace_distance(&q) + q.trace_distance(&r) + 1e-12);
        }
    }
}
