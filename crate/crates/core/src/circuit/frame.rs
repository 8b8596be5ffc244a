//! Pauli-frame view of the circuit.
//!
//! A Bell-diagonal input is a probabilistic Pauli error on a perfect pair, so
//! the noiseless circuit is fully described by propagating error frames
//! through the Clifford gate list. Two uses:
//!
//! * [`enumerate_ideal`] — exact λ=0 oracle that enumerates all 4⁴ = 256
//!   Bell-label combinations of the four input pairs. Independent of the
//!   dense density-matrix path.
//! * [`sample_run`] — one stochastic shot of the *noisy* circuit, sampling
//!   depolarizing errors gate by gate. This is what the sampled-purification
//!   experiment consumes.

use rand::Rng;

/// Bell label as (x, z) error bits: Φ⁺=(0,0), Ψ⁺=(1,0), Ψ⁻=(1,1), Φ⁻=(0,1).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BellLabel {
    pub x: u8,
    pub z: u8,
}

impl BellLabel {
    pub const PHI_PLUS: BellLabel = BellLabel { x: 0, z: 0 };

    pub fn from_class(k: usize) -> Self {
        match k {
            0 => BellLabel { x: 0, z: 0 },
            1 => BellLabel { x: 1, z: 0 },
            2 => BellLabel { x: 1, z: 1 },
            _ => BellLabel { x: 0, z: 1 },
        }
    }

    pub fn class(&self) -> usize {
        match (self.x, self.z) {
            (0, 0) => 0,
            (1, 0) => 1,
            (1, 1) => 2,
            _ => 3,
        }
    }
}

/// Outcome of one circuit shot at the frame level.
#[derive(Debug, Clone, Copy)]
pub struct ShotOutcome {
    /// true = parity agreed, per measurement location 1, 2, 3.
    pub agree: [bool; 3],
    /// Output-pair Bell label; only meaningful for the surviving pair, but
    /// always reported (callers post-select on `is_success`).
    pub output: BellLabel,
}

impl ShotOutcome {
    /// Success rule: agree at locations 1 and 2, disagree at 3.
    pub fn is_success(&self) -> bool {
        self.agree[0] && self.agree[1] && !self.agree[2]
    }
}

/// Per-qubit error frame over the 8 physical qubits.
#[derive(Debug, Clone, Copy, Default)]
struct Frame {
    x: [u8; 8],
    z: [u8; 8],
}

impl Frame {
    fn from_labels(labels: &[BellLabel; 4]) -> Self {
        let mut f = Frame::default();
        for (i, l) in labels.iter().enumerate() {
            // errors carried on the Bob-side qubit of each pair
            f.x[2 * i + 1] = l.x;
            f.z[2 * i + 1] = l.z;
        }
        f
    }

    fn cnot(&mut self, ctl: usize, tgt: usize) {
        self.x[tgt] ^= self.x[ctl];
        self.z[ctl] ^= self.z[tgt];
    }

    fn xor_pauli(&mut self, q: usize, p: usize) {
        // p in 1..4 -> X, Y, Z
        if p == 1 || p == 2 {
            self.x[q] ^= 1;
        }
        if p == 2 || p == 3 {
            self.z[q] ^= 1;
        }
    }
}

/// Propagates one frame through the ideal gate list.
fn propagate_ideal(labels: &[BellLabel; 4]) -> ShotOutcome {
    propagate(
        Frame::from_labels(labels),
        0.0,
        &mut rand::rngs::mock::StepRng::new(0, 0),
    )
}

fn maybe_pauli2<R: Rng>(rng: &mut R, lambda: f64) -> Option<(usize, usize)> {
    if lambda > 0.0 && rng.gen::<f64>() < lambda {
        // replace-by-mixed: uniform over all 16 two-qubit Paulis
        let k = rng.gen_range(0..16usize);
        Some((k / 4, k % 4))
    } else {
        None
    }
}

fn maybe_pauli1<R: Rng>(rng: &mut R, lambda: f64) -> Option<usize> {
    if lambda > 0.0 && rng.gen::<f64>() < lambda {
        // replace-by-mixed: uniform over I, X, Y, Z
        Some(rng.gen_range(0..4usize))
    } else {
        None
    }
}

fn propagate<R: Rng>(mut f: Frame, lambda: f64, noise: &mut R) -> ShotOutcome {
    let noisy_cnot = |f: &mut Frame, noise: &mut R, ctl: usize, tgt: usize| {
        f.cnot(ctl, tgt);
        if let Some((p1, p2)) = maybe_pauli2(noise, lambda) {
            f.xor_pauli(ctl, p1);
            f.xor_pauli(tgt, p2);
        }
    };
    // parity blocks
    noisy_cnot(&mut f, noise, 0, 2);
    noisy_cnot(&mut f, noise, 1, 3);
    noisy_cnot(&mut f, noise, 4, 6);
    noisy_cnot(&mut f, noise, 5, 7);
    // location 2: qubits (2,3) in Z — parity flipped by X-type error
    let agree2 = (f.x[2] ^ f.x[3]) == 0;
    // location 1: qubits (4,5) in X — parity flipped by Z-type error
    let agree1 = (f.z[4] ^ f.z[5]) == 0;
    // final check
    noisy_cnot(&mut f, noise, 6, 0);
    noisy_cnot(&mut f, noise, 7, 1);
    // two noisy basis-change gates per qubit ahead of the Y readout
    for _ in 0..2 {
        for q in [6, 7] {
            if let Some(p) = maybe_pauli1(noise, lambda) {
                f.xor_pauli(q, p);
            }
        }
    }
    // location 3: qubits (6,7) in Y — the perfect pair anticorrelates in the
    // Y basis, so "agree" corresponds to a flipped x⊕z parity
    let yflip = (f.x[6] ^ f.z[6]) ^ (f.x[7] ^ f.z[7]);
    let agree3 = yflip == 1;
    // output pair label from the residual errors on qubits 0 and 1, with the
    // bilateral correction folded in (swaps the Y and Z error classes)
    let x_out = f.x[0] ^ f.x[1];
    let z_out = f.z[0] ^ f.z[1];
    ShotOutcome {
        agree: [agree1, agree2, agree3],
        output: BellLabel {
            x: x_out ^ z_out,
            z: z_out,
        },
    }
}

/// One stochastic shot of the noisy circuit on four definite input labels.
pub fn sample_run<R: Rng>(
    labels: &[BellLabel; 4],
    lambda: f64,
    rng: &mut R,
) -> ShotOutcome {
    propagate(Frame::from_labels(labels), lambda, rng)
}

/// Exact λ=0 result by weighted enumeration of all 256 input combinations.
///
/// Returns the joint parity distribution (index 0 = agree), the unnormalized
/// output coefficients on the success branch, and the success probability.
pub fn enumerate_ideal(w: &[f64; 4]) -> ([[[f64; 2]; 2]; 2], [f64; 4], f64) {
    let mut joint = [[[0.0; 2]; 2]; 2];
    let mut out = [0.0; 4];
    for k in 0..256usize {
        let ks = [k & 3, (k >> 2) & 3, (k >> 4) & 3, (k >> 6) & 3];
        let p: f64 = ks.iter().map(|&i| w[i]).product();
        if p == 0.0 {
            continue;
        }
        let labels = [
            BellLabel::from_class(ks[0]),
            BellLabel::from_class(ks[1]),
            BellLabel::from_class(ks[2]),
            BellLabel::from_class(ks[3]),
        ];
        let shot = propagate_ideal(&labels);
        let idx = |a: bool| usize::from(!a);
        joint[idx(shot.agree[0])][idx(shot.agree[1])][idx(shot.agree[2])] += p;
        if shot.is_success() {
            out[shot.output.class()] += p;
        }
    }
    let success: f64 = out.iter().sum();
    (joint, out, success)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_input_single_frame() {
        let (joint, out, p) = enumerate_ideal(&[1.0, 0.0, 0.0, 0.0]);
        assert!((p - 1.0).abs() < 1e-15);
        assert!((joint[0][0][1] - 1.0).abs() < 1e-15);
        assert!((out[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn werner_success_probability() {
        let (_, _, p) = enumerate_ideal(&[0.7, 0.1, 0.1, 0.1]);
        assert!((p - 0.296).abs() < 1e-12);
    }
}
