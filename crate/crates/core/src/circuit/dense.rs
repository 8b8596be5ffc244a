//! Exact 8-qubit (256-dimensional) density-matrix simulation of the
//! purification/estimation circuit.
//!
//! Qubit layout: pair i occupies qubits (2i, 2i+1) for i in 0..4, with the
//! even qubit on the Alice side and the odd qubit on the Bob side. Bit q of a
//! basis index is the state of qubit q.
//!
//! Gate list (one bilateral step = the same gate on both sides):
//!   1. bilateral CNOT pair 0 → pair 1, then pair 2 → pair 3
//!   2. pair 1 measured bilaterally in the Z basis   (location 2)
//!   3. pair 2 measured bilaterally in the X basis   (location 1)
//!   4. bilateral CNOT pair 3 → pair 0
//!   5. pair 3 measured bilaterally in the Y basis   (location 3)
//!   6. noiseless bilateral basis correction on the output pair 0
//!
//! Noise model (documented calibration, see README): after every CNOT, a
//! two-qubit depolarizing channel that with probability λ replaces the two
//! gate qubits by the maximally mixed state (equivalently, a uniform twirl
//! over all 16 two-qubit Paulis). The Y-basis readout needs two bilateral
//! basis-change gates per qubit (phase gate then Hadamard); each is followed
//! by a single-qubit depolarizing channel that with probability λ replaces
//! the qubit by the maximally mixed state. The X-basis readout's Hadamard,
//! the measurements themselves, and the output correction are ideal.
//! Single-qubit depolarizing commutes with the basis rotation, so the
//! rotation is folded into the measurement projector.

use num_complex::Complex64;

const N_QUBITS: usize = 8;
const DIM: usize = 1 << N_QUBITS;
const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

type C = Complex64;

/// Dense 8-qubit density matrix, row-major.
pub struct DensityMatrix {
    data: Vec<C>,
}

/// Measurement basis for a bilateral parity readout.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Basis {
    Z,
    X,
    Y,
}

impl DensityMatrix {
    /// Product state of four Bell-diagonal pairs with coefficient vectors `ws`.
    pub fn product_of_pairs(ws: &[[f64; 4]; 4]) -> Self {
        // 4x4 pair density matrices in the computational basis (real-valued:
        // the Y-error term |Ψ⁻⟩⟨Ψ⁻| is real).
        let pair: Vec<[[f64; 4]; 4]> = ws.iter().map(|w| pair_matrix(w)).collect();
        let mut data = vec![C::new(0.0, 0.0); DIM * DIM];
        for row in 0..DIM {
            for col in 0..DIM {
                let mut v = 1.0;
                for p in 0..4 {
                    let r = (row >> (2 * p)) & 3;
                    let c = (col >> (2 * p)) & 3;
                    v *= pair[p][r][c];
                    if v == 0.0 {
                        break;
                    }
                }
                if v != 0.0 {
                    data[row * DIM + col] = C::new(v, 0.0);
                }
            }
        }
        Self { data }
    }

    pub fn trace(&self) -> f64 {
        (0..DIM).map(|i| self.data[i * DIM + i].re).sum()
    }

    /// CNOT with control qubit `ctl` and target `tgt`: a basis permutation.
    pub fn apply_cnot(&mut self, ctl: usize, tgt: usize) {
        let perm = |i: usize| -> usize {
            if (i >> ctl) & 1 == 1 {
                i ^ (1 << tgt)
            } else {
                i
            }
        };
        let mut out = vec![C::new(0.0, 0.0); DIM * DIM];
        for row in 0..DIM {
            let pr = perm(row);
            for col in 0..DIM {
                out[pr * DIM + perm(col)] = self.data[row * DIM + col];
            }
        }
        self.data = out;
    }

    /// Two-qubit depolarizing channel on `(q1, q2)` with parameter `lambda`:
    /// with probability λ the two qubits are replaced by the maximally mixed
    /// state (uniform conjugation over all 16 two-qubit Paulis).
    pub fn depolarize2(&mut self, lambda: f64, q1: usize, q2: usize) {
        if lambda == 0.0 {
            return;
        }
        let mut acc = vec![C::new(0.0, 0.0); DIM * DIM];
        for p1 in 0..4 {
            for p2 in 0..4 {
                if p1 == 0 && p2 == 0 {
                    continue;
                }
                self.accumulate_pauli_conjugation(&mut acc, &[(q1, p1), (q2, p2)]);
            }
        }
        // identity term of the 16-Pauli twirl folded into `keep`
        let keep = 1.0 - lambda + lambda / 16.0;
        let mix = lambda / 16.0;
        for i in 0..DIM * DIM {
            self.data[i] = keep * self.data[i] + mix * acc[i];
        }
    }

    /// Single-qubit depolarizing channel on `q` with parameter `lambda`: with
    /// probability λ the qubit is replaced by the maximally mixed state
    /// (uniform conjugation over I, X, Y, Z).
    pub fn depolarize1(&mut self, lambda: f64, q: usize) {
        if lambda == 0.0 {
            return;
        }
        let mut acc = vec![C::new(0.0, 0.0); DIM * DIM];
        for p in 1..4 {
            self.accumulate_pauli_conjugation(&mut acc, &[(q, p)]);
        }
        let keep = 1.0 - lambda + lambda / 4.0;
        let mix = lambda / 4.0;
        for i in 0..DIM * DIM {
            self.data[i] = keep * self.data[i] + mix * acc[i];
        }
    }

    /// acc += P ρ P† for the Pauli P given as (qubit, pauli-index 0..4) pairs.
    fn accumulate_pauli_conjugation(&self, acc: &mut [C], paulis: &[(usize, usize)]) {
        // Basis action: P |i> = phase(i) |i ^ flip_mask>
        let mut flip = 0usize;
        for &(q, p) in paulis {
            if p == 1 || p == 2 {
                flip |= 1 << q;
            }
        }
        let phase = |i: usize| -> C {
            let mut ph = C::new(1.0, 0.0);
            for &(q, p) in paulis {
                let bit = (i >> q) & 1;
                match p {
                    2 => {
                        // Y|0> = i|1>, Y|1> = -i|0>
                        ph *= if bit == 0 { C::new(0.0, 1.0) } else { C::new(0.0, -1.0) };
                    }
                    3 => {
                        if bit == 1 {
                            ph = -ph;
                        }
                    }
                    _ => {}
                }
            }
            ph
        };
        for row in 0..DIM {
            let pr = phase(row);
            let fr = row ^ flip;
            for col in 0..DIM {
                let w = pr * phase(col).conj();
                acc[fr * DIM + (col ^ flip)] += w * self.data[row * DIM + col];
            }
        }
    }

    /// Bilateral parity readout of qubits `(q1, q2)` in `basis`.
    ///
    /// Returns the unnormalized post-measurement branches
    /// `(agree, disagree)`; their traces are the branch probabilities.
    pub fn parity_measure(&self, basis: Basis, q1: usize, q2: usize) -> (Self, Self) {
        // Rotate both qubits so the readout basis becomes Z, then project on
        // equal/unequal bit parity. The measured qubits are never touched
        // again, so the un-rotation is omitted.
        let mut rotated = Self {
            data: self.data.clone(),
        };
        match basis {
            Basis::Z => {}
            Basis::X => {
                rotated.apply_1q(hadamard(), q1);
                rotated.apply_1q(hadamard(), q2);
            }
            Basis::Y => {
                rotated.apply_1q(y_to_z(), q1);
                rotated.apply_1q(y_to_z(), q2);
            }
        }
        let mut agree = vec![C::new(0.0, 0.0); DIM * DIM];
        let mut disagree = vec![C::new(0.0, 0.0); DIM * DIM];
        let par = |i: usize| ((i >> q1) & 1) ^ ((i >> q2) & 1);
        for row in 0..DIM {
            for col in 0..DIM {
                if par(row) == par(col) {
                    let v = rotated.data[row * DIM + col];
                    if par(row) == 0 {
                        agree[row * DIM + col] = v;
                    } else {
                        disagree[row * DIM + col] = v;
                    }
                }
            }
        }
        (Self { data: agree }, Self { data: disagree })
    }

    fn apply_1q(&mut self, u: [[C; 2]; 2], q: usize) {
        // rows: rho <- U rho
        let bit = 1 << q;
        let mut out = vec![C::new(0.0, 0.0); DIM * DIM];
        for row in 0..DIM {
            let r0 = row & !bit;
            let r1 = row | bit;
            let b = (row >> q) & 1;
            for col in 0..DIM {
                let v = self.data[row * DIM + col];
                if v != C::new(0.0, 0.0) {
                    out[r0 * DIM + col] += u[0][b] * v;
                    out[r1 * DIM + col] += u[1][b] * v;
                }
            }
        }
        // cols: rho <- rho U†
        let mut fin = vec![C::new(0.0, 0.0); DIM * DIM];
        for row in 0..DIM {
            for col in 0..DIM {
                let v = out[row * DIM + col];
                if v != C::new(0.0, 0.0) {
                    let c0 = col & !bit;
                    let c1 = col | bit;
                    let b = (col >> q) & 1;
                    fin[row * DIM + c0] += v * u[0][b].conj();
                    fin[row * DIM + c1] += v * u[1][b].conj();
                }
            }
        }
        self.data = fin;
    }

    /// Reduced density matrix of the output pair (qubits 0 and 1).
    pub fn reduce_to_pair0(&self) -> [[C; 4]; 4] {
        let mut red = [[C::new(0.0, 0.0); 4]; 4];
        for row in 0..DIM {
            let env = row >> 2;
            let r = row & 3;
            for c in 0..4 {
                let col = (env << 2) | c;
                red[r][c] += self.data[row * DIM + col];
            }
        }
        red
    }
}

fn hadamard() -> [[C; 2]; 2] {
    let h = C::new(FRAC_1_SQRT_2, 0.0);
    [[h, h], [h, -h]]
}

/// Maps the Y eigenbasis onto the Z basis: G|+i> = |0>, G|−i> = |1>.
fn y_to_z() -> [[C; 2]; 2] {
    let h = FRAC_1_SQRT_2;
    [
        [C::new(h, 0.0), C::new(0.0, -h)],
        [C::new(h, 0.0), C::new(0.0, h)],
    ]
}

/// 4x4 computational-basis density matrix of a Bell-diagonal pair.
///
/// Qubit layout inside the pair: bit 0 = Alice, bit 1 = Bob, so the basis
/// order is |b a>. All four Bell projectors are real matrices.
fn pair_matrix(w: &[f64; 4]) -> [[f64; 4]; 4] {
    // |Φ±> = (|00> ± |11>)/√2 → indices 0b00 and 0b11
    // |Ψ±> = (|01> ± |10>)/√2 → indices 0b01 and 0b10
    let mut m = [[0.0; 4]; 4];
    let half = 0.5;
    let (a, b, c, d) = (w[0], w[1], w[2], w[3]);
    m[0][0] = half * (a + d);
    m[3][3] = half * (a + d);
    m[0][3] = half * (a - d);
    m[3][0] = half * (a - d);
    m[1][1] = half * (b + c);
    m[2][2] = half * (b + c);
    m[1][2] = half * (b - c);
    m[2][1] = half * (b - c);
    m
}

/// Result of one exact circuit evaluation.
#[derive(Debug, Clone, Copy)]
pub struct RunResult {
    /// Joint probability over (location 1, location 2, location 3) parity
    /// outcomes; index 0 = agree, 1 = disagree.
    pub joint: [[[f64; 2]; 2]; 2],
    /// Unnormalized Bell coefficients of the output pair on the success
    /// branch (agree at 1 and 2, disagree at 3); sums to the success
    /// probability.
    pub success_output: [f64; 4],
}

/// Runs the circuit exactly on four (possibly distinct) Bell-diagonal inputs.
pub fn run(inputs: &[[f64; 4]; 4], lambda: f64) -> RunResult {
    let mut rho = DensityMatrix::product_of_pairs(inputs);

    // parity blocks
    for (ctl, tgt) in [(0, 2), (1, 3), (4, 6), (5, 7)] {
        rho.apply_cnot(ctl, tgt);
        rho.depolarize2(lambda, ctl, tgt);
    }
    // location 2: pair 1 (qubits 2,3) in Z; location 1: pair 2 (qubits 4,5) in X
    let (z_agree, z_dis) = rho.parity_measure(Basis::Z, 2, 3);
    let mut joint = [[[0.0; 2]; 2]; 2];
    let mut success_output = [0.0; 4];
    for (s2, after_z) in [(0usize, z_agree), (1, z_dis)] {
        let (x_agree, x_dis) = after_z.parity_measure(Basis::X, 4, 5);
        for (s1, branch) in [(0usize, x_agree), (1, x_dis)] {
            let mut r = branch;
            // final check: bilateral CNOT pair 3 → pair 0
            for (ctl, tgt) in [(6, 0), (7, 1)] {
                r.apply_cnot(ctl, tgt);
                r.depolarize2(lambda, ctl, tgt);
            }
            // noise of the two basis-change gates per qubit ahead of the Y
            // readout of pair 3
            for _ in 0..2 {
                r.depolarize1(lambda, 6);
                r.depolarize1(lambda, 7);
            }
            let (y_agree, y_dis) = r.parity_measure(Basis::Y, 6, 7);
            for (s3, fin) in [(0usize, y_agree), (1, y_dis)] {
                joint[s1][s2][s3] = fin.trace();
                if s1 == 0 && s2 == 0 && s3 == 1 {
                    success_output = bell_coefficients(&fin.reduce_to_pair0());
                }
            }
        }
    }
    RunResult {
        joint,
        success_output,
    }
}

/// Bell-basis diagonal of a pair density matrix, with the noiseless output
/// correction folded in (it exchanges the Ψ⁻ and Φ⁻ weights).
fn bell_coefficients(red: &[[C; 4]; 4]) -> [f64; 4] {
    let h = FRAC_1_SQRT_2;
    // |b a> basis; Bob-side error convention
    let phi_p = [C::new(h, 0.0), C::new(0.0, 0.0), C::new(0.0, 0.0), C::new(h, 0.0)];
    let psi_p = [C::new(0.0, 0.0), C::new(h, 0.0), C::new(h, 0.0), C::new(0.0, 0.0)];
    let psi_m = [C::new(0.0, 0.0), C::new(h, 0.0), C::new(-h, 0.0), C::new(0.0, 0.0)];
    let phi_m = [C::new(h, 0.0), C::new(0.0, 0.0), C::new(0.0, 0.0), C::new(-h, 0.0)];
    let overlap = |v: &[C; 4]| -> f64 {
        let mut s = C::new(0.0, 0.0);
        for r in 0..4 {
            for c in 0..4 {
                s += v[r].conj() * red[r][c] * v[c];
            }
        }
        s.re
    };
    // correction swaps the Y-error and Z-error classes
    [overlap(&phi_p), overlap(&psi_p), overlap(&phi_m), overlap(&psi_m)]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_input_noiseless() {
        let w = [1.0, 0.0, 0.0, 0.0];
        let res = run(&[w, w, w, w], 0.0);
        // perfect input: parity agrees at 1 and 2, disagrees at 3, always
        assert!((res.joint[0][0][1] - 1.0).abs() < 1e-12);
        assert!((res.success_output[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn trace_preserved_under_noise() {
        let w = [0.7, 0.1, 0.1, 0.1];
        let res = run(&[w, w, w, w], 0.05);
        let total: f64 = res
            .joint
            .iter()
            .flatten()
            .flatten()
            .sum();
        assert!((total - 1.0).abs() < 1e-10);
    }
}
