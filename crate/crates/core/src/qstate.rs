//! Dense state-vector simulation.
//!
//! # Index convention
//!
//! Qubit label `k` is stored at bit position `k` of an amplitude index, so
//! index `i` encodes the basis ket with `q_k = (i >> k) & 1`. Ket strings are
//! written with the lowest label leftmost, `|q_0 q_1 ... q_{N-1}⟩`, which is
//! the order used for every composite ket in this crate. [`ket_string`] and
//! [`ket_index`] are the only conversions between the two forms.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};

pub type Complex = Complex64;

/// Tolerance used for normalization checks on public operations.
pub const NORM_TOL: f64 = 1e-12;

/// Branches below this probability are treated as impossible.
pub const ZERO_BRANCH: f64 = 1e-14;

const ZERO: Complex = Complex::new(0.0, 0.0);
const ONE: Complex = Complex::new(1.0, 0.0);

/// Renders `index` as a ket body over `width` qubits, qubit 0 leftmost.
pub fn ket_string(index: usize, width: usize) -> String {
    (0..width)
        .map(|k| if (index >> k) & 1 == 1 { '1' } else { '0' })
        .collect()
}

/// Inverse of [`ket_string`].
pub fn ket_index(ket: &str) -> Result<usize> {
    ket.chars().enumerate().try_fold(0usize, |acc, (k, c)| match c {
        '0' => Ok(acc),
        '1' => Ok(acc | (1 << k)),
        _ => Err(Error::Parse {
            what: "ket",
            input: ket.to_string(),
        }),
    })
}

/// Single-qubit gates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    I,
    X,
    Z,
    H,
    Unitary2([[Complex; 2]; 2]),
}

impl Gate {
    /// Wraps an arbitrary 2×2 matrix, rejecting non-unitary input.
    pub fn unitary(matrix: [[Complex; 2]; 2]) -> Result<Gate> {
        let g = Gate::Unitary2(matrix);
        if g.is_unitary(NORM_TOL) {
            Ok(g)
        } else {
            Err(Error::NonUnitary)
        }
    }

    pub fn matrix(&self) -> [[Complex; 2]; 2] {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        match self {
            Gate::I => [[ONE, ZERO], [ZERO, ONE]],
            Gate::X => [[ZERO, ONE], [ONE, ZERO]],
            Gate::Z => [[ONE, ZERO], [ZERO, -ONE]],
            Gate::H => [
                [Complex::new(s, 0.0), Complex::new(s, 0.0)],
                [Complex::new(s, 0.0), Complex::new(-s, 0.0)],
            ],
            Gate::Unitary2(m) => *m,
        }
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        let m = self.matrix();
        (0..2).all(|i| {
            (0..2).all(|j| {
                let dot: Complex = (0..2).map(|k| m[k][i].conj() * m[k][j]).sum();
                let expected = if i == j { ONE } else { ZERO };
                (dot - expected).norm() <= tol
            })
        })
    }

    /// Short name used in transcripts and correction labels.
    pub fn name(&self) -> &'static str {
        match self {
            Gate::I => "I",
            Gate::X => "X",
            Gate::Z => "Z",
            Gate::H => "H",
            Gate::Unitary2(_) => "U",
        }
    }
}

/// Complex amplitude vector over `num_qubits` labeled qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amplitudes: Vec<Complex>,
}

impl StateVector {
    /// The all-zero basis state.
    pub fn new(num_qubits: usize) -> Self {
        Self::basis(num_qubits, 0)
    }

    pub fn basis(num_qubits: usize, index: usize) -> Self {
        let mut amplitudes = vec![ZERO; 1 << num_qubits];
        amplitudes[index] = ONE;
        Self {
            num_qubits,
            amplitudes,
        }
    }

    /// Builds a state from raw amplitudes. The input must be normalized to
    /// within 1e-9; it is then rescaled to unit norm exactly.
    pub fn from_amplitudes(amplitudes: Vec<Complex>) -> Result<Self> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::InvalidLength(len));
        }
        let norm = norm_sqr(&amplitudes);
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::NotNormalized(norm));
        }
        let mut state = Self {
            num_qubits: len.trailing_zeros() as usize,
            amplitudes,
        };
        state.scale(1.0 / norm.sqrt());
        Ok(state)
    }

    #[cfg(test)]
    pub(crate) fn from_raw(amplitudes: Vec<Complex>) -> Self {
        debug_assert!(amplitudes.len().is_power_of_two());
        Self {
            num_qubits: amplitudes.len().trailing_zeros() as usize,
            amplitudes,
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex] {
        &self.amplitudes
    }

    pub fn amplitude(&self, index: usize) -> Complex {
        self.amplitudes[index]
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.amplitudes)
    }

    fn check_qubit(&self, qubit: usize) -> Result<()> {
        if qubit < self.num_qubits {
            Ok(())
        } else {
            Err(Error::QubitOutOfRange {
                qubit,
                num_qubits: self.num_qubits,
            })
        }
    }

    fn scale(&mut self, factor: f64) {
        self.amplitudes.iter_mut().for_each(|a| *a *= factor);
    }

    /// Applies `gate` to `qubit`, pairing indices that differ only at that bit.
    pub fn apply_single(&mut self, qubit: usize, gate: &Gate) -> Result<()> {
        self.check_qubit(qubit)?;
        let [[a, b], [c, d]] = gate.matrix();
        let stride = 1 << qubit;
        for block in self.amplitudes.chunks_mut(stride << 1) {
            let (lo, hi) = block.split_at_mut(stride);
            for (x0, x1) in lo.iter_mut().zip(hi.iter_mut()) {
                let (v0, v1) = (*x0, *x1);
                *x0 = a * v0 + b * v1;
                *x1 = c * v0 + d * v1;
            }
        }
        Ok(())
    }

    /// Flips `target` on every index whose `control` bit is set.
    pub fn apply_cnot(&mut self, control: usize, target: usize) -> Result<()> {
        self.check_qubit(control)?;
        self.check_qubit(target)?;
        if control == target {
            return Err(Error::SameQubit(control));
        }
        let (cmask, tmask) = (1usize << control, 1usize << target);
        for i in 0..self.amplitudes.len() {
            if i & cmask != 0 && i & tmask == 0 {
                self.amplitudes.swap(i, i | tmask);
            }
        }
        Ok(())
    }

    /// Probability that measuring `qubit` in the Z basis yields `bit`.
    pub fn probability(&self, qubit: usize, bit: u8) -> Result<f64> {
        self.check_qubit(qubit)?;
        let mask = 1usize << qubit;
        let want = if bit == 0 { 0 } else { mask };
        Ok(self
            .amplitudes
            .iter()
            .enumerate()
            .filter(|(i, _)| i & mask == want)
            .map(|(_, a)| a.norm_sqr())
            .sum())
    }

    /// Zeroes every amplitude whose `qubit` bit differs from `bit`, without
    /// renormalizing. Returns the squared norm of what remains.
    pub fn discard_branch(&mut self, qubit: usize, bit: u8) -> Result<f64> {
        self.check_qubit(qubit)?;
        let mask = 1usize << qubit;
        let keep = if bit == 0 { 0 } else { mask };
        let mut kept = 0.0;
        for (i, a) in self.amplitudes.iter_mut().enumerate() {
            if i & mask == keep {
                kept += a.norm_sqr();
            } else {
                *a = ZERO;
            }
        }
        Ok(kept)
    }

    /// Deterministic projection onto `qubit = bit`. Returns the branch
    /// probability and the renormalized post-projection state.
    pub fn project_z(&self, qubit: usize, bit: u8) -> Result<(f64, StateVector)> {
        self.check_qubit(qubit)?;
        debug_assert!(
            (self.norm_sqr() - 1.0).abs() < 1e-9,
            "projecting an unnormalized state"
        );
        let mut next = self.clone();
        let p = next.discard_branch(qubit, bit)?;
        if p < ZERO_BRANCH {
            return Err(Error::ZeroProbabilityBranch {
                qubit,
                bit,
                probability: p,
            });
        }
        next.scale(1.0 / p.sqrt());
        Ok((p, next))
    }

    /// Samples a Z-basis measurement of `qubit` and collapses the state.
    pub fn measure_z<R: Rng + ?Sized>(&mut self, qubit: usize, rng: &mut R) -> Result<u8> {
        let p1 = self.probability(qubit, 1)?;
        let draw: f64 = rng.gen();
        // draw ∈ [0, 1): a zero-probability outcome can never be selected.
        let bit = if draw < p1 { 1 } else { 0 };
        let (_, next) = self.project_z(qubit, bit)?;
        *self = next;
        Ok(bit)
    }

    /// Tensor product with `self` on the low labels and `high` shifted above.
    pub fn tensor(&self, high: &StateVector) -> StateVector {
        let shift = self.num_qubits;
        let mut amplitudes = vec![ZERO; 1 << (shift + high.num_qubits)];
        for (h, hb) in high.amplitudes.iter().enumerate() {
            if *hb == ZERO {
                continue;
            }
            for (l, la) in self.amplitudes.iter().enumerate() {
                amplitudes[(h << shift) | l] = la * hb;
            }
        }
        StateVector {
            num_qubits: shift + high.num_qubits,
            amplitudes,
        }
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &StateVector) -> Result<Complex> {
        if self.num_qubits != other.num_qubits {
            return Err(Error::DimensionMismatch {
                left: self.num_qubits,
                right: other.num_qubits,
            });
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Partial trace over every qubit not in `keep`. Local bit `i` of the
    /// result corresponds to qubit `keep[i]`.
    pub fn reduced_density(&self, keep: &[usize]) -> Result<DensityMatrix> {
        if keep.is_empty() {
            return Err(Error::EmptySubset);
        }
        let mut seen = 0usize;
        for &q in keep {
            self.check_qubit(q)?;
            if seen & (1 << q) != 0 {
                return Err(Error::DuplicateQubit(q));
            }
            seen |= 1 << q;
        }
        let traced: Vec<usize> = (0..self.num_qubits).filter(|q| seen & (1 << q) == 0).collect();
        let dim = 1usize << keep.len();
        let scatter = |local: usize, qubits: &[usize]| -> usize {
            qubits
                .iter()
                .enumerate()
                .filter(|(i, _)| (local >> i) & 1 == 1)
                .fold(0, |acc, (_, &q)| acc | (1 << q))
        };
        let kept_offsets: Vec<usize> = (0..dim).map(|l| scatter(l, keep)).collect();
        let mut rho = DMatrix::from_element(dim, dim, ZERO);
        for env in 0..(1usize << traced.len()) {
            let base = scatter(env, &traced);
            for r in 0..dim {
                let ar = self.amplitudes[base | kept_offsets[r]];
                if ar == ZERO {
                    continue;
                }
                for c in 0..dim {
                    rho[(r, c)] += ar * self.amplitudes[base | kept_offsets[c]].conj();
                }
            }
        }
        Ok(DensityMatrix {
            num_qubits: keep.len(),
            entries: rho,
        })
    }

    /// |ψ⟩⟨ψ| over all qubits.
    pub fn density_matrix(&self) -> DensityMatrix {
        let all: Vec<usize> = (0..self.num_qubits).collect();
        self.reduced_density(&all)
            .expect("full qubit list is always valid")
    }
}

fn norm_sqr(amplitudes: &[Complex]) -> f64 {
    amplitudes.iter().map(|a| a.norm_sqr()).sum()
}

/// |⟨a|b⟩|², insensitive to global phase.
pub fn pure_fidelity(a: &StateVector, b: &StateVector) -> Result<f64> {
    Ok(a.inner(b)?.norm_sqr())
}

/// A 2^k × 2^k density operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    num_qubits: usize,
    entries: DMatrix<Complex>,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity before wrapping.
    pub fn new(entries: DMatrix<Complex>) -> Result<Self> {
        let dim = entries.nrows();
        if dim != entries.ncols() {
            return Err(Error::DimensionMismatch {
                left: dim,
                right: entries.ncols(),
            });
        }
        if dim < 2 || !dim.is_power_of_two() {
            return Err(Error::InvalidLength(dim));
        }
        let rho = Self {
            num_qubits: dim.trailing_zeros() as usize,
            entries,
        };
        rho.validate(1e-10)?;
        Ok(rho)
    }

    pub fn from_pure(state: &StateVector) -> Self {
        state.density_matrix()
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, row: usize, col: usize) -> Complex {
        self.entries[(row, col)]
    }

    pub fn matrix(&self) -> &DMatrix<Complex> {
        &self.entries
    }

    pub fn trace(&self) -> Complex {
        self.entries.trace()
    }

    /// `tr(ρ²) = 1` within 1e-10.
    pub fn is_pure(&self) -> bool {
        let purity: f64 = self.entries.iter().map(|z| z.norm_sqr()).sum();
        (purity - 1.0).abs() < 1e-10
    }

    /// Checks the density-matrix invariants at tolerance `tol`; eigenvalues
    /// may dip to -1e-10.
    pub fn validate(&self, tol: f64) -> Result<()> {
        let dim = self.dim();
        for i in 0..dim {
            for j in 0..dim {
                if (self.entries[(i, j)] - self.entries[(j, i)].conj()).norm() > tol {
                    return Err(Error::InvalidDensityMatrix(format!(
                        "entry ({i},{j}) breaks Hermiticity"
                    )));
                }
            }
        }
        let tr = self.trace();
        if (tr - ONE).norm() > tol {
            return Err(Error::InvalidDensityMatrix(format!("trace {tr}")));
        }
        let min = self
            .eigenvalues()
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        if min < -1e-10 {
            return Err(Error::InvalidDensityMatrix(format!(
                "negative eigenvalue {min:e}"
            )));
        }
        Ok(())
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.entries
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect()
    }
}

/// Square root of a Hermitian PSD matrix, with negative round-off
/// eigenvalues clamped to zero.
fn psd_sqrt(m: &DMatrix<Complex>) -> DMatrix<Complex> {
    let eig = m.clone().symmetric_eigen();
    let roots = eig
        .eigenvalues
        .map(|l| Complex::new(l.max(0.0).sqrt(), 0.0));
    let v = &eig.eigenvectors;
    v * DMatrix::from_diagonal(&roots) * v.adjoint()
}

/// Uhlmann fidelity `(Tr √(√ρ σ √ρ))²`.
pub fn fidelity(rho_in: &DensityMatrix, rho_out: &DensityMatrix) -> Result<f64> {
    if rho_in.dim() != rho_out.dim() {
        return Err(Error::DimensionMismatch {
            left: rho_in.num_qubits,
            right: rho_out.num_qubits,
        });
    }
    // With a pure argument the Uhlmann formula reduces to tr(ρσ), which
    // avoids square roots of round-off eigenvalues near zero.
    if rho_in.is_pure() || rho_out.is_pure() {
        let overlap = (&rho_in.entries * &rho_out.entries).trace().re;
        return Ok(overlap.clamp(0.0, 1.0));
    }
    let root = psd_sqrt(&rho_in.entries);
    let inner = &root * &rho_out.entries * &root;
    // Symmetrize to remove round-off before the Hermitian eigensolver.
    let inner = (&inner + inner.adjoint()) * Complex::new(0.5, 0.0);
    let trace: f64 = inner
        .symmetric_eigenvalues()
        .iter()
        .map(|l| l.max(0.0).sqrt())
        .sum();
    Ok(trace * trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex {
        Complex::new(re, im)
    }

    fn close(a: &StateVector, b: &[Complex], tol: f64) -> bool {
        a.amplitudes()
            .iter()
            .zip(b)
            .all(|(x, y)| (x - y).norm() < tol)
    }

    #[test]
    fn ket_strings_put_qubit_zero_first() {
        assert_eq!(ket_string(0b01, 2), "10");
        assert_eq!(ket_string(0b110, 3), "011");
        assert_eq!(ket_index("011").unwrap(), 0b110);
        assert!(ket_index("0x1").is_err());
    }

    #[test]
    fn hadamard_on_zero() {
        let mut s = StateVector::new(1);
        s.apply_single(0, &Gate::H).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!(close(&s, &[c(h, 0.0), c(h, 0.0)], 1e-15));
    }

    #[test]
    fn identity_is_noop() {
        let mut s = StateVector::new(1);
        s.apply_single(0, &Gate::I).unwrap();
        assert_eq!(s, StateVector::new(1));
    }

    #[test]
    fn z_fixes_relative_sign() {
        let (a, b) = (0.6, 0.8);
        let mut s = StateVector::from_amplitudes(vec![c(a, 0.0), c(-b, 0.0)]).unwrap();
        s.apply_single(0, &Gate::Z).unwrap();
        let target = StateVector::from_amplitudes(vec![c(a, 0.0), c(b, 0.0)]).unwrap();
        assert!((pure_fidelity(&s, &target).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_qubit_gate_range_check() {
        let mut s = StateVector::new(2);
        assert_eq!(
            s.apply_single(2, &Gate::X),
            Err(Error::QubitOutOfRange {
                qubit: 2,
                num_qubits: 2
            })
        );
    }

    #[test]
    fn cnot_basis_cases() {
        // |q0 q1⟩ = |01⟩ means q1 = 1.
        let mut s = StateVector::basis(2, 0b10);
        s.apply_cnot(1, 0).unwrap();
        assert_eq!(s, StateVector::basis(2, 0b11));
        let mut s = StateVector::new(2);
        s.apply_cnot(1, 0).unwrap();
        assert_eq!(s, StateVector::new(2));
        assert_eq!(s.apply_cnot(1, 1), Err(Error::SameQubit(1)));
        assert!(s.apply_cnot(0, 5).is_err());
    }

    /// Brute-force kernel: the 4×4 matrix of CNOT(1→0) then H on qubit 1,
    /// built entry by entry from the definitions in the little-endian basis.
    fn bell_kernel_matrix() -> [[f64; 4]; 4] {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut cnot = [[0.0; 4]; 4];
        for i in 0..4 {
            let j = if i & 0b10 != 0 { i ^ 0b01 } else { i };
            cnot[j][i] = 1.0;
        }
        let mut had = [[0.0; 4]; 4];
        for i in 0..4usize {
            for j in 0..4usize {
                if (i & 1) == (j & 1) {
                    let (bi, bj) = (i >> 1, j >> 1);
                    had[i][j] = if bi == 1 && bj == 1 { -h } else { h };
                }
            }
        }
        let mut out = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                out[i][j] = (0..4).map(|k| had[i][k] * cnot[k][j]).sum();
            }
        }
        out
    }

    #[test]
    fn cnot_then_h_matches_matrix_kernel() {
        let kernel = bell_kernel_matrix();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let amps: Vec<Complex> = (0..4).map(|_| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect();
            let n: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            let amps: Vec<Complex> = amps.into_iter().map(|a| a / n).collect();
            let mut s = StateVector::from_amplitudes(amps.clone()).unwrap();
            s.apply_cnot(1, 0).unwrap();
            s.apply_single(1, &Gate::H).unwrap();
            let expected: Vec<Complex> = (0..4)
                .map(|i| (0..4).map(|j| amps[j] * kernel[i][j]).sum())
                .collect();
            assert!(close(&s, &expected, 1e-14));
        }
        // Φ+ lands on |00⟩.
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut phi = StateVector::from_amplitudes(vec![c(h, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(h, 0.0)]).unwrap();
        phi.apply_cnot(1, 0).unwrap();
        phi.apply_single(1, &Gate::H).unwrap();
        assert!(close(&phi, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)], 1e-15));
    }

    fn ghz3() -> StateVector {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut a = vec![c(0.0, 0.0); 8];
        a[0] = c(h, 0.0);
        a[7] = c(h, 0.0);
        StateVector::from_amplitudes(a).unwrap()
    }

    #[test]
    fn measure_eigenstate_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let mut s = StateVector::basis(1, 1);
            assert_eq!(s.measure_z(0, &mut rng).unwrap(), 1);
            assert_eq!(s, StateVector::basis(1, 1));
        }
    }

    #[test]
    fn measure_ghz_collapses_all() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut seen = [0usize; 2];
        for _ in 0..200 {
            let mut s = ghz3();
            let bit = s.measure_z(1, &mut rng).unwrap();
            seen[bit as usize] += 1;
            let idx = if bit == 0 { 0 } else { 7 };
            assert!((s.amplitude(idx).norm() - 1.0).abs() < 1e-12);
        }
        assert!(seen[0] > 60 && seen[1] > 60);
    }

    #[test]
    fn measurement_is_seed_deterministic() {
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..32)
                .map(|_| {
                    let mut s = ghz3();
                    s.measure_z(0, &mut rng).unwrap()
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(42), run(42));
    }

    #[test]
    fn projection_examples() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let bell = StateVector::from_amplitudes(vec![c(h, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(h, 0.0)]).unwrap();
        let (p, s) = bell.project_z(0, 0).unwrap();
        assert!((p - 0.5).abs() < 1e-15);
        assert_eq!(s.amplitudes()[0], c(1.0, 0.0) * (h / 0.5f64.sqrt()));
        assert!(matches!(
            StateVector::new(1).project_z(0, 1),
            Err(Error::ZeroProbabilityBranch { .. })
        ));
        let (p, s) = ghz3().project_z(2, 1).unwrap();
        assert!((p - 0.5).abs() < 1e-15);
        assert!((s.amplitude(7).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reduced_density_examples() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        // |0⟩ on q0, |+⟩ on q1.
        let s = StateVector::basis(1, 0).tensor(
            &StateVector::from_amplitudes(vec![c(h, 0.0), c(h, 0.0)]).unwrap(),
        );
        let rho = s.reduced_density(&[1]).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((rho.get(i, j) - c(0.5, 0.0)).norm() < 1e-15);
            }
        }
        let rho = ghz3().reduced_density(&[0]).unwrap();
        assert!((rho.get(0, 0) - c(0.5, 0.0)).norm() < 1e-15);
        assert!((rho.get(1, 1) - c(0.5, 0.0)).norm() < 1e-15);
        assert!(rho.get(0, 1).norm() < 1e-15);
        let full = ghz3().reduced_density(&[0, 1, 2]).unwrap();
        assert_eq!(full, ghz3().density_matrix());
        assert_eq!(ghz3().reduced_density(&[0, 0]), Err(Error::DuplicateQubit(0)));
        assert_eq!(ghz3().reduced_density(&[]), Err(Error::EmptySubset));
        assert!(ghz3().reduced_density(&[3]).is_err());
    }

    #[test]
    fn reduced_density_respects_keep_order() {
        // |q0 q1⟩ = |10⟩; keeping [1, 0] puts q1 on the low bit.
        let s = StateVector::basis(2, 0b01);
        let rho = s.reduced_density(&[1, 0]).unwrap();
        assert!((rho.get(0b10, 0b10) - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn fidelity_examples() {
        let zero = StateVector::basis(1, 0).density_matrix();
        let one = StateVector::basis(1, 1).density_matrix();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let plus = StateVector::from_amplitudes(vec![c(h, 0.0), c(h, 0.0)])
            .unwrap()
            .density_matrix();
        assert!((fidelity(&zero, &zero).unwrap() - 1.0).abs() < 1e-12);
        assert!(fidelity(&zero, &one).unwrap().abs() < 1e-12);
        assert!((fidelity(&zero, &plus).unwrap() - 0.5).abs() < 1e-12);
        let two = StateVector::new(2).density_matrix();
        assert!(matches!(
            fidelity(&zero, &two),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn pure_fidelity_examples() {
        let t: f64 = 0.37;
        let psi = StateVector::from_amplitudes(vec![c(t.cos(), 0.0), c(t.sin(), 0.0)]).unwrap();
        let zero = StateVector::basis(1, 0);
        assert!((pure_fidelity(&zero, &psi).unwrap() - t.cos().powi(2)).abs() < 1e-15);
        let phased = StateVector::from_raw(psi.amplitudes().iter().map(|a| a * Complex::from_polar(1.0, 1.3)).collect());
        assert!((pure_fidelity(&psi, &phased).unwrap() - 1.0).abs() < 1e-12);
        assert!(pure_fidelity(&psi, &StateVector::new(2)).is_err());
    }

    #[test]
    fn density_matrix_validation() {
        let mut m = DMatrix::from_element(2, 2, c(0.0, 0.0));
        m[(0, 0)] = c(1.0, 0.0);
        assert!(DensityMatrix::new(m.clone()).is_ok());
        m[(0, 1)] = c(0.1, 0.0);
        assert!(DensityMatrix::new(m.clone()).is_err());
        m[(0, 1)] = c(0.0, 0.0);
        m[(0, 0)] = c(1.5, 0.0);
        m[(1, 1)] = c(-0.5, 0.0);
        assert!(DensityMatrix::new(m).is_err());
    }

    #[test]
    fn non_unitary_gate_rejected() {
        assert_eq!(
            Gate::unitary([[c(1.0, 0.0), c(1.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]]),
            Err(Error::NonUnitary)
        );
        for g in [Gate::I, Gate::X, Gate::Z, Gate::H] {
            assert!(g.is_unitary(1e-12));
        }
    }

    #[test]
    fn from_amplitudes_rejects_bad_input() {
        assert_eq!(
            StateVector::from_amplitudes(vec![c(1.0, 0.0); 3]),
            Err(Error::InvalidLength(3))
        );
        assert!(matches!(
            StateVector::from_amplitudes(vec![c(1.0, 0.0), c(1.0, 0.0)]),
            Err(Error::NotNormalized(_))
        ));
    }
}
