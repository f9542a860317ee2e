//! Dense statevector simulation, exact evolution, sampling and Pauli-noise
//! trajectories.
//!
//! Amplitude index bits are ordered with qubit 0 as the most significant bit,
//! so bitstrings read left to right as qubit 0, 1, ….

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Gate};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector, ONE, ZERO};
use crate::pauli::{Pauli, PauliString, DENSE_LIMIT};
use crate::syk::Hamiltonian;

type M2 = [[Complex64; 2]; 2];

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn single_matrix(g: &Gate) -> Option<M2> {
    let h = FRAC_1_SQRT_2;
    Some(match *g {
        Gate::H(_) => [[c(h, 0.0), c(h, 0.0)], [c(h, 0.0), c(-h, 0.0)]],
        Gate::S(_) => [[ONE, ZERO], [ZERO, c(0.0, 1.0)]],
        Gate::Sdg(_) => [[ONE, ZERO], [ZERO, c(0.0, -1.0)]],
        Gate::X(_) => pauli_matrix(Pauli::X),
        Gate::Y(_) => pauli_matrix(Pauli::Y),
        Gate::Z(_) => pauli_matrix(Pauli::Z),
        Gate::Rz(_, t) => [
            [Complex64::from_polar(1.0, -t / 2.0), ZERO],
            [ZERO, Complex64::from_polar(1.0, t / 2.0)],
        ],
        _ => return None,
    })
}

fn pauli_matrix(p: Pauli) -> M2 {
    match p {
        Pauli::I => [[ONE, ZERO], [ZERO, ONE]],
        Pauli::X => [[ZERO, ONE], [ONE, ZERO]],
        Pauli::Y => [[ZERO, c(0.0, -1.0)], [c(0.0, 1.0), ZERO]],
        Pauli::Z => [[ONE, ZERO], [ZERO, c(-1.0, 0.0)]],
    }
}

fn ecr_matrix() -> [[Complex64; 4]; 4] {
    let h = FRAC_1_SQRT_2;
    let (o, r, i, mi) = (ZERO, c(h, 0.0), c(0.0, h), c(0.0, -h));
    [[o, r, o, i], [r, o, mi, o], [o, i, o, r], [mi, o, r, o]]
}

/// Dense matrix of a unitary gate: 2×2 for one qubit, 4×4 for two with the
/// first operand as the left tensor factor.
pub fn gate_matrix(g: &Gate) -> Result<CMatrix> {
    if let Some(m) = single_matrix(g) {
        return Ok(CMatrix::from_fn(2, 2, |r, c| m[r][c]));
    }
    let m: [[Complex64; 4]; 4] = match g {
        Gate::Cx(..) => {
            let mut m = [[ZERO; 4]; 4];
            for (r, col) in [(0, 0), (1, 1), (2, 3), (3, 2)] {
                m[r][col] = ONE;
            }
            m
        }
        Gate::Swap(..) => {
            let mut m = [[ZERO; 4]; 4];
            for (r, col) in [(0, 0), (1, 2), (2, 1), (3, 3)] {
                m[r][col] = ONE;
            }
            m
        }
        Gate::Ecr(..) => ecr_matrix(),
        other => {
            return Err(Error::UnsupportedGate(format!(
                "{} has no unitary matrix",
                other.name()
            )))
        }
    };
    Ok(CMatrix::from_fn(4, 4, |r, c| m[r][c]))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    n: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    fn check_width(n: usize) -> Result<()> {
        if n == 0 || n > DENSE_LIMIT {
            return Err(Error::Capacity {
                what: "statevector",
                n,
                max: DENSE_LIMIT,
            });
        }
        Ok(())
    }

    /// `|0…0⟩`.
    pub fn zero(n: usize) -> Result<Self> {
        Self::basis(n, 0)
    }

    pub fn basis(n: usize, index: usize) -> Result<Self> {
        Self::check_width(n)?;
        if index >= 1 << n {
            return Err(Error::InvalidParameter(format!("basis index {index} out of range")));
        }
        let mut amps = vec![ZERO; 1 << n];
        amps[index] = ONE;
        Ok(StateVector { n, amps })
    }

    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let n = amps.len().trailing_zeros() as usize;
        if !amps.len().is_power_of_two() {
            return Err(Error::InvalidParameter("length must be a power of two".into()));
        }
        Self::check_width(n)?;
        let s = StateVector { n, amps };
        if (s.norm() - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidParameter(format!("state norm {} is not 1", s.norm())));
        }
        Ok(s)
    }

    pub fn from_cvector(v: &CVector) -> Result<Self> {
        Self::from_amplitudes(v.iter().copied().collect())
    }

    pub fn to_cvector(&self) -> CVector {
        CVector::from_column_slice(&self.amps)
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                left: self.n,
                right: other.n,
            });
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    fn bit(&self, q: usize) -> usize {
        1 << (self.n - 1 - q)
    }

    fn apply_single(&mut self, q: usize, m: &M2) {
        let b = self.bit(q);
        for i in 0..self.amps.len() {
            if i & b == 0 {
                let (a0, a1) = (self.amps[i], self.amps[i | b]);
                self.amps[i] = m[0][0] * a0 + m[0][1] * a1;
                self.amps[i | b] = m[1][0] * a0 + m[1][1] * a1;
            }
        }
    }

    fn apply_two(&mut self, q0: usize, q1: usize, m: &[[Complex64; 4]; 4]) {
        let (b0, b1) = (self.bit(q0), self.bit(q1));
        for i in 0..self.amps.len() {
            if i & (b0 | b1) == 0 {
                let idx = [i, i | b1, i | b0, i | b0 | b1];
                let a = idx.map(|k| self.amps[k]);
                for (r, &k) in idx.iter().enumerate() {
                    self.amps[k] = (0..4).map(|c| m[r][c] * a[c]).sum();
                }
            }
        }
    }

    fn apply_cx(&mut self, ctrl: usize, tgt: usize) {
        let (bc, bt) = (self.bit(ctrl), self.bit(tgt));
        for i in 0..self.amps.len() {
            if i & bc != 0 && i & bt == 0 {
                self.amps.swap(i, i | bt);
            }
        }
    }

    fn apply_swap(&mut self, a: usize, b: usize) {
        let (ba, bb) = (self.bit(a), self.bit(b));
        for i in 0..self.amps.len() {
            if i & ba != 0 && i & bb == 0 {
                self.amps.swap(i, i ^ ba ^ bb);
            }
        }
    }

    pub fn apply_gate(&mut self, g: &Gate) -> Result<()> {
        for q in g.qubits() {
            if q >= self.n {
                return Err(Error::InvalidParameter(format!("operand {q} outside width {}", self.n)));
            }
        }
        match *g {
            Gate::Barrier | Gate::Measure(_) => {}
            Gate::Cx(a, b) => self.apply_cx(a, b),
            Gate::Swap(a, b) => self.apply_swap(a, b),
            Gate::Ecr(a, b) => self.apply_two(a, b, &ecr_matrix()),
            ref single => {
                let m = single_matrix(single).expect("single-qubit gate");
                self.apply_single(single.qubits()[0], &m);
            }
        }
        Ok(())
    }

    /// Applies a Pauli string, phase included.
    pub fn apply_pauli(&mut self, p: &PauliString) -> Result<()> {
        if p.num_qubits() != self.n {
            return Err(Error::DimensionMismatch {
                left: self.n,
                right: p.num_qubits(),
            });
        }
        for q in 0..self.n {
            let l = p.letter(q);
            if l != Pauli::I {
                self.apply_single(q, &pauli_matrix(l));
            }
        }
        let ph = p.phase().to_complex();
        self.amps.iter_mut().for_each(|a| *a *= ph);
        Ok(())
    }

    /// `⟨ψ|P|ψ⟩` for a Hermitian Pauli string.
    pub fn expectation(&self, p: &PauliString) -> Result<f64> {
        let mut t = self.clone();
        t.apply_pauli(p)?;
        Ok(self.inner(&t)?.re)
    }

    /// `⟨Z_q⟩`.
    pub fn expectation_z(&self, q: usize) -> f64 {
        let b = self.bit(q);
        self.amps
            .iter()
            .enumerate()
            .map(|(i, a)| if i & b == 0 { a.norm_sqr() } else { -a.norm_sqr() })
            .sum()
    }

    pub fn apply_matrix(&mut self, u: &CMatrix) -> Result<()> {
        if u.nrows() != self.amps.len() || u.ncols() != self.amps.len() {
            return Err(Error::DimensionMismatch {
                left: self.amps.len(),
                right: u.nrows(),
            });
        }
        let v = u * self.to_cvector();
        self.amps = v.iter().copied().collect();
        Ok(())
    }

    /// One `index re im` line per nonzero amplitude.
    pub fn dump(&self) -> String {
        self.amps
            .iter()
            .enumerate()
            .filter(|(_, a)| a.norm_sqr() > 0.0)
            .map(|(i, a)| format!("{} {:+.12e} {:+.12e}\n", bitstring(i, self.n), a.re, a.im))
            .collect()
    }
}

pub fn bitstring(index: usize, n: usize) -> String {
    (0..n)
        .map(|q| if index >> (n - 1 - q) & 1 == 1 { '1' } else { '0' })
        .collect()
}

pub fn apply_circuit(state: &StateVector, c: &Circuit) -> Result<StateVector> {
    if state.n != c.width() {
        return Err(Error::DimensionMismatch {
            left: state.n,
            right: c.width(),
        });
    }
    let mut s = state.clone();
    for g in c.gates() {
        s.apply_gate(g)?;
    }
    Ok(s)
}

/// Dense unitary of a measurement-free circuit.
pub fn circuit_unitary(c: &Circuit) -> Result<CMatrix> {
    let n = c.width();
    StateVector::check_width(n)?;
    if c.gates().iter().any(|g| matches!(g, Gate::Measure(_))) {
        return Err(Error::UnsupportedGate("measure is not unitary".into()));
    }
    let dim = 1 << n;
    let mut u = CMatrix::zeros(dim, dim);
    for col in 0..dim {
        let s = apply_circuit(&StateVector::basis(n, col)?, c)?;
        for (r, a) in s.amps.iter().enumerate() {
            u[(r, col)] = *a;
        }
    }
    Ok(u)
}

/// `e^{-iHt}|ψ⟩` from the cached eigendecomposition.
pub fn exact_evolve(h: &Hamiltonian, t: f64, state: &StateVector) -> Result<StateVector> {
    if h.num_qubits() != state.n {
        return Err(Error::DimensionMismatch {
            left: h.num_qubits(),
            right: state.n,
        });
    }
    let v = h.eigen()?.evolve(t, &state.to_cvector());
    Ok(StateVector {
        n: state.n,
        amps: v.iter().copied().collect(),
    })
}

/// Per-qubit assignment error probabilities.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReadoutError {
    /// `p(1|0)`.
    pub p1_given_0: f64,
    /// `p(0|1)`.
    pub p0_given_1: f64,
}

impl ReadoutError {
    pub fn symmetric(p: f64) -> Self {
        ReadoutError {
            p1_given_0: p,
            p0_given_1: p,
        }
    }

    fn flip<R: Rng + ?Sized>(&self, bit: bool, rng: &mut R) -> bool {
        let p = if bit { self.p0_given_1 } else { self.p1_given_0 };
        if p > 0.0 && rng.gen::<f64>() < p {
            !bit
        } else {
            bit
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Two-qubit depolarizing probability per two-qubit gate.
    pub p2: f64,
    /// Single-qubit depolarizing probability per single-qubit gate; off by default.
    #[serde(default)]
    pub p1: f64,
    /// Per-qubit readout errors; empty means perfect readout.
    #[serde(default)]
    pub readout: Vec<ReadoutError>,
}

impl NoiseModel {
    pub fn depolarizing(p2: f64) -> Self {
        NoiseModel {
            p2,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |p: f64| (0.0..=1.0).contains(&p);
        if !ok(self.p2)
            || !ok(self.p1)
            || self.readout.iter().any(|r| !ok(r.p1_given_0) || !ok(r.p0_given_1))
        {
            return Err(Error::InvalidParameter("noise probabilities must lie in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn is_noiseless(&self) -> bool {
        self.p2 == 0.0 && self.p1 == 0.0
    }

    pub fn readout_for(&self, q: usize) -> ReadoutError {
        self.readout.get(q).copied().unwrap_or_default()
    }
}

#[derive(Clone, Debug)]
enum Op {
    Single(usize, M2),
    Cx(usize, usize),
    Swap(usize, usize),
    Two(usize, usize, [[Complex64; 4]; 4]),
    /// Two-qubit noise location.
    Noise2(usize, usize),
    /// Single-qubit noise location.
    Noise1(usize),
}

/// A circuit pre-processed for repeated trajectory simulation: runs of
/// single-qubit gates on a qubit are fused into one 2×2 matrix and noise
/// locations are made explicit.
#[derive(Clone, Debug)]
pub struct Program {
    n: usize,
    ops: Vec<Op>,
}

fn mul2(a: &M2, b: &M2) -> M2 {
    let mut r = [[ZERO; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            r[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    r
}

impl Program {
    pub fn compile(c: &Circuit, single_qubit_noise: bool) -> Result<Self> {
        let n = c.width();
        StateVector::check_width(n)?;
        let mut ops = Vec::new();
        let mut pending: Vec<Option<M2>> = vec![None; n];
        let flush = |ops: &mut Vec<Op>, pending: &mut Vec<Option<M2>>, q: usize| {
            if let Some(m) = pending[q].take() {
                ops.push(Op::Single(q, m));
            }
        };
        for g in c.gates() {
            match *g {
                Gate::Barrier | Gate::Measure(_) => {}
                Gate::Cx(a, b) | Gate::Swap(a, b) | Gate::Ecr(a, b) => {
                    flush(&mut ops, &mut pending, a);
                    flush(&mut ops, &mut pending, b);
                    let events = match *g {
                        Gate::Cx(..) => {
                            ops.push(Op::Cx(a, b));
                            1
                        }
                        Gate::Swap(..) => {
                            ops.push(Op::Swap(a, b));
                            3
                        }
                        _ => {
                            ops.push(Op::Two(a, b, ecr_matrix()));
                            1
                        }
                    };
                    for _ in 0..events {
                        ops.push(Op::Noise2(a, b));
                    }
                }
                ref single => {
                    let q = single.qubits()[0];
                    let m = single_matrix(single).expect("single-qubit gate");
                    if single_qubit_noise {
                        flush(&mut ops, &mut pending, q);
                        ops.push(Op::Single(q, m));
                        ops.push(Op::Noise1(q));
                    } else {
                        pending[q] = Some(match pending[q] {
                            Some(prev) => mul2(&m, &prev),
                            None => m,
                        });
                    }
                }
            }
        }
        for q in 0..n {
            flush(&mut ops, &mut pending, q);
        }
        Ok(Program { n, ops })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    /// One stochastic trajectory. With a noiseless model this is the exact
    /// circuit action and the generator is not touched.
    pub fn run<R: Rng + ?Sized>(
        &self,
        state: &StateVector,
        noise: &NoiseModel,
        rng: &mut R,
    ) -> Result<StateVector> {
        if state.n != self.n {
            return Err(Error::DimensionMismatch {
                left: state.n,
                right: self.n,
            });
        }
        let mut s = state.clone();
        for op in &self.ops {
            match op {
                Op::Single(q, m) => s.apply_single(*q, m),
                Op::Cx(a, b) => s.apply_cx(*a, *b),
                Op::Swap(a, b) => s.apply_swap(*a, *b),
                Op::Two(a, b, m) => s.apply_two(*a, *b, m),
                Op::Noise2(a, b) => {
                    if noise.p2 > 0.0 && rng.gen::<f64>() < noise.p2 {
                        let k = rng.gen_range(1..16u8);
                        for (q, l) in [(*a, k >> 2), (*b, k & 3)] {
                            let p = Pauli::from_bits(l & 1 == 1, l & 2 == 2);
                            if p != Pauli::I {
                                s.apply_single(q, &pauli_matrix(p));
                            }
                        }
                    }
                }
                Op::Noise1(q) => {
                    if noise.p1 > 0.0 && rng.gen::<f64>() < noise.p1 {
                        let p = [Pauli::X, Pauli::Y, Pauli::Z][rng.gen_range(0..3)];
                        s.apply_single(*q, &pauli_matrix(p));
                    }
                }
            }
        }
        Ok(s)
    }
}

/// One noise trajectory: after every two-qubit gate (three times for a SWAP)
/// a uniformly chosen non-identity two-qubit Pauli hits the operands with
/// probability `p2`.
pub fn apply_noisy_circuit<R: Rng + ?Sized>(
    state: &StateVector,
    c: &Circuit,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<StateVector> {
    noise.validate()?;
    Program::compile(c, noise.p1 > 0.0)?.run(state, noise, rng)
}

/// Bitstring → count, bitstrings written qubit 0 first.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotCounts {
    pub n: usize,
    pub counts: BTreeMap<String, u64>,
    pub shots: u64,
}

impl ShotCounts {
    pub fn new(n: usize) -> Self {
        ShotCounts {
            n,
            counts: BTreeMap::new(),
            shots: 0,
        }
    }

    pub fn record(&mut self, index: usize) {
        *self.counts.entry(bitstring(index, self.n)).or_insert(0) += 1;
        self.shots += 1;
    }

    pub fn merge(&mut self, other: &ShotCounts) -> Result<()> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                left: self.n,
                right: other.n,
            });
        }
        for (k, v) in &other.counts {
            *self.counts.entry(k.clone()).or_insert(0) += v;
        }
        self.shots += other.shots;
        Ok(())
    }

    pub fn count(&self, bits: &str) -> u64 {
        self.counts.get(bits).copied().unwrap_or(0)
    }

    pub fn frequency(&self, bits: &str) -> f64 {
        if self.shots == 0 {
            0.0
        } else {
            self.count(bits) as f64 / self.shots as f64
        }
    }

    /// Empirical distribution indexed by basis state.
    pub fn distribution(&self) -> Vec<f64> {
        let mut p = vec![0.0; 1 << self.n];
        for (k, v) in &self.counts {
            let idx = usize::from_str_radix(k, 2).expect("bitstring key");
            p[idx] = *v as f64 / self.shots.max(1) as f64;
        }
        p
    }

    pub fn to_text(&self) -> String {
        self.counts.iter().map(|(k, v)| format!("{k} {v}\n")).collect()
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut out: Option<ShotCounts> = None;
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line
                .trim()
                .split_once(' ')
                .ok_or_else(|| Error::Parse(format!("bad counts line `{line}`")))?;
            let v: u64 = v
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad count in `{line}`")))?;
            if k.is_empty() || !k.chars().all(|ch| ch == '0' || ch == '1') {
                return Err(Error::Parse(format!("bad bitstring `{k}`")));
            }
            let c = out.get_or_insert_with(|| ShotCounts::new(k.len()));
            if k.len() != c.n {
                return Err(Error::Parse("inconsistent bitstring widths".into()));
            }
            *c.counts.entry(k.to_string()).or_insert(0) += v;
            c.shots += v;
        }
        out.ok_or_else(|| Error::Parse("no counts".into()))
    }
}

/// Draws one basis index from `probs` (cumulative search).
pub fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let total: f64 = probs.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (i, p) in probs.iter().enumerate() {
        if u < *p {
            return i;
        }
        u -= p;
    }
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
}

/// Applies readout flips to a measured basis index.
pub fn apply_readout<R: Rng + ?Sized>(
    index: usize,
    n: usize,
    readout: &[ReadoutError],
    rng: &mut R,
) -> usize {
    let mut out = index;
    for (q, r) in readout.iter().enumerate().take(n) {
        let b = 1 << (n - 1 - q);
        if r.flip(index & b != 0, rng) {
            out ^= b;
        } else {
            out &= !b;
            out |= index & b;
        }
    }
    out
}

pub fn sample_measurements<R: Rng + ?Sized>(
    state: &StateVector,
    shots: u64,
    readout: &[ReadoutError],
    rng: &mut R,
) -> Result<ShotCounts> {
    if shots == 0 {
        return Err(Error::InvalidParameter("shots must be at least 1".into()));
    }
    let probs = state.probabilities();
    let mut cdf = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for p in &probs {
        acc += p;
        cdf.push(acc);
    }
    let mut counts = ShotCounts::new(state.n);
    for _ in 0..shots {
        let u = rng.gen::<f64>() * acc;
        let idx = cdf.partition_point(|&c| c <= u).min(probs.len() - 1);
        counts.record(apply_readout(idx, state.n, readout, rng));
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{approx_eq, distance_up_to_phase};
    use crate::rng;

    fn ps(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    #[test]
    fn hadamard_on_zero() {
        let c = Circuit::from_gates(1, [Gate::H(0)]).unwrap();
        let s = apply_circuit(&StateVector::zero(1).unwrap(), &c).unwrap();
        assert!((s.amplitudes()[0].re - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((s.amplitudes()[1].re - FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn qubit_zero_is_leftmost() {
        let c = Circuit::from_gates(3, [Gate::X(0)]).unwrap();
        let s = apply_circuit(&StateVector::zero(3).unwrap(), &c).unwrap();
        assert_eq!(s.probabilities()[0b100], 1.0);
        assert_eq!(bitstring(0b100, 3), "100");
        assert_eq!(s.expectation_z(0), -1.0);
        assert_eq!(s.expectation_z(1), 1.0);
    }

    #[test]
    fn width_mismatch() {
        let c = Circuit::new(2).unwrap();
        assert!(apply_circuit(&StateVector::zero(3).unwrap(), &c).is_err());
    }

    #[test]
    fn gate_matrices_match_pauli_matrices() {
        for (g, p) in [(Gate::X(0), "X"), (Gate::Y(0), "Y"), (Gate::Z(0), "Z")] {
            assert!(approx_eq(&gate_matrix(&g).unwrap(), &ps(p).to_matrix().unwrap(), 0.0));
        }
        let ecr = gate_matrix(&Gate::Ecr(0, 1)).unwrap();
        let expected = (ps("IX").to_matrix().unwrap() - ps("XY").to_matrix().unwrap())
            * Complex64::new(FRAC_1_SQRT_2, 0.0);
        assert!(approx_eq(&ecr, &expected, 1e-15));
        // circuit_unitary agrees with gate_matrix for every two-qubit kind
        for g in [Gate::Cx(0, 1), Gate::Ecr(0, 1), Gate::Swap(0, 1)] {
            let u = circuit_unitary(&Circuit::from_gates(2, [g]).unwrap()).unwrap();
            assert!(approx_eq(&u, &gate_matrix(&g).unwrap(), 1e-15));
        }
        let u = circuit_unitary(&Circuit::from_gates(2, [Gate::Cx(1, 0)]).unwrap()).unwrap();
        assert_eq!(u[(1, 3)], ONE);
    }

    #[test]
    fn rz_convention() {
        let t = 0.7;
        let u = gate_matrix(&Gate::Rz(0, t)).unwrap();
        let z = ps("Z").to_matrix().unwrap();
        let expected = crate::linalg::HermitianEigen::new(&(z * Complex64::new(0.5, 0.0))).propagator(t);
        assert!(approx_eq(&u, &expected, 1e-14));
    }

    #[test]
    fn clifford_conjugation_matches_dense() {
        let gates = [
            Gate::H(1),
            Gate::S(0),
            Gate::Sdg(2),
            Gate::X(0),
            Gate::Y(1),
            Gate::Z(2),
            Gate::Cx(0, 2),
            Gate::Cx(2, 1),
            Gate::Swap(0, 1),
            Gate::Ecr(0, 1),
            Gate::Ecr(2, 0),
        ];
        for g in gates {
            let u = circuit_unitary(&Circuit::from_gates(3, [g]).unwrap()).unwrap();
            for k in 0..64u64 {
                let p = PauliString::from_masks(3, k & 7, k >> 3, crate::pauli::Phase::ONE).unwrap();
                let img = g.conjugate(&p).unwrap();
                let dense = &u * p.to_matrix().unwrap() * u.adjoint();
                assert!(approx_eq(&dense, &img.to_matrix().unwrap(), 1e-12), "{g:?} on {p}");
            }
        }
    }

    #[test]
    fn ecr_rebase_preserves_unitary() {
        for (a, b) in [(0, 1), (1, 0), (0, 2), (2, 1)] {
            let c = Circuit::from_gates(3, [Gate::Cx(a, b), Gate::Swap(a, b)]).unwrap();
            let r = crate::circuit::rebase_to_ecr(&c);
            let d = distance_up_to_phase(&circuit_unitary(&c).unwrap(), &circuit_unitary(&r).unwrap());
            assert!(d < 1e-12, "{d}");
        }
    }

    #[test]
    fn fused_program_matches_gatewise() {
        let c = Circuit::from_gates(
            3,
            [
                Gate::H(0),
                Gate::S(0),
                Gate::Rz(1, 0.3),
                Gate::Cx(0, 1),
                Gate::Sdg(1),
                Gate::Ecr(1, 2),
                Gate::H(2),
                Gate::Swap(0, 2),
                Gate::Y(0),
            ],
        )
        .unwrap();
        let zero = StateVector::zero(3).unwrap();
        let a = apply_circuit(&zero, &c).unwrap();
        let mut r = rng::stream(0, 0);
        let b = apply_noisy_circuit(&zero, &c, &NoiseModel::default(), &mut r).unwrap();
        let diff: f64 = a.amplitudes().iter().zip(b.amplitudes()).map(|(x, y)| (x - y).norm()).sum();
        assert!(diff < 1e-13);
    }

    #[test]
    fn long_circuit_preserves_norm() {
        let mut c = Circuit::new(3).unwrap();
        for k in 0..1000 {
            let g = match k % 5 {
                0 => Gate::H(k % 3),
                1 => Gate::Rz((k + 1) % 3, 0.1 * k as f64),
                2 => Gate::Cx(k % 3, (k + 1) % 3),
                3 => Gate::Ecr((k + 2) % 3, k % 3),
                _ => Gate::S(k % 3),
            };
            c.push(g).unwrap();
        }
        let s = apply_circuit(&StateVector::zero(3).unwrap(), &c).unwrap();
        assert!((s.norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn clifford_amplitudes_are_dyadic() {
        let c = Circuit::from_gates(3, [Gate::H(0), Gate::S(0), Gate::Cx(0, 1), Gate::H(2), Gate::Cx(2, 0)]).unwrap();
        let s = apply_circuit(&StateVector::basis(3, 5).unwrap(), &c).unwrap();
        for a in s.amplitudes() {
            let m = a.norm();
            if m > 1e-12 {
                let k = -2.0 * m.log2();
                assert!((k - k.round()).abs() < 1e-9);
                assert!(a.re.abs() < 1e-12 || a.im.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn full_depolarizing_cx_averages_out() {
        let c = Circuit::from_gates(2, [Gate::H(0), Gate::Cx(0, 1)]).unwrap();
        let noise = NoiseModel::depolarizing(1.0);
        let prog = Program::compile(&c, false).unwrap();
        let zero = StateVector::zero(2).unwrap();
        let m = 20_000;
        let (mut zz, mut zi) = (0.0, 0.0);
        for k in 0..m {
            let mut r = rng::stream(5, k);
            let s = prog.run(&zero, &noise, &mut r).unwrap();
            zz += s.expectation(&ps("ZZ")).unwrap();
            zi += s.expectation(&ps("ZI")).unwrap();
        }
        // p2 = 1 injects a uniform non-identity Pauli: <ZZ> → -1/15 of ideal
        let sigma = 1.0 / (m as f64).sqrt();
        assert!((zz / m as f64 + 1.0 / 15.0).abs() < 5.0 * sigma);
        assert!((zi / m as f64).abs() < 5.0 * sigma);
    }

    #[test]
    fn uniform_over_all_sixteen_fully_depolarizes() {
        let c = Circuit::from_gates(2, [Gate::H(0), Gate::Cx(0, 1)]).unwrap();
        let noise = NoiseModel::depolarizing(15.0 / 16.0);
        let prog = Program::compile(&c, false).unwrap();
        let zero = StateVector::zero(2).unwrap();
        let m = 20_000;
        let obs = ["ZZ", "XX", "ZI", "IX", "YY"];
        let mut sums = [0.0; 5];
        for k in 0..m {
            let s = prog.run(&zero, &noise, &mut rng::stream(6, k)).unwrap();
            for (o, acc) in obs.iter().zip(sums.iter_mut()) {
                *acc += s.expectation(&ps(o)).unwrap();
            }
        }
        for acc in sums {
            assert!((acc / m as f64).abs() < 5.0 / (m as f64).sqrt());
        }
    }

    #[test]
    fn trajectory_average_matches_depolarized_expectation() {
        // per two-qubit gate, a traceless two-qubit Pauli expectation on the
        // operands shrinks by 1 - 16p/15 when it anticommutes with 8 of 15
        let c = Circuit::from_gates(3, [Gate::H(0), Gate::Cx(0, 1), Gate::Cx(1, 2)]).unwrap();
        let p = 0.2;
        let noise = NoiseModel::depolarizing(p);
        let prog = Program::compile(&c, false).unwrap();
        let zero = StateVector::zero(3).unwrap();
        let m = 10_000;
        let mut acc = 0.0;
        for k in 0..m {
            let s = prog.run(&zero, &noise, &mut rng::stream(8, k)).unwrap();
            acc += s.expectation(&ps("ZIZ")).unwrap();
        }
        let mean = acc / m as f64;
        let f = 1.0 - 16.0 * p / 15.0;
        let expected = f * f;
        let sigma = (1.0 - expected * expected).sqrt() / (m as f64).sqrt();
        assert!((mean - expected).abs() < 5.0 * sigma, "{mean} vs {expected}");
    }

    #[test]
    fn sampling_examples() {
        let mut r = rng::stream(1, 1);
        let c = sample_measurements(&StateVector::zero(2).unwrap(), 100, &[], &mut r).unwrap();
        assert_eq!(c.count("00"), 100);
        let plus = apply_circuit(&StateVector::zero(1).unwrap(), &Circuit::from_gates(1, [Gate::H(0)]).unwrap()).unwrap();
        let shots = 100_000;
        let c = sample_measurements(&plus, shots, &[], &mut r).unwrap();
        let bound = 5.0 * (0.25 / shots as f64).sqrt();
        assert!((c.frequency("0") - 0.5).abs() < bound);
        let flip = [ReadoutError {
            p1_given_0: 0.1,
            p0_given_1: 0.0,
        }];
        let c = sample_measurements(&StateVector::zero(1).unwrap(), shots, &flip, &mut r).unwrap();
        assert!((c.frequency("1") - 0.1).abs() < 5.0 * (0.09 / shots as f64).sqrt());
        assert!(sample_measurements(&plus, 0, &[], &mut r).is_err());
    }

    #[test]
    fn counts_text_round_trip() {
        let mut c = ShotCounts::new(3);
        c.record(0);
        c.record(5);
        c.record(5);
        let back = ShotCounts::from_text(&c.to_text()).unwrap();
        assert_eq!(back, c);
        assert_eq!(c.to_text(), "000 1\n101 2\n");
        assert!(ShotCounts::from_text("0a1 3").is_err());
    }

    #[test]
    fn exact_evolution_properties() {
        let inst = crate::syk::sample_couplings(crate::syk::SykParams::new(8, 4)).unwrap();
        let h = crate::syk::build_hamiltonian(&inst).unwrap();
        let s0 = StateVector::zero(4).unwrap();
        let same = exact_evolve(&h, 0.0, &s0).unwrap();
        assert!((same.inner(&s0).unwrap() - ONE).norm() < 1e-12);
        let a = exact_evolve(&h, 1.3, &s0).unwrap();
        assert!((a.norm() - 1.0).abs() < 1e-10);
        let b = exact_evolve(&h, 2.1, &a).unwrap();
        let direct = exact_evolve(&h, 3.4, &s0).unwrap();
        assert!((b.inner(&direct).unwrap().norm() - 1.0).abs() < 1e-9);
        let diff: f64 = b.amplitudes().iter().zip(direct.amplitudes()).map(|(x, y)| (x - y).norm()).sum();
        assert!(diff < 1e-9);
    }
}
