//! Symplectic Pauli algebra.
//!
//! A [`PauliString`] on `n` qubits is stored as two bit masks plus a power of
//! `i`. Bit `j` of each mask refers to qubit `j`, and qubit 0 is the leftmost
//! factor of the printed form, so `"ZXY"` is `Z` on qubit 0, `X` on qubit 1 and
//! `Y` on qubit 2. The phase multiplies the tensor product of *letters*: the
//! pair `(x, z) = (1, 1)` is the letter `Y`, not the product `XZ`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMatrix;

/// Widest string the bit-mask representation holds.
pub const MAX_QUBITS: usize = 64;

/// Largest width for which dense matrices are built.
pub const DENSE_LIMIT: usize = 12;

/// Element of `{+1, +i, -1, -i}`, stored as the exponent of `i`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Phase(u8);

impl Phase {
    pub const ONE: Phase = Phase(0);
    pub const I: Phase = Phase(1);
    pub const MINUS_ONE: Phase = Phase(2);
    pub const MINUS_I: Phase = Phase(3);

    pub fn from_exponent(k: i64) -> Self {
        Phase(k.rem_euclid(4) as u8)
    }

    pub fn exponent(self) -> u8 {
        self.0
    }

    pub fn is_real(self) -> bool {
        self.0.is_multiple_of(2)
    }

    /// `+1.0` or `-1.0` for real phases.
    pub fn sign(self) -> Option<f64> {
        match self.0 {
            0 => Some(1.0),
            2 => Some(-1.0),
            _ => None,
        }
    }

    pub fn to_complex(self) -> Complex64 {
        match self.0 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        }
    }
}

impl std::ops::Mul for Phase {
    type Output = Phase;

    fn mul(self, rhs: Phase) -> Phase {
        Phase((self.0 + rhs.0) % 4)
    }
}

/// Single-qubit Pauli letter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    pub fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    fn from_symbol(c: char) -> Option<Self> {
        match c {
            'I' | '𝟙' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }
}

impl fmt::Display for Pauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PauliString {
    n: usize,
    x: u64,
    z: u64,
    phase: Phase,
}

fn width_mask(n: usize) -> u64 {
    if n == 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

impl PauliString {
    pub fn identity(n: usize) -> Result<Self> {
        Self::from_masks(n, 0, 0, Phase::ONE)
    }

    pub fn from_masks(n: usize, x: u64, z: u64, phase: Phase) -> Result<Self> {
        if n > MAX_QUBITS {
            return Err(Error::Capacity {
                what: "pauli string",
                n,
                max: MAX_QUBITS,
            });
        }
        let m = width_mask(n);
        if x & !m != 0 || z & !m != 0 {
            return Err(Error::InvalidParameter(format!(
                "mask has bits beyond width {n}"
            )));
        }
        Ok(PauliString { n, x, z, phase })
    }

    /// A single letter on `qubit`, identity elsewhere.
    pub fn single(n: usize, qubit: usize, p: Pauli) -> Result<Self> {
        if qubit >= n {
            return Err(Error::IndexOutOfRange {
                index: qubit,
                max: n.saturating_sub(1),
            });
        }
        let (x, z) = p.bits();
        Self::from_masks(n, (x as u64) << qubit, (z as u64) << qubit, Phase::ONE)
    }

    pub fn from_letters(letters: &[Pauli]) -> Result<Self> {
        let mut x = 0u64;
        let mut z = 0u64;
        for (j, p) in letters.iter().enumerate() {
            let (xb, zb) = p.bits();
            x |= (xb as u64) << j;
            z |= (zb as u64) << j;
        }
        Self::from_masks(letters.len(), x, z, Phase::ONE)
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn x_bits(&self) -> u64 {
        self.x
    }

    pub fn z_bits(&self) -> u64 {
        self.z
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn with_phase(mut self, phase: Phase) -> Self {
        self.phase = phase;
        self
    }

    pub fn letter(&self, qubit: usize) -> Pauli {
        Pauli::from_bits((self.x >> qubit) & 1 == 1, (self.z >> qubit) & 1 == 1)
    }

    pub fn letters(&self) -> impl Iterator<Item = Pauli> + '_ {
        (0..self.n).map(move |j| self.letter(j))
    }

    /// Number of non-identity sites.
    pub fn weight(&self) -> usize {
        (self.x | self.z).count_ones() as usize
    }

    pub fn support(&self) -> u64 {
        self.x | self.z
    }

    pub fn is_diagonal(&self) -> bool {
        self.x == 0
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    /// Same letters, phase reset to `+1`.
    pub fn unsigned(&self) -> Self {
        self.with_phase(Phase::ONE)
    }

    fn check_width(&self, other: &Self) -> Result<()> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                left: self.n,
                right: other.n,
            });
        }
        Ok(())
    }

    /// Exact product `self · other`, phase included.
    pub fn multiply(&self, other: &Self) -> Result<Self> {
        self.check_width(other)?;
        Ok(self.mul_unchecked(other))
    }

    pub(crate) fn mul_unchecked(&self, other: &Self) -> Self {
        let (ax, ay, az) = letter_masks(self.x, self.z);
        let (bx, by, bz) = letter_masks(other.x, other.z);
        // XY = iZ, YZ = iX, ZX = iY and the reversed orders carry -i.
        let plus = (ax & by).count_ones() + (ay & bz).count_ones() + (az & bx).count_ones();
        let minus = (ay & bx).count_ones() + (az & by).count_ones() + (ax & bz).count_ones();
        let k = self.phase.0 as i64 + other.phase.0 as i64 + plus as i64 - minus as i64;
        PauliString {
            n: self.n,
            x: self.x ^ other.x,
            z: self.z ^ other.z,
            phase: Phase::from_exponent(k),
        }
    }

    /// Parity of the symplectic inner product.
    pub fn symplectic_product(&self, other: &Self) -> Result<bool> {
        self.check_width(other)?;
        Ok(self.anticommutes_unchecked(other))
    }

    pub(crate) fn anticommutes_unchecked(&self, other: &Self) -> bool {
        ((self.x & other.z).count_ones() + (self.z & other.x).count_ones()) % 2 == 1
    }

    pub fn commutes(&self, other: &Self) -> Result<bool> {
        Ok(!self.symplectic_product(other)?)
    }

    /// Inverse element; the letters are self-inverse so only the phase changes.
    pub fn inverse(&self) -> Self {
        self.with_phase(Phase::from_exponent(-(self.phase.0 as i64)))
    }

    pub fn to_matrix(&self) -> Result<CMatrix> {
        if self.n > DENSE_LIMIT {
            return Err(Error::Capacity {
                what: "dense pauli matrix",
                n: self.n,
                max: DENSE_LIMIT,
            });
        }
        let dim = 1usize << self.n;
        let xi = crate::linalg::mask_to_index(self.x, self.n);
        let zi = crate::linalg::mask_to_index(self.z, self.n);
        let ys = (self.x & self.z).count_ones() as i64;
        let base = Phase::from_exponent(self.phase.0 as i64 + ys).to_complex();
        let mut m = CMatrix::zeros(dim, dim);
        for col in 0..dim {
            let row = col ^ xi;
            let sign = if (zi & col).count_ones() % 2 == 1 {
                -1.0
            } else {
                1.0
            };
            m[(row, col)] = base * sign;
        }
        Ok(m)
    }
}

fn letter_masks(x: u64, z: u64) -> (u64, u64, u64) {
    (x & !z, x & z, !x & z)
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = match self.phase.0 {
            0 => "",
            1 => "i",
            2 => "-",
            _ => "-i",
        };
        f.write_str(prefix)?;
        for p in self.letters() {
            write!(f, "{p}")?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (phase, body) = if let Some(rest) = s.strip_prefix("-i") {
            (Phase::MINUS_I, rest)
        } else if let Some(rest) = s.strip_prefix("+i") {
            (Phase::I, rest)
        } else if let Some(rest) = s.strip_prefix('i') {
            (Phase::I, rest)
        } else if let Some(rest) = s.strip_prefix('-') {
            (Phase::MINUS_ONE, rest)
        } else if let Some(rest) = s.strip_prefix('+') {
            (Phase::ONE, rest)
        } else {
            (Phase::ONE, s)
        };
        let letters = body
            .chars()
            .map(|c| {
                Pauli::from_symbol(c)
                    .ok_or_else(|| Error::Parse(format!("bad pauli symbol {c:?} in {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if letters.is_empty() {
            return Err(Error::Parse("empty pauli string".into()));
        }
        Ok(PauliString::from_letters(&letters)?.with_phase(phase))
    }
}

impl Serialize for PauliString {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PauliString {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A Hermitian Pauli term: unsigned string with a real coefficient.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedPauli {
    pub string: PauliString,
    pub coeff: f64,
}

impl WeightedPauli {
    /// Folds a `±1` phase of `string` into the coefficient.
    pub fn new(string: PauliString, coeff: f64) -> Result<Self> {
        let sign = string.phase().sign().ok_or_else(|| {
            Error::ContractViolation(format!("term {string} is not Hermitian"))
        })?;
        if !coeff.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "non-finite coefficient for {string}"
            )));
        }
        Ok(WeightedPauli {
            string: string.unsigned(),
            coeff: coeff * sign,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PauliSum {
    n: usize,
    terms: Vec<WeightedPauli>,
}

impl PauliSum {
    pub fn new(n: usize) -> Self {
        PauliSum {
            n,
            terms: Vec::new(),
        }
    }

    /// Adds a term; a string already present has its coefficient accumulated.
    pub fn push(&mut self, term: WeightedPauli) -> Result<()> {
        if term.string.num_qubits() != self.n {
            return Err(Error::DimensionMismatch {
                left: self.n,
                right: term.string.num_qubits(),
            });
        }
        match self.terms.iter_mut().find(|t| t.string == term.string) {
            Some(existing) => existing.coeff += term.coeff,
            None => self.terms.push(term),
        }
        Ok(())
    }

    pub fn from_terms(n: usize, terms: impl IntoIterator<Item = WeightedPauli>) -> Result<Self> {
        let mut sum = PauliSum::new(n);
        for t in terms {
            sum.push(t)?;
        }
        Ok(sum)
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &[WeightedPauli] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn to_matrix(&self) -> Result<CMatrix> {
        if self.n > DENSE_LIMIT {
            return Err(Error::Capacity {
                what: "dense pauli sum",
                n: self.n,
                max: DENSE_LIMIT,
            });
        }
        let dim = 1usize << self.n;
        let mut m = CMatrix::zeros(dim, dim);
        for t in &self.terms {
            m += t.string.to_matrix()? * Complex64::new(t.coeff, 0.0);
        }
        Ok(m)
    }
}
