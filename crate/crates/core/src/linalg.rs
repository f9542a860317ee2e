//! Dense complex linear algebra shared by the simulator and the test oracles.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Maps a qubit mask (bit `j` = qubit `j`) to a basis-index mask, where
/// qubit 0 is the most significant bit of the index.
pub fn mask_to_index(mask: u64, n: usize) -> usize {
    let mut out = 0usize;
    for j in 0..n {
        if (mask >> j) & 1 == 1 {
            out |= 1 << (n - 1 - j);
        }
    }
    out
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn dagger(a: &CMatrix) -> CMatrix {
    a.adjoint()
}

pub fn approx_eq(a: &CMatrix, b: &CMatrix, tol: f64) -> bool {
    a.shape() == b.shape() && a.iter().zip(b.iter()).all(|(x, y)| (x - y).norm() <= tol)
}

/// Largest singular value.
pub fn spectral_norm(a: &CMatrix) -> f64 {
    a.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

/// `min_φ ‖a − e^{iφ} b‖₂`, approximated by aligning the phase of the overlap.
pub fn distance_up_to_phase(a: &CMatrix, b: &CMatrix) -> f64 {
    let overlap: Complex64 = b.iter().zip(a.iter()).map(|(x, y)| x.conj() * y).sum();
    let phase = if overlap.norm() > 0.0 {
        overlap / overlap.norm()
    } else {
        ONE
    };
    spectral_norm(&(a - b * phase))
}

/// Eigendecomposition of a Hermitian matrix: real eigenvalues and the unitary
/// whose columns are the eigenvectors.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl HermitianEigen {
    pub fn new(h: &CMatrix) -> Self {
        let eig = h.clone().symmetric_eigen();
        HermitianEigen {
            values: eig.eigenvalues.iter().cloned().collect(),
            vectors: eig.eigenvectors,
        }
    }

    /// `exp(-i t H)` as a dense matrix.
    pub fn propagator(&self, t: f64) -> CMatrix {
        let v = &self.vectors;
        let mut scaled = v.clone();
        for (k, &e) in self.values.iter().enumerate() {
            let ph = Complex64::from_polar(1.0, -e * t);
            scaled.column_mut(k).iter_mut().for_each(|z| *z *= ph);
        }
        scaled * v.adjoint()
    }

    /// `exp(-i t H) ψ` without forming the propagator.
    pub fn evolve(&self, t: f64, psi: &CVector) -> CVector {
        let v = &self.vectors;
        let mut coeffs = v.adjoint() * psi;
        for (k, &e) in self.values.iter().enumerate() {
            coeffs[k] *= Complex64::from_polar(1.0, -e * t);
        }
        v * coeffs
    }
}
