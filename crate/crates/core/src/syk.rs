//! SYK disorder sampling and Jordan-Wigner qubitization.
//!
//! Majorana indices are 1-based. Under the encoding used here
//! `χ_{2k-1} = Z_0 ⋯ Z_{k-2} X_{k-1}` and `χ_{2k} = Z_0 ⋯ Z_{k-2} Y_{k-1}`
//! (qubits 0-based), each scaled by `1/√2` so that `{χ_i, χ_j} = δ_ij`.
//! The quartic Hamiltonian is written as an ordered sum
//! `H = -Σ_{i<j<k<l} J_ijkl χ_i χ_j χ_k χ_l`.

use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, HermitianEigen};
use crate::pauli::{Pauli, PauliString, PauliSum, WeightedPauli, DENSE_LIMIT};
use crate::rng::{self, Domain};

pub const MIN_MAJORANAS: usize = 4;
pub const MAX_MAJORANAS: usize = 24;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SykParams {
    /// Number of Majorana fermions `N`.
    pub n_majorana: usize,
    /// Interaction order; only 4 is supported.
    pub q: usize,
    /// Coupling scale `J`.
    pub j: f64,
    pub seed: u64,
}

impl SykParams {
    pub fn new(n_majorana: usize, seed: u64) -> Self {
        SykParams {
            n_majorana,
            q: 4,
            j: 1.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_majorana;
        if !n.is_multiple_of(2) || !(MIN_MAJORANAS..=MAX_MAJORANAS).contains(&n) {
            return Err(Error::InvalidParameter(format!(
                "N must be even and in {MIN_MAJORANAS}..={MAX_MAJORANAS}, got {n}"
            )));
        }
        if self.q != 4 {
            return Err(Error::InvalidParameter(format!(
                "only q = 4 is supported, got {}",
                self.q
            )));
        }
        if !(self.j > 0.0 && self.j.is_finite()) {
            return Err(Error::InvalidParameter(format!("J must be positive, got {}", self.j)));
        }
        Ok(())
    }

    pub fn num_qubits(&self) -> usize {
        self.n_majorana / 2
    }

    /// `3! J² / N³`.
    pub fn coupling_variance(&self) -> f64 {
        6.0 * self.j * self.j / (self.n_majorana as f64).powi(3)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    pub indices: [usize; 4],
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SykInstance {
    pub params: SykParams,
    /// Lexicographically ordered by index tuple.
    pub couplings: Vec<Coupling>,
}

/// All `i<j<k<l` tuples over `1..=n`, in lexicographic order.
pub fn quartic_tuples(n: usize) -> Vec<[usize; 4]> {
    let mut out = Vec::new();
    for i in 1..=n {
        for j in i + 1..=n {
            for k in j + 1..=n {
                for l in k + 1..=n {
                    out.push([i, j, k, l]);
                }
            }
        }
    }
    out
}

pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

/// Draws `J_ijkl ~ N(0, 3!J²/N³)` for every ordered tuple.
pub fn sample_couplings(params: SykParams) -> Result<SykInstance> {
    params.validate()?;
    let sigma = params.coupling_variance().sqrt();
    let mut rng = rng::domain_stream(params.seed, Domain::Couplings, 0);
    let couplings = quartic_tuples(params.n_majorana)
        .into_iter()
        .map(|indices| Coupling {
            indices,
            value: sigma * rng::standard_normal(&mut rng),
        })
        .collect();
    Ok(SykInstance { params, couplings })
}

impl SykInstance {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        let expected = quartic_tuples(self.params.n_majorana);
        if self.couplings.len() != expected.len()
            || self
                .couplings
                .iter()
                .zip(&expected)
                .any(|(c, t)| c.indices != *t || !c.value.is_finite())
        {
            return Err(Error::InvalidParameter(
                "couplings must list every ordered quartic tuple with a finite value".into(),
            ));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let inst: SykInstance = serde_json::from_str(text)?;
        inst.validate()?;
        Ok(inst)
    }
}

/// Jordan-Wigner image of `χ_i` as an unscaled string plus the `1/√2` factor.
pub fn majorana_operator(i: usize, n_majorana: usize) -> Result<(PauliString, f64)> {
    if i == 0 || i > n_majorana {
        return Err(Error::IndexOutOfRange {
            index: i,
            max: n_majorana,
        });
    }
    let n = n_majorana.div_ceil(2);
    let k = i.div_ceil(2);
    let mut letters = vec![Pauli::I; n];
    for l in letters.iter_mut().take(k - 1) {
        *l = Pauli::Z;
    }
    letters[k - 1] = if i % 2 == 1 { Pauli::X } else { Pauli::Y };
    Ok((PauliString::from_letters(&letters)?, std::f64::consts::FRAC_1_SQRT_2))
}

/// Majorana normalization convention.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `χ² = 1/2`; each Pauli coefficient is `±J_ijkl / 4`.
    #[default]
    Half,
    /// `χ² = 1`; each Pauli coefficient is `±J_ijkl`.
    Unit,
}

#[derive(Debug, Clone)]
pub struct Hamiltonian {
    sum: PauliSum,
    matrix: OnceLock<CMatrix>,
    eigen: OnceLock<HermitianEigen>,
}

impl Hamiltonian {
    pub fn from_sum(sum: PauliSum) -> Self {
        Hamiltonian {
            sum,
            matrix: OnceLock::new(),
            eigen: OnceLock::new(),
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.sum.num_qubits()
    }

    pub fn sum(&self) -> &PauliSum {
        &self.sum
    }

    pub fn terms(&self) -> &[WeightedPauli] {
        self.sum.terms()
    }

    fn check_dense(&self) -> Result<()> {
        if self.num_qubits() > DENSE_LIMIT {
            return Err(Error::Capacity {
                what: "exact hamiltonian",
                n: self.num_qubits(),
                max: DENSE_LIMIT,
            });
        }
        Ok(())
    }

    /// Dense matrix, built once and cached.
    pub fn exact_matrix(&self) -> Result<&CMatrix> {
        self.check_dense()?;
        if let Some(m) = self.matrix.get() {
            return Ok(m);
        }
        let m = self.sum.to_matrix()?;
        Ok(self.matrix.get_or_init(|| m))
    }

    pub fn eigen(&self) -> Result<&HermitianEigen> {
        if let Some(e) = self.eigen.get() {
            return Ok(e);
        }
        let e = HermitianEigen::new(self.exact_matrix()?);
        Ok(self.eigen.get_or_init(|| e))
    }

    pub fn propagator(&self, t: f64) -> Result<CMatrix> {
        Ok(self.eigen()?.propagator(t))
    }
}

pub fn build_hamiltonian(inst: &SykInstance) -> Result<Hamiltonian> {
    build_hamiltonian_with(inst, Normalization::Half)
}

pub fn build_hamiltonian_with(inst: &SykInstance, norm: Normalization) -> Result<Hamiltonian> {
    inst.params.validate()?;
    let n_maj = inst.params.n_majorana;
    let majoranas = (1..=n_maj)
        .map(|i| majorana_operator(i, n_maj).map(|(p, _)| p))
        .collect::<Result<Vec<_>>>()?;
    let scale = match norm {
        Normalization::Half => 0.25,
        Normalization::Unit => 1.0,
    };
    let mut sum = PauliSum::new(inst.params.num_qubits());
    for c in &inst.couplings {
        let [i, j, k, l] = c.indices;
        let prod = majoranas[i - 1]
            .multiply(&majoranas[j - 1])?
            .multiply(&majoranas[k - 1])?
            .multiply(&majoranas[l - 1])?;
        sum.push(WeightedPauli::new(prod, -c.value * scale)?)?;
    }
    Ok(Hamiltonian::from_sum(sum))
}

/// Dense `χ_i` including the `1/√2`.
pub fn majorana_matrix(i: usize, n_majorana: usize) -> Result<CMatrix> {
    let (p, s) = majorana_operator(i, n_majorana)?;
    Ok(p.to_matrix()? * Complex64::new(s, 0.0))
}
