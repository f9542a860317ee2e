//! Return probability, infinite-temperature OTOCs and the randomized
//! measurement protocol.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, ONE};
use crate::mitigation::{self_mitigation_with_plan, MitigationConfig, MitigationEstimate};
use crate::pauli::{Pauli, PauliString};
use crate::rng::{self, Domain};
use crate::sim::{apply_circuit, circuit_unitary, exact_evolve, NoiseModel, StateVector};
use crate::syk::Hamiltonian;
use crate::synth::TrotterPlan;

/// Smallest accepted `mean ⟨W⟩²` in the protocol estimator.
pub const NORMALIZATION_FLOOR: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub errors: Vec<f64>,
}

impl TimeSeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>, errors: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() || times.len() != errors.len() {
            return Err(Error::DimensionMismatch {
                left: times.len(),
                right: values.len().max(errors.len()),
            });
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("times must be strictly increasing".into()));
        }
        Ok(TimeSeries { times, values, errors })
    }

    pub fn exact(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let errors = vec![0.0; values.len()];
        Self::new(times, values, errors)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,value,stderr\n");
        for i in 0..self.len() {
            out.push_str(&format!(
                "{},{},{}\n",
                crate::circuit::format_angle(self.times[i]),
                crate::circuit::format_angle(self.values[i]),
                crate::circuit::format_angle(self.errors[i])
            ));
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Pointwise mean over instances with the standard error of the mean.
pub fn disorder_average(curves: &[TimeSeries]) -> Result<TimeSeries> {
    let first = curves
        .first()
        .ok_or_else(|| Error::InvalidParameter("no curves to average".into()))?;
    if curves.iter().any(|c| c.times != first.times) {
        return Err(Error::GridMismatch);
    }
    let m = curves.len() as f64;
    let mut values = Vec::with_capacity(first.len());
    let mut errors = Vec::with_capacity(first.len());
    for i in 0..first.len() {
        let mean = curves.iter().map(|c| c.values[i]).sum::<f64>() / m;
        let se = if curves.len() > 1 {
            let var = curves.iter().map(|c| (c.values[i] - mean).powi(2)).sum::<f64>() / (m - 1.0);
            (var / m).sqrt()
        } else {
            0.0
        };
        values.push(mean);
        errors.push(se);
    }
    TimeSeries::new(first.times.clone(), values, errors)
}

/// `|⟨0|e^{-iHt}|0⟩|²` by exact diagonalization.
pub fn return_probability_exact(h: &Hamiltonian, t: f64) -> Result<f64> {
    let psi = exact_evolve(h, t, &StateVector::zero(h.num_qubits())?)?;
    Ok(psi.amplitudes()[0].norm_sqr())
}

pub fn return_probability_curve(h: &Hamiltonian, times: &[f64]) -> Result<TimeSeries> {
    let values = times
        .iter()
        .map(|&t| return_probability_exact(h, t))
        .collect::<Result<Vec<_>>>()?;
    TimeSeries::exact(times.to_vec(), values)
}

/// Noiseless all-zeros probability after `r` compiled steps.
pub fn return_probability_trotter(plan: &TrotterPlan, r: usize) -> Result<f64> {
    let psi = apply_circuit(&StateVector::zero(plan.n)?, &plan.circuit(r)?)?;
    Ok(psi.amplitudes()[0].norm_sqr())
}

/// Compiles `r` steps of length `t/r`, then twirls, simulates, corrects
/// readout and self-mitigates. `label` keys the random streams.
pub fn return_probability_pipeline(
    h: &Hamiltonian,
    t: f64,
    r: usize,
    noise: &NoiseModel,
    cfg: &MitigationConfig,
    label: &[u64],
) -> Result<MitigationEstimate> {
    if r == 0 || t <= 0.0 {
        return Err(Error::InvalidParameter("need t > 0 and r ≥ 1".into()));
    }
    let plan = TrotterPlan::for_hamiltonian(h, t / r as f64)?;
    self_mitigation_with_plan(&plan, r, noise, cfg, label)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub pauli: Pauli,
    pub qubit: usize,
}

impl Placement {
    pub fn z(qubit: usize) -> Self {
        Placement { pauli: Pauli::Z, qubit }
    }

    pub fn string(&self, n: usize) -> Result<PauliString> {
        PauliString::single(n, self.qubit, self.pauli)
    }
}

/// How the protocol realizes `e^{-iHt}`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Evolution {
    /// Exact propagator.
    Exact,
    /// Compiled steps of length at most `dt`.
    #[default]
    Trotter,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OtocConfig {
    pub w: Placement,
    pub v: Placement,
    pub n_unitaries: usize,
    /// Shots per circuit; `None` uses exact expectations.
    pub shots: Option<u64>,
    pub dt: f64,
    pub evolution: Evolution,
    pub seed: u64,
}

impl Default for OtocConfig {
    fn default() -> Self {
        OtocConfig {
            w: Placement::z(1),
            v: Placement::z(0),
            n_unitaries: 600,
            shots: Some(4000),
            dt: 1.5,
            evolution: Evolution::Trotter,
            seed: 0,
        }
    }
}

impl OtocConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.n_unitaries == 0 || self.shots == Some(0) {
            return Err(Error::InvalidParameter("unitary and shot counts must be positive".into()));
        }
        if self.w.pauli == Pauli::I || self.v.pauli == Pauli::I {
            return Err(Error::InvalidParameter("W and V must be nontrivial".into()));
        }
        if self.w.qubit >= n || self.v.qubit >= n {
            return Err(Error::IndexOutOfRange {
                index: self.w.qubit.max(self.v.qubit),
                max: n,
            });
        }
        if self.dt.is_nan() || self.dt <= 0.0 {
            return Err(Error::InvalidParameter("dt must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Otoc {
    pub f: f64,
    /// `2(1 - F)`.
    pub c: f64,
}

impl Otoc {
    pub fn from_f(f: f64) -> Self {
        Otoc { f, c: 2.0 * (1.0 - f) }
    }
}

/// `Tr[W(t) V W(t) V] / 2ⁿ` for the propagator `u`, with `W(t) = u† W u`.
pub fn otoc_from_propagator(u: &CMatrix, w: &CMatrix, v: &CMatrix) -> Complex64 {
    let wt = u.adjoint() * w * u;
    let prod = &wt * v * &wt * v;
    prod.trace() / Complex64::new(u.nrows() as f64, 0.0)
}

pub fn otoc_exact(h: &Hamiltonian, cfg: &OtocConfig, t: f64) -> Result<Otoc> {
    let n = h.num_qubits();
    cfg.validate(n)?;
    let u = h.propagator(t)?;
    let f = otoc_from_propagator(&u, &cfg.w.string(n)?.to_matrix()?, &cfg.v.string(n)?.to_matrix()?);
    Ok(Otoc::from_f(f.re))
}

/// Unitary the protocol applies for time `t`.
pub fn protocol_propagator(h: &Hamiltonian, cfg: &OtocConfig, t: f64) -> Result<CMatrix> {
    let dim = 1 << h.num_qubits();
    if t == 0.0 {
        return Ok(CMatrix::identity(dim, dim));
    }
    match cfg.evolution {
        Evolution::Exact => h.propagator(t),
        Evolution::Trotter => {
            let r = (t / cfg.dt - 1e-9).ceil().max(1.0) as usize;
            let plan = TrotterPlan::for_hamiltonian(h, t / r as f64)?;
            circuit_unitary(&plan.circuit(r)?)
        }
    }
}

/// Large-`N_u` limit of the protocol ratio: for traceless `W(t)`, the Haar
/// averages of both products reduce to traces and the ratio to `F`
/// computed with the protocol propagator.
pub fn otoc_population(h: &Hamiltonian, cfg: &OtocConfig, t: f64) -> Result<f64> {
    let n = h.num_qubits();
    cfg.validate(n)?;
    let u = protocol_propagator(h, cfg, t)?;
    Ok(otoc_from_propagator(&u, &cfg.w.string(n)?.to_matrix()?, &cfg.v.string(n)?.to_matrix()?).re)
}

/// Haar-random `2ⁿ × 2ⁿ` unitary: QR of a complex Gaussian matrix with the
/// phases of `R`'s diagonal moved into `Q`.
pub fn sample_cue<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<CMatrix> {
    if n == 0 || n > 6 {
        return Err(Error::Capacity {
            what: "random unitary",
            n,
            max: 6,
        });
    }
    let d = 1 << n;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut entries = Vec::with_capacity(d * d);
    for _ in 0..d * d {
        let re = rng::standard_normal(rng) * s;
        let im = rng::standard_normal(rng) * s;
        entries.push(Complex64::new(re, im));
    }
    let z = DMatrix::from_vec(d, d, entries);
    let qr = z.qr();
    let (mut q, r) = qr.unpack();
    for k in 0..d {
        let rk = r[(k, k)];
        let ph = if rk.norm() > 0.0 { rk / rk.norm() } else { ONE };
        q.column_mut(k).iter_mut().for_each(|x| *x *= ph);
    }
    Ok(q)
}

/// Per-unitary expectations `x = ⟨W⟩` and `y = ⟨V W V⟩` after time `t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSample {
    pub x: f64,
    pub y: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolEstimate {
    pub value: f64,
    /// Delta-method standard error of the ratio.
    pub stderr: f64,
    pub numerator: f64,
    pub denominator: f64,
}

/// `mean(x·y) / mean(x²)` with its delta-method standard error.
pub fn protocol_ratio(samples: &[ProtocolSample]) -> Result<ProtocolEstimate> {
    if samples.is_empty() {
        return Err(Error::InvalidParameter("no protocol samples".into()));
    }
    let m = samples.len() as f64;
    let num = samples.iter().map(|s| s.x * s.y).sum::<f64>() / m;
    let den = samples.iter().map(|s| s.x * s.x).sum::<f64>() / m;
    if den.is_nan() || den < NORMALIZATION_FLOOR {
        return Err(Error::UnstableNormalization(den));
    }
    let value = num / den;
    let stderr = if samples.len() > 1 {
        let var = samples
            .iter()
            .map(|s| (s.x * s.y - value * s.x * s.x).powi(2))
            .sum::<f64>()
            / (m - 1.0);
        (var / m).sqrt() / den
    } else {
        0.0
    };
    Ok(ProtocolEstimate {
        value,
        stderr,
        numerator: num,
        denominator: den,
    })
}

/// Rotation that maps the single-qubit Pauli onto `Z` before a
/// computational-basis readout.
fn basis_change(state: &mut StateVector, p: Placement) -> Result<()> {
    use crate::circuit::Gate;
    match p.pauli {
        Pauli::X => state.apply_gate(&Gate::H(p.qubit)),
        Pauli::Y => {
            state.apply_gate(&Gate::Sdg(p.qubit))?;
            state.apply_gate(&Gate::H(p.qubit))
        }
        _ => Ok(()),
    }
}

fn measure<R: Rng + ?Sized>(state: &StateVector, w: Placement, shots: Option<u64>, rng: &mut R) -> Result<f64> {
    let mut s = state.clone();
    basis_change(&mut s, w)?;
    let z = s.expectation_z(w.qubit);
    Ok(match shots {
        None => z,
        Some(m) => {
            let p0 = (0.5 * (1.0 + z)).clamp(0.0, 1.0);
            let zeros = (0..m).filter(|_| rng.gen::<f64>() < p0).count() as f64;
            (2.0 * zeros - m as f64) / m as f64
        }
    })
}

/// One sample per random unitary; unitary `k` and its shots use their own
/// substreams under `label`.
pub fn protocol_samples(h: &Hamiltonian, cfg: &OtocConfig, t: f64, label: &[u64]) -> Result<Vec<ProtocolSample>> {
    let n = h.num_qubits();
    cfg.validate(n)?;
    let evo = protocol_propagator(h, cfg, t)?;
    let v = cfg.v.string(n)?;
    (0..cfg.n_unitaries)
        .into_par_iter()
        .map(|k| {
            let mut path = label.to_vec();
            path.push(k as u64);
            let mut urng = rng::substream(cfg.seed, Domain::Unitary, &path);
            let mut srng = rng::substream(cfg.seed, Domain::Shots, &path);
            let u = sample_cue(n, &mut urng)?;
            let mut a = StateVector::zero(n)?;
            a.apply_matrix(&u)?;
            let mut b = a.clone();
            b.apply_pauli(&v)?;
            a.apply_matrix(&evo)?;
            b.apply_matrix(&evo)?;
            Ok(ProtocolSample {
                x: measure(&a, cfg.w, cfg.shots, &mut srng)?,
                y: measure(&b, cfg.w, cfg.shots, &mut srng)?,
            })
        })
        .collect()
}

pub fn otoc_randomized(h: &Hamiltonian, cfg: &OtocConfig, t: f64) -> Result<ProtocolEstimate> {
    protocol_ratio(&protocol_samples(h, cfg, t, &[t.to_bits()])?)
}

/// Haar estimate of `Tr[W(t) V† W(t) V]` for traceless operators:
/// `N_H (N_H + 1) · mean(⟨W(t)⟩ ⟨V† W(t) V⟩)`, with its standard error.
pub fn haar_trace_estimate(samples: &[ProtocolSample], n: usize) -> (f64, f64) {
    let d = (1u64 << n) as f64;
    let m = samples.len() as f64;
    let prods: Vec<f64> = samples.iter().map(|s| s.x * s.y).collect();
    let mean = prods.iter().sum::<f64>() / m;
    let var = prods.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (m - 1.0).max(1.0);
    (d * (d + 1.0) * mean, d * (d + 1.0) * (var / m).sqrt())
}

pub fn otoc_curve(h: &Hamiltonian, cfg: &OtocConfig, times: &[f64]) -> Result<TimeSeries> {
    let mut values = Vec::with_capacity(times.len());
    let mut errors = Vec::with_capacity(times.len());
    for &t in times {
        let e = otoc_randomized(h, cfg, t)?;
        values.push(e.value);
        errors.push(e.stderr);
    }
    TimeSeries::new(times.to_vec(), values, errors)
}
