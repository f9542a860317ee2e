//! Pauli twirling, self-mitigation against depolarizing noise and readout
//! correction.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{rebase_to_ecr, route_with_layout_search, Circuit, CouplingMap, Gate};
use crate::error::{Error, Result};
use crate::linalg::{approx_eq, CMatrix};
use crate::pauli::{Pauli, PauliString};
use crate::rng::{self, Domain};
use crate::sim::{gate_matrix, sample_index, NoiseModel, Program, ReadoutError, StateVector};
use crate::synth::TrotterPlan;

pub const TWIRL_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TwirlGate {
    Cx,
    Ecr,
}

impl TwirlGate {
    fn gate(self) -> Gate {
        match self {
            TwirlGate::Cx => Gate::Cx(0, 1),
            TwirlGate::Ecr => Gate::Ecr(0, 1),
        }
    }

    fn matches(self, g: &Gate) -> bool {
        matches!(
            (self, g),
            (TwirlGate::Cx, Gate::Cx(..)) | (TwirlGate::Ecr, Gate::Ecr(..))
        )
    }
}

/// `(P1⊗P2)·G·(P3⊗P4) = ±G`; `P1`, `P3` act on the first operand. In time
/// order `P3⊗P4` comes before the gate and `P1⊗P2` after it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TwirlEntry {
    pub paulis: [Pauli; 4],
    /// The product equals `-G`.
    pub phase_flip: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TwirlTable {
    pub gate: TwirlGate,
    pub entries: Vec<TwirlEntry>,
}

const PAULIS: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

fn pair_matrix(a: Pauli, b: Pauli) -> CMatrix {
    let s = PauliString::from_letters(&[a, b]).expect("two letters");
    s.to_matrix().expect("dense pair")
}

/// Relation of `(P1⊗P2)·G·(P3⊗P4)` to `G`: `Some(false)` for `+G`,
/// `Some(true)` for `-G`, `None` otherwise.
fn conjugation_sign(gate: TwirlGate, p: [Pauli; 4]) -> Option<bool> {
    let g = gate_matrix(&gate.gate()).expect("two-qubit gate");
    let m = pair_matrix(p[0], p[1]) * &g * pair_matrix(p[2], p[3]);
    if approx_eq(&m, &g, TWIRL_TOLERANCE) {
        Some(false)
    } else if approx_eq(&m, &(-g), TWIRL_TOLERANCE) {
        Some(true)
    } else {
        None
    }
}

impl TwirlTable {
    /// Every quadruple out of the 256 that leaves the gate invariant up to sign.
    pub fn generate(gate: TwirlGate) -> Self {
        let mut entries = Vec::new();
        for a in PAULIS {
            for b in PAULIS {
                for c in PAULIS {
                    for d in PAULIS {
                        let paulis = [a, b, c, d];
                        if let Some(phase_flip) = conjugation_sign(gate, paulis) {
                            entries.push(TwirlEntry { paulis, phase_flip });
                        }
                    }
                }
            }
        }
        TwirlTable { gate, entries }
    }

    /// The published ECR table, column by column.
    pub fn ecr_reference() -> Self {
        use Pauli::*;
        let cols: [([Pauli; 4], bool); 16] = [
            ([I, I, I, I], false),
            ([X, I, X, I], false),
            ([X, Z, X, Z], true),
            ([I, Z, I, Z], true),
            ([Y, X, Y, X], false),
            ([Z, X, Z, X], false),
            ([Z, Y, Z, Y], true),
            ([Y, Y, Y, Y], true),
            ([Z, I, Y, Z], false),
            ([Y, I, Z, Z], true),
            ([I, X, X, Y], true),
            ([I, Y, X, X], true),
            ([Y, Z, Z, I], false),
            ([Z, Z, Y, I], true),
            ([X, Y, I, X], true),
            ([X, X, I, Y], true),
        ];
        TwirlTable {
            gate: TwirlGate::Ecr,
            entries: cols
                .iter()
                .map(|&(paulis, phase_flip)| TwirlEntry { paulis, phase_flip })
                .collect(),
        }
    }

    pub fn for_gate(gate: TwirlGate) -> Self {
        match gate {
            TwirlGate::Ecr => TwirlTable::ecr_reference(),
            TwirlGate::Cx => TwirlTable::generate(TwirlGate::Cx),
        }
    }
}

/// True iff every entry satisfies its matrix identity, sign included.
pub fn verify_twirl_table(t: &TwirlTable) -> bool {
    !t.entries.is_empty()
        && t
            .entries
            .iter()
            .all(|e| conjugation_sign(t.gate, e.paulis) == Some(e.phase_flip))
}

fn pauli_gate(p: Pauli, q: usize) -> Option<Gate> {
    match p {
        Pauli::I => None,
        Pauli::X => Some(Gate::X(q)),
        Pauli::Y => Some(Gate::Y(q)),
        Pauli::Z => Some(Gate::Z(q)),
    }
}

/// Dresses every two-qubit gate with an independent uniform table entry.
pub fn pauli_twirl<R: Rng + ?Sized>(c: &Circuit, table: &TwirlTable, rng: &mut R) -> Result<Circuit> {
    if table.entries.is_empty() {
        return Err(Error::InvalidParameter("empty twirl table".into()));
    }
    let mut out = Circuit::new(c.width())?;
    out.metadata = c.metadata.clone();
    for g in c.gates() {
        match g.pair() {
            Some((a, b)) if table.gate.matches(g) => {
                let e = table.entries[rng.gen_range(0..table.entries.len())];
                let [p1, p2, p3, p4] = e.paulis;
                for pg in [pauli_gate(p3, a), pauli_gate(p4, b)].into_iter().flatten() {
                    out.push(pg)?;
                }
                out.push(*g)?;
                for pg in [pauli_gate(p1, a), pauli_gate(p2, b)].into_iter().flatten() {
                    out.push(pg)?;
                }
            }
            Some(_) => {
                return Err(Error::UnsupportedGate(format!(
                    "{} is not covered by the {:?} twirl table",
                    g.name(),
                    table.gate
                )))
            }
            None => out.push(*g)?,
        }
    }
    Ok(out)
}

/// Undoes `raw = (1 - p)·ideal + p/2ⁿ`.
pub fn invert_depolarizing(raw: f64, p_hat: f64, n: usize) -> Result<f64> {
    if p_hat >= 1.0 || p_hat.is_nan() {
        return Err(Error::SingularChannel(p_hat));
    }
    if p_hat < 0.0 {
        return Err(Error::InvalidParameter(format!("negative depolarizing strength {p_hat}")));
    }
    let floor = 0.5f64.powi(n as i32);
    Ok((raw - floor * p_hat) / (1.0 - p_hat))
}

/// Depolarizing strength implied by a mitigation circuit whose ideal
/// return probability is 1; clamped below at zero.
pub fn estimate_depolarizing(p0_mitigation: f64, n: usize) -> f64 {
    let floor = 0.5f64.powi(n as i32);
    ((1.0 - p0_mitigation) / (1.0 - floor)).max(0.0)
}

/// Inverts independent per-qubit confusion matrices on an empirical
/// distribution, then clips negatives and renormalizes.
pub fn readout_correct_distribution(dist: &[f64], cal: &[ReadoutError]) -> Result<Vec<f64>> {
    let n = dist.len().trailing_zeros() as usize;
    if !dist.len().is_power_of_two() {
        return Err(Error::InvalidParameter("distribution length must be 2^n".into()));
    }
    let mut p = dist.to_vec();
    for (q, r) in cal.iter().enumerate().take(n) {
        let (a, b) = (r.p1_given_0, r.p0_given_1);
        let det = 1.0 - a - b;
        if det.abs() < 1e-12 {
            return Err(Error::SingularConfusion(q));
        }
        // inverse of [[1-a, b], [a, 1-b]]
        let inv = [[(1.0 - b) / det, -b / det], [-a / det, (1.0 - a) / det]];
        let bitq = 1 << (n - 1 - q);
        for i in 0..p.len() {
            if i & bitq == 0 {
                let (m0, m1) = (p[i], p[i | bitq]);
                p[i] = inv[0][0] * m0 + inv[0][1] * m1;
                p[i | bitq] = inv[1][0] * m0 + inv[1][1] * m1;
            }
        }
    }
    p.iter_mut().for_each(|v| *v = v.max(0.0));
    let total: f64 = p.iter().sum();
    if total > 0.0 {
        p.iter_mut().for_each(|v| *v /= total);
    }
    Ok(p)
}

pub fn readout_correct(counts: &crate::sim::ShotCounts, cal: &[ReadoutError]) -> Result<Vec<f64>> {
    readout_correct_distribution(&counts.distribution(), cal)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    Cx,
    #[default]
    Ecr,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MitigationConfig {
    pub shots: u64,
    pub n_twirls: usize,
    pub basis: Basis,
    pub self_mitigation: bool,
    pub readout_correction: bool,
    pub bootstrap: usize,
    pub seed: u64,
    /// Route onto this map before twirling.
    #[serde(default)]
    pub coupling: Option<CouplingMap>,
}

impl Default for MitigationConfig {
    fn default() -> Self {
        MitigationConfig {
            shots: 2048,
            n_twirls: 75,
            basis: Basis::Ecr,
            self_mitigation: true,
            readout_correction: true,
            bootstrap: 500,
            seed: 0,
            coupling: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MitigationEstimate {
    /// Twirl-averaged noisy return probability.
    pub raw: f64,
    pub raw_stderr: f64,
    /// Twirl-averaged return probability of the forward-backward circuit.
    pub mitigation_raw: f64,
    pub p_hat: f64,
    pub mitigated: f64,
    /// Bootstrap error of `mitigated`.
    pub stderr: f64,
}

/// Lowers to the hardware basis and optionally routes.
pub fn prepare(c: &Circuit, cfg: &MitigationConfig) -> Result<Circuit> {
    let routed = match &cfg.coupling {
        Some(map) => route_with_layout_search(c, map)?,
        None => c.clone(),
    };
    Ok(match cfg.basis {
        Basis::Ecr => rebase_to_ecr(&routed),
        Basis::Cx => routed,
    })
}

fn twirl_gate(basis: Basis) -> TwirlGate {
    match basis {
        Basis::Cx => TwirlGate::Cx,
        Basis::Ecr => TwirlGate::Ecr,
    }
}

/// All-zeros probability per twirl variant. Each variant draws its twirl
/// and its trajectories from substreams keyed by `label` and the variant
/// index.
pub fn zero_probability_per_variant(
    c: &Circuit,
    noise: &NoiseModel,
    cfg: &MitigationConfig,
    label: &[u64],
) -> Result<Vec<f64>> {
    noise.validate()?;
    if cfg.shots == 0 || cfg.n_twirls == 0 {
        return Err(Error::InvalidParameter("shots and twirls must be positive".into()));
    }
    let table = TwirlTable::for_gate(twirl_gate(cfg.basis));
    let n = c.width();
    let zero = StateVector::zero(n)?;
    (0..cfg.n_twirls)
        .into_par_iter()
        .map(|v| {
            let mut path = label.to_vec();
            path.push(v as u64);
            let mut trng = rng::substream(cfg.seed, Domain::Twirl, &path);
            let twirled = pauli_twirl(c, &table, &mut trng)?;
            let prog = Program::compile(&twirled, noise.p1 > 0.0)?;
            let mut srng = rng::substream(cfg.seed, Domain::Trajectory, &path);
            let mut hist = vec![0u64; 1 << n];
            let noiseless = noise.is_noiseless();
            let fixed = if noiseless {
                Some(prog.run(&zero, noise, &mut srng)?.probabilities())
            } else {
                None
            };
            for _ in 0..cfg.shots {
                let probs = match &fixed {
                    Some(p) => std::borrow::Cow::Borrowed(p),
                    None => std::borrow::Cow::Owned(prog.run(&zero, noise, &mut srng)?.probabilities()),
                };
                let idx = sample_index(&probs, &mut srng);
                hist[crate::sim::apply_readout(idx, n, &noise.readout, &mut srng)] += 1;
            }
            let dist: Vec<f64> = hist.iter().map(|&k| k as f64 / cfg.shots as f64).collect();
            Ok(if cfg.readout_correction && !noise.readout.is_empty() {
                readout_correct_distribution(&dist, &noise.readout)?[0]
            } else {
                dist[0]
            })
        })
        .collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn std_dev(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// Combines per-variant estimates, with a bootstrap over variants.
pub fn combine(
    physics: &[f64],
    mitigation: Option<&[f64]>,
    n: usize,
    bootstrap: usize,
    seed: u64,
    label: &[u64],
) -> Result<MitigationEstimate> {
    let raw = mean(physics);
    let raw_stderr = std_dev(physics) / (physics.len() as f64).sqrt();
    let Some(mit) = mitigation else {
        return Ok(MitigationEstimate {
            raw,
            raw_stderr,
            mitigation_raw: 1.0,
            p_hat: 0.0,
            mitigated: raw,
            stderr: raw_stderr,
        });
    };
    let mitigation_raw = mean(mit);
    let p_hat = estimate_depolarizing(mitigation_raw, n);
    let mitigated = invert_depolarizing(raw, p_hat, n)?;
    let mut brng = rng::substream(seed, Domain::Bootstrap, label);
    let mut samples = Vec::with_capacity(bootstrap);
    for _ in 0..bootstrap {
        let rp = mean(&(0..physics.len()).map(|_| physics[brng.gen_range(0..physics.len())]).collect::<Vec<_>>());
        let rm = mean(&(0..mit.len()).map(|_| mit[brng.gen_range(0..mit.len())]).collect::<Vec<_>>());
        if let Ok(v) = invert_depolarizing(rp, estimate_depolarizing(rm, n), n) {
            samples.push(v);
        }
    }
    Ok(MitigationEstimate {
        raw,
        raw_stderr,
        mitigation_raw,
        p_hat,
        mitigated,
        stderr: std_dev(&samples),
    })
}

/// Physics circuit of `r` steps against a forward-backward circuit of `r/2`
/// steps each way. `label` keys the random streams.
pub fn self_mitigation_with_plan(
    plan: &TrotterPlan,
    r: usize,
    noise: &NoiseModel,
    cfg: &MitigationConfig,
    label: &[u64],
) -> Result<MitigationEstimate> {
    if cfg.self_mitigation && !r.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "self-mitigation needs an even step count, got {r}"
        )));
    }
    let step = plan.step()?;
    let physics = prepare(&step.repeat(r), cfg)?;
    let n = physics.width();
    let mut lp = label.to_vec();
    lp.push(0);
    let phys = zero_probability_per_variant(&physics, noise, cfg, &lp)?;
    let mit = if cfg.self_mitigation {
        let mut fb = step.repeat(r / 2);
        fb.append(&step.inverse()?.repeat(r / 2))?;
        let fb = prepare(&fb, cfg)?;
        let mut lm = label.to_vec();
        lm.push(1);
        Some(zero_probability_per_variant(&fb, noise, cfg, &lm)?)
    } else {
        None
    };
    combine(&phys, mit.as_deref(), n, cfg.bootstrap, cfg.seed, label)
}

pub fn self_mitigation(
    h: &crate::syk::Hamiltonian,
    t: f64,
    r: usize,
    noise: &NoiseModel,
    cfg: &MitigationConfig,
) -> Result<MitigationEstimate> {
    if r == 0 || t <= 0.0 {
        return Err(Error::InvalidParameter("need t > 0 and r ≥ 1".into()));
    }
    let plan = TrotterPlan::for_hamiltonian(h, t / r as f64)?;
    self_mitigation_with_plan(&plan, r, noise, cfg, &[])
}
