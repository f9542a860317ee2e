//! Cluster diagonalization and Trotter circuit synthesis.
//!
//! Each commuting cluster is mapped to Z-strings by a Clifford `D`
//! (`D P D† = ±Z…`), the diagonal part is exponentiated with CX ladders
//! that share a single parity target between consecutive terms, and `D` is
//! undone afterwards.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Gate};
use crate::clustering::{self, ClusterPartition};
use crate::error::{Error, Result};
use crate::pauli::WeightedPauli;
use crate::syk::{self, Coupling, Hamiltonian, SykInstance, SykParams};

/// Mask-level Clifford used during the cost search. `Cz` is realized as
/// `H·CX·H` on the second operand and costs one CX.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Op {
    H(usize),
    /// `H S H`: `(x, z) ↦ (x ⊕ z, z)`.
    Hsh(usize),
    S(usize),
    Cx(usize, usize),
    Cz(usize, usize),
}

type Sym = (u64, u64);

fn bit(v: u64, q: usize) -> u64 {
    v >> q & 1
}

fn apply_op((mut x, mut z): Sym, op: Op) -> Sym {
    match op {
        Op::H(q) => {
            let (xb, zb) = (bit(x, q), bit(z, q));
            x = (x & !(1 << q)) | zb << q;
            z = (z & !(1 << q)) | xb << q;
        }
        Op::Hsh(q) => x ^= bit(z, q) << q,
        Op::S(q) => z ^= bit(x, q) << q,
        Op::Cx(c, t) => {
            x ^= bit(x, c) << t;
            z ^= bit(z, t) << c;
        }
        Op::Cz(a, b) => {
            z ^= bit(x, a) << b;
            z ^= bit(x, b) << a;
        }
    }
    (x, z)
}

fn cx_cost(ops: &[Op]) -> usize {
    ops.iter()
        .filter(|o| matches!(o, Op::Cx(..) | Op::Cz(..)))
        .count()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum PivotOrder {
    High,
    Low,
}

/// Symplectic elimination on masks already rotated by the local basis
/// choice. Returns the elimination ops and the Z images.
fn eliminate(rows: &[Sym], n: usize, order: PivotOrder) -> (Vec<Op>, Vec<u64>) {
    // independent generators by full symplectic rank, in input order
    let mut basis: Vec<Option<u128>> = vec![None; 2 * n];
    let mut gens: Vec<Sym> = Vec::new();
    for &(x, z) in rows {
        let mut v = x as u128 | (z as u128) << n;
        for piv in (0..2 * n).rev() {
            if let Some(b) = basis[piv] {
                if v >> piv & 1 == 1 {
                    v ^= b;
                }
            }
        }
        if v != 0 {
            basis[127 - v.leading_zeros() as usize] = Some(v);
            gens.push((x, z));
        }
    }
    // row reduction of the X block
    let cols: Vec<usize> = match order {
        PivotOrder::High => (0..n).rev().collect(),
        PivotOrder::Low => (0..n).collect(),
    };
    let mut g = gens;
    let mut pivots = Vec::new();
    let mut row = 0;
    for c in cols {
        let Some(pr) = (row..g.len()).find(|&i| bit(g[i].0, c) == 1) else {
            continue;
        };
        g.swap(row, pr);
        let (px, pz) = g[row];
        for (i, r) in g.iter_mut().enumerate() {
            if i != row && bit(r.0, c) == 1 {
                r.0 ^= px;
                r.1 ^= pz;
            }
        }
        pivots.push(c);
        row += 1;
    }
    let mut ops = Vec::new();
    for (i, &p) in pivots.iter().enumerate() {
        for t in 0..n {
            if t != p && !pivots.contains(&t) && bit(g[i].0, t) == 1 {
                ops.push(Op::Cx(p, t));
            }
        }
    }
    let mut gm: Vec<Sym> = g
        .iter()
        .map(|&r| ops.iter().fold(r, |acc, &o| apply_op(acc, o)))
        .collect();
    let push = |ops: &mut Vec<Op>, gm: &mut Vec<Sym>, o: Op| {
        ops.push(o);
        for r in gm.iter_mut() {
            *r = apply_op(*r, o);
        }
    };
    for i in 0..pivots.len() {
        let p = pivots[i];
        for &pj in &pivots[i + 1..] {
            if bit(gm[i].1, pj) == 1 {
                push(&mut ops, &mut gm, Op::Cz(p, pj));
            }
        }
        if bit(gm[i].1, p) == 1 {
            push(&mut ops, &mut gm, Op::S(p));
        }
    }
    for &p in &pivots {
        ops.push(Op::H(p));
    }
    let images = rows
        .iter()
        .map(|&r| {
            let (x, z) = ops.iter().fold(r, |acc, &o| apply_op(acc, o));
            debug_assert_eq!(x, 0, "elimination left an X component");
            z
        })
        .collect();
    (ops, images)
}

fn local_ops(choice: &[u8]) -> Vec<Op> {
    choice
        .iter()
        .enumerate()
        .filter_map(|(q, &c)| match c {
            1 => Some(Op::H(q)),
            2 => Some(Op::Hsh(q)),
            _ => None,
        })
        .collect()
}

struct Candidate {
    cost: usize,
    ops: Vec<Op>,
    images: Vec<u64>,
}

fn evaluate(rows: &[Sym], n: usize, choice: &[u8], order: PivotOrder) -> Candidate {
    let local = local_ops(choice);
    let rotated: Vec<Sym> = rows
        .iter()
        .map(|&r| local.iter().fold(r, |acc, &o| apply_op(acc, o)))
        .collect();
    let (elim, images) = eliminate(&rotated, n, order);
    let mut ops = local;
    ops.extend(elim);
    let cost = 2 * cx_cost(&ops) + ladder_cost(&images, n);
    Candidate { cost, ops, images }
}

const EXHAUSTIVE_QUBITS: usize = 5;

/// Search over per-qubit local bases and pivot orders; exhaustive for small
/// widths, coordinate descent otherwise. First minimum wins.
fn search(rows: &[Sym], n: usize) -> Candidate {
    let orders = [PivotOrder::High, PivotOrder::Low];
    let mut best: Option<Candidate> = None;
    let offer = |c: Candidate, best: &mut Option<Candidate>| {
        if best.as_ref().is_none_or(|b| c.cost < b.cost) {
            *best = Some(c);
        }
    };
    if n <= EXHAUSTIVE_QUBITS {
        let total = 3usize.pow(n as u32);
        for code in 0..total {
            // qubit 0 is the most significant ternary digit
            let choice: Vec<u8> = (0..n)
                .map(|q| (code / 3usize.pow((n - 1 - q) as u32) % 3) as u8)
                .collect();
            for order in orders {
                offer(evaluate(rows, n, &choice, order), &mut best);
            }
        }
    } else {
        for order in orders {
            let mut choice = vec![0u8; n];
            let mut cur = evaluate(rows, n, &choice, order);
            let mut improved = true;
            while improved {
                improved = false;
                for q in 0..n {
                    for o in 0..3u8 {
                        if o == choice[q] {
                            continue;
                        }
                        let mut trial = choice.clone();
                        trial[q] = o;
                        let c = evaluate(rows, n, &trial, order);
                        if c.cost < cur.cost {
                            cur = c;
                            choice = trial;
                            improved = true;
                        }
                    }
                }
            }
            offer(cur, &mut best);
        }
    }
    best.expect("at least one candidate")
}

/// Appends CX gates after the diagonalization while each strictly lowers the
/// total cost (2 per added CX plus the ladder cost of the new images).
fn hill_climb(images: &mut Vec<u64>, ops: &mut Vec<Op>, n: usize) {
    let mut base = ladder_cost(images, n);
    loop {
        let mut best: Option<(usize, usize, Vec<u64>, usize)> = None;
        let mut best_gain = 0;
        for c in 0..n {
            for t in 0..n {
                if c == t {
                    continue;
                }
                let new: Vec<u64> = images.iter().map(|&m| m ^ (bit(m, t) << c)).collect();
                let v = ladder_cost(&new, n) + 2;
                if base > v && base - v > best_gain {
                    best_gain = base - v;
                    best = Some((c, t, new, v));
                }
            }
        }
        match best {
            Some((c, t, new, v)) => {
                ops.push(Op::Cx(c, t));
                *images = new;
                base = v;
            }
            None => return,
        }
    }
}

/// One step of the shared-target ladder schedule.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct LadderStep {
    mask: u64,
    target: usize,
    /// Continues on the previous target rather than unwinding.
    continues: bool,
    cost: usize,
}

/// Greedy order: continuing on the current target costs `|a Δ b|`; a restart
/// costs the unwind of `a` plus the build of `b`, with the new target chosen
/// as the qubit of `b` shared by most remaining terms.
fn ladder_schedule(masks: &[u64], n: usize) -> (Vec<LadderStep>, usize) {
    let mut rem: Vec<u64> = masks.to_vec();
    rem.sort_unstable();
    rem.dedup();
    let pc = |m: u64| m.count_ones() as usize;
    let mut cur: Option<(u64, usize)> = None;
    let mut steps = Vec::with_capacity(rem.len());
    while !rem.is_empty() {
        // key: (cost, -frequency, mask)
        let mut best: Option<((usize, i64, u64), LadderStep)> = None;
        for &b in &rem {
            if let Some((a, t)) = cur {
                if bit(b, t) == 1 {
                    let key = (pc(a ^ b), 0, b);
                    if best.as_ref().is_none_or(|(k, _)| key < *k) {
                        best = Some((
                            key,
                            LadderStep {
                                mask: b,
                                target: t,
                                continues: true,
                                cost: key.0,
                            },
                        ));
                    }
                }
            }
            let base = cur.map_or(0, |(a, _)| pc(a) - 1) + pc(b) - 1;
            for q in (0..n).filter(|&q| bit(b, q) == 1) {
                let freq = rem.iter().filter(|&&o| o != b && bit(o, q) == 1).count() as i64;
                let key = (base, -freq, b);
                if best.as_ref().is_none_or(|(k, _)| key < *k) {
                    best = Some((
                        key,
                        LadderStep {
                            mask: b,
                            target: q,
                            continues: false,
                            cost: base,
                        },
                    ));
                }
            }
        }
        let (_, step) = best.expect("nonempty remainder");
        rem.retain(|&m| m != step.mask);
        cur = Some((step.mask, step.target));
        steps.push(step);
    }
    let unwind = cur.map_or(0, |(a, _)| pc(a) - 1);
    let total = steps.iter().map(|s| s.cost).sum::<usize>() + unwind;
    (steps, total)
}

fn ladder_cost(masks: &[u64], n: usize) -> usize {
    ladder_schedule(masks, n).1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagonalizedCluster {
    /// Clifford `D` with `D P D†` diagonal for every source term; applied
    /// first in the cluster evolution.
    pub clifford: Circuit,
    /// Diagonal image of each source term, same order, sign folded into the
    /// coefficient.
    pub diag_terms: Vec<WeightedPauli>,
    pub source: Vec<WeightedPauli>,
}

impl DiagonalizedCluster {
    pub fn num_qubits(&self) -> usize {
        self.clifford.width()
    }

    /// CX count of one evolution of this cluster.
    pub fn two_qubit_cost(&self) -> usize {
        2 * self.clifford.two_qubit_count() + ladder_cost(&self.masks(), self.num_qubits())
    }

    fn masks(&self) -> Vec<u64> {
        self.diag_terms.iter().map(|t| t.string.z_bits()).collect()
    }

    /// `D · exp(-i dt Σ diag) · D†` in time order.
    pub fn evolution(&self, dt: f64) -> Result<Circuit> {
        let mut c = self.clifford.clone();
        c.append(&synth_diagonal_evolution(&self.diag_terms, dt)?)?;
        c.append(&self.clifford.inverse()?)?;
        Ok(c)
    }
}

fn ops_to_circuit(ops: &[Op], n: usize) -> Result<Circuit> {
    let mut c = Circuit::new(n)?;
    for &o in ops {
        match o {
            Op::H(q) => c.push(Gate::H(q))?,
            Op::Hsh(q) => {
                c.push(Gate::H(q))?;
                c.push(Gate::S(q))?;
                c.push(Gate::H(q))?;
            }
            Op::S(q) => c.push(Gate::S(q))?,
            Op::Cx(a, b) => c.push(Gate::Cx(a, b))?,
            Op::Cz(a, b) => {
                c.push(Gate::H(b))?;
                c.push(Gate::Cx(a, b))?;
                c.push(Gate::H(b))?;
            }
        }
    }
    Ok(c)
}

pub fn diagonalize_cluster(terms: &[WeightedPauli]) -> Result<DiagonalizedCluster> {
    let first = terms
        .first()
        .ok_or_else(|| Error::InvalidParameter("empty cluster".into()))?;
    let n = first.string.num_qubits();
    for (i, a) in terms.iter().enumerate() {
        for b in &terms[i + 1..] {
            if !a.string.commutes(&b.string)? {
                return Err(Error::ContractViolation(format!(
                    "{} and {} do not commute",
                    a.string, b.string
                )));
            }
        }
    }
    let rows: Vec<Sym> = terms
        .iter()
        .map(|t| (t.string.x_bits(), t.string.z_bits()))
        .collect();
    let best = search(&rows, n);
    let mut ops = best.ops;
    let mut images = best.images;
    hill_climb(&mut images, &mut ops, n);
    let clifford = ops_to_circuit(&ops, n)?;
    let diag_terms = terms
        .iter()
        .map(|t| {
            let img = clifford.conjugate(&t.string)?;
            if !img.is_diagonal() {
                return Err(Error::ContractViolation(format!(
                    "image of {} is not diagonal",
                    t.string
                )));
            }
            WeightedPauli::new(img, t.coeff)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DiagonalizedCluster {
        clifford,
        diag_terms,
        source: terms.to_vec(),
    })
}

/// `exp(-i dt Σ c_k Z_{m_k})` for diagonal terms.
pub fn synth_diagonal_evolution(diag_terms: &[WeightedPauli], dt: f64) -> Result<Circuit> {
    let n = diag_terms
        .first()
        .map(|t| t.string.num_qubits())
        .ok_or_else(|| Error::InvalidParameter("no diagonal terms".into()))?;
    let mut angle = std::collections::BTreeMap::<u64, f64>::new();
    for t in diag_terms {
        if !t.string.is_diagonal() || t.string.num_qubits() != n {
            return Err(Error::ContractViolation(format!("{} is not diagonal", t.string)));
        }
        *angle.entry(t.string.z_bits()).or_insert(0.0) += t.coeff;
    }
    let mut c = Circuit::new(n)?;
    angle.remove(&0);
    let masks: Vec<u64> = angle.keys().copied().collect();
    let (steps, _) = ladder_schedule(&masks, n);
    let mut cur: Option<(u64, usize)> = None;
    let unwind = |c: &mut Circuit, a: u64, t: usize| -> Result<()> {
        for q in (0..n).rev().filter(|&q| q != t && bit(a, q) == 1) {
            c.push(Gate::Cx(q, t))?;
        }
        Ok(())
    };
    for s in &steps {
        match cur {
            Some((a, t)) if s.continues => {
                for q in (0..n).filter(|&q| bit(a ^ s.mask, q) == 1) {
                    c.push(Gate::Cx(q, t))?;
                }
            }
            _ => {
                if let Some((a, t)) = cur {
                    unwind(&mut c, a, t)?;
                }
                for q in (0..n).filter(|&q| q != s.target && bit(s.mask, q) == 1) {
                    c.push(Gate::Cx(q, s.target))?;
                }
            }
        }
        c.push(Gate::Rz(s.target, 2.0 * angle[&s.mask] * dt))?;
        cur = Some((s.mask, s.target));
    }
    if let Some((a, t)) = cur {
        unwind(&mut c, a, t)?;
    }
    Ok(c)
}

/// First-order product formula over diagonalized clusters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrotterPlan {
    pub n: usize,
    pub clusters: Vec<DiagonalizedCluster>,
    pub dt: f64,
}

impl TrotterPlan {
    pub fn new(h: &Hamiltonian, partition: &ClusterPartition, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        partition.validate(h.sum())?;
        let clusters = partition
            .clusters
            .iter()
            .map(|idx| {
                let terms: Vec<WeightedPauli> = idx.iter().map(|&i| h.terms()[i]).collect();
                diagonalize_cluster(&terms)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TrotterPlan {
            n: h.num_qubits(),
            clusters,
            dt,
        })
    }

    /// Partitions `h` with DSatur first.
    pub fn for_hamiltonian(h: &Hamiltonian, dt: f64) -> Result<Self> {
        let p = clustering::partition(h.sum())?;
        TrotterPlan::new(h, &p, dt)
    }

    pub fn with_dt(&self, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        Ok(TrotterPlan {
            dt,
            ..self.clone()
        })
    }

    pub fn step(&self) -> Result<Circuit> {
        let mut c = Circuit::new(self.n)?;
        for cl in &self.clusters {
            c.append(&cl.evolution(self.dt)?)?;
        }
        c.metadata.name = "trotter_step".into();
        c.metadata.dt = Some(self.dt);
        c.metadata.steps = Some(1);
        Ok(c)
    }

    pub fn circuit(&self, r: usize) -> Result<Circuit> {
        let mut c = self.step()?.repeat(r);
        c.metadata.name = "trotter".into();
        c.metadata.steps = Some(r);
        Ok(c)
    }

    pub fn per_cluster_cost(&self) -> Vec<usize> {
        self.clusters.iter().map(|c| c.two_qubit_cost()).collect()
    }
}

pub fn trotter_step(h: &Hamiltonian, partition: &ClusterPartition, dt: f64) -> Result<Circuit> {
    TrotterPlan::new(h, partition, dt)?.step()
}

/// `r` steps of `dt = t/r`; `t = 0` gives an empty circuit.
pub fn trotter_circuit(h: &Hamiltonian, t: f64, r: usize) -> Result<Circuit> {
    if r == 0 {
        return Err(Error::InvalidParameter("r must be at least 1".into()));
    }
    if t == 0.0 {
        let mut c = Circuit::new(h.num_qubits())?;
        c.metadata.name = "trotter".into();
        c.metadata.dt = Some(0.0);
        c.metadata.steps = Some(r);
        return Ok(c);
    }
    TrotterPlan::for_hamiltonian(h, t / r as f64)?.circuit(r)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceRow {
    pub n_majorana: usize,
    pub strings: usize,
    pub clusters: usize,
    pub two_qubit: usize,
}

/// SYK Hamiltonian with every coupling set to 1; gate counts only depend on
/// the Pauli structure.
pub fn structural_hamiltonian(n_majorana: usize) -> Result<Hamiltonian> {
    let params = SykParams::new(n_majorana, 0);
    params.validate()?;
    let inst = SykInstance {
        params,
        couplings: syk::quartic_tuples(n_majorana)
            .into_iter()
            .map(|indices| Coupling {
                indices,
                value: 1.0,
            })
            .collect(),
    };
    syk::build_hamiltonian(&inst)
}

pub fn resource_row(n_majorana: usize) -> Result<ResourceRow> {
    let h = structural_hamiltonian(n_majorana)?;
    let p = clustering::partition(h.sum())?;
    let plan = TrotterPlan::new(&h, &p, 1.0)?;
    Ok(ResourceRow {
        n_majorana,
        strings: h.terms().len(),
        clusters: p.count(),
        two_qubit: plan.per_cluster_cost().iter().sum(),
    })
}

pub fn resource_table(n_values: &[usize]) -> Result<Vec<ResourceRow>> {
    if n_values.is_empty() {
        return Err(Error::InvalidParameter("empty N range".into()));
    }
    for &n in n_values {
        if n % 2 != 0 || !(4..=20).contains(&n) {
            return Err(Error::InvalidParameter(format!(
                "N must be even and in 4..=20, got {n}"
            )));
        }
    }
    n_values.iter().map(|&n| resource_row(n)).collect()
}

pub fn resource_table_text(rows: &[ResourceRow]) -> String {
    let mut out = format!("{:>4} {:>14} {:>9} {:>16}\n", "N", "Pauli strings", "Clusters", "Two-qubit gates");
    for r in rows {
        writeln!(out, "{:>4} {:>14} {:>9} {:>16}", r.n_majorana, r.strings, r.clusters, r.two_qubit).unwrap();
    }
    out
}

pub fn resource_table_csv(rows: &[ResourceRow]) -> String {
    let mut out = String::from("n_majorana,pauli_strings,clusters,two_qubit_gates\n");
    for r in rows {
        writeln!(out, "{},{},{},{}", r.n_majorana, r.strings, r.clusters, r.two_qubit).unwrap();
    }
    out
}

/// Image of `p` under the mask-level ops, for cross-checking the exact path.
#[cfg(test)]
fn mask_image(p: &crate::pauli::PauliString, ops: &[Op]) -> Sym {
    ops.iter().fold((p.x_bits(), p.z_bits()), |acc, &o| apply_op(acc, o))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{approx_eq, distance_up_to_phase, spectral_norm};
    use crate::pauli::PauliSum;
    use crate::sim::circuit_unitary;
    use num_complex::Complex64;

    fn wp(s: &str, c: f64) -> WeightedPauli {
        WeightedPauli::new(s.parse().unwrap(), c).unwrap()
    }

    fn exp_sum(terms: &[WeightedPauli], dt: f64) -> crate::linalg::CMatrix {
        let n = terms[0].string.num_qubits();
        let h = Hamiltonian::from_sum(PauliSum::from_terms(n, terms.iter().copied()).unwrap());
        h.propagator(dt).unwrap()
    }

    #[test]
    fn worked_cluster_images_and_cost() {
        let (a1, a11, a14) = (0.31, -0.52, 0.77);
        let h1 = [wp("IZZ", a1), wp("ZXX", a11), wp("ZYY", a14)];
        let d = diagonalize_cluster(&h1).unwrap();
        let want = [wp("IZI", a1), wp("ZIZ", a11), wp("ZZZ", -a14)];
        assert_eq!(d.diag_terms, want);
        assert_eq!(d.clifford.gates(), &[Gate::Cx(2, 1), Gate::H(2)]);
        assert_eq!(d.two_qubit_cost(), 6);
        let diag = synth_diagonal_evolution(&d.diag_terms, 1.0).unwrap();
        assert_eq!(diag.two_qubit_count(), 4);
        let dt = 0.37;
        let u = circuit_unitary(&d.evolution(dt).unwrap()).unwrap();
        assert!(approx_eq(&u, &exp_sum(&h1, dt), 1e-10));
    }

    #[test]
    fn trivial_clusters() {
        let d = diagonalize_cluster(&[wp("ZZI", 1.0), wp("IZZ", 2.0)]).unwrap();
        assert!(d.clifford.is_empty());
        let x = diagonalize_cluster(&[wp("X", 0.5)]).unwrap();
        assert_eq!(x.clifford.gates(), &[Gate::H(0)]);
        assert_eq!(x.diag_terms, vec![wp("Z", 0.5)]);
        assert!(matches!(
            diagonalize_cluster(&[wp("XI", 1.0), wp("ZI", 1.0)]),
            Err(Error::ContractViolation(_))
        ));
    }

    #[test]
    fn diagonal_evolution_examples() {
        let c = synth_diagonal_evolution(&[wp("IZI", 0.4)], 0.5).unwrap();
        assert_eq!(c.gates(), &[Gate::Rz(1, 0.4)]);
        for nu in 1..=5usize {
            let s: String = (0..5).map(|q| if q < nu { 'Z' } else { 'I' }).collect();
            let c = synth_diagonal_evolution(&[wp(&s, 1.0)], 0.1).unwrap();
            assert_eq!(c.two_qubit_count(), 2 * (nu - 1));
        }
        assert!(synth_diagonal_evolution(&[wp("XZ", 1.0)], 0.1).is_err());
    }

    #[test]
    fn diagonal_evolution_is_exact() {
        let terms = [wp("ZZIZ", 0.3), wp("IZZZ", -0.7), wp("ZIII", 0.2), wp("ZZZZ", 1.1), wp("IIZZ", 0.45)];
        let dt = 0.9;
        let u = circuit_unitary(&synth_diagonal_evolution(&terms, dt).unwrap()).unwrap();
        assert!(approx_eq(&u, &exp_sum(&terms, dt), 1e-12));
    }

    #[test]
    fn mask_search_agrees_with_exact_conjugation() {
        let h = structural_hamiltonian(10).unwrap();
        let p = clustering::partition(h.sum()).unwrap();
        for idx in &p.clusters {
            let terms: Vec<WeightedPauli> = idx.iter().map(|&i| h.terms()[i]).collect();
            let rows: Vec<Sym> = terms.iter().map(|t| (t.string.x_bits(), t.string.z_bits())).collect();
            let best = search(&rows, 5);
            for (t, img) in terms.iter().zip(&best.images) {
                assert_eq!(mask_image(&t.string, &best.ops), (0, *img));
            }
        }
    }

    #[test]
    fn n4_step() {
        let h = structural_hamiltonian(4).unwrap();
        let step = TrotterPlan::for_hamiltonian(&h, 1.5).unwrap().step().unwrap();
        assert_eq!(step.two_qubit_count(), 2);
        assert!(matches!(step.gates(), [Gate::Cx(..), Gate::Rz(..), Gate::Cx(..)]));
    }

    #[test]
    fn n6_and_n8_totals() {
        for (n, total, clusters) in [(6usize, 30usize, 5usize), (8, 110, 6)] {
            let h = structural_hamiltonian(n).unwrap();
            let plan = TrotterPlan::for_hamiltonian(&h, 1.5).unwrap();
            assert_eq!(plan.clusters.len(), clusters);
            let costs = plan.per_cluster_cost();
            assert_eq!(costs.iter().sum::<usize>(), total, "{costs:?}");
            assert_eq!(plan.step().unwrap().two_qubit_count(), total);
        }
    }

    #[test]
    fn per_cluster_evolution_is_exact() {
        let inst = syk::sample_couplings(SykParams::new(8, 13)).unwrap();
        let h = syk::build_hamiltonian(&inst).unwrap();
        let plan = TrotterPlan::for_hamiltonian(&h, 0.8).unwrap();
        for cl in &plan.clusters {
            let u = circuit_unitary(&cl.evolution(0.8).unwrap()).unwrap();
            let d = spectral_norm(&(u - exp_sum(&cl.source, 0.8)));
            assert!(d <= 1e-10, "{d}");
            for (src, img) in cl.source.iter().zip(&cl.diag_terms) {
                let dm = circuit_unitary(&cl.clifford).unwrap();
                let lhs = &dm * src.string.to_matrix().unwrap() * dm.adjoint() * Complex64::new(src.coeff, 0.0);
                let rhs = img.string.to_matrix().unwrap() * Complex64::new(img.coeff, 0.0);
                assert!(approx_eq(&lhs, &rhs, 1e-12));
            }
        }
    }

    #[test]
    fn trotter_circuit_shapes() {
        let h = syk::build_hamiltonian(&syk::sample_couplings(SykParams::new(6, 3)).unwrap()).unwrap();
        let one = trotter_circuit(&h, 1.5, 1).unwrap();
        let plan = TrotterPlan::for_hamiltonian(&h, 1.5).unwrap();
        assert_eq!(one.gates(), plan.step().unwrap().gates());
        let eight = trotter_circuit(&h, 12.0, 8).unwrap();
        assert_eq!(eight.two_qubit_count(), 240);
        assert_eq!(eight.two_qubit_count(), 8 * one.two_qubit_count());
        let zero = trotter_circuit(&h, 0.0, 3).unwrap();
        assert!(zero.is_empty());
        assert!(trotter_circuit(&h, 1.0, 0).is_err());
        let d = distance_up_to_phase(&circuit_unitary(&zero).unwrap(), &crate::linalg::CMatrix::identity(8, 8));
        assert!(d < 1e-15);
    }

    #[test]
    fn step_error_is_second_order() {
        let h = syk::build_hamiltonian(&syk::sample_couplings(SykParams::new(6, 21)).unwrap()).unwrap();
        let plan = TrotterPlan::for_hamiltonian(&h, 0.2).unwrap();
        let err = |dt: f64| {
            let u = circuit_unitary(&plan.with_dt(dt).unwrap().step().unwrap()).unwrap();
            spectral_norm(&(u - h.propagator(dt).unwrap()))
        };
        for dt in [0.2, 0.1] {
            let ratio = err(dt) / err(dt / 2.0);
            assert!((3.5..=4.5).contains(&ratio), "dt={dt}: {ratio}");
        }
    }

    #[test]
    fn resource_rows_small() {
        let rows = resource_table(&[4, 6, 8, 10]).unwrap();
        let got: Vec<(usize, usize, usize, usize)> =
            rows.iter().map(|r| (r.n_majorana, r.strings, r.clusters, r.two_qubit)).collect();
        assert_eq!(got[..3], [(4, 1, 1, 2), (6, 15, 5, 30), (8, 70, 6, 110)]);
        assert_eq!(got[3].1, 210);
        assert!(got[3].2 as f64 <= 23.0 * 1.15);
        assert!(got[3].3 as f64 <= 498.0 * 1.15);
        assert!(resource_table(&[]).is_err());
        assert!(resource_table(&[22]).is_err());
        let csv = resource_table_csv(&rows);
        assert!(csv.starts_with("n_majorana,pauli_strings,clusters,two_qubit_gates\n4,1,1,2\n"));
        assert_eq!(resource_table_text(&rows).lines().count(), 5);
    }
}
