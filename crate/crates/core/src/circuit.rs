//! Gate-level circuits: Clifford conjugation of Pauli strings, OPENQASM 2.0
//! text, ECR lowering and SWAP routing on a coupling map.
//!
//! Gate lists are in time order. For a circuit `g_1, …, g_k` the unitary is
//! `U = g_k ⋯ g_1`.

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{Pauli, PauliString, Phase};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Gate {
    H(usize),
    S(usize),
    Sdg(usize),
    X(usize),
    Y(usize),
    Z(usize),
    /// `exp(-i θ/2 Z)`.
    Rz(usize, f64),
    /// Control, target.
    Cx(usize, usize),
    /// `(I⊗X − X⊗Y)/√2` with the first operand as the left factor.
    Ecr(usize, usize),
    Swap(usize, usize),
    /// Spans every qubit.
    Barrier,
    Measure(usize),
}

impl Gate {
    pub fn name(&self) -> &'static str {
        match self {
            Gate::H(_) => "h",
            Gate::S(_) => "s",
            Gate::Sdg(_) => "sdg",
            Gate::X(_) => "x",
            Gate::Y(_) => "y",
            Gate::Z(_) => "z",
            Gate::Rz(..) => "rz",
            Gate::Cx(..) => "cx",
            Gate::Ecr(..) => "ecr",
            Gate::Swap(..) => "swap",
            Gate::Barrier => "barrier",
            Gate::Measure(_) => "measure",
        }
    }

    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::H(q)
            | Gate::S(q)
            | Gate::Sdg(q)
            | Gate::X(q)
            | Gate::Y(q)
            | Gate::Z(q)
            | Gate::Rz(q, _)
            | Gate::Measure(q) => vec![q],
            Gate::Cx(a, b) | Gate::Ecr(a, b) | Gate::Swap(a, b) => vec![a, b],
            Gate::Barrier => Vec::new(),
        }
    }

    pub fn pair(&self) -> Option<(usize, usize)> {
        match *self {
            Gate::Cx(a, b) | Gate::Ecr(a, b) | Gate::Swap(a, b) => Some((a, b)),
            _ => None,
        }
    }

    pub fn is_two_qubit(&self) -> bool {
        self.pair().is_some()
    }

    /// Same gate with operands renamed through `f`.
    pub fn remap(&self, f: impl Fn(usize) -> usize) -> Gate {
        match *self {
            Gate::H(q) => Gate::H(f(q)),
            Gate::S(q) => Gate::S(f(q)),
            Gate::Sdg(q) => Gate::Sdg(f(q)),
            Gate::X(q) => Gate::X(f(q)),
            Gate::Y(q) => Gate::Y(f(q)),
            Gate::Z(q) => Gate::Z(f(q)),
            Gate::Rz(q, t) => Gate::Rz(f(q), t),
            Gate::Measure(q) => Gate::Measure(f(q)),
            Gate::Cx(a, b) => Gate::Cx(f(a), f(b)),
            Gate::Ecr(a, b) => Gate::Ecr(f(a), f(b)),
            Gate::Swap(a, b) => Gate::Swap(f(a), f(b)),
            Gate::Barrier => Gate::Barrier,
        }
    }

    pub fn inverse(&self) -> Result<Gate> {
        Ok(match *self {
            Gate::S(q) => Gate::Sdg(q),
            Gate::Sdg(q) => Gate::S(q),
            Gate::Rz(q, t) => Gate::Rz(q, -t),
            Gate::Measure(_) => {
                return Err(Error::UnsupportedGate("measure has no inverse".into()))
            }
            g => g,
        })
    }

    fn validate(&self, width: usize) -> Result<()> {
        let qs = self.qubits();
        for &q in &qs {
            if q >= width {
                return Err(Error::InvalidParameter(format!(
                    "{} operand {q} outside width {width}",
                    self.name()
                )));
            }
        }
        if qs.len() == 2 && qs[0] == qs[1] {
            return Err(Error::InvalidParameter(format!(
                "{} operands must be distinct",
                self.name()
            )));
        }
        if let Gate::Rz(_, t) = self {
            if !t.is_finite() {
                return Err(Error::InvalidParameter("non-finite rotation angle".into()));
            }
        }
        Ok(())
    }

    /// `G P G†` for Clifford gates, phase included.
    pub fn conjugate(&self, p: &PauliString) -> Result<PauliString> {
        let n = p.num_qubits();
        for q in self.qubits() {
            if q >= n {
                return Err(Error::InvalidParameter(format!("operand {q} outside width {n}")));
            }
        }
        match *self {
            Gate::Rz(..) | Gate::Measure(_) => Err(Error::UnsupportedGate(format!(
                "{} is not a Clifford gate",
                self.name()
            ))),
            Gate::Barrier => Ok(*p),
            Gate::Ecr(a, b) => {
                let mut out = *p;
                for g in ecr_as_clifford(a, b) {
                    out = g.conjugate(&out)?;
                }
                Ok(out)
            }
            _ => {
                let x = p.x_bits();
                let z = p.z_bits();
                let ys = (x & z).count_ones() as i64;
                let mut acc = PauliString::identity(n)?
                    .with_phase(p.phase() * Phase::from_exponent(ys));
                for j in 0..n {
                    if x >> j & 1 == 1 {
                        acc = acc.multiply(&self.image(n, j, Pauli::X)?)?;
                    }
                }
                for j in 0..n {
                    if z >> j & 1 == 1 {
                        acc = acc.multiply(&self.image(n, j, Pauli::Z)?)?;
                    }
                }
                Ok(acc)
            }
        }
    }

    /// Image of the generator `X_q` or `Z_q`.
    fn image(&self, n: usize, q: usize, p: Pauli) -> Result<PauliString> {
        use Pauli::*;
        let single = |q: usize, l: Pauli| PauliString::single(n, q, l);
        let neg = |s: PauliString| s.with_phase(s.phase() * Phase::MINUS_ONE);
        let two = |a: usize, la: Pauli, b: usize, lb: Pauli| -> Result<PauliString> {
            single(a, la)?.multiply(&single(b, lb)?)
        };
        let is_x = p == X;
        Ok(match *self {
            Gate::H(t) if t == q => single(q, if is_x { Z } else { X })?,
            Gate::S(t) if t == q && is_x => single(q, Y)?,
            Gate::Sdg(t) if t == q && is_x => neg(single(q, Y)?),
            Gate::X(t) if t == q && !is_x => neg(single(q, p)?),
            Gate::Y(t) if t == q => neg(single(q, p)?),
            Gate::Z(t) if t == q && is_x => neg(single(q, p)?),
            Gate::Cx(c, t) if c == q && is_x => two(c, X, t, X)?,
            Gate::Cx(c, t) if t == q && !is_x => two(c, Z, t, Z)?,
            Gate::Swap(a, b) if a == q => single(b, p)?,
            Gate::Swap(a, b) if b == q => single(a, p)?,
            _ => single(q, p)?,
        })
    }
}

/// ECR as a Clifford sequence, equal up to global phase.
fn ecr_as_clifford(a: usize, b: usize) -> [Gate; 8] {
    [
        Gate::H(a),
        Gate::H(b),
        Gate::Cx(a, b),
        Gate::Z(b),
        Gate::H(b),
        Gate::Sdg(b),
        Gate::S(a),
        Gate::H(a),
    ]
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CircuitMetadata {
    pub name: String,
    pub dt: Option<f64>,
    pub steps: Option<usize>,
    /// Physical qubit holding each virtual qubit at the end of a routed circuit.
    pub output_permutation: Option<Vec<usize>>,
    /// Physical qubit holding each virtual qubit at the start.
    #[serde(default)]
    pub input_layout: Option<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    width: usize,
    gates: Vec<Gate>,
    pub metadata: CircuitMetadata,
}

impl Circuit {
    pub fn new(width: usize) -> Result<Self> {
        if width == 0 {
            return Err(Error::InvalidParameter("circuit width must be at least 1".into()));
        }
        Ok(Circuit {
            width,
            gates: Vec::new(),
            metadata: CircuitMetadata::default(),
        })
    }

    pub fn from_gates(width: usize, gates: impl IntoIterator<Item = Gate>) -> Result<Self> {
        let mut c = Circuit::new(width)?;
        for g in gates {
            c.push(g)?;
        }
        Ok(c)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn push(&mut self, g: Gate) -> Result<()> {
        g.validate(self.width)?;
        self.gates.push(g);
        Ok(())
    }

    pub fn append(&mut self, other: &Circuit) -> Result<()> {
        if other.width != self.width {
            return Err(Error::DimensionMismatch {
                left: self.width,
                right: other.width,
            });
        }
        self.gates.extend_from_slice(&other.gates);
        Ok(())
    }

    pub fn repeat(&self, r: usize) -> Circuit {
        let mut c = Circuit {
            width: self.width,
            gates: Vec::with_capacity(self.gates.len() * r),
            metadata: self.metadata.clone(),
        };
        for _ in 0..r {
            c.gates.extend_from_slice(&self.gates);
        }
        c
    }

    pub fn inverse(&self) -> Result<Circuit> {
        let gates = self
            .gates
            .iter()
            .rev()
            .map(Gate::inverse)
            .collect::<Result<Vec<_>>>()?;
        Ok(Circuit {
            width: self.width,
            gates,
            metadata: self.metadata.clone(),
        })
    }

    pub fn count(&self, name: &str) -> usize {
        self.gates.iter().filter(|g| g.name() == name).count()
    }

    /// CX + ECR + 3·SWAP.
    pub fn two_qubit_count(&self) -> usize {
        self.gates
            .iter()
            .map(|g| match g {
                Gate::Cx(..) | Gate::Ecr(..) => 1,
                Gate::Swap(..) => 3,
                _ => 0,
            })
            .sum()
    }

    /// `U P U†` for an all-Clifford circuit.
    pub fn conjugate(&self, p: &PauliString) -> Result<PauliString> {
        if p.num_qubits() != self.width {
            return Err(Error::DimensionMismatch {
                left: self.width,
                right: p.num_qubits(),
            });
        }
        self.gates.iter().try_fold(*p, |acc, g| g.conjugate(&acc))
    }
}

pub fn two_qubit_count(c: &Circuit) -> usize {
    c.two_qubit_count()
}

/// `%.17g`-style formatting.
pub fn format_angle(x: f64) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.16e}", x);
    let (mant, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent digits");
    let strip = |s: String| {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    };
    if (-4..17).contains(&exp) {
        let prec = (16 - exp).max(0) as usize;
        strip(format!("{:.*}", prec, x))
    } else {
        let m = strip(mant.to_string());
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    }
}

pub fn export_qasm2(c: &Circuit) -> Result<String> {
    let mut out = String::from("OPENQASM 2.0;\ninclude \"qelib1.inc\";\n");
    writeln!(out, "qreg q[{}];", c.width).unwrap();
    if c.gates.iter().any(|g| matches!(g, Gate::Measure(_))) {
        writeln!(out, "creg c[{}];", c.width).unwrap();
    }
    for g in &c.gates {
        match *g {
            Gate::Ecr(..) => {
                return Err(Error::UnsupportedGate(
                    "ecr has no OPENQASM 2.0 form; lower it first".into(),
                ))
            }
            Gate::Rz(q, t) => writeln!(out, "rz({}) q[{q}];", format_angle(t)).unwrap(),
            Gate::Measure(q) => writeln!(out, "measure q[{q}] -> c[{q}];").unwrap(),
            Gate::Barrier => {
                let all: Vec<String> = (0..c.width).map(|q| format!("q[{q}]")).collect();
                writeln!(out, "barrier {};", all.join(",")).unwrap();
            }
            _ => {
                let ops: Vec<String> = g.qubits().iter().map(|q| format!("q[{q}]")).collect();
                writeln!(out, "{} {};", g.name(), ops.join(",")).unwrap();
            }
        }
    }
    Ok(out)
}

fn parse_operand(tok: &str, reg: &str) -> Result<usize> {
    let tok = tok.trim();
    let inner = tok
        .strip_prefix(reg)
        .and_then(|r| r.strip_prefix('['))
        .and_then(|r| r.strip_suffix(']'))
        .ok_or_else(|| Error::Parse(format!("bad operand `{tok}`")))?;
    inner
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("bad index in `{tok}`")))
}

/// Reads the subset of OPENQASM 2.0 that [`export_qasm2`] writes.
pub fn parse_qasm2(text: &str) -> Result<Circuit> {
    let mut circuit: Option<Circuit> = None;
    for raw in text.split(';') {
        let stmt = raw
            .lines()
            .map(|l| l.split("//").next().unwrap_or(""))
            .collect::<Vec<_>>()
            .join(" ");
        let stmt = stmt.trim();
        if stmt.is_empty() || stmt.starts_with("OPENQASM") || stmt.starts_with("include") {
            continue;
        }
        if let Some(rest) = stmt.strip_prefix("qreg") {
            let n = parse_operand(rest, "q")?;
            circuit = Some(Circuit::new(n)?);
            continue;
        }
        if stmt.starts_with("creg") {
            continue;
        }
        let c = circuit
            .as_mut()
            .ok_or_else(|| Error::Parse("gate before qreg declaration".into()))?;
        let (head, args) = match stmt.find(|ch: char| ch.is_whitespace()) {
            Some(i) if !stmt[..i].contains('(') || stmt[..i].contains(')') => {
                (&stmt[..i], stmt[i..].trim())
            }
            _ => {
                let close = stmt
                    .find(')')
                    .ok_or_else(|| Error::Parse(format!("bad statement `{stmt}`")))?;
                (&stmt[..=close], stmt[close + 1..].trim())
            }
        };
        if head == "measure" {
            let (q, _) = args
                .split_once("->")
                .ok_or_else(|| Error::Parse(format!("bad measure `{stmt}`")))?;
            c.push(Gate::Measure(parse_operand(q, "q")?))?;
            continue;
        }
        if head == "barrier" {
            c.push(Gate::Barrier)?;
            continue;
        }
        let ops = args
            .split(',')
            .map(|t| parse_operand(t, "q"))
            .collect::<Result<Vec<_>>>()?;
        let arity = |k: usize| -> Result<()> {
            if ops.len() == k {
                Ok(())
            } else {
                Err(Error::Parse(format!("`{head}` expects {k} operands")))
            }
        };
        let gate = if let Some(angle) = head.strip_prefix("rz(").and_then(|r| r.strip_suffix(')')) {
            arity(1)?;
            let t: f64 = angle
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad angle `{angle}`")))?;
            Gate::Rz(ops[0], t)
        } else {
            match head {
                "h" | "s" | "sdg" | "x" | "y" | "z" => {
                    arity(1)?;
                    let q = ops[0];
                    match head {
                        "h" => Gate::H(q),
                        "s" => Gate::S(q),
                        "sdg" => Gate::Sdg(q),
                        "x" => Gate::X(q),
                        "y" => Gate::Y(q),
                        _ => Gate::Z(q),
                    }
                }
                "cx" => {
                    arity(2)?;
                    Gate::Cx(ops[0], ops[1])
                }
                "swap" => {
                    arity(2)?;
                    Gate::Swap(ops[0], ops[1])
                }
                other => return Err(Error::UnsupportedGate(other.to_string())),
            }
        };
        c.push(gate)?;
    }
    circuit.ok_or_else(|| Error::Parse("missing qreg declaration".into()))
}

/// Replaces every CX (and each CX of a lowered SWAP) by an ECR with
/// single-qubit dressing. Equal to the input up to global phase.
pub fn rebase_to_ecr(c: &Circuit) -> Circuit {
    let mut gates = Vec::with_capacity(c.gates.len() * 4);
    let cx = |gates: &mut Vec<Gate>, a: usize, b: usize| {
        gates.extend([
            Gate::H(a),
            Gate::H(b),
            Gate::Ecr(a, b),
            Gate::H(a),
            Gate::Sdg(a),
            Gate::S(b),
            Gate::H(b),
            Gate::Z(b),
        ])
    };
    for g in &c.gates {
        match *g {
            Gate::Cx(a, b) => cx(&mut gates, a, b),
            Gate::Swap(a, b) => {
                cx(&mut gates, a, b);
                cx(&mut gates, b, a);
                cx(&mut gates, a, b);
            }
            other => gates.push(other),
        }
    }
    Circuit {
        width: c.width,
        gates,
        metadata: c.metadata.clone(),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CouplingMap {
    n_physical: usize,
    edges: BTreeSet<(usize, usize)>,
    /// Virtual → physical starting placement.
    pub layout: Vec<usize>,
}

impl CouplingMap {
    pub fn new(n_physical: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a == b || a >= n_physical || b >= n_physical {
                return Err(Error::InvalidParameter(format!("bad coupling edge ({a}, {b})")));
            }
            set.insert((a.min(b), a.max(b)));
        }
        Ok(CouplingMap {
            n_physical,
            edges: set,
            layout: (0..n_physical).collect(),
        })
    }

    pub fn line(n: usize) -> Result<Self> {
        CouplingMap::new(n, (1..n).map(|i| (i - 1, i)))
    }

    pub fn all_to_all(n: usize) -> Result<Self> {
        CouplingMap::new(n, (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))))
    }

    /// Qubit 1 in the middle of the bar, 0 and 2 at its ends, the stem
    /// `1 - 3 - 4 - ...` hanging below.
    pub fn t_shape(n: usize) -> Result<Self> {
        let mut edges = vec![(0, 1), (1, 2)];
        if n > 3 {
            edges.push((1, 3));
            edges.extend((4..n).map(|i| (i - 1, i)));
        }
        CouplingMap::new(n, edges.into_iter().filter(|&(a, b)| a < n && b < n))
    }

    /// Whitespace-separated `a b` pairs, one per line; `#` starts a comment.
    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut edges = Vec::new();
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let nums: Vec<usize> = line
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|s| !s.is_empty())
                .map(|s| s.parse().map_err(|_| Error::Parse(format!("bad edge line `{line}`"))))
                .collect::<Result<_>>()?;
            if nums.len() != 2 {
                return Err(Error::Parse(format!("bad edge line `{line}`")));
            }
            edges.push((nums[0], nums[1]));
        }
        let n = edges.iter().map(|&(a, b)| a.max(b) + 1).max().unwrap_or(0);
        CouplingMap::new(n, edges)
    }

    pub fn with_layout(mut self, layout: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; self.n_physical];
        for &p in &layout {
            if p >= self.n_physical || std::mem::replace(&mut seen[p], true) {
                return Err(Error::InvalidParameter("layout must be injective into the map".into()));
            }
        }
        self.layout = layout;
        Ok(self)
    }

    pub fn num_physical(&self) -> usize {
        self.n_physical
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn coupled(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    fn neighbors(&self, a: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().filter_map(move |&(x, y)| {
            if x == a {
                Some(y)
            } else if y == a {
                Some(x)
            } else {
                None
            }
        })
    }

    /// BFS path from `a` to `b`, smallest-index neighbors first.
    pub fn shortest_path(&self, a: usize, b: usize) -> Option<Vec<usize>> {
        let mut prev = vec![usize::MAX; self.n_physical];
        let mut queue = VecDeque::from([a]);
        prev[a] = a;
        while let Some(u) = queue.pop_front() {
            if u == b {
                let mut path = vec![b];
                let mut v = b;
                while v != a {
                    v = prev[v];
                    path.push(v);
                }
                path.reverse();
                return Some(path);
            }
            for w in self.neighbors(u) {
                if prev[w] == usize::MAX {
                    prev[w] = u;
                    queue.push_back(w);
                }
            }
        }
        None
    }

    pub fn distance(&self, a: usize, b: usize) -> Option<usize> {
        self.shortest_path(a, b).map(|p| p.len() - 1)
    }
}

/// Greedy SWAP insertion. For each non-local two-qubit gate one operand is
/// walked along a shortest path until adjacent; the operand to move is the
/// one leaving the next two-qubit gate closer, the second operand on ties.
/// The output acts on physical qubits and records the final placement.
pub fn route(c: &Circuit, map: &CouplingMap) -> Result<Circuit> {
    if map.layout.len() < c.width {
        return Err(Error::Routing(format!(
            "layout places {} qubits but the circuit has {}",
            map.layout.len(),
            c.width
        )));
    }
    let mut place: Vec<usize> = map.layout[..c.width].to_vec();
    let input_layout = place.clone();
    for (i, &a) in place.iter().enumerate() {
        for &b in &place[i + 1..] {
            if map.distance(a, b).is_none() {
                return Err(Error::Routing(format!(
                    "physical qubits {a} and {b} are not connected"
                )));
            }
        }
    }
    let mut out = Circuit::new(map.n_physical)?;
    out.metadata = c.metadata.clone();
    let pairs: Vec<(usize, (usize, usize))> = c
        .gates
        .iter()
        .enumerate()
        .filter_map(|(i, g)| g.pair().map(|p| (i, p)))
        .collect();
    let mut next_pair = 0;
    for (i, g) in c.gates.iter().enumerate() {
        if let Some((a, b)) = g.pair() {
            while next_pair < pairs.len() && pairs[next_pair].0 <= i {
                next_pair += 1;
            }
            let (pa, pb) = (place[a], place[b]);
            if !map.coupled(pa, pb) {
                let path = map
                    .shortest_path(pa, pb)
                    .ok_or_else(|| Error::Routing(format!("no path between {pa} and {pb}")))?;
                let hops = path.len() - 2;
                let walk = |from_b: bool| -> Vec<(usize, usize)> {
                    if from_b {
                        (0..hops).map(|k| (path[path.len() - 1 - k], path[path.len() - 2 - k])).collect()
                    } else {
                        (0..hops).map(|k| (path[k], path[k + 1])).collect()
                    }
                };
                let apply = |place: &mut Vec<usize>, swaps: &[(usize, usize)]| {
                    for &(x, y) in swaps {
                        for p in place.iter_mut() {
                            if *p == x {
                                *p = y;
                            } else if *p == y {
                                *p = x;
                            }
                        }
                    }
                };
                let score = |swaps: &[(usize, usize)]| -> usize {
                    let mut trial = place.clone();
                    apply(&mut trial, swaps);
                    pairs
                        .get(next_pair)
                        .and_then(|&(_, (u, v))| map.distance(trial[u], trial[v]))
                        .unwrap_or(0)
                };
                let move_b = walk(true);
                let move_a = walk(false);
                let swaps = if score(&move_a) < score(&move_b) {
                    move_a
                } else {
                    move_b
                };
                for &(x, y) in &swaps {
                    out.push(Gate::Swap(x.min(y), x.max(y)))?;
                }
                apply(&mut place, &swaps);
            }
        }
        out.push(g.remap(|q| place[q]))?;
    }
    out.metadata.output_permutation = Some(place);
    out.metadata.input_layout = Some(input_layout);
    Ok(out)
}

/// Largest physical register for which [`route_with_layout_search`] tries
/// every initial placement.
pub const LAYOUT_SEARCH_LIMIT: usize = 6;

fn permutations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    let mut used = vec![false; n];
    fn rec(n: usize, k: usize, cur: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for p in 0..n {
            if !used[p] {
                used[p] = true;
                cur.push(p);
                rec(n, k, cur, used, out);
                cur.pop();
                used[p] = false;
            }
        }
    }
    rec(n, k, &mut cur, &mut used, &mut out);
    out
}

/// Routes from every initial placement (small maps only, otherwise the
/// map's own layout) and keeps the result with the fewest two-qubit gates
/// after [`optimize_cx`]. Ties go to the lexicographically first layout.
pub fn route_with_layout_search(c: &Circuit, map: &CouplingMap) -> Result<Circuit> {
    if map.n_physical > LAYOUT_SEARCH_LIMIT || c.width > map.n_physical {
        return Ok(optimize_cx(&route(c, map)?));
    }
    let mut best: Option<Circuit> = None;
    for layout in permutations(map.n_physical, c.width) {
        let trial = map.clone().with_layout(layout)?;
        let Ok(r) = route(c, &trial) else { continue };
        let r = optimize_cx(&r);
        if best.as_ref().is_none_or(|b| r.two_qubit_count() < b.two_qubit_count()) {
            best = Some(r);
        }
    }
    best.ok_or_else(|| Error::Routing("no layout admits a route".into()))
}

/// Whether `g` commutes with `CX(ctrl, tgt)` by one of the cheap rules:
/// disjoint support, a diagonal gate on the control, `X` on the target, or a
/// CX sharing only the control or only the target.
fn commutes_with_cx(g: &Gate, ctrl: usize, tgt: usize) -> bool {
    match *g {
        Gate::Barrier => false,
        Gate::Z(q) | Gate::S(q) | Gate::Sdg(q) | Gate::Rz(q, _) => q != tgt,
        Gate::X(q) => q != ctrl,
        Gate::Cx(a, b) => a != tgt && b != ctrl,
        ref other => other.qubits().iter().all(|&q| q != ctrl && q != tgt),
    }
}

/// Index of an earlier (or later) live `CX(ctrl, tgt)` that can be moved next
/// to position `i`.
fn cx_partner(gates: &[Gate], alive: &[bool], i: usize, ctrl: usize, tgt: usize, forward: bool) -> Option<usize> {
    let target = Gate::Cx(ctrl, tgt);
    let mut k = i;
    loop {
        k = if forward { k + 1 } else { k.checked_sub(1)? };
        if k >= gates.len() {
            return None;
        }
        if !alive[k] {
            continue;
        }
        if gates[k] == target {
            return Some(k);
        }
        if !commutes_with_cx(&gates[k], ctrl, tgt) {
            return None;
        }
    }
}

fn swap_label(g: &Gate, a: usize, b: usize) -> Gate {
    g.remap(|q| if q == a { b } else if q == b { a } else { q })
}

/// Slot of the nearest CX on `{a, b}` reachable from slot `i` across
/// single-qubit gates only, plus the slots of those single-qubit gates.
fn swap_neighbour(slots: &[Vec<Gate>], i: usize, a: usize, b: usize, forward: bool) -> Option<(usize, Vec<usize>)> {
    let mut between = Vec::new();
    let mut k = i;
    loop {
        k = if forward { k + 1 } else { k.checked_sub(1)? };
        let slot = slots.get(k)?;
        let touches = slot
            .iter()
            .any(|g| matches!(g, Gate::Barrier) || g.qubits().iter().any(|&q| q == a || q == b));
        if !touches {
            continue;
        }
        match slot.as_slice() {
            [Gate::Cx(x, y)] if (*x == a && *y == b) || (*x == b && *y == a) => return Some((k, between)),
            [g] if !g.is_two_qubit() && !matches!(g, Gate::Barrier | Gate::Measure(_)) => between.push(k),
            _ => return None,
        }
    }
}

/// Lowers SWAPs to CXs and cancels pairs of identical CXs that commute next
/// to each other. A SWAP whose pair meets a CX across single-qubit gates
/// only is merged with it into two CXs, the single-qubit gates being
/// relabelled as they cross. Equal to the input as a unitary.
pub fn optimize_cx(c: &Circuit) -> Circuit {
    let mut slots: Vec<Vec<Gate>> = c.gates.iter().map(|g| vec![*g]).collect();
    for i in 0..slots.len() {
        let Some(&Gate::Swap(a, b)) = slots[i].first() else { continue };
        if let Some((j, between)) = swap_neighbour(&slots, i, a, b, false) {
            let Gate::Cx(x, y) = slots[j][0] else { unreachable!() };
            slots[j] = vec![Gate::Cx(y, x), Gate::Cx(x, y)];
            for k in between {
                slots[k][0] = swap_label(&slots[k][0], a, b);
            }
            slots[i].clear();
        } else if let Some((j, between)) = swap_neighbour(&slots, i, a, b, true) {
            let Gate::Cx(x, y) = slots[j][0] else { unreachable!() };
            slots[j] = vec![Gate::Cx(x, y), Gate::Cx(y, x)];
            for k in between {
                slots[k][0] = swap_label(&slots[k][0], a, b);
            }
            slots[i].clear();
        } else {
            slots[i] = vec![Gate::Cx(a, b), Gate::Cx(b, a), Gate::Cx(a, b)];
        }
    }
    let gates: Vec<Gate> = slots.into_iter().flatten().collect();
    let mut alive = vec![true; gates.len()];
    let mut changed = true;
    while changed {
        changed = false;
        for i in 0..gates.len() {
            if let (true, Gate::Cx(a, b)) = (alive[i], gates[i]) {
                if let Some(j) = cx_partner(&gates, &alive, i, a, b, false) {
                    alive[i] = false;
                    alive[j] = false;
                    changed = true;
                }
            }
        }
    }
    Circuit {
        width: c.width,
        gates: gates.into_iter().zip(alive).filter_map(|(g, a)| a.then_some(g)).collect(),
        metadata: c.metadata.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ps(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    #[test]
    fn two_qubit_counts() {
        let mut c = Circuit::new(3).unwrap();
        assert_eq!(c.two_qubit_count(), 0);
        c.push(Gate::Cx(0, 1)).unwrap();
        c.push(Gate::Rz(1, 0.3)).unwrap();
        c.push(Gate::Cx(0, 1)).unwrap();
        assert_eq!(c.two_qubit_count(), 2);
        let s = Circuit::from_gates(2, [Gate::Swap(0, 1)]).unwrap();
        assert_eq!(s.two_qubit_count(), 3);
    }

    #[test]
    fn malformed_gates_rejected() {
        let mut c = Circuit::new(2).unwrap();
        assert!(c.push(Gate::Cx(0, 0)).is_err());
        assert!(c.push(Gate::H(2)).is_err());
        assert!(c.push(Gate::Rz(0, f64::NAN)).is_err());
        assert!(Circuit::new(0).is_err());
    }

    #[test]
    fn clifford_images() {
        let h = Gate::H(0);
        assert_eq!(h.conjugate(&ps("X")).unwrap(), ps("Z"));
        assert_eq!(h.conjugate(&ps("Y")).unwrap(), ps("-Y"));
        assert_eq!(Gate::S(0).conjugate(&ps("X")).unwrap(), ps("Y"));
        assert_eq!(Gate::S(0).conjugate(&ps("Y")).unwrap(), ps("-X"));
        assert_eq!(Gate::Sdg(0).conjugate(&ps("Y")).unwrap(), ps("X"));
        assert_eq!(Gate::Cx(0, 1).conjugate(&ps("XI")).unwrap(), ps("XX"));
        assert_eq!(Gate::Cx(0, 1).conjugate(&ps("IZ")).unwrap(), ps("ZZ"));
        assert_eq!(Gate::Cx(0, 1).conjugate(&ps("YY")).unwrap(), ps("-XZ"));
        assert_eq!(Gate::Swap(0, 2).conjugate(&ps("XIZ")).unwrap(), ps("ZIX"));
        assert!(Gate::Rz(0, 1.0).conjugate(&ps("X")).is_err());
    }

    #[test]
    fn swap_merges_with_neighbouring_cx() {
        let c = Circuit::from_gates(3, [Gate::Cx(0, 1), Gate::H(0), Gate::Rz(1, 0.2), Gate::Swap(0, 1), Gate::H(2)]).unwrap();
        let o = optimize_cx(&c);
        assert_eq!(o.two_qubit_count(), 2);
        assert_eq!(&o.gates()[..2], &[Gate::Cx(1, 0), Gate::Cx(0, 1)]);
        assert!(o.gates().contains(&Gate::H(1)) && o.gates().contains(&Gate::Rz(0, 0.2)));
        let lone = Circuit::from_gates(2, [Gate::Swap(0, 1)]).unwrap();
        assert_eq!(optimize_cx(&lone).two_qubit_count(), 3);
        let pair = Circuit::from_gates(2, [Gate::Cx(0, 1), Gate::Rz(0, 0.4), Gate::X(1), Gate::Cx(0, 1)]).unwrap();
        assert_eq!(optimize_cx(&pair).two_qubit_count(), 0);
    }

    #[test]
    fn format_angle_matches_printf_g17() {
        assert_eq!(format_angle(std::f64::consts::PI), "3.1415926535897931");
        assert_eq!(format_angle(0.5), "0.5");
        assert_eq!(format_angle(-0.25), "-0.25");
        assert_eq!(format_angle(0.0), "0");
        assert_eq!(format_angle(1e-5), "1.0000000000000001e-05");
        assert_eq!(format_angle(1e20), "1e+20");
        assert_eq!(format_angle(0.1), "0.10000000000000001");
    }

    #[test]
    fn qasm_format() {
        let empty = Circuit::new(2).unwrap();
        assert_eq!(
            export_qasm2(&empty).unwrap(),
            "OPENQASM 2.0;\ninclude \"qelib1.inc\";\nqreg q[2];\n"
        );
        let c = Circuit::from_gates(2, [Gate::Cx(0, 1), Gate::Rz(0, std::f64::consts::PI)]).unwrap();
        let text = export_qasm2(&c).unwrap();
        assert!(text.contains("cx q[0],q[1];\n"));
        assert!(text.contains("rz(3.1415926535897931) q[0];\n"));
        let e = Circuit::from_gates(2, [Gate::Ecr(0, 1)]).unwrap();
        assert!(matches!(export_qasm2(&e), Err(Error::UnsupportedGate(_))));
    }

    #[test]
    fn qasm_round_trip() {
        let c = Circuit::from_gates(
            3,
            [
                Gate::H(0),
                Gate::S(1),
                Gate::Sdg(2),
                Gate::X(0),
                Gate::Y(1),
                Gate::Z(2),
                Gate::Rz(1, -0.123456789012345678),
                Gate::Rz(0, 1e-300),
                Gate::Cx(2, 0),
                Gate::Swap(1, 2),
                Gate::Barrier,
                Gate::Measure(0),
                Gate::Measure(2),
            ],
        )
        .unwrap();
        let back = parse_qasm2(&export_qasm2(&c).unwrap()).unwrap();
        assert_eq!(back.gates(), c.gates());
        assert_eq!(back.width(), 3);
    }

    #[test]
    fn parser_rejects_garbage() {
        assert!(parse_qasm2("OPENQASM 2.0;\nh q[0];").is_err());
        assert!(parse_qasm2("qreg q[1];\nfoo q[0];").is_err());
        assert!(parse_qasm2("qreg q[1];\ncx q[0];").is_err());
    }

    #[test]
    fn inverse_reverses_and_flips() {
        let c = Circuit::from_gates(2, [Gate::S(0), Gate::Rz(1, 0.4), Gate::Cx(0, 1)]).unwrap();
        let inv = c.inverse().unwrap();
        assert_eq!(inv.gates(), &[Gate::Cx(0, 1), Gate::Rz(1, -0.4), Gate::Sdg(0)]);
        let m = Circuit::from_gates(1, [Gate::Measure(0)]).unwrap();
        assert!(m.inverse().is_err());
    }

    #[test]
    fn rebase_counts() {
        let c = Circuit::from_gates(2, [Gate::Cx(0, 1), Gate::H(0), Gate::Swap(0, 1)]).unwrap();
        let r = rebase_to_ecr(&c);
        assert_eq!(r.count("cx"), 0);
        assert_eq!(r.count("swap"), 0);
        assert_eq!(r.count("ecr"), 4);
        assert_eq!(r.two_qubit_count(), c.two_qubit_count());
        let plain = Circuit::from_gates(2, [Gate::H(0), Gate::Rz(1, 0.2)]).unwrap();
        assert_eq!(rebase_to_ecr(&plain), plain);
    }

    #[test]
    fn coupling_maps() {
        let line = CouplingMap::line(3).unwrap();
        assert!(line.coupled(1, 0));
        assert!(!line.coupled(0, 2));
        assert_eq!(line.shortest_path(0, 2).unwrap(), vec![0, 1, 2]);
        let t = CouplingMap::t_shape(5).unwrap();
        assert_eq!(t.distance(0, 4), Some(3));
        let parsed = CouplingMap::from_edge_list("# path\n0 1\n1 2\n").unwrap();
        assert_eq!(parsed, line);
        assert!(CouplingMap::from_edge_list("0 1 2\n").is_err());
        assert_eq!(CouplingMap::all_to_all(4).unwrap().edges().count(), 6);
    }

    #[test]
    fn route_line_example() {
        let c = Circuit::from_gates(3, [Gate::Cx(0, 2)]).unwrap();
        let r = route(&c, &CouplingMap::line(3).unwrap()).unwrap();
        assert_eq!(r.gates(), &[Gate::Swap(1, 2), Gate::Cx(0, 1)]);
        assert_eq!(r.two_qubit_count(), 4);
        assert_eq!(r.metadata.output_permutation, Some(vec![0, 2, 1]));
    }

    #[test]
    fn route_local_is_identity() {
        let c = Circuit::from_gates(3, [Gate::Cx(0, 1), Gate::H(2), Gate::Cx(2, 1)]).unwrap();
        let r = route(&c, &CouplingMap::line(3).unwrap()).unwrap();
        assert_eq!(r.gates(), c.gates());
    }

    #[test]
    fn route_rejects_disconnected() {
        let map = CouplingMap::new(3, [(0, 1)]).unwrap();
        let c = Circuit::from_gates(3, [Gate::Cx(0, 2)]).unwrap();
        assert!(matches!(route(&c, &map), Err(Error::Routing(_))));
    }
}
