//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines reach stdout unfiltered.
//! Exits nonzero if any criterion fails, except criteria listed in
//! `KNOWN_UNATTAINABLE`, which still print FAIL together with the reason.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use syk_cli::commands::table1_rows;
use syk_core::circuit::Gate;
use syk_core::linalg::{approx_eq, spectral_norm, CMatrix};
use syk_core::mitigation::{
    self_mitigation_with_plan, verify_twirl_table, MitigationConfig, TwirlGate, TwirlTable,
};
use syk_core::observables::{
    disorder_average, haar_trace_estimate, otoc_exact, otoc_population, otoc_randomized,
    protocol_samples, return_probability_curve, Evolution, OtocConfig, Placement,
};
use syk_core::pauli::{PauliSum, WeightedPauli};
use syk_core::sim::{apply_circuit, circuit_unitary, NoiseModel, StateVector};
use syk_core::syk::{build_hamiltonian, majorana_matrix, sample_couplings, Hamiltonian, SykParams};
use syk_core::synth::{diagonalize_cluster, synth_diagonal_evolution, trotter_circuit, TrotterPlan};

/// Criterion 4's plateau target assumes the return probability spreads over
/// the whole 2ⁿ-dimensional space. `|0…0⟩` lies in a single fermion-parity
/// sector of dimension 2ⁿ⁻¹, so the exact late-time average sits far above
/// 1/8 for N=6.
const KNOWN_UNATTAINABLE: &[(u32, &str)] = &[(
    4,
    "plateau: H conserves fermion parity, so |000> only explores a 4-dimensional sector",
)];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn instance(n: usize, seed: u64) -> Hamiltonian {
    build_hamiltonian(&sample_couplings(SykParams::new(n, seed)).unwrap()).unwrap()
}

fn wp(s: &str, c: f64) -> WeightedPauli {
    WeightedPauli::new(s.parse().unwrap(), c).unwrap()
}

fn criterion_1() -> Outcome {
    let rows = table1_rows(4, 20).unwrap();
    let published: [(usize, usize, usize); 9] = [
        (4, 1, 2),
        (6, 5, 30),
        (8, 6, 110),
        (10, 23, 498),
        (12, 57, 1504),
        (14, 92, 3560),
        (16, 116, 6812),
        (18, 175, 11962),
        (20, 246, 19984),
    ];
    let mut ok = rows.len() == published.len();
    let mut detail = Vec::new();
    for (row, &(n, cl, g)) in rows.iter().zip(&published) {
        let strings = syk_core::syk::binomial(n as u64, 4) as usize;
        let good = if n <= 8 {
            row.n_majorana == n && row.strings == strings && row.clusters == cl && row.two_qubit == g
        } else {
            row.n_majorana == n
                && row.strings == strings
                && row.clusters as f64 <= 1.15 * cl as f64
                && row.two_qubit as f64 <= 1.15 * g as f64
        };
        ok &= good;
        detail.push(format!("N={n}:{}/{}/{}", row.strings, row.clusters, row.two_qubit));
    }
    outcome(ok, detail.join(" "))
}

fn criterion_2() -> Outcome {
    let (a1, a11, a14) = (0.83, -0.41, 0.57);
    let h1 = [wp("IZZ", a1), wp("ZXX", a11), wp("ZYY", a14)];
    let d = diagonalize_cluster(&h1).unwrap();
    let images = d.diag_terms == [wp("IZI", a1), wp("ZIZ", a11), wp("ZZZ", -a14)];
    let cost = d.two_qubit_cost();
    let diag_cx = synth_diagonal_evolution(&d.diag_terms, 1.0).unwrap().two_qubit_count();
    let dt = 0.61;
    let u = circuit_unitary(&d.evolution(dt).unwrap()).unwrap();
    let h = Hamiltonian::from_sum(PauliSum::from_terms(3, h1).unwrap());
    let exact = h.propagator(dt).unwrap();
    let err = spectral_norm(&(&u - &exact));
    outcome(
        images && cost == 6 && d.clifford.gates() == [Gate::Cx(2, 1), Gate::H(2)] && err < 1e-10,
        format!("images={images} cost={cost} (diag {diag_cx}) ||U-exp||={err:.1e}"),
    )
}

fn criterion_3() -> Outcome {
    let h = instance(6, 1);
    let t = 6.0;
    let exact = h.propagator(t).unwrap();
    let err = |r: usize| spectral_norm(&(circuit_unitary(&trotter_circuit(&h, t, r).unwrap()).unwrap() - &exact));
    let rs = [16usize, 32, 64, 128];
    let errs: Vec<f64> = rs.iter().map(|&r| err(r)).collect();
    let ratios: Vec<f64> = errs.windows(2).map(|w| w[0] / w[1]).collect();
    let ok = ratios.iter().all(|q| (1.7..=2.3).contains(q));
    let shown: Vec<String> = rs
        .windows(2)
        .zip(&ratios)
        .map(|(w, q)| format!("r={}->{}: {q:.3}", w[0], w[1]))
        .collect();
    outcome(ok, shown.join(", "))
}

fn criterion_4() -> Outcome {
    let dt = 0.25;
    let times: Vec<f64> = (0..=400).map(|k| k as f64 * dt).collect();
    let curves: Vec<_> = (0..100u64)
        .map(|seed| return_probability_curve(&instance(6, 1000 + seed), &times).unwrap())
        .collect();
    let avg = disorder_average(&curves).unwrap();
    let late: Vec<f64> = avg
        .times
        .iter()
        .zip(&avg.values)
        .filter(|(t, _)| **t >= 50.0)
        .map(|(_, v)| *v)
        .collect();
    let plateau = late.iter().sum::<f64>() / late.len() as f64;
    let plateau_ok = (plateau - 0.125).abs() <= 0.3 * 0.125;
    // slope region: the averaged curve falls monotonically from t=0 to its
    // first minimum, which must lie near t=10
    let first_min = avg
        .values
        .windows(2)
        .position(|w| w[1] >= w[0])
        .unwrap_or(avg.values.len() - 1);
    let t_min = avg.times[first_min];
    let slope_ok = (5.0..=15.0).contains(&t_min);
    outcome(
        plateau_ok && slope_ok,
        format!(
            "plateau={plateau:.4} (target 0.125±30%: {}) monotone slope to t={t_min:.2} ({})",
            if plateau_ok { "ok" } else { "miss" },
            if slope_ok { "ok" } else { "miss" }
        ),
    )
}

fn criterion_5() -> Outcome {
    let h = instance(6, 1);
    let plan = TrotterPlan::for_hamiltonian(&h, 1.5).unwrap();
    let cfg = MitigationConfig {
        seed: 17,
        ..Default::default()
    };
    let noise = NoiseModel::depolarizing(0.01);
    let zero = StateVector::zero(3).unwrap();
    let mut ok = true;
    let mut detail = Vec::new();
    for r in [2usize, 4, 6, 8] {
        let ideal = apply_circuit(&zero, &plan.circuit(r).unwrap()).unwrap().probabilities()[0];
        let e = self_mitigation_with_plan(&plan, r, &noise, &cfg, &[r as u64]).unwrap();
        let z = (e.mitigated - ideal) / e.stderr;
        let depressed = e.raw < ideal && (e.raw - 0.125).abs() < (ideal - 0.125).abs();
        ok &= z.abs() <= 3.0 && depressed;
        detail.push(format!(
            "r={r}: ideal={ideal:.4} raw={:.4} mit={:.4}±{:.4} ({z:+.2}σ)",
            e.raw, e.mitigated, e.stderr
        ));
    }
    let full = self_mitigation_with_plan(
        &plan,
        8,
        &NoiseModel::depolarizing(15.0 / 16.0),
        &MitigationConfig {
            self_mitigation: false,
            ..cfg
        },
        &[99],
    )
    .unwrap();
    let zf = (full.raw - 0.125) / full.raw_stderr;
    ok &= zf.abs() <= 3.0;
    detail.push(format!("full depolarization raw={:.4} ({zf:+.2}σ)", full.raw));
    outcome(ok, detail.join("; "))
}

fn criterion_6() -> Outcome {
    let cx = TwirlTable::generate(TwirlGate::Cx);
    let ecr = TwirlTable::generate(TwirlGate::Ecr);
    let key = |e: &syk_core::mitigation::TwirlEntry| e.paulis.map(|p| p.symbol());
    let mut a = ecr.entries.clone();
    let mut b = TwirlTable::ecr_reference().entries;
    a.sort_by_key(key);
    b.sort_by_key(key);
    let ok = cx.entries.len() == 16
        && ecr.entries.len() == 16
        && verify_twirl_table(&cx)
        && verify_twirl_table(&ecr)
        && a == b;
    outcome(
        ok,
        format!(
            "cx={} ecr={} reference match={}",
            cx.entries.len(),
            ecr.entries.len(),
            a == b
        ),
    )
}

fn criterion_7() -> Outcome {
    let h = instance(6, 1);
    let times = [0.0, 1.5, 3.0, 4.5, 6.0];
    let n_u = |t: f64| if t <= 1.5 { 600 } else { 900 };
    let mut sq = 0.0;
    let mut bound_sq = 0.0;
    let mut b_ok = true;
    let mut detail = Vec::new();
    let mut c_ok = false;
    for &t in &times {
        let exact_cfg = OtocConfig {
            n_unitaries: n_u(t),
            shots: None,
            seed: 31,
            ..Default::default()
        };
        let pop = otoc_population(&h, &exact_cfg, t).unwrap();
        let a = otoc_randomized(&h, &exact_cfg, t).unwrap();
        sq += (a.value - pop).powi(2);
        bound_sq += (2.0 / (n_u(t) as f64).sqrt()).powi(2);
        let shot_cfg = OtocConfig {
            n_unitaries: 600,
            shots: Some(4000),
            seed: 32,
            ..Default::default()
        };
        let f = otoc_exact(&h, &shot_cfg, t).unwrap().f;
        let b = otoc_randomized(&h, &shot_cfg, t).unwrap();
        let z = (b.value - f) / b.stderr;
        b_ok &= z.abs() <= 3.0;
        if t == 0.0 {
            c_ok = ((b.value - 1.0) / b.stderr).abs() <= 3.0;
        }
        detail.push(format!("t={t}: F={f:.3} O={:.3}±{:.3} ({z:+.2}σ)", b.value, b.stderr));
    }
    let rms = (sq / times.len() as f64).sqrt();
    let bound = (bound_sq / times.len() as f64).sqrt();
    let a_ok = rms <= bound;
    outcome(
        a_ok && b_ok && c_ok,
        format!(
            "(a) rms={rms:.4} <= {bound:.4}: {a_ok}; (b) {b_ok}; (c) {c_ok}; {}",
            detail.join(", ")
        ),
    )
}

fn criterion_8() -> Outcome {
    let h = instance(4, 3);
    let cfg = OtocConfig {
        w: Placement::z(1),
        v: Placement::z(0),
        n_unitaries: 10_000,
        shots: None,
        evolution: Evolution::Exact,
        seed: 41,
        ..Default::default()
    };
    let t = 1.5;
    let samples = protocol_samples(&h, &cfg, t, &[8]).unwrap();
    let (est, se) = haar_trace_estimate(&samples, 2);
    let trace = 4.0 * otoc_exact(&h, &cfg, t).unwrap().f;
    let rel = (est - trace).abs() / trace.abs();
    outcome(
        rel <= 0.02,
        format!("estimate={est:.4}±{se:.4} trace={trace:.4} relative error={:.2}%", 100.0 * rel),
    )
}

fn criterion_9() -> Outcome {
    let mut worst: f64 = 0.0;
    for n in (4..=12).step_by(2) {
        let chis: Vec<CMatrix> = (1..=n).map(|i| majorana_matrix(i, n).unwrap()).collect();
        let dim = chis[0].nrows();
        for i in 0..n {
            for j in i..n {
                let anti = &chis[i] * &chis[j] + &chis[j] * &chis[i];
                let want = if i == j { CMatrix::identity(dim, dim) } else { CMatrix::zeros(dim, dim) };
                let err = (anti - want).iter().map(|z| z.norm()).fold(0.0, f64::max);
                worst = worst.max(err);
            }
        }
    }
    let mut herm_ok = true;
    for k in 0..20u64 {
        let n = [6, 8, 10, 12][k as usize % 4];
        let h = instance(n, 500 + k);
        let m = h.exact_matrix().unwrap();
        herm_ok &= approx_eq(m, &m.adjoint(), 1e-12) && m.trace().norm() < 1e-12;
    }
    outcome(
        worst <= 1e-12 && herm_ok,
        format!("max anticommutator error={worst:.1e}, hermitian+traceless={herm_ok}"),
    )
}

fn run_cli(args: &[&str], threads: usize) {
    let status = Command::new(env!("CARGO_BIN_EXE_syk"))
        .args(args)
        .env("RAYON_NUM_THREADS", threads.to_string())
        .stdout(std::process::Stdio::null())
        .status()
        .unwrap();
    assert!(status.success(), "syk {args:?} failed");
}

fn read_tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn criterion_10() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let runs: Vec<(&str, Vec<&str>)> = vec![
        ("table1", vec!["table1", "--n-max", "10"]),
        ("compile", vec!["compile", "--seeds", "1,2", "--route", "path3"]),
        (
            "return-prob",
            vec!["return-prob", "--seeds", "1,2", "--steps", "0,2,4", "--shots", "128", "--twirls", "4", "--readout", "0.02"],
        ),
        ("otoc", vec!["otoc", "--seeds", "3", "--steps", "0,1,2", "--n-unitaries", "60", "--otoc-shots", "200"]),
        ("twirl-verify", vec!["twirl-verify"]),
    ];
    let mut ok = true;
    let mut names = Vec::new();
    for (name, args) in &runs {
        let mut trees = Vec::new();
        let out = tmp.path().join(name);
        for threads in [1, 3] {
            let mut full: Vec<&str> = args.clone();
            let out_s = out.to_string_lossy().into_owned();
            full.push("--out");
            full.push(&out_s);
            run_cli(&full, threads);
            ok &= syk_cli::manifest::verify_manifest(&out).unwrap();
            trees.push(read_tree(&out));
        }
        let same = trees[0] == trees[1] && !trees[0].is_empty();
        ok &= same;
        names.push(format!("{name}={}", if same { "identical" } else { "differs" }));
    }
    outcome(ok, names.join(" "))
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome, Duration); 10] = [
        (1, "resource table", criterion_1, Duration::from_secs(60)),
        (2, "worked cluster example", criterion_2, Duration::from_secs(5)),
        (3, "trotter convergence", criterion_3, Duration::from_secs(10)),
        (4, "return-probability physics", criterion_4, Duration::from_secs(120)),
        (5, "mitigation pipeline", criterion_5, Duration::from_secs(600)),
        (6, "twirl tables", criterion_6, Duration::from_secs(1)),
        (7, "otoc protocol", criterion_7, Duration::from_secs(900)),
        (8, "haar trace identity", criterion_8, Duration::from_secs(30)),
        (9, "majorana algebra", criterion_9, Duration::from_secs(60)),
        (10, "determinism", criterion_10, Duration::from_secs(600)),
    ];
    let mut unexpected = Vec::new();
    for (id, name, run, budget) in criteria {
        let start = Instant::now();
        let o = run();
        let took = start.elapsed();
        let in_time = took <= budget;
        let pass = o.pass && in_time;
        println!(
            "criterion {id:>2} {}: {name} [{:.2}s / {}s] {}",
            if pass { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            budget.as_secs(),
            o.detail
        );
        if !pass {
            match KNOWN_UNATTAINABLE.iter().find(|(k, _)| *k == id) {
                Some((_, why)) => println!("             known deviation: {why}"),
                None => unexpected.push(id),
            }
        }
    }
    if !unexpected.is_empty() {
        println!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
