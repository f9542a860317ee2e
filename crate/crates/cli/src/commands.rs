use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use syk_core::circuit::{export_qasm2, format_angle, route_with_layout_search, Circuit};
use syk_core::clustering;
use syk_core::mitigation::{verify_twirl_table, TwirlGate, TwirlTable};
use syk_core::observables::{
    disorder_average, otoc_exact, otoc_randomized, return_probability_exact, return_probability_pipeline,
    return_probability_trotter, TimeSeries,
};
use syk_core::sim::NoiseModel;
use syk_core::syk::{build_hamiltonian, sample_couplings, Hamiltonian, SykInstance};
use syk_core::synth::{resource_table, resource_table_csv, resource_table_text, ResourceRow, TrotterPlan};

use crate::config::ExperimentConfig;
use crate::manifest::{ArtifactWriter, RunManifest};
use crate::CliError;

#[derive(Serialize)]
struct Table1Echo {
    n_min: usize,
    n_max: usize,
}

pub fn table1_rows(n_min: usize, n_max: usize) -> Result<Vec<ResourceRow>, CliError> {
    let ns: Vec<usize> = (n_min..=n_max).filter(|n| n % 2 == 0).collect();
    if ns.is_empty() {
        return Err(CliError::Usage(format!("empty range {n_min}..={n_max}")));
    }
    Ok(resource_table(&ns)?)
}

pub fn cmd_table1(n_min: usize, n_max: usize, out: &Path) -> Result<(Vec<ResourceRow>, RunManifest), CliError> {
    let rows = table1_rows(n_min, n_max)?;
    let mut w = ArtifactWriter::new(out)?;
    w.write("table1.csv", &resource_table_csv(&rows))?;
    w.write("table1.txt", &resource_table_text(&rows))?;
    let m = w.finish("table1", &Table1Echo { n_min, n_max })?;
    Ok((rows, m))
}

fn instance(cfg: &ExperimentConfig, seed: u64) -> Result<(SykInstance, Hamiltonian), CliError> {
    let inst = sample_couplings(cfg.model.params(seed))?;
    let h = build_hamiltonian(&inst)?;
    Ok((inst, h))
}

#[derive(Clone, Debug, Serialize)]
pub struct CompileSummary {
    pub seed: u64,
    pub clusters: usize,
    pub step_cx: usize,
    pub evolution_steps: usize,
    pub evolution_cx: usize,
    pub routed_two_qubit: Option<usize>,
}

/// QASM for one step and for `max(steps)` steps, the cluster listing and,
/// when a route is configured, the routed evolution.
pub fn cmd_compile(cfg: &ExperimentConfig) -> Result<(Vec<CompileSummary>, RunManifest), CliError> {
    cfg.validate()?;
    let mut w = ArtifactWriter::new(&cfg.output)?;
    let r = cfg.compile.steps.iter().copied().max().unwrap_or(1).max(1);
    let map = cfg.coupling_map()?;
    let mut summaries = Vec::new();
    for &seed in &cfg.model.seeds {
        let (inst, h) = instance(cfg, seed)?;
        let part = clustering::partition(h.sum())?;
        let plan = TrotterPlan::new(&h, &part, cfg.compile.dt)?;
        let mut step = plan.step()?;
        step.metadata.name = format!("syk_n{}_seed{seed}_step", cfg.model.n_majorana);
        let mut evo = plan.circuit(r)?;
        evo.metadata.name = format!("syk_n{}_seed{seed}_r{r}", cfg.model.n_majorana);
        w.write(&format!("instance_seed{seed}.json"), &(inst.to_json()? + "\n"))?;
        w.write(&format!("clusters_seed{seed}.txt"), &part.dump(h.sum()))?;
        w.write(&format!("step_seed{seed}.qasm"), &export_qasm2(&step)?)?;
        w.write(&format!("evolution_seed{seed}.qasm"), &export_qasm2(&evo)?)?;
        let routed_two_qubit = match &map {
            Some(m) => {
                let routed: Circuit = route_with_layout_search(&evo, m)?;
                w.write(&format!("evolution_seed{seed}_routed.qasm"), &export_qasm2(&routed)?)?;
                Some(routed.two_qubit_count())
            }
            None => None,
        };
        summaries.push(CompileSummary {
            seed,
            clusters: part.count(),
            step_cx: step.count("cx"),
            evolution_steps: r,
            evolution_cx: evo.count("cx"),
            routed_two_qubit,
        });
    }
    w.write("compile_summary.json", &(serde_json::to_string_pretty(&summaries)? + "\n"))?;
    let m = w.finish("compile", cfg)?;
    Ok((summaries, m))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReturnProbPoint {
    pub t: f64,
    pub steps: usize,
    pub exact: f64,
    pub trotter: f64,
    pub raw: Option<f64>,
    pub raw_stderr: Option<f64>,
    pub p_hat: Option<f64>,
    pub mitigated: Option<f64>,
    pub stderr: Option<f64>,
}

fn opt(x: Option<f64>) -> String {
    x.map(format_angle).unwrap_or_default()
}

fn points_csv(points: &[ReturnProbPoint]) -> String {
    let mut out = String::from("t,steps,exact,trotter,raw,raw_stderr,p_hat,mitigated,stderr\n");
    for p in points {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            format_angle(p.t),
            p.steps,
            format_angle(p.exact),
            format_angle(p.trotter),
            opt(p.raw),
            opt(p.raw_stderr),
            opt(p.p_hat),
            opt(p.mitigated),
            opt(p.stderr)
        )
        .unwrap();
    }
    out
}

/// Return probability on the step grid. With `noisy = false` only the exact
/// and noiseless compiled values are produced.
pub fn return_prob_points(
    cfg: &ExperimentConfig,
    seed: u64,
    noisy: bool,
) -> Result<Vec<ReturnProbPoint>, CliError> {
    let (_, h) = instance(cfg, seed)?;
    let dt = cfg.compile.dt;
    let plan = TrotterPlan::for_hamiltonian(&h, dt)?;
    let noise: NoiseModel = cfg.noise_model();
    let mcfg = cfg.mitigation_config()?;
    cfg.compile
        .steps
        .iter()
        .map(|&r| {
            let t = dt * r as f64;
            let exact = return_probability_exact(&h, t)?;
            let trotter = if r == 0 { 1.0 } else { return_probability_trotter(&plan, r)? };
            let mut p = ReturnProbPoint {
                t,
                steps: r,
                exact,
                trotter,
                raw: None,
                raw_stderr: None,
                p_hat: None,
                mitigated: None,
                stderr: None,
            };
            if noisy && r > 0 {
                let e = return_probability_pipeline(&h, t, r, &noise, &mcfg, &[seed, r as u64])?;
                p.raw = Some(e.raw);
                p.raw_stderr = Some(e.raw_stderr);
                p.p_hat = Some(e.p_hat);
                p.mitigated = Some(e.mitigated);
                p.stderr = Some(e.stderr);
            }
            Ok(p)
        })
        .collect()
}

pub fn cmd_return_prob(cfg: &ExperimentConfig, noisy: bool) -> Result<RunManifest, CliError> {
    cfg.validate()?;
    let mut w = ArtifactWriter::new(&cfg.output)?;
    let per_seed: Vec<Vec<ReturnProbPoint>> = cfg
        .model
        .seeds
        .par_iter()
        .map(|&s| return_prob_points(cfg, s, noisy))
        .collect::<Result<_, _>>()?;
    let times: Vec<f64> = cfg.compile.steps.iter().map(|&r| cfg.compile.dt * r as f64).collect();
    let mut exact_curves = Vec::new();
    let mut mitigated_curves = Vec::new();
    for (&seed, points) in cfg.model.seeds.iter().zip(&per_seed) {
        w.write(&format!("return_prob_seed{seed}.csv"), &points_csv(points))?;
        w.write(
            &format!("return_prob_seed{seed}.json"),
            &(serde_json::to_string_pretty(points)? + "\n"),
        )?;
        exact_curves.push(TimeSeries::exact(times.clone(), points.iter().map(|p| p.exact).collect())?);
        if noisy {
            mitigated_curves.push(TimeSeries::new(
                times.clone(),
                points.iter().map(|p| p.mitigated.unwrap_or(1.0)).collect(),
                points.iter().map(|p| p.stderr.unwrap_or(0.0)).collect(),
            )?);
        }
    }
    let avg = disorder_average(&exact_curves)?;
    w.write("return_prob_exact_average.csv", &avg.to_csv())?;
    w.write("return_prob_exact_average.json", &(avg.to_json()? + "\n"))?;
    if noisy {
        let avg = disorder_average(&mitigated_curves)?;
        w.write("return_prob_mitigated_average.csv", &avg.to_csv())?;
        w.write("return_prob_mitigated_average.json", &(avg.to_json()? + "\n"))?;
    }
    w.finish("return-prob", cfg)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OtocPoint {
    pub t: f64,
    pub exact_f: f64,
    pub exact_c: f64,
    pub value: f64,
    pub stderr: f64,
    pub n_unitaries: usize,
}

pub fn otoc_points(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<OtocPoint>, CliError> {
    let (_, h) = instance(cfg, seed)?;
    cfg.compile
        .steps
        .iter()
        .map(|&r| {
            let t = cfg.compile.dt * r as f64;
            let mut oc = cfg.otoc_config(t);
            oc.seed ^= seed;
            let ex = otoc_exact(&h, &oc, t)?;
            let est = otoc_randomized(&h, &oc, t)?;
            Ok(OtocPoint {
                t,
                exact_f: ex.f,
                exact_c: ex.c,
                value: est.value,
                stderr: est.stderr,
                n_unitaries: oc.n_unitaries,
            })
        })
        .collect()
}

pub fn cmd_otoc(cfg: &ExperimentConfig) -> Result<RunManifest, CliError> {
    cfg.validate()?;
    let mut w = ArtifactWriter::new(&cfg.output)?;
    let times: Vec<f64> = cfg.compile.steps.iter().map(|&r| cfg.compile.dt * r as f64).collect();
    let mut curves = Vec::new();
    for &seed in &cfg.model.seeds {
        let points = otoc_points(cfg, seed)?;
        let mut csv = String::from("t,exact_f,exact_c,value,stderr,n_unitaries\n");
        for p in &points {
            writeln!(
                csv,
                "{},{},{},{},{},{}",
                format_angle(p.t),
                format_angle(p.exact_f),
                format_angle(p.exact_c),
                format_angle(p.value),
                format_angle(p.stderr),
                p.n_unitaries
            )
            .unwrap();
        }
        w.write(&format!("otoc_seed{seed}.csv"), &csv)?;
        w.write(&format!("otoc_seed{seed}.json"), &(serde_json::to_string_pretty(&points)? + "\n"))?;
        curves.push(TimeSeries::new(
            times.clone(),
            points.iter().map(|p| p.value).collect(),
            points.iter().map(|p| p.stderr).collect(),
        )?);
    }
    let avg = disorder_average(&curves)?;
    w.write("otoc_average.csv", &avg.to_csv())?;
    w.write("otoc_average.json", &(avg.to_json()? + "\n"))?;
    w.finish("otoc", cfg)
}

#[derive(Clone, Debug, Serialize)]
pub struct TwirlReport {
    pub gate: TwirlGate,
    pub generated: usize,
    pub verified: bool,
    /// Reference table agrees with brute force (ECR only).
    pub matches_reference: Option<bool>,
}

fn table_text(t: &TwirlTable) -> String {
    let mut out = String::new();
    for e in &t.entries {
        let s: String = e.paulis.iter().map(|p| p.symbol()).collect();
        writeln!(out, "{s} {}", if e.phase_flip { "pi" } else { "0" }).unwrap();
    }
    out
}

pub fn cmd_twirl_verify(out: &Path) -> Result<(Vec<TwirlReport>, RunManifest), CliError> {
    let mut w = ArtifactWriter::new(out)?;
    let mut reports = Vec::new();
    for gate in [TwirlGate::Cx, TwirlGate::Ecr] {
        let gen = TwirlTable::generate(gate);
        let matches_reference = (gate == TwirlGate::Ecr).then(|| {
            let mut a = gen.entries.clone();
            let mut b = TwirlTable::ecr_reference().entries;
            let key = |e: &syk_core::mitigation::TwirlEntry| e.paulis.map(|p| p.symbol());
            a.sort_by_key(key);
            b.sort_by_key(key);
            a == b && verify_twirl_table(&TwirlTable::ecr_reference())
        });
        let name = match gate {
            TwirlGate::Cx => "cx",
            TwirlGate::Ecr => "ecr",
        };
        w.write(&format!("twirl_{name}.txt"), &table_text(&gen))?;
        reports.push(TwirlReport {
            gate,
            generated: gen.entries.len(),
            verified: verify_twirl_table(&gen),
            matches_reference,
        });
    }
    w.write("twirl_report.json", &(serde_json::to_string_pretty(&reports)? + "\n"))?;
    let m = w.finish("twirl-verify", &serde_json::Value::Null)?;
    Ok((reports, m))
}
