use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use syk_cli::commands;
use syk_cli::{CliError, ExperimentConfig};
use syk_core::mitigation::Basis;

#[derive(Parser)]
#[command(name = "syk", version, about = "Compile and simulate SYK time evolution")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Strings, clusters and two-qubit gates per Trotter step.
    Table1 {
        #[arg(long, default_value_t = 4)]
        n_min: usize,
        #[arg(long, default_value_t = 20)]
        n_max: usize,
        #[arg(long, default_value = "out/table1")]
        out: PathBuf,
    },
    /// Emit QASM for one step and for the full evolution.
    Compile(Overrides),
    /// Exact, compiled, raw and mitigated return probability.
    ReturnProb {
        #[command(flatten)]
        o: Overrides,
        /// Skip the noisy pipeline.
        #[arg(long)]
        exact_only: bool,
    },
    /// Exact and randomized-measurement OTOC.
    Otoc(Overrides),
    /// Regenerate and check the twirl tables.
    TwirlVerify {
        #[arg(long, default_value = "out/twirl")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Overrides {
    /// JSON experiment config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    n_majorana: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    steps: Option<Vec<usize>>,
    /// `none`, `all`, `line`, `pathK` or `t`.
    #[arg(long)]
    route: Option<String>,
    #[arg(long, value_parser = parse_basis)]
    basis: Option<Basis>,
    /// Two-qubit depolarizing probability.
    #[arg(long, alias = "noise")]
    p2: Option<f64>,
    #[arg(long)]
    readout: Option<f64>,
    #[arg(long)]
    shots: Option<u64>,
    #[arg(long)]
    twirls: Option<usize>,
    #[arg(long)]
    no_self_mitigation: bool,
    #[arg(long)]
    n_unitaries: Option<usize>,
    #[arg(long)]
    otoc_shots: Option<u64>,
}

fn parse_basis(s: &str) -> Result<Basis, String> {
    match s {
        "cx" => Ok(Basis::Cx),
        "ecr" => Ok(Basis::Ecr),
        _ => Err(format!("unknown basis `{s}`")),
    }
}

impl Overrides {
    fn resolve(self, default_out: &str) -> Result<ExperimentConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if cfg.output.as_os_str().is_empty() {
            cfg.output = PathBuf::from(default_out);
        }
        if let Some(v) = self.out {
            cfg.output = v;
        }
        if let Some(v) = self.n_majorana {
            cfg.model.n_majorana = v;
        }
        if let Some(v) = self.seeds {
            cfg.model.seeds = v;
        }
        if let Some(v) = self.dt {
            cfg.compile.dt = v;
        }
        if let Some(v) = self.steps {
            cfg.compile.steps = v;
        }
        if let Some(v) = self.route {
            cfg.compile.route = v;
        }
        if let Some(v) = self.basis {
            cfg.compile.basis = v;
        }
        if let Some(v) = self.p2 {
            cfg.noise.p2 = v;
        }
        if let Some(v) = self.readout {
            cfg.noise.readout = v;
        }
        if let Some(v) = self.shots {
            cfg.mitigation.shots = v;
        }
        if let Some(v) = self.twirls {
            cfg.mitigation.n_twirls = v;
        }
        if self.no_self_mitigation {
            cfg.mitigation.self_mitigation = false;
        }
        if let Some(v) = self.n_unitaries {
            cfg.otoc.n_unitaries_short = v;
            cfg.otoc.n_unitaries_long = v;
        }
        if let Some(v) = self.otoc_shots {
            cfg.otoc.shots = v;
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Table1 { n_min, n_max, out } => {
            let (rows, _) = commands::cmd_table1(n_min, n_max, &out)?;
            print!("{}", syk_core::synth::resource_table_text(&rows));
        }
        Command::Compile(o) => {
            let cfg = o.resolve("out/compile")?;
            let (summaries, _) = commands::cmd_compile(&cfg)?;
            for s in summaries {
                let routed = s.routed_two_qubit.map(|k| format!(" routed={k}")).unwrap_or_default();
                println!(
                    "seed={} clusters={} step_cx={} r={} cx={}{routed}",
                    s.seed, s.clusters, s.step_cx, s.evolution_steps, s.evolution_cx
                );
            }
        }
        Command::ReturnProb { o, exact_only } => {
            let cfg = o.resolve("out/return_prob")?;
            let m = commands::cmd_return_prob(&cfg, !exact_only)?;
            println!("wrote {} files to {}", m.artifacts.len(), cfg.output.display());
        }
        Command::Otoc(o) => {
            let cfg = o.resolve("out/otoc")?;
            let m = commands::cmd_otoc(&cfg)?;
            println!("wrote {} files to {}", m.artifacts.len(), cfg.output.display());
        }
        Command::TwirlVerify { out } => {
            let (reports, _) = commands::cmd_twirl_verify(&out)?;
            for r in reports {
                println!(
                    "{:?}: {} conjugations, verified={}{}",
                    r.gate,
                    r.generated,
                    r.verified,
                    r.matches_reference
                        .map(|b| format!(", matches reference={b}"))
                        .unwrap_or_default()
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ CliError::Usage(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
