use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use syk_core::circuit::CouplingMap;
use syk_core::mitigation::{Basis, MitigationConfig};
use syk_core::observables::{Evolution, OtocConfig, Placement};
use syk_core::sim::{NoiseModel, ReadoutError};
use syk_core::syk::SykParams;

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub n_majorana: usize,
    pub j: f64,
    pub q: usize,
    pub seeds: Vec<u64>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            n_majorana: 6,
            j: 1.0,
            q: 4,
            seeds: vec![1, 2, 3, 4, 5],
        }
    }
}

impl ModelConfig {
    pub fn params(&self, seed: u64) -> SykParams {
        SykParams {
            n_majorana: self.n_majorana,
            q: self.q,
            j: self.j,
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompileConfig {
    pub dt: f64,
    /// `none`, `line`, `pathK` or `t`.
    pub route: String,
    pub basis: Basis,
    /// Trotter step counts of the time grid; `t = steps · dt`.
    pub steps: Vec<usize>,
}

impl Default for CompileConfig {
    fn default() -> Self {
        CompileConfig {
            dt: 1.5,
            route: "none".into(),
            basis: Basis::Ecr,
            steps: vec![0, 2, 4, 6, 8],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub p2: f64,
    pub p1: f64,
    /// Symmetric bit-flip probability at readout, same on every qubit.
    pub readout: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            p2: 0.01,
            p1: 0.0,
            readout: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MitigationSection {
    pub n_twirls: usize,
    pub shots: u64,
    pub self_mitigation: bool,
    pub readout_correction: bool,
    pub bootstrap: usize,
    pub seed: u64,
}

impl Default for MitigationSection {
    fn default() -> Self {
        MitigationSection {
            n_twirls: 75,
            shots: 2048,
            self_mitigation: true,
            readout_correction: true,
            bootstrap: 500,
            seed: 2024,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OtocSection {
    pub w: Placement,
    pub v: Placement,
    /// Unitaries for `t ≤ dt`.
    pub n_unitaries_short: usize,
    /// Unitaries for later times.
    pub n_unitaries_long: usize,
    /// Shots per circuit; 0 means exact expectations.
    pub shots: u64,
    pub evolution: Evolution,
    pub seed: u64,
}

impl Default for OtocSection {
    fn default() -> Self {
        OtocSection {
            w: Placement::z(1),
            v: Placement::z(0),
            n_unitaries_short: 600,
            n_unitaries_long: 900,
            shots: 4000,
            evolution: Evolution::Trotter,
            seed: 7,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub compile: CompileConfig,
    pub noise: NoiseConfig,
    pub mitigation: MitigationSection,
    pub otoc: OtocSection,
    pub output: PathBuf,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.model.seeds.is_empty() {
            return Err(CliError::Usage("at least one seed is required".into()));
        }
        self.model.params(self.model.seeds[0]).validate()?;
        if self.compile.dt.is_nan() || self.compile.dt <= 0.0 {
            return Err(CliError::Usage("dt must be positive".into()));
        }
        if self.compile.steps.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CliError::Usage("steps must be strictly increasing".into()));
        }
        self.noise_model().validate()?;
        self.coupling_map()?;
        if self.otoc.n_unitaries_short == 0 || self.otoc.n_unitaries_long == 0 {
            return Err(CliError::Usage("unitary counts must be positive".into()));
        }
        Ok(())
    }

    pub fn num_qubits(&self) -> usize {
        self.model.n_majorana / 2
    }

    pub fn noise_model(&self) -> NoiseModel {
        let n = self.num_qubits();
        NoiseModel {
            p2: self.noise.p2,
            p1: self.noise.p1,
            readout: if self.noise.readout > 0.0 {
                vec![ReadoutError::symmetric(self.noise.readout); n]
            } else {
                Vec::new()
            },
        }
    }

    pub fn coupling_map(&self) -> Result<Option<CouplingMap>, CliError> {
        parse_route(&self.compile.route, self.num_qubits())
    }

    pub fn mitigation_config(&self) -> Result<MitigationConfig, CliError> {
        let m = &self.mitigation;
        Ok(MitigationConfig {
            shots: m.shots,
            n_twirls: m.n_twirls,
            basis: self.compile.basis,
            self_mitigation: m.self_mitigation,
            readout_correction: m.readout_correction,
            bootstrap: m.bootstrap,
            seed: m.seed,
            coupling: self.coupling_map()?,
        })
    }

    pub fn otoc_config(&self, t: f64) -> OtocConfig {
        let o = &self.otoc;
        OtocConfig {
            w: o.w,
            v: o.v,
            n_unitaries: if t <= self.compile.dt {
                o.n_unitaries_short
            } else {
                o.n_unitaries_long
            },
            shots: (o.shots > 0).then_some(o.shots),
            dt: self.compile.dt,
            evolution: o.evolution,
            seed: o.seed,
        }
    }
}

/// `none`/`all`, `line`, `pathK` or `t`.
pub fn parse_route(text: &str, n: usize) -> Result<Option<CouplingMap>, CliError> {
    let map = match text {
        "" | "none" => return Ok(None),
        "all" => CouplingMap::all_to_all(n)?,
        "line" => CouplingMap::line(n)?,
        "t" => CouplingMap::t_shape(n)?,
        s if s.starts_with("path") => {
            let k: usize = s[4..]
                .parse()
                .map_err(|_| CliError::Usage(format!("bad route `{s}`")))?;
            if k < n {
                return Err(CliError::Usage(format!("route `{s}` has fewer than {n} qubits")));
            }
            CouplingMap::line(k)?
        }
        s => return Err(CliError::Usage(format!("unknown route `{s}`"))),
    };
    Ok(Some(map))
}
