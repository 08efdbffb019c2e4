//! Resolved run configurations. Each one can come from command-line flags or
//! from a TOML run file, and is stored verbatim in the run manifest.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use decoh_core::qsystem::{build_model, Decoherence, LevelSystem, Model};
use serde::{Deserialize, Serialize};

use crate::Failure;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum RunConfig {
    Propagate(PropagateConfig),
    Optimize(OptimizeConfig),
    Spectrum(SpectrumConfig),
    Reproduce(ReproduceConfig),
    PerturbSweep(SweepConfig),
    ModelExport(ExportConfig),
}

impl RunConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            RunConfig::Propagate(_) => "propagate",
            RunConfig::Optimize(_) => "optimize",
            RunConfig::Spectrum(_) => "spectrum",
            RunConfig::Reproduce(_) => "reproduce",
            RunConfig::PerturbSweep(_) => "perturb-sweep",
            RunConfig::ModelExport(_) => "model-export",
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            RunConfig::Optimize(c) => Some(c.seed),
            RunConfig::Reproduce(c) => c.seeds.first().copied(),
            _ => None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, Failure> {
        toml::from_str(text).map_err(|e| Failure::Config(format!("run file: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
    }

    /// Makes every input path absolute so the manifest can be replayed from
    /// any directory.
    pub fn absolutize(&mut self) -> Result<(), Failure> {
        let fix = |p: &mut Option<PathBuf>| -> Result<(), Failure> {
            if let Some(path) = p {
                *path = absolute(path)?;
            }
            Ok(())
        };
        match self {
            RunConfig::Propagate(c) => {
                fix(&mut c.system_file)?;
                fix(&mut c.field)
            }
            RunConfig::Optimize(c) => fix(&mut c.system_file),
            RunConfig::Spectrum(c) => {
                c.field = absolute(&c.field)?;
                Ok(())
            }
            RunConfig::PerturbSweep(c) => fix(&mut c.ladder_file),
            RunConfig::Reproduce(_) | RunConfig::ModelExport(_) => Ok(()),
        }
    }
}

fn absolute(p: &Path) -> Result<PathBuf, Failure> {
    std::path::absolute(p).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))
}

fn default_dt() -> f64 {
    0.01
}

fn default_fitness_dt() -> f64 {
    0.05
}

fn default_horizon() -> f64 {
    200.0
}

fn default_store_every() -> usize {
    10
}

fn default_alpha() -> f64 {
    0.05
}

fn default_seed() -> u64 {
    1
}

fn default_seeds() -> Vec<u64> {
    vec![1]
}

fn default_population() -> usize {
    60
}

fn default_generations() -> usize {
    200
}

fn default_hi() -> f64 {
    3.0
}

fn default_points() -> usize {
    3000
}

fn default_true() -> bool {
    true
}

fn default_sweep_yield() -> f64 {
    1e-4
}

fn default_halvings() -> usize {
    4
}

/// Model or system file, plus decoherence strengths.
#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagateConfig {
    /// Built-in model (M1..M4).
    #[arg(long, conflicts_with = "system_file")]
    pub model: Option<Model>,
    /// TOML level-system file.
    #[arg(long)]
    pub system_file: Option<PathBuf>,
    /// Uniform decoherence strength.
    #[arg(long, default_value_t = 0.0)]
    #[serde(default)]
    pub gamma: f64,
    /// Left-path strength (two-path model).
    #[arg(long)]
    pub gamma_left: Option<f64>,
    /// Right-path strength (two-path model).
    #[arg(long)]
    pub gamma_right: Option<f64>,
    /// TOML field file; field-free when absent.
    #[arg(long)]
    pub field: Option<PathBuf>,
    #[arg(long, default_value_t = default_dt())]
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[arg(long, default_value_t = default_horizon())]
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    /// Keep every n-th step in the trajectory CSV.
    #[arg(long, default_value_t = default_store_every())]
    #[serde(default = "default_store_every")]
    pub store_every: usize,
    /// Also write |rho_ij| columns.
    #[arg(long)]
    #[serde(default)]
    pub offdiag: bool,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeConfig {
    #[arg(long, conflicts_with = "system_file")]
    pub model: Option<Model>,
    #[arg(long)]
    pub system_file: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0)]
    #[serde(default)]
    pub gamma: f64,
    #[arg(long)]
    pub gamma_left: Option<f64>,
    #[arg(long)]
    pub gamma_right: Option<f64>,
    /// Target yield O_T in percent.
    #[arg(long)]
    pub target: f64,
    /// Fluence weight in the cost.
    #[arg(long, default_value_t = default_alpha())]
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[arg(long, default_value_t = default_seed())]
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Time step used inside the search.
    #[arg(long, default_value_t = default_fitness_dt())]
    #[serde(default = "default_fitness_dt")]
    pub fitness_dt: f64,
    /// Time step for the reported yields.
    #[arg(long, default_value_t = default_dt())]
    #[serde(default = "default_dt")]
    pub report_dt: f64,
    #[arg(long, default_value_t = default_population())]
    #[serde(default = "default_population")]
    pub population: usize,
    #[arg(long, default_value_t = default_generations())]
    #[serde(default = "default_generations")]
    pub generations: usize,
    /// Stop once this many propagations have been spent.
    #[arg(long)]
    pub max_evaluations: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    /// TOML field file.
    pub field: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    #[serde(default)]
    pub lo: f64,
    #[arg(long, default_value_t = default_hi())]
    #[serde(default = "default_hi")]
    pub hi: f64,
    #[arg(long, default_value_t = default_points())]
    #[serde(default = "default_points")]
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReproduceConfig {
    /// table-I .. table-VI, figure-2 .. figure-4
    pub target: String,
    #[arg(long, value_delimiter = ',', default_values_t = default_seeds())]
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[arg(long, default_value_t = default_fitness_dt())]
    #[serde(default = "default_fitness_dt")]
    pub fitness_dt: f64,
    #[arg(long, default_value_t = default_population())]
    #[serde(default = "default_population")]
    pub population: usize,
    #[arg(long, default_value_t = default_generations())]
    #[serde(default = "default_generations")]
    pub generations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CouplingKind {
    Magnus,
    Rwa,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// TOML ladder file (dipoles, rates, carriers, amplitudes, phases).
    #[arg(long, conflicts_with = "model")]
    pub ladder_file: Option<PathBuf>,
    /// Take the ladder from a chain model instead.
    #[arg(long)]
    pub model: Option<Model>,
    /// Keep only the first n rungs.
    #[arg(long)]
    pub rungs: Option<usize>,
    /// Field amplitudes per rung when using --model.
    #[arg(long, value_delimiter = ',')]
    pub amplitudes: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub phases: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value_t = CouplingKind::Magnus)]
    #[serde(default = "default_coupling")]
    pub coupling: CouplingKind,
    /// gamma = lambda^2; otherwise gamma = 0.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    #[serde(default = "default_true")]
    pub cooperative: bool,
    /// Explicit lambda values; by default lambda0 and its halvings.
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
    /// Predicted yield that fixes lambda0.
    #[arg(long, default_value_t = default_sweep_yield())]
    #[serde(default = "default_sweep_yield")]
    pub start_yield: f64,
    #[arg(long, default_value_t = default_halvings())]
    #[serde(default = "default_halvings")]
    pub halvings: usize,
}

fn default_coupling() -> CouplingKind {
    CouplingKind::Magnus
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExportConfig {
    pub model: Model,
}

/// Built-in model or a system file.
pub fn load_system(model: Option<Model>, file: Option<&Path>) -> Result<LevelSystem<f64>, Failure> {
    match (model, file) {
        (Some(m), None) => Ok(build_model(m)),
        (None, Some(path)) => Ok(LevelSystem::load(path)?),
        (Some(_), Some(_)) => Err(Failure::Config("give either a model or a system file, not both".into())),
        (None, None) => Err(Failure::Config("a model or a system file is required".into())),
    }
}

/// Uniform decoherence, or split strengths on the two-path model.
pub fn decoherence(
    system: &LevelSystem<f64>,
    model: Option<Model>,
    gamma: f64,
    gamma_left: Option<f64>,
    gamma_right: Option<f64>,
) -> Result<Decoherence<f64>, Failure> {
    if gamma_left.is_none() && gamma_right.is_none() {
        return Ok(Decoherence::uniform(system, gamma)?);
    }
    let Some(m) = model.filter(|m| m.is_two_path()) else {
        return Err(Failure::Config("gamma-left/gamma-right need the two-path model M4".into()));
    };
    if gamma != 0.0 {
        return Err(Failure::Config("use either gamma or gamma-left/gamma-right".into()));
    }
    Ok(Decoherence::split(
        system,
        m.right_path_levels(),
        gamma_left.unwrap_or(0.0),
        gamma_right.unwrap_or(0.0),
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_file_round_trip() {
        let text = "command = \"optimize\"\nmodel = \"M1\"\ngamma = 0.03\ntarget = 5.0\n";
        let cfg = RunConfig::from_toml_str(text).unwrap();
        let RunConfig::Optimize(o) = &cfg else { panic!("{cfg:?}") };
        assert_eq!(o.model, Some(Model::M1));
        assert_eq!((o.alpha, o.seed, o.population), (0.05, 1, 60));
        let json = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&json).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = "command = \"propagate\"\nmodel = \"M1\"\ngama = 0.03\n";
        assert!(RunConfig::from_toml_str(text).is_err());
        assert!(RunConfig::from_toml_str("command = \"bogus\"\n").is_err());
    }

    #[test]
    fn split_rates_need_two_path_model() {
        let sys = build_model(Model::M1);
        assert!(decoherence(&sys, Some(Model::M1), 0.0, Some(0.04), None).is_err());
        let sys = build_model(Model::M4);
        assert!(decoherence(&sys, Some(Model::M4), 0.01, Some(0.04), None).is_err());
        assert!(decoherence(&sys, Some(Model::M4), 0.0, Some(0.04), None).is_ok());
    }
}
