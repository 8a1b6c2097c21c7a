//! Experiment runner: seeded inputs, one experiment per inequality, and reports.

pub mod classical;
pub mod emit;
mod experiments;
pub mod generate;
pub mod stats;

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HctError, Result};
use crate::grid::RootSpec;
use crate::io;
use crate::operators::Policy;
pub use generate::{generate, refine, Generated, GeneratorKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Weak11,
    GoodlambdaSharp,
    FeffermanStein,
    Adams,
    GoodlambdaRiesz,
    MuckenhouptWheeden,
    ExpIntegrability,
    JohnNirenberg,
    Embedding,
    BmoMorrey,
}

impl Experiment {
    pub const ALL: [Experiment; 10] = [
        Experiment::Weak11,
        Experiment::GoodlambdaSharp,
        Experiment::FeffermanStein,
        Experiment::Adams,
        Experiment::GoodlambdaRiesz,
        Experiment::MuckenhouptWheeden,
        Experiment::ExpIntegrability,
        Experiment::JohnNirenberg,
        Experiment::Embedding,
        Experiment::BmoMorrey,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Weak11 => "weak11",
            Experiment::GoodlambdaSharp => "goodlambda-sharp",
            Experiment::FeffermanStein => "fefferman-stein",
            Experiment::Adams => "adams",
            Experiment::GoodlambdaRiesz => "goodlambda-riesz",
            Experiment::MuckenhouptWheeden => "muckenhoupt-wheeden",
            Experiment::ExpIntegrability => "exp-integrability",
            Experiment::JohnNirenberg => "john-nirenberg",
            Experiment::Embedding => "embedding",
            Experiment::BmoMorrey => "bmo-morrey",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = HctError;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL.into_iter().find(|e| e.name() == s).ok_or_else(|| HctError::UnknownExperiment(s.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub dim: usize,
    pub levels: u32,
    #[serde(default = "one")]
    pub side: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { dim: 2, levels: 5, side: 1.0 }
    }
}

impl GridConfig {
    pub fn spec(&self) -> Result<RootSpec> {
        RootSpec::new(self.dim, self.side, self.levels)
    }
}

/// Parameter sweeps; empty lists fall back to each experiment's defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamGrid {
    pub beta: Vec<f64>,
    pub alpha: Vec<f64>,
    /// Explicit `(α, β)` pairs; replaces the product of `alpha` and `beta`.
    pub pairs: Vec<(f64, f64)>,
    pub p: Vec<f64>,
    pub t: Vec<f64>,
    /// Number of `t` values drawn from the maximal field when `t` is empty.
    pub t_count: Option<usize>,
    #[serde(rename = "A")]
    pub a: Vec<f64>,
    /// Levels as fractions of the largest potential value.
    pub lambda: Vec<f64>,
    pub epsilon: Vec<f64>,
    pub balls: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FileKind {
    Function,
    Set,
    Measure,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InputSource {
    Generator {
        generator: GeneratorKind,
        #[serde(default = "one_count")]
        count: usize,
        #[serde(default)]
        seed: u64,
    },
    File {
        file: PathBuf,
        format: FileKind,
    },
}

fn one_count() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Allowed negative margin, relative to `max(1, lhs)`.
    pub margin: f64,
    /// Largest relative change of a fitted constant under one refinement.
    pub stability: f64,
    /// Largest relative deviation from a classical reference.
    pub reference: f64,
    /// Confidence level of fitted slopes.
    pub confidence: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { margin: 1e-12, stability: 0.25, reference: 0.05, confidence: 0.95 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub params: ParamGrid,
    /// Defaults to the experiment's standard suite when empty.
    #[serde(default)]
    pub inputs: Vec<InputSource>,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Inner minimization policy for sharp maximal functions.
    #[serde(default)]
    pub policy: Option<Policy>,
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        ExperimentConfig {
            experiment,
            grid: GridConfig::default(),
            params: ParamGrid::default(),
            inputs: Vec::new(),
            tolerances: Tolerances::default(),
            policy: None,
        }
    }

    /// Replaces every generator seed with `seed + source index`.
    pub fn with_seed(mut self, seed: u64) -> Self {
        for (i, source) in self.inputs.iter_mut().enumerate() {
            if let InputSource::Generator { seed: s, .. } = source {
                *s = seed.wrapping_add(i as u64);
            }
        }
        self
    }
}

/// One checked (or skipped) inequality instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Case {
    pub id: String,
    pub params: BTreeMap<String, serde_json::Value>,
    pub metrics: BTreeMap<String, f64>,
    /// The exact inequality instance with both sides filled in.
    pub instance: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
}

impl Case {
    pub fn new(id: impl Into<String>) -> Self {
        Case { id: id.into(), params: BTreeMap::new(), metrics: BTreeMap::new(), instance: String::new(), skipped: None }
    }

    pub fn param(mut self, key: &str, value: impl Into<serde_json::Value>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }

    pub fn metric(mut self, key: &str, value: f64) -> Self {
        self.metrics.insert(key.to_string(), value);
        self
    }

    pub fn skip(mut self, reason: impl Into<String>) -> Self {
        self.skipped = Some(reason.into());
        self
    }

    pub fn get(&self, key: &str) -> f64 {
        self.metrics.get(key).copied().unwrap_or(f64::NAN)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    /// Informational verdicts do not affect [`Report::passed`].
    pub asserted: bool,
    pub passed: bool,
    pub detail: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interval: Option<(f64, f64)>,
    /// The case attaining the extremum the verdict rests on.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extremal_case: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub instance: Option<String>,
}

impl Verdict {
    pub fn new(name: impl Into<String>, asserted: bool, passed: bool, detail: impl Into<String>) -> Self {
        Verdict { name: name.into(), asserted, passed, detail: detail.into(), value: None, interval: None, extremal_case: None, instance: None }
    }

    pub fn value(mut self, v: f64) -> Self {
        self.value = Some(v);
        self
    }

    pub fn interval(mut self, lo: f64, hi: f64) -> Self {
        self.interval = Some((lo, hi));
        self
    }

    pub fn extremal(mut self, case: &Case) -> Self {
        self.extremal_case = Some(case.id.clone());
        self.instance = Some(case.instance.clone());
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config: ExperimentConfig,
    pub cases: Vec<Case>,
    pub verdicts: Vec<Verdict>,
    pub wall_clock_seconds: f64,
}

impl Report {
    pub fn empty(config: ExperimentConfig) -> Self {
        Report { config, cases: Vec::new(), verdicts: Vec::new(), wall_clock_seconds: 0.0 }
    }

    /// True iff every asserted verdict passed.
    pub fn passed(&self) -> bool {
        self.verdicts.iter().filter(|v| v.asserted).all(|v| v.passed)
    }

    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }

    pub fn case(&self, id: &str) -> Option<&Case> {
        self.cases.iter().find(|c| c.id == id)
    }
}

/// A named input ready for an experiment.
#[derive(Clone, Debug)]
pub(crate) struct Input {
    pub id: String,
    pub data: Generated,
}

pub(crate) fn load_inputs(sources: &[InputSource], spec: &RootSpec) -> Result<Vec<Input>> {
    let mut out = Vec::new();
    for (s, source) in sources.iter().enumerate() {
        match source {
            InputSource::Generator { generator, count, seed } => {
                for i in 0..*count {
                    let data = generate(generator, spec, seed.wrapping_add(i as u64))?;
                    out.push(Input { id: format!("{s}-{}-{i:03}", generator.name()), data });
                }
            }
            InputSource::File { file, format } => {
                let data = match format {
                    FileKind::Function => Generated::Function(io::read_function(file)?),
                    FileKind::Set => Generated::Set(io::read_cellset(file)?),
                    FileKind::Measure => Generated::Measure(io::read_measure(file)?),
                };
                let stem = file.file_stem().map_or_else(|| "file".into(), |s| s.to_string_lossy().into_owned());
                out.push(Input { id: format!("{s}-{stem}"), data });
            }
        }
    }
    Ok(out)
}

/// Runs the experiment, in parallel over inputs, on the current rayon pool.
/// The report's config lists the inputs actually used.
pub fn run(config: &ExperimentConfig) -> Result<Report> {
    let start = Instant::now();
    let spec = config.grid.spec()?;
    let sources = if config.inputs.is_empty() { experiments::default_inputs(config.experiment) } else { config.inputs.clone() };
    let inputs = load_inputs(&sources, &spec)?;
    let (mut cases, verdicts) = experiments::run(config, &inputs)?;
    cases.sort_by(|a, b| a.id.cmp(&b.id));
    let config = ExperimentConfig { inputs: sources, ..config.clone() };
    Ok(Report { config, cases, verdicts, wall_clock_seconds: start.elapsed().as_secs_f64() })
}

/// [`run`] on a dedicated pool of `jobs` threads.
pub fn run_with_jobs(config: &ExperimentConfig, jobs: usize) -> Result<Report> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build().map_err(|e| HctError::InvalidParameter(format!("thread pool: {e}")))?;
    pool.install(|| run(config))
}

/// Applies `f` to every input in parallel and concatenates the cases in input order.
pub(crate) fn par_cases<T: Send>(inputs: &[Input], f: impl Fn(&Input) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    inputs.par_iter().map(f).collect()
}
