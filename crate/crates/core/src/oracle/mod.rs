//! Tasks and i.i.d. example sources: input distributions, target
//! execution and seeded randomness.

mod dist;
mod external;

use std::fs;
use std::io::{self, BufRead};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dist::{
    expand_charset, insertion_alphabet, DistributionConfig, InputSampler, MutationFuzzer, Relation, UniformString,
    DEFAULT_CHARSET,
};
pub use external::{ExternalTarget, DEFAULT_TIMEOUT};

use crate::dsl::{default_component_set, parse_expr, ComponentSet, Env, Expr, InputDecl, Signature, Sort, Value};
use crate::guarantee::{ExampleSource, GuaranteeParams};

/// Rng stream used for synthesis draws.
pub const SYNTHESIS_STREAM: u64 = 0;
/// Rng stream used for held-out evaluation draws.
pub const EVALUATION_STREAM: u64 = 1;

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: io::Error },
    #[error("{path}: {message}")]
    Schema { path: PathBuf, message: String },
    #[error("invalid task: {0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("cannot start `{command}`: {source}")]
    Spawn { command: String, source: io::Error },
    #[error("target timed out after {secs}s on input {input}")]
    Timeout { input: String, secs: f64 },
    #[error("malformed response `{response}` to input {input}: {reason}")]
    Malformed { input: String, response: String, reason: String },
    #[error("target exited ({status}) on input {input}")]
    Exited { input: String, status: String },
    #[error("target i/o: {0}")]
    Io(#[from] io::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum TargetSpec {
    Dsl(String),
    Command(String),
}

fn default_max_size() -> usize {
    6
}
fn default_max_nesting() -> usize {
    2
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Limits {
    #[serde(default = "default_max_size")]
    pub max_size: usize,
    #[serde(default = "default_max_nesting")]
    pub max_nesting: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { max_size: default_max_size(), max_nesting: default_max_nesting() }
    }
}

fn default_epsilon() -> f64 {
    0.05
}
fn default_delta() -> f64 {
    0.02
}
fn default_k() -> usize {
    20
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GuaranteeDefaults {
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_k")]
    pub k: usize,
}

impl Default for GuaranteeDefaults {
    fn default() -> Self {
        GuaranteeDefaults { epsilon: default_epsilon(), delta: default_delta(), k: default_k() }
    }
}

/// The on-disk task description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub name: String,
    pub inputs: Vec<InputDecl>,
    #[serde(default)]
    pub string_constants: Vec<String>,
    #[serde(default)]
    pub int_constants: Vec<i64>,
    pub target: TargetSpec,
    /// Required for command targets unless the output is a string.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_sort: Option<Sort>,
    pub distribution: DistributionConfig,
    #[serde(default)]
    pub limits: Limits,
    #[serde(default)]
    pub guarantee: GuaranteeDefaults,
    #[serde(default)]
    pub seeds: Vec<String>,
    /// Restricts the function components by name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub components: Option<Vec<String>>,
}

#[derive(Clone, Debug)]
pub enum TargetKind {
    Dsl(Expr),
    Command(String),
}

/// A validated task.
#[derive(Clone, Debug)]
pub struct Task {
    pub spec: TaskSpec,
    pub signature: Signature,
    pub components: Arc<ComponentSet>,
    pub output_sort: Sort,
    pub target: TargetKind,
    pub sampler: InputSampler,
    /// Working directory for command targets.
    pub base_dir: Option<PathBuf>,
}

impl Task {
    pub fn load(path: &Path) -> Result<Task, TaskError> {
        let text = fs::read_to_string(path).map_err(|source| TaskError::Read { path: path.into(), source })?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        let spec: TaskSpec = serde_path_to_error::deserialize(de).map_err(|e| TaskError::Schema {
            path: path.into(),
            message: if e.path().to_string() == "." {
                e.inner().to_string()
            } else {
                format!("at `{}`: {}", e.path(), e.inner())
            },
        })?;
        Task::from_spec(spec, path.parent().map(Path::to_path_buf))
    }

    pub fn from_spec(spec: TaskSpec, base_dir: Option<PathBuf>) -> Result<Task, TaskError> {
        let inv = |e: crate::dsl::DslError| TaskError::Invalid(e.to_string());
        let signature = Signature::new(spec.inputs.clone()).map_err(inv)?;
        if spec.limits.max_size == 0 {
            return Err(TaskError::Invalid("max_size must be positive".into()));
        }
        if spec.limits.max_nesting > crate::dsl::MAX_NESTING {
            return Err(TaskError::Invalid(format!(
                "max_nesting {} exceeds {}",
                spec.limits.max_nesting,
                crate::dsl::MAX_NESTING
            )));
        }
        GuaranteeParams::new(spec.guarantee.epsilon, spec.guarantee.delta, spec.guarantee.k)
            .map_err(|e| TaskError::Invalid(e.to_string()))?;
        let mut components =
            default_component_set(&signature, &spec.string_constants, &spec.int_constants).map_err(inv)?;
        if let Some(names) = &spec.components {
            components = components.restrict_funcs(names).map_err(inv)?;
        }
        let (target, output_sort) = match &spec.target {
            TargetSpec::Dsl(text) => {
                let e = parse_expr(text, &signature).map_err(|e| TaskError::Invalid(format!("target: {e}")))?;
                let sort = e.sort();
                if spec.output_sort.is_some_and(|s| s != sort) {
                    return Err(TaskError::Invalid(format!("target has sort {sort}, not the declared output sort")));
                }
                (TargetKind::Dsl(e), sort)
            }
            TargetSpec::Command(c) => (TargetKind::Command(c.clone()), spec.output_sort.unwrap_or(Sort::String)),
        };
        let sampler = InputSampler::new(&spec.distribution, &signature, &spec.seeds)?;
        Ok(Task { spec, signature, components: Arc::new(components), output_sort, target, sampler, base_dir })
    }

    pub fn name(&self) -> &str {
        &self.spec.name
    }

    pub fn params(&self) -> GuaranteeParams {
        let g = &self.spec.guarantee;
        GuaranteeParams::new(g.epsilon, g.delta, g.k).expect("validated on load")
    }

    pub fn target(&self) -> Result<Target, OracleError> {
        Ok(match &self.target {
            TargetKind::Dsl(e) => Target::Dsl(e.clone()),
            TargetKind::Command(c) => {
                Target::External(ExternalTarget::spawn(c, self.base_dir.as_deref(), DEFAULT_TIMEOUT)?)
            }
        })
    }

    /// An rng for `seed` on the given stream.
    pub fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        rng
    }
}

/// One input-output pair.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Example {
    pub inputs: Env,
    pub output: Value,
}

impl Example {
    pub fn to_json(&self, sig: &Signature) -> serde_json::Value {
        serde_json::json!({ "inputs": self.inputs.to_json(sig), "output": self.output.to_json() })
    }

    pub fn from_json(v: &serde_json::Value, sig: &Signature, sort: Sort) -> Option<Example> {
        let inputs = Env::from_json(v.get("inputs")?, sig)?;
        let output = Value::from_json(v.get("output")?, sort)?;
        Some(Example { inputs, output })
    }
}

/// Reads JSON-lines examples. Blank lines are skipped.
pub fn read_examples<R: BufRead>(r: R, sig: &Signature, sort: Sort) -> Result<Vec<Example>, TaskError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|source| TaskError::Read { path: PathBuf::from("<examples>"), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |m: String| TaskError::Invalid(format!("example line {}: {m}", i + 1));
        let v: serde_json::Value = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        out.push(Example::from_json(&v, sig, sort).ok_or_else(|| bad("does not match the task signature".into()))?);
    }
    Ok(out)
}

/// Examples whose output differs from the built-in target.
pub fn check_examples<'a>(task: &Task, examples: &'a [Example]) -> Vec<&'a Example> {
    match &task.target {
        TargetKind::Dsl(e) => examples.iter().filter(|x| e.eval(&x.inputs) != x.output).collect(),
        TargetKind::Command(_) => Vec::new(),
    }
}

/// A running target program.
pub enum Target {
    Dsl(Expr),
    External(ExternalTarget),
}

impl Target {
    pub fn finish(self) -> Result<(), OracleError> {
        match self {
            Target::Dsl(_) => Ok(()),
            Target::External(t) => t.shutdown(),
        }
    }
}

/// Runs the target on `env`.
pub fn make_example(target: &mut Target, sig: &Signature, sort: Sort, env: Env) -> Result<Example, OracleError> {
    let output = match target {
        Target::Dsl(e) => e.eval(&env),
        Target::External(t) => t.query(&env.to_json(sig), sort)?,
    };
    Ok(Example { inputs: env, output })
}

/// Draws inputs from the task distribution and labels them with the target.
pub struct TaskOracle<'a> {
    task: &'a Task,
    target: Target,
    rng: ChaCha8Rng,
}

impl<'a> TaskOracle<'a> {
    pub fn new(task: &'a Task, seed: u64) -> Result<Self, OracleError> {
        Self::with_stream(task, seed, SYNTHESIS_STREAM)
    }

    pub fn with_stream(task: &'a Task, seed: u64, stream: u64) -> Result<Self, OracleError> {
        Ok(TaskOracle { task, target: task.target()?, rng: Task::rng(seed, stream) })
    }

    pub fn target_mut(&mut self) -> &mut Target {
        &mut self.target
    }

    pub fn finish(self) -> Result<(), OracleError> {
        self.target.finish()
    }
}

impl ExampleSource for TaskOracle<'_> {
    type Example = Example;

    fn draw(&mut self) -> crate::Result<Example> {
        let env = self.task.sampler.sample(&mut self.rng);
        Ok(make_example(&mut self.target, &self.task.signature, self.task.output_sort, env)?)
    }
}
