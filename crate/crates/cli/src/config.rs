//! Flag parsing and the JSON config file. Flags win over the file, the file
//! wins over built-in defaults.

use std::path::{Path, PathBuf};
use std::time::Duration;

use atom_core::assets::DataRoot;
use atom_core::eval::{ReportFormat, SimilarityMode};
use atom_core::prompts::PromptVariant;
use atom_core::sim::NoiseConfig;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::Value;

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "atom-bot", version, about = "Need detection, task simulation and similarity evaluation")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// JSON config file; flags override its values
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory with prompts, fixtures and scenarios (default: built in)
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub backend: Option<Backend>,
    /// Prompt variant, e.g. full_atom_constraints or its alias `full`
    #[arg(long, global = true)]
    pub variant: Option<String>,
    /// Scenario ids: `1..16`, `1,4,9`, `2..5,12` or `all`
    #[arg(long, global = true)]
    pub tasks: Option<String>,
    /// Failure probabilities `p_scan,p_grasp,p_place,p_use`
    #[arg(long, global = true)]
    pub noise: Option<String>,
    #[arg(long, global = true)]
    pub trials: Option<u64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Output directory
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub format: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Detect needs, check constraints and decompose solutions for each scenario
    Pipeline,
    /// Execute action plans in the simulated household and report success rates
    Sim(SimArgs),
    /// Compare robot answers with clustered human answers
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct SimArgs {
    /// Run directory written by `pipeline`; defaults to the action fixtures
    #[arg(long)]
    pub runs: Option<PathBuf>,
    /// JSON map of task id to {successes, trials}; skips execution
    #[arg(long)]
    pub counts: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct EvalArgs {
    /// Delimited corpus with participant_id, task_id, stage, text, likert
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Success counts written by `sim` (success.json)
    #[arg(long)]
    pub success: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Remote,
    Replay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Assigned,
    Modal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbedderKind {
    Local,
    Remote,
}

/// Contents of `--config`. Unknown keys are rejected.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub data: Option<PathBuf>,
    pub backend: Option<Backend>,
    pub variant: Option<String>,
    pub tasks: Option<Value>,
    pub noise: Option<String>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
    pub format: Option<String>,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub inline_images: Option<bool>,
    pub image_root: Option<PathBuf>,
    pub backoff_ms: Option<u64>,
    pub repair_limit: Option<u32>,
    pub max_retries: Option<u32>,
    pub timeout_secs: Option<u64>,
    pub max_in_flight: Option<usize>,
    pub strict_quota: Option<bool>,
    pub actions_with_image: Option<bool>,
    pub mode: Option<Mode>,
    pub k_min: Option<usize>,
    pub k_max: Option<usize>,
    pub embedder: Option<EmbedderKind>,
    pub embed_endpoint: Option<String>,
    pub embed_model: Option<String>,
}

const SECRET_KEYS: [&str; 4] = ["api_key", "apikey", "token", "authorization"];

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let value: Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if let Some(obj) = value.as_object() {
            if let Some(k) = obj.keys().find(|k| SECRET_KEYS.contains(&k.to_lowercase().as_str())) {
                return Err(format!(
                    "{k:?} is not accepted in config files; set ATOM_API_KEY in the environment"
                ));
            }
        }
        serde_json::from_value(value).map_err(|e| e.to_string())
    }
}

/// Everything a command needs after flags, file and defaults are merged.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub data: DataRoot,
    pub backend: Backend,
    pub variant: PromptVariant,
    pub tasks: Vec<u32>,
    pub noise: NoiseConfig,
    pub trials: u64,
    pub seed: u64,
    pub jobs: usize,
    pub out: PathBuf,
    pub format: ReportFormat,
    pub endpoint: Option<String>,
    pub model: String,
    pub inline_images: bool,
    pub image_root: Option<PathBuf>,
    pub backoff_ms: u64,
    pub repair_limit: u32,
    pub max_retries: u32,
    pub timeout: Duration,
    pub max_in_flight: usize,
    pub strict_quota: bool,
    pub actions_with_image: bool,
    pub mode: SimilarityMode,
    pub k_range: (usize, usize),
    pub embedder: EmbedderKind,
    pub embed_endpoint: Option<String>,
    pub embed_model: String,
}

pub const DEFAULT_TRIALS: u64 = 10;
pub const DEFAULT_JOBS: usize = 4;
pub const DEFAULT_MODEL: &str = "gpt-4o";
pub const DEFAULT_EMBED_MODEL: &str = "text-embedding-3-small";

/// Parses `1..16`, `1-16`, `3`, comma lists of those, or `all`.
pub fn parse_tasks(spec: &str, all: u32) -> Result<Vec<u32>, CliError> {
    let bad = |part: &str| CliError::config(format!("cannot read task selection {part:?}"));
    let mut out = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if part.eq_ignore_ascii_case("all") {
            out.extend(1..=all);
            continue;
        }
        let range = part
            .split_once("..=")
            .or_else(|| part.split_once(".."))
            .or_else(|| part.split_once('-'));
        match range {
            Some((a, b)) => {
                let a: u32 = a.trim().parse().map_err(|_| bad(part))?;
                let b: u32 = b.trim().parse().map_err(|_| bad(part))?;
                if a > b {
                    return Err(bad(part));
                }
                out.extend(a..=b);
            }
            None => out.push(part.parse().map_err(|_| bad(part))?),
        }
    }
    if out.is_empty() {
        return Err(CliError::config("no tasks selected"));
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

fn tasks_from_value(v: &Value, all: u32) -> Result<Vec<u32>, CliError> {
    match v {
        Value::String(s) => parse_tasks(s, all),
        Value::Number(n) => parse_tasks(&n.to_string(), all),
        Value::Array(items) => {
            let parts: Vec<String> = items
                .iter()
                .map(|i| match i {
                    Value::String(s) => s.clone(),
                    other => other.to_string(),
                })
                .collect();
            parse_tasks(&parts.join(","), all)
        }
        _ => Err(CliError::config("\"tasks\" must be a string, number or list")),
    }
}

impl RunConfig {
    pub fn resolve(flags: &CommonArgs, file: &FileConfig, mode_flag: Option<Mode>) -> Result<Self, CliError> {
        let data = match flags.data.clone().or_else(|| file.data.clone()) {
            Some(dir) => {
                if !dir.is_dir() {
                    return Err(CliError::config(format!("data directory {} does not exist", dir.display())));
                }
                DataRoot::dir(dir)
            }
            None => DataRoot::Builtin,
        };
        let all = atom_core::assets::BUILTIN_SCENARIOS;
        let tasks = match (&flags.tasks, &file.tasks) {
            (Some(s), _) => parse_tasks(s, all)?,
            (None, Some(v)) => tasks_from_value(v, all)?,
            (None, None) => (1..=all).collect(),
        };
        let variant = flags
            .variant
            .clone()
            .or_else(|| file.variant.clone())
            .map(|v| v.parse::<PromptVariant>().map_err(|e| CliError::config(e.to_string())))
            .transpose()?
            .unwrap_or(PromptVariant::FullAtomConstraints);
        let noise = match flags.noise.clone().or_else(|| file.noise.clone()) {
            Some(text) => NoiseConfig::parse(&text).map_err(|e| CliError::config(e.to_string()))?,
            None => NoiseConfig::ZERO,
        };
        let trials = flags.trials.or(file.trials).unwrap_or(DEFAULT_TRIALS);
        if trials == 0 {
            return Err(CliError::config("trials must be at least 1"));
        }
        let jobs = flags.jobs.or(file.jobs).unwrap_or(DEFAULT_JOBS);
        if jobs == 0 {
            return Err(CliError::config("jobs must be at least 1"));
        }
        let format = match flags.format.clone().or_else(|| file.format.clone()) {
            Some(f) => f.parse().map_err(CliError::config)?,
            None => ReportFormat::Md,
        };
        let mode = match mode_flag.or(file.mode).unwrap_or(Mode::Assigned) {
            Mode::Assigned => SimilarityMode::Assigned,
            Mode::Modal => SimilarityMode::Modal,
        };
        let k_range = (file.k_min.unwrap_or(2), file.k_max.unwrap_or(6));
        if k_range.0 == 0 || k_range.0 > k_range.1 {
            return Err(CliError::config("k_min must be at least 1 and not above k_max"));
        }
        Ok(RunConfig {
            data,
            backend: flags.backend.or(file.backend).unwrap_or(Backend::Replay),
            variant,
            tasks,
            noise,
            trials,
            seed: flags.seed.or(file.seed).unwrap_or(0),
            jobs,
            out: flags.out.clone().or_else(|| file.out.clone()).unwrap_or_else(|| PathBuf::from("out")),
            format,
            endpoint: file.endpoint.clone(),
            model: file.model.clone().unwrap_or_else(|| DEFAULT_MODEL.into()),
            inline_images: file.inline_images.unwrap_or(false),
            image_root: file.image_root.clone(),
            backoff_ms: file.backoff_ms.unwrap_or(500),
            repair_limit: file.repair_limit.unwrap_or(2),
            max_retries: file.max_retries.unwrap_or(2),
            timeout: Duration::from_secs(file.timeout_secs.unwrap_or(120)),
            max_in_flight: file.max_in_flight.unwrap_or(atom_core::gateway::DEFAULT_IN_FLIGHT),
            strict_quota: file.strict_quota.unwrap_or(false),
            actions_with_image: file.actions_with_image.unwrap_or(false),
            mode,
            k_range,
            embedder: file.embedder.unwrap_or(EmbedderKind::Local),
            embed_endpoint: file.embed_endpoint.clone(),
            embed_model: file.embed_model.clone().unwrap_or_else(|| DEFAULT_EMBED_MODEL.into()),
        })
    }
}
