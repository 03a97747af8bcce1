use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use atom_core::assets::{actions_fixture_path, DataRoot};
use atom_core::eval::{
    evaluate_corpus, render_report, summarize, Corpus, EmbedError, Embedder, EvalConfig, LocalHashEmbedder,
    RemoteEmbedder, ReportFormat, Segmenter,
};
use atom_core::gateway::{Gateway, RemoteBackend, RemoteConfig, ReplayBackend};
use atom_core::model::{ActionPlan, RobotConstraints};
use atom_core::parse::parse_action_list;
use atom_core::pipeline::{create_run_dir, read_run, write_run, Pipeline, PipelineConfig, PipelineRun};
use atom_core::prompts::PromptRegistry;
use atom_core::scalar::Exact;
use atom_core::scenario::{load_scenario, Scenario};
use atom_core::sim::{execute_plan_with, monte_carlo_task, pooled_success_rate, trial_seed, SuccessCount};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use tracing::info;

use crate::config::{Backend, EmbedderKind, EvalArgs, RunConfig, SimArgs};
use crate::error::CliError;

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::data(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn load_scenarios(data: &DataRoot, tasks: &[u32]) -> Result<Vec<Scenario>, CliError> {
    tasks.iter().map(|&id| load_scenario(data, id).map_err(CliError::from)).collect()
}

fn gateway(config: &RunConfig) -> Result<Gateway, CliError> {
    match config.backend {
        Backend::Replay => Ok(Gateway::with_cap(ReplayBackend::new(config.data.clone()), config.max_in_flight)),
        Backend::Remote => {
            let endpoint = config
                .endpoint
                .clone()
                .ok_or_else(|| CliError::config("the remote backend needs \"endpoint\" in the config file"))?;
            let remote = RemoteConfig {
                endpoint,
                model: config.model.clone(),
                inline_images: config.inline_images,
                image_root: config.image_root.clone(),
                backoff_ms: config.backoff_ms,
            };
            Ok(Gateway::with_cap(RemoteBackend::from_env(remote)?, config.max_in_flight))
        }
    }
}

/// Detects needs and decomposes surviving solutions for every selected task.
pub fn pipeline(config: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    if !config.variant.is_detection() {
        return Err(CliError::config(format!("{} is not a detection variant", config.variant)));
    }
    let scenarios = load_scenarios(&config.data, &config.tasks)?;
    if config.backend == Backend::Replay {
        for s in &scenarios {
            let rel = ReplayBackend::fixture_path(s.spec.id, config.variant);
            if !config.data.exists(&rel) {
                return Err(CliError::config(format!(
                    "replay fixture {rel} is missing from {}",
                    config.data.describe()
                )));
            }
        }
    }
    let prompts = PromptRegistry::load(&config.data).map_err(|e| CliError::data(e.to_string()))?;
    let pipeline_config = PipelineConfig {
        repair_limit: config.repair_limit,
        max_retries: config.max_retries,
        timeout: config.timeout,
        constraints: RobotConstraints {
            strict_quota: config.strict_quota,
            ..RobotConstraints::default()
        },
        actions_with_image: config.actions_with_image,
        ..PipelineConfig::default()
    };
    let pipeline = Pipeline::new(gateway(config)?, prompts, pipeline_config);
    let results = pipeline.run_many(&scenarios, config.variant, config.jobs)?;

    let dir = create_run_dir(&config.out).map_err(|e| io_err(&config.out, e))?;
    let mut first_error = None;
    for (scenario, result) in scenarios.iter().zip(results) {
        let id = scenario.spec.id;
        match result {
            Ok(run) => {
                let path = write_run(&dir, &run).map_err(|e| io_err(&dir, e))?;
                writeln!(
                    out,
                    "task {id:02}: {} needs, {} plans, {} findings -> {}",
                    run.report.needs.len(),
                    run.plans.len(),
                    run.violations.len(),
                    path.display()
                )?;
                if config.strict_quota {
                    if let Some(q) = &run.quota_shortfall {
                        writeln!(out, "task {id:02}: quota not met ({} needs, {} with possible items)", q.needs, q.with_possible_items)?;
                        first_error.get_or_insert_with(|| CliError::data(format!("task {id}: need quota not met")));
                    }
                }
            }
            Err(e) => {
                writeln!(out, "task {id:02}: FAILED: {e}")?;
                first_error.get_or_insert_with(|| CliError::from(e));
            }
        }
    }
    info!(dir = %dir.display(), "run artifacts written");
    match first_error {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn fixture_plans(data: &DataRoot, id: u32) -> Result<Vec<ActionPlan>, CliError> {
    let rel = actions_fixture_path(id);
    let raw = data.read(&rel).map_err(|e| CliError::data(format!("missing plan file {rel}: {e}")))?;
    parse_action_list(&raw).map_err(|e| CliError::data(format!("{rel}: {e}")))
}

/// Plans per task from a `pipeline` run directory.
fn run_plans(dir: &Path) -> Result<BTreeMap<u32, PipelineRun>, CliError> {
    let entries = fs::read_dir(dir).map_err(|e| io_err(dir, e))?;
    let mut runs = BTreeMap::new();
    let mut paths: Vec<PathBuf> = entries
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    for path in paths {
        let run = read_run(&path).map_err(|e| io_err(&path, e))?;
        if runs.insert(run.scenario_id, run).is_some() {
            return Err(io_err(&path, "second run for the same task"));
        }
    }
    Ok(runs)
}

fn read_counts(path: &Path) -> Result<BTreeMap<u32, SuccessCount>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let raw: BTreeMap<String, SuccessCount> = serde_json::from_str(&text).map_err(|e| io_err(path, e))?;
    raw.into_iter()
        .map(|(k, v)| {
            let id = k.trim().parse::<u32>().map_err(|_| io_err(path, format!("task id {k:?} is not a number")))?;
            if v.trials == 0 || v.successes > v.trials {
                return Err(io_err(path, format!("task {id}: {}/{} is not a valid count", v.successes, v.trials)));
            }
            Ok((id, v))
        })
        .collect()
}

#[derive(Debug, Serialize)]
struct SimSummary {
    noise: atom_core::sim::NoiseConfig,
    trials: u64,
    seed: u64,
    source: String,
    successes: u64,
    total: u64,
    pooled_percent: f64,
    tasks: serde_json::Map<String, serde_json::Value>,
}

fn percent(rate: Exact) -> f64 {
    let p = rate * Exact::from_integer(100);
    *p.numer() as f64 / *p.denom() as f64
}

/// Executes each task's plans under noise, or pools supplied counts.
pub fn sim(config: &RunConfig, args: &SimArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let dir = config.out.join("sim");
    let (counts, source) = if let Some(path) = &args.counts {
        let all = read_counts(path)?;
        let picked: BTreeMap<u32, SuccessCount> =
            all.into_iter().filter(|(k, _)| config.tasks.contains(k)).collect();
        (picked, format!("counts {}", path.display()))
    } else {
        let runs = args.runs.as_deref().map(run_plans).transpose()?;
        let mut counts = BTreeMap::new();
        for scenario in load_scenarios(&config.data, &config.tasks)? {
            let id = scenario.spec.id;
            let plans = match &runs {
                Some(runs) => runs
                    .get(&id)
                    .map(|r| r.plans.clone())
                    .ok_or_else(|| CliError::data(format!("missing plan file for task {id}")))?,
                None => fixture_plans(&config.data, id)?,
            };
            let task_seed = trial_seed(config.seed, u64::from(id));
            let count = if plans.is_empty() {
                SuccessCount {
                    successes: 0,
                    trials: config.trials,
                }
            } else {
                monte_carlo_task(&scenario.world, &plans, &config.noise, config.trials, task_seed)
                    .map_err(|e| CliError::data(format!("task {id}: {e}")))?
            };
            let mut trace = Vec::new();
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(task_seed, 0));
            for plan in &plans {
                let mut world = scenario.world.clone();
                let t = execute_plan_with(&mut world, plan, &config.noise, &mut rng)
                    .map_err(|e| CliError::data(format!("task {id}: {e}")))?;
                t.write_jsonl(&mut trace)?;
            }
            write_file(
                &dir.join("traces").join(format!("task_{id:02}.jsonl")),
                &String::from_utf8_lossy(&trace),
            )?;
            counts.insert(id, count);
        }
        let source = match &args.runs {
            Some(p) => format!("runs {}", p.display()),
            None => "fixtures".to_string(),
        };
        (counts, source)
    };

    let list: Vec<SuccessCount> = counts.values().copied().collect();
    let rate: Exact = pooled_success_rate(&list).map_err(|e| CliError::data(e.to_string()))?;
    for (id, c) in &counts {
        writeln!(out, "task {id:02}: {}/{}", c.successes, c.trials)?;
    }
    let successes: u64 = list.iter().map(|c| c.successes).sum();
    let total: u64 = list.iter().map(|c| c.trials).sum();
    let pooled = percent(rate);
    writeln!(out, "pooled: {successes}/{total} = {pooled:.1}%")?;

    // numeric key order; a BTreeMap<String, _> would put "10" before "2"
    let tasks: serde_json::Map<String, serde_json::Value> = counts
        .iter()
        .map(|(k, v)| (k.to_string(), serde_json::to_value(v).expect("count serializes")))
        .collect();
    write_file(&dir.join("success.json"), &(serde_json::to_string_pretty(&tasks).expect("counts serialize") + "\n"))?;
    let summary = SimSummary {
        noise: config.noise,
        trials: config.trials,
        seed: config.seed,
        source,
        successes,
        total,
        pooled_percent: pooled,
        tasks,
    };
    write_file(
        &dir.join("summary.json"),
        &(serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n"),
    )
}

fn embedder(config: &RunConfig) -> Result<Box<dyn Embedder>, CliError> {
    match config.embedder {
        EmbedderKind::Local => Ok(Box::new(LocalHashEmbedder::default())),
        EmbedderKind::Remote => {
            let endpoint = config
                .embed_endpoint
                .clone()
                .ok_or_else(|| CliError::config("the remote embedder needs \"embed_endpoint\" in the config file"))?;
            RemoteEmbedder::from_env(endpoint, config.embed_model.clone())
                .map(|e| Box::new(e) as Box<dyn Embedder>)
                .map_err(|e: EmbedError| CliError::Gateway(e.to_string()))
        }
    }
}

fn extension(format: ReportFormat) -> &'static str {
    match format {
        ReportFormat::Csv => "csv",
        ReportFormat::Md => "md",
        ReportFormat::Json => "json",
    }
}

/// Scores robot answers in a corpus against clustered human answers.
pub fn eval(config: &RunConfig, args: &EvalArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if !config.variant.is_detection() {
        return Err(CliError::config(format!("{} is not a detection variant", config.variant)));
    }
    let path = args.corpus.as_deref().ok_or_else(|| CliError::config("eval needs --corpus"))?;
    let corpus = Corpus::from_path(path).map_err(|e| io_err(path, e))?;
    let success = args.success.as_deref().map(read_counts).transpose()?.unwrap_or_default();
    let eval_config = EvalConfig {
        k_range: config.k_range.0..=config.k_range.1,
        seed: config.seed,
        mode: config.mode,
        segmenter: Segmenter::default(),
    };
    let embedder = embedder(config)?;
    let evaluation = evaluate_corpus(&corpus, embedder.as_ref(), &eval_config)?;
    let summary = summarize(&evaluation, &success, config.variant);
    let text = render_report(&summary, config.format);
    out.write_all(text.as_bytes())?;

    let dir = config.out.join("eval");
    write_file(&dir.join(format!("report.{}", extension(config.format))), &text)?;
    write_file(
        &dir.join("similarity.json"),
        &(serde_json::to_string_pretty(&evaluation).expect("evaluation serializes") + "\n"),
    )
}
