//! Need detection, constraint filtering and decomposition into action plans.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Duration;

use chrono::{SecondsFormat, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::{debug, info, warn};

use crate::constraints::{check_plan, check_quota, check_solution, QuotaShortfall, Violation};
use crate::gateway::{ChatRequest, Gateway, GatewayError};
use crate::model::{ActionPlan, NeedReport, RobotConstraints};
use crate::names::{name_tokens, normalize_name};
use crate::parse::{parse_action_list, parse_need_report, strip_code_fences, ParseError};
use crate::prompts::{PromptError, PromptRegistry, PromptVariant};
use crate::scenario::Scenario;

/// Appended to the request after a reply fails to parse.
pub const CORRECTIVE: &str = "Reply with valid JSON only.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Detection,
    Decomposition,
    Solution,
    Plan,
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{0} is not a need-detection variant")]
    NotDetectionVariant(PromptVariant),
    #[error("report has no needs to decompose")]
    EmptyReport,
    #[error("{stage:?} reply still unparseable after {attempts} attempt(s): {last}")]
    ExhaustedRepairs {
        stage: Stage,
        last: ParseError,
        attempts: u32,
    },
    #[error("{solutions} solution(s) but only {plans} plan(s) could be aligned")]
    SolutionPlanMismatch { solutions: usize, plans: usize },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("thread pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub repair_limit: u32,
    pub temperature: f64,
    pub max_retries: u32,
    pub timeout: Duration,
    pub constraints: RobotConstraints,
    /// Attach the scene image to the action-generation call too.
    pub actions_with_image: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            repair_limit: 2,
            temperature: 0.0,
            max_retries: 2,
            timeout: Duration::from_secs(120),
            constraints: RobotConstraints::default(),
            actions_with_image: false,
        }
    }
}

/// A constraint finding tied to the stage and need that produced it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub stage: Stage,
    pub need_id: String,
    pub violation: Violation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineRun {
    pub scenario_id: u32,
    pub variant: PromptVariant,
    pub report: NeedReport,
    pub plans: Vec<ActionPlan>,
    /// Need id each plan was aligned to, parallel to `plans`.
    pub plan_need_ids: Vec<String>,
    pub violations: Vec<Finding>,
    pub attempts: u32,
    pub decompose_attempts: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quota_shortfall: Option<QuotaShortfall>,
    pub started_at: String,
    pub finished_at: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub report: NeedReport,
    pub attempts: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub plans: Vec<ActionPlan>,
    /// Index into the requested solutions for each plan.
    pub solution_index: Vec<usize>,
    pub attempts: u32,
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

#[derive(Clone)]
pub struct Pipeline {
    gateway: Gateway,
    prompts: PromptRegistry,
    config: PipelineConfig,
}

impl Pipeline {
    pub fn new(gateway: Gateway, prompts: PromptRegistry, config: PipelineConfig) -> Self {
        Self {
            gateway,
            prompts,
            config,
        }
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    fn request(&self, text: String) -> ChatRequest {
        let mut req = ChatRequest::new(String::new(), text);
        req.temperature = self.config.temperature;
        req.max_retries = self.config.max_retries;
        req.timeout = self.config.timeout;
        req
    }

    // Sends `req`, re-asking with the corrective line while the reply does
    // not parse. Fence stripping is tried on each reply before re-asking.
    fn ask_with_repair<T>(
        &self,
        stage: Stage,
        mut req: ChatRequest,
        parse: impl Fn(&str) -> Result<T, ParseError>,
    ) -> Result<(T, u32), PipelineError> {
        let base = req.user_text.clone();
        let budget = 1 + self.config.repair_limit;
        let mut last = ParseError::NoJsonFound;
        for attempt in 1..=budget {
            let reply = self.gateway.complete(&req)?;
            match parse(&reply.text).or_else(|_| parse(&strip_code_fences(&reply.text))) {
                Ok(v) => return Ok((v, attempt)),
                Err(e) => {
                    debug!(?stage, attempt, error = %e, "unparseable reply");
                    last = e;
                }
            }
            req.user_text = format!("{base}\n{CORRECTIVE}");
        }
        Err(PipelineError::ExhaustedRepairs {
            stage,
            last,
            attempts: budget,
        })
    }

    /// One fused detection call: observation, internal state and needs.
    pub fn detect_needs(
        &self,
        scenario: &Scenario,
        variant: PromptVariant,
    ) -> Result<Detection, PipelineError> {
        if !variant.is_detection() {
            return Err(PipelineError::NotDetectionVariant(variant));
        }
        let prompt = self.prompts.get(variant)?;
        let req = self
            .request(prompt.text.clone())
            .with_image(scenario.spec.image_ref.clone())
            .with_tag(scenario.spec.id, variant);
        let (mut report, attempts) =
            self.ask_with_repair(Stage::Detection, req, |t| parse_need_report(t, variant))?;
        report.raw_text = report.raw_text.trim_end().to_string();
        Ok(Detection { report, attempts })
    }

    /// Decomposes every solution of the report.
    pub fn decompose(
        &self,
        scenario: &Scenario,
        report: &NeedReport,
    ) -> Result<Decomposition, PipelineError> {
        if report.needs.is_empty() {
            return Err(PipelineError::EmptyReport);
        }
        self.decompose_solutions(scenario, &report.solutions())
    }

    /// Requests plans for `solutions` and aligns them in solution order.
    pub fn decompose_solutions(
        &self,
        scenario: &Scenario,
        solutions: &[&str],
    ) -> Result<Decomposition, PipelineError> {
        if solutions.is_empty() {
            return Err(PipelineError::EmptyReport);
        }
        let text = self.prompts.render_action_request(solutions)?;
        let mut req = self
            .request(text)
            .with_tag(scenario.spec.id, PromptVariant::ActionGeneration);
        if self.config.actions_with_image {
            req = req.with_image(scenario.spec.image_ref.clone());
        }
        let (plans, attempts) = self.ask_with_repair(Stage::Decomposition, req, parse_action_list)?;
        let order = align(solutions, &plans).ok_or(PipelineError::SolutionPlanMismatch {
            solutions: solutions.len(),
            plans: plans.len(),
        })?;
        if plans.len() > solutions.len() {
            debug!(extra = plans.len() - solutions.len(), "dropping unaligned plans");
        }
        let mut aligned = Vec::with_capacity(solutions.len());
        for (i, &p) in order.iter().enumerate() {
            let mut plan = plans[p].clone();
            plan.solution_text = solutions[i].to_string();
            aligned.push(plan);
        }
        Ok(Decomposition {
            plans: aligned,
            solution_index: (0..solutions.len()).collect(),
            attempts,
        })
    }

    /// Detection, solution checks, decomposition of surviving solutions, plan checks.
    pub fn run_full(
        &self,
        scenario: &Scenario,
        variant: PromptVariant,
    ) -> Result<PipelineRun, PipelineError> {
        let started_at = now();
        let Detection { report, attempts } = self.detect_needs(scenario, variant)?;
        let constraints = &self.config.constraints;
        let quota_shortfall = check_quota(&report, constraints);

        let mut violations = Vec::new();
        let mut surviving = Vec::new();
        for need in &report.needs {
            let found = check_solution(&need.solution, &report.environment, constraints);
            if found.is_empty() {
                surviving.push(need);
            }
            violations.extend(found.into_iter().map(|violation| Finding {
                stage: Stage::Solution,
                need_id: need.id.clone(),
                violation,
            }));
        }

        let (plans, plan_need_ids, decompose_attempts) = if surviving.is_empty() {
            warn!(scenario = scenario.spec.id, "every solution was rejected");
            (Vec::new(), Vec::new(), 0)
        } else {
            let texts: Vec<&str> = surviving.iter().map(|n| n.solution.as_str()).collect();
            let d = self.decompose_solutions(scenario, &texts)?;
            let ids = d
                .solution_index
                .iter()
                .map(|&i| surviving[i].id.clone())
                .collect();
            (d.plans, ids, d.attempts)
        };

        for (plan, need_id) in plans.iter().zip(&plan_need_ids) {
            let found = check_plan(
                plan,
                &scenario.world,
                &report.environment.possible_items,
                constraints,
            );
            violations.extend(found.into_iter().map(|violation| Finding {
                stage: Stage::Plan,
                need_id: need_id.clone(),
                violation,
            }));
        }

        info!(
            scenario = scenario.spec.id,
            %variant,
            needs = report.needs.len(),
            plans = plans.len(),
            findings = violations.len(),
            "run complete"
        );
        Ok(PipelineRun {
            scenario_id: scenario.spec.id,
            variant,
            report,
            plans,
            plan_need_ids,
            violations,
            attempts,
            decompose_attempts,
            quota_shortfall,
            started_at,
            finished_at: now(),
        })
    }

    /// Runs scenarios concurrently on `jobs` threads; results keep input order.
    pub fn run_many(
        &self,
        scenarios: &[Scenario],
        variant: PromptVariant,
        jobs: usize,
    ) -> Result<Vec<Result<PipelineRun, PipelineError>>, PipelineError> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build()
            .map_err(|e| PipelineError::Pool(e.to_string()))?;
        Ok(pool.install(|| {
            scenarios
                .par_iter()
                .map(|s| self.run_full(s, variant))
                .collect()
        }))
    }
}

fn comparable(text: &str) -> String {
    normalize_name(text.trim().trim_end_matches('.'))
}

fn overlap(a: &[String], b: &[String]) -> f64 {
    let inter = a.iter().filter(|t| b.contains(t)).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Plan index for every solution. Exact text matches (ignoring case and a
/// trailing period) are taken first; the rest are paired greedily by token
/// overlap. Plans left over are dropped; `None` if a solution gets no plan.
pub fn align(solutions: &[&str], plans: &[ActionPlan]) -> Option<Vec<usize>> {
    if plans.len() < solutions.len() {
        return None;
    }
    let mut assigned: Vec<Option<usize>> = vec![None; solutions.len()];
    let mut used = vec![false; plans.len()];
    for (i, s) in solutions.iter().enumerate() {
        let key = comparable(s);
        if let Some(p) = (0..plans.len()).find(|&p| !used[p] && comparable(&plans[p].solution_text) == key) {
            assigned[i] = Some(p);
            used[p] = true;
        }
    }
    let sol_tokens: Vec<Vec<String>> = solutions.iter().map(|s| name_tokens(s)).collect();
    let plan_tokens: Vec<Vec<String>> = plans.iter().map(|p| name_tokens(&p.solution_text)).collect();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, a) in assigned.iter().enumerate() {
        if a.is_some() {
            continue;
        }
        for p in (0..plans.len()).filter(|&p| !used[p]) {
            pairs.push((overlap(&sol_tokens[i], &plan_tokens[p]), i, p));
        }
    }
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    for (_, i, p) in pairs {
        if assigned[i].is_none() && !used[p] {
            assigned[i] = Some(p);
            used[p] = true;
        }
    }
    assigned.into_iter().collect()
}

/// Creates `out/runs/<UTC timestamp>/`, suffixing the name if it already exists.
pub fn create_run_dir(out: &Path) -> io::Result<PathBuf> {
    let stamp = Utc::now().format("%Y%m%dT%H%M%S%.3fZ").to_string();
    let base = out.join("runs");
    fs::create_dir_all(&base)?;
    let mut dir = base.join(&stamp);
    let mut n = 1;
    while dir.exists() {
        dir = base.join(format!("{stamp}-{n}"));
        n += 1;
    }
    fs::create_dir(&dir)?;
    Ok(dir)
}

pub fn run_file_name(run: &PipelineRun) -> String {
    format!("task_{:02}_{}.json", run.scenario_id, run.variant)
}

/// Writes the run as pretty JSON; timestamps sit on their own lines.
pub fn write_run(dir: &Path, run: &PipelineRun) -> io::Result<PathBuf> {
    let path = dir.join(run_file_name(run));
    let mut text = serde_json::to_string_pretty(run)?;
    text.push('\n');
    fs::write(&path, text)?;
    Ok(path)
}

pub fn read_run(path: &Path) -> io::Result<PipelineRun> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(io::Error::other)
}
