//! Comparison of robot responses with clustered human responses.

mod ablation;
mod corpus;
mod embed;
mod kmeans;
mod likert;
mod report;
mod segment;
mod similarity;

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ablation::{ablation_report, grid_results, AblationCell, AblationTable, Deltas};
pub use corpus::{
    Corpus, CorpusError, CorpusRow, HumanResponseUnit, ResponseStage, RobotResponse,
    REQUIRED_COLUMNS, ROBOT_PARTICIPANT,
};
pub use embed::{tokenize, uniform_dimension, EmbedError, Embedder, LocalHashEmbedder, RemoteEmbedder, LOCAL_DIM};
pub use kmeans::{
    kmeans, kmeans_best, select_k_elbow, squared_distance, Cluster, ClusterError, ClusterModel,
    ElbowChoice, ELBOW_RESTARTS, K_CLAMP, MAX_ITERATIONS,
};
pub use likert::{likert_percent, likert_stats, LikertStats, SCALE_MAX, SCALE_MIN};
pub use report::{render_report, EvalSummary, ReportFormat, StageCell, TableRow};
pub use segment::{segment, Segmenter, DEFAULT_DELIMITERS};
pub use similarity::{
    assign_cluster, avg_sim, cos_sim, modal_cluster, proportion_rate, score, ClusterScore,
    SimilarityMode,
};

use crate::prompts::PromptVariant;
use crate::scalar::Real;
use crate::sim::SuccessCount;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("cluster {0} has no members")]
    EmptyCluster(usize),
    #[error("cluster member {0} is not in the unit list")]
    MemberOutOfRange(usize),
    #[error("cluster of {size} cannot be a share of {n} units")]
    Proportion { size: usize, n: usize },
    #[error("no Likert samples")]
    EmptySamples,
    #[error("Likert rating {0} outside 1..=7")]
    LikertOutOfRange(u8),
    #[error("ablation grid is missing {0}")]
    MissingCell(PromptVariant),
    #[error("task {task_id} has no human {stage} units")]
    NoUnits { task_id: u32, stage: ResponseStage },
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    /// Candidate k values for the elbow curve.
    pub k_range: RangeInclusive<usize>,
    pub seed: u64,
    pub mode: SimilarityMode,
    pub segmenter: Segmenter,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            k_range: 2..=6,
            seed: 0,
            mode: SimilarityMode::Assigned,
            segmenter: Segmenter::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityReport<T> {
    pub task_id: u32,
    pub stage: ResponseStage,
    pub variant: PromptVariant,
    pub mode: SimilarityMode,
    pub k: usize,
    /// Elbow pick before clamping.
    pub k_raw: usize,
    pub k_clamped: bool,
    pub n: usize,
    pub clusters: Vec<Cluster<T>>,
    pub assigned_cluster: usize,
    pub avg_sim: T,
    pub proportion: T,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub likert: Option<LikertStats<T>>,
}

/// Result of clustering one task's units and scoring the robot vector.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskScore<T> {
    pub k: usize,
    pub k_raw: usize,
    pub k_clamped: bool,
    pub score: ClusterScore<T>,
}

fn lexicographic<T: Real>(a: &[T], b: &[T]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y) {
            Some(Ordering::Equal) | None => continue,
            Some(o) => return o,
        }
    }
    a.len().cmp(&b.len())
}

/// Clusters `units` and scores `robot` against them.
///
/// Units are put into a canonical order before clustering, so the outcome
/// does not depend on the order they were supplied in. Member indices in the
/// result refer to the caller's order.
pub fn evaluate_task<T: Real>(
    units: &[Vec<T>],
    robot: &[T],
    config: &EvalConfig,
) -> Result<TaskScore<T>, EvalError> {
    let n = units.len();
    if n == 0 {
        return Err(ClusterError::InsufficientPoints { k: 1, n: 0 }.into());
    }
    let dim = uniform_dimension(units)?;
    if robot.len() != dim {
        return Err(EmbedError::DimensionMismatch {
            expected: dim,
            found: robot.len(),
        }
        .into());
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| lexicographic(&units[a], &units[b]));
    let sorted: Vec<Vec<T>> = order.iter().map(|&i| units[i].clone()).collect();

    let start = (*config.k_range.start()).max(1);
    let end = (*config.k_range.end()).min(n);
    let (k_raw, elbow_k) = if start <= end {
        let choice = select_k_elbow(&sorted, start..=end, config.seed)?;
        (choice.raw_k, choice.k)
    } else {
        (n, n)
    };
    let k = elbow_k.min(n);
    let model = kmeans_best(&sorted, k, config.seed, ELBOW_RESTARTS)?;
    let mut score = score(robot, model, &sorted, config.mode)?;

    let m = &mut score.model;
    for c in &mut m.clusters {
        c.members = c.members.iter().map(|&i| order[i]).collect();
        c.members.sort_unstable();
    }
    let mut assignments = vec![0; n];
    for (pos, &orig) in order.iter().enumerate() {
        assignments[orig] = m.assignments[pos];
    }
    m.assignments = assignments;
    Ok(TaskScore {
        k,
        k_raw,
        k_clamped: k != k_raw,
        score,
    })
}

/// Reports and satisfaction for every task in a corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusEvaluation<T> {
    pub reports: Vec<SimilarityReport<T>>,
    /// Satisfaction per (task, stage), keyed `task_stage` for stable JSON.
    pub satisfaction: BTreeMap<String, LikertStats<T>>,
}

pub fn satisfaction_key(task_id: u32, stage: ResponseStage) -> String {
    format!("{task_id}_{stage}")
}

/// Embeds human units and robot responses and scores every robot response
/// that has human units to compare against.
pub fn evaluate_corpus(
    corpus: &Corpus,
    embedder: &dyn Embedder,
    config: &EvalConfig,
) -> Result<CorpusEvaluation<f64>, EvalError> {
    let robots = corpus.robot_responses()?;
    let mut reports = Vec::new();
    let mut satisfaction = BTreeMap::new();
    for task_id in corpus.task_ids() {
        for stage in [ResponseStage::Need, ResponseStage::Solution, ResponseStage::Execution] {
            let ratings = corpus.ratings(task_id, stage);
            let likert = if ratings.is_empty() {
                None
            } else {
                Some(likert_stats::<f64>(&ratings)?)
            };
            if let Some(l) = likert {
                satisfaction.insert(satisfaction_key(task_id, stage), l);
            }
            if !stage.has_text() {
                continue;
            }
            let responses: Vec<&RobotResponse> = robots
                .range((task_id, stage, PromptVariant::FullAtomConstraints)..)
                .take_while(|((t, s, _), _)| *t == task_id && *s == stage)
                .map(|(_, r)| r)
                .collect();
            if responses.is_empty() {
                continue;
            }
            let units = corpus.human_units(task_id, stage, &config.segmenter);
            if units.is_empty() {
                return Err(EvalError::NoUnits { task_id, stage });
            }
            let texts: Vec<&str> = units.iter().map(|u| u.text.as_str()).collect();
            let vectors = embedder.embed(&texts)?;
            for robot in responses {
                let rv = embedder
                    .embed(&[robot.text.as_str()])?
                    .pop()
                    .ok_or_else(|| EmbedError::Provider("empty embedding reply".into()))?;
                let t = evaluate_task(&vectors, &rv, config)?;
                reports.push(SimilarityReport {
                    task_id,
                    stage,
                    variant: robot.variant,
                    mode: config.mode,
                    k: t.k,
                    k_raw: t.k_raw,
                    k_clamped: t.k_clamped,
                    n: vectors.len(),
                    clusters: t.score.model.clusters,
                    assigned_cluster: t.score.assigned_cluster,
                    avg_sim: t.score.avg_sim,
                    proportion: t.score.proportion,
                    likert,
                });
            }
        }
    }
    Ok(CorpusEvaluation {
        reports,
        satisfaction,
    })
}

/// Mean need and solution similarity per variant, for the ablation grid.
pub fn variant_means(reports: &[SimilarityReport<f64>]) -> BTreeMap<PromptVariant, AblationCell<f64>> {
    let mut acc: BTreeMap<PromptVariant, [(f64, usize); 2]> = BTreeMap::new();
    for r in reports {
        let slot = match r.stage {
            ResponseStage::Need => 0,
            ResponseStage::Solution => 1,
            ResponseStage::Execution => continue,
        };
        let e = acc.entry(r.variant).or_insert([(0.0, 0); 2]);
        e[slot].0 += r.avg_sim;
        e[slot].1 += 1;
    }
    let mean = |(s, n): (f64, usize)| if n == 0 { 0.0 } else { s / n as f64 };
    acc.into_iter()
        .map(|(v, [need, sol])| {
            (
                v,
                AblationCell {
                    need_sim: mean(need),
                    sol_sim: mean(sol),
                },
            )
        })
        .collect()
}

/// Assembles the per-task table for `variant` and the ablation grid when
/// all four detection variants were scored.
pub fn summarize(
    evaluation: &CorpusEvaluation<f64>,
    success: &BTreeMap<u32, SuccessCount>,
    variant: PromptVariant,
) -> EvalSummary {
    report::summarize(evaluation, success, variant)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn canonical(units: &[Vec<f64>], s: &TaskScore<f64>) -> (Vec<Vec<Vec<u64>>>, Vec<u64>, u64, u64) {
        let key = |i: usize| units[i].iter().map(|x| x.to_bits()).collect::<Vec<u64>>();
        let mut groups: Vec<Vec<Vec<u64>>> = s
            .score
            .model
            .clusters
            .iter()
            .map(|c| {
                let mut g: Vec<Vec<u64>> = c.members.iter().map(|&i| key(i)).collect();
                g.sort();
                g
            })
            .collect();
        groups.sort_by(|a, b| b.len().cmp(&a.len()).then(a.cmp(b)));
        let assigned = &s.score.model.clusters[s.score.assigned_cluster];
        let mut assigned_members: Vec<Vec<u64>> = assigned.members.iter().map(|&i| key(i)).collect();
        assigned_members.sort();
        (
            groups,
            assigned_members.concat(),
            s.score.avg_sim.to_bits(),
            s.score.proportion.to_bits(),
        )
    }

    #[test]
    fn robot_duplicate_of_unit_scores_one() {
        let e = LocalHashEmbedder::default();
        let texts = [
            "bring water", "bring water", "bring water", "water please", "wipe hands",
            "wipe hands napkin", "napkin", "spoon for soup", "spoon", "soup spoon",
        ];
        let units = e.embed(&texts).unwrap();
        let robot = e.embed_one("bring water").unwrap();
        let t = evaluate_task(&units, &robot, &EvalConfig::default()).unwrap();
        let c = &t.score.model.clusters[t.score.assigned_cluster];
        assert!(c.members.iter().all(|&i| texts[i].contains("water")));
        let expected = c.members.len() as f64 / 10.0;
        assert!((t.score.proportion - expected).abs() < 1e-12);
        let oracle: f64 = c.members.iter().map(|&i| cos_sim(&robot, &units[i])).sum::<f64>()
            / c.members.len() as f64;
        assert!((t.score.avg_sim - oracle).abs() < 1e-12);
    }

    #[test]
    fn single_unit_corpus() {
        let t = evaluate_task(&[vec![1.0, 0.0]], &[1.0, 0.0], &EvalConfig::default()).unwrap();
        assert_eq!(t.k, 1);
        assert_eq!(t.score.proportion, 1.0);
    }

    #[test]
    fn corpus_end_to_end() {
        let text = "\
participant_id,task_id,stage,text,likert,variant
p1,1,need,thirsty. hands are dirty,7,
p2,1,need,thirsty; needs a spoon,6,
p3,1,need,wants water. dirty hands,5,
robot,1,need,thirsty,,
robot,1,need,dirty hands,,no_atom_no_constraints
p1,1,execution,,6,
";
        let corpus = Corpus::parse(text).unwrap();
        let ev = evaluate_corpus(&corpus, &LocalHashEmbedder::default(), &EvalConfig::default()).unwrap();
        assert_eq!(ev.reports.len(), 2);
        let full = ev.reports.iter().find(|r| r.variant == PromptVariant::FullAtomConstraints).unwrap();
        assert_eq!(full.n, 6);
        assert_eq!(full.clusters.iter().map(|c| c.members.len()).sum::<usize>(), 6);
        assert!(full.avg_sim > 0.99);
        assert!((full.likert.unwrap().mean - 6.0).abs() < 1e-12);
        assert!(ev.satisfaction.contains_key("1_execution"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn unit_order_does_not_matter(
            raw in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 3), 4..16),
            robot in prop::collection::vec(-1.0f64..1.0, 3),
            shuffle_seed in any::<u64>(),
        ) {
            let config = EvalConfig::default();
            let a = evaluate_task(&raw, &robot, &config).unwrap();
            let mut shuffled = raw.clone();
            shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(shuffle_seed));
            let b = evaluate_task(&shuffled, &robot, &config).unwrap();
            prop_assert_eq!((a.k, a.k_raw, a.k_clamped), (b.k, b.k_raw, b.k_clamped));
            prop_assert_eq!(canonical(&raw, &a), canonical(&shuffled, &b));
        }

        #[test]
        fn proportions_sum_to_one(
            raw in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 2..5), 1..20),
            k in 1usize..6,
            seed in any::<u64>(),
        ) {
            let dim = raw[0].len();
            let pts: Vec<Vec<f64>> = raw.into_iter().map(|mut v| { v.resize(dim, 0.5); v }).collect();
            prop_assume!(k <= pts.len());
            let m = kmeans(&pts, k, seed).unwrap();
            let total: f64 = m.clusters.iter().map(|c| proportion_rate::<f64>(c.size(), pts.len()).unwrap()).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            prop_assert!(m.sse_history.windows(2).all(|w| w[1] <= w[0] + 1e-9 * (1.0 + w[0].abs())));
        }
    }
}
