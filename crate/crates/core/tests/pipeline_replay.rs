use atom_core::assets::DataRoot;
use atom_core::gateway::{Gateway, GatewayError};
use atom_core::pipeline::{
    create_run_dir, write_run, Pipeline, PipelineConfig, PipelineError, PipelineRun,
};
use atom_core::prompts::{PromptRegistry, PromptVariant};
use atom_core::scenario::load_all;
use atom_core::sim::{execute_plan, NoiseConfig};

const FULL: PromptVariant = PromptVariant::FullAtomConstraints;

fn pipeline() -> Pipeline {
    Pipeline::new(
        Gateway::replay(DataRoot::Builtin),
        PromptRegistry::builtin(),
        PipelineConfig::default(),
    )
}

fn without_timestamps(text: &str) -> String {
    text.lines()
        .filter(|l| !l.contains("\"started_at\"") && !l.contains("\"finished_at\""))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn replay_artifacts_are_stable() {
    let scenarios = load_all(&DataRoot::Builtin).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let mut dirs = Vec::new();
    for _ in 0..2 {
        let dir = create_run_dir(tmp.path()).unwrap();
        for run in pipeline().run_many(&scenarios, FULL, 4).unwrap() {
            write_run(&dir, &run.unwrap()).unwrap();
        }
        dirs.push(dir);
    }
    let mut names: Vec<_> = std::fs::read_dir(&dirs[0]).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 16);
    for name in names {
        let a = std::fs::read_to_string(dirs[0].join(&name)).unwrap();
        let b = std::fs::read_to_string(dirs[1].join(&name)).unwrap();
        assert_eq!(without_timestamps(&a), without_timestamps(&b), "{name:?}");
    }
}

#[test]
fn surviving_plans_align_and_execute() {
    let scenarios = load_all(&DataRoot::Builtin).unwrap();
    let runs: Vec<PipelineRun> = pipeline()
        .run_many(&scenarios, FULL, 2)
        .unwrap()
        .into_iter()
        .map(Result::unwrap)
        .collect();
    for (s, run) in scenarios.iter().zip(&runs) {
        assert!(run.attempts <= 1 + pipeline().config().repair_limit);
        let surviving: Vec<_> = run
            .report
            .needs
            .iter()
            .filter(|n| !run.violations.iter().any(|f| f.need_id == n.id))
            .collect();
        assert_eq!(run.plans.len(), surviving.len(), "task {}", s.spec.id);
        for (plan, need) in run.plans.iter().zip(surviving) {
            assert_eq!(plan.solution_text, need.solution);
            let mut world = s.world.clone();
            assert!(execute_plan(&mut world, plan, &NoiseConfig::ZERO).unwrap().success);
        }
    }
    assert!(runs[0].violations.is_empty());
    assert_eq!(runs[0].plans.len(), 3);
}

#[test]
fn ablation_variants_without_fixtures_report_missing_replay() {
    let scenarios = load_all(&DataRoot::Builtin).unwrap();
    let err = pipeline()
        .run_full(&scenarios[0], PromptVariant::NoAtomNoConstraints)
        .unwrap_err();
    assert!(matches!(
        err,
        PipelineError::Gateway(GatewayError::FixtureMissing { scenario: 1, .. })
    ));
}
