//! One PASS/FAIL line per acceptance criterion. Exits nonzero only when a
//! criterion outside `UNATTAINABLE` fails.

#[allow(dead_code)]
#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use atom_core::assets::{actions_fixture_path, needs_fixture_path, DataRoot, BUILTIN_SCENARIOS};
use atom_core::constraints::{check_solution, Violation, ViolationCode};
use atom_core::eval::{
    ablation_report, avg_sim, grid_results, kmeans, likert_percent, proportion_rate, select_k_elbow,
};
use atom_core::model::RobotConstraints;
use atom_core::parse::{parse_action_list, parse_need_report, serialize_action_list};
use atom_core::prompts::PromptVariant;
use atom_core::scalar::{decimal, Exact};
use atom_core::scenario::load_all;
use atom_core::sim::{execute_plan, execute_primitive, monte_carlo_count, NoiseConfig, SuccessCount, World};
use common::{
    avg_sim_oracle, blobs, random_corpus, random_feasible_plan, random_noise, random_primitive, same_partition,
    REPORTED_SUCCESSES,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

/// Criteria that cannot hold for arithmetic reasons; they are reported but do not fail the target.
const UNATTAINABLE: [&str; 1] = ["likert conversion identity"];

const FULL: PromptVariant = PromptVariant::FullAtomConstraints;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn cli(args: &[&str]) -> Result<String, String> {
    let mut out = Vec::new();
    let argv = std::iter::once("atom-bot").chain(args.iter().copied());
    atom_cli::run(argv, &mut out).map_err(|e| e.to_string())?;
    Ok(String::from_utf8_lossy(&out).into_owned())
}

fn within_tenth(got: Exact, want_tenths: i64) -> bool {
    let gap = got - decimal(want_tenths, 1);
    gap <= decimal(5, 2) && -gap <= decimal(5, 2)
}

fn fixture_round_trip() -> Outcome {
    let started = Instant::now();
    let mut all_needs = String::new();
    let mut plan_count = 0;
    for id in 1..=BUILTIN_SCENARIOS {
        let raw = DataRoot::Builtin.read(&needs_fixture_path(id, FULL.as_str())).map_err(|e| e.to_string())?;
        let report = parse_need_report(&raw, FULL).map_err(|e| format!("task {id}: {e}"))?;
        let text = serde_json::to_string(&report.to_canonical_json()).map_err(|e| e.to_string())?;
        let again = parse_need_report(&text, FULL).map_err(|e| format!("task {id} reparse: {e}"))?;
        ensure(report.same_content(&again), format!("task {id} report drifted"))?;
        all_needs.push_str(&raw);

        let raw = DataRoot::Builtin.read(&actions_fixture_path(id)).map_err(|e| e.to_string())?;
        let plans = parse_action_list(&raw).map_err(|e| format!("task {id}: {e}"))?;
        let again = parse_action_list(&serialize_action_list(&plans)).map_err(|e| e.to_string())?;
        ensure(plans == again, format!("task {id} plans drifted"))?;
        plan_count += plans.len();
    }
    for key in ["suggested robot solution", "suggested_robot_solution", "suggested_robot_action"] {
        ensure(all_needs.contains(&format!("\"{key}\"")), format!("no fixture uses {key:?}"))?;
    }
    let elapsed = started.elapsed();
    ensure(elapsed < Duration::from_secs(1), format!("took {elapsed:?}"))?;
    Ok(format!("16 reports, {plan_count} plans, 3 key spellings, {elapsed:.0?}"))
}

fn artifacts(dir: &Path) -> Result<BTreeMap<String, String>, String> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(|e| e.to_string())? {
        let path = entry.map_err(|e| e.to_string())?.path();
        let text = fs::read_to_string(&path).map_err(|e| e.to_string())?;
        let kept: Vec<&str> = text
            .lines()
            .filter(|l| !l.contains("\"started_at\"") && !l.contains("\"finished_at\""))
            .collect();
        out.insert(path.file_name().unwrap().to_string_lossy().into_owned(), kept.join("\n"));
    }
    Ok(out)
}

fn replay_determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = tmp.path().to_str().unwrap();
    for _ in 0..2 {
        cli(&["pipeline", "--backend", "replay", "--tasks", "1..16", "--variant", "full", "--out", out])?;
    }
    let mut dirs: Vec<PathBuf> = fs::read_dir(tmp.path().join("runs"))
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().path())
        .collect();
    dirs.sort();
    ensure(dirs.len() == 2, format!("{} run directories", dirs.len()))?;
    let (a, b) = (artifacts(&dirs[0])?, artifacts(&dirs[1])?);
    ensure(a.len() == 16, format!("{} run files", a.len()))?;
    ensure(a == b, "run artifacts differ")?;
    Ok("16 run files identical across two runs".into())
}

fn zero_noise_execution() -> Outcome {
    let mut plans = 0;
    for s in load_all(&DataRoot::Builtin).map_err(|e| e.to_string())? {
        let raw = DataRoot::Builtin.read(&actions_fixture_path(s.spec.id)).map_err(|e| e.to_string())?;
        for plan in parse_action_list(&raw).map_err(|e| e.to_string())? {
            let mut world = s.world.clone();
            let trace = execute_plan(&mut world, &plan, &NoiseConfig::ZERO).map_err(|e| e.to_string())?;
            ensure(trace.success, format!("task {} plan {:?} failed", s.spec.id, plan.solution_text))?;
            plans += 1;
        }
    }
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = tmp.path().to_str().unwrap();
    let printed = cli(&["sim", "--noise", "0,0,0,0", "--trials", "10", "--out", out])?;
    ensure(printed.contains("pooled: 160/160 = 100.0%"), format!("zero noise printed {printed:?}"))?;

    let counts: BTreeMap<String, SuccessCount> = REPORTED_SUCCESSES
        .iter()
        .enumerate()
        .map(|(i, &successes)| ((i + 1).to_string(), SuccessCount { successes, trials: 10 }))
        .collect();
    let path = tmp.path().join("counts.json");
    fs::write(&path, serde_json::to_string(&counts).unwrap()).map_err(|e| e.to_string())?;
    let printed = cli(&["sim", "--counts", path.to_str().unwrap(), "--out", out])?;
    let rate = Exact::new(111, 160) * Exact::from_integer(100);
    ensure(within_tenth(rate, 694), "111/160 is not 69.4 within 0.05")?;
    ensure(printed.contains("pooled: 111/160 = 69.4%"), format!("counts printed {printed:?}"))?;
    Ok(format!("{plans} plans succeed, pooled 100.0%; injected counts pool to 69.4%"))
}

fn monte_carlo_vs_analytic() -> Outcome {
    let started = Instant::now();
    let scenarios = load_all(&DataRoot::Builtin).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let trials = 20_000;
    let mut worst: f64 = 0.0;
    for i in 0..50 {
        let s = &scenarios[i % scenarios.len()];
        let len = rng.random_range(1..=6);
        let plan = random_feasible_plan(&s.world, &mut rng, len);
        let noise = random_noise(&mut rng);
        let p = noise.analytic_success(&plan);
        let got = monte_carlo_count(&s.world, &plan, &noise, trials, rng.random()).map_err(|e| e.to_string())?;
        let se = SuccessCount::standard_error(p, trials);
        let emp: f64 = got.rate();
        let z = if se > 0.0 { (emp - p).abs() / se } else { 0.0 };
        ensure((emp - p).abs() <= 3.0 * se + 1e-12, format!("plan {i}: {emp} vs {p} (se {se})"))?;
        worst = worst.max(z);
    }
    let elapsed = started.elapsed();
    ensure(elapsed < Duration::from_secs(60), format!("took {elapsed:?}"))?;
    Ok(format!("50 plans within 3 SE (max {worst:.2}), {elapsed:.1?}"))
}

fn similarity_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let units = random_corpus(&mut rng);
        let dim = units[0].len();
        let robot: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let k = rng.random_range(1..=units.len().min(5));
        let m = kmeans(&units, k, rng.random()).map_err(|e| e.to_string())?;
        let mut total = 0.0;
        for c in &m.clusters {
            let got = avg_sim(&robot, c, &units).map_err(|e| e.to_string())?;
            let want = avg_sim_oracle(&robot, &units, &m.assignments, c.id);
            worst = worst.max((got - want).abs());
            total += proportion_rate::<f64>(c.size(), units.len()).map_err(|e| e.to_string())?;
        }
        ensure(worst < 1e-12, format!("corpus {i}: avg_sim off by {worst:e}"))?;
        ensure((total - 1.0).abs() < 1e-12, format!("corpus {i}: proportions sum to {total}"))?;
    }
    Ok(format!("100 corpora, max deviation {worst:e}"))
}

fn clustering_sanity() -> Outcome {
    let mut hits = 0;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (pts, labels) = blobs(12, &mut rng);
        let k = select_k_elbow(&pts, 2..=6, seed).map_err(|e| e.to_string())?.k;
        ensure(k == 3, format!("seed {seed}: elbow chose {k}"))?;
        let m = kmeans(&pts, 3, seed).map_err(|e| e.to_string())?;
        ensure(m.sse_history.windows(2).all(|w| w[1] <= w[0]), format!("seed {seed}: SSE rose"))?;
        hits += usize::from(same_partition(&m.assignments, &labels));
    }
    ensure(hits >= 95, format!("{hits}/100 partitions recovered"))?;
    Ok(format!("elbow 3 in 100/100, partition recovered in {hits}/100, SSE monotone"))
}

fn likert_identity() -> Outcome {
    let mut misses = Vec::new();
    let mut shown = Vec::new();
    for (mean, want) in [(642, 917), (615, 878), (617, 881)] {
        let got = likert_percent(decimal(mean, 2));
        let f = *got.numer() as f64 / *got.denom() as f64;
        shown.push(format!("{:.2} -> {f:.3}%", mean as f64 / 100.0));
        if !within_tenth(got, want) {
            misses.push(format!("{:.2}/7 is {f:.3}%, not {:.1}% within 0.05", mean as f64 / 100.0, want as f64 / 10.0));
        }
    }
    ensure(misses.is_empty(), misses.join("; "))?;
    Ok(shown.join(", "))
}

fn ablation_arithmetic() -> Outcome {
    let d = |m: i64| decimal(m, 1);
    let cells = grid_results([d(332), d(687), d(464), d(728)], [d(49), d(310), d(384), d(696)]);
    let t = ablation_report(&cells).map_err(|e| e.to_string())?;
    ensure(t.need_deltas.atom_removal == d(264), format!("need delta {}", t.need_deltas.atom_removal))?;
    ensure(t.solution_deltas.atom_removal == d(312), format!("solution atom delta {}", t.solution_deltas.atom_removal))?;
    ensure(
        t.solution_deltas.constraint_removal == d(386),
        format!("solution constraint delta {}", t.solution_deltas.constraint_removal),
    )?;
    Ok("need 26.4, solution 31.2 / 38.6, exact".into())
}

fn constraint_snapshot() -> Outcome {
    let constraints = RobotConstraints::default();
    let mut current: BTreeMap<String, Vec<Violation>> = BTreeMap::new();
    for id in 1..=BUILTIN_SCENARIOS {
        let raw = DataRoot::Builtin.read(&needs_fixture_path(id, FULL.as_str())).map_err(|e| e.to_string())?;
        let report = parse_need_report(&raw, FULL).map_err(|e| e.to_string())?;
        for need in &report.needs {
            current.insert(
                format!("task_{id:02}/{}", need.id),
                check_solution(&need.solution, &report.environment, &constraints),
            );
        }
    }
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data/constraint_snapshot.json");
    let text = fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    let frozen: BTreeMap<String, Vec<Violation>> = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    ensure(current == frozen, "findings differ from the frozen snapshot")?;
    let laptop = current
        .get("task_07/need2")
        .is_some_and(|v| v.iter().any(|x| x.code == ViolationCode::ForbiddenDevice && x.subject.contains("laptop")));
    ensure(laptop, "task 7 laptop screen protector not flagged")?;
    let flagged = current.values().filter(|v| !v.is_empty()).count();
    Ok(format!("{} solutions match, {flagged} flagged (task 7 laptop: ForbiddenDevice)", current.len()))
}

fn gripper_and_conservation() -> Outcome {
    let started = Instant::now();
    let worlds: Vec<World> = load_all(&DataRoot::Builtin)
        .map_err(|e| e.to_string())?
        .into_iter()
        .map(|s| s.world)
        .collect();
    let mut steps = 0;
    for case in 0..10_000u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(case);
        let mut world = worlds[rng.random_range(0..worlds.len())].clone();
        let before = world.object_multiset();
        let noise = NoiseConfig::uniform(rng.random_range(0.0..0.5)).unwrap();
        for _ in 0..rng.random_range(1..12) {
            let prim = random_primitive(&world, &mut rng);
            let held_before = world.robot.held.is_some();
            let (outcome, delta) = execute_primitive(&mut world, &prim, &noise, &mut rng);
            let consistent = match &world.robot.held {
                None => true,
                Some(name) => world.object(name).is_some_and(|o| o.location == world.robot.location),
            };
            ensure(consistent, format!("case {case}: held object left behind"))?;
            ensure(delta.held_after == world.robot.held, format!("case {case}: delta disagrees"))?;
            if held_before && prim.is_navigate() && outcome.is_ok() {
                ensure(world.robot.held.is_some(), format!("case {case}: navigation dropped the object"))?;
            }
            steps += 1;
        }
        ensure(world.object_multiset() == before, format!("case {case}: objects not conserved"))?;
    }
    let elapsed = started.elapsed();
    ensure(elapsed < Duration::from_secs(30), format!("took {elapsed:?}"))?;
    Ok(format!("10000 sequences, {steps} primitives, {elapsed:.1?}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("fixture round-trip", fixture_round_trip),
        ("replay determinism", replay_determinism),
        ("zero-noise execution", zero_noise_execution),
        ("monte-carlo vs analytic", monte_carlo_vs_analytic),
        ("similarity and proportion oracles", similarity_oracles),
        ("clustering sanity", clustering_sanity),
        ("likert conversion identity", likert_identity),
        ("ablation arithmetic", ablation_arithmetic),
        ("constraint snapshot", constraint_snapshot),
        ("single-gripper and conservation", gripper_and_conservation),
    ];
    let mut unexpected = 0;
    for (name, check) in criteria {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match result {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) if UNATTAINABLE.contains(&name) => {
                println!("FAIL {name}: {detail} (unattainable as stated)")
            }
            Err(detail) => {
                println!("FAIL {name}: {detail}");
                unexpected += 1;
            }
        }
    }
    if unexpected > 0 {
        eprintln!("{unexpected} criterion/criteria failed");
        std::process::exit(1);
    }
}
