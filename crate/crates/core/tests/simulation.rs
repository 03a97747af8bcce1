mod common;

use std::time::{Duration, Instant};

use atom_core::assets::{actions_fixture_path, DataRoot, BUILTIN_SCENARIOS};
use atom_core::parse::parse_action_list;
use atom_core::scalar::{decimal, Exact};
use atom_core::scenario::load_all;
use atom_core::sim::{
    execute_plan, execute_primitive, monte_carlo_count, monte_carlo_task, pooled_success_rate, NoiseConfig,
    SuccessCount, World,
};
use common::{random_feasible_plan, random_noise, random_primitive, REPORTED_SUCCESSES};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn fixture_plans_succeed_without_noise() {
    let scenarios = load_all(&DataRoot::Builtin).unwrap();
    let mut counts = Vec::new();
    for s in &scenarios {
        let plans = parse_action_list(&DataRoot::Builtin.read(&actions_fixture_path(s.spec.id)).unwrap()).unwrap();
        for plan in plans {
            let mut world = s.world.clone();
            let trace = execute_plan(&mut world, &plan, &NoiseConfig::ZERO).unwrap();
            assert!(trace.success, "task {} plan {:?}: {:?}", s.spec.id, plan.solution_text, trace.first_failure());
            counts.push(SuccessCount { successes: 1, trials: 1 });
        }
    }
    assert_eq!(scenarios.len() as u32, BUILTIN_SCENARIOS);
    assert_eq!(pooled_success_rate::<Exact>(&counts).unwrap(), Exact::from_integer(1));
}

#[test]
fn whole_tasks_succeed_without_noise() {
    for s in load_all(&DataRoot::Builtin).unwrap() {
        let plans = parse_action_list(&DataRoot::Builtin.read(&actions_fixture_path(s.spec.id)).unwrap()).unwrap();
        let count = monte_carlo_task(&s.world, &plans, &NoiseConfig::ZERO, 3, 1).unwrap();
        assert_eq!(count.successes, 3, "task {}", s.spec.id);
    }
}

#[test]
fn reported_counts_pool_to_sixty_nine_point_four() {
    let counts: Vec<SuccessCount> = REPORTED_SUCCESSES
        .iter()
        .map(|&successes| SuccessCount { successes, trials: 10 })
        .collect();
    let rate: Exact = pooled_success_rate(&counts).unwrap();
    assert_eq!(rate, Exact::new(111, 160));
    let percent = rate * Exact::from_integer(100);
    let gap = percent - decimal(694, 1);
    assert!(gap <= decimal(5, 2) && -gap <= decimal(5, 2));
}

#[test]
fn monte_carlo_tracks_analytic_product() {
    let started = Instant::now();
    let scenarios = load_all(&DataRoot::Builtin).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let trials = 20_000;
    for i in 0..50 {
        let s = &scenarios[i % scenarios.len()];
        let len = rng.random_range(1..=6);
        let plan = random_feasible_plan(&s.world, &mut rng, len);
        let noise = random_noise(&mut rng);
        let p = noise.analytic_success(&plan);
        let got = monte_carlo_count(&s.world, &plan, &noise, trials, rng.random()).unwrap();
        let se = SuccessCount::standard_error(p, trials);
        let emp: f64 = got.rate();
        assert!((emp - p).abs() <= 3.0 * se + 1e-12, "plan {i}: {emp} vs {p} (se {se})");
    }
    assert!(started.elapsed() < Duration::from_secs(60));
}

fn held_is_consistent(world: &World) -> bool {
    match &world.robot.held {
        None => true,
        Some(name) => world.object(name).is_some_and(|o| o.location == world.robot.location),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]
    #[test]
    fn gripper_and_conservation(seed in any::<u64>(), task in 0usize..16, len in 1usize..12, p in 0.0f64..0.5) {
        let scenarios = scenarios();
        let mut world = scenarios[task].clone();
        let before = world.object_multiset();
        let noise = NoiseConfig::uniform(p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..len {
            let prim = random_primitive(&world, &mut rng);
            let held_before = world.robot.held.is_some();
            let (outcome, delta) = execute_primitive(&mut world, &prim, &noise, &mut rng);
            prop_assert!(held_is_consistent(&world));
            prop_assert_eq!(&delta.held_after, &world.robot.held);
            if held_before && prim.is_navigate() && outcome.is_ok() {
                prop_assert!(world.robot.held.is_some());
            }
        }
        prop_assert_eq!(world.object_multiset(), before);
    }
}

fn scenarios() -> &'static [World] {
    use std::sync::OnceLock;
    static CELL: OnceLock<Vec<World>> = OnceLock::new();
    CELL.get_or_init(|| {
        load_all(&DataRoot::Builtin)
            .unwrap()
            .into_iter()
            .map(|s| s.world)
            .collect()
    })
}
