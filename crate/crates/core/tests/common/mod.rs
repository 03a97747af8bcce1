#![allow(dead_code)]

use atom_core::model::{ActionPlan, ActionPrimitive, PERSON};
use atom_core::sim::{execute_primitive, NoiseConfig, World};
use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn names(world: &World) -> Vec<String> {
    let mut v: Vec<String> = world.objects.iter().map(|o| o.name.clone()).collect();
    v.extend(world.locations.iter().map(|l| l.id.clone()));
    v.push(PERSON.to_string());
    v
}

/// Any primitive over the world's vocabulary plus a name nothing resolves to.
pub fn random_primitive(world: &World, rng: &mut ChaCha8Rng) -> ActionPrimitive {
    let mut pool = names(world);
    pool.push("unicorn".into());
    let pick = |rng: &mut ChaCha8Rng| pool.choose(rng).unwrap().clone();
    match rng.random_range(0..3) {
        0 => ActionPrimitive::navigate(pick(rng)),
        1 => ActionPrimitive::move_to(pick(rng), pick(rng)),
        _ => ActionPrimitive::use_(pick(rng)),
    }
}

/// A plan of up to `len` steps that succeeds without noise from `world`.
pub fn random_feasible_plan(world: &World, rng: &mut ChaCha8Rng, len: usize) -> ActionPlan {
    let mut state = world.clone();
    let mut steps = Vec::new();
    while steps.len() < len {
        let mut accepted = false;
        for _ in 0..200 {
            let p = random_primitive(&state, rng);
            let mut trial = state.clone();
            if execute_primitive(&mut trial, &p, &NoiseConfig::ZERO, rng).0.is_ok() {
                state = trial;
                steps.push(p);
                accepted = true;
                break;
            }
        }
        if !accepted {
            break;
        }
    }
    ActionPlan::new("random", steps)
}

pub fn random_noise(rng: &mut ChaCha8Rng) -> NoiseConfig {
    let mut p = || rng.random_range(0.01..0.3);
    NoiseConfig::new(p(), p(), p(), p()).unwrap()
}

pub fn cos_oracle(a: &[f64], b: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for i in 0..a.len() {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na.sqrt() * nb.sqrt())
    }
}

/// Double loop over every unit, keeping those in the cluster.
pub fn avg_sim_oracle(robot: &[f64], units: &[Vec<f64>], assignments: &[usize], cluster: usize) -> f64 {
    let mut total = 0.0;
    let mut count = 0usize;
    for (i, unit) in units.iter().enumerate() {
        for (j, &a) in assignments.iter().enumerate() {
            if i == j && a == cluster {
                total += cos_oracle(robot, unit);
                count += 1;
            }
        }
    }
    total / count as f64
}

pub fn random_corpus(rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = rng.random_range(1..=20);
    let dim = rng.random_range(1..=8);
    (0..n)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect()
}

/// Three tight blobs on orthogonal axes of a unit sphere, labels alongside.
pub fn blobs(per: usize, rng: &mut ChaCha8Rng) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut pts = Vec::new();
    let mut labels = Vec::new();
    for label in 0..3 {
        for _ in 0..per {
            let mut v = vec![0.0; 6];
            v[label * 2] = 1.0;
            for x in v.iter_mut() {
                *x += rng.random_range(-0.08..0.08);
            }
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            pts.push(v.into_iter().map(|x| x / n).collect());
            labels.push(label);
        }
    }
    (pts, labels)
}

pub fn same_partition(a: &[usize], b: &[usize]) -> bool {
    a.len() == b.len() && (0..a.len()).all(|i| (0..a.len()).all(|j| (a[i] == a[j]) == (b[i] == b[j])))
}

/// Reported per-task success counts out of ten.
pub const REPORTED_SUCCESSES: [u64; 16] = [8, 9, 5, 8, 4, 10, 4, 10, 5, 10, 5, 9, 4, 7, 4, 9];
