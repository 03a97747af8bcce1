use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::exec::{execute_plan_with, NoiseConfig, SimError};
use super::world::World;
use crate::model::ActionPlan;
use crate::scalar::Scalar;

/// Seed of trial `i`, decorrelated from neighbouring trials by a splitmix64 step.
pub fn trial_seed(seed: u64, i: u64) -> u64 {
    let mut z = seed ^ i.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuccessCount {
    pub successes: u64,
    pub trials: u64,
}

impl SuccessCount {
    pub fn rate<T: Scalar>(&self) -> T {
        T::from_u64(self.successes).expect("count fits")
            / T::from_u64(self.trials).expect("count fits")
    }

    /// Binomial standard error of the rate at probability `p`.
    pub fn standard_error(p: f64, trials: u64) -> f64 {
        (p * (1.0 - p) / trials as f64).sqrt()
    }
}

/// Runs `trials` independent executions from clones of `world`, in parallel.
pub fn monte_carlo_count(
    world: &World,
    plan: &ActionPlan,
    noise: &NoiseConfig,
    trials: u64,
    seed: u64,
) -> Result<SuccessCount, SimError> {
    monte_carlo_task(world, std::slice::from_ref(plan), noise, trials, seed)
}

/// Like [`monte_carlo_count`] for a whole task: each trial runs every plan
/// from the initial world and succeeds only if all of them do.
pub fn monte_carlo_task(
    world: &World,
    plans: &[ActionPlan],
    noise: &NoiseConfig,
    trials: u64,
    seed: u64,
) -> Result<SuccessCount, SimError> {
    if trials == 0 {
        return Err(SimError::NoTrials);
    }
    if plans.is_empty() || plans.iter().any(|p| p.steps.is_empty()) {
        return Err(SimError::EmptyPlan);
    }
    let successes = (0..trials)
        .into_par_iter()
        .map_init(
            || world.clone(),
            |w, i| {
                let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(seed, i));
                let ok = plans.iter().all(|plan| {
                    w.reset_from(world);
                    execute_plan_with(w, plan, noise, &mut rng)
                        .expect("plan non-empty")
                        .success
                });
                u64::from(ok)
            },
        )
        .sum();
    Ok(SuccessCount { successes, trials })
}

/// Fraction of seeded trials that succeed.
pub fn monte_carlo_success(
    world: &World,
    plan: &ActionPlan,
    noise: &NoiseConfig,
    trials: u64,
    seed: u64,
) -> Result<f64, SimError> {
    monte_carlo_count(world, plan, noise, trials, seed).map(|c| c.rate())
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PoolError {
    #[error("no trials to pool")]
    Empty,
    #[error("{successes} successes exceed {trials} trials")]
    Overcount { successes: u64, trials: u64 },
}

/// Pooled success rate over per-task tallies: total successes over total trials.
pub fn pooled_success_rate<T: Scalar>(counts: &[SuccessCount]) -> Result<T, PoolError> {
    let mut s = 0u64;
    let mut n = 0u64;
    for c in counts {
        if c.successes > c.trials {
            return Err(PoolError::Overcount {
                successes: c.successes,
                trials: c.trials,
            });
        }
        s += c.successes;
        n += c.trials;
    }
    if n == 0 {
        return Err(PoolError::Empty);
    }
    Ok(SuccessCount {
        successes: s,
        trials: n,
    }
    .rate())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Exact;

    #[test]
    fn pooled_rate_is_exact() {
        let counts: Vec<SuccessCount> = [8, 9, 5, 8, 4, 10, 4, 10, 5, 10, 5, 9, 4, 7, 4, 9]
            .iter()
            .map(|&s| SuccessCount {
                successes: s,
                trials: 10,
            })
            .collect();
        let exact: Exact = pooled_success_rate(&counts).unwrap();
        assert_eq!(exact, Exact::new(111, 160));
        let pct: f64 = pooled_success_rate::<f64>(&counts).unwrap() * 100.0;
        assert!((pct - 69.4).abs() <= 0.05);
    }

    #[test]
    fn pooling_errors() {
        assert_eq!(pooled_success_rate::<f64>(&[]), Err(PoolError::Empty));
        let bad = [SuccessCount {
            successes: 3,
            trials: 2,
        }];
        assert!(matches!(
            pooled_success_rate::<f64>(&bad),
            Err(PoolError::Overcount { .. })
        ));
    }

    #[test]
    fn trial_seeds_differ() {
        assert_ne!(trial_seed(1, 0), trial_seed(1, 1));
        assert_ne!(trial_seed(1, 0), trial_seed(2, 0));
    }
}
