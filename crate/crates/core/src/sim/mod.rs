//! Discrete household simulator.
//!
//! Space is a graph of locations; "adjacent to an object" means standing at
//! the object's location. Each scan, grasp, place and use is one stochastic
//! checkpoint drawn from the [`NoiseConfig`].

mod exec;
mod montecarlo;
mod skills;
mod world;

pub use exec::{
    execute_plan, execute_plan_with, execute_primitive, scan_for, scan_with_noise, ExecError,
    ExecTrace, NoiseConfig, NoiseError, ObjectMove, Outcome, SimError, StateToggle, StepRecord,
    WorldDelta,
};
pub use montecarlo::{
    monte_carlo_count, monte_carlo_task, monte_carlo_success, pooled_success_rate, trial_seed, PoolError,
    SuccessCount,
};
pub use skills::{retrieve_skill, SimilarityGroups, SkillError, SkillLibrary};
pub use world::{Location, ObjectSpec, RobotState, Target, UseEffect, World, WorldError};
