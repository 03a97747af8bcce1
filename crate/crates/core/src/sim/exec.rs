use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::world::{Target, World};
use crate::model::{ActionPlan, ActionPrimitive};

/// Failure probabilities for the four stochastic checkpoints.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub p_scan_fail: f64,
    pub p_grasp_fail: f64,
    pub p_place_fail: f64,
    pub p_use_fail: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NoiseError {
    #[error("{name} = {value} is not a probability")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("expected four comma-separated probabilities, got {0:?}")]
    Format(String),
}

impl NoiseConfig {
    pub const ZERO: NoiseConfig = NoiseConfig {
        p_scan_fail: 0.0,
        p_grasp_fail: 0.0,
        p_place_fail: 0.0,
        p_use_fail: 0.0,
    };

    pub fn uniform(p: f64) -> Result<Self, NoiseError> {
        Self::new(p, p, p, p)
    }

    pub fn new(scan: f64, grasp: f64, place: f64, use_: f64) -> Result<Self, NoiseError> {
        let cfg = Self {
            p_scan_fail: scan,
            p_grasp_fail: grasp,
            p_place_fail: place,
            p_use_fail: use_,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), NoiseError> {
        for (name, value) in [
            ("p_scan_fail", self.p_scan_fail),
            ("p_grasp_fail", self.p_grasp_fail),
            ("p_place_fail", self.p_place_fail),
            ("p_use_fail", self.p_use_fail),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(NoiseError::OutOfRange { name, value });
            }
        }
        Ok(())
    }

    /// Parses `scan,grasp,place,use`.
    pub fn parse(text: &str) -> Result<Self, NoiseError> {
        let parts: Vec<f64> = text
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| NoiseError::Format(text.to_string()))?;
        match parts.as_slice() {
            [a, b, c, d] => Self::new(*a, *b, *c, *d),
            _ => Err(NoiseError::Format(text.to_string())),
        }
    }

    /// Probability that every checkpoint of `plan` survives.
    pub fn analytic_success(&self, plan: &ActionPlan) -> f64 {
        plan.steps
            .iter()
            .map(|s| match s {
                ActionPrimitive::Navigate { .. } => 1.0 - self.p_scan_fail,
                ActionPrimitive::Move { .. } => {
                    (1.0 - self.p_grasp_fail) * (1.0 - self.p_place_fail)
                }
                ActionPrimitive::Use { .. } => 1.0 - self.p_use_fail,
            })
            .product()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExecError {
    #[error("object {name:?} not found")]
    ObjectNotFound { name: String },
    #[error("destination {name:?} not found")]
    DestinationNotFound { name: String },
    #[error("scan for {name:?} failed")]
    ScanFailed { name: String },
    #[error("{to:?} is unreachable from {from:?}")]
    Unreachable { from: String, to: String },
    #[error("{name:?} is on the floor and out of reach")]
    GroundPickup { name: String },
    #[error("gripper already holds {held:?}")]
    GripperOccupied { held: String },
    #[error("{name:?} cannot be grasped")]
    NotGraspable { name: String },
    #[error("{name:?} has no use")]
    NotUsable { name: String },
    #[error("robot at {robot:?} is not next to {name:?}")]
    NotAdjacent { name: String, robot: String },
    #[error("grasp of {name:?} failed")]
    GraspFailed { name: String },
    #[error("placing {name:?} failed")]
    PlaceFailed { name: String },
    #[error("using {name:?} failed")]
    UseFailed { name: String },
}

impl ExecError {
    /// True for failures drawn from the noise model rather than plan errors.
    pub fn is_noise(&self) -> bool {
        matches!(
            self,
            ExecError::ScanFailed { .. }
                | ExecError::GraspFailed { .. }
                | ExecError::PlaceFailed { .. }
                | ExecError::UseFailed { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Ok,
    Failed { error: ExecError },
}

impl Outcome {
    pub fn is_ok(&self) -> bool {
        matches!(self, Outcome::Ok)
    }
}

/// State changes caused by one primitive.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldDelta {
    pub robot_from: String,
    pub robot_to: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub moved: Option<ObjectMove>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub toggled: Option<StateToggle>,
    pub held_after: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectMove {
    pub object: String,
    pub from: String,
    pub to: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateToggle {
    pub object: String,
    pub state: String,
    pub value: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    pub index: usize,
    pub primitive: ActionPrimitive,
    pub outcome: Outcome,
    pub delta: WorldDelta,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecTrace {
    pub steps: Vec<StepRecord>,
    pub success: bool,
}

impl ExecTrace {
    /// One JSON object per line, one line per step.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> io::Result<()> {
        for step in &self.steps {
            serde_json::to_writer(&mut out, step)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn first_failure(&self) -> Option<&ExecError> {
        self.steps.iter().find_map(|s| match &s.outcome {
            Outcome::Failed { error } => Some(error),
            Outcome::Ok => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("plan has no steps")]
    EmptyPlan,
    #[error("trials must be at least 1")]
    NoTrials,
}

// Draws one uniform and reports whether the checkpoint fails.
fn checkpoint<R: Rng + ?Sized>(rng: &mut R, p_fail: f64) -> bool {
    rng.random::<f64>() < p_fail
}

/// Resolves `name` as an object only; used by scans that must find a thing.
pub fn scan_for(world: &World, name: &str) -> Result<usize, ExecError> {
    world
        .find_object(name)
        .ok_or_else(|| ExecError::ObjectNotFound {
            name: name.to_string(),
        })
}

/// Noisy scan: resolution plus one scan checkpoint.
pub fn scan_with_noise<R: Rng + ?Sized>(
    world: &World,
    name: &str,
    noise: &NoiseConfig,
    rng: &mut R,
) -> Result<usize, ExecError> {
    let idx = scan_for(world, name)?;
    if checkpoint(rng, noise.p_scan_fail) {
        return Err(ExecError::ScanFailed {
            name: name.to_string(),
        });
    }
    Ok(idx)
}

fn relocate(world: &mut World, to: &str) {
    world.robot.location = to.to_string();
    if let Some(held) = world.robot.held.clone() {
        if let Some(i) = world.object_index(&held) {
            world.objects[i].location = to.to_string();
        }
    }
}

fn step_inner<R: Rng + ?Sized>(
    world: &mut World,
    p: &ActionPrimitive,
    noise: &NoiseConfig,
    rng: &mut R,
    delta: &mut WorldDelta,
) -> Result<(), ExecError> {
    match p {
        ActionPrimitive::Navigate { target } => {
            let resolved = world
                .resolve(target)
                .ok_or_else(|| ExecError::ObjectNotFound {
                    name: target.clone(),
                })?;
            if checkpoint(rng, noise.p_scan_fail) {
                return Err(ExecError::ScanFailed {
                    name: target.clone(),
                });
            }
            let dest = world.target_location(&resolved).to_string();
            if !world.reachable(&world.robot.location, &dest) {
                return Err(ExecError::Unreachable {
                    from: world.robot.location.clone(),
                    to: dest,
                });
            }
            relocate(world, &dest);
            Ok(())
        }
        ActionPrimitive::Move {
            object,
            destination,
        } => {
            let idx = world
                .find_object(object)
                .ok_or_else(|| ExecError::ObjectNotFound {
                    name: object.clone(),
                })?;
            if let Some(held) = &world.robot.held {
                return Err(ExecError::GripperOccupied { held: held.clone() });
            }
            let obj = &world.objects[idx];
            if obj.location != world.robot.location {
                return Err(ExecError::NotAdjacent {
                    name: obj.name.clone(),
                    robot: world.robot.location.clone(),
                });
            }
            if obj.on_floor {
                return Err(ExecError::GroundPickup {
                    name: obj.name.clone(),
                });
            }
            if !obj.graspable {
                return Err(ExecError::NotGraspable {
                    name: obj.name.clone(),
                });
            }
            let dest = match world.resolve(destination) {
                Some(Target::Object(d)) if d == idx => {
                    return Err(ExecError::DestinationNotFound {
                        name: destination.clone(),
                    })
                }
                Some(t) => world.target_location(&t).to_string(),
                None => {
                    return Err(ExecError::DestinationNotFound {
                        name: destination.clone(),
                    })
                }
            };
            if !world.reachable(&world.robot.location, &dest) {
                return Err(ExecError::Unreachable {
                    from: world.robot.location.clone(),
                    to: dest,
                });
            }
            let name = obj.name.clone();
            let from = obj.location.clone();
            if checkpoint(rng, noise.p_grasp_fail) {
                return Err(ExecError::GraspFailed { name });
            }
            world.robot.held = Some(name.clone());
            relocate(world, &dest);
            delta.moved = Some(ObjectMove {
                object: name.clone(),
                from,
                to: dest,
            });
            if checkpoint(rng, noise.p_place_fail) {
                return Err(ExecError::PlaceFailed { name });
            }
            world.robot.held = None;
            Ok(())
        }
        ActionPrimitive::Use { object } => {
            let idx = world
                .find_object(object)
                .ok_or_else(|| ExecError::ObjectNotFound {
                    name: object.clone(),
                })?;
            let obj = &world.objects[idx];
            if let Some(held) = &world.robot.held {
                if held != &obj.name {
                    return Err(ExecError::GripperOccupied { held: held.clone() });
                }
            }
            if obj.location != world.robot.location {
                return Err(ExecError::NotAdjacent {
                    name: obj.name.clone(),
                    robot: world.robot.location.clone(),
                });
            }
            let effect = match (&obj.use_effect, obj.usable) {
                (Some(e), true) => e.toggles.clone(),
                _ => {
                    return Err(ExecError::NotUsable {
                        name: obj.name.clone(),
                    })
                }
            };
            let name = obj.name.clone();
            if checkpoint(rng, noise.p_use_fail) {
                return Err(ExecError::UseFailed { name });
            }
            let slot = world
                .states
                .entry(name.clone())
                .or_default()
                .entry(effect.clone())
                .or_insert(false);
            *slot = !*slot;
            delta.toggled = Some(StateToggle {
                object: name,
                state: effect,
                value: *slot,
            });
            Ok(())
        }
    }
}

/// Executes one primitive in place. Failed steps leave the world as the
/// failure found it (a failed place keeps the object in the gripper).
pub fn execute_primitive<R: Rng + ?Sized>(
    world: &mut World,
    p: &ActionPrimitive,
    noise: &NoiseConfig,
    rng: &mut R,
) -> (Outcome, WorldDelta) {
    let mut delta = WorldDelta {
        robot_from: world.robot.location.clone(),
        ..WorldDelta::default()
    };
    let outcome = match step_inner(world, p, noise, rng, &mut delta) {
        Ok(()) => Outcome::Ok,
        Err(error) => Outcome::Failed { error },
    };
    delta.robot_to = world.robot.location.clone();
    delta.held_after = world.robot.held.clone();
    (outcome, delta)
}

/// Runs `plan` with an explicit generator, stopping at the first failure.
pub fn execute_plan_with<R: Rng + ?Sized>(
    world: &mut World,
    plan: &ActionPlan,
    noise: &NoiseConfig,
    rng: &mut R,
) -> Result<ExecTrace, SimError> {
    if plan.steps.is_empty() {
        return Err(SimError::EmptyPlan);
    }
    let mut steps = Vec::with_capacity(plan.steps.len());
    let mut success = true;
    for (index, p) in plan.steps.iter().enumerate() {
        let (outcome, delta) = execute_primitive(world, p, noise, rng);
        let failed = !outcome.is_ok();
        steps.push(StepRecord {
            index,
            primitive: p.clone(),
            outcome,
            delta,
        });
        if failed {
            success = false;
            break;
        }
    }
    Ok(ExecTrace { steps, success })
}

/// Runs `plan` seeded from `world.rng_seed`.
pub fn execute_plan(
    world: &mut World,
    plan: &ActionPlan,
    noise: &NoiseConfig,
) -> Result<ExecTrace, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(world.rng_seed);
    execute_plan_with(world, plan, noise, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::world::{Location, ObjectSpec, RobotState, UseEffect};
    use std::collections::BTreeMap;

    fn world() -> World {
        let loc = |id: &str, adj: &[&str]| Location {
            id: id.into(),
            aliases: vec![],
            adjacent: adj.iter().map(|s| s.to_string()).collect(),
        };
        let obj = |name: &str, at: &str| ObjectSpec {
            name: name.into(),
            location: at.into(),
            on_floor: false,
            graspable: true,
            usable: false,
            use_effect: None,
            category: name.into(),
        };
        let mut lamp = obj("lamp", "shelf");
        lamp.graspable = false;
        lamp.usable = true;
        lamp.use_effect = Some(UseEffect {
            toggles: "on".into(),
        });
        let mut sock = obj("sock", "sofa");
        sock.on_floor = true;
        World {
            locations: vec![
                loc("hub", &["shelf", "sofa"]),
                loc("shelf", &["hub"]),
                loc("sofa", &["hub"]),
            ],
            objects: vec![obj("blanket", "shelf"), obj("book", "shelf"), lamp, sock],
            human: "sofa".into(),
            robot: RobotState {
                location: "hub".into(),
                held: None,
            },
            rng_seed: 3,
            states: BTreeMap::new(),
        }
    }

    fn plan(steps: Vec<ActionPrimitive>) -> ActionPlan {
        ActionPlan::new("t", steps)
    }

    #[test]
    fn move_to_person_delivers() {
        let mut w = world();
        let p = plan(vec![
            ActionPrimitive::navigate("blanket"),
            ActionPrimitive::move_to("blanket", "person"),
        ]);
        let trace = execute_plan(&mut w, &p, &NoiseConfig::ZERO).unwrap();
        assert!(trace.success);
        assert!(w.is_with_person("blanket"));
        assert_eq!(w.robot.held, None);
    }

    #[test]
    fn use_toggles_state() {
        let mut w = world();
        let p = plan(vec![ActionPrimitive::navigate("lamp"), ActionPrimitive::use_("lamp")]);
        assert!(execute_plan(&mut w, &p, &NoiseConfig::ZERO).unwrap().success);
        assert!(w.state_of("lamp", "on"));
    }

    #[test]
    fn held_object_blocks_second_grasp() {
        let mut w = world();
        w.robot.location = "shelf".into();
        w.robot.held = Some("book".into());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (out, _) = execute_primitive(
            &mut w,
            &ActionPrimitive::move_to("blanket", "person"),
            &NoiseConfig::ZERO,
            &mut rng,
        );
        assert_eq!(
            out,
            Outcome::Failed {
                error: ExecError::GripperOccupied {
                    held: "book".into()
                }
            }
        );
    }

    #[test]
    fn floor_objects_are_out_of_reach() {
        let mut w = world();
        let p = plan(vec![
            ActionPrimitive::navigate("sock"),
            ActionPrimitive::move_to("sock", "person"),
        ]);
        let trace = execute_plan(&mut w, &p, &NoiseConfig::ZERO).unwrap();
        assert!(matches!(
            trace.first_failure(),
            Some(ExecError::GroundPickup { .. })
        ));
    }

    #[test]
    fn certain_grasp_failure() {
        let mut w = world();
        let noise = NoiseConfig::new(0.0, 1.0, 0.0, 0.0).unwrap();
        let p = plan(vec![
            ActionPrimitive::navigate("blanket"),
            ActionPrimitive::move_to("blanket", "person"),
        ]);
        let trace = execute_plan(&mut w, &p, &noise).unwrap();
        assert_eq!(trace.steps.len(), 2);
        assert!(matches!(
            trace.first_failure(),
            Some(ExecError::GraspFailed { .. })
        ));
    }

    #[test]
    fn certain_scan_failure() {
        let mut w = world();
        let noise = NoiseConfig::new(1.0, 0.0, 0.0, 0.0).unwrap();
        let p = plan(vec![ActionPrimitive::navigate("blanket")]);
        let trace = execute_plan(&mut w, &p, &noise).unwrap();
        assert!(matches!(trace.first_failure(), Some(ExecError::ScanFailed { .. })));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(
            scan_with_noise(&w, "blanket", &noise, &mut rng),
            Err(ExecError::ScanFailed { .. })
        ));
        assert!(matches!(
            scan_for(&w, "unicorn"),
            Err(ExecError::ObjectNotFound { .. })
        ));
    }

    #[test]
    fn empty_plan_is_rejected() {
        let mut w = world();
        assert_eq!(
            execute_plan(&mut w, &plan(vec![]), &NoiseConfig::ZERO),
            Err(SimError::EmptyPlan)
        );
    }

    #[test]
    fn deterministic_given_seed() {
        let noise = NoiseConfig::uniform(0.3).unwrap();
        let p = plan(vec![
            ActionPrimitive::navigate("blanket"),
            ActionPrimitive::move_to("blanket", "person"),
            ActionPrimitive::navigate("lamp"),
            ActionPrimitive::use_("lamp"),
        ]);
        let a = execute_plan(&mut world(), &p, &noise).unwrap();
        let b = execute_plan(&mut world(), &p, &noise).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn noise_parsing() {
        let n = NoiseConfig::parse("0.1, 0.2,0.3,0").unwrap();
        assert_eq!(n.p_place_fail, 0.3);
        assert!(NoiseConfig::parse("0.1,0.2").is_err());
        assert!(NoiseConfig::parse("0.1,0.2,0.3,1.5").is_err());
    }

    #[test]
    fn trace_jsonl_has_one_line_per_step() {
        let mut w = world();
        let p = plan(vec![
            ActionPrimitive::navigate("blanket"),
            ActionPrimitive::move_to("blanket", "person"),
        ]);
        let trace = execute_plan(&mut w, &p, &NoiseConfig::ZERO).unwrap();
        let mut buf = Vec::new();
        trace.write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.lines().all(|l| serde_json::from_str::<StepRecord>(l).is_ok()));
    }
}
