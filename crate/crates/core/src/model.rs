//! Domain values exchanged between the pipeline, the constraint engine, the
//! simulator and the evaluator.

use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::names;
use crate::prompts::PromptVariant;

/// Observable cues about the person.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HumanObservation {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub facial_expression: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eye_gaze: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub head_direction: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gesture: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub posture: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub activity: Option<String>,
}

impl HumanObservation {
    pub const KEYS: [&'static str; 6] = [
        "facial_expression",
        "eye_gaze",
        "head_direction",
        "gesture",
        "posture",
        "activity",
    ];

    pub fn field_mut(&mut self, key: &str) -> Option<&mut Option<String>> {
        Some(match key {
            "facial_expression" => &mut self.facial_expression,
            "eye_gaze" => &mut self.eye_gaze,
            "head_direction" => &mut self.head_direction,
            "gesture" => &mut self.gesture,
            "posture" => &mut self.posture,
            "activity" => &mut self.activity,
            _ => return None,
        })
    }

    fn fields(&self) -> [(&'static str, &Option<String>); 6] {
        [
            ("facial_expression", &self.facial_expression),
            ("eye_gaze", &self.eye_gaze),
            ("head_direction", &self.head_direction),
            ("gesture", &self.gesture),
            ("posture", &self.posture),
            ("activity", &self.activity),
        ]
    }

    pub fn has_any(&self) -> bool {
        self.fields()
            .iter()
            .any(|(_, v)| v.as_deref().is_some_and(|s| !s.trim().is_empty()))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvironmentObservation {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lighting: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sound: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<String>,
    /// Object name to affordance text, in reply order.
    #[serde(default)]
    pub objects: IndexMap<String, String>,
    #[serde(default)]
    pub possible_items: Vec<String>,
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    Touch,
    Taste,
    Vision,
    Sound,
    Smell,
    Vestibular,
    Proprioception,
    Interoception,
}

impl Sense {
    pub const ALL: [Sense; 8] = [
        Sense::Touch,
        Sense::Taste,
        Sense::Vision,
        Sense::Sound,
        Sense::Smell,
        Sense::Vestibular,
        Sense::Proprioception,
        Sense::Interoception,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Sense::Touch => "touch",
            Sense::Taste => "taste",
            Sense::Vision => "vision",
            Sense::Sound => "sound",
            Sense::Smell => "smell",
            Sense::Vestibular => "vestibular",
            Sense::Proprioception => "proprioception",
            Sense::Interoception => "interoception",
        }
    }

    pub fn from_key(key: &str) -> Option<Sense> {
        Sense::ALL.into_iter().find(|s| s.as_str() == key)
    }
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum MentalFacet {
    Emotion,
    Attention,
    Desire,
    Intention,
}

impl MentalFacet {
    pub const ALL: [MentalFacet; 4] = [
        MentalFacet::Emotion,
        MentalFacet::Attention,
        MentalFacet::Desire,
        MentalFacet::Intention,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MentalFacet::Emotion => "emotion",
            MentalFacet::Attention => "attention",
            MentalFacet::Desire => "desire",
            MentalFacet::Intention => "intention",
        }
    }

    pub fn from_key(key: &str) -> Option<MentalFacet> {
        MentalFacet::ALL.into_iter().find(|m| m.as_str() == key)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InternalState {
    #[serde(default)]
    pub physical: IndexMap<Sense, String>,
    #[serde(default)]
    pub mental: IndexMap<MentalFacet, String>,
}

impl InternalState {
    pub fn has_emotion_and_intention(&self) -> bool {
        [MentalFacet::Emotion, MentalFacet::Intention]
            .iter()
            .all(|k| self.mental.get(k).is_some_and(|v| !v.trim().is_empty()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Need {
    pub id: String,
    pub description: String,
    pub solution: String,
    /// Whether the solution mentions one of the report's possible items.
    pub uses_possible_item: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeedReport {
    pub environment: EnvironmentObservation,
    pub human: HumanObservation,
    pub state: InternalState,
    pub needs: Vec<Need>,
    pub raw_text: String,
    pub variant: PromptVariant,
}

impl NeedReport {
    pub fn solutions(&self) -> Vec<&str> {
        self.needs.iter().map(|n| n.solution.as_str()).collect()
    }

    /// Equality over parsed content, ignoring the verbatim reply text.
    pub fn same_content(&self, other: &NeedReport) -> bool {
        self.environment == other.environment
            && self.human == other.human
            && self.state == other.state
            && self.needs == other.needs
            && self.variant == other.variant
    }

    /// Reply-shaped JSON with canonical keys; the human block is nested under
    /// the environment. Feeding it back through the parser yields the same
    /// content.
    pub fn to_canonical_json(&self) -> Value {
        let env = &self.environment;
        let mut e = Map::new();
        for (k, v) in [
            ("location", &env.location),
            ("lighting", &env.lighting),
            ("sound", &env.sound),
            ("temperature", &env.temperature),
        ] {
            if let Some(v) = v {
                e.insert(k.into(), Value::String(v.clone()));
            }
        }
        e.insert(
            "objects".into(),
            Value::Object(
                env.objects
                    .iter()
                    .map(|(k, v)| (k.clone(), Value::String(v.clone())))
                    .collect(),
            ),
        );
        e.insert("possible_items".into(), json!({ "items": env.possible_items }));

        let mut h = Map::new();
        for (k, v) in self.human.fields() {
            if let Some(v) = v {
                h.insert(k.into(), Value::String(v.clone()));
            }
        }
        for (k, v) in &self.state.mental {
            h.insert(k.as_str().into(), Value::String(v.clone()));
        }
        for (k, v) in &self.state.physical {
            h.insert(k.as_str().into(), Value::String(v.clone()));
        }
        let needs: Map<String, Value> = self
            .needs
            .iter()
            .map(|n| {
                (
                    n.id.clone(),
                    json!({
                        "description": n.description,
                        "suggested_robot_solution": n.solution,
                    }),
                )
            })
            .collect();
        h.insert("needs".into(), Value::Object(needs));
        e.insert("human".into(), Value::Object(h));
        json!({ "environment": e })
    }
}

/// One executable step.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum ActionPrimitive {
    Navigate { target: String },
    Move { object: String, destination: String },
    Use { object: String },
}

/// Reserved destination resolved to the person's location by the simulator.
pub const PERSON: &str = "person";

impl ActionPrimitive {
    pub fn navigate(target: impl Into<String>) -> Self {
        ActionPrimitive::Navigate {
            target: target.into(),
        }
    }

    pub fn move_to(object: impl Into<String>, destination: impl Into<String>) -> Self {
        ActionPrimitive::Move {
            object: object.into(),
            destination: destination.into(),
        }
    }

    pub fn use_(object: impl Into<String>) -> Self {
        ActionPrimitive::Use {
            object: object.into(),
        }
    }

    pub fn is_navigate(&self) -> bool {
        matches!(self, ActionPrimitive::Navigate { .. })
    }

    /// Object names the step refers to, excluding the reserved person token.
    pub fn object_names(&self) -> Vec<&str> {
        match self {
            ActionPrimitive::Navigate { target } => vec![target],
            ActionPrimitive::Move {
                object,
                destination,
            } => {
                if is_person(destination) {
                    vec![object]
                } else {
                    vec![object, destination]
                }
            }
            ActionPrimitive::Use { object } => vec![object],
        }
    }
}

pub fn is_person(name: &str) -> bool {
    names::normalize_name(name) == PERSON
}

impl fmt::Display for ActionPrimitive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActionPrimitive::Navigate { target } => write!(f, "Navigate({target})"),
            ActionPrimitive::Move {
                object,
                destination,
            } => write!(f, "Move({object} -> {destination})"),
            ActionPrimitive::Use { object } => write!(f, "Use({object})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionPlan {
    pub solution_text: String,
    pub steps: Vec<ActionPrimitive>,
}

impl ActionPlan {
    pub fn new(solution_text: impl Into<String>, steps: Vec<ActionPrimitive>) -> Self {
        Self {
            solution_text: solution_text.into(),
            steps,
        }
    }

    /// Stochastic checkpoints the simulator draws for this plan:
    /// one per scan, two per move (grasp and place), one per use.
    pub fn checkpoint_count(&self) -> usize {
        self.steps
            .iter()
            .map(|s| match s {
                ActionPrimitive::Navigate { .. } | ActionPrimitive::Use { .. } => 1,
                ActionPrimitive::Move { .. } => 2,
            })
            .sum()
    }
}

/// Capability flags of the robot; defaults mirror the prompt's constraint sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RobotConstraints {
    pub arm_count: u32,
    pub can_reach_floor: bool,
    pub verbal_allowed: bool,
    pub forbidden_device_classes: Vec<String>,
    pub mobility: bool,
    /// Enforce the "6 needs, 3 using possible items" quota.
    #[serde(default)]
    pub strict_quota: bool,
}

impl Default for RobotConstraints {
    fn default() -> Self {
        Self {
            arm_count: 1,
            can_reach_floor: false,
            verbal_allowed: false,
            forbidden_device_classes: vec!["computer".into(), "phone".into(), "laptop".into()],
            mobility: true,
            strict_quota: false,
        }
    }
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum Scene {
    Kitchen,
    Office,
    HomeGym,
    LivingRoom,
}

impl Scene {
    pub const ALL: [Scene; 4] = [Scene::Kitchen, Scene::Office, Scene::HomeGym, Scene::LivingRoom];
}

/// Descriptive half of a scenario file; the executable world sits next to it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub id: u32,
    pub scene: Scene,
    pub image_ref: String,
    pub visible_objects: Vec<String>,
    pub auxiliary_objects: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotation: Option<String>,
}

impl ScenarioSpec {
    pub const AUXILIARY_RANGE: std::ops::RangeInclusive<usize> = 10..=18;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_constraints_mirror_prompt() {
        let c = RobotConstraints::default();
        assert_eq!(c.arm_count, 1);
        assert!(!c.can_reach_floor);
        assert!(!c.verbal_allowed);
        assert!(c.mobility);
        assert_eq!(c.forbidden_device_classes, ["computer", "phone", "laptop"]);
    }

    #[test]
    fn primitive_serde_is_tagged() {
        let p = ActionPrimitive::move_to("water bottle", "person");
        let v = serde_json::to_value(&p).unwrap();
        assert_eq!(
            v,
            json!({"op": "move", "object": "water bottle", "destination": "person"})
        );
        let back: ActionPrimitive = serde_json::from_value(v).unwrap();
        assert_eq!(back, p);
        assert_eq!(p.object_names(), ["water bottle"]);
    }

    #[test]
    fn checkpoints_per_primitive() {
        let plan = ActionPlan::new(
            "x",
            vec![
                ActionPrimitive::navigate("a"),
                ActionPrimitive::move_to("a", "b"),
                ActionPrimitive::use_("a"),
            ],
        );
        assert_eq!(plan.checkpoint_count(), 4);
    }
}
