//! Scenario files: the descriptive [`ScenarioSpec`] plus its executable [`World`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assets::{scenario_path, DataRoot, BUILTIN_SCENARIOS};
use crate::model::ScenarioSpec;
use crate::sim::{World, WorldError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(flatten)]
    pub spec: ScenarioSpec,
    pub world: World,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("unknown scenario {0}")]
    Unknown(u32),
    #[error("scenario {id}: {source}")]
    Json {
        id: u32,
        source: serde_json::Error,
    },
    #[error("scenario {id}: {source}")]
    World { id: u32, source: WorldError },
    #[error("scenario {id}: file declares id {declared}")]
    IdMismatch { id: u32, declared: u32 },
    #[error("scenario {id}: {count} auxiliary objects, expected 10 to 18")]
    AuxiliaryCount { id: u32, count: usize },
    #[error("scenario {id}: listed object {name:?} is missing from the world")]
    MissingObject { id: u32, name: String },
}

impl Scenario {
    pub fn from_json(id: u32, text: &str) -> Result<Self, ScenarioError> {
        let s: Scenario =
            serde_json::from_str(text).map_err(|source| ScenarioError::Json { id, source })?;
        if s.spec.id != id {
            return Err(ScenarioError::IdMismatch {
                id,
                declared: s.spec.id,
            });
        }
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let id = self.spec.id;
        let count = self.spec.auxiliary_objects.len();
        if !ScenarioSpec::AUXILIARY_RANGE.contains(&count) {
            return Err(ScenarioError::AuxiliaryCount { id, count });
        }
        self.world
            .validate()
            .map_err(|source| ScenarioError::World { id, source })?;
        for name in self
            .spec
            .visible_objects
            .iter()
            .chain(&self.spec.auxiliary_objects)
        {
            if self.world.object(name).is_none() {
                return Err(ScenarioError::MissingObject {
                    id,
                    name: name.clone(),
                });
            }
        }
        Ok(())
    }

    /// Whether `name` is part of the declared inventory (visible or auxiliary).
    pub fn in_inventory(&self, name: &str) -> bool {
        self.world.find_object(name).is_some()
    }
}

pub fn load_scenario(root: &DataRoot, id: u32) -> Result<Scenario, ScenarioError> {
    let rel = scenario_path(id);
    if !root.exists(&rel) {
        return Err(ScenarioError::Unknown(id));
    }
    let text = root.read(&rel).map_err(|_| ScenarioError::Unknown(id))?;
    Scenario::from_json(id, &text)
}

/// Loads scenarios `1..=16` from the root.
pub fn load_all(root: &DataRoot) -> Result<Vec<Scenario>, ScenarioError> {
    (1..=BUILTIN_SCENARIOS)
        .map(|id| load_scenario(root, id))
        .collect()
}
