use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::world::ObjectSpec;
use crate::assets;
use crate::names::normalize_name;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SkillError {
    #[error("no demonstration covers {0:?}")]
    NoSkill(String),
    #[error("skill library is empty")]
    EmptyLibrary,
    #[error("similarity groups: {0}")]
    Groups(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimilarityGroups {
    pub groups: Vec<Vec<String>>,
}

impl SimilarityGroups {
    pub fn builtin() -> Self {
        serde_json::from_str(assets::SKILL_GROUPS).expect("bundled skill groups are valid")
    }

    pub fn from_json(text: &str) -> Result<Self, SkillError> {
        serde_json::from_str(text).map_err(|e| SkillError::Groups(e.to_string()))
    }

    fn group_of(&self, category: &str) -> Option<&[String]> {
        let key = normalize_name(category);
        self.groups
            .iter()
            .find(|g| g.iter().any(|c| normalize_name(c) == key))
            .map(Vec::as_slice)
    }
}

/// Recorded demonstrations keyed by object category.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillLibrary {
    pub demos: BTreeMap<String, String>,
    pub groups: SimilarityGroups,
}

impl SkillLibrary {
    pub fn new(groups: SimilarityGroups) -> Self {
        Self {
            demos: BTreeMap::new(),
            groups,
        }
    }

    pub fn with_demo(mut self, category: &str, demo_id: &str) -> Self {
        self.demos.insert(normalize_name(category), demo_id.to_string());
        self
    }
}

/// Exact category match, then the first demo in the object's similarity group.
pub fn retrieve_skill<'a>(object: &ObjectSpec, library: &'a SkillLibrary) -> Result<&'a str, SkillError> {
    if library.demos.is_empty() {
        return Err(SkillError::EmptyLibrary);
    }
    let key = normalize_name(&object.category);
    if let Some(id) = library.demos.get(&key) {
        return Ok(id);
    }
    library
        .groups
        .group_of(&key)
        .and_then(|group| {
            group
                .iter()
                .find_map(|c| library.demos.get(&normalize_name(c)))
        })
        .map(String::as_str)
        .ok_or_else(|| SkillError::NoSkill(object.name.clone()))
}
