use std::collections::{BTreeMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{is_person, PERSON};
use crate::names::{name_tokens, normalize_name, same_name, tokens_subset};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Location {
    pub id: String,
    #[serde(default)]
    pub aliases: Vec<String>,
    #[serde(default)]
    pub adjacent: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UseEffect {
    /// Name of the boolean state flipped by a successful use, e.g. "on".
    pub toggles: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub name: String,
    pub location: String,
    #[serde(default)]
    pub on_floor: bool,
    #[serde(default)]
    pub graspable: bool,
    #[serde(default)]
    pub usable: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub use_effect: Option<UseEffect>,
    pub category: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RobotState {
    pub location: String,
    #[serde(default)]
    pub held: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct World {
    pub locations: Vec<Location>,
    pub objects: Vec<ObjectSpec>,
    /// Location id of the person.
    pub human: String,
    pub robot: RobotState,
    pub rng_seed: u64,
    /// Per-object boolean states toggled by `Use`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub states: BTreeMap<String, BTreeMap<String, bool>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WorldError {
    #[error("location {0:?} is declared twice")]
    DuplicateLocation(String),
    #[error("{context} refers to unknown location {location:?}")]
    UnknownLocation { context: String, location: String },
    #[error("object name {0:?} is not unique")]
    DuplicateObject(String),
    #[error("object {0:?} is usable but has no use effect")]
    MissingUseEffect(String),
    #[error("held object {0:?} is not in the world")]
    UnknownHeld(String),
    #[error("object {0:?} has an empty name")]
    EmptyName(String),
}

/// A resolved name: either an object index or a location id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Target {
    Object(usize),
    Location(String),
    Person,
}

impl World {
    pub fn validate(&self) -> Result<(), WorldError> {
        let mut ids = HashSet::new();
        for loc in &self.locations {
            if !ids.insert(loc.id.as_str()) {
                return Err(WorldError::DuplicateLocation(loc.id.clone()));
            }
        }
        let check = |context: String, location: &str| {
            if ids.contains(location) {
                Ok(())
            } else {
                Err(WorldError::UnknownLocation {
                    context,
                    location: location.to_string(),
                })
            }
        };
        for loc in &self.locations {
            for adj in &loc.adjacent {
                check(format!("location {}", loc.id), adj)?;
            }
        }
        let mut names = HashSet::new();
        for obj in &self.objects {
            let key = normalize_name(&obj.name);
            if key.is_empty() {
                return Err(WorldError::EmptyName(obj.name.clone()));
            }
            if !names.insert(key) {
                return Err(WorldError::DuplicateObject(obj.name.clone()));
            }
            check(format!("object {}", obj.name), &obj.location)?;
            if obj.usable && obj.use_effect.is_none() {
                return Err(WorldError::MissingUseEffect(obj.name.clone()));
            }
        }
        check("human".into(), &self.human)?;
        check("robot".into(), &self.robot.location)?;
        if let Some(held) = &self.robot.held {
            if self.object_index(held).is_none() {
                return Err(WorldError::UnknownHeld(held.clone()));
            }
        }
        Ok(())
    }

    pub fn location(&self, id: &str) -> Option<&Location> {
        self.locations.iter().find(|l| l.id == id)
    }

    /// Index of the object whose normalized name equals `name`.
    pub fn object_index(&self, name: &str) -> Option<usize> {
        self.objects.iter().position(|o| same_name(&o.name, name))
    }

    pub fn object(&self, name: &str) -> Option<&ObjectSpec> {
        self.object_index(name).map(|i| &self.objects[i])
    }

    /// Resolves an object name: normalized or token-equal match first, then
    /// token containment in either direction (closest token count wins).
    pub fn find_object(&self, name: &str) -> Option<usize> {
        if let Some(i) = self.object_index(name) {
            return Some(i);
        }
        let tokens = name_tokens(name);
        self.token_equal_object(&tokens).or_else(|| {
            best_subset(
                &tokens,
                self.objects.iter().map(|o| name_tokens(&o.name)).enumerate(),
            )
        })
    }

    fn token_equal_object(&self, tokens: &[String]) -> Option<usize> {
        if tokens.is_empty() {
            return None;
        }
        self.objects.iter().position(|o| name_tokens(&o.name) == tokens)
    }

    fn location_labels(loc: &Location) -> impl Iterator<Item = &str> {
        std::iter::once(loc.id.as_str()).chain(loc.aliases.iter().map(String::as_str))
    }

    /// Resolves a location id or alias.
    pub fn find_location(&self, name: &str) -> Option<&str> {
        self.find_location_exact(name)
            .or_else(|| self.find_location_subset(name))
    }

    fn find_location_exact(&self, name: &str) -> Option<&str> {
        self.locations
            .iter()
            .find(|l| Self::location_labels(l).any(|label| same_name(label, name)))
            .map(|l| l.id.as_str())
    }

    fn find_location_subset(&self, name: &str) -> Option<&str> {
        let tokens = name_tokens(name);
        let candidates = self.locations.iter().enumerate().flat_map(|(i, l)| {
            Self::location_labels(l).map(move |label| (i, name_tokens(label)))
        });
        best_subset(&tokens, candidates).map(|i| self.locations[i].id.as_str())
    }

    /// Resolution order used by navigation: exact object, exact location,
    /// token-equal object, then the token-containment fallbacks.
    pub fn resolve(&self, name: &str) -> Option<Target> {
        if is_person(name) {
            return Some(Target::Person);
        }
        if let Some(i) = self.object_index(name) {
            return Some(Target::Object(i));
        }
        if let Some(id) = self.find_location_exact(name) {
            return Some(Target::Location(id.to_string()));
        }
        let tokens = name_tokens(name);
        if let Some(i) = self.token_equal_object(&tokens) {
            return Some(Target::Object(i));
        }
        if let Some(i) = best_subset(
            &tokens,
            self.objects.iter().map(|o| name_tokens(&o.name)).enumerate(),
        ) {
            return Some(Target::Object(i));
        }
        self.find_location_subset(name)
            .map(|id| Target::Location(id.to_string()))
    }

    /// Location id a resolved target sits at.
    pub fn target_location<'a>(&'a self, target: &'a Target) -> &'a str {
        match target {
            Target::Object(i) => &self.objects[*i].location,
            Target::Location(id) => id,
            Target::Person => &self.human,
        }
    }

    /// Whether `to` is reachable from `from` over the adjacency graph.
    pub fn reachable(&self, from: &str, to: &str) -> bool {
        if from == to {
            return true;
        }
        let mut seen = HashSet::from([from]);
        let mut queue = VecDeque::from([from]);
        while let Some(cur) = queue.pop_front() {
            let Some(loc) = self.location(cur) else {
                continue;
            };
            for next in &loc.adjacent {
                if next == to {
                    return true;
                }
                if seen.insert(next.as_str()) {
                    queue.push_back(next.as_str());
                }
            }
        }
        false
    }

    /// Copies the state primitives can change (object locations, robot,
    /// toggles) from `origin`, which must share this world's layout.
    pub fn reset_from(&mut self, origin: &World) {
        debug_assert_eq!(self.objects.len(), origin.objects.len());
        for (o, src) in self.objects.iter_mut().zip(&origin.objects) {
            o.location.clone_from(&src.location);
        }
        self.robot.location.clone_from(&origin.robot.location);
        self.robot.held.clone_from(&origin.robot.held);
        if self.states != origin.states {
            self.states.clone_from(&origin.states);
        }
    }

    /// Sorted normalized object names; invariant under every primitive.
    pub fn object_multiset(&self) -> Vec<String> {
        let mut v: Vec<String> = self.objects.iter().map(|o| normalize_name(&o.name)).collect();
        v.sort();
        v
    }

    pub fn state_of(&self, object: &str, state: &str) -> bool {
        self.states
            .get(object)
            .and_then(|s| s.get(state))
            .copied()
            .unwrap_or(false)
    }

    /// Whether the named object sits where the person is.
    pub fn is_with_person(&self, object: &str) -> bool {
        self.object(object).is_some_and(|o| o.location == self.human)
    }
}

impl Target {
    pub fn describe(&self, world: &World) -> String {
        match self {
            Target::Object(i) => world.objects[*i].name.clone(),
            Target::Location(id) => id.clone(),
            Target::Person => PERSON.to_string(),
        }
    }
}

// Candidate whose tokens contain, or are contained in, the query with the
// smallest size difference; earliest wins ties.
fn best_subset<I>(query: &[String], candidates: I) -> Option<usize>
where
    I: Iterator<Item = (usize, Vec<String>)>,
{
    if query.is_empty() {
        return None;
    }
    let mut best: Option<(usize, usize)> = None;
    for (i, tokens) in candidates {
        if tokens_subset(query, &tokens) || tokens_subset(&tokens, query) {
            let diff = tokens.len().abs_diff(query.len());
            if best.is_none_or(|(_, d)| diff < d) {
                best = Some((i, diff));
            }
        }
    }
    best.map(|(i, _)| i)
}
