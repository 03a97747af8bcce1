//! Embodiment rules checked against solution sentences and action plans.

use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assets;
use crate::model::{is_person, ActionPlan, ActionPrimitive, EnvironmentObservation, NeedReport, RobotConstraints};
use crate::names;
use crate::sim::World;

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
pub enum ViolationCode {
    GroundPickup,
    SecondArmNeeded,
    VerbalSolution,
    ForbiddenDevice,
    NoAction,
    UnknownObject,
    HumanContact,
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub subject: String,
    pub detail: String,
}

impl Violation {
    fn new(code: ViolationCode, subject: impl Into<String>, detail: impl Into<String>) -> Self {
        Self {
            code,
            subject: subject.into(),
            detail: detail.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({}): {}", self.code, self.subject, self.detail)
    }
}

#[derive(Debug, Error)]
#[error("lexicon: {0}")]
pub struct LexiconError(#[from] serde_json::Error);

/// Word lists driving the solution-text rules.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lexicon {
    pub verbal_verbs: Vec<String>,
    pub action_verbs: Vec<String>,
    pub forbidden_device_classes: Vec<String>,
    pub function_words: Vec<String>,
}

impl Lexicon {
    pub fn from_json(text: &str) -> Result<Self, LexiconError> {
        let mut lex: Lexicon = serde_json::from_str(text)?;
        for list in [
            &mut lex.verbal_verbs,
            &mut lex.action_verbs,
            &mut lex.forbidden_device_classes,
            &mut lex.function_words,
        ] {
            for w in list.iter_mut() {
                *w = w.trim().to_lowercase();
            }
        }
        Ok(lex)
    }

    pub fn builtin() -> &'static Lexicon {
        static LEX: OnceLock<Lexicon> = OnceLock::new();
        LEX.get_or_init(|| Lexicon::from_json(assets::LEXICON).expect("bundled lexicon is valid"))
    }

    fn is_function_word(&self, w: &str) -> bool {
        self.function_words.iter().any(|f| f == w)
    }
}

fn clauses(text: &str) -> Vec<Vec<String>> {
    text.split(|c: char| matches!(c, '.' | ',' | ';' | ':' | '!' | '?' | '(' | ')'))
        .map(|clause| {
            clause
                .split(|c: char| !(c.is_alphanumeric() || c == '-'))
                .filter(|w| !w.is_empty())
                .map(str::to_lowercase)
                .collect::<Vec<_>>()
        })
        .filter(|c| !c.is_empty())
        .collect()
}

/// Whether `word` is `verb` or a regular inflection of it.
pub fn inflects(word: &str, verb: &str) -> bool {
    if word == verb {
        return true;
    }
    let Some(rest) = word.strip_prefix(verb) else {
        return irregular_stem(word, verb);
    };
    if matches!(rest, "s" | "es" | "ed" | "d" | "ing") {
        return true;
    }
    // Doubled final consonant: set -> setting, stop -> stopped.
    let last = verb.chars().last().unwrap_or(' ');
    let doubled: String = [last].into_iter().collect();
    rest.strip_prefix(doubled.as_str())
        .is_some_and(|r| matches!(r, "ed" | "ing"))
}

fn irregular_stem(word: &str, verb: &str) -> bool {
    if let Some(stem) = verb.strip_suffix('e') {
        if let Some(rest) = word.strip_prefix(stem) {
            return matches!(rest, "ing" | "ed");
        }
    }
    if let Some(stem) = verb.strip_suffix('y') {
        if let Some(rest) = word.strip_prefix(stem) {
            return matches!(rest, "ies" | "ied");
        }
    }
    false
}

fn any_verb(words: &[String], verbs: &[String]) -> Option<String> {
    words
        .iter()
        .find_map(|w| verbs.iter().find(|v| inflects(w, v)).cloned())
}

/// Solution-text rules: verbal-only solutions, missing actions, forbidden devices.
pub fn check_solution(
    solution: &str,
    env: &EnvironmentObservation,
    constraints: &RobotConstraints,
) -> Vec<Violation> {
    check_solution_with(solution, env, constraints, Lexicon::builtin())
}

pub fn check_solution_with(
    solution: &str,
    env: &EnvironmentObservation,
    constraints: &RobotConstraints,
    lexicon: &Lexicon,
) -> Vec<Violation> {
    let parts = clauses(solution);
    let words: Vec<String> = parts.iter().flatten().cloned().collect();
    let mut out = Vec::new();

    let verbal = any_verb(&words, &lexicon.verbal_verbs);
    let action = any_verb(&words, &lexicon.action_verbs);
    match (verbal, action) {
        (Some(v), None) if !constraints.verbal_allowed => out.push(Violation::new(
            ViolationCode::VerbalSolution,
            v,
            "verbal instruction with no physical action",
        )),
        (None, None) => out.push(Violation::new(
            ViolationCode::NoAction,
            solution.trim(),
            "no action verb",
        )),
        _ => {}
    }

    for device in device_targets(&parts, env, constraints, lexicon) {
        out.push(Violation::new(
            ViolationCode::ForbiddenDevice,
            device,
            "solution interacts with a forbidden device",
        ));
    }
    out
}

// A device counts as the interaction target when its name closes a noun
// phrase: followed by a function word or the end of a clause. "phone stand"
// names a different object and is not flagged.
fn device_targets(
    parts: &[Vec<String>],
    env: &EnvironmentObservation,
    constraints: &RobotConstraints,
    lexicon: &Lexicon,
) -> Vec<String> {
    let classes: Vec<String> = constraints
        .forbidden_device_classes
        .iter()
        .map(|c| c.to_lowercase())
        .collect();
    let is_class = |w: &str| {
        classes
            .iter()
            .find(|c| w == c.as_str() || w.strip_suffix('s') == Some(c.as_str()))
    };
    // Inventory names ending in a device class ("work laptop") are reported by full name.
    let mut named: Vec<(Vec<String>, &str)> = Vec::new();
    for name in env.objects.keys() {
        let toks: Vec<String> = name
            .split(|c: char| !(c.is_alphanumeric() || c == '-'))
            .filter(|w| !w.is_empty())
            .map(str::to_lowercase)
            .collect();
        if toks.len() > 1 && toks.last().is_some_and(|w| is_class(w).is_some()) {
            named.push((toks, name.as_str()));
        }
    }

    let mut found: Vec<String> = Vec::new();
    for clause in parts {
        for (i, w) in clause.iter().enumerate() {
            let Some(class) = is_class(w) else { continue };
            let closes = clause
                .get(i + 1)
                .is_none_or(|next| lexicon.is_function_word(next));
            if !closes {
                continue;
            }
            let subject = named
                .iter()
                .find(|(toks, _)| i + 1 >= toks.len() && clause[i + 1 - toks.len()..=i] == toks[..])
                .map_or_else(|| class.clone(), |(_, name)| name.to_string());
            if !found.contains(&subject) {
                found.push(subject);
            }
        }
    }
    found
}

/// Plan rules checked against the scenario world.
pub fn check_plan(
    plan: &ActionPlan,
    world: &World,
    possible_items: &[String],
    constraints: &RobotConstraints,
) -> Vec<Violation> {
    let mut out = Vec::new();
    let known = |name: &str| {
        world.resolve(name).is_some()
            || possible_items.iter().any(|p| names::token_match(p, name))
    };
    let mut prev: Option<&ActionPrimitive> = None;
    for step in &plan.steps {
        for name in step.object_names() {
            if !known(name) {
                out.push(Violation::new(
                    ViolationCode::UnknownObject,
                    name,
                    "not in the scene inventory or possible items",
                ));
            }
        }
        match step {
            ActionPrimitive::Move { object, .. } => {
                if !constraints.can_reach_floor {
                    if let Some(obj) = world.find_object(object).map(|i| &world.objects[i]) {
                        if obj.on_floor {
                            out.push(Violation::new(
                                ViolationCode::GroundPickup,
                                object,
                                "object lies on the floor",
                            ));
                        }
                    }
                }
                if constraints.arm_count < 2 {
                    if let Some(ActionPrimitive::Move { object: first, .. }) = prev {
                        out.push(Violation::new(
                            ViolationCode::SecondArmNeeded,
                            object,
                            format!("picks up {object:?} right after moving {first:?} without returning"),
                        ));
                    }
                }
            }
            ActionPrimitive::Use { object } if is_person(object) => {
                out.push(Violation::new(
                    ViolationCode::HumanContact,
                    object,
                    "plan uses the person as an object",
                ));
            }
            _ => {}
        }
        prev = Some(step);
    }
    out
}

/// Shortfall against the "6 needs, 3 using possible items" quota.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuotaShortfall {
    pub needs: usize,
    pub needs_required: usize,
    pub with_possible_items: usize,
    pub with_possible_items_required: usize,
}

pub const QUOTA_NEEDS: usize = 6;
pub const QUOTA_POSSIBLE_ITEMS: usize = 3;

pub fn check_quota(report: &NeedReport, constraints: &RobotConstraints) -> Option<QuotaShortfall> {
    if !constraints.strict_quota {
        return None;
    }
    let needs = report.needs.len();
    let with_items = report.needs.iter().filter(|n| n.uses_possible_item).count();
    (needs != QUOTA_NEEDS || with_items < QUOTA_POSSIBLE_ITEMS).then_some(QuotaShortfall {
        needs,
        needs_required: QUOTA_NEEDS,
        with_possible_items: with_items,
        with_possible_items_required: QUOTA_POSSIBLE_ITEMS,
    })
}
