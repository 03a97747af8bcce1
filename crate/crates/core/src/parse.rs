//! Tolerant parsing of model replies into [`NeedReport`] and [`ActionPlan`] values.
//!
//! Replies arrive wrapped in prose or code fences and with drifting key
//! spellings. Only structural keys are normalized; object names and solution
//! sentences are kept verbatim.

use std::fmt;

use indexmap::IndexMap;
use serde::de::{self, Deserializer, MapAccess, SeqAccess, Visitor};
use serde::Deserialize;
use serde_json::{Map, Value};
use thiserror::Error;

use crate::keys::normalize_key;
use crate::model::{
    ActionPlan, ActionPrimitive, EnvironmentObservation, HumanObservation, InternalState,
    MentalFacet, Need, NeedReport, Sense,
};
use crate::names;
use crate::prompts::PromptVariant;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("no JSON object found in reply")]
    NoJsonFound,
    #[error("schema violation at {path}: {reason}")]
    SchemaViolation { path: String, reason: String },
    #[error("move value {0:?} is not \"object, destination\"")]
    MalformedMoveValue(String),
}

fn violation(path: impl Into<String>, reason: impl Into<String>) -> ParseError {
    ParseError::SchemaViolation {
        path: path.into(),
        reason: reason.into(),
    }
}

/// Returns the first balanced `{...}` span of `raw` that parses as a JSON object.
pub fn extract_json_object(raw: &str) -> Result<&str, ParseError> {
    let bytes = raw.as_bytes();
    for (start, _) in raw.match_indices('{') {
        let Some(end) = balanced_end(&bytes[start..]) else {
            continue;
        };
        let candidate = &raw[start..start + end];
        if matches!(serde_json::from_str::<Value>(candidate), Ok(Value::Object(_))) {
            return Ok(candidate);
        }
    }
    Err(ParseError::NoJsonFound)
}

// Length of the brace-balanced prefix starting at an opening brace.
fn balanced_end(bytes: &[u8]) -> Option<usize> {
    let mut depth = 0usize;
    let mut in_str = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate() {
        if in_str {
            match b {
                _ if escaped => escaped = false,
                b'\\' => escaped = true,
                b'"' => in_str = false,
                _ => {}
            }
            continue;
        }
        match b {
            b'"' => in_str = true,
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i + 1);
                }
            }
            _ => {}
        }
    }
    None
}

/// Drops markdown fence lines (```json and ```), keeping their contents.
pub fn strip_code_fences(raw: &str) -> String {
    raw.lines()
        .filter(|l| !l.trim_start().starts_with("```"))
        .collect::<Vec<_>>()
        .join("\n")
}

type Canon<'a> = IndexMap<String, &'a Value>;

fn canon<'a>(map: &'a Map<String, Value>, path: &str) -> Result<Canon<'a>, ParseError> {
    let mut out = IndexMap::with_capacity(map.len());
    for (k, v) in map {
        let key = normalize_key(k);
        if out.insert(key.clone(), v).is_some() {
            return Err(violation(
                format!("{path}.{key}"),
                "key appears twice under different spellings",
            ));
        }
    }
    Ok(out)
}

fn as_object<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>, ParseError> {
    v.as_object()
        .ok_or_else(|| violation(path, "expected an object"))
}

fn as_text(v: &Value, path: &str) -> Result<Option<String>, ParseError> {
    match v {
        Value::String(s) => Ok(Some(s.clone())),
        Value::Null => Ok(None),
        Value::Bool(_) | Value::Number(_) => Ok(Some(v.to_string())),
        _ => Err(violation(path, "expected text")),
    }
}

fn required_text(v: Option<&&Value>, path: &str) -> Result<String, ParseError> {
    let text = match v {
        Some(v) => as_text(v, path)?,
        None => None,
    };
    match text {
        Some(t) if !t.trim().is_empty() => Ok(t),
        _ => Err(violation(path, "missing or empty")),
    }
}

/// Parses a need-detection reply produced under `variant`.
pub fn parse_need_report(raw: &str, variant: PromptVariant) -> Result<NeedReport, ParseError> {
    if !variant.is_detection() {
        return Err(violation("$", "action-generation replies are not need reports"));
    }
    let json = extract_json_object(raw)?;
    let value: Value = serde_json::from_str(json).map_err(|_| ParseError::NoJsonFound)?;
    let root = canon(as_object(&value, "$")?, "$")?;

    let env_block = match root.get("environment") {
        Some(v) => Some(canon(as_object(v, "$.environment")?, "$.environment")?),
        None => None,
    };

    let human_block = match (
        env_block.as_ref().and_then(|e| e.get("human")),
        root.get("human"),
    ) {
        (Some(_), Some(_)) => {
            return Err(violation("$.human", "human block appears at two depths"));
        }
        (Some(v), None) => Some(("$.environment.human", *v)),
        (None, Some(v)) => Some(("$.human", *v)),
        (None, None) => None,
    };
    let human_block = match human_block {
        Some((path, v)) => Some((path, canon(as_object(v, path)?, path)?)),
        None => None,
    };

    let mut environment = EnvironmentObservation::default();
    if let Some(env) = &env_block {
        read_environment(env, &mut environment)?;
    }
    if environment.possible_items.is_empty() {
        if let Some(v) = root.get("possible_items") {
            environment.possible_items = read_items(v, "$.possible_items")?;
        }
    }

    let mut human = HumanObservation::default();
    let mut state = InternalState::default();
    if let Some((path, block)) = &human_block {
        read_human(block, path, &mut human, &mut state)?;
    }

    let mut sources = Vec::new();
    if let Some((path, block)) = &human_block {
        if let Some(v) = block.get("needs") {
            sources.push((format!("{path}.needs"), *v));
        }
    }
    if let Some(v) = env_block.as_ref().and_then(|e| e.get("needs")) {
        sources.push(("$.environment.needs".into(), *v));
    }
    if let Some(v) = root.get("needs") {
        sources.push(("$.needs".into(), *v));
    }
    let needs = match sources.as_slice() {
        [] => read_loose_needs(&root)?,
        [(path, v)] => read_needs(v, path)?,
        _ => return Err(violation("$", "needs appear in more than one block")),
    };

    let needs = needs
        .into_iter()
        .map(|(id, description, solution)| {
            let uses_possible_item = environment
                .possible_items
                .iter()
                .any(|item| names::mentions(&solution, item));
            Need {
                id,
                description,
                solution,
                uses_possible_item,
            }
        })
        .collect();

    let report = NeedReport {
        environment,
        human,
        state,
        needs,
        raw_text: raw.to_string(),
        variant,
    };
    validate(&report)?;
    Ok(report)
}

fn read_environment(env: &Canon<'_>, out: &mut EnvironmentObservation) -> Result<(), ParseError> {
    for (key, slot) in [
        ("location", &mut out.location),
        ("lighting", &mut out.lighting),
        ("sound", &mut out.sound),
        ("temperature", &mut out.temperature),
    ] {
        if let Some(v) = env.get(key) {
            *slot = as_text(v, &format!("$.environment.{key}"))?;
        }
    }
    if let Some(v) = env.get("objects") {
        out.objects = read_objects(v)?;
    }
    if let Some(v) = env.get("possible_items") {
        out.possible_items = read_items(v, "$.environment.possible_items")?;
    }
    Ok(())
}

fn read_objects(v: &Value) -> Result<IndexMap<String, String>, ParseError> {
    let path = "$.environment.objects";
    let mut out = IndexMap::new();
    match v {
        Value::Object(map) => {
            for (name, aff) in map {
                let p = format!("{path}.{name}");
                if name.trim().is_empty() {
                    return Err(violation(p, "empty object name"));
                }
                out.insert(name.clone(), as_text(aff, &p)?.unwrap_or_default());
            }
        }
        Value::Array(items) => {
            for (i, item) in items.iter().enumerate() {
                let p = format!("{path}[{i}]");
                match as_text(item, &p)? {
                    Some(name) if !name.trim().is_empty() => {
                        out.insert(name, String::new());
                    }
                    _ => return Err(violation(p, "empty object name")),
                }
            }
        }
        _ => return Err(violation(path, "expected a map or a list")),
    }
    Ok(out)
}

fn read_items(v: &Value, path: &str) -> Result<Vec<String>, ParseError> {
    let list = match v {
        Value::Array(items) => items,
        Value::Object(map) => {
            let inner = canon(map, path)?;
            match inner.get("items") {
                Some(Value::Array(items)) => items,
                Some(_) => return Err(violation(format!("{path}.items"), "expected a list")),
                None if map.is_empty() => return Ok(Vec::new()),
                None => return Err(violation(path, "expected an items list")),
            }
        }
        Value::Null => return Ok(Vec::new()),
        _ => return Err(violation(path, "expected a list")),
    };
    let mut out: Vec<String> = Vec::with_capacity(list.len());
    let mut seen = Vec::with_capacity(list.len());
    for (i, item) in list.iter().enumerate() {
        let p = format!("{path}[{i}]");
        let name = match as_text(item, &p)? {
            Some(n) if !n.trim().is_empty() => n,
            _ => return Err(violation(p, "empty item name")),
        };
        let key = names::normalize_name(&name);
        if seen.contains(&key) {
            return Err(violation(p, format!("duplicate possible item {name:?}")));
        }
        seen.push(key);
        out.push(name);
    }
    Ok(out)
}

fn read_human(
    block: &Canon<'_>,
    path: &str,
    human: &mut HumanObservation,
    state: &mut InternalState,
) -> Result<(), ParseError> {
    for (key, v) in block {
        let p = format!("{path}.{key}");
        if let Some(slot) = human.field_mut(key) {
            *slot = as_text(v, &p)?;
        } else if let Some(sense) = Sense::from_key(key) {
            if let Some(t) = as_text(v, &p)? {
                state.physical.insert(sense, t);
            }
        } else if let Some(facet) = MentalFacet::from_key(key) {
            if let Some(t) = as_text(v, &p)? {
                state.mental.insert(facet, t);
            }
        }
    }
    Ok(())
}

type RawNeed = (String, String, String);

fn read_need_entry(id: &str, v: &Value, path: &str) -> Result<RawNeed, ParseError> {
    let entry = canon(as_object(v, path)?, path)?;
    let description = required_text(entry.get("description"), &format!("{path}.description"))?;
    let solution = required_text(
        entry.get("suggested_robot_solution"),
        &format!("{path}.suggested_robot_solution"),
    )?;
    Ok((id.trim().to_string(), description, solution))
}

fn read_needs(v: &Value, path: &str) -> Result<Vec<RawNeed>, ParseError> {
    let mut out: Vec<RawNeed> = Vec::new();
    match v {
        Value::Object(map) => {
            for (id, entry) in map {
                out.push(read_need_entry(id, entry, &format!("{path}.{id}"))?);
            }
        }
        Value::Array(items) => {
            for (i, entry) in items.iter().enumerate() {
                let p = format!("{path}[{i}]");
                let id = entry
                    .get("id")
                    .and_then(Value::as_str)
                    .map(str::to_string)
                    .unwrap_or_else(|| format!("need{}", i + 1));
                out.push(read_need_entry(&id, entry, &p)?);
            }
        }
        _ => return Err(violation(path, "expected a map of needs")),
    }
    for (i, (id, ..)) in out.iter().enumerate() {
        if id.is_empty() {
            return Err(violation(path, "empty need id"));
        }
        if out[..i].iter().any(|(other, ..)| other == id) {
            return Err(violation(path, format!("duplicate need id {id:?}")));
        }
    }
    Ok(out)
}

// Bare `{"need1": {...}, "need2": {...}}` replies, as the baseline prompt asks for.
fn read_loose_needs(root: &Canon<'_>) -> Result<Vec<RawNeed>, ParseError> {
    let mut out = Vec::new();
    for (key, v) in root {
        let is_need_key = key
            .strip_prefix("need")
            .is_some_and(|rest| rest.trim_start_matches('_').chars().all(|c| c.is_ascii_digit()));
        if is_need_key && v.is_object() {
            out.push(read_need_entry(key, v, &format!("$.{key}"))?);
        }
    }
    Ok(out)
}

fn validate(report: &NeedReport) -> Result<(), ParseError> {
    let variant = report.variant;
    if report.needs.is_empty() {
        return Err(violation("$.needs", "no needs reported"));
    }
    if variant.expects_environment() && report.environment.objects.is_empty() {
        return Err(violation("$.environment.objects", "objects map is empty"));
    }
    if variant.expects_human_state() {
        if !report.human.has_any() {
            return Err(violation("$.human", "no human observation"));
        }
        if !report.state.has_emotion_and_intention() {
            return Err(violation("$.human", "emotion and intention are required"));
        }
    }
    Ok(())
}

/// JSON node that keeps duplicate keys in source order.
#[derive(Debug, Clone, PartialEq)]
enum Node {
    Text(String),
    Scalar(String),
    List(Vec<Node>),
    Object(Vec<(String, Node)>),
}

impl<'de> Deserialize<'de> for Node {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        d.deserialize_any(NodeVisitor)
    }
}

struct NodeVisitor;

impl<'de> Visitor<'de> for NodeVisitor {
    type Value = Node;

    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("any JSON value")
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<Node, E> {
        Ok(Node::Text(v.to_string()))
    }

    fn visit_string<E: de::Error>(self, v: String) -> Result<Node, E> {
        Ok(Node::Text(v))
    }

    fn visit_bool<E: de::Error>(self, v: bool) -> Result<Node, E> {
        Ok(Node::Scalar(v.to_string()))
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<Node, E> {
        Ok(Node::Scalar(v.to_string()))
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<Node, E> {
        Ok(Node::Scalar(v.to_string()))
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> Result<Node, E> {
        Ok(Node::Scalar(v.to_string()))
    }

    fn visit_unit<E: de::Error>(self) -> Result<Node, E> {
        Ok(Node::Scalar("null".into()))
    }

    fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Node, A::Error> {
        let mut items = Vec::new();
        while let Some(item) = seq.next_element()? {
            items.push(item);
        }
        Ok(Node::List(items))
    }

    fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Node, A::Error> {
        let mut entries = Vec::new();
        while let Some((k, v)) = map.next_entry::<String, Node>()? {
            entries.push((k, v));
        }
        Ok(Node::Object(entries))
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum StepKind {
    Navigate,
    Move,
    Use,
}

fn step_kind(raw_key: &str) -> Option<StepKind> {
    let base = raw_key.split('(').next().unwrap_or(raw_key);
    match normalize_key(base).as_str() {
        "navigation" => Some(StepKind::Navigate),
        "move" => Some(StepKind::Move),
        "use" => Some(StepKind::Use),
        _ => None,
    }
}

fn build_step(kind: StepKind, value: &str, path: &str) -> Result<ActionPrimitive, ParseError> {
    let value = value.trim();
    if value.is_empty() {
        return Err(violation(path, "empty object name"));
    }
    Ok(match kind {
        StepKind::Navigate => ActionPrimitive::navigate(value),
        StepKind::Use => ActionPrimitive::use_(value),
        StepKind::Move => {
            let (object, dest) = value
                .split_once(',')
                .map(|(o, d)| (o.trim(), d.trim()))
                .filter(|(o, d)| !o.is_empty() && !d.is_empty())
                .ok_or_else(|| ParseError::MalformedMoveValue(value.to_string()))?;
            ActionPrimitive::move_to(object, dest)
        }
    })
}

/// Parses an action-generation reply into plans, one per top-level key, in source order.
pub fn parse_action_list(raw: &str) -> Result<Vec<ActionPlan>, ParseError> {
    let json = extract_json_object(raw)?;
    let Node::Object(entries) =
        serde_json::from_str::<Node>(json).map_err(|_| ParseError::NoJsonFound)?
    else {
        return Err(ParseError::NoJsonFound);
    };
    if entries.is_empty() {
        return Err(violation("$", "action list is empty"));
    }
    let mut plans = Vec::with_capacity(entries.len());
    for (solution, body) in entries {
        let path = format!("$.{solution}");
        let Node::Object(fields) = body else {
            return Err(violation(path, "expected an object of steps"));
        };
        let mut steps = Vec::with_capacity(fields.len());
        for (key, value) in fields {
            let p = format!("{path}.{key}");
            let kind = step_kind(&key)
                .ok_or_else(|| violation(&p, "unknown primitive; expected navigation, move or use"))?;
            match value {
                Node::Text(s) => steps.push(build_step(kind, &s, &p)?),
                Node::List(items) => {
                    for (i, item) in items.into_iter().enumerate() {
                        let Node::Text(s) = item else {
                            return Err(violation(format!("{p}[{i}]"), "expected text"));
                        };
                        steps.push(build_step(kind, &s, &format!("{p}[{i}]"))?);
                    }
                }
                _ => return Err(violation(p, "expected text")),
            }
        }
        match steps.first() {
            Some(first) if first.is_navigate() => {}
            Some(_) => return Err(violation(path, "plan must begin with navigation")),
            None => return Err(violation(path, "plan has no steps")),
        }
        plans.push(ActionPlan::new(solution.trim(), steps));
    }
    Ok(plans)
}

/// Renders plans in the reply shape; repeated primitive keys are written out
/// as repeated JSON keys, which [`parse_action_list`] reads back in order.
pub fn serialize_action_list(plans: &[ActionPlan]) -> String {
    let quote = |s: &str| serde_json::to_string(s).expect("strings serialize");
    let mut out = String::from("{\n");
    for (i, plan) in plans.iter().enumerate() {
        out.push_str(&format!("    {}: {{\n", quote(&plan.solution_text)));
        for (j, step) in plan.steps.iter().enumerate() {
            let (key, value) = match step {
                ActionPrimitive::Navigate { target } => ("navigation", target.clone()),
                ActionPrimitive::Move {
                    object,
                    destination,
                } => ("move", format!("{object}, {destination}")),
                ActionPrimitive::Use { object } => ("use", object.clone()),
            };
            let sep = if j + 1 < plan.steps.len() { "," } else { "" };
            out.push_str(&format!("        \"{key}\": {}{sep}\n", quote(&value)));
        }
        let sep = if i + 1 < plans.len() { "," } else { "" };
        out.push_str(&format!("    }}{sep}\n"));
    }
    out.push('}');
    out
}
