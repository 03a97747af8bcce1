//! Canonical spelling of structural JSON keys.
//!
//! Model replies drift between `"possible item"`, `"possible_items"`,
//! `"eye gaze"`, `"suggested_robot_action"` and so on. Keys are folded to
//! snake case and then looked up in an alias table loaded from
//! `rules/key_aliases.json`.

use std::collections::HashMap;
use std::sync::OnceLock;

use thiserror::Error;

use crate::assets;

#[derive(Debug, Error)]
pub enum AliasError {
    #[error("alias table is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("alias target {target:?} is itself an alias")]
    Chained { target: String },
    #[error("alias {0:?} folds to an empty key")]
    Empty(String),
}

#[derive(Debug, Clone, Default)]
pub struct KeyAliases {
    map: HashMap<String, String>,
}

impl KeyAliases {
    pub fn from_json(text: &str) -> Result<Self, AliasError> {
        let raw: HashMap<String, String> = serde_json::from_str(text)?;
        let mut map = HashMap::with_capacity(raw.len());
        for (from, to) in raw {
            let from_f = fold(&from);
            let to_f = fold(&to);
            if from_f.is_empty() || to_f.is_empty() {
                return Err(AliasError::Empty(from));
            }
            map.insert(from_f, to_f);
        }
        // Targets must be terminal, otherwise normalization would not be idempotent.
        if let Some(target) = map.values().find(|t| map.contains_key(*t)) {
            return Err(AliasError::Chained {
                target: target.clone(),
            });
        }
        Ok(Self { map })
    }

    /// The table shipped with the crate.
    pub fn builtin() -> &'static KeyAliases {
        static BUILTIN: OnceLock<KeyAliases> = OnceLock::new();
        BUILTIN.get_or_init(|| {
            KeyAliases::from_json(assets::KEY_ALIASES).expect("bundled alias table is valid")
        })
    }

    pub fn normalize(&self, raw_key: &str) -> String {
        let folded = fold(raw_key);
        match self.map.get(&folded) {
            Some(canonical) => canonical.clone(),
            None => folded,
        }
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// Normalizes a key with the bundled alias table.
pub fn normalize_key(raw_key: &str) -> String {
    KeyAliases::builtin().normalize(raw_key)
}

fn fold(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut pending_sep = false;
    for c in raw.trim().chars() {
        if c.is_whitespace() || c == '-' || c == '_' {
            pending_sep = !out.is_empty();
            continue;
        }
        if pending_sep {
            out.push('_');
            pending_sep = false;
        }
        out.extend(c.to_lowercase());
    }
    out
}
