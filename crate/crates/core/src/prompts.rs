//! Prompt assets and the ablation variants they belong to.
//!
//! Prompt bodies live in `prompts/*.txt` next to a `manifest.json` that pins
//! the SHA-256 of each file. Loading fails loudly on a checksum mismatch so a
//! silently edited prompt cannot leak into an ablation run.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::assets::DataRoot;

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum PromptVariant {
    FullAtomConstraints,
    NoAtomNoConstraints,
    AtomNoConstraints,
    NoAtomConstraints,
    ActionGeneration,
}

impl PromptVariant {
    pub const ALL: [PromptVariant; 5] = [
        PromptVariant::FullAtomConstraints,
        PromptVariant::NoAtomNoConstraints,
        PromptVariant::AtomNoConstraints,
        PromptVariant::NoAtomConstraints,
        PromptVariant::ActionGeneration,
    ];

    pub const DETECTION: [PromptVariant; 4] = [
        PromptVariant::FullAtomConstraints,
        PromptVariant::NoAtomNoConstraints,
        PromptVariant::AtomNoConstraints,
        PromptVariant::NoAtomConstraints,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PromptVariant::FullAtomConstraints => "full_atom_constraints",
            PromptVariant::NoAtomNoConstraints => "no_atom_no_constraints",
            PromptVariant::AtomNoConstraints => "atom_no_constraints",
            PromptVariant::NoAtomConstraints => "no_atom_constraints",
            PromptVariant::ActionGeneration => "action_generation",
        }
    }

    pub fn is_detection(self) -> bool {
        self != PromptVariant::ActionGeneration
    }

    /// Position in the ablation grid as `(uses_atom, uses_constraints)`.
    pub fn grid_cell(self) -> Option<(bool, bool)> {
        match self {
            PromptVariant::FullAtomConstraints => Some((true, true)),
            PromptVariant::NoAtomNoConstraints => Some((false, false)),
            PromptVariant::AtomNoConstraints => Some((true, false)),
            PromptVariant::NoAtomConstraints => Some((false, true)),
            PromptVariant::ActionGeneration => None,
        }
    }

    pub fn from_grid(uses_atom: bool, uses_constraints: bool) -> PromptVariant {
        match (uses_atom, uses_constraints) {
            (true, true) => PromptVariant::FullAtomConstraints,
            (false, false) => PromptVariant::NoAtomNoConstraints,
            (true, false) => PromptVariant::AtomNoConstraints,
            (false, true) => PromptVariant::NoAtomConstraints,
        }
    }

    /// Whether a reply to this prompt is expected to carry the environment block.
    pub fn expects_environment(self) -> bool {
        matches!(
            self,
            PromptVariant::FullAtomConstraints
                | PromptVariant::AtomNoConstraints
                | PromptVariant::NoAtomConstraints
        )
    }

    /// Whether a reply is expected to carry human observation and internal state.
    pub fn expects_human_state(self) -> bool {
        matches!(
            self,
            PromptVariant::FullAtomConstraints | PromptVariant::AtomNoConstraints
        )
    }
}

impl fmt::Display for PromptVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PromptVariant {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        let v = match key.as_str() {
            "full" | "full_atom_constraints" | "atom_constraints" => {
                PromptVariant::FullAtomConstraints
            }
            "no_atom_no_constraints" | "baseline" => PromptVariant::NoAtomNoConstraints,
            "atom_no_constraints" => PromptVariant::AtomNoConstraints,
            "no_atom_constraints" => PromptVariant::NoAtomConstraints,
            "action_generation" | "actions" => PromptVariant::ActionGeneration,
            _ => return Err(PromptError::UnknownVariant(s.to_string())),
        };
        Ok(v)
    }
}

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("unknown prompt variant {0:?}")]
    UnknownVariant(String),
    #[error("no prompt asset registered for {0}")]
    MissingAsset(PromptVariant),
    #[error("checksum mismatch for {variant}: manifest {expected}, file {actual}")]
    ChecksumMismatch {
        variant: PromptVariant,
        expected: String,
        actual: String,
    },
    #[error("action request needs at least one solution")]
    EmptySolutions,
    #[error("prompt manifest: {0}")]
    Manifest(String),
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PromptAsset {
    pub variant: PromptVariant,
    pub text: String,
    pub checksum: String,
}

#[derive(Debug, Deserialize)]
struct ManifestEntry {
    file: String,
    sha256: String,
}

pub fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Debug, Clone)]
pub struct PromptRegistry {
    assets: BTreeMap<PromptVariant, PromptAsset>,
}

impl PromptRegistry {
    /// Loads `prompts/manifest.json` and every file it lists, verifying checksums.
    pub fn load(root: &DataRoot) -> Result<Self, PromptError> {
        let read = |rel: &str| {
            root.read(rel).map_err(|source| PromptError::Io {
                path: rel.to_string(),
                source,
            })
        };
        let manifest: BTreeMap<String, ManifestEntry> =
            serde_json::from_str(&read("prompts/manifest.json")?)
                .map_err(|e| PromptError::Manifest(e.to_string()))?;
        let mut assets = BTreeMap::new();
        for (name, entry) in manifest {
            let variant: PromptVariant = name.parse()?;
            let text = read(&format!("prompts/{}", entry.file))?;
            let actual = sha256_hex(&text);
            if actual != entry.sha256 {
                return Err(PromptError::ChecksumMismatch {
                    variant,
                    expected: entry.sha256,
                    actual,
                });
            }
            assets.insert(
                variant,
                PromptAsset {
                    variant,
                    text,
                    checksum: actual,
                },
            );
        }
        Ok(Self { assets })
    }

    pub fn builtin() -> Self {
        Self::load(&DataRoot::Builtin).expect("bundled prompts match their manifest")
    }

    pub fn get(&self, variant: PromptVariant) -> Result<&PromptAsset, PromptError> {
        self.assets
            .get(&variant)
            .ok_or(PromptError::MissingAsset(variant))
    }

    pub fn variants(&self) -> impl Iterator<Item = PromptVariant> + '_ {
        self.assets.keys().copied()
    }

    /// Action-generation prompt followed by one `solution requirement N:` line per solution.
    pub fn render_action_request<S: AsRef<str>>(
        &self,
        solutions: &[S],
    ) -> Result<String, PromptError> {
        if solutions.is_empty() {
            return Err(PromptError::EmptySolutions);
        }
        let asset = self.get(PromptVariant::ActionGeneration)?;
        let mut out = asset.text.trim_end().to_string();
        out.push_str("\n\n");
        for (i, s) in solutions.iter().enumerate() {
            out.push_str(&format!("solution requirement {}: {}\n", i + 1, s.as_ref().trim()));
        }
        Ok(out)
    }
}
