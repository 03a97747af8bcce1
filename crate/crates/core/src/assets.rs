//! Data files shipped with the crate and the directory-backed alternative.
//!
//! Everything under `data/` (prompts, replay fixtures, scenario worlds,
//! rule tables) is embedded at build time. A [`DataRoot::Dir`] points at an
//! on-disk tree with the same layout so prompts, fixtures and scenarios can be
//! swapped without rebuilding.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

macro_rules! embed {
    ($($path:literal),* $(,)?) => {
        &[$(($path, include_str!(concat!("../data/", $path)))),*]
    };
}

macro_rules! task_files {
    ($($n:literal),*) => {
        &[$(
            (
                concat!("fixtures/task_", $n, "/needs.json"),
                include_str!(concat!("../data/fixtures/task_", $n, "/needs.json")),
            ),
            (
                concat!("fixtures/task_", $n, "/actions.json"),
                include_str!(concat!("../data/fixtures/task_", $n, "/actions.json")),
            ),
            (
                concat!("scenarios/task_", $n, ".json"),
                include_str!(concat!("../data/scenarios/task_", $n, ".json")),
            ),
        )*]
    };
}

pub const KEY_ALIASES: &str = include_str!("../data/rules/key_aliases.json");
pub const LEXICON: &str = include_str!("../data/rules/lexicon.json");
pub const SKILL_GROUPS: &str = include_str!("../data/rules/skill_groups.json");

static SHARED: &[(&str, &str)] = embed!(
    "prompts/manifest.json",
    "prompts/full_atom_constraints.txt",
    "prompts/no_atom_no_constraints.txt",
    "prompts/atom_no_constraints.txt",
    "prompts/no_atom_constraints.txt",
    "prompts/action_generation.txt",
    "rules/key_aliases.json",
    "rules/lexicon.json",
    "rules/skill_groups.json",
);

static TASKS: &[(&str, &str)] = task_files!(
    "01", "02", "03", "04", "05", "06", "07", "08", "09", "10", "11", "12", "13", "14", "15", "16"
);

/// Number of scenarios bundled with the crate.
pub const BUILTIN_SCENARIOS: u32 = 16;

/// Where data files are read from.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub enum DataRoot {
    #[default]
    Builtin,
    Dir(PathBuf),
}

impl DataRoot {
    pub fn dir(path: impl Into<PathBuf>) -> Self {
        DataRoot::Dir(path.into())
    }

    /// Reads a file by its path relative to the data root, e.g. `prompts/manifest.json`.
    pub fn read(&self, rel: &str) -> io::Result<String> {
        match self {
            DataRoot::Builtin => builtin(rel).map(str::to_owned).ok_or_else(|| {
                io::Error::new(io::ErrorKind::NotFound, format!("no bundled file {rel}"))
            }),
            DataRoot::Dir(root) => fs::read_to_string(root.join(rel)),
        }
    }

    pub fn exists(&self, rel: &str) -> bool {
        match self {
            DataRoot::Builtin => builtin(rel).is_some(),
            DataRoot::Dir(root) => root.join(rel).is_file(),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            DataRoot::Builtin => "<bundled>".to_string(),
            DataRoot::Dir(p) => p.display().to_string(),
        }
    }

    /// Materializes the bundled tree under `dest`; used to seed an editable data dir.
    pub fn export_builtin(dest: &Path) -> io::Result<()> {
        for (rel, text) in SHARED.iter().chain(TASKS) {
            let path = dest.join(rel);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::write(path, text)?;
        }
        Ok(())
    }
}

pub fn builtin(rel: &str) -> Option<&'static str> {
    SHARED
        .iter()
        .chain(TASKS)
        .find(|(p, _)| *p == rel)
        .map(|(_, text)| *text)
}

/// Relative path of the need-detection fixture for a scenario and prompt file stem.
pub fn needs_fixture_path(scenario_id: u32, variant: &str) -> String {
    if variant == "full_atom_constraints" {
        format!("fixtures/task_{scenario_id:02}/needs.json")
    } else {
        format!("fixtures/task_{scenario_id:02}/needs.{variant}.json")
    }
}

pub fn actions_fixture_path(scenario_id: u32) -> String {
    format!("fixtures/task_{scenario_id:02}/actions.json")
}

pub fn scenario_path(scenario_id: u32) -> String {
    format!("scenarios/task_{scenario_id:02}.json")
}
