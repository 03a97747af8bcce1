//! Delimited response corpus: human answers and ratings, plus the robot's
//! answers under participant id `robot`.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::segment::Segmenter;
use crate::prompts::PromptVariant;

pub const ROBOT_PARTICIPANT: &str = "robot";
pub const REQUIRED_COLUMNS: [&str; 5] = ["participant_id", "task_id", "stage", "text", "likert"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseStage {
    Need,
    Solution,
    /// Rating-only rows for the executed task.
    Execution,
}

impl ResponseStage {
    pub fn as_str(self) -> &'static str {
        match self {
            ResponseStage::Need => "need",
            ResponseStage::Solution => "solution",
            ResponseStage::Execution => "execution",
        }
    }

    pub fn has_text(self) -> bool {
        self != ResponseStage::Execution
    }
}

impl fmt::Display for ResponseStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ResponseStage {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "need" | "needs" => Ok(ResponseStage::Need),
            "solution" | "solutions" => Ok(ResponseStage::Solution),
            "execution" | "task" => Ok(ResponseStage::Execution),
            other => Err(format!("unknown stage {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CorpusError {
    #[error("corpus is missing required column {0:?}")]
    MissingColumn(String),
    #[error("line {line}: {reason}")]
    Row { line: u64, reason: String },
    #[error("corpus: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusRow {
    pub line: u64,
    pub participant_id: String,
    pub task_id: u32,
    pub stage: ResponseStage,
    pub text: String,
    pub likert: Option<u8>,
    /// Prompt variant of a robot row; human rows leave it at the full variant.
    pub variant: PromptVariant,
    pub lang: Option<String>,
}

impl CorpusRow {
    pub fn is_robot(&self) -> bool {
        self.participant_id.eq_ignore_ascii_case(ROBOT_PARTICIPANT)
    }
}

/// One segmented human answer unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanResponseUnit {
    pub task_id: u32,
    pub stage: ResponseStage,
    pub participant_id: String,
    pub text: String,
    pub lang: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotResponse {
    pub task_id: u32,
    pub stage: ResponseStage,
    pub variant: PromptVariant,
    pub text: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub rows: Vec<CorpusRow>,
}

fn row_err(line: u64, reason: impl Into<String>) -> CorpusError {
    CorpusError::Row {
        line,
        reason: reason.into(),
    }
}

impl Corpus {
    pub fn from_path(path: &Path) -> Result<Self, CorpusError> {
        let file = std::fs::File::open(path)
            .map_err(|e| CorpusError::Io(format!("{}: {e}", path.display())))?;
        Self::from_reader(file)
    }

    pub fn parse(text: &str) -> Result<Self, CorpusError> {
        Self::from_reader(text.as_bytes())
    }

    pub fn from_reader(reader: impl Read) -> Result<Self, CorpusError> {
        let mut rdr = csv::ReaderBuilder::new().flexible(false).from_reader(reader);
        let headers: Vec<String> = rdr
            .headers()
            .map_err(|e| CorpusError::Io(e.to_string()))?
            .iter()
            .map(|h| h.trim().to_lowercase())
            .collect();
        let col = |name: &str| headers.iter().position(|h| h == name);
        let mut idx = [0usize; 5];
        for (slot, name) in idx.iter_mut().zip(REQUIRED_COLUMNS) {
            *slot = col(name).ok_or_else(|| CorpusError::MissingColumn(name.to_string()))?;
        }
        let [pid, task, stage, text, likert] = idx;
        let (variant_col, lang_col) = (col("variant"), col("lang"));

        let mut rows = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line());
                row_err(line, e.to_string())
            })?;
            let line = record.position().map_or(0, |p| p.line());
            let field = |i: usize| record.get(i).unwrap_or("").trim();
            if record.iter().all(|f| f.trim().is_empty()) {
                continue;
            }
            let participant_id = field(pid).to_string();
            if participant_id.is_empty() {
                return Err(row_err(line, "empty participant_id"));
            }
            let task_id: u32 = field(task)
                .parse()
                .map_err(|_| row_err(line, format!("task_id {:?} is not a number", field(task))))?;
            let stage: ResponseStage = field(stage).parse().map_err(|e: String| row_err(line, e))?;
            let likert = match field(likert) {
                "" => None,
                raw => Some(
                    raw.parse::<u8>()
                        .ok()
                        .filter(|v| (1..=7).contains(v))
                        .ok_or_else(|| row_err(line, format!("likert {raw:?} is not in 1..=7")))?,
                ),
            };
            let variant = match variant_col.map(field).filter(|v| !v.is_empty()) {
                Some(v) => v.parse().map_err(|e: crate::prompts::PromptError| row_err(line, e.to_string()))?,
                None => PromptVariant::FullAtomConstraints,
            };
            if !variant.is_detection() {
                return Err(row_err(line, format!("{variant} is not a detection variant")));
            }
            let lang = lang_col.map(field).filter(|l| !l.is_empty()).map(str::to_string);
            let row = CorpusRow {
                line,
                participant_id,
                task_id,
                stage,
                text: field(text).to_string(),
                likert,
                variant,
                lang,
            };
            if row.is_robot() {
                if !stage.has_text() || row.text.is_empty() {
                    return Err(row_err(line, "robot rows need need/solution text"));
                }
            } else if row.text.is_empty() && row.likert.is_none() {
                return Err(row_err(line, "row has neither text nor rating"));
            }
            rows.push(row);
        }
        Ok(Corpus { rows })
    }

    /// Segmented human units for one task and stage, in row order.
    pub fn human_units(&self, task_id: u32, stage: ResponseStage, segmenter: &Segmenter) -> Vec<HumanResponseUnit> {
        self.rows
            .iter()
            .filter(|r| !r.is_robot() && r.task_id == task_id && r.stage == stage && stage.has_text())
            .flat_map(|r| {
                segmenter.segment(&r.text).into_iter().map(|text| HumanResponseUnit {
                    task_id,
                    stage,
                    participant_id: r.participant_id.clone(),
                    text,
                    lang: r.lang.clone(),
                })
            })
            .collect()
    }

    /// Ratings given by participants for one task and stage.
    pub fn ratings(&self, task_id: u32, stage: ResponseStage) -> Vec<u8> {
        self.rows
            .iter()
            .filter(|r| !r.is_robot() && r.task_id == task_id && r.stage == stage)
            .filter_map(|r| r.likert)
            .collect()
    }

    /// Robot answers keyed by (task, stage, variant); a key may appear once.
    pub fn robot_responses(&self) -> Result<BTreeMap<(u32, ResponseStage, PromptVariant), RobotResponse>, CorpusError> {
        let mut out = BTreeMap::new();
        for r in self.rows.iter().filter(|r| r.is_robot()) {
            let key = (r.task_id, r.stage, r.variant);
            let resp = RobotResponse {
                task_id: r.task_id,
                stage: r.stage,
                variant: r.variant,
                text: r.text.clone(),
            };
            if out.insert(key, resp).is_some() {
                return Err(row_err(
                    r.line,
                    format!("second robot {} response for task {} ({})", r.stage, r.task_id, r.variant),
                ));
            }
        }
        Ok(out)
    }

    pub fn task_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.rows.iter().map(|r| r.task_id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
participant_id,task_id,stage,text,likert,variant,lang
p1,1,need,Thirsty; wants to wipe hands.,7,,en
p2,1,need,口渴。,6,,zh
robot,1,need,The person is thirsty,,,
robot,1,need,Needs water,,no_atom_no_constraints,
p1,1,execution,,5,,
";

    #[test]
    fn parses_rows_and_units() {
        let c = Corpus::parse(SAMPLE).unwrap();
        assert_eq!(c.rows.len(), 5);
        let units = c.human_units(1, ResponseStage::Need, &Segmenter::default());
        let texts: Vec<&str> = units.iter().map(|u| u.text.as_str()).collect();
        assert_eq!(texts, ["Thirsty", "wants to wipe hands", "口渴"]);
        assert_eq!(units[2].lang.as_deref(), Some("zh"));
        assert_eq!(c.ratings(1, ResponseStage::Need), [7, 6]);
        assert_eq!(c.ratings(1, ResponseStage::Execution), [5]);
        assert_eq!(c.robot_responses().unwrap().len(), 2);
    }

    #[test]
    fn missing_likert_column_is_named() {
        let err = Corpus::parse("participant_id,task_id,stage,text\np1,1,need,x\n").unwrap_err();
        assert_eq!(err, CorpusError::MissingColumn("likert".into()));
        assert!(err.to_string().contains("likert"));
    }

    #[test]
    fn bad_rows_report_their_line() {
        let text = "participant_id,task_id,stage,text,likert\np1,1,need,x,7\np2,one,need,y,6\n";
        assert!(matches!(Corpus::parse(text), Err(CorpusError::Row { line: 3, .. })));
        let text = "participant_id,task_id,stage,text,likert\np1,1,need,x,9\n";
        assert!(matches!(Corpus::parse(text), Err(CorpusError::Row { line: 2, .. })));
        let text = "participant_id,task_id,stage,text,likert\nrobot,1,need,a,\nrobot,1,need,b,\n";
        let c = Corpus::parse(text).unwrap();
        assert!(matches!(c.robot_responses(), Err(CorpusError::Row { line: 3, .. })));
    }
}
