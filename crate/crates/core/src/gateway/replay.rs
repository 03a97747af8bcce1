use std::time::Duration;

use super::{BackendKind, ChatBackend, ChatRequest, ChatResponse, GatewayError};
use crate::assets::{actions_fixture_path, needs_fixture_path, DataRoot};
use crate::prompts::PromptVariant;

/// Returns stored replies verbatim, keyed by scenario and prompt variant.
#[derive(Debug, Clone, Default)]
pub struct ReplayBackend {
    root: DataRoot,
}

impl ReplayBackend {
    pub fn new(root: DataRoot) -> Self {
        Self { root }
    }

    pub fn fixture_path(scenario_id: u32, variant: PromptVariant) -> String {
        match variant {
            PromptVariant::ActionGeneration => actions_fixture_path(scenario_id),
            v => needs_fixture_path(scenario_id, v.as_str()),
        }
    }
}

impl ChatBackend for ReplayBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Replay
    }

    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        let tag = request.tag.ok_or_else(|| {
            GatewayError::InvalidRequest("replay requests need a scenario/variant tag".into())
        })?;
        let missing = || GatewayError::FixtureMissing {
            scenario: tag.scenario_id,
            variant: tag.variant,
        };
        let path = Self::fixture_path(tag.scenario_id, tag.variant);
        if !self.root.exists(&path) {
            return Err(missing());
        }
        let text = self.root.read(&path).map_err(|_| missing())?;
        if text.trim().is_empty() {
            return Err(missing());
        }
        Ok(ChatResponse {
            text,
            backend: BackendKind::Replay,
            latency: Duration::ZERO,
        })
    }
}
