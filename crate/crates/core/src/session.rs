//! Interactive editing sessions: a story under construction plus an
//! append-only history of what was asked and what came back.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::decoder::{InfillCandidate, InfillOptions, InfillTask};
use crate::engine::{Engine, EngineError, InfillRequest, SuggestRequest};
use crate::suggest::Suggestion;

/// A user step, before the engine has answered it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum SessionAction {
    SetStory {
        sentences: Vec<Option<String>>,
    },
    InsertBlank {
        at: usize,
    },
    Suggest {
        position: usize,
        k: usize,
    },
    SelectFrames {
        position: usize,
        frames: Vec<String>,
    },
    Generate {
        position: usize,
        #[serde(default)]
        options: InfillOptions,
    },
    Accept {
        position: usize,
        candidate: usize,
    },
    Edit {
        position: usize,
        text: String,
    },
}

/// An action with the engine's answer, as stored in the history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    #[serde(flatten)]
    pub action: SessionAction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suggestions: Option<Vec<Suggestion>>,
    /// Candidates with the frames and options that produced them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidates: Option<GeneratedCandidates>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedCandidates {
    pub frames: Vec<String>,
    pub options: InfillOptions,
    pub candidates: Vec<InfillCandidate>,
    pub failed: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub id: String,
    pub sentences: Vec<Option<String>>,
    /// Selected frames per sentence position.
    pub frames: BTreeMap<usize, Vec<String>>,
    /// Latest candidates per sentence position.
    pub candidates: BTreeMap<usize, GeneratedCandidates>,
    pub history: Vec<SessionEvent>,
}

impl SessionState {
    pub fn new(id: impl Into<String>) -> Self {
        SessionState {
            id: id.into(),
            ..Default::default()
        }
    }

    fn check(&self, position: usize) -> Result<(), EngineError> {
        if position < self.sentences.len() {
            Ok(())
        } else {
            Err(EngineError::InvalidRequest(format!(
                "position {position} is out of range"
            )))
        }
    }

    /// Runs one step and records it. The state is unchanged on error.
    pub fn apply(
        &mut self,
        engine: &Engine,
        action: SessionAction,
    ) -> Result<&SessionEvent, EngineError> {
        let mut event = SessionEvent {
            action: action.clone(),
            suggestions: None,
            candidates: None,
        };
        match action {
            SessionAction::SetStory { sentences } => {
                self.sentences = sentences;
                self.frames.clear();
                self.candidates.clear();
            }
            SessionAction::InsertBlank { at } => {
                if at > self.sentences.len() {
                    return Err(EngineError::InvalidRequest(format!(
                        "position {at} is out of range"
                    )));
                }
                self.sentences.insert(at, None);
                shift_from(&mut self.frames, at);
                shift_from(&mut self.candidates, at);
            }
            SessionAction::Suggest { position, k } => {
                self.check(position)?;
                let mut request = SuggestRequest {
                    sentences: self.sentences.clone(),
                    position,
                    k,
                    frames: None,
                };
                // selected frames count as known only where the user chose some
                if !self.frames.is_empty() {
                    request.frames = Some(
                        (0..self.sentences.len())
                            .map(|i| match (self.frames.get(&i), &self.sentences[i]) {
                                (Some(f), _) => f.clone(),
                                (None, Some(s)) => engine.frames_of(s),
                                (None, None) => Vec::new(),
                            })
                            .collect(),
                    );
                }
                event.suggestions = Some(engine.suggest(&request)?.frames);
            }
            SessionAction::SelectFrames { position, frames } => {
                self.check(position)?;
                crate::decoder::resolve_frames(engine.lexicon(), &frames)?;
                self.frames.insert(position, frames);
            }
            SessionAction::Generate { position, options } => {
                self.check(position)?;
                let frames = self.frames.get(&position).cloned().unwrap_or_default();
                // generate for this position only; other blanks are left out
                let sentences: Vec<Option<String>> = self
                    .sentences
                    .iter()
                    .enumerate()
                    .filter(|(i, s)| *i == position || s.is_some())
                    .map(|(i, s)| if i == position { None } else { s.clone() })
                    .collect();
                let response = engine.infill(&InfillRequest {
                    task: InfillTask {
                        sentences,
                        frames: vec![frames.clone()],
                    },
                    options: options.clone(),
                })?;
                let blank = response.blanks.into_iter().next().expect("one blank");
                let generated = GeneratedCandidates {
                    frames,
                    options,
                    candidates: blank.candidates,
                    failed: blank.failed,
                };
                self.candidates.insert(position, generated.clone());
                event.candidates = Some(generated);
            }
            SessionAction::Accept {
                position,
                candidate,
            } => {
                self.check(position)?;
                let text = self
                    .candidates
                    .get(&position)
                    .and_then(|c| c.candidates.get(candidate))
                    .map(|c| c.text.clone())
                    .ok_or_else(|| {
                        EngineError::InvalidRequest(format!(
                            "no candidate {candidate} at {position}"
                        ))
                    })?;
                self.sentences[position] = Some(text);
                self.candidates.remove(&position);
            }
            SessionAction::Edit { position, text } => {
                self.check(position)?;
                self.sentences[position] = Some(text);
            }
        }
        self.history.push(event);
        Ok(self.history.last().expect("just pushed"))
    }

    /// Accepted story so far; blanks render as `[blank]`.
    pub fn story(&self) -> Vec<String> {
        self.sentences
            .iter()
            .map(|s| {
                s.clone()
                    .unwrap_or_else(|| crate::tokenizer::BLANK.to_string())
            })
            .collect()
    }

    pub fn export(&self) -> String {
        serde_json::to_string_pretty(self).expect("session serializes")
    }

    pub fn import(json: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(json)
    }

    /// Re-runs the recorded actions against `engine` from an empty session.
    pub fn replay(&self, engine: &Engine) -> Result<SessionState, EngineError> {
        let mut fresh = SessionState::new(self.id.clone());
        for event in &self.history {
            fresh.apply(engine, event.action.clone())?;
        }
        Ok(fresh)
    }
}

fn shift_from<V>(m: &mut BTreeMap<usize, V>, at: usize) {
    let moved = m.split_off(&at);
    m.extend(moved.into_iter().map(|(k, v)| (k + 1, v)));
}
