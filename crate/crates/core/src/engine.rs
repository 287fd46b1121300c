//! Everything a front end needs behind one value: lexicon, tokenizer,
//! scorer, suggestion model and optional embeddings, plus the request and
//! response types of the interactive operations.

use std::collections::HashMap;
use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::constraints::{build_suite, ConstraintMode, SuiteDump};
use crate::dataprep::AnnotatedStory;
use crate::decoder::{
    infill, resolve_frames, BlankResult, DecodeError, InfillError, InfillOptions, InfillTask,
};
use crate::diversifier::{plan_subsets, PlanDump, SubsetPolicy};
use crate::eval::tag_frames;
use crate::lexicon::{EmbeddingTable, Lexicon};
use crate::scorer::{Scorer, ScorerError};
use crate::suggest::{Suggestion, SuggestionModel, SUGGESTION_SOURCE};
use crate::tokenizer::BpeVocabulary;

/// Rewrites condition each following sentence on at most this many of its
/// frames.
pub const COUNTERFACTUAL_FRAMES: usize = 2;

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("no suggestion model is loaded")]
    NoSuggestionModel,
    #[error(transparent)]
    Infill(#[from] InfillError),
}

impl EngineError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            EngineError::InvalidRequest(_) => "invalid_request",
            EngineError::NoSuggestionModel => "no_suggestion_model",
            EngineError::Infill(e) => match e {
                InfillError::UnknownFrame(_) => "unknown_frame",
                InfillError::NoBlanks
                | InfillError::FrameListMismatch { .. }
                | InfillError::BlankOutOfRange(_) => "invalid_request",
                InfillError::Constraint(_) => "invalid_constraints",
                InfillError::Diversify(_) => "diversify_failed",
                InfillError::Decode(DecodeError::InvalidRequest(_)) => "invalid_request",
                InfillError::Decode(DecodeError::SearchFailed { .. }) => "search_failed",
                InfillError::Decode(DecodeError::Scorer(ScorerError::Unavailable(_))) => {
                    "scorer_unavailable"
                }
                InfillError::Decode(DecodeError::Scorer(ScorerError::Protocol(_))) => {
                    "scorer_error"
                }
            },
        }
    }

    /// Whether the caller, rather than the server, is at fault.
    pub fn is_client_error(&self) -> bool {
        !matches!(self.code(), "scorer_unavailable" | "scorer_error")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameInfo {
    pub id: String,
    pub name: String,
    pub lexical_units: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfillRequest {
    #[serde(flatten)]
    pub task: InfillTask,
    #[serde(default)]
    pub options: InfillOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfillResponse {
    pub blanks: Vec<BlankResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuggestRequest {
    /// Story with `null` for blanks.
    pub sentences: Vec<Option<String>>,
    pub position: usize,
    #[serde(default = "default_k")]
    pub k: usize,
    /// Known frames per sentence; sentences without an entry are looked up
    /// in the annotations or tagged lexically.
    #[serde(default)]
    pub frames: Option<Vec<Vec<String>>>,
}

fn default_k() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuggestResponse {
    pub position: usize,
    pub frames: Vec<Suggestion>,
    pub suggestion_source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversifyRequest {
    pub sentences: Vec<Option<String>>,
    pub position: usize,
    /// Number of suggested frames to generate for.
    #[serde(default = "default_frames")]
    pub k: usize,
    #[serde(default)]
    pub options: InfillOptions,
}

fn default_frames() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameCandidates {
    pub frame: String,
    pub probability: f64,
    pub result: BlankResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversifyResponse {
    pub position: usize,
    pub groups: Vec<FrameCandidates>,
    pub suggestion_source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualRequest {
    pub sentences: Vec<String>,
    pub index: usize,
    pub replacement: String,
    /// Frames of the original sentences; looked up when absent.
    #[serde(default)]
    pub frames: Option<Vec<Vec<String>>>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub options: InfillOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualResponse {
    pub story: Vec<String>,
    pub rewritten: Vec<usize>,
    pub frames: Vec<Vec<String>>,
    pub sampling_policy: String,
    pub blanks: Vec<BlankResult>,
}

#[derive(Clone)]
pub struct Engine {
    lexicon: Lexicon,
    vocab: BpeVocabulary,
    scorer: Arc<dyn Scorer>,
    suggestions: Option<SuggestionModel>,
    embeddings: Option<EmbeddingTable>,
    annotations: HashMap<String, Vec<String>>,
}

impl Engine {
    pub fn new(lexicon: Lexicon, vocab: BpeVocabulary, scorer: Arc<dyn Scorer>) -> Self {
        Engine {
            lexicon,
            vocab,
            scorer,
            suggestions: None,
            embeddings: None,
            annotations: HashMap::new(),
        }
    }

    /// Trains the suggestion model and indexes sentence annotations.
    pub fn with_corpus(mut self, stories: &[AnnotatedStory]) -> Self {
        let inventory: Vec<String> = self.lexicon.frames().iter().map(|f| f.id.clone()).collect();
        self.suggestions = SuggestionModel::train(&inventory, stories).ok();
        for s in stories {
            for (sentence, frames) in s.sentences.iter().zip(&s.frames) {
                self.annotations
                    .entry(sentence.clone())
                    .or_insert_with(|| frames.clone());
            }
        }
        self
    }

    pub fn with_embeddings(mut self, embeddings: EmbeddingTable) -> Self {
        self.embeddings = Some(embeddings);
        self
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    pub fn vocab(&self) -> &BpeVocabulary {
        &self.vocab
    }

    pub fn scorer(&self) -> &dyn Scorer {
        self.scorer.as_ref()
    }

    pub fn search_frames(&self, query: &str) -> Vec<FrameInfo> {
        self.lexicon
            .search(query)
            .into_iter()
            .map(|f| FrameInfo {
                id: f.id.clone(),
                name: f.name.clone(),
                lexical_units: f.lexical_units.iter().map(|lu| lu.label()).collect(),
            })
            .collect()
    }

    /// Annotated frames of a sentence, else the lexically tagged ones.
    pub fn frames_of(&self, sentence: &str) -> Vec<String> {
        match self.annotations.get(sentence) {
            Some(f) => f.clone(),
            None => tag_frames(sentence, self.lexicon.frames(), &self.vocab),
        }
    }

    pub fn infill(&self, request: &InfillRequest) -> Result<InfillResponse, EngineError> {
        let blanks = infill(
            &request.task,
            &self.lexicon,
            &self.vocab,
            self.scorer.as_ref(),
            &request.options,
            self.embeddings.as_ref(),
        )?;
        Ok(InfillResponse { blanks })
    }

    fn neighbour_frames(
        &self,
        sentences: &[Option<String>],
        known: Option<&Vec<Vec<String>>>,
        i: usize,
    ) -> Vec<String> {
        if let Some(f) = known.and_then(|k| k.get(i)) {
            return f.clone();
        }
        match sentences.get(i) {
            Some(Some(s)) => self.frames_of(s),
            _ => Vec::new(),
        }
    }

    pub fn suggest(&self, request: &SuggestRequest) -> Result<SuggestResponse, EngineError> {
        let model = self
            .suggestions
            .as_ref()
            .ok_or(EngineError::NoSuggestionModel)?;
        let p = request.position;
        if p >= request.sentences.len() {
            return Err(EngineError::InvalidRequest(format!(
                "position {p} is out of range"
            )));
        }
        let known = request.frames.as_ref();
        let prev = match p {
            0 => Vec::new(),
            _ => self.neighbour_frames(&request.sentences, known, p - 1),
        };
        let next = self.neighbour_frames(&request.sentences, known, p + 1);
        Ok(SuggestResponse {
            position: p,
            frames: model.suggest(&prev, &next, request.k),
            suggestion_source: SUGGESTION_SOURCE.to_string(),
        })
    }

    /// One search per suggested frame for the sentence at `position`.
    pub fn diversify(&self, request: &DiversifyRequest) -> Result<DiversifyResponse, EngineError> {
        let suggestions = self.suggest(&SuggestRequest {
            sentences: request.sentences.clone(),
            position: request.position,
            k: request.k,
            frames: None,
        })?;
        let mut sentences = request.sentences.clone();
        sentences[request.position] = None;
        // only the target position is generated; other blanks are left out
        let sentences: Vec<Option<String>> = sentences
            .into_iter()
            .enumerate()
            .filter(|(i, s)| s.is_some() || *i == request.position)
            .map(|(_, s)| s)
            .collect();
        let mut groups = Vec::with_capacity(suggestions.frames.len());
        for s in suggestions.frames {
            let task = InfillTask {
                sentences: sentences.clone(),
                frames: vec![vec![s.frame.clone()]],
            };
            let mut blanks = self.infill(&InfillRequest {
                task,
                options: request.options.clone(),
            })?;
            let mut result = blanks.blanks.remove(0);
            result.position = request.position;
            groups.push(FrameCandidates {
                frame: s.frame,
                probability: s.probability,
                result,
            });
        }
        Ok(DiversifyResponse {
            position: request.position,
            groups,
            suggestion_source: SUGGESTION_SOURCE.to_string(),
        })
    }

    /// Replaces one sentence and regenerates every later one, conditioned on
    /// a seeded sample of each original sentence's frames.
    pub fn counterfactual(
        &self,
        request: &CounterfactualRequest,
    ) -> Result<CounterfactualResponse, EngineError> {
        let n = request.sentences.len();
        if request.index >= n {
            return Err(EngineError::InvalidRequest(format!(
                "index {} is out of range",
                request.index
            )));
        }
        if request.index + 1 == n {
            return Err(EngineError::InvalidRequest(
                "no sentences follow the replacement".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(request.seed);
        let mut sentences: Vec<Option<String>> =
            request.sentences.iter().cloned().map(Some).collect();
        sentences[request.index] = Some(request.replacement.clone());
        let rewritten: Vec<usize> = (request.index + 1..n).collect();
        let mut frames = Vec::with_capacity(rewritten.len());
        for &i in &rewritten {
            let original = match request.frames.as_ref().and_then(|f| f.get(i)) {
                Some(f) => f.clone(),
                None => self.frames_of(&request.sentences[i]),
            };
            let picked: Vec<String> = original
                .choose_multiple(&mut rng, COUNTERFACTUAL_FRAMES.min(original.len()))
                .cloned()
                .collect();
            // keep the sentence's own frame order
            let ordered: Vec<String> = original
                .iter()
                .filter(|f| picked.contains(f))
                .cloned()
                .collect();
            frames.push(ordered);
            sentences[i] = None;
        }
        resolve_frames(&self.lexicon, &frames.concat()).map_err(EngineError::Infill)?;
        let response = self.infill(&InfillRequest {
            task: InfillTask {
                sentences: sentences.clone(),
                frames: frames.clone(),
            },
            options: request.options.clone(),
        })?;
        let story = sentences
            .into_iter()
            .enumerate()
            .map(|(i, s)| match s {
                Some(s) => s,
                None => response
                    .blanks
                    .iter()
                    .find(|b| b.position == i)
                    .and_then(|b| b.candidates.first())
                    .map(|c| c.text.clone())
                    .unwrap_or_default(),
            })
            .collect();
        Ok(CounterfactualResponse {
            story,
            rewritten,
            frames,
            sampling_policy: format!("seeded uniform subset of min({COUNTERFACTUAL_FRAMES}, available) frames per sentence"),
            blanks: response.blanks,
        })
    }

    /// The constraint tries for `frames`, for inspection.
    pub fn suite_dump(
        &self,
        frames: &[String],
        mode: ConstraintMode,
    ) -> Result<SuiteDump, EngineError> {
        let resolved = resolve_frames(&self.lexicon, frames)?;
        let suite = build_suite(&resolved, mode, &self.vocab).map_err(InfillError::from)?;
        Ok(suite.dump(&self.vocab))
    }

    /// LU clusters the diversified search would use for `frames`.
    pub fn subset_plan(&self, frames: &[String], budget: usize) -> Result<PlanDump, EngineError> {
        let resolved = resolve_frames(&self.lexicon, frames)?;
        let embeddings = self.embeddings.clone().unwrap_or_default();
        let plan = plan_subsets(&resolved, &embeddings, &SubsetPolicy::with_budget(budget))
            .map_err(InfillError::from)?;
        Ok(plan.dump(&resolved))
    }
}
