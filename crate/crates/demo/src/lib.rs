//! Everything the static page needs, compiled to wasm. The bundled data is
//! embedded and the n-gram model is trained on load, so the page works
//! without a server.

use std::sync::Arc;

use framefill_core::constraints::ConstraintMode;
use framefill_core::dataprep::{parse_corpus, prepare, BlankPolicy, PrepareConfig, Variant};
use framefill_core::decoder::{InfillOptions, InfillTask};
use framefill_core::engine::{DiversifyRequest, Engine, InfillRequest, SuggestRequest};
use framefill_core::lexicon::{lemma_vocabulary, parse_embeddings, parse_lexicon, Lexicon};
use framefill_core::scorer::{NgramScorer, DEFAULT_DISCOUNT};
use framefill_core::tokenizer::BpeVocabulary;
use wasm_bindgen::prelude::*;

const LEXICON: &str = include_str!("../../../data/lexicon.json");
const VOCAB: &str = include_str!("../../../data/vocab.json");
const MERGES: &str = include_str!("../../../data/merges.txt");
const SPECIALS: &str = include_str!("../../../data/specials.json");
const STORIES: &str = include_str!("../../../data/stories.jsonl");
const DEMO_STORIES: &str = include_str!("../../../data/demo_stories.jsonl");
const EMBEDDINGS: &str = include_str!("../../../data/embeddings.txt");

/// Smaller than the CLI default so a click stays interactive.
const BEAM: usize = 10;

pub struct Demo {
    engine: Engine,
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

impl Demo {
    pub fn new() -> Result<Self, String> {
        let lexicon = Lexicon::new(parse_lexicon(LEXICON).map_err(err)?);
        let vocab = BpeVocabulary::from_strs(VOCAB, MERGES, Some(SPECIALS)).map_err(err)?;
        let mut stories = parse_corpus(STORIES, Some(&lexicon)).map_err(err)?;
        let config = PrepareConfig {
            variants: vec![
                (Variant::Ilm, false),
                (Variant::A, false),
                (Variant::A, true),
            ],
            blanks: BlankPolicy::Each,
            slice_context: false,
            slots: None,
            seed: 7,
        };
        let sequences: Vec<_> = prepare(&stories, &config)
            .iter()
            .map(|ex| vocab.encode(&ex.surface))
            .collect();
        let lm = NgramScorer::train(&sequences, 3, vocab.len(), DEFAULT_DISCOUNT).map_err(err)?;
        stories.extend(parse_corpus(DEMO_STORIES, Some(&lexicon)).map_err(err)?);
        let embeddings =
            parse_embeddings(EMBEDDINGS, &lemma_vocabulary(lexicon.frames())).map_err(err)?;
        let engine = Engine::new(lexicon, vocab, Arc::new(lm))
            .with_corpus(&stories)
            .with_embeddings(embeddings);
        Ok(Demo { engine })
    }

    fn options(ordered: bool, num_candidates: usize) -> InfillOptions {
        InfillOptions {
            mode: if ordered {
                ConstraintMode::Ordered
            } else {
                ConstraintMode::Unordered
            },
            beam_size: BEAM,
            num_candidates,
            ..Default::default()
        }
    }

    /// Frames whose name or lexical units contain `query`.
    pub fn frames(&self, query: &str) -> String {
        serde_json::to_string(&self.engine.search_frames(query)).unwrap_or_default()
    }

    /// Fills every `[blank]` of `story`; `frames` is a whitespace-separated
    /// list applied to the first blank.
    pub fn infill(&self, story: &str, frames: &str, ordered: bool) -> Result<String, String> {
        let mut task = InfillTask::from_text(story);
        let blanks = task.sentences.iter().filter(|s| s.is_none()).count();
        task.frames = vec![Vec::new(); blanks];
        if let Some(first) = task.frames.first_mut() {
            *first = frames.split_whitespace().map(str::to_string).collect();
        }
        let request = InfillRequest {
            task,
            options: Self::options(ordered, 5),
        };
        let response = self.engine.infill(&request).map_err(err)?;
        serde_json::to_string(&response).map_err(err)
    }

    /// Frames likely at the first blank of `story`.
    pub fn suggest(&self, story: &str, k: usize) -> Result<String, String> {
        let sentences = InfillTask::from_text(story).sentences;
        let position = sentences
            .iter()
            .position(Option::is_none)
            .ok_or("the story has no [blank]")?;
        let response = self
            .engine
            .suggest(&SuggestRequest {
                sentences,
                position,
                k,
                frames: None,
            })
            .map_err(err)?;
        serde_json::to_string(&response).map_err(err)
    }

    /// Candidates for the first blank under each of the top `k` suggestions.
    pub fn diversify(&self, story: &str, k: usize) -> Result<String, String> {
        let sentences = InfillTask::from_text(story).sentences;
        let position = sentences
            .iter()
            .position(Option::is_none)
            .ok_or("the story has no [blank]")?;
        let request = DiversifyRequest {
            sentences,
            position,
            k,
            options: Self::options(false, 2),
        };
        let response = self.engine.diversify(&request).map_err(err)?;
        serde_json::to_string(&response).map_err(err)
    }
}

#[wasm_bindgen]
pub struct FrameFill(Demo);

#[wasm_bindgen]
impl FrameFill {
    #[wasm_bindgen(constructor)]
    pub fn new() -> Result<FrameFill, JsError> {
        Demo::new().map(FrameFill).map_err(|e| JsError::new(&e))
    }

    pub fn frames(&self, query: &str) -> String {
        self.0.frames(query)
    }

    pub fn infill(&self, story: &str, frames: &str, ordered: bool) -> Result<String, JsError> {
        self.0
            .infill(story, frames, ordered)
            .map_err(|e| JsError::new(&e))
    }

    pub fn suggest(&self, story: &str, k: usize) -> Result<String, JsError> {
        self.0.suggest(story, k).map_err(|e| JsError::new(&e))
    }

    pub fn diversify(&self, story: &str, k: usize) -> Result<String, JsError> {
        self.0.diversify(story, k).map_err(|e| JsError::new(&e))
    }
}
