//! The infilling protocol: context with `[blank]`s, then `[sep]`, then one
//! infill per blank, each optionally prefixed by its frame tokens.

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{decode, decode_diversified, DecodeError, DecodeRequest, Hypothesis};
use crate::constraints::{
    build_restricted_suite, ConstraintError, ConstraintMode, ConstraintSuite,
};
use crate::dataprep::{context_text, frame_prefix, infill_segment, pad_frames, FRAME_SLOTS};
use crate::diversifier::{plan_subsets, DiversifyError, SubsetPolicy};
use crate::lexicon::{EmbeddingTable, Frame, Lexicon};
use crate::scorer::Scorer;
use crate::tokenizer::{BpeVocabulary, TokenId};

#[derive(Debug, thiserror::Error)]
pub enum InfillError {
    #[error("the task has no blanks")]
    NoBlanks,
    #[error("{lists} frame lists given for {blanks} blanks")]
    FrameListMismatch { lists: usize, blanks: usize },
    #[error("unknown frame {0}")]
    UnknownFrame(String),
    #[error("blank {0} is out of range")]
    BlankOutOfRange(usize),
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
    #[error(transparent)]
    Diversify(#[from] DiversifyError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
}

/// A story with some sentences masked. `null` sentences are blanks; frame
/// lists are given per blank, in blank order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfillTask {
    pub sentences: Vec<Option<String>>,
    #[serde(default)]
    pub frames: Vec<Vec<String>>,
}

impl InfillTask {
    pub fn blank_positions(&self) -> Vec<usize> {
        (0..self.sentences.len())
            .filter(|&i| self.sentences[i].is_none())
            .collect()
    }

    /// Parses inline text where `[blank]` marks masked sentences, e.g.
    /// `"Charles went shopping. [blank] Then he left."`. Text between blanks
    /// is split after `.`, `!` or `?` followed by whitespace (so "Mr. X"
    /// splits too).
    pub fn from_text(text: &str) -> Self {
        let mut sentences = Vec::new();
        for (i, part) in text.split(crate::tokenizer::BLANK).enumerate() {
            if i > 0 {
                sentences.push(None);
            }
            sentences.extend(split_sentences(part).into_iter().map(Some));
        }
        InfillTask {
            sentences,
            frames: Vec::new(),
        }
    }
}

fn split_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if matches!(c, '.' | '!' | '?') {
            // closing quotes and brackets stay with their sentence
            let mut end = i + c.len_utf8();
            while let Some(&(j, q)) = chars.peek() {
                if matches!(
                    q,
                    '"' | '\'' | ')' | ']' | '\u{201d}' | '\u{2019}' | '.' | '!' | '?'
                ) {
                    end = j + q.len_utf8();
                    chars.next();
                } else {
                    break;
                }
            }
            if chars.peek().is_none_or(|&(_, n)| n.is_whitespace()) {
                let s = text[start..end].trim();
                if !s.is_empty() {
                    out.push(s.to_string());
                }
                start = end;
            }
        }
    }
    let rest = text[start..].trim();
    if !rest.is_empty() {
        out.push(rest.to_string());
    }
    out
}

/// How frame ids appear in the prompt before each infill.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptStyle {
    /// No frame tokens.
    Ilm,
    /// Frame tokens, as many as requested.
    #[default]
    Ffl,
    /// Frame tokens padded with `[no_frame]` to a fixed number of slots.
    Ffl5,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InfillOptions {
    pub mode: ConstraintMode,
    pub beam_size: usize,
    pub top_k: Option<usize>,
    pub max_new_tokens: usize,
    pub length_penalty: f64,
    /// Candidates returned per blank.
    pub num_candidates: usize,
    pub prompt: PromptStyle,
    /// Decode with lexical constraints; otherwise frames only prompt.
    pub constrained: bool,
    /// Diversify over this many LU subsets (see [`SubsetPolicy`]).
    pub diversify: Option<usize>,
}

impl Default for InfillOptions {
    fn default() -> Self {
        InfillOptions {
            mode: ConstraintMode::Unordered,
            beam_size: super::DEFAULT_BEAM_SIZE,
            top_k: None,
            max_new_tokens: super::DEFAULT_MAX_NEW_TOKENS,
            length_penalty: 0.0,
            num_candidates: 5,
            prompt: PromptStyle::Ffl,
            constrained: true,
            diversify: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfillCandidate {
    pub text: String,
    pub tokens: Vec<TokenId>,
    pub logprob: f64,
    /// Frames whose constraint the decoder saw satisfied.
    pub satisfied_frames: Vec<String>,
    /// Index of the LU-subset combination that produced it, when diversified.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub combination: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlankResult {
    /// Sentence index of the blank.
    pub position: usize,
    pub frames: Vec<String>,
    pub candidates: Vec<InfillCandidate>,
    /// True when no hypothesis met every constraint; `candidates` then holds
    /// the best partial hypotheses.
    pub failed: bool,
    /// Diversified combinations whose search failed.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub failed_combinations: Vec<usize>,
}

pub fn resolve_frames<'a>(
    lexicon: &'a Lexicon,
    names: &[String],
) -> Result<Vec<&'a Frame>, InfillError> {
    names
        .iter()
        .map(|n| {
            lexicon
                .get(n)
                .ok_or_else(|| InfillError::UnknownFrame(n.clone()))
        })
        .collect()
}

/// Prompt text preceding the infill of the blank at `blank_index`.
pub fn build_prefix(
    task: &InfillTask,
    blank_index: usize,
    previous: &[(Vec<String>, String)],
    frames: &[String],
    style: PromptStyle,
) -> String {
    let sentences: Vec<Option<&str>> = task.sentences.iter().map(|s| s.as_deref()).collect();
    let mut text = context_text(&sentences);
    for (frames, infill) in previous.iter().take(blank_index) {
        text.push_str(&infill_segment(&prompt_frames(frames, style), infill));
    }
    text.push_str(&frame_prefix(&prompt_frames(frames, style)));
    text
}

fn prompt_frames(frames: &[String], style: PromptStyle) -> Vec<String> {
    match style {
        PromptStyle::Ilm => Vec::new(),
        PromptStyle::Ffl => frames.to_vec(),
        PromptStyle::Ffl5 => pad_frames(frames, FRAME_SLOTS).0,
    }
}

/// Fills every blank in order; each blank's best candidate becomes context
/// for the following ones.
pub fn infill(
    task: &InfillTask,
    lexicon: &Lexicon,
    vocab: &BpeVocabulary,
    scorer: &dyn Scorer,
    options: &InfillOptions,
    embeddings: Option<&EmbeddingTable>,
) -> Result<Vec<BlankResult>, InfillError> {
    let blanks = task.blank_positions();
    if blanks.is_empty() {
        return Err(InfillError::NoBlanks);
    }
    if task.frames.len() > blanks.len() {
        return Err(InfillError::FrameListMismatch {
            lists: task.frames.len(),
            blanks: blanks.len(),
        });
    }
    let frame_lists: Vec<Vec<&Frame>> = (0..blanks.len())
        .map(|i| resolve_frames(lexicon, task.frames.get(i).map_or(&[][..], Vec::as_slice)))
        .collect::<Result<_, _>>()?;

    let shapes = Arc::new(vocab.token_shapes());
    let terminators = BTreeSet::from([vocab.sep(), vocab.eos()]);
    let blocked: BTreeSet<TokenId> = vocab
        .specials()
        .values()
        .copied()
        .filter(|t| !terminators.contains(t))
        .collect();

    let mut previous: Vec<(Vec<String>, String)> = Vec::new();
    let mut results = Vec::with_capacity(blanks.len());
    for (b, (&position, frames)) in blanks.iter().zip(&frame_lists).enumerate() {
        let frame_ids: Vec<String> = frames.iter().map(|f| f.id.clone()).collect();
        let prompt = build_prefix(task, b, &previous, &frame_ids, options.prompt);
        let mut request = DecodeRequest::new(
            vocab.encode(&prompt),
            ConstraintSuite::empty(),
            terminators.clone(),
        );
        request.beam_size = options.beam_size;
        request.top_k = options.top_k;
        request.max_new_tokens = options.max_new_tokens;
        request.length_penalty = options.length_penalty;
        request.blocked = blocked.clone();

        let constrained = options.constrained && !frames.is_empty();
        let suites = if !constrained {
            vec![ConstraintSuite::empty()]
        } else {
            match (options.diversify, embeddings) {
                (Some(k), emb) if k > 1 => {
                    let emb = emb.ok_or(DiversifyError::NoEmbeddingTable)?;
                    let plan = plan_subsets(frames, emb, &SubsetPolicy::with_budget(k))?;
                    plan.suites(frames, options.mode, vocab, shapes.clone())?
                }
                _ => {
                    let all: Vec<(&Frame, Option<&[usize]>)> =
                        frames.iter().map(|&f| (f, None)).collect();
                    vec![build_restricted_suite(
                        &all,
                        options.mode,
                        vocab,
                        shapes.clone(),
                    )?]
                }
            }
        };

        let mut result = BlankResult {
            position,
            frames: frame_ids.clone(),
            candidates: Vec::new(),
            failed: false,
            failed_combinations: Vec::new(),
        };
        if suites.len() == 1 {
            request.suite = suites.into_iter().next().expect("one suite");
            match decode(&request, scorer) {
                Ok(hyps) => {
                    result.candidates =
                        candidates(&hyps, &request.suite, vocab, None, options.num_candidates);
                }
                Err(DecodeError::SearchFailed { partial }) => {
                    result.failed = true;
                    result.candidates = candidates(
                        &partial,
                        &request.suite,
                        vocab,
                        None,
                        options.num_candidates,
                    );
                }
                Err(e) => return Err(e.into()),
            }
        } else {
            let out = decode_diversified(&request, &suites, scorer)?;
            result.failed_combinations = out.failed.clone();
            result.failed = out.candidates.is_empty();
            result.candidates = out
                .candidates
                .iter()
                .take(options.num_candidates)
                .map(|c| {
                    candidate(
                        &c.hypothesis,
                        &suites[c.combination],
                        vocab,
                        Some(c.combination),
                    )
                })
                .collect();
        }

        let best = result
            .candidates
            .first()
            .map(|c| c.text.clone())
            .unwrap_or_default();
        previous.push((frame_ids, best));
        results.push(result);
    }
    Ok(results)
}

fn candidates(
    hyps: &[Hypothesis],
    suite: &ConstraintSuite,
    vocab: &BpeVocabulary,
    combination: Option<usize>,
    n: usize,
) -> Vec<InfillCandidate> {
    hyps.iter()
        .take(n)
        .map(|h| candidate(h, suite, vocab, combination))
        .collect()
}

fn candidate(
    h: &Hypothesis,
    suite: &ConstraintSuite,
    vocab: &BpeVocabulary,
    combination: Option<usize>,
) -> InfillCandidate {
    let body = match h.tokens.split_last() {
        Some((last, rest)) if h.finished && (*last == vocab.sep() || *last == vocab.eos()) => rest,
        _ => &h.tokens[..],
    };
    let frames = suite.frames();
    InfillCandidate {
        text: vocab.decode(body).unwrap_or_default().trim().to_string(),
        tokens: h.tokens.clone(),
        logprob: h.logprob,
        satisfied_frames: h
            .state
            .completed_sets()
            .into_iter()
            .filter_map(|i| frames.get(i).map(|f| f.to_string()))
            .collect(),
        combination,
    }
}
