//! Frame fidelity under a lexical trigger oracle, and perplexity.
//!
//! The oracle only asks whether some variant of some lexical unit of the
//! frame occurs as a whole word; it knows nothing about word sense, so it
//! overestimates fidelity relative to a frame parser. Reports call the
//! number "lexical fidelity" for that reason.

use std::fmt::Write as _;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataprep::{make_example, pad_frame_slots, AnnotatedStory, Variant, FRAME_SLOTS};
use crate::lexicon::Frame;
use crate::scorer::{Scorer, ScorerError};
use crate::tokenizer::{BpeVocabulary, TokenId, TokenShape};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("no tokens selected for perplexity")]
    NoTokens,
    #[error(transparent)]
    Scorer(#[from] ScorerError),
}

/// Token spellings of every surface form of a frame, for repeated checks.
pub struct TriggerMatcher {
    forms: Vec<Vec<TokenId>>,
}

impl TriggerMatcher {
    pub fn new(frame: &Frame, vocab: &BpeVocabulary) -> Self {
        let mut forms: Vec<Vec<TokenId>> = frame
            .surface_forms()
            .into_iter()
            .flat_map(|(s, _)| vocab.tokenize_constraint(s))
            .collect();
        forms.sort();
        forms.dedup();
        TriggerMatcher { forms }
    }

    /// Token index of the earliest whole-word occurrence starting at or
    /// after `from`, and the index just past it.
    pub fn find(
        &self,
        ids: &[TokenId],
        shapes: &[TokenShape],
        from: usize,
    ) -> Option<(usize, usize)> {
        let shape = |t: TokenId| shapes.get(t as usize).copied().unwrap_or_default();
        (from..ids.len()).find_map(|start| {
            self.forms.iter().find_map(|form| {
                let end = start + form.len();
                if end > ids.len() || ids[start..end] != form[..] {
                    return None;
                }
                let left = start == 0
                    || !shape(ids[start - 1]).ends_letter
                    || !shape(form[0]).starts_letter;
                let right = end == ids.len()
                    || !shape(ids[end]).starts_letter
                    || !shape(form[form.len() - 1]).ends_letter;
                (left && right).then_some((start, end))
            })
        })
    }
}

/// True when the tokenized `text` contains a whole-word occurrence of any
/// variant of any lexical unit of `frame`.
pub fn lexical_trigger_check(text: &str, frame: &Frame, vocab: &BpeVocabulary) -> bool {
    let ids = vocab.encode(text);
    TriggerMatcher::new(frame, vocab)
        .find(&ids, &vocab.token_shapes(), 0)
        .is_some()
}

/// Greedy in-order scan: each frame must trigger after the previous one's
/// trigger ends. Returns the start positions, strictly increasing.
pub fn ordered_trigger_positions(
    text: &str,
    frames: &[&Frame],
    vocab: &BpeVocabulary,
) -> Option<Vec<usize>> {
    let ids = vocab.encode(text);
    let shapes = vocab.token_shapes();
    let mut from = 0;
    let mut positions = Vec::with_capacity(frames.len());
    for f in frames {
        let (start, end) = TriggerMatcher::new(f, vocab).find(&ids, &shapes, from)?;
        positions.push(start);
        from = end;
    }
    Some(positions)
}

/// Frames of `frames` with a whole-word trigger in `text`, in the given
/// order. A lexical stand-in for a frame parser.
pub fn tag_frames<'a>(
    text: &str,
    frames: impl IntoIterator<Item = &'a Frame>,
    vocab: &BpeVocabulary,
) -> Vec<String> {
    let ids = vocab.encode(text);
    let shapes = vocab.token_shapes();
    frames
        .into_iter()
        .filter(|f| {
            TriggerMatcher::new(f, vocab)
                .find(&ids, &shapes, 0)
                .is_some()
        })
        .map(|f| f.id.clone())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub metric: String,
    /// Matched target frames per example.
    pub matched: Vec<Vec<String>>,
    pub recall: f64,
    pub perfect_recall: f64,
    pub examples: usize,
    pub targets: usize,
}

impl FidelityReport {
    pub fn table(&self) -> String {
        let mut s = String::new();
        writeln!(
            s,
            "{:<18} {:>8} {:>14} {:>9}",
            "metric", "recall", "perfect_recall", "examples"
        )
        .unwrap();
        writeln!(
            s,
            "{:<18} {:>8.4} {:>14.4} {:>9}",
            self.metric, self.recall, self.perfect_recall, self.examples
        )
        .unwrap();
        s
    }
}

/// Recall over all target frames and the share of examples with every
/// target matched. Examples without targets count as perfect.
pub fn fidelity(outputs: &[(String, Vec<&Frame>)], vocab: &BpeVocabulary) -> FidelityReport {
    let shapes = vocab.token_shapes();
    let mut matched = Vec::with_capacity(outputs.len());
    let (mut hits, mut targets, mut perfect) = (0, 0, 0);
    for (text, frames) in outputs {
        let ids = vocab.encode(text);
        let found: Vec<String> = frames
            .iter()
            .filter(|f| {
                TriggerMatcher::new(f, vocab)
                    .find(&ids, &shapes, 0)
                    .is_some()
            })
            .map(|f| f.id.clone())
            .collect();
        hits += found.len();
        targets += frames.len();
        perfect += usize::from(found.len() == frames.len());
        matched.push(found);
    }
    let ratio = |a: usize, b: usize| if b == 0 { 1.0 } else { a as f64 / b as f64 };
    FidelityReport {
        metric: "lexical fidelity".into(),
        matched,
        recall: ratio(hits, targets),
        perfect_recall: ratio(perfect, outputs.len()),
        examples: outputs.len(),
        targets,
    }
}

/// Target frames for fidelity runs with fewer frames than the sentence has:
/// a seeded random subset of `size` (all when `size` is `None`).
pub fn sample_targets(frames: &[String], size: Option<usize>, rng: &mut ChaCha8Rng) -> Vec<String> {
    match size {
        None => frames.to_vec(),
        Some(n) => {
            let mut picked: Vec<String> = frames
                .choose_multiple(rng, n.min(frames.len()))
                .cloned()
                .collect();
            picked.sort_by_key(|f| frames.iter().position(|g| g == f));
            picked
        }
    }
}

/// `exp(-mean log p)` over the selected tokens of every sequence.
pub fn perplexity(
    scorer: &dyn Scorer,
    items: &[(Vec<TokenId>, Vec<bool>)],
) -> Result<f64, EvalError> {
    let (mut total, mut count) = (0.0, 0usize);
    for (ids, mask) in items {
        assert_eq!(ids.len(), mask.len(), "mask length must match the sequence");
        for (i, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
            total += scorer.token_logprob(&ids[..i], ids[i])?;
            count += 1;
        }
    }
    if count == 0 {
        return Err(EvalError::NoTokens);
    }
    Ok((-total / count as f64).exp())
}

/// Selects tokens after the first `[sep]`: infill text, plus the special
/// tokens there (frame ids, `[no_frame]`, closing `[sep]`s) when
/// `with_special` is set.
pub fn infill_mask(ids: &[TokenId], vocab: &BpeVocabulary, with_special: bool) -> Vec<bool> {
    let sep = vocab.sep();
    let Some(first) = ids.iter().position(|&t| t == sep) else {
        return vec![false; ids.len()];
    };
    ids.iter()
        .enumerate()
        .map(|(i, &t)| i > first && (with_special || !vocab.is_special(t)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PplRow {
    pub regime: String,
    /// `None` where no token was selected.
    pub infill_text: Option<f64>,
    pub with_special: Option<f64>,
    pub five_slot: Option<f64>,
    pub examples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PplTable {
    pub variant: Variant,
    pub ordered: bool,
    pub rows: Vec<PplRow>,
}

impl PplTable {
    pub fn table(&self) -> String {
        let cell = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"));
        let mut s = String::new();
        writeln!(
            s,
            "{:<12} {:>12} {:>12} {:>12} {:>9}",
            "regime", "infill_text", "+special", "5-slot", "examples"
        )
        .unwrap();
        for r in &self.rows {
            writeln!(
                s,
                "{:<12} {:>12} {:>12} {:>12} {:>9}",
                r.regime,
                cell(r.infill_text),
                cell(r.with_special),
                cell(r.five_slot),
                r.examples
            )
            .unwrap();
        }
        s
    }
}

fn cell(
    scorer: &dyn Scorer,
    items: &[(Vec<TokenId>, Vec<bool>)],
) -> Result<Option<f64>, EvalError> {
    match perplexity(scorer, items) {
        Ok(v) => Ok(Some(v)),
        Err(EvalError::NoTokens) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Perplexity under three maskings (infill text, infill text plus special
/// tokens, and plus special tokens on 5-slot padded examples), for stories
/// with one sentence masked and with every sentence masked.
pub fn eval_ppl_suite(
    scorer: &dyn Scorer,
    vocab: &BpeVocabulary,
    stories: &[AnnotatedStory],
    variant: Variant,
    ordered: bool,
    seed: u64,
) -> Result<PplTable, EvalError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for regime in ["one-masked", "all-masked"] {
        let mut plain = Vec::new();
        let mut padded = Vec::new();
        for story in stories {
            let n = story.sentences.len();
            let blanks: Vec<usize> = if regime == "one-masked" {
                vec![rand::Rng::random_range(&mut rng, 0..n)]
            } else {
                (0..n).collect()
            };
            // frameless sentences cannot carry S/M/A examples; fall back to
            // an unconditioned example so the story still counts
            let ex = match make_example(story, &blanks, variant, ordered, &mut rng) {
                Ok(Some(ex)) => ex,
                _ => match make_example(story, &blanks, Variant::Ilm, ordered, &mut rng) {
                    Ok(Some(ex)) => ex,
                    _ => continue,
                },
            };
            let slotted = pad_frame_slots(&ex, story, FRAME_SLOTS);
            plain.push(vocab.encode(&ex.surface));
            padded.push(vocab.encode(&slotted.surface));
        }
        let masked = |seqs: &[Vec<TokenId>], special: bool| -> Vec<(Vec<TokenId>, Vec<bool>)> {
            seqs.iter()
                .map(|ids| (ids.clone(), infill_mask(ids, vocab, special)))
                .collect()
        };
        rows.push(PplRow {
            regime: regime.to_string(),
            infill_text: cell(scorer, &masked(&plain, false))?,
            with_special: cell(scorer, &masked(&plain, true))?,
            five_slot: cell(scorer, &masked(&padded, true))?,
            examples: plain.len(),
        });
    }
    Ok(PplTable {
        variant,
        ordered,
        rows,
    })
}
