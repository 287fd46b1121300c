//! Shared fixtures and independent oracles for the integration tests.

#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use framefill_core::constraints::ConstraintMode;
use framefill_core::dataprep::{
    load_corpus, prepare, AnnotatedStory, BlankPolicy, PrepareConfig, Variant,
};
use framefill_core::lexicon::Lexicon;
use framefill_core::scorer::{NgramScorer, Scorer, DEFAULT_DISCOUNT};
use framefill_core::tokenizer::{BpeVocabulary, TokenId, TokenShape};

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

pub fn vocab() -> BpeVocabulary {
    let d = data_dir();
    BpeVocabulary::from_files(
        d.join("vocab.json"),
        d.join("merges.txt"),
        Some(&d.join("specials.json")),
    )
    .unwrap()
}

pub fn lexicon() -> Lexicon {
    Lexicon::load(data_dir().join("lexicon.json")).unwrap()
}

pub fn stories(lexicon: &Lexicon) -> Vec<AnnotatedStory> {
    load_corpus(data_dir().join("stories.jsonl"), Some(lexicon)).unwrap()
}

/// Frame-conditioned training text for an n-gram model over `stories`.
pub fn training_sequences(
    stories: &[AnnotatedStory],
    vocab: &BpeVocabulary,
    seed: u64,
) -> Vec<Vec<TokenId>> {
    let config = PrepareConfig {
        variants: vec![
            (Variant::Ilm, false),
            (Variant::A, false),
            (Variant::A, true),
        ],
        blanks: BlankPolicy::Each,
        slice_context: false,
        slots: None,
        seed,
    };
    prepare(stories, &config)
        .iter()
        .map(|ex| vocab.encode(&ex.surface))
        .collect()
}

pub fn train_lm(stories: &[AnnotatedStory], vocab: &BpeVocabulary, order: usize) -> NgramScorer {
    NgramScorer::train(
        &training_sequences(stories, vocab, 7),
        order,
        vocab.len(),
        DEFAULT_DISCOUNT,
    )
    .unwrap()
}

/// Counts satisfied sets by rescanning the text after every token: at each
/// end position the lowest eligible set with a complete occurrence that
/// starts after the last completion (and on a word boundary, when shapes
/// are given) is marked done.
pub fn naive_satisfied(
    sets: &[Vec<Vec<TokenId>>],
    mode: ConstraintMode,
    shapes: Option<&[TokenShape]>,
    tokens: &[TokenId],
) -> usize {
    let mut done = vec![false; sets.len()];
    let mut restart = 0;
    let boundary_ok = |start: usize, first: TokenId| match shapes {
        None => true,
        Some(sh) => {
            start == 0
                || !sh[tokens[start - 1] as usize].ends_letter
                || !sh[first as usize].starts_letter
        }
    };
    for end in 1..=tokens.len() {
        let eligible: Vec<usize> = match mode {
            ConstraintMode::Ordered => (0..sets.len()).find(|&i| !done[i]).into_iter().collect(),
            ConstraintMode::Unordered => (0..sets.len()).filter(|&i| !done[i]).collect(),
        };
        let hit = eligible.into_iter().find(|&s| {
            sets[s].iter().any(|p| {
                p.len() <= end
                    && end - p.len() >= restart
                    && tokens[end - p.len()..end] == p[..]
                    && boundary_ok(end - p.len(), p[0])
            })
        });
        if let Some(s) = hit {
            done[s] = true;
            restart = end;
        }
    }
    done.iter().filter(|&&d| d).count()
}

/// Best log-probability over every terminated sequence of at most
/// `max_len` tokens (terminator included) that satisfies all sets.
pub fn brute_force_best(
    scorer: &dyn Scorer,
    sets: &[Vec<Vec<TokenId>>],
    mode: ConstraintMode,
    terminator: TokenId,
    max_len: usize,
) -> Option<f64> {
    let v = scorer.vocab_size() as TokenId;
    let mut best: Option<f64> = None;
    let mut stack: Vec<(Vec<TokenId>, f64)> = vec![(Vec::new(), 0.0)];
    while let Some((body, lp)) = stack.pop() {
        let next = scorer.next_logprobs(&body).unwrap();
        if naive_satisfied(sets, mode, None, &body) == sets.len() {
            let total = lp + next[terminator as usize];
            best = Some(best.map_or(total, |b: f64| b.max(total)));
        }
        if body.len() + 1 < max_len {
            for t in (0..v).filter(|&t| t != terminator) {
                let mut b = body.clone();
                b.push(t);
                stack.push((b, lp + next[t as usize]));
            }
        }
    }
    best
}

/// Plain beam search: every hypothesis proposes its `beam` best tokens,
/// proposals ending in a terminator retire, and the `beam` best of the
/// rest survive. Ties go to the earlier parent, then the lower token id.
pub fn reference_beam(
    scorer: &dyn Scorer,
    prefix: &[TokenId],
    beam: usize,
    max_new: usize,
    terminators: &BTreeSet<TokenId>,
) -> Vec<(Vec<TokenId>, f64)> {
    let mut live: Vec<(Vec<TokenId>, f64)> = vec![(Vec::new(), 0.0)];
    let mut finished: Vec<(Vec<TokenId>, f64)> = Vec::new();
    for _ in 0..max_new {
        let mut proposals: Vec<(f64, usize, TokenId)> = Vec::new();
        for (parent, (toks, lp)) in live.iter().enumerate() {
            let ctx: Vec<TokenId> = prefix.iter().chain(toks).copied().collect();
            let next = scorer.next_logprobs(&ctx).unwrap();
            let mut order: Vec<TokenId> = (0..next.len() as TokenId)
                .filter(|&t| next[t as usize].is_finite())
                .collect();
            order.sort_by(|&a, &b| {
                next[b as usize]
                    .partial_cmp(&next[a as usize])
                    .unwrap()
                    .then(a.cmp(&b))
            });
            for t in order.into_iter().take(beam) {
                let score = lp + next[t as usize];
                if terminators.contains(&t) {
                    let mut done = toks.clone();
                    done.push(t);
                    finished.push((done, score));
                } else {
                    proposals.push((score, parent, t));
                }
            }
        }
        finished.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        finished.truncate(beam);
        proposals.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .unwrap()
                .then(a.1.cmp(&b.1))
                .then(a.2.cmp(&b.2))
        });
        proposals.truncate(beam);
        if proposals.is_empty() {
            break;
        }
        live = proposals
            .into_iter()
            .map(|(lp, parent, t)| {
                let mut toks = live[parent].0.clone();
                toks.push(t);
                (toks, lp)
            })
            .collect();
    }
    finished
}

/// Random constraint sets over tokens `lo..hi`.
pub fn random_sets(
    rng: &mut impl rand::Rng,
    tokens: std::ops::Range<TokenId>,
    max_sets: usize,
    max_alternatives: usize,
    max_path: usize,
) -> Vec<Vec<Vec<TokenId>>> {
    let n = rng.random_range(1..=max_sets);
    (0..n)
        .map(|_| {
            let alts = rng.random_range(1..=max_alternatives);
            (0..alts)
                .map(|_| {
                    let len = rng.random_range(1..=max_path);
                    (0..len).map(|_| rng.random_range(tokens.clone())).collect()
                })
                .collect()
        })
        .collect()
}

pub fn random_shapes(rng: &mut impl rand::Rng, v: usize) -> Vec<TokenShape> {
    (0..v)
        .map(|_| TokenShape {
            starts_letter: rng.random_bool(0.5),
            ends_letter: rng.random_bool(0.5),
        })
        .collect()
}

/// One constrained infill task per story: a framed sentence is blanked and
/// its annotated frames become the targets. Alternates ordered/unordered.
pub fn corpus_tasks(
    stories: &[AnnotatedStory],
    seed: u64,
) -> Vec<(framefill_core::decoder::InfillTask, ConstraintMode)> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for (n, story) in stories.iter().enumerate() {
        let framed: Vec<usize> = (0..story.sentences.len())
            .filter(|&i| !story.frames[i].is_empty())
            .collect();
        if framed.is_empty() {
            continue;
        }
        let blank = framed[rng.random_range(0..framed.len())];
        let sentences = story
            .sentences
            .iter()
            .enumerate()
            .map(|(i, s)| (i != blank).then(|| s.clone()))
            .collect();
        let frames: Vec<String> = story.frames[blank].iter().take(3).cloned().collect();
        let mode = if n % 2 == 0 {
            ConstraintMode::Ordered
        } else {
            ConstraintMode::Unordered
        };
        out.push((
            framefill_core::decoder::InfillTask {
                sentences,
                frames: vec![frames],
            },
            mode,
        ));
    }
    out
}

pub fn demo_stories(lexicon: &Lexicon) -> Vec<AnnotatedStory> {
    load_corpus(data_dir().join("demo_stories.jsonl"), Some(lexicon)).unwrap()
}

/// Engine over the bundled data with an order-3 model of the corpus.
pub fn engine() -> framefill_core::engine::Engine {
    use framefill_core::lexicon::{lemma_vocabulary, load_embeddings};
    let lexicon = lexicon();
    let vocab = vocab();
    let mut corpus = stories(&lexicon);
    let lm = train_lm(&corpus, &vocab, 3);
    corpus.extend(demo_stories(&lexicon));
    let embeddings = load_embeddings(
        data_dir().join("embeddings.txt"),
        &lemma_vocabulary(lexicon.frames()),
    )
    .unwrap();
    framefill_core::engine::Engine::new(lexicon, vocab, std::sync::Arc::new(lm))
        .with_corpus(&corpus)
        .with_embeddings(embeddings)
}
