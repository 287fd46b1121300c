//! Loading the lexicon, tokenizer, scorer and corpora named by a config.

use std::sync::Arc;

use anyhow::Context;
use framefill_core::dataprep::{load_corpus, AnnotatedStory};
use framefill_core::engine::Engine;
use framefill_core::lexicon::{lemma_vocabulary, load_embeddings, EmbeddingTable, Lexicon};
use framefill_core::scorer::{NgramScorer, RemoteScorer, Scorer};
use framefill_core::tokenizer::BpeVocabulary;

use crate::config::Config;

pub fn lexicon(config: &Config) -> anyhow::Result<Lexicon> {
    let path = config.data.path(&config.data.lexicon);
    Lexicon::load(&path).with_context(|| format!("loading lexicon {}", path.display()))
}

pub fn vocab(config: &Config) -> anyhow::Result<BpeVocabulary> {
    let d = &config.data;
    let specials = d.path(&d.specials);
    BpeVocabulary::from_files(
        d.path(&d.vocab),
        d.path(&d.merges),
        specials.exists().then_some(specials.as_path()),
    )
    .context("loading tokenizer")
}

pub fn corpus(config: &Config, lexicon: &Lexicon) -> anyhow::Result<Vec<AnnotatedStory>> {
    let path = config.data.path(&config.data.corpus);
    load_corpus(&path, Some(lexicon)).with_context(|| format!("loading corpus {}", path.display()))
}

pub fn embeddings(config: &Config, lexicon: &Lexicon) -> anyhow::Result<Option<EmbeddingTable>> {
    let path = config.data.path(&config.data.embeddings);
    if !path.exists() {
        return Ok(None);
    }
    let table = load_embeddings(&path, &lemma_vocabulary(lexicon.frames()))
        .with_context(|| format!("loading embeddings {}", path.display()))?;
    Ok(Some(table))
}

pub fn scorer(config: &Config, vocab: &BpeVocabulary) -> anyhow::Result<Arc<dyn Scorer>> {
    if let Some(url) = &config.scorer.url {
        return Ok(Arc::new(RemoteScorer::new(url, vocab.len())));
    }
    let path = &config.scorer.model;
    let lm = NgramScorer::load(path).with_context(|| {
        format!(
            "loading language model {} (create one with `framefill train-lm`)",
            path.display()
        )
    })?;
    anyhow::ensure!(
        lm.vocab_size() == vocab.len(),
        "model covers {} tokens but the tokenizer has {}",
        lm.vocab_size(),
        vocab.len()
    );
    Ok(Arc::new(lm))
}

/// Everything the interactive operations need.
pub fn engine(config: &Config) -> anyhow::Result<Engine> {
    let lexicon = lexicon(config)?;
    let vocab = vocab(config)?;
    let scorer = scorer(config, &vocab)?;
    let mut stories = corpus(config, &lexicon)?;
    if let Some(extra) = &config.data.annotations {
        let path = config.data.path(extra);
        if path.exists() {
            stories.extend(
                load_corpus(&path, Some(&lexicon))
                    .with_context(|| format!("loading {}", path.display()))?,
            );
        }
    }
    let embeddings = embeddings(config, &lexicon)?;
    let mut engine = Engine::new(lexicon, vocab, scorer).with_corpus(&stories);
    if let Some(e) = embeddings {
        engine = engine.with_embeddings(e);
    }
    Ok(engine)
}
