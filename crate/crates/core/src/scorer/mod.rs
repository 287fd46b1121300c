//! Next-token scorers. Every scorer returns a full log-probability vector
//! over the vocabulary for a given prefix.

mod ngram;
#[cfg(feature = "remote")]
mod remote;
mod table;

use serde::{Deserialize, Serialize};

use crate::tokenizer::TokenId;

pub use ngram::{NgramError, NgramScorer, DEFAULT_DISCOUNT};
#[cfg(feature = "remote")]
pub use remote::RemoteScorer;
pub use table::{TableScorer, UniformScorer};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScorerError {
    /// The scorer could not be reached; the request may succeed if retried.
    #[error("scorer unavailable: {0}")]
    Unavailable(String),
    /// The scorer answered with something unusable.
    #[error("scorer protocol error: {0}")]
    Protocol(String),
}

impl ScorerError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, ScorerError::Unavailable(_))
    }
}

pub trait Scorer: Send + Sync {
    fn vocab_size(&self) -> usize;

    /// Log-probabilities of every next token given `prefix`.
    fn next_logprobs(&self, prefix: &[TokenId]) -> Result<Vec<f64>, ScorerError>;

    /// Log-probability of one next token; must agree with `next_logprobs`.
    fn token_logprob(&self, prefix: &[TokenId], token: TokenId) -> Result<f64, ScorerError> {
        self.next_logprobs(prefix)?
            .get(token as usize)
            .copied()
            .ok_or_else(|| ScorerError::Protocol(format!("token {token} outside vocabulary")))
    }

    /// Log-probability of `tokens[i]` given `tokens[..i]` for every position
    /// in `positions`.
    fn sequence_logprobs(
        &self,
        tokens: &[TokenId],
        positions: &[usize],
    ) -> Result<Vec<f64>, ScorerError> {
        positions
            .iter()
            .map(|&i| self.token_logprob(&tokens[..i], tokens[i]))
            .collect()
    }
}

impl<S: Scorer + ?Sized> Scorer for std::sync::Arc<S> {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }
    fn next_logprobs(&self, prefix: &[TokenId]) -> Result<Vec<f64>, ScorerError> {
        (**self).next_logprobs(prefix)
    }
    fn token_logprob(&self, prefix: &[TokenId], token: TokenId) -> Result<f64, ScorerError> {
        (**self).token_logprob(prefix, token)
    }
}

impl<S: Scorer + ?Sized> Scorer for &S {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }
    fn next_logprobs(&self, prefix: &[TokenId]) -> Result<Vec<f64>, ScorerError> {
        (**self).next_logprobs(prefix)
    }
    fn token_logprob(&self, prefix: &[TokenId], token: TokenId) -> Result<f64, ScorerError> {
        (**self).token_logprob(prefix, token)
    }
}

/// Wire format of the scoring endpoint.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ScoreRequest {
    pub prefix: Vec<TokenId>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ScoreResponse {
    pub logprobs: Vec<f64>,
}

/// In-place log-softmax.
pub fn log_softmax(logits: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
    for x in logits {
        *x -= lse;
    }
}
