use std::thread;
use std::time::Duration;

use super::{ScoreRequest, ScoreResponse, Scorer, ScorerError};
use crate::tokenizer::TokenId;

/// Client for an external model served over `POST {base}/score`.
///
/// The underlying agent pools connections and is safe to share between
/// threads. Transport failures and 5xx/429 answers are retried and, if they
/// persist, reported as [`ScorerError::Unavailable`]; malformed answers are
/// [`ScorerError::Protocol`] and never retried.
#[derive(Debug, Clone)]
pub struct RemoteScorer {
    agent: ureq::Agent,
    url: String,
    vocab_size: usize,
    retries: u32,
}

impl RemoteScorer {
    pub fn new(base_url: &str, vocab_size: usize) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(30)))
            .http_status_as_error(false)
            .build()
            .into();
        RemoteScorer {
            agent,
            url: format!("{}/score", base_url.trim_end_matches('/')),
            vocab_size,
            retries: 2,
        }
    }

    pub fn with_retries(mut self, retries: u32) -> Self {
        self.retries = retries;
        self
    }

    fn request(&self, prefix: &[TokenId]) -> Result<Vec<f64>, ScorerError> {
        let body = ScoreRequest {
            prefix: prefix.to_vec(),
        };
        let mut resp = self
            .agent
            .post(&self.url)
            .send_json(&body)
            .map_err(classify)?;
        let status = resp.status().as_u16();
        if status == 429 || status >= 500 {
            return Err(ScorerError::Unavailable(format!(
                "{} answered {status}",
                self.url
            )));
        }
        if status != 200 {
            return Err(ScorerError::Protocol(format!(
                "{} answered {status}",
                self.url
            )));
        }
        let parsed: ScoreResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| ScorerError::Protocol(format!("bad response body: {e}")))?;
        if parsed.logprobs.len() != self.vocab_size {
            return Err(ScorerError::Protocol(format!(
                "expected {} log-probabilities, got {}",
                self.vocab_size,
                parsed.logprobs.len()
            )));
        }
        let total: f64 = parsed.logprobs.iter().map(|x| x.exp()).sum();
        // NaN fails too
        if (total - 1.0).abs().is_nan() || (total - 1.0).abs() > 1e-6 {
            return Err(ScorerError::Protocol(format!(
                "distribution sums to {total}"
            )));
        }
        Ok(parsed.logprobs)
    }
}

fn classify(e: ureq::Error) -> ScorerError {
    match e {
        ureq::Error::Io(_)
        | ureq::Error::Timeout(_)
        | ureq::Error::HostNotFound
        | ureq::Error::ConnectionFailed => ScorerError::Unavailable(e.to_string()),
        other => ScorerError::Protocol(other.to_string()),
    }
}

impl Scorer for RemoteScorer {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn next_logprobs(&self, prefix: &[TokenId]) -> Result<Vec<f64>, ScorerError> {
        let mut attempt = 0;
        loop {
            match self.request(prefix) {
                Err(e) if e.is_retryable() && attempt < self.retries => {
                    attempt += 1;
                    log::warn!(
                        "scorer request failed ({e}); retry {attempt}/{}",
                        self.retries
                    );
                    thread::sleep(Duration::from_millis(50 * u64::from(attempt)));
                }
                other => return other,
            }
        }
    }
}
