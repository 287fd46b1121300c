use std::collections::HashMap;

use super::{log_softmax, Scorer, ScorerError};
use crate::tokenizer::TokenId;

/// Same distribution everywhere: log(1/V).
#[derive(Debug, Clone, Copy)]
pub struct UniformScorer {
    vocab_size: usize,
}

impl UniformScorer {
    pub fn new(vocab_size: usize) -> Self {
        UniformScorer { vocab_size }
    }
}

impl Scorer for UniformScorer {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn next_logprobs(&self, _prefix: &[TokenId]) -> Result<Vec<f64>, ScorerError> {
        Ok(vec![-(self.vocab_size as f64).ln(); self.vocab_size])
    }
}

/// Fixed per-prefix distributions. Prefixes without an explicit entry get a
/// pseudo-random distribution derived from `seed` and the prefix, so the
/// table is total and reproducible without being materialized.
#[derive(Debug, Clone)]
pub struct TableScorer {
    vocab_size: usize,
    seed: u64,
    entries: HashMap<Vec<TokenId>, Vec<f64>>,
}

impl TableScorer {
    pub fn new(vocab_size: usize, seed: u64) -> Self {
        TableScorer {
            vocab_size,
            seed,
            entries: HashMap::new(),
        }
    }

    /// Sets the distribution after `prefix` from unnormalized logits.
    pub fn set(&mut self, prefix: &[TokenId], mut logits: Vec<f64>) {
        assert_eq!(
            logits.len(),
            self.vocab_size,
            "logit vector has wrong length"
        );
        log_softmax(&mut logits);
        self.entries.insert(prefix.to_vec(), logits);
    }

    fn hashed(&self, prefix: &[TokenId]) -> Vec<f64> {
        let mut h = splitmix(self.seed ^ 0x9e37_79b9_7f4a_7c15);
        for &t in prefix {
            h = splitmix(h ^ u64::from(t).wrapping_mul(0xff51_afd7_ed55_8ccd));
        }
        let mut logits: Vec<f64> = (0..self.vocab_size)
            .map(|i| {
                h = splitmix(h.wrapping_add(i as u64));
                // 53 random bits in [0, 1), spread over a few nats
                (h >> 11) as f64 / (1u64 << 53) as f64 * 4.0
            })
            .collect();
        log_softmax(&mut logits);
        logits
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl Scorer for TableScorer {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn next_logprobs(&self, prefix: &[TokenId]) -> Result<Vec<f64>, ScorerError> {
        Ok(match self.entries.get(prefix) {
            Some(lp) => lp.clone(),
            None => self.hashed(prefix),
        })
    }
}
