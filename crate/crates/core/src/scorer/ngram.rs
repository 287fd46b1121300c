use std::collections::HashMap;
use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use super::{Scorer, ScorerError};
use crate::tokenizer::TokenId;

pub const DEFAULT_DISCOUNT: f64 = 0.75;

const MAGIC: &[u8; 8] = b"FFNGRAM1";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum NgramError {
    #[error("n-gram order must be at least 1")]
    InvalidOrder,
    #[error("discount must lie in (0, 1], got {0}")]
    InvalidDiscount(f64),
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("token {token} is outside the vocabulary of {vocab_size}")]
    TokenOutOfRange { token: TokenId, vocab_size: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("not an n-gram model file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, PartialEq)]
struct ContextStats {
    total: u64,
    /// (token, count), sorted by token
    followers: Vec<(TokenId, u32)>,
}

/// Interpolated absolute-discounting n-gram model over token ids.
///
/// `P_k(w|h) = max(c(h,w) - D, 0) / c(h) + D * N1+(h·) / c(h) * P_{k-1}(w|h')`
/// with a uniform distribution below the unigram level. A context never seen
/// in training falls back to the next lower order unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct NgramScorer {
    order: usize,
    vocab_size: usize,
    discount: f64,
    /// `levels[k]` holds contexts of length k
    levels: Vec<HashMap<Vec<TokenId>, ContextStats>>,
}

impl NgramScorer {
    pub fn train<S: AsRef<[TokenId]>>(
        corpus: &[S],
        order: usize,
        vocab_size: usize,
        discount: f64,
    ) -> Result<Self, NgramError> {
        if order < 1 {
            return Err(NgramError::InvalidOrder);
        }
        if !(discount > 0.0 && discount <= 1.0) {
            return Err(NgramError::InvalidDiscount(discount));
        }
        if corpus.iter().all(|s| s.as_ref().is_empty()) {
            return Err(NgramError::EmptyCorpus);
        }
        let mut counts: Vec<HashMap<Vec<TokenId>, HashMap<TokenId, u32>>> =
            vec![HashMap::new(); order];
        for seq in corpus {
            let seq = seq.as_ref();
            for (i, &w) in seq.iter().enumerate() {
                if w as usize >= vocab_size {
                    return Err(NgramError::TokenOutOfRange {
                        token: w,
                        vocab_size,
                    });
                }
                for (k, level) in counts.iter_mut().enumerate().take(i + 1) {
                    *level
                        .entry(seq[i - k..i].to_vec())
                        .or_default()
                        .entry(w)
                        .or_default() += 1;
                }
            }
        }
        let levels = counts
            .into_iter()
            .map(|level| {
                level
                    .into_iter()
                    .map(|(ctx, followers)| {
                        let mut followers: Vec<(TokenId, u32)> = followers.into_iter().collect();
                        followers.sort_unstable();
                        let total = followers.iter().map(|&(_, c)| u64::from(c)).sum();
                        (ctx, ContextStats { total, followers })
                    })
                    .collect()
            })
            .collect();
        Ok(NgramScorer {
            order,
            vocab_size,
            discount,
            levels,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    /// Probabilities (not logs) using at most `max_order` levels.
    pub fn distribution(&self, prefix: &[TokenId], max_order: usize) -> Vec<f64> {
        let mut p = vec![1.0 / self.vocab_size as f64; self.vocab_size];
        for k in 0..self.order.min(max_order) {
            if k > prefix.len() {
                break;
            }
            let Some(stats) = self.levels[k].get(&prefix[prefix.len() - k..]) else {
                break;
            };
            let total = stats.total as f64;
            let lambda = self.discount * stats.followers.len() as f64 / total;
            for x in p.iter_mut() {
                *x *= lambda;
            }
            for &(w, c) in &stats.followers {
                p[w as usize] += (f64::from(c) - self.discount).max(0.0) / total;
            }
        }
        p
    }

    /// One entry of [`distribution`](Self::distribution), with the same
    /// floating-point operations in the same order.
    fn probability(&self, prefix: &[TokenId], token: TokenId) -> f64 {
        let mut p = 1.0 / self.vocab_size as f64;
        for k in 0..self.order {
            if k > prefix.len() {
                break;
            }
            let Some(stats) = self.levels[k].get(&prefix[prefix.len() - k..]) else {
                break;
            };
            let total = stats.total as f64;
            p *= self.discount * stats.followers.len() as f64 / total;
            if let Ok(i) = stats.followers.binary_search_by_key(&token, |&(t, _)| t) {
                p += (f64::from(stats.followers[i].1) - self.discount).max(0.0) / total;
            }
        }
        p
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), NgramError> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, NgramError> {
        let bytes = fs::read(path)?;
        Self::read_from(&mut bytes.as_slice())
    }

    /// Little-endian binary form. Contexts are written sorted, so equal
    /// models serialize to equal bytes.
    pub fn write_to(&self, w: &mut impl Write) -> Result<(), NgramError> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(self.order as u32).to_le_bytes())?;
        w.write_all(&(self.vocab_size as u32).to_le_bytes())?;
        w.write_all(&self.discount.to_le_bytes())?;
        for level in &self.levels {
            let mut contexts: Vec<_> = level.iter().collect();
            contexts.sort_unstable_by(|a, b| a.0.cmp(b.0));
            w.write_all(&(contexts.len() as u64).to_le_bytes())?;
            for (ctx, stats) in contexts {
                for &t in ctx {
                    w.write_all(&t.to_le_bytes())?;
                }
                w.write_all(&(stats.followers.len() as u32).to_le_bytes())?;
                for &(t, c) in &stats.followers {
                    w.write_all(&t.to_le_bytes())?;
                    w.write_all(&c.to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self, NgramError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)
            .map_err(|_| NgramError::Format("truncated header".into()))?;
        if &magic != MAGIC {
            return Err(NgramError::Format("bad magic".into()));
        }
        let version = read_u32(r)?;
        if version != FORMAT_VERSION {
            return Err(NgramError::Format(format!("unsupported version {version}")));
        }
        let order = read_u32(r)? as usize;
        let vocab_size = read_u32(r)? as usize;
        let mut d = [0u8; 8];
        r.read_exact(&mut d)?;
        let discount = f64::from_le_bytes(d);
        if order < 1 {
            return Err(NgramError::InvalidOrder);
        }
        if !(discount > 0.0 && discount <= 1.0) {
            return Err(NgramError::InvalidDiscount(discount));
        }
        let mut levels = Vec::with_capacity(order);
        for k in 0..order {
            let n = read_u64(r)?;
            let mut level = HashMap::new();
            for _ in 0..n {
                let ctx = (0..k).map(|_| read_u32(r)).collect::<Result<Vec<_>, _>>()?;
                let nf = read_u32(r)?;
                let mut followers = Vec::with_capacity(nf as usize);
                for _ in 0..nf {
                    let t = read_u32(r)?;
                    if t as usize >= vocab_size {
                        return Err(NgramError::Format(format!("token {t} out of range")));
                    }
                    followers.push((t, read_u32(r)?));
                }
                if followers.is_empty() {
                    return Err(NgramError::Format("context without followers".into()));
                }
                let total = followers.iter().map(|&(_, c)| u64::from(c)).sum();
                level.insert(ctx, ContextStats { total, followers });
            }
            levels.push(level);
        }
        let mut rest = Vec::new();
        r.read_to_end(&mut rest)?;
        if !rest.is_empty() {
            return Err(NgramError::Format("trailing bytes".into()));
        }
        Ok(NgramScorer {
            order,
            vocab_size,
            discount,
            levels,
        })
    }
}

fn read_u32(r: &mut impl Read) -> Result<u32, NgramError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)
        .map_err(|_| NgramError::Format("truncated file".into()))?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64, NgramError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)
        .map_err(|_| NgramError::Format("truncated file".into()))?;
    Ok(u64::from_le_bytes(b))
}

impl Scorer for NgramScorer {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn next_logprobs(&self, prefix: &[TokenId]) -> Result<Vec<f64>, ScorerError> {
        let mut p = self.distribution(prefix, self.order);
        for x in p.iter_mut() {
            *x = x.ln();
        }
        Ok(p)
    }

    fn token_logprob(&self, prefix: &[TokenId], token: TokenId) -> Result<f64, ScorerError> {
        if token as usize >= self.vocab_size {
            return Err(ScorerError::Protocol(format!(
                "token {token} outside vocabulary"
            )));
        }
        Ok(self.probability(prefix, token).ln())
    }
}
