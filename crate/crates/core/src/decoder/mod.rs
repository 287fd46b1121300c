//! Constrained beam search with dynamic beam allocation.
//!
//! Each step expands every live hypothesis with its top-K allowed tokens plus
//! every allowed token that advances a constraint, then sorts the candidates
//! into banks by how many constraint sets they satisfy. Beam slots are split
//! evenly across banks so partially satisfied hypotheses are not crowded out
//! by fluent unconstrained ones. A terminator may only follow a hypothesis
//! whose constraints are all met.

mod diversified;
mod infill;

use std::collections::BTreeSet;

use serde::Serialize;

use crate::constraints::{ConstraintState, ConstraintSuite};
use crate::scorer::{Scorer, ScorerError};
use crate::tokenizer::TokenId;

pub use diversified::{decode_diversified, DiversifiedCandidate, DiversifiedOutput};
pub use infill::{
    build_prefix, infill, resolve_frames, BlankResult, InfillCandidate, InfillError, InfillOptions,
    InfillTask, PromptStyle,
};

pub const DEFAULT_BEAM_SIZE: usize = 20;
pub const DEFAULT_MAX_NEW_TOKENS: usize = 40;

#[derive(Debug, thiserror::Error)]
pub enum DecodeError {
    #[error("invalid decode request: {0}")]
    InvalidRequest(String),
    #[error(transparent)]
    Scorer(#[from] ScorerError),
    /// No hypothesis satisfied every constraint within the token budget.
    #[error("search failed: no hypothesis finished within the token budget")]
    SearchFailed { partial: Vec<Hypothesis> },
}

#[derive(Debug, Clone)]
pub struct DecodeRequest {
    /// Encoded context through the separator.
    pub prefix: Vec<TokenId>,
    pub suite: ConstraintSuite,
    pub beam_size: usize,
    /// Scorer continuations kept per hypothesis; defaults to `beam_size`.
    pub top_k: Option<usize>,
    pub max_new_tokens: usize,
    pub terminators: BTreeSet<TokenId>,
    /// Finished hypotheses rank by `logprob / len^length_penalty`.
    pub length_penalty: f64,
    /// Tokens that are never generated.
    pub blocked: BTreeSet<TokenId>,
}

impl DecodeRequest {
    pub fn new(
        prefix: Vec<TokenId>,
        suite: ConstraintSuite,
        terminators: BTreeSet<TokenId>,
    ) -> Self {
        DecodeRequest {
            prefix,
            suite,
            beam_size: DEFAULT_BEAM_SIZE,
            top_k: None,
            max_new_tokens: DEFAULT_MAX_NEW_TOKENS,
            terminators,
            length_penalty: 0.0,
            blocked: BTreeSet::new(),
        }
    }

    fn validate(&self) -> Result<(), DecodeError> {
        let invalid = |m: &str| Err(DecodeError::InvalidRequest(m.to_string()));
        if self.beam_size == 0 {
            return invalid("beam_size must be at least 1");
        }
        if self.top_k == Some(0) {
            return invalid("top_k must be at least 1");
        }
        if self.terminators.is_empty() {
            return invalid("at least one terminator token is required");
        }
        if self.max_new_tokens < self.suite.len() {
            return invalid("max_new_tokens is smaller than the number of constraint sets");
        }
        if !self.length_penalty.is_finite() {
            return invalid("length_penalty must be finite");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    /// Generated tokens only; a finished hypothesis ends with its terminator.
    pub tokens: Vec<TokenId>,
    pub logprob: f64,
    pub state: ConstraintState,
    pub finished: bool,
}

impl Hypothesis {
    pub fn score(&self, length_penalty: f64) -> f64 {
        if length_penalty == 0.0 || self.tokens.is_empty() {
            self.logprob
        } else {
            self.logprob / (self.tokens.len() as f64).powf(length_penalty)
        }
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct StepTrace {
    pub step: usize,
    pub live: usize,
    pub banks: Vec<BankTrace>,
    pub finished_added: usize,
    /// Best candidates that lost their slot, at most `beam_size` of them.
    pub pruned: Vec<PrunedTrace>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct BankTrace {
    pub satisfied: usize,
    pub candidates: usize,
    pub allocated: usize,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct PrunedTrace {
    pub tokens: Vec<TokenId>,
    pub logprob: f64,
    pub satisfied: usize,
}

struct Candidate {
    parent: usize,
    token: TokenId,
    logprob: f64,
    state: ConstraintState,
}

/// Splits `beam` slots over banks holding `sizes[i]` candidates each.
///
/// Every bank gets `beam / banks`; the remainder goes one slot each to the
/// highest banks. Slots a bank cannot fill move to the nearest banks with
/// spare candidates, trying `i + d` before `i - d`; donors are processed from
/// the highest bank down.
pub fn allocate_beam(sizes: &[usize], beam: usize) -> Vec<usize> {
    let banks = sizes.len();
    if banks == 0 {
        return Vec::new();
    }
    let base = beam / banks;
    let rem = beam % banks;
    let mut alloc: Vec<usize> = (0..banks)
        .map(|i| base + usize::from(i >= banks - rem))
        .collect();
    let mut surplus = vec![0; banks];
    for i in 0..banks {
        if alloc[i] > sizes[i] {
            surplus[i] = alloc[i] - sizes[i];
            alloc[i] = sizes[i];
        }
    }
    for i in (0..banks).rev() {
        let mut left = surplus[i];
        let mut d = 1;
        while left > 0 && (i + d < banks || d <= i) {
            for j in [i.checked_add(d).filter(|&j| j < banks), i.checked_sub(d)]
                .into_iter()
                .flatten()
            {
                let take = (sizes[j] - alloc[j]).min(left);
                alloc[j] += take;
                left -= take;
            }
            d += 1;
        }
    }
    alloc
}

fn rank_finished(finished: &mut Vec<Hypothesis>, length_penalty: f64, keep: usize) {
    finished.sort_by(|a, b| {
        b.score(length_penalty)
            .total_cmp(&a.score(length_penalty))
            .then_with(|| a.tokens.cmp(&b.tokens))
    });
    finished.truncate(keep);
}

/// Indices of the `k` highest entries among `allowed`, ties to lower ids.
fn top_k(logprobs: &[f64], allowed: impl Fn(TokenId) -> bool, k: usize) -> Vec<TokenId> {
    let mut ids: Vec<TokenId> = (0..logprobs.len() as TokenId)
        .filter(|&t| allowed(t))
        .collect();
    let cmp = |a: &TokenId, b: &TokenId| {
        logprobs[*b as usize]
            .total_cmp(&logprobs[*a as usize])
            .then(a.cmp(b))
    };
    if ids.len() > k {
        ids.select_nth_unstable_by(k - 1, cmp);
        ids.truncate(k);
    }
    ids.sort_unstable_by(cmp);
    ids
}

/// Runs the search, returning finished hypotheses best first (at most
/// `beam_size`).
pub fn decode(
    request: &DecodeRequest,
    scorer: &dyn Scorer,
) -> Result<Vec<Hypothesis>, DecodeError> {
    decode_traced(request, scorer, None)
}

pub fn decode_traced(
    request: &DecodeRequest,
    scorer: &dyn Scorer,
    mut trace: Option<&mut Vec<StepTrace>>,
) -> Result<Vec<Hypothesis>, DecodeError> {
    request.validate()?;
    let suite = &request.suite;
    let beam = request.beam_size;
    let k = request.top_k.unwrap_or(beam);
    let banks = suite.len() + 1;
    let vocab_size = scorer.vocab_size();

    let mut live = vec![Hypothesis {
        tokens: Vec::new(),
        logprob: 0.0,
        state: suite.initial_state(),
        finished: false,
    }];
    let mut finished: Vec<Hypothesis> = Vec::new();
    let mut context = request.prefix.clone();

    for step in 0..request.max_new_tokens {
        let mut bank_cands: Vec<Vec<Candidate>> = (0..banks).map(|_| Vec::new()).collect();
        let mut finished_added = 0;
        for (parent, hyp) in live.iter().enumerate() {
            context.truncate(request.prefix.len());
            context.extend_from_slice(&hyp.tokens);
            let lp = scorer.next_logprobs(&context)?;
            if lp.len() != vocab_size {
                return Err(ScorerError::Protocol(format!(
                    "expected {vocab_size} log-probabilities, got {}",
                    lp.len()
                ))
                .into());
            }
            let complete = suite.is_complete(&hyp.state);
            let needs_break = hyp.state.requires_word_break();
            let allowed = |t: TokenId| {
                lp[t as usize].is_finite()
                    && !request.blocked.contains(&t)
                    && (complete || !request.terminators.contains(&t))
                    && !(needs_break && suite.starts_letter(t))
            };
            let mut tokens = top_k(&lp, allowed, k);
            let chosen: BTreeSet<TokenId> = tokens.iter().copied().collect();
            tokens.extend(
                suite
                    .forced_tokens(&hyp.state)
                    .into_iter()
                    .filter(|&t| (t as usize) < vocab_size && allowed(t) && !chosen.contains(&t)),
            );
            for t in tokens {
                let logprob = hyp.logprob + lp[t as usize];
                if request.terminators.contains(&t) {
                    let mut toks = hyp.tokens.clone();
                    toks.push(t);
                    finished.push(Hypothesis {
                        tokens: toks,
                        logprob,
                        state: hyp.state.clone(),
                        finished: true,
                    });
                    finished_added += 1;
                } else {
                    let state = suite.advance(&hyp.state, t);
                    bank_cands[state.satisfied_count()].push(Candidate {
                        parent,
                        token: t,
                        logprob,
                        state,
                    });
                }
            }
        }
        rank_finished(&mut finished, request.length_penalty, beam);

        for bank in bank_cands.iter_mut() {
            bank.sort_by(|a, b| {
                b.logprob
                    .total_cmp(&a.logprob)
                    .then(a.parent.cmp(&b.parent))
                    .then(a.token.cmp(&b.token))
            });
        }
        let sizes: Vec<usize> = bank_cands.iter().map(Vec::len).collect();
        let alloc = allocate_beam(&sizes, beam);

        let mut next = Vec::with_capacity(beam);
        let mut pruned = Vec::new();
        for (bank, &take) in bank_cands.into_iter().zip(&alloc).rev() {
            for (i, c) in bank.into_iter().enumerate() {
                let parent = &live[c.parent];
                if i < take {
                    let mut tokens = Vec::with_capacity(parent.tokens.len() + 1);
                    tokens.extend_from_slice(&parent.tokens);
                    tokens.push(c.token);
                    next.push(Hypothesis {
                        tokens,
                        logprob: c.logprob,
                        state: c.state,
                        finished: false,
                    });
                } else if trace.is_some() {
                    let mut tokens = parent.tokens.clone();
                    tokens.push(c.token);
                    pruned.push(PrunedTrace {
                        tokens,
                        logprob: c.logprob,
                        satisfied: c.state.satisfied_count(),
                    });
                }
            }
        }
        if let Some(t) = trace.as_deref_mut() {
            pruned.sort_by(|a, b| {
                b.logprob
                    .total_cmp(&a.logprob)
                    .then(a.tokens.cmp(&b.tokens))
            });
            pruned.truncate(beam);
            t.push(StepTrace {
                step,
                live: live.len(),
                banks: sizes
                    .iter()
                    .zip(&alloc)
                    .enumerate()
                    .map(|(satisfied, (&candidates, &allocated))| BankTrace {
                        satisfied,
                        candidates,
                        allocated,
                    })
                    .collect(),
                finished_added,
                pruned,
            });
        }

        if next.is_empty() {
            break;
        }
        live = next;

        // log-probabilities only fall, so with raw-logprob ranking no live
        // hypothesis can overtake a full finished pool
        if request.length_penalty == 0.0 && finished.len() >= beam {
            let best_live = live
                .iter()
                .map(|h| h.logprob)
                .fold(f64::NEG_INFINITY, f64::max);
            if best_live < finished[beam - 1].logprob {
                break;
            }
        }
    }

    if finished.is_empty() {
        live.sort_by(|a, b| {
            b.state
                .satisfied_count()
                .cmp(&a.state.satisfied_count())
                .then(b.logprob.total_cmp(&a.logprob))
                .then_with(|| a.tokens.cmp(&b.tokens))
        });
        live.truncate(beam);
        return Err(DecodeError::SearchFailed { partial: live });
    }
    Ok(finished)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::ConstraintMode;
    use crate::scorer::{TableScorer, UniformScorer};

    #[test]
    fn allocation_rules() {
        // even split, remainder to the top banks
        assert_eq!(allocate_beam(&[10, 10, 10], 20), [6, 7, 7]);
        assert_eq!(allocate_beam(&[10, 10, 10], 2), [0, 1, 1]);
        // empty top bank donates downward
        assert_eq!(allocate_beam(&[10, 10, 0], 20), [10, 10, 0]);
        // i + d is tried before i - d
        assert_eq!(allocate_beam(&[10, 0, 10], 9), [3, 0, 6]);
        assert_eq!(allocate_beam(&[10, 1, 10, 10], 12), [3, 1, 5, 3]);
        assert_eq!(allocate_beam(&[5], 20), [5]);
        let sizes = [3, 0, 1, 40, 2];
        let a = allocate_beam(&sizes, 20);
        assert_eq!(a.iter().sum::<usize>(), 20);
        assert!(a.iter().zip(sizes).all(|(a, s)| *a <= s));
    }

    #[test]
    fn top_k_breaks_ties_by_id() {
        let lp = [-1.0, -0.5, -0.5, -3.0];
        assert_eq!(top_k(&lp, |_| true, 2), [1, 2]);
        assert_eq!(top_k(&lp, |t| t != 1, 2), [2, 0]);
        assert_eq!(top_k(&lp, |_| true, 10), [1, 2, 0, 3]);
    }

    fn request(suite: ConstraintSuite) -> DecodeRequest {
        let mut r = DecodeRequest::new(vec![], suite, BTreeSet::from([0]));
        r.max_new_tokens = 6;
        r.beam_size = 4;
        r
    }

    #[test]
    fn terminator_blocked_until_complete() {
        let suite =
            ConstraintSuite::from_paths(&[vec![vec![3]]], ConstraintMode::Unordered).unwrap();
        let scorer = TableScorer::new(4, 11);
        let out = decode(&request(suite.clone()), &scorer).unwrap();
        for h in &out {
            assert!(h.tokens.contains(&3));
            assert_eq!(h.tokens.last(), Some(&0));
            assert!(suite.is_complete(&h.state));
        }
        // sum of per-step log-probabilities
        let h = &out[0];
        let total: f64 = (0..h.tokens.len())
            .map(|i| scorer.next_logprobs(&h.tokens[..i]).unwrap()[h.tokens[i] as usize])
            .sum();
        assert!((total - h.logprob).abs() < 1e-9);
    }

    #[test]
    fn search_failure_carries_partials() {
        let suite =
            ConstraintSuite::from_paths(&[vec![vec![2, 3, 2, 3]]], ConstraintMode::Unordered)
                .unwrap();
        let mut r = request(suite);
        r.max_new_tokens = 3;
        r.blocked.insert(3);
        match decode(&r, &UniformScorer::new(4)) {
            Err(DecodeError::SearchFailed { partial }) => assert!(!partial.is_empty()),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn invalid_requests() {
        let mut r = request(ConstraintSuite::empty());
        r.beam_size = 0;
        assert!(matches!(
            decode(&r, &UniformScorer::new(3)),
            Err(DecodeError::InvalidRequest(_))
        ));
        let mut r = request(ConstraintSuite::empty());
        r.terminators.clear();
        assert!(matches!(
            decode(&r, &UniformScorer::new(3)),
            Err(DecodeError::InvalidRequest(_))
        ));
        let suite =
            ConstraintSuite::from_paths(&[vec![vec![1]], vec![vec![2]]], ConstraintMode::Ordered)
                .unwrap();
        let mut r = request(suite);
        r.max_new_tokens = 1;
        assert!(matches!(
            decode(&r, &UniformScorer::new(3)),
            Err(DecodeError::InvalidRequest(_))
        ));
    }

    #[test]
    fn trace_records_banks() {
        let suite =
            ConstraintSuite::from_paths(&[vec![vec![3]]], ConstraintMode::Unordered).unwrap();
        let mut trace = Vec::new();
        decode_traced(&request(suite), &TableScorer::new(4, 2), Some(&mut trace)).unwrap();
        assert!(!trace.is_empty());
        for s in &trace {
            assert_eq!(s.banks.len(), 2);
            assert!(s.banks.iter().map(|b| b.allocated).sum::<usize>() <= 4);
        }
    }

    #[test]
    fn length_penalty_changes_ranking_only() {
        let scorer = TableScorer::new(5, 9);
        let raw = decode(&request(ConstraintSuite::empty()), &scorer).unwrap();
        let mut r = request(ConstraintSuite::empty());
        r.length_penalty = 1.0;
        let norm = decode(&r, &scorer).unwrap();
        assert!(raw.windows(2).all(|w| w[0].logprob >= w[1].logprob));
        assert!(norm.windows(2).all(|w| w[0].score(1.0) >= w[1].score(1.0)));
    }
}
