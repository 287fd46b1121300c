use std::collections::HashSet;

use super::{decode, DecodeError, DecodeRequest, Hypothesis};
use crate::constraints::ConstraintSuite;
use crate::scorer::Scorer;
use crate::tokenizer::TokenId;

#[derive(Debug, Clone, PartialEq)]
pub struct DiversifiedCandidate {
    pub hypothesis: Hypothesis,
    /// Index into the suites the search ran over.
    pub combination: usize,
    /// Rank of the hypothesis within its own search.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DiversifiedOutput {
    pub candidates: Vec<DiversifiedCandidate>,
    /// Combinations whose search found no finished hypothesis.
    pub failed: Vec<usize>,
}

/// Runs one search per suite and interleaves the results round-robin: every
/// combination's best hypothesis in combination order, then every second
/// best, and so on. Repeated token sequences keep their earliest slot.
pub fn decode_diversified(
    request: &DecodeRequest,
    suites: &[ConstraintSuite],
    scorer: &dyn Scorer,
) -> Result<DiversifiedOutput, DecodeError> {
    let mut per_combination = Vec::with_capacity(suites.len());
    let mut failed = Vec::new();
    for (i, suite) in suites.iter().enumerate() {
        let mut r = request.clone();
        r.suite = suite.clone();
        match decode(&r, scorer) {
            Ok(h) => per_combination.push(h),
            Err(DecodeError::SearchFailed { .. }) => {
                log::info!("combination {i} found no finished hypothesis");
                failed.push(i);
                per_combination.push(Vec::new());
            }
            Err(e) => return Err(e),
        }
    }
    Ok(DiversifiedOutput {
        candidates: round_robin(per_combination),
        failed,
    })
}

pub(crate) fn round_robin(per_combination: Vec<Vec<Hypothesis>>) -> Vec<DiversifiedCandidate> {
    let depth = per_combination.iter().map(Vec::len).max().unwrap_or(0);
    let mut seen: HashSet<Vec<TokenId>> = HashSet::new();
    let mut out = Vec::new();
    for rank in 0..depth {
        for (combination, hyps) in per_combination.iter().enumerate() {
            if let Some(h) = hyps.get(rank) {
                if seen.insert(h.tokens.clone()) {
                    out.push(DiversifiedCandidate {
                        hypothesis: h.clone(),
                        combination,
                        rank,
                    });
                }
            }
        }
    }
    out
}
