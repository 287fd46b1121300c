//! Splits each frame's lexical units into clusters of similar meaning so a
//! separate search can run per combination of clusters, giving candidates
//! that use different words for the same frame.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::constraints::{
    build_restricted_suite, ConstraintError, ConstraintMode, ConstraintSuite,
};
use crate::lexicon::{EmbeddingTable, Frame};
use crate::tokenizer::{BpeVocabulary, TokenShape};

#[derive(Debug, thiserror::Error)]
pub enum DiversifyError {
    #[error("the number of clusters must be at least 1")]
    InvalidK,
    #[error("no lexical unit of {0} has an embedding")]
    NoEmbeddings(String),
    #[error("diversification needs an embedding table")]
    NoEmbeddingTable,
    #[error("no frames to diversify")]
    NoFrames,
}

/// Ward agglomerative clustering of the frame's LUs by lemma embedding.
///
/// Returns subsets of LU indices, each sorted, ordered by smallest member.
/// LUs without an embedding join the largest cluster (the earliest one on
/// ties). `k` is clamped to the number of embeddable LUs; `k == 1` returns
/// every LU without consulting the table.
pub fn cluster_lus(
    frame: &Frame,
    k: usize,
    embeddings: &EmbeddingTable,
) -> Result<Vec<Vec<usize>>, DiversifyError> {
    if k == 0 {
        return Err(DiversifyError::InvalidK);
    }
    let all: Vec<usize> = (0..frame.lexical_units.len()).collect();
    if k == 1 {
        return Ok(vec![all]);
    }
    let (embedded, missing): (Vec<usize>, Vec<usize>) = all
        .into_iter()
        .partition(|&i| embeddings.get(&frame.lexical_units[i].lemma).is_some());
    if embedded.is_empty() {
        return Err(DiversifyError::NoEmbeddings(frame.id.clone()));
    }
    let points: Vec<&[f64]> = embedded
        .iter()
        .map(|&i| {
            embeddings
                .get(&frame.lexical_units[i].lemma)
                .expect("embedded")
        })
        .collect();
    let mut clusters: Vec<Vec<usize>> = ward(&points, k.min(points.len()))
        .into_iter()
        .map(|members| members.into_iter().map(|m| embedded[m]).collect())
        .collect();
    if !missing.is_empty() {
        let largest = (0..clusters.len())
            .max_by(|&a, &b| clusters[a].len().cmp(&clusters[b].len()).then(b.cmp(&a)))
            .expect("at least one cluster");
        clusters[largest].extend(missing);
        clusters[largest].sort_unstable();
    }
    clusters.sort_by_key(|c| c[0]);
    Ok(clusters)
}

/// Merges singleton clusters until `k` remain, always taking the pair with
/// the smallest Ward cost `|A||B|/(|A|+|B|) * ||mean(A) - mean(B)||^2`.
/// Ties go to the pair whose clusters come first. Members are point indices.
fn ward(points: &[&[f64]], k: usize) -> Vec<Vec<usize>> {
    let dim = points.first().map_or(0, |p| p.len());
    let mut clusters: Vec<(Vec<usize>, Vec<f64>)> = points
        .iter()
        .enumerate()
        .map(|(i, p)| (vec![i], p.to_vec()))
        .collect();
    while clusters.len() > k {
        let mut best = (f64::INFINITY, 0, 0);
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let (na, nb) = (clusters[a].0.len() as f64, clusters[b].0.len() as f64);
                let dist: f64 = clusters[a]
                    .1
                    .iter()
                    .zip(&clusters[b].1)
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum();
                let cost = na * nb / (na + nb) * dist;
                if cost < best.0 {
                    best = (cost, a, b);
                }
            }
        }
        let (_, a, b) = best;
        let (members_b, centroid_b) = clusters.remove(b);
        let (members_a, centroid_a) = &mut clusters[a];
        let (na, nb) = (members_a.len() as f64, members_b.len() as f64);
        for d in 0..dim {
            centroid_a[d] = (centroid_a[d] * na + centroid_b[d] * nb) / (na + nb);
        }
        members_a.extend(members_b);
        members_a.sort_unstable();
    }
    clusters.into_iter().map(|(m, _)| m).collect()
}

/// How many clusters each frame gets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetPolicy {
    /// Clusters when only one frame is requested.
    pub single: usize,
    /// Clusters for the frames with the most, second most, ... LUs; any
    /// further frame gets one.
    pub multi: Vec<usize>,
}

impl Default for SubsetPolicy {
    fn default() -> Self {
        SubsetPolicy {
            single: 8,
            multi: vec![4, 2],
        }
    }
}

impl SubsetPolicy {
    /// Roughly `budget` combinations: `budget` clusters for a lone frame,
    /// `budget / 2` and 2 for the two largest of several.
    pub fn with_budget(budget: usize) -> Self {
        let budget = budget.max(1);
        SubsetPolicy {
            single: budget,
            multi: vec![(budget / 2).max(1), budget.min(2)],
        }
    }

    /// Cluster count per frame, in request order. Larger LU sets rank first;
    /// equal sizes keep request order.
    pub fn ks(&self, frames: &[&Frame]) -> Vec<usize> {
        if frames.len() == 1 {
            return vec![self.single];
        }
        let mut by_size: Vec<usize> = (0..frames.len()).collect();
        by_size.sort_by_key(|&i| std::cmp::Reverse(frames[i].lexical_units.len()));
        let mut ks = vec![1; frames.len()];
        for (rank, &i) in by_size.iter().enumerate() {
            if let Some(&k) = self.multi.get(rank) {
                ks[i] = k;
            }
        }
        ks
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FramePlan {
    pub frame: String,
    /// LU indices per subset.
    pub subsets: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetPlan {
    pub frames: Vec<FramePlan>,
    /// One subset index per frame, lexicographic with the last frame varying
    /// fastest.
    pub combinations: Vec<Vec<usize>>,
}

pub fn plan_subsets(
    frames: &[&Frame],
    embeddings: &EmbeddingTable,
    policy: &SubsetPolicy,
) -> Result<SubsetPlan, DiversifyError> {
    if frames.is_empty() {
        return Err(DiversifyError::NoFrames);
    }
    let plans = frames
        .iter()
        .zip(policy.ks(frames))
        .map(|(&f, k)| {
            Ok(FramePlan {
                frame: f.id.clone(),
                subsets: cluster_lus(f, k, embeddings)?,
            })
        })
        .collect::<Result<Vec<_>, DiversifyError>>()?;
    let counts: Vec<usize> = plans.iter().map(|p| p.subsets.len()).collect();
    Ok(SubsetPlan {
        frames: plans,
        combinations: combinations(&counts),
    })
}

/// All index tuples below `counts`, last position varying fastest.
pub fn combinations(counts: &[usize]) -> Vec<Vec<usize>> {
    let total: usize = counts.iter().product();
    let mut out = Vec::with_capacity(total);
    let mut current = vec![0; counts.len()];
    for _ in 0..total {
        out.push(current.clone());
        for pos in (0..counts.len()).rev() {
            current[pos] += 1;
            if current[pos] < counts[pos] {
                break;
            }
            current[pos] = 0;
        }
    }
    out
}

impl SubsetPlan {
    /// One constraint suite per combination, restricted to its subsets.
    pub fn suites(
        &self,
        frames: &[&Frame],
        mode: ConstraintMode,
        vocab: &BpeVocabulary,
        shapes: Arc<Vec<TokenShape>>,
    ) -> Result<Vec<ConstraintSuite>, ConstraintError> {
        self.combinations
            .iter()
            .map(|combo| {
                let restricted: Vec<(&Frame, Option<&[usize]>)> = frames
                    .iter()
                    .zip(&self.frames)
                    .zip(combo)
                    .map(|((&f, plan), &s)| (f, Some(plan.subsets[s].as_slice())))
                    .collect();
                build_restricted_suite(&restricted, mode, vocab, shapes.clone())
            })
            .collect()
    }

    /// Frame → named subsets listing member lemmas, for display.
    pub fn dump(&self, frames: &[&Frame]) -> PlanDump {
        PlanDump {
            frames: self
                .frames
                .iter()
                .zip(frames)
                .map(|(plan, frame)| FrameDump {
                    frame: plan.frame.clone(),
                    subsets: plan
                        .subsets
                        .iter()
                        .enumerate()
                        .map(|(i, members)| SubsetDump {
                            name: format!("{}#{}", frame.name, i + 1),
                            lexical_units: members
                                .iter()
                                .map(|&m| frame.lexical_units[m].label())
                                .collect(),
                        })
                        .collect(),
                })
                .collect(),
            combinations: self.combinations.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanDump {
    pub frames: Vec<FrameDump>,
    pub combinations: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameDump {
    pub frame: String,
    pub subsets: Vec<SubsetDump>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetDump {
    pub name: String,
    pub lexical_units: Vec<String>,
}
