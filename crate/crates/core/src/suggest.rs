//! Frame suggestions from adjacent-sentence frame statistics.
//!
//! For a target sentence, each frame of the previous sentence predicts the
//! target's frames through forward transition counts and each frame of the
//! next sentence through backward counts. Conditionals are smoothed toward
//! the marginal frame distribution and averaged; with no neighbouring frames
//! the marginal is used directly.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::dataprep::AnnotatedStory;

pub const SUGGESTION_SOURCE: &str = "frame-transition-counts";

/// Pseudo-count pulling every conditional toward the marginal.
const PRIOR_WEIGHT: f64 = 1.0;

#[derive(Debug, thiserror::Error)]
pub enum SuggestError {
    #[error("the suggestion model has no training data")]
    Untrained,
}

#[derive(Debug, Clone, Default, PartialEq)]
struct Counts {
    total: u64,
    next: HashMap<usize, u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuggestionModel {
    inventory: Vec<String>,
    marginal: Vec<u64>,
    forward: HashMap<usize, Counts>,
    backward: HashMap<usize, Counts>,
    observations: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    pub frame: String,
    pub probability: f64,
}

impl SuggestionModel {
    /// `inventory` fixes the frame universe and the tie-break order.
    pub fn train(inventory: &[String], stories: &[AnnotatedStory]) -> Result<Self, SuggestError> {
        let index: HashMap<&str, usize> = inventory
            .iter()
            .enumerate()
            .map(|(i, f)| (f.as_str(), i))
            .collect();
        let ids = |frames: &[String]| -> Vec<usize> {
            let mut v: Vec<usize> = frames
                .iter()
                .filter_map(|f| index.get(f.as_str()).copied())
                .collect();
            v.sort_unstable();
            v.dedup();
            v
        };
        let mut model = SuggestionModel {
            inventory: inventory.to_vec(),
            marginal: vec![0; inventory.len()],
            forward: HashMap::new(),
            backward: HashMap::new(),
            observations: 0,
        };
        for story in stories {
            let per_sentence: Vec<Vec<usize>> = story.frames.iter().map(|f| ids(f)).collect();
            for (i, frames) in per_sentence.iter().enumerate() {
                for &f in frames {
                    model.marginal[f] += 1;
                    model.observations += 1;
                }
                if let Some(next) = per_sentence.get(i + 1) {
                    for &a in frames {
                        for &b in next {
                            add(&mut model.forward, a, b);
                            add(&mut model.backward, b, a);
                        }
                    }
                }
            }
        }
        if model.observations == 0 {
            return Err(SuggestError::Untrained);
        }
        Ok(model)
    }

    pub fn inventory(&self) -> &[String] {
        &self.inventory
    }

    /// Add-one smoothed marginal.
    fn marginal_p(&self, f: usize) -> f64 {
        (self.marginal[f] as f64 + 1.0) / (self.observations as f64 + self.inventory.len() as f64)
    }

    fn conditional(&self, table: &HashMap<usize, Counts>, given: usize, f: usize) -> f64 {
        let (total, c) = table
            .get(&given)
            .map_or((0, 0), |c| (c.total, c.next.get(&f).copied().unwrap_or(0)));
        (c as f64 + PRIOR_WEIGHT * self.marginal_p(f)) / (total as f64 + PRIOR_WEIGHT)
    }

    /// Distribution over the inventory for a sentence between sentences with
    /// frames `previous` and `next` (either may be empty).
    pub fn distribution(&self, previous: &[String], next: &[String]) -> Vec<f64> {
        let lookup = |f: &String| self.inventory.iter().position(|g| g == f);
        let prev: Vec<usize> = previous.iter().filter_map(lookup).collect();
        let next: Vec<usize> = next.iter().filter_map(lookup).collect();
        let n = prev.len() + next.len();
        (0..self.inventory.len())
            .map(|f| {
                if n == 0 {
                    return self.marginal_p(f);
                }
                let fwd: f64 = prev
                    .iter()
                    .map(|&g| self.conditional(&self.forward, g, f))
                    .sum();
                let bwd: f64 = next
                    .iter()
                    .map(|&g| self.conditional(&self.backward, g, f))
                    .sum();
                (fwd + bwd) / n as f64
            })
            .collect()
    }

    /// Top `k` frames, most probable first; ties keep inventory order.
    pub fn suggest(&self, previous: &[String], next: &[String], k: usize) -> Vec<Suggestion> {
        let p = self.distribution(previous, next);
        let mut order: Vec<usize> = (0..p.len()).collect();
        order.sort_by(|&a, &b| p[b].total_cmp(&p[a]).then(a.cmp(&b)));
        order
            .into_iter()
            .take(k)
            .map(|i| Suggestion {
                frame: self.inventory[i].clone(),
                probability: p[i],
            })
            .collect()
    }
}

fn add(table: &mut HashMap<usize, Counts>, from: usize, to: usize) {
    let c = table.entry(from).or_default();
    c.total += 1;
    *c.next.entry(to).or_default() += 1;
}

#[cfg(test)]
mod tests {
    use super::*;

    fn story(frames: &[&[&str]]) -> AnnotatedStory {
        AnnotatedStory {
            sentences: frames.iter().map(|_| "s.".to_string()).collect(),
            frames: frames
                .iter()
                .map(|f| f.iter().map(|s| s.to_string()).collect())
                .collect(),
            spans: None,
        }
    }

    fn inventory() -> Vec<String> {
        ["[A]", "[B]", "[C]", "[D]"].map(String::from).to_vec()
    }

    #[test]
    fn follows_transitions() {
        let stories = vec![
            story(&[&["[A]"], &["[B]"]]),
            story(&[&["[A]"], &["[B]"], &["[C]"]]),
            story(&[&["[C]"], &["[C]"], &["[C]"]]),
        ];
        let m = SuggestionModel::train(&inventory(), &stories).unwrap();
        assert_eq!(m.suggest(&["[A]".into()], &[], 1)[0].frame, "[B]");
        // backward: what precedes B
        assert_eq!(m.suggest(&[], &["[B]".into()], 1)[0].frame, "[A]");
        // marginal without context
        assert_eq!(m.suggest(&[], &[], 1)[0].frame, "[C]");
    }

    #[test]
    fn normalizes_and_covers_inventory() {
        let stories = vec![story(&[&["[A]", "[B]"], &["[D]"]])];
        let m = SuggestionModel::train(&inventory(), &stories).unwrap();
        for (p, n) in [
            (vec![], vec![]),
            (vec!["[A]".to_string()], vec!["[D]".to_string()]),
        ] {
            let total: f64 = m.distribution(&p, &n).iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
        let all = m.suggest(&[], &[], 99);
        assert_eq!(all.len(), 4);
        // B and A tie on the marginal: inventory order
        assert_eq!(all[0].frame, "[A]");
    }

    #[test]
    fn untrained() {
        assert!(SuggestionModel::train(&inventory(), &[]).is_err());
    }
}
