//! Disjunctive lexical constraints as a list of tries, one per frame.
//!
//! Each trie holds every token spelling of every lexical-unit variant of its
//! frame; reaching any terminal satisfies the frame. A [`ConstraintState`]
//! follows one hypothesis through generation. It tracks every partial match
//! that a suffix of the output could still complete, in each trie that may
//! be worked on next:
//!
//! * ordered mode: only the lowest-indexed unsatisfied trie,
//! * unordered mode: every unsatisfied trie.
//!
//! The first trie to reach a terminal (lowest index on ties) is marked
//! complete, all partial matches are dropped, and matching restarts with the
//! next token. Completed tries stay in the suite; their tokens may still be
//! generated as ordinary text, they just no longer move the state.
//!
//! When the suite carries token shapes, a match may only open at a word
//! boundary: the first token starts with a non-letter, or the previous token
//! ended with one. After a completion on a letter the state asks the decoder
//! for a word break, so the satisfied word is not glued onto a longer one.

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::lexicon::Frame;
use crate::tokenizer::{BpeVocabulary, TokenId, TokenShape};

pub const MAX_CONSTRAINT_SETS: usize = 64;

#[derive(Debug, thiserror::Error)]
pub enum ConstraintError {
    #[error("frame {0} has no tokenizable lexical units")]
    EmptyFrame(String),
    #[error("{0} constraint sets requested; at most {MAX_CONSTRAINT_SETS} are supported")]
    TooManySets(usize),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintMode {
    Ordered,
    #[default]
    Unordered,
}

type NodeId = u32;
const ROOT: NodeId = 0;

#[derive(Clone, Debug, Default)]
struct TrieNode {
    children: Vec<(TokenId, NodeId)>,
    terminal: Option<u32>,
}

impl TrieNode {
    fn child(&self, token: TokenId) -> Option<NodeId> {
        self.children
            .binary_search_by_key(&token, |&(t, _)| t)
            .ok()
            .map(|i| self.children[i].1)
    }
}

/// Token-level trie of one frame's disjunctive constraint set.
#[derive(Clone, Debug)]
pub struct ConstraintTrie {
    frame: String,
    nodes: Vec<TrieNode>,
    labels: Vec<String>,
}

impl ConstraintTrie {
    pub fn new(frame: impl Into<String>) -> Self {
        ConstraintTrie {
            frame: frame.into(),
            nodes: vec![TrieNode::default()],
            labels: Vec::new(),
        }
    }

    pub fn frame(&self) -> &str {
        &self.frame
    }

    /// Inserts a token path ending at a terminal labelled `label`. Empty
    /// paths are ignored. The first label inserted for a path wins.
    pub fn insert(&mut self, path: &[TokenId], label: &str) -> bool {
        if path.is_empty() {
            return false;
        }
        let mut node = ROOT;
        for &tok in path {
            node = match self.nodes[node as usize].child(tok) {
                Some(next) => next,
                None => {
                    let next = self.nodes.len() as NodeId;
                    self.nodes.push(TrieNode::default());
                    let children = &mut self.nodes[node as usize].children;
                    let at = children.partition_point(|&(t, _)| t < tok);
                    children.insert(at, (tok, next));
                    next
                }
            };
        }
        if self.nodes[node as usize].terminal.is_none() {
            let idx = match self.labels.iter().position(|l| l == label) {
                Some(i) => i,
                None => {
                    self.labels.push(label.to_string());
                    self.labels.len() - 1
                }
            };
            self.nodes[node as usize].terminal = Some(idx as u32);
        }
        true
    }

    pub fn is_empty(&self) -> bool {
        self.nodes[ROOT as usize].children.is_empty()
    }

    fn child(&self, node: NodeId, token: TokenId) -> Option<NodeId> {
        self.nodes[node as usize].child(token)
    }

    fn is_terminal(&self, node: NodeId) -> bool {
        self.nodes[node as usize].terminal.is_some()
    }

    fn children(&self, node: NodeId) -> impl Iterator<Item = TokenId> + '_ {
        self.nodes[node as usize].children.iter().map(|&(t, _)| t)
    }

    /// Root-to-terminal paths with their LU labels, in token order.
    pub fn paths(&self) -> Vec<(Vec<TokenId>, &str)> {
        let mut out = Vec::new();
        let mut stack = vec![(ROOT, Vec::new())];
        while let Some((node, path)) = stack.pop() {
            let n = &self.nodes[node as usize];
            if let Some(l) = n.terminal {
                out.push((path.clone(), self.labels[l as usize].as_str()));
            }
            for &(tok, child) in n.children.iter().rev() {
                let mut p = path.clone();
                p.push(tok);
                stack.push((child, p));
            }
        }
        out
    }
}

/// The per-frame tries of one decode, in the user's frame order.
#[derive(Clone, Debug, Default)]
pub struct ConstraintSuite {
    tries: Vec<ConstraintTrie>,
    mode: ConstraintMode,
    shapes: Option<Arc<Vec<TokenShape>>>,
}

impl ConstraintSuite {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn new(tries: Vec<ConstraintTrie>, mode: ConstraintMode) -> Result<Self, ConstraintError> {
        if tries.len() > MAX_CONSTRAINT_SETS {
            return Err(ConstraintError::TooManySets(tries.len()));
        }
        if let Some(t) = tries.iter().find(|t| t.is_empty()) {
            return Err(ConstraintError::EmptyFrame(t.frame.clone()));
        }
        Ok(ConstraintSuite {
            tries,
            mode,
            shapes: None,
        })
    }

    /// Suite over raw token paths, one list of alternatives per set. No
    /// word-boundary rules apply.
    pub fn from_paths(
        sets: &[Vec<Vec<TokenId>>],
        mode: ConstraintMode,
    ) -> Result<Self, ConstraintError> {
        let tries = sets
            .iter()
            .enumerate()
            .map(|(i, paths)| {
                let mut trie = ConstraintTrie::new(format!("set{i}"));
                for (j, p) in paths.iter().enumerate() {
                    trie.insert(p, &format!("alt{j}"));
                }
                trie
            })
            .collect();
        Self::new(tries, mode)
    }

    pub fn with_shapes(mut self, shapes: Arc<Vec<TokenShape>>) -> Self {
        self.shapes = Some(shapes);
        self
    }

    pub fn len(&self) -> usize {
        self.tries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tries.is_empty()
    }

    pub fn mode(&self) -> ConstraintMode {
        self.mode
    }

    pub fn tries(&self) -> &[ConstraintTrie] {
        &self.tries
    }

    pub fn frames(&self) -> Vec<&str> {
        self.tries.iter().map(|t| t.frame()).collect()
    }

    fn shape(&self, token: TokenId) -> Option<TokenShape> {
        self.shapes
            .as_ref()
            .map(|s| s.get(token as usize).copied().unwrap_or_default())
    }

    pub fn starts_letter(&self, token: TokenId) -> bool {
        self.shape(token).is_some_and(|s| s.starts_letter)
    }

    pub fn initial_state(&self) -> ConstraintState {
        ConstraintState::default()
    }

    /// Sets that may be worked on next.
    pub fn next_possible_sets(&self, state: &ConstraintState) -> Vec<usize> {
        let open = (0..self.tries.len()).filter(|&i| !state.is_completed(i));
        match self.mode {
            ConstraintMode::Ordered => open.take(1).collect(),
            ConstraintMode::Unordered => open.collect(),
        }
    }

    pub fn is_complete(&self, state: &ConstraintState) -> bool {
        state.satisfied_count() == self.tries.len()
    }

    fn can_open(&self, state: &ConstraintState, token: TokenId) -> bool {
        match self.shape(token) {
            None => true,
            Some(shape) => state.position == 0 || !state.prev_ends_letter || !shape.starts_letter,
        }
    }

    /// Consumes one generated token.
    pub fn advance(&self, state: &ConstraintState, token: TokenId) -> ConstraintState {
        if self.tries.is_empty() {
            return state.clone();
        }
        let mut completed_set: Option<usize> = None;
        let mut note = |set: usize| {
            completed_set = Some(completed_set.map_or(set, |c| c.min(set)));
        };
        let mut active = Vec::with_capacity(state.active.len() + 1);
        for m in &state.active {
            let trie = &self.tries[m.set as usize];
            if let Some(child) = trie.child(m.node, token) {
                if trie.is_terminal(child) {
                    note(m.set as usize);
                }
                active.push(ActiveMatch { node: child, ..*m });
            }
        }
        if self.can_open(state, token) {
            for set in self.next_possible_sets(state) {
                let trie = &self.tries[set];
                if let Some(child) = trie.child(ROOT, token) {
                    if trie.is_terminal(child) {
                        note(set);
                    }
                    active.push(ActiveMatch {
                        set: set as u16,
                        node: child,
                        start: state.position,
                    });
                }
            }
        }

        let shape = self.shape(token);
        let mut next = ConstraintState {
            completed: state.completed,
            active: Vec::new(),
            position: state.position + 1,
            prev_ends_letter: shape.is_some_and(|s| s.ends_letter),
            needs_break: false,
        };
        match completed_set {
            Some(set) => {
                next.completed |= 1 << set;
                next.needs_break = next.prev_ends_letter;
            }
            None => {
                active.sort_unstable();
                active.dedup_by_key(|m| (m.set, m.node));
                next.active = active;
            }
        }
        next
    }

    /// Tokens that would extend a partial match or open a new one.
    pub fn forced_tokens(&self, state: &ConstraintState) -> BTreeSet<TokenId> {
        let mut out = BTreeSet::new();
        for m in &state.active {
            out.extend(self.tries[m.set as usize].children(m.node));
        }
        for set in self.next_possible_sets(state) {
            out.extend(
                self.tries[set]
                    .children(ROOT)
                    .filter(|&t| self.can_open(state, t)),
            );
        }
        out
    }

    /// Runs `advance` over a whole sequence.
    pub fn run(&self, tokens: &[TokenId]) -> ConstraintState {
        tokens
            .iter()
            .fold(self.initial_state(), |s, &t| self.advance(&s, t))
    }

    /// JSON view of every trie path, decoded through `vocab`.
    pub fn dump(&self, vocab: &BpeVocabulary) -> SuiteDump {
        SuiteDump {
            mode: self.mode,
            tries: self
                .tries
                .iter()
                .map(|t| TrieDump {
                    frame: t.frame.clone(),
                    paths: t
                        .paths()
                        .into_iter()
                        .map(|(ids, lu)| PathDump {
                            text: vocab.decode(&ids).unwrap_or_default(),
                            pieces: ids
                                .iter()
                                .map(|&i| vocab.decode(&[i]).unwrap_or_default())
                                .collect(),
                            ids,
                            lu: lu.to_string(),
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SuiteDump {
    pub mode: ConstraintMode,
    pub tries: Vec<TrieDump>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TrieDump {
    pub frame: String,
    pub paths: Vec<PathDump>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PathDump {
    pub ids: Vec<TokenId>,
    pub pieces: Vec<String>,
    pub text: String,
    pub lu: String,
}

/// A partial match: `node` in trie `set`, begun at output position `start`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ActiveMatch {
    pub set: u16,
    pub node: u32,
    pub start: u32,
}

/// Constraint progress of one hypothesis. Small and cloned per hypothesis.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct ConstraintState {
    completed: u64,
    active: Vec<ActiveMatch>,
    position: u32,
    prev_ends_letter: bool,
    needs_break: bool,
}

impl ConstraintState {
    pub fn is_completed(&self, set: usize) -> bool {
        self.completed & (1 << set) != 0
    }

    pub fn satisfied_count(&self) -> usize {
        self.completed.count_ones() as usize
    }

    pub fn completed_sets(&self) -> Vec<usize> {
        (0..MAX_CONSTRAINT_SETS)
            .filter(|&i| self.is_completed(i))
            .collect()
    }

    pub fn active_matches(&self) -> &[ActiveMatch] {
        &self.active
    }

    /// The lowest-indexed set with a partial match, if any.
    pub fn global_pointer(&self) -> Option<usize> {
        self.active.iter().map(|m| m.set as usize).min()
    }

    /// Output position where the oldest partial match began.
    pub fn match_start(&self) -> Option<usize> {
        self.active.iter().map(|m| m.start as usize).min()
    }

    /// True right after a set was completed on a letter: the next token must
    /// not continue the word.
    pub fn requires_word_break(&self) -> bool {
        self.needs_break
    }
}

/// One trie per frame holding every tokenized surface form of every variant.
pub fn build_suite(
    frames: &[&Frame],
    mode: ConstraintMode,
    vocab: &BpeVocabulary,
) -> Result<ConstraintSuite, ConstraintError> {
    let restricted: Vec<(&Frame, Option<&[usize]>)> = frames.iter().map(|&f| (f, None)).collect();
    build_restricted_suite(&restricted, mode, vocab, Arc::new(vocab.token_shapes()))
}

/// Like [`build_suite`], optionally keeping only some LUs (by index) of each
/// frame.
pub fn build_restricted_suite(
    frames: &[(&Frame, Option<&[usize]>)],
    mode: ConstraintMode,
    vocab: &BpeVocabulary,
    shapes: Arc<Vec<TokenShape>>,
) -> Result<ConstraintSuite, ConstraintError> {
    let mut tries = Vec::with_capacity(frames.len());
    for &(frame, keep) in frames {
        let mut trie = ConstraintTrie::new(frame.id.clone());
        for (surface, lu_idx) in frame.surface_forms() {
            if keep.is_some_and(|k| !k.contains(&lu_idx)) {
                continue;
            }
            let label = frame.lexical_units[lu_idx].label();
            for path in vocab.tokenize_constraint(surface) {
                trie.insert(&path, &label);
            }
        }
        if trie.is_empty() {
            return Err(ConstraintError::EmptyFrame(frame.id.clone()));
        }
        tries.push(trie);
    }
    Ok(ConstraintSuite::new(tries, mode)?.with_shapes(shapes))
}
