//! Training and evaluation examples from frame-annotated stories.
//!
//! An example masks one or more sentences with `[blank]`, then lists the
//! gold infills after `[sep]`, each optionally prefixed by frame tokens:
//!
//! ```text
//! Charles went shopping. [blank] Then he left. [sep] [Commerce_buy] [Food] He bought fruit. [sep]
//! ```

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::lexicon::{frame_token, Lexicon};
use crate::tokenizer::{BLANK, NO_FRAME, SEP};

pub const FRAME_SLOTS: usize = 5;
pub const GEOMETRIC_P: f64 = 0.4;

#[derive(Debug, thiserror::Error)]
pub enum DataprepError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("blank index {index} out of range for a story of {len} sentences")]
    BlankOutOfRange { index: usize, len: usize },
}

/// One line of the story corpus as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoryRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    pub sentences: Vec<String>,
    #[serde(default)]
    pub frames: Vec<Vec<String>>,
    /// Per sentence: (frame, start, end) character offsets of triggers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spans: Option<Vec<Vec<(String, usize, usize)>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedStory {
    pub sentences: Vec<String>,
    pub frames: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spans: Option<Vec<Vec<(String, usize, usize)>>>,
}

/// Drops the title. Records without sentences are skipped.
pub fn strip_titles(record: StoryRecord) -> Option<AnnotatedStory> {
    if record.sentences.is_empty() {
        return None;
    }
    let n = record.sentences.len();
    let mut frames = record.frames;
    frames.resize(n, Vec::new());
    Some(AnnotatedStory {
        sentences: record.sentences,
        frames,
        spans: record.spans,
    })
}

/// Parses JSON-lines stories. Frame ids are normalized to `[Name]`; ids the
/// lexicon does not know are logged and dropped.
pub fn parse_corpus(
    text: &str,
    lexicon: Option<&Lexicon>,
) -> Result<Vec<AnnotatedStory>, DataprepError> {
    let mut stories = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: StoryRecord = serde_json::from_str(line).map_err(|e| DataprepError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        if record.frames.len() > record.sentences.len() {
            return Err(DataprepError::Parse {
                line: i + 1,
                message: format!(
                    "{} frame lists for {} sentences",
                    record.frames.len(),
                    record.sentences.len()
                ),
            });
        }
        let Some(mut story) = strip_titles(record) else {
            log::warn!("line {}: story without sentences skipped", i + 1);
            continue;
        };
        for frames in story.frames.iter_mut() {
            let mut kept = Vec::with_capacity(frames.len());
            for f in frames.drain(..) {
                let id = frame_token(&f);
                match lexicon {
                    Some(lex) if lex.get(&id).is_none() => {
                        log::warn!("line {}: unknown frame {id} dropped", i + 1);
                    }
                    _ if kept.contains(&id) => {}
                    _ => kept.push(id),
                }
            }
            *frames = kept;
        }
        stories.push(story);
    }
    Ok(stories)
}

pub fn load_corpus(
    path: impl AsRef<std::path::Path>,
    lexicon: Option<&Lexicon>,
) -> std::io::Result<Vec<AnnotatedStory>> {
    let text = std::fs::read_to_string(path)?;
    parse_corpus(&text, lexicon)
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
}

/// Context through the separator: sentences joined by spaces with `[blank]`
/// in place of masked ones, then ` [sep]`.
pub fn context_text(sentences: &[Option<&str>]) -> String {
    let parts: Vec<&str> = sentences.iter().map(|s| s.unwrap_or(BLANK)).collect();
    format!("{} {SEP}", parts.join(" "))
}

/// ` [A] [B]`, or nothing without frames.
pub fn frame_prefix(frames: &[String]) -> String {
    frames.iter().map(|f| format!(" {f}")).collect()
}

/// One answer segment: frame prefix, the infill text, then ` [sep]`.
pub fn infill_segment(frames: &[String], text: &str) -> String {
    format!("{} {} {SEP}", frame_prefix(frames), text)
}

/// Pads with `[no_frame]` to exactly `slots`, truncating longer lists. The
/// flag reports truncation.
pub fn pad_frames(frames: &[String], slots: usize) -> (Vec<String>, bool) {
    let truncated = frames.len() > slots;
    let mut out: Vec<String> = frames.iter().take(slots).cloned().collect();
    out.resize(slots, NO_FRAME.to_string());
    (out, truncated)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Variant {
    /// No frames.
    Ilm,
    /// One frame of the sentence.
    S,
    /// A geometrically distributed number of the sentence's frames.
    M,
    /// All of the sentence's frames.
    A,
}

impl Variant {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_uppercase().as_str() {
            "ILM" => Some(Variant::Ilm),
            "S" => Some(Variant::S),
            "M" => Some(Variant::M),
            "A" => Some(Variant::A),
            _ => None,
        }
    }
}

/// How a listed frame order came about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OrderPolicy {
    /// No frames listed.
    None,
    /// First-trigger offsets from the annotation spans.
    Spans,
    /// Annotation file order (no spans available).
    File,
    /// Uniformly shuffled.
    Shuffled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FflExample {
    pub surface: String,
    pub variant: Variant,
    pub ordered: bool,
    pub blanks: Vec<usize>,
    /// Frame tokens per blank as they appear in `surface`.
    pub frames: Vec<Vec<String>>,
    pub infills: Vec<String>,
    pub order_policy: Vec<OrderPolicy>,
    /// Frame lists cut short by slot padding.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub truncated: Vec<usize>,
}

impl FflExample {
    fn render(&mut self, context: &[String]) {
        let masked: Vec<Option<&str>> = context
            .iter()
            .enumerate()
            .map(|(i, s)| (!self.blanks.contains(&i)).then_some(s.as_str()))
            .collect();
        let mut surface = context_text(&masked);
        for (frames, text) in self.frames.iter().zip(&self.infills) {
            surface.push_str(&infill_segment(frames, text));
        }
        self.surface = surface;
    }

    /// Puts every infill back into its blank.
    pub fn reconstruct(&self, context_with_blanks: &[Option<String>]) -> Vec<String> {
        let mut fills = self.infills.iter();
        context_with_blanks
            .iter()
            .map(|s| match s {
                Some(s) => s.clone(),
                None => fills.next().cloned().unwrap_or_default(),
            })
            .collect()
    }
}

/// Number of frames for an M example: Geometric(p) on {1, 2, ...}.
pub fn sample_frame_count(rng: &mut impl Rng, p: f64) -> usize {
    let g = Geometric::new(p).expect("p in (0, 1]");
    g.sample(rng) as usize + 1
}

/// Frames of sentence `i` in first-trigger order, with the policy used.
fn trigger_order(story: &AnnotatedStory, i: usize) -> (Vec<String>, OrderPolicy) {
    let frames = story.frames[i].clone();
    let Some(spans) = story.spans.as_ref().and_then(|s| s.get(i)) else {
        return (frames, OrderPolicy::File);
    };
    let first = |f: &String| {
        spans
            .iter()
            .filter(|(g, _, _)| frame_token(g) == *f)
            .map(|&(_, start, _)| start)
            .min()
            .unwrap_or(usize::MAX)
    };
    let mut keyed: Vec<(usize, usize, String)> = frames
        .into_iter()
        .enumerate()
        .map(|(j, f)| (first(&f), j, f))
        .collect();
    keyed.sort();
    (
        keyed.into_iter().map(|(_, _, f)| f).collect(),
        OrderPolicy::Spans,
    )
}

/// Builds one example. `None` means the variant needs frames a blank
/// sentence does not have.
pub fn make_example(
    story: &AnnotatedStory,
    blanks: &[usize],
    variant: Variant,
    ordered: bool,
    rng: &mut impl Rng,
) -> Result<Option<FflExample>, DataprepError> {
    let len = story.sentences.len();
    if let Some(&index) = blanks.iter().find(|&&b| b >= len) {
        return Err(DataprepError::BlankOutOfRange { index, len });
    }
    let mut blanks = blanks.to_vec();
    blanks.sort_unstable();
    blanks.dedup();

    let mut frames = Vec::with_capacity(blanks.len());
    let mut policies = Vec::with_capacity(blanks.len());
    for &b in &blanks {
        let (in_order, policy) = trigger_order(story, b);
        if variant != Variant::Ilm && in_order.is_empty() {
            return Ok(None);
        }
        let mut picked: Vec<usize> = match variant {
            Variant::Ilm => Vec::new(),
            Variant::S => vec![rng.random_range(0..in_order.len())],
            Variant::M => {
                let g = sample_frame_count(rng, GEOMETRIC_P).min(in_order.len());
                index::sample(rng, in_order.len(), g).into_vec()
            }
            Variant::A => (0..in_order.len()).collect(),
        };
        let policy = if picked.is_empty() {
            OrderPolicy::None
        } else if ordered {
            picked.sort_unstable();
            policy
        } else {
            picked.shuffle(rng);
            OrderPolicy::Shuffled
        };
        frames.push(picked.into_iter().map(|j| in_order[j].clone()).collect());
        policies.push(policy);
    }

    let mut ex = FflExample {
        surface: String::new(),
        variant,
        ordered,
        infills: blanks.iter().map(|&b| story.sentences[b].clone()).collect(),
        blanks,
        frames,
        order_policy: policies,
        truncated: Vec::new(),
    };
    ex.render(&story.sentences);
    Ok(Some(ex))
}

/// Pads every blank's frame list to `slots` tokens, re-rendering `surface`.
pub fn pad_frame_slots(example: &FflExample, story: &AnnotatedStory, slots: usize) -> FflExample {
    let mut ex = example.clone();
    for (i, frames) in ex.frames.iter_mut().enumerate() {
        let (padded, truncated) = pad_frames(frames, slots);
        if truncated {
            log::info!(
                "blank {}: {} frames truncated to {slots} slots",
                ex.blanks[i],
                frames.len()
            );
            ex.truncated.push(ex.blanks[i]);
        }
        *frames = padded;
    }
    ex.render(&story.sentences);
    ex
}

/// A random contiguous slice containing sentence `blank`: the length is
/// uniform over 1..=n, then the start uniform over the valid positions.
/// Returns the slice and the blank's index within it.
pub fn slice_context(
    story: &AnnotatedStory,
    blank: usize,
    rng: &mut impl Rng,
) -> (AnnotatedStory, usize) {
    let n = story.sentences.len();
    let len = rng.random_range(1..=n);
    let lo = (blank + 1).saturating_sub(len);
    let hi = blank.min(n - len);
    let start = rng.random_range(lo..=hi);
    let end = start + len;
    let sliced = AnnotatedStory {
        sentences: story.sentences[start..end].to_vec(),
        frames: story.frames[start..end].to_vec(),
        spans: story.spans.as_ref().map(|s| s[start..end].to_vec()),
    };
    (sliced, blank - start)
}

/// Which sentences get masked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlankPolicy {
    /// One uniformly chosen sentence.
    One,
    /// One example per sentence.
    Each,
    /// Every sentence.
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrepareConfig {
    pub variants: Vec<(Variant, bool)>,
    pub blanks: BlankPolicy,
    pub slice_context: bool,
    pub slots: Option<usize>,
    pub seed: u64,
}

impl Default for PrepareConfig {
    fn default() -> Self {
        PrepareConfig {
            variants: vec![(Variant::Ilm, false), (Variant::A, false)],
            blanks: BlankPolicy::One,
            slice_context: false,
            slots: None,
            seed: 0,
        }
    }
}

/// Turns a corpus into examples, in input order, from a single seeded
/// stream so the output is reproducible.
pub fn prepare(stories: &[AnnotatedStory], config: &PrepareConfig) -> Vec<FflExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut out = Vec::new();
    for story in stories {
        let n = story.sentences.len();
        let blank_sets: Vec<Vec<usize>> = match config.blanks {
            BlankPolicy::One => vec![vec![rng.random_range(0..n)]],
            BlankPolicy::Each => (0..n).map(|i| vec![i]).collect(),
            BlankPolicy::All => vec![(0..n).collect()],
        };
        for blanks in blank_sets {
            for &(variant, ordered) in &config.variants {
                let (story, blanks) = if config.slice_context && blanks.len() == 1 {
                    let (s, b) = slice_context(story, blanks[0], &mut rng);
                    (s, vec![b])
                } else {
                    (story.clone(), blanks.clone())
                };
                let Ok(Some(mut ex)) = make_example(&story, &blanks, variant, ordered, &mut rng)
                else {
                    continue;
                };
                if let Some(slots) = config.slots {
                    ex = pad_frame_slots(&ex, &story, slots);
                }
                out.push(ex);
            }
        }
    }
    out
}
