//! Frame inventory: frames, their lexical units and morphological variants,
//! plus word embeddings for lexical units.
//!
//! All matching downstream happens on lowercased text, so lemmas and variants
//! are normalized to lowercase on load.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum LexiconError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed lexicon at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid lexicon: {0}")]
    Validation(String),
    #[error("embedding file line {line}: expected {expected} components, found {found}")]
    Dimension {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("embedding file line {line}: {message}")]
    EmbeddingFormat { line: usize, message: String },
}

/// Part of speech of a lexical unit. Unrecognised tags load as `Other`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum PartOfSpeech {
    Verb,
    Noun,
    Adjective,
    Adverb,
    Preposition,
    Other,
}

impl PartOfSpeech {
    pub fn as_str(self) -> &'static str {
        match self {
            PartOfSpeech::Verb => "v",
            PartOfSpeech::Noun => "n",
            PartOfSpeech::Adjective => "a",
            PartOfSpeech::Adverb => "adv",
            PartOfSpeech::Preposition => "prep",
            PartOfSpeech::Other => "other",
        }
    }
}

impl From<String> for PartOfSpeech {
    fn from(tag: String) -> Self {
        match tag.trim().to_ascii_lowercase().as_str() {
            "v" => PartOfSpeech::Verb,
            "n" => PartOfSpeech::Noun,
            "a" | "adj" => PartOfSpeech::Adjective,
            "adv" => PartOfSpeech::Adverb,
            "prep" => PartOfSpeech::Preposition,
            _ => PartOfSpeech::Other,
        }
    }
}

impl From<PartOfSpeech> for String {
    fn from(pos: PartOfSpeech) -> Self {
        pos.as_str().to_string()
    }
}

impl fmt::Display for PartOfSpeech {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A word (or multi-word expression) that evokes a frame.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexicalUnit {
    pub lemma: String,
    pub pos: PartOfSpeech,
    /// Surface forms, always including the lemma.
    #[serde(default)]
    pub variants: BTreeSet<String>,
    /// When false, the rule-based inflector leaves the variants alone. Used
    /// for irregular forms listed explicitly in the lexicon file.
    #[serde(default = "default_true", skip_serializing_if = "is_true")]
    pub regular: bool,
}

fn default_true() -> bool {
    true
}

fn is_true(v: &bool) -> bool {
    *v
}

impl LexicalUnit {
    pub fn new(lemma: &str, pos: PartOfSpeech) -> Self {
        let lemma = normalize_surface(lemma);
        let variants = BTreeSet::from([lemma.clone()]);
        LexicalUnit {
            lemma,
            pos,
            variants,
            regular: true,
        }
    }

    /// `lemma.pos` label, as FrameNet writes it.
    pub fn label(&self) -> String {
        format!("{}.{}", self.lemma, self.pos)
    }
}

/// Lowercase, trim, and collapse internal whitespace to single spaces.
pub fn normalize_surface(s: &str) -> String {
    s.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Control-token form of a frame name: `[Name]` with spaces as underscores.
/// Already bracketed tokens come back unchanged.
pub fn frame_token(name: &str) -> String {
    format!("[{}]", frame_name(name).replace(' ', "_"))
}

/// Strip the brackets off a frame token, if present.
pub fn frame_name(token_or_name: &str) -> &str {
    let s = token_or_name.trim();
    s.strip_prefix('[')
        .and_then(|s| s.strip_suffix(']'))
        .unwrap_or(s)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub id: String,
    pub name: String,
    pub lexical_units: Vec<LexicalUnit>,
}

impl Frame {
    pub fn new(name: &str, lexical_units: Vec<LexicalUnit>) -> Self {
        Frame {
            id: frame_token(name),
            name: name.trim().to_string(),
            lexical_units,
        }
    }

    /// Maps every variant to the LU that owns it. When two LUs share a
    /// surface form the first LU keeps it.
    pub fn variant_owners(&self) -> BTreeMap<&str, usize> {
        let mut owners: BTreeMap<&str, usize> = BTreeMap::new();
        for (idx, lu) in self.lexical_units.iter().enumerate() {
            for v in &lu.variants {
                if let Some(&first) = owners.get(v.as_str()) {
                    if first != idx {
                        log::debug!(
                            "{}: variant {v:?} of {} already owned by {}",
                            self.id,
                            lu.label(),
                            self.lexical_units[first].label()
                        );
                    }
                    continue;
                }
                owners.insert(v.as_str(), idx);
            }
        }
        owners
    }

    /// Every distinct surface form of the frame, paired with its owning LU.
    pub fn surface_forms(&self) -> Vec<(&str, usize)> {
        self.variant_owners().into_iter().collect()
    }
}

#[derive(Serialize, Deserialize)]
struct LexiconFile {
    frames: Vec<FrameRecord>,
}

#[derive(Serialize, Deserialize)]
struct FrameRecord {
    name: String,
    lexical_units: Vec<LexicalUnit>,
}

/// Parses lexicon JSON. Frame order is file order.
pub fn parse_lexicon(json: &str) -> Result<Vec<Frame>, LexiconError> {
    let file: LexiconFile = serde_json::from_str(json).map_err(|e| LexiconError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let mut seen = HashSet::new();
    let mut frames = Vec::with_capacity(file.frames.len());
    for record in file.frames {
        let name = record.name.trim().to_string();
        if name.is_empty() {
            return Err(LexiconError::Validation("frame with empty name".into()));
        }
        if !seen.insert(name.clone()) {
            return Err(LexiconError::Validation(format!(
                "duplicate frame {name:?}"
            )));
        }
        if record.lexical_units.is_empty() {
            return Err(LexiconError::Validation(format!(
                "frame {name:?} has no lexical units"
            )));
        }
        let mut pairs = HashSet::new();
        let mut lus = Vec::with_capacity(record.lexical_units.len());
        for mut lu in record.lexical_units {
            lu.lemma = normalize_surface(&lu.lemma);
            if lu.lemma.is_empty() {
                return Err(LexiconError::Validation(format!(
                    "frame {name:?} has a lexical unit with an empty lemma"
                )));
            }
            if !pairs.insert((lu.lemma.clone(), lu.pos)) {
                return Err(LexiconError::Validation(format!(
                    "frame {name:?} lists {} twice",
                    lu.label()
                )));
            }
            lu.variants = lu
                .variants
                .iter()
                .map(|v| normalize_surface(v))
                .filter(|v| !v.is_empty())
                .collect();
            lus.push(expand_variants(lu));
        }
        frames.push(Frame::new(&name, lus));
    }
    Ok(frames)
}

pub fn load_lexicon(path: impl AsRef<Path>) -> Result<Vec<Frame>, LexiconError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| LexiconError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_lexicon(&text)
}

pub fn serialize_lexicon(frames: &[Frame]) -> String {
    let file = LexiconFile {
        frames: frames
            .iter()
            .map(|f| FrameRecord {
                name: f.name.clone(),
                lexical_units: f.lexical_units.clone(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&file).expect("lexicon serializes")
}

/// Looks frames up by id (`[Name]`) or bare name.
#[derive(Clone, Debug, Default)]
pub struct Lexicon {
    frames: Vec<Frame>,
    by_name: HashMap<String, usize>,
}

impl Lexicon {
    pub fn new(frames: Vec<Frame>) -> Self {
        let by_name = frames
            .iter()
            .enumerate()
            .map(|(i, f)| (f.name.clone(), i))
            .collect();
        Lexicon { frames, by_name }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LexiconError> {
        Ok(Lexicon::new(load_lexicon(path)?))
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn get(&self, id_or_name: &str) -> Option<&Frame> {
        self.by_name
            .get(frame_name(id_or_name))
            .map(|&i| &self.frames[i])
    }

    /// Case-insensitive substring search over frame names and LU lemmas.
    pub fn search(&self, query: &str) -> Vec<&Frame> {
        let q = query.trim().to_lowercase();
        self.frames
            .iter()
            .filter(|f| {
                q.is_empty()
                    || f.name.to_lowercase().contains(&q)
                    || f.lexical_units.iter().any(|lu| lu.lemma.contains(&q))
            })
            .collect()
    }
}

const VOWELS: &[u8] = b"aeiou";

fn is_vowel(c: u8) -> bool {
    VOWELS.contains(&c)
}

fn verb_forms(word: &str) -> Vec<String> {
    let b = word.as_bytes();
    let n = b.len();
    if n == 0 || !word.is_ascii() {
        return vec![];
    }
    let last = b[n - 1];
    let prev = if n >= 2 { Some(b[n - 2]) } else { None };
    if word.ends_with("ee") || word.ends_with("ye") || word.ends_with("oe") {
        return vec![format!("{word}s"), format!("{word}d"), format!("{word}ing")];
    }
    if word.ends_with("ie") {
        let stem = &word[..n - 2];
        return vec![
            format!("{word}s"),
            format!("{word}d"),
            format!("{stem}ying"),
        ];
    }
    if last == b'e' {
        let stem = &word[..n - 1];
        return vec![format!("{word}s"), format!("{word}d"), format!("{stem}ing")];
    }
    if last == b'y' && prev.is_some_and(|p| !is_vowel(p)) {
        let stem = &word[..n - 1];
        return vec![
            format!("{stem}ies"),
            format!("{stem}ied"),
            format!("{word}ing"),
        ];
    }
    if sibilant(word) {
        return vec![
            format!("{word}es"),
            format!("{word}ed"),
            format!("{word}ing"),
        ];
    }
    let stem = if doubles_final_consonant(b) {
        format!("{word}{}", last as char)
    } else {
        word.to_string()
    };
    vec![
        format!("{word}s"),
        format!("{stem}ed"),
        format!("{stem}ing"),
    ]
}

fn sibilant(word: &str) -> bool {
    ["s", "x", "z", "ch", "sh"]
        .iter()
        .any(|s| word.ends_with(s))
}

// single-syllable consonant-vowel-consonant words double the final consonant
fn doubles_final_consonant(b: &[u8]) -> bool {
    let n = b.len();
    if n < 3 {
        return false;
    }
    let (c1, v, c2) = (b[n - 3], b[n - 2], b[n - 1]);
    if is_vowel(c1) || !is_vowel(v) || is_vowel(c2) || b"wxy".contains(&c2) {
        return false;
    }
    let mut groups = 0;
    let mut in_vowel = false;
    for &c in b {
        let vowel = is_vowel(c);
        if vowel && !in_vowel {
            groups += 1;
        }
        in_vowel = vowel;
    }
    groups == 1
}

fn noun_forms(word: &str) -> Vec<String> {
    let b = word.as_bytes();
    let n = b.len();
    if n == 0 || !word.is_ascii() {
        return vec![];
    }
    if sibilant(word) {
        vec![format!("{word}es")]
    } else if b[n - 1] == b'y' && n >= 2 && !is_vowel(b[n - 2]) {
        vec![format!("{}ies", &word[..n - 1])]
    } else {
        vec![format!("{word}s")]
    }
}

/// Adds rule-based English inflections keyed on part of speech. Existing
/// variants are kept verbatim; LUs marked irregular only gain their lemma.
/// Multi-word LUs inflect their head (first) word.
pub fn expand_variants(mut lu: LexicalUnit) -> LexicalUnit {
    lu.variants.insert(lu.lemma.clone());
    if !lu.regular {
        return lu;
    }
    let (head, rest) = match lu.lemma.split_once(' ') {
        Some((h, r)) => (h, Some(r)),
        None => (lu.lemma.as_str(), None),
    };
    let forms = match lu.pos {
        PartOfSpeech::Verb => verb_forms(head),
        PartOfSpeech::Noun if rest.is_none() => noun_forms(head),
        _ => vec![],
    };
    let forms: Vec<String> = forms
        .into_iter()
        .map(|f| match rest {
            Some(r) => format!("{f} {r}"),
            None => f,
        })
        .collect();
    lu.variants.extend(forms);
    lu
}

/// Word vectors for lexical units. Multi-word entries hold the mean of their
/// covered words.
#[derive(Clone, Debug, Default)]
pub struct EmbeddingTable {
    dimension: usize,
    entries: HashMap<String, Vec<f64>>,
    unembeddable: BTreeSet<String>,
    missing_words: BTreeSet<String>,
}

impl EmbeddingTable {
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.entries
            .get(&normalize_surface(word))
            .map(Vec::as_slice)
    }

    /// Requested entries for which no word was covered by the file.
    pub fn unembeddable(&self) -> &BTreeSet<String> {
        &self.unembeddable
    }

    /// Individual words that were requested but absent from the file.
    pub fn missing_words(&self) -> &BTreeSet<String> {
        &self.missing_words
    }

    /// Builds a table from in-memory vectors, mostly for tests.
    pub fn from_vectors<I, S>(vectors: I) -> Result<Self, LexiconError>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: AsRef<str>,
    {
        let mut table = EmbeddingTable::default();
        for (i, (word, v)) in vectors.into_iter().enumerate() {
            if table.entries.is_empty() {
                table.dimension = v.len();
            } else if v.len() != table.dimension {
                return Err(LexiconError::Dimension {
                    line: i + 1,
                    expected: table.dimension,
                    found: v.len(),
                });
            }
            table.entries.insert(normalize_surface(word.as_ref()), v);
        }
        Ok(table)
    }
}

/// Parses whitespace-separated text vectors, keeping only what `vocabulary`
/// asks for.
pub fn parse_embeddings(
    text: &str,
    vocabulary: &BTreeSet<String>,
) -> Result<EmbeddingTable, LexiconError> {
    let requested: Vec<(String, Vec<String>)> = vocabulary
        .iter()
        .map(|entry| {
            let norm = normalize_surface(entry);
            let words = norm.split(' ').map(str::to_string).collect();
            (norm, words)
        })
        .filter(|(norm, _)| !norm.is_empty())
        .collect();
    let wanted: HashSet<&str> = requested
        .iter()
        .flat_map(|(_, words)| words.iter().map(String::as_str))
        .collect();

    let mut dimension = None;
    let mut words: HashMap<String, Vec<f64>> = HashMap::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let mut parts = line.split_whitespace();
        let Some(word) = parts.next() else { continue };
        let values = parts
            .map(|p| p.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| LexiconError::EmbeddingFormat {
                line: lineno,
                message: e.to_string(),
            })?;
        if values.is_empty() {
            return Err(LexiconError::EmbeddingFormat {
                line: lineno,
                message: format!("word {word:?} has no vector"),
            });
        }
        match dimension {
            None => dimension = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(LexiconError::Dimension {
                    line: lineno,
                    expected: d,
                    found: values.len(),
                })
            }
            _ => {}
        }
        let word = word.to_lowercase();
        if wanted.contains(word.as_str()) {
            words.entry(word).or_insert(values);
        }
    }

    let dimension = dimension.unwrap_or(0);
    let mut table = EmbeddingTable {
        dimension,
        ..Default::default()
    };
    for (entry, parts) in requested {
        let covered: Vec<&Vec<f64>> = parts.iter().filter_map(|w| words.get(w)).collect();
        for w in &parts {
            if !words.contains_key(w) {
                table.missing_words.insert(w.clone());
            }
        }
        if covered.is_empty() {
            table.unembeddable.insert(entry);
            continue;
        }
        let mut mean = vec![0.0; dimension];
        for v in &covered {
            for (m, x) in mean.iter_mut().zip(v.iter()) {
                *m += x;
            }
        }
        let n = covered.len() as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        table.entries.insert(entry, mean);
    }
    Ok(table)
}

pub fn load_embeddings(
    path: impl AsRef<Path>,
    vocabulary: &BTreeSet<String>,
) -> Result<EmbeddingTable, LexiconError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| LexiconError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_embeddings(&text, vocabulary)
}

/// Lemmas of every LU in `frames`, the usual embedding vocabulary.
pub fn lemma_vocabulary<'a>(frames: impl IntoIterator<Item = &'a Frame>) -> BTreeSet<String> {
    frames
        .into_iter()
        .flat_map(|f| f.lexical_units.iter().map(|lu| lu.lemma.clone()))
        .collect()
}
