//! Byte-level BPE compatible with the GPT-2 vocabulary format.
//!
//! Special tokens (`[sep]`, `[blank]`, frame ids, ...) live in a reserved id
//! range above the BPE vocabulary and pass through `encode` as single ids.

mod pretokenize;
mod train;

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use aho_corasick::{AhoCorasick, MatchKind};
use serde::Serialize;

pub use pretokenize::{is_letter, pre_tokenize};
pub use train::train_bpe;

pub type TokenId = u32;

pub const BLANK: &str = "[blank]";
pub const SEP: &str = "[sep]";
pub const EOS: &str = "[eos]";
pub const NO_FRAME: &str = "[no_frame]";

/// Special tokens every vocabulary carries.
pub const RESERVED_SPECIALS: [&str; 4] = [BLANK, SEP, EOS, NO_FRAME];

#[derive(Debug, thiserror::Error)]
pub enum TokenizerError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed {file}: {message}")]
    Format { file: &'static str, message: String },
    #[error("unknown token id {0}")]
    UnknownId(TokenId),
    #[error("special token {name:?} id {id} collides with a BPE token")]
    SpecialCollision { name: String, id: TokenId },
}

fn read(path: &Path) -> Result<String, TokenizerError> {
    fs::read_to_string(path).map_err(|source| TokenizerError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// The GPT-2 reversible byte to printable-character table.
pub fn bytes_to_unicode() -> [char; 256] {
    let mut printable: Vec<u32> = (b'!' as u32..=b'~' as u32)
        .chain(0xA1..=0xAC)
        .chain(0xAE..=0xFF)
        .collect();
    let mut chars: Vec<u32> = printable.clone();
    let mut extra = 0;
    for b in 0..256u32 {
        if !printable.contains(&b) {
            printable.push(b);
            chars.push(256 + extra);
            extra += 1;
        }
    }
    let mut table = ['\0'; 256];
    for (b, c) in printable.into_iter().zip(chars) {
        table[b as usize] = char::from_u32(c).expect("valid scalar");
    }
    table
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct TokenShape {
    /// Decoded text begins with a letter.
    pub starts_letter: bool,
    /// Decoded text ends with a letter.
    pub ends_letter: bool,
}

#[derive(Clone, Debug)]
pub struct BpeVocabulary {
    token_to_id: HashMap<String, TokenId>,
    id_to_token: HashMap<TokenId, String>,
    // (left, right) -> (rank, merged)
    merge_ranks: HashMap<(TokenId, TokenId), (usize, TokenId)>,
    byte_ids: [TokenId; 256],
    byte_decoder: HashMap<char, u8>,
    specials: BTreeMap<String, TokenId>,
    special_by_id: HashMap<TokenId, String>,
    special_matcher: Option<AhoCorasick>,
    special_patterns: Vec<String>,
    size: usize,
}

impl BpeVocabulary {
    /// Builds a vocabulary from a token table and ordered merges. Reserved
    /// specials missing from `specials` are appended after the largest id.
    pub fn new(
        token_to_id: HashMap<String, TokenId>,
        merges: Vec<(String, String)>,
        specials: BTreeMap<String, TokenId>,
    ) -> Result<Self, TokenizerError> {
        let byte_encoder = bytes_to_unicode();
        let byte_decoder = byte_encoder
            .iter()
            .enumerate()
            .map(|(b, &c)| (c, b as u8))
            .collect();
        let mut id_to_token = HashMap::with_capacity(token_to_id.len());
        for (tok, &id) in &token_to_id {
            if let Some(prev) = id_to_token.insert(id, tok.clone()) {
                return Err(TokenizerError::Format {
                    file: "vocab.json",
                    message: format!("id {id} assigned to both {prev:?} and {tok:?}"),
                });
            }
        }
        let mut byte_ids = [0; 256];
        for (b, c) in byte_encoder.iter().enumerate() {
            match token_to_id.get(&c.to_string()) {
                Some(&id) => byte_ids[b] = id,
                None => {
                    return Err(TokenizerError::Format {
                        file: "vocab.json",
                        message: format!("byte symbol {c:?} missing from vocabulary"),
                    })
                }
            }
        }
        let mut merge_ranks = HashMap::with_capacity(merges.len());
        for (rank, (a, b)) in merges.into_iter().enumerate() {
            let lookup = |t: &str| {
                token_to_id
                    .get(t)
                    .copied()
                    .ok_or_else(|| TokenizerError::Format {
                        file: "merges.txt",
                        message: format!("merge {a:?} {b:?} uses a token missing from vocab"),
                    })
            };
            let key = (lookup(&a)?, lookup(&b)?);
            let merged = lookup(&format!("{a}{b}"))?;
            merge_ranks.entry(key).or_insert((rank, merged));
        }

        let mut vocab = BpeVocabulary {
            token_to_id,
            id_to_token,
            merge_ranks,
            byte_ids,
            byte_decoder,
            specials: BTreeMap::new(),
            special_by_id: HashMap::new(),
            special_matcher: None,
            special_patterns: Vec::new(),
            size: 0,
        };
        for (name, id) in specials {
            if vocab.id_to_token.contains_key(&id) {
                return Err(TokenizerError::SpecialCollision { name, id });
            }
            if let Some(other) = vocab.special_by_id.get(&id) {
                return Err(TokenizerError::Format {
                    file: "specials.json",
                    message: format!("id {id} assigned to both {other:?} and {name:?}"),
                });
            }
            vocab.special_by_id.insert(id, name.clone());
            vocab.specials.insert(name, id);
        }
        vocab.add_specials(RESERVED_SPECIALS.iter().copied());
        Ok(vocab)
    }

    /// Loads `vocab.json` + `merges.txt` (+ optional specials sidecar).
    pub fn from_files(
        vocab_path: impl AsRef<Path>,
        merges_path: impl AsRef<Path>,
        specials_path: Option<&Path>,
    ) -> Result<Self, TokenizerError> {
        let vocab_json = read(vocab_path.as_ref())?;
        let merges_txt = read(merges_path.as_ref())?;
        let specials_json = specials_path.map(read).transpose()?;
        Self::from_strs(&vocab_json, &merges_txt, specials_json.as_deref())
    }

    pub fn from_strs(
        vocab_json: &str,
        merges_txt: &str,
        specials_json: Option<&str>,
    ) -> Result<Self, TokenizerError> {
        let token_to_id: HashMap<String, TokenId> =
            serde_json::from_str(vocab_json).map_err(|e| TokenizerError::Format {
                file: "vocab.json",
                message: e.to_string(),
            })?;
        let merges = parse_merges(merges_txt)?;
        let specials = match specials_json {
            Some(s) => serde_json::from_str(s).map_err(|e| TokenizerError::Format {
                file: "specials.json",
                message: e.to_string(),
            })?,
            None => BTreeMap::new(),
        };
        Self::new(token_to_id, merges, specials)
    }

    /// Adds special tokens that are not yet known, at fresh ids.
    pub fn add_specials<'a>(&mut self, names: impl IntoIterator<Item = &'a str>) {
        for name in names {
            if self.specials.contains_key(name) {
                continue;
            }
            let id = self.next_free_id();
            self.special_by_id.insert(id, name.to_string());
            self.specials.insert(name.to_string(), id);
        }
        self.rebuild_special_matcher();
    }

    fn next_free_id(&self) -> TokenId {
        let max_bpe = self.id_to_token.keys().max().copied();
        let max_special = self.special_by_id.keys().max().copied();
        match max_bpe.max(max_special) {
            Some(m) => m + 1,
            None => 0,
        }
    }

    fn rebuild_special_matcher(&mut self) {
        self.special_patterns = self.specials.keys().cloned().collect();
        self.special_matcher = if self.special_patterns.is_empty() {
            None
        } else {
            Some(
                AhoCorasick::builder()
                    .match_kind(MatchKind::LeftmostLongest)
                    .build(&self.special_patterns)
                    .expect("special token automaton"),
            )
        };
        self.size = self.next_free_id() as usize;
    }

    /// One past the largest id; scorers produce vectors of this length.
    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    pub fn bpe_len(&self) -> usize {
        self.token_to_id.len()
    }

    pub fn special_id(&self, name: &str) -> Option<TokenId> {
        self.specials.get(name).copied()
    }

    pub fn special_name(&self, id: TokenId) -> Option<&str> {
        self.special_by_id.get(&id).map(String::as_str)
    }

    pub fn is_special(&self, id: TokenId) -> bool {
        self.special_by_id.contains_key(&id)
    }

    pub fn specials(&self) -> &BTreeMap<String, TokenId> {
        &self.specials
    }

    pub fn sep(&self) -> TokenId {
        self.specials[SEP]
    }

    pub fn eos(&self) -> TokenId {
        self.specials[EOS]
    }

    pub fn blank(&self) -> TokenId {
        self.specials[BLANK]
    }

    pub fn no_frame(&self) -> TokenId {
        self.specials[NO_FRAME]
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.id_to_token
            .get(&id)
            .or_else(|| self.special_by_id.get(&id))
            .map(String::as_str)
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.token_to_id.get(token).copied()
    }

    /// Text with special-token literals emitted as their ids and everything
    /// else byte-level BPE encoded.
    pub fn encode(&self, text: &str) -> Vec<TokenId> {
        let mut ids = Vec::new();
        let mut last = 0;
        if let Some(matcher) = &self.special_matcher {
            for m in matcher.find_iter(text) {
                self.encode_ordinary_into(&text[last..m.start()], &mut ids);
                ids.push(self.specials[&self.special_patterns[m.pattern().as_usize()]]);
                last = m.end();
            }
        }
        self.encode_ordinary_into(&text[last..], &mut ids);
        ids
    }

    /// BPE-encodes `text` without special-token recognition.
    pub fn encode_ordinary(&self, text: &str) -> Vec<TokenId> {
        let mut ids = Vec::new();
        self.encode_ordinary_into(text, &mut ids);
        ids
    }

    fn encode_ordinary_into(&self, text: &str, ids: &mut Vec<TokenId>) {
        for chunk in pre_tokenize(text) {
            let symbols: Vec<TokenId> = chunk.bytes().map(|b| self.byte_ids[b as usize]).collect();
            ids.extend(self.merge(symbols));
        }
    }

    /// Repeatedly applies the lowest-ranked merge present in `symbols`.
    fn merge(&self, mut symbols: Vec<TokenId>) -> Vec<TokenId> {
        while symbols.len() > 1 {
            let best = symbols
                .windows(2)
                .filter_map(|w| self.merge_ranks.get(&(w[0], w[1])))
                .min();
            let Some(&(rank, _)) = best else { break };
            let mut merged = Vec::with_capacity(symbols.len());
            let mut i = 0;
            while i < symbols.len() {
                match self
                    .merge_ranks
                    .get(&(symbols[i], *symbols.get(i + 1).unwrap_or(&TokenId::MAX)))
                {
                    Some(&(r, to)) if r == rank => {
                        merged.push(to);
                        i += 2;
                    }
                    _ => {
                        merged.push(symbols[i]);
                        i += 1;
                    }
                }
            }
            symbols = merged;
        }
        symbols
    }

    /// Raw bytes of the decoded ids.
    pub fn decode_bytes(&self, ids: &[TokenId]) -> Result<Vec<u8>, TokenizerError> {
        let mut out = Vec::new();
        for &id in ids {
            if let Some(tok) = self.id_to_token.get(&id) {
                for c in tok.chars() {
                    match self.byte_decoder.get(&c) {
                        Some(&b) => out.push(b),
                        None => out.extend_from_slice(c.to_string().as_bytes()),
                    }
                }
            } else if let Some(name) = self.special_by_id.get(&id) {
                out.extend_from_slice(name.as_bytes());
            } else {
                return Err(TokenizerError::UnknownId(id));
            }
        }
        Ok(out)
    }

    /// Decodes ids to text. Byte sequences that are not valid UTF-8 (a
    /// multi-byte character split across an incomplete id list) are replaced
    /// with U+FFFD.
    pub fn decode(&self, ids: &[TokenId]) -> Result<String, TokenizerError> {
        let bytes = self.decode_bytes(ids)?;
        Ok(match String::from_utf8(bytes) {
            Ok(s) => s,
            Err(e) => String::from_utf8_lossy(e.as_bytes()).into_owned(),
        })
    }

    /// Token-id spellings under which `surface` may appear mid-sentence:
    /// with and without a leading space, lowercase and capitalized.
    pub fn tokenize_constraint(&self, surface: &str) -> Vec<Vec<TokenId>> {
        let surface = surface.trim();
        if surface.is_empty() {
            return vec![];
        }
        let capitalized = capitalize(surface);
        let forms = [
            format!(" {surface}"),
            surface.to_string(),
            format!(" {capitalized}"),
            capitalized,
        ];
        let mut out: Vec<Vec<TokenId>> = Vec::with_capacity(4);
        for form in forms {
            let ids = self.encode_ordinary(&form);
            if !out.contains(&ids) {
                out.push(ids);
            }
        }
        out
    }

    /// Letter-boundary shape of every id, indexed by id.
    pub fn token_shapes(&self) -> Vec<TokenShape> {
        let mut shapes = vec![TokenShape::default(); self.len()];
        for &id in self.id_to_token.keys() {
            let bytes = self.decode_bytes(&[id]).expect("known id");
            let text = String::from_utf8_lossy(&bytes);
            shapes[id as usize] = TokenShape {
                starts_letter: text.chars().next().is_some_and(is_letter),
                ends_letter: text.chars().last().is_some_and(is_letter),
            };
        }
        shapes
    }

    /// Serializes the BPE table as `vocab.json` content.
    pub fn vocab_json(&self) -> String {
        let ordered: BTreeMap<TokenId, &String> =
            self.id_to_token.iter().map(|(id, t)| (*id, t)).collect();
        let mut map = serde_json::Map::new();
        for (id, tok) in ordered {
            map.insert(tok.clone(), id.into());
        }
        serde_json::to_string(&map).expect("vocab serializes")
    }

    pub fn specials_json(&self) -> String {
        serde_json::to_string_pretty(&self.specials).expect("specials serialize")
    }
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

fn parse_merges(text: &str) -> Result<Vec<(String, String)>, TokenizerError> {
    let mut merges = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.starts_with("#version") || line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(' ');
        match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(b), None) if !a.is_empty() && !b.is_empty() => {
                merges.push((a.to_string(), b.to_string()))
            }
            _ => {
                return Err(TokenizerError::Format {
                    file: "merges.txt",
                    message: format!("line {}: expected two symbols", i + 1),
                })
            }
        }
    }
    Ok(merges)
}

/// Renders merges in `merges.txt` format.
pub fn merges_txt(merges: &[(String, String)]) -> String {
    let mut out = String::from("#version: 0.2\n");
    for (a, b) in merges {
        out.push_str(a);
        out.push(' ');
        out.push_str(b);
        out.push('\n');
    }
    out
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// A tiny vocabulary trained on a handful of sentences.
    pub(crate) fn toy_vocab() -> BpeVocabulary {
        let corpus = [
            "He bought fruit. Then he left.",
            "She baked bread and he bought cheese.",
            "They broil fish and bake cakes in cahoots.",
        ];
        let (tokens, merges) = train_bpe(corpus.iter().copied(), 60, 1);
        BpeVocabulary::new(tokens, merges, BTreeMap::new()).unwrap()
    }

    #[test]
    fn byte_table_is_a_bijection() {
        let table = bytes_to_unicode();
        let set: std::collections::HashSet<char> = table.iter().copied().collect();
        assert_eq!(set.len(), 256);
        assert_eq!(table[b'A' as usize], 'A');
        assert_eq!(table[b' ' as usize], 'Ġ');
        assert_eq!(table[b'\n' as usize], 'Ċ');
    }

    #[test]
    fn empty_and_special_passthrough() {
        let v = toy_vocab();
        assert!(v.encode("").is_empty());
        assert_eq!(v.decode(&[]).unwrap(), "");
        assert_eq!(v.encode("[sep]"), vec![v.sep()]);
        let ids = v.encode("a [blank] b [sep]");
        assert!(ids.contains(&v.blank()));
        assert_eq!(v.decode(&ids).unwrap(), "a [blank] b [sep]");
    }

    #[test]
    fn roundtrip_sentence() {
        let v = toy_vocab();
        let ids = v.encode("He bought fruit.");
        assert_eq!(v.decode(&ids).unwrap(), "He bought fruit.");
    }

    #[test]
    fn unknown_id_is_reported() {
        let v = toy_vocab();
        let bad = v.len() as TokenId + 7;
        match v.decode(&[bad]) {
            Err(TokenizerError::UnknownId(id)) => assert_eq!(id, bad),
            other => panic!("expected unknown id, got {other:?}"),
        }
    }

    #[test]
    fn constraint_forms() {
        let v = toy_vocab();
        let forms = v.tokenize_constraint("bake");
        let texts: Vec<String> = forms.iter().map(|f| v.decode(f).unwrap()).collect();
        assert_eq!(texts, [" bake", "bake", " Bake", "Bake"]);
        assert!(v.tokenize_constraint("").is_empty());
        let multi = v.tokenize_constraint("in cahoots");
        assert_eq!(v.decode(&multi[0]).unwrap(), " in cahoots");
        assert!(multi[0].len() >= 2);
    }

    #[test]
    fn special_collision_rejected() {
        let (tokens, merges) = train_bpe(["abc"].into_iter(), 5, 1);
        let mut specials = BTreeMap::new();
        specials.insert("[sep]".to_string(), 0);
        assert!(matches!(
            BpeVocabulary::new(tokens, merges, specials),
            Err(TokenizerError::SpecialCollision { .. })
        ));
    }

    #[test]
    fn shapes() {
        let v = toy_vocab();
        let shapes = v.token_shapes();
        let space = v.encode(" ")[0] as usize;
        assert!(!shapes[space].starts_letter);
        let a = v.encode("a")[0] as usize;
        assert!(shapes[a].starts_letter && shapes[a].ends_letter);
        assert!(!shapes[v.sep() as usize].starts_letter);
    }
}
