use std::collections::{BTreeMap, HashMap};

use super::{bytes_to_unicode, pre_tokenize, TokenId};

/// Minimal byte-level BPE trainer for building small fixture vocabularies.
///
/// Returns the token table (256 byte symbols first, then merged tokens in
/// merge order) and the merge list. Ties between equally frequent pairs go to
/// the lexicographically smallest pair.
pub fn train_bpe<'a>(
    texts: impl Iterator<Item = &'a str>,
    num_merges: usize,
    min_frequency: u64,
) -> (HashMap<String, TokenId>, Vec<(String, String)>) {
    let byte_encoder = bytes_to_unicode();
    let mut words: BTreeMap<Vec<String>, u64> = BTreeMap::new();
    for text in texts {
        for chunk in pre_tokenize(text) {
            let symbols = chunk
                .bytes()
                .map(|b| byte_encoder[b as usize].to_string())
                .collect();
            *words.entry(symbols).or_default() += 1;
        }
    }
    let mut words: Vec<(Vec<String>, u64)> = words.into_iter().collect();

    let mut vocab: HashMap<String, TokenId> = HashMap::new();
    for (i, c) in byte_encoder.iter().enumerate() {
        vocab.insert(c.to_string(), i as TokenId);
    }
    let mut merges = Vec::new();
    while merges.len() < num_merges {
        let mut pairs: BTreeMap<(&str, &str), u64> = BTreeMap::new();
        for (symbols, count) in &words {
            for w in symbols.windows(2) {
                *pairs.entry((w[0].as_str(), w[1].as_str())).or_default() += count;
            }
        }
        // BTreeMap iterates pairs in lexicographic order; keep the first max
        let mut best: Option<((&str, &str), u64)> = None;
        for (pair, count) in pairs {
            if best.is_none_or(|(_, c)| count > c) {
                best = Some((pair, count));
            }
        }
        let Some(((a, b), count)) = best else { break };
        if count < min_frequency {
            break;
        }
        let (a, b) = (a.to_string(), b.to_string());
        let merged = format!("{a}{b}");
        for (symbols, _) in words.iter_mut() {
            let mut out = Vec::with_capacity(symbols.len());
            let mut i = 0;
            while i < symbols.len() {
                if i + 1 < symbols.len() && symbols[i] == a && symbols[i + 1] == b {
                    out.push(merged.clone());
                    i += 2;
                } else {
                    out.push(std::mem::take(&mut symbols[i]));
                    i += 1;
                }
            }
            *symbols = out;
        }
        let next = vocab.len() as TokenId;
        vocab.entry(merged).or_insert(next);
        merges.push((a, b));
    }
    (vocab, merges)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn learns_frequent_pairs_deterministically() {
        let texts = ["low lower lowest", "low low"];
        let (v1, m1) = train_bpe(texts.iter().copied(), 10, 2);
        let (v2, m2) = train_bpe(texts.iter().copied(), 10, 2);
        assert_eq!(m1, m2);
        assert_eq!(v1, v2);
        assert_eq!(m1[0], ("l".to_string(), "o".to_string()));
        assert!(v1.contains_key("Ġlow"));
        assert_eq!(v1.len(), 256 + m1.len());
    }
}
