//! GPT-2 style pre-tokenization.
//!
//! Equivalent to the pattern
//! `'s|'t|'re|'ve|'m|'ll|'d| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+(?!\S)|\s+`
//! written out by hand, since the `regex` crate has no look-ahead.
//! "Letter" uses `char::is_alphabetic`, which differs from `\p{L}` only on a
//! handful of combining marks.

pub fn is_letter(c: char) -> bool {
    c.is_alphabetic()
}

fn is_number(c: char) -> bool {
    c.is_numeric()
}

fn is_other(c: char) -> bool {
    !c.is_whitespace() && !is_letter(c) && !is_number(c)
}

/// Splits `text` into the chunks BPE merges are applied within.
pub fn pre_tokenize(text: &str) -> Vec<&str> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let n = chars.len();
    let offset = |i: usize| if i < n { chars[i].0 } else { text.len() };
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        let end = chunk_end(&chars, i);
        out.push(&text[offset(i)..offset(end)]);
        i = end;
    }
    out
}

fn run(chars: &[(usize, char)], mut i: usize, class: fn(char) -> bool) -> usize {
    while i < chars.len() && class(chars[i].1) {
        i += 1;
    }
    i
}

fn chunk_end(chars: &[(usize, char)], i: usize) -> usize {
    let n = chars.len();
    let c = chars[i].1;
    let next = chars.get(i + 1).map(|&(_, c)| c);

    if c == '\'' {
        let after = chars.get(i + 2).map(|&(_, c)| c);
        match (next, after) {
            (Some('r'), Some('e')) | (Some('v'), Some('e')) | (Some('l'), Some('l')) => {
                return i + 3
            }
            (Some('s' | 't' | 'm' | 'd'), _) => return i + 2,
            _ => {}
        }
    }

    let (start, lead) = if c == ' ' {
        match next {
            Some(nc) if !nc.is_whitespace() => (i + 1, nc),
            _ => (i, c),
        }
    } else {
        (i, c)
    };
    if is_letter(lead) {
        return run(chars, start, is_letter);
    }
    if is_number(lead) {
        return run(chars, start, is_number);
    }
    if is_other(lead) {
        return run(chars, start, is_other);
    }

    // whitespace: \s+(?!\S) then \s+
    let end = run(chars, i, char::is_whitespace);
    if end == n || end - i == 1 {
        end
    } else {
        end - 1
    }
}
