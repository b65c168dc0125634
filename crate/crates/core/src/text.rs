//! Surface-string normalization and token splitting shared by the lexicon
//! matcher and the annotator.
//!
//! Both sides must agree exactly: a pattern compiled from a label is the
//! token sequence `normalize(label).split(' ')`, and a document token is the
//! per-character lowercase of a maximal alphanumeric run. [`lower_char`] is
//! the single place where case folding happens.

/// Simple (one-to-one) lowercase mapping of a single character.
///
/// `char::to_lowercase` performs the full mapping, which expands `İ` into two
/// characters; the first character of that expansion is the simple mapping.
#[inline]
pub fn lower_char(c: char) -> char {
    if c.is_ascii() {
        return c.to_ascii_lowercase();
    }
    c.to_lowercase().next().unwrap_or(c)
}

#[inline]
pub fn is_token_char(c: char) -> bool {
    c.is_alphanumeric()
}

/// Lowercase, turn every non-alphanumeric character into a separator, collapse
/// separator runs to one space and trim.
///
/// ```
/// use aceterm::text::normalize;
/// assert_eq!(normalize("household-composition  (ACE)"), "household composition ace");
/// ```
pub fn normalize(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut pending_space = false;
    for c in text.chars() {
        if is_token_char(c) {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.push(lower_char(c));
        } else {
            pending_space = true;
        }
    }
    out
}

/// Normalized tokens of `text`, in order.
pub fn normalized_tokens(text: &str) -> Vec<String> {
    normalize(text)
        .split(' ')
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

/// A token of the original text with both byte and character offsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TokenSpan {
    pub byte_start: usize,
    pub byte_end: usize,
    pub char_start: usize,
    pub char_end: usize,
}

/// Walks the maximal alphanumeric runs of `text`.
///
/// For each run the callback receives its span and the run's normalized form,
/// written into a scratch buffer that is reused between calls.
pub fn for_each_token<F>(text: &str, mut f: F)
where
    F: FnMut(TokenSpan, &str),
{
    let mut buf = String::new();
    let mut in_token = false;
    let mut span = TokenSpan {
        byte_start: 0,
        byte_end: 0,
        char_start: 0,
        char_end: 0,
    };
    let mut char_idx = 0usize;
    for (byte_idx, c) in text.char_indices() {
        if is_token_char(c) {
            if !in_token {
                in_token = true;
                buf.clear();
                span.byte_start = byte_idx;
                span.char_start = char_idx;
            }
            buf.push(lower_char(c));
        } else if in_token {
            in_token = false;
            span.byte_end = byte_idx;
            span.char_end = char_idx;
            f(span, &buf);
        }
        char_idx += 1;
    }
    if in_token {
        span.byte_end = text.len();
        span.char_end = char_idx;
        f(span, &buf);
    }
}
