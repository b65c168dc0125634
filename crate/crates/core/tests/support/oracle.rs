//! Brute-force reference annotator.
//!
//! Written without any of the library's text or matching code: it tokenizes
//! by walking characters, tries every pattern at every token position, then
//! picks leftmost-longest spans by repeated minimum search.

#![allow(dead_code)]

use aceterm::{Mention, Terminology};

#[derive(Debug, Clone)]
pub struct OracleToken {
    pub text: String,
    pub char_start: usize,
    pub char_end: usize,
}

fn fold(c: char) -> char {
    // single-character lowercase mapping; multi-char expansions keep the first
    c.to_lowercase().next().unwrap_or(c)
}

pub fn tokenize(text: &str) -> Vec<OracleToken> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if !chars[i].is_alphanumeric() {
            i += 1;
            continue;
        }
        let start = i;
        let mut s = String::new();
        while i < chars.len() && chars[i].is_alphanumeric() {
            s.push(fold(chars[i]));
            i += 1;
        }
        out.push(OracleToken {
            text: s,
            char_start: start,
            char_end: i,
        });
    }
    out
}

/// Every (pattern, position) hit, before overlap resolution:
/// (start token, end token exclusive, cui, pattern text).
pub fn raw_hits(t: &Terminology, tokens: &[OracleToken]) -> Vec<(usize, usize, String, String)> {
    let mut patterns: Vec<(Vec<String>, String)> = Vec::new();
    for e in t.entries.iter().filter(|e| e.status == aceterm::terminology::Status::Accepted) {
        let mut labels = vec![e.preferred_label.clone()];
        labels.extend(e.synonyms.iter().cloned());
        for l in labels {
            let toks: Vec<String> = tokenize(&l).into_iter().map(|t| t.text).collect();
            if toks.is_empty() {
                continue;
            }
            let p = (toks, e.cui.to_string());
            if !patterns.contains(&p) {
                patterns.push(p);
            }
        }
    }
    let mut hits = Vec::new();
    for (toks, cui) in &patterns {
        for start in 0..tokens.len() {
            if start + toks.len() > tokens.len() {
                break;
            }
            if (0..toks.len()).all(|k| tokens[start + k].text == toks[k]) {
                hits.push((start, start + toks.len(), cui.clone(), toks.join(" ")));
            }
        }
    }
    hits
}

fn to_mention(doc_id: &str, text: &str, tokens: &[OracleToken], h: &(usize, usize, String, String)) -> Mention {
    let cs = tokens[h.0].char_start;
    let ce = tokens[h.1 - 1].char_end;
    Mention {
        doc_id: doc_id.to_owned(),
        cui: h.2.parse().unwrap(),
        start_char: cs,
        end_char: ce,
        surface: text.chars().skip(cs).take(ce - cs).collect(),
        pattern: h.3.clone(),
    }
}

pub fn raw_mentions(t: &Terminology, doc_id: &str, text: &str) -> Vec<Mention> {
    let tokens = tokenize(text);
    raw_hits(t, &tokens)
        .iter()
        .map(|h| to_mention(doc_id, text, &tokens, h))
        .collect()
}

/// Leftmost-longest resolution; every concept on the chosen span is kept.
pub fn annotate(t: &Terminology, doc_id: &str, text: &str) -> Vec<Mention> {
    let tokens = tokenize(text);
    let hits = raw_hits(t, &tokens);
    let mut out = Vec::new();
    let mut pos = 0;
    while let Some(start) = hits.iter().filter(|h| h.0 >= pos).map(|h| h.0).min() {
        let end = hits.iter().filter(|h| h.0 == start).map(|h| h.1).max().unwrap();
        for h in hits.iter().filter(|h| h.0 == start && h.1 == end) {
            out.push(to_mention(doc_id, text, &tokens, h));
        }
        pos = end;
    }
    out
}

/// Sorted copy, for multiset comparison.
pub fn multiset(mut v: Vec<Mention>) -> Vec<Mention> {
    v.sort();
    v
}
