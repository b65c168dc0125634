//! Dictionary-based mention identification.
//!
//! A [`CompiledMatcher`] holds every accepted label and synonym of a
//! terminology as a sequence of normalized tokens. Documents are split into
//! maximal alphanumeric runs, each run is lowercased, and the token stream is
//! fed through an Aho-Corasick automaton keyed on token ids. Matches are
//! therefore case-insensitive and always start and end on token boundaries.
//!
//! Overlapping matches are resolved leftmost-longest: scanning left to right,
//! the earliest-starting match wins and, among those, the longest. Every
//! concept matching that exact span is kept, so an ambiguous surface form
//! yields one mention per CUI.

mod automaton;
mod corpus;

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Document;
use crate::cui::Cui;
use crate::terminology::Terminology;
use crate::text::{for_each_token, normalized_tokens, TokenSpan};

use automaton::{TokenAutomaton, ROOT};
pub use corpus::{annotate_corpus, annotate_stream, CorpusAnnotation, DocumentMentions, StreamSummary};

#[derive(Debug, Error)]
pub enum AnnotateError {
    #[error("terminology {0:?} has no accepted entry with a usable label")]
    EmptyTerminology(String),
}

/// One concept occurrence. Offsets are 0-based character (not byte) offsets
/// into the document text, end exclusive.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Mention {
    pub doc_id: String,
    pub cui: Cui,
    #[serde(rename = "start")]
    pub start_char: usize,
    #[serde(rename = "end")]
    pub end_char: usize,
    pub surface: String,
    pub pattern: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern {
    /// Normalized form, tokens joined by single spaces.
    pub text: String,
    pub cui: Cui,
    /// The terminology label this pattern came from.
    pub source_label: String,
    tokens: Vec<u32>,
}

/// Immutable multi-pattern matcher for one terminology.
#[derive(Debug, Clone)]
pub struct CompiledMatcher {
    terminology_name: String,
    vocab: HashMap<Box<str>, u32>,
    patterns: Vec<Pattern>,
    automaton: TokenAutomaton,
}

/// Raw (pre-resolution) match in token coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct TokenMatch {
    start: u32,
    end: u32,
    pattern: u32,
}

impl CompiledMatcher {
    /// Compile the accepted entries of `t`. Candidate and rejected entries
    /// contribute nothing.
    pub fn compile(t: &Terminology) -> Result<Self, AnnotateError> {
        let mut vocab: HashMap<Box<str>, u32> = HashMap::new();
        let mut patterns = Vec::new();
        let mut seen: HashSet<(String, Cui)> = HashSet::new();
        for entry in t.accepted() {
            for label in entry.labels() {
                let toks = normalized_tokens(label);
                if toks.is_empty() {
                    continue;
                }
                let text = toks.join(" ");
                if !seen.insert((text.clone(), entry.cui.clone())) {
                    continue;
                }
                let ids = toks
                    .into_iter()
                    .map(|tok| {
                        let next = vocab.len() as u32;
                        *vocab.entry(tok.into_boxed_str()).or_insert(next)
                    })
                    .collect();
                patterns.push(Pattern {
                    text,
                    cui: entry.cui.clone(),
                    source_label: label.to_owned(),
                    tokens: ids,
                });
            }
        }
        if patterns.is_empty() {
            return Err(AnnotateError::EmptyTerminology(t.name.clone()));
        }
        let seqs: Vec<Vec<u32>> = patterns.iter().map(|p| p.tokens.clone()).collect();
        let automaton = TokenAutomaton::build(&seqs, vocab.len());
        Ok(CompiledMatcher {
            terminology_name: t.name.clone(),
            vocab,
            patterns,
            automaton,
        })
    }

    pub fn terminology_name(&self) -> &str {
        &self.terminology_name
    }

    pub fn patterns(&self) -> &[Pattern] {
        &self.patterns
    }

    pub fn pattern_count(&self) -> usize {
        self.patterns.len()
    }

    pub fn state_count(&self) -> usize {
        self.automaton.state_count()
    }

    fn scan(&self, text: &str, spans: &mut Vec<TokenSpan>, out: &mut Vec<TokenMatch>) {
        let mut state = ROOT;
        for_each_token(text, |span, tok| {
            let i = spans.len() as u32;
            spans.push(span);
            let id = self.vocab.get(tok).copied();
            state = self.automaton.step(state, id);
            if state != ROOT {
                self.automaton.for_each_output(state, |p, len| {
                    out.push(TokenMatch {
                        start: i + 1 - len,
                        end: i + 1,
                        pattern: p,
                    });
                });
            }
        });
    }

    fn to_mention(&self, doc_id: &str, text: &str, spans: &[TokenSpan], m: &TokenMatch) -> Mention {
        let first = spans[m.start as usize];
        let last = spans[m.end as usize - 1];
        let pattern = &self.patterns[m.pattern as usize];
        Mention {
            doc_id: doc_id.to_owned(),
            cui: pattern.cui.clone(),
            start_char: first.char_start,
            end_char: last.char_end,
            surface: text[first.byte_start..last.byte_end].to_owned(),
            pattern: pattern.text.clone(),
        }
    }

    /// Every pattern occurrence before overlap resolution, sorted by
    /// (start, end, cui).
    pub fn raw_matches(&self, doc_id: &str, text: &str) -> Vec<Mention> {
        let mut spans = Vec::new();
        let mut raw = Vec::new();
        self.scan(text, &mut spans, &mut raw);
        let mut out: Vec<Mention> = raw
            .iter()
            .map(|m| self.to_mention(doc_id, text, &spans, m))
            .collect();
        out.sort_by(|a, b| {
            (a.start_char, a.end_char, &a.cui).cmp(&(b.start_char, b.end_char, &b.cui))
        });
        out
    }

    /// Resolved mentions in (start_char, cui) order.
    pub fn annotate_text(&self, doc_id: &str, text: &str) -> Vec<Mention> {
        let mut spans = Vec::new();
        let mut raw = Vec::new();
        self.scan(text, &mut spans, &mut raw);
        if raw.is_empty() {
            return Vec::new();
        }
        // start asc, longest first, then cui so equal spans come out in cui order
        raw.sort_by(|a, b| {
            a.start
                .cmp(&b.start)
                .then(b.end.cmp(&a.end))
                .then_with(|| self.patterns[a.pattern as usize].cui.cmp(&self.patterns[b.pattern as usize].cui))
        });
        let mut out = Vec::new();
        let mut frontier = 0u32;
        let mut current: Option<(u32, u32)> = None;
        for m in &raw {
            let keep = if current == Some((m.start, m.end)) {
                true
            } else if m.start >= frontier {
                current = Some((m.start, m.end));
                frontier = m.end;
                true
            } else {
                false
            };
            if keep {
                out.push(self.to_mention(doc_id, text, &spans, m));
            }
        }
        out
    }

    pub fn annotate(&self, doc: &Document) -> Vec<Mention> {
        self.annotate_text(&doc.id, &doc.text)
    }
}

pub fn compile_matcher(t: &Terminology) -> Result<CompiledMatcher, AnnotateError> {
    CompiledMatcher::compile(t)
}

pub fn annotate_document(doc: &Document, m: &CompiledMatcher) -> Vec<Mention> {
    m.annotate(doc)
}
