//! UMLS-style lexicon loaded from a flat TSV file, and candidate ranking for
//! ontology leaf labels.
//!
//! File format, one entry per line, UTF-8, `#` starts a comment line:
//!
//! ```text
//! C0000101<TAB>Child Abuse<TAB>P<TAB>Finding|Social Behavior
//! ```
//!
//! The third column is `P` for the concept's preferred name and `S` for a
//! synonym; the semantic-type column is optional.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, BufReader, Read};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cui::Cui;
use crate::text::{normalize, normalized_tokens};

/// Minimum token-set Jaccard similarity for a partial candidate.
pub const PARTIAL_THRESHOLD: f64 = 0.5;
/// Longest candidate list returned for one label.
pub const MAX_CANDIDATES: usize = 10;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("lexicon line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("failed to read lexicon: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum MatchError {
    #[error("query {0:?} is empty after normalization")]
    InvalidQuery(String),
    #[error("remote matcher failed for {label:?}: {cause}")]
    Remote { label: String, cause: String },
    #[error("match cache error: {0}")]
    Cache(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub cui: Cui,
    pub surface_form: String,
    pub is_preferred: bool,
    pub semantic_types: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchKind {
    Exact,
    Partial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub cui: Cui,
    pub preferred_label: String,
    pub score: f64,
    pub match_kind: MatchKind,
    /// Whether the best-matching surface form is the concept's preferred name.
    pub is_preferred: bool,
}

/// Ranked candidate concepts for one query label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateList {
    pub query_label: String,
    pub candidates: Vec<Candidate>,
    pub ambiguous: bool,
}

impl CandidateList {
    /// Sorts, truncates and sets the ambiguity flag. Candidates must already
    /// be one per CUI.
    pub fn from_candidates(query_label: &str, mut candidates: Vec<Candidate>) -> Self {
        candidates.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then_with(|| b.is_preferred.cmp(&a.is_preferred))
                .then_with(|| a.cui.cmp(&b.cui))
        });
        candidates.truncate(MAX_CANDIDATES);
        let distinct: HashSet<&Cui> = candidates.iter().map(|c| &c.cui).collect();
        let ambiguous = distinct.len() >= 2;
        CandidateList {
            query_label: query_label.to_owned(),
            candidates,
            ambiguous,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn contains(&self, cui: &Cui) -> bool {
        self.candidates.iter().any(|c| &c.cui == cui)
    }
}

/// Anything that can propose UMLS candidates for a label: the local lexicon
/// or the cached remote matcher.
pub trait CandidateSource {
    fn candidates(&self, label: &str) -> Result<CandidateList, MatchError>;
}

#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    entries: Vec<LexiconEntry>,
    index: HashMap<String, Vec<usize>>,
    token_index: HashMap<String, Vec<usize>>,
    /// Normalized token set of every entry, parallel to `entries`.
    token_sets: Vec<Vec<String>>,
}

impl Lexicon {
    pub fn from_entries(entries: impl IntoIterator<Item = LexiconEntry>) -> Self {
        let mut lex = Lexicon::default();
        let mut seen: HashMap<(Cui, String), usize> = HashMap::new();
        for entry in entries {
            let norm = normalize(&entry.surface_form);
            match seen.get(&(entry.cui.clone(), norm.clone())) {
                Some(&i) => {
                    lex.entries[i].is_preferred |= entry.is_preferred;
                }
                None => {
                    let i = lex.entries.len();
                    seen.insert((entry.cui.clone(), norm.clone()), i);
                    let mut tokens = normalized_tokens(&norm);
                    tokens.sort();
                    tokens.dedup();
                    for t in &tokens {
                        lex.token_index.entry(t.clone()).or_default().push(i);
                    }
                    lex.index.entry(norm).or_default().push(i);
                    lex.token_sets.push(tokens);
                    lex.entries.push(entry);
                }
            }
        }
        lex
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn distinct_cuis(&self) -> usize {
        self.entries
            .iter()
            .map(|e| &e.cui)
            .collect::<HashSet<_>>()
            .len()
    }

    /// Entries whose normalized surface form equals `normalized`.
    pub fn lookup(&self, normalized: &str) -> impl Iterator<Item = &LexiconEntry> {
        self.index
            .get(normalized)
            .into_iter()
            .flatten()
            .map(|&i| &self.entries[i])
    }

    /// Every surface form recorded for `cui`, in file order.
    pub fn surface_forms(&self, cui: &Cui) -> Vec<&str> {
        self.entries
            .iter()
            .filter(|e| &e.cui == cui)
            .map(|e| e.surface_form.as_str())
            .collect()
    }

    /// The concept's preferred name, or its first surface form when no entry
    /// is flagged preferred.
    pub fn preferred_label(&self, cui: &Cui) -> Option<&str> {
        let mut first = None;
        for e in self.entries.iter().filter(|e| &e.cui == cui) {
            if e.is_preferred {
                return Some(&e.surface_form);
            }
            first.get_or_insert(e.surface_form.as_str());
        }
        first
    }

    /// Rank candidate concepts for `label`.
    ///
    /// When at least one surface form normalizes to the same string as the
    /// label, only those exact candidates (score 1.0) are returned. Otherwise
    /// concepts whose token-set Jaccard similarity with the label reaches
    /// [`PARTIAL_THRESHOLD`] are returned as partial candidates. One
    /// candidate per CUI, at most [`MAX_CANDIDATES`].
    pub fn match_candidates(&self, label: &str) -> Result<CandidateList, MatchError> {
        let norm = normalize(label);
        if norm.is_empty() {
            return Err(MatchError::InvalidQuery(label.to_owned()));
        }

        // per CUI: (score, is_preferred) of its best entry
        let mut best: BTreeMap<&Cui, (f64, bool)> = BTreeMap::new();
        let mut keep_best = |cui, score: f64, preferred| {
            let slot = best.entry(cui).or_insert((score, preferred));
            if score > slot.0 || (score == slot.0 && preferred && !slot.1) {
                *slot = (score, preferred);
            }
        };

        let exact = self.index.get(&norm);
        let kind = if let Some(hits) = exact {
            for &i in hits {
                let e = &self.entries[i];
                keep_best(&e.cui, 1.0, e.is_preferred);
            }
            MatchKind::Exact
        } else {
            let mut query: Vec<String> = normalized_tokens(&norm);
            query.sort();
            query.dedup();
            let mut touched: Vec<usize> = query
                .iter()
                .filter_map(|t| self.token_index.get(t))
                .flatten()
                .copied()
                .collect();
            touched.sort_unstable();
            touched.dedup();
            for i in touched {
                let score = jaccard_sorted(&query, &self.token_sets[i]);
                if score >= PARTIAL_THRESHOLD {
                    let e = &self.entries[i];
                    keep_best(&e.cui, score, e.is_preferred);
                }
            }
            MatchKind::Partial
        };

        let candidates = best
            .into_iter()
            .map(|(cui, (score, is_preferred))| Candidate {
                cui: cui.clone(),
                preferred_label: self.preferred_label(cui).unwrap_or_default().to_owned(),
                score,
                match_kind: kind,
                is_preferred,
            })
            .collect();
        Ok(CandidateList::from_candidates(label, candidates))
    }
}

impl CandidateSource for Lexicon {
    fn candidates(&self, label: &str) -> Result<CandidateList, MatchError> {
        self.match_candidates(label)
    }
}

/// Jaccard similarity of two sorted, deduplicated token lists.
pub(crate) fn jaccard_sorted(a: &[String], b: &[String]) -> f64 {
    let (mut i, mut j, mut inter) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Load a lexicon from TSV.
pub fn load_lexicon<R: Read>(source: R) -> Result<Lexicon, LexiconError> {
    let reader = BufReader::new(source);
    let mut entries = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line_no = n + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let format_err = |message: String| LexiconError::Format {
            line: line_no,
            message,
        };
        if fields.len() < 3 {
            return Err(format_err(format!(
                "expected at least 3 tab-separated fields, found {}",
                fields.len()
            )));
        }
        let cui: Cui = fields[0]
            .trim()
            .parse()
            .map_err(|e: crate::cui::InvalidCui| format_err(e.to_string()))?;
        let surface = fields[1].trim();
        if surface.is_empty() {
            return Err(format_err("empty surface form".into()));
        }
        if normalize(surface).is_empty() {
            return Err(format_err(format!(
                "surface form {surface:?} has no letters or digits"
            )));
        }
        let is_preferred = match fields[2].trim() {
            "P" => true,
            "S" => false,
            other => {
                return Err(format_err(format!(
                    "preferred flag must be P or S, found {other:?}"
                )))
            }
        };
        let semantic_types = fields
            .get(3)
            .map(|s| {
                s.split('|')
                    .map(str::trim)
                    .filter(|t| !t.is_empty())
                    .map(str::to_owned)
                    .collect()
            })
            .unwrap_or_default();
        entries.push(LexiconEntry {
            cui,
            surface_form: surface.to_owned(),
            is_preferred,
            semantic_types,
        });
    }
    Ok(Lexicon::from_entries(entries))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lex(text: &str) -> Lexicon {
        load_lexicon(text.as_bytes()).unwrap()
    }

    #[test]
    fn three_line_fixture() {
        let l = lex("# comment\nC0000101\tChild Abuse\tP\tFinding\nC0000101\tchild maltreatment\tS\nC0000202\tAnxiety\tP\tMental Process|Finding\n");
        assert_eq!(l.len(), 3);
        assert_eq!(l.distinct_cuis(), 2);
        assert_eq!(l.entries()[2].semantic_types, ["Mental Process", "Finding"]);
    }

    #[test]
    fn empty_stream() {
        assert!(lex("").is_empty());
    }

    #[test]
    fn format_errors_carry_line_numbers() {
        match load_lexicon("C0000101\tok\tP\nX123\tbad\tP\n".as_bytes()).unwrap_err() {
            LexiconError::Format { line, .. } => assert_eq!(line, 2),
            e => panic!("{e}"),
        }
        match load_lexicon("C0000101\tonly two\n".as_bytes()).unwrap_err() {
            LexiconError::Format { line, .. } => assert_eq!(line, 1),
            e => panic!("{e}"),
        }
        assert!(load_lexicon("C0000101\tx\tQ\n".as_bytes()).is_err());
    }

    #[test]
    fn duplicates_collapse_keeping_preferred() {
        let l = lex("C0000101\tChild abuse\tS\nC0000101\tchild-ABUSE\tP\n");
        assert_eq!(l.len(), 1);
        assert!(l.entries()[0].is_preferred);
        assert_eq!(l.entries()[0].surface_form, "Child abuse");
    }

    #[test]
    fn exact_candidate() {
        let l = lex("C0000101\tChild Abuse\tP\n");
        let c = l.match_candidates("Child abuse").unwrap();
        assert_eq!(c.candidates.len(), 1);
        assert_eq!(c.candidates[0].cui.as_str(), "C0000101");
        assert_eq!(c.candidates[0].score, 1.0);
        assert_eq!(c.candidates[0].match_kind, MatchKind::Exact);
        assert!(!c.ambiguous);
    }

    #[test]
    fn ambiguous_household_composition() {
        let l = lex("C0000301\thousehold composition\tP\nC0000302\tHousehold composition\tS\nC0000302\tfamily structure\tP\n");
        let c = l.match_candidates("household composition").unwrap();
        assert_eq!(c.candidates.len(), 2);
        assert!(c.ambiguous);
        // equal score: the preferred-flagged match ranks first
        assert_eq!(c.candidates[0].cui.as_str(), "C0000301");
        assert_eq!(c.candidates[1].preferred_label, "family structure");
    }

    #[test]
    fn empty_query_is_invalid() {
        let l = lex("C0000101\tChild Abuse\tP\n");
        assert!(matches!(
            l.match_candidates("***"),
            Err(MatchError::InvalidQuery(_))
        ));
    }

    #[test]
    fn partial_matches_use_threshold() {
        let l = lex("C0000001\tparental substance abuse\tP\nC0000002\tsubstance\tP\nC0000003\tparental divorce history record\tP\n");
        let c = l.match_candidates("substance abuse").unwrap();
        // {substance, abuse} vs {parental, substance, abuse} = 2/3; vs {substance} = 1/2
        let got: Vec<(&str, f64)> = c
            .candidates
            .iter()
            .map(|c| (c.cui.as_str(), c.score))
            .collect();
        assert_eq!(got, [("C0000001", 2.0 / 3.0), ("C0000002", 0.5)]);
        assert!(c.candidates.iter().all(|c| c.match_kind == MatchKind::Partial));
    }

    #[test]
    fn candidate_cap() {
        let text: String = (0..15)
            .map(|i| format!("C{:07}\tneglect {i}\tP\n", i + 1))
            .collect();
        let c = lex(&text).match_candidates("neglect").unwrap();
        assert_eq!(c.candidates.len(), MAX_CANDIDATES);
        let cuis: Vec<_> = c.candidates.iter().map(|c| c.cui.as_str().to_owned()).collect();
        let mut sorted = cuis.clone();
        sorted.sort();
        assert_eq!(cuis, sorted);
    }

    fn brute_jaccard(a: &str, b: &str) -> f64 {
        let sa: HashSet<String> = normalize(a).split(' ').filter(|s| !s.is_empty()).map(String::from).collect();
        let sb: HashSet<String> = normalize(b).split(' ').filter(|s| !s.is_empty()).map(String::from).collect();
        let inter = sa.intersection(&sb).count();
        let union = sa.union(&sb).count();
        inter as f64 / union as f64
    }

    proptest! {
        #[test]
        fn partial_scores_equal_brute_force_jaccard(
            surfaces in proptest::collection::vec(
                proptest::collection::vec(0usize..6, 1..4), 1..12),
            query in proptest::collection::vec(0usize..6, 1..4),
        ) {
            const WORDS: [&str; 6] = ["child", "abuse", "Neglect", "home", "parental", "loss"];
            let phrase = |ws: &[usize]| ws.iter().map(|&w| WORDS[w]).collect::<Vec<_>>().join(" ");
            let entries: Vec<LexiconEntry> = surfaces.iter().enumerate().map(|(i, s)| LexiconEntry {
                cui: format!("C{:07}", i % 5).parse().unwrap(),
                surface_form: phrase(s),
                is_preferred: i % 2 == 0,
                semantic_types: vec![],
            }).collect();
            let lexicon = Lexicon::from_entries(entries.clone());
            let q = phrase(&query);
            let list = lexicon.match_candidates(&q).unwrap();

            for c in &list.candidates {
                prop_assert!((0.0..=1.0).contains(&c.score));
                match c.match_kind {
                    MatchKind::Exact => prop_assert_eq!(c.score, 1.0),
                    MatchKind::Partial => {
                        let expected = entries.iter()
                            .filter(|e| e.cui == c.cui)
                            .map(|e| brute_jaccard(&q, &e.surface_form))
                            .fold(0.0, f64::max);
                        prop_assert!((c.score - expected).abs() < 1e-12);
                        prop_assert!(c.score >= PARTIAL_THRESHOLD);
                    }
                }
            }
            let has_exact = entries.iter().any(|e| normalize(&e.surface_form) == normalize(&q));
            if has_exact {
                prop_assert_eq!(list.candidates[0].match_kind, MatchKind::Exact);
                prop_assert!(list.candidates.iter().all(|c| c.match_kind == MatchKind::Exact));
            }
            for w in list.candidates.windows(2) {
                let key = |c: &Candidate| (std::cmp::Reverse(ordered(c.score)), !c.is_preferred, c.cui.clone());
                prop_assert!(key(&w[0]) < key(&w[1]));
            }
            prop_assert_eq!(list.clone(), lexicon.match_candidates(&q).unwrap());
        }
    }

    fn ordered(x: f64) -> u64 {
        x.to_bits()
    }
}
