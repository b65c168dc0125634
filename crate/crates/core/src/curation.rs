//! Mapping candidates for ontology leaves and the reviewer decisions that
//! resolve them.
//!
//! Decisions are kept in an append-only JSON-lines log. Resolution is
//! last-writer-wins: decisions are ordered by timestamp, ties by log order,
//! and each one replaces the row's previous resolution. The same rules back
//! the offline `terminology build` path and the curation service.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cui::Cui;
use crate::lexicon::{CandidateList, CandidateSource, Lexicon, MatchError};
use crate::ontology::{OntologyClass, OntologyGraph};
use crate::terminology::{merge_terminologies, Source, Status, TermEntry, Terminology};

#[derive(Debug, Error)]
pub enum CurationError {
    #[error("no leaves to map")]
    NoLeaves,
    #[error("matching {label:?} failed: {source}")]
    Match {
        label: String,
        #[source]
        source: MatchError,
    },
    #[error("unknown class {0}")]
    UnknownClass(String),
    #[error("decision for {class_iri} accepts {cui}, which is not among its candidates")]
    CuiNotCandidate { class_iri: String, cui: Cui },
    #[error("decision for {0} is an accept without chosen_cui")]
    MissingCui(String),
    #[error("duplicate row for class {0}")]
    DuplicateRow(String),
    #[error("decision log line {line}: {message}")]
    Log { line: usize, message: String },
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Accept,
    Reject,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurationDecision {
    pub class_iri: String,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chosen_cui: Option<Cui>,
    pub curator: String,
    pub timestamp: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CurationDecision {
    pub fn accept(class_iri: impl Into<String>, cui: Cui, curator: impl Into<String>, timestamp: DateTime<Utc>) -> Self {
        CurationDecision {
            class_iri: class_iri.into(),
            verdict: Verdict::Accept,
            chosen_cui: Some(cui),
            curator: curator.into(),
            timestamp,
            note: None,
        }
    }

    pub fn reject(class_iri: impl Into<String>, curator: impl Into<String>, timestamp: DateTime<Utc>) -> Self {
        CurationDecision {
            class_iri: class_iri.into(),
            verdict: Verdict::Reject,
            chosen_cui: None,
            curator: curator.into(),
            timestamp,
            note: None,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResolutionState {
    Unresolved,
    Accepted,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRow {
    pub class_iri: String,
    pub label: String,
    /// Ancestor labels from a root down to this class.
    #[serde(default)]
    pub context: Vec<String>,
    pub candidates: CandidateList,
    /// `None` while unresolved.
    #[serde(default)]
    pub resolution: Option<CurationDecision>,
}

impl CandidateRow {
    pub fn state(&self) -> ResolutionState {
        match &self.resolution {
            None => ResolutionState::Unresolved,
            Some(d) if d.verdict == Verdict::Accept => ResolutionState::Accepted,
            Some(_) => ResolutionState::Rejected,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub total: usize,
    pub unresolved: usize,
    pub accepted: usize,
    pub rejected: usize,
}

/// One row per ontology leaf, in IRI order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingCandidateSet {
    pub rows: Vec<CandidateRow>,
}

/// Match every leaf label. Leaves without candidates stay in the set with an
/// empty list; any matcher failure aborts the whole build.
pub fn build_candidates<C: CandidateSource + ?Sized>(
    leaves: &[&OntologyClass],
    matcher: &C,
) -> Result<MappingCandidateSet, CurationError> {
    if leaves.is_empty() {
        return Err(CurationError::NoLeaves);
    }
    let mut rows = Vec::with_capacity(leaves.len());
    for leaf in leaves {
        let candidates = matcher
            .candidates(&leaf.label)
            .map_err(|source| CurationError::Match {
                label: leaf.label.clone(),
                source,
            })?;
        rows.push(CandidateRow {
            class_iri: leaf.iri.clone(),
            label: leaf.label.clone(),
            context: Vec::new(),
            candidates,
            resolution: None,
        });
    }
    MappingCandidateSet::new(rows)
}

impl MappingCandidateSet {
    pub fn new(mut rows: Vec<CandidateRow>) -> Result<Self, CurationError> {
        rows.sort_by(|a, b| a.class_iri.cmp(&b.class_iri));
        for w in rows.windows(2) {
            if w[0].class_iri == w[1].class_iri {
                return Err(CurationError::DuplicateRow(w[0].class_iri.clone()));
            }
        }
        for r in &rows {
            if let Some(d) = &r.resolution {
                if d.class_iri != r.class_iri {
                    return Err(CurationError::UnknownClass(d.class_iri.clone()));
                }
            }
        }
        Ok(MappingCandidateSet { rows })
    }

    /// Fills each row's ancestor path from `graph`.
    pub fn with_context(mut self, graph: &OntologyGraph) -> Self {
        for row in &mut self.rows {
            if let Ok(path) = graph.class_context(&row.class_iri) {
                row.context = path;
            }
        }
        self
    }

    pub fn row(&self, class_iri: &str) -> Option<&CandidateRow> {
        self.rows
            .binary_search_by(|r| r.class_iri.as_str().cmp(class_iri))
            .ok()
            .map(|i| &self.rows[i])
    }

    fn row_index(&self, class_iri: &str) -> Option<usize> {
        self.rows
            .binary_search_by(|r| r.class_iri.as_str().cmp(class_iri))
            .ok()
    }

    pub fn rows_with_candidates(&self) -> usize {
        self.rows.iter().filter(|r| !r.candidates.is_empty()).count()
    }

    pub fn progress(&self) -> Progress {
        let mut p = Progress {
            total: self.rows.len(),
            ..Default::default()
        };
        for r in &self.rows {
            match r.state() {
                ResolutionState::Unresolved => p.unresolved += 1,
                ResolutionState::Accepted => p.accepted += 1,
                ResolutionState::Rejected => p.rejected += 1,
            }
        }
        p
    }

    /// Checks one decision against the set without applying it.
    pub fn validate(&self, d: &CurationDecision) -> Result<(), CurationError> {
        let row = self
            .row(&d.class_iri)
            .ok_or_else(|| CurationError::UnknownClass(d.class_iri.clone()))?;
        if d.verdict == Verdict::Accept {
            let cui = d
                .chosen_cui
                .as_ref()
                .ok_or_else(|| CurationError::MissingCui(d.class_iri.clone()))?;
            if !row.candidates.contains(cui) {
                return Err(CurationError::CuiNotCandidate {
                    class_iri: d.class_iri.clone(),
                    cui: cui.clone(),
                });
            }
        }
        Ok(())
    }

    /// Applies `decisions` in (timestamp, list position) order. Every
    /// decision is validated first; on error nothing is applied.
    pub fn apply_decisions(&self, decisions: &[CurationDecision]) -> Result<Self, CurationError> {
        for d in decisions {
            self.validate(d)?;
        }
        let mut ordered: Vec<&CurationDecision> = decisions.iter().collect();
        ordered.sort_by_key(|d| d.timestamp);
        let mut next = self.clone();
        for d in ordered {
            let i = next.row_index(&d.class_iri).expect("validated");
            let applies = match &next.rows[i].resolution {
                Some(prev) => prev.timestamp <= d.timestamp,
                None => true,
            };
            if applies {
                let mut d = d.clone();
                if d.verdict == Verdict::Reject {
                    d.chosen_cui = None;
                }
                next.rows[i].resolution = Some(d);
            }
        }
        Ok(next)
    }

    /// Term entries for accepted rows. Labels come from the chosen candidate;
    /// the leaf's own label and every lexicon surface form of the CUI become
    /// synonyms. Rows accepting the same CUI collapse into one entry whose
    /// origin is the first such row.
    pub fn accepted_terms(&self, lexicon: Option<&Lexicon>) -> Vec<TermEntry> {
        let mut by_cui: BTreeMap<Cui, TermEntry> = BTreeMap::new();
        for row in &self.rows {
            let Some(d) = &row.resolution else { continue };
            if d.verdict != Verdict::Accept {
                continue;
            }
            let Some(cui) = &d.chosen_cui else { continue };
            let candidate_label = row
                .candidates
                .candidates
                .iter()
                .find(|c| &c.cui == cui)
                .map(|c| c.preferred_label.clone())
                .filter(|l| !l.trim().is_empty())
                .unwrap_or_else(|| row.label.clone());
            let mut synonyms = vec![row.label.clone()];
            if let Some(lex) = lexicon {
                synonyms.extend(lex.surface_forms(cui).into_iter().map(str::to_owned));
            }
            match by_cui.get_mut(cui) {
                Some(existing) => existing.add_synonyms(std::iter::once(candidate_label).chain(synonyms)),
                None => {
                    by_cui.insert(
                        cui.clone(),
                        TermEntry::new(
                            cui.clone(),
                            candidate_label,
                            synonyms,
                            Source::Aceso,
                            Status::Accepted,
                            Some(row.class_iri.clone()),
                        ),
                    );
                }
            }
        }
        by_cui.into_values().collect()
    }

    /// Terminology that the current decisions produce, merged with `project`
    /// terms when given.
    pub fn preview_terminology(&self, name: &str, lexicon: Option<&Lexicon>, project: &[TermEntry]) -> Terminology {
        merge_terminologies(&self.accepted_terms(lexicon), project, name)
    }

    pub fn save<W: Write>(&self, mut sink: W) -> Result<(), CurationError> {
        serde_json::to_writer_pretty(&mut sink, self)?;
        sink.write_all(b"\n")?;
        Ok(())
    }

    pub fn load<R: Read>(source: R) -> Result<Self, CurationError> {
        let raw: MappingCandidateSet = serde_json::from_reader(source)?;
        MappingCandidateSet::new(raw.rows)
    }
}

/// Reads a JSON-lines decision log. A final line without its newline that
/// fails to parse is the remnant of an interrupted append and is dropped with
/// a warning; any other bad line is an error.
pub fn read_decision_log<R: Read>(source: R) -> Result<Vec<CurationDecision>, CurationError> {
    let mut reader = BufReader::new(source);
    let mut out = Vec::new();
    let mut line = String::new();
    let mut line_no = 0;
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            break;
        }
        line_no += 1;
        let complete = line.ends_with('\n');
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        match serde_json::from_str::<CurationDecision>(trimmed) {
            Ok(d) => out.push(d),
            Err(_) if !complete => {
                log::warn!("ignoring truncated final decision log line {line_no}");
            }
            Err(e) => {
                return Err(CurationError::Log {
                    line: line_no,
                    message: e.to_string(),
                })
            }
        }
    }
    Ok(out)
}

/// Appends one decision as a single line and flushes.
pub fn append_decision<W: Write>(mut sink: W, d: &CurationDecision) -> Result<(), CurationError> {
    let mut line = serde_json::to_vec(d)?;
    line.push(b'\n');
    sink.write_all(&line)?;
    sink.flush()?;
    Ok(())
}
