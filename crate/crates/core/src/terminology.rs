//! Curated terminologies: the concept sets the annotator compiles.
//!
//! Serialized as JSON:
//!
//! ```json
//! { "name": "combined",
//!   "entries": [ { "cui": "C0000101", "preferred_label": "Child abuse",
//!                  "synonyms": ["child maltreatment"], "source": "both",
//!                  "status": "accepted", "origin_class_iri": "http://..." } ] }
//! ```

use std::collections::{BTreeMap, HashSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cui::Cui;
use crate::text::normalize;

#[derive(Debug, Error)]
pub enum TerminologyError {
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("duplicate CUI {0}")]
    DuplicateCui(Cui),
    #[error("entry {cui}: {message}")]
    Invalid { cui: String, message: String },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Aceso,
    Project,
    Both,
}

impl Source {
    pub fn includes_aceso(self) -> bool {
        matches!(self, Source::Aceso | Source::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Candidate,
    Accepted,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermEntry {
    pub cui: Cui,
    pub preferred_label: String,
    #[serde(default)]
    pub synonyms: Vec<String>,
    pub source: Source,
    pub status: Status,
    #[serde(default)]
    pub origin_class_iri: Option<String>,
}

impl TermEntry {
    /// Builds an entry, dropping synonyms that normalize to the preferred
    /// label, to an earlier synonym, or to nothing.
    pub fn new(
        cui: Cui,
        preferred_label: impl Into<String>,
        synonyms: impl IntoIterator<Item = String>,
        source: Source,
        status: Status,
        origin_class_iri: Option<String>,
    ) -> Self {
        let preferred_label = preferred_label.into();
        let mut entry = TermEntry {
            cui,
            preferred_label,
            synonyms: Vec::new(),
            source,
            status,
            origin_class_iri,
        };
        entry.add_synonyms(synonyms);
        entry
    }

    pub fn add_synonyms(&mut self, synonyms: impl IntoIterator<Item = String>) {
        let mut seen: HashSet<String> = self.synonyms.iter().map(|s| normalize(s)).collect();
        seen.insert(normalize(&self.preferred_label));
        for s in synonyms {
            let n = normalize(&s);
            if !n.is_empty() && seen.insert(n) {
                self.synonyms.push(s);
            }
        }
    }

    /// Preferred label followed by synonyms.
    pub fn labels(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.preferred_label.as_str()).chain(self.synonyms.iter().map(String::as_str))
    }

    fn validate(&self) -> Result<(), TerminologyError> {
        let invalid = |message: &str| TerminologyError::Invalid {
            cui: self.cui.to_string(),
            message: message.to_owned(),
        };
        if self.preferred_label.trim().is_empty() {
            return Err(invalid("empty preferred_label"));
        }
        let mut seen = HashSet::new();
        seen.insert(normalize(&self.preferred_label));
        for s in &self.synonyms {
            if !seen.insert(normalize(s)) {
                return Err(invalid(&format!("synonym {s:?} duplicates another label")));
            }
        }
        if self.source.includes_aceso() != self.origin_class_iri.is_some() {
            return Err(invalid(
                "origin_class_iri must be present exactly when source includes aceso",
            ));
        }
        Ok(())
    }
}

/// A named concept set, unique by CUI, kept sorted by CUI.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Terminology {
    pub name: String,
    pub entries: Vec<TermEntry>,
}

impl Terminology {
    pub fn new(name: impl Into<String>, entries: Vec<TermEntry>) -> Result<Self, TerminologyError> {
        let mut by_cui: BTreeMap<Cui, TermEntry> = BTreeMap::new();
        for e in entries {
            e.validate()?;
            if by_cui.contains_key(&e.cui) {
                return Err(TerminologyError::DuplicateCui(e.cui));
            }
            by_cui.insert(e.cui.clone(), e);
        }
        Ok(Terminology {
            name: name.into(),
            entries: by_cui.into_values().collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, cui: &Cui) -> Option<&TermEntry> {
        self.entries
            .binary_search_by(|e| e.cui.cmp(cui))
            .ok()
            .map(|i| &self.entries[i])
    }

    pub fn accepted(&self) -> impl Iterator<Item = &TermEntry> {
        self.entries.iter().filter(|e| e.status == Status::Accepted)
    }
}

#[derive(Deserialize)]
struct ProjectTermRecord {
    cui: String,
    preferred_label: String,
    #[serde(default)]
    synonyms: Vec<String>,
}

/// Reads the project-defined term file: a JSON array of
/// `{ "cui", "preferred_label", "synonyms"? }` objects.
pub fn load_project_terms<R: Read>(source: R) -> Result<Vec<TermEntry>, TerminologyError> {
    let records: Vec<ProjectTermRecord> = serde_json::from_reader(source)?;
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(records.len());
    for r in records {
        let cui: Cui = r.cui.parse().map_err(|e: crate::cui::InvalidCui| {
            TerminologyError::Invalid {
                cui: r.cui.clone(),
                message: e.to_string(),
            }
        })?;
        if !seen.insert(cui.clone()) {
            return Err(TerminologyError::DuplicateCui(cui));
        }
        let entry = TermEntry::new(
            cui,
            r.preferred_label,
            r.synonyms,
            Source::Project,
            Status::Accepted,
            None,
        );
        entry.validate()?;
        out.push(entry);
    }
    Ok(out)
}

/// Union by CUI. A concept present on both sides takes the project entry's
/// preferred label, gains the ACESO synonyms and origin, and becomes
/// `source = both`.
pub fn merge_terminologies(aceso_accepted: &[TermEntry], project: &[TermEntry], name: &str) -> Terminology {
    let mut by_cui: BTreeMap<Cui, TermEntry> = BTreeMap::new();
    for e in aceso_accepted {
        by_cui.insert(e.cui.clone(), e.clone());
    }
    for p in project {
        match by_cui.remove(&p.cui) {
            Some(a) => {
                let mut merged = p.clone();
                merged.source = Source::Both;
                merged.origin_class_iri = a.origin_class_iri.clone();
                merged.add_synonyms(
                    std::iter::once(a.preferred_label.clone()).chain(a.synonyms.iter().cloned()),
                );
                by_cui.insert(p.cui.clone(), merged);
            }
            None => {
                by_cui.insert(p.cui.clone(), p.clone());
            }
        }
    }
    Terminology {
        name: name.to_owned(),
        entries: by_cui.into_values().collect(),
    }
}

/// Pretty JSON, entries in CUI order, trailing newline.
pub fn save_terminology<W: Write>(t: &Terminology, mut sink: W) -> Result<(), TerminologyError> {
    let mut sorted = t.clone();
    sorted.entries.sort_by(|a, b| a.cui.cmp(&b.cui));
    serde_json::to_writer_pretty(&mut sink, &sorted)?;
    sink.write_all(b"\n")?;
    sink.flush()?;
    Ok(())
}

pub fn load_terminology<R: Read>(source: R) -> Result<Terminology, TerminologyError> {
    let raw: Terminology = serde_json::from_reader(source)?;
    Terminology::new(raw.name, raw.entries)
}
