//! Per-concept frequency tables and comparisons between them.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotator::Mention;
use crate::cui::Cui;
use crate::terminology::Terminology;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("mention of {cui} in {doc_id} is not an accepted concept of terminology {terminology:?}")]
    UnknownCui {
        cui: Cui,
        doc_id: String,
        terminology: String,
    },
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportRow {
    pub cui: Cui,
    pub preferred_label: String,
    pub mention_count: u64,
    /// Documents with at least one mention of the concept.
    pub document_count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyReport {
    pub corpus_name: String,
    pub terminology_name: String,
    pub concept_count: usize,
    /// Every accepted concept, by mention count descending then CUI.
    pub rows: Vec<ReportRow>,
    pub total_mentions: u64,
    pub documents_processed: u64,
    pub documents_with_mentions: u64,
}

impl FrequencyReport {
    pub fn top(&self) -> Option<&ReportRow> {
        self.rows.first().filter(|r| r.mention_count > 0)
    }

    pub fn count(&self, cui: &Cui) -> u64 {
        self.rows
            .iter()
            .find(|r| &r.cui == cui)
            .map_or(0, |r| r.mention_count)
    }
}

/// Incremental aggregation, one document at a time.
pub struct Aggregator<'t> {
    terminology: &'t Terminology,
    index: HashMap<&'t Cui, usize>,
    mentions: Vec<u64>,
    documents: Vec<u64>,
    documents_with_mentions: u64,
}

impl<'t> Aggregator<'t> {
    pub fn new(terminology: &'t Terminology) -> Self {
        let index: HashMap<&Cui, usize> = terminology
            .accepted()
            .enumerate()
            .map(|(i, e)| (&e.cui, i))
            .collect();
        let n = index.len();
        Aggregator {
            terminology,
            index,
            mentions: vec![0; n],
            documents: vec![0; n],
            documents_with_mentions: 0,
        }
    }

    /// Adds all mentions of one document.
    pub fn add_document(&mut self, mentions: &[Mention]) -> Result<(), ReportError> {
        let mut seen = HashSet::new();
        for m in mentions {
            let i = self.slot(m)?;
            self.mentions[i] += 1;
            if seen.insert(i) {
                self.documents[i] += 1;
            }
        }
        if !mentions.is_empty() {
            self.documents_with_mentions += 1;
        }
        Ok(())
    }

    fn slot(&self, m: &Mention) -> Result<usize, ReportError> {
        self.index
            .get(&m.cui)
            .copied()
            .ok_or_else(|| ReportError::UnknownCui {
                cui: m.cui.clone(),
                doc_id: m.doc_id.clone(),
                terminology: self.terminology.name.clone(),
            })
    }

    pub fn finish(self, corpus_name: &str, documents_processed: u64) -> FrequencyReport {
        let mut rows: Vec<ReportRow> = self
            .terminology
            .accepted()
            .enumerate()
            .map(|(i, e)| ReportRow {
                cui: e.cui.clone(),
                preferred_label: e.preferred_label.clone(),
                mention_count: self.mentions[i],
                document_count: self.documents[i],
            })
            .collect();
        rows.sort_by(|a, b| b.mention_count.cmp(&a.mention_count).then_with(|| a.cui.cmp(&b.cui)));
        FrequencyReport {
            corpus_name: corpus_name.to_owned(),
            terminology_name: self.terminology.name.clone(),
            concept_count: rows.len(),
            total_mentions: self.mentions.iter().sum(),
            rows,
            documents_processed,
            documents_with_mentions: self.documents_with_mentions,
        }
    }
}

/// Counts mentions per concept. Mentions may arrive in any order.
pub fn aggregate<'m, I>(
    mentions: I,
    t: &Terminology,
    corpus_name: &str,
    doc_count: u64,
) -> Result<FrequencyReport, ReportError>
where
    I: IntoIterator<Item = &'m Mention>,
{
    let mut by_doc: HashMap<&str, Vec<Mention>> = HashMap::new();
    let mut order = Vec::new();
    for m in mentions {
        by_doc
            .entry(m.doc_id.as_str())
            .or_insert_with(|| {
                order.push(m.doc_id.as_str());
                Vec::new()
            })
            .push(m.clone());
    }
    let mut agg = Aggregator::new(t);
    for doc in order {
        agg.add_document(&by_doc[doc])?;
    }
    Ok(agg.finish(corpus_name, doc_count))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub corpus_name: String,
    pub terminology_name: String,
    pub concept_count: usize,
    pub total_mentions: u64,
    pub top_concept: Option<ReportRow>,
}

impl From<&FrequencyReport> for ReportSummary {
    fn from(r: &FrequencyReport) -> Self {
        ReportSummary {
            corpus_name: r.corpus_name.clone(),
            terminology_name: r.terminology_name.clone(),
            concept_count: r.concept_count,
            total_mentions: r.total_mentions,
            top_concept: r.top().cloned(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub cui: Cui,
    pub preferred_label: String,
    pub left: u64,
    pub right: u64,
    /// `right - left`.
    pub delta: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub left: ReportSummary,
    pub right: ReportSummary,
    /// One row per CUI in either report, by CUI.
    pub deltas: Vec<DeltaRow>,
    pub left_only: Vec<Cui>,
    pub right_only: Vec<Cui>,
}

pub fn compare(a: &FrequencyReport, b: &FrequencyReport) -> ComparisonReport {
    let mut rows: BTreeMap<&Cui, (String, u64, u64)> = BTreeMap::new();
    for r in &a.rows {
        rows.insert(&r.cui, (r.preferred_label.clone(), r.mention_count, 0));
    }
    for r in &b.rows {
        rows.entry(&r.cui)
            .and_modify(|e| e.2 = r.mention_count)
            .or_insert((r.preferred_label.clone(), 0, r.mention_count));
    }
    let left: BTreeSet<&Cui> = a.rows.iter().map(|r| &r.cui).collect();
    let right: BTreeSet<&Cui> = b.rows.iter().map(|r| &r.cui).collect();
    ComparisonReport {
        left: a.into(),
        right: b.into(),
        deltas: rows
            .into_iter()
            .map(|(cui, (label, l, r))| DeltaRow {
                cui: cui.clone(),
                preferred_label: label,
                left: l,
                right: r,
                delta: r as i64 - l as i64,
            })
            .collect(),
        left_only: left.difference(&right).map(|c| (*c).clone()).collect(),
        right_only: right.difference(&left).map(|c| (*c).clone()).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmitFormat {
    Csv,
    Json,
    /// `label<TAB>count` pairs for a bar chart, optionally capped.
    PlotData { top: Option<usize> },
}

fn plot_label(s: &str) -> String {
    s.chars()
        .map(|c| if c == '\t' || c == '\n' || c == '\r' { ' ' } else { c })
        .collect()
}

pub fn emit<W: Write>(report: &FrequencyReport, format: EmitFormat, mut sink: W) -> Result<(), ReportError> {
    match format {
        EmitFormat::Csv => {
            let mut w = csv::Writer::from_writer(&mut sink);
            w.write_record(["cui", "preferred_label", "mention_count", "document_count"])?;
            for r in &report.rows {
                w.write_record([
                    r.cui.as_str(),
                    &r.preferred_label,
                    &r.mention_count.to_string(),
                    &r.document_count.to_string(),
                ])?;
            }
            w.flush()?;
        }
        EmitFormat::Json => {
            serde_json::to_writer_pretty(&mut sink, report)?;
            sink.write_all(b"\n")?;
        }
        EmitFormat::PlotData { top } => {
            let n = top.unwrap_or(usize::MAX);
            for r in report.rows.iter().take(n) {
                writeln!(sink, "{}\t{}", plot_label(&r.preferred_label), r.mention_count)?;
            }
        }
    }
    sink.flush()?;
    Ok(())
}

pub fn load_report<R: Read>(source: R) -> Result<FrequencyReport, ReportError> {
    Ok(serde_json::from_reader(source)?)
}

/// Fixed-width table of a comparison for terminal output.
pub fn write_comparison_table<W: Write>(c: &ComparisonReport, mut sink: W) -> std::io::Result<()> {
    let top = |s: &ReportSummary| match &s.top_concept {
        Some(r) => format!("{} ({}) {}", r.preferred_label, r.cui, r.mention_count),
        None => "-".to_owned(),
    };
    writeln!(
        sink,
        "left:  {} / {}  total={}  top={}",
        c.left.corpus_name,
        c.left.terminology_name,
        c.left.total_mentions,
        top(&c.left)
    )?;
    writeln!(
        sink,
        "right: {} / {}  total={}  top={}",
        c.right.corpus_name,
        c.right.terminology_name,
        c.right.total_mentions,
        top(&c.right)
    )?;
    writeln!(sink, "{:<10} {:>10} {:>10} {:>10}  label", "cui", "left", "right", "delta")?;
    for d in &c.deltas {
        writeln!(
            sink,
            "{:<10} {:>10} {:>10} {:>+10}  {}",
            d.cui, d.left, d.right, d.delta, d.preferred_label
        )?;
    }
    if !c.left_only.is_empty() {
        writeln!(sink, "left only: {}", join(&c.left_only))?;
    }
    if !c.right_only.is_empty() {
        writeln!(sink, "right only: {}", join(&c.right_only))?;
    }
    sink.flush()
}

fn join(cuis: &[Cui]) -> String {
    cuis.iter().map(Cui::as_str).collect::<Vec<_>>().join(",")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::terminology::{Source, Status, TermEntry};

    fn cui(n: u32) -> Cui {
        format!("C{n:07}").parse().unwrap()
    }

    fn terminology(n: u32) -> Terminology {
        Terminology::new(
            "t",
            (1..=n)
                .map(|i| TermEntry::new(cui(i), format!("concept {i}"), vec![], Source::Project, Status::Accepted, None))
                .collect(),
        )
        .unwrap()
    }

    fn mention(doc: &str, c: u32, start: usize) -> Mention {
        Mention {
            doc_id: doc.into(),
            cui: cui(c),
            start_char: start,
            end_char: start + 1,
            surface: "x".into(),
            pattern: "x".into(),
        }
    }

    #[test]
    fn empty_stream_gives_zero_rows() {
        let r = aggregate(&[], &terminology(58), "c", 0).unwrap();
        assert_eq!(r.rows.len(), 58);
        assert_eq!(r.total_mentions, 0);
        assert!(r.rows.iter().all(|r| r.mention_count == 0));
        assert!(r.top().is_none());
    }

    #[test]
    fn counts_and_sort() {
        let ms = vec![
            mention("a", 2, 0),
            mention("a", 2, 5),
            mention("b", 2, 0),
            mention("b", 3, 3),
            mention("c", 1, 0),
        ];
        let r = aggregate(&ms, &terminology(4), "c", 10).unwrap();
        let view: Vec<(u32, u64, u64)> = r
            .rows
            .iter()
            .map(|r| (r.cui.as_str()[1..].parse().unwrap(), r.mention_count, r.document_count))
            .collect();
        assert_eq!(view, [(2, 3, 2), (1, 1, 1), (3, 1, 1), (4, 0, 0)]);
        assert_eq!(r.total_mentions, 5);
        assert_eq!(r.documents_with_mentions, 3);
        assert_eq!(r.documents_processed, 10);
    }

    #[test]
    fn unknown_cui_is_error() {
        let ms = vec![mention("a", 9, 0)];
        assert!(matches!(
            aggregate(&ms, &terminology(2), "c", 1),
            Err(ReportError::UnknownCui { .. })
        ));
    }

    #[test]
    fn compare_self_is_zero() {
        let r = aggregate(&[mention("a", 1, 0)], &terminology(3), "c", 1).unwrap();
        let c = compare(&r, &r);
        assert!(c.deltas.iter().all(|d| d.delta == 0));
        assert_eq!(c.deltas.len(), 3);
        assert!(c.left_only.is_empty() && c.right_only.is_empty());
        assert_eq!(c.left.top_concept.as_ref().unwrap().cui, cui(1));
    }

    #[test]
    fn compare_disjoint() {
        let a = aggregate(&[], &terminology(2), "a", 0).unwrap();
        let t2 = Terminology::new(
            "t2",
            vec![TermEntry::new(cui(7), "seven", vec![], Source::Project, Status::Accepted, None)],
        )
        .unwrap();
        let b = aggregate(&[mention("x", 7, 0)], &t2, "b", 1).unwrap();
        let c = compare(&a, &b);
        assert_eq!(c.left_only, [cui(1), cui(2)]);
        assert_eq!(c.right_only, [cui(7)]);
        assert_eq!(c.deltas.iter().find(|d| d.cui == cui(7)).unwrap().delta, 1);
    }

    #[test]
    fn emitters() {
        let ms = vec![mention("a", 1, 0), mention("a", 1, 2), mention("a", 2, 4), mention("b", 3, 0), mention("b", 3, 1), mention("b", 3, 3)];
        let r = aggregate(&ms, &terminology(3), "c", 2).unwrap();

        let mut plot = Vec::new();
        emit(&r, EmitFormat::PlotData { top: Some(2) }, &mut plot).unwrap();
        assert_eq!(String::from_utf8(plot).unwrap(), "concept 3\t3\nconcept 1\t2\n");

        let mut csv_out = Vec::new();
        emit(&r, EmitFormat::Csv, &mut csv_out).unwrap();
        let text = String::from_utf8(csv_out).unwrap();
        assert_eq!(text.lines().count(), r.concept_count + 1);
        assert_eq!(text.lines().next().unwrap(), "cui,preferred_label,mention_count,document_count");

        let mut json = Vec::new();
        emit(&r, EmitFormat::Json, &mut json).unwrap();
        assert_eq!(load_report(json.as_slice()).unwrap(), r);
        let mut again = Vec::new();
        emit(&r, EmitFormat::Json, &mut again).unwrap();
        assert_eq!(json, again);
    }
}
