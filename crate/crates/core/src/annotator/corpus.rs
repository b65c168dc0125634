use std::io;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{CompiledMatcher, Mention};
use crate::corpus::{Document, RecordError};

const BATCH: usize = 512;

/// Mentions of one document, in (start_char, cui) order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocumentMentions {
    pub doc_id: String,
    pub text_bytes: usize,
    pub mentions: Vec<Mention>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamSummary {
    pub documents: u64,
    pub skipped: u64,
    pub mentions: u64,
    pub text_bytes: u64,
}

/// Annotates `docs` on `workers` threads, handing results to `on_document`
/// in input order and skipped records to `on_error`. A sink error stops the
/// run and is returned.
pub fn annotate_stream<I, F, E>(
    docs: I,
    matcher: &CompiledMatcher,
    workers: usize,
    mut on_document: F,
    mut on_error: E,
) -> io::Result<StreamSummary>
where
    I: IntoIterator<Item = Result<Document, RecordError>>,
    F: FnMut(DocumentMentions) -> io::Result<()>,
    E: FnMut(RecordError),
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(io::Error::other)?;
    let mut summary = StreamSummary::default();
    let mut iter = docs.into_iter();
    let mut batch: Vec<Document> = Vec::with_capacity(BATCH);
    loop {
        batch.clear();
        for item in iter.by_ref() {
            match item {
                Ok(doc) => {
                    batch.push(doc);
                    if batch.len() == BATCH {
                        break;
                    }
                }
                Err(e) => {
                    summary.skipped += 1;
                    on_error(e);
                }
            }
        }
        if batch.is_empty() {
            break;
        }
        let results: Vec<DocumentMentions> = if workers <= 1 {
            batch.iter().map(|d| annotate_one(matcher, d)).collect()
        } else {
            pool.install(|| batch.par_iter().map(|d| annotate_one(matcher, d)).collect())
        };
        for r in results {
            summary.documents += 1;
            summary.mentions += r.mentions.len() as u64;
            summary.text_bytes += r.text_bytes as u64;
            on_document(r)?;
        }
    }
    Ok(summary)
}

fn annotate_one(matcher: &CompiledMatcher, doc: &Document) -> DocumentMentions {
    DocumentMentions {
        doc_id: doc.id.clone(),
        text_bytes: doc.text.len(),
        mentions: matcher.annotate(doc),
    }
}

/// Collected output of [`annotate_corpus`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CorpusAnnotation {
    /// Sorted by (doc_id, start_char, cui).
    pub mentions: Vec<Mention>,
    pub errors: Vec<RecordError>,
    pub documents: u64,
    pub documents_with_mentions: u64,
}

/// Annotates a whole corpus and returns mentions in (doc_id, start_char, cui)
/// order, identical for any worker count.
pub fn annotate_corpus<I>(docs: I, matcher: &CompiledMatcher, workers: usize) -> CorpusAnnotation
where
    I: IntoIterator<Item = Result<Document, RecordError>>,
{
    let mut out = CorpusAnnotation::default();
    let mut per_doc: Vec<DocumentMentions> = Vec::new();
    let mut errors = Vec::new();
    let summary = annotate_stream(
        docs,
        matcher,
        workers,
        |d| {
            per_doc.push(d);
            Ok(())
        },
        |e| errors.push(e),
    )
    .expect("collecting sink cannot fail");
    per_doc.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
    out.documents = summary.documents;
    out.documents_with_mentions = per_doc.iter().filter(|d| !d.mentions.is_empty()).count() as u64;
    out.mentions = per_doc.into_iter().flat_map(|d| d.mentions).collect();
    out.errors = errors;
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::terminology::{Source, Status, TermEntry, Terminology};

    fn matcher() -> CompiledMatcher {
        let t = Terminology::new(
            "t",
            vec![
                TermEntry::new("C0000001".parse().unwrap(), "anxiety", vec![], Source::Project, Status::Accepted, None),
                TermEntry::new("C0000002".parse().unwrap(), "child neglect", vec![], Source::Project, Status::Accepted, None),
            ],
        )
        .unwrap();
        CompiledMatcher::compile(&t).unwrap()
    }

    #[test]
    fn undecodable_document_is_skipped() {
        let m = matcher();
        let docs: Vec<Result<Document, RecordError>> = (0..10)
            .map(|i| {
                if i == 4 {
                    Err(RecordError { record: 5, line: None, message: "bad".into() })
                } else {
                    Ok(Document::new(format!("d{i}"), "anxiety and child neglect"))
                }
            })
            .collect();
        let out = annotate_corpus(docs, &m, 2);
        assert_eq!(out.documents, 9);
        assert_eq!(out.errors.len(), 1);
        assert_eq!(out.mentions.len(), 18);
    }

    #[test]
    fn sink_error_aborts() {
        let m = matcher();
        let docs = (0..3).map(|i| Ok(Document::new(format!("d{i}"), "anxiety")));
        let err = annotate_stream(docs, &m, 1, |_| Err(io::Error::other("disk full")), |_| {}).unwrap_err();
        assert_eq!(err.to_string(), "disk full");
    }

    #[test]
    fn order_is_by_doc_id() {
        let m = matcher();
        let docs = ["b", "a", "c"].map(|id| Ok(Document::new(id, "anxiety, anxiety")));
        let out = annotate_corpus(docs, &m, 1);
        let ids: Vec<&str> = out.mentions.iter().map(|m| m.doc_id.as_str()).collect();
        assert_eq!(ids, ["a", "a", "b", "b", "c", "c"]);
    }
}
