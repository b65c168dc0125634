//! Compile an ACE ontology into an NLP-ready terminology and count concept
//! mentions in clinical notes and social-media posts.
//!
//! The pipeline has four stages, each with a file as its output:
//!
//! 1. [`ontology`] parses an OWL/RDF-XML ontology and extracts its leaf
//!    classes.
//! 2. [`lexicon`] ranks UMLS candidate concepts for each leaf label, and
//!    [`curation`] records the accept/reject decisions of a human reviewer.
//! 3. [`terminology`] merges the accepted mappings with project-defined terms.
//! 4. [`annotator`] finds mentions of the terminology in a [`corpus`], and
//!    [`report`] turns them into per-concept frequency tables.
//!
//! The guide in `book/` walks through each stage with runnable snippets.

pub mod annotator;
pub mod corpus;
pub mod curation;
pub mod cui;
pub mod fixtures;
pub mod lexicon;
pub mod ontology;
pub mod remote;
pub mod report;
pub mod terminology;
pub mod text;

pub use annotator::{annotate_corpus, CompiledMatcher, Mention};
pub use corpus::Document;
pub use curation::{CurationDecision, MappingCandidateSet, Verdict};
pub use cui::Cui;
pub use lexicon::{CandidateList, Lexicon};
pub use ontology::{parse_ontology, OntologyClass, OntologyGraph};
pub use report::FrequencyReport;
pub use terminology::{TermEntry, Terminology};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/ontology.md")]
    mod ontology {}
    #[doc = include_str!("../../../book/src/lexicon.md")]
    mod lexicon {}
    #[doc = include_str!("../../../book/src/curation.md")]
    mod curation {}
    #[doc = include_str!("../../../book/src/annotation.md")]
    mod annotation {}
    #[doc = include_str!("../../../book/src/reports.md")]
    mod reports {}
}
