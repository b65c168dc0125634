//! Seeded synthetic inputs in the real file formats.
//!
//! Clinical notes and the reference ontology cannot be redistributed, so tests
//! and demos run on generated stand-ins: an RDF/XML ontology with chosen
//! structural counts, a lexicon covering a chosen number of its leaves, a
//! curation decision log, project terms, and MIMIC/Reddit-format corpora with
//! planted mentions whose ground truth is recorded alongside.
//!
//! All vocabulary is made of pseudo-words built from consonant-vowel
//! syllables, so filler text can never collide with a terminology token.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use chrono::{TimeZone, Utc};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Document, SourceTag, MIMIC_DISCHARGE_CATEGORY};
use crate::cui::Cui;
use crate::curation::{append_decision, CurationDecision};
use crate::terminology::{merge_terminologies, Source, Status, TermEntry, Terminology};
use crate::text::normalized_tokens;

pub type FixtureRng = ChaCha8Rng;

pub fn rng(seed: u64) -> FixtureRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn cui(n: u32) -> Cui {
    format!("C{n:07}").parse().expect("valid cui")
}

const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";

/// Words of the note headers written by [`write_bundle`] that a generated
/// pseudo-word could otherwise spell.
const BOILERPLATE_WORDS: &[&str] = &["date"];

/// Hands out pseudo-words that are unique across every pool drawn from the
/// same instance.
pub struct WordPool {
    used: HashSet<String>,
}

impl Default for WordPool {
    fn default() -> Self {
        Self::new()
    }
}

impl WordPool {
    pub fn new() -> Self {
        let mut pool = WordPool { used: HashSet::new() };
        pool.reserve(BOILERPLATE_WORDS.iter().copied());
        pool
    }

    /// Marks words as taken, e.g. the vocabulary of an existing terminology.
    pub fn reserve<'a>(&mut self, words: impl IntoIterator<Item = &'a str>) {
        self.used.extend(words.into_iter().map(str::to_owned));
    }

    pub fn word<R: Rng>(&mut self, rng: &mut R) -> String {
        loop {
            let syllables = rng.gen_range(2..=4);
            let mut w = String::with_capacity(syllables * 2);
            for _ in 0..syllables {
                w.push(*CONSONANTS.choose(rng).unwrap() as char);
                w.push(*VOWELS.choose(rng).unwrap() as char);
            }
            if self.used.insert(w.clone()) {
                return w;
            }
        }
    }

    pub fn words<R: Rng>(&mut self, rng: &mut R, n: usize) -> Vec<String> {
        (0..n).map(|_| self.word(rng)).collect()
    }

    fn phrase<R: Rng>(&mut self, rng: &mut R, max_words: usize) -> String {
        let n = rng.gen_range(1..=max_words);
        let words = self.words(rng, n);
        capitalize_first(&words.join(" "))
    }
}

fn capitalize_first(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_ascii_uppercase().to_string() + c.as_str(),
        None => String::new(),
    }
}

// ---------------------------------------------------------------------------
// Ontology

/// Structural counts of a generated ontology.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OntologyShape {
    pub classes: usize,
    pub object_properties: usize,
    pub data_properties: usize,
    pub leaves: usize,
}

impl OntologyShape {
    /// Same counts as the public ACESO release.
    pub const ACESO: OntologyShape = OntologyShape {
        classes: 297,
        object_properties: 93,
        data_properties: 3,
        leaves: 140,
    };
}

pub const FIXTURE_NS: &str = "http://example.org/aceso-fixture#";

#[derive(Debug, Clone)]
pub struct GeneratedClass {
    pub iri: String,
    /// `None` for classes written without `rdfs:label`.
    pub label: Option<String>,
    pub parents: Vec<String>,
    pub is_leaf: bool,
}

#[derive(Debug, Clone)]
pub struct GeneratedOntology {
    pub shape: OntologyShape,
    pub classes: Vec<GeneratedClass>,
    pub xml: String,
}

impl GeneratedOntology {
    pub fn leaves(&self) -> impl Iterator<Item = &GeneratedClass> {
        self.classes.iter().filter(|c| c.is_leaf)
    }
}

/// Builds an RDF/XML ontology with exactly the requested counts. Leaf labels
/// are taken from `leaf_labels` in order (padded with fresh phrases); a
/// `None` label leaves the class unlabelled.
pub fn generate_ontology<R: Rng>(
    rng: &mut R,
    shape: OntologyShape,
    pool: &mut WordPool,
    leaf_labels: &[Option<String>],
) -> GeneratedOntology {
    assert!(shape.leaves <= shape.classes, "more leaves than classes");
    assert!(
        shape.classes == 0 || shape.leaves >= 1,
        "a non-empty class hierarchy has at least one leaf"
    );
    let internal = shape.classes - shape.leaves;

    // internal node i > 0 hangs below an earlier internal node
    let mut internal_parent: Vec<Option<usize>> = vec![None; internal];
    for (i, slot) in internal_parent.iter_mut().enumerate().skip(1) {
        *slot = Some(rng.gen_range(0..i));
    }
    let childless = |parents: &[Option<usize>]| -> Vec<usize> {
        let mut has_child = vec![false; parents.len()];
        for p in parents.iter().flatten() {
            has_child[*p] = true;
        }
        (0..parents.len()).filter(|&i| !has_child[i]).collect()
    };
    let mut needs_leaf = childless(&internal_parent);
    if needs_leaf.len() > shape.leaves {
        for (i, slot) in internal_parent.iter_mut().enumerate().skip(1) {
            *slot = Some(i - 1);
        }
        needs_leaf = childless(&internal_parent);
    }
    let mut leaf_parent: Vec<Option<usize>> = Vec::with_capacity(shape.leaves);
    for l in 0..shape.leaves {
        leaf_parent.push(if internal == 0 {
            None
        } else if l < needs_leaf.len() {
            Some(needs_leaf[l])
        } else {
            Some(rng.gen_range(0..internal))
        });
    }
    leaf_parent.shuffle(rng);

    let iri = |n: usize| format!("{FIXTURE_NS}ACESO_{n:07}");
    let mut classes = Vec::with_capacity(shape.classes);
    for (i, p) in internal_parent.iter().enumerate() {
        let label = if rng.gen_bool(0.9) { Some(pool.phrase(rng, 2)) } else { None };
        classes.push(GeneratedClass {
            iri: iri(i + 1),
            label,
            parents: p.map(|p| vec![iri(p + 1)]).unwrap_or_default(),
            is_leaf: false,
        });
    }
    for (l, p) in leaf_parent.iter().enumerate() {
        let label = match leaf_labels.get(l) {
            Some(l) => l.clone(),
            None => Some(pool.phrase(rng, 3)),
        };
        let mut parents: Vec<String> = p.map(|p| vec![iri(p + 1)]).unwrap_or_default();
        if internal > 1 && rng.gen_bool(0.1) {
            let extra = iri(rng.gen_range(0..internal) + 1);
            if !parents.contains(&extra) {
                parents.push(extra);
            }
        }
        classes.push(GeneratedClass {
            iri: iri(internal + l + 1),
            label,
            parents,
            is_leaf: true,
        });
    }

    let xml = ontology_xml(rng, shape, &classes, pool);
    GeneratedOntology { shape, classes, xml }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn ontology_xml<R: Rng>(rng: &mut R, shape: OntologyShape, classes: &[GeneratedClass], pool: &mut WordPool) -> String {
    let short = |iri: &str| iri.replace(FIXTURE_NS, "&aceso;");
    let mut x = String::new();
    x.push_str(
        r#"<?xml version="1.0"?>
<!DOCTYPE rdf:RDF [
    <!ENTITY owl "http://www.w3.org/2002/07/owl#" >
    <!ENTITY xsd "http://www.w3.org/2001/XMLSchema#" >
    <!ENTITY rdfs "http://www.w3.org/2000/01/rdf-schema#" >
    <!ENTITY aceso "http://example.org/aceso-fixture#" >
]>
<rdf:RDF xmlns="http://example.org/aceso-fixture#"
     xml:base="http://example.org/aceso-fixture"
     xmlns:rdf="http://www.w3.org/1999/02/22-rdf-syntax-ns#"
     xmlns:owl="http://www.w3.org/2002/07/owl#"
     xmlns:xsd="http://www.w3.org/2001/XMLSchema#"
     xmlns:rdfs="http://www.w3.org/2000/01/rdf-schema#"
     xmlns:oboInOwl="http://www.geneontology.org/formats/oboInOwl#"
     xmlns:skos="http://www.w3.org/2004/02/skos/core#">
    <owl:Ontology rdf:about="http://example.org/aceso-fixture">
        <rdfs:comment>Synthetic fixture ontology</rdfs:comment>
    </owl:Ontology>

"#,
    );
    let op_iri = |i: usize| format!("&aceso;hasRelation{i:03}");
    for i in 0..shape.object_properties {
        if rng.gen_bool(0.5) {
            let _ = writeln!(
                x,
                "    <owl:ObjectProperty rdf:about=\"{}\">\n        <rdfs:label xml:lang=\"en\">{}</rdfs:label>\n    </owl:ObjectProperty>",
                op_iri(i),
                pool.phrase(rng, 2).to_lowercase()
            );
        } else {
            let _ = writeln!(x, "    <owl:ObjectProperty rdf:about=\"{}\"/>", op_iri(i));
        }
    }
    for i in 0..shape.data_properties {
        let _ = writeln!(
            x,
            "    <owl:DatatypeProperty rdf:about=\"&aceso;dataValue{i:03}\">\n        <rdfs:range rdf:resource=\"&xsd;string\"/>\n    </owl:DatatypeProperty>"
        );
    }
    x.push('\n');
    for c in classes {
        let _ = writeln!(x, "    <owl:Class rdf:about=\"{}\">", short(&c.iri));
        for p in &c.parents {
            let _ = writeln!(x, "        <rdfs:subClassOf rdf:resource=\"{}\"/>", short(p));
        }
        if shape.object_properties > 0 && rng.gen_bool(0.15) {
            let _ = writeln!(
                x,
                "        <rdfs:subClassOf>\n            <owl:Restriction>\n                <owl:onProperty rdf:resource=\"{}\"/>\n                <owl:someValuesFrom rdf:resource=\"&owl;Thing\"/>\n            </owl:Restriction>\n        </rdfs:subClassOf>",
                op_iri(rng.gen_range(0..shape.object_properties))
            );
        }
        if let Some(l) = &c.label {
            let _ = writeln!(x, "        <rdfs:label xml:lang=\"en\">{}</rdfs:label>", xml_escape(l));
        }
        if rng.gen_bool(0.3) {
            let _ = writeln!(
                x,
                "        <oboInOwl:hasDbXref>SNOMEDCT:{}</oboInOwl:hasDbXref>",
                rng.gen_range(100_000..999_999_999u64)
            );
        }
        x.push_str("    </owl:Class>\n");
        if rng.gen_bool(0.05) {
            let _ = writeln!(
                x,
                "    <owl:Axiom>\n        <owl:annotatedSource rdf:resource=\"{}\"/>\n        <owl:annotatedProperty rdf:resource=\"&rdfs;label\"/>\n        <rdfs:comment>reviewed</rdfs:comment>\n    </owl:Axiom>",
                short(&c.iri)
            );
        }
    }
    x.push_str("</rdf:RDF>\n");
    x
}

// ---------------------------------------------------------------------------
// Terminology pipeline fixture

/// Cardinalities of a generated pipeline run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineShape {
    pub ontology: OntologyShape,
    /// Leaves the lexicon can map.
    pub covered: usize,
    /// Covered leaves whose label is shared by two concepts.
    pub ambiguous: usize,
    pub accepted: usize,
    pub project_terms: usize,
}

impl PipelineShape {
    /// 297 classes, 140 leaves, 76 mappable, 38 accepted, 20 project terms.
    pub const ACESO: PipelineShape = PipelineShape {
        ontology: OntologyShape::ACESO,
        covered: 76,
        ambiguous: 8,
        accepted: 38,
        project_terms: 20,
    };
}

pub struct PipelineFixture {
    pub shape: PipelineShape,
    pub ontology: GeneratedOntology,
    pub lexicon_tsv: String,
    /// Accepts for `accepted` covered leaves, rejects for every other leaf.
    pub decisions: Vec<CurationDecision>,
    pub project_terms_json: String,
    /// The terminology the pipeline should produce, built directly from the
    /// generator's own records.
    pub expected_combined: Terminology,
    pub expected_project: Terminology,
}

const PRIMARY_CUI_BASE: u32 = 10_000;
const ALT_CUI_BASE: u32 = 20_000;
const PROJECT_CUI_BASE: u32 = 30_000;
const DISTRACTOR_CUI_BASE: u32 = 90_000;

pub fn pipeline_fixture(seed: u64, shape: PipelineShape) -> PipelineFixture {
    assert!(shape.covered <= shape.ontology.leaves);
    assert!(shape.accepted <= shape.covered && shape.ambiguous <= shape.covered);
    let mut rng = rng(seed);
    let mut pool = WordPool::new();

    let covered_labels: Vec<String> = (0..shape.covered).map(|_| pool.phrase(&mut rng, 3)).collect();
    let uncovered = shape.ontology.leaves - shape.covered;
    let mut leaf_labels: Vec<Option<String>> = covered_labels.iter().cloned().map(Some).collect();
    for i in 0..uncovered {
        // a few unlabelled leaves exercise the IRI-fragment fallback
        leaf_labels.push(if i % 16 == 5 { None } else { Some(pool.phrase(&mut rng, 3)) });
    }
    let ontology = generate_ontology(&mut rng, shape.ontology, &mut pool, &leaf_labels);

    // leaf label -> iri, in generation order
    let leaf_iris: HashMap<&str, &str> = ontology
        .leaves()
        .filter_map(|c| c.label.as_deref().map(|l| (l, c.iri.as_str())))
        .collect();

    let mut lexicon = String::from("# synthetic lexicon: CUI\tsurface\tP|S\tsemantic types\n");
    let mut synonyms_of: BTreeMap<Cui, Vec<String>> = BTreeMap::new();
    let mut preferred_of: BTreeMap<Cui, String> = BTreeMap::new();
    for (i, label) in covered_labels.iter().enumerate() {
        let primary = cui(PRIMARY_CUI_BASE + i as u32);
        let preferred = label.to_lowercase();
        let _ = writeln!(lexicon, "{primary}\t{preferred}\tP\tFinding");
        preferred_of.insert(primary.clone(), preferred);
        let n_syn = rng.gen_range(0..=2);
        let mut syns = Vec::new();
        for _ in 0..n_syn {
            let s = pool.phrase(&mut rng, 2).to_lowercase();
            let _ = writeln!(lexicon, "{primary}\t{s}\tS\tFinding");
            syns.push(s);
        }
        synonyms_of.insert(primary, syns);
        if i < shape.ambiguous {
            let alt = cui(ALT_CUI_BASE + i as u32);
            let _ = writeln!(lexicon, "{alt}\t{label}\tS\tSocial Behavior");
            let _ = writeln!(lexicon, "{alt}\t{}\tP\tSocial Behavior", pool.phrase(&mut rng, 2).to_lowercase());
        }
    }
    for i in 0..shape.covered {
        let _ = writeln!(
            lexicon,
            "{}\t{}\tP\tIdea or Concept",
            cui(DISTRACTOR_CUI_BASE + i as u32),
            pool.phrase(&mut rng, 2).to_lowercase()
        );
    }

    // accept the first `accepted` covered leaves (ambiguous ones included,
    // choosing the primary concept), reject everything else
    let t0 = Utc.with_ymd_and_hms(2022, 3, 1, 9, 0, 0).unwrap();
    let mut decisions = Vec::new();
    let mut aceso_terms = Vec::new();
    let mut accepted_idx: Vec<usize> = (0..shape.covered).collect();
    accepted_idx.shuffle(&mut rng);
    accepted_idx.truncate(shape.accepted);
    let accepted_idx: BTreeSet<usize> = accepted_idx.into_iter().collect();
    let mut order: Vec<(String, Option<Cui>)> = Vec::new();
    for (i, label) in covered_labels.iter().enumerate() {
        let iri = leaf_iris[label.as_str()].to_owned();
        if accepted_idx.contains(&i) {
            let c = cui(PRIMARY_CUI_BASE + i as u32);
            order.push((iri.clone(), Some(c.clone())));
            aceso_terms.push(TermEntry::new(
                c.clone(),
                preferred_of[&c].clone(),
                std::iter::once(label.clone()).chain(synonyms_of[&c].iter().cloned()),
                Source::Aceso,
                Status::Accepted,
                Some(iri),
            ));
        } else {
            order.push((iri, None));
        }
    }
    for c in ontology.leaves() {
        if !order.iter().any(|(i, _)| i == &c.iri) {
            order.push((c.iri.clone(), None));
        }
    }
    order.shuffle(&mut rng);
    for (k, (iri, choice)) in order.into_iter().enumerate() {
        let ts = t0 + chrono::Duration::seconds(30 * k as i64);
        decisions.push(match choice {
            Some(c) => CurationDecision::accept(iri, c, "fixture-curator", ts),
            None => CurationDecision::reject(iri, "fixture-curator", ts).with_note("not ACE-specific"),
        });
    }

    let mut project_terms = Vec::new();
    let mut project_json = Vec::new();
    for i in 0..shape.project_terms {
        let c = cui(PROJECT_CUI_BASE + i as u32);
        let label = pool.phrase(&mut rng, 2);
        let syns: Vec<String> = (0..rng.gen_range(0..=2)).map(|_| pool.phrase(&mut rng, 2).to_lowercase()).collect();
        project_json.push(serde_json::json!({
            "cui": c.as_str(),
            "preferred_label": label,
            "synonyms": syns,
        }));
        project_terms.push(TermEntry::new(c, label, syns, Source::Project, Status::Accepted, None));
    }
    let project_terms_json = serde_json::to_string_pretty(&project_json).expect("json") + "\n";

    let expected_combined = merge_terminologies(&aceso_terms, &project_terms, "combined");
    let expected_project = merge_terminologies(&[], &project_terms, "project-only");

    PipelineFixture {
        shape,
        ontology,
        lexicon_tsv: lexicon,
        decisions,
        project_terms_json,
        expected_combined,
        expected_project,
    }
}

impl PipelineFixture {
    pub fn decisions_jsonl(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        for d in &self.decisions {
            append_decision(&mut buf, d).expect("in-memory write");
        }
        buf
    }
}

// ---------------------------------------------------------------------------
// Planted corpora

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantedMention {
    pub cui: Cui,
    pub start_char: usize,
    pub end_char: usize,
}

#[derive(Debug, Clone)]
pub struct PlantedDocument {
    pub document: Document,
    pub planted: Vec<PlantedMention>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub documents: usize,
    /// Approximate text size per document, in bytes.
    pub doc_bytes: usize,
    /// Upper bound on planted phrases per document.
    pub max_plants: usize,
}

/// Generates documents of filler pseudo-words with terminology labels planted
/// at known positions. Plants are always separated by filler, so each plant
/// produces exactly one mention per concept sharing its normalized form.
pub struct CorpusGenerator {
    rng: FixtureRng,
    spec: CorpusSpec,
    /// Token sequence of each plantable pattern and the concepts it denotes.
    patterns: Vec<(Vec<String>, Vec<Cui>)>,
    filler: Vec<String>,
    id_prefix: String,
    source_tag: SourceTag,
    produced: usize,
}

impl CorpusGenerator {
    pub fn new(seed: u64, t: &Terminology, spec: CorpusSpec) -> Self {
        let mut rng = rng(seed);
        let mut by_tokens: BTreeMap<Vec<String>, BTreeSet<Cui>> = BTreeMap::new();
        for e in t.accepted() {
            for l in e.labels() {
                let toks = normalized_tokens(l);
                if !toks.is_empty() {
                    by_tokens.entry(toks).or_default().insert(e.cui.clone());
                }
            }
        }
        let mut pool = WordPool::new();
        pool.reserve(by_tokens.keys().flatten().map(String::as_str));
        let filler = pool.words(&mut rng, 400);
        CorpusGenerator {
            rng,
            spec,
            patterns: by_tokens
                .into_iter()
                .map(|(k, v)| (k, v.into_iter().collect()))
                .collect(),
            filler,
            id_prefix: "doc".into(),
            source_tag: SourceTag::Generic,
            produced: 0,
        }
    }

    pub fn with_ids(mut self, prefix: &str, tag: SourceTag) -> Self {
        self.id_prefix = prefix.to_owned();
        self.source_tag = tag;
        self
    }

    fn render_token(&mut self, tok: &str) -> String {
        match self.rng.gen_range(0..4) {
            0 => tok.to_ascii_uppercase(),
            1 => capitalize_first(tok),
            _ => tok.to_owned(),
        }
    }

    fn plant_separator(&mut self) -> &'static str {
        [" ", " ", " ", "  ", "-", " - ", "\n", "/"][self.rng.gen_range(0..8)]
    }

    fn filler_separator(&mut self) -> &'static str {
        [" ", " ", " ", " ", ", ", ". ", ".\n", "\n\n", " (", ") ", "; "][self.rng.gen_range(0..11)]
    }

    pub fn generate(&mut self) -> PlantedDocument {
        let id = format!("{}{:06}", self.id_prefix, self.produced);
        self.produced += 1;
        let target = self.spec.doc_bytes;
        let plants = if self.patterns.is_empty() { 0 } else { self.rng.gen_range(0..=self.spec.max_plants) };
        // expected number of words ~ target / 7 bytes
        let words = (target / 7).max(1);
        let p_plant = plants as f64 / words as f64;

        let mut text = String::with_capacity(target + 64);
        let mut chars = 0usize;
        let mut planted = Vec::new();
        let mut remaining = plants;
        let mut last_was_plant = true; // start with filler
        while text.len() < target || remaining > 0 {
            if !text.is_empty() {
                let sep = self.filler_separator();
                text.push_str(sep);
                chars += sep.chars().count();
            }
            let plant_now = remaining > 0
                && !last_was_plant
                && (text.len() >= target || self.rng.gen_bool(p_plant.min(1.0)));
            if plant_now {
                let k = self.rng.gen_range(0..self.patterns.len());
                let toks = self.patterns[k].0.clone();
                let start = chars;
                for (j, t) in toks.iter().enumerate() {
                    if j > 0 {
                        let sep = self.plant_separator();
                        text.push_str(sep);
                        chars += sep.chars().count();
                    }
                    let r = self.render_token(t);
                    chars += r.chars().count();
                    text.push_str(&r);
                }
                for c in &self.patterns[k].1 {
                    planted.push(PlantedMention {
                        cui: c.clone(),
                        start_char: start,
                        end_char: chars,
                    });
                }
                remaining -= 1;
                last_was_plant = true;
            } else {
                let w = self.filler[self.rng.gen_range(0..self.filler.len())].clone();
                let w = self.render_token(&w);
                chars += w.chars().count();
                text.push_str(&w);
                last_was_plant = false;
            }
        }
        text.push('.');
        planted.sort_by(|a, b| (a.start_char, &a.cui).cmp(&(b.start_char, &b.cui)));
        PlantedDocument {
            document: Document {
                id,
                source_tag: self.source_tag,
                group: String::new(),
                text,
            },
            planted,
        }
    }
}

impl Iterator for CorpusGenerator {
    type Item = PlantedDocument;

    fn next(&mut self) -> Option<PlantedDocument> {
        if self.produced >= self.spec.documents {
            return None;
        }
        Some(self.generate())
    }
}

/// Ground truth for a planted corpus.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantingManifest {
    pub documents: u64,
    pub total_mentions: u64,
    pub counts: BTreeMap<Cui, u64>,
}

impl PlantingManifest {
    pub fn record(&mut self, doc: &PlantedDocument) {
        self.documents += 1;
        for p in &doc.planted {
            self.total_mentions += 1;
            *self.counts.entry(p.cui.clone()).or_insert(0) += 1;
        }
    }
}

// ---------------------------------------------------------------------------
// Random terminologies for property tests

/// Terminology of up to `max_terms` accepted concepts whose labels are 1-4
/// tokens drawn from `vocab`. Small vocabularies make overlaps and shared
/// labels common.
pub fn random_terminology<R: Rng>(rng: &mut R, name: &str, max_terms: usize, vocab: &[&str]) -> Terminology {
    let n = rng.gen_range(1..=max_terms);
    let mut seen_labels: HashSet<String> = HashSet::new();
    let mut entries = Vec::with_capacity(n);
    let mut ids: Vec<u32> = (1..=(max_terms as u32 * 4)).collect();
    ids.shuffle(rng);
    for &id in ids.iter().take(n) {
        let mut labels = Vec::new();
        for _ in 0..rng.gen_range(1..=3) {
            let len = rng.gen_range(1..=4);
            let words: Vec<&str> = (0..len).map(|_| *vocab.choose(rng).unwrap()).collect();
            let sep = [" ", "-", "  "][rng.gen_range(0..3)];
            labels.push(words.join(sep));
        }
        // identical labels under different CUIs are allowed, and wanted
        let status = if rng.gen_bool(0.9) { Status::Accepted } else { Status::Rejected };
        let first = labels.remove(0);
        seen_labels.insert(first.clone());
        entries.push(TermEntry::new(cui(id), first, labels, Source::Project, status, None));
    }
    if !entries.iter().any(|e| e.status == Status::Accepted) {
        entries[0].status = Status::Accepted;
    }
    Terminology::new(name, entries).expect("unique cuis")
}

/// Text of at most `max_chars` characters mixing `vocab` words (in random
/// case) with noise words, punctuation, digits and non-ASCII letters.
pub fn random_document<R: Rng>(rng: &mut R, vocab: &[&str], max_chars: usize) -> String {
    const NOISE: &[&str] = &["the", "pt", "x1", "résumé", "naïve", "İzmir", "straße", "42", "ΑΒΓ", "disabused"];
    const SEPS: &[&str] = &[" ", " ", " ", "-", ", ", ".", "\n", "\t", "—", "'", "(", ")", "", "  "];
    let target = rng.gen_range(0..=max_chars);
    let mut out = String::new();
    let mut count = 0usize;
    loop {
        let w: String = if rng.gen_bool(0.7) {
            let w = *vocab.choose(rng).unwrap();
            match rng.gen_range(0..3) {
                0 => w.to_uppercase(),
                1 => capitalize_first(w),
                _ => w.to_owned(),
            }
        } else {
            NOISE.choose(rng).unwrap().to_string()
        };
        let sep = *SEPS.choose(rng).unwrap();
        let add = w.chars().count() + sep.chars().count();
        if count + add > target {
            break;
        }
        out.push_str(&w);
        out.push_str(sep);
        count += add;
    }
    out
}

/// A 20-concept terminology and a 58-concept superset of it.
pub struct NestedTerminologies {
    pub project: Terminology,
    pub combined: Terminology,
    /// Tokens of project labels followed by tokens of combined-only labels.
    pub vocab: Vec<String>,
}

/// The combined-only labels draw on tokens that never occur in a project
/// label. That rules out a project pattern being a strict prefix of a
/// combined-only pattern, and more generally any combined-only match
/// overlapping a project match.
pub fn nested_terminologies<R: Rng>(rng: &mut R, project_terms: usize, combined_terms: usize) -> NestedTerminologies {
    let mut pool = WordPool::new();
    let project_vocab = pool.words(rng, 12);
    let extra_vocab = pool.words(rng, 24);
    let label = |rng: &mut R, vocab: &[String]| -> String {
        let len = rng.gen_range(1..=3);
        (0..len).map(|_| vocab.choose(rng).unwrap().as_str()).collect::<Vec<_>>().join(" ")
    };
    let mut project = Vec::new();
    for i in 0..project_terms {
        let syns: Vec<String> = (0..rng.gen_range(0..=1)).map(|_| label(rng, &project_vocab)).collect();
        let l = label(rng, &project_vocab);
        project.push(TermEntry::new(cui(PROJECT_CUI_BASE + i as u32), l, syns, Source::Project, Status::Accepted, None));
    }
    let mut aceso = Vec::new();
    for i in 0..combined_terms.saturating_sub(project_terms) {
        let syns: Vec<String> = (0..rng.gen_range(0..=1)).map(|_| label(rng, &extra_vocab)).collect();
        let l = label(rng, &extra_vocab);
        aceso.push(TermEntry::new(
            cui(PRIMARY_CUI_BASE + i as u32),
            l,
            syns,
            Source::Aceso,
            Status::Accepted,
            Some(format!("{FIXTURE_NS}ACESO_{i:07}")),
        ));
    }
    let combined = merge_terminologies(&aceso, &project, "combined");
    let project = merge_terminologies(&[], &project, "project-only");
    let mut vocab = project_vocab;
    vocab.extend(extra_vocab);
    NestedTerminologies { project, combined, vocab }
}

// ---------------------------------------------------------------------------
// On-disk bundle

pub const SUBREDDITS: [&str; 22] = [
    "addiction", "adhd", "alcoholism", "anxiety", "autism", "bipolarreddit", "bpd", "depression",
    "divorce", "healthanxiety", "lonely", "mentalhealth", "parenting", "ptsd", "relationships",
    "schizophrenia", "socialanxiety", "suicidewatch", "legaladvice", "meditation", "teaching", "personalfinance",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleOptions {
    pub seed: u64,
    pub mimic_documents: usize,
    /// Non-discharge notes mixed into the MIMIC table.
    pub mimic_other_notes: usize,
    pub mimic_doc_bytes: usize,
    pub reddit_posts: usize,
    pub reddit_doc_bytes: usize,
}

impl Default for BundleOptions {
    fn default() -> Self {
        BundleOptions {
            seed: 7,
            mimic_documents: 200,
            mimic_other_notes: 50,
            mimic_doc_bytes: 8 * 1024,
            reddit_posts: 220,
            reddit_doc_bytes: 600,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub options: BundleOptions,
    pub ontology: OntologyShape,
    pub pipeline: PipelineShape,
    pub combined_concepts: usize,
    pub project_concepts: usize,
    /// Ground truth under the combined terminology.
    pub mimic: PlantingManifest,
    pub reddit: PlantingManifest,
}

/// Writes `ontology.owl`, `lexicon.tsv`, `decisions.jsonl`,
/// `project_terms.json`, `noteevents.csv`, `reddit_posts.jsonl`,
/// `reddit_posts.csv` and `manifest.json` into `dir`.
pub fn write_bundle(dir: &Path, options: BundleOptions) -> io::Result<BundleManifest> {
    fs::create_dir_all(dir)?;
    let fx = pipeline_fixture(options.seed, PipelineShape::ACESO);
    fs::write(dir.join("ontology.owl"), &fx.ontology.xml)?;
    fs::write(dir.join("lexicon.tsv"), &fx.lexicon_tsv)?;
    fs::write(dir.join("decisions.jsonl"), fx.decisions_jsonl())?;
    fs::write(dir.join("project_terms.json"), &fx.project_terms_json)?;

    let mut rng = rng(options.seed ^ 0x5eed);

    // MIMIC NOTEEVENTS
    let mut mimic_manifest = PlantingManifest::default();
    {
        let mut w = csv::Writer::from_writer(io::BufWriter::new(fs::File::create(dir.join("noteevents.csv"))?));
        w.write_record([
            "ROW_ID", "SUBJECT_ID", "HADM_ID", "CHARTDATE", "CHARTTIME", "STORETIME", "CATEGORY", "DESCRIPTION",
            "CGID", "ISERROR", "TEXT",
        ])?;
        let spec = CorpusSpec { documents: options.mimic_documents, doc_bytes: options.mimic_doc_bytes, max_plants: 12 };
        let mut discharge = CorpusGenerator::new(options.seed, &fx.expected_combined, spec);
        let other_spec = CorpusSpec { documents: options.mimic_other_notes, doc_bytes: 1024, max_plants: 4 };
        let mut other = CorpusGenerator::new(options.seed + 1, &fx.expected_combined, other_spec);
        let total = options.mimic_documents + options.mimic_other_notes;
        let mut remaining_other = options.mimic_other_notes;
        for row in 0..total {
            let left = total - row;
            let is_other = remaining_other > 0 && rng.gen_range(0..left) < remaining_other;
            let (doc, category, description) = if is_other {
                remaining_other -= 1;
                let d = other.generate();
                (d, ["Nursing", "Radiology", "Physician "][rng.gen_range(0..3)], "Report")
            } else {
                let d = discharge.generate();
                mimic_manifest.record(&d);
                (d, MIMIC_DISCHARGE_CATEGORY, "Report")
            };
            let text = format!("Admission Date:  [**2101-1-1**]\n\n{}", doc.document.text);
            // the header shifts offsets but not counts, which is all the manifest records
            let subject = 10_000 + rng.gen_range(0..5_000);
            w.write_record([
                (row + 1).to_string(),
                subject.to_string(),
                (100_000 + row).to_string(),
                "2101-01-01".into(),
                String::new(),
                String::new(),
                category.into(),
                description.into(),
                String::new(),
                String::new(),
                text,
            ])?;
        }
        w.flush()?;
    }

    // Reddit posts, same posts in both formats
    let mut reddit_manifest = PlantingManifest::default();
    {
        let mut jsonl = io::BufWriter::new(fs::File::create(dir.join("reddit_posts.jsonl"))?);
        let mut csvw = csv::Writer::from_writer(io::BufWriter::new(fs::File::create(dir.join("reddit_posts.csv"))?));
        csvw.write_record(["subreddit", "author", "date", "post"])?;
        let spec = CorpusSpec { documents: options.reddit_posts, doc_bytes: options.reddit_doc_bytes, max_plants: 2 };
        let generator = CorpusGenerator::new(options.seed + 2, &fx.expected_combined, spec);
        for (i, d) in generator.enumerate() {
            reddit_manifest.record(&d);
            let sub = SUBREDDITS[i % SUBREDDITS.len()];
            let author = format!("user{}", rng.gen_range(0..100_000));
            let date = format!("2019/{:02}/{:02}", rng.gen_range(1..=12), rng.gen_range(1..=28));
            let rec = serde_json::json!({"subreddit": sub, "author": author, "date": date, "post": d.document.text});
            serde_json::to_writer(&mut jsonl, &rec)?;
            jsonl.write_all(b"\n")?;
            csvw.write_record([sub, &author, &date, &d.document.text])?;
        }
        jsonl.flush()?;
        csvw.flush()?;
    }

    let manifest = BundleManifest {
        options,
        ontology: fx.shape.ontology,
        pipeline: fx.shape,
        combined_concepts: fx.expected_combined.len(),
        project_concepts: fx.expected_project.len(),
        mimic: mimic_manifest,
        reddit: reddit_manifest,
    };
    let mut f = fs::File::create(dir.join("manifest.json"))?;
    serde_json::to_writer_pretty(&mut f, &manifest)?;
    f.write_all(b"\n")?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontology::parse_ontology;

    #[test]
    fn ontology_counts_follow_shape() {
        let mut r = rng(1);
        let mut pool = WordPool::new();
        for shape in [
            OntologyShape::ACESO,
            OntologyShape { classes: 1, object_properties: 0, data_properties: 0, leaves: 1 },
            OntologyShape { classes: 5, object_properties: 2, data_properties: 1, leaves: 5 },
            OntologyShape { classes: 10, object_properties: 1, data_properties: 0, leaves: 1 },
        ] {
            let g = generate_ontology(&mut r, shape, &mut pool, &[]);
            let parsed = parse_ontology(g.xml.as_bytes()).unwrap();
            let stats = parsed.stats();
            assert_eq!(
                (stats.classes, stats.object_properties, stats.data_properties, stats.leaves),
                (shape.classes, shape.object_properties, shape.data_properties, shape.leaves),
                "{shape:?}"
            );
        }
    }

    #[test]
    fn planted_positions_match_text() {
        let fx = pipeline_fixture(3, PipelineShape::ACESO);
        let spec = CorpusSpec { documents: 20, doc_bytes: 2000, max_plants: 6 };
        for d in CorpusGenerator::new(5, &fx.expected_combined, spec) {
            let chars: Vec<char> = d.document.text.chars().collect();
            for p in &d.planted {
                let slice: String = chars[p.start_char..p.end_char].iter().collect();
                let entry = fx.expected_combined.get(&p.cui).unwrap();
                let norm = crate::text::normalize(&slice);
                assert!(entry.labels().any(|l| crate::text::normalize(l) == norm), "{slice:?}");
            }
        }
    }

    #[test]
    fn generation_is_seeded() {
        let a = pipeline_fixture(11, PipelineShape::ACESO);
        let b = pipeline_fixture(11, PipelineShape::ACESO);
        assert_eq!(a.ontology.xml, b.ontology.xml);
        assert_eq!(a.lexicon_tsv, b.lexicon_tsv);
        assert_eq!(a.decisions, b.decisions);
    }
}
