//! OWL ontologies in RDF/XML: class graph, structural statistics and leaf
//! extraction.
//!
//! The parser interprets the RDF/XML node/property striping just far enough
//! to recover the constructs the terminology pipeline needs: class, object
//! property and datatype property declarations, `rdfs:subClassOf` links to
//! named classes, labels, and simple annotation values. Anonymous class
//! expressions, reified axioms and everything else are walked over and
//! ignored.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Read;

use quick_xml::events::{BytesStart, Event};
use quick_xml::name::{Namespace, ResolveResult};
use quick_xml::NsReader;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const RDF_NS: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#";
const XML_NS: &str = "http://www.w3.org/XML/1998/namespace";

const OWL_CLASS: &str = "http://www.w3.org/2002/07/owl#Class";
const OWL_THING: &str = "http://www.w3.org/2002/07/owl#Thing";
const OWL_OBJECT_PROPERTY: &str = "http://www.w3.org/2002/07/owl#ObjectProperty";
const OWL_DATATYPE_PROPERTY: &str = "http://www.w3.org/2002/07/owl#DatatypeProperty";
const RDF_TYPE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";
const RDF_DESCRIPTION: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#Description";
const RDFS_LABEL: &str = "http://www.w3.org/2000/01/rdf-schema#label";
const RDFS_SUBCLASS_OF: &str = "http://www.w3.org/2000/01/rdf-schema#subClassOf";

#[derive(Debug, Error)]
pub enum OntologyError {
    #[error("malformed XML at line {line}, column {column}: {message}")]
    Xml {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("subclass cycle through {iri}")]
    Cycle { iri: String },
    #[error("class not found: {0}")]
    NotFound(String),
    #[error("failed to read ontology: {0}")]
    Io(#[from] std::io::Error),
}

/// A named class of the ontology.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OntologyClass {
    pub iri: String,
    /// `rdfs:label`, or the IRI fragment when the class has none.
    pub label: String,
    pub parent_iris: BTreeSet<String>,
    /// Expanded property IRI to literal or resource values, e.g. a
    /// `hasDbXref` carrying a SNOMED-CT code.
    pub annotations: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct OntologyGraph {
    pub classes: BTreeMap<String, OntologyClass>,
    pub object_property_count: usize,
    pub data_property_count: usize,
    /// Parent IRIs referenced by `rdfs:subClassOf` but never declared.
    pub dangling_parent_iris: BTreeSet<String>,
}

/// Structural counts reported by `ontology stats`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OntologyStats {
    pub classes: usize,
    pub object_properties: usize,
    pub data_properties: usize,
    pub leaves: usize,
}

impl OntologyStats {
    /// Counts of the 2019 public ACESO release.
    pub const ACESO_REFERENCE: OntologyStats = OntologyStats {
        classes: 297,
        object_properties: 93,
        data_properties: 3,
        leaves: 140,
    };

    /// Metric names whose value differs from `other`, with both values.
    pub fn differences(&self, other: &OntologyStats) -> Vec<(&'static str, usize, usize)> {
        let pairs = [
            ("classes", self.classes, other.classes),
            (
                "object_properties",
                self.object_properties,
                other.object_properties,
            ),
            ("data_properties", self.data_properties, other.data_properties),
            ("leaves", self.leaves, other.leaves),
        ];
        pairs.into_iter().filter(|(_, a, b)| a != b).collect()
    }
}

impl OntologyGraph {
    pub fn stats(&self) -> OntologyStats {
        OntologyStats {
            classes: self.classes.len(),
            object_properties: self.object_property_count,
            data_properties: self.data_property_count,
            leaves: self.extract_leaf_nodes().len(),
        }
    }

    /// Classes that are nobody's parent, sorted by IRI.
    pub fn extract_leaf_nodes(&self) -> Vec<&OntologyClass> {
        let parents: BTreeSet<&str> = self
            .classes
            .values()
            .flat_map(|c| c.parent_iris.iter().map(String::as_str))
            .collect();
        self.classes
            .values()
            .filter(|c| !parents.contains(c.iri.as_str()))
            .collect()
    }

    /// Labels from a root down to `iri`. With several parents the walk
    /// follows the lexicographically smallest defined parent IRI.
    pub fn class_context(&self, iri: &str) -> Result<Vec<String>, OntologyError> {
        let mut current = self
            .classes
            .get(iri)
            .ok_or_else(|| OntologyError::NotFound(iri.to_owned()))?;
        let mut path = vec![current.label.clone()];
        // acyclicity is checked at load time, the bound only guards hand-built graphs
        for _ in 0..self.classes.len() {
            let next = current
                .parent_iris
                .iter()
                .find_map(|p| self.classes.get(p));
            match next {
                Some(parent) => {
                    path.push(parent.label.clone());
                    current = parent;
                }
                None => break,
            }
        }
        path.reverse();
        Ok(path)
    }
}

/// Label used when a class has no `rdfs:label`: the text after the last `#`
/// or `/` of the IRI.
pub fn iri_fragment(iri: &str) -> &str {
    match iri.rfind(['#', '/']) {
        Some(i) if i + 1 < iri.len() => &iri[i + 1..],
        _ => iri,
    }
}

/// Parse an RDF/XML document into an [`OntologyGraph`].
pub fn parse_ontology<R: Read>(mut source: R) -> Result<OntologyGraph, OntologyError> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    let facts = RdfXmlParser::new(&bytes).run()?;
    facts.into_graph()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Term {
    Iri(String),
    Blank(u64),
}

impl Term {
    fn iri(&self) -> Option<&str> {
        match self {
            Term::Iri(s) => Some(s),
            Term::Blank(_) => None,
        }
    }
}

#[derive(Default)]
struct Facts {
    classes: BTreeSet<String>,
    object_properties: BTreeSet<String>,
    data_properties: BTreeSet<String>,
    parents: HashMap<String, BTreeSet<String>>,
    labels: HashMap<String, (String, bool)>,
    annotations: HashMap<String, BTreeMap<String, Vec<String>>>,
}

impl Facts {
    fn add_resource(&mut self, subject: &Term, predicate: &str, object: &Term) {
        let Some(s) = subject.iri() else { return };
        match (predicate, object) {
            (RDF_TYPE, Term::Iri(o)) => match o.as_str() {
                OWL_CLASS => {
                    self.classes.insert(s.to_owned());
                }
                OWL_OBJECT_PROPERTY => {
                    self.object_properties.insert(s.to_owned());
                }
                OWL_DATATYPE_PROPERTY => {
                    self.data_properties.insert(s.to_owned());
                }
                _ => {}
            },
            (RDFS_SUBCLASS_OF, Term::Iri(o)) => {
                if o != OWL_THING {
                    self.parents
                        .entry(s.to_owned())
                        .or_default()
                        .insert(o.clone());
                }
            }
            (_, Term::Iri(o)) => self.add_annotation(s, predicate, o.clone()),
            (_, Term::Blank(_)) => {}
        }
    }

    fn add_literal(&mut self, subject: &Term, predicate: &str, value: String, lang: Option<&str>) {
        let Some(s) = subject.iri() else { return };
        if predicate == RDFS_LABEL {
            let value = value.trim().to_owned();
            if value.is_empty() {
                return;
            }
            let english = matches!(lang, None | Some("en") | Some("en-US") | Some("en-GB"));
            match self.labels.get(s) {
                Some((_, true)) => {}
                Some((_, false)) if !english => {}
                _ => {
                    self.labels.insert(s.to_owned(), (value, english));
                }
            }
        } else {
            self.add_annotation(s, predicate, value);
        }
    }

    fn add_annotation(&mut self, subject: &str, predicate: &str, value: String) {
        self.annotations
            .entry(subject.to_owned())
            .or_default()
            .entry(predicate.to_owned())
            .or_default()
            .push(value);
    }

    fn into_graph(mut self) -> Result<OntologyGraph, OntologyError> {
        self.classes.remove(OWL_THING);
        let mut graph = OntologyGraph {
            object_property_count: self.object_properties.len(),
            data_property_count: self.data_properties.len(),
            ..Default::default()
        };
        for iri in &self.classes {
            let mut parent_iris = self.parents.remove(iri).unwrap_or_default();
            parent_iris.remove(iri);
            for p in &parent_iris {
                if !self.classes.contains(p) {
                    graph.dangling_parent_iris.insert(p.clone());
                }
            }
            let label = match self.labels.remove(iri) {
                Some((l, _)) => l,
                None => iri_fragment(iri).to_owned(),
            };
            let annotations = self.annotations.remove(iri).unwrap_or_default();
            graph.classes.insert(
                iri.clone(),
                OntologyClass {
                    iri: iri.clone(),
                    label,
                    parent_iris,
                    annotations,
                },
            );
        }
        for d in &graph.dangling_parent_iris {
            log::warn!("subclass axiom references undeclared class {d}");
        }
        check_acyclic(&graph)?;
        Ok(graph)
    }
}

fn check_acyclic(graph: &OntologyGraph) -> Result<(), OntologyError> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Active,
        Done,
    }
    let mut marks: HashMap<&str, Mark> = HashMap::new();
    for start in graph.classes.keys() {
        if marks.contains_key(start.as_str()) {
            continue;
        }
        // iterative DFS over (class, remaining parents)
        let mut stack: Vec<(&str, Vec<&str>)> = Vec::new();
        let parents_of = |iri: &str| -> Vec<&str> {
            graph.classes[iri]
                .parent_iris
                .iter()
                .filter(|p| graph.classes.contains_key(*p))
                .map(String::as_str)
                .collect()
        };
        marks.insert(start, Mark::Active);
        stack.push((start, parents_of(start)));
        while let Some((node, pending)) = stack.last_mut() {
            match pending.pop() {
                Some(p) => match marks.get(p) {
                    Some(Mark::Active) => {
                        return Err(OntologyError::Cycle { iri: p.to_owned() })
                    }
                    Some(Mark::Done) => {}
                    None => {
                        marks.insert(p, Mark::Active);
                        let next = parents_of(p);
                        stack.push((p, next));
                    }
                },
                None => {
                    marks.insert(node, Mark::Done);
                    stack.pop();
                }
            }
        }
    }
    Ok(())
}

enum Frame {
    Root,
    Node {
        subject: Term,
    },
    Property {
        subject: Term,
        predicate: String,
        lang: Option<String>,
        text: String,
        object: Option<Term>,
    },
    /// Content that is not interpreted (parseType literals and collections).
    Skip,
}

struct RdfXmlParser<'a> {
    input: &'a [u8],
    reader: NsReader<&'a [u8]>,
    entities: HashMap<String, String>,
    base: Vec<Option<String>>,
    lang: Vec<Option<String>>,
    stack: Vec<Frame>,
    facts: Facts,
    next_blank: u64,
}

struct Attr {
    ns: Option<String>,
    local: String,
    value: String,
}

impl<'a> RdfXmlParser<'a> {
    fn new(input: &'a [u8]) -> Self {
        let mut reader = NsReader::from_reader(input);
        reader.config_mut().expand_empty_elements = true;
        reader.config_mut().check_end_names = true;
        Self {
            input,
            reader,
            entities: HashMap::new(),
            base: Vec::new(),
            lang: Vec::new(),
            stack: Vec::new(),
            facts: Facts::default(),
            next_blank: 0,
        }
    }

    fn error_at(&self, offset: u64, message: impl Into<String>) -> OntologyError {
        let offset = (offset as usize).min(self.input.len());
        let before = &self.input[..offset];
        let line = before.iter().filter(|&&b| b == b'\n').count() + 1;
        let line_start = before
            .iter()
            .rposition(|&b| b == b'\n')
            .map_or(0, |i| i + 1);
        let column = String::from_utf8_lossy(&before[line_start..]).chars().count() + 1;
        OntologyError::Xml {
            line,
            column,
            message: message.into(),
        }
    }

    fn run(mut self) -> Result<Facts, OntologyError> {
        let mut seen_root = false;
        loop {
            let event = self.reader.read_resolved_event();
            let (ns, event) = match event {
                Ok(ev) => ev,
                Err(e) => {
                    let pos = self.reader.error_position();
                    return Err(self.error_at(pos, e.to_string()));
                }
            };
            let ns = resolved_ns(&ns);
            match event {
                Event::DocType(dt) => {
                    let raw = String::from_utf8_lossy(dt.as_ref()).into_owned();
                    self.entities.extend(parse_entity_decls(&raw));
                }
                Event::Start(start) => {
                    let local = String::from_utf8_lossy(start.local_name().as_ref()).into_owned();
                    let attrs = self.attributes(&start)?;
                    self.push_scope(&attrs);
                    if !seen_root {
                        seen_root = true;
                        if ns.as_deref() == Some(RDF_NS) && local == "RDF" {
                            self.stack.push(Frame::Root);
                        } else {
                            // a lone node element is also valid RDF/XML
                            self.open_node(ns, &local, &attrs);
                        }
                        continue;
                    }
                    self.open(ns, &local, &attrs)?;
                }
                Event::End(_) => {
                    self.close();
                    self.base.pop();
                    self.lang.pop();
                }
                Event::Text(t) => {
                    let raw = String::from_utf8_lossy(t.as_ref()).into_owned();
                    let text = self.unescape(&raw);
                    if let Some(Frame::Property { text: buf, .. }) = self.stack.last_mut() {
                        buf.push_str(&text);
                    }
                }
                Event::CData(t) => {
                    if let Some(Frame::Property { text: buf, .. }) = self.stack.last_mut() {
                        buf.push_str(&String::from_utf8_lossy(t.as_ref()));
                    }
                }
                Event::Eof => {
                    if !self.stack.is_empty() {
                        let pos = self.reader.buffer_position();
                        return Err(self.error_at(pos, "unexpected end of document"));
                    }
                    if !seen_root {
                        return Err(self.error_at(0, "document has no root element"));
                    }
                    return Ok(self.facts);
                }
                _ => {}
            }
        }
    }

    fn attributes(&self, start: &BytesStart<'_>) -> Result<Vec<Attr>, OntologyError> {
        let mut out = Vec::new();
        for attr in start.attributes() {
            let attr = attr.map_err(|e| self.error_at(self.reader.buffer_position(), e.to_string()))?;
            let key = attr.key;
            if key.as_namespace_binding().is_some() {
                continue;
            }
            let (ns, local) = self.reader.resolve_attribute(key);
            let mut ns = resolved_ns(&ns);
            if key.prefix().is_some_and(|p| p.as_ref() == b"xml") {
                ns = Some(XML_NS.to_owned());
            }
            let raw = String::from_utf8_lossy(&attr.value).into_owned();
            out.push(Attr {
                ns,
                local: String::from_utf8_lossy(local.as_ref()).into_owned(),
                value: self.unescape(&raw),
            });
        }
        Ok(out)
    }

    fn push_scope(&mut self, attrs: &[Attr]) {
        let inherited_base = self.base.last().cloned().flatten();
        let inherited_lang = self.lang.last().cloned().flatten();
        let base = find_attr(attrs, XML_NS, "base")
            .map(|b| b.to_owned())
            .or(inherited_base);
        let lang = find_attr(attrs, XML_NS, "lang")
            .map(|l| l.to_owned())
            .or(inherited_lang);
        self.base.push(base);
        self.lang.push(lang);
    }

    fn resolve_iri(&self, reference: &str) -> String {
        let base = self.base.last().cloned().flatten().unwrap_or_default();
        if reference.is_empty() {
            return base;
        }
        if reference.starts_with('#') {
            let stem = base.split('#').next().unwrap_or("");
            return format!("{stem}{reference}");
        }
        if reference.contains(':') || base.is_empty() {
            return reference.to_owned();
        }
        match base.rfind('/') {
            Some(i) => format!("{}{}", &base[..=i], reference),
            None => reference.to_owned(),
        }
    }

    fn fresh_blank(&mut self) -> Term {
        self.next_blank += 1;
        Term::Blank(self.next_blank)
    }

    fn open(&mut self, ns: Option<String>, local: &str, attrs: &[Attr]) -> Result<(), OntologyError> {
        match self.stack.last() {
            Some(Frame::Root) => {
                self.open_node(ns, local, attrs);
            }
            Some(Frame::Node { subject }) => {
                let subject = subject.clone();
                self.open_property(subject, ns, local, attrs);
            }
            Some(Frame::Property { .. }) => {
                // nested node element: it becomes the property's object
                let object = self.open_node(ns, local, attrs);
                if let Some(Frame::Property { object: slot, .. }) =
                    self.stack.iter_mut().rev().nth(1)
                {
                    *slot = Some(object);
                }
            }
            Some(Frame::Skip) | None => self.stack.push(Frame::Skip),
        }
        Ok(())
    }

    fn open_node(&mut self, ns: Option<String>, local: &str, attrs: &[Attr]) -> Term {
        let subject = if let Some(about) = find_attr(attrs, RDF_NS, "about") {
            Term::Iri(self.resolve_iri(about))
        } else if let Some(id) = find_attr(attrs, RDF_NS, "ID") {
            Term::Iri(self.resolve_iri(&format!("#{id}")))
        } else {
            self.fresh_blank()
        };
        let type_iri = expand(ns.as_deref(), local);
        if type_iri != RDF_DESCRIPTION {
            self.facts
                .add_resource(&subject, RDF_TYPE, &Term::Iri(type_iri));
        }
        let lang = self.lang.last().cloned().flatten();
        for a in attrs {
            match a.ns.as_deref() {
                Some(RDF_NS) => {
                    if a.local == "type" {
                        let t = Term::Iri(self.resolve_iri(&a.value));
                        self.facts.add_resource(&subject, RDF_TYPE, &t);
                    }
                }
                Some(XML_NS) => {}
                _ => {
                    let p = expand(a.ns.as_deref(), &a.local);
                    self.facts
                        .add_literal(&subject, &p, a.value.clone(), lang.as_deref());
                }
            }
        }
        self.stack.push(Frame::Node {
            subject: subject.clone(),
        });
        subject
    }

    fn open_property(&mut self, subject: Term, ns: Option<String>, local: &str, attrs: &[Attr]) {
        let predicate = expand(ns.as_deref(), local);
        if find_attr(attrs, RDF_NS, "parseType").is_some() {
            self.stack.push(Frame::Skip);
            return;
        }
        let object = if let Some(r) = find_attr(attrs, RDF_NS, "resource") {
            Some(Term::Iri(self.resolve_iri(r)))
        } else if find_attr(attrs, RDF_NS, "nodeID").is_some() {
            Some(self.fresh_blank())
        } else {
            None
        };
        self.stack.push(Frame::Property {
            subject,
            predicate,
            lang: self.lang.last().cloned().flatten(),
            text: String::new(),
            object,
        });
    }

    fn close(&mut self) {
        if let Some(Frame::Property {
            subject,
            predicate,
            lang,
            text,
            object,
        }) = self.stack.pop()
        {
            match object {
                Some(o) => self.facts.add_resource(&subject, &predicate, &o),
                None => self
                    .facts
                    .add_literal(&subject, &predicate, text, lang.as_deref()),
            }
        }
    }

    fn unescape(&self, raw: &str) -> String {
        unescape_entities(raw, &self.entities)
    }
}

fn resolved_ns(ns: &ResolveResult<'_>) -> Option<String> {
    match ns {
        ResolveResult::Bound(Namespace(n)) => Some(String::from_utf8_lossy(n).into_owned()),
        _ => None,
    }
}

fn expand(ns: Option<&str>, local: &str) -> String {
    match ns {
        Some(ns) => format!("{ns}{local}"),
        None => local.to_owned(),
    }
}

fn find_attr<'x>(attrs: &'x [Attr], ns: &str, local: &str) -> Option<&'x str> {
    attrs
        .iter()
        .find(|a| a.local == local && a.ns.as_deref() == Some(ns))
        .map(|a| a.value.as_str())
}

fn parse_entity_decls(doctype: &str) -> Vec<(String, String)> {
    let mut out = Vec::new();
    let mut rest = doctype;
    while let Some(i) = rest.find("<!ENTITY") {
        rest = &rest[i + "<!ENTITY".len()..];
        let trimmed = rest.trim_start();
        let name: String = trimmed
            .chars()
            .take_while(|c| !c.is_whitespace())
            .collect();
        let after = trimmed[name.len()..].trim_start();
        let Some(quote) = after.chars().next().filter(|c| *c == '"' || *c == '\'') else {
            continue;
        };
        if let Some(end) = after[1..].find(quote) {
            out.push((name, after[1..1 + end].to_owned()));
        }
    }
    out
}

fn unescape_entities(raw: &str, entities: &HashMap<String, String>) -> String {
    if !raw.contains('&') {
        return raw.to_owned();
    }
    let mut out = String::with_capacity(raw.len());
    let mut rest = raw;
    while let Some(i) = rest.find('&') {
        out.push_str(&rest[..i]);
        let tail = &rest[i + 1..];
        let Some(end) = tail.find(';') else {
            out.push_str(&rest[i..]);
            return out;
        };
        let name = &tail[..end];
        let replacement = match name {
            "lt" => Some("<".to_owned()),
            "gt" => Some(">".to_owned()),
            "amp" => Some("&".to_owned()),
            "quot" => Some("\"".to_owned()),
            "apos" => Some("'".to_owned()),
            _ if name.starts_with("#x") => u32::from_str_radix(&name[2..], 16)
                .ok()
                .and_then(char::from_u32)
                .map(String::from),
            _ if name.starts_with('#') => name[1..]
                .parse::<u32>()
                .ok()
                .and_then(char::from_u32)
                .map(String::from),
            _ => entities.get(name).cloned(),
        };
        match replacement {
            Some(r) => out.push_str(&r),
            None => {
                out.push('&');
                out.push_str(name);
                out.push(';');
            }
        }
        rest = &tail[end + 1..];
    }
    out.push_str(rest);
    out
}
