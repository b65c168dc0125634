use std::collections::{BTreeMap, BTreeSet, HashMap};

use aceterm::corpus::{read_mimic_notes, MIMIC_DISCHARGE_CATEGORY};
use aceterm::curation::{build_candidates, CandidateRow, ResolutionState};
use aceterm::fixtures::{generate_ontology, random_document, random_terminology, rng, OntologyShape, WordPool};
use aceterm::lexicon::{LexiconEntry, MatchKind};
use aceterm::report::{aggregate, emit, EmitFormat};
use aceterm::terminology::{merge_terminologies, save_terminology, Source, Status, TermEntry};
use aceterm::{
    annotate_corpus, parse_ontology, CompiledMatcher, CurationDecision, Cui, Document, Lexicon, MappingCandidateSet,
    Mention, OntologyClass, Terminology,
};
use chrono::{TimeZone, Utc};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

const WORDS: &[&str] = &["child", "abuse", "neglect", "anxiety", "household", "mental", "illness", "parent", "loss"];

fn cui(n: u32) -> Cui {
    format!("C{n:07}").parse().unwrap()
}

// ---------------------------------------------------------------------------
// ontology

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parse_counts_partition_and_idempotence(
        seed in any::<u64>(),
        classes in 1usize..80,
        leaf_frac in 0.0f64..1.0,
        p in 0usize..12,
        d in 0usize..5,
    ) {
        let leaves = ((classes as f64 * leaf_frac) as usize).clamp(1, classes);
        let shape = OntologyShape { classes, object_properties: p, data_properties: d, leaves };
        let mut r = rng(seed);
        let g = generate_ontology(&mut r, shape, &mut WordPool::new(), &[]);
        let graph = parse_ontology(g.xml.as_bytes()).unwrap();
        let stats = graph.stats();
        prop_assert_eq!((stats.classes, stats.object_properties, stats.data_properties), (classes, p, d));
        prop_assert_eq!(stats.leaves, leaves);

        let leaf_iris: BTreeSet<&str> = graph.extract_leaf_nodes().iter().map(|c| c.iri.as_str()).collect();
        let parents: BTreeSet<&str> = graph
            .classes
            .values()
            .flat_map(|c| c.parent_iris.iter().map(String::as_str))
            .filter(|p| graph.classes.contains_key(*p))
            .collect();
        prop_assert!(leaf_iris.is_disjoint(&parents));
        let union: BTreeSet<&str> = leaf_iris.union(&parents).copied().collect();
        let all: BTreeSet<&str> = graph.classes.keys().map(String::as_str).collect();
        prop_assert_eq!(union, all);

        prop_assert_eq!(parse_ontology(g.xml.as_bytes()).unwrap(), graph);
    }
}

// ---------------------------------------------------------------------------
// lexicon

fn random_lexicon(r: &mut impl Rng) -> Vec<LexiconEntry> {
    let mut out = Vec::new();
    for _ in 0..r.gen_range(1..40) {
        let n = r.gen_range(1..=3);
        let surface: Vec<&str> = (0..n).map(|_| *WORDS.choose(r).unwrap()).collect();
        out.push(LexiconEntry {
            cui: cui(r.gen_range(1..15)),
            surface_form: surface.join(" "),
            is_preferred: r.gen_bool(0.5),
            semantic_types: vec![],
        });
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn candidate_ranking_contract(seed in any::<u64>()) {
        let mut r = rng(seed);
        let mut entries = random_lexicon(&mut r);
        let n = r.gen_range(1..=3);
        let query: Vec<&str> = (0..n).map(|_| *WORDS.choose(&mut r).unwrap()).collect();
        let query = query.join(" ");
        let lex = Lexicon::from_entries(entries.clone());
        let list = lex.match_candidates(&query).unwrap();

        if list.candidates.iter().any(|c| c.match_kind == MatchKind::Exact) {
            prop_assert_eq!(list.candidates[0].match_kind, MatchKind::Exact);
            prop_assert_eq!(list.candidates[0].score, 1.0);
            prop_assert!(list.candidates.iter().all(|c| c.match_kind == MatchKind::Exact));
        }
        for c in &list.candidates {
            prop_assert!((0.0..=1.0).contains(&c.score));
        }
        for w in list.candidates.windows(2) {
            let key = |c: &aceterm::lexicon::Candidate| (std::cmp::Reverse((c.score * 1e9) as i64), !c.is_preferred, c.cui.clone());
            prop_assert!(key(&w[0]) < key(&w[1]), "not strictly ordered: {:?}", list.candidates);
        }
        let distinct: BTreeSet<&Cui> = list.candidates.iter().map(|c| &c.cui).collect();
        prop_assert_eq!(list.ambiguous, distinct.len() >= 2);

        let rerun = Lexicon::from_entries(entries.clone()).match_candidates(&query).unwrap();
        prop_assert_eq!(&rerun, &list);

        // ranking ignores entry order; only the display label follows file order
        entries.shuffle(&mut r);
        let shuffled = Lexicon::from_entries(entries).match_candidates(&query).unwrap();
        let rank = |l: &aceterm::CandidateList| -> Vec<(Cui, u64, MatchKind, bool)> {
            l.candidates.iter().map(|c| (c.cui.clone(), c.score.to_bits(), c.match_kind, c.is_preferred)).collect()
        };
        prop_assert_eq!(rank(&shuffled), rank(&list));
    }
}

// ---------------------------------------------------------------------------
// curation and terminology

fn candidate_set(r: &mut impl Rng) -> (MappingCandidateSet, Lexicon) {
    let lex = Lexicon::from_entries(random_lexicon(r));
    let classes: Vec<OntologyClass> = (0..r.gen_range(1..20))
        .map(|i| {
            let n = r.gen_range(1..=2);
            let label: Vec<&str> = (0..n).map(|_| *WORDS.choose(r).unwrap()).collect();
            OntologyClass {
                iri: format!("http://x#L{i:03}"),
                label: label.join(" "),
                parent_iris: BTreeSet::new(),
                annotations: BTreeMap::new(),
            }
        })
        .collect();
    let leaves: Vec<&OntologyClass> = classes.iter().collect();
    (build_candidates(&leaves, &lex).unwrap(), lex)
}

fn random_decisions(r: &mut impl Rng, set: &MappingCandidateSet, n: usize) -> Vec<CurationDecision> {
    let t0 = Utc.with_ymd_and_hms(2022, 1, 1, 0, 0, 0).unwrap();
    (0..n)
        .map(|_| {
            let row: &CandidateRow = set.rows.choose(r).unwrap();
            let ts = t0 + chrono::Duration::seconds(r.gen_range(0..1000));
            match row.candidates.candidates.choose(r) {
                Some(c) if r.gen_bool(0.6) => CurationDecision::accept(row.class_iri.clone(), c.cui.clone(), "p", ts),
                _ => CurationDecision::reject(row.class_iri.clone(), "p", ts),
            }
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn conservation_and_monotone_curation(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (set, _) = candidate_set(&mut r);
        let (n1, n2) = (r.gen_range(0..10), r.gen_range(0..10));
        let first = random_decisions(&mut r, &set, n1);
        let more = random_decisions(&mut r, &set, n2);
        let a = set.apply_decisions(&first).unwrap();
        let p = a.progress();
        prop_assert_eq!(p.accepted + p.rejected + p.unresolved, set.rows.len());
        let counted = a.rows.iter().filter(|r| r.state() == ResolutionState::Unresolved).count();
        prop_assert_eq!(counted, p.unresolved);

        let all: Vec<CurationDecision> = first.iter().chain(&more).cloned().collect();
        let b = set.apply_decisions(&all).unwrap();
        let named: BTreeSet<&str> = more.iter().map(|d| d.class_iri.as_str()).collect();
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            if !named.contains(ra.class_iri.as_str()) {
                prop_assert_eq!(ra, rb);
            }
        }
        // applying in two steps equals applying all at once
        prop_assert_eq!(a.apply_decisions(&more).unwrap(), b);
    }

    #[test]
    fn merge_cardinality_matches_set_union(seed in any::<u64>()) {
        let mut r = rng(seed);
        let mk = |r: &mut rand_chacha::ChaCha8Rng, source: Source| -> Vec<TermEntry> {
            let mut ids: Vec<u32> = (1..30).collect();
            ids.shuffle(r);
            ids.truncate(r.gen_range(0..20));
            ids.into_iter()
                .map(|i| {
                    let origin = source.includes_aceso().then(|| format!("http://x#{i}"));
                    TermEntry::new(cui(i), WORDS[i as usize % WORDS.len()], vec![], source, Status::Accepted, origin)
                })
                .collect()
        };
        let a = mk(&mut r, Source::Aceso);
        let b = mk(&mut r, Source::Project);
        let merged = merge_terminologies(&a, &b, "m");
        let mut union: Vec<&Cui> = Vec::new();
        for e in a.iter().chain(&b) {
            if !union.contains(&&e.cui) {
                union.push(&e.cui);
            }
        }
        let shared = a.iter().filter(|x| b.iter().any(|y| y.cui == x.cui)).count();
        prop_assert_eq!(merged.len(), union.len());
        prop_assert_eq!(merged.len(), a.len() + b.len() - shared);

        let mut one = Vec::new();
        let mut two = Vec::new();
        save_terminology(&merged, &mut one).unwrap();
        save_terminology(&merged, &mut two).unwrap();
        prop_assert_eq!(one, two);
    }
}

// ---------------------------------------------------------------------------
// annotator

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn raw_matches_grow_with_terminology(seed in any::<u64>()) {
        let mut r = rng(seed);
        let small = random_terminology(&mut r, "small", 15, WORDS);
        let extra = random_terminology(&mut r, "extra", 15, WORDS);
        let mut entries = small.entries.clone();
        for e in extra.entries {
            if small.get(&e.cui).is_none() {
                entries.push(e);
            }
        }
        let big = Terminology::new("big", entries).unwrap();
        let text = random_document(&mut r, WORDS, 1500);
        let ms = CompiledMatcher::compile(&small).unwrap().raw_matches("d", &text);
        let mb = CompiledMatcher::compile(&big).unwrap().raw_matches("d", &text);
        let mut counts: HashMap<&Mention, i64> = HashMap::new();
        for m in &mb {
            *counts.entry(m).or_default() += 1;
        }
        for m in &ms {
            let c = counts.entry(m).or_default();
            *c -= 1;
            prop_assert!(*c >= 0, "{:?} missing from superset", m);
        }
    }

    #[test]
    fn shared_matcher_is_order_and_thread_independent(seed in any::<u64>()) {
        let mut r = rng(seed);
        let t = random_terminology(&mut r, "t", 30, WORDS);
        let docs: Vec<Document> = (0..40).map(|i| Document::new(format!("d{i:03}"), random_document(&mut r, WORDS, 600))).collect();
        let m = CompiledMatcher::compile(&t).unwrap();
        let seq: Vec<Mention> = docs.iter().flat_map(|d| m.annotate(d)).collect();
        let par = annotate_corpus(docs.iter().cloned().map(Ok), &m, 4);
        prop_assert_eq!(par.mentions, seq);
    }
}

// ---------------------------------------------------------------------------
// corpus readers

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn reader_counts_are_conserved(seed in any::<u64>()) {
        let mut r = rng(seed);
        let mut csv = String::from("ROW_ID,SUBJECT_ID,HADM_ID,CHARTDATE,CHARTTIME,STORETIME,CATEGORY,DESCRIPTION,CGID,ISERROR,TEXT\n");
        let rows = r.gen_range(0..40);
        let mut bad = 0;
        for i in 0..rows {
            let category = ["Discharge summary", "Nursing", "Radiology", "discharge summary"].choose(&mut r).unwrap();
            let text = random_document(&mut r, WORDS, 200).replace('"', "\"\"");
            if r.gen_bool(0.1) {
                bad += 1;
                csv.push_str(&format!("{i},1,2,d,,,{category},R,,,\"{text}\",extra\n"));
            } else {
                csv.push_str(&format!("{i},1,2,d,,,{category},R,,,\"{text}\"\n"));
            }
        }
        let mut reader = read_mimic_notes(csv.as_bytes()).unwrap();
        let mut yielded = 0;
        let mut errors = 0;
        for d in reader.by_ref() {
            match d {
                Ok(d) => {
                    prop_assert_eq!(d.group.as_str(), MIMIC_DISCHARGE_CATEGORY);
                    yielded += 1;
                }
                Err(_) => errors += 1,
            }
        }
        let s = reader.stats();
        prop_assert_eq!(s.read, rows);
        prop_assert_eq!(s.yielded, yielded);
        prop_assert_eq!(s.malformed, errors);
        prop_assert_eq!(s.malformed, bad);
        prop_assert_eq!(s.read, s.yielded + s.filtered + s.malformed);
    }
}

// ---------------------------------------------------------------------------
// reports

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn aggregation_equals_group_by(seed in any::<u64>()) {
        let mut r = rng(seed);
        let t = random_terminology(&mut r, "t", 20, WORDS);
        let accepted: Vec<&TermEntry> = t.accepted().collect();
        let mentions: Vec<Mention> = (0..r.gen_range(0..200))
            .map(|_| {
                let e = accepted.choose(&mut r).unwrap();
                Mention {
                    doc_id: format!("d{}", r.gen_range(0..15)),
                    cui: e.cui.clone(),
                    start_char: 0,
                    end_char: 1,
                    surface: "x".into(),
                    pattern: "x".into(),
                }
            })
            .collect();
        let report = aggregate(&mentions, &t, "c", 20).unwrap();

        let mut by_cui: BTreeMap<&Cui, (u64, BTreeSet<&str>)> = BTreeMap::new();
        for m in &mentions {
            let slot = by_cui.entry(&m.cui).or_default();
            slot.0 += 1;
            slot.1.insert(&m.doc_id);
        }
        prop_assert_eq!(report.concept_count, accepted.len());
        prop_assert_eq!(report.total_mentions, mentions.len() as u64);
        for row in &report.rows {
            let (n, docs) = by_cui.get(&row.cui).map(|(n, d)| (*n, d.len() as u64)).unwrap_or((0, 0));
            prop_assert_eq!((row.mention_count, row.document_count), (n, docs));
        }
        for w in report.rows.windows(2) {
            prop_assert!((std::cmp::Reverse(w[0].mention_count), &w[0].cui) < (std::cmp::Reverse(w[1].mention_count), &w[1].cui));
        }
        for format in [EmitFormat::Csv, EmitFormat::Json, EmitFormat::PlotData { top: Some(5) }] {
            let mut a = Vec::new();
            let mut b = Vec::new();
            emit(&report, format, &mut a).unwrap();
            emit(&report.clone(), format, &mut b).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
