//! `aceterm` command-line pipeline.
//!
//! Exit status: 0 on success, 1 on bad input or usage, 2 on internal failure.
//! Data goes to stdout or `--out`; diagnostics go to stderr.

mod mentions;

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use aceterm::annotator::{annotate_stream, DocumentMentions};
use aceterm::corpus::{DocumentReader, ReaderConfig, RecordError, TableFormat};
use aceterm::curation::{build_candidates, read_decision_log};
use aceterm::fixtures::{write_bundle, BundleOptions};
use aceterm::lexicon::{load_lexicon, CandidateSource};
use aceterm::ontology::OntologyStats;
use aceterm::remote::{HttpTransport, RemoteMatcher, API_KEY_ENV, DEFAULT_SEARCH_URL};
use aceterm::report::{compare, emit, load_report, write_comparison_table, Aggregator, EmitFormat};
use aceterm::terminology::{load_project_terms, load_terminology, merge_terminologies, save_terminology, TermEntry};
use aceterm::{parse_ontology, CompiledMatcher, Lexicon, MappingCandidateSet};
use aceterm_curation::{load_candidate_set, CurationSession, SessionError, SessionOptions};
use clap::{Args, Parser, Subcommand, ValueEnum};

use mentions::{read_mentions, MentionFormat, MentionWriter};

#[derive(Parser)]
#[command(name = "aceterm", version, about = "Compile an ontology into a terminology and count its mentions in text corpora")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ontology inspection.
    #[command(subcommand)]
    Ontology(OntologyCmd),
    /// Candidate mapping of ontology leaves to UMLS concepts.
    #[command(subcommand)]
    Map(MapCmd),
    /// Mapping review service.
    #[command(subcommand)]
    Curate(CurateCmd),
    /// Terminology assembly.
    #[command(subcommand)]
    Terminology(TerminologyCmd),
    /// Find terminology mentions in a corpus.
    Annotate(AnnotateArgs),
    /// Frequency reports.
    #[command(subcommand)]
    Report(ReportCmd),
    /// Synthetic test data.
    #[command(subcommand)]
    Fixtures(FixturesCmd),
}

#[derive(Subcommand)]
enum OntologyCmd {
    /// Class, property and leaf counts.
    Stats {
        /// RDF/XML file; stdin when omitted or `-`.
        ontology: Option<PathBuf>,
        #[arg(long)]
        json: bool,
        /// Report (on stderr) where the counts differ from the published ACESO release.
        #[arg(long)]
        expect_aceso: bool,
    },
    /// Leaf classes, one `iri<TAB>label` per line.
    Leaves {
        ontology: Option<PathBuf>,
        #[arg(long)]
        json: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum MapCmd {
    /// Build the candidate table for every ontology leaf.
    Candidates {
        #[arg(long)]
        ontology: PathBuf,
        /// Local lexicon TSV.
        #[arg(long, conflicts_with = "remote")]
        lexicon: Option<PathBuf>,
        /// Query the remote search service instead of a lexicon. The API key is
        /// read from the ACETERM_UMLS_API_KEY environment variable.
        #[arg(long, requires = "cache")]
        remote: bool,
        #[arg(long, default_value = DEFAULT_SEARCH_URL)]
        endpoint: String,
        /// Response cache directory for --remote.
        #[arg(long)]
        cache: Option<PathBuf>,
        /// Drop leaves that received no candidate.
        #[arg(long)]
        only_matched: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum CurateCmd {
    /// Serve the review API and UI.
    Serve {
        #[arg(long)]
        candidates: PathBuf,
        #[arg(long)]
        log: PathBuf,
        #[arg(long, default_value = aceterm_curation::DEFAULT_ADDR)]
        addr: String,
        /// Lexicon whose surface forms become synonyms in the preview.
        #[arg(long)]
        lexicon: Option<PathBuf>,
        /// Project terms merged into the preview.
        #[arg(long)]
        project_terms: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum TerminologyCmd {
    /// Apply curation decisions and merge project terms.
    Build {
        #[arg(long, requires = "decisions")]
        candidates: Option<PathBuf>,
        #[arg(long)]
        decisions: Option<PathBuf>,
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(long)]
        project_terms: Option<PathBuf>,
        #[arg(long, default_value = "combined")]
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CorpusFormat {
    /// NOTEEVENTS CSV, discharge summaries only.
    Mimic,
    RedditCsv,
    RedditJsonl,
    /// Any CSV table; see --text-field.
    Csv,
    /// Any JSON-lines table; see --text-field.
    Jsonl,
}

#[derive(Args)]
struct AnnotateArgs {
    /// Corpus file.
    input: PathBuf,
    #[arg(long)]
    terminology: PathBuf,
    #[arg(long, value_enum)]
    format: CorpusFormat,
    /// Text column (default: TEXT for mimic, post otherwise).
    #[arg(long)]
    text_field: Option<String>,
    /// Grouping column (default: subreddit for Reddit tables).
    #[arg(long)]
    group_field: Option<String>,
    /// Document id column; record numbers are used when absent.
    #[arg(long)]
    id_field: Option<String>,
    /// Stop after this many documents.
    #[arg(long)]
    limit: Option<u64>,
    /// Worker threads (default: available cores).
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    workers: Option<u32>,
    #[arg(long, value_enum, default_value = "jsonl")]
    output_format: MentionFormat,
    /// Mention output; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a frequency report (JSON) for this run.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Run counters as JSON.
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Corpus name recorded in the report (default: file stem).
    #[arg(long)]
    corpus_name: Option<String>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Csv,
    Json,
    Plotdata,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CompareFormat {
    Table,
    Json,
}

#[derive(Subcommand)]
enum ReportCmd {
    /// Per-concept counts from a mention file.
    Aggregate {
        /// Mention file (JSON lines or TSV).
        mentions: PathBuf,
        #[arg(long)]
        terminology: PathBuf,
        /// Summary written by `annotate --summary`, for the document count.
        #[arg(long, conflicts_with = "documents")]
        summary: Option<PathBuf>,
        /// Documents processed; defaults to the number of documents with mentions.
        #[arg(long)]
        documents: Option<u64>,
        #[arg(long)]
        corpus_name: Option<String>,
        #[arg(long, value_enum, default_value = "json")]
        format: ReportFormat,
        /// Rows kept in plotdata output.
        #[arg(long)]
        top: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-concept deltas between two JSON reports.
    Compare {
        left: PathBuf,
        right: PathBuf,
        #[arg(long, value_enum, default_value = "table")]
        format: CompareFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum FixturesCmd {
    /// Write a seeded fixture bundle into a directory.
    Generate {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        mimic_documents: Option<usize>,
        #[arg(long)]
        reddit_posts: Option<usize>,
        /// Approximate size of each discharge summary in bytes.
        #[arg(long)]
        doc_bytes: Option<usize>,
    },
}

// ---------------------------------------------------------------------------

enum Failure {
    Input(anyhow::Error),
    Internal(anyhow::Error),
}

type Outcome = Result<(), Failure>;

trait Classify<T> {
    fn input(self, what: impl std::fmt::Display) -> Result<T, Failure>;
    fn internal(self, what: impl std::fmt::Display) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn input(self, what: impl std::fmt::Display) -> Result<T, Failure> {
        self.map_err(|e| Failure::Input(e.into().context(what.to_string())))
    }

    fn internal(self, what: impl std::fmt::Display) -> Result<T, Failure> {
        self.map_err(|e| Failure::Internal(e.into().context(what.to_string())))
    }
}

fn bad_input(msg: impl std::fmt::Display) -> Failure {
    Failure::Input(anyhow::anyhow!("{msg}"))
}

fn open_input(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path).map(BufReader::new).input(path.display())
}

fn require_files(paths: &[&Path]) -> Outcome {
    for p in paths {
        if !p.is_file() {
            return Err(bad_input(format!("{}: no such file", p.display())));
        }
    }
    Ok(())
}

/// stdin for `None` or `-`.
fn open_source(path: Option<&Path>) -> Result<Box<dyn Read>, Failure> {
    match path {
        None => Ok(Box::new(io::stdin().lock())),
        Some(p) if p.as_os_str() == "-" => Ok(Box::new(io::stdin().lock())),
        Some(p) => Ok(Box::new(open_input(p)?)),
    }
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    match path {
        None => Ok(Box::new(BufWriter::new(io::stdout().lock()))),
        Some(p) => Ok(Box::new(BufWriter::new(File::create(p).input(p.display())?))),
    }
}

fn write_json<T: serde::Serialize>(value: &T, out: Option<&Path>) -> Outcome {
    let mut w = open_out(out)?;
    serde_json::to_writer_pretty(&mut w, value).internal("writing output")?;
    w.write_all(b"\n").internal("writing output")?;
    w.flush().internal("writing output")
}

fn load_lexicon_file(path: &Path) -> Result<Lexicon, Failure> {
    load_lexicon(open_input(path)?).input(path.display())
}

fn load_project_file(path: &Path) -> Result<Vec<TermEntry>, Failure> {
    load_project_terms(open_input(path)?).input(path.display())
}

// ---------------------------------------------------------------------------

fn ontology_stats(path: Option<&Path>, json: bool, expect_aceso: bool) -> Outcome {
    let graph = parse_ontology(open_source(path)?).input("parsing ontology")?;
    if !graph.dangling_parent_iris.is_empty() {
        log::warn!("{} parent IRIs are referenced but not declared", graph.dangling_parent_iris.len());
    }
    let stats = graph.stats();
    if expect_aceso {
        for (name, got, want) in stats.differences(&OntologyStats::ACESO_REFERENCE) {
            eprintln!("note: {name}={got} differs from the published ACESO count {want}");
        }
    }
    let mut w = open_out(None)?;
    if json {
        serde_json::to_writer_pretty(&mut w, &stats).internal("writing output")?;
        writeln!(w).internal("writing output")?;
    } else {
        writeln!(
            w,
            "classes={}\nobject_properties={}\ndata_properties={}\nleaves={}",
            stats.classes, stats.object_properties, stats.data_properties, stats.leaves
        )
        .internal("writing output")?;
    }
    w.flush().internal("writing output")
}

fn ontology_leaves(path: Option<&Path>, json: bool, out: Option<&Path>) -> Outcome {
    let graph = parse_ontology(open_source(path)?).input("parsing ontology")?;
    let leaves = graph.extract_leaf_nodes();
    if json {
        return write_json(&leaves, out);
    }
    let mut w = open_out(out)?;
    for c in leaves {
        writeln!(w, "{}\t{}", c.iri, c.label).internal("writing output")?;
    }
    w.flush().internal("writing output")
}

#[allow(clippy::too_many_arguments)]
fn map_candidates(
    ontology: &Path,
    lexicon: Option<&Path>,
    remote: bool,
    endpoint: &str,
    cache: Option<&Path>,
    only_matched: bool,
    out: Option<&Path>,
) -> Outcome {
    require_files(&[ontology])?;
    let matcher: Box<dyn CandidateSource> = match (lexicon, remote) {
        (Some(l), false) => Box::new(load_lexicon_file(l)?),
        (None, true) => {
            let dir = cache.expect("clap enforces --cache");
            std::fs::create_dir_all(dir).input(dir.display())?;
            if std::env::var_os(API_KEY_ENV).is_none() {
                log::warn!("{API_KEY_ENV} is not set; only cached labels will resolve");
            }
            Box::new(RemoteMatcher::new(Box::new(HttpTransport::from_env(endpoint)), dir))
        }
        _ => return Err(bad_input("one of --lexicon or --remote is required")),
    };
    let graph = parse_ontology(open_input(ontology)?).input(ontology.display())?;
    let leaves = graph.extract_leaf_nodes();
    let set = build_candidates(&leaves, matcher.as_ref())
        .input("matching leaf labels")?
        .with_context(&graph);
    let total = set.rows.len();
    let matched = set.rows_with_candidates();
    let ambiguous = set.rows.iter().filter(|r| r.candidates.ambiguous).count();
    eprintln!("leaves={total} with_candidates={matched} ambiguous={ambiguous}");
    let set = if only_matched {
        MappingCandidateSet::new(set.rows.into_iter().filter(|r| !r.candidates.is_empty()).collect())
            .internal("filtering rows")?
    } else {
        set
    };
    let mut w = open_out(out)?;
    set.save(&mut w).internal("writing candidates")?;
    w.flush().internal("writing candidates")
}

fn curate_serve(
    candidates: &Path,
    log_path: &Path,
    addr: &str,
    lexicon: Option<&Path>,
    project_terms: Option<&Path>,
) -> Outcome {
    require_files(&[candidates])?;
    let set = load_candidate_set(candidates).input("loading candidates")?;
    let options = SessionOptions {
        lexicon: lexicon.map(load_lexicon_file).transpose()?,
        project_terms: project_terms.map(load_project_file).transpose()?.unwrap_or_default(),
        terminology_name: None,
    };
    let session = match CurationSession::open(set, log_path, options) {
        Ok(s) => Arc::new(s),
        Err(e @ (SessionError::Locked(_) | SessionError::Log { .. })) => return Err(Failure::Input(e.into())),
        Err(e) => return Err(Failure::Internal(e.into())),
    };
    if session.replayed() > 0 {
        eprintln!("replayed {} decisions from {}", session.replayed(), log_path.display());
    }
    let rt = tokio::runtime::Runtime::new().internal("starting runtime")?;
    rt.block_on(async move {
        let handle = aceterm_curation::serve(session, addr).await.input(format!("binding {addr}"))?;
        eprintln!("listening on http://{}", handle.local_addr);
        tokio::select! {
            r = tokio::signal::ctrl_c() => {
                r.internal("waiting for signal")?;
                eprintln!("shutting down");
                handle.shutdown().await.internal("server")
            }
        }
    })
}

fn terminology_build(
    candidates: Option<&Path>,
    decisions: Option<&Path>,
    lexicon: Option<&Path>,
    project_terms: Option<&Path>,
    name: &str,
    out: Option<&Path>,
) -> Outcome {
    let inputs: Vec<&Path> = [candidates, decisions, lexicon, project_terms].into_iter().flatten().collect();
    require_files(&inputs)?;
    if candidates.is_none() && project_terms.is_none() {
        return Err(bad_input("nothing to build: give --candidates/--decisions and/or --project-terms"));
    }
    let lexicon = lexicon.map(load_lexicon_file).transpose()?;
    let aceso = match (candidates, decisions) {
        (Some(c), Some(d)) => {
            let set = load_candidate_set(c).input("loading candidates")?;
            let log = read_decision_log(open_input(d)?).input(d.display())?;
            let curated = set.apply_decisions(&log).input("applying decisions")?;
            let p = curated.progress();
            eprintln!(
                "rows={} accepted={} rejected={} unresolved={}",
                p.total, p.accepted, p.rejected, p.unresolved
            );
            curated.accepted_terms(lexicon.as_ref())
        }
        _ => Vec::new(),
    };
    let project = project_terms.map(load_project_file).transpose()?.unwrap_or_default();
    let t = merge_terminologies(&aceso, &project, name);
    eprintln!("aceso_terms={} project_terms={} entries={}", aceso.len(), project.len(), t.len());
    let mut w = open_out(out)?;
    save_terminology(&t, &mut w).internal("writing terminology")?;
    w.flush().internal("writing terminology")
}

fn reader_config(a: &AnnotateArgs, name: &str) -> ReaderConfig {
    let mut c = match a.format {
        CorpusFormat::Mimic => ReaderConfig::mimic(),
        CorpusFormat::RedditCsv => ReaderConfig::reddit(TableFormat::Csv, name),
        CorpusFormat::RedditJsonl => ReaderConfig::reddit(TableFormat::Jsonl, name),
        CorpusFormat::Csv => ReaderConfig::generic(TableFormat::Csv, "text", name),
        CorpusFormat::Jsonl => ReaderConfig::generic(TableFormat::Jsonl, "text", name),
    };
    if let Some(t) = &a.text_field {
        c.text_column = t.clone();
    }
    if let Some(g) = &a.group_field {
        c.group_column = Some(g.clone());
    }
    if let Some(i) = &a.id_field {
        c.id_column = Some(i.clone());
    }
    c
}

/// Passes errors through and stops after `limit` documents.
struct Limited<I> {
    inner: I,
    left: u64,
}

impl<I: Iterator<Item = Result<aceterm::Document, RecordError>>> Iterator for Limited<I> {
    type Item = I::Item;

    fn next(&mut self) -> Option<I::Item> {
        if self.left == 0 {
            return None;
        }
        let item = self.inner.next()?;
        if item.is_ok() {
            self.left -= 1;
        }
        Some(item)
    }
}

fn annotate(a: &AnnotateArgs) -> Outcome {
    require_files(&[&a.input, &a.terminology])?;
    let workers = match a.workers {
        Some(w) => w as usize,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let t = load_terminology(open_input(&a.terminology)?).input(a.terminology.display())?;
    let matcher = CompiledMatcher::compile(&t).input(a.terminology.display())?;
    let corpus_name = a.corpus_name.clone().unwrap_or_else(|| {
        a.input.file_stem().map_or("corpus".into(), |s| s.to_string_lossy().into_owned())
    });
    let source = File::open(&a.input).input(a.input.display())?;
    let mut reader = DocumentReader::new(BufReader::with_capacity(1 << 20, source), reader_config(a, &corpus_name))
        .input(a.input.display())?;

    let mut writer = MentionWriter::new(open_out(a.out.as_deref())?, a.output_format).internal("writing mentions")?;
    let mut aggregator = a.report.as_ref().map(|_| Aggregator::new(&t));
    let mut with_mentions = 0u64;
    let started = Instant::now();
    let limited = Limited {
        inner: reader.by_ref(),
        left: a.limit.unwrap_or(u64::MAX),
    };
    let summary = annotate_stream(
        limited,
        &matcher,
        workers,
        |d: DocumentMentions| {
            if !d.mentions.is_empty() {
                with_mentions += 1;
            }
            if let Some(agg) = aggregator.as_mut() {
                agg.add_document(&d.mentions).map_err(io::Error::other)?;
            }
            for m in &d.mentions {
                writer.write(m)?;
            }
            Ok(())
        },
        |e| log::warn!("skipping {e}"),
    )
    .internal("annotating")?;
    writer.finish().internal("writing mentions")?;
    let elapsed = started.elapsed().as_secs_f64();
    let stats = reader.stats();
    let mb_per_s = summary.text_bytes as f64 / 1e6 / elapsed.max(1e-9);
    eprintln!(
        "documents={} skipped={} filtered={} mentions={} documents_with_mentions={} bytes={} seconds={:.3} throughput_mb_s={:.1}",
        summary.documents, summary.skipped, stats.filtered, summary.mentions, with_mentions, summary.text_bytes, elapsed, mb_per_s
    );
    if let (Some(path), Some(agg)) = (&a.report, aggregator) {
        let report = agg.finish(&corpus_name, summary.documents);
        let mut w = open_out(Some(path))?;
        emit(&report, EmitFormat::Json, &mut w).internal("writing report")?;
    }
    if let Some(path) = &a.summary {
        let value = serde_json::json!({
            "corpus_name": corpus_name,
            "terminology_name": t.name,
            "workers": workers,
            "documents": summary.documents,
            "skipped": summary.skipped,
            "filtered": stats.filtered,
            "mentions": summary.mentions,
            "documents_with_mentions": with_mentions,
            "text_bytes": summary.text_bytes,
            "seconds": elapsed,
        });
        write_json(&value, Some(path))?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn report_aggregate(
    mentions: &Path,
    terminology: &Path,
    summary: Option<&Path>,
    documents: Option<u64>,
    corpus_name: Option<&str>,
    format: ReportFormat,
    top: Option<usize>,
    out: Option<&Path>,
) -> Outcome {
    let mut inputs = vec![mentions, terminology];
    inputs.extend(summary);
    require_files(&inputs)?;
    let t = load_terminology(open_input(terminology)?).input(terminology.display())?;
    let ms = read_mentions(open_input(mentions)?).input(mentions.display())?;
    let documents = match (summary, documents) {
        (Some(p), _) => {
            let v: serde_json::Value = serde_json::from_reader(open_input(p)?).input(p.display())?;
            v["documents"]
                .as_u64()
                .ok_or_else(|| bad_input(format!("{}: no \"documents\" count", p.display())))?
        }
        (None, Some(n)) => n,
        (None, None) => {
            let mut ids: Vec<&str> = ms.iter().map(|m| m.doc_id.as_str()).collect();
            ids.sort_unstable();
            ids.dedup();
            log::warn!("document count not given; using the {} documents that have mentions", ids.len());
            ids.len() as u64
        }
    };
    let name = corpus_name
        .map(str::to_owned)
        .unwrap_or_else(|| mentions.file_stem().map_or("corpus".into(), |s| s.to_string_lossy().into_owned()));
    let report = aceterm::report::aggregate(&ms, &t, &name, documents).input("aggregating")?;
    let format = match format {
        ReportFormat::Csv => EmitFormat::Csv,
        ReportFormat::Json => EmitFormat::Json,
        ReportFormat::Plotdata => EmitFormat::PlotData { top },
    };
    let mut w = open_out(out)?;
    emit(&report, format, &mut w).internal("writing report")
}

fn report_compare(left: &Path, right: &Path, format: CompareFormat, out: Option<&Path>) -> Outcome {
    require_files(&[left, right])?;
    let a = load_report(open_input(left)?).input(left.display())?;
    let b = load_report(open_input(right)?).input(right.display())?;
    let c = compare(&a, &b);
    match format {
        CompareFormat::Json => write_json(&c, out),
        CompareFormat::Table => {
            let mut w = open_out(out)?;
            write_comparison_table(&c, &mut w).internal("writing comparison")?;
            w.flush().internal("writing comparison")
        }
    }
}

fn fixtures_generate(
    seed: u64,
    out: &Path,
    mimic_documents: Option<usize>,
    reddit_posts: Option<usize>,
    doc_bytes: Option<usize>,
) -> Outcome {
    let mut options = BundleOptions {
        seed,
        ..BundleOptions::default()
    };
    if let Some(n) = mimic_documents {
        options.mimic_documents = n;
    }
    if let Some(n) = reddit_posts {
        options.reddit_posts = n;
    }
    if let Some(n) = doc_bytes {
        options.mimic_doc_bytes = n;
    }
    let manifest = write_bundle(out, options).internal(out.display())?;
    eprintln!(
        "wrote {} (mimic documents={} mentions={}, reddit posts={} mentions={})",
        out.display(),
        manifest.mimic.documents,
        manifest.mimic.total_mentions,
        manifest.reddit.documents,
        manifest.reddit.total_mentions
    );
    Ok(())
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Ontology(OntologyCmd::Stats { ontology, json, expect_aceso }) => {
            ontology_stats(ontology.as_deref(), json, expect_aceso)
        }
        Command::Ontology(OntologyCmd::Leaves { ontology, json, out }) => {
            ontology_leaves(ontology.as_deref(), json, out.as_deref())
        }
        Command::Map(MapCmd::Candidates { ontology, lexicon, remote, endpoint, cache, only_matched, out }) => map_candidates(
            &ontology,
            lexicon.as_deref(),
            remote,
            &endpoint,
            cache.as_deref(),
            only_matched,
            out.as_deref(),
        ),
        Command::Curate(CurateCmd::Serve { candidates, log, addr, lexicon, project_terms }) => {
            curate_serve(&candidates, &log, &addr, lexicon.as_deref(), project_terms.as_deref())
        }
        Command::Terminology(TerminologyCmd::Build { candidates, decisions, lexicon, project_terms, name, out }) => {
            terminology_build(
                candidates.as_deref(),
                decisions.as_deref(),
                lexicon.as_deref(),
                project_terms.as_deref(),
                &name,
                out.as_deref(),
            )
        }
        Command::Annotate(a) => annotate(&a),
        Command::Report(ReportCmd::Aggregate { mentions, terminology, summary, documents, corpus_name, format, top, out }) => {
            report_aggregate(
                &mentions,
                &terminology,
                summary.as_deref(),
                documents,
                corpus_name.as_deref(),
                format,
                top,
                out.as_deref(),
            )
        }
        Command::Report(ReportCmd::Compare { left, right, format, out }) => {
            report_compare(&left, &right, format, out.as_deref())
        }
        Command::Fixtures(FixturesCmd::Generate { seed, out, mimic_documents, reddit_posts, doc_bytes }) => {
            fixtures_generate(seed, &out, mimic_documents, reddit_posts, doc_bytes)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Internal(e)) => {
            eprintln!("internal error: {e:#}");
            ExitCode::from(2)
        }
    }
}
