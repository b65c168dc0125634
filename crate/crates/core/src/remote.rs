//! Cached adapter for a remote UMLS search service.
//!
//! Each distinct normalized label is sent to the service at most once. The raw
//! response body is stored under the cache directory in a file named by the
//! SHA-256 hex digest of the normalized label, so later runs reproduce the
//! same candidate lists without network access.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read as _, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::cui::Cui;
use crate::lexicon::{Candidate, CandidateList, CandidateSource, MatchError, MatchKind};
use crate::text::{normalize, normalized_tokens};

/// Environment variable holding the API key for [`HttpTransport`].
pub const API_KEY_ENV: &str = "ACETERM_UMLS_API_KEY";

pub const DEFAULT_SEARCH_URL: &str = "https://uts-ws.nlm.nih.gov/rest/search/current";

/// Fetches the raw search response for one normalized label.
pub trait MatchTransport: Send + Sync {
    fn fetch(&self, normalized_label: &str) -> Result<Vec<u8>, String>;
}

/// UTS-style REST search: `GET <url>?string=<label>&apiKey=<key>`.
pub struct HttpTransport {
    url: String,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(url: impl Into<String>, api_key: Option<String>) -> Self {
        HttpTransport {
            url: url.into(),
            api_key,
            agent: ureq::AgentBuilder::new()
                .timeout(std::time::Duration::from_secs(30))
                .build(),
        }
    }

    /// Reads the key from [`API_KEY_ENV`].
    pub fn from_env(url: impl Into<String>) -> Self {
        Self::new(url, std::env::var(API_KEY_ENV).ok())
    }
}

impl MatchTransport for HttpTransport {
    fn fetch(&self, normalized_label: &str) -> Result<Vec<u8>, String> {
        let mut req = self
            .agent
            .get(&self.url)
            .query("string", normalized_label)
            .query("returnIdType", "concept");
        if let Some(key) = &self.api_key {
            req = req.query("apiKey", key);
        }
        // the request URL carries the key, so errors are reported without it
        let resp = req.call().map_err(|e| match e {
            ureq::Error::Status(code, _) => format!("HTTP status {code}"),
            ureq::Error::Transport(t) => format!("transport error: {}", t.kind()),
        })?;
        let mut body = Vec::new();
        resp.into_reader()
            .read_to_end(&mut body)
            .map_err(|e| format!("reading response: {e}"))?;
        Ok(body)
    }
}


#[derive(Deserialize)]
struct SearchResponse {
    result: SearchResult,
}

#[derive(Deserialize)]
struct SearchResult {
    #[serde(default)]
    results: Vec<SearchHit>,
}

#[derive(Deserialize)]
struct SearchHit {
    ui: String,
    name: String,
}

pub struct RemoteMatcher {
    transport: Box<dyn MatchTransport>,
    cache_dir: PathBuf,
    write_lock: Mutex<()>,
}

impl RemoteMatcher {
    pub fn new(transport: Box<dyn MatchTransport>, cache_dir: impl Into<PathBuf>) -> Self {
        RemoteMatcher {
            transport,
            cache_dir: cache_dir.into(),
            write_lock: Mutex::new(()),
        }
    }

    pub fn cache_path(&self, normalized_label: &str) -> PathBuf {
        cache_path(&self.cache_dir, normalized_label)
    }

    /// Candidates for `label`, from cache when present.
    pub fn remote_match(&self, label: &str) -> Result<CandidateList, MatchError> {
        let norm = normalize(label);
        if norm.is_empty() {
            return Err(MatchError::InvalidQuery(label.to_owned()));
        }
        let path = self.cache_path(&norm);
        let body = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                let body = self
                    .transport
                    .fetch(&norm)
                    .map_err(|cause| MatchError::Remote {
                        label: label.to_owned(),
                        cause,
                    })?;
                // reject unusable responses before they poison the cache
                parse_response(label, &body).map_err(|cause| MatchError::Remote {
                    label: label.to_owned(),
                    cause,
                })?;
                self.store(&path, &body)?;
                body
            }
            Err(e) => return Err(MatchError::Cache(format!("{}: {e}", path.display()))),
        };
        parse_response(label, &body)
            .map_err(|e| MatchError::Cache(format!("{}: {e}", path.display())))
    }

    fn store(&self, path: &Path, body: &[u8]) -> Result<(), MatchError> {
        let _guard = self.write_lock.lock().unwrap_or_else(|p| p.into_inner());
        let cache_err = |e: std::io::Error| MatchError::Cache(format!("{}: {e}", path.display()));
        fs::create_dir_all(&self.cache_dir).map_err(cache_err)?;
        let tmp = path.with_extension("tmp");
        let mut f = fs::File::create(&tmp).map_err(cache_err)?;
        f.write_all(body).map_err(cache_err)?;
        f.sync_all().map_err(cache_err)?;
        fs::rename(&tmp, path).map_err(cache_err)
    }
}

impl CandidateSource for RemoteMatcher {
    fn candidates(&self, label: &str) -> Result<CandidateList, MatchError> {
        self.remote_match(label)
    }
}

pub fn cache_path(dir: &Path, normalized_label: &str) -> PathBuf {
    let digest = Sha256::digest(normalized_label.as_bytes());
    dir.join(format!("{}.json", hex::encode(digest)))
}

/// Scores service hits the same way as the local lexicon: 1.0 for a name that
/// normalizes to the query, token-set Jaccard otherwise. The service already
/// filtered for relevance, so no threshold is applied.
fn parse_response(label: &str, body: &[u8]) -> Result<CandidateList, String> {
    let resp: SearchResponse = serde_json::from_slice(body).map_err(|e| e.to_string())?;
    let norm = normalize(label);
    let mut query = normalized_tokens(&norm);
    query.sort();
    query.dedup();

    let mut best: BTreeMap<Cui, Candidate> = BTreeMap::new();
    for hit in resp.result.results {
        let Ok(cui) = hit.ui.parse::<Cui>() else {
            // "NONE" marks an empty result page
            continue;
        };
        let hit_norm = normalize(&hit.name);
        let (score, kind) = if hit_norm == norm {
            (1.0, MatchKind::Exact)
        } else {
            let mut toks = normalized_tokens(&hit_norm);
            toks.sort();
            toks.dedup();
            (crate::lexicon::jaccard_sorted(&query, &toks), MatchKind::Partial)
        };
        let cand = Candidate {
            cui: cui.clone(),
            preferred_label: hit.name,
            score,
            match_kind: kind,
            is_preferred: true,
        };
        match best.get(&cui) {
            Some(existing) if existing.score >= score => {}
            _ => {
                best.insert(cui, cand);
            }
        }
    }
    let mut candidates: Vec<Candidate> = best.into_values().collect();
    if candidates.iter().any(|c| c.match_kind == MatchKind::Exact) {
        candidates.retain(|c| c.match_kind == MatchKind::Exact);
    }
    Ok(CandidateList::from_candidates(label, candidates))
}
