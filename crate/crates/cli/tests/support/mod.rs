#![allow(dead_code)]

use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Child, Command, Output, Stdio};
use std::time::{Duration, Instant};

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_aceterm"))
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn aceterm")
}

pub fn run_ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "aceterm {:?} failed ({:?}):\n{}",
        args,
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Runs the fixture pipeline up to a combined terminology in `dir`.
pub fn build_pipeline(dir: &Path, seed: u64, mimic_documents: usize) {
    let seed = seed.to_string();
    let n = mimic_documents.to_string();
    run_ok(&["fixtures", "generate", "--seed", &seed, "--out", p(dir), "--mimic-documents", &n]);
    let f = |name: &str| dir.join(name);
    run_ok(&[
        "map", "candidates",
        "--ontology", p(&f("ontology.owl")),
        "--lexicon", p(&f("lexicon.tsv")),
        "--out", p(&f("candidates.json")),
    ]);
    run_ok(&[
        "terminology", "build",
        "--candidates", p(&f("candidates.json")),
        "--decisions", p(&f("decisions.jsonl")),
        "--lexicon", p(&f("lexicon.tsv")),
        "--project-terms", p(&f("project_terms.json")),
        "--out", p(&f("combined.json")),
    ]);
}

/// A `curate serve` child process and the address it reported.
pub struct Server {
    pub child: Child,
    pub base: String,
}

impl Server {
    pub fn start(candidates: &Path, log: &Path) -> Result<Server, String> {
        let mut child = bin()
            .args(["curate", "serve", "--candidates", p(candidates), "--log", p(log), "--addr", "127.0.0.1:0"])
            .stderr(Stdio::piped())
            .stdout(Stdio::null())
            .spawn()
            .expect("spawn server");
        let stderr = child.stderr.take().unwrap();
        let mut lines = BufReader::new(stderr).lines();
        let deadline = Instant::now() + Duration::from_secs(30);
        let mut seen = String::new();
        while Instant::now() < deadline {
            match lines.next() {
                Some(Ok(line)) => {
                    if let Some(addr) = line.strip_prefix("listening on ") {
                        let base = addr.trim().to_owned();
                        // keep draining stderr so the child never blocks on a full pipe
                        std::thread::spawn(move || for _ in lines {});
                        return Ok(Server { child, base });
                    }
                    seen.push_str(&line);
                    seen.push('\n');
                }
                _ => break,
            }
        }
        let status = child.wait().ok();
        Err(format!("server did not start ({status:?}): {seen}"))
    }

    pub fn get(&self, path: &str) -> serde_json::Value {
        let body = ureq::get(&format!("{}{}", self.base, path)).call().unwrap().into_string().unwrap();
        serde_json::from_str(&body).unwrap()
    }

    pub fn post(&self, path: &str, body: &serde_json::Value) -> Result<serde_json::Value, u16> {
        let req = ureq::post(&format!("{}{}", self.base, path)).set("content-type", "application/json");
        match req.send_string(&body.to_string()) {
            Ok(r) => Ok(serde_json::from_str(&r.into_string().unwrap()).unwrap()),
            Err(ureq::Error::Status(code, _)) => Err(code),
            Err(e) => panic!("{e}"),
        }
    }

    /// SIGKILL, no chance to clean up.
    pub fn kill(mut self) {
        self.child.kill().unwrap();
        self.child.wait().unwrap();
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
