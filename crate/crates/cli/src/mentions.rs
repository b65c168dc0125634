//! Mention files: JSON lines or TSV with a header row.

use std::io::{self, BufRead, Write};

use aceterm::Mention;
use anyhow::{anyhow, bail, Context, Result};

pub const TSV_HEADER: &str = "doc_id\tcui\tstart\tend\tsurface\tpattern";

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum MentionFormat {
    Jsonl,
    Tsv,
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

fn unescape(s: &str) -> Result<String> {
    let mut out = String::with_capacity(s.len());
    let mut it = s.chars();
    while let Some(c) = it.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match it.next() {
            Some('\\') => out.push('\\'),
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            other => bail!("bad escape \\{}", other.map(String::from).unwrap_or_default()),
        }
    }
    Ok(out)
}

pub struct MentionWriter<W: Write> {
    sink: W,
    format: MentionFormat,
}

impl<W: Write> MentionWriter<W> {
    pub fn new(mut sink: W, format: MentionFormat) -> io::Result<Self> {
        if format == MentionFormat::Tsv {
            writeln!(sink, "{TSV_HEADER}")?;
        }
        Ok(MentionWriter { sink, format })
    }

    pub fn write(&mut self, m: &Mention) -> io::Result<()> {
        match self.format {
            MentionFormat::Jsonl => {
                serde_json::to_writer(&mut self.sink, m)?;
                self.sink.write_all(b"\n")
            }
            MentionFormat::Tsv => writeln!(
                self.sink,
                "{}\t{}\t{}\t{}\t{}\t{}",
                escape(&m.doc_id),
                m.cui,
                m.start_char,
                m.end_char,
                escape(&m.surface),
                escape(&m.pattern)
            ),
        }
    }

    pub fn finish(mut self) -> io::Result<W> {
        self.sink.flush()?;
        Ok(self.sink)
    }
}

/// Reads a mention file in either format; TSV is recognized by its header.
pub fn read_mentions<R: BufRead>(source: R) -> Result<Vec<Mention>> {
    let mut out = Vec::new();
    let mut tsv = None;
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        let n = i + 1;
        if line.is_empty() {
            continue;
        }
        let is_tsv = *tsv.get_or_insert(line == TSV_HEADER);
        if is_tsv {
            if n == 1 {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 6 {
                bail!("line {n}: expected 6 tab-separated fields, found {}", f.len());
            }
            out.push(Mention {
                doc_id: unescape(f[0]).with_context(|| format!("line {n}"))?,
                cui: f[1].parse().map_err(|e| anyhow!("line {n}: {e}"))?,
                start_char: f[2].parse().with_context(|| format!("line {n}: start"))?,
                end_char: f[3].parse().with_context(|| format!("line {n}: end"))?,
                surface: unescape(f[4]).with_context(|| format!("line {n}"))?,
                pattern: unescape(f[5]).with_context(|| format!("line {n}"))?,
            });
        } else {
            out.push(serde_json::from_str(&line).with_context(|| format!("line {n}"))?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<Mention> {
        vec![
            Mention {
                doc_id: "a\tb".into(),
                cui: "C0000001".parse().unwrap(),
                start_char: 3,
                end_char: 10,
                surface: "child\nneglect \\".into(),
                pattern: "child neglect".into(),
            },
            Mention {
                doc_id: "z".into(),
                cui: "C0000002".parse().unwrap(),
                start_char: 0,
                end_char: 1,
                surface: "é".into(),
                pattern: "e".into(),
            },
        ]
    }

    #[test]
    fn round_trip_both_formats() {
        for format in [MentionFormat::Jsonl, MentionFormat::Tsv] {
            let mut w = MentionWriter::new(Vec::new(), format).unwrap();
            for m in sample() {
                w.write(&m).unwrap();
            }
            let buf = w.finish().unwrap();
            assert_eq!(read_mentions(buf.as_slice()).unwrap(), sample(), "{format:?}");
        }
    }

    #[test]
    fn header_only_tsv_is_empty() {
        let buf = format!("{TSV_HEADER}\n");
        assert!(read_mentions(buf.as_bytes()).unwrap().is_empty());
    }
}
