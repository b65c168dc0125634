//! Peak heap use of the corpus readers must not grow with input length.

use std::alloc::{GlobalAlloc, Layout, System};
use std::io::Read;
use std::sync::atomic::{AtomicUsize, Ordering};

use aceterm::corpus::{read_mimic_notes, read_reddit_posts, ReaderConfig, TableFormat};

struct Counting;

static CURRENT: AtomicUsize = AtomicUsize::new(0);
static PEAK: AtomicUsize = AtomicUsize::new(0);

unsafe impl GlobalAlloc for Counting {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        let p = System.alloc(layout);
        if !p.is_null() {
            let now = CURRENT.fetch_add(layout.size(), Ordering::Relaxed) + layout.size();
            PEAK.fetch_max(now, Ordering::Relaxed);
        }
        p
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        System.dealloc(ptr, layout);
        CURRENT.fetch_sub(layout.size(), Ordering::Relaxed);
    }
}

#[global_allocator]
static ALLOC: Counting = Counting;

/// Header once, then `body` `times` times, without materializing the whole.
struct Repeated {
    header: Vec<u8>,
    body: Vec<u8>,
    times: usize,
    pos: usize,
}

impl Read for Repeated {
    fn read(&mut self, buf: &mut [u8]) -> std::io::Result<usize> {
        let total = self.header.len() + self.body.len() * self.times;
        if self.pos >= total {
            return Ok(0);
        }
        let (src, off) = if self.pos < self.header.len() {
            (&self.header, self.pos)
        } else {
            (&self.body, (self.pos - self.header.len()) % self.body.len())
        };
        let n = (src.len() - off).min(buf.len());
        buf[..n].copy_from_slice(&src[off..off + n]);
        self.pos += n;
        Ok(n)
    }
}

const MIMIC_HEADER: &str =
    "ROW_ID,SUBJECT_ID,HADM_ID,CHARTDATE,CHARTTIME,STORETIME,CATEGORY,DESCRIPTION,CGID,ISERROR,TEXT\n";

fn mimic_body() -> String {
    let mut s = String::new();
    for i in 0..20 {
        let category = if i % 3 == 0 { "Nursing" } else { "Discharge summary" };
        let text = format!("Admission Date: [**2101-1-1**]\n\"quoted\" line, {}\n", "anxiety and child neglect ".repeat(40));
        s.push_str(&format!(
            "{i},{},{},2101-01-01,,,{category},Report,,,\"{}\"\n",
            100 + i,
            200 + i,
            text.replace('"', "\"\"")
        ));
    }
    s
}

fn peak_while<F: FnOnce() -> u64>(f: F) -> (usize, u64) {
    let base = CURRENT.load(Ordering::SeqCst);
    PEAK.store(base, Ordering::SeqCst);
    let n = f();
    (PEAK.load(Ordering::SeqCst) - base, n)
}

fn drain_mimic(times: usize) -> (usize, u64) {
    let src = Repeated {
        header: MIMIC_HEADER.as_bytes().to_vec(),
        body: mimic_body().into_bytes(),
        times,
        pos: 0,
    };
    peak_while(move || {
        let mut n = 0u64;
        for d in read_mimic_notes(src).unwrap() {
            let d = d.unwrap();
            assert_eq!(d.group, "Discharge summary");
            n += 1;
        }
        n
    })
}

#[test]
fn mimic_reader_memory_is_flat() {
    let (one, n1) = drain_mimic(1);
    let (hundred, n100) = drain_mimic(100);
    assert_eq!(n100, n1 * 100);
    // the same records pass through buffers of the same size
    assert!(hundred <= one + 16 * 1024, "peak grew from {one} to {hundred} bytes");
}

#[test]
fn jsonl_reader_memory_is_flat() {
    let body: String = (0..20)
        .map(|i| format!("{{\"subreddit\":\"anxiety\",\"author\":\"u{i}\",\"post\":\"{}\"}}\n", "ptsd flashback ".repeat(50)))
        .collect();
    let run = |times| {
        let src = Repeated {
            header: Vec::new(),
            body: body.clone().into_bytes(),
            times,
            pos: 0,
        };
        peak_while(move || {
            read_reddit_posts(src, ReaderConfig::reddit(TableFormat::Jsonl, "r"))
                .unwrap()
                .inspect(|d| assert!(d.is_ok()))
                .count() as u64
        })
    };
    let (one, n1) = run(1);
    let (hundred, n100) = run(100);
    assert_eq!(n100, n1 * 100);
    assert!(hundred <= one + 16 * 1024, "peak grew from {one} to {hundred} bytes");
}
