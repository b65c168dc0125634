mod support {
    pub mod oracle;
}

use aceterm::fixtures::{random_document, random_terminology, rng};
use aceterm::terminology::{Source, Status, TermEntry};
use aceterm::{CompiledMatcher, Terminology};
use proptest::prelude::*;
use support::oracle;

const VOCAB: &[&str] = &[
    "child", "abuse", "neglect", "anxiety", "household", "mental", "illness", "ab", "use", "naïve", "straße", "x1",
];

fn check(t: &Terminology, text: &str) -> Result<(), TestCaseError> {
    let m = CompiledMatcher::compile(t).unwrap();
    let got = oracle::multiset(m.annotate_text("d", text));
    let want = oracle::multiset(oracle::annotate(t, "d", text));
    prop_assert_eq!(&got, &want, "text {:?}", text);
    let raw = oracle::multiset(m.raw_matches("d", text));
    prop_assert_eq!(raw, oracle::multiset(oracle::raw_mentions(t, "d", text)));
    let chars: Vec<char> = text.chars().collect();
    for mention in &got {
        let slice: String = chars[mention.start_char..mention.end_char].iter().collect();
        prop_assert_eq!(&slice, &mention.surface);
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn automaton_equals_oracle(seed in any::<u64>()) {
        let mut r = rng(seed);
        let t = random_terminology(&mut r, "t", 50, VOCAB);
        let text = random_document(&mut r, VOCAB, 2000);
        check(&t, &text)?;
    }
}

fn term(n: u32, label: &str, syns: &[&str]) -> TermEntry {
    TermEntry::new(
        format!("C{n:07}").parse().unwrap(),
        label,
        syns.iter().map(|s| s.to_string()),
        Source::Project,
        Status::Accepted,
        None,
    )
}

#[test]
fn hand_cases_agree_with_oracle() {
    let t = Terminology::new(
        "t",
        vec![
            term(1, "a", &["a b c d"]),
            term(2, "b c", &[]),
            term(3, "a b", &["b"]),
            term(4, "c d e", &[]),
        ],
    )
    .unwrap();
    for text in ["a b c d e", "a a b b c", "A-B-C-D", "b c d e", "", "ab c", "c d e a b"] {
        check(&t, text).unwrap();
    }
}

#[test]
fn generated_pairs_produce_overlaps() {
    let (mut mentions, mut raw, mut shared_spans) = (0, 0, 0);
    for seed in 0..100 {
        let mut r = rng(seed);
        let t = random_terminology(&mut r, "t", 50, VOCAB);
        let text = random_document(&mut r, VOCAB, 2000);
        let m = CompiledMatcher::compile(&t).unwrap();
        let got = m.annotate_text("d", &text);
        mentions += got.len();
        raw += m.raw_matches("d", &text).len();
        shared_spans += got.windows(2).filter(|w| (w[0].start_char, w[0].end_char) == (w[1].start_char, w[1].end_char)).count();
    }
    assert!(mentions > 1000, "{mentions}");
    assert!(raw > mentions, "resolution never dropped anything");
    assert!(shared_spans > 0, "no same-span multi-concept mentions");
}
