use proptest::prelude::*;

use clozekit::cloze::{mask_full, mask_ngram, mask_partial, render_timeline_lines, PLACEHOLDER};
use clozekit::corpus::{normalize, segment_sentences};
use clozekit::nameaudit::AcAutomaton;
use clozekit::scoring::{macro_f1, tune_threshold};
use clozekit::stats::holm_adjust;
use clozekit::strsearch::bm_contains;
use clozekit::timeline::{Event, EventType, Timeline};

fn naive_contains(text: &[u8], pat: &[u8]) -> bool {
    text.windows(pat.len()).any(|w| w == pat)
}

fn naive_count(text: &[u8], pat: &[u8]) -> u64 {
    text.windows(pat.len()).filter(|w| *w == pat).count() as u64
}

fn small_alphabet(n: usize) -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(0u8..3, 0..n).prop_map(|v| v.into_iter().map(|b| b"abc"[b as usize]).collect())
}

fn timeline_strategy() -> impl Strategy<Value = Timeline> {
    let word = prop::sample::select(vec!["she", "left", "Boston", "with", "her", "sister", "in", "May"]);
    let summary = prop::collection::vec(word, 1..8).prop_map(|w| w.join(" "));
    let date = prop::option::of((1800i32..1900, prop::option::of(1u32..13)).prop_map(|(y, m)| match m {
        Some(m) => format!("{y}-{m:02}"),
        None => y.to_string(),
    }));
    let ty = prop::sample::select(EventType::ALL.to_vec());
    prop::collection::vec((date, summary, ty), 1..10).prop_map(|evs| {
        Timeline::new(
            "Someone",
            evs.iter()
                .map(|(d, s, t)| Event::new(d.as_deref(), s, *t))
                .collect(),
        )
    })
}

proptest! {
    #[test]
    fn bm_agrees_with_naive(text in small_alphabet(64), pat in small_alphabet(6)) {
        prop_assume!(!pat.is_empty());
        prop_assert_eq!(bm_contains(&text, &pat).unwrap(), naive_contains(&text, &pat));
    }

    #[test]
    fn ac_counts_agree_with_naive(
        text in small_alphabet(200),
        pats in prop::collection::vec(small_alphabet(5), 1..8),
    ) {
        let pats: Vec<Vec<u8>> = pats.into_iter().filter(|p| !p.is_empty()).collect();
        prop_assume!(!pats.is_empty());
        let ac = AcAutomaton::build(&pats).unwrap();
        let counts = ac.count_occurrences(&text);
        for (i, p) in ac.patterns().iter().enumerate() {
            prop_assert_eq!(counts[i], naive_count(&text, p));
        }
    }

    #[test]
    fn normalize_is_idempotent(s in "\\PC{0,40}") {
        let once = normalize(&s);
        prop_assert_eq!(normalize(&once), once);
    }

    #[test]
    fn segments_are_source_substrings(s in "[A-Za-z .!?\n]{0,120}") {
        let mut from = 0;
        for seg in segment_sentences(&s) {
            prop_assert!(!seg.is_empty());
            let at = s[from..].find(seg.as_str());
            prop_assert!(at.is_some(), "{:?} not found after {}", seg, from);
            from += at.unwrap() + seg.len();
        }
    }

    #[test]
    fn full_mask_round_trips(t in timeline_strategy(), pick in 0usize..100) {
        let m = pick % t.len() + 1;
        let c = mask_full(&t, m).unwrap();
        prop_assert_eq!(c.restore(&c.gold).unwrap(), render_timeline_lines(&t));
        prop_assert_eq!(c.lines.iter().filter(|l| l.contains(PLACEHOLDER)).count(), 1);
        prop_assert_eq!(mask_ngram(&t, m, 1).unwrap().lines, c.lines);
    }

    #[test]
    fn partial_mask_conserves_other_lines(t in timeline_strategy(), pick in 0usize..100) {
        let m = pick % t.len() + 1;
        let w = t.events[m - 1].word_count();
        let orig = render_timeline_lines(&t);
        let mut seen = std::collections::BTreeSet::new();
        for k in 1..=w {
            let c = mask_partial(&t, m, k).unwrap();
            for (i, line) in c.lines.iter().enumerate() {
                if i != m - 1 {
                    prop_assert_eq!(line, &orig[i]);
                }
            }
            seen.insert(c.lines[m - 1].clone());
        }
        prop_assert_eq!(seen.len(), w);
    }

    #[test]
    fn holm_dominates_raw(ps in prop::collection::vec(0.0f64..=1.0, 1..20)) {
        let adj = holm_adjust(&ps).unwrap();
        for (a, p) in adj.iter().zip(&ps) {
            prop_assert!(a >= p && *a <= 1.0);
        }
    }

    #[test]
    fn sweep_is_optimal(pairs in prop::collection::vec((0u8..20, any::<bool>()), 2..40)) {
        let scores: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
        let labels: Vec<bool> = pairs.iter().map(|p| p.1).collect();
        prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
        let r = tune_threshold(&scores, &labels).unwrap();
        for &(c, f) in &r.sweep {
            let pred: Vec<bool> = scores.iter().map(|&s| s >= c).collect();
            prop_assert!((macro_f1(&pred, &labels) - f).abs() < 1e-12);
            prop_assert!(f <= r.macro_f1);
        }
    }
}
