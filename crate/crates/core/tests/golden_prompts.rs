use std::path::PathBuf;

use clozekit::cloze::{mask_full, render_cloze_prompt, PromptTemplate, SourceMeta, TemplateId};
use clozekit::corpus::Document;
use clozekit::timeline::{render_extraction_prompt, Event, EventType, Timeline};

fn golden_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

/// Compares against the checked-in file; `UPDATE_GOLDEN=1` rewrites it.
fn check_golden(name: &str, actual: &str) {
    let path = golden_path(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, actual).unwrap();
    }
    let expected = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(actual, expected, "golden mismatch for {name}");
}

fn fixture_timeline() -> Timeline {
    Timeline::new(
        "Mary Ellen Pleasant",
        vec![
            Event::new(Some("1852"), "Pleasant arrives in San Francisco.", EventType::Agentive),
            Event::new(
                Some("1858-03"),
                "Pleasant donates money to the school fund.",
                EventType::Relational,
            ),
            Event::new(
                Some("1866-10-12"),
                "Pleasant is named as plaintiff in a streetcar suit.",
                EventType::Role,
            ),
        ],
    )
}

fn envelope_text(template: TemplateId, hint: bool) -> String {
    let inst = mask_full(&fixture_timeline(), 2).unwrap().with_source(SourceMeta {
        title: "Annual Report".into(),
        collection_title: "Reports and Minutes".into(),
        pub_year: "1858".into(),
    });
    let p = render_cloze_prompt(&inst, &PromptTemplate::get(template), hint).unwrap();
    match p.system {
        Some(sys) => format!("### system\n{sys}\n### user\n{}", p.user),
        None => format!("### user\n{}", p.user),
    }
}

#[test]
fn cloze_prompts_match_golden_files() {
    for t in TemplateId::ALL {
        check_golden(&format!("cloze_{}.txt", t.as_str()), &envelope_text(t, false));
    }
    check_golden("cloze_base_hint.txt", &envelope_text(TemplateId::Base, true));
}

#[test]
fn template_hashes_are_frozen() {
    let table = include_str!("golden/template_hashes.txt");
    for t in TemplateId::ALL {
        let line = table
            .lines()
            .find(|l| l.starts_with(&format!("{} ", t.as_str())))
            .unwrap_or_else(|| panic!("no hash recorded for {t}"));
        let hash = line.split_whitespace().nth(1).unwrap();
        assert_eq!(PromptTemplate::get(t).content_sha256(), hash, "{t}");
    }
}

#[test]
fn extraction_prompt_matches_golden() {
    let mut d1 = Document::new(
        "coast-1",
        "Mrs. Pleasant kept a boarding house on Washington Street.\nShe was seen at the meeting.",
    );
    d1.title = "Letters from the Coast".into();
    d1.author = "J. W. Lewis".into();
    d1.collection_title = "Pacific Correspondence".into();
    d1.pub_place = "San Francisco".into();
    d1.pub_year = Some(1858);
    let mut d2 = Document::new("report-7", "The committee thanked M. E. Pleasant for her gift.");
    d2.title = "Annual Report".into();
    d2.author = "Society of Friends".into();
    d2.collection_title = "Reports and Minutes".into();
    d2.pub_place = "Philadelphia".into();
    let p = render_extraction_prompt("Mary Ellen Pleasant", &[d1, d2]).unwrap();
    assert!(p.warnings.is_empty());
    let expected = std::fs::read_to_string(golden_path("extraction_two_docs.txt")).unwrap();
    assert_eq!(p.text, expected);
}
