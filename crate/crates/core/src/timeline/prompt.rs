use crate::corpus::Document;

use super::TimelineError;

/// Extraction instructions with `{character}` and `{documents}` slots.
pub const EXTRACTION_TEMPLATE: &str = include_str!("../../templates/extraction.txt");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractionPrompt {
    pub text: String,
    pub warnings: Vec<String>,
}

/// Renders the extraction prompt for `character` over `docs`, fenced as
/// D1..Dk in input order. Fence characters inside document fields are
/// broken up (`[[` becomes `[ [`, `]]` becomes `] ]`) with a warning.
pub fn render_extraction_prompt(
    character: &str,
    docs: &[Document],
) -> Result<ExtractionPrompt, TimelineError> {
    if docs.is_empty() {
        return Err(TimelineError::InvalidArgument(
            "extraction prompt needs at least one document".into(),
        ));
    }
    let mut warnings = Vec::new();
    let blocks: Vec<String> = docs
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let label = format!("D{}", i + 1);
            let mut esc = |field: &str, value: &str| {
                let (out, changed) = escape_fences(value);
                if changed {
                    warnings.push(format!(
                        "document {} ({label}): fence characters escaped in {field}",
                        d.doc_id
                    ));
                }
                out
            };
            let year = d.pub_year.map(|y| y.to_string()).unwrap_or_default();
            format!(
                "[[BEGIN DOC: {label}]]\nmeta:\ntitle={}\nauthor={}\ncollection_title={}\npub_place={}\npub_year={}\n\ncontent:\n{}\n[[END DOC: {label}]]",
                esc("title", &d.title),
                esc("author", &d.author),
                esc("collection_title", &d.collection_title),
                esc("pub_place", &d.pub_place),
                year,
                esc("content", &d.text),
            )
        })
        .collect();
    let (character, changed) = escape_fences(character);
    if changed {
        warnings.push("fence characters escaped in character name".into());
    }
    let text = EXTRACTION_TEMPLATE
        .replacen("{character}", &character, 1)
        .replacen("{documents}", &blocks.join("\n\n"), 1);
    Ok(ExtractionPrompt { text, warnings })
}

fn escape_fences(s: &str) -> (String, bool) {
    if !s.contains("[[") && !s.contains("]]") {
        return (s.to_string(), false);
    }
    let mut out = s.to_string();
    while out.contains("[[") || out.contains("]]") {
        out = out.replace("[[", "[ [").replace("]]", "] ]");
    }
    (out, true)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(id: &str, text: &str) -> Document {
        Document::new(id, text)
    }

    #[test]
    fn one_fence_pair_per_document() {
        let p = render_extraction_prompt("Ann", &[doc("a", "x"), doc("b", "y")]).unwrap();
        // one mention in the DELIMITERS section plus one pair per document
        assert_eq!(p.text.matches("[[BEGIN DOC: D").count(), 3);
        assert_eq!(p.text.matches("[[END DOC: D").count(), 3);
        assert!(p.text.contains("[[BEGIN DOC: D1]]\nmeta:"));
        assert!(p.text.contains("[[BEGIN DOC: D2]]\nmeta:"));
        assert!(!p.text.contains("D3"));
        assert!(p.warnings.is_empty());
    }

    #[test]
    fn fences_in_content_are_escaped() {
        let p = render_extraction_prompt("Ann", &[doc("a", "see [[note]] and [[[x")]).unwrap();
        assert!(p.text.contains("see [ [note] ] and [ [ [x"));
        assert_eq!(p.warnings.len(), 1);
    }

    #[test]
    fn no_documents_is_an_error() {
        assert!(render_extraction_prompt("Ann", &[]).is_err());
    }
}
