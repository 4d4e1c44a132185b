//! Capitalised-token heuristic used when no tagging service is configured.

use crate::corpus::segment_sentences;
use crate::providers::{NerProvider, ProviderError};

const TITLES: &[&str] = &[
    "Mr", "Mrs", "Ms", "Miss", "Dr", "Rev", "Prof", "Hon", "Sir", "Lady", "Lord", "Madame",
    "Mme", "Capt", "Col", "Gen", "Lt", "Sgt", "Maj", "Gov", "Sen", "Judge", "Elder", "Bishop",
    "Brother", "Sister", "Father", "Mother", "Uncle", "Aunt", "President", "Captain",
];

const STOP: &[&str] = &[
    "The", "A", "An", "And", "But", "Or", "If", "In", "On", "At", "Of", "To", "For", "From",
    "By", "With", "As", "It", "He", "She", "They", "We", "I", "You", "His", "Her", "Their",
    "Our", "My", "This", "That", "These", "Those", "There", "Then", "When", "Where", "While",
    "After", "Before", "Yet", "So", "Not", "No", "Yes", "God", "Lord", "Christ", "Monday",
    "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday", "Sunday", "January", "February",
    "March", "April", "May", "June", "July", "August", "September", "October", "November",
    "December", "Chapter", "Church", "Street", "County", "State", "States", "United", "North",
    "South", "East", "West", "New",
];

/// Runs of capitalised tokens, with honorifics stripped and common
/// non-name capitalised words dropped. A single-token run is only kept
/// when it does not open the sentence.
#[derive(Debug, Clone, Copy, Default)]
pub struct HeuristicNer;

impl HeuristicNer {
    pub fn names_in(&self, text: &str) -> Vec<String> {
        let mut out = Vec::new();
        for sentence in segment_sentences(text) {
            let mut run: Vec<&str> = Vec::new();
            let mut run_start = 0usize;
            for (i, raw) in sentence.split_whitespace().enumerate() {
                let token = raw.trim_matches(|c: char| !c.is_alphanumeric() && c != '.' && c != '\'' && c != '-');
                let token = token.trim_start_matches(['.', '\'', '-']);
                let word = token.trim_end_matches('.');
                let ends_clause = raw.ends_with([',', ';', ':', '!', '?', ')', '"', '”'])
                    || (raw.ends_with('.') && !is_initial(token) && !TITLES.contains(&word));
                if is_capitalised(word) {
                    if run.is_empty() {
                        run_start = i;
                    }
                    run.push(if is_initial(token) { token } else { word });
                } else {
                    flush(&mut out, &mut run, run_start);
                }
                if ends_clause {
                    flush(&mut out, &mut run, run_start);
                }
            }
            flush(&mut out, &mut run, run_start);
        }
        out
    }
}

fn is_initial(token: &str) -> bool {
    let mut chars = token.chars();
    matches!((chars.next(), chars.next(), chars.next()), (Some(c), Some('.'), None) if c.is_uppercase())
}

fn is_capitalised(word: &str) -> bool {
    let mut chars = word.chars();
    match chars.next() {
        Some(c) if c.is_uppercase() => {
            let rest: Vec<char> = chars.collect();
            rest.is_empty() || rest.iter().any(|c| c.is_lowercase())
        }
        _ => false,
    }
}

fn flush(out: &mut Vec<String>, run: &mut Vec<&str>, run_start: usize) {
    if run.is_empty() {
        return;
    }
    // a name follows the last honorific in the run
    let mut start = run
        .iter()
        .rposition(|t| TITLES.contains(&t.trim_end_matches('.')))
        .map_or(0, |i| i + 1);
    while start < run.len() {
        let w = run[start].trim_end_matches('.');
        if TITLES.contains(&w) || STOP.contains(&w) {
            start += 1;
        } else {
            break;
        }
    }
    let tokens: Vec<&str> = run[start..]
        .iter()
        .copied()
        .filter(|t| !STOP.contains(&t.trim_end_matches('.')))
        .collect();
    let single_at_sentence_start = tokens.len() == 1 && run_start == 0 && start == 0;
    let only_initials = tokens.iter().all(|t| is_initial(t));
    if !tokens.is_empty() && !single_at_sentence_start && !only_initials {
        out.push(tokens.join(" "));
    }
    run.clear();
}

impl NerProvider for HeuristicNer {
    fn persons(&self, texts: &[&str]) -> Result<Vec<Vec<String>>, ProviderError> {
        Ok(texts.iter().map(|t| self.names_in(t)).collect())
    }
}
