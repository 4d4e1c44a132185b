//! Rule-based sentence segmentation.
//!
//! A sentence ends at a run of terminal punctuation (`.`, `!`, `?`, `…`)
//! plus any closing quotes or brackets, when it is followed by whitespace
//! and the next word does not start with a lowercase letter. A lone period
//! after a known abbreviation or an initial does not end a sentence. Blank
//! lines always end a sentence. Output sentences are trimmed slices of the
//! input, so they match the source text byte for byte.

const TERMINALS: &[char] = &['.', '!', '?', '…'];
const CLOSERS: &[char] = &['"', '\'', '”', '’', ')', ']', '»'];
const OPENERS: &[char] = &['"', '\'', '“', '‘', '(', '[', '«'];

const ABBREVIATIONS: &[&str] = &[
    "Mr", "Mrs", "Ms", "Messrs", "Mme", "Mlle", "Dr", "Prof", "Rev", "Hon", "Rt", "St", "Sr",
    "Jr", "Esq", "Gen", "Col", "Capt", "Lt", "Sgt", "Maj", "Cmdr", "Adm", "Gov", "Sen", "Rep",
    "Pres", "Supt", "Bros", "Co", "Corp", "Inc", "Ltd", "Mt", "Ft", "Ave", "Blvd", "No", "Nos",
    "Vol", "vol", "Vols", "pp", "p", "ch", "Ch", "Fig", "fig", "Ed", "ed", "Eds", "vs", "viz",
    "cf", "ca", "approx", "Jan", "Feb", "Mar", "Apr", "Jun", "Jul", "Aug", "Sep", "Sept", "Oct",
    "Nov", "Dec",
];

/// Whether `word` (without its trailing period) never ends a sentence.
///
/// Covers the fixed list above, single-letter initials ("J") and dotted
/// acronyms such as "U.S" or "e.g".
pub fn is_abbreviation(word: &str) -> bool {
    if ABBREVIATIONS.contains(&word) {
        return true;
    }
    let mut chars = word.chars();
    if let (Some(c), None) = (chars.next(), chars.next()) {
        return c.is_alphabetic();
    }
    word.contains('.')
        && word
            .split('.')
            .all(|part| part.chars().count() == 1 && part.chars().all(char::is_alphabetic))
}

pub fn segment_sentences(text: &str) -> Vec<String> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut start = 0usize;
    let mut i = 0usize;
    let push = |out: &mut Vec<String>, s: &str| {
        let s = s.trim();
        if !s.is_empty() {
            out.push(s.to_string());
        }
    };
    while i < chars.len() {
        let (pos, c) = chars[i];
        if c == '\n' {
            // blank line: newline, optional horizontal space, newline
            let mut j = i + 1;
            while j < chars.len() && chars[j].1 != '\n' && chars[j].1.is_whitespace() {
                j += 1;
            }
            if j < chars.len() && chars[j].1 == '\n' {
                push(&mut out, &text[start..pos]);
                start = chars[j].0;
                i = j + 1;
                continue;
            }
            i += 1;
            continue;
        }
        if !TERMINALS.contains(&c) {
            i += 1;
            continue;
        }
        let mut j = i;
        while j < chars.len() && TERMINALS.contains(&chars[j].1) {
            j += 1;
        }
        let single_period = j == i + 1 && c == '.';
        while j < chars.len() && CLOSERS.contains(&chars[j].1) {
            j += 1;
        }
        let end = if j < chars.len() { chars[j].0 } else { text.len() };
        if j >= chars.len() {
            push(&mut out, &text[start..end]);
            start = end;
            i = j;
            continue;
        }
        if !chars[j].1.is_whitespace() {
            i = j.max(i + 1);
            continue;
        }
        let mut k = j;
        while k < chars.len() && chars[k].1.is_whitespace() {
            k += 1;
        }
        let next_lower = k < chars.len() && chars[k].1.is_lowercase();
        let abbreviated = single_period && is_abbreviation(word_before(text, start, pos));
        if next_lower || abbreviated {
            i = j;
            continue;
        }
        push(&mut out, &text[start..end]);
        start = end;
        i = j;
    }
    if start < text.len() {
        push(&mut out, &text[start..]);
    }
    out
}

/// The token ending at byte `end`, without leading opening punctuation.
fn word_before(text: &str, start: usize, end: usize) -> &str {
    let head = &text[start..end];
    let word = match head.rfind(char::is_whitespace) {
        Some(ws) => {
            let ws_len = head[ws..].chars().next().map_or(1, char::len_utf8);
            &head[ws + ws_len..]
        }
        None => head,
    };
    word.trim_start_matches(OPENERS)
}
