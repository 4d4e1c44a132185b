//! Character timelines: typed, dated events parsed from the extractor's
//! CSV, plus the source-bounded extraction prompt.

mod prompt;

use std::cmp::Ordering;
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use prompt::{render_extraction_prompt, ExtractionPrompt, EXTRACTION_TEMPLATE};

pub const MAX_SUMMARY_WORDS: usize = 30;
pub const MAX_EVIDENCE_WORDS: usize = 50;

/// Column order of the timeline CSV.
pub const CSV_HEADER: [&str; 9] = [
    "character",
    "start_date",
    "date_precision",
    "event_summary",
    "event_type",
    "evidence",
    "confidence",
    "sources",
    "notes",
];

#[derive(Debug, Error)]
pub enum TimelineError {
    #[error("format error: {0}")]
    Format(String),
    #[error("validation failed:{}", .0.iter().map(|v| format!("\n  {v}")).collect::<String>())]
    Validation(Vec<Violation>),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// One failed rule on one CSV data row (1-based, header excluded).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub row: usize,
    pub rule: Rule,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "row {}: {:?}: {}", self.row, self.rule, self.detail)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rule {
    SummaryLength,
    EvidenceLength,
    DateFormat,
    DatePrecision,
    EventType,
    Confidence,
    EmptySummary,
    Character,
    ColumnCount,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventType {
    Agentive,
    Relational,
    Observational,
    Cognitive,
    Role,
}

impl EventType {
    pub const ALL: [EventType; 5] = [
        EventType::Agentive,
        EventType::Relational,
        EventType::Observational,
        EventType::Cognitive,
        EventType::Role,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventType::Agentive => "agentive",
            EventType::Relational => "relational",
            EventType::Observational => "observational",
            EventType::Cognitive => "cognitive",
            EventType::Role => "role",
        }
    }
}

impl fmt::Display for EventType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EventType::ALL
            .into_iter()
            .find(|t| t.as_str() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| format!("unknown event type {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatePrecision {
    Day,
    Month,
    Year,
    Decade,
    Unknown,
}

impl DatePrecision {
    fn as_str(self) -> &'static str {
        match self {
            DatePrecision::Day => "day",
            DatePrecision::Month => "month",
            DatePrecision::Year => "year",
            DatePrecision::Decade => "decade",
            DatePrecision::Unknown => "unknown",
        }
    }
}

impl FromStr for DatePrecision {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "day" => Ok(DatePrecision::Day),
            "month" => Ok(DatePrecision::Month),
            "year" => Ok(DatePrecision::Year),
            "decade" => Ok(DatePrecision::Decade),
            "unknown" | "" => Ok(DatePrecision::Unknown),
            other => Err(format!("unknown date precision {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Confidence {
    High,
    Medium,
    Low,
}

impl FromStr for Confidence {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "high" => Ok(Confidence::High),
            "medium" => Ok(Confidence::Medium),
            "low" => Ok(Confidence::Low),
            other => Err(format!("unknown confidence {other:?}")),
        }
    }
}

impl Confidence {
    fn as_str(self) -> &'static str {
        match self {
            Confidence::High => "high",
            Confidence::Medium => "medium",
            Confidence::Low => "low",
        }
    }
}

/// ISO partial date: `YYYY`, `YYYY-MM` or `YYYY-MM-DD`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PartialDate {
    pub year: i32,
    pub month: Option<u8>,
    pub day: Option<u8>,
}

impl PartialDate {
    fn components(&self) -> usize {
        1 + self.month.is_some() as usize + self.day.is_some() as usize
    }
}

impl FromStr for PartialDate {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("malformed date {s:?}");
        let parts: Vec<&str> = s.trim().split('-').collect();
        let num = |p: &str, len: usize| -> Result<u32, String> {
            if p.len() == len && p.bytes().all(|b| b.is_ascii_digit()) {
                p.parse().map_err(|_| bad())
            } else {
                Err(bad())
            }
        };
        let year = num(parts[0], 4)? as i32;
        let month = parts.get(1).map(|p| num(p, 2)).transpose()?;
        let day = parts.get(2).map(|p| num(p, 2)).transpose()?;
        if parts.len() > 3 {
            return Err(bad());
        }
        if let Some(m) = month {
            if !(1..=12).contains(&m) {
                return Err(bad());
            }
            if let Some(d) = day {
                if d < 1 || d > days_in_month(year, m) {
                    return Err(bad());
                }
            }
        }
        Ok(PartialDate {
            year,
            month: month.map(|m| m as u8),
            day: day.map(|d| d as u8),
        })
    }
}

fn days_in_month(year: i32, month: u32) -> u32 {
    match month {
        4 | 6 | 9 | 11 => 30,
        2 if (year % 4 == 0 && year % 100 != 0) || year % 400 == 0 => 29,
        2 => 28,
        _ => 31,
    }
}

impl fmt::Display for PartialDate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}", self.year)?;
        if let Some(m) = self.month {
            write!(f, "-{m:02}")?;
        }
        if let Some(d) = self.day {
            write!(f, "-{d:02}")?;
        }
        Ok(())
    }
}

impl Serialize for PartialDate {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PartialDate {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub start_date: Option<PartialDate>,
    pub date_precision: DatePrecision,
    pub summary: String,
    pub event_type: EventType,
    pub evidence: String,
    pub confidence: Confidence,
    pub sources: Vec<String>,
    pub notes: String,
}

impl Event {
    /// A minimal event, mostly for tests and fixtures.
    pub fn new(date: Option<&str>, summary: &str, event_type: EventType) -> Self {
        let start_date = date.map(|d| d.parse().expect("valid fixture date"));
        let date_precision = match start_date.map(|d: PartialDate| d.components()) {
            None => DatePrecision::Unknown,
            Some(1) => DatePrecision::Year,
            Some(2) => DatePrecision::Month,
            Some(_) => DatePrecision::Day,
        };
        Event {
            start_date,
            date_precision,
            summary: summary.to_string(),
            event_type,
            evidence: String::new(),
            confidence: Confidence::High,
            sources: Vec::new(),
            notes: String::new(),
        }
    }

    /// Display form of the date, `undated` when absent.
    pub fn date_label(&self) -> String {
        self.start_date
            .map_or_else(|| "undated".to_string(), |d| d.to_string())
    }

    pub fn word_count(&self) -> usize {
        word_count(&self.summary)
    }

    fn violations(&self, row: usize) -> Vec<Violation> {
        let mut v = Vec::new();
        let mut push = |rule, detail: String| v.push(Violation { row, rule, detail });
        let words = word_count(&self.summary);
        if words == 0 {
            push(Rule::EmptySummary, "event_summary is empty".into());
        }
        if words > MAX_SUMMARY_WORDS {
            push(
                Rule::SummaryLength,
                format!("event_summary has {words} words (max {MAX_SUMMARY_WORDS})"),
            );
        }
        let ev = word_count(&self.evidence);
        if ev > MAX_EVIDENCE_WORDS {
            push(
                Rule::EvidenceLength,
                format!("evidence has {ev} words (max {MAX_EVIDENCE_WORDS})"),
            );
        }
        let consistent = match (self.start_date, self.date_precision) {
            (None, DatePrecision::Unknown) => true,
            (None, _) | (Some(_), DatePrecision::Unknown) => false,
            (Some(d), DatePrecision::Day) => d.components() == 3,
            (Some(d), DatePrecision::Month) => d.components() == 2,
            (Some(d), DatePrecision::Year | DatePrecision::Decade) => d.components() == 1,
        };
        if !consistent {
            push(
                Rule::DatePrecision,
                format!(
                    "date {:?} inconsistent with precision {}",
                    self.start_date.map(|d| d.to_string()).unwrap_or_default(),
                    self.date_precision.as_str()
                ),
            );
        }
        v
    }
}

/// Whitespace-delimited tokens; hyphenated compounds count once.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timeline {
    pub character: String,
    pub events: Vec<Event>,
}

impl Timeline {
    pub fn new(character: impl Into<String>, events: Vec<Event>) -> Self {
        sort_events(Timeline {
            character: character.into(),
            events,
        })
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

fn date_order(a: &Event, b: &Event) -> Ordering {
    match (a.start_date, b.start_date) {
        (Some(x), Some(y)) => x.cmp(&y),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => Ordering::Equal,
    }
}

/// Stable sort: dated events ascending, undated last in original order.
/// A year-only date sorts before more precise dates in the same year.
pub fn sort_events(mut timeline: Timeline) -> Timeline {
    timeline.events.sort_by(date_order);
    timeline
}

pub fn is_sorted(timeline: &Timeline) -> bool {
    timeline
        .events
        .windows(2)
        .all(|w| date_order(&w[0], &w[1]) != Ordering::Greater)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedTimeline {
    pub timeline: Timeline,
    pub warnings: Vec<String>,
}

/// Parses an RFC 4180 timeline CSV whose first line is [`CSV_HEADER`].
///
/// Rows are validated against the event rules and every violation is
/// reported. Out-of-order rows are re-sorted with a warning; a header-only
/// file yields an empty timeline with a warning.
pub fn parse_timeline_csv<R: Read>(reader: R) -> Result<ParsedTimeline, TimelineError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| TimelineError::Format(e.to_string()))?
        .clone();
    let got: Vec<String> = headers.iter().map(|h| h.trim().to_ascii_lowercase()).collect();
    if got != CSV_HEADER {
        return Err(TimelineError::Format(format!(
            "missing or unexpected header: expected {}, found {}",
            CSV_HEADER.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut violations = Vec::new();
    let mut events = Vec::new();
    let mut character: Option<String> = None;
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| TimelineError::Format(e.to_string()))?;
        if rec.len() != CSV_HEADER.len() {
            violations.push(Violation {
                row,
                rule: Rule::ColumnCount,
                detail: format!("expected {} fields, found {}", CSV_HEADER.len(), rec.len()),
            });
            continue;
        }
        let field = |i: usize| rec.get(i).unwrap_or_default();
        let who = field(0).trim().to_string();
        match &character {
            None => character = Some(who),
            Some(c) if *c != who => violations.push(Violation {
                row,
                rule: Rule::Character,
                detail: format!("character {who:?} differs from {c:?}"),
            }),
            _ => {}
        }
        let start_date = match field(1).trim() {
            "" => None,
            d => match d.parse::<PartialDate>() {
                Ok(d) => Some(d),
                Err(e) => {
                    violations.push(Violation { row, rule: Rule::DateFormat, detail: e });
                    continue;
                }
            },
        };
        let date_precision = match field(2).parse() {
            Ok(p) => p,
            Err(e) => {
                violations.push(Violation { row, rule: Rule::DatePrecision, detail: e });
                continue;
            }
        };
        let event_type = match field(4).parse() {
            Ok(t) => t,
            Err(e) => {
                violations.push(Violation { row, rule: Rule::EventType, detail: e });
                continue;
            }
        };
        let confidence = match field(6).parse() {
            Ok(c) => c,
            Err(e) => {
                violations.push(Violation { row, rule: Rule::Confidence, detail: e });
                continue;
            }
        };
        let event = Event {
            start_date,
            date_precision,
            summary: field(3).trim().to_string(),
            event_type,
            evidence: field(5).to_string(),
            confidence,
            sources: field(7)
                .split(';')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(String::from)
                .collect(),
            notes: field(8).to_string(),
        };
        violations.extend(event.violations(row));
        events.push(event);
    }
    if !violations.is_empty() {
        return Err(TimelineError::Validation(violations));
    }
    let mut warnings = Vec::new();
    if events.is_empty() {
        warnings.push("timeline has no events (header only)".to_string());
    }
    let timeline = Timeline {
        character: character.unwrap_or_default(),
        events,
    };
    if !is_sorted(&timeline) {
        warnings.push("events were not in date order and have been sorted".to_string());
    }
    Ok(ParsedTimeline {
        timeline: sort_events(timeline),
        warnings,
    })
}

/// Writes the timeline as RFC 4180 CSV, header first.
pub fn serialize_timeline_csv(timeline: &Timeline) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory write");
    for e in &timeline.events {
        w.write_record([
            timeline.character.as_str(),
            &e.start_date.map(|d| d.to_string()).unwrap_or_default(),
            e.date_precision.as_str(),
            &e.summary,
            e.event_type.as_str(),
            &e.evidence,
            e.confidence.as_str(),
            &e.sources.join(";"),
            &e.notes,
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8 fields")
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str =
        "character,start_date,date_precision,event_summary,event_type,evidence,confidence,sources,notes\n";

    fn parse(body: &str) -> Result<ParsedTimeline, TimelineError> {
        parse_timeline_csv(format!("{HEADER}{body}").as_bytes())
    }

    #[test]
    fn quote_doubling() {
        let t = parse("Ann,1871-08,month,\"He said \"\"yes\"\", then left\",agentive,\"x, y\",high,D1;D2,\n")
            .unwrap()
            .timeline;
        assert_eq!(t.events[0].summary, "He said \"yes\", then left");
        assert_eq!(t.events[0].evidence, "x, y");
        assert_eq!(t.events[0].sources, ["D1", "D2"]);
        assert_eq!(t.character, "Ann");
    }

    #[test]
    fn summary_word_limit() {
        let long = vec!["word"; 31].join(" ");
        let err = parse(&format!("Ann,1871,year,{long},role,,high,D1,\n")).unwrap_err();
        match err {
            TimelineError::Validation(v) => {
                assert_eq!(v.len(), 1);
                assert_eq!(v[0].rule, Rule::SummaryLength);
                assert_eq!(v[0].row, 1);
            }
            other => panic!("{other:?}"),
        }
        let ok = vec!["word"; 30].join(" ");
        assert!(parse(&format!("Ann,1871,year,{ok},role,,high,D1,\n")).is_ok());
    }

    #[test]
    fn hyphenated_words_count_once() {
        assert_eq!(word_count("a well-known  anti-slavery speaker"), 4);
    }

    #[test]
    fn date_precision_consistency() {
        assert!(parse("Ann,1871-08,month,Left town.,agentive,,high,D1,\n").is_ok());
        let err = parse("Ann,1871-08,day,Left town.,agentive,,high,D1,\n").unwrap_err();
        assert!(matches!(&err, TimelineError::Validation(v) if v[0].rule == Rule::DatePrecision));
        assert!(parse("Ann,,unknown,Left town.,agentive,,high,D1,\n").is_ok());
        assert!(parse("Ann,1870,decade,Left town.,agentive,,high,D1,\n").is_ok());
        assert!(parse("Ann,1871-02-30,day,Left.,agentive,,high,D1,\n").is_err());
    }

    #[test]
    fn unknown_event_type_rejected() {
        let err = parse("Ann,1871,year,Left.,heroic,,high,D1,\n").unwrap_err();
        assert!(matches!(&err, TimelineError::Validation(v) if v[0].rule == Rule::EventType));
    }

    #[test]
    fn missing_header_is_format_error() {
        let err = parse_timeline_csv("Ann,1871,year,Left.,role,,high,D1,\n".as_bytes()).unwrap_err();
        assert!(matches!(err, TimelineError::Format(_)));
    }

    #[test]
    fn header_only_warns() {
        let p = parse("").unwrap();
        assert!(p.timeline.is_empty());
        assert_eq!(p.warnings.len(), 1);
    }

    #[test]
    fn sorting_rules() {
        let t = Timeline {
            character: "x".into(),
            events: vec![
                Event::new(Some("1900"), "late", EventType::Role),
                Event::new(None, "undated a", EventType::Role),
                Event::new(Some("1867"), "early", EventType::Role),
                Event::new(None, "undated b", EventType::Role),
                Event::new(Some("1867"), "early tie", EventType::Role),
            ],
        };
        let s = sort_events(t);
        let order: Vec<&str> = s.events.iter().map(|e| e.summary.as_str()).collect();
        assert_eq!(order, ["early", "early tie", "late", "undated a", "undated b"]);
        assert_eq!(sort_events(s.clone()), s);
    }

    #[test]
    fn unsorted_rows_are_sorted_with_warning() {
        let p = parse("Ann,1900,year,B.,role,,high,D1,\nAnn,1867,year,A.,role,,high,D1,\n").unwrap();
        assert_eq!(p.timeline.events[0].summary, "A.");
        assert_eq!(p.warnings.len(), 1);
    }

    #[test]
    fn serialize_then_parse() {
        let mut e = Event::new(Some("1871-08-05"), "She said \"no\", firmly.", EventType::Cognitive);
        e.evidence = "\"no,\" she said".into();
        e.sources = vec!["D1".into(), "D3".into()];
        e.notes = "conflict, see D3".into();
        let t = Timeline::new("Ann Petry", vec![e, Event::new(None, "Left.", EventType::Agentive)]);
        let csv = serialize_timeline_csv(&t);
        assert_eq!(parse_timeline_csv(csv.as_bytes()).unwrap().timeline, t);
    }
}
