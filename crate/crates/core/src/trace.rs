//! Parsing of sandbox event logs into API-call documents.
//!
//! Each event line has the shape
//! `event(timestamp,process_id,thread_id,api_Name(args...))`. Only the API
//! name survives into the [`Document`]; arguments are dropped.

use std::fmt;

use crate::error::{Error, Result};

const EVENT_OPEN: &str = "event(";
const API_PREFIX: &str = "api_";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub timestamp: i64,
    pub process_id: u64,
    pub thread_id: u64,
    pub api_name: String,
}

/// An event-shaped line whose API name is unusable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MalformedLine(pub String);

impl fmt::Display for MalformedLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Ordered API-call words of one execution trace.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Document {
    pub source_id: String,
    pub words: Vec<String>,
}

impl Document {
    pub fn new(source_id: impl Into<String>, words: Vec<String>) -> Self {
        Document {
            source_id: source_id.into(),
            words,
        }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Interchange form: one word per line, newline terminated.
    pub fn to_token_text(&self) -> String {
        let mut out = String::with_capacity(self.words.iter().map(|w| w.len() + 1).sum());
        for word in &self.words {
            out.push_str(word);
            out.push('\n');
        }
        out
    }

    pub fn from_token_text(source_id: impl Into<String>, text: &str) -> Self {
        let words = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(str::to_owned)
            .collect();
        Document::new(source_id, words)
    }
}

/// Result of parsing a whole trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedTrace {
    pub document: Document,
    /// Lines that did not match the event grammar.
    pub skipped: usize,
    /// Events whose timestamp is smaller than the previous event's.
    pub non_monotonic: usize,
}

/// Parses one log line.
///
/// Returns `Ok(None)` for lines that are not events (banners, blank lines,
/// truncated records). An event whose API name is empty or contains
/// whitespace is a hard error.
pub fn parse_event_line(line: &str) -> std::result::Result<Option<Event>, MalformedLine> {
    let line = line.trim();
    let Some(body) = line
        .strip_prefix(EVENT_OPEN)
        .and_then(|rest| rest.strip_suffix(')'))
    else {
        return Ok(None);
    };

    let mut fields = body.splitn(4, ',');
    let (Some(ts), Some(pid), Some(tid), Some(call)) =
        (fields.next(), fields.next(), fields.next(), fields.next())
    else {
        return Ok(None);
    };
    let (Ok(timestamp), Ok(process_id), Ok(thread_id)) = (
        ts.trim().parse::<i64>(),
        pid.trim().parse::<u64>(),
        tid.trim().parse::<u64>(),
    ) else {
        return Ok(None);
    };

    let Some(call) = call.trim_start().strip_prefix(API_PREFIX) else {
        return Ok(None);
    };
    let Some(paren) = call.find('(') else {
        return Ok(None);
    };
    if !call.ends_with(')') {
        return Ok(None);
    }

    let api_name = &call[..paren];
    if api_name.is_empty() {
        return Err(MalformedLine("empty API name".into()));
    }
    if api_name.chars().any(|c| c.is_whitespace() || c == ')') {
        return Err(MalformedLine(format!("invalid API name `{api_name}`")));
    }

    Ok(Some(Event {
        timestamp,
        process_id,
        thread_id,
        api_name: api_name.to_owned(),
    }))
}

/// Parses a whole trace log, keeping file order.
pub fn parse_trace(stream: &str, source_id: &str) -> Result<ParsedTrace> {
    let mut words = Vec::new();
    let mut skipped = 0;
    let mut non_monotonic = 0;
    let mut last_ts = None;

    for (idx, line) in stream.lines().enumerate() {
        match parse_event_line(line) {
            Ok(Some(event)) => {
                if last_ts.is_some_and(|prev| event.timestamp < prev) {
                    non_monotonic += 1;
                }
                last_ts = Some(event.timestamp);
                words.push(event.api_name);
            }
            Ok(None) => skipped += 1,
            Err(MalformedLine(reason)) => {
                return Err(Error::MalformedEvent {
                    line: idx + 1,
                    reason,
                })
            }
        }
    }

    if words.is_empty() {
        return Err(Error::EmptyDocument(source_id.to_owned()));
    }

    Ok(ParsedTrace {
        document: Document::new(source_id, words),
        skipped,
        non_monotonic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = "\
event(1501696951,8644,3120,api_GetEnvironmentVariable(_))
event(1501696951,8644,3120,api_GetEnvironmentVariable(_))
event(1501696951,8644,3120,api_RegQueryInfoKey(21900,0,0,_,5,9,0,0,0,0,0,0,0))
event(1501696951,8644,3120,api_RegEnumKeyEx(21900,4,'v4.0',4,_,0,0,[3647740521,30361877]))
";

    #[test]
    fn parses_example_event() {
        let ev = parse_event_line("event(1501696951,8644,3120,api_RegQueryInfoKey(21900,0,...))")
            .unwrap()
            .unwrap();
        assert_eq!(
            ev,
            Event {
                timestamp: 1501696951,
                process_id: 8644,
                thread_id: 3120,
                api_name: "RegQueryInfoKey".into(),
            }
        );
    }

    #[test]
    fn non_events_are_skipped() {
        assert_eq!(parse_event_line(""), Ok(None));
        assert_eq!(parse_event_line("# RunningWater banner"), Ok(None));
        assert_eq!(parse_event_line("event(1,2,3,GetFoo(x))"), Ok(None));
        assert_eq!(parse_event_line("event(a,2,3,api_Foo(x))"), Ok(None));
        assert_eq!(parse_event_line("event(1,2,3,api_Foo(x)"), Ok(None));
    }

    #[test]
    fn empty_api_name_is_an_error() {
        assert!(parse_event_line("event(1,2,3,api_(x))").is_err());
    }

    #[test]
    fn example_trace_gives_effective_sequence() {
        let parsed = parse_trace(EXAMPLE, "sample").unwrap();
        assert_eq!(
            parsed.document.words,
            [
                "GetEnvironmentVariable",
                "GetEnvironmentVariable",
                "RegQueryInfoKey",
                "RegEnumKeyEx"
            ]
        );
        assert_eq!(parsed.skipped, 0);
    }

    #[test]
    fn comment_only_trace_is_empty() {
        let err = parse_trace("# nothing here\n\n-- end --\n", "x").unwrap_err();
        assert!(matches!(err, Error::EmptyDocument(id) if id == "x"));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let text = "banner\nevent(1,2,3,api_Foo(1))\nevent(1,2,3,api_(x))\n";
        match parse_trace(text, "t") {
            Err(Error::MalformedEvent { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn counts_skips_and_timestamp_regressions() {
        let text =
            "start\nevent(5,1,1,api_A())\nevent(4,1,1,api_B())\nnoise\nevent(6,1,1,api_C())\n";
        let parsed = parse_trace(text, "t").unwrap();
        assert_eq!(parsed.document.words, ["A", "B", "C"]);
        assert_eq!(parsed.skipped, 2);
        assert_eq!(parsed.non_monotonic, 1);
    }

    #[test]
    fn arguments_do_not_matter() {
        let a = parse_trace(
            "event(1,2,3,api_Open('a.txt',1))\nevent(1,2,3,api_Close(7))",
            "a",
        )
        .unwrap();
        let b = parse_trace(
            "event(1,2,3,api_Open('zzz',99))\nevent(1,2,3,api_Close(_))",
            "a",
        )
        .unwrap();
        assert_eq!(a.document, b.document);
    }

    #[test]
    fn token_text_round_trip() {
        let doc = parse_trace(EXAMPLE, "s").unwrap().document;
        assert_eq!(Document::from_token_text("s", &doc.to_token_text()), doc);
    }
}
