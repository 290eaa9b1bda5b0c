//! Keyword and event-id retrieval over a parsed log.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::parsing::{EventTemplate, StructuredLog};
use crate::{Error, Result};

/// Default cap on lines placed into a generation prompt.
pub const DEFAULT_MAX_LINES: usize = 200;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchedLine {
    pub line_id: usize,
    pub text: String,
}

/// Matching lines in file order. `total` is the match count before any
/// truncation; `shown` is how many lines `matches` holds.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SearchResult {
    pub matches: Vec<MatchedLine>,
    pub total: usize,
    pub truncated: bool,
    pub shown: usize,
}

impl SearchResult {
    fn from_matches(matches: Vec<MatchedLine>) -> Self {
        let total = matches.len();
        Self {
            matches,
            total,
            truncated: false,
            shown: total,
        }
    }

    pub fn lines(&self) -> Vec<&str> {
        self.matches.iter().map(|m| m.text.as_str()).collect()
    }
}

/// Event search output: matching lines, the template rows of the requested
/// events, and requested ids that no template carries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventSearch {
    pub result: SearchResult,
    pub templates: Vec<EventTemplate>,
    pub unknown_ids: Vec<String>,
}

/// Lines containing any keyword, compared case-insensitively.
pub fn keyword_search<S: AsRef<str>, K: AsRef<str>>(raw_lines: &[S], keywords: &[K]) -> Result<SearchResult> {
    let needles: Vec<String> = keywords
        .iter()
        .map(|k| k.as_ref().trim().to_lowercase())
        .filter(|k| !k.is_empty())
        .collect();
    if needles.is_empty() {
        return Err(Error::EmptyKeywords);
    }
    let matches = raw_lines
        .iter()
        .enumerate()
        .filter_map(|(i, line)| {
            let line = line.as_ref();
            let lower = line.to_lowercase();
            needles.iter().any(|n| lower.contains(n.as_str())).then(|| MatchedLine {
                line_id: i + 1,
                text: line.to_string(),
            })
        })
        .collect();
    Ok(SearchResult::from_matches(matches))
}

/// Rows assigned to any of `event_ids`, with the matching template rows.
pub fn event_search<S: AsRef<str>>(
    structured: &StructuredLog,
    templates: &[EventTemplate],
    event_ids: &[S],
) -> Result<EventSearch> {
    if event_ids.is_empty() {
        return Err(Error::EmptyEventIds);
    }
    let wanted: HashSet<&str> = event_ids.iter().map(AsRef::as_ref).collect();
    let known: HashSet<&str> = templates.iter().map(|t| t.event_id.as_str()).collect();
    let mut unknown_ids = Vec::new();
    for id in event_ids {
        let id = id.as_ref();
        if !known.contains(id) && !unknown_ids.iter().any(|u| u == id) {
            unknown_ids.push(id.to_string());
        }
    }
    let matches = structured
        .rows
        .iter()
        .filter(|r| wanted.contains(r.event_id.as_str()))
        .map(|r| MatchedLine {
            line_id: r.line_id,
            text: r.line.clone(),
        })
        .collect();
    let relevant = templates
        .iter()
        .filter(|t| wanted.contains(t.event_id.as_str()))
        .cloned()
        .collect();
    Ok(EventSearch {
        result: SearchResult::from_matches(matches),
        templates: relevant,
        unknown_ids,
    })
}

/// Keeps the first `max_lines` matches; `total` is left untouched.
pub fn truncate_context(mut result: SearchResult, max_lines: usize) -> SearchResult {
    let max_lines = max_lines.max(1);
    result.matches.truncate(max_lines);
    result.shown = result.matches.len();
    result.truncated = result.total > result.shown;
    result
}
