//! Log type recognition and Drain template mining.

mod accuracy;
mod config;
mod drain;
mod export;
mod format;
mod recognizer;

use serde::{Deserialize, Serialize};

pub use accuracy::grouping_accuracy;
pub use config::{DrainConfig, DrainRegistry, LogCategory};
pub use drain::{parse_lines, seq_dist, DrainParser, WILDCARD};
pub use export::{export_structured_csv, export_templates_csv, templates_csv_rows};
pub use format::{LineFormat, Preprocessed};
pub use recognizer::{identify_log_type, SAMPLE_LINES};

/// A mined template and the number of lines assigned to it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventTemplate {
    pub event_id: String,
    pub template: String,
    pub occurrences: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuredRow {
    /// 1-based position in the input.
    pub line_id: usize,
    /// Header values in `StructuredLog::headers` order; empty when the line
    /// did not match the log format.
    pub fields: Vec<String>,
    pub content: String,
    pub event_id: String,
    /// The raw input line.
    pub line: String,
}

/// Per-line event assignment, in input order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StructuredLog {
    pub headers: Vec<String>,
    pub rows: Vec<StructuredRow>,
}

impl StructuredLog {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows_for_event<'a>(&'a self, event_id: &'a str) -> impl Iterator<Item = &'a StructuredRow> + 'a {
        self.rows.iter().filter(move |r| r.event_id == event_id)
    }
}
