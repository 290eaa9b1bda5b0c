//! Prompt templates for every model call, and their renderers.
//!
//! Template text is fixed; renderers only fill the `{...}` slots. The two
//! search templates carry a trimming notice that is emitted only when the
//! match list was actually cut.

use crate::parsing::EventTemplate;

pub const SYSTEM_INSTRUCTION: &str = "You are a Log Analyst. Your goal is to answer questions as accurately as possible based on the instructions and context provided.";

const FRAME_SYSTEM: &str = "<|begin_of_text|><|start_header_id|>system<|end_header_id|> ";
const FRAME_USER: &str = "<|eot_id|><|start_header_id|>user<|end_header_id|> ";
const FRAME_END: &str = "<|eot_id|><|start_header_id|>assistant<|end_header_id|>";

pub const RECOGNIZER_TEMPLATE: &str = concat!(
    "You are a log expert tasked with categorizing a provided log line. The categories are: {categories}.\n",
    "Categorize the provided log lines into one of the categories:{categories}, assuming those logs share a single category.\n",
    "Return a JSON object with a single key \"category\" without any preamble, special characters, or explanation.\n",
    "Log:\n",
    "{log}",
);

pub const ROUTER_L1_TEMPLATE: &str = concat!(
    "You are an expert at routing user questions to the 'all', 'partial', or 'general' stage.\n",
    "To answer the user's question, you must analyze how the question relates to the log content \n",
    "and decide whether to retrieve all, partial, or no logs from the log file.\n",
    "- Use 'all' for questions requiring the entire log file to answer. \n",
    "- Use 'partial' for questions requiring only a specific part or chunk of the log file to answer. \n",
    "- Use 'general' for questions that can be answered without needing to retrieve any logs. \n",
    "Return a JSON as plaintext with a single key 'choice' based on the question without any preamble, special characters, or explanation.\n",
    "Question to route: {question}",
);

pub const ROUTER_L2_TEMPLATE: &str = concat!(
    "You are an expert at routing user questions to the 'keyword', 'event', or 'se' stage.\n",
    "Use 'keyword' if the question requires using a search tool to find relevant information. If the question does not have clear keywords, try using 'semantic' instead.\n",
    "- Use 'event' if the question is related to a specific event or log template in the log file.\n",
    "- Use 'semantic' if the question asks for specific information that can be retrieved from a vector database.\n",
    "Return a JSON as plaintext with a single key 'choice' based on the question without any preamble, special characters, or explanation. If 'keyword' is chosen, also return 'keywords' as a list.  If 'event' is chosen, also return 'events' as a list. \n",
    "Question to route: {question}",
);

pub const ALL_EVENT_TEMPLATE: &str = concat!(
    "Context information is below.\n",
    "Log file name {log_file_name}\n",
    "All the events in this log file, which is a CSV file, contain three columns: EventId,EventTemplate,Occurrences\n",
    "{templates}\n",
    "The first line of the log file: {first_line}\n",
    "The Last line of the log file: {last_line}\n",
    "The log file contains {line_count} lines\n",
    "There are {template_count} log events in the log file.\n",
    "The log period can be indicated in the first and last lines of the log file.\n",
    "Given the context information, answer the query.\n",
    "Query: {question}\n",
    "Answer:",
);

pub const RETRIEVE_TEMPLATE: &str = concat!(
    " Context information is below.\n",
    "---------------------\n",
    "{context}\n",
    "---------------------\n",
    "Given the context information and not prior knowledge, answer the query.\n",
    "Query: {question}\n",
    "Answer:",
);

const TRIMMED_NOTICE: &str = "The context is too long, and it has been trimmed to {max_lines} lines.\n";

pub const SEARCH_TEMPLATE: &str = concat!(
    "There are {total} lines were matched by keywords: {keywords}.\n",
    "The context is too long, and it has been trimmed to {max_lines} lines.\n",
    "Focus on the total number if the user asks a question about how many.\n",
    "Context: {context}\n",
    "Question: {question}.",
);

pub const EVENT_TEMPLATE: &str = concat!(
    "There are {total} lines were matched by events: {events}.\n",
    "The context is too long, and it has been trimmed to {max_lines} lines.\n",
    "All relevant events are: {relevant_events}\n",
    "Focus on the total number if the user asks a question about how many.\n",
    "Context: {context}\n",
    "Question: {question}.",
);

/// Replaces `{name}` slots in a single left-to-right pass, so substituted
/// values are never rescanned for slots.
pub fn fill(template: &str, slots: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len() + slots.iter().map(|(_, v)| v.len()).sum::<usize>());
    let mut rest = template;
    'scan: while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let tail = &rest[open + 1..];
        for (name, value) in slots {
            if let Some(after) = tail.strip_prefix(name).and_then(|t| t.strip_prefix('}')) {
                out.push_str(value);
                rest = after;
                continue 'scan;
            }
        }
        out.push('{');
        rest = tail;
    }
    out.push_str(rest);
    out
}

/// The Llama-3 chat frame used for every call: system instruction, then the
/// stage prompt as the user turn.
pub fn render_chat_frame(system_text: &str, user_text: &str) -> String {
    let mut s = String::with_capacity(
        FRAME_SYSTEM.len() + system_text.len() + FRAME_USER.len() + user_text.len() + FRAME_END.len(),
    );
    s.push_str(FRAME_SYSTEM);
    s.push_str(system_text);
    s.push_str(FRAME_USER);
    s.push_str(user_text);
    s.push_str(FRAME_END);
    s
}

pub fn render_system_prompt(query: &str) -> String {
    render_chat_frame(SYSTEM_INSTRUCTION, query)
}

pub fn render_recognizer(categories: &[&str], sample_lines: &[&str]) -> String {
    let categories = py_list(categories.iter().copied());
    fill(
        RECOGNIZER_TEMPLATE,
        &[("categories", &categories), ("log", &sample_lines.join("\n"))],
    )
}

pub fn render_router_l1(question: &str) -> String {
    fill(ROUTER_L1_TEMPLATE, &[("question", question)])
}

pub fn render_router_l2(question: &str) -> String {
    fill(ROUTER_L2_TEMPLATE, &[("question", question)])
}

/// Context for the whole-log prompt.
#[derive(Debug, Clone, Copy)]
pub struct AllEventContext<'a> {
    pub log_file_name: &'a str,
    /// Template table as CSV data rows, header excluded.
    pub template_rows: &'a str,
    pub first_line: &'a str,
    pub last_line: &'a str,
    pub line_count: usize,
    pub template_count: usize,
}

pub fn render_all_event(ctx: &AllEventContext<'_>, question: &str) -> String {
    fill(
        ALL_EVENT_TEMPLATE,
        &[
            ("log_file_name", ctx.log_file_name),
            ("templates", ctx.template_rows),
            ("first_line", ctx.first_line.trim()),
            ("last_line", ctx.last_line.trim()),
            ("line_count", &ctx.line_count.to_string()),
            ("template_count", &ctx.template_count.to_string()),
            ("question", question),
        ],
    )
}

/// Retrieved chunk texts are separated by a blank line.
pub fn render_retrieve<S: AsRef<str>>(chunks: &[S], question: &str) -> String {
    let context = chunks.iter().map(AsRef::as_ref).collect::<Vec<_>>().join("\n\n");
    fill(RETRIEVE_TEMPLATE, &[("context", &context), ("question", question)])
}

/// Matched lines and counts shared by the keyword and event prompts.
#[derive(Debug, Clone, Copy)]
pub struct MatchContext<'a> {
    pub total: usize,
    pub truncated: bool,
    pub max_lines: usize,
    pub lines: &'a [&'a str],
}

fn strip_notice(template: &str, truncated: bool) -> String {
    if truncated {
        template.to_string()
    } else {
        template.replacen(TRIMMED_NOTICE, "", 1)
    }
}

pub fn render_search<S: AsRef<str>>(ctx: &MatchContext<'_>, keywords: &[S], question: &str) -> String {
    let template = strip_notice(SEARCH_TEMPLATE, ctx.truncated);
    fill(
        &template,
        &[
            ("total", &ctx.total.to_string()),
            ("keywords", &py_list(keywords.iter().map(AsRef::as_ref))),
            ("max_lines", &ctx.max_lines.to_string()),
            ("context", &ctx.lines.join("\n")),
            ("question", question),
        ],
    )
}

pub fn render_event<S: AsRef<str>>(
    ctx: &MatchContext<'_>,
    event_ids: &[S],
    relevant: &[EventTemplate],
    question: &str,
) -> String {
    let template = strip_notice(EVENT_TEMPLATE, ctx.truncated);
    let relevant = format!(
        "[{}]",
        relevant
            .iter()
            .map(|t| format!("[{}, {}, {}]", py_str(&t.event_id), py_str(&t.template), t.occurrences))
            .collect::<Vec<_>>()
            .join(", ")
    );
    fill(
        &template,
        &[
            ("total", &ctx.total.to_string()),
            ("events", &py_list(event_ids.iter().map(AsRef::as_ref))),
            ("max_lines", &ctx.max_lines.to_string()),
            ("relevant_events", &relevant),
            ("context", &ctx.lines.join("\n")),
            ("question", question),
        ],
    )
}

/// Python `repr` of a string.
pub fn py_str(s: &str) -> String {
    let quote = if s.contains('\'') && !s.contains('"') { '"' } else { '\'' };
    let mut out = String::with_capacity(s.len() + 2);
    out.push(quote);
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if c == quote => {
                out.push('\\');
                out.push(c);
            }
            c => out.push(c),
        }
    }
    out.push(quote);
    out
}

/// Python `repr` of a list of strings, e.g. `['error', 'timeout']`.
pub fn py_list<'a>(items: impl IntoIterator<Item = &'a str>) -> String {
    let inner: Vec<String> = items.into_iter().map(py_str).collect();
    format!("[{}]", inner.join(", "))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fill_is_single_pass() {
        assert_eq!(fill("a {x} b", &[("x", "{x}")]), "a {x} b");
        assert_eq!(fill("{y} {x}", &[("x", "1")]), "{y} 1");
        assert_eq!(fill("{", &[("x", "1")]), "{");
    }

    #[test]
    fn python_repr() {
        assert_eq!(py_str("abc"), "'abc'");
        assert_eq!(py_str("it's"), "\"it's\"");
        assert_eq!(py_str("a'b\"c"), "'a\\'b\"c'");
        assert_eq!(py_list(["03:28:22"]), "['03:28:22']");
        assert_eq!(py_list(Vec::<&str>::new()), "[]");
    }

    #[test]
    fn notice_only_when_truncated() {
        let lines = ["a", "b"];
        let mut ctx = MatchContext {
            total: 2,
            truncated: false,
            max_lines: 200,
            lines: &lines,
        };
        let p = render_search(&ctx, &["x"], "q");
        assert!(!p.contains("trimmed"));
        ctx.truncated = true;
        ctx.total = 250;
        let p = render_search(&ctx, &["x"], "q");
        assert!(p.contains("trimmed to 200 lines"));
        assert!(p.starts_with("There are 250 lines were matched by keywords: ['x']."));
    }

    #[test]
    fn system_frame_wraps_query() {
        let p = render_system_prompt("What is 404?");
        assert!(p.starts_with("<|begin_of_text|>"));
        assert!(p.contains("<|end_header_id|> What is 404?<|eot_id|>"));
        assert!(p.ends_with("assistant<|end_header_id|>"));
    }
}
