//! Pulls a JSON object out of free-form model output.

use serde_json::{Map, Value};

/// Returns the first balanced `{...}` span in `text` that parses as a JSON
/// object. Preamble and trailing chatter are ignored. A span written with
/// single quotes only (`{'choice': 'all'}`) is accepted as well.
pub(crate) fn first_object(text: &str) -> Option<Map<String, Value>> {
    let bytes = text.as_bytes();
    let mut start = 0;
    while let Some(offset) = text[start..].find('{') {
        let open = start + offset;
        if let Some(close) = balanced_end(bytes, open) {
            let span = &text[open..=close];
            if let Some(obj) = parse_object(span) {
                return Some(obj);
            }
        }
        start = open + 1;
    }
    None
}

fn parse_object(span: &str) -> Option<Map<String, Value>> {
    if let Ok(Value::Object(obj)) = serde_json::from_str(span) {
        return Some(obj);
    }
    if !span.contains('"') && span.contains('\'') {
        if let Ok(Value::Object(obj)) = serde_json::from_str(&span.replace('\'', "\"")) {
            return Some(obj);
        }
    }
    None
}

/// Index of the `}` closing the object opened at `open`, tracking quoted
/// strings so braces inside them do not count.
fn balanced_end(bytes: &[u8], open: usize) -> Option<usize> {
    let mut depth = 0usize;
    let mut quote: Option<u8> = None;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate().skip(open) {
        if let Some(q) = quote {
            if escaped {
                escaped = false;
            } else if b == b'\\' {
                escaped = true;
            } else if b == q {
                quote = None;
            }
            continue;
        }
        match b {
            b'"' | b'\'' => quote = Some(b),
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i);
                }
            }
            _ => {}
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn choice(text: &str) -> Option<String> {
        first_object(text)?.get("choice")?.as_str().map(str::to_string)
    }

    #[test]
    fn plain_object() {
        assert_eq!(choice(r#"{"choice":"all"}"#).as_deref(), Some("all"));
    }

    #[test]
    fn preamble_and_suffix() {
        let obj = first_object(r#"sure! {"category":"Apache"} hope that helps"#).unwrap();
        assert_eq!(obj["category"], "Apache");
    }

    #[test]
    fn braces_inside_strings() {
        let obj = first_object(r#"x {"keywords":["a}b", "{c"]} y"#).unwrap();
        assert_eq!(obj["keywords"][0], "a}b");
    }

    #[test]
    fn skips_unparseable_spans() {
        assert_eq!(choice(r#"{not json} then {"choice":"partial"}"#).as_deref(), Some("partial"));
    }

    #[test]
    fn single_quoted() {
        assert_eq!(choice("{'choice': 'general'}").as_deref(), Some("general"));
    }

    #[test]
    fn nothing_found() {
        assert!(first_object("no json here").is_none());
        assert!(first_object("{ unterminated").is_none());
        assert!(first_object("[1, 2]").is_none());
    }

    #[test]
    fn nested_objects_return_outer() {
        let obj = first_object(r#"{"a":{"b":1},"choice":"all"}"#).unwrap();
        assert_eq!(obj["choice"], "all");
    }
}
