use regex::Regex;

use super::DrainConfig;
use crate::{Error, Result};

/// A compiled log format plus content masks.
#[derive(Debug, Clone)]
pub struct LineFormat {
    pattern: Regex,
    headers: Vec<String>,
    masks: Vec<Regex>,
}

/// One line split into header fields and masked content tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Preprocessed {
    pub fields: Vec<String>,
    pub content: String,
    pub tokens: Vec<String>,
    /// False when the line did not fit the format and was taken whole.
    pub matched: bool,
}

impl LineFormat {
    pub fn new(config: &DrainConfig) -> Result<Self> {
        config.validate()?;
        let field = Regex::new(r"<([^<>]+)>").expect("static regex");
        let mut pattern = String::from("^");
        let mut headers = Vec::new();
        let mut last = 0;
        for cap in field.captures_iter(&config.log_format) {
            let whole = cap.get(0).expect("group 0");
            pattern.push_str(&spaces_to_class(&config.log_format[last..whole.start()]));
            let name = &cap[1];
            pattern.push_str(&format!("(?P<{name}>.*?)"));
            if name != "Content" {
                headers.push(name.to_string());
            }
            last = whole.end();
        }
        pattern.push_str(&spaces_to_class(&config.log_format[last..]));
        pattern.push('$');
        let pattern = Regex::new(&pattern)
            .map_err(|e| Error::InvalidConfig(format!("log_format {:?}: {e}", config.log_format)))?;
        let masks = config
            .mask_regexes
            .iter()
            .map(|m| Regex::new(m).map_err(|e| Error::InvalidConfig(format!("mask {m:?}: {e}"))))
            .collect::<Result<_>>()?;
        Ok(Self {
            pattern,
            headers,
            masks,
        })
    }

    /// Header field names, `Content` excluded.
    pub fn headers(&self) -> &[String] {
        &self.headers
    }

    pub fn mask(&self, content: &str) -> String {
        let mut text = content.to_string();
        for mask in &self.masks {
            if let std::borrow::Cow::Owned(replaced) = mask.replace_all(&text, "<*>") {
                text = replaced;
            }
        }
        text
    }

    /// Lines that do not fit the format are kept whole as content.
    pub fn preprocess(&self, line: &str) -> Preprocessed {
        let (fields, content, matched) = match self.pattern.captures(line) {
            Some(caps) => {
                let fields = self
                    .headers
                    .iter()
                    .map(|h| caps.name(h).map_or("", |m| m.as_str()).to_string())
                    .collect();
                let content = caps.name("Content").map_or("", |m| m.as_str());
                (fields, content, true)
            }
            None => (vec![String::new(); self.headers.len()], line, false),
        };
        let tokens = self.mask(content).split_whitespace().map(str::to_string).collect();
        Preprocessed {
            fields,
            content: content.to_string(),
            tokens,
            matched,
        }
    }
}

fn spaces_to_class(literal: &str) -> String {
    let mut out = String::with_capacity(literal.len());
    let mut in_run = false;
    for c in literal.chars() {
        if c == ' ' {
            if !in_run {
                out.push_str(r"\s+");
            }
            in_run = true;
        } else {
            out.push(c);
            in_run = false;
        }
    }
    out
}
