use std::path::Path;
use std::sync::Mutex;

use regex::Regex;

use super::{
    check_embeddings, ChatRequest, GatewayError, GatewayErrorKind, HashEmbedder, ModelGateway,
};

#[derive(Debug, Clone)]
pub enum Matcher {
    Contains(String),
    Pattern(Regex),
}

impl Matcher {
    fn is_match(&self, prompt: &str) -> bool {
        match self {
            Self::Contains(s) => prompt.contains(s.as_str()),
            Self::Pattern(re) => re.is_match(prompt),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MockReply {
    Text(String),
    Fail(GatewayErrorKind),
}

/// A matcher and the replies it serves. With several replies the rule serves
/// them in order and then keeps repeating the last one.
#[derive(Debug, Clone)]
pub struct MockRule {
    pub matcher: Matcher,
    pub replies: Vec<MockReply>,
}

impl MockRule {
    pub fn contains(needle: impl Into<String>, reply: impl Into<String>) -> Self {
        Self {
            matcher: Matcher::Contains(needle.into()),
            replies: vec![MockReply::Text(reply.into())],
        }
    }

    pub fn pattern(re: Regex, reply: impl Into<String>) -> Self {
        Self {
            matcher: Matcher::Pattern(re),
            replies: vec![MockReply::Text(reply.into())],
        }
    }

    pub fn then(mut self, reply: impl Into<String>) -> Self {
        self.replies.push(MockReply::Text(reply.into()));
        self
    }

    pub fn failing(needle: impl Into<String>, kind: GatewayErrorKind) -> Self {
        Self {
            matcher: Matcher::Contains(needle.into()),
            replies: vec![MockReply::Fail(kind)],
        }
    }
}

/// Ordered reply rules over the rendered prompt; the first matching rule wins.
#[derive(Debug, Clone)]
pub struct MockScript {
    pub rules: Vec<MockRule>,
    pub default_reply: String,
}

impl Default for MockScript {
    fn default() -> Self {
        Self {
            rules: Vec::new(),
            default_reply: "I don't know.".to_string(),
        }
    }
}

impl MockScript {
    pub fn new(default_reply: impl Into<String>) -> Self {
        Self {
            rules: Vec::new(),
            default_reply: default_reply.into(),
        }
    }

    pub fn rule(mut self, rule: MockRule) -> Self {
        self.rules.push(rule);
        self
    }

    pub fn load(path: &Path) -> crate::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Parses the plain-text rules format:
    ///
    /// ```text
    /// # comment
    /// when contains Question to route:
    /// reply {"choice":"partial"}
    /// when matches (?i)keyword.*stage
    /// reply {"choice":"keyword","keywords":["error"]}
    /// reply !error rate_limit
    /// default I don't know.
    /// ```
    ///
    /// `\n` and `\\` are unescaped inside replies. `!error <kind>` makes the
    /// rule fail with that gateway error category.
    pub fn parse(text: &str) -> crate::Result<Self> {
        let mut script = MockScript::default();
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let bad = |msg: &str| crate::Error::InvalidConfig(format!("mock script line {lineno}: {msg}"));
            let (directive, rest) = line.split_once(' ').unwrap_or((line, ""));
            match directive {
                "when" => {
                    let (kind, arg) = rest.split_once(' ').unwrap_or((rest, ""));
                    let matcher = match kind {
                        "contains" => Matcher::Contains(unescape(arg)),
                        "matches" => Matcher::Pattern(
                            Regex::new(arg).map_err(|e| bad(&format!("bad pattern: {e}")))?,
                        ),
                        _ => return Err(bad("expected `when contains` or `when matches`")),
                    };
                    script.rules.push(MockRule {
                        matcher,
                        replies: Vec::new(),
                    });
                }
                "reply" => {
                    let reply = match rest.strip_prefix("!error ") {
                        Some(kind) => MockReply::Fail(parse_kind(kind.trim()).ok_or_else(|| bad("unknown error kind"))?),
                        None => MockReply::Text(unescape(rest)),
                    };
                    script
                        .rules
                        .last_mut()
                        .ok_or_else(|| bad("reply before any `when`"))?
                        .replies
                        .push(reply);
                }
                "default" => script.default_reply = unescape(rest),
                _ => return Err(bad("unknown directive")),
            }
        }
        if let Some(pos) = script.rules.iter().position(|r| r.replies.is_empty()) {
            return Err(crate::Error::InvalidConfig(format!(
                "mock script rule {} has no reply",
                pos + 1
            )));
        }
        Ok(script)
    }
}

fn parse_kind(s: &str) -> Option<GatewayErrorKind> {
    Some(match s {
        "network" => GatewayErrorKind::Network,
        "auth" => GatewayErrorKind::Auth,
        "rate_limit" => GatewayErrorKind::RateLimit,
        "malformed_response" => GatewayErrorKind::MalformedResponse,
        _ => return None,
    })
}

fn unescape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('n') => out.push('\n'),
            Some('\\') => out.push('\\'),
            Some(other) => {
                out.push('\\');
                out.push(other);
            }
            None => out.push('\\'),
        }
    }
    out
}

/// Scripted backend. Chat replies come from a [`MockScript`]; embeddings come
/// from [`HashEmbedder`]. Every chat request is recorded for inspection.
#[derive(Debug)]
pub struct MockGateway {
    script: MockScript,
    cursors: Mutex<Vec<usize>>,
    calls: Mutex<Vec<ChatRequest>>,
}

impl MockGateway {
    pub fn new(script: MockScript) -> Self {
        let cursors = vec![0; script.rules.len()];
        Self {
            script,
            cursors: Mutex::new(cursors),
            calls: Mutex::new(Vec::new()),
        }
    }

    pub fn calls(&self) -> Vec<ChatRequest> {
        self.calls.lock().unwrap().clone()
    }

    pub fn script(&self) -> &MockScript {
        &self.script
    }
}

impl ModelGateway for MockGateway {
    fn chat_complete(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        request.validate()?;
        self.calls.lock().unwrap().push(request.clone());
        let prompt = request.rendered();
        let Some(idx) = self.script.rules.iter().position(|r| r.matcher.is_match(&prompt)) else {
            return Ok(self.script.default_reply.clone());
        };
        let rule = &self.script.rules[idx];
        let reply = {
            let mut cursors = self.cursors.lock().unwrap();
            let at = cursors[idx].min(rule.replies.len() - 1);
            cursors[idx] += 1;
            rule.replies[at].clone()
        };
        match reply {
            MockReply::Text(text) => Ok(text),
            MockReply::Fail(kind) => Err(GatewayError::new(kind, "scripted failure")),
        }
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, GatewayError> {
        if texts.is_empty() {
            return Err(GatewayError::invalid_request("no texts to embed"));
        }
        let vectors = HashEmbedder.embed(texts);
        check_embeddings(texts.len(), &vectors)?;
        Ok(vectors)
    }

    fn embedding_id(&self) -> String {
        "hash-256".to_string()
    }

    fn backend_name(&self) -> &'static str {
        "mock"
    }
}
