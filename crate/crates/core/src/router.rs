//! Two-level LLM query router.
//!
//! Level one picks how much of the log a question needs. Level two, asked
//! only for `Partial`, picks the search tool and its parameters. Replies that
//! cannot be interpreted are retried once; [`route`] then falls back to
//! semantic search instead of failing the query.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::gateway::{ChatRequest, ModelGateway};
use crate::json_extract::first_object;
use crate::{prompts, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    All,
    Partial,
    General,
}

impl Tier {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::All => "all",
            Self::Partial => "partial",
            Self::General => "general",
        }
    }

    fn from_choice(choice: &str) -> Option<Self> {
        match choice.trim().to_ascii_lowercase().as_str() {
            "all" => Some(Self::All),
            "partial" => Some(Self::Partial),
            "general" => Some(Self::General),
            _ => None,
        }
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchTool {
    Keyword,
    Event,
    Semantic,
}

impl SearchTool {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Keyword => "keyword",
            Self::Event => "event",
            Self::Semantic => "semantic",
        }
    }

    /// The level-two prompt names the semantic stage `'se'` once, so both
    /// spellings are accepted.
    fn from_choice(choice: &str) -> Option<Self> {
        match choice.trim().to_ascii_lowercase().as_str() {
            "keyword" | "keywords" => Some(Self::Keyword),
            "event" | "events" => Some(Self::Event),
            "semantic" | "se" => Some(Self::Semantic),
            _ => None,
        }
    }
}

impl fmt::Display for SearchTool {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Where a question goes. Build values through the constructors, which keep
/// `tool` set exactly for `Partial` and each parameter list set exactly for
/// its own tool (and never empty).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouteDecision {
    pub tier: Tier,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tool: Option<SearchTool>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub keywords: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub event_ids: Option<Vec<String>>,
}

impl RouteDecision {
    pub fn all() -> Self {
        Self::bare(Tier::All, None)
    }

    pub fn general() -> Self {
        Self::bare(Tier::General, None)
    }

    pub fn semantic() -> Self {
        Self::bare(Tier::Partial, Some(SearchTool::Semantic))
    }

    pub fn keyword(keywords: Vec<String>) -> Result<Self> {
        if keywords.is_empty() {
            return Err(Error::MissingParams { tool: "keyword" });
        }
        Ok(Self {
            keywords: Some(keywords),
            ..Self::bare(Tier::Partial, Some(SearchTool::Keyword))
        })
    }

    pub fn event(event_ids: Vec<String>) -> Result<Self> {
        if event_ids.is_empty() {
            return Err(Error::MissingParams { tool: "event" });
        }
        Ok(Self {
            event_ids: Some(event_ids),
            ..Self::bare(Tier::Partial, Some(SearchTool::Event))
        })
    }

    fn bare(tier: Tier, tool: Option<SearchTool>) -> Self {
        Self {
            tier,
            tool,
            keywords: None,
            event_ids: None,
        }
    }

    /// True when the type invariants hold; values from deserialization are
    /// not checked otherwise.
    pub fn is_consistent(&self) -> bool {
        let tool_ok = self.tool.is_some() == (self.tier == Tier::Partial);
        let kw_ok = match &self.keywords {
            Some(k) => self.tool == Some(SearchTool::Keyword) && !k.is_empty(),
            None => self.tool != Some(SearchTool::Keyword),
        };
        let ev_ok = match &self.event_ids {
            Some(e) => self.tool == Some(SearchTool::Event) && !e.is_empty(),
            None => self.tool != Some(SearchTool::Event),
        };
        tool_ok && kw_ok && ev_ok
    }

    /// Short label such as `partial/keyword`.
    pub fn label(&self) -> String {
        match self.tool {
            Some(t) => format!("{}/{}", self.tier, t),
            None => self.tier.to_string(),
        }
    }
}

/// A decision plus the reason the router fell back, if it did.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Routed {
    pub decision: RouteDecision,
    pub fallback: Option<String>,
}

fn choice_of(obj: &Map<String, Value>) -> Option<&str> {
    obj.get("choice").and_then(Value::as_str)
}

fn ask_twice<G, T>(gateway: &G, prompt: String, temperature: f32, stage: &str, interpret: impl Fn(&str) -> Option<T>) -> Result<T>
where
    G: ModelGateway + ?Sized,
{
    let request = ChatRequest::analyst(prompt).with_temperature(temperature);
    let mut last = String::new();
    for attempt in 0..2 {
        let reply = gateway.chat_complete(&request)?;
        if let Some(v) = interpret(&reply) {
            return Ok(v);
        }
        tracing::debug!(attempt, stage, reply = %reply, "unusable router reply");
        last = reply;
    }
    Err(Error::RouteParse(format!("{stage}: {last}")))
}

pub fn route_level1<G: ModelGateway + ?Sized>(query: &str, gateway: &G, temperature: f32) -> Result<Tier> {
    if query.trim().is_empty() {
        return Err(Error::EmptyInput);
    }
    ask_twice(gateway, prompts::render_router_l1(query), temperature, "level1", |reply| {
        first_object(reply).and_then(|o| choice_of(&o).and_then(Tier::from_choice))
    })
}

/// Level-two choice with its raw parameter lists, normalized and
/// deduplicated but possibly empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Level2 {
    pub tool: SearchTool,
    pub keywords: Vec<String>,
    pub event_ids: Vec<String>,
}

impl Level2 {
    /// The decision this choice stands for; an empty parameter list for the
    /// chosen tool gives `MissingParams`.
    pub fn decision(self) -> Result<RouteDecision> {
        match self.tool {
            SearchTool::Keyword => RouteDecision::keyword(self.keywords),
            SearchTool::Event => RouteDecision::event(self.event_ids),
            SearchTool::Semantic => Ok(RouteDecision::semantic()),
        }
    }
}

pub fn route_level2<G: ModelGateway + ?Sized>(query: &str, gateway: &G, temperature: f32) -> Result<Level2> {
    if query.trim().is_empty() {
        return Err(Error::EmptyInput);
    }
    ask_twice(gateway, prompts::render_router_l2(query), temperature, "level2", |reply| {
        let obj = first_object(reply)?;
        let tool = choice_of(&obj).and_then(SearchTool::from_choice)?;
        Some(Level2 {
            tool,
            keywords: dedup(string_list(obj.get("keywords")).into_iter()),
            event_ids: dedup(string_list(obj.get("events")).into_iter().map(|e| normalize_event_id(&e))),
        })
    })
}

/// Runs both levels. Unusable replies and missing parameters turn into a
/// `Partial`/`Semantic` decision; only gateway failures are returned as
/// errors.
pub fn route<G: ModelGateway + ?Sized>(query: &str, gateway: &G, temperature: f32) -> Result<Routed> {
    let tier = match route_level1(query, gateway, temperature) {
        Ok(t) => t,
        Err(e @ (Error::RouteParse(_) | Error::MissingParams { .. })) => return Ok(fallback(e)),
        Err(e) => return Err(e),
    };
    let decision = match tier {
        Tier::All => RouteDecision::all(),
        Tier::General => RouteDecision::general(),
        Tier::Partial => match route_level2(query, gateway, temperature).and_then(Level2::decision) {
            Ok(d) => d,
            Err(e @ (Error::RouteParse(_) | Error::MissingParams { .. })) => return Ok(fallback(e)),
            Err(e) => return Err(e),
        },
    };
    Ok(Routed {
        decision,
        fallback: None,
    })
}

fn fallback(reason: Error) -> Routed {
    tracing::info!(%reason, "routing fell back to semantic search");
    Routed {
        decision: RouteDecision::semantic(),
        fallback: Some(reason.to_string()),
    }
}

fn string_list(value: Option<&Value>) -> Vec<String> {
    let scalar = |v: &Value| match v {
        Value::String(s) => Some(s.trim().to_string()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    };
    let items = match value {
        Some(Value::Array(a)) => a.iter().filter_map(scalar).collect(),
        Some(v) => scalar(v).into_iter().collect(),
        None => Vec::new(),
    };
    items.into_iter().filter(|s: &String| !s.is_empty()).collect()
}

/// Keeps the first spelling of each case-insensitively distinct item.
fn dedup(items: impl Iterator<Item = String>) -> Vec<String> {
    let mut seen = HashSet::new();
    items.filter(|s| seen.insert(s.to_lowercase())).collect()
}

/// `event21`, `Event 21`, `E21` and `21` all become `Event21`; anything else
/// is passed through trimmed so it can be reported as unknown.
pub fn normalize_event_id(raw: &str) -> String {
    let t = raw.trim();
    let lower = t.to_ascii_lowercase();
    let digits = lower
        .strip_prefix("event")
        .or_else(|| lower.strip_prefix('e'))
        .unwrap_or(&lower)
        .trim_start_matches([' ', '_', '-'])
        .trim();
    if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) {
        let n = digits.trim_start_matches('0');
        format!("Event{}", if n.is_empty() { "0" } else { n })
    } else {
        t.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{GatewayErrorKind, MockGateway, MockRule, MockScript};

    const L1: &str = "'all', 'partial', or 'general' stage";
    const L2: &str = "'keyword', 'event', or 'se' stage";

    fn gw(l1: &[&str], l2: &[&str]) -> MockGateway {
        let rule = |key: &str, rs: &[&str]| {
            rs[1..].iter().fold(MockRule::contains(key, rs[0]), |r, x| r.then(*x))
        };
        let mut s = MockScript::default();
        if !l1.is_empty() {
            s = s.rule(rule(L1, l1));
        }
        if !l2.is_empty() {
            s = s.rule(rule(L2, l2));
        }
        MockGateway::new(s)
    }

    #[test]
    fn level1_maps() {
        assert_eq!(route_level1("q", &gw(&[r#"{"choice":"all"}"#], &[]), 0.7).unwrap(), Tier::All);
        assert_eq!(route_level1("q", &gw(&[r#"{"choice":"general"}"#], &[]), 0.7).unwrap(), Tier::General);
        assert_eq!(route_level1("q", &gw(&[r#"{"choice": "Partial"}"#], &[]), 0.7).unwrap(), Tier::Partial);
    }

    #[test]
    fn level1_retries_then_fails() {
        let g = gw(&[r#"{"choice":"maybe"}"#], &[]);
        assert!(matches!(route_level1("q", &g, 0.7), Err(Error::RouteParse(_))));
        assert_eq!(g.calls().len(), 2);

        let g = gw(&["nope", r#"{"choice":"all"}"#], &[]);
        assert_eq!(route_level1("q", &g, 0.7).unwrap(), Tier::All);
    }

    #[test]
    fn maybe_twice_falls_back() {
        let g = gw(&[r#"{"choice":"maybe"}"#], &[]);
        let r = route("q", &g, 0.7).unwrap();
        assert_eq!(r.decision, RouteDecision::semantic());
        assert!(r.fallback.is_some());
    }

    #[test]
    fn level2_keyword() {
        let g = gw(&[], &[r#"{"choice":"keyword","keywords":["error","timeout"]}"#]);
        let l2 = route_level2("q", &g, 0.7).unwrap();
        assert_eq!(l2.tool, SearchTool::Keyword);
        assert_eq!(l2.keywords, ["error", "timeout"]);
    }

    #[test]
    fn level2_event_and_alias() {
        let g = gw(&[], &[r#"{"choice":"event","events":["Event21"]}"#]);
        let l2 = route_level2("q", &g, 0.7).unwrap();
        assert_eq!((l2.tool, l2.event_ids), (SearchTool::Event, vec!["Event21".to_string()]));

        let g = gw(&[], &[r#"{"choice":"se"}"#]);
        assert_eq!(route_level2("q", &g, 0.7).unwrap().tool, SearchTool::Semantic);
    }

    #[test]
    fn missing_keywords_fall_back() {
        let g = gw(&[r#"{"choice":"partial"}"#], &[r#"{"choice":"keyword","keywords":[]}"#]);
        let r = route("q", &g, 0.7).unwrap();
        assert_eq!(r.decision, RouteDecision::semantic());
        assert!(r.fallback.unwrap().contains("keyword"));
    }

    #[test]
    fn dedup_and_normalize() {
        let g = gw(
            &[r#"{"choice":"partial"}"#],
            &[r#"{"choice":"event","events":["event21", 21, "Event 3", "E003", "bogus"]}"#],
        );
        let d = route("q", &g, 0.7).unwrap().decision;
        assert_eq!(d.event_ids.unwrap(), ["Event21", "Event3", "bogus"]);

        let g = gw(&[r#"{"choice":"partial"}"#], &[r#"{"choice":"keyword","keywords":["Error","error"," ","ERROR","disk"]}"#]);
        let d = route("q", &g, 0.7).unwrap().decision;
        assert!(d.is_consistent());
        assert_eq!(d.keywords.unwrap(), ["Error", "disk"]);
    }

    #[test]
    fn gateway_error_propagates() {
        let g = MockGateway::new(MockScript::default().rule(MockRule::failing(L1, GatewayErrorKind::Network)));
        assert!(matches!(route("q", &g, 0.7), Err(Error::Gateway(_))));
    }

    #[test]
    fn constructors_are_consistent() {
        for d in [
            RouteDecision::all(),
            RouteDecision::general(),
            RouteDecision::semantic(),
            RouteDecision::keyword(vec!["x".into()]).unwrap(),
            RouteDecision::event(vec!["Event1".into()]).unwrap(),
        ] {
            assert!(d.is_consistent(), "{d:?}");
        }
        assert!(RouteDecision::keyword(vec![]).is_err());
        assert_eq!(RouteDecision::semantic().label(), "partial/semantic");
    }

    #[test]
    fn serde_shape() {
        let d = RouteDecision::keyword(vec!["error".into()]).unwrap();
        let v = serde_json::to_value(&d).unwrap();
        assert_eq!(v, serde_json::json!({"tier":"partial","tool":"keyword","keywords":["error"]}));
    }
}
