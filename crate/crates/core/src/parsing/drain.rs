//! Fixed-depth parse tree clustering.
//!
//! ```text
//!   root
//!    └─ token count            (length layer)
//!        └─ first token        (depth - 3 token layers; digits and
//!            └─ ...             overflow route to "<*>")
//!                └─ [clusters]  (leaf: similarity search)
//! ```
//!
//! Routing never uses a sequence's last token, so one-token and empty lines
//! are clustered directly under their length node.

use std::collections::HashMap;

use super::format::LineFormat;
use super::{DrainConfig, EventTemplate, StructuredLog, StructuredRow};
use crate::{Error, Result};

pub const WILDCARD: &str = "<*>";

/// Share of template positions equal to the line, wildcards excluded from the
/// numerator, together with the template's wildcard count. Two empty
/// sequences are fully similar.
pub fn seq_dist<A: AsRef<str>, B: AsRef<str>>(template: &[A], line: &[B]) -> Result<(f64, usize)> {
    if template.len() != line.len() {
        return Err(Error::LengthMismatch {
            template: template.len(),
            line: line.len(),
        });
    }
    if template.is_empty() {
        return Ok((1.0, 0));
    }
    let mut same = 0usize;
    let mut wildcards = 0usize;
    for (t, l) in template.iter().zip(line) {
        let t = t.as_ref();
        if t == WILDCARD {
            wildcards += 1;
        } else if t == l.as_ref() {
            same += 1;
        }
    }
    Ok((same as f64 / template.len() as f64, wildcards))
}

#[derive(Debug, Default, Clone)]
struct Node {
    children: HashMap<String, Node>,
    clusters: Vec<usize>,
}

#[derive(Debug, Clone)]
struct Cluster {
    tokens: Vec<String>,
    size: usize,
}

/// Incremental Drain parser over content token sequences.
#[derive(Debug, Clone)]
pub struct DrainParser {
    st: f64,
    token_layers: usize,
    max_children: usize,
    root: HashMap<usize, Node>,
    clusters: Vec<Cluster>,
}

fn has_digit(token: &str) -> bool {
    token.bytes().any(|b| b.is_ascii_digit())
}

impl DrainParser {
    pub fn new(config: &DrainConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            st: config.st,
            token_layers: config.depth - 3,
            max_children: config.max_children,
            root: HashMap::new(),
            clusters: Vec::new(),
        })
    }

    /// How many leading tokens of an `n`-token sequence pick its leaf.
    fn routed_tokens(&self, n: usize) -> usize {
        self.token_layers.min(n.saturating_sub(1))
    }

    fn leaf(&self, tokens: &[String]) -> Option<&Node> {
        let mut node = self.root.get(&tokens.len())?;
        for token in &tokens[..self.routed_tokens(tokens.len())] {
            node = node
                .children
                .get(token)
                .or_else(|| node.children.get(WILDCARD))?;
        }
        Some(node)
    }

    /// Best cluster in the leaf at or above the threshold. Ties on similarity
    /// go to the larger wildcard count, then to the older cluster.
    fn best_match(&self, candidates: &[usize], tokens: &[String]) -> Option<usize> {
        let mut best: Option<(usize, f64, usize)> = None;
        for &id in candidates {
            let (sim, wildcards) = seq_dist(&self.clusters[id].tokens, tokens).ok()?;
            let better = match best {
                None => true,
                Some((_, s, w)) => sim > s || (sim == s && wildcards > w),
            };
            if better {
                best = Some((id, sim, wildcards));
            }
        }
        best.filter(|&(_, sim, _)| sim >= self.st).map(|(id, _, _)| id)
    }

    /// Cluster a line would join, without changing the tree.
    pub fn match_tokens(&self, tokens: &[String]) -> Option<usize> {
        self.leaf(tokens).and_then(|leaf| self.best_match(&leaf.clusters, tokens))
    }

    fn insert(&mut self, id: usize) {
        let tokens = self.clusters[id].tokens.clone();
        let routed = self.routed_tokens(tokens.len());
        let max_children = self.max_children;
        let mut node = self.root.entry(tokens.len()).or_default();
        for token in &tokens[..routed] {
            let key = if node.children.contains_key(token) {
                token.as_str()
            } else if has_digit(token) {
                WILDCARD
            } else if node.children.contains_key(WILDCARD) {
                if node.children.len() < max_children {
                    token.as_str()
                } else {
                    WILDCARD
                }
            } else if node.children.len() + 1 < max_children {
                token.as_str()
            } else {
                WILDCARD
            };
            node = node.children.entry(key.to_string()).or_default();
        }
        node.clusters.push(id);
    }

    /// Assigns a token sequence to a cluster, creating one when nothing in
    /// its leaf is similar enough. Returns the 0-based cluster index.
    pub fn add_tokens(&mut self, tokens: Vec<String>) -> usize {
        match self.match_tokens(&tokens) {
            Some(id) => {
                let cluster = &mut self.clusters[id];
                for (t, l) in cluster.tokens.iter_mut().zip(&tokens) {
                    if t != l {
                        *t = WILDCARD.to_string();
                    }
                }
                cluster.size += 1;
                id
            }
            None => {
                let id = self.clusters.len();
                self.clusters.push(Cluster { tokens, size: 1 });
                self.insert(id);
                id
            }
        }
    }

    pub fn event_id(index: usize) -> String {
        format!("Event{}", index + 1)
    }

    pub fn cluster_count(&self) -> usize {
        self.clusters.len()
    }

    /// Templates in discovery order.
    pub fn templates(&self) -> Vec<EventTemplate> {
        self.clusters
            .iter()
            .enumerate()
            .map(|(i, c)| EventTemplate {
                event_id: Self::event_id(i),
                template: c.tokens.join(" "),
                occurrences: c.size,
            })
            .collect()
    }
}

/// Parses every line into a structured row and mines the event templates.
pub fn parse_lines<S: AsRef<str>>(lines: &[S], config: &DrainConfig) -> Result<(StructuredLog, Vec<EventTemplate>)> {
    if lines.is_empty() {
        return Err(Error::EmptyInput);
    }
    let format = LineFormat::new(config)?;
    let mut parser = DrainParser::new(config)?;
    let mut rows = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        let line = line.as_ref();
        let pre = format.preprocess(line);
        let id = parser.add_tokens(pre.tokens);
        rows.push(StructuredRow {
            line_id: i + 1,
            fields: pre.fields,
            content: pre.content,
            event_id: DrainParser::event_id(id),
            line: line.to_string(),
        });
    }
    let structured = StructuredLog {
        headers: format.headers().to_vec(),
        rows,
    };
    Ok((structured, parser.templates()))
}
