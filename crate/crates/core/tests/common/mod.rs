//! Shared fixtures and brute-force oracles for the integration suites.
#![allow(dead_code)]

use std::collections::HashMap;
use std::path::PathBuf;

use logchat_core::gateway::{MockGateway, MockRule, MockScript};
use logchat_core::orchestrator::{answer_query, open_session};
use logchat_core::parsing::{parse_lines, templates_csv_rows};
use logchat_core::prompts::{self, AllEventContext, MatchContext};
use logchat_core::{
    Answer, DrainConfig, EventTemplate, LogCategory, QueryOptions, RouteDecision, SessionOptions, StructuredLog,
    StructuredRow,
};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::Rng;

pub const L1_KEY: &str = "'all', 'partial', or 'general' stage";
pub const L2_KEY: &str = "'keyword', 'event', or 'se' stage";
pub const RECOGNIZER_KEY: &str = "categorizing a provided log line";

pub const LINUX_SAMPLE: &str = include_str!("../fixtures/linux_sample.log");

pub fn fixture_prompt(name: &str) -> &'static str {
    match name {
        "system" => include_str!("../fixtures/prompts/system.txt"),
        "recognizer" => include_str!("../fixtures/prompts/recognizer.txt"),
        "router_level1" => include_str!("../fixtures/prompts/router_level1.txt"),
        "router_level2" => include_str!("../fixtures/prompts/router_level2.txt"),
        "all_event" => include_str!("../fixtures/prompts/all_event.txt"),
        "retrieve" => include_str!("../fixtures/prompts/retrieve.txt"),
        "search" => include_str!("../fixtures/prompts/search.txt"),
        "event" => include_str!("../fixtures/prompts/event.txt"),
        other => panic!("no prompt fixture {other}"),
    }
}

const TRIM_LINE: &str = "The context is too long, and it has been trimmed to {MAX_LINES} lines.\n";

/// Replaces each `{expr}` placeholder of a reference template with a value.
fn substitute(template: &str, slots: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (expr, value) in slots {
        let key = format!("{{{expr}}}");
        assert!(out.contains(&key), "placeholder {key} missing from reference");
        out = out.replace(&key, value);
    }
    assert!(!out.contains("{question}") && !out.contains("{query_str}"));
    out
}

/// Renders every prompt from fixed inputs and compares it byte for byte
/// with the reference text after placeholder substitution. Returns one
/// `(name, outcome)` entry per template variant.
pub fn prompt_fidelity() -> Vec<(String, Result<(), String>)> {
    let q = "Which user failed to log in at 03:28:22?";
    let mut out = Vec::new();
    let mut check = |name: &str, got: String, want: String| {
        let res = if got == want {
            Ok(())
        } else {
            let at = got.bytes().zip(want.bytes()).position(|(a, b)| a != b).unwrap_or(got.len().min(want.len()));
            Err(format!("first difference at byte {at}: got {:?} want {:?}", &got[at.min(got.len())..], &want[at.min(want.len())..]))
        };
        out.push((name.to_string(), res));
    };

    check(
        "system",
        prompts::render_system_prompt(q),
        substitute(fixture_prompt("system"), &[("query_str", q)]),
    );

    let cats = LogCategory::names();
    let sample = ["Jun 14 15:16:01 combo sshd(pam_unix)[19939]: check pass; user unknown", "line two"];
    let cat_repr = prompts::py_list(cats.iter().copied());
    let recognizer_ref = fixture_prompt("recognizer").replace("\\n", "\n");
    check(
        "recognizer",
        prompts::render_recognizer(&cats, &sample),
        substitute(&recognizer_ref, &[("categories", &cat_repr), ("log", &sample.join("\n"))]),
    );

    check(
        "router_level1",
        prompts::render_router_l1(q),
        substitute(fixture_prompt("router_level1"), &[("question", q)]),
    );
    check(
        "router_level2",
        prompts::render_router_l2(q),
        substitute(fixture_prompt("router_level2"), &[("question", q)]),
    );

    let templates = vec![
        EventTemplate {
            event_id: "Event1".into(),
            template: "check pass; user unknown".into(),
            occurrences: 3,
        },
        EventTemplate {
            event_id: "Event2".into(),
            template: "session opened for user <*> by (uid=<*>)".into(),
            occurrences: 1,
        },
    ];
    let rows = templates_csv_rows(&templates).unwrap();
    let first = "Jun 14 06:06:45 combo sshd(pam_unix)[5943]: check pass; user unknown  ";
    let last = "Jun 14 07:00:01 combo su(pam_unix)[2936]: session opened for user cyrus by (uid=0)";
    let ctx = AllEventContext {
        log_file_name: "Linux_2k.log",
        template_rows: &rows,
        first_line: first,
        last_line: last,
        line_count: 4,
        template_count: 2,
    };
    check(
        "all_event",
        prompts::render_all_event(&ctx, q),
        substitute(
            fixture_prompt("all_event"),
            &[
                ("log_file_name", "Linux_2k.log"),
                ("templates[1:]", &rows),
                ("log_lines[0].strip()", first.trim()),
                ("log_lines[-1].strip()", last.trim()),
                ("len(log_lines)", "4"),
                ("len(templates)", "2"),
                ("question", q),
            ],
        ),
    );

    let chunks = ["chunk one\nline b", "chunk two"];
    check(
        "retrieve",
        prompts::render_retrieve(&chunks, q),
        substitute(fixture_prompt("retrieve"), &[("context_str", &chunks.join("\n\n")), ("query_str", q)]),
    );

    let lines = ["l1 error", "l2 ERROR"];
    for truncated in [true, false] {
        let ctx = MatchContext {
            total: if truncated { 250 } else { 2 },
            truncated,
            max_lines: 200,
            lines: &lines,
        };
        let total = ctx.total.to_string();
        let suffix = if truncated { "truncated" } else { "untruncated" };
        let strip = |t: &str| if truncated { t.to_string() } else { t.replacen(TRIM_LINE, "", 1) };

        let search_ref = strip(fixture_prompt("search"));
        let mut slots = vec![
            ("len(search_result)", total.as_str()),
            ("keywords", "['error']"),
            ("search_result_max if search_result_modified else search_result", "l1 error\nl2 ERROR"),
            ("question", q),
        ];
        if truncated {
            slots.push(("MAX_LINES", "200"));
        }
        check(&format!("search/{suffix}"), prompts::render_search(&ctx, &["error"], q), substitute(&search_ref, &slots));

        let event_ref = strip(fixture_prompt("event"));
        let relevant = "[['Event1', 'check pass; user unknown', 3]]";
        let mut slots = vec![
            ("len(search_result)", total.as_str()),
            ("events", "['Event1']"),
            ("filtered_df.values.tolist()", relevant),
            ("search_result_max if search_result_modified else search_result", "l1 error\nl2 ERROR"),
            ("question", q),
        ];
        if truncated {
            slots.push(("MAX_LINES", "200"));
        }
        check(
            &format!("event/{suffix}"),
            prompts::render_event(&ctx, &["Event1"], &templates[..1], q),
            substitute(&event_ref, &slots),
        );
    }
    out
}

// ---------------------------------------------------------------- drain

/// Random token-sequence log, shaped like real logs: a handful of line
/// skeletons with variable slots, plus noise lines.
pub fn synthetic_log(rng: &mut StdRng) -> Vec<String> {
    let words = ["open", "close", "read", "write", "user", "disk", "error", "ok", "node", "retry", "from", "to"];
    let skeletons: Vec<Vec<Option<&str>>> = (0..rng.gen_range(1..6))
        .map(|_| {
            (0..rng.gen_range(0..8))
                .map(|_| if rng.gen_bool(0.7) { Some(*words.choose(rng).unwrap()) } else { None })
                .collect()
        })
        .collect();
    (0..rng.gen_range(1..120))
        .map(|_| {
            if rng.gen_bool(0.1) {
                return (0..rng.gen_range(0..5)).map(|_| *words.choose(rng).unwrap()).collect::<Vec<_>>().join(" ");
            }
            skeletons
                .choose(rng)
                .unwrap()
                .iter()
                .map(|slot| match slot {
                    Some(w) => w.to_string(),
                    None if rng.gen_bool(0.5) => format!("id{}", rng.gen_range(0..1000)),
                    None => words.choose(rng).unwrap().to_string(),
                })
                .collect::<Vec<_>>()
                .join(if rng.gen_bool(0.05) { "  " } else { " " })
        })
        .collect()
}

pub fn random_config(rng: &mut StdRng) -> DrainConfig {
    DrainConfig {
        log_format: "<Content>".into(),
        mask_regexes: if rng.gen_bool(0.5) { vec![r"id\d+".into()] } else { vec![] },
        st: rng.gen_range(0.0..=1.0),
        depth: rng.gen_range(3..8),
        max_children: rng.gen_range(1..6),
        ..DrainConfig::default_for(LogCategory::Linux)
    }
}

/// Conservation: every line lands in exactly one known event, and each
/// template's occurrence count equals the lines assigned to it.
pub fn check_conservation(lines: &[String], config: &DrainConfig) -> Result<(), String> {
    let (structured, templates) = parse_lines(lines, config).map_err(|e| e.to_string())?;
    let sum: usize = templates.iter().map(|t| t.occurrences).sum();
    if sum != lines.len() || structured.rows.len() != lines.len() {
        return Err(format!("sum {sum}, rows {}, lines {}", structured.rows.len(), lines.len()));
    }
    let mut per: HashMap<&str, usize> = HashMap::new();
    for row in &structured.rows {
        *per.entry(row.event_id.as_str()).or_default() += 1;
    }
    for t in &templates {
        if per.get(t.event_id.as_str()).copied().unwrap_or(0) != t.occurrences {
            return Err(format!("{} occurrences mismatch", t.event_id));
        }
    }
    if per.len() != templates.len() {
        return Err("row refers to an unknown event".into());
    }
    Ok(())
}

// ---------------------------------------------------------------- search

pub fn random_lines(rng: &mut StdRng) -> Vec<String> {
    let alphabet = ['a', 'b', 'A', 'B', 'e', 'E', ' ', ':', '1'];
    (0..rng.gen_range(0..60))
        .map(|_| (0..rng.gen_range(0..16)).map(|_| *alphabet.choose(rng).unwrap()).collect())
        .collect()
}

pub fn random_keywords(rng: &mut StdRng) -> Vec<String> {
    let alphabet = ['a', 'b', 'A', 'B', 'e', 'E', ':', '1'];
    (0..rng.gen_range(1..4))
        .map(|_| (0..rng.gen_range(1..4)).map(|_| *alphabet.choose(rng).unwrap()).collect())
        .collect()
}

fn ascii_fold(c: char) -> char {
    if c.is_ascii_uppercase() {
        ((c as u8) + 32) as char
    } else {
        c
    }
}

/// Linear scan with an explicit window comparison per keyword.
pub fn keyword_oracle(lines: &[String], keywords: &[String]) -> Vec<usize> {
    let mut hits = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        let hay: Vec<char> = line.chars().map(ascii_fold).collect();
        let mut matched = false;
        for k in keywords {
            let needle: Vec<char> = k.trim().chars().map(ascii_fold).collect();
            if needle.is_empty() {
                continue;
            }
            if hay.len() >= needle.len() {
                for start in 0..=hay.len() - needle.len() {
                    if (0..needle.len()).all(|j| hay[start + j] == needle[j]) {
                        matched = true;
                    }
                }
            }
        }
        if matched {
            hits.push(i + 1);
        }
    }
    hits
}

pub fn random_structured(rng: &mut StdRng) -> (StructuredLog, Vec<EventTemplate>) {
    let n_events = rng.gen_range(1..8);
    let rows: Vec<StructuredRow> = (0..rng.gen_range(0..80))
        .map(|i| StructuredRow {
            line_id: i + 1,
            fields: vec![],
            content: format!("c{i}"),
            event_id: format!("Event{}", rng.gen_range(1..=n_events)),
            line: format!("raw line {i}"),
        })
        .collect();
    let templates = (1..=n_events)
        .map(|e| EventTemplate {
            event_id: format!("Event{e}"),
            template: format!("t{e}"),
            occurrences: rows.iter().filter(|r| r.event_id == format!("Event{e}")).count(),
        })
        .collect();
    (StructuredLog { headers: vec![], rows }, templates)
}

pub fn event_oracle(log: &StructuredLog, ids: &[String]) -> Vec<usize> {
    let mut hits = Vec::new();
    for row in &log.rows {
        let mut hit = false;
        for id in ids {
            if *id == row.event_id {
                hit = true;
            }
        }
        if hit {
            hits.push(row.line_id);
        }
    }
    hits
}

// ---------------------------------------------------------------- metrics

fn naive_tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() {
            for l in c.to_lowercase() {
                cur.push(l);
            }
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Term-frequency cosine with the vocabulary built by nested scans.
pub fn cosine_oracle(a: &str, b: &str) -> f64 {
    let (ta, tb) = (naive_tokens(a), naive_tokens(b));
    let mut vocab: Vec<&String> = Vec::new();
    for t in ta.iter().chain(&tb) {
        if !vocab.contains(&t) {
            vocab.push(t);
        }
    }
    let count = |ts: &[String], w: &String| ts.iter().filter(|t| *t == w).count() as f64;
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for w in vocab {
        let (x, y) = (count(&ta, w), count(&tb, w));
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na.sqrt() * nb.sqrt())
    }
}

/// ROUGE-1 by greedy one-to-one pairing of equal tokens.
pub fn rouge_oracle(cand: &str, refr: &str) -> (f64, f64, f64) {
    let (tc, tr) = (naive_tokens(cand), naive_tokens(refr));
    let mut used = vec![false; tr.len()];
    let mut overlap = 0usize;
    for c in &tc {
        for (j, r) in tr.iter().enumerate() {
            if !used[j] && r == c {
                used[j] = true;
                overlap += 1;
                break;
            }
        }
    }
    let p = overlap as f64 / tc.len() as f64;
    let r = overlap as f64 / tr.len() as f64;
    let f = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
    (p, r, f)
}

pub fn random_text(rng: &mut StdRng) -> String {
    let words = ["the", "cat", "sat", "on", "mat", "Error", "disk", "42", "node-7", "failed", "ok", "é"];
    let seps = [" ", ", ", ". ", "-", "  ", "\n"];
    let n = rng.gen_range(1..15);
    let mut s = String::new();
    for i in 0..n {
        if i > 0 {
            s.push_str(seps.choose(rng).unwrap());
        }
        s.push_str(words.choose(rng).unwrap());
    }
    s
}

// ---------------------------------------------------------------- routing

pub struct RouteCase {
    pub name: &'static str,
    pub level1: Vec<&'static str>,
    pub level2: Vec<&'static str>,
    pub expected: RouteDecision,
    pub fallback: bool,
}

fn case(name: &'static str, level1: &[&'static str], level2: &[&'static str], expected: RouteDecision, fallback: bool) -> RouteCase {
    RouteCase {
        name,
        level1: level1.to_vec(),
        level2: level2.to_vec(),
        expected,
        fallback,
    }
}

fn kw(items: &[&str]) -> RouteDecision {
    RouteDecision::keyword(items.iter().map(|s| s.to_string()).collect()).unwrap()
}

fn ev(items: &[&str]) -> RouteDecision {
    RouteDecision::event(items.iter().map(|s| s.to_string()).collect()).unwrap()
}

/// Thirty scripted routing situations, ten per level-one tier.
pub fn routing_matrix() -> Vec<RouteCase> {
    let all = RouteDecision::all;
    let general = RouteDecision::general;
    let sem = RouteDecision::semantic;
    let p = r#"{"choice":"partial"}"#;
    vec![
        case("all/plain", &[r#"{"choice":"all"}"#], &[], all(), false),
        case("all/spaced", &[r#"{ "choice" : "all" }"#], &[], all(), false),
        case("all/uppercase", &[r#"{"choice":"ALL"}"#], &[], all(), false),
        case("all/preamble", &[r#"Here is the JSON: {"choice":"all"}"#], &[], all(), false),
        case("all/fenced", &["```json\n{\"choice\": \"all\"}\n```"], &[], all(), false),
        case("all/single-quotes", &["{'choice': 'all'}"], &[], all(), false),
        case("all/extra-keys", &[r#"{"choice":"all","reason":"needs {every} line"}"#], &[], all(), false),
        case("all/retry-after-garbage", &["I think all", r#"{"choice":"all"}"#], &[], all(), false),
        case("all/retry-after-unknown", &[r#"{"choice":"everything"}"#, r#"{"choice":"all"}"#], &[], all(), false),
        case("all/trailing-text", &["{\"choice\":\"all\"}\nThanks!"], &[], all(), false),
        case("general/plain", &[r#"{"choice":"general"}"#], &[], general(), false),
        case("general/mixed-case", &[r#"{"choice":"General"}"#], &[], general(), false),
        case("general/padded", &[r#"{"choice":"  general "}"#], &[], general(), false),
        case("general/preamble", &[r#"Sure. {"choice": "general"}"#], &[], general(), false),
        case("general/single-quotes", &["{'choice': 'general'}"], &[], general(), false),
        case("general/retry", &["{choice: general", r#"{"choice":"general"}"#], &[], general(), false),
        case("general/first-object-wins", &[r#"{"choice":"general"} {"choice":"all"}"#], &[], general(), false),
        case("malformed/twice", &["not json", "still not json"], &[], sem(), true),
        case("malformed/maybe-twice", &[r#"{"choice":"maybe"}"#], &[], sem(), true),
        case("malformed/no-choice-key", &[r#"{"tier":"all"}"#], &[], sem(), true),
        case("partial/keyword", &[p], &[r#"{"choice":"keyword","keywords":["error","timeout"]}"#], kw(&["error", "timeout"]), false),
        case("partial/keyword-dedup", &[p], &[r#"{"choice":"keyword","keywords":["Error","error","ERROR"]}"#], kw(&["Error"]), false),
        case("partial/event", &[p], &[r#"{"choice":"event","events":["Event21"]}"#], ev(&["Event21"]), false),
        case("partial/event-normalized", &[p], &[r#"{"choice":"event","events":["event3", 7, "Event3"]}"#], ev(&["Event3", "Event7"]), false),
        case("partial/se-alias", &[p], &[r#"{"choice":"se"}"#], sem(), false),
        case("partial/semantic", &[p], &[r#"{"choice":"semantic"}"#], sem(), false),
        case("partial/keyword-missing", &[p], &[r#"{"choice":"keyword","keywords":[]}"#], sem(), true),
        case("partial/event-missing", &[p], &[r#"{"choice":"event"}"#], sem(), true),
        case("partial/level2-malformed", &[p], &["keyword please", "{\"choice\": "], sem(), true),
        case("partial/level2-retry", &[p], &["??", r#"{"choice":"keyword","keywords":["03:28:22"]}"#], kw(&["03:28:22"]), false),
    ]
}

pub fn script_for(case: &RouteCase, final_reply: &str) -> MockScript {
    let mut script = MockScript::new(final_reply);
    let rule = |key: &str, replies: &[&str]| replies[1..].iter().fold(MockRule::contains(key, replies[0]), |r, x| r.then(*x));
    if !case.level1.is_empty() {
        script = script.rule(rule(L1_KEY, &case.level1));
    }
    if !case.level2.is_empty() {
        script = script.rule(rule(L2_KEY, &case.level2));
    }
    script
}

pub fn run_route_case(case: &RouteCase) -> Result<(), String> {
    let gw = MockGateway::new(script_for(case, "unused"));
    let routed = logchat_core::router::route("what happened?", &gw, 0.7).map_err(|e| e.to_string())?;
    if routed.decision != case.expected {
        return Err(format!("got {:?}, want {:?}", routed.decision, case.expected));
    }
    if routed.fallback.is_some() != case.fallback {
        return Err(format!("fallback flag {:?}", routed.fallback));
    }
    if !routed.decision.is_consistent() {
        return Err("decision breaks type invariants".into());
    }
    Ok(())
}

// ---------------------------------------------------------------- end to end

/// Level-two replies are served in question order to the three partial
/// questions, so the rule for them must come before the per-question ones
/// (both level prompts end with "Question to route: ...").
pub fn e2e_script() -> MockScript {
    MockScript::new("The log shows repeated authentication failures.")
        .rule(MockRule::contains(RECOGNIZER_KEY, r#"{"category": "Linux"}"#))
        .rule(
            MockRule::contains(L2_KEY, r#"{"choice":"keyword","keywords":["authentication failure"]}"#)
                .then(r#"{"choice":"event","events":["Event1","Event2"]}"#)
                .then(r#"{"choice":"se"}"#),
        )
        .rule(MockRule::contains("Question to route: How many", r#"{"choice":"partial"}"#))
        .rule(MockRule::contains("Question to route: Summarize", r#"{"choice":"all"}"#))
        .rule(MockRule::contains("Question to route: What does OOM", r#"{"choice":"general"}"#))
        .rule(MockRule::contains("Question to route: Which events", r#"{"choice":"partial"}"#))
        .rule(MockRule::contains("Question to route: When did", r#"{"choice":"partial"}"#))
}

pub const E2E_QUESTIONS: [&str; 5] = [
    "How many authentication failures happened?",
    "Summarize this log.",
    "What does OOM mean in general?",
    "Which events relate to sessions?",
    "When did the ftp connections start?",
];

pub fn run_e2e() -> Vec<Answer> {
    let gw = MockGateway::new(e2e_script());
    let session = open_session("linux_sample.log", LINUX_SAMPLE, &gw, &SessionOptions::default()).expect("session");
    E2E_QUESTIONS
        .iter()
        .map(|q| answer_query(&session, q, &gw, &QueryOptions::default()).expect("answer"))
        .collect()
}

// ---------------------------------------------------------------- datasets

/// Directory holding `HDFS_2k.log` and `HDFS_2k.log_structured.csv`:
/// `LOGCHAT_HDFS_DIR` when set, else `tests/data/HDFS` in this crate.
pub fn hdfs_dir() -> PathBuf {
    std::env::var_os("LOGCHAT_HDFS_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/HDFS"))
}

pub struct LabeledLog {
    pub lines: Vec<String>,
    pub truth: Vec<String>,
}

pub fn load_hdfs() -> Result<LabeledLog, String> {
    let dir = hdfs_dir();
    let log = dir.join("HDFS_2k.log");
    let csv_path = dir.join("HDFS_2k.log_structured.csv");
    let raw = std::fs::read_to_string(&log).map_err(|e| format!("{}: {e}", log.display()))?;
    let mut reader = csv::Reader::from_path(&csv_path).map_err(|e| format!("{}: {e}", csv_path.display()))?;
    let headers = reader.headers().map_err(|e| e.to_string())?.clone();
    let col = headers.iter().position(|h| h == "EventId").ok_or("no EventId column")?;
    let truth = reader
        .records()
        .map(|r| r.map(|r| r[col].to_string()).map_err(|e| e.to_string()))
        .collect::<Result<Vec<_>, _>>()?;
    let lines: Vec<String> = raw.lines().map(str::to_string).collect();
    if lines.len() != truth.len() {
        return Err(format!("{} log lines but {} labels", lines.len(), truth.len()));
    }
    Ok(LabeledLog { lines, truth })
}
