mod common;

use logchat_core::eval::{run_benchmark, LiveContext, Manifest};
use logchat_core::gateway::{MockGateway, MockRule, MockScript};
use logchat_core::orchestrator::{answer_query, open_session};
use logchat_core::{Answer, PromptKind, QueryOptions, References, Session, SessionOptions, Tier};
use proptest::prelude::*;

fn check_invariants(answer: &Answer, session: &Session) -> Result<(), String> {
    let route = &answer.route;
    if !route.is_consistent() {
        return Err(format!("inconsistent route {route:?}"));
    }
    if answer.references.is_some() != (route.tier == Tier::Partial) {
        return Err("references present iff partial".into());
    }
    if answer.prompt_kind != PromptKind::for_route(route) {
        return Err("prompt kind does not follow route".into());
    }
    match &answer.references {
        Some(References::Lines { result, .. }) => {
            for m in &result.matches {
                if session.raw_lines.get(m.line_id - 1) != Some(&m.text) {
                    return Err(format!("line {} is not in the file", m.line_id));
                }
            }
        }
        Some(References::Chunks { chunks }) => {
            for c in chunks {
                let (a, b) = c.chunk.line_span;
                if session.raw_lines[a - 1..b].join("\n") != c.chunk.text {
                    return Err(format!("chunk {} is not in the file", c.chunk.chunk_id));
                }
            }
        }
        None => {}
    }
    Ok(())
}

#[test]
fn five_runs_are_bit_identical() {
    let first = common::run_e2e();
    let first_json = serde_json::to_string(&first).unwrap();
    for _ in 0..4 {
        let again = common::run_e2e();
        assert_eq!(again, first);
        assert_eq!(serde_json::to_string(&again).unwrap(), first_json);
    }
    let kinds: Vec<PromptKind> = first.iter().map(|a| a.prompt_kind).collect();
    assert_eq!(
        kinds,
        [PromptKind::Search, PromptKind::AllEvent, PromptKind::General, PromptKind::Event, PromptKind::Retrieve]
    );
}

#[test]
fn scripted_walk_respects_invariants() {
    let gw = MockGateway::new(common::e2e_script());
    let session = open_session("linux_sample.log", common::LINUX_SAMPLE, &gw, &SessionOptions::default()).unwrap();
    assert_eq!(session.category.name(), "Linux");
    assert!(!session.templates.is_empty());
    assert!(!session.index.is_empty());
    let before = session.clone();
    for q in common::E2E_QUESTIONS {
        let a = answer_query(&session, q, &gw, &QueryOptions::default()).unwrap();
        check_invariants(&a, &session).unwrap();
    }
    assert_eq!(session, before);

    let expected = common::LINUX_SAMPLE.lines().filter(|l| l.contains("authentication failure")).count();
    let a = answer_query(&session, common::E2E_QUESTIONS[0], &MockGateway::new(common::e2e_script()), &QueryOptions::default());
    let Some(References::Lines { result, .. }) = a.unwrap().references else { panic!() };
    assert_eq!(result.total, expected);
}

#[test]
fn answers_round_trip_through_json() {
    for a in common::run_e2e() {
        let back: Answer = serde_json::from_str(&serde_json::to_string(&a).unwrap()).unwrap();
        assert_eq!(Answer { prompt: a.prompt.clone(), ..back }, a);
    }
}

#[test]
fn live_benchmark_is_repeatable() {
    let manifest = Manifest::parse(
        r#"{"name":"mock","cases":[
            {"task":"summarization","question":"Summarize this log.","reference_answer":"repeated authentication failures for root"},
            {"task":"log_filtering","question":"How many authentication failures happened?","reference_answer":"there were many authentication failures"},
            {"task":"log_understanding","question":"What does OOM mean in general?","reference_answer":"out of memory"}
        ]}"#,
    )
    .unwrap();
    let run = || {
        let gw = MockGateway::new(common::e2e_script());
        let session = open_session("linux_sample.log", common::LINUX_SAMPLE, &gw, &SessionOptions::default()).unwrap();
        let live = LiveContext { session: &session, gateway: &gw, options: QueryOptions::default() };
        run_benchmark(&manifest, Some(&live)).unwrap()
    };
    let a = run();
    assert_eq!(a, run());
    assert_eq!(a.rows.len(), 3);
    assert!(a.rows.iter().all(|r| (0.0..=1.0).contains(&r.cosine) && (0.0..=1.0).contains(&r.rouge1_f1)));
}

const LEVEL1: [&str; 6] = [
    r#"{"choice":"all"}"#,
    r#"{"choice":"partial"}"#,
    r#"{"choice":"general"}"#,
    r#"{"choice":"maybe"}"#,
    "garbage",
    r#"{'choice': 'partial'}"#,
];

const LEVEL2: [&str; 8] = [
    r#"{"choice":"keyword","keywords":["session"]}"#,
    r#"{"choice":"keyword","keywords":["nothing-matches-this"]}"#,
    r#"{"choice":"keyword","keywords":[]}"#,
    r#"{"choice":"event","events":["Event1"]}"#,
    r#"{"choice":"event","events":["Event999"]}"#,
    r#"{"choice":"se"}"#,
    r#"{"choice":"semantic"}"#,
    "}{",
];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_routing_scripts_keep_invariants(l1 in 0usize..6, l2 in 0usize..8, l1b in 0usize..6, l2b in 0usize..8) {
        let script = MockScript::new("answer")
            .rule(MockRule::contains(common::RECOGNIZER_KEY, r#"{"category":"Linux"}"#))
            .rule(MockRule::contains(common::L2_KEY, LEVEL2[l2]).then(LEVEL2[l2b]))
            .rule(MockRule::contains(common::L1_KEY, LEVEL1[l1]).then(LEVEL1[l1b]));
        let gw = MockGateway::new(script);
        let session = open_session("s.log", common::LINUX_SAMPLE, &gw, &SessionOptions::default()).unwrap();
        let a = answer_query(&session, "what happened?", &gw, &QueryOptions::default()).unwrap();
        prop_assert_eq!(check_invariants(&a, &session), Ok(()));
    }
}
