mod support;

use intent_forge::analyzer::{detect_comments, extract_code};
use intent_forge::bench::{aggregate_report, FailureReason, RunRecord};
use intent_forge::function_table::{parse_type, HostValue, InvokeError, SemanticType};
use intent_forge::gateway::ModelConfig;
use intent_forge::host::{SeededRng, STANDARD_CATALOG};
use intent_forge::interpreter::{run_source, ExecLimits, ExecutionTrace};
use intent_forge::prompt::{build_prompt, Intention};
use intent_forge::suite::{environment, standard_table};
use proptest::prelude::*;

use support::chunking::check_chunking;
use support::pure_programs::generate;

fn semantic_type() -> impl Strategy<Value = SemanticType> {
    let leaf = prop_oneof![
        Just(SemanticType::String),
        Just(SemanticType::Integer),
        Just(SemanticType::Float),
        Just(SemanticType::Boolean),
        Just(SemanticType::Null),
    ];
    leaf.prop_recursive(4, 24, 4, |inner| {
        prop_oneof![
            inner.clone().prop_map(SemanticType::collection),
            (inner.clone(), inner.clone()).prop_map(|(k, v)| SemanticType::dictionary(k, v)),
            prop::collection::vec(inner, 2..4).prop_map(SemanticType::union),
        ]
    })
}

fn host_value() -> impl Strategy<Value = HostValue> {
    let leaf = prop_oneof![
        Just(HostValue::Null),
        any::<bool>().prop_map(HostValue::Boolean),
        (-10i64..10).prop_map(HostValue::Integer),
        (-10.0f64..10.0).prop_map(HostValue::Float),
        "[a-z@. ]{0,12}".prop_map(HostValue::Text),
    ];
    leaf.prop_recursive(2, 8, 3, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 0..3).prop_map(HostValue::List),
            prop::collection::vec(("[a-z]{1,4}", inner), 0..3).prop_map(|kv| HostValue::Map(kv.into_iter().collect())),
        ]
    })
}

fn record() -> impl Strategy<Value = RunRecord> {
    (
        prop::sample::select(vec!["a", "b", "c"]),
        1u32..10,
        any::<bool>(),
        any::<(bool, bool, bool)>(),
        0.0f64..2000.0,
        2.0f64..12.0,
    )
        .prop_map(|(m, id, success, (pre, post, comments), ttft, rt)| RunRecord {
            model_name: m.into(),
            intention_id: id,
            success,
            failure_reason: if success { None } else { Some(FailureReason::PredicateFailed) },
            has_preamble: pre,
            has_postamble: post,
            has_comments: comments,
            ttft_ms: ttft,
            response_time_s: rt,
            trace_ref: None,
            detail: None,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn chunked_streams_concatenate_in_order(
        text in "[ -~\n]{1,80}",
        cuts in prop::collection::vec(0usize..100, 0..30),
        gaps in prop::collection::vec(0.1f64..400.0, 1..8),
    ) {
        prop_assert_eq!(check_chunking(&text, &cuts, &gaps), Ok(()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn types_round_trip(ty in semantic_type()) {
        let text = ty.to_string();
        prop_assert_eq!(parse_type(&text).unwrap(), ty);
    }

    #[test]
    fn extraction_reconstructs_and_ignores_label(
        pre in "([A-Za-z .:]{0,20}\n){0,2}",
        code_lines in prop::collection::vec("[a-z =()0-9#']{0,15}", 0..4),
        label in "[a-z0-9+-]{0,8}",
        post in "(\n[A-Za-z .:]{0,20}){0,2}",
    ) {
        let code = code_lines.join("\n");
        let response = format!("{pre}```{label}\n{code}\n```{post}");
        let parsed = extract_code(&response).unwrap();
        prop_assert_eq!(&parsed.code, &code);
        prop_assert_eq!(parsed.reconstruct(), response);
        prop_assert_eq!(parsed.has_preamble, !pre.trim().is_empty());
        prop_assert_eq!(parsed.has_postamble, !post.trim().is_empty());
        let plain = extract_code(&format!("{pre}```\n{code}\n```{post}")).unwrap();
        prop_assert_eq!(plain.code, parsed.code);
        prop_assert_eq!(plain.has_comments, parsed.has_comments);
    }

    #[test]
    fn prompt_is_deterministic_and_complete(text in "[A-Za-z0-9 ,.?{}]{1,60}") {
        let table = standard_table();
        let config = ModelConfig::fixture("m");
        let intention = Intention::new(3, text.clone());
        let a = build_prompt(&intention, &table, &config).unwrap();
        let b = build_prompt(&intention, &table, &config).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.user_message.contains(&text));
        for line in STANDARD_CATALOG {
            prop_assert!(a.user_message.contains(line));
        }
    }

    #[test]
    fn invoke_is_type_sound(
        index in 0usize..16,
        args in prop::collection::vec(host_value(), 0..5),
    ) {
        let table = standard_table();
        let spec = table.specs().nth(index).unwrap().clone();
        let mut env = environment().build();
        let conforms = args.len() == spec.arity()
            && spec.params.iter().zip(&args).all(|(p, a)| a.conforms_to(&p.ty));
        match table.invoke(&spec.name, &args, &mut env) {
            Ok(value) => {
                prop_assert!(conforms);
                prop_assert!(value.conforms_to(&spec.return_type));
                prop_assert_eq!(env.effect_count(), 1);
            }
            Err(InvokeError::Host(_)) => prop_assert!(conforms),
            Err(_) => {
                prop_assert!(!conforms);
                prop_assert_eq!(env.effect_count(), 0);
            }
        }
    }

    #[test]
    fn comment_free_programs_are_clean(seed in any::<u64>()) {
        prop_assert!(!detect_comments(&generate(seed).source()));
    }

    #[test]
    fn traces_round_trip_through_jsonl(seed in any::<u64>()) {
        let mut env = environment().build();
        let trace = run_source(&generate(seed).source(), &standard_table(), &mut env, &ExecLimits::default(), Some("p"));
        let text = trace.to_jsonl();
        prop_assert_eq!(ExecutionTrace::from_jsonl(&text).unwrap(), trace);
    }

    #[test]
    fn uniform_stays_in_range(seed in any::<u64>(), start in -1000i64..1000, span in 0i64..500) {
        let mut rng = SeededRng::new(seed);
        let mut again = SeededRng::new(seed);
        for _ in 0..8 {
            let v = rng.uniform(start, start + span);
            prop_assert_eq!(v, again.uniform(start, start + span));
            match v {
                Some(v) => prop_assert!(span > 0 && v >= start && v < start + span),
                None => prop_assert_eq!(span, 0),
            }
        }
    }

    #[test]
    fn aggregates_are_consistent(records in prop::collection::vec(record(), 1..30)) {
        let aggs = aggregate_report(&records);
        prop_assert_eq!(aggs.iter().map(|a| a.runs).sum::<usize>(), records.len());
        for a in &aggs {
            let rs: Vec<_> = records.iter().filter(|r| r.model_name == a.model_name).collect();
            prop_assert_eq!(a.success_count + a.fail_count, a.runs);
            prop_assert_eq!(a.success_count, rs.iter().filter(|r| r.success).count());
            prop_assert!(a.preamble_count <= a.runs && a.comment_count <= a.runs);
            let lo = rs.iter().map(|r| r.response_time_s).fold(f64::INFINITY, f64::min);
            let hi = rs.iter().map(|r| r.response_time_s).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(a.avg_response_time_s >= lo - 1e-9 && a.avg_response_time_s <= hi + 1e-9);
        }
    }
}
