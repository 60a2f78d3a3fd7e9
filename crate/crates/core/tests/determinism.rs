use intent_forge::bench::{render_report, ReportFormat};
use intent_forge::interpreter::ExecutionTrace;
use intent_forge::suite::run_bundled;

fn snapshot() -> (Vec<String>, String, String) {
    let (report, artifacts) = run_bundled().unwrap();
    let traces = artifacts.iter().map(|a| a.trace.as_ref().map(ExecutionTrace::to_jsonl).unwrap_or_default()).collect();
    (traces, render_report(&report, ReportFormat::Csv), render_report(&report, ReportFormat::Markdown))
}

#[test]
fn bundled_replay_is_byte_identical_across_reruns() {
    let first = snapshot();
    assert_eq!(first.0.len(), 63);
    assert!(first.0.iter().filter(|t| !t.is_empty()).count() >= 62);
    for _ in 0..2 {
        assert_eq!(snapshot(), first);
    }
}

#[test]
fn traces_survive_a_jsonl_round_trip() {
    let (_, artifacts) = run_bundled().unwrap();
    for trace in artifacts.iter().filter_map(|a| a.trace.as_ref()) {
        let text = trace.to_jsonl();
        let back = ExecutionTrace::from_jsonl(&text).unwrap();
        assert_eq!(&back, trace);
        assert_eq!(back.to_jsonl(), text);
    }
}
