//! Replays one text split into timed chunks and checks the timing and
//! concatenation invariants of the result.

use intent_forge::gateway::{complete_stream, FixtureTransport, ModelConfig, VirtualClock};
use intent_forge::prompt::{ModelParams, PromptBundle};

/// `cuts` are char positions (any order, duplicates allowed); `gaps_ms`
/// supplies the spacing between consecutive chunks, cycled as needed.
pub fn check_chunking(text: &str, cuts: &[usize], gaps_ms: &[f64]) -> Result<(), String> {
    let chars: Vec<char> = text.chars().collect();
    let mut points: Vec<usize> = cuts.iter().map(|c| c % (chars.len() + 1)).collect();
    points.push(0);
    points.push(chars.len());
    points.sort_unstable();
    points.dedup();
    let pieces: Vec<String> = points.windows(2).map(|w| chars[w[0]..w[1]].iter().collect()).collect();
    let mut offset = 0.0;
    let chunks: Vec<_> = pieces
        .iter()
        .enumerate()
        .map(|(i, p)| {
            offset += gaps_ms[i % gaps_ms.len()];
            serde_json::json!({"offset_ms": (offset * 10.0_f64).round() / 10.0, "text": p})
        })
        .collect();
    let doc = serde_json::json!({
        "format": "intent-forge/transcripts@1",
        "label": "chunking",
        "transcripts": [{"model": "m", "intention_id": 1, "chunks": chunks}],
    });
    let transport = FixtureTransport::from_json(&doc.to_string()).map_err(|e| e.to_string())?;
    let bundle = PromptBundle {
        role_message: "r".into(),
        user_message: "u".into(),
        model_params: ModelParams { temperature: 0.0, model_name: "m".into() },
    };
    let mut clock = VirtualClock::new();
    let r = complete_stream(&bundle, Some(1), &ModelConfig::fixture("m"), &transport, &mut clock)
        .map_err(|e| e.to_string())?;
    if r.full_text != text {
        return Err(format!("concatenation {:?} != {:?}", r.full_text, text));
    }
    let joined: String = r.events.iter().map(|e| e.chunk_text.as_str()).collect();
    if joined != r.full_text {
        return Err("events do not concatenate to full_text".into());
    }
    if !r.events.windows(2).all(|w| w[0].at <= w[1].at) {
        return Err("timestamps go backwards".into());
    }
    if r.time_to_first_token_ms > r.response_time_s * 1000.0 {
        return Err(format!("ttft {} > rt {}", r.time_to_first_token_ms, r.response_time_s));
    }
    let first = r.events.iter().find(|e| !e.chunk_text.is_empty()).ok_or("no content")?;
    if (first.at.as_secs_f64() * 1000.0 - r.time_to_first_token_ms).abs() > 1e-9 {
        return Err("ttft is not the first non-empty chunk".into());
    }
    Ok(())
}
