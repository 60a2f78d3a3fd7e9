//! The sixteen standard catalog functions.

use std::time::Duration;

use crate::function_table::{FunctionSpec, FunctionTable, HostError, HostValue, TableError};

use super::{normalize_query, AnswerSource, HostEnvironment, SentEmail, ShellBackend, SubqueryBackend};

/// Catalog lines in registration order.
pub const STANDARD_CATALOG: [&str; 16] = [
    "function find_contact_id(expression: String): Integer|null",
    "function find_contact_email(contact_id: Integer): String|null",
    "function ask_question(question: String): String",
    "function send_email(email: String, subject: String, text: String, attachment_paths: Collection<String>): void",
    "function get_temperature(): Integer",
    "function find_files(expression: String): Collection<String>",
    "function print(text: String): void",
    "function shell(command: String): String",
    "function sleep(seconds: Integer): void",
    "function find_all_audio_files(): Collection<String>",
    "function generate_random_number(inclusiveStart: Integer, exclusiveEnd: Integer): Integer",
    "function play_audio_file(file_path: String): void",
    "function find_file(expression: String): String|null",
    "function stop_audio_player(): void",
    "function query_llm(query: String): String",
    "function http_get_request(url: String, headers: Dictionary<String, String>): String",
];

pub fn standard_specs() -> Vec<FunctionSpec> {
    STANDARD_CATALOG
        .iter()
        .map(|line| FunctionSpec::parse_signature(line).expect("standard catalog line parses"))
        .collect()
}

type Impl = fn(&[HostValue], &mut HostEnvironment) -> Result<HostValue, HostError>;

fn implementation(name: &str) -> Impl {
    match name {
        "find_contact_id" => find_contact_id,
        "find_contact_email" => find_contact_email,
        "ask_question" => ask_question,
        "send_email" => send_email,
        "get_temperature" => get_temperature,
        "find_files" => find_files,
        "print" => print,
        "shell" => shell,
        "sleep" => sleep,
        "find_all_audio_files" => find_all_audio_files,
        "generate_random_number" => generate_random_number,
        "play_audio_file" => play_audio_file,
        "find_file" => find_file,
        "stop_audio_player" => stop_audio_player,
        "query_llm" => query_llm,
        "http_get_request" => http_get_request,
        other => unreachable!("no implementation for {other}"),
    }
}

/// Registers all sixteen standard functions. Fails without modifying the
/// table if any of the names is already present.
pub fn install_standard_functions(table: &mut FunctionTable) -> Result<(), TableError> {
    if table.is_frozen() {
        return Err(TableError::TableFrozen);
    }
    let specs = standard_specs();
    if let Some(dup) = specs.iter().find(|s| table.contains(&s.name)) {
        return Err(TableError::DuplicateName(dup.name.clone()));
    }
    for spec in specs {
        let f = implementation(&spec.name);
        table.register(spec, move |args, env| {
            env.record_effect();
            f(args, env)
        })?;
    }
    Ok(())
}

// Argument types are already checked by FunctionTable::invoke.
fn text(v: &HostValue) -> &str {
    v.as_str().unwrap_or_default()
}

fn int(v: &HostValue) -> i64 {
    v.as_int().unwrap_or_default()
}

fn find_contact_id(args: &[HostValue], env: &mut HostEnvironment) -> Result<HostValue, HostError> {
    let needle = super::normalize_for_match(text(&args[0]));
    Ok(env
        .contacts
        .iter()
        .find(|c| super::normalize_for_match(&c.display).contains(&needle))
        .map_or(HostValue::Null, |c| HostValue::Integer(c.id)))
}

fn find_contact_email(args: &[HostValue], env: &mut HostEnvironment) -> Result<HostValue, HostError> {
    let id = int(&args[0]);
    Ok(env.contacts.iter().find(|c| c.id == id).map_or(HostValue::Null, |c| HostValue::text(c.email.clone())))
}

fn ask_question(args: &[HostValue], env: &mut HostEnvironment) -> Result<HostValue, HostError> {
    let question = text(&args[0]);
    match &mut env.answers {
        AnswerSource::Scripted(queue) => queue
            .pop_front()
            .map(HostValue::Text)
            .ok_or_else(|| HostError::fixture_miss(format!("no scripted answer for `{question}`"))),
        AnswerSource::Interactive(prompt) => {
            prompt(question).map(HostValue::Text).ok_or_else(|| HostError::new("no answer received"))
        }
    }
}

fn send_email(args: &[HostValue], env: &mut HostEnvironment) -> Result<HostValue, HostError> {
    let to = text(&args[0]).trim().to_string();
    if !to.contains('@') {
        return Err(HostError::new(format!("invalid recipient address `{to}`")));
    }
    let mut attachments = Vec::new();
    for path in args[3].as_list().unwrap_or_default() {
        let path = text(path);
        let file = env.resolve_path(path).ok_or_else(|| HostError::new(format!("attachment not found: {path}")))?;
        attachments.push(file.path.clone());
    }
    env.sent_emails.push(SentEmail {
        to,
        subject: text(&args[1]).to_string(),
        text: text(&args[2]).to_string(),
        attachments,
    });
    Ok(HostValue::Null)
}

fn get_temperature(_: &[HostValue], env: &mut HostEnvironment) -> Result<HostValue, HostError> {
    Ok(HostValue::Integer(env.temperature_reading))
}

fn find_files(args: &[HostValue], env: &mut HostEnvironment) -> Result<HostValue, HostError> {
    Ok(env.find_paths(text(&args[0]), false).into())
}

fn find_file(args: &[HostValue], env: &mut HostEnvironment) -> Result<HostValue, HostError> {
    Ok(env.find_paths(text(&args[0]), false).into_iter().next().map_or(HostValue::Null, HostValue::Text))
}

fn find_all_audio_files(_: &[HostValue], env: &mut HostEnvironment) -> Result<HostValue, HostError> {
    Ok(env.find_paths("", true).into())
}

fn print(args: &[HostValue], env: &mut HostEnvironment) -> Result<HostValue, HostError> {
    env.emit_output(text(&args[0]));
    Ok(HostValue::Null)
}

fn shell(args: &[HostValue], env: &mut HostEnvironment) -> Result<HostValue, HostError> {
    let command = text(&args[0]);
    match &env.shell {
        ShellBackend::Scripted(script) => script
            .lookup(command)
            .map(HostValue::text)
            .ok_or_else(|| HostError::new(format!("command not found: {command}"))),
        ShellBackend::Real => {
            let out = std::process::Command::new("sh")
                .arg("-c")
                .arg(command)
                .output()
                .map_err(|e| HostError::new(format!("cannot run shell: {e}")))?;
            let mut text = String::from_utf8_lossy(&out.stdout).into_owned();
            text.push_str(&String::from_utf8_lossy(&out.stderr));
            if out.status.success() {
                Ok(HostValue::Text(text))
            } else {
                Err(HostError::new(format!("command exited with {}: {}", out.status, text.trim())))
            }
        }
    }
}

fn sleep(args: &[HostValue], env: &mut HostEnvironment) -> Result<HostValue, HostError> {
    let seconds = int(&args[0]);
    if seconds < 0 {
        return Err(HostError::new("sleep length must be non-negative"));
    }
    env.clock.sleep(Duration::from_secs(seconds as u64));
    Ok(HostValue::Null)
}

fn generate_random_number(args: &[HostValue], env: &mut HostEnvironment) -> Result<HostValue, HostError> {
    let (start, end) = (int(&args[0]), int(&args[1]));
    env.rng
        .uniform(start, end)
        .map(HostValue::Integer)
        .ok_or_else(|| HostError::new(format!("empty range [{start}, {end})")))
}

fn play_audio_file(args: &[HostValue], env: &mut HostEnvironment) -> Result<HostValue, HostError> {
    let requested = text(&args[0]);
    let file = env.resolve_path(requested).ok_or_else(|| HostError::new(format!("no such file: {requested}")))?;
    if !file.audio {
        return Err(HostError::new(format!("not an audio file: {requested}")));
    }
    let path = file.path.clone();
    env.audio_player.current = Some(path.clone());
    env.audio_player.history.push(path);
    Ok(HostValue::Null)
}

fn stop_audio_player(_: &[HostValue], env: &mut HostEnvironment) -> Result<HostValue, HostError> {
    env.audio_player.current = None;
    Ok(HostValue::Null)
}

fn query_llm(args: &[HostValue], env: &mut HostEnvironment) -> Result<HostValue, HostError> {
    let query = text(&args[0]);
    if query.chars().count() > env.query_context_limit {
        return Err(HostError::with_status(400, "Bad Request"));
    }
    match &mut env.subqueries {
        SubqueryBackend::Fixture(answers) => answers
            .get(&normalize_query(query))
            .map(|a| HostValue::text(a.clone()))
            .ok_or_else(|| HostError::fixture_miss(format!("no recorded answer for query `{query}`"))),
        SubqueryBackend::Live(ask) => ask(query).map(HostValue::Text),
    }
}

fn http_get_request(args: &[HostValue], env: &mut HostEnvironment) -> Result<HostValue, HostError> {
    let url = text(&args[0]).trim();
    let response =
        env.web_store.get(url).ok_or_else(|| HostError::fixture_miss(format!("no recorded response for {url}")))?;
    if response.status >= 400 {
        return Err(HostError::with_status(response.status, reason_phrase(response.status)));
    }
    Ok(HostValue::text(response.body.clone()))
}

fn reason_phrase(status: u16) -> &'static str {
    match status {
        400 => "Bad Request",
        401 => "Unauthorized",
        403 => "Forbidden",
        404 => "Not Found",
        429 => "Too Many Requests",
        500 => "Internal Server Error",
        502 => "Bad Gateway",
        503 => "Service Unavailable",
        _ => "HTTP error",
    }
}

#[cfg(test)]
mod tests {
    use std::collections::{HashMap, VecDeque};

    use super::*;
    use crate::function_table::render_signature;
    use crate::host::{Contact, WebResponse};

    fn table() -> FunctionTable {
        let mut t = FunctionTable::new();
        install_standard_functions(&mut t).unwrap();
        t.frozen()
    }

    fn call(
        t: &FunctionTable,
        env: &mut HostEnvironment,
        name: &str,
        args: Vec<HostValue>,
    ) -> Result<HostValue, String> {
        t.invoke(name, &args, env).map_err(|e| e.to_string())
    }

    #[test]
    fn catalog_renders_verbatim() {
        let t = table();
        let rendered: Vec<String> = t.specs().map(render_signature).collect();
        assert_eq!(rendered, STANDARD_CATALOG.map(String::from).to_vec());
    }

    #[test]
    fn install_twice_is_duplicate() {
        let mut t = FunctionTable::new();
        install_standard_functions(&mut t).unwrap();
        assert!(matches!(
            install_standard_functions(&mut t),
            Err(TableError::DuplicateName(n)) if n == "find_contact_id"
        ));
        assert_eq!(t.len(), 16);
    }

    #[test]
    fn find_file_uses_normalized_substring() {
        let t = table();
        let mut env = HostEnvironment::empty();
        env.add_file("files/car_title.pdf", false, "");
        env.add_file("files/song.mp3", true, "");
        assert_eq!(
            call(&t, &mut env, "find_file", vec!["car title".into()]).unwrap(),
            HostValue::text("files/car_title.pdf")
        );
        assert_eq!(call(&t, &mut env, "find_file", vec!["passport".into()]).unwrap(), HostValue::Null);
    }

    #[test]
    fn audio_files_in_path_order() {
        let t = table();
        let mut env = HostEnvironment::empty();
        env.add_file("music/c.mp3", true, "");
        env.add_file("music/a.ogg", true, "");
        env.add_file("docs/readme.txt", false, "");
        env.add_file("music/b.wav", true, "");
        assert_eq!(
            call(&t, &mut env, "find_all_audio_files", vec![]).unwrap(),
            HostValue::from(vec!["music/a.ogg", "music/b.wav", "music/c.mp3"])
        );
        call(&t, &mut env, "play_audio_file", vec!["music/b.wav".into()]).unwrap();
        assert_eq!(env.audio_player().current.as_deref(), Some("music/b.wav"));
        assert!(call(&t, &mut env, "play_audio_file", vec!["docs/readme.txt".into()]).is_err());
        call(&t, &mut env, "stop_audio_player", vec![]).unwrap();
        assert_eq!(env.audio_player().current, None);
        assert_eq!(env.audio_player().history, vec!["music/b.wav"]);
    }

    #[test]
    fn temperature_and_sleep() {
        let t = table();
        let mut env = HostEnvironment::empty().with_temperature(21);
        assert_eq!(call(&t, &mut env, "get_temperature", vec![]).unwrap(), HostValue::Integer(21));
        assert_eq!(call(&t, &mut env, "sleep", vec![5i64.into()]).unwrap(), HostValue::Null);
        assert_eq!(env.elapsed(), Duration::from_secs(5));
        assert!(call(&t, &mut env, "sleep", vec![(-1i64).into()]).is_err());
    }

    #[test]
    fn random_number_golden_value() {
        // SplitMix64, seed 42, first draw reduced to [1, 101).
        let t = table();
        let mut env = HostEnvironment::empty().with_seed(42);
        assert_eq!(
            call(&t, &mut env, "generate_random_number", vec![1i64.into(), 101i64.into()]).unwrap(),
            HostValue::Integer(14)
        );
        assert!(call(&t, &mut env, "generate_random_number", vec![3i64.into(), 3i64.into()]).is_err());
    }

    #[test]
    fn contacts_return_null_on_miss() {
        let t = table();
        let mut env = HostEnvironment::empty();
        env.add_contact(Contact {
            id: 3,
            display: "Acme Insurance Company".into(),
            email: "claims@acme.example".into(),
        });
        assert_eq!(call(&t, &mut env, "find_contact_id", vec!["insurance".into()]).unwrap(), HostValue::Integer(3));
        assert_eq!(call(&t, &mut env, "find_contact_id", vec!["dentist".into()]).unwrap(), HostValue::Null);
        assert_eq!(
            call(&t, &mut env, "find_contact_email", vec![3i64.into()]).unwrap(),
            HostValue::text("claims@acme.example")
        );
        assert_eq!(call(&t, &mut env, "find_contact_email", vec![9i64.into()]).unwrap(), HostValue::Null);
        assert!(call(&t, &mut env, "find_contact_email", vec![HostValue::Null]).is_err());
    }

    #[test]
    fn email_is_captured_not_sent() {
        let t = table();
        let mut env = HostEnvironment::empty();
        env.add_file("files/car_title.pdf", false, "");
        call(
            &t,
            &mut env,
            "send_email",
            vec!["a@b.example".into(), "s".into(), "t".into(), vec!["car_title.pdf"].into()],
        )
        .unwrap();
        assert_eq!(env.sent_emails().len(), 1);
        assert_eq!(env.sent_emails()[0].attachments, vec!["files/car_title.pdf"]);
        assert!(call(
            &t,
            &mut env,
            "send_email",
            vec!["a@b.example".into(), "s".into(), "t".into(), vec!["missing.pdf"].into()],
        )
        .is_err());
        assert_eq!(env.sent_emails().len(), 1);
    }

    #[test]
    fn query_llm_context_window_and_fixture_miss() {
        let t = table();
        let mut answers = HashMap::new();
        answers.insert(normalize_query("Largest city in Germany?"), "Berlin".to_string());
        let mut env = HostEnvironment::empty().with_subquery_backend(SubqueryBackend::Fixture(answers));
        assert_eq!(
            call(&t, &mut env, "query_llm", vec!["largest  city in germany?".into()]).unwrap(),
            HostValue::text("Berlin")
        );
        let big = "x".repeat(env.query_context_limit + 1);
        let err = t.invoke("query_llm", &[big.into()], &mut env).unwrap_err();
        assert_eq!(err.to_string(), "400 Bad Request");
        match t.invoke("query_llm", &["unknown".into()], &mut env).unwrap_err() {
            crate::function_table::InvokeError::Host(e) => assert!(e.fixture_miss),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn http_store_statuses() {
        let t = table();
        let mut env = HostEnvironment::empty();
        env.add_web_response(
            "https://ok.example",
            WebResponse { status: 200, headers: Default::default(), body: "hi".into() },
        );
        env.add_web_response(
            "https://bad.example",
            WebResponse { status: 403, headers: Default::default(), body: String::new() },
        );
        let headers = HostValue::Map(Default::default());
        assert_eq!(
            call(&t, &mut env, "http_get_request", vec!["https://ok.example".into(), headers.clone()]).unwrap(),
            HostValue::text("hi")
        );
        assert_eq!(
            call(&t, &mut env, "http_get_request", vec!["https://bad.example".into(), headers]).unwrap_err(),
            "403 Forbidden"
        );
    }

    #[test]
    fn ask_question_scripted_then_exhausted() {
        let t = table();
        let mut env =
            HostEnvironment::empty().with_answer_source(AnswerSource::Scripted(VecDeque::from(vec!["42".to_string()])));
        assert_eq!(call(&t, &mut env, "ask_question", vec!["n?".into()]).unwrap(), HostValue::text("42"));
        assert!(call(&t, &mut env, "ask_question", vec!["n?".into()]).is_err());
    }

    #[test]
    fn scripted_shell_rejects_unknown_commands() {
        let t = table();
        let mut env = HostEnvironment::empty();
        assert!(call(&t, &mut env, "shell", vec!["rm -rf /".into()]).unwrap_err().contains("command not found"));
    }

    #[test]
    fn every_callback_counts_as_an_effect() {
        let t = table();
        let mut env = HostEnvironment::empty();
        call(&t, &mut env, "print", vec!["hello".into()]).unwrap();
        call(&t, &mut env, "get_temperature", vec![]).unwrap();
        assert_eq!(env.effect_count(), 2);
        assert_eq!(env.take_output(), vec!["hello"]);
        // a rejected call never reaches the callback
        let _ = call(&t, &mut env, "print", vec![1i64.into()]);
        assert_eq!(env.effect_count(), 2);
    }
}
