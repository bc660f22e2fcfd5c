//! Shared helpers for the integration tests.
#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use deskloop::action::{Action, MouseButton, KEY_NAMES};
use deskloop::agent::AgentConfig;
use deskloop::bench::{load_tasks, run_suite, RunReport, ScriptedProvider, SuiteOptions, TaskRun, TaskSpec};
use deskloop::gateway::{ChatBackend, ChatRequest, Message, Part, RoleTag, ScriptedBackend, Speaker};
use proptest::prelude::*;
use serde::Deserialize;

pub fn assets() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("assets")
}

pub fn all_tasks() -> Vec<TaskSpec> {
    load_tasks(&assets().join("tasks")).expect("bundled manifests load")
}

pub fn task(id: &str) -> TaskSpec {
    all_tasks().into_iter().find(|t| t.id == id).unwrap_or_else(|| panic!("no bundled task {id}"))
}

pub fn subset(ids: &[String]) -> Vec<TaskSpec> {
    let all = all_tasks();
    ids.iter().map(|id| all.iter().find(|t| &t.id == id).expect("subset ids exist").clone()).collect()
}

pub fn oracle_provider() -> ScriptedProvider {
    ScriptedProvider::new(vec![assets().join("oracle")])
}

pub fn run(tasks: &[TaskSpec], provider: &ScriptedProvider, agent: AgentConfig) -> (RunReport, Vec<TaskRun>) {
    let opts = SuiteOptions { agent, ..SuiteOptions::default() };
    run_suite(tasks, provider, &opts).expect("suite runs")
}

pub fn sr(report: &RunReport) -> f64 {
    report.overall().sr().expect("non-empty report")
}

#[derive(Debug, Deserialize)]
pub struct Ablation {
    pub toggle: String,
    pub sources: Vec<String>,
    pub tasks: Vec<String>,
}

impl Ablation {
    pub fn provider(&self) -> ScriptedProvider {
        let base = assets().join("fixtures");
        ScriptedProvider::new(self.sources.iter().map(|s| base.join(s)).collect())
    }

    pub fn disabled(&self) -> AgentConfig {
        let mut cfg = AgentConfig::default();
        match self.toggle.as_str() {
            "actor_critic" => cfg.actor_critic = false,
            "step_check" => cfg.step_check = false,
            "planner_critic" => cfg.planner_critic = false,
            other => panic!("unknown toggle {other}"),
        }
        cfg
    }
}

pub fn ablations() -> std::collections::BTreeMap<String, Ablation> {
    let text = std::fs::read_to_string(assets().join("fixtures/ablations.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

// Generators for the action grammar.

pub fn arb_button() -> impl Strategy<Value = MouseButton> {
    prop_oneof![Just(MouseButton::Left), Just(MouseButton::Right), Just(MouseButton::Middle)]
}

pub fn arb_key() -> impl Strategy<Value = String> {
    proptest::sample::select(KEY_NAMES).prop_map(str::to_string)
}

pub fn arb_action() -> impl Strategy<Value = Action> {
    let coord = 0u32..5000;
    prop_oneof![
        (coord.clone(), coord.clone()).prop_map(|(x, y)| Action::MoveTo { x, y }),
        (coord.clone(), coord.clone(), arb_button(), 1u32..5)
            .prop_map(|(x, y, button, clicks)| Action::Click { x, y, button, clicks }),
        any::<String>().prop_map(|text| Action::Write { text }),
        proptest::sample::subsequence(KEY_NAMES.to_vec(), 2..4)
            .prop_shuffle()
            .prop_map(|ks| Action::Hotkey { keys: ks.into_iter().map(str::to_string).collect() }),
        any::<i32>().prop_map(|a| Action::Scroll { amount: i64::from(a) }),
        (coord.clone(), coord, prop_oneof![(0u32..1000).prop_map(|d| f64::from(d) / 100.0), 0.0..1.0e6f64])
            .prop_map(|(x, y, duration)| Action::DragTo { x, y, duration }),
        arb_button().prop_map(|button| Action::MouseDown { button }),
        arb_button().prop_map(|button| Action::MouseUp { button }),
        arb_key().prop_map(|key| Action::Press { key }),
        arb_key().prop_map(|key| Action::KeyDown { key }),
        arb_key().prop_map(|key| Action::KeyUp { key }),
    ]
}

// A minimal chat-completions server for wire tests.

/// One captured POST.
#[derive(Debug, Clone)]
pub struct Captured {
    pub path: String,
    pub auth: Option<String>,
    pub body: serde_json::Value,
}

pub struct Stub {
    pub url: String,
    pub captured: Arc<Mutex<Vec<Captured>>>,
    handle: Option<JoinHandle<()>>,
    listener_addr: std::net::SocketAddr,
}

/// How the stub answers one parsed request.
pub enum Reply {
    Text(String),
    Status(u16, String),
    Hang(std::time::Duration),
}

fn read_request(stream: &mut TcpStream) -> Option<(String, Option<String>, Vec<u8>)> {
    let mut reader = BufReader::new(stream.try_clone().ok()?);
    let mut line = String::new();
    reader.read_line(&mut line).ok()?;
    let path = line.split_whitespace().nth(1)?.to_string();
    let mut len = 0usize;
    let mut auth = None;
    loop {
        let mut h = String::new();
        reader.read_line(&mut h).ok()?;
        let h = h.trim_end();
        if h.is_empty() {
            break;
        }
        let (name, value) = h.split_once(':')?;
        match name.to_ascii_lowercase().as_str() {
            "content-length" => len = value.trim().parse().ok()?,
            "authorization" => auth = Some(value.trim().to_string()),
            _ => {}
        }
    }
    let mut body = vec![0; len];
    reader.read_exact(&mut body).ok()?;
    Some((path, auth, body))
}

fn respond(stream: &mut TcpStream, status: u16, body: &str) {
    let reason = if status == 200 { "OK" } else { "Error" };
    let _ = write!(
        stream,
        "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    );
    let _ = stream.flush();
}

impl Stub {
    /// Serves until dropped. `answer` sees each captured request.
    pub fn start(answer: impl Fn(&Captured) -> Reply + Send + 'static) -> Stub {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let captured: Arc<Mutex<Vec<Captured>>> = Arc::default();
        let sink = Arc::clone(&captured);
        let handle = std::thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(mut stream) = stream else { continue };
                let Some((path, auth, body)) = read_request(&mut stream) else { continue };
                if path == "/__stop" {
                    break;
                }
                let body: serde_json::Value = serde_json::from_slice(&body).unwrap_or(serde_json::Value::Null);
                let cap = Captured { path, auth, body };
                sink.lock().unwrap().push(cap.clone());
                match answer(&cap) {
                    Reply::Text(text) => {
                        let doc = serde_json::json!({
                            "id": "stub", "object": "chat.completion",
                            "choices": [{"index": 0, "message": {"role": "assistant", "content": text}, "finish_reason": "stop"}]
                        });
                        respond(&mut stream, 200, &doc.to_string());
                    }
                    Reply::Status(code, body) => respond(&mut stream, code, &body),
                    Reply::Hang(d) => std::thread::sleep(d),
                }
            }
        });
        Stub { url: format!("http://{addr}/v1"), captured, handle: Some(handle), listener_addr: addr }
    }

    pub fn bodies(&self) -> Vec<Captured> {
        self.captured.lock().unwrap().clone()
    }
}

impl Drop for Stub {
    fn drop(&mut self) {
        if let Ok(mut s) = TcpStream::connect(self.listener_addr) {
            let _ = write!(s, "POST /__stop HTTP/1.1\r\nContent-Length: 0\r\n\r\n");
        }
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

/// Module role inferred from the system prompt of a wire body.
pub fn infer_role(body: &serde_json::Value) -> Option<RoleTag> {
    let system = body["messages"]
        .as_array()?
        .iter()
        .find(|m| m["role"] == "system")?
        .get("content")?
        .as_array()?
        .iter()
        .filter_map(|p| p["text"].as_str())
        .collect::<String>();
    let table = [
        ("Actor correction", RoleTag::Actor),
        ("You are the planning module", RoleTag::Planner),
        ("You review task plans", RoleTag::PlannerCritic),
        ("You check each subtask", RoleTag::StepCheck),
        ("You translate one subtask", RoleTag::Actor),
        ("You verify whether an executed action", RoleTag::ActorCritic),
        ("Pick the GUI element", RoleTag::RegionChooser),
    ];
    table.into_iter().find(|(phrase, _)| system.contains(phrase)).map(|(_, r)| r)
}

/// Text-only view of a wire body, for answering with scripted rules.
pub fn text_request(body: &serde_json::Value, role: RoleTag) -> ChatRequest {
    let messages = body["messages"]
        .as_array()
        .unwrap()
        .iter()
        .map(|m| Message {
            speaker: if m["role"] == "system" { Speaker::System } else { Speaker::User },
            parts: m["content"]
                .as_array()
                .unwrap()
                .iter()
                .filter_map(|p| p["text"].as_str().map(|t| Part::Text(t.to_string())))
                .collect(),
        })
        .collect();
    ChatRequest { role_tag: role, messages, max_tokens: 1024, temperature: 0.0 }
}

/// Checks one body against the published request shape. Returns the
/// number of image parts.
pub fn check_wire_shape(body: &serde_json::Value, model: &str) -> Result<usize, String> {
    let obj = body.as_object().ok_or("body is not an object")?;
    let mut keys: Vec<&str> = obj.keys().map(String::as_str).collect();
    keys.sort();
    if keys != ["max_tokens", "messages", "model", "temperature"] {
        return Err(format!("unexpected top-level keys {keys:?}"));
    }
    if body["model"] != model {
        return Err("model mismatch".into());
    }
    if !body["max_tokens"].as_u64().is_some_and(|n| n > 0) {
        return Err("max_tokens must be a positive integer".into());
    }
    if !body["temperature"].is_number() {
        return Err("temperature must be a number".into());
    }
    let msgs = body["messages"].as_array().ok_or("messages must be an array")?;
    if !msgs.iter().any(|m| m["role"] == "user") {
        return Err("no user message".into());
    }
    let mut images = 0;
    for m in msgs {
        let role = m["role"].as_str().ok_or("message role must be a string")?;
        if role != "system" && role != "user" {
            return Err(format!("unexpected role {role}"));
        }
        let parts = m["content"].as_array().ok_or("content must be an array of parts")?;
        for p in parts {
            match p["type"].as_str() {
                Some("text") if p["text"].is_string() && p.as_object().unwrap().len() == 2 => {}
                Some("image_url") if p.as_object().unwrap().len() == 2 => {
                    let url = p["image_url"]["url"].as_str().ok_or("image_url.url must be a string")?;
                    let data = url.strip_prefix("data:image/png;base64,").ok_or("image must be a base64 PNG data URL")?;
                    use base64::Engine;
                    let bytes = base64::engine::general_purpose::STANDARD.decode(data).map_err(|e| e.to_string())?;
                    if !bytes.starts_with(b"\x89PNG\r\n\x1a\n") {
                        return Err("image payload is not a PNG".into());
                    }
                    if role != "user" {
                        return Err("images belong in user messages".into());
                    }
                    images += 1;
                }
                _ => return Err(format!("malformed content part {p}")),
            }
        }
    }
    Ok(images)
}

/// Answers wire requests with scripted rules; one session for the stub's lifetime.
pub fn scripted_answer(rules: ScriptedBackend) -> impl Fn(&Captured) -> Reply + Send + 'static {
    let session = rules.session();
    move |cap| match infer_role(&cap.body) {
        Some(role) => match session.complete(&text_request(&cap.body, role)) {
            Ok(text) => Reply::Text(text),
            Err(e) => Reply::Status(500, e.to_string()),
        },
        None => Reply::Status(400, "unknown module".into()),
    }
}
