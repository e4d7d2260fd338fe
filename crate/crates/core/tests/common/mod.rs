#![allow(dead_code)]

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::Arc;

use flowkit::engine::Engine;
use flowkit::service::http::{serve, ServiceState};
use flowkit::service::AppRegistry;
use serde_json::{json, Value};

pub fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join(rel)
}

pub fn read(rel: &str) -> String {
    std::fs::read_to_string(fixture(rel)).unwrap()
}

pub const GOLDEN_SEED: u64 = 7;

pub fn golden_inputs() -> Vec<String> {
    read("tests/golden/movies.input").lines().map(str::to_string).collect()
}

pub fn golden_transcript() -> String {
    read("tests/golden/movies.transcript")
}

/// Runs the `flowkit` binary with `args`, feeding `stdin`.
pub fn run_cli(args: &[&str], stdin: &str) -> (i32, String, String) {
    let mut child = Command::new(env!("CARGO_BIN_EXE_flowkit"))
        .args(args)
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(stdin.as_bytes()).unwrap();
    let out = child.wait_with_output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

/// An API server on an ephemeral port, stopped when dropped.
pub struct Server {
    pub base: String,
    pub state: Arc<ServiceState>,
    _runtime: tokio::runtime::Runtime,
}

impl Server {
    pub fn start(engine: Engine) -> Server {
        let runtime = tokio::runtime::Runtime::new().unwrap();
        let state = ServiceState::new(Arc::new(AppRegistry::new()), Arc::new(engine));
        let listener = runtime
            .block_on(tokio::net::TcpListener::bind("127.0.0.1:0"))
            .unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        runtime.spawn(serve(listener, state.clone()));
        Server {
            base,
            state,
            _runtime: runtime,
        }
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{}", self.base, path)
    }

    pub fn upload(&self, app_id: &str, bundle_rel: &str) {
        let reply: Value = ureq::post(&self.url(&format!("/applications?appId={app_id}")))
            .content_type("application/json")
            .send(read(bundle_rel))
            .unwrap()
            .body_mut()
            .read_json()
            .unwrap();
        assert_eq!(reply["appId"], app_id);
    }

    pub fn post(&self, path: &str, body: Value) -> Value {
        ureq::post(&self.url(path))
            .send_json(body)
            .unwrap()
            .body_mut()
            .read_json()
            .unwrap()
    }

    pub fn get(&self, path: &str) -> Value {
        ureq::get(&self.url(path)).call().unwrap().body_mut().read_json().unwrap()
    }

    /// Plays `inputs` and renders the conversation like the terminal chat.
    pub fn chat(&self, app_id: &str, seed: u64, client: &str, inputs: &[String]) -> (String, String) {
        let start = self.post("/sessions", json!({"appId": app_id, "client": client, "seed": seed}));
        let id = start["sessionId"].as_str().unwrap().to_string();
        let mut text = String::new();
        let bot = |reply: &Value, text: &mut String| {
            for line in reply["responses"].as_array().unwrap() {
                text.push_str(&format!("bot: {}\n", line.as_str().unwrap()));
            }
        };
        bot(&start, &mut text);
        for input in inputs {
            text.push_str(&format!("user: {input}\n"));
            let reply = self.post(&format!("/sessions/{id}/turns"), json!({"utterance": input}));
            bot(&reply, &mut text);
            if reply["ended"] == true {
                break;
            }
        }
        (id, text)
    }
}
