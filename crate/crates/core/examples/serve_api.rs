//! Starts the HTTP API on a free port, uploads a bundle and talks to it.
//!
//! `cargo run --example serve_api`

use std::sync::Arc;

use flowkit::engine::Engine;
use flowkit::service::http::{serve, ServiceState};
use flowkit::service::AppRegistry;
use serde_json::{json, Value};

#[tokio::main]
async fn main() {
    let state = ServiceState::new(Arc::new(AppRegistry::new()), Arc::new(Engine::default()));
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.expect("bind");
    let base = format!("http://{}", listener.local_addr().unwrap());
    tokio::spawn(serve(listener, state));
    println!("listening on {base}");

    let replies = tokio::task::spawn_blocking(move || {
        let post = |path: &str, body: Value| -> Value {
            ureq::post(&format!("{base}{path}")).send_json(body).unwrap().body_mut().read_json().unwrap()
        };
        let bundle: Value = serde_json::from_str(include_str!("../bundles/facts.json")).unwrap();
        let mut replies = vec![post("/applications?appId=facts", bundle)];
        let session = post("/sessions", json!({"appId": "facts", "client": "example", "seed": 1}));
        let id = session["sessionId"].as_str().unwrap().to_string();
        replies.push(session);
        for text in ["yes please", "no thanks"] {
            replies.push(post(&format!("/sessions/{id}/turns"), json!({"utterance": text})));
        }
        let transcript: Value = ureq::get(&format!("{base}/sessions/{id}/transcript"))
            .call()
            .unwrap()
            .body_mut()
            .read_json()
            .unwrap();
        replies.push(transcript);
        replies
    })
    .await
    .unwrap();
    for reply in replies {
        println!("{reply}");
    }
}
