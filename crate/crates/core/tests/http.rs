mod common;

use std::sync::Arc;
use std::time::Duration;

use common::{golden_inputs, golden_transcript, Server, GOLDEN_SEED};
use flowkit::engine::Engine;
use flowkit::nrg::{Generated, NrgRequest, ResponseGenerator, StubGenerator};
use flowkit::store::{MemoryStore, TurnRecord};
use serde_json::{json, Value};

#[test]
fn http_reproduces_golden_transcript() {
    let server = Server::start(Engine::default());
    server.upload("movies", "bundles/movies.json");
    let (id, text) = server.chat("movies", GOLDEN_SEED, "web", &golden_inputs());
    assert_eq!(text, golden_transcript());

    let transcript: Vec<TurnRecord> = serde_json::from_value(server.get(&format!("/sessions/{id}/transcript"))).unwrap();
    let stored = server.state.engine.store().get_transcript(&id).unwrap();
    assert_eq!(transcript, stored);
    assert_eq!(transcript.len(), 12);
    assert!(transcript.last().unwrap().ended);

    let record = server.get(&format!("/sessions/{id}"));
    assert_eq!(record["client_tag"], "web");
    assert!(record["ended_at"].is_string());
}

#[test]
fn metrics_and_attributes_endpoints() {
    let server = Server::start(Engine::default());
    server.upload("movies", "bundles/movies.json");
    let inputs = golden_inputs();
    server.chat("movies", 1, "web", &inputs[..5]);
    server.chat("movies", 2, "web", &inputs[..1]);
    server.chat("movies", 3, "android", &inputs[..2]);

    let series = server.get("/metrics?metric=sessions&groupBy=client&granularity=day");
    let counts: Vec<(String, f64)> = series["buckets"]
        .as_array()
        .unwrap()
        .iter()
        .map(|b| (b["group"].as_str().unwrap().to_string(), b["value"].as_f64().unwrap()))
        .collect();
    assert_eq!(counts, [("android".to_string(), 1.0), ("web".to_string(), 2.0)]);

    let turns = server.get("/metrics?metric=turns");
    assert_eq!(turns["buckets"][0]["value"], 8.0);
    let ood = server.get("/metrics?metric=ood_rate&groupBy=client");
    let rates: Vec<f64> = ood["buckets"].as_array().unwrap().iter().map(|b| b["value"].as_f64().unwrap()).collect();
    // android: 1 OOD of 2 turns; web: 2 OOD of 6 turns.
    assert_eq!(rates, [0.5, 2.0 / 6.0]);

    // The skimmer stored the brother mention for the anonymous user.
    let attributes = server.get("/attributes?scope=user&key=anonymous");
    assert_eq!(attributes, json!({"hasBrother": true}));
    let err = ureq::get(&server.url("/attributes?scope=session&key=x")).call().unwrap_err();
    assert!(matches!(err, ureq::Error::StatusCode(400)));
    let err = ureq::get(&server.url("/metrics?metric=bogus")).call().unwrap_err();
    assert!(matches!(err, ureq::Error::StatusCode(400)));
}

#[test]
fn unknown_resources_and_invalid_bundles() {
    let server = Server::start(Engine::default());
    let status = |r: Result<ureq::http::Response<ureq::Body>, ureq::Error>| match r {
        Err(ureq::Error::StatusCode(code)) => code,
        Ok(r) => r.status().as_u16(),
        Err(e) => panic!("{e}"),
    };
    assert_eq!(status(ureq::get(&server.url("/sessions/nope/transcript")).call()), 404);
    assert_eq!(
        status(ureq::post(&server.url("/sessions/nope/turns")).send_json(json!({"utterance": "hi"}))),
        404
    );
    assert_eq!(
        status(ureq::post(&server.url("/sessions")).send_json(json!({"appId": "nope", "client": "web"}))),
        404
    );
    let invalid = common::read("bundles/hello.json").replace(r#""to": "exit""#, r#""to": "nowhere""#);
    assert_eq!(
        status(ureq::post(&server.url("/applications")).content_type("application/json").send(invalid)),
        422
    );
    assert_eq!(status(ureq::post(&server.url("/applications")).send("{")), 400);
}

#[test]
fn multipart_upload_and_ended_session() {
    let server = Server::start(Engine::default());
    let boundary = "XBOUNDARYX";
    let body = format!(
        "--{boundary}\r\nContent-Disposition: form-data; name=\"bundle\"; filename=\"hello.json\"\r\n\
         Content-Type: application/json\r\n\r\n{}\r\n--{boundary}--\r\n",
        common::read("bundles/hello.json")
    );
    let reply: Value = ureq::post(&server.url("/applications"))
        .content_type(format!("multipart/form-data; boundary={boundary}"))
        .send(body)
        .unwrap()
        .body_mut()
        .read_json()
        .unwrap();
    assert_eq!(reply["appId"], "hello");
    let start = server.post("/sessions", json!({"appId": "hello", "client": "web"}));
    assert_eq!(start["responses"], json!(["Hi!"]));
    assert_eq!(start["ended"], true);
    let id = start["sessionId"].as_str().unwrap();
    let err = ureq::post(&server.url(&format!("/sessions/{id}/turns")))
        .send_json(json!({"utterance": "hi"}))
        .unwrap_err();
    assert!(matches!(err, ureq::Error::StatusCode(410)));
}

struct SlowGenerator;

impl ResponseGenerator for SlowGenerator {
    fn generate(&self, request: &NrgRequest) -> Generated {
        std::thread::sleep(Duration::from_millis(400));
        StubGenerator.generate(request)
    }
}

#[test]
fn concurrent_turns_on_one_session_conflict() {
    let engine = Engine::new(Arc::new(MemoryStore::new())).with_generator(Arc::new(SlowGenerator));
    let server = Server::start(engine);
    server.upload("movies", "bundles/movies.json");
    let start = server.post("/sessions", json!({"appId": "movies", "client": "web"}));
    let url = server.url(&format!("/sessions/{}/turns", start["sessionId"].as_str().unwrap()));
    let ood = golden_inputs()[1].clone();
    let codes: Vec<u16> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..2)
            .map(|i| {
                let (url, ood) = (&url, &ood);
                s.spawn(move || {
                    std::thread::sleep(Duration::from_millis(100 * i));
                    match ureq::post(url).send_json(json!({"utterance": ood})) {
                        Ok(r) => r.status().as_u16(),
                        Err(ureq::Error::StatusCode(code)) => code,
                        Err(e) => panic!("{e}"),
                    }
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    assert_eq!(codes, [200, 409]);
    // The flag is released once the first turn finishes.
    let reply = server.post(
        &format!("/sessions/{}/turns", start["sessionId"].as_str().unwrap()),
        json!({"utterance": "it was fun"}),
    );
    assert_eq!(reply["ended"], false);
}
