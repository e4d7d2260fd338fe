//! Validates a bundle, trains its intent models and prints a summary.
//!
//! `cargo run --example validate_and_train [bundle.json]`

use flowkit::engine::Application;
use flowkit::model::{parse_bundle, validate_bundle};

fn main() {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/bundles/movies.json").into());
    let text = std::fs::read_to_string(&path).expect("readable bundle");
    let bundle = parse_bundle(&text).expect("well-formed bundle");
    let diagnostics = validate_bundle(&bundle);
    for d in &diagnostics {
        println!("{d}");
    }
    println!("{path}: {} sub-dialogues, {} diagnostics", bundle.sub_dialogues.len(), diagnostics.len());

    let app = Application::build("example", bundle).expect("valid bundle");
    for (context, model) in &app.pack.local {
        println!("local model at {context}: {} intents", model.classifier.class_ids.len());
    }
    for (dialogue, model) in &app.pack.global {
        println!("global model of {dialogue}: {} intents", model.classifier.class_ids.len());
    }
    let artifact = app.pack.to_json();
    println!("pack: {} bytes, digest {}", artifact.len(), app.pack.bundle_digest);
}
