//! Picks the next sub-dialogue from a pool by topic overlap and conditions.
//!
//! `cargo run --example selector`

use std::collections::BTreeSet;

use flowkit::engine::select_dialogue;
use flowkit::model::{parse_bundle, AttributeRef};
use flowkit::value::Value;

const BUNDLE: &str = r#"{
  "main": "sports",
  "dialogues": [
    {"id": "sports", "labels": ["sports"], "entityTags": ["team"],
     "nodes": [{"id": "enter", "kind": "enter"}, {"id": "exit", "kind": "exit"}], "edges": [{"from": "enter", "to": "exit"}]},
    {"id": "music", "labels": ["music", "hobbies"], "entityTags": ["band"],
     "nodes": [{"id": "enter", "kind": "enter"}, {"id": "exit", "kind": "exit"}], "edges": [{"from": "enter", "to": "exit"}]},
    {"id": "travel", "labels": ["travel", "hobbies"], "startingCondition": "!session.traveled",
     "nodes": [{"id": "enter", "kind": "enter"}, {"id": "exit", "kind": "exit"}], "edges": [{"from": "enter", "to": "exit"}]}
  ]
}"#;

fn main() {
    let bundle = parse_bundle(BUNDLE).expect("bundle");
    let pool: Vec<String> = ["sports", "music", "travel"].map(String::from).to_vec();
    let labels: BTreeSet<String> = ["hobbies".to_string(), "travel".to_string()].into();
    let entities: BTreeSet<String> = BTreeSet::new();

    for traveled in [false, true] {
        let view = move |r: &AttributeRef| match r.name.as_str() {
            "traveled" => Value::Bool(traveled),
            _ => Value::Null,
        };
        let choice = select_dialogue(&pool, &bundle, &labels, &entities, &view);
        println!("traveled = {traveled}: {choice:?}");
    }
}
