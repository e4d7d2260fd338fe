//! Plays a short conversation against the movies bundle with a fixed seed.
//!
//! `cargo run --example chat`

use flowkit::engine::{Application, Engine, SessionOptions, TurnInput};

fn main() {
    let text = include_str!("../bundles/movies.json");
    let app = Application::from_text("movies", text).expect("valid bundle");
    let engine = Engine::default();
    let options = SessionOptions {
        seed: Some(7),
        ..Default::default()
    };
    let (mut session, start) = engine.start_session(&app, options).expect("session");
    for line in &start.responses {
        println!("bot: {line}");
    }
    for utterance in ["I am fine", "My favorite movie is Inception", "yes", "no", "stop"] {
        println!("user: {utterance}");
        let turn = engine.process_turn(&app, &mut session, TurnInput::text(utterance)).expect("turn");
        for line in &turn.responses {
            println!("bot: {line}");
        }
        println!("      trace: {}", turn.record.traversed_nodes.join(" > "));
        if turn.ended {
            break;
        }
    }
}
