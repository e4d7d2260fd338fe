//! Generated responses: the built-in stub and a grounded flow in an app.
//!
//! `cargo run --example nrg_grounding`

use flowkit::engine::{Application, Engine, SessionOptions, TurnInput};
use flowkit::model::DialogueAct;
use flowkit::nrg::{HistoryEntry, NrgRequest, ResponseGenerator, Speaker, StubGenerator};

fn main() {
    let request = NrgRequest {
        history: vec![HistoryEntry {
            speaker: Speaker::User,
            text: "I spent the weekend sailing".into(),
        }],
        act: DialogueAct::StatementThenQuestion,
        grounding: None,
    };
    println!("stub: {}", StubGenerator.generate(&request).response.text);

    let app = Application::from_text("facts", include_str!("../bundles/facts.json")).expect("valid bundle");
    let engine = Engine::default();
    let options = SessionOptions {
        seed: Some(3),
        ..Default::default()
    };
    let (mut session, start) = engine.start_session(&app, options).expect("session");
    for line in &start.responses {
        println!("bot: {line}");
    }
    for text in ["yes please", "wow, I had no idea", "no thanks"] {
        println!("user: {text}");
        let turn = engine.process_turn(&app, &mut session, TurnInput::text(text)).expect("turn");
        for line in &turn.responses {
            println!("bot: {line}");
        }
        if let Some(used) = &turn.record.nrg_used {
            println!("      generated {:?}", used);
        }
    }
}
