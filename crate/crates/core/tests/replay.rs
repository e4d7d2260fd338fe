mod common;

use std::sync::Arc;

use flowkit::engine::{Application, Engine, SessionOptions, TurnInput};
use flowkit::store::{FileStore, MemoryStore, ProfileStore, SessionStore};

fn movies() -> Application {
    Application::from_text("movies", &common::read("bundles/movies.json")).unwrap()
}

fn record_session(store: Arc<dyn SessionStore>, seed: Option<u64>) -> String {
    let app = movies();
    let engine = Engine::new(store);
    let options = SessionOptions {
        user_id: "ann".into(),
        seed,
        ..Default::default()
    };
    let (mut session, _) = engine.start_session(&app, options).unwrap();
    for input in common::golden_inputs() {
        if engine.process_turn(&app, &mut session, TurnInput::text(input)).unwrap().ended {
            break;
        }
    }
    session.id.clone()
}

#[test]
fn stored_transcript_replays_with_recorded_seed() {
    let dir = tempfile::tempdir().unwrap();
    let id = record_session(Arc::new(FileStore::open(dir.path()).unwrap()), None);

    let reopened = FileStore::open(dir.path()).unwrap();
    let record = reopened.session(&id).unwrap();
    let turns = reopened.get_transcript(&id).unwrap();
    assert_eq!(turns.len(), 12);
    assert!(record.ended_at.is_some());

    let app = movies();
    let engine = Engine::new(Arc::new(MemoryStore::new()));
    let options = SessionOptions {
        user_id: record.user_id.clone(),
        community: record.community.clone(),
        seed: Some(record.seed),
        ..Default::default()
    };
    let (mut session, start) = engine.start_session(&app, options).unwrap();
    assert_eq!(start.responses, record.opening.responses);
    for turn in &turns {
        let replayed = engine
            .process_turn(&app, &mut session, TurnInput::text(turn.raw_utterance.clone()))
            .unwrap();
        assert_eq!(replayed.responses, turn.responses, "turn {}", turn.turn_index);
        assert_eq!(replayed.record.traversed_nodes, turn.traversed_nodes);
        assert_eq!(replayed.record.attribute_diff, turn.attribute_diff);
    }
}

#[test]
fn file_store_keeps_user_attributes_between_runs() {
    let dir = tempfile::tempdir().unwrap();
    record_session(Arc::new(FileStore::open(dir.path()).unwrap()), Some(1));
    let reopened = FileStore::open(dir.path()).unwrap();
    let attributes = reopened.list_attributes(flowkit::model::Scope::User, "ann");
    assert_eq!(attributes.get("hasBrother"), Some(&flowkit::value::Value::Bool(true)));
}
