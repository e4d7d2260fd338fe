//! Entity masking and local/global/out-of-domain routing at a User Input.
//!
//! `cargo run --example nlu_routing`

use std::collections::BTreeSet;

use flowkit::engine::Application;
use flowkit::model::NodeKey;
use flowkit::nlu::{mask_entities, recognize_entities, route_and_classify};

fn main() {
    let app = Application::from_text("movies", include_str!("../bundles/movies.json")).expect("valid bundle");
    let context = NodeKey::new("movies", "fav");
    let scope = vec!["movies".to_string(), "main".to_string()];
    let allowed: BTreeSet<String> = ["movie".to_string()].into();

    for utterance in ["My favorite movie is Titanic", "stop talking please", "the weather on mars"] {
        let spans = recognize_entities(utterance, &app.bundle.entity_rules);
        let masked = mask_entities(utterance, &spans, &allowed);
        let decision = route_and_classify(&masked, &context, &scope, &app.pack, app.embedder.as_ref()).expect("routing");
        println!("{utterance:?}");
        println!("  masked: {masked:?}");
        println!(
            "  scope: {:?}, local {:.3}, global {:.3}, intent {:?}",
            decision.scope, decision.best_local_sim, decision.best_global_sim, decision.chosen_intent
        );
    }
}
