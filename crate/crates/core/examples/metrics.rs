//! Records a few conversations and queries analytics over them.
//!
//! `cargo run --example metrics`

use std::sync::Arc;

use chrono::{Duration, TimeZone, Utc};
use flowkit::engine::{Application, Engine, FixedClock, SessionOptions, TurnInput};
use flowkit::store::{GroupBy, MemoryStore, Metric, MetricQuery, SessionStore};

fn main() {
    let app = Application::from_text("movies", include_str!("../bundles/movies.json")).expect("valid bundle");
    let store = Arc::new(MemoryStore::new());
    let day = Utc.with_ymd_and_hms(2026, 3, 2, 9, 0, 0).unwrap();
    let conversations = [("web", 0, vec!["I am fine", "stop"]), ("android", 1, vec!["what a strange day", "bad"])];
    for (client, offset, inputs) in conversations {
        let clock = Arc::new(FixedClock(day + Duration::days(offset)));
        let engine = Engine::new(store.clone()).with_clock(clock);
        let options = SessionOptions {
            client_tag: client.into(),
            seed: Some(1),
            ..Default::default()
        };
        let (mut session, _) = engine.start_session(&app, options).expect("session");
        for text in inputs {
            engine.process_turn(&app, &mut session, TurnInput::text(text)).expect("turn");
        }
    }

    for (metric, group_by) in [(Metric::Sessions, GroupBy::Client), (Metric::Turns, GroupBy::None), (Metric::OodRate, GroupBy::Client)] {
        let query = MetricQuery {
            metric,
            group_by,
            granularity: "day".parse().unwrap(),
            from: day - Duration::days(1),
            to: day + Duration::days(3),
            user: None,
            application: None,
        };
        println!("{metric:?} by {group_by:?}");
        for point in store.query_metrics(&query).expect("query").buckets {
            println!("  {} {:<8} {:.3}", point.bucket_start.date_naive(), point.group, point.value);
        }
    }
}
