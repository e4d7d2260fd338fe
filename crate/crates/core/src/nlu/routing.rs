//! Scope routing and intent classification for one user turn.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::embed::{cosine, Embedder, Embedding};
use super::pack::TrainedNluPack;
use crate::model::NodeKey;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum RouteScope {
    Local,
    Global,
    OutOfDomain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingDecision {
    pub scope: RouteScope,
    pub best_local_sim: f64,
    pub best_global_sim: f64,
    pub chosen_intent: Option<NodeKey>,
    pub confidence: Option<f64>,
}

#[derive(Debug, Error, PartialEq)]
pub enum RoutingError {
    #[error("no intent model for user input {0}")]
    UnknownContext(NodeKey),
    #[error("pack was trained with embedder {pack}, not {given}")]
    EmbedderMismatch { pack: String, given: String },
}

fn best_similarity<'a>(pack: &TrainedNluPack, x: &Embedding, intents: impl IntoIterator<Item = &'a NodeKey>) -> f64 {
    intents
        .into_iter()
        .filter_map(|k| pack.bank.get(k))
        .flatten()
        .map(|entry| cosine(x, &entry.embedding))
        .fold(0.0, f64::max)
}

/// Routes a masked utterance at the User Input `context`.
///
/// `global_scope` lists the sub-dialogues whose global intents are in view,
/// innermost first. Uses the pack's out-of-domain threshold.
pub fn route_and_classify(
    masked: &str,
    context: &NodeKey,
    global_scope: &[String],
    pack: &TrainedNluPack,
    embedder: &dyn Embedder,
) -> Result<RoutingDecision, RoutingError> {
    if pack.embedder != embedder.id() {
        return Err(RoutingError::EmbedderMismatch {
            pack: pack.embedder.clone(),
            given: embedder.id(),
        });
    }
    route_embedding(&embedder.embed(masked), context, global_scope, pack, pack.ood_threshold)
}

/// Routing over a precomputed embedding with an explicit threshold.
///
/// The scope whose example bank holds the single most similar example wins,
/// with ties going to the local scope. Out of domain when that similarity is
/// below `threshold`. Among global scopes, the dialogue holding the best
/// example supplies the classifier; ties go to the innermost dialogue.
pub fn route_embedding(
    x: &Embedding,
    context: &NodeKey,
    global_scope: &[String],
    pack: &TrainedNluPack,
    threshold: f64,
) -> Result<RoutingDecision, RoutingError> {
    let local = pack
        .local
        .get(context)
        .ok_or_else(|| RoutingError::UnknownContext(context.clone()))?;
    let best_local_sim = best_similarity(pack, x, &local.classifier.class_ids);

    let mut best_global: Option<(f64, &str)> = None;
    for dialogue in global_scope {
        if let Some(model) = pack.global.get(dialogue) {
            let sim = best_similarity(pack, x, &model.classifier.class_ids);
            if best_global.is_none_or(|(best, _)| sim > best) {
                best_global = Some((sim, dialogue));
            }
        }
    }
    let best_global_sim = best_global.map_or(0.0, |(s, _)| s);

    let (scope, model) = if best_local_sim.max(best_global_sim) < threshold {
        (RouteScope::OutOfDomain, None)
    } else if best_local_sim >= best_global_sim {
        (RouteScope::Local, Some(local))
    } else {
        let (_, dialogue) = best_global.expect("global similarity implies a global model");
        (RouteScope::Global, pack.global.get(dialogue))
    };
    let (chosen_intent, confidence) = match model.and_then(|m| m.classifier.predict(x)) {
        Some((key, p)) => (Some(key.clone()), Some(p)),
        None => (None, None),
    };
    Ok(RoutingDecision {
        scope,
        best_local_sim,
        best_global_sim,
        chosen_intent,
        confidence,
    })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::model::parse_bundle;
    use crate::nlu::classifier::TrainParams;
    use crate::nlu::embed::HashedNgramEmbedder;
    use crate::nlu::pack::train_pack;

    const BUNDLE: &str = r#"{
      "main": "main",
      "dialogues": [
        {
          "id": "main",
          "nodes": [
            {"id": "enter", "kind": "enter"},
            {"id": "ask", "kind": "userInput"},
            {"id": "yes", "kind": "intent", "examples": ["yes", "yeah sure"]},
            {"id": "no", "kind": "intent", "examples": ["no", "nope not really"]},
            {"id": "stop", "kind": "globalIntent", "examples": ["stop talking", "quit now"]},
            {"id": "exit", "kind": "exit"}
          ],
          "edges": [
            {"from": "enter", "to": "ask"},
            {"from": "ask", "to": "yes"},
            {"from": "ask", "to": "no"},
            {"from": "yes", "to": "exit"},
            {"from": "no", "to": "exit"},
            {"from": "stop", "to": "exit"}
          ]
        },
        {
          "id": "side",
          "nodes": [
            {"id": "enter", "kind": "enter"},
            {"id": "help", "kind": "globalIntent", "examples": ["help me please"]},
            {"id": "exit", "kind": "exit"}
          ],
          "edges": [
            {"from": "enter", "to": "exit"},
            {"from": "help", "to": "exit"}
          ]
        }
      ]
    }"#;

    fn setup() -> (TrainedNluPack, HashedNgramEmbedder) {
        let e = HashedNgramEmbedder::default();
        let bundle = parse_bundle(BUNDLE).unwrap();
        (train_pack(&bundle, &e, TrainParams::default()).unwrap(), e)
    }

    fn scope() -> Vec<String> {
        vec!["side".into(), "main".into()]
    }

    #[test]
    fn local_global_and_ood() {
        let (pack, e) = setup();
        let ctx = NodeKey::new("main", "ask");
        let d = route_and_classify("yeah sure", &ctx, &scope(), &pack, &e).unwrap();
        assert_eq!(d.scope, RouteScope::Local);
        assert_eq!(d.chosen_intent, Some(NodeKey::new("main", "yes")));
        assert!((d.best_local_sim - 1.0).abs() < 1e-9);

        let d = route_and_classify("help me please", &ctx, &scope(), &pack, &e).unwrap();
        assert_eq!(d.scope, RouteScope::Global);
        assert_eq!(d.chosen_intent, Some(NodeKey::new("side", "help")));

        let d = route_and_classify("quantum chromodynamics", &ctx, &scope(), &pack, &e).unwrap();
        assert_eq!(d.scope, RouteScope::OutOfDomain);
        assert_eq!(d.chosen_intent, None);
        assert_eq!(d.confidence, None);
    }

    #[test]
    fn globals_outside_scope_are_ignored() {
        let (pack, e) = setup();
        let ctx = NodeKey::new("main", "ask");
        let d = route_and_classify("help me please", &ctx, &["main".into()], &pack, &e).unwrap();
        assert_ne!(d.chosen_intent, Some(NodeKey::new("side", "help")));
        assert!(d.best_global_sim < 1.0);
    }

    #[test]
    fn unknown_context_is_an_error() {
        let (pack, e) = setup();
        let ctx = NodeKey::new("main", "nowhere");
        assert_eq!(
            route_and_classify("yes", &ctx, &[], &pack, &e),
            Err(RoutingError::UnknownContext(ctx))
        );
    }

    static TRAINED: std::sync::LazyLock<(TrainedNluPack, HashedNgramEmbedder)> = std::sync::LazyLock::new(setup);

    proptest! {
        #[test]
        fn raising_threshold_never_leaves_ood(text in "[a-z ]{0,20}", lo in 0.0f64..1.0, delta in 0.0f64..0.5) {
            let (pack, e) = &*TRAINED;
            let ctx = NodeKey::new("main", "ask");
            let x = e.embed(&text);
            let low = route_embedding(&x, &ctx, &scope(), pack, lo).unwrap();
            let high = route_embedding(&x, &ctx, &scope(), pack, lo + delta).unwrap();
            if low.scope == RouteScope::OutOfDomain {
                prop_assert_eq!(high.scope, RouteScope::OutOfDomain);
            }
        }
    }
}
