//! Choosing the next sub-dialogue when one ends without a continuation.

use std::collections::BTreeSet;

use crate::model::{eval_predicate, AttributeView, DialogueBundle, SubDialogue};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Selection {
    Selected(String),
    NoneEligible,
}

/// Size of the union of the dialogue's label overlap and entity overlap with
/// what the session has discussed.
pub fn selector_score(d: &SubDialogue, labels: &BTreeSet<String>, entities: &BTreeSet<String>) -> usize {
    let label_overlap = d.labels.intersection(labels);
    let entity_overlap = d.entity_tags.intersection(entities);
    label_overlap.chain(entity_overlap).collect::<BTreeSet<_>>().len()
}

/// Picks the highest-scoring pool entry whose starting condition holds. Ties
/// go to the earlier pool entry. A condition that fails to evaluate
/// disqualifies its dialogue.
pub fn select_dialogue(
    pool: &[String],
    bundle: &DialogueBundle,
    labels: &BTreeSet<String>,
    entities: &BTreeSet<String>,
    view: &dyn AttributeView,
) -> Selection {
    let mut best: Option<(usize, &str)> = None;
    for id in pool {
        let Some(d) = bundle.dialogue(id) else {
            continue;
        };
        let eligible = match &d.starting_condition {
            None => true,
            Some(cond) => eval_predicate(cond, view).unwrap_or_else(|err| {
                tracing::warn!(dialogue = %id, %err, "starting condition failed; dialogue skipped");
                false
            }),
        };
        if !eligible {
            continue;
        }
        let score = selector_score(d, labels, entities);
        if best.is_none_or(|(s, _)| score > s) {
            best = Some((score, id));
        }
    }
    match best {
        Some((_, id)) => Selection::Selected(id.to_string()),
        None => Selection::NoneEligible,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{parse_bundle, AttributeRef};
    use crate::value::Value;

    fn bundle() -> DialogueBundle {
        let dialogue = |id: &str, labels: &str, cond: &str| {
            format!(
                r#"{{"id": "{id}", "labels": [{labels}], "startingCondition": "{cond}",
                    "nodes": [{{"id": "enter", "kind": "enter"}}, {{"id": "exit", "kind": "exit"}}],
                    "edges": [{{"from": "enter", "to": "exit"}}]}}"#
            )
        };
        let text = format!(
            r#"{{"main": "d1", "dialogues": [{}, {}]}}"#,
            dialogue("d1", r#""movies""#, "true"),
            dialogue("d2", r#""movies", "sport""#, "!session.d2_done"),
        );
        parse_bundle(&text).unwrap()
    }

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn highest_overlap_wins() {
        let b = bundle();
        let view = |_: &AttributeRef| Value::Bool(false);
        let pool = vec!["d1".to_string(), "d2".to_string()];
        let got = select_dialogue(&pool, &b, &set(&["movies", "sport"]), &set(&[]), &view);
        assert_eq!(got, Selection::Selected("d2".into()));
    }

    #[test]
    fn condition_filters() {
        let b = bundle();
        let view = |r: &AttributeRef| Value::Bool(r.name == "d2_done");
        let pool = vec!["d1".to_string(), "d2".to_string()];
        let got = select_dialogue(&pool, &b, &set(&["movies", "sport"]), &set(&[]), &view);
        assert_eq!(got, Selection::Selected("d1".into()));
    }

    #[test]
    fn empty_pool_and_failing_condition() {
        let b = bundle();
        let view = |_: &AttributeRef| Value::Int(3);
        assert_eq!(select_dialogue(&[], &b, &set(&[]), &set(&[]), &view), Selection::NoneEligible);
        // `!3` is a type error, so d2 is disqualified.
        let got = select_dialogue(&["d2".to_string()], &b, &set(&[]), &set(&[]), &view);
        assert_eq!(got, Selection::NoneEligible);
    }

    #[test]
    fn ties_go_to_pool_order() {
        let b = bundle();
        let view = |_: &AttributeRef| Value::Bool(false);
        let pool = vec!["d2".to_string(), "d1".to_string()];
        assert_eq!(
            select_dialogue(&pool, &b, &set(&["movies"]), &set(&[]), &view),
            Selection::Selected("d2".into())
        );
    }
}
