//! Structural checks over a parsed bundle.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};

use serde::Serialize;

use super::{AttributeRef, DialogueBundle, Node, NodeId, NodeKind, NodePayload, Scope, SubDialogue};
use crate::skimmer::SkimValue;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct Location {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dialogue: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub node: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub location: Location,
    pub rule: &'static str,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let severity = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{severity}[{}]", self.rule)?;
        match (&self.location.dialogue, &self.location.node) {
            (Some(d), Some(n)) => write!(f, " {d}/{n}")?,
            (Some(d), None) => write!(f, " {d}")?,
            _ => {}
        }
        write!(f, ": {}", self.message)
    }
}

#[derive(Default)]
struct Report {
    out: Vec<Diagnostic>,
}

impl Report {
    fn push(&mut self, severity: Severity, dialogue: Option<&str>, node: Option<&NodeId>, rule: &'static str, message: String) {
        self.out.push(Diagnostic {
            severity,
            location: Location {
                dialogue: dialogue.map(str::to_string),
                node: node.map(|n| n.0.clone()),
            },
            rule,
            message,
        });
    }

    fn error(&mut self, d: &SubDialogue, node: Option<&NodeId>, rule: &'static str, message: String) {
        self.push(Severity::Error, Some(&d.id), node, rule, message);
    }

    fn bundle(&mut self, rule: &'static str, message: String) {
        self.push(Severity::Error, None, None, rule, message);
    }
}

/// Checks every structural invariant of the bundle. Diagnostics come out in
/// a fixed order: bundle-level, then each sub-dialogue in declaration order,
/// then entity and skimmer rules.
pub fn validate_bundle(bundle: &DialogueBundle) -> Vec<Diagnostic> {
    let mut r = Report::default();
    let dialogue_ids: HashSet<&str> = bundle.sub_dialogues.iter().map(|d| d.id.as_str()).collect();
    let entity_types = bundle.entity_types();
    let declared = bundle.attribute_decls();

    if !dialogue_ids.contains(bundle.main_dialogue_id.as_str()) {
        r.bundle("unknown-main", format!("main dialogue `{}` does not exist", bundle.main_dialogue_id));
    }
    for id in &bundle.selector_pool {
        if !dialogue_ids.contains(id.as_str()) {
            r.bundle("unknown-pool-entry", format!("selector pool entry `{id}` does not exist"));
        }
    }

    let mut first_decl: BTreeMap<AttributeRef, (&str, &crate::value::Value)> = BTreeMap::new();
    for d in &bundle.sub_dialogues {
        check_dialogue(&mut r, d, &dialogue_ids, &entity_types, &declared);
        for decl in &d.init_attributes {
            let key = AttributeRef::new(decl.scope, decl.name.clone());
            match first_decl.get(&key) {
                Some((owner, default)) if *owner != d.id && **default != decl.default => r.push(
                    Severity::Warning,
                    Some(&d.id),
                    None,
                    "conflicting-attribute",
                    format!("{key} is also declared in `{owner}` with default {}", default.to_json()),
                ),
                Some(_) => {}
                None => {
                    first_decl.insert(key, (&d.id, &decl.default));
                }
            }
        }
    }

    let mut seen_types = HashSet::new();
    for rule in &bundle.entity_rules {
        if !seen_types.insert(rule.type_name.as_str()) {
            r.bundle("duplicate-entity-type", format!("entity type `{}` is defined twice", rule.type_name));
        }
        if rule.matches_nothing() {
            r.bundle(
                "empty-entity-rule",
                format!("entity type `{}` has no patterns, values or built-in normalizer", rule.type_name),
            );
        }
    }

    for (i, rule) in bundle.skimmer_rules.iter().enumerate() {
        let what = format!("skimmer rule {i} ({})", rule.attribute);
        if rule.patterns.is_empty() {
            r.bundle("skimmer-no-patterns", format!("{what} has no patterns"));
        }
        if rule.attribute.scope == Scope::Turn {
            r.bundle("skimmer-turn-scope", format!("{what} targets a turn attribute"));
        }
        if !declared.contains_key(&rule.attribute) {
            r.bundle("undeclared-attribute", format!("{what} writes an undeclared attribute"));
        }
        if let (SkimValue::Group(g), Some(first)) = (&rule.value, rule.patterns.first()) {
            if !first.has_group(g) {
                r.bundle(
                    "skimmer-bad-group",
                    format!("{what} references group {g}, which its first pattern does not define"),
                );
            }
        }
    }
    r.out
}

fn check_refs<'a>(
    r: &mut Report,
    d: &SubDialogue,
    node: Option<&NodeId>,
    refs: impl IntoIterator<Item = &'a AttributeRef>,
    declared: &BTreeMap<AttributeRef, crate::value::Value>,
) {
    let mut reported = BTreeSet::new();
    for a in refs {
        if !declared.contains_key(a) && reported.insert(a.clone()) {
            r.error(d, node, "undeclared-attribute", format!("{a} is not declared"));
        }
    }
}

fn check_dialogue(
    r: &mut Report,
    d: &SubDialogue,
    dialogue_ids: &HashSet<&str>,
    entity_types: &BTreeSet<&str>,
    declared: &BTreeMap<AttributeRef, crate::value::Value>,
) {
    let node_ids: HashSet<&NodeId> = d.nodes.iter().map(|n| &n.id).collect();
    let kind_of = |id: &NodeId| d.node(id).map(Node::kind);

    let mut names = HashSet::new();
    for decl in &d.init_attributes {
        if !names.insert(decl.name.as_str()) {
            r.error(d, None, "duplicate-attribute", format!("attribute `{}` is declared twice", decl.name));
        }
    }
    for tag in &d.entity_tags {
        if !entity_types.contains(tag.as_str()) {
            r.error(d, None, "unknown-entity-type", format!("entity tag `{tag}` has no entity rule"));
        }
    }
    if let Some(cond) = &d.starting_condition {
        check_refs(r, d, None, cond.references(), declared);
    }

    for e in &d.edges {
        for end in [&e.from, &e.to] {
            if !node_ids.contains(end) {
                r.error(d, Some(&e.from), "dangling-edge", format!("edge {} -> {} names missing node `{end}`", e.from, e.to));
            }
        }
        if kind_of(&e.to) == Some(NodeKind::Enter) {
            r.error(d, Some(&e.to), "edge-into-enter", format!("edge from `{}` enters the Enter node", e.from));
        }
    }

    let Some(enter) = d.enter() else {
        r.error(d, None, "missing-enter", "sub-dialogue has no Enter node".into());
        check_nodes(r, d, dialogue_ids, entity_types, declared);
        return;
    };

    let mut reachable = HashSet::new();
    let mut queue = VecDeque::from([&enter.id]);
    while let Some(id) = queue.pop_front() {
        if reachable.insert(id) {
            queue.extend(d.out_edges(id).map(|e| &e.to));
        }
    }
    let exit_reachable = d
        .nodes
        .iter()
        .any(|n| n.kind() == NodeKind::Exit && reachable.contains(&n.id));
    if !exit_reachable {
        r.error(d, Some(&enter.id), "unreachable-exit", "no Exit node is reachable from Enter".into());
    }
    check_nodes(r, d, dialogue_ids, entity_types, declared);
}

fn expect_out_edges(r: &mut Report, d: &SubDialogue, node: &Node, min: usize, max: usize) {
    let count = d.out_edges(&node.id).count();
    let kind = node.kind().keyword();
    if count < min {
        r.error(d, Some(&node.id), "missing-edge", format!("`{kind}` node has no outgoing edge"));
    } else if count > max {
        r.error(d, Some(&node.id), "ambiguous-edge", format!("`{kind}` node has {count} outgoing edges"));
    }
}

fn check_nodes(
    r: &mut Report,
    d: &SubDialogue,
    dialogue_ids: &HashSet<&str>,
    entity_types: &BTreeSet<&str>,
    declared: &BTreeMap<AttributeRef, crate::value::Value>,
) {
    let kind_of = |id: &NodeId| d.node(id).map(Node::kind);
    let mut global_actions = HashSet::new();

    for node in &d.nodes {
        let id = Some(&node.id);
        if !matches!(node.payload, NodePayload::Function(_)) {
            for e in d.out_edges(&node.id).filter(|e| !e.out_key.is_empty()) {
                r.error(
                    d,
                    id,
                    "unknown-out-key",
                    format!("out key `{}` is only meaningful on Function nodes", e.out_key),
                );
            }
        }
        match &node.payload {
            NodePayload::Enter => expect_out_edges(r, d, node, 1, 1),
            NodePayload::Exit => {
                if d.out_edges(&node.id).next().is_some() {
                    r.error(d, id, "exit-has-edge", "Exit node has outgoing edges".into());
                }
            }
            NodePayload::Speech(s) => {
                expect_out_edges(r, d, node, 1, 1);
                if s.responses.is_empty() {
                    r.error(d, id, "empty-responses", "Speech node has no responses".into());
                }
                check_refs(r, d, id, s.responses.iter().flat_map(|t| t.slots()), declared);
            }
            NodePayload::UserInput(_) => {
                let mut local_actions = HashSet::new();
                for e in d.out_edges(&node.id) {
                    let target = d.node(&e.to);
                    match target.map(|t| &t.payload) {
                        Some(NodePayload::Intent(i)) if !i.is_global => {}
                        Some(NodePayload::Action(a)) if !a.is_global => {
                            if !local_actions.insert(a.situation) {
                                r.error(
                                    d,
                                    id,
                                    "duplicate-local-action",
                                    format!("more than one {:?} action is connected", a.situation),
                                );
                            }
                        }
                        Some(_) => r.error(
                            d,
                            id,
                            "bad-user-input-edge",
                            format!("User Input may only lead to Intent or Action nodes, not `{}`", e.to),
                        ),
                        None => {}
                    }
                }
                if d.local_intents(&node.id).is_empty() {
                    r.error(d, id, "user-input-without-intents", "User Input has no connected Intent".into());
                }
            }
            NodePayload::Intent(intent) => {
                expect_out_edges(r, d, node, 1, 1);
                if intent.examples.is_empty() {
                    r.error(d, id, "empty-examples", "Intent node has no examples".into());
                }
                for ex in &intent.examples {
                    for t in ex.entity_types() {
                        if !entity_types.contains(t) {
                            r.error(d, id, "unknown-entity-type", format!("example `{}` uses undefined entity type `{t}`", ex.source));
                        }
                    }
                }
                let incoming: Vec<Option<NodeKind>> = d.in_edges(&node.id).map(|e| kind_of(&e.from)).collect();
                if intent.is_global {
                    if !incoming.is_empty() {
                        r.error(d, id, "intent-connection", "Global Intent must not have incoming edges".into());
                    }
                } else {
                    let from_ui = incoming.iter().filter(|k| **k == Some(NodeKind::UserInput)).count();
                    if from_ui != 1 || incoming.len() != 1 {
                        r.error(
                            d,
                            id,
                            "intent-connection",
                            format!("Intent must connect to exactly one User Input (found {} incoming edges)", incoming.len()),
                        );
                    }
                }
            }
            NodePayload::Function(f) => {
                check_refs(
                    r,
                    d,
                    id,
                    f.assignments
                        .iter()
                        .flat_map(|a| std::iter::once(&a.target).chain(a.expr.references())),
                    declared,
                );
                check_refs(r, d, id, f.transitions.iter().flat_map(|t| t.guard.references()), declared);
                match f.transitions.last() {
                    None => r.error(d, id, "function-no-transition", "Function node has no transitions".into()),
                    Some(t) if !t.guard.is_literal_true() => r.error(
                        d,
                        id,
                        "missing-default-guard",
                        "the last transition guard must be the literal `true`".into(),
                    ),
                    Some(_) => {}
                }
                let mut keys = HashSet::new();
                for t in &f.transitions {
                    if !keys.insert(t.out_key.as_str()) {
                        r.error(d, id, "duplicate-out-key", format!("out key `{}` is used by two transitions", t.out_key));
                        continue;
                    }
                    let count = d.out_edges(&node.id).filter(|e| e.out_key == t.out_key).count();
                    if count == 0 {
                        r.error(d, id, "missing-edge", format!("no edge for out key `{}`", t.out_key));
                    } else if count > 1 {
                        r.error(d, id, "ambiguous-edge", format!("{count} edges for out key `{}`", t.out_key));
                    }
                }
                for e in d.out_edges(&node.id) {
                    if !keys.contains(e.out_key.as_str()) {
                        r.error(
                            d,
                            id,
                            "unknown-out-key",
                            format!("edge to `{}` uses out key `{}`, which no transition declares", e.to, e.out_key),
                        );
                    }
                }
            }
            NodePayload::Action(a) => {
                expect_out_edges(r, d, node, 1, 1);
                let incoming: Vec<Option<NodeKind>> = d.in_edges(&node.id).map(|e| kind_of(&e.from)).collect();
                if a.is_global {
                    if !global_actions.insert(a.situation) {
                        r.error(
                            d,
                            id,
                            "duplicate-global-action",
                            format!("more than one global {:?} action", a.situation),
                        );
                    }
                    if !incoming.is_empty() {
                        r.error(d, id, "action-connection", "Global Action must not have incoming edges".into());
                    }
                } else if incoming.is_empty() || incoming.iter().any(|k| *k != Some(NodeKind::UserInput)) {
                    r.error(d, id, "action-connection", "Action must be reached only from User Input nodes".into());
                }
            }
            NodePayload::SubDialogueRef { dialogue } => {
                expect_out_edges(r, d, node, 0, 1);
                if !dialogue_ids.contains(dialogue.as_str()) {
                    r.error(d, id, "dangling-ref", format!("referenced sub-dialogue `{dialogue}` does not exist"));
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_bundle;

    const MINIMAL: &str = r#"{
      "main": "main",
      "dialogues": [{
        "id": "main",
        "nodes": [
          {"id": "enter", "kind": "enter"},
          {"id": "hi", "kind": "speech", "responses": ["Hi!"]},
          {"id": "exit", "kind": "exit"}
        ],
        "edges": [{"from": "enter", "to": "hi"}, {"from": "hi", "to": "exit"}]
      }]
    }"#;

    fn rules(text: &str) -> Vec<&'static str> {
        validate_bundle(&parse_bundle(text).unwrap())
            .into_iter()
            .filter(|d| d.severity == Severity::Error)
            .map(|d| d.rule)
            .collect()
    }

    #[test]
    fn minimal_is_valid() {
        assert!(validate_bundle(&parse_bundle(MINIMAL).unwrap()).is_empty());
    }

    #[test]
    fn unreachable_exit() {
        let text = MINIMAL.replace(r#"{"from": "hi", "to": "exit"}"#, r#"{"from": "hi", "to": "hi"}"#);
        assert_eq!(rules(&text), ["unreachable-exit"]);
    }

    #[test]
    fn dangling_ref() {
        let text = MINIMAL.replace(
            r#"{"id": "hi", "kind": "speech", "responses": ["Hi!"]}"#,
            r#"{"id": "hi", "kind": "subDialogue", "dialogue": "nowhere"}"#,
        );
        assert_eq!(rules(&text), ["dangling-ref"]);
    }

    #[test]
    fn missing_enter_and_dangling_edge() {
        let text = MINIMAL
            .replace(r#"{"id": "enter", "kind": "enter"},"#, "")
            .replace(r#"{"from": "enter", "to": "hi"}, "#, r#"{"from": "ghost", "to": "hi"}, "#);
        assert_eq!(rules(&text), ["dangling-edge", "missing-enter"]);
    }

    #[test]
    fn undeclared_slot_and_entity_type() {
        let text = MINIMAL
            .replace("\"Hi!\"", "\"Hi {user.name}\"")
            .replace(r#""id": "main","#, r#""id": "main", "entityTags": ["movie"],"#);
        assert_eq!(rules(&text), ["unknown-entity-type", "undeclared-attribute"]);
    }

    #[test]
    fn function_rules() {
        let text = r#"{
          "main": "m",
          "dialogues": [{
            "id": "m",
            "attributes": [{"name": "n", "scope": "session", "default": 0}],
            "nodes": [
              {"id": "enter", "kind": "enter"},
              {"id": "f", "kind": "function", "transitions": [{"guard": "session.n > 0", "out": "pos"}]},
              {"id": "exit", "kind": "exit"}
            ],
            "edges": [{"from": "enter", "to": "f"}, {"from": "f", "out": "pos", "to": "exit"}, {"from": "f", "out": "neg", "to": "exit"}]
          }]
        }"#;
        assert_eq!(rules(text), ["missing-default-guard", "unknown-out-key"]);
    }

    #[test]
    fn intent_and_user_input_rules() {
        let text = r#"{
          "main": "m",
          "dialogues": [{
            "id": "m",
            "nodes": [
              {"id": "enter", "kind": "enter"},
              {"id": "ask", "kind": "userInput"},
              {"id": "orphan", "kind": "intent", "examples": ["x"]},
              {"id": "g", "kind": "globalAction", "situation": "error"},
              {"id": "g2", "kind": "globalAction", "situation": "error"},
              {"id": "exit", "kind": "exit"}
            ],
            "edges": [{"from": "enter", "to": "ask"}, {"from": "ask", "to": "exit"},
                      {"from": "orphan", "to": "exit"}, {"from": "g", "to": "exit"}, {"from": "g2", "to": "exit"}]
          }]
        }"#;
        assert_eq!(
            rules(text),
            ["bad-user-input-edge", "user-input-without-intents", "intent-connection", "duplicate-global-action"]
        );
    }

    #[test]
    fn skimmer_rules() {
        let text = MINIMAL.replace(
            r#""edges""#,
            r#""attributes": [{"name": "t", "scope": "turn"}, {"name": "name", "scope": "user"}], "edges""#,
        );
        let text = text.trim_end().trim_end_matches('}').to_string()
            + r#", "skimmer": [
                {"patterns": ["x"], "attribute": "turn.t", "value": true},
                {"patterns": ["my name is (\\w+)"], "attribute": "user.name", "value": {"group": 2}}
            ]}"#;
        assert_eq!(rules(&text), ["skimmer-turn-scope", "skimmer-bad-group"]);
    }

    #[test]
    fn validation_is_deterministic() {
        let text = MINIMAL.replace("\"Hi!\"", "\"{session.a} {user.b}\"");
        let b = parse_bundle(&text).unwrap();
        assert_eq!(validate_bundle(&b), validate_bundle(&b));
    }
}
