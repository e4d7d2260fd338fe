//! The JSON bundle document.
//!
//! ```json
//! {
//!   "main": "main",
//!   "dialogues": [{
//!     "id": "main",
//!     "labels": [], "entityTags": [], "startingCondition": "true",
//!     "attributes": [{"name": "count", "scope": "session", "default": 0}],
//!     "nodes": [{"id": "enter", "kind": "enter"}, {"id": "hi", "kind": "speech", "responses": ["Hi!"]}],
//!     "edges": [{"from": "enter", "to": "hi"}]
//!   }],
//!   "entities": [{"type": "movie", "values": ["Matrix"]}],
//!   "skimmer": [{"patterns": ["\\bbrother\\b"], "attribute": "user.has_sibling", "value": true}],
//!   "selectorPool": [],
//!   "config": {"language": "en", "oodThreshold": 0.55, "seed": 0}
//! }
//! ```

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use super::condition::parse_condition;
use super::markup::parse_markup;
use super::template::Template;
use super::{
    ActionPayload, Assignment, AttributeDecl, AttributeRef, BundleConfig, DialogueAct, DialogueBundle, Edge,
    FunctionPayload, IntentPayload, Node, NodeId, NodeKind, NodePayload, Scope, Situation, SpeechPayload,
    SubDialogue, Transition, UserInputPayload,
};
use crate::nlu::{EntityRule, Normalizer};
use crate::pattern::{GroupRef, Pattern};
use crate::skimmer::{SkimValue, SkimmerRule};
use crate::value::Value;

/// A bundle document that could not be turned into a [`DialogueBundle`].
///
/// JSON syntax and shape errors carry a 1-based line and column. Errors found
/// after decoding carry the JSON path of the offending element instead.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ParseError {
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub path: Option<String>,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, self.column, &self.path) {
            (Some(line), Some(column), _) => write!(f, "line {line}, column {column}: {}", self.message),
            (_, _, Some(path)) => write!(f, "{path}: {}", self.message),
            _ => f.write_str(&self.message),
        }
    }
}

fn at(path: impl Into<String>, message: impl Into<String>) -> ParseError {
    ParseError {
        line: None,
        column: None,
        path: Some(path.into()),
        message: message.into(),
    }
}

impl From<serde_json::Error> for ParseError {
    fn from(e: serde_json::Error) -> Self {
        ParseError {
            line: Some(e.line()),
            column: Some(e.column()),
            path: None,
            message: e.to_string().split(" at line ").next().unwrap_or_default().to_string(),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct BundleDoc {
    main: String,
    dialogues: Vec<DialogueDoc>,
    #[serde(default)]
    entities: Vec<EntityDoc>,
    #[serde(default)]
    skimmer: Vec<SkimmerDoc>,
    #[serde(default)]
    selector_pool: Vec<String>,
    #[serde(default)]
    config: ConfigDoc,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct DialogueDoc {
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    #[serde(default)]
    labels: Vec<String>,
    #[serde(default)]
    entity_tags: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    starting_condition: Option<String>,
    #[serde(default)]
    attributes: Vec<AttributeDoc>,
    nodes: Vec<NodeDoc>,
    #[serde(default)]
    edges: Vec<EdgeDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AttributeDoc {
    name: String,
    scope: Scope,
    #[serde(default)]
    default: Value,
}

#[derive(Serialize, Deserialize, Default)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct NodeDoc {
    id: String,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    responses: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    nrg: Option<DialogueAct>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    examples: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    assignments: Option<Vec<AssignmentDoc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    transitions: Option<Vec<TransitionDoc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    situation: Option<Situation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dialogue: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AssignmentDoc {
    target: String,
    expr: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransitionDoc {
    guard: String,
    out: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeDoc {
    from: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    out: Option<String>,
    to: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntityDoc {
    #[serde(rename = "type")]
    type_name: String,
    #[serde(default)]
    patterns: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    values: Vec<String>,
    #[serde(default)]
    normalizer: Normalizer,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SkimmerDoc {
    patterns: Vec<String>,
    attribute: String,
    value: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct ConfigDoc {
    #[serde(default = "default_language")]
    language: String,
    #[serde(default = "default_threshold")]
    ood_threshold: f64,
    #[serde(default)]
    seed: u64,
}

fn default_language() -> String {
    BundleConfig::default().language
}

fn default_threshold() -> f64 {
    BundleConfig::default().ood_threshold
}

impl Default for ConfigDoc {
    fn default() -> Self {
        let c = BundleConfig::default();
        ConfigDoc {
            language: c.language,
            ood_threshold: c.ood_threshold,
            seed: c.seed,
        }
    }
}

const NODE_KINDS: [NodeKind; 10] = [
    NodeKind::Enter,
    NodeKind::Speech,
    NodeKind::UserInput,
    NodeKind::Intent,
    NodeKind::GlobalIntent,
    NodeKind::Function,
    NodeKind::Action,
    NodeKind::GlobalAction,
    NodeKind::SubDialogueRef,
    NodeKind::Exit,
];

/// Parses and structurally checks a bundle document.
pub fn parse_bundle(text: &str) -> Result<DialogueBundle, ParseError> {
    let doc: BundleDoc = serde_json::from_str(text)?;
    let mut seen = HashSet::new();
    let mut sub_dialogues = Vec::with_capacity(doc.dialogues.len());
    for (i, d) in doc.dialogues.into_iter().enumerate() {
        let path = format!("dialogues[{i}]");
        if d.id.is_empty() {
            return Err(at(path, "dialogue id must not be empty"));
        }
        if !seen.insert(d.id.clone()) {
            return Err(at(path, format!("duplicate dialogue id `{}`", d.id)));
        }
        sub_dialogues.push(convert_dialogue(d, &path)?);
    }

    let mut entity_rules = Vec::with_capacity(doc.entities.len());
    for (i, e) in doc.entities.into_iter().enumerate() {
        let path = format!("entities[{i}]");
        let patterns = compile_all(&e.patterns, &path)?;
        let rule = EntityRule::from_parts(e.type_name, patterns, e.values, e.normalizer)
            .map_err(|err| at(&path, format!("invalid pattern: {err}")))?;
        entity_rules.push(rule);
    }

    let mut skimmer_rules = Vec::with_capacity(doc.skimmer.len());
    for (i, s) in doc.skimmer.into_iter().enumerate() {
        let path = format!("skimmer[{i}]");
        let attribute: AttributeRef = s
            .attribute
            .parse()
            .map_err(|m: String| at(format!("{path}.attribute"), m))?;
        let value = match s.value {
            serde_json::Value::Object(map) => {
                let group = map
                    .get("group")
                    .filter(|_| map.len() == 1)
                    .ok_or_else(|| at(format!("{path}.value"), "expected a literal or {\"group\": N | \"name\"}"))?;
                match group {
                    serde_json::Value::Number(n) if n.as_u64().is_some() => {
                        SkimValue::Group(GroupRef::Index(n.as_u64().unwrap_or_default() as usize))
                    }
                    serde_json::Value::String(name) => SkimValue::Group(GroupRef::Name(name.clone())),
                    _ => return Err(at(format!("{path}.value.group"), "group must be an index or a name")),
                }
            }
            serde_json::Value::Array(_) => {
                return Err(at(format!("{path}.value"), "skimmer value must be a scalar or a group reference"))
            }
            other => SkimValue::Literal(Value::from_json(other)),
        };
        skimmer_rules.push(SkimmerRule {
            patterns: compile_all(&s.patterns, &path)?,
            attribute,
            value,
        });
    }

    let threshold = doc.config.ood_threshold;
    if !(0.0..=1.0).contains(&threshold) {
        return Err(at("config.oodThreshold", format!("threshold {threshold} is outside [0, 1]")));
    }

    Ok(DialogueBundle {
        main_dialogue_id: doc.main,
        sub_dialogues,
        entity_rules,
        skimmer_rules,
        selector_pool: doc.selector_pool,
        config: BundleConfig {
            language: doc.config.language,
            ood_threshold: threshold,
            seed: doc.config.seed,
        },
    })
}

fn compile_all(sources: &[String], path: &str) -> Result<Vec<Pattern>, ParseError> {
    sources
        .iter()
        .enumerate()
        .map(|(j, p)| Pattern::new(p).map_err(|e| at(format!("{path}.patterns[{j}]"), format!("invalid pattern: {e}"))))
        .collect()
}

fn convert_dialogue(d: DialogueDoc, path: &str) -> Result<SubDialogue, ParseError> {
    let starting_condition = d
        .starting_condition
        .as_deref()
        .map(|c| parse_condition(c).map_err(|e| at(format!("{path}.startingCondition"), e.to_string())))
        .transpose()?;

    let mut nodes = Vec::with_capacity(d.nodes.len());
    let mut ids = HashSet::new();
    let mut has_enter = false;
    for (j, n) in d.nodes.into_iter().enumerate() {
        let node_path = format!("{path}.nodes[{j}]");
        if n.id.is_empty() {
            return Err(at(node_path, "node id must not be empty"));
        }
        if !ids.insert(n.id.clone()) {
            return Err(at(node_path, format!("duplicate node id `{}`", n.id)));
        }
        let node = convert_node(n, &node_path)?;
        if node.kind() == NodeKind::Enter {
            if has_enter {
                return Err(at(node_path, "multiple Enter nodes in one sub-dialogue"));
            }
            has_enter = true;
        }
        nodes.push(node);
    }

    let edges: Vec<Edge> = d
        .edges
        .into_iter()
        .map(|e| Edge {
            from: NodeId(e.from),
            out_key: e.out.unwrap_or_default(),
            to: NodeId(e.to),
        })
        .collect();

    let ood_actions: Vec<(NodeId, NodeId)> = edges
        .iter()
        .filter(|e| {
            nodes.iter().any(|n| {
                n.id == e.to
                    && matches!(&n.payload, NodePayload::Action(a) if !a.is_global && a.situation == Situation::OutOfDomain)
            })
        })
        .map(|e| (e.from.clone(), e.to.clone()))
        .collect();
    for node in &mut nodes {
        if let NodePayload::UserInput(ui) = &mut node.payload {
            ui.local_ood_action = ood_actions
                .iter()
                .find(|(from, _)| from == &node.id)
                .map(|(_, to)| to.clone());
        }
    }

    let init_attributes = d
        .attributes
        .into_iter()
        .map(|a| AttributeDecl {
            name: a.name,
            scope: a.scope,
            default: a.default,
        })
        .collect();

    Ok(SubDialogue {
        name: d.name.unwrap_or_else(|| d.id.clone()),
        id: d.id,
        labels: d.labels.into_iter().collect(),
        entity_tags: d.entity_tags.into_iter().collect(),
        starting_condition,
        nodes,
        edges,
        init_attributes,
    })
}

fn convert_node(n: NodeDoc, path: &str) -> Result<Node, ParseError> {
    let kind = NODE_KINDS
        .into_iter()
        .find(|k| k.keyword() == n.kind)
        .ok_or_else(|| at(format!("{path}.kind"), format!("unknown node kind `{}`", n.kind)))?;

    let present: [(&str, bool); 7] = [
        ("responses", n.responses.is_some()),
        ("nrg", n.nrg.is_some()),
        ("examples", n.examples.is_some()),
        ("assignments", n.assignments.is_some()),
        ("transitions", n.transitions.is_some()),
        ("situation", n.situation.is_some()),
        ("dialogue", n.dialogue.is_some()),
    ];
    let allowed: &[&str] = match kind {
        NodeKind::Speech => &["responses", "nrg"],
        NodeKind::Intent | NodeKind::GlobalIntent => &["examples"],
        NodeKind::Function => &["assignments", "transitions"],
        NodeKind::Action | NodeKind::GlobalAction => &["situation"],
        NodeKind::SubDialogueRef => &["dialogue"],
        NodeKind::Enter | NodeKind::UserInput | NodeKind::Exit => &[],
    };
    if let Some((field, _)) = present.iter().find(|(f, set)| *set && !allowed.contains(f)) {
        return Err(at(
            format!("{path}.{field}"),
            format!("field `{field}` is not allowed on a `{}` node", kind.keyword()),
        ));
    }
    let missing = |field: &str| at(path, format!("`{}` node requires `{field}`", kind.keyword()));

    let payload = match kind {
        NodeKind::Enter => NodePayload::Enter,
        NodeKind::Exit => NodePayload::Exit,
        NodeKind::UserInput => NodePayload::UserInput(UserInputPayload::default()),
        NodeKind::Speech => {
            let responses = n
                .responses
                .ok_or_else(|| missing("responses"))?
                .iter()
                .enumerate()
                .map(|(k, r)| Template::parse(r).map_err(|e| at(format!("{path}.responses[{k}]"), e.to_string())))
                .collect::<Result<_, _>>()?;
            NodePayload::Speech(SpeechPayload {
                responses,
                nrg: n.nrg,
            })
        }
        NodeKind::Intent | NodeKind::GlobalIntent => {
            let examples = n
                .examples
                .ok_or_else(|| missing("examples"))?
                .iter()
                .enumerate()
                .map(|(k, ex)| parse_markup(ex).map_err(|e| at(format!("{path}.examples[{k}]"), e.to_string())))
                .collect::<Result<_, _>>()?;
            NodePayload::Intent(IntentPayload {
                examples,
                is_global: kind == NodeKind::GlobalIntent,
            })
        }
        NodeKind::Function => {
            let assignments = n
                .assignments
                .unwrap_or_default()
                .into_iter()
                .enumerate()
                .map(|(k, a)| {
                    let p = format!("{path}.assignments[{k}]");
                    Ok(Assignment {
                        target: a.target.parse().map_err(|m: String| at(format!("{p}.target"), m))?,
                        expr: parse_condition(&a.expr).map_err(|e| at(format!("{p}.expr"), e.to_string()))?,
                    })
                })
                .collect::<Result<_, ParseError>>()?;
            let transitions = n
                .transitions
                .unwrap_or_default()
                .into_iter()
                .enumerate()
                .map(|(k, t)| {
                    Ok(Transition {
                        guard: parse_condition(&t.guard)
                            .map_err(|e| at(format!("{path}.transitions[{k}].guard"), e.to_string()))?,
                        out_key: t.out,
                    })
                })
                .collect::<Result<_, ParseError>>()?;
            NodePayload::Function(FunctionPayload {
                assignments,
                transitions,
            })
        }
        NodeKind::Action | NodeKind::GlobalAction => NodePayload::Action(ActionPayload {
            situation: n.situation.ok_or_else(|| missing("situation"))?,
            is_global: kind == NodeKind::GlobalAction,
        }),
        NodeKind::SubDialogueRef => NodePayload::SubDialogueRef {
            dialogue: n.dialogue.ok_or_else(|| missing("dialogue"))?,
        },
    };
    Ok(Node {
        id: NodeId(n.id),
        payload,
    })
}

fn node_doc(node: &Node) -> NodeDoc {
    let mut doc = NodeDoc {
        id: node.id.0.clone(),
        kind: node.kind().keyword().to_string(),
        ..NodeDoc::default()
    };
    match &node.payload {
        NodePayload::Enter | NodePayload::Exit | NodePayload::UserInput(_) => {}
        NodePayload::Speech(s) => {
            doc.responses = Some(s.responses.iter().map(|t| t.to_string()).collect());
            doc.nrg = s.nrg;
        }
        NodePayload::Intent(i) => {
            doc.examples = Some(i.examples.iter().map(|e| e.source.clone()).collect());
        }
        NodePayload::Function(f) => {
            doc.assignments = Some(
                f.assignments
                    .iter()
                    .map(|a| AssignmentDoc {
                        target: a.target.to_string(),
                        expr: a.expr.to_string(),
                    })
                    .collect(),
            );
            doc.transitions = Some(
                f.transitions
                    .iter()
                    .map(|t| TransitionDoc {
                        guard: t.guard.to_string(),
                        out: t.out_key.clone(),
                    })
                    .collect(),
            );
        }
        NodePayload::Action(a) => doc.situation = Some(a.situation),
        NodePayload::SubDialogueRef { dialogue } => doc.dialogue = Some(dialogue.clone()),
    }
    doc
}

/// Writes the canonical (pretty-printed) document for a bundle.
pub fn serialize_bundle(bundle: &DialogueBundle) -> String {
    let sorted = |set: &BTreeSet<String>| set.iter().cloned().collect::<Vec<_>>();
    let doc = BundleDoc {
        main: bundle.main_dialogue_id.clone(),
        dialogues: bundle
            .sub_dialogues
            .iter()
            .map(|d| DialogueDoc {
                id: d.id.clone(),
                name: (d.name != d.id).then(|| d.name.clone()),
                labels: sorted(&d.labels),
                entity_tags: sorted(&d.entity_tags),
                starting_condition: d.starting_condition.as_ref().map(|c| c.to_string()),
                attributes: d
                    .init_attributes
                    .iter()
                    .map(|a| AttributeDoc {
                        name: a.name.clone(),
                        scope: a.scope,
                        default: a.default.clone(),
                    })
                    .collect(),
                nodes: d.nodes.iter().map(node_doc).collect(),
                edges: d
                    .edges
                    .iter()
                    .map(|e| EdgeDoc {
                        from: e.from.0.clone(),
                        out: (!e.out_key.is_empty()).then(|| e.out_key.clone()),
                        to: e.to.0.clone(),
                    })
                    .collect(),
            })
            .collect(),
        entities: bundle
            .entity_rules
            .iter()
            .map(|r| EntityDoc {
                type_name: r.type_name.clone(),
                patterns: r.patterns.iter().map(|p| p.source().to_string()).collect(),
                values: r.values.clone(),
                normalizer: r.normalizer,
            })
            .collect(),
        skimmer: bundle
            .skimmer_rules
            .iter()
            .map(|s| SkimmerDoc {
                patterns: s.patterns.iter().map(|p| p.source().to_string()).collect(),
                attribute: s.attribute.to_string(),
                value: match &s.value {
                    SkimValue::Literal(v) => v.to_json(),
                    SkimValue::Group(GroupRef::Index(i)) => json!({ "group": i }),
                    SkimValue::Group(GroupRef::Name(n)) => json!({ "group": n }),
                },
            })
            .collect(),
        selector_pool: bundle.selector_pool.clone(),
        config: ConfigDoc {
            language: bundle.config.language.clone(),
            ood_threshold: bundle.config.ood_threshold,
            seed: bundle.config.seed,
        },
    };
    serde_json::to_string_pretty(&doc).expect("bundle serializes")
}
