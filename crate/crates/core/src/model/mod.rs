//! Typed dialogue graphs and the bundle that groups them into an application.

mod bundle;
pub mod condition;
mod markup;
mod template;
mod validate;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use bundle::{parse_bundle, serialize_bundle, ParseError};
pub use condition::{eval_condition, eval_predicate, parse_condition, AttributeView, Expr};
pub use markup::{parse_markup, IntentExample, MarkupError, MarkupSpan};
pub use template::{Template, TemplateError, TemplatePart};
pub use validate::{validate_bundle, Diagnostic, Location, Severity};

use crate::nlu::EntityRule;
use crate::skimmer::SkimmerRule;
use crate::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    Turn,
    Session,
    User,
    Community,
}

impl Scope {
    pub const ALL: [Scope; 4] = [Scope::Turn, Scope::Session, Scope::User, Scope::Community];

    pub fn keyword(self) -> &'static str {
        match self {
            Scope::Turn => "turn",
            Scope::Session => "session",
            Scope::User => "user",
            Scope::Community => "community",
        }
    }

    pub fn from_keyword(word: &str) -> Option<Scope> {
        Scope::ALL.into_iter().find(|s| s.keyword() == word)
    }
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

/// `scope.name`
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AttributeRef {
    pub scope: Scope,
    pub name: String,
}

impl AttributeRef {
    pub fn new(scope: Scope, name: impl Into<String>) -> Self {
        Self {
            scope,
            name: name.into(),
        }
    }
}

impl fmt::Display for AttributeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.scope, self.name)
    }
}

impl FromStr for AttributeRef {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (scope, name) = s
            .split_once('.')
            .ok_or_else(|| format!("attribute reference `{s}` must have the form scope.name"))?;
        let scope = Scope::from_keyword(scope).ok_or_else(|| format!("unknown scope `{scope}`"))?;
        let valid = name
            .chars()
            .next()
            .is_some_and(|c| c.is_alphabetic() || c == '_')
            && name.chars().all(|c| c.is_alphanumeric() || c == '_');
        if !valid {
            return Err(format!("invalid attribute name `{name}`"));
        }
        Ok(AttributeRef::new(scope, name))
    }
}

impl Serialize for AttributeRef {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for AttributeRef {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Node identifier, unique within its sub-dialogue.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub String);

impl NodeId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        NodeId(s.to_string())
    }
}

/// A node qualified by its owning sub-dialogue. Displays and serializes as
/// `dialogue/node`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeKey {
    pub dialogue: String,
    pub node: NodeId,
}

impl NodeKey {
    pub fn new(dialogue: impl Into<String>, node: impl Into<NodeId>) -> Self {
        Self {
            dialogue: dialogue.into(),
            node: node.into(),
        }
    }
}

impl From<String> for NodeId {
    fn from(s: String) -> Self {
        NodeId(s)
    }
}

impl fmt::Display for NodeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.dialogue, self.node)
    }
}

impl FromStr for NodeKey {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (dialogue, node) = s
            .split_once('/')
            .ok_or_else(|| format!("node key `{s}` must have the form dialogue/node"))?;
        Ok(NodeKey::new(dialogue, node))
    }
}

impl Serialize for NodeKey {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for NodeKey {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        String::deserialize(deserializer)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Enter,
    Speech,
    UserInput,
    Intent,
    GlobalIntent,
    Function,
    Action,
    GlobalAction,
    SubDialogueRef,
    Exit,
}

impl NodeKind {
    pub fn keyword(self) -> &'static str {
        match self {
            NodeKind::Enter => "enter",
            NodeKind::Speech => "speech",
            NodeKind::UserInput => "userInput",
            NodeKind::Intent => "intent",
            NodeKind::GlobalIntent => "globalIntent",
            NodeKind::Function => "function",
            NodeKind::Action => "action",
            NodeKind::GlobalAction => "globalAction",
            NodeKind::SubDialogueRef => "subDialogue",
            NodeKind::Exit => "exit",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Situation {
    Silence,
    Error,
    OutOfDomain,
}

/// Dialogue act requested from the response generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum DialogueAct {
    Statement,
    Question,
    StatementThenQuestion,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeechPayload {
    pub responses: Vec<Template>,
    /// When set, the rendered response is used as grounding text for a
    /// generated follow-up of this act; the next user turn is answered by a
    /// generated statement before traversal resumes after this node.
    pub nrg: Option<DialogueAct>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct UserInputPayload {
    /// Local out-of-domain action, derived from the node's outgoing edges.
    pub local_ood_action: Option<NodeId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntentPayload {
    pub examples: Vec<IntentExample>,
    pub is_global: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub target: AttributeRef,
    pub expr: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub guard: Expr,
    pub out_key: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionPayload {
    pub assignments: Vec<Assignment>,
    pub transitions: Vec<Transition>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionPayload {
    pub situation: Situation,
    pub is_global: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodePayload {
    Enter,
    Speech(SpeechPayload),
    UserInput(UserInputPayload),
    Intent(IntentPayload),
    Function(FunctionPayload),
    Action(ActionPayload),
    SubDialogueRef { dialogue: String },
    Exit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub payload: NodePayload,
}

impl Node {
    pub fn kind(&self) -> NodeKind {
        match &self.payload {
            NodePayload::Enter => NodeKind::Enter,
            NodePayload::Speech(_) => NodeKind::Speech,
            NodePayload::UserInput(_) => NodeKind::UserInput,
            NodePayload::Intent(p) if p.is_global => NodeKind::GlobalIntent,
            NodePayload::Intent(_) => NodeKind::Intent,
            NodePayload::Function(_) => NodeKind::Function,
            NodePayload::Action(p) if p.is_global => NodeKind::GlobalAction,
            NodePayload::Action(_) => NodeKind::Action,
            NodePayload::SubDialogueRef { .. } => NodeKind::SubDialogueRef,
            NodePayload::Exit => NodeKind::Exit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub from: NodeId,
    pub out_key: String,
    pub to: NodeId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttributeDecl {
    pub name: String,
    pub scope: Scope,
    pub default: Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubDialogue {
    pub id: String,
    pub name: String,
    pub labels: BTreeSet<String>,
    pub entity_tags: BTreeSet<String>,
    pub starting_condition: Option<Expr>,
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    pub init_attributes: Vec<AttributeDecl>,
}

impl SubDialogue {
    pub fn node(&self, id: &NodeId) -> Option<&Node> {
        self.nodes.iter().find(|n| &n.id == id)
    }

    pub fn enter(&self) -> Option<&Node> {
        self.nodes.iter().find(|n| n.kind() == NodeKind::Enter)
    }

    pub fn out_edges<'a>(&'a self, from: &'a NodeId) -> impl Iterator<Item = &'a Edge> + 'a {
        self.edges.iter().filter(move |e| &e.from == from)
    }

    pub fn in_edges<'a>(&'a self, to: &'a NodeId) -> impl Iterator<Item = &'a Edge> + 'a {
        self.edges.iter().filter(move |e| &e.to == to)
    }

    /// Intent nodes connected to the given User Input node, in edge order.
    pub fn local_intents(&self, user_input: &NodeId) -> Vec<&Node> {
        self.out_edges(user_input)
            .filter_map(|e| self.node(&e.to))
            .filter(|n| n.kind() == NodeKind::Intent)
            .collect()
    }

    /// Global intent nodes of this sub-dialogue, in declaration order.
    pub fn global_intents(&self) -> impl Iterator<Item = &Node> {
        self.nodes
            .iter()
            .filter(|n| n.kind() == NodeKind::GlobalIntent)
    }

    pub fn user_inputs(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| n.kind() == NodeKind::UserInput)
    }

    /// Local action of `situation` connected to the given User Input node.
    pub fn local_action(&self, user_input: &NodeId, situation: Situation) -> Option<&Node> {
        self.out_edges(user_input)
            .filter_map(|e| self.node(&e.to))
            .find(|n| {
                matches!(&n.payload, NodePayload::Action(a) if !a.is_global && a.situation == situation)
            })
    }

    pub fn global_action(&self, situation: Situation) -> Option<&Node> {
        self.nodes.iter().find(|n| {
            matches!(&n.payload, NodePayload::Action(a) if a.is_global && a.situation == situation)
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BundleConfig {
    pub language: String,
    pub ood_threshold: f64,
    pub seed: u64,
}

pub const DEFAULT_OOD_THRESHOLD: f64 = 0.55;

impl Default for BundleConfig {
    fn default() -> Self {
        Self {
            language: "en".to_string(),
            ood_threshold: DEFAULT_OOD_THRESHOLD,
            seed: 0,
        }
    }
}

/// A conversational application: sub-dialogue graphs plus entity, skimmer
/// and selector configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct DialogueBundle {
    pub main_dialogue_id: String,
    pub sub_dialogues: Vec<SubDialogue>,
    pub entity_rules: Vec<EntityRule>,
    pub skimmer_rules: Vec<SkimmerRule>,
    pub selector_pool: Vec<String>,
    pub config: BundleConfig,
}

impl DialogueBundle {
    pub fn dialogue(&self, id: &str) -> Option<&SubDialogue> {
        self.sub_dialogues.iter().find(|d| d.id == id)
    }

    pub fn main(&self) -> Option<&SubDialogue> {
        self.dialogue(&self.main_dialogue_id)
    }

    pub fn node(&self, key: &NodeKey) -> Option<&Node> {
        self.dialogue(&key.dialogue)?.node(&key.node)
    }

    /// Declared attributes across all sub-dialogues with their defaults. The
    /// first declaration of a `scope.name` pair wins.
    pub fn attribute_decls(&self) -> BTreeMap<AttributeRef, Value> {
        let mut out = BTreeMap::new();
        for decl in self.sub_dialogues.iter().flat_map(|d| &d.init_attributes) {
            out.entry(AttributeRef::new(decl.scope, decl.name.clone()))
                .or_insert_with(|| decl.default.clone());
        }
        out
    }

    pub fn entity_types(&self) -> BTreeSet<&str> {
        self.entity_rules.iter().map(|r| r.type_name.as_str()).collect()
    }
}
