//! Graph traversal and per-turn processing.

use thiserror::Error;

use super::attributes::{AttributeContext, AttributeError};
use super::selector::{select_dialogue, Selection};
use super::session::{Cursor, Frame, NrgResume, Session};
use super::{Application, Engine, TurnInput};
use crate::model::{eval_condition, eval_predicate, AttributeRef, DialogueAct, NodeId, NodeKey, NodePayload, Situation};
use crate::nlu::{mask_entities, recognize_entities, route_and_classify, RouteScope, RoutingDecision, RoutingError};
use crate::nrg::{HistoryEntry, NrgRequest, Speaker};
use crate::skimmer::skim;
use crate::store::{AttributeChange, NrgUse, ProfileStore, SkimmerWrite, TurnRecord};
use crate::value::Value;

/// Maximum node visits within one launch or turn.
pub const LOOP_GUARD: usize = 200;

#[derive(Debug, Error)]
enum Fault {
    #[error("node {0} not found")]
    MissingNode(NodeKey),
    #[error("no edge `{out}` leaves {node}")]
    MissingEdge { node: NodeKey, out: String },
    #[error("no transition guard holds at {0}")]
    NoTransition(NodeKey),
    #[error("more than {LOOP_GUARD} node visits in one turn")]
    LoopGuard,
    #[error("evaluation failed at {node}: {message}")]
    Eval { node: NodeKey, message: String },
    #[error("attribute write failed at {node}: {source}")]
    Attribute {
        node: NodeKey,
        #[source]
        source: AttributeError,
    },
    #[error("routing failed: {0}")]
    Routing(#[from] RoutingError),
}

pub(crate) struct Outcome {
    pub responses: Vec<String>,
    pub trace: Vec<String>,
}

struct Run<'a> {
    engine: &'a Engine,
    app: &'a Application,
    session: &'a mut Session,
    responses: Vec<String>,
    trace: Vec<String>,
    diff: Vec<AttributeChange>,
    nrg_used: Option<NrgUse>,
    error: Option<String>,
    visits: usize,
}

fn marker(act: DialogueAct) -> &'static str {
    match act {
        DialogueAct::Statement => "nrg:statement",
        DialogueAct::Question => "nrg:question",
        DialogueAct::StatementThenQuestion => "nrg:statement_question",
    }
}

impl<'a> Run<'a> {
    fn new(engine: &'a Engine, app: &'a Application, session: &'a mut Session) -> Self {
        Run {
            engine,
            app,
            session,
            responses: Vec::new(),
            trace: Vec::new(),
            diff: Vec::new(),
            nrg_used: None,
            error: None,
            visits: 0,
        }
    }

    fn set_attribute(&mut self, node: &NodeKey, r: &AttributeRef, value: Value) -> Result<AttributeChange, Fault> {
        let s = &mut *self.session;
        let ctx = AttributeContext {
            decls: &self.app.decls,
            profiles: &*self.engine.store as &dyn ProfileStore,
            user_id: &s.user_id,
            community: &s.community,
        };
        let change = ctx.set(&mut s.attributes, r, value).map_err(|source| Fault::Attribute {
            node: node.clone(),
            source,
        })?;
        self.diff.push(change.clone());
        Ok(change)
    }

    fn with_view<T>(&self, f: impl FnOnce(&dyn crate::model::AttributeView) -> T) -> T {
        let s = &*self.session;
        let ctx = AttributeContext {
            decls: &self.app.decls,
            profiles: &*self.engine.store as &dyn ProfileStore,
            user_id: &s.user_id,
            community: &s.community,
        };
        f(&ctx.view(&s.attributes))
    }

    fn push_frame(&mut self, dialogue: &str, return_to: Option<NodeId>) -> Result<NodeKey, Fault> {
        let d = self
            .app
            .bundle
            .dialogue(dialogue)
            .ok_or_else(|| Fault::MissingNode(NodeKey::new(dialogue, "enter")))?;
        let enter = d
            .enter()
            .ok_or_else(|| Fault::MissingNode(NodeKey::new(dialogue, "enter")))?;
        self.session.discussed_labels.extend(d.labels.iter().cloned());
        self.session.discussed_entities.extend(d.entity_tags.iter().cloned());
        self.session.stack.push(Frame {
            dialogue: dialogue.to_string(),
            return_to,
        });
        Ok(NodeKey::new(dialogue, enter.id.clone()))
    }

    fn unwind_to(&mut self, dialogue: &str) {
        while self.session.stack.last().is_some_and(|f| f.dialogue != dialogue) {
            self.session.stack.pop();
        }
    }

    fn end(&mut self) {
        self.session.cursor = Cursor::Ended;
        self.session.stack.clear();
        self.session.ended_at = Some(self.engine.clock.now());
    }

    fn follow(&self, from: &NodeKey, out: &str) -> Result<NodeKey, Fault> {
        let d = self
            .app
            .bundle
            .dialogue(&from.dialogue)
            .ok_or_else(|| Fault::MissingNode(from.clone()))?;
        d.out_edges(&from.node)
            .find(|e| e.out_key == out)
            .map(|e| NodeKey::new(from.dialogue.clone(), e.to.clone()))
            .ok_or_else(|| Fault::MissingEdge {
                node: from.clone(),
                out: out.to_string(),
            })
    }

    fn generate(&mut self, act: DialogueAct, grounding: Option<String>) {
        let request = NrgRequest {
            history: self.session.history.clone(),
            act,
            grounding,
        };
        let generated = self.engine.nrg.generate(&request);
        self.say(generated.response.text);
        self.trace.push(marker(act).to_string());
        self.nrg_used = Some(NrgUse {
            act,
            fallback: generated.fallback,
        });
    }

    fn say(&mut self, text: String) {
        self.session.history.push(HistoryEntry {
            speaker: Speaker::Bot,
            text: text.clone(),
        });
        self.responses.push(text);
    }

    /// Traverses from `at` until the conversation waits or ends.
    fn run_from(&mut self, mut at: NodeKey) -> Result<(), Fault> {
        loop {
            self.visits += 1;
            if self.visits > LOOP_GUARD {
                return Err(Fault::LoopGuard);
            }
            self.trace.push(at.to_string());
            let app = self.app;
            let node = app.bundle.node(&at).ok_or_else(|| Fault::MissingNode(at.clone()))?;
            at = match &node.payload {
                NodePayload::Enter | NodePayload::Intent(_) | NodePayload::Action(_) => self.follow(&at, "")?,
                NodePayload::Speech(speech) => {
                    let text = match speech.responses.len() {
                        0 => None,
                        1 => Some(&speech.responses[0]),
                        n => {
                            use rand::RngExt;
                            let i = self.session.rng.random_range(0..n);
                            Some(&speech.responses[i])
                        }
                    }
                    .map(|t| self.with_view(|view| t.render(view)));
                    if let Some(text) = &text {
                        self.say(text.clone());
                    }
                    if let Some(act) = speech.nrg {
                        self.generate(act, text);
                        self.session.cursor = Cursor::AwaitingNrg(NrgResume::FollowFrom(at));
                        return Ok(());
                    }
                    self.follow(&at, "")?
                }
                NodePayload::UserInput(_) => {
                    self.session.cursor = Cursor::AwaitingInput(at);
                    return Ok(());
                }
                NodePayload::Function(function) => {
                    for assignment in &function.assignments {
                        let value = self
                            .with_view(|view| eval_condition(&assignment.expr, view))
                            .map_err(|e| Fault::Eval {
                                node: at.clone(),
                                message: e.to_string(),
                            })?;
                        self.set_attribute(&at, &assignment.target, value)?;
                    }
                    let mut chosen = None;
                    for transition in &function.transitions {
                        let holds = self
                            .with_view(|view| eval_predicate(&transition.guard, view))
                            .map_err(|e| Fault::Eval {
                                node: at.clone(),
                                message: e.to_string(),
                            })?;
                        if holds {
                            chosen = Some(transition.out_key.as_str());
                            break;
                        }
                    }
                    let out = chosen.ok_or_else(|| Fault::NoTransition(at.clone()))?;
                    self.follow(&at, out)?
                }
                NodePayload::SubDialogueRef { dialogue } => {
                    let return_to = self.follow(&at, "").ok().map(|k| k.node);
                    self.push_frame(dialogue, return_to)?
                }
                NodePayload::Exit => match self.exit()? {
                    Some(next) => next,
                    None => return Ok(()),
                },
            };
        }
    }

    /// Pops the finished sub-dialogue and decides where to continue.
    fn exit(&mut self) -> Result<Option<NodeKey>, Fault> {
        let finished = self.session.stack.pop();
        let Some(top) = self.session.stack.last() else {
            self.end();
            return Ok(None);
        };
        if let Some(node) = finished.and_then(|f| f.return_to) {
            return Ok(Some(NodeKey::new(top.dialogue.clone(), node)));
        }
        let selection = self.with_view(|view| {
            select_dialogue(
                &self.app.bundle.selector_pool,
                &self.app.bundle,
                &self.session.discussed_labels,
                &self.session.discussed_entities,
                view,
            )
        });
        match selection {
            Selection::Selected(d) => self.push_frame(&d, None).map(Some),
            Selection::NoneEligible => {
                self.end();
                Ok(None)
            }
        }
    }

    /// Finds the action handling `situation`: the local one attached to
    /// `origin` first, then the nearest global one up the stack. Unwinds the
    /// stack to the action's dialogue.
    fn find_action(&mut self, situation: Situation, origin: Option<&NodeKey>) -> Option<NodeKey> {
        let bundle = &self.app.bundle;
        if let Some(origin) = origin {
            let on_stack = self.session.stack.iter().any(|f| f.dialogue == origin.dialogue);
            let local = bundle
                .dialogue(&origin.dialogue)
                .and_then(|d| d.local_action(&origin.node, situation));
            if let (true, Some(action)) = (on_stack, local) {
                self.unwind_to(&origin.dialogue);
                return Some(NodeKey::new(origin.dialogue.clone(), action.id.clone()));
            }
        }
        for dialogue in self.session.global_scope() {
            if let Some(action) = bundle.dialogue(&dialogue).and_then(|d| d.global_action(situation)) {
                self.unwind_to(&dialogue);
                return Some(NodeKey::new(dialogue, action.id.clone()));
            }
        }
        None
    }

    /// Routes a fault to an error action, or ends the session.
    fn recover(&mut self, fault: Fault, origin: Option<&NodeKey>) {
        let message = fault.to_string();
        tracing::warn!(session = %self.session.id, %message, "turn fault");
        self.error = Some(message.clone());
        match self.find_action(Situation::Error, origin) {
            Some(action) => {
                self.visits = 0;
                if let Err(second) = self.run_from(action) {
                    let message = second.to_string();
                    self.error = Some(message.clone());
                    self.session.error = Some(message);
                    self.end();
                }
            }
            None => {
                self.session.error = Some(message);
                self.end();
            }
        }
    }

    fn settle(&mut self, result: Result<(), Fault>, origin: Option<&NodeKey>) {
        if let Err(fault) = result {
            self.recover(fault, origin);
        }
    }

    fn skim(&mut self, raw: &str) -> Vec<SkimmerWrite> {
        let mut writes = Vec::new();
        for (attribute, value) in skim(raw, &self.app.bundle.skimmer_rules) {
            let node = NodeKey::new("", "skimmer");
            match self.set_attribute(&node, &attribute, value.clone()) {
                Ok(_) => writes.push(SkimmerWrite { attribute, value }),
                Err(fault) => {
                    tracing::warn!(%fault, "skimmer write rejected");
                    self.error = Some(fault.to_string());
                }
            }
        }
        writes
    }
}

/// Runs the main dialogue from its Enter node.
pub(crate) fn launch(engine: &Engine, app: &Application, session: &mut Session) -> Outcome {
    let mut run = Run::new(engine, app, session);
    let main = app.bundle.main_dialogue_id.clone();
    let result = run.push_frame(&main, None).and_then(|enter| run.run_from(enter));
    run.settle(result, None);
    Outcome {
        responses: run.responses,
        trace: run.trace,
    }
}

/// Processes one user utterance and returns its record.
pub(crate) fn turn(engine: &Engine, app: &Application, session: &mut Session, input: TurnInput) -> TurnRecord {
    let started = engine.clock.now();
    let received_at = input.received_at.unwrap_or(started);
    let raw = input.utterance;
    session.attributes.reset_turn();
    if !raw.trim().is_empty() {
        session.history.push(HistoryEntry {
            speaker: Speaker::User,
            text: raw.clone(),
        });
    }
    let turn_index = session.next_turn;
    session.next_turn += 1;

    let mut run = Run::new(engine, app, session);
    let mut entities = Vec::new();
    let mut masked = raw.clone();
    let mut routing: Option<RoutingDecision> = None;
    let mut skimmer_writes = Vec::new();

    match run.session.cursor.clone() {
        Cursor::Ended => {}
        Cursor::AwaitingNrg(resume) => {
            entities = recognize_entities(&raw, &app.bundle.entity_rules);
            run.session
                .discussed_entities
                .extend(entities.iter().map(|e| e.type_name.clone()));
            skimmer_writes = run.skim(&raw);
            run.generate(DialogueAct::Statement, None);
            match resume {
                NrgResume::AwaitAt(ui) => {
                    run.trace.push(ui.to_string());
                    run.session.cursor = Cursor::AwaitingInput(ui);
                }
                NrgResume::FollowFrom(speech) => {
                    let result = run.follow(&speech, "").and_then(|next| run.run_from(next));
                    run.settle(result, None);
                }
            }
        }
        Cursor::AwaitingInput(ui) if raw.trim().is_empty() => {
            if let Some(action) = run.find_action(Situation::Silence, Some(&ui)) {
                let result = run.run_from(action);
                run.settle(result, Some(&ui));
            }
        }
        Cursor::AwaitingInput(ui) => {
            entities = recognize_entities(&raw, &app.bundle.entity_rules);
            run.session
                .discussed_entities
                .extend(entities.iter().map(|e| e.type_name.clone()));
            skimmer_writes = run.skim(&raw);
            let scope = run.session.global_scope();
            let allowed = app.pack.allowed_entity_types(&ui, &scope);
            masked = mask_entities(&raw, &entities, &allowed);
            match route_and_classify(&masked, &ui, &scope, &app.pack, app.embedder.as_ref()) {
                Err(e) => run.recover(e.into(), Some(&ui)),
                Ok(decision) => {
                    let target = match (&decision.scope, &decision.chosen_intent) {
                        (RouteScope::Local | RouteScope::Global, Some(intent)) => Some(intent.clone()),
                        _ => None,
                    };
                    routing = Some(decision);
                    match target {
                        Some(intent) => {
                            run.unwind_to(&intent.dialogue);
                            let result = run.run_from(intent);
                            run.settle(result, Some(&ui));
                        }
                        None => match run.find_action(Situation::OutOfDomain, Some(&ui)) {
                            Some(action) => {
                                let result = run.run_from(action);
                                run.settle(result, Some(&ui));
                            }
                            None => {
                                run.generate(DialogueAct::StatementThenQuestion, None);
                                run.session.cursor = Cursor::AwaitingNrg(NrgResume::AwaitAt(ui));
                            }
                        },
                    }
                }
            }
        }
    }

    let duration_ms = (engine.clock.now() - started).num_milliseconds().max(0) as u64;
    TurnRecord {
        session_id: run.session.id.clone(),
        turn_index,
        raw_utterance: raw,
        entities,
        masked_utterance: masked,
        routing,
        skimmer_writes,
        traversed_nodes: run.trace,
        responses: run.responses,
        attribute_diff: run.diff,
        nrg_used: run.nrg_used,
        duration_ms,
        error: run.error,
        received_at,
        ended: run.session.is_ended(),
        asr_hypotheses: Vec::new(),
    }
}
