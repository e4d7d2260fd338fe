//! Conversation execution.
//!
//! An [`Engine`] starts sessions of an [`Application`] and processes user
//! turns: entity recognition, skimming, masking, scope routing, action
//! fallbacks, and graph traversal across the sub-dialogue stack. Every turn
//! is persisted to the configured [`SessionStore`].

mod app;
mod attributes;
mod runtime;
mod selector;
mod session;

use std::sync::Arc;

use chrono::{DateTime, Utc};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use app::{AppError, Application};
pub use attributes::{AttributeContext, AttributeError, AttributeReader, LocalAttributes};
pub use runtime::LOOP_GUARD;
pub use selector::{select_dialogue, selector_score, Selection};
pub use session::{Cursor, Frame, NrgResume, Session};

use crate::nrg::{ResponseGenerator, StubGenerator};
use crate::store::{MemoryStore, Opening, SessionStore, StoreError, TurnRecord};

pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// Always reports the same instant.
#[derive(Debug, Clone, Copy)]
pub struct FixedClock(pub DateTime<Utc>);

impl Clock for FixedClock {
    fn now(&self) -> DateTime<Utc> {
        self.0
    }
}

#[derive(Debug, Clone, Default)]
pub struct SessionOptions {
    pub user_id: String,
    pub community: String,
    pub client_tag: String,
    /// Falls back to the bundle's configured seed.
    pub seed: Option<u64>,
    /// Generated when absent.
    pub session_id: Option<String>,
}

#[derive(Debug, Clone, Default)]
pub struct TurnInput {
    /// An empty (or blank) utterance is silence.
    pub utterance: String,
    pub received_at: Option<DateTime<Utc>>,
}

impl TurnInput {
    pub fn text(utterance: impl Into<String>) -> Self {
        TurnInput {
            utterance: utterance.into(),
            received_at: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StartResult {
    pub responses: Vec<String>,
    pub ended: bool,
    pub traversed_nodes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TurnResult {
    pub responses: Vec<String>,
    pub ended: bool,
    pub record: TurnRecord,
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("session has ended")]
    SessionEnded,
    #[error("session belongs to application `{0}`")]
    WrongApplication(String),
    #[error("storage failed: {0}")]
    Store(#[from] StoreError),
}

pub struct Engine {
    store: Arc<dyn SessionStore>,
    nrg: Arc<dyn ResponseGenerator>,
    clock: Arc<dyn Clock>,
}

impl Default for Engine {
    fn default() -> Self {
        Engine::new(Arc::new(MemoryStore::new()))
    }
}

impl Engine {
    /// An engine with the stub response generator and the system clock.
    pub fn new(store: Arc<dyn SessionStore>) -> Self {
        Engine {
            store,
            nrg: Arc::new(StubGenerator),
            clock: Arc::new(SystemClock),
        }
    }

    pub fn with_generator(mut self, nrg: Arc<dyn ResponseGenerator>) -> Self {
        self.nrg = nrg;
        self
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn store(&self) -> &Arc<dyn SessionStore> {
        &self.store
    }

    /// Creates a session and runs the main dialogue until it first waits for
    /// input or ends.
    pub fn start_session(&self, app: &Application, options: SessionOptions) -> Result<(Session, StartResult), EngineError> {
        let seed = options.seed.unwrap_or(app.bundle.config.seed);
        let mut session = Session {
            id: options
                .session_id
                .unwrap_or_else(|| uuid::Uuid::new_v4().simple().to_string()),
            app_id: app.id.clone(),
            user_id: options.user_id,
            community: options.community,
            client_tag: options.client_tag,
            seed,
            started_at: self.clock.now(),
            ended_at: None,
            error: None,
            opening: Opening::default(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            stack: Vec::new(),
            cursor: Cursor::Ended,
            attributes: LocalAttributes::default(),
            discussed_labels: Default::default(),
            discussed_entities: Default::default(),
            history: Vec::new(),
            next_turn: 0,
        };
        let outcome = runtime::launch(self, app, &mut session);
        session.opening = Opening {
            responses: outcome.responses.clone(),
            traversed_nodes: outcome.trace.clone(),
        };
        self.store.create_session(session.record())?;
        let result = StartResult {
            responses: outcome.responses,
            ended: session.is_ended(),
            traversed_nodes: outcome.trace,
        };
        Ok((session, result))
    }

    /// Closes a session that is still open, e.g. when the client goes away.
    pub fn end_session(&self, session: &mut Session) -> Result<(), EngineError> {
        if session.is_ended() {
            return Ok(());
        }
        session.cursor = Cursor::Ended;
        session.stack.clear();
        session.ended_at = Some(self.clock.now());
        self.store.update_session(session.record())?;
        Ok(())
    }

    /// Processes one user turn and persists its record.
    pub fn process_turn(&self, app: &Application, session: &mut Session, input: TurnInput) -> Result<TurnResult, EngineError> {
        if session.app_id != app.id {
            return Err(EngineError::WrongApplication(session.app_id.clone()));
        }
        if session.is_ended() {
            return Err(EngineError::SessionEnded);
        }
        let record = runtime::turn(self, app, session, input);
        self.store.append_turn(record.clone())?;
        if session.is_ended() {
            self.store.update_session(session.record())?;
        }
        Ok(TurnResult {
            responses: record.responses.clone(),
            ended: record.ended,
            record,
        })
    }
}
