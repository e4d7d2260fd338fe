//! Scripted conversations with expected responses.
//!
//! ```json
//! {
//!   "seed": 7,
//!   "steps": [
//!     {"start": "a", "user": "ann", "expect": ["Hi, how are you?"]},
//!     {"session": "a", "say": "fine", "expect": ["Glad to hear that!"]},
//!     {"session": "a", "say": "stop", "ended": true}
//!   ]
//! }
//! ```
//!
//! `expect` and `ended` are optional; steps without them only record.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;

use serde::Deserialize;
use thiserror::Error;

use crate::engine::{Application, Engine, EngineError, Session, SessionOptions, TurnInput};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Script {
    /// Default seed for sessions that do not set one.
    #[serde(default)]
    pub seed: Option<u64>,
    pub steps: Vec<Step>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Step {
    Start {
        start: String,
        #[serde(default)]
        user: Option<String>,
        #[serde(default)]
        community: Option<String>,
        #[serde(default)]
        client: Option<String>,
        #[serde(default)]
        seed: Option<u64>,
        #[serde(default)]
        expect: Option<Vec<String>>,
    },
    Say {
        session: String,
        say: String,
        #[serde(default)]
        expect: Option<Vec<String>>,
        #[serde(default)]
        ended: Option<bool>,
    },
}

#[derive(Debug, Error)]
pub enum ScriptError {
    #[error("script is not valid: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("step {step}: no session named `{alias}`")]
    UnknownSession { step: usize, alias: String },
    #[error("step {step}: session `{alias}` has already ended")]
    SessionEnded { step: usize, alias: String },
    #[error("step {step}: {source}")]
    Engine {
        step: usize,
        #[source]
        source: EngineError,
    },
    #[error("cannot write transcript: {0}")]
    Io(#[from] std::io::Error),
}

/// A step whose outcome differs from the script.
#[derive(Debug, Clone, PartialEq)]
pub struct Mismatch {
    /// 1-based step number.
    pub step: usize,
    pub expected: Vec<String>,
    pub actual: Vec<String>,
}

impl fmt::Display for Mismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "step {}:", self.step)?;
        for line in &self.expected {
            writeln!(f, "- {line}")?;
        }
        for line in &self.actual {
            writeln!(f, "+ {line}")?;
        }
        Ok(())
    }
}

impl Script {
    pub fn parse(text: &str) -> Result<Script, ScriptError> {
        Ok(serde_json::from_str(text)?)
    }
}

fn check(step: usize, expect: &Option<Vec<String>>, actual: &[String], failures: &mut Vec<Mismatch>) {
    if let Some(expected) = expect {
        if expected != actual {
            failures.push(Mismatch {
                step,
                expected: expected.clone(),
                actual: actual.to_vec(),
            });
        }
    }
}

/// Plays `script`, writing the transcript to `out`, and returns the steps
/// that did not match.
pub fn run_script(
    app: &Application,
    engine: &Engine,
    script: &Script,
    out: &mut dyn Write,
) -> Result<Vec<Mismatch>, ScriptError> {
    let mut sessions: HashMap<String, Session> = HashMap::new();
    let mut failures = Vec::new();
    for (i, step) in script.steps.iter().enumerate() {
        let n = i + 1;
        match step {
            Step::Start {
                start,
                user,
                community,
                client,
                seed,
                expect,
            } => {
                let options = SessionOptions {
                    user_id: user.clone().unwrap_or_else(|| "anonymous".into()),
                    community: community.clone().unwrap_or_else(|| "default".into()),
                    client_tag: client.clone().unwrap_or_else(|| "script".into()),
                    seed: seed.or(script.seed),
                    session_id: None,
                };
                let (session, result) = engine
                    .start_session(app, options)
                    .map_err(|source| ScriptError::Engine { step: n, source })?;
                for line in &result.responses {
                    writeln!(out, "[{start}] bot: {line}")?;
                }
                check(n, expect, &result.responses, &mut failures);
                sessions.insert(start.clone(), session);
            }
            Step::Say {
                session,
                say,
                expect,
                ended,
            } => {
                let live = sessions.get_mut(session).ok_or_else(|| ScriptError::UnknownSession {
                    step: n,
                    alias: session.clone(),
                })?;
                if live.is_ended() {
                    return Err(ScriptError::SessionEnded {
                        step: n,
                        alias: session.clone(),
                    });
                }
                writeln!(out, "[{session}] user: {say}")?;
                let result = engine
                    .process_turn(app, live, TurnInput::text(say.clone()))
                    .map_err(|source| ScriptError::Engine { step: n, source })?;
                for line in &result.responses {
                    writeln!(out, "[{session}] bot: {line}")?;
                }
                check(n, expect, &result.responses, &mut failures);
                if let Some(want) = ended {
                    if *want != result.ended {
                        failures.push(Mismatch {
                            step: n,
                            expected: vec![format!("ended: {want}")],
                            actual: vec![format!("ended: {}", result.ended)],
                        });
                    }
                }
            }
        }
    }
    Ok(failures)
}
