//! Response generation boundary.
//!
//! The engine asks a [`ResponseGenerator`] for a statement, a question or
//! both, given the conversation so far and optional grounding text. The
//! [`StubGenerator`] answers from fixed templates; [`HttpGenerator`] calls an
//! external service and falls back to the stub on any failure.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::model::DialogueAct;
use crate::nlu::tokenize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    User,
    Bot,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub speaker: Speaker,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NrgRequest {
    pub history: Vec<HistoryEntry>,
    pub act: DialogueAct,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grounding: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NrgResponse {
    pub text: String,
    pub act: DialogueAct,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub response: NrgResponse,
    /// The configured backend failed and the stub answered.
    pub fallback: bool,
}

pub trait ResponseGenerator: Send + Sync {
    fn generate(&self, request: &NrgRequest) -> Generated;
}

const STOPWORDS: &[&str] = &[
    "about", "again", "all", "and", "any", "are", "been", "but", "can", "could", "did", "does", "feel", "for",
    "from", "get", "got", "had", "has", "have", "her", "him", "his", "how", "its", "just", "know", "like", "maybe",
    "more", "much", "nope", "not", "now", "okay", "our", "out", "please", "really", "said", "she", "should", "some",
    "sure", "than", "thank", "thanks", "that", "the", "their", "them", "then", "there", "these", "they", "think",
    "this", "too", "very", "want", "was", "well", "were", "what", "when", "where", "which", "who", "why", "will",
    "with", "would", "yeah", "yes", "you", "your",
];

/// Last token of at least three characters that is not a stopword.
pub fn content_word(text: &str) -> Option<String> {
    tokenize(text)
        .into_iter()
        .rev()
        .find(|t| t.chars().count() >= 3 && !STOPWORDS.contains(&t.as_str()))
}

/// Deterministic template generator. The topic word comes from the
/// grounding text when there is one, otherwise from the last user utterance.
#[derive(Debug, Clone, Copy, Default)]
pub struct StubGenerator;

impl StubGenerator {
    pub fn respond(request: &NrgRequest) -> NrgResponse {
        let last_user = request
            .history
            .iter()
            .rev()
            .find(|h| h.speaker == Speaker::User)
            .map(|h| h.text.as_str());
        let topic = request
            .grounding
            .as_deref()
            .and_then(content_word)
            .or_else(|| last_user.and_then(content_word))
            .unwrap_or_else(|| "that".to_string());
        let text = match request.act {
            DialogueAct::Statement => format!("Interesting, tell me more about {topic}."),
            DialogueAct::Question => format!("What do you think about {topic}?"),
            DialogueAct::StatementThenQuestion => {
                format!("Interesting, tell me more about {topic}. What do you like most about it?")
            }
        };
        NrgResponse {
            text,
            act: request.act,
        }
    }
}

impl ResponseGenerator for StubGenerator {
    fn generate(&self, request: &NrgRequest) -> Generated {
        Generated {
            response: StubGenerator::respond(request),
            fallback: false,
        }
    }
}

pub const DEFAULT_TIMEOUT: Duration = Duration::from_millis(2000);

/// Client for an external `POST /generate` service.
pub struct HttpGenerator {
    url: String,
    agent: ureq::Agent,
}

impl HttpGenerator {
    /// `base_url` is the service root, e.g. `http://localhost:8500`.
    pub fn new(base_url: &str, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        HttpGenerator {
            url: format!("{}/generate", base_url.trim_end_matches('/')),
            agent,
        }
    }

    fn call(&self, request: &NrgRequest) -> Result<NrgResponse, ureq::Error> {
        self.agent
            .post(&self.url)
            .send_json(request)?
            .body_mut()
            .read_json::<NrgResponse>()
    }
}

impl ResponseGenerator for HttpGenerator {
    fn generate(&self, request: &NrgRequest) -> Generated {
        match self.call(request) {
            Ok(response) if !response.text.trim().is_empty() => Generated {
                response,
                fallback: false,
            },
            Ok(_) => {
                tracing::warn!(url = %self.url, "response generator returned empty text, using stub");
                Generated {
                    response: StubGenerator::respond(request),
                    fallback: true,
                }
            }
            Err(err) => {
                tracing::warn!(url = %self.url, %err, "response generator failed, using stub");
                Generated {
                    response: StubGenerator::respond(request),
                    fallback: true,
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn request(text: &str, act: DialogueAct) -> NrgRequest {
        NrgRequest {
            history: vec![HistoryEntry {
                speaker: Speaker::User,
                text: text.into(),
            }],
            act,
            grounding: None,
        }
    }

    #[test]
    fn stub_statement() {
        let r = StubGenerator.generate(&request("I like cats", DialogueAct::Statement));
        assert_eq!(r.response.text, "Interesting, tell me more about cats.");
        assert!(!r.fallback);
    }

    #[test]
    fn stub_statement_then_question_has_one_terminal_question() {
        let r = StubGenerator.generate(&request("I like cats", DialogueAct::StatementThenQuestion));
        let text = r.response.text;
        assert_eq!(text.matches('?').count(), 1);
        assert!(text.ends_with('?'));
    }

    #[test]
    fn stub_prefers_grounding() {
        let req = NrgRequest {
            history: vec![HistoryEntry {
                speaker: Speaker::User,
                text: "tell me about cats".into(),
            }],
            act: DialogueAct::Question,
            grounding: Some("The Matrix premiered in 1999.".into()),
        };
        assert_eq!(StubGenerator::respond(&req).text, "What do you think about 1999?");
    }

    #[test]
    fn unreachable_backend_falls_back() {
        let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        let port = listener.local_addr().unwrap().port();
        drop(listener);
        let g = HttpGenerator::new(&format!("http://127.0.0.1:{port}"), Duration::from_millis(300));
        let r = g.generate(&request("I like cats", DialogueAct::Statement));
        assert!(r.fallback);
        assert_eq!(r.response.text, "Interesting, tell me more about cats.");
    }
}
