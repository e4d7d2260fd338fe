//! A validated bundle together with its trained models.

use std::collections::BTreeMap;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use thiserror::Error;

use crate::model::{parse_bundle, validate_bundle, AttributeRef, Diagnostic, DialogueBundle, ParseError, Severity};
use crate::nlu::{bundle_digest, train_pack, Embedder, HashedNgramEmbedder, TrainError, TrainParams, TrainedNluPack};
use crate::value::Value;

#[derive(Debug, Error)]
pub enum AppError {
    #[error("bundle does not parse: {0}")]
    Parse(#[from] ParseError),
    #[error("bundle is invalid ({} problems, first: {})", .0.len(), .0.first().map(|d| d.to_string()).unwrap_or_default())]
    Invalid(Vec<Diagnostic>),
    #[error("training failed: {0}")]
    Train(#[from] TrainError),
    #[error("pack does not belong to this bundle: {0}")]
    PackMismatch(String),
}

pub struct Application {
    pub id: String,
    pub bundle: DialogueBundle,
    pub pack: TrainedNluPack,
    pub embedder: Arc<dyn Embedder>,
    pub loaded_at: DateTime<Utc>,
    pub(crate) decls: BTreeMap<AttributeRef, Value>,
}

impl std::fmt::Debug for Application {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Application")
            .field("id", &self.id)
            .field("embedder", &self.embedder.id())
            .field("loaded_at", &self.loaded_at)
            .finish_non_exhaustive()
    }
}

fn check(bundle: &DialogueBundle) -> Result<(), AppError> {
    let errors: Vec<Diagnostic> = validate_bundle(bundle)
        .into_iter()
        .filter(|d| d.severity == Severity::Error)
        .collect();
    if errors.is_empty() {
        Ok(())
    } else {
        Err(AppError::Invalid(errors))
    }
}

impl Application {
    /// Validates and trains `bundle` with the default embedder.
    pub fn build(id: impl Into<String>, bundle: DialogueBundle) -> Result<Application, AppError> {
        Self::build_with(id, bundle, Arc::new(HashedNgramEmbedder::default()))
    }

    pub fn build_with(
        id: impl Into<String>,
        bundle: DialogueBundle,
        embedder: Arc<dyn Embedder>,
    ) -> Result<Application, AppError> {
        check(&bundle)?;
        let pack = train_pack(&bundle, embedder.as_ref(), TrainParams::default())?;
        Ok(Self::assemble(id.into(), bundle, pack, embedder))
    }

    /// Parses, validates and trains a bundle document.
    pub fn from_text(id: impl Into<String>, text: &str) -> Result<Application, AppError> {
        Self::build(id, parse_bundle(text)?)
    }

    /// Uses a previously trained pack instead of training.
    pub fn with_pack(
        id: impl Into<String>,
        bundle: DialogueBundle,
        pack: TrainedNluPack,
        embedder: Arc<dyn Embedder>,
    ) -> Result<Application, AppError> {
        check(&bundle)?;
        if pack.bundle_digest != bundle_digest(&bundle) {
            return Err(AppError::PackMismatch("bundle digest differs".into()));
        }
        if pack.embedder != embedder.id() {
            return Err(AppError::PackMismatch(format!(
                "pack embedder {} differs from {}",
                pack.embedder,
                embedder.id()
            )));
        }
        Ok(Self::assemble(id.into(), bundle, pack, embedder))
    }

    fn assemble(id: String, bundle: DialogueBundle, pack: TrainedNluPack, embedder: Arc<dyn Embedder>) -> Application {
        Application {
            id,
            decls: bundle.attribute_decls(),
            bundle,
            pack,
            embedder,
            loaded_at: Utc::now(),
        }
    }
}
