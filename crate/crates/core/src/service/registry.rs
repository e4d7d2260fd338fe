//! Loaded applications, keyed by id.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use thiserror::Error;

use crate::engine::{AppError, Application};
use crate::model::parse_bundle;
use crate::nlu::{HashedNgramEmbedder, TrainError, TrainedNluPack};

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    App {
        path: PathBuf,
        #[source]
        source: AppError,
    },
    #[error("{path}: {source}")]
    Pack {
        path: PathBuf,
        #[source]
        source: TrainError,
    },
}

/// Servable applications. Replacing an application swaps it atomically;
/// sessions already running keep the version they started with.
#[derive(Default)]
pub struct AppRegistry {
    apps: RwLock<HashMap<String, Arc<Application>>>,
}

impl AppRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, id: &str) -> Option<Arc<Application>> {
        self.apps.read().unwrap_or_else(|e| e.into_inner()).get(id).cloned()
    }

    pub fn ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self
            .apps
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .keys()
            .cloned()
            .collect();
        ids.sort();
        ids
    }

    pub fn insert(&self, app: Application) -> Arc<Application> {
        let app = Arc::new(app);
        self.apps
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .insert(app.id.clone(), app.clone());
        app
    }

    /// Parses, validates, trains and registers a bundle document.
    pub fn load_text(&self, id: &str, text: &str) -> Result<Arc<Application>, AppError> {
        Ok(self.insert(Application::from_text(id, text)?))
    }

    /// Loads every `*.json` bundle in `dir`, using the file stem as id. A
    /// sibling `<stem>.pack.json` is used instead of training when present.
    pub fn load_dir(&self, dir: &Path) -> Result<Vec<String>, RegistryError> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| RegistryError::Io { path, source }
        };
        let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(io(dir))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| {
                let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
                name.ends_with(".json") && !name.ends_with(".pack.json")
            })
            .collect();
        paths.sort();
        let mut loaded = Vec::new();
        for path in paths {
            let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
            let text = std::fs::read_to_string(&path).map_err(io(&path))?;
            let app_err = |source| RegistryError::App {
                path: path.clone(),
                source,
            };
            let pack_path = path.with_extension("pack.json");
            let app = if pack_path.exists() {
                let pack_text = std::fs::read_to_string(&pack_path).map_err(io(&pack_path))?;
                let pack = TrainedNluPack::from_json(&pack_text).map_err(|source| RegistryError::Pack {
                    path: pack_path.clone(),
                    source,
                })?;
                let bundle = parse_bundle(&text).map_err(|e| app_err(e.into()))?;
                Application::with_pack(&id, bundle, pack, Arc::new(HashedNgramEmbedder::default())).map_err(app_err)?
            } else {
                Application::from_text(&id, &text).map_err(app_err)?
            };
            tracing::info!(app = %id, path = %path.display(), "application loaded");
            self.insert(app);
            loaded.push(id);
        }
        Ok(loaded)
    }
}
