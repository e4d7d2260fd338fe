//! Entry points: the application registry, the HTTP API, scripted
//! simulation and the command line.

pub mod cli;
pub mod http;
mod registry;
mod script;

pub use registry::{AppRegistry, RegistryError};
pub use script::{run_script, Mismatch, Script, ScriptError, Step};
