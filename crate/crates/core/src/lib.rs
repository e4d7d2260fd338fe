//! Runtime for graph-structured conversational applications.

pub mod engine;
pub mod model;
pub mod nlu;
pub mod nrg;
pub mod pattern;
pub mod service;
pub mod skimmer;
pub mod store;
pub mod value;
