//! Natural language understanding: entity recognition and masking, sentence
//! embeddings, per-context intent classifiers and scope routing.

mod classifier;
mod embed;
mod entities;
mod mask;
mod pack;
mod routing;

pub use classifier::{softmax, IntentClassifier, TrainParams};
pub use embed::{cosine, tokenize, Embedder, Embedding, HashedNgramEmbedder, EMBEDDING_DIM};
pub use entities::{builtin_patterns, recognize_entities, EntityRule, EntitySpan, Normalizer};
pub use mask::{mask_entities, mask_entities_tracked, replace_spans};
pub use pack::{bundle_digest, train_pack, BankEntry, ContextModel, TrainError, TrainedNluPack, PACK_FORMAT};
pub use routing::{route_and_classify, route_embedding, RouteScope, RoutingDecision, RoutingError};
