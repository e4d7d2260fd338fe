//! Sentence embeddings.
//!
//! The default [`HashedNgramEmbedder`] lowercases the text, splits it on
//! non-alphanumeric characters, and for every token counts the word unigram
//! (hashed as `w|token`) and the character trigrams of the token padded with
//! `<` and `>` (hashed as `c|tri`). Each feature is hashed with 64-bit FNV-1a
//! into one of [`EMBEDDING_DIM`] buckets; the count vector is L2-normalized.

use std::hash::Hasher;

use fnv::FnvHasher;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub const EMBEDDING_DIM: usize = 1024;

/// A unit-norm vector, or the zero vector for text without tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    values: Vec<f64>,
}

impl Embedding {
    pub fn zeros(dim: usize) -> Self {
        Self {
            values: vec![0.0; dim],
        }
    }

    /// Wraps raw values without normalizing them.
    pub fn from_values(values: Vec<f64>) -> Self {
        Self { values }
    }

    /// Scales `values` to unit L2 norm (zero stays zero).
    pub fn normalized(mut values: Vec<f64>) -> Self {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            values.iter_mut().for_each(|v| *v /= norm);
        }
        Self { values }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn nonzeros(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, v)| (i, *v))
    }

    pub fn dot(&self, other: &Embedding) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum()
    }
}

/// Cosine similarity; 0 when either vector is zero.
pub fn cosine(a: &Embedding, b: &Embedding) -> f64 {
    let denom = a.norm() * b.norm();
    if denom == 0.0 {
        0.0
    } else {
        a.dot(b) / denom
    }
}

#[derive(Serialize, Deserialize)]
struct SparseForm {
    dim: usize,
    idx: Vec<usize>,
    val: Vec<f64>,
}

impl Serialize for Embedding {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let (idx, val) = self.nonzeros().unzip();
        SparseForm {
            dim: self.dim(),
            idx,
            val,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Embedding {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let sparse = SparseForm::deserialize(deserializer)?;
        if sparse.idx.len() != sparse.val.len() {
            return Err(serde::de::Error::custom("idx and val lengths differ"));
        }
        let mut values = vec![0.0; sparse.dim];
        for (i, v) in sparse.idx.into_iter().zip(sparse.val) {
            *values
                .get_mut(i)
                .ok_or_else(|| serde::de::Error::custom("index out of range"))? = v;
        }
        Ok(Embedding { values })
    }
}

/// Maps text to a fixed-size vector. Implementations must be deterministic.
pub trait Embedder: Send + Sync {
    /// Identifier stored in trained packs so a pack is never used with a
    /// different embedder.
    fn id(&self) -> String;
    fn embed(&self, text: &str) -> Embedding;
}

#[derive(Debug, Clone, Copy)]
pub struct HashedNgramEmbedder {
    dim: usize,
}

impl Default for HashedNgramEmbedder {
    fn default() -> Self {
        Self { dim: EMBEDDING_DIM }
    }
}

impl HashedNgramEmbedder {
    pub fn with_dim(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self { dim }
    }

    fn bucket(&self, prefix: &[u8], feature: &str) -> usize {
        let mut hasher = FnvHasher::default();
        hasher.write(prefix);
        hasher.write(feature.as_bytes());
        (hasher.finish() % self.dim as u64) as usize
    }
}

/// Lowercased alphanumeric tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

impl Embedder for HashedNgramEmbedder {
    fn id(&self) -> String {
        format!("hashed-ngram-fnv1a/{}", self.dim)
    }

    fn embed(&self, text: &str) -> Embedding {
        let mut counts = vec![0.0; self.dim];
        for token in tokenize(text) {
            counts[self.bucket(b"w|", &token)] += 1.0;
            let padded: Vec<char> = std::iter::once('<')
                .chain(token.chars())
                .chain(std::iter::once('>'))
                .collect();
            for tri in padded.windows(3) {
                let tri: String = tri.iter().collect();
                counts[self.bucket(b"c|", &tri)] += 1.0;
            }
        }
        Embedding::normalized(counts)
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn fnv1a_reference_vectors() {
        // Published FNV-1a 64 test vectors.
        let hash = |s: &str| {
            let mut h = FnvHasher::default();
            h.write(s.as_bytes());
            h.finish()
        };
        assert_eq!(hash(""), 0xcbf29ce484222325);
        assert_eq!(hash("a"), 0xaf63dc4c8601ec8c);
        assert_eq!(hash("foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn unit_norm_and_self_similarity() {
        let e = HashedNgramEmbedder::default();
        let v = e.embed("hello world");
        assert_eq!(v.dim(), EMBEDDING_DIM);
        assert!((v.norm() - 1.0).abs() < 1e-9);
        assert!((cosine(&e.embed("hi"), &e.embed("hi")) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn empty_text_is_zero_vector() {
        let e = HashedNgramEmbedder::default();
        assert!(e.embed("").is_zero());
        assert!(e.embed("?! ...").is_zero());
        assert_eq!(cosine(&e.embed(""), &e.embed("hi")), 0.0);
    }

    #[test]
    fn case_and_punctuation_insensitive() {
        let e = HashedNgramEmbedder::default();
        assert_eq!(e.embed("Hello, World!"), e.embed("hello world"));
        assert_eq!(tokenize("My favorite movie is {movie}"), ["my", "favorite", "movie", "is", "movie"]);
    }

    #[test]
    fn sparse_serialization_round_trips() {
        let e = HashedNgramEmbedder::default();
        let v = e.embed("round trip me");
        let json = serde_json::to_string(&v).unwrap();
        let back: Embedding = serde_json::from_str(&json).unwrap();
        assert_eq!(back, v);
    }

    proptest! {
        #[test]
        fn embedding_invariants(a in ".{0,40}", b in ".{0,40}") {
            let e = HashedNgramEmbedder::default();
            let (va, vb) = (e.embed(&a), e.embed(&b));
            prop_assert_eq!(&va, &e.embed(&a));
            prop_assert!(va.is_zero() || (va.norm() - 1.0).abs() < 1e-9);
            let c = cosine(&va, &vb);
            prop_assert!((-1e-9..=1.0 + 1e-9).contains(&c));
        }
    }
}
