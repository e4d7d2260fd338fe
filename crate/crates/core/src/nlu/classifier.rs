//! Multinomial logistic regression over sentence embeddings.

use serde::{Deserialize, Serialize};

use super::embed::Embedding;
use crate::model::NodeKey;

/// Full-batch gradient descent settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainParams {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            learning_rate: 0.5,
            epochs: 300,
            l2: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentClassifier {
    pub class_ids: Vec<NodeKey>,
    /// One row of `dim` weights per class.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

impl IntentClassifier {
    /// Trains on `(class index, embedding)` pairs. Weights and bias start at
    /// zero and every epoch visits the examples in the given order, so the
    /// result is bit-for-bit reproducible. A single class yields a constant
    /// classifier.
    pub fn train(
        class_ids: Vec<NodeKey>,
        examples: &[(usize, &Embedding)],
        dim: usize,
        params: TrainParams,
    ) -> IntentClassifier {
        let classes = class_ids.len();
        let mut weights = vec![vec![0.0; dim]; classes];
        let mut bias = vec![0.0; classes];
        if classes < 2 || examples.is_empty() {
            return IntentClassifier {
                class_ids,
                weights,
                bias,
            };
        }
        let sparse: Vec<(usize, Vec<(usize, f64)>)> = examples
            .iter()
            .map(|(class, e)| (*class, e.nonzeros().collect()))
            .collect();
        let n = sparse.len() as f64;
        let mut grad_w = vec![vec![0.0; dim]; classes];
        let mut grad_b = vec![0.0; classes];
        for _ in 0..params.epochs {
            grad_w.iter_mut().for_each(|row| row.iter_mut().for_each(|g| *g = 0.0));
            grad_b.iter_mut().for_each(|g| *g = 0.0);
            for (class, features) in &sparse {
                let logits: Vec<f64> = (0..classes)
                    .map(|k| bias[k] + features.iter().map(|&(i, v)| weights[k][i] * v).sum::<f64>())
                    .collect();
                let probs = softmax(&logits);
                for k in 0..classes {
                    let err = probs[k] - if k == *class { 1.0 } else { 0.0 };
                    grad_b[k] += err;
                    for &(i, v) in features {
                        grad_w[k][i] += err * v;
                    }
                }
            }
            for k in 0..classes {
                for i in 0..dim {
                    let g = grad_w[k][i] / n + params.l2 * weights[k][i];
                    weights[k][i] -= params.learning_rate * g;
                }
                bias[k] -= params.learning_rate * grad_b[k] / n;
            }
        }
        IntentClassifier {
            class_ids,
            weights,
            bias,
        }
    }

    pub fn probabilities(&self, x: &Embedding) -> Vec<f64> {
        let logits: Vec<f64> = self
            .weights
            .iter()
            .zip(&self.bias)
            .map(|(row, b)| b + x.nonzeros().map(|(i, v)| row.get(i).copied().unwrap_or(0.0) * v).sum::<f64>())
            .collect();
        softmax(&logits)
    }

    /// Most probable class and its probability. Ties go to the earlier class.
    pub fn predict(&self, x: &Embedding) -> Option<(&NodeKey, f64)> {
        let probs = self.probabilities(x);
        let mut best: Option<(usize, f64)> = None;
        for (k, p) in probs.into_iter().enumerate() {
            if best.is_none_or(|(_, bp)| p > bp) {
                best = Some((k, p));
            }
        }
        best.map(|(k, p)| (&self.class_ids[k], p))
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::nlu::embed::{cosine, Embedder, HashedNgramEmbedder};

    fn keys(names: &[&str]) -> Vec<NodeKey> {
        names.iter().map(|n| NodeKey::new("main", *n)).collect()
    }

    #[test]
    fn separable_yes_no() {
        let e = HashedNgramEmbedder::default();
        let data = [(0, "yes"), (0, "yeah"), (1, "no"), (1, "nope")];
        let embs: Vec<_> = data.iter().map(|(c, t)| (*c, e.embed(t))).collect();
        // Nearest-neighbour check that the toy set is separable: every example
        // is closer to its own class than to the other one.
        for (c, v) in &embs {
            let best = embs
                .iter()
                .filter(|(_, w)| w != v)
                .max_by(|a, b| cosine(v, &a.1).total_cmp(&cosine(v, &b.1)))
                .unwrap();
            assert_eq!(best.0, *c);
        }
        let pairs: Vec<(usize, &Embedding)> = embs.iter().map(|(c, v)| (*c, v)).collect();
        let clf = IntentClassifier::train(keys(&["yes", "no"]), &pairs, e.embed("x").dim(), TrainParams::default());
        for (c, v) in &embs {
            let (key, p) = clf.predict(v).unwrap();
            assert_eq!(key, &clf.class_ids[*c]);
            assert!(p > 0.5, "confidence {p}");
        }
    }

    #[test]
    fn training_is_bit_reproducible() {
        let e = HashedNgramEmbedder::default();
        let embs: Vec<_> = ["a b", "c d", "e f g"].iter().map(|t| e.embed(t)).collect();
        let pairs: Vec<(usize, &Embedding)> = embs.iter().enumerate().map(|(i, v)| (i % 2, v)).collect();
        let a = IntentClassifier::train(keys(&["x", "y"]), &pairs, 1024, TrainParams::default());
        let b = IntentClassifier::train(keys(&["x", "y"]), &pairs, 1024, TrainParams::default());
        assert_eq!(a, b);
        let bits = |c: &IntentClassifier| c.weights.iter().flatten().map(|w| w.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn single_class_is_constant() {
        let e = HashedNgramEmbedder::default();
        let v = e.embed("only");
        let clf = IntentClassifier::train(keys(&["only"]), &[(0, &v)], 1024, TrainParams::default());
        let (key, p) = clf.predict(&e.embed("anything")).unwrap();
        assert_eq!(key.node.as_str(), "only");
        assert_eq!(p, 1.0);
    }

    proptest! {
        #[test]
        fn softmax_sums_to_one(logits in prop::collection::vec(-50.0f64..50.0, 1..8)) {
            let p = softmax(&logits);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(p.iter().all(|x| (0.0..=1.0).contains(x)));
        }
    }
}
