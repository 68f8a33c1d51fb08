//! Bag-of-words text features for demos without an external topic model.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::model::FeatureVector;

/// Term-frequency featurizer over a fixed vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyTextFeaturizer {
    vocab: Vec<String>,
    index: HashMap<String, usize>,
}

impl ToyTextFeaturizer {
    /// Words are matched case-insensitively; a repeated vocabulary word keeps
    /// its first position.
    pub fn new<S: AsRef<str>>(vocab: &[S]) -> Result<Self> {
        if vocab.is_empty() {
            return Err(Error::InvalidArgument("vocabulary is empty".into()));
        }
        let vocab: Vec<String> = vocab.iter().map(|w| w.as_ref().to_lowercase()).collect();
        let mut index = HashMap::with_capacity(vocab.len());
        for (i, w) in vocab.iter().enumerate() {
            index.entry(w.clone()).or_insert(i);
        }
        Ok(Self { vocab, index })
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn dim(&self) -> usize {
        self.vocab.len()
    }

    /// L2-normalised term frequencies. Text with no vocabulary word gives the
    /// zero vector, which cannot be embedded; see [`is_usable`].
    pub fn featurize(&self, text: &str) -> FeatureVector {
        let mut tf = vec![0.0; self.vocab.len()];
        for word in text
            .split(|c: char| !c.is_alphanumeric())
            .filter(|w| !w.is_empty())
        {
            if let Some(&i) = self.index.get(&word.to_lowercase()) {
                tf[i] += 1.0;
            }
        }
        let norm = tf.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            tf.iter_mut().for_each(|v| *v /= norm);
        }
        FeatureVector::text(tf)
    }
}

/// False for the all-zero vector produced by out-of-vocabulary text.
pub fn is_usable(feature: &FeatureVector) -> bool {
    feature.values.iter().any(|&v| v != 0.0)
}
