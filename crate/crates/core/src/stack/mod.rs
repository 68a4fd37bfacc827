//! Platform-specific pipelines and the stacked meta-learner over them.

pub mod meta;
pub mod pipeline;

use rayon::prelude::*;

pub use meta::{
    add_platform_model, assemble_meta_features, build_meta_rows, fit_meta, train_superlearner, MetaFeatures, MetaMode,
    PredictionAudit, SuperLearner,
};
pub use pipeline::{train_platform_model, Pipeline, PipelineConfig, PlatformModel, TrainReport};

use crate::corpus::{LabeledMessage, SeverityLabel};
use crate::embeddings::EmbeddingProvider;
use crate::error::Result;
use crate::features::{BaseFeatures, FeatureExtractor};
use crate::preprocess::{clean_text, is_viable};

/// A message with every training-independent input precomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageInput {
    pub id: String,
    pub platform: String,
    pub label: Option<SeverityLabel>,
    pub features: BaseFeatures,
    pub embedding: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Prepared {
    pub inputs: Vec<MessageInput>,
    /// `(id, reason)` for messages that failed the viability filter.
    pub skipped: Vec<(String, String)>,
}

impl Prepared {
    pub fn labels(&self) -> Vec<SeverityLabel> {
        self.inputs.iter().filter_map(|m| m.label).collect()
    }
}

pub const NOT_VIABLE: &str = "not viable: fewer than 2 words or 5 characters";

/// Cleans, featurizes and embeds each message. Non-viable messages are
/// reported in `skipped`; a missing external embedding is an error.
pub fn prepare_messages(
    messages: &[LabeledMessage],
    extractor: &FeatureExtractor,
    provider: &EmbeddingProvider,
) -> Result<Prepared> {
    let results: Vec<Result<std::result::Result<MessageInput, (String, String)>>> = messages
        .par_iter()
        .map(|msg| {
            if !is_viable(&msg.raw_text) {
                return Ok(Err((msg.id.clone(), NOT_VIABLE.to_string())));
            }
            let cm = match clean_text(msg) {
                Ok(cm) => cm,
                Err(e) => return Ok(Err((msg.id.clone(), e.to_string()))),
            };
            let embedding = provider.embed(&msg.id, &cm.tokens)?;
            Ok(Ok(MessageInput {
                id: msg.id.clone(),
                platform: msg.platform.clone(),
                label: msg.label,
                features: extractor.base(&msg.raw_text, &cm),
                embedding,
            }))
        })
        .collect();
    let mut out = Prepared::default();
    for r in results {
        match r? {
            Ok(input) => out.inputs.push(input),
            Err(skip) => {
                log::warn!("skipping message `{}`: {}", skip.0, skip.1);
                out.skipped.push(skip);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prepare_skips_non_viable() {
        let msgs = vec![
            LabeledMessage::new("a", "gab", "they took our jobs again", Some(SeverityLabel::Hate)),
            LabeledMessage::new("b", "gab", "ok", Some(SeverityLabel::Clean)),
        ];
        let p = prepare_messages(
            &msgs,
            &FeatureExtractor::default(),
            &EmbeddingProvider::Hashed { dim: 16, seed: 0 },
        )
        .unwrap();
        assert_eq!(p.inputs.len(), 1);
        assert_eq!(p.skipped, [("b".to_string(), NOT_VIABLE.to_string())]);
        assert_eq!(p.inputs[0].embedding.len(), 16);
    }
}
