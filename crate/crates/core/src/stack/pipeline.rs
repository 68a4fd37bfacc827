//! The per-platform pipeline: log-odds, PLS, standardization and the
//! ordinal classifier, trained with out-of-fold prediction capture.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::MessageInput;
use crate::corpus::{downsample_indices, stratified_kfold_indices, SeverityLabel};
use crate::embeddings::{fit_pls, PlsModel};
use crate::error::{Error, Result};
use crate::features::{fit_weighted_log_odds, log_odds_features, FeatureRecord, LogOddsModel};
use crate::learners::{LearnerConfig, Standardizer};
use crate::ordinal::{fit_ordinal, OrdinalClassifier, SeverityDistribution, DEFAULT_ABSTAIN_THRESHOLD};
use crate::rng::{derive, tag_of};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub folds: usize,
    pub downsample_ratio: f64,
    pub pls_components: usize,
    pub learner: LearnerConfig,
    pub abstain_threshold: f64,
    pub log_odds_prior: f64,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            folds: 10,
            downsample_ratio: 2.0,
            pls_components: 50,
            learner: LearnerConfig::default(),
            abstain_threshold: DEFAULT_ABSTAIN_THRESHOLD,
            log_odds_prior: 1.0,
            seed: 0,
        }
    }
}

/// One fitted feature-to-distribution chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Pipeline {
    pub log_odds: LogOddsModel,
    pub pls: PlsModel,
    pub standardizer: Standardizer,
    pub ordinal: OrdinalClassifier,
}

fn raw_row(m: &MessageInput, log_odds: &LogOddsModel, pls: &PlsModel) -> Result<Vec<f64>> {
    let record = m
        .features
        .record
        .with_log_odds(log_odds_features(&m.features.plural_nouns, log_odds));
    let mut row = record.to_array().to_vec();
    row.extend(pls.transform(Array1::from(m.embedding.clone()).view())?);
    Ok(row)
}

impl Pipeline {
    pub fn fit(rows: &[&MessageInput], labels: &[SeverityLabel], cfg: &PipelineConfig) -> Result<Self> {
        let docs: Vec<(Vec<&str>, SeverityLabel)> = rows
            .iter()
            .zip(labels)
            .map(|(m, &l)| (m.features.plural_nouns.iter().map(String::as_str).collect(), l))
            .collect();
        let log_odds = fit_weighted_log_odds(&docs, cfg.log_odds_prior)?;
        let dim = rows.first().map_or(0, |m| m.embedding.len());
        let emb = Array2::from_shape_fn((rows.len(), dim), |(i, j)| rows[i].embedding[j]);
        let y: Vec<usize> = labels.iter().map(|l| l.index()).collect();
        let pls = fit_pls(emb.view(), &y, 3, cfg.pls_components)?;
        let width = FeatureRecord::LEN + cfg.pls_components;
        let mut x = Array2::zeros((rows.len(), width));
        for (i, m) in rows.iter().enumerate() {
            x.row_mut(i).assign(&Array1::from(raw_row(m, &log_odds, &pls)?));
        }
        let standardizer = Standardizer::fit(x.view(), true)?;
        let xs = standardizer.transform(x.view())?;
        let ordinal = fit_ordinal(xs.view(), labels, &cfg.learner, cfg.abstain_threshold)?;
        Ok(Self {
            log_odds,
            pls,
            standardizer,
            ordinal,
        })
    }

    pub fn features(&self, m: &MessageInput) -> Result<Array1<f64>> {
        let row = Array1::from(raw_row(m, &self.log_odds, &self.pls)?);
        self.standardizer.transform_row(row.view())
    }

    pub fn predict(&self, m: &MessageInput) -> Result<SeverityDistribution> {
        self.ordinal.predict(self.features(m)?.view())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlatformModel {
    pub platform: String,
    pub config: PipelineConfig,
    pub pipeline: Pipeline,
    /// Out-of-fold distribution for every training message.
    pub oof: BTreeMap<String, SeverityDistribution>,
}

impl PlatformModel {
    pub fn predict(&self, m: &MessageInput) -> Result<SeverityDistribution> {
        self.pipeline.predict(m)
    }

    pub fn embedding_dim(&self) -> usize {
        self.pipeline.pls.input_dim()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub platform: String,
    pub n_train: usize,
    pub fold_fits: usize,
    pub fold_accuracy: Vec<f64>,
    pub oof_accuracy: f64,
    pub retries: usize,
}

fn is_missing_class(e: &Error) -> bool {
    matches!(e, Error::InvalidInput(m) if m.contains("lack class") || m.contains("k-fold impossible"))
}

/// Trains a platform model on one platform's labelled training rows.
pub fn train_platform_model(
    platform: &str,
    inputs: &[MessageInput],
    cfg: &PipelineConfig,
) -> Result<(PlatformModel, TrainReport)> {
    let labels: Vec<SeverityLabel> = inputs
        .iter()
        .map(|m| {
            m.label
                .ok_or_else(|| Error::invalid(format!("training message `{}` is unlabelled", m.id)))
        })
        .collect::<Result<_>>()?;
    if let Some(m) = inputs.iter().find(|m| m.platform != platform) {
        return Err(Error::invalid(format!(
            "message `{}` belongs to `{}`, not `{platform}`",
            m.id, m.platform
        )));
    }
    let y: Vec<usize> = labels.iter().map(|l| l.index()).collect();
    let mut last_err = None;
    for attempt in 0..4u64 {
        let seed = derive(cfg.seed, tag_of(platform) ^ attempt);
        match train_attempt(platform, inputs, &labels, &y, cfg, seed) {
            Ok((model, mut report)) => {
                report.retries = attempt as usize;
                return Ok((model, report));
            }
            Err(e) if is_missing_class(&e) && attempt < 3 => {
                log::warn!("platform `{platform}`: {e}; re-drawing folds");
                last_err = Some(e);
            }
            Err(e) => return Err(e),
        }
    }
    Err(last_err.unwrap())
}

fn train_attempt(
    platform: &str,
    inputs: &[MessageInput],
    labels: &[SeverityLabel],
    y: &[usize],
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<(PlatformModel, TrainReport)> {
    let folds = stratified_kfold_indices(y, 3, cfg.folds, derive(seed, tag_of("folds")))?;
    let fit_on = |idx: &[usize], tag: u64| -> Result<Pipeline> {
        let sub_y: Vec<usize> = idx.iter().map(|&i| y[i]).collect();
        let kept = downsample_indices(&sub_y, 3, cfg.downsample_ratio, derive(seed, tag));
        let rows: Vec<&MessageInput> = kept.iter().map(|&k| &inputs[idx[k]]).collect();
        let rl: Vec<SeverityLabel> = kept.iter().map(|&k| labels[idx[k]]).collect();
        Pipeline::fit(&rows, &rl, cfg)
    };
    let fold_out: Vec<Result<Vec<(usize, SeverityDistribution)>>> = folds
        .par_iter()
        .enumerate()
        .map(|(f, fold)| {
            let p = fit_on(&fold.train, f as u64 + 1)?;
            fold.validation
                .iter()
                .map(|&i| p.predict(&inputs[i]).map(|d| (i, d)))
                .collect()
        })
        .collect();
    let mut oof = BTreeMap::new();
    let mut fold_accuracy = Vec::with_capacity(folds.len());
    let mut correct = 0usize;
    for preds in fold_out {
        let preds = preds?;
        let ok = preds.iter().filter(|(i, d)| d.label() == labels[*i]).count();
        correct += ok;
        fold_accuracy.push(ok as f64 / preds.len().max(1) as f64);
        for (i, d) in preds {
            if oof.insert(inputs[i].id.clone(), d).is_some() {
                return Err(Error::DuplicateId(inputs[i].id.clone()));
            }
        }
    }
    let all: Vec<usize> = (0..inputs.len()).collect();
    let pipeline = fit_on(&all, 0)?;
    let report = TrainReport {
        platform: platform.to_string(),
        n_train: inputs.len(),
        fold_fits: folds.len(),
        fold_accuracy,
        oof_accuracy: correct as f64 / inputs.len() as f64,
        retries: 0,
    };
    Ok((
        PlatformModel {
            platform: platform.to_string(),
            config: cfg.clone(),
            pipeline,
            oof,
        },
        report,
    ))
}
