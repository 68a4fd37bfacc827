//! Meta-feature assembly and the stacked meta-learner.

use std::sync::atomic::{AtomicUsize, Ordering};

use ndarray::Array2;
use rayon::prelude::*;

use super::pipeline::PlatformModel;
use super::MessageInput;
use crate::corpus::SeverityLabel;
use crate::error::{Error, Result};
use crate::learners::{fit_mlp, MlpModel, MlpParams};
use crate::ordinal::SeverityDistribution;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetaMode {
    /// The origin platform's triple comes from its out-of-fold predictions.
    Training,
    /// Every triple comes from the final platform models.
    Inference,
}

/// One probability triple per registered platform plus the message's
/// origin platform.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaFeatures {
    pub triples: Vec<[f64; 3]>,
    pub origin: String,
}

impl MetaFeatures {
    /// `3 * P` probabilities and one categorical field.
    pub fn logical_len(&self) -> usize {
        3 * self.triples.len() + 1
    }

    /// Probabilities followed by a one-hot origin over `platforms`. An
    /// unregistered origin encodes as all zeros.
    pub fn encode(&self, platforms: &[String]) -> Vec<f64> {
        let mut v: Vec<f64> = self.triples.iter().flat_map(|t| t.iter().copied()).collect();
        v.extend(platforms.iter().map(|p| if *p == self.origin { 1.0 } else { 0.0 }));
        v
    }
}

/// Counters observed during meta-row assembly.
#[derive(Debug, Default)]
pub struct PredictionAudit {
    /// Full-model predictions on a row the model was trained on.
    pub own_row_full_predictions: AtomicUsize,
    pub oof_reads: AtomicUsize,
    pub full_predictions: AtomicUsize,
}

impl PredictionAudit {
    pub fn own_row_full_predictions(&self) -> usize {
        self.own_row_full_predictions.load(Ordering::Relaxed)
    }

    pub fn oof_reads(&self) -> usize {
        self.oof_reads.load(Ordering::Relaxed)
    }

    pub fn full_predictions(&self) -> usize {
        self.full_predictions.load(Ordering::Relaxed)
    }
}

pub fn assemble_meta_features(
    msg: &MessageInput,
    models: &[&PlatformModel],
    mode: MetaMode,
    audit: Option<&PredictionAudit>,
) -> Result<MetaFeatures> {
    let mut triples = Vec::with_capacity(models.len());
    for m in models {
        let dist = if mode == MetaMode::Training && m.platform == msg.platform {
            let d = m.oof.get(&msg.id).ok_or_else(|| Error::Leakage {
                id: msg.id.clone(),
                platform: m.platform.clone(),
            })?;
            if let Some(a) = audit {
                a.oof_reads.fetch_add(1, Ordering::Relaxed);
            }
            *d
        } else {
            if let Some(a) = audit {
                a.full_predictions.fetch_add(1, Ordering::Relaxed);
                if m.oof.contains_key(&msg.id) {
                    a.own_row_full_predictions.fetch_add(1, Ordering::Relaxed);
                }
            }
            m.predict(msg)?
        };
        triples.push(dist.probs());
    }
    Ok(MetaFeatures {
        triples,
        origin: msg.platform.clone(),
    })
}

/// Training-mode meta rows for labelled messages, in input order.
pub fn build_meta_rows(
    models: &[&PlatformModel],
    inputs: &[MessageInput],
    audit: Option<&PredictionAudit>,
) -> Result<Vec<(MetaFeatures, SeverityLabel)>> {
    inputs
        .par_iter()
        .map(|m| {
            let label = m
                .label
                .ok_or_else(|| Error::invalid(format!("meta training message `{}` is unlabelled", m.id)))?;
            Ok((assemble_meta_features(m, models, MetaMode::Training, audit)?, label))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuperLearner {
    pub base: Vec<PlatformModel>,
    pub meta: MlpModel,
    pub meta_params: MlpParams,
    pub version: u32,
    pub abstain_threshold: f64,
}

/// Fits the meta network on encoded training rows.
pub fn fit_meta(
    platforms: &[String],
    rows: &[(MetaFeatures, SeverityLabel)],
    params: &MlpParams,
) -> Result<MlpModel> {
    if rows.is_empty() {
        return Err(Error::invalid("meta training needs at least one row"));
    }
    let width = 4 * platforms.len();
    let mut x = Array2::zeros((rows.len(), width));
    for (i, (mf, _)) in rows.iter().enumerate() {
        if mf.triples.len() != platforms.len() {
            return Err(Error::DimensionMismatch {
                expected: platforms.len(),
                got: mf.triples.len(),
            });
        }
        for (j, v) in mf.encode(platforms).into_iter().enumerate() {
            x[[i, j]] = v;
        }
    }
    let y: Vec<usize> = rows.iter().map(|(_, l)| l.index()).collect();
    fit_mlp(x.view(), &y, 3, params)
}

pub fn train_superlearner(
    base: Vec<PlatformModel>,
    rows: &[(MetaFeatures, SeverityLabel)],
    params: &MlpParams,
    abstain_threshold: f64,
) -> Result<SuperLearner> {
    if base.len() < 2 {
        return Err(Error::invalid(format!(
            "stacking needs at least 2 platform models, got {}",
            base.len()
        )));
    }
    let mut seen = std::collections::BTreeSet::new();
    for m in &base {
        if !seen.insert(m.platform.as_str()) {
            return Err(Error::invalid(format!("platform `{}` registered twice", m.platform)));
        }
    }
    let platforms: Vec<String> = base.iter().map(|m| m.platform.clone()).collect();
    let meta = fit_meta(&platforms, rows, params)?;
    Ok(SuperLearner {
        base,
        meta,
        meta_params: *params,
        version: 1,
        abstain_threshold,
    })
}

impl SuperLearner {
    pub fn platforms(&self) -> Vec<String> {
        self.base.iter().map(|m| m.platform.clone()).collect()
    }

    pub fn base_refs(&self) -> Vec<&PlatformModel> {
        self.base.iter().collect()
    }

    pub fn meta_input_width(&self) -> usize {
        self.meta.input_dim()
    }

    pub fn predict_meta(&self, mf: &MetaFeatures) -> Result<SeverityDistribution> {
        let x = ndarray::Array1::from(mf.encode(&self.platforms()));
        let p = self.meta.predict_proba(x.view())?;
        Ok(SeverityDistribution::from_probs([p[0], p[1], p[2]], self.abstain_threshold))
    }

    pub fn predict(&self, msg: &MessageInput) -> Result<SeverityDistribution> {
        let mf = assemble_meta_features(msg, &self.base_refs(), MetaMode::Inference, None)?;
        self.predict_meta(&mf)
    }

    pub fn predict_all(&self, inputs: &[MessageInput]) -> Result<Vec<SeverityDistribution>> {
        inputs.par_iter().map(|m| self.predict(m)).collect()
    }
}

/// Registers `new_model` and refits only the meta-learner on `corpus`
/// (training-mode rows over every platform, old and new).
pub fn add_platform_model(
    sl: &SuperLearner,
    new_model: PlatformModel,
    corpus: &[MessageInput],
    audit: Option<&PredictionAudit>,
) -> Result<SuperLearner> {
    if sl.base.iter().any(|m| m.platform == new_model.platform) {
        return Err(Error::invalid(format!(
            "platform `{}` is already registered",
            new_model.platform
        )));
    }
    let mut base = sl.base.clone();
    base.push(new_model);
    let refs: Vec<&PlatformModel> = base.iter().collect();
    let rows = build_meta_rows(&refs, corpus, audit)?;
    let platforms: Vec<String> = base.iter().map(|m| m.platform.clone()).collect();
    let meta = fit_meta(&platforms, &rows, &sl.meta_params)?;
    Ok(SuperLearner {
        base,
        meta,
        meta_params: sl.meta_params,
        version: sl.version + 1,
        abstain_threshold: sl.abstain_threshold,
    })
}
