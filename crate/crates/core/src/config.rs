//! Run configuration: a flat `key = value` file, overridable from
//! `HATESTACK_*` environment variables.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::embeddings::{load_embeddings, EmbeddingProvider};
use crate::error::{Error, Result};
use crate::features::lexicon::{load_word_list, parse_valence, Lexicon, Lexicons, MatchMode, PronounInventory};
use crate::learners::{GbtParams, LearnerConfig, LogisticParams, MlpParams};
use crate::ordinal::DEFAULT_ABSTAIN_THRESHOLD;
use crate::stack::PipelineConfig;

pub const ENV_PREFIX: &str = "HATESTACK_";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EmbeddingSpec {
    External { dim: Option<usize> },
    Hashed { dim: usize, seed: u64 },
}

impl EmbeddingSpec {
    /// Builds the provider; external tables are read from `path`.
    pub fn provider(&self, path: Option<&Path>) -> Result<EmbeddingProvider> {
        match *self {
            EmbeddingSpec::Hashed { dim, seed } => Ok(EmbeddingProvider::Hashed { dim, seed }),
            EmbeddingSpec::External { dim } => {
                let path = path.ok_or_else(|| Error::Config("external embeddings need `embeddings.path`".into()))?;
                let table = load_embeddings(path)?;
                if let Some(d) = dim {
                    if table.dim() != d {
                        return Err(Error::DimensionMismatch {
                            expected: d,
                            got: table.dim(),
                        });
                    }
                }
                Ok(EmbeddingProvider::External(table))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub folds: usize,
    pub train_frac: f64,
    pub downsample_ratio: f64,
    pub pls_components: usize,
    pub abstain_threshold: f64,
    pub log_odds_prior: f64,
    pub seed: u64,
    pub learner: String,
    pub gbt: GbtParams,
    pub gbt_tune: bool,
    pub logistic: LogisticParams,
    pub meta: MlpParams,
    pub embedding_dim: Option<usize>,
    pub embedding_kind: String,
    pub embedding_seed: u64,
    pub embedding_path: Option<PathBuf>,
    pub lexicon_paths: BTreeMap<String, PathBuf>,
    /// 0 means one worker per core.
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            folds: 10,
            train_frac: 0.8,
            downsample_ratio: 2.0,
            pls_components: 50,
            abstain_threshold: DEFAULT_ABSTAIN_THRESHOLD,
            log_odds_prior: 1.0,
            seed: 0,
            learner: "gbt".into(),
            gbt: GbtParams::default(),
            gbt_tune: false,
            logistic: LogisticParams::default(),
            meta: MlpParams::default(),
            embedding_dim: Some(768),
            embedding_kind: "hashed".into(),
            embedding_seed: 0,
            embedding_path: None,
            lexicon_paths: BTreeMap::new(),
            workers: 0,
        }
    }
}

const LEXICON_KEYS: [&str; 8] = ["hate", "symbols", "swears", "valence", "negators", "stopwords", "ingroup", "outgroup"];

/// Keys left out of the config hash: they change where things are read
/// from or how fast, not what is fitted.
const UNHASHED: [&str; 2] = ["workers", "embeddings.path"];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("`{key}`: expected true or false, got `{value}`"))),
    }
}

impl RunConfig {
    pub fn keys() -> Vec<String> {
        let mut k: Vec<String> = [
            "folds",
            "train_frac",
            "downsample_ratio",
            "pls_components",
            "abstain_threshold",
            "log_odds_prior",
            "seed",
            "learner",
            "gbt.n_trees",
            "gbt.max_depth",
            "gbt.learning_rate",
            "gbt.min_leaf",
            "gbt.lambda",
            "gbt.tune",
            "logistic.l2",
            "logistic.epochs",
            "logistic.lr",
            "meta.hidden",
            "meta.epochs",
            "meta.lr",
            "meta.l2",
            "meta.batch_size",
            "meta.momentum",
            "embeddings",
            "embeddings.seed",
            "embeddings.path",
            "workers",
        ]
        .map(String::from)
        .to_vec();
        k.extend(LEXICON_KEYS.iter().map(|l| format!("lexicon.{l}")));
        k
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "folds" => self.folds = parse(key, v)?,
            "train_frac" => self.train_frac = parse(key, v)?,
            "downsample_ratio" => self.downsample_ratio = parse(key, v)?,
            "pls_components" => self.pls_components = parse(key, v)?,
            "abstain_threshold" => self.abstain_threshold = parse(key, v)?,
            "log_odds_prior" => self.log_odds_prior = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "learner" => match v {
                "gbt" | "logistic" => self.learner = v.to_string(),
                _ => return Err(Error::Config(format!("`learner`: expected gbt or logistic, got `{v}`"))),
            },
            "gbt.n_trees" => self.gbt.n_trees = parse(key, v)?,
            "gbt.max_depth" => self.gbt.max_depth = parse(key, v)?,
            "gbt.learning_rate" => self.gbt.learning_rate = parse(key, v)?,
            "gbt.min_leaf" => self.gbt.min_leaf = parse(key, v)?,
            "gbt.lambda" => self.gbt.lambda = parse(key, v)?,
            "gbt.tune" => self.gbt_tune = parse_bool(key, v)?,
            "logistic.l2" => self.logistic.l2 = parse(key, v)?,
            "logistic.epochs" => self.logistic.epochs = parse(key, v)?,
            "logistic.lr" => self.logistic.lr = parse(key, v)?,
            "meta.hidden" => self.meta.hidden = parse(key, v)?,
            "meta.epochs" => self.meta.epochs = parse(key, v)?,
            "meta.lr" => self.meta.lr = parse(key, v)?,
            "meta.l2" => self.meta.l2 = parse(key, v)?,
            "meta.batch_size" => self.meta.batch_size = parse(key, v)?,
            "meta.momentum" => self.meta.momentum = parse(key, v)?,
            "embeddings" => {
                if v == "external" {
                    self.embedding_kind = "external".into();
                    self.embedding_dim = None;
                } else if let Some(d) = v.strip_prefix("external:") {
                    self.embedding_kind = "external".into();
                    self.embedding_dim = Some(parse(key, d)?);
                } else if let Some(d) = v.strip_prefix("hashed:") {
                    self.embedding_kind = "hashed".into();
                    self.embedding_dim = Some(parse(key, d)?);
                } else {
                    return Err(Error::Config(format!(
                        "`embeddings`: expected external, external:<dim> or hashed:<dim>, got `{v}`"
                    )));
                }
            }
            "embeddings.seed" => self.embedding_seed = parse(key, v)?,
            "embeddings.path" => self.embedding_path = (!v.is_empty()).then(|| PathBuf::from(v)),
            "workers" => self.workers = parse(key, v)?,
            _ => match key.strip_prefix("lexicon.") {
                Some(name) if LEXICON_KEYS.contains(&name) => {
                    if v.is_empty() {
                        self.lexicon_paths.remove(name);
                    } else {
                        self.lexicon_paths.insert(name.to_string(), PathBuf::from(v));
                    }
                }
                _ => return Err(Error::Config(format!("unknown key `{key}`"))),
            },
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let s = match key {
            "folds" => self.folds.to_string(),
            "train_frac" => self.train_frac.to_string(),
            "downsample_ratio" => self.downsample_ratio.to_string(),
            "pls_components" => self.pls_components.to_string(),
            "abstain_threshold" => self.abstain_threshold.to_string(),
            "log_odds_prior" => self.log_odds_prior.to_string(),
            "seed" => self.seed.to_string(),
            "learner" => self.learner.clone(),
            "gbt.n_trees" => self.gbt.n_trees.to_string(),
            "gbt.max_depth" => self.gbt.max_depth.to_string(),
            "gbt.learning_rate" => self.gbt.learning_rate.to_string(),
            "gbt.min_leaf" => self.gbt.min_leaf.to_string(),
            "gbt.lambda" => self.gbt.lambda.to_string(),
            "gbt.tune" => self.gbt_tune.to_string(),
            "logistic.l2" => self.logistic.l2.to_string(),
            "logistic.epochs" => self.logistic.epochs.to_string(),
            "logistic.lr" => self.logistic.lr.to_string(),
            "meta.hidden" => self.meta.hidden.to_string(),
            "meta.epochs" => self.meta.epochs.to_string(),
            "meta.lr" => self.meta.lr.to_string(),
            "meta.l2" => self.meta.l2.to_string(),
            "meta.batch_size" => self.meta.batch_size.to_string(),
            "meta.momentum" => self.meta.momentum.to_string(),
            "embeddings" => match (self.embedding_kind.as_str(), self.embedding_dim) {
                (k, Some(d)) => format!("{k}:{d}"),
                (k, None) => k.to_string(),
            },
            "embeddings.seed" => self.embedding_seed.to_string(),
            "embeddings.path" => self
                .embedding_path
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default(),
            "workers" => self.workers.to_string(),
            _ => {
                let name = key.strip_prefix("lexicon.")?;
                if !LEXICON_KEYS.contains(&name) {
                    return None;
                }
                self.lexicon_paths
                    .get(name)
                    .map(|p| p.display().to_string())
                    .unwrap_or_default()
            }
        };
        Some(s)
    }

    /// Parses `key = value` lines over the defaults. `#` starts a comment.
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            let k = k.trim();
            if let Some(prev) = seen.insert(k.to_string(), i + 1) {
                return Err(Error::Config(format!("key `{k}` set twice (lines {prev} and {})", i + 1)));
            }
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_str(&text)
    }

    pub fn env_name(key: &str) -> String {
        format!("{ENV_PREFIX}{}", key.to_uppercase().replace('.', "_"))
    }

    /// Applies `HATESTACK_<KEY>` overrides, with `.` in keys written as `_`.
    pub fn apply_env<I, K, V>(&mut self, vars: I) -> Result<()>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let by_env: BTreeMap<String, String> = Self::keys().into_iter().map(|k| (Self::env_name(&k), k)).collect();
        for (name, value) in vars {
            let name = name.as_ref();
            if !name.starts_with(ENV_PREFIX) {
                continue;
            }
            let key = by_env
                .get(name)
                .ok_or_else(|| Error::Config(format!("unknown environment override `{name}`")))?;
            self.set(key, value.as_ref())?;
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.folds < 2 {
            return bad(format!("`folds` must be at least 2, got {}", self.folds));
        }
        if !(self.train_frac > 0.0 && self.train_frac < 1.0) {
            return bad(format!("`train_frac` must lie in (0, 1), got {}", self.train_frac));
        }
        if !(self.downsample_ratio >= 1.0) {
            return bad(format!("`downsample_ratio` must be at least 1, got {}", self.downsample_ratio));
        }
        if self.pls_components == 0 {
            return bad("`pls_components` must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.abstain_threshold) {
            return bad(format!("`abstain_threshold` must lie in [0, 1], got {}", self.abstain_threshold));
        }
        if !(self.log_odds_prior > 0.0) {
            return bad("`log_odds_prior` must be positive".into());
        }
        let g = &self.gbt;
        if g.n_trees == 0 || g.max_depth == 0 || g.min_leaf == 0 || !(g.learning_rate > 0.0) || !(g.lambda >= 0.0) {
            return bad(format!("invalid gbt settings {g:?}"));
        }
        let l = &self.logistic;
        if l.epochs == 0 || !(l.lr > 0.0) || !(l.l2 >= 0.0) {
            return bad(format!("invalid logistic settings {l:?}"));
        }
        let m = &self.meta;
        if m.hidden == 0 || m.epochs == 0 || m.batch_size == 0 || !(m.lr > 0.0) || !(m.l2 >= 0.0) || !(0.0..1.0).contains(&m.momentum) {
            return bad(format!("invalid meta settings {m:?}"));
        }
        if self.embedding_kind == "hashed" && self.embedding_dim.is_none_or(|d| d < 8) {
            return bad("hashed embeddings need a dimension of at least 8".into());
        }
        if self.pls_components > self.embedding_dim.unwrap_or(usize::MAX) {
            return bad(format!(
                "`pls_components` ({}) exceeds the embedding dimension",
                self.pls_components
            ));
        }
        Ok(())
    }

    pub fn learner_config(&self) -> LearnerConfig {
        if self.learner == "logistic" {
            LearnerConfig::Logistic(self.logistic)
        } else {
            LearnerConfig::Gbt {
                params: self.gbt,
                tune: self.gbt_tune,
                seed: self.seed,
            }
        }
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            folds: self.folds,
            downsample_ratio: self.downsample_ratio,
            pls_components: self.pls_components,
            learner: self.learner_config(),
            abstain_threshold: self.abstain_threshold,
            log_odds_prior: self.log_odds_prior,
            seed: self.seed,
        }
    }

    pub fn meta_params(&self) -> MlpParams {
        MlpParams {
            seed: self.seed,
            ..self.meta
        }
    }

    pub fn embedding_spec(&self) -> EmbeddingSpec {
        if self.embedding_kind == "external" {
            EmbeddingSpec::External {
                dim: self.embedding_dim,
            }
        } else {
            EmbeddingSpec::Hashed {
                dim: self.embedding_dim.unwrap_or(768),
                seed: self.embedding_seed,
            }
        }
    }

    pub fn embedding_provider(&self) -> Result<EmbeddingProvider> {
        self.embedding_spec().provider(self.embedding_path.as_deref())
    }

    /// Built-in resources with any configured file overrides applied.
    pub fn lexicons(&self) -> Result<Lexicons> {
        let mut lex = Lexicons::builtin();
        for (name, path) in &self.lexicon_paths {
            match name.as_str() {
                "hate" => lex.hate = Lexicon::load(path, "hate", MatchMode::Phrase)?,
                "symbols" => lex.symbols = Lexicon::load(path, "symbols", MatchMode::Substring)?,
                "swears" => lex.swears = Lexicon::load(path, "swears", MatchMode::Token)?,
                "valence" => {
                    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                    lex.valence = parse_valence(&text)?;
                }
                "negators" => lex.negators = load_word_list(path)?,
                "stopwords" => lex.stopwords = load_word_list(path)?,
                _ => {}
            }
        }
        if self.lexicon_paths.contains_key("ingroup") || self.lexicon_paths.contains_key("outgroup") {
            let pick = |name: &str, current: &std::collections::BTreeSet<String>| match self.lexicon_paths.get(name) {
                Some(p) => load_word_list(p),
                None => Ok(current.clone()),
            };
            lex.pronouns = PronounInventory::new(
                pick("ingroup", lex.pronouns.ingroup())?,
                pick("outgroup", lex.pronouns.outgroup())?,
            )?;
        }
        Ok(lex)
    }

    /// Every key in canonical order, one `key = value` line each.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for k in Self::keys() {
            out.push_str(&format!("{k} = {}\n", self.get(&k).unwrap_or_default()));
        }
        out
    }

    /// SHA-256 over the sorted model-affecting settings; independent of the
    /// order keys were written in.
    pub fn hash(&self) -> String {
        let mut keys = Self::keys();
        keys.sort();
        let mut h = Sha256::new();
        for k in keys.iter().filter(|k| !UNHASHED.contains(&k.as_str()) && !k.starts_with("lexicon.")) {
            h.update(format!("{k}={}\n", self.get(k).unwrap_or_default()).as_bytes());
        }
        hex::encode(h.finalize())
    }
}
