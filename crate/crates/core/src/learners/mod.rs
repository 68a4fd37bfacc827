//! Base learners: binary logistic regression and boosted trees, the meta
//! MLP, and the column standardizer.

pub mod gbt;
pub mod logistic;
pub mod mlp;
pub mod standardize;
pub mod tuning;

use ndarray::{ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

pub use gbt::{fit_gbt, GbtModel, GbtParams};
pub use logistic::{fit_logistic, LogisticModel, LogisticParams};
pub use mlp::{fit_mlp, MlpModel, MlpParams};
pub use standardize::Standardizer;
pub use tuning::{grid_search_gbt, GbtGrid};

use crate::error::Result;
use crate::serial::{Envelope, Persist};

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Which binary learner to fit and with what settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "learner", rename_all = "lowercase")]
pub enum LearnerConfig {
    Logistic(LogisticParams),
    Gbt {
        #[serde(flatten)]
        params: GbtParams,
        /// Grid-search GBT settings on inner folds before the final fit.
        tune: bool,
        seed: u64,
    },
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig::Gbt {
            params: GbtParams::default(),
            tune: false,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BinaryModel {
    Logistic(LogisticModel),
    Gbt(GbtModel),
}

pub fn fit_binary(x: ArrayView2<f64>, y: &[bool], cfg: &LearnerConfig) -> Result<BinaryModel> {
    match cfg {
        LearnerConfig::Logistic(p) => fit_logistic(x, y, p).map(BinaryModel::Logistic),
        LearnerConfig::Gbt { params, tune, seed } => {
            let params = if *tune {
                grid_search_gbt(x, y, &GbtGrid::default(), 3, *seed)?.0
            } else {
                *params
            };
            fit_gbt(x, y, &params).map(BinaryModel::Gbt)
        }
    }
}

impl BinaryModel {
    pub fn predict_prob(&self, x: ArrayView1<f64>) -> Result<f64> {
        match self {
            BinaryModel::Logistic(m) => m.predict_prob(x),
            BinaryModel::Gbt(m) => m.predict_prob(x),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            BinaryModel::Logistic(_) => LogisticModel::KIND,
            BinaryModel::Gbt(_) => GbtModel::KIND,
        }
    }

    pub fn to_envelope(&self) -> Envelope {
        match self {
            BinaryModel::Logistic(m) => m.to_envelope(),
            BinaryModel::Gbt(m) => m.to_envelope(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.to_envelope().to_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let env = Envelope::from_bytes(bytes)?;
        if env.kind == LogisticModel::KIND {
            env.expect_kind(LogisticModel::KIND)?;
            LogisticModel::from_envelope(&env).map(BinaryModel::Logistic)
        } else {
            env.expect_kind(GbtModel::KIND)?;
            GbtModel::from_envelope(&env).map(BinaryModel::Gbt)
        }
    }
}
