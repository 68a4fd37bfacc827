//! Versioned JSON envelope for fitted models.
//!
//! ```json
//! {"kind": "gbt", "version": 1, "params": {...}, "arrays": {"name": {"shape": [r, c], "data": "<base64>"}}}
//! ```
//!
//! Real-valued arrays are stored as base64 of little-endian IEEE-754 doubles,
//! so a write/read cycle is bit-exact. Object keys are emitted in sorted
//! order, making the encoding byte-deterministic.

use std::collections::BTreeMap;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use ndarray::{Array1, Array2};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ENVELOPE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayBlob {
    pub shape: Vec<usize>,
    pub data: String,
}

impl ArrayBlob {
    pub fn from_slice(shape: Vec<usize>, values: &[f64]) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), values.len());
        let mut bytes = Vec::with_capacity(values.len() * 8);
        for v in values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        Self {
            shape,
            data: STANDARD.encode(bytes),
        }
    }

    pub fn from_vec1(values: &[f64]) -> Self {
        Self::from_slice(vec![values.len()], values)
    }

    pub fn from_array1(a: &Array1<f64>) -> Self {
        Self::from_slice(vec![a.len()], &a.to_vec())
    }

    pub fn from_array2(a: &Array2<f64>) -> Self {
        let (r, c) = a.dim();
        Self::from_slice(vec![r, c], &a.iter().copied().collect::<Vec<_>>())
    }

    pub fn values(&self) -> Result<Vec<f64>> {
        let bytes = STANDARD
            .decode(&self.data)
            .map_err(|e| Error::Format(format!("bad base64 array: {e}")))?;
        let expected: usize = self.shape.iter().product();
        if bytes.len() != expected * 8 {
            return Err(Error::Format(format!(
                "array holds {} bytes, shape {:?} needs {}",
                bytes.len(),
                self.shape,
                expected * 8
            )));
        }
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub fn to_array1(&self) -> Result<Array1<f64>> {
        if self.shape.len() != 1 {
            return Err(Error::Format(format!("expected 1-d array, got shape {:?}", self.shape)));
        }
        Ok(Array1::from(self.values()?))
    }

    pub fn to_array2(&self) -> Result<Array2<f64>> {
        if self.shape.len() != 2 {
            return Err(Error::Format(format!("expected 2-d array, got shape {:?}", self.shape)));
        }
        Array2::from_shape_vec((self.shape[0], self.shape[1]), self.values()?)
            .map_err(|e| Error::Format(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub kind: String,
    pub version: u32,
    pub params: serde_json::Value,
    pub arrays: BTreeMap<String, ArrayBlob>,
}

impl Envelope {
    pub fn new(kind: &str, params: impl Serialize) -> Self {
        Self {
            kind: kind.to_string(),
            version: ENVELOPE_VERSION,
            params: serde_json::to_value(params).expect("model params serialize"),
            arrays: BTreeMap::new(),
        }
    }

    pub fn with_array(mut self, name: &str, blob: ArrayBlob) -> Self {
        self.arrays.insert(name.to_string(), blob);
        self
    }

    pub fn expect_kind(&self, kind: &str) -> Result<()> {
        if self.kind != kind {
            return Err(Error::Format(format!("expected `{kind}` envelope, found `{}`", self.kind)));
        }
        if self.version != ENVELOPE_VERSION {
            return Err(Error::Format(format!(
                "unsupported `{kind}` envelope version {} (this build reads {ENVELOPE_VERSION})",
                self.version
            )));
        }
        Ok(())
    }

    pub fn array(&self, name: &str) -> Result<&ArrayBlob> {
        self.arrays
            .get(name)
            .ok_or_else(|| Error::Format(format!("`{}` envelope lacks array `{name}`", self.kind)))
    }

    pub fn params<T: DeserializeOwned>(&self) -> Result<T> {
        serde_json::from_value(self.params.clone())
            .map_err(|e| Error::Format(format!("`{}` params: {e}", self.kind)))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut v = serde_json::to_vec_pretty(self).expect("envelope serializes");
        v.push(b'\n');
        v
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        serde_json::from_slice(bytes).map_err(|e| Error::Format(e.to_string()))
    }
}

/// Types that round-trip through an [`Envelope`].
pub trait Persist: Sized {
    const KIND: &'static str;

    fn to_envelope(&self) -> Envelope;

    fn from_envelope(env: &Envelope) -> Result<Self>;

    fn to_bytes(&self) -> Vec<u8> {
        self.to_envelope().to_bytes()
    }

    fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let env = Envelope::from_bytes(bytes)?;
        env.expect_kind(Self::KIND)?;
        Self::from_envelope(&env)
    }
}
