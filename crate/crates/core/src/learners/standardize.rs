//! Column filtering and z-scoring.

use std::collections::HashMap;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::serial::{ArrayBlob, Envelope, Persist};

pub const NZV_FREQ_RATIO: f64 = 19.0;
pub const NZV_UNIQUE_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    input_dim: usize,
    kept: Vec<usize>,
    means: Array1<f64>,
    scales: Array1<f64>,
}

fn value_key(v: f64) -> u64 {
    if v == 0.0 {
        0
    } else {
        v.to_bits()
    }
}

/// Whether a column is constant or near-zero-variance: the most common value
/// is over 19 times as frequent as the runner-up and fewer than 10% of values
/// are distinct.
pub fn is_near_zero_variance(col: ArrayView1<f64>) -> bool {
    let mut freq: HashMap<u64, usize> = HashMap::new();
    for &v in col {
        *freq.entry(value_key(v)).or_default() += 1;
    }
    if freq.len() <= 1 {
        return true;
    }
    let mut counts: Vec<usize> = freq.values().copied().collect();
    counts.sort_unstable_by(|a, b| b.cmp(a));
    let ratio = counts[0] as f64 / counts[1] as f64;
    let unique = freq.len() as f64 / col.len() as f64;
    ratio > NZV_FREQ_RATIO && unique < NZV_UNIQUE_FRACTION
}

impl Standardizer {
    /// Fits on `x`. With `nzv` false only constant columns are dropped.
    pub fn fit(x: ArrayView2<f64>, nzv: bool) -> Result<Self> {
        let (n, d) = x.dim();
        if n < 2 {
            return Err(Error::invalid(format!("standardizer needs at least 2 rows, got {n}")));
        }
        let mut kept = Vec::new();
        let mut means = Vec::new();
        let mut scales = Vec::new();
        for (j, col) in x.axis_iter(Axis(1)).enumerate() {
            let mean = col.sum() / n as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
            let sd = var.sqrt();
            let drop = if nzv {
                is_near_zero_variance(col)
            } else {
                col.iter().all(|v| value_key(*v) == value_key(col[0]))
            };
            if drop || !(sd > 0.0) {
                continue;
            }
            kept.push(j);
            means.push(mean);
            scales.push(sd);
        }
        if kept.is_empty() {
            return Err(Error::invalid(format!(
                "standardizer dropped all {d} columns as constant or near-zero-variance"
            )));
        }
        Ok(Self {
            input_dim: d,
            kept,
            means: Array1::from(means),
            scales: Array1::from(scales),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.kept.len()
    }

    pub fn kept_columns(&self) -> &[usize] {
        &self.kept
    }

    pub fn means(&self) -> &Array1<f64> {
        &self.means
    }

    pub fn scales(&self) -> &Array1<f64> {
        &self.scales
    }

    pub fn transform_row(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        Ok(Array1::from_iter(
            self.kept
                .iter()
                .enumerate()
                .map(|(k, &j)| (x[j] - self.means[k]) / self.scales[k]),
        ))
    }

    pub fn transform(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: x.ncols(),
            });
        }
        let mut out = Array2::zeros((x.nrows(), self.kept.len()));
        for (k, &j) in self.kept.iter().enumerate() {
            let src = x.column(j);
            let (m, s) = (self.means[k], self.scales[k]);
            out.column_mut(k).iter_mut().zip(src).for_each(|(o, v)| *o = (v - m) / s);
        }
        Ok(out)
    }
}

#[derive(Serialize, Deserialize)]
struct Params {
    input_dim: usize,
    kept_columns: Vec<usize>,
}

impl Persist for Standardizer {
    const KIND: &'static str = "standardizer";

    fn to_envelope(&self) -> Envelope {
        Envelope::new(
            Self::KIND,
            Params {
                input_dim: self.input_dim,
                kept_columns: self.kept.clone(),
            },
        )
        .with_array("means", ArrayBlob::from_array1(&self.means))
        .with_array("scales", ArrayBlob::from_array1(&self.scales))
    }

    fn from_envelope(env: &Envelope) -> Result<Self> {
        let p: Params = env.params()?;
        let means = env.array("means")?.to_array1()?;
        let scales = env.array("scales")?.to_array1()?;
        if means.len() != p.kept_columns.len()
            || scales.len() != p.kept_columns.len()
            || p.kept_columns.iter().any(|&j| j >= p.input_dim)
        {
            return Err(Error::Format("standardizer arrays disagree with kept columns".into()));
        }
        Ok(Self {
            input_dim: p.input_dim,
            kept: p.kept_columns,
            means,
            scales,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn drop_rules() {
        let n = 100;
        let mut r = rng::seeded(5);
        let x = Array2::from_shape_fn((n, 4), |(i, j)| match j {
            0 => 3.0,
            1 => (i < 5) as u8 as f64,
            2 => r.sample(StandardNormal),
            _ => (i < 4) as u8 as f64,
        });
        let s = Standardizer::fit(x.view(), true).unwrap();
        // col 1: 95/5 = 19, not above the cutoff; col 3: 96/4 = 24 with 2% distinct
        assert_eq!(s.kept_columns(), &[1, 2]);
        let loose = Standardizer::fit(x.view(), false).unwrap();
        assert_eq!(loose.kept_columns(), &[1, 2, 3]);
        assert!(Standardizer::fit(x.slice(ndarray::s![.., 0..1]), true).is_err());
    }

    #[test]
    fn training_matrix_is_standardized() {
        let mut r = rng::seeded(11);
        let x = Array2::from_shape_fn((300, 5), |(_, j)| r.sample::<f64, _>(StandardNormal) * (j + 1) as f64 + j as f64);
        let s = Standardizer::fit(x.view(), true).unwrap();
        let z = s.transform(x.view()).unwrap();
        for col in z.axis_iter(Axis(1)) {
            let m = col.mean().unwrap();
            let sd = (col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / 299.0).sqrt();
            assert!(m.abs() < 1e-9 && (sd - 1.0).abs() < 1e-9);
        }
        assert_eq!(s.transform_row(x.row(3)).unwrap(), z.row(3));
        let back = Standardizer::from_bytes(&s.to_bytes()).unwrap();
        assert_eq!(back, s);
        assert!(s.transform_row(Array1::zeros(2).view()).is_err());
    }
}
