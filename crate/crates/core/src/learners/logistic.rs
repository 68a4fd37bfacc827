//! L2-regularized logistic regression by full-batch gradient descent.

use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::sigmoid;
use crate::error::{Error, Result};
use crate::serial::{ArrayBlob, Envelope, Persist};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    pub l2: f64,
    pub epochs: usize,
    pub lr: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self {
            l2: 1e-3,
            epochs: 2000,
            lr: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    pub weights: Array1<f64>,
    pub bias: f64,
}

/// Mean log-loss plus `l2/2 * |w|^2` (bias unpenalized) and its gradient
/// with respect to `(w, b)`.
pub fn loss_and_grad(
    x: ArrayView2<f64>,
    y: &[bool],
    w: ArrayView1<f64>,
    b: f64,
    l2: f64,
) -> (f64, Array1<f64>, f64) {
    let n = x.nrows() as f64;
    let z = x.dot(&w) + b;
    let mut loss = 0.0;
    let mut resid = Array1::zeros(x.nrows());
    for (i, &zi) in z.iter().enumerate() {
        let t = if y[i] { 1.0 } else { 0.0 };
        // log(1 + e^z) - t*z, evaluated stably
        loss += zi.max(0.0) + (-zi.abs()).exp().ln_1p() - t * zi;
        resid[i] = sigmoid(zi) - t;
    }
    loss = loss / n + 0.5 * l2 * w.dot(&w);
    let gw = x.t().dot(&resid) / n + &w * l2;
    let gb = resid.sum() / n;
    (loss, gw, gb)
}

pub fn fit_logistic(x: ArrayView2<f64>, y: &[bool], params: &LogisticParams) -> Result<LogisticModel> {
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: y.len(),
        });
    }
    if y.is_empty() {
        return Err(Error::invalid("logistic regression needs at least one row"));
    }
    let mut w = Array1::zeros(x.ncols());
    let mut b = 0.0;
    for epoch in 0..params.epochs {
        let (loss, gw, gb) = loss_and_grad(x, y, w.view(), b, params.l2);
        if !loss.is_finite() {
            return Err(Error::Numerical(format!(
                "logistic loss became non-finite at epoch {epoch} (learning rate {} too high?)",
                params.lr
            )));
        }
        let gnorm = (gw.dot(&gw) + gb * gb).sqrt();
        if gnorm < 1e-6 {
            break;
        }
        w.scaled_add(-params.lr, &gw);
        b -= params.lr * gb;
    }
    Ok(LogisticModel { weights: w, bias: b })
}

impl LogisticModel {
    pub fn input_dim(&self) -> usize {
        self.weights.len()
    }

    pub fn predict_prob(&self, x: ArrayView1<f64>) -> Result<f64> {
        if x.len() != self.weights.len() {
            return Err(Error::DimensionMismatch {
                expected: self.weights.len(),
                got: x.len(),
            });
        }
        Ok(sigmoid(self.weights.dot(&x) + self.bias))
    }
}

impl Persist for LogisticModel {
    const KIND: &'static str = "logistic";

    fn to_envelope(&self) -> Envelope {
        Envelope::new(Self::KIND, serde_json::json!({}))
            .with_array("weights", ArrayBlob::from_array1(&self.weights))
            .with_array("bias", ArrayBlob::from_vec1(&[self.bias]))
    }

    fn from_envelope(env: &Envelope) -> Result<Self> {
        let bias = env.array("bias")?.values()?;
        if bias.len() != 1 {
            return Err(Error::Format("logistic bias must be a single value".into()));
        }
        Ok(Self {
            weights: env.array("weights")?.to_array1()?,
            bias: bias[0],
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use ndarray::Array2;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn separable(n: usize, seed: u64) -> (Array2<f64>, Vec<bool>) {
        let mut r = rng::seeded(seed);
        let mut x = Array2::zeros((n, 2));
        let mut y = Vec::new();
        for i in 0..n {
            let a: f64 = r.sample(StandardNormal);
            let b: f64 = r.sample(StandardNormal);
            let label = a + b > 0.0;
            let shift = if label { 0.5 } else { -0.5 };
            x[[i, 0]] = a + shift;
            x[[i, 1]] = b + shift;
            y.push(label);
        }
        (x, y)
    }

    #[test]
    fn separable_data_fits() {
        let (x, y) = separable(200, 1);
        let m = fit_logistic(x.view(), &y, &LogisticParams { l2: 1e-4, ..Default::default() }).unwrap();
        let correct = (0..200)
            .filter(|&i| (m.predict_prob(x.row(i)).unwrap() > 0.5) == y[i])
            .count();
        assert!(correct >= 198, "{correct}");
    }

    #[test]
    fn constant_labels_give_flat_predictions() {
        let (x, _) = separable(100, 2);
        let y = vec![true; 100];
        let m = fit_logistic(x.view(), &y, &LogisticParams::default()).unwrap();
        let ps: Vec<f64> = (0..100).map(|i| m.predict_prob(x.row(i)).unwrap()).collect();
        assert!(ps.iter().all(|p| *p > 0.95));
        let spread = ps.iter().cloned().fold(f64::MIN, f64::max) - ps.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread < 0.01, "{spread}");
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (x, y) = separable(40, 3);
        let mut r = rng::seeded(9);
        let h = 1e-6;
        for _ in 0..20 {
            let w = Array1::from_shape_fn(2, |_| r.sample::<f64, _>(StandardNormal));
            let b: f64 = r.sample(StandardNormal);
            let (_, gw, gb) = loss_and_grad(x.view(), &y, w.view(), b, 0.1);
            for j in 0..2 {
                let mut wp = w.clone();
                wp[j] += h;
                let mut wm = w.clone();
                wm[j] -= h;
                let fd = (loss_and_grad(x.view(), &y, wp.view(), b, 0.1).0
                    - loss_and_grad(x.view(), &y, wm.view(), b, 0.1).0)
                    / (2.0 * h);
                assert!((fd - gw[j]).abs() <= 1e-5);
            }
            let fd = (loss_and_grad(x.view(), &y, w.view(), b + h, 0.1).0
                - loss_and_grad(x.view(), &y, w.view(), b - h, 0.1).0)
                / (2.0 * h);
            assert!((fd - gb).abs() <= 1e-5);
        }
    }

    #[test]
    fn zero_weights_give_half_and_round_trip() {
        let m = LogisticModel {
            weights: Array1::zeros(3),
            bias: 0.0,
        };
        assert_eq!(m.predict_prob(Array1::from(vec![1.0, -2.0, 3.0]).view()).unwrap(), 0.5);
        assert!(m.predict_prob(Array1::zeros(2).view()).is_err());
        let (x, y) = separable(50, 4);
        let fitted = fit_logistic(x.view(), &y, &LogisticParams::default()).unwrap();
        assert_eq!(LogisticModel::from_bytes(&fitted.to_bytes()).unwrap(), fitted);
    }

    #[test]
    fn divergent_rate_is_reported() {
        let x = Array2::from_shape_fn((10, 1), |(i, _)| i as f64 * 1e200);
        let y: Vec<bool> = (0..10).map(|i| i % 2 == 0).collect();
        let err = fit_logistic(x.view(), &y, &LogisticParams { lr: 1e10, ..Default::default() }).unwrap_err();
        assert!(matches!(err, Error::Numerical(_)));
    }
}
