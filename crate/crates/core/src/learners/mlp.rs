//! One-hidden-layer tanh network with a softmax output.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::serial::{ArrayBlob, Envelope, Persist};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub hidden: usize,
    pub epochs: usize,
    pub lr: f64,
    pub l2: f64,
    pub batch_size: usize,
    pub momentum: f64,
    pub seed: u64,
}

impl Default for MlpParams {
    fn default() -> Self {
        Self {
            hidden: 16,
            epochs: 200,
            lr: 0.05,
            l2: 1e-4,
            batch_size: 32,
            momentum: 0.9,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

pub fn softmax(z: ArrayView1<f64>) -> Array1<f64> {
    let m = z.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let e = z.mapv(|v| (v - m).exp());
    let s = e.sum();
    e / s
}

/// Gradients with the same shapes as the model's parameters.
#[derive(Debug, Clone)]
pub struct MlpGrad {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

impl MlpModel {
    pub fn new_xavier(input: usize, hidden: usize, classes: usize, seed: u64) -> Self {
        let mut r = rng::seeded(seed);
        let mut init = |rows: usize, cols: usize| {
            let a = (6.0 / (rows + cols) as f64).sqrt();
            Array2::from_shape_fn((rows, cols), |_| r.random_range(-a..a))
        };
        Self {
            w1: init(input, hidden),
            b1: Array1::zeros(hidden),
            w2: init(hidden, classes),
            b2: Array1::zeros(classes),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.nrows()
    }

    pub fn n_classes(&self) -> usize {
        self.w2.ncols()
    }

    pub fn predict_proba(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let h = (x.dot(&self.w1) + &self.b1).mapv(f64::tanh);
        Ok(softmax((h.dot(&self.w2) + &self.b2).view()))
    }

    /// Mean cross-entropy plus `l2/2` times the squared weight norms
    /// (biases unpenalized), and its gradient.
    pub fn loss_and_grad(&self, x: ArrayView2<f64>, y: &[usize], l2: f64) -> (f64, MlpGrad) {
        let n = x.nrows() as f64;
        let h = (x.dot(&self.w1) + &self.b1).mapv(f64::tanh);
        let z = h.dot(&self.w2) + &self.b2;
        let mut delta2 = Array2::zeros(z.dim());
        let mut loss = 0.0;
        for (i, row) in z.axis_iter(Axis(0)).enumerate() {
            let p = softmax(row);
            loss -= p[y[i]].max(1e-300).ln();
            let mut d = p;
            d[y[i]] -= 1.0;
            delta2.row_mut(i).assign(&(d / n));
        }
        loss = loss / n + 0.5 * l2 * (self.w1.iter().map(|v| v * v).sum::<f64>() + self.w2.iter().map(|v| v * v).sum::<f64>());
        let gw2 = h.t().dot(&delta2) + &self.w2 * l2;
        let gb2 = delta2.sum_axis(Axis(0));
        let delta1 = delta2.dot(&self.w2.t()) * h.mapv(|v| 1.0 - v * v);
        let gw1 = x.t().dot(&delta1) + &self.w1 * l2;
        let gb1 = delta1.sum_axis(Axis(0));
        (
            loss,
            MlpGrad {
                w1: gw1,
                b1: gb1,
                w2: gw2,
                b2: gb2,
            },
        )
    }
}

pub fn fit_mlp(x: ArrayView2<f64>, y: &[usize], n_classes: usize, params: &MlpParams) -> Result<MlpModel> {
    let (n, d) = x.dim();
    if n != y.len() {
        return Err(Error::DimensionMismatch { expected: n, got: y.len() });
    }
    if n == 0 || params.hidden == 0 || params.batch_size == 0 {
        return Err(Error::invalid("MLP needs rows, a hidden layer and a positive batch size"));
    }
    if let Some(&bad) = y.iter().find(|&&c| c >= n_classes) {
        return Err(Error::invalid(format!("class index {bad} out of range")));
    }
    let mut model = MlpModel::new_xavier(d, params.hidden, n_classes, params.seed);
    let mut vel = MlpGrad {
        w1: Array2::zeros(model.w1.dim()),
        b1: Array1::zeros(model.b1.len()),
        w2: Array2::zeros(model.w2.dim()),
        b2: Array1::zeros(model.b2.len()),
    };
    let mut order: Vec<usize> = (0..n).collect();
    let mut r = rng::seeded(rng::derive(params.seed, 0x5EED));
    for epoch in 0..params.epochs {
        order.shuffle(&mut r);
        for batch in order.chunks(params.batch_size) {
            let xb = x.select(Axis(0), batch);
            let yb: Vec<usize> = batch.iter().map(|&i| y[i]).collect();
            let (loss, g) = model.loss_and_grad(xb.view(), &yb, params.l2);
            if !loss.is_finite() {
                return Err(Error::Numerical(format!("MLP loss non-finite at epoch {epoch}")));
            }
            let mu = params.momentum;
            let lr = params.lr;
            vel.w1 = &vel.w1 * mu - &g.w1 * lr;
            vel.b1 = &vel.b1 * mu - &g.b1 * lr;
            vel.w2 = &vel.w2 * mu - &g.w2 * lr;
            vel.b2 = &vel.b2 * mu - &g.b2 * lr;
            model.w1 += &vel.w1;
            model.b1 += &vel.b1;
            model.w2 += &vel.w2;
            model.b2 += &vel.b2;
        }
    }
    Ok(model)
}

#[derive(Serialize, Deserialize)]
struct Params {
    input_dim: usize,
    hidden: usize,
    n_classes: usize,
}

impl Persist for MlpModel {
    const KIND: &'static str = "mlp";

    fn to_envelope(&self) -> Envelope {
        Envelope::new(
            Self::KIND,
            Params {
                input_dim: self.input_dim(),
                hidden: self.w1.ncols(),
                n_classes: self.n_classes(),
            },
        )
        .with_array("w1", ArrayBlob::from_array2(&self.w1))
        .with_array("b1", ArrayBlob::from_array1(&self.b1))
        .with_array("w2", ArrayBlob::from_array2(&self.w2))
        .with_array("b2", ArrayBlob::from_array1(&self.b2))
    }

    fn from_envelope(env: &Envelope) -> Result<Self> {
        let p: Params = env.params()?;
        let m = Self {
            w1: env.array("w1")?.to_array2()?,
            b1: env.array("b1")?.to_array1()?,
            w2: env.array("w2")?.to_array2()?,
            b2: env.array("b2")?.to_array1()?,
        };
        if m.w1.dim() != (p.input_dim, p.hidden)
            || m.b1.len() != p.hidden
            || m.w2.dim() != (p.hidden, p.n_classes)
            || m.b2.len() != p.n_classes
        {
            return Err(Error::Format("MLP weight shapes are inconsistent".into()));
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::StandardNormal;

    fn blobs(n_per: usize, sep: f64, seed: u64) -> (Array2<f64>, Vec<usize>) {
        let mut r = rng::seeded(seed);
        let centres = [[sep, 0.0], [-sep, sep], [0.0, -sep]];
        let mut x = Array2::zeros((3 * n_per, 2));
        let mut y = Vec::new();
        for (c, ctr) in centres.iter().enumerate() {
            for k in 0..n_per {
                let i = c * n_per + k;
                x[[i, 0]] = ctr[0] + r.sample::<f64, _>(StandardNormal);
                x[[i, 1]] = ctr[1] + r.sample::<f64, _>(StandardNormal);
                y.push(c);
            }
        }
        (x, y)
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
    }

    #[test]
    fn separates_blobs() {
        let (x, y) = blobs(60, 4.0, 2);
        let m = fit_mlp(x.view(), &y, 3, &MlpParams { epochs: 100, ..Default::default() }).unwrap();
        let ok = (0..y.len())
            .filter(|&i| {
                let p = m.predict_proba(x.row(i)).unwrap();
                p.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0 == y[i]
            })
            .count();
        assert!(ok as f64 / y.len() as f64 >= 0.95);
    }

    #[test]
    fn outputs_form_a_simplex() {
        let m = MlpModel::new_xavier(4, 8, 3, 1);
        let mut r = rng::seeded(3);
        for _ in 0..50 {
            let x = Array1::from_shape_fn(4, |_| 10.0 * r.sample::<f64, _>(StandardNormal));
            let p = m.predict_proba(x.view()).unwrap();
            assert!((p.sum() - 1.0).abs() < 1e-9 && p.iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn backprop_matches_finite_differences() {
        let (x, y) = blobs(5, 1.0, 4);
        let h = 1e-5;
        for point in 0..20 {
            let m = MlpModel::new_xavier(2, 4, 3, 100 + point);
            let (_, g) = m.loss_and_grad(x.view(), &y, 0.01);
            let loss = |mm: &MlpModel| mm.loss_and_grad(x.view(), &y, 0.01).0;
            let check = |get: &dyn Fn(&mut MlpModel) -> &mut f64, analytic: f64| {
                let mut p = m.clone();
                *get(&mut p) += h;
                let mut q = m.clone();
                *get(&mut q) -= h;
                let fd = (loss(&p) - loss(&q)) / (2.0 * h);
                assert!(rel_err(fd, analytic) <= 1e-4 || (fd - analytic).abs() < 1e-9, "{fd} vs {analytic}");
            };
            for i in 0..2 {
                for j in 0..4 {
                    check(&|mm: &mut MlpModel| &mut mm.w1[[i, j]], g.w1[[i, j]]);
                }
            }
            for j in 0..4 {
                check(&|mm: &mut MlpModel| &mut mm.b1[j], g.b1[j]);
                for c in 0..3 {
                    check(&|mm: &mut MlpModel| &mut mm.w2[[j, c]], g.w2[[j, c]]);
                }
            }
            for c in 0..3 {
                check(&|mm: &mut MlpModel| &mut mm.b2[c], g.b2[c]);
            }
        }
    }

    #[test]
    fn memorizes_small_set_deterministically() {
        let (x, y) = blobs(4, 0.5, 8);
        let params = MlpParams {
            hidden: 32,
            epochs: 2000,
            lr: 0.1,
            l2: 0.0,
            batch_size: 4,
            ..Default::default()
        };
        let m = fit_mlp(x.view(), &y, 3, &params).unwrap();
        for i in 0..y.len() {
            let p = m.predict_proba(x.row(i)).unwrap();
            assert_eq!(p.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0, y[i]);
        }
        assert_eq!(fit_mlp(x.view(), &y, 3, &params).unwrap(), m);
        assert_eq!(MlpModel::from_bytes(&m.to_bytes()).unwrap(), m);
    }
}
