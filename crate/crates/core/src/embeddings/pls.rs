//! NIPALS PLS2 against one-hot class indicators.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigen, upper_triangular_inverse};
use crate::serial::{ArrayBlob, Envelope, Persist};

pub const MAX_INNER_ITER: usize = 500;
pub const INNER_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct PlsModel {
    n_components: usize,
    fitted_on: usize,
    weights: Array2<f64>,
    loadings: Array2<f64>,
    x_mean: Array1<f64>,
    x_scale: Array1<f64>,
    rotation: Array2<f64>,
}

/// Training-time by-products, exposed for diagnostics.
#[derive(Debug, Clone)]
pub struct PlsFit {
    pub model: PlsModel,
    pub scores: Array2<f64>,
    pub residual_norm: f64,
}

fn norm(v: ArrayView1<f64>) -> f64 {
    v.dot(&v).sqrt()
}

/// Column means and sample standard deviations; zero-variance columns get
/// scale 1 so they centre to zero and carry no weight.
fn standardize_stats(x: ArrayView2<f64>) -> (Array1<f64>, Array1<f64>) {
    let n = x.nrows() as f64;
    let mean = x.mean_axis(Axis(0)).unwrap();
    let mut scale = Array1::zeros(x.ncols());
    for (j, col) in x.axis_iter(Axis(1)).enumerate() {
        let ss: f64 = col.iter().map(|v| (v - mean[j]).powi(2)).sum();
        let sd = if n > 1.0 { (ss / (n - 1.0)).sqrt() } else { 0.0 };
        scale[j] = if sd > 1e-12 { sd } else { 1.0 };
    }
    (mean, scale)
}

pub fn fit_pls(x: ArrayView2<f64>, y_labels: &[usize], n_classes: usize, k: usize) -> Result<PlsModel> {
    fit_pls_detailed(x, y_labels, n_classes, k).map(|f| f.model)
}

pub fn fit_pls_detailed(
    x: ArrayView2<f64>,
    y_labels: &[usize],
    n_classes: usize,
    k: usize,
) -> Result<PlsFit> {
    let (n, d) = x.dim();
    if y_labels.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y_labels.len(),
        });
    }
    if k == 0 || n <= k || d < k {
        return Err(Error::invalid(format!(
            "PLS needs 0 < k < n and k <= d (k={k}, n={n}, d={d})"
        )));
    }
    let (x_mean, x_scale) = standardize_stats(x);
    let mut xr = (&x - &x_mean) / &x_scale;
    let mut yr = Array2::<f64>::zeros((n, n_classes));
    for (i, &c) in y_labels.iter().enumerate() {
        if c >= n_classes {
            return Err(Error::invalid(format!("label index {c} out of range")));
        }
        yr[[i, c]] = 1.0;
    }
    let y_mean = yr.mean_axis(Axis(0)).unwrap();
    yr -= &y_mean;

    let mut weights = Array2::zeros((d, k));
    let mut loadings = Array2::zeros((d, k));
    let mut scores = Array2::zeros((n, k));
    for a in 0..k {
        // Start from the dominant direction of Y'XX'Y so the inner loop
        // begins at (or next to) its fixed point.
        let m = xr.t().dot(&yr);
        let (_, vecs) = symmetric_eigen(&m.t().dot(&m))?;
        let mut u = yr.dot(&vecs.column(0));
        if norm(u.view()) < 1e-300 {
            u = yr.column(0).to_owned();
        }
        let mut w = Array1::zeros(d);
        let mut t = Array1::zeros(n);
        let mut c;
        let mut converged = false;
        for _ in 0..MAX_INNER_ITER {
            let xu = xr.t().dot(&u);
            let nw = norm(xu.view());
            if !(nw > 1e-12) {
                return Err(Error::Numerical(format!(
                    "PLS component {}: no covariance left between X and Y",
                    a + 1
                )));
            }
            let w_new = xu / nw;
            t = xr.dot(&w_new);
            let tt = t.dot(&t);
            c = yr.t().dot(&t) / tt;
            let cc = c.dot(&c);
            let u_new = if cc > 0.0 { yr.dot(&c) / cc } else { t.clone() };
            let delta = norm((&w_new - &w).view());
            w = w_new;
            u = u_new;
            if delta < INNER_TOL {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Numerical(format!(
                "PLS component {} did not converge within {MAX_INNER_ITER} iterations",
                a + 1
            )));
        }
        let tt = t.dot(&t);
        let p = xr.t().dot(&t) / tt;
        let c = yr.t().dot(&t) / tt;
        for i in 0..n {
            let ti = t[i];
            xr.row_mut(i).scaled_add(-ti, &p);
            yr.row_mut(i).scaled_add(-ti, &c);
        }
        weights.column_mut(a).assign(&w);
        loadings.column_mut(a).assign(&p);
        scores.column_mut(a).assign(&t);
    }
    let residual_norm = xr.iter().map(|v| v * v).sum::<f64>().sqrt();
    let model = PlsModel::from_parts(k, n, weights, loadings, x_mean, x_scale)?;
    Ok(PlsFit {
        model,
        scores,
        residual_norm,
    })
}

impl PlsModel {
    fn from_parts(
        n_components: usize,
        fitted_on: usize,
        weights: Array2<f64>,
        loadings: Array2<f64>,
        x_mean: Array1<f64>,
        x_scale: Array1<f64>,
    ) -> Result<Self> {
        // P'W is unit upper triangular under NIPALS deflation
        let ptw = loadings.t().dot(&weights);
        let mut upper = ptw.clone();
        for i in 0..n_components {
            for j in 0..i {
                upper[[i, j]] = 0.0;
            }
        }
        let rotation = weights.dot(&upper_triangular_inverse(&upper)?);
        Ok(Self {
            n_components,
            fitted_on,
            weights,
            loadings,
            x_mean,
            x_scale,
            rotation,
        })
    }

    pub fn n_components(&self) -> usize {
        self.n_components
    }

    pub fn input_dim(&self) -> usize {
        self.x_mean.len()
    }

    pub fn fitted_on(&self) -> usize {
        self.fitted_on
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn x_mean(&self) -> &Array1<f64> {
        &self.x_mean
    }

    pub fn transform(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let xs = (&x - &self.x_mean) / &self.x_scale;
        Ok(self.rotation.t().dot(&xs))
    }

    pub fn transform_rows(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.ncols(),
            });
        }
        let xs = (&x - &self.x_mean) / &self.x_scale;
        Ok(xs.dot(&self.rotation))
    }
}

#[derive(Serialize, Deserialize)]
struct Params {
    n_components: usize,
    fitted_on: usize,
}

impl Persist for PlsModel {
    const KIND: &'static str = "pls";

    fn to_envelope(&self) -> Envelope {
        Envelope::new(
            Self::KIND,
            Params {
                n_components: self.n_components,
                fitted_on: self.fitted_on,
            },
        )
        .with_array("weights", ArrayBlob::from_array2(&self.weights))
        .with_array("loadings", ArrayBlob::from_array2(&self.loadings))
        .with_array("x_mean", ArrayBlob::from_array1(&self.x_mean))
        .with_array("x_scale", ArrayBlob::from_array1(&self.x_scale))
    }

    fn from_envelope(env: &Envelope) -> Result<Self> {
        let p: Params = env.params()?;
        let weights = env.array("weights")?.to_array2()?;
        let loadings = env.array("loadings")?.to_array2()?;
        let x_mean = env.array("x_mean")?.to_array1()?;
        let x_scale = env.array("x_scale")?.to_array1()?;
        let d = x_mean.len();
        if weights.dim() != (d, p.n_components)
            || loadings.dim() != (d, p.n_components)
            || x_scale.len() != d
        {
            return Err(Error::Format("PLS arrays have inconsistent shapes".into()));
        }
        Self::from_parts(p.n_components, p.fitted_on, weights, loadings, x_mean, x_scale)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use ndarray::{array, s};
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn noisy(n: usize, d: usize, seed: u64) -> (Array2<f64>, Vec<usize>) {
        let mut r = rng::seeded(seed);
        let x = Array2::from_shape_fn((n, d), |_| r.sample::<f64, _>(StandardNormal));
        let y = (0..n).map(|i| if x[[i, 0]] > 0.0 { 2 } else { 0 }).collect();
        (x, y)
    }

    /// Unit vector maximizing ||Y'Xw||^2 found by brute power iteration on
    /// X'YY'X, independent of the NIPALS inner loop.
    fn brute_direction(x: &Array2<f64>, y: &[usize]) -> Array1<f64> {
        let (mean, scale) = standardize_stats(x.view());
        let xs = (x - &mean) / &scale;
        let mut ym = Array2::<f64>::zeros((x.nrows(), 3));
        for (i, &c) in y.iter().enumerate() {
            ym[[i, c]] = 1.0;
        }
        let ym = &ym - &ym.mean_axis(Axis(0)).unwrap();
        let m = xs.t().dot(&ym);
        let a = m.dot(&m.t());
        let mut v = Array1::from_elem(x.ncols(), 1.0);
        for _ in 0..5000 {
            let nv = a.dot(&v);
            v = &nv / norm(nv.view());
        }
        v
    }

    #[test]
    fn first_weight_tracks_signal_column() {
        let (x, y) = noisy(400, 6, 3);
        let m = fit_pls(x.view(), &y, 3, 1).unwrap();
        let w = m.weights().column(0).to_owned();
        assert!(w[0] * w[0] > 0.9 * w.dot(&w));
        let b = brute_direction(&x, &y);
        assert!((w.dot(&b).abs() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn training_scores_orthogonal_and_reproducible() {
        let (x, y) = noisy(200, 12, 9);
        let fit = fit_pls_detailed(x.view(), &y, 3, 5).unwrap();
        let t = &fit.scores;
        for a in 0..5 {
            for b in 0..a {
                let ta = t.column(a);
                let tb = t.column(b);
                let rel = ta.dot(&tb).abs() / (norm(ta) * norm(tb));
                assert!(rel < 1e-8, "{a},{b}: {rel}");
            }
        }
        let again = fit.model.transform_rows(x.view()).unwrap();
        for (p, q) in again.iter().zip(t.iter()) {
            assert!((p - q).abs() < 1e-8);
        }
        let zero = fit.model.transform(fit.model.x_mean().view()).unwrap();
        assert!(zero.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn full_rank_extracts_all_variance() {
        let x = array![
            [1.0, 2.0, 0.5],
            [2.0, 0.0, 1.5],
            [0.0, 1.0, 3.0],
            [3.0, 3.0, 1.0],
            [1.5, 0.5, 0.0]
        ];
        let y = [0, 1, 2, 1, 0];
        let fit = fit_pls_detailed(x.view(), &y, 3, 3).unwrap();
        assert!(fit.residual_norm < 1e-6, "{}", fit.residual_norm);
    }

    #[test]
    fn transform_is_linear_in_centred_input() {
        let (x, y) = noisy(100, 8, 1);
        let m = fit_pls(x.view(), &y, 3, 3).unwrap();
        let row = x.row(7).to_owned() - m.x_mean();
        let t1 = m.transform((&row + m.x_mean()).view()).unwrap();
        let t2 = m.transform((&row * 2.5 + m.x_mean()).view()).unwrap();
        for (a, b) in t1.iter().zip(t2.iter()) {
            assert!((2.5 * a - b).abs() < 1e-9);
        }
        assert!(m.transform(Array1::zeros(3).view()).is_err());
    }

    #[test]
    fn held_out_order_does_not_matter() {
        let (x, y) = noisy(120, 5, 4);
        let train = x.slice(s![..100, ..]).to_owned();
        let m = fit_pls(train.view(), &y[..100], 3, 2).unwrap();
        let a = m.transform_rows(x.slice(s![100.., ..])).unwrap();
        let mut rev = x.slice(s![100.., ..]).to_owned();
        rev.invert_axis(Axis(0));
        let mut b = m.transform_rows(rev.view()).unwrap();
        b.invert_axis(Axis(0));
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_shapes_and_round_trips() {
        let (x, y) = noisy(30, 4, 2);
        assert!(fit_pls(x.view(), &y, 3, 5).is_err());
        assert!(fit_pls(x.view(), &y[..10], 3, 2).is_err());
        let m = fit_pls(x.view(), &y, 3, 2).unwrap();
        let back = PlsModel::from_bytes(&m.to_bytes()).unwrap();
        assert_eq!(back.weights(), m.weights());
        assert_eq!(back.transform(x.row(0)).unwrap(), m.transform(x.row(0)).unwrap());
    }
}
