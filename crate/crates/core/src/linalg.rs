//! Small dense linear-algebra helpers.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues in descending order with eigenvectors as columns.
pub fn symmetric_eigen(a: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: a.ncols(),
        });
    }
    let mut m = a.clone();
    let mut v = Array2::<f64>::eye(n);
    let scale = m.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[[i, j]] * m[[i, j]])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&i, &j| m[[j, j]].total_cmp(&m[[i, i]]));
            let values = Array1::from_iter(order.iter().map(|&i| m[[i, i]]));
            let mut vectors = Array2::zeros((n, n));
            for (c, &i) in order.iter().enumerate() {
                vectors.column_mut(c).assign(&v.column(i));
            }
            return Ok((values, vectors));
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[[p, q]];
                if apq.abs() < f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (m[[q, q]] - m[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    Err(Error::Numerical("Jacobi eigen-decomposition did not converge".into()))
}

/// Inverse of an upper-triangular matrix by back-substitution.
pub fn upper_triangular_inverse(u: &Array2<f64>) -> Result<Array2<f64>> {
    let n = u.nrows();
    let mut inv = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        if u[[i, i]].abs() < 1e-300 {
            return Err(Error::Numerical(format!("singular triangular matrix at pivot {i}")));
        }
    }
    for j in 0..n {
        inv[[j, j]] = 1.0 / u[[j, j]];
        for i in (0..j).rev() {
            let s: f64 = (i + 1..=j).map(|k| u[[i, k]] * inv[[k, j]]).sum();
            inv[[i, j]] = -s / u[[i, i]];
        }
    }
    Ok(inv)
}
