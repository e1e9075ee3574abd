use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::SquareMatrix;

/// Eigenpairs of a symmetric matrix, ordered by decreasing `|lambda|`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    /// `vectors[k]` is the unit eigenvector of `values[k]`.
    pub vectors: Vec<Vec<f64>>,
}

/// Cyclic Jacobi rotations until the off-diagonal mass is negligible.
pub fn symmetric_eigen(w: &SquareMatrix) -> Result<SymmetricEigen> {
    let n = w.dim();
    let asym = w.asymmetry();
    let scale = (0..n)
        .flat_map(|i| w.row(i).iter().copied())
        .fold(0.0_f64, |s, v| s.max(v.abs()))
        .max(1.0);
    if asym > 1e-12 * scale {
        return Err(Error::NotSymmetric(asym));
    }
    let mut a: Vec<Vec<f64>> = w.rows();
    let mut v: Vec<Vec<f64>> = SquareMatrix::identity(n).rows();

    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p][q];
                if apq.abs() < f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for row in a.iter_mut() {
                    let (akp, akq) = (row[p], row[q]);
                    row[p] = c * akp - s * akq;
                    row[q] = s * akp + c * akq;
                }
                let (head, tail) = a.split_at_mut(q);
                for (apk, aqk) in head[p].iter_mut().zip(tail[0].iter_mut()) {
                    let (x, y) = (*apk, *aqk);
                    *apk = c * x - s * y;
                    *aqk = s * x + c * y;
                }
                for row in v.iter_mut() {
                    let vkp = row[p];
                    let vkq = row[q];
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[y][y].abs().total_cmp(&a[x][x].abs()).then(x.cmp(&y)));
    let values = order.iter().map(|&k| a[k][k]).collect();
    let vectors = order
        .iter()
        .map(|&k| orient((0..n).map(|i| v[i][k]).collect()))
        .collect();
    Ok(SymmetricEigen { values, vectors })
}

/// Sign convention: the largest-magnitude entry is nonnegative.
fn orient(mut v: Vec<f64>) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    let lead = v
        .iter()
        .copied()
        .fold(0.0_f64, |best, x| if x.abs() > best.abs() { x } else { best });
    if lead < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenReport {
    pub dominant_value: f64,
    pub second_value: f64,
    pub dominant_vector: Vec<f64>,
    pub strictly_dominant: bool,
    /// Projection of `A(0)` on the dominant eigenvector.
    pub a0_component: f64,
    pub a0_aligned: bool,
    pub eigenvalues: Vec<f64>,
}

impl EigenReport {
    /// Both conditions for a unique fixed point at `phi = 1`.
    pub fn unique_fixed_point(&self) -> bool {
        self.strictly_dominant && self.a0_aligned
    }
}

pub fn eigen_diagnostics(w: &SquareMatrix, a_0: &[f64], gap_tol: f64) -> Result<EigenReport> {
    if a_0.len() != w.dim() {
        return Err(Error::Dimension {
            expected: w.dim(),
            actual: a_0.len(),
        });
    }
    if w.dim() == 0 {
        return Err(Error::invalid("empty weight matrix"));
    }
    let eig = symmetric_eigen(w)?;
    let dominant_value = eig.values[0];
    let second_value = eig.values.get(1).copied().unwrap_or(0.0);
    let dominant_vector = eig.vectors[0].clone();
    let a0_component: f64 = a_0.iter().zip(&dominant_vector).map(|(a, v)| a * v).sum();
    Ok(EigenReport {
        dominant_value,
        second_value,
        strictly_dominant: dominant_value.abs() - second_value.abs() > gap_tol,
        a0_aligned: a0_component.abs() > gap_tol,
        a0_component,
        dominant_vector,
        eigenvalues: eig.values,
    })
}
