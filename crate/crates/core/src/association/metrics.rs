use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Absolute sample Pearson correlation. Zero when either column is constant.
pub fn pearson_abs(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Dimension {
            expected: x.len(),
            actual: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::invalid("pearson needs at least two observations"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Ok(0.0);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).abs().min(1.0))
}

/// r x c contingency table over the categories actually present, rows and
/// columns in ascending category order.
pub fn contingency_table(x: &[usize], y: &[usize]) -> Result<Vec<Vec<f64>>> {
    if x.len() != y.len() {
        return Err(Error::Dimension {
            expected: x.len(),
            actual: y.len(),
        });
    }
    let index = |col: &[usize]| -> BTreeMap<usize, usize> {
        let mut m: BTreeMap<usize, usize> = col.iter().map(|&c| (c, 0)).collect();
        for (k, v) in m.values_mut().enumerate() {
            *v = k;
        }
        m
    };
    let (rx, ry) = (index(x), index(y));
    let mut table = vec![vec![0.0; ry.len()]; rx.len()];
    for (a, b) in x.iter().zip(y) {
        table[rx[a]][ry[b]] += 1.0;
    }
    Ok(table)
}

/// Uncorrected Cramér's V of a contingency table.
pub fn cramers_v_table(table: &[Vec<f64>]) -> f64 {
    let r = table.len();
    let c = table.first().map_or(0, Vec::len);
    let k = r.min(c).saturating_sub(1);
    if k == 0 {
        return 0.0;
    }
    let row_sums: Vec<f64> = table.iter().map(|row| row.iter().sum()).collect();
    let col_sums: Vec<f64> = (0..c).map(|j| table.iter().map(|row| row[j]).sum()).collect();
    let n: f64 = row_sums.iter().sum();
    if n <= 0.0 {
        return 0.0;
    }
    let mut chi2 = 0.0;
    for (i, row) in table.iter().enumerate() {
        for (j, &obs) in row.iter().enumerate() {
            let expected = row_sums[i] * col_sums[j] / n;
            if expected > 0.0 {
                let d = obs - expected;
                chi2 += d * d / expected;
            }
        }
    }
    (chi2 / (n * k as f64)).sqrt().min(1.0)
}

/// Cramér's V between two nominal columns of category indices.
pub fn cramers_v(x: &[usize], y: &[usize]) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::invalid("cramers_v needs at least one observation"));
    }
    Ok(cramers_v_table(&contingency_table(x, y)?))
}
