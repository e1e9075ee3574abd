//! One-dimensional fuzzy c-means and partition-coefficient model selection.
//!
//! Values are clustered directly on the real line. Clustering the symmetric
//! tuples `(x, x)` instead scales every distance by `sqrt(2)`, which cancels
//! in the membership ratios and the prototype means, so both give the same
//! partition.

use std::ops::RangeInclusive;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FcmParams {
    pub clusters: usize,
    /// Fuzzification coefficient, must exceed 1.
    pub alpha: f64,
    pub seed: u64,
    pub max_iter: usize,
    /// Stop once no prototype moves by `tol` or more between sweeps.
    pub tol: f64,
}

impl FcmParams {
    pub fn new(clusters: usize, seed: u64) -> Self {
        Self {
            clusters,
            alpha: 2.0,
            seed,
            max_iter: 500,
            tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzyPartition {
    /// n x c membership matrix, rows sum to 1.
    pub memberships: Vec<Vec<f64>>,
    /// Cluster centers in ascending order.
    pub prototypes: Vec<f64>,
    pub alpha: f64,
    pub fpc: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl FuzzyPartition {
    pub fn n_clusters(&self) -> usize {
        self.prototypes.len()
    }

    /// Index of the largest membership per row, lowest index on ties.
    pub fn hard_labels(&self) -> Vec<usize> {
        self.memberships
            .iter()
            .map(|row| {
                let mut best = 0;
                for (j, &mu) in row.iter().enumerate().skip(1) {
                    if mu > row[best] {
                        best = j;
                    }
                }
                best
            })
            .collect()
    }
}

/// Fuzzy partition coefficient `(1/n) sum_j sum_i mu_ij^alpha`.
pub fn fpc(p: &FuzzyPartition) -> f64 {
    partition_coefficient(&p.memberships, p.alpha)
}

pub fn partition_coefficient(memberships: &[Vec<f64>], alpha: f64) -> f64 {
    if memberships.is_empty() {
        return 0.0;
    }
    let total: f64 = memberships
        .iter()
        .flat_map(|row| row.iter())
        .map(|&mu| pow_alpha(mu, alpha))
        .sum();
    total / memberships.len() as f64
}

/// Objective `sum_ij mu_ij^alpha (x_i - z_j)^2`.
pub fn objective(values: &[f64], memberships: &[Vec<f64>], prototypes: &[f64], alpha: f64) -> f64 {
    values
        .iter()
        .zip(memberships)
        .map(|(&x, row)| {
            row.iter()
                .zip(prototypes)
                .map(|(&mu, &z)| pow_alpha(mu, alpha) * (x - z) * (x - z))
                .sum::<f64>()
        })
        .sum()
}

#[inline]
fn pow_alpha(mu: f64, alpha: f64) -> f64 {
    if alpha == 2.0 {
        mu * mu
    } else {
        mu.powf(alpha)
    }
}

fn distinct_count(values: &[f64]) -> usize {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    sorted.len()
}

/// Seeded random memberships normalized per row.
pub fn random_memberships(n: usize, clusters: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let mut row: Vec<f64> = (0..clusters).map(|_| rng.gen_range(1e-3..1.0)).collect();
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= s);
            row
        })
        .collect()
}

/// Prototype update: membership-weighted means.
pub fn update_prototypes(values: &[f64], memberships: &[Vec<f64>], alpha: f64, previous: Option<&[f64]>) -> Vec<f64> {
    let c = memberships.first().map_or(0, Vec::len);
    let mut num = vec![0.0; c];
    let mut den = vec![0.0; c];
    for (&x, row) in values.iter().zip(memberships) {
        for (j, &mu) in row.iter().enumerate() {
            let w = pow_alpha(mu, alpha);
            num[j] += w * x;
            den[j] += w;
        }
    }
    (0..c)
        .map(|j| {
            if den[j] > 0.0 {
                num[j] / den[j]
            } else {
                previous.map_or(0.0, |p| p[j])
            }
        })
        .collect()
}

/// Membership update. A point sitting on a prototype gets membership 1 there
/// and 0 elsewhere.
pub fn update_memberships(values: &[f64], prototypes: &[f64], alpha: f64) -> Vec<Vec<f64>> {
    let exponent = 2.0 / (alpha - 1.0);
    let c = prototypes.len();
    values
        .iter()
        .map(|&x| {
            let dist: Vec<f64> = prototypes.iter().map(|&z| (x - z).abs()).collect();
            let scale = prototypes.iter().fold(x.abs().max(1.0), |s, z| s.max(z.abs()));
            let mut row = vec![0.0; c];
            if let Some(hit) = dist.iter().position(|&d| d <= f64::EPSILON * scale) {
                row[hit] = 1.0;
                return row;
            }
            let d_min = dist.iter().copied().fold(f64::INFINITY, f64::min);
            for (r, &d) in row.iter_mut().zip(&dist) {
                let ratio = d_min / d;
                *r = if exponent == 2.0 {
                    ratio * ratio
                } else {
                    ratio.powf(exponent)
                };
            }
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= s);
            row
        })
        .collect()
}

/// Seeded fuzzy c-means on a numeric column.
pub fn fuzzy_cmeans(values: &[f64], params: &FcmParams) -> Result<FuzzyPartition> {
    validate(values, params)?;
    let init = if params.clusters == 1 {
        vec![vec![1.0]; values.len()]
    } else {
        random_memberships(values.len(), params.clusters, params.seed)
    };
    run(values, init, params, None)
}

/// Runs the alternation from the given initial memberships and returns the
/// partition together with the objective after every sweep.
pub fn fuzzy_cmeans_traced(
    values: &[f64],
    init: Vec<Vec<f64>>,
    params: &FcmParams,
) -> Result<(FuzzyPartition, Vec<f64>)> {
    validate(values, params)?;
    if init.len() != values.len() || init.iter().any(|r| r.len() != params.clusters) {
        return Err(Error::Dimension {
            expected: values.len() * params.clusters,
            actual: init.iter().map(Vec::len).sum(),
        });
    }
    let mut history = Vec::new();
    let p = run(values, init, params, Some(&mut history))?;
    Ok((p, history))
}

fn validate(values: &[f64], params: &FcmParams) -> Result<()> {
    if params.clusters == 0 {
        return Err(Error::Clustering("cluster count must be at least 1".into()));
    }
    if params.alpha.is_nan() || params.alpha <= 1.0 {
        return Err(Error::Clustering(format!(
            "fuzzification coefficient must exceed 1, got {}",
            params.alpha
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Clustering("non-finite value".into()));
    }
    let distinct = distinct_count(values);
    if distinct < params.clusters {
        return Err(Error::Clustering(format!(
            "{distinct} distinct values cannot support {} clusters",
            params.clusters
        )));
    }
    Ok(())
}

fn run(
    values: &[f64],
    mut memberships: Vec<Vec<f64>>,
    params: &FcmParams,
    mut history: Option<&mut Vec<f64>>,
) -> Result<FuzzyPartition> {
    let alpha = params.alpha;
    let mut prototypes = update_prototypes(values, &memberships, alpha, None);
    let mut iterations = 0;
    let mut converged = params.clusters == 1;
    if params.clusters > 1 {
        memberships = update_memberships(values, &prototypes, alpha);
        if let Some(h) = history.as_deref_mut() {
            h.push(objective(values, &memberships, &prototypes, alpha));
        }
        while iterations < params.max_iter {
            iterations += 1;
            let next = update_prototypes(values, &memberships, alpha, Some(&prototypes));
            let shift = next
                .iter()
                .zip(&prototypes)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            prototypes = next;
            memberships = update_memberships(values, &prototypes, alpha);
            if let Some(h) = history.as_deref_mut() {
                h.push(objective(values, &memberships, &prototypes, alpha));
            }
            if shift < params.tol {
                converged = true;
                break;
            }
        }
    }

    let mut order: Vec<usize> = (0..prototypes.len()).collect();
    order.sort_by(|&a, &b| prototypes[a].total_cmp(&prototypes[b]));
    let prototypes: Vec<f64> = order.iter().map(|&j| prototypes[j]).collect();
    let memberships: Vec<Vec<f64>> = memberships
        .into_iter()
        .map(|row| order.iter().map(|&j| row[j]).collect())
        .collect();
    let fpc = partition_coefficient(&memberships, alpha);
    Ok(FuzzyPartition {
        memberships,
        prototypes,
        alpha,
        fpc,
        iterations,
        converged,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discretization {
    /// Category (cluster index) per row.
    pub labels: Vec<usize>,
    pub partition: FuzzyPartition,
    /// FPC per candidate cluster count; `None` where the count was infeasible.
    pub candidates: Vec<(usize, Option<f64>)>,
}

impl Discretization {
    pub fn chosen_clusters(&self) -> usize {
        self.partition.n_clusters()
    }
}

/// Clusters the column for every count in `c_range` and keeps the partition
/// with the largest FPC, smallest count on ties.
pub fn discretize_numeric(values: &[f64], c_range: RangeInclusive<usize>, base: &FcmParams) -> Result<Discretization> {
    let distinct = distinct_count(values);
    let mut best: Option<FuzzyPartition> = None;
    let mut candidates = Vec::new();
    for c in c_range.clone() {
        if c == 0 || c > distinct {
            candidates.push((c, None));
            continue;
        }
        let params = FcmParams { clusters: c, ..*base };
        let p = fuzzy_cmeans(values, &params)?;
        candidates.push((c, Some(p.fpc)));
        if best.as_ref().is_none_or(|b| p.fpc > b.fpc + 1e-12) {
            best = Some(p);
        }
    }
    let partition = best.ok_or_else(|| {
        Error::Clustering(format!(
            "no feasible cluster count in {}..={} for {distinct} distinct values",
            c_range.start(),
            c_range.end()
        ))
    })?;
    Ok(Discretization {
        labels: partition.hard_labels(),
        partition,
        candidates,
    })
}
