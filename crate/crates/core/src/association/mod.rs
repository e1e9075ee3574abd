//! Pairwise feature associations and the FCM weight matrix.
//!
//! Numeric pairs use absolute Pearson correlation, nominal pairs use
//! Cramér's V, and mixed pairs first discretize the numeric side with fuzzy
//! c-means (cluster count picked by the partition coefficient) and then use
//! Cramér's V.

mod fuzzy;
mod metrics;

use std::io::{Read, Write};
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

pub use fuzzy::{
    discretize_numeric, fpc, fuzzy_cmeans, fuzzy_cmeans_traced, objective, partition_coefficient, random_memberships,
    update_memberships, update_prototypes, Discretization, FcmParams, FuzzyPartition,
};
pub use metrics::{contingency_table, cramers_v, cramers_v_table, pearson_abs};

use crate::dataset::{Dataset, FeatureKind};
use crate::error::{Error, Result};
use crate::matrix::SquareMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DiagonalPolicy {
    #[default]
    Unit,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationMatrix {
    pub feature_ids: Vec<String>,
    pub weights: SquareMatrix,
    pub diagonal_policy: DiagonalPolicy,
}

#[derive(Serialize, Deserialize)]
struct AssociationJson {
    feature_ids: Vec<String>,
    weights: Vec<Vec<f64>>,
    diagonal_policy: DiagonalPolicy,
}

impl AssociationMatrix {
    pub fn dim(&self) -> usize {
        self.weights.dim()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.weights.get(i, j)
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.feature_ids.iter().position(|f| f == id)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["feature".to_string()];
        header.extend(self.feature_ids.iter().cloned());
        w.write_record(&header)?;
        for (i, id) in self.feature_ids.iter().enumerate() {
            let mut rec = vec![id.clone()];
            rec.extend(self.weights.row(i).iter().map(|v| format!("{v}")));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<association csv>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R, diagonal_policy: DiagonalPolicy) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let feature_ids: Vec<String> = r.headers()?.iter().skip(1).map(str::to_string).collect();
        let mut rows = Vec::new();
        for (k, rec) in r.records().enumerate() {
            let rec = rec?;
            let row = rec
                .iter()
                .skip(1)
                .map(|s| {
                    s.parse::<f64>().map_err(|_| Error::MalformedRow {
                        row: k + 1,
                        column: "weight".into(),
                        message: format!("cannot parse `{s}`"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        let weights = SquareMatrix::from_rows(&rows)?;
        if weights.dim() != feature_ids.len() {
            return Err(Error::Dimension {
                expected: feature_ids.len(),
                actual: weights.dim(),
            });
        }
        Ok(Self {
            feature_ids,
            weights,
            diagonal_policy,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let j = AssociationJson {
            feature_ids: self.feature_ids.clone(),
            weights: self.weights.rows(),
            diagonal_policy: self.diagonal_policy,
        };
        serde_json::to_string_pretty(&j).map_err(|e| Error::Serialize(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let j: AssociationJson = serde_json::from_str(text).map_err(|e| Error::Serialize(e.to_string()))?;
        let weights = SquareMatrix::from_rows(&j.weights)?;
        if weights.dim() != j.feature_ids.len() {
            return Err(Error::Dimension {
                expected: j.feature_ids.len(),
                actual: weights.dim(),
            });
        }
        Ok(Self {
            feature_ids: j.feature_ids,
            weights,
            diagonal_policy: j.diagonal_policy,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationConfig {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_c_min")]
    pub c_min: usize,
    #[serde(default = "default_c_max")]
    pub c_max: usize,
    #[serde(default)]
    pub diagonal: DiagonalPolicy,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Convergence tolerance on prototype shift, relative to the column range.
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_alpha() -> f64 {
    2.0
}
fn default_c_min() -> usize {
    2
}
fn default_c_max() -> usize {
    10
}
fn default_max_iter() -> usize {
    500
}
fn default_tol() -> f64 {
    1e-9
}

impl Default for AssociationConfig {
    fn default() -> Self {
        Self {
            alpha: default_alpha(),
            c_min: default_c_min(),
            c_max: default_c_max(),
            diagonal: DiagonalPolicy::Unit,
            max_iter: default_max_iter(),
            tol: default_tol(),
        }
    }
}

impl AssociationConfig {
    pub fn c_range(&self) -> RangeInclusive<usize> {
        self.c_min..=self.c_max
    }
}

/// Discretization outcome for one numeric feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretizationReport {
    pub feature_id: String,
    pub chosen_clusters: usize,
    pub fpc: f64,
    pub candidates: Vec<CandidateFpc>,
    pub prototypes: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateFpc {
    pub clusters: usize,
    pub fpc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssociationResult {
    pub matrix: AssociationMatrix,
    pub discretizations: Vec<DiscretizationReport>,
}

fn column_range(values: &[f64]) -> f64 {
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    hi - lo
}

/// Builds the symmetric weight matrix over all schema features.
///
/// Each numeric feature with at least one nominal partner is discretized once
/// and the labels are reused for every mixed pair it takes part in. All
/// features share the same clustering seed, so permuting columns permutes
/// the result.
pub fn build_association_matrix(ds: &Dataset, cfg: &AssociationConfig, seed: u64) -> Result<AssociationResult> {
    let m = ds.n_features();
    let schema = ds.schema();
    let has_nominal = schema.iter().any(|f| f.kind == FeatureKind::Nominal);

    let mut discrete: Vec<Option<Vec<usize>>> = vec![None; m];
    let mut reports = Vec::new();
    for (j, f) in schema.iter().enumerate() {
        match f.kind {
            FeatureKind::Nominal => discrete[j] = Some(ds.nominal_column(j)),
            FeatureKind::Numeric if has_nominal => {
                let values = ds.column(j);
                let range = column_range(&values);
                let params = FcmParams {
                    clusters: cfg.c_min,
                    alpha: cfg.alpha,
                    seed,
                    max_iter: cfg.max_iter,
                    tol: cfg.tol * if range > 0.0 { range } else { 1.0 },
                };
                let d = discretize_numeric(&values, cfg.c_range(), &params)
                    .map_err(|e| Error::Clustering(format!("feature `{}`: {e}", f.id)))?;
                reports.push(DiscretizationReport {
                    feature_id: f.id.clone(),
                    chosen_clusters: d.chosen_clusters(),
                    fpc: d.partition.fpc,
                    candidates: d
                        .candidates
                        .iter()
                        .map(|&(clusters, fpc)| CandidateFpc { clusters, fpc })
                        .collect(),
                    prototypes: d.partition.prototypes.clone(),
                    iterations: d.partition.iterations,
                    converged: d.partition.converged,
                });
                discrete[j] = Some(d.labels);
            }
            FeatureKind::Numeric => {}
        }
    }

    let columns: Vec<Vec<f64>> = (0..m)
        .map(|j| {
            if schema[j].is_numeric() {
                ds.column(j)
            } else {
                Vec::new()
            }
        })
        .collect();

    let diag = match cfg.diagonal {
        DiagonalPolicy::Unit => 1.0,
        DiagonalPolicy::Zero => 0.0,
    };
    let mut weights = SquareMatrix::zeros(m);
    for i in 0..m {
        weights.set(i, i, diag);
        for j in (i + 1)..m {
            let w = match (schema[i].kind, schema[j].kind) {
                (FeatureKind::Numeric, FeatureKind::Numeric) => pearson_abs(&columns[i], &columns[j])?,
                _ => {
                    let a = discrete[i].as_ref().expect("nominal view present");
                    let b = discrete[j].as_ref().expect("nominal view present");
                    cramers_v(a, b)?
                }
            };
            weights.set(i, j, w);
            weights.set(j, i, w);
        }
    }
    Ok(AssociationResult {
        matrix: AssociationMatrix {
            feature_ids: ds.feature_ids(),
            weights,
            diagonal_policy: cfg.diagonal,
        },
        discretizations: reports,
    })
}
