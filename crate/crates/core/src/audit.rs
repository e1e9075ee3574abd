//! End-to-end implicit-bias audit.
//!
//! The pipeline trains a tuned random forest, explains two correctly
//! classified test rows with Shapley values, builds the association FCM on
//! train ∪ validation and lets the absolute attributions propagate through
//! it for each `phi`. Protected features whose activation grows are
//! implicated through their associations even when the model barely uses
//! them directly.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::{IteratorRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::association::{build_association_matrix, AssociationConfig, AssociationResult};
use crate::dataset::{load_csv, normalize_numeric, stratified_split, Dataset, Schema, SplitIndices};
use crate::error::{Error, Result, StageExt};
use crate::fcm::{
    eigen_diagnostics, simulate, ActivationVector, EigenReport, SimulationConfig, SimulationTrace, Termination,
    TraceMetadata,
};
use crate::forest::{fit_forest, tune, ForestConfig, ForestModel, MaxFeatures, SplitCriterion, TuningReport};
use crate::shapley::{explain, global_shap, BackgroundSet, KernelOptions, KernelSampling, ShapExplanation, ShapMethod};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataConfig {
    pub path: PathBuf,
    pub schema: PathBuf,
    /// Min-max scale numeric columns after loading.
    #[serde(default)]
    pub normalize: bool,
    /// Stratified row subsample applied right after loading.
    #[serde(default)]
    pub max_rows: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    #[serde(default = "default_fractions")]
    pub fractions: [f64; 3],
}

fn default_fractions() -> [f64; 3] {
    [0.7, 0.2, 0.1]
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            fractions: default_fractions(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestGrid {
    #[serde(default = "default_estimators")]
    pub n_estimators: Vec<usize>,
    #[serde(default = "default_criteria")]
    pub criteria: Vec<SplitCriterion>,
    #[serde(default = "default_max_features")]
    pub max_features: Vec<MaxFeatures>,
    #[serde(default)]
    pub max_depth: Option<usize>,
}

fn default_estimators() -> Vec<usize> {
    vec![100, 500, 1000]
}
fn default_criteria() -> Vec<SplitCriterion> {
    vec![SplitCriterion::Gini, SplitCriterion::Entropy]
}
fn default_max_features() -> Vec<MaxFeatures> {
    vec![MaxFeatures::Sqrt, MaxFeatures::Log2]
}

impl Default for ForestGrid {
    fn default() -> Self {
        Self {
            n_estimators: default_estimators(),
            criteria: default_criteria(),
            max_features: default_max_features(),
            max_depth: None,
        }
    }
}

impl ForestGrid {
    pub fn configs(&self, seed: u64) -> Vec<ForestConfig> {
        let mut out = Vec::new();
        for &n in &self.n_estimators {
            for &c in &self.criteria {
                for &mf in &self.max_features {
                    let mut cfg = ForestConfig::new(n, c, mf, seed);
                    cfg.max_depth = self.max_depth;
                    out.push(cfg);
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ShapKind {
    Exact,
    #[default]
    Kernel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapConfig {
    #[serde(default)]
    pub method: ShapKind,
    #[serde(default = "default_background")]
    pub background: usize,
    #[serde(default = "default_coalitions")]
    pub n_coalitions: usize,
    #[serde(default = "default_sampling")]
    pub sampling: KernelSampling,
    /// Rows of train ∪ validation averaged for global importance.
    #[serde(default = "default_global_instances")]
    pub global_instances: usize,
    #[serde(default = "default_global_background")]
    pub global_background: usize,
    #[serde(default = "default_global_coalitions")]
    pub global_n_coalitions: usize,
}

fn default_background() -> usize {
    100
}
fn default_coalitions() -> usize {
    4096
}
fn default_sampling() -> KernelSampling {
    KernelSampling::Hybrid
}
fn default_global_instances() -> usize {
    50
}
fn default_global_background() -> usize {
    25
}
fn default_global_coalitions() -> usize {
    512
}

impl Default for ShapConfig {
    fn default() -> Self {
        Self {
            method: ShapKind::Kernel,
            background: default_background(),
            n_coalitions: default_coalitions(),
            sampling: default_sampling(),
            global_instances: default_global_instances(),
            global_background: default_global_background(),
            global_n_coalitions: default_global_coalitions(),
        }
    }
}

impl ShapConfig {
    pub fn method(&self, n_coalitions: usize, seed: u64) -> ShapMethod {
        match self.method {
            ShapKind::Exact => ShapMethod::Exact,
            ShapKind::Kernel => ShapMethod::Kernel(KernelOptions {
                n_coalitions,
                seed,
                sampling: self.sampling,
            }),
        }
    }
}

/// How attributions become the initial activation vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ActivationMode {
    /// `|S_i|`.
    #[default]
    Absolute,
    /// `S_i` as is.
    Signed,
    /// `|S_i| / max_j |S_j|`.
    MaxNormalized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FcmConfig {
    #[serde(default = "default_phis")]
    pub phis: Vec<f64>,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_fp_tol")]
    pub fp_tol: f64,
    #[serde(default = "default_cycle_window")]
    pub cycle_window: usize,
    #[serde(default)]
    pub activation: ActivationMode,
    /// Margin for the eigenvalue gap and the alignment of `A(0)`.
    #[serde(default = "default_gap_tol")]
    pub gap_tol: f64,
}

fn default_phis() -> Vec<f64> {
    vec![0.0, 0.2, 0.4, 0.6, 0.8]
}
fn default_max_iter() -> usize {
    100
}
fn default_fp_tol() -> f64 {
    1e-6
}
fn default_cycle_window() -> usize {
    20
}
fn default_gap_tol() -> f64 {
    1e-9
}

impl Default for FcmConfig {
    fn default() -> Self {
        Self {
            phis: default_phis(),
            max_iter: default_max_iter(),
            fp_tol: default_fp_tol(),
            cycle_window: default_cycle_window(),
            activation: ActivationMode::Absolute,
            gap_tol: default_gap_tol(),
        }
    }
}

impl FcmConfig {
    pub fn simulation(&self, phi: f64) -> SimulationConfig {
        SimulationConfig {
            phi,
            max_iter: self.max_iter,
            fp_tol: self.fp_tol,
            cycle_window: self.cycle_window,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Class whose probability is explained; the other class supplies the
    /// negative instance.
    pub positive_class: String,
    /// Feature ids (or names) of protected attributes.
    pub protected: Vec<String>,
    pub data: DataConfig,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub forest: ForestGrid,
    #[serde(default)]
    pub association: AssociationConfig,
    #[serde(default)]
    pub shap: ShapConfig,
    #[serde(default)]
    pub fcm: FcmConfig,
}

impl AuditConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: AuditConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative data and schema paths are taken
    /// relative to the file's directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.data.path, &mut cfg.data.schema] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Serialize(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(phi) = self.fcm.phis.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Config(format!("phi {phi} outside [0, 1]")));
        }
        if self.fcm.phis.is_empty() {
            return Err(Error::Config("empty phi list".into()));
        }
        if self.shap.background == 0 || self.shap.global_background == 0 {
            return Err(Error::Config("background size must be at least 1".into()));
        }
        if self.shap.global_instances == 0 {
            return Err(Error::Config("global_instances must be at least 1".into()));
        }
        if self.forest.configs(0).is_empty() {
            return Err(Error::Config("empty forest grid".into()));
        }
        Ok(())
    }

    pub fn seeds(&self) -> StageSeeds {
        StageSeeds::derive(self.seed)
    }
}

/// Independent seeds for every randomized stage, derived from the top-level
/// seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageSeeds {
    pub sample: u64,
    pub split: u64,
    pub association: u64,
    pub forest: u64,
    pub background: u64,
    pub selection: u64,
    pub kernel: u64,
    pub global: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl StageSeeds {
    pub fn derive(seed: u64) -> Self {
        let s = |k: u64| splitmix64(seed ^ splitmix64(k));
        Self {
            sample: s(1),
            split: s(2),
            association: s(3),
            forest: s(4),
            background: s(5),
            selection: s(6),
            kernel: s(7),
            global: s(8),
        }
    }
}

/// Initial activation vector and whether it is all zero (inert under the
/// reasoning rule for `phi < 1`).
pub fn build_activation_vector(expl: &ShapExplanation, mode: ActivationMode) -> (ActivationVector, bool) {
    let a: Vec<f64> = match mode {
        ActivationMode::Absolute => expl.abs_attributions(),
        ActivationMode::Signed => expl.attributions.clone(),
        ActivationMode::MaxNormalized => {
            let abs = expl.abs_attributions();
            let max = abs.iter().copied().fold(0.0, f64::max);
            if max > 0.0 {
                abs.iter().map(|v| v / max).collect()
            } else {
                abs
            }
        }
    };
    let v = ActivationVector(a);
    let zero = v.is_zero();
    (v, zero)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectedInstance {
    /// Row index within the test view.
    pub row: usize,
    pub class: usize,
}

/// One correctly classified positive row and one correctly classified row of
/// any other class, drawn at random.
pub fn select_instances(
    model: &ForestModel,
    test: &Dataset,
    positive: usize,
    seed: u64,
) -> Result<Vec<SelectedInstance>> {
    if test.n_rows() == 0 {
        return Err(Error::NoRows("test view".into()));
    }
    if positive >= test.n_classes() {
        return Err(Error::invalid(format!("positive class index {positive} out of range")));
    }
    let mut correct_pos = Vec::new();
    let mut correct_neg = Vec::new();
    let mut neg_classes = Vec::new();
    for (r, (row, &label)) in test.rows().iter().zip(test.labels()).enumerate() {
        if label != positive && !neg_classes.contains(&label) {
            neg_classes.push(label);
        }
        if model.predict(row)? == label {
            if label == positive {
                correct_pos.push(r);
            } else {
                correct_neg.push(r);
            }
        }
    }
    let names = test.class_names();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pos = *correct_pos
        .choose(&mut rng)
        .ok_or_else(|| Error::NoCorrectInstance(names[positive].clone()))?;
    let neg = *correct_neg.choose(&mut rng).ok_or_else(|| {
        let others: Vec<&str> = if neg_classes.is_empty() {
            (0..names.len())
                .filter(|&c| c != positive)
                .map(|c| names[c].as_str())
                .collect()
        } else {
            neg_classes.iter().map(|&c| names[c].as_str()).collect()
        };
        Error::NoCorrectInstance(others.join("|"))
    })?;
    Ok(vec![
        SelectedInstance {
            row: pos,
            class: positive,
        },
        SelectedInstance {
            row: neg,
            class: test.labels()[neg],
        },
    ])
}

/// Feature ids ordered by decreasing value; ties keep feature order.
pub fn rank_features(ids: &[String], values: &[f64]) -> Vec<String> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order.into_iter().map(|i| ids[i].clone()).collect()
}

/// 1-based position of `id` in a ranking.
pub fn rank_of(ranking: &[String], id: &str) -> Option<usize> {
    ranking.iter().position(|r| r == id).map(|p| p + 1)
}

/// `values / max(values)`; all-zero input stays zero.
pub fn normalize_to_max(values: &[f64]) -> Vec<f64> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max > 0.0 {
        values.iter().map(|v| v / max).collect()
    } else {
        vec![0.0; values.len()]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiRun {
    pub phi: f64,
    pub final_activation: Vec<f64>,
    pub normalized_final: Vec<f64>,
    pub fcm_rank: Vec<String>,
    /// Final minus initial activation for each protected feature.
    pub protected_delta: BTreeMap<String, f64>,
    pub termination: Termination,
    pub t_end: usize,
    pub zero_raw_steps: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceReport {
    /// `pos_r<row>` / `neg_r<row>` with the row index in the loaded dataset.
    pub name: String,
    pub dataset_row: usize,
    pub class: String,
    pub prediction: f64,
    pub base_value: f64,
    pub attributions: Vec<f64>,
    pub initial_activation: Vec<f64>,
    pub zero_activation_warning: bool,
    pub shap_rank: Vec<String>,
    pub eigen: EigenReport,
    pub runs: Vec<PhiRun>,
}

impl InstanceReport {
    pub fn run(&self, phi: f64) -> Option<&PhiRun> {
        self.runs.iter().find(|r| r.phi == phi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub seed: u64,
    pub stage_seeds: StageSeeds,
    pub feature_ids: Vec<String>,
    pub protected: Vec<String>,
    pub positive_class: String,
    pub activation_mode: ActivationMode,
    pub instances: Vec<InstanceReport>,
}

impl BiasReport {
    pub fn feature_index(&self, id: &str) -> Option<usize> {
        self.feature_ids.iter().position(|f| f == id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub instance: String,
    pub feature: String,
    pub initial: f64,
    pub phis: Vec<f64>,
    pub finals: Vec<f64>,
    pub deltas: Vec<f64>,
    /// Finals never decrease as `phi` grows.
    pub nondecreasing: bool,
}

/// Per instance and protected feature: activation deltas across the `phi`
/// grid, sorted by `phi`.
pub fn protected_delta_summary(report: &BiasReport) -> Vec<DeltaRow> {
    let mut rows = Vec::new();
    for inst in &report.instances {
        let mut runs: Vec<&PhiRun> = inst.runs.iter().collect();
        runs.sort_by(|a, b| a.phi.total_cmp(&b.phi));
        for id in &report.protected {
            let Some(j) = report.feature_index(id) else { continue };
            let initial = inst.initial_activation[j];
            let finals: Vec<f64> = runs.iter().map(|r| r.final_activation[j]).collect();
            rows.push(DeltaRow {
                instance: inst.name.clone(),
                feature: id.clone(),
                initial,
                phis: runs.iter().map(|r| r.phi).collect(),
                deltas: finals.iter().map(|f| f - initial).collect(),
                nondecreasing: finals.windows(2).all(|w| w[1] >= w[0]),
                finals,
            });
        }
    }
    rows
}

/// Everything a full run produces.
#[derive(Debug, Clone)]
pub struct AuditBundle {
    pub dataset: Dataset,
    pub split: SplitIndices,
    pub association: AssociationResult,
    pub tuning: TuningReport,
    pub model: ForestModel,
    pub test_accuracy: f64,
    pub global_shap: Vec<f64>,
    pub explanations: Vec<ShapExplanation>,
    pub traces: Vec<Vec<SimulationTrace>>,
    pub report: BiasReport,
}

pub fn load_dataset(cfg: &AuditConfig) -> Result<Dataset> {
    let schema = Schema::from_file(&cfg.data.schema)?;
    let mut ds = load_csv(&cfg.data.path, &schema, &schema.csv)?;
    if let Some(max) = cfg.data.max_rows {
        ds = ds.stratified_sample(max, cfg.seeds().sample)?;
    }
    if cfg.data.normalize {
        ds = normalize_numeric(&ds);
    }
    Ok(ds)
}

/// Resolves protected ids or names to canonical feature ids.
pub fn resolve_protected(ds: &Dataset, protected: &[String]) -> Result<Vec<String>> {
    protected
        .iter()
        .map(|p| {
            ds.feature_index(p)
                .map(|j| ds.schema()[j].id.clone())
                .ok_or_else(|| Error::Config(format!("protected feature `{p}` is not in the schema")))
        })
        .collect()
}

/// Tunes on train/validation and refits the best config on their union.
pub fn train_model(cfg: &AuditConfig, ds: &Dataset, split: &SplitIndices) -> Result<(TuningReport, ForestModel)> {
    let seeds = cfg.seeds();
    let train = ds.subset(&split.train)?;
    let validation = ds.subset(&split.validation)?;
    let tuning = tune(&train, &validation, &cfg.forest.configs(seeds.forest))?;
    let pool = ds.subset(&split.train_validation())?;
    let model = fit_forest(&pool, &tuning.best)?;
    Ok((tuning, model))
}

fn global_importance(cfg: &AuditConfig, model: &ForestModel, pool: &Dataset, positive: usize) -> Result<Vec<f64>> {
    let seeds = cfg.seeds();
    let bg = BackgroundSet::sample(pool, cfg.shap.global_background, seeds.global)?;
    let n = pool.n_rows();
    let mut rng = ChaCha8Rng::seed_from_u64(seeds.global.wrapping_add(1));
    let mut idx = if cfg.shap.global_instances >= n {
        (0..n).collect()
    } else {
        (0..n).choose_multiple(&mut rng, cfg.shap.global_instances)
    };
    idx.sort_unstable();
    let rows: Vec<Vec<f64>> = idx.iter().map(|&i| pool.row(i).to_vec()).collect();
    let method = cfg.shap.method(cfg.shap.global_n_coalitions, seeds.global);
    global_shap(model, &rows, &bg, positive, &method)
}

pub fn run_audit(cfg: &AuditConfig) -> Result<AuditBundle> {
    cfg.validate()?;
    let seeds = cfg.seeds();

    let ds = load_dataset(cfg).stage("load")?;
    let protected = resolve_protected(&ds, &cfg.protected).stage("load")?;
    let positive = ds
        .class_index(&cfg.positive_class)
        .ok_or_else(|| Error::Config(format!("unknown positive class `{}`", cfg.positive_class)))
        .stage("load")?;

    let split = stratified_split(&ds, cfg.split.fractions, seeds.split).stage("split")?;
    let pool = ds.subset(&split.train_validation()).stage("split")?;
    let test = ds.subset(&split.test).stage("split")?;

    let (tuning, model) = train_model(cfg, &ds, &split).stage("train")?;
    let test_accuracy = model.accuracy(&test).stage("train")?;

    let association = build_association_matrix(&pool, &cfg.association, seeds.association).stage("associate")?;
    let w = &association.matrix.weights;

    let bg = BackgroundSet::sample(&pool, cfg.shap.background, seeds.background).stage("explain")?;
    let global = global_importance(cfg, &model, &pool, positive).stage("explain")?;
    let selected = select_instances(&model, &test, positive, seeds.selection).stage("select")?;

    let ids = ds.feature_ids();
    let mut explanations = Vec::new();
    let mut traces = Vec::new();
    let mut instances = Vec::new();
    for (k, sel) in selected.iter().enumerate() {
        let dataset_row = split.test[sel.row];
        let tag = if sel.class == positive { "pos" } else { "neg" };
        let method = cfg
            .shap
            .method(cfg.shap.n_coalitions, seeds.kernel.wrapping_add(k as u64));
        let expl = explain(&model, test.row(sel.row), &bg, positive, &method).stage("explain")?;
        let (a0, zero) = build_activation_vector(&expl, cfg.fcm.activation);
        let eigen = eigen_diagnostics(w, &a0, cfg.fcm.gap_tol).stage("simulate")?;

        let mut runs = Vec::new();
        let mut inst_traces = Vec::new();
        for &phi in &cfg.fcm.phis {
            let trace = simulate(w, &a0, &cfg.fcm.simulation(phi)).stage("simulate")?;
            let fin = trace.last().0.clone();
            let protected_delta = protected
                .iter()
                .map(|id| {
                    let j = ds.feature_index(id).expect("resolved id");
                    (id.clone(), fin[j] - a0[j])
                })
                .collect();
            runs.push(PhiRun {
                phi,
                normalized_final: normalize_to_max(&fin),
                fcm_rank: rank_features(&ids, &fin),
                protected_delta,
                termination: trace.termination,
                t_end: trace.t_end(),
                zero_raw_steps: trace.zero_raw_steps.clone(),
                final_activation: fin,
            });
            inst_traces.push(trace);
        }
        instances.push(InstanceReport {
            name: format!("{tag}_r{dataset_row}"),
            dataset_row,
            class: ds.class_names()[sel.class].clone(),
            prediction: expl.prediction,
            base_value: expl.base_value,
            attributions: expl.attributions.clone(),
            shap_rank: rank_features(&ids, &expl.abs_attributions()),
            initial_activation: a0.0,
            zero_activation_warning: zero,
            eigen,
            runs,
        });
        explanations.push(expl);
        traces.push(inst_traces);
    }

    let report = BiasReport {
        seed: cfg.seed,
        stage_seeds: seeds,
        feature_ids: ids,
        protected,
        positive_class: cfg.positive_class.clone(),
        activation_mode: cfg.fcm.activation,
        instances,
    };
    Ok(AuditBundle {
        dataset: ds,
        split,
        association,
        tuning,
        model,
        test_accuracy,
        global_shap: global,
        explanations,
        traces,
        report,
    })
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| Error::Serialize(e.to_string()))
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

#[derive(Serialize)]
struct ShapMetadata<'a> {
    instance: &'a str,
    dataset_row: usize,
    class: &'a str,
    target_class: &'a str,
    base_value: f64,
    prediction: f64,
    method: ShapMethod,
    background_size: usize,
    background_seed: u64,
}

#[derive(Serialize)]
struct TraceSidecar<'a> {
    instance: &'a str,
    #[serde(flatten)]
    metadata: TraceMetadata,
}

#[derive(Serialize)]
struct SplitSummary<'a> {
    fractions: [f64; 3],
    seed: u64,
    train: &'a [usize],
    validation: &'a [usize],
    test: &'a [usize],
}

#[derive(Serialize)]
struct EigenEntry<'a> {
    instance: &'a str,
    #[serde(flatten)]
    report: &'a EigenReport,
}

/// Plain-text table of initial versus final activations per instance and phi.
pub fn summary_table(bundle: &AuditBundle) -> String {
    let r = &bundle.report;
    let mut out = String::new();
    let _ = writeln!(out, "seed {}  test accuracy {:.4}", r.seed, bundle.test_accuracy);
    let _ = writeln!(out, "best forest: {}", bundle.tuning.best.label());
    let _ = writeln!(out);
    let _ = writeln!(out, "global |SHAP|");
    for id in rank_features(&r.feature_ids, &bundle.global_shap) {
        let j = r.feature_index(&id).expect("known id");
        let _ = writeln!(out, "  {id:<6} {:.6}", bundle.global_shap[j]);
    }
    for inst in &r.instances {
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "{} (class {}, prediction {:.4}, base {:.4})",
            inst.name, inst.class, inst.prediction, inst.base_value
        );
        let mut header = format!("  {:<6} {:>9} {:>5}", "feature", "|SHAP|", "rank");
        for run in &inst.runs {
            let _ = write!(header, " {:>9} {:>5}", format!("phi={}", run.phi), "rank");
        }
        let _ = writeln!(out, "{header}");
        for (j, id) in r.feature_ids.iter().enumerate() {
            let mark = if r.protected.contains(id) { "*" } else { " " };
            let mut line = format!(
                " {mark}{id:<6} {:>9.5} {:>5}",
                inst.initial_activation[j],
                rank_of(&inst.shap_rank, id).unwrap_or(0)
            );
            for run in &inst.runs {
                let _ = write!(
                    line,
                    " {:>9.5} {:>5}",
                    run.normalized_final[j],
                    rank_of(&run.fcm_rank, id).unwrap_or(0)
                );
            }
            let _ = writeln!(out, "{line}");
        }
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "protected deltas (final - initial)");
    for row in protected_delta_summary(r) {
        let deltas: Vec<String> = row
            .phis
            .iter()
            .zip(&row.deltas)
            .map(|(p, d)| format!("phi={p}: {d:+.5}"))
            .collect();
        let _ = writeln!(
            out,
            "  {} {:<6} {}{}",
            row.instance,
            row.feature,
            deltas.join("  "),
            if row.nondecreasing { "" } else { "  (not monotone)" }
        );
    }
    out
}

/// Writes every artifact of `bundle` into `dir` and returns the file paths
/// in write order.
pub fn write_artifacts(cfg: &AuditConfig, bundle: &AuditBundle, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let r = &bundle.report;
    let ids = &r.feature_ids;
    let mut written = Vec::new();

    written.push(write_file(dir, "config.toml", cfg.to_toml_string()?.as_bytes())?);
    let split = SplitSummary {
        fractions: cfg.split.fractions,
        seed: bundle.split.seed,
        train: &bundle.split.train,
        validation: &bundle.split.validation,
        test: &bundle.split.test,
    };
    written.push(write_file(dir, "split.json", to_json(&split)?.as_bytes())?);

    let mut buf = Vec::new();
    bundle.association.matrix.write_csv(&mut buf)?;
    written.push(write_file(dir, "association.csv", &buf)?);
    written.push(write_file(
        dir,
        "association.json",
        bundle.association.matrix.to_json()?.as_bytes(),
    )?);
    written.push(write_file(
        dir,
        "discretization.json",
        to_json(&bundle.association.discretizations)?.as_bytes(),
    )?);

    let mut buf = Vec::new();
    bundle.tuning.write_csv(&mut buf)?;
    written.push(write_file(dir, "tuning.csv", &buf)?);

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["feature", "mean_abs_attribution", "rank"])?;
    let ranking = rank_features(ids, &bundle.global_shap);
    for (id, v) in ids.iter().zip(&bundle.global_shap) {
        w.write_record([
            id.clone(),
            format!("{v}"),
            rank_of(&ranking, id).unwrap_or(0).to_string(),
        ])?;
    }
    let buf = w.into_inner().map_err(|e| Error::Serialize(e.to_string()))?;
    written.push(write_file(dir, "global_shap.csv", &buf)?);

    let seeds = r.stage_seeds;
    let positive = r.positive_class.as_str();
    let mut eigen = Vec::new();
    for ((inst, expl), traces) in r.instances.iter().zip(&bundle.explanations).zip(&bundle.traces) {
        let mut buf = Vec::new();
        expl.write_csv(ids, &mut buf)?;
        written.push(write_file(dir, &format!("shap_{}.csv", inst.name), &buf)?);
        let meta = ShapMetadata {
            instance: &inst.name,
            dataset_row: inst.dataset_row,
            class: &inst.class,
            target_class: positive,
            base_value: expl.base_value,
            prediction: expl.prediction,
            method: expl.method,
            background_size: cfg.shap.background.min(bundle.split.train_validation().len()),
            background_seed: seeds.background,
        };
        written.push(write_file(
            dir,
            &format!("shap_{}.json", inst.name),
            to_json(&meta)?.as_bytes(),
        )?);
        for trace in traces {
            let stem = format!("trace_{}_phi{}", inst.name, trace.config.phi);
            let mut buf = Vec::new();
            trace.write_csv(ids, &mut buf)?;
            written.push(write_file(dir, &format!("{stem}.csv"), &buf)?);
            let side = TraceSidecar {
                instance: &inst.name,
                metadata: trace.metadata(),
            };
            written.push(write_file(dir, &format!("{stem}.json"), to_json(&side)?.as_bytes())?);
        }
        eigen.push(EigenEntry {
            instance: &inst.name,
            report: &inst.eigen,
        });
    }
    written.push(write_file(dir, "eigen.json", to_json(&eigen)?.as_bytes())?);
    written.push(write_file(dir, "bias_report.json", to_json(r)?.as_bytes())?);
    written.push(write_file(
        dir,
        "protected_deltas.json",
        to_json(&protected_delta_summary(r))?.as_bytes(),
    )?);
    written.push(write_file(dir, "summary.txt", summary_table(bundle).as_bytes())?);
    Ok(written)
}
