//! Random forest classifier over mixed numeric/nominal features.
//!
//! Each tree is grown on a bootstrap sample of the training rows. At every
//! node a random subset of features is scored: numeric features by
//! thresholds at midpoints between consecutive distinct values, nominal
//! features by one-vs-rest category tests. Tree `i` draws all of its
//! randomness from `(seed, i)`, so a forest of `k` trees is exactly the
//! first `k` trees of any larger forest with the same settings.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, FeatureKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitCriterion {
    Gini,
    Entropy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaxFeatures {
    Sqrt,
    Log2,
    All,
}

impl MaxFeatures {
    /// Number of features scored per node for `m` features.
    pub fn resolve(self, m: usize) -> usize {
        let k = match self {
            MaxFeatures::Sqrt => (m as f64).sqrt().ceil() as usize,
            MaxFeatures::Log2 => (m as f64).log2().ceil() as usize,
            MaxFeatures::All => m,
        };
        k.clamp(1, m.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_estimators: usize,
    pub criterion: SplitCriterion,
    pub max_features: MaxFeatures,
    pub seed: u64,
    #[serde(default)]
    pub max_depth: Option<usize>,
    #[serde(default = "default_min_leaf")]
    pub min_samples_leaf: usize,
}

fn default_min_leaf() -> usize {
    1
}

impl ForestConfig {
    pub fn new(n_estimators: usize, criterion: SplitCriterion, max_features: MaxFeatures, seed: u64) -> Self {
        Self {
            n_estimators,
            criterion,
            max_features,
            seed,
            max_depth: None,
            min_samples_leaf: 1,
        }
    }

    /// Estimators {100, 500, 1000} x {gini, entropy} x {sqrt, log2}.
    pub fn default_grid(seed: u64) -> Vec<ForestConfig> {
        let mut grid = Vec::new();
        for n in [100, 500, 1000] {
            for criterion in [SplitCriterion::Gini, SplitCriterion::Entropy] {
                for mf in [MaxFeatures::Sqrt, MaxFeatures::Log2] {
                    grid.push(ForestConfig::new(n, criterion, mf, seed));
                }
            }
        }
        grid
    }

    pub fn label(&self) -> String {
        format!(
            "n={} criterion={:?} max_features={:?}",
            self.n_estimators, self.criterion, self.max_features
        )
        .to_lowercase()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        /// Offset into the tree's `leaf_probs`.
        probs: usize,
    },
    Threshold {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Category {
        feature: usize,
        category: usize,
        /// Rows equal to `category`.
        left: usize,
        right: usize,
    },
}

#[derive(Clone, Copy)]
enum SplitTest {
    Le(f64),
    Is(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
    pub leaf_probs: Vec<f64>,
}

impl Tree {
    #[inline]
    fn leaf_offset(&self, row: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { probs } => return probs,
                Node::Threshold {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[feature] <= threshold { left } else { right },
                Node::Category {
                    feature,
                    category,
                    left,
                    right,
                } => i = if row[feature] as usize == category { left } else { right },
            }
        }
    }

    /// Sum over `rows` of the class probability reached by the record that
    /// takes the features in `mask` from `instance` and the rest from the
    /// background row. Rows are only split at nodes testing features
    /// outside `mask`.
    fn masked_sum(
        &self,
        start: usize,
        instance: &[f64],
        mask: u64,
        background: &[Vec<f64>],
        rows: &mut [u32],
        class: usize,
    ) -> f64 {
        let mut i = start;
        loop {
            let (feature, test, left, right) = match self.nodes[i] {
                Node::Leaf { probs } => return self.leaf_probs[probs + class] * rows.len() as f64,
                Node::Threshold {
                    feature,
                    threshold,
                    left,
                    right,
                } => (feature, SplitTest::Le(threshold), left, right),
                Node::Category {
                    feature,
                    category,
                    left,
                    right,
                } => (feature, SplitTest::Is(category), left, right),
            };
            let goes_left = |v: f64| match test {
                SplitTest::Le(t) => v <= t,
                SplitTest::Is(c) => v as usize == c,
            };
            if mask >> feature & 1 == 1 {
                i = if goes_left(instance[feature]) { left } else { right };
                continue;
            }
            let mut split = 0;
            for k in 0..rows.len() {
                if goes_left(background[rows[k] as usize][feature]) {
                    rows.swap(split, k);
                    split += 1;
                }
            }
            let (l, r) = rows.split_at_mut(split);
            let mut sum = 0.0;
            if !l.is_empty() {
                sum += self.masked_sum(left, instance, mask, background, l, class);
            }
            if !r.is_empty() {
                sum += self.masked_sum(right, instance, mask, background, r, class);
            }
            return sum;
        }
    }

    pub fn leaf_probabilities(&self, row: &[f64], n_classes: usize) -> &[f64] {
        let o = self.leaf_offset(row);
        &self.leaf_probs[o..o + n_classes]
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub config: ForestConfig,
    pub classes: Vec<String>,
    pub feature_kinds: Vec<FeatureKind>,
    pub trees: Vec<Tree>,
}

impl ForestModel {
    pub fn n_features(&self) -> usize {
        self.feature_kinds.len()
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    fn check_row(&self, row: &[f64]) -> Result<()> {
        if row.len() != self.n_features() {
            return Err(Error::Dimension {
                expected: self.n_features(),
                actual: row.len(),
            });
        }
        Ok(())
    }

    /// Mean of the trees' leaf class distributions.
    pub fn predict_proba(&self, row: &[f64]) -> Result<Vec<f64>> {
        self.check_row(row)?;
        let k = self.n_classes();
        let mut out = vec![0.0; k];
        for t in &self.trees {
            for (o, p) in out.iter_mut().zip(t.leaf_probabilities(row, k)) {
                *o += p;
            }
        }
        let n = self.trees.len() as f64;
        out.iter_mut().for_each(|v| *v /= n);
        Ok(out)
    }

    /// Probability of one class; no row validation.
    #[inline]
    pub fn class_probability(&self, row: &[f64], class: usize) -> f64 {
        let s: f64 = self
            .trees
            .iter()
            .map(|t| t.leaf_probs[t.leaf_offset(row) + class])
            .sum();
        s / self.trees.len() as f64
    }

    /// Mean class probability over background rows of the hybrid records
    /// taking the features in `mask` from `instance`; no validation.
    pub fn masked_mean(&self, instance: &[f64], mask: u64, background: &[Vec<f64>], class: usize) -> f64 {
        let mut rows: Vec<u32> = (0..background.len() as u32).collect();
        let total: f64 = self
            .trees
            .iter()
            .map(|t| t.masked_sum(0, instance, mask, background, &mut rows, class))
            .sum();
        total / (self.trees.len() * background.len()) as f64
    }

    /// Most probable class, lowest index on ties.
    pub fn predict(&self, row: &[f64]) -> Result<usize> {
        Ok(argmax(&self.predict_proba(row)?))
    }

    pub fn accuracy(&self, ds: &Dataset) -> Result<f64> {
        let mut correct = 0usize;
        for (row, &label) in ds.rows().iter().zip(ds.labels()) {
            if self.predict(row)? == label {
                correct += 1;
            }
        }
        Ok(correct as f64 / ds.n_rows() as f64)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Serialize(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Serialize(e.to_string()))
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

struct TrainingData<'a> {
    rows: &'a [Vec<f64>],
    labels: &'a [usize],
    kinds: &'a [FeatureKind],
    n_categories: Vec<usize>,
    n_classes: usize,
}

fn impurity(counts: &[f64], total: f64, criterion: SplitCriterion) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    match criterion {
        SplitCriterion::Gini => 1.0 - counts.iter().map(|&c| (c / total) * (c / total)).sum::<f64>(),
        SplitCriterion::Entropy => -counts
            .iter()
            .filter(|&&c| c > 0.0)
            .map(|&c| {
                let p = c / total;
                p * p.log2()
            })
            .sum::<f64>(),
    }
}

#[derive(Clone, Copy)]
struct Split {
    gain: f64,
    node: Node,
}

const MIN_GAIN: f64 = 1e-12;

struct TreeBuilder<'a> {
    data: &'a TrainingData<'a>,
    cfg: &'a ForestConfig,
    mtry: usize,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
    leaf_probs: Vec<f64>,
}

impl<'a> TreeBuilder<'a> {
    fn class_counts(&self, samples: &[usize]) -> Vec<f64> {
        let mut counts = vec![0.0; self.data.n_classes];
        for &i in samples {
            counts[self.data.labels[i]] += 1.0;
        }
        counts
    }

    fn push_leaf(&mut self, counts: &[f64]) -> usize {
        let total: f64 = counts.iter().sum();
        let offset = self.leaf_probs.len();
        self.leaf_probs.extend(counts.iter().map(|c| c / total));
        self.nodes.push(Node::Leaf { probs: offset });
        self.nodes.len() - 1
    }

    fn build(&mut self, samples: &mut [usize], depth: usize) -> usize {
        let counts = self.class_counts(samples);
        let n = samples.len() as f64;
        let pure = counts.iter().filter(|&&c| c > 0.0).count() <= 1;
        let depth_reached = self.cfg.max_depth.is_some_and(|d| depth >= d);
        if pure || depth_reached || samples.len() < 2 * self.cfg.min_samples_leaf {
            return self.push_leaf(&counts);
        }
        let parent = impurity(&counts, n, self.cfg.criterion);
        let Some(split) = self.best_split(samples, &counts, parent) else {
            return self.push_leaf(&counts);
        };

        let goes_left = |row: &[f64]| match split.node {
            Node::Threshold { feature, threshold, .. } => row[feature] <= threshold,
            Node::Category { feature, category, .. } => row[feature] as usize == category,
            Node::Leaf { .. } => unreachable!(),
        };
        let mut mid = 0;
        for k in 0..samples.len() {
            if goes_left(&self.data.rows[samples[k]]) {
                samples.swap(k, mid);
                mid += 1;
            }
        }
        let id = self.nodes.len();
        self.nodes.push(split.node);
        let (l, r) = samples.split_at_mut(mid);
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        match &mut self.nodes[id] {
            Node::Threshold { left: a, right: b, .. } | Node::Category { left: a, right: b, .. } => {
                *a = left;
                *b = right;
            }
            Node::Leaf { .. } => unreachable!(),
        }
        id
    }

    /// Scores features in random order until `mtry` non-constant ones have
    /// been examined.
    fn best_split(&mut self, samples: &[usize], counts: &[f64], parent: f64) -> Option<Split> {
        let m = self.data.kinds.len();
        let mut features: Vec<usize> = (0..m).collect();
        features.shuffle(&mut self.rng);
        let mut examined = 0;
        let mut best: Option<Split> = None;
        for &f in &features {
            if examined >= self.mtry {
                break;
            }
            let candidate = match self.data.kinds[f] {
                FeatureKind::Numeric => self.numeric_split(samples, counts, parent, f),
                FeatureKind::Nominal => self.nominal_split(samples, counts, parent, f),
            };
            let Some(candidate) = candidate else { continue };
            examined += 1;
            if let Some(s) = candidate {
                if best.is_none_or(|b| s.gain > b.gain) {
                    best = Some(s);
                }
            }
        }
        best.filter(|b| b.gain > MIN_GAIN)
    }

    /// `None` when the feature is constant in the node, `Some(None)` when no
    /// admissible threshold exists.
    fn numeric_split(&self, samples: &[usize], counts: &[f64], parent: f64, f: usize) -> Option<Option<Split>> {
        let rows = self.data.rows;
        let mut pairs: Vec<(f64, usize)> = samples.iter().map(|&i| (rows[i][f], self.data.labels[i])).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        if pairs[0].0 == pairs[pairs.len() - 1].0 {
            return None;
        }
        let n = pairs.len();
        let total = n as f64;
        let min_leaf = self.cfg.min_samples_leaf;
        let mut left = vec![0.0; counts.len()];
        let mut right = counts.to_vec();
        let mut best: Option<Split> = None;
        for k in 0..n - 1 {
            let c = pairs[k].1;
            left[c] += 1.0;
            right[c] -= 1.0;
            if pairs[k].0 == pairs[k + 1].0 {
                continue;
            }
            let nl = k + 1;
            if nl < min_leaf || n - nl < min_leaf {
                continue;
            }
            let (nl, nr) = (nl as f64, (n - nl) as f64);
            let gain = parent
                - nl / total * impurity(&left, nl, self.cfg.criterion)
                - nr / total * impurity(&right, nr, self.cfg.criterion);
            if best.is_none_or(|b| gain > b.gain) {
                best = Some(Split {
                    gain,
                    node: Node::Threshold {
                        feature: f,
                        threshold: 0.5 * (pairs[k].0 + pairs[k + 1].0),
                        left: 0,
                        right: 0,
                    },
                });
            }
        }
        Some(best)
    }

    fn nominal_split(&self, samples: &[usize], counts: &[f64], parent: f64, f: usize) -> Option<Option<Split>> {
        let k = counts.len();
        let n_cat = self.data.n_categories[f];
        let mut per_cat = vec![0.0; n_cat * k];
        let mut cat_total = vec![0usize; n_cat];
        for &i in samples {
            let c = self.data.rows[i][f] as usize;
            per_cat[c * k + self.data.labels[i]] += 1.0;
            cat_total[c] += 1;
        }
        if cat_total.iter().filter(|&&t| t > 0).count() < 2 {
            return None;
        }
        let n = samples.len();
        let total = n as f64;
        let min_leaf = self.cfg.min_samples_leaf;
        let mut best: Option<Split> = None;
        let mut right = vec![0.0; k];
        for (cat, &nl) in cat_total.iter().enumerate() {
            if nl == 0 || nl < min_leaf || n - nl < min_leaf {
                continue;
            }
            let left = &per_cat[cat * k..(cat + 1) * k];
            for ((r, &c), &l) in right.iter_mut().zip(counts).zip(left) {
                *r = c - l;
            }
            let (nl, nr) = (nl as f64, (n - nl) as f64);
            let gain = parent
                - nl / total * impurity(left, nl, self.cfg.criterion)
                - nr / total * impurity(&right, nr, self.cfg.criterion);
            if best.is_none_or(|b| gain > b.gain) {
                best = Some(Split {
                    gain,
                    node: Node::Category {
                        feature: f,
                        category: cat,
                        left: 0,
                        right: 0,
                    },
                });
            }
        }
        Some(best)
    }
}

fn tree_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn grow_tree(data: &TrainingData<'_>, cfg: &ForestConfig, index: usize) -> Tree {
    let mut rng = tree_rng(cfg.seed, index);
    let n = data.rows.len();
    let mut samples: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
    let mut builder = TreeBuilder {
        data,
        cfg,
        mtry: cfg.max_features.resolve(data.kinds.len()),
        rng,
        nodes: Vec::new(),
        leaf_probs: Vec::new(),
    };
    builder.build(&mut samples, 0);
    Tree {
        nodes: builder.nodes,
        leaf_probs: builder.leaf_probs,
    }
}

fn training_data<'a>(train: &'a Dataset, kinds: &'a [FeatureKind]) -> TrainingData<'a> {
    TrainingData {
        rows: train.rows(),
        labels: train.labels(),
        kinds,
        n_categories: train.schema().iter().map(|f| f.categories.len()).collect(),
        n_classes: train.n_classes(),
    }
}

pub fn fit_forest(train: &Dataset, cfg: &ForestConfig) -> Result<ForestModel> {
    if cfg.n_estimators == 0 {
        return Err(Error::invalid("n_estimators must be at least 1"));
    }
    if train.n_rows() == 0 {
        return Err(Error::NoRows("training view".into()));
    }
    let kinds: Vec<FeatureKind> = train.schema().iter().map(|f| f.kind).collect();
    let data = training_data(train, &kinds);
    let trees = (0..cfg.n_estimators).map(|i| grow_tree(&data, cfg, i)).collect();
    Ok(ForestModel {
        config: *cfg,
        classes: train.class_names().to_vec(),
        feature_kinds: kinds,
        trees,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningScore {
    pub config: ForestConfig,
    pub validation_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningReport {
    pub best: ForestConfig,
    pub scores: Vec<TuningScore>,
}

impl TuningReport {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "n_estimators",
            "criterion",
            "max_features",
            "seed",
            "max_depth",
            "validation_accuracy",
        ])?;
        for s in &self.scores {
            let c = &s.config;
            w.write_record([
                c.n_estimators.to_string(),
                format!("{:?}", c.criterion).to_lowercase(),
                format!("{:?}", c.max_features).to_lowercase(),
                c.seed.to_string(),
                c.max_depth.map_or(String::new(), |d| d.to_string()),
                format!("{}", s.validation_accuracy),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<tuning csv>", e))?;
        Ok(())
    }
}

/// Validation accuracy of every grid entry; the first best entry wins.
///
/// Entries that differ only in `n_estimators` (or whose feature rules
/// resolve to the same count) share one grown forest and are scored on its
/// prefixes, which is identical to fitting them separately.
pub fn tune(train: &Dataset, validation: &Dataset, grid: &[ForestConfig]) -> Result<TuningReport> {
    if grid.is_empty() {
        return Err(Error::invalid("empty tuning grid"));
    }
    if train.n_rows() == 0 || validation.n_rows() == 0 {
        return Err(Error::NoRows("tuning views".into()));
    }
    let m = train.n_features();
    let kinds: Vec<FeatureKind> = train.schema().iter().map(|f| f.kind).collect();
    let data = training_data(train, &kinds);
    let group_key = |c: &ForestConfig| {
        (
            c.criterion,
            c.max_features.resolve(m),
            c.seed,
            c.max_depth,
            c.min_samples_leaf,
        )
    };
    let mut accuracy = vec![f64::NAN; grid.len()];
    let mut done = vec![false; grid.len()];
    for g in 0..grid.len() {
        if done[g] {
            continue;
        }
        let key = group_key(&grid[g]);
        let members: Vec<usize> = (g..grid.len())
            .filter(|&i| !done[i] && group_key(&grid[i]) == key)
            .collect();
        let largest = members.iter().map(|&i| grid[i].n_estimators).max().unwrap_or(0);
        if largest == 0 {
            return Err(Error::invalid("n_estimators must be at least 1"));
        }
        let cfg = ForestConfig {
            n_estimators: largest,
            ..grid[g]
        };
        let k = train.n_classes();
        let mut sums = vec![0.0; validation.n_rows() * k];
        for t in 0..largest {
            let tree = grow_tree(&data, &cfg, t);
            for (r, row) in validation.rows().iter().enumerate() {
                for (s, p) in sums[r * k..(r + 1) * k].iter_mut().zip(tree.leaf_probabilities(row, k)) {
                    *s += p;
                }
            }
            for &i in &members {
                if grid[i].n_estimators == t + 1 {
                    let correct = validation
                        .labels()
                        .iter()
                        .enumerate()
                        .filter(|&(r, &l)| argmax(&sums[r * k..(r + 1) * k]) == l)
                        .count();
                    accuracy[i] = correct as f64 / validation.n_rows() as f64;
                    done[i] = true;
                }
            }
        }
    }
    let mut best = 0;
    for i in 1..grid.len() {
        if accuracy[i] > accuracy[best] {
            best = i;
        }
    }
    Ok(TuningReport {
        best: grid[best],
        scores: grid
            .iter()
            .zip(&accuracy)
            .map(|(c, &a)| TuningScore {
                config: *c,
                validation_accuracy: a,
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::FeatureSchema;

    fn single_class() -> Dataset {
        let rows = (0..20).map(|i| vec![i as f64, (i % 3) as f64]).collect();
        let schema = vec![
            FeatureSchema::numeric("x", "F1"),
            FeatureSchema::nominal("c", "F2", &["a", "b", "c"]),
        ];
        Dataset::new(schema, rows, vec![0; 20], vec!["only".into()]).unwrap()
    }

    #[test]
    fn single_class_is_certain() {
        let cfg = ForestConfig::new(5, SplitCriterion::Gini, MaxFeatures::Sqrt, 1);
        let f = fit_forest(&single_class(), &cfg).unwrap();
        assert_eq!(f.predict_proba(&[3.0, 1.0]).unwrap(), vec![1.0]);
        assert!(f.trees.iter().all(|t| t.nodes.len() == 1));
    }

    #[test]
    fn averaging_two_trees() {
        let leaf = |p: Vec<f64>| Tree {
            nodes: vec![Node::Leaf { probs: 0 }],
            leaf_probs: p,
        };
        let model = ForestModel {
            config: ForestConfig::new(2, SplitCriterion::Gini, MaxFeatures::Sqrt, 0),
            classes: vec!["a".into(), "b".into()],
            feature_kinds: vec![FeatureKind::Numeric],
            trees: vec![leaf(vec![1.0, 0.0]), leaf(vec![0.0, 1.0])],
        };
        assert_eq!(model.predict_proba(&[0.0]).unwrap(), vec![0.5, 0.5]);
        assert!(model.predict_proba(&[0.0, 1.0]).is_err());
        let one = ForestModel {
            trees: vec![leaf(vec![0.0, 1.0])],
            ..model
        };
        assert_eq!(one.predict_proba(&[7.0]).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn feature_rule_resolution() {
        assert_eq!(MaxFeatures::Sqrt.resolve(20), 5);
        assert_eq!(MaxFeatures::Log2.resolve(20), 5);
        assert_eq!(MaxFeatures::Sqrt.resolve(14), 4);
        assert_eq!(MaxFeatures::Log2.resolve(14), 4);
        assert_eq!(MaxFeatures::Log2.resolve(1), 1);
        assert_eq!(MaxFeatures::Sqrt.resolve(2), 2);
    }

    #[test]
    fn impurities() {
        assert!((impurity(&[5.0, 5.0], 10.0, SplitCriterion::Gini) - 0.5).abs() < 1e-12);
        assert!((impurity(&[5.0, 5.0], 10.0, SplitCriterion::Entropy) - 1.0).abs() < 1e-12);
        assert_eq!(impurity(&[10.0, 0.0], 10.0, SplitCriterion::Entropy), 0.0);
    }

    #[test]
    fn default_grid_has_twelve_entries() {
        assert_eq!(ForestConfig::default_grid(0).len(), 12);
    }

    #[test]
    fn model_json_round_trip() {
        let cfg = ForestConfig::new(3, SplitCriterion::Entropy, MaxFeatures::Sqrt, 4);
        let mut ds_rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..40 {
            ds_rows.push(vec![i as f64, (i % 2) as f64]);
            labels.push(usize::from(i >= 20));
        }
        let schema = vec![
            FeatureSchema::numeric("x", "F1"),
            FeatureSchema::nominal("c", "F2", &["a", "b"]),
        ];
        let ds = Dataset::new(schema, ds_rows, labels, vec!["n".into(), "p".into()]).unwrap();
        let f = fit_forest(&ds, &cfg).unwrap();
        assert_eq!(ForestModel::from_json(&f.to_json().unwrap()).unwrap(), f);
    }
}
