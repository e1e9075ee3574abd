//! Shapley attributions of a single prediction.
//!
//! Coalition values are interventional: features outside the coalition are
//! filled in from each background row in turn and the model output is
//! averaged. [`exact_shapley`] enumerates every coalition; [`kernel_shap`]
//! fits the Shapley-kernel weighted linear model on enumerated or sampled
//! coalitions with the efficiency constraint imposed exactly.

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::index::sample as sample_indices;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::forest::ForestModel;

/// Default cap on features for exact enumeration.
pub const EXACT_LIMIT: usize = 15;

/// Model output explained by the attributions.
pub trait Predictor {
    fn n_features(&self) -> usize;
    fn predict(&self, row: &[f64], target_class: usize) -> f64;

    /// Mean prediction over `background` of the records taking the features
    /// in `mask` from `instance` and the rest from the background row.
    fn coalition_mean(&self, instance: &[f64], mask: u64, background: &[Vec<f64>], target_class: usize) -> f64 {
        let mut buf = vec![0.0; instance.len()];
        let mut total = 0.0;
        for row in background {
            for (j, b) in buf.iter_mut().enumerate() {
                *b = if mask >> j & 1 == 1 { instance[j] } else { row[j] };
            }
            total += self.predict(&buf, target_class);
        }
        total / background.len() as f64
    }
}

impl Predictor for ForestModel {
    fn n_features(&self) -> usize {
        ForestModel::n_features(self)
    }

    fn predict(&self, row: &[f64], target_class: usize) -> f64 {
        self.class_probability(row, target_class)
    }

    fn coalition_mean(&self, instance: &[f64], mask: u64, background: &[Vec<f64>], target_class: usize) -> f64 {
        self.masked_mean(instance, mask, background, target_class)
    }
}

/// Adapts a closure over feature rows; the target class is ignored.
pub struct FnPredictor<F> {
    n_features: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64> FnPredictor<F> {
    pub fn new(n_features: usize, f: F) -> Self {
        Self { n_features, f }
    }
}

impl<F: Fn(&[f64]) -> f64> Predictor for FnPredictor<F> {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict(&self, row: &[f64], _target_class: usize) -> f64 {
        (self.f)(row)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackgroundSet {
    rows: Vec<Vec<f64>>,
    seed: u64,
}

impl BackgroundSet {
    pub fn new(rows: Vec<Vec<f64>>, seed: u64) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Err(Error::invalid("background set must not be empty"));
        };
        let m = first.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != m) {
            return Err(Error::Dimension {
                expected: m,
                actual: bad.len(),
            });
        }
        Ok(Self { rows, seed })
    }

    /// Seeded draw of `k` distinct rows (all rows when `k >= n`), in
    /// ascending row order.
    pub fn sample(ds: &Dataset, k: usize, seed: u64) -> Result<Self> {
        let n = ds.n_rows();
        let mut idx: Vec<usize> = if k >= n {
            (0..n).collect()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            sample_indices(&mut rng, n, k).into_vec()
        };
        idx.sort_unstable();
        Self::new(idx.iter().map(|&i| ds.row(i).to_vec()).collect(), seed)
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.rows[0].len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelSampling {
    /// Enumerate whole coalition sizes from the outside in while the budget
    /// allows, then sample the remaining sizes.
    Hybrid,
    /// Sample every coalition (in complementary pairs).
    Sampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelOptions {
    /// Coalition budget, counting the empty and full coalitions.
    pub n_coalitions: usize,
    pub seed: u64,
    pub sampling: KernelSampling,
}

impl KernelOptions {
    pub fn new(n_coalitions: usize, seed: u64) -> Self {
        Self {
            n_coalitions,
            seed,
            sampling: KernelSampling::Hybrid,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum ShapMethod {
    Exact,
    Kernel(KernelOptions),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapExplanation {
    pub attributions: Vec<f64>,
    /// Mean background prediction.
    pub base_value: f64,
    pub prediction: f64,
    pub target_class: usize,
    pub method: ShapMethod,
}

impl ShapExplanation {
    /// `sum(attributions) - (prediction - base_value)`.
    pub fn efficiency_gap(&self) -> f64 {
        self.attributions.iter().sum::<f64>() - (self.prediction - self.base_value)
    }

    pub fn abs_attributions(&self) -> Vec<f64> {
        self.attributions.iter().map(|v| v.abs()).collect()
    }

    pub fn write_csv<W: Write>(&self, feature_ids: &[String], writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["feature", "attribution", "abs_attribution"])?;
        for (id, &a) in feature_ids.iter().zip(&self.attributions) {
            w.write_record([id.clone(), format!("{a}"), format!("{}", a.abs())])?;
        }
        w.flush().map_err(|e| Error::io("<shap csv>", e))?;
        Ok(())
    }
}

fn check_inputs<P: Predictor + ?Sized>(pred: &P, instance: &[f64], bg: &BackgroundSet) -> Result<usize> {
    let m = pred.n_features();
    if instance.len() != m {
        return Err(Error::Dimension {
            expected: m,
            actual: instance.len(),
        });
    }
    if bg.n_features() != m {
        return Err(Error::Dimension {
            expected: m,
            actual: bg.n_features(),
        });
    }
    Ok(m)
}

/// Coalition values of one explained instance.
struct CoalitionGame<'a, P: Predictor + ?Sized> {
    pred: &'a P,
    instance: &'a [f64],
    bg: &'a BackgroundSet,
    class: usize,
    full: u64,
}

impl<'a, P: Predictor + ?Sized> CoalitionGame<'a, P> {
    fn new(pred: &'a P, instance: &'a [f64], bg: &'a BackgroundSet, class: usize) -> Self {
        let m = instance.len();
        Self {
            pred,
            instance,
            bg,
            class,
            full: if m == 64 { u64::MAX } else { (1u64 << m) - 1 },
        }
    }

    fn value(&self, mask: u64) -> f64 {
        if mask == self.full {
            return self.pred.predict(self.instance, self.class);
        }
        self.pred
            .coalition_mean(self.instance, mask, self.bg.rows(), self.class)
    }
}

/// Mean prediction over background rows of the record that takes the
/// features in `subset` from `instance` and the rest from the background row.
pub fn marginal_prediction<P: Predictor + ?Sized>(
    pred: &P,
    instance: &[f64],
    subset: &[usize],
    bg: &BackgroundSet,
    target_class: usize,
) -> Result<f64> {
    let m = check_inputs(pred, instance, bg)?;
    if m > 64 {
        return Err(Error::invalid("at most 64 features are supported"));
    }
    let mut mask = 0u64;
    for &j in subset {
        if j >= m {
            return Err(Error::invalid(format!(
                "feature index {j} out of range for {m} features"
            )));
        }
        mask |= 1 << j;
    }
    Ok(CoalitionGame::new(pred, instance, bg, target_class).value(mask))
}

/// `|B|! (m - |B| - 1)! / m!` for `|B| = 0..m`.
fn shapley_weights(m: usize) -> Vec<f64> {
    let ln_fact = |k: usize| (1..=k).map(|i| (i as f64).ln()).sum::<f64>();
    (0..m)
        .map(|s| (ln_fact(s) + ln_fact(m - s - 1) - ln_fact(m)).exp())
        .collect()
}

/// Shapley values by full subset enumeration (`2^m` coalition values).
pub fn exact_shapley<P: Predictor + ?Sized>(
    pred: &P,
    instance: &[f64],
    bg: &BackgroundSet,
    target_class: usize,
) -> Result<ShapExplanation> {
    exact_shapley_with_limit(pred, instance, bg, target_class, EXACT_LIMIT)
}

pub fn exact_shapley_with_limit<P: Predictor + ?Sized>(
    pred: &P,
    instance: &[f64],
    bg: &BackgroundSet,
    target_class: usize,
    limit: usize,
) -> Result<ShapExplanation> {
    let m = check_inputs(pred, instance, bg)?;
    if m > limit || m > 30 {
        return Err(Error::TooManyFeatures {
            features: m,
            limit: limit.min(30),
        });
    }
    let game = CoalitionGame::new(pred, instance, bg, target_class);
    let values: Vec<f64> = (0..1u64 << m).map(|mask| game.value(mask)).collect();
    let weights = shapley_weights(m);
    let mut attributions = vec![0.0; m];
    for (c, phi) in attributions.iter_mut().enumerate() {
        let bit = 1u64 << c;
        for mask in 0..1u64 << m {
            if mask & bit == 0 {
                let s = mask.count_ones() as usize;
                *phi += weights[s] * (values[(mask | bit) as usize] - values[mask as usize]);
            }
        }
    }
    Ok(ShapExplanation {
        attributions,
        base_value: values[0],
        prediction: values[(1usize << m) - 1],
        target_class,
        method: ShapMethod::Exact,
    })
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Shapley kernel weight of a single coalition of size `s` out of `m`.
fn kernel_weight(m: usize, s: usize) -> f64 {
    (m - 1) as f64 / (binomial(m, s) * s as f64 * (m - s) as f64)
}

fn all_of_size(m: usize, s: usize, out: &mut Vec<u64>) {
    let mut idx: Vec<usize> = (0..s).collect();
    loop {
        out.push(idx.iter().fold(0u64, |acc, &j| acc | 1 << j));
        let mut i = s;
        while i > 0 && idx[i - 1] == m - s + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        idx[i - 1] += 1;
        for k in i..s {
            idx[k] = idx[k - 1] + 1;
        }
    }
}

/// Weighted proper coalitions chosen for the regression.
fn choose_coalitions(m: usize, opts: &KernelOptions) -> BTreeMap<u64, f64> {
    let budget = opts.n_coalitions - 2;
    let mut chosen = BTreeMap::new();
    let total_proper = 2f64.powi(m as i32) - 2.0;

    let mut remaining_sizes: Vec<usize> = (1..m).collect();
    if opts.sampling == KernelSampling::Hybrid || (budget as f64) >= total_proper {
        let mut left = budget;
        let mut masks = Vec::new();
        let mut lo = 1;
        while 2 * lo <= m {
            let hi = m - lo;
            let count = if lo == hi {
                binomial(m, lo)
            } else {
                2.0 * binomial(m, lo)
            };
            if count > left as f64 {
                break;
            }
            masks.clear();
            all_of_size(m, lo, &mut masks);
            if hi != lo {
                all_of_size(m, hi, &mut masks);
            }
            for &mask in &masks {
                let s = mask.count_ones() as usize;
                chosen.insert(mask, kernel_weight(m, s));
            }
            left -= count as usize;
            remaining_sizes.retain(|&s| s != lo && s != hi);
            lo += 1;
        }
        if remaining_sizes.is_empty() {
            return chosen;
        }
        sample_sizes(m, &remaining_sizes, left, opts.seed, &mut chosen);
    } else {
        sample_sizes(m, &remaining_sizes, budget, opts.seed, &mut chosen);
    }
    chosen
}

/// Draws `draws` coalitions (as complementary pairs) from the given sizes,
/// sharing their total kernel mass equally; repeated draws add up.
fn sample_sizes(m: usize, sizes: &[usize], draws: usize, seed: u64, chosen: &mut BTreeMap<u64, f64>) {
    if draws == 0 || sizes.is_empty() {
        return;
    }
    let mass: Vec<f64> = sizes.iter().map(|&s| kernel_weight(m, s) * binomial(m, s)).collect();
    let total: f64 = mass.iter().sum();
    let per_draw = total / draws as f64;
    let dist = WeightedIndex::new(&mass).expect("positive kernel mass");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let full = (1u64 << m) - 1;
    let mut taken = 0;
    while taken < draws {
        let s = sizes[dist.sample(&mut rng)];
        let mask = sample_indices(&mut rng, m, s)
            .into_iter()
            .fold(0u64, |acc, j| acc | 1 << j);
        *chosen.entry(mask).or_insert(0.0) += per_draw;
        taken += 1;
        if taken < draws {
            *chosen.entry(full & !mask).or_insert(0.0) += per_draw;
            taken += 1;
        }
    }
}

/// Kernel SHAP with the efficiency constraint enforced by eliminating the
/// last attribution.
pub fn kernel_shap<P: Predictor + ?Sized>(
    pred: &P,
    instance: &[f64],
    bg: &BackgroundSet,
    opts: &KernelOptions,
    target_class: usize,
) -> Result<ShapExplanation> {
    let m = check_inputs(pred, instance, bg)?;
    if m == 0 || m > 62 {
        return Err(Error::invalid(format!("kernel_shap supports 1..=62 features, got {m}")));
    }
    if opts.n_coalitions < m + 2 {
        return Err(Error::invalid(format!(
            "n_coalitions must be at least m + 2 = {}, got {}",
            m + 2,
            opts.n_coalitions
        )));
    }
    let game = CoalitionGame::new(pred, instance, bg, target_class);
    let base_value = game.value(0);
    let prediction = game.value(game.full);
    let delta = prediction - base_value;
    let method = ShapMethod::Kernel(*opts);
    if m == 1 {
        return Ok(ShapExplanation {
            attributions: vec![delta],
            base_value,
            prediction,
            target_class,
            method,
        });
    }

    let coalitions = choose_coalitions(m, opts);
    let p = m - 1;
    let mut xtwx = DMatrix::<f64>::zeros(p, p);
    let mut xtwy = DVector::<f64>::zeros(p);
    let mut x = vec![0.0; p];
    for (&mask, &w) in &coalitions {
        let y = game.value(mask) - base_value;
        let last = (mask >> p & 1) as f64;
        let target = y - last * delta;
        for (j, xj) in x.iter_mut().enumerate() {
            *xj = (mask >> j & 1) as f64 - last;
        }
        for a in 0..p {
            if x[a] == 0.0 {
                continue;
            }
            let wa = w * x[a];
            xtwy[a] += wa * target;
            for b in 0..p {
                xtwx[(a, b)] += wa * x[b];
            }
        }
    }
    let chol = nalgebra::linalg::Cholesky::new(xtwx.clone()).ok_or_else(|| {
        Error::DegenerateRegression(format!(
            "{} sampled coalitions do not determine {m} attributions",
            coalitions.len()
        ))
    })?;
    let diag: Vec<f64> = (0..p).map(|i| chol.l()[(i, i)]).collect();
    let (lo, hi) = diag
        .iter()
        .fold((f64::INFINITY, 0.0_f64), |(lo, hi), &d| (lo.min(d), hi.max(d)));
    if lo.is_nan() || lo <= 1e-7 * hi {
        return Err(Error::DegenerateRegression(format!(
            "ill-conditioned design over {} coalitions",
            coalitions.len()
        )));
    }
    let solved = chol.solve(&xtwy);
    let mut attributions: Vec<f64> = solved.iter().copied().collect();
    let rest: f64 = attributions.iter().sum();
    attributions.push(delta - rest);
    Ok(ShapExplanation {
        attributions,
        base_value,
        prediction,
        target_class,
        method,
    })
}

pub fn explain<P: Predictor + ?Sized>(
    pred: &P,
    instance: &[f64],
    bg: &BackgroundSet,
    target_class: usize,
    method: &ShapMethod,
) -> Result<ShapExplanation> {
    match method {
        ShapMethod::Exact => exact_shapley(pred, instance, bg, target_class),
        ShapMethod::Kernel(opts) => kernel_shap(pred, instance, bg, opts, target_class),
    }
}

/// Mean absolute attribution per feature over `instances`. Kernel runs use
/// seed `opts.seed + i` for instance `i`.
pub fn global_shap<P: Predictor + ?Sized>(
    pred: &P,
    instances: &[Vec<f64>],
    bg: &BackgroundSet,
    target_class: usize,
    method: &ShapMethod,
) -> Result<Vec<f64>> {
    if instances.is_empty() {
        return Err(Error::invalid("global_shap needs at least one instance"));
    }
    let mut total = vec![0.0; pred.n_features()];
    for (i, x) in instances.iter().enumerate() {
        let m = match method {
            ShapMethod::Exact => ShapMethod::Exact,
            ShapMethod::Kernel(o) => ShapMethod::Kernel(KernelOptions {
                seed: o.seed.wrapping_add(i as u64),
                ..*o
            }),
        };
        let e = explain(pred, x, bg, target_class, &m)?;
        for (t, a) in total.iter_mut().zip(&e.attributions) {
            *t += a.abs();
        }
    }
    let n = instances.len() as f64;
    Ok(total.into_iter().map(|t| t / n).collect())
}
