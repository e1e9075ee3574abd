//! Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use fcm_audit::dataset::{Dataset, FeatureSchema};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

pub fn repo_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

/// Textbook fuzzy c-means over points of any dimension, written from the
/// update equations without sharing code with the library:
/// `mu_ij = 1 / sum_k (d_ij / d_ik)^(2 / (alpha - 1))` and
/// `z_j = sum_i mu_ij^alpha x_i / sum_i mu_ij^alpha`.
/// Starts from `init` memberships and mirrors the library's stopping rule
/// (max prototype shift below `tol`).
pub struct ReferenceFcm {
    pub memberships: Vec<Vec<f64>>,
    pub prototypes: Vec<Vec<f64>>,
    pub objective_history: Vec<f64>,
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn reference_prototypes(points: &[Vec<f64>], u: &[Vec<f64>], alpha: f64) -> Vec<Vec<f64>> {
    let c = u[0].len();
    let d = points[0].len();
    (0..c)
        .map(|j| {
            let mut num = vec![0.0; d];
            let mut den = 0.0;
            for (p, row) in points.iter().zip(u) {
                let w = row[j].powf(alpha);
                for (n, x) in num.iter_mut().zip(p) {
                    *n += w * x;
                }
                den += w;
            }
            num.into_iter().map(|n| n / den).collect()
        })
        .collect()
}

fn reference_memberships(points: &[Vec<f64>], z: &[Vec<f64>], alpha: f64) -> Vec<Vec<f64>> {
    let e = 2.0 / (alpha - 1.0);
    points
        .iter()
        .map(|p| {
            let d: Vec<f64> = z.iter().map(|zj| dist(p, zj)).collect();
            if let Some(hit) = d.iter().position(|&x| x == 0.0) {
                let mut row = vec![0.0; z.len()];
                row[hit] = 1.0;
                return row;
            }
            d.iter()
                .map(|&dij| 1.0 / d.iter().map(|&dik| (dij / dik).powf(e)).sum::<f64>())
                .collect()
        })
        .collect()
}

pub fn reference_objective(points: &[Vec<f64>], u: &[Vec<f64>], z: &[Vec<f64>], alpha: f64) -> f64 {
    let mut j = 0.0;
    for (p, row) in points.iter().zip(u) {
        for (mu, zj) in row.iter().zip(z) {
            let d = dist(p, zj);
            j += mu.powf(alpha) * d * d;
        }
    }
    j
}

pub fn reference_fcm(points: &[Vec<f64>], init: Vec<Vec<f64>>, alpha: f64, tol: f64, max_iter: usize) -> ReferenceFcm {
    let mut z = reference_prototypes(points, &init, alpha);
    let mut u = reference_memberships(points, &z, alpha);
    let mut history = vec![reference_objective(points, &u, &z, alpha)];
    for _ in 0..max_iter {
        let next = reference_prototypes(points, &u, alpha);
        let shift = next.iter().zip(&z).map(|(a, b)| dist(a, b)).fold(0.0, f64::max);
        z = next;
        u = reference_memberships(points, &z, alpha);
        history.push(reference_objective(points, &u, &z, alpha));
        if shift < tol {
            break;
        }
    }
    ReferenceFcm {
        memberships: u,
        prototypes: z,
        objective_history: history,
    }
}

pub fn reference_fpc(u: &[Vec<f64>], alpha: f64) -> f64 {
    u.iter().flatten().map(|mu| mu.powf(alpha)).sum::<f64>() / u.len() as f64
}

pub fn as_points(values: &[f64]) -> Vec<Vec<f64>> {
    values.iter().map(|&v| vec![v]).collect()
}

/// Shapley values from the permutation definition: the average marginal
/// contribution of each feature over all orderings. Only for small `m`.
pub fn permutation_shapley(value: &dyn Fn(&[bool]) -> f64, m: usize) -> Vec<f64> {
    fn permutations(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
        if k == items.len() {
            out.push(items.clone());
            return;
        }
        for i in k..items.len() {
            items.swap(k, i);
            permutations(items, k + 1, out);
            items.swap(k, i);
        }
    }
    let mut perms = Vec::new();
    permutations(&mut (0..m).collect(), 0, &mut perms);
    let mut phi = vec![0.0; m];
    for perm in &perms {
        let mut present = vec![false; m];
        let mut prev = value(&present);
        for &j in perm {
            present[j] = true;
            let now = value(&present);
            phi[j] += now - prev;
            prev = now;
        }
    }
    phi.iter().map(|v| v / perms.len() as f64).collect()
}

/// Shapley values by subset enumeration with integer factorial weights.
pub fn subset_shapley(value: &dyn Fn(&[bool]) -> f64, m: usize) -> Vec<f64> {
    let fact = |k: usize| (1..=k as u128).product::<u128>().max(1);
    let total = fact(m) as f64;
    let values: Vec<f64> = (0..1usize << m)
        .map(|mask| {
            let present: Vec<bool> = (0..m).map(|j| mask >> j & 1 == 1).collect();
            value(&present)
        })
        .collect();
    let mut phi = vec![0.0; m];
    for (c, p) in phi.iter_mut().enumerate() {
        for mask in 0..1usize << m {
            if mask >> c & 1 == 1 {
                continue;
            }
            let s = mask.count_ones() as usize;
            let w = (fact(s) * fact(m - s - 1)) as f64 / total;
            *p += w * (values[mask | 1 << c] - values[mask]);
        }
    }
    phi
}

/// Interventional coalition value by explicit hybrid records.
pub fn hybrid_value(f: &dyn Fn(&[f64]) -> f64, instance: &[f64], background: &[Vec<f64>], present: &[bool]) -> f64 {
    if present.iter().all(|&p| p) {
        return f(instance);
    }
    let mut total = 0.0;
    for b in background {
        let row: Vec<f64> = (0..instance.len())
            .map(|j| if present[j] { instance[j] } else { b[j] })
            .collect();
        total += f(&row);
    }
    total / background.len() as f64
}

/// Binary classification data with `m` numeric features in [0, 1]. The
/// label depends on the first two features; `constant` features are set to
/// 0.5 everywhere.
pub fn numeric_classification(n: usize, m: usize, constant: &[usize], seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let schema: Vec<FeatureSchema> = (0..m)
        .map(|j| FeatureSchema::numeric(&format!("x{j}"), &format!("F{}", j + 1)))
        .collect();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..n {
        let mut row: Vec<f64> = (0..m).map(|_| rng.gen::<f64>()).collect();
        for &c in constant {
            row[c] = 0.5;
        }
        let score = row[0] + 0.6 * row[1] + 0.2 * rng.gen::<f64>();
        labels.push(usize::from(score > 0.9));
        rows.push(row);
    }
    Dataset::new(schema, rows, labels, vec!["neg".into(), "pos".into()]).unwrap()
}

/// Noiseless two-feature XOR on the unit square.
pub fn xor_dataset(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let schema = vec![FeatureSchema::numeric("a", "F1"), FeatureSchema::numeric("b", "F2")];
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..n {
        let (a, b): (f64, f64) = (rng.gen(), rng.gen());
        labels.push(usize::from((a > 0.5) != (b > 0.5)));
        rows.push(vec![a, b]);
    }
    Dataset::new(schema, rows, labels, vec!["0".into(), "1".into()]).unwrap()
}

/// Random symmetric matrix with entries in [0, 1].
#[allow(clippy::needless_range_loop)]
pub fn random_symmetric(n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut w = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let v = rng.gen::<f64>();
            w[i][j] = v;
            w[j][i] = v;
        }
    }
    w
}

/// Dominant eigenvector (unit norm, largest-magnitude entry nonnegative)
/// and the two largest eigenvalue magnitudes, via nalgebra.
pub fn nalgebra_dominant(w: &[Vec<f64>]) -> (Vec<f64>, f64, f64) {
    let n = w.len();
    let m = nalgebra::DMatrix::from_fn(n, n, |i, j| w[i][j]);
    let eig = nalgebra::SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].abs().total_cmp(&eig.eigenvalues[a].abs()));
    let k = order[0];
    let mut v: Vec<f64> = (0..n).map(|i| eig.eigenvectors[(i, k)]).collect();
    let lead = v
        .iter()
        .copied()
        .fold(0.0_f64, |b, x| if x.abs() > b.abs() { x } else { b });
    if lead < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    let second = order.get(1).map_or(0.0, |&i| eig.eigenvalues[i].abs());
    (v, eig.eigenvalues[k].abs(), second)
}
