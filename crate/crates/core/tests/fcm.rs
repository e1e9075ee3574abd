mod common;

use common::{nalgebra_dominant, random_symmetric};
use fcm_audit::fcm::{
    eigen_diagnostics, reasoning_step, simulate, symmetric_eigen, transfer, SimulationConfig, Termination,
};
use fcm_audit::matrix::SquareMatrix;
use fcm_audit::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn mat(rows: &[&[f64]]) -> SquareMatrix {
    SquareMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
}

#[test]
fn transfer_examples() {
    let t = transfer(&[1.0, 2.0, 2.0]);
    assert!(t.max_abs_diff(&[1.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0]) < 1e-15);
    assert!(transfer(&[0.0; 4]).is_zero());
    assert!(transfer(&[1e-14, 0.0]).is_zero());
}

#[test]
fn step_by_hand() {
    // A W = (1*1 + 0*0.5, 1*0.5 + 0*1) = (1, 0.5); norm sqrt(1.25).
    let w = mat(&[&[1.0, 0.5], &[0.5, 1.0]]);
    let a0 = [0.0, 1.0];
    let n = 1.25f64.sqrt();
    let s = reasoning_step(&[1.0, 0.0], &a0, &w, 0.6).unwrap();
    assert!(s.max_abs_diff(&[0.6 / n, 0.6 * 0.5 / n + 0.4]) < 1e-14);
}

#[test]
fn phi_zero_returns_initial_state() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let w = SquareMatrix::from_rows(&random_symmetric(5, &mut rng)).unwrap();
    let a0 = [0.3, 0.0, 0.9, 0.1, 0.4];
    let tr = simulate(&w, &a0, &SimulationConfig::with_phi(0.0)).unwrap();
    assert_eq!(tr.termination, Termination::FixedPoint { t_alpha: 0 });
    assert_eq!(tr.last().0, a0.to_vec());
}

#[test]
fn single_step_budget_is_chaos() {
    let w = mat(&[&[0.0, 1.0], &[1.0, 0.0]]);
    let cfg = SimulationConfig {
        max_iter: 1,
        ..SimulationConfig::with_phi(1.0)
    };
    let tr = simulate(&w, &[1.0, 0.0], &cfg).unwrap();
    assert_eq!(tr.termination, Termination::Chaos);
    assert_eq!(tr.states.len(), 2);
}

#[test]
fn annihilating_matrix_flags_zero_raw() {
    let w = mat(&[&[1.0, 1.0], &[-1.0, -1.0]]);
    let tr = simulate(&w, &[1.0, 1.0], &SimulationConfig::with_phi(0.8)).unwrap();
    assert!(tr.hit_zero_discontinuity());
    assert_eq!(tr.zero_raw_steps[0], 1);
    assert!(tr.states[1].max_abs_diff(&[0.2, 0.2]) < 1e-15);
}

#[test]
fn power_iteration_reaches_dominant_eigenvector() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let raw = random_symmetric(6, &mut rng);
    let w = SquareMatrix::from_rows(&raw).unwrap();
    let (v, l1, l2) = nalgebra_dominant(&raw);
    assert!(l1 - l2 > 1e-3);
    let a0: Vec<f64> = (0..6).map(|_| rng.gen::<f64>()).collect();
    let cfg = SimulationConfig {
        fp_tol: 1e-12,
        max_iter: 2000,
        ..SimulationConfig::with_phi(1.0)
    };
    let tr = simulate(&w, &a0, &cfg).unwrap();
    assert!(matches!(tr.termination, Termination::FixedPoint { .. }));
    let sign = if tr.last().iter().zip(&v).map(|(a, b)| a * b).sum::<f64>() < 0.0 {
        -1.0
    } else {
        1.0
    };
    for (a, b) in tr.last().iter().zip(&v) {
        assert!((a - sign * b).abs() < 1e-8);
    }
    let rep = eigen_diagnostics(&w, &a0, 1e-9).unwrap();
    assert!(rep.unique_fixed_point());
    assert!((rep.dominant_value.abs() - l1).abs() < 1e-10);
}

#[test]
fn three_cycle_from_scaled_start() {
    let w = mat(&[&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0], &[1.0, 0.0, 0.0]]);
    let tr = simulate(&w, &[2.0, 0.0, 0.0], &SimulationConfig::with_phi(1.0)).unwrap();
    assert_eq!(tr.termination, Termination::LimitCycle { t_alpha: 1, period: 3 });
    assert_eq!(tr.states[1].0, vec![0.0, 1.0, 0.0]);
}

#[test]
fn replay_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let w = SquareMatrix::from_rows(&random_symmetric(8, &mut rng)).unwrap();
    let a0: Vec<f64> = (0..8).map(|_| rng.gen::<f64>()).collect();
    let cfg = SimulationConfig::with_phi(0.6);
    let a = simulate(&w, &a0, &cfg).unwrap();
    let b = simulate(&w, &a0, &cfg).unwrap();
    assert_eq!(a, b);
    let mut buf_a = Vec::new();
    let mut buf_b = Vec::new();
    let ids: Vec<String> = (1..=8).map(|i| format!("F{i}")).collect();
    a.write_csv(&ids, &mut buf_a).unwrap();
    b.write_csv(&ids, &mut buf_b).unwrap();
    assert_eq!(buf_a, buf_b);
}

#[test]
fn jacobi_matches_nalgebra_spectrum() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in [1, 2, 5, 12] {
        let raw = random_symmetric(n, &mut rng);
        let eig = symmetric_eigen(&SquareMatrix::from_rows(&raw).unwrap()).unwrap();
        let m = nalgebra::DMatrix::from_fn(n, n, |i, j| raw[i][j]);
        let mut expected: Vec<f64> = nalgebra::SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
        expected.sort_by(|a, b| b.abs().total_cmp(&a.abs()));
        for (a, b) in eig.values.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-10, "n={n}: {a} vs {b}");
        }
        let (v, _, _) = nalgebra_dominant(&raw);
        for (a, b) in eig.vectors[0].iter().zip(&v) {
            assert!((a - b).abs() < 1e-8);
        }
    }
}

#[test]
fn non_symmetric_matrix_is_rejected() {
    let w = mat(&[&[0.0, 1.0], &[0.5, 0.0]]);
    assert!(matches!(
        eigen_diagnostics(&w, &[1.0, 0.0], 1e-9),
        Err(Error::NotSymmetric(_))
    ));
}

#[test]
fn invalid_inputs() {
    let w = SquareMatrix::identity(2);
    assert!(simulate(&w, &[1.0], &SimulationConfig::default()).is_err());
    assert!(simulate(&w, &[1.0, 0.0], &SimulationConfig::with_phi(1.5)).is_err());
    assert!(simulate(&w, &[f64::NAN, 0.0], &SimulationConfig::default()).is_err());
}

proptest! {
    #[test]
    fn phi_one_states_live_on_unit_sphere(
        seed in any::<u64>(),
        a0 in prop::collection::vec(0.01f64..1.0, 6),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = SquareMatrix::from_rows(&random_symmetric(6, &mut rng)).unwrap();
        let tr = simulate(&w, &a0, &SimulationConfig::with_phi(1.0)).unwrap();
        for s in &tr.states[1..] {
            prop_assert!((s.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn states_stay_in_convex_bound(
        seed in any::<u64>(),
        phi in 0.0f64..=1.0,
        a0 in prop::collection::vec(-1.0f64..1.0, 5),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = SquareMatrix::from_rows(&random_symmetric(5, &mut rng)).unwrap();
        let tr = simulate(&w, &a0, &SimulationConfig::with_phi(phi)).unwrap();
        let bound = phi + (1.0 - phi) * a0.iter().map(|v| v * v).sum::<f64>().sqrt();
        for s in &tr.states[1..] {
            prop_assert!(s.norm() <= bound + 1e-12);
        }
    }
}
