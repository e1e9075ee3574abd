//! Quasi-nonlinear fuzzy cognitive map.
//!
//! The state evolves as `A(t+1) = phi * f(A(t) W) + (1 - phi) * A(0)` where
//! `f` projects the raw activation onto the unit sphere (and maps the zero
//! vector to itself). With `phi = 1` the map is a normalized power iteration
//! and converges to the dominant eigenvector when that eigenvalue is strictly
//! dominant and `A(0)` has a component along it.

mod eigen;

use std::io::Write;
use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

pub use eigen::{eigen_diagnostics, symmetric_eigen, EigenReport, SymmetricEigen};

use crate::error::{Error, Result};
use crate::matrix::SquareMatrix;

/// Raw activations with a Euclidean norm below this are treated as the zero vector.
pub const ZERO_NORM: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActivationVector(pub Vec<f64>);

impl ActivationVector {
    pub fn zeros(m: usize) -> Self {
        Self(vec![0.0; m])
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.0)
    }

    pub fn max_abs_diff(&self, other: &[f64]) -> f64 {
        self.0.iter().zip(other).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }
}

impl From<Vec<f64>> for ActivationVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl Deref for ActivationVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for ActivationVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Re-scaled transfer function: `raw / ||raw||_2`, or zero for a zero input.
pub fn transfer(raw: &[f64]) -> ActivationVector {
    let norm = l2_norm(raw);
    if norm < ZERO_NORM {
        ActivationVector::zeros(raw.len())
    } else {
        ActivationVector(raw.iter().map(|v| v / norm).collect())
    }
}

/// One application of the reasoning rule.
pub fn reasoning_step(a_t: &[f64], a_0: &[f64], w: &SquareMatrix, phi: f64) -> Result<ActivationVector> {
    Ok(step_with_raw(a_t, a_0, w, phi)?.0)
}

fn step_with_raw(a_t: &[f64], a_0: &[f64], w: &SquareMatrix, phi: f64) -> Result<(ActivationVector, Vec<f64>)> {
    if !(0.0..=1.0).contains(&phi) {
        return Err(Error::invalid(format!("phi must lie in [0, 1], got {phi}")));
    }
    if a_0.len() != w.dim() {
        return Err(Error::Dimension {
            expected: w.dim(),
            actual: a_0.len(),
        });
    }
    let raw = w.left_mul(a_t)?;
    let f = transfer(&raw);
    let next = f
        .iter()
        .zip(a_0)
        .map(|(&fv, &a0)| phi * fv + (1.0 - phi) * a0)
        .collect();
    Ok((ActivationVector(next), raw))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub phi: f64,
    /// Maximum number of reasoning steps `T`.
    pub max_iter: usize,
    /// Fixed-point and cycle tolerance on the infinity norm.
    pub fp_tol: f64,
    /// Longest cycle period searched.
    pub cycle_window: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            phi: 0.8,
            max_iter: 100,
            fp_tol: 1e-6,
            cycle_window: 20,
        }
    }
}

impl SimulationConfig {
    pub fn with_phi(phi: f64) -> Self {
        Self { phi, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.phi) {
            return Err(Error::invalid(format!("phi must lie in [0, 1], got {}", self.phi)));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be at least 1"));
        }
        if self.fp_tol.is_nan() || self.fp_tol <= 0.0 {
            return Err(Error::invalid("fp_tol must be positive"));
        }
        if self.cycle_window < 2 {
            return Err(Error::invalid("cycle_window must be at least 2"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Termination {
    /// States repeat from `t_alpha` on.
    FixedPoint { t_alpha: usize },
    /// States repeat with period `period` from `t_alpha` on.
    LimitCycle { t_alpha: usize, period: usize },
    /// No fixed point or cycle within the iteration budget.
    Chaos,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationTrace {
    pub config: SimulationConfig,
    /// `A(0) ..= A(t_end)`.
    pub states: Vec<ActivationVector>,
    /// `raw_states[t - 1] = A(t - 1) W` for `t >= 1`.
    pub raw_states: Vec<Vec<f64>>,
    pub termination: Termination,
    /// Steps `t` whose raw vector hit the transfer-function discontinuity at zero.
    pub zero_raw_steps: Vec<usize>,
}

impl SimulationTrace {
    pub fn initial(&self) -> &ActivationVector {
        &self.states[0]
    }

    pub fn last(&self) -> &ActivationVector {
        self.states.last().expect("trace holds A(0)")
    }

    pub fn t_end(&self) -> usize {
        self.states.len() - 1
    }

    /// True when a raw activation vector was (numerically) zero at some step.
    pub fn hit_zero_discontinuity(&self) -> bool {
        !self.zero_raw_steps.is_empty()
    }

    /// One row per iteration: `t` followed by one column per neuron.
    pub fn write_csv<W: Write>(&self, feature_ids: &[String], writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["t".to_string()];
        header.extend(feature_ids.iter().cloned());
        w.write_record(&header)?;
        for (t, s) in self.states.iter().enumerate() {
            let mut rec = vec![t.to_string()];
            rec.extend(s.iter().map(|v| format!("{v}")));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<trace csv>", e))?;
        Ok(())
    }

    /// Termination metadata for the sidecar file.
    pub fn metadata(&self) -> TraceMetadata {
        TraceMetadata {
            config: self.config,
            termination: self.termination,
            t_end: self.t_end(),
            zero_raw_steps: self.zero_raw_steps.clone(),
            final_state: self.last().clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMetadata {
    pub config: SimulationConfig,
    pub termination: Termination,
    pub t_end: usize,
    pub zero_raw_steps: Vec<usize>,
    pub final_state: ActivationVector,
}

/// Iterates the reasoning rule from `a_0` until a fixed point, a cycle of
/// period at most `cycle_window`, or `max_iter` steps.
pub fn simulate(w: &SquareMatrix, a_0: &[f64], cfg: &SimulationConfig) -> Result<SimulationTrace> {
    cfg.validate()?;
    if a_0.len() != w.dim() {
        return Err(Error::Dimension {
            expected: w.dim(),
            actual: a_0.len(),
        });
    }
    if a_0.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("initial activation has non-finite entries"));
    }
    let mut states = vec![ActivationVector(a_0.to_vec())];
    let mut raw_states = Vec::new();
    let mut zero_raw_steps = Vec::new();
    let mut termination = Termination::Chaos;

    for t in 1..=cfg.max_iter {
        let (next, raw) = step_with_raw(&states[t - 1], a_0, w, cfg.phi)?;
        if l2_norm(&raw) < ZERO_NORM {
            zero_raw_steps.push(t);
        }
        raw_states.push(raw);
        states.push(next);

        if states[t].max_abs_diff(&states[t - 1]) < cfg.fp_tol {
            termination = Termination::FixedPoint { t_alpha: t - 1 };
            break;
        }
        if let Some(period) = detect_cycle(&states, cfg) {
            termination = Termination::LimitCycle {
                t_alpha: t + 1 - 2 * period,
                period,
            };
            break;
        }
    }
    Ok(SimulationTrace {
        config: *cfg,
        states,
        raw_states,
        termination,
        zero_raw_steps,
    })
}

/// Smallest period `p` such that the last `p` states each repeat the state
/// `p` steps earlier.
fn detect_cycle(states: &[ActivationVector], cfg: &SimulationConfig) -> Option<usize> {
    let t = states.len() - 1;
    (2..=cfg.cycle_window)
        .take_while(|&p| t + 1 >= 2 * p)
        .find(|&p| (0..p).all(|k| states[t - k].max_abs_diff(&states[t - k - p]) < cfg.fp_tol))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn swap() -> SquareMatrix {
        SquareMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()
    }

    #[test]
    fn transfer_normalizes() {
        let out = transfer(&[3.0, 4.0]);
        assert!((out[0] - 0.6).abs() < 1e-12 && (out[1] - 0.8).abs() < 1e-12);
        assert_eq!(transfer(&[0.0, 0.0, 0.0]).0, vec![0.0; 3]);
        let unit = [0.6, 0.0, 0.8];
        assert!(transfer(&unit).max_abs_diff(&unit) < 1e-15);
    }

    #[test]
    fn hand_computed_steps() {
        let w = swap();
        let a0 = [0.3, 0.1];
        assert_eq!(reasoning_step(&[0.9, 0.2], &a0, &w, 0.0).unwrap().0, a0.to_vec());
        let s = reasoning_step(&[1.0, 0.0], &[1.0, 0.0], &w, 1.0).unwrap();
        assert!(s.max_abs_diff(&[0.0, 1.0]) < 1e-12);
        let s = reasoning_step(&[1.0, 0.0], &[1.0, 0.0], &w, 0.5).unwrap();
        assert!(s.max_abs_diff(&[0.5, 0.5]) < 1e-12);
    }

    #[test]
    fn dimension_and_phi_checks() {
        let w = swap();
        assert!(reasoning_step(&[1.0], &[1.0, 0.0], &w, 0.5).is_err());
        assert!(reasoning_step(&[1.0, 0.0], &[1.0, 0.0], &w, 1.5).is_err());
        assert!(simulate(&w, &[1.0], &SimulationConfig::default()).is_err());
    }

    #[test]
    fn phi_zero_collapses_after_one_step() {
        let w = swap();
        let tr = simulate(&w, &[0.2, 0.7], &SimulationConfig::with_phi(0.0)).unwrap();
        assert_eq!(tr.termination, Termination::FixedPoint { t_alpha: 0 });
        assert_eq!(tr.t_end(), 1);
        assert_eq!(tr.states[1], tr.states[0]);
    }

    #[test]
    fn permutation_matrix_cycles_with_period_two() {
        let tr = simulate(&swap(), &[1.0, 0.0], &SimulationConfig::with_phi(1.0)).unwrap();
        assert_eq!(tr.termination, Termination::LimitCycle { t_alpha: 0, period: 2 });
    }

    #[test]
    fn truncation_is_chaos() {
        let w = SquareMatrix::from_rows(&[vec![1.0, 0.5], vec![0.5, 0.2]]).unwrap();
        let cfg = SimulationConfig {
            phi: 0.7,
            max_iter: 1,
            fp_tol: 1e-15,
            cycle_window: 2,
        };
        let tr = simulate(&w, &[0.3, 0.9], &cfg).unwrap();
        assert_eq!(tr.termination, Termination::Chaos);
        assert_eq!(tr.states.len(), 2);
    }

    #[test]
    fn zero_raw_vector_is_flagged() {
        let w = SquareMatrix::from_rows(&[vec![1.0, 1.0], vec![-1.0, -1.0]]).unwrap();
        let tr = simulate(&w, &[1.0, 1.0], &SimulationConfig::with_phi(1.0)).unwrap();
        assert!(tr.hit_zero_discontinuity());
        assert_eq!(tr.zero_raw_steps[0], 1);
        assert!(tr.last().is_zero());
    }

    #[test]
    fn trace_csv_has_one_row_per_state() {
        let tr = simulate(&swap(), &[0.2, 0.1], &SimulationConfig::with_phi(0.5)).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&["F1".into(), "F2".into()], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,F1,F2\n0,0.2,0.1\n"));
        assert_eq!(text.lines().count(), tr.states.len() + 1);
    }
}
