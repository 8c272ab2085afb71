//! Discrete-time linear Kalman filter.
//!
//! Prediction and measurement update are kept as free functions on an
//! immutable [`FilterState`] so Monte Carlo runs can share models freely
//! across threads. [`run_filter`] sequences them and records the full
//! per-step trace needed by the consistency metrics.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::Error;
use crate::sysmodel::DiscreteModel;
use crate::Result;

/// State estimate and covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub x_hat: DVector<f64>,
    pub p: DMatrix<f64>,
}

impl FilterState {
    pub fn new(x_hat: DVector<f64>, p: DMatrix<f64>) -> Self {
        Self { x_hat, p }
    }
}

/// One record per processed measurement.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub x_pred: DVector<f64>,
    pub p_pred: DMatrix<f64>,
    pub x_post: DVector<f64>,
    pub p_post: DMatrix<f64>,
    /// Innovation `ν = z − H x_pred`.
    pub innovation: DVector<f64>,
    /// Innovation covariance `S = H P_pred Hᵀ + R`.
    pub s: DMatrix<f64>,
    /// Kalman gain.
    pub gain: DMatrix<f64>,
}

/// Full filter history over a measurement sequence.
#[derive(Debug, Clone, Default)]
pub struct FilterTrace {
    pub steps: Vec<StepRecord>,
}

impl FilterTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    0.5 * (m + m.transpose())
}

/// Prediction step: `x⁺ = F x + B u`, `P⁺ = F P Fᵀ + Q`.
pub fn predict(state: &FilterState, model: &DiscreteModel, u: &DVector<f64>) -> Result<FilterState> {
    let nx = model.nx();
    if state.x_hat.len() != nx || state.p.nrows() != nx || state.p.ncols() != nx {
        return Err(Error::Dimension(format!(
            "state dimension {} does not match model nx={nx}",
            state.x_hat.len()
        )));
    }
    if u.len() != model.nu() {
        return Err(Error::Dimension(format!(
            "control dimension {} does not match model nu={}",
            u.len(),
            model.nu()
        )));
    }
    let x = &model.f * &state.x_hat + &model.b * u;
    let p = symmetrize(&(&model.f * &state.p * model.f.transpose() + &model.q));
    Ok(FilterState::new(x, p))
}

/// Measurement update. Returns the posterior state together with the
/// innovation, its covariance and the gain, which the consistency metrics
/// consume directly.
///
/// The innovation covariance is inverted through its Cholesky factor; a
/// factorization failure is reported rather than papered over.
pub fn update(
    state: &FilterState,
    model: &DiscreteModel,
    z: &DVector<f64>,
) -> Result<(FilterState, DVector<f64>, DMatrix<f64>, DMatrix<f64>)> {
    if z.len() != model.nz() {
        return Err(Error::Dimension(format!(
            "measurement dimension {} does not match model nz={}",
            z.len(),
            model.nz()
        )));
    }
    let innovation = z - &model.h * &state.x_hat;
    let s = symmetrize(&(&model.h * &state.p * model.h.transpose() + &model.r));
    let chol = Cholesky::new(s.clone()).ok_or_else(|| {
        Error::NotPositiveDefinite("innovation covariance failed Cholesky".into())
    })?;
    // K = P Hᵀ S⁻¹ via solving S Kᵀ = H Pᵀ.
    let gain = chol.solve(&(&model.h * state.p.transpose())).transpose();
    let x = &state.x_hat + &gain * &innovation;
    let p = symmetrize(&(&state.p - &gain * &s * gain.transpose()));
    Ok((FilterState::new(x, p), innovation, s, gain))
}

/// Runs predict/update over equal-length control and measurement sequences
/// starting from `(x0, p0)`.
pub fn run_filter(
    model: &DiscreteModel,
    x0: &DVector<f64>,
    p0: &DMatrix<f64>,
    controls: &[DVector<f64>],
    measurements: &[DVector<f64>],
) -> Result<FilterTrace> {
    if controls.len() != measurements.len() {
        return Err(Error::Dimension(format!(
            "{} controls vs {} measurements",
            controls.len(),
            measurements.len()
        )));
    }
    let mut state = FilterState::new(x0.clone(), p0.clone());
    let mut steps = Vec::with_capacity(controls.len());
    for (k, (u, z)) in controls.iter().zip(measurements).enumerate() {
        let pred = predict(&state, model, u).map_err(|e| e.at_step(k))?;
        let (post, innovation, s, gain) = update(&pred, model, z).map_err(|e| e.at_step(k))?;
        steps.push(StepRecord {
            x_pred: pred.x_hat,
            p_pred: pred.p,
            x_post: post.x_hat.clone(),
            p_post: post.p.clone(),
            innovation,
            s,
            gain,
        });
        state = post;
    }
    Ok(FilterTrace { steps })
}
