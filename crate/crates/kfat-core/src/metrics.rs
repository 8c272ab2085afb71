//! Filter consistency statistics.
//!
//! NEES and NIS are quadratic forms of errors against the covariances the
//! filter reports; for a consistent filter their expectations equal the
//! state and measurement dimensions. The tuning cost is the absolute log of
//! the run- then time-averaged statistic over its expectation, which is
//! bounded below by zero and symmetric between over- and under-confidence.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::special::chi_square_quantile;
use crate::Result;

/// Which statistic a cost was computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostKind {
    Jnees,
    Jnis,
}

/// Which covariance a NEES is evaluated against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeesForm {
    /// Error against the predicted state and `P_{k|k-1}`.
    Predicted,
    /// Error against the posterior state and `P_{k|k}`.
    Posterior,
}

/// A consistency cost value with the context it was computed under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyCost {
    pub value: f64,
    pub kind: CostKind,
    pub dt: f64,
    pub n_runs: usize,
    pub n_steps: usize,
}

/// Quadratic form `eᵀ P⁻¹ e` through a Cholesky solve.
fn quadratic_form(e: &DVector<f64>, p: &DMatrix<f64>) -> Result<f64> {
    if e.len() != p.nrows() || p.nrows() != p.ncols() {
        return Err(Error::Dimension(format!(
            "vector of length {} against {}x{} matrix",
            e.len(),
            p.nrows(),
            p.ncols()
        )));
    }
    let chol = Cholesky::new(p.clone())
        .ok_or_else(|| Error::NotPositiveDefinite("quadratic-form matrix".into()))?;
    Ok(e.dot(&chol.solve(e)))
}

/// Normalized estimation error squared of a state error against a posterior
/// (or predicted) covariance.
pub fn nees(err: &DVector<f64>, p: &DMatrix<f64>) -> Result<f64> {
    quadratic_form(err, p)
}

/// Normalized innovation error squared.
pub fn nis(innov: &DVector<f64>, s: &DMatrix<f64>) -> Result<f64> {
    quadratic_form(innov, s)
}

/// Log-consistency cost of an `N×T` matrix of per-run, per-step statistics:
/// average over runs per step, average over steps, then `|log(mean / dof)|`.
pub fn j_cost(
    samples: &DMatrix<f64>,
    dof: usize,
    kind: CostKind,
    dt: f64,
) -> Result<ConsistencyCost> {
    let (n_runs, n_steps) = samples.shape();
    if n_runs == 0 || n_steps == 0 {
        return Err(Error::Dimension("j_cost needs at least one sample".into()));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidValue("j_cost samples must be finite".into()));
    }
    let mut time_sum = 0.0;
    for k in 0..n_steps {
        time_sum += samples.column(k).sum() / n_runs as f64;
    }
    let mean = time_sum / n_steps as f64;
    if mean <= 0.0 {
        return Err(Error::Degenerate(
            "averaged statistic is zero; log cost undefined".into(),
        ));
    }
    Ok(ConsistencyCost {
        value: (mean / dof as f64).ln().abs(),
        kind,
        dt,
        n_runs,
        n_steps,
    })
}

/// Two-sided acceptance band for the run-averaged statistic of a consistent
/// filter: `[χ²_{N·n}(α/2), χ²_{N·n}(1−α/2)] / N`.
///
/// Exact for the run average at a fixed step; applying it to the
/// time-averaged statistic is a (conservative) approximation, since time
/// averaging only tightens concentration.
pub fn chi_square_band(dof: usize, n_runs: usize, confidence: f64) -> (f64, f64) {
    assert!(
        confidence > 0.0 && confidence < 1.0,
        "confidence must lie in (0, 1)"
    );
    let alpha = 1.0 - confidence;
    let pooled = (dof * n_runs) as f64;
    let lo = chi_square_quantile(pooled, 0.5 * alpha) / n_runs as f64;
    let hi = chi_square_quantile(pooled, 1.0 - 0.5 * alpha) / n_runs as f64;
    (lo, hi)
}

/// Per-component fraction of steps with `|e_k[j]| ≤ 2·√P_k[j][j]`.
pub fn two_sigma_coverage_components(
    errors: &[DVector<f64>],
    p_diag: &[DVector<f64>],
) -> Vec<f64> {
    assert_eq!(
        errors.len(),
        p_diag.len(),
        "error and covariance traces must have equal length"
    );
    if errors.is_empty() {
        return Vec::new();
    }
    let nx = errors[0].len();
    let mut counts = vec![0usize; nx];
    for (e, d) in errors.iter().zip(p_diag) {
        for j in 0..nx {
            if e[j].abs() <= 2.0 * d[j].max(0.0).sqrt() {
                counts[j] += 1;
            }
        }
    }
    counts
        .into_iter()
        .map(|c| c as f64 / errors.len() as f64)
        .collect()
}

/// Mean across state components of the per-component 2σ coverage.
pub fn two_sigma_coverage(errors: &[DVector<f64>], p_diag: &[DVector<f64>]) -> f64 {
    let per_component = two_sigma_coverage_components(errors, p_diag);
    if per_component.is_empty() {
        return 0.0;
    }
    per_component.iter().sum::<f64>() / per_component.len() as f64
}
