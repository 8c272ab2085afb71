//! Probabilistic regression over the tuning cost surface.
//!
//! A Matérn kernel with automatic relevance determination (one lengthscale
//! per input dimension) models the cost over inputs normalized to the unit
//! box. Hyperparameters are fitted by multi-start gradient ascent on the
//! marginal likelihood with analytic gradients. The posterior is available
//! in Gaussian-process form or as a Student-t process, whose predictive
//! variance is inflated by the observed data misfit.
//!
//! Costs are standardized to zero mean and unit variance at construction;
//! posterior moments are reported back in the original cost units.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::special::ln_gamma;
use crate::Result;

/// Matérn smoothness order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaternOrder {
    ThreeHalves,
    FiveHalves,
}

/// Kernel hyperparameters, stored in log space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    /// One log-lengthscale per input dimension.
    pub log_lengthscales: Vec<f64>,
    pub log_signal_variance: f64,
    pub log_noise_variance: f64,
    pub smoothness: MaternOrder,
}

/// Fitted observation-noise variance never drops below this.
pub const NOISE_VARIANCE_FLOOR: f64 = 1e-6;

impl Kernel {
    /// Neutral starting kernel for standardized targets on the unit box.
    pub fn default_for_dim(dim: usize, smoothness: MaternOrder) -> Self {
        Self {
            log_lengthscales: vec![0.3f64.ln(); dim],
            log_signal_variance: 0.0,
            log_noise_variance: 0.01f64.ln(),
            smoothness,
        }
    }

    pub fn dim(&self) -> usize {
        self.log_lengthscales.len()
    }

    pub fn signal_variance(&self) -> f64 {
        self.log_signal_variance.exp()
    }

    pub fn noise_variance(&self) -> f64 {
        self.log_noise_variance.exp()
    }

    /// Packed parameter vector `[log ℓ_1…log ℓ_d, log σ², log σ_n²]`.
    pub fn pack(&self) -> Vec<f64> {
        let mut p = self.log_lengthscales.clone();
        p.push(self.log_signal_variance);
        p.push(self.log_noise_variance);
        p
    }

    /// Inverse of [`Kernel::pack`].
    pub fn unpack(params: &[f64], smoothness: MaternOrder) -> Self {
        let d = params.len() - 2;
        Self {
            log_lengthscales: params[..d].to_vec(),
            log_signal_variance: params[d],
            log_noise_variance: params[d + 1],
            smoothness,
        }
    }
}

/// Scaled distance `r = √(Σ_d ((x_d − y_d)/ℓ_d)²)`.
fn scaled_distance(x: &DVector<f64>, y: &DVector<f64>, kernel: &Kernel) -> f64 {
    let mut r2 = 0.0;
    for d in 0..x.len() {
        let diff = (x[d] - y[d]) / kernel.log_lengthscales[d].exp();
        r2 += diff * diff;
    }
    r2.sqrt()
}

/// Matérn covariance between two points under ARD lengthscales.
pub fn kernel_eval(x: &DVector<f64>, x2: &DVector<f64>, kernel: &Kernel) -> f64 {
    let r = scaled_distance(x, x2, kernel);
    let sig2 = kernel.signal_variance();
    match kernel.smoothness {
        MaternOrder::ThreeHalves => {
            let a = 3f64.sqrt() * r;
            sig2 * (1.0 + a) * (-a).exp()
        }
        MaternOrder::FiveHalves => {
            let a = 5f64.sqrt() * r;
            sig2 * (1.0 + a + a * a / 3.0) * (-a).exp()
        }
    }
}

/// Gram matrix including observation noise on the diagonal.
fn gram(x: &[DVector<f64>], kernel: &Kernel) -> DMatrix<f64> {
    let m = x.len();
    let noise = kernel.noise_variance();
    let mut k = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..=i {
            let v = kernel_eval(&x[i], &x[j], kernel);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
        k[(i, i)] += noise;
    }
    k
}

/// Cholesky with escalating diagonal jitter, up to `1e-6·σ²`.
fn cholesky_with_jitter(
    k: &DMatrix<f64>,
    signal_variance: f64,
) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let m = k.nrows();
    for &scale in &[0.0, 1e-12, 1e-10, 1e-8, 1e-6] {
        let jitter = scale * signal_variance;
        let jittered = k + DMatrix::<f64>::identity(m, m) * jitter;
        if let Some(chol) = Cholesky::new(jittered) {
            return Ok((chol, jitter));
        }
    }
    Err(Error::NotPositiveDefinite(
        "Gram matrix failed Cholesky at maximum jitter".into(),
    ))
}

/// Surrogate family of the predictive distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurrogateFamily {
    Gp,
    Tp,
}

/// An immutable fitted surrogate: training data, kernel, and the cached
/// factorization used by posterior queries.
#[derive(Debug, Clone)]
pub struct SurrogateState {
    x: Vec<DVector<f64>>,
    y_raw: DVector<f64>,
    y_mean: f64,
    y_scale: f64,
    kernel: Kernel,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    family: SurrogateFamily,
    tp_dof: f64,
    /// Cached misfit `yᵀ K⁻¹ y` of the standardized targets.
    beta: f64,
}

impl SurrogateState {
    /// Fits the factorization for fixed hyperparameters.
    pub fn new(
        x: Vec<DVector<f64>>,
        y_raw: &[f64],
        kernel: Kernel,
        family: SurrogateFamily,
        tp_dof: f64,
    ) -> Result<Self> {
        if x.len() != y_raw.len() || x.is_empty() {
            return Err(Error::Dimension(format!(
                "{} inputs vs {} observations",
                x.len(),
                y_raw.len()
            )));
        }
        if family == SurrogateFamily::Tp && tp_dof <= 2.0 {
            return Err(Error::InvalidValue(
                "Student-t degrees of freedom must exceed 2".into(),
            ));
        }
        let y_raw = DVector::from_row_slice(y_raw);
        let (y_mean, y_scale) = standardization(&y_raw);
        let y = y_raw.map(|v| (v - y_mean) / y_scale);
        let k = gram(&x, &kernel);
        let (chol, _) = cholesky_with_jitter(&k, kernel.signal_variance())?;
        let alpha = chol.solve(&y);
        let beta = y.dot(&alpha);
        Ok(Self {
            x,
            y_raw,
            y_mean,
            y_scale,
            kernel,
            chol,
            alpha,
            family,
            tp_dof,
            beta,
        })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn family(&self) -> SurrogateFamily {
        self.family
    }

    /// Smallest observed cost, in original units.
    pub fn best_observed(&self) -> f64 {
        self.y_raw.min()
    }

    /// Posterior mean and (latent-function) variance at a query point, in
    /// original cost units. Variance is clamped to zero from below.
    pub fn posterior(&self, x_query: &DVector<f64>) -> (f64, f64) {
        let m = self.len();
        let k_vec = DVector::from_fn(m, |i, _| kernel_eval(&self.x[i], x_query, &self.kernel));
        let mean_std = k_vec.dot(&self.alpha);
        let solved = self.chol.solve(&k_vec);
        let mut var_std = kernel_eval(x_query, x_query, &self.kernel) - k_vec.dot(&solved);
        if var_std < 0.0 {
            var_std = var_std.max(-1e-8);
            var_std = var_std.max(0.0);
        }
        if self.family == SurrogateFamily::Tp {
            var_std *= (self.tp_dof + self.beta - 2.0) / (self.tp_dof + m as f64 - 2.0);
        }
        (
            self.y_mean + self.y_scale * mean_std,
            self.y_scale * self.y_scale * var_std,
        )
    }

    /// Posterior variance including the fitted observation noise.
    pub fn posterior_observed(&self, x_query: &DVector<f64>) -> (f64, f64) {
        let (mean, var) = self.posterior(x_query);
        (
            mean,
            var + self.y_scale * self.y_scale * self.kernel.noise_variance(),
        )
    }
}

fn standardization(y: &DVector<f64>) -> (f64, f64) {
    let m = y.len() as f64;
    let mean = y.sum() / m;
    let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / m;
    (mean, var.sqrt().max(1e-12))
}

/// Log marginal likelihood of the fitted state (standardized targets):
/// `−½ yᵀK⁻¹y − ½ log|K| − (M/2) log 2π`.
pub fn log_marginal_likelihood(state: &SurrogateState) -> f64 {
    let m = state.len() as f64;
    let log_det = 2.0 * state.chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    -0.5 * state.beta - 0.5 * log_det - 0.5 * m * (2.0 * std::f64::consts::PI).ln()
}

/// Marginal likelihood of mean-centered targets and its gradient with
/// respect to the packed log-hyperparameters
/// `[log ℓ_1…log ℓ_d, log σ², log σ_n²]`.
pub fn log_marginal_likelihood_with_grad(
    x: &[DVector<f64>],
    y: &DVector<f64>,
    kernel: &Kernel,
) -> Result<(f64, Vec<f64>)> {
    let m = x.len();
    let d = kernel.dim();
    let k = gram(x, kernel);
    let (chol, _) = cholesky_with_jitter(&k, kernel.signal_variance())?;
    let alpha = chol.solve(y);
    let k_inv = chol.inverse();
    let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let lml =
        -0.5 * y.dot(&alpha) - 0.5 * log_det - 0.5 * m as f64 * (2.0 * std::f64::consts::PI).ln();

    // A = ααᵀ − K⁻¹; each gradient is ½ tr(A ∂K/∂θ).
    let mut grad = vec![0.0; d + 2];
    let noise = kernel.noise_variance();
    let sqrt_order = match kernel.smoothness {
        MaternOrder::ThreeHalves => 3f64.sqrt(),
        MaternOrder::FiveHalves => 5f64.sqrt(),
    };
    for i in 0..m {
        for j in 0..m {
            let a_ij = alpha[i] * alpha[j] - k_inv[(i, j)];
            let r = scaled_distance(&x[i], &x[j], kernel);
            let expo = (-sqrt_order * r).exp();
            // per-dimension lengthscale gradients share a pair weight
            let pair_weight = match kernel.smoothness {
                MaternOrder::ThreeHalves => 3.0 * kernel.signal_variance() * expo,
                MaternOrder::FiveHalves => {
                    (5.0 / 3.0) * kernel.signal_variance() * expo * (1.0 + sqrt_order * r)
                }
            };
            for dim in 0..d {
                let ell = kernel.log_lengthscales[dim].exp();
                let diff = x[i][dim] - x[j][dim];
                grad[dim] += 0.5 * a_ij * pair_weight * diff * diff / (ell * ell);
            }
            // signal variance: ∂K/∂log σ² is the noise-free Gram
            let k_f = kernel_eval(&x[i], &x[j], kernel);
            grad[d] += 0.5 * a_ij * k_f;
            if i == j {
                grad[d + 1] += 0.5 * a_ij * noise;
            }
        }
    }
    Ok((lml, grad))
}

/// Hyperparameter fit outcome. `converged_starts == 0` means every start
/// failed and the default kernel is returned as a fallback.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub kernel: Kernel,
    pub lml: f64,
    pub converged_starts: usize,
}

const PARAM_BOUNDS_LS: (f64, f64) = (-6.9, 6.9); // lengthscales in [1e-3, 1e3]
const PARAM_BOUNDS_SIG: (f64, f64) = (-13.8, 9.2); // signal variance in [1e-6, 1e4]

fn clamp_params(params: &mut [f64]) {
    let d = params.len() - 2;
    for p in params.iter_mut().take(d) {
        *p = p.clamp(PARAM_BOUNDS_LS.0, PARAM_BOUNDS_LS.1);
    }
    params[d] = params[d].clamp(PARAM_BOUNDS_SIG.0, PARAM_BOUNDS_SIG.1);
    params[d + 1] = params[d + 1].clamp(NOISE_VARIANCE_FLOOR.ln(), 100f64.ln());
}

fn ascend(
    x: &[DVector<f64>],
    y: &DVector<f64>,
    start: Kernel,
    iters: usize,
) -> Option<(f64, Kernel)> {
    let smoothness = start.smoothness;
    let mut params = start.pack();
    clamp_params(&mut params);
    // Adam ascent
    let (lr, b1, b2, eps) = (0.08, 0.9, 0.999, 1e-8);
    let mut mom = vec![0.0; params.len()];
    let mut vel = vec![0.0; params.len()];
    let mut best: Option<(f64, Vec<f64>)> = None;
    for t in 1..=iters {
        let kernel = Kernel::unpack(&params, smoothness);
        let Ok((lml, grad)) = log_marginal_likelihood_with_grad(x, y, &kernel) else {
            break;
        };
        if best.as_ref().is_none_or(|(b, _)| lml > *b) {
            best = Some((lml, params.clone()));
        }
        let mut max_step = 0.0f64;
        for i in 0..params.len() {
            mom[i] = b1 * mom[i] + (1.0 - b1) * grad[i];
            vel[i] = b2 * vel[i] + (1.0 - b2) * grad[i] * grad[i];
            let m_hat = mom[i] / (1.0 - b1.powi(t as i32));
            let v_hat = vel[i] / (1.0 - b2.powi(t as i32));
            let step = lr * m_hat / (v_hat.sqrt() + eps);
            params[i] += step;
            max_step = max_step.max(step.abs());
        }
        clamp_params(&mut params);
        if max_step < 1e-5 {
            break;
        }
    }
    best.map(|(lml, p)| (lml, Kernel::unpack(&p, smoothness)))
}

/// Maximizes the marginal likelihood by multi-start Adam ascent with
/// analytic gradients. Targets are standardized internally, matching
/// [`SurrogateState::new`]. Deterministic for a fixed generator state.
pub fn fit_hyperparams(
    x: &[DVector<f64>],
    y_raw: &[f64],
    restarts: usize,
    rng: &mut ChaCha12Rng,
    smoothness: MaternOrder,
) -> FitOutcome {
    assert!(x.len() >= 2, "hyperparameter fitting needs at least 2 points");
    let dim = x[0].len();
    let y_vec = DVector::from_row_slice(y_raw);
    let (mean, scale) = standardization(&y_vec);
    let y = y_vec.map(|v| (v - mean) / scale);

    let mut starts = vec![Kernel::default_for_dim(dim, smoothness)];
    for _ in 1..restarts.max(1) {
        let mut k = Kernel::default_for_dim(dim, smoothness);
        for ls in &mut k.log_lengthscales {
            *ls = rng.random_range(0.05f64.ln()..2.0f64.ln());
        }
        k.log_signal_variance = rng.random_range(0.1f64.ln()..5.0f64.ln());
        k.log_noise_variance = rng.random_range(1e-4f64.ln()..0.5f64.ln());
        starts.push(k);
    }

    let results: Vec<Option<(f64, Kernel)>> = starts
        .into_par_iter()
        .map(|start| ascend(x, &y, start, 120))
        .collect();

    let converged_starts = results.iter().flatten().count();
    let best = results
        .into_iter()
        .flatten()
        .max_by(|a, b| a.0.total_cmp(&b.0));
    match best {
        Some((lml, kernel)) => FitOutcome {
            kernel,
            lml,
            converged_starts,
        },
        None => FitOutcome {
            kernel: Kernel::default_for_dim(dim, smoothness),
            lml: f64::NEG_INFINITY,
            converged_starts: 0,
        },
    }
}

/// Student-t process log marginal likelihood as a function of the degrees
/// of freedom, for the state's cached factorization.
fn tp_log_likelihood(state: &SurrogateState, dof: f64) -> f64 {
    let m = state.len() as f64;
    let log_det = 2.0 * state.chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    ln_gamma(0.5 * (dof + m)) - ln_gamma(0.5 * dof)
        - 0.5 * m * ((dof - 2.0) * std::f64::consts::PI).ln()
        - 0.5 * log_det
        - 0.5 * (dof + m) * (1.0 + state.beta / (dof - 2.0)).ln()
}

/// Fits the Student-t degrees of freedom by golden-section search on the
/// TP marginal likelihood over `ν ∈ (2, 200]`.
pub fn fit_tp_dof(state: &SurrogateState) -> f64 {
    let golden = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (2.001f64, 200.0f64);
    let mut x1 = hi - golden * (hi - lo);
    let mut x2 = lo + golden * (hi - lo);
    let mut f1 = tp_log_likelihood(state, x1);
    let mut f2 = tp_log_likelihood(state, x2);
    for _ in 0..80 {
        if f1 > f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - golden * (hi - lo);
            f1 = tp_log_likelihood(state, x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + golden * (hi - lo);
            f2 = tp_log_likelihood(state, x2);
        }
    }
    0.5 * (lo + hi)
}
