//! Closed-form expected NEES under mismatched noise intensities.
//!
//! Two coupled covariance recursions run to steady state: the covariance the
//! filter *believes* it has under candidate intensities `(V, W)`, and the
//! mean-squared error it *actually* accrues when the world runs at
//! `(V_a, W_a)` while the gains stay those of the candidate filter. The
//! expected NEES is the trace of the believed-covariance inverse times the
//! actual MSE; it equals the state dimension exactly when the intensities
//! match, and its absolute log ratio is the theoretical tuning cost.
//!
//! Both recursions propagate the predicted covariance. The posterior form is
//! available behind [`NeesForm`] by applying one measurement update to the
//! steady pair.

use nalgebra::{Cholesky, DMatrix};
use rayon::prelude::*;

use crate::error::Error;
use crate::metrics::NeesForm;
use crate::sysmodel::{discretize, ContinuousModel, DiscreteModel, NoiseIntensities};
use crate::Result;

/// Steady-state iteration controls.
#[derive(Debug, Clone)]
pub struct OracleOpts {
    /// Successive-difference Frobenius tolerance declaring steady state.
    pub tol: f64,
    pub max_iters: usize,
    /// Initial covariance for both recursions; identity when `None`.
    pub p0: Option<DMatrix<f64>>,
    /// Which covariance form the NEES is evaluated against.
    pub form: NeesForm,
}

impl Default for OracleOpts {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iters: 100_000,
            p0: None,
            form: NeesForm::Predicted,
        }
    }
}

/// Steady-state oracle output.
#[derive(Debug, Clone)]
pub struct OracleResult {
    /// Expected NEES at steady state.
    pub expected_nees: f64,
    /// `|log(expected_nees / nx)|`.
    pub jnees: f64,
    /// Steady predicted covariance the filter computes.
    pub p_filter: DMatrix<f64>,
    /// Steady predicted mean-squared-error covariance.
    pub sigma_true: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    0.5 * (m + m.transpose())
}

/// One step of the coupled recursions. Gains come from the filter
/// covariance; the true covariance is driven by the true noise matrices.
struct CoupledRecursion<'a> {
    filter: &'a DiscreteModel,
    q_true: &'a DMatrix<f64>,
    r_true: &'a DMatrix<f64>,
}

impl CoupledRecursion<'_> {
    fn step(
        &self,
        p_bar: &DMatrix<f64>,
        sigma: &DMatrix<f64>,
    ) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let m = self.filter;
        let s = symmetrize(&(&m.h * p_bar * m.h.transpose() + &m.r));
        let chol = Cholesky::new(s.clone()).ok_or_else(|| {
            Error::NotPositiveDefinite("innovation covariance in oracle recursion".into())
        })?;
        // K_w = P̄ Hᵀ S⁻¹
        let k_w = chol.solve(&(&m.h * p_bar.transpose())).transpose();
        let k_bar = &m.f * &k_w;
        let x = &m.f - &k_bar * &m.h;
        let p_next = symmetrize(&(&x * p_bar * x.transpose() + &k_bar * &m.r * k_bar.transpose() + &m.q));
        let sigma_next = symmetrize(
            &(&x * sigma * x.transpose() + &k_bar * self.r_true * k_bar.transpose() + self.q_true),
        );
        Ok((p_next, sigma_next))
    }
}

/// Iterates the filter-believed predicted-covariance recursion, returning
/// the visited sequence (initial value first). Stops at `‖ΔP̄‖_F < tol` or
/// after `max_iters` steps.
pub fn filter_cov_recursion(
    model: &DiscreteModel,
    p0: &DMatrix<f64>,
    tol: f64,
    max_iters: usize,
) -> Result<Vec<DMatrix<f64>>> {
    let rec = CoupledRecursion {
        filter: model,
        q_true: &model.q,
        r_true: &model.r,
    };
    let mut seq = vec![p0.clone()];
    let mut p = p0.clone();
    let mut sigma = p0.clone();
    for i in 0..max_iters {
        let (p_next, sigma_next) = rec.step(&p, &sigma)?;
        let delta = (&p_next - &p).norm();
        if !p_next.norm().is_finite() || p_next.norm() > 1e12 {
            return Err(Error::Diverged {
                iterations: i + 1,
                norm: p_next.norm(),
            });
        }
        seq.push(p_next.clone());
        p = p_next;
        sigma = sigma_next;
        if delta < tol {
            break;
        }
    }
    Ok(seq)
}

/// Iterates the true mean-squared-error recursion alongside the filter
/// recursion, returning the Σ sequence (initial value first).
pub fn true_mse_recursion(
    cont: &ContinuousModel,
    candidate: &NoiseIntensities,
    truth: &NoiseIntensities,
    dt: f64,
    p0: &DMatrix<f64>,
    tol: f64,
    max_iters: usize,
) -> Result<Vec<DMatrix<f64>>> {
    let filter_model = discretize(cont, candidate, dt)?;
    let true_model = discretize(cont, truth, dt)?;
    let rec = CoupledRecursion {
        filter: &filter_model,
        q_true: &true_model.q,
        r_true: &true_model.r,
    };
    let mut seq = vec![p0.clone()];
    let mut p = p0.clone();
    let mut sigma = p0.clone();
    for i in 0..max_iters {
        let (p_next, sigma_next) = rec.step(&p, &sigma)?;
        if !sigma_next.norm().is_finite() || sigma_next.norm() > 1e12 {
            return Err(Error::Diverged {
                iterations: i + 1,
                norm: sigma_next.norm(),
            });
        }
        let delta = (&sigma_next - &sigma).norm().max((&p_next - &p).norm());
        seq.push(sigma_next.clone());
        p = p_next;
        sigma = sigma_next;
        if delta < tol {
            break;
        }
    }
    Ok(seq)
}

/// Runs both recursions to steady state and evaluates the expected NEES.
pub fn expected_nees(
    cont: &ContinuousModel,
    candidate: &NoiseIntensities,
    truth: &NoiseIntensities,
    dt: f64,
    opts: &OracleOpts,
) -> Result<OracleResult> {
    let filter_model = discretize(cont, candidate, dt)?;
    let true_model = discretize(cont, truth, dt)?;
    let rec = CoupledRecursion {
        filter: &filter_model,
        q_true: &true_model.q,
        r_true: &true_model.r,
    };
    let nx = cont.nx();
    let p0 = opts
        .p0
        .clone()
        .unwrap_or_else(|| DMatrix::identity(nx, nx));
    let mut p = p0.clone();
    let mut sigma = p0;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iters {
        let (p_next, sigma_next) = rec.step(&p, &sigma)?;
        iterations += 1;
        if !p_next.norm().is_finite() || p_next.norm() > 1e12 || sigma_next.norm() > 1e12 {
            return Err(Error::Diverged {
                iterations,
                norm: p_next.norm().max(sigma_next.norm()),
            });
        }
        let delta = (&p_next - &p).norm().max((&sigma_next - &sigma).norm());
        p = p_next;
        sigma = sigma_next;
        if delta < opts.tol {
            converged = true;
            break;
        }
    }

    let (p_eval, sigma_eval) = match opts.form {
        NeesForm::Predicted => (p.clone(), sigma.clone()),
        NeesForm::Posterior => posterior_pair(&filter_model, &true_model, &p, &sigma)?,
    };
    let chol = Cholesky::new(p_eval.clone()).ok_or_else(|| {
        Error::NotPositiveDefinite("steady filter covariance is singular".into())
    })?;
    let nees = chol.solve(&sigma_eval).trace();
    if !(nees > 0.0) {
        return Err(Error::Degenerate(format!(
            "steady expected NEES is {nees}, log cost undefined"
        )));
    }
    Ok(OracleResult {
        expected_nees: nees,
        jnees: (nees / nx as f64).ln().abs(),
        p_filter: p,
        sigma_true: sigma,
        iterations,
        converged,
    })
}

/// One measurement update applied to the steady predicted pair.
fn posterior_pair(
    filter_model: &DiscreteModel,
    true_model: &DiscreteModel,
    p_bar: &DMatrix<f64>,
    sigma: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let h = &filter_model.h;
    let s = symmetrize(&(h * p_bar * h.transpose() + &filter_model.r));
    let chol = Cholesky::new(s.clone()).ok_or_else(|| {
        Error::NotPositiveDefinite("steady innovation covariance is singular".into())
    })?;
    let k_w = chol.solve(&(h * p_bar.transpose())).transpose();
    let nx = p_bar.nrows();
    let i_kh = DMatrix::<f64>::identity(nx, nx) - &k_w * h;
    let p_post = symmetrize(&(&i_kh * p_bar * i_kh.transpose() + &k_w * &filter_model.r * k_w.transpose()));
    let sigma_post =
        symmetrize(&(&i_kh * sigma * i_kh.transpose() + &k_w * &true_model.r * k_w.transpose()));
    Ok((p_post, sigma_post))
}

/// Log-spaced rectangular grid over scalar `(V, W)` intensities.
#[derive(Debug, Clone)]
pub struct GridSpec {
    pub v_lo: f64,
    pub v_hi: f64,
    pub nv: usize,
    pub w_lo: f64,
    pub w_hi: f64,
    pub nw: usize,
}

impl GridSpec {
    /// The search box the experiments use: `V ∈ [0.1, 5]`, `W ∈ [0.01, 0.5]`.
    pub fn default_box(nv: usize, nw: usize) -> Self {
        Self {
            v_lo: 0.1,
            v_hi: 5.0,
            nv,
            w_lo: 0.01,
            w_hi: 0.5,
            nw,
        }
    }

    pub fn v_values(&self) -> Vec<f64> {
        log_spaced(self.v_lo, self.v_hi, self.nv)
    }

    pub fn w_values(&self) -> Vec<f64> {
        log_spaced(self.w_lo, self.w_hi, self.nw)
    }
}

pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi >= lo && n >= 1, "invalid log-spaced range");
    if n == 1 {
        return vec![lo];
    }
    let (lln, hln) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (lln + (hln - lln) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// One evaluated grid point.
#[derive(Debug, Clone)]
pub struct SurfacePoint {
    pub v: f64,
    pub w: f64,
    pub dt: f64,
    pub expected_nees: f64,
    pub jnees: f64,
    pub logdet_p: f64,
    pub logdet_sigma: f64,
}

fn log_det(m: &DMatrix<f64>) -> f64 {
    match Cholesky::new(m.clone()) {
        Some(chol) => 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>(),
        None => f64::NEG_INFINITY,
    }
}

fn require_scalar_intensities(cont: &ContinuousModel) -> Result<()> {
    if cont.nw() != 1 || cont.nz() != 1 {
        return Err(Error::Dimension(
            "grid scans require a single process and a single measurement channel".into(),
        ));
    }
    Ok(())
}

/// Evaluates the oracle over a `(V, W)` grid at one sample time.
/// Points are ordered W-major: all W values for the first V, then the next V.
pub fn scan_surface(
    cont: &ContinuousModel,
    truth: &NoiseIntensities,
    grid: &GridSpec,
    dt: f64,
    opts: &OracleOpts,
) -> Result<Vec<SurfacePoint>> {
    require_scalar_intensities(cont)?;
    let vs = grid.v_values();
    let ws = grid.w_values();
    let pairs: Vec<(f64, f64)> = vs
        .iter()
        .flat_map(|&v| ws.iter().map(move |&w| (v, w)))
        .collect();
    pairs
        .into_par_iter()
        .map(|(v, w)| -> Result<SurfacePoint> {
            let candidate = NoiseIntensities::from_slices(&[v], &[w])?;
            let r = expected_nees(cont, &candidate, truth, dt, opts)?;
            Ok(SurfacePoint {
                v,
                w,
                dt,
                expected_nees: r.expected_nees,
                jnees: r.jnees,
                logdet_p: log_det(&r.p_filter),
                logdet_sigma: log_det(&r.sigma_true),
            })
        })
        .collect()
}

/// Grid points whose expected NEES falls inside `band` — the locus of
/// candidate intensities a single-`dt` consistency check cannot distinguish.
pub fn nees_line_scan(
    cont: &ContinuousModel,
    truth: &NoiseIntensities,
    grid: &GridSpec,
    dt: f64,
    band: (f64, f64),
    opts: &OracleOpts,
) -> Result<Vec<SurfacePoint>> {
    let surface = scan_surface(cont, truth, grid, dt, opts)?;
    Ok(surface
        .into_iter()
        .filter(|p| p.expected_nees >= band.0 && p.expected_nees <= band.1)
        .collect())
}

/// Worst-case theoretical cost over several sample times, per grid point.
/// Output order matches [`scan_surface`].
pub fn multi_dt_surface(
    cont: &ContinuousModel,
    truth: &NoiseIntensities,
    grid: &GridSpec,
    dt_list: &[f64],
    opts: &OracleOpts,
) -> Result<Vec<(f64, f64, f64)>> {
    if dt_list.is_empty() {
        return Err(Error::InvalidValue("dt list must be nonempty".into()));
    }
    let surfaces: Vec<Vec<SurfacePoint>> = dt_list
        .iter()
        .map(|&dt| scan_surface(cont, truth, grid, dt, opts))
        .collect::<Result<_>>()?;
    let n = surfaces[0].len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let jmax = surfaces
            .iter()
            .map(|s| s[i].jnees)
            .fold(f64::NEG_INFINITY, f64::max);
        out.push((surfaces[0][i].v, surfaces[0][i].w, jmax));
    }
    Ok(out)
}
