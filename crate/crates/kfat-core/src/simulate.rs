//! Ground-truth simulation and Monte Carlo batches.
//!
//! Truth trajectories are generated from the true intensities, the filter
//! runs with a candidate discretization at the same sample time, and the
//! per-run, per-step consistency statistics are collected. Every run draws
//! from its own counter-based generator seeded from `(master_seed, run)`,
//! so batches are reproducible and runs can execute in parallel.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::Error;
use crate::kalman::run_filter;
use crate::metrics::{nees, nis};
use crate::sysmodel::{discretize, ContinuousModel, DiscreteModel, NoiseIntensities};
use crate::Result;

/// Default admissible sample-time range; discretization accuracy degrades
/// for large sample times.
pub const DT_BOUNDS_DEFAULT: (f64, f64) = (0.01, 2.0);

/// Everything one Monte Carlo batch needs.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub model: ContinuousModel,
    /// Intensities the truth simulator uses.
    pub true_noise: NoiseIntensities,
    /// Intensities the filter is discretized with.
    pub candidate_noise: NoiseIntensities,
    pub dt: f64,
    /// Filter steps per run.
    pub steps: usize,
    /// Monte Carlo runs.
    pub runs: usize,
    pub master_seed: u64,
    /// Initial truth state; defaults to the origin.
    pub x0: Option<DVector<f64>>,
    /// Initial filter covariance diagonal; defaults to ones.
    pub p0_diag: Option<DVector<f64>>,
    /// Admissible `dt` range, [`DT_BOUNDS_DEFAULT`] unless overridden.
    pub dt_bounds: (f64, f64),
}

impl ScenarioConfig {
    pub fn new(
        model: ContinuousModel,
        true_noise: NoiseIntensities,
        candidate_noise: NoiseIntensities,
        dt: f64,
        steps: usize,
        runs: usize,
        master_seed: u64,
    ) -> Result<Self> {
        let cfg = Self {
            model,
            true_noise,
            candidate_noise,
            dt,
            steps,
            runs,
            master_seed,
            x0: None,
            p0_diag: None,
            dt_bounds: DT_BOUNDS_DEFAULT,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.true_noise.check_dims(&self.model)?;
        self.candidate_noise.check_dims(&self.model)?;
        if self.steps == 0 || self.runs == 0 {
            return Err(Error::InvalidValue(
                "steps and runs must both be >= 1".into(),
            ));
        }
        let (lo, hi) = self.dt_bounds;
        if !(self.dt >= lo && self.dt <= hi) {
            return Err(Error::InvalidValue(format!(
                "dt={} outside admissible range [{lo}, {hi}]",
                self.dt
            )));
        }
        if let Some(x0) = &self.x0 {
            if x0.len() != self.model.nx() {
                return Err(Error::Dimension("x0 length must equal nx".into()));
            }
        }
        if let Some(p0) = &self.p0_diag {
            if p0.len() != self.model.nx() {
                return Err(Error::Dimension("p0 diagonal length must equal nx".into()));
            }
            if p0.iter().any(|&d| d < 0.0) {
                return Err(Error::InvalidValue("p0 diagonal must be >= 0".into()));
            }
        }
        Ok(())
    }

    pub fn initial_state(&self) -> DVector<f64> {
        self.x0
            .clone()
            .unwrap_or_else(|| DVector::zeros(self.model.nx()))
    }

    pub fn initial_covariance(&self) -> DMatrix<f64> {
        match &self.p0_diag {
            Some(d) => DMatrix::from_diagonal(d),
            None => DMatrix::identity(self.model.nx(), self.model.nx()),
        }
    }
}

/// Per-run, per-step consistency statistics of one Monte Carlo batch.
///
/// Matrices are `runs × steps`. The filter covariance sequence does not
/// depend on the measurements, so its diagonals are stored once.
#[derive(Debug, Clone)]
pub struct MonteCarloResult {
    /// Posterior-form NEES.
    pub nees: DMatrix<f64>,
    /// Predicted-form NEES (against `P_{k|k-1}`).
    pub nees_predicted: DMatrix<f64>,
    pub nis: DMatrix<f64>,
    /// Posterior state errors, per run and step.
    pub errors: Vec<Vec<DVector<f64>>>,
    /// Shared posterior covariance diagonal per step.
    pub p_post_diag: Vec<DVector<f64>>,
    /// The candidate discretization the filter ran with.
    pub candidate: DiscreteModel,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent counter-based generator for stream `stream` under a master
/// seed. Streams are keyed by index, not by draw order.
pub fn stream_rng(master_seed: u64, stream: u64) -> ChaCha12Rng {
    let mut state = master_seed;
    let mixed_master = splitmix64(&mut state);
    let mut state = mixed_master ^ stream;
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha12Rng::from_seed(seed)
}

/// Oscillatory control signal `2·cos(0.75 t)` replicated across `nu` channels.
pub fn control_input(t: f64, nu: usize) -> DVector<f64> {
    DVector::from_element(nu, 2.0 * (0.75 * t).cos())
}

/// Square root of a PSD matrix for sampling: Cholesky when possible,
/// eigendecomposition with clamped eigenvalues otherwise.
fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    if let Some(chol) = Cholesky::new(m.clone()) {
        return chol.l();
    }
    let eig = m.clone().symmetric_eigen();
    let sqrt_vals = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals)
}

fn sample_noise(factor: &DMatrix<f64>, rng: &mut ChaCha12Rng) -> DVector<f64> {
    let xi = DVector::from_fn(factor.ncols(), |_, _| StandardNormal.sample(rng));
    factor * xi
}

/// Simulates the true system: `x_k = F x_{k-1} + B u_k + v_k`,
/// `z_k = H x_k + w_k` with `u_k = control_input(k·dt)`.
pub fn simulate_truth(
    model: &DiscreteModel,
    x0: &DVector<f64>,
    steps: usize,
    rng: &mut ChaCha12Rng,
) -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
    let q_sqrt = psd_sqrt(&model.q);
    let r_sqrt = psd_sqrt(&model.r);
    let mut states = Vec::with_capacity(steps);
    let mut measurements = Vec::with_capacity(steps);
    let mut x = x0.clone();
    for k in 1..=steps {
        let u = control_input(k as f64 * model.dt, model.nu());
        x = &model.f * &x + &model.b * &u + sample_noise(&q_sqrt, rng);
        let z = &model.h * &x + sample_noise(&r_sqrt, rng);
        states.push(x.clone());
        measurements.push(z);
    }
    (states, measurements)
}

struct RunStats {
    nees: Vec<f64>,
    nees_predicted: Vec<f64>,
    nis: Vec<f64>,
    errors: Vec<DVector<f64>>,
    p_post_diag: Option<Vec<DVector<f64>>>,
}

/// Runs `cfg.runs` independent truth/filter pairs and collects NEES/NIS.
pub fn monte_carlo(cfg: &ScenarioConfig) -> Result<MonteCarloResult> {
    cfg.validate()?;
    let truth_model = discretize(&cfg.model, &cfg.true_noise, cfg.dt)?;
    let candidate = discretize(&cfg.model, &cfg.candidate_noise, cfg.dt)?;
    let x0 = cfg.initial_state();
    let p0 = cfg.initial_covariance();
    let steps = cfg.steps;

    let controls: Vec<DVector<f64>> = (1..=steps)
        .map(|k| control_input(k as f64 * cfg.dt, cfg.model.nu()))
        .collect();

    let per_run: Vec<RunStats> = (0..cfg.runs)
        .into_par_iter()
        .map(|run| -> Result<RunStats> {
            let mut rng = stream_rng(cfg.master_seed, run as u64);
            let (truth, measurements) = simulate_truth(&truth_model, &x0, steps, &mut rng);
            let trace = run_filter(&candidate, &x0, &p0, &controls, &measurements)
                .map_err(|e| e.in_run(run))?;
            let mut stats = RunStats {
                nees: Vec::with_capacity(steps),
                nees_predicted: Vec::with_capacity(steps),
                nis: Vec::with_capacity(steps),
                errors: Vec::with_capacity(steps),
                p_post_diag: if run == 0 {
                    Some(Vec::with_capacity(steps))
                } else {
                    None
                },
            };
            for (k, step) in trace.steps.iter().enumerate() {
                let e_post = &truth[k] - &step.x_post;
                let e_pred = &truth[k] - &step.x_pred;
                stats.nees.push(
                    nees(&e_post, &step.p_post)
                        .map_err(|e| e.at_step(k).in_run(run))?,
                );
                stats.nees_predicted.push(
                    nees(&e_pred, &step.p_pred)
                        .map_err(|e| e.at_step(k).in_run(run))?,
                );
                stats
                    .nis
                    .push(nis(&step.innovation, &step.s).map_err(|e| e.at_step(k).in_run(run))?);
                stats.errors.push(e_post);
                if let Some(diag) = &mut stats.p_post_diag {
                    diag.push(step.p_post.diagonal());
                }
            }
            Ok(stats)
        })
        .collect::<Result<Vec<_>>>()?;

    let n = cfg.runs;
    let mut nees_mat = DMatrix::zeros(n, steps);
    let mut nees_pred_mat = DMatrix::zeros(n, steps);
    let mut nis_mat = DMatrix::zeros(n, steps);
    let mut errors = Vec::with_capacity(n);
    let mut p_post_diag = Vec::new();
    for (i, stats) in per_run.into_iter().enumerate() {
        for k in 0..steps {
            nees_mat[(i, k)] = stats.nees[k];
            nees_pred_mat[(i, k)] = stats.nees_predicted[k];
            nis_mat[(i, k)] = stats.nis[k];
        }
        errors.push(stats.errors);
        if let Some(diag) = stats.p_post_diag {
            p_post_diag = diag;
        }
    }

    Ok(MonteCarloResult {
        nees: nees_mat,
        nees_predicted: nees_pred_mat,
        nis: nis_mat,
        errors,
        p_post_diag,
        candidate,
    })
}
