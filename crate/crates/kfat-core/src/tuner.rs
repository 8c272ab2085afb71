//! Noise-intensity tuning: Bayesian optimization over the worst-case
//! multi-sample-time consistency cost, plus a downhill-simplex baseline.
//!
//! The search runs in the log of the intensities, normalized to the unit
//! box; intensities are scale parameters and the cost surface is far closer
//! to stationary there. Every objective evaluation re-seeds its Monte Carlo
//! batch from the evaluation index, so repeated visits to the same point see
//! independent noise — the surrogate's fitted noise variance absorbs it.

use std::time::{Duration, Instant};

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::metrics::{j_cost, CostKind};
use crate::simulate::{monte_carlo, stream_rng, ScenarioConfig};
use crate::special::{normal_cdf, normal_pdf};
use crate::surrogate::{
    fit_hyperparams, fit_tp_dof, Kernel, MaternOrder, SurrogateFamily, SurrogateState,
};
use crate::sysmodel::NoiseIntensities;
use crate::Result;

/// Box bounds on the intensity vector, one `(lo, hi)` pair per channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamBounds {
    pub v: Vec<(f64, f64)>,
    pub w: Vec<(f64, f64)>,
}

impl ParamBounds {
    /// The experiments' search box: `V ∈ [0.1, 5]`, `W ∈ [0.01, 0.5]` per channel.
    pub fn default_box(nw: usize, nz: usize) -> Self {
        Self {
            v: vec![(0.1, 5.0); nw],
            w: vec![(0.01, 0.5); nz],
        }
    }

    pub fn dim(&self) -> usize {
        self.v.len() + self.w.len()
    }

    fn pairs(&self) -> impl Iterator<Item = &(f64, f64)> {
        self.v.iter().chain(self.w.iter())
    }

    pub fn validate(&self) -> Result<()> {
        if self.v.is_empty() || self.w.is_empty() {
            return Err(Error::InvalidValue("bounds must cover every channel".into()));
        }
        for &(lo, hi) in self.pairs() {
            if !(lo > 0.0 && hi > lo) {
                return Err(Error::InvalidValue(format!(
                    "bound ({lo}, {hi}) must satisfy 0 < lo < hi"
                )));
            }
        }
        Ok(())
    }

    /// Maps a unit-box point to intensities through log space.
    pub fn from_unit(&self, p: &DVector<f64>) -> NoiseIntensities {
        assert_eq!(p.len(), self.dim());
        let decode = |(lo, hi): &(f64, f64), t: f64| (lo.ln() + t * (hi.ln() - lo.ln())).exp();
        let v: Vec<f64> = self
            .v
            .iter()
            .zip(p.iter())
            .map(|(b, &t)| decode(b, t))
            .collect();
        let w: Vec<f64> = self
            .w
            .iter()
            .zip(p.iter().skip(self.v.len()))
            .map(|(b, &t)| decode(b, t))
            .collect();
        NoiseIntensities::from_slices(&v, &w).expect("bounds guarantee valid intensities")
    }

    /// Inverse of [`ParamBounds::from_unit`].
    pub fn to_unit(&self, q: &NoiseIntensities) -> DVector<f64> {
        let encode =
            |(lo, hi): &(f64, f64), x: f64| (x.ln() - lo.ln()) / (hi.ln() - lo.ln());
        let vals: Vec<f64> = self
            .v
            .iter()
            .zip(q.v.iter())
            .map(|(b, &x)| encode(b, x))
            .chain(self.w.iter().zip(q.w.iter()).map(|(b, &x)| encode(b, x)))
            .collect();
        DVector::from_vec(vals)
    }

    pub fn contains(&self, q: &NoiseIntensities) -> bool {
        let ok = |(lo, hi): &(f64, f64), x: f64| x >= lo * (1.0 - 1e-12) && x <= hi * (1.0 + 1e-12);
        self.v.iter().zip(q.v.iter()).all(|(b, &x)| ok(b, x))
            && self.w.iter().zip(q.w.iter()).all(|(b, &x)| ok(b, x))
    }
}

/// Acquisition criterion, maximized over the unit box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Acquisition {
    ExpectedImprovement,
    /// Lower confidence bound for minimization, `μ − κσ`, maximized as `κσ − μ`.
    LowerConfidenceBound { kappa: f64 },
}

/// Student-t degrees-of-freedom policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TpDof {
    Fixed(f64),
    Fitted,
}

/// Everything one tuning run needs.
#[derive(Debug, Clone)]
pub struct TuneConfig {
    /// Scenario template; its `candidate_noise`, `dt` and `master_seed` are
    /// replaced per evaluation.
    pub scenario: ScenarioConfig,
    pub bounds: ParamBounds,
    pub dt_list: Vec<f64>,
    pub metric: CostKind,
    pub n_seed: usize,
    pub n_iter: usize,
    pub surrogate_family: SurrogateFamily,
    pub smoothness: MaternOrder,
    pub acquisition: Acquisition,
    pub tp_dof: TpDof,
    /// Hyperparameters are refitted every this many iterations (and at the
    /// end of the seed design); factorizations update every iteration.
    pub refit_every: usize,
    /// Multi-start count for each hyperparameter fit.
    pub fit_restarts: usize,
    pub record_kernels: bool,
    pub seed: u64,
}

impl TuneConfig {
    /// Builds a config with the default search box and a seed design sized
    /// to the parameter count: 20 points and 100 iterations for two
    /// parameters, 120 and 300 for four or more.
    pub fn new(scenario: ScenarioConfig, dt_list: Vec<f64>, seed: u64) -> Result<Self> {
        let bounds = ParamBounds::default_box(scenario.model.nw(), scenario.model.nz());
        let (n_seed, n_iter) = Self::default_budget(bounds.dim());
        let cfg = Self {
            scenario,
            bounds,
            dt_list,
            metric: CostKind::Jnees,
            n_seed,
            n_iter,
            surrogate_family: SurrogateFamily::Gp,
            smoothness: MaternOrder::ThreeHalves,
            acquisition: Acquisition::ExpectedImprovement,
            tp_dof: TpDof::Fixed(5.0),
            refit_every: 10,
            fit_restarts: 3,
            record_kernels: false,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Default seed-design size and iteration budget for a parameter count.
    pub fn default_budget(dim: usize) -> (usize, usize) {
        if dim >= 4 {
            (120, 300)
        } else {
            (20, 100)
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.bounds.validate()?;
        if self.bounds.v.len() != self.scenario.model.nw()
            || self.bounds.w.len() != self.scenario.model.nz()
        {
            return Err(Error::Dimension(
                "bounds channel counts must match the model".into(),
            ));
        }
        if self.dt_list.is_empty() {
            return Err(Error::InvalidValue("dt list must be nonempty".into()));
        }
        let (lo, hi) = self.scenario.dt_bounds;
        for &dt in &self.dt_list {
            if !(dt >= lo && dt <= hi) {
                return Err(Error::InvalidValue(format!(
                    "dt={dt} outside admissible range [{lo}, {hi}]"
                )));
            }
        }
        for (i, &a) in self.dt_list.iter().enumerate() {
            if self.dt_list[i + 1..].contains(&a) {
                return Err(Error::InvalidValue("dt list entries must be distinct".into()));
            }
        }
        if self.n_seed < 2 {
            return Err(Error::InvalidValue("seed design needs at least 2 points".into()));
        }
        if self.refit_every == 0 {
            return Err(Error::InvalidValue("refit interval must be >= 1".into()));
        }
        if let TpDof::Fixed(dof) = self.tp_dof {
            if dof <= 2.0 {
                return Err(Error::InvalidValue(
                    "Student-t degrees of freedom must exceed 2".into(),
                ));
            }
        }
        Ok(())
    }
}

/// One objective evaluation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalRecord {
    pub q: NoiseIntensities,
    /// Worst cost across the sample times.
    pub cost: f64,
    /// Raw cost per entry of `dt_list`.
    pub per_dt: Vec<f64>,
}

/// Tuning output: the argmin over all evaluated points plus the full history.
#[derive(Debug, Clone, Serialize)]
pub struct TuneResult {
    pub q_star: NoiseIntensities,
    pub y_star: f64,
    pub history: Vec<EvalRecord>,
    #[serde(skip)]
    pub surrogate_snapshots: Option<Vec<Kernel>>,
    #[serde(skip)]
    pub wall_time: Duration,
}

/// Evaluates the candidate at every sample time in the list and keeps the
/// worst (largest) consistency cost.
pub fn multi_dt_cost(
    q: &NoiseIntensities,
    cfg: &TuneConfig,
    eval_seed: u64,
) -> Result<(f64, Vec<f64>)> {
    if !cfg.bounds.contains(q) {
        return Err(Error::InvalidValue(format!(
            "candidate {:?}/{:?} outside search bounds",
            q.v.as_slice(),
            q.w.as_slice()
        )));
    }
    let mut per_dt = Vec::with_capacity(cfg.dt_list.len());
    for (di, &dt) in cfg.dt_list.iter().enumerate() {
        let mut scenario = cfg.scenario.clone();
        scenario.candidate_noise = q.clone();
        scenario.dt = dt;
        scenario.master_seed = mix_seed(eval_seed, di as u64);
        let mc = monte_carlo(&scenario).map_err(|e| e.at_dt(dt))?;
        let (samples, dof) = match cfg.metric {
            CostKind::Jnees => (&mc.nees, scenario.model.nx()),
            CostKind::Jnis => (&mc.nis, scenario.model.nz()),
        };
        let cost = j_cost(samples, dof, cfg.metric, dt).map_err(|e| e.at_dt(dt))?;
        per_dt.push(cost.value);
    }
    let max = per_dt.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok((max, per_dt))
}

fn mix_seed(master: u64, stream: u64) -> u64 {
    use rand::RngCore;
    stream_rng(master, stream).next_u64()
}

/// Expected improvement for minimization. Zero at zero variance.
pub fn expected_improvement(mean: f64, variance: f64, best_so_far: f64) -> f64 {
    debug_assert!(variance >= 0.0);
    let sigma = variance.max(0.0).sqrt();
    if sigma == 0.0 {
        return 0.0;
    }
    let z = (best_so_far - mean) / sigma;
    (best_so_far - mean) * normal_cdf(z) + sigma * normal_pdf(z)
}

fn acquisition_value(acq: Acquisition, state: &SurrogateState, x: &DVector<f64>) -> f64 {
    let (mean, variance) = state.posterior(x);
    match acq {
        Acquisition::ExpectedImprovement => {
            expected_improvement(mean, variance, state.best_observed())
        }
        Acquisition::LowerConfidenceBound { kappa } => kappa * variance.sqrt() - mean,
    }
}

/// Maximizes the acquisition over the unit box: a wide random sweep followed
/// by coordinate-wise golden-section polish around the best candidates.
pub fn maximize_acquisition(
    state: &SurrogateState,
    acq: Acquisition,
    dim: usize,
    rng: &mut ChaCha12Rng,
) -> DVector<f64> {
    const SWEEP: usize = 1000;
    const POLISH: usize = 5;
    let mut candidates: Vec<(f64, DVector<f64>)> = (0..SWEEP)
        .map(|_| {
            let x = DVector::from_fn(dim, |_, _| rng.random_range(0.0..=1.0));
            (acquisition_value(acq, state, &x), x)
        })
        .collect();
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0));
    candidates.truncate(POLISH);

    let golden = (5f64.sqrt() - 1.0) / 2.0;
    for (value, x) in &mut candidates {
        for _ in 0..2 {
            for d in 0..dim {
                let mut lo = (x[d] - 0.15).max(0.0);
                let mut hi = (x[d] + 0.15).min(1.0);
                let mut probe = x.clone();
                let mut x1 = hi - golden * (hi - lo);
                let mut x2 = lo + golden * (hi - lo);
                let eval = |probe: &mut DVector<f64>, t: f64| {
                    probe[d] = t;
                    acquisition_value(acq, state, probe)
                };
                let mut f1 = eval(&mut probe, x1);
                let mut f2 = eval(&mut probe, x2);
                for _ in 0..25 {
                    if f1 > f2 {
                        hi = x2;
                        x2 = x1;
                        f2 = f1;
                        x1 = hi - golden * (hi - lo);
                        f1 = eval(&mut probe, x1);
                    } else {
                        lo = x1;
                        x1 = x2;
                        f1 = f2;
                        x2 = lo + golden * (hi - lo);
                        f2 = eval(&mut probe, x2);
                    }
                }
                let mid = 0.5 * (lo + hi);
                let f_mid = eval(&mut probe, mid);
                if f_mid > *value {
                    x[d] = mid;
                    *value = f_mid;
                } else {
                    probe[d] = x[d];
                }
            }
        }
    }
    candidates
        .into_iter()
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, x)| x)
        .expect("candidate sweep is nonempty")
}

/// Latin hypercube design on the unit box.
pub fn latin_hypercube(n: usize, dim: usize, rng: &mut ChaCha12Rng) -> Vec<DVector<f64>> {
    let mut coords = vec![vec![0.0f64; n]; dim];
    for column in coords.iter_mut() {
        let mut strata: Vec<usize> = (0..n).collect();
        // Fisher-Yates
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            strata.swap(i, j);
        }
        for (i, &s) in strata.iter().enumerate() {
            column[i] = (s as f64 + rng.random_range(0.0..1.0)) / n as f64;
        }
    }
    (0..n)
        .map(|i| DVector::from_fn(dim, |d, _| coords[d][i]))
        .collect()
}

/// Bayesian-optimization tuning against the Monte Carlo multi-`dt` cost.
pub fn bayesopt_tune(cfg: &TuneConfig) -> Result<TuneResult> {
    bayesopt_tune_with(cfg, |q, eval_seed| multi_dt_cost(q, cfg, eval_seed))
}

/// The optimization loop with a pluggable objective, used directly by tests
/// that substitute the closed-form oracle for the Monte Carlo cost.
///
/// The objective receives the candidate and an evaluation-indexed seed and
/// returns the scalar cost plus per-`dt` diagnostics.
pub fn bayesopt_tune_with<F>(cfg: &TuneConfig, objective: F) -> Result<TuneResult>
where
    F: Fn(&NoiseIntensities, u64) -> Result<(f64, Vec<f64>)>,
{
    cfg.validate()?;
    let start = Instant::now();
    let dim = cfg.bounds.dim();
    let mut rng = stream_rng(cfg.seed, u64::MAX);

    let evaluate = |point: &DVector<f64>,
                        eval_index: usize,
                        rng: &mut ChaCha12Rng|
     -> Result<(DVector<f64>, EvalRecord)> {
        let mut x = point.clone();
        let mut attempt = 0;
        loop {
            let q = cfg.bounds.from_unit(&x);
            match objective(&q, mix_seed(cfg.seed, eval_index as u64)) {
                Ok((cost, per_dt)) => return Ok((x, EvalRecord { q, cost, per_dt })),
                Err(err) if attempt == 0 => {
                    // one fresh draw before giving up on this iteration
                    attempt = 1;
                    let _ = err;
                    x = DVector::from_fn(dim, |_, _| rng.random_range(0.0..=1.0));
                }
                Err(err) => return Err(err),
            }
        }
    };

    let mut xs: Vec<DVector<f64>> = Vec::with_capacity(cfg.n_seed + cfg.n_iter);
    let mut history: Vec<EvalRecord> = Vec::with_capacity(cfg.n_seed + cfg.n_iter);
    for (j, p) in latin_hypercube(cfg.n_seed, dim, &mut rng).into_iter().enumerate() {
        let (x, record) = evaluate(&p, j, &mut rng)?;
        xs.push(x);
        history.push(record);
    }

    let mut kernel = Kernel::default_for_dim(dim, cfg.smoothness);
    let mut tp_dof = match cfg.tp_dof {
        TpDof::Fixed(dof) => dof,
        TpDof::Fitted => 5.0,
    };
    let mut snapshots = cfg.record_kernels.then(Vec::new);

    for i in 0..cfg.n_iter {
        let ys: Vec<f64> = history.iter().map(|r| r.cost).collect();
        if i % cfg.refit_every == 0 {
            let fit = fit_hyperparams(&xs, &ys, cfg.fit_restarts, &mut rng, cfg.smoothness);
            kernel = fit.kernel;
            if cfg.tp_dof == TpDof::Fitted {
                let probe = SurrogateState::new(
                    xs.clone(),
                    &ys,
                    kernel.clone(),
                    cfg.surrogate_family,
                    tp_dof,
                )?;
                tp_dof = fit_tp_dof(&probe);
            }
        }
        let state = SurrogateState::new(
            xs.clone(),
            &ys,
            kernel.clone(),
            cfg.surrogate_family,
            tp_dof,
        )?;
        if let Some(s) = &mut snapshots {
            s.push(kernel.clone());
        }
        let candidate = maximize_acquisition(&state, cfg.acquisition, dim, &mut rng);
        let (x, record) = evaluate(&candidate, cfg.n_seed + i, &mut rng)?;
        xs.push(x);
        history.push(record);
    }

    let best_idx = history
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.cost.total_cmp(&b.1.cost))
        .map(|(i, _)| i)
        .expect("history is nonempty");
    Ok(TuneResult {
        q_star: history[best_idx].q.clone(),
        y_star: history[best_idx].cost,
        history,
        surrogate_snapshots: snapshots,
        wall_time: start.elapsed(),
    })
}

/// Runs the downhill-simplex baseline on the same multi-`dt` objective and
/// evaluation budget as the Bayesian optimizer, from a caller-chosen start
/// in the unit box.
pub fn nelder_mead_tune(cfg: &TuneConfig, start_unit: &DVector<f64>) -> Result<TuneResult> {
    cfg.validate()?;
    let start = Instant::now();
    let dim = cfg.bounds.dim();
    assert_eq!(start_unit.len(), dim, "start point dimension mismatch");

    let history = std::cell::RefCell::new(Vec::new());
    let failure = std::cell::RefCell::new(None);
    let objective = |x: &[f64]| -> f64 {
        let q = cfg.bounds.from_unit(&DVector::from_row_slice(x));
        let eval_index = history.borrow().len() as u64;
        match multi_dt_cost(&q, cfg, mix_seed(cfg.seed, eval_index)) {
            Ok((cost, per_dt)) => {
                history.borrow_mut().push(EvalRecord { q, cost, per_dt });
                cost
            }
            Err(err) => {
                failure.borrow_mut().get_or_insert(err);
                f64::INFINITY
            }
        }
    };
    let unit_box = vec![(0.0, 1.0); dim];
    let opts = NelderMeadOpts {
        max_evals: cfg.n_seed + cfg.n_iter,
        ..Default::default()
    };
    let start_vec: Vec<f64> = start_unit.iter().copied().collect();
    let _ = nelder_mead(objective, &start_vec, &unit_box, &opts);
    if let Some(err) = failure.into_inner() {
        return Err(err);
    }
    let history = history.into_inner();
    let best_idx = history
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.cost.total_cmp(&b.1.cost))
        .map(|(i, _)| i)
        .ok_or_else(|| Error::Degenerate("no successful evaluations".into()))?;
    Ok(TuneResult {
        q_star: history[best_idx].q.clone(),
        y_star: history[best_idx].cost,
        history,
        surrogate_snapshots: None,
        wall_time: start.elapsed(),
    })
}

/// Downhill-simplex options.
#[derive(Debug, Clone)]
pub struct NelderMeadOpts {
    pub max_evals: usize,
    /// Terminate when the simplex diameter falls below this.
    pub diameter_tol: f64,
    /// Initial simplex step as a fraction of each box width.
    pub init_step: f64,
}

impl Default for NelderMeadOpts {
    fn default() -> Self {
        Self {
            max_evals: 500,
            diameter_tol: 1e-4,
            init_step: 0.1,
        }
    }
}

/// Downhill-simplex result.
#[derive(Debug, Clone)]
pub struct NelderMeadResult {
    pub x_min: Vec<f64>,
    pub f_min: f64,
    pub evals: usize,
}

/// Classic downhill simplex with reflection 1, expansion 2, contraction 0.5
/// and shrink 0.5; box handling by clamping.
pub fn nelder_mead<F>(
    mut objective: F,
    x0: &[f64],
    bounds: &[(f64, f64)],
    opts: &NelderMeadOpts,
) -> NelderMeadResult
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(x0.len(), bounds.len(), "x0 and bounds disagree on dimension");
    let dim = x0.len();
    let clamp = |x: &mut [f64]| {
        for (xi, &(lo, hi)) in x.iter_mut().zip(bounds) {
            *xi = xi.clamp(lo, hi);
        }
    };

    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        objective(x)
    };

    // initial simplex: x0 plus one step along each coordinate
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    let mut origin = x0.to_vec();
    clamp(&mut origin);
    let f0 = eval(&origin, &mut evals);
    simplex.push((origin.clone(), f0));
    for d in 0..dim {
        let (lo, hi) = bounds[d];
        let mut p = origin.clone();
        let step = opts.init_step * (hi - lo);
        p[d] = if p[d] + step <= hi { p[d] + step } else { p[d] - step };
        let f = eval(&p, &mut evals);
        simplex.push((p, f));
    }

    let diameter = |s: &[(Vec<f64>, f64)]| -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..s.len() {
            for j in i + 1..s.len() {
                let dist = s[i]
                    .0
                    .iter()
                    .zip(&s[j].0)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                d = d.max(dist);
            }
        }
        d
    };

    while evals < opts.max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if diameter(&simplex) < opts.diameter_tol {
            break;
        }
        let worst = simplex.len() - 1;
        let centroid: Vec<f64> = (0..dim)
            .map(|d| simplex[..worst].iter().map(|(p, _)| p[d]).sum::<f64>() / worst as f64)
            .collect();

        let make = |coef: f64| -> Vec<f64> {
            let mut p: Vec<f64> = centroid
                .iter()
                .zip(&simplex[worst].0)
                .map(|(c, w)| c + coef * (c - w))
                .collect();
            clamp(&mut p);
            p
        };

        let reflected = make(1.0);
        let f_reflected = eval(&reflected, &mut evals);
        if f_reflected < simplex[0].1 {
            let expanded = make(2.0);
            let f_expanded = eval(&expanded, &mut evals);
            simplex[worst] = if f_expanded < f_reflected {
                (expanded, f_expanded)
            } else {
                (reflected, f_reflected)
            };
        } else if f_reflected < simplex[worst - 1].1 {
            simplex[worst] = (reflected, f_reflected);
        } else {
            let contracted = if f_reflected < simplex[worst].1 {
                make(0.5)
            } else {
                make(-0.5)
            };
            let f_contracted = eval(&contracted, &mut evals);
            if f_contracted < simplex[worst].1.min(f_reflected) {
                simplex[worst] = (contracted, f_contracted);
            } else {
                // shrink toward the best vertex
                let best = simplex[0].0.clone();
                for entry in simplex.iter_mut().skip(1) {
                    let mut p: Vec<f64> = best
                        .iter()
                        .zip(&entry.0)
                        .map(|(b, x)| b + 0.5 * (x - b))
                        .collect();
                    clamp(&mut p);
                    let f = eval(&p, &mut evals);
                    *entry = (p, f);
                    if evals >= opts.max_evals {
                        break;
                    }
                }
            }
        }
    }

    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x_min, f_min) = simplex.swap_remove(0);
    NelderMeadResult { x_min, f_min, evals }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sysmodel::tracking_1d;
    use approx::assert_relative_eq;
    use rand::SeedableRng;

    fn small_tune_config(runs: usize, steps: usize) -> TuneConfig {
        let scenario = ScenarioConfig::new(
            tracking_1d(),
            NoiseIntensities::from_slices(&[1.0], &[0.1]).unwrap(),
            NoiseIntensities::from_slices(&[1.0], &[0.1]).unwrap(),
            0.1,
            steps,
            runs,
            0,
        )
        .unwrap();
        TuneConfig::new(scenario, vec![0.1, 0.5], 7).unwrap()
    }

    #[test]
    fn bounds_roundtrip_through_unit_box() {
        let bounds = ParamBounds::default_box(2, 2);
        let q = NoiseIntensities::from_slices(&[0.5, 3.0], &[0.02, 0.4]).unwrap();
        let u = bounds.to_unit(&q);
        assert!(u.iter().all(|&t| (0.0..=1.0).contains(&t)));
        let back = bounds.from_unit(&u);
        for (a, b) in q.v.iter().zip(back.v.iter()) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
        for (a, b) in q.w.iter().zip(back.w.iter()) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn expected_improvement_closed_forms() {
        assert_eq!(expected_improvement(1.0, 0.0, 0.5), 0.0);
        assert_eq!(expected_improvement(0.5, 0.0, 0.5), 0.0);
        let sigma = 0.7;
        assert_relative_eq!(
            expected_improvement(1.0, sigma * sigma, 1.0),
            sigma / (2.0 * std::f64::consts::PI).sqrt(),
            epsilon = 1e-12
        );
        // exploration: at equal mean, larger variance gives larger EI
        let small = expected_improvement(1.2, 0.01, 1.0);
        let large = expected_improvement(1.2, 1.0, 1.0);
        assert!(large > small && small > 0.0);
    }

    #[test]
    fn latin_hypercube_stratifies_each_dimension() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let n = 16;
        let points = latin_hypercube(n, 3, &mut rng);
        assert_eq!(points.len(), n);
        for d in 0..3 {
            let mut strata: Vec<usize> =
                points.iter().map(|p| (p[d] * n as f64) as usize).collect();
            strata.sort_unstable();
            assert_eq!(strata, (0..n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn acquisition_maximizer_is_deterministic_and_bounded() {
        let xs = vec![
            DVector::from_row_slice(&[0.2, 0.2]),
            DVector::from_row_slice(&[0.8, 0.3]),
            DVector::from_row_slice(&[0.5, 0.9]),
            DVector::from_row_slice(&[0.1, 0.7]),
        ];
        let ys = [1.0, 0.9, 0.1, 1.1];
        let kernel = Kernel::default_for_dim(2, MaternOrder::ThreeHalves);
        let state =
            SurrogateState::new(xs, &ys, kernel, SurrogateFamily::Gp, 5.0).unwrap();
        let a = maximize_acquisition(
            &state,
            Acquisition::ExpectedImprovement,
            2,
            &mut stream_rng(5, 1),
        );
        let b = maximize_acquisition(
            &state,
            Acquisition::ExpectedImprovement,
            2,
            &mut stream_rng(5, 1),
        );
        assert_eq!(a, b);
        assert!(a.iter().all(|&t| (0.0..=1.0).contains(&t)));
        let ei = {
            let (mean, var) = state.posterior(&a);
            expected_improvement(mean, var, state.best_observed())
        };
        assert!(ei > 0.0);
    }

    #[test]
    fn nelder_mead_on_quadratic() {
        let result = nelder_mead(
            |x| (x[0] - 1.0) * (x[0] - 1.0),
            &[5.0],
            &[(-10.0, 10.0)],
            &NelderMeadOpts::default(),
        );
        assert!((result.x_min[0] - 1.0).abs() < 1e-3, "{:?}", result.x_min);
    }

    #[test]
    fn nelder_mead_on_rosenbrock() {
        let rosenbrock = |x: &[f64]| {
            100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2)
        };
        let opts = NelderMeadOpts {
            max_evals: 500,
            diameter_tol: 1e-10,
            init_step: 0.1,
        };
        let result = nelder_mead(rosenbrock, &[-1.2, 1.0], &[(-5.0, 5.0), (-5.0, 5.0)], &opts);
        assert!(
            result.f_min < 1e-6,
            "f_min {} after {} evals",
            result.f_min,
            result.evals
        );
        assert!(result.evals <= 500);
    }

    #[test]
    fn nelder_mead_respects_bounds() {
        // unconstrained minimum at -3, box keeps it at the boundary
        let result = nelder_mead(
            |x| (x[0] + 3.0) * (x[0] + 3.0),
            &[0.5],
            &[(0.0, 1.0)],
            &NelderMeadOpts::default(),
        );
        assert!(result.x_min[0] >= 0.0);
        assert!(result.x_min[0] < 1e-3);
    }

    #[test]
    fn multi_dt_cost_singleton_and_max_property() {
        let mut cfg = small_tune_config(20, 50);
        let q = NoiseIntensities::from_slices(&[1.0], &[0.1]).unwrap();
        let (cost, per_dt) = multi_dt_cost(&q, &cfg, 11).unwrap();
        assert_eq!(per_dt.len(), 2);
        assert_relative_eq!(cost, per_dt[0].max(per_dt[1]), epsilon = 1e-15);

        cfg.dt_list = vec![0.1];
        let (single, per_single) = multi_dt_cost(&q, &cfg, 11).unwrap();
        assert_eq!(per_single.len(), 1);
        assert_relative_eq!(single, per_single[0], epsilon = 1e-15);
    }

    #[test]
    fn multi_dt_cost_small_at_ground_truth() {
        let cfg = small_tune_config(200, 200);
        let q = NoiseIntensities::from_slices(&[1.0], &[0.1]).unwrap();
        let (cost, _) = multi_dt_cost(&q, &cfg, 1).unwrap();
        assert!(cost < 0.1, "ground-truth cost {cost}");
    }

    #[test]
    fn multi_dt_cost_rejects_out_of_bounds() {
        let cfg = small_tune_config(5, 10);
        let q = NoiseIntensities::from_slices(&[50.0], &[0.1]).unwrap();
        assert!(multi_dt_cost(&q, &cfg, 0).is_err());
    }

    /// Cheap separable objective with minimum at the unit-box center.
    fn analytic_objective(bounds: &ParamBounds, q: &NoiseIntensities) -> f64 {
        let u = bounds.to_unit(q);
        u.iter().map(|&t| (t - 0.5) * (t - 0.5)).sum::<f64>()
    }

    #[test]
    fn bayesopt_runs_deterministically() {
        let mut cfg = small_tune_config(2, 5);
        cfg.n_seed = 6;
        cfg.n_iter = 4;
        cfg.refit_every = 2;
        let obj = |q: &NoiseIntensities, _seed: u64| {
            Ok((analytic_objective(&ParamBounds::default_box(1, 1), q), vec![]))
        };
        let a = bayesopt_tune_with(&cfg, obj).unwrap();
        let b = bayesopt_tune_with(&cfg, obj).unwrap();
        assert_eq!(a.y_star, b.y_star);
        assert_eq!(a.q_star.v, b.q_star.v);
        assert_eq!(a.history.len(), b.history.len());
        assert_eq!(a.history.len(), 10);
        for (ra, rb) in a.history.iter().zip(&b.history) {
            assert_eq!(ra.cost, rb.cost);
            assert_eq!(ra.q.v, rb.q.v);
        }
    }

    #[test]
    fn bayesopt_zero_iterations_returns_seed_best() {
        let mut cfg = small_tune_config(2, 5);
        cfg.n_seed = 5;
        cfg.n_iter = 0;
        let obj = |q: &NoiseIntensities, _seed: u64| {
            Ok((analytic_objective(&ParamBounds::default_box(1, 1), q), vec![]))
        };
        let result = bayesopt_tune_with(&cfg, obj).unwrap();
        assert_eq!(result.history.len(), 5);
        let best = result
            .history
            .iter()
            .map(|r| r.cost)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(result.y_star, best);
    }

    #[test]
    fn bayesopt_history_is_within_bounds_and_best_monotone() {
        let mut cfg = small_tune_config(2, 5);
        cfg.n_seed = 6;
        cfg.n_iter = 6;
        cfg.refit_every = 3;
        let obj = |q: &NoiseIntensities, _seed: u64| {
            Ok((analytic_objective(&ParamBounds::default_box(1, 1), q), vec![]))
        };
        let result = bayesopt_tune_with(&cfg, obj).unwrap();
        let mut running = f64::INFINITY;
        let mut seen = Vec::new();
        for r in &result.history {
            assert!(cfg.bounds.contains(&r.q));
            running = running.min(r.cost);
            seen.push(running);
        }
        assert!(seen.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(result.y_star, running);
    }

    #[test]
    fn nelder_mead_tune_tracks_history_and_budget() {
        let mut cfg = small_tune_config(5, 20);
        cfg.n_seed = 4;
        cfg.n_iter = 16;
        let start = DVector::from_row_slice(&[0.5, 0.5]);
        let result = nelder_mead_tune(&cfg, &start).unwrap();
        assert!(!result.history.is_empty());
        assert!(result.history.len() <= cfg.n_seed + cfg.n_iter);
        assert_eq!(
            result.y_star,
            result
                .history
                .iter()
                .map(|r| r.cost)
                .fold(f64::INFINITY, f64::min)
        );
        for r in &result.history {
            assert!(cfg.bounds.contains(&r.q));
        }
        // deterministic
        let again = nelder_mead_tune(&cfg, &start).unwrap();
        assert_eq!(result.y_star, again.y_star);
        assert_eq!(result.history.len(), again.history.len());
    }

    #[test]
    fn bayesopt_skips_one_failure_then_aborts() {
        use std::cell::Cell;
        let mut cfg = small_tune_config(2, 5);
        cfg.n_seed = 3;
        cfg.n_iter = 0;
        let failures = Cell::new(0usize);
        let obj = |q: &NoiseIntensities, _seed: u64| {
            if failures.get() < 1 {
                failures.set(failures.get() + 1);
                return Err(Error::InvalidValue("synthetic failure".into()));
            }
            Ok((analytic_objective(&ParamBounds::default_box(1, 1), q), vec![]))
        };
        let result = bayesopt_tune_with(&cfg, obj).unwrap();
        assert_eq!(result.history.len(), 3);

        // a persistently failing objective aborts
        let always = |_: &NoiseIntensities, _: u64| -> Result<(f64, Vec<f64>)> {
            Err(Error::InvalidValue("synthetic failure".into()))
        };
        assert!(bayesopt_tune_with(&cfg, always).is_err());
    }
}
