//! JSON configuration schema shared by the library and the CLI.
//!
//! One file describes the plant, the simulation scenario and the tuner;
//! commands override individual fields through flags. Systems are given
//! either as a named preset or as explicit row-major matrices.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::metrics::CostKind;
use crate::simulate::{ScenarioConfig, DT_BOUNDS_DEFAULT};
use crate::surrogate::{MaternOrder, SurrogateFamily};
use crate::sysmodel::{tracking_1d, tracking_2d, ContinuousModel, NoiseIntensities, SensorKind};
use crate::tuner::{Acquisition, ParamBounds, TpDof, TuneConfig};
use crate::Result;

/// System description: a named benchmark or explicit matrices.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SystemSpec {
    Preset { preset: Preset },
    Explicit(ExplicitSystem),
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub enum Preset {
    #[serde(rename = "tracking_1d")]
    Tracking1d,
    #[serde(rename = "tracking_2d")]
    Tracking2d,
}

/// Explicit continuous-time matrices, row-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExplicitSystem {
    pub a: Vec<Vec<f64>>,
    pub g: Vec<Vec<f64>>,
    pub gamma: Vec<Vec<f64>>,
    pub h: Vec<Vec<f64>>,
    pub sensor_kind: SensorKind,
}

fn matrix_from_rows(name: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    if rows.is_empty() || rows[0].is_empty() {
        return Err(Error::Config(format!("matrix '{name}' must be nonempty")));
    }
    let ncols = rows[0].len();
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Config(format!(
            "matrix '{name}' rows have inconsistent lengths"
        )));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(DMatrix::from_row_slice(rows.len(), ncols, &flat))
}

impl SystemSpec {
    pub fn build(&self) -> Result<ContinuousModel> {
        match self {
            SystemSpec::Preset { preset: Preset::Tracking1d } => Ok(tracking_1d()),
            SystemSpec::Preset { preset: Preset::Tracking2d } => Ok(tracking_2d()),
            SystemSpec::Explicit(e) => ContinuousModel::new(
                matrix_from_rows("a", &e.a)?,
                matrix_from_rows("g", &e.g)?,
                matrix_from_rows("gamma", &e.gamma)?,
                matrix_from_rows("h", &e.h)?,
                e.sensor_kind,
            ),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub v: Vec<f64>,
    pub w: Vec<f64>,
}

impl NoiseSpec {
    pub fn build(&self) -> Result<NoiseIntensities> {
        NoiseIntensities::from_slices(&self.v, &self.w)
    }
}

fn default_dt() -> f64 {
    0.1
}
fn default_steps() -> usize {
    200
}
fn default_runs() -> usize {
    200
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub true_noise: NoiseSpec,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p0_diag: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_bounds: Option<(f64, f64)>,
}

fn default_dt_list() -> Vec<f64> {
    vec![0.1, 0.5]
}
fn default_metric() -> CostKind {
    CostKind::Jnees
}
fn default_family() -> SurrogateFamily {
    SurrogateFamily::Gp
}
fn default_smoothness() -> MaternOrder {
    MaternOrder::ThreeHalves
}
fn default_acquisition() -> Acquisition {
    Acquisition::ExpectedImprovement
}
fn default_tp_dof() -> f64 {
    5.0
}
fn default_refit_every() -> usize {
    10
}
fn default_fit_restarts() -> usize {
    3
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundsSpec {
    pub v: Vec<(f64, f64)>,
    pub w: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TunerSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundsSpec>,
    #[serde(default = "default_dt_list")]
    pub dt_list: Vec<f64>,
    #[serde(default = "default_metric")]
    pub metric: CostKind,
    /// Seed design size; sized to the parameter count when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_seed: Option<usize>,
    /// Iteration budget; sized to the parameter count when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_iter: Option<usize>,
    #[serde(default = "default_family")]
    pub surrogate: SurrogateFamily,
    #[serde(default = "default_smoothness")]
    pub smoothness: MaternOrder,
    #[serde(default = "default_acquisition")]
    pub acquisition: Acquisition,
    #[serde(default = "default_tp_dof")]
    pub tp_dof: f64,
    #[serde(default)]
    pub fit_tp_dof: bool,
    #[serde(default = "default_refit_every")]
    pub refit_every: usize,
    #[serde(default = "default_fit_restarts")]
    pub fit_restarts: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for TunerSpec {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all tuner fields have defaults")
    }
}

/// Top-level configuration document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Config {
    pub system: SystemSpec,
    pub scenario: ScenarioSpec,
    #[serde(default)]
    pub tuner: TunerSpec,
    /// Replaces the system's measurement-covariance mapping when set;
    /// the CLI exposes this as `--sensor-kind`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sensor_kind_override: Option<SensorKind>,
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialization cannot fail")
    }

    /// The continuous model with any sensor-kind override applied.
    pub fn model(&self) -> Result<ContinuousModel> {
        let mut model = self.system.build()?;
        if let Some(kind) = self.sensor_kind_override {
            model.sensor_kind = kind;
        }
        Ok(model)
    }

    /// Builds the simulation scenario; the candidate defaults to the true
    /// intensities when not supplied.
    pub fn scenario_config(&self, candidate: Option<NoiseIntensities>) -> Result<ScenarioConfig> {
        let model = self.model()?;
        let true_noise = self.scenario.true_noise.build()?;
        let candidate = candidate.unwrap_or_else(|| true_noise.clone());
        let mut cfg = ScenarioConfig::new(
            model,
            true_noise,
            candidate,
            self.scenario.dt,
            self.scenario.steps,
            self.scenario.runs,
            self.scenario.master_seed,
        );
        if let Ok(c) = &mut cfg {
            c.x0 = self
                .scenario
                .x0
                .as_ref()
                .map(|v| DVector::from_row_slice(v));
            c.p0_diag = self
                .scenario
                .p0_diag
                .as_ref()
                .map(|v| DVector::from_row_slice(v));
            if let Some(bounds) = self.scenario.dt_bounds {
                c.dt_bounds = bounds;
            } else {
                c.dt_bounds = DT_BOUNDS_DEFAULT;
            }
            c.validate()?;
        }
        cfg
    }

    pub fn tune_config(&self) -> Result<TuneConfig> {
        let scenario = self.scenario_config(None)?;
        let spec = &self.tuner;
        let bounds = match &spec.bounds {
            Some(b) => ParamBounds {
                v: b.v.clone(),
                w: b.w.clone(),
            },
            None => ParamBounds::default_box(scenario.model.nw(), scenario.model.nz()),
        };
        let (default_seed, default_iter) = TuneConfig::default_budget(bounds.dim());
        let cfg = TuneConfig {
            scenario,
            bounds,
            dt_list: spec.dt_list.clone(),
            metric: spec.metric,
            n_seed: spec.n_seed.unwrap_or(default_seed),
            n_iter: spec.n_iter.unwrap_or(default_iter),
            surrogate_family: spec.surrogate,
            smoothness: spec.smoothness,
            acquisition: spec.acquisition,
            tp_dof: if spec.fit_tp_dof {
                TpDof::Fitted
            } else {
                TpDof::Fixed(spec.tp_dof)
            },
            refit_every: spec.refit_every,
            fit_restarts: spec.fit_restarts,
            record_kernels: false,
            seed: spec.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXPLICIT_1D: &str = r#"{
        "system": {
            "a": [[0, 1], [0, 0]],
            "g": [[0], [1]],
            "gamma": [[0], [1]],
            "h": [[1, 0]],
            "sensor_kind": "non_integrating"
        },
        "scenario": {
            "true_noise": {"v": [1.0], "w": [0.1]},
            "dt": 0.1,
            "steps": 50,
            "runs": 10,
            "master_seed": 7
        },
        "tuner": {"n_seed": 5, "n_iter": 3, "seed": 9}
    }"#;

    #[test]
    fn explicit_system_matches_preset() {
        let config = Config::from_json(EXPLICIT_1D).unwrap();
        let model = config.system.build().unwrap();
        assert_eq!(model, tracking_1d());
    }

    #[test]
    fn preset_shorthand_parses() {
        let config = Config::from_json(
            r#"{
                "system": {"preset": "tracking_2d"},
                "scenario": {"true_noise": {"v": [1.0, 2.0], "w": [0.2, 0.1]}}
            }"#,
        )
        .unwrap();
        let model = config.system.build().unwrap();
        assert_eq!(model, tracking_2d());
        // defaults fill in
        assert_eq!(config.scenario.steps, 200);
        assert_eq!(config.tuner.dt_list, vec![0.1, 0.5]);
        // four-parameter system: the seed design scales up
        let tune = config.tune_config().unwrap();
        assert_eq!((tune.n_seed, tune.n_iter), (120, 300));
    }

    #[test]
    fn scenario_round_trips_through_json() {
        let config = Config::from_json(EXPLICIT_1D).unwrap();
        let direct = config.scenario_config(None).unwrap();
        let reparsed = Config::from_json(&config.to_json()).unwrap();
        let again = reparsed.scenario_config(None).unwrap();
        assert_eq!(direct.model, again.model);
        assert_eq!(direct.true_noise, again.true_noise);
        assert_eq!(direct.dt, again.dt);
        assert_eq!(direct.steps, again.steps);
        assert_eq!(direct.runs, again.runs);
        assert_eq!(direct.master_seed, again.master_seed);
    }

    #[test]
    fn tune_config_builds_with_defaults() {
        let config = Config::from_json(EXPLICIT_1D).unwrap();
        let tune = config.tune_config().unwrap();
        assert_eq!(tune.n_seed, 5);
        assert_eq!(tune.n_iter, 3);
        assert_eq!(tune.seed, 9);
        assert_eq!(tune.bounds, ParamBounds::default_box(1, 1));
    }

    #[test]
    fn sensor_kind_override_changes_r_mapping() {
        let mut config = Config::from_json(EXPLICIT_1D).unwrap();
        config.sensor_kind_override = Some(SensorKind::Integrating);
        let model = config.model().unwrap();
        assert_eq!(model.sensor_kind, SensorKind::Integrating);
        let scenario = config.scenario_config(None).unwrap();
        let discrete =
            crate::sysmodel::discretize(&scenario.model, &scenario.true_noise, 0.5).unwrap();
        // integrating sensors divide the intensity by the sample time
        assert!((discrete.r[(0, 0)] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn malformed_documents_are_rejected() {
        assert!(Config::from_json("{").is_err());
        // ragged matrix
        let bad = EXPLICIT_1D.replace("[[0, 1], [0, 0]]", "[[0, 1], [0]]");
        let config = Config::from_json(&bad).unwrap();
        assert!(config.system.build().is_err());
        // wrong intensity count
        let bad = EXPLICIT_1D.replace(r#"{"v": [1.0], "w": [0.1]}"#, r#"{"v": [1.0, 2.0], "w": [0.1]}"#);
        let config = Config::from_json(&bad).unwrap();
        assert!(config.scenario_config(None).is_err());
    }
}
