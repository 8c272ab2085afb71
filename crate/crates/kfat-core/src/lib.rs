//! Consistency-based auto-tuning for discrete-time linear Kalman filters.
//!
//! Tuning a Kalman filter means choosing the continuous-time process and
//! measurement noise intensities. Judged at a single sample time, the
//! NEES/NIS consistency cost admits a whole curve of apparently-correct
//! intensity pairs; evaluating the cost at several sample times and keeping
//! the worst case collapses that ambiguity to the true intensities. This
//! crate provides the pieces needed to exploit that:
//!
//! - [`sysmodel`]: continuous-time LTI plants and Van Loan discretization,
//! - [`kalman`]: the discrete-time linear filter,
//! - [`simulate`]: seeded Monte Carlo truth/measurement generation,
//! - [`metrics`]: NEES/NIS statistics, log-consistency costs and χ² bands,
//! - [`oracle`]: closed-form expected NEES under mismatched intensities,
//! - [`surrogate`]: Matérn-ARD Gaussian- and Student-t-process regression,
//! - [`tuner`]: the Bayesian-optimization loop and a downhill-simplex baseline,
//! - [`config`]: the JSON configuration schema shared with the CLI.

pub mod config;
pub mod error;
pub mod kalman;
pub mod metrics;
pub mod oracle;
pub mod simulate;
pub mod special;
pub mod surrogate;
pub mod sysmodel;
pub mod tuner;

pub use config::Config;
pub use error::Error;
pub use kalman::{FilterState, FilterTrace};
pub use metrics::{ConsistencyCost, CostKind, NeesForm};
pub use oracle::{GridSpec, OracleOpts, OracleResult};
pub use simulate::{MonteCarloResult, ScenarioConfig};
pub use surrogate::{Kernel, MaternOrder, SurrogateFamily, SurrogateState};
pub use sysmodel::{ContinuousModel, DiscreteModel, NoiseIntensities, SensorKind};
pub use tuner::{ParamBounds, TuneConfig, TuneResult};

/// Crate result alias.
pub type Result<T> = std::result::Result<T, Error>;
