//! Optimizer quality against the noise-free theoretical cost: with the
//! closed-form surface substituted for Monte Carlo, the worst-case-over-dt
//! objective has its global minimum at the true intensities, and the
//! Bayesian optimizer must land in that cell almost every trial.

use kfat_core::metrics::CostKind;
use kfat_core::oracle::{expected_nees, OracleOpts};
use kfat_core::simulate::ScenarioConfig;
use kfat_core::surrogate::{MaternOrder, SurrogateFamily};
use kfat_core::sysmodel::{tracking_1d, NoiseIntensities};
use kfat_core::tuner::{bayesopt_tune_with, Acquisition, ParamBounds, TpDof, TuneConfig};

#[test]
fn bayesopt_on_oracle_objective_hits_ground_truth_cell() {
    let cont = tracking_1d();
    let truth = NoiseIntensities::from_slices(&[1.0], &[0.1]).unwrap();
    let dt_list = [0.1, 0.5];
    let opts = OracleOpts::default();

    let objective = |q: &NoiseIntensities, _seed: u64| {
        let mut per_dt = Vec::with_capacity(dt_list.len());
        for &dt in &dt_list {
            per_dt.push(expected_nees(&cont, q, &truth, dt, &opts)?.jnees);
        }
        let max = per_dt.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Ok((max, per_dt))
    };

    // one cell of a 50x50 log grid over the search box
    let cell = (5.0f64.ln() - 0.1f64.ln()) / 49.0;
    let mut hits = 0;
    for trial in 0..10u64 {
        let scenario = ScenarioConfig::new(
            cont.clone(),
            truth.clone(),
            truth.clone(),
            0.1,
            10,
            2,
            0,
        )
        .unwrap();
        let cfg = TuneConfig {
            scenario,
            bounds: ParamBounds::default_box(1, 1),
            dt_list: dt_list.to_vec(),
            metric: CostKind::Jnees,
            n_seed: 20,
            n_iter: 80,
            surrogate_family: SurrogateFamily::Gp,
            smoothness: MaternOrder::ThreeHalves,
            acquisition: Acquisition::ExpectedImprovement,
            tp_dof: TpDof::Fixed(5.0),
            refit_every: 10,
            fit_restarts: 3,
            record_kernels: false,
            seed: 1000 + trial,
        };
        let result = bayesopt_tune_with(&cfg, objective).unwrap();
        let dv = result.q_star.v[0].ln().abs();
        let dw = (result.q_star.w[0] / 0.1).ln().abs();
        if dv <= cell && dw <= cell {
            hits += 1;
        } else {
            println!(
                "trial {trial}: q* = ({:.4}, {:.4}), y* = {:.5}",
                result.q_star.v[0], result.q_star.w[0], result.y_star
            );
        }
    }
    assert!(hits >= 9, "only {hits}/10 trials reached the ground-truth cell");
}
