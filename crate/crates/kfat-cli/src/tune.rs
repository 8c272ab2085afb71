//! `kfat tune` — run an optimizer for one or more trials.

use clap::Args;
use kfat_core::simulate::stream_rng;
use kfat_core::surrogate::SurrogateFamily;
use kfat_core::tuner::{bayesopt_tune, latin_hypercube, nelder_mead_tune, TuneResult};
use rand::RngCore;

use crate::output::{self, Result};
use crate::scan::{load_config, MetricArg};
use crate::CommonArgs;

#[derive(Args)]
pub struct TuneArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Optimizer to run
    #[arg(long, value_enum)]
    pub method: Method,
    /// Independent tuning trials
    #[arg(long, default_value_t = 1)]
    pub trials: usize,
    /// Sample times, comma-separated; defaults to the configured list
    #[arg(long, value_name = "CSV")]
    pub dt_list: Option<String>,
    /// Consistency metric
    #[arg(long, value_enum)]
    pub metric: Option<MetricArg>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum Method {
    /// Gaussian-process Bayesian optimization
    Gpbo,
    /// Student-t-process Bayesian optimization
    Tpbo,
    /// Downhill simplex
    NelderMead,
}

impl Method {
    fn label(self) -> &'static str {
        match self {
            Method::Gpbo => "gpbo",
            Method::Tpbo => "tpbo",
            Method::NelderMead => "nelder-mead",
        }
    }
}

pub fn run(args: &TuneArgs) -> Result<()> {
    let config = load_config(&args.common)?;
    let out = &args.common.out;
    output::ensure_dir(out)?;
    output::write_manifest(out, "tune", &args.common.config, args.common.seed)?;
    let results_dir = output::results_dir(out)?;

    let mut base = config.tune_config()?;
    if let Some(text) = &args.dt_list {
        base.dt_list = output::parse_dt_list(text)?;
    }
    if let Some(metric) = args.metric {
        base.metric = metric.into();
    }
    base.surrogate_family = match args.method {
        Method::Gpbo => SurrogateFamily::Gp,
        Method::Tpbo => SurrogateFamily::Tp,
        Method::NelderMead => base.surrogate_family,
    };
    base.validate()?;

    let base_seed = base.seed;
    let dim = base.bounds.dim();
    // one start per trial, stratified over the box
    let nm_starts = latin_hypercube(args.trials.max(1), dim, &mut stream_rng(base_seed, u64::MAX));

    let mut results: Vec<TuneResult> = Vec::with_capacity(args.trials);
    for trial in 0..args.trials.max(1) {
        let mut cfg = base.clone();
        cfg.seed = stream_rng(base_seed, trial as u64).next_u64();
        let result = match args.method {
            Method::Gpbo | Method::Tpbo => bayesopt_tune(&cfg)?,
            Method::NelderMead => nelder_mead_tune(&cfg, &nm_starts[trial])?,
        };
        write_trial(&results_dir, out, trial, &cfg.dt_list, &result)?;
        results.push(result);
    }

    write_summary(out, args.method.label(), &results)?;
    Ok(())
}

fn write_trial(
    results_dir: &std::path::Path,
    out: &std::path::Path,
    trial: usize,
    dt_list: &[f64],
    result: &TuneResult,
) -> Result<()> {
    let value = serde_json::to_value(result)
        .map_err(|e| kfat_core::Error::Config(format!("trial serialization: {e}")))?;
    output::write_json(&results_dir.join(format!("trial_{trial}.json")), &value)?;

    let mut header: Vec<String> = vec!["iteration".into()];
    let q0 = &result.history[0].q;
    header.extend((0..q0.v.len()).map(|i| format!("v{i}")));
    header.extend((0..q0.w.len()).map(|j| format!("w{j}")));
    header.extend(dt_list.iter().map(|dt| format!("cost_dt_{}", output::dt_label(*dt))));
    header.push("cost_max".into());
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();

    let rows = result.history.iter().enumerate().map(|(i, r)| {
        let mut row = vec![i.to_string()];
        row.extend(r.q.v.iter().map(|&x| output::fmt_f64(x)));
        row.extend(r.q.w.iter().map(|&x| output::fmt_f64(x)));
        for di in 0..dt_list.len() {
            row.push(
                r.per_dt
                    .get(di)
                    .map(|&c| output::fmt_f64(c))
                    .unwrap_or_default(),
            );
        }
        row.push(output::fmt_f64(r.cost));
        row
    });
    output::write_csv(
        &out.join(format!("tune_history_{trial}.csv")),
        &header_refs,
        rows,
    )
}

fn write_summary(out: &std::path::Path, method: &str, results: &[TuneResult]) -> Result<()> {
    let q0 = &results[0].q_star;
    let mut rows = Vec::new();
    let mut push_param = |name: String, values: Vec<f64>| {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let variance = if values.len() > 1 {
            values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        rows.push(vec![
            method.to_string(),
            name,
            output::fmt_f64(mean),
            output::fmt_f64(variance),
        ]);
    };
    for i in 0..q0.v.len() {
        push_param(
            format!("v{i}"),
            results.iter().map(|r| r.q_star.v[i]).collect(),
        );
    }
    for j in 0..q0.w.len() {
        push_param(
            format!("w{j}"),
            results.iter().map(|r| r.q_star.w[j]).collect(),
        );
    }
    output::write_csv(
        &out.join("tune_summary.csv"),
        &["method", "param", "mean", "variance"],
        rows,
    )
}
