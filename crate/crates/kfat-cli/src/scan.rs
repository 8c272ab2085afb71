//! `kfat scan` — Monte Carlo cost surfaces over an intensity grid.

use clap::Args;
use kfat_core::config::Config;
use kfat_core::metrics::{j_cost, CostKind};
use kfat_core::simulate::{monte_carlo, stream_rng};
use kfat_core::sysmodel::NoiseIntensities;
use kfat_core::Error;
use rand::RngCore;
use rayon::prelude::*;

use crate::output::{self, Result};
use crate::CommonArgs;

#[derive(Args)]
pub struct ScanArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Grid as Vlo:Vhi:n,Wlo:Whi:n (log-spaced)
    #[arg(long, default_value = "0.1:5:20,0.01:0.5:20")]
    pub grid: String,
    /// Sample times, comma-separated; defaults to the configured list
    #[arg(long, value_name = "CSV")]
    pub dt_list: Option<String>,
    /// Consistency metric
    #[arg(long, value_enum)]
    pub metric: Option<MetricArg>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum MetricArg {
    Jnees,
    Jnis,
}

impl From<MetricArg> for CostKind {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Jnees => CostKind::Jnees,
            MetricArg::Jnis => CostKind::Jnis,
        }
    }
}

pub fn load_config(common: &CommonArgs) -> Result<Config> {
    let mut config = Config::from_file(&common.config)?;
    if let Some(seed) = common.seed {
        config.scenario.master_seed = seed;
        config.tuner.seed = seed;
    }
    if let Some(runs) = common.runs {
        config.scenario.runs = runs;
    }
    if let Some(steps) = common.steps {
        config.scenario.steps = steps;
    }
    if let Some(kind) = common.sensor_kind {
        config.sensor_kind_override = Some(kind.into());
    }
    Ok(config)
}

pub fn run(args: &ScanArgs) -> Result<()> {
    let config = load_config(&args.common)?;
    let out = &args.common.out;
    output::ensure_dir(out)?;
    output::write_manifest(out, "scan", &args.common.config, args.common.seed)?;

    let grid = output::parse_grid(&args.grid)?;
    let dt_list = match &args.dt_list {
        Some(text) => output::parse_dt_list(text)?,
        None => config.tuner.dt_list.clone(),
    };
    if dt_list.is_empty() {
        return Err(Error::Config("dt list is empty".into()));
    }
    let metric: CostKind = args.metric.map(Into::into).unwrap_or(config.tuner.metric);

    let template = config.scenario_config(None)?;
    if template.model.nw() != 1 || template.model.nz() != 1 {
        return Err(Error::Dimension(
            "grid scans require scalar process and measurement intensities".into(),
        ));
    }
    let dof = match metric {
        CostKind::Jnees => template.model.nx(),
        CostKind::Jnis => template.model.nz(),
    };

    let vs = grid.v_values();
    let ws = grid.w_values();
    let pairs: Vec<(f64, f64)> = vs
        .iter()
        .flat_map(|&v| ws.iter().map(move |&w| (v, w)))
        .collect();

    let mut surfaces: Vec<Vec<f64>> = Vec::with_capacity(dt_list.len());
    for (di, &dt) in dt_list.iter().enumerate() {
        // common random numbers across the grid at each sample time
        let master_seed = stream_rng(template.master_seed, di as u64).next_u64();
        let costs: Vec<f64> = pairs
            .par_iter()
            .map(|&(v, w)| -> Result<f64> {
                let mut scenario = template.clone();
                scenario.candidate_noise = NoiseIntensities::from_slices(&[v], &[w])?;
                scenario.dt = dt;
                scenario.master_seed = master_seed;
                let mc = monte_carlo(&scenario).map_err(|e| e.at_dt(dt))?;
                let samples = match metric {
                    CostKind::Jnees => &mc.nees,
                    CostKind::Jnis => &mc.nis,
                };
                Ok(j_cost(samples, dof, metric, dt)?.value)
            })
            .collect::<Result<_>>()?;

        let path = out.join(format!("scan_dt_{}.csv", output::dt_label(dt)));
        output::write_csv(
            &path,
            &["v", "w", "dt", "j_cost"],
            pairs.iter().zip(&costs).map(|(&(v, w), &c)| {
                vec![
                    output::fmt_f64(v),
                    output::fmt_f64(w),
                    output::fmt_f64(dt),
                    output::fmt_f64(c),
                ]
            }),
        )?;
        surfaces.push(costs);
    }

    let combined: Vec<f64> = (0..pairs.len())
        .map(|i| {
            surfaces
                .iter()
                .map(|s| s[i])
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    output::write_csv(
        &out.join("scan_max.csv"),
        &["v", "w", "j_max"],
        pairs.iter().zip(&combined).map(|(&(v, w), &c)| {
            vec![output::fmt_f64(v), output::fmt_f64(w), output::fmt_f64(c)]
        }),
    )?;
    Ok(())
}
