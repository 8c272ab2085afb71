//! `kfat oracle` — closed-form expected-NEES outputs.

use clap::Args;
use kfat_core::oracle::{
    expected_nees, nees_line_scan, scan_surface, OracleOpts, SurfacePoint,
};
use kfat_core::Error;

use crate::output::{self, Result};
use crate::scan::load_config;
use crate::CommonArgs;

#[derive(Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// What to emit
    #[arg(long, value_enum, default_value = "surface")]
    pub mode: OracleMode,
    /// Grid as Vlo:Vhi:n,Wlo:Whi:n (log-spaced), for surface and line modes
    #[arg(long, default_value = "0.1:5:20,0.01:0.5:20")]
    pub grid: String,
    /// Sample times, comma-separated; defaults to the configured list
    #[arg(long, value_name = "CSV")]
    pub dt_list: Option<String>,
    /// Expected-NEES acceptance band for line mode, as lo:hi
    #[arg(long, default_value = "1.995:2.005")]
    pub band: String,
    /// Candidate process intensity for sweep mode (defaults to the truth)
    #[arg(long)]
    pub v: Option<f64>,
    /// Candidate measurement intensity for sweep mode (defaults to the truth)
    #[arg(long)]
    pub w: Option<f64>,
    /// Sample-time sweep as lo:hi:n (linear), for sweep mode
    #[arg(long, default_value = "0.1:1.0:10")]
    pub dt_sweep: String,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum OracleMode {
    /// Expected NEES over the whole grid, one file per sample time
    Surface,
    /// Only the grid points inside the consistency band
    Line,
    /// Fixed intensities, swept over sample time
    Sweep,
}

const COLUMNS: [&str; 7] = [
    "v",
    "w",
    "dt",
    "expected_nees",
    "jnees",
    "logdet_p",
    "logdet_sigma",
];

fn point_row(p: &SurfacePoint) -> Vec<String> {
    vec![
        output::fmt_f64(p.v),
        output::fmt_f64(p.w),
        output::fmt_f64(p.dt),
        output::fmt_f64(p.expected_nees),
        output::fmt_f64(p.jnees),
        output::fmt_f64(p.logdet_p),
        output::fmt_f64(p.logdet_sigma),
    ]
}

pub fn run(args: &OracleArgs) -> Result<()> {
    let config = load_config(&args.common)?;
    let out = &args.common.out;
    output::ensure_dir(out)?;
    output::write_manifest(out, "oracle", &args.common.config, args.common.seed)?;

    let model = config.model()?;
    let truth = config.scenario.true_noise.build()?;
    let opts = OracleOpts::default();
    let dt_list = match &args.dt_list {
        Some(text) => output::parse_dt_list(text)?,
        None => config.tuner.dt_list.clone(),
    };
    if dt_list.is_empty() {
        return Err(Error::Config("dt list is empty".into()));
    }

    match args.mode {
        OracleMode::Surface => {
            let grid = output::parse_grid(&args.grid)?;
            let mut surfaces = Vec::new();
            for &dt in &dt_list {
                let surface = scan_surface(&model, &truth, &grid, dt, &opts)?;
                let path = out.join(format!("oracle_surface_dt_{}.csv", output::dt_label(dt)));
                output::write_csv(&path, &COLUMNS, surface.iter().map(point_row))?;
                surfaces.push(surface);
            }
            if surfaces.len() > 1 {
                let rows = (0..surfaces[0].len()).map(|i| {
                    let jmax = surfaces
                        .iter()
                        .map(|s| s[i].jnees)
                        .fold(f64::NEG_INFINITY, f64::max);
                    vec![
                        output::fmt_f64(surfaces[0][i].v),
                        output::fmt_f64(surfaces[0][i].w),
                        output::fmt_f64(jmax),
                    ]
                });
                output::write_csv(&out.join("oracle_surface_max.csv"), &["v", "w", "j_max"], rows)?;
            }
        }
        OracleMode::Line => {
            let grid = output::parse_grid(&args.grid)?;
            let band = output::parse_band(&args.band)?;
            for &dt in &dt_list {
                let line = nees_line_scan(&model, &truth, &grid, dt, band, &opts)?;
                let path = out.join(format!("oracle_line_dt_{}.csv", output::dt_label(dt)));
                output::write_csv(&path, &COLUMNS, line.iter().map(point_row))?;
            }
        }
        OracleMode::Sweep => {
            if model.nw() != 1 || model.nz() != 1 {
                return Err(Error::Dimension(
                    "sweep mode requires scalar intensities".into(),
                ));
            }
            let v = args.v.unwrap_or(truth.v[0]);
            let w = args.w.unwrap_or(truth.w[0]);
            let candidate = kfat_core::sysmodel::NoiseIntensities::from_slices(&[v], &[w])?;
            let fields: Vec<&str> = args.dt_sweep.split(':').collect();
            if fields.len() != 3 {
                return Err(Error::Config(format!(
                    "dt sweep '{}' must look like lo:hi:n",
                    args.dt_sweep
                )));
            }
            let lo: f64 = fields[0]
                .parse()
                .map_err(|_| Error::Config("bad sweep bound".into()))?;
            let hi: f64 = fields[1]
                .parse()
                .map_err(|_| Error::Config("bad sweep bound".into()))?;
            let n: usize = fields[2]
                .parse()
                .map_err(|_| Error::Config("bad sweep count".into()))?;
            if !(lo > 0.0 && hi >= lo && n >= 1) {
                return Err(Error::Config("bad sweep range".into()));
            }
            let mut rows = Vec::with_capacity(n);
            for i in 0..n {
                let dt = if n == 1 {
                    lo
                } else {
                    lo + (hi - lo) * i as f64 / (n - 1) as f64
                };
                let r = expected_nees(&model, &candidate, &truth, dt, &opts)?;
                rows.push(point_row(&SurfacePoint {
                    v,
                    w,
                    dt,
                    expected_nees: r.expected_nees,
                    jnees: r.jnees,
                    logdet_p: log_det_or_neg_inf(&r.p_filter),
                    logdet_sigma: log_det_or_neg_inf(&r.sigma_true),
                }));
            }
            output::write_csv(&out.join("oracle_sweep.csv"), &COLUMNS, rows)?;
        }
    }
    Ok(())
}

fn log_det_or_neg_inf(m: &nalgebra::DMatrix<f64>) -> f64 {
    match nalgebra::Cholesky::new(m.clone()) {
        Some(chol) => 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>(),
        None => f64::NEG_INFINITY,
    }
}
