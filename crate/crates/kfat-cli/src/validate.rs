//! `kfat validate` — consistency report at fixed intensities.

use clap::Args;
use kfat_core::metrics::{chi_square_band, two_sigma_coverage_components};
use kfat_core::simulate::monte_carlo;
use kfat_core::sysmodel::NoiseIntensities;
use nalgebra::DMatrix;

use crate::output::{self, Result};
use crate::scan::load_config;
use crate::CommonArgs;

#[derive(Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Candidate process intensities, comma-separated (defaults to the truth)
    #[arg(long, value_name = "CSV")]
    pub v: Option<String>,
    /// Candidate measurement intensities, comma-separated (defaults to the truth)
    #[arg(long, value_name = "CSV")]
    pub w: Option<String>,
    /// Two-sided χ² confidence level
    #[arg(long, default_value_t = 0.95)]
    pub confidence: f64,
}

/// Run-averaged then time-averaged mean, plus the second moment of the
/// run-averaged statistic over time.
fn moments(samples: &DMatrix<f64>) -> (f64, f64) {
    let (n, t) = samples.shape();
    let mut mean = 0.0;
    let mut second = 0.0;
    for k in 0..t {
        let avg = samples.column(k).sum() / n as f64;
        mean += avg;
        second += avg * avg;
    }
    (mean / t as f64, second / t as f64)
}

pub fn run(args: &ValidateArgs) -> Result<()> {
    let config = load_config(&args.common)?;
    let out = &args.common.out;
    output::ensure_dir(out)?;
    output::write_manifest(out, "validate", &args.common.config, args.common.seed)?;

    let candidate = match (&args.v, &args.w) {
        (Some(v), Some(w)) => Some(NoiseIntensities::from_slices(
            &output::parse_floats(v)?,
            &output::parse_floats(w)?,
        )?),
        (None, None) => None,
        _ => {
            return Err(kfat_core::Error::Config(
                "--v and --w must be given together".into(),
            ))
        }
    };
    let scenario = config.scenario_config(candidate)?;
    let mc = monte_carlo(&scenario)?;

    let nx = scenario.model.nx();
    let nz = scenario.model.nz();
    let n_runs = scenario.runs;
    let (nees_mean, nees_second) = moments(&mc.nees);
    let (nis_mean, nis_second) = moments(&mc.nis);
    let nees_band = chi_square_band(nx, n_runs, args.confidence);
    let nis_band = chi_square_band(nz, n_runs, args.confidence);

    // coverage pooled over runs
    let mut all_errors = Vec::new();
    let mut all_diag = Vec::new();
    for run_errors in &mc.errors {
        all_errors.extend(run_errors.iter().cloned());
        all_diag.extend(mc.p_post_diag.iter().cloned());
    }
    let coverage = two_sigma_coverage_components(&all_errors, &all_diag);
    let coverage_mean = coverage.iter().sum::<f64>() / coverage.len() as f64;

    let report = serde_json::json!({
        "candidate": {
            "v": scenario.candidate_noise.v.as_slice(),
            "w": scenario.candidate_noise.w.as_slice(),
        },
        "dt": scenario.dt,
        "runs": n_runs,
        "steps": scenario.steps,
        "confidence": args.confidence,
        "nees": {
            "dof": nx,
            "mean": nees_mean,
            "second_moment": nees_second,
            "band": [nees_band.0, nees_band.1],
            "pass": nees_mean >= nees_band.0 && nees_mean <= nees_band.1,
        },
        "nis": {
            "dof": nz,
            "mean": nis_mean,
            "second_moment": nis_second,
            "band": [nis_band.0, nis_band.1],
            "pass": nis_mean >= nis_band.0 && nis_mean <= nis_band.1,
        },
        "two_sigma_coverage": {
            "per_component": coverage,
            "mean": coverage_mean,
        },
    });
    output::write_json(&out.join("validate_report.json"), &report)?;

    // per-step error vs 2σ bound traces of the first run, for plotting
    let mut header: Vec<String> = vec!["step".into(), "time".into()];
    for j in 0..nx {
        header.push(format!("error{j}"));
        header.push(format!("two_sigma{j}"));
    }
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = mc.errors[0].iter().enumerate().map(|(k, e)| {
        let mut row = vec![k.to_string(), output::fmt_f64((k + 1) as f64 * scenario.dt)];
        for j in 0..nx {
            row.push(output::fmt_f64(e[j]));
            row.push(output::fmt_f64(2.0 * mc.p_post_diag[k][j].max(0.0).sqrt()));
        }
        row
    });
    output::write_csv(&out.join("validate_traces.csv"), &header_refs, rows)?;
    Ok(())
}
