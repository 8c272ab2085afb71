//! Output-directory plumbing: manifests, CSV writing, flag parsing.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use kfat_core::oracle::GridSpec;
use kfat_core::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Full round-trip float formatting: 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{:.16e}", x)
}

/// Sample times in file names use their shortest display form.
pub fn dt_label(dt: f64) -> String {
    format!("{dt}")
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Config(format!("{}: {e}", dir.display())))
}

pub fn write_csv(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    let mut file = fs::File::create(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let io_err = |e: std::io::Error| Error::Config(format!("{}: {e}", path.display()));
    writeln!(file, "{}", header.join(",")).map_err(io_err)?;
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        writeln!(file, "{}", row.join(",")).map_err(io_err)?;
    }
    Ok(())
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    fs::write(path, text + "\n").map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Records what produced an output directory; re-running the recorded
/// argument vector reproduces every CSV and JSON byte for byte.
pub fn write_manifest(
    out_dir: &Path,
    command: &str,
    config_path: &Path,
    seed: Option<u64>,
) -> Result<()> {
    let timestamp_unix = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let manifest = serde_json::json!({
        "command": command,
        "config_path": config_path.display().to_string(),
        "output_dir": out_dir.display().to_string(),
        "seed": seed,
        "tool_version": env!("CARGO_PKG_VERSION"),
        "timestamp_unix": timestamp_unix,
        "argv": std::env::args().collect::<Vec<_>>(),
    });
    write_json(&out_dir.join("manifest.json"), &manifest)
}

/// Parses `"Vlo:Vhi:n,Wlo:Whi:n"` into a log-spaced grid description.
pub fn parse_grid(text: &str) -> Result<GridSpec> {
    let bad = || Error::Config(format!("grid '{text}' must look like Vlo:Vhi:n,Wlo:Whi:n"));
    let (v_part, w_part) = text.split_once(',').ok_or_else(bad)?;
    let parse_axis = |part: &str| -> Result<(f64, f64, usize)> {
        let fields: Vec<&str> = part.split(':').collect();
        if fields.len() != 3 {
            return Err(bad());
        }
        let lo: f64 = fields[0].parse().map_err(|_| bad())?;
        let hi: f64 = fields[1].parse().map_err(|_| bad())?;
        let n: usize = fields[2].parse().map_err(|_| bad())?;
        if !(lo > 0.0 && hi >= lo && n >= 1) {
            return Err(bad());
        }
        Ok((lo, hi, n))
    };
    let (v_lo, v_hi, nv) = parse_axis(v_part)?;
    let (w_lo, w_hi, nw) = parse_axis(w_part)?;
    Ok(GridSpec {
        v_lo,
        v_hi,
        nv,
        w_lo,
        w_hi,
        nw,
    })
}

/// Parses `"0.1,0.5"` into a sample-time list.
pub fn parse_dt_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad dt value '{s}'")))
        })
        .collect()
}

/// Parses `"lo:hi"` into a band.
pub fn parse_band(text: &str) -> Result<(f64, f64)> {
    let bad = || Error::Config(format!("band '{text}' must look like lo:hi"));
    let (lo, hi) = text.split_once(':').ok_or_else(bad)?;
    let lo: f64 = lo.parse().map_err(|_| bad())?;
    let hi: f64 = hi.parse().map_err(|_| bad())?;
    if hi < lo {
        return Err(bad());
    }
    Ok((lo, hi))
}

/// Parses a comma-separated float list.
pub fn parse_floats(text: &str) -> Result<Vec<f64>> {
    parse_dt_list(text)
}

pub fn results_dir(out: &Path) -> Result<PathBuf> {
    let dir = out.join("results");
    ensure_dir(&dir)?;
    Ok(dir)
}
