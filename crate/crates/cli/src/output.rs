//! Result files: per-row CSV, plot data, run manifest and assertion checks.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{Column, LoadedConfig};
use crate::scenarios::{Results, Row, Series};

pub const CSV_HEADER: [&str; 17] = [
    "scenario", "name", "row", "label", "digest", "value", "error", "reference", "aux", "n", "form", "grid_n", "dt", "t_order", "s_order",
    "k_max", "seed",
];

/// Writes through a temporary file in the same directory and renames, so readers never see partial files.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let file_name = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{file_name}.{}.tmp", std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path).inspect_err(|_| {
        let _ = std::fs::remove_file(&tmp);
    })
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Digest of one row: canonical config text plus the row label.
pub fn row_digest(cfg: &LoadedConfig, label: &str) -> String {
    let mut text = cfg.canonical();
    text.push('\n');
    text.push_str(label);
    hex_digest(text.as_bytes())
}

fn num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        // shortest round-trip representation
        format!("{v:?}")
    }
}

pub fn results_csv(cfg: &LoadedConfig, rows: &[Row]) -> Vec<u8> {
    let i = &cfg.config.instance;
    let mut w = csv::Writer::from_writer(vec![]);
    w.write_record(CSV_HEADER).expect("in-memory write");
    for (k, r) in rows.iter().enumerate() {
        let grid = if cfg.config.scenario.uses_grid() { i.grid_n.to_string() } else { String::new() };
        let dt = if cfg.config.scenario.uses_grid() { num(i.dt) } else { String::new() };
        w.write_record([
            cfg.config.scenario.name().to_string(),
            cfg.name.clone(),
            k.to_string(),
            r.label.clone(),
            row_digest(cfg, &r.label),
            num(r.value),
            num(r.error),
            num(r.reference),
            num(r.aux),
            i.n.to_string(),
            i.form.clone(),
            grid,
            dt,
            i.t_order.to_string(),
            i.s_order.to_string(),
            i.k_max.to_string(),
            cfg.config.seed.to_string(),
        ])
        .expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn plot_csv(series: &[Series]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(vec![]);
    w.write_record(["series", "x", "y"]).expect("in-memory write");
    for s in series {
        for &(x, y) in &s.points {
            w.write_record([s.name.clone(), num(x), num(y)]).expect("in-memory write");
        }
    }
    w.into_inner().expect("in-memory flush")
}

#[derive(Serialize)]
struct RowTiming {
    label: String,
    seconds: f64,
}

#[derive(Serialize)]
struct Manifest {
    name: String,
    scenario: String,
    version: String,
    config_sha256: String,
    seed: u64,
    wall_seconds: f64,
    threads: usize,
    outputs: Vec<String>,
    assertions_passed: usize,
    assertions_total: usize,
    timing: Vec<RowTiming>,
}

/// Failed assertion descriptions; empty when all hold.
pub fn check_assertions(cfg: &LoadedConfig, rows: &[Row]) -> (usize, Vec<String>) {
    let mut failures = vec![];
    let total = cfg.config.assertions.len();
    for (k, a) in cfg.config.assertions.iter().enumerate() {
        let selected: Vec<&Row> = rows.iter().filter(|r| a.label.as_ref().is_none_or(|l| &r.label == l)).collect();
        if selected.is_empty() {
            failures.push(format!("assertion {k}: no row labelled '{}'", a.label.clone().unwrap_or_default()));
            continue;
        }
        for r in selected {
            let v = match a.column {
                Column::Value => r.value,
                Column::Error => r.error,
                Column::Reference => r.reference,
                Column::Aux => r.aux,
            };
            let ok = match (a.expected, a.tolerance, a.below) {
                (Some(e), Some(t), _) => (v - e).abs() <= t,
                (_, _, Some(b)) => v.abs() < b,
                _ => false,
            };
            if !ok {
                let want = match (a.expected, a.tolerance, a.below) {
                    (Some(e), Some(t), _) => format!("{e} +- {t}"),
                    (_, _, Some(b)) => format!("|x| < {b}"),
                    _ => "a valid assertion".into(),
                };
                failures.push(format!("assertion {k} on row '{}' ({:?}): got {v:e}, want {want}", r.label, a.column));
            }
        }
    }
    (total, failures)
}

/// Writes all outputs of a run. Output bytes other than the manifest depend only on the config.
pub fn write_outputs(cfg: &LoadedConfig, out_dir: &Path, res: &Results, wall: f64, passed: usize, total: usize) -> std::io::Result<()> {
    let mut files = vec![];
    let base = |suffix: &str| out_dir.join(format!("{}.{suffix}", cfg.name));
    let csv_path = base("csv");
    write_atomic(&csv_path, &results_csv(cfg, &res.rows))?;
    files.push(csv_path);
    if cfg.config.output.plot {
        let p = base("plot.csv");
        write_atomic(&p, &plot_csv(&res.series))?;
        files.push(p);
    }
    for (suffix, bytes) in &res.files {
        let p = base(suffix);
        write_atomic(&p, bytes)?;
        files.push(p);
    }
    let manifest = Manifest {
        name: cfg.name.clone(),
        scenario: cfg.config.scenario.name().into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_sha256: hex_digest(cfg.canonical().as_bytes()),
        seed: cfg.config.seed,
        wall_seconds: wall,
        threads: rayon::current_num_threads(),
        outputs: files.iter().filter_map(|p| p.file_name()).map(|s| s.to_string_lossy().into_owned()).collect(),
        assertions_passed: passed,
        assertions_total: total,
        timing: res.rows.iter().map(|r| RowTiming { label: r.label.clone(), seconds: r.seconds }).collect(),
    };
    let p = base("run.toml");
    write_atomic(&p, toml::to_string(&manifest).expect("manifest serializes").as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_of_empty_input() {
        assert_eq!(hex_digest(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }

    #[test]
    fn nan_is_an_empty_cell_and_values_round_trip() {
        assert_eq!(num(f64::NAN), "");
        let v = -std::f64::consts::TAU / 3.0;
        assert_eq!(num(v).parse::<f64>().unwrap(), v);
    }

    #[test]
    fn atomic_write_replaces_content() {
        let d = tempfile::tempdir().unwrap();
        let p = d.path().join("a.csv");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(d.path()).unwrap().count(), 1);
    }
}
