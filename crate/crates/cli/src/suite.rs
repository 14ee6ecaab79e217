//! Runs every config of a directory concurrently, each isolated from the others.

use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::output::write_atomic;
use crate::run::{run_file, Outcome, EXIT_INVALID, EXIT_NUMERICAL, EXIT_OK};

pub fn configs_in(dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e == "toml"))
        .collect();
    v.sort();
    Ok(v)
}

/// Outcomes in file order. Entries whose output name repeats an earlier one are rejected before running.
pub fn run_suite(dir: &Path, seed: Option<u64>, out_dir: &Path) -> std::io::Result<Vec<(PathBuf, Outcome)>> {
    let files = configs_in(dir)?;
    let names: Vec<Option<String>> = files.iter().map(|p| crate::config::load(p, seed).ok().map(|c| c.name)).collect();
    let mut first: HashMap<&str, usize> = HashMap::new();
    let duplicate: Vec<Option<usize>> = names
        .iter()
        .enumerate()
        .map(|(k, n)| n.as_deref().and_then(|n| first.get(n).copied().or_else(|| {
            first.insert(n, k);
            None
        })))
        .collect();
    let outcomes: Vec<Outcome> = files
        .par_iter()
        .zip(duplicate.par_iter())
        .map(|(p, dup)| {
            let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            if let Some(k) = dup {
                let detail = format!("output name repeats {}", files[*k].display());
                return Outcome { name: stem, code: EXIT_INVALID, passed: 0, total: 0, detail };
            }
            catch_unwind(AssertUnwindSafe(|| run_file(p, seed, out_dir))).unwrap_or_else(|e| {
                let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
                Outcome { name: stem, code: EXIT_NUMERICAL, passed: 0, total: 0, detail: format!("panic: {}", msg.unwrap_or_default()) }
            })
        })
        .collect();
    let results: Vec<(PathBuf, Outcome)> = files.into_iter().zip(outcomes).collect();
    write_atomic(&out_dir.join("summary.csv"), &summary_csv(&results))?;
    Ok(results)
}

pub fn summary_csv(results: &[(PathBuf, Outcome)]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(vec![]);
    w.write_record(["config", "name", "status", "passed", "total", "detail"]).expect("in-memory write");
    for (p, o) in results {
        let file = p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        w.write_record([file, o.name.clone(), o.status().into(), o.passed.to_string(), o.total.to_string(), o.detail.clone()])
            .expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn all_ok(results: &[(PathBuf, Outcome)]) -> bool {
    results.iter().all(|(_, o)| o.code == EXIT_OK)
}
