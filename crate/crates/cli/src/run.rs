//! One config file to output files and an exit status.

use std::path::Path;
use std::time::Instant;

use crate::config;
use crate::output;
use crate::scenarios::{self, Failure};

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_ASSERTION: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub name: String,
    pub code: i32,
    pub passed: usize,
    pub total: usize,
    pub detail: String,
}

impl Outcome {
    pub fn status(&self) -> &'static str {
        match self.code {
            EXIT_OK => "ok",
            EXIT_ASSERTION => "assertion-failed",
            EXIT_INVALID => "invalid",
            _ => "numerical-error",
        }
    }
}

/// Runs a config. Nothing is written unless validation and computation both succeed.
pub fn run_file(path: &Path, seed: Option<u64>, out_dir: &Path) -> Outcome {
    let fallback = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let fail = |name: String, code: i32, detail: String| Outcome { name, code, passed: 0, total: 0, detail };
    let cfg = match config::load(path, seed) {
        Ok(c) => c,
        Err(e) => return fail(fallback, EXIT_INVALID, e),
    };
    if let Err(Failure::Invalid(e)) = scenarios::precheck(&cfg) {
        return fail(cfg.name, EXIT_INVALID, e);
    }
    let t0 = Instant::now();
    let res = match scenarios::execute(&cfg) {
        Ok(r) => r,
        Err(Failure::Invalid(e)) => return fail(cfg.name, EXIT_INVALID, e),
        Err(Failure::Numerical(e)) => return fail(cfg.name, EXIT_NUMERICAL, e),
    };
    let wall = t0.elapsed().as_secs_f64();
    let (total, failures) = output::check_assertions(&cfg, &res.rows);
    let passed = total - failures.len().min(total);
    if let Err(e) = output::write_outputs(&cfg, out_dir, &res, wall, passed, total) {
        return fail(cfg.name, EXIT_NUMERICAL, format!("writing outputs: {e}"));
    }
    if failures.is_empty() {
        Outcome { name: cfg.name, code: EXIT_OK, passed, total, detail: format!("{} rows", res.rows.len()) }
    } else {
        Outcome { name: cfg.name, code: EXIT_ASSERTION, passed, total, detail: failures.join("; ") }
    }
}
