//! Batch front end: `fdl <command> <config>`.

pub mod commands;
pub mod config;

use std::path::Path;

pub use commands::{execute, Command, Failure, Outcome};
pub use config::{parse_config, Config, ConfigError, DatumSpec};

/// Sizes the worker pool from `FDL_THREADS` (unset or 0: automatic).
pub fn configure_threads(value: Option<&str>) -> Result<usize, ConfigError> {
    let n = match value.map(str::trim) {
        None | Some("") => 0,
        Some(v) => v.parse::<usize>().map_err(|_| ConfigError::Validation {
            key: "FDL_THREADS".into(),
            reason: format!("not a nonnegative integer: {v:?}"),
        })?,
    };
    #[cfg(feature = "parallel")]
    if n > 0 {
        // A second call in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(n)
}

/// Parses the config at `path`, runs `cmd` and returns the exit status
/// together with everything meant for standard output and standard error.
pub fn run_file(cmd: Command, path: &Path) -> (i32, String, String) {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => return (2, String::new(), format!("cannot read {}: {e}\n", path.display())),
    };
    let cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => return (2, String::new(), format!("config error: {e}\n")),
    };
    match execute(cmd, &cfg) {
        Ok(o) => {
            let mut err = String::new();
            for f in &o.failed {
                err.push_str(&format!("FAILED {f}\n"));
            }
            if o.solver_failed {
                err.push_str("FAILED solver\n");
            }
            (o.exit_code(), o.stdout, err)
        }
        Err(e) => (e.exit_code(), String::new(), format!("{e}\n")),
    }
}
