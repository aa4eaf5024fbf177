//! Experiment runner for `sdelab`: specifications, built-in models, CSV
//! output and the acceptance suite.

pub mod acceptance;
pub mod catalog;
pub mod experiments;
pub mod output;
pub mod spec;

use std::path::Path;
use std::time::Instant;

pub use spec::{ExperimentKind, ExperimentSpec, ResolvedSpec, SpecError};

/// Worker count requested through `SDELAB_THREADS`, if any.
pub fn requested_threads() -> anyhow::Result<Option<usize>> {
    match std::env::var("SDELAB_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => anyhow::bail!("SDELAB_THREADS must be a positive integer, got `{v}`"),
        },
        Err(_) => Ok(None),
    }
}

/// Runs `f` on a pool sized by `SDELAB_THREADS` (all cores when unset).
pub fn with_pool<T: Send>(f: impl FnOnce() -> T + Send) -> anyhow::Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = requested_threads()? {
        builder = builder.num_threads(n);
    }
    Ok(builder.build()?.install(f))
}

/// Runs a resolved specification and writes `results.csv` and `report.txt`
/// into its output directory. Nothing is written if the run fails.
pub fn run_spec(spec: &ResolvedSpec, reproduce: &str) -> anyhow::Result<experiments::Outcome> {
    let start = Instant::now();
    let outcome = experiments::run(spec).map_err(|e| anyhow::anyhow!("{} (master seed {}): {e:#}", spec.id, spec.seed))?;
    let mut csv = Vec::new();
    output::write_csv(&mut csv, &[("spec", spec.to_json_line())], &outcome.rows)?;
    let title = format!("{} on {} ({})", spec.kind.as_str(), spec.model_id, spec.id);
    let report = output::report(&title, &outcome, reproduce, start.elapsed().as_secs_f64());
    output::write_artifacts(&spec.output, "results.csv", &csv, &report)?;
    Ok(outcome)
}

/// Runs criteria 1 to 11 and writes `verify.csv` and `report.txt` into `out`.
pub fn verify(out: &Path, budget: acceptance::Budget, seed: u64, mut progress: impl FnMut(&str)) -> anyhow::Result<bool> {
    let results = acceptance::run_suite(budget, seed, |r| progress(&r.line()));
    let rows: Vec<_> = results.iter().flat_map(|r| r.rows.iter().cloned()).collect();
    let mut csv = Vec::new();
    let resolved = serde_json::json!({"command": "verify", "quick": budget.quick, "seed": seed});
    output::write_csv(&mut csv, &[("spec", resolved.to_string())], &rows)?;
    let all = results.iter().all(|r| r.pass);
    let mut report = format!("sdelab {} acceptance suite\n\n", output::VERSION);
    for r in &results {
        report.push_str(&r.line());
        report.push('\n');
    }
    report.push_str(&format!("\noverall: {}\n", output::verdict(all)));
    let quick = if budget.quick { " --quick" } else { "" };
    report.push_str(&format!("reproduce: sdelab verify{quick} --seed {seed} --out {}\n", out.display()));
    output::write_artifacts(out, "verify.csv", &csv, &report)?;
    Ok(all)
}
