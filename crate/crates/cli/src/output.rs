//! Results CSV and rate report.

use std::io::Write;
use std::path::Path;

use crate::experiments::{Outcome, Row};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const COLUMNS: [&str; 9] = ["experiment_id", "model_id", "n", "m", "p", "estimate", "std_error", "extra", "seed"];

/// Writes `# key value` provenance lines followed by the rows.
pub fn write_csv<W: Write>(mut out: W, provenance: &[(&str, String)], rows: &[Row]) -> anyhow::Result<()> {
    writeln!(out, "# sdelab {VERSION}")?;
    for (key, value) in provenance {
        writeln!(out, "# {key} {value}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COLUMNS)?;
    for r in rows {
        w.write_record([
            r.experiment_id.clone(),
            r.model_id.clone(),
            r.n.to_string(),
            r.m.to_string(),
            r.p.to_string(),
            r.estimate.to_string(),
            r.std_error.to_string(),
            serde_json::to_string(&r.extra)?,
            r.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

/// Plain-text summary of an experiment.
pub fn report(title: &str, outcome: &Outcome, reproduce: &str, seconds: f64) -> String {
    let mut s = format!("{title}\nsdelab {VERSION}\n\n");
    s.push_str(&format!("{:>6}  {:>14}  {:>12}\n", "n", "estimate", "std_error"));
    for r in &outcome.rows {
        s.push_str(&format!("{:>6}  {:>14.6e}  {:>12.4e}\n", r.n, r.estimate, r.std_error));
    }
    s.push('\n');
    for note in &outcome.notes {
        s.push_str(note);
        s.push('\n');
    }
    s.push_str(&format!("verdict: {}\n", verdict(outcome.pass)));
    s.push_str(&format!("elapsed: {seconds:.1} s\n"));
    s.push_str(&format!("reproduce: {reproduce}\n"));
    s
}

/// Creates `dir` and writes both artifacts into it.
pub fn write_artifacts(dir: &Path, csv_name: &str, csv: &[u8], report: &str) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(csv_name), csv)?;
    std::fs::write(dir.join("report.txt"), report)?;
    Ok(())
}
