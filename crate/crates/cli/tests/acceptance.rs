//! Full acceptance suite: one PASS/FAIL line per criterion.

use std::path::Path;

use sdelab_cli::acceptance::{determinism, run_suite, Budget, CriterionResult};

const SEED: u64 = 1;

#[test]
fn acceptance_suite() {
    let mut results: Vec<CriterionResult> = run_suite(Budget::FULL, SEED, |r| println!("{}", r.line()));
    let scratch = tempfile::tempdir().unwrap();
    let det = determinism(Path::new(env!("CARGO_BIN_EXE_sdelab")), scratch.path(), SEED);
    println!("{}", det.line());
    results.push(det);

    let failed: Vec<u8> = results.iter().filter(|r| !r.pass).map(|r| r.id).collect();
    println!("{} of {} criteria pass", results.len() - failed.len(), results.len());
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
