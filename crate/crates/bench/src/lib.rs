//! Shared fixtures for the benchmarks.

use sdelab_core::noise::sample_brownian_lattice;
use sdelab_core::{Coefficient, PathLattice, Purpose, SdeModel, SeedTree};

pub fn indicator_drift() -> SdeModel {
    SdeModel::new(Coefficient::step(0.0, 0.0, 1.0), Coefficient::constant(1.0), 0.0, 1.0).expect("valid model")
}

pub fn uniform_times(steps: usize, horizon: f64) -> Vec<f64> {
    (0..=steps).map(|j| horizon * j as f64 / steps as f64).collect()
}

pub fn driver(seed: u64, steps: usize) -> PathLattice {
    let mut rng = SeedTree::new(seed).stream(Purpose::Auxiliary, &[]);
    sample_brownian_lattice(&mut rng, &uniform_times(steps, 1.0)).expect("increasing times")
}
