//! Inputs shared by the benchmarks.

use uhdgof::simlab::{gen_study1, Model, Scenario};
use uhdgof::Dataset;

/// Study-1 H11 data with the given deviation size.
pub fn study1(a: f64, n: usize, p: usize, seed: u64) -> Dataset {
    gen_study1(&Scenario::new(Model::H11, a, n, p, 0.0, seed)).expect("valid scenario")
}
