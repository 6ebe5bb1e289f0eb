//! Shared fixtures for the benchmarks.

use drainet_core::dual::{self, DualPath};
use drainet_core::lattice_paths::walk;
use drainet_core::metrics::{rescale, RescaledPath};
use drainet_core::{Cell, DualVertex, EnvParams, Environment, LatticePath, Selector};

pub fn environment(p: f64, epsilon: f64) -> Environment {
    Environment::new(EnvParams::new(p, epsilon, 0x5eed).expect("valid parameters"))
}

pub fn open_start(env: &Environment) -> Cell {
    let x = (0..).find(|&x| env.is_open(Cell::new(x, 0))).expect("open cells exist");
    Cell::new(x, 0)
}

pub fn dual_start(env: &Environment) -> DualVertex {
    dual::dual_vertices_in_row(env, 0, 0, 200).expect("row scan")[0]
}

pub fn lattice_pair(env: &Environment, steps: usize) -> (LatticePath, LatticePath) {
    let z = open_start(env);
    (
        walk(env, z, &Selector::AlwaysLeft, steps).unwrap(),
        walk(env, z, &Selector::AlwaysRight, steps).unwrap(),
    )
}

pub fn dual_path(env: &Environment, steps: usize) -> DualPath {
    dual::dual_walk(env, dual_start(env), &Selector::AlwaysLeft, steps).unwrap()
}

pub fn rescaled_pair(env: &Environment, steps: usize, n: u64) -> (RescaledPath, RescaledPath) {
    let (l, r) = lattice_pair(env, steps);
    (rescale(&l, n).unwrap(), rescale(&r, n).unwrap())
}
