//! Fixtures shared by the criterion benches.

use std::sync::Arc;

use dgsim_core::device::Device;
use dgsim_core::maxwell::{CavityMode, Material, MaxwellLaw};
use dgsim_core::mesh::generate_box_mesh;
use dgsim_core::solver::Solver;
use dgsim_core::{Discretization, DiscretizationOptions, OperatorConfig};

pub fn box_discretization(order: usize, cells: usize) -> Arc<Discretization> {
    let mesh = generate_box_mesh([1.0; 3], [cells; 3]).expect("box mesh");
    Arc::new(Discretization::new(mesh, order, DiscretizationOptions::default()).expect("discretization"))
}

/// Solver on the unit box holding the (1,1,1) cavity mode at t = 0.
pub fn cavity_solver(order: usize, cells: usize) -> Solver<MaxwellLaw> {
    let disc = box_discretization(order, cells);
    let mode = CavityMode::new(1, 1, 1, [1.0; 3], Material::default()).expect("mode");
    let config = OperatorConfig::published_default(&disc);
    let mut s = Solver::new(disc.clone(), MaxwellLaw::default(), config, Device::default()).expect("solver");
    s.set_state(&mode.sample(&disc, 0.0), 0.0).expect("state");
    s
}
