//! Nodal discontinuous Galerkin on tetrahedra, executed through an emulated
//! SIMT device with banked shared memory and memory-traffic counters.

pub mod autotune;
pub mod device;
pub mod discretization;
pub mod error;
pub mod kernels;
pub mod layout;
pub mod maxwell;
pub mod mesh;
pub mod refelem;
pub mod solver;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
pub use discretization::{Discretization, DiscretizationOptions};
pub use kernels::{ConservationLaw, KernelConfig, OperatorConfig, Pipeline, Strategy};
pub use maxwell::{CavityMode, Material, MaxwellLaw};
pub use mesh::Mesh;
pub use refelem::ReferenceElement;
