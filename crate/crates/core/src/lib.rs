//! Analysis toolkit for complex balanced mass-action reaction networks and
//! their 1-D reaction-diffusion dynamics.
//!
//! The crate is organized around five subsystems:
//!
//! - [`network`]: parsing, validation, stoichiometry, exact conservation laws;
//! - [`equilibrium`]: complex/detailed balance checks, the positive complex
//!   balanced equilibrium on a mass class, boundary equilibria enumeration;
//! - [`entropy`]: relative entropy, entropy dissipation and related kernels on
//!   discrete 1-D fields;
//! - [`constants`]: the explicit entropy--entropy-dissipation constant chain,
//!   finite-dimensional inequality evaluation and estimation of its constant;
//! - [`pdesolver`]: an IMEX finite-volume solver for the reaction-diffusion
//!   system on the unit interval with no-flux boundaries.

// Index loops mirror the matrix formulas; `!(v > 0.0)` rejects NaN as well.
#![allow(clippy::needless_range_loop)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constants;
pub mod entropy;
pub mod equilibrium;
pub mod linalg;
pub mod network;
pub mod pdesolver;
pub mod ratmat;

pub use network::{
    conservation_structure, mass_vector, parse_network, ConservationStructure, MassVector, Network,
    NetworkError, Reaction,
};
