//! Finite-dimensional toolkit for commuting-operator measurement models.
//!
//! Given Alice's and Bob's POVMs acting on one Hilbert space with
//! cross-commuting elements and a density operator, the crate builds the
//! trace-preserving conditional expectation onto the von Neumann algebra
//! generated by Bob's operators, derives the steering assemblage
//! `sigma^x_a = Phi*(sqrt(E^x_a) rho sqrt(E^x_a))`, checks that its barycenter is
//! setting-independent and that it reproduces the behavior, and finally
//! rewrites the model as a tensor-product model via the Wedderburn block
//! structure of Alice's algebra.

pub mod condexp;
pub mod error;
pub mod generators;
pub mod matrixlab;
pub mod sampling;
pub mod scenario;
pub mod steering;
pub mod tensorize;
pub mod vnalg;

pub use condexp::{expectation_onto, verify_sandwich, ConditionalExpectation, SandwichReport};
pub use error::{Error, Result};
pub use matrixlab::{CMatrix, HermitianMatrix, TolerancePolicy, C64};
pub use scenario::{
    behavior, chsh_value, validate_model, Behavior, BipartiteModel, DensityOperator,
    MeasurementScenario, POVMFamily, Setting, ValidationReport,
};
pub use steering::{build_assemblage, verify_reproduction, verify_x_independence, SteeringAssemblage};
pub use tensorize::{tensorize, verify_tensor_model, Side, TensorModel, TensorOptions};
pub use vnalg::{
    center, commutant, generated_algebra, minimal_central_projections,
    minimal_projection_resolution, wedderburn, VNAlgebra, WedderburnBlock, WedderburnData,
};
