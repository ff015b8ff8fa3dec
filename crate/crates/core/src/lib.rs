//! Adaptive quadratic finite elements for frictionless unilateral contact
//! in two-dimensional linear elasticity.
//!
//! The pipeline is: build a [`mesh::Mesh`], a P2 vector space on it
//! ([`fespace::FeSpace`]), assemble and constrain the elasticity system
//! ([`assembly`]), solve the contact problem with a primal-dual active set
//! iteration ([`contact_solver`]), recover the nodal contact force density
//! ([`contact_force`]), evaluate the residual estimator ([`estimator`]) and
//! drive the adaptive loop ([`adapt`]).

pub mod adapt;
pub mod assembly;
pub mod contact_force;
pub mod contact_solver;
pub mod error;
pub mod estimator;
pub mod fespace;
pub mod io;
pub mod linsolve;
pub mod mesh;
pub mod par;
pub mod problems;
pub mod quadrature;
pub mod sparse;

pub use error::{Error, MeshError, Result};
