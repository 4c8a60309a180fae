//! Eigenvalue counting in the spectral gap of the bilayer graphene operator
//! `D_m - alpha V`, by the Birman–Schwinger reduction and by eigenvalue flow.

pub mod asymptotic;
pub mod error;
pub mod flow;
pub mod harness;
pub mod lattice;
pub mod operator;
pub mod potential;
pub mod quadrature;
pub mod spectra;
pub mod symbol;

pub use error::{Error, Result};
