//! Simulation and verification tools for weakly asymmetric speed-change
//! exclusion processes on the discrete torus.

pub mod adjoint;
pub mod error;
pub mod exact;
pub mod fourier;
pub mod harness;
pub mod kmc;
pub mod lattice;
pub mod measures;
pub mod pde;
pub mod rates;

pub use error::{Error, Result};
