//! Level-I approximation of compressible viscous flow with convex rheology.
//!
//! Density lives on a tensor grid and solves a parabolic continuity equation
//! with inflow/outflow data; velocity is `u_B` plus a finite sine-Galerkin
//! expansion. Every step can be audited against discrete energy, renormalization
//! and relative-energy ledgers.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod continuity;
pub mod domain;
pub mod energy;
pub mod eos;
pub mod error;
pub mod math;
pub mod momentum;
pub mod relative_energy;
pub mod rheology;
pub mod tensor;

pub use error::{Error, Result};
