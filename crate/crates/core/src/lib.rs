//! Value functions, stopping boundaries and worst-case priors for optimal
//! stopping of multidimensional Brownian motion under κ-ambiguity about the
//! drift.
//!
//! Two payoff structures reduce the problem to a scalar diffusion:
//! payoffs of a linear combination `y = aᵀx` ([`linear`]) and radially
//! symmetric payoffs of `y = ‖x‖²` ([`radial`]). [`pde`] is an independent
//! finite-difference check of both.
//!
//! The crate is `no_std` and only needs `alloc`.
#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod error;
pub mod linear;
pub mod numerics;
pub mod pde;
pub mod radial;
pub mod specfun;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    AmbiguityParams, GeneratorDescriptor, GeneratorKind, Payoff, Regime, Solution, ValueFunction,
};
