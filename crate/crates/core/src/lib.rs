//! Relative-entropy toolkit for one-dimensional hyperbolic-parabolic systems.
//!
//! The crate is organised around a [`model::Model1D`] description of
//! `d_t A(u) + d_x F(u) = eps d_x(B(u) d_x u)` with an entropy pair generated by
//! a multiplier `G`. On top of it sit structural checks ([`hypotheses`]),
//! pointwise relative quantities and identity residuals ([`relent`]), a periodic
//! method-of-lines solver ([`solver`]), limit studies ([`experiments`]) and
//! atomic Young measures ([`young`]).

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiments;
pub mod hypotheses;
pub mod model;
pub mod numeric;
pub mod relent;
pub mod solver;
pub mod young;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub use model::{
    embed_gas_as_general, ideal_gas_model, Coefficient, DerivativePath, FnModel, GasModel,
    GasState, GasSystem, LinearAdvection, Model1D, StateVector,
};
