//! Constructive blowup machinery for the coupled system
//! `u_t = u_xx + |v|^{p-1}v`, `v_t = μ v_xx + |u|^{q-1}u` in one space dimension.
//!
//! The crate is `no_std` (with `alloc`). It covers the weighted Hermite bases
//! ([`hermite`]), the linearized operator and its modes ([`spectral`]), the
//! closed-form profile and residual terms ([`profile`]), the similarity-variable
//! time stepper and shrinking-set diagnostics ([`dynamics`]), the two-parameter
//! shooting search ([`shooting`]) and the identity verification suite
//! ([`identities`]).
#![cfg_attr(not(any(test, feature = "std")), no_std)]

extern crate alloc;

pub mod dynamics;
pub mod error;
pub mod field;
pub mod hermite;
pub mod identities;
pub mod linalg;
pub mod profile;
pub mod real;
pub mod shooting;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};
pub use real::{Dd, Real};
pub use spectral::Params;
