//! Motion-state classification and short-horizon trajectory prediction
//! for vulnerable road users, built on sliding-window polynomial features
//! of body-frame velocities.
//!
//! The crate is `no_std`-compatible (with `alloc`): disable the default
//! `std` feature and enable `libm` for the float math fallback.

#![cfg_attr(not(feature = "std"), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(all(not(feature = "std"), not(feature = "libm")))]
compile_error!("enable at least one of the `std` or `libm` features");

mod math;

pub mod classifier;
pub mod gated;
pub mod kalman;
pub mod metrics;
pub mod mlp;
pub mod polyfeat;
pub mod predictor;
pub mod synth;
pub mod traj;
