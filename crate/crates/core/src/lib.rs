//! Simulation of a mmWave access point that senses its surroundings with an
//! FMCW radar sweep, turns the echoes into reflective surfaces and uses them
//! to ray-trace the downlink channel of every user.
//!
//! The AP sits at the origin. Angles are measured counter-clockwise from
//! the positive x axis.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arrays;
pub mod comm;
pub mod error;
pub mod exec;
pub mod geometry;
pub mod harness;
pub mod perception;
pub mod reconstruction;
pub mod scene;
pub mod sensing;

pub use error::{Result, SimError};
