//! Channel gains, sharing protocols and link performance for free-space
//! optical links that bounce off an intelligent reflecting surface.
//!
//! The crate is organized bottom-up: [`geometry`] and [`special`] hold the
//! math, [`beam`] and [`irs`] model the incident and reflected fields,
//! [`channel`] turns fields into power ratios, [`protocol`] lays out the
//! surface for several links, [`performance`] adds turbulence, and
//! [`scenario`] drives configurable sweeps.

pub mod beam;
pub mod channel;
pub mod error;
pub mod geometry;
pub mod irs;
pub mod performance;
pub mod protocol;
pub mod quadrature;
pub mod scenario;
pub mod special;

pub use error::{Error, Result};
