//! Channel gain of multi-layer wireless network-on-chip stacks.
//!
//! A launched ray crosses layers (refraction steps, one layer up or down)
//! and bounces inside a layer (reflection steps). Paths are grouped into
//! classes by launch angle, refraction count and reflection count; each
//! class has one gain, so the channel gain is a count-weighted sum over
//! classes integrated over the launch angle.

pub mod cli;
pub mod complexity;
pub mod counting;
pub mod gain;
pub mod geometry;
pub mod materials;
mod numeric;
pub mod oracle;

use thiserror::Error;

pub use gain::{ApproxConfig, Channel, ChannelResult, Model, ThetaBoundRule};
pub use geometry::Geometry;
pub use materials::StackSpec;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Materials(#[from] materials::MaterialsError),
    #[error(transparent)]
    Geometry(#[from] geometry::GeometryError),
    #[error(transparent)]
    Oracle(#[from] oracle::OracleError),
}
