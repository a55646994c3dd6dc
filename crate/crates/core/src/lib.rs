//! Coded energy-efficient mm-wave beam-alignment toolkit.
//!
//! The crate designs beam-alignment beamwidths by water-filling over an
//! error-correcting feedback codebook, models the detection/decoding/data
//! pipeline of a sectored mm-wave link, and runs seeded Monte Carlo sweeps
//! comparing coded, exhaustive and uncoded schemes.
//!
//! Module map:
//! - [`codebook`]: feedback codebooks and minimum-distance decoding;
//! - [`waterfill`]: the beamwidth allocation solver and power objectives;
//! - [`beamspace`]: the measure-space partition of the AoD/AoA square;
//! - [`phy`]: detector, path loss, energy densities and outage formulas;
//! - [`sim`]: the Monte Carlo engine and sweep harness.
//!
//! Numeric code is generic over the scalar type through the [`Scalar`]
//! trait; the simulation layer and the type aliases at the crate root are
//! pinned to `f64`.

// `!(v > 0)` rejects NaN along with non-positive values; the positive
// comparison is intentional.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beamspace;
pub mod codebook;
pub mod error;
pub mod phy;
pub mod sim;
pub mod waterfill;

use std::fmt;
use std::ops::AddAssign;

use num_traits::{Float, FloatConst, FromPrimitive};

pub use error::{Error, Result};

/// Floating-point scalar usable by the numeric modules (`f32` or `f64`).
pub trait Scalar:
    Float + FloatConst + FromPrimitive + AddAssign + fmt::Debug + fmt::Display + Send + Sync + 'static
{
    /// `from_f64` for values known to be representable.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("representable constant")
    }

    /// Total measure of the flattened AoD/AoA space, `pi^2`.
    fn pi_squared() -> Self {
        Self::PI() * Self::PI()
    }
}

impl<T> Scalar for T where
    T: Float
        + FloatConst
        + FromPrimitive
        + AddAssign
        + fmt::Debug
        + fmt::Display
        + Send
        + Sync
        + 'static
{
}

// Concrete aliases for the default double-precision instantiation.
pub type PowerParams = waterfill::PowerParams<f64>;
pub type BeamwidthAllocation = waterfill::BeamwidthAllocation<f64>;
pub type Partition = beamspace::Partition<f64>;
pub type FlatAngle = beamspace::FlatAngle<f64>;
pub type PhyParams = phy::PhyParams<f64>;
pub type UserConfig = phy::UserConfig<f64>;

// Single-precision variants of the numeric core.
pub type PowerParams32 = waterfill::PowerParams<f32>;
pub type BeamwidthAllocation32 = waterfill::BeamwidthAllocation<f32>;
pub type Partition32 = beamspace::Partition<f32>;
pub type FlatAngle32 = beamspace::FlatAngle<f32>;
pub type PhyParams32 = phy::PhyParams<f32>;
pub type UserConfig32 = phy::UserConfig<f32>;

pub use codebook::{Codebook, CodebookKind, Codeword};
pub use sim::{Scenario, SweepPoint, TrialResult};
