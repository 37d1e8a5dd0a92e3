//! Secrecy performance of an untrusted amplify-and-forward relay link with
//! destination-assisted jamming and residual transceiver impairments.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`); the
//! `*64` / `*32` aliases below fix the precision.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod error;
pub mod experiments;
pub mod hw_design;
pub mod hw_profile;
pub mod link_math;
pub mod opa;
pub mod scalar;
pub mod secrecy_metrics;
pub mod specfun;

pub use channel::{ChannelRealization, LinkMode, ScenarioConfig};
pub use error::{Error, Result};
pub use hw_profile::{DerivedConstants, EvmProfile};
pub use link_math::{LinkCoefficients, SecrecyOutcome, SndrPair};
pub use opa::{OpaMethod, OpaResult};
pub use scalar::Scalar;

pub type EvmProfile64 = EvmProfile<f64>;
pub type EvmProfile32 = EvmProfile<f32>;
pub type DerivedConstants64 = DerivedConstants<f64>;
pub type DerivedConstants32 = DerivedConstants<f32>;
pub type ScenarioConfig64 = ScenarioConfig<f64>;
pub type ScenarioConfig32 = ScenarioConfig<f32>;
pub type ChannelRealization64 = ChannelRealization<f64>;
pub type ChannelRealization32 = ChannelRealization<f32>;
pub type LinkCoefficients64 = LinkCoefficients<f64>;
pub type LinkCoefficients32 = LinkCoefficients<f32>;
pub type OpaResult64 = OpaResult<f64>;
pub type OpaResult32 = OpaResult<f32>;
