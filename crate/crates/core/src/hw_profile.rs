//! Error-vector-magnitude (EVM) model of the three transceivers and the
//! impairment constants derived from it.
//!
//! Each node is described by the EVM of its transmit chain and/or receive
//! chain. The source only ever transmits, so its receive chain has no field.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::scalar::{sq, Scalar};

/// Lower edge of the LTE EVM requirement range.
pub const EVM_TYPICAL_MIN: f64 = 0.08;
/// Upper edge of the LTE EVM requirement range.
pub const EVM_TYPICAL_MAX: f64 = 0.175;

/// EVMs of every transceiver chain that appears in the link model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvmProfile<T> {
    /// Source transmit chain.
    pub k_s_t: T,
    /// Relay transmit chain.
    pub k_r_t: T,
    /// Relay receive chain.
    pub k_r_r: T,
    /// Destination transmit chain (jammer).
    pub k_d_t: T,
    /// Destination receive chain.
    pub k_d_r: T,
}

impl<T: Scalar> EvmProfile<T> {
    /// Validates that every EVM is finite and non-negative.
    ///
    /// Nonzero values outside the typical LTE range are accepted with a
    /// logged warning so design sweeps can go past it.
    pub fn new(k_s_t: T, k_r_t: T, k_r_r: T, k_d_t: T, k_d_r: T) -> Result<Self> {
        let profile = Self {
            k_s_t,
            k_r_t,
            k_r_r,
            k_d_t,
            k_d_r,
        };
        for (name, value) in profile.fields() {
            if !value.is_finite() || value < T::zero() {
                return Err(domain(
                    "EvmProfile",
                    format!("{name} = {value} must be finite and >= 0"),
                ));
            }
        }
        for name in profile.out_of_range() {
            log::warn!("EVM {name} lies outside the typical range [{EVM_TYPICAL_MIN}, {EVM_TYPICAL_MAX}]");
        }
        Ok(profile)
    }

    /// Same EVM `k` on every chain.
    pub fn uniform(k: T) -> Result<Self> {
        Self::new(k, k, k, k, k)
    }

    /// Ideal hardware: all EVMs zero.
    pub fn perfect() -> Self {
        let z = T::zero();
        Self {
            k_s_t: z,
            k_r_t: z,
            k_r_r: z,
            k_d_t: z,
            k_d_r: z,
        }
    }

    pub fn fields(&self) -> [(&'static str, T); 5] {
        [
            ("k_s_t", self.k_s_t),
            ("k_r_t", self.k_r_t),
            ("k_r_r", self.k_r_r),
            ("k_d_t", self.k_d_t),
            ("k_d_r", self.k_d_r),
        ]
    }

    /// Names of the nonzero fields outside `[EVM_TYPICAL_MIN, EVM_TYPICAL_MAX]`.
    pub fn out_of_range(&self) -> Vec<&'static str> {
        let lo = T::lit(EVM_TYPICAL_MIN);
        let hi = T::lit(EVM_TYPICAL_MAX);
        self.fields()
            .into_iter()
            .filter(|&(_, v)| v != T::zero() && (v < lo || v > hi))
            .map(|(name, _)| name)
            .collect()
    }

    pub fn is_perfect(&self) -> bool {
        self.fields().iter().all(|&(_, v)| v == T::zero())
    }

    pub fn derive_constants(&self) -> DerivedConstants<T> {
        derive_constants(self)
    }
}

/// Impairment constants that every simplified, asymptotic and design formula
/// is written in. All are dimensionless.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DerivedConstants<T> {
    /// The profile the constants were derived from. The general SNDR forms
    /// need the individual chain EVMs, not only these aggregates.
    pub evm: EvmProfile<T>,
    /// Total relay impairment `k_R_t^2 + k_R_r^2`.
    pub k_r_sq: T,
    /// Total destination impairment `k_D_t^2 + k_D_r^2`.
    pub k_d_sq: T,
    pub tau1: T,
    pub tau2: T,
    pub tau3: T,
    pub tau4: T,
    pub xi1: T,
    pub xi2: T,
}

/// Evaluates the impairment constants of `profile`.
pub fn derive_constants<T: Scalar>(profile: &EvmProfile<T>) -> DerivedConstants<T> {
    let one = T::one();
    let two = T::lit(2.0);
    let r_t = sq(profile.k_r_t);
    let r_r = sq(profile.k_r_r);
    let d_t = sq(profile.k_d_t);
    let d_r = sq(profile.k_d_r);

    let k_r_sq = r_t + r_r;
    let k_d_sq = d_t + d_r;
    let tau1 = one + r_r + d_t;
    let tau2 = d_r * r_r + r_r * r_t + k_r_sq + d_r;
    let tau3 = tau2 + d_t * d_r + r_t * d_t + d_t;
    let tau4 = two + k_r_sq + k_d_sq;
    let xi1 = one + r_r;
    let xi2 = two + k_r_sq + d_r;

    DerivedConstants {
        evm: *profile,
        k_r_sq,
        k_d_sq,
        tau1,
        tau2,
        tau3,
        tau4,
        xi1,
        xi2,
    }
}

impl<T: Scalar> DerivedConstants<T> {
    /// `tau2 > 0`: the high-SNR and ceiling formulas are defined.
    pub fn has_impairments(&self) -> bool {
        self.tau2 > T::zero()
    }
}
