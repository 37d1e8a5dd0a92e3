//! Per-realization link physics: relay gain, SNDRs at the relay and the
//! destination, the simplified rational coefficients, and the secrecy rate.

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelRealization, LinkMode};
use crate::error::{domain, Error, Result};
use crate::hw_profile::DerivedConstants;
use crate::scalar::{sq, Scalar};

fn check_lambda<T: Scalar>(what: &'static str, lambda: T) -> Result<()> {
    if lambda > T::zero() && lambda <= T::one() {
        Ok(())
    } else {
        Err(domain(what, format!("lambda = {lambda} outside (0, 1]")))
    }
}

/// Coefficients of the relay input power `A_G * lambda + B_G` (units of N0).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GainTerms<T> {
    pub a_g: T,
    pub b_g: T,
}

pub fn gain_terms<T: Scalar>(r: &ChannelRealization<T>, c: &DerivedConstants<T>) -> GainTerms<T> {
    let one = T::one();
    let e = &c.evm;
    let rx = one + sq(e.k_r_r);
    GainTerms {
        a_g: (r.gamma_sr - r.gamma_rd) * rx + sq(e.k_s_t) * r.gamma_u - sq(e.k_d_t) * r.gamma_v,
        b_g: r.gamma_rd * rx + sq(e.k_d_t) * r.gamma_v + one,
    }
}

/// Relay amplification factor normalising its output power to `P`.
pub fn amplification_gain<T: Scalar>(
    r: &ChannelRealization<T>,
    c: &DerivedConstants<T>,
    lambda: T,
    rho: T,
) -> Result<T> {
    check_lambda("amplification_gain", lambda)?;
    let g = gain_terms(r, c);
    let power = g.a_g * lambda + g.b_g;
    if !(power > T::zero()) {
        return Err(domain(
            "amplification_gain",
            format!("relay input power {power} is not positive; realization inconsistent"),
        ));
    }
    Ok((rho / power).sqrt())
}

/// Denominator coefficients of the relay SNDR `lambda * nu / (A_R * lambda + B_R)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RelayTerms<T> {
    pub a_r: T,
    pub b_r: T,
}

pub fn relay_terms<T: Scalar>(r: &ChannelRealization<T>, c: &DerivedConstants<T>) -> Result<RelayTerms<T>> {
    if !(r.gamma_rd > T::zero()) {
        return Err(Error::ZeroDenominator("gamma_rd in relay SNDR"));
    }
    let one = T::one();
    let e = &c.evm;
    let nu = r.nu();
    let u_ratio = r.gamma_u / r.gamma_rd;
    let v_ratio = r.gamma_v / r.gamma_rd;
    let r_r = sq(e.k_r_r);
    Ok(RelayTerms {
        a_r: r_r * nu + sq(e.k_s_t) * u_ratio - sq(e.k_d_t) * v_ratio - r_r - one,
        b_r: one + r_r + sq(e.k_d_t) * v_ratio + one / r.gamma_rd,
    })
}

/// Denominator coefficients of the destination SNDR
/// `lambda * gamma_sr / (A_D * lambda + B_D)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DestinationTerms<T> {
    pub a_d: T,
    pub b_d: T,
}

/// Builds `A_D` and `B_D` from named pieces.
///
/// * `relay_cross`: relay receive distortion, relay transmit distortion and
///   destination receive distortion acting on the forwarded first-hop power.
///   Numerically equal to `tau2`.
/// * `src_leak` / `jam_leak`: source and jammer transmit distortion as seen
///   through the relay, scaled by the downstream distortions.
///
/// The jammer-leak term enters `A_D` with a negative sign as a whole: it
/// multiplies `(1 - lambda)`, so every product in it flips sign together.
pub fn destination_terms<T: Scalar>(r: &ChannelRealization<T>, c: &DerivedConstants<T>) -> Result<DestinationTerms<T>> {
    if !(r.gamma_rd > T::zero()) {
        return Err(Error::ZeroDenominator("gamma_rd in destination SNDR"));
    }
    let one = T::one();
    let two = T::lit(2.0);
    let e = &c.evm;
    let (s_t, r_t, r_r, d_t, d_r) = (sq(e.k_s_t), sq(e.k_r_t), sq(e.k_r_r), sq(e.k_d_t), sq(e.k_d_r));
    let k_r_sq = r_t + r_r;
    let nu = r.nu();
    let u_ratio = r.gamma_u / r.gamma_rd;
    let v_ratio = r.gamma_v / r.gamma_rd;

    let relay_cross = d_r * r_r + r_r * r_t + k_r_sq + d_r;
    let downstream = d_r + r_t + one;
    let src_leak = s_t * downstream;
    let jam_leak = d_t * downstream;

    let a_d = (r.gamma_sr - r.gamma_rd) * relay_cross + r.gamma_u * src_leak - r.gamma_v * jam_leak
        + (nu - one) * (one + r_r)
        + u_ratio * s_t
        - v_ratio * d_t;
    let b_d = r.gamma_rd * relay_cross + r.gamma_v * jam_leak + v_ratio * d_t + one / r.gamma_rd + k_r_sq + d_r + two;
    Ok(DestinationTerms { a_d, b_d })
}

/// SNDR pair at the relay (eavesdropper) and at the destination.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SndrPair<T> {
    pub gamma_r: T,
    pub gamma_d: T,
}

impl<T: Scalar> SndrPair<T> {
    pub fn phi(&self) -> T {
        (T::one() + self.gamma_d) / (T::one() + self.gamma_r)
    }
}

/// General SNDRs for an arbitrary realization and impairment profile.
pub fn sndr_pair<T: Scalar>(r: &ChannelRealization<T>, c: &DerivedConstants<T>, lambda: T) -> Result<SndrPair<T>> {
    check_lambda("sndr_pair", lambda)?;
    let rel = relay_terms(r, c)?;
    let dst = destination_terms(r, c)?;
    let den_r = rel.a_r * lambda + rel.b_r;
    if !(den_r > T::zero()) {
        return Err(Error::ZeroDenominator("A_R * lambda + B_R"));
    }
    let den_d = dst.a_d * lambda + dst.b_d;
    if !(den_d > T::zero()) {
        return Err(Error::ZeroDenominator("A_D * lambda + B_D"));
    }
    Ok(SndrPair {
        gamma_r: lambda * r.nu() / den_r,
        gamma_d: lambda * r.gamma_sr / den_d,
    })
}

/// SNDRs of ideal hardware.
pub fn sndr_perfect<T: Scalar>(r: &ChannelRealization<T>, lambda: T) -> Result<SndrPair<T>> {
    check_lambda("sndr_perfect", lambda)?;
    let one = T::one();
    let two = T::lit(2.0);
    let sig = lambda * r.gamma_sr;
    Ok(SndrPair {
        gamma_r: sig / ((one - lambda) * r.gamma_rd + one),
        gamma_d: sig * r.gamma_rd / (sig + (two - lambda) * r.gamma_rd + one),
    })
}

/// High-SNR power-split constant of the DL link.
pub fn theta_dl<T: Scalar>(c: &DerivedConstants<T>) -> Result<T> {
    if !c.has_impairments() {
        return Err(Error::AsymptoticUndefined);
    }
    let ratio = c.tau3 / c.tau2;
    let radicand = ratio * (c.tau1 - c.tau3);
    if radicand < T::zero() {
        return Err(domain("theta_dl", format!("tau1 - tau3 = {} < 0", c.tau1 - c.tau3)));
    }
    Ok(radicand.sqrt() + ratio * (c.xi1 - T::one()) - c.tau3)
}

/// High-SNR power-split constant of the UL link.
pub fn theta_ul<T: Scalar>(c: &DerivedConstants<T>) -> Result<T> {
    if !c.has_impairments() {
        return Err(Error::AsymptoticUndefined);
    }
    Ok(((T::one() + c.tau2) / c.xi1).sqrt())
}

/// Coefficients of the simplified rational SNDRs.
///
/// DL: `gamma_R = a λ / (λ + b)`, `gamma_D = c λ / (λ + d)`.
/// UL: `gamma_R = a λ / (1 - λ)`, `gamma_D = b λ / (λ + c)`.
///
/// In UL (ν < 1) the shared denominator of `b_s` and `c_s` is negative, so
/// both are negative with `c_s < -1`; the ratio form stays positive on (0, 1].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum LinkCoefficients<T> {
    Dl { a_l: T, b_l: T, c_l: T, d_l: T, theta_l: T },
    Ul { a_s: T, b_s: T, c_s: T, theta_s: T },
}

impl<T: Scalar> LinkCoefficients<T> {
    pub fn mode(&self) -> LinkMode {
        match self {
            LinkCoefficients::Dl { .. } => LinkMode::Dl,
            LinkCoefficients::Ul { .. } => LinkMode::Ul,
        }
    }

    pub fn theta(&self) -> T {
        match *self {
            LinkCoefficients::Dl { theta_l, .. } => theta_l,
            LinkCoefficients::Ul { theta_s, .. } => theta_s,
        }
    }

    /// SNDRs of the simplified model at `lambda` (no range check).
    pub fn sndr(&self, lambda: T) -> SndrPair<T> {
        match *self {
            LinkCoefficients::Dl { a_l, b_l, c_l, d_l, .. } => SndrPair {
                gamma_r: a_l * lambda / (lambda + b_l),
                gamma_d: c_l * lambda / (lambda + d_l),
            },
            LinkCoefficients::Ul { a_s, b_s, c_s, .. } => SndrPair {
                gamma_r: a_s * lambda / (T::one() - lambda),
                gamma_d: b_s * lambda / (lambda + c_s),
            },
        }
    }

    pub fn phi(&self, lambda: T) -> T {
        self.sndr(lambda).phi()
    }
}

/// Finite-SNR simplified coefficients for `r`.
pub fn link_coefficients<T: Scalar>(
    r: &ChannelRealization<T>,
    c: &DerivedConstants<T>,
    mode: LinkMode,
) -> Result<LinkCoefficients<T>> {
    if !(r.gamma_rd > T::zero()) {
        return Err(Error::ZeroDenominator("gamma_rd in link coefficients"));
    }
    let one = T::one();
    let nu = r.nu();
    match mode {
        LinkMode::Dl => {
            let xm1 = c.xi1 - one;
            if !(xm1 > T::zero()) {
                return Err(Error::DlCoefficientsUndefined);
            }
            let theta_l = theta_dl(c)?;
            let second = c.tau2 * r.gamma_rd + c.xi1;
            Ok(LinkCoefficients::Dl {
                a_l: one / xm1,
                b_l: c.tau1 / (xm1 * nu),
                c_l: r.gamma_rd / second,
                d_l: (c.tau3 * r.gamma_rd + c.tau4) / (nu * second),
                theta_l,
            })
        }
        LinkMode::Ul => {
            let theta_s = theta_ul(c)?;
            let den = (r.gamma_sr - r.gamma_rd) * c.tau2 + (nu - one) * c.xi1;
            if den == T::zero() {
                return Err(Error::ZeroDenominator("UL coefficient denominator"));
            }
            Ok(LinkCoefficients::Ul {
                a_s: nu / c.xi1,
                b_s: r.gamma_sr / den,
                c_s: (c.tau2 * r.gamma_rd + c.xi2) / den,
                theta_s,
            })
        }
    }
}

/// Coefficients in the limit of large `gamma_rd` (DL) or `gamma_sr` (UL)
/// for a given SNR ratio `nu`.
pub fn link_coefficients_high_snr<T: Scalar>(
    nu: T,
    c: &DerivedConstants<T>,
    mode: LinkMode,
) -> Result<LinkCoefficients<T>> {
    let one = T::one();
    match mode {
        LinkMode::Dl => {
            let xm1 = c.xi1 - one;
            if !(xm1 > T::zero()) {
                return Err(Error::DlCoefficientsUndefined);
            }
            let theta_l = theta_dl(c)?;
            Ok(LinkCoefficients::Dl {
                a_l: one / xm1,
                b_l: c.tau1 / (xm1 * nu),
                c_l: one / c.tau2,
                d_l: c.tau3 / (c.tau2 * nu),
                theta_l,
            })
        }
        LinkMode::Ul => {
            let theta_s = theta_ul(c)?;
            Ok(LinkCoefficients::Ul {
                a_s: nu / c.xi1,
                b_s: nu / ((nu - one) * c.tau2),
                c_s: one / (nu - one),
                theta_s,
            })
        }
    }
}

/// Everything known about one power split on one realization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecrecyOutcome<T> {
    pub lambda: T,
    pub gamma_r: T,
    pub gamma_d: T,
    /// `(1 + gamma_D) / (1 + gamma_R)`.
    pub phi: T,
    /// `log2(phi) / 2`, may be negative (bits/s/Hz).
    pub rate_raw: T,
    /// `max(rate_raw, 0)` (bits/s/Hz).
    pub rate: T,
}

/// Converts an SNDR ratio to the unclamped secrecy rate in bits/s/Hz.
pub fn rate_from_phi<T: Scalar>(phi: T) -> T {
    phi.ln() / (T::lit(2.0) * T::LN_2())
}

pub fn secrecy_outcome<T: Scalar>(
    r: &ChannelRealization<T>,
    c: &DerivedConstants<T>,
    lambda: T,
) -> Result<SecrecyOutcome<T>> {
    let s = sndr_pair(r, c, lambda)?;
    let phi = s.phi();
    let rate_raw = rate_from_phi(phi);
    Ok(SecrecyOutcome {
        lambda,
        gamma_r: s.gamma_r,
        gamma_d: s.gamma_d,
        phi,
        rate_raw,
        rate: rate_raw.max(T::zero()),
    })
}

/// `phi(lambda)` on the general SNDR path.
pub fn phi<T: Scalar>(r: &ChannelRealization<T>, c: &DerivedConstants<T>, lambda: T) -> Result<T> {
    Ok(sndr_pair(r, c, lambda)?.phi())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hw_profile::EvmProfile;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn tenth() -> DerivedConstants<f64> {
        EvmProfile::uniform(0.1).unwrap().derive_constants()
    }

    /// Interference power at the relay and at the destination computed term
    /// by term from the distortion variances (units of N0), independent of
    /// the collected `A`/`B` coefficients.
    fn power_budget_oracle(r: &ChannelRealization<f64>, e: &EvmProfile<f64>, lambda: f64) -> (f64, f64) {
        let (s_t, r_t, r_r, d_t, d_r) = (
            e.k_s_t.powi(2),
            e.k_r_t.powi(2),
            e.k_r_r.powi(2),
            e.k_d_t.powi(2),
            e.k_d_r.powi(2),
        );
        let signal_r = lambda * r.gamma_sr;
        let src_dist = lambda * s_t * r.gamma_u;
        let jam = (1.0 - lambda) * r.gamma_rd;
        let jam_dist = (1.0 - lambda) * d_t * r.gamma_v;
        let relay_rx_dist = r_r * (lambda * r.gamma_sr + (1.0 - lambda) * r.gamma_rd);
        let noise = 1.0;
        let interference_r = src_dist + jam + jam_dist + relay_rx_dist + noise;
        let gamma_r = signal_r / interference_r;

        let relay_in = signal_r + interference_r;
        let g2 = 1.0 / relay_in; // G^2 / rho
        let fwd = |p: f64| p * g2 * r.gamma_rd;
        let interference_d =
            fwd(src_dist + jam_dist + relay_rx_dist + noise) + r_t * r.gamma_rd + d_r * r.gamma_rd + 1.0;
        let gamma_d = fwd(signal_r) / interference_d;
        (gamma_r, gamma_d)
    }

    #[test]
    fn gain_perfect_reduction() {
        let r = ChannelRealization::new(120.0, 40.0, 30.0, 40.0);
        let c = EvmProfile::perfect().derive_constants();
        for &lambda in &[0.1, 0.5, 0.9] {
            let g = amplification_gain(&r, &c, lambda, 10.0).unwrap();
            let expect = (10.0 / (lambda * 120.0 + (1.0 - lambda) * 40.0 + 1.0_f64)).sqrt();
            assert_relative_eq!(g, expect, max_relative = 1e-14);
        }
    }

    #[test]
    fn gain_terms_equal_snr() {
        let gamma = 50.0;
        let r = ChannelRealization::new(gamma, gamma, gamma, gamma);
        let g = gain_terms(&r, &tenth());
        assert!(g.a_g.abs() < 1e-12);
        assert_relative_eq!(g.b_g, gamma * (1.01 + 0.01) + 1.0, max_relative = 1e-14);
    }

    #[test]
    fn gain_lambda_to_zero_is_continuous() {
        let r = ChannelRealization::new(300.0, 20.0, 40.0, 20.0);
        let c = tenth();
        let g = gain_terms(&r, &c);
        let near = amplification_gain(&r, &c, 1e-12, 5.0).unwrap();
        assert_relative_eq!(near, (5.0 / g.b_g).sqrt(), max_relative = 1e-9);
        assert!(amplification_gain(&r, &c, 0.0, 5.0).is_err());
    }

    #[test]
    fn perfect_hand_values() {
        let r = ChannelRealization::single_antenna(100.0, 50.0);
        let s = sndr_perfect(&r, 0.5).unwrap();
        assert_relative_eq!(s.gamma_r, 50.0 / 26.0, max_relative = 1e-14);
        assert_relative_eq!(s.gamma_d, 2500.0 / 126.0, max_relative = 1e-14);
        let tiny = sndr_perfect(&r, 1e-12).unwrap();
        assert!(tiny.gamma_r < 1e-9 && tiny.gamma_d < 1e-9);
    }

    #[test]
    fn full_power_without_impairments() {
        // No jamming: the relay sees gamma_sr against thermal noise only.
        let r = ChannelRealization::new(80.0, 30.0, 20.0, 30.0);
        let s = sndr_pair(&r, &EvmProfile::perfect().derive_constants(), 1.0).unwrap();
        assert_relative_eq!(s.gamma_r, 80.0, max_relative = 1e-13);
        let p = sndr_perfect(&r, 1.0).unwrap();
        assert_relative_eq!(s.gamma_d, p.gamma_d, max_relative = 1e-13);
    }

    #[test]
    fn collected_terms_match_power_budget() {
        let profiles = [
            EvmProfile::uniform(0.1).unwrap(),
            EvmProfile::new(0.12, 0.05, 0.17, 0.09, 0.14).unwrap(),
            EvmProfile::new(0.0, 0.2, 0.0, 0.3, 0.1).unwrap(),
        ];
        let realizations = [
            ChannelRealization::new(1600.0, 90.0, 190.0, 90.0),
            ChannelRealization::new(15.0, 700.0, 15.0, 80.0),
            ChannelRealization::new(3.0, 2.0, 1.0, 2.0),
        ];
        for e in &profiles {
            let c = e.derive_constants();
            for r in &realizations {
                for &lambda in &[1e-3, 0.2, 0.5, 0.93, 1.0] {
                    let s = sndr_pair(r, &c, lambda).unwrap();
                    let (gr, gd) = power_budget_oracle(r, e, lambda);
                    assert_relative_eq!(s.gamma_r, gr, max_relative = 1e-12);
                    assert_relative_eq!(s.gamma_d, gd, max_relative = 1e-12);
                }
            }
        }
    }

    #[test]
    fn theta_values_at_tenth() {
        let c = tenth();
        assert_relative_eq!(theta_dl(&c).unwrap(), 1.117729979901216, max_relative = 1e-12);
        assert_relative_eq!(theta_ul(&c).unwrap(), 1.0099504938362078, max_relative = 1e-12);
        let perfect = EvmProfile::<f64>::perfect().derive_constants();
        assert!(matches!(theta_dl(&perfect), Err(Error::AsymptoticUndefined)));
        assert!(matches!(theta_ul(&perfect), Err(Error::AsymptoticUndefined)));
    }

    #[test]
    fn dl_coefficients_at_tenth() {
        let c = tenth();
        let r = ChannelRealization::typical(LinkMode::Dl, 1e10, 1e8, 16);
        let LinkCoefficients::Dl { a_l, c_l, .. } = link_coefficients(&r, &c, LinkMode::Dl).unwrap() else {
            panic!("expected DL coefficients")
        };
        assert_relative_eq!(a_l, 100.0, max_relative = 1e-12);
        assert_relative_eq!(c_l, 1.0 / 0.0302, max_relative = 1e-6);
    }

    #[test]
    fn coefficient_errors() {
        let r = ChannelRealization::typical(LinkMode::Dl, 1e4, 1e2, 16);
        let no_relay_rx = EvmProfile::new(0.1, 0.1, 0.0, 0.1, 0.1).unwrap().derive_constants();
        assert!(matches!(
            link_coefficients(&r, &no_relay_rx, LinkMode::Dl),
            Err(Error::DlCoefficientsUndefined)
        ));
        let perfect = EvmProfile::perfect().derive_constants();
        assert!(link_coefficients(&r, &perfect, LinkMode::Ul).is_err());
    }

    #[test]
    fn ul_coefficients_signs() {
        let r = ChannelRealization::typical(LinkMode::Ul, 50.0, 5000.0, 16);
        let LinkCoefficients::Ul { a_s, b_s, c_s, .. } = link_coefficients(&r, &tenth(), LinkMode::Ul).unwrap() else {
            panic!()
        };
        assert!(a_s > 0.0 && b_s < 0.0 && c_s < -1.0);
    }

    fn simplified_error(r: &ChannelRealization<f64>, c: &DerivedConstants<f64>, mode: LinkMode, lambda: f64) -> f64 {
        let k = link_coefficients(r, c, mode).unwrap();
        let exact = sndr_pair(r, c, lambda).unwrap();
        let simple = k.sndr(lambda);
        (exact.gamma_r / simple.gamma_r - 1.0)
            .abs()
            .max((exact.gamma_d / simple.gamma_d - 1.0).abs())
    }

    /// The simplified forms drop the source transmit distortion, the
    /// array-side fourth-moment jamming term and terms of relative order
    /// 1/nu (DL) or nu (UL). Without those they agree in the limit.
    #[test]
    fn simplified_forms_converge_dl() {
        let c = EvmProfile::new(0.0, 0.1, 0.1, 0.1, 0.1).unwrap().derive_constants();
        let gamma_rd = 1e6;
        for &lambda in &[0.05, 0.3, 0.8] {
            let mut last = f64::INFINITY;
            for &nu in &[1e1_f64, 1e2, 1e3, 1e4, 1e5, 1e6] {
                let r = ChannelRealization::typical(LinkMode::Dl, nu * gamma_rd, gamma_rd, 16);
                let err = simplified_error(&r, &c, LinkMode::Dl, lambda);
                assert!(err < last, "lambda {lambda} nu {nu}: {err} !< {last}");
                last = err;
            }
            assert!(last < 1e-3, "lambda {lambda}: {last}");
        }
    }

    #[test]
    fn simplified_forms_converge_ul() {
        let c = EvmProfile::new(0.0, 0.1, 0.1, 0.1, 0.1).unwrap().derive_constants();
        let gamma_rd = 1e9;
        for &lambda in &[0.2, 0.5, 0.9] {
            let mut last = f64::INFINITY;
            for &nu in &[1e-1_f64, 1e-2, 1e-3, 1e-4, 1e-5] {
                let r = ChannelRealization::new(nu * gamma_rd, gamma_rd, nu * gamma_rd, 0.0);
                let err = simplified_error(&r, &c, LinkMode::Ul, lambda);
                assert!(err < last, "lambda {lambda} nu {nu}: {err} !< {last}");
                last = err;
            }
            assert!(last < 1e-3, "lambda {lambda}: {last}");
        }
    }

    #[test]
    fn outcome_symmetric_and_limits() {
        let c = tenth();
        let r = ChannelRealization::typical(LinkMode::Dl, 1e7, 1e5, 16);
        // Bisect for gamma_D = gamma_R where the relay is ahead (small nu ratio).
        let r2 = ChannelRealization::new(5.0, 500.0, 1.0, 500.0);
        let f = |l: f64| {
            let s = sndr_pair(&r2, &c, l).unwrap();
            s.gamma_d - s.gamma_r
        };
        let (mut lo, mut hi) = (1e-6, 1.0);
        assert!(f(lo).signum() != f(hi).signum());
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid).signum() == f(lo).signum() {
                lo = mid
            } else {
                hi = mid
            }
        }
        let o = secrecy_outcome(&r2, &c, 0.5 * (lo + hi)).unwrap();
        assert!((o.phi - 1.0).abs() < 1e-12 && o.rate_raw.abs() < 1e-12);

        let tiny = secrecy_outcome(&r, &c, 1e-12).unwrap();
        assert!(tiny.rate_raw.abs() < 1e-6);

        // Near the ceiling: phi close to its asymptotic value 7.71.
        let lambda = theta_dl(&c).unwrap() / r.nu();
        let o = secrecy_outcome(&r, &c, lambda).unwrap();
        assert!((o.phi / 7.712712240977172 - 1.0).abs() < 0.05, "phi {}", o.phi);
        assert_eq!(o.rate, o.rate_raw.max(0.0));
    }

    #[test]
    fn rate_clamps_negative() {
        let c = tenth();
        let r = ChannelRealization::new(5.0, 500.0, 1.0, 500.0);
        let o = secrecy_outcome(&r, &c, 1.0).unwrap();
        assert!(o.rate_raw < 0.0);
        assert_eq!(o.rate, 0.0);
        assert_relative_eq!(o.rate_raw, o.phi.log2() / 2.0, max_relative = 1e-14);
    }

    proptest! {
        #[test]
        fn zero_evm_reduces_to_perfect(
            gsr in 1e-2..1e6_f64, grd in 1e-2..1e6_f64, frac in 0.05..1.0_f64, lambda in 1e-6..1.0_f64
        ) {
            let r = ChannelRealization::new(gsr, grd, gsr * frac, grd);
            let c = EvmProfile::perfect().derive_constants();
            let a = sndr_pair(&r, &c, lambda).unwrap();
            let b = sndr_perfect(&r, lambda).unwrap();
            prop_assert!((a.gamma_r / b.gamma_r - 1.0).abs() < 1e-12);
            prop_assert!((a.gamma_d / b.gamma_d - 1.0).abs() < 1e-12);
        }

        #[test]
        fn simplified_sndrs_increase_with_lambda(
            k in prop::array::uniform5(0.05..0.175_f64), nu in 50.0..1e4_f64, grd in 10.0..1e6_f64, lambda in 1e-4..0.99_f64
        ) {
            let c = EvmProfile::new(k[0], k[1], k[2], k[3], k[4]).unwrap().derive_constants();
            let r = ChannelRealization::typical(LinkMode::Dl, nu * grd, grd, 16);
            let coeffs = link_coefficients(&r, &c, LinkMode::Dl).unwrap();
            let h = 1e-6;
            let lo = coeffs.sndr(lambda);
            let hi = coeffs.sndr(lambda + h);
            prop_assert!(hi.gamma_r > lo.gamma_r);
            prop_assert!(hi.gamma_d > lo.gamma_d);
        }

        #[test]
        fn theta_dl_real_in_typical_range(k in prop::array::uniform5(0.0..0.175_f64)) {
            let c = EvmProfile::new(k[0], k[1], k[2], k[3], k[4]).unwrap().derive_constants();
            prop_assert!(c.tau1 - c.tau3 > 0.0);
        }
    }
}
