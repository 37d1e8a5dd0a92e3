//! Power allocation between the source (`λP`) and the jamming destination
//! (`(1 - λ)P`).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelRealization, LinkMode};
use crate::error::{Error, Result};
use crate::hw_profile::DerivedConstants;
use crate::link_math::{self, LinkCoefficients};
use crate::scalar::Scalar;

/// Lower clamp of the open interval `(0, 1]`.
pub const LAMBDA_FLOOR: f64 = 1e-9;

/// Default argument tolerance of the golden-section search.
pub const NUMERIC_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpaMethod {
    Exact,
    HighSnr,
    Numeric,
    Epa,
}

impl OpaMethod {
    pub const ALL: [OpaMethod; 4] = [OpaMethod::Exact, OpaMethod::HighSnr, OpaMethod::Numeric, OpaMethod::Epa];

    pub fn as_str(self) -> &'static str {
        match self {
            OpaMethod::Exact => "exact",
            OpaMethod::HighSnr => "high_snr",
            OpaMethod::Numeric => "numeric",
            OpaMethod::Epa => "epa",
        }
    }
}

impl fmt::Display for OpaMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OpaMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "exact" => Ok(OpaMethod::Exact),
            "high_snr" => Ok(OpaMethod::HighSnr),
            "numeric" => Ok(OpaMethod::Numeric),
            "epa" => Ok(OpaMethod::Epa),
            other => Err(Error::InvalidConfig(format!("unknown allocation method {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpaWarning {
    /// The derivative quadratic has no real root.
    NegativeRadicand,
    /// No stationary point in `(0, 1]`; the better boundary was taken.
    NoInteriorRoot,
    /// Closed forms are undefined for this profile; numeric search used.
    NumericFallback(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpaResult<T> {
    pub lambda_star: T,
    pub method: OpaMethod,
    /// `phi(lambda_star)` under the model the method optimised; `None` for
    /// EPA, which optimises nothing.
    pub objective_phi: Option<T>,
    pub clamped: bool,
    /// The single-radical closed-form expression of the optimum, when the
    /// method evaluates one. In DL it coincides with one quadratic root; in
    /// UL it is an approximation of the stationary point.
    pub radical_form: Option<T>,
    pub warning: Option<OpaWarning>,
}

impl<T: Scalar> OpaResult<T> {
    fn plain(lambda_star: T, method: OpaMethod, phi: T) -> Self {
        Self {
            lambda_star,
            method,
            objective_phi: Some(phi),
            clamped: false,
            radical_form: None,
            warning: None,
        }
    }
}

fn floor<T: Scalar>() -> T {
    T::lit(LAMBDA_FLOOR)
}

fn clamp_unit<T: Scalar>(x: T) -> (T, bool) {
    if x < floor() {
        (floor(), true)
    } else if x > T::one() {
        (T::one(), true)
    } else {
        (x, false)
    }
}

/// Coefficients `(A, B, C)` of the numerator `A λ² + B λ + C` of `dφ/dλ`
/// (up to a positive factor) for the rational model in `coeffs`.
pub fn derivative_quadratic<T: Scalar>(coeffs: &LinkCoefficients<T>) -> (T, T, T) {
    let two = T::lit(2.0);
    let one = T::one();
    match *coeffs {
        LinkCoefficients::Dl {
            a_l: a,
            b_l: b,
            c_l: c,
            d_l: d,
            ..
        } => (
            -a * b * (c + one) + c * d * (a + one),
            -two * b * d * (a - c),
            -a * b * d * d + b * b * c * d,
        ),
        LinkCoefficients::Ul {
            a_s: a, b_s: b, c_s: c, ..
        } => (-a * b * c - a * b - a + b * c, -two * c * (a + b), -a * c * c + b * c),
    }
}

/// The single-radical optimum expression for `coeffs`; `None` if its
/// radicand is negative or its denominator vanishes.
pub fn radical_form<T: Scalar>(coeffs: &LinkCoefficients<T>) -> Option<T> {
    let one = T::one();
    match *coeffs {
        LinkCoefficients::Dl {
            a_l: a,
            b_l: b,
            c_l: c,
            d_l: d,
            ..
        } => {
            let radicand = -a * b * c * d * (b - d) * (a * d - b * c - b + d);
            let den = a * b * (c + one) - c * d * (a + one);
            (radicand >= T::zero() && den != T::zero()).then(|| (b * d * (c - a) + radicand.sqrt()) / den)
        }
        LinkCoefficients::Ul {
            a_s: a, b_s: b, c_s: c, ..
        } => {
            let ratio = a * (c + one) * (b + c + one) / (b * c);
            (ratio >= T::zero() && ratio.is_finite()).then(|| one - ratio.sqrt())
        }
    }
}

/// Real roots of `A x² + B x + C`, or `None` when there are none.
fn real_roots<T: Scalar>(a: T, b: T, c: T) -> Option<Vec<T>> {
    let scale = a.abs().max(b.abs()).max(c.abs());
    if scale == T::zero() {
        return Some(Vec::new());
    }
    if a.abs() <= T::epsilon() * scale {
        return Some(if b != T::zero() { vec![-c / b] } else { Vec::new() });
    }
    let disc = b * b - T::lit(4.0) * a * c;
    if disc < T::zero() {
        return None;
    }
    // Cancellation-free pairing.
    let q = -T::lit(0.5) * (b + b.signum() * disc.sqrt());
    let mut roots = vec![q / a];
    if q != T::zero() {
        roots.push(c / q);
    }
    Some(roots)
}

/// Optimum of the rational coefficient model from the roots of its
/// derivative quadratic.
///
/// Feasible roots in `(0, 1]` compete on `phi` together with `λ = 1`; when no
/// root is feasible the better boundary is returned with `clamped = true`.
/// A negative discriminant falls back to the numeric search.
pub fn opa_exact<T: Scalar>(coeffs: &LinkCoefficients<T>) -> Result<OpaResult<T>> {
    let (qa, qb, qc) = derivative_quadratic(coeffs);
    let radical = radical_form(coeffs);
    let Some(roots) = real_roots(qa, qb, qc) else {
        log::warn!("derivative quadratic has a negative discriminant; using numeric search");
        let mut r = opa_numeric_coefficients(coeffs, T::lit(NUMERIC_TOLERANCE));
        r.method = OpaMethod::Exact;
        r.warning = Some(OpaWarning::NegativeRadicand);
        r.radical_form = radical;
        return Ok(r);
    };
    let best = roots
        .into_iter()
        .filter(|x| x.is_finite() && *x > T::zero() && *x <= T::one())
        .map(|x| (x, coeffs.phi(x)))
        .fold(None, |acc: Option<(T, T)>, cand| match acc {
            Some(a) if a.1 >= cand.1 => Some(a),
            _ => Some(cand),
        });
    let phi_one = coeffs.phi(T::one());
    let mut result = match best {
        Some((x, phi)) if phi >= phi_one => OpaResult::plain(x, OpaMethod::Exact, phi),
        _ => {
            let eps = floor();
            let phi_eps = coeffs.phi(eps);
            let (x, phi) = if phi_one >= phi_eps {
                (T::one(), phi_one)
            } else {
                (eps, phi_eps)
            };
            let mut r = OpaResult::plain(x, OpaMethod::Exact, phi);
            r.clamped = true;
            r.warning = Some(OpaWarning::NoInteriorRoot);
            r
        }
    };
    result.radical_form = radical;
    Ok(result)
}

/// `λ* = θ_L / ν` (DL) or `1 - θ_S ν` (UL), clamped into `(0, 1]`.
pub fn opa_high_snr<T: Scalar>(
    coeffs: &LinkCoefficients<T>,
    realization: &ChannelRealization<T>,
) -> Result<OpaResult<T>> {
    let nu = realization.nu();
    let raw = match coeffs.mode() {
        LinkMode::Dl => coeffs.theta() / nu,
        LinkMode::Ul => T::one() - coeffs.theta() * nu,
    };
    let (x, clamped) = clamp_unit(raw);
    let mut r = OpaResult::plain(x, OpaMethod::HighSnr, coeffs.phi(x));
    r.clamped = clamped;
    Ok(r)
}

/// High-SNR split straight from the impairment constants.
pub fn high_snr_lambda<T: Scalar>(constants: &DerivedConstants<T>, mode: LinkMode, nu: T) -> Result<T> {
    let raw = match mode {
        LinkMode::Dl => link_math::theta_dl(constants)? / nu,
        LinkMode::Ul => T::one() - link_math::theta_ul(constants)? * nu,
    };
    Ok(clamp_unit(raw).0)
}

/// Golden-section maximisation of a quasi-concave `f` on `[lo, hi]`.
/// Returns the best of the bracket centre and both endpoints.
pub fn golden_section_max<T: Scalar, F: FnMut(T) -> T>(mut f: F, lo: T, hi: T, tol: T) -> (T, T) {
    let inv_phi = T::lit(0.618_033_988_749_894_9);
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut iters = 0;
    while (b - a) > tol && iters < 200 {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        }
        iters += 1;
    }
    let mut best = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    // A flat objective keeps the lower end; a monotone one its maximising end.
    let f_lo = f(lo);
    if f_lo >= best.1 {
        best = (lo, f_lo);
    }
    let f_hi = f(hi);
    if f_hi > best.1 {
        best = (hi, f_hi);
    }
    best
}

/// Numeric optimum of `phi` on the general SNDR path.
pub fn opa_numeric<T: Scalar>(
    realization: &ChannelRealization<T>,
    constants: &DerivedConstants<T>,
    tolerance: T,
) -> Result<OpaResult<T>> {
    if !(tolerance > T::zero()) {
        return Err(crate::error::domain(
            "opa_numeric",
            format!("tolerance = {tolerance} must be > 0"),
        ));
    }
    // Validate once so the search itself cannot fail.
    link_math::phi(realization, constants, T::one())?;
    let (x, phi) = golden_section_max(
        |l| link_math::phi(realization, constants, l).unwrap_or(T::neg_infinity()),
        floor(),
        T::one(),
        tolerance,
    );
    Ok(OpaResult::plain(x, OpaMethod::Numeric, phi))
}

/// Numeric optimum of the rational coefficient model.
pub fn opa_numeric_coefficients<T: Scalar>(coeffs: &LinkCoefficients<T>, tolerance: T) -> OpaResult<T> {
    let (x, phi) = golden_section_max(|l| coeffs.phi(l), floor(), T::one(), tolerance);
    OpaResult::plain(x, OpaMethod::Numeric, phi)
}

/// Equal power allocation.
pub fn epa<T: Scalar>() -> OpaResult<T> {
    OpaResult {
        lambda_star: T::lit(0.5),
        method: OpaMethod::Epa,
        objective_phi: None,
        clamped: false,
        radical_form: None,
        warning: None,
    }
}

/// Power split by `method` for one realization.
///
/// The closed-form methods need impaired hardware (`tau2 > 0`, and in DL
/// `k_R_r > 0`); otherwise the numeric search on the general path is used
/// and flagged with [`OpaWarning::NumericFallback`].
pub fn allocate<T: Scalar>(
    method: OpaMethod,
    realization: &ChannelRealization<T>,
    constants: &DerivedConstants<T>,
    mode: LinkMode,
) -> Result<OpaResult<T>> {
    let closed = |method: OpaMethod| -> Result<OpaResult<T>> {
        let coeffs = link_math::link_coefficients(realization, constants, mode)?;
        match method {
            OpaMethod::Exact => opa_exact(&coeffs),
            _ => opa_high_snr(&coeffs, realization),
        }
    };
    match method {
        OpaMethod::Epa => {
            let mut r = epa();
            r.objective_phi = link_math::phi(realization, constants, r.lambda_star).ok();
            Ok(r)
        }
        OpaMethod::Numeric => opa_numeric(realization, constants, T::lit(NUMERIC_TOLERANCE)),
        OpaMethod::Exact | OpaMethod::HighSnr => match closed(method) {
            Ok(r) => Ok(r),
            Err(e @ (Error::AsymptoticUndefined | Error::DlCoefficientsUndefined | Error::ZeroDenominator(_))) => {
                let mut r = opa_numeric(realization, constants, T::lit(NUMERIC_TOLERANCE))?;
                r.method = method;
                r.warning = Some(OpaWarning::NumericFallback(e.to_string()));
                Ok(r)
            }
            Err(e) => Err(e),
        },
    }
}
