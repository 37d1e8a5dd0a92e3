//! Ergodic secrecy rate (ESR) and secrecy outage probability (SOP) along
//! three paths: exponential-fading closed forms, quadrature over an
//! arbitrary fading cdf, and Monte-Carlo over sampled channels.
//!
//! The closed and integral paths use the high-SNR optimal split, under
//! which the relay SNDR is a constant and the destination SNDR is
//! `α γ / (β γ + δ)` in the single-antenna hop SNR `γ`.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{sample_channel, LinkMode, ScenarioConfig};
use crate::error::{domain, Result};
use crate::hw_profile::{DerivedConstants, EvmProfile};
use crate::link_math::{self, SndrPair};
use crate::opa::{allocate, OpaMethod};
use crate::scalar::Scalar;
use crate::specfun::{exp_scaled_ei, integrate, QuadratureSpec};

/// Relative distance from the open upper end of the ESR integral.
pub const INTEGRAL_END_MARGIN: f64 = 1e-12;

/// Normal quantile of the two-sided 95% interval.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Distribution of the single-antenna hop SNR.
#[derive(Clone)]
pub enum FadingCdf<T> {
    /// Rayleigh fading: exponential SNR.
    Exponential { mean: T },
    /// Nakagami-m fading with integer `m`: gamma-distributed SNR.
    Nakagami { m: u32, mean: T },
    /// Deterministic SNR.
    PointMass { value: T },
    /// Any cdf on `[0, ∞)`.
    Custom {
        mean: T,
        cdf: Arc<dyn Fn(T) -> T + Send + Sync>,
    },
}

impl<T: Scalar> fmt::Debug for FadingCdf<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FadingCdf::Exponential { mean } => write!(f, "Exponential(mean={mean})"),
            FadingCdf::Nakagami { m, mean } => write!(f, "Nakagami(m={m}, mean={mean})"),
            FadingCdf::PointMass { value } => write!(f, "PointMass({value})"),
            FadingCdf::Custom { mean, .. } => write!(f, "Custom(mean={mean})"),
        }
    }
}

impl<T: Scalar> FadingCdf<T> {
    pub fn exponential(mean: T) -> Result<Self> {
        check_mean(mean)?;
        Ok(FadingCdf::Exponential { mean })
    }

    pub fn nakagami(m: u32, mean: T) -> Result<Self> {
        check_mean(mean)?;
        if m == 0 {
            return Err(domain("FadingCdf::nakagami", "m must be >= 1".to_string()));
        }
        Ok(FadingCdf::Nakagami { m, mean })
    }

    pub fn point_mass(value: T) -> Result<Self> {
        check_mean(value)?;
        Ok(FadingCdf::PointMass { value })
    }

    pub fn custom(mean: T, cdf: impl Fn(T) -> T + Send + Sync + 'static) -> Self {
        FadingCdf::Custom {
            mean,
            cdf: Arc::new(cdf),
        }
    }

    pub fn mean(&self) -> T {
        match self {
            FadingCdf::Exponential { mean } | FadingCdf::Nakagami { mean, .. } | FadingCdf::Custom { mean, .. } => {
                *mean
            }
            FadingCdf::PointMass { value } => *value,
        }
    }

    pub fn cdf(&self, x: T) -> T {
        if !(x > T::zero()) {
            return match self {
                FadingCdf::Custom { cdf, .. } => cdf(T::zero()),
                _ => T::zero(),
            };
        }
        if x.is_infinite() {
            return T::one();
        }
        match self {
            FadingCdf::Exponential { mean } => -(-x / *mean).exp_m1(),
            FadingCdf::Nakagami { m, mean } => {
                let y = T::lit(*m as f64) * x / *mean;
                let mut term = T::one();
                let mut sum = T::one();
                for k in 1..*m {
                    term = term * y / T::lit(k as f64);
                    sum = sum + term;
                }
                T::one() - (-y).exp() * sum
            }
            FadingCdf::PointMass { value } => {
                if x >= *value {
                    T::one()
                } else {
                    T::zero()
                }
            }
            FadingCdf::Custom { cdf, .. } => cdf(x),
        }
    }
}

fn check_mean<T: Scalar>(mean: T) -> Result<()> {
    if mean > T::zero() && mean.is_finite() {
        Ok(())
    } else {
        Err(domain("FadingCdf", format!("mean = {mean} must be finite and > 0")))
    }
}

/// Cdf of `α1 Γ / (α2 Γ + α3)` for `Γ ~ base`.
pub fn ratio_cdf<T: Scalar>(base: &FadingCdf<T>, alpha1: T, alpha2: T, alpha3: T, x: T) -> T {
    if x >= alpha1 / alpha2 {
        return T::one();
    }
    base.cdf(alpha3 * x / (alpha1 - alpha2 * x))
}

/// `γ_D = α γ / (β γ + δ)` under the high-SNR split, with the constant relay
/// SNDR alongside.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticForm<T> {
    pub alpha: T,
    pub beta: T,
    pub delta: T,
    pub gamma_r: T,
}

impl<T: Scalar> AsymptoticForm<T> {
    /// Supremum of `γ_D` over the hop SNR.
    pub fn gamma_d_max(&self) -> T {
        self.alpha / self.beta
    }

    pub fn gamma_d(&self, gamma: T) -> T {
        self.alpha * gamma / (self.beta * gamma + self.delta)
    }

    /// Leakage term `ln(1 + γ_R)`.
    pub fn leakage(&self) -> T {
        self.gamma_r.ln_1p()
    }
}

pub fn asymptotic_form<T: Scalar>(c: &DerivedConstants<T>, mode: LinkMode) -> Result<AsymptoticForm<T>> {
    let one = T::one();
    match mode {
        LinkMode::Dl => {
            let theta = link_math::theta_dl(c)?;
            Ok(AsymptoticForm {
                alpha: theta,
                beta: c.tau2 * theta + c.tau3,
                delta: c.xi1 * theta + c.tau4,
                gamma_r: theta / (theta * (c.xi1 - one) + c.tau1),
            })
        }
        LinkMode::Ul => {
            let theta = link_math::theta_ul(c)?;
            Ok(AsymptoticForm {
                alpha: one,
                beta: c.tau2 * (one + theta),
                delta: c.xi2 - c.xi1,
                gamma_r: one / (c.xi1 * (one + c.tau2)).sqrt(),
            })
        }
    }
}

/// SNDRs under the high-SNR split for single-antenna hop SNR
/// `gamma_first_hop` (`γ_rd` in DL, `γ_sr` in UL).
pub fn asymptotic_sndr<T: Scalar>(c: &DerivedConstants<T>, mode: LinkMode, gamma_first_hop: T) -> Result<SndrPair<T>> {
    let f = asymptotic_form(c, mode)?;
    Ok(SndrPair {
        gamma_r: f.gamma_r,
        gamma_d: f.gamma_d(gamma_first_hop),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalPath {
    Closed,
    Integral,
    MonteCarlo,
}

impl EvalPath {
    pub fn as_str(self) -> &'static str {
        match self {
            EvalPath::Closed => "closed",
            EvalPath::Integral => "integral",
            EvalPath::MonteCarlo => "monte_carlo",
        }
    }
}

impl fmt::Display for EvalPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EsrResult<T> {
    /// Clamped at zero (bits/s/Hz).
    pub esr: T,
    /// Closed/integral: the unclamped expression. Monte-Carlo: the mean of
    /// the unclamped per-trial rates.
    pub esr_raw: T,
    pub path: EvalPath,
    pub method: OpaMethod,
    pub ci_halfwidth: Option<T>,
    pub lambda_star_mean: Option<T>,
    /// Quadrature convergence; always `true` off the integral path.
    pub converged: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SopResult<T> {
    pub probability: T,
    pub path: EvalPath,
    pub method: OpaMethod,
    pub target_rate: T,
    /// Target rates at or above this are always in outage.
    pub rate_threshold: T,
    pub ci_halfwidth: Option<T>,
    pub lambda_star_mean: Option<T>,
}

fn two_ln2<T: Scalar>() -> T {
    T::lit(2.0) * T::LN_2()
}

/// Closed-form ESR for exponential hop SNR with mean `mean_snr`.
pub fn esr_closed<T: Scalar>(c: &DerivedConstants<T>, mode: LinkMode, mean_snr: T) -> Result<EsrResult<T>> {
    if !(mean_snr > T::zero()) {
        return Err(domain("esr_closed", format!("mean_snr = {mean_snr} must be > 0")));
    }
    let f = asymptotic_form(c, mode)?;
    let r1 = (f.alpha + f.beta) / f.delta;
    let r2 = f.beta / f.delta;
    let one = T::one();
    let t1 = exp_scaled_ei(one / (r2 * mean_snr))? - exp_scaled_ei(one / (r1 * mean_snr))?;
    let raw = (t1 - f.leakage()) / two_ln2();
    Ok(EsrResult {
        esr: raw.max(T::zero()),
        esr_raw: raw,
        path: EvalPath::Closed,
        method: OpaMethod::HighSnr,
        ci_halfwidth: None,
        lambda_star_mean: None,
        converged: true,
    })
}

/// ESR for an arbitrary hop-SNR distribution by quadrature of
/// `(1 - F_{γ_D}(x)) / (1 + x)`.
pub fn esr_general<T: Scalar>(
    c: &DerivedConstants<T>,
    mode: LinkMode,
    fading: &FadingCdf<T>,
    spec: &QuadratureSpec,
) -> Result<EsrResult<T>> {
    let f = asymptotic_form(c, mode)?;
    let x_max = f.gamma_d_max() * (T::one() - T::lit(INTEGRAL_END_MARGIN));
    let integrand = |x: T| (T::one() - ratio_cdf(fading, f.alpha, f.beta, f.delta, x)) / (T::one() + x);
    // Error estimates cannot see a jump between nodes, so integrate up to and
    // past a point mass separately.
    let mut breaks = vec![T::zero()];
    if let FadingCdf::PointMass { value } = fading {
        let jump = f.gamma_d(*value);
        if jump < x_max {
            breaks.push(jump);
        }
    }
    breaks.push(x_max);
    let mut value = T::zero();
    let mut converged = true;
    for w in breaks.windows(2) {
        let q = integrate(integrand, w[0], w[1], spec);
        value = value + q.value;
        converged &= q.converged;
    }
    let raw = (value - f.leakage()) / two_ln2();
    Ok(EsrResult {
        esr: raw.max(T::zero()),
        esr_raw: raw,
        path: EvalPath::Integral,
        method: OpaMethod::HighSnr,
        ci_halfwidth: None,
        lambda_star_mean: None,
        converged,
    })
}

/// Highest target rate that can be met: `½ log2((1 + γ_D,max) / (1 + γ_R))`.
pub fn rate_threshold<T: Scalar>(c: &DerivedConstants<T>, mode: LinkMode) -> Result<T> {
    let f = asymptotic_form(c, mode)?;
    Ok((f.gamma_d_max().ln_1p() - f.leakage()) / two_ln2())
}

/// Destination SNDR the target rate requires: `2^{2 R_t} (1 + γ_R) - 1`.
pub fn required_gamma_d<T: Scalar>(form: &AsymptoticForm<T>, target_rate: T) -> T {
    (T::lit(2.0) * target_rate * T::LN_2()).exp() * (T::one() + form.gamma_r) - T::one()
}

/// Where the SOP cdf is evaluated.
#[derive(Clone, Debug)]
pub enum SopFading<T: Scalar> {
    /// Exponential hop SNR through the explicit exponential expression.
    Rayleigh { mean_snr: T },
    /// Any hop-SNR distribution through the ratio cdf.
    Cdf(FadingCdf<T>),
}

pub fn sop<T: Scalar>(
    c: &DerivedConstants<T>,
    mode: LinkMode,
    fading: &SopFading<T>,
    target_rate: T,
) -> Result<SopResult<T>> {
    if target_rate < T::zero() {
        return Err(domain("sop", format!("target_rate = {target_rate} must be >= 0")));
    }
    let f = asymptotic_form(c, mode)?;
    let threshold = (f.gamma_d_max().ln_1p() - f.leakage()) / two_ln2();
    let req = required_gamma_d(&f, target_rate);
    let (probability, path) = if target_rate >= threshold || req >= f.gamma_d_max() {
        (
            T::one(),
            match fading {
                SopFading::Rayleigh { .. } => EvalPath::Closed,
                SopFading::Cdf(_) => EvalPath::Integral,
            },
        )
    } else {
        match fading {
            SopFading::Rayleigh { mean_snr } => {
                let arg = f.delta * req / ((f.alpha - f.beta * req) * *mean_snr);
                (-(-arg).exp_m1(), EvalPath::Closed)
            }
            SopFading::Cdf(cdf) => (ratio_cdf(cdf, f.alpha, f.beta, f.delta, req), EvalPath::Integral),
        }
    };
    Ok(SopResult {
        probability,
        path,
        method: OpaMethod::HighSnr,
        target_rate,
        rate_threshold: threshold,
        ci_halfwidth: None,
        lambda_star_mean: None,
    })
}

/// Per-trial record of a Monte-Carlo run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome<T> {
    pub lambda: T,
    pub rate_raw: T,
}

/// All trials of one Monte-Carlo run in trial-index order.
#[derive(Clone, Debug, PartialEq)]
pub struct MonteCarloRun<T> {
    pub method: OpaMethod,
    pub seed: u64,
    pub outcomes: Vec<TrialOutcome<T>>,
}

/// Samples `n_trials` channels, splits power by `method` and records the
/// secrecy rate on the general SNDR path.
///
/// Trial `i` draws from its own `(seed, i)` stream and results are summed in
/// index order, so outputs do not depend on the thread count.
pub fn simulate_rates<T: Scalar>(
    config: &ScenarioConfig<T>,
    profile: &EvmProfile<T>,
    method: OpaMethod,
    n_trials: u64,
    seed: u64,
) -> Result<MonteCarloRun<T>> {
    if n_trials == 0 {
        return Err(domain("simulate_rates", "n_trials must be >= 1".to_string()));
    }
    let constants = profile.derive_constants();
    let outcomes = (0..n_trials)
        .into_par_iter()
        .map(|i| {
            let r = sample_channel(config, seed, i);
            let alloc = allocate(method, &r, &constants, config.mode)?;
            let o = link_math::secrecy_outcome(&r, &constants, alloc.lambda_star)?;
            Ok(TrialOutcome {
                lambda: alloc.lambda_star,
                rate_raw: o.rate_raw,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MonteCarloRun { method, seed, outcomes })
}

fn mean_and_halfwidth<T: Scalar>(values: impl Iterator<Item = T>, n: usize) -> (T, T) {
    let nt = T::lit(n as f64);
    let mut sum = T::zero();
    let mut sum_sq = T::zero();
    for v in values {
        sum = sum + v;
        sum_sq = sum_sq + v * v;
    }
    let mean = sum / nt;
    if n < 2 {
        return (mean, T::zero());
    }
    let var = ((sum_sq - nt * mean * mean) / (nt - T::one())).max(T::zero());
    (mean, T::lit(Z95) * (var / nt).sqrt())
}

impl<T: Scalar> MonteCarloRun<T> {
    pub fn n_trials(&self) -> usize {
        self.outcomes.len()
    }

    pub fn lambda_mean(&self) -> T {
        let n = T::lit(self.outcomes.len() as f64);
        self.outcomes.iter().fold(T::zero(), |s, o| s + o.lambda) / n
    }

    /// Mean of the clamped rate with its 95% CI halfwidth; the unclamped
    /// mean goes to `esr_raw`.
    pub fn esr(&self) -> EsrResult<T> {
        let n = self.outcomes.len();
        let (esr, ci) = mean_and_halfwidth(self.outcomes.iter().map(|o| o.rate_raw.max(T::zero())), n);
        let (raw, _) = mean_and_halfwidth(self.outcomes.iter().map(|o| o.rate_raw), n);
        EsrResult {
            esr,
            esr_raw: raw,
            path: EvalPath::MonteCarlo,
            method: self.method,
            ci_halfwidth: Some(ci),
            lambda_star_mean: Some(self.lambda_mean()),
            converged: true,
        }
    }

    /// Fraction of trials whose clamped rate is below `target_rate`; the CI uses the
    /// binomial normal approximation. `rate_threshold` is NaN here since the
    /// simulation has no single ceiling.
    pub fn sop(&self, target_rate: T) -> SopResult<T> {
        let n = self.outcomes.len();
        let hits = self
            .outcomes
            .iter()
            .filter(|o| o.rate_raw.max(T::zero()) < target_rate)
            .count();
        let p = T::lit(hits as f64 / n as f64);
        let ci = T::lit(Z95) * (p * (T::one() - p) / T::lit(n as f64)).sqrt();
        SopResult {
            probability: p,
            path: EvalPath::MonteCarlo,
            method: self.method,
            target_rate,
            rate_threshold: T::nan(),
            ci_halfwidth: Some(ci),
            lambda_star_mean: Some(self.lambda_mean()),
        }
    }
}

pub fn esr_monte_carlo<T: Scalar>(
    config: &ScenarioConfig<T>,
    profile: &EvmProfile<T>,
    method: OpaMethod,
    n_trials: u64,
    seed: u64,
) -> Result<EsrResult<T>> {
    Ok(simulate_rates(config, profile, method, n_trials, seed)?.esr())
}

pub fn sop_monte_carlo<T: Scalar>(
    config: &ScenarioConfig<T>,
    profile: &EvmProfile<T>,
    method: OpaMethod,
    target_rate: T,
    n_trials: u64,
    seed: u64,
) -> Result<SopResult<T>> {
    Ok(simulate_rates(config, profile, method, n_trials, seed)?.sop(target_rate))
}
