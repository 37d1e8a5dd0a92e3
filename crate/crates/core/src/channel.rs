//! Rayleigh fading draws, per-frame SNR statistics and a waveform-level
//! check of the analytic SNDR expressions.
//!
//! Every draw comes from its own ChaCha8 stream selected by
//! `(seed, trial_index)`, so a batch of trials gives the same realizations no
//! matter how the batch is split across threads.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::hw_profile::EvmProfile;
use crate::link_math::amplification_gain;
use crate::scalar::Scalar;

/// Which end of the link carries the large antenna array.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkMode {
    /// Downlink: the source has `n_antennas`, the destination one.
    Dl,
    /// Uplink: the destination has `n_antennas`, the source one.
    Ul,
}

impl LinkMode {
    pub const ALL: [LinkMode; 2] = [LinkMode::Dl, LinkMode::Ul];

    pub fn as_str(self) -> &'static str {
        match self {
            LinkMode::Dl => "dl",
            LinkMode::Ul => "ul",
        }
    }
}

impl fmt::Display for LinkMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LinkMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dl" => Ok(LinkMode::Dl),
            "ul" => Ok(LinkMode::Ul),
            other => Err(Error::InvalidConfig(format!("unknown link mode `{other}`"))),
        }
    }
}

/// Link geometry and operating point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig<T> {
    pub mode: LinkMode,
    /// Array size at the multi-antenna node (`N_s` in DL, `N_d` in UL).
    pub n_antennas: usize,
    /// Linear transmit SNR `P / N0`.
    pub rho: T,
    /// Average gain of the source-relay hop.
    pub mu_sr: T,
    /// Average gain of the relay-destination hop.
    pub mu_rd: T,
}

impl<T: Scalar> ScenarioConfig<T> {
    pub fn new(mode: LinkMode, n_antennas: usize, rho: T, mu_sr: T, mu_rd: T) -> Result<Self> {
        if n_antennas == 0 {
            return Err(Error::InvalidConfig("n_antennas must be >= 1".into()));
        }
        for (name, v) in [("rho", rho), ("mu_sr", mu_sr), ("mu_rd", mu_rd)] {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "{name} = {v} must be positive and finite"
                )));
            }
        }
        Ok(Self {
            mode,
            n_antennas,
            rho,
            mu_sr,
            mu_rd,
        })
    }

    /// Same as [`ScenarioConfig::new`] with the transmit SNR given in dB.
    pub fn with_snr_db(mode: LinkMode, n_antennas: usize, snr_db: T, mu_sr: T, mu_rd: T) -> Result<Self> {
        Self::new(mode, n_antennas, db_to_linear(snr_db), mu_sr, mu_rd)
    }

    /// Average per-branch SNR of the source-relay hop, `rho * mu_sr`.
    pub fn mean_snr_sr(&self) -> T {
        self.rho * self.mu_sr
    }

    /// Average per-branch SNR of the relay-destination hop, `rho * mu_rd`.
    pub fn mean_snr_rd(&self) -> T {
        self.rho * self.mu_rd
    }

    /// Average SNR of the single-antenna hop, the one the closed forms
    /// average over (`gamma_rd` in DL, `gamma_sr` in UL).
    pub fn mean_snr_single_hop(&self) -> T {
        match self.mode {
            LinkMode::Dl => self.mean_snr_rd(),
            LinkMode::Ul => self.mean_snr_sr(),
        }
    }
}

pub fn db_to_linear<T: Scalar>(db: T) -> T {
    T::lit(10.0).powf(db / T::lit(10.0))
}

/// Per-frame SNR statistics of one fading draw.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization<T> {
    /// `rho * ||h_sr||^2`.
    pub gamma_sr: T,
    /// `rho * ||h_rd||^2`.
    pub gamma_rd: T,
    /// Fourth-moment SNR of the source side: `rho * sum|h_sr,i|^4 / ||h_sr||^2`
    /// in DL, `gamma_sr` in UL.
    pub gamma_u: T,
    /// Fourth-moment SNR of the destination side: `gamma_rd` in DL,
    /// `rho * sum|h_rd,i|^4 / ||h_rd||^2` in UL.
    pub gamma_v: T,
}

impl<T: Scalar> ChannelRealization<T> {
    pub fn new(gamma_sr: T, gamma_rd: T, gamma_u: T, gamma_v: T) -> Self {
        Self {
            gamma_sr,
            gamma_rd,
            gamma_u,
            gamma_v,
        }
    }

    /// Both hops single-antenna: the fourth-moment SNRs collapse onto the
    /// link SNRs.
    pub fn single_antenna(gamma_sr: T, gamma_rd: T) -> Self {
        Self::new(gamma_sr, gamma_rd, gamma_sr, gamma_rd)
    }

    /// Representative realization with the fourth-moment SNR of the array
    /// hop set to its Rayleigh mean ratio `2 / (n + 1)`.
    pub fn typical(mode: LinkMode, gamma_sr: T, gamma_rd: T, n_antennas: usize) -> Self {
        let ratio = T::lit(2.0 / (n_antennas as f64 + 1.0));
        match mode {
            LinkMode::Dl => Self::new(gamma_sr, gamma_rd, gamma_sr * ratio, gamma_rd),
            LinkMode::Ul => Self::new(gamma_sr, gamma_rd, gamma_sr, gamma_rd * ratio),
        }
    }

    /// Ratio of first-hop to second-hop SNR.
    pub fn nu(&self) -> T {
        self.gamma_sr / self.gamma_rd
    }
}

/// Raw channel coefficients of one trial.
#[derive(Clone, Debug)]
pub struct ChannelDraw {
    pub mode: LinkMode,
    /// Coefficients of the array hop (`h_sr` in DL, `h_rd` in UL).
    pub multi: Vec<Complex64>,
    /// Coefficient of the single-antenna hop.
    pub single: Complex64,
    pub rho: f64,
}

impl ChannelDraw {
    pub fn h_sr(&self) -> &[Complex64] {
        match self.mode {
            LinkMode::Dl => &self.multi,
            LinkMode::Ul => std::slice::from_ref(&self.single),
        }
    }

    pub fn h_rd(&self) -> &[Complex64] {
        match self.mode {
            LinkMode::Dl => std::slice::from_ref(&self.single),
            LinkMode::Ul => &self.multi,
        }
    }

    pub fn realization<T: Scalar>(&self) -> ChannelRealization<T> {
        let (n_m, q_m) = norm_and_fourth(&self.multi);
        let n_s = self.single.norm_sqr();
        let rho = self.rho;
        let (gsr, grd, gu, gv) = match self.mode {
            LinkMode::Dl => (rho * n_m, rho * n_s, rho * q_m, rho * n_s),
            LinkMode::Ul => (rho * n_s, rho * n_m, rho * n_s, rho * q_m),
        };
        ChannelRealization::new(T::lit(gsr), T::lit(grd), T::lit(gu), T::lit(gv))
    }
}

fn norm_and_fourth(h: &[Complex64]) -> (f64, f64) {
    let norm: f64 = h.iter().map(|z| z.norm_sqr()).sum();
    if norm == 0.0 {
        return (0.0, 0.0);
    }
    if h.len() == 1 {
        return (norm, norm);
    }
    let fourth: f64 = h.iter().map(|z| z.norm_sqr() * z.norm_sqr()).sum();
    (norm, fourth / norm)
}

/// ChaCha8 generator for one `(seed, stream)` pair.
pub fn trial_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Circularly-symmetric complex Gaussian with the given variance.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (0.5 * variance).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * s, im * s)
}

/// Draws the channel coefficients of trial `trial_index`.
pub fn sample_channel_draw<T: Scalar>(config: &ScenarioConfig<T>, seed: u64, trial_index: u64) -> ChannelDraw {
    let mut rng = trial_rng(seed, trial_index);
    let (mu_multi, mu_single) = match config.mode {
        LinkMode::Dl => (config.mu_sr, config.mu_rd),
        LinkMode::Ul => (config.mu_rd, config.mu_sr),
    };
    let mu_multi = mu_multi.to_f64_lossy();
    let multi = (0..config.n_antennas)
        .map(|_| complex_gaussian(&mut rng, mu_multi))
        .collect();
    let single = complex_gaussian(&mut rng, mu_single.to_f64_lossy());
    ChannelDraw {
        mode: config.mode,
        multi,
        single,
        rho: config.rho.to_f64_lossy(),
    }
}

/// SNR statistics of trial `trial_index`; a pure function of its arguments.
pub fn sample_channel<T: Scalar>(config: &ScenarioConfig<T>, seed: u64, trial_index: u64) -> ChannelRealization<T> {
    sample_channel_draw(config, seed, trial_index).realization()
}

/// Empirical SNDRs measured at the relay and at the destination.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EmpiricalSndr {
    pub gamma_r: f64,
    pub gamma_d: f64,
}

/// Simulates `n_symbols` channel uses of one frame at the symbol level and
/// measures the signal-to-(noise + distortion) power ratios.
///
/// Every random term is redrawn per symbol while the channel stays fixed. Distortion
/// variances follow the per-chain EVM model: proportional to the signal
/// power through the corresponding chain. The relay applies the gain from
/// [`amplification_gain`]; the destination removes its own jamming symbol
/// before measuring, and with an antenna array it combines by MRC.
pub fn empirical_sndr<T: Scalar>(
    draw: &ChannelDraw,
    profile: &EvmProfile<T>,
    lambda: f64,
    n_symbols: usize,
    seed: u64,
) -> Result<EmpiricalSndr> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(domain("empirical_sndr", format!("lambda = {lambda} outside (0, 1]")));
    }
    if n_symbols == 0 {
        return Err(domain("empirical_sndr", "n_symbols must be positive"));
    }
    let k = |v: T| v.to_f64_lossy();
    let (k_s_t, k_r_t, k_r_r, k_d_t, k_d_r) = (
        k(profile.k_s_t),
        k(profile.k_r_t),
        k(profile.k_r_r),
        k(profile.k_d_t),
        k(profile.k_d_r),
    );

    let p = draw.rho; // N0 = 1
    let h_sr = draw.h_sr();
    let h_rd = draw.h_rd();
    let (nsr, _) = norm_and_fourth(h_sr);
    let (nrd, _) = norm_and_fourth(h_rd);
    if nsr == 0.0 || nrd == 0.0 {
        return Err(domain("empirical_sndr", "channel with zero gain"));
    }

    let realization: ChannelRealization<f64> = draw.realization();
    let constants = EvmProfile::new(k_s_t, k_r_t, k_r_r, k_d_t, k_d_r)?.derive_constants();
    let gain = amplification_gain(&realization, &constants, lambda, p)?;

    let src_amp = (lambda * p).sqrt();
    let jam_amp = ((1.0 - lambda) * p).sqrt();
    let rr_var = p * k_r_r * k_r_r * (lambda * nsr + (1.0 - lambda) * nrd);
    // Per-antenna transmit distortion variances: power share of each branch.
    let s_t_var: Vec<f64> = h_sr
        .iter()
        .map(|h| lambda * p * k_s_t * k_s_t * h.norm_sqr() / nsr)
        .collect();
    let d_t_var: Vec<f64> = h_rd
        .iter()
        .map(|h| (1.0 - lambda) * p * k_d_t * k_d_t * h.norm_sqr() / nrd)
        .collect();
    let r_t_var = p * k_r_t * k_r_t;
    let d_r_var: Vec<f64> = h_rd.iter().map(|h| p * k_d_r * k_d_r * h.norm_sqr()).collect();
    let sqrt_nsr = nsr.sqrt();
    let sqrt_nrd = nrd.sqrt();

    let mut rng = trial_rng(seed, 0);
    let (mut sig_r, mut int_r, mut sig_d, mut int_d) = (0.0, 0.0, 0.0, 0.0);
    for _ in 0..n_symbols {
        let x_s = complex_gaussian(&mut rng, 1.0);
        let x_d = complex_gaussian(&mut rng, 1.0);

        // Beamformed hops reach the relay with gain ||h||; single-antenna hops
        // with their coefficient.
        let useful = match draw.mode {
            LinkMode::Dl => x_s * (src_amp * sqrt_nsr),
            LinkMode::Ul => x_s * h_sr[0] * src_amp,
        };
        let jamming = match draw.mode {
            LinkMode::Dl => x_d * h_rd[0] * jam_amp,
            LinkMode::Ul => x_d * (jam_amp * sqrt_nrd),
        };
        let mut distortion = complex_gaussian(&mut rng, rr_var);
        for (h, &v) in h_sr.iter().zip(&s_t_var) {
            distortion += complex_gaussian(&mut rng, v) * h;
        }
        for (h, &v) in h_rd.iter().zip(&d_t_var) {
            distortion += complex_gaussian(&mut rng, v) * h;
        }
        let noise_r = complex_gaussian(&mut rng, 1.0);

        sig_r += useful.norm_sqr();
        int_r += (jamming + distortion + noise_r).norm_sqr();

        // Relay output without the jamming part, which the destination
        // cancels; the relay transmit distortion rides on top.
        let forwarded_sig = useful * gain;
        let forwarded_int = (distortion + noise_r) * gain + complex_gaussian(&mut rng, r_t_var);

        // MRC over the destination branches (a single branch in DL).
        let (mut s_acc, mut i_acc) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        for (h, &v) in h_rd.iter().zip(&d_r_var) {
            let w = h.conj() / sqrt_nrd;
            let rx_noise = complex_gaussian(&mut rng, v) + complex_gaussian(&mut rng, 1.0);
            s_acc += w * h * forwarded_sig;
            i_acc += w * (h * forwarded_int + rx_noise);
        }
        sig_d += s_acc.norm_sqr();
        int_d += i_acc.norm_sqr();
    }
    Ok(EmpiricalSndr {
        gamma_r: sig_r / int_r,
        gamma_d: sig_d / int_d,
    })
}
