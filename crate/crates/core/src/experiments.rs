//! Config-driven sweeps and the cross-path validation suite.
//!
//! A sweep is described by a TOML file:
//!
//! ```toml
//! metric = "esr"            # or "sop"
//! methods = ["numeric", "epa"]
//! paths = ["monte_carlo", "closed"]
//! target_rates = [0.25, 1.0]  # sop only
//! n_trials = 100000
//! seed = 1
//! output = "out/esr_n16.csv"
//!
//! [scenario]
//! modes = ["dl", "ul"]
//! n_antennas = 16
//! mu_sr = 10.0
//! mu_rd = 10.0
//!
//! [snr_db]
//! start = 0.0
//! stop = 50.0
//! step = 5.0
//!
//! [[profiles]]
//! label = "k=0.1"
//! evm = 0.1
//!
//! [[profiles]]
//! label = "design-4"
//! k_s_t = 0.1
//! iv = [0.1, 0.1, 0.13, 0.07]
//! ```

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::channel::{empirical_sndr, sample_channel_draw, LinkMode, ScenarioConfig};
use crate::error::{Error, Result};
use crate::hw_design::DesignVector;
use crate::hw_profile::EvmProfile;
use crate::link_math::{sndr_pair, sndr_perfect};
use crate::opa::OpaMethod;
use crate::secrecy_metrics::{
    esr_closed, esr_general, esr_monte_carlo, simulate_rates, sop, EvalPath, FadingCdf, SopFading,
};
use crate::specfun::{expint_e1, integrate, QuadratureSpec};

pub const DEFAULT_ESR_TRIALS: u64 = 100_000;
pub const DEFAULT_SOP_TRIALS: u64 = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Esr,
    Sop,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioTemplate {
    pub modes: Vec<LinkMode>,
    pub n_antennas: usize,
    #[serde(default = "ten")]
    pub mu_sr: f64,
    #[serde(default = "ten")]
    pub mu_rd: f64,
}

fn ten() -> f64 {
    10.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnrRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl SnrRange {
    pub fn validate(&self) -> Result<()> {
        if !(self.start.is_finite() && self.stop.is_finite()) {
            return Err(Error::InvalidConfig("snr_db bounds must be finite".into()));
        }
        if !(self.step > 0.0) {
            return Err(Error::InvalidConfig(format!("snr_db.step = {} must be > 0", self.step)));
        }
        if self.stop < self.start {
            return Err(Error::InvalidConfig(format!(
                "snr_db.stop = {} < start = {}",
                self.stop, self.start
            )));
        }
        Ok(())
    }

    /// `start, start + step, ...` up to `stop` inclusive.
    pub fn points(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.start + i as f64 * self.step).collect()
    }
}

/// A hardware profile in a sweep: either all five EVMs equal to `evm`, or a
/// relay/destination design vector `iv` with source EVM `k_s_t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileCase {
    pub label: String,
    #[serde(default)]
    pub evm: Option<f64>,
    #[serde(default)]
    pub iv: Option<[f64; 4]>,
    #[serde(default)]
    pub k_s_t: Option<f64>,
}

impl ProfileCase {
    pub fn uniform(k: f64) -> Self {
        Self {
            label: format!("k={k}"),
            evm: Some(k),
            iv: None,
            k_s_t: None,
        }
    }

    pub fn design(label: impl Into<String>, iv: [f64; 4], k_s_t: f64) -> Self {
        Self {
            label: label.into(),
            evm: None,
            iv: Some(iv),
            k_s_t: Some(k_s_t),
        }
    }

    pub fn to_profile(&self) -> Result<EvmProfile<f64>> {
        match (self.evm, self.iv) {
            (Some(k), None) => {
                if self.k_s_t.is_some() {
                    return Err(Error::InvalidConfig(format!(
                        "profile {}: k_s_t only applies with iv",
                        self.label
                    )));
                }
                EvmProfile::uniform(k)
            }
            (None, Some(iv)) => DesignVector::from_array(iv)?.to_profile(self.k_s_t.unwrap_or(0.1)),
            _ => Err(Error::InvalidConfig(format!(
                "profile {}: set exactly one of evm or iv",
                self.label
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub metric: Metric,
    pub scenario: ScenarioTemplate,
    pub snr_db: SnrRange,
    pub profiles: Vec<ProfileCase>,
    #[serde(default = "default_methods")]
    pub methods: Vec<OpaMethod>,
    #[serde(default = "default_paths")]
    pub paths: Vec<EvalPath>,
    #[serde(default)]
    pub target_rates: Vec<f64>,
    #[serde(default)]
    pub n_trials: Option<u64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_methods() -> Vec<OpaMethod> {
    vec![OpaMethod::Numeric]
}

fn default_paths() -> Vec<EvalPath> {
    vec![EvalPath::MonteCarlo, EvalPath::Closed]
}

impl SweepSpec {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let spec: SweepSpec = toml::from_str(s).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn n_trials(&self) -> u64 {
        self.n_trials.unwrap_or(match self.metric {
            Metric::Esr => DEFAULT_ESR_TRIALS,
            Metric::Sop => DEFAULT_SOP_TRIALS,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.snr_db.validate()?;
        if self.n_trials == Some(0) {
            return Err(Error::InvalidConfig("n_trials must be >= 1".into()));
        }
        if self.scenario.modes.is_empty() {
            return Err(Error::InvalidConfig("scenario.modes is empty".into()));
        }
        if self.scenario.n_antennas == 0 {
            return Err(Error::InvalidConfig("scenario.n_antennas must be >= 1".into()));
        }
        if self.profiles.is_empty() {
            return Err(Error::InvalidConfig("no profiles".into()));
        }
        if self.paths.is_empty() {
            return Err(Error::InvalidConfig("no evaluation paths".into()));
        }
        if self.paths.contains(&EvalPath::MonteCarlo) && self.methods.is_empty() {
            return Err(Error::InvalidConfig(
                "monte_carlo path needs at least one method".into(),
            ));
        }
        match self.metric {
            Metric::Sop if self.target_rates.is_empty() => {
                return Err(Error::InvalidConfig("sop sweep needs target_rates".into()));
            }
            Metric::Esr if !self.target_rates.is_empty() => {
                return Err(Error::InvalidConfig("target_rates only apply to sop sweeps".into()));
            }
            _ => {}
        }
        if let Some(r) = self.target_rates.iter().find(|r| !(**r >= 0.0 && r.is_finite())) {
            return Err(Error::InvalidConfig(format!("target rate {r} must be finite and >= 0")));
        }
        for p in &self.profiles {
            p.to_profile()?;
        }
        ScenarioConfig::new(
            self.scenario.modes[0],
            self.scenario.n_antennas,
            1.0,
            self.scenario.mu_sr,
            self.scenario.mu_rd,
        )?;
        Ok(())
    }
}

/// One CSV line of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub snr_db: f64,
    pub mode: LinkMode,
    pub method: OpaMethod,
    pub path: EvalPath,
    pub value: f64,
    pub ci_halfwidth: Option<f64>,
    pub lambda_star_mean: Option<f64>,
    pub profile: String,
    pub target_rate: Option<f64>,
    /// Unclamped ESR; empty for SOP rows.
    pub value_raw: Option<f64>,
}

pub const CSV_HEADER: [&str; 10] = [
    "snr_db",
    "mode",
    "method",
    "path",
    "value",
    "ci_halfwidth",
    "lambda_star_mean",
    "profile",
    "target_rate",
    "value_raw",
];

/// Rows ordered by profile, mode, SNR, path, method and target rate.
/// Closed and integral paths appear once per point; they have no
/// allocation choice. Those paths are skipped for perfect hardware, where
/// the high-SNR forms do not exist.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let n_trials = spec.n_trials();
    let snrs = spec.snr_db.points();
    let quad = QuadratureSpec::default();
    let mut rows = Vec::new();
    for case in &spec.profiles {
        let profile = case.to_profile()?;
        let constants = profile.derive_constants();
        for &mode in &spec.scenario.modes {
            for &db in &snrs {
                let started = Instant::now();
                let cfg = ScenarioConfig::with_snr_db(
                    mode,
                    spec.scenario.n_antennas,
                    db,
                    spec.scenario.mu_sr,
                    spec.scenario.mu_rd,
                )?;
                let mean = cfg.mean_snr_single_hop();
                let row = |method, path, value, ci, lam, rt, raw| SweepRow {
                    snr_db: db,
                    mode,
                    method,
                    path,
                    value,
                    ci_halfwidth: ci,
                    lambda_star_mean: lam,
                    profile: case.label.clone(),
                    target_rate: rt,
                    value_raw: raw,
                };
                for &path in &spec.paths {
                    match path {
                        EvalPath::MonteCarlo => {
                            for &method in &spec.methods {
                                let run = simulate_rates(&cfg, &profile, method, n_trials, spec.seed)?;
                                match spec.metric {
                                    Metric::Esr => {
                                        let e = run.esr();
                                        rows.push(row(
                                            method,
                                            path,
                                            e.esr,
                                            e.ci_halfwidth,
                                            e.lambda_star_mean,
                                            None,
                                            Some(e.esr_raw),
                                        ));
                                    }
                                    Metric::Sop => {
                                        for &rt in &spec.target_rates {
                                            let s = run.sop(rt);
                                            rows.push(row(
                                                method,
                                                path,
                                                s.probability,
                                                s.ci_halfwidth,
                                                s.lambda_star_mean,
                                                Some(rt),
                                                None,
                                            ));
                                        }
                                    }
                                }
                            }
                        }
                        EvalPath::Closed | EvalPath::Integral => {
                            if !constants.has_impairments() {
                                log::info!("{}: no {} path for perfect hardware", case.label, path.as_str());
                                continue;
                            }
                            let fading = FadingCdf::exponential(mean)?;
                            match spec.metric {
                                Metric::Esr => {
                                    let e = if path == EvalPath::Closed {
                                        esr_closed(&constants, mode, mean)?
                                    } else {
                                        esr_general(&constants, mode, &fading, &quad)?
                                    };
                                    if !e.converged {
                                        log::warn!("{} {mode} {db} dB: quadrature did not converge", case.label);
                                    }
                                    rows.push(row(e.method, path, e.esr, None, None, None, Some(e.esr_raw)));
                                }
                                Metric::Sop => {
                                    let f = if path == EvalPath::Closed {
                                        SopFading::Rayleigh { mean_snr: mean }
                                    } else {
                                        SopFading::Cdf(fading.clone())
                                    };
                                    for &rt in &spec.target_rates {
                                        let s = sop(&constants, mode, &f, rt)?;
                                        rows.push(row(s.method, path, s.probability, None, None, Some(rt), None));
                                    }
                                }
                            }
                        }
                    }
                }
                log::debug!("{} {mode} {db} dB done in {:.2?}", case.label, started.elapsed());
            }
        }
    }
    Ok(rows)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes the header and rows. Numbers use the shortest round-trip form.
pub fn write_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.snr_db.to_string(),
            r.mode.as_str().to_string(),
            r.method.as_str().to_string(),
            r.path.as_str().to_string(),
            r.value.to_string(),
            opt(r.ci_halfwidth),
            opt(r.lambda_star_mean),
            r.profile.clone(),
            opt(r.target_rate),
            opt(r.value_raw),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_file(rows: &[SweepRow], path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    write_csv(rows, fs::File::create(path)?)
}

/// Outcome of one identity check.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: impl Into<String>, passed: bool, detail: String) -> Self {
        Self {
            name: name.into(),
            passed,
            detail,
        }
    }
}

/// Independent `E1(t)` by quadrature of `e^t exp(-e^y)` over `y > ln t`.
pub fn e1_quadrature_oracle(t: f64) -> f64 {
    let spec = QuadratureSpec::new(1e-15, 1e-13, 4000).expect("valid spec");
    let scaled = integrate(|y: f64| (t - y.exp()).exp(), t.ln(), (t + 60.0).ln(), &spec).value;
    (-t).exp() * scaled
}

/// Cross-path identity suite. `quick` shrinks the simulation sizes to fit
/// a desk-top budget of a few tens of seconds.
pub fn validation_suite(quick: bool, seed: u64) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    let quad = QuadratureSpec::default();
    let tenth = EvmProfile::uniform(0.1)?;
    let c = tenth.derive_constants();

    for mode in LinkMode::ALL {
        let mut worst_esr = 0.0_f64;
        let mut worst_sop = 0.0_f64;
        for i in 0..=50 {
            let mean = 10f64.powf(i as f64 / 10.0);
            let fading = FadingCdf::exponential(mean)?;
            let a = esr_closed(&c, mode, mean)?.esr_raw;
            let b = esr_general(&c, mode, &fading, &quad)?.esr_raw;
            worst_esr = worst_esr.max((a - b).abs());
            for rt in [0.25, 0.5, 1.0, 1.4] {
                let p = sop(&c, mode, &SopFading::Rayleigh { mean_snr: mean }, rt)?.probability;
                let q = sop(&c, mode, &SopFading::Cdf(fading.clone()), rt)?.probability;
                worst_sop = worst_sop.max((p - q).abs());
            }
        }
        out.push(CheckResult::new(
            format!("esr integral = closed ({mode})"),
            worst_esr < 1e-8,
            format!("max diff {worst_esr:.3e}"),
        ));
        out.push(CheckResult::new(
            format!("sop integral = closed ({mode})"),
            worst_sop < 1e-8,
            format!("max diff {worst_sop:.3e}"),
        ));
    }

    let perfect = EvmProfile::<f64>::perfect().derive_constants();
    let mut worst = 0.0_f64;
    for i in 0..200u64 {
        let cfg = ScenarioConfig::with_snr_db(LinkMode::Dl, 8, (i % 40) as f64, 10.0, 10.0)?;
        let r = sample_channel_draw(&cfg, seed, i).realization::<f64>();
        let lambda = (i as f64 + 0.5) / 200.0;
        let a = sndr_pair(&r, &perfect, lambda)?;
        let b = sndr_perfect(&r, lambda)?;
        let rel = |x: f64, y: f64| (x - y).abs() / y.abs().max(f64::MIN_POSITIVE);
        worst = worst.max(rel(a.gamma_r, b.gamma_r)).max(rel(a.gamma_d, b.gamma_d));
    }
    out.push(CheckResult::new(
        "zero-EVM sndr = perfect-hardware form",
        worst < 1e-12,
        format!("max rel diff {worst:.3e}"),
    ));

    let mut worst = 0.0_f64;
    for t in [1e-6, 1e-3, 0.1, 0.5, 0.99, 1.0, 1.01, 2.0, 5.0, 10.0, 30.0] {
        let e = expint_e1(t)?;
        let o = e1_quadrature_oracle(t);
        worst = worst.max((e - o).abs() / o);
    }
    out.push(CheckResult::new(
        "E1 = quadrature oracle",
        worst < 1e-10,
        format!("max rel diff {worst:.3e}"),
    ));

    let n_symbols = if quick { 200_000 } else { 1_000_000 };
    for (mode, n) in [(LinkMode::Dl, 16), (LinkMode::Ul, 1)] {
        let cfg = ScenarioConfig::with_snr_db(mode, n, 20.0, 10.0, 10.0)?;
        let draw = sample_channel_draw(&cfg, seed, 0);
        let r = draw.realization::<f64>();
        let mut worst = 0.0_f64;
        for lambda in [0.2, 0.5, 0.8] {
            let e = empirical_sndr(&draw, &tenth, lambda, n_symbols, seed)?;
            let a = sndr_pair(&r, &c, lambda)?;
            worst = worst
                .max((e.gamma_r - a.gamma_r).abs() / a.gamma_r)
                .max((e.gamma_d - a.gamma_d).abs() / a.gamma_d);
        }
        out.push(CheckResult::new(
            format!("empirical sndr = analytic ({mode}, N={n})"),
            worst < 0.02,
            format!("max rel diff {worst:.4}"),
        ));
    }

    let trials = if quick { 20_000 } else { 100_000 };
    let cfg = ScenarioConfig::with_snr_db(LinkMode::Dl, 16, 45.0, 10.0, 10.0)?;
    let mc = esr_monte_carlo(&cfg, &tenth, OpaMethod::Numeric, trials, seed)?;
    let closed = esr_closed(&c, LinkMode::Dl, cfg.mean_snr_single_hop())?;
    let diff = (mc.esr - closed.esr).abs();
    out.push(CheckResult::new(
        "monte-carlo esr = closed (dl, N=16, 45 dB)",
        diff < 0.05,
        format!("mc {:.4} closed {:.4} diff {diff:.4}", mc.esr, closed.esr),
    ));

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let cfg = ScenarioConfig::with_snr_db(LinkMode::Ul, 4, 30.0, 10.0, 10.0)?;
    let many = esr_monte_carlo(&cfg, &tenth, OpaMethod::Numeric, 5_000, seed)?;
    let one = pool.install(|| esr_monte_carlo(&cfg, &tenth, OpaMethod::Numeric, 5_000, seed))?;
    out.push(CheckResult::new(
        "monte-carlo bit-identical across thread counts",
        many.esr.to_bits() == one.esr.to_bits() && many.esr_raw.to_bits() == one.esr_raw.to_bits(),
        format!("{} vs {}", many.esr, one.esr),
    ));
    Ok(out)
}
