use std::fmt::Display;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use relaysec::experiments::{self, Metric, ProfileCase, ScenarioTemplate, SnrRange, SweepSpec};
use relaysec::hw_design::{self, DesignBudget, DesignVector};
use relaysec::opa::{self, OpaMethod};
use relaysec::secrecy_metrics::{simulate_rates, EvalPath};
use relaysec::{link_math, ChannelRealization, EvmProfile, LinkMode, ScenarioConfig};

#[derive(Parser)]
#[command(
    name = "relaysec",
    version,
    about = "Secrecy rate experiments for untrusted AF relaying with hardware impairments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ergodic secrecy rate sweep over transmit SNR.
    SweepEsr(SweepArgs),
    /// Secrecy outage probability sweep over transmit SNR.
    SweepSop(SweepArgs),
    /// Power allocation by every method.
    Opa(OpaArgs),
    /// Optimal EVM splits, ceilings and the reference design table.
    Design(DesignArgs),
    /// Cross-path identity checks; exits 1 if any fails.
    Validate(ValidateArgs),
}

#[derive(Args, Clone)]
struct ProfileArgs {
    /// Uniform EVM for every chain.
    #[arg(long, conflicts_with = "iv")]
    evm: Option<f64>,
    /// Design vector k_R_t,k_R_r,k_D_t,k_D_r.
    #[arg(long, value_delimiter = ',', value_parser = iv_component)]
    iv: Option<Vec<f64>>,
    /// Source EVM used with --iv.
    #[arg(long, default_value_t = 0.1)]
    k_s_t: f64,
}

fn iv_component(s: &str) -> Result<f64, String> {
    s.trim().parse::<f64>().map_err(|e| e.to_string())
}

fn check_iv(iv: &Option<Vec<f64>>) -> Result<(), Failure> {
    match iv {
        Some(v) if v.len() != 4 => Err(Failure::Usage(anyhow!("--iv takes 4 values, got {}", v.len()))),
        _ => Ok(()),
    }
}

impl ProfileArgs {
    fn case(&self) -> Option<ProfileCase> {
        match (&self.evm, &self.iv) {
            (Some(k), _) => Some(ProfileCase::uniform(*k)),
            (None, Some(iv)) => Some(ProfileCase::design(
                format!("iv={}", iv.iter().map(f64::to_string).collect::<Vec<_>>().join(";")),
                [iv[0], iv[1], iv[2], iv[3]],
                self.k_s_t,
            )),
            _ => None,
        }
    }

    fn profile_or(&self, default_k: f64) -> Result<EvmProfile<f64>, Failure> {
        check_iv(&self.iv)?;
        self.case()
            .unwrap_or_else(|| ProfileCase::uniform(default_k))
            .to_profile()
            .usage()
    }
}

#[derive(Args)]
struct SweepArgs {
    /// TOML sweep spec; without it the sweep is built from the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    mode: Option<LinkMode>,
    #[command(flatten)]
    profile: ProfileArgs,
    /// CSV destination; `-` for stdout. Defaults to the spec's output, else stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// SNR range start:stop:step in dB.
    #[arg(long)]
    snr: Option<String>,
    #[arg(long)]
    antennas: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<OpaMethod>>,
    #[arg(long, value_delimiter = ',')]
    paths: Option<Vec<String>>,
    /// Target secrecy rates for SOP sweeps.
    #[arg(long, value_delimiter = ',')]
    rates: Option<Vec<f64>>,
}

#[derive(Args)]
struct OpaArgs {
    #[arg(long, default_value = "dl")]
    mode: LinkMode,
    #[command(flatten)]
    profile: ProfileArgs,
    /// First-to-second hop SNR ratio of a single realization.
    #[arg(long)]
    nu: Option<f64>,
    /// With --nu: only the high-SNR allocation from the hardware constants.
    #[arg(long, requires = "nu")]
    high_snr: bool,
    /// Transmit SNR in dB.
    #[arg(long, default_value_t = 40.0)]
    snr_db: f64,
    #[arg(long, default_value_t = 16)]
    antennas: usize,
    /// Trials for the averaged report when --nu is absent.
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DesignArgs {
    #[arg(long, default_value_t = 0.2)]
    kr_tot: f64,
    #[arg(long, default_value_t = 0.2)]
    kd_tot: f64,
    #[arg(long, default_value = "dl")]
    mode: LinkMode,
    /// Source EVM, held fixed.
    #[arg(long, default_value_t = 0.1)]
    evm: f64,
    /// Extra design k_R_t,k_R_r,k_D_t,k_D_r to compare.
    #[arg(long, value_delimiter = ',', value_parser = iv_component)]
    iv: Option<Vec<f64>>,
    /// Transmit SNR in dB for the ESR column.
    #[arg(long, default_value_t = 40.0)]
    snr_db: f64,
    #[arg(long, default_value_t = 16)]
    antennas: usize,
    #[arg(long, default_value_t = 20_000)]
    trials: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Smaller simulations.
    #[arg(long)]
    quick: bool,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

trait ResultExt<T> {
    fn usage(self) -> Result<T, Failure>;
    fn runtime(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> ResultExt<T> for Result<T, E> {
    fn usage(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Usage(e.into()))
    }
    fn runtime(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Runtime(e.into()))
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::SweepEsr(a) => cmd_sweep(a, Metric::Esr),
        Command::SweepSop(a) => cmd_sweep(a, Metric::Sop),
        Command::Opa(a) => cmd_opa(a),
        Command::Design(a) => cmd_design(a),
        Command::Validate(a) => cmd_validate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn open_out(out: Option<&PathBuf>) -> Result<Box<dyn Write>, Failure> {
    match out {
        Some(p) if p.as_os_str() != "-" => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)
                    .with_context(|| format!("creating {}", dir.display()))
                    .runtime()?;
            }
            let f = std::fs::File::create(p)
                .with_context(|| format!("creating {}", p.display()))
                .runtime()?;
            Ok(Box::new(io::BufWriter::new(f)))
        }
        _ => Ok(Box::new(io::stdout().lock())),
    }
}

fn write_line(w: &mut dyn Write, fields: &[&dyn Display]) -> Result<(), Failure> {
    let line = fields.iter().map(|f| f.to_string()).collect::<Vec<_>>().join(",");
    writeln!(w, "{line}").runtime()
}

fn parse_snr(s: &str) -> anyhow::Result<SnrRange> {
    let parts = s.split(':').map(str::parse::<f64>).collect::<Result<Vec<_>, _>>()?;
    match parts.as_slice() {
        [x] => Ok(SnrRange {
            start: *x,
            stop: *x,
            step: 1.0,
        }),
        [a, b, c] => Ok(SnrRange {
            start: *a,
            stop: *b,
            step: *c,
        }),
        _ => Err(anyhow!("expected START:STOP:STEP or a single value, got {s:?}")),
    }
}

fn parse_path(s: &str) -> anyhow::Result<EvalPath> {
    match s {
        "closed" => Ok(EvalPath::Closed),
        "integral" => Ok(EvalPath::Integral),
        "monte_carlo" | "mc" => Ok(EvalPath::MonteCarlo),
        _ => Err(anyhow!("unknown path {s:?}")),
    }
}

fn cmd_sweep(a: SweepArgs, metric: Metric) -> Result<(), Failure> {
    let mut spec = match &a.config {
        Some(p) => SweepSpec::from_path(p)
            .with_context(|| format!("loading {}", p.display()))
            .usage()?,
        None => SweepSpec {
            metric,
            scenario: ScenarioTemplate {
                modes: vec![LinkMode::Dl],
                n_antennas: 16,
                mu_sr: 10.0,
                mu_rd: 10.0,
            },
            snr_db: SnrRange {
                start: 0.0,
                stop: 50.0,
                step: 5.0,
            },
            profiles: vec![ProfileCase::uniform(0.1)],
            methods: vec![OpaMethod::Numeric],
            paths: vec![EvalPath::MonteCarlo, EvalPath::Closed],
            target_rates: if metric == Metric::Sop {
                vec![0.25, 1.0, 2.0]
            } else {
                vec![]
            },
            n_trials: None,
            seed: 1,
            output: None,
        },
    };
    if spec.metric != metric {
        return Err(Failure::Usage(anyhow!(
            "config metric {:?} does not match the subcommand",
            spec.metric
        )));
    }
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    if let Some(t) = a.trials {
        spec.n_trials = Some(t);
    }
    if let Some(m) = a.mode {
        spec.scenario.modes = vec![m];
    }
    check_iv(&a.profile.iv)?;
    if let Some(case) = a.profile.case() {
        spec.profiles = vec![case];
    }
    if let Some(s) = &a.snr {
        spec.snr_db = parse_snr(s).usage()?;
    }
    if let Some(n) = a.antennas {
        spec.scenario.n_antennas = n;
    }
    if let Some(m) = a.methods {
        spec.methods = m;
    }
    if let Some(p) = &a.paths {
        spec.paths = p.iter().map(|s| parse_path(s)).collect::<anyhow::Result<_>>().usage()?;
    }
    if let Some(r) = a.rates {
        spec.target_rates = r;
    }
    spec.validate().usage()?;

    let rows = experiments::run_sweep(&spec).runtime()?;
    let out = a.out.or(spec.output.clone());
    let w = open_out(out.as_ref())?;
    experiments::write_csv(&rows, w).runtime()
}

fn cmd_opa(a: OpaArgs) -> Result<(), Failure> {
    let profile = a.profile.profile_or(0.1)?;
    let c = profile.derive_constants();
    let mut w = open_out(a.out.as_ref())?;
    match a.nu {
        Some(nu) if a.high_snr => {
            let lambda = opa::high_snr_lambda(&c, a.mode, nu).usage()?;
            write_line(&mut *w, &[&"mode", &"nu", &"method", &"lambda_star"])?;
            write_line(&mut *w, &[&a.mode, &nu, &OpaMethod::HighSnr, &lambda])?;
        }
        Some(nu) => {
            if !(nu > 0.0 && nu.is_finite()) {
                return Err(Failure::Usage(anyhow!("--nu must be finite and > 0")));
            }
            let cfg = ScenarioConfig::with_snr_db(a.mode, a.antennas, a.snr_db, 10.0, 10.0).usage()?;
            let gamma_rd = cfg.mean_snr_rd();
            let r = ChannelRealization::typical(a.mode, nu * gamma_rd, gamma_rd, a.antennas);
            write_line(
                &mut *w,
                &[&"mode", &"nu", &"method", &"lambda_star", &"phi", &"rate", &"warning"],
            )?;
            for m in OpaMethod::ALL {
                let res = opa::allocate(m, &r, &c, a.mode).runtime()?;
                let o = link_math::secrecy_outcome(&r, &c, res.lambda_star).runtime()?;
                let warn = res
                    .warning
                    .map(|x| format!("{x:?}").replace(',', ";"))
                    .unwrap_or_default();
                write_line(&mut *w, &[&a.mode, &nu, &m, &res.lambda_star, &o.phi, &o.rate, &warn])?;
            }
        }
        None => {
            let cfg = ScenarioConfig::with_snr_db(a.mode, a.antennas, a.snr_db, 10.0, 10.0).usage()?;
            if a.trials == 0 {
                return Err(Failure::Usage(anyhow!("--trials must be >= 1")));
            }
            write_line(
                &mut *w,
                &[
                    &"mode",
                    &"snr_db",
                    &"method",
                    &"lambda_star_mean",
                    &"esr",
                    &"ci_halfwidth",
                ],
            )?;
            for m in OpaMethod::ALL {
                let run = simulate_rates(&cfg, &profile, m, a.trials, a.seed).runtime()?;
                let e = run.esr();
                write_line(
                    &mut *w,
                    &[
                        &a.mode,
                        &a.snr_db,
                        &m,
                        &run.lambda_mean(),
                        &e.esr,
                        &e.ci_halfwidth.unwrap_or(f64::NAN),
                    ],
                )?;
            }
        }
    }
    w.flush().runtime()
}

fn cmd_design(a: DesignArgs) -> Result<(), Failure> {
    check_iv(&a.iv)?;
    let budget = DesignBudget::new(a.kr_tot, a.kd_tot, a.mode).usage()?;
    let template = ScenarioConfig::with_snr_db(a.mode, a.antennas, a.snr_db, 10.0, 10.0).usage()?;
    let (rt, rr) = hw_design::relay_split_opt(&budget);
    let (dt, dr) = hw_design::dest_split_opt(&budget, rt * rt + rr * rr);
    let optimal = DesignVector::new(rt, rr, dt, dr).runtime()?;

    let mut designs = vec![("optimal".to_string(), optimal)];
    for (label, d) in hw_design::reference_designs::<f64>(a.mode) {
        if d.check_budget(&budget).is_ok() {
            designs.push((label.to_string(), d));
        } else {
            log::warn!("{label} does not meet the budget; left out");
        }
    }
    if let Some(iv) = &a.iv {
        let d = DesignVector::new(iv[0], iv[1], iv[2], iv[3]).usage()?;
        designs.push(("custom".to_string(), d));
    }
    let rows = hw_design::design_compare(
        &budget,
        &template,
        a.evm,
        &designs,
        &[a.snr_db],
        OpaMethod::Numeric,
        a.trials,
        a.seed,
    )
    .map_err(|e| match e {
        relaysec::Error::BudgetViolation(_) | relaysec::Error::Domain { .. } => Failure::Usage(e.into()),
        other => Failure::Runtime(other.into()),
    })?;

    let mut w = open_out(a.out.as_ref())?;
    write_line(
        &mut *w,
        &[
            &"label",
            &"mode",
            &"k_r_t",
            &"k_r_r",
            &"k_d_t",
            &"k_d_r",
            &"ceiling_rate",
            &"snr_db",
            &"esr",
            &"ci_halfwidth",
        ],
    )?;
    for r in rows {
        let d = r.design;
        write_line(
            &mut *w,
            &[
                &r.label,
                &a.mode,
                &d.k_r_t,
                &d.k_r_r,
                &d.k_d_t,
                &d.k_d_r,
                &r.ceiling_rate,
                &r.snr_db,
                &r.esr.esr,
                &r.esr.ci_halfwidth.unwrap_or(f64::NAN),
            ],
        )?;
    }
    w.flush().runtime()
}

fn cmd_validate(a: ValidateArgs) -> Result<(), Failure> {
    let checks = experiments::validation_suite(a.quick, a.seed).runtime()?;
    let mut w = open_out(a.out.as_ref())?;
    write_line(&mut *w, &[&"check", &"passed", &"detail"])?;
    for c in &checks {
        write_line(
            &mut *w,
            &[&c.name.replace(',', ";"), &c.passed, &c.detail.replace(',', ";")],
        )?;
    }
    w.flush().runtime()?;
    let failed: Vec<_> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Runtime(anyhow!("failed checks: {}", failed.join("; "))))
    }
}
