//! High-SNR secrecy ceiling and per-node EVM budgeting.
//!
//! A node with total budget `k_tot` splits it linearly between its transmit
//! and receive chains, `k_t + k_r = k_tot`. The source EVM is not a design
//! variable and is taken from the profile as given.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::{LinkMode, ScenarioConfig};
use crate::error::{Error, Result};
use crate::hw_profile::{DerivedConstants, EvmProfile};
use crate::link_math;
use crate::opa::OpaMethod;
use crate::scalar::{sq, Scalar};
use crate::secrecy_metrics::{asymptotic_form, esr_monte_carlo, EsrResult};

/// Tolerance on `k_t + k_r = k_tot` when validating a design.
pub const BUDGET_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignBudget<T> {
    pub k_r_tot: T,
    pub k_d_tot: T,
    pub mode: LinkMode,
}

impl<T: Scalar> DesignBudget<T> {
    pub fn new(k_r_tot: T, k_d_tot: T, mode: LinkMode) -> Result<Self> {
        for (name, v) in [("k_r_tot", k_r_tot), ("k_d_tot", k_d_tot)] {
            if !(v >= T::zero() && v.is_finite()) {
                return Err(Error::BudgetViolation(format!("{name} = {v} must be finite and >= 0")));
            }
        }
        Ok(Self { k_r_tot, k_d_tot, mode })
    }
}

/// Relay and destination chain EVMs `[k_R_t, k_R_r, k_D_t, k_D_r]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignVector<T> {
    pub k_r_t: T,
    pub k_r_r: T,
    pub k_d_t: T,
    pub k_d_r: T,
}

impl<T: Scalar> DesignVector<T> {
    pub fn new(k_r_t: T, k_r_r: T, k_d_t: T, k_d_r: T) -> Result<Self> {
        let v = Self {
            k_r_t,
            k_r_r,
            k_d_t,
            k_d_r,
        };
        v.to_profile(T::zero())?;
        Ok(v)
    }

    pub fn from_array(iv: [T; 4]) -> Result<Self> {
        Self::new(iv[0], iv[1], iv[2], iv[3])
    }

    pub fn to_array(&self) -> [T; 4] {
        [self.k_r_t, self.k_r_r, self.k_d_t, self.k_d_r]
    }

    pub fn from_profile(p: &EvmProfile<T>) -> Self {
        Self {
            k_r_t: p.k_r_t,
            k_r_r: p.k_r_r,
            k_d_t: p.k_d_t,
            k_d_r: p.k_d_r,
        }
    }

    pub fn to_profile(&self, k_s_t: T) -> Result<EvmProfile<T>> {
        EvmProfile::new(k_s_t, self.k_r_t, self.k_r_r, self.k_d_t, self.k_d_r)
    }

    /// Rejects designs whose per-node sums miss the budget.
    pub fn check_budget(&self, budget: &DesignBudget<T>) -> Result<()> {
        let tol = T::lit(BUDGET_TOLERANCE);
        let r = self.k_r_t + self.k_r_r;
        let d = self.k_d_t + self.k_d_r;
        if (r - budget.k_r_tot).abs() > tol {
            return Err(Error::BudgetViolation(format!(
                "relay chains sum to {r}, budget is {}",
                budget.k_r_tot
            )));
        }
        if (d - budget.k_d_tot).abs() > tol {
            return Err(Error::BudgetViolation(format!(
                "destination chains sum to {d}, budget is {}",
                budget.k_d_tot
            )));
        }
        Ok(())
    }
}

impl<T: Scalar> fmt::Display for DesignVector<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}, {}, {}]", self.k_r_t, self.k_r_r, self.k_d_t, self.k_d_r)
    }
}

/// The four reference designs at `k_R_tot = k_D_tot = 0.2`: random, relay
/// optimal, destination optimal, both optimal.
pub fn reference_designs<T: Scalar>(mode: LinkMode) -> Vec<(&'static str, DesignVector<T>)> {
    let v = |a: f64, b: f64, c: f64, d: f64| DesignVector {
        k_r_t: T::lit(a),
        k_r_r: T::lit(b),
        k_d_t: T::lit(c),
        k_d_r: T::lit(d),
    };
    let (dt, dr) = match mode {
        LinkMode::Dl => (0.13, 0.07),
        LinkMode::Ul => (0.2, 0.0),
    };
    vec![
        ("design-1", v(0.15, 0.05, 0.1, 0.1)),
        ("design-2", v(0.1, 0.1, 0.1, 0.1)),
        ("design-3", v(0.15, 0.05, dt, dr)),
        ("design-4", v(0.1, 0.1, dt, dr)),
    ]
}

/// Ceiling of `(1 + γ_D)/(1 + γ_R)` as every SNR grows; independent of the
/// fading statistics.
pub fn ceiling_phi<T: Scalar>(c: &DerivedConstants<T>, mode: LinkMode) -> Result<T> {
    let f = asymptotic_form(c, mode)?;
    Ok((T::one() + f.gamma_d_max()) / (T::one() + f.gamma_r))
}

/// `ln(φ∞) / (2 ln 2)` in bits/s/Hz.
pub fn ceiling_rate<T: Scalar>(c: &DerivedConstants<T>, mode: LinkMode) -> Result<T> {
    Ok(link_math::rate_from_phi(ceiling_phi(c, mode)?))
}

/// Half-half relay split.
pub fn relay_split_opt<T: Scalar>(budget: &DesignBudget<T>) -> (T, T) {
    let half = T::lit(0.5) * budget.k_r_tot;
    (half, half)
}

/// Destination split: the stationary point of [`compact_dest_gradient`] in
/// DL, all budget on the transmit chain in UL.
pub fn dest_split_opt<T: Scalar>(budget: &DesignBudget<T>, k_r_sq: T) -> (T, T) {
    let tot = budget.k_d_tot;
    if tot == T::zero() {
        return (T::zero(), T::zero());
    }
    match budget.mode {
        LinkMode::Ul => (tot, T::zero()),
        LinkMode::Dl => {
            let two = T::lit(2.0);
            let three = T::lit(3.0);
            let four = T::lit(4.0);
            let t2 = tot * tot;
            let radicand = four * k_r_sq * k_r_sq + T::lit(8.0) * k_r_sq * t2 + four * t2 * t2 + T::lit(12.0) * k_r_sq
                - four * t2
                + T::lit(9.0);
            let k_d_t = (two * k_r_sq + two * t2 + three - radicand.sqrt()) / (four * tot);
            debug_assert!(compact_dest_gradient(k_d_t, tot, k_r_sq).abs() < T::lit(1e-6));
            (k_d_t, tot - k_d_t)
        }
    }
}

/// Compact relay-transmit gradient of the ceiling under `k_R_t + k_R_r = k_R_tot`.
pub fn compact_relay_gradient<T: Scalar>(k_r_t: T, k_r_tot: T, k_d_t: T, k_d_r: T) -> T {
    let four = T::lit(4.0);
    let two = T::lit(2.0);
    let den =
        four * k_r_t * k_r_t - four * k_r_t * k_r_tot + two * k_r_tot * k_r_tot + two * k_d_r * k_d_r + k_d_t * k_d_t;
    four * (T::one() - k_d_r * k_d_r) * (k_r_tot - two * k_r_t) / (den * den)
}

/// Compact destination-transmit gradient of the DL ceiling under
/// `k_D_t + k_D_r = k_D_tot`.
pub fn compact_dest_gradient<T: Scalar>(k_d_t: T, k_d_tot: T, k_r_sq: T) -> T {
    let two = T::lit(2.0);
    let three = T::lit(3.0);
    let num = two * k_r_sq * k_d_t - two * k_d_t * k_d_t * k_d_tot + two * k_d_t * k_d_tot * k_d_tot + three * k_d_t
        - two * k_d_tot;
    let den = two * k_r_sq + three * k_d_t * k_d_t - T::lit(4.0) * k_d_t * k_d_tot + two * k_d_tot * k_d_tot;
    -two * num / (den * den)
}

/// Design variable of [`ceiling_gradient`]; its partner chain on the same
/// node absorbs the rest of the budget.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignVariable {
    RelayT,
    RelayR,
    DestT,
    DestR,
}

impl FromStr for DesignVariable {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "relay_t" => Ok(DesignVariable::RelayT),
            "relay_r" => Ok(DesignVariable::RelayR),
            "dest_t" => Ok(DesignVariable::DestT),
            "dest_r" => Ok(DesignVariable::DestR),
            other => Err(Error::InvalidConfig(format!("unknown design variable {other:?}"))),
        }
    }
}

/// Sensitivities of `(τ1, τ2, τ3, ξ1)` to one chain EVM, partner fixed.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct ConstantPartials<T> {
    tau1: T,
    tau2: T,
    tau3: T,
    xi1: T,
}

impl<T: Scalar> ConstantPartials<T> {
    fn minus(self, o: Self) -> Self {
        Self {
            tau1: self.tau1 - o.tau1,
            tau2: self.tau2 - o.tau2,
            tau3: self.tau3 - o.tau3,
            xi1: self.xi1 - o.xi1,
        }
    }
}

fn chain_partials<T: Scalar>(p: &EvmProfile<T>) -> [ConstantPartials<T>; 4] {
    let one = T::one();
    let two = T::lit(2.0);
    let (r_t, r_r, d_t, d_r) = (sq(p.k_r_t), sq(p.k_r_r), sq(p.k_d_t), sq(p.k_d_r));
    let t2_rt = two * p.k_r_t * (r_r + one);
    let t2_rr = two * p.k_r_r * (d_r + r_t + one);
    let t2_dr = two * p.k_d_r * (r_r + one);
    [
        ConstantPartials {
            tau1: T::zero(),
            tau2: t2_rt,
            tau3: t2_rt + two * p.k_r_t * d_t,
            xi1: T::zero(),
        },
        ConstantPartials {
            tau1: two * p.k_r_r,
            tau2: t2_rr,
            tau3: t2_rr,
            xi1: two * p.k_r_r,
        },
        ConstantPartials {
            tau1: two * p.k_d_t,
            tau2: T::zero(),
            tau3: two * p.k_d_t * (d_r + r_t + one),
            xi1: T::zero(),
        },
        ConstantPartials {
            tau1: T::zero(),
            tau2: t2_dr,
            tau3: t2_dr + two * p.k_d_r * d_t,
            xi1: T::zero(),
        },
    ]
}

/// `∂φ∞/∂(τ1, τ2, τ3, ξ1)` in DL, through `θ_L` and directly.
fn dl_ceiling_partials<T: Scalar>(c: &DerivedConstants<T>) -> Result<ConstantPartials<T>> {
    let theta = link_math::theta_dl(c)?;
    let (t1, t2, t3, x1) = (c.tau1, c.tau2, c.tau3, c.xi1);
    let one = T::one();
    let two = T::lit(2.0);

    let kappa1 = -t1 * t2 * (t2 + one) + t3 * x1 * (x1 - one);
    let kappa2 = -two * t1 * t3 * (t2 - x1 + one);
    let kappa3 = t1 * t3 * (t1 - t3);
    let relay = theta * x1 + t1;
    let dest = t2 * theta + t3;
    let d_phi_d_theta = (kappa1 * theta * theta + kappa2 * theta + kappa3) / (sq(relay) * sq(dest));

    let root = (t2 * t3 * (t1 - t3)).sqrt();
    let d_theta = ConstantPartials {
        tau1: t3 / (two * root),
        tau2: -(t3 * (t1 - t3)).sqrt() / (two * t2 * t2.sqrt()) - t3 * (x1 - one) / sq(t2),
        tau3: (t1 - two * t3) / (two * root) + (x1 - one) / t2 - one,
        xi1: t3 / t2,
    };
    let direct = ConstantPartials {
        tau1: theta * (t2 * theta + t3 + theta) / (sq(relay) * dest),
        tau2: -sq(theta) * (x1 * theta + t1 - theta) / (sq(dest) * relay),
        tau3: -theta * (x1 * theta + t1 - theta) / (sq(dest) * relay),
        xi1: sq(theta) * (t2 * theta + t3 + theta) / (sq(relay) * dest),
    };
    Ok(ConstantPartials {
        tau1: d_phi_d_theta * d_theta.tau1 + direct.tau1,
        tau2: d_phi_d_theta * d_theta.tau2 + direct.tau2,
        tau3: d_phi_d_theta * d_theta.tau3 + direct.tau3,
        xi1: d_phi_d_theta * d_theta.xi1 + direct.xi1,
    })
}

/// `∂φ∞/∂(τ2, ξ1)` in UL; the UL ceiling does not involve `τ1` or `τ3`.
fn ul_ceiling_partials<T: Scalar>(c: &DerivedConstants<T>) -> Result<ConstantPartials<T>> {
    if !c.has_impairments() {
        return Err(Error::AsymptoticUndefined);
    }
    let (t2, x1) = (c.tau2, c.xi1);
    let one = T::one();
    let two = T::lit(2.0);
    let s = (x1 * (one + t2)).sqrt();
    let sx = x1.sqrt() * (one + t2).sqrt();
    let common = sq(sx + one) * sq(x1 + sx);
    let d_tau2 = -x1 * ((two * (t2 + two) * x1 - t2 * t2) * s + two * x1 * (t2 * (x1 + one - t2) + x1 + one))
        / (two * t2 * t2 * common);
    let d_xi1 = (one + t2) * ((t2 + two * x1) * s + two * (one + t2) * x1) / (two * t2 * common);
    Ok(ConstantPartials {
        tau1: T::zero(),
        tau2: d_tau2,
        tau3: T::zero(),
        xi1: d_xi1,
    })
}

/// Derivative of `φ∞` with respect to `which`, its partner chain following
/// the budget. The profile must already satisfy the budget on that node.
pub fn ceiling_gradient<T: Scalar>(
    profile: &EvmProfile<T>,
    budget: &DesignBudget<T>,
    which: DesignVariable,
) -> Result<T> {
    let tol = T::lit(BUDGET_TOLERANCE);
    let (sum, tot) = match which {
        DesignVariable::RelayT | DesignVariable::RelayR => (profile.k_r_t + profile.k_r_r, budget.k_r_tot),
        DesignVariable::DestT | DesignVariable::DestR => (profile.k_d_t + profile.k_d_r, budget.k_d_tot),
    };
    if (sum - tot).abs() > tol {
        return Err(Error::BudgetViolation(format!("chains sum to {sum}, budget is {tot}")));
    }
    let c = profile.derive_constants();
    let phi = match budget.mode {
        LinkMode::Dl => dl_ceiling_partials(&c)?,
        LinkMode::Ul => ul_ceiling_partials(&c)?,
    };
    let [rt, rr, dt, dr] = chain_partials(profile);
    let k = match which {
        DesignVariable::RelayT => rt.minus(rr),
        DesignVariable::RelayR => rr.minus(rt),
        DesignVariable::DestT => dt.minus(dr),
        DesignVariable::DestR => dr.minus(dt),
    };
    Ok(phi.tau1 * k.tau1 + phi.tau2 * k.tau2 + phi.tau3 * k.tau3 + phi.xi1 * k.xi1)
}

/// One row of a design comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignRow<T> {
    pub label: String,
    pub design: DesignVector<T>,
    pub snr_db: T,
    pub ceiling_rate: T,
    pub esr: EsrResult<T>,
}

/// Monte-Carlo ESR of every design at every SNR. Designs that miss the
/// budget are rejected before any simulation runs.
#[allow(clippy::too_many_arguments)]
pub fn design_compare<T: Scalar>(
    budget: &DesignBudget<T>,
    template: &ScenarioConfig<T>,
    k_s_t: T,
    designs: &[(String, DesignVector<T>)],
    snr_db: &[T],
    method: OpaMethod,
    n_trials: u64,
    seed: u64,
) -> Result<Vec<DesignRow<T>>> {
    for (label, d) in designs {
        d.check_budget(budget).map_err(|e| match e {
            Error::BudgetViolation(m) => Error::BudgetViolation(format!("{label}: {m}")),
            other => other,
        })?;
    }
    let mut rows = Vec::with_capacity(designs.len() * snr_db.len());
    for (label, d) in designs {
        let profile = d.to_profile(k_s_t)?;
        let ceiling = ceiling_rate(&profile.derive_constants(), budget.mode)?;
        for &db in snr_db {
            let cfg =
                ScenarioConfig::with_snr_db(budget.mode, template.n_antennas, db, template.mu_sr, template.mu_rd)?;
            let esr = esr_monte_carlo(&cfg, &profile, method, n_trials, seed)?;
            rows.push(DesignRow {
                label: label.clone(),
                design: *d,
                snr_db: db,
                ceiling_rate: ceiling,
                esr,
            });
        }
    }
    Ok(rows)
}
