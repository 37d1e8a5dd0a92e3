//! Exponential integral and adaptive Gauss–Kronrod quadrature.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::scalar::Scalar;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Series / continued-fraction crossover for `E1`.
pub const E1_CROSSOVER: f64 = 1.0;

/// `E1(t)` by its power series, accurate for small and moderate `t`.
pub fn e1_series<T: Scalar>(t: T) -> T {
    let eps = T::epsilon();
    let mut sum = T::zero();
    let mut term = T::one();
    let mut k = T::one();
    for _ in 0..200 {
        term = term * (-t) / k;
        let add = term / k;
        sum = sum + add;
        if add.abs() <= eps * sum.abs() {
            break;
        }
        k = k + T::one();
    }
    -T::lit(EULER_GAMMA) - t.ln() - sum
}

/// `e^t E1(t)` by the modified Lentz continued fraction; converges for `t`
/// above roughly 0.3 and is the stable branch for large `t`.
pub fn exp_e1_continued_fraction<T: Scalar>(t: T) -> T {
    let tiny = T::min_positive_value() / T::epsilon();
    let eps = T::epsilon();
    let two = T::lit(2.0);
    let mut b = t + T::one();
    let mut c = T::one() / tiny;
    let mut d = T::one() / b;
    let mut h = d;
    for i in 1..10_000 {
        let i = T::lit(i as f64);
        let an = -i * i;
        b = b + two;
        d = T::one() / (an * d + b);
        c = b + an / c;
        let del = c * d;
        h = h * del;
        if (del - T::one()).abs() <= eps {
            break;
        }
    }
    h
}

/// Exponential integral `E1(t)` for `t > 0`.
pub fn expint_e1<T: Scalar>(t: T) -> Result<T> {
    if !(t > T::zero()) {
        return Err(domain("expint_e1", format!("t = {t} must be > 0")));
    }
    if t <= T::lit(E1_CROSSOVER) {
        Ok(e1_series(t))
    } else {
        Ok(exp_e1_continued_fraction(t) * (-t).exp())
    }
}

/// `Ei(x)` for `x < 0`, via `Ei(-t) = -E1(t)`.
pub fn expint_ei<T: Scalar>(x: T) -> Result<T> {
    if !(x < T::zero()) {
        return Err(domain("expint_ei", format!("x = {x} must be < 0")));
    }
    Ok(-expint_e1(-x)?)
}

/// `e^t Ei(-t)` for `t > 0` without overflow.
pub fn exp_scaled_ei<T: Scalar>(t: T) -> Result<T> {
    if !(t > T::zero()) {
        return Err(domain("exp_scaled_ei", format!("t = {t} must be > 0")));
    }
    if t <= T::lit(E1_CROSSOVER) {
        Ok(-t.exp() * e1_series(t))
    } else {
        Ok(-exp_e1_continued_fraction(t))
    }
}

/// Tolerances and subdivision budget of [`integrate`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            abs_tol: 1e-13,
            rel_tol: 1e-12,
            max_subdivisions: 2000,
        }
    }
}

impl QuadratureSpec {
    pub fn new(abs_tol: f64, rel_tol: f64, max_subdivisions: usize) -> Result<Self> {
        if !(abs_tol > 0.0 && rel_tol > 0.0) || max_subdivisions == 0 {
            return Err(domain(
                "QuadratureSpec",
                format!("abs_tol = {abs_tol}, rel_tol = {rel_tol} must be > 0 and max_subdivisions >= 1"),
            ));
        }
        Ok(Self {
            abs_tol,
            rel_tol,
            max_subdivisions,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureResult<T> {
    pub value: T,
    pub abs_error: T,
    /// `false` when the subdivision budget ran out first; `value` is then
    /// the best available estimate.
    pub converged: bool,
    pub subdivisions: usize,
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn kronrod15<T: Scalar, F: Fn(T) -> T>(f: &F, a: T, b: T) -> (T, T) {
    let half = T::lit(0.5);
    let center = half * (a + b);
    let half_len = half * (b - a);
    let fc = f(center);
    let mut kron = fc * T::lit(WGK[7]);
    let mut gauss = fc * T::lit(WG[3]);
    for j in 0..7 {
        let dx = half_len * T::lit(XGK[j]);
        let pair = f(center - dx) + f(center + dx);
        kron = kron + pair * T::lit(WGK[j]);
        if j % 2 == 1 {
            gauss = gauss + pair * T::lit(WG[j / 2]);
        }
    }
    let value = kron * half_len;
    let err = ((kron - gauss) * half_len).abs();
    (value, err)
}

struct Segment<T> {
    a: T,
    b: T,
    value: T,
    err: T,
}

impl<T: Scalar> PartialEq for Segment<T> {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl<T: Scalar> Eq for Segment<T> {}
impl<T: Scalar> PartialOrd for Segment<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T: Scalar> Ord for Segment<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.partial_cmp(&other.err).unwrap_or(Ordering::Equal)
    }
}

/// Globally adaptive G7/K15 quadrature of `f` over `[a, b]`: the segment
/// with the largest error estimate is bisected until the total error meets
/// `max(abs_tol, rel_tol * |value|)`.
pub fn integrate<T: Scalar, F: Fn(T) -> T>(f: F, a: T, b: T, spec: &QuadratureSpec) -> QuadratureResult<T> {
    if a == b {
        return QuadratureResult {
            value: T::zero(),
            abs_error: T::zero(),
            converged: true,
            subdivisions: 0,
        };
    }
    let (value, err) = kronrod15(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value, err });
    let mut total = value;
    let mut total_err = err;
    let mut subdivisions = 0;
    let abs_tol = T::lit(spec.abs_tol);
    let rel_tol = T::lit(spec.rel_tol);
    loop {
        let target = abs_tol.max(rel_tol * total.abs());
        if total_err <= target {
            return QuadratureResult {
                value: total,
                abs_error: total_err,
                converged: true,
                subdivisions,
            };
        }
        if subdivisions >= spec.max_subdivisions {
            log::warn!("quadrature stopped after {subdivisions} subdivisions with error {total_err}");
            return QuadratureResult {
                value: total,
                abs_error: total_err,
                converged: false,
                subdivisions,
            };
        }
        let Some(worst) = heap.pop() else { unreachable!() };
        let mid = T::lit(0.5) * (worst.a + worst.b);
        let (v1, e1) = kronrod15(&f, worst.a, mid);
        let (v2, e2) = kronrod15(&f, mid, worst.b);
        total = total - worst.value + v1 + v2;
        total_err = total_err - worst.err + e1 + e2;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: v1,
            err: e1,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: v2,
            err: e2,
        });
        subdivisions += 1;
        if subdivisions % 64 == 0 {
            // Refresh the running sums to shed accumulated cancellation.
            total = heap.iter().fold(T::zero(), |s, seg| s + seg.value);
            total_err = heap.iter().fold(T::zero(), |s, seg| s + seg.err);
        }
    }
}
