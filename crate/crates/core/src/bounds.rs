//! Standard normal distribution functions and the closed-form sides of the
//! moderate-deviation lower bounds.
//!
//! Every probability that can be astronomically small is also available in
//! log form: at moderate-deviation scales `Φ(-15) ≈ 3.7e-51` and beyond, so
//! comparisons are done on logarithms wherever possible.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::RareEventEstimate;
use crate::scalar::Real;

/// Low-order part of √2 beyond the f64 constant.
const SQRT_2_LO_F64: f64 = -9.667_293_313_452_913e-17;

/// Below this point `ln Φ` switches from the erfc route to the asymptotic
/// series, before `Φ` itself underflows.
const LOG_CDF_SERIES_CUTOFF: f64 = -37.0;

/// Standard normal density.
#[inline]
pub fn normal_pdf<T: Real>(x: T) -> T {
    (-(x * x) / T::lit(2.0)).exp() / (T::TAU()).sqrt()
}

/// `ln φ(x)`.
#[inline]
pub fn log_normal_pdf<T: Real>(x: T) -> T {
    -(x * x) / T::lit(2.0) - T::lit(0.5) * T::TAU().ln()
}

/// Standard normal CDF `Φ(x)` via the complementary error function.
///
/// The argument `-x/√2` is rounded once; its rounding error is folded back
/// in to first order, which keeps the relative error near 1e-15 deep into
/// the lower tail where `erfc` amplifies argument errors by `2y²`.
pub fn normal_cdf<T: Real>(x: T) -> T {
    if x.is_nan() {
        return x;
    }
    let half = T::lit(0.5);
    if x >= T::zero() {
        return T::one() - half * upper_erfc(x);
    }
    half * upper_erfc(-x)
}

/// `erfc(z/√2)` for `z >= 0`, with the √2 rounding correction.
fn upper_erfc<T: Real>(z: T) -> T {
    let y = z * T::FRAC_1_SQRT_2();
    let e = y.erfc();
    if e == T::zero() || y < T::one() {
        return e;
    }
    let hi = T::SQRT_2();
    let lo = T::lit((std::f64::consts::SQRT_2 - hi.to_f64_lossy()) + SQRT_2_LO_F64);
    // residual of z - y·√2, evaluated with a fused multiply-add
    let r = (-y).mul_add(hi, z) - y * lo;
    let dy = r * T::FRAC_1_SQRT_2();
    e * (-(T::lit(2.0) * y * dy)).exp()
}

/// Upper tail `1 - Φ(x) = Φ(-x)`, accurate for large positive `x`.
pub fn normal_sf<T: Real>(x: T) -> T {
    normal_cdf(-x)
}

/// `ln Φ(x)` for all finite `x`.
pub fn log_normal_cdf<T: Real>(x: T) -> T {
    if x.is_nan() {
        return x;
    }
    if x > T::zero() {
        return (-normal_cdf(-x)).ln_1p();
    }
    if x >= T::lit(LOG_CDF_SERIES_CUTOFF) {
        return normal_cdf(x).ln();
    }
    // Φ(x) = φ(x)/|x| · (1 - 1/x² + 3/x⁴ - 15/x⁶ + ...)
    let inv2 = (x * x).recip();
    let mut term = T::one();
    let mut series = T::one();
    for k in 1..8 {
        term = -term * T::lit((2 * k - 1) as f64) * inv2;
        series += term;
    }
    log_normal_pdf(x) - (-x).ln() + series.ln()
}

/// `ln(1 - Φ(x))`.
pub fn log_normal_sf<T: Real>(x: T) -> T {
    log_normal_cdf(-x)
}

/// Acklam's rational approximation to `Φ⁻¹(p)`; relative error about 1e-9.
///
/// Used to turn uniforms into normal variates where a few ulps of
/// distributional accuracy do not matter; [`normal_quantile`] refines it.
#[inline]
pub fn normal_quantile_fast<T: Real>(p: T) -> T {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] =
        [7.784_695_709_041_462e-3, 3.224_671_290_700_398e-1, 2.445_134_137_142_996, 3.754_408_661_907_416];
    let l = T::lit;
    let p_low = l(0.02425);
    let tail = |q: T| {
        (((((l(C[0]) * q + l(C[1])) * q + l(C[2])) * q + l(C[3])) * q + l(C[4])) * q + l(C[5]))
            / ((((l(D[0]) * q + l(D[1])) * q + l(D[2])) * q + l(D[3])) * q + T::one())
    };
    if p < p_low {
        tail((l(-2.0) * p.ln()).sqrt())
    } else if p <= T::one() - p_low {
        let q = p - l(0.5);
        let r = q * q;
        (((((l(A[0]) * r + l(A[1])) * r + l(A[2])) * r + l(A[3])) * r + l(A[4])) * r + l(A[5])) * q
            / (((((l(B[0]) * r + l(B[1])) * r + l(B[2])) * r + l(B[3])) * r + l(B[4])) * r + T::one())
    } else {
        -tail((l(-2.0) * (T::one() - p).ln()).sqrt())
    }
}

/// `Φ⁻¹(p)`, refined by Newton steps on `ln Φ` until it is exact to
/// working precision. `x_p < 0` for `p < 1/2`.
pub fn normal_quantile<T: Real>(p: T) -> Result<T> {
    if !(p > T::zero() && p < T::one()) {
        return Err(Error::domain(format!("quantile level {p} outside (0, 1)")));
    }
    let half = T::lit(0.5);
    if p == half {
        return Ok(T::zero());
    }
    if p > half {
        return Ok(-lower_quantile_from_log((T::one() - p).ln(), normal_quantile_fast(T::one() - p)));
    }
    Ok(lower_quantile_from_log(p.ln(), normal_quantile_fast(p)))
}

/// Solves `ln Φ(x) = log_p` for `log_p < 0`; handles levels far below the
/// smallest representable double.
pub fn normal_quantile_from_log<T: Real>(log_p: T) -> Result<T> {
    if !(log_p < T::zero()) {
        return Err(Error::domain(format!("log level {log_p} must be negative")));
    }
    let half_ln = T::lit(0.5).ln();
    if log_p > half_ln {
        // upper half: x = -Φ⁻¹(1 - p)
        let q = -log_p.exp_m1();
        return Ok(-lower_quantile_from_log(q.ln(), normal_quantile_fast(q)));
    }
    // leading-order tail inversion as a starting point
    let start = if log_p > T::lit(-700.0) { normal_quantile_fast(log_p.exp()) } else { -(T::lit(-2.0) * log_p).sqrt() };
    Ok(lower_quantile_from_log(log_p, start))
}

fn lower_quantile_from_log<T: Real>(log_p: T, start: T) -> T {
    let mut x = start;
    for _ in 0..50 {
        let lc = log_normal_cdf(x);
        // d/dx ln Φ = φ/Φ
        let slope = (log_normal_pdf(x) - lc).exp();
        let step = (lc - log_p) / slope;
        x -= step;
        if step.abs() <= T::lit(4.0) * T::epsilon() * x.abs().max(T::one()) {
            break;
        }
    }
    x
}

/// `P(|ζ|² > r²)` for `ζ ~ N(0, I_d)`: the chi-square survival function at
/// `r²` with `d` degrees of freedom, in closed form.
pub fn chi_square_tail<T: Real>(dim: usize, r: T) -> T {
    if dim == 0 {
        return T::zero();
    }
    if r <= T::zero() {
        return T::one();
    }
    let y = r * r / T::lit(2.0);
    if dim.is_multiple_of(2) {
        // e^{-y} Σ_{k<d/2} y^k / k!
        let mut term = T::one();
        let mut sum = T::one();
        for k in 1..dim / 2 {
            term = term * y / T::lit(k as f64);
            sum += term;
        }
        (-y).exp() * sum
    } else {
        // 2Φ(-r) + e^{-y} Σ_{k=1}^{m} y^{k-1/2}/Γ(k+1/2)
        let m = (dim - 1) / 2;
        let mut sum = T::zero();
        // y^{1/2}/Γ(3/2)
        let mut term = y.sqrt() / (T::PI().sqrt() / T::lit(2.0));
        for k in 1..=m {
            sum += term;
            term = term * y / T::lit(k as f64 + 0.5);
        }
        T::lit(2.0) * normal_cdf(-r) + (-y).exp() * sum
    }
}

/// Which lower bound a report compares against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Theorem {
    /// Logarithmic asymptotics of type I + type II errors.
    T1,
    /// Logarithmic asymptotics of estimator miss probabilities.
    T2,
    /// Sharp asymptotics of the type II error at a given level.
    T3,
    /// Sharp asymptotics of the estimator miss probability.
    T4,
    /// Sharp asymptotics of confidence-set miss probability, d >= 1.
    T5,
}

impl Theorem {
    pub const ALL: [Theorem; 5] = [Theorem::T1, Theorem::T2, Theorem::T3, Theorem::T4, Theorem::T5];
}

impl fmt::Display for Theorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Theorem::T1 => "T1",
            Theorem::T2 => "T2",
            Theorem::T3 => "T3",
            Theorem::T4 => "T4",
            Theorem::T5 => "T5",
        };
        f.write_str(s)
    }
}

impl FromStr for Theorem {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "T1" | "1" => Ok(Theorem::T1),
            "T2" | "2" => Ok(Theorem::T2),
            "T3" | "3" => Ok(Theorem::T3),
            "T4" | "4" => Ok(Theorem::T4),
            "T5" | "5" => Ok(Theorem::T5),
            _ => Err(Error::Unknown { kind: "theorem", name: s.to_string() }),
        }
    }
}

/// Side-by-side empirical and theoretical quantities for one `(theorem, ε)`
/// cell of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport<T> {
    pub theorem: Theorem,
    pub epsilon: T,
    pub u_eps: T,
    /// Standardized separation `ε⁻¹ u_ε √I`.
    pub x: T,
    pub alpha_target: Option<T>,
    /// Named empirical quantities; the first two populate the CSV columns.
    pub empirical: Vec<(String, T)>,
    /// Named theoretical quantities; the first two populate the CSV columns.
    pub theoretical: Vec<(String, T)>,
    pub ratio_or_gap: Option<T>,
    pub se_combined: Option<T>,
    pub meets_bound: bool,
    /// Diagnostics such as low effective sample size.
    pub warnings: Vec<String>,
    /// Some estimate had no hits or fewer than ten effective samples.
    pub hard_failure: bool,
}

impl<T: Real> BoundReport<T> {
    pub fn empirical_value(&self, name: &str) -> Option<T> {
        self.empirical.iter().find(|(k, _)| k == name).map(|&(_, v)| v)
    }

    pub fn theoretical_value(&self, name: &str) -> Option<T> {
        self.theoretical.iter().find(|(k, _)| k == name).map(|&(_, v)| v)
    }
}

/// Standardized separation `ε⁻¹ u_ε √I`.
#[inline]
pub fn separation<T: Real>(epsilon: T, u_eps: T, info: T) -> T {
    u_eps * info.sqrt() / epsilon
}

/// `(√(2|ln α|) + √(2|ln β|)) / (ε⁻¹ u_ε √I)`.
pub fn theorem1_log_ratio<T: Real>(alpha: T, beta: T, epsilon: T, u_eps: T, info: T) -> Result<T> {
    for (name, v) in [("alpha", alpha), ("beta", beta)] {
        if !(v > T::zero() && v < T::one()) {
            return Err(Error::domain(format!("{name} = {v} outside (0, 1); use the log form")));
        }
    }
    theorem1_log_ratio_from_logs(alpha.ln(), beta.ln(), epsilon, u_eps, info)
}

/// [`theorem1_log_ratio`] on log-probabilities.
pub fn theorem1_log_ratio_from_logs<T: Real>(ln_alpha: T, ln_beta: T, epsilon: T, u_eps: T, info: T) -> Result<T> {
    check_positive(&[("epsilon", epsilon), ("u_eps", u_eps), ("information", info)])?;
    if !(ln_alpha <= T::zero() && ln_beta <= T::zero()) {
        return Err(Error::domain("log-probabilities must be non-positive"));
    }
    let two = T::lit(2.0);
    let num = (two * ln_alpha.abs()).sqrt() + (two * ln_beta.abs()).sqrt();
    Ok(num / separation(epsilon, u_eps, info))
}

/// `ε² u_ε⁻² I⁻¹ ln P`; the bound says its supremum over the two test
/// points tends to at least `-1/2`.
pub fn theorem2_scaled_log<T: Real>(miss_log: T, epsilon: T, u_eps: T, info: T) -> Result<T> {
    check_positive(&[("epsilon", epsilon), ("u_eps", u_eps), ("information", info)])?;
    if !(miss_log <= T::zero()) {
        return Err(Error::domain(format!("log miss probability {miss_log} must be <= 0")));
    }
    Ok(epsilon * epsilon / (u_eps * u_eps * info) * miss_log)
}

/// `Φ(x_α - ε⁻¹ u_ε √I)` with `α = Φ(x_α)`.
pub fn theorem3_sharp_beta<T: Real>(alpha: T, epsilon: T, u_eps: T, info: T) -> Result<T> {
    theorem3_sharp_log_beta(alpha, epsilon, u_eps, info).map(T::exp)
}

/// Natural log of [`theorem3_sharp_beta`].
pub fn theorem3_sharp_log_beta<T: Real>(alpha: T, epsilon: T, u_eps: T, info: T) -> Result<T> {
    check_positive(&[("epsilon", epsilon), ("information", info)])?;
    if u_eps < T::zero() {
        return Err(Error::domain("u_eps must be >= 0"));
    }
    let x_alpha = normal_quantile(alpha)?;
    Ok(log_normal_cdf(x_alpha - separation(epsilon, u_eps, info)))
}

/// Exact type II error of the level-`α` Neyman-Pearson test between two
/// Gaussian shifts `shift` standard deviations apart: `Φ(-x_α - shift)`.
pub fn neyman_pearson_beta<T: Real>(alpha: T, shift: T) -> Result<T> {
    let x_alpha = normal_quantile(alpha)?;
    Ok(normal_cdf(-x_alpha - shift))
}

/// `2Φ(-ε⁻¹ √I u_ε)`.
pub fn theorem4_denominator<T: Real>(epsilon: T, u_eps: T, info: T) -> Result<T> {
    theorem4_log_denominator(epsilon, u_eps, info).map(T::exp)
}

/// Natural log of [`theorem4_denominator`].
pub fn theorem4_log_denominator<T: Real>(epsilon: T, u_eps: T, info: T) -> Result<T> {
    check_positive(&[("epsilon", epsilon), ("information", info)])?;
    if u_eps < T::zero() {
        return Err(Error::domain("u_eps must be >= 0"));
    }
    Ok(T::lit(2.0).ln() + log_normal_cdf(-separation(epsilon, u_eps, info)))
}

/// Miss probability over the Gaussian exceedance `P(ζ ∉ rΩ)`.
pub fn theorem5_ratio<T: Real>(miss_prob: T, exceed: &RareEventEstimate<T>) -> Result<T> {
    let floor = T::lit(10.0) * T::epsilon();
    if !(exceed.p_hat > floor) {
        return Err(Error::domain(format!("exceedance estimate {} too small to divide by", exceed.p_hat)));
    }
    Ok(miss_prob / exceed.p_hat)
}

fn check_positive<T: Real>(items: &[(&str, T)]) -> Result<()> {
    for &(name, v) in items {
        if !(v > T::zero()) {
            return Err(Error::domain(format!("{name} = {v} must be positive")));
        }
    }
    Ok(())
}
