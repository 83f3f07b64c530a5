//! Fading-gain distributions: Erlang sums of exponential gains, sums of two
//! Erlang variables with different rates, and products of shifted exponentials.

use rand::Rng;

use crate::error::{domain, Result};
use crate::specfun::{ln_gamma, mellin_barnes_cdf, regularized_lower_gamma, ContourSpec, MellinFactor};

/// Relative rate gap below which two Erlang variables are treated as sharing
/// one rate.
pub const EQUAL_RATE_THRESHOLD: f64 = 1e-6;

/// Largest tolerated `eps · Σ|wᵢⱼ|` for the partial-fraction form before the
/// negative-binomial mixture is used instead.
const CANCELLATION_LIMIT: f64 = 1e-13;

/// Erlang(k, μ): the sum of `k` independent Exp(μ) variables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErlangSpec {
    pub shape: u32,
    pub rate: f64,
}

impl ErlangSpec {
    pub fn new(shape: u32, rate: f64) -> Result<Self> {
        if shape == 0 {
            return Err(domain("Erlang shape must be at least 1"));
        }
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(domain(format!("Erlang rate must be positive and finite, got {rate}")));
        }
        Ok(ErlangSpec { shape, rate })
    }

    pub fn mean(&self) -> f64 {
        self.shape as f64 / self.rate
    }

    pub fn std_dev(&self) -> f64 {
        (self.shape as f64).sqrt() / self.rate
    }
}

/// `count` i.i.d. copies of `shift + Exp(rate)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftedExpGroup {
    pub count: u32,
    pub rate: f64,
    pub shift: f64,
}

/// Product over one or two groups of shifted exponential variables.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftedExpProductSpec {
    groups: Vec<ShiftedExpGroup>,
}

impl ShiftedExpProductSpec {
    pub fn new(groups: Vec<ShiftedExpGroup>) -> Result<Self> {
        if groups.is_empty() || groups.len() > 2 {
            return Err(domain(format!("expected one or two groups, got {}", groups.len())));
        }
        for g in &groups {
            if g.count == 0 {
                return Err(domain("group count must be at least 1"));
            }
            if !(g.rate > 0.0) || !g.rate.is_finite() {
                return Err(domain(format!("group rate must be positive, got {}", g.rate)));
            }
            if !(g.shift >= 0.0) || !g.shift.is_finite() {
                return Err(domain(format!("group shift must be nonnegative, got {}", g.shift)));
            }
        }
        Ok(ShiftedExpProductSpec { groups })
    }

    pub fn single(count: u32, rate: f64, shift: f64) -> Result<Self> {
        Self::new(vec![ShiftedExpGroup { count, rate, shift }])
    }

    pub fn groups(&self) -> &[ShiftedExpGroup] {
        &self.groups
    }

    /// Smallest attainable product, ∏ shiftᵢ^{countᵢ}.
    pub fn support_min(&self) -> f64 {
        self.groups.iter().map(|g| g.shift.powi(g.count as i32)).product()
    }
}

/// P{Y ≤ t} for Y ~ Erlang(k, μ), i.e. γ(k, μt) / (k-1)!.
pub fn erlang_cdf(spec: ErlangSpec, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(domain(format!("Erlang CDF argument must be nonnegative, got {t}")));
    }
    regularized_lower_gamma(spec.shape as f64, spec.rate * t)
}

/// P{Y₁ + Y₂ ≤ t} for independent Erlang variables.
///
/// Three regimes:
/// * rates equal within [`EQUAL_RATE_THRESHOLD`]: a single Erlang(k₁+k₂);
/// * well separated rates: the partial-fraction expansion
///   `Σᵢ Σⱼ wᵢⱼ P(j, μᵢ t)`;
/// * close rates, where the expansion's alternating weights would cancel:
///   the slower variable is rewritten as a negative-binomial number of
///   exponentials at the faster rate, giving a positive mixture of Erlang CDFs.
pub fn two_erlang_sum_cdf(a: ErlangSpec, b: ErlangSpec, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(domain(format!("CDF argument must be nonnegative, got {t}")));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let gap = (a.rate - b.rate).abs() / a.rate.max(b.rate);
    if gap < EQUAL_RATE_THRESHOLD {
        return erlang_cdf(merged_erlang(a, b), t);
    }
    let terms = partial_fraction_terms(a, b);
    let magnitude: f64 = terms.iter().map(|w| w.weight.abs()).sum();
    if magnitude * f64::EPSILON > CANCELLATION_LIMIT {
        return negative_binomial_mixture(a, b, t);
    }
    let mut total = 0.0;
    for w in &terms {
        total += w.weight * regularized_lower_gamma(w.order as f64, w.rate * t)?;
    }
    Ok(total.clamp(0.0, 1.0))
}

/// Erlang(k₁+k₂) with the rate that preserves the mean of Y₁ + Y₂; it differs
/// from the exact sum only at second order in the rate gap.
pub fn merged_erlang(a: ErlangSpec, b: ErlangSpec) -> ErlangSpec {
    let shape = a.shape + b.shape;
    ErlangSpec {
        shape,
        rate: shape as f64 / (a.mean() + b.mean()),
    }
}

struct Term {
    weight: f64,
    order: u32,
    rate: f64,
}

/// wᵢⱼ = (-1)^{kᵢ-j} C(kₗ+kᵢ-j-1, kᵢ-j) μᵢ^{kᵢ-j} μₗ^{kₗ} / (μₗ-μᵢ)^{kₗ+kᵢ-j}
/// for j = 1..kᵢ, where l is the other variable; evaluated in log space.
fn partial_fraction_terms(a: ErlangSpec, b: ErlangSpec) -> Vec<Term> {
    let mut terms = Vec::with_capacity((a.shape + b.shape) as usize);
    for (own, other) in [(a, b), (b, a)] {
        let diff = other.rate - own.rate;
        for j in 1..=own.shape {
            let m = own.shape - j;
            let power = other.shape + m;
            let ln_binom = ln_gamma((other.shape + m) as f64) - ln_gamma((m + 1) as f64) - ln_gamma(other.shape as f64);
            let ln_mag = ln_binom + m as f64 * own.rate.ln() + other.shape as f64 * other.rate.ln()
                - power as f64 * diff.abs().ln();
            let mut sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            if diff < 0.0 && power % 2 == 1 {
                sign = -sign;
            }
            terms.push(Term {
                weight: sign * ln_mag.exp(),
                order: j,
                rate: own.rate,
            });
        }
    }
    terms
}

/// Σₙ C(k_s+n-1, n) p^{k_s} (1-p)^n P(k_s + k_f + n, μ_f t), where the slow
/// variable (rate μ_s < μ_f) is expressed at the fast rate with p = μ_s/μ_f.
fn negative_binomial_mixture(a: ErlangSpec, b: ErlangSpec, t: f64) -> Result<f64> {
    let (slow, fast) = if a.rate < b.rate { (a, b) } else { (b, a) };
    let p = slow.rate / fast.rate;
    let q = 1.0 - p;
    let base = slow.shape + fast.shape;
    let x = fast.rate * t;
    let mut pmf = p.powi(slow.shape as i32);
    let mut mass = 0.0;
    let mut total = 0.0;
    let mut n: u32 = 0;
    loop {
        let cdf = regularized_lower_gamma((base + n) as f64, x)?;
        total += pmf * cdf;
        mass += pmf;
        // The Erlang CDFs decrease in n, so the unvisited mass bounds the tail.
        if (1.0 - mass) * cdf < 1e-16 {
            break;
        }
        if n >= 1_000_000 {
            return Err(crate::Error::Convergence {
                routine: "negative-binomial Erlang mixture",
                iterations: n as usize,
            });
        }
        pmf *= q * (slow.shape + n) as f64 / (n + 1) as f64;
        n += 1;
    }
    Ok(total.clamp(0.0, 1.0))
}

/// P{∏ groups ∏_{j≤kᵢ} Hⱼ ≤ z} with Hⱼ = shiftᵢ + Exp(rateᵢ).
///
/// Returns 0 at or below the support minimum; values are clamped to [0, 1]
/// after the contour quadrature.
pub fn shifted_exp_product_cdf(spec: &ShiftedExpProductSpec, z: f64, contour: &ContourSpec) -> Result<f64> {
    if z.is_nan() {
        return Err(domain("CDF argument is NaN"));
    }
    if z <= 0.0 || z <= spec.support_min() {
        return Ok(0.0);
    }
    let mut factors = Vec::with_capacity(spec.groups.len() + 1);
    let mut ln_scale = 0.0;
    for g in &spec.groups {
        factors.push(MellinFactor::incomplete_gamma(g.rate * g.shift, g.count));
        ln_scale += g.count as f64 * g.rate.ln();
    }
    factors.push(MellinFactor::reciprocal_pole());
    // Fold the scale into z when ∏ μᵢ^{kᵢ} alone would leave the f64 range.
    let (scale, z) = if ln_scale.abs() < 600.0 {
        (ln_scale.exp(), z)
    } else {
        (1.0, (z.ln() + ln_scale).exp())
    };
    Ok(mellin_barnes_cdf(&factors, scale, z, contour)?.clamp(0.0, 1.0))
}

/// Exp(rate) draw by inversion of the CDF.
pub fn sample_exponential<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> f64 {
    // 1 - U lies in (0, 1], so the logarithm is finite.
    let u: f64 = rng.random();
    -(1.0 - u).ln() / rate
}

/// Erlang draw as a sum of `shape` exponential draws.
pub fn sample_erlang<R: Rng + ?Sized>(spec: ErlangSpec, rng: &mut R) -> f64 {
    (0..spec.shape).map(|_| sample_exponential(spec.rate, rng)).sum()
}
