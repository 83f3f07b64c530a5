//! Upper incomplete gamma function of complex order and positive real argument.
//!
//! Branches: the power series for γ(s, x) when `x < |s| + 1`, the Legendre
//! continued fraction for Γ(s, x) otherwise. Every quantity is also available
//! multiplied by `e^x`, which keeps the Mellin-Barnes integrands O(1) when the
//! argument is large.

use num_complex::Complex64;

use super::gamma::ln_gamma_complex;
use crate::error::{domain, Error, Result};

const MAX_ITER: usize = 20_000;
const TINY: f64 = 1e-300;

/// Γ(s), Γ(s, x) and γ(s, x), each multiplied by `e^x`.
#[derive(Debug, Clone, Copy)]
pub struct ScaledIncompleteGamma {
    /// e^x Γ(s)
    pub complete: Complex64,
    /// e^x Γ(s, x)
    pub upper: Complex64,
    /// e^x γ(s, x)
    pub lower: Complex64,
}

/// Γ(s, x) = ∫ₓ^∞ t^{s-1} e^{-t} dt, analytically continued in `s`.
pub fn upper_incomplete_gamma_complex(s: Complex64, x: f64) -> Result<Complex64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(domain(format!("incomplete gamma argument must be positive, got {x}")));
    }
    if use_series(s, x) {
        let complete = ln_gamma_complex(s)?.exp();
        let lower = (s * x.ln() - x).exp() * lower_series_sum(s, x)?;
        let upper = complete - lower;
        if cancelled(upper, complete) {
            if let Ok(cf) = continued_fraction(s, x) {
                return Ok((s * x.ln() - x).exp() * cf);
            }
        }
        Ok(upper)
    } else {
        let cf = continued_fraction(s, x)?;
        Ok((s * x.ln() - x).exp() * cf)
    }
}

/// Scaled triple (e^x Γ(s), e^x Γ(s,x), e^x γ(s,x)).
///
/// `x = 0` is accepted: the lower part is zero and `upper == complete`.
pub fn incomplete_gamma_scaled(s: Complex64, x: f64) -> Result<ScaledIncompleteGamma> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(domain(format!("incomplete gamma argument must be nonnegative, got {x}")));
    }
    let complete = (ln_gamma_complex(s)? + x).exp();
    if x == 0.0 {
        return Ok(ScaledIncompleteGamma {
            complete,
            upper: complete,
            lower: Complex64::new(0.0, 0.0),
        });
    }
    if use_series(s, x) {
        let lower = (s * x.ln()).exp() * lower_series_sum(s, x)?;
        let upper = complete - lower;
        if cancelled(upper, complete) {
            if let Ok(cf) = continued_fraction(s, x) {
                let upper = (s * x.ln()).exp() * cf;
                return Ok(ScaledIncompleteGamma {
                    complete,
                    upper,
                    lower,
                });
            }
        }
        Ok(ScaledIncompleteGamma { complete, upper, lower })
    } else {
        let upper = (s * x.ln()).exp() * continued_fraction(s, x)?;
        Ok(ScaledIncompleteGamma {
            complete,
            upper,
            lower: complete - upper,
        })
    }
}

/// ln(e^x γ(s, x)) from the power series alone; used far from the real axis
/// where `e^x Γ(s)` would overflow but the series converges fast.
pub(crate) fn ln_scaled_lower(s: Complex64, x: f64) -> Result<Complex64> {
    Ok(s * x.ln() + lower_series_sum(s, x)?.ln())
}

fn use_series(s: Complex64, x: f64) -> bool {
    x < s.norm() + 1.0
}

/// Γ(s) - γ(s, x) lost most of its digits; happens for Re s < 0 when
/// |Γ(s)| is far larger than the tail itself.
fn cancelled(upper: Complex64, complete: Complex64) -> bool {
    upper.norm() < 1e-3 * complete.norm()
}

/// Σ_{n≥0} x^n / (s (s+1) ... (s+n)), so that γ(s, x) = x^s e^{-x} · sum.
fn lower_series_sum(s: Complex64, x: f64) -> Result<Complex64> {
    if s.im == 0.0 && s.re <= 0.0 && s.re == s.re.round() {
        return Err(domain(format!("γ(s, x) has a pole at s = {}", s.re)));
    }
    let mut term = Complex64::new(1.0, 0.0) / s;
    let mut sum = term;
    for n in 1..MAX_ITER {
        term *= x / (s + n as f64);
        sum += term;
        // Terms decrease monotonically once Re(s) + n > x.
        if term.norm() <= sum.norm() * f64::EPSILON * 0.5 && s.re + n as f64 > x {
            return Ok(sum);
        }
    }
    Err(Error::Convergence {
        routine: "complex incomplete gamma series",
        iterations: MAX_ITER,
    })
}

/// Modified Lentz evaluation of e^x x^{-s} Γ(s, x).
fn continued_fraction(s: Complex64, x: f64) -> Result<Complex64> {
    let tiny = Complex64::new(TINY, 0.0);
    let mut b = Complex64::new(x + 1.0, 0.0) - s;
    let mut c = Complex64::new(1.0 / TINY, 0.0);
    let mut d = if b.norm() < TINY { Complex64::new(1.0 / TINY, 0.0) } else { 1.0 / b };
    let mut h = d;
    for i in 1..MAX_ITER {
        let k = i as f64;
        let an = -k * (k - s);
        b += 2.0;
        d = an * d + b;
        if d.norm() < TINY {
            d = tiny;
        }
        c = b + an / c;
        if c.norm() < TINY {
            c = tiny;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).norm() < f64::EPSILON {
            return Ok(h);
        }
    }
    Err(Error::Convergence {
        routine: "complex incomplete gamma continued fraction",
        iterations: MAX_ITER,
    })
}
