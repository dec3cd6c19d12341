//! Scalar LLR helpers shared by projection, decoding and training.
//!
//! LLRs are natural-log ratios `ln P(0)/P(1)`: positive values favour bit 0.

use crate::error::{Error, Result};
use crate::gf2::BinVector;

/// Magnitude used to embed hard decisions and infinite limits as LLRs.
pub const SAT: f64 = 30.0;

/// Clamp on `|tanh(a/2) tanh(b/2)|` in [`boxplus`].
pub const TANH_CLAMP: f64 = 1.0 - 1e-12;

/// LLR of the XOR of two independent bits, `2 atanh(tanh(a/2) tanh(b/2))`.
#[inline]
pub fn boxplus(a: f64, b: f64) -> f64 {
    let t = ((a * 0.5).tanh() * (b * 0.5).tanh()).clamp(-TANH_CLAMP, TANH_CLAMP);
    2.0 * t.atanh()
}

/// Partial derivatives of [`boxplus`] with respect to `a` and `b`.
///
/// Returns zeros where the clamp is active.
#[inline]
pub fn boxplus_grad(a: f64, b: f64) -> (f64, f64) {
    let ta = (a * 0.5).tanh();
    let tb = (b * 0.5).tanh();
    let t = ta * tb;
    if t.abs() >= TANH_CLAMP {
        return (0.0, 0.0);
    }
    let denom = 1.0 - t * t;
    (tb * (1.0 - ta * ta) / denom, ta * (1.0 - tb * tb) / denom)
}

#[inline]
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[inline]
fn logaddexp(a: f64, b: f64) -> f64 {
    let hi = a.max(b);
    hi + (-(a - b).abs()).exp().ln_1p()
}

/// Unclamped `ln(1 + e^{a+b}) - ln(e^a + e^b)`, evaluated in the log domain.
#[inline]
pub fn boxplus_exact(a: f64, b: f64) -> f64 {
    softplus(a + b) - logaddexp(a, b)
}

/// Hard decision of one LLR: negative means bit 1, zero resolves to 0.
#[inline]
pub fn hard_bit(l: f64) -> bool {
    l < 0.0
}

pub fn hard_decision(llr: &[f64]) -> BinVector {
    let mut v = BinVector::zeros(llr.len());
    for (i, &l) in llr.iter().enumerate() {
        if hard_bit(l) {
            v.set(i, true);
        }
    }
    v
}

/// `+1` for non-negative values, `-1` otherwise.
#[inline]
pub fn sign(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

pub fn ensure_finite(llr: &[f64]) -> Result<()> {
    match llr.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(Error::NonFiniteLlr(i)),
        None => Ok(()),
    }
}
