use crate::decoders::DecodeResult;
use crate::error::{Error, Result};
use crate::gf2::BinVector;

/// In-place Walsh-Hadamard butterflies; the length must be a power of two.
pub fn fht_in_place(x: &mut [f64]) {
    debug_assert!(x.len().is_power_of_two());
    let n = x.len();
    let mut h = 1;
    while h < n {
        for block in x.chunks_exact_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (u, v) = (*a, *b);
                *a = u + v;
                *b = u - v;
            }
        }
        h *= 2;
    }
}

/// `F[a] = Σ_z (-1)^{<a, z>} x(z)`.
pub fn fht(x: &[f64]) -> Result<Vec<f64>> {
    if !x.len().is_power_of_two() {
        return Err(Error::NotPowerOfTwo(x.len()));
    }
    let mut out = x.to_vec();
    fht_in_place(&mut out);
    Ok(out)
}

/// Affine codeword `c(z) = <a, z> ⊕ b` of length `n`.
pub(crate) fn affine_codeword(a: usize, b: bool, n: usize) -> BinVector {
    let mut v = BinVector::zeros(n);
    for z in 0..n {
        if ((a & z).count_ones() & 1 == 1) ^ b {
            v.set(z, true);
        }
    }
    v
}

/// First index of the largest `|F[a]|`.
#[inline]
pub(crate) fn argmax_abs(f: &[f64]) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (a, v) in f.iter().enumerate() {
        if v.abs() > best_v {
            best_v = v.abs();
            best = a;
        }
    }
    best
}

/// MAP decoding of `RM(m, 1)`: the largest Walsh coefficient picks the linear
/// part, its sign the complement bit.
pub fn fht_map_rm1(llr: &[f64], m: usize) -> Result<DecodeResult> {
    if llr.len() != 1 << m {
        return Err(Error::DimensionMismatch {
            expected: 1 << m,
            got: llr.len(),
        });
    }
    let f = fht(llr)?;
    let a = argmax_abs(&f);
    Ok(DecodeResult::hard(affine_codeword(a, f[a] < 0.0, llr.len())))
}
