//! Exact ML decoding of whole RM subcodes.
//!
//! A code containing `RM(m, 1)` is searched coset by coset: each coset of
//! `RM(m, 1)` is scored with one Walsh transform. Cosets are visited in Gray
//! order, and each step flips the signs on one kernel row, whose support is
//! the subcube `{z ⊆ i}`. The transform is then updated through a small
//! transform on that subcube instead of being recomputed.

use crate::code::{kernel_row, GeneratorSpec};
use crate::decoders::fht::{affine_codeword, argmax_abs, fht_in_place};
use crate::decoders::map::argmax;
use crate::decoders::{BlockDecoder, DecodeResult};
use crate::error::{Error, Result};
use crate::gf2::{enumerate_codebook, BinMatrix, BinVector, ENUMERATION_CAP_LOG2};
use crate::llr::ensure_finite;
use crate::plan::BottomCode;

/// Cosets visited between full re-transforms, bounding rounding drift.
const REFRESH: usize = 1024;

#[derive(Debug, Clone)]
struct Flip {
    /// Points of the subcube in compressed order.
    points: Vec<usize>,
    /// Compressed position of `a & i` for every `a`.
    compress: Vec<u16>,
    word: BinVector,
}

#[derive(Debug, Clone)]
enum Mode {
    Cosets(Vec<Flip>),
    Affine(BottomCode),
    Brute(BinMatrix),
}

/// Maximum-likelihood decoder for an RM subcode; ties go to the first
/// maximum in the decoder's own search order.
#[derive(Debug, Clone)]
pub struct MlDecoder {
    m: usize,
    mode: Mode,
}

impl MlDecoder {
    pub fn new(spec: &GeneratorSpec) -> Result<Self> {
        spec.validate()?;
        let m = spec.m;
        let rows = spec.generator_rows();
        if spec.order() >= 2 {
            // the first m + 1 rows span RM(m, 1); the rest pick the coset
            let flips = rows[m + 1..].iter().map(|&i| Flip::new(m, i)).collect();
            return Ok(MlDecoder {
                m,
                mode: Mode::Cosets(flips),
            });
        }
        let gen = crate::code::subcode_generator(spec)?;
        Ok(MlDecoder {
            m,
            mode: Mode::Affine(BottomCode::new(&gen, ENUMERATION_CAP_LOG2)?),
        })
    }

    /// Brute-force decoder over an explicit generator.
    pub fn from_generator(gen: &BinMatrix) -> Result<Self> {
        let n = gen.cols();
        if !n.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(n));
        }
        Ok(MlDecoder {
            m: n.trailing_zeros() as usize,
            mode: Mode::Brute(enumerate_codebook(gen, ENUMERATION_CAP_LOG2)?.codewords),
        })
    }

    fn decode_cosets(&self, flips: &[Flip], llr: &[f64]) -> BinVector {
        let n = llr.len();
        let mut x = llr.to_vec();
        let mut f = x.clone();
        fht_in_place(&mut f);
        let a = argmax_abs(&f);
        let mut best = (f[a].abs(), 0usize, a, f[a] < 0.0);
        let mut gray = 0usize;
        let mut y = Vec::new();
        for step in 1..(1usize << flips.len()) {
            let j = step.trailing_zeros() as usize;
            gray ^= 1 << j;
            let fl = &flips[j];
            y.clear();
            y.extend(fl.points.iter().map(|&z| -2.0 * x[z]));
            fht_in_place(&mut y);
            for &z in &fl.points {
                x[z] = -x[z];
            }
            if step % REFRESH == 0 {
                f.copy_from_slice(&x);
                fht_in_place(&mut f);
                let a = argmax_abs(&f);
                if f[a].abs() > best.0 {
                    best = (f[a].abs(), gray, a, f[a] < 0.0);
                }
                continue;
            }
            // fused update and search; the first strict improvement in index order wins
            let mut top = best.0;
            let mut at = usize::MAX;
            for (a, (fa, &c)) in f.iter_mut().zip(&fl.compress).enumerate() {
                *fa += y[c as usize];
                if fa.abs() > top {
                    top = fa.abs();
                    at = a;
                }
            }
            if at != usize::MAX {
                best = (top, gray, at, f[at] < 0.0);
            }
        }
        let (_, g, a, b) = best;
        let mut c = affine_codeword(a, b, n);
        for (j, fl) in flips.iter().enumerate() {
            if (g >> j) & 1 == 1 {
                c.xor_assign(&fl.word);
            }
        }
        c
    }
}

impl Flip {
    fn new(m: usize, i: usize) -> Self {
        let n = 1usize << m;
        let bits: Vec<usize> = (0..m).filter(|b| (i >> b) & 1 == 1).collect();
        let expand = |u: usize| -> usize {
            bits.iter()
                .enumerate()
                .filter(|(k, _)| (u >> k) & 1 == 1)
                .fold(0, |acc, (_, &b)| acc | (1 << b))
        };
        let points = (0..1usize << bits.len()).map(expand).collect();
        let compress = (0..n)
            .map(|a| {
                bits.iter()
                    .enumerate()
                    .filter(|(_, &b)| (a >> b) & 1 == 1)
                    .fold(0u16, |acc, (k, _)| acc | (1 << k))
            })
            .collect();
        Flip {
            points,
            compress,
            word: kernel_row(m, i),
        }
    }
}

impl BlockDecoder for MlDecoder {
    fn decode(&self, llr: &[f64]) -> Result<DecodeResult> {
        if llr.len() != 1 << self.m {
            return Err(Error::DimensionMismatch {
                expected: 1 << self.m,
                got: llr.len(),
            });
        }
        ensure_finite(llr)?;
        let c = match &self.mode {
            Mode::Cosets(flips) => self.decode_cosets(flips, llr),
            Mode::Affine(b) => b.map_codeword(llr),
            Mode::Brute(book) => {
                let s: Vec<f64> = (0..book.rows())
                    .map(|i| (0..llr.len()).map(|z| if book.get(i, z) { -llr[z] } else { llr[z] }).sum())
                    .collect();
                book.row(argmax(&s))
            }
        };
        Ok(DecodeResult::hard(c))
    }

    fn name(&self) -> &'static str {
        "map"
    }
}
