use crate::decoders::DecodeResult;
use crate::error::{Error, Result};
use crate::gf2::{BinMatrix, BinVector};
use crate::llr::{ensure_finite, sign, SAT};
use crate::plan::BottomCode;

fn correlations(llr: &[f64], codebook: &BinMatrix) -> Result<Vec<f64>> {
    if codebook.cols() != llr.len() {
        return Err(Error::DimensionMismatch {
            expected: codebook.cols(),
            got: llr.len(),
        });
    }
    ensure_finite(llr)?;
    Ok((0..codebook.rows())
        .map(|i| {
            llr.iter()
                .enumerate()
                .map(|(z, &l)| if codebook.get(i, z) { -l } else { l })
                .sum()
        })
        .collect())
}

/// First index of the maximum.
#[inline]
pub(crate) fn argmax(s: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in s.iter().enumerate().skip(1) {
        if v > s[best] {
            best = i;
        }
    }
    best
}

/// Brute-force MAP: the codeword maximizing `<l, 1 - 2c>`, lowest row on ties.
pub fn map_decode(llr: &[f64], codebook: &BinMatrix) -> Result<DecodeResult> {
    let s = correlations(llr, codebook)?;
    Ok(DecodeResult::hard(codebook.row(argmax(&s))))
}

/// Max-log information-bit LLRs over an enumerated codebook with information
/// patterns `u`; constant columns of `u` get 0.
pub fn info_bit_llrs(llr: &[f64], codebook: &BinMatrix, u: &BinMatrix) -> Result<Vec<f64>> {
    if u.rows() != codebook.rows() {
        return Err(Error::DimensionMismatch {
            expected: codebook.rows(),
            got: u.rows(),
        });
    }
    let s = correlations(llr, codebook)?;
    Ok((0..u.cols())
        .map(|i| {
            let mut best = [f64::NEG_INFINITY; 2];
            for (row, &v) in s.iter().enumerate() {
                let b = u.get(row, i) as usize;
                best[b] = best[b].max(v);
            }
            if best[0].is_finite() && best[1].is_finite() {
                best[0] - best[1]
            } else {
                0.0
            }
        })
        .collect())
}

/// Soft-MAP on a bottom node: max-log info-bit LLRs, then min-sum re-encoding.
pub fn soft_map(llr: &[f64], node: &BottomCode) -> Result<Vec<f64>> {
    if llr.len() != node.len() {
        return Err(Error::DimensionMismatch {
            expected: node.len(),
            got: llr.len(),
        });
    }
    ensure_finite(llr)?;
    Ok(node.soft_map_taped(llr, false).0)
}

/// Forward record of one soft-MAP call.
#[derive(Debug, Clone)]
pub(crate) struct SoftMapTape {
    /// Best codeword with info bit `p` clear / set.
    arg: Vec<[u32; 2]>,
    l_inf: Vec<f64>,
    /// Pivot attaining the min-sum minimum per coded position, `u8::MAX` if none.
    argmin: Vec<u8>,
    sign_prod: Vec<f64>,
}

impl BottomCode {
    /// Index of the MAP codeword, lowest on ties.
    pub(crate) fn map_index(&self, llr: &[f64]) -> usize {
        argmax(&self.scores(llr))
    }

    pub(crate) fn map_codeword(&self, llr: &[f64]) -> BinVector {
        self.codebook().codewords.row(self.map_index(llr))
    }

    /// Codeword `i` as `±SAT` LLRs.
    pub(crate) fn saturated(&self, i: usize) -> Vec<f64> {
        (0..self.len()).map(|z| SAT * self.codeword_sign(i, z)).collect()
    }

    pub(crate) fn soft_map_taped(&self, llr: &[f64], record: bool) -> (Vec<f64>, Option<SoftMapTape>) {
        let s = self.scores(llr);
        let rank = self.rank();
        // bit p of codeword index i is information bit p
        let mut arg = vec![[u32::MAX; 2]; rank];
        let mut best = vec![[f64::NEG_INFINITY; 2]; rank];
        for (i, &v) in s.iter().enumerate() {
            for p in 0..rank {
                let b = (i >> p) & 1;
                if v > best[p][b] {
                    best[p][b] = v;
                    arg[p][b] = i as u32;
                }
            }
        }
        let l_inf: Vec<f64> = best.iter().map(|b| b[0] - b[1]).collect();
        let n = self.len();
        let mut out = vec![0.0; n];
        let mut argmin = vec![u8::MAX; n];
        let mut sign_prod = vec![1.0; n];
        for j in 0..n {
            let d = self.delta(j);
            if d.is_empty() {
                out[j] = SAT;
                continue;
            }
            let mut sg = 1.0;
            let mut mn = f64::INFINITY;
            let mut at = u8::MAX;
            for &p in d {
                let v = l_inf[p as usize];
                sg *= sign(v);
                if v.abs() < mn {
                    mn = v.abs();
                    at = p;
                }
            }
            out[j] = sg * mn;
            argmin[j] = at;
            sign_prod[j] = sg;
        }
        let tape = record.then_some(SoftMapTape {
            arg,
            l_inf,
            argmin,
            sign_prod,
        });
        (out, tape)
    }

    /// Gradient of the soft-MAP input given the output gradient.
    pub(crate) fn soft_map_backward(&self, tape: &SoftMapTape, grad_out: &[f64]) -> Vec<f64> {
        let rank = self.rank();
        let mut g_inf = vec![0.0; rank];
        for (j, &g) in grad_out.iter().enumerate() {
            let p = tape.argmin[j];
            if p != u8::MAX && g != 0.0 {
                // out = S · |l_inf(p)|, and S · sign(l_inf(p)) is the product over the others
                let p = p as usize;
                g_inf[p] += g * tape.sign_prod[j] * sign(tape.l_inf[p]);
            }
        }
        let n = self.len();
        let mut g_l = vec![0.0; n];
        for p in 0..rank {
            if g_inf[p] == 0.0 {
                continue;
            }
            for (b, coef) in [(0, g_inf[p]), (1, -g_inf[p])] {
                let i = tape.arg[p][b] as usize;
                for (z, g) in g_l.iter_mut().enumerate() {
                    *g += coef * self.codeword_sign(i, z);
                }
            }
        }
        g_l
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::GeneratorSpec;
    use crate::gf2::enumerate_codebook;
    use crate::llr::hard_decision;
    use crate::plan::DecodingPlan;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_word_codebook() {
        let book = BinMatrix::from_bit_rows(&[[0u8, 0], [1, 1]]).unwrap();
        assert!(map_decode(&[3.0, 1.0], &book).unwrap().codeword.is_zero());
        let u = BinMatrix::from_bit_rows(&[[0u8], [1]]).unwrap();
        let l = [0.7, -2.1];
        let li = info_bit_llrs(&l, &book, &u).unwrap();
        assert!((li[0] - 2.0 * (0.7 - 2.1)).abs() < 1e-12);
        assert_eq!(info_bit_llrs(&[0.0, 0.0], &book, &u).unwrap(), vec![0.0]);
    }

    #[test]
    fn map_matches_gaussian_posterior() {
        let gen = BinMatrix::from_bit_rows(&[
            [1u8, 1, 1, 1, 0, 0, 0, 0],
            [0, 0, 1, 1, 1, 1, 0, 0],
            [0, 1, 0, 1, 0, 1, 1, 0],
        ])
        .unwrap();
        let book = enumerate_codebook(&gen, 20).unwrap().codewords;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let sigma: f64 = rng.random_range(0.5..2.0);
            let y: Vec<f64> = (0..8).map(|_| rng.random_range(-2.0..2.0)).collect();
            let l: Vec<f64> = y.iter().map(|v| 2.0 * v / (sigma * sigma)).collect();
            let post = |i: usize| -> f64 {
                (0..8)
                    .map(|z| {
                        let s = if book.get(i, z) { -1.0 } else { 1.0 };
                        (-(y[z] - s) * (y[z] - s) / (2.0 * sigma * sigma)).exp()
                    })
                    .product()
            };
            let best = (0..book.rows()).max_by(|&a, &b| post(a).total_cmp(&post(b))).unwrap();
            assert_eq!(map_decode(&l, &book).unwrap().codeword, book.row(best));
        }
    }

    #[test]
    fn soft_map_agrees_with_map_on_every_bottom() {
        let spec = GeneratorSpec::new(5, 10, vec![7, 11, 13, 14]).unwrap();
        let plan = DecodingPlan::build(&spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (_, b) in plan.bottoms() {
            let c = b.codebook();
            for _ in 0..100 {
                let l: Vec<f64> = (0..b.len()).map(|_| rng.random_range(-4.0..4.0)).collect();
                let soft = soft_map(&l, b).unwrap();
                let map = map_decode(&l, &c.codewords).unwrap().codeword;
                assert_eq!(hard_decision(&soft), map);
                let generic = info_bit_llrs(&l, &c.codewords, &c.info_patterns).unwrap();
                let (_, tape) = b.soft_map_taped(&l, true);
                for (p, &row) in c.pivot_rows.iter().enumerate() {
                    assert!((generic[row] - tape.as_ref().unwrap().l_inf[p]).abs() < 1e-9);
                }
                let scaled: Vec<f64> = l.iter().map(|x| 2.5 * x).collect();
                for (a, b) in soft_map(&scaled, b).unwrap().iter().zip(&soft) {
                    assert!((a - 2.5 * b).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn empty_columns_saturate() {
        let gen = BinMatrix::from_bit_rows(&[[1u8, 1, 0, 0]]).unwrap();
        let plan = DecodingPlan::from_generator(gen, 0, 20).unwrap();
        let b = plan.root().bottom().unwrap();
        let out = soft_map(&[1.0, 2.0, -0.5, 0.3], b).unwrap();
        assert_eq!(out[2], SAT);
        assert_eq!(out[3], SAT);
        assert!((out[0] - 6.0).abs() < 1e-12 && (out[1] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn backward_matches_finite_difference() {
        let spec = GeneratorSpec::new(5, 9, vec![7, 11, 13]).unwrap();
        let plan = DecodingPlan::build(&spec).unwrap();
        let b = plan.bottoms()[4].1;
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let l: Vec<f64> = (0..16).map(|_| rng.random_range(-3.0..3.0)).collect();
        let g: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
        let f = |x: &[f64]| -> f64 {
            b.soft_map_taped(x, false).0.iter().zip(&g).map(|(a, b)| a * b).sum()
        };
        let (_, tape) = b.soft_map_taped(&l, true);
        let grad = b.soft_map_backward(&tape.unwrap(), &g);
        let h = 1e-6;
        for z in 0..16 {
            let mut lp = l.clone();
            lp[z] += h;
            let mut lm = l.clone();
            lm[z] -= h;
            assert!(((f(&lp) - f(&lm)) / (2.0 * h) - grad[z]).abs() < 1e-5);
        }
    }
}
