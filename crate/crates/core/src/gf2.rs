//! Dense linear algebra over GF(2).
//!
//! Rows are packed into `u64` words, least significant bit first. Unused bits
//! in the last word of a row are always zero, so word-wise equality and
//! popcounts are exact.

use std::fmt;

use crate::error::{Error, Result};

/// Default cap on codebook enumeration, as a power of two.
pub const ENUMERATION_CAP_LOG2: u32 = 20;

#[inline]
fn words_for(bits: usize) -> usize {
    bits.div_ceil(64)
}

/// A binary vector.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BinVector {
    len: usize,
    words: Vec<u64>,
}

impl BinVector {
    pub fn zeros(len: usize) -> Self {
        BinVector {
            len,
            words: vec![0; words_for(len)],
        }
    }

    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        let mut v = BinVector::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            match b {
                0 => {}
                1 => v.set(i, true),
                other => return Err(Error::NotBinary(other)),
            }
        }
        Ok(v)
    }

    /// Builds a vector from packed words, clearing any bits beyond `len`.
    pub fn from_words(len: usize, mut words: Vec<u64>) -> Self {
        words.resize(words_for(len), 0);
        if !len.is_multiple_of(64) {
            if let Some(last) = words.last_mut() {
                *last &= (1u64 << (len % 64)) - 1;
            }
        }
        BinVector { len, words }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, bit: bool) {
        debug_assert!(i < self.len);
        let mask = 1u64 << (i % 64);
        if bit {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    pub fn weight(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn xor_assign(&mut self, other: &BinVector) {
        assert_eq!(self.len, other.len, "length mismatch in xor");
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    pub fn to_bits(&self) -> Vec<u8> {
        (0..self.len).map(|i| self.get(i) as u8).collect()
    }

    /// Number of positions where `self` and `other` differ.
    pub fn distance(&self, other: &BinVector) -> usize {
        assert_eq!(self.len, other.len, "length mismatch in distance");
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum()
    }
}

impl fmt::Debug for BinVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Hamming weight of a vector.
pub fn hamming_weight(v: &BinVector) -> usize {
    v.weight()
}

/// A dense row-major binary matrix with at least one row and column.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BinMatrix {
    rows: usize,
    cols: usize,
    stride: usize,
    data: Vec<u64>,
}

impl BinMatrix {
    /// All-zero matrix.
    ///
    /// # Panics
    ///
    /// Panics if either dimension is zero.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        let stride = words_for(cols);
        BinMatrix {
            rows,
            cols,
            stride,
            data: vec![0; rows * stride],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = BinMatrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, true);
        }
        m
    }

    pub fn from_rows(rows: &[BinVector]) -> Result<Self> {
        let first = rows.first().ok_or(Error::EmptyMatrix)?;
        if first.is_empty() {
            return Err(Error::EmptyMatrix);
        }
        let mut m = BinMatrix::zeros(rows.len(), first.len());
        for (i, r) in rows.iter().enumerate() {
            if r.len() != m.cols {
                return Err(Error::DimensionMismatch {
                    expected: m.cols,
                    got: r.len(),
                });
            }
            m.row_words_mut(i).copy_from_slice(r.words());
        }
        Ok(m)
    }

    /// Parses rows of 0/1 digits.
    pub fn from_bit_rows<R: AsRef<[u8]>>(rows: &[R]) -> Result<Self> {
        let vecs = rows
            .iter()
            .map(|r| BinVector::from_bits(r.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        BinMatrix::from_rows(&vecs)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> bool {
        debug_assert!(r < self.rows && c < self.cols);
        (self.data[r * self.stride + c / 64] >> (c % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, bit: bool) {
        debug_assert!(r < self.rows && c < self.cols);
        let w = &mut self.data[r * self.stride + c / 64];
        let mask = 1u64 << (c % 64);
        if bit {
            *w |= mask;
        } else {
            *w &= !mask;
        }
    }

    #[inline]
    pub fn row_words(&self, r: usize) -> &[u64] {
        &self.data[r * self.stride..(r + 1) * self.stride]
    }

    #[inline]
    fn row_words_mut(&mut self, r: usize) -> &mut [u64] {
        &mut self.data[r * self.stride..(r + 1) * self.stride]
    }

    pub fn row(&self, r: usize) -> BinVector {
        BinVector::from_words(self.cols, self.row_words(r).to_vec())
    }

    pub fn row_weight(&self, r: usize) -> usize {
        self.row_words(r)
            .iter()
            .map(|w| w.count_ones() as usize)
            .sum()
    }

    pub fn row_vectors(&self) -> Vec<BinVector> {
        (0..self.rows).map(|r| self.row(r)).collect()
    }

    /// Submatrix of the given rows, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Result<Self> {
        if idx.is_empty() {
            return Err(Error::EmptyMatrix);
        }
        let mut m = BinMatrix::zeros(idx.len(), self.cols);
        for (dst, &src) in idx.iter().enumerate() {
            m.row_words_mut(dst).copy_from_slice(self.row_words(src));
        }
        Ok(m)
    }

    /// Stacks `self` on top of `other`.
    pub fn vstack(&self, other: &BinMatrix) -> Result<Self> {
        if self.cols != other.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                got: other.cols,
            });
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(BinMatrix {
            rows: self.rows + other.rows,
            cols: self.cols,
            stride: self.stride,
            data,
        })
    }

    pub fn transpose(&self) -> Self {
        let mut t = BinMatrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                if self.get(r, c) {
                    t.set(c, r, true);
                }
            }
        }
        t
    }

    /// Matrix-vector product `self * v` with `v` of length `cols`.
    pub fn mul_vec(&self, v: &BinVector) -> Result<BinVector> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                got: v.len(),
            });
        }
        let mut out = BinVector::zeros(self.rows);
        for r in 0..self.rows {
            let parity = self
                .row_words(r)
                .iter()
                .zip(v.words())
                .fold(0u32, |acc, (a, b)| acc ^ (a & b).count_ones())
                & 1;
            out.set(r, parity == 1);
        }
        Ok(out)
    }

    /// Row-vector product `u * self` with `u` of length `rows`; this is encoding.
    pub fn vec_mul(&self, u: &BinVector) -> Result<BinVector> {
        if u.len() != self.rows {
            return Err(Error::DimensionMismatch {
                expected: self.rows,
                got: u.len(),
            });
        }
        let mut words = vec![0u64; self.stride];
        for r in (0..self.rows).filter(|&r| u.get(r)) {
            for (acc, w) in words.iter_mut().zip(self.row_words(r)) {
                *acc ^= w;
            }
        }
        Ok(BinVector::from_words(self.cols, words))
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kronecker(&self, other: &BinMatrix) -> Result<Self> {
        let rows = self
            .rows
            .checked_mul(other.rows)
            .ok_or(Error::SizeOverflow("kronecker rows"))?;
        let cols = self
            .cols
            .checked_mul(other.cols)
            .ok_or(Error::SizeOverflow("kronecker cols"))?;
        rows.checked_mul(words_for(cols))
            .ok_or(Error::SizeOverflow("kronecker storage"))?;
        let mut out = BinMatrix::zeros(rows, cols);
        for ar in 0..self.rows {
            for ac in (0..self.cols).filter(|&c| self.get(ar, c)) {
                for br in 0..other.rows {
                    for bc in (0..other.cols).filter(|&c| other.get(br, c)) {
                        out.set(ar * other.rows + br, ac * other.cols + bc, true);
                    }
                }
            }
        }
        Ok(out)
    }
}

impl fmt::Debug for BinMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "BinMatrix {}x{}", self.rows, self.cols)?;
        for r in 0..self.rows {
            writeln!(f, "  {:?}", self.row(r))?;
        }
        Ok(())
    }
}

/// The `m`-th Kronecker power of `base`.
pub fn kronecker_power(base: &BinMatrix, m: usize) -> Result<BinMatrix> {
    if m == 0 {
        return Err(Error::InvalidConfig("Kronecker power needs m >= 1".into()));
    }
    let mut acc = base.clone();
    for _ in 1..m {
        acc = acc.kronecker(base)?;
    }
    Ok(acc)
}

/// The 2x2 kernel `[[1,0],[1,1]]`.
pub fn kernel_f() -> BinMatrix {
    BinMatrix::from_bit_rows(&[[1u8, 0], [1, 1]]).expect("static kernel")
}

/// Incrementally built, fully reduced row basis.
///
/// Each stored row has a distinct pivot (its lowest set column) and no other
/// stored row has that column set.
#[derive(Debug, Clone)]
pub struct XorBasis {
    width: usize,
    rows: Vec<(usize, Vec<u64>)>,
}

impl XorBasis {
    pub fn new(width: usize) -> Self {
        XorBasis {
            width,
            rows: Vec::new(),
        }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    fn lowest_bit(words: &[u64]) -> Option<usize> {
        words
            .iter()
            .enumerate()
            .find(|(_, &w)| w != 0)
            .map(|(i, w)| i * 64 + w.trailing_zeros() as usize)
    }

    fn reduce(&self, v: &mut [u64]) {
        for (p, row) in &self.rows {
            if (v[p / 64] >> (p % 64)) & 1 == 1 {
                for (a, b) in v.iter_mut().zip(row) {
                    *a ^= b;
                }
            }
        }
    }

    /// Inserts `v`; returns `true` if it was independent of the current span.
    pub fn insert(&mut self, words: &[u64]) -> bool {
        debug_assert_eq!(words.len(), words_for(self.width));
        let mut v = words.to_vec();
        self.reduce(&mut v);
        let Some(p) = Self::lowest_bit(&v) else {
            return false;
        };
        for (_, row) in self.rows.iter_mut() {
            if (row[p / 64] >> (p % 64)) & 1 == 1 {
                for (a, b) in row.iter_mut().zip(&v) {
                    *a ^= b;
                }
            }
        }
        self.rows.push((p, v));
        true
    }

    pub fn contains(&self, words: &[u64]) -> bool {
        let mut v = words.to_vec();
        self.reduce(&mut v);
        v.iter().all(|&w| w == 0)
    }

    /// Basis rows sorted by pivot column: the nonzero part of the RREF.
    pub fn echelon_rows(&self) -> Vec<(usize, &[u64])> {
        let mut rows: Vec<_> = self.rows.iter().map(|(p, r)| (*p, r.as_slice())).collect();
        rows.sort_by_key(|(p, _)| *p);
        rows
    }
}

/// Result of row reduction.
#[derive(Debug, Clone, PartialEq)]
pub struct RowReduction {
    pub rank: usize,
    /// Reduced row echelon form, same shape as the input; zero rows at the bottom.
    pub rref: BinMatrix,
    /// Indices of the lexicographically first maximal independent set of rows.
    pub pivot_rows: Vec<usize>,
    /// Leading column of each nonzero RREF row, ascending.
    pub pivot_cols: Vec<usize>,
}

/// Rank, reduced row echelon form and greedy pivot rows over GF(2).
pub fn rank_and_rref(mat: &BinMatrix) -> RowReduction {
    let mut basis = XorBasis::new(mat.cols());
    let mut pivot_rows = Vec::new();
    for r in 0..mat.rows() {
        if basis.insert(mat.row_words(r)) {
            pivot_rows.push(r);
        }
    }
    let mut rref = BinMatrix::zeros(mat.rows(), mat.cols());
    let mut pivot_cols = Vec::with_capacity(basis.rank());
    for (i, (p, words)) in basis.echelon_rows().into_iter().enumerate() {
        rref.row_words_mut(i).copy_from_slice(words);
        pivot_cols.push(p);
    }
    RowReduction {
        rank: basis.rank(),
        rref,
        pivot_rows,
        pivot_cols,
    }
}

/// Rank over GF(2).
pub fn rank(mat: &BinMatrix) -> usize {
    let mut basis = XorBasis::new(mat.cols());
    (0..mat.rows())
        .filter(|&r| basis.insert(mat.row_words(r)))
        .count()
}

/// Enumerated row space of a generator together with its information patterns.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub rank: usize,
    /// Generator rows whose coordinates in `info_patterns` carry information.
    pub pivot_rows: Vec<usize>,
    /// `2^rank` codewords. Row `i` is the XOR of `gen[pivot_rows[p]]` over set bits `p` of `i`.
    pub codewords: BinMatrix,
    /// `2^rank x k` patterns `U` with `U * gen == codewords` row for row.
    /// Non-pivot coordinates are fixed to zero.
    pub info_patterns: BinMatrix,
}

/// Lists the row space of `gen` and the message patterns producing it.
pub fn enumerate_codebook(gen: &BinMatrix, cap_log2: u32) -> Result<Codebook> {
    let red = rank_and_rref(gen);
    if red.rank > cap_log2 as usize || red.rank >= usize::BITS as usize {
        return Err(Error::EnumerationTooLarge {
            rank: red.rank,
            cap_log2,
        });
    }
    let size = 1usize << red.rank;
    let mut codewords = BinMatrix::zeros(size, gen.cols());
    let mut info = BinMatrix::zeros(size, gen.rows());
    for i in 1..size {
        // codeword i = codeword (i without its top bit) + the pivot row of that bit
        let top = usize::BITS as usize - 1 - i.leading_zeros() as usize;
        let prev = i ^ (1 << top);
        let src = red.pivot_rows[top];
        for w in 0..codewords.stride {
            let v = codewords.data[prev * codewords.stride + w] ^ gen.row_words(src)[w];
            codewords.data[i * codewords.stride + w] = v;
        }
        for w in 0..info.stride {
            info.data[i * info.stride + w] = info.data[prev * info.stride + w];
        }
        info.set(i, src, true);
    }
    Ok(Codebook {
        rank: red.rank,
        pivot_rows: red.pivot_rows,
        codewords,
        info_patterns: info,
    })
}
