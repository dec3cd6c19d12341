//! Subspaces of `F_2^m`, their cosets, and projections onto the quotient.
//!
//! Points `z ∈ F_2^m` are identified with integers `0..2^m`, bit `i` of the
//! integer being coordinate `i`. A coset of `B` is numbered by reducing any
//! member against an echelon basis of `B` (clearing each basis vector's
//! leading bit) and then deleting those leading bit positions. This map is
//! linear with kernel `B`, so projected vectors are again indexed by points
//! of `F_2^{m-s}`.

use crate::error::{Error, Result};
use crate::gf2::{BinMatrix, BinVector};
use crate::llr::{boxplus, ensure_finite};

/// An `s`-dimensional subspace of `F_2^m`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subspace {
    m: usize,
    basis: Vec<usize>,
}

impl Subspace {
    pub fn new(m: usize, basis: Vec<usize>) -> Result<Self> {
        if basis.is_empty() {
            return Err(Error::InvalidSubspace("empty basis".into()));
        }
        if m == 0 || m >= usize::BITS as usize {
            return Err(Error::InvalidSubspace(format!("ambient dimension {m}")));
        }
        if basis.iter().any(|&v| v == 0 || v >> m != 0) {
            return Err(Error::InvalidSubspace(format!(
                "basis vectors must be nonzero points of F_2^{m}"
            )));
        }
        let sub = Subspace { m, basis };
        if sub.echelon().len() != sub.basis.len() {
            return Err(Error::InvalidSubspace("basis is linearly dependent".into()));
        }
        Ok(sub)
    }

    /// The line `{0, z}`.
    pub fn span(m: usize, z: usize) -> Result<Self> {
        Subspace::new(m, vec![z])
    }

    pub fn ambient_dim(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[usize] {
        &self.basis
    }

    /// Reduced basis with distinct leading (highest) bits, sorted by leading bit descending.
    fn echelon(&self) -> Vec<usize> {
        let mut out: Vec<usize> = Vec::new();
        for &v in &self.basis {
            let mut r = v;
            for &b in &out {
                let lead = 1usize << (usize::BITS - 1 - b.leading_zeros());
                if r & lead != 0 {
                    r ^= b;
                }
            }
            if r != 0 {
                let lead = 1usize << (usize::BITS - 1 - r.leading_zeros());
                for b in out.iter_mut() {
                    if *b & lead != 0 {
                        *b ^= r;
                    }
                }
                out.push(r);
                out.sort_by(|a, b| b.cmp(a));
            }
        }
        out
    }

    /// All `2^s` points of the subspace.
    pub fn points(&self) -> Vec<usize> {
        let mut pts = vec![0usize];
        for &b in &self.basis {
            let extra: Vec<usize> = pts.iter().map(|&p| p ^ b).collect();
            pts.extend(extra);
        }
        pts.sort_unstable();
        pts
    }
}

/// The `2^m - 1` lines of `F_2^m`, ordered by their nonzero point.
pub fn one_dim_subspaces(m: usize) -> Vec<Subspace> {
    (1..(1usize << m))
        .map(|z| Subspace { m, basis: vec![z] })
        .collect()
}

/// Partition of `F_2^m` into the cosets of a subspace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CosetMap {
    m: usize,
    s: usize,
    coset_of: Vec<u32>,
    /// `members[τ * 2^s .. (τ + 1) * 2^s]`, ascending.
    members: Vec<u32>,
}

impl CosetMap {
    pub fn new(sub: &Subspace) -> Self {
        let m = sub.m;
        let s = sub.dim();
        let ech = sub.echelon();
        let leads: Vec<u32> = ech
            .iter()
            .map(|b| usize::BITS - 1 - b.leading_zeros())
            .collect();
        let n = 1usize << m;
        let mut coset_of = vec![0u32; n];
        for (z, slot) in coset_of.iter_mut().enumerate() {
            let mut r = z;
            for (&b, &lead) in ech.iter().zip(&leads) {
                if (r >> lead) & 1 == 1 {
                    r ^= b;
                }
            }
            // delete lead positions, highest first so lower positions stay put
            for &lead in &leads {
                let low = r & ((1usize << lead) - 1);
                r = ((r >> (lead + 1)) << lead) | low;
            }
            *slot = r as u32;
        }
        let per = 1usize << s;
        let mut members = vec![0u32; n];
        let mut fill = vec![0usize; n / per];
        for z in 0..n {
            let t = coset_of[z] as usize;
            members[t * per + fill[t]] = z as u32;
            fill[t] += 1;
        }
        CosetMap {
            m,
            s,
            coset_of,
            members,
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.m
    }

    pub fn n_cosets(&self) -> usize {
        1 << (self.m - self.s)
    }

    pub fn coset_size(&self) -> usize {
        1 << self.s
    }

    #[inline]
    pub fn coset_of(&self, z: usize) -> usize {
        self.coset_of[z] as usize
    }

    #[inline]
    pub fn members(&self, coset: usize) -> &[u32] {
        let per = 1usize << self.s;
        &self.members[coset * per..(coset + 1) * per]
    }
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// Hard projection: each coset entry is the XOR of the bits in that coset.
pub fn project_hard(y: &BinVector, cosets: &CosetMap) -> Result<BinVector> {
    check_len(1 << cosets.m, y.len())?;
    let mut out = BinVector::zeros(cosets.n_cosets());
    for t in 0..cosets.n_cosets() {
        let parity = cosets
            .members(t)
            .iter()
            .fold(false, |acc, &z| acc ^ y.get(z as usize));
        out.set(t, parity);
    }
    Ok(out)
}

/// LLR projection onto the cosets of a line: each coset pair is box-plus combined.
pub fn project_llr(llr: &[f64], cosets: &CosetMap) -> Result<Vec<f64>> {
    if cosets.s != 1 {
        return Err(Error::Unsupported(
            "LLR projection is defined for one-dimensional subspaces".into(),
        ));
    }
    check_len(1 << cosets.m, llr.len())?;
    ensure_finite(llr)?;
    Ok(project_llr_unchecked(llr, cosets))
}

#[inline]
pub(crate) fn project_llr_unchecked(llr: &[f64], cosets: &CosetMap) -> Vec<f64> {
    cosets
        .members
        .chunks_exact(2)
        .map(|p| boxplus(llr[p[0] as usize], llr[p[1] as usize]))
        .collect()
}

/// Generator of the projected code: columns in each coset are added.
pub fn project_generator(gen: &BinMatrix, cosets: &CosetMap) -> Result<BinMatrix> {
    check_len(1 << cosets.m, gen.cols())?;
    let mut out = BinMatrix::zeros(gen.rows(), cosets.n_cosets());
    for r in 0..gen.rows() {
        for t in 0..cosets.n_cosets() {
            let bit = cosets
                .members(t)
                .iter()
                .fold(false, |acc, &z| acc ^ gen.get(r, z as usize));
            if bit {
                out.set(r, t, true);
            }
        }
    }
    Ok(out)
}
