//! Aggregation of child decisions back onto the parent's coordinates.
//!
//! `lines[q]` is the coset map of the line `z_q = q + 1`; `retained[j]` names
//! the projection whose child output is `children[j]`.

use crate::error::{Error, Result};
use crate::gf2::BinVector;
use crate::llr::{boxplus_exact, ensure_finite};
use crate::projection::CosetMap;
use crate::pruning::profile::{check_simplex, Retained};

fn check(l: &[f64], lines: &[CosetMap], retained: &[Retained], children: usize) -> Result<()> {
    if retained.is_empty() {
        return Err(Error::InvalidProfile("no retained projections".into()));
    }
    if children != retained.len() {
        return Err(Error::DimensionMismatch {
            expected: retained.len(),
            got: children,
        });
    }
    for r in retained {
        let c = lines
            .get(r.q)
            .ok_or_else(|| Error::InvalidProfile(format!("projection {} out of range", r.q)))?;
        if 1usize << c.ambient_dim() != l.len() {
            return Err(Error::DimensionMismatch {
                expected: 1 << c.ambient_dim(),
                got: l.len(),
            });
        }
    }
    ensure_finite(l)
}

fn check_weights(retained: &[Retained]) -> Result<()> {
    let w: Vec<f64> = retained.iter().map(|r| r.weight).collect();
    check_simplex(&w)
}

/// `l̃(z) = Σ_q w_q (1 - 2 ŷ_q([z])) l(z ⊕ z_q)`.
pub fn aggregate_hard(
    l: &[f64],
    lines: &[CosetMap],
    retained: &[Retained],
    decisions: &[BinVector],
) -> Result<Vec<f64>> {
    check(l, lines, retained, decisions.len())?;
    check_weights(retained)?;
    Ok(aggregate_hard_unchecked(l, lines, retained, decisions))
}

pub(crate) fn aggregate_hard_unchecked(
    l: &[f64],
    lines: &[CosetMap],
    retained: &[Retained],
    decisions: &[BinVector],
) -> Vec<f64> {
    let mut out = vec![0.0; l.len()];
    for (r, y) in retained.iter().zip(decisions) {
        let c = &lines[r.q];
        let zq = r.q + 1;
        for (z, o) in out.iter_mut().enumerate() {
            let v = r.weight * l[z ^ zq];
            *o += if y.get(c.coset_of(z)) { -v } else { v };
        }
    }
    out
}

/// `l̃(z) = Σ_q w_q tanh(l̂_q([z]) / 2) l(z ⊕ z_q)`.
pub fn aggregate_soft(
    l: &[f64],
    lines: &[CosetMap],
    retained: &[Retained],
    soft: &[Vec<f64>],
) -> Result<Vec<f64>> {
    check(l, lines, retained, soft.len())?;
    check_weights(retained)?;
    for s in soft {
        ensure_finite(s)?;
    }
    Ok(aggregate_soft_unchecked(l, lines, retained, soft))
}

pub(crate) fn aggregate_soft_unchecked(
    l: &[f64],
    lines: &[CosetMap],
    retained: &[Retained],
    soft: &[Vec<f64>],
) -> Vec<f64> {
    let mut out = vec![0.0; l.len()];
    for (r, h) in retained.iter().zip(soft) {
        let c = &lines[r.q];
        let zq = r.q + 1;
        let t: Vec<f64> = h.iter().map(|x| (0.5 * x).tanh()).collect();
        for (z, o) in out.iter_mut().enumerate() {
            *o += r.weight * t[c.coset_of(z)] * l[z ^ zq];
        }
    }
    out
}

/// `l̃(z) = Σ_q w_q ln[(1 + e^{l̂_q + l(z ⊕ z_q)}) / (e^{l̂_q} + e^{l(z ⊕ z_q)})]`.
pub fn aggregate_logsum(
    l: &[f64],
    lines: &[CosetMap],
    retained: &[Retained],
    soft: &[Vec<f64>],
) -> Result<Vec<f64>> {
    check(l, lines, retained, soft.len())?;
    check_weights(retained)?;
    for s in soft {
        ensure_finite(s)?;
    }
    Ok(aggregate_logsum_unchecked(l, lines, retained, soft))
}

pub(crate) fn aggregate_logsum_unchecked(
    l: &[f64],
    lines: &[CosetMap],
    retained: &[Retained],
    soft: &[Vec<f64>],
) -> Vec<f64> {
    let mut out = vec![0.0; l.len()];
    for (r, h) in retained.iter().zip(soft) {
        let c = &lines[r.q];
        let zq = r.q + 1;
        for (z, o) in out.iter_mut().enumerate() {
            *o += r.weight * boxplus_exact(h[c.coset_of(z)], l[z ^ zq]);
        }
    }
    out
}
