//! Entropic optimal-transport relaxation of top-`k` selection.
//!
//! Scores are min-max normalized to `x ∈ [0, 1]` and transported onto two
//! bins, `drop` at 0 and `keep` at 1, with squared cost and regularization `ε`.
//! The transport plan's keep-column is `γ_q = σ((2 x_q - 1 + δ) / ε)`, where
//! `δ` is the difference of the two column potentials. The column marginal
//! `Σ γ = Q0` fixes `δ`. Alternating Sinkhorn updates stall for small `ε`, so
//! `δ` is found with Newton steps inside a shrinking bracket.

use crate::error::{Error, Result};

/// Marginal tolerance of the transport solve.
pub const MARGINAL_TOL: f64 = 1e-9;
/// Iteration cap of the transport solve.
pub const MAX_ITERS: usize = 10_000;

#[derive(Debug, Clone)]
pub struct SoftTopK {
    /// Relaxed mask, `Σ γ = Q0`.
    pub gamma: Vec<f64>,
    x: Vec<f64>,
    /// `γ (1 - γ) / ε`.
    slope: Vec<f64>,
    range: f64,
    argmin: usize,
    argmax: usize,
    constant: bool,
}

#[inline]
fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

pub fn soft_topk(w: &[f64], q0: usize, epsilon: f64) -> Result<SoftTopK> {
    let q = w.len();
    if !(epsilon > 0.0) {
        return Err(Error::InvalidConfig(format!("epsilon must be positive, got {epsilon}")));
    }
    if q0 == 0 || q0 > q {
        return Err(Error::InvalidConfig(format!("Q0 = {q0} must lie in 1..={q}")));
    }
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig("non-finite score".into()));
    }
    let argmin = (0..q).min_by(|&a, &b| w[a].total_cmp(&w[b])).unwrap_or(0);
    let argmax = (0..q).max_by(|&a, &b| w[a].total_cmp(&w[b]).then(b.cmp(&a))).unwrap_or(0);
    let range = w[argmax] - w[argmin];
    if range == 0.0 || q0 == q {
        let g = q0 as f64 / q as f64;
        return Ok(SoftTopK {
            gamma: vec![g; q],
            x: vec![0.0; q],
            slope: vec![0.0; q],
            range,
            argmin,
            argmax,
            constant: true,
        });
    }
    let x: Vec<f64> = w.iter().map(|v| (v - w[argmin]) / range).collect();
    let target = q0 as f64;
    let mass = |d: f64| -> (f64, f64) {
        x.iter().fold((0.0, 0.0), |(s, ds), &xi| {
            let g = sigmoid((2.0 * xi - 1.0 + d) / epsilon);
            (s + g, ds + g * (1.0 - g) / epsilon)
        })
    };
    // the keep-mass is increasing in δ; these ends hold ~0 and ~Q
    let mut lo = -1.0 - 50.0 * epsilon;
    let mut hi = 1.0 + 50.0 * epsilon;
    let mut d = 0.0;
    let mut converged = false;
    for _ in 0..MAX_ITERS {
        let (s, ds) = mass(d);
        let err = s - target;
        if err.abs() < MARGINAL_TOL {
            converged = true;
            break;
        }
        if err > 0.0 {
            hi = d;
        } else {
            lo = d;
        }
        let newton = d - err / ds;
        d = if ds > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo < f64::EPSILON * (1.0 + d.abs()) {
            converged = (mass(d).0 - target).abs() < MARGINAL_TOL;
            break;
        }
    }
    if !converged {
        return Err(Error::TopKNotConverged(MAX_ITERS));
    }
    let gamma: Vec<f64> = x
        .iter()
        .map(|&xi| sigmoid((2.0 * xi - 1.0 + d) / epsilon))
        .collect();
    let slope = gamma.iter().map(|g| g * (1.0 - g) / epsilon).collect();
    Ok(SoftTopK {
        gamma,
        x,
        slope,
        range,
        argmin,
        argmax,
        constant: false,
    })
}

impl SoftTopK {
    /// Vector-Jacobian product: gradient on the scores given `∂L/∂γ`.
    pub fn vjp(&self, grad_gamma: &[f64]) -> Vec<f64> {
        let q = self.gamma.len();
        if self.constant {
            return vec![0.0; q];
        }
        let total: f64 = self.slope.iter().sum();
        if total == 0.0 {
            return vec![0.0; q];
        }
        let mean = self
            .slope
            .iter()
            .zip(grad_gamma)
            .map(|(s, g)| s * g)
            .sum::<f64>()
            / total;
        // gradient on the normalized scores
        let gx: Vec<f64> = self
            .slope
            .iter()
            .zip(grad_gamma)
            .map(|(s, g)| 2.0 * s * (g - mean))
            .collect();
        let mut out: Vec<f64> = gx.iter().map(|g| g / self.range).collect();
        let through_min: f64 = gx.iter().zip(&self.x).map(|(g, x)| g * (x - 1.0)).sum::<f64>() / self.range;
        let through_max: f64 = -gx.iter().zip(&self.x).map(|(g, x)| g * x).sum::<f64>() / self.range;
        out[self.argmin] += through_min;
        out[self.argmax] += through_max;
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn separated_scores_give_the_indicator() {
        let mut w = vec![0.0; 20];
        for q in [1, 4, 9, 15, 19] {
            w[q] = 1.0;
        }
        let t = soft_topk(&w, 5, 0.01).unwrap();
        for (q, g) in t.gamma.iter().enumerate() {
            assert!((g - w[q]).abs() < 1e-3);
        }
    }

    #[test]
    fn uniform_scores_give_uniform_mask() {
        let t = soft_topk(&[0.2; 63], 15, 0.01).unwrap();
        assert!(t.gamma.iter().all(|&g| (g - 15.0 / 63.0).abs() < 1e-12));
        let all = soft_topk(&[0.1, 0.5, 0.3], 3, 0.01).unwrap();
        assert_eq!(all.gamma, vec![1.0; 3]);
        assert!(soft_topk(&[1.0], 1, 0.0).is_err());
        assert!(soft_topk(&[1.0, 2.0], 3, 0.1).is_err());
    }

    #[test]
    fn small_epsilon_approaches_hard_top_k() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let w: Vec<f64> = (0..63).map(|_| rng.random::<f64>()).collect();
        let t = soft_topk(&w, 15, 1e-4).unwrap();
        let mut idx: Vec<usize> = (0..63).collect();
        idx.sort_by(|&a, &b| w[b].total_cmp(&w[a]));
        let top: Vec<usize> = idx[..15].to_vec();
        for q in 0..63 {
            let want = if top.contains(&q) { 1.0 } else { 0.0 };
            assert!((t.gamma[q] - want).abs() < 0.05, "{q}: {}", t.gamma[q]);
        }
    }

    #[test]
    fn vjp_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let w: Vec<f64> = (0..12).map(|_| rng.random::<f64>()).collect();
        let g: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
        let f = |w: &[f64]| -> f64 {
            soft_topk(w, 4, 0.1).unwrap().gamma.iter().zip(&g).map(|(a, b)| a * b).sum()
        };
        let grad = soft_topk(&w, 4, 0.1).unwrap().vjp(&g);
        let h = 1e-6;
        for p in 0..12 {
            let mut wp = w.clone();
            wp[p] += h;
            let mut wm = w.clone();
            wm[p] -= h;
            let fd = (f(&wp) - f(&wm)) / (2.0 * h);
            assert!((fd - grad[p]).abs() < 1e-5, "{p}: {fd} vs {}", grad[p]);
        }
    }

    proptest! {
        #[test]
        fn mask_sums_to_q0(w in proptest::collection::vec(0.0f64..1.0, 2..80), frac in 0.0f64..1.0, eps in 0.005f64..1.0) {
            let q0 = 1 + ((w.len() - 1) as f64 * frac) as usize;
            let t = soft_topk(&w, q0, eps).unwrap();
            let s: f64 = t.gamma.iter().sum();
            prop_assert!((s - q0 as f64).abs() < 1e-6);
            prop_assert!(t.gamma.iter().all(|g| (0.0..=1.0).contains(g)));
        }

        #[test]
        fn mask_is_affine_invariant(w in proptest::collection::vec(0.0f64..1.0, 3..40), a in 0.1f64..10.0, b in -5.0f64..5.0) {
            let q0 = w.len() / 2;
            prop_assume!(q0 >= 1);
            let t = soft_topk(&w, q0, 0.05).unwrap();
            let moved: Vec<f64> = w.iter().map(|v| a * v + b).collect();
            let u = soft_topk(&moved, q0, 0.05).unwrap();
            for (x, y) in t.gamma.iter().zip(&u.gamma) {
                prop_assert!((x - y).abs() < 1e-6);
            }
        }
    }
}
