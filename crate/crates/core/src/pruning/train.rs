//! Gradient training of per-node projection weights.
//!
//! Each trained node holds logits `θ` with `w = softmax(θ)`, so `w` stays on
//! the simplex and `θ = 0` is the uniform start. Decoding aggregates with
//! `a = w ⊙ γ / Σ(w ⊙ γ)`, where `γ = soft_topk(w, Q0, ε)`. Gradients flow back
//! through the whole soft recursion, the mask and the softmax.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decoders::rpa::WeightGrad;
use crate::decoders::{Aggregation, RpaDecoder, RpaVariant};
use crate::error::{Error, Result};
use crate::gf2::BinVector;
use crate::plan::{DecodingPlan, NodePath, PlanNode};
use crate::pruning::profile::{top_indices, NodeMode, NodeProfile, PruneTree, PruningProfile, Retained};
use crate::pruning::topk::{soft_topk, SoftTopK};
use crate::sim::channel::{awgn_llr, random_codeword, sigma_from_snr_db};
use crate::sim::stream_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    /// Training point as `SNR = 1 / (2σ²)` in dB.
    pub training_snr_db: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub topk_epsilon: f64,
    /// Projections kept at the root.
    pub q0: usize,
    /// Projections kept at every deeper internal node; `None` keeps all there.
    pub inner_q0: Option<usize>,
    pub n_max: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 128,
            training_snr_db: -3.0,
            iterations: 2000,
            learning_rate: 0.01,
            topk_epsilon: 0.01,
            q0: 15,
            inner_q0: None,
            n_max: 3,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.batch_size == 0 || self.iterations == 0 || self.n_max == 0 {
            return bad("batch size, iterations and N_max must be positive");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be finite and non-negative");
        }
        if !(self.topk_epsilon > 0.0) || !self.training_snr_db.is_finite() {
            return bad("epsilon must be positive and the training SNR finite");
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Subset profile for inference; the trained weights ride along per node.
    pub profile: PruningProfile,
    pub weights: Vec<(NodePath, Vec<f64>)>,
    pub loss_history: Vec<f64>,
}

impl TrainOutcome {
    pub fn root_subset(&self) -> Option<&[usize]> {
        self.profile.root_subset()
    }
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone)]
struct Param {
    path: NodePath,
    q0: usize,
    theta: Vec<f64>,
    m: Vec<f64>,
    v: Vec<f64>,
}

struct Forward {
    w: Vec<f64>,
    topk: SoftTopK,
    a: Vec<f64>,
    mass: f64,
}

impl Param {
    fn new(path: NodePath, q: usize, q0: usize) -> Result<Self> {
        if q0 == 0 || q0 > q {
            return Err(Error::InvalidConfig(format!("Q0 = {q0} must lie in 1..={q}")));
        }
        Ok(Param {
            path,
            q0,
            theta: vec![0.0; q],
            m: vec![0.0; q],
            v: vec![0.0; q],
        })
    }

    fn weights(&self) -> Vec<f64> {
        let mx = self.theta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = self.theta.iter().map(|t| (t - mx).exp()).collect();
        let s: f64 = e.iter().sum();
        e.iter().map(|x| x / s).collect()
    }

    fn forward(&self, eps: f64) -> Result<Forward> {
        let w = self.weights();
        let topk = soft_topk(&w, self.q0, eps)?;
        let v: Vec<f64> = w.iter().zip(&topk.gamma).map(|(a, b)| a * b).collect();
        let mass: f64 = v.iter().sum();
        let a = v.iter().map(|x| x / mass).collect();
        Ok(Forward { w, topk, a, mass })
    }

    /// Gradient on `θ` from the gradient on the effective weights `a`.
    fn backward(&self, f: &Forward, ga: &[f64]) -> Vec<f64> {
        let dot: f64 = ga.iter().zip(&f.a).map(|(g, a)| g * a).sum();
        let gv: Vec<f64> = ga.iter().map(|g| (g - dot) / f.mass).collect();
        let gg: Vec<f64> = gv.iter().zip(&f.w).map(|(g, w)| g * w).collect();
        let through_mask = f.topk.vjp(&gg);
        let gw: Vec<f64> = gv
            .iter()
            .zip(&f.topk.gamma)
            .zip(&through_mask)
            .map(|((g, c), t)| g * c + t)
            .collect();
        let wdot: f64 = gw.iter().zip(&f.w).map(|(g, w)| g * w).sum();
        gw.iter().zip(&f.w).map(|(g, w)| w * (g - wdot)).collect()
    }

    fn adam(&mut self, g: &[f64], lr: f64, t: i32) {
        let c1 = 1.0 - BETA1.powi(t);
        let c2 = 1.0 - BETA2.powi(t);
        for i in 0..self.theta.len() {
            self.m[i] = BETA1 * self.m[i] + (1.0 - BETA1) * g[i];
            self.v[i] = BETA2 * self.v[i] + (1.0 - BETA2) * g[i] * g[i];
            self.theta[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + ADAM_EPS);
        }
    }
}

fn collect_params(node: &PlanNode, path: &mut NodePath, cfg: &TrainConfig, out: &mut Vec<Param>) -> Result<()> {
    let children = node.children();
    if children.is_empty() {
        return Ok(());
    }
    let q0 = if path.is_empty() { Some(cfg.q0) } else { cfg.inner_q0 };
    if let Some(q0) = q0 {
        out.push(Param::new(path.clone(), children.len(), q0)?);
    }
    for (q, c) in children.iter().enumerate() {
        path.push(q);
        collect_params(c, path, cfg, out)?;
        path.pop();
    }
    Ok(())
}

fn build_tree(node: &PlanNode, path: &mut NodePath, index: &HashMap<NodePath, usize>, fwd: &[Forward]) -> PruneTree {
    let children = node.children();
    if children.is_empty() {
        return PruneTree::default();
    }
    let retained: Vec<Retained> = match index.get(path.as_slice()) {
        Some(&i) => fwd[i]
            .a
            .iter()
            .enumerate()
            .filter(|(_, &a)| a > 0.0)
            .map(|(q, &weight)| Retained { q, weight })
            .collect(),
        None => {
            let weight = 1.0 / children.len() as f64;
            (0..children.len()).map(|q| Retained { q, weight }).collect()
        }
    };
    let subtrees = retained
        .iter()
        .map(|r| {
            path.push(r.q);
            let t = build_tree(&children[r.q], path, index, fwd);
            path.pop();
            t
        })
        .collect();
    PruneTree { retained, subtrees }
}

/// Scatters weight gradients of trained nodes into dense per-parameter vectors.
fn scatter(
    tree: &PruneTree,
    grad: &WeightGrad,
    path: &mut NodePath,
    index: &HashMap<NodePath, usize>,
    out: &mut [Vec<f64>],
) {
    if let Some(&i) = index.get(path.as_slice()) {
        for (r, g) in tree.retained.iter().zip(&grad.w) {
            out[i][r.q] += g;
        }
    }
    for ((r, t), g) in tree.retained.iter().zip(&tree.subtrees).zip(&grad.subtrees) {
        path.push(r.q);
        scatter(t, g, path, index, out);
        path.pop();
    }
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
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Per-bit cross-entropy of output LLRs against the transmitted bits, and its gradient.
fn bce(llr: &[f64], c: &BinVector, scale: f64) -> (f64, Vec<f64>) {
    let mut loss = 0.0;
    let grad = llr
        .iter()
        .enumerate()
        .map(|(z, &l)| {
            let s = if c.get(z) { -1.0 } else { 1.0 };
            loss += softplus(-s * l);
            -s * sigmoid(-s * l) * scale
        })
        .collect();
    (loss * scale, grad)
}

/// Trains projection weights with soft-subRPA, soft aggregation and Adam.
pub fn train_weights(plan: &DecodingPlan, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if plan.depth() == 0 {
        return Err(Error::InvalidConfig("plan has no projections to train".into()));
    }
    let mut params = Vec::new();
    collect_params(plan.root(), &mut Vec::new(), cfg, &mut params)?;
    let index: HashMap<NodePath, usize> = params.iter().enumerate().map(|(i, p)| (p.path.clone(), i)).collect();
    let sigma = sigma_from_snr_db(cfg.training_snr_db);
    let gen = &plan.root().generator;
    let scale = 1.0 / (cfg.batch_size * plan.n()) as f64;
    let mut history = Vec::with_capacity(cfg.iterations);
    for it in 0..cfg.iterations {
        let fwd = params
            .iter()
            .map(|p| p.forward(cfg.topk_epsilon))
            .collect::<Result<Vec<_>>>()?;
        let tree = build_tree(plan.root(), &mut Vec::new(), &index, &fwd);
        let dec = RpaDecoder::from_tree(plan, tree, RpaVariant::Soft(Aggregation::Soft), cfg.n_max);
        let (loss, grad) = (0..cfg.batch_size)
            .into_par_iter()
            .map(|b| {
                let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(cfg.seed, it as u64, b as u64));
                let (_, c) = random_codeword(gen, &mut rng);
                let l = awgn_llr(&c, sigma, &mut rng);
                let (out, tape) = dec.decode_taped(&l);
                let (loss, g) = bce(&out, &c, scale);
                (loss, dec.backward(&tape, &g))
            })
            .reduce(
                || (0.0, WeightGrad::zeros(dec.prune_tree())),
                |(la, mut ga), (lb, gb)| {
                    ga.add(&gb);
                    (la + lb, ga)
                },
            );
        if !loss.is_finite() {
            return Err(Error::TrainingDiverged { iteration: it, loss });
        }
        history.push(loss);
        let mut dense: Vec<Vec<f64>> = params.iter().map(|p| vec![0.0; p.theta.len()]).collect();
        scatter(dec.prune_tree(), &grad, &mut Vec::new(), &index, &mut dense);
        for ((p, f), ga) in params.iter_mut().zip(&fwd).zip(&dense) {
            let g = p.backward(f, ga);
            if g.iter().any(|x| !x.is_finite()) {
                return Err(Error::TrainingDiverged { iteration: it, loss });
            }
            p.adam(&g, cfg.learning_rate, it as i32 + 1);
        }
    }
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for p in &params {
        let w = p.weights();
        nodes.push(NodeProfile {
            node_path: p.path.clone(),
            mode: Some(NodeMode::Subset),
            subset: Some(top_indices(&w, p.q0)),
            q0: Some(p.q0),
            weights: Some(w.clone()),
        });
        weights.push((p.path.clone(), w));
    }
    Ok(TrainOutcome {
        profile: PruningProfile::from_nodes(nodes),
        weights,
        loss_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::GeneratorSpec;

    fn small() -> (DecodingPlan, TrainConfig) {
        let plan = DecodingPlan::build(&GeneratorSpec::new(4, 7, vec![3, 5]).unwrap()).unwrap();
        let cfg = TrainConfig {
            batch_size: 8,
            iterations: 3,
            q0: 5,
            training_snr_db: 0.0,
            ..TrainConfig::default()
        };
        (plan, cfg)
    }

    #[test]
    fn zero_learning_rate_keeps_uniform_weights() {
        let (plan, mut cfg) = small();
        cfg.learning_rate = 0.0;
        let out = train_weights(&plan, &cfg).unwrap();
        let (path, w) = &out.weights[0];
        assert!(path.is_empty());
        assert!(w.iter().all(|&x| (x - 1.0 / 15.0).abs() < 1e-15));
        assert_eq!(out.loss_history.len(), 3);
        assert_eq!(out.root_subset().unwrap(), &[0, 1, 2, 3, 4]);
    }

    #[test]
    fn training_is_seeded_and_yields_valid_profiles() {
        let (plan, cfg) = small();
        let a = train_weights(&plan, &cfg).unwrap();
        let b = train_weights(&plan, &cfg).unwrap();
        assert_eq!(a.loss_history, b.loss_history);
        assert_eq!(a.profile, b.profile);
        let t = a.profile.resolve(&plan).unwrap();
        assert_eq!(t.retained.len(), 5);
        let s: f64 = a.weights[0].1.iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn theta_gradient_matches_finite_differences() {
        let plan = DecodingPlan::build(&GeneratorSpec::new(4, 7, vec![3, 5]).unwrap()).unwrap();
        let cfg = TrainConfig {
            topk_epsilon: 0.2,
            q0: 6,
            ..TrainConfig::default()
        };
        let mut params = Vec::new();
        collect_params(plan.root(), &mut Vec::new(), &cfg, &mut params).unwrap();
        let index: HashMap<NodePath, usize> = [(Vec::new(), 0)].into_iter().collect();
        for (i, t) in params[0].theta.iter_mut().enumerate() {
            *t = (i as f64 * 1.3).sin() * 0.5;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (_, c) = random_codeword(&plan.root().generator, &mut rng);
        let l = awgn_llr(&c, 0.9, &mut rng);
        let loss_at = |p: &Param| -> (f64, Vec<f64>) {
            let f = vec![p.forward(cfg.topk_epsilon).unwrap()];
            let tree = build_tree(plan.root(), &mut Vec::new(), &index, &f);
            let dec = RpaDecoder::from_tree(&plan, tree, RpaVariant::Soft(Aggregation::Soft), 2);
            let (out, tape) = dec.decode_taped(&l);
            let (loss, g) = bce(&out, &c, 1.0 / 16.0);
            let wg = dec.backward(&tape, &g);
            let mut dense = vec![vec![0.0; 15]];
            scatter(dec.prune_tree(), &wg, &mut Vec::new(), &index, &mut dense);
            (loss, p.backward(&f[0], &dense[0]))
        };
        let (_, grad) = loss_at(&params[0]);
        let h = 1e-6;
        for i in [0, 3, 8, 14] {
            let mut pp = params[0].clone();
            pp.theta[i] += h;
            let mut pm = params[0].clone();
            pm.theta[i] -= h;
            let fd = (loss_at(&pp).0 - loss_at(&pm).0) / (2.0 * h);
            assert!((fd - grad[i]).abs() < 1e-5 * (1.0 + fd.abs()), "{i}: {fd} vs {}", grad[i]);
        }
    }
}
