use crate::decoders::aggregate::{
    aggregate_hard_unchecked, aggregate_logsum_unchecked, aggregate_soft_unchecked,
};
use crate::decoders::map::SoftMapTape;
use crate::decoders::{BlockDecoder, DecodeResult};
use crate::error::{Error, Result};
use crate::gf2::BinVector;
use crate::llr::{boxplus_grad, ensure_finite, hard_decision};
use crate::plan::{DecodingPlan, NodeKind, PlanNode};
use crate::projection::project_llr_unchecked;
use crate::pruning::profile::{PruneTree, PruningProfile};

/// Default number of outer iterations.
pub const DEFAULT_NMAX: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregation {
    /// Weighted `tanh` rule.
    Soft,
    /// Log-sum rule built from exact box-plus terms.
    LogSum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RpaVariant {
    /// Hard MAP at the bottom, hard aggregation.
    Hard,
    Soft(Aggregation),
    /// Soft recursion fed with `±SAT` MAP codewords at the bottom.
    SaturatedSoft(Aggregation),
}

/// Recursive projection-aggregation decoder over a pruned plan.
#[derive(Debug, Clone)]
pub struct RpaDecoder<'a> {
    plan: &'a DecodingPlan,
    prune: PruneTree,
    variant: RpaVariant,
    n_max: usize,
}

/// Recorded forward pass of a soft node.
#[derive(Debug, Clone)]
pub(crate) enum NodeTape {
    Bottom(SoftMapTape),
    Internal(Vec<IterTape>),
}

#[derive(Debug, Clone)]
pub(crate) struct IterTape {
    input: Vec<f64>,
    child_out: Vec<Vec<f64>>,
    child_tape: Vec<NodeTape>,
}

/// Gradients with respect to the effective aggregation weights, shaped like a [`PruneTree`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightGrad {
    pub w: Vec<f64>,
    pub subtrees: Vec<WeightGrad>,
}

impl WeightGrad {
    pub fn zeros(tree: &PruneTree) -> Self {
        WeightGrad {
            w: vec![0.0; tree.retained.len()],
            subtrees: tree.subtrees.iter().map(WeightGrad::zeros).collect(),
        }
    }

    pub fn add(&mut self, other: &WeightGrad) {
        for (a, b) in self.w.iter_mut().zip(&other.w) {
            *a += b;
        }
        for (a, b) in self.subtrees.iter_mut().zip(&other.subtrees) {
            a.add(b);
        }
    }
}

impl<'a> RpaDecoder<'a> {
    pub fn new(
        plan: &'a DecodingPlan,
        profile: &PruningProfile,
        variant: RpaVariant,
        n_max: usize,
    ) -> Result<Self> {
        if n_max == 0 {
            return Err(Error::InvalidConfig("N_max must be positive".into()));
        }
        Ok(RpaDecoder {
            plan,
            prune: profile.resolve(plan)?,
            variant,
            n_max,
        })
    }

    pub fn from_tree(plan: &'a DecodingPlan, prune: PruneTree, variant: RpaVariant, n_max: usize) -> Self {
        RpaDecoder {
            plan,
            prune,
            variant,
            n_max,
        }
    }

    pub fn prune_tree(&self) -> &PruneTree {
        &self.prune
    }

    fn hard_node(&self, node: &PlanNode, prune: &PruneTree, l: &[f64]) -> BinVector {
        match &node.kind {
            NodeKind::Bottom(b) => b.map_codeword(l),
            NodeKind::Internal(children) => {
                hard_decision(&self.hard_iterate(node.m, children, prune, l).0)
            }
        }
    }

    fn hard_iterate(&self, m: usize, children: &[PlanNode], prune: &PruneTree, l: &[f64]) -> (Vec<f64>, usize) {
        let lines = self.plan.lines(m);
        let mut cur = l.to_vec();
        let mut prev = hard_decision(&cur);
        let mut used = 0;
        for _ in 0..self.n_max {
            used += 1;
            let decisions: Vec<BinVector> = prune
                .retained
                .iter()
                .zip(&prune.subtrees)
                .map(|(r, t)| {
                    let p = project_llr_unchecked(&cur, &lines[r.q]);
                    self.hard_node(&children[r.q], t, &p)
                })
                .collect();
            cur = aggregate_hard_unchecked(&cur, lines, &prune.retained, &decisions);
            let h = hard_decision(&cur);
            if h == prev {
                break;
            }
            prev = h;
        }
        (cur, used)
    }

    fn aggregation(&self) -> Aggregation {
        match self.variant {
            RpaVariant::Soft(a) | RpaVariant::SaturatedSoft(a) => a,
            RpaVariant::Hard => Aggregation::Soft,
        }
    }

    fn soft_bottom(&self, node: &crate::plan::BottomCode, l: &[f64], record: bool) -> (Vec<f64>, Option<NodeTape>) {
        match self.variant {
            RpaVariant::SaturatedSoft(_) => (node.saturated(node.map_index(l)), None),
            _ => {
                let (out, tape) = node.soft_map_taped(l, record);
                (out, tape.map(NodeTape::Bottom))
            }
        }
    }

    /// Soft recursion; returns the node's output LLRs, iterations used and, if asked, a tape.
    pub(crate) fn soft_node(
        &self,
        node: &PlanNode,
        prune: &PruneTree,
        l: &[f64],
        record: bool,
    ) -> (Vec<f64>, usize, Option<NodeTape>) {
        let children = match &node.kind {
            NodeKind::Bottom(b) => {
                let (out, tape) = self.soft_bottom(b, l, record);
                return (out, 0, tape);
            }
            NodeKind::Internal(c) => c,
        };
        let lines = self.plan.lines(node.m);
        let agg = self.aggregation();
        let mut cur = l.to_vec();
        let mut prev = hard_decision(&cur);
        let mut used = 0;
        let mut iters = Vec::new();
        for _ in 0..self.n_max {
            used += 1;
            let mut outs = Vec::with_capacity(prune.retained.len());
            let mut tapes = Vec::new();
            for (r, t) in prune.retained.iter().zip(&prune.subtrees) {
                let p = project_llr_unchecked(&cur, &lines[r.q]);
                let (o, _, tape) = self.soft_node(&children[r.q], t, &p, record);
                outs.push(o);
                if let Some(tape) = tape {
                    tapes.push(tape);
                }
            }
            let next = match agg {
                Aggregation::Soft => aggregate_soft_unchecked(&cur, lines, &prune.retained, &outs),
                Aggregation::LogSum => aggregate_logsum_unchecked(&cur, lines, &prune.retained, &outs),
            };
            if record {
                iters.push(IterTape {
                    input: std::mem::take(&mut cur),
                    child_out: outs,
                    child_tape: tapes,
                });
            }
            cur = next;
            let h = hard_decision(&cur);
            if h == prev {
                break;
            }
            prev = h;
        }
        (cur, used, record.then_some(NodeTape::Internal(iters)))
    }

    /// Reverse pass of [`Self::soft_node`] for the soft aggregation rule.
    pub(crate) fn soft_backward(
        &self,
        node: &PlanNode,
        prune: &PruneTree,
        tape: &NodeTape,
        grad_out: &[f64],
        wgrad: &mut WeightGrad,
    ) -> Vec<f64> {
        match (&node.kind, tape) {
            (NodeKind::Bottom(b), NodeTape::Bottom(t)) => b.soft_map_backward(t, grad_out),
            (NodeKind::Internal(children), NodeTape::Internal(iters)) => {
                let lines = self.plan.lines(node.m);
                let mut g = grad_out.to_vec();
                for it in iters.iter().rev() {
                    let x = &it.input;
                    let mut g_in = vec![0.0; x.len()];
                    for (j, (r, t)) in prune.retained.iter().zip(&prune.subtrees).enumerate() {
                        let c = &lines[r.q];
                        let zq = r.q + 1;
                        let th: Vec<f64> = it.child_out[j].iter().map(|h| (0.5 * h).tanh()).collect();
                        let mut dh = vec![0.0; th.len()];
                        let mut dw = 0.0;
                        for z in 0..x.len() {
                            if g[z] == 0.0 {
                                continue;
                            }
                            let tau = c.coset_of(z);
                            let partner = x[z ^ zq];
                            dw += g[z] * th[tau] * partner;
                            dh[tau] += g[z] * r.weight * 0.5 * (1.0 - th[tau] * th[tau]) * partner;
                            g_in[z ^ zq] += g[z] * r.weight * th[tau];
                        }
                        wgrad.w[j] += dw;
                        let dp = self.soft_backward(&children[r.q], t, &it.child_tape[j], &dh, &mut wgrad.subtrees[j]);
                        for (tau, &d) in dp.iter().enumerate() {
                            if d == 0.0 {
                                continue;
                            }
                            let pair = c.members(tau);
                            let (z0, z1) = (pair[0] as usize, pair[1] as usize);
                            let (ga, gb) = boxplus_grad(x[z0], x[z1]);
                            g_in[z0] += d * ga;
                            g_in[z1] += d * gb;
                        }
                    }
                    g = g_in;
                }
                g
            }
            _ => unreachable!("tape does not match the plan"),
        }
    }

    /// Decodes and records the soft forward pass for differentiation.
    pub(crate) fn decode_taped(&self, llr: &[f64]) -> (Vec<f64>, NodeTape) {
        let (out, _, tape) = self.soft_node(self.plan.root(), &self.prune, llr, true);
        (out, tape.expect("recording requested"))
    }

    /// Gradient of `Σ_z grad_out(z) · out(z)` with respect to the retained weights.
    pub(crate) fn backward(&self, tape: &NodeTape, grad_out: &[f64]) -> WeightGrad {
        let mut wg = WeightGrad::zeros(&self.prune);
        self.soft_backward(self.plan.root(), &self.prune, tape, grad_out, &mut wg);
        wg
    }
}

impl BlockDecoder for RpaDecoder<'_> {
    fn decode(&self, llr: &[f64]) -> Result<DecodeResult> {
        if llr.len() != self.plan.n() {
            return Err(Error::DimensionMismatch {
                expected: self.plan.n(),
                got: llr.len(),
            });
        }
        ensure_finite(llr)?;
        let root = self.plan.root();
        Ok(match (self.variant, &root.kind) {
            (RpaVariant::Hard, NodeKind::Bottom(b)) => DecodeResult::hard(b.map_codeword(llr)),
            (RpaVariant::Hard, NodeKind::Internal(children)) => {
                let (cur, used) = self.hard_iterate(root.m, children, &self.prune, llr);
                DecodeResult {
                    codeword: hard_decision(&cur),
                    final_llr: Some(cur),
                    iterations_used: used,
                }
            }
            _ => {
                let (cur, used, _) = self.soft_node(root, &self.prune, llr, false);
                DecodeResult {
                    codeword: hard_decision(&cur),
                    final_llr: Some(cur),
                    iterations_used: used,
                }
            }
        })
    }

    fn name(&self) -> &'static str {
        match self.variant {
            RpaVariant::Hard => "subrpa",
            RpaVariant::Soft(Aggregation::Soft) => "soft-subrpa",
            RpaVariant::Soft(Aggregation::LogSum) => "soft-subrpa-logsum",
            RpaVariant::SaturatedSoft(_) => "soft-subrpa-saturated",
        }
    }
}

/// Hard-decision subRPA.
pub fn subrpa_decode(llr: &[f64], plan: &DecodingPlan, profile: &PruningProfile, n_max: usize) -> Result<DecodeResult> {
    RpaDecoder::new(plan, profile, RpaVariant::Hard, n_max)?.decode(llr)
}

/// Soft-subRPA with the chosen aggregation rule.
pub fn soft_subrpa_decode(
    llr: &[f64],
    plan: &DecodingPlan,
    profile: &PruningProfile,
    n_max: usize,
    aggregation: Aggregation,
) -> Result<DecodeResult> {
    RpaDecoder::new(plan, profile, RpaVariant::Soft(aggregation), n_max)?.decode(llr)
}
