//! Precomputed recursive projection tree for subRPA-style decoding.
//!
//! Every internal node of log-length `m'` has one child per nonzero
//! `z_q ∈ F_2^{m'}` (child index `q = z_q - 1`). Bottom nodes carry the
//! enumerated codebook of their projected generator plus the tables used by
//! MAP and soft-MAP decoding.

use rayon::prelude::*;
use serde::Serialize;

use crate::code::{subcode_generator, ComplexityScore, GeneratorSpec};
use crate::decoders::fht::fht_in_place;
use crate::error::{Error, Result};
use crate::gf2::{enumerate_codebook, rank, BinMatrix, Codebook, ENUMERATION_CAP_LOG2};
use crate::projection::{one_dim_subspaces, project_generator, CosetMap};

/// Path from the root: the child index `q` (line `z_q = q + 1`) taken at each level.
pub type NodePath = Vec<usize>;

/// Bottom-layer code with its MAP / soft-MAP tables.
#[derive(Debug, Clone)]
pub struct BottomCode {
    m: usize,
    codebook: Codebook,
    /// `(a, b)` with codeword `c(z) = <a, z> ⊕ b`, when every codeword is affine.
    affine: Option<Vec<(u32, bool)>>,
    /// Pivot positions whose pivot row is set, per coded position.
    delta: Vec<Vec<u8>>,
}

impl BottomCode {
    pub fn new(generator: &BinMatrix, cap_log2: u32) -> Result<Self> {
        let n = generator.cols();
        if !n.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(n));
        }
        let m = n.trailing_zeros() as usize;
        let codebook = enumerate_codebook(generator, cap_log2)?;
        let affine = (0..codebook.codewords.rows())
            .map(|i| affine_form(&codebook.codewords, i, n))
            .collect::<Option<Vec<_>>>();
        let delta = (0..n)
            .map(|j| {
                codebook
                    .pivot_rows
                    .iter()
                    .enumerate()
                    .filter(|(_, &row)| generator.get(row, j))
                    .map(|(p, _)| p as u8)
                    .collect()
            })
            .collect();
        Ok(BottomCode {
            m,
            codebook,
            affine,
            delta,
        })
    }

    pub fn len(&self) -> usize {
        1 << self.m
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn rank(&self) -> usize {
        self.codebook.rank
    }

    pub fn codebook(&self) -> &Codebook {
        &self.codebook
    }

    pub fn is_affine(&self) -> bool {
        self.affine.is_some()
    }

    pub(crate) fn delta(&self, j: usize) -> &[u8] {
        &self.delta[j]
    }

    /// Correlation `<l, 1 - 2c>` for every codeword, in codebook order.
    pub(crate) fn scores(&self, llr: &[f64]) -> Vec<f64> {
        match &self.affine {
            Some(forms) => {
                let mut f = llr.to_vec();
                fht_in_place(&mut f);
                forms
                    .iter()
                    .map(|&(a, b)| if b { -f[a as usize] } else { f[a as usize] })
                    .collect()
            }
            None => (0..self.codebook.codewords.rows())
                .map(|i| {
                    llr.iter()
                        .enumerate()
                        .map(|(z, &l)| if self.codebook.codewords.get(i, z) { -l } else { l })
                        .sum()
                })
                .collect(),
        }
    }

    /// `(-1)^{c_i(z)}` for codeword `i`.
    #[inline]
    pub(crate) fn codeword_sign(&self, i: usize, z: usize) -> f64 {
        let bit = match &self.affine {
            Some(forms) => {
                let (a, b) = forms[i];
                ((a as usize & z).count_ones() & 1 == 1) ^ b
            }
            None => self.codebook.codewords.get(i, z),
        };
        if bit {
            -1.0
        } else {
            1.0
        }
    }
}

/// Recognizes `c(z) = <a, z> ⊕ b` via the Walsh spectrum of `(-1)^c`.
fn affine_form(words: &BinMatrix, row: usize, n: usize) -> Option<(u32, bool)> {
    let mut x: Vec<f64> = (0..n)
        .map(|z| if words.get(row, z) { -1.0 } else { 1.0 })
        .collect();
    fht_in_place(&mut x);
    x.iter()
        .position(|v| v.abs() == n as f64)
        .map(|a| (a as u32, x[a] < 0.0))
}

#[derive(Debug, Clone)]
pub enum NodeKind {
    /// Children indexed by `z_q - 1`.
    Internal(Vec<PlanNode>),
    Bottom(BottomCode),
}

#[derive(Debug, Clone)]
pub struct PlanNode {
    /// Log2 of the node's code length.
    pub m: usize,
    pub generator: BinMatrix,
    pub rank: usize,
    pub kind: NodeKind,
}

impl PlanNode {
    fn build(generator: BinMatrix, depth: usize, lines: &[Vec<CosetMap>], cap: u32) -> Result<Self> {
        let m = generator.cols().trailing_zeros() as usize;
        let rank = rank(&generator);
        let kind = if depth == 0 {
            NodeKind::Bottom(BottomCode::new(&generator, cap)?)
        } else {
            let children = lines[m]
                .par_iter()
                .map(|c| PlanNode::build(project_generator(&generator, c)?, depth - 1, lines, cap))
                .collect::<Result<Vec<_>>>()?;
            NodeKind::Internal(children)
        };
        Ok(PlanNode {
            m,
            generator,
            rank,
            kind,
        })
    }

    pub fn children(&self) -> &[PlanNode] {
        match &self.kind {
            NodeKind::Internal(c) => c,
            NodeKind::Bottom(_) => &[],
        }
    }

    pub fn bottom(&self) -> Option<&BottomCode> {
        match &self.kind {
            NodeKind::Bottom(b) => Some(b),
            NodeKind::Internal(_) => None,
        }
    }

    fn visit_bottoms<'a>(&'a self, path: &mut NodePath, f: &mut impl FnMut(&NodePath, &'a BottomCode)) {
        match &self.kind {
            NodeKind::Bottom(b) => f(path, b),
            NodeKind::Internal(children) => {
                for (q, c) in children.iter().enumerate() {
                    path.push(q);
                    c.visit_bottoms(path, f);
                    path.pop();
                }
            }
        }
    }

    fn subtree_l(&self) -> u64 {
        match &self.kind {
            NodeKind::Bottom(b) => 1u64 << b.rank(),
            NodeKind::Internal(c) => c.iter().map(PlanNode::subtree_l).sum(),
        }
    }
}

/// Full projection tree of a code; pruning is applied at decode time.
#[derive(Debug, Clone)]
pub struct DecodingPlan {
    spec: Option<GeneratorSpec>,
    depth: usize,
    root: PlanNode,
    /// Coset maps of every line of `F_2^{m'}`, indexed by `m'` then `z_q - 1`.
    lines: Vec<Vec<CosetMap>>,
}

impl DecodingPlan {
    /// Plan for an RM subcode: `r - 1` layers of 1-D projections.
    pub fn build(spec: &GeneratorSpec) -> Result<Self> {
        let gen = subcode_generator(spec)?;
        let mut plan = DecodingPlan::from_generator(gen, spec.depth(), ENUMERATION_CAP_LOG2)?;
        plan.spec = Some(spec.clone());
        Ok(plan)
    }

    /// Plan for an arbitrary generator with `2^m` columns.
    pub fn from_generator(generator: BinMatrix, depth: usize, cap_log2: u32) -> Result<Self> {
        let n = generator.cols();
        if !n.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(n));
        }
        let m = n.trailing_zeros() as usize;
        if depth >= m {
            return Err(Error::InvalidConfig(format!(
                "projection depth {depth} leaves no coordinates for length 2^{m}"
            )));
        }
        let lines: Vec<Vec<CosetMap>> = (0..=m)
            .map(|w| {
                if w + depth > m {
                    one_dim_subspaces(w).iter().map(CosetMap::new).collect()
                } else {
                    Vec::new()
                }
            })
            .collect();
        let root = PlanNode::build(generator, depth, &lines, cap_log2)?;
        Ok(DecodingPlan {
            spec: None,
            depth,
            root,
            lines,
        })
    }

    pub fn spec(&self) -> Option<&GeneratorSpec> {
        self.spec.as_ref()
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn root(&self) -> &PlanNode {
        &self.root
    }

    pub fn m(&self) -> usize {
        self.root.m
    }

    pub fn n(&self) -> usize {
        1 << self.root.m
    }

    pub fn k(&self) -> usize {
        self.root.generator.rows()
    }

    /// Coset maps of the lines of `F_2^{m'}` (empty unless some node has that length).
    pub fn lines(&self, m: usize) -> &[CosetMap] {
        &self.lines[m]
    }

    /// Node at `path`, if the path exists.
    pub fn node(&self, path: &[usize]) -> Option<&PlanNode> {
        let mut node = &self.root;
        for &q in path {
            node = node.children().get(q)?;
        }
        Some(node)
    }

    /// Paths of all internal nodes, depth-first in child order.
    pub fn internal_paths(&self) -> Vec<NodePath> {
        fn walk(node: &PlanNode, path: &mut NodePath, out: &mut Vec<NodePath>) {
            if let NodeKind::Internal(children) = &node.kind {
                out.push(path.clone());
                for (q, c) in children.iter().enumerate() {
                    path.push(q);
                    walk(c, path, out);
                    path.pop();
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut Vec::new(), &mut out);
        out
    }

    /// Bottom nodes with their paths, in plan order.
    pub fn bottoms(&self) -> Vec<(NodePath, &BottomCode)> {
        let mut out = Vec::new();
        self.root
            .visit_bottoms(&mut Vec::new(), &mut |p, b| out.push((p.clone(), b)));
        out
    }

    /// Number of bottom-layer codes `T`.
    pub fn bottom_count(&self) -> usize {
        self.bottoms().len()
    }

    /// `L = Σ_t 2^{R_t}` with top-layer child subtotals.
    pub fn complexity(&self) -> ComplexityScore {
        let bottom_ranks = self.bottoms().iter().map(|(_, b)| b.rank()).collect();
        let child_l = match &self.root.kind {
            NodeKind::Bottom(_) => vec![self.root.subtree_l()],
            NodeKind::Internal(c) => c.iter().map(PlanNode::subtree_l).collect(),
        };
        ComplexityScore {
            full_l: child_l.iter().sum(),
            child_l,
            bottom_ranks,
        }
    }

    pub fn summary(&self) -> PlanSummary {
        let mut level_sizes = Vec::new();
        let mut node = &self.root;
        while let NodeKind::Internal(c) = &node.kind {
            level_sizes.push(c.len());
            node = &c[0];
        }
        let score = self.complexity();
        PlanSummary {
            spec: self.spec.clone(),
            n: self.n(),
            k: self.k(),
            depth: self.depth,
            level_sizes,
            bottom_count: score.bottom_count(),
            full_l: score.full_l,
            bottoms: self
                .bottoms()
                .into_iter()
                .map(|(path, b)| BottomSummary {
                    path,
                    rank: b.rank(),
                    cost: 1u64 << b.rank(),
                })
                .collect(),
        }
    }
}

/// JSON-friendly view of a plan's rank profile.
#[derive(Debug, Clone, Serialize)]
pub struct PlanSummary {
    pub spec: Option<GeneratorSpec>,
    pub n: usize,
    pub k: usize,
    pub depth: usize,
    pub level_sizes: Vec<usize>,
    pub bottom_count: usize,
    pub full_l: u64,
    pub bottoms: Vec<BottomSummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BottomSummary {
    pub path: NodePath,
    pub rank: usize,
    pub cost: u64,
}
