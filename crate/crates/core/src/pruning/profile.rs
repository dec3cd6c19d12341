use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plan::{DecodingPlan, NodeKind, NodePath, PlanNode};

/// Tolerance of the weight simplex constraint.
pub const SIMPLEX_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeMode {
    Full,
    Subset,
    Weighted,
}

/// Pruning rule of one internal plan node.
///
/// Projection indices are child indices `q`, i.e. line `z_q = q + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeProfile {
    pub node_path: NodePath,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<NodeMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subset: Option<Vec<usize>>,
    #[serde(rename = "Q0", default, skip_serializing_if = "Option::is_none")]
    pub q0: Option<usize>,
}

impl NodeProfile {
    pub fn full(node_path: NodePath) -> Self {
        NodeProfile {
            node_path,
            mode: Some(NodeMode::Full),
            weights: None,
            subset: None,
            q0: None,
        }
    }

    pub fn subset(node_path: NodePath, mut subset: Vec<usize>) -> Self {
        subset.sort_unstable();
        NodeProfile {
            node_path,
            mode: Some(NodeMode::Subset),
            weights: None,
            q0: Some(subset.len()),
            subset: Some(subset),
        }
    }

    pub fn weighted(node_path: NodePath, weights: Vec<f64>) -> Self {
        NodeProfile {
            node_path,
            mode: Some(NodeMode::Weighted),
            weights: Some(weights),
            subset: None,
            q0: None,
        }
    }

    /// Explicit mode, else subset if present, else weighted if weights are present.
    pub fn effective_mode(&self) -> NodeMode {
        self.mode.unwrap_or(match (&self.subset, &self.weights) {
            (Some(_), _) => NodeMode::Subset,
            (None, Some(_)) => NodeMode::Weighted,
            (None, None) => NodeMode::Full,
        })
    }

    fn retained(&self, q_total: usize) -> Result<Vec<Retained>> {
        let bad = |msg: String| Error::InvalidProfile(format!("node {:?}: {msg}", self.node_path));
        match self.effective_mode() {
            NodeMode::Full => Ok(uniform(0..q_total)),
            NodeMode::Subset => {
                let subset = self
                    .subset
                    .as_ref()
                    .ok_or_else(|| bad("subset mode without a subset".into()))?;
                let mut seen = vec![false; q_total];
                for &q in subset {
                    if q >= q_total {
                        return Err(bad(format!("index {q} out of range for {q_total} projections")));
                    }
                    if std::mem::replace(&mut seen[q], true) {
                        return Err(bad(format!("index {q} repeated")));
                    }
                }
                if let Some(q0) = self.q0 {
                    if q0 != subset.len() {
                        return Err(bad(format!("Q0 = {q0} but subset has {} entries", subset.len())));
                    }
                }
                if subset.is_empty() {
                    return Err(bad("empty subset".into()));
                }
                Ok(uniform((0..q_total).filter(|&q| seen[q])))
            }
            NodeMode::Weighted => {
                let w = self
                    .weights
                    .as_ref()
                    .ok_or_else(|| bad("weighted mode without weights".into()))?;
                if w.len() != q_total {
                    return Err(Error::DimensionMismatch {
                        expected: q_total,
                        got: w.len(),
                    });
                }
                check_simplex(w)?;
                Ok(w.iter()
                    .enumerate()
                    .filter(|(_, &x)| x > 0.0)
                    .map(|(q, &weight)| Retained { q, weight })
                    .collect())
            }
        }
    }
}

pub(crate) fn check_simplex(w: &[f64]) -> Result<()> {
    if w.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return Err(Error::InvalidProfile("weights must lie in [0, 1]".into()));
    }
    let s: f64 = w.iter().sum();
    if (s - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::WeightsNotNormalized(s));
    }
    Ok(())
}

fn uniform(qs: impl Iterator<Item = usize> + Clone) -> Vec<Retained> {
    let weight = 1.0 / qs.clone().count() as f64;
    qs.map(|q| Retained { q, weight }).collect()
}

/// A retained projection and its aggregation weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Retained {
    pub q: usize,
    pub weight: f64,
}

/// Per-node pruning rules; nodes without a rule keep every projection.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PruningProfile {
    nodes: BTreeMap<NodePath, NodeProfile>,
}

impl PruningProfile {
    pub fn full() -> Self {
        PruningProfile::default()
    }

    pub fn from_nodes(nodes: impl IntoIterator<Item = NodeProfile>) -> Self {
        let mut p = PruningProfile::default();
        for n in nodes {
            p.insert(n);
        }
        p
    }

    pub fn insert(&mut self, node: NodeProfile) {
        self.nodes.insert(node.node_path.clone(), node);
    }

    pub fn node(&self, path: &[usize]) -> Option<&NodeProfile> {
        self.nodes.get(path)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &NodeProfile> {
        self.nodes.values()
    }

    /// Retained projections at the root.
    pub fn root_subset(&self) -> Option<&[usize]> {
        self.nodes.get(&Vec::new()).and_then(|n| n.subset.as_deref())
    }

    /// Replaces every subset/weighted rule by its subset view (top-`Q0` of the weights
    /// when no subset is stored), as used for inference after training.
    pub fn to_subset_profile(&self) -> Self {
        let mut out = PruningProfile::default();
        for n in self.nodes.values() {
            let mut n = n.clone();
            if n.subset.is_none() {
                if let (Some(w), Some(q0)) = (&n.weights, n.q0) {
                    n.subset = Some(top_indices(w, q0));
                }
            }
            if n.subset.is_some() {
                n.mode = Some(NodeMode::Subset);
            }
            out.insert(n);
        }
        out
    }

    /// Resolves the rules against a plan; fails on any inconsistent node.
    pub fn resolve(&self, plan: &DecodingPlan) -> Result<PruneTree> {
        for path in self.nodes.keys() {
            match plan.node(path) {
                Some(n) if matches!(n.kind, NodeKind::Internal(_)) => {}
                _ => {
                    return Err(Error::InvalidProfile(format!(
                        "node {path:?} is not an internal node of the plan"
                    )))
                }
            }
        }
        self.resolve_node(plan.root(), &mut Vec::new())
    }

    fn resolve_node(&self, node: &PlanNode, path: &mut NodePath) -> Result<PruneTree> {
        let children = node.children();
        if children.is_empty() {
            return Ok(PruneTree::default());
        }
        let retained = match self.nodes.get(path.as_slice()) {
            Some(rule) => rule.retained(children.len())?,
            None => uniform(0..children.len()),
        };
        let mut subtrees = Vec::with_capacity(retained.len());
        for r in &retained {
            path.push(r.q);
            subtrees.push(self.resolve_node(&children[r.q], path)?);
            path.pop();
        }
        Ok(PruneTree { retained, subtrees })
    }

    pub fn to_json(&self) -> Result<String> {
        let nodes: Vec<&NodeProfile> = self.nodes.values().collect();
        let out = match nodes.as_slice() {
            [single] => serde_json::to_string_pretty(single),
            _ => serde_json::to_string_pretty(&nodes),
        };
        out.map_err(|e| Error::InvalidProfile(e.to_string()))
    }

    /// Accepts one node object or an array of node objects.
    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Doc {
            One(NodeProfile),
            Many(Vec<NodeProfile>),
        }
        let doc: Doc =
            serde_json::from_str(text).map_err(|e| Error::InvalidProfile(e.to_string()))?;
        Ok(match doc {
            Doc::One(n) => PruningProfile::from_nodes([n]),
            Doc::Many(v) => PruningProfile::from_nodes(v),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidProfile(format!("{}: {e}", path.display())))?;
        PruningProfile::from_json(&text)
    }
}

/// Indices of the `k` largest entries, ties to the lower index, returned ascending.
pub fn top_indices(w: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..w.len()).collect();
    idx.sort_by(|&a, &b| w[b].total_cmp(&w[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx.sort_unstable();
    idx
}

/// A profile resolved against a plan: retained projections per internal node.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PruneTree {
    pub retained: Vec<Retained>,
    /// One entry per retained projection, in the same order.
    pub subtrees: Vec<PruneTree>,
}

impl PruneTree {
    /// Bottom-layer work `Σ 2^{R_t}` over the retained tree.
    pub fn retained_l(&self, node: &PlanNode) -> u64 {
        match &node.kind {
            NodeKind::Bottom(b) => 1u64 << b.rank(),
            NodeKind::Internal(children) => self
                .retained
                .iter()
                .zip(&self.subtrees)
                .map(|(r, t)| t.retained_l(&children[r.q]))
                .sum(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::GeneratorSpec;

    fn plan() -> DecodingPlan {
        DecodingPlan::build(&GeneratorSpec::new(4, 7, vec![3, 5]).unwrap()).unwrap()
    }

    #[test]
    fn default_profile_keeps_everything_uniformly() {
        let t = PruningProfile::full().resolve(&plan()).unwrap();
        assert_eq!(t.retained.len(), 15);
        assert!(t.retained.iter().all(|r| (r.weight - 1.0 / 15.0).abs() < 1e-15));
        assert_eq!(t.subtrees.len(), 15);
    }

    #[test]
    fn subset_rules_are_validated() {
        let p = plan();
        let ok = PruningProfile::from_nodes([NodeProfile::subset(vec![], vec![4, 1, 9])]);
        let t = ok.resolve(&p).unwrap();
        assert_eq!(t.retained.iter().map(|r| r.q).collect::<Vec<_>>(), vec![1, 4, 9]);
        assert!(t.retained.iter().all(|r| r.weight == 1.0 / 3.0));
        for bad in [vec![1, 1], vec![15], vec![]] {
            let prof = PruningProfile::from_nodes([NodeProfile::subset(vec![], bad)]);
            assert!(prof.resolve(&p).is_err());
        }
        let stray = PruningProfile::from_nodes([NodeProfile::full(vec![0])]);
        assert!(stray.resolve(&p).is_err());
    }

    #[test]
    fn weighted_rules_check_the_simplex() {
        let p = plan();
        let mut w = vec![0.0; 15];
        w[2] = 0.25;
        w[7] = 0.75;
        let t = PruningProfile::from_nodes([NodeProfile::weighted(vec![], w.clone())])
            .resolve(&p)
            .unwrap();
        assert_eq!(t.retained, vec![Retained { q: 2, weight: 0.25 }, Retained { q: 7, weight: 0.75 }]);
        w[7] = 0.7;
        let bad = PruningProfile::from_nodes([NodeProfile::weighted(vec![], w)]);
        assert!(matches!(bad.resolve(&p), Err(Error::WeightsNotNormalized(_))));
        let short = PruningProfile::from_nodes([NodeProfile::weighted(vec![], vec![1.0])]);
        assert!(short.resolve(&p).is_err());
    }

    #[test]
    fn json_round_trip_single_and_many() {
        let text = r#"{"node_path":[],"weights":[0.5,0.5],"subset":[1],"Q0":1}"#;
        let p = PruningProfile::from_json(text).unwrap();
        let n = p.node(&[]).unwrap();
        assert_eq!(n.effective_mode(), NodeMode::Subset);
        assert_eq!(n.q0, Some(1));
        assert_eq!(PruningProfile::from_json(&p.to_json().unwrap()).unwrap(), p);
        let many = PruningProfile::from_nodes([NodeProfile::full(vec![]), NodeProfile::subset(vec![3], vec![0])]);
        let js = many.to_json().unwrap();
        assert!(js.trim_start().starts_with('['));
        assert_eq!(PruningProfile::from_json(&js).unwrap(), many);
    }

    #[test]
    fn subset_view_uses_top_weights() {
        let mut n = NodeProfile::weighted(vec![], vec![0.1, 0.4, 0.2, 0.3]);
        n.q0 = Some(2);
        let p = PruningProfile::from_nodes([n]).to_subset_profile();
        assert_eq!(p.root_subset(), Some(&[1usize, 3][..]));
        assert_eq!(top_indices(&[1.0, 1.0, 0.5], 1), vec![0]);
    }
}
