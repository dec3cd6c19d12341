use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::plan::{DecodingPlan, NodePath, PlanNode};
use crate::pruning::profile::{NodeProfile, PruningProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankDirection {
    Min,
    Max,
}

fn check_q0(q0: usize, q: usize) -> Result<()> {
    if q0 == 0 || q0 > q {
        return Err(Error::InvalidConfig(format!("Q0 = {q0} must lie in 1..={q}")));
    }
    Ok(())
}

fn rank_subset(node: &PlanNode, q0: usize, direction: RankDirection) -> Result<Vec<usize>> {
    let children = node.children();
    check_q0(q0, children.len())?;
    let mut idx: Vec<usize> = (0..children.len()).collect();
    // stable sort keeps ascending z_q among equal ranks
    match direction {
        RankDirection::Min => idx.sort_by_key(|&q| children[q].rank),
        RankDirection::Max => idx.sort_by_key(|&q| std::cmp::Reverse(children[q].rank)),
    }
    idx.truncate(q0);
    Ok(idx)
}

/// Keeps the `q0` root projections of smallest or largest projected rank;
/// deeper nodes keep everything.
pub fn select_by_rank(plan: &DecodingPlan, q0: usize, direction: RankDirection) -> Result<PruningProfile> {
    select_by_rank_per_depth(plan, &[q0], direction)
}

/// Rank selection at every internal node, with `q0[d]` kept at depth `d`;
/// depths past the end of `q0` keep everything.
pub fn select_by_rank_per_depth(
    plan: &DecodingPlan,
    q0: &[usize],
    direction: RankDirection,
) -> Result<PruningProfile> {
    if plan.depth() == 0 {
        return Err(Error::InvalidConfig("plan has no projections to prune".into()));
    }
    let mut out = PruningProfile::full();
    fn walk(
        node: &PlanNode,
        path: &mut NodePath,
        q0: &[usize],
        dir: RankDirection,
        out: &mut PruningProfile,
    ) -> Result<()> {
        let Some((&here, rest)) = q0.split_first() else {
            return Ok(());
        };
        if node.children().is_empty() {
            return Ok(());
        }
        let subset = rank_subset(node, here, dir)?;
        for &q in &subset {
            path.push(q);
            walk(&node.children()[q], path, rest, dir, out)?;
            path.pop();
        }
        out.insert(NodeProfile::subset(path.clone(), subset));
        Ok(())
    }
    walk(plan.root(), &mut Vec::new(), q0, direction, &mut out)?;
    Ok(out)
}

/// Uniform random subset of `q0` root projections.
pub fn select_random(plan: &DecodingPlan, q0: usize, seed: u64) -> Result<PruningProfile> {
    let q = plan.root().children().len();
    if q == 0 {
        return Err(Error::InvalidConfig("plan has no projections to prune".into()));
    }
    check_q0(q0, q)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let subset = sample(&mut rng, q, q0).into_vec();
    Ok(PruningProfile::from_nodes([NodeProfile::subset(vec![], subset)]))
}

/// Ranks of the root projections kept by a profile, in index order.
pub fn retained_ranks(plan: &DecodingPlan, profile: &PruningProfile) -> Result<Vec<usize>> {
    let tree = profile.resolve(plan)?;
    Ok(tree
        .retained
        .iter()
        .map(|r| plan.root().children()[r.q].rank)
        .collect())
}
