//! Projection pruning: rank heuristics, random subsets and trained weights.

pub mod profile;

pub use profile::{NodeMode, NodeProfile, PruneTree, PruningProfile, Retained};
pub mod select;
pub mod topk;
pub mod train;

pub use select::{retained_ranks, select_by_rank, select_by_rank_per_depth, select_random, RankDirection};
pub use topk::{soft_topk, SoftTopK};
pub use train::{train_weights, TrainConfig, TrainOutcome};
