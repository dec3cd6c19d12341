//! Reed-Muller codes, RM subcodes and the bottom-layer complexity metric.
//!
//! Row `i` of `P = F^{⊗m}` is the indicator of `{z : z ⊆ i}` and has weight
//! `2^{popcount(i)}`. `RM(m, r)` keeps the rows of weight at least `2^{m-r}`;
//! a subcode between `RM(m, r-1)` and `RM(m, r)` keeps all of `RM(m, r-1)`
//! plus a subset of the `binom(m, r)` rows of weight exactly `2^{m-r}`.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::gf2::{BinMatrix, BinVector, XorBasis};
use crate::projection::{project_generator, CosetMap, Subspace};

/// Default cap on the number of selections searched exhaustively.
pub const SEARCH_CAP: u128 = 1_000_000;

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// `Σ_{i ≤ r} binom(m, i)`: the dimension of `RM(m, r)`.
pub fn rm_dimension(m: usize, r: usize) -> usize {
    (0..=r.min(m)).map(|i| binomial(m, i) as usize).sum()
}

/// Row `i` of `F^{⊗m}`.
pub fn kernel_row(m: usize, i: usize) -> BinVector {
    let n = 1usize << m;
    let mut v = BinVector::zeros(n);
    for z in 0..n {
        if z & !i == 0 {
            v.set(z, true);
        }
    }
    v
}

/// Rows of `F^{⊗m}` forming `RM(m, r)`: descending weight, then ascending index.
pub fn rm_row_indices(m: usize, r: usize) -> Vec<usize> {
    let mut rows: Vec<usize> = (0..(1usize << m))
        .filter(|i| i.count_ones() as usize + r >= m)
        .collect();
    rows.sort_by_key(|&i| (std::cmp::Reverse(i.count_ones()), i));
    rows
}

/// The `binom(m, r)` rows of weight `2^{m-r}`, ascending.
pub fn order_r_rows(m: usize, r: usize) -> Vec<usize> {
    (0..(1usize << m))
        .filter(|i| i.count_ones() as usize + r == m)
        .collect()
}

fn check_m(m: usize) -> Result<()> {
    if m == 0 || m > 20 {
        return Err(Error::InvalidCode(format!("m = {m} outside 1..=20")));
    }
    Ok(())
}

fn matrix_of_rows(m: usize, rows: &[usize]) -> Result<BinMatrix> {
    let vecs: Vec<BinVector> = rows.iter().map(|&i| kernel_row(m, i)).collect();
    BinMatrix::from_rows(&vecs)
}

/// Generator of `RM(m, r)`.
pub fn rm_generator(m: usize, r: usize) -> Result<BinMatrix> {
    check_m(m)?;
    if r > m {
        return Err(Error::InvalidCode(format!("order {r} exceeds m = {m}")));
    }
    matrix_of_rows(m, &rm_row_indices(m, r))
}

/// An RM subcode: all of `RM(m, r-1)` plus `extra_rows` of weight `2^{m-r}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub m: usize,
    pub k: usize,
    /// Row indices of `F^{⊗m}`, sorted ascending.
    pub extra_rows: Vec<usize>,
}

impl GeneratorSpec {
    pub fn new(m: usize, k: usize, mut extra_rows: Vec<usize>) -> Result<Self> {
        extra_rows.sort_unstable();
        let spec = GeneratorSpec { m, k, extra_rows };
        spec.validate()?;
        Ok(spec)
    }

    /// The full code `RM(m, r)`.
    pub fn full_rm(m: usize, r: usize) -> Result<Self> {
        check_m(m)?;
        if r > m {
            return Err(Error::InvalidCode(format!("order {r} exceeds m = {m}")));
        }
        GeneratorSpec::new(m, rm_dimension(m, r), order_r_rows(m, r))
    }

    pub fn validate(&self) -> Result<()> {
        check_m(self.m)?;
        let n = 1usize << self.m;
        if self.k == 0 || self.k > n {
            return Err(Error::InvalidCode(format!("k = {} outside 1..={n}", self.k)));
        }
        let r = self.order();
        let need = self.k - self.lower_dim();
        if self.extra_rows.len() != need {
            return Err(Error::InvalidCode(format!(
                "expected {need} extra rows for k = {}, got {}",
                self.k,
                self.extra_rows.len()
            )));
        }
        if self.extra_rows.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidCode("extra rows must be distinct and sorted".into()));
        }
        if let Some(&bad) = self
            .extra_rows
            .iter()
            .find(|&&i| i >= n || i.count_ones() as usize + r != self.m)
        {
            return Err(Error::InvalidCode(format!(
                "row {bad} is not a weight-2^{} row of F^(x){}",
                self.m - r,
                self.m
            )));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        1 << self.m
    }

    /// The order `r` with `dim RM(m, r-1) < k <= dim RM(m, r)`.
    pub fn order(&self) -> usize {
        (0..=self.m)
            .find(|&r| rm_dimension(self.m, r) >= self.k)
            .unwrap_or(self.m)
    }

    /// `k_l`, the dimension of `RM(m, r-1)` (zero for `r = 0`).
    pub fn lower_dim(&self) -> usize {
        match self.order() {
            0 => 0,
            r => rm_dimension(self.m, r - 1),
        }
    }

    /// `k_u`, the dimension of `RM(m, r)`.
    pub fn upper_dim(&self) -> usize {
        rm_dimension(self.m, self.order())
    }

    /// Number of 1-D projection layers above the bottom codes.
    pub fn depth(&self) -> usize {
        self.order().saturating_sub(1)
    }

    /// Row indices of `F^{⊗m}` in generator order.
    pub fn generator_rows(&self) -> Vec<usize> {
        let r = self.order();
        let mut rows = if r == 0 {
            Vec::new()
        } else {
            rm_row_indices(self.m, r - 1)
        };
        rows.extend_from_slice(&self.extra_rows);
        rows
    }

    pub fn rate(&self) -> f64 {
        self.k as f64 / self.n() as f64
    }
}

/// Generator of an RM subcode.
pub fn subcode_generator(spec: &GeneratorSpec) -> Result<BinMatrix> {
    spec.validate()?;
    matrix_of_rows(spec.m, &spec.generator_rows())
}

/// Bottom-layer complexity `L = Σ_t 2^{R_t}`, with per-child subtotals.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplexityScore {
    pub full_l: u64,
    /// Contribution of each top-layer child subtree, indexed by child (`z_q - 1`).
    /// A depth-zero code has one entry, the root itself.
    pub child_l: Vec<u64>,
    /// Rank of every bottom-layer projected generator, in plan order.
    pub bottom_ranks: Vec<usize>,
}

impl ComplexityScore {
    /// Sum of the `q0` smallest child contributions.
    pub fn best_subset_l(&self, q0: usize) -> u64 {
        let mut c = self.child_l.clone();
        c.sort_unstable();
        c.iter().take(q0).sum()
    }

    pub fn bottom_count(&self) -> usize {
        self.bottom_ranks.len()
    }
}

/// Every bottom-layer projection of every `RM(m, r)` row, for fast scoring of
/// many row selections.
#[derive(Debug, Clone)]
pub struct ProjectionTable {
    r: usize,
    /// Rows of `F^{⊗m}` in `RM(m, r)` generator order.
    rows: Vec<usize>,
    base_len: usize,
    children: usize,
    /// One matrix per bottom node (plan order); row `j` is `rows[j]` projected.
    bottom: Vec<BinMatrix>,
    /// Span of the projected base rows at each bottom node.
    base_basis: Vec<XorBasis>,
}

impl ProjectionTable {
    pub fn new(m: usize, r: usize) -> Result<Self> {
        check_m(m)?;
        if r > m {
            return Err(Error::InvalidCode(format!("order {r} exceeds m = {m}")));
        }
        let rows = rm_row_indices(m, r);
        let base_len = if r == 0 { 0 } else { rm_dimension(m, r - 1) };
        let depth = r.saturating_sub(1);
        let mut level = vec![matrix_of_rows(m, &rows)?];
        for d in 0..depth {
            let width = m - d;
            let maps: Vec<CosetMap> = (1..(1usize << width))
                .map(|z| CosetMap::new(&Subspace::span(width, z).expect("nonzero line")))
                .collect();
            level = level
                .par_iter()
                .flat_map_iter(|g| maps.iter().map(move |c| project_generator(g, c)))
                .collect::<Result<Vec<_>>>()?;
        }
        let base_basis = level
            .iter()
            .map(|g| {
                let mut b = XorBasis::new(g.cols());
                for j in 0..base_len {
                    b.insert(g.row_words(j));
                }
                b
            })
            .collect();
        let children = if depth == 0 { 1 } else { (1 << m) - 1 };
        Ok(ProjectionTable {
            r,
            rows,
            base_len,
            children,
            bottom: level,
            base_basis,
        })
    }

    pub fn bottom_count(&self) -> usize {
        self.bottom.len()
    }

    /// Scores a selection of order-`r` rows, given as row indices of `F^{⊗m}`.
    pub fn score(&self, extra_rows: &[usize]) -> Result<ComplexityScore> {
        let local: Vec<usize> = extra_rows
            .iter()
            .map(|&i| {
                self.rows[self.base_len..]
                    .iter()
                    .position(|&x| x == i)
                    .map(|p| p + self.base_len)
                    .ok_or_else(|| {
                        Error::InvalidCode(format!("row {i} is not an order-{} row", self.r))
                    })
            })
            .collect::<Result<_>>()?;
        Ok(self.score_local(&local))
    }

    fn score_local(&self, local: &[usize]) -> ComplexityScore {
        let bottom_ranks: Vec<usize> = self
            .bottom
            .iter()
            .zip(&self.base_basis)
            .map(|(g, base)| {
                let mut b = base.clone();
                for &j in local {
                    b.insert(g.row_words(j));
                }
                b.rank()
            })
            .collect();
        let per_child = bottom_ranks.len() / self.children;
        let child_l: Vec<u64> = bottom_ranks
            .chunks(per_child)
            .map(|c| c.iter().map(|&r| 1u64 << r).sum())
            .collect();
        ComplexityScore {
            full_l: child_l.iter().sum(),
            child_l,
            bottom_ranks,
        }
    }
}

/// Complexity score of a subcode over its full decoding tree.
pub fn complexity_score(spec: &GeneratorSpec) -> Result<ComplexityScore> {
    spec.validate()?;
    ProjectionTable::new(spec.m, spec.order())?.score(&spec.extra_rows)
}

/// What [`search_selection`] optimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    MinFullL,
    MaxFullL,
    /// Minimize the sum of the `q0` smallest child contributions.
    MinSubsetL(usize),
}

impl Objective {
    fn value(&self, s: &ComplexityScore) -> u64 {
        match *self {
            Objective::MinFullL | Objective::MaxFullL => s.full_l,
            Objective::MinSubsetL(q0) => s.best_subset_l(q0),
        }
    }

    fn maximize(&self) -> bool {
        matches!(self, Objective::MaxFullL)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RandomBudget {
    pub samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy)]
pub struct SearchOptions {
    pub cap: u128,
    pub random_budget: Option<RandomBudget>,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            cap: SEARCH_CAP,
            random_budget: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub spec: GeneratorSpec,
    pub score: ComplexityScore,
    pub value: u64,
    pub evaluated: usize,
    pub total: u128,
    pub exhaustive: bool,
}

impl SearchOutcome {
    pub fn coverage(&self) -> f64 {
        self.evaluated as f64 / self.total as f64
    }
}

/// Lexicographic `k`-subsets of `0..n`.
struct Combinations {
    n: usize,
    cur: Option<Vec<usize>>,
}

impl Combinations {
    fn new(n: usize, k: usize) -> Self {
        Combinations {
            n,
            cur: (k <= n).then(|| (0..k).collect()),
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.cur.clone()?;
        let c = self.cur.as_mut().expect("checked above");
        let k = c.len();
        match (0..k).rev().find(|&i| c[i] < self.n - k + i) {
            Some(i) => {
                c[i] += 1;
                for j in i + 1..k {
                    c[j] = c[j - 1] + 1;
                }
            }
            None => self.cur = None,
        }
        Some(out)
    }
}

fn selection_space(m: usize, k: usize) -> Result<(usize, Vec<usize>, usize)> {
    check_m(m)?;
    let probe = GeneratorSpec {
        m,
        k,
        extra_rows: Vec::new(),
    };
    if k == 0 || k > probe.n() {
        return Err(Error::InvalidCode(format!("k = {k} outside 1..={}", probe.n())));
    }
    let r = probe.order();
    Ok((r, order_r_rows(m, r), k - probe.lower_dim()))
}

/// Scores every admissible row selection for an `(2^m, k)` subcode, in
/// lexicographic order of the selections.
pub fn score_all_selections(
    m: usize,
    k: usize,
    cap: u128,
) -> Result<Vec<(GeneratorSpec, ComplexityScore)>> {
    let (r, candidates, pick) = selection_space(m, k)?;
    let total = binomial(candidates.len(), pick);
    if total > cap {
        return Err(Error::SearchTooLarge { total, cap });
    }
    let table = ProjectionTable::new(m, r)?;
    let base_len = table.base_len;
    let combos: Vec<Vec<usize>> = Combinations::new(candidates.len(), pick).collect();
    Ok(combos
        .par_iter()
        .map(|c| {
            let local: Vec<usize> = c.iter().map(|&j| base_len + j).collect();
            let spec = GeneratorSpec {
                m,
                k,
                extra_rows: c.iter().map(|&j| candidates[j]).collect(),
            };
            (spec, table.score_local(&local))
        })
        .collect())
}

/// Finds an extreme row selection for the objective.
///
/// Exhaustive when the number of selections is within `opts.cap`, otherwise
/// seeded random sampling. Ties go to the lexicographically smallest rows.
pub fn search_selection(
    m: usize,
    k: usize,
    objective: Objective,
    opts: SearchOptions,
) -> Result<SearchOutcome> {
    let (r, candidates, pick) = selection_space(m, k)?;
    let total = binomial(candidates.len(), pick);
    let table = ProjectionTable::new(m, r)?;
    let base_len = table.base_len;

    let (combos, exhaustive): (Vec<Vec<usize>>, bool) = if total <= opts.cap {
        (Combinations::new(candidates.len(), pick).collect(), true)
    } else {
        let budget = opts.random_budget.ok_or(Error::SearchTooLarge {
            total,
            cap: opts.cap,
        })?;
        let mut rng = ChaCha8Rng::seed_from_u64(budget.seed);
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for _ in 0..budget.samples {
            let mut c = sample(&mut rng, candidates.len(), pick).into_vec();
            c.sort_unstable();
            if seen.insert(c.clone()) {
                out.push(c);
            }
        }
        (out, false)
    };
    if combos.is_empty() {
        return Err(Error::InvalidConfig("random search budget is zero".into()));
    }

    let maximize = objective.maximize();
    let best = combos
        .par_iter()
        .map(|c| {
            let local: Vec<usize> = c.iter().map(|&j| base_len + j).collect();
            let score = table.score_local(&local);
            (objective.value(&score), c, score)
        })
        .reduce_with(|a, b| {
            let better = if maximize { b.0 > a.0 } else { b.0 < a.0 };
            if better || (b.0 == a.0 && b.1 < a.1) {
                b
            } else {
                a
            }
        })
        .expect("non-empty candidate list");

    let spec = GeneratorSpec::new(m, k, best.1.iter().map(|&j| candidates[j]).collect())?;
    Ok(SearchOutcome {
        spec,
        value: best.0,
        score: best.2,
        evaluated: combos.len(),
        total,
        exhaustive,
    })
}
