//! Intra-modal diversity selection.
//!
//! The quality of a kept set `S` is the expected pairwise cosine
//! dissimilarity
//!
//! ```text
//! E(S) = 2 / (|S| (|S| - 1)) * sum_{i<j in S} (1 - C_ij)
//! ```
//!
//! Maximizing `E` at fixed `|S|` is NP-hard. [`greedy_repmax`] approximates it:
//! the seed is the token whose mean similarity to all tokens (diagonal
//! included) is lowest, and every later pick is the remaining token with the
//! lowest mean similarity to the tokens already picked. A running sum
//! `sigma_i = sum_{s in S} C_si` makes each step a single row addition.
//!
//! [`exact_solve`] enumerates all subsets for small instances and serves as
//! the oracle. [`maxmin_baseline`] and [`random_baseline`] are comparison arms.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PruneError, Result};
use crate::kernels;
use crate::tokenset::{Selection, TokenMatrix};

/// Default cap on the number of subsets [`exact_solve`] will enumerate.
pub const DEFAULT_ENUMERATION_CAP: u128 = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IntraMetric {
    #[serde(rename = "cos")]
    CosineDissim,
    #[serde(rename = "l2")]
    L2Dist,
}

impl fmt::Display for IntraMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IntraMetric::CosineDissim => "cos",
            IntraMetric::L2Dist => "l2",
        })
    }
}

impl FromStr for IntraMetric {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "cos" | "cosine" => Ok(IntraMetric::CosineDissim),
            "l2" => Ok(IntraMetric::L2Dist),
            other => Err(format!("unknown intra metric {other:?} (expected cos, l2)")),
        }
    }
}

/// `1 - cos(a, b)`, in `[0, 2]`.
pub fn cosine_dissim(a: &[f32], b: &[f32]) -> Result<f64> {
    let na = kernels::norm(a);
    if na == 0.0 {
        return Err(PruneError::ZeroNormToken {
            row: 0,
            modality: crate::tokenset::Modality::Unspecified,
        });
    }
    let nb = kernels::norm(b);
    if nb == 0.0 {
        return Err(PruneError::ZeroNormToken {
            row: 1,
            modality: crate::tokenset::Modality::Unspecified,
        });
    }
    let cos = (kernels::dot(a, b) / (na * nb)).clamp(-1.0, 1.0);
    Ok(1.0 - cos)
}

/// Symmetric pairwise cosine similarities of a token subset, unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl SimilarityMatrix {
    /// Wraps a row-major `n x n` matrix. The diagonal is overwritten with 1
    /// and the lower triangle mirrored from the upper one.
    pub fn from_entries(n: usize, mut entries: Vec<f64>) -> Self {
        assert_eq!(entries.len(), n * n);
        for i in 0..n {
            entries[i * n + i] = 1.0;
            for j in i + 1..n {
                entries[j * n + i] = entries[i * n + j];
            }
        }
        SimilarityMatrix { n, entries }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    fn affinity(&self) -> Affinity<'_> {
        Affinity {
            n: self.n,
            entries: &self.entries,
        }
    }
}

fn check_subset(tokens: &TokenMatrix, subset: &Selection) -> Result<()> {
    for &i in subset.indices() {
        if i >= tokens.rows() {
            return Err(PruneError::IndexOutOfRange {
                index: i,
                rows: tokens.rows(),
            });
        }
    }
    Ok(())
}

/// Builds the cosine similarity matrix over `subset` (in subset order).
/// Zero-norm rows are reported with their index in `tokens`.
pub fn build_similarity(tokens: &TokenMatrix, subset: &Selection) -> Result<SimilarityMatrix> {
    check_subset(tokens, subset)?;
    let idx = subset.indices();
    let n = idx.len();

    // Unit-normalize once; every entry is then a plain dot product.
    let dim = tokens.dim();
    let mut unit = vec![0.0f64; n * dim];
    for (k, &i) in idx.iter().enumerate() {
        let row = tokens.row(i);
        let norm = kernels::norm(row);
        if norm == 0.0 {
            return Err(PruneError::ZeroNormToken {
                row: i,
                modality: tokens.modality(),
            });
        }
        for (dst, &v) in unit[k * dim..(k + 1) * dim].iter_mut().zip(row) {
            *dst = f64::from(v) / norm;
        }
    }

    // Blocked like a matrix product: a strip of rows per task, the
    // embedding dimension in panels, then small row groups that stay in L1
    // while a block of partner rows streams past from L2.
    const STRIP: usize = 64;
    const GROUP: usize = 8;
    const PARTNERS: usize = 64;
    const PANEL: usize = 512;
    let mut entries = vec![0.0f64; n * n];
    entries
        .par_chunks_mut(STRIP * n.max(1))
        .enumerate()
        .for_each(|(strip, out)| {
            let s0 = strip * STRIP;
            let s1 = (s0 + STRIP).min(n);
            for p0 in (0..dim).step_by(PANEL) {
                let p1 = (p0 + PANEL).min(dim);
                let panel = |r: usize| &unit[r * dim + p0..r * dim + p1];
                for j0 in (s0 + 1..n).step_by(PARTNERS) {
                    let j1 = (j0 + PARTNERS).min(n);
                    for g0 in (s0..s1.min(j1)).step_by(GROUP) {
                        let g1 = (g0 + GROUP).min(s1);
                        for j in j0..j1 {
                            let b = panel(j);
                            for i in g0..g1.min(j) {
                                out[(i - s0) * n + j] += kernels::dot_f64(panel(i), b);
                            }
                        }
                    }
                }
            }
        });
    Ok(SimilarityMatrix::from_entries(n, entries))
}

fn pair_count(k: usize) -> f64 {
    (k * (k - 1)) as f64 / 2.0
}

/// Sums `dissim(a, b)` over chosen pairs, column by column: for every
/// position `b`, pairs `(0, b), (1, b), ..., (b-1, b)`. [`exact_solve`]
/// accumulates in the same order so both report identical bits.
fn pair_sum(chosen: &[usize], dissim: impl Fn(usize, usize) -> f64) -> f64 {
    let mut sum = 0.0f64;
    for b in 1..chosen.len() {
        for a in 0..b {
            sum += dissim(chosen[a], chosen[b]);
        }
    }
    sum
}

/// Mean cosine dissimilarity over unordered pairs of `chosen`
/// (indices into `sim`).
pub fn objective(sim: &SimilarityMatrix, chosen: &Selection) -> Result<f64> {
    objective_indices(sim, chosen.indices())
}

pub fn objective_indices(sim: &SimilarityMatrix, chosen: &[usize]) -> Result<f64> {
    let k = chosen.len();
    if k < 2 {
        return Err(PruneError::TooFewTokens { got: k });
    }
    for &i in chosen {
        if i >= sim.n {
            return Err(PruneError::IndexOutOfRange { index: i, rows: sim.n });
        }
    }
    Ok(pair_sum(chosen, |a, b| 1.0 - sim.get(a, b)) / pair_count(k))
}

/// Mean pairwise Euclidean distance over `chosen` rows of `tokens`.
pub fn objective_l2(tokens: &TokenMatrix, chosen: &[usize]) -> Result<f64> {
    let k = chosen.len();
    if k < 2 {
        return Err(PruneError::TooFewTokens { got: k });
    }
    Ok(pair_sum(chosen, |a, b| kernels::distance(tokens.row(a), tokens.row(b))) / pair_count(k))
}

/// A square affinity ("higher = more alike") matrix driving the greedy loop.
#[derive(Clone, Copy)]
struct Affinity<'a> {
    n: usize,
    entries: &'a [f64],
}

impl<'a> Affinity<'a> {
    fn row(&self, i: usize) -> &'a [f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    /// Index of the lowest mean affinity over all columns (diagonal included),
    /// lowest index on ties, with that mean.
    fn seed(&self) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for i in 0..self.n {
            let mean = self.row(i).iter().sum::<f64>() / self.n as f64;
            if mean < best.1 {
                best = (i, mean);
            }
        }
        best
    }
}

/// Incremental state of the greedy selector.
#[derive(Debug, Clone)]
pub struct GreedyState<'a> {
    n: usize,
    entries: &'a [f64],
    selected: Vec<usize>,
    scores: Vec<f64>,
    in_selected: Vec<bool>,
    sigma: Vec<f64>,
}

impl<'a> GreedyState<'a> {
    pub fn new(sim: &'a SimilarityMatrix) -> Self {
        Self::from_affinity(sim.affinity())
    }

    fn from_affinity(aff: Affinity<'a>) -> Self {
        GreedyState {
            n: aff.n,
            entries: aff.entries,
            selected: Vec::new(),
            scores: Vec::new(),
            in_selected: vec![false; aff.n],
            sigma: vec![0.0; aff.n],
        }
    }

    fn aff(&self) -> Affinity<'a> {
        Affinity {
            n: self.n,
            entries: self.entries,
        }
    }

    /// Number of picks made so far.
    pub fn step_count(&self) -> usize {
        self.selected.len()
    }

    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    /// Per-pick scores: the seed's row mean, then each pick's mean
    /// similarity to the tokens picked before it.
    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn remaining(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&i| !self.in_selected[i])
    }

    /// Accumulated similarity of every token to the selected set.
    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    /// Makes one pick. Returns `None` once every token is selected.
    pub fn step(&mut self) -> Option<usize> {
        let t = self.selected.len();
        if t == self.n {
            return None;
        }
        let (pick, score) = if t == 0 {
            self.aff().seed()
        } else {
            let denom = t as f64;
            let mut best = (usize::MAX, f64::INFINITY);
            for i in 0..self.n {
                if self.in_selected[i] {
                    continue;
                }
                let c = self.sigma[i] / denom;
                if c < best.1 || best.0 == usize::MAX {
                    best = (i, c);
                }
            }
            best
        };
        let row = self.aff().row(pick);
        for (s, r) in self.sigma.iter_mut().zip(row) {
            *s += r;
        }
        self.selected.push(pick);
        self.scores.push(score);
        self.in_selected[pick] = true;
        Some(pick)
    }

    pub fn into_selection(self) -> Selection {
        Selection::new(self.n, self.selected, Some(self.scores))
            .expect("greedy picks are distinct and in range")
    }
}

fn check_keep(keep: usize, n: usize) -> Result<()> {
    if keep == 0 || keep > n {
        return Err(PruneError::KeepOutOfRange { keep, available: n });
    }
    Ok(())
}

fn run_greedy(aff: Affinity<'_>, keep: usize) -> Result<Selection> {
    check_keep(keep, aff.n)?;
    let mut state = GreedyState::from_affinity(aff);
    for _ in 0..keep {
        state.step();
    }
    Ok(state.into_selection())
}

/// Greedy maximization of expected pairwise cosine dissimilarity. Returns
/// `keep` indices into `sim` in pick order.
pub fn greedy_repmax(sim: &SimilarityMatrix, keep: usize) -> Result<Selection> {
    run_greedy(sim.affinity(), keep)
}

/// Negated pairwise Euclidean distances over `subset`, zero diagonal.
fn l2_affinity(tokens: &TokenMatrix, subset: &Selection) -> Result<Vec<f64>> {
    check_subset(tokens, subset)?;
    let idx = subset.indices();
    let n = idx.len();
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i + 1..n)
                .map(|j| -kernels::distance(tokens.row(idx[i]), tokens.row(idx[j])))
                .collect()
        })
        .collect();
    let mut entries = vec![0.0f64; n * n];
    for (i, row) in upper.into_iter().enumerate() {
        for (off, v) in row.into_iter().enumerate() {
            let j = i + 1 + off;
            entries[i * n + j] = v;
            entries[j * n + i] = v;
        }
    }
    Ok(entries)
}

/// The greedy loop with pairwise Euclidean distance as the dissimilarity.
/// Returned indices are positions within `subset`.
pub fn l2_dissim_variant(tokens: &TokenMatrix, subset: &Selection, keep: usize) -> Result<Selection> {
    let entries = l2_affinity(tokens, subset)?;
    run_greedy(
        Affinity {
            n: subset.len(),
            entries: &entries,
        },
        keep,
    )
}

/// Farthest-point selection on cosine dissimilarity: seed as the greedy
/// selector does, then repeatedly add the token whose minimum dissimilarity
/// to the selected set is largest. Scores record that minimum per pick.
pub fn maxmin_baseline(sim: &SimilarityMatrix, keep: usize) -> Result<Selection> {
    let n = sim.n;
    check_keep(keep, n)?;
    let (seed, seed_score) = sim.affinity().seed();
    let mut picked = vec![false; n];
    let mut order = vec![seed];
    let mut scores = vec![seed_score];
    picked[seed] = true;
    let mut min_dist: Vec<f64> = sim.row(seed).iter().map(|c| 1.0 - c).collect();
    while order.len() < keep {
        let mut best = (usize::MAX, f64::NEG_INFINITY);
        for i in 0..n {
            if !picked[i] && (min_dist[i] > best.1 || best.0 == usize::MAX) {
                best = (i, min_dist[i]);
            }
        }
        let (pick, d) = best;
        picked[pick] = true;
        order.push(pick);
        scores.push(d);
        for (m, c) in min_dist.iter_mut().zip(sim.row(pick)) {
            *m = m.min(1.0 - c);
        }
    }
    Ok(Selection::new(n, order, Some(scores))?)
}

/// Uniform sample of `keep` distinct indices from `0..n`, fixed per seed.
pub fn random_baseline(n: usize, keep: usize, seed: u64) -> Result<Selection> {
    if keep > n {
        return Err(PruneError::KeepOutOfRange { keep, available: n });
    }
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let indices = rand::seq::index::sample(&mut rng, n, keep).into_vec();
    Ok(Selection::new(n, indices, None)?)
}

/// `C(n, k)` without overflow for the sizes we care about.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

struct Best {
    sum: f64,
    combo: Vec<usize>,
}

fn search(
    sim: &SimilarityMatrix,
    keep: usize,
    combo: &mut Vec<usize>,
    sum: f64,
    best: &mut Option<Best>,
) {
    if combo.len() == keep {
        if best.as_ref().is_none_or(|b| sum > b.sum) {
            *best = Some(Best {
                sum,
                combo: combo.clone(),
            });
        }
        return;
    }
    let next = combo.last().map_or(0, |&l| l + 1);
    let need = keep - combo.len();
    for j in next..=sim.n - need {
        let mut s = sum;
        for &a in combo.iter() {
            s += 1.0 - sim.get(a, j);
        }
        combo.push(j);
        search(sim, keep, combo, s, best);
        combo.pop();
    }
}

/// Exhaustive maximization of the expected pairwise dissimilarity.
/// Among equal maximizers the lexicographically smallest index set wins.
pub fn exact_solve(sim: &SimilarityMatrix, keep: usize) -> Result<Selection> {
    exact_solve_capped(sim, keep, DEFAULT_ENUMERATION_CAP)
}

pub fn exact_solve_capped(sim: &SimilarityMatrix, keep: usize, cap: u128) -> Result<Selection> {
    let n = sim.n;
    check_keep(keep, n)?;
    let subsets = binomial(n, keep);
    if subsets > cap {
        return Err(PruneError::TooLarge { subsets, cap });
    }
    if keep == 1 {
        return Ok(Selection::new(n, vec![0], None)?);
    }
    // One branch per leading index; merging in ascending order keeps the
    // lexicographic tie-break independent of scheduling.
    let branches: Vec<Option<Best>> = (0..=n - keep)
        .into_par_iter()
        .map(|first| {
            let mut best = None;
            let mut combo = Vec::with_capacity(keep);
            combo.push(first);
            search(sim, keep, &mut combo, 0.0, &mut best);
            best
        })
        .collect();
    let mut winner: Option<Best> = None;
    for b in branches.into_iter().flatten() {
        if winner.as_ref().is_none_or(|w| b.sum > w.sum) {
            winner = Some(b);
        }
    }
    let best = winner.expect("at least one subset");
    Ok(Selection::new(n, best.combo, None)?)
}
