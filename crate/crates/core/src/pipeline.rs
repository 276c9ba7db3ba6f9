//! The two-stage pruning pipeline.
//!
//! Stage 1 keeps the `N₁` visual tokens best aligned with the text; stage 2
//! runs the greedy diversity selector over those survivors down to `N₂`.
//! Reports always speak in row indices of the original visual matrix.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::alignment::{self, AlignmentScores, CrossMetric};
use crate::error::{PruneError, Result};
use crate::repmax::{self, IntraMetric, SimilarityMatrix};
use crate::tokenset::{Selection, TokenMatrix};

pub const DEFAULT_STAGE1_RATIO: f64 = 0.8;
pub const DEFAULT_KNN_K: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieBreak {
    #[default]
    LowestIndex,
}

/// Every knob of the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneConfig {
    /// Final token count `N₂`.
    pub keep_final: usize,
    /// `N₁ / N` when `stage1_keep` is unset.
    pub stage1_ratio: f64,
    /// Explicit `N₁`; overrides the ratio.
    pub stage1_keep: Option<usize>,
    pub cross_metric: CrossMetric,
    pub intra_metric: IntraMetric,
    pub knn_k: usize,
    pub tie_break: TieBreak,
    pub rng_seed: u64,
}

impl PruneConfig {
    pub fn new(keep_final: usize) -> Self {
        PruneConfig {
            keep_final,
            stage1_ratio: DEFAULT_STAGE1_RATIO,
            stage1_keep: None,
            cross_metric: CrossMetric::L2,
            intra_metric: IntraMetric::CosineDissim,
            knn_k: DEFAULT_KNN_K,
            tie_break: TieBreak::LowestIndex,
            rng_seed: 0,
        }
    }

    pub fn with_ratio(mut self, ratio: f64) -> Self {
        self.stage1_ratio = ratio;
        self
    }

    pub fn with_stage1_keep(mut self, keep: usize) -> Self {
        self.stage1_keep = Some(keep);
        self
    }

    pub fn with_metrics(mut self, cross: CrossMetric, intra: IntraMetric) -> Self {
        self.cross_metric = cross;
        self.intra_metric = intra;
        self
    }

    /// Checks the config against a visual set of `n` tokens.
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.keep_final == 0 || self.keep_final > n {
            return Err(PruneError::KeepOutOfRange {
                keep: self.keep_final,
                available: n,
            });
        }
        if !(self.stage1_ratio > 0.0 && self.stage1_ratio <= 1.0) {
            return Err(PruneError::InvalidConfig(format!(
                "stage1_ratio {} must lie in (0, 1]",
                self.stage1_ratio
            )));
        }
        if self.knn_k == 0 {
            return Err(PruneError::InvalidConfig("knn_k must be at least 1".into()));
        }
        Ok(())
    }
}

/// Stage-1 keep count: the explicit count if set, else `ratio * n` rounded
/// to nearest (halves away from zero), clamped to `[keep_final, n]`.
pub fn resolve_n1(n: usize, config: &PruneConfig) -> usize {
    let raw = match config.stage1_keep {
        Some(k) => k,
        None => (config.stage1_ratio * n as f64).round() as usize,
    };
    raw.max(config.keep_final).min(n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AblationOrder {
    #[serde(rename = "align-repmax")]
    AlignThenRepMax,
    #[serde(rename = "repmax-align")]
    RepMaxThenAlign,
    #[serde(rename = "align-only")]
    AlignOnly,
    #[serde(rename = "repmax-only")]
    RepMaxOnly,
}

impl AblationOrder {
    pub const ALL: [AblationOrder; 4] = [
        AblationOrder::AlignThenRepMax,
        AblationOrder::RepMaxThenAlign,
        AblationOrder::AlignOnly,
        AblationOrder::RepMaxOnly,
    ];
}

impl fmt::Display for AblationOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AblationOrder::AlignThenRepMax => "align-repmax",
            AblationOrder::RepMaxThenAlign => "repmax-align",
            AblationOrder::AlignOnly => "align-only",
            AblationOrder::RepMaxOnly => "repmax-only",
        })
    }
}

impl FromStr for AblationOrder {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        AblationOrder::ALL
            .into_iter()
            .find(|o| o.to_string() == s)
            .ok_or_else(|| format!("unknown order {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Timings {
    pub stage1: f64,
    pub stage2: f64,
    pub total: f64,
}

/// Output of one pipeline run.
#[derive(Debug, Clone, PartialEq)]
pub struct PruneReport {
    /// First-stage survivors, original row indices.
    pub stage1: Selection,
    /// Final tokens, original row indices, in pick order.
    pub stage2: Selection,
    pub alignment_scores: AlignmentScores,
    /// Expected pairwise dissimilarity of the final set under the configured
    /// intra metric; `None` when fewer than two tokens are kept.
    pub objective_value: Option<f64>,
    /// Wall-clock milliseconds.
    pub timings: Timings,
    pub config: PruneConfig,
}

impl PruneReport {
    /// Equality on everything except timings.
    pub fn same_result(&self, other: &PruneReport) -> bool {
        self.stage1 == other.stage1
            && self.stage2 == other.stage2
            && self.alignment_scores == other.alignment_scores
            && self.objective_value.map(f64::to_bits) == other.objective_value.map(f64::to_bits)
            && self.config == other.config
    }
}

#[derive(Serialize)]
struct ReportJson<'a> {
    stage1_indices: &'a [usize],
    stage2_indices: &'a [usize],
    alignment_scores: &'a [f64],
    objective: Option<f64>,
    timings_ms: Timings,
    config: &'a PruneConfig,
}

impl Serialize for PruneReport {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ReportJson {
            stage1_indices: self.stage1.indices(),
            stage2_indices: self.stage2.indices(),
            alignment_scores: &self.alignment_scores.values,
            objective: self.objective_value,
            timings_ms: self.timings,
            config: &self.config,
        }
        .serialize(s)
    }
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

fn check_inputs(visual: &TokenMatrix, textual: &TokenMatrix, config: &PruneConfig) -> Result<()> {
    if visual.dim() != textual.dim() {
        return Err(PruneError::DimMismatch {
            visual: visual.dim(),
            textual: textual.dim(),
        });
    }
    config.validate(visual.rows())
}

/// Greedy diversity selection over `subset` rows of `visual`. Returns the
/// picks as original row indices plus, for the cosine metric, the objective
/// computed from the same similarity matrix.
fn diversify(
    visual: &TokenMatrix,
    subset: &Selection,
    keep: usize,
    metric: IntraMetric,
) -> Result<(Selection, Option<f64>)> {
    let (local, objective) = match metric {
        IntraMetric::CosineDissim => {
            let sim = repmax::build_similarity(visual, subset)?;
            let local = repmax::greedy_repmax(&sim, keep)?;
            let obj = cos_objective(&sim, local.indices());
            (local, obj)
        }
        IntraMetric::L2Dist => {
            let local = repmax::l2_dissim_variant(visual, subset, keep)?;
            let global: Vec<usize> = local.indices().iter().map(|&i| subset.indices()[i]).collect();
            let obj = l2_objective(visual, &global);
            (local, obj)
        }
    };
    let picks = local.remap(subset.indices(), visual.rows())?;
    Ok((picks, objective))
}

fn cos_objective(sim: &SimilarityMatrix, local: &[usize]) -> Option<f64> {
    (local.len() >= 2).then(|| repmax::objective_indices(sim, local).expect("indices in range"))
}

fn l2_objective(visual: &TokenMatrix, global: &[usize]) -> Option<f64> {
    (global.len() >= 2).then(|| repmax::objective_l2(visual, global).expect("indices in range"))
}

/// Objective of a final set given by original row indices.
pub fn set_objective(visual: &TokenMatrix, indices: &[usize], metric: IntraMetric) -> Result<Option<f64>> {
    if indices.len() < 2 {
        return Ok(None);
    }
    match metric {
        IntraMetric::CosineDissim => {
            let subset = Selection::new(visual.rows(), indices.to_vec(), None)?;
            let sim = repmax::build_similarity(visual, &subset)?;
            let local: Vec<usize> = (0..indices.len()).collect();
            Ok(cos_objective(&sim, &local))
        }
        IntraMetric::L2Dist => Ok(l2_objective(visual, indices)),
    }
}

/// Alignment filter to `N₁`, then greedy diversity selection to `N₂`.
pub fn prune(visual: &TokenMatrix, textual: &TokenMatrix, config: &PruneConfig) -> Result<PruneReport> {
    prune_ablation(visual, textual, config, AblationOrder::AlignThenRepMax)
}

/// Runs one stage ordering.
///
/// * `AlignThenRepMax`: the standard pipeline.
/// * `RepMaxThenAlign`: greedy to `N₁` over all tokens, then the `N₂` best
///   aligned survivors.
/// * `AlignOnly`: alignment filter straight to `N₂` (stage 1 and stage 2 in
///   the report coincide).
/// * `RepMaxOnly`: greedy straight to `N₂` over every token (stage 1 in the
///   report is the full set).
pub fn prune_ablation(
    visual: &TokenMatrix,
    textual: &TokenMatrix,
    config: &PruneConfig,
    order: AblationOrder,
) -> Result<PruneReport> {
    check_inputs(visual, textual, config)?;
    let n = visual.rows();
    let n1 = resolve_n1(n, config);
    let keep = config.keep_final;
    let start = Instant::now();

    let scores = alignment::score(visual, textual, config.cross_metric, config.knn_k)?;

    use AblationOrder::*;
    let (stage1, stage1_ms, stage2, objective) = match order {
        AlignThenRepMax => {
            let stage1 = alignment::select_top(&scores, n1)?;
            let stage1_ms = ms_since(start);
            let (stage2, obj) = diversify(visual, &stage1, keep, config.intra_metric)?;
            (stage1, stage1_ms, stage2, obj)
        }
        RepMaxThenAlign => {
            let (stage1, _) = diversify(visual, &Selection::all(n), n1, config.intra_metric)?;
            let stage1_ms = ms_since(start);
            let survivors = AlignmentScores {
                metric: scores.metric,
                values: stage1.indices().iter().map(|&i| scores.values[i]).collect(),
            };
            let stage2 = alignment::select_top(&survivors, keep)?.remap(stage1.indices(), n)?;
            let obj = set_objective(visual, stage2.indices(), config.intra_metric)?;
            (stage1, stage1_ms, stage2, obj)
        }
        AlignOnly => {
            let stage1 = alignment::select_top(&scores, keep)?;
            let stage1_ms = ms_since(start);
            let obj = set_objective(visual, stage1.indices(), config.intra_metric)?;
            (stage1.clone(), stage1_ms, stage1, obj)
        }
        RepMaxOnly => {
            let stage1 = Selection::all(n);
            let stage1_ms = ms_since(start);
            let (stage2, obj) = diversify(visual, &stage1, keep, config.intra_metric)?;
            (stage1, stage1_ms, stage2, obj)
        }
    };
    let total = ms_since(start);

    Ok(PruneReport {
        stage1,
        stage2,
        alignment_scores: scores,
        objective_value: objective,
        timings: Timings {
            stage1: stage1_ms,
            stage2: total - stage1_ms,
            total,
        },
        config: config.clone(),
    })
}
