//! Cross-modal alignment scoring and top-N₁ filtering.
//!
//! The canonical score of visual token `i` is the negated mean Euclidean
//! distance to every textual token:
//!
//! ```text
//! alpha_i = -(1/M) * sum_j || v_i - t_j ||_2
//! ```
//!
//! Under an isotropic Gaussian model of `p(v | t)` the mutual information
//! between a visual and a textual token is an affine, decreasing function of
//! their squared distance. The offset and scale are shared by every visual
//! token, so they cancel under top-k selection and are never computed.
//!
//! Two comparison metrics are provided: mean cosine similarity, and a
//! nearest-neighbour MI estimate computed per (visual, textual) pair by
//! treating the `d` embedding coordinates as `d` paired scalar samples.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PruneError, Result};
use crate::kernels;
use crate::ksg;
use crate::tokenset::{Selection, TokenMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CrossMetric {
    #[serde(rename = "l2")]
    L2,
    #[serde(rename = "cos")]
    Cosine,
    #[serde(rename = "mi-knn")]
    KnnMi,
}

impl fmt::Display for CrossMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CrossMetric::L2 => "l2",
            CrossMetric::Cosine => "cos",
            CrossMetric::KnnMi => "mi-knn",
        })
    }
}

impl FromStr for CrossMetric {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "l2" => Ok(CrossMetric::L2),
            "cos" | "cosine" => Ok(CrossMetric::Cosine),
            "mi-knn" | "knn-mi" => Ok(CrossMetric::KnnMi),
            other => Err(format!("unknown cross metric {other:?} (expected l2, cos, mi-knn)")),
        }
    }
}

/// One alignment score per visual token, index-aligned with the visual matrix.
/// Larger means better aligned with the text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentScores {
    pub metric: CrossMetric,
    pub values: Vec<f64>,
}

impl AlignmentScores {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn check_pair(visual: &TokenMatrix, textual: &TokenMatrix) -> Result<()> {
    if visual.dim() != textual.dim() {
        return Err(PruneError::DimMismatch {
            visual: visual.dim(),
            textual: textual.dim(),
        });
    }
    if textual.rows() == 0 {
        return Err(PruneError::EmptyText);
    }
    Ok(())
}

/// Negated mean L2 distance from each visual token to the textual set.
pub fn score_l2(visual: &TokenMatrix, textual: &TokenMatrix) -> Result<AlignmentScores> {
    check_pair(visual, textual)?;
    let m = textual.rows() as f64;
    let values = (0..visual.rows())
        .into_par_iter()
        .map(|i| {
            let v = visual.row(i);
            let mut sum = 0.0f64;
            for t in textual.iter_rows() {
                sum += kernels::distance(v, t);
            }
            -(sum / m)
        })
        .collect();
    Ok(AlignmentScores {
        metric: CrossMetric::L2,
        values,
    })
}

fn row_norms(m: &TokenMatrix) -> Result<Vec<f64>> {
    m.iter_rows()
        .enumerate()
        .map(|(row, r)| {
            let n = kernels::norm(r);
            if n > 0.0 {
                Ok(n)
            } else {
                Err(PruneError::ZeroNormToken {
                    row,
                    modality: m.modality(),
                })
            }
        })
        .collect()
}

/// Mean cosine similarity from each visual token to the textual set.
pub fn score_cosine(visual: &TokenMatrix, textual: &TokenMatrix) -> Result<AlignmentScores> {
    check_pair(visual, textual)?;
    let vn = row_norms(visual)?;
    let tn = row_norms(textual)?;
    let m = textual.rows() as f64;
    let values = (0..visual.rows())
        .into_par_iter()
        .map(|i| {
            let v = visual.row(i);
            let mut sum = 0.0f64;
            for (t, tnorm) in textual.iter_rows().zip(&tn) {
                sum += kernels::dot(v, t) / (vn[i] * tnorm);
            }
            sum / m
        })
        .collect();
    Ok(AlignmentScores {
        metric: CrossMetric::Cosine,
        values,
    })
}

/// Mean kNN mutual-information estimate from each visual token to the
/// textual set, with embedding coordinates as paired samples.
pub fn score_knn_mi(
    visual: &TokenMatrix,
    textual: &TokenMatrix,
    k: usize,
) -> Result<AlignmentScores> {
    check_pair(visual, textual)?;
    let d = visual.dim();
    if k == 0 || d <= k {
        return Err(PruneError::DimTooSmall { dim: d, k });
    }
    let to_f64 = |r: &[f32]| r.iter().map(|&v| f64::from(v)).collect::<Vec<_>>();
    let text: Vec<Vec<f64>> = textual.iter_rows().map(to_f64).collect();
    let m = textual.rows() as f64;
    let values = (0..visual.rows())
        .into_par_iter()
        .map(|i| {
            let v = to_f64(visual.row(i));
            let mut sum = 0.0f64;
            for t in &text {
                sum += ksg::mutual_information(&v, t, k);
            }
            sum / m
        })
        .collect();
    Ok(AlignmentScores {
        metric: CrossMetric::KnnMi,
        values,
    })
}

pub fn score(
    visual: &TokenMatrix,
    textual: &TokenMatrix,
    metric: CrossMetric,
    knn_k: usize,
) -> Result<AlignmentScores> {
    match metric {
        CrossMetric::L2 => score_l2(visual, textual),
        CrossMetric::Cosine => score_cosine(visual, textual),
        CrossMetric::KnnMi => score_knn_mi(visual, textual, knn_k),
    }
}

/// Higher score first; equal scores resolve to the lower index.
pub(crate) fn rank_order(a: (usize, f64), b: (usize, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

/// Keeps the `keep` best-aligned tokens. Indices come back ascending, with
/// the matching scores alongside.
pub fn select_top(scores: &AlignmentScores, keep: usize) -> Result<Selection> {
    let n = scores.len();
    if keep == 0 || keep > n {
        return Err(PruneError::KeepOutOfRange { keep, available: n });
    }
    let mut ranked: Vec<(usize, f64)> = scores.values.iter().copied().enumerate().collect();
    if keep < n {
        ranked.select_nth_unstable_by(keep - 1, |a, b| rank_order(*a, *b));
        ranked.truncate(keep);
    }
    ranked.sort_unstable_by_key(|&(i, _)| i);
    let (indices, kept): (Vec<usize>, Vec<f64>) = ranked.into_iter().unzip();
    Ok(Selection::new(n, indices, Some(kept))?)
}
